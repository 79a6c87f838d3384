//! MNIST IDX ingestion, normalization and class-filtered subsets.
//!
//! IDX layout: big-endian `u32` magic (`0x00000803` images, `0x00000801`
//! labels), big-endian `u32` dimensions, then unsigned-byte payload. Gzipped
//! files are detected by their `1f 8b` header and decompressed transparently.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};
use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Decoded from 8-bit pixels; `index` is the position in the source file.
    Idx { index: usize },
    /// Produced in-process (synthetic tests, adversarial generation).
    Generated,
}

/// Row-major grid of intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    values: Vec<f64>,
    pub provenance: Provenance,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height * width != values.len() {
            return Err(Error::invalid(format!(
                "{height}x{width} tensor needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(ImageTensor {
            height,
            width,
            values,
            provenance: Provenance::Generated,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        ImageTensor {
            height,
            width,
            values: vec![0.0; height * width],
            provenance: Provenance::Generated,
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Self {
        ImageTensor {
            height,
            width,
            values: bytes.iter().map(|b| f64::from(*b) / 255.0).collect(),
            provenance: Provenance::Generated,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Pixel at signed coordinates, zero outside the grid.
    #[inline]
    pub fn get_padded(&self, row: isize, col: isize) -> f64 {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            0.0
        } else {
            self.values[row as usize * self.width + col as usize]
        }
    }

    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Rounds back to the 0–255 byte scale.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().map(|v| (v * 255.0).round() as u8).collect()
    }
}

/// Undecoded IDX image payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        if self.rows * self.cols == 0 {
            0
        } else {
            self.pixels.len() / (self.rows * self.cols)
        }
    }

    pub fn image_bytes(&self, index: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[index * n..(index + 1) * n]
    }

    pub fn tensor(&self, index: usize) -> ImageTensor {
        let mut t = ImageTensor::from_bytes(self.rows, self.cols, self.image_bytes(index));
        t.provenance = Provenance::Idx { index };
        t
    }

    pub fn to_tensors(&self) -> Vec<ImageTensor> {
        (0..self.count()).map(|i| self.tensor(i)).collect()
    }
}

fn maybe_gunzip(bytes: &[u8]) -> Result<std::borrow::Cow<'_, [u8]>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| Error::format(0, format!("gzip decompression failed: {e}")))?;
        Ok(out.into())
    } else {
        Ok(bytes.into())
    }
}

fn read_header(cur: &mut Cursor<&[u8]>, expected_magic: u32, dims: usize) -> Result<Vec<usize>> {
    let read = |cur: &mut Cursor<&[u8]>, what: &str| {
        let offset = cur.position();
        cur.read_u32::<BigEndian>()
            .map_err(|_| Error::format(offset, format!("truncated header while reading {what}")))
    };
    let magic = read(cur, "magic")?;
    if magic != expected_magic {
        return Err(Error::format(0, format!("bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}")));
    }
    (0..dims).map(|_| read(cur, "dimension").map(|d| d as usize)).collect()
}

/// Parses an IDX image file without normalizing.
pub fn parse_idx_images_raw(bytes: &[u8]) -> Result<IdxImages> {
    let data = maybe_gunzip(bytes)?;
    let mut cur = Cursor::new(&data[..]);
    let dims = read_header(&mut cur, IMAGE_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let start = cur.position() as usize;
    let need = count
        .checked_mul(rows)
        .and_then(|x| x.checked_mul(cols))
        .ok_or_else(|| Error::format(4, "image dimensions overflow"))?;
    let available = data.len() - start;
    if available < need {
        return Err(Error::format(
            data.len() as u64,
            format!("truncated pixel payload: expected {need} bytes, found {available}"),
        ));
    }
    Ok(IdxImages {
        rows,
        cols,
        pixels: data[start..start + need].to_vec(),
    })
}

/// Parses an IDX image file, scaling bytes by 1/255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<ImageTensor>> {
    Ok(parse_idx_images_raw(bytes)?.to_tensors())
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let data = maybe_gunzip(bytes)?;
    let mut cur = Cursor::new(&data[..]);
    let count = read_header(&mut cur, LABEL_MAGIC, 1)?[0];
    let start = cur.position() as usize;
    let available = data.len() - start;
    if available < count {
        return Err(Error::format(
            data.len() as u64,
            format!("truncated label payload: expected {count} bytes, found {available}"),
        ));
    }
    let labels = data[start..start + count].to_vec();
    if let Some(pos) = labels.iter().position(|l| *l > 9) {
        return Err(Error::format((start + pos) as u64, format!("label {} is not a digit", labels[pos])));
    }
    Ok(labels)
}

/// Encodes images as an uncompressed IDX file; values are rounded to bytes.
pub fn write_idx_images(images: &[ImageTensor]) -> Result<Vec<u8>> {
    let (rows, cols) = images.first().map_or((0, 0), |t| (t.height, t.width));
    if images.iter().any(|t| t.height != rows || t.width != cols) {
        return Err(Error::invalid("all images must share one shape"));
    }
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.write_u32::<BigEndian>(IMAGE_MAGIC)?;
    for d in [images.len(), rows, cols] {
        out.write_u32::<BigEndian>(d as u32)?;
    }
    for t in images {
        out.write_all(&t.to_bytes())?;
    }
    Ok(out)
}

pub fn write_idx_labels(labels: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.write_u32::<BigEndian>(LABEL_MAGIC)?;
    out.write_u32::<BigEndian>(labels.len() as u32)?;
    out.write_all(labels)?;
    Ok(out)
}

/// Images with contiguous class indices and the digit each class came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub images: Vec<ImageTensor>,
    pub labels: Vec<usize>,
    /// `class_map[digit] = class`.
    pub class_map: BTreeMap<u8, usize>,
}

impl LabeledDataset {
    /// Wraps raw digit labels, mapping each digit present to itself.
    pub fn from_digits(images: Vec<ImageTensor>, digits: &[u8]) -> Result<Self> {
        if images.len() != digits.len() {
            return Err(Error::invalid(format!("{} images but {} labels", images.len(), digits.len())));
        }
        let class_map = (0..=9u8).map(|d| (d, d as usize)).collect();
        Ok(LabeledDataset {
            images,
            labels: digits.iter().map(|d| *d as usize).collect(),
            class_map,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_map.len()
    }

    /// Digit for each class index, ascending.
    pub fn digits(&self) -> Vec<u8> {
        let mut d: Vec<(usize, u8)> = self.class_map.iter().map(|(d, c)| (*c, *d)).collect();
        d.sort_unstable();
        d.into_iter().map(|(_, d)| d).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ImageTensor, usize)> {
        self.images.iter().zip(self.labels.iter().copied())
    }

    /// Labels converted back to their digits, for IDX export.
    pub fn digit_labels(&self) -> Vec<u8> {
        let digits = self.digits();
        self.labels.iter().map(|c| digits[*c]).collect()
    }
}

fn class_map_for(digits: &BTreeSet<u8>) -> BTreeMap<u8, usize> {
    digits.iter().enumerate().map(|(c, d)| (*d, c)).collect()
}

/// Picks the indices to keep: filter by digit, cap per class, then shuffle.
fn select_indices(labels: &[u8], digits: &BTreeSet<u8>, per_class_cap: Option<usize>, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for d in digits {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|i| labels[*i] == *d).collect();
        idx.shuffle(&mut rng);
        if let Some(cap) = per_class_cap {
            idx.truncate(cap);
        }
        chosen.extend(idx);
    }
    chosen.shuffle(&mut rng);
    chosen
}

/// Keeps only `digits`, remapped to classes in ascending digit order, with
/// at most `per_class_cap` samples per class and a seeded ordering.
pub fn subset(dataset: &LabeledDataset, digits: &BTreeSet<u8>, per_class_cap: Option<usize>, seed: u64) -> Result<LabeledDataset> {
    if digits.is_empty() {
        return Err(Error::invalid("digit set must not be empty"));
    }
    let source_digits = dataset.digits();
    let raw: Vec<u8> = dataset.labels.iter().map(|c| source_digits[*c]).collect();
    let keep = select_indices(&raw, digits, per_class_cap, seed);
    if keep.is_empty() {
        return Err(Error::EmptyDataset(format!("no samples for digits {digits:?}")));
    }
    let class_map = class_map_for(digits);
    Ok(LabeledDataset {
        images: keep.iter().map(|i| dataset.images[*i].clone()).collect(),
        labels: keep.iter().map(|i| class_map[&raw[*i]]).collect(),
        class_map,
    })
}

/// [`subset`] applied directly to raw IDX payloads; only kept images are decoded.
pub fn subset_raw(images: &IdxImages, labels: &[u8], digits: &BTreeSet<u8>, per_class_cap: Option<usize>, seed: u64) -> Result<LabeledDataset> {
    if images.count() != labels.len() {
        return Err(Error::invalid(format!("{} images but {} labels", images.count(), labels.len())));
    }
    if digits.is_empty() {
        return Err(Error::invalid("digit set must not be empty"));
    }
    let keep = select_indices(labels, digits, per_class_cap, seed);
    if keep.is_empty() {
        return Err(Error::EmptyDataset(format!("no samples for digits {digits:?}")));
    }
    let class_map = class_map_for(digits);
    Ok(LabeledDataset {
        images: keep.iter().map(|i| images.tensor(*i)).collect(),
        labels: keep.iter().map(|i| class_map[&labels[*i]]).collect(),
        class_map,
    })
}

/// Reads an image file and its label file, then takes a [`subset_raw`].
pub fn load_subset(images_path: &Path, labels_path: &Path, digits: &BTreeSet<u8>, per_class_cap: Option<usize>, seed: u64) -> Result<LabeledDataset> {
    let images = parse_idx_images_raw(&std::fs::read(images_path)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels_path)?)?;
    subset_raw(&images, &labels, digits, per_class_cap, seed)
}
