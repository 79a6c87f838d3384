use std::path::PathBuf;

use proptest::prelude::*;
use qrobust_core::mnist::{parse_idx_images, parse_idx_images_raw, parse_idx_labels, write_idx_images, write_idx_labels};

/// Minimal decoder written against the file layout alone: four big-endian
/// words of header, then one byte per pixel.
fn one_off_first_image(bytes: &[u8]) -> (u32, Vec<u8>) {
    let word = |i: usize| u32::from_be_bytes([bytes[4 * i], bytes[4 * i + 1], bytes[4 * i + 2], bytes[4 * i + 3]]);
    let (count, rows, cols) = (word(1), word(2) as usize, word(3) as usize);
    (count, bytes[16..16 + rows * cols].to_vec())
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("QROBUST_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

#[test]
fn official_training_files_match_independent_decoder() {
    let dir = mnist_dir();
    let (Some(images), Some(labels)) = (
        std::fs::read(dir.join("train-images-idx3-ubyte")).ok(),
        std::fs::read(dir.join("train-labels-idx1-ubyte")).ok(),
    ) else {
        eprintln!("skipping: MNIST not found under {}", dir.display());
        return;
    };
    let (count, first) = one_off_first_image(&images);
    let parsed = parse_idx_images(&images).unwrap();
    assert_eq!(parsed.len(), 60_000);
    assert_eq!(count, 60_000);
    let want_max = *first.iter().max().unwrap() as f64 / 255.0;
    let got_max = parsed[0].values().iter().cloned().fold(0.0, f64::max);
    assert_eq!(got_max, want_max);

    let parsed_labels = parse_idx_labels(&labels).unwrap();
    assert_eq!(parsed_labels.len(), 60_000);
    assert_eq!(parsed_labels[0], labels[8]);

    // Writing back the parsed set reproduces the file.
    assert_eq!(write_idx_images(&parsed).unwrap(), images);
    assert_eq!(write_idx_labels(&parsed_labels).unwrap(), labels);
}

fn idx_images(count: u32, rows: u32, cols: u32, payload: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    for w in [0x0000_0803u32, count, rows, cols] {
        b.extend_from_slice(&w.to_be_bytes());
    }
    b.extend_from_slice(payload);
    b
}

proptest! {
    #[test]
    fn image_roundtrip_is_bit_exact(count in 1u32..5, rows in 1u32..6, cols in 1u32..6, seed in any::<u64>()) {
        let n = (count * rows * cols) as usize;
        let payload: Vec<u8> = (0..n).map(|i| (seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 56) as u8).collect();
        let bytes = idx_images(count, rows, cols, &payload);
        let parsed = parse_idx_images(&bytes).unwrap();
        prop_assert_eq!(write_idx_images(&parsed).unwrap(), bytes.clone());
        let raw = parse_idx_images_raw(&bytes).unwrap();
        for (i, t) in parsed.iter().enumerate() {
            let back: Vec<u8> = t.values().iter().map(|v| (v * 255.0).round() as u8).collect();
            prop_assert_eq!(back.as_slice(), raw.image_bytes(i));
        }
    }

    #[test]
    fn label_roundtrip_is_bit_exact(labels in prop::collection::vec(0u8..10, 0..50)) {
        let bytes = write_idx_labels(&labels).unwrap();
        prop_assert_eq!(parse_idx_labels(&bytes).unwrap(), labels);
    }

    #[test]
    fn truncation_is_a_format_error(cut in 0usize..40) {
        let bytes = idx_images(2, 2, 3, &[7; 12]);
        let short = &bytes[..cut.min(bytes.len() - 1)];
        let is_format = matches!(parse_idx_images(short), Err(qrobust_core::Error::Format { .. }));
        prop_assert!(is_format);
    }
}
