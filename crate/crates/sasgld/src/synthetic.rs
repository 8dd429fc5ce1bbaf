//! Procedurally generated stand-in dataset: ten 28×28 glyph classes with
//! random shifts, per-example intensity, and pixel noise. Entirely
//! deterministic in the seed, so runs are reproducible without shipping
//! binary data or downloading anything.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::core::{new_rng, streams};
use crate::data_io::LabeledImageSet;

pub const SIDE: usize = 28;
pub const N_CLASSES: usize = 10;

/// Glyph membership test in canvas coordinates centered on (13.5, 13.5).
/// The shapes are chosen to overlap pairwise (plus contains both bars, X
/// contains both diagonals) so a linear probe cannot solve the task by a
/// single pixel.
fn in_glyph(class: u8, row: f64, col: f64) -> bool {
    let y = row - 13.5;
    let x = col - 13.5;
    match class {
        0 => {
            let d = (x * x + y * y).sqrt();
            (4.5..=7.0).contains(&d)
        }
        1 => x.abs() <= 1.5 && y.abs() <= 8.0,
        2 => y.abs() <= 1.5 && x.abs() <= 8.0,
        3 => (x - y).abs() <= 1.8 && x.abs() <= 8.0 && y.abs() <= 8.0,
        4 => (x + y).abs() <= 1.8 && x.abs() <= 8.0 && y.abs() <= 8.0,
        5 => x.abs() <= 4.5 && y.abs() <= 4.5,
        6 => {
            let m = x.abs().max(y.abs());
            (5.0..=7.0).contains(&m)
        }
        7 => (x.abs() <= 1.5 && y.abs() <= 8.0) || (y.abs() <= 1.5 && x.abs() <= 8.0),
        8 => ((x - y).abs() <= 1.8 || (x + y).abs() <= 1.8) && x.abs() <= 8.0 && y.abs() <= 8.0,
        9 => (y.abs() - 4.0).abs() <= 1.5 && x.abs() <= 7.0,
        _ => panic!("class {class} out of range"),
    }
}

/// Renders one jittered example of `class` into a flat 784-byte row.
pub fn generate_image(class: u8, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let dy = rng.random_range(-3..=3);
    let dx = rng.random_range(-3..=3);
    let base = rng.random_range(180.0..=255.0f64);
    let mut row = Vec::with_capacity(SIDE * SIDE);
    for r in 0..SIDE {
        for c in 0..SIDE {
            let v = if in_glyph(class, (r as i32 - dy) as f64, (c as i32 - dx) as f64) {
                (base + rng.random_range(-30.0..30.0)).clamp(0.0, 255.0)
            } else if rng.random_range(0.0..1.0) < 0.02 {
                rng.random_range(60.0..160.0)
            } else {
                rng.random_range(0.0..12.0)
            };
            row.push(v as u8);
        }
    }
    row
}

fn generate_split(n: usize, rng: &mut ChaCha8Rng) -> LabeledImageSet {
    // Cycle through the classes for exact balance, then shuffle the order.
    let mut labels: Vec<u8> = (0..n).map(|i| (i % N_CLASSES) as u8).collect();
    labels.shuffle(rng);
    let mut flat = Vec::with_capacity(n * SIDE * SIDE);
    for &class in &labels {
        flat.extend(generate_image(class, rng));
    }
    let images = Array2::from_shape_vec((n, SIDE * SIDE), flat).expect("row count");
    LabeledImageSet::new(images, labels).expect("labels constructed in range")
}

/// Deterministic train/test pair drawn from the dedicated data stream of
/// the root seed.
pub fn generate_dataset(n_train: usize, n_test: usize, seed: u64) -> (LabeledImageSet, LabeledImageSet) {
    let mut rng = new_rng(seed, streams::DATA);
    let train = generate_split(n_train, &mut rng);
    let test = generate_split(n_test, &mut rng);
    (train, test)
}
