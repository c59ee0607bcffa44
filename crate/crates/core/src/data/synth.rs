//! Deterministic synthetic corpora in the exact on-disk formats of the real
//! benchmark datasets.
//!
//! The digit corpus renders jittered glyphs (random shift, scale, rotation,
//! stroke intensity, pixel noise) into 28x28 grayscale IDX files, so the
//! whole pipeline from binary parsing to training can run end-to-end when
//! the real benchmark files are not on disk. Every sample is a fresh render;
//! generalizing to held-out samples requires actually learning the glyph
//! classes.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};

use super::cifar::{write_cifar, CifarVariant};
use super::idx::{write_idx_images, write_idx_labels};
use super::{DataError, MNIST_FILES};
use crate::SeededRng;

/// 5x7 digit glyphs, one row per string.
const FONT: [[&str; 7]; 10] = [
    ["01110", "10001", "10011", "10101", "11001", "10001", "01110"],
    ["00100", "01100", "00100", "00100", "00100", "00100", "01110"],
    ["01110", "10001", "00001", "00010", "00100", "01000", "11111"],
    ["11111", "00010", "00100", "00010", "00001", "10001", "01110"],
    ["00010", "00110", "01010", "10010", "11111", "00010", "00010"],
    ["11111", "10000", "11110", "00001", "00001", "10001", "01110"],
    ["00110", "01000", "10000", "11110", "10001", "10001", "01110"],
    ["11111", "00001", "00010", "00100", "01000", "01000", "01000"],
    ["01110", "10001", "10001", "01110", "10001", "10001", "01110"],
    ["01110", "10001", "10001", "01111", "00001", "00010", "01100"],
];

fn glyph_on(digit: usize, u: f64, v: f64) -> bool {
    if !(0.0..5.0).contains(&u) || !(0.0..7.0).contains(&v) {
        return false;
    }
    FONT[digit][v as usize].as_bytes()[u as usize] == b'1'
}

/// Renders one 28x28 digit with randomized affine jitter and noise.
fn render_digit(digit: usize, rng: &mut SeededRng) -> [u8; 784] {
    let scale_x = rng.gen_range(2.6..3.4);
    let scale_y = rng.gen_range(2.4..3.0);
    let theta = rng.gen_range(-0.18..0.18f64);
    let dx = rng.gen_range(-2.0..2.0);
    let dy = rng.gen_range(-2.0..2.0);
    let intensity = rng.gen_range(0.65..1.0);
    let noise_sigma = 0.04;
    let (sin_t, cos_t) = theta.sin_cos();

    let mut out = [0u8; 784];
    for y in 0..28usize {
        for x in 0..28usize {
            // 2x2 supersampling for soft stroke edges.
            let mut coverage = 0.0;
            for sy in 0..2 {
                for sx in 0..2 {
                    let px = x as f64 + 0.25 + 0.5 * sx as f64 - 14.0 - dx;
                    let py = y as f64 + 0.25 + 0.5 * sy as f64 - 14.0 - dy;
                    let u = (px * cos_t + py * sin_t) / scale_x + 2.5;
                    let v = (-px * sin_t + py * cos_t) / scale_y + 3.5;
                    if glyph_on(digit, u, v) {
                        coverage += 0.25;
                    }
                }
            }
            // Box-Muller noise from two uniform draws.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen::<f64>();
            let gauss = (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos();
            let value = (intensity * coverage + noise_sigma * gauss).clamp(0.0, 1.0);
            out[y * 28 + x] = (value * 255.0).round() as u8;
        }
    }
    out
}

/// Generates `n` labeled digit renders with near-balanced classes, shuffled.
pub fn generate_digits(n: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    use rand::seq::SliceRandom;
    labels.shuffle(&mut rng);
    let mut pixels = Vec::with_capacity(n * 784);
    for &label in &labels {
        pixels.extend_from_slice(&render_digit(label as usize, &mut rng));
    }
    (pixels, labels)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    std::fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a synthetic digit corpus in the four-file MNIST layout.
pub fn write_synthetic_mnist(
    dir: &Path,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(), DataError> {
    let (train_pixels, train_labels) = generate_digits(n_train, seed);
    let (test_pixels, test_labels) = generate_digits(n_test, seed.wrapping_add(1));
    write(&dir.join(MNIST_FILES[0]), &write_idx_images(n_train, 28, 28, &train_pixels))?;
    write(&dir.join(MNIST_FILES[1]), &write_idx_labels(&train_labels))?;
    write(&dir.join(MNIST_FILES[2]), &write_idx_images(n_test, 28, 28, &test_pixels))?;
    write(&dir.join(MNIST_FILES[3]), &write_idx_labels(&test_labels))?;
    Ok(())
}

fn pattern_pixels(labels: &[usize], classes: usize, rng: &mut SeededRng) -> Vec<u8> {
    // Class-coded color stripes with noise; enough structure to sanity-check
    // plumbing, not intended as a learning benchmark.
    let mut pixels = Vec::with_capacity(labels.len() * 3072);
    for &label in labels {
        let hue = label as f64 / classes as f64;
        for y in 0..32usize {
            for x in 0..32usize {
                let stripe = ((x + y * (1 + label % 3)) / 4) % 2 == 0;
                let base = if stripe { 0.75 } else { 0.25 };
                for c in 0..3usize {
                    let tint = (hue * (c + 1) as f64 * 2.0 * PI).sin() * 0.2;
                    let noise = rng.gen_range(-0.08..0.08);
                    let v = (base + tint + noise).clamp(0.0, 1.0);
                    pixels.push((v * 255.0).round() as u8);
                }
            }
        }
    }
    pixels
}

/// Writes a synthetic CIFAR-layout corpus with exactly `per_class` records
/// per class, split across the real file layout (five training batches plus
/// `test_batch.bin` for CIFAR-10; `train.bin`/`test.bin` for CIFAR-100,
/// 5/6 train and 1/6 test like the real sets).
pub fn write_synthetic_cifar(
    dir: &Path,
    variant: CifarVariant,
    per_class: usize,
    seed: u64,
) -> Result<(), DataError> {
    let classes = variant.class_count();
    let total = per_class * classes;
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..total).map(|i| i % classes).collect();
    use rand::seq::SliceRandom;
    labels.shuffle(&mut rng);
    let n_test = total / 6;
    let n_train = total - n_test;
    match variant {
        CifarVariant::Cifar10 => {
            let per_file = n_train / 5;
            for file in 0..5 {
                let slice = &labels[file * per_file..(file + 1) * per_file];
                let pixels = pattern_pixels(slice, classes, &mut rng);
                write(
                    &dir.join(format!("data_batch_{}.bin", file + 1)),
                    &write_cifar(slice, &pixels, variant),
                )?;
            }
            let slice = &labels[n_train..];
            let pixels = pattern_pixels(slice, classes, &mut rng);
            write(&dir.join("test_batch.bin"), &write_cifar(slice, &pixels, variant))?;
        }
        CifarVariant::Cifar100 => {
            let slice = &labels[..n_train];
            let pixels = pattern_pixels(slice, classes, &mut rng);
            write(&dir.join("train.bin"), &write_cifar(slice, &pixels, variant))?;
            let slice = &labels[n_train..];
            let pixels = pattern_pixels(slice, classes, &mut rng);
            write(&dir.join("test.bin"), &write_cifar(slice, &pixels, variant))?;
        }
    }
    Ok(())
}
