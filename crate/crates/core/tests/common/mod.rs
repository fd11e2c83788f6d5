//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use gliosim::imaging::{self, Thresholds};
use gliosim::{Grid, MaterialVolume};

pub const AIR: u8 = 0;
pub const WHITE: u8 = 200;
pub const GRAY: u8 = 235;
pub const SKULL: u8 = 250;

/// Intensity of a synthetic head at normalised position `p ∈ [−1, 1]³`:
/// air outside, a skull shell, a gray-matter mantle and a white-matter core
/// (roughly 15% white of the tissue, like a real scan).
pub fn phantom_intensity(p: [f64; 3]) -> u8 {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if r > 0.95 {
        AIR
    } else if r > 0.85 {
        SKULL
    } else if r > 0.45 {
        GRAY
    } else {
        WHITE
    }
}

/// `width × height` pixels per slice, `slices` slices, same box as the grid.
pub fn phantom_stack(width: usize, height: usize, slices: usize) -> Vec<Vec<u8>> {
    let norm = |i: usize, n: usize| if n == 1 { 0.0 } else { 2.0 * (i as f64 + 0.5) / n as f64 - 1.0 };
    (0..slices)
        .map(|z| {
            let mut px = Vec::with_capacity(width * height);
            for y in 0..height {
                for x in 0..width {
                    px.push(phantom_intensity([norm(x, width), norm(y, height), norm(z, slices)]));
                }
            }
            px
        })
        .collect()
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) {
    let mut bytes = format!("P5\n# synthetic\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    fs::write(path, bytes).unwrap();
}

/// Writes the phantom as `slice_NNN.pgm` files and returns their paths.
pub fn write_phantom(dir: &Path, width: usize, height: usize, slices: usize) -> Vec<PathBuf> {
    phantom_stack(width, height, slices)
        .iter()
        .enumerate()
        .map(|(z, px)| {
            let path = dir.join(format!("slice_{z:03}.pgm"));
            write_pgm(&path, width, height, px);
            path
        })
        .collect()
}

/// Phantom classified straight onto `grid` (skipping the file round trip).
pub fn phantom_materials(grid: &Grid) -> MaterialVolume {
    let [nx, ny, nz] = grid.dims();
    let slices = phantom_stack(4 * nx, 4 * ny, if nz == 1 { 1 } else { 4 * nz });
    let data: Vec<u8> = slices.concat();
    let stack = imaging::ImageStack::new(4 * nx, 4 * ny, slices.len(), data).unwrap();
    imaging::resample(&stack, grid, &Thresholds::default()).unwrap()
}

pub fn rel_err(x: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

pub fn rel_err_inf(x: &[f64], reference: &[f64]) -> f64 {
    let num = x.iter().zip(reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let den = reference.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    num / den
}
