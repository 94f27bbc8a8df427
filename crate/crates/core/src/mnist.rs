//! IDX containers and pixel measures.
//!
//! Layout (big-endian): `u32` magic, `u32` count, then for images `u32` rows
//! and `u32` cols, then the payload of `u8`s in row-major order.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::transport::{DiscreteMeasure, Measure, SupportGrid};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        let size = rows * cols;
        if size == 0 || pixels.len() % size != 0 {
            return Err(Error::Format(format!(
                "{} pixels do not tile {rows}x{cols} images",
                pixels.len()
            )));
        }
        Ok(Self {
            count: pixels.len() / size,
            rows,
            cols,
            pixels,
        })
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for word in [IMAGES_MAGIC, self.count as u32, self.rows as u32, self.cols as u32] {
            out.extend_from_slice(&word.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("four bytes")))
        .ok_or_else(|| Error::Format(format!("header truncated at byte {at}")))
}

fn check_magic(found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::Format(format!("magic {found:#010x}, expected {expected:#010x}")));
    }
    Ok(())
}

fn payload(bytes: &[u8], offset: usize, expected: usize) -> Result<&[u8]> {
    let available = bytes.len().saturating_sub(offset);
    if available != expected {
        return Err(Error::Format(format!(
            "payload has {available} bytes, header declares {expected}"
        )));
    }
    Ok(&bytes[offset..])
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(read_u32(bytes, 0)?, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let expected = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format("declared dimensions overflow".into()))?;
    let pixels = payload(bytes, 16, expected)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(read_u32(bytes, 0)?, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, count)?.to_vec())
}

pub fn labels_to_bytes(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Normalised image on pixel centres in `[0,1]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelMeasure {
    pub atoms: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl PixelMeasure {
    pub fn to_measure(&self) -> Result<Measure> {
        let atoms: Vec<Vec<f64>> = self.atoms.iter().map(|a| a.to_vec()).collect();
        Ok(Measure::Discrete(DiscreteMeasure::new(&atoms, self.weights.clone())?))
    }
}

/// Centre of pixel `(r, c)`: `((c + ½)/cols, (r + ½)/rows)`.
pub fn pixel_center(r: usize, c: usize, rows: usize, cols: usize) -> [f64; 2] {
    [(c as f64 + 0.5) / cols as f64, (r as f64 + 0.5) / rows as f64]
}

/// All pixel centres, row-major: the barycenter support.
pub fn pixel_grid(rows: usize, cols: usize) -> Result<SupportGrid> {
    let points: Vec<Vec<f64>> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| pixel_center(r, c, rows, cols).to_vec()))
        .collect();
    SupportGrid::from_points(&points)
}

/// Intensities divided by their total; zero pixels dropped when `prune_zero`.
pub fn image_to_measure(image: &[u8], rows: usize, cols: usize, prune_zero: bool) -> Result<PixelMeasure> {
    if image.len() != rows * cols {
        return Err(Error::arg(format!("image has {} pixels, expected {rows}x{cols}", image.len())));
    }
    let total: u64 = image.iter().map(|&p| p as u64).sum();
    if total == 0 {
        return Err(Error::Degenerate("image has no nonzero pixel".into()));
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (idx, &p) in image.iter().enumerate() {
        if prune_zero && p == 0 {
            continue;
        }
        atoms.push(pixel_center(idx / cols, idx % cols, rows, cols));
        weights.push(p as f64 / total as f64);
    }
    Ok(PixelMeasure { atoms, weights })
}

/// Indices of up to `count` images labelled `digit`, chosen without
/// replacement by `seed` and returned in file order.
pub fn select_digit(labels: &[u8], digit: u8, count: usize, seed: u64) -> Result<Vec<usize>> {
    let matching: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == digit).collect();
    if matching.len() < count {
        return Err(Error::Degenerate(format!(
            "{} images of digit {digit}, {count} requested",
            matching.len()
        )));
    }
    let mut stream = rng::keyed(seed, Domain::Preset, digit as u64, 3);
    let mut picked: Vec<usize> = index::sample(&mut stream, matching.len(), count)
        .into_iter()
        .map(|k| matching[k])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Measures of the selected images, ready for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureManifest {
    pub digit: u8,
    pub rows: usize,
    pub cols: usize,
    pub indices: Vec<usize>,
    pub measures: Vec<PixelMeasure>,
}

pub fn prepare_manifest(
    images: &IdxImages,
    labels: &[u8],
    digit: u8,
    count: usize,
    seed: u64,
    prune_zero: bool,
) -> Result<MeasureManifest> {
    if labels.len() != images.count {
        return Err(Error::Format(format!(
            "{} labels for {} images",
            labels.len(),
            images.count
        )));
    }
    let indices = select_digit(labels, digit, count, seed)?;
    let measures = indices
        .iter()
        .map(|&i| image_to_measure(images.image(i), images.rows, images.cols, prune_zero))
        .collect::<Result<_>>()?;
    Ok(MeasureManifest {
        digit,
        rows: images.rows,
        cols: images.cols,
        indices,
        measures,
    })
}

// Seven-segment strokes on a 28×28 canvas: (r0, c0, r1, c1).
const SEGMENTS: [(f64, f64, f64, f64); 7] = [
    (5.0, 9.0, 5.0, 19.0),   // top
    (5.0, 19.0, 14.0, 19.0), // upper right
    (14.0, 19.0, 23.0, 19.0), // lower right
    (23.0, 9.0, 23.0, 19.0), // bottom
    (14.0, 9.0, 23.0, 9.0),  // lower left
    (5.0, 9.0, 14.0, 9.0),   // upper left
    (14.0, 9.0, 14.0, 19.0), // middle
];

const DIGIT_SEGMENTS: [&[usize]; 10] = [
    &[0, 1, 2, 3, 4, 5],
    &[1, 2],
    &[0, 1, 6, 4, 3],
    &[0, 1, 6, 2, 3],
    &[5, 6, 1, 2],
    &[0, 5, 6, 2, 3],
    &[0, 5, 4, 3, 2, 6],
    &[0, 1, 2],
    &[0, 1, 2, 3, 4, 5, 6],
    &[0, 1, 2, 3, 5, 6],
];

/// Digit-like 28×28 images with seeded jitter, for tests and demos when no
/// real IDX files are at hand.
pub fn synthetic_digits(count: usize, seed: u64) -> (IdxImages, Vec<u8>) {
    const SIDE: usize = 28;
    let mut pixels = vec![0u8; count * SIDE * SIDE];
    let mut labels = Vec::with_capacity(count);
    for k in 0..count {
        let mut s = rng::keyed(seed, Domain::Preset, k as u64, 4);
        let digit = s.random_range(0..10u8);
        labels.push(digit);
        let (dr, dc) = (s.random_range(-2.0..2.0), s.random_range(-2.0..2.0));
        let scale = s.random_range(0.85..1.1);
        let width = s.random_range(1.0..2.0);
        let img = &mut pixels[k * SIDE * SIDE..(k + 1) * SIDE * SIDE];
        for &seg in DIGIT_SEGMENTS[digit as usize] {
            let (r0, c0, r1, c1) = SEGMENTS[seg];
            let map = |r: f64, c: f64| (14.0 + (r - 14.0) * scale + dr, 14.0 + (c - 14.0) * scale + dc);
            let (a_r, a_c) = map(r0, c0);
            let (b_r, b_c) = map(r1, c1);
            for (idx, px) in img.iter_mut().enumerate() {
                let (pr, pc) = ((idx / SIDE) as f64, (idx % SIDE) as f64);
                let dist = segment_distance(pr, pc, a_r, a_c, b_r, b_c);
                if dist < width + 1.0 {
                    let v = (255.0 * (1.0 - (dist - width).max(0.0))).round() as u8;
                    *px = (*px).max(v);
                }
            }
        }
    }
    let images = IdxImages {
        count,
        rows: SIDE,
        cols: SIDE,
        pixels,
    };
    (images, labels)
}

fn segment_distance(pr: f64, pc: f64, ar: f64, ac: f64, br: f64, bc: f64) -> f64 {
    let (vr, vc) = (br - ar, bc - ac);
    let len2 = vr * vr + vc * vc;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((pr - ar) * vr + (pc - ac) * vc) / len2).clamp(0.0, 1.0)
    };
    let (dr, dc) = (pr - ar - t * vr, pc - ac - t * vc);
    (dr * dr + dc * dc).sqrt()
}
