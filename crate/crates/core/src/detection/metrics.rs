use crate::error::{Error, Result};

use super::image::GrayImage;

/// Binary defect mask, `true` marks a defect pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} mask bits for {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    /// Any nonzero pixel counts as a defect.
    pub fn from_gray(image: &GrayImage) -> Self {
        Self {
            width: image.width(),
            height: image.height(),
            bits: image.pixels().iter().map(|&v| v != 0).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Defects as 255, background as 0.
    pub fn to_gray(&self) -> GrayImage {
        let px = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        GrayImage::new(self.width, self.height, px).expect("mask dimensions are valid")
    }

    pub fn transposed(&self) -> Self {
        let mut bits = vec![false; self.bits.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                bits[x * self.height + y] = self.bits[y * self.width + x];
            }
        }
        Self {
            width: self.height,
            height: self.width,
            bits,
        }
    }
}

/// Pixel-level confusion counts with precision, recall and F-measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionMetrics {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl DetectionMetrics {
    /// Empty denominators yield 0.
    pub fn from_counts(true_pos: u64, false_pos: u64, false_neg: u64, true_neg: u64) -> Self {
        let ratio = |a: u64, b: u64| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
        let precision = ratio(true_pos, false_pos);
        let recall = ratio(true_pos, false_neg);
        let f_measure = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            true_pos,
            false_pos,
            false_neg,
            true_neg,
            precision,
            recall,
            f_measure,
        }
    }
}

pub fn f_measure(mask: &Mask, truth: &Mask) -> Result<DetectionMetrics> {
    if mask.width != truth.width || mask.height != truth.height {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{} vs truth {}x{}",
            mask.width, mask.height, truth.width, truth.height
        )));
    }
    let mut c = [0u64; 4];
    for (&m, &t) in mask.bits.iter().zip(&truth.bits) {
        c[(m as usize) << 1 | t as usize] += 1;
    }
    // index = mask*2 + truth
    Ok(DetectionMetrics::from_counts(c[3], c[2], c[1], c[0]))
}
