use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::image::GrayImage;
use super::metrics::Mask;

/// Parameters of a synthetic crack image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub background_level: u8,
    pub defect_level: u8,
    pub noise_sigma: f64,
    /// Crack thickness in pixels, measured across its running direction.
    pub crack_width: usize,
    pub seed: u64,
    /// Run the crack top to bottom instead of left to right.
    pub vertical: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            background_level: 200,
            defect_level: 40,
            noise_sigma: 0.0,
            crack_width: 4,
            seed: 0,
            vertical: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub image: GrayImage,
    pub truth: Mask,
    /// Fraction of pixels on the crack, `crack_width / rows`.
    pub crack_fraction: f64,
}

/// Draws a random-walk crack of constant thickness over a flat background
/// and adds clamped Gaussian noise. Identical specs give identical bytes.
pub fn synth_defect_image(spec: &SynthSpec) -> Result<SynthImage> {
    if spec.defect_level >= spec.background_level {
        return Err(Error::Domain("defect level must be darker than the background".into()));
    }
    if !(spec.noise_sigma >= 0.0) {
        return Err(Error::Domain("noise sigma must be >= 0".into()));
    }
    // build horizontally, transpose at the end for vertical cracks
    let (cols, rows) = if spec.vertical {
        (spec.height, spec.width)
    } else {
        (spec.width, spec.height)
    };
    if cols == 0 || rows == 0 {
        return Err(Error::Domain("image must have at least one pixel".into()));
    }
    if spec.crack_width == 0 || spec.crack_width >= rows {
        return Err(Error::Domain(format!(
            "crack width {} does not fit in {rows} rows",
            spec.crack_width
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let max_top = (rows - spec.crack_width) as i64;
    let mut top = rng.random_range(0..=max_top);
    let mut bits = vec![false; cols * rows];
    for x in 0..cols {
        for y in top as usize..top as usize + spec.crack_width {
            bits[y * cols + x] = true;
        }
        top = (top + rng.random_range(-1..=1)).clamp(0, max_top);
    }

    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let pixels = bits
        .iter()
        .map(|&b| {
            let base = if b { spec.defect_level } else { spec.background_level } as f64;
            if spec.noise_sigma == 0.0 {
                base as u8
            } else {
                (base + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect();

    let mut image = GrayImage::new(cols, rows, pixels)?;
    let mut truth = Mask::from_bits(cols, rows, bits)?;
    if spec.vertical {
        truth = truth.transposed();
        image = image.transposed();
    }
    Ok(SynthImage {
        image,
        truth,
        crack_fraction: spec.crack_width as f64 / rows as f64,
    })
}
