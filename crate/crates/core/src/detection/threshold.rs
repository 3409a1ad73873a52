use crate::error::{Error, Result};

use super::image::GrayImage;
use super::metrics::Mask;

/// Pixel counts per intensity level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: [u64; 256],
    pub total: u64,
}

impl Histogram {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        Self {
            counts,
            total: counts.iter().sum(),
        }
    }

    pub fn full_slice(&self) -> RegionSlice {
        self.slice(0, 255)
    }

    /// The intensity band `[lower, upper]` with its pixel count.
    pub fn slice(&self, lower: u8, upper: u8) -> RegionSlice {
        let (n, _) = self.sums(lower as usize, upper as usize + 1);
        RegionSlice {
            lower,
            upper,
            pixel_count: n,
        }
    }

    /// Count and intensity sum over levels `lo..hi`.
    fn sums(&self, lo: usize, hi: usize) -> (u64, u64) {
        (lo..hi).fold((0, 0), |(n, s), x| (n + self.counts[x], s + x as u64 * self.counts[x]))
    }

    fn populated_levels(&self, slice: &RegionSlice) -> usize {
        (slice.lower as usize..=slice.upper as usize)
            .filter(|&x| self.counts[x] > 0)
            .count()
    }

    /// Mean intensity of the pixels inside `slice`, `None` if it is empty.
    pub fn mean(&self, slice: &RegionSlice) -> Option<f64> {
        let (n, s) = self.sums(slice.lower as usize, slice.upper as usize + 1);
        (n > 0).then(|| s as f64 / n as f64)
    }
}

pub fn histogram(image: &GrayImage) -> Histogram {
    let mut counts = [0u64; 256];
    for &v in image.pixels() {
        counts[v as usize] += 1;
    }
    Histogram::from_counts(counts)
}

/// Closed intensity band of the histogram under analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionSlice {
    pub lower: u8,
    pub upper: u8,
    pub pixel_count: u64,
}

/// How class "means" enter the between-class variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceForm {
    /// Standard Otsu: class mean intensities.
    #[default]
    ClassMeans,
    /// Class intensity sums weighted by the slice total, without dividing
    /// by the class count.
    Unnormalized,
}

fn variance_from_sums(n0: u64, s0: u64, n1: u64, s1: u64, form: VarianceForm) -> f64 {
    if n0 == 0 || n1 == 0 {
        return 0.0;
    }
    let n = (n0 + n1) as f64;
    let (w0, w1) = (n0 as f64 / n, n1 as f64 / n);
    let (e0, e1) = match form {
        VarianceForm::ClassMeans => (s0 as f64 / n0 as f64, s1 as f64 / n1 as f64),
        VarianceForm::Unnormalized => (s0 as f64 / n, s1 as f64 / n),
    };
    w0 * w1 * (e0 - e1) * (e0 - e1)
}

/// Between-class variance of splitting `slice` into `[lower, t - 1]` and
/// `[t, upper]`. An empty class gives 0.
pub fn between_class_variance(hist: &Histogram, slice: &RegionSlice, t: u8, form: VarianceForm) -> Result<f64> {
    if t <= slice.lower || t > slice.upper {
        return Err(Error::Domain(format!(
            "threshold {t} outside ({}, {}]",
            slice.lower, slice.upper
        )));
    }
    let (lo, hi) = (slice.lower as usize, slice.upper as usize + 1);
    let (n0, s0) = hist.sums(lo, t as usize);
    let (n1, s1) = hist.sums(t as usize, hi);
    Ok(variance_from_sums(n0, s0, n1, s1, form))
}

/// Threshold maximizing the between-class variance over every split of
/// `slice`; ties go to the smallest threshold. Pixels below the returned
/// value form the dark class.
pub fn otsu_threshold(hist: &Histogram, slice: &RegionSlice) -> Result<u8> {
    otsu_threshold_with(hist, slice, VarianceForm::ClassMeans)
}

pub fn otsu_threshold_with(hist: &Histogram, slice: &RegionSlice, form: VarianceForm) -> Result<u8> {
    if slice.lower > slice.upper {
        return Err(Error::Domain("slice lower bound above upper bound".into()));
    }
    if hist.populated_levels(slice) < 2 {
        return Err(Error::DegenerateHistogram(format!(
            "fewer than two populated levels in [{}, {}]",
            slice.lower, slice.upper
        )));
    }
    let (lo, hi) = (slice.lower as usize, slice.upper as usize);
    let (n, s) = hist.sums(lo, hi + 1);
    let (mut n0, mut s0) = (0u64, 0u64);
    let mut best = (0.0f64, slice.lower + 1);
    for t in lo + 1..=hi {
        n0 += hist.counts[t - 1];
        s0 += (t as u64 - 1) * hist.counts[t - 1];
        let v = variance_from_sums(n0, s0, n - n0, s - s0, form);
        if v > best.0 {
            best = (v, t as u8);
        }
    }
    Ok(best.1)
}

/// `|mean_dark - mean_bright| / (mean_dark + mean_bright)`.
pub fn interclass_contrast(mean_dark: f64, mean_bright: f64) -> Result<f64> {
    let sum = mean_dark + mean_bright;
    if !(sum > 0.0) || mean_dark < 0.0 || mean_bright < 0.0 {
        return Err(Error::Domain(
            "contrast needs non-negative means with a positive sum".into(),
        ));
    }
    Ok((mean_dark - mean_bright).abs() / sum)
}

pub const DEFAULT_CONTRAST_STOP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub final_threshold: u8,
    /// One threshold per iteration, strictly decreasing.
    pub iteration_thresholds: Vec<u8>,
    pub contrasts: Vec<f64>,
    /// False when the dark band ran out of levels before the contrast
    /// exceeded the stop value.
    pub converged: bool,
}

/// Repeatedly splits the dark band with Otsu's criterion until the contrast
/// between the new dark band and the band just cut off exceeds
/// `contrast_stop`.
pub fn iterative_threshold(hist: &Histogram, contrast_stop: f64) -> Result<SegmentationResult> {
    iterative_threshold_with(hist, contrast_stop, VarianceForm::ClassMeans)
}

pub fn iterative_threshold_with(
    hist: &Histogram,
    contrast_stop: f64,
    form: VarianceForm,
) -> Result<SegmentationResult> {
    if !(contrast_stop > 0.0 && contrast_stop < 1.0) {
        return Err(Error::Domain(format!("contrast stop {contrast_stop} not in (0, 1)")));
    }
    let mut slice = hist.full_slice();
    let mut thresholds = Vec::new();
    let mut contrasts = Vec::new();
    let converged = loop {
        let t = otsu_threshold_with(hist, &slice, form)?;
        let dark = hist.slice(slice.lower, t - 1);
        let bright = hist.slice(t, slice.upper);
        // both bands are populated because the split maximized a nonzero variance
        let c = interclass_contrast(hist.mean(&dark).unwrap_or(0.0), hist.mean(&bright).unwrap_or(0.0))?;
        thresholds.push(t);
        contrasts.push(c);
        if c > contrast_stop {
            break true;
        }
        slice = dark;
        if hist.populated_levels(&slice) < 2 {
            break false;
        }
    };
    Ok(SegmentationResult {
        final_threshold: *thresholds.last().unwrap(),
        iteration_thresholds: thresholds,
        contrasts,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    #[default]
    Dark,
    Bright,
}

impl std::str::FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dark" => Ok(Polarity::Dark),
            "bright" => Ok(Polarity::Bright),
            _ => Err(Error::Validation(format!(
                "unknown polarity `{s}` (expected dark or bright)"
            ))),
        }
    }
}

fn oriented(v: u8, polarity: Polarity) -> u8 {
    match polarity {
        Polarity::Dark => v,
        Polarity::Bright => 255 - v,
    }
}

/// Marks pixels strictly below `threshold` (after mirroring for bright
/// defects). A threshold of 256 marks every pixel.
pub fn segment(image: &GrayImage, threshold: u16, polarity: Polarity) -> Mask {
    let bits = image
        .pixels()
        .iter()
        .map(|&v| (oriented(v, polarity) as u16) < threshold)
        .collect();
    Mask::from_bits(image.width(), image.height(), bits).expect("dimensions come from a valid image")
}

fn oriented_histogram(image: &GrayImage, polarity: Polarity) -> Histogram {
    let mut counts = [0u64; 256];
    for &v in image.pixels() {
        counts[oriented(v, polarity) as usize] += 1;
    }
    Histogram::from_counts(counts)
}

/// Iterative thresholding followed by segmentation at the final threshold.
pub fn detect(image: &GrayImage, contrast_stop: f64, polarity: Polarity) -> Result<(SegmentationResult, Mask)> {
    let result = iterative_threshold(&oriented_histogram(image, polarity), contrast_stop)?;
    let mask = segment(image, result.final_threshold as u16, polarity);
    Ok((result, mask))
}

/// Single global Otsu split, the baseline for the iterative detector.
pub fn detect_otsu(image: &GrayImage, polarity: Polarity) -> Result<(u8, Mask)> {
    let hist = oriented_histogram(image, polarity);
    let t = otsu_threshold(&hist, &hist.full_slice())?;
    Ok((t, segment(image, t as u16, polarity)))
}
