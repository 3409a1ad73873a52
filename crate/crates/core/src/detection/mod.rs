//! Dark-defect detection by iterated Otsu splits of the histogram, with
//! PNM image I/O, mask scoring and a synthetic crack generator.

mod image;
mod metrics;
mod synth;
mod threshold;

pub use image::{decode_pnm, read_gray, to_grayscale, GrayImage, PnmImage, RgbImage};
pub use metrics::{f_measure, DetectionMetrics, Mask};
pub use synth::{synth_defect_image, SynthImage, SynthSpec};
pub use threshold::{
    between_class_variance, detect, detect_otsu, histogram, interclass_contrast, iterative_threshold,
    iterative_threshold_with, otsu_threshold, otsu_threshold_with, segment, Histogram, Polarity, RegionSlice,
    SegmentationResult, VarianceForm, DEFAULT_CONTRAST_STOP,
};
