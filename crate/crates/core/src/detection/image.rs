use std::path::Path as FsPath;

use crate::error::{Error, Result};

/// 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image("image must have at least one pixel".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn transposed(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut pixels = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                pixels[x * h + y] = self.pixels[y * w + x];
            }
        }
        Self {
            width: h,
            height: w,
            pixels,
        }
    }

    /// Binary P5 encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn save_pgm(&self, path: &FsPath) -> Result<()> {
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// 8-bit interleaved RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

/// Luma with weights 0.299 / 0.587 / 0.114, rounded half away from zero.
pub fn to_grayscale(image: &RgbImage) -> Result<GrayImage> {
    let px = image
        .pixels
        .iter()
        .map(|&[r, g, b]| {
            let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(image.width, image.height, px)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PnmImage {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl PnmImage {
    pub fn into_gray(self) -> Result<GrayImage> {
        match self {
            PnmImage::Gray(g) => Ok(g),
            PnmImage::Rgb(c) => to_grayscale(&c),
        }
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Image(format!("expected a number at byte {start}")))
    }
}

/// Decodes P2, P5 or P6 with a maximum value of at most 255. Smaller
/// maxima are rescaled to the full 8-bit range.
pub fn decode_pnm(bytes: &[u8]) -> Result<PnmImage> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::Image("missing PNM magic number".into()));
    }
    let magic = bytes[1];
    if !matches!(magic, b'2' | b'5' | b'6') {
        return Err(Error::Image(format!("unsupported PNM type P{}", magic as char)));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number()?;
    let height = h.number()?;
    let maxval = h.number()?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Image(format!("unsupported bit depth (maxval {maxval})")));
    }
    let channels = if magic == b'6' { 3 } else { 1 };
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::Image("image dimensions overflow".into()))?;
    let scale = |v: usize| -> Result<u8> {
        if v > maxval {
            return Err(Error::Image(format!("sample {v} exceeds maxval {maxval}")));
        }
        Ok(((v * 255 + maxval / 2) / maxval) as u8)
    };

    let samples: Vec<u8> = if magic == b'2' {
        (0..count).map(|_| h.number().and_then(scale)).collect::<Result<_>>()?
    } else {
        // exactly one whitespace byte separates the header from the raster
        let start = h.pos + 1;
        let raw = bytes
            .get(start..start + count)
            .ok_or_else(|| Error::Image(format!("raster truncated: expected {count} bytes")))?;
        if maxval == 255 {
            raw.to_vec()
        } else {
            raw.iter().map(|&v| scale(v as usize)).collect::<Result<_>>()?
        }
    };

    if channels == 1 {
        Ok(PnmImage::Gray(GrayImage::new(width, height, samples)?))
    } else {
        if width == 0 || height == 0 {
            return Err(Error::Image("image must have at least one pixel".into()));
        }
        let pixels = samples.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(PnmImage::Rgb(RgbImage { width, height, pixels }))
    }
}

/// Reads a PNM file, converting color images to grayscale.
pub fn read_gray(path: &FsPath) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes)?.into_gray()
}
