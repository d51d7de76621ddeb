//! Pixel-level preprocessing of RGB tiles and masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{center_crop_rect, BinaryMask};

pub const DEFAULT_DECLOUD_THRESHOLD: f64 = 150.0;

/// 8-bit RGB image, row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageTensor {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl ImageTensor {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{expected} bytes"),
                actual: format!("{} bytes", data.len()),
            });
        }
        Ok(ImageTensor {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.data.chunks_exact(3)
    }
}

/// Per-pixel confidences in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl ConfidenceMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} values", width, height),
                actual: format!("{} values", values.len()),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("confidence {v} outside [0, 1]")));
        }
        Ok(ConfidenceMap {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Row-major raster with interleaved channels. Lets crops and rotations
/// share one implementation for images and masks.
pub trait Raster: Sized {
    const CHANNELS: usize;
    fn dims(&self) -> (u32, u32);
    fn raw(&self) -> &[u8];
    fn from_raw(width: u32, height: u32, raw: Vec<u8>) -> Result<Self>;
}

impl Raster for ImageTensor {
    const CHANNELS: usize = 3;
    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
    fn raw(&self) -> &[u8] {
        &self.data
    }
    fn from_raw(width: u32, height: u32, raw: Vec<u8>) -> Result<Self> {
        ImageTensor::new(width, height, raw)
    }
}

impl Raster for BinaryMask {
    const CHANNELS: usize = 1;
    fn dims(&self) -> (u32, u32) {
        (self.width(), self.height())
    }
    fn raw(&self) -> &[u8] {
        self.values()
    }
    fn from_raw(width: u32, height: u32, raw: Vec<u8>) -> Result<Self> {
        BinaryMask::from_values(width, height, raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudDecision {
    pub keep: bool,
    pub band_means: [f64; 3],
}

pub fn band_means(img: &ImageTensor) -> [f64; 3] {
    let mut sums = [0u64; 3];
    for px in img.pixels() {
        for c in 0..3 {
            sums[c] += px[c] as u64;
        }
    }
    let n = img.width as f64 * img.height as f64;
    sums.map(|s| s as f64 / n)
}

/// Rejects a tile when every band mean is strictly above `threshold`.
pub fn cloud_filter(img: &ImageTensor, threshold: f64) -> CloudDecision {
    let means = band_means(img);
    CloudDecision {
        keep: !means.iter().all(|&m| m > threshold),
        band_means: means,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcclusionMode {
    /// Keep road pixels, zero the context.
    ContextOccluded,
    /// Keep context, zero the road.
    RoadOccluded,
}

fn check_dims(img: &ImageTensor, mask: &BinaryMask) -> Result<()> {
    if (img.width, img.height) != (mask.width(), mask.height()) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", img.width, img.height),
            actual: format!("{}x{}", mask.width(), mask.height()),
        });
    }
    Ok(())
}

pub fn occlude(img: &ImageTensor, mask: &BinaryMask, mode: OcclusionMode) -> Result<ImageTensor> {
    check_dims(img, mask)?;
    let keep_on = mode == OcclusionMode::ContextOccluded;
    let data = img
        .data
        .chunks_exact(3)
        .zip(mask.values())
        .flat_map(|(px, &m)| {
            let keep = (m != 0) == keep_on;
            px.iter().map(move |&v| if keep { v } else { 0 })
        })
        .collect();
    ImageTensor::new(img.width, img.height, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    R = 0,
    G = 1,
    B = 2,
}

/// Overwrites one channel with the mask scaled to {0, 255}.
pub fn replace_channel(img: &ImageTensor, mask: &BinaryMask, channel: Channel) -> Result<ImageTensor> {
    check_dims(img, mask)?;
    let mut out = img.clone();
    let c = channel as usize;
    for (px, &m) in out.data.chunks_exact_mut(3).zip(mask.values()) {
        px[c] = if m != 0 { 255 } else { 0 };
    }
    Ok(out)
}

/// Copies the centred `target`x`target` window.
pub fn crop_center<T: Raster>(src: &T, target: u32) -> Result<T> {
    let (w, h) = src.dims();
    if w != h {
        return Err(Error::invalid(format!("centre crop needs a square input, got {w}x{h}")));
    }
    let rect = center_crop_rect(w, target)?;
    let ch = T::CHANNELS;
    let mut out = Vec::with_capacity(target as usize * target as usize * ch);
    let raw = src.raw();
    for y in rect.y0..rect.y0 + rect.height {
        let start = (y as usize * w as usize + rect.x0 as usize) * ch;
        out.extend_from_slice(&raw[start..start + rect.width as usize * ch]);
    }
    T::from_raw(rect.width, rect.height, out)
}

/// Box-filter downsizing; each output sample is the round-half-up mean of
/// its `factor`x`factor` block.
pub fn downsize_box(img: &ImageTensor, factor: u32) -> Result<ImageTensor> {
    let raw = downsize_raw(img, factor)?;
    ImageTensor::new(img.width / factor, img.height / factor, raw)
}

/// Mask downsizing: a block is set when at least half its pixels are set.
pub fn downsize_mask(mask: &BinaryMask, factor: u32) -> Result<BinaryMask> {
    let raw = downsize_raw(mask, factor)?;
    BinaryMask::from_values(mask.width() / factor, mask.height() / factor, raw)
}

fn downsize_raw<T: Raster>(src: &T, factor: u32) -> Result<Vec<u8>> {
    let (w, h) = src.dims();
    if factor == 0 || w % factor != 0 || h % factor != 0 {
        return Err(Error::invalid(format!(
            "downsize factor {factor} does not divide {w}x{h}"
        )));
    }
    let ch = T::CHANNELS;
    let (ow, oh, f) = (w / factor, h / factor, factor as usize);
    let n = (f * f) as u32;
    let raw = src.raw();
    let mut out = Vec::with_capacity(ow as usize * oh as usize * ch);
    for oy in 0..oh as usize {
        for ox in 0..ow as usize {
            for c in 0..ch {
                let mut sum = 0u32;
                for y in oy * f..(oy + 1) * f {
                    for x in ox * f..(ox + 1) * f {
                        sum += raw[(y * w as usize + x) * ch + c] as u32;
                    }
                }
                let v = if ch == 1 {
                    // mask values are 0/1
                    (2 * sum >= n) as u32
                } else {
                    (sum + n / 2) / n
                };
                out.push(v as u8);
            }
        }
    }
    Ok(out)
}

/// Rotates a square raster clockwise by `quarter_turns` x 90 degrees.
pub fn rotate90<T: Raster>(src: &T, quarter_turns: u32) -> Result<T> {
    let (w, h) = src.dims();
    if w != h {
        return Err(Error::invalid(format!("rotation needs a square input, got {w}x{h}")));
    }
    let n = w as usize;
    let ch = T::CHANNELS;
    let raw = src.raw();
    let k = quarter_turns % 4;
    if k == 0 {
        return T::from_raw(w, h, raw.to_vec());
    }
    let mut out = vec![0u8; raw.len()];
    for y in 0..n {
        for x in 0..n {
            let (nx, ny) = match k {
                1 => (n - 1 - y, x),
                2 => (n - 1 - x, n - 1 - y),
                _ => (y, n - 1 - x),
            };
            let src_i = (y * n + x) * ch;
            let dst_i = (ny * n + nx) * ch;
            out[dst_i..dst_i + ch].copy_from_slice(&raw[src_i..src_i + ch]);
        }
    }
    T::from_raw(w, h, out)
}

pub fn binarize_confidence(c: &ConfidenceMap, threshold: f64) -> BinaryMask {
    let values = c.values.iter().map(|&v| (v >= threshold) as u8).collect();
    BinaryMask::from_values(c.width, c.height, values).expect("dimensions validated at construction")
}
