//! Float RGB rasters, HSV conversion, binary masks and PNG/JPEG I/O.
//!
//! Every [`Image`] holds interleaved RGB samples in `[0, 1]`. Pixel math is
//! carried out in `f64` and rounded to `f32` on store.

use std::path::Path;

use ::image::{DynamicImage, ImageFormat, ImageReader};
use log::warn;

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// Dense RGB raster, row-major, interleaved, every sample in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    /// Wraps an interleaved RGB buffer, rejecting wrong lengths and samples
    /// that are non-finite or outside `[0, 1]`.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "empty raster {width}x{height}"
            )));
        }
        if data.len() != width * height * CHANNELS {
            return Err(Error::InvalidImage(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height * CHANNELS,
                data.len()
            )));
        }
        if let Some(pos) = data
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(Error::InvalidImage(format!(
                "sample {pos} = {} outside [0, 1]",
                data[pos]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image from per-pixel values; out-of-range values are clamped
    /// and NaN maps to 0.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        assert!(width > 0 && height > 0, "empty raster");
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for v in f(x, y) {
                    data.push(clamp_unit(v));
                }
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn same_size(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_size(&self, other: &Image) -> Result<()> {
        if self.same_size(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            })
        }
    }

    /// Applies a per-pixel transform computed in `f64`; results are clamped.
    pub(crate) fn map_pixels(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Image {
        let mut data = Vec::with_capacity(self.data.len());
        for px in self.data.chunks_exact(CHANNELS) {
            let out = f([px[0] as f64, px[1] as f64, px[2] as f64]);
            data.extend(out.iter().map(|v| clamp_unit(*v)));
        }
        Image {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Builds an image from unclamped `f64` samples, clamping on store.
    pub(crate) fn from_f64_clamped(width: usize, height: usize, samples: &[f64]) -> Image {
        debug_assert_eq!(samples.len(), width * height * CHANNELS);
        Image {
            width,
            height,
            data: samples.iter().map(|v| clamp_unit(*v)).collect(),
        }
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0) as f32
    }
}

/// HSV raster with hue normalized to `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl HsvImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Interleaved `(h, s, v)` triples.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn map_pixels(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> HsvImage {
        let mut data = Vec::with_capacity(self.data.len());
        for px in self.data.chunks_exact(CHANNELS) {
            data.extend(f([px[0], px[1], px[2]]));
        }
        HsvImage {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Hexcone RGB to HSV. Gray pixels get `h = 0, s = 0`.
pub fn rgb_to_hsv_pixel([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta <= 0.0 {
        return [0.0, s, max];
    }
    let sector = if max == r {
        (g - b) / delta
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = sector / 6.0;
    if h < 0.0 {
        h += 1.0;
    }
    if h >= 1.0 {
        h -= 1.0;
    }
    [h, s, max]
}

pub fn hsv_to_rgb_pixel([h, s, v]: [f64; 3]) -> [f64; 3] {
    if s <= 0.0 {
        return [v, v, v];
    }
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as u8 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

pub fn rgb_to_hsv(img: &Image) -> HsvImage {
    let mut data = Vec::with_capacity(img.data.len());
    for px in img.data.chunks_exact(CHANNELS) {
        data.extend(rgb_to_hsv_pixel([px[0] as f64, px[1] as f64, px[2] as f64]));
    }
    HsvImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Inverse of [`rgb_to_hsv`]; channels are clamped into range first and the
/// RGB output is clamped to `[0, 1]`.
pub fn hsv_to_rgb(img: &HsvImage) -> Image {
    let mut data = Vec::with_capacity(img.data.len());
    for px in img.data.chunks_exact(CHANNELS) {
        let hsv = [px[0], px[1].clamp(0.0, 1.0), px[2].clamp(0.0, 1.0)];
        data.extend(hsv_to_rgb_pixel(hsv).iter().map(|c| clamp_unit(*c)));
    }
    Image {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Binary region mask; every value is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Mask {
    pub fn from_fn(width: usize, height: usize, mut inside: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(if inside(x, y) { 1.0 } else { 0.0 });
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Thresholds arbitrary per-pixel values: `v >= threshold` becomes 1.
    pub fn from_values(width: usize, height: usize, values: &[f32], threshold: f32) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask expects {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(Self::from_fn(width, height, |x, y| {
            values[y * width + x] >= threshold
        }))
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |_, _| true)
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |_, _| false)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] > 0.5
    }

    pub fn is_full(&self) -> bool {
        self.data.iter().all(|v| *v == 1.0)
    }

    pub fn check_matches(&self, img: &Image) -> Result<()> {
        if self.width == img.width() && self.height == img.height() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: img.width(),
                right_h: img.height(),
            })
        }
    }
}

fn open_supported(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                message: match other {
                    Some(f) => format!("{f:?} is not PNG or JPEG"),
                    None => "unrecognized file signature".to_string(),
                },
            })
        }
    }
    reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Loads an 8- or 16-bit RGB(A) PNG or JPEG, mapping integer codes linearly
/// onto `[0, 1]`. Alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let decoded = open_supported(path)?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f32> = match decoded {
        DynamicImage::ImageRgb8(buf) => buf.into_raw().iter().map(|c| *c as f32 / 255.0).collect(),
        DynamicImage::ImageRgba8(buf) => {
            warn!("{}: dropping alpha channel", path.display());
            buf.into_raw()
                .chunks_exact(4)
                .flat_map(|px| px[..3].iter().map(|c| *c as f32 / 255.0))
                .collect()
        }
        DynamicImage::ImageRgb16(buf) => buf
            .into_raw()
            .iter()
            .map(|c| (*c as f64 / 65535.0) as f32)
            .collect(),
        DynamicImage::ImageRgba16(buf) => {
            warn!("{}: dropping alpha channel", path.display());
            buf.into_raw()
                .chunks_exact(4)
                .flat_map(|px| px[..3].iter().map(|c| (*c as f64 / 65535.0) as f32))
                .collect()
        }
        other => {
            return Err(Error::ChannelCount {
                path: path.to_path_buf(),
                message: format!(
                    "expected 8- or 16-bit RGB, found {:?} with {} channel(s)",
                    other.color(),
                    other.color().channel_count()
                ),
            })
        }
    };
    Image::new(width, height, data)
}

/// Quantizes to 8 bits with round-half-up and writes a PNG.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if !path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            message: "images are written as PNG; use a .png path".into(),
        });
    }
    let bytes: Vec<u8> = img.data.iter().map(|v| quantize_u8(*v)).collect();
    ::image::save_buffer_with_format(
        path,
        &bytes,
        img.width as u32,
        img.height as u32,
        ::image::ExtendedColorType::Rgb8,
        ImageFormat::Png,
    )
    .map_err(|e| Error::Encode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[inline]
pub fn quantize_u8(v: f32) -> u8 {
    (v as f64 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Loads a single-channel or RGB image as a binary mask: pixels whose
/// luminance (`0.299 R + 0.587 G + 0.114 B`) is at least `threshold` become 1.
pub fn load_mask(path: impl AsRef<Path>, threshold: f32) -> Result<Mask> {
    let path = path.as_ref();
    let decoded = open_supported(path)?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let values: Vec<f32> = match decoded.color().channel_count() {
        1 | 2 => decoded
            .to_luma32f()
            .into_raw(),
        3 | 4 => decoded
            .to_rgb32f()
            .into_raw()
            .chunks_exact(3)
            .map(|px| (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64) as f32)
            .collect(),
        n => {
            return Err(Error::ChannelCount {
                path: path.to_path_buf(),
                message: format!("{n} channels"),
            })
        }
    };
    Mask::from_values(width, height, &values, threshold)
}

/// Bilinear resampling with half-pixel centers and edge clamping. An exact
/// 2x reduction averages 2x2 blocks.
pub fn resize_bilinear(img: &Image, width: usize, height: usize) -> Image {
    assert!(width > 0 && height > 0, "empty target size");
    let sx = img.width as f64 / width as f64;
    let sy = img.height as f64 / height as f64;
    let axis = |dst: usize, scale: f64, len: usize| {
        let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, src - i0 as f64)
    };
    Image::from_fn(width, height, |x, y| {
        let (x0, x1, fx) = axis(x, sx, img.width);
        let (y0, y1, fy) = axis(y, sy, img.height);
        let (a, b, c, d) = (
            img.pixel(x0, y0),
            img.pixel(x1, y0),
            img.pixel(x0, y1),
            img.pixel(x1, y1),
        );
        let mut out = [0.0; 3];
        for ch in 0..3 {
            let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
            let bottom = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
            out[ch] = top * (1.0 - fy) + bottom * fy;
        }
        out
    })
}

/// Nearest-neighbour mask resampling.
pub fn resize_mask(mask: &Mask, width: usize, height: usize) -> Mask {
    Mask::from_fn(width, height, |x, y| {
        let sx = ((x * mask.width) / width).min(mask.width - 1);
        let sy = ((y * mask.height) / height).min(mask.height - 1);
        mask.get(sx, sy)
    })
}

/// Target size whose long side is at most `long_side`, preserving aspect.
/// Images already within the limit keep their size.
pub fn fit_long_side(width: usize, height: usize, long_side: usize) -> (usize, usize) {
    let long = width.max(height);
    if long <= long_side || long_side == 0 {
        return (width, height);
    }
    let scale = long_side as f64 / long as f64;
    (
        ((width as f64 * scale).round() as usize).max(1),
        ((height as f64 * scale).round() as usize).max(1),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook conversion written independently of `rgb_to_hsv_pixel`
    /// (degree-based hue, chroma formulation).
    fn reference_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
        let v = r.max(g).max(b);
        let c = v - r.min(g).min(b);
        let h_deg = if c == 0.0 {
            0.0
        } else if v == r {
            60.0 * (((g - b) / c) % 6.0)
        } else if v == g {
            60.0 * ((b - r) / c + 2.0)
        } else {
            60.0 * ((r - g) / c + 4.0)
        };
        let h_deg = if h_deg < 0.0 { h_deg + 360.0 } else { h_deg };
        let s = if v == 0.0 { 0.0 } else { c / v };
        (h_deg / 360.0, s, v)
    }

    #[test]
    fn gray_and_corner_pixels() {
        assert_eq!(rgb_to_hsv_pixel([0.5, 0.5, 0.5]), [0.0, 0.0, 0.5]);
        assert_eq!(rgb_to_hsv_pixel([1.0, 0.0, 0.0]), [0.0, 1.0, 1.0]);
        assert_eq!(hsv_to_rgb_pixel([0.0, 0.0, 0.3]), [0.3, 0.3, 0.3]);
        let green = hsv_to_rgb_pixel([1.0 / 3.0, 1.0, 1.0]);
        for (got, want) in green.iter().zip([0.0, 1.0, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_reference_conversion() {
        let (h, s, v) = reference_hsv(0.2, 0.4, 0.6);
        let got = rgb_to_hsv_pixel([0.2, 0.4, 0.6]);
        assert!((got[0] - h).abs() < 1e-6);
        assert!((got[1] - s).abs() < 1e-6);
        assert!((got[2] - v).abs() < 1e-6);
        // 210 degrees, s = 2/3, v = 0.6
        assert!((got[0] - 210.0 / 360.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(Image::new(2, 2, vec![0.0; 11]).is_err());
        assert!(Image::new(1, 1, vec![0.0, 1.5, 0.0]).is_err());
        assert!(Image::new(1, 1, vec![0.0, f32::NAN, 0.0]).is_err());
        assert!(Image::new(1, 1, vec![0.0, 1.0, 0.25]).is_ok());
    }

    #[test]
    fn thousand_pixel_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let img = Image::from_fn(40, 25, |_, _| [rng.gen(), rng.gen(), rng.gen()]);
        let back = hsv_to_rgb(&rgb_to_hsv(&img));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn exact_half_downscale_averages_blocks() {
        let img = Image::from_fn(4, 2, |x, _| [x as f64 / 4.0, 0.0, 1.0]);
        let small = resize_bilinear(&img, 2, 1);
        assert!((small.pixel(0, 0)[0] - 0.125).abs() < 1e-7);
        assert!((small.pixel(1, 0)[0] - 0.625).abs() < 1e-7);
    }

    #[test]
    fn fit_long_side_keeps_aspect() {
        assert_eq!(fit_long_side(600, 400, 300), (300, 200));
        assert_eq!(fit_long_side(100, 50, 256), (100, 50));
    }

    proptest! {
        #[test]
        fn round_trip_within_tolerance(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let back = hsv_to_rgb_pixel(rgb_to_hsv_pixel([r, g, b]));
            prop_assert!((back[0] - r).abs() < 1e-6);
            prop_assert!((back[1] - g).abs() < 1e-6);
            prop_assert!((back[2] - b).abs() < 1e-6);
        }

        #[test]
        fn hsv_channels_in_range(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let [h, s, v] = rgb_to_hsv_pixel([r, g, b]);
            prop_assert!((0.0..1.0).contains(&h));
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
