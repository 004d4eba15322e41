//! The six parametric editing operations and their parameter spaces.
//!
//! Every operation is a pure function `Image -> Image`. Results are clamped
//! to `[0, 1]` after each application.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{hsv_to_rgb_pixel, rgb_to_hsv_pixel, Image, Mask, CHANNELS};

/// Number of linear pieces in a tone/color curve.
pub const CURVE_PIECES: usize = 8;

/// Curve weight vectors summing below this are rejected regardless of the
/// configured per-component bounds.
pub const CURVE_Z_MIN: f64 = 0.5;

/// Luminance below which contrast enhancement maps the pixel to black.
const CONTRAST_LUM_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Brightness,
    Saturation,
    Contrast,
    Sharpness,
    Tone,
    Color,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::Brightness,
        OpKind::Saturation,
        OpKind::Contrast,
        OpKind::Sharpness,
        OpKind::Tone,
        OpKind::Color,
    ];

    /// The single-parameter operations.
    pub const SCALAR: [OpKind; 4] = [
        OpKind::Brightness,
        OpKind::Saturation,
        OpKind::Contrast,
        OpKind::Sharpness,
    ];

    pub fn dim(self) -> usize {
        match self {
            OpKind::Tone => CURVE_PIECES,
            OpKind::Color => 3 * CURVE_PIECES,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Brightness => "brightness",
            OpKind::Saturation => "saturation",
            OpKind::Contrast => "contrast",
            OpKind::Sharpness => "sharpness",
            OpKind::Tone => "tone",
            OpKind::Color => "color",
        }
    }

    /// Position in [`OpKind::ALL`]; used as a sort tie-breaker.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownOp(s.to_string()))
    }
}

/// Parses a comma-separated operation list such as `"brightness,tone"`.
pub fn parse_op_list(s: &str) -> Result<Vec<OpKind>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(OpKind::from_str)
        .collect()
}

/// Continuous control vector of one operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn scalar(v: f64) -> Self {
        Self(vec![v])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Box bounds plus the identity point of a parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct ParamSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
    identity: Vec<f64>,
}

impl ParamSpace {
    /// The identity point must lie strictly inside the box.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, identity: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != identity.len() {
            return Err(Error::InvalidSpace(format!(
                "mismatched lengths lower={} upper={} identity={}",
                lower.len(),
                upper.len(),
                identity.len()
            )));
        }
        for i in 0..lower.len() {
            let (lo, hi, id) = (lower[i], upper[i], identity[i]);
            if !(lo.is_finite() && hi.is_finite() && lo < id && id < hi) {
                return Err(Error::InvalidSpace(format!(
                    "component {i}: need lower < identity < upper, got {lo} / {id} / {hi}"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            identity,
        })
    }

    /// Uniform bounds on every component.
    pub fn uniform(dim: usize, lo: f64, hi: f64, identity: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], vec![identity; dim])
    }

    /// Scalar ops: `[-1, 1]` around 0. Curve weights: `[0.1, 2]` around 1.
    pub fn for_kind(kind: OpKind) -> Self {
        match kind {
            OpKind::Tone | OpKind::Color => Self::uniform(kind.dim(), 0.1, 2.0, 1.0),
            _ => Self::uniform(1, -1.0, 1.0, 0.0),
        }
        .expect("built-in bounds are valid")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn identity(&self) -> ParamVector {
        ParamVector(self.identity.clone())
    }

    pub fn half_range(&self, i: usize) -> f64 {
        (self.upper[i] - self.lower[i]) / 2.0
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .enumerate()
                .all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    /// Clips each component into the box.
    pub fn project(&self, p: &mut [f64]) {
        for (i, v) in p.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

#[derive(Deserialize)]
struct RawSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
    identity: Vec<f64>,
}

impl TryFrom<RawSpace> for ParamSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        ParamSpace::new(raw.lower, raw.upper, raw.identity)
    }
}

#[derive(Deserialize)]
struct RawSpaces {
    spaces: Vec<ParamSpace>,
}

impl TryFrom<RawSpaces> for ParamSpaces {
    type Error = Error;

    fn try_from(raw: RawSpaces) -> Result<Self> {
        let mut out = ParamSpaces::default();
        if raw.spaces.len() != OpKind::ALL.len() {
            return Err(Error::InvalidSpace(format!(
                "expected {} parameter spaces, got {}",
                OpKind::ALL.len(),
                raw.spaces.len()
            )));
        }
        for (kind, space) in OpKind::ALL.into_iter().zip(raw.spaces) {
            out.set(kind, space)?;
        }
        Ok(out)
    }
}

/// Per-operation parameter spaces, in [`OpKind::ALL`] order; defaults to
/// [`ParamSpace::for_kind`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpaces")]
pub struct ParamSpaces {
    spaces: Vec<ParamSpace>,
}

impl Default for ParamSpaces {
    fn default() -> Self {
        Self {
            spaces: OpKind::ALL.iter().map(|k| ParamSpace::for_kind(*k)).collect(),
        }
    }
}

impl ParamSpaces {
    pub fn get(&self, kind: OpKind) -> &ParamSpace {
        &self.spaces[kind.index()]
    }

    pub fn set(&mut self, kind: OpKind, space: ParamSpace) -> Result<()> {
        if space.dim() != kind.dim() {
            return Err(Error::InvalidSpace(format!(
                "{kind} needs {} components, space has {}",
                kind.dim(),
                space.dim()
            )));
        }
        self.spaces[kind.index()] = space;
        Ok(())
    }

    pub fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

pub fn identity_params(kind: OpKind) -> ParamVector {
    ParamSpace::for_kind(kind).identity()
}

/// Checks dimension, bounds and the curve normalization guard.
pub fn validate_params(kind: OpKind, params: &[f64], space: &ParamSpace) -> Result<()> {
    if params.len() != kind.dim() || space.dim() != kind.dim() {
        return Err(Error::ParamDimension {
            kind,
            expected: kind.dim(),
            got: params.len(),
        });
    }
    for (i, v) in params.iter().enumerate() {
        if !v.is_finite() || *v < space.lower()[i] || *v > space.upper()[i] {
            return Err(Error::ParamBounds {
                kind,
                index: i,
                value: *v,
                lo: space.lower()[i],
                hi: space.upper()[i],
            });
        }
    }
    if matches!(kind, OpKind::Tone | OpKind::Color) {
        for block in params.chunks_exact(CURVE_PIECES) {
            let sum: f64 = block.iter().sum();
            if sum < CURVE_Z_MIN {
                return Err(Error::CurveNormalization {
                    kind,
                    sum,
                    min: CURVE_Z_MIN,
                });
            }
        }
    }
    Ok(())
}

/// Applies `kind` with parameters checked against the default bounds.
pub fn apply(kind: OpKind, img: &Image, params: &[f64]) -> Result<Image> {
    apply_in(kind, img, params, &ParamSpace::for_kind(kind))
}

/// Applies `kind` with parameters checked against `space`.
pub fn apply_in(kind: OpKind, img: &Image, params: &[f64], space: &ParamSpace) -> Result<Image> {
    validate_params(kind, params, space)?;
    Ok(apply_unchecked(kind, img, params))
}

/// Dispatch without validation; callers guarantee dimension and the Z guard.
pub(crate) fn apply_unchecked(kind: OpKind, img: &Image, params: &[f64]) -> Image {
    match kind {
        OpKind::Brightness => brightness(img, params[0]),
        OpKind::Saturation => saturation(img, params[0]),
        OpKind::Contrast => contrast(img, params[0]),
        OpKind::Sharpness => sharpness(img, params[0]),
        OpKind::Tone => tone(img, params),
        OpKind::Color => color(img, params),
    }
}

pub fn apply_brightness(img: &Image, p: f64) -> Result<Image> {
    apply(OpKind::Brightness, img, &[p])
}

pub fn apply_saturation(img: &Image, p: f64) -> Result<Image> {
    apply(OpKind::Saturation, img, &[p])
}

pub fn apply_contrast(img: &Image, p: f64) -> Result<Image> {
    apply(OpKind::Contrast, img, &[p])
}

pub fn apply_sharpness(img: &Image, p: f64) -> Result<Image> {
    apply(OpKind::Sharpness, img, &[p])
}

pub fn apply_tone(img: &Image, p: &[f64]) -> Result<Image> {
    apply(OpKind::Tone, img, p)
}

pub fn apply_color(img: &Image, p: &[f64]) -> Result<Image> {
    apply(OpKind::Color, img, p)
}

/// `edited` where the mask is set, `original` elsewhere.
pub fn splice(edited: &Image, original: &Image, mask: &Mask) -> Result<Image> {
    edited.check_same_size(original)?;
    mask.check_matches(original)?;
    Ok(splice_unchecked(edited, original, mask))
}

pub(crate) fn splice_unchecked(edited: &Image, original: &Image, mask: &Mask) -> Image {
    let mut data = Vec::with_capacity(original.data().len());
    for ((e, o), m) in edited
        .data()
        .chunks_exact(CHANNELS)
        .zip(original.data().chunks_exact(CHANNELS))
        .zip(mask.data())
    {
        data.extend_from_slice(if *m > 0.5 { e } else { o });
    }
    Image::new(original.width(), original.height(), data).expect("spliced samples are in range")
}

/// `o(I, p) * M + I * (1 - M)` with default bounds.
pub fn apply_masked(kind: OpKind, img: &Image, params: &[f64], mask: &Mask) -> Result<Image> {
    apply_masked_in(kind, img, params, mask, &ParamSpace::for_kind(kind))
}

pub fn apply_masked_in(
    kind: OpKind,
    img: &Image,
    params: &[f64],
    mask: &Mask,
    space: &ParamSpace,
) -> Result<Image> {
    mask.check_matches(img)?;
    let edited = apply_in(kind, img, params, space)?;
    Ok(splice_unchecked(&edited, img, mask))
}

fn brightness(img: &Image, p: f64) -> Image {
    let gain = 1.0 + p;
    img.map_pixels(|rgb| {
        let [h, s, v] = rgb_to_hsv_pixel(rgb);
        hsv_to_rgb_pixel([h, s, (gain * v).clamp(0.0, 1.0)])
    })
}

fn saturation(img: &Image, p: f64) -> Image {
    let gain = 1.0 + p;
    img.map_pixels(|rgb| {
        let [h, s, v] = rgb_to_hsv_pixel(rgb);
        hsv_to_rgb_pixel([h, (gain * s).clamp(0.0, 1.0), v])
    })
}

pub(crate) fn luminance_contrast(rgb: [f64; 3]) -> f64 {
    0.27 * rgb[0] + 0.67 * rgb[1] + 0.06 * rgb[2]
}

fn contrast(img: &Image, p: f64) -> Image {
    img.map_pixels(|rgb| {
        let lum = luminance_contrast(rgb);
        let ratio = if lum < CONTRAST_LUM_FLOOR {
            0.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * lum).cos()) / lum
        };
        rgb.map(|c| (1.0 - p) * c + p * c * ratio)
    })
}

/// Adds `p` times the 4-neighbour Laplacian, with clamp-to-edge borders.
fn sharpness(img: &Image, p: f64) -> Image {
    let (w, h) = (img.width(), img.height());
    let src = img.data();
    let at = |x: usize, y: usize, c: usize| src[(y * w + x) * CHANNELS + c] as f64;
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        let (up, down) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (left, right) = (x.saturating_sub(1), (x + 1).min(w - 1));
            for c in 0..CHANNELS {
                let center = at(x, y, c);
                let lap = at(x, up, c) + at(x, down, c) + at(left, y, c) + at(right, y, c)
                    - 4.0 * center;
                out.push(center + p * lap);
            }
        }
    }
    Image::from_f64_clamped(w, h, &out)
}

/// Piecewise-linear curve `f(x) = (1/Z) * sum_i clip(N x - i, 0, 1) * w_i`.
#[derive(Debug, Clone)]
pub struct Curve {
    weights: [f64; CURVE_PIECES],
}

impl Curve {
    pub fn new(weights: &[f64]) -> Self {
        let z: f64 = weights.iter().sum();
        let mut normalized = [0.0; CURVE_PIECES];
        for (n, w) in normalized.iter_mut().zip(weights) {
            *n = w / z;
        }
        Self {
            weights: normalized,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let scaled = CURVE_PIECES as f64 * x;
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| (scaled - i as f64).clamp(0.0, 1.0) * w)
            .sum()
    }
}

fn tone(img: &Image, p: &[f64]) -> Image {
    let curve = Curve::new(p);
    img.map_pixels(|rgb| rgb.map(|c| curve.eval(c)))
}

fn color(img: &Image, p: &[f64]) -> Image {
    let curves: Vec<Curve> = p.chunks_exact(CURVE_PIECES).map(Curve::new).collect();
    img.map_pixels(|rgb| {
        [
            curves[0].eval(rgb[0]),
            curves[1].eval(rgb[1]),
            curves[2].eval(rgb[2]),
        ]
    })
}
