//! Evaluation metrics: L1, SSIM and cross-image variance.

use serde::Serialize;

use crate::cost::l1_cost;
use crate::error::{Error, Result};
use crate::image::{Image, CHANNELS};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMetrics {
    pub pair_id: String,
    pub l1: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub l1: f64,
    pub ssim: f64,
    pub per_image: Vec<PairMetrics>,
}

impl MetricReport {
    pub fn from_pairs(per_image: Vec<PairMetrics>) -> Self {
        let n = per_image.len().max(1) as f64;
        Self {
            l1: per_image.iter().map(|p| p.l1).sum::<f64>() / n,
            ssim: per_image.iter().map(|p| p.ssim).sum::<f64>() / n,
            per_image,
        }
    }
}

pub fn pair_metrics(pair_id: &str, a: &Image, b: &Image) -> Result<PairMetrics> {
    Ok(PairMetrics {
        pair_id: pair_id.to_string(),
        l1: l1_cost(a, b)?,
        ssim: ssim(a, b)?,
    })
}

/// Rec. 601 luma plane.
pub fn luma(img: &Image) -> Vec<f64> {
    img.data()
        .chunks_exact(CHANNELS)
        .map(|px| 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64)
        .collect()
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

/// Separable valid-mode filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(plane: &[f64], width: usize, height: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width + 1 - SSIM_WINDOW;
    let oh = height + 1 - SSIM_WINDOW;
    let mut horiz = vec![0.0; ow * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            horiz[y * ow + x] = kernel.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * horiz[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM on the luma channel with an 11x11 Gaussian window (σ = 1.5),
/// averaged over every fully-contained window position.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_size(b)?;
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::TooSmall(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
            a.width(),
            a.height()
        )));
    }
    let (w, h) = (a.width(), a.height());
    let (la, lb) = (luma(a), luma(b));
    let kernel = gaussian_window();
    let sq = |p: &[f64]| p.iter().map(|v| v * v).collect::<Vec<_>>();
    let prod: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x * y).collect();

    let mu_a = filter_valid(&la, w, h, &kernel);
    let mu_b = filter_valid(&lb, w, h, &kernel);
    let e_aa = filter_valid(&sq(&la), w, h, &kernel);
    let e_bb = filter_valid(&sq(&lb), w, h, &kernel);
    let e_ab = filter_valid(&prod, w, h, &kernel);

    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2);
        total += num / den;
    }
    Ok(total / mu_a.len() as f64)
}

/// Population variance across `images` per sample, averaged over all
/// positions and channels. Multiply by 100 for the `σ×10²` convention.
pub fn image_variance(images: &[Image]) -> Result<f64> {
    if images.len() < 2 {
        return Err(Error::Precondition(format!(
            "image variance needs at least 2 images, got {}",
            images.len()
        )));
    }
    for img in &images[1..] {
        images[0].check_same_size(img)?;
    }
    let n = images.len() as f64;
    let len = images[0].data().len();
    let mut total = 0.0;
    for i in 0..len {
        let mean = images.iter().map(|im| im.data()[i] as f64).sum::<f64>() / n;
        let var = images
            .iter()
            .map(|im| {
                let d = im.data()[i] as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        total += var;
    }
    Ok(total / len as f64)
}
