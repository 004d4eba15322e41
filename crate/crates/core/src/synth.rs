//! Seeded synthetic scenes and edit pairs.
//!
//! Scenes are smooth colored gradients with soft blobs and mild texture,
//! which exercises every operation the way natural photos do. Pairs are
//! produced by applying random in-bounds operations, so the generating
//! sequence is a known ground truth.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{Image, Mask};
use crate::ops::{apply_unchecked, OpKind, ParamVector, CURVE_PIECES};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn photo_like(width: usize, height: usize, seed: u64) -> Image {
    photo_like_in_range(width, height, seed, 0.02, 0.98)
}

/// A photo-like scene whose samples span `[lo, hi]`.
pub fn photo_like_in_range(width: usize, height: usize, seed: u64, lo: f64, hi: f64) -> Image {
    render(width, height, seed, lo, hi, 0.02)
}

/// The scene of [`photo_like`] without per-pixel noise, so renderings at
/// different sizes sample one continuous image.
pub fn smooth_scene(width: usize, height: usize, seed: u64) -> Image {
    render(width, height, seed, 0.02, 0.98, 0.0)
}

fn render(width: usize, height: usize, seed: u64, lo: f64, hi: f64, noise_amp: f64) -> Image {
    let mut rng = rng(seed);
    let color = |rng: &mut ChaCha8Rng| -> [f64; 3] { [rng.gen(), rng.gen(), rng.gen()] };
    let (c0, c1) = (color(&mut rng), color(&mut rng));
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());
    let blobs: Vec<([f64; 2], f64, [f64; 3], f64)> = (0..rng.gen_range(3..6))
        .map(|_| {
            (
                [rng.gen::<f64>(), rng.gen::<f64>()],
                rng.gen_range(0.08..0.3),
                color(&mut rng),
                rng.gen_range(0.4..0.9),
            )
        })
        .collect();
    let freq = [rng.gen_range(2.0..9.0), rng.gen_range(2.0..9.0)];
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let noise: Vec<f64> = (0..width * height * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();

    Image::from_fn(width, height, |x, y| {
        let u = (x as f64 + 0.5) / width as f64;
        let v = (y as f64 + 0.5) / height as f64;
        let t = (((u - 0.5) * dx + (v - 0.5) * dy) / std::f64::consts::SQRT_2 + 0.5).clamp(0.0, 1.0);
        let mut px = [0.0; 3];
        for c in 0..3 {
            px[c] = c0[c] * (1.0 - t) + c1[c] * t;
        }
        for (center, radius, col, weight) in &blobs {
            let d2 = (u - center[0]).powi(2) + (v - center[1]).powi(2);
            let w = weight * (-d2 / (2.0 * radius * radius)).exp();
            for c in 0..3 {
                px[c] = px[c] * (1.0 - w) + col[c] * w;
            }
        }
        let texture = 0.04 * (freq[0] * std::f64::consts::TAU * u + phase).sin()
            * (freq[1] * std::f64::consts::TAU * v).cos();
        let i = (y * width + x) * 3;
        for c in 0..3 {
            let s = (px[c] + texture + noise_amp * noise[i + c]).clamp(0.0, 1.0);
            px[c] = lo + (hi - lo) * s;
        }
        px
    })
}

/// Random in-bounds parameters of moderate strength: scalars in
/// `[-0.5, 0.5]`, curve weights in `[0.5, 1.5]`.
pub fn random_params(kind: OpKind, rng: &mut impl Rng) -> ParamVector {
    match kind {
        OpKind::Tone | OpKind::Color => {
            ParamVector((0..kind.dim()).map(|_| rng.gen_range(0.5..1.5)).collect())
        }
        _ => ParamVector::scalar(rng.gen_range(-0.5..0.5)),
    }
}

/// A random curve block for tone/color.
pub fn random_curve(rng: &mut impl Rng) -> Vec<f64> {
    (0..CURVE_PIECES).map(|_| rng.gen_range(0.5..1.5)).collect()
}

/// Applies `ops` distinct random operations drawn from `pool` to a
/// photo-like scene. Returns `(input, target, generating actions)`.
pub fn synthetic_pair(
    width: usize,
    height: usize,
    seed: u64,
    ops: usize,
    pool: &[OpKind],
) -> (Image, Image, Vec<(OpKind, ParamVector)>) {
    let mut rng = rng(seed ^ 0x5eed_f00d);
    let input = photo_like(width, height, seed);
    let mut kinds = pool.to_vec();
    kinds.shuffle(&mut rng);
    kinds.truncate(ops.min(pool.len()));
    let actions: Vec<_> = kinds
        .into_iter()
        .map(|k| (k, random_params(k, &mut rng)))
        .collect();
    let target = apply_actions(&input, &actions);
    (input, target, actions)
}

pub fn apply_actions(input: &Image, actions: &[(OpKind, ParamVector)]) -> Image {
    actions
        .iter()
        .fold(input.clone(), |img, (k, p)| apply_unchecked(*k, &img, p))
}

pub fn left_half(width: usize, height: usize) -> Mask {
    Mask::from_fn(width, height, |x, _| x < width / 2)
}

pub fn right_half(width: usize, height: usize) -> Mask {
    Mask::from_fn(width, height, |x, _| x >= width / 2)
}

pub fn top_half(width: usize, height: usize) -> Mask {
    Mask::from_fn(width, height, |_, y| y < height / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_seeded_and_in_range() {
        let a = photo_like_in_range(20, 10, 4, 0.1, 0.6);
        assert_eq!(a, photo_like_in_range(20, 10, 4, 0.1, 0.6));
        assert_ne!(a, photo_like_in_range(20, 10, 5, 0.1, 0.6));
        assert!(a.data().iter().all(|v| (0.1 - 1e-6..=0.6 + 1e-6).contains(&(*v as f64))));
    }

    #[test]
    fn pairs_use_distinct_ops() {
        let (_, _, actions) = synthetic_pair(8, 8, 3, 3, &OpKind::ALL);
        assert_eq!(actions.len(), 3);
        let mut kinds: Vec<_> = actions.iter().map(|a| a.0).collect();
        kinds.dedup();
        kinds.sort();
        kinds.dedup();
        assert_eq!(kinds.len(), 3);
    }
}
