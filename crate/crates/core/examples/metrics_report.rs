//! L1, SSIM and cross-image variance on a few synthetic images.

use edit_planner::metrics::{image_variance, pair_metrics, ssim, MetricReport};
use edit_planner::ops::{apply, OpKind};
use edit_planner::{synth, Image};

fn main() -> edit_planner::Result<()> {
    let base = synth::photo_like(64, 64, 1);
    let pairs = [
        ("same", base.clone()),
        ("brighter", apply(OpKind::Brightness, &base, &[0.2])?),
        ("sharper", apply(OpKind::Sharpness, &base, &[0.8])?),
        ("other scene", synth::photo_like(64, 64, 2)),
    ];
    let per_image = pairs
        .iter()
        .map(|(id, img)| pair_metrics(id, &base, img))
        .collect::<edit_planner::Result<Vec<_>>>()?;
    for m in &per_image {
        println!("{:<12} L1 {:.5}  SSIM {:.5}", m.pair_id, m.l1, m.ssim);
    }
    let report = MetricReport::from_pairs(per_image);
    println!("mean         L1 {:.5}  SSIM {:.5}", report.l1, report.ssim);

    let a = Image::filled(16, 16, [0.5; 3]);
    let b = Image::filled(16, 16, [0.6; 3]);
    println!("\nconstant 0.5 vs 0.6 SSIM {:.5}", ssim(&a, &b)?);

    let edits: Vec<Image> = [-0.2, -0.1, 0.0, 0.1, 0.2]
        .iter()
        .map(|p| apply(OpKind::Brightness, &base, &[*p]))
        .collect::<edit_planner::Result<_>>()?;
    let sigma = image_variance(&edits)?;
    println!("variance over 5 brightness edits {sigma:.6} (x100: {:.4})", sigma * 100.0);
    Ok(())
}
