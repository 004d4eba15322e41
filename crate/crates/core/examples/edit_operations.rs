//! Applies each of the six edits to a synthetic scene and writes the results
//! as PNGs. Usage: `cargo run --example edit_operations -- [out_dir]`.

use std::path::PathBuf;

use edit_planner::cost::l1_cost;
use edit_planner::image::save_image;
use edit_planner::ops::{apply, apply_masked, OpKind};
use edit_planner::synth;

fn main() -> edit_planner::Result<()> {
    let out: PathBuf = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("edit_operations"), PathBuf::from);
    std::fs::create_dir_all(&out).map_err(|e| edit_planner::Error::Io { path: out.clone(), source: e })?;

    let img = synth::photo_like(160, 120, 3);
    save_image(&img, out.join("input.png"))?;

    let mut curve = vec![1.0; 8];
    curve[0] = 1.8;
    curve[7] = 0.4;
    let mut color = vec![1.0; 24];
    for (i, w) in color[16..24].iter_mut().enumerate() {
        *w = 1.8 - 0.2 * i as f64;
    }

    let edits: [(OpKind, Vec<f64>); 6] = [
        (OpKind::Brightness, vec![0.3]),
        (OpKind::Saturation, vec![-0.6]),
        (OpKind::Contrast, vec![0.8]),
        (OpKind::Sharpness, vec![1.0]),
        (OpKind::Tone, curve),
        (OpKind::Color, color),
    ];
    for (kind, params) in &edits {
        let edited = apply(*kind, &img, params)?;
        let path = out.join(format!("{kind}.png"));
        save_image(&edited, &path)?;
        println!("{kind:<10} L1 from input {:.4} -> {}", l1_cost(&edited, &img)?, path.display());
    }

    let left = synth::left_half(img.width(), img.height());
    let local = apply_masked(OpKind::Brightness, &img, &[-0.5], &left)?;
    save_image(&local, out.join("brightness_left_half.png"))?;
    println!("masked darkening of the left half written too");
    Ok(())
}
