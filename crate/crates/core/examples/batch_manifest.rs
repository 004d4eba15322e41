//! Writes a small synthetic dataset, builds a manifest from its directories,
//! and plans every pair in parallel.
//! Usage: `cargo run --release --example batch_manifest -- [work_dir]`.

use std::path::PathBuf;

use edit_planner::batch::{load_manifest, manifest_from_dirs, run_batch, write_manifest, BatchOptions};
use edit_planner::cost::CostRegistry;
use edit_planner::image::save_image;
use edit_planner::ops::OpKind;
use edit_planner::{synth, PlannerConfig};

fn main() -> edit_planner::Result<()> {
    let root: PathBuf = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("batch_manifest"), PathBuf::from);
    let (inputs, targets) = (root.join("input"), root.join("target"));
    for dir in [&inputs, &targets] {
        std::fs::create_dir_all(dir).map_err(|e| edit_planner::Error::Io { path: dir.clone(), source: e })?;
    }
    for seed in 0..12 {
        let (input, target, _) = synth::synthetic_pair(64, 48, seed, 1 + seed as usize % 3, &OpKind::ALL);
        save_image(&input, inputs.join(format!("img{seed:02}.png")))?;
        save_image(&target, targets.join(format!("img{seed:02}.png")))?;
    }

    let manifest = root.join("manifest.jsonl");
    write_manifest(&manifest_from_dirs(&inputs, &targets)?, &manifest)?;
    let entries = load_manifest(&manifest)?;
    println!("{} entries in {}", entries.len(), manifest.display());

    let opts = BatchOptions {
        planner: PlannerConfig::default(),
        downscale: None,
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        out_dir: root.join("plans"),
    };
    let summary = run_batch(&entries, &opts, &CostRegistry::default())?;
    println!("mean L1 {:.5} -> {:.5} (median {:.5}), {} of {} below eps",
        summary.mean_initial_l1, summary.mean_final_l1, summary.median_final_l1,
        summary.below_epsilon, summary.succeeded);
    println!("steps histogram {:?}", summary.step_histogram);
    println!("op usage {:?}", summary.op_usage);
    println!("plans and aggregate.json in {}", opts.out_dir.display());
    Ok(())
}
