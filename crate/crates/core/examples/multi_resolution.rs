//! Plans on a reduced copy and replays the parameters at full resolution.

use edit_planner::batch::plan_images;
use edit_planner::cost::CostRegistry;
use edit_planner::ops::OpKind;
use edit_planner::{synth, PlannerConfig};

fn main() -> edit_planner::Result<()> {
    let big = synth::smooth_scene(384, 256, 31);
    let (_, _, actions) = synth::synthetic_pair(8, 8, 31, 2, &[OpKind::Brightness, OpKind::Tone, OpKind::Saturation]);
    let target = synth::apply_actions(&big, &actions);
    let registry = CostRegistry::default();
    let cfg = PlannerConfig { epsilon: 1e-3, ..PlannerConfig::default() };

    for downscale in [None, Some(128), Some(64)] {
        let start = std::time::Instant::now();
        let pair = plan_images(&big, &target, &cfg, &registry, downscale)?;
        println!(
            "planning at {:<8} planned L1 {:.5}  full-res L1 {:.5}  steps {}  {:.2}s",
            downscale.map_or("full".to_string(), |d| format!("{d}px")),
            pair.outcome.plan.final_cost,
            pair.full_res_final_l1,
            pair.outcome.plan.steps.len(),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
