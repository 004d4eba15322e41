//! Planning with region masks: the target darkens only the top half, and the
//! planner has to find which mask to edit through.

use edit_planner::cost::TargetL1Cost;
use edit_planner::ops::{apply_masked, OpKind};
use edit_planner::planner::{plan_local, replay_local};
use edit_planner::{synth, PlannerConfig};

fn main() -> edit_planner::Result<()> {
    let (w, h) = (48, 48);
    let input = synth::photo_like_in_range(w, h, 12, 0.15, 0.75);
    let masks = [synth::left_half(w, h), synth::right_half(w, h), synth::top_half(w, h)];
    let names = ["left", "right", "top"];
    let target = apply_masked(OpKind::Brightness, &input, &[-0.35], &masks[2])?;

    let cfg = PlannerConfig { epsilon: 1e-4, ..PlannerConfig::default() };
    let out = plan_local(&input, &TargetL1Cost::new(target), &masks, &cfg)?;
    for s in &out.plan.steps {
        let region = s.mask_index.map_or("whole image", |i| names[i]);
        println!("{:<10} on {region:<11} params {:?}  L1 {:.6}", s.op, s.params.0, s.cost_after);
    }
    let again = replay_local(&input, &out.plan, &masks)?;
    assert_eq!(again, out.final_image);
    Ok(())
}
