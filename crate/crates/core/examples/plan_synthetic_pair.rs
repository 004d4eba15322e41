//! Builds a synthetic pair from known edits, plans it, and compares the
//! recovered sequence with the ground truth.

use edit_planner::cost::TargetL1Cost;
use edit_planner::ops::OpKind;
use edit_planner::planner::{plan, replay};
use edit_planner::{synth, PlannerConfig};

fn main() -> edit_planner::Result<()> {
    let (input, target, truth) = synth::synthetic_pair(64, 64, 21, 3, &OpKind::ALL);
    println!("ground truth:");
    for (op, p) in &truth {
        println!("  {op:<10} {:?}", p.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    }

    let cost = TargetL1Cost::new(target);
    let cfg = PlannerConfig { epsilon: 1e-3, ..PlannerConfig::default() };
    let out = plan(&input, &cost, &cfg)?;
    println!("\nplan ({:?}, {} optimizer runs, {} evaluations):", out.plan.terminated_by,
        out.stats.optimizer_runs, out.stats.objective_evals);
    println!("  start      L1 {:.5}", out.plan.initial_cost);
    for s in &out.plan.steps {
        println!("  {:<10} L1 {:.5}  params {:?}", s.op, s.cost_after,
            s.params.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    }

    let replayed = replay(&input, &out.plan)?;
    assert_eq!(replayed, out.final_image);
    println!("\nplan file:\n{}", out.plan.to_json()?);
    Ok(())
}
