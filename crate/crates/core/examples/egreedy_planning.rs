//! Beam search with random exploration: a seed fixes the plan, and different
//! seeds can take different routes to a similar cost.

use edit_planner::cost::TargetL1Cost;
use edit_planner::ops::OpKind;
use edit_planner::planner::{plan, plan_egreedy};
use edit_planner::{synth, PlannerConfig};

fn main() -> edit_planner::Result<()> {
    let (input, target, _) = synth::synthetic_pair(48, 48, 5, 3, &OpKind::ALL);
    let cost = TargetL1Cost::new(target);
    let base = PlannerConfig { epsilon: 1e-3, ..PlannerConfig::default() };
    let greedy = plan(&input, &cost, &base)?.plan;
    let ops = |p: &edit_planner::Plan| p.steps.iter().map(|s| s.op.name()).collect::<Vec<_>>().join(" > ");
    println!("deterministic     L1 {:.5}  {}", greedy.final_cost, ops(&greedy));

    for seed in 0..5 {
        let cfg = PlannerConfig { egreedy_prob: 0.3, rng_seed: seed, ..base.clone() };
        let a = plan_egreedy(&input, &cost, &cfg)?.plan;
        let b = plan_egreedy(&input, &cost, &cfg)?.plan;
        assert_eq!(a, b);
        println!("seed {seed} (p=0.3)  L1 {:.5}  {}", a.final_cost, ops(&a));
    }
    Ok(())
}
