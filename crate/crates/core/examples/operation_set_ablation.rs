//! Mean final L1 on a synthetic corpus for several operation sets, fixed vs
//! searched order, and different step budgets.
//! Usage: `cargo run --release --example operation_set_ablation -- [pairs]`.

use edit_planner::cost::TargetL1Cost;
use edit_planner::ops::OpKind;
use edit_planner::planner::{plan_with_config, OrderMode};
use edit_planner::{synth, Image, PlannerConfig};
use rand::Rng;

fn corpus(n: u64) -> Vec<(Image, Image)> {
    (0..n)
        .map(|seed| {
            let ops = synth::rng(seed + 9000).gen_range(1..=3);
            let (input, target, _) = synth::synthetic_pair(48, 48, seed, ops, &OpKind::ALL);
            (input, target)
        })
        .collect()
}

fn mean_l1(pairs: &[(Image, Image)], cfg: &PlannerConfig) -> f64 {
    pairs
        .iter()
        .map(|(i, t)| plan_with_config(i, &TargetL1Cost::new(t.clone()), cfg).unwrap().plan.final_cost)
        .sum::<f64>()
        / pairs.len() as f64
}

fn main() {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let pairs = corpus(n);
    use OpKind::*;
    let sets: [(&str, Vec<OpKind>); 3] = [
        ("brightness", vec![Brightness]),
        ("scalar ops", vec![Brightness, Saturation, Contrast, Sharpness]),
        ("all six", OpKind::ALL.to_vec()),
    ];
    println!("{n} pairs, N=6, B=8");
    for (name, ops) in &sets {
        println!("{name:<24} {:.5}", mean_l1(&pairs, &PlannerConfig::with_ops(ops)));
    }
    let fixed = PlannerConfig { order_mode: OrderMode::Fixed, ..PlannerConfig::default() };
    println!("{:<24} {:.5}", "all six, fixed order", mean_l1(&pairs, &fixed));

    println!("\nstep budget (all six, eps 1e-4)");
    for steps in [1, 2, 3, 4, 6] {
        let cfg = PlannerConfig { max_steps: steps, epsilon: 1e-4, ..PlannerConfig::default() };
        println!("  N={steps}  {:.5}", mean_l1(&pairs, &cfg));
    }
}
