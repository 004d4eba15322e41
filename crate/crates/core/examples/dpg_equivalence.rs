//! Checks numerically that each step's policy-gradient term equals the
//! gradient of the final cost with respect to that step's parameters.

use edit_planner::cost::TargetL1Cost;
use edit_planner::dpg::verify_dpg_equivalence;
use edit_planner::ops::OpKind;
use edit_planner::{synth, Plan, PlannerConfig};

fn main() -> edit_planner::Result<()> {
    let (input, _, actions) = synth::synthetic_pair(
        32,
        32,
        4,
        3,
        &[OpKind::Brightness, OpKind::Contrast, OpKind::Saturation],
    );
    let target = synth::photo_like(32, 32, 99);
    let plan = Plan::from_actions(&input, &TargetL1Cost::new(target.clone()), &actions, PlannerConfig::default())?;
    let report = verify_dpg_equivalence(&input, &target, &plan, 1e-4)?;

    for (t, g) in report.steps.iter().enumerate() {
        println!("step {t} {:<10} policy term {:?}  direct {:?}", g.op, g.dpg, g.direct);
    }
    println!("rewards {:?}", report.rewards);
    println!("telescoping error {:e}", report.telescoping_error);
    println!("max relative discrepancy {:e} -> {}", report.max_relative_discrepancy,
        if report.passed { "pass" } else { "fail" });
    Ok(())
}
