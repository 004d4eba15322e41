//! Registers a user-defined cost and plans with it by name.

use edit_planner::cost::{l1_cost, CostFn, CostRegistry};
use edit_planner::metrics::luma;
use edit_planner::ops::OpKind;
use edit_planner::planner::plan_with_config;
use edit_planner::{synth, Image, PlannerConfig};

/// Mean absolute luma difference: ignores hue, so color edits cost nothing.
struct LumaL1 {
    target: Vec<f64>,
    size: (usize, usize),
}

impl CostFn for LumaL1 {
    fn name(&self) -> &str {
        "luma-l1"
    }

    fn eval(&self, img: &Image) -> f64 {
        let l = luma(img);
        l.iter().zip(&self.target).map(|(a, b)| (a - b).abs()).sum::<f64>() / l.len() as f64
    }

    fn check(&self, img: &Image) -> edit_planner::Result<()> {
        if (img.width(), img.height()) == self.size {
            Ok(())
        } else {
            Err(edit_planner::Error::Precondition("size mismatch".into()))
        }
    }
}

fn main() -> edit_planner::Result<()> {
    let mut registry = CostRegistry::default();
    registry.register("luma-l1", |target: &Image| {
        Box::new(LumaL1 { target: luma(target), size: (target.width(), target.height()) }) as Box<dyn CostFn>
    });
    println!("registered costs: {:?}", registry.names().collect::<Vec<_>>());

    let (input, target, _) = synth::synthetic_pair(48, 48, 8, 2, &[OpKind::Brightness, OpKind::Saturation]);
    for name in ["l1", "luma-l1"] {
        let cfg = PlannerConfig { cost_name: name.into(), epsilon: 1e-4, ..PlannerConfig::default() };
        let cost = registry.build(name, &target)?;
        let out = plan_with_config(&input, cost.as_ref(), &cfg)?;
        let ops: Vec<_> = out.plan.steps.iter().map(|s| s.op.name()).collect();
        println!("{name:<8} final cost {:.6}, RGB L1 {:.6}, ops {ops:?}",
            out.plan.final_cost, l1_cost(&out.final_image, &target)?);
    }
    Ok(())
}
