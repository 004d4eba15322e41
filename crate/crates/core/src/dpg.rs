//! Numerical check that per-step deterministic policy gradients of the
//! accumulated reward equal the negative gradient of the final cost.
//!
//! With rewards `r_t = cost(I_{t-1}) - cost(I_t)` and no discount, the
//! return from step `t+1` telescopes to `cost(I_t) - cost(I_T)`. `I_t` does
//! not depend on `α_t`, so `∇_{α_t} G_{t+1} = -∂cost(I_T)/∂α_t`. Both sides
//! are estimated here by central differences through the operation chain:
//! the left side per step from the cached prefix image, the right side over
//! the concatenated parameter vector from the input.

use serde::Serialize;

use crate::cost::{reward, CostFn, TargetL1Cost};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::ops::{apply_unchecked, validate_params, OpKind};
use crate::planner::{replay_trajectory, Plan};

/// Acceptance threshold on the relative discrepancy.
pub const DPG_TOLERANCE: f64 = 1e-3;

/// Gradients with a larger-magnitude component below this are treated as zero
/// when forming relative errors.
const GRADIENT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct StepGradient {
    pub op: OpKind,
    /// `∇_{α_t} G_{t+1}` per component.
    pub dpg: Vec<f64>,
    /// `-∂cost(I_T)/∂α_t` per component.
    pub direct: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DpgReport {
    pub steps: Vec<StepGradient>,
    pub costs: Vec<f64>,
    pub rewards: Vec<f64>,
    /// `|Σ r_t - (cost(I_0) - cost(I_T))|`.
    pub telescoping_error: f64,
    /// `max_k |a_k - b_k| / max(‖a‖∞, ‖b‖∞)` over the stacked gradients.
    pub max_relative_discrepancy: f64,
    pub fd_step: f64,
    pub passed: bool,
}

/// Verifies the identity for an L1-to-target cost.
pub fn verify_dpg_equivalence(input: &Image, target: &Image, plan: &Plan, fd_step: f64) -> Result<DpgReport> {
    verify_dpg_with_cost(input, &TargetL1Cost::new(target.clone()), plan, fd_step)
}

pub fn verify_dpg_with_cost(input: &Image, cost: &dyn CostFn, plan: &Plan, fd_step: f64) -> Result<DpgReport> {
    if plan.steps.is_empty() {
        return Err(Error::Precondition("plan has no steps to differentiate".into()));
    }
    if !(fd_step > 0.0) {
        return Err(Error::Precondition(format!("fd_step must be positive, got {fd_step}")));
    }
    cost.check(input)?;
    for (t, step) in plan.steps.iter().enumerate() {
        if step.mask_index.is_some() {
            return Err(Error::Precondition(format!("step {t} is masked; only whole-image plans are supported")));
        }
        let space = plan.config.param_spaces.get(step.op);
        validate_params(step.op, &step.params, space)?;
        for (j, v) in step.params.iter().enumerate() {
            if v - fd_step < space.lower()[j] || v + fd_step > space.upper()[j] {
                return Err(Error::Precondition(format!(
                    "step {t} ({}) parameter {j} = {v} is within fd_step of its bound [{}, {}]; \
                     central differences need interior parameters",
                    step.op,
                    space.lower()[j],
                    space.upper()[j]
                )));
            }
        }
    }

    let mut images = vec![input.clone()];
    images.extend(replay_trajectory(input, plan, &[])?);
    let costs: Vec<f64> = images.iter().map(|im| cost.eval(im)).collect();
    let rewards: Vec<f64> = costs.windows(2).map(|w| reward(w[0], w[1])).collect();
    let telescoping_error = (rewards.iter().sum::<f64>() - (costs[0] - costs[costs.len() - 1])).abs();

    let actions: Vec<(OpKind, Vec<f64>)> = plan.steps.iter().map(|s| (s.op, s.params.0.clone())).collect();
    let roll = |start: &Image, from: usize, acts: &[(OpKind, Vec<f64>)]| -> Image {
        acts[from..]
            .iter()
            .fold(start.clone(), |im, (op, p)| apply_unchecked(*op, &im, p))
    };

    // Left side: ∇_{α_t} [cost(I_t) - cost(I_T)], re-rolling only the suffix.
    let mut steps = Vec::with_capacity(actions.len());
    for t in 0..actions.len() {
        let prefix_cost = costs[t];
        let mut dpg = Vec::with_capacity(actions[t].1.len());
        for j in 0..actions[t].1.len() {
            let mut g = [0.0; 2];
            for (slot, sign) in [(0, 1.0), (1, -1.0)] {
                let mut acts = actions.clone();
                acts[t].1[j] += sign * fd_step;
                let last = roll(&images[t], t, &acts);
                g[slot] = prefix_cost - cost.eval(&last);
            }
            dpg.push((g[0] - g[1]) / (2.0 * fd_step));
        }
        steps.push(StepGradient {
            op: actions[t].0,
            dpg,
            direct: Vec::new(),
        });
    }

    // Right side: -∇_θ cost(I_T) with θ the concatenation of all α_t.
    for t in 0..actions.len() {
        for j in 0..actions[t].1.len() {
            let mut f = [0.0; 2];
            for (slot, sign) in [(0, 1.0), (1, -1.0)] {
                let mut acts = actions.clone();
                acts[t].1[j] += sign * fd_step;
                f[slot] = cost.eval(&roll(input, 0, &acts));
            }
            steps[t].direct.push(-(f[0] - f[1]) / (2.0 * fd_step));
        }
    }

    let stacked = |pick: fn(&StepGradient) -> &Vec<f64>| -> Vec<f64> {
        steps.iter().flat_map(|s| pick(s).iter().copied()).collect()
    };
    let (a, b) = (stacked(|s| &s.dpg), stacked(|s| &s.direct));
    let scale = a
        .iter()
        .chain(&b)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(GRADIENT_FLOOR);
    let max_relative_discrepancy = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max);

    Ok(DpgReport {
        steps,
        costs,
        rewards,
        telescoping_error,
        max_relative_discrepancy,
        fd_step,
        passed: max_relative_discrepancy < DPG_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::ParamVector;
    use crate::planner::PlannerConfig;
    use crate::synth;

    fn plan_for(input: &Image, target: &Image, actions: &[(OpKind, ParamVector)]) -> Plan {
        Plan::from_actions(input, &TargetL1Cost::new(target.clone()), actions, PlannerConfig::default()).unwrap()
    }

    #[test]
    fn single_step_sides_agree() {
        let input = synth::photo_like(24, 24, 1);
        let target = synth::photo_like(24, 24, 2);
        let plan = plan_for(&input, &target, &[(OpKind::Contrast, ParamVector::scalar(0.3))]);
        let report = verify_dpg_equivalence(&input, &target, &plan, 1e-4).unwrap();
        assert_eq!(report.steps.len(), 1);
        assert!(report.max_relative_discrepancy < 1e-9, "{report:?}");
        assert!(report.passed);
    }

    #[test]
    fn three_step_chain() {
        let input = synth::photo_like(24, 24, 3);
        let target = synth::photo_like(24, 24, 4);
        let plan = plan_for(
            &input,
            &target,
            &[
                (OpKind::Brightness, ParamVector::scalar(0.2)),
                (OpKind::Contrast, ParamVector::scalar(-0.3)),
                (OpKind::Saturation, ParamVector::scalar(0.4)),
            ],
        );
        let report = verify_dpg_equivalence(&input, &target, &plan, 1e-4).unwrap();
        assert!(report.max_relative_discrepancy < DPG_TOLERANCE);
        assert!(report.telescoping_error <= 1e-12);
        assert!(report.steps.iter().all(|s| s.dpg.len() == 1));
    }

    #[test]
    fn boundary_parameters_are_rejected() {
        let input = synth::photo_like(16, 16, 5);
        let plan = plan_for(&input, &input, &[(OpKind::Brightness, ParamVector::scalar(1.0))]);
        assert!(matches!(
            verify_dpg_equivalence(&input, &input, &plan, 1e-4),
            Err(Error::Precondition(_))
        ));
        let empty = plan_for(&input, &input, &[]);
        assert!(verify_dpg_equivalence(&input, &input, &empty, 1e-4).is_err());
    }
}
