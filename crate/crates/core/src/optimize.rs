//! Box-constrained Nelder-Mead minimization.
//!
//! Trial points are projected into the box before evaluation. The start
//! point is always the first vertex, so the returned value never exceeds
//! `objective(start)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{ParamSpace, ParamVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Evaluation budget; `None` picks a default from the dimension.
    pub max_evals: Option<usize>,
    /// Convergence threshold on the simplex extent, in units of each
    /// component's half-range.
    pub x_tol: f64,
    /// Convergence threshold on the spread of vertex values.
    pub f_tol: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Offset of the initial simplex vertices as a fraction of the half-range.
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_evals: None,
            x_tol: 1e-4,
            f_tol: 1e-6,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.2,
        }
    }
}

impl OptimizerConfig {
    pub fn budget(&self, dim: usize) -> usize {
        self.max_evals.unwrap_or(match dim {
            0 | 1 => 120,
            2..=8 => 400,
            _ => 800,
        })
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let positive = [
            ("reflection", self.reflection),
            ("expansion", self.expansion),
            ("contraction", self.contraction),
            ("shrink", self.shrink),
            ("initial_step", self.initial_step),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Config(format!("optimizer.{name} must be positive, got {v}")));
        }
        if self.expansion <= self.reflection {
            return Err(Error::Config(format!(
                "optimizer.expansion ({}) must exceed optimizer.reflection ({})",
                self.expansion, self.reflection
            )));
        }
        if self.contraction >= 1.0 || self.shrink >= 1.0 {
            return Err(Error::Config(
                "optimizer.contraction and optimizer.shrink must be below 1".into(),
            ));
        }
        if !(self.x_tol >= 0.0 && self.f_tol >= 0.0) {
            return Err(Error::Config("optimizer tolerances must be non-negative".into()));
        }
        let budget = self.budget(dim);
        if budget < dim + 2 {
            return Err(Error::Config(format!(
                "optimizer.max_evals = {budget} is below dim + 2 = {}",
                dim + 2
            )));
        }
        Ok(())
    }
}

/// Simplex vertices kept sorted by objective value.
#[derive(Debug, Clone)]
pub struct SimplexState {
    pub vertices: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub iteration: usize,
}

impl SimplexState {
    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|a, b| self.values[*a].total_cmp(&self.values[*b]).then(a.cmp(b)));
        self.vertices = order.iter().map(|i| self.vertices[*i].clone()).collect();
        self.values = order.iter().map(|i| self.values[*i]).collect();
    }

    fn converged(&self, space: &ParamSpace, cfg: &OptimizerConfig) -> bool {
        let best = &self.vertices[0];
        let x_spread = self.vertices[1..]
            .iter()
            .flat_map(|v| {
                v.iter()
                    .zip(best)
                    .enumerate()
                    .map(|(j, (a, b))| (a - b).abs() / space.half_range(j))
            })
            .fold(0.0, f64::max);
        let f_spread = self.values[1..]
            .iter()
            .map(|v| (v - self.values[0]).abs())
            .fold(0.0, f64::max);
        x_spread <= cfg.x_tol && f_spread <= cfg.f_tol
    }

    fn centroid(&self) -> Vec<f64> {
        let n = self.vertices.len() - 1;
        let mut c = vec![0.0; self.vertices[0].len()];
        for v in &self.vertices[..n] {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi;
            }
        }
        c.iter_mut().for_each(|ci| *ci /= n as f64);
        c
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub params: ParamVector,
    pub value: f64,
    pub evals: usize,
    pub iterations: usize,
    /// Incumbent value at the start of each iteration.
    pub history: Vec<f64>,
}

/// Counts evaluations, enforces the budget and tracks the incumbent.
struct Evaluator<'a, F> {
    objective: F,
    space: &'a ParamSpace,
    budget: usize,
    evals: usize,
    best: Option<(Vec<f64>, f64)>,
}

impl<F: FnMut(&[f64]) -> f64> Evaluator<'_, F> {
    fn eval(&mut self, x: &mut [f64]) -> Option<f64> {
        if self.evals >= self.budget {
            return None;
        }
        self.space.project(x);
        self.evals += 1;
        let mut v = (self.objective)(x);
        if v.is_nan() {
            v = f64::INFINITY;
        }
        if self.best.as_ref().is_none_or(|(_, b)| v < *b) {
            self.best = Some((x.to_vec(), v));
        }
        Some(v)
    }
}

const MAX_RESTARTS: usize = 3;

/// Resets `state` to `x0` plus one vertex per axis, offset by
/// `initial_step` half-ranges (inwards when the outward step leaves the box).
fn build_simplex<F: FnMut(&[f64]) -> f64>(
    state: &mut SimplexState,
    ev: &mut Evaluator<'_, F>,
    x0: Vec<f64>,
    f0: f64,
    cfg: &OptimizerConfig,
) -> Option<()> {
    let space = ev.space;
    state.vertices.clear();
    state.values.clear();
    state.vertices.push(x0.clone());
    state.values.push(f0);
    for j in 0..space.dim() {
        let step = cfg.initial_step * space.half_range(j);
        let mut v = x0.clone();
        v[j] = if v[j] + step <= space.upper()[j] {
            v[j] + step
        } else {
            v[j] - step
        };
        let f = ev.eval(&mut v)?;
        state.vertices.push(v);
        state.values.push(f);
    }
    Some(())
}

fn affine(a: &[f64], wa: f64, b: &[f64], wb: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
}

/// Minimizes `objective` over `space` starting from `start`.
///
/// Budget exhaustion is not an error: the best point seen so far is returned.
pub fn nelder_mead<F>(
    objective: F,
    space: &ParamSpace,
    start: &[f64],
    cfg: &OptimizerConfig,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = space.dim();
    if start.len() != dim {
        return Err(Error::Config(format!(
            "start has {} components, space has {dim}",
            start.len()
        )));
    }
    if !space.contains(start) {
        return Err(Error::Precondition(format!(
            "start point {start:?} is outside the parameter bounds"
        )));
    }
    cfg.validate(dim)?;

    let mut ev = Evaluator {
        objective,
        space,
        budget: cfg.budget(dim),
        evals: 0,
        best: None,
    };

    let mut x0 = start.to_vec();
    let f0 = ev.eval(&mut x0).expect("budget covers the start point");
    let mut state = SimplexState {
        vertices: Vec::new(),
        values: Vec::new(),
        iteration: 0,
    };
    build_simplex(&mut state, &mut ev, x0, f0, cfg).expect("budget covers the initial simplex");

    let mut history = Vec::new();
    let (rho, chi, gamma, sigma) = (cfg.reflection, cfg.expansion, cfg.contraction, cfg.shrink);
    let mut restarts = 0;
    let mut last_converged = f64::INFINITY;
    'outer: loop {
        state.sort();
        history.push(ev.best.as_ref().map(|b| b.1).unwrap_or(f0));
        if ev.evals >= ev.budget {
            break;
        }
        if state.converged(space, cfg) {
            // A collapsed simplex (e.g. flattened against a bound) can stall
            // short of the minimum; rebuild it around the incumbent while
            // that keeps paying off.
            let value = state.values[0];
            if restarts == MAX_RESTARTS || last_converged - value <= cfg.f_tol {
                break;
            }
            last_converged = value;
            restarts += 1;
            let x = state.vertices[0].clone();
            if build_simplex(&mut state, &mut ev, x, value, cfg).is_none() {
                break;
            }
            continue;
        }
        state.iteration += 1;

        let n = dim;
        let c = state.centroid();
        let worst = state.vertices[n].clone();

        let mut xr = affine(&c, 1.0 + rho, &worst, -rho);
        let Some(fr) = ev.eval(&mut xr) else { break };

        if fr < state.values[0] {
            let mut xe = affine(&c, 1.0 + rho * chi, &worst, -rho * chi);
            let Some(fe) = ev.eval(&mut xe) else {
                state.vertices[n] = xr;
                state.values[n] = fr;
                break;
            };
            if fe < fr {
                state.vertices[n] = xe;
                state.values[n] = fe;
            } else {
                state.vertices[n] = xr;
                state.values[n] = fr;
            }
            continue;
        }
        if fr < state.values[n - 1] {
            state.vertices[n] = xr;
            state.values[n] = fr;
            continue;
        }

        let accepted = if fr < state.values[n] {
            let mut xc = affine(&c, 1.0 + gamma * rho, &worst, -gamma * rho);
            let Some(fc) = ev.eval(&mut xc) else { break };
            (fc <= fr).then_some((xc, fc))
        } else {
            let mut xcc = affine(&c, 1.0 - gamma, &worst, gamma);
            let Some(fcc) = ev.eval(&mut xcc) else { break };
            (fcc < state.values[n]).then_some((xcc, fcc))
        };
        if let Some((x, f)) = accepted {
            state.vertices[n] = x;
            state.values[n] = f;
            continue;
        }

        let best = state.vertices[0].clone();
        for i in 1..=n {
            let mut v = affine(&best, 1.0 - sigma, &state.vertices[i], sigma);
            let Some(f) = ev.eval(&mut v) else { break 'outer };
            state.vertices[i] = v;
            state.values[i] = f;
        }
    }

    let (params, value) = ev.best.expect("at least the start point was evaluated");
    Ok(OptimResult {
        params: ParamVector(params),
        value,
        evals: ev.evals,
        iterations: state.iteration,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::l1_cost;
    use crate::image::Image;
    use crate::ops::{apply_brightness, OpKind};
    use proptest::prelude::*;

    #[test]
    fn quadratic_minimum() {
        let space = ParamSpace::uniform(1, -10.0, 10.0, 0.0).unwrap();
        let res = nelder_mead(|x| (x[0] - 2.0).powi(2), &space, &[0.0], &OptimizerConfig::default())
            .unwrap();
        assert!((res.params[0] - 2.0).abs() < 1e-4, "{:?}", res.params);
        assert!(res.evals <= 120);
    }

    #[test]
    fn rosenbrock() {
        let space = ParamSpace::uniform(2, -2.0, 2.0, 0.0).unwrap();
        let cfg = OptimizerConfig {
            max_evals: Some(500),
            ..Default::default()
        };
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let res = nelder_mead(f, &space, &[-1.0, 1.0], &cfg).unwrap();
        assert!(res.value < 1e-3, "{res:?}");
        assert!((res.params[0] - 1.0).abs() < 0.05 && (res.params[1] - 1.0).abs() < 0.1);
        assert!(res.evals <= 500);
    }

    #[test]
    fn recovers_brightness_parameter() {
        let img = Image::from_fn(16, 16, |x, y| {
            [0.1 + 0.04 * x as f64, 0.2 + 0.02 * y as f64, 0.3 + 0.01 * (x + y) as f64]
        });
        let target = apply_brightness(&img, 0.3).unwrap();
        let space = ParamSpace::for_kind(OpKind::Brightness);
        let res = nelder_mead(
            |p| l1_cost(&apply_brightness(&img, p[0]).unwrap(), &target).unwrap(),
            &space,
            &[0.0],
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!((res.params[0] - 0.3).abs() < 5e-3, "{:?}", res.params);
    }

    #[test]
    fn minimum_on_the_boundary_is_reached_by_projection() {
        let space = ParamSpace::uniform(2, -1.0, 1.0, 0.0).unwrap();
        let res = nelder_mead(
            |x| (x[0] - 3.0).powi(2) + (x[1] + 0.5).powi(2),
            &space,
            &[0.0, 0.0],
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!((res.params[0] - 1.0).abs() < 1e-3, "{res:?}");
        assert!((res.params[1] + 0.5).abs() < 1e-3, "{res:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let space = ParamSpace::uniform(1, -1.0, 1.0, 0.0).unwrap();
        let cfg = OptimizerConfig::default();
        assert!(nelder_mead(|x| x[0], &space, &[2.0], &cfg).is_err());
        assert!(nelder_mead(|x| x[0], &space, &[0.0, 0.0], &cfg).is_err());
        let bad = OptimizerConfig {
            expansion: 0.5,
            ..Default::default()
        };
        assert!(nelder_mead(|x| x[0], &space, &[0.0], &bad).is_err());
        let tiny = OptimizerConfig {
            max_evals: Some(2),
            ..Default::default()
        };
        assert!(nelder_mead(|x| x[0], &space, &[0.0], &tiny).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn contract_holds_on_random_quadratics(
            center in prop::collection::vec(-3.0f64..3.0, 3),
            start in prop::collection::vec(-1.0f64..1.0, 3),
            budget in 5usize..200,
        ) {
            let space = ParamSpace::uniform(3, -1.0, 1.0, 0.0).unwrap();
            let cfg = OptimizerConfig { max_evals: Some(budget), ..Default::default() };
            let mut seen = Vec::new();
            let f = |x: &[f64]| {
                seen.push(x.to_vec());
                x.iter().zip(&center).map(|(a, b)| (a - b).powi(2) + (3.0 * a).sin()).sum::<f64>()
            };
            let res = nelder_mead(f, &space, &start, &cfg).unwrap();
            let f_start: f64 = start.iter().zip(&center).map(|(a, b)| (a - b).powi(2) + (3.0 * a).sin()).sum();
            prop_assert!(res.value <= f_start);
            prop_assert!(res.evals <= budget);
            prop_assert!(space.contains(&res.params));
            prop_assert!(seen.iter().all(|x| space.contains(x)));
            prop_assert!(res.history.windows(2).all(|w| w[1] <= w[0]));

            let again = nelder_mead(
                |x: &[f64]| x.iter().zip(&center).map(|(a, b)| (a - b).powi(2) + (3.0 * a).sin()).sum::<f64>(),
                &space, &start, &cfg,
            ).unwrap();
            prop_assert_eq!(again.params, res.params);
        }
    }
}
