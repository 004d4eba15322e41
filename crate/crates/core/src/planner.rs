//! Forward-search operation planning.
//!
//! Each step expands every beam node by every admissible operation (and,
//! for local planning, every mask), optimizes that operation's parameters
//! from the identity point, and keeps the `beam_size` cheapest children.
//! The returned plan is backtracked from the cheapest node seen at any depth.

use std::collections::BTreeSet;
use std::sync::Arc;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostFn;
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::ops::{apply_unchecked, splice_unchecked, validate_params, OpKind, ParamSpaces, ParamVector};
use crate::optimize::{nelder_mead, OptimizerConfig};

pub const PLAN_FORMAT_VERSION: u32 = 1;

/// Children improving on the best cost by less than this end the search.
pub const MIN_IMPROVEMENT: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderMode {
    Searched,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminatedBy {
    Threshold,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub max_steps: usize,
    pub beam_size: usize,
    pub epsilon: f64,
    pub op_set: Vec<OpKind>,
    pub order_mode: OrderMode,
    pub egreedy_prob: f64,
    pub rng_seed: u64,
    pub no_repeat: bool,
    pub cost_name: String,
    pub optimizer: OptimizerConfig,
    /// Long side the planning copy was reduced to, when planning ran on a
    /// downscaled image.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub downscale: Option<usize>,
    #[serde(skip_serializing_if = "ParamSpaces::is_default")]
    pub param_spaces: ParamSpaces,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            max_steps: 6,
            beam_size: 8,
            epsilon: 0.01,
            op_set: OpKind::ALL.to_vec(),
            order_mode: OrderMode::Searched,
            egreedy_prob: 0.0,
            rng_seed: 0,
            no_repeat: true,
            cost_name: "l1".to_string(),
            optimizer: OptimizerConfig::default(),
            downscale: None,
            param_spaces: ParamSpaces::default(),
        }
    }
}

impl PlannerConfig {
    pub fn with_ops(ops: &[OpKind]) -> Self {
        Self {
            op_set: ops.to_vec(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if self.beam_size == 0 {
            return Err(Error::Config("beam_size must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.op_set.is_empty() {
            return Err(Error::Config("op_set is empty".into()));
        }
        let distinct: BTreeSet<_> = self.op_set.iter().collect();
        if distinct.len() != self.op_set.len() {
            return Err(Error::Config("op_set lists an operation twice".into()));
        }
        if !(0.0..=1.0).contains(&self.egreedy_prob) {
            return Err(Error::Config(format!(
                "egreedy_prob must be in [0, 1], got {}",
                self.egreedy_prob
            )));
        }
        if self.egreedy_prob > 0.0 && self.order_mode != OrderMode::Searched {
            return Err(Error::Config("egreedy_prob requires order_mode = searched".into()));
        }
        for kind in &self.op_set {
            self.optimizer.validate(kind.dim())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub op: OpKind,
    pub params: ParamVector,
    pub cost_after: f64,
    /// Index into the plan's mask list; `null` for a whole-image edit.
    pub mask_index: Option<usize>,
}

/// A backtracked edit sequence. Field order is the plan-file field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub version: u32,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub terminated_by: TerminatedBy,
    pub config: PlannerConfig,
    pub steps: Vec<PlanStep>,
    /// Mask references for local plans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<Vec<String>>,
}

impl Plan {
    /// Builds a plan by applying `actions` in order, recording the cost
    /// after every step. Used for synthetic ground truth.
    pub fn from_actions(
        input: &Image,
        cost: &dyn CostFn,
        actions: &[(OpKind, ParamVector)],
        config: PlannerConfig,
    ) -> Result<Plan> {
        cost.check(input)?;
        let initial_cost = cost.eval(input);
        let mut image = input.clone();
        let mut steps = Vec::with_capacity(actions.len());
        for (op, params) in actions {
            validate_params(*op, params, config.param_spaces.get(*op))?;
            image = apply_unchecked(*op, &image, params);
            steps.push(PlanStep {
                op: *op,
                params: params.clone(),
                cost_after: cost.eval(&image),
                mask_index: None,
            });
        }
        let final_cost = steps.last().map_or(initial_cost, |s| s.cost_after);
        Ok(Plan {
            version: PLAN_FORMAT_VERSION,
            initial_cost,
            final_cost,
            terminated_by: if final_cost < config.epsilon {
                TerminatedBy::Threshold
            } else {
                TerminatedBy::Budget
            },
            config,
            steps,
            masks: None,
        })
    }

    pub fn is_local(&self) -> bool {
        self.steps.iter().any(|s| s.mask_index.is_some())
    }

    /// Step costs are nonincreasing and the final cost does not exceed the
    /// initial one.
    pub fn is_monotone(&self) -> bool {
        let mut prev = self.initial_cost;
        for s in &self.steps {
            if s.cost_after > prev {
                return false;
            }
            prev = s.cost_after;
        }
        self.final_cost <= self.initial_cost
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub optimizer_runs: usize,
    pub objective_evals: usize,
    pub depth_reached: usize,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: Plan,
    pub final_image: Image,
    pub stats: SearchStats,
}

/// One search-tree node.
#[derive(Debug, Clone)]
pub struct PlanNode {
    pub image: Arc<Image>,
    pub cost: f64,
    pub parent: Option<usize>,
    pub action: Option<(OpKind, ParamVector, Option<usize>)>,
    pub used_ops: BTreeSet<(OpKind, Option<usize>)>,
    pub depth: usize,
}

struct Candidate {
    parent: usize,
    beam_slot: usize,
    op: OpKind,
    mask: Option<usize>,
}

struct Child {
    node: PlanNode,
    op: OpKind,
    mask_order: usize,
    beam_slot: usize,
    evals: usize,
}

struct Search<'a> {
    input: &'a Image,
    cost: &'a dyn CostFn,
    cfg: &'a PlannerConfig,
    masks: &'a [Mask],
    /// Mask choices per expansion; `None` is the whole image.
    mask_choices: Vec<Option<usize>>,
    nodes: Vec<PlanNode>,
    stats: SearchStats,
}

impl<'a> Search<'a> {
    fn new(
        input: &'a Image,
        cost: &'a dyn CostFn,
        cfg: &'a PlannerConfig,
        masks: &'a [Mask],
        mask_choices: Vec<Option<usize>>,
    ) -> Result<Self> {
        cfg.validate()?;
        cost.check(input)?;
        let root_cost = cost.eval(input);
        let again = cost.eval(input);
        if root_cost.to_bits() != again.to_bits() || !root_cost.is_finite() || root_cost < 0.0 {
            return Err(Error::Config(format!(
                "cost {:?} is not a deterministic non-negative function ({root_cost} vs {again})",
                cost.name()
            )));
        }
        Ok(Self {
            input,
            cost,
            cfg,
            masks,
            mask_choices,
            nodes: vec![PlanNode {
                image: Arc::new(input.clone()),
                cost: root_cost,
                parent: None,
                action: None,
                used_ops: BTreeSet::new(),
                depth: 0,
            }],
            stats: SearchStats::default(),
        })
    }

    fn edit(&self, base: &Image, op: OpKind, params: &[f64], mask: Option<usize>) -> Image {
        let edited = apply_unchecked(op, base, params);
        match mask {
            Some(i) => splice_unchecked(&edited, base, &self.masks[i]),
            None => edited,
        }
    }

    /// Optimizes one expansion starting from the identity parameters.
    fn expand(&self, cand: &Candidate) -> Result<Child> {
        let parent = &self.nodes[cand.parent];
        let space = self.cfg.param_spaces.get(cand.op);
        let base = parent.image.as_ref();
        let objective = |p: &[f64]| {
            if validate_params(cand.op, p, space).is_err() {
                return f64::INFINITY;
            }
            self.cost.eval(&self.edit(base, cand.op, p, cand.mask))
        };
        let res = nelder_mead(objective, space, &space.identity(), &self.cfg.optimizer)?;
        let mut image = self.edit(base, cand.op, &res.params, cand.mask);
        let mut cost = self.cost.eval(&image);
        let mut params = res.params;
        if cost > parent.cost {
            // identity edits reproduce the parent; never report a regression
            params = space.identity();
            image = base.clone();
            cost = parent.cost;
        }
        let mut used_ops = parent.used_ops.clone();
        used_ops.insert((cand.op, cand.mask));
        let mask_order = self
            .mask_choices
            .iter()
            .position(|m| *m == cand.mask)
            .unwrap_or(0);
        Ok(Child {
            node: PlanNode {
                image: Arc::new(image),
                cost,
                parent: Some(cand.parent),
                action: Some((cand.op, params, cand.mask)),
                used_ops,
                depth: parent.depth + 1,
            },
            op: cand.op,
            mask_order,
            beam_slot: cand.beam_slot,
            evals: res.evals,
        })
    }

    fn candidates(&self, beam: &[usize]) -> Vec<Candidate> {
        let mut out = Vec::new();
        for (slot, id) in beam.iter().enumerate() {
            let node = &self.nodes[*id];
            for op in &self.cfg.op_set {
                for mask in &self.mask_choices {
                    if self.cfg.no_repeat && node.used_ops.contains(&(*op, *mask)) {
                        continue;
                    }
                    out.push(Candidate {
                        parent: *id,
                        beam_slot: slot,
                        op: *op,
                        mask: *mask,
                    });
                }
            }
        }
        out
    }

    fn run(mut self, egreedy: Option<(f64, u64)>) -> Result<PlanOutcome> {
        let root_cost = self.nodes[0].cost;
        if root_cost < self.cfg.epsilon {
            return Ok(self.finish(0, TerminatedBy::Threshold));
        }
        let mut rng = egreedy.map(|(_, seed)| ChaCha8Rng::seed_from_u64(seed));
        let mut beam = vec![0usize];
        let mut best = 0usize;
        let mut terminated = TerminatedBy::Budget;

        for t in 1..=self.cfg.max_steps {
            let cands = self.candidates(&beam);
            if cands.is_empty() {
                break;
            }
            let mut children = cands
                .par_iter()
                .map(|c| self.expand(c))
                .collect::<Result<Vec<_>>>()?;
            self.stats.optimizer_runs += children.len();
            self.stats.objective_evals += children.iter().map(|c| c.evals).sum::<usize>();
            self.stats.depth_reached = t;

            children.sort_by(|a, b| {
                a.node
                    .cost
                    .total_cmp(&b.node.cost)
                    .then(a.op.index().cmp(&b.op.index()))
                    .then(a.mask_order.cmp(&b.mask_order))
                    .then(a.beam_slot.cmp(&b.beam_slot))
            });

            let keep = self.cfg.beam_size.min(children.len());
            let mut kept = Vec::with_capacity(keep);
            match (egreedy, rng.as_mut()) {
                (Some((prob, _)), Some(rng)) if prob > 0.0 => {
                    let mut remaining: Vec<Child> = children;
                    for _ in 0..keep {
                        let pick = if rng.gen_bool(prob) {
                            rng.gen_range(0..remaining.len())
                        } else {
                            0
                        };
                        kept.push(remaining.remove(pick));
                    }
                }
                _ => kept.extend(children.into_iter().take(keep)),
            }

            beam.clear();
            for child in kept {
                self.nodes.push(child.node);
                beam.push(self.nodes.len() - 1);
            }
            let step_best = *beam
                .iter()
                .min_by(|a, b| self.nodes[**a].cost.total_cmp(&self.nodes[**b].cost))
                .expect("beam is non-empty");
            let step_cost = self.nodes[step_best].cost;
            debug!("step {t}: best cost {step_cost:.6} over {} children", self.stats.optimizer_runs);

            if step_cost < self.cfg.epsilon {
                best = step_best;
                terminated = TerminatedBy::Threshold;
                break;
            }
            if step_cost > self.nodes[best].cost - MIN_IMPROVEMENT {
                break;
            }
            best = step_best;
        }
        Ok(self.finish(best, terminated))
    }

    /// Greedy chain through `op_set` in order; operations that do not
    /// improve the cost are skipped.
    fn run_fixed(mut self) -> Result<PlanOutcome> {
        let root_cost = self.nodes[0].cost;
        if root_cost < self.cfg.epsilon {
            return Ok(self.finish(0, TerminatedBy::Threshold));
        }
        let mut current = 0usize;
        let mut terminated = TerminatedBy::Budget;
        let mut depth = 0;
        for op in self.cfg.op_set.clone() {
            if depth == self.cfg.max_steps {
                break;
            }
            let child = self.expand(&Candidate {
                parent: current,
                beam_slot: 0,
                op,
                mask: None,
            })?;
            self.stats.optimizer_runs += 1;
            self.stats.objective_evals += child.evals;
            if child.node.cost > self.nodes[current].cost - MIN_IMPROVEMENT {
                continue;
            }
            depth += 1;
            self.stats.depth_reached = depth;
            self.nodes.push(child.node);
            current = self.nodes.len() - 1;
            if self.nodes[current].cost < self.cfg.epsilon {
                terminated = TerminatedBy::Threshold;
                break;
            }
        }
        Ok(self.finish(current, terminated))
    }

    fn finish(self, best: usize, terminated_by: TerminatedBy) -> PlanOutcome {
        let mut steps = Vec::new();
        let mut id = best;
        while let Some(parent) = self.nodes[id].parent {
            let node = &self.nodes[id];
            let (op, params, mask) = node.action.clone().expect("non-root nodes carry an action");
            steps.push(PlanStep {
                op,
                params,
                cost_after: node.cost,
                mask_index: mask,
            });
            id = parent;
        }
        steps.reverse();
        let initial_cost = self.nodes[0].cost;
        let final_cost = steps.last().map_or(initial_cost, |s| s.cost_after);
        let plan = Plan {
            version: PLAN_FORMAT_VERSION,
            initial_cost,
            final_cost,
            terminated_by,
            config: self.cfg.clone(),
            steps,
            masks: None,
        };
        debug_assert!(plan.is_monotone());
        let final_image = if best == 0 {
            self.input.clone()
        } else {
            self.nodes[best].image.as_ref().clone()
        };
        PlanOutcome {
            plan,
            final_image,
            stats: self.stats,
        }
    }
}

/// Beam-search planning over `cfg.op_set` in searched order. Any
/// `egreedy_prob` in the config is ignored; see [`plan_egreedy`].
pub fn plan(input: &Image, cost: &dyn CostFn, cfg: &PlannerConfig) -> Result<PlanOutcome> {
    Search::new(input, cost, cfg, &[], vec![None])?.run(None)
}

/// Applies the operations in `cfg.op_set` order, one optimized step each.
pub fn plan_fixed_order(input: &Image, cost: &dyn CostFn, cfg: &PlannerConfig) -> Result<PlanOutcome> {
    Search::new(input, cost, cfg, &[], vec![None])?.run_fixed()
}

/// Beam search where each beam slot takes a uniformly random child with
/// probability `cfg.egreedy_prob`, drawn from a generator seeded with
/// `cfg.rng_seed`.
pub fn plan_egreedy(input: &Image, cost: &dyn CostFn, cfg: &PlannerConfig) -> Result<PlanOutcome> {
    Search::new(input, cost, cfg, &[], vec![None])?.run(Some((cfg.egreedy_prob, cfg.rng_seed)))
}

/// Dispatches on `order_mode` and `egreedy_prob`.
pub fn plan_with_config(input: &Image, cost: &dyn CostFn, cfg: &PlannerConfig) -> Result<PlanOutcome> {
    match cfg.order_mode {
        OrderMode::Fixed => plan_fixed_order(input, cost, cfg),
        OrderMode::Searched if cfg.egreedy_prob > 0.0 => plan_egreedy(input, cost, cfg),
        OrderMode::Searched => plan(input, cost, cfg),
    }
}

/// Planning where each expansion also chooses a mask. A whole-image choice
/// is added unless one of `masks` already covers the full frame; steps using
/// it carry `mask_index = None`. The no-repeat rule applies per
/// `(operation, mask)` pair.
pub fn plan_local(
    input: &Image,
    cost: &dyn CostFn,
    masks: &[Mask],
    cfg: &PlannerConfig,
) -> Result<PlanOutcome> {
    if masks.is_empty() {
        return Err(Error::Precondition("local planning needs at least one mask".into()));
    }
    for m in masks {
        m.check_matches(input)?;
    }
    let mut choices: Vec<Option<usize>> = (0..masks.len()).map(Some).collect();
    if !masks.iter().any(Mask::is_full) {
        choices.push(None);
    }
    let mut out = Search::new(input, cost, cfg, masks, choices)?.run(None)?;
    out.plan.masks = Some((0..masks.len()).map(|i| format!("mask_{i}")).collect());
    Ok(out)
}

/// Re-executes a whole-image plan.
pub fn replay(input: &Image, plan: &Plan) -> Result<Image> {
    replay_local(input, plan, &[])
}

/// Re-executes a plan whose steps may reference `masks`.
pub fn replay_local(input: &Image, plan: &Plan, masks: &[Mask]) -> Result<Image> {
    Ok(replay_trajectory(input, plan, masks)?
        .pop()
        .unwrap_or_else(|| input.clone()))
}

/// Every intermediate image, excluding the input.
pub fn replay_trajectory(input: &Image, plan: &Plan, masks: &[Mask]) -> Result<Vec<Image>> {
    let mut image = input.clone();
    let mut out = Vec::with_capacity(plan.steps.len());
    for (t, step) in plan.steps.iter().enumerate() {
        validate_params(step.op, &step.params, plan.config.param_spaces.get(step.op))?;
        let edited = apply_unchecked(step.op, &image, &step.params);
        image = match step.mask_index {
            None => edited,
            Some(i) => {
                let mask = masks.get(i).ok_or_else(|| {
                    Error::PlanFormat(format!("step {t} references mask {i}, {} supplied", masks.len()))
                })?;
                mask.check_matches(&image)?;
                splice_unchecked(&edited, &image, mask)
            }
        };
        out.push(image.clone());
    }
    Ok(out)
}
