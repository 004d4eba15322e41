//! Scalar objectives over candidate images.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::image::Image;

/// A deterministic, non-negative objective over candidate images.
///
/// Anything the cost depends on besides the candidate (a target image, a
/// reference input, a request) is captured at construction.
pub trait CostFn: Send + Sync {
    fn name(&self) -> &str;

    fn eval(&self, candidate: &Image) -> f64;

    /// Rejects candidates the cost cannot score, e.g. wrong dimensions.
    fn check(&self, _candidate: &Image) -> Result<()> {
        Ok(())
    }
}

/// Mean absolute difference over all `H x W x 3` samples.
pub fn l1_cost(candidate: &Image, target: &Image) -> Result<f64> {
    candidate.check_same_size(target)?;
    Ok(mean_abs_diff(candidate.data(), target.data()))
}

/// Mean squared difference over all samples.
pub fn l2_cost(candidate: &Image, target: &Image) -> Result<f64> {
    candidate.check_same_size(target)?;
    Ok(mean_sq_diff(candidate.data(), target.data()))
}

fn mean_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (*x as f64 - *y as f64).abs())
        .sum();
    sum / a.len() as f64
}

fn mean_sq_diff(a: &[f32], b: &[f32]) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum();
    sum / a.len() as f64
}

/// Per-step reward: the reduction in cost.
pub fn reward(prev_cost: f64, new_cost: f64) -> f64 {
    prev_cost - new_cost
}

#[derive(Debug, Clone)]
pub struct TargetL1Cost {
    target: Image,
}

impl TargetL1Cost {
    pub fn new(target: Image) -> Self {
        Self { target }
    }

    pub fn target(&self) -> &Image {
        &self.target
    }
}

impl CostFn for TargetL1Cost {
    fn name(&self) -> &str {
        "l1"
    }

    fn eval(&self, candidate: &Image) -> f64 {
        mean_abs_diff(candidate.data(), self.target.data())
    }

    fn check(&self, candidate: &Image) -> Result<()> {
        candidate.check_same_size(&self.target)
    }
}

#[derive(Debug, Clone)]
pub struct TargetL2Cost {
    target: Image,
}

impl TargetL2Cost {
    pub fn new(target: Image) -> Self {
        Self { target }
    }
}

impl CostFn for TargetL2Cost {
    fn name(&self) -> &str {
        "l2"
    }

    fn eval(&self, candidate: &Image) -> f64 {
        mean_sq_diff(candidate.data(), self.target.data())
    }

    fn check(&self, candidate: &Image) -> Result<()> {
        candidate.check_same_size(&self.target)
    }
}

pub type CostFactory = Arc<dyn Fn(&Image) -> Box<dyn CostFn> + Send + Sync>;

/// Name-to-constructor table for target-based costs. `"l1"` and `"l2"` are
/// always present; plug-ins register under their own names.
#[derive(Clone)]
pub struct CostRegistry {
    factories: BTreeMap<String, CostFactory>,
}

impl Default for CostRegistry {
    fn default() -> Self {
        let mut reg = Self {
            factories: BTreeMap::new(),
        };
        reg.register("l1", |t: &Image| Box::new(TargetL1Cost::new(t.clone())) as Box<dyn CostFn>);
        reg.register("l2", |t: &Image| Box::new(TargetL2Cost::new(t.clone())) as Box<dyn CostFn>);
        reg
    }
}

impl CostRegistry {
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&Image) -> Box<dyn CostFn> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, target: &Image) -> Result<Box<dyn CostFn>> {
        self.factories
            .get(name)
            .map(|f| f(target))
            .ok_or_else(|| Error::UnknownCost(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_image(rng: &mut impl Rng) -> Image {
        Image::from_fn(7, 5, |_, _| [rng.gen(), rng.gen(), rng.gen()])
    }

    #[test]
    fn closed_forms() {
        let zeros = Image::filled(4, 4, [0.0; 3]);
        let ones = Image::filled(4, 4, [1.0; 3]);
        assert_eq!(l1_cost(&zeros, &zeros).unwrap(), 0.0);
        assert_eq!(l1_cost(&zeros, &ones).unwrap(), 1.0);
        let a = Image::filled(3, 2, [0.5; 3]);
        let b = Image::filled(3, 2, [0.25; 3]);
        assert_eq!(l1_cost(&a, &b).unwrap(), 0.25);
        assert_eq!(l2_cost(&a, &b).unwrap(), 0.0625);
        assert!(l1_cost(&a, &zeros).is_err());
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let (a, b, c) = (random_image(&mut rng), random_image(&mut rng), random_image(&mut rng));
            let ab = l1_cost(&a, &b).unwrap();
            assert_eq!(ab, l1_cost(&b, &a).unwrap());
            assert_eq!(l1_cost(&a, &a).unwrap(), 0.0);
            assert!(ab <= l1_cost(&a, &c).unwrap() + l1_cost(&c, &b).unwrap() + 1e-12);
        }
    }

    #[test]
    fn reward_telescopes() {
        assert!((reward(0.5, 0.3) - 0.2).abs() < 1e-15);
        assert_eq!(reward(0.4, 0.4), 0.0);
        let costs = [0.31, 0.2, 0.17, 0.05, 0.049];
        let total: f64 = costs.windows(2).map(|w| reward(w[0], w[1])).sum();
        assert!((total - (costs[0] - costs[4])).abs() < 1e-12);
    }

    #[test]
    fn registry_builds_named_costs() {
        let target = Image::filled(2, 2, [0.2; 3]);
        let reg = CostRegistry::default();
        let l1 = reg.build("l1", &target).unwrap();
        assert_eq!(l1.eval(&target), 0.0);
        assert_eq!(l1.name(), "l1");
        assert!(reg.build("fid", &target).is_err());
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["l1", "l2"]);
    }
}
