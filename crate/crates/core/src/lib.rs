//! Recover interpretable edit programs from (input, target) image pairs.
//!
//! Six differentiable global operations (brightness, saturation, contrast,
//! sharpness, tone and color curves) are searched with a beam planner whose
//! per-step parameters are fitted by bounded Nelder-Mead. Plans serialize to
//! a stable JSON format and replay deterministically.
//!
//! ```no_run
//! use edit_planner::{cost::TargetL1Cost, image::load_image, planner::{plan, PlannerConfig}};
//!
//! let input = load_image("input.png")?;
//! let target = load_image("target.png")?;
//! let out = plan(&input, &TargetL1Cost::new(target), &PlannerConfig::default())?;
//! for step in &out.plan.steps {
//!     println!("{} {:?} -> {:.4}", step.op, step.params.0, step.cost_after);
//! }
//! # Ok::<(), edit_planner::Error>(())
//! ```
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod batch;
pub mod cli;
pub mod cost;
pub mod dpg;
pub mod error;
pub mod image;
pub mod metrics;
pub mod ops;
pub mod optimize;
pub mod plan_io;
pub mod planner;
pub mod synth;

pub use error::{Error, Result};
pub use image::{Image, Mask};
pub use ops::{OpKind, ParamSpace, ParamVector};
pub use planner::{Plan, PlanStep, PlannerConfig};
