//! Command-line front end. Structured output goes to stdout as JSON lines;
//! logs go to stderr, with verbosity from `EDIT_PLANNER_LOG`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;
use serde::Serialize;
use serde_json::json;

use crate::batch::{image_files, load_manifest, plan_images, run_batch, BatchOptions};
use crate::cost::{l1_cost, CostRegistry};
use crate::dpg::verify_dpg_with_cost;
use crate::error::{Error, Result};
use crate::image::{load_image, load_mask, resize_bilinear, save_image, Image, Mask};
use crate::metrics::{image_variance, pair_metrics, MetricReport};
use crate::ops::parse_op_list;
use crate::plan_io::to_json_g17;
use crate::planner::{plan_local, replay_local, replay_trajectory, OrderMode, Plan, PlannerConfig};

pub const LOG_ENV: &str = "EDIT_PLANNER_LOG";

#[derive(Debug, Parser)]
#[command(name = "edit-planner", version, about = "Plan, replay and score parametric image edits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan an edit sequence turning --input into --target.
    Plan(PlanCmd),
    /// Replay a plan file on an image.
    Apply(ApplyCmd),
    /// Plan every pair listed in a JSON-lines manifest.
    Batch(BatchCmd),
    /// L1/SSIM between images or directories, or variance over a set.
    Metrics(MetricsCmd),
    /// Check the policy-gradient / final-cost gradient identity on a plan.
    VerifyDpg(VerifyCmd),
    /// Plan with region masks.
    LocalPlan(LocalPlanCmd),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderArg {
    Searched,
    Fixed,
}

/// Planner settings shared by every planning command. Unset flags fall back
/// to `--config`, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct PlannerArgs {
    /// TOML or JSON file with planner settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated operations, e.g. `brightness,contrast,tone`.
    #[arg(long)]
    pub ops: Option<String>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,
    #[arg(long)]
    pub egreedy_prob: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cost function name (`l1`, `l2`).
    #[arg(long)]
    pub cost: Option<String>,
    /// Allow an operation to be used more than once.
    #[arg(long)]
    pub allow_repeat: bool,
    /// Plan on a copy whose long side is at most this many pixels, or `off`.
    #[arg(long)]
    pub downscale: Option<String>,
    #[arg(long = "optimizer.max-evals")]
    pub opt_max_evals: Option<usize>,
    #[arg(long = "optimizer.x-tol")]
    pub opt_x_tol: Option<f64>,
    #[arg(long = "optimizer.f-tol")]
    pub opt_f_tol: Option<f64>,
    #[arg(long = "optimizer.initial-step")]
    pub opt_initial_step: Option<f64>,
}

impl PlannerArgs {
    pub fn resolve(&self) -> Result<(PlannerConfig, Option<usize>)> {
        let mut cfg = match &self.config {
            Some(path) => load_config_file(path)?,
            None => PlannerConfig::default(),
        };
        if let Some(ops) = &self.ops {
            cfg.op_set = parse_op_list(ops)?;
        }
        if let Some(v) = self.max_steps {
            cfg.max_steps = v;
        }
        if let Some(v) = self.beam {
            cfg.beam_size = v;
        }
        if let Some(v) = self.eps {
            cfg.epsilon = v;
        }
        if let Some(v) = self.order {
            cfg.order_mode = match v {
                OrderArg::Searched => OrderMode::Searched,
                OrderArg::Fixed => OrderMode::Fixed,
            };
        }
        if let Some(v) = self.egreedy_prob {
            cfg.egreedy_prob = v;
        }
        if let Some(v) = self.seed {
            cfg.rng_seed = v;
        }
        if let Some(v) = &self.cost {
            cfg.cost_name = v.clone();
        }
        if self.allow_repeat {
            cfg.no_repeat = false;
        }
        if let Some(v) = self.opt_max_evals {
            cfg.optimizer.max_evals = Some(v);
        }
        if let Some(v) = self.opt_x_tol {
            cfg.optimizer.x_tol = v;
        }
        if let Some(v) = self.opt_f_tol {
            cfg.optimizer.f_tol = v;
        }
        if let Some(v) = self.opt_initial_step {
            cfg.optimizer.initial_step = v;
        }
        let downscale = match self.downscale.as_deref() {
            None => cfg.downscale,
            Some("off") => None,
            Some(px) => Some(
                px.parse::<usize>()
                    .ok()
                    .filter(|v| *v > 0)
                    .ok_or_else(|| Error::Config(format!("--downscale expects pixels or `off`, got {px:?}")))?,
            ),
        };
        cfg.downscale = None;
        cfg.validate()?;
        Ok((cfg, downscale))
    }
}

/// Reads planner settings; `.json` files are JSON, anything else TOML.
pub fn load_config_file(path: &Path) -> Result<PlannerConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Args)]
pub struct PlanCmd {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write `step_{t:02}_{op}.png` for every step into this directory.
    #[arg(long)]
    pub save_intermediates: Option<PathBuf>,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

#[derive(Debug, Args)]
pub struct ApplyCmd {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Mask directory for local plans.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Report L1 against this image, resized to the output if needed.
    #[arg(long)]
    pub target: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchCmd {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

#[derive(Debug, Args)]
pub struct MetricsCmd {
    #[arg(long, requires = "b")]
    pub a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// Directory of images to compute cross-image variance over.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    pub variance: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyCmd {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Plan to verify; when absent the pair is planned first.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    pub fd_step: f64,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

#[derive(Debug, Args)]
pub struct LocalPlanCmd {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Directory of mask images, used in file-name order.
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub mask_threshold: f32,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub planner: PlannerArgs,
}

/// Failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: Error,
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        CliError { code: 1, error }
    }
}

fn emit<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", to_json_g17(value)?);
    Ok(())
}

fn write_plan(plan: &Plan, out: Option<&Path>) -> Result<()> {
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        plan.save(path)?;
    }
    Ok(())
}

fn summary_line(plan: &Plan, full_res_final_l1: f64, out: Option<&Path>) -> serde_json::Value {
    json!({
        "final_cost": plan.final_cost,
        "steps": plan.steps.len(),
        "initial_cost": plan.initial_cost,
        "terminated_by": plan.terminated_by,
        "final_l1_full_res": full_res_final_l1,
        "out": out.map(|p| p.display().to_string()),
    })
}

fn cmd_plan(cmd: &PlanCmd) -> Result<()> {
    let (cfg, downscale) = cmd.planner.resolve()?;
    let input = load_image(&cmd.input)?;
    let target = load_image(&cmd.target)?;
    let pair = plan_images(&input, &target, &cfg, &CostRegistry::default(), downscale)?;
    let plan = &pair.outcome.plan;
    write_plan(plan, cmd.out.as_deref())?;
    if let Some(dir) = &cmd.save_intermediates {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (t, (img, step)) in replay_trajectory(&input, plan, &[])?.iter().zip(&plan.steps).enumerate() {
            save_image(img, dir.join(format!("step_{:02}_{}.png", t + 1, step.op)))?;
        }
    }
    emit(&summary_line(plan, pair.full_res_final_l1, cmd.out.as_deref()))
}

fn load_masks(dir: &Path, threshold: f32) -> Result<(Vec<Mask>, Vec<String>)> {
    let files = image_files(dir)?;
    let masks = files.iter().map(|f| load_mask(f, threshold)).collect::<Result<Vec<_>>>()?;
    let names = files
        .iter()
        .map(|f| f.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    Ok((masks, names))
}

fn cmd_apply(cmd: &ApplyCmd) -> Result<()> {
    let input = load_image(&cmd.input)?;
    let plan = Plan::load(&cmd.plan)?;
    let masks = match &cmd.masks {
        Some(dir) => load_masks(dir, 0.5)?.0,
        None if plan.is_local() => {
            return Err(Error::PlanFormat("plan uses masks; pass --masks".into()));
        }
        None => Vec::new(),
    };
    let out = replay_local(&input, &plan, &masks)?;
    save_image(&out, &cmd.out)?;
    let l1 = match &cmd.target {
        Some(path) => {
            let mut target = load_image(path)?;
            if !target.same_size(&out) {
                target = resize_bilinear(&target, out.width(), out.height());
            }
            Some(l1_cost(&out, &target)?)
        }
        None => None,
    };
    emit(&json!({
        "out": cmd.out.display().to_string(),
        "steps": plan.steps.len(),
        "width": out.width(),
        "height": out.height(),
        "l1": l1,
    }))
}

fn cmd_batch(cmd: &BatchCmd) -> Result<()> {
    let (planner, downscale) = cmd.planner.resolve()?;
    let entries = load_manifest(&cmd.manifest)?;
    let summary = run_batch(
        &entries,
        &BatchOptions {
            planner,
            downscale,
            jobs: cmd.jobs,
            out_dir: cmd.out_dir.clone(),
        },
        &CostRegistry::default(),
    )?;
    emit(&summary)
}

fn collect_pairs(a: &Path, b: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    if a.is_dir() != b.is_dir() {
        return Err(Error::Precondition("--a and --b must both be files or both directories".into()));
    }
    if !a.is_dir() {
        let id = a.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(vec![(id, a.to_path_buf(), b.to_path_buf())]);
    }
    let left = image_files(a)?;
    let right = image_files(b)?;
    let names = |v: &[PathBuf]| -> Vec<String> {
        v.iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect()
    };
    if names(&left) != names(&right) {
        return Err(Error::Precondition(format!(
            "directories hold different file sets ({} vs {} images)",
            left.len(),
            right.len()
        )));
    }
    Ok(names(&left).into_iter().zip(left).zip(right).map(|((n, l), r)| (n, l, r)).collect())
}

fn cmd_metrics(cmd: &MetricsCmd) -> Result<()> {
    if let Some(dir) = &cmd.variance {
        let images = image_files(dir)?
            .iter()
            .map(load_image)
            .collect::<Result<Vec<Image>>>()?;
        let sigma = image_variance(&images)?;
        return emit(&json!({"images": images.len(), "variance": sigma, "variance_x100": sigma * 100.0}));
    }
    let (Some(a), Some(b)) = (&cmd.a, &cmd.b) else {
        return Err(Error::Config("metrics needs --a and --b, or --variance".into()));
    };
    let mut per_image = Vec::new();
    for (id, pa, pb) in collect_pairs(a, b)? {
        let m = pair_metrics(&id, &load_image(&pa)?, &load_image(&pb)?)?;
        emit(&m)?;
        per_image.push(m);
    }
    let report = MetricReport::from_pairs(per_image);
    emit(&json!({"aggregate": true, "count": report.per_image.len(), "l1": report.l1, "ssim": report.ssim}))
}

fn cmd_verify(cmd: &VerifyCmd) -> std::result::Result<i32, CliError> {
    let input = load_image(&cmd.input)?;
    let target = load_image(&cmd.target)?;
    let (cfg, downscale) = cmd.planner.resolve()?;
    let registry = CostRegistry::default();
    let plan = match &cmd.plan {
        Some(p) => Plan::load(p)?,
        None => plan_images(&input, &target, &cfg, &registry, downscale)?.outcome.plan,
    };
    let cost = registry.build(&plan.config.cost_name, &target)?;
    let report = verify_dpg_with_cost(&input, cost.as_ref(), &plan, cmd.fd_step).map_err(|e| match e {
        Error::Precondition(_) => CliError { code: 2, error: e },
        other => CliError::from(other),
    })?;
    emit(&json!({
        "max_relative_discrepancy": report.max_relative_discrepancy,
        "telescoping_error": report.telescoping_error,
        "steps": report.steps.len(),
        "fd_step": report.fd_step,
        "passed": report.passed,
    }))?;
    Ok(if report.passed { 0 } else { 1 })
}

fn cmd_local_plan(cmd: &LocalPlanCmd) -> Result<()> {
    let (cfg, _) = cmd.planner.resolve()?;
    let input = load_image(&cmd.input)?;
    let target = load_image(&cmd.target)?;
    let (masks, names) = load_masks(&cmd.masks, cmd.mask_threshold)?;
    if masks.is_empty() {
        return Err(Error::Precondition(format!("no mask images in {}", cmd.masks.display())));
    }
    let registry = CostRegistry::default();
    let cost = registry.build(&cfg.cost_name, &target)?;
    let mut outcome = plan_local(&input, cost.as_ref(), &masks, &cfg)?;
    outcome.plan.masks = Some(names);
    write_plan(&outcome.plan, cmd.out.as_deref())?;
    let l1 = l1_cost(&outcome.final_image, &target)?;
    emit(&summary_line(&outcome.plan, l1, cmd.out.as_deref()))
}

pub fn execute(cli: &Cli) -> std::result::Result<i32, CliError> {
    match &cli.command {
        Command::Plan(c) => cmd_plan(c)?,
        Command::Apply(c) => cmd_apply(c)?,
        Command::Batch(c) => cmd_batch(c)?,
        Command::Metrics(c) => cmd_metrics(c)?,
        Command::VerifyDpg(c) => return cmd_verify(c),
        Command::LocalPlan(c) => cmd_local_plan(c)?,
    }
    Ok(0)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().filter_or(LOG_ENV, "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(CliError { code, error: e }) => {
            error!("{e}");
            eprintln!("error: {e}");
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("planner.toml");
        fs::write(
            &path,
            "max_steps = 3\nbeam_size = 2\nop_set = [\"tone\", \"color\"]\n[optimizer]\nmax_evals = 50\n",
        )
        .unwrap();
        let args = PlannerArgs {
            config: Some(path),
            beam: Some(5),
            downscale: Some("128".into()),
            ..Default::default()
        };
        let (cfg, downscale) = args.resolve().unwrap();
        assert_eq!(cfg.max_steps, 3);
        assert_eq!(cfg.beam_size, 5);
        assert_eq!(cfg.op_set.len(), 2);
        assert_eq!(cfg.optimizer.max_evals, Some(50));
        assert_eq!(cfg.epsilon, 0.01);
        assert_eq!(downscale, Some(128));
    }

    #[test]
    fn bad_flags_are_rejected() {
        let bad_ops = PlannerArgs {
            ops: Some("brightness,blur".into()),
            ..Default::default()
        };
        assert!(bad_ops.resolve().is_err());
        let bad_scale = PlannerArgs {
            downscale: Some("big".into()),
            ..Default::default()
        };
        assert!(bad_scale.resolve().is_err());
        let off = PlannerArgs {
            downscale: Some("off".into()),
            ..Default::default()
        };
        assert_eq!(off.resolve().unwrap().1, None);
    }

    #[test]
    fn optimizer_namespace_flags_parse() {
        let cli = Cli::try_parse_from([
            "edit-planner", "plan", "--input", "a.png", "--target", "b.png",
            "--optimizer.max-evals", "77", "--order", "fixed",
        ])
        .unwrap();
        let Command::Plan(cmd) = cli.command else { panic!() };
        let (cfg, _) = cmd.planner.resolve().unwrap();
        assert_eq!(cfg.optimizer.max_evals, Some(77));
        assert_eq!(cfg.order_mode, OrderMode::Fixed);
    }
}
