//! Manifest-driven batch planning.
//!
//! A manifest is JSON lines, one `{"id", "input", "target", "request"}`
//! object per line. Relative paths resolve against the manifest's
//! directory. The request string is carried through untouched for
//! downstream consumers.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{l1_cost, CostRegistry};
use crate::error::{Error, Result};
use crate::image::{fit_long_side, load_image, resize_bilinear, Image};
use crate::plan_io::to_json_g17;
use crate::planner::{plan_with_config, replay, PlanOutcome, PlannerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub input: PathBuf,
    pub target: PathBuf,
    #[serde(default)]
    pub request: String,
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    let mut ids = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut entry: ManifestEntry = serde_json::from_str(line).map_err(|e| Error::Manifest {
            line: n + 1,
            message: e.to_string(),
        })?;
        if !ids.insert(entry.id.clone()) {
            return Err(Error::Manifest {
                line: n + 1,
                message: format!("duplicate id {:?}", entry.id),
            });
        }
        if entry.id.is_empty() || entry.id.contains(['/', '\\']) {
            return Err(Error::Manifest {
                line: n + 1,
                message: format!("id {:?} is not usable as a file name", entry.id),
            });
        }
        for p in [&mut entry.input, &mut entry.target] {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn write_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for e in entries {
        text.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pairs files with the same stem in two directories, the layout of
/// source/target dataset dumps (`<root>/input/<name>.png`,
/// `<root>/target/<name>.png`). Requests are left empty.
pub fn manifest_from_dirs(input_dir: &Path, target_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let targets: BTreeMap<String, PathBuf> = image_files(target_dir)?
        .into_iter()
        .filter_map(|p| Some((p.file_stem()?.to_string_lossy().into_owned(), p)))
        .collect();
    let mut entries = Vec::new();
    for input in image_files(input_dir)? {
        let Some(stem) = input.file_stem().map(|s| s.to_string_lossy().into_owned()) else {
            continue;
        };
        match targets.get(&stem) {
            Some(target) => entries.push(ManifestEntry {
                id: stem,
                input,
                target: target.clone(),
                request: String::new(),
            }),
            None => warn!("{}: no target with the same name", input.display()),
        }
    }
    Ok(entries)
}

/// PNG/JPEG files in `dir`, sorted by name.
pub fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Result of planning one pair, with full-resolution numbers when planning
/// ran on a reduced copy.
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub outcome: PlanOutcome,
    pub full_res_image: Image,
    pub full_res_initial_l1: f64,
    pub full_res_final_l1: f64,
}

/// Plans `input -> target`, optionally on copies whose long side is reduced
/// to `downscale` pixels; the plan is then replayed at full resolution.
pub fn plan_images(
    input: &Image,
    target: &Image,
    cfg: &PlannerConfig,
    registry: &CostRegistry,
    downscale: Option<usize>,
) -> Result<PairOutcome> {
    input.check_same_size(target)?;
    let (w, h) = match downscale {
        Some(px) => fit_long_side(input.width(), input.height(), px),
        None => (input.width(), input.height()),
    };
    let reduced = (w, h) != (input.width(), input.height());
    let mut cfg = cfg.clone();
    cfg.downscale = if reduced { downscale } else { None };
    let outcome = if reduced {
        let small_in = resize_bilinear(input, w, h);
        let small_tg = resize_bilinear(target, w, h);
        let cost = registry.build(&cfg.cost_name, &small_tg)?;
        plan_with_config(&small_in, cost.as_ref(), &cfg)?
    } else {
        let cost = registry.build(&cfg.cost_name, target)?;
        plan_with_config(input, cost.as_ref(), &cfg)?
    };
    let full_res_image = if reduced {
        replay(input, &outcome.plan)?
    } else {
        outcome.final_image.clone()
    };
    Ok(PairOutcome {
        full_res_initial_l1: l1_cost(input, target)?,
        full_res_final_l1: l1_cost(&full_res_image, target)?,
        full_res_image,
        outcome,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryResult {
    pub id: String,
    pub steps: usize,
    pub initial_l1: f64,
    pub final_l1: f64,
    pub final_cost: f64,
    pub ops: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub entries: usize,
    pub succeeded: usize,
    pub failed: Vec<String>,
    pub mean_initial_l1: f64,
    pub mean_final_l1: f64,
    pub median_final_l1: f64,
    pub below_epsilon: usize,
    pub step_histogram: BTreeMap<usize, usize>,
    pub op_usage: BTreeMap<String, usize>,
}

impl BatchSummary {
    pub fn from_results(results: &[EntryResult], failed: Vec<String>, epsilon: f64) -> Self {
        let n = results.len();
        let mean = |f: fn(&EntryResult) -> f64| {
            if n == 0 {
                0.0
            } else {
                results.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let mut finals: Vec<f64> = results.iter().map(|r| r.final_l1).collect();
        finals.sort_by(f64::total_cmp);
        let median_final_l1 = match n {
            0 => 0.0,
            _ if n % 2 == 1 => finals[n / 2],
            _ => 0.5 * (finals[n / 2 - 1] + finals[n / 2]),
        };
        let mut step_histogram = BTreeMap::new();
        let mut op_usage = BTreeMap::new();
        for r in results {
            *step_histogram.entry(r.steps).or_insert(0) += 1;
            for op in &r.ops {
                *op_usage.entry(op.clone()).or_insert(0) += 1;
            }
        }
        Self {
            entries: n + failed.len(),
            succeeded: n,
            failed,
            mean_initial_l1: mean(|r| r.initial_l1),
            mean_final_l1: mean(|r| r.final_l1),
            median_final_l1,
            below_epsilon: results.iter().filter(|r| r.final_cost < epsilon).count(),
            step_histogram,
            op_usage,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub planner: PlannerConfig,
    pub downscale: Option<usize>,
    pub jobs: usize,
    pub out_dir: PathBuf,
}

fn run_entry(entry: &ManifestEntry, opts: &BatchOptions, registry: &CostRegistry) -> Result<EntryResult> {
    let input = load_image(&entry.input)?;
    let target = load_image(&entry.target)?;
    let pair = plan_images(&input, &target, &opts.planner, registry, opts.downscale)?;
    let plan = &pair.outcome.plan;
    plan.save(opts.out_dir.join(format!("{}.json", entry.id)))?;
    Ok(EntryResult {
        id: entry.id.clone(),
        steps: plan.steps.len(),
        initial_l1: pair.full_res_initial_l1,
        final_l1: pair.full_res_final_l1,
        final_cost: plan.final_cost,
        ops: plan.steps.iter().map(|s| s.op.name().to_string()).collect(),
    })
}

/// Plans every entry on a pool of `opts.jobs` workers, writing
/// `<out_dir>/<id>.json` per entry and `<out_dir>/aggregate.json`. Entry
/// failures are logged and skipped; the call fails only if every entry does.
pub fn run_batch(entries: &[ManifestEntry], opts: &BatchOptions, registry: &CostRegistry) -> Result<BatchSummary> {
    opts.planner.validate()?;
    fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<(String, Result<EntryResult>)> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| (e.id.clone(), run_entry(e, opts, registry)))
            .collect()
    });

    let mut ok = Vec::new();
    let mut failed = Vec::new();
    let mut last_err = None;
    for (id, res) in results {
        match res {
            Ok(r) => {
                info!("{id}: {} step(s), final L1 {:.5}", r.steps, r.final_l1);
                ok.push(r);
            }
            Err(e) => {
                warn!("{id}: {e}");
                failed.push(id);
                last_err = Some(e);
            }
        }
    }
    if ok.is_empty() {
        if let Some(e) = last_err {
            return Err(e);
        }
    }
    let summary = BatchSummary::from_results(&ok, failed, opts.planner.epsilon);
    let path = opts.out_dir.join("aggregate.json");
    let mut text = to_json_g17(&summary)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}
