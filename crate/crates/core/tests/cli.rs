use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use edit_planner::cost::{l1_cost, TargetL1Cost};
use edit_planner::image::{load_image, save_image};
use edit_planner::ops::{apply, OpKind};
use edit_planner::{synth, Image, ParamVector, Plan, PlannerConfig};
use serde_json::Value;
use tempfile::TempDir;

const GOLDEN: &str = include_str!("golden/brightness_plan.json");

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(self.stdout.lines().last().expect("a JSON line")).unwrap()
    }
}

fn cli<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_edit-planner")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn schema(name: &str) -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let value: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&value).unwrap()
}

fn assert_valid(schema_name: &str, doc: &Value) {
    let compiled = schema(schema_name);
    if let Err(errors) = compiled.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| e.to_string()).collect();
        panic!("{schema_name}: {msgs:?}");
    };
}

/// Input/target PNGs for a brightness edit that stays clear of clipping.
fn brightness_pair(dir: &Path) -> (PathBuf, PathBuf) {
    let input = synth::photo_like_in_range(32, 24, 11, 0.1, 0.6);
    let target = apply(OpKind::Brightness, &input, &[0.25]).unwrap();
    let (a, b) = (dir.join("input.png"), dir.join("target.png"));
    save_image(&input, &a).unwrap();
    save_image(&target, &b).unwrap();
    (a, b)
}

fn mixed_pair(dir: &Path, seed: u64) -> (PathBuf, PathBuf) {
    let (input, target, _) = synth::synthetic_pair(32, 24, seed, 2, &OpKind::ALL);
    let (a, b) = (dir.join(format!("in{seed}.png")), dir.join(format!("tg{seed}.png")));
    save_image(&input, &a).unwrap();
    save_image(&target, &b).unwrap();
    (a, b)
}

#[test]
fn planning_an_image_onto_itself_is_empty() {
    let dir = TempDir::new().unwrap();
    let (a, _) = brightness_pair(dir.path());
    let out = dir.path().join("plan.json");
    let run = cli(["plan", "--input", p(&a), "--target", p(&a), "--out", p(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let plan = Plan::load(&out).unwrap();
    assert!(plan.steps.is_empty());
    assert_eq!(plan.final_cost, 0.0);
    assert_eq!(run.json()["steps"], 0);
}

#[test]
fn loose_threshold_short_circuits() {
    let dir = TempDir::new().unwrap();
    let (a, b) = mixed_pair(dir.path(), 3);
    let out = dir.path().join("plan.json");
    let run = cli(["plan", "--input", p(&a), "--target", p(&b), "--eps", "0.5", "--out", p(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let plan = Plan::load(&out).unwrap();
    assert!(plan.initial_cost < 0.5 && plan.steps.is_empty());
    assert_eq!(plan.final_cost, plan.initial_cost);
}

#[test]
fn brightness_plan_matches_golden_bytes_and_schema() {
    let dir = TempDir::new().unwrap();
    let (a, b) = brightness_pair(dir.path());
    let out = dir.path().join("plan.json");
    let run = cli(["plan", "--input", p(&a), "--target", p(&b), "--ops", "brightness", "--out", p(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text, GOLDEN);
    assert_valid("plan.schema.json", &serde_json::from_str(&text).unwrap());
    let plan = Plan::from_json(&text).unwrap();
    assert_eq!(plan.steps.len(), 1);
    assert_eq!(plan.steps[0].op, OpKind::Brightness);
    assert!((plan.steps[0].params[0] - 0.25).abs() < 5e-3);
}

#[test]
fn intermediates_are_numbered_from_one() {
    let dir = TempDir::new().unwrap();
    let (a, b) = mixed_pair(dir.path(), 5);
    let steps_dir = dir.path().join("steps");
    let out = dir.path().join("plan.json");
    let run = cli([
        "plan", "--input", p(&a), "--target", p(&b), "--eps", "1e-4",
        "--out", p(&out), "--save-intermediates", p(&steps_dir),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let plan = Plan::load(&out).unwrap();
    assert!(!plan.steps.is_empty());
    let mut names: Vec<String> = fs::read_dir(&steps_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let expected: Vec<String> = plan
        .steps
        .iter()
        .enumerate()
        .map(|(t, s)| format!("step_{:02}_{}.png", t + 1, s.op))
        .collect();
    assert_eq!(names, expected);
}

#[test]
fn apply_replays_plans() {
    let dir = TempDir::new().unwrap();
    let (a, b) = mixed_pair(dir.path(), 7);
    let plan_path = dir.path().join("plan.json");
    assert_eq!(cli(["plan", "--input", p(&a), "--target", p(&b), "--out", p(&plan_path)]).code, 0);
    let plan = Plan::load(&plan_path).unwrap();

    let out = dir.path().join("out.png");
    let run = cli(["apply", "--input", p(&a), "--plan", p(&plan_path), "--out", p(&out), "--target", p(&b)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let reported = run.json()["l1"].as_f64().unwrap();
    assert!((reported - plan.final_cost).abs() < 1e-9, "{reported} vs {}", plan.final_cost);
    // The written PNG is 8-bit, so it matches only up to quantization.
    let exact = edit_planner::planner::replay(&load_image(&a).unwrap(), &plan).unwrap();
    let written = load_image(&out).unwrap();
    assert!(exact
        .data()
        .iter()
        .zip(written.data())
        .all(|(x, y)| (x - y).abs() <= 0.5 / 255.0 + 1e-6));
    assert!((l1_cost(&written, &load_image(&b).unwrap()).unwrap() - plan.final_cost).abs() < 1.0 / 255.0);
}

#[test]
fn apply_with_an_empty_plan_copies_the_input() {
    let dir = TempDir::new().unwrap();
    let (a, _) = mixed_pair(dir.path(), 8);
    let plan_path = dir.path().join("empty.json");
    assert_eq!(cli(["plan", "--input", p(&a), "--target", p(&a), "--out", p(&plan_path)]).code, 0);
    let out = dir.path().join("out.png");
    assert_eq!(cli(["apply", "--input", p(&a), "--plan", p(&plan_path), "--out", p(&out)]).code, 0);
    assert_eq!(load_image(&out).unwrap(), load_image(&a).unwrap());
}

#[test]
fn apply_at_another_resolution_reports_against_resized_target() {
    let dir = TempDir::new().unwrap();
    let (a, b) = brightness_pair(dir.path());
    let plan_path = dir.path().join("plan.json");
    assert_eq!(cli(["plan", "--input", p(&a), "--target", p(&b), "--ops", "brightness", "--out", p(&plan_path)]).code, 0);
    let big = edit_planner::image::resize_bilinear(&load_image(&a).unwrap(), 64, 48);
    let big_path = dir.path().join("big.png");
    save_image(&big, &big_path).unwrap();
    let out = dir.path().join("out.png");
    let run = cli(["apply", "--input", p(&big_path), "--plan", p(&plan_path), "--out", p(&out), "--target", p(&b)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let line = run.json();
    assert_eq!((line["width"].as_u64(), line["height"].as_u64()), (Some(64), Some(48)));
    assert!(line["l1"].as_f64().unwrap() < 0.01);
}

#[test]
fn malformed_plans_fail_with_exit_1() {
    let dir = TempDir::new().unwrap();
    let (a, _) = mixed_pair(dir.path(), 9);
    let plan_path = dir.path().join("bad.json");
    fs::write(&plan_path, "{\"version\": 1, \"steps\": 3}").unwrap();
    let run = cli(["apply", "--input", p(&a), "--plan", p(&plan_path), "--out", p(&dir.path().join("o.png"))]);
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("error"));
}

#[test]
fn batch_outputs_validate_and_ignore_job_count() {
    let dir = TempDir::new().unwrap();
    let mut lines = String::new();
    for seed in 0..4 {
        let (a, b) = mixed_pair(dir.path(), 20 + seed);
        lines.push_str(&format!(
            "{{\"id\":\"pair{seed}\",\"input\":\"{}\",\"target\":\"{}\",\"request\":\"make it pop\"}}\n",
            a.file_name().unwrap().to_str().unwrap(),
            b.file_name().unwrap().to_str().unwrap()
        ));
    }
    let manifest = dir.path().join("manifest.jsonl");
    fs::write(&manifest, &lines).unwrap();
    for line in lines.lines() {
        assert_valid("manifest-entry.schema.json", &serde_json::from_str(line).unwrap());
    }

    let run_with = |jobs: &str| {
        let out = dir.path().join(format!("out{jobs}"));
        let run = cli(["batch", "--manifest", p(&manifest), "--out-dir", p(&out), "--jobs", jobs]);
        assert_eq!(run.code, 0, "{}", run.stderr);
        out
    };
    let (one, many) = (run_with("1"), run_with("8"));
    for name in ["pair0.json", "pair1.json", "pair2.json", "pair3.json", "aggregate.json"] {
        let bytes = fs::read(one.join(name)).unwrap();
        assert_eq!(bytes, fs::read(many.join(name)).unwrap(), "{name}");
        let doc: Value = serde_json::from_slice(&bytes).unwrap();
        let schema = if name == "aggregate.json" { "aggregate.schema.json" } else { "plan.schema.json" };
        assert_valid(schema, &doc);
    }
    let agg: Value = serde_json::from_slice(&fs::read(one.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["succeeded"], 4);
}

#[test]
fn batch_fails_only_when_every_entry_fails() {
    let dir = TempDir::new().unwrap();
    let (a, b) = mixed_pair(dir.path(), 30);
    let manifest = dir.path().join("m.jsonl");
    fs::write(
        &manifest,
        format!(
            "{{\"id\":\"ok\",\"input\":\"{}\",\"target\":\"{}\"}}\n{{\"id\":\"gone\",\"input\":\"missing.png\",\"target\":\"missing.png\"}}\n",
            p(&a),
            p(&b)
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = cli(["batch", "--manifest", p(&manifest), "--out-dir", p(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.json()["failed"], serde_json::json!(["gone"]));

    fs::write(&manifest, "{\"id\":\"gone\",\"input\":\"missing.png\",\"target\":\"missing.png\"}\n").unwrap();
    assert_eq!(cli(["batch", "--manifest", p(&manifest), "--out-dir", p(&out)]).code, 1);
}

#[test]
fn metrics_over_directories() {
    let dir = TempDir::new().unwrap();
    let (da, db) = (dir.path().join("a"), dir.path().join("b"));
    fs::create_dir_all(&da).unwrap();
    fs::create_dir_all(&db).unwrap();
    for i in 0..3 {
        let img = synth::photo_like(16, 16, i);
        save_image(&img, da.join(format!("{i}.png"))).unwrap();
        save_image(&img, db.join(format!("{i}.png"))).unwrap();
    }
    let run = cli(["metrics", "--a", p(&da), "--b", p(&db)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let agg = run.json();
    assert_eq!(agg["count"], 3);
    assert_eq!(agg["l1"].as_f64(), Some(0.0));
    assert_eq!(agg["ssim"].as_f64(), Some(1.0));

    save_image(&synth::photo_like(16, 16, 9), db.join("extra.png")).unwrap();
    assert_eq!(cli(["metrics", "--a", p(&da), "--b", p(&db)]).code, 1);

    let dv = dir.path().join("v");
    fs::create_dir_all(&dv).unwrap();
    save_image(&Image::filled(8, 8, [0.0; 3]), dv.join("black.png")).unwrap();
    save_image(&Image::filled(8, 8, [1.0; 3]), dv.join("white.png")).unwrap();
    let run = cli(["metrics", "--variance", p(&dv)]);
    assert_eq!(run.json()["variance"].as_f64(), Some(0.25));
}

#[test]
fn verify_dpg_exit_codes() {
    let dir = TempDir::new().unwrap();
    let (a, b) = mixed_pair(dir.path(), 12);
    let run = cli(["verify-dpg", "--input", p(&a), "--target", p(&b), "--eps", "1e-4"]);
    assert_eq!(run.code, 0, "{}{}", run.stdout, run.stderr);
    assert_eq!(run.json()["passed"], true);

    let input = load_image(&a).unwrap();
    let target = load_image(&b).unwrap();
    let on_bound = Plan::from_actions(
        &input,
        &TargetL1Cost::new(target),
        &[(OpKind::Brightness, ParamVector::scalar(1.0))],
        PlannerConfig::default(),
    )
    .unwrap();
    let plan_path = dir.path().join("edge.json");
    on_bound.save(&plan_path).unwrap();
    let run = cli(["verify-dpg", "--input", p(&a), "--target", p(&b), "--plan", p(&plan_path)]);
    assert_eq!(run.code, 2, "{}", run.stderr);
    assert!(run.stderr.contains("bound"), "{}", run.stderr);
}

#[test]
fn local_plan_command() {
    let dir = TempDir::new().unwrap();
    let (a, b) = mixed_pair(dir.path(), 14);
    let empty = dir.path().join("no_masks");
    fs::create_dir_all(&empty).unwrap();
    let run = cli(["local-plan", "--input", p(&a), "--target", p(&b), "--masks", p(&empty)]);
    assert_eq!(run.code, 1);

    let full = dir.path().join("full");
    fs::create_dir_all(&full).unwrap();
    save_image(&Image::filled(32, 24, [1.0; 3]), full.join("all.png")).unwrap();
    let local_out = dir.path().join("local.json");
    let global_out = dir.path().join("global.json");
    let run = cli(["local-plan", "--input", p(&a), "--target", p(&b), "--masks", p(&full), "--out", p(&local_out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(cli(["plan", "--input", p(&a), "--target", p(&b), "--out", p(&global_out)]).code, 0);
    let local = Plan::load(&local_out).unwrap();
    let global = Plan::load(&global_out).unwrap();
    assert_eq!(local.steps.len(), global.steps.len());
    for (l, g) in local.steps.iter().zip(&global.steps) {
        assert_eq!((l.op, &l.params, l.cost_after), (g.op, &g.params, g.cost_after));
        assert_eq!(l.mask_index, Some(0));
    }
    assert_eq!(local.masks, Some(vec!["all.png".to_string()]));
    assert_valid("plan.schema.json", &serde_json::from_str(&fs::read_to_string(&local_out).unwrap()).unwrap());

    let wrong = dir.path().join("wrong");
    fs::create_dir_all(&wrong).unwrap();
    save_image(&Image::filled(10, 10, [1.0; 3]), wrong.join("m.png")).unwrap();
    assert_eq!(cli(["local-plan", "--input", p(&a), "--target", p(&b), "--masks", p(&wrong)]).code, 1);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let (a, b) = mixed_pair(dir.path(), 16);
    let config = dir.path().join("planner.toml");
    fs::write(&config, "op_set = [\"brightness\"]\nepsilon = 1e-5\nmax_steps = 2\n").unwrap();
    let out = dir.path().join("plan.json");
    let run = cli(["plan", "--input", p(&a), "--target", p(&b), "--config", p(&config), "--max-steps", "1", "--out", p(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let plan = Plan::load(&out).unwrap();
    assert_eq!(plan.config.op_set, vec![OpKind::Brightness]);
    assert_eq!(plan.config.epsilon, 1e-5);
    assert_eq!(plan.config.max_steps, 1);
    assert!(plan.steps.len() <= 1);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"param_spaces\":{\"spaces\":[]}}").unwrap();
    assert_eq!(cli(["plan", "--input", p(&a), "--target", p(&b), "--config", p(&bad)]).code, 1);
    assert_eq!(cli(["plan", "--input", p(&a), "--target", p(&b), "--beam", "0"]).code, 1);
    assert_eq!(cli(["plan", "--input", p(&a)]).code, 1);
}

#[test]
fn help_lists_every_subcommand() {
    let run = cli(["--help"]);
    assert_eq!(run.code, 0);
    for sub in ["plan", "apply", "batch", "metrics", "verify-dpg", "local-plan"] {
        assert!(run.stdout.contains(sub), "{sub}");
    }
}
