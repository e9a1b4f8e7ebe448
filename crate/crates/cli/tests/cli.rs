use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pro_core::io::{model_from_json, read_dataset};
use pro_core::rng::splitmix64;
use pro_core::FittedModel;
use serde_json::Value as Json;
use tempfile::TempDir;

fn pro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pro"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = pro(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["simulate", "--out", s(dir), "--bins", "3000"];
    args.extend_from_slice(extra);
    ok(&args);
    dir.join("data.csv")
}

fn json(path: &Path) -> Json {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_is_deterministic_and_round_trips() {
    let tmp = TempDir::new().unwrap();
    let a = simulate(&tmp.path().join("a"), &["--seed", "7", "--sweeps", "2"]);
    let b = simulate(&tmp.path().join("b"), &["--seed", "7", "--sweeps", "2"]);
    let c = simulate(&tmp.path().join("c"), &["--seed", "8", "--sweeps", "2"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let data = read_dataset(fs::File::open(&a).unwrap()).unwrap();
    assert_eq!(data.sweeps().len(), 2);
    assert!(data.sweeps().iter().all(|w| w.len() == 3000 && w.spike_count() > 0));

    let m = json(&tmp.path().join("a/manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["base_seed"], 7);
    assert_eq!(m["config"]["bins"], 3000);
    assert_eq!(m["created_unix"], 1_700_000_000u64);
    assert_eq!(m["outputs"][0], "data.csv");
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = s(tmp.path());
    for args in [
        vec!["simulate", "--out", out, "--flash-prob", "1.5"],
        vec!["simulate", "--out", out, "--bins", "lots"],
        vec!["simulate", "--out", out, "--c", "-1"],
        vec!["frobnicate"],
        vec!["fit", "--out", out],
        vec!["fit", "--out", out, "--data", "x.csv", "--terms", "PF", "--stepwise"],
        vec!["fit", "--out", out, "--data", "x.csv", "--terms", "XF"],
        vec!["study", "--out", out, "--study", "nonsense"],
        vec!["study", "--out", out, "--study", "significance", "--alpha", "2"],
        vec!["evaluate", "--out", out, "--model", "m.json", "--data", "d.csv", "--labels-from-data", "false"],
    ] {
        assert_eq!(code(&pro(&args)), 2, "{args:?}");
    }
}

#[test]
fn fit_writes_model_summary_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(&tmp.path().join("sim"), &["--seed", "3"]);
    let fit_dir = tmp.path().join("fit");
    let out = ok(&["fit", "--out", s(&fit_dir), "--data", s(&data)]);

    let model = json(&fit_dir.join("model.json"));
    let keys: Vec<&str> = model.as_object().unwrap().keys().map(String::as_str).collect();
    for k in [
        "terms",
        "coef",
        "se",
        "z",
        "p",
        "null_deviance",
        "residual_deviance",
        "null_df",
        "residual_df",
        "aic",
        "converged",
        "iterations",
    ] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert_eq!(model["terms"], serde_json::json!(["(Intercept)", "PF", "CF", "SF", "CF*SF"]));
    assert_eq!(model["converged"], true);
    let parsed: FittedModel = model_from_json(&fs::read_to_string(fit_dir.join("model.json")).unwrap()).unwrap();
    assert_eq!(parsed.coefficients.len(), 5);

    let summary = fs::read_to_string(fit_dir.join("summary.txt")).unwrap();
    let header = summary.lines().next().unwrap();
    for col in ["Estimate", "SE", "Z value", "P-value"] {
        assert!(header.contains(col));
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("Estimate"));

    let m = json(&fit_dir.join("manifest.json"));
    assert_eq!(m["inputs"][0]["key"], "data");
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(m["base_seed"].is_null());
}

#[test]
fn malformed_csv_reports_line_and_exits_3() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.csv");
    fs::write(&path, "sweep,bin,flash,spike\n0,0,1,0\n0,1,0,1\n0,2,0,0\n0,3,2,0\n").unwrap();
    let out = pro(&["fit", "--out", s(&tmp.path().join("o")), "--data", s(&path)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
    assert!(!tmp.path().join("o/model.json").exists());

    let missing = pro(&["fit", "--out", s(&tmp.path().join("o")), "--data", s(&tmp.path().join("nope.csv"))]);
    assert_eq!(code(&missing), 3);
}

#[test]
fn degenerate_fit_exits_4() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("silent.csv");
    let mut text = String::from("sweep,bin,flash,spike\n");
    for t in 0..200 {
        text.push_str(&format!("0,{t},{},0\n", u8::from(t % 7 == 0)));
    }
    fs::write(&path, text).unwrap();
    let out = pro(&["fit", "--out", s(&tmp.path().join("o")), "--data", s(&path)]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("sim.toml");
    fs::write(&cfg, "bins = 400\nseed = 11\nflash-prob = 0.3\n").unwrap();
    let dir = tmp.path().join("o");
    ok(&["simulate", "--out", s(&dir), "--config", s(&cfg), "--seed", "12"]);
    let m = json(&dir.join("manifest.json"));
    assert_eq!(m["config"]["bins"], 400);
    assert_eq!(m["config"]["seed"], 12);
    assert_eq!(m["config"]["flash-prob"], 0.3);
    assert_eq!(m["config"]["c"], 7.0);
    let data = read_dataset(fs::File::open(dir.join("data.csv")).unwrap()).unwrap();
    assert_eq!(data.total_bins(), 400);

    fs::write(&cfg, "bins = 400\nbogus = 1\n").unwrap();
    assert_eq!(code(&pro(&["simulate", "--out", s(&dir), "--config", s(&cfg)])), 2);
    fs::write(&cfg, "bins = [1]\n").unwrap();
    assert_eq!(code(&pro(&["simulate", "--out", s(&dir), "--config", s(&cfg)])), 2);
}

#[test]
fn predict_and_evaluate_out_of_sample() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("sim");
    ok(&["simulate", "--out", s(&data), "--sweeps", "2", "--bins", "5000", "--seed", "5"]);
    let data = data.join("data.csv");
    let fit_dir = tmp.path().join("fit");
    ok(&["fit", "--out", s(&fit_dir), "--data", s(&data), "--train-sweeps", "0"]);
    let model = fit_dir.join("model.json");

    let pred_dir = tmp.path().join("pred");
    ok(&["predict", "--out", s(&pred_dir), "--model", s(&model), "--data", s(&data), "--sweeps", "1"]);
    let text = fs::read_to_string(pred_dir.join("predictions.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sweep,bin,prob,valid"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5000);
    assert!(rows.iter().all(|r| r[0] == "1"));
    for r in &rows {
        match r[3] {
            "0" => assert_eq!(r[2], ""),
            "1" => assert!((0.0..=1.0).contains(&r[2].parse::<f64>().unwrap())),
            v => panic!("bad valid flag {v}"),
        }
    }
    assert_eq!(rows[0][3], "0");

    let eval_dir = tmp.path().join("eval");
    let out = ok(&["evaluate", "--out", s(&eval_dir), "--model", s(&model), "--data", s(&data), "--sweeps", "1"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("AUC"));
    let auc = json(&eval_dir.join("auc.json"));
    let value = auc["auc"].as_f64().unwrap();
    assert!(value > 0.95 && value <= 1.0, "out-of-sample AUC {value}");
    let roc = fs::read_to_string(eval_dir.join("roc.csv")).unwrap();
    assert_eq!(roc.lines().next(), Some("threshold,fpr,tpr"));
}

#[test]
fn evaluate_rejects_foreign_model_schema() {
    let tmp = TempDir::new().unwrap();
    let data = simulate(&tmp.path().join("sim"), &[]);
    let model = tmp.path().join("m.json");
    fs::write(&model, r#"{"terms": ["PF", "CF"], "coef": [1.0, 2.0]}"#).unwrap();
    let out = pro(&["evaluate", "--out", s(&tmp.path().join("o")), "--model", s(&model), "--data", s(&data)]);
    assert_eq!(code(&out), 3);
    fs::write(&model, "{not json").unwrap();
    let out = pro(&["evaluate", "--out", s(&tmp.path().join("o")), "--model", s(&model), "--data", s(&data)]);
    assert_eq!(code(&out), 3);
}

/// Sequential logistic generator whose log-odds depend on PF and CF only.
fn pf_cf_dataset(n: usize, seed: u64) -> String {
    let mut state = seed;
    let mut unit = || {
        state = splitmix64(state);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut text = String::from("sweep,bin,flash,spike\n");
    let (mut last_spike, mut last_flash): (Option<usize>, Option<usize>) = (None, None);
    let mut flashes_since_spike = 0u32;
    for t in 0..n {
        let flash = unit() < 0.2;
        if flash {
            last_flash = Some(t);
            flashes_since_spike += 1;
        }
        let p = match (last_spike, last_flash) {
            (Some(_), Some(f)) => {
                let pf = (1.0 + (t - f) as f64).ln();
                let cf = (1.0 + f64::from(flashes_since_spike)).ln();
                1.0 / (1.0 + (-(-1.0 - 1.5 * pf + 1.5 * cf)).exp())
            }
            _ => 0.1,
        };
        let spike = unit() < p;
        text.push_str(&format!("0,{t},{},{}\n", u8::from(flash), u8::from(spike)));
        if spike {
            last_spike = Some(t);
            // the spiking bin's own flash is counted in the next interval
            flashes_since_spike = u32::from(flash);
        }
    }
    text
}

#[test]
fn stepwise_logs_each_step_and_keeps_generating_terms() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("pfcf.csv");
    fs::write(&path, pf_cf_dataset(8000, 42)).unwrap();
    let dir = tmp.path().join("sw");
    let out = ok(&["fit", "--out", s(&dir), "--data", s(&path), "--stepwise", "--max-degree", "2"]);
    let log = fs::read_to_string(dir.join("stepwise.log")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert!(lines.len() >= 2, "{log}");
    assert!(lines[0].starts_with("start"));
    assert!(lines.iter().all(|l| l.contains("AIC=")));
    let aics: Vec<f64> = lines
        .iter()
        .map(|l| l.split("AIC=").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    assert!(aics.windows(2).all(|w| w[1] < w[0]), "AIC must fall at every step: {aics:?}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("AIC="));

    let model = json(&dir.join("model.json"));
    let terms: Vec<&str> = model["terms"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
    assert!(terms.contains(&"PF") && terms.contains(&"CF"), "selected {terms:?}");
    let m = json(&dir.join("manifest.json"));
    assert_eq!(m["config"]["stepwise"], true);
    assert!(m["outputs"].as_array().unwrap().iter().any(|o| o == "stepwise.log"));
}

#[test]
fn significance_study_shape() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("st");
    ok(&["study", "--out", s(&dir), "--study", "significance", "--reps", "4", "--bins", "3000", "--seed", "1"]);
    let agg = json(&dir.join("aggregate.json"));
    assert_eq!(agg["study"], "significance");
    assert_eq!(agg["n_replications"], 4);
    assert_eq!(agg["terms"], serde_json::json!(["(Intercept)", "PF", "CF", "SF", "CF*SF"]));
    assert_eq!(agg["significance_freq"].as_array().unwrap().len(), 5);
    assert!(agg["deviance_r2"]["mean"].is_f64());
    let reps = fs::read_to_string(dir.join("replications.csv")).unwrap();
    assert_eq!(reps.lines().count(), 5);
    assert!(reps.starts_with("index,seed,coef[(Intercept)]"));
}

#[test]
fn sweep_study_has_eleven_grid_rows() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("sw");
    ok(&["study", "--out", s(&dir), "--study", "sweep-r", "--reps", "2", "--bins", "3000"]);
    let grid = fs::read_to_string(dir.join("grid.csv")).unwrap();
    let rows: Vec<&str> = grid.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    let values: Vec<f64> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!((values[0] - 2.4).abs() < 1e-12 && (values[10] - 3.6).abs() < 1e-12);
    assert_eq!(json(&dir.join("trends.json"))["study"], "sweep-r");
}

#[test]
fn study_outputs_do_not_depend_on_threads() {
    let tmp = TempDir::new().unwrap();
    let run = |threads: &str| {
        let dir = tmp.path().join(format!("t{threads}"));
        ok(&["study", "--out", s(&dir), "--study", "auc", "--reps", "3", "--bins", "4000", "--threads", threads]);
        dir
    };
    let (a, b) = (run("1"), run("3"));
    for f in ["replications.csv", "aggregate.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn replay_reproduces_outputs_and_checks_digests() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    let data = simulate(&sim, &["--seed", "9"]);
    ok(&["replay", "--manifest", s(&sim.join("manifest.json")), "--out", s(&tmp.path().join("sim2"))]);
    assert_eq!(fs::read(&data).unwrap(), fs::read(tmp.path().join("sim2/data.csv")).unwrap());

    let fit_dir = tmp.path().join("fit");
    ok(&["fit", "--out", s(&fit_dir), "--data", s(&data), "--terms", "PF,CF"]);
    let again = tmp.path().join("fit2");
    ok(&["replay", "--manifest", s(&fit_dir.join("manifest.json")), "--out", s(&again)]);
    for f in ["model.json", "summary.txt", "manifest.json"] {
        assert_eq!(fs::read(fit_dir.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }

    let mut bytes = fs::read(&data).unwrap();
    bytes.extend_from_slice(b"1,0,0,0\n");
    fs::write(&data, bytes).unwrap();
    let out = pro(&["replay", "--manifest", s(&fit_dir.join("manifest.json")), "--out", s(&again)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sha256"));
}
