//! Command implementations. Each resolves its options through [`Settings`],
//! writes its outputs into the output directory and finishes with a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use pro_core::eval::{evaluate_model, model_terms, predict_bins};
use pro_core::glm::{fit_logistic, stepwise_aic, Separation};
use pro_core::io::{
    model_from_json, model_to_json, read_dataset, roc_summary_json, study_aggregate_json, sweep_trends_json,
    write_dataset, write_predictions, write_replications_csv, write_roc_csv, write_sweep_grid_csv,
};
use pro_core::lif::simulate_sweep;
use pro_core::pointproc::{build_design, Dataset, Term};
use pro_core::rng::mix_seed;
use pro_core::studies::{
    default_multipliers, run_auc_study, run_parameter_sweep, run_significance_study, StudyConfig, SweepParam,
};
use pro_core::{FittedModel, LifParams};

use crate::manifest::{now_unix, sha256_hex, InputDigest, RunManifest, MANIFEST_FILE};
use crate::settings::{Settings, Value};
use crate::{
    CliError, Command, EvaluateArgs, FitArgs, LifFlags, OutputArgs, PredictArgs, ReplayArgs, SimulateArgs, StudyArgs,
};

pub const DATA_FILE: &str = "data.csv";
pub const MODEL_FILE: &str = "model.json";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const STEPWISE_LOG: &str = "stepwise.log";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const ROC_FILE: &str = "roc.csv";
pub const AUC_FILE: &str = "auc.json";
pub const REPLICATIONS_FILE: &str = "replications.csv";
pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const GRID_FILE: &str = "grid.csv";
pub const TRENDS_FILE: &str = "trends.json";

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => {
            let s = load_settings(&a.output)?;
            simulate(&a, s, &a.output.out)
        }
        Command::Fit(a) => {
            let s = load_settings(&a.output)?;
            fit(&a, s, &a.output.out)
        }
        Command::Predict(a) => {
            let s = load_settings(&a.output)?;
            predict(&a, s, &a.output.out)
        }
        Command::Evaluate(a) => {
            let s = load_settings(&a.output)?;
            evaluate(&a, s, &a.output.out)
        }
        Command::Study(a) => {
            let s = load_settings(&a.output)?;
            study(&a, s, &a.output.out)
        }
        Command::Replay(a) => replay(&a),
    }
}

fn load_settings(output: &OutputArgs) -> Result<Settings, CliError> {
    output.config.as_deref().map_or_else(|| Ok(Settings::empty()), Settings::from_file)
}

/// Collects output files and writes them, then the manifest, into one directory.
struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> pro_core::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| CliError::core(format!("writing {name}"), e))?;
        self.write(name, &buf)
    }

    fn finish(
        self,
        command: &str,
        settings: Settings,
        base_seed: Option<u64>,
        inputs: Vec<InputDigest>,
    ) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: settings.finish()?,
            base_seed,
            inputs,
            outputs: self.files.clone(),
            created_unix: now_unix(),
        };
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, manifest.to_json()).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }
}

/// Reads an input file and records its digest.
fn read_input(key: &str, path: &Path, inputs: &mut Vec<InputDigest>) -> Result<Vec<u8>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read --{key} {}: {e}", path.display())))?;
    inputs.push(InputDigest { key: key.to_string(), path: path.display().to_string(), sha256: sha256_hex(&bytes) });
    Ok(bytes)
}

fn load_dataset(path: &Path, inputs: &mut Vec<InputDigest>) -> Result<Dataset, CliError> {
    let bytes = read_input("data", path, inputs)?;
    read_dataset(bytes.as_slice()).map_err(|e| CliError::core(path.display().to_string(), e))
}

fn load_model(path: &Path, inputs: &mut Vec<InputDigest>) -> Result<FittedModel, CliError> {
    let bytes = read_input("model", path, inputs)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Input(format!("model {} is not valid UTF-8", path.display())))?;
    model_from_json(&text).map_err(|e| CliError::core(path.display().to_string(), e))
}

/// Sweep selector: `all`, or comma-separated ids and inclusive ranges (`0-9,12`).
#[derive(Debug, Clone, PartialEq)]
pub enum SweepSelector {
    All,
    Ranges(Vec<(u64, u64)>),
}

impl SweepSelector {
    pub fn parse(key: &str, s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(SweepSelector::All);
        }
        let bad =
            || CliError::Usage(format!("--{key}: invalid sweep selector `{s}` (expected `all` or e.g. `0-9,12`)"));
        let id = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        let mut ranges = Vec::new();
        for part in s.split(',') {
            let range = match part.split_once('-') {
                Some((lo, hi)) => (id(lo)?, id(hi)?),
                None => {
                    let v = id(part)?;
                    (v, v)
                }
            };
            if range.0 > range.1 {
                return Err(bad());
            }
            ranges.push(range);
        }
        Ok(SweepSelector::Ranges(ranges))
    }

    pub fn contains(&self, id: u64) -> bool {
        match self {
            SweepSelector::All => true,
            SweepSelector::Ranges(r) => r.iter().any(|&(lo, hi)| (lo..=hi).contains(&id)),
        }
    }

    fn apply(&self, key: &str, data: &Dataset) -> Result<Dataset, CliError> {
        let picked = data.select(|id| self.contains(id));
        if picked.is_empty() && !data.is_empty() {
            return Err(CliError::Usage(format!("--{key} selects none of the dataset's sweeps")));
        }
        Ok(picked)
    }
}

fn lif_params(s: &mut Settings, flags: &LifFlags) -> Result<(LifParams, f64), CliError> {
    let base = LifParams::default();
    let c = s.f64("c", flags.c, base.c)?;
    let r = s.f64("r", flags.r, base.r)?;
    let substeps = s.usize("substeps", flags.substeps, base.substeps_per_bin)?;
    let flash_prob = s.f64("flash-prob", flags.flash_prob, 0.14)?;
    if !(0.0..=1.0).contains(&flash_prob) {
        return Err(CliError::Usage(format!("--flash-prob must lie in [0, 1], got {flash_prob}")));
    }
    let params = base.with_c(c).with_r(r).with_substeps(substeps);
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((params, flash_prob))
}

pub fn simulate(a: &SimulateArgs, mut s: Settings, out: &Path) -> Result<(), CliError> {
    let bins = s.usize("bins", a.bins, 5000)?;
    let n_sweeps = s.usize("sweeps", a.sweeps, 1)?;
    let seed = s.u64("seed", a.seed, 1)?;
    let (params, flash_prob) = lif_params(&mut s, &a.lif)?;
    if bins == 0 || n_sweeps == 0 {
        return Err(CliError::Usage("--bins and --sweeps must be at least 1".into()));
    }

    let sweeps = (0..n_sweeps as u64)
        .map(|i| simulate_sweep(&params, bins, flash_prob, mix_seed(seed, i), i))
        .collect::<pro_core::Result<Vec<_>>>()
        .map_err(|e| CliError::core("simulation", e))?;
    let data = Dataset::new(sweeps).map_err(|e| CliError::core("simulation", e))?;
    let spikes: usize = data.sweeps().iter().map(|w| w.spike_count()).sum();
    let flashes: usize = data.sweeps().iter().map(|w| w.flash_count()).sum();

    let mut dir = OutputDir::create(out)?;
    dir.write_with(DATA_FILE, |buf| write_dataset(&data, buf))?;
    println!("simulated {n_sweeps} sweep(s) x {bins} bins: {flashes} flashes, {spikes} spikes");
    dir.finish("simulate", s, Some(seed), Vec::new())
}

pub fn fit(a: &FitArgs, mut s: Settings, out: &Path) -> Result<(), CliError> {
    let data_path = s.required_path("data", a.data.clone())?;
    let terms_text = s.opt_string("terms", a.terms.clone())?;
    let stepwise = s.bool("stepwise", a.stepwise, false)?;
    let max_degree = s.usize("max-degree", a.max_degree.map(usize::from), 3)?;
    let selector = s.string("train-sweeps", a.train_sweeps.clone(), "all")?;
    if stepwise && terms_text.is_some() {
        return Err(CliError::Usage("--terms and --stepwise are mutually exclusive".into()));
    }
    let max_degree = u8::try_from(max_degree)
        .ok()
        .filter(|&d| d >= 1)
        .ok_or_else(|| CliError::Usage(format!("--max-degree must be between 1 and 255, got {max_degree}")))?;
    let terms = match &terms_text {
        Some(t) if !stepwise => Term::parse_list(t).map_err(|e| CliError::Usage(format!("--terms: {e}")))?,
        _ => Term::pro_model(),
    };
    let selector = SweepSelector::parse("train-sweeps", &selector)?;

    let mut inputs = Vec::new();
    let data = selector.apply("train-sweeps", &load_dataset(&data_path, &mut inputs)?)?;

    let (model, log) = if stepwise {
        let res = stepwise_aic::<f64>(&data, max_degree).map_err(|e| CliError::core("stepwise search", e))?;
        let mut log = res.log_lines().join("\n");
        log.push('\n');
        (res.model, Some(log))
    } else {
        let design = build_design::<f64>(&data, &terms).map_err(|e| CliError::core("design", e))?;
        (fit_logistic(&design).map_err(|e| CliError::core("fit", e))?, None)
    };

    if !model.converged {
        let why = if model.separation == Separation::Complete {
            "complete separation".to_string()
        } else {
            format!("no convergence after {} iterations", model.iterations)
        };
        return Err(CliError::Degenerate(format!("fit failed: {why}; {}", model.warnings.join("; "))));
    }
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }

    let summary = model.summary_table();
    let mut dir = OutputDir::create(out)?;
    dir.write(MODEL_FILE, model_to_json(&model).as_bytes())?;
    dir.write(SUMMARY_FILE, summary.as_bytes())?;
    if let Some(log) = &log {
        dir.write(STEPWISE_LOG, log.as_bytes())?;
        print!("{log}");
    }
    print!("{summary}");
    dir.finish("fit", s, None, inputs)
}

pub fn predict(a: &PredictArgs, mut s: Settings, out: &Path) -> Result<(), CliError> {
    let model_path = s.required_path("model", a.model.clone())?;
    let data_path = s.required_path("data", a.data.clone())?;
    let selector = SweepSelector::parse("sweeps", &s.string("sweeps", a.sweeps.clone(), "all")?)?;

    let mut inputs = Vec::new();
    let model = load_model(&model_path, &mut inputs)?;
    let data = selector.apply("sweeps", &load_dataset(&data_path, &mut inputs)?)?;
    let preds = predict_bins(&model, &data).map_err(|e| CliError::core("prediction", e))?;
    let valid = preds.iter().filter(|p| p.prob.is_some()).count();

    let mut dir = OutputDir::create(out)?;
    dir.write_with(PREDICTIONS_FILE, |buf| write_predictions(&preds, buf))?;
    println!("predicted {} bins ({valid} valid)", preds.len());
    dir.finish("predict", s, None, inputs)
}

pub fn evaluate(a: &EvaluateArgs, mut s: Settings, out: &Path) -> Result<(), CliError> {
    let model_path = s.required_path("model", a.model.clone())?;
    let data_path = s.required_path("data", a.data.clone())?;
    let selector = SweepSelector::parse("sweeps", &s.string("sweeps", a.sweeps.clone(), "all")?)?;
    if !s.bool("labels-from-data", a.labels_from_data, true)? {
        return Err(CliError::Usage(
            "labels are read from the dataset's spike column; --labels-from-data false is not supported".into(),
        ));
    }

    let mut inputs = Vec::new();
    let model = load_model(&model_path, &mut inputs)?;
    let data = selector.apply("sweeps", &load_dataset(&data_path, &mut inputs)?)?;
    let terms = model_terms(&model).map_err(|e| CliError::core("model", e))?;
    let res = evaluate_model(model, &data, &terms).map_err(|e| CliError::core("evaluation", e))?;

    let mut dir = OutputDir::create(out)?;
    dir.write_with(ROC_FILE, |buf| write_roc_csv(&res.roc, buf))?;
    dir.write(AUC_FILE, roc_summary_json(&res.roc, res.n_excluded).as_bytes())?;
    println!("AUC {:.4} over {} bins ({} excluded)", res.auc, res.n_scored, res.n_excluded);
    dir.finish("evaluate", s, None, inputs)
}

pub fn study(a: &StudyArgs, mut s: Settings, out: &Path) -> Result<(), CliError> {
    let name = s
        .opt_string("study", a.study.clone())?
        .ok_or_else(|| CliError::Usage("missing required option --study".into()))?;
    let sweep = match name.as_str() {
        "significance" | "auc" => None,
        "sweep-c" => Some(SweepParam::C),
        "sweep-r" => Some(SweepParam::R),
        other => {
            return Err(CliError::Usage(format!(
                "unknown study `{other}` (expected significance, auc, sweep-c or sweep-r)"
            )))
        }
    };
    let (default_reps, default_bins) = match name.as_str() {
        "significance" => (1000, 5000),
        "auc" => (20, 10_000),
        _ => (30, 5000),
    };
    let n_replications = s.usize("reps", a.reps, default_reps)?;
    let n_bins = s.usize("bins", a.bins, default_bins)?;
    let alpha = s.f64("alpha", a.alpha, 0.05)?;
    let base_seed = s.u64("seed", a.seed, 1)?;
    let parallelism = s.usize("threads", a.threads, 0)?;
    let (lif, flash_prob) = lif_params(&mut s, &a.lif)?;
    let cfg = StudyConfig { n_replications, n_bins, flash_prob, lif, alpha, base_seed, parallelism };
    cfg.validate().map_err(|e| CliError::core("study", e))?;

    let mut dir = OutputDir::create(out)?;
    match sweep {
        None => {
            let res = if name == "auc" { run_auc_study(&cfg) } else { run_significance_study(&cfg) }
                .map_err(|e| CliError::core("study", e))?;
            dir.write_with(REPLICATIONS_FILE, |buf| write_replications_csv(&res.term_names, &res.records, false, buf))?;
            dir.write(AGGREGATE_FILE, study_aggregate_json(&res).as_bytes())?;
            let a = &res.aggregate;
            println!("{name}: {} of {} replications used", a.n_used, a.n_replications);
            for (t, f) in res.term_names.iter().zip(&a.significance_freq) {
                println!("  {t:<12} significant in {:.1}%", 100.0 * f);
            }
            if let Some(auc) = a.auc {
                println!("  AUC {:.4} (SE {:.4})", auc.mean, auc.se);
            }
        }
        Some(which) => {
            let res =
                run_parameter_sweep(which, &cfg, &default_multipliers()).map_err(|e| CliError::core("study", e))?;
            dir.write_with(REPLICATIONS_FILE, |buf| write_replications_csv(&res.term_names, &res.records, true, buf))?;
            dir.write_with(GRID_FILE, |buf| write_sweep_grid_csv(&res, buf))?;
            dir.write(TRENDS_FILE, sweep_trends_json(&res).as_bytes())?;
            println!("{name}: {} grid values x {n_replications} replications", res.grid.len());
            for t in &res.trends {
                match &t.fit {
                    Some(f) => println!("  {:<12} slope {:+.4} (p {:.2e})", t.term, f.slope, f.slope_p_value),
                    None => println!("  {:<12} no trend ({} estimates retained)", t.term, t.retained),
                }
            }
        }
    }
    dir.finish("study", s, Some(base_seed), Vec::new())
}

/// Re-runs a manifest's command with its recorded options after checking
/// that every input file still has the recorded digest.
pub fn replay(a: &ReplayArgs) -> Result<(), CliError> {
    let m = RunManifest::read(&a.manifest)?;
    for input in &m.inputs {
        let bytes =
            fs::read(&input.path).map_err(|e| CliError::Input(format!("manifest input {}: {e}", input.path)))?;
        if sha256_hex(&bytes) != input.sha256 {
            return Err(CliError::Input(format!("manifest input {} has changed (sha256 mismatch)", input.path)));
        }
    }
    let s = Settings::from_pairs(
        &format!("manifest {}", a.manifest.display()),
        m.config.iter().map(|(k, v): &(String, Value)| (k.clone(), v.to_text())),
    );
    let output = OutputArgs { out: a.out.clone(), config: None };
    match m.command.as_str() {
        "simulate" => simulate(&SimulateArgs { output, ..Default::default() }, s, &a.out),
        "fit" => fit(&FitArgs { output, ..Default::default() }, s, &a.out),
        "predict" => predict(&PredictArgs { output, ..Default::default() }, s, &a.out),
        "evaluate" => evaluate(&EvaluateArgs { output, ..Default::default() }, s, &a.out),
        "study" => study(&StudyArgs { output, ..Default::default() }, s, &a.out),
        other => Err(CliError::Input(format!("manifest names unknown command `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_parsing() {
        assert_eq!(SweepSelector::parse("s", "all").unwrap(), SweepSelector::All);
        let sel = SweepSelector::parse("s", "0-2, 7").unwrap();
        assert!(sel.contains(0) && sel.contains(2) && sel.contains(7));
        assert!(!sel.contains(3) && !sel.contains(8));
        for bad in ["", "3-1", "x", "1-", "-2"] {
            assert!(matches!(SweepSelector::parse("s", bad), Err(CliError::Usage(_))), "{bad}");
        }
    }
}
