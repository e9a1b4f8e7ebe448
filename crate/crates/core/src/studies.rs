//! Replicated LIF simulation experiments with the four-term response model.
//!
//! Replication `i` is seeded with [`mix_seed`]`(base_seed, i)` (for parameter
//! sweeps `i = grid_index * n_replications + rep`). Replications run on a
//! dedicated rayon pool, results are collected in index order and every
//! aggregate is a left-to-right fold over that order, so output does not
//! depend on the worker count.

use std::fmt;

use rayon::prelude::*;

use crate::error::{ProError, Result};
use crate::eval::train_test_evaluate;
use crate::glm::{deviance_r2, fit_logistic, ols_slope, FittedModel, OlsFit, Separation};
use crate::lif::{simulate_sweep, LifParams};
use crate::pointproc::{build_design, Dataset, Term};
use crate::rng::mix_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub n_replications: usize,
    pub n_bins: usize,
    pub flash_prob: f64,
    pub lif: LifParams<f64>,
    pub alpha: f64,
    pub base_seed: u64,
    /// Worker threads; 0 lets rayon decide.
    pub parallelism: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n_replications: 1000,
            n_bins: 5000,
            flash_prob: 0.14,
            lif: LifParams::default(),
            alpha: 0.05,
            base_seed: 1,
            parallelism: 0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_replications == 0 {
            return Err(ProError::Config("n_replications must be at least 1".into()));
        }
        if self.n_bins == 0 {
            return Err(ProError::Config("n_bins must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.flash_prob) {
            return Err(ProError::Config(format!("flash probability {} not in [0, 1]", self.flash_prob)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ProError::Config(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        self.lif.validate().map_err(|e| ProError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Significance,
    Auc,
    SweepC,
    SweepR,
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::Significance => "significance",
            StudyKind::Auc => "auc",
            StudyKind::SweepC => "sweep-c",
            StudyKind::SweepR => "sweep-r",
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one replication. A dropped replication keeps its reason and
/// has empty coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    /// Swept parameter value (C or R) for sweep studies.
    pub parameter_value: Option<f64>,
    pub coefficients: Vec<f64>,
    pub p_values: Vec<f64>,
    pub deviance_r2: f64,
    pub auc: Option<f64>,
    /// The fit converged with some fitted probabilities numerically 0 or 1.
    pub quasi_separated: bool,
    pub dropped: Option<String>,
}

impl ReplicationRecord {
    fn dropped(index: usize, seed: u64, parameter_value: Option<f64>, reason: String) -> Self {
        Self {
            index,
            seed,
            parameter_value,
            coefficients: Vec::new(),
            p_values: Vec::new(),
            deviance_r2: f64::NAN,
            auc: None,
            quasi_separated: false,
            dropped: Some(reason),
        }
    }

    fn from_model(
        index: usize,
        seed: u64,
        parameter_value: Option<f64>,
        model: &FittedModel<f64>,
        auc: Option<f64>,
    ) -> Self {
        if !model.converged {
            let why = model.warnings.first().cloned().unwrap_or_else(|| "not converged".into());
            return Self::dropped(index, seed, parameter_value, why);
        }
        Self {
            index,
            seed,
            parameter_value,
            coefficients: model.coefficients.clone(),
            p_values: model.p_values.clone(),
            deviance_r2: deviance_r2(model).unwrap_or(f64::NAN),
            auc,
            quasi_separated: model.separation == Separation::QuasiComplete,
            dropped: None,
        }
    }

    pub fn is_used(&self) -> bool {
        self.dropped.is_none()
    }
}

/// Mean and standard error (sample SD / sqrt n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return None;
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            f64::NAN
        };
        Some(Self { mean, se, n })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub n_replications: usize,
    pub n_used: usize,
    pub n_dropped: usize,
    /// Used replications whose fit showed quasi-complete separation.
    pub n_quasi_separated: usize,
    /// Fraction of used replications with `p < alpha`, per column.
    pub significance_freq: Vec<f64>,
    pub coefficient_means: Vec<MeanSe>,
    pub deviance_r2: Option<MeanSe>,
    pub auc: Option<MeanSe>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub kind: StudyKind,
    pub config: StudyConfig,
    /// Column names, intercept first.
    pub term_names: Vec<String>,
    pub records: Vec<ReplicationRecord>,
    pub aggregate: Aggregate,
}

impl StudyResult {
    pub fn frequency(&self, term: &str) -> Option<f64> {
        let i = self.term_names.iter().position(|t| t == term)?;
        self.aggregate.significance_freq.get(i).copied()
    }
}

pub fn model_columns() -> Vec<String> {
    std::iter::once(crate::pointproc::INTERCEPT.to_string())
        .chain(Term::pro_model().iter().map(Term::to_string))
        .collect()
}

fn aggregate(records: &[ReplicationRecord], n_cols: usize, alpha: f64) -> Result<Aggregate> {
    let used: Vec<&ReplicationRecord> = records.iter().filter(|r| r.is_used()).collect();
    if used.is_empty() {
        return Err(ProError::AllDropped(records.len()));
    }
    let n_used = used.len();
    let significance_freq =
        (0..n_cols).map(|j| used.iter().filter(|r| r.p_values[j] < alpha).count() as f64 / n_used as f64).collect();
    let coefficient_means =
        (0..n_cols).map(|j| MeanSe::of(used.iter().map(|r| r.coefficients[j])).expect("non-empty")).collect();
    let deviance_r2 = MeanSe::of(used.iter().map(|r| r.deviance_r2));
    let auc = MeanSe::of(used.iter().filter_map(|r| r.auc));
    Ok(Aggregate {
        n_replications: records.len(),
        n_used,
        n_dropped: records.len() - n_used,
        n_quasi_separated: used.iter().filter(|r| r.quasi_separated).count(),
        significance_freq,
        coefficient_means,
        deviance_r2,
        auc,
    })
}

/// Runs `f(i)` for `i in 0..n` on a pool of `threads` workers, in index order.
pub fn run_indexed<R: Send>(n: usize, threads: usize, f: impl Fn(usize) -> R + Sync + Send) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ProError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
}

fn fit_replication(
    lif: &LifParams<f64>,
    cfg: &StudyConfig,
    index: usize,
    seed: u64,
    value: Option<f64>,
) -> ReplicationRecord {
    let outcome = simulate_sweep(lif, cfg.n_bins, cfg.flash_prob, seed, 0).and_then(|sweep| {
        let design = build_design::<f64>(&Dataset::single(sweep), &Term::pro_model())?;
        fit_logistic(&design)
    });
    match outcome {
        Ok(m) => ReplicationRecord::from_model(index, seed, value, &m, None),
        Err(e) => ReplicationRecord::dropped(index, seed, value, e.to_string()),
    }
}

/// Per replication: simulate one sweep, fit PF + CF + SF + CF*SF, record
/// p-values and deviance R^2.
pub fn run_significance_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let records = run_indexed(cfg.n_replications, cfg.parallelism, |i| {
        let seed = mix_seed(cfg.base_seed, i as u64);
        fit_replication(&cfg.lif, cfg, i, seed, None)
    })?;
    let term_names = model_columns();
    let aggregate = aggregate(&records, term_names.len(), cfg.alpha)?;
    Ok(StudyResult { kind: StudyKind::Significance, config: cfg.clone(), term_names, records, aggregate })
}

/// Per replication: simulate `n_bins` contiguous bins, train on the first
/// half, score the second half (its history restarts at the split).
pub fn run_auc_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    if !cfg.n_bins.is_multiple_of(2) || cfg.n_bins < 4 {
        return Err(ProError::Config(format!("AUC study needs an even n_bins >= 4, got {}", cfg.n_bins)));
    }
    let half = cfg.n_bins / 2;
    let records = run_indexed(cfg.n_replications, cfg.parallelism, |i| {
        let seed = mix_seed(cfg.base_seed, i as u64);
        let outcome = simulate_sweep(&cfg.lif, cfg.n_bins, cfg.flash_prob, seed, 0).and_then(|sweep| {
            let (train, test) = sweep.split_at(half, 0, 1)?;
            train_test_evaluate::<f64>(&Dataset::single(train), &Dataset::single(test), &Term::pro_model())
        });
        match outcome {
            Ok(r) => ReplicationRecord::from_model(i, seed, None, &r.model, Some(r.auc)),
            Err(e) => ReplicationRecord::dropped(i, seed, None, e.to_string()),
        }
    })?;
    let term_names = model_columns();
    let aggregate = aggregate(&records, term_names.len(), cfg.alpha)?;
    Ok(StudyResult { kind: StudyKind::Auc, config: cfg.clone(), term_names, records, aggregate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    C,
    R,
}

impl SweepParam {
    pub fn kind(&self) -> StudyKind {
        match self {
            SweepParam::C => StudyKind::SweepC,
            SweepParam::R => StudyKind::SweepR,
        }
    }

    fn base(&self, lif: &LifParams<f64>) -> f64 {
        match self {
            SweepParam::C => lif.c,
            SweepParam::R => lif.r,
        }
    }

    fn apply(&self, lif: &LifParams<f64>, value: f64) -> LifParams<f64> {
        match self {
            SweepParam::C => lif.with_c(value),
            SweepParam::R => lif.with_r(value),
        }
    }
}

/// Eleven evenly spaced multipliers from 0.80 to 1.20.
pub fn default_multipliers() -> Vec<f64> {
    (0..=10).map(|k| 0.8 + 0.04 * f64::from(k)).collect()
}

/// Regression of one coefficient's significant estimates on the parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTrend {
    pub term: String,
    /// `None` when fewer than three estimates survive or they share one abscissa.
    pub fit: Option<OlsFit<f64>>,
    pub retained: usize,
    /// Estimates removed for `p >= alpha`.
    pub dropped: usize,
    pub dropped_fraction: f64,
    /// Parameter values at which every replication dropped this coefficient.
    pub unavailable_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub multiplier: f64,
    pub parameter_value: f64,
    pub n_used: usize,
    /// Mean of retained estimates per model term (intercept excluded); `None` if all dropped.
    pub mean_retained: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub which: SweepParam,
    pub config: StudyConfig,
    pub term_names: Vec<String>,
    pub grid: Vec<GridSummary>,
    pub records: Vec<ReplicationRecord>,
    /// One entry per model term, intercept excluded.
    pub trends: Vec<CoefficientTrend>,
    pub n_failed_fits: usize,
}

impl SweepResult {
    pub fn trend(&self, term: &str) -> Option<&CoefficientTrend> {
        self.trends.iter().find(|t| t.term == term)
    }
}

pub fn run_parameter_sweep(which: SweepParam, cfg: &StudyConfig, multipliers: &[f64]) -> Result<SweepResult> {
    cfg.validate()?;
    if multipliers.is_empty() {
        return Err(ProError::Config("parameter grid is empty".into()));
    }
    if let Some(m) = multipliers.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
        return Err(ProError::Config(format!("grid multiplier {m} must be positive")));
    }
    let base = which.base(&cfg.lif);
    let reps = cfg.n_replications;
    let total = multipliers.len() * reps;
    let records = run_indexed(total, cfg.parallelism, |i| {
        let value = base * multipliers[i / reps];
        let seed = mix_seed(cfg.base_seed, i as u64);
        fit_replication(&which.apply(&cfg.lif, value), cfg, i, seed, Some(value))
    })?;

    let term_names = model_columns();
    let used: Vec<&ReplicationRecord> = records.iter().filter(|r| r.is_used()).collect();
    if used.is_empty() {
        return Err(ProError::AllDropped(records.len()));
    }
    let keep = |r: &ReplicationRecord, j: usize| r.p_values[j] < cfg.alpha;

    let grid = multipliers
        .iter()
        .enumerate()
        .map(|(g, &m)| {
            let here: Vec<&&ReplicationRecord> = used.iter().filter(|r| r.index / reps == g).collect();
            let mean_retained = (1..term_names.len())
                .map(|j| MeanSe::of(here.iter().filter(|r| keep(r, j)).map(|r| r.coefficients[j])).map(|s| s.mean))
                .collect();
            GridSummary { multiplier: m, parameter_value: base * m, n_used: here.len(), mean_retained }
        })
        .collect::<Vec<_>>();

    let trends = (1..term_names.len())
        .map(|j| {
            let points: Vec<(f64, f64)> = used
                .iter()
                .filter(|r| keep(r, j))
                .map(|r| (r.parameter_value.expect("sweep record"), r.coefficients[j]))
                .collect();
            let dropped = used.len() - points.len();
            let unavailable_values =
                grid.iter().filter(|g| g.mean_retained[j - 1].is_none()).map(|g| g.parameter_value).collect();
            CoefficientTrend {
                term: term_names[j].clone(),
                fit: ols_slope(&points).ok(),
                retained: points.len(),
                dropped,
                dropped_fraction: dropped as f64 / used.len() as f64,
                unavailable_values,
            }
        })
        .collect();

    Ok(SweepResult {
        which,
        config: cfg.clone(),
        term_names,
        grid,
        n_failed_fits: records.len() - used.len(),
        records,
        trends,
    })
}
