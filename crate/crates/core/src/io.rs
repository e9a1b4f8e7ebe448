//! CSV and JSON wire formats.
//!
//! Floating-point values are written with 17 significant digits, enough to
//! round-trip any `f64` exactly. Non-finite values are `null` in JSON; in CSV
//! they are written as `inf`, `-inf` or `NaN`, and missing values are empty.

use std::io::{Read, Write};

use serde_json::Value;

use crate::error::{ProError, Result};
use crate::eval::{BinPrediction, RocCurve};
use crate::glm::FittedModel;
use crate::pointproc::{Dataset, Sweep};
use crate::scalar::Real;
use crate::studies::{MeanSe, ReplicationRecord, StudyConfig, StudyResult, SweepResult};

pub const DATASET_HEADER: [&str; 4] = ["sweep", "bin", "flash", "spike"];

/// Formats `x` with 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn json_num(x: f64) -> String {
    if x.is_finite() {
        fmt17(x)
    } else {
        "null".into()
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

fn json_array(items: impl IntoIterator<Item = String>) -> String {
    format!("[{}]", items.into_iter().collect::<Vec<_>>().join(", "))
}

/// JSON object with keys in insertion order.
#[derive(Debug, Default, Clone)]
pub struct JsonObject {
    fields: Vec<(String, String)>,
}

impl JsonObject {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn raw(mut self, key: &str, json: String) -> Self {
        self.fields.push((key.to_string(), json));
        self
    }

    pub fn num(self, key: &str, x: f64) -> Self {
        self.raw(key, json_num(x))
    }

    pub fn opt_num(self, key: &str, x: Option<f64>) -> Self {
        self.raw(key, x.map_or_else(|| "null".into(), json_num))
    }

    pub fn int(self, key: &str, n: u64) -> Self {
        self.raw(key, n.to_string())
    }

    pub fn bool(self, key: &str, b: bool) -> Self {
        self.raw(key, b.to_string())
    }

    pub fn str(self, key: &str, s: &str) -> Self {
        self.raw(key, json_str(s))
    }

    pub fn nums(self, key: &str, xs: impl IntoIterator<Item = f64>) -> Self {
        self.raw(key, json_array(xs.into_iter().map(json_num)))
    }

    pub fn strs<S: AsRef<str>>(self, key: &str, xs: impl IntoIterator<Item = S>) -> Self {
        self.raw(key, json_array(xs.into_iter().map(|s| json_str(s.as_ref()))))
    }

    pub fn obj(self, key: &str, o: JsonObject) -> Self {
        self.raw(key, o.to_inline())
    }

    /// Single-line rendering.
    pub fn to_inline(&self) -> String {
        let body: Vec<String> = self.fields.iter().map(|(k, v)| format!("{}: {v}", json_str(k))).collect();
        format!("{{{}}}", body.join(", "))
    }

    /// One top-level key per line, trailing newline.
    pub fn to_pretty(&self) -> String {
        if self.fields.is_empty() {
            return "{}\n".into();
        }
        let body: Vec<String> = self.fields.iter().map(|(k, v)| format!("  {}: {v}", json_str(k))).collect();
        format!("{{\n{}\n}}\n", body.join(",\n"))
    }
}

fn csv_error(e: csv::Error) -> ProError {
    match e.position() {
        Some(p) => ProError::Parse { line: p.line(), msg: e.to_string() },
        None => ProError::Io(e.to_string()),
    }
}

fn indicator(field: &str, name: &str, line: u64) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(ProError::Parse { line, msg: format!("{name} must be 0 or 1, got `{other}`") }),
    }
}

/// Parses the `sweep,bin,flash,spike` dataset format.
pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = rdr.records();
    match records.next() {
        None => return Err(ProError::Parse { line: 1, msg: "missing header".into() }),
        Some(rec) => {
            let rec = rec.map_err(csv_error)?;
            if rec.iter().ne(DATASET_HEADER.iter().copied()) {
                return Err(ProError::Parse { line: 1, msg: format!("header must be `{}`", DATASET_HEADER.join(",")) });
            }
        }
    }

    let mut sweeps = Vec::new();
    let mut current: Option<(u64, Vec<bool>, Vec<bool>)> = None;
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(ProError::Parse { line, msg: format!("expected 4 fields, found {}", rec.len()) });
        }
        let sweep: u64 =
            rec[0].parse().map_err(|_| ProError::Parse { line, msg: format!("invalid sweep id `{}`", &rec[0]) })?;
        let bin: usize =
            rec[1].parse().map_err(|_| ProError::Parse { line, msg: format!("invalid bin index `{}`", &rec[1]) })?;
        let flash = indicator(&rec[2], "flash", line)?;
        let spike = indicator(&rec[3], "spike", line)?;

        let continues = matches!(&current, Some((id, _, _)) if *id == sweep);
        if !continues {
            if let Some((id, f, s)) = current.take() {
                if sweep < id {
                    return Err(ProError::Parse {
                        line,
                        msg: format!("sweep {sweep} after sweep {id}: rows must be sorted"),
                    });
                }
                sweeps.push(Sweep::new(id, f, s)?);
            }
            current = Some((sweep, Vec::new(), Vec::new()));
        }
        let (_, f, s) = current.as_mut().expect("current sweep set above");
        if bin != f.len() {
            return Err(ProError::Parse { line, msg: format!("sweep {sweep}: expected bin {}, found {bin}", f.len()) });
        }
        f.push(flash);
        s.push(spike);
    }
    if let Some((id, f, s)) = current {
        sweeps.push(Sweep::new(id, f, s)?);
    }
    Dataset::new(sweeps)
}

pub fn write_dataset<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let mut buf = String::with_capacity(16 * data.total_bins() + 32);
    buf.push_str(&DATASET_HEADER.join(","));
    buf.push('\n');
    for sweep in data.sweeps() {
        let id = sweep.id().to_string();
        for (t, (&f, &s)) in sweep.flashes().iter().zip(sweep.spikes()).enumerate() {
            buf.push_str(&id);
            buf.push(',');
            buf.push_str(&t.to_string());
            buf.push_str(if f { ",1" } else { ",0" });
            buf.push_str(if s { ",1\n" } else { ",0\n" });
        }
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn model_to_json<T: Real>(model: &FittedModel<T>) -> String {
    let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
    JsonObject::new()
        .strs("terms", &model.term_names)
        .nums("coef", f(&model.coefficients))
        .nums("se", f(&model.standard_errors))
        .nums("z", f(&model.z_values))
        .nums("p", f(&model.p_values))
        .num("null_deviance", model.null_deviance.as_f64())
        .num("residual_deviance", model.residual_deviance.as_f64())
        .int("null_df", model.null_df as u64)
        .int("residual_df", model.residual_df as u64)
        .num("aic", model.aic.as_f64())
        .bool("converged", model.converged)
        .int("iterations", model.iterations as u64)
        .to_pretty()
}

fn schema(msg: impl Into<String>) -> ProError {
    ProError::Parse { line: 0, msg: msg.into() }
}

fn value_num(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Null => Ok(f64::NAN),
        Value::Number(n) => n.as_f64().ok_or_else(|| schema(format!("`{key}` is not a finite number"))),
        _ => Err(schema(format!("`{key}` must be a number or null"))),
    }
}

fn field_nums(obj: &serde_json::Map<String, Value>, key: &str, len: usize) -> Result<Vec<f64>> {
    match obj.get(key) {
        None => Ok(vec![f64::NAN; len]),
        Some(Value::Array(xs)) => {
            if xs.len() != len {
                return Err(schema(format!("`{key}` has {} entries, expected {len}", xs.len())));
            }
            xs.iter().map(|x| value_num(x, key)).collect()
        }
        Some(_) => Err(schema(format!("`{key}` must be an array"))),
    }
}

fn field_num(obj: &serde_json::Map<String, Value>, key: &str) -> Result<f64> {
    obj.get(key).map_or(Ok(f64::NAN), |v| value_num(v, key))
}

fn field_count(obj: &serde_json::Map<String, Value>, key: &str) -> Result<usize> {
    match obj.get(key) {
        None => Ok(0),
        Some(v) => {
            v.as_u64().map(|n| n as usize).ok_or_else(|| schema(format!("`{key}` must be a non-negative integer")))
        }
    }
}

/// Reads a model JSON document. Only `terms` and `coef` are required; missing
/// inference fields become NaN, so a model can be written by hand for prediction.
pub fn model_from_json<T: Real>(text: &str) -> Result<FittedModel<T>> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| ProError::Parse { line: e.line() as u64, msg: e.to_string() })?;
    let obj = doc.as_object().ok_or_else(|| schema("model JSON must be an object"))?;
    let terms: Vec<String> = match obj.get("terms") {
        Some(Value::Array(xs)) => xs
            .iter()
            .map(|x| x.as_str().map(str::to_string).ok_or_else(|| schema("`terms` must hold strings")))
            .collect::<Result<_>>()?,
        _ => return Err(schema("missing `terms` array")),
    };
    if !obj.contains_key("coef") {
        return Err(schema("missing `coef` array"));
    }
    let n = terms.len();
    let coef = field_nums(obj, "coef", n)?;
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(schema("`coef` entries must be finite"));
    }
    let lit = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    let mut model = FittedModel::from_coefficients(terms, lit(coef))?;
    model.standard_errors = lit(field_nums(obj, "se", n)?);
    model.z_values = lit(field_nums(obj, "z", n)?);
    model.p_values = lit(field_nums(obj, "p", n)?);
    model.null_deviance = T::lit(field_num(obj, "null_deviance")?);
    model.residual_deviance = T::lit(field_num(obj, "residual_deviance")?);
    model.null_df = field_count(obj, "null_df")?;
    model.residual_df = field_count(obj, "residual_df")?;
    model.aic = T::lit(field_num(obj, "aic")?);
    model.converged = match obj.get("converged") {
        None => false,
        Some(v) => v.as_bool().ok_or_else(|| schema("`converged` must be a boolean"))?,
    };
    model.iterations = field_count(obj, "iterations")?;
    Ok(model)
}

pub fn write_predictions<T: Real, W: Write>(preds: &[BinPrediction<T>], mut out: W) -> Result<()> {
    let mut buf = String::from("sweep,bin,prob,valid\n");
    for p in preds {
        match p.prob {
            Some(q) => buf.push_str(&format!("{},{},{},1\n", p.sweep_id, p.t, fmt17(q.as_f64()))),
            None => buf.push_str(&format!("{},{},,0\n", p.sweep_id, p.t)),
        }
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn write_roc_csv<T: Real, W: Write>(roc: &RocCurve<T>, mut out: W) -> Result<()> {
    let mut buf = String::from("threshold,fpr,tpr\n");
    for p in &roc.points {
        buf.push_str(&format!("{},{},{}\n", fmt17(p.threshold.as_f64()), fmt17(p.fpr.as_f64()), fmt17(p.tpr.as_f64())));
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn roc_summary_json<T: Real>(roc: &RocCurve<T>, n_excluded: usize) -> String {
    JsonObject::new()
        .num("auc", roc.auc.as_f64())
        .int("n_pos", roc.n_pos as u64)
        .int("n_neg", roc.n_neg as u64)
        .int("n_excluded", n_excluded as u64)
        .to_pretty()
}

fn mean_se_json(m: Option<MeanSe>) -> String {
    match m {
        None => "null".into(),
        Some(m) => JsonObject::new().num("mean", m.mean).num("se", m.se).int("n", m.n as u64).to_inline(),
    }
}

pub fn config_json(cfg: &StudyConfig) -> JsonObject {
    JsonObject::new()
        .int("n_replications", cfg.n_replications as u64)
        .int("n_bins", cfg.n_bins as u64)
        .num("flash_prob", cfg.flash_prob)
        .num("c", cfg.lif.c)
        .num("r", cfg.lif.r)
        .num("v_th", cfg.lif.v_th)
        .num("v_reset", cfg.lif.v_reset)
        .int("substeps_per_bin", cfg.lif.substeps_per_bin as u64)
        .num("bin_ms", cfg.lif.bin_ms)
        .num("stimulus_height", cfg.lif.stimulus_height)
        .num("alpha", cfg.alpha)
        .int("base_seed", cfg.base_seed)
}

fn opt_field(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt17)
}

/// One row per replication. Dropped replications have empty numeric fields.
pub fn write_replications_csv<W: Write>(
    term_names: &[String],
    records: &[ReplicationRecord],
    with_parameter: bool,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string(), "seed".to_string()];
    if with_parameter {
        header.push("parameter_value".into());
    }
    header.extend(term_names.iter().map(|t| format!("coef[{t}]")));
    header.extend(term_names.iter().map(|t| format!("p[{t}]")));
    header.extend(["deviance_r2", "auc", "quasi_separated", "dropped"].map(String::from));
    w.write_record(&header).map_err(csv_error)?;

    let k = term_names.len();
    for r in records {
        let mut row = vec![r.index.to_string(), r.seed.to_string()];
        if with_parameter {
            row.push(opt_field(r.parameter_value));
        }
        let pick = |v: &[f64], i: usize| opt_field(v.get(i).copied());
        row.extend((0..k).map(|i| pick(&r.coefficients, i)));
        row.extend((0..k).map(|i| pick(&r.p_values, i)));
        row.push(opt_field(r.is_used().then_some(r.deviance_r2)));
        row.push(opt_field(r.auc));
        row.push(u8::from(r.quasi_separated).to_string());
        row.push(r.dropped.clone().unwrap_or_default());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn study_aggregate_json(res: &StudyResult) -> String {
    let a = &res.aggregate;
    JsonObject::new()
        .str("study", res.kind.name())
        .int("n_replications", a.n_replications as u64)
        .int("n_used", a.n_used as u64)
        .int("n_dropped", a.n_dropped as u64)
        .int("n_quasi_separated", a.n_quasi_separated as u64)
        .num("alpha", res.config.alpha)
        .strs("terms", &res.term_names)
        .nums("significance_freq", a.significance_freq.iter().copied())
        .nums("coef_mean", a.coefficient_means.iter().map(|m| m.mean))
        .nums("coef_se", a.coefficient_means.iter().map(|m| m.se))
        .raw("deviance_r2", mean_se_json(a.deviance_r2))
        .raw("auc", mean_se_json(a.auc))
        .obj("config", config_json(&res.config))
        .to_pretty()
}

/// One row per grid value: multiplier, parameter value, used replications
/// and the mean retained estimate of each model term.
pub fn write_sweep_grid_csv<W: Write>(res: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let model_terms: Vec<&String> = res.term_names.iter().skip(1).collect();
    let mut header = vec!["multiplier".to_string(), "parameter_value".into(), "n_used".into()];
    header.extend(model_terms.iter().map(|t| format!("mean[{t}]")));
    w.write_record(&header).map_err(csv_error)?;
    for g in &res.grid {
        let mut row = vec![fmt17(g.multiplier), fmt17(g.parameter_value), g.n_used.to_string()];
        row.extend(g.mean_retained.iter().map(|m| opt_field(*m)));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_trends_json(res: &SweepResult) -> String {
    let trends: Vec<String> = res
        .trends
        .iter()
        .map(|t| {
            let fit = &t.fit;
            JsonObject::new()
                .str("term", &t.term)
                .opt_num("slope", fit.as_ref().map(|f| f.slope))
                .opt_num("intercept", fit.as_ref().map(|f| f.intercept))
                .opt_num("slope_se", fit.as_ref().map(|f| f.slope_se))
                .opt_num("p_value", fit.as_ref().map(|f| f.slope_p_value))
                .int("retained", t.retained as u64)
                .int("dropped", t.dropped as u64)
                .num("dropped_fraction", t.dropped_fraction)
                .nums("unavailable_values", t.unavailable_values.iter().copied())
                .to_inline()
        })
        .collect();
    JsonObject::new()
        .str("study", res.which.kind().name())
        .int("n_failed_fits", res.n_failed_fits as u64)
        .nums("parameter_values", res.grid.iter().map(|g| g.parameter_value))
        .raw("trends", format!("[\n    {}\n  ]", trends.join(",\n    ")))
        .obj("config", config_json(&res.config))
        .to_pretty()
}
