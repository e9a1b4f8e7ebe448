//! Logistic response model: fitting, Wald inference, deviance statistics and
//! AIC-driven term selection.

mod irls;
mod linalg;
mod ols;
mod stepwise;

pub use irls::{deviance, fit_logistic, fit_logistic_with, score, FitOptions, DIVERGENT_COEF, SCORE_TOL};

/// Separation status of a logistic fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Separation {
    #[default]
    None,
    /// Some rows are fitted with probability numerically 0 or 1 and at least
    /// one coefficient diverges; the remaining coefficients stay estimable.
    QuasiComplete,
    /// Every row is fitted with probability numerically 0 or 1; the
    /// likelihood has no finite maximizer.
    Complete,
}
pub use ols::{ols_slope, OlsFit};
pub use stepwise::{stepwise_aic, stepwise_aic_from_rows, StepAction, StepRecord, StepwiseResult};

use std::fmt::Write as _;

use crate::error::{ProError, Result};
use crate::pointproc::DesignMatrix;
use crate::scalar::{logistic, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel<T> {
    /// Column names, intercept first.
    pub term_names: Vec<String>,
    pub coefficients: Vec<T>,
    pub standard_errors: Vec<T>,
    pub z_values: Vec<T>,
    pub p_values: Vec<T>,
    pub null_deviance: T,
    pub residual_deviance: T,
    pub null_df: usize,
    pub residual_df: usize,
    pub aic: T,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    pub warnings: Vec<String>,
    pub separation: Separation,
    /// Deviance after each accepted IRLS step, starting point first.
    pub deviance_path: Vec<T>,
}

impl<T: Real> FittedModel<T> {
    /// A prediction-only model from known coefficients; inference fields are NaN.
    pub fn from_coefficients(term_names: Vec<String>, coefficients: Vec<T>) -> Result<Self> {
        if term_names.len() != coefficients.len() {
            return Err(ProError::LengthMismatch(term_names.len(), coefficients.len()));
        }
        let k = coefficients.len();
        let nan = vec![T::nan(); k];
        Ok(Self {
            term_names,
            coefficients,
            standard_errors: nan.clone(),
            z_values: nan.clone(),
            p_values: nan,
            null_deviance: T::nan(),
            residual_deviance: T::nan(),
            null_df: 0,
            residual_df: 0,
            aic: T::nan(),
            converged: false,
            iterations: 0,
            n_obs: 0,
            warnings: Vec::new(),
            separation: Separation::None,
            deviance_path: Vec::new(),
        })
    }

    pub fn n_coefficients(&self) -> usize {
        self.coefficients.len()
    }

    /// Coefficient for a named column, if present.
    pub fn coefficient(&self, name: &str) -> Option<T> {
        self.term_names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }

    pub fn p_value(&self, name: &str) -> Option<T> {
        self.term_names.iter().position(|n| n == name).map(|i| self.p_values[i])
    }

    /// Coefficient table laid out as Estimate / SE / Z value / P-value,
    /// followed by the deviance summary.
    pub fn summary_table(&self) -> String {
        let width = self.term_names.iter().map(String::len).max().unwrap_or(0).max(12);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$} {:>10} {:>10} {:>10} {:>10}",
            "Coefficients", "Estimate", "SE", "Z value", "P-value"
        );
        for i in 0..self.coefficients.len() {
            let _ = writeln!(
                out,
                "{:<width$} {:>10.3} {:>10.3} {:>10.3} {:>10}",
                self.term_names[i],
                self.coefficients[i].as_f64(),
                self.standard_errors[i].as_f64(),
                self.z_values[i].as_f64(),
                format_p_value(self.p_values[i].as_f64()),
            );
        }
        let _ = writeln!(
            out,
            "Null deviance: {:.2} (df={}), residual deviance: {:.2} (df={}), AIC: {:.2}",
            self.null_deviance.as_f64(),
            self.null_df,
            self.residual_deviance.as_f64(),
            self.residual_df,
            self.aic.as_f64()
        );
        if !self.converged {
            let _ = writeln!(out, "Warning: fit did not converge after {} iterations", self.iterations);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "Warning: {w}");
        }
        out
    }
}

/// `2 * Phi(-|z|)` computed as `erfc(|z| / sqrt 2)`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// R-style p-value text: `< 2e-16` below that floor, three significant
/// digits in scientific form below 1e-3, otherwise three decimals.
pub fn format_p_value(p: f64) -> String {
    if p.is_nan() {
        return "NA".into();
    }
    if p < 2e-16 {
        return "< 2e-16".into();
    }
    if p >= 1e-3 {
        return format!("{p:.3}");
    }
    let exp = p.log10().floor() as i32;
    let mut mant = p / 10f64.powi(exp);
    let mut exp = exp;
    if (mant * 100.0).round() >= 1000.0 {
        mant /= 10.0;
        exp += 1;
    }
    format!("{mant:.2}e-{:02}", -exp)
}

fn check_schema<T: Real>(model: &FittedModel<T>, design: &DesignMatrix<T>) -> Result<()> {
    let cols = design.column_names();
    if cols != model.term_names {
        return Err(ProError::SchemaMismatch { model: model.term_names.clone(), design: cols });
    }
    Ok(())
}

/// Linear predictor `x . beta` for every design row.
pub fn predict_eta<T: Real>(model: &FittedModel<T>, design: &DesignMatrix<T>) -> Result<Vec<T>> {
    check_schema(model, design)?;
    Ok(design.rows().map(|x| irls::dot(x, &model.coefficients)).collect())
}

/// Spike probability `logistic(x . beta)` for every design row.
pub fn predict_prob<T: Real>(model: &FittedModel<T>, design: &DesignMatrix<T>) -> Result<Vec<T>> {
    Ok(predict_eta(model, design)?.into_iter().map(logistic).collect())
}

pub fn deviance_r2<T: Real>(model: &FittedModel<T>) -> Result<T> {
    deviance_r2_from(model.null_deviance, model.residual_deviance)
}

/// `1 - residual / null`.
pub fn deviance_r2_from<T: Real>(null_deviance: T, residual_deviance: T) -> Result<T> {
    if !(null_deviance > T::zero()) {
        return Err(ProError::UndefinedStatistic(format!(
            "deviance R^2 needs a positive null deviance, got {null_deviance}"
        )));
    }
    Ok(T::one() - residual_deviance / null_deviance)
}
