//! Greedy bidirectional AIC search over monomials in PF, CF and SF.

use std::fmt;

use super::{fit_logistic, FittedModel};
use crate::error::{ProError, Result};
use crate::pointproc::{feature_rows, Dataset, DdaggerRule, DesignMatrix, FeatureRow, Term};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepAction {
    StartFull,
    StartEmpty,
    Add(Term),
    Drop(Term),
}

impl fmt::Display for StepAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepAction::StartFull => f.write_str("start (full model)"),
            StepAction::StartEmpty => f.write_str("start (intercept only)"),
            StepAction::Add(t) => write!(f, "+ {t}"),
            StepAction::Drop(t) => write!(f, "- {t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub action: StepAction,
    pub terms: Vec<Term>,
    pub aic: f64,
}

#[derive(Debug, Clone)]
pub struct StepwiseResult<T> {
    pub model: FittedModel<T>,
    pub terms: Vec<Term>,
    pub steps: Vec<StepRecord>,
}

impl<T> StepwiseResult<T> {
    /// One line per step: action, AIC, resulting term list.
    pub fn log_lines(&self) -> Vec<String> {
        self.steps
            .iter()
            .map(|s| {
                let terms: Vec<String> = s.terms.iter().map(Term::to_string).collect();
                format!("{:<24} AIC={:.4}  [{}]", s.action.to_string(), s.aic, terms.join(", "))
            })
            .collect()
    }
}

pub fn stepwise_aic<T: Real>(data: &Dataset, max_degree: u8) -> Result<StepwiseResult<T>> {
    if max_degree == 0 {
        return Err(ProError::Domain("max_degree must be at least 1".into()));
    }
    let (rows, excluded) = feature_rows::<T>(data, DdaggerRule::Inclusive)?;
    let candidates = Term::all_up_to(max_degree);
    stepwise_aic_from_rows(&rows, excluded, &candidates, &candidates)
}

/// Runs the search from `start` over `candidates` on precomputed feature rows.
///
/// Each pass evaluates every single-term deletion and addition and applies
/// the one with the lowest AIC; the search stops when no move lowers AIC.
/// Candidate fits that are singular or fail to converge (including complete
/// separation) are skipped. If the start
/// model itself cannot be fit the search restarts from the intercept-only
/// model.
pub fn stepwise_aic_from_rows<T: Real>(
    rows: &[FeatureRow<T>],
    excluded: usize,
    candidates: &[Term],
    start: &[Term],
) -> Result<StepwiseResult<T>> {
    let fit = |terms: &[Term]| -> Result<FittedModel<T>> {
        fit_logistic(&DesignMatrix::from_features(rows, terms, excluded))
    };
    let usable = |m: &FittedModel<T>| m.converged && m.aic.is_finite();

    let ordered = |set: &[Term]| -> Vec<Term> { candidates.iter().copied().filter(|c| set.contains(c)).collect() };

    let mut steps = Vec::new();
    let (mut current, mut model) = match fit(&ordered(start)) {
        Ok(m) if usable(&m) => {
            steps.push(StepRecord { action: StepAction::StartFull, terms: ordered(start), aic: m.aic.as_f64() });
            (ordered(start), m)
        }
        Ok(_) | Err(ProError::Singular) => {
            let m = fit(&[])?;
            steps.push(StepRecord { action: StepAction::StartEmpty, terms: Vec::new(), aic: m.aic.as_f64() });
            (Vec::new(), m)
        }
        Err(e) => return Err(e),
    };

    // each accepted move strictly lowers AIC, so the number of moves is finite;
    // the bound only guards against floating-point cycling
    let max_moves = 4 * candidates.len() * candidates.len() + 16;
    for _ in 0..max_moves {
        let mut best: Option<(StepAction, Vec<Term>, FittedModel<T>)> = None;
        let moves = current
            .iter()
            .map(|&t| StepAction::Drop(t))
            .chain(candidates.iter().filter(|c| !current.contains(c)).map(|&t| StepAction::Add(t)));
        for action in moves {
            let next: Vec<Term> = match &action {
                StepAction::Drop(t) => current.iter().copied().filter(|c| c != t).collect(),
                StepAction::Add(t) => {
                    let mut v = current.clone();
                    v.push(*t);
                    ordered(&v)
                }
                _ => unreachable!(),
            };
            let m = match fit(&next) {
                Ok(m) if usable(&m) => m,
                Ok(_) | Err(ProError::Singular) => continue,
                Err(e) => return Err(e),
            };
            let incumbent = best.as_ref().map_or(model.aic, |b| b.2.aic);
            if m.aic < incumbent {
                best = Some((action, next, m));
            }
        }
        match best {
            Some((action, next, m)) if m.aic < model.aic => {
                steps.push(StepRecord { action, terms: next.clone(), aic: m.aic.as_f64() });
                current = next;
                model = m;
            }
            _ => break,
        }
    }
    Ok(StepwiseResult { model, terms: current, steps })
}
