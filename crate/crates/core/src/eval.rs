//! Out-of-sample scoring: ROC curves, AUC and the train/test protocol.

use std::cmp::Ordering;

use crate::error::{ProError, Result};
use crate::glm::{fit_logistic, predict_prob, FittedModel};
use crate::pointproc::{build_design, Dataset, Term, INTERCEPT};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct RocPoint<T> {
    /// Scores `>= threshold` are called positive. The first point uses `+inf`.
    pub threshold: T,
    pub fpr: T,
    pub tpr: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve<T> {
    pub points: Vec<RocPoint<T>>,
    pub auc: T,
    pub n_pos: usize,
    pub n_neg: usize,
}

fn class_counts<T: Real>(scores: &[T], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(ProError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(ProError::Domain("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ProError::DegenerateLabels);
    }
    Ok((n_pos, n_neg))
}

/// ROC curve with one point per distinct score; tied scores move the curve
/// diagonally in a single step. AUC by the trapezoidal rule.
pub fn roc_curve<T: Real>(scores: &[T], labels: &[bool]) -> Result<RocCurve<T>> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));

    let (pos_t, neg_t) = (T::from_count(n_pos), T::from_count(n_neg));
    let mut points = vec![RocPoint { threshold: T::infinity(), fpr: T::zero(), tpr: T::zero() }];
    let (mut tp, mut fp) = (0usize, 0usize);
    // twice the area in count units, an exact integer
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - fp0) as u128) * ((tp + tp0) as u128);
        points.push(RocPoint { threshold: s, fpr: T::from_count(fp) / neg_t, tpr: T::from_count(tp) / pos_t });
    }
    let auc = T::lit(area2 as f64 / 2.0) / (pos_t * neg_t);
    Ok(RocCurve { points, auc, n_pos, n_neg })
}

/// Mann-Whitney AUC: the fraction of positive/negative pairs ranked
/// correctly, ties counting one half. Computed from mid-ranks.
pub fn auc_score<T: Real>(scores: &[T], labels: &[bool]) -> Result<T> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // twice the positive rank sum, so mid-ranks stay integral
    let mut rank2_pos: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j share the mid-rank (i + 1 + j) / 2
        let mid2 = (i + 1 + j) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        rank2_pos += mid2 * pos_in_group;
        i = j;
    }
    let p = n_pos as u128;
    let u2 = rank2_pos - p * (p + 1);
    Ok(T::lit(u2 as f64 / 2.0) / (T::from_count(n_pos) * T::from_count(n_neg)))
}

#[derive(Debug, Clone)]
pub struct TrainTestResult<T> {
    pub model: FittedModel<T>,
    pub auc: T,
    pub roc: RocCurve<T>,
    /// Test bins without defined history markers (not scored).
    pub n_excluded: usize,
    pub n_scored: usize,
}

/// Fits on `train` and scores every valid bin of `test` one step ahead,
/// using the test data's own observed history.
pub fn train_test_evaluate<T: Real>(train: &Dataset, test: &Dataset, terms: &[Term]) -> Result<TrainTestResult<T>> {
    let model = fit_logistic(&build_design::<T>(train, terms)?)?;
    evaluate_model(model, test, terms)
}

pub fn evaluate_model<T: Real>(model: FittedModel<T>, test: &Dataset, terms: &[Term]) -> Result<TrainTestResult<T>> {
    let design = build_design::<T>(test, terms)?;
    let probs = predict_prob(&model, &design)?;
    let roc = roc_curve(&probs, design.responses())?;
    Ok(TrainTestResult { auc: roc.auc, roc, model, n_excluded: design.excluded_count(), n_scored: design.n_rows() })
}

/// Model terms recovered from a fitted model's column names.
pub fn model_terms<T>(model: &FittedModel<T>) -> Result<Vec<Term>> {
    match model.term_names.split_first() {
        Some((first, rest)) if first == INTERCEPT => rest.iter().map(|n| n.parse()).collect(),
        _ => Err(ProError::SchemaMismatch { model: model.term_names.clone(), design: vec![INTERCEPT.to_string()] }),
    }
}

/// Probability for one bin; `None` where the history markers are undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinPrediction<T> {
    pub sweep_id: u64,
    pub t: usize,
    pub prob: Option<T>,
}

/// One-step-ahead spike probability for every bin of every sweep.
pub fn predict_bins<T: Real>(model: &FittedModel<T>, data: &Dataset) -> Result<Vec<BinPrediction<T>>> {
    let terms = model_terms(model)?;
    let design = build_design::<T>(data, &terms)?;
    let probs = predict_prob(model, &design)?;
    let mut scored = design.keys().iter().zip(probs).peekable();
    let mut out = Vec::with_capacity(data.total_bins());
    for sweep in data.sweeps() {
        for t in 0..sweep.len() {
            let prob = match scored.peek() {
                Some((k, _)) if k.sweep_id == sweep.id() && k.t == t => scored.next().map(|(_, p)| p),
                _ => None,
            };
            out.push(BinPrediction { sweep_id: sweep.id(), t, prob });
        }
    }
    Ok(out)
}
