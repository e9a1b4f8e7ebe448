//! Binned point-process data and the flash-response functions.
//!
//! A [`Sweep`] is one trial: two aligned binary sequences (flash, spike) on
//! a 5 ms grid. History never crosses a sweep boundary. For a bin `t` the
//! three history markers are
//!
//! * `t_star`: last spike strictly before `t`,
//! * `t_dagger`: last flash at or before `t`,
//! * `t_ddagger`: last flash at or before `t_star`.
//!
//! The post-flash (PF), cumulative-flash (CF) and spread-flash (SF) values
//! are functions of these markers and the flashes in between.

mod design;
mod extrema;

pub use design::{build_design, build_design_with, feature_rows, DesignMatrix, FeatureRow, RowKey, Term, INTERCEPT};
pub use extrema::{sf_extrema, SfExtremum};

use crate::error::{ProError, Result};
use crate::scalar::Real;

/// Bin width of the recording grid in milliseconds.
pub const BIN_MS: f64 = 5.0;

/// One trial of paired flash/spike indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    id: u64,
    flashes: Vec<bool>,
    spikes: Vec<bool>,
    bin_ms: f64,
}

impl Sweep {
    pub fn new(id: u64, flashes: Vec<bool>, spikes: Vec<bool>) -> Result<Self> {
        Self::with_bin_ms(id, flashes, spikes, BIN_MS)
    }

    pub fn with_bin_ms(id: u64, flashes: Vec<bool>, spikes: Vec<bool>, bin_ms: f64) -> Result<Self> {
        if flashes.is_empty() {
            return Err(ProError::InvalidSweep(format!("sweep {id} is empty")));
        }
        if flashes.len() != spikes.len() {
            return Err(ProError::InvalidSweep(format!(
                "sweep {id}: {} flash bins but {} spike bins",
                flashes.len(),
                spikes.len()
            )));
        }
        if !(bin_ms.is_finite() && bin_ms > 0.0) {
            return Err(ProError::InvalidSweep(format!("sweep {id}: bin width {bin_ms} ms")));
        }
        Ok(Self { id, flashes, spikes, bin_ms })
    }

    /// Builds a sweep from 0/1 integer sequences; any other value is rejected.
    pub fn from_indicators(id: u64, flashes: &[u8], spikes: &[u8]) -> Result<Self> {
        let conv = |v: &[u8], what: &str| -> Result<Vec<bool>> {
            v.iter()
                .enumerate()
                .map(|(i, &x)| match x {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(ProError::InvalidSweep(format!(
                        "sweep {id}: {what} at bin {i} is {other}, expected 0 or 1"
                    ))),
                })
                .collect()
        };
        Self::new(id, conv(flashes, "flash")?, conv(spikes, "spike")?)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn len(&self) -> usize {
        self.flashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flashes.is_empty()
    }

    pub fn bin_ms(&self) -> f64 {
        self.bin_ms
    }

    pub fn flashes(&self) -> &[bool] {
        &self.flashes
    }

    pub fn spikes(&self) -> &[bool] {
        &self.spikes
    }

    pub fn flash_count(&self) -> usize {
        self.flashes.iter().filter(|&&f| f).count()
    }

    pub fn spike_count(&self) -> usize {
        self.spikes.iter().filter(|&&s| s).count()
    }

    /// Splits into `[0, at)` and `[at, len)`; the halves get ids `id_left`
    /// and `id_right` and each starts with an empty history.
    pub fn split_at(&self, at: usize, id_left: u64, id_right: u64) -> Result<(Sweep, Sweep)> {
        if at == 0 || at >= self.len() {
            return Err(ProError::IndexOutOfRange { index: at, len: self.len() });
        }
        let left = Sweep::with_bin_ms(id_left, self.flashes[..at].to_vec(), self.spikes[..at].to_vec(), self.bin_ms)?;
        let right = Sweep::with_bin_ms(id_right, self.flashes[at..].to_vec(), self.spikes[at..].to_vec(), self.bin_ms)?;
        Ok((left, right))
    }

    fn check_index(&self, t: usize) -> Result<()> {
        if t >= self.len() {
            Err(ProError::IndexOutOfRange { index: t, len: self.len() })
        } else {
            Ok(())
        }
    }
}

/// Ordered collection of sweeps sharing one bin width.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    sweeps: Vec<Sweep>,
}

impl Dataset {
    pub fn new(sweeps: Vec<Sweep>) -> Result<Self> {
        let mut ids = std::collections::HashSet::new();
        for s in &sweeps {
            if !ids.insert(s.id) {
                return Err(ProError::InvalidDataset(format!("duplicate sweep id {}", s.id)));
            }
        }
        if let Some(first) = sweeps.first() {
            if let Some(bad) = sweeps.iter().find(|s| s.bin_ms != first.bin_ms) {
                return Err(ProError::InvalidDataset(format!(
                    "sweep {} has bin width {} ms, sweep {} has {} ms",
                    bad.id, bad.bin_ms, first.id, first.bin_ms
                )));
            }
        }
        Ok(Self { sweeps })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(sweep: Sweep) -> Self {
        Self { sweeps: vec![sweep] }
    }

    pub fn sweeps(&self) -> &[Sweep] {
        &self.sweeps
    }

    pub fn is_empty(&self) -> bool {
        self.sweeps.is_empty()
    }

    pub fn total_bins(&self) -> usize {
        self.sweeps.iter().map(Sweep::len).sum()
    }

    /// Keeps the sweeps whose id satisfies `keep`, preserving order.
    pub fn select(&self, mut keep: impl FnMut(u64) -> bool) -> Dataset {
        Dataset { sweeps: self.sweeps.iter().filter(|s| keep(s.id)).cloned().collect() }
    }
}

/// How the last flash before the last spike treats a flash in the spike's own bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DdaggerRule {
    /// `t_ddagger <= t_star`: a same-bin flash precedes the spike.
    #[default]
    Inclusive,
    /// `t_ddagger < t_star`.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HistoryMarkers {
    pub t_star: Option<usize>,
    pub t_dagger: Option<usize>,
    pub t_ddagger: Option<usize>,
}

impl HistoryMarkers {
    pub fn all_defined(&self) -> bool {
        self.t_star.is_some() && self.t_dagger.is_some() && self.t_ddagger.is_some()
    }
}

fn last_true_in(seq: &[bool], upto_inclusive: usize) -> Option<usize> {
    seq[..=upto_inclusive].iter().rposition(|&b| b)
}

pub fn history_markers(sweep: &Sweep, t: usize) -> Result<HistoryMarkers> {
    history_markers_with(sweep, t, DdaggerRule::Inclusive)
}

pub fn history_markers_with(sweep: &Sweep, t: usize, rule: DdaggerRule) -> Result<HistoryMarkers> {
    sweep.check_index(t)?;
    let t_star = if t == 0 { None } else { last_true_in(&sweep.spikes, t - 1) };
    let t_dagger = last_true_in(&sweep.flashes, t);
    let t_ddagger = t_star.and_then(|ts| match rule {
        DdaggerRule::Inclusive => last_true_in(&sweep.flashes, ts),
        DdaggerRule::Strict if ts == 0 => None,
        DdaggerRule::Strict => last_true_in(&sweep.flashes, ts - 1),
    });
    Ok(HistoryMarkers { t_star, t_dagger, t_ddagger })
}

/// Post-flash response `log(1 + t - t_dagger)`.
pub fn response_pf<T: Real>(sweep: &Sweep, t: usize) -> Result<T> {
    let m = history_markers(sweep, t)?;
    let td = m.t_dagger.ok_or(ProError::MarkerUndefined { marker: "t_dagger", t })?;
    Ok(pf_value(t - td))
}

/// Cumulative-flash response `log(1 + #flashes in [t_star, t])`.
pub fn response_cf<T: Real>(sweep: &Sweep, t: usize) -> Result<T> {
    let m = history_markers(sweep, t)?;
    let ts = m.t_star.ok_or(ProError::MarkerUndefined { marker: "t_star", t })?;
    let count = sweep.flashes[ts..=t].iter().filter(|&&f| f).count();
    Ok(cf_value(count))
}

/// Spread-flash response: `log(log(1 + sum of squared gaps))` over the
/// flashes in `[t_ddagger, t - 1]`, walking back from `t`.
pub fn response_sf<T: Real>(sweep: &Sweep, t: usize) -> Result<T> {
    response_sf_with(sweep, t, DdaggerRule::Inclusive)
}

pub fn response_sf_with<T: Real>(sweep: &Sweep, t: usize, rule: DdaggerRule) -> Result<T> {
    let m = history_markers_with(sweep, t, rule)?;
    let tdd = m.t_ddagger.ok_or(ProError::MarkerUndefined { marker: "t_ddagger", t })?;
    let mut prev = t;
    let mut sum: u64 = 0;
    for tau in (tdd..t).rev() {
        if sweep.flashes[tau] {
            let gap = (prev - tau) as u64;
            sum += gap * gap;
            prev = tau;
        }
    }
    Ok(sf_value(sum))
}

pub(crate) fn pf_value<T: Real>(since_flash: usize) -> T {
    T::from_count(since_flash).ln_1p()
}

pub(crate) fn cf_value<T: Real>(count: usize) -> T {
    T::from_count(count).ln_1p()
}

pub(crate) fn sf_value<T: Real>(squared_gap_sum: u64) -> T {
    T::from_u64(squared_gap_sum).expect("gap sum representable").ln_1p().ln()
}
