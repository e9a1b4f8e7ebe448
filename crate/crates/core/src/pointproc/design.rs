use std::fmt;
use std::str::FromStr;

use super::{cf_value, pf_value, sf_value, Dataset, DdaggerRule, Sweep, BIN_MS};
use crate::error::{ProError, Result};
use crate::scalar::Real;

/// A monomial `PF^a * CF^b * SF^c` with total degree at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pub pf: u8,
    pub cf: u8,
    pub sf: u8,
}

impl Term {
    pub const PF: Term = Term { pf: 1, cf: 0, sf: 0 };
    pub const CF: Term = Term { pf: 0, cf: 1, sf: 0 };
    pub const SF: Term = Term { pf: 0, cf: 0, sf: 1 };
    pub const CF_SF: Term = Term { pf: 0, cf: 1, sf: 1 };

    pub fn new(pf: u8, cf: u8, sf: u8) -> Result<Self> {
        let t = Term { pf, cf, sf };
        if t.degree() == 0 {
            return Err(ProError::Domain("a model term needs total degree >= 1".into()));
        }
        Ok(t)
    }

    pub fn degree(&self) -> u32 {
        u32::from(self.pf) + u32::from(self.cf) + u32::from(self.sf)
    }

    /// The four-term model `PF + CF + SF + CF*SF`.
    pub fn pro_model() -> Vec<Term> {
        vec![Term::PF, Term::CF, Term::SF, Term::CF_SF]
    }

    /// Every monomial of total degree `1..=max_degree`, ordered by degree and
    /// then by decreasing PF, CF exponents (19 terms at degree 3).
    pub fn all_up_to(max_degree: u8) -> Vec<Term> {
        let mut out = Vec::new();
        for d in 1..=max_degree {
            for pf in (0..=d).rev() {
                for cf in (0..=d - pf).rev() {
                    out.push(Term { pf, cf, sf: d - pf - cf });
                }
            }
        }
        out
    }

    pub fn parse_list(s: &str) -> Result<Vec<Term>> {
        s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()).map(str::parse).collect()
    }

    pub fn eval<T: Real>(&self, pf: T, cf: T, sf: T) -> T {
        pf.powi(i32::from(self.pf)) * cf.powi(i32::from(self.cf)) * sf.powi(i32::from(self.sf))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, e) in [("PF", self.pf), ("CF", self.cf), ("SF", self.sf)] {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            f.write_str(name)?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Term {
    type Err = ProError;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || ProError::UnknownTerm(s.to_string());
        let mut t = Term { pf: 0, cf: 0, sf: 0 };
        for factor in s.split(['*', ':', '×', '·']) {
            let factor = factor.trim();
            let (base, exp) = match factor.split_once('^') {
                Some((b, e)) => (b.trim(), e.trim().parse::<u8>().map_err(|_| unknown())?),
                None => (factor, 1),
            };
            let slot = match base.to_ascii_uppercase().as_str() {
                "PF" => &mut t.pf,
                "CF" => &mut t.cf,
                "SF" => &mut t.sf,
                _ => return Err(unknown()),
            };
            *slot = slot.checked_add(exp).ok_or_else(unknown)?;
        }
        if t.degree() == 0 {
            return Err(unknown());
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub sweep_id: u64,
    pub t: usize,
}

/// PF/CF/SF at one valid bin together with the observed spike indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow<T> {
    pub sweep_id: u64,
    pub t: usize,
    pub pf: T,
    pub cf: T,
    pub sf: T,
    pub response: bool,
}

/// Per-sweep prefix tables that make every bin's features O(1).
struct SweepScan {
    /// flash positions in increasing order
    pos: Vec<usize>,
    /// `count[i]` = number of flashes in `[0, i)`
    count: Vec<usize>,
    /// `gap_sq[k]` = sum of squared gaps between consecutive flashes `0..=k`
    gap_sq: Vec<u64>,
}

impl SweepScan {
    fn new(sweep: &Sweep) -> Self {
        let pos: Vec<usize> = sweep.flashes().iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect();
        let mut count = Vec::with_capacity(sweep.len() + 1);
        count.push(0);
        for &f in sweep.flashes() {
            count.push(count.last().unwrap() + usize::from(f));
        }
        let mut gap_sq = Vec::with_capacity(pos.len());
        for (k, &p) in pos.iter().enumerate() {
            let prev = if k == 0 { 0 } else { gap_sq[k - 1] + ((p - pos[k - 1]) as u64).pow(2) };
            gap_sq.push(prev);
        }
        Self { pos, count, gap_sq }
    }
}

/// Computes the feature rows of every bin whose three markers are defined.
/// Returns the rows and the number of excluded bins.
pub fn feature_rows<T: Real>(data: &Dataset, rule: DdaggerRule) -> Result<(Vec<FeatureRow<T>>, usize)> {
    let mut rows = Vec::new();
    let mut excluded = 0usize;
    for sweep in data.sweeps() {
        if sweep.bin_ms() != BIN_MS {
            return Err(ProError::Domain(format!(
                "sweep {} uses {} ms bins; the response functions are defined on {BIN_MS} ms bins",
                sweep.id(),
                sweep.bin_ms()
            )));
        }
        let scan = SweepScan::new(sweep);
        let flashes = sweep.flashes();
        let spikes = sweep.spikes();
        let mut last_spike: Option<usize> = None;
        let mut last_flash: Option<usize> = None;
        let mut ddagger: Option<usize> = None;
        for t in 0..sweep.len() {
            let flash_before_t = last_flash;
            if flashes[t] {
                last_flash = Some(t);
            }
            match (last_spike, last_flash, ddagger) {
                (Some(ts), Some(td), Some(tdd)) => {
                    let pf = pf_value::<T>(t - td);
                    let cf = cf_value::<T>(scan.count[t + 1] - scan.count[ts]);
                    // tdd <= ts < t, so at least one flash lies in [tdd, t-1]
                    let k_dd = scan.count[tdd];
                    let k_last = scan.count[t] - 1;
                    let lead = (t - scan.pos[k_last]) as u64;
                    let sum = lead * lead + scan.gap_sq[k_last] - scan.gap_sq[k_dd];
                    rows.push(FeatureRow {
                        sweep_id: sweep.id(),
                        t,
                        pf,
                        cf,
                        sf: sf_value::<T>(sum),
                        response: spikes[t],
                    });
                }
                _ => excluded += 1,
            }
            if spikes[t] {
                last_spike = Some(t);
                ddagger = match rule {
                    DdaggerRule::Inclusive => last_flash,
                    DdaggerRule::Strict => flash_before_t,
                };
            }
        }
    }
    Ok((rows, excluded))
}

/// Row-major design with a leading intercept column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    names: Vec<String>,
    x: Vec<T>,
    y: Vec<bool>,
    keys: Vec<RowKey>,
    excluded: usize,
}

pub const INTERCEPT: &str = "(Intercept)";

impl<T: Real> DesignMatrix<T> {
    /// Builds a design from explicit predictor rows (intercept added).
    pub fn from_rows(names: Vec<String>, rows: &[Vec<T>], responses: Vec<bool>) -> Result<Self> {
        if rows.len() != responses.len() {
            return Err(ProError::LengthMismatch(rows.len(), responses.len()));
        }
        let p = names.len();
        let mut x = Vec::with_capacity(rows.len() * (p + 1));
        for r in rows {
            if r.len() != p {
                return Err(ProError::LengthMismatch(r.len(), p));
            }
            x.push(T::one());
            x.extend_from_slice(r);
        }
        let keys = (0..rows.len()).map(|t| RowKey { sweep_id: 0, t }).collect();
        Ok(Self { names, x, y: responses, keys, excluded: 0 })
    }

    pub fn from_features(rows: &[FeatureRow<T>], terms: &[Term], excluded: usize) -> Self {
        let p = terms.len();
        let mut x = Vec::with_capacity(rows.len() * (p + 1));
        for r in rows {
            x.push(T::one());
            x.extend(terms.iter().map(|term| term.eval(r.pf, r.cf, r.sf)));
        }
        Self {
            names: terms.iter().map(Term::to_string).collect(),
            x,
            y: rows.iter().map(|r| r.response).collect(),
            keys: rows.iter().map(|r| RowKey { sweep_id: r.sweep_id, t: r.t }).collect(),
            excluded,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    /// Number of columns including the intercept.
    pub fn n_cols(&self) -> usize {
        self.names.len() + 1
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.n_cols();
        &self.x[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.x.chunks_exact(self.n_cols())
    }

    pub fn responses(&self) -> &[bool] {
        &self.y
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    /// Predictor names, excluding the intercept.
    pub fn predictor_names(&self) -> &[String] {
        &self.names
    }

    /// Column names including the leading intercept.
    pub fn column_names(&self) -> Vec<String> {
        std::iter::once(INTERCEPT.to_string()).chain(self.names.iter().cloned()).collect()
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded
    }

    /// Reorders rows by `perm` (a permutation of `0..n_rows`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let c = self.n_cols();
        let mut x = Vec::with_capacity(self.x.len());
        for &i in perm {
            x.extend_from_slice(&self.x[i * c..(i + 1) * c]);
        }
        Self {
            names: self.names.clone(),
            x,
            y: perm.iter().map(|&i| self.y[i]).collect(),
            keys: perm.iter().map(|&i| self.keys[i]).collect(),
            excluded: self.excluded,
        }
    }
}

pub fn build_design<T: Real>(data: &Dataset, terms: &[Term]) -> Result<DesignMatrix<T>> {
    build_design_with(data, terms, DdaggerRule::Inclusive)
}

pub fn build_design_with<T: Real>(data: &Dataset, terms: &[Term], rule: DdaggerRule) -> Result<DesignMatrix<T>> {
    if let Some(t) = terms.iter().find(|t| t.degree() == 0) {
        return Err(ProError::UnknownTerm(format!("{t:?}")));
    }
    let (rows, excluded) = feature_rows::<T>(data, rule)?;
    Ok(DesignMatrix::from_features(&rows, terms, excluded))
}
