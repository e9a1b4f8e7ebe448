use crate::error::{ProError, Result};
use crate::scalar::Real;

/// Extremes of the squared-gap sum `L(a) = sum a_j^2` over non-negative
/// integer gaps `a_1..a_K` summing to `M`.
///
/// `M` is the span `t - t_ddagger` and `K` the number of flashes in
/// `[t_ddagger, t - 1]`. Permutations of a configuration tie; the reported
/// arguments are the canonical descending arrangement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SfExtremum {
    pub m: u64,
    pub k: u64,
    pub max_value: u64,
    pub min_value: u64,
    pub argmax: Vec<u64>,
    pub argmin: Vec<u64>,
}

impl SfExtremum {
    /// SF value at the maximising configuration.
    pub fn sf_max<T: Real>(&self) -> T {
        super::sf_value(self.max_value)
    }

    pub fn sf_min<T: Real>(&self) -> T {
        super::sf_value(self.min_value)
    }

    /// Number of parts equal to `floor(M / K)` in the minimiser.
    pub fn floor_parts(&self) -> u64 {
        self.k * self.m.div_ceil(self.k) - self.m
    }
}

pub fn sf_extrema(m: u64, k: u64) -> Result<SfExtremum> {
    if k == 0 || k > m {
        return Err(ProError::Domain(format!("sf_extrema needs 1 <= K <= M, got M={m}, K={k}")));
    }
    let k_len = usize::try_from(k).map_err(|_| ProError::Domain(format!("K={k} too large")))?;
    let mut argmax = vec![0u64; k_len];
    argmax[0] = m;

    let q = m / k;
    let r = m % k;
    // r parts of q+1, the rest q
    let argmin: Vec<u64> = (0..k).map(|j| if j < r { q + 1 } else { q }).collect();
    let min_value = r * (q + 1) * (q + 1) + (k - r) * q * q;

    Ok(SfExtremum { m, k, max_value: m * m, min_value, argmax, argmin })
}
