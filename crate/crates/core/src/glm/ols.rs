use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{ProError, Result};
use crate::scalar::Real;

/// Simple linear regression `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsFit<T> {
    pub slope: T,
    pub intercept: T,
    pub slope_se: T,
    /// Two-sided t-test of `slope = 0` on `n - 2` degrees of freedom.
    pub slope_p_value: T,
    pub n: usize,
}

pub fn ols_slope<T: Real>(points: &[(T, T)]) -> Result<OlsFit<T>> {
    let n = points.len();
    if n < 3 {
        return Err(ProError::Domain(format!("ols_slope needs at least 3 points, got {n}")));
    }
    let nt = T::from_count(n);
    let mx = points.iter().map(|p| p.0).sum::<T>() / nt;
    let my = points.iter().map(|p| p.1).sum::<T>() / nt;
    let sxx: T = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > T::zero()) {
        return Err(ProError::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: T = points
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum();
    let df = n - 2;
    let slope_se = (rss / T::from_count(df) / sxx).sqrt();
    let p = if slope_se > T::zero() {
        let t = (slope / slope_se).as_f64().abs();
        let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
        2.0 * dist.sf(t)
    } else if slope == T::zero() {
        1.0
    } else {
        0.0
    };
    Ok(OlsFit { slope, intercept, slope_se, slope_p_value: T::lit(p), n })
}
