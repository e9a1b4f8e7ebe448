//! Maximum-likelihood logistic regression by iteratively reweighted least
//! squares (Newton scoring; the logit link is canonical, so the observed and
//! expected information coincide).

use super::linalg::Cholesky;
use super::{normal_two_sided_p, FittedModel, Separation};
use crate::error::{ProError, Result};
use crate::pointproc::DesignMatrix;
use crate::scalar::{log1p_exp, logistic, Real};

/// Absolute score tolerance for `f64` fits; lower-precision scalars use
/// `n * eps * 1e3` when that is larger.
pub const SCORE_TOL: f64 = 1e-7;

/// A coefficient larger than this whose standard error exceeds 100 times its
/// magnitude marks a direction along which the likelihood keeps increasing.
/// Beyond it, a singular information matrix is attributed to saturated
/// weights rather than collinearity.
pub const DIVERGENT_COEF: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Relative deviance change `|D_old - D_new| / (|D_new| + 0.1)` below
    /// which the iteration stops.
    pub deviance_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { deviance_tol: 1e-8, max_iter: 50, max_halvings: 30 }
    }
}

/// Bernoulli deviance `-2 log L` of the linear predictor `eta`.
pub fn deviance<T: Real>(design: &DesignMatrix<T>, beta: &[T]) -> T {
    design
        .rows()
        .zip(design.responses())
        .map(|(x, &y)| {
            let eta = dot(x, beta);
            let ll = if y { eta - log1p_exp(eta) } else { -log1p_exp(eta) };
            -ll
        })
        .sum::<T>()
        * T::lit(2.0)
}

/// Gradient of the log-likelihood, `X^T (y - p)`.
pub fn score<T: Real>(design: &DesignMatrix<T>, beta: &[T]) -> Vec<T> {
    let c = design.n_cols();
    let mut g = vec![T::zero(); c];
    for (x, &y) in design.rows().zip(design.responses()) {
        let r = indicator::<T>(y) - logistic(dot(x, beta));
        for (gj, &xj) in g.iter_mut().zip(x) {
            *gj = *gj + r * xj;
        }
    }
    g
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn indicator<T: Real>(y: bool) -> T {
    if y {
        T::one()
    } else {
        T::zero()
    }
}

/// Score vector and information matrix `X^T W X` at `beta`.
fn score_and_information<T: Real>(design: &DesignMatrix<T>, beta: &[T]) -> (Vec<T>, Vec<T>) {
    let c = design.n_cols();
    let mut g = vec![T::zero(); c];
    let mut h = vec![T::zero(); c * c];
    for (x, &y) in design.rows().zip(design.responses()) {
        let p = logistic(dot(x, beta));
        let w = p * (T::one() - p);
        let r = indicator::<T>(y) - p;
        for i in 0..c {
            g[i] = g[i] + r * x[i];
            let wxi = w * x[i];
            for j in 0..=i {
                h[i * c + j] = h[i * c + j] + wxi * x[j];
            }
        }
    }
    for i in 0..c {
        for j in 0..i {
            h[j * c + i] = h[i * c + j];
        }
    }
    (g, h)
}

fn null_deviance<T: Real>(n: usize, n_pos: usize) -> T {
    let n_t = T::from_count(n);
    let pos = T::from_count(n_pos);
    let neg = n_t - pos;
    let p = pos / n_t;
    -T::lit(2.0) * (pos * p.ln() + neg * (T::one() - p).ln())
}

pub fn fit_logistic<T: Real>(design: &DesignMatrix<T>) -> Result<FittedModel<T>> {
    fit_logistic_with(design, &FitOptions::default())
}

pub fn fit_logistic_with<T: Real>(design: &DesignMatrix<T>, opts: &FitOptions) -> Result<FittedModel<T>> {
    let n = design.n_rows();
    if n == 0 {
        return Err(ProError::EmptyDesign);
    }
    let n_pos = design.responses().iter().filter(|&&y| y).count();
    if n_pos == 0 || n_pos == n {
        return Err(ProError::DegenerateResponse { n, value: u8::from(n_pos == n) });
    }
    let c = design.n_cols();
    let tol = T::lit(opts.deviance_tol).max(T::epsilon() * T::lit(8.0));
    let grad_tol = T::lit(SCORE_TOL).max(T::from_count(n) * T::epsilon() * T::lit(1e3));

    let mut beta = vec![T::zero(); c];
    let ybar = T::from_count(n_pos) / T::from_count(n);
    beta[0] = (ybar / (T::one() - ybar)).ln();
    let mut dev = deviance(design, &beta);
    let mut rel_change = T::infinity();
    let mut converged = false;
    let mut iterations = 0;
    let mut path = vec![dev];

    loop {
        let (g, h) = score_and_information(design, &beta);
        let small_score = max_abs(&g) <= grad_tol;
        if rel_change < tol && small_score {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let Some(chol) = Cholesky::new(&h, c) else {
            // weights underflow once fitted probabilities saturate
            if max_abs(&beta) > T::lit(DIVERGENT_COEF) {
                break;
            }
            return Err(ProError::Singular);
        };
        let delta = chol.solve(&g);

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<T> = beta.iter().zip(&delta).map(|(&b, &d)| b + step * d).collect();
            let cand_dev = deviance(design, &cand);
            // equality within rounding counts as progress at the optimum
            if cand_dev.is_finite() && cand_dev <= dev + dev.abs() * T::epsilon() * T::lit(4.0) {
                accepted = Some((cand, cand_dev));
                break;
            }
            step = step / T::lit(2.0);
        }
        iterations += 1;
        match accepted {
            Some((b, d)) => {
                rel_change = (dev - d).abs() / (d.abs() + T::lit(0.1));
                beta = b;
                dev = d;
                path.push(d);
            }
            None => {
                // no descent direction left: converged iff already at a stationary point
                converged = rel_change < tol && small_score;
                break;
            }
        }
    }

    let max_coef = max_abs(&beta);
    let big = T::lit(DIVERGENT_COEF);
    let (_, h) = score_and_information(design, &beta);
    let se: Vec<T> = match Cholesky::new(&h, c) {
        Some(chol) => {
            let cov = chol.inverse();
            (0..c).map(|i| cov[i * c + i].max(T::zero()).sqrt()).collect()
        }
        None if max_coef > big => vec![T::infinity(); c],
        None => return Err(ProError::Singular),
    };

    let mut warnings = Vec::new();
    // every fitted probability within sqrt(eps) of its label
    let saturated = -T::epsilon().sqrt().ln();
    let min_margin = design
        .rows()
        .zip(design.responses())
        .map(|(x, &y)| if y { dot(x, &beta) } else { -dot(x, &beta) })
        .fold(T::infinity(), T::min);
    let divergent =
        beta.iter().zip(&se).any(|(&b, &s)| b.abs() > T::lit(DIVERGENT_COEF) && !(s < T::lit(100.0) * b.abs()));
    let separation = if min_margin > saturated {
        Separation::Complete
    } else if divergent {
        Separation::QuasiComplete
    } else {
        Separation::None
    };
    match separation {
        Separation::Complete => {
            converged = false;
            warnings.push(format!(
                "complete separation: every response is fitted with probability 0 or 1 (max |coefficient| = {max_coef})"
            ));
        }
        Separation::QuasiComplete => warnings.push(format!(
            "quasi-complete separation: fitted probabilities numerically 0 or 1 occurred (max |coefficient| = {max_coef})"
        )),
        Separation::None => {}
    }
    if !converged && separation != Separation::Complete {
        warnings.push(format!("IRLS did not converge in {iterations} iterations"));
    }

    let z: Vec<T> = beta.iter().zip(&se).map(|(&b, &s)| b / s).collect();
    let p: Vec<T> = z.iter().map(|&zv| T::lit(normal_two_sided_p(zv.as_f64()))).collect();
    let null_dev = null_deviance::<T>(n, n_pos);

    Ok(FittedModel {
        term_names: design.column_names(),
        coefficients: beta,
        standard_errors: se,
        z_values: z,
        p_values: p,
        null_deviance: null_dev,
        residual_deviance: dev,
        null_df: n - 1,
        residual_df: n.saturating_sub(c),
        aic: dev + T::from_count(2 * c),
        converged,
        iterations,
        n_obs: n,
        warnings,
        separation,
        deviance_path: path,
    })
}
