//! Dense symmetric positive-definite solves for the small systems IRLS needs.

use crate::scalar::Real;

/// Lower-triangular Cholesky factor of a row-major `n x n` SPD matrix.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Returns `None` when the matrix is not numerically positive definite.
    pub(crate) fn new(a: &[T], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![T::zero(); n * n];
        // relative pivot floor guards against near-collinear columns
        let scale = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max);
        let floor = scale * T::epsilon() * T::lit(16.0);
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            if !(d > floor) {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(Self { n, l })
    }

    pub(crate) fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for (&l, &yk) in self.l[i * n..i * n + i].iter().zip(&y[..i]) {
                s = s - l * yk;
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for (k, &yk) in y.iter().enumerate().skip(i + 1) {
                s = s - self.l[k * n + i] * yk;
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Row-major inverse of the factored matrix.
    pub(crate) fn inverse(&self) -> Vec<T> {
        let n = self.n;
        let mut inv = vec![T::zero(); n * n];
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_and_inverts_spd() {
        let a = [4.0, 2.0, 0.6, 2.0, 2.0, 0.5, 0.6, 0.5, 3.0f64];
        let ch = Cholesky::new(&a, 3).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|k| a[i * 3 + k] * x[k]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let inv = ch.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_singular() {
        let a = [1.0, 2.0, 2.0, 4.0f64];
        assert!(Cholesky::new(&a, 2).is_none());
        assert!(Cholesky::new(&[-1.0f64], 1).is_none());
    }
}
