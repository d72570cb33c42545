//! Cyclic Jacobi eigendecomposition and projection onto the PSD cone.
//!
//! Written against [`Real`] so the same routine serves binary64 and
//! double-double runs.

use thiserror::Error;

use super::dense::SymDense;
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("Jacobi eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix contains nonfinite values")]
    NonFinite,
}

/// Eigenvalues and column eigenvectors (`vectors[l * n + r]` is entry `r` of
/// eigenvector `l`).
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<T>,
}

impl<T: Real> SymEigen<T> {
    pub fn vector(&self, l: usize) -> &[T] {
        let n = self.values.len();
        &self.vectors[l * n..(l + 1) * n]
    }
}

pub fn sym_eigen<T: Real>(m: &SymDense<T>) -> Result<SymEigen<T>, EigenError> {
    let n = m.order();
    let mut a: Vec<T> = m.as_slice().to_vec();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    // v[l * n + r]: eigenvector l stored contiguously.
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let total_sq = a.iter().fold(T::zero(), |acc, &x| acc + x * x);
    let eps = T::epsilon();
    let threshold = eps * eps * total_sq;
    let two = T::from_f64(2.0);
    let one = T::one();

    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                let x = a[p * n + q];
                off += x * x;
            }
        }
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // Skip rotations that cannot change the diagonal.
                if apq.abs() <= eps * eps * (app.abs() + aqq.abs()) {
                    a[p * n + q] = T::zero();
                    a[q * n + p] = T::zero();
                    continue;
                }
                let theta = (aqq - app) / (two * apq);
                let t = if theta.abs() > T::from_f64(1e60) {
                    one / (two * theta)
                } else {
                    let s = if theta >= T::zero() { one } else { -one };
                    s / (theta.abs() + (theta * theta + one).sqrt())
                };
                let c = one / (t * t + one).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[p * n + r];
                    let aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
                for r in 0..n {
                    let vp = v[p * n + r];
                    let vq = v[q * n + r];
                    v[p * n + r] = c * vp - s * vq;
                    v[q * n + r] = s * vp + c * vq;
                }
            }
        }
    }
    if !converged {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off > threshold {
            return Err(EigenError::NoConvergence(MAX_SWEEPS));
        }
    }
    let values = (0..n).map(|i| a[i * n + i]).collect();
    Ok(SymEigen { values, vectors: v })
}

/// Euclidean projection onto the PSD cone: negative eigenvalues are zeroed.
pub fn project_psd<T: Real>(m: &SymDense<T>) -> Result<SymDense<T>, EigenError> {
    let n = m.order();
    let eig = sym_eigen(m)?;
    let mut z = SymDense::zeros(n);
    for (l, &lambda) in eig.values.iter().enumerate() {
        if lambda <= T::zero() {
            continue;
        }
        let u = eig.vector(l);
        for i in 0..n {
            let li = lambda * u[i];
            for j in i..n {
                let val = z.get(i, j) + li * u[j];
                z.set(i, j, val);
            }
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::DoubleDouble;

    fn dense(rows: &[&[f64]]) -> SymDense<f64> {
        SymDense::from_fn(rows.len(), |i, j| rows[i][j])
    }

    fn max_abs_diff(a: &SymDense<f64>, b: &SymDense<f64>) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn psd_input_unchanged() {
        let m = dense(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let z = project_psd(&m).unwrap();
        assert!(max_abs_diff(&m, &z) < 1e-12);
    }

    #[test]
    fn swap_matrix_projection() {
        let m = dense(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let z = project_psd(&m).unwrap();
        let expected = dense(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(max_abs_diff(&z, &expected) < 1e-12);
    }

    #[test]
    fn negative_identity_projects_to_zero() {
        let m = dense(&[&[-1.0, 0.0, 0.0], &[0.0, -1.0, 0.0], &[0.0, 0.0, -1.0]]);
        let z = project_psd(&m).unwrap();
        assert!(z.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn eigenpairs_reconstruct() {
        let m = dense(&[&[4.0, 1.0, -2.0], &[1.0, 2.0, 0.5], &[-2.0, 0.5, -3.0]]);
        let eig = sym_eigen(&m).unwrap();
        for l in 0..3 {
            let u = eig.vector(l);
            for i in 0..3 {
                let mu: f64 = (0..3).map(|j| m.get(i, j) * u[j]).sum();
                assert!((mu - eig.values[l] * u[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn double_double_projection_is_accurate() {
        let m = SymDense::<DoubleDouble>::from_fn(3, |i, j| {
            DoubleDouble::from(1.0) / DoubleDouble::from((i + j + 1) as f64) - DoubleDouble::from(0.3)
        });
        let z = project_psd(&m).unwrap();
        // Z - M must be negative semidefinite and orthogonal to Z.
        let diff = z.sub(&m);
        let ortho = z.inner(&diff).abs();
        assert!(ortho.to_f64() < 1e-28, "{ortho:?}");
        let eig = sym_eigen(&diff).unwrap();
        for v in eig.values {
            assert!(v.to_f64() > -1e-28);
        }
    }
}
