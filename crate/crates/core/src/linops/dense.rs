use crate::problem::SymMatrix;
use crate::scalar::{pairwise_sum, Real};

/// Dense symmetric matrix, row-major with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymDense<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SymDense<T> {
    pub fn zeros(n: usize) -> Self {
        SymDense {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_sparse(m: &SymMatrix<T>) -> Self {
        let mut d = SymDense::zeros(m.order);
        d.add_sparse(m, T::one());
        d
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut d = SymDense::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                d.set(i, j, v);
            }
        }
        d
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// `self += alpha * m`.
    pub fn add_sparse(&mut self, m: &SymMatrix<T>, alpha: T) {
        debug_assert_eq!(m.order, self.n);
        for e in &m.entries {
            let v = self.get(e.row, e.col) + alpha * e.value;
            self.set(e.row, e.col, v);
        }
    }

    pub fn sub(&self, other: &SymDense<T>) -> SymDense<T> {
        SymDense {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scaled(&self, alpha: T) -> SymDense<T> {
        SymDense {
            n: self.n,
            data: self.data.iter().map(|&a| alpha * a).collect(),
        }
    }

    pub fn frobenius_sq(&self) -> T {
        let sq: Vec<T> = self.data.iter().map(|&a| a * a).collect();
        pairwise_sum(&sq)
    }

    pub fn inner(&self, other: &SymDense<T>) -> T {
        let prod: Vec<T> = self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).collect();
        pairwise_sum(&prod)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn cast<U: Real>(&self) -> SymDense<U> {
        SymDense {
            n: self.n,
            data: self.data.iter().map(|&v| U::from_dd(v.to_dd())).collect(),
        }
    }

    /// Upper-triangle entries whose value is nonzero.
    pub fn to_sparse(&self) -> SymMatrix<T> {
        let mut trip = Vec::new();
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j);
                if v != T::zero() {
                    trip.push((i, j, v));
                }
            }
        }
        SymMatrix::from_triplets(self.n, trip)
    }
}
