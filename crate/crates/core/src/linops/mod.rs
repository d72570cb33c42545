//! Sparse constraint-operator kernels on factored iterates `X = V^T V`.
//!
//! Stored matrices hold upper-triangle entries only; an off-diagonal entry `w`
//! at `(r, c)` contributes `2 w v_r . v_c` to `<A, V^T V>`. The per-column
//! slices below carry each off-diagonal entry once per endpoint column so
//! that the incremental update sees it from both sides without doubling.

mod dense;
mod eigen;

use thiserror::Error;

use crate::problem::{SdpProblem, SymMatrix};
use crate::scalar::{dot, Real};

pub use dense::SymDense;
pub use eigen::{project_psd, sym_eigen, EigenError, SymEigen};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapeError {
    #[error("expected {expected} factor blocks, found {found}")]
    BlockCount { expected: usize, found: usize },
    #[error("factor block {} has {found} columns, block size is {expected}", .block + 1)]
    Columns {
        block: usize,
        expected: usize,
        found: usize,
    },
    #[error("dual vector has length {found}, expected {expected}")]
    DualLength { expected: usize, found: usize },
    #[error("factor block {} has rank {found}, expected {expected}", .block + 1)]
    Rank {
        block: usize,
        expected: usize,
        found: usize,
    },
    #[error("negative inequality multiplier or nonpositive penalty in warm start")]
    InvalidWarmStart,
}

/// `k x n` factor stored column-major; column `i` is `v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor<T> {
    rank: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Factor<T> {
    pub fn zeros(rank: usize, cols: usize) -> Self {
        Factor {
            rank,
            cols,
            data: vec![T::zero(); rank * cols],
        }
    }

    /// Builds a factor from column-major data of length `rank * cols`.
    pub fn from_columns(rank: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rank * cols, "factor data has wrong length");
        Factor { rank, cols, data }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, i: usize) -> &[T] {
        &self.data[i * self.rank..(i + 1) * self.rank]
    }

    pub fn col_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.rank..(i + 1) * self.rank]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn frobenius_sq(&self) -> T {
        dot(&self.data, &self.data)
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Factor {
            rank: self.rank,
            cols: self.cols,
            data: self.data.iter().map(|&v| alpha * v).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Factor<U> {
        Factor {
            rank: self.rank,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::from_dd(v.to_dd())).collect(),
        }
    }

    /// Dense `V^T V`.
    pub fn gram(&self) -> SymDense<T> {
        SymDense::from_fn(self.cols, |i, j| dot(self.col(i), self.col(j)))
    }
}

pub fn check_factors<T: Real>(problem: &SdpProblem<T>, factors: &[Factor<T>]) -> Result<(), ShapeError> {
    if factors.len() != problem.num_blocks() {
        return Err(ShapeError::BlockCount {
            expected: problem.num_blocks(),
            found: factors.len(),
        });
    }
    for (b, (f, &n)) in factors.iter().zip(&problem.block_sizes).enumerate() {
        if f.cols() != n {
            return Err(ShapeError::Columns {
                block: b,
                expected: n,
                found: f.cols(),
            });
        }
    }
    Ok(())
}

/// `<A, V^T V>` for one block matrix, straight from its sparse entries.
pub fn sparse_inner<T: Real>(m: &SymMatrix<T>, factor: &Factor<T>) -> T {
    let two = T::from_f64(2.0);
    let mut acc = T::zero();
    for e in &m.entries {
        let d = dot(factor.col(e.row), factor.col(e.col));
        acc += if e.row == e.col { e.value * d } else { two * e.value * d };
    }
    acc
}

/// `sum_i <C_i, X_i>`.
pub fn cost_value<T: Real>(problem: &SdpProblem<T>, factors: &[Factor<T>]) -> T {
    let mut acc = T::zero();
    for (c, f) in problem.costs.iter().zip(factors) {
        acc += sparse_inner(c, f);
    }
    acc
}

/// `A(V^T V)` concatenated with `B(V^T V)`.
pub fn apply_operator<T: Real>(problem: &SdpProblem<T>, factors: &[Factor<T>]) -> Result<Vec<T>, ShapeError> {
    check_factors(problem, factors)?;
    Ok(problem
        .constraints
        .iter()
        .map(|con| {
            let mut acc = T::zero();
            for (b, m) in &con.parts {
                acc += sparse_inner(m, &factors[*b]);
            }
            acc
        })
        .collect())
}

/// `sum_j y_j A_j`, one dense matrix per block.
pub fn apply_adjoint<T: Real>(problem: &SdpProblem<T>, y: &[T]) -> Result<Vec<SymDense<T>>, ShapeError> {
    if y.len() != problem.num_constraints() {
        return Err(ShapeError::DualLength {
            expected: problem.num_constraints(),
            found: y.len(),
        });
    }
    let mut out: Vec<SymDense<T>> = problem.block_sizes.iter().map(|&n| SymDense::zeros(n)).collect();
    for (con, &yj) in problem.constraints.iter().zip(y) {
        if yj == T::zero() {
            continue;
        }
        for (b, m) in &con.parts {
            out[*b].add_sparse(m, yj);
        }
    }
    Ok(out)
}

/// `C - A^T(y)` per block.
pub fn dual_slack<T: Real>(problem: &SdpProblem<T>, y: &[T]) -> Result<Vec<SymDense<T>>, ShapeError> {
    let mut s = apply_adjoint(problem, y)?;
    for (sb, c) in s.iter_mut().zip(&problem.costs) {
        *sb = sb.scaled(-T::one());
        sb.add_sparse(c, T::one());
    }
    Ok(s)
}

/// Column `i` of one block: the cost column and the stacked constraint columns
/// `(A_1)_(i) | ... | (A_m)_(i)`, restricted to constraints that touch it.
#[derive(Debug, Clone, Default)]
pub struct ColumnSlice<T> {
    pub cost_diag: T,
    /// `(r, C_ri)` for `r != i`.
    pub cost_off: Vec<(usize, T)>,
    /// Global indices of constraints with a nonzero entry in this column.
    pub touched: Vec<usize>,
    /// `(local, (A_j)_ii)` where `touched[local] = j`.
    pub diag: Vec<(usize, T)>,
    /// `(local, r, (A_j)_ri)` for `r != i`.
    pub off: Vec<(usize, usize, T)>,
}

/// Column slices for every block, built once per problem.
#[derive(Debug, Clone)]
pub struct ColumnSlices<T> {
    pub blocks: Vec<Vec<ColumnSlice<T>>>,
}

impl<T: Real> ColumnSlices<T> {
    pub fn new(problem: &SdpProblem<T>) -> Self {
        let mut blocks: Vec<Vec<ColumnSlice<T>>> = problem
            .block_sizes
            .iter()
            .map(|&n| vec![ColumnSlice::default(); n])
            .collect();
        for (b, c) in problem.costs.iter().enumerate() {
            for e in &c.entries {
                if e.row == e.col {
                    blocks[b][e.row].cost_diag = e.value;
                } else {
                    blocks[b][e.col].cost_off.push((e.row, e.value));
                    blocks[b][e.row].cost_off.push((e.col, e.value));
                }
            }
        }
        for (j, con) in problem.constraints.iter().enumerate() {
            for (b, m) in &con.parts {
                let cols = &mut blocks[*b];
                let local_of = |slice: &mut ColumnSlice<T>| -> usize {
                    match slice.touched.last() {
                        Some(&last) if last == j => slice.touched.len() - 1,
                        _ => {
                            slice.touched.push(j);
                            slice.touched.len() - 1
                        }
                    }
                };
                for e in &m.entries {
                    if e.row == e.col {
                        let s = &mut cols[e.row];
                        let l = local_of(s);
                        s.diag.push((l, e.value));
                    } else {
                        let s = &mut cols[e.col];
                        let l = local_of(s);
                        s.off.push((l, e.row, e.value));
                        let s = &mut cols[e.row];
                        let l = local_of(s);
                        s.off.push((l, e.col, e.value));
                    }
                }
            }
        }
        ColumnSlices { blocks }
    }

    pub fn column(&self, block: usize, i: usize) -> &ColumnSlice<T> {
        &self.blocks[block][i]
    }

    /// Rebuilds every constraint's per-block entry list from the slices.
    /// Each off-diagonal entry is taken from its column endpoint.
    pub fn reassemble(&self, problem: &SdpProblem<T>) -> Vec<Vec<(usize, usize, usize, T)>> {
        let mut out: Vec<Vec<(usize, usize, usize, T)>> = vec![Vec::new(); problem.num_constraints()];
        for (b, cols) in self.blocks.iter().enumerate() {
            for (i, s) in cols.iter().enumerate() {
                for &(l, v) in &s.diag {
                    out[s.touched[l]].push((b, i, i, v));
                }
                for &(l, r, v) in &s.off {
                    if r < i {
                        out[s.touched[l]].push((b, r, i, v));
                    }
                }
            }
        }
        for list in &mut out {
            list.sort_by_key(|&(b, r, c, _)| (b, r, c));
        }
        out
    }
}

/// Cached operator values `A(V^T V)` and `B(V^T V)` for the current iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCache<T> {
    pub values: Vec<T>,
}

impl<T: Real> OperatorCache<T> {
    pub fn compute(problem: &SdpProblem<T>, factors: &[Factor<T>]) -> Result<Self, ShapeError> {
        Ok(OperatorCache {
            values: apply_operator(problem, factors)?,
        })
    }
}

/// Scratch buffers for incremental column evaluation.
#[derive(Debug, Clone)]
pub struct ColumnWork<T> {
    /// `u_r = v_r . (v_trial - v_start)` for `r != i`, and 0 at `r = i`.
    pub u: Vec<T>,
    pub d: Vec<T>,
    /// Change of each touched constraint value, indexed by local position.
    pub delta: Vec<T>,
}

impl<T: Real> ColumnWork<T> {
    pub fn new() -> Self {
        ColumnWork {
            u: Vec::new(),
            d: Vec::new(),
            delta: Vec::new(),
        }
    }
}

impl<T: Real> Default for ColumnWork<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Fills `work.delta` with the change in every touched constraint value when
/// column `i` moves from `v_start` to `v_trial`, and returns the change of
/// `<C, X>`:
///
/// `dA_j = (|v_trial|^2 - |v_start|^2) (A_j)_ii + 2 sum_{r != i} (A_j)_ri v_r . (v_trial - v_start)`.
///
/// Cost is `O(k n + nnz)` for the column.
pub fn column_deltas<T: Real>(
    slice: &ColumnSlice<T>,
    factor: &Factor<T>,
    i: usize,
    v_start: &[T],
    v_trial: &[T],
    work: &mut ColumnWork<T>,
) -> T {
    let n = factor.cols();
    let two = T::from_f64(2.0);
    work.d.clear();
    work.d.extend(v_trial.iter().zip(v_start).map(|(&a, &b)| a - b));
    // |v_trial|^2 - |v_start|^2 = d . (v_trial + v_start), free of cancellation.
    let mut nsq = T::zero();
    for ((&d, &a), &b) in work.d.iter().zip(v_trial).zip(v_start) {
        nsq += d * (a + b);
    }
    work.u.clear();
    work.u.resize(n, T::zero());
    for r in 0..n {
        if r != i {
            work.u[r] = dot(factor.col(r), &work.d);
        }
    }
    let mut dcost = slice.cost_diag * nsq;
    for &(r, v) in &slice.cost_off {
        dcost += two * v * work.u[r];
    }
    work.delta.clear();
    work.delta.resize(slice.touched.len(), T::zero());
    for &(l, v) in &slice.diag {
        work.delta[l] += v * nsq;
    }
    for &(l, r, v) in &slice.off {
        work.delta[l] += two * v * work.u[r];
    }
    dcost
}

/// Operator values after replacing column `i` of `factors[block]` (currently
/// `v_start`) by `v_trial`, computed incrementally from the cache.
pub fn incremental_operator_values<T: Real>(
    cache: &OperatorCache<T>,
    slices: &ColumnSlices<T>,
    factors: &[Factor<T>],
    block: usize,
    i: usize,
    v_start: &[T],
    v_trial: &[T],
) -> Vec<T> {
    let slice = slices.column(block, i);
    let mut work = ColumnWork::new();
    column_deltas(slice, &factors[block], i, v_start, v_trial, &mut work);
    let mut values = cache.values.clone();
    for (l, &j) in slice.touched.iter().enumerate() {
        values[j] += work.delta[l];
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Constraint;

    fn offdiag_problem() -> SdpProblem {
        SdpProblem::new(
            vec![2],
            vec![SymMatrix::zeros(2)],
            vec![Constraint::single(0, SymMatrix::from_triplets(2, vec![(0, 1, 1.0)]))],
            vec![0.0],
            2,
        )
        .unwrap()
    }

    #[test]
    fn rank_one_offdiag() {
        let p = offdiag_problem();
        let v = Factor::from_columns(1, 2, vec![1.0, 1.0]);
        assert_eq!(apply_operator(&p, &[v]).unwrap(), vec![2.0]);
    }

    #[test]
    fn identity_gives_frobenius() {
        let p = SdpProblem::new(
            vec![3],
            vec![SymMatrix::zeros(3)],
            vec![Constraint::single(0, SymMatrix::identity(3))],
            vec![1.0],
            2,
        )
        .unwrap();
        let v = Factor::from_columns(2, 3, vec![1.0, 2.0, -1.0, 0.5, 3.0, 0.0]);
        let got = apply_operator(&p, std::slice::from_ref(&v)).unwrap()[0];
        assert!((got - v.frobenius_sq()).abs() < 1e-14);
    }

    #[test]
    fn shape_errors() {
        let p = offdiag_problem();
        let v = Factor::<f64>::zeros(1, 3);
        assert!(matches!(apply_operator(&p, &[v]), Err(ShapeError::Columns { .. })));
        assert!(matches!(apply_adjoint(&p, &[1.0, 2.0]), Err(ShapeError::DualLength { .. })));
    }

    #[test]
    fn adjoint_small_cases() {
        let p = offdiag_problem();
        let zero = apply_adjoint(&p, &[0.0]).unwrap();
        assert!(zero[0].as_slice().iter().all(|&x| x == 0.0));
        let two = apply_adjoint(&p, &[2.0]).unwrap();
        assert_eq!(two[0].get(0, 1), 2.0);
        assert_eq!(two[0].get(1, 0), 2.0);
        assert_eq!(two[0].get(0, 0), 0.0);
    }

    #[test]
    fn zero_increment_keeps_cache() {
        let p = offdiag_problem();
        let v = Factor::from_columns(1, 2, vec![0.3, -0.7]);
        let slices = ColumnSlices::new(&p);
        let cache = OperatorCache::compute(&p, std::slice::from_ref(&v)).unwrap();
        let start = v.col(1).to_vec();
        let vals = incremental_operator_values(&cache, &slices, std::slice::from_ref(&v), 0, 1, &start, &start);
        assert_eq!(vals, cache.values);
    }

    #[test]
    fn diagonal_constraint_only_norm_term() {
        let p = SdpProblem::new(
            vec![2],
            vec![SymMatrix::zeros(2)],
            vec![Constraint::single(0, SymMatrix::from_triplets(2, vec![(0, 0, 2.0), (1, 1, 3.0)]))],
            vec![0.0],
            2,
        )
        .unwrap();
        let v = Factor::from_columns(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let slices = ColumnSlices::new(&p);
        assert!(slices.column(0, 0).off.is_empty());
        let cache = OperatorCache::compute(&p, std::slice::from_ref(&v)).unwrap();
        let vals = incremental_operator_values(&cache, &slices, std::slice::from_ref(&v), 0, 0, &[1.0, 0.0], &[2.0, 1.0]);
        // cache 5, plus (5 - 1) * 2
        assert_eq!(vals, vec![13.0]);
    }
}
