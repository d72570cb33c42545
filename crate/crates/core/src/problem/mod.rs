//! Multi-block SDP data model.
//!
//! A problem is
//!
//! ```text
//! minimize    sum_i <C_i, X_i>
//! subject to  sum_i <A_j,i, X_i>  = a_j   (equalities)
//!             sum_i <B_j,i, X_i> >= b_j   (inequalities)
//!             X_i PSD
//! ```
//!
//! Matrices are stored as upper-triangle triplets. An off-diagonal entry `w`
//! stored at `(r, c)` represents `w` at both `(r, c)` and `(c, r)`, so it
//! contributes `2 w X_rc` to an inner product.

mod native;
mod scaling;
mod sdpa;

use std::fmt;

use thiserror::Error;

use crate::scalar::Real;

pub use native::{parse_native, read_native, write_native, write_native_to, NativeError};
pub use scaling::{scale, ScalingError, ScalingRecord};
pub use sdpa::{parse_sdpa, read_sdpa, SdpaError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry<T> {
    pub row: usize,
    pub col: usize,
    pub value: T,
}

/// Sparse symmetric matrix holding upper-triangle entries (`row <= col`),
/// sorted by `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    pub order: usize,
    pub entries: Vec<Entry<T>>,
}

/// Where a piece of problem data lives; used in error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Cost { block: usize },
    Constraint { index: usize, block: usize },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Cost { block } => write!(f, "cost, block {}", block + 1),
            Location::Constraint { index, block } => {
                write!(f, "constraint {}, block {}", index + 1, block + 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("problem has no blocks")]
    NoBlocks,
    #[error("block {} has size 0", .0 + 1)]
    EmptyBlock(usize),
    #[error("expected {expected} cost matrices, found {found}")]
    CostCount { expected: usize, found: usize },
    #[error("{count} right-hand side values for {m} constraints")]
    RhsLength { count: usize, m: usize },
    #[error("ineq_start out of range: {ineq_start} (m = {m})")]
    IneqStartOutOfRange { ineq_start: usize, m: usize },
    #[error("dimension mismatch at {at}: matrix order {found}, block size {expected}")]
    DimensionMismatch {
        at: Location,
        expected: usize,
        found: usize,
    },
    #[error("block index out of range at constraint {}: block {}", .constraint + 1, .block + 1)]
    BlockOutOfRange { constraint: usize, block: usize },
    #[error("constraint {} lists block {} twice", .constraint + 1, .block + 1)]
    RepeatedBlock { constraint: usize, block: usize },
    #[error("constraint {} has no entries", .0 + 1)]
    EmptyConstraint(usize),
    #[error("entry ({}, {}) outside matrix of order {order} at {at}", .row + 1, .col + 1)]
    EntryOutOfRange {
        at: Location,
        row: usize,
        col: usize,
        order: usize,
    },
    #[error("entry ({}, {}) at {at} is below the diagonal", .row + 1, .col + 1)]
    LowerEntry { at: Location, row: usize, col: usize },
    #[error("duplicate entry ({}, {}) at {at}", .row + 1, .col + 1)]
    DuplicateEntry { at: Location, row: usize, col: usize },
    #[error("nonfinite value at {at}")]
    NonFinite { at: Location },
    #[error("nonfinite right-hand side for constraint {}", .0 + 1)]
    NonFiniteRhs(usize),
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(order: usize) -> Self {
        SymMatrix {
            order,
            entries: Vec::new(),
        }
    }

    /// Builds a matrix from triplets given in either triangle. Entries are
    /// mirrored into the upper triangle and sorted; exact zeros are kept.
    pub fn from_triplets<I>(order: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut entries: Vec<Entry<T>> = triplets
            .into_iter()
            .map(|(r, c, value)| Entry {
                row: r.min(c),
                col: r.max(c),
                value,
            })
            .collect();
        entries.sort_by_key(|e| (e.row, e.col));
        SymMatrix { order, entries }
    }

    pub fn identity(order: usize) -> Self {
        SymMatrix::from_triplets(order, (0..order).map(|i| (i, i, T::one())))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Squared Frobenius norm, counting off-diagonal entries twice.
    pub fn frobenius_sq(&self) -> T {
        let two = T::from_f64(2.0);
        let mut acc = T::zero();
        for e in &self.entries {
            let sq = e.value * e.value;
            acc += if e.row == e.col { sq } else { two * sq };
        }
        acc
    }

    pub fn trace(&self) -> T {
        let mut acc = T::zero();
        for e in self.entries.iter().filter(|e| e.row == e.col) {
            acc += e.value;
        }
        acc
    }

    pub fn scaled(&self, factor: T) -> Self {
        SymMatrix {
            order: self.order,
            entries: self
                .entries
                .iter()
                .map(|e| Entry {
                    value: e.value * factor,
                    ..*e
                })
                .collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> SymMatrix<U> {
        SymMatrix {
            order: self.order,
            entries: self
                .entries
                .iter()
                .map(|e| Entry {
                    row: e.row,
                    col: e.col,
                    value: U::from_dd(e.value.to_dd()),
                })
                .collect(),
        }
    }

    fn check(&self, at: Location, block_size: usize) -> Result<(), ProblemError> {
        if self.order != block_size {
            return Err(ProblemError::DimensionMismatch {
                at,
                expected: block_size,
                found: self.order,
            });
        }
        let mut prev: Option<(usize, usize)> = None;
        let mut sorted = true;
        for e in &self.entries {
            if e.row >= self.order || e.col >= self.order {
                return Err(ProblemError::EntryOutOfRange {
                    at,
                    row: e.row,
                    col: e.col,
                    order: self.order,
                });
            }
            if e.row > e.col {
                return Err(ProblemError::LowerEntry {
                    at,
                    row: e.row,
                    col: e.col,
                });
            }
            if !e.value.is_finite() {
                return Err(ProblemError::NonFinite { at });
            }
            if let Some(p) = prev {
                if p >= (e.row, e.col) {
                    sorted = false;
                }
            }
            prev = Some((e.row, e.col));
        }
        let mut keys: Vec<(usize, usize)> = self.entries.iter().map(|e| (e.row, e.col)).collect();
        if !sorted {
            keys.sort_unstable();
        }
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(ProblemError::DuplicateEntry {
                at,
                row: w[0].0,
                col: w[0].1,
            });
        }
        Ok(())
    }
}

/// One constraint matrix, split into its nonzero per-block parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    /// `(block index, matrix)` pairs, sorted by block index.
    pub parts: Vec<(usize, SymMatrix<T>)>,
}

impl<T: Real> Constraint<T> {
    pub fn single(block: usize, matrix: SymMatrix<T>) -> Self {
        Constraint {
            parts: vec![(block, matrix)],
        }
    }

    pub fn new(mut parts: Vec<(usize, SymMatrix<T>)>) -> Self {
        parts.sort_by_key(|(b, _)| *b);
        Constraint { parts }
    }

    pub fn frobenius_sq(&self) -> T {
        let mut acc = T::zero();
        for (_, m) in &self.parts {
            acc += m.frobenius_sq();
        }
        acc
    }

    pub fn trace(&self) -> T {
        let mut acc = T::zero();
        for (_, m) in &self.parts {
            acc += m.trace();
        }
        acc
    }

    pub fn scaled(&self, factor: T) -> Self {
        Constraint {
            parts: self
                .parts
                .iter()
                .map(|(b, m)| (*b, m.scaled(factor)))
                .collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Constraint<U> {
        Constraint {
            parts: self.parts.iter().map(|(b, m)| (*b, m.cast())).collect(),
        }
    }
}

/// How the minimization objective relates to the objective a user reports.
///
/// `reported = sign * <C, X> + offset`. Maximization problems are stored
/// negated with `sign = -1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveReport {
    pub sign: f64,
    pub offset: f64,
}

impl Default for ObjectiveReport {
    fn default() -> Self {
        ObjectiveReport {
            sign: 1.0,
            offset: 0.0,
        }
    }
}

impl ObjectiveReport {
    pub fn apply(&self, min_objective: f64) -> f64 {
        self.sign * min_objective + self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem<T = f64> {
    pub block_sizes: Vec<usize>,
    /// One cost matrix per block.
    pub costs: Vec<SymMatrix<T>>,
    /// Equalities first, then inequalities.
    pub constraints: Vec<Constraint<T>>,
    pub rhs: Vec<T>,
    /// 1-based index of the first inequality; `m + 1` when there are none.
    pub ineq_start: usize,
    pub objective: ObjectiveReport,
}

impl<T: Real> SdpProblem<T> {
    /// Assembles and validates a problem.
    pub fn new(
        block_sizes: Vec<usize>,
        costs: Vec<SymMatrix<T>>,
        constraints: Vec<Constraint<T>>,
        rhs: Vec<T>,
        ineq_start: usize,
    ) -> Result<Self, ProblemError> {
        let p = SdpProblem {
            block_sizes,
            costs,
            constraints,
            rhs,
            ineq_start,
            objective: ObjectiveReport::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_objective(mut self, objective: ObjectiveReport) -> Self {
        self.objective = objective;
        self
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_eq(&self) -> usize {
        self.ineq_start.saturating_sub(1).min(self.constraints.len())
    }

    pub fn num_ineq(&self) -> usize {
        self.constraints.len() - self.num_eq()
    }

    pub fn is_ineq(&self, j: usize) -> bool {
        j >= self.num_eq()
    }

    pub fn rhs_eq(&self) -> &[T] {
        &self.rhs[..self.num_eq()]
    }

    pub fn rhs_ineq(&self) -> &[T] {
        &self.rhs[self.num_eq()..]
    }

    pub fn max_block_size(&self) -> usize {
        self.block_sizes.iter().copied().max().unwrap_or(0)
    }

    /// Factor rank per block: `min(n_i, ceil(sqrt(2 m)))`, at least 1.
    pub fn ranks(&self) -> Vec<usize> {
        let k = crate::scalar::ceil_sqrt(2 * self.num_constraints()).max(1);
        self.block_sizes.iter().map(|&n| n.min(k)).collect()
    }

    pub fn cost_frobenius_sq(&self) -> T {
        let mut acc = T::zero();
        for c in &self.costs {
            acc += c.frobenius_sq();
        }
        acc
    }

    /// Re-instantiates the data at another scalar kind.
    pub fn cast<U: Real>(&self) -> SdpProblem<U> {
        SdpProblem {
            block_sizes: self.block_sizes.clone(),
            costs: self.costs.iter().map(SymMatrix::cast).collect(),
            constraints: self.constraints.iter().map(Constraint::cast).collect(),
            rhs: self.rhs.iter().map(|&v| U::from_dd(v.to_dd())).collect(),
            ineq_start: self.ineq_start,
            objective: self.objective,
        }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.block_sizes.is_empty() {
            return Err(ProblemError::NoBlocks);
        }
        if let Some(b) = self.block_sizes.iter().position(|&n| n == 0) {
            return Err(ProblemError::EmptyBlock(b));
        }
        let q = self.block_sizes.len();
        if self.costs.len() != q {
            return Err(ProblemError::CostCount {
                expected: q,
                found: self.costs.len(),
            });
        }
        let m = self.constraints.len();
        if self.rhs.len() != m {
            return Err(ProblemError::RhsLength {
                count: self.rhs.len(),
                m,
            });
        }
        if self.ineq_start < 1 || self.ineq_start > m + 1 {
            return Err(ProblemError::IneqStartOutOfRange {
                ineq_start: self.ineq_start,
                m,
            });
        }
        for (b, c) in self.costs.iter().enumerate() {
            c.check(Location::Cost { block: b }, self.block_sizes[b])?;
        }
        for (j, con) in self.constraints.iter().enumerate() {
            if con.parts.iter().all(|(_, m)| m.is_empty()) {
                return Err(ProblemError::EmptyConstraint(j));
            }
            let mut prev_block: Option<usize> = None;
            for (b, mat) in &con.parts {
                if *b >= q {
                    return Err(ProblemError::BlockOutOfRange {
                        constraint: j,
                        block: *b,
                    });
                }
                if prev_block.is_some_and(|p| p >= *b) {
                    return Err(ProblemError::RepeatedBlock {
                        constraint: j,
                        block: *b,
                    });
                }
                prev_block = Some(*b);
                mat.check(
                    Location::Constraint {
                        index: j,
                        block: *b,
                    },
                    self.block_sizes[*b],
                )?;
            }
        }
        if let Some(j) = self.rhs.iter().position(|v| !v.is_finite()) {
            return Err(ProblemError::NonFiniteRhs(j));
        }
        Ok(())
    }
}
