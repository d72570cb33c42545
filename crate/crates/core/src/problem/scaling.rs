//! Automatic data scaling.
//!
//! Every constraint matrix and the cost are divided by their Frobenius norm
//! (multi-block matrices use one joint norm over all blocks). The right-hand
//! side is divided entrywise by the same constraint norms and then normalized
//! to unit Euclidean length. A single length factor is used for the whole
//! right-hand side: if `X~` solves the scaled problem then `sigma * X~`
//! solves the original one, which needs the same `sigma` for equalities and
//! inequalities.

use thiserror::Error;

use super::{ProblemError, SdpProblem};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalingError {
    #[error("constraint {} has zero Frobenius norm", .0 + 1)]
    ZeroNormConstraint(usize),
    #[error(transparent)]
    Invalid(#[from] ProblemError),
    #[error("scaling record does not match problem: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRecord<T> {
    /// Joint `||C||_F` over all blocks; 1 when the cost is zero.
    pub cost_norm: T,
    /// `||A_j||_F` (or `||B_j||_F`) per constraint, joint over blocks.
    pub constraint_norms: Vec<T>,
    /// `||a_bar||_2` of the equality part after division by the constraint norms.
    pub rhs_eq_norm: T,
    /// `||b_bar||_2` of the inequality part.
    pub rhs_ineq_norm: T,
    /// Factor the divided right-hand side was normalized by:
    /// `sqrt(rhs_eq_norm^2 + rhs_ineq_norm^2)`, or 1 when that is zero.
    pub rhs_norm: T,
}

impl<T: Real> ScalingRecord<T> {
    pub fn identity(m: usize) -> Self {
        ScalingRecord {
            cost_norm: T::one(),
            constraint_norms: vec![T::one(); m],
            rhs_eq_norm: T::one(),
            rhs_ineq_norm: T::one(),
            rhs_norm: T::one(),
        }
    }

    /// `X = primal_scale * X~`.
    pub fn primal_scale(&self) -> T {
        self.rhs_norm
    }

    /// `y_j = dual_scale(j) * y~_j`.
    pub fn dual_scale(&self, j: usize) -> T {
        self.cost_norm / self.constraint_norms[j]
    }

    /// `Z = slack_scale * Z~`.
    pub fn slack_scale(&self) -> T {
        self.cost_norm
    }

    pub fn check_matches(&self, problem: &SdpProblem<T>) -> Result<(), ScalingError> {
        if self.constraint_norms.len() != problem.num_constraints() {
            return Err(ScalingError::Mismatch(format!(
                "{} constraint norms for {} constraints",
                self.constraint_norms.len(),
                problem.num_constraints()
            )));
        }
        Ok(())
    }
}

/// Returns the scaled problem and the record needed to map solutions back.
pub fn scale<T: Real>(problem: &SdpProblem<T>) -> Result<(SdpProblem<T>, ScalingRecord<T>), ScalingError> {
    problem.validate()?;
    let mut constraint_norms = Vec::with_capacity(problem.num_constraints());
    for (j, con) in problem.constraints.iter().enumerate() {
        let norm = con.frobenius_sq().sqrt();
        if norm == T::zero() {
            return Err(ScalingError::ZeroNormConstraint(j));
        }
        constraint_norms.push(norm);
    }

    let mut cost_norm = problem.cost_frobenius_sq().sqrt();
    if cost_norm == T::zero() {
        cost_norm = T::one();
    }

    let divided: Vec<T> = problem
        .rhs
        .iter()
        .zip(&constraint_norms)
        .map(|(&r, &n)| r / n)
        .collect();
    let m_a = problem.num_eq();
    let sq = |v: &[T]| v.iter().fold(T::zero(), |acc, &x| acc + x * x);
    let eq_sq = sq(&divided[..m_a]);
    let ineq_sq = sq(&divided[m_a..]);
    let mut rhs_norm = (eq_sq + ineq_sq).sqrt();
    if rhs_norm == T::zero() {
        rhs_norm = T::one();
    }

    let inv_cost = T::one() / cost_norm;
    let scaled = SdpProblem {
        block_sizes: problem.block_sizes.clone(),
        costs: problem.costs.iter().map(|c| c.scaled(inv_cost)).collect(),
        constraints: problem
            .constraints
            .iter()
            .zip(&constraint_norms)
            .map(|(c, &n)| c.scaled(T::one() / n))
            .collect(),
        rhs: divided.iter().map(|&r| r / rhs_norm).collect(),
        ineq_start: problem.ineq_start,
        objective: problem.objective,
    };
    let record = ScalingRecord {
        cost_norm,
        constraint_norms,
        rhs_eq_norm: eq_sq.sqrt(),
        rhs_ineq_norm: ineq_sq.sqrt(),
        rhs_norm,
    };
    Ok((scaled, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Constraint, SymMatrix};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn cost_two_identity() {
        let p = SdpProblem::new(
            vec![2],
            vec![SymMatrix::from_triplets(2, vec![(0, 0, 2.0), (1, 1, 2.0)])],
            vec![],
            vec![],
            1,
        )
        .unwrap();
        let (s, rec) = scale(&p).unwrap();
        assert!(close(rec.cost_norm, 8f64.sqrt(), 1e-15));
        for e in &s.costs[0].entries {
            assert!(close(e.value, 1.0 / 2f64.sqrt(), 1e-15));
        }
        assert!(close(s.cost_frobenius_sq(), 1.0, 1e-15));
    }

    #[test]
    fn identity_constraint_rhs() {
        let p = SdpProblem::new(
            vec![3],
            vec![SymMatrix::identity(3)],
            vec![Constraint::single(0, SymMatrix::identity(3))],
            vec![3.0],
            2,
        )
        .unwrap();
        let (s, rec) = scale(&p).unwrap();
        assert!(close(rec.constraint_norms[0], 3f64.sqrt(), 1e-15));
        // a_bar = 3 / sqrt(3) = sqrt(3), then normalized to 1
        assert!(close(rec.rhs_eq_norm, 3f64.sqrt(), 1e-15));
        assert!(close(s.rhs[0], 1.0, 1e-15));
        for e in &s.constraints[0].parts[0].1.entries {
            assert!(close(e.value, 1.0 / 3f64.sqrt(), 1e-15));
        }
    }

    #[test]
    fn unit_problem_is_fixed_point() {
        let p = SdpProblem::new(
            vec![1],
            vec![SymMatrix::identity(1)],
            vec![Constraint::single(0, SymMatrix::identity(1))],
            vec![1.0],
            2,
        )
        .unwrap();
        let (s, rec) = scale(&p).unwrap();
        assert_eq!(s, p);
        assert_eq!(rec.cost_norm, 1.0);
        assert_eq!(rec.constraint_norms, vec![1.0]);
        assert_eq!(rec.rhs_norm, 1.0);
        // no inequalities, so their norm is zero and unused
        assert_eq!(rec.rhs_ineq_norm, 0.0);
    }

    #[test]
    fn zero_rhs_keeps_unit_factor() {
        let p = SdpProblem::new(
            vec![2],
            vec![SymMatrix::identity(2)],
            vec![Constraint::single(0, SymMatrix::from_triplets(2, vec![(0, 1, 0.5)]))],
            vec![0.0],
            2,
        )
        .unwrap();
        let (s, rec) = scale(&p).unwrap();
        assert_eq!(rec.rhs_norm, 1.0);
        assert_eq!(s.rhs, vec![0.0]);
    }

    #[test]
    fn zero_norm_constraint_rejected() {
        let p = SdpProblem {
            block_sizes: vec![2],
            costs: vec![SymMatrix::identity(2)],
            constraints: vec![Constraint::single(0, SymMatrix::from_triplets(2, vec![(0, 0, 0.0)]))],
            rhs: vec![1.0],
            ineq_start: 2,
            objective: Default::default(),
        };
        assert_eq!(scale(&p).unwrap_err(), ScalingError::ZeroNormConstraint(0));
    }
}
