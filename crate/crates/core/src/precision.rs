//! Two-stage solves: binary64 first, then refinement in double-double.

use thiserror::Error;

use crate::dd::DoubleDouble;
use crate::problem::SdpProblem;
use crate::scalar::{Real, ScalarKind};
use crate::solver::{solve_with_progress, IterationLog, Solution, SolveError, SolverOptions, Status, WarmStart};

/// Tolerance of the binary64 stage.
pub const STAGE_ONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot convert a {from} warm start to the less precise {to}")]
pub struct NarrowingError {
    pub from: ScalarKind,
    pub to: ScalarKind,
}

/// Converts a warm start to another scalar kind. Widening is exact.
pub fn promote<S: Real, T: Real>(warm: &WarmStart<S>) -> Result<WarmStart<T>, NarrowingError> {
    if T::KIND.mantissa_bits() < S::KIND.mantissa_bits() {
        return Err(NarrowingError {
            from: S::KIND,
            to: T::KIND,
        });
    }
    let conv = |v: &[S]| v.iter().map(|&x| T::from_dd(x.to_dd())).collect::<Vec<T>>();
    Ok(WarmStart {
        factors: warm.factors.iter().map(|f| f.cast()).collect(),
        y_eq: conv(&warm.y_eq),
        y_ineq: conv(&warm.y_ineq),
        mu: T::from_dd(warm.mu.to_dd()),
    })
}

#[derive(Debug, Error)]
pub enum TwoStageError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Narrowing(#[from] NarrowingError),
}

#[derive(Debug, Clone)]
pub struct TwoStageSolution {
    /// First stage result.
    pub stage_one: Solution<f64>,
    /// Refined result; `None` when the first stage did not reach its tolerance.
    pub stage_two: Option<Solution<DoubleDouble>>,
    pub status: Status,
    pub iterations: usize,
    pub elapsed: std::time::Duration,
    pub warm_start: WarmStart<DoubleDouble>,
}

impl TwoStageSolution {
    /// Final solution in double-double; the first stage result promoted when
    /// no refinement ran.
    pub fn final_solution(&self) -> Solution<DoubleDouble> {
        match &self.stage_two {
            Some(s) => s.clone(),
            None => {
                let s = &self.stage_one;
                Solution {
                    factors: s.factors.iter().map(|f| f.cast()).collect(),
                    y: s.y.iter().map(|&v| DoubleDouble::from(v)).collect(),
                    z: s.z.iter().map(|z| z.cast()).collect(),
                    status: s.status,
                    report: s.report,
                    scaled_report: s.scaled_report,
                    primal_objective: s.primal_objective,
                    dual_objective: s.dual_objective,
                    stats: s.stats,
                }
            }
        }
    }
}

/// Solves at binary64 to [`STAGE_ONE_TOL`], then resumes in double-double
/// until `target_tol`. When `target_tol >= STAGE_ONE_TOL` the second stage is
/// a single validation iteration. `options.tol` is ignored.
pub fn solve_two_stage(
    problem: &SdpProblem<f64>,
    target_tol: f64,
    options: &SolverOptions,
    mut progress: impl FnMut(ScalarKind, &IterationLog),
) -> Result<TwoStageSolution, TwoStageError> {
    let stage_one_opts = SolverOptions {
        tol: STAGE_ONE_TOL.max(target_tol),
        ..options.clone()
    };
    let (first, warm) = solve_with_progress(problem, &stage_one_opts, None, |l| progress(ScalarKind::Binary64, l))?;
    let promoted: WarmStart<DoubleDouble> = promote(&warm)?;
    if first.status != Status::Tol {
        return Ok(TwoStageSolution {
            status: first.status,
            iterations: first.stats.iterations,
            elapsed: first.stats.elapsed,
            stage_one: first,
            stage_two: None,
            warm_start: promoted,
        });
    }

    let dd_problem: SdpProblem<DoubleDouble> = problem.cast();
    let already_met = target_tol >= STAGE_ONE_TOL;
    let max_iters = if already_met {
        1
    } else {
        options.max_iters.saturating_sub(first.stats.iterations).max(1)
    };
    let remaining = options.time_limit - first.stats.elapsed.as_secs_f64();
    let stage_two_opts = SolverOptions {
        tol: target_tol,
        max_iters,
        iters_z: if already_met { 1 } else { options.iters_z },
        time_limit: if remaining > 0.0 { remaining } else { f64::MIN_POSITIVE },
        ..options.clone()
    };
    let (second, warm2) = solve_with_progress(&dd_problem, &stage_two_opts, Some(promoted), |l| {
        progress(ScalarKind::DoubleDouble, l)
    })?;
    Ok(TwoStageSolution {
        status: second.status,
        iterations: first.stats.iterations + second.stats.iterations,
        elapsed: first.stats.elapsed + second.stats.elapsed,
        stage_one: first,
        stage_two: Some(second),
        warm_start: warm2,
    })
}
