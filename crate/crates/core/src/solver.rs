//! Outer iterations: column sweeps, multiplier and penalty updates,
//! error measures and termination.

use std::fmt;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::auglag::{commit_column, ColumnObjective, EvalCounters, IterateState, Model};
use crate::inner::{minimize_column, InnerConfig, InnerStatus};
use crate::linops::{
    apply_operator, cost_value, dual_slack, project_psd, EigenError, Factor, ShapeError, SymDense,
};
use crate::problem::{scale, ProblemError, ScalingError, ScalingRecord, SdpProblem};
use crate::scalar::{dot, pairwise_sum, Real, ScalarKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    /// Initial penalty; `sqrt(max block size)` when unset.
    pub mu_start: Option<f64>,
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    pub max_iters: usize,
    pub iters_z: usize,
    pub scaling: bool,
    pub shuffling: bool,
    pub double_sweep: bool,
    /// Dual step size.
    pub p: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub max_evals: usize,
    pub tau: f64,
    pub rat_min: f64,
    pub rat_max: f64,
    pub seed: u64,
    /// L-BFGS history length.
    pub memory: usize,
    /// Tighten the absolute inner tolerance to
    /// `min(epsilon, epsilon_factor * E)`, where `E` is the largest of
    /// `pinf`, `gap` and `compl*` after the previous outer iteration.
    pub adaptive_epsilon: bool,
    pub epsilon_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            mu_start: None,
            time_limit: f64::INFINITY,
            max_iters: usize::MAX,
            iters_z: 50,
            scaling: true,
            shuffling: false,
            double_sweep: false,
            p: 1.0,
            delta: 0.01,
            epsilon: 0.01,
            max_evals: 1000,
            tau: 1.03,
            rat_min: 0.8,
            rat_max: 1.2,
            seed: 0,
            memory: 10,
            adaptive_epsilon: true,
            epsilon_factor: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptionsError {
    #[error("tol must be positive, got {0}")]
    Tol(f64),
    #[error("tau must exceed 1, got {0}")]
    Tau(f64),
    #[error("need 0 < rat_min < rat_max, got rat_min = {0}, rat_max = {1}")]
    Ratio(f64, f64),
    #[error("dual step p must be positive, got {0}")]
    Step(f64),
    #[error("mu_start must be positive, got {0}")]
    MuStart(f64),
    #[error("epsilon and delta must be positive")]
    InnerTolerance,
    #[error("max_evals, iters_z and memory must be at least 1")]
    Counts,
    #[error("time_limit must be positive")]
    TimeLimit,
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), OptionsError> {
        if !(self.tol > 0.0) {
            return Err(OptionsError::Tol(self.tol));
        }
        if !(self.tau > 1.0) || !self.tau.is_finite() {
            return Err(OptionsError::Tau(self.tau));
        }
        if !(self.rat_min > 0.0 && self.rat_min < self.rat_max) {
            return Err(OptionsError::Ratio(self.rat_min, self.rat_max));
        }
        if !(self.p > 0.0) {
            return Err(OptionsError::Step(self.p));
        }
        if let Some(mu) = self.mu_start {
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(OptionsError::MuStart(mu));
            }
        }
        if !(self.epsilon > 0.0 && self.delta > 0.0) {
            return Err(OptionsError::InnerTolerance);
        }
        if self.max_evals == 0 || self.iters_z == 0 || self.memory == 0 {
            return Err(OptionsError::Counts);
        }
        if !(self.time_limit > 0.0) {
            return Err(OptionsError::TimeLimit);
        }
        Ok(())
    }

    fn inner_config<T: Real>(&self) -> InnerConfig<T> {
        InnerConfig {
            memory: self.memory,
            eps: T::from_f64(self.epsilon),
            delta: T::from_f64(self.delta),
            max_evals: self.max_evals,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Tol,
    Iter,
    Time,
    NonFinite,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Tol => "tol",
            Status::Iter => "iter",
            Status::Time => "time",
            Status::NonFinite => "nonfinite",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "tol" => Some(Status::Tol),
            "iter" => Some(Status::Iter),
            "time" => Some(Status::Time),
            "nonfinite" => Some(Status::NonFinite),
            _ => None,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Normalized KKT residuals. `dinf` and `compl` need the dual slack `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub pinf: f64,
    pub gap: f64,
    pub dinf: Option<f64>,
    pub compl: Option<f64>,
    pub compl_star: f64,
}

impl ErrorReport {
    /// Largest of `pinf`, `gap`, `dinf`, `compl`; `None` without `Z`.
    pub fn max_error(&self) -> Option<f64> {
        Some(self.pinf.max(self.gap).max(self.dinf?).max(self.compl?))
    }

    /// Largest of `pinf`, `gap`, `compl*`.
    pub fn max_proxy(&self) -> f64 {
        self.pinf.max(self.gap).max(self.compl_star)
    }
}

/// Solver state that can resume a solve, in the scaled problem's units.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart<T> {
    pub factors: Vec<Factor<T>>,
    pub y_eq: Vec<T>,
    pub y_ineq: Vec<T>,
    pub mu: T,
}

impl<T: Real> WarmStart<T> {
    pub fn kind(&self) -> ScalarKind {
        T::KIND
    }

    pub fn check_shapes(&self, problem: &SdpProblem<T>) -> Result<(), ShapeError> {
        crate::linops::check_factors(problem, &self.factors)?;
        let ranks = problem.ranks();
        for (b, f) in self.factors.iter().enumerate() {
            if f.rank() != ranks[b] {
                return Err(ShapeError::Rank {
                    block: b,
                    expected: ranks[b],
                    found: f.rank(),
                });
            }
        }
        if self.y_eq.len() != problem.num_eq() {
            return Err(ShapeError::DualLength {
                expected: problem.num_eq(),
                found: self.y_eq.len(),
            });
        }
        if self.y_ineq.len() != problem.num_ineq() {
            return Err(ShapeError::DualLength {
                expected: problem.num_ineq(),
                found: self.y_ineq.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub elapsed: Duration,
    pub inner_evals: u64,
    pub counters: EvalCounters,
    pub z_computations: usize,
    pub final_mu: f64,
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    /// `X_b = V_b^T V_b` for the original problem.
    pub factors: Vec<Factor<T>>,
    /// Equality multipliers followed by inequality multipliers.
    pub y: Vec<T>,
    pub z: Vec<SymDense<T>>,
    pub status: Status,
    /// Errors recomputed on the original data.
    pub report: ErrorReport,
    /// Errors on the scaled problem at termination.
    pub scaled_report: ErrorReport,
    /// `<C, X>` of the original (minimization) problem.
    pub primal_objective: f64,
    /// `a^T y_a + b^T y_b`.
    pub dual_objective: f64,
    pub stats: SolveStats,
}

impl<T: Real> Solution<T> {
    /// Objective in the orientation the problem was generated in.
    pub fn reported_objective(&self, problem: &SdpProblem<T>) -> f64 {
        problem.objective.apply(self.primal_objective)
    }

    pub fn gram(&self) -> Vec<SymDense<T>> {
        self.factors.iter().map(Factor::gram).collect()
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Options(#[from] OptionsError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error("warm start does not fit the problem: {0}")]
    WarmStart(#[from] ShapeError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// One line of the per-iteration progress log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iter: usize,
    pub mu: f64,
    pub ratio: f64,
    pub pinf: f64,
    pub gap: f64,
    pub compl_star: f64,
    pub elapsed: Duration,
}

impl fmt::Display for IterationLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iter {:>6}  mu {:.3e}  ratio {:.3e}  pinf {:.3e}  gap {:.3e}  compl* {:.3e}  t {:.2}s",
            self.iter,
            self.mu,
            self.ratio,
            self.pinf,
            self.gap,
            self.compl_star,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Random factors with columns uniform on the unit sphere, zero multipliers.
pub fn init_state<T: Real>(problem: &SdpProblem<T>, options: &SolverOptions) -> WarmStart<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let ranks = problem.ranks();
    let factors = problem
        .block_sizes
        .iter()
        .zip(&ranks)
        .map(|(&n, &k)| {
            let mut data = Vec::with_capacity(n * k);
            for _ in 0..n {
                let col: Vec<f64> = loop {
                    let c: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                    if c.iter().any(|&x| x != 0.0) {
                        break c;
                    }
                };
                let mut col: Vec<T> = col.into_iter().map(T::from_f64).collect();
                let norm = crate::scalar::norm2(&col);
                for x in col.iter_mut() {
                    *x /= norm;
                }
                data.extend(col);
            }
            Factor::from_columns(k, n, data)
        })
        .collect();
    let mu = options
        .mu_start
        .map(T::from_f64)
        .unwrap_or_else(|| T::from_usize(problem.max_block_size()).sqrt());
    WarmStart {
        factors,
        y_eq: vec![T::zero(); problem.num_eq()],
        y_ineq: vec![T::zero(); problem.num_ineq()],
        mu,
    }
}

/// Column visiting order for one outer iteration.
pub fn sweep_order(n: usize, options: &SolverOptions, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if options.shuffling {
        order.shuffle(rng);
    }
    if options.double_sweep {
        let back: Vec<usize> = order.iter().rev().copied().collect();
        order.extend(back);
    }
    order
}

/// `y_a += p mu (a - A(X))`, `y_b = [y_b + p mu (b - B(X))]_+` at the cached values.
pub fn update_duals<T: Real>(state: &mut IterateState<T>, problem: &SdpProblem<T>, p: T) {
    let m_a = problem.num_eq();
    let step = p * state.mu;
    for (j, y) in state.y_eq.iter_mut().enumerate() {
        *y += step * (problem.rhs[j] - state.cache.values[j]);
    }
    for (l, y) in state.y_ineq.iter_mut().enumerate() {
        let j = m_a + l;
        *y = (*y + step * (problem.rhs[j] - state.cache.values[j])).pos();
    }
}

/// Ratio of the residual norm to `mu` times the change of the operator
/// values since the last snapshot, over equalities and active inequalities.
/// Returns `+inf` when the values did not change.
pub fn penalty_ratio<T: Real>(state: &IterateState<T>, problem: &SdpProblem<T>) -> f64 {
    let m_a = problem.num_eq();
    let mut num = Vec::with_capacity(problem.num_constraints());
    let mut den = Vec::with_capacity(problem.num_constraints());
    for (j, (&x_new, &x_old)) in state.cache.values.iter().zip(&state.prev_values).enumerate() {
        let r = problem.rhs[j] - x_new;
        if j >= m_a && !(r >= T::zero() || state.y_ineq[j - m_a] > T::zero()) {
            continue;
        }
        num.push(r * r);
        let d = x_new - x_old;
        den.push(d * d);
    }
    let num = pairwise_sum(&num).sqrt();
    let den = state.mu * pairwise_sum(&den).sqrt();
    if den == T::zero() {
        return f64::INFINITY;
    }
    (num / den).to_f64()
}

/// Multiplies `mu` by `tau` above `rat_max` (including the `+inf` sentinel),
/// divides below `rat_min`.
pub fn update_penalty<T: Real>(mu: &mut T, ratio: f64, options: &SolverOptions) {
    let tau = T::from_f64(options.tau);
    if ratio > options.rat_max || ratio.is_nan() {
        *mu *= tau;
    } else if ratio < options.rat_min {
        *mu /= tau;
    }
}

/// Everything the error measures need except `Z`.
struct Residuals<T> {
    pinf: T,
    cx: T,
    by: T,
    lagr: T,
}

fn residuals<T: Real>(problem: &SdpProblem<T>, values: &[T], cx: T, y_eq: &[T], y_ineq: &[T]) -> Residuals<T> {
    let m_a = problem.num_eq();
    let mut viol = T::zero();
    let mut rhs_max = T::zero();
    for (j, &x) in values.iter().enumerate() {
        let r = problem.rhs[j] - x;
        let v = if j < m_a { r.abs() } else { r.pos() };
        viol = viol.max(v);
        rhs_max = rhs_max.max(problem.rhs[j].abs());
    }
    let y: Vec<T> = y_eq.iter().chain(y_ineq).copied().collect();
    let by = dot(&problem.rhs, &y);
    let mut terms = Vec::with_capacity(values.len() + 1);
    terms.push(cx);
    for (&yj, &xj) in y.iter().zip(values) {
        terms.push(-(yj * xj));
    }
    Residuals {
        pinf: viol / (T::one() + rhs_max),
        cx,
        by,
        lagr: pairwise_sum(&terms),
    }
}

fn finish_report<T: Real>(
    problem: &SdpProblem<T>,
    factors: &[Factor<T>],
    y: &[T],
    res: &Residuals<T>,
    z: Option<&[SymDense<T>]>,
) -> ErrorReport {
    let denom = T::one() + res.cx.abs() + res.by.abs();
    let mut report = ErrorReport {
        pinf: res.pinf.to_f64(),
        gap: ((res.cx - res.by).abs() / denom).to_f64(),
        dinf: None,
        compl: None,
        compl_star: (res.lagr.abs() / denom).to_f64(),
    };
    if let Some(z) = z {
        let slack = dual_slack(problem, y).expect("dual length checked by caller");
        let mut dsq = T::zero();
        let mut xz = T::zero();
        for (b, (s, zb)) in slack.iter().zip(z).enumerate() {
            dsq += s.sub(zb).frobenius_sq();
            xz += factors[b].gram().inner(zb);
        }
        let c_norm = problem.cost_frobenius_sq().sqrt();
        report.dinf = Some((dsq.sqrt() / (T::one() + c_norm)).to_f64());
        report.compl = Some((xz.abs() / denom).to_f64());
    }
    report
}

/// Dual slack estimate `[C - A^T y]_+` per block.
pub fn compute_z<T: Real>(problem: &SdpProblem<T>, y: &[T]) -> Result<Vec<SymDense<T>>, SolveError> {
    let slack = dual_slack(problem, y)?;
    slack.iter().map(|s| project_psd(s).map_err(SolveError::from)).collect()
}

/// Error measures at `X = V^T V`, recomputed from the problem data.
pub fn compute_errors<T: Real>(
    problem: &SdpProblem<T>,
    factors: &[Factor<T>],
    y_eq: &[T],
    y_ineq: &[T],
    z: Option<&[SymDense<T>]>,
) -> Result<ErrorReport, ShapeError> {
    let values = apply_operator(problem, factors)?;
    if y_eq.len() != problem.num_eq() || y_ineq.len() != problem.num_ineq() {
        return Err(ShapeError::DualLength {
            expected: problem.num_constraints(),
            found: y_eq.len() + y_ineq.len(),
        });
    }
    if let Some(z) = z {
        if z.len() != problem.num_blocks() || z.iter().zip(&problem.block_sizes).any(|(zb, &n)| zb.order() != n) {
            return Err(ShapeError::BlockCount {
                expected: problem.num_blocks(),
                found: z.len(),
            });
        }
    }
    let cx = cost_value(problem, factors);
    let res = residuals(problem, &values, cx, y_eq, y_ineq);
    let y: Vec<T> = y_eq.iter().chain(y_ineq).copied().collect();
    Ok(finish_report(problem, factors, &y, &res, z))
}

/// Solves with default progress handling (none).
pub fn solve<T: Real>(
    problem: &SdpProblem<T>,
    options: &SolverOptions,
    warm_start: Option<WarmStart<T>>,
) -> Result<(Solution<T>, WarmStart<T>), SolveError> {
    solve_with_progress(problem, options, warm_start, |_| {})
}

pub fn solve_with_progress<T: Real>(
    problem: &SdpProblem<T>,
    options: &SolverOptions,
    warm_start: Option<WarmStart<T>>,
    mut progress: impl FnMut(&IterationLog),
) -> Result<(Solution<T>, WarmStart<T>), SolveError> {
    let start = Instant::now();
    options.validate()?;
    problem.validate()?;
    let (scaled, record) = if options.scaling {
        scale(problem)?
    } else {
        (problem.clone(), ScalingRecord::identity(problem.num_constraints()))
    };
    let model = Model::new(scaled);
    let sp = &model.problem;

    let warm = match warm_start {
        Some(w) => {
            w.check_shapes(sp)?;
            if w.y_ineq.iter().any(|&y| y < T::zero()) || !(w.mu > T::zero()) {
                return Err(ShapeError::InvalidWarmStart.into());
            }
            w
        }
        None => init_state(sp, options),
    };
    let mut state = IterateState::new(sp, warm.factors, warm.y_eq, warm.y_ineq, warm.mu)?;

    let mut cfg = options.inner_config::<T>();
    let p = T::from_f64(options.p);
    let tol = options.tol;
    let time_limit = Duration::try_from_secs_f64(options.time_limit).unwrap_or(Duration::MAX);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x5eed_0fc1_u64);
    let mut stats = SolveStats::default();
    let mut iter = 0usize;
    let mut last_report = ErrorReport::default();

    let status = 'outer: loop {
        if iter >= options.max_iters {
            break Status::Iter;
        }
        iter += 1;
        if options.adaptive_epsilon && iter > 1 {
            let e = options.epsilon_factor * last_report.max_proxy();
            cfg.eps = T::from_f64(options.epsilon.min(e).max(f64::MIN_POSITIVE));
        }
        for b in 0..sp.num_blocks() {
            for i in sweep_order(sp.block_sizes[b], options, &mut rng) {
                if start.elapsed() >= time_limit {
                    iter -= 1;
                    break 'outer Status::Time;
                }
                let (v_new, evals, status, counters) = {
                    let mut obj = ColumnObjective::new(&model, &state, b, i);
                    let v_start = obj.v_start().to_vec();
                    let out = minimize_column(|v, g| obj.eval(v, g), &v_start, &cfg);
                    (out.v, out.evals, out.status, obj.counters)
                };
                stats.inner_evals += evals as u64;
                state.counters.column_evals += counters.column_evals;
                state.counters.hinge_active += counters.hinge_active;
                state.counters.hinge_inactive += counters.hinge_inactive;
                if status == InnerStatus::NonFinite {
                    break 'outer Status::NonFinite;
                }
                commit_column(&model, &mut state, b, i, &v_new);
            }
        }
        state.refresh_cache(sp);
        if state.cache.values.iter().any(|v| !v.is_finite())
            || state.factors.iter().any(|f| f.as_slice().iter().any(|v| !v.is_finite()))
        {
            break Status::NonFinite;
        }

        update_duals(&mut state, sp, p);
        debug_assert!(state.y_ineq.iter().all(|&y| y >= T::zero()));
        let ratio = penalty_ratio(&state, sp);
        update_penalty(&mut state.mu, ratio, options);
        state.prev_values.clone_from(&state.cache.values);

        let cx = cost_value(sp, &state.factors);
        let res = residuals(sp, &state.cache.values, cx, &state.y_eq, &state.y_ineq);
        let y = state.duals();
        let mut report = finish_report(sp, &state.factors, &y, &res, None);
        if !(report.max_proxy().is_finite() && cx.is_finite()) {
            last_report = report;
            break Status::NonFinite;
        }
        progress(&IterationLog {
            iter,
            mu: state.mu.to_f64(),
            ratio,
            pinf: report.pinf,
            gap: report.gap,
            compl_star: report.compl_star,
            elapsed: start.elapsed(),
        });
        if iter.is_multiple_of(options.iters_z) && report.max_proxy() < tol {
            let z = compute_z(sp, &y)?;
            stats.z_computations += 1;
            report = finish_report(sp, &state.factors, &y, &res, Some(&z));
            if report.max_error().is_some_and(|e| e < tol) {
                last_report = report;
                break Status::Tol;
            }
        }
        last_report = report;
    };

    stats.iterations = iter;
    stats.counters = state.counters;
    stats.final_mu = state.mu.to_f64();
    let warm = WarmStart {
        factors: state.factors.clone(),
        y_eq: state.y_eq.clone(),
        y_ineq: state.y_ineq.clone(),
        mu: state.mu,
    };
    let mut solution = unscale_solution(&warm, &record, problem, status, last_report)?;
    stats.elapsed = start.elapsed();
    solution.stats = stats;
    Ok((solution, warm))
}

/// Maps a scaled-space iterate to the original problem and recomputes all
/// error measures there, including a fresh dual slack projection.
pub fn unscale_solution<T: Real>(
    warm: &WarmStart<T>,
    record: &ScalingRecord<T>,
    original: &SdpProblem<T>,
    status: Status,
    scaled_report: ErrorReport,
) -> Result<Solution<T>, SolveError> {
    record.check_matches(original)?;
    let root = record.primal_scale().sqrt();
    let factors: Vec<Factor<T>> = warm.factors.iter().map(|f| f.scaled(root)).collect();
    let m_a = original.num_eq();
    let y: Vec<T> = warm
        .y_eq
        .iter()
        .chain(&warm.y_ineq)
        .enumerate()
        .map(|(j, &yj)| record.dual_scale(j) * yj)
        .collect();
    let finite = factors.iter().all(|f| f.as_slice().iter().all(|v| v.is_finite())) && y.iter().all(|v| v.is_finite());
    let z = if finite {
        compute_z(original, &y)?
    } else {
        original.block_sizes.iter().map(|&n| SymDense::zeros(n)).collect()
    };
    let report = compute_errors(original, &factors, &y[..m_a], &y[m_a..], finite.then_some(&z[..]))?;
    let primal = cost_value(original, &factors).to_f64();
    let dual = dot(&original.rhs, &y).to_f64();
    Ok(Solution {
        factors,
        y,
        z,
        status,
        report,
        scaled_report,
        primal_objective: primal,
        dual_objective: dual,
        stats: SolveStats::default(),
    })
}
