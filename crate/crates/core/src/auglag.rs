//! Augmented Lagrangian of the factored problem and its column restrictions.
//!
//! With residuals `r_j = a_j - <A_j, X>` (equalities) and
//! `r_j = b_j - <B_j, X>` (inequalities), every constraint contributes
//!
//! ```text
//! equality:                 y_j r_j + mu/2 r_j^2
//! inequality, j in I:       y_j r_j + mu/2 r_j^2
//! inequality, j not in I:  -y_j^2 / (2 mu)
//! ```
//!
//! where `I = { j : y_j + mu r_j > 0 }`. The multiplier weight
//! `w_j = y_j + mu r_j` (zero outside `I`) is what enters the gradient
//! `2 V (C - sum_j w_j A_j)`.

use crate::linops::{
    apply_operator, column_deltas, cost_value, ColumnSlices, ColumnWork, Factor, OperatorCache, ShapeError,
};
use crate::problem::SdpProblem;
use crate::scalar::{pairwise_sum, Real};

/// Problem data prepared for column updates.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub problem: SdpProblem<T>,
    pub slices: ColumnSlices<T>,
}

impl<T: Real> Model<T> {
    pub fn new(problem: SdpProblem<T>) -> Self {
        let slices = ColumnSlices::new(&problem);
        Model { problem, slices }
    }
}

/// Counters used for diagnostics and instrumentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounters {
    /// Column objective/gradient evaluations.
    pub column_evals: u64,
    /// Inequality terms evaluated on the hinge branch (`j in I`).
    pub hinge_active: u64,
    /// Inequality terms evaluated off the hinge branch.
    pub hinge_inactive: u64,
}

#[derive(Debug, Clone)]
pub struct IterateState<T> {
    pub factors: Vec<Factor<T>>,
    pub y_eq: Vec<T>,
    pub y_ineq: Vec<T>,
    pub mu: T,
    pub cache: OperatorCache<T>,
    /// Operator values at the previous outer iterate.
    pub prev_values: Vec<T>,
    pub counters: EvalCounters,
}

impl<T: Real> IterateState<T> {
    pub fn new(
        problem: &SdpProblem<T>,
        factors: Vec<Factor<T>>,
        y_eq: Vec<T>,
        y_ineq: Vec<T>,
        mu: T,
    ) -> Result<Self, ShapeError> {
        if y_eq.len() != problem.num_eq() {
            return Err(ShapeError::DualLength {
                expected: problem.num_eq(),
                found: y_eq.len(),
            });
        }
        if y_ineq.len() != problem.num_ineq() {
            return Err(ShapeError::DualLength {
                expected: problem.num_ineq(),
                found: y_ineq.len(),
            });
        }
        let cache = OperatorCache::compute(problem, &factors)?;
        let prev_values = cache.values.clone();
        Ok(IterateState {
            factors,
            y_eq,
            y_ineq,
            mu,
            cache,
            prev_values,
            counters: EvalCounters::default(),
        })
    }

    /// Multiplier of constraint `j` in the global (equalities first) order.
    pub fn dual(&self, j: usize) -> T {
        if j < self.y_eq.len() {
            self.y_eq[j]
        } else {
            self.y_ineq[j - self.y_eq.len()]
        }
    }

    pub fn duals(&self) -> Vec<T> {
        self.y_eq.iter().chain(&self.y_ineq).copied().collect()
    }

    /// Recomputes the operator cache from scratch.
    pub fn refresh_cache(&mut self, problem: &SdpProblem<T>) {
        self.cache = OperatorCache::compute(problem, &self.factors).expect("factor shapes fixed at construction");
    }
}

/// Contribution of one constraint at operator value `x`, and its weight `w`.
#[inline]
fn term<T: Real>(is_ineq: bool, rhs: T, y: T, mu: T, x: T) -> (T, T, bool) {
    let half = T::from_f64(0.5);
    let r = rhs - x;
    let w = y + mu * r;
    if !is_ineq || w > T::zero() {
        (y * r + half * mu * r * r, w, true)
    } else {
        (-(y * y) / (mu + mu), T::zero(), false)
    }
}

/// Change of one constraint's contribution when its value moves from `x_old`
/// by `dx`. Both-active and both-equality cases use a cancellation-free form.
#[inline]
fn term_delta<T: Real>(is_ineq: bool, rhs: T, y: T, mu: T, x_old: T, dx: T) -> (T, T, bool) {
    let half = T::from_f64(0.5);
    let x_new = x_old + dx;
    let r_old = rhs - x_old;
    let w_new = y + mu * (rhs - x_new);
    if !is_ineq {
        // -(dx) (y + mu r_old - mu dx / 2)
        return (-dx * (y + mu * r_old - half * mu * dx), w_new, true);
    }
    let active_old = y + mu * r_old > T::zero();
    let active_new = w_new > T::zero();
    match (active_old, active_new) {
        (true, true) => (-dx * (y + mu * r_old - half * mu * dx), w_new, true),
        (false, false) => (T::zero(), T::zero(), false),
        _ => {
            let (f_old, _, _) = term(true, rhs, y, mu, x_old);
            let (f_new, w, act) = term(true, rhs, y, mu, x_new);
            let inactive = -(y * y) / (mu + mu);
            let f_old = if active_old { f_old } else { inactive };
            if act && active_new {
                (f_new - f_old, w, true)
            } else {
                (inactive - f_old, T::zero(), false)
            }
        }
    }
}

/// Full augmented Lagrangian at the state's iterate, using the cached
/// operator values.
pub fn eval_auglag<T: Real>(problem: &SdpProblem<T>, state: &IterateState<T>) -> T {
    let m_a = problem.num_eq();
    let mut terms = Vec::with_capacity(problem.num_constraints() + 1);
    terms.push(cost_value(problem, &state.factors));
    for (j, &x) in state.cache.values.iter().enumerate() {
        let (f, _, _) = term(j >= m_a, problem.rhs[j], state.dual(j), state.mu, x);
        terms.push(f);
    }
    pairwise_sum(&terms)
}

/// Augmented Lagrangian recomputed from the factors without the cache.
pub fn eval_auglag_direct<T: Real>(problem: &SdpProblem<T>, state: &IterateState<T>) -> T {
    let values = apply_operator(problem, &state.factors).expect("factor shapes fixed at construction");
    let m_a = problem.num_eq();
    let mut terms = Vec::with_capacity(values.len() + 1);
    terms.push(cost_value(problem, &state.factors));
    for (j, &x) in values.iter().enumerate() {
        terms.push(term(j >= m_a, problem.rhs[j], state.dual(j), state.mu, x).0);
    }
    pairwise_sum(&terms)
}

/// Multiplier weights `w_j` at the cached operator values.
pub fn weights<T: Real>(problem: &SdpProblem<T>, state: &IterateState<T>) -> Vec<T> {
    let m_a = problem.num_eq();
    state
        .cache
        .values
        .iter()
        .enumerate()
        .map(|(j, &x)| term(j >= m_a, problem.rhs[j], state.dual(j), state.mu, x).1)
        .collect()
}

/// Gradient with respect to every factor: `2 V (C - sum_j w_j A_j)` per block.
pub fn full_gradient<T: Real>(problem: &SdpProblem<T>, state: &IterateState<T>) -> Vec<Factor<T>> {
    let w = weights(problem, state);
    let two = T::from_f64(2.0);
    let mut grads: Vec<Factor<T>> = state
        .factors
        .iter()
        .map(|f| Factor::zeros(f.rank(), f.cols()))
        .collect();
    let mut scatter = |b: usize, coef: T, m: &crate::problem::SymMatrix<T>| {
        let v = &state.factors[b];
        let g = &mut grads[b];
        for e in &m.entries {
            let s = two * coef * e.value;
            if e.row == e.col {
                for (gk, &vk) in g.col_mut(e.row).iter_mut().zip(v.col(e.row)) {
                    *gk += s * vk;
                }
            } else {
                for (gk, &vk) in g.col_mut(e.col).iter_mut().zip(v.col(e.row)) {
                    *gk += s * vk;
                }
                for (gk, &vk) in g.col_mut(e.row).iter_mut().zip(v.col(e.col)) {
                    *gk += s * vk;
                }
            }
        }
    };
    for (b, c) in problem.costs.iter().enumerate() {
        scatter(b, T::one(), c);
    }
    for (j, con) in problem.constraints.iter().enumerate() {
        if w[j] == T::zero() {
            continue;
        }
        for (b, m) in &con.parts {
            scatter(*b, -w[j], m);
        }
    }
    grads
}

/// The augmented Lagrangian restricted to one column, measured relative to
/// its value at the column's current content `v_start`.
pub struct ColumnObjective<'a, T> {
    model: &'a Model<T>,
    state: &'a IterateState<T>,
    block: usize,
    col: usize,
    v_start: Vec<T>,
    work: ColumnWork<T>,
    /// `C_(i) - sum_j w_j (A_j)_(i)` as a dense length-`n` vector.
    s: Vec<T>,
    deltas: Vec<T>,
    weights: Vec<T>,
    pub counters: EvalCounters,
}

impl<'a, T: Real> ColumnObjective<'a, T> {
    pub fn new(model: &'a Model<T>, state: &'a IterateState<T>, block: usize, col: usize) -> Self {
        let v_start = state.factors[block].col(col).to_vec();
        ColumnObjective {
            model,
            state,
            block,
            col,
            v_start,
            work: ColumnWork::new(),
            s: vec![T::zero(); state.factors[block].cols()],
            deltas: Vec::new(),
            weights: Vec::new(),
            counters: EvalCounters::default(),
        }
    }

    pub fn v_start(&self) -> &[T] {
        &self.v_start
    }

    /// Returns `L(V(v)) - L(V(v_start))` and writes the partial gradient.
    pub fn eval(&mut self, v: &[T], grad: &mut [T]) -> T {
        let problem = &self.model.problem;
        let slice = self.model.slices.column(self.block, self.col);
        let factor = &self.state.factors[self.block];
        let state = self.state;
        let m_a = problem.num_eq();
        self.counters.column_evals += 1;

        let dcost = column_deltas(slice, factor, self.col, &self.v_start, v, &mut self.work);

        self.deltas.clear();
        self.deltas.push(dcost);
        self.weights.clear();
        for (l, &j) in slice.touched.iter().enumerate() {
            let is_ineq = j >= m_a;
            let (df, w, active) = term_delta(
                is_ineq,
                problem.rhs[j],
                state.dual(j),
                state.mu,
                state.cache.values[j],
                self.work.delta[l],
            );
            if is_ineq {
                if active {
                    self.counters.hinge_active += 1;
                } else {
                    self.counters.hinge_inactive += 1;
                }
            }
            self.deltas.push(df);
            self.weights.push(w);
        }
        let value = pairwise_sum(&self.deltas);

        let i = self.col;
        self.s.iter_mut().for_each(|x| *x = T::zero());
        self.s[i] = slice.cost_diag;
        for &(r, c) in &slice.cost_off {
            self.s[r] += c;
        }
        for &(l, a) in &slice.diag {
            self.s[i] -= self.weights[l] * a;
        }
        for &(l, r, a) in &slice.off {
            self.s[r] -= self.weights[l] * a;
        }
        let two = T::from_f64(2.0);
        grad.iter_mut().for_each(|g| *g = T::zero());
        for (r, &sr) in self.s.iter().enumerate() {
            if sr == T::zero() {
                continue;
            }
            let vr = if r == i { v } else { factor.col(r) };
            for (g, &x) in grad.iter_mut().zip(vr) {
                *g += sr * x;
            }
        }
        for g in grad.iter_mut() {
            *g *= two;
        }
        value
    }
}

/// `L(V(v_trial))` and its partial gradient in column `col` of `block`.
pub fn column_objective_grad<T: Real>(
    model: &Model<T>,
    state: &IterateState<T>,
    block: usize,
    col: usize,
    v_trial: &[T],
) -> (T, Vec<T>) {
    let base = eval_auglag(&model.problem, state);
    let mut obj = ColumnObjective::new(model, state, block, col);
    let mut grad = vec![T::zero(); v_trial.len()];
    let delta = obj.eval(v_trial, &mut grad);
    (base + delta, grad)
}

/// Replaces column `col` of `block` and updates the operator cache incrementally.
pub fn commit_column<T: Real>(model: &Model<T>, state: &mut IterateState<T>, block: usize, col: usize, v_new: &[T]) {
    let slice = model.slices.column(block, col);
    let mut work = ColumnWork::new();
    let v_start = state.factors[block].col(col).to_vec();
    column_deltas(slice, &state.factors[block], col, &v_start, v_new, &mut work);
    for (l, &j) in slice.touched.iter().enumerate() {
        state.cache.values[j] += work.delta[l];
    }
    state.factors[block].col_mut(col).copy_from_slice(v_new);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Constraint, SymMatrix};

    fn scalar_problem() -> SdpProblem {
        // min 0 s.t. x = 1, one 1x1 block
        SdpProblem::new(
            vec![1],
            vec![SymMatrix::zeros(1)],
            vec![Constraint::single(0, SymMatrix::identity(1))],
            vec![1.0],
            2,
        )
        .unwrap()
    }

    fn stagnation_fixture() -> SdpProblem {
        SdpProblem::new(
            vec![1, 1],
            vec![SymMatrix::identity(1), SymMatrix::zeros(1)],
            vec![
                Constraint::new(vec![(0, SymMatrix::identity(1)), (1, SymMatrix::identity(1))]),
                Constraint::single(1, SymMatrix::identity(1)),
            ],
            vec![2.0, 1.0],
            3,
        )
        .unwrap()
    }

    #[test]
    fn hand_evaluation_scalar() {
        let p = scalar_problem();
        let st = IterateState::new(&p, vec![Factor::from_columns(1, 1, vec![0.0])], vec![0.0], vec![], 2.0).unwrap();
        assert_eq!(eval_auglag(&p, &st), 1.0);
    }

    #[test]
    fn feasible_point_zero_duals() {
        let p = scalar_problem();
        let st = IterateState::new(&p, vec![Factor::from_columns(1, 1, vec![1.0])], vec![0.0], vec![], 3.0).unwrap();
        assert_eq!(eval_auglag(&p, &st), 0.0);
    }

    #[test]
    fn stagnation_fixture_value_and_gradient() {
        let p = stagnation_fixture();
        let mu = 4.0;
        let st = IterateState::new(
            &p,
            vec![
                Factor::from_columns(1, 1, vec![0.0]),
                Factor::from_columns(1, 1, vec![1.5f64.sqrt()]),
            ],
            vec![2.0, -2.0],
            vec![],
            mu,
        )
        .unwrap();
        // y1 (2 - 1.5) + y2 (1 - 1.5) + mu/2 (0.5^2 + 0.5^2) = 1 + 1 + 1
        let l = eval_auglag(&p, &st);
        assert!((l - 3.0).abs() < 1e-14, "{l}");
        let model = Model::new(p);
        let (val, g) = column_objective_grad(&model, &st, 0, 0, &[0.0]);
        assert!((val - l).abs() < 1e-14);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn all_zero_data() {
        let p = SdpProblem::new(vec![2], vec![SymMatrix::zeros(2)], vec![], vec![], 1).unwrap();
        let st = IterateState::new(&p, vec![Factor::from_columns(1, 2, vec![0.0, 0.0])], vec![], vec![], 1.0).unwrap();
        let model = Model::new(p);
        let (v, g) = column_objective_grad(&model, &st, 0, 1, &[0.0]);
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0]);
        let full = full_gradient(&model.problem, &st);
        assert!(full[0].as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn commit_identical_column_is_bitwise_noop() {
        let p = stagnation_fixture();
        let mut st = IterateState::new(
            &p,
            vec![Factor::from_columns(1, 1, vec![0.3]), Factor::from_columns(1, 1, vec![-1.1])],
            vec![0.5, 0.25],
            vec![],
            2.0,
        )
        .unwrap();
        let model = Model::new(p);
        let before = st.cache.clone();
        let col = st.factors[1].col(0).to_vec();
        commit_column(&model, &mut st, 1, 0, &col);
        assert_eq!(before, st.cache);
    }

    #[test]
    fn hinge_branches() {
        // inequality x >= 1 on a 1x1 block
        let p = SdpProblem::new(
            vec![1],
            vec![SymMatrix::zeros(1)],
            vec![Constraint::single(0, SymMatrix::identity(1))],
            vec![1.0],
            1,
        )
        .unwrap();
        // x = 4: residual -3; y = 1, mu = 1: y + mu r = -2 -> inactive, value -y^2/(2mu)
        let st = IterateState::new(&p, vec![Factor::from_columns(1, 1, vec![2.0])], vec![], vec![1.0], 1.0).unwrap();
        assert_eq!(eval_auglag(&p, &st), -0.5);
        // x = 0: residual 1, active: y r + mu/2 r^2 = 1.5
        let st = IterateState::new(&p, vec![Factor::from_columns(1, 1, vec![0.0])], vec![], vec![1.0], 1.0).unwrap();
        assert_eq!(eval_auglag(&p, &st), 1.5);
    }
}
