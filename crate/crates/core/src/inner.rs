//! Limited-memory BFGS for the column subproblems.
//!
//! The stopping rule is `||g||_inf < max(eps, delta * ||g(v_start)||_inf)`.
//! Curvature pairs are kept only for the duration of one call.

use std::collections::VecDeque;

use crate::scalar::{dot, norm2, norm_inf, Real};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const CURVATURE_GUARD: f64 = 1e-12;
const MAX_STEP: f64 = 1e20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig<T> {
    /// Number of curvature pairs kept.
    pub memory: usize,
    /// Absolute gradient tolerance.
    pub eps: T,
    /// Tolerance relative to the gradient at the start point.
    pub delta: T,
    /// Objective/gradient evaluations allowed, including the first one.
    pub max_evals: usize,
}

impl<T: Real> Default for InnerConfig<T> {
    fn default() -> Self {
        InnerConfig {
            memory: 10,
            eps: T::from_f64(0.01),
            delta: T::from_f64(0.01),
            max_evals: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStatus {
    Converged,
    /// Evaluation budget exhausted.
    Budget,
    /// No step satisfying the Wolfe conditions was found.
    LineSearch,
    /// The objective or gradient was not finite at the start point.
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct InnerOutcome<T> {
    pub v: Vec<T>,
    pub value: T,
    pub grad: Vec<T>,
    pub evals: usize,
    pub status: InnerStatus,
}

impl<T> InnerOutcome<T> {
    pub fn converged(&self) -> bool {
        self.status == InnerStatus::Converged
    }
}

fn all_finite<T: Real>(x: &[T]) -> bool {
    x.iter().all(|v| v.is_finite())
}

struct Point<T> {
    alpha: T,
    f: T,
    g: Vec<T>,
    dphi: T,
}

enum Search<T> {
    Found(Point<T>),
    /// Best sufficient-decrease point seen, if any.
    Failed(Option<Point<T>>),
}

struct Evaluator<'f, T, F> {
    f: &'f mut F,
    evals: usize,
    max_evals: usize,
    x: Vec<T>,
    _t: std::marker::PhantomData<T>,
}

impl<T: Real, F: FnMut(&[T], &mut [T]) -> T> Evaluator<'_, T, F> {
    fn exhausted(&self) -> bool {
        self.evals >= self.max_evals
    }

    fn at(&mut self, base: &[T], dir: &[T], alpha: T) -> Point<T> {
        for ((x, &b), &d) in self.x.iter_mut().zip(base).zip(dir) {
            *x = b + alpha * d;
        }
        let mut g = vec![T::zero(); base.len()];
        let f = (self.f)(&self.x, &mut g);
        self.evals += 1;
        let dphi = dot(&g, dir);
        Point { alpha, f, g, dphi }
    }
}

fn finite_point<T: Real>(p: &Point<T>) -> bool {
    p.f.is_finite() && p.dphi.is_finite() && all_finite(&p.g)
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`, kept
/// away from the interval ends; falls back to bisection.
fn interpolate<T: Real>(lo: &Point<T>, hi: &Point<T>) -> T {
    let (a, b) = (lo.alpha, hi.alpha);
    let width = b - a;
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let d1 = lo.dphi + hi.dphi - three * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.dphi * hi.dphi;
    let mid = a + half * width;
    if !(disc >= T::zero()) {
        return mid;
    }
    let sgn = if b > a { T::one() } else { -T::one() };
    let d2 = sgn * disc.sqrt();
    let denom = hi.dphi - lo.dphi + d2 + d2;
    if denom == T::zero() {
        return mid;
    }
    let c = b - (b - a) * (hi.dphi + d2 - d1) / denom;
    let guard = T::from_f64(0.1) * width.abs();
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    if !c.is_finite() || c < left + guard || c > right - guard {
        mid
    } else {
        c
    }
}

fn line_search<T: Real, F: FnMut(&[T], &mut [T]) -> T>(
    ev: &mut Evaluator<'_, T, F>,
    x0: &[T],
    f0: T,
    dir: &[T],
    dphi0: T,
    alpha_init: T,
) -> Search<T> {
    let c1 = T::from_f64(C1);
    let c2 = T::from_f64(C2);
    let two = T::from_f64(2.0);
    let max_step = T::from_f64(MAX_STEP);
    let armijo = |p: &Point<T>| p.f <= f0 + c1 * p.alpha * dphi0;
    let curvature = |p: &Point<T>| p.dphi.abs() <= -(c2 * dphi0);

    let mut prev = Point {
        alpha: T::zero(),
        f: f0,
        g: Vec::new(),
        dphi: dphi0,
    };
    let mut alpha = alpha_init;
    let mut first = true;
    loop {
        if ev.exhausted() {
            return Search::Failed(if prev.alpha > T::zero() { Some(prev) } else { None });
        }
        let cur = ev.at(x0, dir, alpha);
        if !finite_point(&cur) {
            // Too long: shrink towards the last good step.
            alpha = prev.alpha + T::from_f64(0.5) * (alpha - prev.alpha);
            if alpha <= prev.alpha {
                return Search::Failed(if prev.alpha > T::zero() { Some(prev) } else { None });
            }
            continue;
        }
        if !armijo(&cur) || (!first && cur.f >= prev.f) {
            return zoom(ev, x0, f0, dir, dphi0, prev, cur);
        }
        if curvature(&cur) {
            return Search::Found(cur);
        }
        if cur.dphi >= T::zero() {
            return zoom(ev, x0, f0, dir, dphi0, cur, prev);
        }
        first = false;
        if alpha >= max_step {
            return Search::Failed(Some(cur));
        }
        alpha = two * alpha;
        prev = cur;
    }
}

fn zoom<T: Real, F: FnMut(&[T], &mut [T]) -> T>(
    ev: &mut Evaluator<'_, T, F>,
    x0: &[T],
    f0: T,
    dir: &[T],
    dphi0: T,
    mut lo: Point<T>,
    mut hi: Point<T>,
) -> Search<T> {
    let c1 = T::from_f64(C1);
    let c2 = T::from_f64(C2);
    let best_lo = |lo: Point<T>| if lo.alpha > T::zero() { Some(lo) } else { None };
    loop {
        if ev.exhausted() {
            return Search::Failed(best_lo(lo));
        }
        let width = (hi.alpha - lo.alpha).abs();
        let scale = lo.alpha.abs().max(hi.alpha.abs());
        if width <= T::epsilon() * scale {
            return Search::Failed(best_lo(lo));
        }
        let alpha = interpolate(&lo, &hi);
        let cur = ev.at(x0, dir, alpha);
        if !finite_point(&cur) {
            // Treat as a failed sufficient-decrease test.
            hi = Point {
                alpha,
                f: T::from_f64(f64::MAX),
                g: Vec::new(),
                dphi: T::zero(),
            };
            continue;
        }
        if cur.f > f0 + c1 * alpha * dphi0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.dphi.abs() <= -(c2 * dphi0) {
                return Search::Found(cur);
            }
            if cur.dphi * (hi.alpha - lo.alpha) >= T::zero() {
                hi = std::mem::replace(&mut lo, cur);
            } else {
                lo = cur;
            }
        }
    }
}

/// Two-loop recursion: returns `-H g`.
fn direction<T: Real>(g: &[T], history: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q: Vec<T> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|&v| -v).collect()
}

/// Minimizes `f` starting at `v_start`. `f` writes the gradient into its
/// second argument and returns the objective value.
pub fn minimize_column<T: Real, F: FnMut(&[T], &mut [T]) -> T>(
    mut f: F,
    v_start: &[T],
    config: &InnerConfig<T>,
) -> InnerOutcome<T> {
    let k = v_start.len();
    let mut g = vec![T::zero(); k];
    let f0 = f(v_start, &mut g);
    let mut ev = Evaluator {
        f: &mut f,
        evals: 1,
        max_evals: config.max_evals.max(1),
        x: vec![T::zero(); k],
        _t: std::marker::PhantomData,
    };
    if !f0.is_finite() || !all_finite(&g) {
        return InnerOutcome {
            v: v_start.to_vec(),
            value: f0,
            grad: g,
            evals: 1,
            status: InnerStatus::NonFinite,
        };
    }
    let threshold = config.eps.max(config.delta * norm_inf(&g));
    let mut x = v_start.to_vec();
    let mut fx = f0;
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(config.memory);
    let finish = |x: Vec<T>, fx: T, g: Vec<T>, evals: usize, status| InnerOutcome {
        v: x,
        value: fx,
        grad: g,
        evals,
        status,
    };

    loop {
        if norm_inf(&g) < threshold {
            return finish(x, fx, g, ev.evals, InnerStatus::Converged);
        }
        if ev.exhausted() {
            return finish(x, fx, g, ev.evals, InnerStatus::Budget);
        }
        let mut dir = direction(&g, &history);
        let mut dphi0 = dot(&g, &dir);
        if !(dphi0 < T::zero()) || !all_finite(&dir) {
            history.clear();
            dir = g.iter().map(|&v| -v).collect();
            dphi0 = dot(&g, &dir);
        }
        let alpha_init = if history.is_empty() {
            T::one().min(T::one() / norm_inf(&g))
        } else {
            T::one()
        };
        match line_search(&mut ev, &x, fx, &dir, dphi0, alpha_init) {
            Search::Found(p) => {
                let s: Vec<T> = dir.iter().map(|&d| p.alpha * d).collect();
                let y: Vec<T> = p.g.iter().zip(&g).map(|(&a, &b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > T::from_f64(CURVATURE_GUARD) * norm2(&s) * norm2(&y) {
                    if history.len() == config.memory {
                        history.pop_front();
                    }
                    history.push_back((s, y, T::one() / sy));
                }
                for (xi, &si) in x.iter_mut().zip(&dir) {
                    *xi += p.alpha * si;
                }
                fx = p.f;
                g = p.g;
            }
            Search::Failed(best) => {
                let status = if ev.exhausted() {
                    InnerStatus::Budget
                } else {
                    InnerStatus::LineSearch
                };
                if let Some(p) = best {
                    for (xi, &di) in x.iter_mut().zip(&dir) {
                        *xi += p.alpha * di;
                    }
                    fx = p.f;
                    g = p.g;
                    if norm_inf(&g) < threshold {
                        return finish(x, fx, g, ev.evals, InnerStatus::Converged);
                    }
                    if status == InnerStatus::LineSearch {
                        // Progress was made; retry from the new point with fresh curvature.
                        history.clear();
                        continue;
                    }
                } else if !history.is_empty() && status == InnerStatus::LineSearch {
                    history.clear();
                    continue;
                }
                return finish(x, fx, g, ev.evals, status);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shifted_quadratic(c: Vec<f64>) -> impl FnMut(&[f64], &mut [f64]) -> f64 {
        move |v, g| {
            let mut f = 0.0;
            for ((gi, &vi), &ci) in g.iter_mut().zip(v).zip(&c) {
                *gi = 2.0 * (vi - ci);
                f += (vi - ci) * (vi - ci);
            }
            f
        }
    }

    #[test]
    fn quadratic_minimizer() {
        let c = vec![1.0, -2.0, 0.5, 3.0];
        let cfg = InnerConfig {
            eps: 1e-9,
            delta: 1e-12,
            ..Default::default()
        };
        let out = minimize_column(shifted_quadratic(c.clone()), &[0.3, 0.1, -4.0, 2.0], &cfg);
        assert!(out.converged());
        let dist: f64 = out.v.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dist <= 1e-6, "{dist}");
        assert!(out.evals <= 30, "{}", out.evals);
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let c = vec![1.0, 1.0];
        let out = minimize_column(shifted_quadratic(c.clone()), &[1.0, 1.0 + 1e-4], &InnerConfig::default());
        assert!(out.converged());
        assert_eq!(out.evals, 1);
        assert_eq!(out.v, vec![1.0, 1.0 + 1e-4]);
    }

    #[test]
    fn budget_of_two() {
        // Rosenbrock from the standard start.
        let rosen = |v: &[f64], g: &mut [f64]| {
            let (x, y) = (v[0], v[1]);
            g[0] = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
            g[1] = 200.0 * (y - x * x);
            (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
        };
        let cfg = InnerConfig {
            max_evals: 2,
            eps: 1e-10,
            delta: 1e-10,
            ..Default::default()
        };
        let out = minimize_column(rosen, &[-1.2, 1.0], &cfg);
        assert!(!out.converged());
        assert!(out.evals <= 2);
        assert!(out.value <= 24.2);
    }

    #[test]
    fn nonfinite_start_aborts() {
        let f = |_: &[f64], g: &mut [f64]| {
            g[0] = 0.0;
            f64::NAN
        };
        let out = minimize_column(f, &[2.0], &InnerConfig::default());
        assert_eq!(out.status, InnerStatus::NonFinite);
        assert_eq!(out.v, vec![2.0]);
    }

    #[test]
    fn nonfinite_trial_points_are_backtracked() {
        // log barrier: infinite for v <= 0, minimum at v = 1.
        let f = |v: &[f64], g: &mut [f64]| {
            if v[0] <= 0.0 {
                g[0] = f64::NAN;
                return f64::INFINITY;
            }
            g[0] = 1.0 - 1.0 / v[0];
            v[0] - v[0].ln()
        };
        let cfg = InnerConfig {
            eps: 1e-10,
            delta: 1e-12,
            ..Default::default()
        };
        let out = minimize_column(f, &[5.0], &cfg);
        assert!(out.converged());
        assert!((out.v[0] - 1.0).abs() < 1e-8);
    }
}
