//! Random instances and dense reference computations shared by the
//! integration tests.

#![allow(dead_code)]

use augmix::linops::Factor;
use augmix::{Constraint, SdpProblem, SymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize, density: f64, force_nonzero: bool) -> SymMatrix<f64> {
    let mut trip = Vec::new();
    for r in 0..n {
        for c in r..n {
            if rng.gen_bool(density) {
                let v: f64 = rng.gen_range(-1.0..1.0);
                if v != 0.0 {
                    trip.push((r, c, v));
                }
            }
        }
    }
    if trip.is_empty() && force_nonzero {
        let r = rng.gen_range(0..n);
        trip.push((r, r, 1.0));
    }
    SymMatrix::from_triplets(n, trip)
}

/// A small random problem with `m_a` equalities and `m_b` inequalities over
/// one to three blocks. Some constraints span several blocks.
pub fn random_problem(seed: u64, m_a: usize, m_b: usize) -> SdpProblem {
    let mut rng = rng(seed);
    let q = rng.gen_range(1..=3);
    let sizes: Vec<usize> = (0..q).map(|_| rng.gen_range(1..=5)).collect();
    let costs = sizes.iter().map(|&n| random_sym(&mut rng, n, 0.6, false)).collect();
    let mut constraints = Vec::new();
    for _ in 0..m_a + m_b {
        let mut parts = Vec::new();
        for (b, &n) in sizes.iter().enumerate() {
            if rng.gen_bool(0.7) {
                let m = random_sym(&mut rng, n, 0.6, false);
                if !m.entries.is_empty() {
                    parts.push((b, m));
                }
            }
        }
        if parts.is_empty() {
            let b = rng.gen_range(0..q);
            parts.push((b, random_sym(&mut rng, sizes[b], 0.6, true)));
        }
        constraints.push(Constraint::new(parts));
    }
    let rhs = (0..m_a + m_b).map(|_| rng.gen_range(-2.0..2.0)).collect();
    SdpProblem::new(sizes, costs, constraints, rhs, m_a + 1).expect("valid random problem")
}

pub fn random_factors(seed: u64, problem: &SdpProblem, scale: f64) -> Vec<Factor<f64>> {
    let mut rng = rng(seed);
    problem
        .ranks()
        .iter()
        .zip(&problem.block_sizes)
        .map(|(&k, &n)| Factor::from_columns(k, n, (0..k * n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()))
        .collect()
}

/// Dense `X = V^T V` computed entry by entry.
pub fn dense_gram(f: &Factor<f64>) -> Vec<Vec<f64>> {
    let n = f.cols();
    let mut x = vec![vec![0.0; n]; n];
    for (i, row) in x.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = f.col(i).iter().zip(f.col(j)).map(|(a, b)| a * b).sum();
        }
    }
    x
}

/// Dense symmetric expansion of a sparse upper-triangle matrix.
pub fn dense(m: &SymMatrix<f64>) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; m.order]; m.order];
    for e in &m.entries {
        a[e.row][e.col] = e.value;
        a[e.col][e.row] = e.value;
    }
    a
}

pub fn frob_inner(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x * y).sum::<f64>()).sum()
}

/// `<C, X>` and `<A_j, X>` from dense matrices.
pub fn dense_values(problem: &SdpProblem, factors: &[Factor<f64>]) -> (f64, Vec<f64>) {
    let grams: Vec<_> = factors.iter().map(dense_gram).collect();
    let cost = problem.costs.iter().enumerate().map(|(b, c)| frob_inner(&dense(c), &grams[b])).sum();
    let values = problem
        .constraints
        .iter()
        .map(|con| con.parts.iter().map(|(b, m)| frob_inner(&dense(m), &grams[*b])).sum())
        .collect();
    (cost, values)
}

/// Augmented Lagrangian written out term by term with the hinge on the
/// inequality part.
pub fn dense_auglag(problem: &SdpProblem, factors: &[Factor<f64>], y: &[f64], mu: f64) -> f64 {
    let (cost, values) = dense_values(problem, factors);
    let m_a = problem.num_eq();
    let mut l = cost;
    for j in 0..problem.num_constraints() {
        let r = problem.rhs[j] - values[j];
        if j < m_a || y[j] + mu * r > 0.0 {
            l += y[j] * r + 0.5 * mu * r * r;
        } else {
            l -= y[j] * y[j] / (2.0 * mu);
        }
    }
    l
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
