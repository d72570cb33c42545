//! Test problem families: random SDPs, Max-Cut relaxations (optionally with
//! triangle inequalities) and Lovász theta relaxations.
//!
//! Maximization families are emitted as minimization of the negated cost;
//! the stored [`ObjectiveReport`] converts the solver's objective back.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::problem::{Constraint, ObjectiveReport, ProblemError, SdpProblem, SymMatrix};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("graph line {line}: {msg}")]
    Graph { line: usize, msg: String },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Simple undirected weighted graph with 0-based vertices and `i < j` edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self, InstanceError> {
        let mut seen = BTreeSet::new();
        let mut norm = Vec::with_capacity(edges.len());
        for (idx, (i, j, w)) in edges.into_iter().enumerate() {
            let bad = |msg: String| InstanceError::Graph { line: idx + 1, msg };
            if i == j {
                return Err(bad(format!("loop at vertex {}", i + 1)));
            }
            if i >= n || j >= n {
                return Err(bad(format!("edge ({}, {}) outside 1..={n}", i + 1, j + 1)));
            }
            if !w.is_finite() {
                return Err(bad("nonfinite weight".into()));
            }
            let (a, b) = (i.min(j), i.max(j));
            if !seen.insert((a, b)) {
                return Err(bad(format!("duplicate edge ({}, {})", a + 1, b + 1)));
            }
            norm.push((a, b, w));
        }
        Ok(Graph { n, edges: norm })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0))).collect();
        Graph { n, edges }
    }

    pub fn empty(n: usize) -> Self {
        Graph { n, edges: Vec::new() }
    }

    pub fn cycle(n: usize) -> Self {
        let edges = (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n), 1.0)).collect();
        Graph::new(n, edges).expect("cycle on at least 3 vertices is simple")
    }

    /// Edge list text: header `n m`, then `i j [w]` per line with 1-based
    /// vertices and weight defaulting to 1. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or(InstanceError::Graph {
            line: 1,
            msg: "missing `n m` header".into(),
        })?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |t: &str, line: usize| {
            t.parse::<usize>().map_err(|_| InstanceError::Graph {
                line,
                msg: format!("invalid integer `{t}`"),
            })
        };
        if h.len() != 2 {
            return Err(InstanceError::Graph {
                line: hl,
                msg: "header must be `n m`".into(),
            });
        }
        let n = parse_usize(h[0], hl)?;
        let m = parse_usize(h[1], hl)?;
        let mut edges = Vec::with_capacity(m);
        let mut seen = BTreeSet::new();
        for (ln, l) in lines {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 2 && t.len() != 3 {
                return Err(InstanceError::Graph {
                    line: ln,
                    msg: "expected `i j [w]`".into(),
                });
            }
            let i = parse_usize(t[0], ln)?;
            let j = parse_usize(t[1], ln)?;
            let w = match t.get(2) {
                Some(s) => s.parse::<f64>().map_err(|_| InstanceError::Graph {
                    line: ln,
                    msg: format!("invalid weight `{s}`"),
                })?,
                None => 1.0,
            };
            let err = |msg: String| InstanceError::Graph { line: ln, msg };
            if i == 0 || j == 0 || i > n || j > n {
                return Err(err(format!("vertex out of range 1..={n}")));
            }
            if i == j {
                return Err(err(format!("loop at vertex {i}")));
            }
            if !w.is_finite() {
                return Err(err("nonfinite weight".into()));
            }
            let (a, b) = (i.min(j) - 1, i.max(j) - 1);
            if !seen.insert((a, b)) {
                return Err(err(format!("duplicate edge ({i}, {j})")));
            }
            edges.push((a, b, w));
        }
        if edges.len() != m {
            return Err(InstanceError::Graph {
                line: hl,
                msg: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        Ok(Graph { n, edges })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        Graph::parse(&fs::read_to_string(path)?)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let (a, b) = (i.min(j), i.max(j));
        self.edges.iter().any(|&(x, y, _)| x == a && y == b)
    }
}

/// Random upper-triangle pattern with `round(density * n(n+1)/2)` entries
/// (at least one), values uniform on `[-1, 1]`.
fn random_sparse(n: usize, density: f64, rng: &mut ChaCha8Rng) -> SymMatrix<f64> {
    let total = n * (n + 1) / 2;
    let count = ((density * total as f64).round() as usize).clamp(1, total);
    let picks = sample(rng, total, count).into_vec();
    let mut picks = picks;
    picks.sort_unstable();
    // Position p enumerates (r, c) with r <= c row by row.
    let mut trip = Vec::with_capacity(count);
    let (mut r, mut row_start) = (0usize, 0usize);
    for p in picks {
        while p >= row_start + (n - r) {
            row_start += n - r;
            r += 1;
        }
        let c = r + (p - row_start);
        let mut v: f64 = rng.gen_range(-1.0..=1.0);
        if v == 0.0 {
            v = 1.0;
        }
        trip.push((r, c, v));
    }
    SymMatrix::from_triplets(n, trip)
}

/// Random equality-constrained SDP. `A_1` is the identity on every block;
/// the cost and `A_2..A_m` are random with the given density; `a_j = trace(A_j)`
/// so that `X = I` is strictly feasible.
pub fn gen_random_sdp(block_sizes: &[usize], m: usize, density: f64, seed: u64) -> Result<SdpProblem, InstanceError> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(InstanceError::Parameter(format!("density must lie in (0, 1], got {density}")));
    }
    if m == 0 {
        return Err(InstanceError::Parameter("need at least one constraint".into()));
    }
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return Err(InstanceError::Parameter("block sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs: Vec<SymMatrix<f64>> = block_sizes.iter().map(|&n| random_sparse(n, density, &mut rng)).collect();
    let mut constraints = Vec::with_capacity(m);
    constraints.push(Constraint::new(
        block_sizes
            .iter()
            .enumerate()
            .map(|(b, &n)| (b, SymMatrix::identity(n)))
            .collect(),
    ));
    for _ in 1..m {
        constraints.push(Constraint::new(
            block_sizes
                .iter()
                .enumerate()
                .map(|(b, &n)| (b, random_sparse(n, density, &mut rng)))
                .collect(),
        ));
    }
    let rhs = constraints.iter().map(Constraint::trace).collect();
    Ok(SdpProblem::new(block_sizes.to_vec(), costs, constraints, rhs, m + 1)?)
}

/// Max-Cut relaxation `max <L/4, X>` s.t. `diag(X) = e`, optionally with all
/// `4 C(n, 3)` triangle inequalities. The cost diagonal is dropped and
/// re-added as the objective offset.
pub fn maxcut_relaxation(graph: &Graph, with_triangles: bool) -> Result<SdpProblem, InstanceError> {
    let n = graph.n;
    if n == 0 {
        return Err(InstanceError::Parameter("graph has no vertices".into()));
    }
    if with_triangles && n < 3 {
        return Err(InstanceError::Parameter(format!(
            "triangle inequalities need at least 3 vertices, graph has {n}"
        )));
    }
    // C = L/4: C_ii = deg_i / 4, C_ij = -w_ij / 4. Minimize <-C, X>.
    let offset: f64 = graph.edges.iter().map(|&(_, _, w)| w / 2.0).sum();
    let cost = SymMatrix::from_triplets(
        n,
        graph.edges.iter().filter(|e| e.2 != 0.0).map(|&(i, j, w)| (i, j, w / 4.0)),
    );
    let mut constraints: Vec<Constraint<f64>> = (0..n)
        .map(|i| Constraint::single(0, SymMatrix::from_triplets(n, [(i, i, 1.0)])))
        .collect();
    let mut rhs = vec![1.0; n];
    if with_triangles {
        const SIGNS: [[f64; 3]; 4] = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    for s in SIGNS {
                        constraints.push(Constraint::single(
                            0,
                            SymMatrix::from_triplets(n, [(i, j, 0.5 * s[0]), (i, k, 0.5 * s[1]), (j, k, 0.5 * s[2])]),
                        ));
                        rhs.push(-1.0);
                    }
                }
            }
        }
    }
    let p = SdpProblem::new(vec![n], vec![cost], constraints, rhs, n + 1)?;
    Ok(p.with_objective(ObjectiveReport { sign: -1.0, offset }))
}

/// Lovász theta relaxation `max <J, X>` s.t. `X_ij = 0` on edges and
/// `trace(X) = 1`; `strengthened` adds `X_ij >= 0` on non-edges.
pub fn theta_relaxation(graph: &Graph, strengthened: bool) -> Result<SdpProblem, InstanceError> {
    let n = graph.n;
    if n == 0 {
        return Err(InstanceError::Parameter("graph has no vertices".into()));
    }
    let cost = SymMatrix::from_triplets(n, (0..n).flat_map(|i| (i..n).map(move |j| (i, j, -1.0))));
    let mut constraints: Vec<Constraint<f64>> = graph
        .edges
        .iter()
        .map(|&(i, j, _)| Constraint::single(0, SymMatrix::from_triplets(n, [(i, j, 0.5)])))
        .collect();
    let mut rhs = vec![0.0; constraints.len()];
    constraints.push(Constraint::single(0, SymMatrix::identity(n)));
    rhs.push(1.0);
    let ineq_start = constraints.len() + 1;
    if strengthened {
        let edges: BTreeSet<(usize, usize)> = graph.edges.iter().map(|&(i, j, _)| (i, j)).collect();
        for i in 0..n {
            for j in i + 1..n {
                if !edges.contains(&(i, j)) {
                    constraints.push(Constraint::single(0, SymMatrix::from_triplets(n, [(i, j, 0.5)])));
                    rhs.push(0.0);
                }
            }
        }
    }
    let p = SdpProblem::new(vec![n], vec![cost], constraints, rhs, ineq_start)?;
    Ok(p.with_objective(ObjectiveReport {
        sign: -1.0,
        offset: 0.0,
    }))
}
