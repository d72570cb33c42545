//! Text formats for solutions and warm starts.
//!
//! Both formats are line oriented. Scalars are written as exact tokens of the
//! file's scalar kind (`hi,lo` pairs for double-double), so reading a file
//! back reproduces every stored value bitwise.
//!
//! ```text
//! augmix-solution 1
//! scalar double
//! status tol
//! blocks 1 3
//! ranks 2
//! constraints 4
//! objective <primal> <dual>            # binary64 summary values
//! report <pinf> <gap> <dinf|-> <compl|-> <compl*>
//! iterations <count>
//! v <block> <column> <k values>        # one line per factor column
//! y <index> <value>
//! z <block> <row> <col> <value>        # upper triangle, nonzeros only
//! ```
//!
//! Warm starts use the header `augmix-warmstart 1`, the same `scalar`,
//! `blocks` and `ranks` lines, then `duals <m_a> <m_b>`, `mu <value>`, `v`
//! lines, and `ya`/`yb` lines with 1-based indices. Block, column and
//! constraint indices are 1-based everywhere.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::linops::{Factor, SymDense};
use crate::scalar::{Real, ScalarKind};
use crate::solver::{ErrorReport, Solution, Status, WarmStart};

const SOLUTION_MAGIC: &str = "augmix-solution";
const WARM_MAGIC: &str = "augmix-warmstart";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("file holds {found} values, expected {expected}")]
    Kind { expected: ScalarKind, found: ScalarKind },
    #[error("missing `{0}` section")]
    Missing(&'static str),
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax { line, msg: msg.into() }
}

/// Contents of a solution file.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile<T> {
    pub status: Status,
    pub factors: Vec<Factor<T>>,
    pub y: Vec<T>,
    pub z: Option<Vec<SymDense<T>>>,
    pub report: Option<ErrorReport>,
    pub primal_objective: Option<f64>,
    pub dual_objective: Option<f64>,
    pub iterations: Option<usize>,
}

impl<T: Real> From<&Solution<T>> for SolutionFile<T> {
    fn from(s: &Solution<T>) -> Self {
        SolutionFile {
            status: s.status,
            factors: s.factors.clone(),
            y: s.y.clone(),
            z: Some(s.z.clone()),
            report: Some(s.report),
            primal_objective: Some(s.primal_objective),
            dual_objective: Some(s.dual_objective),
            iterations: Some(s.stats.iterations),
        }
    }
}

fn opt_token(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:e}"))
}

fn write_factors<T: Real>(out: &mut String, factors: &[Factor<T>]) {
    let _ = write!(out, "blocks {}", factors.len());
    for f in factors {
        let _ = write!(out, " {}", f.cols());
    }
    out.push_str("\nranks");
    for f in factors {
        let _ = write!(out, " {}", f.rank());
    }
    out.push('\n');
}

fn write_columns<T: Real>(out: &mut String, factors: &[Factor<T>]) {
    for (b, f) in factors.iter().enumerate() {
        for i in 0..f.cols() {
            let _ = write!(out, "v {} {}", b + 1, i + 1);
            for x in f.col(i) {
                let _ = write!(out, " {}", x.to_token());
            }
            out.push('\n');
        }
    }
}

pub fn format_solution<T: Real>(sol: &SolutionFile<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SOLUTION_MAGIC} 1");
    let _ = writeln!(out, "scalar {}", T::KIND.name());
    let _ = writeln!(out, "status {}", sol.status);
    write_factors(&mut out, &sol.factors);
    let _ = writeln!(out, "constraints {}", sol.y.len());
    if let (Some(p), Some(d)) = (sol.primal_objective, sol.dual_objective) {
        let _ = writeln!(out, "objective {p:e} {d:e}");
    }
    if let Some(r) = &sol.report {
        let _ = writeln!(
            out,
            "report {:e} {:e} {} {} {:e}",
            r.pinf,
            r.gap,
            opt_token(r.dinf),
            opt_token(r.compl),
            r.compl_star
        );
    }
    if let Some(it) = sol.iterations {
        let _ = writeln!(out, "iterations {it}");
    }
    write_columns(&mut out, &sol.factors);
    for (j, y) in sol.y.iter().enumerate() {
        let _ = writeln!(out, "y {} {}", j + 1, y.to_token());
    }
    if let Some(z) = &sol.z {
        for (b, zb) in z.iter().enumerate() {
            for r in 0..zb.order() {
                for c in r..zb.order() {
                    let v = zb.get(r, c);
                    if v != T::zero() {
                        let _ = writeln!(out, "z {} {} {} {}", b + 1, r + 1, c + 1, v.to_token());
                    }
                }
            }
        }
    }
    out
}

pub fn write_solution<T: Real>(sol: &SolutionFile<T>, path: impl AsRef<Path>) -> io::Result<()> {
    fs::write(path, format_solution(sol))
}

pub fn format_warm_start<T: Real>(w: &WarmStart<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{WARM_MAGIC} 1");
    let _ = writeln!(out, "scalar {}", T::KIND.name());
    write_factors(&mut out, &w.factors);
    let _ = writeln!(out, "duals {} {}", w.y_eq.len(), w.y_ineq.len());
    let _ = writeln!(out, "mu {}", w.mu.to_token());
    write_columns(&mut out, &w.factors);
    for (j, y) in w.y_eq.iter().enumerate() {
        let _ = writeln!(out, "ya {} {}", j + 1, y.to_token());
    }
    for (j, y) in w.y_ineq.iter().enumerate() {
        let _ = writeln!(out, "yb {} {}", j + 1, y.to_token());
    }
    out
}

pub fn write_warm_start<T: Real>(w: &WarmStart<T>, path: impl AsRef<Path>) -> io::Result<()> {
    fs::write(path, format_warm_start(w))
}

/// Scalar kind recorded in a solution or warm-start file.
pub fn peek_kind(text: &str) -> Result<ScalarKind, FormatError> {
    for (ln, l) in significant_lines(text) {
        let mut t = l.split_whitespace();
        if t.next() == Some("scalar") {
            let name = t.next().unwrap_or("");
            return ScalarKind::from_name(name).ok_or_else(|| syntax(ln, format!("unknown scalar kind `{name}`")));
        }
    }
    Err(FormatError::Missing("scalar"))
}

fn significant_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize, FormatError> {
    let t = tok.ok_or_else(|| syntax(line, format!("missing {what}")))?;
    t.parse().map_err(|_| syntax(line, format!("invalid {what} `{t}`")))
}

fn parse_scalar<T: Real>(tok: Option<&str>, line: usize) -> Result<T, FormatError> {
    let t = tok.ok_or_else(|| syntax(line, "missing value"))?;
    T::parse_token(t).ok_or_else(|| syntax(line, format!("invalid value `{t}`")))
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<Option<f64>, FormatError> {
    match tok {
        None => Err(syntax(line, "missing value")),
        Some("-") => Ok(None),
        Some(t) => t
            .parse()
            .map(Some)
            .map_err(|_| syntax(line, format!("invalid number `{t}`"))),
    }
}

/// State shared by both readers.
struct Reader<T> {
    sizes: Option<Vec<usize>>,
    ranks: Option<Vec<usize>>,
    factors: Vec<Factor<T>>,
    seen: Vec<Vec<bool>>,
}

impl<T: Real> Reader<T> {
    fn new() -> Self {
        Reader {
            sizes: None,
            ranks: None,
            factors: Vec::new(),
            seen: Vec::new(),
        }
    }

    fn header(&mut self, text: &str, magic: &str) -> Result<(), FormatError> {
        let mut lines = significant_lines(text);
        let (ln, first) = lines.next().ok_or_else(|| syntax(1, "empty file"))?;
        if first != format!("{magic} 1") {
            return Err(syntax(ln, format!("expected `{magic} 1`")));
        }
        let kind = peek_kind(text)?;
        if kind != T::KIND {
            return Err(FormatError::Kind {
                expected: T::KIND,
                found: kind,
            });
        }
        Ok(())
    }

    fn ensure_factors(&mut self, line: usize) -> Result<(), FormatError> {
        if !self.factors.is_empty() {
            return Ok(());
        }
        let (Some(sizes), Some(ranks)) = (&self.sizes, &self.ranks) else {
            return Err(syntax(line, "`blocks` and `ranks` must precede factor columns"));
        };
        if sizes.len() != ranks.len() {
            return Err(syntax(line, "`ranks` length differs from block count"));
        }
        self.factors = sizes.iter().zip(ranks).map(|(&n, &k)| Factor::zeros(k, n)).collect();
        self.seen = sizes.iter().map(|&n| vec![false; n]).collect();
        Ok(())
    }

    /// Handles `blocks`, `ranks` and `v`; returns false for other keys.
    fn common(&mut self, key: &str, rest: &mut std::str::SplitWhitespace<'_>, ln: usize) -> Result<bool, FormatError> {
        match key {
            "blocks" => {
                let q = parse_usize(rest.next(), ln, "block count")?;
                let sizes = (0..q)
                    .map(|_| parse_usize(rest.next(), ln, "block size"))
                    .collect::<Result<Vec<_>, _>>()?;
                self.sizes = Some(sizes);
            }
            "ranks" => {
                self.ranks = Some(rest.map(|t| parse_usize(Some(t), ln, "rank")).collect::<Result<_, _>>()?);
            }
            "v" => {
                self.ensure_factors(ln)?;
                let b = parse_usize(rest.next(), ln, "block")?;
                let i = parse_usize(rest.next(), ln, "column")?;
                if b == 0 || b > self.factors.len() || i == 0 || i > self.factors[b - 1].cols() {
                    return Err(syntax(ln, "factor column index out of range"));
                }
                let k = self.factors[b - 1].rank();
                let vals = rest.map(|t| parse_scalar(Some(t), ln)).collect::<Result<Vec<T>, _>>()?;
                if vals.len() != k {
                    return Err(syntax(ln, format!("expected {k} values, found {}", vals.len())));
                }
                if std::mem::replace(&mut self.seen[b - 1][i - 1], true) {
                    return Err(syntax(ln, "repeated factor column"));
                }
                self.factors[b - 1].col_mut(i - 1).copy_from_slice(&vals);
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn finish_factors(&mut self) -> Result<Vec<Factor<T>>, FormatError> {
        self.ensure_factors(0)?;
        if self.seen.iter().any(|s| s.iter().any(|&x| !x)) {
            return Err(FormatError::Missing("v"));
        }
        Ok(std::mem::take(&mut self.factors))
    }
}

pub fn parse_solution<T: Real>(text: &str) -> Result<SolutionFile<T>, FormatError> {
    let mut rd = Reader::<T>::new();
    rd.header(text, SOLUTION_MAGIC)?;
    let mut status = None;
    let mut m = None;
    let mut y: Vec<Option<T>> = Vec::new();
    let mut z: Option<Vec<SymDense<T>>> = None;
    let mut report = None;
    let mut objective = (None, None);
    let mut iterations = None;
    for (ln, l) in significant_lines(text).skip(1) {
        let mut t = l.split_whitespace();
        let key = t.next().unwrap_or("");
        if rd.common(key, &mut t, ln)? {
            continue;
        }
        match key {
            "scalar" => {}
            "status" => {
                let s = t.next().unwrap_or("");
                status = Some(Status::from_name(s).ok_or_else(|| syntax(ln, format!("unknown status `{s}`")))?);
            }
            "constraints" => {
                let count = parse_usize(t.next(), ln, "constraint count")?;
                m = Some(count);
                y = vec![None; count];
            }
            "objective" => {
                objective = (parse_f64(t.next(), ln)?, parse_f64(t.next(), ln)?);
            }
            "report" => {
                let pinf = parse_f64(t.next(), ln)?.ok_or_else(|| syntax(ln, "pinf required"))?;
                let gap = parse_f64(t.next(), ln)?.ok_or_else(|| syntax(ln, "gap required"))?;
                let dinf = parse_f64(t.next(), ln)?;
                let compl = parse_f64(t.next(), ln)?;
                let compl_star = parse_f64(t.next(), ln)?.ok_or_else(|| syntax(ln, "compl* required"))?;
                report = Some(ErrorReport {
                    pinf,
                    gap,
                    dinf,
                    compl,
                    compl_star,
                });
            }
            "iterations" => iterations = Some(parse_usize(t.next(), ln, "iteration count")?),
            "y" => {
                if m.is_none() {
                    return Err(syntax(ln, "`constraints` must precede `y` lines"));
                }
                let j = parse_usize(t.next(), ln, "index")?;
                if j == 0 || j > y.len() {
                    return Err(syntax(ln, "dual index out of range"));
                }
                if y[j - 1].replace(parse_scalar(t.next(), ln)?).is_some() {
                    return Err(syntax(ln, "repeated dual index"));
                }
            }
            "z" => {
                let sizes = rd.sizes.clone().ok_or_else(|| syntax(ln, "`blocks` must precede `z` lines"))?;
                let zs = z.get_or_insert_with(|| sizes.iter().map(|&n| SymDense::zeros(n)).collect());
                let b = parse_usize(t.next(), ln, "block")?;
                let r = parse_usize(t.next(), ln, "row")?;
                let c = parse_usize(t.next(), ln, "column")?;
                if b == 0 || b > zs.len() || r == 0 || c < r || c > zs[b - 1].order() {
                    return Err(syntax(ln, "slack entry out of range or below the diagonal"));
                }
                zs[b - 1].set(r - 1, c - 1, parse_scalar(t.next(), ln)?);
            }
            other => return Err(syntax(ln, format!("unknown record `{other}`"))),
        }
    }
    let factors = rd.finish_factors()?;
    let y = y
        .into_iter()
        .collect::<Option<Vec<T>>>()
        .ok_or(FormatError::Missing("y"))?;
    if m.is_none() {
        return Err(FormatError::Missing("constraints"));
    }
    Ok(SolutionFile {
        status: status.ok_or(FormatError::Missing("status"))?,
        factors,
        y,
        z,
        report,
        primal_objective: objective.0,
        dual_objective: objective.1,
        iterations,
    })
}

pub fn read_solution<T: Real>(path: impl AsRef<Path>) -> Result<SolutionFile<T>, FormatError> {
    parse_solution(&fs::read_to_string(path)?)
}

pub fn parse_warm_start<T: Real>(text: &str) -> Result<WarmStart<T>, FormatError> {
    let mut rd = Reader::<T>::new();
    rd.header(text, WARM_MAGIC)?;
    let mut mu = None;
    let mut ya: Option<Vec<Option<T>>> = None;
    let mut yb: Option<Vec<Option<T>>> = None;
    for (ln, l) in significant_lines(text).skip(1) {
        let mut t = l.split_whitespace();
        let key = t.next().unwrap_or("");
        if rd.common(key, &mut t, ln)? {
            continue;
        }
        match key {
            "scalar" => {}
            "duals" => {
                ya = Some(vec![None; parse_usize(t.next(), ln, "equality count")?]);
                yb = Some(vec![None; parse_usize(t.next(), ln, "inequality count")?]);
            }
            "mu" => mu = Some(parse_scalar::<T>(t.next(), ln)?),
            "ya" | "yb" => {
                let target = if key == "ya" { ya.as_mut() } else { yb.as_mut() };
                let target = target.ok_or_else(|| syntax(ln, "`duals` must precede multiplier lines"))?;
                let j = parse_usize(t.next(), ln, "index")?;
                if j == 0 || j > target.len() {
                    return Err(syntax(ln, "multiplier index out of range"));
                }
                if target[j - 1].replace(parse_scalar(t.next(), ln)?).is_some() {
                    return Err(syntax(ln, "repeated multiplier index"));
                }
            }
            other => return Err(syntax(ln, format!("unknown record `{other}`"))),
        }
    }
    let factors = rd.finish_factors()?;
    let collect = |v: Option<Vec<Option<T>>>| {
        v.ok_or(FormatError::Missing("duals"))?
            .into_iter()
            .collect::<Option<Vec<T>>>()
            .ok_or(FormatError::Missing("ya/yb"))
    };
    Ok(WarmStart {
        factors,
        y_eq: collect(ya)?,
        y_ineq: collect(yb)?,
        mu: mu.ok_or(FormatError::Missing("mu"))?,
    })
}

pub fn read_warm_start<T: Real>(path: impl AsRef<Path>) -> Result<WarmStart<T>, FormatError> {
    parse_warm_start(&fs::read_to_string(path)?)
}
