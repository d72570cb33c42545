//! Native line-oriented text format.
//!
//! ```text
//! augmix-sdp 1
//! blocks <q> <n_1> ... <n_q>
//! constraints <m> <ineq_start>
//! objective <sign> <offset>          (optional; default 1 0)
//! rhs <v_1> ... <v_m>                (omitted when m = 0)
//! <j> <block> <row> <col> <value>    (one line per stored entry)
//! ```
//!
//! `j = 0` addresses the cost, `j = 1..m` the constraints; block, row and
//! column are 1-based and only the upper triangle is stored. Blank lines and
//! lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::{Constraint, ObjectiveReport, ProblemError, SdpProblem, SymMatrix};

const MAGIC: &str = "augmix-sdp";

#[derive(Debug, Error)]
pub enum NativeError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid problem: {0}")]
    Invalid(#[from] ProblemError),
}

fn syntax(line: usize, msg: impl Into<String>) -> NativeError {
    NativeError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn parse_num<F: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<F, NativeError> {
    tok.parse()
        .map_err(|_| syntax(line, format!("invalid {what} `{tok}`")))
}

pub fn read_native(path: impl AsRef<Path>) -> Result<SdpProblem, NativeError> {
    let text = fs::read_to_string(path)?;
    parse_native(&text)
}

pub fn parse_native(text: &str) -> Result<SdpProblem, NativeError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();

    let (ln, magic) = lines.next().ok_or_else(|| syntax(1, "empty file"))?;
    let mut toks = magic.split_whitespace();
    if toks.next() != Some(MAGIC) {
        return Err(syntax(ln, format!("expected `{MAGIC} 1` header")));
    }
    match toks.next() {
        Some("1") => {}
        other => return Err(syntax(ln, format!("unsupported version {other:?}"))),
    }

    let (ln, blocks_line) = lines.next().ok_or_else(|| syntax(ln + 1, "missing `blocks` line"))?;
    let toks: Vec<&str> = blocks_line.split_whitespace().collect();
    if toks.first() != Some(&"blocks") || toks.len() < 2 {
        return Err(syntax(ln, "expected `blocks <q> <n_1> ... <n_q>`"));
    }
    let q: usize = parse_num(toks[1], ln, "block count")?;
    if toks.len() != q + 2 {
        return Err(syntax(ln, format!("expected {q} block sizes, found {}", toks.len() - 2)));
    }
    let block_sizes = toks[2..]
        .iter()
        .map(|t| parse_num::<usize>(t, ln, "block size"))
        .collect::<Result<Vec<_>, _>>()?;

    let (ln, con_line) = lines.next().ok_or_else(|| syntax(ln + 1, "missing `constraints` line"))?;
    let toks: Vec<&str> = con_line.split_whitespace().collect();
    if toks.len() != 3 || toks[0] != "constraints" {
        return Err(syntax(ln, "expected `constraints <m> <ineq_start>`"));
    }
    let m: usize = parse_num(toks[1], ln, "constraint count")?;
    let ineq_start: usize = parse_num(toks[2], ln, "ineq_start")?;

    let mut objective = ObjectiveReport::default();
    let mut rhs: Vec<f64> = Vec::new();
    let mut have_rhs = m == 0;
    let mut last_line = ln;
    while let Some(&(ln, line)) = lines.peek() {
        let head = line.split_whitespace().next().unwrap_or("");
        match head {
            "objective" => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(syntax(ln, "expected `objective <sign> <offset>`"));
                }
                objective = ObjectiveReport {
                    sign: parse_num(toks[1], ln, "objective sign")?,
                    offset: parse_num(toks[2], ln, "objective offset")?,
                };
            }
            "rhs" => {
                rhs = line
                    .split_whitespace()
                    .skip(1)
                    .map(|t| parse_num::<f64>(t, ln, "right-hand side"))
                    .collect::<Result<_, _>>()?;
                if rhs.len() != m {
                    return Err(syntax(ln, format!("expected {m} right-hand side values, found {}", rhs.len())));
                }
                have_rhs = true;
            }
            _ => break,
        }
        last_line = ln;
        lines.next();
    }
    if !have_rhs {
        return Err(syntax(last_line + 1, "missing `rhs` line"));
    }

    let mut cost_entries: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); q];
    let mut con_entries: BTreeMap<(usize, usize), Vec<(usize, usize, f64)>> = BTreeMap::new();
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(syntax(ln, "expected `<constraint> <block> <row> <col> <value>`"));
        }
        let j: usize = parse_num(toks[0], ln, "constraint index")?;
        let b: usize = parse_num(toks[1], ln, "block index")?;
        let r: usize = parse_num(toks[2], ln, "row index")?;
        let c: usize = parse_num(toks[3], ln, "column index")?;
        let v: f64 = parse_num(toks[4], ln, "value")?;
        if j > m {
            return Err(syntax(ln, format!("constraint index {j} exceeds m = {m}")));
        }
        if b == 0 || b > q {
            return Err(syntax(ln, format!("block index {b} outside 1..={q}")));
        }
        if r == 0 || c == 0 {
            return Err(syntax(ln, "row and column indices are 1-based"));
        }
        if r > c {
            return Err(syntax(ln, "entry below the diagonal; store the upper triangle"));
        }
        let entry = (r - 1, c - 1, v);
        if j == 0 {
            cost_entries[b - 1].push(entry);
        } else {
            con_entries.entry((j - 1, b - 1)).or_default().push(entry);
        }
    }

    let costs = cost_entries
        .into_iter()
        .enumerate()
        .map(|(b, e)| SymMatrix::from_triplets(block_sizes.get(b).copied().unwrap_or(0), e))
        .collect();
    let mut parts: Vec<Vec<(usize, SymMatrix<f64>)>> = vec![Vec::new(); m];
    for ((j, b), e) in con_entries {
        parts[j].push((b, SymMatrix::from_triplets(block_sizes[b], e)));
    }
    let constraints = parts.into_iter().map(Constraint::new).collect();
    let problem = SdpProblem::new(block_sizes, costs, constraints, rhs, ineq_start)?.with_objective(objective);
    Ok(problem)
}

pub fn write_native_to<W: Write>(problem: &SdpProblem, mut out: W) -> io::Result<()> {
    let mut head = String::new();
    writeln!(head, "{MAGIC} 1").unwrap();
    write!(head, "blocks {}", problem.num_blocks()).unwrap();
    for n in &problem.block_sizes {
        write!(head, " {n}").unwrap();
    }
    head.push('\n');
    writeln!(head, "constraints {} {}", problem.num_constraints(), problem.ineq_start).unwrap();
    if problem.objective != ObjectiveReport::default() {
        writeln!(head, "objective {:e} {:e}", problem.objective.sign, problem.objective.offset).unwrap();
    }
    if problem.num_constraints() > 0 {
        head.push_str("rhs");
        for v in &problem.rhs {
            write!(head, " {v:e}").unwrap();
        }
        head.push('\n');
    }
    out.write_all(head.as_bytes())?;

    let mut buf = String::new();
    for (b, cost) in problem.costs.iter().enumerate() {
        for e in &cost.entries {
            writeln!(buf, "0 {} {} {} {:e}", b + 1, e.row + 1, e.col + 1, e.value).unwrap();
        }
    }
    out.write_all(buf.as_bytes())?;
    for (j, con) in problem.constraints.iter().enumerate() {
        buf.clear();
        for (b, mat) in &con.parts {
            for e in &mat.entries {
                writeln!(buf, "{} {} {} {} {:e}", j + 1, b + 1, e.row + 1, e.col + 1, e.value).unwrap();
            }
        }
        out.write_all(buf.as_bytes())?;
    }
    out.flush()
}

pub fn write_native(problem: &SdpProblem, path: impl AsRef<Path>) -> io::Result<()> {
    let file = fs::File::create(path)?;
    write_native_to(problem, io::BufWriter::new(file))
}
