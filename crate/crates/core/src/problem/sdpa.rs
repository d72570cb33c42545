//! Import of SDPA sparse (`.dat-s`) files.
//!
//! `F_0` becomes the cost and `F_1..F_m` the equality constraint matrices with
//! the scalar vector as right-hand side: minimize `<F_0, X>` subject to
//! `<F_j, X> = c_j`. LP blocks (negative sizes) are expanded into order-1
//! blocks.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{Constraint, ProblemError, SdpProblem, SymMatrix};

#[derive(Debug, Error)]
pub enum SdpaError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unsupported construct: {msg}")]
    Unsupported { line: usize, msg: String },
    #[error("header declares {declared} constraints but constraint {missing} has no data")]
    MissingConstraint { declared: usize, missing: usize },
    #[error("invalid problem: {0}")]
    Invalid(#[from] ProblemError),
}

pub fn read_sdpa(path: impl AsRef<Path>) -> Result<SdpProblem, SdpaError> {
    let text = fs::read_to_string(path)?;
    parse_sdpa(&text)
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')'))
        .filter(|t| !t.is_empty())
}

fn parse_f64(tok: &str) -> Option<f64> {
    // Fortran-style exponents occasionally show up in SDPA files.
    tok.parse()
        .ok()
        .or_else(|| tok.replace(['d', 'D'], "e").parse().ok())
}

pub fn parse_sdpa(text: &str) -> Result<SdpProblem, SdpaError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .skip_while(|(_, l)| l.starts_with('"') || l.starts_with('*'))
        .peekable();

    let header_int = |line: Option<(usize, &str)>, what: &str| -> Result<i64, SdpaError> {
        let (_, l) = line.ok_or_else(|| SdpaError::Header(format!("missing {what}")))?;
        let tok = tokens(l)
            .next()
            .ok_or_else(|| SdpaError::Header(format!("missing {what}")))?;
        tok.parse::<i64>()
            .map_err(|_| SdpaError::Header(format!("invalid {what} `{tok}`")))
    };

    let m = header_int(lines.next(), "constraint count")?;
    let nblocks = header_int(lines.next(), "block count")?;
    if m < 0 || nblocks <= 0 {
        return Err(SdpaError::Header(format!("invalid sizes m = {m}, nBlock = {nblocks}")));
    }
    let (m, nblocks) = (m as usize, nblocks as usize);

    let mut struct_sizes: Vec<i64> = Vec::with_capacity(nblocks);
    while struct_sizes.len() < nblocks {
        let (_, l) = lines
            .next()
            .ok_or_else(|| SdpaError::Header("truncated block structure".into()))?;
        for tok in tokens(l) {
            if struct_sizes.len() == nblocks {
                break;
            }
            let s = tok
                .parse::<f64>()
                .ok()
                .filter(|s| s.fract() == 0.0 && *s != 0.0)
                .ok_or_else(|| SdpaError::Header(format!("invalid block size `{tok}`")))?;
            struct_sizes.push(s as i64);
        }
    }

    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    while rhs.len() < m {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| SdpaError::Header(format!("expected {m} objective coefficients")))?;
        for tok in tokens(l) {
            if rhs.len() == m {
                break;
            }
            rhs.push(parse_f64(tok).ok_or_else(|| SdpaError::Syntax {
                line: ln,
                msg: format!("invalid coefficient `{tok}`"),
            })?);
        }
    }

    // Map original blocks onto expanded ones.
    let mut first_block = Vec::with_capacity(nblocks);
    let mut block_sizes = Vec::new();
    for &s in &struct_sizes {
        first_block.push(block_sizes.len());
        if s > 0 {
            block_sizes.push(s as usize);
        } else {
            block_sizes.extend(std::iter::repeat_n(1, s.unsigned_abs() as usize));
        }
    }
    let q = block_sizes.len();

    let mut cost_entries: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); q];
    let mut con_entries: BTreeMap<(usize, usize), Vec<(usize, usize, f64)>> = BTreeMap::new();
    for (ln, l) in lines {
        if l.starts_with('"') || l.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = tokens(l).collect();
        if toks.len() < 5 {
            return Err(SdpaError::Syntax {
                line: ln,
                msg: "expected `<matno> <blkno> <i> <j> <value>`".into(),
            });
        }
        let int = |t: &str, what: &str| {
            t.parse::<usize>().map_err(|_| SdpaError::Syntax {
                line: ln,
                msg: format!("invalid {what} `{t}`"),
            })
        };
        let matno = int(toks[0], "matrix number")?;
        let blk = int(toks[1], "block number")?;
        let i = int(toks[2], "row")?;
        let j = int(toks[3], "column")?;
        let v = parse_f64(toks[4]).ok_or_else(|| SdpaError::Syntax {
            line: ln,
            msg: format!("invalid value `{}`", toks[4]),
        })?;
        if matno > m {
            return Err(SdpaError::Syntax {
                line: ln,
                msg: format!("matrix number {matno} exceeds m = {m}"),
            });
        }
        if blk == 0 || blk > nblocks || i == 0 || j == 0 {
            return Err(SdpaError::Syntax {
                line: ln,
                msg: "block, row and column indices are 1-based and must be in range".into(),
            });
        }
        let s = struct_sizes[blk - 1];
        let (block, r, c) = if s > 0 {
            let n = s as usize;
            if i > n || j > n {
                return Err(SdpaError::Syntax {
                    line: ln,
                    msg: format!("entry ({i}, {j}) outside block of order {n}"),
                });
            }
            (first_block[blk - 1], i.min(j) - 1, i.max(j) - 1)
        } else {
            if i != j {
                return Err(SdpaError::Unsupported {
                    line: ln,
                    msg: "off-diagonal entry in an LP block".into(),
                });
            }
            if i > s.unsigned_abs() as usize {
                return Err(SdpaError::Syntax {
                    line: ln,
                    msg: format!("index {i} outside LP block of size {}", s.unsigned_abs()),
                });
            }
            (first_block[blk - 1] + i - 1, 0, 0)
        };
        if matno == 0 {
            cost_entries[block].push((r, c, v));
        } else {
            con_entries.entry((matno - 1, block)).or_default().push((r, c, v));
        }
    }

    let mut parts: Vec<Vec<(usize, SymMatrix<f64>)>> = vec![Vec::new(); m];
    for ((j, b), e) in con_entries {
        parts[j].push((b, SymMatrix::from_triplets(block_sizes[b], e)));
    }
    if let Some(j) = parts.iter().position(Vec::is_empty) {
        return Err(SdpaError::MissingConstraint {
            declared: m,
            missing: j + 1,
        });
    }
    let costs = cost_entries
        .into_iter()
        .enumerate()
        .map(|(b, e)| SymMatrix::from_triplets(block_sizes[b], e))
        .collect();
    let constraints = parts.into_iter().map(Constraint::new).collect();
    Ok(SdpProblem::new(block_sizes, costs, constraints, rhs, m + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_one_problem() {
        let text = "\"min <I,X> s.t. trace X = 1\n1 =mDIM\n1 =nBLOCK\n2 =bLOCKsTRUCT\n{1.0}\n0 1 1 1 1.0\n0 1 2 2 1.0\n1 1 1 1 1.0\n1 1 2 2 1.0\n";
        let p = parse_sdpa(text).unwrap();
        let expected = SdpProblem::new(
            vec![2],
            vec![SymMatrix::identity(2)],
            vec![Constraint::single(0, SymMatrix::identity(2))],
            vec![1.0],
            2,
        )
        .unwrap();
        assert_eq!(p, expected);
    }

    #[test]
    fn lp_block_becomes_order_one_blocks() {
        let text = "1\n2\n2 -2\n1.0\n0 1 1 2 0.5\n0 2 2 2 3.0\n1 1 1 1 1.0\n1 2 1 1 1.0\n1 2 2 2 1.0\n";
        let p = parse_sdpa(text).unwrap();
        assert_eq!(p.block_sizes, vec![2, 1, 1]);
        assert_eq!(p.costs[2].entries[0].value, 3.0);
        assert_eq!(p.constraints[0].parts.len(), 3);
        assert_eq!(p.ineq_start, 2);
    }

    #[test]
    fn missing_constraint_data() {
        let text = "3\n1\n2\n1 1 1\n1 1 1 1 1.0\n2 1 2 2 1.0\n";
        match parse_sdpa(text) {
            Err(SdpaError::MissingConstraint { declared: 3, missing: 3 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_header() {
        assert!(matches!(parse_sdpa("x\n1\n2\n"), Err(SdpaError::Header(_))));
        assert!(matches!(parse_sdpa("1\n1\n"), Err(SdpaError::Header(_))));
    }

    #[test]
    fn off_diagonal_lp_entry_unsupported() {
        let text = "1\n1\n-2\n1\n1 1 1 2 1.0\n";
        assert!(matches!(parse_sdpa(text), Err(SdpaError::Unsupported { .. })));
    }
}
