//! Plain-text dump of a [`MomentProblem`] for debugging and golden files.
//!
//! ```text
//! hardy-moment-problem 1
//! size <N>
//! vars <V>
//! basis <N or 0>          one monomial per line, e.g. `A_U B_D`
//! moments <V or 0>        one monomial per line
//! cells                   N lines of N variable ids
//! objective <k>           k lines `var coeff`
//! equalities <k>          k lines `bound | var:coeff var:coeff …`
//! inequalities <k>        same layout, meaning `row ≤ bound`
//! nullspace <k>           k lines `basis:coeff …`, vectors with `Γ x = 0`
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so the dump is
//! byte-stable and parses back to an identical problem.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::monomial::Monomial;
use super::problem::{MomentProblem, SparseRow};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "hardy-moment-problem";

pub fn write_problem(p: &MomentProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "size {}", p.size);
    let _ = writeln!(out, "vars {}", p.num_vars);
    let _ = writeln!(out, "basis {}", p.basis.len());
    for m in &p.basis {
        let _ = writeln!(out, "{m}");
    }
    let _ = writeln!(out, "moments {}", p.moments.len());
    for m in &p.moments {
        let _ = writeln!(out, "{m}");
    }
    let _ = writeln!(out, "cells");
    for row in p.cells.chunks(p.size) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    let _ = writeln!(out, "objective {}", p.objective.len());
    for (v, c) in &p.objective {
        let _ = writeln!(out, "{v} {c}");
    }
    for (name, rows) in [("equalities", &p.equalities), ("inequalities", &p.inequalities)] {
        let _ = writeln!(out, "{name} {}", rows.len());
        for (row, b) in rows {
            let _ = writeln!(out, "{b} | {}", sparse_terms(row));
        }
    }
    let _ = writeln!(out, "nullspace {}", p.null_vectors.len());
    for row in &p.null_vectors {
        let _ = writeln!(out, "{}", sparse_terms(row));
    }
    out
}

fn sparse_terms(row: &SparseRow) -> String {
    let terms: Vec<String> = row.iter().map(|(v, c)| format!("{v}:{c}")).collect();
    terms.join(" ")
}

fn parse_terms(no: usize, text: &str) -> Result<SparseRow> {
    text.split_whitespace()
        .map(|t| {
            let (v, c) = t.split_once(':').ok_or_else(|| bad(no, "term is not var:coeff"))?;
            Ok((parse_num(no, v)?, parse_num(no, c)?))
        })
        .collect()
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Validation("unexpected end of problem text".into()))
    }

    /// Reads `<keyword> <count>`.
    fn header(&mut self, keyword: &str) -> Result<usize> {
        let (no, line) = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(bad(no, &format!("expected `{keyword}`")));
        }
        parse_num(no, parts.next().unwrap_or(""))
    }
}

fn bad(line: usize, msg: &str) -> Error {
    Error::Validation(format!("problem text line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| bad(line, &format!("cannot parse {s:?}")))
}

fn parse_rows(lines: &mut Lines<'_>, keyword: &str) -> Result<Vec<(SparseRow, f64)>> {
    let count = lines.header(keyword)?;
    (0..count)
        .map(|_| {
            let (no, line) = lines.next()?;
            let (bound, terms) = line.split_once('|').ok_or_else(|| bad(no, "missing `|`"))?;
            Ok((parse_terms(no, terms)?, parse_num(no, bound.trim())?))
        })
        .collect()
}

pub fn parse_problem(text: &str) -> Result<MomentProblem> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (no, first) = lines.next()?;
    match first.split_once(' ') {
        Some((MAGIC, v)) if v.trim() == FORMAT_VERSION.to_string() => {}
        Some((MAGIC, v)) => return Err(bad(no, &format!("unsupported format version {v}"))),
        _ => return Err(bad(no, "not a moment problem")),
    }
    let size = lines.header("size")?;
    let num_vars = lines.header("vars")?;
    let monomials = |lines: &mut Lines<'_>, keyword: &str| -> Result<Vec<Monomial>> {
        let count = lines.header(keyword)?;
        (0..count).map(|_| Monomial::parse(lines.next()?.1)).collect()
    };
    let basis = monomials(&mut lines, "basis")?;
    let moments = monomials(&mut lines, "moments")?;
    let (no, line) = lines.next()?;
    if line.trim() != "cells" {
        return Err(bad(no, "expected `cells`"));
    }
    let mut cells = Vec::with_capacity(size * size);
    for _ in 0..size {
        let (no, line) = lines.next()?;
        for t in line.split_whitespace() {
            cells.push(parse_num(no, t)?);
        }
    }
    let count = lines.header("objective")?;
    let objective = (0..count)
        .map(|_| {
            let (no, line) = lines.next()?;
            let (v, c) = line.split_once(' ').ok_or_else(|| bad(no, "expected `var coeff`"))?;
            Ok((parse_num(no, v)?, parse_num(no, c.trim())?))
        })
        .collect::<Result<SparseRow>>()?;
    let equalities = parse_rows(&mut lines, "equalities")?;
    let inequalities = parse_rows(&mut lines, "inequalities")?;
    let count = lines.header("nullspace")?;
    let null_vectors = (0..count)
        .map(|_| {
            let (no, line) = lines.next()?;
            parse_terms(no, line)
        })
        .collect::<Result<Vec<SparseRow>>>()?;

    let moment_index: BTreeMap<Monomial, usize> = moments.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let p = MomentProblem {
        size,
        num_vars,
        cells,
        objective,
        equalities,
        inequalities,
        basis,
        moments,
        moment_index,
        null_vectors,
    };
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::Scenario;
    use crate::npa::build_moment_problem;

    #[test]
    fn round_trip_is_exact() {
        let p = build_moment_problem(Scenario::new(3).unwrap(), 2, 0.0).unwrap();
        let text = write_problem(&p);
        assert!(text.starts_with("hardy-moment-problem 1\nsize 25\n"));
        let q = parse_problem(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(write_problem(&q), text);
    }

    #[test]
    fn hand_built_round_trip() {
        let p = MomentProblem::from_cells(2, vec![0, 1, 1, 0], vec![(1, 1.0)], vec![(vec![(1, 1.0)], 0.3)], vec![])
            .unwrap();
        assert_eq!(parse_problem(&write_problem(&p)).unwrap(), p);
    }

    #[test]
    fn rejects_other_versions() {
        let p = build_moment_problem(Scenario::new(2).unwrap(), 1, 0.0).unwrap();
        let text = write_problem(&p).replacen("hardy-moment-problem 1", "hardy-moment-problem 2", 1);
        assert!(matches!(parse_problem(&text), Err(Error::Validation(_))));
        assert!(parse_problem("").is_err());
    }
}
