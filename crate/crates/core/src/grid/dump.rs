//! Plain-text problem dump used for cross-checking `Y_bus` against external
//! tools. Layout:
//!
//! ```text
//! N <buses>
//! M <in-service branches>
//! slack <index>
//! pv <index>...
//! pq <index>...
//! ybus <nnz>
//! <row> <col> <re> <im>      (nnz lines, row-major)
//! ```

use super::{GridError, PowerFlowProblem};
use num_complex::Complex64;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDump {
    pub n_buses: usize,
    pub n_branches: usize,
    pub slack: usize,
    pub pv: Vec<usize>,
    pub pq: Vec<usize>,
    pub y_bus: Vec<(usize, usize, Complex64)>,
}

pub fn write_problem_dump(problem: &PowerFlowProblem) -> String {
    let mut out = String::new();
    let join = |v: &[usize]| {
        v.iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "N {}", problem.n_buses());
    let _ = writeln!(out, "M {}", problem.n_branches);
    let _ = writeln!(out, "slack {}", problem.slack);
    let _ = writeln!(out, "pv {}", join(&problem.pv));
    let _ = writeln!(out, "pq {}", join(&problem.pq));
    let _ = writeln!(out, "ybus {}", problem.y_bus.nnz());
    for (r, c, v) in problem.y_bus.triplets() {
        let _ = writeln!(out, "{r} {c} {:e} {:e}", v.re, v.im);
    }
    out
}

fn dump_err(line: usize, reason: impl Into<String>) -> GridError {
    GridError::Dump {
        line,
        reason: reason.into(),
    }
}

pub fn read_problem_dump(text: &str) -> Result<ProblemDump, GridError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut header = |key: &str| -> Result<(usize, Vec<&str>), GridError> {
        let (line, text) = lines.next().ok_or_else(|| dump_err(0, format!("missing `{key}`")))?;
        let mut parts = text.split_whitespace();
        if parts.next() != Some(key) {
            return Err(dump_err(line, format!("expected `{key}`")));
        }
        Ok((line, parts.collect()))
    };
    let parse_usize = |line: usize, s: &str| -> Result<usize, GridError> {
        s.parse().map_err(|_| dump_err(line, format!("bad index `{s}`")))
    };
    let single = |(line, parts): (usize, Vec<&str>)| -> Result<usize, GridError> {
        match parts.as_slice() {
            [v] => parse_usize(line, v),
            _ => Err(dump_err(line, "expected one value")),
        }
    };

    let n_buses = single(header("N")?)?;
    let n_branches = single(header("M")?)?;
    let slack = single(header("slack")?)?;
    let (line, parts) = header("pv")?;
    let pv = parts.iter().map(|s| parse_usize(line, s)).collect::<Result<Vec<_>, _>>()?;
    let (line, parts) = header("pq")?;
    let pq = parts.iter().map(|s| parse_usize(line, s)).collect::<Result<Vec<_>, _>>()?;
    let nnz = single(header("ybus")?)?;

    for &k in pv.iter().chain(&pq).chain(std::iter::once(&slack)) {
        if k >= n_buses {
            return Err(dump_err(line, format!("bus index {k} out of range")));
        }
    }

    let mut y_bus = Vec::with_capacity(nnz.min(1 << 20));
    for (line, text) in lines {
        let parts: Vec<&str> = text.split_whitespace().collect();
        let [r, c, re, im] = parts.as_slice() else {
            return Err(dump_err(line, "expected `row col re im`"));
        };
        let (r, c) = (parse_usize(line, r)?, parse_usize(line, c)?);
        if r >= n_buses || c >= n_buses {
            return Err(dump_err(line, "entry out of range"));
        }
        let num = |s: &str| -> Result<f64, GridError> {
            s.parse().map_err(|_| dump_err(line, format!("bad number `{s}`")))
        };
        y_bus.push((r, c, Complex64::new(num(re)?, num(im)?)));
    }
    if y_bus.len() != nnz {
        return Err(dump_err(0, format!("expected {nnz} entries, found {}", y_bus.len())));
    }
    Ok(ProblemDump {
        n_buses,
        n_branches,
        slack,
        pv,
        pq,
        y_bus,
    })
}
