//! Reader and writer for the MATPOWER version 2 case format.
//!
//! Only the power-flow columns are interpreted. Unknown assignments
//! (`mpc.gencost`, `mpc.bus_name`, ...) and `%` comments are skipped.

use super::{BranchRecord, BusRecord, BusType, GenRecord, GridCase, GridError};
use std::fmt::Write as _;

const BUS_MIN_COLS: usize = 13;
const GEN_MIN_COLS: usize = 10;
const BRANCH_MIN_COLS: usize = 11;

struct Row {
    line: usize,
    values: Vec<f64>,
}

/// Parses a MATPOWER case. Out-of-service generators and branches are
/// dropped; the returned case has passed [`GridCase::validate`].
pub fn parse_matpower(text: &str) -> Result<GridCase, GridError> {
    let cleaned = strip_comments(text);

    let base_mva = scalar_assignment(&cleaned, "baseMVA")?;
    let bus_rows = matrix_assignment(&cleaned, "bus")?;
    let gen_rows = matrix_assignment(&cleaned, "gen")?;
    let branch_rows = matrix_assignment(&cleaned, "branch")?;

    check_columns("mpc.bus", &bus_rows, BUS_MIN_COLS)?;
    check_columns("mpc.gen", &gen_rows, GEN_MIN_COLS)?;
    check_columns("mpc.branch", &branch_rows, BRANCH_MIN_COLS)?;

    let buses = bus_rows
        .iter()
        .map(|row| {
            let v = &row.values;
            let code = integer("mpc.bus", row.line, v[1])?;
            let bus_type = BusType::from_code(code).ok_or_else(|| GridError::MalformedRow {
                section: "mpc.bus",
                line: row.line,
                reason: format!("unsupported bus type {code}"),
            })?;
            Ok(BusRecord {
                id: integer("mpc.bus", row.line, v[0])?,
                bus_type,
                pd: v[2],
                qd: v[3],
                gs: v[4],
                bs: v[5],
                vm_init: v[7],
                va_init: v[8],
            })
        })
        .collect::<Result<Vec<_>, GridError>>()?;

    let mut generators = Vec::with_capacity(gen_rows.len());
    for row in &gen_rows {
        let v = &row.values;
        if v[7] <= 0.0 {
            continue;
        }
        generators.push(GenRecord {
            bus_id: integer("mpc.gen", row.line, v[0])?,
            pg: v[1],
            qg: v[2],
            qmax: v[3],
            qmin: v[4],
            vg: v[5],
            in_service: true,
        });
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for row in &branch_rows {
        let v = &row.values;
        if v[10] <= 0.0 {
            continue;
        }
        branches.push(BranchRecord {
            from_bus: integer("mpc.branch", row.line, v[0])?,
            to_bus: integer("mpc.branch", row.line, v[1])?,
            r: v[2],
            x: v[3],
            b_charging: v[4],
            tap: v[8],
            shift: v[9],
            in_service: true,
        });
    }

    let case = GridCase {
        base_mva,
        buses,
        generators,
        branches,
    };
    case.validate()?;
    Ok(case)
}

/// Emits the case in a normalized MATPOWER form that [`parse_matpower`]
/// reads back into an identical [`GridCase`].
pub fn write_matpower(case: &GridCase) -> String {
    let mut out = String::new();
    let status = |s: bool| if s { 1 } else { 0 };
    out.push_str("function mpc = gridflux_case\n");
    out.push_str("mpc.version = '2';\n");
    let _ = writeln!(out, "mpc.baseMVA = {};", case.base_mva);
    out.push_str("\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\nmpc.bus = [\n");
    for b in &case.buses {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t{}\t0\t1\t1.1\t0.9;",
            b.id,
            b.bus_type.code(),
            b.pd,
            b.qd,
            b.gs,
            b.bs,
            b.vm_init,
            b.va_init
        );
    }
    out.push_str("];\n\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\nmpc.gen = [\n");
    for g in &case.generators {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t0\t0;",
            g.bus_id,
            g.pg,
            g.qg,
            g.qmax,
            g.qmin,
            g.vg,
            case.base_mva,
            status(g.in_service)
        );
    }
    out.push_str(
        "];\n\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\nmpc.branch = [\n",
    );
    for br in &case.branches {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t0\t0\t0\t{}\t{}\t{}\t-360\t360;",
            br.from_bus,
            br.to_bus,
            br.r,
            br.x,
            br.b_charging,
            br.tap,
            br.shift,
            status(br.in_service)
        );
    }
    out.push_str("];\n");
    out
}

fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        out.push_str(line.split('%').next().unwrap_or(""));
        out.push('\n');
    }
    out
}

fn line_of(text: &str, byte: usize) -> usize {
    text.as_bytes()[..byte].iter().filter(|&&b| b == b'\n').count() + 1
}

/// Byte offset just past `mpc.<name> =`.
fn find_assignment(text: &str, name: &str) -> Option<usize> {
    let needle = format!("mpc.{name}");
    let mut from = 0;
    while let Some(pos) = text[from..].find(&needle) {
        let start = from + pos;
        let after = start + needle.len();
        let prefix_ok = start == 0 || {
            let c = text.as_bytes()[start - 1];
            !(c.is_ascii_alphanumeric() || c == b'_' || c == b'.')
        };
        let rest = text[after..].trim_start();
        if prefix_ok && rest.starts_with('=') {
            let eq = text.len() - rest.len();
            return Some(eq + 1);
        }
        from = after;
    }
    None
}

fn section_name(name: &str) -> &'static str {
    match name {
        "baseMVA" => "mpc.baseMVA",
        "bus" => "mpc.bus",
        "gen" => "mpc.gen",
        "branch" => "mpc.branch",
        _ => "mpc",
    }
}

fn scalar_assignment(text: &str, name: &str) -> Result<f64, GridError> {
    let section = section_name(name);
    let start = find_assignment(text, name).ok_or(GridError::MissingSection(section))?;
    let line = line_of(text, start);
    let token = text[start..]
        .split([';', '\n'])
        .next()
        .unwrap_or("")
        .trim();
    parse_number(token, line)
}

fn matrix_assignment(text: &str, name: &str) -> Result<Vec<Row>, GridError> {
    let section = section_name(name);
    let start = find_assignment(text, name).ok_or(GridError::MissingSection(section))?;
    let body_start = {
        let rest = &text[start..];
        let trimmed = rest.trim_start();
        if !trimmed.starts_with('[') {
            return Err(GridError::MalformedRow {
                section,
                line: line_of(text, start),
                reason: "expected `[` after assignment".into(),
            });
        }
        start + (rest.len() - trimmed.len()) + 1
    };
    let body_len = text[body_start..].find(']').ok_or_else(|| GridError::MalformedRow {
        section,
        line: line_of(text, body_start),
        reason: "unterminated matrix".into(),
    })?;
    let body = &text[body_start..body_start + body_len];
    let mut line = line_of(text, body_start);
    let mut rows = Vec::new();
    for physical in body.split('\n') {
        for chunk in physical.split(';') {
            let tokens: Vec<&str> = chunk
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .collect();
            if tokens.is_empty() {
                continue;
            }
            let values = tokens
                .iter()
                .map(|t| parse_number(t, line))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(Row { line, values });
        }
        line += 1;
    }
    Ok(rows)
}

fn parse_number(token: &str, line: usize) -> Result<f64, GridError> {
    token.parse::<f64>().map_err(|_| GridError::InvalidNumber {
        line,
        token: token.chars().take(32).collect(),
    })
}

fn check_columns(section: &'static str, rows: &[Row], min: usize) -> Result<(), GridError> {
    let Some(first) = rows.first() else {
        return Ok(());
    };
    let width = first.values.len();
    for row in rows {
        if row.values.len() < min {
            return Err(GridError::MalformedRow {
                section,
                line: row.line,
                reason: format!("expected at least {min} columns, found {}", row.values.len()),
            });
        }
        if row.values.len() != width {
            return Err(GridError::MalformedRow {
                section,
                line: row.line,
                reason: format!("expected {width} columns, found {}", row.values.len()),
            });
        }
    }
    Ok(())
}

fn integer(section: &'static str, line: usize, v: f64) -> Result<i64, GridError> {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 {
        Ok(v as i64)
    } else {
        Err(GridError::MalformedRow {
            section,
            line,
            reason: format!("expected an integer, found {v}"),
        })
    }
}
