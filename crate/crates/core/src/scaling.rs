//! Synthetic grid growth: disjoint copies tied together by a few random
//! branches (node scaling) and random extra branches on one grid (edge
//! scaling).

use crate::grid::{build_problem, BranchRecord, BusType, GenRecord, GridCase, GridError};
use crate::pf::calc_power;
use crate::solvers::{solve_nr, SolverError, NR_DEFAULT_MAX_ITER, NR_DEFAULT_TOL};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use thiserror::Error;

/// Random branches added per copy by [`node_scale`].
pub const LINKS_PER_COPY: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error("invalid scaling parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("base case does not solve, cannot balance copies: {0}")]
    BaseSolve(#[from] SolverError),
}

/// `k` disjoint copies of `case` plus `20·k` random branches between them
/// (within the single grid when `k = 1`). Copy `c` renumbers bus `id` to
/// `id + c·(max_id + 1)`. The first `k − 1` links chain the copies so the
/// result is connected; none is a self-loop or duplicates another branch.
/// Only the original slack stays; the others become PV buses whose
/// generation equals the slack output of the solved base case.
pub fn node_scale(case: &GridCase, k: usize, seed: u64) -> Result<GridCase, ScalingError> {
    if k == 0 {
        return Err(ScalingError::InvalidParameters("at least one copy is required".into()));
    }
    case.validate()?;
    let template = template_branches(case)?;
    let slack = case.slack_position().expect("validated");
    let slack_id = case.buses[slack].id;
    let slack_gen_mw = if k > 1 { Some(solved_slack_generation(case)?) } else { None };
    let stride = case.buses.iter().map(|b| b.id).max().expect("validated case has buses") + 1;
    let n = case.n_buses();
    let n_links = LINKS_PER_COPY * k;
    if k == 1 && n < 2 {
        return Err(ScalingError::InvalidParameters("cannot add branches to a single-bus case".into()));
    }

    let mut out = GridCase {
        base_mva: case.base_mva,
        buses: Vec::with_capacity(n * k),
        generators: Vec::with_capacity(case.generators.len() * k),
        branches: Vec::with_capacity(case.branches.len() * k + n_links),
    };
    for c in 0..k as i64 {
        let shift = c * stride;
        for b in &case.buses {
            let mut b = b.clone();
            b.id += shift;
            if c > 0 && b.bus_type == BusType::Slack {
                b.bus_type = BusType::Pv;
            }
            out.buses.push(b);
        }
        let mut gens: Vec<GenRecord> = case.generators.clone();
        for g in gens.iter_mut() {
            g.bus_id += shift;
        }
        if c > 0 {
            balance_demoted_slack(&mut gens, slack_id + shift, slack_gen_mw.expect("k > 1"), case);
        }
        out.generators.extend(gens);
        out.branches.extend(case.branches.iter().map(|br| {
            let mut br = br.clone();
            br.from_bus += shift;
            br.to_bus += shift;
            br
        }));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken: HashSet<(i64, i64)> = out.branches.iter().map(|b| pair(b.from_bus, b.to_bus)).collect();
    let id_of = |copy: usize, bus: usize| case.buses[bus].id + copy as i64 * stride;
    let free_pairs = if k == 1 {
        (n * (n - 1) / 2).saturating_sub(taken.len())
    } else {
        n * n * k * (k - 1) / 2
    };
    if n_links > free_pairs {
        return Err(ScalingError::InvalidParameters("grid too small for the requested links".into()));
    }
    let mut added = 0;
    while added < n_links {
        let (ca, cb) = if k == 1 {
            (0, 0)
        } else if added < k - 1 {
            (added, added + 1)
        } else {
            let a = rng.gen_range(0..k);
            let mut b = rng.gen_range(0..k - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        };
        let from = id_of(ca, rng.gen_range(0..n));
        let to = id_of(cb, rng.gen_range(0..n));
        if from == to || !taken.insert(pair(from, to)) {
            continue;
        }
        out.branches.push(clone_impedance(template.choose(&mut rng).expect("non-empty"), from, to));
        added += 1;
    }
    Ok(out)
}

/// `case` plus `extra_edges` random branches between distinct buses. Pairs
/// may repeat existing connections, in which case the admittances add up.
pub fn edge_scale(case: &GridCase, extra_edges: usize, seed: u64) -> Result<GridCase, ScalingError> {
    case.validate()?;
    if extra_edges == 0 {
        return Ok(case.clone());
    }
    if case.n_buses() < 2 {
        return Err(ScalingError::InvalidParameters("cannot add branches to a single-bus case".into()));
    }
    let template = template_branches(case)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = case.clone();
    out.branches.reserve(extra_edges);
    let n = case.n_buses();
    for _ in 0..extra_edges {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let proto = template.choose(&mut rng).expect("non-empty");
        out.branches.push(clone_impedance(proto, case.buses[a].id, case.buses[b].id));
    }
    Ok(out)
}

fn template_branches(case: &GridCase) -> Result<Vec<&BranchRecord>, ScalingError> {
    let t: Vec<&BranchRecord> = case.branches.iter().filter(|b| b.in_service).collect();
    if t.is_empty() {
        return Err(ScalingError::InvalidParameters("case has no in-service branch to clone".into()));
    }
    Ok(t)
}

fn clone_impedance(proto: &BranchRecord, from: i64, to: i64) -> BranchRecord {
    BranchRecord {
        from_bus: from,
        to_bus: to,
        r: proto.r,
        x: proto.x,
        b_charging: proto.b_charging,
        tap: 0.0,
        shift: 0.0,
        in_service: true,
    }
}

fn pair(a: i64, b: i64) -> (i64, i64) {
    (a.min(b), a.max(b))
}

/// Total active generation (MW) the slack bus supplies in the NR solution.
fn solved_slack_generation(case: &GridCase) -> Result<f64, ScalingError> {
    let problem = build_problem(case)?;
    let sol = solve_nr(&problem, NR_DEFAULT_TOL, NR_DEFAULT_MAX_ITER)?;
    if !sol.converged {
        return Err(ScalingError::InvalidParameters("base case did not converge".into()));
    }
    let s = calc_power(&sol.state, &problem.y_bus).map_err(SolverError::from)?;
    let slack = problem.slack;
    Ok((s[slack].re + problem.s_load[slack].re) * case.base_mva)
}

/// Sets the generation at a demoted slack bus to `total_mw`, adding a
/// generator when the bus had none in service.
fn balance_demoted_slack(gens: &mut Vec<GenRecord>, bus_id: i64, total_mw: f64, case: &GridCase) {
    let mut at_bus = gens.iter_mut().filter(|g| g.bus_id == bus_id && g.in_service);
    match at_bus.next() {
        Some(first) => {
            let others: f64 = at_bus.map(|g| g.pg).sum();
            first.pg = total_mw - others;
        }
        None => {
            let vm = case.buses[case.slack_position().expect("validated")].vm_init;
            gens.push(GenRecord {
                bus_id,
                pg: total_mw,
                qg: 0.0,
                qmax: 0.0,
                qmin: 0.0,
                vg: vm,
                in_service: true,
            });
        }
    }
}
