//! Static grid description and its conversion into a numerical power-flow
//! problem.

mod dump;
mod matpower;
mod problem;

pub use dump::{read_problem_dump, write_problem_dump, ProblemDump};
pub use matpower::{parse_matpower, write_matpower};
pub use problem::{build_problem, injections_per_unit, PowerFlowProblem};

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("missing required section `{0}`")]
    MissingSection(&'static str),
    #[error("line {line}: malformed row in `{section}`: {reason}")]
    MalformedRow {
        section: &'static str,
        line: usize,
        reason: String,
    },
    #[error("line {line}: cannot parse number `{token}`")]
    InvalidNumber { line: usize, token: String },
    #[error("case has no slack bus")]
    NoSlack,
    #[error("case has {0} slack buses, expected exactly one")]
    MultipleSlack(usize),
    #[error("duplicate bus id {0}")]
    DuplicateBus(i64),
    #[error("{element} references unknown bus {bus}")]
    UnknownBus { element: &'static str, bus: i64 },
    #[error("branch {index} ({from}->{to}) has zero impedance")]
    ZeroImpedance { index: usize, from: i64, to: i64 },
    #[error("base MVA must be positive, got {0}")]
    InvalidBaseMva(f64),
    #[error("in-service generator at bus {bus} has non-positive voltage setpoint {vg}")]
    InvalidSetpoint { bus: i64, vg: f64 },
    #[error("malformed problem dump at line {line}: {reason}")]
    Dump { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BusType {
    Pq = 1,
    Pv = 2,
    Slack = 3,
}

impl BusType {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(Self::Pq),
            2 => Some(Self::Pv),
            3 => Some(Self::Slack),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        self as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: i64,
    pub bus_type: BusType,
    /// MW
    pub pd: f64,
    /// MVAr
    pub qd: f64,
    /// MW consumed at 1 p.u. voltage
    pub gs: f64,
    /// MVAr injected at 1 p.u. voltage
    pub bs: f64,
    pub vm_init: f64,
    /// degrees
    pub va_init: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRecord {
    pub bus_id: i64,
    pub pg: f64,
    pub qg: f64,
    /// Reactive limits are carried along but never enforced.
    pub qmax: f64,
    pub qmin: f64,
    pub vg: f64,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub from_bus: i64,
    pub to_bus: i64,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, p.u.
    pub b_charging: f64,
    /// Off-nominal turns ratio; 0 means 1.0.
    pub tap: f64,
    /// degrees
    pub shift: f64,
    pub in_service: bool,
}

impl BranchRecord {
    pub fn effective_tap(&self) -> f64 {
        if self.tap == 0.0 {
            1.0
        } else {
            self.tap
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub generators: Vec<GenRecord>,
    pub branches: Vec<BranchRecord>,
}

impl GridCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// In-service branch count.
    pub fn n_branches(&self) -> usize {
        self.branches.iter().filter(|b| b.in_service).count()
    }

    /// External id to contiguous internal index, in file order.
    pub fn bus_index(&self) -> HashMap<i64, usize> {
        self.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect()
    }

    pub fn slack_position(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.bus_type == BusType::Slack)
    }

    /// Checks the structural invariants every consumer relies on.
    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.base_mva > 0.0) {
            return Err(GridError::InvalidBaseMva(self.base_mva));
        }
        let slack_count = self.buses.iter().filter(|b| b.bus_type == BusType::Slack).count();
        match slack_count {
            0 => return Err(GridError::NoSlack),
            1 => {}
            n => return Err(GridError::MultipleSlack(n)),
        }
        let index = self.bus_index();
        if index.len() != self.buses.len() {
            let mut seen = std::collections::HashSet::new();
            let dup = self.buses.iter().find(|b| !seen.insert(b.id)).map(|b| b.id);
            return Err(GridError::DuplicateBus(dup.unwrap_or_default()));
        }
        for g in &self.generators {
            if !index.contains_key(&g.bus_id) {
                return Err(GridError::UnknownBus {
                    element: "generator",
                    bus: g.bus_id,
                });
            }
            if g.in_service && !(g.vg > 0.0) {
                return Err(GridError::InvalidSetpoint { bus: g.bus_id, vg: g.vg });
            }
        }
        for (k, br) in self.branches.iter().enumerate() {
            for bus in [br.from_bus, br.to_bus] {
                if !index.contains_key(&bus) {
                    return Err(GridError::UnknownBus { element: "branch", bus });
                }
            }
            if br.in_service && br.r == 0.0 && br.x == 0.0 {
                return Err(GridError::ZeroImpedance {
                    index: k,
                    from: br.from_bus,
                    to: br.to_bus,
                });
            }
        }
        Ok(())
    }
}

/// Two buses joined by a lossless unit-reactance line: bus 1 is the slack at
/// 1∠0 p.u., bus 2 a PQ bus drawing `load_mw` of active power on a 100 MVA
/// base. With only the line to carry it, 50 MW is exactly the transfer limit:
/// the solution sits at the nose point `θ₂ = −π/4`, `|V₂| = 1/√2`, where the
/// Jacobian is singular.
pub fn two_bus_case(load_mw: f64) -> GridCase {
    let bus = |id, bus_type, pd| BusRecord {
        id,
        bus_type,
        pd,
        qd: 0.0,
        gs: 0.0,
        bs: 0.0,
        vm_init: 1.0,
        va_init: 0.0,
    };
    GridCase {
        base_mva: 100.0,
        buses: vec![bus(1, BusType::Slack, 0.0), bus(2, BusType::Pq, load_mw)],
        generators: vec![unit_generator(1)],
        branches: vec![BranchRecord {
            from_bus: 1,
            to_bus: 2,
            r: 0.0,
            x: 1.0,
            b_charging: 0.0,
            tap: 0.0,
            shift: 0.0,
            in_service: true,
        }],
    }
}

/// [`two_bus_case`] with bus 2 voltage-controlled at 1 p.u. by a generator
/// producing no active power. Its solution is `θ₂ = asin(−load_mw / 100)`.
pub fn two_bus_pv_case(load_mw: f64) -> GridCase {
    let mut case = two_bus_case(load_mw);
    case.buses[1].bus_type = BusType::Pv;
    case.generators.push(unit_generator(2));
    case
}

fn unit_generator(bus_id: i64) -> GenRecord {
    GenRecord {
        bus_id,
        pg: 0.0,
        qg: 0.0,
        qmax: 0.0,
        qmin: 0.0,
        vg: 1.0,
        in_service: true,
    }
}
