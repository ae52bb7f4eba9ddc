use super::{BusType, GridCase, GridError};
use crate::sparse::{SparseComplexMatrix, TripletBuilder};
use num_complex::Complex64;

/// Numerical power-flow problem derived from a [`GridCase`].
///
/// Bus indices are contiguous and follow file order; `bus_ids` maps them back
/// to the external ids.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowProblem {
    pub y_bus: SparseComplexMatrix,
    /// Net specified injection, generation minus demand, p.u.
    pub s_bus: Vec<Complex64>,
    /// Generation part of `s_bus`, p.u.
    pub s_gen: Vec<Complex64>,
    /// Demand part of `s_bus` (positive = consumption), p.u.
    pub s_load: Vec<Complex64>,
    pub pv: Vec<usize>,
    pub pq: Vec<usize>,
    pub slack: usize,
    /// Magnitude setpoints at pv and slack; 1.0 elsewhere.
    pub vm_setpoint: Vec<f64>,
    pub slack_angle: f64,
    pub bus_ids: Vec<i64>,
    pub base_mva: f64,
    pub n_branches: usize,
    /// `(from, to, x)` of every in-service branch, for the DC approximation.
    pub branch_reactance: Vec<(usize, usize, f64)>,
    pub warnings: Vec<String>,
}

impl PowerFlowProblem {
    pub fn n_buses(&self) -> usize {
        self.s_bus.len()
    }

    /// Replaces the specified injections, keeping the network untouched.
    pub fn with_injections(&self, s_bus: Vec<Complex64>) -> Self {
        assert_eq!(s_bus.len(), self.n_buses(), "injection vector length");
        let mut p = self.clone();
        p.s_bus = s_bus;
        p
    }

    /// Bus kind after reclassification (PV buses without a generator are PQ).
    pub fn bus_kind(&self, bus: usize) -> BusType {
        if bus == self.slack {
            BusType::Slack
        } else if self.pv.binary_search(&bus).is_ok() {
            BusType::Pv
        } else {
            BusType::Pq
        }
    }
}

/// Specified net injections `(Σ gen − demand) / base_mva` per bus.
pub fn injections_per_unit(case: &GridCase) -> Result<Vec<Complex64>, GridError> {
    case.validate()?;
    let (gen, load) = split_injections(case);
    Ok(gen.iter().zip(&load).map(|(g, l)| g - l).collect())
}

fn split_injections(case: &GridCase) -> (Vec<Complex64>, Vec<Complex64>) {
    let index = case.bus_index();
    let base = case.base_mva;
    let load: Vec<Complex64> = case
        .buses
        .iter()
        .map(|b| Complex64::new(b.pd, b.qd) / base)
        .collect();
    let mut gen_mw = vec![Complex64::new(0.0, 0.0); case.n_buses()];
    for g in case.generators.iter().filter(|g| g.in_service) {
        gen_mw[index[&g.bus_id]] += Complex64::new(g.pg, g.qg);
    }
    let gen = gen_mw.into_iter().map(|s| s / base).collect();
    (gen, load)
}

/// Builds `Y_bus`, `S_bus`, the bus-index sets and voltage setpoints.
pub fn build_problem(case: &GridCase) -> Result<PowerFlowProblem, GridError> {
    case.validate()?;
    let n = case.n_buses();
    let index = case.bus_index();
    let base = case.base_mva;

    let mut builder = TripletBuilder::with_capacity(n, n, n + 4 * case.branches.len());
    for (k, bus) in case.buses.iter().enumerate() {
        builder
            .push(k, k, Complex64::new(bus.gs, bus.bs) / base)
            .expect("bus index in range");
    }
    for br in case.branches.iter().filter(|b| b.in_service) {
        let f = index[&br.from_bus];
        let t = index[&br.to_bus];
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let charging = Complex64::new(0.0, br.b_charging / 2.0);
        let tap = Complex64::from_polar(br.effective_tap(), br.shift.to_radians());
        let yff = (ys + charging) / (tap * tap.conj());
        let yft = -ys / tap.conj();
        let ytf = -ys / tap;
        let ytt = ys + charging;
        builder.push(f, f, yff).expect("in range");
        builder.push(f, t, yft).expect("in range");
        builder.push(t, f, ytf).expect("in range");
        builder.push(t, t, ytt).expect("in range");
    }
    let y_bus = builder.build();
    let branch_reactance = case
        .branches
        .iter()
        .filter(|b| b.in_service)
        .map(|b| (index[&b.from_bus], index[&b.to_bus], b.x))
        .collect();

    let (s_gen, s_load) = split_injections(case);
    let s_bus = s_gen.iter().zip(&s_load).map(|(g, l)| g - l).collect();

    let mut first_vg: Vec<Option<f64>> = vec![None; n];
    let mut warnings = Vec::new();
    for g in case.generators.iter().filter(|g| g.in_service) {
        let k = index[&g.bus_id];
        match first_vg[k] {
            None => first_vg[k] = Some(g.vg),
            Some(v) if (v - g.vg).abs() > 1e-6 => {
                let msg = format!(
                    "bus {}: generator setpoints disagree ({v} vs {}); using {v}",
                    g.bus_id, g.vg
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
            Some(_) => {}
        }
    }

    let slack = case.slack_position().expect("validated case has a slack");
    let mut pv = Vec::new();
    let mut pq = Vec::new();
    let mut vm_setpoint = vec![1.0; n];
    for (k, bus) in case.buses.iter().enumerate() {
        match bus.bus_type {
            BusType::Slack => vm_setpoint[k] = first_vg[k].unwrap_or(bus.vm_init),
            BusType::Pv => match first_vg[k] {
                Some(vg) => {
                    pv.push(k);
                    vm_setpoint[k] = vg;
                }
                None => pq.push(k),
            },
            BusType::Pq => pq.push(k),
        }
    }
    if !(vm_setpoint[slack] > 0.0) {
        return Err(GridError::InvalidSetpoint {
            bus: case.buses[slack].id,
            vg: vm_setpoint[slack],
        });
    }

    Ok(PowerFlowProblem {
        y_bus,
        s_bus,
        s_gen,
        s_load,
        pv,
        pq,
        slack,
        vm_setpoint,
        slack_angle: 0.0,
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
        base_mva: base,
        n_branches: case.n_branches(),
        branch_reactance,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BranchRecord, BusRecord, GenRecord};

    fn bus(id: i64, bus_type: BusType, pd: f64, qd: f64) -> BusRecord {
        BusRecord {
            id,
            bus_type,
            pd,
            qd,
            gs: 0.0,
            bs: 0.0,
            vm_init: 1.0,
            va_init: 0.0,
        }
    }

    fn line(from: i64, to: i64, r: f64, x: f64, tap: f64) -> BranchRecord {
        BranchRecord {
            from_bus: from,
            to_bus: to,
            r,
            x,
            b_charging: 0.0,
            tap,
            shift: 0.0,
            in_service: true,
        }
    }

    fn gen(bus_id: i64, pg: f64, vg: f64) -> GenRecord {
        GenRecord {
            bus_id,
            pg,
            qg: 0.0,
            qmax: 0.0,
            qmin: 0.0,
            vg,
            in_service: true,
        }
    }

    fn two_bus(tap: f64) -> GridCase {
        GridCase {
            base_mva: 100.0,
            buses: vec![bus(1, BusType::Slack, 0.0, 0.0), bus(2, BusType::Pq, 0.0, 0.0)],
            generators: vec![gen(1, 0.0, 1.0)],
            branches: vec![line(1, 2, 0.0, 1.0, tap)],
        }
    }

    #[test]
    fn lossless_line_admittance() {
        let p = build_problem(&two_bus(0.0)).unwrap();
        let j = Complex64::new(0.0, 1.0);
        assert_eq!(p.y_bus.get(0, 0), -j);
        assert_eq!(p.y_bus.get(0, 1), j);
        assert_eq!(p.y_bus.get(1, 0), j);
        assert_eq!(p.y_bus.get(1, 1), -j);
    }

    #[test]
    fn tap_ratio_scales_from_side() {
        let p = build_problem(&two_bus(2.0)).unwrap();
        assert!((p.y_bus.get(0, 0) - Complex64::new(0.0, -0.25)).norm() < 1e-15);
        assert!((p.y_bus.get(0, 1) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn parallel_branches_merge() {
        let mut case = two_bus(0.0);
        case.branches.push(line(2, 1, 0.0, 1.0, 0.0));
        let p = build_problem(&case).unwrap();
        assert_eq!(p.y_bus.nnz(), 4);
        assert_eq!(p.y_bus.get(0, 1), Complex64::new(0.0, 2.0));
    }

    #[test]
    fn per_unit_injections() {
        let mut case = two_bus(0.0);
        case.buses.push(bus(3, BusType::Pq, 0.0, 0.0));
        case.buses[1].pd = 100.0;
        case.buses[1].qd = 20.0;
        let s = injections_per_unit(&case).unwrap();
        assert_eq!(s[1], Complex64::new(-1.0, -0.2));
        assert_eq!(s[2], Complex64::new(0.0, 0.0));
        case.generators.push(gen(2, 50.0, 1.0));
        let s = injections_per_unit(&case).unwrap();
        assert_eq!(s[1], Complex64::new(-0.5, -0.2));
    }

    #[test]
    fn pv_without_generator_becomes_pq() {
        let mut case = two_bus(0.0);
        case.buses[1].bus_type = BusType::Pv;
        let p = build_problem(&case).unwrap();
        assert!(p.pv.is_empty());
        assert_eq!(p.pq, vec![1]);
        case.generators.push(gen(2, 10.0, 1.02));
        let p = build_problem(&case).unwrap();
        assert_eq!(p.pv, vec![1]);
        assert_eq!(p.vm_setpoint[1], 1.02);
    }

    #[test]
    fn disagreeing_setpoints_warn_and_keep_first() {
        let mut case = two_bus(0.0);
        case.buses[1].bus_type = BusType::Pv;
        case.generators.push(gen(2, 10.0, 1.02));
        case.generators.push(gen(2, 5.0, 1.05));
        let p = build_problem(&case).unwrap();
        assert_eq!(p.vm_setpoint[1], 1.02);
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(p.s_bus[1].re, 0.15);
    }

    #[test]
    fn slack_setpoint_falls_back_to_bus_vm() {
        let mut case = two_bus(0.0);
        case.generators.clear();
        case.buses[0].vm_init = 1.04;
        assert_eq!(build_problem(&case).unwrap().vm_setpoint[0], 1.04);
    }

    #[test]
    fn invalid_cases_are_rejected() {
        let mut case = two_bus(0.0);
        case.branches.push(line(1, 2, 0.0, 0.0, 0.0));
        assert!(matches!(build_problem(&case), Err(GridError::ZeroImpedance { index: 1, .. })));
        let mut case = two_bus(0.0);
        case.branches.push(line(1, 9, 0.1, 0.1, 0.0));
        assert!(matches!(build_problem(&case), Err(GridError::UnknownBus { bus: 9, .. })));
    }

    #[test]
    fn isolated_bus_keeps_a_diagonal_entry() {
        let mut case = two_bus(0.0);
        case.buses.push(bus(3, BusType::Pq, 1.0, 0.0));
        let p = build_problem(&case).unwrap();
        assert_eq!(p.y_bus.nnz(), 5);
        assert_eq!(p.y_bus.get(2, 2), Complex64::new(0.0, 0.0));
    }
}
