mod common;

use common::{case, case_text, problem};
use gridflux::grid::{parse_matpower, read_problem_dump, write_matpower, write_problem_dump, BusType, GridError};
use gridflux::sparse::block_diag;
use num_complex::Complex64;

/// Dense admittance matrix assembled entry by entry from the branch list.
fn dense_oracle(name: &str) -> Vec<Vec<Complex64>> {
    let c = case(name);
    let n = c.n_buses();
    let index = c.bus_index();
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (k, b) in c.buses.iter().enumerate() {
        y[k][k] += Complex64::new(b.gs, b.bs) / c.base_mva;
    }
    for br in c.branches.iter().filter(|b| b.in_service) {
        let (f, t) = (index[&br.from_bus], index[&br.to_bus]);
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let half_b = Complex64::new(0.0, br.b_charging / 2.0);
        let tau = if br.tap == 0.0 { 1.0 } else { br.tap };
        let shift = br.shift.to_radians();
        y[f][f] += (ys + half_b) / (tau * tau);
        y[f][t] += -ys / (tau * Complex64::from_polar(1.0, -shift));
        y[t][f] += -ys / (tau * Complex64::from_polar(1.0, shift));
        y[t][t] += ys + half_b;
    }
    y
}

#[test]
fn canonical_cases_have_expected_sizes() {
    assert_eq!(case("case9").n_buses(), 9);
    assert_eq!(case("case14").n_buses(), 14);
    assert_eq!(case("case118").n_buses(), 118);
    assert_eq!(case("case300").n_buses(), 300);
}

#[test]
fn admittance_matches_dense_oracle() {
    for name in ["case9", "case14", "case118", "case300"] {
        let oracle = dense_oracle(name);
        let dense = problem(name).y_bus.to_dense();
        for (row_o, row_d) in oracle.iter().zip(&dense) {
            for (o, d) in row_o.iter().zip(row_d) {
                assert!((o - d).norm() <= 1e-12, "{name}: {o} vs {d}");
            }
        }
    }
}

#[test]
fn admittance_times_flat_voltage_matches_oracle() {
    let oracle = dense_oracle("case14");
    let p = problem("case14");
    let ones = vec![Complex64::new(1.0, 0.0); 14];
    let y = p.y_bus.spmv(&ones).unwrap();
    for (i, row) in oracle.iter().enumerate() {
        let expected: Complex64 = row.iter().sum();
        assert!((y[i] - expected).norm() <= 1e-12);
    }
}

#[test]
fn shift_free_admittance_is_symmetric() {
    for name in ["case14", "case118", "case300"] {
        let y = problem(name).y_bus;
        for (r, c, v) in y.triplets() {
            assert!((v - y.get(c, r)).norm() <= 1e-14, "{name} ({r},{c})");
        }
    }
}

#[test]
fn index_sets_partition_the_buses() {
    for name in ["case14", "case118", "case300"] {
        let p = problem(name);
        let mut seen = vec![0u8; p.n_buses()];
        for &k in p.pv.iter().chain(&p.pq).chain(std::iter::once(&p.slack)) {
            seen[k] += 1;
        }
        assert!(seen.iter().all(|&s| s == 1), "{name}");
        for &k in p.pv.iter().chain(std::iter::once(&p.slack)) {
            assert!(p.vm_setpoint[k] > 0.0);
        }
    }
}

#[test]
fn nnz_bounded_by_buses_plus_two_per_branch() {
    for name in ["case14", "case118", "case300"] {
        let p = problem(name);
        assert!(p.y_bus.nnz() <= p.n_buses() + 2 * p.n_branches, "{name}");
    }
}

#[test]
fn normalized_form_round_trips() {
    for name in ["case9", "case14", "case118", "case300"] {
        let c = case(name);
        assert_eq!(parse_matpower(&write_matpower(&c)).unwrap(), c, "{name}");
    }
}

#[test]
fn missing_bus_section_is_named() {
    let text = case_text("case14");
    let start = text.find("mpc.bus = [").unwrap();
    let end = start + text[start..].find("];").unwrap() + 2;
    let broken = format!("{}{}", &text[..start], &text[end..]);
    let err = parse_matpower(&broken).unwrap_err();
    assert_eq!(err, GridError::MissingSection("mpc.bus"));
    assert!(err.to_string().contains("bus"));
}

#[test]
fn slack_count_is_validated() {
    let mut c = case("case14");
    c.buses[1].bus_type = BusType::Slack;
    assert_eq!(c.validate(), Err(GridError::MultipleSlack(2)));
    let mut c = case("case14");
    c.buses.iter_mut().for_each(|b| {
        if b.bus_type == BusType::Slack {
            b.bus_type = BusType::Pv;
        }
    });
    assert_eq!(c.validate(), Err(GridError::NoSlack));
}

#[test]
fn gen_cost_tables_are_ignored() {
    let c = case("case118");
    assert!(case_text("case118").contains("mpc.gencost"));
    assert_eq!(c.generators.len(), 54);
}

#[test]
fn injections_match_hand_sums() {
    let c = case("case14");
    let p = problem("case14");
    let index = c.bus_index();
    let mut hand = vec![Complex64::new(0.0, 0.0); 14];
    for b in &c.buses {
        hand[index[&b.id]] -= Complex64::new(b.pd, b.qd) / 100.0;
    }
    for g in &c.generators {
        hand[index[&g.bus_id]] += Complex64::new(g.pg, g.qg) / 100.0;
    }
    for (a, b) in hand.iter().zip(&p.s_bus) {
        assert!((a - b).norm() < 1e-15);
    }
}

#[test]
fn problem_dump_round_trips() {
    let p = problem("case118");
    let dump = read_problem_dump(&write_problem_dump(&p)).unwrap();
    assert_eq!(dump.n_buses, 118);
    assert_eq!(dump.n_branches, p.n_branches);
    assert_eq!((dump.slack, &dump.pv, &dump.pq), (p.slack, &p.pv, &p.pq));
    let triplets: Vec<_> = p.y_bus.triplets().collect();
    assert_eq!(dump.y_bus.len(), triplets.len());
    for (a, b) in dump.y_bus.iter().zip(&triplets) {
        assert_eq!((a.0, a.1), (b.0, b.1));
        assert!((a.2 - b.2).norm() <= 1e-15 * b.2.norm().max(1.0));
    }
}

#[test]
fn eight_copies_of_case118_admittance() {
    let y = problem("case118").y_bus;
    let blocks = vec![&y; 8];
    let stacked = block_diag(&blocks).unwrap();
    assert_eq!((stacked.n_rows(), stacked.n_cols()), (944, 944));
    assert_eq!(stacked.nnz(), 8 * y.nnz());
}
