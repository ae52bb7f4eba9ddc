//! End-to-end acceptance checks. Runs as a plain binary (no test harness) so
//! it can print one PASS/FAIL line per check and install an allocation
//! counter for the memory check.

use gridflux::grid::{build_problem, parse_matpower, two_bus_pv_case, GridCase, PowerFlowProblem};
use gridflux::optim::preset;
use gridflux::pf::{assemble_jacobian, grad_loss, loss, mismatch, VoltageState};
use gridflux::scaling::{edge_scale, node_scale};
use gridflux::series::{generate_series, iterations_to_reach, solve_series, solve_series_cold};
use gridflux::solvers::{make_batch, solve_batch, solve_dc, solve_dpf, solve_nr, DpfConfig, Solution};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

struct CountingAlloc;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static LARGEST: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for CountingAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let live = LIVE.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(live, Ordering::Relaxed);
            LARGEST.fetch_max(layout.size(), Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn case(name: &str) -> GridCase {
    let path = format!("{}/data/{name}.m", env!("CARGO_MANIFEST_DIR"));
    parse_matpower(&std::fs::read_to_string(&path).expect("case file")).expect("valid case")
}

fn problem(name: &str) -> PowerFlowProblem {
    build_problem(&case(name)).expect("valid problem")
}

fn random_state(p: &PowerFlowProblem, rng: &mut ChaCha8Rng) -> VoltageState {
    let mut s = VoltageState {
        vm: (0..p.n_buses()).map(|_| rng.gen_range(0.9..1.1)).collect(),
        va: (0..p.n_buses()).map(|_| rng.gen_range(-0.3..0.3)).collect(),
    };
    s.project(&p.view());
    s
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(started: Instant, budget: Duration, detail: String) -> Outcome {
    let spent = started.elapsed();
    check(spent < budget, format!("{detail}; {:.2}s of {:.0}s", spent.as_secs_f64(), budget.as_secs_f64()))
}

fn gradient_finite_differences() -> Outcome {
    let started = Instant::now();
    let p = problem("case14");
    let net = p.view();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let state = random_state(&p, &mut rng);
        let analytic = grad_loss(&state, &net).map_err(|e| e.to_string())?.packed();
        let params = state.pack(&net);
        let mut probe = state.clone();
        let mut eval = |x: &[f64]| {
            probe.unpack(&net, x);
            loss(&mismatch(&probe, &net).expect("valid state"))
        };
        for k in 0..params.len() {
            let mut x = params.clone();
            x[k] = params[k] + h;
            let up = eval(&x);
            x[k] = params[k] - h;
            let down = eval(&x);
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max((analytic[k] - numeric).abs() / analytic[k].abs().max(1.0));
        }
    }
    check(worst < 1e-5, format!("max relative error {worst:.2e} over 50 states"))
        .and_then(|d| within_budget(started, Duration::from_secs(5), d))
}

fn gradient_jacobian_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for name in ["case14", "case118"] {
        let p = problem(name);
        let net = p.view();
        for _ in 0..10 {
            let state = random_state(&p, &mut rng);
            let g = grad_loss(&state, &net).map_err(|e| e.to_string())?.packed();
            let j = assemble_jacobian(&state, &net).map_err(|e| e.to_string())?.assembled;
            let f = mismatch(&state, &net).map_err(|e| e.to_string())?.stacked();
            let jt_f = j.transpose_mul_vec(&f).map_err(|e| e.to_string())?;
            let scale = 2.0 / f.len() as f64;
            for (a, b) in g.iter().zip(&jt_f) {
                worst = worst.max((a - scale * b).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max absolute difference {worst:.2e} over 20 states"))
}

fn newton_convergence() -> Outcome {
    let started = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["case14", "case118", "case300"] {
        let p = problem(name);
        let sol = solve_nr(&p, 1e-8, 20).map_err(|e| format!("{name}: {e}"))?;
        ok &= sol.converged && sol.max_mismatch <= 1e-8 && sol.iterations <= 10;
        parts.push(format!("{name} {} it {:.1e}", sol.iterations, sol.max_mismatch));
    }
    check(ok, parts.join(", ")).and_then(|d| within_budget(started, Duration::from_secs(10), d))
}

fn quality_ordering() -> Outcome {
    let p = problem("case118");
    let net = p.view();
    let nr = solve_nr(&p, 1e-8, 20).map_err(|e| e.to_string())?.max_mismatch;
    let cfg = preset("dpf-118").map_err(|e| e.to_string())?;
    let dpf_sol = solve_dpf(&p, &cfg, None).map_err(|e| e.to_string())?;
    let dpf = dpf_sol.max_mismatch;
    let dc_state = solve_dc(&p).map_err(|e| e.to_string())?;
    let dc = mismatch(&dc_state, &net).map_err(|e| e.to_string())?.max_abs();
    check(
        nr * 10.0 <= dpf && dpf * 10.0 <= dc,
        format!("NR {nr:.2e} < DPF {dpf:.2e} ({} it) < DC {dc:.2e}", dpf_sol.iterations),
    )
}

fn two_bus_closed_form() -> Outcome {
    let p = build_problem(&two_bus_pv_case(50.0)).map_err(|e| e.to_string())?;
    let exact = (-0.5f64).asin();
    let cfg = preset("dpf-118").map_err(|e| e.to_string())?;
    let dpf = solve_dpf(&p, &cfg, None).map_err(|e| e.to_string())?.state.va[1];
    let nr = solve_nr(&p, 1e-8, 20).map_err(|e| e.to_string())?.state.va[1];
    let dc = solve_dc(&p).map_err(|e| e.to_string())?.va[1];
    check(
        (dpf - exact).abs() <= 1e-4 && (nr - exact).abs() <= 1e-4 && dc == -0.5,
        format!("DPF {dpf:.6}, NR {nr:.6}, DC {dc}"),
    )
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn warm_start_speedup() -> Outcome {
    let started = Instant::now();
    let p = problem("case118");
    let series = generate_series(&p, 20, 0.02, 42).map_err(|e| e.to_string())?;
    let first = preset("ts-first").map_err(|e| e.to_string())?;
    let warm = preset("ts-warm").map_err(|e| e.to_string())?;
    let cold = solve_series_cold(&series, &first).map_err(|e| e.to_string())?;
    let warm_sols = solve_series(&series, &first, &warm).map_err(|e| e.to_string())?;
    let mut cold_its = Vec::new();
    let mut warm_its = Vec::new();
    let mut unreached = 0;
    for t in 1..series.len() {
        cold_its.push(cold[t].iterations as f64);
        match iterations_to_reach(&warm_sols[t].loss_history, cold[t].final_loss) {
            Some(it) => warm_its.push(it as f64),
            None => {
                unreached += 1;
                warm_its.push(f64::INFINITY);
            }
        }
    }
    let mc = median(&mut cold_its);
    let mw = median(&mut warm_its);
    check(
        mw <= 0.3 * mc,
        format!("median warm {mw} vs cold {mc} iterations ({unreached} warm steps never reached the cold loss)"),
    )
    .and_then(|d| within_budget(started, Duration::from_secs(300), d))
}

fn same_bits(a: &Solution, b: &Solution) -> bool {
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    bits(&a.state.vm) == bits(&b.state.vm)
        && bits(&a.state.va) == bits(&b.state.va)
        && bits(&a.loss_history) == bits(&b.loss_history)
        && bits(&a.mismatch_history) == bits(&b.mismatch_history)
        && a.iterations == b.iterations
        && a.converged == b.converged
        && a.final_loss.to_bits() == b.final_loss.to_bits()
        && a.max_mismatch.to_bits() == b.max_mismatch.to_bits()
}

fn batching_equivalence() -> Outcome {
    let p = problem("case118");
    let cfg = preset("dpf-118").map_err(|e| e.to_string())?;
    let eight = make_batch(&[&p; 8]).map_err(|e| e.to_string())?;
    let sols = solve_batch(&eight, &cfg, None).map_err(|e| e.to_string())?;
    let identical = sols.iter().all(|s| same_bits(s, &sols[0]));
    let one = make_batch(&[&p]).map_err(|e| e.to_string())?;
    let batched = solve_batch(&one, &cfg, None).map_err(|e| e.to_string())?;
    let solo = solve_dpf(&p, &cfg, None).map_err(|e| e.to_string())?;
    let equal = same_bits(&batched[0], &solo);
    check(
        identical && equal,
        format!("8 copies identical: {identical}; batch of one equals solo run: {equal}"),
    )
}

/// Best-of-three time per DPF iteration with termination disabled.
fn per_iteration_seconds(p: &PowerFlowProblem, iterations: usize) -> Result<f64, String> {
    let mut cfg: DpfConfig = preset("dpf-118").map_err(|e| e.to_string())?;
    cfg.max_iter = iterations;
    cfg.loss_tol = 0.0;
    cfg.mismatch_tol = 0.0;
    cfg.record_history = false;
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let sol = solve_dpf(p, &cfg, None).map_err(|e| e.to_string())?;
        best = best.min(sol.wall_time.as_secs_f64() / sol.iterations as f64);
    }
    Ok(best)
}

fn linear_scaling() -> Outcome {
    let started = Instant::now();
    let base = case("case300");
    let mut log_nnz = Vec::new();
    let mut log_t = Vec::new();
    let mut parts = Vec::new();
    for k in [1usize, 2, 4, 8] {
        let p = build_problem(&node_scale(&base, k, 11).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let t = per_iteration_seconds(&p, 200)?;
        log_nnz.push((p.y_bus.nnz() as f64).ln());
        log_t.push(t.ln());
        parts.push(format!("k={k} nnz {} {:.1}us", p.y_bus.nnz(), t * 1e6));
    }
    let n = log_nnz.len() as f64;
    let mx = log_nnz.iter().sum::<f64>() / n;
    let my = log_t.iter().sum::<f64>() / n;
    let sxy: f64 = log_nnz.iter().zip(&log_t).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = log_nnz.iter().map(|x| (x - mx).powi(2)).sum();
    let exponent = sxy / sxx;

    let mut edge_times = Vec::new();
    for extra in [0usize, 2000, 8000] {
        let p = build_problem(&edge_scale(&base, extra, 11).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let t = per_iteration_seconds(&p, 200)?;
        parts.push(format!("+{extra} edges nnz {} {:.1}us", p.y_bus.nnz(), t * 1e6));
        edge_times.push(t);
    }
    let growth = edge_times[2] / edge_times[0];
    check(
        exponent <= 1.3 && growth <= 2.0,
        format!("exponent {exponent:.2}, +8000-edge growth {growth:.2}x [{}]", parts.join("; ")),
    )
    .and_then(|d| within_budget(started, Duration::from_secs(300), d))
}

/// Independent reading of one MATPOWER matrix: rows of numbers between
/// `mpc.<name> = [` and `];`.
fn raw_matrix(text: &str, name: &str) -> Vec<Vec<f64>> {
    let start = text.find(&format!("mpc.{name} = [")).expect("section present");
    let body = &text[start..];
    let body = &body[body.find('[').unwrap() + 1..body.find("];").unwrap()];
    body.lines()
        .map(|l| l.split('%').next().unwrap().trim().trim_end_matches(';'))
        .filter(|l| !l.is_empty())
        .map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect())
        .collect()
}

fn admittance_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_s = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for name in ["case14", "case118"] {
        let text = std::fs::read_to_string(format!("{}/data/{name}.m", env!("CARGO_MANIFEST_DIR"))).unwrap();
        let base_mva: f64 = text
            .split("mpc.baseMVA =")
            .nth(1)
            .and_then(|s| s.split(';').next())
            .and_then(|s| s.trim().parse().ok())
            .unwrap();
        let buses = raw_matrix(&text, "bus");
        let gens = raw_matrix(&text, "gen");
        let branches = raw_matrix(&text, "branch");
        let n = buses.len();
        let pos = |id: f64| buses.iter().position(|b| b[0] == id).unwrap();
        let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for (i, b) in buses.iter().enumerate() {
            y[i][i] += Complex64::new(b[4], b[5]) / base_mva;
        }
        for br in branches.iter().filter(|br| br[10] > 0.0) {
            let (f, t) = (pos(br[0]), pos(br[1]));
            let z = Complex64::new(br[2], br[3]);
            let ys = z.inv();
            let bc = Complex64::new(0.0, br[4] / 2.0);
            let ratio = if br[8] == 0.0 { 1.0 } else { br[8] };
            let a = Complex64::from_polar(ratio, br[9].to_radians());
            y[f][f] += (ys + bc) / (ratio * ratio);
            y[f][t] += -ys / a.conj();
            y[t][f] += -ys / a;
            y[t][t] += ys + bc;
        }
        let p = problem(name);
        let dense = p.y_bus.to_dense();
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((dense[i][j] - y[i][j]).norm());
            }
        }
        for _ in 0..5 {
            let k = rng.gen_range(0..n);
            let id = buses[k][0];
            let gen: Complex64 = gens
                .iter()
                .filter(|g| g[0] == id && g[7] > 0.0)
                .map(|g| Complex64::new(g[1], g[2]))
                .sum();
            let expected = (gen - Complex64::new(buses[k][2], buses[k][3])) / base_mva;
            worst_s = worst_s.max((p.s_bus[k] - expected).norm());
        }
    }
    check(
        worst <= 1e-12 && worst_s <= 1e-12,
        format!("Y_bus max deviation {worst:.2e}, S_bus max deviation {worst_s:.2e}"),
    )
}

fn memory_footprint() -> Outcome {
    let scaled = node_scale(&case("case300"), 31, 3).map_err(|e| e.to_string())?;
    let p = build_problem(&scaled).map_err(|e| e.to_string())?;
    let n = p.n_buses();
    let cfg = preset("dpf-9241").map_err(|e| e.to_string())?;
    let baseline = LIVE.load(Ordering::Relaxed);
    PEAK.store(baseline, Ordering::Relaxed);
    LARGEST.store(0, Ordering::Relaxed);
    let sol = solve_dpf(&p, &cfg, None).map_err(|e| e.to_string())?;
    let peak_slots = (PEAK.load(Ordering::Relaxed) - baseline) / 8;
    let largest_slots = LARGEST.load(Ordering::Relaxed) / 8;
    let detail = format!(
        "N = {n}, {} iterations: peak {peak_slots} slots ({:.1}·N), largest block {largest_slots} slots (N² = {})",
        sol.iterations,
        peak_slots as f64 / n as f64,
        n * n
    );
    drop(sol);
    check(peak_slots <= 64 * n && largest_slots < n * n, detail)
}

fn main() {
    let checks: [Check; 10] = [
        ("gradient vs central finite differences", gradient_finite_differences),
        ("gradient equals scaled Jacobian-transpose product", gradient_jacobian_identity),
        ("Newton-Raphson convergence and speed", newton_convergence),
        ("solution quality NR < DPF < DC", quality_ordering),
        ("two-bus closed form", two_bus_closed_form),
        ("warm-start speedup on a load series", warm_start_speedup),
        ("batching equivalence", batching_equivalence),
        ("per-iteration cost scales linearly", linear_scaling),
        ("admittance matrix and injections oracle", admittance_oracle),
        ("solver memory stays linear in N", memory_footprint),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (k, (name, run)) in checks.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = run();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} {:>2} {name}: {detail}", k + 1);
        failures += outcome.is_err() as usize;
    }
    println!("acceptance: {} of {} checks failed", failures, checks.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
