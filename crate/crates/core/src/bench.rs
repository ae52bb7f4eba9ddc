//! Benchmark harness: a suite of (grid, solver, batch size) cells, each timed
//! over several repeats after one warm-up run.

use crate::grid::{build_problem, parse_matpower, GridCase, PowerFlowProblem};
use crate::optim::preset;
use crate::scaling::{edge_scale, node_scale};
use crate::solvers::{make_batch, solve_batch, solve_dc, solve_dpf, solve_nr, DpfConfig, Solution, NR_DEFAULT_MAX_ITER, NR_DEFAULT_TOL};
use crate::pf::mismatch;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid suite: {0}")]
    InvalidSuite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Dpf,
    Nr,
    Dc,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dpf => "dpf",
            Self::Nr => "nr",
            Self::Dc => "dc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Label used in the records.
    pub name: String,
    /// MATPOWER file, relative to the suite file.
    pub path: PathBuf,
    /// Number of copies for node scaling (1 adds the random links to the
    /// grid itself); omitted means the grid as is.
    #[serde(default)]
    pub node_scale: Option<usize>,
    /// Extra random branches; omitted means none.
    #[serde(default)]
    pub edge_scale: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub grids: Vec<GridSpec>,
    pub solvers: Vec<SolverKind>,
    #[serde(default = "default_batch_sizes")]
    pub batch_sizes: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    /// DPF hyperparameter preset.
    #[serde(default = "default_preset")]
    pub preset: String,
    /// Overrides the preset's iteration budget.
    #[serde(default)]
    pub max_iter: Option<usize>,
}

fn default_batch_sizes() -> Vec<usize> {
    vec![1]
}

fn default_repeats() -> usize {
    3
}

fn default_preset() -> String {
    "dpf-118".into()
}

impl Suite {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let suite: Suite = serde_json::from_str(text).map_err(|e| BenchError::InvalidSuite(e.to_string()))?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |m: &str| Err(BenchError::InvalidSuite(m.into()));
        if self.grids.is_empty() || self.solvers.is_empty() || self.batch_sizes.is_empty() {
            return fail("grids, solvers and batch_sizes must be non-empty");
        }
        if self.repeats == 0 {
            return fail("repeats must be at least 1");
        }
        if self.batch_sizes.contains(&0) {
            return fail("batch sizes must be at least 1");
        }
        if self.grids.iter().any(|g| g.node_scale == Some(0)) {
            return fail("node_scale must be at least 1");
        }
        if self.max_iter == Some(0) {
            return fail("max_iter must be at least 1");
        }
        self.dpf_config()?;
        Ok(())
    }

    pub fn dpf_config(&self) -> Result<DpfConfig, BenchError> {
        let mut cfg = preset(&self.preset).map_err(|e| BenchError::InvalidSuite(e.to_string()))?;
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        Ok(cfg)
    }
}

/// One timed run of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub grid_name: String,
    pub n_buses: usize,
    pub nnz: usize,
    pub solver: String,
    pub batch_size: usize,
    pub iterations: usize,
    pub wall_time_ms: f64,
    pub time_per_iter_ms: f64,
    pub final_loss: f64,
    pub max_mismatch: f64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "label,grid,n_buses,nnz,solver,batch,iterations,wall_ms,per_iter_ms,final_loss,max_mismatch,seed";

impl RunRecord {
    fn fields(&self) -> [String; 12] {
        [
            self.label.clone(),
            self.grid_name.clone(),
            self.n_buses.to_string(),
            self.nnz.to_string(),
            self.solver.clone(),
            self.batch_size.to_string(),
            self.iterations.to_string(),
            format!("{:.6}", self.wall_time_ms),
            format!("{:.6}", self.time_per_iter_ms),
            format!("{:e}", self.final_loss),
            format!("{:e}", self.max_mismatch),
            self.seed.to_string(),
        ]
    }

    pub fn csv_row(&self) -> String {
        self.fields()
            .iter()
            .map(|f| {
                if f.contains([',', '"', '\n']) {
                    format!("\"{}\"", f.replace('"', "\"\""))
                } else {
                    f.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Whitespace-delimited row; spaces inside fields become underscores.
    pub fn plain_row(&self) -> String {
        self.fields()
            .iter()
            .map(|f| f.replace(char::is_whitespace, "_"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in records {
        writeln!(out, "{}", r.csv_row()).expect("writing to a String cannot fail");
    }
    out
}

/// Header line of the whitespace-delimited format, commented for gnuplot.
pub fn plain_header() -> String {
    format!("# {}", CSV_HEADER.replace(',', " "))
}

pub fn records_plain(records: &[RunRecord]) -> String {
    let mut out = format!("{}\n", plain_header());
    for r in records {
        writeln!(out, "{}", r.plain_row()).expect("writing to a String cannot fail");
    }
    out
}

/// Loads and scales one grid of the suite. Paths are resolved against
/// `base_dir`.
pub fn load_grid(spec: &GridSpec, base_dir: &Path, seed: u64) -> Result<GridCase, String> {
    let path = base_dir.join(&spec.path);
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut case = parse_matpower(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(k) = spec.node_scale {
        case = node_scale(&case, k, seed).map_err(|e| e.to_string())?;
    }
    if let Some(extra) = spec.edge_scale {
        case = edge_scale(&case, extra, seed).map_err(|e| e.to_string())?;
    }
    Ok(case)
}

/// Runs every cell of `suite` sequentially, handing each record to `sink`
/// as soon as it exists. Failing cells produce a single record whose label
/// starts with `failed:` and the suite carries on.
pub fn run_benchmark(suite: &Suite, base_dir: &Path, mut sink: impl FnMut(&RunRecord)) -> Result<Vec<RunRecord>, BenchError> {
    suite.validate()?;
    let dpf_config = suite.dpf_config()?;
    let mut records = Vec::new();
    let mut emit = |r: RunRecord, records: &mut Vec<RunRecord>| {
        sink(&r);
        records.push(r);
    };
    for spec in &suite.grids {
        let problem = load_grid(spec, base_dir, suite.seed)
            .and_then(|case| build_problem(&case).map_err(|e| e.to_string()));
        for &solver in &suite.solvers {
            for &batch in &suite.batch_sizes {
                let cell = format!("{}/{}/b{}", spec.name, solver.name(), batch);
                let problem = match &problem {
                    Ok(p) => p,
                    Err(e) => {
                        emit(failed_record(&cell, spec, solver, batch, suite.seed, e), &mut records);
                        continue;
                    }
                };
                let run = || run_cell(problem, solver, batch, &dpf_config);
                if let Err(e) = run() {
                    let mut r = failed_record(&cell, spec, solver, batch, suite.seed, &e);
                    r.n_buses = problem.n_buses();
                    r.nnz = problem.y_bus.nnz();
                    emit(r, &mut records);
                    continue;
                }
                for rep in 0..suite.repeats {
                    let r = match run() {
                        Ok(outcome) => RunRecord {
                            label: format!("{cell}/r{rep}"),
                            grid_name: spec.name.clone(),
                            n_buses: problem.n_buses(),
                            nnz: problem.y_bus.nnz(),
                            solver: solver.name().into(),
                            batch_size: batch,
                            iterations: outcome.iterations,
                            wall_time_ms: ms(outcome.wall),
                            time_per_iter_ms: if outcome.iterations > 0 {
                                ms(outcome.wall) / outcome.iterations as f64
                            } else {
                                ms(outcome.wall)
                            },
                            final_loss: outcome.final_loss,
                            max_mismatch: outcome.max_mismatch,
                            seed: suite.seed,
                        },
                        Err(e) => failed_record(&cell, spec, solver, batch, suite.seed, &e),
                    };
                    emit(r, &mut records);
                }
            }
        }
    }
    Ok(records)
}

struct CellOutcome {
    iterations: usize,
    wall: Duration,
    final_loss: f64,
    max_mismatch: f64,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// DPF solves a batch as one block-diagonal system; NR and DC, which have no
/// batched form, solve the copies one after another. Iterations are those of
/// the longest case; quality figures are the worst case.
fn run_cell(problem: &PowerFlowProblem, solver: SolverKind, batch: usize, dpf: &DpfConfig) -> Result<CellOutcome, String> {
    let started = Instant::now();
    let solutions: Vec<Solution> = match solver {
        SolverKind::Dpf if batch == 1 => vec![solve_dpf(problem, dpf, None).map_err(|e| e.to_string())?],
        SolverKind::Dpf => {
            let copies: Vec<&PowerFlowProblem> = vec![problem; batch];
            let stacked = make_batch(&copies).map_err(|e| e.to_string())?;
            solve_batch(&stacked, dpf, None).map_err(|e| e.to_string())?
        }
        SolverKind::Nr => (0..batch)
            .map(|_| solve_nr(problem, NR_DEFAULT_TOL, NR_DEFAULT_MAX_ITER).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?,
        SolverKind::Dc => {
            let mut out = Vec::with_capacity(batch);
            for _ in 0..batch {
                let state = solve_dc(problem).map_err(|e| e.to_string())?;
                out.push(Solution {
                    state,
                    converged: true,
                    iterations: 1,
                    final_loss: f64::NAN,
                    max_mismatch: f64::NAN,
                    loss_history: Vec::new(),
                    mismatch_history: Vec::new(),
                    wall_time: Duration::ZERO,
                });
            }
            out
        }
    };
    let wall = started.elapsed();
    let mut outcome = CellOutcome {
        iterations: 0,
        wall,
        final_loss: 0.0,
        max_mismatch: 0.0,
    };
    for s in &solutions {
        let (loss, worst) = if solver == SolverKind::Dc {
            let m = mismatch(&s.state, &problem.view()).map_err(|e| e.to_string())?;
            (crate::pf::loss(&m), m.max_abs())
        } else {
            (s.final_loss, s.max_mismatch)
        };
        outcome.iterations = outcome.iterations.max(s.iterations);
        outcome.final_loss = outcome.final_loss.max(loss);
        outcome.max_mismatch = outcome.max_mismatch.max(worst);
    }
    Ok(outcome)
}

fn failed_record(cell: &str, spec: &GridSpec, solver: SolverKind, batch: usize, seed: u64, reason: &str) -> RunRecord {
    RunRecord {
        label: format!("failed:{cell}:{reason}"),
        grid_name: spec.name.clone(),
        n_buses: 0,
        nnz: 0,
        solver: solver.name().into(),
        batch_size: batch,
        iterations: 0,
        wall_time_ms: f64::NAN,
        time_per_iter_ms: f64::NAN,
        final_loss: f64::NAN,
        max_mismatch: f64::NAN,
        seed,
    }
}
