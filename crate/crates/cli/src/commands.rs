use crate::{BatchArgs, BenchArgs, CompareArgs, ExportArgs, Format, Init, Method, Outcome, SeriesArgs, SolveArgs, SolverArgs};
use anyhow::{anyhow, bail, ensure, Context, Result};
use gridflux::bench::{plain_header, run_benchmark, RunRecord, Suite, CSV_HEADER};
use gridflux::grid::{build_problem, parse_matpower, write_problem_dump, PowerFlowProblem};
use gridflux::optim::{preset, PRESET_NAMES};
use gridflux::pf::{loss, mismatch, VoltageState};
use gridflux::series::{generate_series, solve_series};
use gridflux::solvers::{
    make_batch, solve_batch, solve_dc, solve_dpf, solve_nr, solve_nr_from, solution_csv, DpfConfig, RunMetadata,
    Solution, SolverError, NR_DEFAULT_MAX_ITER, NR_DEFAULT_TOL,
};
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Parsed case plus the file stem used to name outputs.
struct LoadedCase {
    problem: PowerFlowProblem,
    stem: String,
}

fn load_case(path: &Path) -> Result<LoadedCase> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let case = parse_matpower(&text).with_context(|| format!("cannot parse {}", path.display()))?;
    let problem = build_problem(&case).with_context(|| format!("invalid case {}", path.display()))?;
    let stem = path.file_stem().map_or_else(|| "case".into(), |s| s.to_string_lossy().into_owned());
    log::info!("{}: {} buses, nnz(Y_bus) = {}", stem, problem.n_buses(), problem.y_bus.nnz());
    Ok(LoadedCase { problem, stem })
}

fn named_preset(name: &str) -> Result<DpfConfig> {
    preset(name).map_err(|e| anyhow!("{e}; available: {}", PRESET_NAMES.join(", ")))
}

fn dpf_config(args: &SolverArgs) -> Result<DpfConfig> {
    let mut cfg = named_preset(&args.preset)?;
    if let Some(tol) = args.tol {
        cfg.mismatch_tol = tol;
    }
    if let Some(m) = args.max_iter {
        cfg.max_iter = m;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// A fully configured method, ready to run on a problem.
enum Runner {
    Dpf { config: DpfConfig, init: Init },
    Nr { tol: f64, max_iter: usize, init: Init },
    Dc,
}

impl Runner {
    fn new(method: Method, args: &SolverArgs) -> Result<Self> {
        Ok(match method {
            Method::Dpf => Self::Dpf {
                config: dpf_config(args)?,
                init: args.init.unwrap_or(Init::Flat),
            },
            Method::Nr => Self::Nr {
                tol: args.tol.unwrap_or(NR_DEFAULT_TOL),
                max_iter: args.max_iter.unwrap_or(NR_DEFAULT_MAX_ITER),
                init: args.init.unwrap_or(Init::Dc),
            },
            Method::Dc => Self::Dc,
        })
    }

    fn config_json(&self) -> serde_json::Value {
        match self {
            Self::Dpf { config, init } => json!({ "init": init_name(*init), "dpf": config }),
            Self::Nr { tol, max_iter, init } => json!({ "init": init_name(*init), "tol": tol, "max_iter": max_iter }),
            Self::Dc => json!({}),
        }
    }

    fn run(&self, problem: &PowerFlowProblem) -> Result<Solution, SolverError> {
        match self {
            Self::Dpf { config, init } => match init {
                Init::Flat => solve_dpf(problem, config, None),
                Init::Dc => solve_dpf(problem, config, Some(&solve_dc(problem)?)),
            },
            Self::Nr { tol, max_iter, init } => match init {
                Init::Dc => solve_nr(problem, *tol, *max_iter),
                Init::Flat => solve_nr_from(problem, &VoltageState::flat(&problem.view()), *tol, *max_iter),
            },
            Self::Dc => dc_solution(problem),
        }
    }
}

fn init_name(init: Init) -> &'static str {
    match init {
        Init::Flat => "flat",
        Init::Dc => "dc",
    }
}

/// DC solve reported like an iterative one, with its quality measured on
/// the AC equations.
fn dc_solution(problem: &PowerFlowProblem) -> Result<Solution, SolverError> {
    let started = Instant::now();
    let state = solve_dc(problem)?;
    let wall_time = started.elapsed();
    let m = mismatch(&state, &problem.view())?;
    Ok(Solution {
        state,
        converged: true,
        iterations: 1,
        final_loss: loss(&m),
        max_mismatch: m.max_abs(),
        loss_history: Vec::new(),
        mismatch_history: Vec::new(),
        wall_time,
    })
}

fn write_solution(dir: &Path, name: &str, problem: &PowerFlowProblem, meta: &RunMetadata, solution: &Solution) -> Result<()> {
    write_file(&dir.join(format!("{name}.csv")), &solution_csv(problem, solution)?)?;
    write_file(&dir.join(format!("{name}.json")), &serde_json::to_string_pretty(meta)?)
}

pub fn solve(args: &SolveArgs) -> Result<Outcome> {
    let runner = Runner::new(args.method, &args.solver)?;
    let loaded = load_case(&args.case)?;
    create_dir(&args.out)?;
    let solution = match runner.run(&loaded.problem) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", args.method.name());
            return Ok(Outcome::NotConverged);
        }
    };
    let meta = RunMetadata::new(args.method.name(), runner.config_json(), &solution);
    let name = format!("{}_{}", loaded.stem, args.method.name());
    write_solution(&args.out, &name, &loaded.problem, &meta, &solution)?;
    println!(
        "{}: converged={} iterations={} max_mismatch={:e} wall_ms={:.3}",
        args.method.name(),
        solution.converged,
        solution.iterations,
        solution.max_mismatch,
        meta.wall_time_ms
    );
    Ok(if solution.converged { Outcome::Success } else { Outcome::NotConverged })
}

pub fn compare(args: &CompareArgs) -> Result<Outcome> {
    ensure!(args.methods.len() >= 2, "compare needs at least two methods");
    let runners = args
        .methods
        .iter()
        .map(|&m| Runner::new(m, &args.solver).map(|r| (m, r)))
        .collect::<Result<Vec<_>>>()?;
    let loaded = load_case(&args.case)?;
    create_dir(&args.out)?;
    let mut table = String::from("method,status,converged,iterations,wall_ms,max_mismatch,final_loss\n");
    let mut any_converged = false;
    for (method, runner) in &runners {
        let row = match runner.run(&loaded.problem) {
            Ok(solution) => {
                let meta = RunMetadata::new(method.name(), runner.config_json(), &solution);
                write_solution(&args.out, &format!("{}_{}", loaded.stem, method.name()), &loaded.problem, &meta, &solution)?;
                any_converged |= solution.converged;
                format!(
                    "{},ok,{},{},{:.6},{:e},{:e}",
                    method.name(),
                    solution.converged,
                    solution.iterations,
                    meta.wall_time_ms,
                    solution.max_mismatch,
                    solution.final_loss
                )
            }
            Err(e) => format!("{},\"failed: {}\",false,0,NaN,NaN,NaN", method.name(), e.to_string().replace('"', "'")),
        };
        table.push_str(&row);
        table.push('\n');
    }
    write_file(&args.out.join(format!("{}_compare.csv", loaded.stem)), &table)?;
    print!("{table}");
    Ok(if any_converged { Outcome::Success } else { Outcome::NotConverged })
}

pub fn batch(args: &BatchArgs) -> Result<Outcome> {
    ensure!(args.copies >= 1, "--copies must be at least 1");
    let mut config = named_preset(&args.preset)?;
    if let Some(m) = args.max_iter {
        config.max_iter = m;
    }
    let loaded = load_case(&args.case)?;
    create_dir(&args.out)?;
    let copies = vec![&loaded.problem; args.copies];
    let batched = make_batch(&copies)?;
    let solutions = match solve_batch(&batched, &config, None) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("batch: {e}");
            return Ok(Outcome::NotConverged);
        }
    };
    let config_json = json!({ "copies": args.copies, "dpf": config });
    let mut metas = Vec::with_capacity(solutions.len());
    for (i, solution) in solutions.iter().enumerate() {
        let name = format!("{}_batch{i}", loaded.stem);
        write_file(&args.out.join(format!("{name}.csv")), &solution_csv(&loaded.problem, solution)?)?;
        metas.push(RunMetadata::new("dpf", config_json.clone(), solution));
    }
    write_file(&args.out.join(format!("{}_batch.json", loaded.stem)), &serde_json::to_string_pretty(&metas)?)?;
    let converged = solutions.iter().filter(|s| s.converged).count();
    println!("batch: {converged} of {} cases converged", solutions.len());
    Ok(if converged == solutions.len() { Outcome::Success } else { Outcome::NotConverged })
}

pub fn series(args: &SeriesArgs) -> Result<Outcome> {
    let first = named_preset(&args.preset_first)?;
    let warm = named_preset(&args.preset_warm)?;
    let loaded = load_case(&args.case)?;
    let series = generate_series(&loaded.problem, args.steps, args.amplitude, args.seed)?;
    create_dir(&args.out)?;
    let solutions = match solve_series(&series, &first, &warm) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("series: {e}");
            return Ok(Outcome::NotConverged);
        }
    };
    let mut table = String::from("step,seed,converged,iterations,final_loss,max_mismatch,wall_ms\n");
    for (t, s) in solutions.iter().enumerate() {
        table.push_str(&format!(
            "{t},{},{},{},{:e},{:e},{:.6}\n",
            args.seed,
            s.converged,
            s.iterations,
            s.final_loss,
            s.max_mismatch,
            s.wall_time.as_secs_f64() * 1e3
        ));
    }
    write_file(&args.out.join(format!("{}_series.csv", loaded.stem)), &table)?;
    let converged = solutions.iter().filter(|s| s.converged).count();
    println!("series: {converged} of {} steps converged", solutions.len());
    Ok(if converged == solutions.len() { Outcome::Success } else { Outcome::NotConverged })
}

pub fn bench(args: &BenchArgs) -> Result<Outcome> {
    let text = fs::read_to_string(&args.suite).with_context(|| format!("cannot read {}", args.suite.display()))?;
    let suite = Suite::from_json(&text)?;
    let base_dir = args.suite.parent().map_or_else(PathBuf::new, Path::to_path_buf);
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let row = |r: &RunRecord| match args.format {
        Format::Csv => r.csv_row(),
        Format::Plain => r.plain_row(),
    };
    match args.format {
        Format::Csv => writeln!(out, "{CSV_HEADER}")?,
        Format::Plain => writeln!(out, "{}", plain_header())?,
    }
    // Records are written as they arrive so a long suite leaves partial
    // results behind if interrupted.
    let mut write_error = None;
    let records = run_benchmark(&suite, &base_dir, |r| {
        if write_error.is_none() {
            if let Err(e) = writeln!(out, "{}", row(r)).and_then(|_| out.flush()) {
                write_error = Some(e);
            }
        }
    })?;
    if let Some(e) = write_error {
        bail!("cannot write records: {e}");
    }
    let failed = records.iter().filter(|r| r.label.starts_with("failed:")).count();
    if failed > 0 {
        log::warn!("{failed} of {} records are failed cells", records.len());
    }
    Ok(Outcome::Success)
}

pub fn export_problem(args: &ExportArgs) -> Result<Outcome> {
    let loaded = load_case(&args.case)?;
    let dump = write_problem_dump(&loaded.problem);
    match &args.out {
        Some(path) => write_file(path, &dump)?,
        None => print!("{dump}"),
    }
    Ok(Outcome::Success)
}
