//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage/configuration errors, 2 detected
//! inconsistencies (a contradicted dichotomy verdict or a failed self-check),
//! 3 runtime failures (I/O, solver).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kgz::config::{self, load_config, RunConfig};
use kgz::grid::make_grid;
use kgz::ground_state;
use kgz::runner::{self, SweepAxis};
use kgz::verify;
use kgz::Error;

#[derive(Parser)]
#[command(
    name = "kgz",
    about = "Numerical laboratory for the radial Klein-Gordon-Zakharov system: \
             ground state and threshold, dichotomy runs, sweeps, diagnostics exports",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute, certify, and print the ground state Q and threshold J(Q).
    Groundstate {
        /// Domain radius R.
        #[arg(long, default_value_t = 30.0)]
        r_max: f64,
        /// Grid intervals N (power of two).
        #[arg(long, default_value_t = 4096)]
        n: usize,
        /// Bisection tolerance on the shooting amplitude.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Cache directory (defaults to $KGZ_CACHE_DIR; no caching when unset).
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Execute one configured run and write its artifacts.
    Run {
        /// TOML configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run one configuration across an axis of values (in parallel).
    Sweep {
        /// TOML configuration file (the base run).
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated λ values (rescaled ground-state initial data).
        #[arg(long, conflicts_with = "alphas")]
        lambdas: Option<String>,
        /// Comma-separated α values.
        #[arg(long)]
        alphas: Option<String>,
        /// Worker threads (default: all cores); each run stays single-threaded.
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the base output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Export per-panel plot files from a finished run directory.
    Plotdata {
        /// Run directory containing series.csv.
        #[arg(long)]
        run: PathBuf,
    },
    /// Run the self-check suites and print one line per check.
    Verify {
        /// Seed for the randomized checks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidGrid(_) | Error::UnknownSymbol(_) => 1,
        Error::Inconsistent(_) => 2,
        _ => 3,
    }
}

fn parse_list(label: &str, s: &str) -> Result<Vec<f64>, Error> {
    let mut out = Vec::new();
    for piece in s.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        let v: f64 = piece.parse().map_err(|e| {
            Error::InvalidConfig(format!("{label}: cannot parse {piece:?} as a number ({e})"))
        })?;
        out.push(v);
    }
    Ok(out)
}

fn load(config_path: &PathBuf, output: Option<PathBuf>) -> Result<RunConfig, Error> {
    let (mut cfg, warnings) = load_config(config_path).map_err(|e| match e {
        // an unreadable configuration file is a usage problem, not a runtime one
        Error::Io(io) => Error::InvalidConfig(format!("cannot read {}: {io}", config_path.display())),
        other => other,
    })?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if let Some(out) = output {
        cfg.output = out;
    }
    Ok(cfg)
}

fn cmd_groundstate(r_max: f64, n: usize, tol: f64, cache: Option<PathBuf>) -> Result<u8, Error> {
    let grid = make_grid(r_max, n)?;
    let cache = cache.or_else(|| std::env::var_os(config::CACHE_DIR_ENV).map(PathBuf::from));
    let gs = match cache {
        Some(dir) => ground_state::load_or_compute(&dir, &grid, tol)?,
        None => ground_state::find_ground_state(&grid, tol)?,
    };
    println!("r_max = {}", grid.r_max());
    println!("n = {}", grid.n());
    println!("Q0 = {}", gs.amplitude);
    println!("J_Q = {}", gs.j_q);
    println!("l2_sq = {}", gs.l2_sq);
    println!("grad_sq = {}", gs.grad_sq);
    println!("l4_quartic = {}", gs.l4_quartic);
    println!("pde_residual = {:e}", gs.pde_residual);
    println!("k0_defect = {:e}", gs.k0_defect);
    println!("k2_defect = {:e}", gs.k2_defect);
    Ok(0)
}

fn cmd_run(config_path: PathBuf, output: Option<PathBuf>) -> Result<u8, Error> {
    let cfg = load(&config_path, output)?;
    let out = runner::run(&cfg)?;
    for note in &out.notes {
        eprintln!("note: {note}");
    }
    let s = &out.summary;
    println!("termination: {} (t = {})", s.termination, s.termination_time);
    println!("E0 = {} ({}·J(Q), J(Q) = {})", s.e0, s.e0_over_jq, s.j_q);
    println!("K0(0) = {}  K2(0) = {}", s.k0_initial, s.k2_initial);
    println!(
        "predicted: {}  observed: {}  consistent: {}",
        runner::prediction_label(s.verdict.predicted),
        runner::behavior_label(s.verdict.observed),
        s.verdict.consistent
    );
    println!(
        "records: {}  steps: {}  peak H1: {}",
        s.records, s.steps_completed, s.peak_h1
    );
    if let Some(t) = s.blowup_crossing_time {
        println!(
            "blow-up crossing: t = {t} (dt/2: {}, confirmed: {})",
            s.blowup_crossing_time_half_dt.map_or("n/a".to_string(), |t| t.to_string()),
            s.blowup_confirmed.map_or("n/a".to_string(), |b| b.to_string()),
        );
    }
    if let Some(r) = s.final_scattering_residual {
        println!(
            "final scattering residual: {r} (converged: {})",
            s.scattering_converged.map_or("n/a".to_string(), |b| b.to_string()),
        );
    }
    println!("artifacts: {}", out.out_dir.display());
    println!("wall: {:.3} s", s.wall_seconds);
    Ok(if s.verdict.consistent { 0 } else { 2 })
}

fn cmd_sweep(
    config_path: PathBuf,
    lambdas: Option<String>,
    alphas: Option<String>,
    jobs: Option<usize>,
    output: Option<PathBuf>,
) -> Result<u8, Error> {
    let base = load(&config_path, output)?;
    let axis = match (lambdas, alphas) {
        (Some(l), None) => SweepAxis::Lambda(parse_list("--lambdas", &l)?),
        (None, Some(a)) => SweepAxis::Alpha(parse_list("--alphas", &a)?),
        (None, None) => {
            return Err(Error::InvalidConfig(
                "sweep needs an axis: pass --lambdas or --alphas".to_string(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects conflicting axis flags"),
    };
    let report = runner::sweep(&base, &axis, jobs)?;
    print!("{}", report.table());
    println!("aggregate: {}", base.output.join("sweep.csv").display());
    if report.any_failed() {
        eprintln!("error: at least one run failed; see the table above");
        return Ok(3);
    }
    if !report.all_consistent() {
        eprintln!("error: at least one run contradicted its predicted behavior");
        return Ok(2);
    }
    Ok(0)
}

fn cmd_plotdata(run_dir: PathBuf) -> Result<u8, Error> {
    let files = runner::emit_plot_data(&run_dir)?;
    for f in &files {
        println!("{}", run_dir.join("plot").join(f).display());
    }
    println!("{}", run_dir.join("plot/index.txt").display());
    Ok(0)
}

fn cmd_verify(seed: u64) -> Result<u8, Error> {
    let suites = verify::run_all(seed)?;
    let mut all_ok = true;
    for suite in &suites {
        for c in &suite.checks {
            println!(
                "[{}] {}: {} — {}",
                suite.name,
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            );
            all_ok &= c.passed;
        }
    }
    Ok(if all_ok { 0 } else { 2 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are successes; everything else is a usage error
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if benign { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    let result = match cli.cmd {
        Cmd::Groundstate { r_max, n, tol, cache } => cmd_groundstate(r_max, n, tol, cache),
        Cmd::Run { config, output } => cmd_run(config, output),
        Cmd::Sweep { config, lambdas, alphas, jobs, output } => {
            cmd_sweep(config, lambdas, alphas, jobs, output)
        }
        Cmd::Plotdata { run } => cmd_plotdata(run),
        Cmd::Verify { seed } => cmd_verify(seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
