//! `cojam` command line: single solves, Monte Carlo sweeps and the grid oracle.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 infeasible instance.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cojam::config::Config;
use cojam::experiments::{run_sweep, solve_report, summarize, write_csv, Axis, SolverKind, SweepSpec};
use cojam::model::{db_to_linear, linear_to_db, ChannelSet, Precoder, SystemParams};
use cojam::oracle::{grid_oracle, MIN_GRID};
use cojam::report::SolveReport;
use cojam::Error;

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "cojam", version, about = "Power allocation and cooperative jamming design")]
struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel draw and print the design report.
    Solve {
        config: PathBuf,
        /// optimal, alternating, fixed-split, no-jam or b-zero.
        #[arg(long, default_value = "optimal")]
        solver: String,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo sweep over one parameter, written as CSV.
    Sweep {
        config: PathBuf,
        /// z, l, p_tot, tau or b_gain_db.
        #[arg(long)]
        axis: String,
        /// Comma-separated list, or start:stop:step.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Comma-separated solver names.
        #[arg(long, default_value = "optimal,fixed_split")]
        solvers: String,
        /// Overrides `trials` in the config file.
        #[arg(long)]
        trials: Option<usize>,
        /// Use 1000 trials per point.
        #[arg(long, conflicts_with = "trials")]
        full: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Brute-force grid search on a tiny instance, compared with the solver.
    Oracle {
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        z: usize,
        #[arg(long, default_value_t = 2)]
        l: usize,
        /// Grid points per real dimension.
        #[arg(long, default_value_t = MIN_GRID)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// BS antennas (default K + 1).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        p_tot_dbm: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        tau_db: f64,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        sigma2_dbm: f64,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Infeasible(_) | Error::SingularDelta => ExitCode::from(EXIT_INFEASIBLE),
        _ => ExitCode::from(EXIT_ERROR),
    }
}

fn parse_values(s: &str) -> Result<Vec<f64>, Error> {
    let bad = |why: &str| Error::InvalidParams(format!("--values '{s}': {why}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("not a number"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("ranges are start:stop:step"));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(bad("step must be positive and stop >= start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    s.split(',').map(num).collect()
}

fn fmt_list(v: &[f64], prec: usize) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.prec$}")).collect();
    format!("[{}]", items.join(", "))
}

fn print_report(r: &SolveReport) {
    println!("solver          {}", r.solver);
    println!("status          {}", r.status);
    println!("p (mW)          {}", fmt_list(&r.p_mw, 6));
    println!("sum p (mW)      {:.6}", r.p_total_mw);
    println!("tr(Sigma) (mW)  {:.6}", r.trace_sigma_mw);
    println!("eta (dB)        {:.4}", r.eta_db);
    println!("SINR^U (dB)     {}", fmt_list(&r.sinr_eve_upper_db, 4));
    println!("secrecy LB (b)  {}", fmt_list(&r.secrecy_lb_bits, 4));
    println!("iterations      {}", r.iterations);
    for n in &r.notes {
        println!("note            {n}");
    }
    println!("invariants");
    for c in &r.invariants {
        println!("  {} {:<16} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn cmd_solve(config: PathBuf, solver: &str, seed: Option<u64>, json: bool) -> ExitCode {
    let run = || -> Result<SolveReport, Error> {
        let cfg = Config::from_path(&config)?;
        let kind: SolverKind = solver.parse()?;
        if kind == SolverKind::LInfLimit {
            return Err(Error::InvalidParams("solve supports optimal, alternating, fixed-split, no-jam and b-zero".into()));
        }
        let params = cfg.params()?;
        let seed = seed.unwrap_or(cfg.seed);
        let ch = ChannelSet::generate_rayleigh(&params, cfg.b_gain_db, seed);
        let ch_design = if cfg.xi2() > 0.0 { ch.perturb_csi(cfg.xi2(), seed)? } else { ch.clone() };
        let pre = Precoder::channel_inversion(&ch, params.tau)?;
        solve_report(kind, &pre, &ch, &ch_design, &params)
    };
    match run() {
        Ok(r) => {
            if json {
                let text = serde_json::to_string_pretty(&r).expect("report serializes");
                let _ = writeln!(std::io::stdout(), "{text}");
            } else {
                print_report(&r);
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    config: PathBuf,
    axis: &str,
    values: &str,
    solvers: &str,
    trials: Option<usize>,
    full: bool,
    seed: Option<u64>,
    out: PathBuf,
) -> ExitCode {
    let run = || -> Result<(), Error> {
        let cfg = Config::from_path(&config)?;
        let axis: Axis = axis.parse()?;
        let solvers = solvers.split(',').map(|s| s.trim().parse()).collect::<Result<Vec<SolverKind>, _>>()?;
        let trials = if full { 1000 } else { trials.unwrap_or(cfg.trials) };
        let spec = SweepSpec {
            axis,
            axis_values: parse_values(values)?,
            trials,
            solvers,
            seed: seed.unwrap_or(cfg.seed),
            base: cfg,
        };
        let rows = run_sweep(&spec)?;
        write_csv(&rows, &out)?;
        println!("{:>12} {:<12} {:>9} {:>12} {:>14}", axis.name(), "solver", "feasible", "mean eta dB", "mean min LB");
        for p in summarize(&rows) {
            println!(
                "{:>12} {:<12} {:>4}/{:<4} {:>12.4} {:>14.4}",
                p.axis_value, p.solver, p.feasible, p.trials, p.mean_eta_db, p.mean_min_secrecy_lb
            );
        }
        println!("wrote {} rows to {}", rows.len(), out.display());
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_oracle(k: usize, z: usize, l: usize, grid: usize, seed: u64, n: Option<usize>, p_tot_dbm: f64, tau_db: f64, sigma2_dbm: f64) -> ExitCode {
    if k > 2 || z != 1 || l > 4 {
        eprintln!("error: the oracle is limited to K <= 2, Z = 1, L <= 4");
        return ExitCode::from(EXIT_ERROR);
    }
    let run = || -> Result<(), Error> {
        let params = SystemParams::new(n.unwrap_or(k + 1), k, l, z, db_to_linear(sigma2_dbm), db_to_linear(tau_db), db_to_linear(p_tot_dbm))?;
        let ch = ChannelSet::generate_rayleigh(&params, 0.0, seed);
        let pre = Precoder::channel_inversion(&ch, params.tau)?;
        let kind = if params.zero_forcing_possible() { SolverKind::Optimal } else { SolverKind::Alternating };
        let solver = solve_report(kind, &pre, &ch, &ch, &params)?;
        let oracle = grid_oracle(&pre, &ch, &params, grid)?;
        let gap = (solver.eta - oracle.eta) / oracle.eta;
        println!("grid            {grid} points per dimension ({} evaluations)", oracle.evaluations);
        println!("oracle eta      {:.9e} ({:.4} dB)", oracle.eta, linear_to_db(oracle.eta));
        println!("{:<15} {:.9e} ({:.4} dB)", format!("{} eta", kind.name()), solver.eta, solver.eta_db);
        println!("relative gap    {gap:.3e}");
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    match cli.command {
        Command::Solve { config, solver, seed, json } => cmd_solve(config, &solver, seed, json),
        Command::Sweep { config, axis, values, solvers, trials, full, seed, out } => {
            cmd_sweep(config, &axis, &values, &solvers, trials, full, seed, out)
        }
        Command::Oracle { k, z, l, grid, seed, n, p_tot_dbm, tau_db, sigma2_dbm } => {
            cmd_oracle(k, z, l, grid, seed, n, p_tot_dbm, tau_db, sigma2_dbm)
        }
    }
}
