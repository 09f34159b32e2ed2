use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use cligme::gme_model::TOL_PSD;
use cligme::harness::{
    best_mu, cell_means, run_declip_experiment, run_poisson_experiment, write_csv, CellMean, Model,
    Scenario, ScenarioConfig,
};
use cligme::problem_file::ProblemSpec;
use cligme::solver::{default_params, solve, write_trace, SolveOptions, SolverState};
use cligme::{Error, Result};

#[derive(Parser)]
#[command(name = "cligme", version, about = "GME-regularized estimation with smooth convex fidelities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem described in a text file.
    Solve {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Piecewise-constant signal from Poisson counts.
    Poisson(RunArgs),
    /// Sparse DCT signal from clipped noisy samples.
    Declip(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    theta: Option<f64>,
    /// Comma-separated list.
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_config(args: &RunArgs, scenario: Scenario) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(p) => ScenarioConfig::parse(&fs::read_to_string(p)?, scenario)?,
        None => ScenarioConfig::default_for(scenario),
    };
    if cfg.scenario != scenario {
        return Err(Error::Input("config file is for a different scenario".into()));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.theta {
        cfg.theta = t;
    }
    if let Some(m) = &args.mu {
        cfg.set("mu", m)?;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(t) = args.tol {
        cfg.tol = t;
    }
    if let Some(m) = args.max_iter {
        cfg.max_iter = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(means: &[CellMean], scenario: Scenario) {
    let label = |m: &CellMean| match scenario {
        Scenario::Poisson => format!(
            "mu={} ae={:.4} se={:.4} tv_nonzero={:.2}",
            m.mu, m.ae, m.se, m.tv_nonzero
        ),
        Scenario::Declip => format!("mu={} mse={:.6}", m.mu, m.mse),
    };
    let cells: Vec<Option<(f64, f64)>> = match scenario {
        Scenario::Poisson => vec![None],
        Scenario::Declip => {
            let mut c: Vec<(f64, f64)> = means.iter().map(|m| (m.clip_level, m.snr_db)).collect();
            c.dedup();
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            c.dedup();
            c.into_iter().map(Some).collect()
        }
    };
    let metric: fn(&CellMean) -> f64 = match scenario {
        Scenario::Poisson => |m| m.se,
        Scenario::Declip => |m| m.mse,
    };
    for cell in cells {
        for model in [Model::Convex, Model::Proposed] {
            let prefix = match cell {
                Some((c, s)) => format!("clip={c} snr={s}dB {}", model.name()),
                None => model.name().to_string(),
            };
            match best_mu(means, model, cell, metric) {
                Some(m) => eprintln!("{prefix}: best {}", label(m)),
                None => eprintln!("{prefix}: no successful cell"),
            }
        }
    }
}

fn run_scenario(args: &RunArgs, scenario: Scenario) -> Result<()> {
    let cfg = load_config(args, scenario)?;
    info!("running {} trials over {} values of mu", cfg.trials, cfg.mu.len());
    let rows = match scenario {
        Scenario::Poisson => run_poisson_experiment(&cfg)?,
        Scenario::Declip => run_declip_experiment(&cfg)?,
    };
    let mut out = output(args.out.as_deref())?;
    write_csv(scenario, &rows, &mut out)?;
    out.flush()?;
    report(&cell_means(&rows), scenario);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_solve(
    path: &Path,
    out: Option<&Path>,
    trace: Option<&Path>,
    theta: Option<f64>,
    mu: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
) -> Result<()> {
    let mut spec = ProblemSpec::parse(&fs::read_to_string(path)?)?;
    if let Some(t) = theta {
        spec.theta = t;
    }
    if let Some(m) = mu {
        spec.mu = m;
    }
    let mut problem = spec.build()?;
    let (conv, exist) = problem.certify(TOL_PSD)?;
    info!("convexity min eig {:e}, existence {:?}", conv.min_eig, exist);
    if !conv.holds {
        return Err(Error::Designer(format!("convexity certificate failed (min eig {:e})", conv.min_eig)));
    }
    let mut params = default_params(&problem)?;
    if let Some(t) = tol {
        params = params.with_tol(t);
    }
    if let Some(m) = max_iter {
        params = params.with_max_iter(m);
    }
    let opts = SolveOptions { record_trace: trace.is_some(), ..SolveOptions::default() };
    let res = solve(&problem, &params, SolverState::initial(&problem), opts)?;
    eprintln!(
        "converged={} iterations={} residual={:e}",
        res.converged, res.iterations, res.residual_h
    );
    if let Some(t) = trace {
        write_trace(&res.trace, BufWriter::new(File::create(t)?))?;
    }
    let mut w = output(out)?;
    for v in res.x.iter() {
        writeln!(w, "{v:?}")?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { problem, out, trace, theta, mu, tol, max_iter } => run_solve(
            problem,
            out.as_deref(),
            trace.as_deref(),
            *theta,
            *mu,
            *tol,
            *max_iter,
        ),
        Command::Poisson(args) => run_scenario(args, Scenario::Poisson),
        Command::Declip(args) => run_scenario(args, Scenario::Declip),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
