use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vortex_rings::cli::{run, ExperimentConfig, Pipeline, SweepGrid};
use vortex_rings::error::Error;

#[derive(Parser)]
#[command(name = "vortex-rings", about = "Giant vortex and vortex-ring experiments in a rotating flat trap")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Thomas-Fermi profile and annulus radii.
    Tf(Common),
    /// Optimal winding and radial profile.
    GiantVortex(Common),
    /// Vortex cost function and ring radius.
    Cost(Common),
    /// Ring electrostatic energy and vortex number.
    Electro(Common),
    /// Vortex-ring trial state and its energy terms.
    Trial(Common),
    /// 2D minimization, vortex detection and comparisons.
    Gp2d(Common),
    /// Full chain with a single JSON verdict.
    VerifyAll(Common),
    /// Verdict table over every (epsilon, omega1) pair given.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repeat for sweeps.
    #[arg(long)]
    epsilon: Vec<f64>,
    /// Repeat for sweeps.
    #[arg(long, allow_hyphen_values = true)]
    omega1: Vec<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    grid_r: Option<usize>,
    #[arg(long)]
    grid_theta: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Pipeline run at each sweep point.
    #[arg(long, value_parser = ["electro", "trial", "gp2d", "verify-all"])]
    point: Option<String>,
}

fn point_pipeline(name: &str) -> Pipeline {
    match name {
        "trial" => Pipeline::Trial,
        "gp2d" => Pipeline::Gp2d,
        "verify-all" => Pipeline::VerifyAll,
        _ => Pipeline::Electro,
    }
}

fn configure(pipeline: Pipeline, a: Common) -> Result<ExperimentConfig, Error> {
    let mut c = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    c.pipeline = pipeline;
    if pipeline == Pipeline::Sweep {
        let base = c.sweep.clone();
        let epsilon = if a.epsilon.is_empty() { base.as_ref().map(|g| g.epsilon.clone()).unwrap_or_default() } else { a.epsilon.clone() };
        let omega1 = if a.omega1.is_empty() { base.as_ref().map(|g| g.omega1.clone()).unwrap_or_else(|| c.omega1.into_iter().collect()) } else { a.omega1.clone() };
        let point = a.point.as_deref().map(point_pipeline).or(base.map(|g| g.point)).unwrap_or(Pipeline::Electro);
        c.epsilon = epsilon.first().copied().unwrap_or(c.epsilon);
        c.omega1 = omega1.first().copied().or(c.omega1);
        c.omega = None;
        c.sweep = Some(SweepGrid { epsilon, omega1, point });
    } else {
        if a.epsilon.len() > 1 || a.omega1.len() > 1 {
            return Err(Error::Usage("repeated --epsilon or --omega1 only make sense for sweep".into()));
        }
        if let Some(e) = a.epsilon.first() {
            c.epsilon = *e;
        }
        if let Some(o) = a.omega1.first() {
            c.omega1 = Some(*o);
            c.omega = None;
        }
        if let Some(o) = a.omega {
            c.omega = Some(o);
            if a.omega1.is_empty() {
                c.omega1 = None;
            }
        }
    }
    c.grid_r = a.grid_r.unwrap_or(c.grid_r);
    c.grid_theta = a.grid_theta.unwrap_or(c.grid_theta);
    c.seed = a.seed.unwrap_or(c.seed);
    c.workers = a.workers.unwrap_or(c.workers);
    if let Some(o) = a.out {
        c.out = o;
    }
    c.validate()?;
    Ok(c)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (pipeline, args) = match cli.command {
        Command::Tf(a) => (Pipeline::Tf, a),
        Command::GiantVortex(a) => (Pipeline::GiantVortex, a),
        Command::Cost(a) => (Pipeline::Cost, a),
        Command::Electro(a) => (Pipeline::Electro, a),
        Command::Trial(a) => (Pipeline::Trial, a),
        Command::Gp2d(a) => (Pipeline::Gp2d, a),
        Command::VerifyAll(a) => (Pipeline::VerifyAll, a),
        Command::Sweep(a) => (Pipeline::Sweep, a),
    };
    let cfg = match configure(pipeline, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(v) => {
            for c in &v.checks {
                let tag = match c.passed {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None => "----",
                };
                println!("{tag} {:<40} {:>14.6e} (bound {:.3e})", c.name, c.value, c.bound);
            }
            for n in &v.notes {
                println!("note: {n}");
            }
            println!("wrote {}", cfg.out.display());
            if v.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ Error::Usage(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{pipeline}: {e}", pipeline = cfg.pipeline.name());
            ExitCode::from(1)
        }
    }
}
