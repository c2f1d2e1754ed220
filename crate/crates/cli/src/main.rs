use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use helmddm::{HelmError, Result};
use helmddm_cli::config::{RunConfig, SolverMode};
use helmddm_cli::dump::read_dump;
use helmddm_cli::render::render_ppm;
use helmddm_cli::run::{convergence, run, RunOutcome};
use helmddm_cli::{exit_code, EXIT_NOT_CONVERGED};

#[derive(Parser)]
#[command(name = "helmddm", version, about = "Additive overlapping DDM solver for 2D Helmholtz problems with PML")]
struct Cli {
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file with `key = value` lines.
    config: PathBuf,
    /// Replace a configuration value, `key=value`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve with the configured `solver.mode`.
    Solve(RunArgs),
    /// Solve with the global sparse direct solver.
    Direct(RunArgs),
    /// Errors against the free-space solution on three dyadic meshes.
    Convergence(RunArgs),
    /// Render the real part of a field dump as a PPM image.
    Render {
        dump: PathBuf,
        out: PathBuf,
        /// Colour scale; defaults to max |Re u|.
        #[arg(long)]
        vmax: Option<f64>,
    },
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(&args.config, &args.overrides)?;
    if let Ok(t) = std::env::var("HELMDDM_THREADS") {
        let n: usize = t
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| HelmError::Config(format!("HELMDDM_THREADS=`{t}` is not a positive integer")))?;
        cfg.threads = Some(n);
    }
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HelmError::Config(format!("thread pool: {e}")))?;
    }
    Ok(cfg)
}

fn summary(out: &RunOutcome) {
    let s = &out.stats;
    println!(
        "converged={} relres={:.3e} n_DDM_Iter={} n_GMRES_Iter={} n_Local_Solv={} time={:.1}s",
        s.converged,
        s.final_relres,
        s.n_ddm_iter,
        s.n_gmres_iter,
        s.n_local_solv,
        (s.setup_ms + s.solve_ms) / 1e3
    );
    for a in &out.artifacts {
        println!("wrote {}", a.display());
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let outcome = match &cli.command {
        Command::Render { dump, out, vmax } => {
            render_ppm(&read_dump(dump)?, out, *vmax)?;
            return Ok(0);
        }
        Command::Solve(a) => {
            let cfg = load(a)?;
            run(&cfg, cfg.mode)?
        }
        Command::Direct(a) => run(&load(a)?, SolverMode::Direct)?,
        Command::Convergence(a) => {
            let cfg = load(a)?;
            let (reports, out) = convergence(&cfg, 3)?;
            if !cli.quiet {
                println!("h,l2_error,l2_rate,h1_error,h1_rate");
                for r in &reports {
                    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
                    println!("{:.3e},{:.3e},{},{:.3e},{}", r.h, r.l2_error, f(r.l2_rate), r.h1_error, f(r.h1_rate));
                }
            }
            out
        }
    };
    if !cli.quiet {
        summary(&outcome);
    }
    Ok(if outcome.converged() { 0 } else { EXIT_NOT_CONVERGED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("helmddm: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
