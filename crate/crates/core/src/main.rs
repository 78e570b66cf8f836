//! Command-line experiment runner: parse a TOML experiment config, apply
//! flag overrides, dispatch to the named pipeline, and print its summary.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
//! failures.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use tubeflow::config::ExperimentConfig;
use tubeflow::pipeline::{run_experiment, RunSummary};
use tubeflow::{Result, TubeError};

#[derive(Parser)]
#[command(
    name = "tubeflow",
    version,
    about = "Geodesic flows on tubular surfaces: frames, induced metrics, \
             flows, sections, and meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment description (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the sampling grid (n_s n_psi).
    #[arg(long, num_args = 2, value_names = ["N", "M"])]
    grid: Option<Vec<usize>>,
    /// Override the flow and section integration tolerance.
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
    /// Append the stock section seed grid (psi0 = 0, p_psi0 = -0.9 .. 0.9).
    #[arg(long)]
    seed_grid: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve covariant frames and curvature scalars along a curve.
    Frenet(CommonArgs),
    /// Evaluate an induced tube metric and export the coefficient grid.
    TubeMetric(CommonArgs),
    /// Integrate geodesics of the induced metric and report drifts.
    Geodesic(CommonArgs),
    /// Record Poincare sections and score per-orbit regularity.
    Poincare(CommonArgs),
    /// Sample a tube surface and write an OBJ mesh.
    Mesh(CommonArgs),
    /// Certify that curvature data is constant along the curve.
    Certify(CommonArgs),
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::Frenet(_) => "frenet",
            Command::TubeMetric(_) => "tube-metric",
            Command::Geodesic(_) => "geodesic",
            Command::Poincare(_) => "poincare",
            Command::Mesh(_) => "mesh",
            Command::Certify(_) => "certify-s-independence",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Frenet(a)
            | Command::TubeMetric(a)
            | Command::Geodesic(a)
            | Command::Poincare(a)
            | Command::Mesh(a)
            | Command::Certify(a) => a,
        }
    }
}

fn execute(kind: &'static str, args: &CommonArgs) -> Result<RunSummary> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if cfg.canonical_kind()? != kind {
        return Err(TubeError::Config(format!(
            "kind: config file says \"{}\" but the subcommand is \"{kind}\"",
            cfg.kind
        )));
    }
    if let Some(out) = &args.out {
        cfg.output.get_or_insert_with(Default::default).dir = Some(out.display().to_string());
    }
    if let Some(grid) = &args.grid {
        let g = cfg.grid.get_or_insert_with(Default::default);
        g.n_s = Some(grid[0]);
        g.n_psi = Some(grid[1]);
    }
    if let Some(tol) = args.tol {
        cfg.flow.get_or_insert_with(Default::default).tol = Some(tol);
        cfg.section.get_or_insert_with(Default::default).tol = Some(tol);
    }
    if args.seed_grid {
        cfg.section.get_or_insert_with(Default::default).seed_grid = Some(true);
    }
    run_experiment(&cfg)
}

fn main() {
    let cli = Cli::parse();
    let kind = cli.command.kind();
    match execute(kind, cli.command.args()) {
        Ok(summary) => print!("{}", summary.render()),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
