use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multimesh::StabVariant;
use multimesh_cli::{run, Case, Command, ExperimentConfig, Problem};

#[derive(Parser)]
#[command(name = "multimesh", version, about = "Multimesh finite element experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Cmd {
    /// One solve; writes the error report and optionally a probe grid.
    Solve,
    /// Refine the parts one at a time in every order.
    Convergence,
    /// Condition number of the stiffness matrix against the mesh size.
    Condition,
    /// Reaction-diffusion layer around a hexagonal obstacle.
    BoundaryLayer,
}

#[derive(Args)]
struct Opts {
    /// JSON experiment file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Domain stack: single, I, II or custom (custom needs a config file).
    #[arg(long, global = true)]
    case: Option<Case>,
    /// Polynomial degree (1 or 2).
    #[arg(long, global = true)]
    p: Option<usize>,
    #[arg(long, global = true)]
    beta0: Option<f64>,
    #[arg(long, global = true)]
    beta1: Option<f64>,
    /// Overlap stabilization: grad or l2.
    #[arg(long, global = true)]
    stab: Option<StabVariant>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    k_min: Option<i32>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    k_max: Option<i32>,
    /// Per-part exponents for `solve`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    ks: Option<Vec<i32>>,
    /// Use the long mesh-size range.
    #[arg(long, global = true)]
    full: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Points per side of the probe grid.
    #[arg(long, global = true)]
    probe: Option<usize>,
    /// Estimate condition numbers during solves.
    #[arg(long, global = true)]
    kappa: bool,
    /// CG relative residual (default 1e-10).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Cells across the boundary-layer band.
    #[arg(long, global = true)]
    layers: Option<usize>,
}

impl Opts {
    fn resolve(self) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { c.$field = v; })* };
        }
        set!(p, stab, seed, out, tol, layers);
        if let Some(v) = self.case {
            c.config = v;
        }
        c.beta0 = self.beta0.or(c.beta0);
        c.beta1 = self.beta1.or(c.beta1);
        c.k_min = self.k_min.or(c.k_min);
        c.k_max = self.k_max.or(c.k_max);
        c.ks = self.ks.or(c.ks);
        c.probe = self.probe.or(c.probe);
        c.full |= self.full;
        c.kappa |= self.kappa;
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cmd = match cli.command {
        Cmd::Solve => Command::Solve,
        Cmd::Convergence => Command::Convergence,
        Cmd::Condition => Command::Condition,
        Cmd::BoundaryLayer => Command::BoundaryLayer,
    };
    let result = cli.opts.resolve().and_then(|mut cfg| {
        if cmd == Command::BoundaryLayer {
            cfg.problem = Problem::BoundaryLayer;
        }
        run(cmd, &cfg)
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
