use clap::{Parser, Subcommand};
use motkit_cli::commands::{self, SimFlags};
use std::path::PathBuf;
use std::process::ExitCode;

/// Construct, optimize, and simulate martingale transport plans on the line.
///
/// Marginal specs are JSON, inline or by file path: either explicit
/// `{"atoms": [...], "weights": [...]}` or parametric
/// `{"family": "uniform"|"gaussian"|"two_point", ...}` discretized by
/// equal-mass quantile slices.
#[derive(Parser)]
#[command(name = "motkit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// RNG seed for all sampling.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Time step for path simulation.
    #[arg(long, global = true, default_value_t = 1e-3)]
    dt: f64,

    /// Number of simulated paths.
    #[arg(long, global = true, default_value_t = 10_000)]
    paths: usize,

    /// Number of exact exit samples for the embedded law.
    #[arg(long, global = true, default_value_t = 100_000)]
    samples: usize,

    /// Default slice count for parametric marginals without one.
    #[arg(long, global = true, default_value_t = 100)]
    slices: usize,

    /// Convex-order tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Check whether two marginals are in convex order.
    CheckOrder {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        nu: String,
    },
    /// Build the left-monotone coupling and its exit maps.
    Build {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        nu: String,
        /// Coupling output (JSON).
        #[arg(long)]
        out_coupling: Option<PathBuf>,
        /// Maps output (CSV with columns x,t_down,t_up,q).
        #[arg(long)]
        out_tmaps: Option<PathBuf>,
    },
    /// Solve the transport linear program and report the dual certificate.
    Solve {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        nu: String,
        /// One of xy_squared, exp_sum, neg_xy_squared, xy.
        #[arg(long, default_value = "xy_squared")]
        cost: String,
        /// Report output (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Realize exit maps as a barrier-type stopping rule and verify it.
    Embed {
        /// Maps input (CSV from `build`).
        #[arg(long)]
        tmaps: PathBuf,
        #[arg(long)]
        mu: String,
        #[arg(long)]
        nu: String,
        /// Report output (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Barrier rays output (CSV with columns threshold,height,family).
        #[arg(long)]
        out_barrier: Option<PathBuf>,
        /// Phase-plane trajectory samples output (CSV).
        #[arg(long)]
        out_trajectories: Option<PathBuf>,
        /// How many trajectories to sample when --out-trajectories is set.
        #[arg(long, default_value_t = 3)]
        trajectories: usize,
    },
}

fn main() -> ExitCode {
    // MOTKIT_THREADS caps worker parallelism; results are identical at any
    // thread count.
    if let Ok(threads) = std::env::var("MOTKIT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let flags = SimFlags {
        seed: cli.seed,
        dt: cli.dt,
        paths: cli.paths,
        samples: cli.samples,
        slices: cli.slices,
        tol: cli.tol,
    };
    let result = match &cli.command {
        Command::CheckOrder { mu, nu } => commands::cmd_check_order(mu, nu, &flags),
        Command::Build {
            mu,
            nu,
            out_coupling,
            out_tmaps,
        } => commands::cmd_build(mu, nu, out_coupling.as_deref(), out_tmaps.as_deref(), &flags),
        Command::Solve { mu, nu, cost, out } => {
            commands::cmd_solve(mu, nu, cost, out.as_deref(), &flags)
        }
        Command::Embed {
            tmaps,
            mu,
            nu,
            out,
            out_barrier,
            out_trajectories,
            trajectories,
        } => commands::cmd_embed(
            tmaps,
            mu,
            nu,
            out.as_deref(),
            out_barrier.as_deref(),
            out_trajectories.as_ref(),
            *trajectories,
            &flags,
        ),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
