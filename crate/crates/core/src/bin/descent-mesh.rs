use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use descent_mesh::graph::{build_topology, check_assumptions, Graph, TopologyKind};
use descent_mesh::harness::{run_experiment, write_outputs, ExperimentConfig};
use descent_mesh::spectral::{compute_params, Curvature};
use descent_mesh::timing::{sample_schedule, simulate_times, time_bound_report, TimeModel};

#[derive(Parser)]
#[command(name = "descent-mesh", version, about = "Decentralized dual coordinate descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML file.
    Run {
        config: PathBuf,
        /// Overrides `outdir` from the config.
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
    /// Print rate, step sizes and spectrum for a graph file.
    Params {
        graph: PathBuf,
        /// Strong convexity shared by every node.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Smoothness shared by every node.
        #[arg(long, default_value_t = 1.0)]
        smoothness: f64,
    },
    /// Simulate execution times: per-k mean T_max as CSV on stdout, report on stderr.
    Timing {
        graph: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 10_000)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add max(delta_i, delta_j) of compute time per update.
        #[arg(long)]
        include_compute: bool,
        /// Emit every `stride`-th k.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Report the regularity and projector constants of a graph file.
    CheckAssumptions { graph: PathBuf },
    /// Write a graph file for a standard topology to stdout.
    Graph {
        #[arg(value_enum)]
        kind: Kind,
        n: usize,
        /// Edge probability for erdos-renyi.
        #[arg(long, default_value_t = 0.2)]
        prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw exponential delays with this rate instead of unit delays.
        #[arg(long)]
        exp_delays: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ring,
    Grid2d,
    Complete,
    ErdosRenyi,
    Star,
    Path,
}

fn read_graph(path: &PathBuf) -> Result<Graph> {
    Graph::read_file(path).with_context(|| format!("reading graph {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, outdir } => {
            let cfg = ExperimentConfig::read_file(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let dir = outdir.unwrap_or_else(|| cfg.outdir.clone());
            let out = run_experiment(&cfg)?;
            write_outputs(&out, &dir)?;
            eprintln!("{}: {} seeds written to {}", cfg.name, out.runs.len(), dir.display());
        }
        Command::Params {
            graph,
            sigma,
            smoothness,
        } => {
            let g = read_graph(&graph)?;
            let curv = vec![Curvature { sigma, smoothness }; g.n()];
            print!("{}", compute_params(&g, &curv)?.dump());
        }
        Command::Timing {
            graph,
            trials,
            iterations,
            seed,
            include_compute,
            stride,
        } => {
            if trials == 0 || iterations == 0 {
                bail!("trials and iterations must be positive");
            }
            let g = read_graph(&graph)?;
            let model = TimeModel { include_compute };
            let sums = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let s = sample_schedule(&g, seed.wrapping_add(t), iterations);
                    simulate_times(&g, &s, model).t_max_at
                })
                .reduce(
                    || vec![0.0; iterations + 1],
                    |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
                );
            let mut csv = String::from("k,t_max\n");
            for (k, v) in sums.iter().enumerate().step_by(stride.max(1)) {
                let _ = writeln!(csv, "{k},{:.16e}", v / trials as f64);
            }
            print!("{csv}");
            eprint!("{}", time_bound_report(&g, trials, iterations, seed).to_text());
        }
        Command::CheckAssumptions { graph } => {
            let g = read_graph(&graph)?;
            let r = check_assumptions(&g)?;
            println!("c_regularity = {:.16e}", r.c_regularity);
            println!("c_projector = {:.16e}", r.c_projector);
        }
        Command::Graph {
            kind,
            n,
            prob,
            seed,
            exp_delays,
        } => {
            let kind = match kind {
                Kind::Ring => TopologyKind::Ring,
                Kind::Grid2d => TopologyKind::Grid2d,
                Kind::Complete => TopologyKind::Complete,
                Kind::ErdosRenyi => TopologyKind::ErdosRenyi { prob, seed },
                Kind::Star => TopologyKind::Star,
                Kind::Path => TopologyKind::Path,
            };
            let mut g = build_topology(kind, n)?;
            if let Some(rate) = exp_delays {
                g = g.with_exponential_delays(rate, seed)?;
            }
            print!("{}", g.to_text());
        }
    }
    Ok(())
}
