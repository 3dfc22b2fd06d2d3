//! Seeded experiment runs and CSV output.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::baselines::{gossip_run, ssda_run, GossipVariant};
use crate::error::{Error, Result};
use crate::esdacd::{self, Mode, RunConfig};
use crate::graph::{build_topology, Graph};
use crate::harness::config::{Algorithm, DelayModel, ExperimentConfig, Family, MuPolicy, NamedMu};
use crate::harness::dataset::generate_dataset;
use crate::harness::metrics::{Metric, MetricRow, ROW_HEADER};
use crate::instance::Instance;
use crate::objectives::LocalObjective;
use crate::timing::{sample_schedule, TimeModel};
use crate::trace::RunTrace;

/// Per-seed traces, one per configured algorithm, in configuration order.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub traces: Vec<RunTrace>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub metric: Metric,
    pub runs: Vec<SeedRun>,
}

impl ExperimentOutput {
    pub fn rows(&self) -> Vec<MetricRow> {
        self.runs
            .iter()
            .flat_map(|r| r.traces.iter().flat_map(|t| MetricRow::from_trace(t, self.metric)))
            .collect()
    }

    pub fn traces_for<'a>(&'a self, algorithm: &'a str) -> impl Iterator<Item = &'a RunTrace> + 'a {
        self.runs
            .iter()
            .flat_map(move |r| r.traces.iter().filter(move |t| t.algorithm == algorithm))
    }
}

pub fn metric_for(family: Family) -> Metric {
    match family {
        Family::Averaging => Metric::Consensus,
        _ => Metric::MaxSuboptimality,
    }
}

/// Graph with uniform `p` and the configured delays, `mu = 1`.
pub fn build_graph(cfg: &ExperimentConfig, seed: u64) -> Result<Graph> {
    let t = &cfg.topology;
    let mut g = build_topology(cfg.topology_kind()?, t.n)?;
    if t.delays == DelayModel::Exponential {
        g = g.with_exponential_delays(t.delay_rate, seed)?;
    }
    if t.compute_time > 0.0 {
        g = g.with_compute_times(vec![t.compute_time; t.n])?;
    }
    Ok(g)
}

/// Applies a `mu` policy. The matched policy sets
/// `mu_ij = p_ij / sqrt(1/sigma_i + 1/sigma_j)`.
pub fn apply_mu(g: Graph, policy: MuPolicy, objs: &[LocalObjective]) -> Result<Graph> {
    match policy {
        MuPolicy::Constant(m) => g.with_uniform_mu(m),
        MuPolicy::Named(NamedMu::SsdaMatched) => {
            let mu = g
                .edges()
                .iter()
                .zip(g.p())
                .map(|(&(i, j), p)| p / (1.0 / objs[i].sigma() + 1.0 / objs[j].sigma()).sqrt())
                .collect();
            g.with_mu(mu)
        }
    }
}

fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let base = build_graph(cfg, seed)?;
    let objs = generate_dataset(&cfg.objective, cfg.topology.n, seed)?;
    let model = TimeModel {
        include_compute: cfg.network.include_compute,
    };
    let edge_iters = cfg.edge_iterations();
    let edge_every = cfg.edge_record_every();
    let needs_edges = cfg.algorithms.list.iter().any(Algorithm::samples_edges);
    let schedule = sample_schedule(&base, seed, if needs_edges { edge_iters } else { 0 });
    let unit = Instance::new(base.clone(), objs.clone())?;
    let mut traces = Vec::with_capacity(cfg.algorithms.list.len());
    for algo in &cfg.algorithms.list {
        let trace = match algo {
            Algorithm::Esdacd => {
                let inst = match cfg.network.mu {
                    MuPolicy::Constant(m) if m == 1.0 => unit.clone(),
                    policy => Instance::new(apply_mu(base.clone(), policy, &objs)?, objs.clone())?,
                };
                let mode = if cfg.algorithms.formal { Mode::Formal } else { Mode::Practical };
                let mut rc = RunConfig::new(mode, edge_iters, edge_every);
                rc.time_model = model;
                esdacd::run(&inst, &schedule, rc)
            }
            Algorithm::Gossip => gossip_run(&unit, GossipVariant::Pairwise, &schedule, edge_iters, edge_every, model),
            Algorithm::Heavyball => {
                let variant = GossipVariant::HeavyBall {
                    omega: cfg.algorithms.heavyball_omega,
                    beta: cfg.algorithms.heavyball_beta,
                };
                gossip_run(&unit, variant, &schedule, edge_iters, edge_every, model)
            }
            Algorithm::Ssda => ssda_run(&unit, cfg.ssda_iterations(), cfg.record_every, model).map(|mut t| {
                t.seed = seed;
                t
            }),
        }
        .map_err(|e| Error::Experiment {
            seed,
            algorithm: algo.name().to_string(),
            source: Box::new(e),
        })?;
        traces.push(trace);
    }
    Ok(SeedRun { seed, traces })
}

/// Runs every seed in parallel; results come back in seed-list order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput {
        metric: metric_for(cfg.objective.family),
        runs,
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per algorithm and recorded iteration: mean simulated time and the mean,
/// 10%, 50% and 90% quantiles of the error across seeds.
pub fn summary_csv(out: &ExperimentOutput) -> String {
    let mut s = String::from("algorithm,t,mean_sim_time,mean_error,q10_error,median_error,q90_error\n");
    let Some(first) = out.runs.first() else {
        return s;
    };
    for (a, proto) in first.traces.iter().enumerate() {
        for (k, rec) in proto.records.iter().enumerate() {
            let mut errs = Vec::with_capacity(out.runs.len());
            let mut time = 0.0;
            for run in &out.runs {
                let r = &run.traces[a].records[k];
                errs.push(match out.metric {
                    Metric::Consensus => r.consensus_err,
                    Metric::MaxSuboptimality => r.max_subopt,
                });
                time += r.sim_time;
            }
            errs.sort_by(f64::total_cmp);
            let m = errs.len() as f64;
            let _ = writeln!(
                s,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                proto.algorithm,
                rec.t,
                time / m,
                errs.iter().sum::<f64>() / m,
                quantile(&errs, 0.1),
                quantile(&errs, 0.5),
                quantile(&errs, 0.9)
            );
        }
    }
    s
}

/// Writes `<algo>_<seed>.csv` per run, `summary.csv` and `rows.csv`.
pub fn write_outputs(out: &ExperimentOutput, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for run in &out.runs {
        for trace in &run.traces {
            let path = dir.join(format!("{}_{}.csv", trace.algorithm, run.seed));
            std::fs::write(path, trace.to_csv_with_resources())?;
        }
    }
    std::fs::write(dir.join("summary.csv"), summary_csv(out))?;
    let mut rows = String::from(ROW_HEADER);
    rows.push('\n');
    for row in out.rows() {
        rows.push_str(&row.to_csv_line());
        rows.push('\n');
    }
    std::fs::write(dir.join("rows.csv"), rows)?;
    Ok(())
}
