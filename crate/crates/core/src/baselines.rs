//! Comparison methods: pairwise randomized gossip, heavy-ball gossip and the
//! synchronous accelerated dual method (SSDA).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{laplacian, Graph};
use crate::instance::{stack, unstack, Instance};
use crate::spectral::eigen_laplacian;
use crate::timing::{simulate_times, Schedule, TimeModel};
use crate::trace::{RunTrace, TraceRecord};

/// Node values for the gossip family. `x_prev` is only read by heavy-ball.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipState {
    pub x: Vec<DVector<f64>>,
    pub x_prev: Vec<DVector<f64>>,
    pub t: usize,
}

impl GossipState {
    pub fn new(x: Vec<DVector<f64>>) -> Self {
        Self {
            x_prev: x.clone(),
            x,
            t: 0,
        }
    }

    /// `sum_i |x_i - mean|^2`.
    pub fn consensus_error(&self) -> f64 {
        consensus_error(&self.x)
    }
}

pub fn consensus_error(x: &[DVector<f64>]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut mean = DVector::zeros(x[0].len());
    for xi in x {
        mean += xi;
    }
    mean /= x.len() as f64;
    x.iter().map(|xi| (xi - &mean).norm_squared()).sum()
}

/// Replaces `x_i` and `x_j` by their average.
pub fn gossip_step(state: &mut GossipState, edge: (usize, usize)) {
    let (i, j) = edge;
    let avg = (&state.x[i] + &state.x[j]) * 0.5;
    state.x[i].copy_from(&avg);
    state.x[j].copy_from(&avg);
    state.t += 1;
}

/// `x+ = x + beta (x - x_prev) - (omega / 2) (e_i - e_j)(e_i - e_j)^T x`.
pub fn heavyball_gossip_step(state: &mut GossipState, edge: (usize, usize), omega: f64, beta: f64) {
    let (i, j) = edge;
    let diff = (&state.x[i] - &state.x[j]) * (0.5 * omega);
    for (x, xp) in state.x.iter_mut().zip(state.x_prev.iter_mut()) {
        for (a, b) in x.iter_mut().zip(xp.iter_mut()) {
            let cur = *a;
            *a = cur + beta * (cur - *b);
            *b = cur;
        }
    }
    state.x[i] -= &diff;
    state.x[j] += &diff;
    state.t += 1;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GossipVariant {
    Pairwise,
    HeavyBall { omega: f64, beta: f64 },
}

impl GossipVariant {
    pub fn name(&self) -> &'static str {
        match self {
            GossipVariant::Pairwise => "gossip",
            GossipVariant::HeavyBall { .. } => "heavyball",
        }
    }
}

/// Runs a gossip variant on the averaging instance `inst`, starting from the
/// local targets. Estimates are the node values themselves.
pub fn gossip_run(
    inst: &Instance,
    variant: GossipVariant,
    schedule: &Schedule,
    iterations: usize,
    record_every: usize,
    model: TimeModel,
) -> Result<RunTrace> {
    if schedule.len() < iterations {
        return Err(Error::Config(format!(
            "schedule has {} edges, run needs {iterations}",
            schedule.len()
        )));
    }
    if let GossipVariant::HeavyBall { beta, .. } = variant {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::Config(format!("heavy-ball beta must be in [0, 1), got {beta}")));
        }
    }
    // grad f_i^*(0) is the local target for averaging.
    let zero = DVector::zeros(inst.dim());
    let start = inst
        .objectives
        .iter()
        .map(|f| f.conjugate_gradient(&zero))
        .collect::<Result<Vec<_>>>()?;
    let prefix = Schedule {
        seed: schedule.seed,
        edges: schedule.edges[..iterations].to_vec(),
    };
    let timing = simulate_times(&inst.graph, &prefix, model);
    let every = record_every.max(1);
    let mut state = GossipState::new(start);
    let mut trace = RunTrace::new(variant.name(), schedule.seed);
    for t in 0..=iterations {
        if t % every == 0 || t == iterations {
            let (max_subopt, consensus_err) = inst.errors(&state.x);
            if !consensus_err.is_finite() {
                return Err(Error::NonFinite {
                    iteration: t,
                    what: "gossip values",
                });
            }
            trace.records.push(TraceRecord {
                t,
                sim_time: timing.t_max_at[t],
                max_subopt,
                consensus_err,
                lyapunov: None,
                messages: 2 * t as u64,
                gradients: 0,
            });
        }
        if t < iterations {
            let edge = inst.graph.edge(schedule.edges[t]);
            match variant {
                GossipVariant::Pairwise => gossip_step(&mut state, edge),
                GossipVariant::HeavyBall { omega, beta } => {
                    heavyball_gossip_step(&mut state, edge, omega, beta)
                }
            }
        }
    }
    Ok(trace)
}

/// Dual iterates of SSDA with gossip matrix `W` (the unit-weight Laplacian).
#[derive(Debug, Clone, PartialEq)]
pub struct SsdaState {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub eta: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct Ssda {
    pub w: DMatrix<f64>,
    pub eta: f64,
    pub momentum: f64,
    /// Simulated duration of one synchronous round.
    pub round_time: f64,
}

impl Ssda {
    pub fn new(inst: &Instance, model: TimeModel) -> Result<Self> {
        let g = &inst.graph;
        let w = laplacian(g);
        let eig = eigen_laplacian(&w)?;
        let lambda_max = eig.max();
        let lambda_min = eig.min_positive().ok_or(Error::Disconnected)?;
        let gamma = lambda_min / lambda_max;
        let sigma_min = inst
            .objectives
            .iter()
            .map(|f| f.sigma())
            .fold(f64::INFINITY, f64::min);
        let l_max = inst
            .objectives
            .iter()
            .map(|f| f.smoothness())
            .fold(0.0, f64::max);
        let root = (gamma * sigma_min / l_max).sqrt();
        Ok(Self {
            w,
            eta: sigma_min / lambda_max,
            momentum: (1.0 - root) / (1.0 + root),
            round_time: round_time(g, model),
        })
    }

    pub fn init(&self, n: usize, d: usize) -> SsdaState {
        SsdaState {
            x: DMatrix::zeros(n, d),
            y: DMatrix::zeros(n, d),
            eta: self.eta,
            momentum: self.momentum,
        }
    }

    pub fn step(&self, inst: &Instance, state: &mut SsdaState) -> Result<()> {
        let grads = stack(&inst.primal_estimates(&unstack(&state.x))?);
        let y_next = &state.x - (&self.w * grads) * state.eta;
        state.x = &y_next * (1.0 + state.momentum) - &state.y * state.momentum;
        state.y = y_next;
        Ok(())
    }
}

/// `max_i (delta_i + max over incident edges tau_ij)`.
pub fn round_time(g: &Graph, model: TimeModel) -> f64 {
    (0..g.n())
        .map(|i| {
            let comm = g
                .incident(i)
                .iter()
                .map(|&k| g.tau()[k])
                .fold(0.0, f64::max);
            let comp = if model.include_compute { g.delta_comp()[i] } else { 0.0 };
            comp + comm
        })
        .fold(0.0, f64::max)
}

/// Runs SSDA from zero duals. Estimates are `grad f_i^*(y_i)`.
pub fn ssda_run(
    inst: &Instance,
    iterations: usize,
    record_every: usize,
    model: TimeModel,
) -> Result<RunTrace> {
    let ssda = Ssda::new(inst, model)?;
    let mut state = ssda.init(inst.n(), inst.dim());
    let every = record_every.max(1);
    let e = inst.graph.num_edges() as u64;
    let n = inst.n() as u64;
    let mut trace = RunTrace::new("ssda", 0);
    for t in 0..=iterations {
        if t % every == 0 || t == iterations {
            let est = inst.primal_estimates(&unstack(&state.y))?;
            let (max_subopt, consensus_err) = inst.errors(&est);
            if !(max_subopt.is_finite() && consensus_err.is_finite()) {
                return Err(Error::NonFinite {
                    iteration: t,
                    what: "ssda iterates",
                });
            }
            trace.records.push(TraceRecord {
                t,
                sim_time: ssda.round_time * t as f64,
                max_subopt,
                consensus_err,
                lyapunov: None,
                messages: 2 * e * t as u64,
                gradients: n * t as u64,
            });
        }
        if t < iterations {
            ssda.step(inst, &mut state)?;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, TopologyKind};
    use crate::objectives::LocalObjective;
    use crate::spectral::gossip_rate;
    use crate::timing::sample_schedule;

    fn scalars(v: &[f64]) -> Vec<DVector<f64>> {
        v.iter().map(|&c| DVector::from_element(1, c)).collect()
    }

    fn averaging(g: Graph, targets: &[f64]) -> Instance {
        let objs = scalars(targets).into_iter().map(LocalObjective::quadratic).collect();
        Instance::new(g, objs).unwrap()
    }

    #[test]
    fn gossip_averages_pair() {
        let mut s = GossipState::new(scalars(&[0.0, 2.0, 5.0]));
        gossip_step(&mut s, (0, 1));
        assert_eq!(s.x[0][0], 1.0);
        assert_eq!(s.x[1][0], 1.0);
        assert_eq!(s.x[2][0], 5.0);
        let before = s.clone();
        gossip_step(&mut s, (0, 1));
        assert_eq!(s.x, before.x);
    }

    #[test]
    fn heavyball_without_momentum_is_gossip() {
        let init = scalars(&[0.3, -1.0, 2.5, 4.0]);
        let mut a = GossipState::new(init.clone());
        let mut b = GossipState::new(init);
        for e in [(0, 1), (1, 2), (2, 3), (0, 3), (1, 2)] {
            gossip_step(&mut a, e);
            heavyball_gossip_step(&mut b, e, 1.0, 0.0);
        }
        for (x, y) in a.x.iter().zip(&b.x) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn heavyball_consensus_is_fixed_point() {
        for (omega, beta) in [(1.0, 0.5), (0.3, 0.9), (1.7, 0.0)] {
            let mut s = GossipState::new(scalars(&[2.0; 5]));
            for e in [(0, 1), (3, 4), (1, 2)] {
                heavyball_gossip_step(&mut s, e, omega, beta);
            }
            assert!(s.x.iter().all(|x| x[0] == 2.0));
        }
    }

    #[test]
    fn heavyball_preserves_sum() {
        let mut s = GossipState::new(scalars(&[1.0, 0.0, 0.0, 0.0, 3.0]));
        for k in 0..200 {
            heavyball_gossip_step(&mut s, (k % 4, k % 4 + 1), 1.0, 0.5);
            let sum: f64 = s.x.iter().map(|x| x[0]).sum();
            assert!((sum - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gossip_sum_is_exact() {
        let g = build_topology(TopologyKind::Ring, 12).unwrap();
        let init: Vec<f64> = (0..12).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let mut s = GossipState::new(scalars(&init));
        let sched = sample_schedule(&g, 4, 5000);
        for &k in &sched.edges {
            gossip_step(&mut s, g.edge(k));
            let sum: f64 = s.x.iter().map(|x| x[0]).sum();
            assert!((sum - 4.0).abs() < 1e-13);
        }
    }

    #[test]
    fn gossip_second_moment_decays_at_expected_rate() {
        // E[E2(t)] <= (1 - lambda_min^+(L / 2E))^t E2(0) for uniform pairwise gossip.
        let g = build_topology(TopologyKind::Ring, 20).unwrap();
        let rate = gossip_rate(&g).unwrap();
        let init: Vec<f64> = (0..20).map(|i| if i < 2 { 1.0 } else { 0.0 }).collect();
        let e0 = consensus_error(&scalars(&init));
        let steps = 10_000;
        let checkpoints: Vec<usize> = (0..=steps).step_by(500).collect();
        let mut mean = vec![0.0; checkpoints.len()];
        let seeds = 100;
        for seed in 0..seeds {
            let sched = sample_schedule(&g, seed, steps);
            let mut s = GossipState::new(scalars(&init));
            let mut c = 0;
            for t in 0..=steps {
                if checkpoints[c] == t {
                    mean[c] += s.consensus_error() / seeds as f64;
                    c = (c + 1).min(checkpoints.len() - 1);
                }
                if t < steps {
                    gossip_step(&mut s, g.edge(sched.edges[t]));
                }
            }
        }
        for (&t, m) in checkpoints.iter().zip(&mean) {
            let bound = (1.0 - rate).powi(t as i32) * e0;
            assert!(*m <= 1.2 * bound, "t={t} mean={m} bound={bound}");
        }
    }

    #[test]
    fn ssda_two_nodes_reaches_mean() {
        let g = build_topology(TopologyKind::Path, 2).unwrap();
        let inst = averaging(g, &[0.0, 2.0]);
        let trace = ssda_run(&inst, 200, 50, TimeModel::default()).unwrap();
        let ssda = Ssda::new(&inst, TimeModel::default()).unwrap();
        let mut state = ssda.init(2, 1);
        for _ in 0..200 {
            ssda.step(&inst, &mut state).unwrap();
        }
        let est = inst.primal_estimates(&unstack(&state.y)).unwrap();
        assert!((est[0][0] - 1.0).abs() < 1e-9);
        assert!((est[1][0] - 1.0).abs() < 1e-9);
        assert!(trace.last().unwrap().consensus_err < 1e-18);
    }

    #[test]
    fn ssda_counters_follow_round_costs() {
        let g = build_topology(TopologyKind::Grid2d, 16).unwrap();
        let e = g.num_edges() as u64;
        let inst = averaging(g, &[1.0; 16]);
        let trace = ssda_run(&inst, 7, 1, TimeModel::default()).unwrap();
        for r in &trace.records {
            assert_eq!(r.messages, 2 * e * r.t as u64);
            assert_eq!(r.gradients, 16 * r.t as u64);
            assert_eq!(r.sim_time, r.t as f64);
        }
    }

    #[test]
    fn round_time_takes_slowest_node() {
        let g = build_topology(TopologyKind::Path, 3)
            .unwrap()
            .with_delays(vec![1.0, 4.0])
            .unwrap()
            .with_compute_times(vec![0.0, 0.5, 2.0])
            .unwrap();
        assert_eq!(round_time(&g, TimeModel::default()), 4.0);
        assert_eq!(round_time(&g, TimeModel { include_compute: true }), 6.0);
    }

    #[test]
    fn baselines_fixed_at_consensus() {
        let g = build_topology(TopologyKind::Ring, 6).unwrap();
        let inst = averaging(g, &[0.7; 6]);
        let s = sample_schedule(&inst.graph, 0, 30);
        for v in [GossipVariant::Pairwise, GossipVariant::HeavyBall { omega: 1.0, beta: 0.5 }] {
            let tr = gossip_run(&inst, v, &s, 30, 5, TimeModel::default()).unwrap();
            assert!(tr.records.iter().all(|r| r.consensus_err < 1e-28));
        }
        let tr = ssda_run(&inst, 30, 5, TimeModel::default()).unwrap();
        assert!(tr.records.iter().all(|r| r.consensus_err < 1e-28));
    }
}
