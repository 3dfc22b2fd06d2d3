//! Edge-synchronous dual accelerated coordinate descent.
//!
//! The formal form keeps one pair `(y, v)` of dual rows per edge and applies
//! the global contraction to all of them every iteration. The practical form
//! keeps `(y(r), v(r)) = (e_r^T A y, e_r^T A v)` at each node and only
//! touches the two endpoints of the sampled edge; the contraction steps a
//! node sat out are replayed in one shot with `B^(t - t_r)`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::instance::{stack, Instance};
use crate::spectral::SpectralParams;
use crate::timing::{simulate_times, Schedule, TimeModel};
use crate::trace::{RunTrace, TraceRecord};

/// Messages and oracle calls per iteration: one exchange on one edge.
pub const MESSAGES_PER_ITER: u64 = 2;
pub const GRADIENTS_PER_ITER: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Formal,
    Practical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpaceState {
    pub y: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    pub t: usize,
}

impl EdgeSpaceState {
    pub fn zeros(edges: usize, dim: usize) -> Self {
        Self {
            y: vec![DVector::zeros(dim); edges],
            v: vec![DVector::zeros(dim); edges],
            t: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub v: DVector<f64>,
    pub y: DVector<f64>,
    /// Global iteration this node's pair is current at.
    pub t_r: usize,
    /// Last computed `grad f_r^*(y)`.
    pub z: DVector<f64>,
}

impl NodeState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            v: DVector::zeros(dim),
            y: DVector::zeros(dim),
            t_r: 0,
            z: DVector::zeros(dim),
        }
    }

    /// The pair advanced to global iteration `t` without mutating.
    pub fn caught_up(&self, params: &SpectralParams, t: usize) -> (DVector<f64>, DVector<f64>) {
        let b = power_of_b(params, t.saturating_sub(self.t_r));
        mix(&b, &self.v, &self.y)
    }

    fn catch_up(&mut self, params: &SpectralParams, t: usize) {
        if t > self.t_r {
            let (v, y) = self.caught_up(params, t);
            self.v = v;
            self.y = y;
            self.t_r = t;
        }
    }
}

fn mix(b: &[[f64; 2]; 2], v: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    (v * b[0][0] + y * b[0][1], v * b[1][0] + y * b[1][1])
}

/// `B^k` from the spectral split of `B`: eigenvalue 1 with right eigenvector
/// `(1, 1)` and left eigenvector `(delta, theta)`, and eigenvalue
/// `1 - theta - delta`.
pub fn power_of_b(params: &SpectralParams, k: usize) -> [[f64; 2]; 2] {
    match k {
        0 => [[1.0, 0.0], [0.0, 1.0]],
        1 => params.contraction(),
        _ => {
            let (theta, delta) = (params.theta, params.delta);
            let s = theta + delta;
            let lambda = match i32::try_from(k) {
                Ok(k) => (1.0 - s).powi(k),
                Err(_) => (1.0 - s).powf(k as f64),
            };
            let (a, b) = (delta / s, theta / s);
            [
                [a + lambda * b, b - lambda * b],
                [a - lambda * a, b + lambda * a],
            ]
        }
    }
}

/// `B^k` by repeated squaring.
pub fn power_of_b_squaring(params: &SpectralParams, mut k: usize) -> [[f64; 2]; 2] {
    let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
        let mut out = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = x[r][0] * y[0][c] + x[r][1] * y[1][c];
            }
        }
        out
    };
    let mut base = params.contraction();
    let mut acc = [[1.0, 0.0], [0.0, 1.0]];
    while k > 0 {
        if k & 1 == 1 {
            acc = mul(acc, base);
        }
        base = mul(base, base);
        k >>= 1;
    }
    acc
}

/// One iteration of the edge-space form on edge index `edge`.
pub fn step_formal(state: &mut EdgeSpaceState, edge: usize, inst: &Instance) -> Result<()> {
    let g = &inst.graph;
    if edge >= g.num_edges() {
        return Err(Error::EdgeOutOfRange {
            index: edge,
            edges: g.num_edges(),
        });
    }
    let p = &inst.params;
    let (i, j) = g.edge(edge);
    let node_y = |r: usize| {
        let mut acc = DVector::zeros(state.y[0].len());
        for &k in g.incident(r) {
            let sign = if g.edge(k).0 == r { 1.0 } else { -1.0 };
            acc.axpy(sign * g.mu()[k], &state.y[k], 1.0);
        }
        acc
    };
    let z_i = inst.objectives[i].conjugate_gradient(&node_y(i))?;
    let z_j = inst.objectives[j].conjugate_gradient(&node_y(j))?;
    let grad = (z_i - z_j) * g.mu()[edge];
    if !grad.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite {
            iteration: state.t,
            what: "edge gradient",
        });
    }
    for (y, v) in state.y.iter_mut().zip(state.v.iter_mut()) {
        let y_old = y.clone();
        *y *= 1.0 - p.delta;
        y.axpy(p.delta, v, 1.0);
        *v *= 1.0 - p.theta;
        v.axpy(p.theta, &y_old, 1.0);
    }
    state.y[edge].axpy(-p.eta[edge], &grad, 1.0);
    let v_step = p.theta / (p.sigma_a * g.p()[edge]);
    state.v[edge].axpy(-v_step, &grad, 1.0);
    state.t += 1;
    Ok(())
}

/// One iteration of the node-local form at global iteration `t`.
///
/// Only the endpoints of `edge` are read or written.
pub fn step_practical(
    nodes: &mut [NodeState],
    edge: usize,
    t: usize,
    inst: &Instance,
) -> Result<()> {
    let g = &inst.graph;
    if edge >= g.num_edges() {
        return Err(Error::EdgeOutOfRange {
            index: edge,
            edges: g.num_edges(),
        });
    }
    let p = &inst.params;
    let (i, j) = g.edge(edge);
    for r in [i, j] {
        if nodes[r].t_r > t {
            return Err(Error::ScheduleViolation {
                node: r,
                last: nodes[r].t_r,
                requested: t,
            });
        }
        nodes[r].catch_up(p, t);
        nodes[r].z = inst.objectives[r].conjugate_gradient(&nodes[r].y)?;
    }
    let mu2 = g.mu()[edge].powi(2);
    let s_v = p.theta * mu2 / (g.p()[edge] * p.sigma_a);
    let s_y = mu2 * p.eta[edge];
    let b = p.contraction();
    let diff = &nodes[i].z - &nodes[j].z;
    if !diff.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite {
            iteration: t,
            what: "gradient exchange",
        });
    }
    for (r, sign) in [(i, 1.0), (j, -1.0)] {
        let node = &mut nodes[r];
        let (mut v, mut y) = mix(&b, &node.v, &node.y);
        v.axpy(-sign * s_v, &diff, 1.0);
        y.axpy(-sign * s_y, &diff, 1.0);
        node.v = v;
        node.y = y;
        node.t_r = t + 1;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub iterations: usize,
    pub record_every: usize,
    pub time_model: TimeModel,
    /// Record the Lyapunov value (formal mode only).
    pub track_lyapunov: bool,
}

impl RunConfig {
    pub fn new(mode: Mode, iterations: usize, record_every: usize) -> Self {
        Self {
            mode,
            iterations,
            record_every,
            time_model: TimeModel::default(),
            track_lyapunov: false,
        }
    }

    pub fn with_lyapunov(mut self) -> Self {
        self.track_lyapunov = true;
        self
    }
}

/// Lyapunov value `2 (F_A*(x_t) - F_A*(x*)) + sigma_A |v_t - x*|^2_{A^+A}`
/// in edge space.
///
/// Both terms are evaluated through node-space images so that kernel
/// components of `y` and `v` cancel in the sparse product with `A` instead
/// of in a dense projection.
pub struct LyapunovTracker {
    node_opt: Vec<DVector<f64>>,
}

impl LyapunovTracker {
    pub fn new(inst: &Instance) -> Self {
        Self {
            node_opt: inst.node_dual_optimum(),
        }
    }

    /// `C = r_0^2 + 2 (F_A*(x_0) - F_A*(x*))` for the zero start.
    pub fn constant(&self, inst: &Instance) -> Result<f64> {
        let zero = EdgeSpaceState::zeros(inst.graph.num_edges(), inst.dim());
        let (gap, r2) = self.parts(inst, &zero)?;
        Ok(r2 + 2.0 * gap)
    }

    pub fn value(&self, inst: &Instance, state: &EdgeSpaceState) -> Result<f64> {
        let (gap, r2) = self.parts(inst, state)?;
        Ok(2.0 * gap + inst.params.sigma_a * r2)
    }

    /// `(F_A*(x_t) - F_A*(x*), r_t^2)`.
    ///
    /// The function gap is summed as Bregman divergences per node; the
    /// linear term `<x_opt, 1^T A (x - x*)>` vanishes because `1^T A = 0`.
    /// `r^2 = (A dv)^T (A A^T)^+ (A dv)`, which equals `dv^T A^+ A dv`.
    pub fn parts(&self, inst: &Instance, state: &EdgeSpaceState) -> Result<(f64, f64)> {
        let theta = inst.params.theta;
        let x: Vec<DVector<f64>> = state
            .y
            .iter()
            .zip(&state.v)
            .map(|(y, v)| y * (1.0 + theta) - v * theta)
            .collect();
        let ax = inst.apply_incidence(&x);
        let mut gap = 0.0;
        for ((f, z), z_opt) in inst.objectives.iter().zip(&ax).zip(&self.node_opt) {
            gap += f.conjugate_bregman(z, z_opt)?;
        }
        let av: Vec<DVector<f64>> = inst
            .apply_incidence(&state.v)
            .iter()
            .zip(&self.node_opt)
            .map(|(a, b)| a - b)
            .collect();
        let adv = stack(&av);
        let r2 = adv.dot(&(&inst.spectrum.pinv * &adv));
        Ok((gap, r2))
    }
}

/// Runs `cfg.iterations` steps along `schedule` and records errors at
/// `t = 0`, every `record_every` iterations, and at the end.
pub fn run(inst: &Instance, schedule: &Schedule, cfg: RunConfig) -> Result<RunTrace> {
    let total = cfg.iterations;
    if schedule.len() < total {
        return Err(Error::Config(format!(
            "schedule has {} edges, run needs {total}",
            schedule.len()
        )));
    }
    let prefix = Schedule {
        seed: schedule.seed,
        edges: schedule.edges[..total].to_vec(),
    };
    let timing = simulate_times(&inst.graph, &prefix, cfg.time_model);
    let every = cfg.record_every.max(1);
    let mut trace = RunTrace::new("esdacd", schedule.seed);
    let record = |trace: &mut RunTrace, t: usize, duals: &[DVector<f64>], lyap: Option<f64>| -> Result<()> {
        let estimates = inst.primal_estimates(duals)?;
        let (max_subopt, consensus_err) = inst.errors(&estimates);
        if !(max_subopt.is_finite() && consensus_err.is_finite()) {
            return Err(Error::NonFinite {
                iteration: t,
                what: "primal estimates",
            });
        }
        trace.records.push(TraceRecord {
            t,
            sim_time: timing.t_max_at[t],
            max_subopt,
            consensus_err,
            lyapunov: lyap,
            messages: MESSAGES_PER_ITER * t as u64,
            gradients: GRADIENTS_PER_ITER * t as u64,
        });
        Ok(())
    };
    let due = |t: usize| t % every == 0 || t == total;

    match cfg.mode {
        Mode::Formal => {
            let tracker = cfg.track_lyapunov.then(|| LyapunovTracker::new(inst));
            let mut state = EdgeSpaceState::zeros(inst.graph.num_edges(), inst.dim());
            for t in 0..=total {
                if due(t) {
                    let lyap = tracker.as_ref().map(|tr| tr.value(inst, &state)).transpose()?;
                    record(&mut trace, t, &inst.apply_incidence(&state.y), lyap)?;
                }
                if t < total {
                    step_formal(&mut state, schedule.edges[t], inst)?;
                }
            }
        }
        Mode::Practical => {
            let mut nodes = vec![NodeState::zeros(inst.dim()); inst.n()];
            for t in 0..=total {
                if t == total {
                    for node in nodes.iter_mut() {
                        node.catch_up(&inst.params, total);
                    }
                }
                if due(t) {
                    let duals: Vec<_> = nodes.iter().map(|nd| nd.caught_up(&inst.params, t).1).collect();
                    record(&mut trace, t, &duals, None)?;
                }
                if t < total {
                    step_practical(&mut nodes, schedule.edges[t], t, inst)?;
                }
            }
        }
    }
    Ok(trace)
}

/// Node duals `(e_r^T A y_t)` after `iterations` steps, for both forms.
pub fn final_node_duals(
    inst: &Instance,
    schedule: &Schedule,
    iterations: usize,
    mode: Mode,
) -> Result<Vec<DVector<f64>>> {
    match mode {
        Mode::Formal => {
            let mut state = EdgeSpaceState::zeros(inst.graph.num_edges(), inst.dim());
            for &e in &schedule.edges[..iterations] {
                step_formal(&mut state, e, inst)?;
            }
            Ok(inst.apply_incidence(&state.y))
        }
        Mode::Practical => {
            let mut nodes = vec![NodeState::zeros(inst.dim()); inst.n()];
            for (t, &e) in schedule.edges[..iterations].iter().enumerate() {
                step_practical(&mut nodes, e, t, inst)?;
            }
            Ok(nodes
                .iter()
                .map(|nd| nd.caught_up(&inst.params, iterations).1)
                .collect())
        }
    }
}
