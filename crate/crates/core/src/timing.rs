//! Common-seed edge schedules and the idealized execution-time model.
//!
//! # Schedule generator
//!
//! Every node must derive the same edge sequence from the shared seed, so
//! the generator is fixed by name rather than left to a library default:
//!
//! - PRNG: SplitMix64 with the state initialised to the seed. Each output
//!   adds `0x9E3779B97F4A7C15` to the state and mixes it with shifts 30,
//!   27, 31 and multipliers `0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`.
//!   Seed 0 yields `0xE220A8397B1DCDAF`, `0x6E789E6AA1B965F4`,
//!   `0x06C45D188009454F`.
//! - Uniform: `u = (x >> 11) * 2^-53`, in `[0, 1)`.
//! - Draw: the first edge index `k` with `u < cdf[k]`, where `cdf` is the
//!   running sum of `p` in edge-index order (clamped to the last edge).

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;

use crate::graph::Graph;

/// Generic bound constant on the mean time per iteration.
pub const TIME_BOUND_GENERIC: f64 = 14.0;
/// Bound constant for regular graphs with uniform probabilities.
pub const TIME_BOUND_REGULAR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub seed: u64,
    /// Edge indices, one per iteration.
    pub edges: Vec<usize>,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// The schedule generator's uniform stream.
pub struct ScheduleRng(SplitMix64);

impl ScheduleRng {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

pub fn sample_schedule(g: &Graph, seed: u64, k: usize) -> Schedule {
    let mut acc = 0.0;
    let cdf: Vec<f64> = g
        .p()
        .iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect();
    let last = cdf.len() - 1;
    let mut rng = ScheduleRng::new(seed);
    let edges = (0..k)
        .map(|_| {
            let u = rng.next_uniform();
            cdf.partition_point(|&c| c <= u).min(last)
        })
        .collect();
    Schedule { seed, edges }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TimeModel {
    /// Add `max(delta_i, delta_j)` of compute time to every update.
    pub include_compute: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingResult {
    /// Completion time of each node's last update.
    pub t_node: Vec<f64>,
    /// `T_max(k)` for `k = 0..=K`.
    pub t_max_at: Vec<f64>,
    /// `T_max(K) / K`.
    pub avg_time_per_iter: f64,
}

/// Replays the schedule: an update on `(i, j)` starts once both endpoints
/// finished their previous update and takes `tau_ij` (plus compute time).
pub fn simulate_times(g: &Graph, s: &Schedule, model: TimeModel) -> TimingResult {
    let mut t_node = vec![0.0f64; g.n()];
    let mut t_max_at = Vec::with_capacity(s.len() + 1);
    let mut t_max = 0.0f64;
    t_max_at.push(0.0);
    for &k in &s.edges {
        let (i, j) = g.edge(k);
        let compute = if model.include_compute {
            g.delta_comp()[i].max(g.delta_comp()[j])
        } else {
            0.0
        };
        let finish = t_node[i].max(t_node[j]) + compute + g.tau()[k];
        t_node[i] = finish;
        t_node[j] = finish;
        t_max = t_max.max(finish);
        t_max_at.push(t_max);
    }
    let avg_time_per_iter = if s.is_empty() {
        0.0
    } else {
        t_max / s.len() as f64
    };
    TimingResult {
        t_node,
        t_max_at,
        avg_time_per_iter,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeBoundReport {
    pub trials: usize,
    pub iterations: usize,
    /// Monte Carlo estimate of `E[T_max(K) / K]`.
    pub tau_bar: f64,
    /// Largest node activation probability.
    pub p_bar: f64,
    pub tau_max: f64,
    /// `tau_bar / (p_bar * tau_max)`.
    pub measured_c: f64,
    pub bound_holds: bool,
    pub regular_bound_holds: bool,
    /// `n * tau_bar / tau_max`.
    pub scaled_time: f64,
}

impl TimeBoundReport {
    pub fn to_text(&self) -> String {
        format!(
            "trials = {}\niterations = {}\ntau_bar = {:.16e}\np_bar = {:.16e}\ntau_max = {:.16e}\n\
             measured_c = {:.16e}\nbound_holds = {}\nregular_bound_holds = {}\nscaled_time = {:.16e}\n",
            self.trials,
            self.iterations,
            self.tau_bar,
            self.p_bar,
            self.tau_max,
            self.measured_c,
            self.bound_holds,
            self.regular_bound_holds,
            self.scaled_time
        )
    }
}

/// Estimates the mean time per iteration over `trials` schedules seeded
/// `base_seed, base_seed + 1, ...`.
pub fn time_bound_report(g: &Graph, trials: usize, k: usize, base_seed: u64) -> TimeBoundReport {
    let trials = trials.max(1);
    let total: f64 = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = sample_schedule(g, base_seed.wrapping_add(t), k);
            simulate_times(g, &s, TimeModel::default()).avg_time_per_iter
        })
        .sum();
    let tau_bar = total / trials as f64;
    let p_bar = g.node_probabilities().into_iter().fold(0.0, f64::max);
    let tau_max = g.tau_max();
    let measured_c = tau_bar / (p_bar * tau_max);
    TimeBoundReport {
        trials,
        iterations: k,
        tau_bar,
        p_bar,
        tau_max,
        measured_c,
        bound_holds: measured_c < TIME_BOUND_GENERIC,
        regular_bound_holds: measured_c < TIME_BOUND_REGULAR,
        scaled_time: g.n() as f64 * tau_bar / tau_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, TopologyKind};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn splitmix_test_vectors() {
        let mut rng = ScheduleRng::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn single_edge_schedule() {
        let g = build_topology(TopologyKind::Path, 2).unwrap();
        let s = sample_schedule(&g, 9, 50);
        assert!(s.edges.iter().all(|&e| e == 0));
    }

    #[test]
    fn schedules_are_reproducible() {
        let g = build_topology(TopologyKind::Grid2d, 16).unwrap();
        assert_eq!(sample_schedule(&g, 42, 1000), sample_schedule(&g, 42, 1000));
        assert_ne!(sample_schedule(&g, 42, 1000), sample_schedule(&g, 43, 1000));
    }

    #[test]
    fn uniform_frequencies_within_three_sigma() {
        let g = build_topology(TopologyKind::Complete, 4).unwrap();
        let k = 600_000;
        let s = sample_schedule(&g, 2024, k);
        let mut counts = [0usize; 6];
        for &e in &s.edges {
            counts[e] += 1;
        }
        let p = 1.0 / 6.0;
        let sd = (p * (1.0 - p) / k as f64).sqrt();
        for c in counts {
            assert!((c as f64 / k as f64 - p).abs() <= 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn chi_squared_on_skewed_distribution() {
        let g = build_topology(TopologyKind::Ring, 5)
            .unwrap()
            .with_probabilities(vec![0.1, 0.15, 0.2, 0.25, 0.3])
            .unwrap();
        let k = 1_000_000;
        let s = sample_schedule(&g, 77, k);
        let mut counts = [0f64; 5];
        for &e in &s.edges {
            counts[e] += 1.0;
        }
        let chi2: f64 = counts
            .iter()
            .zip(g.p())
            .map(|(&o, &p)| (o - p * k as f64).powi(2) / (p * k as f64))
            .sum();
        // chi-squared, 4 degrees of freedom, upper 0.001 quantile
        assert!(chi2 < 18.467, "chi2 = {chi2}");
    }

    #[test]
    fn serial_chain() {
        let g = build_topology(TopologyKind::Path, 2).unwrap();
        let s = sample_schedule(&g, 0, 5);
        let r = simulate_times(&g, &s, TimeModel::default());
        assert_eq!(r.t_max_at, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(r.avg_time_per_iter, 1.0);
    }

    #[test]
    fn disjoint_edges_run_in_parallel() {
        // outer edges of a 4-path never share a node
        let g = build_topology(TopologyKind::Path, 4).unwrap();
        let s = Schedule {
            seed: 0,
            edges: (0..10).map(|k| if k % 2 == 0 { 0 } else { 2 }).collect(),
        };
        let r = simulate_times(&g, &s, TimeModel::default());
        for k in 1..=5 {
            assert_eq!(r.t_max_at[2 * k], k as f64);
        }
    }

    #[test]
    fn compute_time_flag() {
        let g = build_topology(TopologyKind::Path, 2)
            .unwrap()
            .with_compute_times(vec![0.5, 2.0])
            .unwrap();
        let s = sample_schedule(&g, 0, 3);
        let off = simulate_times(&g, &s, TimeModel::default());
        let on = simulate_times(&g, &s, TimeModel { include_compute: true });
        assert_eq!(off.t_max_at[3], 3.0);
        assert_eq!(on.t_max_at[3], 9.0);
    }

    /// Independent route: track every achievable path length per node and
    /// take the longest, with integer delays.
    fn path_length_oracle(g: &Graph, s: &Schedule) -> Vec<f64> {
        let mut lengths: Vec<BTreeSet<u64>> = vec![BTreeSet::from([0]); g.n()];
        let mut out = vec![0.0];
        for &k in &s.edges {
            let (i, j) = g.edge(k);
            let tau = g.tau()[k] as u64;
            let merged: BTreeSet<u64> = lengths[i].union(&lengths[j]).map(|w| w + tau).collect();
            lengths[i] = merged.clone();
            lengths[j] = merged;
            let t = lengths.iter().filter_map(|l| l.last()).max().copied().unwrap();
            out.push(t as f64);
        }
        out
    }

    #[test]
    fn recursion_matches_path_length_oracle() {
        for (kind, n) in [(TopologyKind::Ring, 12), (TopologyKind::Grid2d, 16), (TopologyKind::Star, 7)] {
            let g = build_topology(kind, n).unwrap();
            let m = g.num_edges();
            let g = g.with_delays((0..m).map(|k| (1 + k % 4) as f64).collect()).unwrap();
            let s = sample_schedule(&g, 5, 1000);
            let r = simulate_times(&g, &s, TimeModel::default());
            assert_eq!(r.t_max_at, path_length_oracle(&g, &s));
        }
    }

    #[test]
    fn timing_is_deterministic() {
        let g = build_topology(TopologyKind::Grid2d, 25).unwrap();
        let s = sample_schedule(&g, 3, 5000);
        assert_eq!(
            simulate_times(&g, &s, TimeModel::default()),
            simulate_times(&g, &s, TimeModel::default())
        );
    }

    #[test]
    fn star_hub_serializes() {
        let g = build_topology(TopologyKind::Star, 10).unwrap();
        let r = time_bound_report(&g, 4, 5000, 0);
        // every update involves the hub
        assert_eq!(r.tau_bar, 1.0);
        assert!(r.bound_holds);
    }

    #[test]
    fn complete_graph_node_probability() {
        let n = 8;
        let g = build_topology(TopologyKind::Complete, n).unwrap();
        let r = time_bound_report(&g, 2, 2000, 0);
        assert!((r.p_bar - 2.0 / n as f64).abs() < 1e-12);
        assert!(r.measured_c < TIME_BOUND_GENERIC);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn slower_edge_never_speeds_things_up(seed in 0u64..1000, edge in 0usize..12, extra in 0.0..3.0f64) {
            let g = build_topology(TopologyKind::Ring, 12).unwrap();
            let s = sample_schedule(&g, seed, 300);
            let base = simulate_times(&g, &s, TimeModel::default());
            let mut tau = g.tau().to_vec();
            tau[edge] += extra;
            let slow = g.clone().with_delays(tau).unwrap();
            let r = simulate_times(&slow, &s, TimeModel::default());
            prop_assert!(base.t_max_at.iter().zip(&r.t_max_at).all(|(a, b)| b >= a));
            prop_assert!(r.t_max_at.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
