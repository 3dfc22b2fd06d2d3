//! Error metrics and emitted rows.

use nalgebra::DVector;

use crate::objectives::{LocalObjective, Optimum};
use crate::trace::RunTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// `max_i F(theta_i) - F*`.
    MaxSuboptimality,
    /// `sum_i |theta_i - x*|^2`.
    Consensus,
}

pub fn error_metric(
    estimates: &[DVector<f64>],
    objs: &[LocalObjective],
    optimum: &Optimum,
    metric: Metric,
) -> f64 {
    match metric {
        Metric::MaxSuboptimality => estimates
            .iter()
            .map(|x| optimum.suboptimality(objs, x))
            .fold(f64::NEG_INFINITY, f64::max),
        Metric::Consensus => estimates.iter().map(|x| (x - &optimum.x).norm_squared()).sum(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub algorithm: String,
    pub seed: u64,
    pub t: usize,
    pub sim_time: f64,
    pub error: f64,
    pub messages: u64,
    pub gradients: u64,
}

pub const ROW_HEADER: &str = "algorithm,seed,t,sim_time,error,messages,gradients";

impl MetricRow {
    pub fn from_trace(trace: &RunTrace, metric: Metric) -> Vec<MetricRow> {
        trace
            .records
            .iter()
            .map(|r| MetricRow {
                algorithm: trace.algorithm.clone(),
                seed: trace.seed,
                t: r.t,
                sim_time: r.sim_time,
                error: match metric {
                    Metric::MaxSuboptimality => r.max_subopt,
                    Metric::Consensus => r.consensus_err,
                },
                messages: r.messages,
                gradients: r.gradients,
            })
            .collect()
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{:.16e},{:.16e},{},{}",
            self.algorithm, self.seed, self.t, self.sim_time, self.error, self.messages, self.gradients
        )
    }
}
