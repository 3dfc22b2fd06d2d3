//! Per-run iteration traces and their CSV form.

use std::fmt::Write as _;

pub const CSV_HEADER: &str = "t,sim_time,max_subopt,consensus_err,lyapunov";
pub const CSV_HEADER_WITH_RESOURCES: &str =
    "t,sim_time,max_subopt,consensus_err,lyapunov,messages,gradients";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub sim_time: f64,
    /// `max_i F(theta_i) - F*`.
    pub max_subopt: f64,
    /// `sum_i |theta_i - x*|^2`; for averaging this is the consensus error.
    pub consensus_err: f64,
    pub lyapunov: Option<f64>,
    /// Cumulative point-to-point messages.
    pub messages: u64,
    /// Cumulative conjugate-gradient oracle calls.
    pub gradients: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub algorithm: String,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn new(algorithm: impl Into<String>, seed: u64) -> Self {
        Self {
            algorithm: algorithm.into(),
            seed,
            records: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Last record whose simulated time does not exceed `time`.
    pub fn at_time(&self, time: f64) -> Option<&TraceRecord> {
        self.records.iter().take_while(|r| r.sim_time <= time).last()
    }

    pub fn to_csv(&self) -> String {
        self.render(false)
    }

    pub fn to_csv_with_resources(&self) -> String {
        self.render(true)
    }

    fn render(&self, resources: bool) -> String {
        let mut out = String::new();
        out.push_str(if resources {
            CSV_HEADER_WITH_RESOURCES
        } else {
            CSV_HEADER
        });
        out.push('\n');
        for r in &self.records {
            let lyap = r.lyapunov.map(|l| format!("{l:.16e}")).unwrap_or_default();
            let _ = write!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{}",
                r.t, r.sim_time, r.max_subopt, r.consensus_err, lyap
            );
            if resources {
                let _ = write!(out, ",{},{}", r.messages, r.gradients);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut trace = RunTrace::new("esdacd", 3);
        trace.records.push(TraceRecord {
            t: 0,
            sim_time: 0.0,
            max_subopt: 1.5,
            consensus_err: 0.25,
            lyapunov: None,
            messages: 0,
            gradients: 0,
        });
        trace.records.push(TraceRecord {
            t: 10,
            sim_time: 2.0,
            max_subopt: 0.5,
            consensus_err: 0.125,
            lyapunov: Some(1.0),
            messages: 20,
            gradients: 20,
        });
        let csv = trace.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].ends_with(','));
        assert_eq!(lines[2].split(',').count(), 5);
        let wide = trace.to_csv_with_resources();
        assert!(wide.lines().nth(2).unwrap().ends_with(",20,20"));
        assert_eq!(trace.at_time(1.0).unwrap().t, 0);
        assert_eq!(trace.at_time(5.0).unwrap().t, 10);
    }
}
