//! A problem instance: graph, local objectives, and everything derived from
//! them once up front.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{incidence, Graph, IncidenceMatrix};
use crate::objectives::{centralized_optimum, LocalObjective, Optimum};
use crate::spectral::{compute_params_with, edge_projector, gram_spectrum, GramSpectrum, SpectralParams};

#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: Graph,
    pub incidence: IncidenceMatrix,
    pub spectrum: GramSpectrum,
    pub params: SpectralParams,
    pub objectives: Vec<LocalObjective>,
    pub optimum: Optimum,
}

impl Instance {
    pub fn new(graph: Graph, objectives: Vec<LocalObjective>) -> Result<Self> {
        if objectives.len() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                got: objectives.len(),
            });
        }
        let a = incidence(&graph);
        let spectrum = gram_spectrum(&a)?;
        let curvature: Vec<_> = objectives.iter().map(LocalObjective::curvature).collect();
        let params = compute_params_with(&graph, &a, &spectrum, &curvature)?;
        let optimum = centralized_optimum(&objectives)?;
        Ok(Self {
            graph,
            incidence: a,
            spectrum,
            params,
            objectives,
            optimum,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn dim(&self) -> usize {
        self.optimum.x.len()
    }

    /// Primal estimates `theta_i = grad f_i^*(w_i)` for node duals `w`.
    pub fn primal_estimates(&self, duals: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        self.objectives
            .iter()
            .zip(duals)
            .map(|(f, w)| f.conjugate_gradient(w))
            .collect()
    }

    /// `(max_i F(theta_i) - F*, sum_i |theta_i - x*|^2)`.
    pub fn errors(&self, estimates: &[DVector<f64>]) -> (f64, f64) {
        let mut max_subopt = f64::NEG_INFINITY;
        let mut dist = 0.0;
        for theta in estimates {
            max_subopt = max_subopt.max(self.optimum.suboptimality(&self.objectives, theta));
            dist += (theta - &self.optimum.x).norm_squared();
        }
        (max_subopt, dist)
    }

    /// Node-space dual optimum `A x*`: row `i` is `grad f_i(x_opt)`.
    pub fn node_dual_optimum(&self) -> Vec<DVector<f64>> {
        self.objectives
            .iter()
            .map(|f| f.gradient(&self.optimum.x))
            .collect()
    }

    /// Minimum-norm edge-space dual optimum `x* = A^+ (A x*)`.
    pub fn edge_dual_optimum(&self) -> Vec<DVector<f64>> {
        let nodes = stack(&self.node_dual_optimum());
        let edge = self.incidence.matrix.transpose() * (&self.spectrum.pinv * nodes);
        unstack(&edge)
    }

    /// `A^+ A` as an `E x E` matrix.
    pub fn edge_projector(&self) -> DMatrix<f64> {
        edge_projector(&self.incidence, &self.spectrum)
    }

    /// `(A w)_i` for edge-space rows `w`, using the sparse incidence pattern.
    pub fn apply_incidence(&self, w: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let d = w.first().map_or(self.dim(), |r| r.len());
        let mut out = vec![DVector::zeros(d); self.n()];
        for (k, &(i, j)) in self.graph.edges().iter().enumerate() {
            let mu = self.graph.mu()[k];
            out[i].axpy(mu, &w[k], 1.0);
            out[j].axpy(-mu, &w[k], 1.0);
        }
        out
    }
}

/// Rows to an `m x d` matrix.
pub fn stack(rows: &[DVector<f64>]) -> DMatrix<f64> {
    let d = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c])
}

pub fn unstack(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    m.row_iter().map(|r| r.transpose()).collect()
}
