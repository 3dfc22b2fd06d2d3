//! Spectral quantities of the incidence matrix and the step sizes and rate
//! derived from them.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{incidence, Graph, IncidenceMatrix};

/// Eigenvalues below `KERNEL_REL_TOL * lambda_max` count as kernel.
pub const KERNEL_REL_TOL: f64 = 1e-9;

/// Absolute symmetry tolerance, scaled by `max(1, max |W_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: DVector<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl Eigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest eigenvalue above the kernel threshold.
    pub fn min_positive(&self) -> Option<f64> {
        let cut = KERNEL_REL_TOL * self.max();
        self.values.iter().cloned().find(|&v| v > cut)
    }

    pub fn rank(&self) -> usize {
        let cut = KERNEL_REL_TOL * self.max();
        self.values.iter().filter(|&&v| v > cut).count()
    }
}

pub fn eigen_laplacian(w: &DMatrix<f64>) -> Result<Eigen> {
    if !w.is_square() {
        return Err(Error::NotSymmetric(f64::INFINITY));
    }
    let scale = w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let asym = (w - w.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (w + w.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).into_owned())
            .collect::<Vec<_>>(),
    );
    Ok(Eigen { values, vectors })
}

/// Spectrum of `A A^T` together with its pseudo-inverse.
#[derive(Debug, Clone)]
pub struct GramSpectrum {
    pub eigen: Eigen,
    /// `(A A^T)^+`.
    pub pinv: DMatrix<f64>,
    pub lambda_min_plus: f64,
    pub lambda_max: f64,
}

/// Decomposes `A A^T`; fails unless `rank(A) = n - 1`.
pub fn gram_spectrum(a: &IncidenceMatrix) -> Result<GramSpectrum> {
    let n = a.matrix.nrows();
    let eigen = eigen_laplacian(&a.gram_nodes())?;
    let rank = eigen.rank();
    if rank != n - 1 {
        return Err(Error::RankDeficient {
            rank,
            expected: n - 1,
        });
    }
    let cut = KERNEL_REL_TOL * eigen.max();
    let mut pinv = DMatrix::zeros(n, n);
    for (k, &lambda) in eigen.values.iter().enumerate() {
        if lambda > cut {
            let u = eigen.vectors.column(k);
            pinv += (u * u.transpose()) / lambda;
        }
    }
    let lambda_min_plus = eigen.min_positive().unwrap_or(0.0);
    let lambda_max = eigen.max();
    Ok(GramSpectrum {
        eigen,
        pinv,
        lambda_min_plus,
        lambda_max,
    })
}

/// `A^+ A = A^T (A A^T)^+ A`, the orthogonal projector onto `Ker(A)^perp`.
pub fn edge_projector(a: &IncidenceMatrix, spectrum: &GramSpectrum) -> DMatrix<f64> {
    a.matrix.transpose() * &spectrum.pinv * &a.matrix
}

/// `e_ij^T A^+ A e_ij` for every edge.
pub fn projector_diagonals(a: &IncidenceMatrix) -> Result<Vec<f64>> {
    let spectrum = gram_spectrum(a)?;
    Ok(diagonals_from(a, &spectrum))
}

fn diagonals_from(a: &IncidenceMatrix, spectrum: &GramSpectrum) -> Vec<f64> {
    let pa = &spectrum.pinv * &a.matrix;
    a.matrix
        .column_iter()
        .zip(pa.column_iter())
        .map(|(col, pcol)| col.dot(&pcol))
        .collect()
}

/// Per-node strong convexity and smoothness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub sigma: f64,
    pub smoothness: f64,
}

impl Curvature {
    pub const UNIT: Self = Self {
        sigma: 1.0,
        smoothness: 1.0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralParams {
    /// Smallest nonzero eigenvalue of `A^T A` (equivalently of `A A^T`).
    pub lambda_min_plus: f64,
    /// Largest eigenvalue of `A A^T`.
    pub lambda_max: f64,
    /// `e_ij^T A^+ A e_ij` per edge.
    pub proj_diag: Vec<f64>,
    /// Strong convexity of the dual objective on `Ker(A)^perp`.
    pub sigma_a: f64,
    /// `S`, with `S^2` the largest rescaled edge smoothness.
    pub s: f64,
    pub theta: f64,
    pub delta: f64,
    /// Per-edge step size on `y`.
    pub eta: Vec<f64>,
    /// `lambda_min_plus / lambda_max`.
    pub gamma: f64,
}

impl SpectralParams {
    /// `B = [[1 - theta, theta], [delta, 1 - delta]]`.
    pub fn contraction(&self) -> [[f64; 2]; 2] {
        [
            [1.0 - self.theta, self.theta],
            [self.delta, 1.0 - self.delta],
        ]
    }

    /// Key-value dump with 17 significant digits.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let scalars = [
            ("lambda_min_plus", self.lambda_min_plus),
            ("lambda_max", self.lambda_max),
            ("gamma", self.gamma),
            ("sigma_a", self.sigma_a),
            ("s", self.s),
            ("theta", self.theta),
            ("delta", self.delta),
        ];
        for (k, v) in scalars {
            let _ = writeln!(out, "{k} = {v:.16e}");
        }
        for (k, v) in self.proj_diag.iter().enumerate() {
            let _ = writeln!(out, "proj_diag[{k}] = {v:.16e}");
        }
        for (k, v) in self.eta.iter().enumerate() {
            let _ = writeln!(out, "eta[{k}] = {v:.16e}");
        }
        out
    }
}

/// Computes the rate and step sizes for graph `g` (with its own `mu`, `p`)
/// and per-node curvature.
pub fn compute_params(g: &Graph, curvature: &[Curvature]) -> Result<SpectralParams> {
    let a = incidence(g);
    let spectrum = gram_spectrum(&a)?;
    compute_params_with(g, &a, &spectrum, curvature)
}

pub fn compute_params_with(
    g: &Graph,
    a: &IncidenceMatrix,
    spectrum: &GramSpectrum,
    curvature: &[Curvature],
) -> Result<SpectralParams> {
    if curvature.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: curvature.len(),
        });
    }
    for (i, c) in curvature.iter().enumerate() {
        if !(c.sigma > 0.0 && c.smoothness >= c.sigma && c.smoothness.is_finite()) {
            return Err(Error::InvalidObjective(format!(
                "node {i}: need 0 < sigma <= L, got sigma = {}, L = {}",
                c.sigma, c.smoothness
            )));
        }
    }
    let proj_diag = diagonals_from(a, spectrum);
    let l_max = curvature.iter().map(|c| c.smoothness).fold(0.0, f64::max);
    let sigma_a = spectrum.lambda_min_plus / l_max;

    let inv_sum = |i: usize, j: usize| 1.0 / curvature[i].sigma + 1.0 / curvature[j].sigma;
    let mut s2 = 0.0f64;
    let mut theta2 = f64::INFINITY;
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        let (mu2, p) = (g.mu()[k].powi(2), g.p()[k]);
        s2 = s2.max(proj_diag[k] * mu2 * inv_sum(i, j) / (p * p));
        theta2 = theta2.min(p * p / (mu2 * proj_diag[k]) * sigma_a / inv_sum(i, j));
    }
    let mut theta = theta2.sqrt();
    if !(theta > 0.0 && theta <= 1.0 + 1e-9) {
        return Err(Error::InvalidRate(theta));
    }
    theta = theta.min(1.0);
    let delta = theta * (1.0 - theta) / (1.0 + theta);
    let eta = g
        .edges()
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let mu2 = g.mu()[k].powi(2);
            (1.0 / (mu2 * inv_sum(i, j)) + 1.0 / (g.p()[k] * s2)) / (1.0 + theta)
        })
        .collect();

    Ok(SpectralParams {
        lambda_min_plus: spectrum.lambda_min_plus,
        lambda_max: spectrum.lambda_max,
        proj_diag,
        sigma_a,
        s: s2.sqrt(),
        theta,
        delta,
        eta,
        gamma: spectrum.lambda_min_plus / spectrum.lambda_max,
    })
}

/// Rate of pairwise randomized gossip: `lambda_min^+` of the expected
/// averaging matrix `sum_ij p_ij (e_i - e_j)(e_i - e_j)^T / 2`.
pub fn gossip_rate(g: &Graph) -> Result<f64> {
    let mut w = DMatrix::zeros(g.n(), g.n());
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        let h = 0.5 * g.p()[k];
        w[(i, i)] += h;
        w[(j, j)] += h;
        w[(i, j)] -= h;
        w[(j, i)] -= h;
    }
    eigen_laplacian(&w)?
        .min_positive()
        .ok_or(Error::Disconnected)
}
