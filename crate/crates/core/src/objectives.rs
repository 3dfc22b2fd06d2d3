//! Local objectives and their conjugate-gradient oracles.
//!
//! Every node holds one strongly convex, smooth `f_i`. The dual methods
//! never touch `f_i` directly; they call `grad f_i^*(z)`, the unique `x`
//! with `grad f_i(x) = z`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::spectral::Curvature;

pub const NEWTON_MAX_ITERS: usize = 100;
/// Conjugate oracle stops at `|grad| <= CONJUGATE_TOL * max(1, |z|)`.
pub const CONJUGATE_TOL: f64 = 1e-10;
/// Centralized solve stops at `|grad F| <= OPTIMUM_TOL * n`.
pub const OPTIMUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveKind {
    /// `f(x) = 1/2 |x - c|^2`.
    QuadraticConsensus { target: DVector<f64> },
    /// `f(x) = 1/2 |X^T x - y|^2 + c |x|^2`, `X` is `d x N`.
    RidgeRegression {
        features: DMatrix<f64>,
        targets: DVector<f64>,
        reg: f64,
    },
    /// `f(x) = sum_j ln(1 + exp(-y_j X_j^T x)) + c |x|^2`, labels in {-1, +1}.
    Logistic {
        features: DMatrix<f64>,
        labels: DVector<f64>,
        reg: f64,
    },
}

#[derive(Debug, Clone)]
pub struct LocalObjective {
    kind: ObjectiveKind,
    sigma: f64,
    smoothness: f64,
    dim: usize,
    /// Ridge only: Cholesky of `X X^T + 2c I` and `X y`.
    ridge: Option<(Cholesky<f64, Dyn>, DVector<f64>)>,
}

impl LocalObjective {
    pub fn quadratic(target: DVector<f64>) -> Self {
        let dim = target.len();
        Self {
            kind: ObjectiveKind::QuadraticConsensus { target },
            sigma: 1.0,
            smoothness: 1.0,
            dim,
            ridge: None,
        }
    }

    pub fn ridge(features: DMatrix<f64>, targets: DVector<f64>, reg: f64) -> Result<Self> {
        if features.ncols() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                got: targets.len(),
            });
        }
        if !(reg >= 0.0) {
            return Err(Error::InvalidObjective(format!("negative regularization {reg}")));
        }
        let dim = features.nrows();
        let gram = &features * features.transpose();
        let (lo, hi) = extreme_eigenvalues(&gram);
        let sigma = lo.max(0.0) + 2.0 * reg;
        if !(sigma > 0.0) {
            return Err(Error::InvalidObjective(
                "ridge objective is not strongly convex".into(),
            ));
        }
        let hessian = gram + DMatrix::identity(dim, dim) * (2.0 * reg);
        let chol = Cholesky::new(hessian).ok_or_else(|| {
            Error::InvalidObjective("ridge Hessian is not positive definite".into())
        })?;
        let xy = &features * &targets;
        Ok(Self {
            kind: ObjectiveKind::RidgeRegression {
                features,
                targets,
                reg,
            },
            sigma,
            smoothness: hi + 2.0 * reg,
            dim,
            ridge: Some((chol, xy)),
        })
    }

    pub fn logistic(features: DMatrix<f64>, labels: DVector<f64>, reg: f64) -> Result<Self> {
        if features.ncols() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                got: labels.len(),
            });
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidObjective("labels must be -1 or +1".into()));
        }
        if !(reg > 0.0) {
            return Err(Error::InvalidObjective(
                "logistic objective needs positive regularization".into(),
            ));
        }
        let dim = features.nrows();
        let (_, hi) = extreme_eigenvalues(&(&features * features.transpose()));
        Ok(Self {
            kind: ObjectiveKind::Logistic {
                features,
                labels,
                reg,
            },
            sigma: 2.0 * reg,
            smoothness: 0.25 * hi + 2.0 * reg,
            dim,
            ridge: None,
        })
    }

    pub fn kind(&self) -> &ObjectiveKind {
        &self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn curvature(&self) -> Curvature {
        Curvature {
            sigma: self.sigma,
            smoothness: self.smoothness,
        }
    }

    /// True when `f` is quadratic, i.e. `grad f^*` is affine.
    pub fn is_quadratic(&self) -> bool {
        !matches!(self.kind, ObjectiveKind::Logistic { .. })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match &self.kind {
            ObjectiveKind::QuadraticConsensus { target } => 0.5 * (x - target).norm_squared(),
            ObjectiveKind::RidgeRegression {
                features,
                targets,
                reg,
            } => 0.5 * (features.tr_mul(x) - targets).norm_squared() + reg * x.norm_squared(),
            ObjectiveKind::Logistic {
                features,
                labels,
                reg,
            } => {
                let margins = features.tr_mul(x).component_mul(labels);
                margins.iter().map(|&m| softplus(-m)).sum::<f64>() + reg * x.norm_squared()
            }
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            ObjectiveKind::QuadraticConsensus { target } => x - target,
            ObjectiveKind::RidgeRegression {
                features,
                targets,
                reg,
            } => features * (features.tr_mul(x) - targets) + x * (2.0 * reg),
            ObjectiveKind::Logistic {
                features,
                labels,
                reg,
            } => {
                let margins = features.tr_mul(x).component_mul(labels);
                let weights = DVector::from_iterator(
                    labels.len(),
                    margins
                        .iter()
                        .zip(labels.iter())
                        .map(|(&m, &y)| -y * sigmoid(-m)),
                );
                features * weights + x * (2.0 * reg)
            }
        }
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim;
        match &self.kind {
            ObjectiveKind::QuadraticConsensus { .. } => DMatrix::identity(d, d),
            ObjectiveKind::RidgeRegression { features, reg, .. } => {
                features * features.transpose() + DMatrix::identity(d, d) * (2.0 * reg)
            }
            ObjectiveKind::Logistic {
                features,
                labels,
                reg,
            } => {
                let margins = features.tr_mul(x).component_mul(labels);
                let mut scaled = features.clone();
                for (mut col, &m) in scaled.column_iter_mut().zip(margins.iter()) {
                    col *= sigmoid(m) * sigmoid(-m);
                }
                scaled * features.transpose() + DMatrix::identity(d, d) * (2.0 * reg)
            }
        }
    }

    /// `grad f^*(z) = argmax_x <x, z> - f(x)`.
    pub fn conjugate_gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        match &self.kind {
            ObjectiveKind::QuadraticConsensus { target } => Ok(z + target),
            ObjectiveKind::RidgeRegression { .. } => {
                let (chol, xy) = self.ridge.as_ref().expect("ridge cache");
                Ok(chol.solve(&(z + xy)))
            }
            ObjectiveKind::Logistic { .. } => {
                let tol = CONJUGATE_TOL * z.norm().max(1.0);
                newton_minimize(
                    |x| self.value(x) - x.dot(z),
                    |x| self.gradient(x) - z,
                    |x| self.hessian(x),
                    DVector::zeros(self.dim),
                    tol,
                )
            }
        }
    }

    /// `f^*(z) = <x, z> - f(x)` at `x = grad f^*(z)`.
    pub fn conjugate_value(&self, z: &DVector<f64>) -> Result<f64> {
        let x = self.conjugate_gradient(z)?;
        Ok(x.dot(z) - self.value(&x))
    }

    /// Bregman divergence `f^*(z) - f^*(z0) - <grad f^*(z0), z - z0>`,
    /// evaluated without cancellation for the quadratic families.
    pub fn conjugate_bregman(&self, z: &DVector<f64>, z0: &DVector<f64>) -> Result<f64> {
        match &self.kind {
            ObjectiveKind::QuadraticConsensus { .. } => Ok(0.5 * (z - z0).norm_squared()),
            ObjectiveKind::RidgeRegression { .. } => {
                let (chol, _) = self.ridge.as_ref().expect("ridge cache");
                let dz = z - z0;
                Ok(0.5 * dz.dot(&chol.solve(&dz)))
            }
            ObjectiveKind::Logistic { .. } => {
                // D_{f*}(z, z0) = D_f(x0, x) with x = grad f*(z)
                let x = self.conjugate_gradient(z)?;
                let x0 = self.conjugate_gradient(z0)?;
                Ok((self.value(&x0) - self.value(&x) - z.dot(&(&x0 - &x))).max(0.0))
            }
        }
    }
}

/// Free-function form of [`LocalObjective::conjugate_gradient`].
pub fn conjugate_gradient(obj: &LocalObjective, z: &DVector<f64>) -> Result<DVector<f64>> {
    obj.conjugate_gradient(z)
}

/// Free-function form of [`LocalObjective::value`].
pub fn primal_value(obj: &LocalObjective, x: &DVector<f64>) -> f64 {
    obj.value(x)
}

/// Minimizer of `F(x) = sum_i f_i(x)` over a shared `x`, plus what is
/// needed to evaluate `F(x) - F*` accurately.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub x: DVector<f64>,
    pub value: f64,
    /// `sum_i hess f_i` when every `f_i` is quadratic.
    hessian: Option<DMatrix<f64>>,
}

impl Optimum {
    /// `F(x) - F*`; exact quadratic form when available.
    pub fn suboptimality(&self, objs: &[LocalObjective], x: &DVector<f64>) -> f64 {
        match &self.hessian {
            Some(h) => {
                let dx = x - &self.x;
                0.5 * dx.dot(&(h * &dx))
            }
            None => objs.iter().map(|f| f.value(x)).sum::<f64>() - self.value,
        }
    }
}

pub fn centralized_optimum(objs: &[LocalObjective]) -> Result<Optimum> {
    let first = objs
        .first()
        .ok_or_else(|| Error::InvalidObjective("no objectives".into()))?;
    let d = first.dim();
    if let Some(bad) = objs.iter().find(|f| f.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.dim(),
        });
    }
    let zero = DVector::zeros(d);
    if objs.iter().all(LocalObjective::is_quadratic) {
        let mut h = DMatrix::zeros(d, d);
        let mut b = DVector::zeros(d);
        for f in objs {
            h += f.hessian(&zero);
            b -= f.gradient(&zero);
        }
        let chol = Cholesky::new(h.clone())
            .ok_or_else(|| Error::InvalidObjective("sum Hessian not positive definite".into()))?;
        let x = chol.solve(&b);
        let value = objs.iter().map(|f| f.value(&x)).sum();
        return Ok(Optimum {
            x,
            value,
            hessian: Some(h),
        });
    }
    let tol = OPTIMUM_TOL * objs.len() as f64;
    let x = newton_minimize(
        |x| objs.iter().map(|f| f.value(x)).sum(),
        |x| objs.iter().fold(DVector::zeros(d), |acc, f| acc + f.gradient(x)),
        |x| objs.iter().fold(DMatrix::zeros(d, d), |acc, f| acc + f.hessian(x)),
        zero,
        tol,
    )?;
    let value = objs.iter().map(|f| f.value(&x)).sum();
    Ok(Optimum {
        x,
        value,
        hessian: None,
    })
}

/// Damped Newton on a smooth strongly convex function.
fn newton_minimize(
    value: impl Fn(&DVector<f64>) -> f64,
    gradient: impl Fn(&DVector<f64>) -> DVector<f64>,
    hessian: impl Fn(&DVector<f64>) -> DMatrix<f64>,
    mut x: DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    let mut grad = gradient(&x);
    for _ in 0..NEWTON_MAX_ITERS {
        let gnorm = grad.norm();
        if gnorm <= tol {
            return Ok(x);
        }
        let Some(chol) = Cholesky::new(hessian(&x)) else {
            break;
        };
        let step = chol.solve(&grad);
        let slope = grad.dot(&step);
        // near the optimum the full step is taken; value differences are
        // below rounding there and Armijo would stall
        let mut t = 1.0;
        let f0 = value(&x);
        if gnorm > 1e3 * tol && slope > 1e-10 * f0.abs().max(1.0) {
            while t > 1e-12 && value(&(&x - &step * t)) > f0 - 1e-4 * t * slope {
                t *= 0.5;
            }
        }
        x -= &step * t;
        grad = gradient(&x);
        if !grad.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    let residual = grad.norm();
    if residual <= tol {
        return Ok(x);
    }
    Err(Error::NewtonDiverged {
        iterations: NEWTON_MAX_ITERS,
        residual,
    })
}

fn extreme_eigenvalues(sym: &DMatrix<f64>) -> (f64, f64) {
    let values = sym.clone().symmetric_eigenvalues();
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
