//! Block subproblems of the augmented Lagrangian and their solvers.

use std::fmt::Debug;

use crate::block::{BlockVector, ConstraintSet, ProblemSpec, Regularizer, RegularizerKind};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{scalar_identity_coefficient, spectral_norm, sym_min_eigenvalue, Matrix, SpdFactor, Vector};
use crate::prox::project_ball;

/// Symmetric positive definite proximal metric `H_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxMetric {
    matrix: Matrix,
    sigma_min: f64,
    norm: f64,
    iso: Option<f64>,
}

impl ProxMetric {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() || matrix.is_empty() {
            return Err(invalid("H", "must be a nonempty square matrix"));
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        if asym > 1e-12 * matrix.abs().max().max(1.0) {
            return Err(invalid("H", "must be symmetric"));
        }
        SpdFactor::new(&matrix)?;
        let sigma_min = sym_min_eigenvalue(&matrix)?;
        let norm = spectral_norm(&matrix);
        let iso = scalar_identity_coefficient(&matrix, 0.0);
        Ok(ProxMetric {
            matrix,
            sigma_min,
            norm,
            iso,
        })
    }

    /// `h * I` of size `dim`.
    pub fn scaled_identity(dim: usize, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("H", format!("scale must be positive, got {h}")));
        }
        Self::new(Matrix::identity(dim, dim) * h)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// `Some(h)` when the metric is exactly `h * I`.
    pub fn isotropic(&self) -> Option<f64> {
        self.iso
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        match self.iso {
            Some(h) => v * h,
            None => &self.matrix * v,
        }
    }
}

/// Subproblem for block `i`:
///
/// `min_{x_i in X_i} f(.., x_i, ..) + r_i(x_i) - lambda'(Ax - b) + (beta/2)||Ax - b||^2 + 0.5||x_i - x_i^k||_H^2`
///
/// with every other block fixed at its value in `point`, and `x_i^k = point.block(i)`.
/// Without an affine part the multiplier and penalty terms vanish.
#[derive(Debug, Clone, Copy)]
pub struct BlockSubproblem<'a> {
    pub problem: &'a ProblemSpec,
    pub block: usize,
    pub point: &'a BlockVector,
    pub multiplier: Option<&'a Vector>,
    pub beta: f64,
    pub metric: &'a ProxMetric,
}

impl<'a> BlockSubproblem<'a> {
    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.problem.dims()[self.block];
        check_dim(format!("metric of block {}", self.block), n, self.metric.dim())?;
        if let (Some(a), Some(l)) = (self.problem.affine(), self.multiplier) {
            check_dim("multiplier", a.rows(), l.len())?;
        }
        Ok(())
    }

    fn with_block(&self, xi: &Vector) -> BlockVector {
        let mut blocks = self.point.blocks().to_vec();
        blocks[self.block] = xi.clone();
        BlockVector::from_blocks_unchecked(blocks)
    }

    /// `sum_{j != i} A_j x_j - b`, or `None` without an affine part.
    pub fn other_residual(&self) -> Option<Vector> {
        self.problem.affine().map(|a| {
            let mut r = -a.b().clone();
            for (j, xj) in self.point.blocks().iter().enumerate() {
                if j != self.block {
                    r += a.mat(j) * xj;
                }
            }
            r
        })
    }

    fn anchor(&self) -> &Vector {
        self.point.block(self.block)
    }

    /// Gradient of the smooth part of the subproblem at `xi`.
    pub fn smooth_gradient(&self, xi: &Vector) -> Vector {
        let i = self.block;
        let mut g = self.problem.f().grad_block(&self.with_block(xi), i);
        if let (Some(a), Some(s)) = (self.problem.affine(), self.other_residual()) {
            let ai = a.mat(i);
            let r = ai * xi + s;
            let mut dual = r * self.beta;
            if let Some(l) = self.multiplier {
                dual -= l;
            }
            g += ai.transpose() * dual;
        }
        g + self.metric.apply(&(xi - self.anchor()))
    }

    /// Full subproblem objective at `xi`, constant terms included.
    pub fn objective(&self, xi: &Vector) -> f64 {
        let i = self.block;
        let mut v = self.problem.f().value(&self.with_block(xi)) + self.problem.reg(i).value(xi);
        if let (Some(a), Some(s)) = (self.problem.affine(), self.other_residual()) {
            let r = a.mat(i) * xi + s;
            if let Some(l) = self.multiplier {
                v -= l.dot(&r);
            }
            v += 0.5 * self.beta * r.norm_squared();
        }
        let d = xi - self.anchor();
        v + 0.5 * d.dot(&self.metric.apply(&d))
    }
}

/// New block value plus, when available, a subgradient `g_i` of `r_i` at it
/// certified by the subproblem's optimality condition.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUpdate {
    pub value: Vector,
    pub subgradient: Option<Vector>,
}

/// Exact solver of a [`BlockSubproblem`].
pub trait BlockSolver: Send + Sync + Debug {
    fn solve(&self, sub: &BlockSubproblem<'_>) -> Result<BlockUpdate>;
}

/// `argmin_{x in X} r(x) + (w/2)||x - v||^2` for the supported pairings.
pub(crate) fn prox_on_set(
    reg: &dyn Regularizer,
    set: &ConstraintSet,
    v: &Vector,
    w: f64,
) -> Result<BlockUpdate> {
    match set {
        ConstraintSet::Whole { .. } => {
            let x = reg.prox(v, w);
            let g = (v - &x) * w;
            Ok(BlockUpdate {
                value: x,
                subgradient: Some(g),
            })
        }
        ConstraintSet::Box { lo, hi } => reg
            .prox_box(v, w, lo, hi)
            .map(|x| BlockUpdate {
                value: x,
                subgradient: None,
            })
            .ok_or_else(|| Error::UnsupportedPairing(format!("{reg:?} with a box constraint"))),
        ConstraintSet::Ball { radius, .. } => {
            match reg.kind() {
                RegularizerKind::Zero => Ok(BlockUpdate {
                    value: project_ball(v, *radius),
                    subgradient: None,
                }),
                // the l1 prox commutes with radial shrinking
                RegularizerKind::L1 { weight } => Ok(BlockUpdate {
                    value: project_ball(&v.map(|t| t.signum() * (t.abs() - weight / w).max(0.0)), *radius),
                    subgradient: None,
                }),
                RegularizerKind::Other => Err(Error::UnsupportedPairing(format!(
                    "{reg:?} with a ball constraint"
                ))),
            }
        }
    }
}

/// Closed-form block solver for a [`crate::block::Quadratic`] coupling.
///
/// When the block Hessian `Q_ii + beta A_i'A_i + H_i` is a multiple of the
/// identity the update is a single proximal step on `r_i`; otherwise an
/// unregularized, unconstrained block is solved by Cholesky.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadraticBlockSolver;

impl BlockSolver for QuadraticBlockSolver {
    fn solve(&self, sub: &BlockSubproblem<'_>) -> Result<BlockUpdate> {
        sub.validate()?;
        let p = sub.problem;
        let i = sub.block;
        let quad = p.f().as_quadratic().ok_or_else(|| {
            Error::UnsupportedPairing("quadratic block solver on a non-quadratic coupling".into())
        })?;
        let xk = sub.anchor();
        let mut k = quad.block_q(i, i) + sub.metric.matrix();
        if let Some(a) = p.affine() {
            let ai = a.mat(i);
            k += ai.transpose() * ai * sub.beta;
        }
        // the linear term q of 0.5 x'Kx + q'x
        let q = sub.smooth_gradient(xk) - &k * xk;
        let reg = p.reg(i);
        let set = p.set(i);
        let tol = 1e-12 * k.abs().max().max(1.0);
        if let Some(kappa) = scalar_identity_coefficient(&k, tol) {
            if !(kappa > 0.0) {
                return Err(Error::Assumption(format!(
                    "block {i} subproblem is not strongly convex"
                )));
            }
            return prox_on_set(reg, set, &(-&q / kappa), kappa);
        }
        if reg.kind() == RegularizerKind::Zero && set.is_whole_space() {
            let fac = SpdFactor::new(&k)?;
            let x = fac.solve(&(-q));
            return Ok(BlockUpdate {
                subgradient: Some(Vector::zeros(x.len())),
                value: x,
            });
        }
        Err(Error::UnsupportedPairing(format!(
            "block {i}: non-isotropic block Hessian with {reg:?} over {set:?}"
        )))
    }
}

/// One proximal-gradient step on the linearized subproblem; needs `H_i = eta I`.
pub fn linearized_block_update(sub: &BlockSubproblem<'_>) -> Result<BlockUpdate> {
    sub.validate()?;
    let eta = sub.metric.isotropic().ok_or_else(|| {
        Error::UnsupportedPairing("linearized updates need an isotropic metric".into())
    })?;
    let xk = sub.anchor();
    // the metric term vanishes at the anchor
    let g = sub.smooth_gradient(xk);
    let i = sub.block;
    prox_on_set(sub.problem.reg(i), sub.problem.set(i), &(xk - g / eta), eta)
}

/// Smallest isotropic metric making the linearized model a majorizer.
pub fn linearized_metric_scale(p: &ProblemSpec, i: usize, beta: f64, margin: f64) -> f64 {
    let a_norm = p.affine().map_or(0.0, |a| spectral_norm(a.mat(i)));
    p.f().lipschitz() + beta * a_norm * a_norm + margin
}
