//! Penalty reformulation for a general last block.
//!
//! The problem `min f(x) + sum_i r_i(x_i)` s.t. `sum_i A_i x_i = b` is replaced
//! by `min f(x) + sum_i r_i(x_i) + (mu/2)||y||^2` s.t. `sum_i A_i x_i + y = b`,
//! which the majorization ADMM handles with `y` as the last block.

use std::sync::Arc;

use super::{admm_m_step_with, AdmmConfig, AdmmState, MajorizationData, StopReason, SubproblemMode};
use crate::block::{eval_aug_lagrangian, Affine, BlockVector, ProblemSpec, Quadratic, SmoothFunction};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::subproblem::ProxMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltySchedule {
    /// `mu = 1/eps`, `beta = 3/eps`, `K = 1/eps^4`.
    Standard,
    /// `mu = 1/eps^2`, `beta = 3/eps^2`, `K = 1/eps^6`.
    Fallback,
}

impl PenaltySchedule {
    pub fn mu(&self, eps: f64) -> f64 {
        match self {
            PenaltySchedule::Standard => 1.0 / eps,
            PenaltySchedule::Fallback => 1.0 / (eps * eps),
        }
    }

    pub fn beta(&self, eps: f64) -> f64 {
        3.0 * self.mu(eps)
    }

    pub fn iterations(&self, eps: f64) -> usize {
        let k = match self {
            PenaltySchedule::Standard => eps.powi(-4),
            PenaltySchedule::Fallback => eps.powi(-6),
        };
        let k = (k * (1.0 - 1e-12)).ceil();
        if k >= usize::MAX as f64 {
            usize::MAX
        } else {
            k as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    /// One metric per original block.
    pub metrics: Vec<ProxMetric>,
    pub schedule: PenaltySchedule,
    /// Upper limit on the scheduled iteration count.
    pub max_iters: Option<usize>,
    pub eps_theta: f64,
    pub mode: SubproblemMode,
}

impl PenaltyConfig {
    pub fn new(metrics: Vec<ProxMetric>, schedule: PenaltySchedule) -> Self {
        PenaltyConfig {
            metrics,
            schedule,
            max_iters: None,
            eps_theta: 0.0,
            mode: SubproblemMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyResult {
    /// Original blocks at `k_hat + 1`.
    pub x: BlockVector,
    pub y: Vector,
    pub lambda: Vector,
    pub mu: f64,
    pub beta: f64,
    pub iters: usize,
    pub best_k: usize,
    /// `||sum_i A_i x_i + y - b||` at the returned point.
    pub augmented_residual: f64,
    /// `||sum_i A_i x_i - b||` at the returned point.
    pub constraint_residual: f64,
    /// `sum_i ||x_i^k - x_i^{k+1}||^2 + ||y^k - y^{k+1}||^2`.
    pub theta: Vec<f64>,
    /// Augmented Lagrangian after each iteration.
    pub lagrangian: Vec<f64>,
    /// Largest `||mu y^k - lambda^k||` seen at `k >= 1`.
    pub max_multiplier_gap: f64,
    pub stop: StopReason,
}

/// `f(x) + (mu/2)||y||^2` for a non-quadratic `f`.
#[derive(Debug)]
struct WithSlack {
    inner: Arc<dyn SmoothFunction>,
    mu: f64,
    dims: Vec<usize>,
}

impl WithSlack {
    fn split(&self, x: &BlockVector) -> BlockVector {
        let n = self.dims.len() - 1;
        BlockVector::from_blocks_unchecked(x.blocks()[..n].to_vec())
    }
}

impl SmoothFunction for WithSlack {
    fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn value(&self, x: &BlockVector) -> f64 {
        self.inner.value(&self.split(x)) + 0.5 * self.mu * x.last().norm_squared()
    }

    fn grad_block(&self, x: &BlockVector, i: usize) -> Vector {
        if i == self.dims.len() - 1 {
            x.last() * self.mu
        } else {
            self.inner.grad_block(&self.split(x), i)
        }
    }

    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz().max(self.mu)
    }
}

fn augmented_problem(p: &ProblemSpec, mu: f64, mode: SubproblemMode) -> Result<ProblemSpec> {
    let a = p.require_affine()?;
    let n = p.num_blocks();
    let m = a.rows();
    let mut dims = p.dims().to_vec();
    dims.push(m);
    let f: Arc<dyn SmoothFunction> = match p.f().as_quadratic() {
        Some(q) => {
            let tot = q.q().nrows();
            let mut big = Matrix::zeros(tot + m, tot + m);
            big.view_mut((0, 0), (tot, tot)).copy_from(q.q());
            big.view_mut((tot, tot), (m, m)).fill_diagonal(mu);
            let mut c = Vector::zeros(tot + m);
            c.rows_mut(0, tot).copy_from(q.c());
            Arc::new(Quadratic::new(big, c, q.offset(), dims)?)
        }
        None => Arc::new(WithSlack {
            inner: p.f_arc(),
            mu,
            dims,
        }),
    };
    let mut mats = a.mats().to_vec();
    mats.push(Matrix::identity(m, m));
    let aug = ProblemSpec::new(
        f,
        p.regs()[..n].to_vec(),
        p.sets()[..n].to_vec(),
        Some(Affine::new(mats, a.b().clone())?),
        p.setting(),
    )?
    .with_f_star(p.f_star());
    match mode {
        SubproblemMode::Linearized => Ok(aug),
        SubproblemMode::Exact if aug.f().as_quadratic().is_some() => aug.with_quadratic_block_solvers(),
        SubproblemMode::Exact => Err(Error::UnsupportedPairing(
            "exact penalty subproblems need a quadratic coupling; use linearized mode".into(),
        )),
    }
}

/// Runs the majorization ADMM on the penalized problem from `x0` with
/// `y = lambda = 0`; `x0` must satisfy the constraint.
///
/// The multiplier-growth condition on the subdifferentials under which the
/// returned point is stationary for the original problem is not checked.
pub fn penalty_solve(p: &ProblemSpec, x0: &BlockVector, eps: f64, cfg: &PenaltyConfig) -> Result<PenaltyResult> {
    let a = p.require_affine()?;
    let n = p.num_blocks();
    x0.check_dims(p.dims())?;
    check_dim("number of metrics", n, cfg.metrics.len())?;
    let l = p.f().lipschitz();
    let tau_bar = 0.5 * cfg.metrics.iter().map(|h| h.sigma_min()).fold(f64::INFINITY, f64::min);
    let cap = (1.0 / l).min(1.0 / (6.0 * tau_bar));
    if !(eps > 0.0 && eps < cap) {
        return Err(invalid("eps", format!("must lie in (0, {cap}), got {eps}")));
    }
    let r0 = a.residual(x0).norm();
    if r0 > 1e-8 * a.b().norm().max(1.0) {
        return Err(Error::Infeasible(format!(
            "starting point violates the constraint by {r0:e}"
        )));
    }
    let mu = cfg.schedule.mu(eps);
    let beta = cfg.schedule.beta(eps);
    let aug = augmented_problem(p, mu, cfg.mode)?;
    let m = a.rows();
    let mut blocks = x0.blocks().to_vec();
    blocks.push(Vector::zeros(m));
    let z0 = BlockVector::from_blocks_unchecked(blocks);
    let admm = AdmmConfig {
        beta,
        gamma: 1.0,
        metrics: cfg.metrics.clone(),
        max_iters: 0,
        eps_theta: cfg.eps_theta,
        mode: cfg.mode,
        lipschitz: Some(mu),
    };
    let md = MajorizationData::new(&aug, &admm)?;
    let iters = cfg
        .max_iters
        .map_or(cfg.schedule.iterations(eps), |c| c.min(cfg.schedule.iterations(eps)));
    let mut state = AdmmState::initial(&aug, z0, Vector::zeros(m), beta)?;
    let mut best: (usize, f64, AdmmState) = (0, f64::INFINITY, state.clone());
    let mut theta = Vec::new();
    let mut lagrangian = Vec::new();
    let mut gap = 0.0_f64;
    let mut stop = StopReason::MaxIters;
    for k in 0..iters {
        let next = admm_m_step_with(&aug, &state, &admm, &md)?;
        let th = next.x.dist_sq(&state.x);
        theta.push(th);
        lagrangian.push(eval_aug_lagrangian(&aug, &next.x, &next.lambda, beta)?);
        gap = gap.max((next.x.last() * mu - &next.lambda).norm());
        state = next;
        if th < best.1 {
            best = (k, th, state.clone());
        }
        if th <= cfg.eps_theta {
            stop = StopReason::Theta;
            break;
        }
    }
    let (best_k, _, sel) = best;
    let x = BlockVector::from_blocks_unchecked(sel.x.blocks()[..n].to_vec());
    let y = sel.x.last().clone();
    let constraint_residual = a.residual(&x).norm();
    let augmented_residual = (a.residual(&x) + &y).norm();
    Ok(PenaltyResult {
        x,
        y,
        lambda: sel.lambda,
        mu,
        beta,
        iters: theta.len(),
        best_k,
        augmented_residual,
        constraint_residual,
        theta,
        lagrangian,
        max_multiplier_gap: gap,
        stop,
    })
}
