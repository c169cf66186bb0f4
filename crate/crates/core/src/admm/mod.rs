//! Proximal ADMM variants and proximal block coordinate descent.
//!
//! Both ADMM variants work on `min f(x) + sum_{i<N} r_i(x_i)` subject to
//! `sum_i A_i x_i = b` with an unregularized, unconstrained last block. The
//! gradient variant ([`Variant::G`]) needs `A_N = I` and takes a gradient step
//! on `x_N`; the majorization variant ([`Variant::M`]) needs `A_N` of full row
//! rank and minimizes a quadratic majorizer in `x_N`.

mod bcd;
mod params;
mod penalty;

pub use bcd::{dummy_block_reformulation, proximal_bcd_solve, proximal_bcd_step, BcdResult};
pub use params::{
    admm_g_gamma_interval, admm_g_params, admm_iteration_bound, admm_m_params, bcd_constants, bcd_params,
    complexity_constants, sigma_n, ComplexityConstants, ConstantInputs, DEFAULT_MARGIN,
};
pub use penalty::{penalty_solve, PenaltyConfig, PenaltyResult, PenaltySchedule};

use crate::block::{eval_aug_lagrangian, BlockVector, ProblemSpec};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{Matrix, SpdFactor, Vector};
use crate::subproblem::{linearized_block_update, BlockSubproblem, ProxMetric};

/// Default threshold on `theta_k` for stopping.
pub const DEFAULT_EPS_THETA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    G,
    M,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubproblemMode {
    /// Delegate each block to the solver registered on the problem.
    Exact,
    /// One proximal-gradient step per block; needs isotropic metrics.
    Linearized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub beta: f64,
    /// Last-block step size; only the gradient variant uses it.
    pub gamma: f64,
    /// One metric per block updated in the first step.
    pub metrics: Vec<ProxMetric>,
    pub max_iters: usize,
    pub eps_theta: f64,
    pub mode: SubproblemMode,
    /// Replaces `f.lipschitz()` in the majorizer and the potentials.
    pub lipschitz: Option<f64>,
}

impl AdmmConfig {
    pub fn new(beta: f64, gamma: f64, metrics: Vec<ProxMetric>) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be positive, got {beta}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be positive, got {gamma}")));
        }
        Ok(AdmmConfig {
            beta,
            gamma,
            metrics,
            max_iters: 2000,
            eps_theta: DEFAULT_EPS_THETA,
            mode: SubproblemMode::Exact,
            lipschitz: None,
        })
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_eps_theta(mut self, eps: f64) -> Self {
        self.eps_theta = eps;
        self
    }

    pub fn with_mode(mut self, mode: SubproblemMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    fn lipschitz_of(&self, p: &ProblemSpec) -> f64 {
        self.lipschitz.unwrap_or_else(|| p.f().lipschitz())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: BlockVector,
    pub x_prev: BlockVector,
    /// `x^{k-1}`, once two steps have been taken.
    pub x_prev2: Option<BlockVector>,
    pub lambda: Vector,
    pub k: usize,
    /// Potential at `(x^k, lambda^k, x_N^{k-1})`.
    pub psi: f64,
    /// Subgradient certificates from the last block updates.
    pub certificates: Vec<Option<Vector>>,
}

impl AdmmState {
    /// State at `k = 0`; the potential reduces to the augmented Lagrangian.
    pub fn initial(p: &ProblemSpec, x0: BlockVector, lambda0: Vector, beta: f64) -> Result<Self> {
        x0.check_dims(p.dims())?;
        let psi = eval_aug_lagrangian(p, &x0, &lambda0, beta)?;
        Ok(AdmmState {
            x_prev: x0.clone(),
            x: x0,
            x_prev2: None,
            lambda: lambda0,
            k: 0,
            psi,
            certificates: vec![None; p.num_blocks()],
        })
    }

    /// `theta_{k-1}` built from the three latest iterates.
    pub fn theta(&self) -> Result<f64> {
        match &self.x_prev2 {
            Some(x2) => theta(x2, &self.x_prev, &self.x),
            None => Err(invalid("state", "theta needs two completed steps")),
        }
    }
}

/// `sum_i ||x_i^{k-1} - x_i^k||^2 + ||x_i^k - x_i^{k+1}||^2`.
pub fn theta(x_km1: &BlockVector, x_k: &BlockVector, x_kp1: &BlockVector) -> Result<f64> {
    x_k.check_dims(&x_km1.dims())?;
    x_kp1.check_dims(&x_km1.dims())?;
    Ok(x_km1.dist_sq(x_k) + x_k.dist_sq(x_kp1))
}

/// `L_beta + (3/beta)((beta - 1/gamma)^2 + L^2) ||x_N - x_N_prev||^2`.
pub fn potential_psi_g(
    p: &ProblemSpec,
    x: &BlockVector,
    lambda: &Vector,
    x_n_prev: &Vector,
    beta: f64,
    gamma: f64,
) -> Result<f64> {
    psi_g_with(p, x, lambda, x_n_prev, beta, gamma, p.f().lipschitz())
}

/// `L_beta + 6 L^2 / (beta sigma_N) ||x_N - x_N_prev||^2`.
pub fn potential_psi_l(
    p: &ProblemSpec,
    x: &BlockVector,
    lambda: &Vector,
    x_n_prev: &Vector,
    beta: f64,
    sigma_n: f64,
) -> Result<f64> {
    psi_l_with(p, x, lambda, x_n_prev, beta, sigma_n, p.f().lipschitz())
}

pub(crate) fn psi_g_with(
    p: &ProblemSpec,
    x: &BlockVector,
    lambda: &Vector,
    x_n_prev: &Vector,
    beta: f64,
    gamma: f64,
    l: f64,
) -> Result<f64> {
    check_dim("previous last block", x.last().len(), x_n_prev.len())?;
    let lag = eval_aug_lagrangian(p, x, lambda, beta)?;
    let s = beta - 1.0 / gamma;
    Ok(lag + 3.0 / beta * (s * s + l * l) * (x.last() - x_n_prev).norm_squared())
}

pub(crate) fn psi_l_with(
    p: &ProblemSpec,
    x: &BlockVector,
    lambda: &Vector,
    x_n_prev: &Vector,
    beta: f64,
    sigma_n: f64,
    l: f64,
) -> Result<f64> {
    check_dim("previous last block", x.last().len(), x_n_prev.len())?;
    if !(sigma_n > 0.0) {
        return Err(invalid("sigma_n", "must be positive"));
    }
    let lag = eval_aug_lagrangian(p, x, lambda, beta)?;
    Ok(lag + 6.0 * l * l / (beta * sigma_n) * (x.last() - x_n_prev).norm_squared())
}

fn check_common(p: &ProblemSpec, s: &AdmmState, cfg: &AdmmConfig) -> Result<()> {
    let a = p.require_affine()?;
    p.require_plain_last()?;
    s.x.check_dims(p.dims())?;
    check_dim("multiplier", a.rows(), s.lambda.len())?;
    check_dim("number of metrics", p.num_blocks() - 1, cfg.metrics.len())?;
    Ok(())
}

/// First step: sequential updates of blocks `0..upto` in place.
pub(crate) fn update_blocks(
    p: &ProblemSpec,
    x: &mut BlockVector,
    lambda: Option<&Vector>,
    beta: f64,
    metrics: &[ProxMetric],
    mode: SubproblemMode,
    upto: usize,
) -> Result<Vec<Option<Vector>>> {
    let mut certs = vec![None; p.num_blocks()];
    for i in 0..upto {
        let up = {
            let sub = BlockSubproblem {
                problem: p,
                block: i,
                point: x,
                multiplier: lambda,
                beta,
                metric: &metrics[i],
            };
            match mode {
                SubproblemMode::Exact => p
                    .block_solver(i)
                    .ok_or(Error::MissingBlockSolver(i))?
                    .solve(&sub)?,
                SubproblemMode::Linearized => linearized_block_update(&sub)?,
            }
        };
        x.set_block(i, up.value)?;
        certs[i] = up.subgradient;
    }
    Ok(certs)
}

fn advance(s: &AdmmState, x: BlockVector, lambda: Vector, psi: f64, certs: Vec<Option<Vector>>) -> AdmmState {
    AdmmState {
        x_prev2: (s.k >= 1).then(|| s.x_prev.clone()),
        x_prev: s.x.clone(),
        x,
        lambda,
        k: s.k + 1,
        psi,
        certificates: certs,
    }
}

/// One iteration of the gradient variant.
pub fn admm_g_step(p: &ProblemSpec, s: &AdmmState, cfg: &AdmmConfig) -> Result<AdmmState> {
    check_common(p, s, cfg)?;
    let a = p.require_identity_last()?;
    let n = p.num_blocks();
    let mut x = s.x.clone();
    let certs = update_blocks(p, &mut x, Some(&s.lambda), cfg.beta, &cfg.metrics, cfg.mode, n - 1)?;
    let g = p.f().grad_block(&x, n - 1);
    let r = a.residual(&x);
    let xn = x.last() - (g - &s.lambda + r * cfg.beta) * cfg.gamma;
    x.set_block(n - 1, xn)?;
    let lambda = &s.lambda - a.residual(&x) * cfg.beta;
    let l = cfg.lipschitz_of(p);
    let psi = psi_g_with(p, &x, &lambda, s.x.last(), cfg.beta, cfg.gamma, l)?;
    Ok(advance(s, x, lambda, psi, certs))
}

/// Cached data for the majorization variant.
pub(crate) struct MajorizationData {
    pub l: f64,
    pub sigma_n: f64,
    factor: SpdFactor,
}

impl MajorizationData {
    pub(crate) fn new(p: &ProblemSpec, cfg: &AdmmConfig) -> Result<Self> {
        let a = p.require_affine()?;
        let an = a.mats().last().expect("nonempty");
        if an.nrows() > an.ncols() {
            return Err(Error::Assumption("A_N must have full row rank".into()));
        }
        let sigma_n = sigma_n(an)?;
        let l = cfg.lipschitz_of(p);
        if !(l > 0.0) {
            return Err(invalid("lipschitz", "majorization needs a positive modulus"));
        }
        let k = Matrix::identity(an.ncols(), an.ncols()) * l + an.transpose() * an * cfg.beta;
        Ok(MajorizationData {
            l,
            sigma_n,
            factor: SpdFactor::new(&k)?,
        })
    }
}

pub(crate) fn admm_m_step_with(
    p: &ProblemSpec,
    s: &AdmmState,
    cfg: &AdmmConfig,
    md: &MajorizationData,
) -> Result<AdmmState> {
    check_common(p, s, cfg)?;
    let a = p.require_affine()?;
    let n = p.num_blocks();
    let an = a.mat(n - 1);
    let mut x = s.x.clone();
    let certs = update_blocks(p, &mut x, Some(&s.lambda), cfg.beta, &cfg.metrics, cfg.mode, n - 1)?;
    let g = p.f().grad_block(&x, n - 1);
    let xn_old = x.last().clone();
    let others = a.residual(&x) - an * &xn_old;
    let rhs = &xn_old * md.l - g + an.transpose() * (&s.lambda - others * cfg.beta);
    x.set_block(n - 1, md.factor.solve(&rhs))?;
    let lambda = &s.lambda - a.residual(&x) * cfg.beta;
    let psi = psi_l_with(p, &x, &lambda, &xn_old, cfg.beta, md.sigma_n, md.l)?;
    Ok(advance(s, x, lambda, psi, certs))
}

/// One iteration of the majorization variant.
pub fn admm_m_step(p: &ProblemSpec, s: &AdmmState, cfg: &AdmmConfig) -> Result<AdmmState> {
    check_common(p, s, cfg)?;
    let md = MajorizationData::new(p, cfg)?;
    admm_m_step_with(p, s, cfg, &md)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Theta,
    MaxIters,
}

/// Per-iteration monitors; entry `j` of `psi` and `primal_residual` belongs
/// to iterate `j + 1`, entry `j` of `theta` to `theta_{j+1}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdmmTrace {
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
    pub primal_residual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmResult {
    /// Iterate `x^{k+1}` for the minimizing `theta_k`.
    pub state: AdmmState,
    pub last: AdmmState,
    /// `k` of the selected `theta_k`, when any was computed.
    pub best_k: Option<usize>,
    pub trace: AdmmTrace,
    pub stop: StopReason,
}

/// Runs the chosen variant until `theta_k <= eps_theta` or `max_iters` steps.
pub fn admm_solve(
    p: &ProblemSpec,
    x0: &BlockVector,
    lambda0: &Vector,
    cfg: &AdmmConfig,
    variant: Variant,
) -> Result<AdmmResult> {
    let init = AdmmState::initial(p, x0.clone(), lambda0.clone(), cfg.beta)?;
    check_common(p, &init, cfg)?;
    let md = match variant {
        Variant::G => {
            p.require_identity_last()?;
            None
        }
        Variant::M => Some(MajorizationData::new(p, cfg)?),
    };
    let a = p.require_affine()?;
    let mut trace = AdmmTrace::default();
    let mut state = init;
    let mut best: Option<(usize, f64, AdmmState)> = None;
    let mut stop = StopReason::MaxIters;
    for _ in 0..cfg.max_iters {
        state = match &md {
            None => admm_g_step(p, &state, cfg)?,
            Some(md) => admm_m_step_with(p, &state, cfg, md)?,
        };
        trace.psi.push(state.psi);
        trace.primal_residual.push(a.residual(&state.x).norm());
        if state.k >= 2 {
            let th = state.theta()?;
            trace.theta.push(th);
            let k = state.k - 1;
            if best.as_ref().is_none_or(|b| th < b.1) {
                best = Some((k, th, state.clone()));
            }
            if th <= cfg.eps_theta {
                stop = StopReason::Theta;
                best = Some((k, th, state.clone()));
                break;
            }
        }
    }
    let (best_k, selected) = match best {
        Some((k, _, s)) => (Some(k), s),
        None => (None, state.clone()),
    };
    Ok(AdmmResult {
        state: selected,
        last: state,
        best_k,
        trace,
        stop,
    })
}
