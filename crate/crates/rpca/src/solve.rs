use crate::error::Result;
use crate::params::{RpcaAlgorithm, RpcaParams};
use crate::steps::{
    augmented_lagrangian, penalized_objective, rpca_admm_g_step, rpca_admm_m_step, rpca_bcd_step, RpcaState,
};
use crate::tensor::Tensor3;

pub const DEFAULT_MAX_ITERS: usize = 2000;
pub const DEFAULT_EPS_THETA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RpcaRun {
    /// Iterate after the step that completed the smallest `theta_k`.
    pub state: RpcaState,
    pub iters: usize,
    /// Whether `theta_k < eps_theta` ended the run.
    pub converged: bool,
    /// `theta_k` for `k = 1..`.
    pub theta: Vec<f64>,
    /// Augmented Lagrangian (ADMM) or objective (BCD) after each iteration.
    pub merit: Vec<f64>,
    /// Iterations whose factor updates needed a pseudo-inverse.
    pub pinv_fallbacks: usize,
}

impl RpcaRun {
    /// Fraction of iterations in which the merit strictly decreased.
    pub fn decrease_fraction(&self) -> f64 {
        if self.merit.len() < 2 {
            return 1.0;
        }
        let down = self.merit.windows(2).filter(|w| w[1] < w[0]).count();
        down as f64 / (self.merit.len() - 1) as f64
    }
}

pub fn rpca_step(t: &Tensor3, s: &RpcaState, p: &RpcaParams, alg: RpcaAlgorithm) -> Result<(RpcaState, bool)> {
    match alg {
        RpcaAlgorithm::AdmmG => Ok((rpca_admm_g_step(t, s, p)?, false)),
        RpcaAlgorithm::AdmmM => Ok((rpca_admm_m_step(t, s, p)?, false)),
        RpcaAlgorithm::Bcd => rpca_bcd_step(t, s, p, false),
        RpcaAlgorithm::ProxBcd => rpca_bcd_step(t, s, p, true),
    }
}

pub fn merit(t: &Tensor3, s: &RpcaState, p: &RpcaParams, alg: RpcaAlgorithm) -> f64 {
    match alg {
        RpcaAlgorithm::AdmmG | RpcaAlgorithm::AdmmM => augmented_lagrangian(t, s, p),
        RpcaAlgorithm::Bcd | RpcaAlgorithm::ProxBcd => penalized_objective(t, s, p),
    }
}

/// Iterates until `theta_k < eps_theta` or `max_iters` steps.
pub fn rpca_solve(
    t: &Tensor3,
    init: RpcaState,
    p: &RpcaParams,
    alg: RpcaAlgorithm,
    max_iters: usize,
    eps_theta: f64,
) -> Result<RpcaRun> {
    p.validate(alg)?;
    init.check(t)?;
    let mut state = init;
    let mut prev_step: Option<f64> = None;
    let mut best: Option<(f64, RpcaState)> = None;
    let mut run = RpcaRun {
        state: state.clone(),
        iters: 0,
        converged: false,
        theta: Vec::new(),
        merit: Vec::new(),
        pinv_fallbacks: 0,
    };
    for _ in 0..max_iters {
        let (next, fb) = rpca_step(t, &state, p, alg)?;
        run.pinv_fallbacks += fb as usize;
        let step = state.dist_sq(&next);
        run.iters += 1;
        run.merit.push(merit(t, &next, p, alg));
        state = next;
        if let Some(ps) = prev_step {
            let th = ps + step;
            run.theta.push(th);
            if best.as_ref().is_none_or(|b| th < b.0) {
                best = Some((th, state.clone()));
            }
            if th < eps_theta {
                run.converged = true;
                best = Some((th, state.clone()));
                break;
            }
        }
        prev_step = Some(step);
    }
    run.state = best.map_or(state, |b| b.1);
    Ok(run)
}
