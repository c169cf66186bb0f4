//! Parameter selection and complexity constants.

use super::{AdmmConfig, Variant};
use crate::block::{ProblemSpec, Setting};
use crate::error::{invalid, Error, Result};
use crate::linalg::{spectral_norm, sym_min_eigenvalue, Matrix};
use crate::subproblem::ProxMetric;

/// Default multiplicative slack over the strict lower bounds on `beta`.
pub const DEFAULT_MARGIN: f64 = 1.01;

fn check_lm(l: f64, margin: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(invalid("L", format!("must be positive, got {l}")));
    }
    if !(margin > 1.0 && margin.is_finite()) {
        return Err(invalid("margin", format!("must exceed 1, got {margin}")));
    }
    Ok(())
}

fn min_sigma(h: &[ProxMetric]) -> f64 {
    h.iter().map(|m| m.sigma_min()).fold(f64::INFINITY, f64::min)
}

/// Open interval of admissible `gamma` for the gradient variant at `beta`.
pub fn admm_g_gamma_interval(l: f64, beta: f64) -> Result<(f64, f64)> {
    let disc = 13.0 * beta * beta - 12.0 * beta * l - 72.0 * l * l;
    if !(disc > 0.0) {
        return Err(Error::Assumption(format!(
            "beta = {beta} leaves no admissible gamma (discriminant {disc})"
        )));
    }
    let den = 6.0 * l * l + beta * l + 13.0 * beta * beta;
    let sq = disc.sqrt();
    Ok(((13.0 * beta - sq) / den, (13.0 * beta + sq) / den))
}

/// `(beta, gamma)` for the gradient variant; `gamma` is the midpoint of its interval.
pub fn admm_g_params(l: f64, h: &[ProxMetric], margin: f64) -> Result<(f64, f64)> {
    check_lm(l, margin)?;
    let base = (18.0 * 3f64.sqrt() + 6.0) / 13.0 * l;
    let beta = margin * base.max(6.0 * l * l / min_sigma(h));
    let (lo, hi) = admm_g_gamma_interval(l, beta)?;
    Ok((beta, 0.5 * (lo + hi)))
}

/// `beta` for the majorization variant.
pub fn admm_m_params(l: f64, sigma_n: f64, h: &[ProxMetric], margin: f64) -> Result<f64> {
    check_lm(l, margin)?;
    if !(sigma_n > 0.0) {
        return Err(Error::Assumption(format!(
            "sigma_N = {sigma_n}: A_N must have full row rank"
        )));
    }
    let a = 18.0 * l / sigma_n;
    let b = 6.0 * l * l / (sigma_n * min_sigma(h));
    Ok(margin * a.max(b))
}

/// `(beta, gamma)` of the gradient variant applied to the dummy-block form of BCD.
pub fn bcd_params(l: f64, h: &[ProxMetric], margin: f64) -> Result<(f64, f64)> {
    check_lm(l, margin)?;
    let beta = margin * (18.0 * l).max(6.0 * l * l / min_sigma(h));
    let (lo, hi) = admm_g_gamma_interval(l, beta)?;
    Ok((beta, 0.5 * (lo + hi)))
}

/// Smallest eigenvalue of `A_N A_N'`.
pub fn sigma_n(a_n: &Matrix) -> Result<f64> {
    sym_min_eigenvalue(&(a_n * a_n.transpose()))
}

/// Problem and parameter data behind the complexity constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantInputs {
    pub lipschitz: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma_n: f64,
    pub num_blocks: usize,
    /// `||A_i||_2` for every block, the last included.
    pub a_norms: Vec<f64>,
    pub h_norms: Vec<f64>,
    pub h_sigma_mins: Vec<f64>,
    /// Largest squared diameter of the constrained sets.
    pub max_diam_sq: f64,
}

impl ConstantInputs {
    pub fn from_problem(p: &ProblemSpec, cfg: &AdmmConfig) -> Result<Self> {
        let a = p.require_affine()?;
        let dsq = p.sets()[..p.regularized_blocks()]
            .iter()
            .map(|s| s.diameter().powi(2))
            .fold(0.0, f64::max);
        Ok(ConstantInputs {
            lipschitz: cfg.lipschitz_of(p),
            beta: cfg.beta,
            gamma: cfg.gamma,
            sigma_n: sigma_n(a.mats().last().expect("nonempty"))?,
            num_blocks: p.num_blocks(),
            a_norms: a.mats().iter().map(spectral_norm).collect(),
            h_norms: cfg.metrics.iter().map(|m| m.norm()).collect(),
            h_sigma_mins: cfg.metrics.iter().map(|m| m.sigma_min()).collect(),
            max_diam_sq: dsq,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComplexityConstants {
    Admm {
        kappa1: f64,
        kappa2: f64,
        kappa3: f64,
        kappa4: f64,
        tau: f64,
    },
    Bcd {
        kappa5: f64,
        kappa6: f64,
        tau: f64,
    },
}

impl ComplexityConstants {
    pub fn tau(&self) -> f64 {
        match *self {
            ComplexityConstants::Admm { tau, .. } | ComplexityConstants::Bcd { tau, .. } => tau,
        }
    }
}

fn maxf(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn minf(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn tau_g(c: &ConstantInputs) -> f64 {
    let (l, b) = (c.lipschitz, c.beta);
    let s = b - 1.0 / c.gamma;
    let first = -((l + b) / 2.0 - 1.0 / c.gamma + 6.0 / b * s * s + 3.0 * l * l / b);
    first.min(minf(&c.h_sigma_mins) / 2.0 - 3.0 * l * l / b)
}

/// Constants of the iteration bound for either ADMM variant.
pub fn complexity_constants(variant: Variant, c: &ConstantInputs) -> ComplexityConstants {
    let (l, b) = (c.lipschitz, c.beta);
    let a2 = maxf(&c.a_norms).powi(2);
    let kappa4 = (l + b * (c.num_blocks as f64).sqrt() * a2 + maxf(&c.h_norms)).powi(2);
    let kappa3 = c.max_diam_sq;
    match variant {
        Variant::G => {
            let s = b - 1.0 / c.gamma;
            ComplexityConstants::Admm {
                kappa1: 3.0 / (b * b) * (s * s + l * l),
                kappa2: (s.abs() + l).powi(2),
                kappa3,
                kappa4,
                tau: tau_g(c),
            }
        }
        Variant::M => {
            let sn = c.sigma_n;
            let first = l / 2.0 - 9.0 * l * l / (b * sn);
            ComplexityConstants::Admm {
                kappa1: 6.0 * l * l / (b * b * sn),
                kappa2: 4.0 * l * l,
                kappa3,
                kappa4,
                tau: first.min(minf(&c.h_sigma_mins) / 2.0 - 3.0 * l * l / (b * sn)),
            }
        }
    }
}

/// Constants of the proximal BCD bound; `tau` is that of the gradient variant
/// on the dummy-block form with the given `beta` and `gamma`.
pub fn bcd_constants(c: &ConstantInputs) -> ComplexityConstants {
    ComplexityConstants::Bcd {
        kappa5: (c.lipschitz + maxf(&c.h_norms)).powi(2),
        kappa6: c.max_diam_sq,
        tau: tau_g(c),
    }
}

/// Iteration count after which the best `theta_k` certifies eps-stationarity.
pub fn admm_iteration_bound(
    consts: &ComplexityConstants,
    psi1: f64,
    lower: f64,
    eps: f64,
    setting: Setting,
) -> Result<u64> {
    let tau = consts.tau();
    if !(tau > 0.0) {
        return Err(Error::Assumption(format!(
            "tau = {tau} is not positive: beta below its theoretical bound"
        )));
    }
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    if psi1 < lower {
        return Err(invalid("lower", "exceeds the initial potential"));
    }
    let num = match (*consts, setting) {
        (ComplexityConstants::Admm { kappa1, kappa2, kappa3, kappa4, .. }, s) => {
            let k4 = if s == Setting::Setting1 { kappa4 * kappa3 } else { kappa4 };
            2.0 * kappa1.max(kappa2).max(k4)
        }
        (ComplexityConstants::Bcd { kappa5, kappa6, .. }, Setting::Setting1) => kappa5 * kappa6,
        (ComplexityConstants::Bcd { kappa5, .. }, Setting::Setting2) => kappa5,
    };
    let v = num / (tau * eps * eps) * (psi1 - lower);
    Ok((v * (1.0 - 1e-12)).ceil().max(0.0) as u64)
}
