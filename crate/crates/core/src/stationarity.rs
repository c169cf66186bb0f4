//! Stationarity measures for single-block and block-structured problems.

use std::fmt::Write as _;

use crate::block::{BlockVector, ConstraintSet, ProblemSpec, RegularizerKind, Setting};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{spectral_norm, Vector};
use crate::subproblem::prox_on_set;

fn single(p: &ProblemSpec, x: &Vector) -> Result<BlockVector> {
    if p.num_blocks() != 1 {
        return Err(invalid("problem", "expected a single block"));
    }
    check_dim("point", p.dims()[0], x.len())?;
    Ok(BlockVector::from_blocks_unchecked(vec![x.clone()]))
}

/// `min_{y in S} g'y + r(y)` through the support function of the pairing.
fn support_value(p: &ProblemSpec, g: &Vector) -> Result<f64> {
    let reg = p.reg(0);
    let set = p.set(0);
    match (reg.kind(), set) {
        (RegularizerKind::Zero, ConstraintSet::Ball { .. } | ConstraintSet::Box { .. }) => {
            Ok(set.min_linear(g))
        }
        (RegularizerKind::L1 { weight }, ConstraintSet::Box { lo, hi }) => Ok((0..g.len())
            .map(|j| {
                let end = (g[j] * lo[j] + weight * lo[j].abs()).min(g[j] * hi[j] + weight * hi[j].abs());
                if lo[j] <= 0.0 && hi[j] >= 0.0 {
                    end.min(0.0)
                } else {
                    end
                }
            })
            .sum()),
        (RegularizerKind::L1 { weight }, ConstraintSet::Ball { radius, .. }) => {
            let excess: f64 = g.iter().map(|t| (t.abs() - weight).max(0.0).powi(2)).sum();
            Ok(-radius * excess.sqrt())
        }
        _ => Err(Error::UnsupportedPairing(format!(
            "stationarity gap of {reg:?} over {set:?}"
        ))),
    }
}

/// `inf_{y in S} grad f(x)'(y - x) + r(y) - r(x)`; nonpositive on the set.
pub fn psi_s(p: &ProblemSpec, x: &Vector) -> Result<f64> {
    let bx = single(p, x)?;
    let g = p.f().grad_block(&bx, 0);
    Ok(support_value(p, &g)? - g.dot(x) - p.reg(0).value(x))
}

/// `(x - x+) / gamma` with `x+` the proximal-gradient point over the set.
pub fn proj_grad_residual(p: &ProblemSpec, x: &Vector, gamma: f64) -> Result<Vector> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    let bx = single(p, x)?;
    let g = p.f().grad_block(&bx, 0);
    let v = x - g * gamma;
    let xp = prox_on_set(p.reg(0), p.set(0), &v, 1.0 / gamma)?.value;
    Ok((x - xp) / gamma)
}

fn multiplier_term(p: &ProblemSpec, i: usize, lambda: Option<&Vector>) -> Result<Option<Vector>> {
    match (p.affine(), lambda) {
        (Some(a), Some(l)) => {
            check_dim("multiplier", a.rows(), l.len())?;
            Ok(Some(a.mat(i).transpose() * l))
        }
        (Some(_), None) => Err(invalid("lambda", "a multiplier is required with an affine part")),
        (None, _) => Ok(None),
    }
}

/// `min_{y in X_i} (y - x_i)'(g_i + grad_i f(x) - A_i' lambda)` for every
/// regularized block.
pub fn vi_residuals_setting1(p: &ProblemSpec, x: &BlockVector, lambda: Option<&Vector>, g: &[Vector]) -> Result<Vec<f64>> {
    x.check_dims(p.dims())?;
    let nreg = p.regularized_blocks();
    check_dim("number of subgradients", nreg, g.len())?;
    let grad = p.f().gradient(x);
    (0..nreg)
        .map(|i| {
            let set = p.set(i);
            if set.is_whole_space() {
                return Err(Error::UnsupportedPairing(format!(
                    "block {i} has no linear minimization oracle"
                )));
            }
            check_dim(format!("subgradient {i}"), x.block(i).len(), g[i].len())?;
            let mut v = &g[i] + grad.block(i);
            if let Some(t) = multiplier_term(p, i, lambda)? {
                v -= t;
            }
            Ok(set.min_linear(&v) - x.block(i).dot(&v))
        })
        .collect()
}

/// `dist(-grad_i f(x) + A_i' lambda, subdiff r_i(x_i))` for every regularized block.
pub fn subdiff_residuals_setting2(p: &ProblemSpec, x: &BlockVector, lambda: Option<&Vector>) -> Result<Vec<f64>> {
    x.check_dims(p.dims())?;
    let grad = p.f().gradient(x);
    (0..p.regularized_blocks())
        .map(|i| {
            let mut t = -grad.block(i);
            if let Some(m) = multiplier_term(p, i, lambda)? {
                t += m;
            }
            Ok(p.reg(i).dist_to_subdiff(x.block(i), &t))
        })
        .collect()
}

/// `||grad_x L_beta(x, lambda)||^2 + ||Ax - b||^2` for a smooth constrained problem.
pub fn hong_q(p: &ProblemSpec, x: &BlockVector, lambda: &Vector, beta: f64) -> Result<f64> {
    x.check_dims(p.dims())?;
    if !(beta > 0.0) {
        return Err(invalid("beta", "must be positive"));
    }
    if let Some(i) = (0..p.num_blocks()).find(|&i| p.reg(i).kind() != RegularizerKind::Zero || !p.set(i).is_whole_space()) {
        return Err(Error::UnsupportedPairing(format!(
            "block {i} is nonsmooth or constrained"
        )));
    }
    let a = p.require_affine()?;
    check_dim("multiplier", a.rows(), lambda.len())?;
    let r = a.residual(x);
    let w = &r * beta - lambda;
    let grad = p.f().gradient(x);
    let gl: f64 = (0..p.num_blocks())
        .map(|i| (grad.block(i) + a.mat(i).transpose() * &w).norm_squared())
        .sum();
    Ok(gl + r.norm_squared())
}

/// `(gamma_1, gamma_2)` relating the stationarity measure to `Q`.
pub fn hong_gammas(beta: f64, a: &crate::linalg::Matrix) -> (f64, f64) {
    let an = spectral_norm(a);
    let b2 = beta * beta * an * an;
    (1.0 / (2.0 * b2 + 3.0).sqrt(), (2.0 * (1.0 + b2)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubgradientSource {
    /// Taken from the block subproblem's optimality condition.
    Certificate,
    /// Taken from the regularizer's own selection.
    Selection,
}

impl SubgradientSource {
    fn name(&self) -> &'static str {
        match self {
            SubgradientSource::Certificate => "certificate",
            SubgradientSource::Selection => "selection",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub setting: Setting,
    /// VI infima in Setting 1, subdifferential distances in Setting 2.
    pub block_residuals: Vec<f64>,
    /// Setting 1 only.
    pub subgradient_sources: Vec<SubgradientSource>,
    /// `||grad_N f - A_N' lambda||` when the last block is unregularized.
    pub dual_residual: Option<f64>,
    /// `||sum_i A_i x_i - b||`.
    pub primal_residual: Option<f64>,
    pub epsilon: f64,
}

impl StationarityReport {
    /// Flat `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let tag = match self.setting {
            Setting::Setting1 => 1,
            Setting::Setting2 => 2,
        };
        let _ = writeln!(s, "setting={tag}");
        for (i, r) in self.block_residuals.iter().enumerate() {
            let _ = writeln!(s, "block_residual.{i}={r:.12e}");
        }
        for (i, src) in self.subgradient_sources.iter().enumerate() {
            let _ = writeln!(s, "subgradient_source.{i}={}", src.name());
        }
        if let Some(d) = self.dual_residual {
            let _ = writeln!(s, "dual_residual={d:.12e}");
        }
        if let Some(r) = self.primal_residual {
            let _ = writeln!(s, "primal_residual={r:.12e}");
        }
        let _ = writeln!(s, "epsilon={:.12e}", self.epsilon);
        s
    }
}

/// Evaluates every residual of the problem's setting at `(x, lambda)`.
///
/// In Setting 1 `certificates[i]`, when present, supplies `g_i`; other blocks
/// fall back to [`crate::block::Regularizer::subgrad_select`].
pub fn stationarity_report(
    p: &ProblemSpec,
    x: &BlockVector,
    lambda: Option<&Vector>,
    certificates: Option<&[Option<Vector>]>,
) -> Result<StationarityReport> {
    x.check_dims(p.dims())?;
    let nreg = p.regularized_blocks();
    let (block_residuals, sources, worst) = match p.setting() {
        Setting::Setting1 => {
            let mut g = Vec::with_capacity(nreg);
            let mut src = Vec::with_capacity(nreg);
            for i in 0..nreg {
                match certificates.and_then(|c| c.get(i)).and_then(|c| c.as_ref()) {
                    Some(c) => {
                        g.push(c.clone());
                        src.push(SubgradientSource::Certificate);
                    }
                    None => {
                        g.push(p.reg(i).subgrad_select(x.block(i)));
                        src.push(SubgradientSource::Selection);
                    }
                }
            }
            let r = vi_residuals_setting1(p, x, lambda, &g)?;
            let worst = r.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
            (r, src, worst)
        }
        Setting::Setting2 => {
            let r = subdiff_residuals_setting2(p, x, lambda)?;
            let worst = r.iter().copied().fold(0.0, f64::max);
            (r, Vec::new(), worst)
        }
    };
    let n = p.num_blocks();
    let dual_residual = if nreg < n {
        let mut t = p.f().grad_block(x, n - 1);
        if let Some(m) = multiplier_term(p, n - 1, lambda)? {
            t -= m;
        }
        Some(t.norm())
    } else {
        None
    };
    let primal_residual = p.affine().map(|a| a.residual(x).norm());
    let epsilon = worst
        .max(dual_residual.unwrap_or(0.0))
        .max(primal_residual.unwrap_or(0.0));
    Ok(StationarityReport {
        setting: p.setting(),
        block_residuals,
        subgradient_sources: sources,
        dual_residual,
        primal_residual,
        epsilon,
    })
}
