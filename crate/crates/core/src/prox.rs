//! Closed-form proximal maps and projections.
//!
//! Scalar penalties are symmetric and nondecreasing in `|x|`. Their proximal
//! maps are computed by enumerating the finitely many candidates of the
//! piecewise one-dimensional objective (region breakpoints and interior
//! stationary points) and keeping the best one. Ties go to the candidate with
//! the smaller absolute value.

use crate::block::{Regularizer, RegularizerKind};
use crate::error::{invalid, Result};
use crate::linalg::Vector;

/// Family of separable scalar penalties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyKind {
    L1,
    /// Smoothly clipped absolute deviation, shape `a > 2`.
    Scad,
    /// Minimax concave penalty, shape `gamma > 0`.
    Mcp,
    /// `alpha * min(|x|, cap)`, shape `cap > 0`.
    CappedL1,
    /// Log-sum penalty `alpha * ln(1 + |x| / theta)`, shape `theta > 0`.
    Lsp,
}

/// A scalar penalty with weight `alpha` and a variant-specific shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarPenalty {
    kind: PenaltyKind,
    alpha: f64,
    shape: f64,
}

/// Relative slack under which two candidate objective values count as tied.
const TIE_TOL: f64 = 1e-14;

impl ScalarPenalty {
    pub fn new(kind: PenaltyKind, alpha: f64, shape: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive, got {alpha}")));
        }
        let ok = match kind {
            PenaltyKind::L1 => true,
            PenaltyKind::Scad => shape > 2.0,
            PenaltyKind::Mcp | PenaltyKind::CappedL1 | PenaltyKind::Lsp => shape > 0.0,
        };
        if !ok || !(shape.is_finite() || kind == PenaltyKind::L1) {
            return Err(invalid(
                "shape",
                format!("{shape} is out of range for {kind:?}"),
            ));
        }
        Ok(ScalarPenalty { kind, alpha, shape })
    }

    pub fn l1(alpha: f64) -> Result<Self> {
        Self::new(PenaltyKind::L1, alpha, 0.0)
    }

    pub fn scad(alpha: f64, a: f64) -> Result<Self> {
        Self::new(PenaltyKind::Scad, alpha, a)
    }

    pub fn mcp(alpha: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyKind::Mcp, alpha, gamma)
    }

    pub fn capped_l1(alpha: f64, cap: f64) -> Result<Self> {
        Self::new(PenaltyKind::CappedL1, alpha, cap)
    }

    pub fn lsp(alpha: f64, theta: f64) -> Result<Self> {
        Self::new(PenaltyKind::Lsp, alpha, theta)
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn is_convex(&self) -> bool {
        self.kind == PenaltyKind::L1
    }

    /// Global Lipschitz constant of the penalty.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            PenaltyKind::Lsp => self.alpha / self.shape,
            _ => self.alpha,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let t = x.abs();
        let (al, s) = (self.alpha, self.shape);
        match self.kind {
            PenaltyKind::L1 => al * t,
            PenaltyKind::Scad => {
                if t <= al {
                    al * t
                } else if t <= s * al {
                    (2.0 * s * al * t - t * t - al * al) / (2.0 * (s - 1.0))
                } else {
                    al * al * (s + 1.0) / 2.0
                }
            }
            PenaltyKind::Mcp => {
                if t <= s * al {
                    al * t - t * t / (2.0 * s)
                } else {
                    s * al * al / 2.0
                }
            }
            PenaltyKind::CappedL1 => al * t.min(s),
            PenaltyKind::Lsp => al * (t / s).ln_1p(),
        }
    }

    /// Nonnegative region breakpoints in `|x|`, excluding zero.
    fn breakpoints(&self) -> Vec<f64> {
        let (al, s) = (self.alpha, self.shape);
        match self.kind {
            PenaltyKind::L1 | PenaltyKind::Lsp => vec![],
            PenaltyKind::Scad => vec![al, s * al],
            PenaltyKind::Mcp => vec![s * al],
            PenaltyKind::CappedL1 => vec![s],
        }
    }

    /// Stationary points `t > 0` of `pen(t) + (w/2)(t - u)^2` lying inside the
    /// region they were derived for.
    fn positive_stationary_points(&self, u: f64, w: f64) -> Vec<f64> {
        let (al, s) = (self.alpha, self.shape);
        let mut out = Vec::with_capacity(3);
        let mut push_in = |t: f64, lo: f64, hi: f64| {
            if t.is_finite() && t > lo && t < hi {
                out.push(t);
            }
        };
        match self.kind {
            PenaltyKind::L1 => push_in(u - al / w, 0.0, f64::INFINITY),
            PenaltyKind::Scad => {
                push_in(u - al / w, 0.0, al);
                let curv = w - 1.0 / (s - 1.0);
                if curv > 0.0 {
                    push_in((w * u - s * al / (s - 1.0)) / curv, al, s * al);
                }
                push_in(u, s * al, f64::INFINITY);
            }
            PenaltyKind::Mcp => {
                let curv = w - 1.0 / s;
                if curv > 0.0 {
                    push_in((w * u - al) / curv, 0.0, s * al);
                }
                push_in(u, s * al, f64::INFINITY);
            }
            PenaltyKind::CappedL1 => {
                push_in(u - al / w, 0.0, s);
                push_in(u, s, f64::INFINITY);
            }
            PenaltyKind::Lsp => {
                // w t^2 + w (theta - u) t + (alpha - w u theta) = 0
                let b = w * (s - u);
                let c = al - w * u * s;
                let disc = b * b - 4.0 * w * c;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    push_in((-b + sq) / (2.0 * w), 0.0, f64::INFINITY);
                    push_in((-b - sq) / (2.0 * w), 0.0, f64::INFINITY);
                }
            }
        }
        out
    }

    /// All points where the global minimizer of `pen(x) + (w/2)(x - v)^2`
    /// (over the whole line or any interval) may lie, apart from interval ends.
    fn candidates(&self, v: f64, w: f64) -> Vec<f64> {
        let mut c = vec![0.0];
        for b in self.breakpoints() {
            c.push(b);
            c.push(-b);
        }
        c.extend(self.positive_stationary_points(v, w));
        c.extend(self.positive_stationary_points(-v, w).into_iter().map(|t| -t));
        c
    }

    fn prox_objective(&self, x: f64, v: f64, w: f64) -> f64 {
        self.value(x) + 0.5 * w * (x - v) * (x - v)
    }

    fn best_of(&self, mut cands: Vec<f64>, v: f64, w: f64) -> f64 {
        cands.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
        let mut best = cands[0];
        let mut best_val = self.prox_objective(best, v, w);
        for &x in &cands[1..] {
            let val = self.prox_objective(x, v, w);
            if val < best_val - TIE_TOL * best_val.abs().max(1.0) {
                best = x;
                best_val = val;
            }
        }
        best
    }

    /// Global minimizer of `pen(x) + (w/2)(x - v)^2`; `w` must be positive.
    pub fn prox(&self, v: f64, w: f64) -> f64 {
        if self.kind == PenaltyKind::L1 {
            return soft_threshold_scalar(v, self.alpha / w);
        }
        self.best_of(self.candidates(v, w), v, w)
    }

    /// Global minimizer of `pen(x) + (w/2)(x - v)^2` over `[lo, hi]`.
    pub fn prox_interval(&self, v: f64, w: f64, lo: f64, hi: f64) -> f64 {
        let mut cands: Vec<f64> = self
            .candidates(v, w)
            .into_iter()
            .filter(|&x| x >= lo && x <= hi)
            .collect();
        cands.push(lo);
        cands.push(hi);
        self.best_of(cands, v, w)
    }

    /// General (limiting) subdifferential at `x` as a union of closed intervals.
    pub fn subdifferential(&self, x: f64) -> Vec<(f64, f64)> {
        let (al, s) = (self.alpha, self.shape);
        if x == 0.0 {
            let d0 = self.lipschitz();
            return vec![(-d0, d0)];
        }
        let t = x.abs();
        let sg = x.signum();
        let d = match self.kind {
            PenaltyKind::L1 => al,
            PenaltyKind::Scad => {
                if t <= al {
                    al
                } else if t <= s * al {
                    (s * al - t) / (s - 1.0)
                } else {
                    0.0
                }
            }
            PenaltyKind::Mcp => (al - t / s).max(0.0),
            PenaltyKind::CappedL1 => {
                if t < s {
                    al
                } else if t > s {
                    0.0
                } else {
                    return vec![(0.0, 0.0), (sg * al, sg * al)];
                }
            }
            PenaltyKind::Lsp => al / (s + t),
        };
        vec![(sg * d, sg * d)]
    }

    pub fn subgrad_select(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            self.subdifferential(x)[0].0
        }
    }

    pub fn dist_to_subdiff(&self, x: f64, g: f64) -> f64 {
        self.subdifferential(x)
            .into_iter()
            .map(|(lo, hi)| {
                if g < lo {
                    lo - g
                } else if g > hi {
                    g - hi
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn soft_threshold_scalar(v: f64, tau: f64) -> f64 {
    v.signum() * (v.abs() - tau).max(0.0)
}

/// Coordinatewise soft shrinkage `sign(v) max(|v| - tau, 0)`.
pub fn soft_threshold(v: &Vector, tau: f64) -> Result<Vector> {
    if !(tau > 0.0) {
        return Err(invalid("tau", format!("must be positive, got {tau}")));
    }
    Ok(v.map(|x| soft_threshold_scalar(x, tau)))
}

/// Global minimizer of `penalty(x) + (w/2)(x - v)^2`.
pub fn prox_scalar_penalty(v: f64, w: f64, penalty: &ScalarPenalty) -> Result<f64> {
    if !(w > 0.0) {
        return Err(invalid("w", format!("must be positive, got {w}")));
    }
    Ok(penalty.prox(v, w))
}

/// Euclidean projection onto the centered ball of the given radius.
pub fn project_ball(v: &Vector, radius: f64) -> Vector {
    let n = v.norm();
    if n <= radius {
        v.clone()
    } else {
        v * (radius / n)
    }
}

/// Coordinatewise clamp onto `[lo, hi]`.
pub fn project_box(v: &Vector, lo: &Vector, hi: &Vector) -> Result<Vector> {
    crate::error::check_dim("box lower bound", v.len(), lo.len())?;
    crate::error::check_dim("box upper bound", v.len(), hi.len())?;
    if let Some(j) = (0..v.len()).find(|&j| !(lo[j] <= hi[j])) {
        return Err(invalid(
            "box",
            format!("lo[{j}] = {} exceeds hi[{j}] = {}", lo[j], hi[j]),
        ));
    }
    Ok(Vector::from_fn(v.len(), |j, _| v[j].clamp(lo[j], hi[j])))
}

/// The zero regularizer.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroRegularizer;

impl Regularizer for ZeroRegularizer {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn prox(&self, v: &Vector, _weight: f64) -> Vector {
        v.clone()
    }

    fn prox_box(&self, v: &Vector, _weight: f64, lo: &Vector, hi: &Vector) -> Option<Vector> {
        project_box(v, lo, hi).ok()
    }

    fn subgrad_select(&self, x: &Vector) -> Vector {
        Vector::zeros(x.len())
    }

    fn dist_to_subdiff(&self, _x: &Vector, g: &Vector) -> f64 {
        g.norm()
    }

    fn lipschitz_const(&self) -> Option<f64> {
        Some(0.0)
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn kind(&self) -> RegularizerKind {
        RegularizerKind::Zero
    }
}

/// `x -> sum_j penalty(x_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparablePenalty {
    penalty: ScalarPenalty,
}

impl SeparablePenalty {
    pub fn new(penalty: ScalarPenalty) -> Self {
        SeparablePenalty { penalty }
    }

    pub fn l1(alpha: f64) -> Result<Self> {
        Ok(Self::new(ScalarPenalty::l1(alpha)?))
    }

    pub fn penalty(&self) -> &ScalarPenalty {
        &self.penalty
    }
}

impl Regularizer for SeparablePenalty {
    fn value(&self, x: &Vector) -> f64 {
        x.iter().map(|&t| self.penalty.value(t)).sum()
    }

    fn prox(&self, v: &Vector, weight: f64) -> Vector {
        v.map(|t| self.penalty.prox(t, weight))
    }

    fn prox_box(&self, v: &Vector, weight: f64, lo: &Vector, hi: &Vector) -> Option<Vector> {
        if lo.len() != v.len() || hi.len() != v.len() {
            return None;
        }
        Some(Vector::from_fn(v.len(), |j, _| {
            self.penalty.prox_interval(v[j], weight, lo[j], hi[j])
        }))
    }

    fn subgrad_select(&self, x: &Vector) -> Vector {
        x.map(|t| self.penalty.subgrad_select(t))
    }

    fn dist_to_subdiff(&self, x: &Vector, g: &Vector) -> f64 {
        x.iter()
            .zip(g.iter())
            .map(|(&xj, &gj)| self.penalty.dist_to_subdiff(xj, gj).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn lipschitz_const(&self) -> Option<f64> {
        Some(self.penalty.lipschitz())
    }

    fn is_convex(&self) -> bool {
        self.penalty.is_convex()
    }

    fn kind(&self) -> RegularizerKind {
        match self.penalty.kind {
            PenaltyKind::L1 => RegularizerKind::L1 {
                weight: self.penalty.alpha,
            },
            _ => RegularizerKind::Other,
        }
    }
}
