//! Generalized conditional gradient for `min f(x) + r(x)` over a bounded set.
//!
//! Each iteration minimizes the partial linearization
//! `f(x) + grad f(x)'(y - x) + r(y)` over the set and moves toward the
//! minimizer with a step chosen from the Hölder upper model of `f`.

use crate::block::{BlockVector, ConstraintSet, ProblemSpec, RegularizerKind};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{sym_min_eigenvalue, Vector};

/// Feasibility tolerance for starting points.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcgConfig {
    pub max_iters: usize,
    pub eps: f64,
    /// Take full steps `alpha = 1`; valid for concave `f`.
    pub concave_mode: bool,
}

impl GcgConfig {
    pub fn new(max_iters: usize, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(invalid("eps", format!("must be positive, got {eps}")));
        }
        Ok(GcgConfig {
            max_iters,
            eps,
            concave_mode: false,
        })
    }

    pub fn concave(mut self) -> Self {
        self.concave_mode = true;
        self
    }
}

/// Quantities recorded at iterate `x^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcgRecord {
    pub phi: f64,
    pub delta_l: f64,
    pub alpha: f64,
    pub d_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcgTrace {
    pub records: Vec<GcgRecord>,
    /// Index of the record with the smallest `delta_l`.
    pub best: usize,
    /// Whether the run stopped on `delta_l <= eps`.
    pub converged: bool,
}

fn single_block(p: &ProblemSpec) -> Result<()> {
    if p.num_blocks() != 1 {
        return Err(invalid(
            "problem",
            format!("expected a single block, got {}", p.num_blocks()),
        ));
    }
    if p.affine().is_some() {
        return Err(Error::UnsupportedPairing(
            "conditional gradient with an affine constraint".into(),
        ));
    }
    Ok(())
}

fn wrap(x: &Vector) -> BlockVector {
    BlockVector::from_blocks_unchecked(vec![x.clone()])
}

/// `argmin_{y in [lo,hi]} g y + w|y|`, preferring zero, then `lo`, then `hi`.
fn l1_box_coordinate(g: f64, w: f64, lo: f64, hi: f64) -> f64 {
    let obj = |y: f64| g * y + w * y.abs();
    let mut cands = Vec::with_capacity(3);
    if lo <= 0.0 && 0.0 <= hi {
        cands.push(0.0);
    }
    cands.push(lo);
    cands.push(hi);
    let mut best = cands[0];
    for &c in &cands[1..] {
        if obj(c) < obj(best) {
            best = c;
        }
    }
    best
}

fn linear_minimizer(p: &ProblemSpec, g: &Vector) -> Result<Vector> {
    let reg = p.reg(0);
    let set = p.set(0);
    match (reg.kind(), set) {
        (_, ConstraintSet::Whole { .. }) => Err(Error::UnsupportedPairing(format!(
            "linearized subproblem of {reg:?} over the whole space"
        ))),
        (RegularizerKind::Zero, _) => set.lmo(g),
        (RegularizerKind::L1 { weight }, ConstraintSet::Box { lo, hi }) => Ok(Vector::from_fn(
            g.len(),
            |j, _| l1_box_coordinate(g[j], weight, lo[j], hi[j]),
        )),
        (RegularizerKind::L1 { weight }, ConstraintSet::Ball { radius, .. }) => {
            let s = g.map(|t| t.signum() * (t.abs() - weight).max(0.0));
            let n = s.norm();
            if n == 0.0 {
                Ok(Vector::zeros(g.len()))
            } else {
                Ok(s * (-radius / n))
            }
        }
        (RegularizerKind::Other, _) => Err(Error::UnsupportedPairing(format!(
            "linearized subproblem of {reg:?} over {set:?}"
        ))),
    }
}

/// Minimizer over the set of `grad f(x)'(y - x) + r(y)`.
pub fn linearized_subproblem(p: &ProblemSpec, x: &Vector) -> Result<Vector> {
    single_block(p)?;
    check_dim("iterate", p.dims()[0], x.len())?;
    if !p.set(0).contains(x, FEASIBILITY_TOL) {
        return Err(Error::Infeasible("point lies outside the constraint set".into()));
    }
    linear_minimizer(p, &p.f().grad_block(&wrap(x), 0))
}

/// Exact minimizer over `[0, 1]` of
/// `a gd + a^p (rho/2) D + (1 - a) r_x + a r_y`.
pub fn line_search(g_dot_d: f64, d_norm_p: f64, r_x: f64, r_y: f64, p: f64, rho: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(invalid("p", format!("must exceed 1, got {p}")));
    }
    if !(rho > 0.0) {
        return Err(invalid("rho", format!("must be positive, got {rho}")));
    }
    if !(d_norm_p >= 0.0) {
        return Err(invalid("d_norm_p", format!("must be nonnegative, got {d_norm_p}")));
    }
    let c = g_dot_d + r_y - r_x;
    if c >= 0.0 {
        return Ok(0.0);
    }
    if d_norm_p == 0.0 {
        return Ok(1.0);
    }
    // the derivative c + (p rho D / 2) a^(p-1) is increasing with a single root
    let root = (-2.0 * c / (p * rho * d_norm_p)).powf(1.0 / (p - 1.0));
    Ok(root.clamp(0.0, 1.0))
}

fn check_concave(p: &ProblemSpec) -> Result<()> {
    if let Some(q) = p.f().as_quadratic() {
        let neg = -q.q().clone();
        let scale = q.q().abs().max().max(1.0);
        if sym_min_eigenvalue(&neg)? < -1e-12 * scale {
            return Err(Error::Assumption("concave mode requires a concave f".into()));
        }
    }
    Ok(())
}

/// Runs the method from `x0`; returns the last iterate and the trace.
pub fn gcg_solve(p: &ProblemSpec, x0: &Vector, cfg: &GcgConfig) -> Result<(Vector, GcgTrace)> {
    single_block(p)?;
    check_dim("starting point", p.dims()[0], x0.len())?;
    if !(cfg.eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    if !p.reg(0).is_convex() {
        return Err(Error::Assumption(
            "conditional gradient requires a convex regularizer".into(),
        ));
    }
    if !p.set(0).contains(x0, FEASIBILITY_TOL) {
        return Err(Error::Infeasible("starting point lies outside the set".into()));
    }
    if cfg.concave_mode {
        check_concave(p)?;
    }
    let (hp, rho) = p.f().holder();
    let reg = p.reg(0);
    let f = p.f();
    let mut x = x0.clone();
    let mut records: Vec<GcgRecord> = Vec::new();
    let mut best = 0;
    let mut converged = false;
    for k in 0..cfg.max_iters {
        let bx = wrap(&x);
        let g = f.grad_block(&bx, 0);
        let y = linear_minimizer(p, &g)?;
        let d = &y - &x;
        let (r_x, r_y) = (reg.value(&x), reg.value(&y));
        let gd = g.dot(&d);
        let delta_l = -gd + r_x - r_y;
        let phi = f.value(&bx) + r_x;
        let d_norm_p: f64 = d.iter().map(|t| t.abs().powf(hp)).sum();
        let mut rec = GcgRecord {
            phi,
            delta_l,
            alpha: 0.0,
            d_norm: d.norm(),
        };
        if records.is_empty() || delta_l < records[best].delta_l {
            best = k;
        }
        if delta_l <= cfg.eps {
            records.push(rec);
            converged = true;
            break;
        }
        rec.alpha = if cfg.concave_mode {
            1.0
        } else {
            line_search(gd, d_norm_p, r_x, r_y, hp, rho)?
        };
        x += d * rec.alpha;
        records.push(rec);
    }
    Ok((
        x,
        GcgTrace {
            records,
            best,
            converged,
        },
    ))
}

fn ceil_snapped(v: f64) -> u64 {
    (v * (1.0 - 1e-12)).ceil().max(0.0) as u64
}

/// `ceil(2 (phi0 - phi*) (D^p rho)^(q-1) / eps^q)` with `q = p / (p - 1)`.
pub fn gcg_iteration_bound(phi0: f64, phi_star: f64, diam: f64, rho: f64, p: f64, eps: f64) -> Result<u64> {
    if !(p > 1.0) {
        return Err(invalid("p", format!("must exceed 1, got {p}")));
    }
    if !(rho > 0.0 && diam > 0.0) {
        return Err(invalid("rho", "rho and the diameter must be positive"));
    }
    let scale = diam.powf(p) * rho;
    if !(eps > 0.0 && eps < scale) {
        return Err(invalid("eps", format!("must lie in (0, {scale}), got {eps}")));
    }
    if phi0 < phi_star {
        return Err(invalid("phi_star", "exceeds the starting value"));
    }
    let q = p / (p - 1.0);
    Ok(ceil_snapped(
        2.0 * (phi0 - phi_star) * scale.powf(q - 1.0) / eps.powf(q),
    ))
}

/// `ceil((phi0 - phi*) / eps)`, the full-step bound for concave `f`.
pub fn gcg_concave_bound(phi0: f64, phi_star: f64, eps: f64) -> Result<u64> {
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    if phi0 < phi_star {
        return Err(invalid("phi_star", "exceeds the starting value"));
    }
    Ok(ceil_snapped((phi0 - phi_star) / eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::{Quadratic, Regularizer, Setting};
    use crate::linalg::Matrix;
    use crate::prox::{project_ball, SeparablePenalty, ZeroRegularizer};
    use std::sync::Arc;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    fn problem(f: Quadratic, reg: Arc<dyn Regularizer>, set: ConstraintSet) -> ProblemSpec {
        ProblemSpec::new(Arc::new(f), vec![reg], vec![set], None, Setting::Setting1).unwrap()
    }

    fn linear(c: &[f64]) -> Quadratic {
        let n = c.len();
        Quadratic::new(Matrix::zeros(n, n), v(c), 0.0, vec![n]).unwrap()
    }

    #[test]
    fn linear_over_ball() {
        let p = problem(linear(&[3.0, 4.0]), Arc::new(ZeroRegularizer), ConstraintSet::ball(2, 1.0).unwrap());
        let y = linearized_subproblem(&p, &v(&[0.1, 0.2])).unwrap();
        assert!((y - v(&[-0.6, -0.8])).norm() < 1e-15);
    }

    #[test]
    fn zero_gradient_keeps_linearization_value() {
        let p = problem(linear(&[0.0, 0.0]), Arc::new(ZeroRegularizer), ConstraintSet::cube(2, -1.0, 1.0).unwrap());
        let x = v(&[0.2, 0.3]);
        let y = linearized_subproblem(&p, &x).unwrap();
        assert!(p.set(0).contains(&y, 0.0));
    }

    #[test]
    fn l1_over_box() {
        // gradient (0.5, -2) at the origin
        let p = problem(
            linear(&[0.5, -2.0]),
            Arc::new(SeparablePenalty::l1(1.0).unwrap()),
            ConstraintSet::cube(2, -1.0, 1.0).unwrap(),
        );
        let y = linearized_subproblem(&p, &v(&[0.0, 0.0])).unwrap();
        assert_eq!(y, v(&[0.0, 1.0]));
    }

    #[test]
    fn unsupported_and_infeasible() {
        let mcp = SeparablePenalty::new(crate::prox::ScalarPenalty::mcp(1.0, 2.0).unwrap());
        let p = problem(linear(&[1.0]), Arc::new(mcp), ConstraintSet::cube(1, -1.0, 1.0).unwrap());
        assert!(matches!(linearized_subproblem(&p, &v(&[0.0])), Err(Error::UnsupportedPairing(_))));
        let cfg = GcgConfig::new(10, 1e-6).unwrap();
        assert!(matches!(gcg_solve(&p, &v(&[0.0]), &cfg), Err(Error::Assumption(_))));
        let q = problem(linear(&[1.0]), Arc::new(ZeroRegularizer), ConstraintSet::cube(1, -1.0, 1.0).unwrap());
        assert!(matches!(gcg_solve(&q, &v(&[2.0]), &cfg), Err(Error::Infeasible(_))));
        assert!(GcgConfig::new(10, 0.0).is_err());
    }

    #[test]
    fn line_search_examples() {
        assert_eq!(line_search(-4.0, 2.0, 0.0, 1.0, 2.0, 1.0).unwrap(), 1.0);
        assert_eq!(line_search(1.0, 2.0, 0.0, 1.0, 2.0, 1.0).unwrap(), 0.0);
        let a = line_search(-1.0, 1.0, 0.5, 0.5, 3.0, 2.0).unwrap();
        assert!((a - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(line_search(-1.0, 1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        // interior p = 2 root
        let a = line_search(-1.0, 4.0, 0.0, 0.0, 2.0, 1.0).unwrap();
        assert!((a - 0.25).abs() < 1e-15);
    }

    #[test]
    fn line_search_beats_grid_p3() {
        let phi = |a: f64| -a + a.powi(3);
        let a = line_search(-1.0, 1.0, 0.0, 0.0, 3.0, 2.0).unwrap();
        for j in 0..=1_000_000 {
            let t = j as f64 * 1e-6;
            assert!(phi(a) <= phi(t) + 1e-12);
        }
    }

    #[test]
    fn iteration_bound_examples() {
        assert_eq!(gcg_iteration_bound(10.0, 0.0, 2.0, 1.0, 2.0, 0.1).unwrap(), 8000);
        assert_eq!(gcg_iteration_bound(1.0, 0.0, 1.0, 1.0, 3.0, 0.01).unwrap(), 2000);
        // near the upper end of the range the bound approaches 2 (phi0 - phi*) / (D^2 rho)
        let b = gcg_iteration_bound(10.0, 0.0, 2.0, 1.0, 2.0, 4.0 * (1.0 - 1e-14)).unwrap();
        assert_eq!(b, 5);
        assert!(gcg_iteration_bound(10.0, 0.0, 2.0, 1.0, 2.0, 4.0).is_err());
        assert!(gcg_iteration_bound(10.0, 0.0, 2.0, 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn stationary_start_returns_after_one_record() {
        let p = problem(linear(&[1.0, 1.0]), Arc::new(ZeroRegularizer), ConstraintSet::cube(2, 0.0, 1.0).unwrap());
        let cfg = GcgConfig::new(100, 1e-9).unwrap();
        let (x, tr) = gcg_solve(&p, &v(&[0.0, 0.0]), &cfg).unwrap();
        assert_eq!(x, v(&[0.0, 0.0]));
        assert_eq!(tr.records.len(), 1);
        assert!(tr.converged);
    }

    #[test]
    fn projection_problem_converges() {
        // f = 0.5||x - c||^2 with c outside the unit ball
        let c = v(&[2.0, -1.0, 0.5]);
        let f = Quadratic::new(Matrix::identity(3, 3), -&c, 0.5 * c.norm_squared(), vec![3]).unwrap();
        let p = problem(f, Arc::new(ZeroRegularizer), ConstraintSet::ball(3, 1.0).unwrap());
        let cfg = GcgConfig::new(200_000, 1e-6).unwrap();
        let (x, tr) = gcg_solve(&p, &v(&[0.0, 0.0, 0.0]), &cfg).unwrap();
        assert!(tr.converged);
        assert!((x - project_ball(&c, 1.0)).norm() < 1e-2);
        for w in tr.records.windows(2) {
            assert!(w[1].phi <= w[0].phi + 1e-12);
        }
    }
}
