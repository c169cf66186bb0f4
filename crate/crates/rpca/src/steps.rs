//! Closed-form block updates of the four algorithms.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{mismatch, Result, RpcaError};
use crate::params::RpcaParams;
use crate::tensor::{hadamard_gram, mttkrp, CpFactors, Tensor3};

/// Iterate of any of the four algorithms; the BCD pair leaves `noise` and
/// `lambda` at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RpcaState {
    pub factors: CpFactors,
    pub e: Tensor3,
    pub z: Tensor3,
    pub noise: Tensor3,
    pub lambda: Tensor3,
}

/// Stream of the seeded generator reserved for solver initialization.
pub const INIT_STREAM: u64 = 1;

impl RpcaState {
    /// Standard normal factors drawn from `seed`; `Z = T`, other blocks zero.
    pub fn initial(t: &Tensor3, rank: usize, seed: u64) -> Result<Self> {
        if rank == 0 {
            return Err(crate::error::invalid("rank", "must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let [n1, n2, n3] = t.dims();
        let mut draw = |r: usize| DMatrix::from_fn(r, rank, |_, _| StandardNormal.sample(&mut rng));
        let (a, b, c) = (draw(n1), draw(n2), draw(n3));
        Ok(RpcaState {
            factors: CpFactors::new(a, b, c)?,
            e: Tensor3::zeros(t.dims()),
            z: t.clone(),
            noise: Tensor3::zeros(t.dims()),
            lambda: Tensor3::zeros(t.dims()),
        })
    }

    pub fn check(&self, t: &Tensor3) -> Result<()> {
        if self.factors.dims() != t.dims() {
            return Err(mismatch("factor dims", format!("{:?}", t.dims()), format!("{:?}", self.factors.dims())));
        }
        for (x, name) in [(&self.e, "E"), (&self.z, "Z"), (&self.noise, "noise"), (&self.lambda, "multiplier")] {
            x.check_same_dims(t, name)?;
        }
        Ok(())
    }

    /// Squared distance over the primal blocks.
    pub fn dist_sq(&self, other: &RpcaState) -> f64 {
        let f = (&self.factors.a - &other.factors.a).norm_squared()
            + (&self.factors.b - &other.factors.b).norm_squared()
            + (&self.factors.c - &other.factors.c).norm_squared();
        let t = |x: &Tensor3, y: &Tensor3| (x.vector() - y.vector()).norm_squared();
        f + t(&self.e, &other.e) + t(&self.z, &other.z) + t(&self.noise, &other.noise)
    }
}

/// `M (G + ridge I)^{-1}`; with zero ridge a failed factorization falls back
/// to the pseudo-inverse and reports it.
fn right_solve(m: &DMatrix<f64>, g: &DMatrix<f64>, ridge: f64) -> Result<(DMatrix<f64>, bool)> {
    let r = g.nrows();
    let k = g + DMatrix::identity(r, r) * ridge;
    if let Some(ch) = k.clone().cholesky() {
        let x = ch.solve(&m.transpose()).transpose();
        if x.iter().all(|v| v.is_finite()) {
            return Ok((x, false));
        }
    }
    if ridge > 0.0 {
        return Err(RpcaError::Singular(format!("{r}x{r} factor")));
    }
    let pinv = k
        .pseudo_inverse(1e-12 * g.amax().max(1e-300))
        .map_err(|e| RpcaError::Singular(e.to_string()))?;
    Ok((m * pinv, true))
}

/// Sequential `A, B, C` updates against `z` with ridges `d_i / 2`.
/// Returns whether a pseudo-inverse was needed.
fn update_factors(z: &Tensor3, f: &mut CpFactors, delta: [f64; 3]) -> Result<bool> {
    let mut fallback = false;
    let g = hadamard_gram(&f.c, &f.b);
    let m = mttkrp(z, f, 1)? + &f.a * (0.5 * delta[0]);
    let (a, fb) = right_solve(&m, &g, 0.5 * delta[0])?;
    f.a = a;
    fallback |= fb;
    let g = hadamard_gram(&f.c, &f.a);
    let m = mttkrp(z, f, 2)? + &f.b * (0.5 * delta[1]);
    let (b, fb) = right_solve(&m, &g, 0.5 * delta[1])?;
    f.b = b;
    fallback |= fb;
    let g = hadamard_gram(&f.b, &f.a);
    let m = mttkrp(z, f, 3)? + &f.c * (0.5 * delta[2]);
    let (c, fb) = right_solve(&m, &g, 0.5 * delta[2])?;
    f.c = c;
    fallback |= fb;
    Ok(fallback)
}

fn shrink(v: f64, tau: f64) -> f64 {
    v.signum() * (v.abs() - tau).max(0.0)
}

fn tensor(dims: [usize; 3], v: DVector<f64>) -> Tensor3 {
    Tensor3::from_vector(dims, v).expect("dims preserved")
}

/// Shared `A, B, C, E, Z` part of the two ADMM steps.
fn admm_primal(t: &Tensor3, s: &RpcaState, p: &RpcaParams) -> Result<RpcaState> {
    s.check(t)?;
    let dims = t.dims();
    let d = p.delta;
    let beta = p.beta;
    let mut factors = s.factors.clone();
    update_factors(&s.z, &mut factors, [d[0], d[1], d[2]])?;
    let m = factors.reconstruct();
    let (tv, lv, nv) = (t.vector(), s.lambda.vector(), s.noise.vector());
    let zv = s.z.vector();
    let ev = s.e.vector();
    let tau = p.alpha / (beta + d[3]);
    let e = DVector::from_fn(t.len(), |i, _| {
        let u = (beta * (tv[i] + lv[i] / beta - nv[i] - zv[i]) + d[3] * ev[i]) / (beta + d[3]);
        shrink(u, tau)
    });
    let den = 2.0 + 2.0 * d[4] + beta;
    let mv = m.vector();
    let z = DVector::from_fn(t.len(), |i, _| {
        (2.0 * mv[i] + 2.0 * d[4] * zv[i] + lv[i] - beta * (e[i] + nv[i] - tv[i])) / den
    });
    Ok(RpcaState {
        factors,
        e: tensor(dims, e),
        z: tensor(dims, z),
        noise: s.noise.clone(),
        lambda: s.lambda.clone(),
    })
}

fn dual_update(t: &Tensor3, next: &mut RpcaState, beta: f64) {
    let r = next.z.vector() + next.e.vector() + next.noise.vector() - t.vector();
    *next.lambda.vector_mut() -= r * beta;
}

/// One proximal ADMM-g iteration: gradient step on the noise block.
pub fn rpca_admm_g_step(t: &Tensor3, s: &RpcaState, p: &RpcaParams) -> Result<RpcaState> {
    let mut next = admm_primal(t, s, p)?;
    let (nv, lv, tv) = (s.noise.vector(), s.lambda.vector(), t.vector());
    let (ev, zv) = (next.e.vector(), next.z.vector());
    let noise = DVector::from_fn(t.len(), |i, _| {
        nv[i] - p.gamma * (2.0 * p.alpha_n * nv[i] - lv[i] + p.beta * (ev[i] + zv[i] + nv[i] - tv[i]))
    });
    next.noise = tensor(t.dims(), noise);
    dual_update(t, &mut next, p.beta);
    Ok(next)
}

/// One proximal ADMM-m iteration: majorized noise-block update with modulus `p.lipschitz`.
pub fn rpca_admm_m_step(t: &Tensor3, s: &RpcaState, p: &RpcaParams) -> Result<RpcaState> {
    let mut next = admm_primal(t, s, p)?;
    let (nv, lv, tv) = (s.noise.vector(), s.lambda.vector(), t.vector());
    let (ev, zv) = (next.e.vector(), next.z.vector());
    let l = p.lipschitz;
    let noise = DVector::from_fn(t.len(), |i, _| {
        ((l - 2.0 * p.alpha_n) * nv[i] + lv[i] - p.beta * (ev[i] + zv[i] - tv[i])) / (l + p.beta)
    });
    next.noise = tensor(t.dims(), noise);
    dual_update(t, &mut next, p.beta);
    Ok(next)
}

/// One cycle over `A, B, C, Z, E` of the unconstrained model; `proximal`
/// adds `(delta_i/2)||. - .^k||^2` to each block. The flag reports a
/// pseudo-inverse fallback in a factor update.
pub fn rpca_bcd_step(t: &Tensor3, s: &RpcaState, p: &RpcaParams, proximal: bool) -> Result<(RpcaState, bool)> {
    s.check(t)?;
    let dims = t.dims();
    let d = if proximal { p.delta } else { [0.0; 5] };
    let an = p.alpha_n;
    let mut factors = s.factors.clone();
    let fallback = update_factors(&s.z, &mut factors, [d[0], d[1], d[2]])?;
    let m = factors.reconstruct();
    let (tv, ev, zv, mv) = (t.vector(), s.e.vector(), s.z.vector(), m.vector());
    let z = DVector::from_fn(t.len(), |i, _| {
        (2.0 * mv[i] + 2.0 * an * (tv[i] - ev[i]) + d[4] * zv[i]) / (2.0 + 2.0 * an + d[4])
    });
    let w = 2.0 * an + d[3];
    let e = DVector::from_fn(t.len(), |i, _| {
        shrink((2.0 * an * (tv[i] - z[i]) + d[3] * ev[i]) / w, p.alpha / w)
    });
    Ok((
        RpcaState {
            factors,
            e: tensor(dims, e),
            z: tensor(dims, z),
            noise: s.noise.clone(),
            lambda: s.lambda.clone(),
        },
        fallback,
    ))
}

/// `||Z - [[A,B,C]]||^2`.
pub fn fit_residual_sq(s: &RpcaState) -> f64 {
    (s.z.vector() - s.factors.reconstruct().vector()).norm_squared()
}

/// Augmented Lagrangian of the constrained model.
pub fn augmented_lagrangian(t: &Tensor3, s: &RpcaState, p: &RpcaParams) -> f64 {
    let r = s.z.vector() + s.e.vector() + s.noise.vector() - t.vector();
    fit_residual_sq(s) + p.alpha * s.e.vector().lp_norm(1) + p.alpha_n * s.noise.vector().norm_squared()
        - s.lambda.vector().dot(&r)
        + 0.5 * p.beta * r.norm_squared()
}

/// Objective of the unconstrained model.
pub fn penalized_objective(t: &Tensor3, s: &RpcaState, p: &RpcaParams) -> f64 {
    let r = s.z.vector() + s.e.vector() - t.vector();
    fit_residual_sq(s) + p.alpha * s.e.vector().lp_norm(1) + p.alpha_n * r.norm_squared()
}
