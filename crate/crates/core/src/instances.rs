//! Seeded test instances with known constants.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::admm::Variant;
use crate::block::{Affine, BlockVector, ConstraintSet, ProblemSpec, Quadratic, Regularizer, Setting};
use crate::error::Result;
use crate::linalg::{spectral_norm, Matrix, SpdFactor, Vector};
use crate::prox::{SeparablePenalty, ZeroRegularizer};
use crate::subproblem::ProxMetric;

fn gaussian<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `m x n` matrix with orthonormal columns (`n <= m`).
fn orthonormal_columns<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize) -> Matrix {
    let q = gaussian(rng, m, n).qr().q();
    q.columns(0, n).into_owned()
}

/// Symmetric positive definite `Q = c I + S` where `S` has zero diagonal
/// blocks on the first `iso` blocks, so those blocks of `Q` are `c I`.
fn coupled_spd<R: Rng + ?Sized>(rng: &mut R, dims: &[usize], iso: usize) -> Matrix {
    let n: usize = dims.iter().sum();
    let g = gaussian(rng, n, n);
    let mut s = (&g + g.transpose()) * 0.5;
    let mut off = 0;
    for &d in &dims[..iso] {
        s.view_mut((off, off), (d, d)).fill(0.0);
        off += d;
    }
    let c = spectral_norm(&s) + rng.random_range(0.2..1.0);
    s + Matrix::identity(n, n) * c
}

/// Block quadratic problem with `l1` regularizers and an affine coupling.
#[derive(Debug, Clone)]
pub struct AdmmInstance {
    pub problem: ProblemSpec,
    pub x0: BlockVector,
    pub lambda0: Vector,
    pub metrics: Vec<ProxMetric>,
    /// Exact infimum of `f`.
    pub f_star: f64,
}

/// `f = 0.5 x'Qx + c'x` over `num_blocks` blocks with `l1` on the first
/// `num_blocks - 1` blocks, `A_i` scaled orthonormal columns and `A_N = I`
/// (gradient variant) or a random full-row-rank `A_N` (majorization variant).
/// Exact block solvers are registered on every block.
pub fn random_admm_instance<R: Rng + ?Sized>(rng: &mut R, num_blocks: usize, variant: Variant) -> Result<AdmmInstance> {
    let m = rng.random_range(3..=4);
    let mut dims: Vec<usize> = (0..num_blocks - 1).map(|_| rng.random_range(1..=m.min(3))).collect();
    let n_last = match variant {
        Variant::G => m,
        Variant::M => m + rng.random_range(0..=1),
    };
    dims.push(n_last);
    let q = coupled_spd(rng, &dims, num_blocks - 1);
    let n: usize = dims.iter().sum();
    let c = gaussian_vec(rng, n);
    let f_star = -0.5 * c.dot(&SpdFactor::new(&q)?.solve(&c));
    let f = Arc::new(Quadratic::new(q, c, 0.0, dims.clone())?);
    let mut mats: Vec<Matrix> = dims[..num_blocks - 1]
        .iter()
        .map(|&d| orthonormal_columns(rng, m, d) * rng.random_range(0.5..1.5))
        .collect();
    mats.push(match variant {
        Variant::G => Matrix::identity(m, m),
        Variant::M => gaussian(rng, m, n_last) * 0.5 + Matrix::identity(m, n_last),
    });
    let b = gaussian_vec(rng, m);
    let regs: Vec<Arc<dyn Regularizer>> = (0..num_blocks - 1)
        .map(|_| Arc::new(SeparablePenalty::l1(rng.random_range(0.05..0.5)).unwrap()) as Arc<dyn Regularizer>)
        .collect();
    let sets = dims[..num_blocks - 1].iter().map(|&d| ConstraintSet::whole(d)).collect();
    let problem = ProblemSpec::new(f, regs, sets, Some(Affine::new(mats, b)?), Setting::Setting2)?
        .with_f_star(f_star)
        .with_quadratic_block_solvers()?;
    let metrics = dims[..num_blocks - 1]
        .iter()
        .map(|&d| ProxMetric::scaled_identity(d, rng.random_range(0.5..3.0)))
        .collect::<Result<Vec<_>>>()?;
    let x0 = BlockVector::new(dims.iter().map(|&d| gaussian_vec(rng, d)).collect())?;
    Ok(AdmmInstance {
        problem,
        x0,
        lambda0: Vector::zeros(m),
        metrics,
        f_star,
    })
}

/// Unconstrained block problem for proximal BCD: quadratic `f` with
/// isotropic diagonal blocks and a mix of convex and nonconvex penalties.
pub fn random_bcd_instance<R: Rng + ?Sized>(rng: &mut R, num_blocks: usize) -> Result<(ProblemSpec, BlockVector, Vec<ProxMetric>)> {
    use crate::prox::ScalarPenalty;
    let dims: Vec<usize> = (0..num_blocks).map(|_| rng.random_range(1..=3)).collect();
    let n: usize = dims.iter().sum();
    let q = coupled_spd(rng, &dims, num_blocks);
    let c = gaussian_vec(rng, n);
    let f = Arc::new(Quadratic::new(q, c, 0.0, dims.clone())?);
    let regs: Vec<Arc<dyn Regularizer>> = (0..num_blocks)
        .map(|i| {
            let alpha = rng.random_range(0.1..0.6);
            let pen = match i % 3 {
                0 => ScalarPenalty::l1(alpha),
                1 => ScalarPenalty::scad(alpha, 3.7),
                _ => ScalarPenalty::mcp(alpha, 2.0),
            };
            Arc::new(SeparablePenalty::new(pen.unwrap())) as Arc<dyn Regularizer>
        })
        .collect();
    let sets = dims.iter().map(|&d| ConstraintSet::whole(d)).collect();
    let p = ProblemSpec::new(f, regs, sets, None, Setting::Setting2)?.with_quadratic_block_solvers()?;
    let x0 = BlockVector::new(dims.iter().map(|&d| gaussian_vec(rng, d)).collect())?;
    let metrics = dims
        .iter()
        .map(|&d| ProxMetric::scaled_identity(d, rng.random_range(0.5..2.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok((p, x0, metrics))
}

/// Concave quadratic `-0.5 x'Px + c'x` over a box with `r = 0`, together with
/// a feasible start and the exact minimum (attained at a vertex).
pub fn concave_box_instance<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<(ProblemSpec, Vector, f64)> {
    let g = gaussian(rng, n, n);
    let psd = &g * g.transpose() * (1.0 / n as f64);
    let q = -((&psd + psd.transpose()) * 0.5);
    let c = gaussian_vec(rng, n);
    let lo = Vector::from_fn(n, |_, _| rng.random_range(-1.5..-0.5));
    let hi = Vector::from_fn(n, |_, _| rng.random_range(0.5..1.5));
    let f = Quadratic::new(q, c, 0.0, vec![n])?;
    let mut best = f64::INFINITY;
    for mask in 0u64..(1u64 << n) {
        let z = Vector::from_fn(n, |j, _| if mask >> j & 1 == 1 { hi[j] } else { lo[j] });
        let zb = BlockVector::from_blocks_unchecked(vec![z]);
        best = best.min(crate::block::SmoothFunction::value(&f, &zb));
    }
    let x0 = Vector::from_fn(n, |j, _| rng.random_range(lo[j]..hi[j]));
    let set = ConstraintSet::boxed(lo, hi)?;
    let p = ProblemSpec::new(Arc::new(f), vec![Arc::new(ZeroRegularizer)], vec![set], None, Setting::Setting1)?
        .with_f_star(best);
    Ok((p, x0, best))
}
