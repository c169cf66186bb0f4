//! Proximal block coordinate descent and its dummy-block ADMM form.

use std::sync::Arc;

use super::{update_blocks, SubproblemMode};
use crate::block::{eval_objective, Affine, BlockVector, ProblemSpec, SmoothFunction};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::subproblem::{BlockSolver, BlockSubproblem, BlockUpdate, ProxMetric};

fn check_bcd(p: &ProblemSpec, x: &BlockVector, metrics: &[ProxMetric]) -> Result<()> {
    if p.affine().is_some() {
        return Err(Error::UnsupportedPairing(
            "proximal BCD on a problem with an affine constraint".into(),
        ));
    }
    x.check_dims(p.dims())?;
    check_dim("number of metrics", p.num_blocks(), metrics.len())
}

/// One cycle of exact proximal block minimization over all blocks.
pub fn proximal_bcd_step(p: &ProblemSpec, x: &BlockVector, metrics: &[ProxMetric]) -> Result<BlockVector> {
    check_bcd(p, x, metrics)?;
    let mut next = x.clone();
    update_blocks(p, &mut next, None, 1.0, metrics, SubproblemMode::Exact, p.num_blocks())?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdResult {
    pub x: BlockVector,
    pub iters: usize,
    /// Objective after each cycle.
    pub objective: Vec<f64>,
    /// `sum_i ||x_i^k - x_i^{k+1}||^2` for each cycle.
    pub step_sq: Vec<f64>,
    pub converged: bool,
}

/// Cycles until the squared step drops to `eps` or `max_iters` cycles ran.
pub fn proximal_bcd_solve(
    p: &ProblemSpec,
    x0: &BlockVector,
    metrics: &[ProxMetric],
    max_iters: usize,
    eps: f64,
) -> Result<BcdResult> {
    check_bcd(p, x0, metrics)?;
    let mut x = x0.clone();
    let mut out = BcdResult {
        x: x0.clone(),
        iters: 0,
        objective: Vec::new(),
        step_sq: Vec::new(),
        converged: false,
    };
    for _ in 0..max_iters {
        let next = proximal_bcd_step(p, &x, metrics)?;
        let step = x.dist_sq(&next);
        out.objective.push(eval_objective(p, &next)?);
        out.step_sq.push(step);
        out.iters += 1;
        x = next;
        if step <= eps {
            out.converged = true;
            break;
        }
    }
    out.x = x;
    Ok(out)
}

/// `f` extended by a block it does not depend on.
#[derive(Debug)]
struct Lifted {
    inner: Arc<dyn SmoothFunction>,
    dims: Vec<usize>,
}

fn truncate(x: &BlockVector, n: usize) -> BlockVector {
    BlockVector::from_blocks_unchecked(x.blocks()[..n].to_vec())
}

impl SmoothFunction for Lifted {
    fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn value(&self, x: &BlockVector) -> f64 {
        self.inner.value(&truncate(x, self.dims.len() - 1))
    }

    fn grad_block(&self, x: &BlockVector, i: usize) -> Vector {
        let n = self.dims.len() - 1;
        if i == n {
            Vector::zeros(self.dims[n])
        } else {
            self.inner.grad_block(&truncate(x, n), i)
        }
    }

    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }

    fn holder(&self) -> (f64, f64) {
        self.inner.holder()
    }
}

/// Solves a lifted block subproblem with the original problem's solver; the
/// multiplier and penalty terms are constant because `A_i = 0`.
#[derive(Debug)]
struct LiftedSolver {
    original: ProblemSpec,
}

impl BlockSolver for LiftedSolver {
    fn solve(&self, sub: &BlockSubproblem<'_>) -> Result<BlockUpdate> {
        let i = sub.block;
        let solver = self
            .original
            .block_solver(i)
            .ok_or(Error::MissingBlockSolver(i))?;
        let point = truncate(sub.point, self.original.num_blocks());
        solver.solve(&BlockSubproblem {
            problem: &self.original,
            block: i,
            point: &point,
            multiplier: None,
            beta: sub.beta,
            metric: sub.metric,
        })
    }
}

/// Adds a last block `x_{N+1}` with constraint `x_{N+1} = b` and `A_i = 0`.
pub fn dummy_block_reformulation(p: &ProblemSpec, b: Vector) -> Result<ProblemSpec> {
    if p.affine().is_some() {
        return Err(Error::UnsupportedPairing(
            "dummy-block reformulation of a constrained problem".into(),
        ));
    }
    let n = p.num_blocks();
    let m = b.len();
    let mut dims = p.dims().to_vec();
    dims.push(m);
    let mut mats: Vec<Matrix> = p.dims().iter().map(|&d| Matrix::zeros(m, d)).collect();
    mats.push(Matrix::identity(m, m));
    let f = Arc::new(Lifted {
        inner: p.f_arc(),
        dims,
    });
    let mut out = ProblemSpec::new(
        f,
        p.regs()[..n].to_vec(),
        p.sets()[..n].to_vec(),
        Some(Affine::new(mats, b)?),
        p.setting(),
    )?
    .with_f_star(p.f_star());
    let lifted: Arc<dyn BlockSolver> = Arc::new(LiftedSolver { original: p.clone() });
    for i in 0..n {
        if p.block_solver(i).is_some() {
            out = out.with_block_solver(i, Arc::clone(&lifted))?;
        }
    }
    Ok(out)
}
