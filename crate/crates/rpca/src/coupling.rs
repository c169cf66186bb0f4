//! The smooth couplings of both models as block functions, with exact block
//! solvers, so the generic solvers can run on them.
//!
//! Blocks of the constrained model: `A, B, C, E, Z, noise` with
//! `E + Z + noise = T`. Blocks of the unconstrained model: `A, B, C, Z, E`.
//! Factors are flattened column-major, tensors in storage order.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ncopt::block::{Regularizer, SmoothFunction};
use ncopt::prox::{SeparablePenalty, ZeroRegularizer};
use ncopt::subproblem::{BlockSolver, BlockSubproblem, BlockUpdate};
use ncopt::{Affine, BlockVector, ConstraintSet, ProblemSpec, Setting};

use crate::error::{invalid, Result};
use crate::tensor::{hadamard_gram, mttkrp, CpFactors, Tensor3};

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Constrained,
    Penalized { t: Tensor3 },
}

/// `||Z - [[A,B,C]]||^2 + alpha_N ||noise||^2` (constrained model) or
/// `||Z - [[A,B,C]]||^2 + alpha_N ||Z + E - T||^2` (unconstrained model).
#[derive(Debug, Clone)]
pub struct RpcaCoupling {
    tdims: [usize; 3],
    rank: usize,
    alpha_n: f64,
    dims: Vec<usize>,
    model: Model,
}

impl RpcaCoupling {
    pub fn constrained(tdims: [usize; 3], rank: usize, alpha_n: f64) -> Self {
        let n = tdims.iter().product();
        RpcaCoupling {
            tdims,
            rank,
            alpha_n,
            dims: vec![tdims[0] * rank, tdims[1] * rank, tdims[2] * rank, n, n, n],
            model: Model::Constrained,
        }
    }

    pub fn penalized(t: &Tensor3, rank: usize, alpha_n: f64) -> Self {
        let tdims = t.dims();
        let n = t.len();
        RpcaCoupling {
            tdims,
            rank,
            alpha_n,
            dims: vec![tdims[0] * rank, tdims[1] * rank, tdims[2] * rank, n, n],
            model: Model::Penalized { t: t.clone() },
        }
    }

    fn z_index(&self) -> usize {
        match self.model {
            Model::Constrained => 4,
            Model::Penalized { .. } => 3,
        }
    }

    fn e_index(&self) -> usize {
        match self.model {
            Model::Constrained => 3,
            Model::Penalized { .. } => 4,
        }
    }

    pub fn factors(&self, x: &BlockVector) -> CpFactors {
        let m = |i: usize, rows: usize| DMatrix::from_column_slice(rows, self.rank, x.block(i).as_slice());
        CpFactors {
            a: m(0, self.tdims[0]),
            b: m(1, self.tdims[1]),
            c: m(2, self.tdims[2]),
        }
    }

    fn tensor(&self, v: &DVector<f64>) -> Tensor3 {
        Tensor3::from_vector(self.tdims, v.clone()).expect("block sizes match")
    }

    /// `Z - [[A, B, C]]`.
    fn fit_residual(&self, x: &BlockVector) -> DVector<f64> {
        x.block(self.z_index()) - self.factors(x).reconstruct().into_vector()
    }

    fn penalty_residual(&self, x: &BlockVector, t: &Tensor3) -> DVector<f64> {
        x.block(self.z_index()) + x.block(self.e_index()) - t.vector()
    }
}

impl SmoothFunction for RpcaCoupling {
    fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn value(&self, x: &BlockVector) -> f64 {
        let fit = self.fit_residual(x).norm_squared();
        match &self.model {
            Model::Constrained => fit + self.alpha_n * x.block(5).norm_squared(),
            Model::Penalized { t } => fit + self.alpha_n * self.penalty_residual(x, t).norm_squared(),
        }
    }

    fn grad_block(&self, x: &BlockVector, i: usize) -> DVector<f64> {
        if i < 3 {
            let f = self.factors(x);
            let r = self.tensor(&(-self.fit_residual(x)));
            let g = mttkrp(&r, &f, i + 1).expect("dims match") * 2.0;
            return DVector::from_column_slice(g.as_slice());
        }
        let fit = self.fit_residual(x) * 2.0;
        match &self.model {
            Model::Constrained => match i {
                3 => DVector::zeros(self.dims[3]),
                4 => fit,
                _ => x.block(5) * (2.0 * self.alpha_n),
            },
            Model::Penalized { t } => {
                let pen = self.penalty_residual(x, t) * (2.0 * self.alpha_n);
                if i == 3 {
                    fit + pen
                } else {
                    pen
                }
            }
        }
    }

    /// Modulus with respect to the tensor blocks, factors held fixed.
    fn lipschitz(&self) -> f64 {
        let a = self.alpha_n;
        match self.model {
            Model::Constrained => 2.0 * a.max(1.0),
            Model::Penalized { .. } => 1.0 + 2.0 * a + (1.0 + 4.0 * a * a).sqrt(),
        }
    }
}

/// Exact minimizer of every block subproblem of either model; requires an
/// isotropic proximal metric.
#[derive(Debug)]
pub struct RpcaBlockSolver {
    coupling: RpcaCoupling,
}

impl BlockSolver for RpcaBlockSolver {
    fn solve(&self, sub: &BlockSubproblem<'_>) -> ncopt::Result<BlockUpdate> {
        let cp = &self.coupling;
        let h = sub.metric.isotropic().ok_or_else(|| {
            ncopt::Error::UnsupportedPairing("RPCA block solver needs an isotropic metric".into())
        })?;
        let x = sub.point;
        let i = sub.block;
        if i < 3 {
            let f = cp.factors(x);
            let z = cp.tensor(x.block(cp.z_index()));
            let (g, own) = match i {
                0 => (hadamard_gram(&f.c, &f.b), &f.a),
                1 => (hadamard_gram(&f.c, &f.a), &f.b),
                _ => (hadamard_gram(&f.b, &f.a), &f.c),
            };
            let m = mttkrp(&z, &f, i + 1).map_err(|e| ncopt::Error::UnsupportedPairing(e.to_string()))? + own * (0.5 * h);
            let k = g + DMatrix::identity(cp.rank, cp.rank) * (0.5 * h);
            let ch = k
                .cholesky()
                .ok_or_else(|| ncopt::Error::Factorization(format!("factor block {i}")))?;
            let sol = ch.solve(&m.transpose()).transpose();
            return Ok(BlockUpdate {
                value: DVector::from_column_slice(sol.as_slice()),
                subgradient: None,
            });
        }
        let anchor = x.block(i);
        let recon = cp.factors(x).reconstruct().into_vector();
        let reg = sub.problem.reg(i);
        match &cp.model {
            Model::Constrained => {
                let s = sub
                    .other_residual()
                    .ok_or_else(|| ncopt::Error::UnsupportedPairing("constrained model without coupling".into()))?;
                let lam = sub.multiplier.cloned().unwrap_or_else(|| DVector::zeros(s.len()));
                let beta = sub.beta;
                if i == cp.e_index() {
                    let w = beta + h;
                    let v = (&lam - &s * beta + anchor * h) / w;
                    let e = reg.prox(&v, w);
                    let g = (&v - &e) * w;
                    Ok(BlockUpdate {
                        value: e,
                        subgradient: Some(g),
                    })
                } else {
                    let z = (recon * 2.0 + &lam - &s * beta + anchor * h) / (2.0 + beta + h);
                    Ok(BlockUpdate {
                        value: z,
                        subgradient: Some(DVector::zeros(anchor.len())),
                    })
                }
            }
            Model::Penalized { t } => {
                let a = cp.alpha_n;
                if i == cp.z_index() {
                    let e = x.block(cp.e_index());
                    let z = (recon * 2.0 + (t.vector() - e) * (2.0 * a) + anchor * h) / (2.0 + 2.0 * a + h);
                    Ok(BlockUpdate {
                        value: z,
                        subgradient: Some(DVector::zeros(anchor.len())),
                    })
                } else {
                    let z = x.block(cp.z_index());
                    let w = 2.0 * a + h;
                    let v = ((t.vector() - z) * (2.0 * a) + anchor * h) / w;
                    let e = reg.prox(&v, w);
                    let g = (&v - &e) * w;
                    Ok(BlockUpdate {
                        value: e,
                        subgradient: Some(g),
                    })
                }
            }
        }
    }
}

fn flatten(f: &CpFactors) -> Vec<DVector<f64>> {
    [&f.a, &f.b, &f.c]
        .into_iter()
        .map(|m| DVector::from_column_slice(m.as_slice()))
        .collect()
}

/// Generic form of the constrained model with dense coupling matrices;
/// intended for small tensors.
pub fn constrained_problem(t: &Tensor3, rank: usize, alpha: f64, alpha_n: f64) -> Result<ProblemSpec> {
    if rank == 0 {
        return Err(invalid("rank", "must be at least 1"));
    }
    let coupling = RpcaCoupling::constrained(t.dims(), rank, alpha_n);
    let n = t.len();
    let dims = coupling.dims.clone();
    let mut mats: Vec<DMatrix<f64>> = dims[..3].iter().map(|&d| DMatrix::zeros(n, d)).collect();
    mats.extend((0..3).map(|_| DMatrix::identity(n, n)));
    let zero = || Arc::new(ZeroRegularizer) as Arc<dyn Regularizer>;
    let regs = vec![zero(), zero(), zero(), Arc::new(SeparablePenalty::l1(alpha)?) as Arc<dyn Regularizer>, zero()];
    let sets = dims[..5].iter().map(|&d| ConstraintSet::whole(d)).collect();
    let solver: Arc<dyn BlockSolver> = Arc::new(RpcaBlockSolver {
        coupling: coupling.clone(),
    });
    let mut p = ProblemSpec::new(
        Arc::new(coupling),
        regs,
        sets,
        Some(Affine::new(mats, t.vector().clone())?),
        Setting::Setting2,
    )?
    .with_f_star(0.0);
    for i in 0..5 {
        p = p.with_block_solver(i, Arc::clone(&solver))?;
    }
    Ok(p)
}

/// Generic form of the unconstrained model.
pub fn penalized_problem(t: &Tensor3, rank: usize, alpha: f64, alpha_n: f64) -> Result<ProblemSpec> {
    if rank == 0 {
        return Err(invalid("rank", "must be at least 1"));
    }
    let coupling = RpcaCoupling::penalized(t, rank, alpha_n);
    let dims = coupling.dims.clone();
    let zero = || Arc::new(ZeroRegularizer) as Arc<dyn Regularizer>;
    let regs = vec![zero(), zero(), zero(), zero(), Arc::new(SeparablePenalty::l1(alpha)?) as Arc<dyn Regularizer>];
    let sets = dims.iter().map(|&d| ConstraintSet::whole(d)).collect();
    let solver: Arc<dyn BlockSolver> = Arc::new(RpcaBlockSolver {
        coupling: coupling.clone(),
    });
    let mut p = ProblemSpec::new(Arc::new(coupling), regs, sets, None, Setting::Setting2)?.with_f_star(0.0);
    for i in 0..5 {
        p = p.with_block_solver(i, Arc::clone(&solver))?;
    }
    Ok(p)
}

/// Blocks `A, B, C, E, Z, noise` of a state.
pub fn constrained_point(s: &crate::steps::RpcaState) -> BlockVector {
    let mut v = flatten(&s.factors);
    v.extend([s.e.vector().clone(), s.z.vector().clone(), s.noise.vector().clone()]);
    BlockVector::new(v).expect("finite state")
}

/// Blocks `A, B, C, Z, E` of a state.
pub fn penalized_point(s: &crate::steps::RpcaState) -> BlockVector {
    let mut v = flatten(&s.factors);
    v.extend([s.z.vector().clone(), s.e.vector().clone()]);
    BlockVector::new(v).expect("finite state")
}
