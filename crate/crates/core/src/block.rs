//! Block-structured problem data.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{is_identity, spectral_norm, Matrix, Vector};
use crate::prox::{project_ball, ZeroRegularizer};
use crate::subproblem::{BlockSolver, QuadraticBlockSolver};

/// Ordered tuple of dense blocks `(x_1, ..., x_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    blocks: Vec<Vector>,
}

impl BlockVector {
    /// Fails on an empty list, an empty block or a non-finite entry.
    pub fn new(blocks: Vec<Vector>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid("blocks", "at least one block is required"));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(invalid("blocks", format!("block {i} is empty")));
            }
            if !crate::linalg::all_finite(b) {
                return Err(Error::NonFinite(format!("block {i}")));
            }
        }
        Ok(BlockVector { blocks })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        BlockVector {
            blocks: dims.iter().map(|&n| Vector::zeros(n)).collect(),
        }
    }

    pub fn from_flat(flat: &[f64], dims: &[usize]) -> Result<Self> {
        check_dim("flat block vector", dims.iter().sum(), flat.len())?;
        let mut off = 0;
        let mut blocks = Vec::with_capacity(dims.len());
        for &n in dims {
            blocks.push(Vector::from_column_slice(&flat[off..off + n]));
            off += n;
        }
        Self::new(blocks)
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn block(&self, i: usize) -> &Vector {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[Vector] {
        &self.blocks
    }

    pub fn last(&self) -> &Vector {
        self.blocks.last().expect("nonempty")
    }

    /// Replaces block `i`, checking its length and finiteness.
    pub fn set_block(&mut self, i: usize, v: Vector) -> Result<()> {
        check_dim(format!("block {i}"), self.blocks[i].len(), v.len())?;
        if !crate::linalg::all_finite(&v) {
            return Err(Error::NonFinite(format!("update of block {i}")));
        }
        self.blocks[i] = v;
        Ok(())
    }

    pub fn to_flat(&self) -> Vector {
        let mut out = Vector::zeros(self.total_dim());
        let mut off = 0;
        for b in &self.blocks {
            out.rows_mut(off, b.len()).copy_from(b);
            off += b.len();
        }
        out
    }

    /// `sum_i ||x_i - y_i||^2`.
    pub fn dist_sq(&self, other: &BlockVector) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a - b).norm_squared())
            .sum()
    }

    pub(crate) fn from_blocks_unchecked(blocks: Vec<Vector>) -> Self {
        BlockVector { blocks }
    }

    pub(crate) fn check_dims(&self, dims: &[usize]) -> Result<()> {
        check_dim("number of blocks", dims.len(), self.blocks.len())?;
        for (i, (&n, b)) in dims.iter().zip(&self.blocks).enumerate() {
            check_dim(format!("block {i}"), n, b.len())?;
        }
        Ok(())
    }
}

/// Smooth coupling term `f` with block gradients.
pub trait SmoothFunction: Send + Sync + Debug {
    fn dims(&self) -> &[usize];

    fn value(&self, x: &BlockVector) -> f64;

    /// Partial gradient with respect to block `i`.
    fn grad_block(&self, x: &BlockVector, i: usize) -> Vector;

    fn gradient(&self, x: &BlockVector) -> BlockVector {
        BlockVector::from_blocks_unchecked(
            (0..x.num_blocks()).map(|i| self.grad_block(x, i)).collect(),
        )
    }

    /// Lipschitz modulus of the full gradient.
    fn lipschitz(&self) -> f64;

    /// Hölder pair `(p, rho)`; Lipschitz-gradient functions use `(2, L)`.
    fn holder(&self) -> (f64, f64) {
        (2.0, self.lipschitz())
    }

    fn as_quadratic(&self) -> Option<&Quadratic> {
        None
    }
}

/// `f(x) = 0.5 x'Qx + c'x + c0` over the stacked blocks.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: Matrix,
    c: Vector,
    c0: f64,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    lipschitz: f64,
}

impl Quadratic {
    pub fn new(q: Matrix, c: Vector, c0: f64, dims: Vec<usize>) -> Result<Self> {
        let n: usize = dims.iter().sum();
        if dims.is_empty() || dims.contains(&0) {
            return Err(invalid("dims", "block sizes must be positive"));
        }
        check_dim("quadratic rows", n, q.nrows())?;
        check_dim("quadratic columns", n, q.ncols())?;
        check_dim("linear term", n, c.len())?;
        let asym = (&q - q.transpose()).abs().max();
        if asym > 1e-12 * q.abs().max().max(1.0) {
            return Err(invalid("q", format!("not symmetric (max asymmetry {asym:e})")));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut off = 0;
        for &d in &dims {
            offsets.push(off);
            off += d;
        }
        let lipschitz = spectral_norm(&q);
        Ok(Quadratic {
            q,
            c,
            c0,
            dims,
            offsets,
            lipschitz,
        })
    }

    /// `0.5 ||M x - d||^2`.
    pub fn least_squares(m: &Matrix, d: &Vector, dims: Vec<usize>) -> Result<Self> {
        check_dim("least-squares data", m.nrows(), d.len())?;
        let q = m.transpose() * m;
        let q = (&q + q.transpose()) * 0.5;
        let c = -(m.transpose() * d);
        Self::new(q, c, 0.5 * d.norm_squared(), dims)
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn c(&self) -> &Vector {
        &self.c
    }

    pub fn offset(&self) -> f64 {
        self.c0
    }

    /// Diagonal block `Q_ii`.
    pub fn block_q(&self, i: usize, j: usize) -> Matrix {
        self.q
            .view(
                (self.offsets[i], self.offsets[j]),
                (self.dims[i], self.dims[j]),
            )
            .into_owned()
    }
}

impl SmoothFunction for Quadratic {
    fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn value(&self, x: &BlockVector) -> f64 {
        let z = x.to_flat();
        0.5 * z.dot(&(&self.q * &z)) + self.c.dot(&z) + self.c0
    }

    fn grad_block(&self, x: &BlockVector, i: usize) -> Vector {
        let (o, n) = (self.offsets[i], self.dims[i]);
        let mut g = self.c.rows(o, n).into_owned();
        for (j, xj) in x.blocks().iter().enumerate() {
            g += self.q.view((o, self.offsets[j]), (n, self.dims[j])) * xj;
        }
        g
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn as_quadratic(&self) -> Option<&Quadratic> {
        Some(self)
    }
}

/// Coarse classification used to select closed-form subproblem routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularizerKind {
    Zero,
    L1 { weight: f64 },
    Other,
}

/// Block regularizer `r_i`.
pub trait Regularizer: Send + Sync + Debug {
    fn value(&self, x: &Vector) -> f64;

    /// Minimizer of `r(x) + (weight/2)||x - v||^2`.
    fn prox(&self, v: &Vector, weight: f64) -> Vector;

    /// Boxed variant of [`Regularizer::prox`]; `None` when not available.
    fn prox_box(&self, _v: &Vector, _weight: f64, _lo: &Vector, _hi: &Vector) -> Option<Vector> {
        None
    }

    fn subgrad_select(&self, x: &Vector) -> Vector;

    /// Euclidean distance from `g` to the general subdifferential at `x`.
    fn dist_to_subdiff(&self, x: &Vector, g: &Vector) -> f64;

    fn lower_bound(&self) -> f64 {
        0.0
    }

    fn lipschitz_const(&self) -> Option<f64>;

    fn is_convex(&self) -> bool;

    fn kind(&self) -> RegularizerKind {
        RegularizerKind::Other
    }
}

/// Closed convex constraint set `X_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSet {
    Whole { dim: usize },
    /// Euclidean ball centered at the origin.
    Ball { dim: usize, radius: f64 },
    Box { lo: Vector, hi: Vector },
}

impl ConstraintSet {
    pub fn whole(dim: usize) -> Self {
        ConstraintSet::Whole { dim }
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(ConstraintSet::Ball { dim, radius })
    }

    pub fn boxed(lo: Vector, hi: Vector) -> Result<Self> {
        check_dim("box bounds", lo.len(), hi.len())?;
        if let Some(j) = (0..lo.len()).find(|&j| !(lo[j] <= hi[j]) || !lo[j].is_finite() || !hi[j].is_finite()) {
            return Err(invalid("box", format!("bad bounds at coordinate {j}")));
        }
        Ok(ConstraintSet::Box { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(Vector::from_element(dim, lo), Vector::from_element(dim, hi))
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::Whole { dim } | ConstraintSet::Ball { dim, .. } => *dim,
            ConstraintSet::Box { lo, .. } => lo.len(),
        }
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self, ConstraintSet::Whole { .. })
    }

    pub fn is_bounded(&self) -> bool {
        !self.is_whole_space()
    }

    pub fn project(&self, x: &Vector) -> Vector {
        match self {
            ConstraintSet::Whole { .. } => x.clone(),
            ConstraintSet::Ball { radius, .. } => project_ball(x, *radius),
            ConstraintSet::Box { lo, hi } => {
                Vector::from_fn(x.len(), |j, _| x[j].clamp(lo[j], hi[j]))
            }
        }
    }

    /// `argmin_{y in S} c'y`. Ties go to the lower bound (box) or the center (ball).
    pub fn lmo(&self, c: &Vector) -> Result<Vector> {
        check_dim("linear objective", self.dim(), c.len())?;
        match self {
            ConstraintSet::Whole { .. } => Err(Error::UnsupportedPairing(
                "linear minimization over the whole space".into(),
            )),
            ConstraintSet::Ball { radius, .. } => {
                let n = c.norm();
                if n == 0.0 {
                    Ok(Vector::zeros(c.len()))
                } else {
                    Ok(c * (-radius / n))
                }
            }
            ConstraintSet::Box { lo, hi } => Ok(Vector::from_fn(c.len(), |j, _| {
                if c[j] < 0.0 {
                    hi[j]
                } else {
                    lo[j]
                }
            })),
        }
    }

    /// `min_{y in S} c'y`; `-inf` when unbounded below.
    pub fn min_linear(&self, c: &Vector) -> f64 {
        match self {
            ConstraintSet::Whole { .. } => {
                if c.iter().all(|&v| v == 0.0) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            ConstraintSet::Ball { radius, .. } => -radius * c.norm(),
            ConstraintSet::Box { lo, hi } => (0..c.len())
                .map(|j| (c[j] * lo[j]).min(c[j] * hi[j]))
                .sum(),
        }
    }

    /// `max_{x,y in S} ||x - y||_p`.
    pub fn diameter_p(&self, p: f64) -> f64 {
        match self {
            ConstraintSet::Whole { .. } => f64::INFINITY,
            ConstraintSet::Ball { dim, radius } => {
                let expo = (1.0 / p - 0.5).max(0.0);
                2.0 * radius * (*dim as f64).powf(expo)
            }
            ConstraintSet::Box { lo, hi } => {
                if p.is_infinite() {
                    (hi - lo).max()
                } else {
                    (hi - lo).iter().map(|w| w.powf(p)).sum::<f64>().powf(1.0 / p)
                }
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        self.diameter_p(2.0)
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            ConstraintSet::Whole { .. } => true,
            ConstraintSet::Ball { radius, .. } => x.norm() <= radius + tol,
            ConstraintSet::Box { lo, hi } => {
                (0..x.len()).all(|j| x[j] >= lo[j] - tol && x[j] <= hi[j] + tol)
            }
        }
    }
}

/// Linear coupling `sum_i A_i x_i = b`.
#[derive(Debug, Clone)]
pub struct Affine {
    mats: Vec<Matrix>,
    b: Vector,
}

impl Affine {
    pub fn new(mats: Vec<Matrix>, b: Vector) -> Result<Self> {
        for (i, a) in mats.iter().enumerate() {
            check_dim(format!("rows of A_{i}"), b.len(), a.nrows())?;
        }
        Ok(Affine { mats, b })
    }

    pub fn mats(&self) -> &[Matrix] {
        &self.mats
    }

    pub fn mat(&self, i: usize) -> &Matrix {
        &self.mats[i]
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    /// `sum_i A_i x_i - b`.
    pub fn residual(&self, x: &BlockVector) -> Vector {
        let mut r = -self.b.clone();
        for (a, xi) in self.mats.iter().zip(x.blocks()) {
            r += a * xi;
        }
        r
    }
}

/// Which stationarity notion applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setting {
    /// Lipschitz `r_i` over compact `X_i`.
    Setting1,
    /// Lower semicontinuous `r_i` over the whole space.
    Setting2,
}

/// Default lower bound used for `f*` when none is known.
pub const DEFAULT_F_STAR: f64 = -1e12;

/// Immutable description of a block-structured problem.
///
/// `regs` and `sets` may have length `N - 1` (the last block is then
/// unregularized and unconstrained) or `N`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    f: Arc<dyn SmoothFunction>,
    regs: Vec<Arc<dyn Regularizer>>,
    sets: Vec<ConstraintSet>,
    affine: Option<Affine>,
    setting: Setting,
    f_star: f64,
    regularized: usize,
    solvers: Vec<Option<Arc<dyn BlockSolver>>>,
}

impl ProblemSpec {
    pub fn new(
        f: Arc<dyn SmoothFunction>,
        regs: Vec<Arc<dyn Regularizer>>,
        sets: Vec<ConstraintSet>,
        affine: Option<Affine>,
        setting: Setting,
    ) -> Result<Self> {
        let dims = f.dims().to_vec();
        let n = dims.len();
        if n == 0 {
            return Err(invalid("f", "must have at least one block"));
        }
        let regularized = regs.len();
        if regularized != n && regularized + 1 != n {
            return Err(invalid(
                "regs",
                format!("expected {} or {n} regularizers, got {regularized}", n - 1),
            ));
        }
        check_dim("number of constraint sets", regularized, sets.len())?;
        for (i, s) in sets.iter().enumerate() {
            check_dim(format!("set {i}"), dims[i], s.dim())?;
        }
        let mut regs = regs;
        let mut sets = sets;
        if regularized + 1 == n {
            regs.push(Arc::new(ZeroRegularizer));
            sets.push(ConstraintSet::whole(dims[n - 1]));
        }
        if let Some(a) = &affine {
            check_dim("number of affine blocks", n, a.mats.len())?;
            for (i, m) in a.mats.iter().enumerate() {
                check_dim(format!("columns of A_{i}"), dims[i], m.ncols())?;
            }
        }
        match setting {
            Setting::Setting1 => {
                for i in 0..regularized {
                    if !sets[i].is_bounded() {
                        return Err(Error::Assumption(format!(
                            "Setting 1 requires a bounded set for block {i}"
                        )));
                    }
                    if regs[i].lipschitz_const().is_none() {
                        return Err(Error::Assumption(format!(
                            "Setting 1 requires a Lipschitz regularizer for block {i}"
                        )));
                    }
                }
            }
            Setting::Setting2 => {
                if let Some(i) = sets.iter().position(|s| !s.is_whole_space()) {
                    return Err(Error::Assumption(format!(
                        "Setting 2 requires block {i} to be unconstrained"
                    )));
                }
            }
        }
        Ok(ProblemSpec {
            f,
            regs,
            sets,
            affine,
            setting,
            f_star: DEFAULT_F_STAR,
            regularized,
            solvers: vec![None; n],
        })
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = f_star;
        self
    }

    pub fn with_block_solver(mut self, i: usize, solver: Arc<dyn BlockSolver>) -> Result<Self> {
        if i >= self.num_blocks() {
            return Err(invalid("block", format!("index {i} out of range")));
        }
        self.solvers[i] = Some(solver);
        Ok(self)
    }

    /// Registers the closed-form quadratic solver on every block; `f` must be a [`Quadratic`].
    pub fn with_quadratic_block_solvers(mut self) -> Result<Self> {
        if self.f.as_quadratic().is_none() {
            return Err(Error::UnsupportedPairing(
                "quadratic block solver on a non-quadratic coupling".into(),
            ));
        }
        let s: Arc<dyn BlockSolver> = Arc::new(QuadraticBlockSolver);
        self.solvers = vec![Some(s); self.num_blocks()];
        Ok(self)
    }

    pub fn f(&self) -> &dyn SmoothFunction {
        self.f.as_ref()
    }

    pub fn f_arc(&self) -> Arc<dyn SmoothFunction> {
        Arc::clone(&self.f)
    }

    pub fn reg(&self, i: usize) -> &dyn Regularizer {
        self.regs[i].as_ref()
    }

    pub fn regs(&self) -> &[Arc<dyn Regularizer>] {
        &self.regs
    }

    pub fn set(&self, i: usize) -> &ConstraintSet {
        &self.sets[i]
    }

    pub fn sets(&self) -> &[ConstraintSet] {
        &self.sets
    }

    pub fn affine(&self) -> Option<&Affine> {
        self.affine.as_ref()
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn num_blocks(&self) -> usize {
        self.f.dims().len()
    }

    pub fn dims(&self) -> &[usize] {
        self.f.dims()
    }

    /// Number of blocks that carry an explicit regularizer and set.
    pub fn regularized_blocks(&self) -> usize {
        self.regularized
    }

    pub fn block_solver(&self, i: usize) -> Option<&Arc<dyn BlockSolver>> {
        self.solvers[i].as_ref()
    }

    /// `sum_i r_i* + f*` over the regularized blocks.
    pub fn lower_bound(&self) -> f64 {
        self.regs[..self.regularized]
            .iter()
            .map(|r| r.lower_bound())
            .sum::<f64>()
            + self.f_star
    }

    /// Fails unless the last block has `A_N = I`.
    pub(crate) fn require_identity_last(&self) -> Result<&Affine> {
        let a = self.require_affine()?;
        let an = a.mats.last().expect("nonempty");
        if !is_identity(an, 1e-12) {
            return Err(Error::Assumption("the last block requires A_N = I".into()));
        }
        Ok(a)
    }

    pub(crate) fn require_affine(&self) -> Result<&Affine> {
        self.affine
            .as_ref()
            .ok_or_else(|| Error::UnsupportedPairing("solver requires an affine constraint".into()))
    }

    /// Fails unless the last block is free of both regularizer and constraint.
    pub(crate) fn require_plain_last(&self) -> Result<()> {
        let n = self.num_blocks();
        if self.regs[n - 1].kind() != RegularizerKind::Zero || !self.sets[n - 1].is_whole_space() {
            return Err(Error::Assumption(
                "the last block must be unregularized and unconstrained".into(),
            ));
        }
        Ok(())
    }
}

/// `f(x) + sum_i r_i(x_i)`.
pub fn eval_objective(p: &ProblemSpec, x: &BlockVector) -> Result<f64> {
    x.check_dims(p.dims())?;
    let v = p.f.value(x)
        + p.regs
            .iter()
            .zip(x.blocks())
            .map(|(r, xi)| r.value(xi))
            .sum::<f64>();
    if !v.is_finite() {
        return Err(Error::NonFinite("objective value".into()));
    }
    Ok(v)
}

/// `f(x) + sum_i r_i(x_i) - lambda'(Ax - b) + (beta/2)||Ax - b||^2`.
pub fn eval_aug_lagrangian(p: &ProblemSpec, x: &BlockVector, lambda: &Vector, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(invalid("beta", format!("must be positive, got {beta}")));
    }
    let obj = eval_objective(p, x)?;
    match &p.affine {
        None => {
            check_dim("multiplier", 0, lambda.len())?;
            Ok(obj)
        }
        Some(a) => {
            check_dim("multiplier", a.rows(), lambda.len())?;
            let r = a.residual(x);
            Ok(obj - lambda.dot(&r) + 0.5 * beta * r.norm_squared())
        }
    }
}

/// Relative deviation `||grad - fd|| / max(||fd||, 1)` of the analytic gradient
/// from central differences with step `h`.
pub fn finite_difference_error(f: &dyn SmoothFunction, x: &BlockVector, h: f64) -> f64 {
    let grad = f.gradient(x).to_flat();
    let base = x.to_flat();
    let dims = x.dims();
    let mut fd = Vector::zeros(base.len());
    for j in 0..base.len() {
        let mut z = base.clone();
        z[j] = base[j] + h;
        let up = f.value(&BlockVector::from_flat(z.as_slice(), &dims).expect("finite"));
        z[j] = base[j] - h;
        let down = f.value(&BlockVector::from_flat(z.as_slice(), &dims).expect("finite"));
        fd[j] = (up - down) / (2.0 * h);
    }
    (grad - &fd).norm() / fd.norm().max(1.0)
}
