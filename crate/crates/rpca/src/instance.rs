use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::tensor::{CpFactors, Tensor3};

/// Observed tensor and its ground-truth parts.
#[derive(Debug, Clone, PartialEq)]
pub struct RpcaInstance {
    pub t: Tensor3,
    pub z0: Tensor3,
    pub e0: Tensor3,
    pub noise0: Tensor3,
    /// Set when `0.001 I1 I2 I3` rounds to no sparse entries.
    pub empty_sparse_part: bool,
}

/// `round(0.001 I1 I2 I3)`.
pub fn sparse_cardinality(dims: [usize; 3]) -> usize {
    (0.001 * dims.iter().product::<usize>() as f64).round() as usize
}

/// Rank-`r_cp` Gaussian CP tensor plus a sparse Gaussian part on distinct
/// uniformly drawn positions plus `0.001` times Gaussian noise, from a
/// ChaCha8 generator seeded with `seed`.
pub fn generate_instance(dims: [usize; 3], r_cp: usize, seed: u64) -> Result<RpcaInstance> {
    if r_cp == 0 {
        return Err(invalid("r_cp", "must be at least 1"));
    }
    if dims.contains(&0) {
        return Err(invalid("dims", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |r: usize, c: usize, rng: &mut ChaCha8Rng| {
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    };
    let a = gauss(dims[0], r_cp, &mut rng);
    let b = gauss(dims[1], r_cp, &mut rng);
    let c = gauss(dims[2], r_cp, &mut rng);
    let z0 = CpFactors::new(a, b, c)?.reconstruct();
    let n = z0.len();
    let card = sparse_cardinality(dims);
    let mut e0 = Tensor3::zeros(dims);
    for pos in rand::seq::index::sample(&mut rng, n, card).into_vec() {
        e0.vector_mut()[pos] = StandardNormal.sample(&mut rng);
    }
    let noise0 = Tensor3::from_vector(dims, gauss(n, 1, &mut rng).column(0) * 0.001)?;
    let t = Tensor3::from_vector(dims, z0.vector() + e0.vector() + noise0.vector())?;
    Ok(RpcaInstance {
        t,
        z0,
        e0,
        noise0,
        empty_sparse_part: card == 0,
    })
}

/// `||z_est - z0|| / ||z0||`.
pub fn relative_error(z_est: &Tensor3, z0: &Tensor3) -> Result<f64> {
    z_est.check_same_dims(z0, "estimate")?;
    let den = z0.norm();
    if den == 0.0 {
        return Err(invalid("z0", "has zero norm"));
    }
    Ok((z_est.vector() - z0.vector()).norm() / den)
}
