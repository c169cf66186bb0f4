use nalgebra::{DMatrix, DVector};
use ncopt::admm::{admm_g_step, admm_m_step, proximal_bcd_step, AdmmConfig, AdmmState};
use ncopt::block::finite_difference_error;
use ncopt::subproblem::ProxMetric;
use ncopt::BlockVector;
use ncopt_rpca::coupling::{constrained_point, constrained_problem, penalized_point, penalized_problem};
use ncopt_rpca::steps::penalized_objective;
use ncopt_rpca::{
    generate_instance, khatri_rao, rpca_admm_g_step, rpca_admm_m_step, rpca_bcd_step, CpFactors, RpcaAlgorithm,
    RpcaParams, RpcaState, Tensor3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const DIMS: [usize; 3] = [4, 5, 6];

/// A perturbed state with nonzero blocks everywhere.
fn setup(seed: u64, alg: RpcaAlgorithm) -> (Tensor3, RpcaState, RpcaParams) {
    let inst = generate_instance(DIMS, 2, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let mut s = RpcaState::initial(&inst.t, 2, seed).unwrap();
    let noise = |scale: f64, rng: &mut ChaCha8Rng| {
        Tensor3::from_fn(DIMS, |_, _, _| scale * rng.sample::<f64, _>(StandardNormal))
    };
    s.e = noise(0.3, &mut rng);
    s.z = Tensor3::from_vector(DIMS, inst.t.vector() + noise(0.1, &mut rng).vector()).unwrap();
    s.noise = noise(0.05, &mut rng);
    s.lambda = noise(0.2, &mut rng);
    let mut p = RpcaParams::preset(alg, DIMS);
    p.delta = [1.3, 0.7, 2.1, 0.9, 1.6];
    (inst.t, s, p)
}

/// Zero of a nondecreasing right derivative by bisection.
fn argmin_1d(right_deriv: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if right_deriv(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sgn(x: f64) -> f64 {
    if x >= 0.0 { 1.0 } else { -1.0 }
}

/// `argmin_X ||Z_(1) - X K'||^2 + (d/2)||X - X0||^2` through the vectorized
/// normal equations `(K'K kron I + d/2 I) vec X = vec(Z K + d/2 X0)`.
fn ls_oracle(z1: &DMatrix<f64>, k: &DMatrix<f64>, x0: &DMatrix<f64>, d: f64) -> DMatrix<f64> {
    let n = x0.nrows();
    let r = x0.ncols();
    let op = k.kronecker(&DMatrix::identity(n, n));
    let lhs = op.transpose() * &op + DMatrix::identity(n * r, n * r) * (0.5 * d);
    let rhs = op.transpose() * DVector::from_column_slice(z1.as_slice())
        + DVector::from_column_slice(x0.as_slice()) * (0.5 * d);
    let v = lhs.lu().solve(&rhs).unwrap();
    DMatrix::from_column_slice(n, r, v.as_slice())
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    (a - b).amax() <= tol * b.amax().max(1.0)
}

#[test]
fn admm_sub_updates_match_oracles() {
    for alg in [RpcaAlgorithm::AdmmG, RpcaAlgorithm::AdmmM] {
        let (t, s, p) = setup(1, alg);
        let next = match alg {
            RpcaAlgorithm::AdmmG => rpca_admm_g_step(&t, &s, &p).unwrap(),
            _ => rpca_admm_m_step(&t, &s, &p).unwrap(),
        };
        let (f0, f1) = (&s.factors, &next.factors);
        let z1 = s.z.unfold(1).unwrap();
        let z2 = s.z.unfold(2).unwrap();
        let z3 = s.z.unfold(3).unwrap();
        let a = ls_oracle(&z1, &khatri_rao(&f0.c, &f0.b).unwrap(), &f0.a, p.delta[0]);
        assert!(close(&f1.a, &a, 1e-8));
        let b = ls_oracle(&z2, &khatri_rao(&f0.c, &f1.a).unwrap(), &f0.b, p.delta[1]);
        assert!(close(&f1.b, &b, 1e-8));
        let c = ls_oracle(&z3, &khatri_rao(&f1.b, &f1.a).unwrap(), &f0.c, p.delta[2]);
        assert!(close(&f1.c, &c, 1e-8));
        let m = f1.reconstruct();
        let beta = p.beta;
        for i in 0..t.len() {
            let (tv, lv) = (t.vector()[i], s.lambda.vector()[i]);
            let (nk, zk, ek) = (s.noise.vector()[i], s.z.vector()[i], s.e.vector()[i]);
            let e_obj = |e: f64| p.alpha * sgn(e) - lv + beta * (e + zk + nk - tv) + p.delta[3] * (e - ek);
            let e = argmin_1d(e_obj, -50.0, 50.0);
            assert!((next.e.vector()[i] - e).abs() <= 1e-8);
            let en = next.e.vector()[i];
            let mv = m.vector()[i];
            // proximal weight 2 delta_5 reproduces the closed form
            let z_obj = |z: f64| 2.0 * (z - mv) - lv + beta * (z + en + nk - tv) + 2.0 * p.delta[4] * (z - zk);
            let z = argmin_1d(z_obj, -50.0, 50.0);
            assert!((next.z.vector()[i] - z).abs() <= 1e-8);
            let zn = next.z.vector()[i];
            let want_noise = match alg {
                RpcaAlgorithm::AdmmG => {
                    let grad = 2.0 * p.alpha_n * nk - lv + beta * (en + zn + nk - tv);
                    nk - p.gamma * grad
                }
                _ => {
                    let l = p.lipschitz;
                    let obj = |x: f64| 2.0 * p.alpha_n * nk + l * (x - nk) - lv + beta * (en + zn + x - tv);
                    argmin_1d(obj, -50.0, 50.0)
                }
            };
            assert!((next.noise.vector()[i] - want_noise).abs() <= 1e-8);
            let r = next.z.vector()[i] + en + next.noise.vector()[i] - tv;
            assert_eq!(next.lambda.vector()[i], lv - beta * r);
        }
    }
}

#[test]
fn bcd_sub_updates_match_oracles_and_descend() {
    for proximal in [false, true] {
        let (t, mut s, p) = setup(2, RpcaAlgorithm::ProxBcd);
        s.noise = Tensor3::zeros(DIMS);
        s.lambda = Tensor3::zeros(DIMS);
        let (next, fb) = rpca_bcd_step(&t, &s, &p, proximal).unwrap();
        assert!(!fb);
        let d = if proximal { p.delta } else { [0.0; 5] };
        let (f0, f1) = (&s.factors, &next.factors);
        let a = ls_oracle(&s.z.unfold(1).unwrap(), &khatri_rao(&f0.c, &f0.b).unwrap(), &f0.a, d[0]);
        assert!(close(&f1.a, &a, 1e-8));
        let b = ls_oracle(&s.z.unfold(2).unwrap(), &khatri_rao(&f0.c, &f1.a).unwrap(), &f0.b, d[1]);
        assert!(close(&f1.b, &b, 1e-8));
        let c = ls_oracle(&s.z.unfold(3).unwrap(), &khatri_rao(&f1.b, &f1.a).unwrap(), &f0.c, d[2]);
        assert!(close(&f1.c, &c, 1e-8));
        let m = f1.reconstruct();
        let an = p.alpha_n;
        for i in 0..t.len() {
            let (tv, zk, ek, mv) = (t.vector()[i], s.z.vector()[i], s.e.vector()[i], m.vector()[i]);
            let z_obj = |z: f64| 2.0 * (z - mv) + 2.0 * an * (z + ek - tv) + d[4] * (z - zk);
            assert!((next.z.vector()[i] - argmin_1d(z_obj, -50.0, 50.0)).abs() <= 1e-8);
            let zn = next.z.vector()[i];
            let e_obj = |e: f64| p.alpha * sgn(e) + 2.0 * an * (zn + e - tv) + d[3] * (e - ek);
            assert!((next.e.vector()[i] - argmin_1d(e_obj, -50.0, 50.0)).abs() <= 1e-8);
        }
        // objective after each sub-update
        let mut partial = s.clone();
        let mut vals = vec![penalized_objective(&t, &partial, &p)];
        partial.factors.a = f1.a.clone();
        vals.push(penalized_objective(&t, &partial, &p));
        partial.factors.b = f1.b.clone();
        vals.push(penalized_objective(&t, &partial, &p));
        partial.factors.c = f1.c.clone();
        vals.push(penalized_objective(&t, &partial, &p));
        partial.z = next.z.clone();
        vals.push(penalized_objective(&t, &partial, &p));
        partial.e = next.e.clone();
        vals.push(penalized_objective(&t, &partial, &p));
        for w in vals.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{vals:?}");
        }
    }
}

#[test]
fn proximal_bcd_tends_to_plain_bcd() {
    let (t, mut s, mut p) = setup(3, RpcaAlgorithm::ProxBcd);
    s.noise = Tensor3::zeros(DIMS);
    s.lambda = Tensor3::zeros(DIMS);
    p.delta = [1e-10; 5];
    let (prox, _) = rpca_bcd_step(&t, &s, &p, true).unwrap();
    let (plain, _) = rpca_bcd_step(&t, &s, &p, false).unwrap();
    assert!(prox.dist_sq(&plain).sqrt() <= 1e-7);
}

#[test]
fn feasible_stationary_state_is_fixed() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut g = |r: usize| DMatrix::from_fn(r, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let f = CpFactors::new(g(DIMS[0]), g(DIMS[1]), g(DIMS[2])).unwrap();
    let t = f.reconstruct();
    let s = RpcaState {
        factors: f,
        e: Tensor3::zeros(DIMS),
        z: t.clone(),
        noise: Tensor3::zeros(DIMS),
        lambda: Tensor3::zeros(DIMS),
    };
    for alg in RpcaAlgorithm::ALL {
        let p = RpcaParams::preset(alg, DIMS);
        let (next, _) = ncopt_rpca::solve::rpca_step(&t, &s, &p, alg).unwrap();
        assert!(next.dist_sq(&s) <= 1e-20, "{alg:?}: {}", next.dist_sq(&s));
        assert!((next.lambda.vector() - s.lambda.vector()).amax() <= 1e-12);
    }
}

#[test]
fn generic_solvers_reproduce_dedicated_steps() {
    let (t, s, p) = setup(5, RpcaAlgorithm::AdmmG);
    let prob = constrained_problem(&t, 2, p.alpha, p.alpha_n).unwrap();
    let dims = prob.dims().to_vec();
    let d = p.delta;
    let metrics: Vec<ProxMetric> = (0..5)
        .map(|i| ProxMetric::scaled_identity(dims[i], if i == 4 { 2.0 * d[4] } else { d[i] }).unwrap())
        .collect();
    let lambda = s.lambda.vector().clone();
    let g_cfg = AdmmConfig::new(p.beta, p.gamma, metrics.clone()).unwrap();
    let st = AdmmState::initial(&prob, constrained_point(&s), lambda.clone(), p.beta).unwrap();
    let generic = admm_g_step(&prob, &st, &g_cfg).unwrap();
    let direct = rpca_admm_g_step(&t, &s, &p).unwrap();
    assert!(generic.x.dist_sq(&constrained_point(&direct)).sqrt() <= 1e-10);
    assert!((&generic.lambda - direct.lambda.vector()).amax() <= 1e-10);

    let m_p = RpcaParams { beta: 5.0, ..p.clone() };
    let m_cfg = AdmmConfig::new(m_p.beta, 1.0, metrics.clone()).unwrap().with_lipschitz(m_p.lipschitz);
    let st = AdmmState::initial(&prob, constrained_point(&s), lambda, m_p.beta).unwrap();
    let generic = admm_m_step(&prob, &st, &m_cfg).unwrap();
    let direct = rpca_admm_m_step(&t, &s, &m_p).unwrap();
    assert!(generic.x.dist_sq(&constrained_point(&direct)).sqrt() <= 1e-10);

    let pen = penalized_problem(&t, 2, p.alpha, p.alpha_n).unwrap();
    let pdims = pen.dims().to_vec();
    let order = [0usize, 1, 2, 4, 3];
    let bcd_metrics: Vec<ProxMetric> = (0..5)
        .map(|i| ProxMetric::scaled_identity(pdims[i], d[order[i]]).unwrap())
        .collect();
    let mut bs = s.clone();
    bs.noise = Tensor3::zeros(DIMS);
    bs.lambda = Tensor3::zeros(DIMS);
    let generic = proximal_bcd_step(&pen, &penalized_point(&bs), &bcd_metrics).unwrap();
    let (direct, _) = rpca_bcd_step(&t, &bs, &p, true).unwrap();
    assert!(generic.dist_sq(&penalized_point(&direct)).sqrt() <= 1e-10);
}

#[test]
fn couplings_pass_gradient_checks() {
    let (t, _, p) = setup(6, RpcaAlgorithm::AdmmG);
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    for prob in [constrained_problem(&t, 2, p.alpha, p.alpha_n).unwrap(), penalized_problem(&t, 2, p.alpha, p.alpha_n).unwrap()] {
        let f = prob.f();
        for _ in 0..100 {
            let x = BlockVector::new(
                f.dims().iter().map(|&d| DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))).collect(),
            )
            .unwrap();
            assert!(finite_difference_error(f, &x, 1e-6) <= 1e-5);
        }
    }
}

#[test]
fn augmented_lagrangian_mostly_decreases() {
    for alg in [RpcaAlgorithm::AdmmG, RpcaAlgorithm::AdmmM] {
        for seed in 0..3 {
            let inst = generate_instance([10, 20, 30], 3, seed).unwrap();
            let p = RpcaParams::preset(alg, [10, 20, 30]);
            let init = RpcaState::initial(&inst.t, 4, seed).unwrap();
            let run = ncopt_rpca::rpca_solve(&inst.t, init, &p, alg, 2000, 1e-6).unwrap();
            assert!(run.decrease_fraction() >= 0.99);
            assert_eq!(run.merit.len(), run.iters);
            let last = &run.merit[run.iters - 1];
            assert!(last.is_finite());
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let inst = generate_instance([6, 7, 8], 2, 9).unwrap();
    for alg in RpcaAlgorithm::ALL {
        let p = RpcaParams::preset(alg, [6, 7, 8]);
        let run = |_: ()| {
            let init = RpcaState::initial(&inst.t, 2, 9).unwrap();
            ncopt_rpca::rpca_solve(&inst.t, init, &p, alg, 200, 1e-6).unwrap()
        };
        let (a, b) = (run(()), run(()));
        assert_eq!(a.iters, b.iters);
        assert_eq!(a.state.dist_sq(&b.state), 0.0);
    }
}
