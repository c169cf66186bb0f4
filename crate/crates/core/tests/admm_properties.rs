use nalgebra::{DMatrix, DVector};
use ncopt::admm::{
    admm_g_params, admm_g_step, admm_m_params, admm_m_step, admm_solve, complexity_constants, sigma_n, AdmmConfig,
    AdmmState, ConstantInputs, ComplexityConstants, Variant, admm_iteration_bound,
};
use ncopt::instances::{random_admm_instance, AdmmInstance};
use ncopt::stationarity::stationarity_report;
use ncopt::{BlockVector, Setting};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ITERS: usize = 150;

fn config(inst: &AdmmInstance, variant: Variant) -> AdmmConfig {
    let p = &inst.problem;
    let l = p.f().lipschitz();
    match variant {
        Variant::G => {
            let (beta, gamma) = admm_g_params(l, &inst.metrics, 1.01).unwrap();
            AdmmConfig::new(beta, gamma, inst.metrics.clone()).unwrap()
        }
        Variant::M => {
            let a_n = p.affine().unwrap().mats().last().unwrap().clone();
            let beta = admm_m_params(l, sigma_n(&a_n).unwrap(), &inst.metrics, 1.01).unwrap();
            AdmmConfig::new(beta, 1.0, inst.metrics.clone()).unwrap()
        }
    }
}

fn instance(seed: u64, variant: Variant) -> AdmmInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_admm_instance(&mut rng, 2 + (seed % 2) as usize, variant).unwrap()
}

fn last_grad(inst: &AdmmInstance, x: &BlockVector, xn: &DVector<f64>) -> DVector<f64> {
    let mut y = x.clone();
    let n = y.num_blocks() - 1;
    y.set_block(n, xn.clone()).unwrap();
    inst.problem.f().grad_block(&y, n)
}

#[test]
fn gradient_variant_potential_identities_and_gap() {
    for seed in 0..50 {
        let inst = instance(seed, Variant::G);
        let cfg = config(&inst, Variant::G);
        let p = &inst.problem;
        let a = p.affine().unwrap();
        let l = p.f().lipschitz();
        let lower = p.lower_bound();
        let n = p.num_blocks() - 1;
        let s_coef = cfg.beta - 1.0 / cfg.gamma;
        let mut s = AdmmState::initial(p, inst.x0.clone(), inst.lambda0.clone(), cfg.beta).unwrap();
        let mut prev_psi: Option<f64> = None;
        for _ in 0..ITERS {
            let next = admm_g_step(p, &s, &cfg).unwrap();
            // dual-update residual identity
            let dl = (&next.lambda - &s.lambda).norm();
            let res = a.residual(&next.x).norm();
            assert!((dl - cfg.beta * res).abs() <= 1e-10 * dl.max(1.0));
            // multiplier identity in terms of the last block
            let g = last_grad(&inst, &next.x, s.x.last());
            let pred = g + (s.x.last() - next.x.last()) * s_coef;
            assert!((&pred - &next.lambda).norm() <= 1e-10 * next.lambda.norm().max(1.0));
            // lambda-gap bound from the third iterate on
            if s.k >= 1 {
                let dn_new = (s.x.last() - next.x.last()).norm_squared();
                let dn_old = (s.x_prev.last() - s.x.last()).norm_squared();
                let others: f64 = (0..n).map(|i| (next.x.block(i) - s.x.block(i)).norm_squared()).sum();
                let bound = 3.0 * s_coef * s_coef * dn_new + 3.0 * (s_coef * s_coef + l * l) * dn_old + 3.0 * l * l * others;
                assert!(dl * dl <= bound * (1.0 + 1e-9) + 1e-12, "seed {seed}: gap {} > {bound}", dl * dl);
            }
            if let Some(pp) = prev_psi {
                assert!(next.psi <= pp + 1e-9 * pp.abs().max(1.0), "seed {seed}: psi rose {pp} -> {}", next.psi);
            }
            assert!(next.psi >= lower - 1e-9 * lower.abs().max(1.0));
            prev_psi = Some(next.psi);
            s = next;
        }
    }
}

#[test]
fn majorization_variant_potential_and_identity() {
    for seed in 100..150 {
        let inst = instance(seed, Variant::M);
        let cfg = config(&inst, Variant::M);
        let p = &inst.problem;
        let a = p.affine().unwrap();
        let a_n = a.mats().last().unwrap();
        let l = p.f().lipschitz();
        let lower = p.lower_bound();
        let mut s = AdmmState::initial(p, inst.x0.clone(), inst.lambda0.clone(), cfg.beta).unwrap();
        let mut prev_psi: Option<f64> = None;
        for _ in 0..ITERS {
            let next = admm_m_step(p, &s, &cfg).unwrap();
            let g = last_grad(&inst, &next.x, s.x.last());
            let pred = g + (next.x.last() - s.x.last()) * l;
            let lhs = a_n.transpose() * &next.lambda;
            assert!((&lhs - &pred).norm() <= 1e-10 * lhs.norm().max(1.0));
            let dl = (&next.lambda - &s.lambda).norm();
            assert!((dl - cfg.beta * a.residual(&next.x).norm()).abs() <= 1e-10 * dl.max(1.0));
            if let Some(pp) = prev_psi {
                assert!(next.psi <= pp + 1e-9 * pp.abs().max(1.0), "seed {seed}: psi rose {pp} -> {}", next.psi);
            }
            assert!(next.psi >= lower - 1e-9 * lower.abs().max(1.0));
            prev_psi = Some(next.psi);
            s = next;
        }
    }
}

/// Soft thresholding written out for the reference iteration.
fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[test]
fn two_block_gradient_variant_matches_reference() {
    for seed in [2u64, 4, 6, 8] {
        let inst = instance(seed, Variant::G);
        let p = &inst.problem;
        assert_eq!(p.num_blocks(), 2);
        let cfg = config(&inst, Variant::G);
        let quad = p.f().as_quadratic().unwrap();
        let q = quad.q().clone();
        let c = quad.c().clone();
        let a = p.affine().unwrap();
        let a1 = a.mat(0).clone();
        let b = a.b().clone();
        let n1 = p.dims()[0];
        let m = b.len();
        let h = inst.metrics[0].isotropic().unwrap();
        let alpha = match p.reg(0).kind() {
            ncopt::block::RegularizerKind::L1 { weight } => weight,
            _ => unreachable!(),
        };
        let q11 = q.view((0, 0), (n1, n1)).into_owned();
        let q12 = q.view((0, n1), (n1, m)).into_owned();
        let q21 = q.view((n1, 0), (m, n1)).into_owned();
        let q22 = q.view((n1, n1), (m, m)).into_owned();
        let (beta, gamma) = (cfg.beta, cfg.gamma);
        let mut x1 = inst.x0.block(0).clone();
        let mut x2 = inst.x0.block(1).clone();
        let mut lam = inst.lambda0.clone();
        let mut s = AdmmState::initial(p, inst.x0.clone(), lam.clone(), beta).unwrap();
        let kappa = q11[(0, 0)] + beta * (a1.transpose() * &a1)[(0, 0)] + h;
        for _ in 0..50 {
            // x1 minimizes a separable quadratic plus alpha||x1||_1
            let lin = &q12 * &x2 + c.rows(0, n1) - a1.transpose() * &lam + a1.transpose() * (&x2 - &b) * beta - &x1 * h;
            let mut k = &q11 + a1.transpose() * &a1 * beta;
            k += DMatrix::identity(n1, n1) * h;
            assert!((k - DMatrix::identity(n1, n1) * kappa).amax() <= 1e-12 * kappa);
            x1 = DVector::from_fn(n1, |j, _| shrink(-lin[j] / kappa, alpha / kappa));
            let g2 = &q21 * &x1 + &q22 * &x2 + c.rows(n1, m);
            x2 = &x2 - (g2 - &lam + (&a1 * &x1 + &x2 - &b) * beta) * gamma;
            lam = &lam - (&a1 * &x1 + &x2 - &b) * beta;
            s = admm_g_step(p, &s, &cfg).unwrap();
            assert!((s.x.block(0) - &x1).amax() <= 1e-12 * x1.amax().max(1.0));
            assert!((s.x.block(1) - &x2).amax() <= 1e-12 * x2.amax().max(1.0));
            assert!((&s.lambda - &lam).amax() <= 1e-12 * lam.amax().max(1.0));
        }
    }
}

#[test]
fn majorization_with_identity_last_block_has_closed_form() {
    for seed in 30..36 {
        let inst = instance(seed, Variant::G);
        let p = &inst.problem;
        let l = p.f().lipschitz();
        let a = p.affine().unwrap();
        let beta = admm_m_params(l, 1.0, &inst.metrics, 1.01).unwrap();
        let cfg = AdmmConfig::new(beta, 1.0, inst.metrics.clone()).unwrap();
        let n = p.num_blocks() - 1;
        let mut s = AdmmState::initial(p, inst.x0.clone(), inst.lambda0.clone(), beta).unwrap();
        for _ in 0..20 {
            let next = admm_m_step(p, &s, &cfg).unwrap();
            let g = last_grad(&inst, &next.x, s.x.last());
            let others = a.residual(&next.x) - next.x.last();
            let want = (s.x.last() * l - g + &s.lambda - others * beta) / (l + beta);
            assert!((next.x.block(n) - want).amax() <= 1e-10 * next.x.block(n).amax().max(1.0));
            s = next;
        }
    }
}

#[test]
fn residuals_at_selected_iterate_bounded_by_theta() {
    for (seed, variant) in [(40u64, Variant::G), (41, Variant::G), (42, Variant::M), (43, Variant::M)] {
        let inst = instance(seed, variant);
        let p = &inst.problem;
        let cfg = config(&inst, variant).with_max_iters(400).with_eps_theta(0.0);
        let out = admm_solve(p, &inst.x0, &inst.lambda0, &cfg, variant).unwrap();
        let theta = out.trace.theta[out.best_k.unwrap() - 1];
        let consts = complexity_constants(variant, &ConstantInputs::from_problem(p, &cfg).unwrap());
        let ComplexityConstants::Admm { kappa1, kappa2, kappa4, .. } = consts else { unreachable!() };
        let c = kappa1.sqrt().max(kappa2.sqrt()).max(kappa4.sqrt());
        let rep = stationarity_report(p, &out.state.x, Some(&out.state.lambda), Some(&out.state.certificates)).unwrap();
        assert!(rep.epsilon <= c * theta.sqrt() * (1.0 + 1e-9) + 1e-12, "seed {seed}: {} > {}", rep.epsilon, c * theta.sqrt());
        let k = admm_iteration_bound(&consts, out.trace.psi[0], p.lower_bound(), 1e-2, Setting::Setting2).unwrap();
        assert!(k > 0);
    }
}

#[test]
fn stopping_on_theta_returns_the_stopping_state() {
    let inst = instance(12, Variant::M);
    let cfg = config(&inst, Variant::M).with_max_iters(20000).with_eps_theta(1e-8);
    let out = admm_solve(&inst.problem, &inst.x0, &inst.lambda0, &cfg, Variant::M).unwrap();
    assert_eq!(out.stop, ncopt::admm::StopReason::Theta);
    assert_eq!(out.state, out.last);
    assert!(*out.trace.theta.last().unwrap() <= 1e-8);
}
