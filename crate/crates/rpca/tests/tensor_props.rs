use nalgebra::DMatrix;
use ncopt_rpca::tensor::mttkrp;
use ncopt_rpca::{khatri_rao, CpFactors, Tensor3};
use proptest::prelude::*;

fn factors(dims: [usize; 3], r: usize, vals: &[f64]) -> CpFactors {
    let mut it = vals.iter().cycle().enumerate().map(|(i, v)| v + 0.01 * i as f64);
    let mut m = |rows: usize| DMatrix::from_fn(rows, r, |_, _| it.next().unwrap());
    let (a, b, c) = (m(dims[0]), m(dims[1]), m(dims[2]));
    CpFactors::new(a, b, c).unwrap()
}

fn brute_force(f: &CpFactors) -> Tensor3 {
    Tensor3::from_fn(f.dims(), |i, j, k| {
        (0..f.rank()).map(|r| f.a[(i, r)] * f.b[(j, r)] * f.c[(k, r)]).sum()
    })
}

fn dims_strategy() -> impl Strategy<Value = [usize; 3]> {
    (1usize..5, 1usize..5, 1usize..5).prop_map(|(a, b, c)| [a, b, c])
}

proptest! {
    #[test]
    fn unfold_fold_identity(dims in dims_strategy(), vals in proptest::collection::vec(-3.0..3.0f64, 64)) {
        let t = Tensor3::from_fn(dims, |i, j, k| vals[(i + 4 * j + 16 * k) % 64]);
        for mode in 1..=3 {
            let m = t.unfold(mode).unwrap();
            prop_assert_eq!(Tensor3::fold(&m, mode, dims).unwrap(), t.clone());
        }
    }

    #[test]
    fn unfolded_fit_norms_agree(dims in dims_strategy(), r in 1usize..4, vals in proptest::collection::vec(-2.0..2.0f64, 1..40), zv in proptest::collection::vec(-2.0..2.0f64, 64)) {
        let f = factors(dims, r, &vals);
        let z = Tensor3::from_fn(dims, |i, j, k| zv[(i + 4 * j + 16 * k) % 64]);
        let tensor_space = (z.vector() - brute_force(&f).vector()).norm_squared();
        let m1 = (z.unfold(1).unwrap() - &f.a * khatri_rao(&f.c, &f.b).unwrap().transpose()).norm_squared();
        let m2 = (z.unfold(2).unwrap() - &f.b * khatri_rao(&f.c, &f.a).unwrap().transpose()).norm_squared();
        let m3 = (z.unfold(3).unwrap() - &f.c * khatri_rao(&f.b, &f.a).unwrap().transpose()).norm_squared();
        let tol = 1e-10 * tensor_space.max(1e-300);
        prop_assert!((m1 - tensor_space).abs() <= tol);
        prop_assert!((m2 - tensor_space).abs() <= tol);
        prop_assert!((m3 - tensor_space).abs() <= tol);
    }

    #[test]
    fn mttkrp_matches_unfolded_product(dims in dims_strategy(), r in 1usize..4, vals in proptest::collection::vec(-2.0..2.0f64, 1..40), zv in proptest::collection::vec(-2.0..2.0f64, 64)) {
        let f = factors(dims, r, &vals);
        let z = Tensor3::from_fn(dims, |i, j, k| zv[(i + 4 * j + 16 * k) % 64]);
        let want = [
            z.unfold(1).unwrap() * khatri_rao(&f.c, &f.b).unwrap(),
            z.unfold(2).unwrap() * khatri_rao(&f.c, &f.a).unwrap(),
            z.unfold(3).unwrap() * khatri_rao(&f.b, &f.a).unwrap(),
        ];
        for (mode, w) in want.iter().enumerate() {
            let got = mttkrp(&z, &f, mode + 1).unwrap();
            prop_assert!((got - w).amax() <= 1e-12 * w.amax().max(1.0));
        }
    }
}

#[test]
fn reconstruction_matches_outer_products() {
    let vals: Vec<f64> = (0..30).map(|i| ((i * 7919) % 13) as f64 / 6.0 - 1.0).collect();
    let f = factors([3, 4, 5], 2, &vals);
    let want = brute_force(&f);
    let got = f.reconstruct();
    assert!((got.vector() - want.vector()).amax() <= 1e-12);
}

#[test]
fn rank_one_khatri_rao_is_kronecker() {
    let x = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
    let y = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
    assert_eq!(khatri_rao(&x, &y).unwrap(), x.kronecker(&y));
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.bin");
    let t = Tensor3::from_fn([3, 2, 4], |i, j, k| (i * 100 + j * 10 + k) as f64 * 0.25);
    t.save(&path).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 24 + 24 * 8);
    assert_eq!(Tensor3::load(&path).unwrap(), t);
}
