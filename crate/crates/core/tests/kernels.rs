mod common;

use common::*;
use fdjrc::numkernels::{dft_padded_2d, gev_top_k, herm_eig, subspace_distance, CMat, CVec};
use fdjrc::Complex64;
use proptest::prelude::*;

fn rayleigh(a: &CMat, c: &CMat, v: &CVec) -> f64 {
    (v.adjoint() * a * v)[0].re / (v.adjoint() * c * v)[0].re
}

#[test]
fn gev_top_vector_dominates_random_probes() {
    let mut r = rng(11);
    for _ in 0..20 {
        let a = random_psd(&mut r, 10, 3, 0.0);
        let c = random_psd(&mut r, 10, 10, 0.1);
        let g = gev_top_k(&a, &c, 3, 0.0).unwrap();
        let best = rayleigh(&a, &c, &g.vectors.column(0).into_owned());
        assert!((best - g.values[0]).abs() <= 1e-9 * best.max(1.0));
        for _ in 0..200 {
            let probe = gaussian_vec(&mut r, 10);
            assert!(rayleigh(&a, &c, &probe) <= best * (1.0 + 1e-10));
        }
        // Values are descending and vectors C-orthonormal.
        assert!(g.values.windows(2).all(|w| w[0] >= w[1]));
        let gram = g.vectors.adjoint() * &c * &g.vectors;
        assert!((gram - CMat::identity(3, 3)).norm() < 1e-9);
    }
}

#[test]
fn gev_agrees_with_symmetric_whitening() {
    let mut r = rng(12);
    for _ in 0..30 {
        let a = random_psd(&mut r, 6, 6, 0.0);
        let c = random_psd(&mut r, 6, 6, 0.5);
        let ridge = 1e-3;
        let g = gev_top_k(&a, &c, 2, ridge).unwrap();
        let mut cr = c.clone();
        for i in 0..6 {
            cr[(i, i)] += Complex64::new(ridge, 0.0);
        }
        let e = herm_eig(&cr).unwrap();
        let inv_sqrt = &e.vectors
            * CMat::from_diagonal(&CVec::from_iterator(
                6,
                e.values.iter().map(|v| Complex64::new(v.powf(-0.5), 0.0)),
            ))
            * e.vectors.adjoint();
        let w = &inv_sqrt * &a * &inv_sqrt;
        let top = herm_eig(&((&w + w.adjoint()).scale(0.5))).unwrap();
        let oracle = &inv_sqrt * top.vectors.columns(0, 2);
        assert!(subspace_distance(&g.vectors, &oracle).unwrap() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn padded_dft_is_linear(seed in any::<u64>(), m in 1usize..6, n in 1usize..6, pm in 0usize..4, pn in 0usize..4,
                            ar in -2.0f64..2.0, ai in -2.0f64..2.0) {
        let mut r = rng(seed);
        let x = gaussian(&mut r, m, n);
        let y = gaussian(&mut r, m, n);
        let alpha = Complex64::new(ar, ai);
        let (mbar, nbar) = (m + pm, n + pn);
        let lhs = dft_padded_2d(&(x.map(|v| v * alpha) + &y), mbar, nbar).unwrap();
        let rhs = dft_padded_2d(&x, mbar, nbar).unwrap().map(|v| v * alpha) + dft_padded_2d(&y, mbar, nbar).unwrap();
        prop_assert!((lhs - &rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn padded_dft_parseval_without_padding(seed in any::<u64>(), m in 1usize..8, n in 1usize..8) {
        let mut r = rng(seed);
        let x = gaussian(&mut r, m, n);
        let out = dft_padded_2d(&x, m, n).unwrap();
        let expect = x.norm_squared() * (m * n) as f64;
        prop_assert!((out.norm_squared() - expect).abs() <= 1e-9 * expect.max(1.0));
    }
}
