//! Module invariants over 100 random seeds each.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fdmimo::array::ArrayGeometry;
use fdmimo::beamforming::{mrt_scaled, rzf, sir_deterministic, zf, MrtScaling, PowerAllocation};
use fdmimo::channel::{complex_normal, CorrelatedRayleigh, LargeScale};
use fdmimo::correlation::{element_covariance, port_covariance, CovarianceLevel, CovarianceMatrix, ScfMethod};
use fdmimo::harness::rng::{stream, Purpose};
use fdmimo::linalg::{check_hermitian_psd, hermitian_asymmetry};
use fdmimo::quadrature::integrate_adaptive;
use fdmimo::spectra::{AzimuthSpectrum, ElevationSpectrum};
use fdmimo::txru::{build_virtualization, map_subarray_2d, weights_1d, weights_2d, TiltWeights};
use fdmimo::C64;

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

fn random_unit(len: usize, rng: &mut impl Rng) -> TiltWeights {
    TiltWeights::normalized(DVector::from_fn(len, |_, _| complex_normal(rng))).unwrap()
}

fn spreads(seed: u64) -> (AzimuthSpectrum, ElevationSpectrum) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let az = AzimuthSpectrum::VonMises { mu_deg: rng.random_range(-60.0..60.0), kappa: rng.random_range(0.5..20.0) };
    let el = ElevationSpectrum::Laplacian { theta0_deg: rng.random_range(80.0..110.0), spread_deg: rng.random_range(2.0..30.0) };
    (az, el)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn tilt_weights_have_unit_norm(k in 1usize..16, d_v in 0.2f64..1.2, tilt in 1.0f64..179.0) {
        let w = weights_1d(k, d_v, tilt).unwrap();
        prop_assert!((w.weights().norm() - 1.0).abs() < 1e-12);
        prop_assert!(w.weights().iter().all(|z| (z.norm() - 1.0 / (k as f64).sqrt()).abs() < 1e-12));
    }

    #[test]
    fn two_dimensional_mapping_preserves_power(k in 1usize..8, l in 1usize..8, tilt in 60.0f64..120.0, scan in -60.0f64..60.0, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let (w, v) = weights_2d(k, l, 0.8, 0.5, tilt, scan).unwrap();
        let x = C64::new(re, im);
        let q = map_subarray_2d(x, &v, &w);
        prop_assert_eq!(q.len(), k * l);
        prop_assert!((q.norm() - x.norm()).abs() < 1e-12);
    }

    #[test]
    fn virtualization_is_semi_unitary(seed in any::<u64>(), m in 1usize..9, n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ArrayGeometry::new(m, n, 0.8, 0.5).unwrap();
        let per_port: Vec<TiltWeights> = (0..n).map(|_| random_unit(m, &mut rng)).collect();
        let d = build_virtualization(&g, &per_port).unwrap().dense();
        prop_assert!(max_abs(&(d.adjoint() * &d - DMatrix::identity(n, n))) < 1e-12);
    }

    #[test]
    fn covariances_are_hermitian_psd(seed in any::<u64>()) {
        let (az, el) = spreads(seed);
        let g = ArrayGeometry::new(3, 3, 0.8, 0.5).unwrap();
        let r = element_covariance(&g, &az, &el, &ScfMethod::Grid { order: 4 }).unwrap();
        prop_assert!(hermitian_asymmetry(r.matrix()) < 1e-12);
        prop_assert!(check_hermitian_psd(r.matrix(), 1e-12).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let per_port: Vec<TiltWeights> = (0..3).map(|_| random_unit(3, &mut rng)).collect();
        let p = port_covariance(&r, &build_virtualization(&g, &per_port).unwrap()).unwrap();
        prop_assert!(check_hermitian_psd(p.matrix(), 1e-12).is_ok());
    }

    #[test]
    fn zero_forcing_nulls_interference(seed in any::<u64>(), k in 1usize..6, extra in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = k + extra;
        let h = random_matrix(k, n, &mut rng);
        let x = &h * &zf(&h).unwrap().g;
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                prop_assert!(x[(i, j)].norm() < 1e-9 * x[(i, i)].norm().max(1.0));
            }
        }
        let g = rzf(&h, 1e-3).unwrap();
        prop_assert!(g.g.column_iter().all(|c| (c.norm() - 1.0).abs() < 1e-10));
    }

    #[test]
    fn statistical_mrt_meets_the_average_budget(seed in any::<u64>(), k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let traces: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..10.0)).collect();
        let h = random_matrix(k, 8, &mut rng);
        let p = PowerAllocation::equal(k, 2.0).unwrap();
        // E||g_k||^2 = xi^2 tr R_k, so the expected radiated power is the budget.
        let common = mrt_scaled(&h, &traces, MrtScaling::Common).unwrap();
        let xi2 = common.g.column(0).norm_squared() / h.row(0).norm_squared();
        let expected: f64 = p.powers.iter().zip(&traces).map(|(pk, t)| pk * xi2 * t).sum();
        prop_assert!((expected - 2.0).abs() < 1e-9);
        let per_user = mrt_scaled(&h, &traces, MrtScaling::PerUser).unwrap();
        for (i, (c, t)) in per_user.g.column_iter().zip(&traces).enumerate() {
            let hk = h.row(i).norm_squared();
            prop_assert!((c.norm_squared() * t - hk).abs() < 1e-10 * hk);
        }
    }

    #[test]
    fn identical_users_share_one_surrogate(seed in any::<u64>(), k in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(4, 4, &mut rng);
        let r = CovarianceMatrix::new(&a * a.adjoint(), CovarianceLevel::Port).unwrap();
        let sir = sir_deterministic(&vec![r; k]).unwrap();
        prop_assert!(sir.iter().all(|s| (s - sir[0]).abs() <= 1e-12 * sir[0]));
    }

    #[test]
    fn coloured_draws_have_the_target_root(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(5, 5, &mut rng);
        let target = &a * a.adjoint();
        let r = CovarianceMatrix::new(target.clone(), CovarianceLevel::Port).unwrap();
        let c = CorrelatedRayleigh::new(&r, &LargeScale::default()).unwrap();
        // Columns of the colouring map are the responses to unit vectors.
        let root = DMatrix::from_columns(&(0..5).map(|i| c.apply(&DVector::from_fn(5, |j, _| C64::new(f64::from(u8::from(i == j)), 0.0)))).collect::<Vec<_>>());
        prop_assert!(max_abs(&(&root * root.adjoint() - &target)) < 1e-8 * max_abs(&target));
    }

    #[test]
    fn streams_are_deterministic_and_keyed(master in any::<u64>(), trial in 0u64..1000, sub in 0u64..16) {
        let draw = |p: Purpose| -> Vec<u64> {
            let mut s = stream(master, trial, p, sub);
            (0..4).map(|_| s.random()).collect()
        };
        prop_assert_eq!(draw(Purpose::Fading), draw(Purpose::Fading));
        prop_assert_ne!(draw(Purpose::Fading), draw(Purpose::Placement));
        let mut other = stream(master, trial + 1, Purpose::Fading, sub);
        let first: u64 = other.random();
        prop_assert_ne!(first, draw(Purpose::Fading)[0]);
    }

    #[test]
    fn angular_densities_integrate_to_one(seed in any::<u64>()) {
        let (az, el) = spreads(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let wg = AzimuthSpectrum::WrappedGaussian { mu_deg: rng.random_range(-90.0..90.0), sigma_deg: rng.random_range(3.0..60.0) };
        for a in [az, wg] {
            let (lo, hi) = a.support();
            let total = integrate_adaptive(|x| a.pdf(x), lo, hi, &[a.location()], 1e-11, 4000).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-8, "{:?} integrates to {}", a, total);
        }
        let (lo, hi) = el.support();
        let total = integrate_adaptive(|x| el.pdf(x), lo, hi, &[el.location()], 1e-11, 4000).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-8);
        prop_assert!((el.cdf(hi) - 1.0).abs() < 1e-12 && el.cdf(lo).abs() < 1e-12);
    }
}
