//! Quick invariant checks behind the `validate` command.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Scenario};
use super::experiment::run_experiment;
use crate::array::{port_hpbw_deg, port_peak_gain_dbi, ArrayGeometry};
use crate::beamforming::{weights_eigen_single_user, zf};
use crate::channel::complex_normal;
use crate::correlation::{element_covariance, ScfMethod};
use crate::linalg::{check_hermitian_psd, hermitian_asymmetry};
use crate::quadrature::integrate_adaptive;
use crate::spectra::{AzimuthSpectrum, ElevationSpectrum};
use crate::txru::{common_virtualization, weights_1d};
use crate::{Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    match f() {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome { name, passed: false, detail: format!("error: {e}") },
    }
}

/// Runs every check over `seeds` random seeds where randomness applies.
pub fn run_invariant_suite(seeds: u64) -> Vec<CheckOutcome> {
    let seeds = seeds.max(1);
    vec![
        check("port golden numbers", || {
            let hpbw = port_hpbw_deg(8, 0.8)?;
            let gain = port_peak_gain_dbi(8.0, 8);
            Ok(((hpbw - 7.9341).abs() < 1e-3 && (gain - 17.03).abs() < 0.01, format!("hpbw {hpbw:.4}°, gain {gain:.3} dBi")))
        }),
        check("tilt weights unit norm and semi-unitary mapping", || {
            let mut worst: f64 = 0.0;
            for s in 0..seeds {
                let theta = 60.0 + (s as f64 * 7.3) % 60.0;
                let w = weights_1d(8, 0.8, theta)?;
                let g = ArrayGeometry::new(8, 4, 0.8, 0.5)?;
                let d = common_virtualization(&g, &w)?.dense();
                let e = (d.adjoint() * &d - DMatrix::<C64>::identity(4, 4)).iter().map(|z| z.norm()).fold(0.0, f64::max);
                worst = worst.max(e).max((w.weights().norm() - 1.0).abs());
            }
            Ok((worst < 1e-10, format!("max deviation {worst:.2e}")))
        }),
        check("spectrum densities integrate to one", || {
            let mut worst: f64 = 0.0;
            for s in 0..seeds.min(20) {
                let az = AzimuthSpectrum::VonMises { mu_deg: -30.0 + 3.0 * s as f64, kappa: 0.5 + s as f64 };
                let el = ElevationSpectrum::Laplacian { theta0_deg: 80.0 + s as f64, spread_deg: 4.0 + s as f64 };
                let (a0, a1) = az.support();
                let (e0, e1) = el.support();
                let ia = integrate_adaptive(|x| az.pdf(x), a0, a1, &[az.location()], 1e-10, 2000)?;
                let ie = integrate_adaptive(|x| el.pdf(x), e0, e1, &[el.location()], 1e-10, 2000)?;
                worst = worst.max((ia - 1.0).abs()).max((ie - 1.0).abs());
            }
            Ok((worst < 1e-8, format!("max deviation {worst:.2e}")))
        }),
        check("element covariance Hermitian PSD", || {
            let g = ArrayGeometry::new(4, 3, 0.8, 0.5)?;
            let mut worst: f64 = 0.0;
            for s in 0..seeds.min(10) {
                let az = AzimuthSpectrum::default().recentred(-40.0 + 8.0 * s as f64);
                let el = ElevationSpectrum::default().recentred(92.0 + s as f64);
                let r = element_covariance(&g, &az, &el, &ScfMethod::Grid { order: 6 })?;
                check_hermitian_psd(r.matrix(), 1e-12)?;
                worst = worst.max(hermitian_asymmetry(r.matrix()));
                weights_eigen_single_user(&r.matrix().view((0, 0), (4, 4)).into_owned())?;
            }
            Ok((worst < 1e-12, format!("max asymmetry {worst:.2e}")))
        }),
        check("zero-forcing nulls interference", || {
            let mut worst: f64 = 0.0;
            for s in 0..seeds {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let h = DMatrix::from_fn(4, 8, |_, _| complex_normal(&mut rng));
                let g = zf(&h)?;
                let x = &h * &g.g;
                for i in 0..4 {
                    for j in (0..4).filter(|&j| j != i) {
                        worst = worst.max(x[(i, j)].norm());
                    }
                }
            }
            Ok((worst < 1e-10, format!("max leakage {worst:.2e}")))
        }),
        check("experiments reproducible under a fixed seed", || {
            let mut cfg = ExperimentConfig::for_scenario(Scenario::MultiUser);
            cfg.trials = 2;
            cfg.draws_per_drop = 1;
            cfg.aaa.n_ports = 4;
            cfg.sweep = vec![2.0];
            cfg.general.scf = ScfMethod::Grid { order: 4 };
            cfg.sdb.randomizations = 10;
            let a = run_experiment(&cfg)?;
            let b = run_experiment(&cfg)?;
            Ok((a == b, format!("{} rows", a.len())))
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_invariant_suite(5) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
