//! Angular power spectra, angle sampling and cluster/subpath realization.
//!
//! Densities are per radian and take radian arguments; the spectrum parameters are
//! stored in degrees as they appear in configuration files.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::units::{deg2rad, rad2deg, wrap_deg, wrap_rad};
use crate::{Error, Result};

/// Azimuth power spectrum over one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AzimuthSpectrum {
    VonMises { mu_deg: f64, kappa: f64 },
    Uniform { lo_deg: f64, hi_deg: f64 },
    WrappedGaussian { mu_deg: f64, sigma_deg: f64 },
}

impl Default for AzimuthSpectrum {
    fn default() -> Self {
        AzimuthSpectrum::VonMises { mu_deg: 0.0, kappa: 6.0 }
    }
}

/// Elevation power spectrum, supported on [0°, 180°].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ElevationSpectrum {
    Laplacian { theta0_deg: f64, spread_deg: f64 },
    Uniform { lo_deg: f64, hi_deg: f64 },
    /// Point mass, used for planar (azimuth-only) propagation.
    Fixed { theta_deg: f64 },
}

impl Default for ElevationSpectrum {
    fn default() -> Self {
        ElevationSpectrum::Laplacian { theta0_deg: 90.0, spread_deg: 8.0 }
    }
}

/// Exponentially scaled modified Bessel function I0(x) e^{-x}, x >= 0.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= 30.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // Asymptotic series; terms decrease monotonically for x > 30 over 12 terms.
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..12 {
            let c = (2 * j - 1) as f64;
            term *= c * c / (j as f64 * 8.0 * x);
            sum += term;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

impl AzimuthSpectrum {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AzimuthSpectrum::VonMises { mu_deg, kappa } => mu_deg.is_finite() && kappa >= 0.0 && kappa.is_finite(),
            AzimuthSpectrum::Uniform { lo_deg, hi_deg } => lo_deg < hi_deg && hi_deg - lo_deg <= 360.0,
            AzimuthSpectrum::WrappedGaussian { mu_deg, sigma_deg } => mu_deg.is_finite() && sigma_deg > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid azimuth spectrum {self:?}")))
        }
    }

    /// Mean (LoS) direction in radians.
    pub fn location(&self) -> f64 {
        match *self {
            AzimuthSpectrum::VonMises { mu_deg, .. } | AzimuthSpectrum::WrappedGaussian { mu_deg, .. } => {
                deg2rad(wrap_deg(mu_deg))
            }
            AzimuthSpectrum::Uniform { lo_deg, hi_deg } => deg2rad(wrap_deg(0.5 * (lo_deg + hi_deg))),
        }
    }

    /// Same family re-centred on `mu_deg`.
    pub fn recentred(&self, mu_deg: f64) -> Self {
        match *self {
            AzimuthSpectrum::VonMises { kappa, .. } => AzimuthSpectrum::VonMises { mu_deg, kappa },
            AzimuthSpectrum::WrappedGaussian { sigma_deg, .. } => AzimuthSpectrum::WrappedGaussian { mu_deg, sigma_deg },
            AzimuthSpectrum::Uniform { lo_deg, hi_deg } => {
                let half = 0.5 * (hi_deg - lo_deg);
                AzimuthSpectrum::Uniform { lo_deg: mu_deg - half, hi_deg: mu_deg + half }
            }
        }
    }

    /// Integration window of one period in radians, starting half a period from the location.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            AzimuthSpectrum::Uniform { lo_deg, hi_deg } => (deg2rad(lo_deg), deg2rad(hi_deg)),
            _ => {
                let mu = self.location();
                (mu - PI, mu + PI)
            }
        }
    }

    /// Density per radian at `phi` (any real; periodic).
    pub fn pdf(&self, phi: f64) -> f64 {
        match *self {
            AzimuthSpectrum::VonMises { mu_deg, kappa } => {
                let d = phi - deg2rad(mu_deg);
                (kappa * (d.cos() - 1.0)).exp() / (2.0 * PI * bessel_i0e(kappa))
            }
            AzimuthSpectrum::Uniform { lo_deg, hi_deg } => {
                let (lo, hi) = (deg2rad(lo_deg), deg2rad(hi_deg));
                let x = lo + (phi - lo).rem_euclid(2.0 * PI);
                if x <= hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            AzimuthSpectrum::WrappedGaussian { mu_deg, sigma_deg } => {
                let s = deg2rad(sigma_deg);
                let d = wrap_rad(phi - deg2rad(mu_deg));
                let terms = (4.0 + 6.0 * s / (2.0 * PI)).ceil() as i32;
                let norm = 1.0 / (s * (2.0 * PI).sqrt());
                (-terms..=terms)
                    .map(|k| {
                        let z = (d + 2.0 * PI * k as f64) / s;
                        norm * (-0.5 * z * z).exp()
                    })
                    .sum()
            }
        }
    }

    /// One draw in radians, wrapped into (-pi, pi].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            AzimuthSpectrum::VonMises { mu_deg, kappa } => wrap_rad(deg2rad(mu_deg) + sample_von_mises(kappa, rng)),
            AzimuthSpectrum::Uniform { lo_deg, hi_deg } => {
                wrap_rad(deg2rad(lo_deg) + rng.random::<f64>() * deg2rad(hi_deg - lo_deg))
            }
            AzimuthSpectrum::WrappedGaussian { mu_deg, sigma_deg } => {
                let z: f64 = StandardNormal.sample(rng);
                wrap_rad(deg2rad(mu_deg) + deg2rad(sigma_deg) * z)
            }
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Best-Fisher rejection sampler for a zero-mean Von Mises deviate.
fn sample_von_mises<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return PI * (2.0 * rng.random::<f64>() - 1.0);
    }
    if kappa > 1e5 {
        let z: f64 = StandardNormal.sample(rng);
        return z / kappa.sqrt();
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let t = f.clamp(-1.0, 1.0).acos();
            return if u3 > 0.5 { t } else { -t };
        }
    }
}

impl ElevationSpectrum {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ElevationSpectrum::Laplacian { theta0_deg, spread_deg } => {
                theta0_deg > 0.0 && theta0_deg < 180.0 && spread_deg > 0.0 && spread_deg.is_finite()
            }
            ElevationSpectrum::Uniform { lo_deg, hi_deg } => lo_deg >= 0.0 && hi_deg <= 180.0 && lo_deg < hi_deg,
            ElevationSpectrum::Fixed { theta_deg } => (0.0..=180.0).contains(&theta_deg),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid elevation spectrum {self:?}")))
        }
    }

    /// Mean (LoS) elevation in radians.
    pub fn location(&self) -> f64 {
        match *self {
            ElevationSpectrum::Laplacian { theta0_deg, .. } => deg2rad(theta0_deg),
            ElevationSpectrum::Uniform { lo_deg, hi_deg } => deg2rad(0.5 * (lo_deg + hi_deg)),
            ElevationSpectrum::Fixed { theta_deg } => deg2rad(theta_deg),
        }
    }

    pub fn recentred(&self, theta0_deg: f64) -> Self {
        match *self {
            ElevationSpectrum::Laplacian { spread_deg, .. } => ElevationSpectrum::Laplacian { theta0_deg, spread_deg },
            ElevationSpectrum::Fixed { .. } => ElevationSpectrum::Fixed { theta_deg: theta0_deg },
            ElevationSpectrum::Uniform { lo_deg, hi_deg } => {
                let half = 0.5 * (hi_deg - lo_deg);
                ElevationSpectrum::Uniform {
                    lo_deg: (theta0_deg - half).max(0.0),
                    hi_deg: (theta0_deg + half).min(180.0),
                }
            }
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, ElevationSpectrum::Fixed { .. })
    }

    /// Support in radians.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ElevationSpectrum::Laplacian { .. } => (0.0, PI),
            ElevationSpectrum::Uniform { lo_deg, hi_deg } => (deg2rad(lo_deg), deg2rad(hi_deg)),
            ElevationSpectrum::Fixed { theta_deg } => (deg2rad(theta_deg), deg2rad(theta_deg)),
        }
    }

    /// Scale b = sigma/sqrt(2) and the left/right truncated masses of the Laplacian.
    fn laplacian_parts(theta0: f64, spread: f64) -> (f64, f64, f64) {
        let b = spread / SQRT_2;
        let left = b * (-(-theta0 / b).exp_m1());
        let right = b * (-(-(PI - theta0) / b).exp_m1());
        (b, left, right)
    }

    /// Density per radian; zero outside the support. A point mass has no density and returns 0.
    pub fn pdf(&self, theta: f64) -> f64 {
        match *self {
            ElevationSpectrum::Laplacian { theta0_deg, spread_deg } => {
                if !(0.0..=PI).contains(&theta) {
                    return 0.0;
                }
                let t0 = deg2rad(theta0_deg);
                let (b, l, r) = Self::laplacian_parts(t0, deg2rad(spread_deg));
                (-(theta - t0).abs() / b).exp() / (l + r)
            }
            ElevationSpectrum::Uniform { lo_deg, hi_deg } => {
                let (lo, hi) = (deg2rad(lo_deg), deg2rad(hi_deg));
                if (lo..=hi).contains(&theta) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            ElevationSpectrum::Fixed { .. } => 0.0,
        }
    }

    /// Cumulative distribution at `theta` (radians).
    pub fn cdf(&self, theta: f64) -> f64 {
        let (lo, hi) = self.support();
        if theta < lo {
            return 0.0;
        }
        if theta >= hi {
            return 1.0;
        }
        match *self {
            ElevationSpectrum::Laplacian { theta0_deg, spread_deg } => {
                let t0 = deg2rad(theta0_deg);
                let (b, l, r) = Self::laplacian_parts(t0, deg2rad(spread_deg));
                let z = l + r;
                if theta <= t0 {
                    b * ((theta - t0) / b).exp() * (-(-theta / b).exp_m1()) / z
                } else {
                    (l + b * (-(-(theta - t0) / b).exp_m1())) / z
                }
            }
            ElevationSpectrum::Uniform { .. } => (theta - lo) / (hi - lo),
            ElevationSpectrum::Fixed { .. } => 1.0,
        }
    }

    /// One draw in radians, in [0, pi].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ElevationSpectrum::Laplacian { theta0_deg, spread_deg } => {
                let t0 = deg2rad(theta0_deg);
                let (b, l, r) = Self::laplacian_parts(t0, deg2rad(spread_deg));
                let uz = rng.random::<f64>() * (l + r);
                let t = if uz <= l {
                    t0 + b * (uz / b + (-t0 / b).exp()).ln()
                } else {
                    t0 - b * (-(uz - l) / b).ln_1p()
                };
                t.clamp(0.0, PI)
            }
            ElevationSpectrum::Uniform { lo_deg, hi_deg } => {
                deg2rad(lo_deg) + rng.random::<f64>() * deg2rad(hi_deg - lo_deg)
            }
            ElevationSpectrum::Fixed { theta_deg } => deg2rad(theta_deg),
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Intra-cluster angular dispersion constants c, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct IntraClusterSpread {
    pub c_theta_deg: f64,
    pub c_phi_deg: f64,
    pub c_vartheta_deg: f64,
    pub c_varphi_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PowerModel {
    #[default]
    UniformOverClusters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub n_clusters: usize,
    pub subpaths_per_cluster: usize,
    pub spread: IntraClusterSpread,
    /// Symmetric unit offsets alpha, one per subpath.
    pub subpath_offsets: Vec<f64>,
    pub power_model: PowerModel,
    pub xpr_db: f64,
    pub rician_k_db: Option<f64>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            n_clusters: 20,
            subpaths_per_cluster: 1,
            spread: IntraClusterSpread::default(),
            subpath_offsets: vec![0.0],
            power_model: PowerModel::UniformOverClusters,
            xpr_db: 7.0,
            rician_k_db: None,
        }
    }
}

/// Twenty-ray symmetric offset set (unit spread), usable as `subpath_offsets`.
pub const EXAMPLE_OFFSETS_20: [f64; 20] = [
    0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715, 0.5129, -0.5129, 0.6797, -0.6797,
    0.8844, -0.8844, 1.1481, -1.1481, 1.5195, -1.5195, 2.1551, -2.1551,
];

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.subpaths_per_cluster == 0 {
            return Err(Error::InvalidParameter("clusters and subpaths must be >= 1".into()));
        }
        if self.subpath_offsets.len() != self.subpaths_per_cluster {
            return Err(Error::InvalidParameter(format!(
                "{} subpath offsets for {} subpaths",
                self.subpath_offsets.len(),
                self.subpaths_per_cluster
            )));
        }
        let mut a: Vec<f64> = self.subpath_offsets.clone();
        let mut b: Vec<f64> = a.iter().map(|x| -x).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        if a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-12) {
            return Err(Error::InvalidParameter("subpath offsets must be symmetric about 0".into()));
        }
        if !self.xpr_db.is_finite() || self.rician_k_db.is_some_and(|k| !k.is_finite()) {
            return Err(Error::InvalidParameter("XPR and Rician K must be finite".into()));
        }
        Ok(())
    }
}

/// Departure and arrival direction of one ray, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayAngles {
    pub phi_dep: f64,
    pub theta_dep: f64,
    pub phi_arr: f64,
    pub theta_arr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subpath {
    pub angles: RayAngles,
    /// Initial phases (theta-theta, theta-phi, phi-theta, phi-phi); single-polarized
    /// channels use only the first.
    pub phases: [f64; 4],
    pub doppler_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub power: f64,
    pub angles: RayAngles,
    pub subpaths: Vec<Subpath>,
}

/// Deterministic line-of-sight ray (zero initial phase).
#[derive(Debug, Clone, PartialEq)]
pub struct LosRay {
    pub power: f64,
    pub angles: RayAngles,
    pub doppler_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRealization {
    pub clusters: Vec<Cluster>,
    pub los: Option<LosRay>,
    /// Linear cross-polarization power ratio.
    pub xpr_linear: f64,
}

/// User motion used to derive per-ray Doppler shifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mobility {
    pub speed_mps: f64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub wavelength_m: f64,
}

impl Default for Mobility {
    fn default() -> Self {
        Self { speed_mps: 0.0, azimuth_deg: 0.0, elevation_deg: 90.0, wavelength_m: 0.15 }
    }
}

impl Mobility {
    /// Doppler shift for an arrival direction (radians).
    pub fn doppler_hz(&self, phi_arr: f64, theta_arr: f64) -> f64 {
        if self.speed_mps == 0.0 {
            return 0.0;
        }
        let (pv, tv) = (deg2rad(self.azimuth_deg), deg2rad(self.elevation_deg));
        let cos_angle = theta_arr.sin() * tv.sin() * (phi_arr - pv).cos() + theta_arr.cos() * tv.cos();
        self.speed_mps / self.wavelength_m * cos_angle
    }
}

impl PathRealization {
    pub fn total_power(&self) -> f64 {
        self.clusters.iter().map(|c| c.power).sum::<f64>() + self.los.as_ref().map_or(0.0, |l| l.power)
    }

    /// Fills every ray's Doppler shift from the user's motion.
    pub fn apply_mobility(&mut self, mobility: &Mobility) {
        for c in &mut self.clusters {
            for sp in &mut c.subpaths {
                sp.doppler_hz = mobility.doppler_hz(sp.angles.phi_arr, sp.angles.theta_arr);
            }
        }
        if let Some(l) = &mut self.los {
            l.doppler_hz = mobility.doppler_hz(l.angles.phi_arr, l.angles.theta_arr);
        }
    }

    /// Departure/arrival angles of every subpath in degrees, for inspection.
    pub fn subpath_angles_deg(&self) -> Vec<[f64; 4]> {
        self.clusters
            .iter()
            .flat_map(|c| c.subpaths.iter())
            .map(|s| {
                let a = s.angles;
                [rad2deg(a.phi_dep), rad2deg(a.theta_dep), rad2deg(a.phi_arr), rad2deg(a.theta_arr)]
            })
            .collect()
    }
}

/// Draws clusters and subpaths. Doppler shifts are zero until
/// [`PathRealization::apply_mobility`] is called.
pub fn realize_paths<R: Rng + ?Sized>(
    cfg: &ClusterConfig,
    az_dep: &AzimuthSpectrum,
    el_dep: &ElevationSpectrum,
    az_arr: &AzimuthSpectrum,
    el_arr: &ElevationSpectrum,
    rng: &mut R,
) -> Result<PathRealization> {
    cfg.validate()?;
    az_dep.validate()?;
    el_dep.validate()?;
    az_arr.validate()?;
    el_arr.validate()?;
    let (nlos_scale, los) = match cfg.rician_k_db {
        Some(k_db) => {
            let k = 10f64.powf(k_db / 10.0);
            let angles = RayAngles {
                phi_dep: az_dep.location(),
                theta_dep: el_dep.location(),
                phi_arr: az_arr.location(),
                theta_arr: el_arr.location(),
            };
            (1.0 / (k + 1.0), Some(LosRay { power: k / (k + 1.0), angles, doppler_hz: 0.0 }))
        }
        None => (1.0, None),
    };
    let power = nlos_scale / cfg.n_clusters as f64;
    let sp = cfg.spread;
    let clusters = (0..cfg.n_clusters)
        .map(|_| {
            let angles = RayAngles {
                phi_dep: az_dep.sample(rng),
                theta_dep: el_dep.sample(rng),
                phi_arr: az_arr.sample(rng),
                theta_arr: el_arr.sample(rng),
            };
            let subpaths = cfg
                .subpath_offsets
                .iter()
                .map(|&alpha| {
                    let a = RayAngles {
                        phi_dep: wrap_rad(angles.phi_dep + deg2rad(sp.c_phi_deg) * alpha),
                        theta_dep: (angles.theta_dep + deg2rad(sp.c_theta_deg) * alpha).clamp(0.0, PI),
                        phi_arr: wrap_rad(angles.phi_arr + deg2rad(sp.c_varphi_deg) * alpha),
                        theta_arr: (angles.theta_arr + deg2rad(sp.c_vartheta_deg) * alpha).clamp(0.0, PI),
                    };
                    let phases = std::array::from_fn(|_| 2.0 * PI * rng.random::<f64>());
                    Subpath { angles: a, phases, doppler_hz: 0.0 }
                })
                .collect();
            Cluster { power, angles, subpaths }
        })
        .collect();
    Ok(PathRealization { clusters, los, xpr_linear: 10f64.powf(cfg.xpr_db / 10.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_adaptive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
        integrate_adaptive(|x| f(x), a, b, breaks, 1e-10, 2000).unwrap()
    }

    #[test]
    fn bessel_values() {
        // Reference values of I0(x) e^{-x}.
        for (x, v) in [(0.0, 1.0), (1.0, 0.4657596075936404), (6.0, 0.16665743263981656), (50.0, 0.056561626647454184)] {
            assert!((bessel_i0e(x) - v).abs() < 1e-9 * v.max(1.0), "x={x}");
        }
        // Continuity across the series/asymptotic switch.
        let (a, b) = (bessel_i0e(30.0 - 1e-9), bessel_i0e(30.0 + 1e-9));
        assert!((a - b).abs() < 1e-10, "{a} {b}");
    }

    #[test]
    fn densities_integrate_to_one() {
        let az = [
            AzimuthSpectrum::VonMises { mu_deg: 0.0, kappa: 6.0 },
            AzimuthSpectrum::VonMises { mu_deg: 40.0, kappa: 0.0 },
            AzimuthSpectrum::VonMises { mu_deg: -20.0, kappa: 300.0 },
            AzimuthSpectrum::WrappedGaussian { mu_deg: 170.0, sigma_deg: 60.0 },
            AzimuthSpectrum::Uniform { lo_deg: -60.0, hi_deg: 60.0 },
        ];
        for s in az {
            let (lo, hi) = s.support();
            let mu = s.location();
            let i = integrate(|x| s.pdf(x), lo, hi, &[mu]);
            assert!((i - 1.0).abs() < 1e-6, "{s:?}: {i}");
        }
        let el = [
            ElevationSpectrum::Laplacian { theta0_deg: 90.0, spread_deg: 8.0 },
            ElevationSpectrum::Laplacian { theta0_deg: 170.0, spread_deg: 30.0 },
            ElevationSpectrum::Uniform { lo_deg: 60.0, hi_deg: 120.0 },
        ];
        for s in el {
            let (lo, hi) = s.support();
            let i = integrate(|x| s.pdf(x), lo, hi, &[s.location()]);
            assert!((i - 1.0).abs() < 1e-6, "{s:?}: {i}");
        }
    }

    #[test]
    fn von_mises_uniform_limit() {
        let s = AzimuthSpectrum::VonMises { mu_deg: 0.0, kappa: 0.0 };
        assert!((s.pdf(1.234) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn laplacian_peak_and_cdf() {
        let s = ElevationSpectrum::Laplacian { theta0_deg: 100.0, spread_deg: 10.0 };
        let t0 = deg2rad(100.0);
        assert!(s.pdf(t0) > s.pdf(t0 + 1e-3) && s.pdf(t0) > s.pdf(t0 - 1e-3));
        for t in [0.3, 1.5, t0, 2.0, 3.0] {
            let num = integrate(|x| s.pdf(x), 0.0, t, &[t0]);
            assert!((num - s.cdf(t)).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn sampling_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = ElevationSpectrum::Laplacian { theta0_deg: 90.0, spread_deg: 8.0 };
        let n = 1_000_000;
        let mean = s.sample_n(&mut rng, n).iter().sum::<f64>() / n as f64;
        assert!((rad2deg(mean) - 90.0).abs() < 0.05);
        let vm = AzimuthSpectrum::VonMises { mu_deg: 25.0, kappa: 1e6 };
        assert!(vm.sample_n(&mut rng, 10_000).iter().all(|&x| (rad2deg(x) - 25.0).abs() < 0.5));
    }

    #[test]
    fn paths_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = ClusterConfig { n_clusters: 5, ..ClusterConfig::default() };
        let az = AzimuthSpectrum::default();
        let el = ElevationSpectrum::default();
        let p = realize_paths(&cfg, &az, &el, &az, &el, &mut rng).unwrap();
        assert_eq!(p.clusters.len(), 5);
        assert!(p.clusters.iter().all(|c| (c.power - 0.2).abs() < 1e-15));
        assert!(p.clusters.iter().all(|c| c.subpaths[0].angles == c.angles));
        assert!((p.total_power() - 1.0).abs() < 1e-15);

        let cfg = ClusterConfig {
            n_clusters: 3,
            subpaths_per_cluster: 20,
            subpath_offsets: EXAMPLE_OFFSETS_20.to_vec(),
            spread: IntraClusterSpread { c_theta_deg: 90.0, c_phi_deg: 5.0, c_vartheta_deg: 3.0, c_varphi_deg: 5.0 },
            rician_k_db: Some(3.0),
            ..ClusterConfig::default()
        };
        let el = ElevationSpectrum::Laplacian { theta0_deg: 170.0, spread_deg: 10.0 };
        let p = realize_paths(&cfg, &az, &el, &az, &el, &mut rng).unwrap();
        assert!((p.total_power() - 1.0).abs() < 1e-12);
        for c in &p.clusters {
            assert!(c.subpaths.iter().all(|s| (0.0..=PI).contains(&s.angles.theta_dep)));
        }
    }

    #[test]
    fn offsets_must_be_symmetric() {
        let cfg = ClusterConfig { subpaths_per_cluster: 2, subpath_offsets: vec![0.1, 0.2], ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn doppler_from_mobility() {
        let m = Mobility { speed_mps: 30.0, azimuth_deg: 0.0, elevation_deg: 90.0, wavelength_m: 0.15 };
        assert!((m.doppler_hz(0.0, PI / 2.0) - 200.0).abs() < 1e-9);
        assert!(m.doppler_hz(PI / 2.0, PI / 2.0).abs() < 1e-9);
    }
}
