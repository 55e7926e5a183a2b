//! Ray-tracing channel coefficients and covariance-based channel draws.
//!
//! Channel matrices have one row per receive element and one column per transmit
//! element or port. Columns follow [`ArrayGeometry::element_index`] for element
//! channels and `p*N + s` for port channels.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::array::{field_decompose, itu_port_pattern_db_rad, ArrayGeometry, ItuPortPatternParams, Polarization};
use crate::correlation::CovarianceMatrix;
use crate::linalg::{psd_sqrt, write_complex_csv};
use crate::spectra::{Mobility, PathRealization, RayAngles};
use crate::txru::VirtualizationMatrix;
use crate::units::{db_to_power, deg2rad};
use crate::{Error, Result, C64};

/// Path loss and shadow-fading draw of one link, in dB.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LargeScale {
    pub path_loss_db: f64,
    pub shadow_fading_db: f64,
}

impl LargeScale {
    pub fn new(path_loss_db: f64, shadow_fading_db: f64) -> Result<Self> {
        if !path_loss_db.is_finite() || !shadow_fading_db.is_finite() {
            return Err(Error::InvalidParameter("large-scale terms must be finite".into()));
        }
        Ok(Self { path_loss_db, shadow_fading_db })
    }

    /// Amplitude factor sqrt(10^(-(PL+SF)/10)).
    pub fn amplitude(&self) -> f64 {
        db_to_power(-(self.path_loss_db + self.shadow_fading_db)).sqrt()
    }

    /// Power factor 10^(-(PL+SF)/10).
    pub fn power(&self) -> f64 {
        db_to_power(-(self.path_loss_db + self.shadow_fading_db))
    }
}

/// Log-distance path loss PL0 + 10 n log10(d / d0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossModel {
    pub pl0_db: f64,
    pub exponent: f64,
    pub d0_m: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self { pl0_db: 128.1, exponent: 3.76, d0_m: 1000.0 }
    }
}

impl PathLossModel {
    pub fn path_loss_db(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m > 0.0) || !(self.d0_m > 0.0) {
            return Err(Error::InvalidParameter(format!("path loss distance must be > 0, got {distance_m}")));
        }
        Ok(self.pl0_db + 10.0 * self.exponent * (distance_m / self.d0_m).log10())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    /// Transmit elements as columns.
    Element,
    /// Ports built from element channels through the virtualization matrix.
    PortElementApproach,
    /// Ports with the approximate port pattern.
    PortItu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    pub h: DMatrix<C64>,
    pub t: f64,
    pub kind: ChannelKind,
}

impl ChannelSnapshot {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_complex_csv(&self.h, w)
    }
}

/// Receive uniform linear array along the local y axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiveArray {
    pub n_elements: usize,
    pub spacing: f64,
    /// Slant of the receive field pattern, used only for cross-polarized links.
    pub slant_deg: f64,
}

impl Default for ReceiveArray {
    fn default() -> Self {
        Self { n_elements: 1, spacing: 0.5, slant_deg: 90.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserGeometry {
    pub los_azimuth_deg: f64,
    pub los_elevation_deg: f64,
    pub distance_m: f64,
    pub rx: ReceiveArray,
    pub mobility: Mobility,
}

impl UserGeometry {
    pub fn new(los_azimuth_deg: f64, los_elevation_deg: f64, distance_m: f64) -> Result<Self> {
        let u = Self {
            los_azimuth_deg,
            los_elevation_deg,
            distance_m,
            rx: ReceiveArray::default(),
            mobility: Mobility::default(),
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.los_elevation_deg > 0.0 && self.los_elevation_deg < 180.0) {
            return Err(Error::InvalidParameter(format!(
                "LoS elevation must lie in (0, 180), got {}",
                self.los_elevation_deg
            )));
        }
        if !(self.distance_m > 0.0) || self.rx.n_elements == 0 {
            return Err(Error::InvalidParameter("user distance and receive element count must be positive".into()));
        }
        Ok(())
    }
}

/// Phase of transmit element (m, s), zero-based, at angles in degrees.
pub fn tx_array_response_element(geometry: &ArrayGeometry, s: usize, m: usize, phi_deg: f64, theta_deg: f64) -> Result<C64> {
    let pos = geometry.element_position(m, s)?;
    let (phi, theta) = (deg2rad(phi_deg), deg2rad(theta_deg));
    Ok(C64::from_polar(1.0, 2.0 * PI * (pos[1] * phi.sin() * theta.sin() + pos[2] * theta.cos())))
}

struct Ray {
    amp: f64,
    phases: [f64; 4],
    angles: RayAngles,
    doppler_hz: f64,
}

fn rays(paths: &PathRealization) -> Vec<Ray> {
    let mut out = Vec::new();
    for c in &paths.clusters {
        let amp = (c.power / c.subpaths.len() as f64).sqrt();
        for sp in &c.subpaths {
            out.push(Ray { amp, phases: sp.phases, angles: sp.angles, doppler_hz: sp.doppler_hz });
        }
    }
    if let Some(l) = &paths.los {
        out.push(Ray { amp: l.power.sqrt(), phases: [0.0; 4], angles: l.angles, doppler_hz: l.doppler_hz });
    }
    out
}

/// Polarization coupling g_r^T alpha g_t for a ray with linear transmit gain `gain`.
fn coupling(
    pol: Polarization,
    gain: f64,
    tx_slant: f64,
    rx_slant: f64,
    phases: &[f64; 4],
    xpr_linear: f64,
) -> C64 {
    match pol {
        Polarization::Single => C64::from_polar(gain.sqrt(), phases[0]),
        Polarization::Dual => {
            let (tv, th) = field_decompose(gain, tx_slant);
            let (rv, rh) = field_decompose(1.0, rx_slant);
            let x = (1.0 / xpr_linear).sqrt();
            let a = [
                C64::from_polar(1.0, phases[0]),
                C64::from_polar(x, phases[1]),
                C64::from_polar(x, phases[2]),
                C64::from_polar(1.0, phases[3]),
            ];
            rv * (a[0] * tv + a[1] * th) + rh * (a[2] * tv + a[3] * th)
        }
    }
}

/// Per-ray receive response times Doppler rotation, one entry per receive element.
fn rx_terms(user: &UserGeometry, ray: &Ray, t: f64) -> Vec<C64> {
    let doppler = C64::from_polar(1.0, 2.0 * PI * ray.doppler_hz * t);
    let step = 2.0 * PI * user.rx.spacing * ray.angles.phi_arr.sin() * ray.angles.theta_arr.sin();
    (0..user.rx.n_elements).map(|u| doppler * C64::from_polar(1.0, step * u as f64)).collect()
}

/// Element-level channel, U x (N*M*P).
pub fn raytrace_element_channel(
    geometry: &ArrayGeometry,
    user: &UserGeometry,
    paths: &PathRealization,
    large_scale: &LargeScale,
    t: f64,
) -> Result<ChannelSnapshot> {
    user.validate()?;
    let (m_count, n, pol) = (geometry.m_per_port(), geometry.n_ports(), geometry.polarization());
    let mut h = DMatrix::zeros(user.rx.n_elements, geometry.total_elements());
    let mut at = vec![C64::new(0.0, 0.0); n * m_count];
    for ray in rays(paths) {
        let RayAngles { phi_dep, theta_dep, .. } = ray.angles;
        let gain = geometry.pattern().power_gain(phi_dep, theta_dep);
        let hstep = C64::from_polar(1.0, 2.0 * PI * geometry.d_h() * phi_dep.sin() * theta_dep.sin());
        let vstep = C64::from_polar(1.0, 2.0 * PI * geometry.d_v() * theta_dep.cos());
        let mut hp = C64::new(1.0, 0.0);
        for s in 0..n {
            let mut vp = hp;
            for m in 0..m_count {
                at[s * m_count + m] = vp;
                vp *= vstep;
            }
            hp *= hstep;
        }
        let rx = rx_terms(user, &ray, t);
        for p in 0..pol.count() {
            let g = ray.amp * coupling(pol, gain, geometry.slant_of(p), user.rx.slant_deg, &ray.phases, paths.xpr_linear);
            let base = p * n * m_count;
            for (u, r) in rx.iter().enumerate() {
                let c = g * r;
                for (k, a) in at.iter().enumerate() {
                    h[(u, base + k)] += c * a;
                }
            }
        }
    }
    h *= C64::new(large_scale.amplitude(), 0.0);
    Ok(ChannelSnapshot { h, t, kind: ChannelKind::Element })
}

/// Port channel from the element channel through the virtualization matrix, U x (N*P).
pub fn raytrace_port_channel_element_approach(
    geometry: &ArrayGeometry,
    w: &VirtualizationMatrix,
    user: &UserGeometry,
    paths: &PathRealization,
    large_scale: &LargeScale,
    t: f64,
) -> Result<ChannelSnapshot> {
    if w.n_ports() != geometry.total_ports() || w.m_per_port() != geometry.m_per_port() {
        return Err(Error::DimensionMismatch(format!(
            "virtualization is {}x{} blocks, geometry has {} ports of {} elements",
            w.n_ports(),
            w.m_per_port(),
            geometry.total_ports(),
            geometry.m_per_port()
        )));
    }
    let elem = raytrace_element_channel(geometry, user, paths, large_scale, t)?;
    Ok(ChannelSnapshot { h: elem.h * w.dense(), t, kind: ChannelKind::PortElementApproach })
}

/// Port channel under the approximate port pattern, U x (N*P). Only the port count,
/// horizontal spacing and polarization of `geometry` are used.
pub fn raytrace_port_channel_itu(
    itu: &ItuPortPatternParams,
    geometry: &ArrayGeometry,
    theta_tilt_deg: f64,
    user: &UserGeometry,
    paths: &PathRealization,
    large_scale: &LargeScale,
    t: f64,
) -> Result<ChannelSnapshot> {
    itu.validate()?;
    user.validate()?;
    if !(theta_tilt_deg > 0.0 && theta_tilt_deg < 180.0) {
        return Err(Error::InvalidParameter(format!("tilt must lie in (0, 180), got {theta_tilt_deg}")));
    }
    let tilt = deg2rad(theta_tilt_deg);
    let (n, pol) = (geometry.n_ports(), geometry.polarization());
    let mut h = DMatrix::zeros(user.rx.n_elements, geometry.total_ports());
    for ray in rays(paths) {
        let RayAngles { phi_dep, theta_dep, .. } = ray.angles;
        let gain = db_to_power(itu_port_pattern_db_rad(itu, phi_dep, theta_dep, tilt));
        let hstep = C64::from_polar(1.0, 2.0 * PI * geometry.d_h() * phi_dep.sin() * theta_dep.sin());
        let rx = rx_terms(user, &ray, t);
        for p in 0..pol.count() {
            let g = ray.amp * coupling(pol, gain, geometry.slant_of(p), user.rx.slant_deg, &ray.phases, paths.xpr_linear);
            for (u, r) in rx.iter().enumerate() {
                let mut hp = g * r;
                for s in 0..n {
                    h[(u, p * n + s)] += hp;
                    hp *= hstep;
                }
            }
        }
    }
    h *= C64::new(large_scale.amplitude(), 0.0);
    Ok(ChannelSnapshot { h, t, kind: ChannelKind::PortItu })
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Reusable sampler h = scale R^{1/2} z.
#[derive(Debug, Clone)]
pub struct CorrelatedRayleigh {
    root: DMatrix<C64>,
    amplitude: f64,
}

impl CorrelatedRayleigh {
    pub fn new(r: &CovarianceMatrix, large_scale: &LargeScale) -> Result<Self> {
        Ok(Self { root: psd_sqrt(r.matrix())?, amplitude: large_scale.amplitude() })
    }

    pub fn dim(&self) -> usize {
        self.root.nrows()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<C64> {
        let z = DVector::from_fn(self.dim(), |_, _| complex_normal(rng));
        self.apply(&z)
    }

    /// Colours a given white vector, for common-random-number comparisons.
    pub fn apply(&self, z: &DVector<C64>) -> DVector<C64> {
        &self.root * z * C64::new(self.amplitude, 0.0)
    }
}

pub fn draw_rayleigh_correlated<R: Rng + ?Sized>(
    r_bs: &CovarianceMatrix,
    large_scale: &LargeScale,
    rng: &mut R,
) -> Result<DVector<C64>> {
    Ok(CorrelatedRayleigh::new(r_bs, large_scale)?.draw(rng))
}

/// Kronecker-correlated U x N channel scale R_MS^{1/2} X R_BS^{1/2}.
pub fn draw_kronecker<R: Rng + ?Sized>(
    r_ms: &CovarianceMatrix,
    r_bs: &CovarianceMatrix,
    large_scale: &LargeScale,
    rng: &mut R,
) -> Result<DMatrix<C64>> {
    let a = psd_sqrt(r_ms.matrix())?;
    let b = psd_sqrt(r_bs.matrix())?;
    let x = DMatrix::from_fn(a.ncols(), b.nrows(), |_, _| complex_normal(rng));
    Ok(a * x * b * C64::new(large_scale.amplitude(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::ElementPattern;
    use crate::correlation::CovarianceLevel;
    use crate::spectra::{realize_paths, AzimuthSpectrum, ClusterConfig, ElevationSpectrum};
    use crate::txru::{build_virtualization, common_virtualization, weights_1d, TiltWeights};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn user() -> UserGeometry {
        UserGeometry::new(0.0, 95.0, 100.0).unwrap()
    }

    fn geometry(m: usize, n: usize) -> ArrayGeometry {
        ArrayGeometry::new(m, n, 0.8, 0.5).unwrap()
    }

    fn draw_paths(rng: &mut ChaCha8Rng, clusters: usize) -> PathRealization {
        let cfg = ClusterConfig { n_clusters: clusters, ..Default::default() };
        let az = AzimuthSpectrum::default();
        let el = ElevationSpectrum::Laplacian { theta0_deg: 95.0, spread_deg: 8.0 };
        realize_paths(&cfg, &az, &el, &az, &el, rng).unwrap()
    }

    #[test]
    fn array_response_examples() {
        let g = geometry(2, 2);
        assert!((tx_array_response_element(&g, 0, 0, 33.0, 71.0).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        let v = tx_array_response_element(&g, 1, 0, 90.0, 90.0).unwrap();
        assert!((v + C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(tx_array_response_element(&g, 2, 0, 0.0, 90.0).is_err());
    }

    #[test]
    fn single_boresight_ray_equal_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = draw_paths(&mut rng, 1);
        let c = &mut p.clusters[0];
        c.subpaths[0].phases = [0.0; 4];
        c.subpaths[0].angles = RayAngles { phi_dep: 0.0, theta_dep: PI / 2.0, phi_arr: 0.0, theta_arr: PI / 2.0 };
        let g = geometry(4, 3).with_pattern(ElementPattern::Isotropic).unwrap();
        let h = raytrace_element_channel(&g, &user(), &p, &LargeScale::default(), 0.0).unwrap().h;
        assert!(h.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn single_ray_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = draw_paths(&mut rng, 1);
        let mut u = user();
        u.rx.n_elements = 3;
        let h = raytrace_element_channel(&geometry(4, 2), &u, &p, &LargeScale::default(), 0.0).unwrap().h;
        let sv = h.singular_values();
        assert!(sv[1] < 1e-10 * sv[0]);
    }

    #[test]
    fn element_approach_oracle() {
        // Direct sum over rays of port gain * array factor * horizontal phase.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = draw_paths(&mut rng, 6);
        let g = geometry(8, 3);
        let w = weights_1d(8, 0.8, 98.0).unwrap();
        let wt = common_virtualization(&g, &w).unwrap();
        let ls = LargeScale::new(80.0, 3.0).unwrap();
        let got = raytrace_port_channel_element_approach(&g, &wt, &user(), &p, &ls, 0.0).unwrap().h;
        for s in 0..3 {
            let mut acc = C64::new(0.0, 0.0);
            for c in &p.clusters {
                let sp = &c.subpaths[0];
                let a = sp.angles;
                let gain = g.pattern().power_gain(a.phi_dep, a.theta_dep).sqrt();
                let af = crate::array::array_factor_rad(w.weights().as_slice(), 0.8, a.theta_dep);
                let hph = C64::from_polar(1.0, 2.0 * PI * 0.5 * s as f64 * a.phi_dep.sin() * a.theta_dep.sin());
                acc += c.power.sqrt() * gain * af * hph * C64::from_polar(1.0, sp.phases[0]);
            }
            acc *= ls.amplitude();
            assert!((got[(0, s)] - acc).norm() < 1e-12 * acc.norm().max(1e-30) + 1e-25);
        }
    }

    #[test]
    fn selector_and_m1_reduce_to_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = draw_paths(&mut rng, 4);
        let g = geometry(3, 2);
        let mut e1 = DVector::zeros(3);
        e1[0] = C64::new(1.0, 0.0);
        let sel = TiltWeights::new(e1).unwrap();
        let wt = build_virtualization(&g, &[sel.clone(), sel]).unwrap();
        let ls = LargeScale::default();
        let port = raytrace_port_channel_element_approach(&g, &wt, &user(), &p, &ls, 0.0).unwrap().h;
        let elem = raytrace_element_channel(&g, &user(), &p, &ls, 0.0).unwrap().h;
        assert!((port[(0, 0)] - elem[(0, 0)]).norm() < 1e-14);
        assert!((port[(0, 1)] - elem[(0, 3)]).norm() < 1e-14);
        let g1 = geometry(1, 2);
        let one = TiltWeights::new(DVector::from_element(1, C64::new(1.0, 0.0))).unwrap();
        let wt1 = common_virtualization(&g1, &one).unwrap();
        let port = raytrace_port_channel_element_approach(&g1, &wt1, &user(), &p, &ls, 0.0).unwrap().h;
        let elem = raytrace_element_channel(&g1, &user(), &p, &ls, 0.0).unwrap().h;
        assert!((port - elem).norm() < 1e-14);
    }

    #[test]
    fn itu_channel_clamps_and_boresight() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = draw_paths(&mut rng, 1);
        let itu = ItuPortPatternParams::default();
        let g = geometry(1, 4);
        p.clusters[0].subpaths[0].angles.phi_dep = 0.0;
        p.clusters[0].subpaths[0].angles.theta_dep = deg2rad(100.0);
        let h = raytrace_port_channel_itu(&itu, &g, 100.0, &user(), &p, &LargeScale::default(), 0.0).unwrap().h;
        assert!(h.iter().all(|x| (x.norm() - db_to_power(17.0).sqrt()).abs() < 1e-9));
        p.clusters[0].subpaths[0].angles.theta_dep = deg2rad(170.0);
        let h = raytrace_port_channel_itu(&itu, &g, 100.0, &user(), &p, &LargeScale::default(), 0.0).unwrap().h;
        assert!(h.iter().all(|x| (x.norm() - db_to_power(-3.0).sqrt()).abs() < 1e-9));
    }

    #[test]
    fn itu_port_phase_matches_element_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = draw_paths(&mut rng, 1);
        let g = geometry(1, 4);
        let itu = ItuPortPatternParams::default();
        let h = raytrace_port_channel_itu(&itu, &g, 95.0, &user(), &p, &LargeScale::default(), 0.0).unwrap().h;
        let a = p.clusters[0].subpaths[0].angles;
        let (phi, th) = (crate::units::rad2deg(a.phi_dep), crate::units::rad2deg(a.theta_dep));
        for s in 1..4 {
            let expect = tx_array_response_element(&g, s, 0, phi, th).unwrap();
            assert!((h[(0, s)] / h[(0, 0)] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn unit_power_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = geometry(2, 2).with_pattern(ElementPattern::Isotropic).unwrap();
        let trials = 10_000;
        let mut acc = Vec::with_capacity(trials);
        for _ in 0..trials {
            let p = draw_paths(&mut rng, 20);
            let h = raytrace_element_channel(&g, &user(), &p, &LargeScale::default(), 0.0).unwrap().h;
            acc.push(h.iter().map(|x| x.norm_sqr()).sum::<f64>() / h.len() as f64);
        }
        let mean = acc.iter().sum::<f64>() / trials as f64;
        let sd = (acc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sd / (trials as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn stationary_user_time_invariant_and_doppler_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = draw_paths(&mut rng, 5);
        let g = geometry(2, 2);
        let ls = LargeScale::default();
        let h0 = raytrace_element_channel(&g, &user(), &p, &ls, 0.0).unwrap().h;
        let h1 = raytrace_element_channel(&g, &user(), &p, &ls, 0.37).unwrap().h;
        assert!((&h0 - h1).norm() < 1e-14);
        p.apply_mobility(&Mobility { speed_mps: 10.0, ..Default::default() });
        let h2 = raytrace_element_channel(&g, &user(), &p, &ls, 0.01).unwrap().h;
        assert!((h0 - h2).norm() > 1e-3);
    }

    #[test]
    fn dual_polarized_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = draw_paths(&mut rng, 5);
        let g = geometry(2, 3).with_polarization(Polarization::Dual, 45.0).unwrap();
        let h = raytrace_element_channel(&g, &user(), &p, &LargeScale::default(), 0.0).unwrap();
        assert_eq!(h.h.ncols(), 12);
        assert!(h.h.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn rayleigh_white_and_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ls = LargeScale::new(3.0, 0.0).unwrap();
        let eye = CovarianceMatrix::new(DMatrix::identity(3, 3), CovarianceLevel::Port).unwrap();
        let n = 100_000;
        let mut var = 0.0;
        for _ in 0..n {
            var += draw_rayleigh_correlated(&eye, &ls, &mut rng).unwrap()[0].norm_sqr();
        }
        var /= n as f64;
        // Exponential(1) has unit standard deviation.
        let expect = ls.power();
        assert!((var - expect).abs() < 3.0 * expect / (n as f64).sqrt());

        let u = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.5, -0.5)]);
        let r1 = CovarianceMatrix::new(&u * u.adjoint(), CovarianceLevel::Port).unwrap();
        let h = draw_rayleigh_correlated(&r1, &LargeScale::default(), &mut rng).unwrap();
        let proj = u.dotc(&h) / C64::new(u.norm_squared(), 0.0);
        assert!((&h - &u * proj).norm() < 1e-8 * h.norm());
    }

    #[test]
    fn kronecker_degenerate_and_white() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let one = CovarianceMatrix::new(DMatrix::identity(1, 1), CovarianceLevel::Port).unwrap();
        let eye = CovarianceMatrix::new(DMatrix::identity(2, 2), CovarianceLevel::Port).unwrap();
        assert_eq!(draw_kronecker(&one, &eye, &LargeScale::default(), &mut rng).unwrap().shape(), (1, 2));
        assert!(CovarianceMatrix::new(-DMatrix::<C64>::identity(2, 2), CovarianceLevel::Port).is_err());
    }
}
