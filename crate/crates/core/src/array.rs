//! Antenna element and port geometry and radiation-pattern math.
//!
//! Patterns are evaluated in the array's local spherical frame: the array lies in the
//! y-z plane, `theta` is measured from +z (90° is the horizon) and `phi` from the
//! boresight +x axis.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::units::{db_to_power, deg2rad, rad2deg, wrap_deg};
use crate::{Error, Result, C64};

/// 3D element pattern parameters, all in dB or degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElementPatternParams {
    pub gain_max_dbi: f64,
    pub phi_3db_deg: f64,
    pub theta_3db_deg: f64,
    pub front_back_ratio_db: f64,
    pub sla_v_db: f64,
}

impl Default for ElementPatternParams {
    fn default() -> Self {
        Self {
            gain_max_dbi: 8.0,
            phi_3db_deg: 65.0,
            theta_3db_deg: 65.0,
            front_back_ratio_db: 30.0,
            sla_v_db: 30.0,
        }
    }
}

impl ElementPatternParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("gain_max_dbi", self.gain_max_dbi)?;
        check_beamwidth("phi_3db_deg", self.phi_3db_deg)?;
        check_beamwidth("theta_3db_deg", self.theta_3db_deg)?;
        check_positive("front_back_ratio_db", self.front_back_ratio_db)?;
        check_positive("sla_v_db", self.sla_v_db)
    }
}

/// Approximate 3D port pattern parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ItuPortPatternParams {
    pub gain_max_dbi: f64,
    pub phi_3db_deg: f64,
    pub theta_3db_deg: f64,
    pub front_back_ratio_db: f64,
}

impl Default for ItuPortPatternParams {
    fn default() -> Self {
        Self {
            gain_max_dbi: 17.0,
            phi_3db_deg: 70.0,
            theta_3db_deg: 15.0,
            front_back_ratio_db: 20.0,
        }
    }
}

impl ItuPortPatternParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("gain_max_dbi", self.gain_max_dbi)?;
        check_beamwidth("phi_3db_deg", self.phi_3db_deg)?;
        check_beamwidth("theta_3db_deg", self.theta_3db_deg)?;
        check_positive("front_back_ratio_db", self.front_back_ratio_db)
    }

    /// Port parameters whose peak gain and vertical beamwidth are matched to a
    /// K-element column of `element` patterns at spacing `d_v`.
    pub fn matched_to_column(element: &ElementPatternParams, k: usize, d_v: f64) -> Result<Self> {
        Ok(Self {
            gain_max_dbi: port_peak_gain_dbi(element.gain_max_dbi, k),
            theta_3db_deg: port_hpbw_deg(k, d_v)?,
            ..Self::default()
        })
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
    }
}

fn check_beamwidth(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < 180.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 180), got {v}")))
    }
}

/// Element radiation model used when building channels and correlations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ElementPattern {
    Directional(ElementPatternParams),
    /// Unit linear gain in every direction.
    Isotropic,
}

impl Default for ElementPattern {
    fn default() -> Self {
        ElementPattern::Directional(ElementPatternParams::default())
    }
}

impl ElementPattern {
    /// Linear power gain at angles in radians.
    #[inline]
    pub fn power_gain(&self, phi: f64, theta: f64) -> f64 {
        match self {
            ElementPattern::Directional(p) => db_to_power(element_pattern_db_rad(p, phi, theta)),
            ElementPattern::Isotropic => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ElementPattern::Directional(p) => p.validate(),
            ElementPattern::Isotropic => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Polarization {
    #[default]
    Single,
    /// Cross-polarized pairs at slants +beta and beta-90°.
    Dual,
}

impl Polarization {
    pub fn count(self) -> usize {
        match self {
            Polarization::Single => 1,
            Polarization::Dual => 2,
        }
    }
}

/// Uniform planar array of N ports, each a vertical column of M elements.
///
/// Element and port indices are zero-based. Element (m, s) of polarization p maps to
/// column `(p*N + s)*M + m` of element-level channel vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    m_per_port: usize,
    n_ports: usize,
    polarization: Polarization,
    slant_deg: f64,
    d_v: f64,
    d_h: f64,
    pattern: ElementPattern,
}

impl ArrayGeometry {
    pub fn new(m_per_port: usize, n_ports: usize, d_v: f64, d_h: f64) -> Result<Self> {
        let g = Self {
            m_per_port,
            n_ports,
            polarization: Polarization::Single,
            slant_deg: 90.0,
            d_v,
            d_h,
            pattern: ElementPattern::default(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_pattern(mut self, pattern: ElementPattern) -> Result<Self> {
        pattern.validate()?;
        self.pattern = pattern;
        Ok(self)
    }

    pub fn with_polarization(mut self, polarization: Polarization, slant_deg: f64) -> Result<Self> {
        if !slant_deg.is_finite() {
            return Err(Error::InvalidParameter("slant must be finite".into()));
        }
        self.polarization = polarization;
        self.slant_deg = slant_deg;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.m_per_port == 0 || self.n_ports == 0 {
            return Err(Error::InvalidParameter("M and N must be >= 1".into()));
        }
        check_positive("d_v", self.d_v)?;
        check_positive("d_h", self.d_h)?;
        self.pattern.validate()
    }

    pub fn m_per_port(&self) -> usize {
        self.m_per_port
    }
    pub fn n_ports(&self) -> usize {
        self.n_ports
    }
    pub fn polarization(&self) -> Polarization {
        self.polarization
    }
    pub fn slant_deg(&self) -> f64 {
        self.slant_deg
    }
    pub fn d_v(&self) -> f64 {
        self.d_v
    }
    pub fn d_h(&self) -> f64 {
        self.d_h
    }
    pub fn pattern(&self) -> &ElementPattern {
        &self.pattern
    }

    /// Total port count N*P.
    pub fn total_ports(&self) -> usize {
        self.n_ports * self.polarization.count()
    }

    /// Total element count N*M*P.
    pub fn total_elements(&self) -> usize {
        self.total_ports() * self.m_per_port
    }

    /// Slant of polarization `p` in degrees.
    pub fn slant_of(&self, p: usize) -> f64 {
        if p == 0 {
            self.slant_deg
        } else {
            self.slant_deg - 90.0
        }
    }

    /// Position of element (m, s) in wavelengths, as (x, y, z).
    pub fn element_position(&self, m: usize, s: usize) -> Result<[f64; 3]> {
        if m >= self.m_per_port || s >= self.n_ports {
            return Err(Error::IndexOutOfRange(format!(
                "element (m={m}, s={s}) outside {}x{} array",
                self.m_per_port, self.n_ports
            )));
        }
        Ok([0.0, s as f64 * self.d_h, m as f64 * self.d_v])
    }

    /// Column index of element (m, s, p) in element-level vectors.
    pub fn element_index(&self, m: usize, s: usize, p: usize) -> usize {
        (p * self.n_ports + s) * self.m_per_port + m
    }
}

/// Element pattern in dB per the 3D model.
pub fn element_pattern_db(params: &ElementPatternParams, phi_deg: f64, theta_deg: f64) -> f64 {
    element_pattern_db_rad(params, deg2rad(wrap_deg(phi_deg)), deg2rad(theta_deg))
}

/// Radian-argument element pattern. `phi` must already lie in (-pi, pi].
#[inline]
pub fn element_pattern_db_rad(params: &ElementPatternParams, phi: f64, theta: f64) -> f64 {
    let a_h = horizontal_attenuation(phi, deg2rad(params.phi_3db_deg), params.front_back_ratio_db);
    let v = (theta - PI / 2.0) / deg2rad(params.theta_3db_deg);
    let a_v = -(12.0 * v * v).min(params.sla_v_db);
    params.gain_max_dbi - (-(a_h + a_v)).min(params.front_back_ratio_db)
}

#[inline]
fn horizontal_attenuation(phi: f64, phi_3db: f64, a_m: f64) -> f64 {
    let u = phi / phi_3db;
    -(12.0 * u * u).min(a_m)
}

/// Approximate port pattern in dB, with the vertical main lobe centred on `theta_tilt_deg`.
pub fn itu_port_pattern_db(
    params: &ItuPortPatternParams,
    phi_deg: f64,
    theta_deg: f64,
    theta_tilt_deg: f64,
) -> f64 {
    itu_port_pattern_db_rad(
        params,
        deg2rad(wrap_deg(phi_deg)),
        deg2rad(theta_deg),
        deg2rad(theta_tilt_deg),
    )
}

#[inline]
pub fn itu_port_pattern_db_rad(params: &ItuPortPatternParams, phi: f64, theta: f64, theta_tilt: f64) -> f64 {
    let a_m = params.front_back_ratio_db;
    let a_h = horizontal_attenuation(phi, deg2rad(params.phi_3db_deg), a_m);
    let v = (theta - theta_tilt) / deg2rad(params.theta_3db_deg);
    let a_v = -(12.0 * v * v).min(a_m);
    params.gain_max_dbi - (-(a_h + a_v)).min(a_m)
}

/// Vertical array factor sum_k w_k exp(+i 2 pi k d_v cos(theta)).
pub fn array_factor(weights: &DVector<C64>, d_v: f64, theta_deg: f64) -> Result<C64> {
    if weights.is_empty() {
        return Err(Error::Empty("array factor weight vector".into()));
    }
    Ok(array_factor_rad(weights.as_slice(), d_v, deg2rad(theta_deg)))
}

#[inline]
pub fn array_factor_rad(weights: &[C64], d_v: f64, theta: f64) -> C64 {
    let step = C64::from_polar(1.0, 2.0 * PI * d_v * theta.cos());
    let mut phase = C64::new(1.0, 0.0);
    let mut acc = C64::new(0.0, 0.0);
    for w in weights {
        acc += w * phase;
        phase *= step;
    }
    acc
}

/// Exact port pattern of one column: element pattern plus 20 log10 |array factor|.
pub fn port_pattern_element_db(
    geometry: &ArrayGeometry,
    weights: &DVector<C64>,
    phi_deg: f64,
    theta_deg: f64,
) -> Result<f64> {
    if weights.len() != geometry.m_per_port() {
        return Err(Error::DimensionMismatch(format!(
            "weights have length {}, geometry has M = {}",
            weights.len(),
            geometry.m_per_port()
        )));
    }
    let phi = deg2rad(wrap_deg(phi_deg));
    let theta = deg2rad(theta_deg);
    let af = array_factor_rad(weights.as_slice(), geometry.d_v(), theta);
    let elem_db = 10.0 * geometry.pattern().power_gain(phi, theta).log10();
    Ok(elem_db + 20.0 * af.norm().log10())
}

/// Analytic half-power beamwidth of a K-element column.
pub fn port_hpbw_deg(k: usize, d_v: f64) -> Result<f64> {
    let aperture = k as f64 * d_v;
    let arg = 1.391 / (PI * aperture);
    if !(arg < 1.0) || k == 0 {
        return Err(Error::SmallAperture { aperture });
    }
    Ok(rad2deg(2.0 * (PI / 2.0 - arg.acos())))
}

/// Peak port gain G_max,E + 20 log10 sqrt(K).
pub fn port_peak_gain_dbi(element_gain_dbi: f64, k: usize) -> f64 {
    element_gain_dbi + 10.0 * (k as f64).log10()
}

/// Splits a linear power pattern value into its two polarization field components.
pub fn field_decompose(a_linear: f64, slant_beta_deg: f64) -> (f64, f64) {
    let amp = a_linear.max(0.0).sqrt();
    let b = deg2rad(slant_beta_deg);
    (amp * b.cos(), amp * b.sin())
}

/// Sampled 1D pattern cut with simple lobe analysis.
#[derive(Debug, Clone)]
pub struct PatternCut {
    pub angles_deg: Vec<f64>,
    pub gains_db: Vec<f64>,
}

impl PatternCut {
    /// Samples `f` on `[lo, hi]` with spacing `step` (degrees).
    pub fn sample(lo: f64, hi: f64, step: f64, mut f: impl FnMut(f64) -> f64) -> Self {
        let n = ((hi - lo) / step).round() as usize;
        let angles_deg: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
        let gains_db = angles_deg.iter().map(|&a| f(a)).collect();
        Self { angles_deg, gains_db }
    }

    pub fn peak(&self) -> (f64, f64) {
        let (i, g) = self
            .gains_db
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc });
        (self.angles_deg[i], g)
    }

    fn peak_index(&self) -> usize {
        let a = self.peak().0;
        self.angles_deg.iter().position(|&x| x == a).unwrap_or(0)
    }

    /// Width between the interpolated crossings `drop_db` below the peak.
    pub fn lobe_width(&self, drop_db: f64) -> Option<f64> {
        let ip = self.peak_index();
        let level = self.gains_db[ip] - drop_db;
        let cross = |range: &mut dyn Iterator<Item = usize>, dir: isize| -> Option<f64> {
            for i in range {
                let j = (i as isize + dir) as usize;
                if self.gains_db[j] < level {
                    let (a0, g0) = (self.angles_deg[i], self.gains_db[i]);
                    let (a1, g1) = (self.angles_deg[j], self.gains_db[j]);
                    return Some(a0 + (level - g0) / (g1 - g0) * (a1 - a0));
                }
            }
            None
        };
        let right = cross(&mut (ip..self.angles_deg.len() - 1), 1)?;
        let left = cross(&mut (1..=ip).rev(), -1)?;
        Some(right - left)
    }

    /// Local maxima other than the global peak, as (angle, gain).
    pub fn sidelobes(&self) -> Vec<(f64, f64)> {
        let ip = self.peak_index();
        let g = &self.gains_db;
        (1..g.len().saturating_sub(1))
            .filter(|&i| i != ip && g[i] > g[i - 1] && g[i] >= g[i + 1])
            .map(|i| (self.angles_deg[i], g[i]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txru::weights_1d;

    const TOL: f64 = 1e-9;

    #[test]
    fn element_pattern_examples() {
        let p = ElementPatternParams::default();
        assert!((element_pattern_db(&p, 0.0, 90.0) - 8.0).abs() < TOL);
        assert!((element_pattern_db(&p, 32.5, 90.0) - 5.0).abs() < TOL);
        assert!((element_pattern_db(&p, 180.0, 90.0) + 22.0).abs() < TOL);
    }

    #[test]
    fn itu_pattern_examples() {
        let p = ItuPortPatternParams::default();
        assert!((itu_port_pattern_db(&p, 0.0, 100.0, 100.0) - 17.0).abs() < TOL);
        assert!((itu_port_pattern_db(&p, 0.0, 107.5, 100.0) - 14.0).abs() < TOL);
        assert!((itu_port_pattern_db(&p, 0.0, 170.0, 80.0) + 3.0).abs() < TOL);
    }

    #[test]
    fn hpbw_and_gain() {
        assert!((port_hpbw_deg(8, 0.8).unwrap() - 7.9341).abs() < 1e-4);
        assert!((port_hpbw_deg(1, 0.5).unwrap() - 124.6).abs() < 0.05);
        assert!(matches!(port_hpbw_deg(1, 0.4), Err(Error::SmallAperture { .. })));
        assert!((port_peak_gain_dbi(8.0, 8) - 17.0309).abs() < 1e-4);
        assert!((port_peak_gain_dbi(0.0, 100) - 20.0).abs() < TOL);
        assert!((port_peak_gain_dbi(8.0, 1) - 8.0).abs() < TOL);
    }

    #[test]
    fn array_factor_examples() {
        let w = weights_1d(8, 0.8, 100.0).unwrap();
        let af = array_factor(w.weights(), 0.8, 100.0).unwrap();
        assert!((af.re - 8f64.sqrt()).abs() < 1e-12 && af.im.abs() < 1e-12);
        let one = DVector::from_element(1, C64::new(1.0, 0.0));
        assert!((array_factor(&one, 0.8, 33.0).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(array_factor(&DVector::zeros(0), 0.8, 90.0).is_err());
        let w90 = weights_1d(8, 0.8, 90.0).unwrap();
        let edge = array_factor(w90.weights(), 0.8, 90.0 + 7.9341 / 2.0).unwrap();
        let drop = 10.0 * (8.0 / edge.norm_sqr()).log10();
        assert!((drop - 3.0).abs() < 0.1, "drop {drop}");
    }

    #[test]
    fn port_pattern_examples() {
        let g = ArrayGeometry::new(8, 1, 0.8, 0.5).unwrap();
        let w = weights_1d(8, 0.8, 90.0).unwrap();
        let peak = port_pattern_element_db(&g, w.weights(), 0.0, 90.0).unwrap();
        assert!((peak - 17.0309).abs() < 1e-3);
        let g1 = ArrayGeometry::new(1, 1, 0.8, 0.5).unwrap();
        let one = DVector::from_element(1, C64::new(1.0, 0.0));
        assert!((port_pattern_element_db(&g1, &one, 0.0, 90.0).unwrap() - 8.0).abs() < TOL);
        assert!(port_pattern_element_db(&g, &one, 0.0, 90.0).is_err());
        let cut = PatternCut::sample(60.0, 120.0, 0.01, |t| {
            port_pattern_element_db(&g, w.weights(), 0.0, t).unwrap()
        });
        let width = cut.lobe_width(3.0).unwrap();
        assert!((width - 7.93).abs() < 0.1, "width {width}");
    }

    #[test]
    fn decomposition() {
        let (v, h) = field_decompose(1.0, 90.0);
        assert!(v.abs() < 1e-15 && (h - 1.0).abs() < 1e-15);
        let (v, h) = field_decompose(1.0, 45.0);
        let r = 0.5f64.sqrt();
        assert!((v - r).abs() < 1e-15 && (h - r).abs() < 1e-15);
    }

    #[test]
    fn geometry_positions() {
        let g = ArrayGeometry::new(4, 3, 0.8, 0.5).unwrap();
        assert_eq!(g.element_position(2, 1).unwrap(), [0.0, 0.5, 1.6]);
        assert!(g.element_position(4, 0).is_err());
        assert!(ArrayGeometry::new(0, 1, 0.8, 0.5).is_err());
        assert!(ArrayGeometry::new(1, 1, 0.0, 0.5).is_err());
        assert_eq!(g.element_index(1, 2, 0), 9);
    }
}
