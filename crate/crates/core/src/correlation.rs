//! Spatial correlation functions and covariance assembly.
//!
//! Index convention: for element-level covariances, row `s'*M + m'` and column
//! `s*M + m` hold rho((m,s),(m',s')) = E[g^2 exp(i 2pi [d_H (s-s') sin(phi) sin(theta)
//! + d_V (m-m') cos(theta)])]. With ray-traced element channels `h`, this matrix is
//! E[h h^H] transposed. Port-level matrices follow the same rule through W^H R W.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::array::{itu_port_pattern_db_rad, ArrayGeometry, ElementPattern, ItuPortPatternParams, Polarization};
use crate::linalg::{hermitian_asymmetry, hermitian_eigen, hermitize, matrix_scale, read_complex_csv, write_complex_csv, PSD_TOL};
use crate::quadrature::{integrate_adaptive_vec, panel_rule};
use crate::spectra::{AzimuthSpectrum, ElevationSpectrum};
use crate::txru::VirtualizationMatrix;
use crate::units::{db_to_power, deg2rad, wrap_rad};
use crate::{Error, Result, C64};

/// Raw asymmetry (relative to the largest entry) above which assembly is rejected.
pub const ASSEMBLY_ASYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceLevel {
    Element,
    Port,
}

/// Hermitian positive-semidefinite correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    data: DMatrix<C64>,
    level: CovarianceLevel,
    label: Option<String>,
}

impl CovarianceMatrix {
    /// Validates, Hermitizes and clamps tiny negative eigenvalues to zero.
    pub fn new(data: DMatrix<C64>, level: CovarianceLevel) -> Result<Self> {
        if !data.is_square() || data.is_empty() {
            return Err(Error::DimensionMismatch(format!("covariance is {}x{}", data.nrows(), data.ncols())));
        }
        let scale = matrix_scale(&data);
        let asym = hermitian_asymmetry(&data);
        if asym > ASSEMBLY_ASYMMETRY_TOL * scale {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        let mut h = hermitize(&data);
        let (vals, vecs) = hermitian_eigen(&h);
        let min = vals.last().copied().unwrap_or(0.0);
        if min < -PSD_TOL * scale {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        if min < 0.0 {
            let n = h.nrows();
            let scaled = DMatrix::from_fn(n, n, |i, j| vecs[(i, j)] * vals[j].max(0.0));
            h = hermitize(&(scaled * vecs.adjoint()));
        }
        for i in 0..h.nrows() {
            h[(i, i)] = C64::new(h[(i, i)].re.max(0.0), 0.0);
        }
        Ok(Self { data: h, level, label: None })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn level(&self) -> CovarianceLevel {
        self.level
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.data.diagonal().iter().map(|z| z.re).sum()
    }

    /// Multiplies by a nonnegative scalar (e.g. a large-scale power gain).
    pub fn scaled(&self, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("covariance scale must be >= 0, got {beta}")));
        }
        Ok(Self { data: &self.data * C64::new(beta, 0.0), level: self.level, label: self.label.clone() })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_complex_csv(&self.data, w)
    }

    pub fn read_csv<R: Read>(r: R, level: CovarianceLevel) -> Result<Self> {
        Self::new(read_complex_csv(r)?, level)
    }
}

/// Numerical method for correlation integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScfMethod {
    /// Nested adaptive Gauss-Kronrod with absolute tolerance `tol`.
    Adaptive { tol: f64 },
    /// Fixed panelled Gauss-Legendre rule with nodes refined around density peaks and pattern kinks.
    Grid { order: usize },
    /// Sample mean over `samples` angle draws.
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for ScfMethod {
    fn default() -> Self {
        ScfMethod::Adaptive { tol: 1e-6 }
    }
}

impl ScfMethod {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScfMethod::Adaptive { tol } => tol > 0.0,
            ScfMethod::Grid { order } => order >= 2,
            ScfMethod::MonteCarlo { samples, .. } => samples >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid SCF method {self:?}")))
        }
    }
}

/// Monte-Carlo estimate with its standard error sqrt(E|x - mean|^2 / n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScfEstimate {
    pub value: C64,
    pub std_error: f64,
}

/// Radiated power pattern entering the correlation integrand.
#[derive(Debug, Clone, Copy)]
enum Kernel {
    Element(ElementPattern),
    Itu(ItuPortPatternParams, f64),
}

impl Kernel {
    fn gain(&self, phi: f64, theta: f64) -> f64 {
        match self {
            Kernel::Element(p) => p.power_gain(wrap_rad(phi), theta),
            Kernel::Itu(p, tilt) => db_to_power(itu_port_pattern_db_rad(p, wrap_rad(phi), theta, *tilt)),
        }
    }

    /// Azimuth half-widths |phi| at which the clamped pattern has kinks for this theta.
    fn phi_kinks(&self, theta: f64) -> Vec<f64> {
        let (phi3, theta3, a_m, sla, centre) = match self {
            Kernel::Element(ElementPattern::Directional(p)) => (
                deg2rad(p.phi_3db_deg),
                deg2rad(p.theta_3db_deg),
                p.front_back_ratio_db,
                p.sla_v_db,
                PI / 2.0,
            ),
            Kernel::Element(ElementPattern::Isotropic) => return Vec::new(),
            Kernel::Itu(p, tilt) => (
                deg2rad(p.phi_3db_deg),
                deg2rad(p.theta_3db_deg),
                p.front_back_ratio_db,
                p.front_back_ratio_db,
                *tilt,
            ),
        };
        let v = (theta - centre) / theta3;
        let av = (12.0 * v * v).min(sla);
        let mut out = vec![phi3 * (a_m / 12.0).sqrt()];
        if av < a_m {
            out.push(phi3 * ((a_m - av) / 12.0).sqrt());
        }
        out
    }

    fn theta_kinks(&self) -> Vec<f64> {
        match self {
            Kernel::Element(ElementPattern::Directional(p)) => {
                let d = deg2rad(p.theta_3db_deg) * (p.sla_v_db / 12.0).sqrt();
                vec![PI / 2.0 - d, PI / 2.0, PI / 2.0 + d]
            }
            Kernel::Element(ElementPattern::Isotropic) => Vec::new(),
            Kernel::Itu(p, tilt) => {
                let d = deg2rad(p.theta_3db_deg) * (p.front_back_ratio_db / 12.0).sqrt();
                vec![tilt - d, *tilt, tilt + d]
            }
        }
    }
}

/// Correlation integrand evaluator for lags (ds, dm), ds in 0..n_s and dm in
/// -(n_m-1)..=(n_m-1), stored ds-major.
struct LagProblem<'a> {
    kernel: Kernel,
    az: &'a AzimuthSpectrum,
    el: &'a ElevationSpectrum,
    d_h: f64,
    d_v: f64,
    n_s: usize,
    n_m: usize,
}

impl LagProblem<'_> {
    fn n_dm(&self) -> usize {
        2 * self.n_m - 1
    }

    fn dim(&self) -> usize {
        self.n_s * self.n_dm()
    }

    fn phi_breaks(&self, theta: f64) -> Vec<f64> {
        let (lo, hi) = self.az.support();
        let mut out = vec![self.az.location()];
        for k in self.kernel.phi_kinks(theta) {
            for c in [-1.0, 1.0] {
                for wrap in [-2.0 * PI, 0.0, 2.0 * PI] {
                    let x = c * k + wrap;
                    if x > lo && x < hi {
                        out.push(x);
                    }
                }
            }
        }
        for wrap in [-PI, PI] {
            if wrap > lo && wrap < hi {
                out.push(wrap);
            }
        }
        out
    }

    fn theta_breaks(&self) -> Vec<f64> {
        let mut out = self.kernel.theta_kinks();
        out.push(self.el.location());
        out
    }

    /// Adds w * u^ds into `acc[ds]` for every ds.
    #[inline]
    fn accumulate_h(&self, acc: &mut [C64], w: f64, phi: f64, theta: f64) {
        let u = C64::from_polar(1.0, 2.0 * PI * self.d_h * phi.sin() * theta.sin());
        let mut p = C64::new(w, 0.0);
        for a in acc.iter_mut() {
            *a += p;
            p *= u;
        }
    }

    /// Expands per-ds azimuth integrals at elevation theta into the full lag vector.
    #[inline]
    fn accumulate_v(&self, out: &mut [C64], inner: &[C64], weight: f64, theta: f64) {
        let v = C64::from_polar(1.0, 2.0 * PI * self.d_v * theta.cos());
        let n_dm = self.n_dm();
        let centre = self.n_m - 1;
        let mut pos = vec![C64::new(1.0, 0.0); self.n_m];
        for k in 1..self.n_m {
            pos[k] = pos[k - 1] * v;
        }
        for (ds, x) in inner.iter().enumerate() {
            let xw = x * weight;
            let row = &mut out[ds * n_dm..(ds + 1) * n_dm];
            for k in 0..self.n_m {
                row[centre + k] += xw * pos[k];
                if k > 0 {
                    row[centre - k] += xw * pos[k].conj();
                }
            }
        }
    }

    fn adaptive(&self, tol: f64) -> Result<Vec<C64>> {
        let (plo, phi_hi) = self.az.support();
        let inner_tol = 0.1 * tol;
        let max_panels = 4000;
        let inner = |theta: f64| -> Result<Vec<C64>> {
            integrate_adaptive_vec(
                |phi, out| {
                    out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                    let w = self.az.pdf(phi) * self.kernel.gain(phi, theta);
                    self.accumulate_h(out, w, phi, theta);
                },
                self.n_s,
                plo,
                phi_hi,
                &self.phi_breaks(theta),
                inner_tol,
                max_panels,
            )
        };
        if self.el.is_point_mass() {
            let theta = self.el.location();
            let mut out = vec![C64::new(0.0, 0.0); self.dim()];
            self.accumulate_v(&mut out, &inner(theta)?, 1.0, theta);
            return Ok(out);
        }
        let (tlo, thi) = self.el.support();
        let mut failure = None;
        let res = integrate_adaptive_vec(
            |theta, out| {
                out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                let pdf = self.el.pdf(theta);
                if pdf == 0.0 {
                    return;
                }
                match inner(theta) {
                    Ok(v) => self.accumulate_v(out, &v, pdf, theta),
                    Err(e) => failure = Some(e),
                }
            },
            self.dim(),
            tlo,
            thi,
            &self.theta_breaks(),
            tol,
            max_panels,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        res
    }

    fn theta_rule(&self, order: usize) -> (Vec<f64>, Vec<f64>) {
        if self.el.is_point_mass() {
            return (vec![self.el.location()], vec![1.0]);
        }
        let (lo, hi) = self.el.support();
        let mut edges = vec![lo, hi];
        edges.extend(self.theta_breaks());
        let t0 = self.el.location();
        let scale = match *self.el {
            ElevationSpectrum::Laplacian { spread_deg, .. } => deg2rad(spread_deg),
            _ => (hi - lo) / 8.0,
        };
        for f in [0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.5, 6.0, 9.0, 13.0] {
            edges.push(t0 - f * scale);
            edges.push(t0 + f * scale);
        }
        let step = deg2rad(10.0);
        let mut x = lo;
        while x < hi {
            edges.push(x);
            x += step;
        }
        finish_edges(&mut edges, lo, hi);
        let (nodes, weights) = panel_rule(&edges, order);
        let w = nodes.iter().zip(&weights).map(|(&t, &w)| w * self.el.pdf(t)).collect();
        (nodes, w)
    }

    fn phi_rule(&self, theta: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.az.support();
        let mut edges = vec![lo, hi];
        edges.extend(self.phi_breaks(theta));
        let mu = self.az.location();
        let conc_scale = match *self.az {
            AzimuthSpectrum::VonMises { kappa, .. } if kappa > 1.0 => Some(1.0 / kappa.sqrt()),
            AzimuthSpectrum::WrappedGaussian { sigma_deg, .. } => Some(deg2rad(sigma_deg)),
            _ => None,
        };
        if let Some(sc) = conc_scale {
            for f in [0.5, 1.0, 2.0, 3.0, 4.5, 6.0, 9.0] {
                edges.push(mu - f * sc);
                edges.push(mu + f * sc);
            }
        }
        let step = deg2rad(15.0);
        let mut x = lo;
        while x < hi {
            edges.push(x);
            x += step;
        }
        finish_edges(&mut edges, lo, hi);
        let (nodes, weights) = panel_rule(&edges, order);
        let w = nodes.iter().zip(&weights).map(|(&p, &w)| w * self.az.pdf(p)).collect();
        (nodes, w)
    }

    fn grid(&self, order: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        let mut inner = vec![C64::new(0.0, 0.0); self.n_s];
        let (tn, tw) = self.theta_rule(order);
        for (&theta, &wt) in tn.iter().zip(&tw) {
            if wt == 0.0 {
                continue;
            }
            inner.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            let (pn, pw) = self.phi_rule(theta, order);
            for (&phi, &wp) in pn.iter().zip(&pw) {
                if wp != 0.0 {
                    self.accumulate_h(&mut inner, wp * self.kernel.gain(phi, theta), phi, theta);
                }
            }
            self.accumulate_v(&mut out, &inner, wt, theta);
        }
        out
    }

    fn monte_carlo<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Vec<ScfEstimate> {
        self.monte_carlo_mapped(samples, rng, self.dim(), |one, out| out.copy_from_slice(one))
    }

    /// Sample mean and standard error of a linear map of the per-draw lag vector.
    fn monte_carlo_mapped<R: Rng + ?Sized>(
        &self,
        samples: usize,
        rng: &mut R,
        out_dim: usize,
        map: impl Fn(&[C64], &mut [C64]),
    ) -> Vec<ScfEstimate> {
        let dim = self.dim();
        let mut sum = vec![C64::new(0.0, 0.0); out_dim];
        let mut sum_sq = vec![0.0; out_dim];
        let mut one = vec![C64::new(0.0, 0.0); dim];
        let mut mapped = vec![C64::new(0.0, 0.0); out_dim];
        let mut inner = vec![C64::new(0.0, 0.0); self.n_s];
        for _ in 0..samples {
            let phi = self.az.sample(rng);
            let theta = self.el.sample(rng);
            inner.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            one.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            self.accumulate_h(&mut inner, self.kernel.gain(phi, theta), phi, theta);
            self.accumulate_v(&mut one, &inner, 1.0, theta);
            map(&one, &mut mapped);
            for d in 0..out_dim {
                sum[d] += mapped[d];
                sum_sq[d] += mapped[d].norm_sqr();
            }
        }
        let n = samples as f64;
        sum.iter()
            .zip(&sum_sq)
            .map(|(s, q)| {
                let mean = s / n;
                let var = (q / n - mean.norm_sqr()).max(0.0);
                ScfEstimate { value: mean, std_error: (var / n).sqrt() }
            })
            .collect()
    }

    fn evaluate(&self, method: &ScfMethod) -> Result<Vec<C64>> {
        method.validate()?;
        match *method {
            ScfMethod::Adaptive { tol } => self.adaptive(tol),
            ScfMethod::Grid { order } => Ok(self.grid(order)),
            ScfMethod::MonteCarlo { samples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(self.monte_carlo(samples, &mut rng).into_iter().map(|e| e.value).collect())
            }
        }
    }
}

fn finish_edges(edges: &mut Vec<f64>, lo: f64, hi: f64) {
    edges.retain(|&x| x >= lo && x <= hi);
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
}

/// Element correlations rho(ds, dm) for ds in 0..N, |dm| < M; negative ds follow from
/// rho(-ds, -dm) = conj(rho(ds, dm)).
#[derive(Debug, Clone, PartialEq)]
pub struct ElementLags {
    n_s: usize,
    n_m: usize,
    values: Vec<C64>,
}

impl ElementLags {
    pub fn n_ports(&self) -> usize {
        self.n_s
    }

    pub fn m_per_port(&self) -> usize {
        self.n_m
    }

    /// rho(ds, dm) with ds = s - s', dm = m - m'.
    pub fn get(&self, ds: isize, dm: isize) -> C64 {
        let n_dm = 2 * self.n_m - 1;
        let c = self.n_m as isize - 1;
        if ds >= 0 {
            self.values[ds as usize * n_dm + (c + dm) as usize]
        } else {
            self.values[(-ds) as usize * n_dm + (c - dm) as usize].conj()
        }
    }

    /// M x M block at port lag ds: entry (m', m) = rho(ds, m - m').
    pub fn block(&self, ds: isize) -> DMatrix<C64> {
        DMatrix::from_fn(self.n_m, self.n_m, |mp, m| self.get(ds, m as isize - mp as isize))
    }

    pub fn to_covariance(&self) -> Result<CovarianceMatrix> {
        let (n, m) = (self.n_s, self.n_m);
        let dense = DMatrix::from_fn(n * m, n * m, |r, c| {
            let (sp, mp) = ((r / m) as isize, (r % m) as isize);
            let (s, mm) = ((c / m) as isize, (c % m) as isize);
            self.get(s - sp, mm - mp)
        });
        CovarianceMatrix::new(dense, CovarianceLevel::Element)
    }

    /// Port covariance w^H B(s - s') w with a common per-port weight vector.
    pub fn port_covariance_common(&self, w: &nalgebra::DVector<C64>) -> Result<CovarianceMatrix> {
        if w.len() != self.n_m {
            return Err(Error::DimensionMismatch(format!("weights of length {} for M = {}", w.len(), self.n_m)));
        }
        let n = self.n_s;
        let lag: Vec<C64> = (0..n).map(|ds| w.dotc(&(self.block(ds as isize) * w))).collect();
        let dense = DMatrix::from_fn(n, n, |sp, s| if s >= sp { lag[s - sp] } else { lag[sp - s].conj() });
        CovarianceMatrix::new(dense, CovarianceLevel::Port)
    }
}

fn element_problem<'a>(
    geometry: &ArrayGeometry,
    az: &'a AzimuthSpectrum,
    el: &'a ElevationSpectrum,
) -> Result<LagProblem<'a>> {
    if geometry.polarization() != Polarization::Single {
        return Err(Error::Unsupported("correlation integrals for cross-polarized arrays".into()));
    }
    az.validate()?;
    el.validate()?;
    Ok(LagProblem {
        kernel: Kernel::Element(*geometry.pattern()),
        az,
        el,
        d_h: geometry.d_h(),
        d_v: geometry.d_v(),
        n_s: geometry.n_ports(),
        n_m: geometry.m_per_port(),
    })
}

/// All element correlation lags for `geometry`.
pub fn element_lags(
    geometry: &ArrayGeometry,
    az: &AzimuthSpectrum,
    el: &ElevationSpectrum,
    method: &ScfMethod,
) -> Result<ElementLags> {
    let prob = element_problem(geometry, az, el)?;
    let values = prob.evaluate(method)?;
    Ok(ElementLags { n_s: prob.n_s, n_m: prob.n_m, values })
}

fn check_pair(geometry: &ArrayGeometry, (m, s): (usize, usize)) -> Result<()> {
    geometry.element_position(m, s).map(|_| ())
}

fn single_lag_problem<'a>(
    geometry: &ArrayGeometry,
    az: &'a AzimuthSpectrum,
    el: &'a ElevationSpectrum,
    a: (usize, usize),
    b: (usize, usize),
) -> Result<(LagProblem<'a>, bool, usize, usize)> {
    check_pair(geometry, a)?;
    check_pair(geometry, b)?;
    let ds = a.1 as isize - b.1 as isize;
    let dm = a.0 as isize - b.0 as isize;
    let conj = ds < 0;
    let (ds, dm) = if conj { (-ds, -dm) } else { (ds, dm) };
    let mut prob = element_problem(geometry, az, el)?;
    prob.n_s = ds as usize + 1;
    prob.n_m = dm.unsigned_abs() + 1;
    let idx = ds as usize * prob.n_dm() + (prob.n_m as isize - 1 + dm) as usize;
    Ok((prob, conj, idx, 0))
}

/// rho((m,s),(m',s')) by nested adaptive quadrature. Pairs are zero-based (m, s).
pub fn scf_element_quad(
    geometry: &ArrayGeometry,
    az: &AzimuthSpectrum,
    el: &ElevationSpectrum,
    a: (usize, usize),
    b: (usize, usize),
    tol: f64,
) -> Result<C64> {
    let (prob, conj, idx, _) = single_lag_problem(geometry, az, el, a, b)?;
    let v = prob.evaluate(&ScfMethod::Adaptive { tol })?[idx];
    Ok(if conj { v.conj() } else { v })
}

/// rho((m,s),(m',s')) as a sample mean over `n_samples` angle draws.
pub fn scf_element_mc<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    az: &AzimuthSpectrum,
    el: &ElevationSpectrum,
    a: (usize, usize),
    b: (usize, usize),
    n_samples: usize,
    rng: &mut R,
) -> Result<ScfEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let (prob, conj, idx, _) = single_lag_problem(geometry, az, el, a, b)?;
    let e = prob.monte_carlo(n_samples, rng)[idx];
    Ok(if conj { ScfEstimate { value: e.value.conj(), ..e } } else { e })
}

/// Port correlations w^H B(ds) w, ds in 0..N, under a common weight vector as
/// Monte-Carlo estimates with standard errors.
pub fn port_lags_mc<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    az: &AzimuthSpectrum,
    el: &ElevationSpectrum,
    w: &nalgebra::DVector<C64>,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<ScfEstimate>> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let prob = element_problem(geometry, az, el)?;
    let m = prob.n_m;
    if w.len() != m {
        return Err(Error::DimensionMismatch(format!("weights of length {} for M = {m}", w.len())));
    }
    // coef[c + dm] = sum over m - m' = dm of conj(w_m') w_m.
    let n_dm = prob.n_dm();
    let mut coef = vec![C64::new(0.0, 0.0); n_dm];
    for mp in 0..m {
        for mm in 0..m {
            coef[m - 1 + mm - mp] += w[mp].conj() * w[mm];
        }
    }
    let n_s = prob.n_s;
    Ok(prob.monte_carlo_mapped(n_samples, rng, n_s, |one, out| {
        for (ds, o) in out.iter_mut().enumerate() {
            *o = one[ds * n_dm..(ds + 1) * n_dm].iter().zip(&coef).map(|(x, c)| x * c).sum();
        }
    }))
}

fn itu_problem<'a>(
    itu: &ItuPortPatternParams,
    d_h: f64,
    az: &'a AzimuthSpectrum,
    el: &'a ElevationSpectrum,
    theta_tilt_deg: f64,
    n_s: usize,
) -> Result<LagProblem<'a>> {
    itu.validate()?;
    az.validate()?;
    el.validate()?;
    if !(theta_tilt_deg > 0.0 && theta_tilt_deg < 180.0) {
        return Err(Error::InvalidParameter(format!("tilt must lie in (0, 180), got {theta_tilt_deg}")));
    }
    Ok(LagProblem {
        kernel: Kernel::Itu(*itu, deg2rad(theta_tilt_deg)),
        az,
        el,
        d_h,
        d_v: 0.0,
        n_s,
        n_m: 1,
    })
}

/// Port correlation lags rho_P(ds), ds in 0..n_ports, under the approximate port pattern.
pub fn itu_port_lags(
    itu: &ItuPortPatternParams,
    d_h: f64,
    az: &AzimuthSpectrum,
    el: &ElevationSpectrum,
    theta_tilt_deg: f64,
    n_ports: usize,
    method: &ScfMethod,
) -> Result<Vec<C64>> {
    itu_problem(itu, d_h, az, el, theta_tilt_deg, n_ports)?.evaluate(method)
}

/// Monte-Carlo counterpart of [`itu_port_lags`] with standard errors.
#[allow(clippy::too_many_arguments)]
pub fn itu_port_lags_mc<R: Rng + ?Sized>(
    itu: &ItuPortPatternParams,
    d_h: f64,
    az: &AzimuthSpectrum,
    el: &ElevationSpectrum,
    theta_tilt_deg: f64,
    n_ports: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<ScfEstimate>> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    Ok(itu_problem(itu, d_h, az, el, theta_tilt_deg, n_ports)?.monte_carlo(n_samples, rng))
}

/// rho_P(s, s') for ports s, s' (zero-based). Monte-Carlo methods return the sample mean.
#[allow(clippy::too_many_arguments)]
pub fn scf_port_itu(
    itu: &ItuPortPatternParams,
    d_h: f64,
    az: &AzimuthSpectrum,
    el: &ElevationSpectrum,
    theta_tilt_deg: f64,
    s: usize,
    s_prime: usize,
    method: &ScfMethod,
) -> Result<C64> {
    let ds = s.abs_diff(s_prime);
    let v = itu_port_lags(itu, d_h, az, el, theta_tilt_deg, ds + 1, method)?[ds];
    Ok(if s < s_prime { v.conj() } else { v })
}

/// Port covariance from approximate-pattern lags.
pub fn itu_port_covariance(lags: &[C64]) -> Result<CovarianceMatrix> {
    let n = lags.len();
    let dense = DMatrix::from_fn(n, n, |sp, s| if s >= sp { lags[s - sp] } else { lags[sp - s].conj() });
    CovarianceMatrix::new(dense, CovarianceLevel::Port)
}

/// Port correlation with every ray at the horizon and the port tilted to 90°.
pub fn covariance_2d_restricted(
    itu: &ItuPortPatternParams,
    d_h: f64,
    az: &AzimuthSpectrum,
    s: usize,
    s_prime: usize,
    method: &ScfMethod,
) -> Result<C64> {
    let el = ElevationSpectrum::Fixed { theta_deg: 90.0 };
    scf_port_itu(itu, d_h, az, &el, 90.0, s, s_prime, method)
}

/// Full element-level covariance (N*M square).
pub fn element_covariance(
    geometry: &ArrayGeometry,
    az: &AzimuthSpectrum,
    el: &ElevationSpectrum,
    method: &ScfMethod,
) -> Result<CovarianceMatrix> {
    element_lags(geometry, az, el, method)?.to_covariance()
}

/// Port covariance W^H R W.
pub fn port_covariance(r_element: &CovarianceMatrix, w: &VirtualizationMatrix) -> Result<CovarianceMatrix> {
    let d = w.dense();
    if r_element.dim() != d.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "element covariance is {0}x{0}, virtualization has {1} rows",
            r_element.dim(),
            d.nrows()
        )));
    }
    CovarianceMatrix::new(d.adjoint() * r_element.matrix() * &d, CovarianceLevel::Port)
}
