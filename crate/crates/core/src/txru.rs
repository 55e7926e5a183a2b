//! TXRU virtualization: sub-array weight vectors and the block-diagonal mapping matrix.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::array::ArrayGeometry;
use crate::units::deg2rad;
use crate::{Error, Result, C64};

const NORM_TOL: f64 = 1e-9;

/// Unit-norm downtilt weight vector for one port.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltWeights {
    weights: DVector<C64>,
    theta_tilt_deg: Option<f64>,
}

impl TiltWeights {
    /// Wraps an already unit-norm vector.
    pub fn new(weights: DVector<C64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("tilt weight vector".into()));
        }
        let n = weights.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!("tilt weights must be unit-norm, got norm {n}")));
        }
        Ok(Self { weights, theta_tilt_deg: None })
    }

    /// Scales an arbitrary nonzero vector to unit norm.
    pub fn normalized(weights: DVector<C64>) -> Result<Self> {
        let n = weights.norm();
        if weights.is_empty() || !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize a zero or empty weight vector".into()));
        }
        Ok(Self { weights: weights / C64::new(n, 0.0), theta_tilt_deg: None })
    }

    pub fn with_tilt(mut self, theta_tilt_deg: f64) -> Self {
        self.theta_tilt_deg = Some(theta_tilt_deg);
        self
    }

    pub fn weights(&self) -> &DVector<C64> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn theta_tilt_deg(&self) -> Option<f64> {
        self.theta_tilt_deg
    }
}

fn progressive_phase(k: usize, spacing: f64, sine_or_cos: f64) -> Result<DVector<C64>> {
    if k == 0 {
        return Err(Error::InvalidParameter("weight length must be >= 1".into()));
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter("spacing must be > 0".into()));
    }
    let amp = 1.0 / (k as f64).sqrt();
    Ok(DVector::from_fn(k, |i, _| {
        C64::from_polar(amp, -2.0 * PI * i as f64 * spacing * sine_or_cos)
    }))
}

/// Phase-only vertical weights steering a K-element column to `theta_tilt_deg`.
pub fn weights_1d(k: usize, d_v: f64, theta_tilt_deg: f64) -> Result<TiltWeights> {
    let w = progressive_phase(k, d_v, deg2rad(theta_tilt_deg).cos())?;
    Ok(TiltWeights { weights: w, theta_tilt_deg: Some(theta_tilt_deg) })
}

/// Vertical and horizontal weights for a K x L sub-array.
pub fn weights_2d(
    k: usize,
    l: usize,
    d_v: f64,
    d_h: f64,
    theta_tilt_deg: f64,
    phi_scan_deg: f64,
) -> Result<(TiltWeights, TiltWeights)> {
    let w = weights_1d(k, d_v, theta_tilt_deg)?;
    let v = progressive_phase(l, d_h, deg2rad(phi_scan_deg).sin())?;
    Ok((w, TiltWeights { weights: v, theta_tilt_deg: None }))
}

fn kron(a: &[C64], b: &[C64]) -> DVector<C64> {
    DVector::from_iterator(a.len() * b.len(), a.iter().flat_map(|x| b.iter().map(move |y| x * y)))
}

/// Element signals q = x (kron) w for the 1D sub-array partition.
pub fn map_subarray_1d(txru_signals: &DVector<C64>, w: &TiltWeights) -> Result<DVector<C64>> {
    if txru_signals.is_empty() {
        return Err(Error::DimensionMismatch("empty TXRU signal vector".into()));
    }
    Ok(kron(txru_signals.as_slice(), w.weights.as_slice()))
}

/// Element signals x * (v (kron) w) for one TXRU of the 2D partition.
pub fn map_subarray_2d(x: C64, v: &TiltWeights, w: &TiltWeights) -> DVector<C64> {
    kron(v.weights.as_slice(), w.weights.as_slice()) * x
}

/// Block-diagonal element-by-port mapping matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualizationMatrix {
    blocks: Vec<TiltWeights>,
    m: usize,
}

impl VirtualizationMatrix {
    pub fn blocks(&self) -> &[TiltWeights] {
        &self.blocks
    }

    pub fn n_ports(&self) -> usize {
        self.blocks.len()
    }

    pub fn m_per_port(&self) -> usize {
        self.m
    }

    /// Dense (N*M) x N matrix.
    pub fn dense(&self) -> DMatrix<C64> {
        let n = self.blocks.len();
        let mut out = DMatrix::zeros(n * self.m, n);
        for (s, b) in self.blocks.iter().enumerate() {
            out.view_mut((s * self.m, s), (self.m, 1)).copy_from(b.weights());
        }
        out
    }

    /// Element signals q = W x.
    pub fn apply(&self, x: &DVector<C64>) -> Result<DVector<C64>> {
        if x.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch(format!(
                "signal length {} != port count {}",
                x.len(),
                self.blocks.len()
            )));
        }
        let mut q = DVector::zeros(self.blocks.len() * self.m);
        for (s, b) in self.blocks.iter().enumerate() {
            q.rows_mut(s * self.m, self.m).copy_from(&(b.weights() * x[s]));
        }
        Ok(q)
    }
}

/// Assembles the virtualization matrix from one weight vector per port.
pub fn build_virtualization(geometry: &ArrayGeometry, per_port: &[TiltWeights]) -> Result<VirtualizationMatrix> {
    let n = geometry.total_ports();
    let m = geometry.m_per_port();
    if per_port.len() != n {
        return Err(Error::DimensionMismatch(format!("{} weight vectors for {n} ports", per_port.len())));
    }
    if let Some(bad) = per_port.iter().find(|w| w.len() != m) {
        return Err(Error::DimensionMismatch(format!("weight vector of length {} for M = {m}", bad.len())));
    }
    Ok(VirtualizationMatrix { blocks: per_port.to_vec(), m })
}

/// Virtualization with the same weight vector on every port.
pub fn common_virtualization(geometry: &ArrayGeometry, w: &TiltWeights) -> Result<VirtualizationMatrix> {
    build_virtualization(geometry, &vec![w.clone(); geometry.total_ports()])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn one_dimensional_examples() {
        let r = 0.5f64.sqrt();
        let w = weights_1d(2, 0.5, 90.0).unwrap();
        assert!((w.weights()[0] - c(r, 0.0)).norm() < 1e-15);
        assert!((w.weights()[1] - c(r, 0.0)).norm() < 1e-15);
        let w = weights_1d(2, 0.5, 120.0).unwrap();
        assert!((w.weights()[1] - c(0.0, r)).norm() < 1e-12);
        assert_eq!(w.theta_tilt_deg(), Some(120.0));
    }

    #[test]
    fn two_dimensional_examples() {
        let (w, v) = weights_2d(3, 4, 0.8, 0.5, 95.0, 0.0).unwrap();
        assert!(v.weights().iter().all(|x| (x - c(0.5, 0.0)).norm() < 1e-15));
        assert!((map_subarray_2d(c(1.0, 0.0), &v, &w).norm() - 1.0).abs() < 1e-12);
        let (w, v) = weights_2d(1, 1, 0.8, 0.5, 95.0, 30.0).unwrap();
        assert_eq!(map_subarray_2d(c(1.0, 0.0), &v, &w).len(), 1);
        let (_, v) = weights_2d(1, 2, 0.8, 0.5, 95.0, 0.0).unwrap();
        let w1 = TiltWeights::new(DVector::from_element(1, c(1.0, 0.0))).unwrap();
        let q = map_subarray_2d(c(2.0, 0.0), &v, &w1);
        assert!((q[0] - c(2f64.sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn kronecker_mapping() {
        let w = TiltWeights::new(DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)])).unwrap();
        let q = map_subarray_1d(&DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), &w).unwrap();
        assert_eq!(q.as_slice(), &[c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn virtualization_structure() {
        let g = ArrayGeometry::new(2, 2, 0.8, 0.5).unwrap();
        let w = weights_1d(2, 0.8, 100.0).unwrap();
        let v = common_virtualization(&g, &w).unwrap();
        let d = v.dense();
        assert_eq!(d.shape(), (4, 2));
        assert_eq!(d[(2, 0)], c(0.0, 0.0));
        assert_eq!(d[(0, 1)], c(0.0, 0.0));
        let gram = d.adjoint() * &d;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!(build_virtualization(&g, &[w.clone()]).is_err());
        let x = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 2.0)]);
        assert!((v.apply(&x).unwrap() - &d * &x).norm() < 1e-14);
        assert!((v.apply(&x).unwrap() - map_subarray_1d(&x, &w).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn normalization_checks() {
        assert!(TiltWeights::new(DVector::from_element(2, c(1.0, 0.0))).is_err());
        let t = TiltWeights::normalized(DVector::from_element(4, c(3.0, 0.0))).unwrap();
        assert!((t.weights().norm() - 1.0).abs() < 1e-15);
        assert!(TiltWeights::normalized(DVector::zeros(3)).is_err());
    }
}
