//! MRT, ZF and RZF precoders.
//!
//! Multi-user channel matrices hold one user per row: row k is h_k^H, so the received
//! amplitude of stream j at user k is (H G)[k, j].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Statistical normalization of conjugate beamforming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MrtScaling {
    /// One scale for all users: G = xi H^H.
    Common,
    /// Column k scaled by 1 / sqrt(tr R_k): every beam has unit average power.
    #[default]
    PerUser,
}

/// N x K precoder, one column per user.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    pub g: DMatrix<C64>,
}

impl PrecodingMatrix {
    pub fn n_ports(&self) -> usize {
        self.g.nrows()
    }
    pub fn n_users(&self) -> usize {
        self.g.ncols()
    }
}

/// Per-user powers and their total budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub budget: f64,
}

impl PowerAllocation {
    pub fn equal(k: usize, budget: f64) -> Result<Self> {
        if k == 0 || !(budget >= 0.0) {
            return Err(Error::InvalidParameter("equal allocation needs K >= 1 and budget >= 0".into()));
        }
        Ok(Self { powers: vec![budget / k as f64; k], budget })
    }

    /// Radiated power sum_k p_k ||g_k||^2 for a given precoder.
    pub fn radiated(&self, g: &PrecodingMatrix) -> Result<f64> {
        if g.n_users() != self.powers.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} powers for {} precoder columns",
                self.powers.len(),
                g.n_users()
            )));
        }
        Ok(self.powers.iter().enumerate().map(|(k, p)| p * g.g.column(k).norm_squared()).sum())
    }

    pub fn satisfies(&self, g: &PrecodingMatrix) -> Result<bool> {
        Ok(self.radiated(g)? <= self.budget * (1.0 + 1e-9))
    }
}

/// Single-user maximum ratio transmission sqrt(P) h / ||h||.
pub fn mrt(h: &DVector<C64>, p_tx: f64) -> Result<DVector<C64>> {
    let n = h.norm();
    if !(n > 0.0) {
        return Err(Error::ZeroChannel);
    }
    Ok(h * C64::new(p_tx.sqrt() / n, 0.0))
}

/// Conjugate beamforming with a common scale: G = xi H^H, xi^2 = K / sum_k tr R_k, so that
/// equal powers P/K meet the average budget P.
pub fn mrt_statistical(h_rows: &DMatrix<C64>, covariance_traces: &[f64]) -> Result<PrecodingMatrix> {
    if covariance_traces.len() != h_rows.nrows() {
        return Err(Error::DimensionMismatch("one covariance trace per user required".into()));
    }
    let total: f64 = covariance_traces.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroChannel);
    }
    let xi = (h_rows.nrows() as f64 / total).sqrt();
    Ok(PrecodingMatrix { g: h_rows.adjoint() * C64::new(xi, 0.0) })
}

/// Conjugate beamforming with unit average power per beam: g_k = h_k / sqrt(tr R_k).
pub fn mrt_per_user(h_rows: &DMatrix<C64>, covariance_traces: &[f64]) -> Result<PrecodingMatrix> {
    if covariance_traces.len() != h_rows.nrows() {
        return Err(Error::DimensionMismatch("one covariance trace per user required".into()));
    }
    let mut g = h_rows.adjoint();
    for (mut c, &t) in g.column_iter_mut().zip(covariance_traces) {
        if !(t > 0.0) {
            return Err(Error::ZeroChannel);
        }
        c /= C64::new(t.sqrt(), 0.0);
    }
    Ok(PrecodingMatrix { g })
}

/// Statistical MRT under the given scaling.
pub fn mrt_scaled(h_rows: &DMatrix<C64>, covariance_traces: &[f64], scaling: MrtScaling) -> Result<PrecodingMatrix> {
    match scaling {
        MrtScaling::Common => mrt_statistical(h_rows, covariance_traces),
        MrtScaling::PerUser => mrt_per_user(h_rows, covariance_traces),
    }
}

fn unit_columns(mut g: DMatrix<C64>) -> Result<PrecodingMatrix> {
    for mut c in g.column_iter_mut() {
        let n = c.norm();
        if !(n > 0.0) {
            return Err(Error::Singular("precoder column vanished".into()));
        }
        c /= C64::new(n, 0.0);
    }
    Ok(PrecodingMatrix { g })
}

/// Zero-forcing directions H^H (H H^H)^{-1} with unit-norm columns.
pub fn zf(h_rows: &DMatrix<C64>) -> Result<PrecodingMatrix> {
    let (k, n) = h_rows.shape();
    if k == 0 || k > n {
        return Err(Error::DimensionMismatch(format!("zero-forcing needs 1 <= K <= N, got K={k}, N={n}")));
    }
    let gram = h_rows * h_rows.adjoint();
    let sv = gram.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if !(min > 1e-12 * max) {
        return Err(Error::Singular(format!("channel Gram matrix condition {:.3e}", max / min)));
    }
    let inv = gram.try_inverse().ok_or_else(|| Error::Singular("channel Gram matrix".into()))?;
    unit_columns(h_rows.adjoint() * inv)
}

/// Regularized zero-forcing directions H^H (H H^H + delta I)^{-1} with unit-norm columns.
pub fn rzf(h_rows: &DMatrix<C64>, delta: f64) -> Result<PrecodingMatrix> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("RZF regularizer must be > 0, got {delta}")));
    }
    let k = h_rows.nrows();
    let reg = h_rows * h_rows.adjoint() + DMatrix::<C64>::identity(k, k) * C64::new(delta, 0.0);
    let inv = reg.try_inverse().ok_or_else(|| Error::Singular("regularized Gram matrix".into()))?;
    unit_columns(h_rows.adjoint() * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rows(k: usize, n: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(k, n, |_, _| complex_normal(&mut rng))
    }

    #[test]
    fn mrt_examples() {
        let mut e1 = DVector::zeros(3);
        e1[0] = C64::new(1.0, 0.0);
        let g = mrt(&e1, 4.0).unwrap();
        assert!((g[0] - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(matches!(mrt(&DVector::zeros(2), 1.0), Err(Error::ZeroChannel)));
        let h = random_rows(1, 5, 1).row(0).transpose();
        assert!((mrt(&h, 3.0).unwrap().norm_squared() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zf_nulls_interference() {
        for seed in 0..100 {
            let h = random_rows(4, 8, seed);
            let g = zf(&h).unwrap();
            let x = &h * &g.g;
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert!(x[(i, j)].norm() < 1e-10, "seed {seed}");
                    }
                }
            }
        }
    }

    #[test]
    fn zf_equals_mrt_on_orthogonal_rows() {
        let mut h = DMatrix::<C64>::zeros(2, 3);
        h[(0, 0)] = C64::new(0.0, 2.0);
        h[(1, 2)] = C64::new(3.0, 0.0);
        let g = zf(&h).unwrap();
        for k in 0..2 {
            let m = h.row(k).adjoint();
            let m = &m / C64::new(m.norm(), 0.0);
            assert!((g.g.column(k) - m).norm() < 1e-12);
        }
        assert!(zf(&random_rows(3, 2, 0)).is_err());
    }

    #[test]
    fn rzf_tends_to_zf() {
        let h = random_rows(4, 8, 42);
        let a = zf(&h).unwrap();
        let b = rzf(&h, 1e-9).unwrap();
        assert!((a.g - b.g).norm() < 1e-6);
        assert!(rzf(&h, 0.0).is_err());
    }

    #[test]
    fn statistical_mrt_meets_average_budget() {
        let h = random_rows(3, 4, 9);
        let g = mrt_statistical(&h, &[4.0, 4.0, 4.0]).unwrap();
        let p = PowerAllocation::equal(3, 6.0).unwrap();
        // Each ||h_k||^2 has mean 4, so the expected radiated power equals the budget.
        let scale = 3.0 / 12.0;
        let expected: f64 = (0..3).map(|k| 2.0 * scale * h.row(k).norm_squared()).sum();
        assert!((p.radiated(&g).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn per_user_mrt_columns_have_unit_average_power() {
        let h = random_rows(2, 3, 10);
        let g = mrt_per_user(&h, &[4.0, 9.0]).unwrap();
        assert!((g.g.column(0).norm_squared() - h.row(0).norm_squared() / 4.0).abs() < 1e-12);
        assert!((g.g.column(1).norm_squared() - h.row(1).norm_squared() / 9.0).abs() < 1e-12);
        assert!(mrt_per_user(&h, &[4.0, 0.0]).is_err());
        let c = mrt_scaled(&h, &[4.0, 9.0], MrtScaling::Common).unwrap();
        assert_eq!(c, mrt_statistical(&h, &[4.0, 9.0]).unwrap());
    }
}
