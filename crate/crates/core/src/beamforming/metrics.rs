//! Per-user SINR, SIR, rates and the deterministic SIR surrogate.

use nalgebra::DMatrix;

use super::precoding::{MrtScaling, PowerAllocation, PrecodingMatrix};
use crate::correlation::CovarianceMatrix;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub sinr: Vec<f64>,
    pub sir: Vec<f64>,
    /// log2(1 + SINR), bit/s/Hz.
    pub rate: Vec<f64>,
}

impl LinkMetrics {
    pub fn min_rate(&self) -> f64 {
        self.rate.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn min_sir(&self) -> f64 {
        self.sir.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Link metrics for channel rows `h_rows` (row k = h_k^H) and precoder `g`.
pub fn metrics(h_rows: &DMatrix<C64>, g: &PrecodingMatrix, p: &PowerAllocation, noise_vars: &[f64]) -> Result<LinkMetrics> {
    let k = h_rows.nrows();
    if g.n_ports() != h_rows.ncols() || g.n_users() != k || p.powers.len() != k || noise_vars.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "channel {}x{}, precoder {}x{}, {} powers, {} noise variances",
            k,
            h_rows.ncols(),
            g.n_ports(),
            g.n_users(),
            p.powers.len(),
            noise_vars.len()
        )));
    }
    let x = h_rows * &g.g;
    let mut out = LinkMetrics { sinr: Vec::with_capacity(k), sir: Vec::with_capacity(k), rate: Vec::with_capacity(k) };
    for u in 0..k {
        let signal = p.powers[u] * x[(u, u)].norm_sqr();
        let interference: f64 = (0..k).filter(|&j| j != u).map(|j| p.powers[j] * x[(u, j)].norm_sqr()).sum();
        let sinr = ratio(signal, interference + noise_vars[u]);
        out.sinr.push(sinr);
        out.sir.push(ratio(signal, interference));
        out.rate.push((1.0 + sinr).log2());
    }
    Ok(out)
}

/// Large-dimension SIR surrogate (tr R_k)^2 / sum_{j != k} tr(R_k R_j) of common-scale MRT.
pub fn sir_deterministic(covs: &[CovarianceMatrix]) -> Result<Vec<f64>> {
    sir_deterministic_scaled(covs, MrtScaling::Common)
}

/// Surrogate for either MRT scaling; per-user scaling gives
/// tr R_k / sum_{j != k} tr(R_k R_j) / tr R_j.
pub fn sir_deterministic_scaled(covs: &[CovarianceMatrix], scaling: MrtScaling) -> Result<Vec<f64>> {
    if covs.len() < 2 {
        return Err(Error::InvalidParameter("surrogate SIR needs at least two users".into()));
    }
    let n = covs[0].dim();
    if covs.iter().any(|c| c.dim() != n) {
        return Err(Error::DimensionMismatch("covariances of different sizes".into()));
    }
    let mats: Vec<&DMatrix<C64>> = covs.iter().map(|c| c.matrix()).collect();
    sir_surrogate_raw(&mats, scaling)
}

/// Surrogate on raw Hermitian matrices (no validation beyond zero traces).
pub(crate) fn sir_surrogate_raw(mats: &[&DMatrix<C64>], scaling: MrtScaling) -> Result<Vec<f64>> {
    let traces: Vec<f64> = mats.iter().map(|m| m.diagonal().iter().map(|z| z.re).sum()).collect();
    if let Some(k) = traces.iter().position(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParameter(format!("user {k} has zero-trace covariance")));
    }
    let k = mats.len();
    let mut cross = vec![0.0; k * k];
    for a in 0..k {
        for b in a + 1..k {
            let v = trace_product(mats[a], mats[b]);
            cross[a * k + b] = v;
            cross[b * k + a] = v;
        }
    }
    Ok((0..k)
        .map(|a| {
            match scaling {
                MrtScaling::Common => {
                    let den: f64 = (0..k).filter(|&b| b != a).map(|b| cross[a * k + b]).sum();
                    ratio(traces[a] * traces[a], den.max(0.0))
                }
                MrtScaling::PerUser => {
                    let den: f64 = (0..k).filter(|&b| b != a).map(|b| cross[a * k + b] / traces[b]).sum();
                    ratio(traces[a], den.max(0.0))
                }
            }
        })
        .collect())
}

/// Re tr(A B) for Hermitian A, B.
pub fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::precoding::{mrt, zf};
    use crate::channel::complex_normal;
    use crate::correlation::CovarianceLevel;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eye(n: usize) -> CovarianceMatrix {
        CovarianceMatrix::new(DMatrix::identity(n, n), CovarianceLevel::Port).unwrap()
    }

    #[test]
    fn surrogate_examples() {
        let covs = vec![eye(4), eye(4), eye(4)];
        assert!(sir_deterministic(&covs).unwrap().iter().all(|&s| (s - 2.0).abs() < 1e-12));
        let per = sir_deterministic_scaled(&covs, MrtScaling::PerUser).unwrap();
        assert!(per.iter().all(|&s| (s - 2.0).abs() < 1e-12));
        // Per-user scaling is blind to a user's power level; common scaling is not.
        let two = CovarianceMatrix::new(DMatrix::identity(4, 4) * C64::new(2.0, 0.0), CovarianceLevel::Port).unwrap();
        let per = sir_deterministic_scaled(&[eye(4), two.clone()], MrtScaling::PerUser).unwrap();
        assert!(per.iter().all(|&s| (s - 4.0).abs() < 1e-12));
        let com = sir_deterministic(&[eye(4), two]).unwrap();
        assert!((com[0] - 2.0).abs() < 1e-12 && (com[1] - 8.0).abs() < 1e-12);
        let e = |i: usize| {
            let mut m = DMatrix::zeros(2, 2);
            m[(i, i)] = C64::new(1.0, 0.0);
            CovarianceMatrix::new(m, CovarianceLevel::Port).unwrap()
        };
        assert!(sir_deterministic(&[e(0), e(1)]).unwrap().iter().all(|s| s.is_infinite()));
        assert!(sir_deterministic(&[eye(2)]).is_err());
        let zero = CovarianceMatrix::new(DMatrix::zeros(2, 2), CovarianceLevel::Port).unwrap();
        assert!(sir_deterministic(&[eye(2), zero]).is_err());
    }

    #[test]
    fn single_user_mrt_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = DVector::from_fn(6, |_, _| complex_normal(&mut rng));
        let g = mrt(&h, 1.0).unwrap();
        let m = metrics(&DMatrix::from_row_slice(1, 6, h.adjoint().as_slice()), &PrecodingMatrix { g: DMatrix::from_column_slice(6, 1, g.as_slice()) },
            &PowerAllocation { powers: vec![10.0], budget: 10.0 }, &[0.5]).unwrap();
        assert!((m.sinr[0] - 10.0 / 0.5 * h.norm_squared()).abs() < 1e-9 * m.sinr[0]);
        assert!((m.rate[0] - (1.0 + m.sinr[0]).log2()).abs() < 1e-12);
    }

    #[test]
    fn vectorized_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = DMatrix::from_fn(3, 5, |_, _| complex_normal(&mut rng));
        let g = PrecodingMatrix { g: DMatrix::from_fn(5, 3, |_, _| complex_normal(&mut rng)) };
        let p = PowerAllocation { powers: vec![1.0, 2.0, 0.5], budget: 3.5 };
        let noise = [0.1, 0.2, 0.3];
        let m = metrics(&h, &g, &p, &noise).unwrap();
        for k in 0..3 {
            let amp = |j: usize| {
                let mut s = C64::new(0.0, 0.0);
                for n in 0..5 {
                    s += h[(k, n)] * g.g[(n, j)];
                }
                s.norm_sqr()
            };
            let sig = p.powers[k] * amp(k);
            let int: f64 = (0..3).filter(|&j| j != k).map(|j| p.powers[j] * amp(j)).sum();
            assert!((m.sinr[k] - sig / (int + noise[k])).abs() < 1e-12 * m.sinr[k]);
            assert!((m.sir[k] - sig / int).abs() < 1e-12 * m.sir[k]);
        }
    }

    #[test]
    fn zf_interference_free_and_scale_invariant_sir() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = DMatrix::from_fn(3, 6, |_, _| complex_normal(&mut rng));
        let g = zf(&h).unwrap();
        let p = PowerAllocation::equal(3, 3.0).unwrap();
        let m = metrics(&h, &g, &p, &[1.0; 3]).unwrap();
        assert!(m.sir.iter().all(|s| *s > 1e18));
        let g2 = PrecodingMatrix { g: DMatrix::from_fn(6, 3, |_, _| complex_normal(&mut rng)) };
        let a = metrics(&h, &g2, &p, &[0.0; 3]).unwrap();
        let b = metrics(&(&h * C64::new(1e-4, 0.0)), &g2, &p, &[0.0; 3]).unwrap();
        for k in 0..3 {
            assert!((a.sir[k] - b.sir[k]).abs() < 1e-9 * a.sir[k]);
        }
    }
}
