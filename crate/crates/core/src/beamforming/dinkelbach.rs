//! Dinkelbach iteration for generalized linear-fractional max-min programs over the
//! lifted set {W : W PSD, tr W = 1}, and Gaussian randomization back to a unit vector.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sdp::MaxMinSdp;
use crate::channel::complex_normal;
use crate::linalg::{hermitian_eigen, principal_eigenvector};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DinkelbachOptions {
    /// Stop when |F(lambda)| < tol, with each denominator scaled to <D_k, W_0> = 1.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for DinkelbachOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iterations: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct DinkelbachReport {
    /// Final ratio min_k <N_k, W> / <D_k, W>.
    pub lambda: f64,
    /// Relaxed maximizer.
    pub w: DMatrix<C64>,
    /// F(lambda_t) per iteration.
    pub f_history: Vec<f64>,
    pub lambda_history: Vec<f64>,
    pub converged: bool,
}

impl DinkelbachReport {
    pub fn iterations(&self) -> usize {
        self.f_history.len()
    }
}

fn inner(a: &DMatrix<C64>, w: &DMatrix<C64>) -> f64 {
    a.iter().zip(w.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Ratio objective min_k <N_k, W> / <D_k, W>.
pub fn min_ratio(num: &[DMatrix<C64>], den: &[DMatrix<C64>], w: &DMatrix<C64>) -> f64 {
    num.iter()
        .zip(den)
        .map(|(n, d)| {
            let (a, b) = (inner(n, w), inner(d, w));
            if b > 0.0 {
                a / b
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Maximizes min_k <N_k, W> / <D_k, W> subject to optional caps <L_j, W> <= c_j.
///
/// `w0` must be feasible; it seeds lambda_0.
pub fn dinkelbach(
    num: &[DMatrix<C64>],
    den: &[DMatrix<C64>],
    caps: &[(DMatrix<C64>, f64)],
    w0: &DMatrix<C64>,
    opts: &DinkelbachOptions,
) -> Result<DinkelbachReport> {
    if num.is_empty() || num.len() != den.len() {
        return Err(Error::DimensionMismatch(format!("{} numerators, {} denominators", num.len(), den.len())));
    }
    let mut ns = Vec::with_capacity(num.len());
    let mut ds = Vec::with_capacity(den.len());
    for (n, d) in num.iter().zip(den) {
        let s = inner(d, w0);
        if !(s > 0.0) {
            return Err(Error::InvalidParameter("denominator matrix must be nonzero PSD".into()));
        }
        ns.push(n / C64::new(s, 0.0));
        ds.push(d / C64::new(s, 0.0));
    }
    let mut lambda = min_ratio(&ns, &ds, w0);
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter("initial point gives a zero denominator".into()));
    }
    let mut report = DinkelbachReport {
        lambda,
        w: w0.clone(),
        f_history: Vec::new(),
        lambda_history: vec![lambda],
        converged: false,
    };
    let solve = |objs: Vec<DMatrix<C64>>| -> Result<super::sdp::MaxMinSolution> {
        let mut sdp = MaxMinSdp::new(objs)?.with_tolerance(1e-10);
        for (l, c) in caps {
            sdp = sdp.with_cap(l.clone(), *c)?;
        }
        sdp.solve()
    };
    for _ in 0..opts.max_iterations {
        let lam = C64::new(lambda, 0.0);
        // A solver failure ends the iteration; the incumbent is reported unconverged.
        let Ok(sol) = solve(ns.iter().zip(&ds).map(|(n, d)| n - d * lam).collect()) else {
            break;
        };
        report.f_history.push(sol.value);
        if sol.value.abs() < opts.tol {
            report.converged = true;
            report.lambda = min_ratio(&ns, &ds, &report.w);
            return Ok(report);
        }
        // The step with denominators normalized at the incumbent (Crouzeix-Ferland-Schaible)
        // converges superlinearly; the plain step above certifies F(lambda).
        let scaled =
            solve(ns.iter().zip(&ds).map(|(n, d)| (n - d * lam) / C64::new(inner(d, &report.w), 0.0)).collect());
        let (mut next, mut w_next) = (min_ratio(&ns, &ds, &sol.w), sol.w);
        if let Ok(scaled) = scaled {
            let r = min_ratio(&ns, &ds, &scaled.w);
            if r > next || !next.is_finite() {
                next = r;
                w_next = scaled.w;
            }
        }
        if !next.is_finite() {
            return Err(Error::SolverFailure("relaxed maximizer zeroes a denominator".into()));
        }
        if next <= lambda {
            // Stalled at solver precision.
            break;
        }
        report.w = w_next;
        lambda = next;
        report.lambda = lambda;
        report.lambda_history.push(lambda);
    }
    Ok(report)
}

/// Draws `n` candidates w ~ CN(0, W), plus the principal eigenvector of W, normalizes
/// them and returns the best by `objective`. Candidates with a NaN objective are skipped.
pub fn gaussian_randomization<R: Rng + ?Sized>(
    w: &DMatrix<C64>,
    n: usize,
    rng: &mut R,
    mut objective: impl FnMut(&DVector<C64>) -> f64,
) -> Result<(DVector<C64>, f64)> {
    let m = w.nrows();
    let (vals, vecs) = hermitian_eigen(w);
    let root = DMatrix::from_fn(m, m, |i, j| vecs[(i, j)] * vals[j].max(0.0).sqrt());
    let (_, mut best) = principal_eigenvector(w);
    best /= C64::new(best.norm(), 0.0);
    let mut best_val = objective(&best);
    for _ in 0..n {
        let z = DVector::from_fn(m, |_, _| complex_normal(rng));
        let c = &root * z;
        let norm = c.norm();
        if !(norm > 0.0) {
            continue;
        }
        let c = c / C64::new(norm, 0.0);
        let v = objective(&c);
        if v > best_val || best_val.is_nan() {
            best = c;
            best_val = v;
        }
    }
    if best_val.is_nan() {
        return Err(Error::SolverFailure("randomization produced no valid candidate".into()));
    }
    Ok((best, best_val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_psd(m: usize, rank: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
        let a = DMatrix::from_fn(m, rank, |_, _| complex_normal(rng));
        &a * a.adjoint()
    }

    #[test]
    fn converges_and_f_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 4;
        let num: Vec<_> = (0..3).map(|_| random_psd(m, 2, &mut rng)).collect();
        let den: Vec<_> = (0..3).map(|_| random_psd(m, m, &mut rng)).collect();
        let w0 = DMatrix::identity(m, m) / C64::new(m as f64, 0.0);
        let r = dinkelbach(&num, &den, &[], &w0, &DinkelbachOptions::default()).unwrap();
        assert!(r.converged);
        for w in r.f_history.windows(2) {
            assert!(w[1] < w[0]);
        }
        // lambda is the relaxed optimum: no randomized rank-1 point exceeds it.
        let (_, best) = gaussian_randomization(&r.w, 200, &mut rng, |v| {
            let p = v * v.adjoint();
            min_ratio(&num, &den, &p)
        })
        .unwrap();
        let relaxed = min_ratio(&num, &den, &r.w);
        assert!(best <= relaxed * (1.0 + 1e-5), "rank-one {best} vs relaxed {relaxed}, F {:?}", r.f_history);
    }

    #[test]
    fn randomization_returns_unit_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random_psd(3, 3, &mut rng);
        let (v, _) = gaussian_randomization(&w, 10, &mut rng, |v| v[0].norm()).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }
}
