//! Primal-dual interior-point solver for the small max-min semidefinite programs
//!
//! ```text
//! maximize  t
//! s.t.      <C_k, W> >= t          for every objective k
//!           <L_j, W> <= cap_j      for every cap j
//!           tr W = 1,  W Hermitian PSD.
//! ```
//!
//! Internally the program is put in standard form over the cone
//! H_+^M x R_+^(1+K+J), with variables (W, t', s_k, r_j), where t = t' - gamma and
//! gamma shifts every C_k to be positive definite so that t' >= 0 is never active.
//! Steps use the HKM direction with Mehrotra predictor-corrector.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::linalg::{hermitian_eigen, hermitize};
use crate::{Error, Result, C64};

/// Residual accepted when the iteration stalls above the requested tolerance.
const STALL_ACCEPT: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct MaxMinSdp {
    objectives: Vec<DMatrix<C64>>,
    caps: Vec<(DMatrix<C64>, f64)>,
    tol: f64,
    max_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct MaxMinSolution {
    /// Optimal W (Hermitian PSD, unit trace).
    pub w: DMatrix<C64>,
    /// min_k <C_k, W> at the returned W.
    pub value: f64,
    /// Dual objective (upper bound on the optimum up to solver tolerance).
    pub dual_bound: f64,
    pub iterations: usize,
}

struct Constraint {
    herm: DMatrix<C64>,
    /// Sparse coefficients on the diagonal block.
    diag: Vec<(usize, f64)>,
    rhs: f64,
}

impl MaxMinSdp {
    pub fn new(objectives: Vec<DMatrix<C64>>) -> Result<Self> {
        let Some(first) = objectives.first() else {
            return Err(Error::Empty("max-min objectives".into()));
        };
        let m = first.nrows();
        if objectives.iter().any(|c| c.nrows() != m || c.ncols() != m) {
            return Err(Error::DimensionMismatch("objective matrices of different sizes".into()));
        }
        // Duplicate objectives make the optimum degenerate; keep one of each.
        let mut unique: Vec<DMatrix<C64>> = Vec::with_capacity(objectives.len());
        for c in objectives.iter().map(hermitize) {
            let tol = 1e-12 * (1.0 + c.norm());
            if !unique.iter().any(|u| (u - &c).norm() <= tol) {
                unique.push(c);
            }
        }
        Ok(Self { objectives: unique, caps: Vec::new(), tol: 1e-9, max_iterations: 200 })
    }

    /// Adds <L, W> <= cap.
    pub fn with_cap(mut self, l: DMatrix<C64>, cap: f64) -> Result<Self> {
        let m = self.objectives[0].nrows();
        if l.nrows() != m || l.ncols() != m {
            return Err(Error::DimensionMismatch("cap matrix size".into()));
        }
        if !cap.is_finite() {
            return Err(Error::InvalidParameter(format!("cap must be finite, got {cap}")));
        }
        self.caps.push((hermitize(&l), cap));
        Ok(self)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.objectives[0].nrows()
    }

    pub fn solve(&self) -> Result<MaxMinSolution> {
        let m = self.dim();
        let k = self.objectives.len();
        let j = self.caps.len();
        let nd = 1 + k + j;

        // Scale so that the objective data has unit magnitude.
        let scale = self
            .objectives
            .iter()
            .map(|c| hermitian_eigen(c).0.iter().fold(0.0f64, |a, v| a.max(v.abs())))
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let objs: Vec<DMatrix<C64>> = self.objectives.iter().map(|c| c / C64::new(scale, 0.0)).collect();
        let gamma = 1.0 - objs.iter().map(|c| *hermitian_eigen(c).0.last().unwrap()).fold(f64::INFINITY, f64::min);
        let eye = DMatrix::<C64>::identity(m, m);

        let mut cons: Vec<Constraint> = Vec::with_capacity(k + 1 + j);
        for (i, c) in objs.iter().enumerate() {
            cons.push(Constraint { herm: c + &eye * C64::new(gamma, 0.0), diag: vec![(0, -1.0), (1 + i, -1.0)], rhs: 0.0 });
        }
        cons.push(Constraint { herm: eye.clone(), diag: Vec::new(), rhs: 1.0 });
        for (i, (l, cap)) in self.caps.iter().enumerate() {
            let ls = hermitian_eigen(l).0.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
            cons.push(Constraint { herm: l / C64::new(ls, 0.0), diag: vec![(1 + k + i, 1.0)], rhs: cap / ls });
        }
        let nc = cons.len();
        let mut c_diag = vec![0.0; nd];
        c_diag[0] = -1.0;
        let b = DVector::from_iterator(nc, cons.iter().map(|c| c.rhs));

        let a_op = |xh: &DMatrix<C64>, xd: &[f64]| -> DVector<f64> {
            DVector::from_iterator(
                nc,
                cons.iter().map(|c| re_inner(&c.herm, xh) + c.diag.iter().map(|&(l, a)| a * xd[l]).sum::<f64>()),
            )
        };
        let a_adj = |y: &DVector<f64>| -> (DMatrix<C64>, Vec<f64>) {
            let mut h = DMatrix::<C64>::zeros(m, m);
            let mut d = vec![0.0; nd];
            for (c, &yi) in cons.iter().zip(y.iter()) {
                h += &c.herm * C64::new(yi, 0.0);
                for &(l, a) in &c.diag {
                    d[l] += a * yi;
                }
            }
            (h, d)
        };

        let n_cone = (m + nd) as f64;
        let mut xh = &eye * C64::new(1.0 / m as f64, 0.0);
        let mut xd = vec![1.0; nd];
        let z0 = 1.0 + gamma;
        let mut zh = &eye * C64::new(z0, 0.0);
        let mut zd = vec![z0; nd];
        let mut y = DVector::<f64>::zeros(nc);
        let b_norm = 1.0 + b.norm();
        let mut best = (f64::INFINITY, xh.clone(), 0.0, 0usize);

        for iter in 0..self.max_iterations {
            let ax = a_op(&xh, &xd);
            let rp = &b - &ax;
            let (aty_h, aty_d) = a_adj(&y);
            let rd_h = -&aty_h - &zh;
            let rd_d: Vec<f64> = (0..nd).map(|l| c_diag[l] - aty_d[l] - zd[l]).collect();
            let mu = (re_inner(&xh, &zh) + dot(&xd, &zd)) / n_cone;
            let primal = -xd[0];
            let dual = b.dot(&y);
            let rel_gap = (primal - dual).abs() / (1.0 + primal.abs() + dual.abs());
            let pinf = rp.norm() / b_norm;
            let dinf = (rd_h.norm() + norm(&rd_d)) / (1.0 + gamma);
            if pinf < self.tol && dinf < self.tol && rel_gap < self.tol {
                return Ok(self.finish(xh, &objs, scale, -dual - gamma, iter));
            }
            // Degenerate optima can stall just short of the target accuracy; the most
            // accurate iterate is kept as a fallback.
            let score = pinf.max(dinf).max(rel_gap);
            if score < best.0 {
                best = (score, xh.clone(), -dual - gamma, iter);
            } else if best.0 < STALL_ACCEPT && iter > best.3 + 10 {
                break;
            }
            let near_optimal = best.0 < STALL_ACCEPT;

            let Some(zinv) = zh.clone().try_inverse().map(|z| hermitize(&z)) else {
                if near_optimal {
                    return Ok(self.finish(best.1, &objs, scale, best.2, iter));
                }
                return Err(Error::SolverFailure(format!("dual slack singular (pinf {pinf:.1e}, dinf {dinf:.1e}, gap {rel_gap:.1e})")));
            };
            let zinv_d: Vec<f64> = zd.iter().map(|z| 1.0 / z).collect();
            // Schur complement M_ab = Re tr(A_a X A_b Z^-1) + sum_l a_al a_bl x_l / z_l.
            let p: Vec<DMatrix<C64>> = cons.iter().map(|c| &xh * &c.herm * &zinv).collect();
            let mut schur = DMatrix::<f64>::zeros(nc, nc);
            for a in 0..nc {
                for bb in a..nc {
                    let mut v = re_trace_prod(&cons[a].herm, &p[bb]);
                    for &(la, ca) in &cons[a].diag {
                        for &(lb, cb) in &cons[bb].diag {
                            if la == lb {
                                v += ca * cb * xd[la] * zinv_d[la];
                            }
                        }
                    }
                    schur[(a, bb)] = v;
                    schur[(bb, a)] = v;
                }
            }
            let chol = match factor_schur(schur) {
                Some(c) => c,
                None if near_optimal => return Ok(self.finish(best.1, &objs, scale, best.2, iter)),
                None => {
                    return Err(Error::SolverFailure(format!(
                        "Schur complement not positive definite at iteration {iter} (pinf {pinf:.1e}, dinf {dinf:.1e}, gap {rel_gap:.1e})"
                    )))
                }
            };

            let xrdz = &xh * &rd_h * &zinv;
            let solve_dir = |sigma_mu: f64, corr_h: Option<&DMatrix<C64>>, corr_d: Option<&[f64]>| {
                // G = sigma mu Z^-1 - X - corr Z^-1
                let mut g_h = &zinv * C64::new(sigma_mu, 0.0) - &xh;
                if let Some(cr) = corr_h {
                    g_h -= cr * &zinv;
                }
                let g_d: Vec<f64> = (0..nd)
                    .map(|l| (sigma_mu - corr_d.map_or(0.0, |c| c[l])) * zinv_d[l] - xd[l])
                    .collect();
                let xrdz_d: Vec<f64> = (0..nd).map(|l| xd[l] * rd_d[l] * zinv_d[l]).collect();
                let rhs = &rp - a_op(&g_h, &g_d) + a_op(&xrdz, &xrdz_d);
                let dy = chol.solve(&rhs);
                let (h, d) = a_adj(&dy);
                let dz_h = &rd_h - h;
                let dz_d: Vec<f64> = (0..nd).map(|l| rd_d[l] - d[l]).collect();
                let dx_h = hermitize(&(&g_h - &xh * &dz_h * &zinv));
                let dx_d: Vec<f64> = (0..nd).map(|l| g_d[l] - xd[l] * dz_d[l] * zinv_d[l]).collect();
                (dx_h, dx_d, dy, dz_h, dz_d)
            };

            let (ax_h, ax_d, _, az_h, az_d) = solve_dir(0.0, None, None);
            let (ap, ad) = match (step_length(&xh, &xd, &ax_h, &ax_d), step_length(&zh, &zd, &az_h, &az_d)) {
                (Ok(ap), Ok(ad)) => (ap, ad),
                _ if near_optimal => return Ok(self.finish(best.1, &objs, scale, best.2, iter)),
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let mu_aff = (re_inner(&(&xh + &ax_h * C64::new(ap, 0.0)), &(&zh + &az_h * C64::new(ad, 0.0)))
                + (0..nd).map(|l| (xd[l] + ap * ax_d[l]) * (zd[l] + ad * az_d[l])).sum::<f64>())
                / n_cone;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
            let corr_h = &ax_h * &az_h;
            let corr_d: Vec<f64> = (0..nd).map(|l| ax_d[l] * az_d[l]).collect();
            let (dx_h, dx_d, dy, dz_h, dz_d) = solve_dir(sigma * mu, Some(&corr_h), Some(&corr_d));
            let (ap, ad) = match (step_length(&xh, &xd, &dx_h, &dx_d), step_length(&zh, &zd, &dz_h, &dz_d)) {
                (Ok(ap), Ok(ad)) => ((0.98 * ap).min(1.0), (0.98 * ad).min(1.0)),
                _ if near_optimal => return Ok(self.finish(best.1, &objs, scale, best.2, iter)),
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            xh = hermitize(&(&xh + dx_h * C64::new(ap, 0.0)));
            zh = hermitize(&(&zh + dz_h * C64::new(ad, 0.0)));
            for l in 0..nd {
                xd[l] += ap * dx_d[l];
                zd[l] += ad * dz_d[l];
            }
            y += dy * ad;
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::SolverFailure("non-finite iterate".into()));
            }
        }
        if best.0 < STALL_ACCEPT {
            return Ok(self.finish(best.1, &objs, scale, best.2, self.max_iterations));
        }
        Err(Error::SolverFailure(format!("no convergence in {} iterations (residual {:.1e})", self.max_iterations, best.0)))
    }

    fn finish(&self, xh: DMatrix<C64>, objs: &[DMatrix<C64>], scale: f64, dual_t: f64, iterations: usize) -> MaxMinSolution {
        // Project onto the PSD cone and renormalize the trace.
        let (vals, vecs) = hermitian_eigen(&xh);
        let m = xh.nrows();
        let scaled = DMatrix::from_fn(m, m, |i, j| vecs[(i, j)] * vals[j].max(0.0));
        let mut w = hermitize(&(scaled * vecs.adjoint()));
        let tr: f64 = w.diagonal().iter().map(|z| z.re).sum();
        w /= C64::new(tr, 0.0);
        let value = objs.iter().map(|c| re_inner(c, &w)).fold(f64::INFINITY, f64::min) * scale;
        MaxMinSolution { w, value, dual_bound: dual_t * scale, iterations }
    }
}

/// Cholesky with a growing diagonal ridge for nearly singular systems.
fn factor_schur(schur: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(schur.clone()) {
        return Some(c);
    }
    let d = schur.diagonal().amax().max(1e-300);
    let mut ridge = 1e-14 * d;
    while ridge <= 1e-8 * d {
        let mut s = schur.clone();
        for i in 0..s.nrows() {
            s[(i, i)] += ridge;
        }
        if let Some(c) = Cholesky::new(s) {
            return Some(c);
        }
        ridge *= 100.0;
    }
    None
}

/// Re tr(A B) for Hermitian A (so equal to Re <A, B>).
fn re_inner(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Re tr(A P) for general P.
fn re_trace_prod(a: &DMatrix<C64>, p: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a[(i, j)] * p[(j, i)]).re;
        }
    }
    s
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest alpha (capped at 1/0.98 headroom) keeping X + alpha dX in the cone.
fn step_length(xh: &DMatrix<C64>, xd: &[f64], dh: &DMatrix<C64>, dd: &[f64]) -> Result<f64> {
    let mut alpha = f64::INFINITY;
    for (x, d) in xd.iter().zip(dd) {
        if *d < 0.0 {
            alpha = alpha.min(-x / d);
        }
    }
    let chol = Cholesky::new(xh.clone()).ok_or_else(|| Error::SolverFailure("primal iterate lost definiteness".into()))?;
    let l = chol.l();
    let linv = l.solve_lower_triangular(&DMatrix::identity(xh.nrows(), xh.nrows())).ok_or_else(|| Error::SolverFailure("triangular solve".into()))?;
    let s = hermitize(&(&linv * dh * linv.adjoint()));
    let min_eig = *hermitian_eigen(&s).0.last().unwrap();
    if min_eig < 0.0 {
        alpha = alpha.min(-1.0 / min_eig);
    }
    Ok(alpha.min(1.0 / 0.98))
}
