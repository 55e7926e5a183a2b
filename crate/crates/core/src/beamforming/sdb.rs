//! Statistical downtilt beamforming: common per-port weights maximizing the minimum
//! surrogate SIR.
//!
//! The common-scale surrogate (tr R_k)^2 / sum_{j!=k} tr(R_k R_j) is quadratic over
//! quadratic in the lifted W = w w^H. Each outer step linearizes it at the incumbent W_t:
//!
//! * numerator:   tr(A_k W) tr(A_k W_t), with A_k = sum_s B_k(s, s);
//! * denominator: tr(D_k W), with D_k = sum_{s', s} S_k[s, s'] B_k(s', s) and
//!   S_k = sum_{j!=k} R_j(W_t),
//!
//! The per-user-scale surrogate tr R_k / sum_{j!=k} tr(R_k R_j) / tr R_j linearizes to
//! numerator tr(A_k W) and S_k = sum_{j!=k} R_j(W_t) / tr R_j(W_t).
//!
//! where B_k(s', s) is the (s', s) M x M block of user k's element covariance. The
//! resulting linear-fractional max-min is solved exactly over the relaxation by
//! Dinkelbach's method, a unit vector is recovered by Gaussian randomization on the
//! true surrogate, and the best incumbent is kept.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dinkelbach::{dinkelbach, gaussian_randomization, DinkelbachOptions, DinkelbachReport};
use super::metrics::{sir_surrogate_raw, trace_product};
use super::precoding::MrtScaling;
use super::sdp::MaxMinSdp;
use crate::correlation::CovarianceMatrix;
use crate::linalg::principal_eigenvector;
use crate::txru::TiltWeights;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdbOptions {
    pub randomizations: usize,
    pub dinkelbach: DinkelbachOptions,
    /// Linearization rounds.
    pub outer_iterations: usize,
    pub seed: u64,
    /// Precoder normalization the surrogate models.
    pub scaling: MrtScaling,
    /// Local ascent steps applied to each randomized candidate; 0 disables.
    pub refine_iterations: usize,
}

impl Default for SdbOptions {
    fn default() -> Self {
        Self { randomizations: 200, dinkelbach: DinkelbachOptions::default(), outer_iterations: 10, seed: 0, scaling: MrtScaling::default(), refine_iterations: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct SdbSolution {
    pub weights: TiltWeights,
    /// Minimum surrogate SIR at `weights`; the port-power gain tr R_1 when K = 1.
    pub objective: f64,
    pub per_user: Vec<f64>,
    pub reports: Vec<DinkelbachReport>,
}

/// Per-user element covariance viewed as an N x N grid of M x M blocks.
#[derive(Debug, Clone)]
struct UserBlocks {
    n: usize,
    m: usize,
    /// Block-Toeplitz storage B(ds) for ds in 0..n when available.
    lags: Option<Vec<DMatrix<C64>>>,
    full: Vec<DMatrix<C64>>,
}

impl UserBlocks {
    fn new(r: &CovarianceMatrix, m: usize) -> Result<Self> {
        let dim = r.dim();
        if m == 0 || dim % m != 0 {
            return Err(Error::DimensionMismatch(format!("covariance of size {dim} is not a multiple of M = {m}")));
        }
        let n = dim / m;
        let mat = r.matrix();
        let full: Vec<DMatrix<C64>> =
            (0..n * n).map(|i| mat.view(((i / n) * m, (i % n) * m), (m, m)).into_owned()).collect();
        let tol = 1e-12 * crate::linalg::matrix_scale(mat);
        let toeplitz = (0..n).all(|sp| (sp..n).all(|s| (&full[sp * n + s] - &full[s - sp]).iter().all(|z| z.norm() <= tol)));
        let lags = toeplitz.then(|| (0..n).map(|ds| full[ds].clone()).collect());
        Ok(Self { n, m, lags, full })
    }

    fn block(&self, sp: usize, s: usize) -> &DMatrix<C64> {
        &self.full[sp * self.n + s]
    }

    /// R_BS(w)[s', s] = w^H B(s', s) w.
    fn port_cov(&self, w: &DVector<C64>) -> DMatrix<C64> {
        let n = self.n;
        match &self.lags {
            Some(lags) => {
                let r: Vec<C64> = lags.iter().map(|b| w.dotc(&(b * w))).collect();
                DMatrix::from_fn(n, n, |sp, s| if s >= sp { r[s - sp] } else { r[sp - s].conj() })
            }
            None => DMatrix::from_fn(n, n, |sp, s| w.dotc(&(self.block(sp, s) * w))),
        }
    }

    fn trace_matrix(&self) -> DMatrix<C64> {
        let mut a = DMatrix::zeros(self.m, self.m);
        for s in 0..self.n {
            a += self.block(s, s);
        }
        a
    }

    /// sum_{s', s} S[s, s'] B(s', s) for Hermitian S.
    fn coupled(&self, s_mat: &DMatrix<C64>) -> DMatrix<C64> {
        let mut d = DMatrix::zeros(self.m, self.m);
        match &self.lags {
            Some(lags) => {
                // B(s', s) = L(s - s') above the diagonal and L(s' - s)^H below it.
                for (ds, l) in lags.iter().enumerate() {
                    let upper: C64 = (0..self.n - ds).map(|sp| s_mat[(sp + ds, sp)]).sum();
                    d += l * upper;
                    if ds > 0 {
                        let lower: C64 = (0..self.n - ds).map(|s| s_mat[(s, s + ds)]).sum();
                        d += l.adjoint() * lower;
                    }
                }
            }
            None => {
                for sp in 0..self.n {
                    for s in 0..self.n {
                        d += self.block(sp, s) * s_mat[(s, sp)];
                    }
                }
            }
        }
        crate::linalg::hermitize(&d)
    }
}

fn quad(a: &DMatrix<C64>, w: &DVector<C64>) -> f64 {
    w.dotc(&(a * w)).re
}

fn surrogate(users: &[UserBlocks], w: &DVector<C64>, scaling: MrtScaling, external: &[f64]) -> Result<Vec<f64>> {
    let covs: Vec<DMatrix<C64>> = users.iter().map(|u| u.port_cov(w)).collect();
    let refs: Vec<&DMatrix<C64>> = covs.iter().collect();
    let intra = sir_surrogate_raw(&refs, scaling)?;
    if external.iter().all(|&e| e == 0.0) {
        return Ok(intra);
    }
    // Fold the external term into the denominator: 1/SIR = 1/SIR_intra + E_k * scale / signal.
    let traces: Vec<f64> = covs.iter().map(|c| c.diagonal().iter().map(|z| z.re).sum()).collect();
    let mean_trace = traces.iter().sum::<f64>() / traces.len() as f64;
    Ok(intra
        .iter()
        .zip(&traces)
        .zip(external)
        .map(|((&sir, &t), &e)| {
            let extra = match scaling {
                MrtScaling::Common => e * mean_trace / (t * t),
                MrtScaling::PerUser => e / t,
            };
            1.0 / (1.0 / sir + extra)
        })
        .collect())
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Per-user surrogate values and their gradients d log f_k / d w^*.
fn surrogate_with_gradient(
    users: &[UserBlocks],
    a: &[DMatrix<C64>],
    w: &DVector<C64>,
    scaling: MrtScaling,
    external: &[f64],
) -> (Vec<f64>, Vec<DVector<C64>>) {
    let k = users.len();
    let covs: Vec<DMatrix<C64>> = users.iter().map(|u| u.port_cov(w)).collect();
    let aw: Vec<DVector<C64>> = a.iter().map(|ak| ak * w).collect();
    let t: Vec<f64> = aw.iter().map(|v| w.dotc(v).re).collect();
    let mut cross = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let v = trace_product(&covs[i], &covs[j]);
            cross[i * k + j] = v;
            cross[j * k + i] = v;
        }
    }
    let mean_t = t.iter().sum::<f64>() / k as f64;
    let sum_aw: DVector<C64> = aw.iter().fold(DVector::zeros(w.len()), |acc, v| acc + v);
    let mut f = Vec::with_capacity(k);
    let mut g = Vec::with_capacity(k);
    for i in 0..k {
        // Interferer weights: 1 (common) or 1 / t_j (per user).
        let wt = |j: usize| match scaling {
            MrtScaling::Common => 1.0,
            MrtScaling::PerUser => 1.0 / t[j],
        };
        let mut s_mat = DMatrix::<C64>::zeros(users[i].n, users[i].n);
        let mut gden = DVector::<C64>::zeros(w.len());
        let mut den = 0.0;
        for j in (0..k).filter(|&j| j != i) {
            s_mat += &covs[j] * C64::new(wt(j), 0.0);
            gden += users[j].coupled(&covs[i]) * w * C64::new(wt(j), 0.0);
            den += cross[i * k + j] * wt(j);
            if scaling == MrtScaling::PerUser {
                gden -= &aw[j] * C64::new(cross[i * k + j] * wt(j) * wt(j), 0.0);
            }
        }
        gden += users[i].coupled(&s_mat) * w;
        let (num_log_grad, extra) = match scaling {
            MrtScaling::Common => {
                gden += &sum_aw * C64::new(external[i] / k as f64, 0.0);
                (2.0 / t[i], external[i] * mean_t)
            }
            MrtScaling::PerUser => {
                gden += w * C64::new(external[i], 0.0);
                (1.0 / t[i], external[i] * w.norm_squared())
            }
        };
        den += extra;
        let num = match scaling {
            MrtScaling::Common => t[i] * t[i],
            MrtScaling::PerUser => t[i],
        };
        f.push(if den > 0.0 { num / den } else { f64::INFINITY });
        g.push(&aw[i] * C64::new(num_log_grad, 0.0) - gden / C64::new(den.max(f64::MIN_POSITIVE), 0.0));
    }
    (f, g)
}

/// Local ascent of a soft minimum of log f_k on the unit sphere, keeping the caps.
fn refine(
    users: &[UserBlocks],
    a: &[DMatrix<C64>],
    leaks: &[Leak],
    w0: DVector<C64>,
    v0: f64,
    scaling: MrtScaling,
    external: &[f64],
    iterations: usize,
) -> (DVector<C64>, f64) {
    const SHARPNESS: f64 = 20.0;
    let value = |w: &DVector<C64>| {
        if !feasible(leaks, w) {
            return f64::NEG_INFINITY;
        }
        min_of(&surrogate_with_gradient(users, a, w, scaling, external).0)
    };
    let (mut w, mut v) = (w0, v0);
    if !(v > 0.0) || !v.is_finite() {
        return (w, v);
    }
    let mut step = 0.05;
    for _ in 0..iterations {
        let (f, g) = surrogate_with_gradient(users, a, &w, scaling, external);
        let logs: Vec<f64> = f.iter().map(|x| x.ln()).collect();
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let pi: Vec<f64> = logs.iter().map(|l| (-SHARPNESS * (l - lo)).exp()).collect();
        let z: f64 = pi.iter().sum();
        let mut d: DVector<C64> = g.iter().zip(&pi).fold(DVector::zeros(w.len()), |acc, (gk, p)| acc + gk * C64::new(p / z, 0.0));
        d -= &w * w.dotc(&d);
        let dn = d.norm();
        if !(dn > 1e-14) {
            break;
        }
        d /= C64::new(dn, 0.0);
        let mut accepted = false;
        for _ in 0..30 {
            let c = &w + &d * C64::new(step, 0.0);
            let c = &c / C64::new(c.norm(), 0.0);
            let vc = value(&c);
            if vc > v {
                let gain = (vc - v) / v;
                w = c;
                v = vc;
                step = (step * 2.0).min(0.5);
                accepted = gain > 1e-10;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (w, v)
}

struct Leak {
    a: DMatrix<C64>,
    cap: f64,
}

fn feasible(leaks: &[Leak], w: &DVector<C64>) -> bool {
    leaks.iter().all(|l| quad(&l.a, w) <= l.cap * (1.0 + 1e-9))
}

fn prepare(covs: &[CovarianceMatrix], m: usize) -> Result<Vec<UserBlocks>> {
    let users: Vec<UserBlocks> = covs.iter().map(|r| UserBlocks::new(r, m)).collect::<Result<_>>()?;
    if users.iter().any(|u| u.n != users[0].n) {
        return Err(Error::DimensionMismatch("users have different port counts".into()));
    }
    Ok(users)
}

fn solve_cell(
    users: &[UserBlocks],
    leaks: &[Leak],
    initial: &[TiltWeights],
    external: &[f64],
    opts: &SdbOptions,
    cell: usize,
) -> Result<SdbSolution> {
    let m = users[0].m;
    let zeros = vec![0.0; users.len()];
    let external = if external.is_empty() { &zeros[..] } else { external };
    if external.len() != users.len() || external.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(Error::InvalidParameter("external interference needs one finite value >= 0 per user".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let a: Vec<DMatrix<C64>> = users.iter().map(|u| u.trace_matrix()).collect();
    let cap_list: Vec<(DMatrix<C64>, f64)> = leaks.iter().map(|l| (l.a.clone(), l.cap)).collect();

    // Relaxed feasibility: max_W min_j (1 - <L_j, W> / cap_j) must be >= 0.
    let mut phase1_w = None;
    if !leaks.is_empty() {
        let eye = DMatrix::<C64>::identity(m, m);
        let objs: Vec<DMatrix<C64>> = leaks.iter().map(|l| &eye - &l.a / C64::new(l.cap, 0.0)).collect();
        let sol = MaxMinSdp::new(objs)?.solve()?;
        if sol.value < -1e-9 {
            return Err(Error::InfeasibleCaps { cell, excess: -sol.value });
        }
        phase1_w = Some(sol.w);
    }

    if users.len() == 1 {
        let mut sdp = MaxMinSdp::new(vec![a[0].clone()])?;
        for (l, c) in &cap_list {
            sdp = sdp.with_cap(l.clone(), *c)?;
        }
        let sol = sdp.solve()?;
        let (w, val) = gaussian_randomization(&sol.w, opts.randomizations, &mut rng, |v| {
            if feasible(leaks, v) {
                quad(&a[0], v)
            } else {
                f64::NEG_INFINITY
            }
        })?;
        if !val.is_finite() {
            return Err(Error::SolverFailure("no rank-one point satisfies the leakage caps".into()));
        }
        return Ok(SdbSolution { weights: TiltWeights::normalized(w)?, objective: val, per_user: vec![val], reports: Vec::new() });
    }

    let score = |w: &DVector<C64>| -> f64 {
        if !feasible(leaks, w) {
            return f64::NEG_INFINITY;
        }
        surrogate(users, w, opts.scaling, external).map(|v| min_of(&v)).unwrap_or(f64::NEG_INFINITY)
    };

    let mut candidates: Vec<DVector<C64>> = initial.iter().map(|t| t.weights().clone()).collect();
    let a_sum = a.iter().fold(DMatrix::zeros(m, m), |acc, ak| {
        let tr: f64 = ak.diagonal().iter().map(|z| z.re).sum();
        acc + ak / C64::new(tr.max(f64::MIN_POSITIVE), 0.0)
    });
    candidates.push(principal_eigenvector(&a_sum).1);
    if let Some(w) = &phase1_w {
        candidates.push(principal_eigenvector(w).1);
    }
    let mut best: Option<(DVector<C64>, f64)> = None;
    for c in candidates {
        if c.len() != m {
            return Err(Error::DimensionMismatch(format!("initial weights of length {} for M = {m}", c.len())));
        }
        let c = &c / C64::new(c.norm(), 0.0);
        let v = score(&c);
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((c, v));
        }
    }
    let (w_init, v_init) = best.expect("at least one candidate");
    let polish = |w: DVector<C64>, v: f64| refine(users, &a, leaks, w, v, opts.scaling, external, opts.refine_iterations);
    let (mut w_best, mut v_best) = polish(w_init, v_init);
    let mut reports = Vec::new();
    let mut w_t = w_best.clone();
    for _ in 0..opts.outer_iterations {
        let mut covs: Vec<DMatrix<C64>> = users.iter().map(|u| u.port_cov(&w_t)).collect();
        if opts.scaling == MrtScaling::PerUser {
            for c in &mut covs {
                let tr: f64 = c.diagonal().iter().map(|z| z.re).sum();
                *c /= C64::new(tr.max(f64::MIN_POSITIVE), 0.0);
            }
        }
        let total: DMatrix<C64> = covs.iter().fold(DMatrix::zeros(users[0].n, users[0].n), |acc, c| acc + c);
        // External interference scales with tr W (per-user) or with the mean port power (common).
        let external_form = match opts.scaling {
            MrtScaling::PerUser => DMatrix::<C64>::identity(m, m),
            MrtScaling::Common => a.iter().fold(DMatrix::zeros(m, m), |acc, ak| acc + ak) / C64::new(users.len() as f64, 0.0),
        };
        let mut num = Vec::with_capacity(users.len());
        let mut den = Vec::with_capacity(users.len());
        for (k, u) in users.iter().enumerate() {
            let others = &total - &covs[k];
            num.push(match opts.scaling {
                MrtScaling::Common => &a[k] * C64::new(quad(&a[k], &w_t), 0.0),
                MrtScaling::PerUser => a[k].clone(),
            });
            den.push(u.coupled(&others) + &external_form * C64::new(external[k], 0.0));
        }
        let w0 = if feasible(leaks, &w_t) { &w_t * w_t.adjoint() } else { phase1_w.clone().unwrap_or_else(|| &w_t * w_t.adjoint()) };
        let rep = dinkelbach(&num, &den, &cap_list, &w0, &opts.dinkelbach)?;
        let (cand, v) = gaussian_randomization(&rep.w, opts.randomizations, &mut rng, &score)?;
        let (cand, v) = polish(cand, v);
        reports.push(rep);
        if v > v_best * (1.0 + 1e-9) || (!v_best.is_finite() && v.is_finite()) {
            w_best = cand.clone();
            v_best = v;
            w_t = cand;
        } else {
            break;
        }
    }
    if !v_best.is_finite() && v_best < 0.0 {
        return Err(Error::SolverFailure("no rank-one point satisfies the leakage caps".into()));
    }
    let per_user = surrogate(users, &w_best, opts.scaling, external)?;
    Ok(SdbSolution { weights: TiltWeights::normalized(w_best)?, objective: min_of(&per_user), per_user, reports })
}

/// Single-cell SDB over element covariances (each N*M square) with block size `m`.
/// `initial` seeds the incumbent (e.g. the centre-of-mass tilt weights).
pub fn weights_sdb(element_covs: &[CovarianceMatrix], m: usize, initial: &[TiltWeights], opts: &SdbOptions) -> Result<SdbSolution> {
    if element_covs.is_empty() {
        return Err(Error::Empty("user covariances".into()));
    }
    let users = prepare(element_covs, m)?;
    solve_cell(&users, &[], initial, &[], opts, 0)
}

/// One cell of the multi-cell problem.
#[derive(Debug, Clone)]
pub struct CellProblem {
    /// Element covariances from this cell's array to its own users.
    pub users: Vec<CovarianceMatrix>,
    /// Element covariances from this cell's array to out-of-cell users, with their leakage caps.
    pub leakage: Vec<(CovarianceMatrix, f64)>,
    pub initial: Vec<TiltWeights>,
    /// Interference from other cells at each own user, in surrogate units; empty for none.
    pub external: Vec<f64>,
}

/// Per-cell SDB under leakage caps tr R_BS(cross) <= cap. Infinite caps are ignored.
pub fn weights_sdb_multicell(cells: &[CellProblem], m: usize, opts: &SdbOptions) -> Result<Vec<SdbSolution>> {
    if cells.len() < 2 {
        return Err(Error::InvalidParameter("multi-cell SDB needs at least two cells".into()));
    }
    cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.users.is_empty() {
                return Err(Error::Empty(format!("users of cell {i}")));
            }
            let users = prepare(&c.users, m)?;
            let mut leaks = Vec::new();
            for (r, cap) in &c.leakage {
                if !(*cap > 0.0) {
                    return Err(Error::InvalidParameter(format!("leakage cap must be > 0, got {cap}")));
                }
                if cap.is_finite() {
                    leaks.push(Leak { a: UserBlocks::new(r, m)?.trace_matrix(), cap: *cap });
                }
            }
            solve_cell(&users, &leaks, &c.initial, &c.external, opts, i)
        })
        .collect()
}

/// Leakage tr R_BS(w) of a cross-link element covariance.
pub fn leakage(cross_cov: &CovarianceMatrix, w: &TiltWeights) -> Result<f64> {
    let u = UserBlocks::new(cross_cov, w.len())?;
    Ok(quad(&u.trace_matrix(), w.weights()))
}

/// Intra-cell surrogate SIR of every user for a common weight vector.
pub fn surrogate_for_weights(element_covs: &[CovarianceMatrix], w: &TiltWeights, scaling: MrtScaling) -> Result<Vec<f64>> {
    let users = prepare(element_covs, w.len())?;
    surrogate(&users, w.weights(), scaling, &[])
}
