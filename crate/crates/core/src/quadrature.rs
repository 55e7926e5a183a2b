//! Adaptive Gauss-Kronrod and fixed Gauss-Legendre quadrature.

use crate::{Error, Result, C64};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
/// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

struct Panel {
    a: f64,
    b: f64,
    value: Vec<C64>,
    error: f64,
}

fn gk15(f: &mut dyn FnMut(f64, &mut [C64]), a: f64, b: f64, dim: usize, buf: &mut [C64]) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![C64::new(0.0, 0.0); dim];
    let mut gauss = vec![C64::new(0.0, 0.0); dim];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let nodes: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &sgn in nodes {
            f(c + sgn * h * x, buf);
            for d in 0..dim {
                kron[d] += buf[d] * wk;
                if j % 2 == 1 {
                    gauss[d] += buf[d] * WG[j / 2];
                }
            }
        }
    }
    let mut error = 0.0f64;
    for d in 0..dim {
        kron[d] *= h;
        gauss[d] *= h;
        let e = (kron[d] - gauss[d]).norm();
        error = if e.is_finite() { error.max(e) } else { f64::INFINITY };
    }
    Panel { a, b, value: kron, error }
}

/// Vector-valued globally adaptive G7/K15 quadrature of `f` over `[a, b]`.
///
/// `f(x, out)` writes `dim` values. `breaks` inside `(a, b)` start as panel edges.
/// The estimated absolute error (max-norm over components) is driven below `tol`.
pub fn integrate_adaptive_vec(
    mut f: impl FnMut(f64, &mut [C64]),
    dim: usize,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
    max_panels: usize,
) -> Result<Vec<C64>> {
    if !(b > a) {
        return Ok(vec![C64::new(0.0, 0.0); dim]);
    }
    let mut edges: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (b - a));
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    let mut panels: Vec<Panel> = edges.windows(2).map(|w| gk15(&mut f, w[0], w[1], dim, &mut buf)).collect();
    loop {
        let total_err: f64 = panels.iter().map(|p| p.error).sum();
        if total_err <= tol {
            break;
        }
        if panels.len() >= max_panels {
            return Err(Error::QuadratureNotConverged { error: total_err, tolerance: tol });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::QuadratureNotConverged { error: total_err, tolerance: tol });
        }
        panels.push(gk15(&mut f, p.a, mid, dim, &mut buf));
        panels.push(gk15(&mut f, mid, p.b, dim, &mut buf));
    }
    let mut out = vec![C64::new(0.0, 0.0); dim];
    for p in &panels {
        for d in 0..dim {
            out[d] += p.value[d];
        }
    }
    Ok(out)
}

/// Scalar real adaptive quadrature.
pub fn integrate_adaptive(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
    max_panels: usize,
) -> Result<f64> {
    let v = integrate_adaptive_vec(|x, out| out[0] = C64::new(f(x), 0.0), 1, a, b, breaks, tol, max_panels)?;
    Ok(v[0].re)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Panelled Gauss-Legendre rule: `order` nodes on each interval between sorted `edges`.
pub fn panel_rule(edges: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(edges.len() * order);
    let mut weights = Vec::with_capacity(edges.len() * order);
    for e in edges.windows(2) {
        let (c, h) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
        if h <= 0.0 {
            continue;
        }
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(c + h * x);
            weights.push(h * w);
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_exact_for_polynomials() {
        for n in [1, 2, 5, 8, 13] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
            // Degree 2n-1 monomial, even degree for nonzero integral.
            let deg = 2 * n - 2;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((s - 2.0 / (deg as f64 + 1.0)).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn adaptive_handles_kinks_and_oscillation() {
        let v = integrate_adaptive(|x| x.abs(), -1.0, 2.0, &[], 1e-12, 500).unwrap();
        assert!((v - 2.5).abs() < 1e-11);
        let v = integrate_adaptive(|x| (40.0 * x).cos(), 0.0, 3.0, &[], 1e-12, 500).unwrap();
        assert!((v - (120f64).sin() / 40.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_reports_nonconvergence() {
        let r = integrate_adaptive(|x| 1.0 / x.abs().sqrt(), -1.0, 1.0, &[], 1e-14, 4);
        assert!(matches!(r, Err(Error::QuadratureNotConverged { .. })));
    }

    #[test]
    fn panel_rule_integrates_piecewise() {
        let (x, w) = panel_rule(&[0.0, 0.5, 2.0], 6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((s - 8.0 / 3.0).abs() < 1e-13);
    }
}
