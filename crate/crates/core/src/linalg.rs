//! Hermitian matrix helpers and complex-matrix CSV I/O.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::io::{Read, Write};

use crate::{Error, Result, C64};

/// Relative tolerance on negative eigenvalues accepted as round-off.
pub const PSD_TOL: f64 = 1e-10;

/// Largest entry of |A - A^H|.
pub fn hermitian_asymmetry(a: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// (A + A^H) / 2.
pub fn hermitize(a: &DMatrix<C64>) -> DMatrix<C64> {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted descending.
///
/// Equal eigenvalues keep the solver's column order, so ties resolve to the lowest index.
pub fn hermitian_eigen(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Scale used for relative PSD/Hermitian checks.
pub fn matrix_scale(a: &DMatrix<C64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.norm())).max(f64::MIN_POSITIVE)
}

/// Checks A is Hermitian within `herm_tol` relative to its scale and PSD within [`PSD_TOL`].
pub fn check_hermitian_psd(a: &DMatrix<C64>, herm_tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    let scale = matrix_scale(a);
    let asym = hermitian_asymmetry(a);
    if asym > herm_tol * scale {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    let (vals, _) = hermitian_eigen(a);
    if let Some(&min) = vals.last() {
        if min < -PSD_TOL * scale {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    Ok(())
}

/// Hermitian PSD square root.
///
/// Eigenvalues down to `-PSD_TOL` (relative) are clamped to zero; anything more
/// negative is rejected.
pub fn psd_sqrt(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    check_hermitian_psd(a, 1e-8)?;
    let (vals, vecs) = hermitian_eigen(a);
    let root = DVector::from_iterator(vals.len(), vals.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)));
    let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * root[j]);
    Ok(scaled * vecs.adjoint())
}

/// Principal eigenpair of a Hermitian matrix. The eigenvector's first entry above
/// 1e-12 in magnitude is made real positive.
pub fn principal_eigenvector(a: &DMatrix<C64>) -> (f64, DVector<C64>) {
    let (vals, vecs) = hermitian_eigen(a);
    let mut v: DVector<C64> = vecs.column(0).into_owned();
    if let Some(x) = v.iter().find(|x| x.norm() > 1e-12).copied() {
        v *= x.conj() / x.norm();
    }
    (vals[0], v)
}

/// Writes a complex matrix as `row,col,re,im` records with a header.
pub fn write_complex_csv<W: Write>(m: &DMatrix<C64>, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["row", "col", "re", "im"])?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            wtr.write_record([i.to_string(), j.to_string(), format!("{:e}", z.re), format!("{:e}", z.im)])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `row,col,re,im` records. Every entry of the dense matrix must appear exactly once.
pub fn read_complex_csv<R: Read>(r: R) -> Result<DMatrix<C64>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Config(format!("expected 4 columns, found {}", rec.len())));
        }
        let parse_idx = |k: usize| -> Result<usize> {
            rec[k].trim().parse().map_err(|_| Error::Config(format!("bad index '{}'", &rec[k])))
        };
        let parse_f = |k: usize| -> Result<f64> {
            rec[k].trim().parse().map_err(|_| Error::Config(format!("bad number '{}'", &rec[k])))
        };
        entries.push((parse_idx(0)?, parse_idx(1)?, C64::new(parse_f(2)?, parse_f(3)?)));
    }
    if entries.is_empty() {
        return Err(Error::Empty("matrix CSV".into()));
    }
    let rows = entries.iter().map(|e| e.0).max().unwrap_or(0) + 1;
    let cols = entries.iter().map(|e| e.1).max().unwrap_or(0) + 1;
    let mut seen = vec![false; rows * cols];
    let mut m = DMatrix::zeros(rows, cols);
    for (i, j, z) in entries {
        if std::mem::replace(&mut seen[i * cols + j], true) {
            return Err(Error::Config(format!("duplicate entry ({i},{j})")));
        }
        m[(i, j)] = z;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Config(format!("missing entries in {rows}x{cols} matrix")));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_psd() -> DMatrix<C64> {
        let b = DMatrix::from_fn(4, 4, |i, j| C64::new((i * 3 + j) as f64 * 0.1 - 0.4, (i as f64 - j as f64) * 0.2));
        &b * b.adjoint()
    }

    #[test]
    fn sqrt_squares_back() {
        let a = sample_psd();
        let r = psd_sqrt(&a).unwrap();
        assert!((&r * &r - &a).norm() < 1e-10 * a.norm());
        assert!(hermitian_asymmetry(&r) < 1e-12);
    }

    #[test]
    fn rejects_indefinite_and_nonhermitian() {
        let mut a = DMatrix::<C64>::identity(2, 2);
        a[(1, 1)] = C64::new(-1.0, 0.0);
        assert!(matches!(psd_sqrt(&a), Err(Error::NotPsd { .. })));
        let mut b = DMatrix::<C64>::identity(2, 2);
        b[(0, 1)] = C64::new(0.5, 0.0);
        assert!(matches!(psd_sqrt(&b), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn principal_vector_phase_fixed() {
        let a = sample_psd();
        let (l, v) = principal_eigenvector(&a);
        assert!((&a * &v - &v * C64::new(l, 0.0)).norm() < 1e-10);
        let first = v.iter().find(|x| x.norm() > 1e-12).unwrap();
        assert!(first.im.abs() < 1e-14 && first.re > 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let a = sample_psd();
        let mut buf = Vec::new();
        write_complex_csv(&a, &mut buf).unwrap();
        let b = read_complex_csv(buf.as_slice()).unwrap();
        assert!((a - b).norm() < 1e-14);
        assert!(read_complex_csv("row,col,re,im\n0,0,1,0\n1,1,1,0\n".as_bytes()).is_err());
    }
}
