//! Single-user optimal downtilt weights: principal eigenvector of the port's element block.

use nalgebra::DMatrix;

use crate::linalg::{hermitian_asymmetry, matrix_scale, principal_eigenvector};
use crate::txru::TiltWeights;
use crate::{Error, Result, C64};

/// Unit-norm principal eigenvector of the M x M element covariance block, with the first
/// nonzero entry real positive.
pub fn weights_eigen_single_user(block: &DMatrix<C64>) -> Result<TiltWeights> {
    if !block.is_square() || block.is_empty() {
        return Err(Error::DimensionMismatch(format!("block is {}x{}", block.nrows(), block.ncols())));
    }
    let asym = hermitian_asymmetry(block);
    if asym > 1e-8 * matrix_scale(block) {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    let (_, v) = principal_eigenvector(block);
    TiltWeights::normalized(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn examples() {
        let u = DVector::from_vec(vec![C64::new(0.0, 0.6), C64::new(0.8, 0.0)]);
        let w = weights_eigen_single_user(&(&u * u.adjoint())).unwrap();
        // Phase fix makes the first entry real: u * (-i).
        assert!((w.weights() - &u * C64::new(0.0, -1.0)).norm() < 1e-12);
        let mut d = DMatrix::zeros(2, 2);
        d[(0, 0)] = C64::new(2.0, 0.0);
        d[(1, 1)] = C64::new(1.0, 0.0);
        let w = weights_eigen_single_user(&d).unwrap();
        assert!((w.weights()[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        let mut bad = DMatrix::<C64>::identity(2, 2);
        bad[(0, 1)] = C64::new(1.0, 0.0);
        assert!(weights_eigen_single_user(&bad).is_err());
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let w = weights_eigen_single_user(&DMatrix::identity(3, 3)).unwrap();
        assert!((w.weights().norm() - 1.0).abs() < 1e-12);
        let again = weights_eigen_single_user(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(w, again);
    }
}
