//! Tilt-angle selection strategies.

use crate::channel::UserGeometry;
use crate::{Error, Result};

/// Common fixed tilt.
pub fn tilt_cst(theta_fixed_deg: f64) -> Result<f64> {
    if theta_fixed_deg > 0.0 && theta_fixed_deg < 180.0 {
        Ok(theta_fixed_deg)
    } else {
        Err(Error::InvalidParameter(format!("tilt must lie in (0, 180), got {theta_fixed_deg}")))
    }
}

/// Tilt toward the user's line-of-sight elevation.
pub fn tilt_los(user: &UserGeometry) -> f64 {
    user.los_elevation_deg
}

/// Mean LoS elevation of all users.
pub fn tilt_com(users: &[UserGeometry]) -> Result<f64> {
    if users.is_empty() {
        return Err(Error::Empty("user set".into()));
    }
    Ok(users.iter().map(|u| u.los_elevation_deg).sum::<f64>() / users.len() as f64)
}

/// Weighted mean LoS elevation.
pub fn tilt_muab(users: &[UserGeometry], weights: &[f64]) -> Result<f64> {
    if users.is_empty() {
        return Err(Error::Empty("user set".into()));
    }
    if weights.len() != users.len() {
        return Err(Error::DimensionMismatch(format!("{} weights for {} users", weights.len(), users.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("MUAB weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("MUAB weights are all zero".into()));
    }
    Ok(users.iter().zip(weights).map(|(u, w)| w * u.los_elevation_deg).sum::<f64>() / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_examples() {
        let a = UserGeometry::new(0.0, 95.0, 100.0).unwrap();
        let b = UserGeometry::new(10.0, 105.0, 60.0).unwrap();
        assert_eq!(tilt_com(&[a.clone(), b.clone()]).unwrap(), 100.0);
        assert_eq!(tilt_muab(&[a.clone(), b.clone()], &[2.0, 2.0]).unwrap(), 100.0);
        assert_eq!(tilt_muab(&[a.clone(), b.clone()], &[3.0, 1.0]).unwrap(), 97.5);
        let edge = UserGeometry::new(0.0, 95.37, 250.0).unwrap();
        assert_eq!(tilt_los(&edge), 95.37);
        assert!(tilt_com(&[]).is_err());
        assert!(tilt_muab(&[a], &[0.0]).is_err());
        assert!(tilt_cst(180.0).is_err());
    }
}
