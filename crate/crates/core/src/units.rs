//! Angle and decibel conversions.

use std::f64::consts::PI;

#[inline]
pub fn deg2rad(deg: f64) -> f64 {
    deg * PI / 180.0
}

#[inline]
pub fn rad2deg(rad: f64) -> f64 {
    rad * 180.0 / PI
}

/// Power quantity in dB to linear scale.
#[inline]
pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Field (amplitude) quantity in dB to linear scale.
#[inline]
pub fn db_to_field(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

#[inline]
pub fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// Wraps an azimuth in degrees into (-180, 180].
pub fn wrap_deg(phi_deg: f64) -> f64 {
    let mut x = phi_deg % 360.0;
    if x <= -180.0 {
        x += 360.0;
    } else if x > 180.0 {
        x -= 360.0;
    }
    x
}

/// Wraps an azimuth in radians into (-pi, pi].
pub fn wrap_rad(phi: f64) -> f64 {
    let mut x = phi % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping() {
        assert_eq!(wrap_deg(180.0), 180.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert_eq!(wrap_deg(190.0), -170.0);
        assert_eq!(wrap_deg(720.0 + 10.0), 10.0);
        assert!((wrap_rad(3.0 * PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn decibels() {
        assert!((db_to_power(30.0) - 1000.0).abs() < 1e-9);
        assert!((db_to_field(20.0) - 10.0).abs() < 1e-12);
        assert!((power_to_db(100.0) - 20.0).abs() < 1e-12);
    }
}
