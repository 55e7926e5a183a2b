//! User drops and cell layouts.

use rand::Rng;
use std::f64::consts::PI;

use super::config::UsersSection;
use crate::channel::UserGeometry;
use crate::units::{deg2rad, rad2deg, wrap_deg};
use crate::Result;

/// LoS elevation 90° + atan(dh / d) of a user at ground distance `distance_m` and
/// `height_diff_m` below the array.
pub fn los_elevation_deg(distance_m: f64, height_diff_m: f64) -> f64 {
    90.0 + rad2deg(height_diff_m.atan2(distance_m))
}

/// Base-station site: ground position (m) and boresight azimuth (deg).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub position: [f64; 2],
    pub boresight_deg: f64,
}

/// A placed user: ground position and serving cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedUser {
    pub position: [f64; 2],
    pub cell: usize,
}

/// Draws `polar` (distance, azimuth offset) uniformly over the annular sector.
fn draw_polar<R: Rng + ?Sized>(cfg: &UsersSection, rng: &mut R) -> (f64, f64) {
    let (r0, r1) = (cfg.min_distance_m, cfg.radius_m);
    let d = (r0 * r0 + rng.random::<f64>() * (r1 * r1 - r0 * r0)).sqrt();
    let half = cfg.sector_half_width_deg;
    let az = -half + 2.0 * half * rng.random::<f64>();
    (d, az)
}

/// `k` users uniform over the annular sector in front of a single array.
pub fn place_users<R: Rng + ?Sized>(cfg: &UsersSection, k: usize, rng: &mut R) -> Result<Vec<UserGeometry>> {
    let dh = cfg.bs_height_m - cfg.ue_height_m;
    (0..k)
        .map(|_| {
            let (d, az) = draw_polar(cfg, rng);
            UserGeometry::new(wrap_deg(az), los_elevation_deg(d, dh), d)
        })
        .collect()
}

/// Three sites on an equilateral triangle whose sectors face the centroid, each at
/// distance `radius_m` from it.
pub fn three_cell_layout(cfg: &UsersSection) -> Vec<Site> {
    (0..3)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / 3.0;
            Site { position: [cfg.radius_m * a.cos(), cfg.radius_m * a.sin()], boresight_deg: wrap_deg(rad2deg(a) + 180.0) }
        })
        .collect()
}

/// `k` users in the sector of each site.
pub fn place_users_multicell<R: Rng + ?Sized>(cfg: &UsersSection, sites: &[Site], k: usize, rng: &mut R) -> Vec<PlacedUser> {
    let mut out = Vec::with_capacity(sites.len() * k);
    for (c, site) in sites.iter().enumerate() {
        for _ in 0..k {
            let (d, az) = draw_polar(cfg, rng);
            let a = deg2rad(site.boresight_deg + az);
            out.push(PlacedUser { position: [site.position[0] + d * a.cos(), site.position[1] + d * a.sin()], cell: c });
        }
    }
    out
}

/// Link geometry from `site` to a user, in the site's local frame.
pub fn link_geometry(cfg: &UsersSection, site: &Site, user: &PlacedUser) -> Result<UserGeometry> {
    let dx = user.position[0] - site.position[0];
    let dy = user.position[1] - site.position[1];
    let d = dx.hypot(dy).max(1e-6);
    let az = wrap_deg(rad2deg(dy.atan2(dx)) - site.boresight_deg);
    UserGeometry::new(az, los_elevation_deg(d, cfg.bs_height_m - cfg.ue_height_m), d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn elevation_examples() {
        assert!((los_elevation_deg(250.0, 28.5) - 96.5).abs() < 0.05);
        assert!((los_elevation_deg(30.0, 28.5) - 133.53).abs() < 0.05);
        assert!((los_elevation_deg(250.0, 23.5) - 95.37).abs() < 0.01);
    }

    #[test]
    fn placement_respects_annulus_and_sector() {
        let cfg = UsersSection::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let users = place_users(&cfg, 100_000, &mut rng).unwrap();
        assert!(users.iter().all(|u| u.distance_m >= 30.0 && u.distance_m <= 250.0));
        assert!(users.iter().all(|u| u.los_azimuth_deg.abs() <= 60.0));
    }

    #[test]
    fn own_site_link_matches_drop() {
        let cfg = UsersSection::default();
        let sites = three_cell_layout(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for u in place_users_multicell(&cfg, &sites, 50, &mut rng) {
            let g = link_geometry(&cfg, &sites[u.cell], &u).unwrap();
            assert!(g.los_azimuth_deg.abs() <= 60.0 + 1e-9);
            assert!(g.distance_m >= 30.0 - 1e-9 && g.distance_m <= 250.0 + 1e-9);
        }
        // Boresights meet at the centroid.
        for s in &sites {
            let a = deg2rad(s.boresight_deg);
            let p = [s.position[0] + cfg.radius_m * a.cos(), s.position[1] + cfg.radius_m * a.sin()];
            assert!(p[0].abs() < 1e-9 && p[1].abs() < 1e-9);
        }
    }
}
