use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::splat::FreeGaussian;
use crate::Vec3;

/// Seeds `count` free Gaussians uniformly inside a ball, for a stage-1 fit
/// without a starting checkpoint.
///
/// Each Gaussian starts isotropic and grey, with a radial normal.
pub fn init_free_gaussians(count: usize, centre: Vec3, radius: f64, seed: u64) -> Result<Vec<FreeGaussian>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Config(format!("initialisation radius must be positive, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 0.5 * radius / (count.max(1) as f64).cbrt();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let r = p.norm();
        if !(1e-3..=1.0).contains(&r) {
            continue;
        }
        let mut g = FreeGaussian::new(centre + p * radius, scale, 0.1);
        g.normal = Some(p / r);
        out.push(g);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inside_ball_and_seeded() {
        let c = Vec3::new(1.0, 2.0, 3.0);
        let a = init_free_gaussians(200, c, 0.5, 7).unwrap();
        assert_eq!(a.len(), 200);
        assert!(a.iter().all(|g| (g.mean - c).norm() <= 0.5 + 1e-12));
        assert!(a.iter().all(|g| (g.normal.unwrap().norm() - 1.0).abs() < 1e-12));
        assert_eq!(a, init_free_gaussians(200, c, 0.5, 7).unwrap());
        assert_ne!(a, init_free_gaussians(200, c, 0.5, 8).unwrap());
        assert!(init_free_gaussians(0, c, 0.5, 0).unwrap().is_empty());
        assert!(init_free_gaussians(3, c, 0.0, 0).is_err());
    }
}
