//! Stand-in test target: points on a sphere shell with slight radial jitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geom::{Point3, PointCloud};

/// Samples `n` points uniformly over a sphere of `radius` centred at the
/// origin, then moves each radially by a Gaussian offset whose standard
/// deviation is `jitter` times the mean point spacing `sqrt(4 pi r^2 / n)`.
pub fn sphere_shell(n: usize, radius: f64, jitter: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = (4.0 * std::f64::consts::PI * radius * radius / n.max(1) as f64).sqrt();
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let g: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let len = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if len < 1e-12 {
            continue;
        }
        let dr: f64 = rng.sample::<f64, _>(StandardNormal) * jitter * spacing;
        let s = (radius + dr) / len;
        pts.push(Point3::new(g[0] * s, g[1] * s, g[2] * s));
    }
    PointCloud::new(pts).expect("finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_is_thin_and_deterministic() {
        let a = sphere_shell(5000, 1.0, 0.05, 3);
        assert_eq!(a, sphere_shell(5000, 1.0, 0.05, 3));
        let spacing = (4.0 * std::f64::consts::PI / 5000.0f64).sqrt();
        for p in a.points() {
            assert!((p.norm() - 1.0).abs() < 6.0 * 0.05 * spacing);
        }
    }
}
