//! Density–distance weighted gravitational scoring and top-λ retention.
//!
//! For a candidate `i` with neighbours `N(i)`:
//!
//! ```text
//! F_i = sum_j  (rho_i rho_j / (rho_med^2 + eps))^(alpha/2)
//!            * exp(-d_ij^2 / (2 (sigma r_k,i)^2))
//!            / (d_ij^2 + eps)
//! ```

use serde::{Deserialize, Serialize};

use crate::prefilter::DensityField;

/// Parameters shared by every score in one leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityWeights {
    pub rho_med: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub epsilon: f64,
}

/// Scores of one leaf's candidates and which of them survive the cut.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    pub scores: Vec<f64>,
    pub retained: Vec<bool>,
}

#[inline]
pub fn density_weight(rho_i: f64, rho_j: f64, rho_med: f64, alpha: f64, epsilon: f64) -> f64 {
    if alpha == 0.0 {
        return 1.0;
    }
    (rho_i * rho_j / (rho_med * rho_med + epsilon)).powf(0.5 * alpha)
}

/// Gaussian soft cutoff with bandwidth `sigma * r_k`.
#[inline]
pub fn distance_weight(d: f64, r_k: f64, sigma: f64) -> f64 {
    let bw = sigma * r_k;
    (-(d * d) / (2.0 * bw * bw)).exp()
}

#[inline]
pub fn gravity_kernel(d: f64, epsilon: f64) -> f64 {
    1.0 / (d * d + epsilon)
}

/// Score of candidate `i` over its neighbour list in `field`. An empty
/// neighbour list scores 0.
pub fn weighted_score(i: usize, field: &DensityField, w: &GravityWeights) -> f64 {
    let rho_i = field.rho[i];
    let r_k = field.r_k[i].max(w.epsilon);
    field
        .neighbors(i)
        .iter()
        .zip(field.distances(i))
        .map(|(&j, &d)| {
            density_weight(rho_i, field.rho[j], w.rho_med, w.alpha, w.epsilon)
                * distance_weight(d, r_k, w.sigma)
                * gravity_kernel(d, w.epsilon)
        })
        .sum()
}

pub fn score_all(field: &DensityField, w: &GravityWeights) -> Vec<f64> {
    (0..field.len()).map(|i| weighted_score(i, field, w)).collect()
}

/// Median; the mean of the two central values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// `ceil(lambda * n)`, ignoring round-off just above an integer, and at
/// least 1 for a non-empty set.
pub fn retained_count(lambda: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let x = lambda * n as f64;
    let nearest = x.round();
    let m = if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (m as usize).clamp(1, n)
}

/// Keeps the `ceil(lambda * n)` highest-scoring candidates. Equal scores are
/// ordered by ascending key. Returns local indices sorted by key.
pub fn select_top(scores: &[f64], keys: &[usize], lambda: f64) -> Vec<usize> {
    assert_eq!(scores.len(), keys.len());
    let m = retained_count(lambda, scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(keys[a].cmp(&keys[b])));
    order.truncate(m);
    order.sort_by_key(|&i| keys[i]);
    order
}

/// Scores a leaf and flags the top-λ fraction.
pub fn score_and_select(
    field: &DensityField,
    keys: &[usize],
    w: &GravityWeights,
    lambda: f64,
) -> ScoredCandidates {
    let scores = score_all(field, w);
    let mut retained = vec![false; scores.len()];
    for i in select_top(&scores, keys, lambda) {
        retained[i] = true;
    }
    ScoredCandidates { scores, retained }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use crate::prefilter::knn_density;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn density_weight_examples() {
        assert_relative_eq!(density_weight(5.0, 5.0, 5.0, 1.7, 1e-300), 1.0, max_relative = 1e-15);
        assert_eq!(density_weight(3.0, 900.0, 2.0, 0.0, 1e-12), 1.0);
        assert_eq!(density_weight(8.0, 2.0, 2.0, 2.0, 0.0), 4.0);
    }

    #[test]
    fn distance_weight_examples() {
        assert_eq!(distance_weight(0.0, 0.3, 1.5), 1.0);
        assert_relative_eq!(distance_weight(0.45, 0.3, 1.5), (-0.5f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(distance_weight(0.9, 0.3, 1.5), (-2.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(distance_weight(1.0, 1.0, 1.0), 0.606_53, max_relative = 1e-5);
        assert_relative_eq!(distance_weight(2.0, 1.0, 1.0), 0.135_34, max_relative = 1e-4);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(gravity_kernel(1.0, 0.0), 1.0);
        assert_relative_eq!(gravity_kernel(0.0, 1e-12), 1e12, max_relative = 1e-12);
        assert_eq!(gravity_kernel(2.0, 0.0), 0.25);
    }

    #[test]
    fn single_neighbour_score() {
        let pts = [Point3::new(0.0, 0.0, 0.0), Point3::new(0.7, 0.0, 0.0)];
        let f = knn_density(&pts, &[0, 1], 1, 1e-300).unwrap();
        let w = GravityWeights {
            rho_med: f.rho[0],
            alpha: 1.0,
            sigma: 2.0,
            epsilon: 1e-300,
        };
        let d: f64 = 0.7;
        let want = (-d * d / (2.0 * 4.0 * d * d)).exp() / (d * d);
        assert_relative_eq!(weighted_score(0, &f, &w), want, max_relative = 1e-12);
    }

    #[test]
    fn empty_neighbourhood_scores_zero() {
        let pts = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let f = knn_density(&pts, &[0, 1], 1, 1e-12).unwrap().restrict(&[1]);
        let w = GravityWeights { rho_med: f.rho[0], alpha: 1.0, sigma: 1.0, epsilon: 1e-12 };
        assert_eq!(weighted_score(0, &f, &w), 0.0);
    }

    #[test]
    fn score_matches_straight_line_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<Point3> = (0..300)
            .map(|_| Point3::new(rng.random(), rng.random(), 0.2 * rng.random::<f64>()))
            .collect();
        let keys: Vec<usize> = (0..300).collect();
        let k = 12;
        let eps = 1e-12;
        let (alpha, sigma) = (1.3, 0.8);
        let f = knn_density(&pts, &keys, k, eps).unwrap();
        let rho_med = median(&f.rho).unwrap();
        let w = GravityWeights { rho_med, alpha, sigma, epsilon: eps };
        let got = score_all(&f, &w);

        // Oracle: brute-force neighbours and the formula written out in full.
        for i in 0..300 {
            let mut d: Vec<(f64, usize)> = (0..300)
                .filter(|&j| j != i)
                .map(|j| (pts[i].dist2(&pts[j]), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let nb = &d[..k];
            let rk = nb[k - 1].0.sqrt();
            let mut s = 0.0;
            for &(d2, j) in nb {
                let wden = ((f.rho[i] * f.rho[j]) / (rho_med.powi(2) + eps)).powf(alpha / 2.0);
                let wdis = (-d2 / (2.0 * (sigma * rk).powi(2))).exp();
                s += wden * wdis * (1.0 / (d2 + eps));
            }
            assert_relative_eq!(got[i], s, max_relative = 1e-10);
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn select_top_examples() {
        let keys: Vec<usize> = (100..110).collect();
        let scores: Vec<f64> = vec![0.3, 9.0, 1.5, 4.4, 0.1, 7.7, 2.2, 5.0, 6.1, 3.3];
        assert_eq!(select_top(&scores, &keys, 1.0), (0..10).collect::<Vec<_>>());

        // Sorting oracle for the five largest.
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let mut want = order[..5].to_vec();
        want.sort();
        assert_eq!(select_top(&scores, &keys, 0.5), want);

        let flat = vec![1.0; 10];
        let shuffled_keys = vec![9, 3, 7, 1, 0, 8, 2, 6, 4, 5];
        let got = select_top(&flat, &shuffled_keys, 0.3);
        let got_keys: Vec<usize> = got.iter().map(|&i| shuffled_keys[i]).collect();
        assert_eq!(got_keys, vec![0, 1, 2]);
    }

    #[test]
    fn retained_count_rounding() {
        assert_eq!(retained_count(0.3, 10), 3);
        assert_eq!(retained_count(0.7, 10), 7);
        assert_eq!(retained_count(0.31, 10), 4);
        assert_eq!(retained_count(0.01, 3), 1);
        assert_eq!(retained_count(1.0, 0), 0);
        assert_eq!(retained_count(0.95, 40000), 38000);
    }

    proptest! {
        #[test]
        fn cardinality_and_median_contracts(seed in any::<u64>(), n in 1usize..300, lambda in 0.01f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..20) as f64).collect();
            let keys: Vec<usize> = (0..n).collect();
            let sel = select_top(&scores, &keys, lambda);
            prop_assert_eq!(sel.len(), retained_count(lambda, n));
            prop_assert_eq!(sel.len(), ((lambda * n as f64) - 1e-9 * (lambda * n as f64)).ceil().max(1.0) as usize);
            // Every kept score dominates every dropped score.
            let min_kept = sel.iter().map(|&i| scores[i]).fold(f64::INFINITY, f64::min);
            for (i, &s) in scores.iter().enumerate() {
                if !sel.contains(&i) {
                    prop_assert!(s <= min_kept);
                }
            }
            let med = median(&scores).unwrap();
            prop_assert!(2 * scores.iter().filter(|&&s| s <= med).count() >= n);
            prop_assert!(2 * scores.iter().filter(|&&s| s >= med).count() >= n);
        }

        #[test]
        fn extra_neighbour_never_lowers_score(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point3> = (0..60).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect();
            let keys: Vec<usize> = (0..60).collect();
            let small = knn_density(&pts, &keys, 5, 1e-12).unwrap();
            let big = knn_density(&pts, &keys, 6, 1e-12).unwrap();
            // Same rho/r_k for both so that only the neighbour set differs.
            let w = GravityWeights { rho_med: median(&small.rho).unwrap(), alpha: 1.0, sigma: 1.0, epsilon: 1e-12 };
            for i in 0..60 {
                let mut s5 = 0.0;
                let mut s6 = 0.0;
                for (t, (&j, &d)) in big.neighbors(i).iter().zip(big.distances(i)).enumerate() {
                    let term = density_weight(small.rho[i], small.rho[j], w.rho_med, 1.0, 1e-12)
                        * distance_weight(d, small.r_k[i], 1.0)
                        * gravity_kernel(d, 1e-12);
                    if t < 5 { s5 += term; }
                    s6 += term;
                }
                prop_assert!(s6 >= s5);
            }
        }
    }
}
