//! Clipping, Gaussian aggregation, and two-sided geometric noise.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal};

use super::PrivacyError;
use crate::seed::Seed;

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `v` in place by `min(1, bound/‖v‖₂)`. Returns whether it was scaled.
pub fn clip_in_place(v: &mut [f64], bound: f64) -> bool {
    assert!(bound > 0.0, "clip bound must be positive");
    let norm = l2_norm(v);
    if norm <= bound {
        return false;
    }
    let original: Vec<f64> = v.to_vec();
    let mut scale = bound / norm;
    loop {
        for (dst, &src) in v.iter_mut().zip(&original) {
            *dst = src * scale;
        }
        // rounding can leave the scaled norm an ulp above the bound
        if l2_norm(v) <= bound {
            return true;
        }
        scale = scale.next_down();
    }
}

pub fn clip_to_norm(v: &[f64], bound: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    clip_in_place(&mut out, bound);
    out
}

/// Clips each delta, sums them in the given order, divides by the nominal
/// `cohort`, and adds `N(0, (sigma·clip/cohort)²)` noise per coordinate.
pub fn gaussian_aggregate(
    deltas: &[Vec<f64>],
    dim: usize,
    clip: f64,
    sigma: f64,
    cohort: usize,
    seed: u64,
) -> Result<Vec<f64>, PrivacyError> {
    gaussian_aggregate_calibrated(deltas, dim, clip, sigma, cohort, cohort as f64, &mut Seed(seed).rng())
}

/// As [`gaussian_aggregate`], but the noise std is `sigma·clip/noise_cohort`
/// while the clipped sum is still averaged over `cohort`. This lets a small
/// training cohort carry the noise level of a larger calibration cohort.
pub fn gaussian_aggregate_calibrated<R: Rng + ?Sized>(
    deltas: &[Vec<f64>],
    dim: usize,
    clip: f64,
    sigma: f64,
    cohort: usize,
    noise_cohort: f64,
    rng: &mut R,
) -> Result<Vec<f64>, PrivacyError> {
    if cohort == 0 {
        return Err(PrivacyError::InvalidParameter("cohort must be at least 1".into()));
    }
    if !(sigma >= 0.0) {
        return Err(PrivacyError::InvalidParameter(format!("noise multiplier {sigma} is negative")));
    }
    let mut acc = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    for d in deltas {
        if d.len() != dim {
            return Err(PrivacyError::DimensionMismatch { expected: dim, found: d.len() });
        }
        scratch.copy_from_slice(d);
        if clip.is_finite() {
            clip_in_place(&mut scratch, clip);
        }
        for (a, s) in acc.iter_mut().zip(&scratch) {
            *a += s;
        }
    }
    let divisor = cohort as f64;
    for a in acc.iter_mut() {
        *a /= divisor;
    }
    if sigma > 0.0 {
        let std = sigma * clip / noise_cohort;
        let normal = Normal::new(0.0, std)
            .map_err(|e| PrivacyError::InvalidParameter(format!("noise std {std}: {e}")))?;
        for a in acc.iter_mut() {
            *a += normal.sample(rng);
        }
    }
    Ok(acc)
}

/// Ratio `r = exp(−ε₀/Δ)` of the two-sided geometric distribution.
pub fn geometric_ratio(epsilon0: f64, sensitivity: u32) -> f64 {
    (-epsilon0 / f64::from(sensitivity)).exp()
}

/// Draws `Z` with `Pr[Z = z] = ((1−r)/(1+r))·r^|z|` as the difference of
/// two i.i.d. geometric variables with success probability `1 − r`.
pub fn sample_two_sided_geometric<R: Rng + ?Sized>(r: f64, rng: &mut R) -> i64 {
    if r <= 0.0 {
        return 0;
    }
    let g = Geometric::new(1.0 - r).expect("ratio in (0, 1)");
    let a = g.sample(rng) as i64;
    let b = g.sample(rng) as i64;
    a - b
}

/// `count + Z` for the geometric mechanism with budget `epsilon0` and L1
/// sensitivity `sensitivity`.
pub fn geometric_noise<R: Rng + ?Sized>(count: i64, epsilon0: f64, sensitivity: u32, rng: &mut R) -> i64 {
    assert!(epsilon0 > 0.0, "epsilon0 must be positive");
    assert!(sensitivity >= 1, "sensitivity must be at least 1");
    count + sample_two_sided_geometric(geometric_ratio(epsilon0, sensitivity), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clip_examples() {
        // ‖v‖ = 2
        let v = vec![1.2, 1.6];
        let c = clip_to_norm(&v, 0.5);
        assert!((c[0] - 0.3).abs() < 1e-15 && (c[1] - 0.4).abs() < 1e-15);
        assert!(l2_norm(&c) <= 0.5);
        let small = vec![0.18, 0.24];
        assert_eq!(clip_to_norm(&small, 0.5), small);
        assert_eq!(clip_to_norm(&[0.0, 0.0], 0.5), vec![0.0, 0.0]);
    }

    #[test]
    fn aggregate_without_noise_is_clipped_mean() {
        let deltas = vec![vec![0.1, -0.2], vec![0.3, 0.0]];
        let agg = gaussian_aggregate(&deltas, 2, 0.5, 0.0, 2, 1).unwrap();
        assert_eq!(agg, vec![(0.1 + 0.3) / 2.0, (-0.2 + 0.0) / 2.0]);
        // absent clients still count in the divisor
        let agg = gaussian_aggregate(&deltas, 2, 0.5, 0.0, 4, 1).unwrap();
        assert_eq!(agg, vec![0.4 / 4.0, -0.2 / 4.0]);
    }

    #[test]
    fn aggregate_dimension_mismatch() {
        let deltas = vec![vec![0.1, -0.2], vec![0.3]];
        assert_eq!(
            gaussian_aggregate(&deltas, 2, 0.5, 1.0, 2, 1),
            Err(PrivacyError::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn aggregate_noise_std() {
        let dim = 100_000;
        let noise = gaussian_aggregate(&[], dim, 0.5, 1.0, 400, 5).unwrap();
        let mean = noise.iter().sum::<f64>() / dim as f64;
        let var = noise.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (dim as f64 - 1.0);
        assert!((var.sqrt() / 0.00125 - 1.0).abs() < 0.05);
        assert_eq!(noise, gaussian_aggregate(&[], dim, 0.5, 1.0, 400, 5).unwrap());
    }

    #[test]
    fn geometric_degenerate_limit() {
        let mut rng = Seed(3).rng();
        let r = geometric_ratio(20.0, 1);
        let nonzero = (0..1_000_000)
            .filter(|_| sample_two_sided_geometric(r, &mut rng) != 0)
            .count();
        assert!(nonzero as f64 <= 1e-8 * 1e6 + 1.0);
        assert_eq!(geometric_noise(5, f64::INFINITY, 50, &mut rng), 5);
    }

    proptest! {
        #[test]
        fn clipped_norm_bounded(v in proptest::collection::vec(-10.0f64..10.0, 1..64), bound in 0.01f64..5.0) {
            let c = clip_to_norm(&v, bound);
            prop_assert!(l2_norm(&c) <= bound);
            if l2_norm(&v) <= bound {
                prop_assert_eq!(c, v);
            } else {
                // direction preserved
                let ratio = bound / l2_norm(&v);
                for (a, b) in c.iter().zip(&v) {
                    prop_assert!((a - b * ratio).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }
    }
}
