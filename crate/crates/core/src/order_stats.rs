//! Rank-based sample quantiles in the nine Hyndman–Fan definitions.
//!
//! With order statistics `x_(1) ≤ … ≤ x_(n)`, every scheme writes
//! `n·p + m = j + g` with integer `j` and fractional `g ∈ [0, 1)`, and returns
//! `(1 - γ) x_(j) + γ x_(j+1)`. The schemes differ in the offset `m` and in
//! how `γ` is derived from `g`. Indices are clamped to `[1, n]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationScheme {
    InvertedCdf,
    AveragedInvertedCdf,
    ClosestObservation,
    InterpolatedInvertedCdf,
    Hazen,
    Weibull,
    Linear,
    MedianUnbiased,
    NormalUnbiased,
}

impl InterpolationScheme {
    pub const ALL: [InterpolationScheme; 9] = [
        Self::InvertedCdf,
        Self::AveragedInvertedCdf,
        Self::ClosestObservation,
        Self::InterpolatedInvertedCdf,
        Self::Hazen,
        Self::Weibull,
        Self::Linear,
        Self::MedianUnbiased,
        Self::NormalUnbiased,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::InvertedCdf => "inverted_cdf",
            Self::AveragedInvertedCdf => "averaged_inverted_cdf",
            Self::ClosestObservation => "closest_observation",
            Self::InterpolatedInvertedCdf => "interpolated_inverted_cdf",
            Self::Hazen => "hazen",
            Self::Weibull => "weibull",
            Self::Linear => "linear",
            Self::MedianUnbiased => "median_unbiased",
            Self::NormalUnbiased => "normal_unbiased",
        }
    }

    /// Hyndman–Fan type number, 1 through 9.
    pub fn hf_type(self) -> u8 {
        Self::ALL.iter().position(|&s| s == self).unwrap() as u8 + 1
    }

    /// Plotting-position parameters `(α, β)` of the continuous schemes.
    fn alpha_beta(self) -> Option<(f64, f64)> {
        match self {
            Self::InterpolatedInvertedCdf => Some((0.0, 1.0)),
            Self::Hazen => Some((0.5, 0.5)),
            Self::Weibull => Some((0.0, 0.0)),
            Self::Linear => Some((1.0, 1.0)),
            Self::MedianUnbiased => Some((1.0 / 3.0, 1.0 / 3.0)),
            Self::NormalUnbiased => Some((3.0 / 8.0, 3.0 / 8.0)),
            _ => None,
        }
    }
}

impl fmt::Display for InterpolationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterpolationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| domain(format!("unknown interpolation scheme '{s}'")))
    }
}

/// Fraction of `sample` that is `≤ x`.
pub fn empirical_cdf(sample: &[f64], x: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(domain("empirical CDF of an empty sample"));
    }
    Ok(sample.iter().filter(|&&v| v <= x).count() as f64 / sample.len() as f64)
}

/// `g` values within this distance of an integer are treated as exact ranks,
/// so that products like `10 × 0.3` do not pick up a spurious fraction.
const RANK_SNAP: f64 = 1e-10;

/// Quantile of an already sorted, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], p: f64, scheme: InterpolationScheme) -> f64 {
    use InterpolationScheme::*;
    let n = sorted.len();
    let nf = n as f64;
    let m = match scheme {
        InvertedCdf | AveragedInvertedCdf => 0.0,
        ClosestObservation => -0.5,
        _ => {
            let (a, b) = scheme.alpha_beta().unwrap();
            a + p * (1.0 - a - b)
        }
    };
    let h = nf * p + m;
    let mut j = h.floor();
    let mut g = h - j;
    if g < RANK_SNAP {
        g = 0.0;
    } else if g > 1.0 - RANK_SNAP {
        j += 1.0;
        g = 0.0;
    }
    let gamma = match scheme {
        InvertedCdf => {
            if g > 0.0 { 1.0 } else { 0.0 }
        }
        AveragedInvertedCdf => {
            if g > 0.0 { 1.0 } else { 0.5 }
        }
        ClosestObservation => {
            if g == 0.0 && (j as i64) % 2 == 0 { 0.0 } else { 1.0 }
        }
        _ => g,
    };
    let at = |k: f64| sorted[(k.clamp(1.0, nf) as usize) - 1];
    let lo = at(j);
    let hi = at(j + 1.0);
    if gamma == 0.0 {
        lo
    } else if gamma == 1.0 {
        hi
    } else {
        lo + gamma * (hi - lo)
    }
}

fn sorted_copy(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(domain("quantile of an empty sample"));
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(domain("sample contains NaN"));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn quantile_by_rank(sample: &[f64], p: f64, scheme: InterpolationScheme) -> Result<f64> {
    check_probability(p, "p")?;
    Ok(quantile_sorted(&sorted_copy(sample)?, p, scheme))
}

/// Width `r_{(1+p)/2} - r_{(1-p)/2}` of the central `p` interval.
pub fn interval_function(sample: &[f64], p: f64, scheme: InterpolationScheme) -> Result<f64> {
    check_probability(p, "p")?;
    let sorted = sorted_copy(sample)?;
    Ok(interval_function_sorted(&sorted, p, scheme))
}

pub fn interval_function_sorted(sorted: &[f64], p: f64, scheme: InterpolationScheme) -> f64 {
    let upper = quantile_sorted(sorted, (1.0 + p) / 2.0, scheme);
    let lower = quantile_sorted(sorted, (1.0 - p) / 2.0, scheme);
    (upper - lower).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{normal_quantile, DistributionSpec, Rng};
    use proptest::prelude::*;
    use InterpolationScheme::*;

    fn q(xs: &[f64], p: f64, s: InterpolationScheme) -> f64 {
        quantile_by_rank(xs, p, s).unwrap()
    }

    #[test]
    fn names_round_trip_and_types() {
        for (i, s) in InterpolationScheme::ALL.iter().enumerate() {
            assert_eq!(s.name().parse::<InterpolationScheme>().unwrap(), *s);
            assert_eq!(s.hf_type() as usize, i + 1);
        }
        assert!("type10".parse::<InterpolationScheme>().is_err());
    }

    #[test]
    fn empirical_cdf_counts() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_cdf(&xs, 0.5).unwrap(), 0.0);
        assert_eq!(empirical_cdf(&xs, 4.0).unwrap(), 1.0);
        assert_eq!(empirical_cdf(&xs, 2.0).unwrap(), 0.5);
        assert!(empirical_cdf(&[], 1.0).is_err());
    }

    #[test]
    fn empirical_cdf_matches_count_oracle() {
        let mut rng = Rng::new(3);
        let xs: Vec<f64> = (0..257).map(|_| rng.standard_normal()).collect();
        for _ in 0..50 {
            let x = 2.0 * rng.standard_normal();
            let mut count = 0usize;
            for v in &xs {
                if *v <= x {
                    count += 1;
                }
            }
            assert_eq!(empirical_cdf(&xs, x).unwrap(), count as f64 / 257.0);
        }
    }

    #[test]
    fn odd_median() {
        let xs = [5.0, 1.0, 4.0, 2.0, 3.0];
        for s in InterpolationScheme::ALL {
            // Type 3 rounds n·p - 1/2 = 2 to the even rank x_(2); type 4
            // interpolates halfway between x_(2) and x_(3).
            let want = match s {
                ClosestObservation => 2.0,
                InterpolatedInvertedCdf => 2.5,
                _ => 3.0,
            };
            assert_eq!(q(&xs, 0.5, s), want, "{s}");
        }
    }

    #[test]
    fn hand_evaluated_cases() {
        assert_eq!(q(&[1.0, 2.0, 3.0, 4.0], 0.5, Linear), 2.5);
        assert_eq!(q(&[10.0, 20.0], 0.25, InvertedCdf), 10.0);
    }

    // Rows: p, then one value per scheme in Hyndman–Fan order.
    const GOLDEN_FIVE: [(f64, [f64; 9]); 6] = [
        (0.1, [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.4, 1.0, 1.0]),
        (0.3, [2.0, 2.0, 2.0, 1.5, 2.0, 1.8, 2.4, 1.933_333_333_333_333_3, 1.95]),
        (0.4, [2.0, 3.0, 2.0, 2.0, 3.0, 2.8, 3.2, 2.933_333_333_333_333_6, 2.95]),
        (0.5, [4.0, 4.0, 2.0, 3.0, 4.0, 4.0, 4.0, 4.0, 4.0]),
        (0.75, [8.0, 8.0, 8.0, 7.0, 10.0, 12.0, 8.0, 10.666_666_666_666_666, 10.5]),
        (0.95, [16.0, 16.0, 16.0, 14.0, 16.0, 16.0, 14.4, 16.0, 16.0]),
    ];

    const GOLDEN_FOUR: [(f64, [f64; 9]); 5] = [
        (0.1, [10.0, 10.0, 10.0, 10.0, 10.0, 10.0, 13.0, 10.0, 10.0]),
        (0.25, [10.0, 15.0, 10.0, 10.0, 15.0, 12.5, 17.5, 14.166_666_666_666_668, 14.375]),
        (0.5, [20.0, 25.0, 20.0, 20.0, 25.0, 25.0, 25.0, 25.0, 25.0]),
        (0.6, [30.0, 30.0, 20.0, 24.0, 29.0, 30.0, 28.0, 29.333_333_333_333_332, 29.25]),
        (0.9, [40.0, 40.0, 40.0, 36.0, 40.0, 40.0, 37.0, 40.0, 40.0]),
    ];

    #[test]
    fn golden_tables() {
        let five = [1.0, 2.0, 4.0, 8.0, 16.0];
        for (p, row) in GOLDEN_FIVE {
            for (s, want) in InterpolationScheme::ALL.iter().zip(row) {
                assert!((q(&five, p, *s) - want).abs() < 1e-12, "{s} p={p}");
            }
        }
        let four = [40.0, 10.0, 30.0, 20.0];
        for (p, row) in GOLDEN_FOUR {
            for (s, want) in InterpolationScheme::ALL.iter().zip(row) {
                assert!((q(&four, p, *s) - want).abs() < 1e-12, "{s} p={p}");
            }
        }
    }

    #[test]
    fn exact_rank_products_are_snapped() {
        // 10 × 0.3 is 3.0000000000000004 in binary floating point.
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(q(&xs, 0.3, InvertedCdf), 3.0);
        assert_eq!(q(&xs, 0.3, AveragedInvertedCdf), 3.5);
    }

    #[test]
    fn interval_function_cases() {
        let sym: Vec<f64> = (-5..=5).map(f64::from).collect();
        // Only the schemes whose plotting positions are symmetric in p and 1 - p.
        for s in [AveragedInvertedCdf, Hazen, Weibull, Linear, MedianUnbiased, NormalUnbiased] {
            let i = interval_function(&sym, 0.6, s).unwrap();
            assert!((i - 2.0 * q(&sym, 0.8, s)).abs() < 1e-12, "{s}");
        }
        let xs = DistributionSpec::normal(0.0, 1.0).sample(&mut Rng::new(21), 100_000).unwrap();
        let i = interval_function(&xs, 0.9, Linear).unwrap();
        let exact = 2.0 * normal_quantile(0.95).unwrap();
        assert!((i - exact).abs() < 0.05 && (exact - 3.2897).abs() < 1e-4);
        assert!(interval_function(&xs, 1e-6, Linear).unwrap() < 0.01);
    }

    proptest! {
        #[test]
        fn bounded_monotone_permutation_invariant(
            mut xs in prop::collection::vec(-100.0f64..100.0, 1..40),
            p1 in 0.001f64..0.999,
            p2 in 0.001f64..0.999,
            rot in 0usize..40,
        ) {
            let (lo_p, hi_p) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let before: Vec<f64> = InterpolationScheme::ALL.iter().map(|&s| q(&xs, lo_p, s)).collect();
            let k = rot % xs.len();
            xs.rotate_left(k);
            xs.reverse();
            for (i, &s) in InterpolationScheme::ALL.iter().enumerate() {
                let a = q(&xs, lo_p, s);
                let b = q(&xs, hi_p, s);
                prop_assert_eq!(a, before[i]);
                prop_assert!(a >= min && a <= max);
                prop_assert!(a <= b + 1e-12, "{} not monotone: {} > {}", s, a, b);
                let w1 = interval_function(&xs, lo_p, s).unwrap();
                let w2 = interval_function(&xs, hi_p, s).unwrap();
                prop_assert!(w1 <= w2 + 1e-12);
            }
        }

        #[test]
        fn schemes_coincide_at_exact_ranks(
            xs in prop::collection::btree_set(-1000i32..1000, 3..30),
            k_frac in 0.0f64..1.0,
        ) {
            // Each scheme has a level p_k at which n·p + m is exactly k (or, for
            // the step schemes, lands strictly inside (k - 1, k)); all nine then
            // return x_(k).
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let n = xs.len() as f64;
            let k = 2 + ((xs.len() - 3) as f64 * k_frac).round() as usize;
            let xk = xs[k - 1];
            for s in InterpolationScheme::ALL {
                let p = match s.alpha_beta() {
                    Some((a, b)) => (k as f64 - a) / (n + 1.0 - a - b),
                    None if s == ClosestObservation => k as f64 / n,
                    None => (k as f64 - 0.5) / n,
                };
                prop_assert_eq!(q(&xs, p, s), xk, "{} at p={}", s, p);
            }
        }
    }
}
