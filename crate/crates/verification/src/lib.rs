//! Brute-force reference computations used by the acceptance gate. Nothing
//! here calls into the library's own arithmetic; inputs are taken as exact
//! binary fractions and everything is done over the rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// The exact value of a finite f64.
pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

/// Exact `sum_j counts[j] * (max(means) - means[j])`.
pub fn exact_regret(counts: &[u64], means: &[f64]) -> BigRational {
    assert_eq!(counts.len(), means.len());
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = exact(best);
    counts
        .iter()
        .zip(means)
        .fold(BigRational::zero(), |acc, (&n, &m)| {
            acc + BigRational::from_integer(BigInt::from(n)) * (&best - exact(m))
        })
}

/// Spacing between `x` and the next float away from zero.
pub fn ulp(x: f64) -> BigRational {
    let a = x.abs();
    exact(f64::from_bits(a.to_bits() + 1)) - exact(a)
}

/// Whether `value` lies within one unit in its last place of `target`.
pub fn within_one_ulp(value: f64, target: &BigRational) -> bool {
    (exact(value) - target).abs() <= ulp(value)
}

/// Smallest gap between the best mean and any other distinct mean, exactly.
pub fn exact_min_gap(means: &[f64]) -> Option<BigRational> {
    let best = exact(means.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    means
        .iter()
        .map(|&m| &best - exact(m))
        .filter(|g| g.is_positive())
        .min()
}

/// Smallest integer `r >= 0` with `2^r >= ratio`, for positive `ratio`.
pub fn ceil_log2(ratio: &BigRational) -> u64 {
    assert!(ratio.is_positive());
    let two = BigRational::from_integer(BigInt::from(2));
    let mut power = BigRational::one();
    let mut r = 0;
    while &power < ratio {
        power *= &two;
        r += 1;
    }
    r
}

/// `ceil(log2(2 / gap))` for the smallest gap of `means`.
pub fn round_bound(means: &[f64]) -> u64 {
    let gap = exact_min_gap(means).expect("instance has a positive gap");
    ceil_log2(&(BigRational::from_integer(BigInt::from(2)) / gap))
}

/// Number of halvings from `2^-a` down to `2^-b` or below.
pub fn halvings(a: i32, b: i32) -> u64 {
    (b - a).max(0) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ulp_of_one() {
        assert_eq!(ulp(1.0), exact(f64::EPSILON));
        assert!(within_one_ulp(0.1 + 0.2, &(exact(0.1) + exact(0.2))));
        assert!(!within_one_ulp(0.3, &exact(0.31)));
    }

    #[test]
    fn regret_by_hand() {
        // 3 pulls of an arm 0.5 below the best: exactly 1.5.
        let r = exact_regret(&[7, 3], &[1.0, 0.5]);
        assert_eq!(r, BigRational::new(3.into(), 2.into()));
    }

    #[test]
    fn log_bounds() {
        assert_eq!(round_bound(&[0.9, 0.8, 0.5, 0.3]), 5);
        assert_eq!(round_bound(&[1.0, 0.9375]), 5);
        assert_eq!(round_bound(&[0.9, 0.6]), 3);
        assert_eq!(ceil_log2(&BigRational::one()), 0);
        assert_eq!(halvings(1, 24), 23);
    }
}
