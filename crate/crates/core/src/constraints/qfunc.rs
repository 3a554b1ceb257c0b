//! Gaussian tail function, its inverse, and the scalings and box widths
//! derived from them.

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard Gaussian upper-tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    if x == f64::INFINITY {
        0.0
    } else if x == f64::NEG_INFINITY {
        1.0
    } else if x < 0.0 {
        1.0 - 0.5 * erfc(-x / SQRT_2)
    } else {
        0.5 * erfc(x / SQRT_2)
    }
}

fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`q_function`] on `(0, 1)`.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    if p > 0.5 {
        // Q(−x) = 1 − Q(x); work in the small tail for precision.
        return q_inverse_tail(1.0 - p).map(|x| -x);
    }
    q_inverse_tail(p)
}

/// `Q⁻¹(p)` for `p ≤ 0.5`, polished with Newton steps on the tail.
fn q_inverse_tail(p: f64) -> Result<f64> {
    let mut x = SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..4 {
        let pdf = gaussian_pdf(x);
        if pdf == 0.0 {
            break;
        }
        let step = (q_function(x) - p) / pdf;
        // Halley correction for the Gaussian tail: f'' / f' = −x
        let step = step / (1.0 + 0.5 * x * step);
        x += step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

fn check_sigma_pe(sigma: f64, pe: f64) -> Result<()> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if !(pe > 0.0 && pe < 1.0) {
        return Err(Error::InvalidProbability(pe));
    }
    Ok(())
}

/// `1 − √(1 − Pe)` without cancellation.
pub(crate) fn one_minus_sqrt_complement(pe: f64) -> f64 {
    pe / (1.0 + (1.0 - pe).sqrt())
}

/// Smallest 4-QAM scaling meeting `Pe` under zero forcing,
/// `β⁻ = −σ·Q⁻¹(√(1 − Pe))`.
pub fn min_scaling_4qam(sigma: f64, pe: f64) -> Result<f64> {
    check_sigma_pe(sigma, pe)?;
    Ok(sigma * q_inverse(one_minus_sqrt_complement(pe))?)
}

/// Smallest 16-QAM scaling meeting `Pe` at the inner points under zero
/// forcing, `β⁻ = σ·Q⁻¹(0.5 − 0.5·√(1 − Pe))`.
pub fn min_scaling_16qam(sigma: f64, pe: f64) -> Result<f64> {
    check_sigma_pe(sigma, pe)?;
    Ok(sigma * q_inverse(0.5 * one_minus_sqrt_complement(pe))?)
}

/// Smallest scaling for a replica constellation. Every replica point has a
/// two-sided decision interval on both axes, so the inner-point formula
/// applies for every order.
pub fn min_scaling_replica(sigma: f64, pe: f64) -> Result<f64> {
    min_scaling_16qam(sigma, pe)
}

/// Probability that `N(δ, σ²)` lands in `[−β, β]`:
/// `Q((δ − β)/σ) − Q((δ + β)/σ)`.
pub fn delta_probability(delta: f64, beta: f64, sigma: f64) -> f64 {
    1.0 - delta_tail(delta.abs(), beta, sigma)
}

/// Centered in-cell probability `α = 1 − 2Q(β/σ)`.
pub fn in_cell_probability(beta: f64, sigma: f64) -> f64 {
    1.0 - 2.0 * q_function(beta / sigma)
}

/// Out-of-cell probability `Q((β − δ)/σ) + Q((β + δ)/σ)`, increasing in `δ ≥ 0`.
fn delta_tail(delta: f64, beta: f64, sigma: f64) -> f64 {
    q_function((beta - delta) / sigma) + q_function((beta + delta) / sigma)
}

/// Finds `δ ≥ 0` with `Q((δ − β)/σ) − Q((δ + β)/σ) = target` by bisection on
/// `[0, β + 10σ]`. The left side is even in `δ`, maximal at `δ = 0` and
/// strictly decreasing for `δ > 0`.
pub fn solve_delta(beta: f64, sigma: f64, target: f64) -> Result<f64> {
    if !(beta > 0.0 && sigma > 0.0) {
        return Err(Error::InvalidParameter("beta and sigma must be positive".into()));
    }
    if !(target < 1.0) {
        return Err(Error::InfeasibleTarget {
            target,
            max: in_cell_probability(beta, sigma),
        });
    }
    let tail_target = 1.0 - target;
    let tail_at_zero = delta_tail(0.0, beta, sigma);
    if tail_target <= tail_at_zero {
        // Accept rounding-level overshoot so that β = β⁻ yields δ₀ = 0.
        if tail_at_zero - tail_target <= 8.0 * f64::EPSILON * tail_at_zero.max(1e-300) + 1e-16 {
            return Ok(0.0);
        }
        return Err(Error::InfeasibleTarget {
            target,
            max: 1.0 - tail_at_zero,
        });
    }
    let mut hi = beta + 10.0 * sigma;
    let floor = q_function((hi - beta) / sigma) - q_function((hi + beta) / sigma);
    if target < floor {
        return Err(Error::BracketFailure { target, floor });
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if delta_tail(mid, beta, sigma) < tail_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_lo = (delta_tail(lo, beta, sigma) - tail_target).abs();
    let r_hi = (delta_tail(hi, beta, sigma) - tail_target).abs();
    Ok(if r_lo <= r_hi { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson integration of the Gaussian density over `[x, x + span]`.
    fn tail_by_quadrature(x: f64) -> f64 {
        let span = 40.0;
        let n = 400_000;
        let h = span / n as f64;
        let mut acc = gaussian_pdf(x) + gaussian_pdf(x + span);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * gaussian_pdf(x + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn q_function_reference_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert_eq!(q_function(f64::NEG_INFINITY), 1.0);
        assert_eq!(q_function(f64::INFINITY), 0.0);
        let oracle = tail_by_quadrature(3.2905);
        assert!((oracle - 5.0e-4).abs() < 1e-6);
        assert!((q_function(3.2905) - oracle).abs() < 1e-12);
        let (q, o) = (q_function(-1.3), tail_by_quadrature(-1.3));
        assert!((q - o).abs() < 1e-12, "{q} {o}");
    }

    #[test]
    fn q_function_tabulated_values() {
        let table = [
            (0.3, 0.3820885778110474),
            (1.0, 0.15865525393145707),
            (2.5, 0.006209665325776132),
            (3.0, 0.0013498980316300933),
            (5.0, 2.866515718791933e-07),
            (8.0, 6.22096057427174e-16),
        ];
        for (x, q) in table {
            assert!(((q_function(x) - q) / q).abs() < 1e-12, "x={x}");
            assert!((q_function(-x) - (1.0 - q)).abs() < 1e-15, "x=-{x}");
        }
    }

    #[test]
    fn q_inverse_is_an_inverse() {
        assert_eq!(q_inverse(0.5).unwrap(), 0.0);
        for i in 0..=120 {
            let x = -4.0 + 0.1 * i as f64;
            let p = q_function(x);
            let back = q_inverse(p).unwrap();
            assert!((back - x).abs() < 1e-9, "x={x} back={back}");
            assert!(((q_function(back) - p) / p).abs() < 1e-12);
        }
        assert!(q_inverse(0.0).is_err());
        assert!(q_inverse(1.0).is_err());
        assert!(q_inverse(f64::NAN).is_err());
    }

    #[test]
    fn q_inverse_against_bisection() {
        let p = (1.0f64 - 1e-3).sqrt();
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if q_function(mid) > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = q_inverse(p).unwrap();
        assert!((x - lo).abs() < 1e-9);
        assert!((x + 3.2905).abs() < 1e-3);
    }

    #[test]
    fn minimum_scalings() {
        let sigma = std::f64::consts::FRAC_1_SQRT_2;
        let b4 = min_scaling_4qam(sigma, 1e-3).unwrap();
        let b16 = min_scaling_16qam(sigma, 1e-3).unwrap();
        assert!((b4 - 2.326704).abs() < 1e-5, "{b4}");
        assert!((b16 - 2.461219).abs() < 1e-5, "{b16}");
        assert!(b16 > b4);
        assert!(min_scaling_4qam(sigma, 1.0 - 1e-12).unwrap() < 1e-5);
        let doubled = min_scaling_4qam(2.0 * sigma, 1e-3).unwrap();
        assert!((doubled - 2.0 * b4).abs() < 1e-12);
        // 0.5 − 0.5√(1 − Pe) = 0.25 at Pe = 0.75
        let b = min_scaling_16qam(1.3, 0.75).unwrap();
        assert!((b - 1.3 * q_inverse(0.25).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn delta_at_minimum_scaling_is_zero() {
        let sigma = std::f64::consts::FRAC_1_SQRT_2;
        let pe: f64 = 1e-3;
        let beta = min_scaling_16qam(sigma, pe).unwrap();
        let target = (1.0 - pe).sqrt();
        let d0 = solve_delta(beta, sigma, target).unwrap();
        assert!(d0 < 1e-6, "{d0}");
        assert!((delta_probability(d0, beta, sigma) - target).abs() < 1e-10);
    }

    #[test]
    fn delta_errors() {
        assert!(matches!(
            solve_delta(1.0, 1.0, 0.9),
            Err(Error::InfeasibleTarget { .. })
        ));
        assert!(matches!(
            solve_delta(1.0, 1.0, 1e-30),
            Err(Error::BracketFailure { .. })
        ));
    }

    #[test]
    fn delta_roots_against_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let sigma: f64 = rng.random_range(0.2..1.5);
            let beta = sigma * rng.random_range(3.6..6.0);
            let max = in_cell_probability(beta, sigma);
            let t1 = rng.random_range(0.5..max);
            let t2 = rng.random_range(0.5..max);
            let (t1, t2) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let d1 = solve_delta(beta, sigma, t1).unwrap();
            let d2 = solve_delta(beta, sigma, t2).unwrap();
            assert!((delta_probability(d1, beta, sigma) - t1).abs() < 1e-12);
            assert!((delta_probability(d2, beta, sigma) - t2).abs() < 1e-12);
            assert!(d1 >= d2);
            // brute-force scan: the first grid point whose in-cell mass drops below t1
            let step = 1e-4 * sigma;
            let mut d = 0.0;
            while delta_probability(d, beta, sigma) >= t1 {
                d += step;
            }
            assert!((d - d1).abs() <= step);
        }
    }
}
