//! Entropy of a Poisson random variable and sums of it over partitions.

use crate::error::{Error, Result};
use crate::scalar::{Enclosure, Real};

/// Series terms are added until the certified tail drops below this.
pub const SERIES_TOL: f64 = 1e-14;

/// Certified enclosure of
/// `f(λ) = λ − λ log λ + e^{−λ} Σ_{k≥2} λ^k log(k!)/k!`.
///
/// Terms are formed in log space. Past the mode, the ratio of consecutive
/// terms is at most `r_k = λ/(k+1) · (1 + log(k+1)/log k!)`, which decreases
/// in `k`, so the tail after term `k` is at most `t_k r_k / (1 − r_k)`.
pub fn poisson_entropy_enclosure<R: Real>(lambda: R) -> Result<Enclosure<R>> {
    if lambda.is_nan() || lambda < R::zero() {
        return Err(Error::InvalidArgument(format!(
            "Poisson parameter must be ≥ 0, got {lambda}"
        )));
    }
    if lambda == R::zero() {
        return Ok(Enclosure::zero());
    }
    if lambda.is_infinite() {
        return Ok(Enclosure::point(R::infinity()));
    }
    let l = lambda.ln();
    let head = lambda - lambda * l;
    let mut ln_fact = R::lit(2f64.ln());
    let mut sum = R::zero();
    let mut comp = R::zero();
    let mut k = 2u64;
    loop {
        let kr = R::from_count(k);
        let term = (-lambda + kr * l - ln_fact + ln_fact.ln()).exp();
        // Neumaier summation in R.
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp = comp + ((sum - t) + term);
        } else {
            comp = comp + ((term - t) + sum);
        }
        sum = t;
        let next = R::from_count(k + 1);
        let r = lambda / next * (R::one() + next.ln() / ln_fact);
        if kr + R::one() > lambda && r < R::one() {
            let tail = term * r / (R::one() - r);
            if tail <= R::lit(SERIES_TOL) * (head.abs() + sum).max(R::lit(1e-300)) || tail == R::zero() {
                let v = head + sum + comp;
                let round = R::epsilon() * R::lit(4.0) * (head.abs() + sum) * R::from_count(k).sqrt();
                return Ok(Enclosure::new(v - round, v + tail + round));
            }
        }
        ln_fact = ln_fact + next.ln();
        k += 1;
    }
}

/// `f(λ)`, the entropy in nats of a Poisson(λ) variable.
pub fn poisson_entropy_function<R: Real>(lambda: R) -> Result<R> {
    poisson_entropy_enclosure(lambda).map(|e| e.mid())
}

/// `Σ f(μ(a))` over the cells of a partition; a cell of infinite measure
/// contributes nothing (its count is almost surely infinite).
pub fn suspension_partition_entropy<R: Real>(masses: &[R]) -> Result<R> {
    let infinite = masses.iter().filter(|m| m.is_infinite()).count();
    if infinite > 1 {
        return Err(Error::InvalidPartition(format!("{infinite} cells of infinite measure")));
    }
    let mut acc = R::zero();
    let mut terms: Vec<R> = Vec::with_capacity(masses.len());
    for &m in masses {
        if m.is_infinite() {
            continue;
        }
        terms.push(poisson_entropy_function(m)?);
    }
    // Sort so the value does not depend on the order of the cells.
    terms.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    for t in terms {
        acc = acc + t;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct summation to k = 60 with `f64` factorials.
    fn oracle(lambda: f64) -> f64 {
        let mut s = 0.0;
        let mut fact = 1.0f64;
        for k in 1..=60u32 {
            fact *= k as f64;
            if k >= 2 {
                s += lambda.powi(k as i32) * fact.ln() / fact;
            }
        }
        lambda - lambda * lambda.ln() + (-lambda).exp() * s
    }

    #[test]
    fn matches_direct_series() {
        for &l in &[0.01, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let e = poisson_entropy_enclosure(l).unwrap();
            let o = oracle(l);
            assert!(e.width() < 1e-12 * o.max(1.0), "width at {l}");
            assert!((e.mid() - o).abs() < 1e-12 * o.max(1.0), "{l}: {} vs {o}", e.mid());
        }
        assert_eq!(poisson_entropy_function(0.0f64).unwrap(), 0.0);
        assert!(poisson_entropy_function(-1.0f64).is_err());
    }

    #[test]
    fn quadratic_remainder_at_origin() {
        for &e in &[1e-1f64, 1e-2, 1e-3, 1e-4] {
            let f = poisson_entropy_function(e).unwrap();
            assert!((f - e + e * e.ln()).abs() <= e * e);
        }
    }

    #[test]
    fn large_lambda_matches_gaussian_entropy() {
        let l = 1e4f64;
        let f = poisson_entropy_function(l).unwrap();
        let g = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * l).ln();
        assert!((f - g).abs() < 1e-4);
    }

    #[test]
    fn partition_sums() {
        let f1 = poisson_entropy_function(1.0).unwrap();
        assert_eq!(suspension_partition_entropy(&[1.0, f64::INFINITY]).unwrap(), f1);
        assert_eq!(suspension_partition_entropy::<f64>(&[]).unwrap(), 0.0);
        let half = suspension_partition_entropy(&[0.5, 0.5]).unwrap();
        assert!((half - 2.0 * poisson_entropy_function(0.5f64).unwrap()).abs() < 1e-15);
        assert!(half > f1);
        assert!(suspension_partition_entropy(&[f64::INFINITY, f64::INFINITY]).is_err());
    }

    #[test]
    fn works_in_f32() {
        let f = poisson_entropy_function(1.0f32).unwrap();
        assert!((f as f64 - oracle(1.0)).abs() < 1e-5);
    }
}
