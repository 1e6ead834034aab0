//! Parry entropy `Σ_{a,b} μ([a,b]) log(μ([a]) / μ([a,b]))`, summed directly
//! over two-cylinders.

use crate::error::{Error, Result};
use crate::induced::estimate::{EntropyEstimate, Method};
use crate::induced::krengel::{outward, DIVERGENCE_CAP};
use crate::numerics::KahanSum;
use crate::scalar::Real;
use crate::systems::{cylinder_measure, ChainKind, MarkovSystem, State};

/// Successors of the renewal state 1 summed explicitly before switching to
/// the tail enclosure.
pub const RENEWAL_SUCCESSORS: u64 = 65_536;

fn term<R: Real>(sys: &MarkovSystem<R>, a: State, b: State, qa: f64) -> Result<f64> {
    let ab = cylinder_measure(sys, &[a, b])?.mass.as_f64();
    Ok(if ab > 0.0 { ab * (qa / ab).ln() } else { 0.0 })
}

/// Parry entropy of a recurrent chain.
pub fn parry_markov_step_entropy<R: Real>(sys: &MarkovSystem<R>) -> Result<EntropyEstimate<R>> {
    if !sys.recurrence().is_recurrent() {
        return Err(Error::TransientRejected {
            operation: "parry_markov_step_entropy",
        });
    }
    let mut acc = KahanSum::new();
    match sys.kind() {
        ChainKind::Renewal => {
            let f = sys.renewal_law().expect("renewal");
            let (_, hi) = sys.window();
            let q1 = sys.stationary_at(1)?.as_f64();
            let last = match f.support_len() {
                Some(l) => l,
                None => (hi as u64).max(RENEWAL_SUCCESSORS),
            };
            for b in 1..=last {
                acc.add(term(sys, 1, b as State, q1)?);
            }
            // From a > 1 the only successor is a − 1 and μ([a, a−1]) = μ([a]).
            for &a in sys.states().iter().filter(|&&a| a > 1) {
                let qa = sys.stationary_at(a)?.as_f64();
                acc.add(term(sys, a, a - 1, qa)?);
            }
            let tail = f.entropy_beyond(last).scale(R::lit(q1));
            if tail.hi.is_infinite() {
                return Ok(EntropyEstimate::infinite(Method::CylinderSum)
                    .with_meta("certificate", "closed-form-tail")
                    .with_meta("successors", last));
            }
            let s = R::lit(acc.value());
            let (lo, up) = (s + tail.lo, s + tail.hi);
            Ok(
                EntropyEstimate::new((lo + up) / R::lit(2.0), lo, up, Method::CylinderSum)
                    .with_meta("successors", last),
            )
        }
        ChainKind::RandomWalk => {
            let steps = sys.step_law().expect("walk");
            let (lo, hi) = sys.window();
            let mut used = 0u64;
            for a in outward((lo + hi) / 2) {
                let qa = sys.stationary_at(a)?.as_f64();
                for &(s, _) in steps {
                    acc.add(term(sys, a, a + s, qa)?);
                }
                used += 1;
                if acc.value() > DIVERGENCE_CAP {
                    return Ok(EntropyEstimate::infinite(Method::CylinderSum)
                        .with_meta("certificate", "divergent-partial-sums")
                        .with_meta("states_used", used)
                        .with_meta_number("partial_sum", acc.value()));
                }
                if acc.value() == 0.0 && used >= 1 {
                    // Deterministic step: every state contributes zero.
                    return Ok(EntropyEstimate::exact(R::zero(), Method::CylinderSum));
                }
            }
            unreachable!("outward never ends")
        }
        ChainKind::GeneralTruncated => {
            let mut escape = 0.0f64;
            for &a in sys.states() {
                let qa = sys.stationary_at(a)?.as_f64();
                for &b in sys.states() {
                    acc.add(term(sys, a, b, qa)?);
                }
                escape = escape.max(sys.row(a)?.escape.as_f64());
            }
            let s = R::lit(acc.value());
            if escape > 0.0 && !sys.is_closed_finite() {
                Ok(EntropyEstimate::new(s, s, R::infinity(), Method::CylinderSum).with_meta("lower_bound_only", true))
            } else {
                Ok(EntropyEstimate::exact(s, Method::CylinderSum))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::induced::krengel_entropy_markov;
    use crate::systems::{build_general_chain, build_random_walk, build_renewal_chain, ReturnDistribution};

    #[test]
    fn agrees_with_row_formula() {
        let chains = [
            build_renewal_chain(ReturnDistribution::finite(vec![0.5, 0.5]).unwrap(), None).unwrap(),
            build_renewal_chain(ReturnDistribution::finite(vec![0.2, 0.3, 0.5]).unwrap(), None).unwrap(),
            build_renewal_chain(ReturnDistribution::<f64>::telescoping(), Some(500)).unwrap(),
            build_general_chain(
                vec![0, 1, 2],
                vec![
                    vec![(0, 0.1), (1, 0.6), (2, 0.3)],
                    vec![(0, 0.5), (2, 0.5)],
                    vec![(0, 0.2), (1, 0.2), (2, 0.6)],
                ],
                None,
                None,
            )
            .unwrap(),
        ];
        for sys in &chains {
            let p = parry_markov_step_entropy(sys).unwrap();
            let k = krengel_entropy_markov(sys).unwrap();
            assert!(
                (p.value - k.value).abs() <= 1e-12 * k.value.max(1.0),
                "{} vs {}",
                p.value,
                k.value
            );
        }
    }

    #[test]
    fn infinite_cases() {
        let srw = build_random_walk(&[(1, 0.5), (-1, 0.5)], (-5, 5)).unwrap();
        assert!(parry_markov_step_entropy(&srw).unwrap().is_infinite());
        let heavy = build_renewal_chain(ReturnDistribution::<f64>::inverse_log(), Some(64)).unwrap();
        assert!(parry_markov_step_entropy(&heavy).unwrap().is_infinite());
        let drift = build_random_walk(&[(1, 1.0)], (-5, 5));
        if let Ok(d) = drift {
            if d.recurrence().is_recurrent() {
                assert_eq!(parry_markov_step_entropy(&d).unwrap().value, 0.0);
            }
        }
    }
}
