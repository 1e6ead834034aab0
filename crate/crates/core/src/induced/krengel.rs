//! Krengel entropy of a recurrent Markov shift: `Σ_a q_a Σ_b p_{a,b} log(1/p_{a,b})`.

use crate::error::{Error, Result};
use crate::induced::estimate::{EntropyEstimate, Method};
use crate::numerics::KahanSum;
use crate::scalar::Real;
use crate::systems::{ChainKind, MarkovSystem, State};

/// Partial sums above this many nats certify divergence.
pub const DIVERGENCE_CAP: f64 = 100.0;

/// Certificate for an infinite value: the partial sum over the listed number
/// of states already exceeds the cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceCertificate {
    pub states_used: u64,
    pub partial_sum: f64,
}

/// States of ℤ in the order `c, c+1, c−1, c+2, c−2, …`.
pub(crate) fn outward(center: State) -> impl Iterator<Item = State> {
    (0i64..).flat_map(move |k| {
        if k == 0 {
            vec![center]
        } else {
            vec![center + k, center - k]
        }
    })
}

/// Sums `q_a · row_entropy` over states until the running total exceeds the
/// cap. Every state contributes the same positive amount for walks.
pub(crate) fn certify_walk_divergence(per_state: f64, center: State, cap: f64) -> DivergenceCertificate {
    let mut acc = KahanSum::new();
    let mut used = 0u64;
    for _ in outward(center) {
        acc.add(per_state);
        used += 1;
        if acc.value() > cap {
            break;
        }
    }
    DivergenceCertificate {
        states_used: used,
        partial_sum: acc.value(),
    }
}

fn row_entropy<R: Real>(entries: &[(State, R)]) -> R {
    let s: KahanSum = entries.iter().map(|e| e.1.neg_x_log_x().as_f64()).collect();
    R::lit(s.value())
}

/// Krengel entropy from the row-entropy formula.
///
/// Renewal chains add the closed-form enclosure for the jumps above the
/// window; walks with a nondeterministic step law return `∞` with a
/// certificate; general chains with truncated rows return a lower bound
/// (`upper = ∞`).
pub fn krengel_entropy_markov<R: Real>(sys: &MarkovSystem<R>) -> Result<EntropyEstimate<R>> {
    if !sys.recurrence().is_recurrent() {
        return Err(Error::TransientRejected {
            operation: "krengel_entropy_markov",
        });
    }
    match sys.kind() {
        ChainKind::RandomWalk => {
            let steps = sys.step_law().expect("walk");
            let h = row_entropy(steps).as_f64();
            if h == 0.0 {
                return Ok(EntropyEstimate::exact(R::zero(), Method::ExactFormula));
            }
            let (lo, hi) = sys.window();
            let cert = certify_walk_divergence(h * sys.scale().as_f64(), (lo + hi) / 2, DIVERGENCE_CAP);
            Ok(EntropyEstimate::infinite(Method::ExactFormula)
                .with_meta("certificate", "divergent-partial-sums")
                .with_meta("states_used", cert.states_used)
                .with_meta_number("partial_sum", cert.partial_sum)
                .with_meta_number("cap", DIVERGENCE_CAP))
        }
        _ => {
            let mut acc = KahanSum::new();
            let mut unknown_escape = 0.0f64;
            for &a in sys.states() {
                let q = sys.stationary_at(a)?;
                let row = sys.row(a)?;
                acc.add((q * row_entropy(&row.entries)).as_f64());
                if row.escape > R::zero() && sys.kind() == ChainKind::GeneralTruncated {
                    unknown_escape = unknown_escape.max(row.escape.as_f64());
                }
            }
            let window = R::lit(acc.value());
            if let Some(f) = sys.renewal_law() {
                let (_, hi) = sys.window();
                let q1 = sys.stationary_at(1)?;
                let tail = f.entropy_beyond(hi as u64).scale(q1);
                if tail.hi.is_infinite() {
                    return Ok(EntropyEstimate::infinite(Method::ExactFormula)
                        .with_meta("certificate", "closed-form-tail")
                        .with_meta("tail", f.tail().map_or("none", |t| t.name())));
                }
                let (lo, up) = (window + tail.lo, window + tail.hi);
                return Ok(
                    EntropyEstimate::new((lo + up) / R::lit(2.0), lo, up, Method::ExactFormula)
                        .with_meta("window", hi)
                        .with_meta_number("tail_enclosure_width", tail.width().as_f64()),
                );
            }
            let est = if unknown_escape > 0.0 {
                EntropyEstimate::new(window, window, R::infinity(), Method::ExactFormula)
                    .with_meta("lower_bound_only", true)
                    .with_meta_number("max_row_escape", unknown_escape)
            } else {
                EntropyEstimate::exact(window, Method::ExactFormula)
            };
            Ok(est)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{build_general_chain, build_random_walk, build_renewal_chain, ReturnDistribution};

    #[test]
    fn examples() {
        let half = build_renewal_chain(ReturnDistribution::finite(vec![0.5, 0.5]).unwrap(), None).unwrap();
        assert!((krengel_entropy_markov(&half).unwrap().value - std::f64::consts::LN_2).abs() < 1e-16);

        let srw = build_random_walk(&[(1, 0.5), (-1, 0.5)], (-50, 50)).unwrap();
        let e = krengel_entropy_markov(&srw).unwrap();
        assert!(e.is_infinite());
        assert_eq!(e.meta["states_used"], 145);

        let transient = build_renewal_chain(ReturnDistribution::finite(vec![0.5]).unwrap(), None).unwrap();
        assert!(matches!(
            krengel_entropy_markov(&transient),
            Err(Error::TransientRejected { .. })
        ));

        let heavy = build_renewal_chain(ReturnDistribution::<f64>::inverse_log(), Some(64)).unwrap();
        assert!(krengel_entropy_markov(&heavy).unwrap().is_infinite());
    }

    #[test]
    fn telescoping_series() {
        let sys = build_renewal_chain(ReturnDistribution::<f64>::telescoping(), None).unwrap();
        let e = krengel_entropy_markov(&sys).unwrap();
        assert!(e.upper - e.lower < 1e-12);
        // Oracle: Σ log(n(n+1))/(n(n+1)) to 2·10^6, tail ∫ 2 ln x / x² ≈ 2(ln N + 1)/N.
        let mut s = KahanSum::new();
        let n_max = 2_000_000u64;
        for n in 1..=n_max {
            let x = n as f64;
            s.add((x * (x + 1.0)).ln() / (x * (x + 1.0)));
        }
        let n = n_max as f64;
        let tail = 2.0 * (n.ln() + 1.0) / n;
        assert!(
            e.value > s.value() && e.value < s.value() + tail * 1.01,
            "{} vs {}",
            e.value,
            s.value()
        );
    }

    #[test]
    fn scale_is_linear() {
        let sys = build_renewal_chain(ReturnDistribution::<f64>::telescoping(), Some(300)).unwrap();
        let a = krengel_entropy_markov(&sys).unwrap().value;
        let b = krengel_entropy_markov(&sys.with_scale(2.0).unwrap()).unwrap().value;
        assert!((b - 2.0 * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn truncated_general_chain_is_a_lower_bound() {
        let sys = build_general_chain::<f64>(
            vec![0, 1],
            vec![vec![(0, 0.25), (1, 0.25)], vec![(0, 1.0)]],
            Some(vec![1.0, 0.25]),
            Some(crate::systems::Recurrence::NullRecurrent),
        )
        .unwrap();
        let e = krengel_entropy_markov(&sys).unwrap();
        assert!(e.upper.is_infinite());
        assert!((e.lower - 2.0 * 0.25 * 4f64.ln()).abs() < 1e-15);
    }
}
