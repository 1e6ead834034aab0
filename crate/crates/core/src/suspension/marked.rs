//! Marked Poisson processes on an interval with piecewise-constant intensity
//! and mark kernel.
//!
//! Given the points, the marks are independent with laws `m_{t_i}`, so the
//! conditional entropy of the marks given the points is `Σ_i H(m_{t_i})`; its
//! mean is `∫ λ(t) H(m_t) dt`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::induced::estimate::{EntropyEstimate, Method};
use crate::numerics::KahanSum;
use crate::rng;
use crate::stats;
use crate::systems::distribution::MASS_TOL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub intensity: f64,
    pub marks: Vec<f64>,
}

impl Piece {
    fn mark_entropy(&self) -> f64 {
        self.marks.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkedModel {
    pub pieces: Vec<Piece>,
}

impl MarkedModel {
    /// Pieces must tile `[0, L]` left to right.
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        let m = Self { pieces };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.pieces.is_empty() {
            return bad("a marked model needs at least one piece".into());
        }
        let mut at = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            if p.start != at || !(p.end > p.start) || !p.end.is_finite() {
                return bad(format!("piece {i} does not continue the tiling at {at}"));
            }
            if !(p.intensity >= 0.0 && p.intensity.is_finite()) {
                return bad(format!("piece {i} has intensity {}", p.intensity));
            }
            let total: f64 = p.marks.iter().sum();
            if p.marks.is_empty() || p.marks.iter().any(|&x| !(x >= 0.0)) || (total - 1.0).abs() > MASS_TOL {
                return bad(format!("piece {i} marks are not a probability vector"));
            }
            at = p.end;
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.end)
    }

    /// `∫_0^L λ(t) H(m_t) dt = Σ λ_i |I_i| H(m_i)`.
    pub fn reference(&self) -> f64 {
        let s: KahanSum = self
            .pieces
            .iter()
            .map(|p| p.intensity * (p.end - p.start) * p.mark_entropy())
            .collect();
        s.value()
    }

    fn piece_at(&self, t: f64) -> &Piece {
        self.pieces
            .iter()
            .find(|p| t < p.end)
            .unwrap_or_else(|| self.pieces.last().expect("nonempty"))
    }

    /// One realization: points as `(position, mark)`.
    pub fn sample<G: Rng + ?Sized>(&self, g: &mut G) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        for p in &self.pieces {
            let m = p.intensity * (p.end - p.start);
            let n = if m > 0.0 {
                Poisson::new(m).expect("positive").sample(g) as usize
            } else {
                0
            };
            for _ in 0..n {
                let t = p.start + g.random::<f64>() * (p.end - p.start);
                let mut u = g.random::<f64>();
                let mut mark = p.marks.len() - 1;
                for (k, &w) in p.marks.iter().enumerate() {
                    if u < w {
                        mark = k;
                        break;
                    }
                    u -= w;
                }
                out.push((t, mark));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkedReport {
    pub estimate: EntropyEstimate<f64>,
    pub standard_error: f64,
    pub reference: f64,
    pub within_3se: bool,
}

/// Average over seeds of `Σ_{points} H(m_{t_i})`, with a ±3 SE interval,
/// next to the closed-form reference.
pub fn marked_conditional_entropy(model: &MarkedModel, n_seeds: usize, seed: u64) -> Result<MarkedReport> {
    model.validate()?;
    if n_seeds < 2 {
        return Err(Error::InvalidArgument("need at least two seeds".into()));
    }
    let values: Vec<f64> = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, i as u64);
            model
                .sample(&mut g)
                .iter()
                .map(|&(t, _)| model.piece_at(t).mark_entropy())
                .sum()
        })
        .collect();
    let (mean, se) = stats::mean_se(&values);
    let reference = model.reference();
    let within = (mean - reference).abs() <= 3.0 * se || (se == 0.0 && mean == reference);
    Ok(MarkedReport {
        estimate: EntropyEstimate::new(mean, mean - 3.0 * se, mean + 3.0 * se, Method::MonteCarlo)
            .with_meta("seeds", n_seeds),
        standard_error: se,
        reference,
        within_3se: within,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn piece(start: f64, end: f64, intensity: f64, marks: Vec<f64>) -> Piece {
        Piece {
            start,
            end,
            intensity,
            marks,
        }
    }

    #[test]
    fn references() {
        let m = MarkedModel::new(vec![piece(0.0, 1.0, 1.0, vec![0.5, 0.5])]).unwrap();
        assert!((m.reference() - 2f64.ln()).abs() < 1e-15);
        let d = MarkedModel::new(vec![piece(0.0, 3.0, 2.0, vec![1.0])]).unwrap();
        assert_eq!(d.reference(), 0.0);
        let r = marked_conditional_entropy(&d, 100, 1).unwrap();
        assert_eq!(r.estimate.value, 0.0);
        assert!(r.within_3se);
        assert!(MarkedModel::new(vec![piece(0.0, 1.0, 1.0, vec![0.5, 0.4])]).is_err());
        assert!(MarkedModel::new(vec![piece(0.0, 1.0, 1.0, vec![1.0]), piece(1.5, 2.0, 1.0, vec![1.0])]).is_err());
    }

    #[test]
    fn monte_carlo_agrees() {
        let m = MarkedModel::new(vec![
            piece(0.0, 0.5, 2.0, vec![0.5, 0.5]),
            piece(0.5, 2.0, 0.5, vec![0.2, 0.3, 0.5]),
        ])
        .unwrap();
        let r = marked_conditional_entropy(&m, 20_000, 2).unwrap();
        assert!(r.within_3se, "{r:?}");
    }

    #[test]
    fn error_shrinks_like_inverse_root() {
        let m = MarkedModel::new(vec![piece(0.0, 1.0, 1.0, vec![0.5, 0.5])]).unwrap();
        let a = marked_conditional_entropy(&m, 1000, 3).unwrap().standard_error;
        let b = marked_conditional_entropy(&m, 16_000, 3).unwrap().standard_error;
        let slope = (b / a).ln() / 16f64.ln();
        assert!((slope + 0.5).abs() < 0.1, "slope {slope}");
    }
}
