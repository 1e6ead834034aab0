//! Cutting-and-stacking towers.
//!
//! Stage `n` holds `c_n` columns of intervals of common width `ε_n`. Passing to
//! stage `n+1`, every column is cut vertically into `k_n` subcolumns of width
//! `ε_{n+1} = ε_n / k_n`; the `c_n k_n` subcolumns are stacked, in order, into
//! `c_{n+1}` new columns and `spacers` fresh levels are put on top of each.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Interval width arithmetic: `f64` or exact `BigRational`.
pub trait Width: Clone + Debug + PartialOrd + Send + Sync {
    fn from_ratio(num: u64, den: u64) -> Self;
    fn div_count(&self, k: u64) -> Self;
    fn mul_count(&self, k: u64) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn is_positive(&self) -> bool;
    fn to_f64(&self) -> f64;
    /// Natural logarithm, rounded to `f64`.
    fn ln(&self) -> f64;
}

impl Width for f64 {
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn div_count(&self, k: u64) -> Self {
        self / k as f64
    }

    fn mul_count(&self, k: u64) -> Self {
        self * k as f64
    }

    fn plus(&self, other: &Self) -> Self {
        self + other
    }

    fn is_positive(&self) -> bool {
        *self > 0.0
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
}

fn ln_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit value");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

impl Width for BigRational {
    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(num.into(), den.into())
    }

    fn div_count(&self, k: u64) -> Self {
        self / BigInt::from(k)
    }

    fn mul_count(&self, k: u64) -> Self {
        self * BigInt::from(k)
    }

    fn plus(&self, other: &Self) -> Self {
        self + other
    }

    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }

    fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        ToPrimitive::to_f64(self).unwrap_or_else(|| Width::ln(self).exp())
    }

    fn ln(&self) -> f64 {
        ln_bigint(self.numer()) - ln_bigint(self.denom())
    }
}

/// One schedule row: how stage `n` becomes stage `n+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub cuts: u64,
    pub columns: u64,
    #[serde(default)]
    pub spacers: u64,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerSchedule {
    /// Initial width `ε_0` as `(numerator, denominator)`.
    pub epsilon0: (u64, u64),
    /// Heights of the stage-0 columns.
    #[serde(default = "default_initial")]
    pub initial_heights: Vec<u64>,
    pub stages: Vec<StageSpec>,
}

fn default_initial() -> Vec<u64> {
    vec![1]
}

impl TowerSchedule {
    pub fn rank_one(stages: usize) -> Self {
        Self {
            epsilon0: (1, 1),
            initial_heights: vec![1],
            stages: vec![
                StageSpec {
                    cuts: 2,
                    columns: 1,
                    spacers: 0
                };
                stages
            ],
        }
    }

    /// `cols` columns throughout, each cut in two.
    pub fn finite_rank(cols: u64, stages: usize) -> Self {
        Self {
            epsilon0: (1, 1),
            initial_heights: vec![1; cols as usize],
            stages: vec![
                StageSpec {
                    cuts: 2,
                    columns: cols,
                    spacers: 0
                };
                stages
            ],
        }
    }

    /// Halving widths with `c_n = ⌈1/(ε_n log(1/ε_n))⌉`, clamped to what the
    /// previous stage can supply.
    pub fn criterion_violating(stages: usize) -> Self {
        let mut rows = Vec::with_capacity(stages);
        let mut prev = 1u64;
        for n in 1..=stages as i32 {
            let eps = 2f64.powi(-n);
            let want = (1.0 / (eps * (1.0 / eps).ln())).ceil() as u64;
            let c = want.clamp(1, prev * 2);
            rows.push(StageSpec {
                cuts: 2,
                columns: c,
                spacers: 0,
            });
            prev = c;
        }
        Self {
            epsilon0: (1, 1),
            initial_heights: vec![1],
            stages: rows,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage<W> {
    pub n: usize,
    /// Cuts applied when leaving this stage (`None` for the last stage).
    pub cuts: Option<u64>,
    pub columns: u64,
    pub heights: Vec<u64>,
    /// Spacer levels put on each column when this stage was formed.
    pub spacers: u64,
    #[serde(skip)]
    pub epsilon: W,
    #[serde(skip)]
    pub total_mass: W,
}

#[derive(Debug, Clone)]
pub struct TowerSystem<W> {
    stages: Vec<Stage<W>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionVerdict {
    /// Sequence fell below the tolerance.
    Vanishing,
    /// Sequence stayed above the floor over the second half of the stages.
    BoundedAway,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    /// `(n, c_n ε_n log(1/ε_n))`.
    pub sequence: Vec<(usize, f64)>,
    pub verdict: CriterionVerdict,
}

/// Builds the tower described by `schedule`.
pub fn build_tower<W: Width>(schedule: &TowerSchedule) -> Result<TowerSystem<W>> {
    let (num, den) = schedule.epsilon0;
    if num == 0 || den == 0 {
        return Err(Error::InvalidSchedule("ε_0 must be a positive ratio".into()));
    }
    if schedule.initial_heights.is_empty() || schedule.initial_heights.contains(&0) {
        return Err(Error::InvalidSchedule(
            "initial columns must have positive height".into(),
        ));
    }
    let eps0 = W::from_ratio(num, den);
    let heights = schedule.initial_heights.clone();
    let mass = eps0.mul_count(checked_total(&heights)?);
    let mut stages = vec![Stage {
        n: 0,
        cuts: None,
        columns: heights.len() as u64,
        heights,
        spacers: 0,
        epsilon: eps0,
        total_mass: mass,
    }];
    for (i, row) in schedule.stages.iter().enumerate() {
        if row.cuts < 2 {
            return Err(Error::InvalidSchedule(format!(
                "stage {i}: {} cut(s) leaves ε_n constant, so ε_n does not tend to 0",
                row.cuts
            )));
        }
        let prev = stages.last_mut().expect("stage 0");
        prev.cuts = Some(row.cuts);
        let pieces = prev
            .columns
            .checked_mul(row.cuts)
            .ok_or_else(|| Error::InvalidSchedule(format!("stage {i}: subcolumn count overflows")))?;
        if row.columns == 0 || row.columns > pieces {
            return Err(Error::InvalidSchedule(format!(
                "stage {i}: {} columns cannot be formed from {pieces} subcolumns",
                row.columns
            )));
        }
        let sub: Vec<u64> = prev
            .heights
            .iter()
            .flat_map(|&h| std::iter::repeat_n(h, row.cuts as usize))
            .collect();
        let base = pieces / row.columns;
        let extra = pieces % row.columns;
        let mut heights = Vec::with_capacity(row.columns as usize);
        let mut at = 0usize;
        for j in 0..row.columns {
            let take = (base + u64::from(j < extra)) as usize;
            let h = checked_total(&sub[at..at + take])?
                .checked_add(row.spacers)
                .ok_or_else(|| Error::InvalidSchedule("column height overflows u64".into()))?;
            heights.push(h);
            at += take;
        }
        let epsilon = prev.epsilon.div_count(row.cuts);
        let total_mass = epsilon.mul_count(checked_total(&heights)?);
        stages.push(Stage {
            n: i + 1,
            cuts: None,
            columns: row.columns,
            heights,
            spacers: row.spacers,
            epsilon,
            total_mass,
        });
    }
    Ok(TowerSystem { stages })
}

fn checked_total(h: &[u64]) -> Result<u64> {
    h.iter()
        .try_fold(0u64, |acc, &x| acc.checked_add(x))
        .ok_or_else(|| Error::InvalidSchedule("tower height overflows u64".into()))
}

impl<W: Width> TowerSystem<W> {
    pub fn stages(&self) -> &[Stage<W>] {
        &self.stages
    }

    pub fn epsilon(&self, n: usize) -> &W {
        &self.stages[n].epsilon
    }

    pub fn total_mass(&self, n: usize) -> &W {
        &self.stages[n].total_mass
    }

    pub fn is_rank_one(&self) -> bool {
        self.stages.iter().all(|s| s.columns == 1)
    }

    pub fn max_columns(&self) -> u64 {
        self.stages.iter().map(|s| s.columns).max().unwrap_or(0)
    }

    /// `c_n ε_n log(1/ε_n)` for every stage.
    pub fn criterion_sequence(&self) -> Vec<(usize, f64)> {
        self.stages
            .iter()
            .map(|s| {
                let l = -s.epsilon.ln();
                // c ε log(1/ε) computed in log space to survive tiny ε.
                let v = if l <= 0.0 {
                    s.columns as f64 * s.epsilon.to_f64() * l
                } else {
                    ((s.columns as f64).ln() - l + l.ln()).exp()
                };
                (s.n, v)
            })
            .collect()
    }

    /// Classifies the criterion sequence: vanishing once it drops below
    /// `tol`, bounded away once its second half stays above `floor`.
    pub fn criterion(&self, tol: f64, floor: f64) -> CriterionReport {
        let sequence = self.criterion_sequence();
        let last = sequence.last().map_or(f64::NAN, |s| s.1);
        let half = &sequence[sequence.len() / 2..];
        let verdict = if sequence.len() > 1 && last < tol {
            CriterionVerdict::Vanishing
        } else if sequence.len() > 1 && half.iter().all(|s| s.1 >= floor) {
            CriterionVerdict::BoundedAway
        } else {
            CriterionVerdict::Inconclusive
        };
        CriterionReport { sequence, verdict }
    }
}

impl TowerSystem<BigRational> {
    /// `ε_{n+1} k_n = ε_n` at every stage, exactly.
    pub fn widths_consistent(&self) -> bool {
        self.stages.windows(2).all(|w| {
            let k = w[0].cuts.expect("non-final stage");
            w[1].epsilon.mul_count(k) == w[0].epsilon
        }) && self.stages.iter().all(|s| Width::is_positive(&s.epsilon))
            && self.stages.windows(2).all(|w| w[1].epsilon < w[0].epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn rank_one_halving() {
        let t: TowerSystem<BigRational> = build_tower(&TowerSchedule::rank_one(20)).unwrap();
        assert!(t.is_rank_one());
        assert!(t.widths_consistent());
        assert_eq!(t.epsilon(20), &BigRational::new(1.into(), (1u64 << 20).into()));
        assert_eq!(t.stages()[20].heights, vec![1 << 20]);
        let seq = t.criterion_sequence();
        for &(n, v) in &seq {
            let want = (n as f64) * std::f64::consts::LN_2 / 2f64.powi(n as i32);
            assert!((v - want).abs() <= 1e-14 * want.max(1e-300), "{n}: {v} vs {want}");
        }
        assert!(seq[20].1 < 1e-3);
        assert_eq!(t.criterion(1e-3, 0.5).verdict, CriterionVerdict::Vanishing);
    }

    #[test]
    fn finite_rank_vanishes() {
        let t: TowerSystem<f64> = build_tower(&TowerSchedule::finite_rank(3, 25)).unwrap();
        assert_eq!(t.max_columns(), 3);
        assert_eq!(t.criterion(1e-3, 0.5).verdict, CriterionVerdict::Vanishing);
    }

    #[test]
    fn violating_schedule_is_flagged() {
        let t: TowerSystem<BigRational> = build_tower(&TowerSchedule::criterion_violating(22)).unwrap();
        let rep = t.criterion(1e-3, 0.5);
        assert_eq!(rep.verdict, CriterionVerdict::BoundedAway);
        for &(n, v) in &rep.sequence[2..] {
            assert!(v >= 1.0 - 1e-12, "stage {n}: {v}");
        }
    }

    #[test]
    fn spacers_grow_mass() {
        let sched = TowerSchedule {
            epsilon0: (1, 1),
            initial_heights: vec![1],
            stages: vec![
                StageSpec {
                    cuts: 3,
                    columns: 1,
                    spacers: 1
                };
                4
            ],
        };
        let t: TowerSystem<BigRational> = build_tower(&sched).unwrap();
        // h_{n+1} = 3 h_n + 1 and mass_{n+1} = mass_n + ε_{n+1}.
        assert_eq!(t.stages()[1].heights, vec![4]);
        assert_eq!(t.total_mass(1), &BigRational::new(4.into(), 3.into()));
        assert!(t.widths_consistent());
    }

    #[test]
    fn rejects_bad_schedules() {
        let mut s = TowerSchedule::rank_one(3);
        s.stages[1].cuts = 1;
        assert!(build_tower::<f64>(&s).is_err());
        let mut s = TowerSchedule::rank_one(3);
        s.stages[0].columns = 3;
        assert!(build_tower::<f64>(&s).is_err());
        let mut s = TowerSchedule::rank_one(3);
        s.epsilon0 = (0, 1);
        assert!(build_tower::<f64>(&s).is_err());
    }

    #[test]
    fn big_rational_log_is_accurate() {
        let x = BigRational::new(BigInt::one(), BigInt::from(2).pow(3000));
        assert!((Width::ln(&x) + 3000.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }
}
