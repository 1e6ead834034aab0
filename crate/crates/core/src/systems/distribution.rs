//! Return-time laws `f_n` on `n ≥ 1`: an explicit prefix plus an optional
//! analytic tail.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integral_to_infinity, KahanSum};
use crate::scalar::{Enclosure, Real};

/// Tolerance on the total mass of a return law.
pub const MASS_TOL: f64 = 1e-12;

/// Explicit terms summed before switching to the Euler–Maclaurin tail.
const EM_START: u64 = 4096;

/// Closed-form tail `f_n` for `n` beyond the explicit prefix.
///
/// Every family is written as a telescoping difference so that the mass
/// beyond any index has a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TailDescriptor {
    /// `f_n = scale / (n (n + 1))`.
    Telescoping { scale: f64 },
    /// `f_n = scale (n^-a − (n + 1)^-a)`.
    PowerTelescoping { scale: f64, exponent: f64 },
    /// `f_n = scale (1 / ln(n + 1) − 1 / ln(n + 2))`. Finite mass, infinite entropy.
    InverseLog { scale: f64 },
}

impl TailDescriptor {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Telescoping { scale } | Self::InverseLog { scale } => scale.is_finite() && scale > 0.0,
            Self::PowerTelescoping { scale, exponent } => {
                scale.is_finite() && scale > 0.0 && exponent.is_finite() && exponent > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(format!("bad tail parameters {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Telescoping { .. } => "telescoping",
            Self::PowerTelescoping { .. } => "power-telescoping",
            Self::InverseLog { .. } => "inverse-log",
        }
    }

    /// Continuous extension of `f` (used by quadrature).
    pub fn density(&self, x: f64) -> f64 {
        match *self {
            Self::Telescoping { scale } => scale / (x * (x + 1.0)),
            Self::PowerTelescoping { scale, exponent } => {
                // x^-a (1 − (1 + 1/x)^-a), written to avoid cancellation.
                let t = -exponent * (1.0 / x).ln_1p();
                scale * x.powf(-exponent) * -t.exp_m1()
            }
            Self::InverseLog { scale } => {
                let (a, b) = ((x + 1.0).ln(), (x + 2.0).ln());
                scale * (b - a) / (a * b)
            }
        }
    }

    pub fn value<R: Real>(&self, n: u64) -> R {
        R::lit(self.density(n as f64))
    }

    /// `Σ_{k > n} f_k`.
    pub fn mass_beyond(&self, n: u64) -> f64 {
        let x = n as f64;
        match *self {
            Self::Telescoping { scale } => scale / (x + 1.0),
            Self::PowerTelescoping { scale, exponent } => scale * (x + 1.0).powf(-exponent),
            Self::InverseLog { scale } => scale / (x + 2.0).ln(),
        }
    }

    /// Total mass on `n ≥ 1`.
    pub fn full_mass(&self) -> f64 {
        self.mass_beyond(0)
    }

    /// Whether `Σ n f_n < ∞`.
    pub fn mean_finite(&self) -> bool {
        matches!(*self, Self::PowerTelescoping { exponent, .. } if exponent > 1.0)
    }

    /// Whether `Σ f_n log(1/f_n) = ∞` (known analytically).
    pub fn entropy_diverges(&self) -> bool {
        matches!(self, Self::InverseLog { .. })
    }

    /// Smallest `n > floor` with `Σ_{k>n} f_k < v`, for `0 < v ≤ mass_beyond(floor)`.
    /// Saturates at `u64::MAX`.
    pub fn inverse_survival(&self, v: f64, floor: u64) -> u64 {
        let guess = match *self {
            Self::Telescoping { scale } => scale / v - 1.0,
            Self::PowerTelescoping { scale, exponent } => (scale / v).powf(1.0 / exponent) - 1.0,
            Self::InverseLog { scale } => (scale / v).exp() - 2.0,
        };
        if !guess.is_finite() || guess >= 1.8e19 {
            return u64::MAX;
        }
        let mut n = (guess.max(0.0).floor() as u64).max(floor + 1);
        // Local repair of floating point error in the closed-form inverse.
        while n > floor + 1 && self.mass_beyond(n - 1) < v {
            n -= 1;
        }
        while self.mass_beyond(n) >= v {
            if n == u64::MAX {
                break;
            }
            n += 1;
        }
        n
    }

    /// Enclosure of `Σ_{k>n} f_k log(1/f_k)`.
    ///
    /// Terms up to a cutoff are summed explicitly; the rest uses
    /// Euler–Maclaurin with the integral done by quadrature. The enclosure
    /// half-width is the first neglected correction term, bounded via a
    /// numerical second derivative, plus rounding.
    pub fn entropy_beyond(&self, n: u64) -> Enclosure<f64> {
        if self.entropy_diverges() {
            return Enclosure::new(0.0, f64::INFINITY);
        }
        let g = |x: f64| {
            let f = self.density(x);
            if f > 0.0 {
                -f * f.ln()
            } else {
                0.0
            }
        };
        let start = (n + 1).max(EM_START);
        let mut acc: KahanSum = ((n + 1)..start).map(|k| g(k as f64)).collect();
        let m = start as f64;
        let h = (m * 1e-3).max(1.0);
        let d1 = (g(m + h) - g(m - h)) / (2.0 * h);
        let d2 = (g(m + h) - 2.0 * g(m) + g(m - h)) / (h * h);
        // Σ_{k ≥ m} g(k) = ∫_m^∞ g + g(m)/2 − g'(m)/12 + R, |R| ≤ |g''(m)|/12.
        acc.add(integral_to_infinity(g, m));
        acc.add(0.5 * g(m));
        acc.add(-d1 / 12.0);
        let v = acc.value();
        let half = d2.abs() / 12.0 + 1e-15 * v.abs() + 1e-17;
        Enclosure::new((v - half).max(0.0), v + half)
    }
}

/// Classification of a recurrent-or-not return law / chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recurrence {
    PositiveRecurrent,
    NullRecurrent,
    Transient,
}

impl Recurrence {
    pub fn is_recurrent(self) -> bool {
        !matches!(self, Recurrence::Transient)
    }
}

/// Probability law of the first return time to a renewal state.
#[derive(Debug, Clone)]
pub struct ReturnDistribution<R> {
    prefix: Vec<R>,
    tail: Option<TailDescriptor>,
    total: R,
    cdf: Vec<f64>,
}

impl<R: Real> ReturnDistribution<R> {
    /// Finitely supported law `f_1, …, f_N`.
    pub fn finite(prefix: Vec<R>) -> Result<Self> {
        Self::build(prefix, None)
    }

    /// Explicit prefix `f_1..f_N` followed by `tail` for `n > N`.
    pub fn with_tail(prefix: Vec<R>, tail: TailDescriptor) -> Result<Self> {
        tail.validate()?;
        Self::build(prefix, Some(tail))
    }

    /// As [`with_tail`](Self::with_tail), additionally checking the declared total mass.
    pub fn with_declared_total(prefix: Vec<R>, tail: Option<TailDescriptor>, declared: f64) -> Result<Self> {
        let dist = match tail {
            Some(t) => Self::with_tail(prefix, t)?,
            None => Self::finite(prefix)?,
        };
        let total = dist.total.as_f64();
        if (total - declared).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!(
                "prefix and tail integrate to {total}, declared total is {declared}"
            )));
        }
        Ok(dist)
    }

    /// `f_n = 1/(n(n+1))`: null-recurrent with finite entropy.
    pub fn telescoping() -> Self {
        Self::with_tail(Vec::new(), TailDescriptor::Telescoping { scale: 1.0 }).expect("valid")
    }

    /// `f_n = ln 2 (1/ln(n+1) − 1/ln(n+2))`: null-recurrent with infinite entropy.
    pub fn inverse_log() -> Self {
        Self::with_tail(
            Vec::new(),
            TailDescriptor::InverseLog {
                scale: std::f64::consts::LN_2,
            },
        )
        .expect("valid")
    }

    fn build(prefix: Vec<R>, tail: Option<TailDescriptor>) -> Result<Self> {
        if let Some((i, x)) = prefix
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x >= R::zero()))
        {
            return Err(Error::InvalidDistribution(format!(
                "f_{} = {x} is not a nonnegative real",
                i + 1
            )));
        }
        if prefix.is_empty() && tail.is_none() {
            return Err(Error::InvalidDistribution("empty return distribution".into()));
        }
        let mut acc = KahanSum::new();
        let mut cdf = Vec::with_capacity(prefix.len());
        for x in &prefix {
            acc.add(x.as_f64());
            cdf.push(acc.value());
        }
        if let Some(t) = &tail {
            acc.add(t.mass_beyond(prefix.len() as u64));
        }
        let total = acc.value();
        if total > 1.0 + MASS_TOL {
            return Err(Error::InvalidDistribution(format!("total mass {total} exceeds 1")));
        }
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("total mass is zero".into()));
        }
        Ok(Self {
            prefix,
            tail,
            total: R::lit(total),
            cdf,
        })
    }

    pub fn prefix(&self) -> &[R] {
        &self.prefix
    }

    pub fn tail(&self) -> Option<&TailDescriptor> {
        self.tail.as_ref()
    }

    pub fn total_mass(&self) -> R {
        self.total
    }

    /// `f_n` (zero for `n = 0`).
    pub fn prob(&self, n: u64) -> R {
        if n == 0 {
            return R::zero();
        }
        match self.prefix.get((n - 1) as usize) {
            Some(&x) => x,
            None => self.tail.map_or(R::zero(), |t| t.value(n)),
        }
    }

    /// Index of the last positive term when the support is finite.
    pub fn support_len(&self) -> Option<u64> {
        if self.tail.is_some() {
            return None;
        }
        let last = self.prefix.iter().rposition(|x| *x > R::zero()).map_or(0, |i| i + 1);
        Some(last as u64)
    }

    /// `Σ_{k > n} f_k`.
    pub fn survival(&self, n: u64) -> R {
        let len = self.prefix.len() as u64;
        let tail = self.tail.map_or(0.0, |t| t.mass_beyond(n.max(len)));
        if n >= len {
            return R::lit(tail);
        }
        let mut acc = KahanSum::new();
        for x in &self.prefix[n as usize..] {
            acc.add(x.as_f64());
        }
        acc.add(tail);
        R::lit(acc.value())
    }

    /// `S(0), S(1), …, S(upto)` in one backward pass.
    pub fn survivals(&self, upto: u64) -> Vec<R> {
        let len = self.prefix.len() as u64;
        let top = upto.max(len);
        let mut out = vec![R::zero(); upto as usize + 1];
        let mut acc = KahanSum::new();
        acc.add(self.tail.map_or(0.0, |t| t.mass_beyond(top)));
        for n in (0..=top).rev() {
            if n <= upto {
                out[n as usize] = R::lit(acc.value());
            }
            if n > 0 {
                acc.add(self.prob(n).as_f64());
            }
        }
        out
    }

    pub fn mean_finite(&self) -> bool {
        self.tail.is_none_or(|t| t.mean_finite())
    }

    pub fn classify(&self) -> Recurrence {
        classify_recurrence(self)
    }

    /// Enclosure of `Σ_{k>n} f_k log(1/f_k)`.
    pub fn entropy_beyond(&self, n: u64) -> Enclosure<R> {
        let len = self.prefix.len() as u64;
        let explicit: KahanSum = self
            .prefix
            .iter()
            .skip(n as usize)
            .map(|x| x.neg_x_log_x().as_f64())
            .collect();
        let tail = self.tail.map_or(Enclosure::zero(), |t| t.entropy_beyond(n.max(len)));
        let e = tail.shift(explicit.value());
        Enclosure::new(R::lit(e.lo), R::lit(e.hi))
    }

    /// Enclosure of `H(f) = Σ f_n log(1/f_n)` in nats.
    pub fn entropy(&self) -> Enclosure<R> {
        self.entropy_beyond(0)
    }

    /// Draws a return time; `None` means the walker never returns
    /// (only possible for transient laws). Huge tail draws saturate at `u64::MAX`.
    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> Option<u64> {
        let u: f64 = rng.random();
        let prefix_mass = self.cdf.last().copied().unwrap_or(0.0);
        if u < prefix_mass {
            let i = self.cdf.partition_point(|&c| c <= u);
            return Some(i as u64 + 1);
        }
        let tail = self.tail?;
        let len = self.prefix.len() as u64;
        let tail_mass = tail.mass_beyond(len);
        let w = u - prefix_mass;
        if w >= tail_mass {
            return None;
        }
        let v = tail_mass - w;
        Some(tail.inverse_survival(v, len))
    }
}

/// Transient iff `Σ f < 1`; otherwise positive-recurrent iff `Σ n f_n < ∞`.
pub fn classify_recurrence<R: Real>(f: &ReturnDistribution<R>) -> Recurrence {
    if f.total_mass().as_f64() < 1.0 - MASS_TOL {
        Recurrence::Transient
    } else if f.mean_finite() {
        Recurrence::PositiveRecurrent
    } else {
        Recurrence::NullRecurrent
    }
}
