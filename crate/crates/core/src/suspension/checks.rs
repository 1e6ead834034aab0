//! Distributional checks on sampled suspensions: Poisson marginals,
//! independence over disjoint cells, stationarity, the covariance identity,
//! absence of multiple points, and scaling/superposition.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::induced::krengel_entropy_markov;
use crate::rng::{self, child_seed};
use crate::scalar::Real;
use crate::stats::{self, TestResult};
use crate::suspension::process::{evolve, sample_initial_configuration};
use crate::systems::{ChainKind, MarkovSystem, State};

/// Replicas per batch when collecting p-values for the KS sanity check.
pub const BATCH: usize = 200;

fn cell_mass<R: Real>(sys: &MarkovSystem<R>, cell: &[State]) -> Result<f64> {
    cell.iter().map(|&s| sys.stationary_at(s).map(|q| q.as_f64())).sum()
}

/// Window half-width (walks) or top (renewal) covering every state in `cells`.
fn window_for<R: Real>(sys: &MarkovSystem<R>, cells: &[&[State]]) -> Result<i64> {
    let all = cells.iter().flat_map(|c| c.iter().copied());
    match sys.kind() {
        ChainKind::Renewal => Ok(all.max().unwrap_or(1).max(1)),
        ChainKind::RandomWalk => {
            let (lo, hi) = sys.window();
            let c = lo + (hi - lo) / 2;
            Ok(all.map(|s| (s - c).abs()).max().unwrap_or(0))
        }
        ChainKind::GeneralTruncated => Err(Error::InvalidArgument(
            "general chains have no suspension sampler".into(),
        )),
    }
}

/// Cell counts at time `time(i) ≤ horizon` for replicas `i = 0..n`, each replica using
/// its own child seed.
fn replicate<R: Real>(
    sys: &MarkovSystem<R>,
    cells: &[&[State]],
    n: usize,
    seed: u64,
    horizon: u64,
    time: impl Fn(usize) -> u64 + Sync,
) -> Result<Vec<Vec<u64>>> {
    let w = window_for(sys, cells)?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let cfg = sample_initial_configuration(sys, w, horizon, child_seed(seed, i as u64))?;
            let t = time(i);
            if t == 0 {
                return Ok(cells.iter().map(|c| cfg.count_in(c)).collect());
            }
            let series = evolve(sys, &cfg, t)?;
            let (lo, _) = cfg.window;
            let row = series.at(t as usize);
            Ok(cells
                .iter()
                .map(|c| c.iter().map(|&s| row[(s - lo) as usize]).sum())
                .collect())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalReport {
    pub cell: Vec<State>,
    pub mass: f64,
    pub samples: usize,
    pub test: TestResult,
}

/// Chi-square fit of `N(cell)` across seeds to Poisson(`μ(cell)`).
pub fn poisson_marginal_check<R: Real>(
    sys: &MarkovSystem<R>,
    cell: &[State],
    n_seeds: usize,
    seed: u64,
) -> Result<MarginalReport> {
    let mass = cell_mass(sys, cell)?;
    let counts: Vec<u64> = replicate(sys, &[cell], n_seeds, seed, 0, |_| 0)?
        .into_iter()
        .map(|v| v[0])
        .collect();
    Ok(MarginalReport {
        cell: cell.to_vec(),
        mass,
        samples: n_seeds,
        test: stats::poisson_gof(&counts, mass)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IndependenceReport {
    pub chi_square: TestResult,
    pub g_test: TestResult,
    pub correlation: f64,
    /// KS test of uniformity of G-test p-values over batches of [`BATCH`].
    pub batch_p_values: Vec<f64>,
    pub ks: Option<TestResult>,
}

fn correlation(x: &[u64], y: &[u64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<u64>() as f64 / n;
    let my = y.iter().sum::<u64>() as f64 / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a as f64 - mx, b as f64 - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Independence of `N(A)` and `N(B)` for disjoint `A`, `B`.
pub fn independence_check<R: Real>(
    sys: &MarkovSystem<R>,
    a: &[State],
    b: &[State],
    n_seeds: usize,
    seed: u64,
) -> Result<IndependenceReport> {
    if a.iter().any(|s| b.contains(s)) {
        return Err(Error::InvalidArgument("cells must be disjoint".into()));
    }
    let rows = replicate(sys, &[a, b], n_seeds, seed, 0, |_| 0)?;
    let x: Vec<u64> = rows.iter().map(|r| r[0]).collect();
    let y: Vec<u64> = rows.iter().map(|r| r[1]).collect();
    let table = stats::pair_table(&x, &y)?;
    let batch_p_values: Vec<f64> = x
        .chunks_exact(BATCH)
        .zip(y.chunks_exact(BATCH))
        .map(|(cx, cy)| stats::pair_table(cx, cy).map(|t| stats::g_test_independence(&t).p_value))
        .collect::<Result<_>>()?;
    let ks = if batch_p_values.len() >= 10 {
        Some(stats::ks_uniform(&batch_p_values)?)
    } else {
        None
    };
    Ok(IndependenceReport {
        chi_square: stats::chi_square_independence(&table),
        g_test: stats::g_test_independence(&table),
        correlation: correlation(&x, &y),
        batch_p_values,
        ks,
    })
}

/// Homogeneity of the law of `N_t(cell)` over `t ∈ {0, horizon/2, horizon}`,
/// each time observed on its own replicas.
pub fn stationarity_check<R: Real>(
    sys: &MarkovSystem<R>,
    cell: &[State],
    horizon: u64,
    n_seeds: usize,
    seed: u64,
) -> Result<TestResult> {
    let times = [0, horizon / 2, horizon];
    let rows = replicate(sys, &[cell], n_seeds, seed, horizon, |i| times[i % 3])?;
    let mut groups: [Vec<u64>; 3] = Default::default();
    for (i, r) in rows.iter().enumerate() {
        groups[i % 3].push(r[0]);
    }
    stats::homogeneity(&[&groups[0], &groups[1], &groups[2]])
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    pub estimate: f64,
    pub standard_error: f64,
    /// `μ(A ∩ B)`.
    pub reference: f64,
    pub within_3se: bool,
}

/// Monte Carlo `E[(N(A) − μ(A))(N(B) − μ(B))]` against `μ(A ∩ B)`.
pub fn covariance_identity_check<R: Real>(
    sys: &MarkovSystem<R>,
    a: &[State],
    b: &[State],
    n_seeds: usize,
    seed: u64,
) -> Result<CovarianceReport> {
    let (ma, mb) = (cell_mass(sys, a)?, cell_mass(sys, b)?);
    let both: Vec<State> = a.iter().copied().filter(|s| b.contains(s)).collect();
    let reference = cell_mass(sys, &both)?;
    let rows = replicate(sys, &[a, b], n_seeds, seed, 0, |_| 0)?;
    let prods: Vec<f64> = rows.iter().map(|r| (r[0] as f64 - ma) * (r[1] as f64 - mb)).collect();
    let (estimate, standard_error) = stats::mean_se(&prods);
    Ok(CovarianceReport {
        estimate,
        standard_error,
        reference,
        within_3se: (estimate - reference).abs() <= 3.0 * standard_error,
    })
}

/// Intensity on `[0, length]`: a constant density plus optional atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineIntensity {
    pub length: f64,
    pub rate: f64,
    /// `(position, mass)` pairs.
    pub atoms: Vec<(f64, f64)>,
}

impl LineIntensity {
    pub fn uniform(length: f64, rate: f64) -> Self {
        Self {
            length,
            rate,
            atoms: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.length.is_finite()
            && self.length >= 0.0
            && self.rate.is_finite()
            && self.rate >= 0.0
            && self
                .atoms
                .iter()
                .all(|&(x, m)| (0.0..=self.length).contains(&x) && m.is_finite() && m >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad intensity {self:?}")))
        }
    }

    fn sample<G: Rng + ?Sized>(&self, g: &mut G) -> Vec<f64> {
        let mut pts = Vec::new();
        let draw = |m: f64, g: &mut G| {
            if m > 0.0 {
                Poisson::new(m).expect("positive").sample(g) as usize
            } else {
                0
            }
        };
        let n = draw(self.rate * self.length, g);
        pts.extend((0..n).map(|_| g.random::<f64>() * self.length));
        for &(x, m) in &self.atoms {
            let k = draw(m, g);
            pts.extend(std::iter::repeat_n(x, k));
        }
        pts
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiplicityReport {
    pub configurations: usize,
    pub points: u64,
    /// Pairs of equal coordinates within one configuration.
    pub coincidences: u64,
    pub passes: bool,
}

/// Counts exactly equal point coordinates within each sampled configuration.
pub fn no_multiplicity_check(intensity: &LineIntensity, n_seeds: usize, seed: u64) -> Result<MultiplicityReport> {
    intensity.validate()?;
    let per: Vec<(u64, u64)> = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, i as u64);
            let mut pts = intensity.sample(&mut g);
            pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            let c = pts.windows(2).filter(|w| w[0] == w[1]).count() as u64;
            (pts.len() as u64, c)
        })
        .collect();
    let points = per.iter().map(|p| p.0).sum();
    let coincidences = per.iter().map(|p| p.1).sum();
    Ok(MultiplicityReport {
        configurations: n_seeds,
        points,
        coincidences,
        passes: coincidences == 0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AdditivityReport {
    pub t: f64,
    pub s: f64,
    pub base: f64,
    /// `h` under `t·q`, and `t · h(q)`.
    pub scaled: f64,
    pub linearity_residual: f64,
    /// `|h((t + s) q) − (t h(q) + s h(q))|` relative to the larger side.
    pub additivity_residual: f64,
    /// Homogeneity of `N(cell)` between `(t+s)·q` samples and superposed
    /// `t·q ⊎ s·q` samples; `None` when `s = 0`.
    pub superposition: Option<TestResult>,
    /// Fit of the superposed counts to Poisson(`(t + s) μ(cell)`).
    pub superposition_fit: Option<TestResult>,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Scaling and additivity of the entropy in the intensity, checked exactly on
/// the formula and statistically on sampled configurations.
pub fn additivity_scaling_check<R: Real>(
    sys: &MarkovSystem<R>,
    t: f64,
    s: f64,
    cell: &[State],
    n_seeds: usize,
    seed: u64,
) -> Result<AdditivityReport> {
    if !(t > 0.0 && t.is_finite() && s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need t > 0 and s ≥ 0, got t = {t}, s = {s}"
        )));
    }
    let h = |c: f64| -> Result<f64> { Ok(krengel_entropy_markov(&sys.with_scale(R::lit(c))?)?.value.as_f64()) };
    let base = h(1.0)?;
    let scaled = h(t)?;
    let linearity_residual = rel(scaled, t * base);
    let additivity_residual = rel(h(t + s)?, t * base + s * base);
    let (superposition, superposition_fit) = if s > 0.0 {
        let st = sys.with_scale(R::lit(t))?;
        let ss = sys.with_scale(R::lit(s))?;
        let sts = sys.with_scale(R::lit(t + s))?;
        let w = window_for(sys, &[cell])?;
        let pairs: Vec<(u64, u64)> = (0..n_seeds)
            .into_par_iter()
            .map(|i| {
                let k = child_seed(seed, i as u64);
                let joint = sample_initial_configuration(&sts, w, 0, child_seed(k, 0))?.count_in(cell);
                let a = sample_initial_configuration(&st, w, 0, child_seed(k, 1))?;
                let b = sample_initial_configuration(&ss, w, 0, child_seed(k, 2))?;
                Ok((joint, a.union(&b)?.count_in(cell)))
            })
            .collect::<Result<_>>()?;
        let joint: Vec<u64> = pairs.iter().map(|p| p.0).collect();
        let sup: Vec<u64> = pairs.iter().map(|p| p.1).collect();
        let mass = (t + s) * cell_mass(sys, cell)?;
        (
            Some(stats::homogeneity(&[&joint, &sup])?),
            Some(stats::poisson_gof(&sup, mass)?),
        )
    } else {
        (None, None)
    };
    Ok(AdditivityReport {
        t,
        s,
        base,
        scaled,
        linearity_residual,
        additivity_residual,
        superposition,
        superposition_fit,
    })
}
