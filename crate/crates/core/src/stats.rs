//! Goodness-of-fit and independence tests used by the suspension checks.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::error::{Error, Result};

/// Smallest expected (or marginal) count a bin may have after pooling.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl TestResult {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }

    /// A test with nothing to test (a single pooled bin).
    fn vacuous() -> Self {
        Self {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        }
    }
}

/// Per-test level for `m` simultaneous tests at family level `alpha`.
pub fn bonferroni(alpha: f64, m: usize) -> f64 {
    alpha / m.max(1) as f64
}

fn chi2_sf(x: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).expect("positive dof").sf(x)
}

/// Groups consecutive bins (in order) so each group has weight at least
/// `min`; a short last group joins the previous one. Returns group ids.
fn pool(weights: &[f64], min: f64) -> Vec<usize> {
    let mut ids = vec![0; weights.len()];
    let mut g = 0;
    let mut acc = 0.0;
    let mut starts = vec![0];
    for (i, &w) in weights.iter().enumerate() {
        ids[i] = g;
        acc += w;
        if acc >= min && i + 1 < weights.len() {
            g += 1;
            acc = 0.0;
            starts.push(i + 1);
        }
    }
    if acc < min && g > 0 {
        for id in ids.iter_mut().skip(*starts.last().expect("nonempty")) {
            *id = g - 1;
        }
    }
    ids
}

/// Pearson chi-square goodness of fit. `expected` must sum to the number of
/// observations; adjacent bins are pooled until every expected count is at
/// least [`MIN_EXPECTED`].
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<TestResult> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::InvalidArgument("observed and expected bins differ".into()));
    }
    let ids = pool(expected, MIN_EXPECTED);
    let groups = ids.last().copied().unwrap_or(0) + 1;
    let mut o = vec![0.0; groups];
    let mut e = vec![0.0; groups];
    for ((&id, &ob), &ex) in ids.iter().zip(observed).zip(expected) {
        o[id] += ob as f64;
        e[id] += ex;
    }
    if groups < 2 {
        return Ok(TestResult::vacuous());
    }
    let stat: f64 = o.iter().zip(&e).map(|(o, e)| (o - e) * (o - e) / e).sum();
    Ok(TestResult {
        statistic: stat,
        dof: groups - 1,
        p_value: chi2_sf(stat, groups - 1),
    })
}

/// Chi-square test of integer samples against Poisson(λ).
pub fn poisson_gof(samples: &[u64], lambda: f64) -> Result<TestResult> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if lambda == 0.0 {
        let ok = samples.iter().all(|&x| x == 0);
        return Ok(TestResult {
            statistic: if ok { 0.0 } else { f64::INFINITY },
            dof: 0,
            p_value: if ok { 1.0 } else { 0.0 },
        });
    }
    let n = samples.len() as f64;
    let p = Poisson::new(lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let top = samples
        .iter()
        .copied()
        .max()
        .unwrap_or(0)
        .max((lambda + 10.0 * lambda.sqrt() + 10.0) as u64);
    let mut observed = vec![0u64; top as usize + 2];
    for &x in samples {
        observed[x as usize] += 1;
    }
    let mut expected: Vec<f64> = (0..=top).map(|k| n * p.pmf(k)).collect();
    let rest = (n - expected.iter().sum::<f64>()).max(0.0);
    expected.push(rest);
    chi_square_gof(&observed, &expected)
}

/// Contingency table of paired categorical samples, with categories of each
/// variable pooled (in sorted order) to marginal count ≥ [`MIN_EXPECTED`]
/// times the number of categories of the other variable.
pub fn pair_table(x: &[u64], y: &[u64]) -> Result<Vec<Vec<u64>>> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidArgument("paired samples differ in length".into()));
    }
    let cats = |v: &[u64]| {
        let mut m: BTreeMap<u64, f64> = BTreeMap::new();
        for &a in v {
            *m.entry(a).or_insert(0.0) += 1.0;
        }
        m
    };
    let (mx, my) = (cats(x), cats(y));
    let n = x.len() as f64;
    // Aim for ≥ 5 expected per cell: each marginal ≥ sqrt(5 n).
    let min = (MIN_EXPECTED * n).sqrt();
    let group = |m: &BTreeMap<u64, f64>| {
        let keys: Vec<u64> = m.keys().copied().collect();
        let w: Vec<f64> = m.values().copied().collect();
        let ids = pool(&w, min);
        let map: BTreeMap<u64, usize> = keys.into_iter().zip(ids.iter().copied()).collect();
        (map, ids.last().copied().unwrap_or(0) + 1)
    };
    let (gx, nx) = group(&mx);
    let (gy, ny) = group(&my);
    let mut t = vec![vec![0u64; ny]; nx];
    for (a, b) in x.iter().zip(y) {
        t[gx[a]][gy[b]] += 1;
    }
    Ok(t)
}

fn table_expectation(t: &[Vec<u64>]) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let rows: Vec<f64> = t.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let cols: Vec<f64> = (0..t.first()?.len())
        .map(|j| t.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    let n: f64 = rows.iter().sum();
    (n > 0.0).then_some((rows, cols, n))
}

/// Pearson chi-square test of independence on a contingency table.
pub fn chi_square_independence(t: &[Vec<u64>]) -> TestResult {
    let Some((rows, cols, n)) = table_expectation(t) else {
        return TestResult::vacuous();
    };
    let (r, c) = (
        rows.iter().filter(|&&x| x > 0.0).count(),
        cols.iter().filter(|&&x| x > 0.0).count(),
    );
    if r < 2 || c < 2 {
        return TestResult::vacuous();
    }
    let mut stat = 0.0;
    for (i, row) in t.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            if e > 0.0 {
                stat += (o as f64 - e).powi(2) / e;
            }
        }
    }
    let dof = (r - 1) * (c - 1);
    TestResult {
        statistic: stat,
        dof,
        p_value: chi2_sf(stat, dof),
    }
}

/// Likelihood-ratio (G) test of independence on a contingency table.
pub fn g_test_independence(t: &[Vec<u64>]) -> TestResult {
    let Some((rows, cols, n)) = table_expectation(t) else {
        return TestResult::vacuous();
    };
    let (r, c) = (
        rows.iter().filter(|&&x| x > 0.0).count(),
        cols.iter().filter(|&&x| x > 0.0).count(),
    );
    if r < 2 || c < 2 {
        return TestResult::vacuous();
    }
    let mut g = 0.0;
    for (i, row) in t.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            if o > 0 {
                let e = rows[i] * cols[j] / n;
                g += o as f64 * (o as f64 / e).ln();
            }
        }
    }
    let stat = 2.0 * g;
    let dof = (r - 1) * (c - 1);
    TestResult {
        statistic: stat,
        dof,
        p_value: chi2_sf(stat, dof),
    }
}

/// Chi-square test that several samples come from one distribution.
pub fn homogeneity(samples: &[&[u64]]) -> Result<TestResult> {
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        labels.extend(std::iter::repeat_n(i as u64, s.len()));
        values.extend_from_slice(s);
    }
    Ok(chi_square_independence(&pair_table(&labels, &values)?))
}

/// Kolmogorov distribution survival `P(K > x)`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let t = 2.0 * (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-17 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against Uniform(0, 1), with the
/// Stephens small-sample correction.
pub fn ks_uniform(values: &[f64]) -> Result<TestResult> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no values".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    Ok(TestResult {
        statistic: d,
        dof: v.len(),
        p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d),
    })
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::INFINITY);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::Distribution;

    fn poisson_samples(lambda: f64, n: usize, seed: u64) -> Vec<u64> {
        let mut g = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = rand_distr::Poisson::new(lambda).unwrap();
        (0..n).map(|_| p.sample(&mut g) as u64).collect()
    }

    #[test]
    fn pooling_respects_minimum() {
        let ids = pool(&[1.0, 1.0, 10.0, 2.0, 2.0, 1.0], 5.0);
        assert_eq!(ids, vec![0, 0, 0, 1, 1, 1]);
        let ids = pool(&[6.0, 6.0, 1.0], 5.0);
        assert_eq!(ids, vec![0, 1, 1]);
    }

    #[test]
    fn poisson_fit_accepts_and_rejects() {
        let s = poisson_samples(2.0, 10_000, 1);
        assert!(poisson_gof(&s, 2.0).unwrap().passes(0.01));
        assert!(!poisson_gof(&s, 2.3).unwrap().passes(0.01));
    }

    #[test]
    fn independence_tests() {
        let mut g = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<u64> = (0..5000).map(|_| g.random_range(0..4)).collect();
        let y: Vec<u64> = (0..5000).map(|_| g.random_range(0..3)).collect();
        let t = pair_table(&x, &y).unwrap();
        assert!(chi_square_independence(&t).passes(0.01));
        assert!(g_test_independence(&t).passes(0.01));
        let z: Vec<u64> = x.iter().map(|&a| (a + g.random_range(0..2)) % 4).collect();
        let t = pair_table(&x, &z).unwrap();
        assert!(!chi_square_independence(&t).passes(0.01));
        assert!(!g_test_independence(&t).passes(0.01));
    }

    #[test]
    fn ks_on_uniform_and_skewed() {
        let mut g = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let u: Vec<f64> = (0..2000).map(|_| g.random()).collect();
        assert!(ks_uniform(&u).unwrap().passes(0.01));
        let s: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(!ks_uniform(&s).unwrap().passes(0.01));
    }

    #[test]
    fn mean_and_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(bonferroni(0.01, 4), 0.0025);
    }
}
