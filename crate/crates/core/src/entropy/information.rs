//! Information functions of partitions of a σ-finite measure space.
//!
//! A measure space here is a finite list of atoms with masses in `[0, ∞]`; a
//! partition assigns a label to every atom.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::KahanSum;
use crate::scalar::Real;
use crate::systems::MarkovSystem;

/// `I(μ) = log(1/μ)` for `0 < μ < ∞`, `+∞` for `μ = 0` and `0` for `μ = ∞`.
pub fn information<R: Real>(mass: R) -> R {
    if mass.is_infinite() {
        R::zero()
    } else if mass <= R::zero() {
        R::infinity()
    } else {
        -mass.ln()
    }
}

/// Atoms with masses in `[0, ∞]`.
#[derive(Debug, Clone)]
pub struct MeasureSpace<R> {
    masses: Vec<R>,
}

impl<R: Real> MeasureSpace<R> {
    pub fn new(masses: Vec<R>) -> Result<Self> {
        if let Some(m) = masses.iter().find(|m| m.is_nan() || **m < R::zero()) {
            return Err(Error::InvalidPartition(format!("atom mass {m} is not in [0, ∞]")));
        }
        Ok(Self { masses })
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, atom: usize) -> R {
        self.masses[atom]
    }

    fn check(&self, labels: &[u64]) -> Result<()> {
        if labels.len() == self.masses.len() {
            Ok(())
        } else {
            Err(Error::InvalidPartition(format!(
                "partition labels {} atoms, space has {}",
                labels.len(),
                self.masses.len()
            )))
        }
    }

    /// Masses of the cells of a labelled partition.
    pub fn cell_masses(&self, labels: &[u64]) -> Result<BTreeMap<u64, R>> {
        self.check(labels)?;
        let mut out: BTreeMap<u64, R> = BTreeMap::new();
        for (&l, &m) in labels.iter().zip(&self.masses) {
            let e = out.entry(l).or_insert(R::zero());
            *e = *e + m;
        }
        Ok(out)
    }

    /// `I_μ(α)(x)` at every atom `x`.
    pub fn information_of(&self, labels: &[u64]) -> Result<Vec<R>> {
        let cells = self.cell_masses(labels)?;
        Ok(labels.iter().map(|l| information(cells[l])).collect())
    }
}

/// Precomputed cell masses for evaluating `I(α₁ | α₂)` at many atoms.
#[derive(Debug, Clone)]
pub struct ConditionalTable<'a, R> {
    alpha1: &'a [u64],
    alpha2: &'a [u64],
    outer: BTreeMap<u64, R>,
    joint: BTreeMap<(u64, u64), R>,
}

impl<'a, R: Real> ConditionalTable<'a, R> {
    pub fn new(space: &MeasureSpace<R>, alpha1: &'a [u64], alpha2: &'a [u64]) -> Result<Self> {
        let outer = space.cell_masses(alpha2)?;
        space.check(alpha1)?;
        let mut joint: BTreeMap<(u64, u64), R> = BTreeMap::new();
        for ((&a, &b), &m) in alpha1.iter().zip(alpha2).zip(&space.masses) {
            let e = joint.entry((a, b)).or_insert(R::zero());
            *e = *e + m;
        }
        Ok(Self {
            alpha1,
            alpha2,
            outer,
            joint,
        })
    }

    /// `I(α₁ | α₂)(x)`: on a finite `α₂`-cell, the information of `α₁` under
    /// the normalized restriction; on an infinite one, the information of
    /// `α₁ ∨ {α₂(x), X ∖ α₂(x)}` under `μ`.
    pub fn at(&self, atom: usize) -> R {
        let (a, b) = (self.alpha1[atom], self.alpha2[atom]);
        let outer = self.outer[&b];
        let inner = self.joint[&(a, b)];
        if outer.is_infinite() {
            information(inner)
        } else if inner <= R::zero() {
            R::infinity()
        } else {
            (outer / inner).ln()
        }
    }
}

/// `I(α₁ | α₂)` at one atom.
pub fn conditional_information<R: Real>(
    space: &MeasureSpace<R>,
    alpha1: &[u64],
    alpha2: &[u64],
    atom: usize,
) -> Result<R> {
    if atom >= space.len() {
        return Err(Error::InvalidPartition(format!("atom {atom} out of range")));
    }
    Ok(ConditionalTable::new(space, alpha1, alpha2)?.at(atom))
}

/// Words over `k` letters of length `n`, as base-`k` integers (first letter most significant).
fn decode(mut code: usize, k: usize, n: usize, out: &mut [usize]) {
    for slot in out[..n].iter_mut().rev() {
        *slot = code % k;
        code /= k;
    }
}

/// Largest pointwise residual of
/// `I(∨_{k=0}^{n−1} T^{−k}α) = Σ_{j=0}^{n−1} I(α | ∨_{k=1}^{j} T^{−k}α) ∘ T^{n−1−j}`
/// on a finite closed chain with its stationary law normalized to a
/// probability, maximized over the positive-mass atoms of the path space of
/// length `n`.
///
/// `alpha[i]` labels state `sys.states()[i]`. Each conditional term is
/// evaluated by [`ConditionalTable`] on the space of words of length `j + 1`.
pub fn decomposition_residual<R: Real>(sys: &MarkovSystem<R>, alpha: &[u64], n: usize) -> Result<R> {
    let states = sys.states();
    let k = states.len();
    if !sys.is_closed_finite() {
        return Err(Error::InvalidArgument(
            "decomposition needs a closed finite chain".into(),
        ));
    }
    if alpha.len() != k {
        return Err(Error::InvalidPartition("one label per state required".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let atoms = k
        .checked_pow(n as u32)
        .filter(|&a| a <= 1 << 24)
        .ok_or_else(|| Error::InvalidArgument(format!("{k}^{n} atoms is too many")))?;
    let mut p = vec![vec![R::zero(); k]; k];
    for (i, &a) in states.iter().enumerate() {
        for (j, &b) in states.iter().enumerate() {
            p[i][j] = sys.prob(a, b)?;
        }
    }
    // The identity is stated for probability spaces.
    let q = sys.stationary();
    let total = q.iter().fold(R::zero(), |a, &b| a + b);
    let q: Vec<R> = q.into_iter().map(|x| x / total).collect();
    let word_mass = |w: &[usize]| {
        let mut m = q[w[0]];
        for t in 1..w.len() {
            m = m * p[w[t - 1]][w[t]];
        }
        m
    };
    let base = alpha.iter().max().copied().unwrap_or(0) + 1;
    let label_code = |w: &[usize]| w.iter().fold(0u64, |c, &s| c * base + alpha[s]);

    // Tables for j = 0..n-1 on words of length j+1: α₁ = first letter's
    // label, α₂ = labels of letters 1..=j.
    let mut spaces = Vec::with_capacity(n);
    let mut a1s = Vec::with_capacity(n);
    let mut a2s = Vec::with_capacity(n);
    let mut buf = vec![0usize; n];
    for j in 0..n {
        let len = j + 1;
        let count = k.pow(len as u32);
        let mut masses = Vec::with_capacity(count);
        let mut a1 = Vec::with_capacity(count);
        let mut a2 = Vec::with_capacity(count);
        for code in 0..count {
            decode(code, k, len, &mut buf);
            masses.push(word_mass(&buf[..len]));
            a1.push(alpha[buf[0]]);
            a2.push(label_code(&buf[1..len]));
        }
        spaces.push(MeasureSpace::new(masses)?);
        a1s.push(a1);
        a2s.push(a2);
    }
    let tables: Vec<ConditionalTable<'_, R>> = (0..n)
        .map(|j| ConditionalTable::new(&spaces[j], &a1s[j], &a2s[j]))
        .collect::<Result<_>>()?;

    // Left side: information of the full label word on the length-n space.
    let full_labels: Vec<u64> = (0..atoms)
        .map(|code| {
            decode(code, k, n, &mut buf);
            label_code(&buf[..n])
        })
        .collect();
    let full = &spaces[n - 1];
    let lhs = full.information_of(&full_labels)?;

    let mut worst = R::zero();
    for (code, &left) in lhs.iter().enumerate() {
        if full.mass(code) <= R::zero() {
            continue;
        }
        decode(code, k, n, &mut buf);
        let mut rhs = KahanSum::new();
        for (j, table) in tables.iter().enumerate() {
            // Sub-word x_{n−1−j} … x_{n−1}.
            let sub = buf[n - 1 - j..n].iter().fold(0usize, |c, &s| c * k + s);
            rhs.add(table.at(sub).as_f64());
        }
        let r = (left - R::lit(rhs.value())).abs();
        if r > worst {
            worst = r;
        }
    }
    Ok(worst)
}
