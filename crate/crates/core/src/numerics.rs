//! Small numerical kernels: compensated summation and Gauss–Legendre panels.

use std::sync::OnceLock;

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

const GL_ORDER: usize = 20;

fn gauss_legendre() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GL_ORDER;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            // Newton on P_n starting from the Chebyshev guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            out.push((x, w));
        }
        out
    })
}

/// Integral of `g` over `[a, b]` with one Gauss–Legendre panel.
pub fn gl_panel(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre()
        .iter()
        .map(|&(x, w)| w * g(mid + half * x))
        .sum::<f64>()
        * half
}

/// `∫_m^∞ g(x) dx` for a positive, eventually decaying `g`, via the
/// substitution `x = m e^s` and unit panels in `s`.
pub fn integral_to_infinity(g: impl Fn(f64) -> f64, m: f64) -> f64 {
    let h = |s: f64| {
        let x = m * s.exp();
        g(x) * x
    };
    let mut acc = KahanSum::new();
    let mut quiet = 0;
    let mut s = 0.0;
    for _ in 0..4000 {
        let piece = gl_panel(h, s, s + 1.0);
        acc.add(piece);
        s += 1.0;
        if piece.abs() <= 1e-19 * acc.value().abs() {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let v = gl_panel(|x| x.powi(7) + 3.0 * x * x, 0.0, 2.0);
        assert!((v - (256.0 / 8.0 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn infinite_integral_of_power_law() {
        // ∫_10^∞ x^-2 dx = 0.1
        let v = integral_to_infinity(|x| 1.0 / (x * x), 10.0);
        assert!((v - 0.1).abs() < 1e-15);
        // ∫_e^∞ log(x)/x^2 dx = (1 + 1)/e
        let e = std::f64::consts::E;
        let v = integral_to_infinity(|x| x.ln() / (x * x), e);
        assert!((v - 2.0 / e).abs() < 1e-14);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for _ in 0..1000 {
            acc.add(1e-17);
        }
        assert!((acc.value() - (1.0 + 1e-14)).abs() < 1e-18);
    }
}
