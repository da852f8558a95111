//! Test-only oracles. Nothing here calls into the library's moment or
//! quadrature code.
#![allow(dead_code)]

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

pub fn laplace_pdf(rate: f64, x: f64) -> f64 {
    0.5 * rate * (-rate * x.abs()).exp()
}

/// `(mass, mean, variance)` of `X | X ∈ (a, b]` by Simpson integration, with
/// infinite bounds truncated where the Laplace tail is below 1e-26.
pub fn laplace_moments_oracle(rate: f64, a: f64, b: f64) -> (f64, f64, f64) {
    let cut = 60.0 / rate;
    let lo = a.max(-cut);
    let hi = b.min(cut);
    let pieces: Vec<(f64, f64)> = if lo < 0.0 && hi > 0.0 {
        vec![(lo, 0.0), (0.0, hi)]
    } else {
        vec![(lo, hi)]
    };
    let n = 20_000;
    let m0: f64 = pieces
        .iter()
        .map(|&(l, h)| simpson(|x| laplace_pdf(rate, x), l, h, n))
        .sum();
    let m1: f64 = pieces
        .iter()
        .map(|&(l, h)| simpson(|x| x * laplace_pdf(rate, x), l, h, n))
        .sum();
    let mean = m1 / m0;
    let c2: f64 = pieces
        .iter()
        .map(|&(l, h)| simpson(|x| (x - mean).powi(2) * laplace_pdf(rate, x), l, h, n))
        .sum();
    (m0, mean, c2 / m0)
}

/// Cumulative integrals `∫₀^{k·step} x^p · p_X(x) dx` for `p = 0, 1, 2` of a
/// Laplace density on a uniform grid, built cell by cell with Simpson's rule.
pub struct LaplaceGrid {
    pub step: f64,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

impl LaplaceGrid {
    pub fn new(rate: f64, upper: f64, step: f64) -> Self {
        let n = (upper / step).round() as usize;
        let mut f0 = vec![0.0; n + 1];
        let mut f1 = vec![0.0; n + 1];
        let mut f2 = vec![0.0; n + 1];
        for k in 0..n {
            let a = k as f64 * step;
            let b = (k + 1) as f64 * step;
            f0[k + 1] = f0[k] + simpson(|x| laplace_pdf(rate, x), a, b, 4);
            f1[k + 1] = f1[k] + simpson(|x| x * laplace_pdf(rate, x), a, b, 4);
            f2[k + 1] = f2[k] + simpson(|x| x * x * laplace_pdf(rate, x), a, b, 4);
        }
        LaplaceGrid { step, f0, f1, f2 }
    }

    /// Threshold cost at grid indices `i <= j` (side-channel form).
    pub fn cost(&self, i: usize, j: usize, c1: f64, c2: f64, snr: f64) -> f64 {
        let m0 = self.f0[j] - self.f0[i];
        let noisy_var_mass = if m0 > 0.0 {
            let m1 = self.f1[j] - self.f1[i];
            let m2 = self.f2[j] - self.f2[i];
            (m2 - m1 * m1 / m0).max(0.0)
        } else {
            0.0
        };
        2.0 * self.f2[i] + 2.0 * c1 * m0 + 2.0 / (snr + 1.0) * noisy_var_mass + 2.0 * c2 * (0.5 - self.f0[j])
    }

    /// Minimum over all grid pairs `i <= j`: `(β₁, β₂, J)`.
    pub fn minimum(&self, c1: f64, c2: f64, snr: f64) -> (f64, f64, f64) {
        let n = self.f0.len();
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..n {
            for j in i..n {
                let v = self.cost(i, j, c1, c2, snr);
                if v < best.2 {
                    best = (i, j, v);
                }
            }
        }
        (best.0 as f64 * self.step, best.1 as f64 * self.step, best.2)
    }
}

/// Perfect-channel-only dp for Laplace(1), coded from the closed-form stage
/// cost `2 − e^{−β}(2β + 2)` at `β = √c`. Returns `J[t][e]` for
/// `t = 1..=T+1` (index 0 unused).
pub fn perfect_only_dp(horizon: usize, budget: usize) -> Vec<Vec<f64>> {
    let mut j = vec![vec![0.0f64; budget + 1]; horizon + 2];
    for t in (1..=horizon).rev() {
        for e in 0..=budget {
            let next = j[t + 1][e];
            j[t][e] = if e == 0 {
                next + 2.0
            } else {
                let c = (j[t + 1][e - 1] - next).max(0.0);
                let beta = c.sqrt();
                next + 2.0 - (-beta).exp() * (2.0 * beta + 2.0)
            };
        }
    }
    j
}
