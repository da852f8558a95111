//! Source and channel-noise densities.
//!
//! Every density here is zero-mean, symmetric and unimodal. Interval moments
//! use closed forms for the Laplace and uniform families and adaptive
//! quadrature for tabulated densities.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate_with_breaks;

/// Masses below this are treated as an empty region.
pub const ZERO_MASS: f64 = 1e-300;

/// Absolute tolerance for quadrature-backed moments.
pub const QUAD_TOL: f64 = 1e-10;

/// Probability mass, conditional mean and conditional variance of `X` given
/// `X ∈ (a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalMoments {
    pub mass: f64,
    pub mean: f64,
    pub variance: f64,
}

impl IntervalMoments {
    pub const EMPTY: IntervalMoments = IntervalMoments {
        mass: 0.0,
        mean: 0.0,
        variance: 0.0,
    };

    /// `E[X²; X ∈ region]`, the unnormalised second moment about zero.
    pub fn raw_second_moment(&self) -> f64 {
        self.mass * (self.variance + self.mean * self.mean)
    }

    /// Moments of the union of disjoint pieces (law of total variance).
    pub fn combine<I: IntoIterator<Item = IntervalMoments>>(parts: I) -> IntervalMoments {
        let parts: Vec<IntervalMoments> = parts.into_iter().filter(|p| p.mass > 0.0).collect();
        let mass: f64 = parts.iter().map(|p| p.mass).sum();
        if mass <= 0.0 {
            return IntervalMoments::EMPTY;
        }
        let mean = parts.iter().map(|p| p.mass * p.mean).sum::<f64>() / mass;
        let spread: f64 = parts
            .iter()
            .map(|p| p.mass * (p.variance + (p.mean - mean).powi(2)))
            .sum();
        IntervalMoments {
            mass,
            mean,
            variance: (spread / mass).max(0.0),
        }
    }
}

/// A piecewise-linear density on a symmetric grid, zero outside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    xs: Vec<f64>,
    pdf: Vec<f64>,
    /// Cumulative mass at each grid node.
    cum: Vec<f64>,
}

impl TabulatedDensity {
    /// Builds a density from `(x, pdf)` pairs. The grid must be strictly
    /// increasing and symmetric about zero with pdf values nonincreasing in
    /// `|x|`; values are rescaled to integrate to one.
    pub fn new(xs: Vec<f64>, pdf: Vec<f64>) -> Result<Self> {
        if xs.len() != pdf.len() {
            return Err(invalid("table", "x and pdf columns differ in length"));
        }
        if xs.len() < 3 {
            return Err(invalid("table", "need at least three grid points"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("table", "grid must be strictly increasing"));
        }
        if pdf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("table", "pdf values must be finite and nonnegative"));
        }
        let n = xs.len();
        let scale = xs[n - 1].abs().max(1.0);
        let pmax = pdf.iter().cloned().fold(0.0, f64::max);
        for i in 0..n {
            let j = n - 1 - i;
            if (xs[i] + xs[j]).abs() > 1e-12 * scale {
                return Err(invalid("table", format!("grid is not symmetric at x={}", xs[i])));
            }
            if (pdf[i] - pdf[j]).abs() > 1e-12 * pmax {
                return Err(invalid("table", format!("pdf is not symmetric at x={}", xs[i])));
            }
        }
        for i in 1..n {
            if xs[i - 1] >= 0.0 && pdf[i] > pdf[i - 1] + 1e-12 * pmax {
                return Err(invalid("table", format!("pdf increases at x={}", xs[i])));
            }
        }
        let total: f64 = xs
            .windows(2)
            .zip(pdf.windows(2))
            .map(|(x, p)| 0.5 * (p[0] + p[1]) * (x[1] - x[0]))
            .sum();
        if total <= 0.0 {
            return Err(invalid("table", "pdf has zero total mass"));
        }
        let pdf: Vec<f64> = pdf.into_iter().map(|p| p / total).collect();
        let mut cum = Vec::with_capacity(n);
        let mut acc = 0.0;
        cum.push(0.0);
        for i in 1..n {
            acc += 0.5 * (pdf[i - 1] + pdf[i]) * (xs[i] - xs[i - 1]);
            cum.push(acc);
        }
        Ok(TabulatedDensity { xs, pdf, cum })
    }

    /// Tabulates `f` on `points` equally spaced nodes over `[-half_width, half_width]`.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(invalid("half_width", "must be positive"));
        }
        let points = points.max(3) | 1;
        let step = 2.0 * half_width / (points - 1) as f64;
        let xs: Vec<f64> = (0..points)
            .map(|i| {
                let k = i as f64 - ((points - 1) / 2) as f64;
                k * step
            })
            .collect();
        let pdf = xs.iter().map(|&x| f(x.abs())).collect();
        Self::new(xs, pdf)
    }

    pub fn grid(&self) -> &[f64] {
        &self.xs
    }

    fn cell(&self, x: f64) -> Option<usize> {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return None;
        }
        let idx = self.xs.partition_point(|&g| g <= x);
        Some(idx.clamp(1, n - 1) - 1)
    }

    fn pdf(&self, x: f64) -> f64 {
        match self.cell(x) {
            None => 0.0,
            Some(i) => {
                let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
                self.pdf[i] + t * (self.pdf[i + 1] - self.pdf[i])
            }
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let i = self.cell(x).expect("inside grid");
        let d = x - self.xs[i];
        let slope = (self.pdf[i + 1] - self.pdf[i]) / (self.xs[i + 1] - self.xs[i]);
        self.cum[i] + self.pdf[i] * d + 0.5 * slope * d * d
    }

    fn quantile(&self, u: f64) -> f64 {
        let n = self.xs.len();
        let i = self.cum.partition_point(|&c| c <= u).clamp(1, n - 1) - 1;
        let need = u - self.cum[i];
        let width = self.xs[i + 1] - self.xs[i];
        let slope = (self.pdf[i + 1] - self.pdf[i]) / width;
        let p0 = self.pdf[i];
        // Solve p0 d + slope d² / 2 = need for d in [0, width].
        let d = if slope.abs() < 1e-300 {
            if p0 > 0.0 {
                need / p0
            } else {
                0.0
            }
        } else {
            let disc = (p0 * p0 + 2.0 * slope * need).max(0.0);
            2.0 * need / (p0 + disc.sqrt())
        };
        self.xs[i] + d.clamp(0.0, width)
    }

    fn support(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn moments(&self, a: f64, b: f64) -> IntervalMoments {
        let (lo_s, hi_s) = self.support();
        let lo = a.max(lo_s);
        let hi = b.min(hi_s);
        if hi <= lo {
            return IntervalMoments::EMPTY;
        }
        let mass = integrate_with_breaks(|x| self.pdf(x), lo, hi, &self.xs, QUAD_TOL).value;
        if mass < ZERO_MASS {
            return IntervalMoments {
                mass,
                ..IntervalMoments::EMPTY
            };
        }
        let first = integrate_with_breaks(|x| x * self.pdf(x), lo, hi, &self.xs, QUAD_TOL).value;
        let mean = first / mass;
        let central =
            integrate_with_breaks(|x| (x - mean) * (x - mean) * self.pdf(x), lo, hi, &self.xs, QUAD_TOL).value;
        IntervalMoments {
            mass,
            mean,
            variance: (central / mass).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Kind {
    Laplace { rate: f64 },
    Uniform { half_width: f64 },
    Tabulated(TabulatedDensity),
}

/// Zero-mean symmetric unimodal source density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDensity {
    kind: Kind,
}

impl SourceDensity {
    /// Laplace density `λ/2 · exp(-λ|x|)`.
    pub fn laplace(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid("lambda", format!("must be positive and finite, got {rate}")));
        }
        Ok(SourceDensity {
            kind: Kind::Laplace { rate },
        })
    }

    /// Uniform density on `[-L, L]`.
    pub fn uniform(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid("L", format!("must be positive and finite, got {half_width}")));
        }
        Ok(SourceDensity {
            kind: Kind::Uniform { half_width },
        })
    }

    pub fn tabulated(table: TabulatedDensity) -> Self {
        SourceDensity {
            kind: Kind::Tabulated(table),
        }
    }

    /// Rate `λ` when this is a Laplace density.
    pub fn laplace_rate(&self) -> Option<f64> {
        match self.kind {
            Kind::Laplace { rate } => Some(rate),
            _ => None,
        }
    }

    pub fn uniform_half_width(&self) -> Option<f64> {
        match self.kind {
            Kind::Uniform { half_width } => Some(half_width),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::Laplace { .. } => "laplace",
            Kind::Uniform { .. } => "uniform",
            Kind::Tabulated(_) => "tabulated",
        }
    }

    /// Smallest interval containing the support.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Laplace { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Kind::Uniform { half_width } => (-half_width, *half_width),
            Kind::Tabulated(t) => t.support(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Laplace { rate } => 0.5 * rate * (-rate * x.abs()).exp(),
            Kind::Uniform { half_width } => {
                if x.abs() <= *half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            Kind::Tabulated(t) => t.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Laplace { rate } => {
                if x < 0.0 {
                    0.5 * (rate * x).exp()
                } else {
                    1.0 - 0.5 * (-rate * x).exp()
                }
            }
            Kind::Uniform { half_width } => ((x + half_width) / (2.0 * half_width)).clamp(0.0, 1.0),
            Kind::Tabulated(t) => t.cdf(x),
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.kind {
            Kind::Laplace { rate } => 2.0 / (rate * rate),
            Kind::Uniform { half_width } => half_width * half_width / 3.0,
            Kind::Tabulated(t) => t.moments(f64::NEG_INFINITY, f64::INFINITY).variance,
        }
    }

    /// Moments of `X` conditioned on `X ∈ (a, b]`. Either bound may be infinite.
    pub fn interval_moments(&self, a: f64, b: f64) -> Result<IntervalMoments> {
        let m = self.interval_moments_unchecked(a, b)?;
        if m.mass < ZERO_MASS {
            return Err(Error::ZeroMassInterval { a, b, mass: m.mass });
        }
        Ok(m)
    }

    /// Like [`interval_moments`](Self::interval_moments) but returns an
    /// all-zero record for empty or zero-mass intervals instead of failing.
    pub fn interval_moments_or_empty(&self, a: f64, b: f64) -> IntervalMoments {
        if !(b > a) {
            return IntervalMoments::EMPTY;
        }
        match self.interval_moments_unchecked(a, b) {
            Ok(m) if m.mass >= ZERO_MASS => m,
            _ => IntervalMoments::EMPTY,
        }
    }

    fn interval_moments_unchecked(&self, a: f64, b: f64) -> Result<IntervalMoments> {
        if a.is_nan() || b.is_nan() || !(a < b) {
            return Err(invalid("interval", format!("need a < b, got ({a}, {b}]")));
        }
        Ok(match &self.kind {
            Kind::Laplace { rate } => laplace_moments(*rate, a, b),
            Kind::Uniform { half_width } => {
                let lo = a.max(-half_width);
                let hi = b.min(*half_width);
                if hi <= lo {
                    IntervalMoments::EMPTY
                } else {
                    let w = hi - lo;
                    IntervalMoments {
                        mass: w / (2.0 * half_width),
                        mean: 0.5 * (lo + hi),
                        variance: w * w / 12.0,
                    }
                }
            }
            Kind::Tabulated(t) => t.moments(a, b),
        })
    }

    /// `P(X ∈ (a, b])`, zero for empty intervals.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        self.interval_moments_or_empty(a, b).mass
    }

    /// Draws one value using inverse-transform sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        match &self.kind {
            Kind::Laplace { rate } => laplace_quantile(*rate, u),
            Kind::Uniform { half_width } => half_width * (2.0 * u - 1.0),
            Kind::Tabulated(t) => t.quantile(u),
        }
    }
}

fn laplace_quantile(rate: f64, u: f64) -> f64 {
    if u < 0.5 {
        (2.0 * u).ln() / rate
    } else {
        -(2.0 * (1.0 - u)).ln() / rate
    }
}

/// Moments of the Laplace(λ) density restricted to `(lo, hi]` with `0 <= lo < hi`.
/// Conditioned on `X > lo`, `X - lo` is exponential, so the restriction is a
/// truncated exponential of width `hi - lo`.
fn laplace_positive_piece(rate: f64, lo: f64, hi: f64) -> IntervalMoments {
    let tail = 0.5 * (-rate * lo).exp();
    if hi.is_infinite() {
        return IntervalMoments {
            mass: tail,
            mean: lo + 1.0 / rate,
            variance: 1.0 / (rate * rate),
        };
    }
    let w = hi - lo;
    let z = rate * w;
    let mass = -tail * (-z).exp_m1();
    let (shift, variance) = if z < 1e-3 {
        // Series of 1/λ - w/(e^z - 1) and 1/λ² - w² e^z / (e^z - 1)².
        let z2 = z * z;
        let shift = w * (0.5 - z / 12.0 + z * z2 / 720.0);
        let var = w * w * (1.0 / 12.0 - z2 / 240.0 + z2 * z2 / 6048.0);
        (shift, var)
    } else {
        let em1 = z.exp_m1();
        let shift = 1.0 / rate - w / em1;
        // e^z / (e^z - 1)² = 1 / (em1 · (1 - e^{-z}))
        let var = 1.0 / (rate * rate) - w * w / (em1 * -(-z).exp_m1());
        (shift, var.max(0.0))
    };
    IntervalMoments {
        mass,
        mean: lo + shift,
        variance,
    }
}

fn laplace_moments(rate: f64, a: f64, b: f64) -> IntervalMoments {
    let mut parts = Vec::with_capacity(2);
    if a < 0.0 {
        // Mirror (a, min(b, 0)] onto the positive axis.
        let hi = -a;
        let lo = (-b).max(0.0);
        let m = laplace_positive_piece(rate, lo, hi);
        parts.push(IntervalMoments { mean: -m.mean, ..m });
    }
    if b > 0.0 {
        parts.push(laplace_positive_piece(rate, a.max(0.0), b));
    }
    match parts.len() {
        1 => parts[0],
        _ => IntervalMoments::combine(parts),
    }
}

/// Shape of the additive channel noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseShape {
    #[default]
    Gaussian,
    Uniform,
    Laplace,
}

impl std::str::FromStr for NoiseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(NoiseShape::Gaussian),
            "uniform" => Ok(NoiseShape::Uniform),
            "laplace" => Ok(NoiseShape::Laplace),
            other => Err(invalid("noise", format!("unknown noise shape `{other}`"))),
        }
    }
}

/// Zero-mean additive channel noise with a fixed variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    variance: f64,
    shape: NoiseShape,
}

impl NoiseModel {
    pub fn new(shape: NoiseShape, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(invalid("noise variance", format!("must be positive, got {variance}")));
        }
        Ok(NoiseModel { variance, shape })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn shape(&self) -> NoiseShape {
        self.shape
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sd = self.variance.sqrt();
        match self.shape {
            NoiseShape::Gaussian => Normal::new(0.0, sd).expect("positive sd").sample(rng),
            NoiseShape::Uniform => {
                let u: f64 = rng.sample(Open01);
                3f64.sqrt() * sd * (2.0 * u - 1.0)
            }
            NoiseShape::Laplace => {
                let u: f64 = rng.sample(Open01);
                laplace_quantile(2f64.sqrt() / sd, u)
            }
        }
    }
}
