//! Densities, distribution functions and seeded samplers for the three
//! additive noise families: logistic, Laplace and Gaussian.
//!
//! Logistic and Laplace variates are drawn by inversion of the CDF from a
//! single open-interval uniform each; Gaussian variates use the Box–Muller
//! transform on pairs of uniforms. All samplers are pure functions of
//! `(RngStream, params, n)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

fn finite(x: f64, what: &'static str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_location_scale(mu: f64, scale: f64, name: &str) -> Result<()> {
    if !mu.is_finite() {
        return Err(invalid(format!("{name} location must be finite, got {mu}")));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(invalid(format!("{name} scale must be positive and finite, got {scale}")));
    }
    Ok(())
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    mu: f64,
    s: f64,
}

impl LogisticParams {
    pub fn new(mu: f64, s: f64) -> Result<Self> {
        check_location_scale(mu, s, "logistic")?;
        Ok(Self { mu, s })
    }

    /// Zero-location logistic with scale `s`, the noise law of the mechanism.
    pub fn centered(s: f64) -> Result<Self> {
        Self::new(0.0, s)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn scale(&self) -> f64 {
        self.s
    }

    /// `exp(-(x-mu)/s) / (s (1 + exp(-(x-mu)/s))^2)`, evaluated through
    /// `|x - mu|` so the exponential never overflows.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        let z = (finite(x, "x")? - self.mu).abs() / self.s;
        let e = (-z).exp();
        let d = 1.0 + e;
        Ok(e / (self.s * d * d))
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        let z = (finite(x, "x")? - self.mu).abs() / self.s;
        Ok(-z - self.s.ln() - 2.0 * softplus(-z))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let t = (finite(x, "x")? - self.mu) / self.s;
        Ok(if t >= 0.0 {
            1.0 / (1.0 + (-t).exp())
        } else {
            let e = t.exp();
            e / (1.0 + e)
        })
    }

    /// Inverse CDF on the open interval (0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("quantile level must lie in (0,1), got {p}")));
        }
        Ok(self.mu + self.s * (p / (1.0 - p)).ln())
    }

    pub fn variance(&self) -> f64 {
        self.s * self.s * PI * PI / 3.0
    }

    /// `ln p(z - shift) - ln p(z)` for the zero-centred density.
    ///
    /// Uses the closed form `q + 2 (sp(u) - sp(u + q))` with `q = shift/s`,
    /// `u = -z/s` and `sp` the softplus. The linear parts of the two softplus
    /// terms cancel symbolically, so the result never exceeds `|q|` by more
    /// than rounding in the small correction terms.
    pub fn ln_shift_ratio(&self, shift: f64, z: f64) -> Result<f64> {
        let q = finite(shift, "shift")? / self.s;
        let z = finite(z, "z")? - self.mu;
        let u = -z / self.s;
        let v = (shift - z) / self.s;
        let linear = match (u > 0.0, v > 0.0) {
            (true, true) => -q,
            (true, false) => u,
            (false, true) => -v,
            (false, false) => 0.0,
        };
        let tail = |x: f64| (-x.abs()).exp().ln_1p();
        Ok(q + 2.0 * linear + 2.0 * (tail(u) - tail(v)))
    }

    pub fn sample(&self, rng: RngStream, n: usize) -> Vec<f64> {
        let mut g = rng.generator();
        (0..n)
            .map(|_| {
                let u = g.uniform_open();
                self.mu + self.s * (u / (1.0 - u)).ln()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceParams {
    mu: f64,
    b: f64,
}

impl LaplaceParams {
    pub fn new(mu: f64, b: f64) -> Result<Self> {
        check_location_scale(mu, b, "laplace")?;
        Ok(Self { mu, b })
    }

    pub fn centered(b: f64) -> Result<Self> {
        Self::new(0.0, b)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn scale(&self) -> f64 {
        self.b
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.ln_pdf(x)?.exp())
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        let z = (finite(x, "x")? - self.mu).abs();
        Ok(-z / self.b - (2.0 * self.b).ln())
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let t = (finite(x, "x")? - self.mu) / self.b;
        Ok(if t < 0.0 {
            0.5 * t.exp()
        } else {
            1.0 - 0.5 * (-t).exp()
        })
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("quantile level must lie in (0,1), got {p}")));
        }
        Ok(self.draw_from_uniform(p))
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.b * self.b
    }

    /// `(|z| - |z - shift|) / b`, with the saturated branches written in
    /// terms of `shift` directly.
    pub fn ln_shift_ratio(&self, shift: f64, z: f64) -> Result<f64> {
        let shift = finite(shift, "shift")?;
        let z = finite(z, "z")? - self.mu;
        let q = shift / self.b;
        Ok(if z >= 0.0 && z >= shift {
            q
        } else if z <= 0.0 && z <= shift {
            -q
        } else {
            (z.abs() - (z - shift).abs()) / self.b
        })
    }

    fn draw_from_uniform(&self, u: f64) -> f64 {
        let c = u - 0.5;
        self.mu - self.b * c.signum() * (1.0 - 2.0 * c.abs()).ln()
    }

    pub fn sample(&self, rng: RngStream, n: usize) -> Vec<f64> {
        let mut g = rng.generator();
        (0..n).map(|_| self.draw_from_uniform(g.uniform_open())).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    mu: f64,
    sigma: f64,
}

impl GaussianParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        check_location_scale(mu, sigma, "gaussian")?;
        Ok(Self { mu, sigma })
    }

    pub fn centered(sigma: f64) -> Result<Self> {
        Self::new(0.0, sigma)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn scale(&self) -> f64 {
        self.sigma
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.ln_pdf(x)?.exp())
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        let z = (finite(x, "x")? - self.mu) / self.sigma;
        Ok(-0.5 * z * z - self.sigma.ln() - 0.5 * (2.0 * PI).ln())
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn ln_shift_ratio(&self, shift: f64, z: f64) -> Result<f64> {
        let shift = finite(shift, "shift")?;
        let z = finite(z, "z")? - self.mu;
        Ok(shift * (2.0 * z - shift) / (2.0 * self.sigma * self.sigma))
    }

    /// Box–Muller on consecutive uniform pairs; an odd trailing variate
    /// discards its sine partner.
    pub fn sample(&self, rng: RngStream, n: usize) -> Vec<f64> {
        let mut g = rng.generator();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let radius = (-2.0 * g.uniform_open().ln()).sqrt();
            let angle = 2.0 * PI * g.uniform_open();
            out.push(self.mu + self.sigma * radius * angle.cos());
            if out.len() < n {
                out.push(self.mu + self.sigma * radius * angle.sin());
            }
        }
        out
    }
}

/// One of the three additive noise laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseDistribution {
    Logistic(LogisticParams),
    Laplace(LaplaceParams),
    Gaussian(GaussianParams),
}

impl NoiseDistribution {
    pub fn pdf(&self, x: f64) -> Result<f64> {
        match self {
            Self::Logistic(p) => p.pdf(x),
            Self::Laplace(p) => p.pdf(x),
            Self::Gaussian(p) => p.pdf(x),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        match self {
            Self::Logistic(p) => p.ln_pdf(x),
            Self::Laplace(p) => p.ln_pdf(x),
            Self::Gaussian(p) => p.ln_pdf(x),
        }
    }

    pub fn ln_shift_ratio(&self, shift: f64, z: f64) -> Result<f64> {
        match self {
            Self::Logistic(p) => p.ln_shift_ratio(shift, z),
            Self::Laplace(p) => p.ln_shift_ratio(shift, z),
            Self::Gaussian(p) => p.ln_shift_ratio(shift, z),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::Logistic(p) => p.variance(),
            Self::Laplace(p) => p.variance(),
            Self::Gaussian(p) => p.variance(),
        }
    }

    pub fn sample(&self, rng: RngStream, n: usize) -> Vec<f64> {
        match self {
            Self::Logistic(p) => p.sample(rng, n),
            Self::Laplace(p) => p.sample(rng, n),
            Self::Gaussian(p) => p.sample(rng, n),
        }
    }
}
