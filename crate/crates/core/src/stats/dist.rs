//! The three noise families used by the synthetic experiments.

use serde::{Deserialize, Serialize};

use super::rng::Rng;
use super::special::{normal_cdf, normal_quantile, regularized_incomplete_beta};
use crate::error::{check_probability, domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    Normal,
    Uniform,
    Beta { a: f64, b: f64 },
}

/// A location-scale family member: `loc + scale · X` with `X` standard.
///
/// For `Normal`, `X ~ N(0, 1)`; for `Uniform`, `X ~ U(0, 1)`; for `Beta`,
/// `X ~ Beta(a, b)` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub kind: DistributionKind,
    pub loc: f64,
    pub scale: f64,
}

impl DistributionSpec {
    pub fn normal(loc: f64, scale: f64) -> Self {
        Self { kind: DistributionKind::Normal, loc, scale }
    }

    pub fn uniform(loc: f64, scale: f64) -> Self {
        Self { kind: DistributionKind::Uniform, loc, scale }
    }

    pub fn beta(a: f64, b: f64, loc: f64, scale: f64) -> Self {
        Self { kind: DistributionKind::Beta { a, b }, loc, scale }
    }

    pub fn with_scale(self, scale: f64) -> Self {
        Self { scale, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() || !self.loc.is_finite() {
            return Err(domain(format!(
                "distribution needs finite loc and scale > 0, got loc={}, scale={}",
                self.loc, self.scale
            )));
        }
        if let DistributionKind::Beta { a, b } = self.kind {
            if !(a > 0.0 && b > 0.0) {
                return Err(domain(format!("beta shapes must be positive, got a={a}, b={b}")));
            }
        }
        Ok(())
    }

    fn standard_draw(&self, rng: &mut Rng) -> f64 {
        match self.kind {
            DistributionKind::Normal => rng.standard_normal(),
            DistributionKind::Uniform => rng.uniform(),
            DistributionKind::Beta { a, b } => {
                // X = Ga / (Ga + Gb), evaluated as a logistic of the log-ratio.
                let ln_ga = rng.ln_gamma_variate(a);
                let ln_gb = rng.ln_gamma_variate(b);
                1.0 / (1.0 + (ln_gb - ln_ga).exp())
            }
        }
    }

    /// One draw; the spec must already be valid.
    pub fn draw(&self, rng: &mut Rng) -> f64 {
        self.loc + self.scale * self.standard_draw(rng)
    }

    pub fn sample(&self, rng: &mut Rng, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(domain("sample size must be at least 1"));
        }
        Ok((0..n).map(|_| self.draw(rng)).collect())
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        let z = (x - self.loc) / self.scale;
        Ok(match self.kind {
            DistributionKind::Normal => normal_cdf(z),
            DistributionKind::Uniform => z.clamp(0.0, 1.0),
            DistributionKind::Beta { a, b } => regularized_incomplete_beta(a, b, z.clamp(0.0, 1.0))?,
        })
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.validate()?;
        check_probability(p, "p")?;
        let z = match self.kind {
            DistributionKind::Normal => normal_quantile(p)?,
            DistributionKind::Uniform => p,
            DistributionKind::Beta { a, b } => beta_quantile(a, b, p)?,
        };
        Ok(self.loc + self.scale * z)
    }
}

/// Bisection on `I_x(a, b) = p`; the CDF is monotone so 1e-15 bracketing is
/// reached in about fifty halvings.
fn beta_quantile(a: f64, b: f64, p: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if regularized_incomplete_beta(a, b, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
