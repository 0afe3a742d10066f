//! Analytic synthetic densities with exact pdfs and exact samplers.
//!
//! Every density is a product of independent one-dimensional mixtures.
//! Parameter conventions: `Exponential { rate }` has mean `1 / rate`;
//! `Laplace { location, scale }` has density `exp(-|x - μ| / b) / (2b)`.

use rand::Rng;
use rand_distr::{Beta as BetaSampler, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};
use crate::points::{check_dim, Points};

/// One-dimensional building block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Uniform { low: f64, high: f64 },
    Beta { alpha: f64, beta: f64 },
    Laplace { location: f64, scale: f64 },
    Exponential { rate: f64 },
}

impl Primitive {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Primitive::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            Primitive::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0,
            Primitive::Laplace { location, scale } => location.is_finite() && scale > 0.0,
            Primitive::Exponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid primitive {self:?}")))
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Primitive::Uniform { low, high } => {
                if (low..=high).contains(&x) {
                    1.0 / (high - low)
                } else {
                    0.0
                }
            }
            Primitive::Beta { alpha, beta } => {
                if !(0.0..=1.0).contains(&x) {
                    return 0.0;
                }
                if (x == 0.0 && alpha > 1.0) || (x == 1.0 && beta > 1.0) {
                    return 0.0;
                }
                ((alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_beta(alpha, beta)).exp()
            }
            Primitive::Laplace { location, scale } => {
                (-(x - location).abs() / scale).exp() / (2.0 * scale)
            }
            Primitive::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Primitive::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Primitive::Beta { alpha, beta } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    beta_reg(alpha, beta, x)
                }
            }
            Primitive::Laplace { location, scale } => {
                let z = (x - location) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Primitive::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * x).exp()
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Primitive::Uniform { low, high } => 0.5 * (low + high),
            Primitive::Beta { alpha, beta } => alpha / (alpha + beta),
            Primitive::Laplace { location, .. } => location,
            Primitive::Exponential { rate } => 1.0 / rate,
        }
    }

    /// Closed interval outside which the density vanishes (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Primitive::Uniform { low, high } => (low, high),
            Primitive::Beta { .. } => (0.0, 1.0),
            Primitive::Laplace { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Primitive::Exponential { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Primitive::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Primitive::Beta { alpha, beta } => BetaSampler::new(alpha, beta)
                .expect("validated beta parameters")
                .sample(rng),
            Primitive::Laplace { location, scale } => {
                // inverse CDF on u ∈ (-1/2, 1/2)
                let u = rng.random::<f64>() - 0.5;
                let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                location - scale * u.signum() * tail.ln()
            }
            Primitive::Exponential { rate } => {
                let u: f64 = rng.random();
                -(1.0 - u).ln() / rate
            }
        }
    }
}

/// Weighted mixture of primitives along one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub components: Vec<(f64, Primitive)>,
}

impl Mixture {
    pub fn new(components: Vec<(f64, Primitive)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig("empty mixture".to_string()));
        }
        for (w, p) in &components {
            if !(*w > 0.0) {
                return Err(Error::InvalidConfig(format!("mixture weight {w} not positive")));
            }
            p.validate()?;
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(Self { components })
    }

    pub fn single(p: Primitive) -> Result<Self> {
        Self::new(vec![(1.0, p)])
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, p)| w * p.pdf(x)).sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, p)| w * p.cdf(x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|(w, p)| w * p.mean()).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, p) in &self.components {
            acc += w;
            if u < acc {
                return p.sample(rng);
            }
        }
        self.components[self.components.len() - 1].1.sample(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SynthType {
    #[serde(rename = "I")]
    TypeI,
    #[serde(rename = "II")]
    TypeII,
    #[serde(rename = "III")]
    TypeIII,
    #[serde(rename = "IV")]
    TypeIV,
    #[serde(rename = "beta_toy")]
    BetaToy,
}

impl SynthType {
    pub fn name(&self) -> &'static str {
        match self {
            SynthType::TypeI => "I",
            SynthType::TypeII => "II",
            SynthType::TypeIII => "III",
            SynthType::TypeIV => "IV",
            SynthType::BetaToy => "beta_toy",
        }
    }
}

impl std::str::FromStr for SynthType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "I" | "1" => SynthType::TypeI,
            "II" | "2" => SynthType::TypeII,
            "III" | "3" => SynthType::TypeIII,
            "IV" | "4" => SynthType::TypeIV,
            "beta_toy" | "beta" => SynthType::BetaToy,
            other => return Err(Error::InvalidConfig(format!("unknown synthetic type {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecKind {
    /// Every dimension follows the same mixture.
    IidMixtureProduct,
    /// Dimensions follow different marginals.
    HeterogeneousProduct,
}

/// Product density `∏_j marginals[j](x_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub name: String,
    pub kind: SpecKind,
    pub marginals: Vec<Mixture>,
}

fn uniform(low: f64, high: f64) -> Primitive {
    Primitive::Uniform { low, high }
}

impl DensitySpec {
    pub fn make(kind: SynthType, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(d));
        }
        let iid = |m: Mixture| Self {
            name: kind.name().to_string(),
            kind: SpecKind::IidMixtureProduct,
            marginals: vec![m; d],
        };
        Ok(match kind {
            SynthType::TypeI => iid(Mixture::new(vec![(0.3, uniform(0.7, 1.0)), (0.7, uniform(0.0, 0.4))])?),
            SynthType::TypeII => iid(Mixture::new(vec![
                (0.5, Primitive::Beta { alpha: 2.0, beta: 10.0 }),
                (0.5, uniform(0.5, 1.0)),
            ])?),
            SynthType::TypeIII => iid(Mixture::new(vec![
                (0.5, Primitive::Laplace { location: 0.0, scale: 0.5 }),
                (0.5, uniform(2.0, 4.0)),
            ])?),
            SynthType::TypeIV => {
                if d < 2 {
                    return Err(Error::InvalidConfig(
                        "type IV needs d >= 2 (exponential dimensions plus one uniform)".to_string(),
                    ));
                }
                let mut marginals = vec![Mixture::single(Primitive::Exponential { rate: 0.5 })?; d - 1];
                marginals.push(Mixture::single(uniform(0.0, 5.0))?);
                Self {
                    name: kind.name().to_string(),
                    kind: SpecKind::HeterogeneousProduct,
                    marginals,
                }
            }
            SynthType::BetaToy => iid(Mixture::single(Primitive::Beta { alpha: 3.0, beta: 10.0 })?),
        })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let mut p = 1.0;
        for (m, v) in self.marginals.iter().zip(x) {
            p *= m.pdf(*v);
            if p == 0.0 {
                break;
            }
        }
        Ok(p)
    }

    pub fn pdfs(&self, points: &Points) -> Result<Vec<f64>> {
        check_dim(self.dim(), points.dim())?;
        points.rows().map(|x| self.pdf(x)).collect()
    }

    /// `n` independent draws, row by row, dimension by dimension.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Points {
        let d = self.dim();
        let mut values = Vec::with_capacity(n * d);
        for _ in 0..n {
            for m in &self.marginals {
                values.push(m.sample(rng));
            }
        }
        Points::new(d, values).expect("dimension is positive")
    }
}
