//! Closed-form moments of Dirichlet-distributed probability vectors and a
//! reproducible sampler for them.
//!
//! Counts `a_1..a_t` describe the distribution `Dirichlet(a_1 + 1, ..., a_t + 1)`,
//! so all-zero counts are the uniform distribution over the simplex. With
//! `S = sum(a) + t`:
//!
//! ```text
//! E[P_i]      = (a_i + 1) / S
//! E[P_i^2]    = (a_i + 2) / (S + 1) * E[P_i]
//! E[P_i P_j]  = (a_i + 1)(a_j + 1) / ((S + 1) S)      i != j
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic random stream used for all sampling.
pub type SampleStream = ChaCha8Rng;

/// Returns the substream `index` of the stream seeded by `seed`.
///
/// Substreams never overlap, so callers may hand out one per sample (or per
/// batch) and stay reproducible regardless of scheduling.
pub fn sample_stream(seed: u64, index: u64) -> SampleStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Dirichlet counts for one CPT column or root prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DirichletCounts(Vec<f64>);

impl DirichletCounts {
    pub fn new(counts: Vec<f64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidCounts(format!(
                "need at least 2 alternatives, got {}",
                counts.len()
            )));
        }
        if let Some(bad) = counts.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(Error::InvalidCounts(format!(
                "counts must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(Self(counts))
    }

    /// Equal counts `a` over `alternatives` alternatives.
    pub fn symmetric(a: f64, alternatives: usize) -> Result<Self> {
        Self::new(vec![a; alternatives])
    }

    pub fn counts(&self) -> &[f64] {
        &self.0
    }

    pub fn alternatives(&self) -> usize {
        self.0.len()
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|a| a * factor).collect())
    }

    /// `sum(a) + t`, the total concentration of the Dirichlet distribution.
    fn concentration(&self) -> f64 {
        self.0.iter().sum::<f64>() + self.0.len() as f64
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.0.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.0.len(),
            })
        }
    }

    pub fn mean(&self, i: usize) -> Result<f64> {
        self.check(i)?;
        Ok((self.0[i] + 1.0) / self.concentration())
    }

    /// The full mean vector.
    pub fn means(&self) -> Vec<f64> {
        let s = self.concentration();
        self.0.iter().map(|a| (a + 1.0) / s).collect()
    }

    pub fn second_moment(&self, i: usize) -> Result<f64> {
        let m = self.mean(i)?;
        Ok((self.0[i] + 2.0) / (self.concentration() + 1.0) * m)
    }

    /// `E[P_i P_j]` for `i != j`. Asking for `i == j` is an error because
    /// the same-index moment is a different formula.
    pub fn cross_moment(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i)?;
        self.check(j)?;
        if i == j {
            return Err(Error::SameIndex(i));
        }
        let s = self.concentration();
        Ok((self.0[i] + 1.0) * (self.0[j] + 1.0) / ((s + 1.0) * s))
    }

    /// `E[P_i P_j]` for any pair, dispatching to the second moment on the diagonal.
    pub fn pair_moment(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            self.second_moment(i)
        } else {
            self.cross_moment(i, j)
        }
    }

    pub fn variance(&self, i: usize) -> Result<f64> {
        let m = self.mean(i)?;
        let v = self.second_moment(i)? - m * m;
        // Exact value is a_i' (S - a_i') / (S^2 (S + 1)) >= 0; rounding can dip below.
        Ok(v.max(0.0))
    }

    /// Draws one probability vector from `Dirichlet(a + 1)` by normalizing
    /// independent `Gamma(a_i + 1, 1)` variates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ProbabilityVector {
        let mut draws: Vec<f64> = self
            .0
            .iter()
            .map(|a| {
                Gamma::new(a + 1.0, 1.0)
                    .expect("shape >= 1 and scale 1 are valid")
                    .sample(rng)
            })
            .collect();
        let total: f64 = draws.iter().sum();
        for d in &mut draws {
            *d /= total;
        }
        ProbabilityVector(draws)
    }
}

impl TryFrom<Vec<f64>> for DirichletCounts {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<DirichletCounts> for Vec<f64> {
    fn from(value: DirichletCounts) -> Self {
        value.0
    }
}

/// A realized probability distribution over a node's alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(p: Vec<f64>) -> Result<Self> {
        let sum: f64 = p.iter().sum();
        if p.len() < 2
            || p.iter().any(|x| !(*x > 0.0 && *x < 1.0))
            || (sum - 1.0).abs() > Self::SUM_TOLERANCE
        {
            return Err(Error::InvalidCounts(format!(
                "not a probability vector: {p:?}"
            )));
        }
        Ok(Self(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}
