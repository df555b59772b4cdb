//! Monte Carlo integration of posterior moments over Dirichlet-distributed
//! parameters.
//!
//! Each sample `U_j` draws every CPT column independently. With
//! `w_j = P(W | U_j)` and `y_j = P(x | W, U_j)`, the posterior moments are
//! estimated by the self-normalized ratios
//!
//! ```text
//! E[P(x | W)^k] ≈ Σ_j y_j^k w_j / Σ_j w_j
//! ```
//!
//! Samples are generated from `(seed, sample index)` alone and accumulated in
//! fixed batches combined in index order, so estimates are bit-identical for
//! any number of worker threads.

use rand::Rng;
use rayon::prelude::*;

use crate::dirichlet::sample_stream;
use crate::enumeration::{evidence_and_joint, EnumerationBudget, PointParameters};
use crate::error::{Error, Result};
use crate::meanprop::PropagationState;
use crate::model::{point_view, Evidence, Network};

const BATCH: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerEngine {
    /// Brute-force enumeration; works on any network within the budget.
    Enumeration,
    /// Mean propagation on the sampled point parameters; polytrees only.
    MeanPropagation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleConfig {
    pub sample_count: u64,
    pub seed: u64,
    pub inner_engine: InnerEngine,
    pub budget: EnumerationBudget,
}

impl SampleConfig {
    pub fn new(sample_count: u64, seed: u64) -> Self {
        Self {
            sample_count,
            seed,
            inner_engine: InnerEngine::MeanPropagation,
            budget: EnumerationBudget::default(),
        }
    }

    pub fn with_engine(mut self, engine: InnerEngine) -> Self {
        self.inner_engine = engine;
        self
    }

    /// Mean propagation where the network allows it, enumeration otherwise.
    pub fn for_network(sample_count: u64, seed: u64, net: &Network) -> Self {
        let engine = if net.is_polytree() {
            InnerEngine::MeanPropagation
        } else {
            InnerEngine::Enumeration
        };
        Self::new(sample_count, seed).with_engine(engine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResult {
    pub value: f64,
    pub std_error: f64,
    pub sample_count: u64,
    /// `Σ_j P(W | U_j)`.
    pub weight_sum: f64,
}

/// Mean, second moment and variance estimated from one set of samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimates {
    pub mean: EstimateResult,
    pub second_moment: EstimateResult,
    pub variance: EstimateResult,
}

/// Draws every CPT column independently from its Dirichlet distribution,
/// columns in node order then row order.
pub fn sample_parameters<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> PointParameters {
    let mut u = point_view(net);
    for (i, node) in net.nodes().iter().enumerate() {
        let t = node.alternatives();
        let table = u.table_mut(i);
        for (counts, row) in node.cpt().iter().zip(table.chunks_exact_mut(t)) {
            row.copy_from_slice(counts.sample(rng).as_slice());
        }
    }
    u
}

/// `(P(W | U), P(node | W, U))` for one parameter set. The conditional is
/// `None` when the evidence is impossible under `u`.
pub fn point_posterior(
    net: &Network,
    u: &PointParameters,
    w: &Evidence,
    node: usize,
    engine: InnerEngine,
    budget: EnumerationBudget,
) -> Result<(f64, Option<Vec<f64>>)> {
    net.check_node(node)?;
    if w.contains(node) {
        return Err(Error::QueryInEvidence(net.node(node).id().to_string()));
    }
    match engine {
        InnerEngine::Enumeration => {
            let (pw, mut joint) = evidence_and_joint(net, u, w, node, budget)?;
            if pw <= 0.0 {
                return Ok((0.0, None));
            }
            for p in &mut joint {
                *p /= pw;
            }
            Ok((pw, Some(joint)))
        }
        InnerEngine::MeanPropagation => {
            let mut state = PropagationState::from_points(net, u)?;
            match state.assert_all(w) {
                Ok(()) => Ok((state.evidence_probability(), Some(state.posterior_mean(node)))),
                Err(Error::ImpossibleEvidence) => Ok((0.0, None)),
                Err(e) => Err(e),
            }
        }
    }
}

/// Weighted sums needed for the ratio estimators and their delta-method
/// standard errors.
#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    n: u64,
    w: f64,
    w_y1: f64,
    w_y2: f64,
    // Second-order sums of w_j^2 times monomials in y.
    ww: f64,
    ww_y1: f64,
    ww_y2: f64,
    ww_y1y1: f64,
    ww_y1y2: f64,
    ww_y2y2: f64,
}

impl Accumulator {
    fn push(&mut self, w: f64, y: f64) {
        let y2 = y * y;
        let ww = w * w;
        self.n += 1;
        self.w += w;
        self.w_y1 += w * y;
        self.w_y2 += w * y2;
        self.ww += ww;
        self.ww_y1 += ww * y;
        self.ww_y2 += ww * y2;
        self.ww_y1y1 += ww * y2;
        self.ww_y1y2 += ww * y * y2;
        self.ww_y2y2 += ww * y2 * y2;
    }

    fn merge(mut self, o: &Self) -> Self {
        self.n += o.n;
        self.w += o.w;
        self.w_y1 += o.w_y1;
        self.w_y2 += o.w_y2;
        self.ww += o.ww;
        self.ww_y1 += o.ww_y1;
        self.ww_y2 += o.ww_y2;
        self.ww_y1y1 += o.ww_y1y1;
        self.ww_y1y2 += o.ww_y1y2;
        self.ww_y2y2 += o.ww_y2y2;
        self
    }

    /// Estimates for the ratio `Σ w (c1 y + c2 y²) / Σ w` where the
    /// linearized influence of sample j is `w_j (c1 y_j + c2 y_j² - c0)` and
    /// `c0` is the estimate itself. Returns `sqrt(Σ influence²) / Σ w`.
    fn std_error(&self, c0: f64, c1: f64, c2: f64) -> f64 {
        // Σ w² (c1 y + c2 y² - c0)², expanded.
        let s = c1 * c1 * self.ww_y1y1
            + c2 * c2 * self.ww_y2y2
            + c0 * c0 * self.ww
            + 2.0 * c1 * c2 * self.ww_y1y2
            - 2.0 * c0 * c1 * self.ww_y1
            - 2.0 * c0 * c2 * self.ww_y2;
        s.max(0.0).sqrt() / self.w
    }
}

fn accumulate(
    net: &Network,
    w: &Evidence,
    node: usize,
    alt: usize,
    cfg: &SampleConfig,
) -> Result<Accumulator> {
    let batches = cfg.sample_count.div_ceil(BATCH);
    let partials: Vec<Result<Accumulator>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut acc = Accumulator::default();
            let end = ((b + 1) * BATCH).min(cfg.sample_count);
            for j in b * BATCH..end {
                let mut rng = sample_stream(cfg.seed, j);
                let u = sample_parameters(net, &mut rng);
                let (pw, post) = point_posterior(net, &u, w, node, cfg.inner_engine, cfg.budget)?;
                match post {
                    Some(post) => acc.push(pw, post[alt]),
                    None => acc.push(0.0, 0.0),
                }
            }
            Ok(acc)
        })
        .collect();
    partials
        .into_iter()
        .try_fold(Accumulator::default(), |acc, p| Ok(acc.merge(&p?)))
}

fn validate(net: &Network, w: &Evidence, node: usize, alt: usize, cfg: &SampleConfig) -> Result<()> {
    net.check_alternative(node, alt)?;
    if w.contains(node) {
        return Err(Error::QueryInEvidence(net.node(node).id().to_string()));
    }
    if cfg.sample_count == 0 {
        return Err(Error::Config("sample_count must be at least 1".into()));
    }
    match cfg.inner_engine {
        InnerEngine::Enumeration => cfg.budget.check(net, w),
        InnerEngine::MeanPropagation => net.require_polytree(),
    }
}

/// Estimates the posterior mean, second moment and variance of
/// `P(node = alt | W)` from one sample set.
pub fn estimate_moments(
    net: &Network,
    w: &Evidence,
    node: usize,
    alt: usize,
    cfg: &SampleConfig,
) -> Result<MomentEstimates> {
    validate(net, w, node, alt, cfg)?;
    let acc = accumulate(net, w, node, alt, cfg)?;
    if acc.w.is_nan() || acc.w <= 0.0 {
        return Err(Error::ImpossibleEvidence);
    }
    let r1 = acc.w_y1 / acc.w;
    let r2 = acc.w_y2 / acc.w;
    let result = |value: f64, std_error: f64| EstimateResult {
        value,
        std_error,
        sample_count: acc.n,
        weight_sum: acc.w,
    };
    Ok(MomentEstimates {
        mean: result(r1, acc.std_error(r1, 1.0, 0.0)),
        second_moment: result(r2, acc.std_error(r2, 0.0, 1.0)),
        // V = R2 - R1²; influence w (y² - R2 - 2 R1 (y - R1)).
        variance: result(
            r2 - r1 * r1,
            acc.std_error(r2 - 2.0 * r1 * r1, -2.0 * r1, 1.0),
        ),
    })
}

/// `E[P(node = alt | W)^2]`.
pub fn estimate_second_moment(
    net: &Network,
    w: &Evidence,
    node: usize,
    alt: usize,
    cfg: &SampleConfig,
) -> Result<EstimateResult> {
    Ok(estimate_moments(net, w, node, alt, cfg)?.second_moment)
}

/// `Var[P(node = alt | W)]`.
pub fn estimate_variance(
    net: &Network,
    w: &Evidence,
    node: usize,
    alt: usize,
    cfg: &SampleConfig,
) -> Result<EstimateResult> {
    Ok(estimate_moments(net, w, node, alt, cfg)?.variance)
}
