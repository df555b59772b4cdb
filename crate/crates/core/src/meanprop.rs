//! Propagation of expected probabilities on polytrees with π/λ messages.
//!
//! ```text
//! π(f)        = Σ_cfg P(f | cfg) Π_i π_{-F}(af_i)
//! λ(f)        = Π_j λ_{-CF_j}(f)
//! π_{-F}(e)   = π(e) Π_{k: CE_k ≠ F} λ_{-CE_k}(e)
//! λ_{-G}(f)   = Σ_u Σ_{cfg ∋ f} P(g^u | cfg) Π_{k: AG_k ≠ F} π_{-G}(ag_k) λ(g^u)
//! E[P(f)]     = α λ(f) π(f),   α = 1 / Σ_f λ(f) π(f)
//! ```
//!
//! Messages stay unnormalized, so before any evidence every λ is 1 and
//! every α is 1. The per-node α is exposed because the second-moment method
//! scales its products by α².

use crate::engine::Engine;
use crate::enumeration::PointParameters;
use crate::error::{Error, Result};
use crate::model::{point_view, Evidence, Network};

#[derive(Debug, Clone)]
pub struct PropagationState<'a> {
    net: &'a Network,
    engine: Engine<'a>,
    evidence: Evidence,
    evidence_probability: f64,
}

impl<'a> PropagationState<'a> {
    /// Mean propagation with every CPT column replaced by its Dirichlet mean.
    pub fn initialize(net: &'a Network) -> Result<Self> {
        Self::from_points(net, &point_view(net))
    }

    /// Propagation on explicit point parameters.
    pub fn from_points(net: &'a Network, u: &PointParameters) -> Result<Self> {
        net.require_polytree()?;
        u.check_shape(net)?;
        let cards = net.nodes().iter().map(|n| n.alternatives()).collect();
        let tables = (0..net.len()).map(|i| u.table(i).to_vec()).collect();
        Ok(Self {
            net,
            engine: Engine::new(net, cards, tables),
            evidence: Evidence::new(),
            evidence_probability: 1.0,
        })
    }

    pub fn network(&self) -> &'a Network {
        self.net
    }

    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    /// Instantiates `node = alt` and propagates until quiescent.
    ///
    /// Fails without touching the state if the node is already instantiated
    /// or the new evidence has probability zero given the current evidence.
    pub fn assert_evidence(&mut self, node: usize, alt: usize) -> Result<()> {
        self.net.check_alternative(node, alt)?;
        if self.evidence.contains(node) {
            return Err(Error::AlreadyInstantiated(self.net.node(node).id().to_string()));
        }
        let p = self.posterior_mean(node)[alt];
        if p.is_nan() || p <= 0.0 {
            return Err(Error::ImpossibleEvidence);
        }
        self.evidence.insert(self.net, node, alt)?;
        self.evidence_probability *= p;
        self.engine.clamp_and_propagate(node, alt);
        Ok(())
    }

    /// Asserts every assignment in `w`, in node-index order.
    pub fn assert_all(&mut self, w: &Evidence) -> Result<()> {
        for (node, alt) in w.iter() {
            self.assert_evidence(node, alt)?;
        }
        Ok(())
    }

    /// `E[P(node = k | W)]` for every alternative `k`.
    pub fn posterior_mean(&self, node: usize) -> Vec<f64> {
        let alpha = self.normalizer(node);
        self.engine.belief(node).iter().map(|b| alpha * b).collect()
    }

    /// α such that α λ π sums to 1 at `node`.
    pub fn normalizer(&self, node: usize) -> f64 {
        1.0 / self.engine.belief(node).iter().sum::<f64>()
    }

    /// Probability of the asserted evidence, accumulated by the chain rule
    /// as each assignment is made.
    pub fn evidence_probability(&self) -> f64 {
        self.evidence_probability
    }

    pub fn pi(&self, node: usize) -> Vec<f64> {
        self.engine.pi(node)
    }

    pub fn lambda(&self, node: usize) -> Vec<f64> {
        self.engine.lambda(node)
    }

    /// π message from `parent` to `child`, if that edge exists.
    pub fn pi_message(&self, parent: usize, child: usize) -> Option<&[f64]> {
        self.engine
            .edge_between(parent, child)
            .map(|e| self.engine.pi_msg(e))
    }

    /// λ message from `child` to `parent`, if that edge exists.
    pub fn lambda_message(&self, child: usize, parent: usize) -> Option<&[f64]> {
        self.engine
            .edge_between(parent, child)
            .map(|e| self.engine.lambda_msg(e))
    }

    /// Largest change any message would undergo if recomputed now.
    pub fn message_residual(&self) -> f64 {
        self.engine.residual()
    }
}
