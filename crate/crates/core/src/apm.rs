//! Approximate propagation of second moments `E[P(f^s) P(f^t)]`.
//!
//! The π'/λ' recurrences are the first-moment recurrences lifted to pairs of
//! alternatives, with every product of two CPT entries replaced by its
//! expectation under the Dirichlet counts:
//!
//! ```text
//! π'(f^s, f^t)       = Σ_{cfg_s, cfg_t} E[P(f^s | cfg_s) P(f^t | cfg_t)] Π_i π'_{-F}(af_i^s, af_i^t)
//! π'_{-F}(e^s, e^t)  = π'(e^s, e^t) Π_{k: CE_k ≠ F} λ'_{-CE_k}(e^s, e^t)
//! λ'(f^s, f^t)       = Π_j λ'_{-CF_j}(f^s, f^t)
//! λ'_{-G}(f^s, f^t)  = Σ_{u,v} Σ_{cfg ∋ f^s, cfg' ∋ f^t} E[P(g^u | cfg) P(g^v | cfg')]
//!                        Π_{k: AG_k ≠ F} π'_{-G}(ag_k^u, ag_k^v) λ'(g^u, g^v)
//! E[P(f^s) P(f^t)]   = α² λ'(f^s, f^t) π'(f^s, f^t)
//! ```
//!
//! α is the mean-propagation normalizer of the queried node. The product is
//! not renormalized, so posterior matrices need not sum to one.

use std::fmt;
use std::ops::Index;

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::meanprop::PropagationState;
use crate::model::{Evidence, Network};

/// Square matrix over pairs of a node's alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    n: usize,
    data: Vec<f64>,
}

impl PairMatrix {
    fn from_flat(n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.data[s * self.n + t]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn row_sum(&self, s: usize) -> f64 {
        self.data[s * self.n..(s + 1) * self.n].iter().sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|s| (0..s).all(|t| (self.get(s, t) - self.get(t, s)).abs() <= tol))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n)
    }
}

impl Index<(usize, usize)> for PairMatrix {
    type Output = f64;

    fn index(&self, (s, t): (usize, usize)) -> &f64 {
        &self.data[s * self.n + t]
    }
}

impl fmt::Display for PairMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.rows().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            write!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// `E[P(node^s | row u) P(node^t | row v)]`. Within one CPT column this is
/// the Dirichlet second or cross moment; distinct columns are independent,
/// so their product factorizes into means.
pub fn cpt_cross_moment(
    net: &Network,
    node: usize,
    s: usize,
    t: usize,
    u: usize,
    v: usize,
) -> Result<f64> {
    net.check_alternative(node, s)?;
    net.check_alternative(node, t)?;
    let cpt = net.node(node).cpt();
    for config in [u, v] {
        if config >= cpt.len() {
            return Err(Error::ConfigurationOutOfRange {
                node: net.node(node).id().to_string(),
                config,
                configs: cpt.len(),
            });
        }
    }
    if u == v {
        cpt[u].pair_moment(s, t)
    } else {
        Ok(cpt[u].mean(s)? * cpt[v].mean(t)?)
    }
}

/// Table of `cpt_cross_moment` over pair states: rows are pair configurations
/// of the parents (each parent's pair state is `s * t_k + t`), columns are
/// the node's own pair states.
fn pair_table(net: &Network, node: usize) -> Vec<f64> {
    let t = net.alternatives(node);
    let cpt = net.node(node).cpt();
    let means: Vec<Vec<f64>> = cpt.iter().map(|c| c.means()).collect();
    let cards = net.parent_cards(node);
    let pair_cards: Vec<usize> = cards.iter().map(|c| c * c).collect();
    let rows: usize = pair_cards.iter().product();
    let mut table = Vec::with_capacity(rows * t * t);
    let mut digits = vec![0usize; cards.len()];
    for _ in 0..rows {
        // Split each parent's pair state into its two configurations.
        let (mut cu, mut cv) = (0, 0);
        for (&d, &card) in digits.iter().zip(&cards) {
            cu = cu * card + d / card;
            cv = cv * card + d % card;
        }
        for s in 0..t {
            for r in 0..t {
                let m = if cu == cv {
                    cpt[cu].pair_moment(s, r).expect("in range")
                } else {
                    means[cu][s] * means[cv][r]
                };
                table.push(m);
            }
        }
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < pair_cards[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    table
}

/// A posterior variance and whether the approximation drove it negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub value: f64,
    pub negative: bool,
}

#[derive(Debug, Clone)]
pub struct MomentState<'a> {
    means: PropagationState<'a>,
    pairs: Engine<'a>,
}

impl<'a> MomentState<'a> {
    /// Second-moment state before any evidence: roots carry their Dirichlet
    /// moment matrices, every other node the top-down expectation of its
    /// CPT products, and every λ' is the all-ones matrix.
    pub fn initialize(net: &'a Network) -> Result<Self> {
        let means = PropagationState::initialize(net)?;
        let cards = net
            .nodes()
            .iter()
            .map(|n| n.alternatives() * n.alternatives())
            .collect();
        let tables = (0..net.len()).map(|i| pair_table(net, i)).collect();
        Ok(Self {
            means,
            pairs: Engine::new(net, cards, tables),
        })
    }

    pub fn means(&self) -> &PropagationState<'a> {
        &self.means
    }

    pub fn network(&self) -> &'a Network {
        self.means.network()
    }

    pub fn evidence(&self) -> &Evidence {
        self.means.evidence()
    }

    /// Instantiates `node = alt` in both the mean and the pair propagation.
    /// The instantiated node's λ' and π' become the indicator of `(alt, alt)`.
    pub fn assert_evidence(&mut self, node: usize, alt: usize) -> Result<()> {
        self.means.assert_evidence(node, alt)?;
        let t = self.network().alternatives(node);
        self.pairs.clamp_and_propagate(node, alt * t + alt);
        Ok(())
    }

    pub fn assert_all(&mut self, w: &Evidence) -> Result<()> {
        for (node, alt) in w.iter() {
            self.assert_evidence(node, alt)?;
        }
        Ok(())
    }

    fn matrix(&self, node: usize, flat: Vec<f64>) -> PairMatrix {
        PairMatrix::from_flat(self.network().alternatives(node), flat)
    }

    pub fn pi2(&self, node: usize) -> PairMatrix {
        self.matrix(node, self.pairs.pi(node))
    }

    pub fn lambda2(&self, node: usize) -> PairMatrix {
        self.matrix(node, self.pairs.lambda(node))
    }

    /// π' message from `parent` to `child`.
    pub fn pi2_message(&self, parent: usize, child: usize) -> Option<PairMatrix> {
        let e = self.pairs.edge_between(parent, child)?;
        Some(self.matrix(parent, self.pairs.pi_msg(e).to_vec()))
    }

    /// λ' message from `child` to `parent`.
    pub fn lambda2_message(&self, child: usize, parent: usize) -> Option<PairMatrix> {
        let e = self.pairs.edge_between(parent, child)?;
        Some(self.matrix(parent, self.pairs.lambda_msg(e).to_vec()))
    }

    /// `E[P(node^s) P(node^t) | W]` as `α² λ'(s, t) π'(s, t)`.
    pub fn posterior_second_moment(&self, node: usize) -> PairMatrix {
        let alpha = self.means.normalizer(node);
        let scale = alpha * alpha;
        let flat = self
            .pairs
            .belief(node)
            .into_iter()
            .map(|b| scale * b)
            .collect();
        self.matrix(node, flat)
    }

    pub fn posterior_mean(&self, node: usize) -> Vec<f64> {
        self.means.posterior_mean(node)
    }

    /// `E[P(node^alt)^2] - E[P(node^alt)]^2`. A negative result is returned
    /// as computed, with the flag set.
    pub fn posterior_variance(&self, node: usize, alt: usize) -> VarianceEstimate {
        let m = self.posterior_mean(node)[alt];
        let value = self.posterior_second_moment(node).get(alt, alt) - m * m;
        VarianceEstimate {
            value,
            negative: value < 0.0,
        }
    }

    pub fn message_residual(&self) -> f64 {
        self.means.message_residual().max(self.pairs.residual())
    }

    /// Debug-only sanity hook: the pair engine clamps exactly where the mean
    /// engine holds evidence.
    #[cfg(test)]
    fn clamps_agree(&self) -> bool {
        (0..self.network().len()).all(|i| {
            let t = self.network().alternatives(i);
            self.pairs.clamped(i) == self.evidence().get(i).map(|a| a * t + a)
                && self.pairs.cards(i) == t * t
        })
    }
}

/// Convenience wrapper: initializes, asserts `w`, and returns the state.
pub fn propagate<'a>(net: &'a Network, w: &Evidence) -> Result<MomentState<'a>> {
    let mut state = MomentState::initialize(net)?;
    state.assert_all(w)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::sample_stream;
    use crate::experiments::{chain_network, star_network};
    use crate::random::{random_evidence, random_polytree, PolytreeSpec};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    fn table1(a: f64) -> Network {
        star_network(&[a, a], &[[a, a], [a, a]], 1)
    }

    fn table2(a: f64) -> Network {
        star_network(&[a, a], &[[a, a], [a, a]], 2)
    }

    fn table3(a: f64) -> Network {
        chain_network(&[a, a], &[[a, a], [a, a]], 2)
    }

    #[test]
    fn cpt_cross_moment_cases() {
        let net = table1(0.0);
        assert!((cpt_cross_moment(&net, 1, 0, 0, 0, 0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        for (s, t) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(cpt_cross_moment(&net, 1, s, t, 0, 1).unwrap(), 0.25);
        }
        let net = table1(1.0);
        assert!((cpt_cross_moment(&net, 1, 0, 1, 1, 1).unwrap() - 0.2).abs() < 1e-15);
        assert!(cpt_cross_moment(&net, 1, 0, 2, 0, 0).is_err());
        assert!(matches!(
            cpt_cross_moment(&net, 1, 0, 0, 0, 2),
            Err(Error::ConfigurationOutOfRange { .. })
        ));
    }

    #[test]
    fn initial_moments() {
        let net = table1(0.0);
        let st = MomentState::initialize(&net).unwrap();
        let root = st.posterior_second_moment(0);
        assert!((root[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((root[(0, 1)] - 1.0 / 6.0).abs() < 1e-15);
        assert!((root[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);

        let child = st.posterior_second_moment(1);
        assert!((child[(0, 0)] - 11.0 / 36.0).abs() < 1e-15);
        assert!((child[(0, 1)] - 7.0 / 36.0).abs() < 1e-15);
        assert!((child.sum() - 1.0).abs() < 1e-15);
        assert_eq!(st.lambda2(1).sum(), 4.0);
        assert!(st.clamps_agree());

        // Vanishing variance: moments factorize into products of means.
        let net = chain_network(&[3e6, 1e6], &[[1e6, 2e6], [5e6, 5e6]], 2);
        let st = MomentState::initialize(&net).unwrap();
        for node in 0..net.len() {
            let m = st.posterior_mean(node);
            let m2 = st.posterior_second_moment(node);
            for s in 0..2 {
                for t in 0..2 {
                    assert!((m2[(s, t)] - m[s] * m[t]).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn single_child_messages_and_table_values() {
        let net = table1(0.0);
        let mut st = MomentState::initialize(&net).unwrap();
        st.assert_evidence(1, 0).unwrap();
        let msg = st.lambda2_message(1, 0).unwrap();
        assert!((msg[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((msg[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(msg[(0, 1)], 0.25);
        assert_eq!(msg[(1, 0)], 0.25);

        let m2 = st.posterior_second_moment(0);
        assert!((m2[(0, 0)] - 4.0 / 9.0).abs() < 1e-15);
        // Not renormalized after evidence: 4 (1/3 * 1/3 * 2 + 1/6 * 1/4 * 2) = 11/9.
        assert!((m2.sum() - 11.0 / 9.0).abs() < 1e-14);

        let v = st.posterior_variance(0, 0);
        assert!((v.value - 7.0 / 36.0).abs() < 1e-15);
        assert!(!v.negative);

        let ev = st.posterior_second_moment(1);
        assert_eq!(ev[(0, 0)], 1.0);
        assert_eq!(ev.sum(), 1.0);
        assert_eq!(st.posterior_variance(1, 0).value, 0.0);
    }

    #[test]
    fn two_children_closed_form() {
        // alpha = 4 and every factor is E[P^2] = (a + 2) / (2 (2a + 3)), so
        // the root entry is 2 (a + 2)^3 / (2a + 3)^3.
        for a in [0.0, 1.0, 2.0, 5.0, 10.0, 20.0] {
            let net = table2(a);
            let w = Evidence::from_ids(&net, &[("C1", 0), ("C2", 0)]).unwrap();
            let got = propagate(&net, &w).unwrap().posterior_second_moment(0)[(0, 0)];
            let want = 2.0 * (a + 2.0f64).powi(3) / (2.0 * a + 3.0f64).powi(3);
            assert!((got - want).abs() < 1e-14, "a={a}: {got} vs {want}");
        }
    }

    #[test]
    fn two_children_and_grandchild() {
        let net = table2(0.0);
        let st = propagate(&net, &Evidence::from_ids(&net, &[("C1", 0), ("C2", 0)]).unwrap()).unwrap();
        assert!((st.posterior_second_moment(0)[(0, 0)] - 16.0 / 27.0).abs() < 1e-15);

        let net = table3(0.0);
        let leaf = net.len() - 1;
        let mut st = MomentState::initialize(&net).unwrap();
        st.assert_evidence(leaf, 0).unwrap();
        let msg = st.lambda2_message(1, 0).unwrap();
        assert!((msg[(0, 0)] - 11.0 / 36.0).abs() < 1e-15);
        assert!((msg[(0, 1)] - 7.0 / 24.0).abs() < 1e-15);
        assert!((st.posterior_second_moment(0)[(0, 0)] - 44.0 / 108.0).abs() < 1e-15);
    }

    #[test]
    fn prior_variance_and_errors() {
        let net = table1(0.0);
        let mut st = MomentState::initialize(&net).unwrap();
        assert!((st.posterior_variance(0, 0).value - 1.0 / 12.0).abs() < 1e-15);
        st.assert_evidence(1, 0).unwrap();
        assert!(matches!(st.assert_evidence(1, 0), Err(Error::AlreadyInstantiated(_))));
        assert!(matches!(st.assert_evidence(1, 1), Err(Error::AlreadyInstantiated(_))));

        let net = chain_network(&[2e6, 2e6], &[[1e6, 3e6], [3e6, 1e6]], 3);
        let leaf = net.len() - 1;
        let st = propagate(&net, &Evidence::new().with(&net, leaf, 1).unwrap()).unwrap();
        for node in 0..net.len() {
            assert!(st.posterior_variance(node, 0).value.abs() < 1e-4);
        }
    }

    #[test]
    fn figure_trends() {
        // Root variance grows with the number of instantiated children.
        let mut last = f64::NEG_INFINITY;
        for n in 1..=5 {
            let net = star_network(&[0.0, 0.0], &[[0.0, 0.0], [0.0, 0.0]], n);
            let mut w = Evidence::new();
            for c in 1..=n {
                w.insert(&net, c, 0).unwrap();
            }
            let v = propagate(&net, &w).unwrap().posterior_variance(0, 0).value;
            assert!(v > last);
            last = v;
        }
        // And levels off with the depth of an instantiated leaf.
        let series: Vec<f64> = (1..=6)
            .map(|d| {
                let net = chain_network(&[0.0, 0.0], &[[0.0, 0.0], [0.0, 0.0]], d);
                let leaf = net.len() - 1;
                propagate(&net, &Evidence::new().with(&net, leaf, 0).unwrap())
                    .unwrap()
                    .posterior_variance(0, 0)
                    .value
            })
            .collect();
        let diffs: Vec<f64> = series.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(diffs.windows(2).all(|d| d[1] < d[0]), "{diffs:?}");
        assert!(diffs[4] < 1e-3);
        // Fixed point of the a = 0 chain recurrence: 4 * (1/3) * 0.3 - 1/4.
        assert!((series[5] - 0.15).abs() < 1e-3);
    }

    fn random_state(seed: u64) -> (Network, Evidence) {
        let mut rng = sample_stream(seed, 7);
        let net = random_polytree(&mut rng, &PolytreeSpec::default());
        let count = (seed % 4) as usize;
        let w = random_evidence(&mut rng, &net, count);
        (net, w)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn prior_matrices_are_consistent(seed in any::<u64>()) {
            let (net, _) = random_state(seed);
            let st = MomentState::initialize(&net).unwrap();
            for node in 0..net.len() {
                let m2 = st.posterior_second_moment(node);
                let mean = st.posterior_mean(node);
                prop_assert!((m2.sum() - 1.0).abs() < 1e-10);
                for s in 0..m2.size() {
                    prop_assert!((m2.row_sum(s) - mean[s]).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn posterior_matrices_symmetric_nonnegative_quiescent(seed in any::<u64>()) {
            let (net, w) = random_state(seed);
            let st = propagate(&net, &w).unwrap();
            prop_assert!(st.clamps_agree());
            prop_assert!(st.message_residual() < 1e-12);
            for node in 0..net.len() {
                let m2 = st.posterior_second_moment(node);
                prop_assert!(m2.is_symmetric(1e-12));
                prop_assert!(m2.rows().flatten().all(|v| *v >= 0.0));
            }
        }

        #[test]
        fn evidence_order_independence(seed in any::<u64>()) {
            // Messages are a function of the evidence set on a polytree, so
            // this holds exactly up to rounding.
            let (net, w) = random_state(seed | 3);
            let forward = propagate(&net, &w).unwrap();
            let mut pairs: Vec<(usize, usize)> = w.iter().collect();
            pairs.shuffle(&mut sample_stream(seed, 99));
            pairs.reverse();
            let mut other = MomentState::initialize(&net).unwrap();
            for (n, a) in pairs {
                other.assert_evidence(n, a).unwrap();
            }
            for node in 0..net.len() {
                let a = forward.posterior_second_moment(node);
                let b = other.posterior_second_moment(node);
                for (x, y) in a.rows().flatten().zip(b.rows().flatten()) {
                    prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
                }
            }
        }
    }
}
