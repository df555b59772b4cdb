//! Table-driven π/λ message passing on a polytree.
//!
//! Each node has `cards[node]` states and a table `P(state | parent states)`
//! with rows in canonical order over the parents' states. Messages are kept
//! unnormalized. An instantiated (clamped) node has π and λ equal to the
//! indicator of its state; its π messages to children are that indicator and
//! its λ messages to parents are weighted by it.
//!
//! Mean propagation runs this on the point CPT. The second-moment method runs
//! it on the pair space, where node `F` has states `(s, t)` and the table
//! holds `E[P(f^s | cfg_s) P(f^t | cfg_t)]`.

use crate::model::Network;

#[derive(Debug, Clone)]
pub(crate) struct Engine<'a> {
    net: &'a Network,
    cards: Vec<usize>,
    parent_cards: Vec<Vec<usize>>,
    tables: Vec<Vec<f64>>,
    clamped: Vec<Option<usize>>,
    // Indexed by edge; length is the parent's state count.
    pi_msgs: Vec<Vec<f64>>,
    lambda_msgs: Vec<Vec<f64>>,
}

/// Steps through parent configurations in canonical order.
struct Odometer<'c> {
    cards: &'c [usize],
    digits: Vec<usize>,
}

impl<'c> Odometer<'c> {
    fn new(cards: &'c [usize]) -> Self {
        Self {
            cards,
            digits: vec![0; cards.len()],
        }
    }

    fn advance(&mut self) {
        for k in (0..self.cards.len()).rev() {
            self.digits[k] += 1;
            if self.digits[k] < self.cards[k] {
                return;
            }
            self.digits[k] = 0;
        }
    }
}

fn indicator(len: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[at] = 1.0;
    v
}

impl<'a> Engine<'a> {
    /// Starts with every λ message equal to 1 and π messages computed top-down.
    pub(crate) fn new(net: &'a Network, cards: Vec<usize>, tables: Vec<Vec<f64>>) -> Self {
        let parent_cards = (0..net.len())
            .map(|i| net.parents(i).iter().map(|&p| cards[p]).collect())
            .collect();
        let lambda_msgs: Vec<Vec<f64>> = net
            .edges()
            .iter()
            .map(|&(p, _)| vec![1.0; cards[p]])
            .collect();
        let mut engine = Self {
            net,
            pi_msgs: lambda_msgs.clone(),
            lambda_msgs,
            cards,
            parent_cards,
            tables,
            clamped: vec![None; net.len()],
        };
        for &v in net.topological_order() {
            for &e in net.child_edges(v) {
                engine.pi_msgs[e] = engine.pi_message(e);
            }
        }
        engine
    }

    #[cfg(test)]
    pub(crate) fn cards(&self, node: usize) -> usize {
        self.cards[node]
    }

    #[cfg(test)]
    pub(crate) fn clamped(&self, node: usize) -> Option<usize> {
        self.clamped[node]
    }

    /// π(x): the node's table weighted by its incoming π messages.
    pub(crate) fn pi(&self, node: usize) -> Vec<f64> {
        let t = self.cards[node];
        if let Some(s) = self.clamped[node] {
            return indicator(t, s);
        }
        let table = &self.tables[node];
        let pe = self.net.parent_edges(node);
        if pe.is_empty() {
            return table.clone();
        }
        let mut out = vec![0.0; t];
        let mut odo = Odometer::new(&self.parent_cards[node]);
        for row in table.chunks_exact(t) {
            let w: f64 = pe
                .iter()
                .zip(&odo.digits)
                .map(|(&e, &d)| self.pi_msgs[e][d])
                .product();
            if w != 0.0 {
                for (o, p) in out.iter_mut().zip(row) {
                    *o += w * p;
                }
            }
            odo.advance();
        }
        out
    }

    /// λ(x): the product of the λ messages from all children.
    pub(crate) fn lambda(&self, node: usize) -> Vec<f64> {
        let t = self.cards[node];
        if let Some(s) = self.clamped[node] {
            return indicator(t, s);
        }
        let mut out = vec![1.0; t];
        for &e in self.net.child_edges(node) {
            for (o, m) in out.iter_mut().zip(&self.lambda_msgs[e]) {
                *o *= m;
            }
        }
        out
    }

    /// Unnormalized λ(x)π(x).
    pub(crate) fn belief(&self, node: usize) -> Vec<f64> {
        self.lambda(node)
            .iter()
            .zip(self.pi(node))
            .map(|(l, p)| l * p)
            .collect()
    }

    /// π message along `edge` from its parent to its child.
    fn pi_message(&self, edge: usize) -> Vec<f64> {
        let (p, _) = self.net.edges()[edge];
        if let Some(s) = self.clamped[p] {
            return indicator(self.cards[p], s);
        }
        let mut out = self.pi(p);
        for &e in self.net.child_edges(p) {
            if e != edge {
                for (o, m) in out.iter_mut().zip(&self.lambda_msgs[e]) {
                    *o *= m;
                }
            }
        }
        out
    }

    /// λ message along `edge` from its child to its parent.
    fn lambda_message(&self, edge: usize) -> Vec<f64> {
        let (p, c) = self.net.edges()[edge];
        let pe = self.net.parent_edges(c);
        let k = pe.iter().position(|&e| e == edge).expect("edge enters child");
        let lam = self.lambda(c);
        let t = self.cards[c];
        let mut out = vec![0.0; self.cards[p]];
        let mut odo = Odometer::new(&self.parent_cards[c]);
        for row in self.tables[c].chunks_exact(t) {
            let s: f64 = row.iter().zip(&lam).map(|(a, b)| a * b).sum();
            if s != 0.0 {
                let w: f64 = pe
                    .iter()
                    .zip(&odo.digits)
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, (&e, &d))| self.pi_msgs[e][d])
                    .product();
                out[odo.digits[k]] += s * w;
            }
            odo.advance();
        }
        out
    }

    /// Clamps `node` to `state` and pushes updated messages outward along
    /// every edge pointing away from it. On a polytree those are exactly the
    /// messages that depend on the new evidence; each is recomputed once.
    pub(crate) fn clamp_and_propagate(&mut self, node: usize, state: usize) {
        self.clamped[node] = Some(state);
        let mut queue = std::collections::VecDeque::new();
        self.enqueue_outgoing(node, None, &mut queue);
        while let Some((from, edge)) = queue.pop_front() {
            let (p, c) = self.net.edges()[edge];
            let to = if from == c {
                self.lambda_msgs[edge] = self.lambda_message(edge);
                p
            } else {
                self.pi_msgs[edge] = self.pi_message(edge);
                c
            };
            self.enqueue_outgoing(to, Some(edge), &mut queue);
        }
    }

    fn enqueue_outgoing(
        &self,
        node: usize,
        skip: Option<usize>,
        queue: &mut std::collections::VecDeque<(usize, usize)>,
    ) {
        for &e in self
            .net
            .parent_edges(node)
            .iter()
            .chain(self.net.child_edges(node))
        {
            if Some(e) != skip {
                queue.push_back((node, e));
            }
        }
    }

    pub(crate) fn edge_between(&self, parent: usize, child: usize) -> Option<usize> {
        self.net
            .child_edges(parent)
            .iter()
            .copied()
            .find(|&e| self.net.edges()[e].1 == child)
    }

    pub(crate) fn pi_msg(&self, edge: usize) -> &[f64] {
        &self.pi_msgs[edge]
    }

    pub(crate) fn lambda_msg(&self, edge: usize) -> &[f64] {
        &self.lambda_msgs[edge]
    }

    /// Largest change any message would see if recomputed from its inputs.
    /// Zero (up to rounding) once propagation is quiescent.
    pub(crate) fn residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for e in 0..self.net.edges().len() {
            for (old, new) in [
                (&self.pi_msgs[e], self.pi_message(e)),
                (&self.lambda_msgs[e], self.lambda_message(e)),
            ] {
                for (a, b) in old.iter().zip(&new) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }
}
