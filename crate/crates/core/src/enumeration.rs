//! Exact inference by summing the joint distribution over every completion
//! of the evidence. Only meant for small networks: it is the reference the
//! message-passing code is checked against and one of the inner engines of
//! Monte Carlo integration.

use crate::error::{Error, Result};
use crate::model::{Evidence, Network};

/// One fully specified probability for every CPT entry.
///
/// `tables[node]` holds the node's CPT rows back to back, each of length
/// `alternatives[node]`, in canonical row order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointParameters {
    tables: Vec<Vec<f64>>,
    alternatives: Vec<usize>,
}

impl PointParameters {
    pub(crate) fn from_tables(tables: Vec<Vec<f64>>, alternatives: Vec<usize>) -> Self {
        Self {
            tables,
            alternatives,
        }
    }

    /// Builds point parameters from explicit rows: `rows[node][config]` is a
    /// distribution over the node's alternatives.
    pub fn from_rows(net: &Network, rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let alternatives: Vec<usize> = net.nodes().iter().map(|n| n.alternatives()).collect();
        let tables = rows
            .into_iter()
            .map(|node_rows| node_rows.into_iter().flatten().collect())
            .collect();
        let u = Self {
            tables,
            alternatives,
        };
        u.check_shape(net)?;
        for (i, table) in u.tables.iter().enumerate() {
            for row in table.chunks(u.alternatives[i]) {
                let s: f64 = row.iter().sum();
                if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (s - 1.0).abs() > 1e-12 {
                    return Err(Error::ShapeMismatch(format!(
                        "row {row:?} of node `{}` is not a distribution",
                        net.node(i).id()
                    )));
                }
            }
        }
        Ok(u)
    }

    pub fn check_shape(&self, net: &Network) -> Result<()> {
        if self.tables.len() != net.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} tables for {} nodes",
                self.tables.len(),
                net.len()
            )));
        }
        for (i, node) in net.nodes().iter().enumerate() {
            let expected = node.alternatives() * net.configurations(i);
            if self.alternatives[i] != node.alternatives() || self.tables[i].len() != expected {
                return Err(Error::ShapeMismatch(format!(
                    "node `{}` expects {expected} entries, found {}",
                    node.id(),
                    self.tables[i].len()
                )));
            }
        }
        Ok(())
    }

    /// The CPT row of `node` for parent configuration `config`.
    pub fn row(&self, node: usize, config: usize) -> &[f64] {
        let t = self.alternatives[node];
        &self.tables[node][config * t..(config + 1) * t]
    }

    pub fn table(&self, node: usize) -> &[f64] {
        &self.tables[node]
    }

    pub(crate) fn table_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.tables[node]
    }
}

/// One alternative index per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullAssignment(pub Vec<usize>);

/// Cap on the number of joint states a single enumeration may visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_states: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self {
            max_states: 1 << 20,
        }
    }
}

impl EnumerationBudget {
    /// Errors if enumerating the free nodes under `w` would exceed the budget.
    pub fn check(&self, net: &Network, w: &Evidence) -> Result<()> {
        let states: u128 = (0..net.len())
            .filter(|&i| !w.contains(i))
            .map(|i| net.alternatives(i) as u128)
            .try_fold(1u128, |acc, a| acc.checked_mul(a))
            .unwrap_or(u128::MAX);
        if states > self.max_states as u128 {
            return Err(Error::BudgetExceeded {
                states,
                budget: self.max_states,
            });
        }
        Ok(())
    }
}

fn check_assignment(net: &Network, x: &FullAssignment) -> Result<()> {
    if x.0.len() != net.len() {
        return Err(Error::ShapeMismatch(format!(
            "assignment has {} entries for {} nodes",
            x.0.len(),
            net.len()
        )));
    }
    for (i, &alt) in x.0.iter().enumerate() {
        net.check_alternative(i, alt)?;
    }
    Ok(())
}

fn joint_unchecked(net: &Network, u: &PointParameters, x: &[usize], parent_alts: &mut Vec<usize>) -> f64 {
    let mut p = 1.0;
    for (i, node) in net.nodes().iter().enumerate() {
        parent_alts.clear();
        parent_alts.extend(node.parents().iter().map(|&q| x[q]));
        let row = net.config_index(i, parent_alts).expect("in range");
        p *= u.row(i, row)[x[i]];
        if p == 0.0 {
            break;
        }
    }
    p
}

/// Product over nodes of the CPT entry selected by `x`.
pub fn joint_probability(net: &Network, u: &PointParameters, x: &FullAssignment) -> Result<f64> {
    u.check_shape(net)?;
    check_assignment(net, x)?;
    Ok(joint_unchecked(net, u, &x.0, &mut Vec::new()))
}

/// Calls `f` with every full assignment consistent with `w` and its joint
/// probability.
fn for_each_completion(
    net: &Network,
    u: &PointParameters,
    w: &Evidence,
    mut f: impl FnMut(&[usize], f64),
) {
    let free: Vec<usize> = (0..net.len()).filter(|&i| !w.contains(i)).collect();
    let mut x = vec![0usize; net.len()];
    for (n, alt) in w.iter() {
        x[n] = alt;
    }
    let mut scratch = Vec::new();
    loop {
        f(&x, joint_unchecked(net, u, &x, &mut scratch));
        // Odometer over the free nodes, last varying fastest.
        let mut k = free.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            let node = free[k];
            x[node] += 1;
            if x[node] < net.alternatives(node) {
                break;
            }
            x[node] = 0;
        }
    }
}

/// `P(W | U)`: total probability of all completions of `w`.
pub fn evidence_probability(
    net: &Network,
    u: &PointParameters,
    w: &Evidence,
    budget: EnumerationBudget,
) -> Result<f64> {
    u.check_shape(net)?;
    budget.check(net, w)?;
    let mut total = 0.0;
    for_each_completion(net, u, w, |_, p| total += p);
    Ok(total)
}

/// `P(W | U)` together with the unnormalized `P(node = k, W | U)` for every `k`.
pub fn evidence_and_joint(
    net: &Network,
    u: &PointParameters,
    w: &Evidence,
    node: usize,
    budget: EnumerationBudget,
) -> Result<(f64, Vec<f64>)> {
    u.check_shape(net)?;
    net.check_node(node)?;
    budget.check(net, w)?;
    let mut joint = vec![0.0; net.alternatives(node)];
    let mut total = 0.0;
    for_each_completion(net, u, w, |x, p| {
        joint[x[node]] += p;
        total += p;
    });
    Ok((total, joint))
}

/// `P(node | W, U)`.
pub fn conditional(
    net: &Network,
    u: &PointParameters,
    node: usize,
    w: &Evidence,
    budget: EnumerationBudget,
) -> Result<Vec<f64>> {
    net.check_node(node)?;
    if w.contains(node) {
        return Err(Error::QueryInEvidence(net.node(node).id().to_string()));
    }
    let (total, mut joint) = evidence_and_joint(net, u, w, node, budget)?;
    if total <= 0.0 {
        return Err(Error::ImpossibleEvidence);
    }
    for p in &mut joint {
        *p /= total;
    }
    Ok(joint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::sample_stream;
    use crate::model::{point_view, CptEntry, NetworkDocument, NodeDocument};
    use crate::random::{random_evidence, random_polytree, PolytreeSpec};
    use proptest::prelude::*;

    fn binary_doc(edges: &[(&str, &[&str])]) -> Network {
        let nodes = edges
            .iter()
            .map(|(id, parents)| NodeDocument {
                id: id.to_string(),
                alternatives: 2,
                parents: parents.iter().map(|p| p.to_string()).collect(),
                cpt: (0..1usize << parents.len())
                    .map(|r| CptEntry {
                        given: crate::model::decode_config(&vec![2; parents.len()], r),
                        counts: vec![0.0, 0.0],
                    })
                    .collect(),
            })
            .collect();
        Network::from_document(&NetworkDocument {
            name: "t".into(),
            nodes,
        })
        .unwrap()
    }

    /// E -> F with P(e1) = 0.5, P(f1|e1) = 0.8, P(f1|e2) = 0.4.
    fn asymmetric() -> (Network, PointParameters) {
        let net = binary_doc(&[("E", &[]), ("F", &["E"])]);
        let u = PointParameters::from_rows(
            &net,
            vec![vec![vec![0.5, 0.5]], vec![vec![0.8, 0.2], vec![0.4, 0.6]]],
        )
        .unwrap();
        (net, u)
    }

    #[test]
    fn joint_examples() {
        let net = binary_doc(&[("A", &[]), ("B", &[])]);
        let u = point_view(&net);
        for x in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let p = joint_probability(&net, &u, &FullAssignment(x.to_vec())).unwrap();
            assert_eq!(p, 0.25);
        }
        let (net, u) = asymmetric();
        let p = joint_probability(&net, &u, &FullAssignment(vec![0, 0])).unwrap();
        assert!((p - 0.4).abs() < 1e-15);
        assert!(joint_probability(&net, &u, &FullAssignment(vec![0])).is_err());
        assert!(joint_probability(&net, &u, &FullAssignment(vec![0, 2])).is_err());
    }

    #[test]
    fn evidence_probability_examples() {
        let b = EnumerationBudget::default();
        let net = binary_doc(&[("E", &[]), ("F", &["E"])]);
        let u = point_view(&net);
        assert!((evidence_probability(&net, &u, &Evidence::new(), b).unwrap() - 1.0).abs() < 1e-15);
        let w = Evidence::from_ids(&net, &[("F", 0)]).unwrap();
        assert!((evidence_probability(&net, &u, &w, b).unwrap() - 0.5).abs() < 1e-15);

        let (net, u) = asymmetric();
        let w = Evidence::from_ids(&net, &[("F", 0)]).unwrap();
        assert!((evidence_probability(&net, &u, &w, b).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn conditional_examples() {
        let b = EnumerationBudget::default();
        let (net, u) = asymmetric();
        let w = Evidence::from_ids(&net, &[("F", 0)]).unwrap();
        let post = conditional(&net, &u, 0, &w, b).unwrap();
        assert!((post[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((post[1] - 1.0 / 3.0).abs() < 1e-15);

        let prior = conditional(&net, &u, 0, &Evidence::new(), b).unwrap();
        assert_eq!(prior, u.row(0, 0));

        assert!(matches!(
            conditional(&net, &u, 1, &w, b),
            Err(Error::QueryInEvidence(_))
        ));
    }

    #[test]
    fn impossible_evidence_and_budget() {
        let net = binary_doc(&[("E", &[]), ("F", &["E"])]);
        let u = PointParameters::from_rows(
            &net,
            vec![vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0], vec![0.5, 0.5]]],
        )
        .unwrap();
        let w = Evidence::from_ids(&net, &[("F", 1)]).unwrap();
        assert!(matches!(
            conditional(&net, &u, 0, &w, EnumerationBudget::default()),
            Err(Error::ImpossibleEvidence)
        ));
        let tiny = EnumerationBudget { max_states: 1 };
        assert!(matches!(
            evidence_probability(&net, &u, &Evidence::new(), tiny),
            Err(Error::BudgetExceeded { states: 4, budget: 1 })
        ));
        // Evidence shrinks the enumerated space.
        assert!(evidence_probability(&net, &u, &w, EnumerationBudget { max_states: 2 }).is_ok());
    }

    #[test]
    fn rejects_misshapen_parameters() {
        let net = binary_doc(&[("E", &[]), ("F", &["E"])]);
        assert!(PointParameters::from_rows(&net, vec![vec![vec![0.5, 0.5]]]).is_err());
        assert!(PointParameters::from_rows(
            &net,
            vec![vec![vec![0.5, 0.6]], vec![vec![1.0, 0.0], vec![0.5, 0.5]]]
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn joint_is_normalized(seed in any::<u64>(), n in 1usize..=12) {
            let mut rng = sample_stream(seed, 0);
            let net = random_polytree(&mut rng, &PolytreeSpec::binary(n));
            let u = point_view(&net);
            let mut total = 0.0;
            for_each_completion(&net, &u, &Evidence::new(), |_, p| total += p);
            prop_assert!((total - 1.0).abs() < 1e-10);
        }

        #[test]
        fn evidence_probability_shrinks_as_evidence_grows(seed in any::<u64>()) {
            let mut rng = sample_stream(seed, 0);
            let net = random_polytree(&mut rng, &PolytreeSpec::default());
            let u = point_view(&net);
            let full = random_evidence(&mut rng, &net, net.len());
            let mut w = Evidence::new();
            let mut last = 1.0;
            for (n, alt) in full.iter() {
                w.insert(&net, n, alt).unwrap();
                let p = evidence_probability(&net, &u, &w, EnumerationBudget::default()).unwrap();
                prop_assert!(p <= last + 1e-15);
                last = p;
            }
        }
    }
}
