//! Belief-network data model, the JSON network document, and structural
//! validation.
//!
//! A document looks like
//!
//! ```json
//! {
//!   "name": "single-child",
//!   "nodes": [
//!     { "id": "E", "alternatives": 2, "parents": [],
//!       "cpt": [ { "given": [], "counts": [0, 0] } ] },
//!     { "id": "F", "alternatives": 2, "parents": ["E"],
//!       "cpt": [ { "given": [0], "counts": [0, 0] },
//!                { "given": [1], "counts": [0, 0] } ] }
//!   ]
//! }
//! ```
//!
//! CPT rows are indexed lexicographically over the parents' alternatives in
//! parent order, with the last parent varying fastest.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dirichlet::DirichletCounts;
use crate::enumeration::PointParameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub name: String,
    pub nodes: Vec<NodeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDocument {
    pub id: String,
    pub alternatives: usize,
    #[serde(default)]
    pub parents: Vec<String>,
    pub cpt: Vec<CptEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CptEntry {
    #[serde(default)]
    pub given: Vec<usize>,
    pub counts: Vec<f64>,
}

impl NetworkDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }
}

/// One structural problem found in a network document.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    DuplicateNode { id: String },
    TooFewAlternatives { node: String, alternatives: usize },
    UnknownParent { node: String, parent: String },
    DuplicateParent { node: String, parent: String },
    Cycle { nodes: Vec<String> },
    CptRowCount { node: String, expected: usize, found: usize },
    GivenLength { node: String, expected: usize, found: usize },
    GivenOutOfRange { node: String, given: Vec<usize> },
    DuplicateConfiguration { node: String, given: Vec<usize> },
    MissingConfiguration { node: String, given: Vec<usize> },
    CountLength { node: String, expected: usize, found: usize },
    InvalidCount { node: String, value: f64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateNode { id } => write!(f, "duplicate node id `{id}`"),
            Diagnostic::TooFewAlternatives { node, alternatives } => {
                write!(f, "node `{node}` has {alternatives} alternatives, need at least 2")
            }
            Diagnostic::UnknownParent { node, parent } => {
                write!(f, "node `{node}` lists unknown parent `{parent}`")
            }
            Diagnostic::DuplicateParent { node, parent } => {
                write!(f, "node `{node}` lists parent `{parent}` more than once")
            }
            Diagnostic::Cycle { nodes } => write!(f, "cycle through {}", nodes.join(" -> ")),
            Diagnostic::CptRowCount { node, expected, found } => {
                write!(f, "node `{node}` needs {expected} CPT rows, found {found}")
            }
            Diagnostic::GivenLength { node, expected, found } => write!(
                f,
                "node `{node}`: `given` must list {expected} parent alternatives, found {found}"
            ),
            Diagnostic::GivenOutOfRange { node, given } => {
                write!(f, "node `{node}`: configuration {given:?} is out of range")
            }
            Diagnostic::DuplicateConfiguration { node, given } => {
                write!(f, "node `{node}`: configuration {given:?} appears more than once")
            }
            Diagnostic::MissingConfiguration { node, given } => {
                write!(f, "node `{node}`: configuration {given:?} is missing")
            }
            Diagnostic::CountLength { node, expected, found } => write!(
                f,
                "node `{node}`: count vectors need {expected} entries, found {found}"
            ),
            Diagnostic::InvalidCount { node, value } => write!(
                f,
                "node `{node}`: count {value} is not a finite nonnegative number"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub is_dag: bool,
    /// The undirected skeleton has no cycle.
    pub is_polytree: bool,
    pub errors: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dag: {}", self.is_dag)?;
        writeln!(f, "polytree: {}", self.is_polytree)?;
        if self.errors.is_empty() {
            write!(f, "errors: none")
        } else {
            writeln!(f, "errors: {}", self.errors.len())?;
            for (i, e) in self.errors.iter().enumerate() {
                if i > 0 {
                    writeln!(f)?;
                }
                write!(f, "  - {e}")?;
            }
            Ok(())
        }
    }
}

/// Checks a document without building a [`Network`].
pub fn validate_document(doc: &NetworkDocument) -> ValidationReport {
    let mut errors = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, node) in doc.nodes.iter().enumerate() {
        if index.insert(node.id.as_str(), i).is_some() {
            errors.push(Diagnostic::DuplicateNode {
                id: node.id.clone(),
            });
        }
        if node.alternatives < 2 {
            errors.push(Diagnostic::TooFewAlternatives {
                node: node.id.clone(),
                alternatives: node.alternatives,
            });
        }
    }

    // Resolved parent lists; unresolved references are dropped after reporting.
    let mut parents: Vec<Vec<usize>> = Vec::with_capacity(doc.nodes.len());
    for node in &doc.nodes {
        let mut resolved = Vec::new();
        for p in &node.parents {
            match index.get(p.as_str()) {
                Some(&pi) if resolved.contains(&pi) => errors.push(Diagnostic::DuplicateParent {
                    node: node.id.clone(),
                    parent: p.clone(),
                }),
                Some(&pi) => resolved.push(pi),
                None => errors.push(Diagnostic::UnknownParent {
                    node: node.id.clone(),
                    parent: p.clone(),
                }),
            }
        }
        parents.push(resolved);
    }

    let is_dag = match find_cycle(&parents) {
        Some(cycle) => {
            errors.push(Diagnostic::Cycle {
                nodes: cycle.iter().map(|&i| doc.nodes[i].id.clone()).collect(),
            });
            false
        }
        None => true,
    };
    let is_polytree = skeleton_is_forest(doc.nodes.len(), &parents);

    for (i, node) in doc.nodes.iter().enumerate() {
        check_cpt(doc, node, &parents[i], &mut errors);
    }

    ValidationReport {
        is_dag,
        is_polytree,
        errors,
    }
}

fn check_cpt(
    doc: &NetworkDocument,
    node: &NodeDocument,
    parents: &[usize],
    errors: &mut Vec<Diagnostic>,
) {
    for entry in &node.cpt {
        if entry.counts.len() != node.alternatives {
            errors.push(Diagnostic::CountLength {
                node: node.id.clone(),
                expected: node.alternatives,
                found: entry.counts.len(),
            });
        }
        if let Some(&value) = entry.counts.iter().find(|a| !a.is_finite() || **a < 0.0) {
            errors.push(Diagnostic::InvalidCount {
                node: node.id.clone(),
                value,
            });
        }
    }
    // Configuration coverage is only meaningful once every parent resolved.
    if parents.len() != node.parents.len() {
        return;
    }
    let cards: Vec<usize> = parents.iter().map(|&p| doc.nodes[p].alternatives).collect();
    let expected: usize = cards.iter().product();
    if node.cpt.len() != expected {
        errors.push(Diagnostic::CptRowCount {
            node: node.id.clone(),
            expected,
            found: node.cpt.len(),
        });
    }
    let mut seen = vec![false; expected];
    for entry in &node.cpt {
        if entry.given.len() != cards.len() {
            errors.push(Diagnostic::GivenLength {
                node: node.id.clone(),
                expected: cards.len(),
                found: entry.given.len(),
            });
            continue;
        }
        match encode_config(&cards, &entry.given) {
            Some(idx) if seen[idx] => errors.push(Diagnostic::DuplicateConfiguration {
                node: node.id.clone(),
                given: entry.given.clone(),
            }),
            Some(idx) => seen[idx] = true,
            None => errors.push(Diagnostic::GivenOutOfRange {
                node: node.id.clone(),
                given: entry.given.clone(),
            }),
        }
    }
    if node.cpt.len() == expected {
        // Row count matches, so a gap can only come from a duplicate or an
        // out-of-range row; name the first missing configuration anyway.
        if let Some(missing) = seen.iter().position(|s| !s) {
            errors.push(Diagnostic::MissingConfiguration {
                node: node.id.clone(),
                given: decode_config(&cards, missing),
            });
        }
    }
}

/// Returns one directed cycle, if any.
fn find_cycle(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = parents.len();
    let mut mark = vec![Mark::New; n];
    let mut path = Vec::new();
    for start in 0..n {
        if mark[start] != Mark::New {
            continue;
        }
        // Iterative DFS along parent links; a back edge to an active node closes a cycle.
        let mut stack = vec![(start, 0usize)];
        mark[start] = Mark::Active;
        path.push(start);
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&p) = parents[v].get(*next) {
                *next += 1;
                match mark[p] {
                    Mark::New => {
                        mark[p] = Mark::Active;
                        path.push(p);
                        stack.push((p, 0));
                    }
                    Mark::Active => {
                        let pos = path.iter().position(|&x| x == p).unwrap();
                        // path runs child -> parent; report it in edge direction.
                        let mut cycle: Vec<usize> = path[pos..].to_vec();
                        cycle.reverse();
                        cycle.push(cycle[0]);
                        return Some(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                path.pop();
                stack.pop();
            }
        }
    }
    None
}

fn skeleton_is_forest(n: usize, parents: &[Vec<usize>]) -> bool {
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    for (child, ps) in parents.iter().enumerate() {
        for &p in ps {
            let (a, b) = (find(&mut uf, child), find(&mut uf, p));
            if a == b {
                return false;
            }
            uf[a] = b;
        }
    }
    true
}

/// Row index of a parent configuration; last entry varies fastest.
pub(crate) fn encode_config(cards: &[usize], alts: &[usize]) -> Option<usize> {
    let mut idx = 0;
    for (&card, &alt) in cards.iter().zip(alts) {
        if alt >= card {
            return None;
        }
        idx = idx * card + alt;
    }
    Some(idx)
}

pub(crate) fn decode_config(cards: &[usize], mut idx: usize) -> Vec<usize> {
    let mut alts = vec![0; cards.len()];
    for (slot, &card) in alts.iter_mut().zip(cards).rev() {
        *slot = idx % card;
        idx /= card;
    }
    alts
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    id: String,
    alternatives: usize,
    parents: Vec<usize>,
    cpt: Vec<DirichletCounts>,
}

impl Node {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn alternatives(&self) -> usize {
        self.alternatives
    }

    /// Parent node indices in document order.
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    /// One count vector per parent configuration, in canonical row order.
    pub fn cpt(&self) -> &[DirichletCounts] {
        &self.cpt
    }

    pub fn is_root(&self) -> bool {
        self.parents.is_empty()
    }
}

/// A validated belief network. Nodes keep document order; indices into
/// [`Network::nodes`] identify nodes everywhere in the library.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    name: String,
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    topo: Vec<usize>,
    children: Vec<Vec<usize>>,
    // Edge e runs edges[e].0 -> edges[e].1.
    edges: Vec<(usize, usize)>,
    parent_edges: Vec<Vec<usize>>,
    child_edges: Vec<Vec<usize>>,
    polytree: bool,
}

impl Network {
    pub fn from_document(doc: &NetworkDocument) -> Result<Self> {
        let report = validate_document(doc);
        if !report.is_valid() {
            return Err(Error::InvalidNetwork(report.errors));
        }
        let index: HashMap<String, usize> = doc
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for nd in &doc.nodes {
            let parents: Vec<usize> = nd.parents.iter().map(|p| index[p]).collect();
            let cards: Vec<usize> = parents.iter().map(|&p| doc.nodes[p].alternatives).collect();
            let mut rows: Vec<Option<DirichletCounts>> = vec![None; nd.cpt.len()];
            for entry in &nd.cpt {
                let idx = encode_config(&cards, &entry.given).expect("validated");
                rows[idx] = Some(DirichletCounts::new(entry.counts.clone())?);
            }
            nodes.push(Node {
                id: nd.id.clone(),
                alternatives: nd.alternatives,
                parents,
                cpt: rows.into_iter().map(|r| r.expect("validated")).collect(),
            });
        }
        Ok(Self::assemble(doc.name.clone(), nodes, index, report.is_polytree))
    }

    fn assemble(
        name: String,
        nodes: Vec<Node>,
        index: HashMap<String, usize>,
        polytree: bool,
    ) -> Self {
        let n = nodes.len();
        let mut children = vec![Vec::new(); n];
        let mut edges = Vec::new();
        let mut parent_edges = vec![Vec::new(); n];
        let mut child_edges = vec![Vec::new(); n];
        for (c, node) in nodes.iter().enumerate() {
            for &p in &node.parents {
                let e = edges.len();
                edges.push((p, c));
                children[p].push(c);
                parent_edges[c].push(e);
                child_edges[p].push(e);
            }
        }
        // Kahn's algorithm, smallest index first for a stable order.
        let mut indegree: Vec<usize> = nodes.iter().map(|n| n.parents.len()).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            topo.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        debug_assert_eq!(topo.len(), n);
        Self {
            name,
            nodes,
            index,
            topo,
            children,
            edges,
            parent_edges,
            child_edges,
            polytree,
        }
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            name: self.name.clone(),
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    let cards = self.parent_cards(i);
                    NodeDocument {
                        id: n.id.clone(),
                        alternatives: n.alternatives,
                        parents: n.parents.iter().map(|&p| self.nodes[p].id.clone()).collect(),
                        cpt: n
                            .cpt
                            .iter()
                            .enumerate()
                            .map(|(row, counts)| CptEntry {
                                given: decode_config(&cards, row),
                                counts: counts.counts().to_vec(),
                            })
                            .collect(),
                    }
                })
                .collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn node_index(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn alternatives(&self, idx: usize) -> usize {
        self.nodes[idx].alternatives
    }

    pub fn parents(&self, idx: usize) -> &[usize] {
        &self.nodes[idx].parents
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn is_polytree(&self) -> bool {
        self.polytree
    }

    pub(crate) fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub(crate) fn parent_edges(&self, idx: usize) -> &[usize] {
        &self.parent_edges[idx]
    }

    pub(crate) fn child_edges(&self, idx: usize) -> &[usize] {
        &self.child_edges[idx]
    }

    /// Alternative counts of a node's parents, in parent order.
    pub fn parent_cards(&self, idx: usize) -> Vec<usize> {
        self.nodes[idx]
            .parents
            .iter()
            .map(|&p| self.nodes[p].alternatives)
            .collect()
    }

    /// Number of parent configurations (CPT rows) of a node.
    pub fn configurations(&self, idx: usize) -> usize {
        self.nodes[idx].cpt.len()
    }

    /// CPT row index for the given parent alternatives.
    pub fn config_index(&self, idx: usize, parent_alts: &[usize]) -> Option<usize> {
        if parent_alts.len() != self.nodes[idx].parents.len() {
            return None;
        }
        encode_config(&self.parent_cards(idx), parent_alts)
    }

    /// Parent alternatives of CPT row `row`.
    pub fn config_alternatives(&self, idx: usize, row: usize) -> Vec<usize> {
        decode_config(&self.parent_cards(idx), row)
    }

    pub(crate) fn check_node(&self, idx: usize) -> Result<()> {
        if idx < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange(idx))
        }
    }

    pub(crate) fn check_alternative(&self, idx: usize, alt: usize) -> Result<()> {
        self.check_node(idx)?;
        let alternatives = self.nodes[idx].alternatives;
        if alt < alternatives {
            Ok(())
        } else {
            Err(Error::AlternativeOutOfRange {
                node: self.nodes[idx].id.clone(),
                alt,
                alternatives,
            })
        }
    }

    pub(crate) fn require_polytree(&self) -> Result<()> {
        if self.polytree {
            Ok(())
        } else {
            Err(Error::NotPolytree)
        }
    }
}

/// Parses and validates a JSON network document.
pub fn parse_network(text: &str) -> Result<Network> {
    Network::from_document(&NetworkDocument::from_json(text)?)
}

pub fn validate_network(net: &Network) -> ValidationReport {
    // Construction already rejected everything else.
    ValidationReport {
        is_dag: true,
        is_polytree: net.is_polytree(),
        errors: Vec::new(),
    }
}

/// Replaces every CPT column by its Dirichlet mean vector.
pub fn point_view(net: &Network) -> PointParameters {
    PointParameters::from_tables(
        net.nodes()
            .iter()
            .map(|n| n.cpt().iter().flat_map(|c| c.means()).collect())
            .collect(),
        net.nodes().iter().map(|n| n.alternatives()).collect(),
    )
}

/// Hard evidence: instantiated alternatives keyed by node index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    assignments: BTreeMap<usize, usize>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `node = alt`, rejecting out-of-range indices and repeated nodes.
    pub fn insert(&mut self, net: &Network, node: usize, alt: usize) -> Result<()> {
        net.check_alternative(node, alt)?;
        if self.assignments.contains_key(&node) {
            return Err(Error::AlreadyInstantiated(net.node(node).id().to_string()));
        }
        self.assignments.insert(node, alt);
        Ok(())
    }

    pub fn with(mut self, net: &Network, node: usize, alt: usize) -> Result<Self> {
        self.insert(net, node, alt)?;
        Ok(self)
    }

    /// Builds evidence from `(node id, alternative)` pairs.
    pub fn from_ids(net: &Network, pairs: &[(&str, usize)]) -> Result<Self> {
        let mut ev = Self::new();
        for &(id, alt) in pairs {
            ev.insert(net, net.node_index(id)?, alt)?;
        }
        Ok(ev)
    }

    /// Parses `NODE=index` assignments.
    pub fn parse<S: AsRef<str>>(net: &Network, items: &[S]) -> Result<Self> {
        let mut ev = Self::new();
        for item in items {
            let item = item.as_ref();
            let (id, alt) = item
                .split_once('=')
                .ok_or_else(|| Error::EvidenceSyntax(item.to_string()))?;
            let alt: usize = alt
                .trim()
                .parse()
                .map_err(|_| Error::EvidenceSyntax(item.to_string()))?;
            ev.insert(net, net.node_index(id.trim())?, alt)?;
        }
        Ok(ev)
    }

    pub fn get(&self, node: usize) -> Option<usize> {
        self.assignments.get(&node).copied()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.assignments.contains_key(&node)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// `(node, alt)` pairs in node-index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignments.iter().map(|(&n, &a)| (n, a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_polytree, PolytreeSpec};
    use crate::dirichlet::sample_stream;
    use proptest::prelude::*;

    fn node(id: &str, parents: &[&str], cpt: Vec<(Vec<usize>, Vec<f64>)>) -> NodeDocument {
        NodeDocument {
            id: id.into(),
            alternatives: cpt[0].1.len(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            cpt: cpt
                .into_iter()
                .map(|(given, counts)| CptEntry { given, counts })
                .collect(),
        }
    }

    fn binary(id: &str, parents: &[&str], a: f64) -> NodeDocument {
        let rows = 1usize << parents.len();
        let cards = vec![2; parents.len()];
        node(
            id,
            parents,
            (0..rows).map(|r| (decode_config(&cards, r), vec![a, a])).collect(),
        )
    }

    fn doc(nodes: Vec<NodeDocument>) -> NetworkDocument {
        NetworkDocument {
            name: "test".into(),
            nodes,
        }
    }

    #[test]
    fn parses_minimal_document() {
        let text = r#"{"name": "min", "nodes": [
            {"id": "E", "alternatives": 2, "parents": [], "cpt": [{"given": [], "counts": [0, 0]}]},
            {"id": "F", "alternatives": 2, "parents": ["E"],
             "cpt": [{"given": [0], "counts": [0, 0]}, {"given": [1], "counts": [0, 0]}]}
        ]}"#;
        let net = parse_network(text).unwrap();
        assert_eq!(net.len(), 2);
        assert_eq!(net.name(), "min");
        assert!(validate_network(&net).is_polytree);
        assert_eq!(net.parents(1), &[0]);
        assert_eq!(net.children(0), &[1]);
    }

    #[test]
    fn two_node_cycle_is_rejected() {
        let d = doc(vec![binary("E", &["F"], 0.0), binary("F", &["E"], 0.0)]);
        let report = validate_document(&d);
        assert!(!report.is_dag);
        assert!(report
            .errors
            .iter()
            .any(|e| matches!(e, Diagnostic::Cycle { .. })));
        assert!(matches!(
            Network::from_document(&d),
            Err(Error::InvalidNetwork(_))
        ));
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let d = doc(vec![binary("E", &["E"], 0.0)]);
        assert!(!validate_document(&d).is_dag);
    }

    #[test]
    fn accepts_fractional_and_integer_counts() {
        let d = doc(vec![binary("E", &[], 5.0), binary("F", &["E"], 5.0)]);
        let net = Network::from_document(&d).unwrap();
        assert_eq!(net.node(1).cpt()[1].counts(), &[5.0, 5.0]);
        let d = doc(vec![binary("E", &[], 0.25)]);
        assert!(Network::from_document(&d).is_ok());
    }

    #[test]
    fn reports_structural_errors() {
        let d = doc(vec![binary("E", &[], 0.0), binary("E", &[], 0.0)]);
        assert!(validate_document(&d)
            .errors
            .contains(&Diagnostic::DuplicateNode { id: "E".into() }));

        let d = doc(vec![binary("F", &["X"], 0.0)]);
        assert!(validate_document(&d).errors.iter().any(
            |e| matches!(e, Diagnostic::UnknownParent { parent, .. } if parent == "X")
        ));

        // Missing a row.
        let mut f = binary("F", &["E"], 0.0);
        f.cpt.pop();
        let report = validate_document(&doc(vec![binary("E", &[], 0.0), f]));
        assert!(report
            .errors
            .contains(&Diagnostic::CptRowCount { node: "F".into(), expected: 2, found: 1 }));
        assert!(report.is_dag, "shape errors are not cycles");

        // Wrong row length.
        let mut f = binary("F", &["E"], 0.0);
        f.cpt[1].counts.push(1.0);
        assert!(validate_document(&doc(vec![binary("E", &[], 0.0), f]))
            .errors
            .iter()
            .any(|e| matches!(e, Diagnostic::CountLength { .. })));

        // Duplicated configuration.
        let mut f = binary("F", &["E"], 0.0);
        f.cpt[1].given = vec![0];
        let errors = validate_document(&doc(vec![binary("E", &[], 0.0), f])).errors;
        assert!(errors.iter().any(|e| matches!(e, Diagnostic::DuplicateConfiguration { .. })));
        assert!(errors.iter().any(|e| matches!(e, Diagnostic::MissingConfiguration { given, .. } if given == &vec![1])));

        // Negative count.
        let mut e = binary("E", &[], 0.0);
        e.cpt[0].counts[0] = -1.0;
        assert!(matches!(
            Network::from_document(&doc(vec![e])),
            Err(Error::InvalidNetwork(_))
        ));

        // One alternative.
        let e = node("E", &[], vec![(vec![], vec![1.0])]);
        assert!(validate_document(&doc(vec![e]))
            .errors
            .iter()
            .any(|e| matches!(e, Diagnostic::TooFewAlternatives { .. })));
    }

    #[test]
    fn malformed_json_is_a_document_error() {
        assert!(matches!(parse_network("{\"name\": 3}"), Err(Error::Document(_))));
        assert!(matches!(parse_network("not json"), Err(Error::Document(_))));
    }

    #[test]
    fn cpt_rows_follow_canonical_order_regardless_of_document_order() {
        let e = binary("E", &[], 0.0);
        let g = node("G", &[], vec![(vec![], vec![0.0, 0.0, 0.0])]);
        let f = node(
            "F",
            &["E", "G"],
            vec![
                (vec![1, 2], vec![12.0, 0.0]),
                (vec![0, 0], vec![0.0, 0.0]),
                (vec![0, 1], vec![1.0, 0.0]),
                (vec![0, 2], vec![2.0, 0.0]),
                (vec![1, 0], vec![10.0, 0.0]),
                (vec![1, 1], vec![11.0, 0.0]),
            ],
        );
        let net = Network::from_document(&doc(vec![e, g, f])).unwrap();
        let firsts: Vec<f64> = net.node(2).cpt().iter().map(|c| c.counts()[0]).collect();
        assert_eq!(firsts, vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(net.config_index(2, &[1, 1]), Some(4));
        assert_eq!(net.config_alternatives(2, 5), vec![1, 2]);
    }

    #[test]
    fn chain_and_diamond() {
        let chain = doc(vec![
            binary("E", &[], 0.0),
            binary("F", &["E"], 0.0),
            binary("G", &["F"], 0.0),
        ]);
        let net = Network::from_document(&chain).unwrap();
        let report = validate_network(&net);
        assert!(report.is_dag && report.is_polytree);

        let diamond = doc(vec![
            binary("A", &[], 0.0),
            binary("B", &["A"], 0.0),
            binary("C", &["A"], 0.0),
            binary("D", &["B", "C"], 0.0),
        ]);
        let report = validate_document(&diamond);
        assert!(report.is_dag);
        assert!(!report.is_polytree);
        assert!(report.is_valid());
        assert!(!Network::from_document(&diamond).unwrap().is_polytree());
    }

    #[test]
    fn random_twenty_node_polytree() {
        let mut rng = sample_stream(42, 0);
        let net = random_polytree(&mut rng, &PolytreeSpec::binary(20));
        assert_eq!(net.len(), 20);
        assert!(validate_network(&net).is_polytree);
    }

    #[test]
    fn point_view_examples() {
        let d = doc(vec![
            node("A", &[], vec![(vec![], vec![0.0, 0.0])]),
            node("B", &[], vec![(vec![], vec![1.0, 3.0])]),
            node("C", &[], vec![(vec![], vec![5.0, 5.0])]),
        ]);
        let u = point_view(&Network::from_document(&d).unwrap());
        assert_eq!(u.row(0, 0), &[0.5, 0.5]);
        assert!((u.row(1, 0)[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((u.row(1, 0)[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(u.row(2, 0), &[0.5, 0.5]);
    }

    #[test]
    fn evidence_parsing() {
        let net = Network::from_document(&doc(vec![binary("E", &[], 0.0), binary("F", &["E"], 0.0)])).unwrap();
        let ev = Evidence::parse(&net, &["F=1"]).unwrap();
        assert_eq!(ev.get(1), Some(1));
        assert!(matches!(Evidence::parse(&net, &["F"]), Err(Error::EvidenceSyntax(_))));
        assert!(matches!(Evidence::parse(&net, &["F=x"]), Err(Error::EvidenceSyntax(_))));
        assert!(matches!(Evidence::parse(&net, &["F=2"]), Err(Error::AlternativeOutOfRange { .. })));
        assert!(matches!(Evidence::parse(&net, &["Q=0"]), Err(Error::UnknownNode(_))));
        assert!(matches!(
            Evidence::parse(&net, &["F=0", "F=1"]),
            Err(Error::AlreadyInstantiated(_))
        ));
    }

    proptest! {
        #[test]
        fn document_round_trip(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = sample_stream(seed, 0);
            let spec = PolytreeSpec { nodes: n, ..PolytreeSpec::default() };
            let net = random_polytree(&mut rng, &spec);
            let text = net.to_document().to_json();
            let back = parse_network(&text).unwrap();
            prop_assert_eq!(&back, &net);
        }

        #[test]
        fn point_view_rows_are_distributions(seed in any::<u64>()) {
            let mut rng = sample_stream(seed, 0);
            let net = random_polytree(&mut rng, &PolytreeSpec::default());
            let u = point_view(&net);
            for i in 0..net.len() {
                for r in 0..net.configurations(i) {
                    let row = u.row(i, r);
                    prop_assert!(row.iter().all(|p| *p > 0.0));
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn closing_an_undirected_cycle_flips_polytree(seed in any::<u64>(), n in 3usize..12, pick in any::<(usize, usize)>()) {
            let mut rng = sample_stream(seed, 0);
            let spec = PolytreeSpec { nodes: n, max_alternatives: 2, ..PolytreeSpec::default() };
            let net = random_polytree(&mut rng, &spec);
            prop_assert!(validate_network(&net).is_polytree);

            // Add an edge between two distinct nodes oriented along the
            // topological order so the graph stays acyclic.
            let topo = net.topological_order();
            let (i, j) = (pick.0 % n, pick.1 % n);
            prop_assume!(i != j);
            let (from, to) = (topo[i.min(j)], topo[i.max(j)]);
            prop_assume!(!net.parents(to).contains(&from));
            let mut d = net.to_document();
            let from_id = d.nodes[from].id.clone();
            let node = &mut d.nodes[to];
            node.parents.push(from_id);
            let old = std::mem::take(&mut node.cpt);
            node.cpt = old
                .into_iter()
                .flat_map(|e| {
                    (0..2).map(move |k| {
                        let mut given = e.given.clone();
                        given.push(k);
                        CptEntry { given, counts: e.counts.clone() }
                    })
                })
                .collect();
            let report = validate_document(&d);
            prop_assert!(report.is_valid(), "{}", report);
            prop_assert!(!report.is_polytree);
        }
    }
}
