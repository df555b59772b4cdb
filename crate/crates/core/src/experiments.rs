//! Built-in experiment families and the runner that turns them into CSV rows.
//!
//! - `table1`: E → F, F instantiated.
//! - `table2`: E with children C1, C2, both instantiated.
//! - `table3`: chain E → F → G, G instantiated.
//! - `fig1` / `fig2`: E with n = 1..6 children, all instantiated.
//! - `fig3` / `fig4`: chain of depth d = 1..6, the leaf instantiated.
//!
//! Every query is alternative 0 of the root E, with evidence alternative 0.
//! Tables sweep `a ∈ {0, 1, 2, 5, 10, 20}` with every count equal to `a` and
//! report second moments. Figures report variances: `fig1`/`fig3` use the
//! grid `a, b ∈ {0, 10}` with root counts `[a, a]` and child rows `[b, b]`;
//! `fig2`/`fig4` give every column the means 0.2/0.8 through counts `[a, b]`
//! with `b = 4(a + 1) - 1`, swept over the same scales as the tables.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::apm;
use crate::dirichlet::DirichletCounts;
use crate::error::{Error, Result};
use crate::mcim::{estimate_moments, SampleConfig};
use crate::model::{CptEntry, Evidence, Network, NetworkDocument, NodeDocument};
use crate::oracle::{self, oracle_moments, QuadratureConfig};

pub const SCALES: [f64; 6] = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0];
pub const FIGURE_GRID: [f64; 2] = [0.0, 10.0];
pub const MAX_FANOUT: usize = 6;

fn binary_node(id: String, parent: Option<&str>, root: &[f64], rows: &[[f64; 2]]) -> NodeDocument {
    match parent {
        None => NodeDocument {
            id,
            alternatives: root.len(),
            parents: vec![],
            cpt: vec![CptEntry {
                given: vec![],
                counts: root.to_vec(),
            }],
        },
        Some(p) => NodeDocument {
            id,
            alternatives: 2,
            parents: vec![p.to_string()],
            cpt: rows
                .iter()
                .enumerate()
                .map(|(s, r)| CptEntry {
                    given: vec![s],
                    counts: r.to_vec(),
                })
                .collect(),
        },
    }
}

/// Root `E` with prior counts `root` and binary children `C1..Cn`, each with
/// one count row per root alternative.
pub fn star_network(root: &[f64], rows: &[[f64; 2]], children: usize) -> Network {
    let mut nodes = vec![binary_node("E".into(), None, root, rows)];
    for c in 1..=children {
        nodes.push(binary_node(format!("C{c}"), Some("E"), root, rows));
    }
    Network::from_document(&NetworkDocument {
        name: format!("star-{children}"),
        nodes,
    })
    .expect("well-formed star")
}

/// Chain `E → F → G → …` with `depth` edges. Every non-root node uses `rows`,
/// so `root` must be binary when `depth > 1`.
pub fn chain_network(root: &[f64], rows: &[[f64; 2]], depth: usize) -> Network {
    let id = |k: usize| char::from(b'E' + k as u8).to_string();
    let mut nodes = vec![binary_node(id(0), None, root, rows)];
    for k in 1..=depth {
        nodes.push(binary_node(id(k), Some(&id(k - 1)), root, rows));
    }
    Network::from_document(&NetworkDocument {
        name: format!("chain-{depth}"),
        nodes,
    })
    .expect("well-formed chain")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Table1,
    Table2,
    Table3,
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl Target {
    pub const ALL: [Target; 7] = [
        Target::Table1,
        Target::Table2,
        Target::Table3,
        Target::Fig1,
        Target::Fig2,
        Target::Fig3,
        Target::Fig4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::Table1 => "table1",
            Target::Table2 => "table2",
            Target::Table3 => "table3",
            Target::Fig1 => "fig1",
            Target::Fig2 => "fig2",
            Target::Fig3 => "fig3",
            Target::Fig4 => "fig4",
        }
    }

    pub fn is_table(self) -> bool {
        matches!(self, Target::Table1 | Target::Table2 | Target::Table3)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownTarget(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Prior,
    Apm,
    Mcim,
    Oracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Prior => "prior",
            Method::Apm => "apm",
            Method::Mcim => "mcim",
            Method::Oracle => "oracle",
        })
    }
}

/// Which statistic of `P(E = 0 | W)` a row reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    SecondMoment,
    Variance,
}

/// One network, evidence set and query from an experiment family.
#[derive(Debug, Clone)]
pub struct Case {
    pub target: Target,
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub depth: usize,
    pub net: Network,
    pub evidence: Evidence,
    pub statistic: Statistic,
}

impl Case {
    fn new(target: Target, a: f64, b: f64, n: usize, depth: usize, net: Network) -> Self {
        let mut evidence = Evidence::new();
        if depth > 1 {
            let leaf = net.len() - 1;
            evidence.insert(&net, leaf, 0).expect("leaf is free");
        } else {
            for c in 1..net.len() {
                evidence.insert(&net, c, 0).expect("child is free");
            }
        }
        let statistic = if target.is_table() {
            Statistic::SecondMoment
        } else {
            Statistic::Variance
        };
        Self {
            target,
            a,
            b,
            n,
            depth,
            net,
            evidence,
            statistic,
        }
    }
}

/// The cases of `target`, in output order.
pub fn cases(target: Target) -> Vec<Case> {
    let sym = |a: f64, b: f64| ([a, a], [[b, b], [b, b]]);
    let skewed = |a: f64| {
        let b = 4.0 * (a + 1.0) - 1.0;
        (b, [a, b], [[a, b], [a, b]])
    };
    let mut out = Vec::new();
    match target {
        Target::Table1 | Target::Table2 | Target::Table3 => {
            for a in SCALES {
                let (root, rows) = sym(a, a);
                let (net, n, depth) = match target {
                    Target::Table1 => (chain_network(&root, &rows, 1), 1, 1),
                    Target::Table2 => (star_network(&root, &rows, 2), 2, 1),
                    _ => (chain_network(&root, &rows, 2), 1, 2),
                };
                out.push(Case::new(target, a, a, n, depth, net));
            }
        }
        Target::Fig1 | Target::Fig3 => {
            for a in FIGURE_GRID {
                for b in FIGURE_GRID {
                    let (root, rows) = sym(a, b);
                    for k in 1..=MAX_FANOUT {
                        out.push(if target == Target::Fig1 {
                            Case::new(target, a, b, k, 1, star_network(&root, &rows, k))
                        } else {
                            Case::new(target, a, b, 1, k, chain_network(&root, &rows, k))
                        });
                    }
                }
            }
        }
        Target::Fig2 | Target::Fig4 => {
            for a in SCALES {
                let (b, root, rows) = skewed(a);
                for k in 1..=MAX_FANOUT {
                    out.push(if target == Target::Fig2 {
                        Case::new(target, a, b, k, 1, star_network(&root, &rows, k))
                    } else {
                        Case::new(target, a, b, 1, k, chain_network(&root, &rows, k))
                    });
                }
            }
        }
    }
    out
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub experiment: String,
    pub param_a: f64,
    pub param_b: f64,
    pub n: usize,
    pub depth: usize,
    pub method: Method,
    pub value: f64,
    pub std_error: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproduceConfig {
    pub samples: u64,
    pub seed: u64,
    pub mcim: bool,
    /// Run the quadrature oracle on cases with at most this many dimensions.
    pub oracle_max_dimensions: usize,
    pub quadrature: QuadratureConfig,
}

impl Default for ReproduceConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 7,
            mcim: true,
            oracle_max_dimensions: 5,
            quadrature: QuadratureConfig::default(),
        }
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64() * 1e3))
}

/// Runs every method on one case. The query is `P(E = 0 | W)`.
pub fn run_case(case: &Case, cfg: &ReproduceConfig) -> Result<Vec<RunRecord>> {
    let net = &case.net;
    let w = &case.evidence;
    let pick = |second: f64, variance: f64| match case.statistic {
        Statistic::SecondMoment => second,
        Statistic::Variance => variance,
    };
    let record = |method, value, std_error, wall_time_ms| RunRecord {
        experiment: case.target.name().to_string(),
        param_a: case.a,
        param_b: case.b,
        n: case.n,
        depth: case.depth,
        method,
        value,
        std_error,
        wall_time_ms,
    };
    let mut out = Vec::new();

    let (prior, ms) = timed(|| {
        let root: &DirichletCounts = &net.node(0).cpt()[0];
        Ok(pick(root.second_moment(0)?, root.variance(0)?))
    })?;
    out.push(record(Method::Prior, prior, 0.0, ms));

    let (value, ms) = timed(|| {
        let st = apm::propagate(net, w)?;
        Ok(pick(
            st.posterior_second_moment(0)[(0, 0)],
            st.posterior_variance(0, 0).value,
        ))
    })?;
    out.push(record(Method::Apm, value, 0.0, ms));

    if cfg.mcim {
        let sc = SampleConfig::for_network(cfg.samples, cfg.seed, net);
        let (est, ms) = timed(|| estimate_moments(net, w, 0, 0, &sc))?;
        let e = match case.statistic {
            Statistic::SecondMoment => est.second_moment,
            Statistic::Variance => est.variance,
        };
        out.push(record(Method::Mcim, e.value, e.std_error, ms));
    }

    if oracle::dimensions(net) <= cfg.oracle_max_dimensions {
        let (m, ms) = timed(|| oracle_moments(net, w, 0, 0, &cfg.quadrature))?;
        let e = pick_oracle(case.statistic, &m);
        out.push(record(Method::Oracle, e.value, 0.0, ms));
    }
    Ok(out)
}

fn pick_oracle(statistic: Statistic, m: &oracle::OracleMoments) -> oracle::OracleEstimate {
    match statistic {
        Statistic::SecondMoment => m.second_moment,
        Statistic::Variance => m.variance,
    }
}

/// All rows for `target`, in case order and then method order.
pub fn reproduce(target: Target, cfg: &ReproduceConfig) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for case in cases(target) {
        out.extend(run_case(&case, cfg)?);
    }
    Ok(out)
}

/// Writes `records` as CSV with the header
/// `experiment,param_a,param_b,n,depth,method,value,std_error,wall_time_ms`.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    if records.is_empty() {
        wtr.write_record([
            "experiment",
            "param_a",
            "param_b",
            "n",
            "depth",
            "method",
            "value",
            "std_error",
            "wall_time_ms",
        ])?;
    }
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}
