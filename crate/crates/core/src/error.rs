use thiserror::Error;

use crate::model::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed network document: {0}")]
    Document(#[from] serde_json::Error),

    #[error("invalid network: {}", format_diagnostics(.0))]
    InvalidNetwork(Vec<Diagnostic>),

    #[error("singly connected network required")]
    NotPolytree,

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),

    #[error("alternative {alt} out of range for node `{node}` with {alternatives} alternatives")]
    AlternativeOutOfRange {
        node: String,
        alt: usize,
        alternatives: usize,
    },

    #[error("parent configuration {config} out of range for node `{node}` ({configs} configurations)")]
    ConfigurationOutOfRange {
        node: String,
        config: usize,
        configs: usize,
    },

    #[error("index {index} out of range for {len} components")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("cross moment requires distinct indices, got {0} twice; use the second moment instead")]
    SameIndex(usize),

    #[error("invalid Dirichlet counts: {0}")]
    InvalidCounts(String),

    #[error("node `{0}` is already instantiated")]
    AlreadyInstantiated(String),

    #[error("node `{0}` is instantiated in the evidence")]
    QueryInEvidence(String),

    #[error("evidence is impossible")]
    ImpossibleEvidence,

    #[error("malformed evidence assignment `{0}`, expected NODE=index")]
    EvidenceSyntax(String),

    #[error("point parameters do not match the network shape: {0}")]
    ShapeMismatch(String),

    #[error("enumeration would visit {states} joint states, budget is {budget}")]
    BudgetExceeded { states: u128, budget: u64 },

    #[error("quadrature needs {dimensions} dimensions, budget is {max}")]
    DimensionBudget { dimensions: usize, max: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown reproduction target `{0}`")]
    UnknownTarget(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
