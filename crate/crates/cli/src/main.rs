//! `varprop`: posterior variances for Dirichlet-parameterized belief networks.
//!
//! Exit codes: 0 ok, 1 I/O or parse error, 2 structural problem or method
//! mismatch, 3 impossible evidence.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use varprop::apm;
use varprop::experiments::{reproduce, write_csv, ReproduceConfig, Target};
use varprop::mcim::{estimate_moments, SampleConfig};
use varprop::model::{validate_document, NetworkDocument};
use varprop::oracle::{oracle_moments, OracleMethod, QuadratureConfig};
use varprop::{Error, Evidence, Network};

#[derive(Parser)]
#[command(name = "varprop", version, about = "Variance of posterior probabilities in belief networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network document and report its structure.
    Validate { file: PathBuf },
    /// Posterior mean, second moment and variance of one alternative.
    Variance {
        file: PathBuf,
        /// Instantiated node, as NODE=index (repeatable, 0-based).
        #[arg(long = "evidence", value_name = "NODE=INDEX")]
        evidence: Vec<String>,
        /// Node to query.
        #[arg(long)]
        node: String,
        /// Alternative of the queried node.
        #[arg(long, default_value_t = 0)]
        alt: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::All)]
        method: MethodArg,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Quadrature points per dimension for the oracle.
        #[arg(long = "quad-points", default_value_t = 64)]
        quad_points: usize,
    },
    /// Regenerate a table or figure sweep as CSV.
    Reproduce {
        /// table1, table2, table3, fig1, fig2, fig3 or fig4.
        target: String,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Apm,
    Mcim,
    Oracle,
    All,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Document(_) | Error::Csv(_) => 1,
        Error::ImpossibleEvidence => 3,
        _ => 2,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn read_document(path: &Path) -> Result<NetworkDocument, Error> {
    let text = std::fs::read_to_string(path)?;
    NetworkDocument::from_json(&text)
}

fn cmd_validate(file: &Path) -> ExitCode {
    let doc = match read_document(file) {
        Ok(d) => d,
        Err(e) => return fail(e),
    };
    let report = validate_document(&doc);
    println!("{report}");
    if report.is_valid() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

struct Query<'a> {
    net: &'a Network,
    evidence: Evidence,
    node: usize,
    alt: usize,
}

fn run_apm(q: &Query) -> Result<(), Error> {
    let st = apm::propagate(q.net, &q.evidence)?;
    let v = st.posterior_variance(q.node, q.alt);
    println!("apm:");
    println!("  mean: {:.6}", st.posterior_mean(q.node)[q.alt]);
    println!("  second_moment: {:.6}", st.posterior_second_moment(q.node)[(q.alt, q.alt)]);
    println!("  variance: {:.6}", v.value);
    if v.negative {
        println!("  negative_variance: true");
    }
    Ok(())
}

fn run_mcim(q: &Query, samples: u64, seed: u64) -> Result<(), Error> {
    let cfg = SampleConfig::for_network(samples, seed, q.net);
    let est = estimate_moments(q.net, &q.evidence, q.node, q.alt, &cfg)?;
    println!("mcim:");
    println!("  samples: {samples}");
    println!("  seed: {seed}");
    for (name, e) in [
        ("mean", est.mean),
        ("second_moment", est.second_moment),
        ("variance", est.variance),
    ] {
        println!("  {name}: {:.6} (std_error {:.6})", e.value, e.std_error);
    }
    Ok(())
}

fn run_oracle(q: &Query, points: usize) -> Result<(), Error> {
    let cfg = QuadratureConfig::with_points(points);
    let m = oracle_moments(q.net, &q.evidence, q.node, q.alt, &cfg)?;
    println!("oracle:");
    match m.mean.method {
        OracleMethod::Quadrature { dimensions, points } => {
            println!("  quadrature: {dimensions} dimensions, {points} points each");
        }
        OracleMethod::MonteCarlo { samples } => {
            println!("  fallback monte carlo: {samples} samples");
        }
    }
    for (name, e) in [
        ("mean", m.mean),
        ("second_moment", m.second_moment),
        ("variance", m.variance),
    ] {
        println!("  {name}: {:.6} (error {:.1e})", e.value, e.error);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_variance(
    file: &Path,
    evidence: &[String],
    node: &str,
    alt: usize,
    method: MethodArg,
    samples: u64,
    seed: u64,
    quad_points: usize,
) -> ExitCode {
    let net = match read_document(file).and_then(|d| Network::from_document(&d)) {
        Ok(n) => n,
        Err(e) => return fail(e),
    };
    let query = (|| {
        let evidence = Evidence::parse(&net, evidence)?;
        let node = net.node_index(node)?;
        if alt >= net.alternatives(node) {
            return Err(Error::AlternativeOutOfRange {
                node: net.node(node).id().to_string(),
                alt,
                alternatives: net.alternatives(node),
            });
        }
        if evidence.contains(node) {
            return Err(Error::QueryInEvidence(net.node(node).id().to_string()));
        }
        Ok(Query {
            net: &net,
            evidence,
            node,
            alt,
        })
    })();
    let q = match query {
        Ok(q) => q,
        Err(e) => return fail(e),
    };
    let result = match method {
        MethodArg::Apm => run_apm(&q),
        MethodArg::Mcim => run_mcim(&q, samples, seed),
        MethodArg::Oracle => run_oracle(&q, quad_points),
        MethodArg::All => (|| {
            if net.is_polytree() {
                run_apm(&q)?;
            } else {
                println!("apm: skipped ({})", Error::NotPolytree);
            }
            run_mcim(&q, samples, seed)?;
            match run_oracle(&q, quad_points) {
                Err(e @ Error::DimensionBudget { .. }) => {
                    println!("oracle: skipped ({e})");
                    Ok(())
                }
                other => other,
            }
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn cmd_reproduce(target: &str, out: Option<&Path>, samples: u64, seed: u64) -> ExitCode {
    let target: Target = match target.parse() {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let cfg = ReproduceConfig {
        samples,
        seed,
        ..ReproduceConfig::default()
    };
    // Open the output first so an unwritable path fails before any work.
    let sink: Box<dyn Write> = match out {
        Some(path) => match File::create(path) {
            Ok(f) => Box::new(BufWriter::new(f)),
            Err(e) => return fail(e.into()),
        },
        None => Box::new(io::stdout().lock()),
    };
    match reproduce(target, &cfg).and_then(|rows| write_csv(&rows, sink)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { file } => cmd_validate(&file),
        Command::Variance {
            file,
            evidence,
            node,
            alt,
            method,
            samples,
            seed,
            quad_points,
        } => cmd_variance(&file, &evidence, &node, alt, method, samples, seed, quad_points),
        Command::Reproduce {
            target,
            out,
            samples,
            seed,
        } => cmd_reproduce(&target, out.as_deref(), samples, seed),
    }
}
