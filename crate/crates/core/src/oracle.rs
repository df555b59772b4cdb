//! Deterministic ground truth for posterior moments on small binary networks.
//!
//! Every CPT column of a binary node has one free parameter `x = P(alt 0 | cfg)`
//! with a `Beta(a_0 + 1, a_1 + 1)` weight. The posterior moments are ratios of
//! integrals over the product of those columns,
//!
//! ```text
//! E[P(x | W)^k] = ∫ N(x)^k / D(x)^(k-1) dP(x) / ∫ D(x) dP(x)
//! ```
//!
//! where `D = P(W | x)` and `N = P(node = alt, W | x)` are multilinear
//! polynomials compiled by enumerating the network. The integrals use a
//! tensor-product Gauss–Legendre rule on each column's effective support with
//! the Beta density folded into the weights.
//!
//! Networks with a non-binary node fall back to a long Monte Carlo run using
//! the enumeration engine.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::enumeration::EnumerationBudget;
use crate::error::{Error, Result};
use crate::mcim::{estimate_moments, InnerEngine, SampleConfig};
use crate::model::{Evidence, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureConfig {
    pub points_per_dimension: usize,
    pub max_dimensions: usize,
    /// Sample count for the Monte Carlo fallback on non-binary networks.
    pub fallback_samples: u64,
    pub fallback_seed: u64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            points_per_dimension: 64,
            max_dimensions: 12,
            fallback_samples: 10_000_000,
            fallback_seed: 0,
        }
    }
}

impl QuadratureConfig {
    pub fn with_points(points: usize) -> Self {
        Self {
            points_per_dimension: points,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Quadrature { dimensions: usize, points: usize },
    MonteCarlo { samples: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub value: f64,
    /// For quadrature, the change from half the points to the full rule;
    /// for the Monte Carlo fallback, the standard error.
    pub error: f64,
    pub method: OracleMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMoments {
    pub mean: OracleEstimate,
    pub second_moment: OracleEstimate,
    pub variance: OracleEstimate,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Quadrature rule for one column: nodes on the Beta's effective support
/// and weights proportional to density times Legendre weight, summing to 1.
fn beta_rule(a0: f64, a1: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let (alpha, beta) = (a0 + 1.0, a1 + 1.0);
    let s = alpha + beta;
    let mean = alpha / s;
    let sd = (alpha * beta / (s * s * (s + 1.0))).sqrt();
    let lo = (mean - 12.0 * sd).max(0.0);
    let hi = (mean + 12.0 * sd).min(1.0);
    let (z, gw) = gauss_legendre(points);
    let xs: Vec<f64> = z.iter().map(|z| lo + (hi - lo) * (z + 1.0) / 2.0).collect();
    let logs: Vec<f64> = xs
        .iter()
        .zip(&gw)
        .map(|(x, g)| a0 * x.ln() + a1 * (1.0 - x).ln() + g.ln())
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut ws: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = ws.iter().sum();
    for w in &mut ws {
        *w /= total;
    }
    (xs, ws)
}

/// Per dimension: 0 absent, 1 the factor `x`, 2 the factor `1 - x`.
type Monomial = Vec<u8>;

#[derive(Debug, Clone)]
struct Polynomials {
    dims: usize,
    // (monomial, coefficient in D, coefficient in N)
    terms: Vec<(Monomial, f64, f64)>,
}

fn column_offsets(net: &Network) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(net.len());
    let mut dims = 0;
    for i in 0..net.len() {
        offsets.push(dims);
        dims += net.configurations(i);
    }
    (offsets, dims)
}

/// Expands `P(W | x)` and `P(node = alt, W | x)` by enumerating every
/// assignment consistent with the evidence.
fn compile(net: &Network, w: &Evidence, node: usize, alt: usize) -> Polynomials {
    let (offsets, dims) = column_offsets(net);
    let free: Vec<usize> = (0..net.len()).filter(|&i| !w.contains(i)).collect();
    let mut x: Vec<usize> = (0..net.len()).map(|i| w.get(i).unwrap_or(0)).collect();
    let mut acc: BTreeMap<Monomial, (f64, f64)> = BTreeMap::new();
    loop {
        let mut m = vec![0u8; dims];
        for i in 0..net.len() {
            let pa: Vec<usize> = net.parents(i).iter().map(|&p| x[p]).collect();
            let row = net.config_index(i, &pa).expect("states in range");
            m[offsets[i] + row] = if x[i] == 0 { 1 } else { 2 };
        }
        let e = acc.entry(m).or_insert((0.0, 0.0));
        e.0 += 1.0;
        if x[node] == alt {
            e.1 += 1.0;
        }
        // Advance the free nodes, last fastest.
        let mut k = free.len();
        loop {
            if k == 0 {
                return Polynomials {
                    dims,
                    terms: acc.into_iter().map(|(m, (d, n))| (m, d, n)).collect(),
                };
            }
            k -= 1;
            let i = free[k];
            x[i] += 1;
            if x[i] < net.alternatives(i) {
                break;
            }
            x[i] = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    d: f64,
    n: f64,
    q: f64,
}

impl Sums {
    fn add(self, o: Sums) -> Sums {
        Sums {
            d: self.d + o.d,
            n: self.n + o.n,
            q: self.q + o.q,
        }
    }
}

fn factor(code: u8, x: f64) -> f64 {
    match code {
        0 => 1.0,
        1 => x,
        _ => 1.0 - x,
    }
}

/// `Σ weight·D`, `Σ weight·N`, `Σ weight·N²/D` over the tensor grid.
///
/// D and N are linear in each coordinate, so the last (up to two)
/// coordinates are handled by evaluating the polynomials at the corners of
/// the unit square once per head point and interpolating bilinearly.
fn integrate(poly: &Polynomials, rules: &[(Vec<f64>, Vec<f64>)]) -> Sums {
    let dims = poly.dims;
    let tail = dims.min(2);
    let head = dims - tail;
    let corners = 1usize << tail;

    // Tail grid: weight and corner basis values at every tail point.
    let mut tail_w = vec![1.0];
    let mut tail_basis: Vec<Vec<f64>> = vec![vec![1.0]];
    for (xs, ws) in &rules[head..] {
        let mut nw = Vec::new();
        let mut nb = Vec::new();
        for (tw, tb) in tail_w.iter().zip(&tail_basis) {
            for (x, w) in xs.iter().zip(ws) {
                nw.push(tw * w);
                // Corner bit 1 selects x, bit 0 selects 1 - x.
                let mut b = Vec::with_capacity(tb.len() * 2);
                for v in tb {
                    b.push(v * (1.0 - x));
                    b.push(v * x);
                }
                nb.push(b);
            }
        }
        tail_w = nw;
        tail_basis = nb;
    }
    let tail_basis: Vec<f64> = tail_basis.into_iter().flatten().collect();
    // Σ_tail weight·basis_c, for the linear sums.
    let mut basis_sum = vec![0.0; corners];
    for (w, b) in tail_w.iter().zip(tail_basis.chunks_exact(corners)) {
        for (s, v) in basis_sum.iter_mut().zip(b) {
            *s += w * v;
        }
    }

    let head_points: usize = rules[..head].iter().map(|r| r.0.len()).product();
    let first = if head == 0 { 1 } else { rules[0].0.len() };
    let per_first = head_points / first;

    let eval_head = |idx: usize| -> Sums {
        let mut digits = vec![0usize; head];
        let mut r = idx;
        for k in (0..head).rev() {
            let len = rules[k].0.len();
            digits[k] = r % len;
            r /= len;
        }
        let hw: f64 = (0..head).map(|k| rules[k].1[digits[k]]).product();
        let hx: Vec<f64> = (0..head).map(|k| rules[k].0[digits[k]]).collect();
        let mut dc = vec![0.0; corners];
        let mut nc = vec![0.0; corners];
        for (m, cd, cn) in &poly.terms {
            let hv: f64 = (0..head).map(|k| factor(m[k], hx[k])).product();
            if hv == 0.0 {
                continue;
            }
            for c in 0..corners {
                let mut v = hv;
                for j in 0..tail {
                    // Corner bits follow the basis layout: first tail
                    // dimension is the high bit.
                    let bit = (c >> (tail - 1 - j)) & 1;
                    v *= factor(m[head + j], bit as f64);
                }
                dc[c] += cd * v;
                nc[c] += cn * v;
            }
        }
        let mut s = Sums::default();
        for c in 0..corners {
            s.d += dc[c] * basis_sum[c];
            s.n += nc[c] * basis_sum[c];
        }
        let mut q = 0.0;
        for (w, b) in tail_w.iter().zip(tail_basis.chunks_exact(corners)) {
            let mut d = 0.0;
            let mut n = 0.0;
            for c in 0..corners {
                d += dc[c] * b[c];
                n += nc[c] * b[c];
            }
            if d > 0.0 {
                q += w * n * n / d;
            }
        }
        s.q = q;
        Sums {
            d: hw * s.d,
            n: hw * s.n,
            q: hw * s.q,
        }
    };

    // One task per value of the first head coordinate; partial sums are
    // combined in index order so the result does not depend on scheduling.
    let partials: Vec<Sums> = (0..first)
        .into_par_iter()
        .map(|f| {
            (f * per_first..(f + 1) * per_first)
                .map(eval_head)
                .fold(Sums::default(), Sums::add)
        })
        .collect();
    partials.into_iter().fold(Sums::default(), Sums::add)
}

fn quadrature_moments(
    net: &Network,
    poly: &Polynomials,
    points: usize,
) -> Result<(f64, f64)> {
    let mut rules = Vec::with_capacity(poly.dims);
    for node in net.nodes() {
        for counts in node.cpt() {
            let c = counts.counts();
            rules.push(beta_rule(c[0], c[1], points));
        }
    }
    let s = integrate(poly, &rules);
    if s.d.is_nan() || s.d <= 0.0 {
        return Err(Error::ImpossibleEvidence);
    }
    Ok((s.n / s.d, s.q / s.d))
}

fn check(net: &Network, w: &Evidence, node: usize, alt: usize, cfg: &QuadratureConfig) -> Result<()> {
    net.check_alternative(node, alt)?;
    if w.contains(node) {
        return Err(Error::QueryInEvidence(net.node(node).id().to_string()));
    }
    if cfg.points_per_dimension < 2 {
        return Err(Error::Config("points_per_dimension must be at least 2".into()));
    }
    Ok(())
}

/// Mean, second moment and variance of `P(node = alt | W)` by quadrature,
/// or by the Monte Carlo fallback when some node is not binary.
pub fn oracle_moments(
    net: &Network,
    w: &Evidence,
    node: usize,
    alt: usize,
    cfg: &QuadratureConfig,
) -> Result<OracleMoments> {
    check(net, w, node, alt, cfg)?;
    if net.nodes().iter().any(|n| n.alternatives() != 2) {
        let sc = SampleConfig {
            budget: EnumerationBudget::default(),
            ..SampleConfig::new(cfg.fallback_samples, cfg.fallback_seed)
                .with_engine(InnerEngine::Enumeration)
        };
        let est = estimate_moments(net, w, node, alt, &sc)?;
        let method = OracleMethod::MonteCarlo {
            samples: cfg.fallback_samples,
        };
        let wrap = |e: crate::mcim::EstimateResult| OracleEstimate {
            value: e.value,
            error: e.std_error,
            method,
        };
        return Ok(OracleMoments {
            mean: wrap(est.mean),
            second_moment: wrap(est.second_moment),
            variance: wrap(est.variance),
        });
    }
    let (_, dims) = column_offsets(net);
    if dims > cfg.max_dimensions {
        return Err(Error::DimensionBudget {
            dimensions: dims,
            max: cfg.max_dimensions,
        });
    }
    let poly = compile(net, w, node, alt);
    let p = cfg.points_per_dimension;
    let (m, s) = quadrature_moments(net, &poly, p)?;
    let (hm, hs) = quadrature_moments(net, &poly, p / 2)?;
    let method = OracleMethod::Quadrature {
        dimensions: dims,
        points: p,
    };
    let est = |value: f64, coarse: f64| OracleEstimate {
        value,
        error: (value - coarse).abs(),
        method,
    };
    Ok(OracleMoments {
        mean: est(m, hm),
        second_moment: est(s, hs),
        variance: est(s - m * m, hs - hm * hm),
    })
}

/// `E[P(node = alt | W)^2]`.
pub fn quadrature_second_moment(
    net: &Network,
    w: &Evidence,
    node: usize,
    alt: usize,
    cfg: &QuadratureConfig,
) -> Result<OracleEstimate> {
    Ok(oracle_moments(net, w, node, alt, cfg)?.second_moment)
}

/// `Var[P(node = alt | W)]`.
pub fn oracle_variance(
    net: &Network,
    w: &Evidence,
    node: usize,
    alt: usize,
    cfg: &QuadratureConfig,
) -> Result<OracleEstimate> {
    Ok(oracle_moments(net, w, node, alt, cfg)?.variance)
}

/// Number of quadrature dimensions for `net`: one per CPT column.
pub fn dimensions(net: &Network) -> usize {
    column_offsets(net).1
}
