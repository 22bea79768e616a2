//! The maximal flow `φ_n` from `Γ¹_n` to `Γ²_n` in `Ω_n`, its minimal
//! cutset and source cluster, and Monte Carlo estimates of its lower tail
//! and of the cutset size distribution.

use std::collections::VecDeque;
use std::io::{self, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::capacities::{
    dequantize, derive_seed, law_checks, quantize, CapacityField, CapacityLaw,
};
use crate::error::{Error, Result};
use crate::geometry::{to_f64, Domain};
use crate::lattice::{discretize, induced_graph, DiscreteDomain, LatticeGraph, MeshIndex};
use crate::maxflow::{edge_capacities, FlowProblem, FlowResult};
use crate::stats::{decreasing_trend, quantile, wilson, Wilson, Z95};

/// Discretized domain and its graph at one mesh, reused across replicas.
#[derive(Debug, Clone)]
pub struct PhiExperiment {
    domain_hash: String,
    dim: usize,
    discrete: DiscreteDomain,
    graph: LatticeGraph,
    sources: Vec<u32>,
    sinks: Vec<u32>,
    /// `Ω` itself, for clipping the fattened cluster.
    boxes: Vec<(Vec<f64>, Vec<f64>)>,
}

impl PhiExperiment {
    pub fn new(domain: &Domain, n: u32) -> Result<Self> {
        let discrete = discretize(domain, MeshIndex::new(n)?)?;
        let graph = induced_graph(&discrete);
        let sources = discrete.source_indices();
        let sinks = discrete.sink_indices();
        let boxes = domain
            .boxes()
            .iter()
            .map(|b| {
                (
                    b.lo.iter().map(to_f64).collect(),
                    b.hi.iter().map(to_f64).collect(),
                )
            })
            .collect();
        Ok(PhiExperiment {
            domain_hash: domain.content_hash(),
            dim: domain.dim(),
            discrete,
            graph,
            sources,
            sinks,
            boxes,
        })
    }

    pub fn mesh(&self) -> u32 {
        self.graph.mesh()
    }

    pub fn graph(&self) -> &LatticeGraph {
        &self.graph
    }

    pub fn discrete(&self) -> &DiscreteDomain {
        &self.discrete
    }

    pub fn sources(&self) -> &[u32] {
        &self.sources
    }

    pub fn sinks(&self) -> &[u32] {
        &self.sinks
    }

    /// `n^{d−1}`.
    pub fn surface_scale(&self) -> f64 {
        f64::from(self.mesh()).powi(self.dim as i32 - 1)
    }

    /// Terminals are empty, so the flow vanishes for structural reasons.
    pub fn structurally_zero(&self) -> bool {
        self.sources.is_empty() || self.sinks.is_empty()
    }

    pub fn problem(&self) -> Result<FlowProblem<'_>> {
        FlowProblem::new(&self.graph, &self.sources, &self.sinks)
    }

    /// Full solve with cutset and cluster.
    pub fn run(&self, law: &CapacityLaw, seed: u64) -> Result<PhiRun> {
        let start = Instant::now();
        let field = CapacityField::new(*law, seed);
        let (flow, cluster) = if self.structurally_zero() {
            (None, None)
        } else {
            let caps = edge_capacities(&self.graph, &field);
            let mut result = self.problem()?.solve(&caps)?;
            result.seed = Some(seed);
            let cluster = source_cluster(self, &result);
            (Some(result), Some(cluster))
        };
        Ok(PhiRun {
            domain_hash: self.domain_hash.clone(),
            law: *law,
            n: self.mesh(),
            seed,
            phi: flow.as_ref().map_or(0.0, FlowResult::value_real),
            cut_size: flow.as_ref().map_or(0, FlowResult::cut_size),
            structurally_zero: self.structurally_zero(),
            cluster,
            millis: start.elapsed().as_secs_f64() * 1e3,
            flow,
        })
    }
}

/// One `φ_n` solve.
#[derive(Debug, Clone, Serialize)]
pub struct PhiRun {
    pub domain_hash: String,
    pub law: CapacityLaw,
    pub n: u32,
    pub seed: u64,
    pub phi: f64,
    /// `card(ℰ_n)` of the source-side minimal cut.
    pub cut_size: usize,
    /// Set when `Γ¹_n` or `Γ²_n` is empty.
    pub structurally_zero: bool,
    pub cluster: Option<ClusterSummary>,
    pub millis: f64,
    #[serde(skip)]
    pub flow: Option<FlowResult>,
}

/// `φ_n = φ(Γ¹_n → Γ²_n in Ω_n)` for one seed.
pub fn run_phi(domain: &Domain, law: &CapacityLaw, n: u32, seed: u64) -> Result<PhiRun> {
    PhiExperiment::new(domain, n)?.run(law, seed)
}

/// Summary of `Ẽ_n` and its fattening `E_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    /// `|Ẽ_n|`.
    pub size: usize,
    /// `ℒᵈ(E_n)`: the `1/n` cubes around `Ẽ_n`, clipped to `Ω`.
    pub volume: f64,
    /// `card(∂ᵉẼ_n) / n^{d−1}`.
    pub perimeter: f64,
    /// Whether `∂ᵉẼ_n` equals the extracted cutset.
    pub boundary_is_cutset: bool,
}

/// `Ẽ_n`: vertices joined to `Γ¹_n` by edges outside the cutset.
pub fn source_cluster(exp: &PhiExperiment, flow: &FlowResult) -> ClusterSummary {
    let graph = &exp.graph;
    let nv = graph.vertex_count();
    let mut in_cut = vec![false; graph.edge_count()];
    for &e in &flow.cutset.edges {
        in_cut[e] = true;
    }
    let mut adjacency: Vec<Vec<(u32, usize)>> = vec![Vec::new(); nv];
    for (e, ge) in graph.edges().iter().enumerate() {
        if !in_cut[e] {
            adjacency[ge.a as usize].push((ge.b, e));
            adjacency[ge.b as usize].push((ge.a, e));
        }
    }
    let mut seen = vec![false; nv];
    let mut queue = VecDeque::new();
    for &s in &exp.sources {
        seen[s as usize] = true;
        queue.push_back(s);
    }
    while let Some(v) = queue.pop_front() {
        for &(w, _) in &adjacency[v as usize] {
            if !seen[w as usize] {
                seen[w as usize] = true;
                queue.push_back(w);
            }
        }
    }
    let boundary: Vec<usize> = graph
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, ge)| seen[ge.a as usize] != seen[ge.b as usize])
        .map(|(e, _)| e)
        .collect();
    let n = f64::from(exp.mesh());
    let half = 0.5 / n;
    let mut volume = 0.0;
    for v in (0..nv as u32).filter(|&v| seen[v as usize]) {
        let z = graph.vertex(v);
        for (lo, hi) in &exp.boxes {
            let mut piece = 1.0;
            for k in 0..exp.dim {
                let c = z[k] as f64 / n;
                let overlap = (hi[k].min(c + half) - lo[k].max(c - half)).max(0.0);
                piece *= overlap;
            }
            volume += piece;
        }
    }
    ClusterSummary {
        size: seen.iter().filter(|&&s| s).count(),
        volume,
        perimeter: boundary.len() as f64 / exp.surface_scale(),
        boundary_is_cutset: boundary == flow.cutset.edges,
    }
}

/// `(φ_n, card(ℰ_n))` of independent replicas at one mesh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiSamples {
    pub n: u32,
    /// Quantized flow values.
    pub values: Vec<u64>,
    pub cut_sizes: Vec<u32>,
}

/// Replica `r` at mesh `n` uses the field seed `derive_seed(seed, [n, r])`.
pub fn replica_seed(seed: u64, n: u32, r: u64) -> u64 {
    derive_seed(seed, &[u64::from(n), r])
}

pub fn sample_phi(
    exp: &PhiExperiment,
    law: &CapacityLaw,
    replicas: usize,
    seed: u64,
) -> Result<PhiSamples> {
    let n = exp.mesh();
    if exp.structurally_zero() {
        return Ok(PhiSamples {
            n,
            values: vec![0; replicas],
            cut_sizes: vec![0; replicas],
        });
    }
    let problem = exp.problem()?;
    let pairs = (0..replicas as u64)
        .into_par_iter()
        .map_init(
            || problem.clone(),
            |p, r| {
                let field = CapacityField::new(*law, replica_seed(seed, n, r));
                let caps = edge_capacities(&exp.graph, &field);
                p.solve_summary(&caps).map(|(v, c)| (v, c as u32))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let (values, cut_sizes) = pairs.into_iter().unzip();
    Ok(PhiSamples {
        n,
        values,
        cut_sizes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: u32,
    pub replicas: u64,
    pub hits: u64,
    pub wilson: Wilson,
    /// `r_n = −ln p̂ / n^{d−1}`, only with hits.
    pub rate: Option<f64>,
    /// Half-width of the Wilson interval carried to the rate scale.
    pub rate_half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateVerdict {
    /// Every defined `r_n` is positive.
    pub all_positive: bool,
    /// The rate at the largest mesh with hits is at least the rate at the
    /// smallest mesh minus its own Wilson half-width.
    pub monotone_beyond_noise: bool,
    /// `p̂` decreases in `n` (one-sided weighted trend test at 5%).
    pub decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub lambda: f64,
    pub law: CapacityLaw,
    pub seed: u64,
    pub points: Vec<RatePoint>,
    pub verdict: RateVerdict,
    pub warnings: Vec<String>,
}

impl RateEstimate {
    pub const CSV_HEADER: &'static str = "n,replicas,hits,p_hat,wilson_lo,wilson_hi,r_n";

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for p in &self.points {
            let r = p.rate.map_or_else(String::new, |r| format!("{r}"));
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.n, p.replicas, p.hits, p.wilson.p_hat, p.wilson.lo, p.wilson.hi, r
            )?;
        }
        Ok(())
    }
}

/// One point of the lower tail `P̂[φ_n ≤ λ n^{d−1}]`.
pub fn rate_point(samples: &PhiSamples, lambda: f64, surface_scale: f64) -> RatePoint {
    let threshold = quantize(lambda * surface_scale);
    let hits = samples.values.iter().filter(|&&v| v <= threshold).count() as u64;
    let trials = samples.values.len() as u64;
    let w = wilson(hits, trials, Z95);
    let (rate, rate_half_width) = if hits > 0 {
        let r = -w.p_hat.ln() / surface_scale;
        let r_hi = -w.lo.ln() / surface_scale;
        let r_lo = -w.hi.ln() / surface_scale;
        (Some(r), Some(0.5 * (r_hi - r_lo)))
    } else {
        (None, None)
    };
    RatePoint {
        n: samples.n,
        replicas: trials,
        hits,
        wilson: w,
        rate,
        rate_half_width,
    }
}

pub fn rate_verdict(points: &[RatePoint]) -> RateVerdict {
    let with_hits: Vec<&RatePoint> = points.iter().filter(|p| p.rate.is_some()).collect();
    let all_positive = with_hits.iter().all(|p| p.rate.unwrap() > 0.0);
    let monotone_beyond_noise = match (with_hits.first(), with_hits.last()) {
        (Some(first), Some(last)) => {
            last.rate.unwrap() >= first.rate.unwrap() - last.rate_half_width.unwrap()
        }
        _ => false,
    };
    let xs: Vec<f64> = points.iter().map(|p| f64::from(p.n)).collect();
    let hits: Vec<u64> = points.iter().map(|p| p.hits).collect();
    let trials: Vec<u64> = points.iter().map(|p| p.replicas).collect();
    let decreasing =
        points.len() >= 2 && hits.iter().any(|&h| h > 0) && decreasing_trend(&xs, &hits, &trials);
    RateVerdict {
        all_positive,
        monotone_beyond_noise,
        decreasing,
    }
}

/// Assembles a rate estimate from per-mesh samples.
pub fn rate_from_samples(
    samples: &[(PhiSamples, f64)],
    law: &CapacityLaw,
    lambda: f64,
    seed: u64,
    dim: usize,
) -> RateEstimate {
    let points: Vec<RatePoint> = samples
        .iter()
        .map(|(s, scale)| rate_point(s, lambda, *scale))
        .collect();
    let mut warnings = Vec::new();
    let report = law_checks(law, dim);
    if report.subcritical == Some(false) {
        warnings.push("law is not subcritical: lower deviations need not be rare".into());
    }
    for p in &points {
        if p.hits == 0 {
            warnings.push(format!("no hits at n = {}; rate point omitted", p.n));
        }
    }
    RateEstimate {
        lambda,
        law: *law,
        seed,
        verdict: rate_verdict(&points),
        points,
        warnings,
    }
}

/// Samples every mesh of `meshes`, paired with `n^{d−1}`.
pub fn sample_meshes(
    domain: &Domain,
    law: &CapacityLaw,
    meshes: &[u32],
    replicas: usize,
    seed: u64,
) -> Result<Vec<(PhiSamples, f64)>> {
    law.validate()?;
    meshes
        .iter()
        .map(|&n| {
            let exp = PhiExperiment::new(domain, n)?;
            Ok((sample_phi(&exp, law, replicas, seed)?, exp.surface_scale()))
        })
        .collect()
}

/// Lower-deviation rate of `φ_n` below `λ n^{d−1}`.
pub fn estimate_rate(
    domain: &Domain,
    law: &CapacityLaw,
    lambda: f64,
    meshes: &[u32],
    replicas: usize,
    seed: u64,
) -> Result<RateEstimate> {
    if replicas == 0 {
        return Err(Error::InvalidDomain("replicas must be positive".into()));
    }
    let samples = sample_meshes(domain, law, meshes, replicas, seed)?;
    Ok(rate_from_samples(&samples, law, lambda, seed, domain.dim()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutsetPoint {
    pub n: u32,
    pub replicas: usize,
    /// `P̂[card(ℰ_n) ≥ β n^{d−1}]` for each `β` of the grid.
    pub tails: Vec<f64>,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutsetStats {
    pub betas: Vec<f64>,
    pub points: Vec<CutsetPoint>,
    /// For every `β` above the 99th percentile at the smallest mesh, the
    /// tail does not increase with `n`.
    pub tails_shrink: bool,
}

impl CutsetStats {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,beta,tail")?;
        for p in &self.points {
            for (b, t) in self.betas.iter().zip(&p.tails) {
                writeln!(out, "{},{},{}", p.n, b, t)?;
            }
        }
        Ok(())
    }
}

pub fn cutset_point(samples: &PhiSamples, betas: &[f64], surface_scale: f64) -> CutsetPoint {
    let ratios: Vec<f64> = samples
        .cut_sizes
        .iter()
        .map(|&c| f64::from(c) / surface_scale)
        .collect();
    let total = ratios.len().max(1) as f64;
    let tails = betas
        .iter()
        .map(|&b| ratios.iter().filter(|&&r| r >= b).count() as f64 / total)
        .collect();
    CutsetPoint {
        n: samples.n,
        replicas: ratios.len(),
        tails,
        q50: quantile(&ratios, 0.5),
        q90: quantile(&ratios, 0.9),
        q99: quantile(&ratios, 0.99),
    }
}

pub fn cutset_from_samples(samples: &[(PhiSamples, f64)], betas: &[f64]) -> CutsetStats {
    let points: Vec<CutsetPoint> = samples
        .iter()
        .map(|(s, scale)| cutset_point(s, betas, *scale))
        .collect();
    let tails_shrink = match points.first() {
        None => true,
        Some(first) => betas
            .iter()
            .enumerate()
            .filter(|(_, &b)| b > first.q99)
            .all(|(i, _)| points.windows(2).all(|w| w[1].tails[i] <= w[0].tails[i])),
    };
    CutsetStats {
        betas: betas.to_vec(),
        points,
        tails_shrink,
    }
}

/// Tails of `card(ℰ_n) / n^{d−1}` over a `β` grid.
pub fn cutset_tail(
    domain: &Domain,
    law: &CapacityLaw,
    meshes: &[u32],
    replicas: usize,
    betas: &[f64],
    seed: u64,
) -> Result<CutsetStats> {
    let samples = sample_meshes(domain, law, meshes, replicas, seed)?;
    Ok(cutset_from_samples(&samples, betas))
}

/// Bracket for `P[φ_n = 0]` on the unit square with bernoulli(p) edges:
/// some of the `n` disjoint vertical layers of `n + 1` edges is closed
/// (lower), every one of the `n + 1` rows is blocked (upper).
pub fn flat_layer_bracket(p: f64, n: u32) -> (f64, f64) {
    let q = 1.0 - p;
    let n = f64::from(n);
    let lower = 1.0 - (1.0 - q.powf(n + 1.0)).powf(n);
    let upper = (1.0 - p.powf(n)).powf(n + 1.0);
    (lower, upper)
}

/// Real-valued flow of a quantized sample.
pub fn sample_value(q: u64) -> f64 {
    dequantize(q)
}
