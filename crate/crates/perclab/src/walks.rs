//! Random walks: the delayed reversible walk on a forest with the two-sided
//! root-biased start, the ambient unit-ball walk, and their diagnostics.
//!
//! The delayed walk moves from `v` to itself or to any neighbor, each with
//! probability `1/(deg(v) + 1)`. A two-sided walk anchored at `x` first
//! draws `w(0)` among the vertices within distance 1 of `x`, weighted by
//! `deg + 1`, then runs two independent delayed walks forward and backward.
//! Walks are censored once they reach a vertex that is not interior-complete
//! (its neighborhood is truncated by the window), so truncation bias is
//! visible rather than hidden.

use rand::Rng;

use crate::error::{Error, Result};
use crate::forest::TrifForest;
use crate::geometry::{Point, Space};
use crate::process::PointMeasure;
use crate::scene::{Phase, Scene};
use crate::stats;

/// The minimal graph view a walk needs.
#[derive(Debug, Clone)]
pub struct WalkGraph {
    pub positions: Vec<Point>,
    pub adj: Vec<Vec<u32>>,
    pub interior_complete: Vec<bool>,
}

impl WalkGraph {
    pub fn from_forest(forest: &TrifForest) -> WalkGraph {
        WalkGraph {
            positions: forest.vertices.iter().map(|t| t.point).collect(),
            adj: forest.adj.clone(),
            interior_complete: forest.interior_complete.clone(),
        }
    }

    /// Synthetic rooted tree with interior degree `degree`; all positions at
    /// the origin (geometry-free diagnostics). Leaves stand in for the
    /// unrealized continuation and are marked incomplete.
    pub fn synthetic_tree(degree: usize, depth: usize) -> WalkGraph {
        let (tree, leaves) = crate::flow::synthetic_regular_tree(degree, depth);
        let n = tree.n();
        let mut interior_complete = vec![true; n];
        for l in leaves {
            interior_complete[l as usize] = false;
        }
        WalkGraph { positions: vec![Point::ORIGIN; n], adj: tree.adj, interior_complete }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }
}

/// One delayed step from `v`: stay or move to a uniform neighbor, each
/// outcome with probability `1/(deg+1)`.
pub fn delayed_step<R: Rng + ?Sized>(graph: &WalkGraph, v: u32, rng: &mut R) -> u32 {
    let deg = graph.degree(v);
    let pick = rng.gen_range(0..=deg);
    if pick == 0 {
        v
    } else {
        graph.adj[v as usize][pick - 1]
    }
}

/// A realized two-sided delayed walk `w(−k..k)`.
#[derive(Debug, Clone)]
pub struct ForestWalk {
    pub start: u32,
    /// Candidate start vertices (within distance 1 of the anchor) and their
    /// `deg+1` weights, recorded for the root-bias diagnostics.
    pub candidates: Vec<u32>,
    pub weights: Vec<u32>,
    /// `w(1..=k)` and `w(−1..=−k)`.
    pub fwd: Vec<u32>,
    pub bwd: Vec<u32>,
    /// Smallest `|n|` (per direction, 0 shared) whose vertex is not
    /// interior-complete; observables at and beyond it are truncated.
    pub censor_fwd: Option<usize>,
    pub censor_bwd: Option<usize>,
}

impl ForestWalk {
    pub fn at(&self, n: i64) -> u32 {
        match n.cmp(&0) {
            std::cmp::Ordering::Equal => self.start,
            std::cmp::Ordering::Greater => self.fwd[n as usize - 1],
            std::cmp::Ordering::Less => self.bwd[(-n) as usize - 1],
        }
    }

    /// Importance weight of this walk under the two-sided law: the anchor's
    /// total candidate weight `Σ c_G(x₀)` (the defining sum weights each
    /// scene–anchor pair by exactly this mass).
    pub fn weight(&self) -> f64 {
        self.weights.iter().map(|&w| w as f64).sum()
    }

    /// Is the observable at time `n` untouched by window truncation?
    pub fn valid_at(&self, n: i64) -> bool {
        let censor = if n >= 0 { self.censor_fwd } else { self.censor_bwd };
        match censor {
            None => true,
            Some(c) => (n.unsigned_abs() as usize) < c,
        }
    }
}

/// Draw a two-sided delayed walk anchored at `x`; `None` when no forest
/// vertex lies within distance 1 of the anchor.
pub fn two_sided_walk<R: Rng + ?Sized>(
    graph: &WalkGraph,
    space: Space,
    anchor: &Point,
    k: usize,
    rng: &mut R,
) -> Option<ForestWalk> {
    let mut candidates: Vec<u32> = (0..graph.n() as u32)
        .filter(|&v| space.distance(&graph.positions[v as usize], anchor) <= 1.0)
        .collect();
    candidates.sort_unstable();
    if candidates.is_empty() {
        return None;
    }
    let weights: Vec<u32> = candidates.iter().map(|&v| graph.degree(v) as u32 + 1).collect();
    let total: u32 = weights.iter().sum();
    let mut pick = rng.gen_range(0..total);
    let mut start = candidates[0];
    for (v, w) in candidates.iter().zip(&weights) {
        if pick < *w {
            start = *v;
            break;
        }
        pick -= w;
    }
    let run = |rng: &mut R| {
        let mut path = Vec::with_capacity(k);
        let mut censor = None;
        let mut cur = start;
        for i in 0..k {
            cur = delayed_step(graph, cur, rng);
            path.push(cur);
            if censor.is_none() && !graph.interior_complete[cur as usize] {
                censor = Some(i + 1);
            }
        }
        (path, censor)
    };
    let (fwd, mut censor_fwd) = run(rng);
    let (bwd, mut censor_bwd) = run(rng);
    if !graph.interior_complete[start as usize] {
        censor_fwd = Some(0);
        censor_bwd = Some(0);
    }
    Some(ForestWalk { start, candidates, weights, fwd, bwd, censor_fwd, censor_bwd })
}

/// An isometry-invariant observable of the walker's local environment.
pub trait WalkObservable {
    fn bins(&self) -> usize;
    fn eval(&self, graph: &WalkGraph, vertex: u32) -> usize;
}

/// Degree of the current vertex, clamped into `0..=max_degree`.
pub struct DegreeObservable {
    pub max_degree: usize,
}

impl WalkObservable for DegreeObservable {
    fn bins(&self) -> usize {
        self.max_degree + 1
    }
    fn eval(&self, graph: &WalkGraph, vertex: u32) -> usize {
        graph.degree(vertex).min(self.max_degree)
    }
}

/// Indicator of an independent-process atom within `radius` of the vertex.
pub struct NearbyAtomObservable<'a> {
    pub space: Space,
    pub measure: &'a PointMeasure,
    pub radius: f64,
}

impl WalkObservable for NearbyAtomObservable<'_> {
    fn bins(&self) -> usize {
        2
    }
    fn eval(&self, graph: &WalkGraph, vertex: u32) -> usize {
        let p = &graph.positions[vertex as usize];
        usize::from(
            self.measure
                .atoms
                .iter()
                .any(|a| self.space.distance(&a.point, p) <= self.radius),
        )
    }
}

/// Pooled per-time distributions of an observable along two-sided walks.
///
/// Each accepted walk enters with its importance weight `Σ c_G(x₀)` over the
/// anchor's candidate set, making the pooled per-time distributions unbiased
/// estimates of the two-sided law's marginals.
pub struct StationarityDiagnostic {
    pub n_max: usize,
    pub bins: usize,
    /// weighted mass[n + n_max][bin] for n in −n_max..=n_max.
    pub counts: Vec<Vec<f64>>,
    pub accepted: u64,
    pub rejected: u64,
    pub censored_samples: u64,
    /// Σ weight and Σ weight² (for the effective sample size).
    pub weight_sum: f64,
    pub weight_sq_sum: f64,
}

fn weighted_tv(p: &[f64], q: &[f64]) -> f64 {
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    if sp <= 0.0 || sq <= 0.0 {
        return f64::NAN;
    }
    0.5 * p.iter().zip(q).map(|(&a, &b)| (a / sp - b / sq).abs()).sum::<f64>()
}

impl StationarityDiagnostic {
    pub fn new(n_max: usize, bins: usize) -> StationarityDiagnostic {
        StationarityDiagnostic {
            n_max,
            bins,
            counts: vec![vec![0.0; bins]; 2 * n_max + 1],
            accepted: 0,
            rejected: 0,
            censored_samples: 0,
            weight_sum: 0.0,
            weight_sq_sum: 0.0,
        }
    }

    pub fn record_rejected(&mut self) {
        self.rejected += 1;
    }

    pub fn add_walk<O: WalkObservable>(&mut self, graph: &WalkGraph, walk: &ForestWalk, obs: &O) {
        self.accepted += 1;
        let weight = walk.weight();
        self.weight_sum += weight;
        self.weight_sq_sum += weight * weight;
        for n in -(self.n_max as i64)..=(self.n_max as i64) {
            if !walk.valid_at(n) {
                self.censored_samples += 1;
                continue;
            }
            let bin = obs.eval(graph, walk.at(n));
            self.counts[(n + self.n_max as i64) as usize][bin.min(self.bins - 1)] += weight;
        }
    }

    pub fn merge(&mut self, other: &StationarityDiagnostic) {
        assert_eq!(self.n_max, other.n_max);
        assert_eq!(self.bins, other.bins);
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.censored_samples += other.censored_samples;
        self.weight_sum += other.weight_sum;
        self.weight_sq_sum += other.weight_sq_sum;
        for (row_m, row_o) in self.counts.iter_mut().zip(&other.counts) {
            for (m, v) in row_m.iter_mut().zip(row_o) {
                *m += v;
            }
        }
    }

    /// Kish effective sample size of the weighted pool.
    pub fn effective_samples(&self) -> f64 {
        if self.weight_sq_sum == 0.0 {
            0.0
        } else {
            self.weight_sum * self.weight_sum / self.weight_sq_sum
        }
    }

    fn dist(&self, n: i64) -> &[f64] {
        &self.counts[(n + self.n_max as i64) as usize]
    }

    /// Max pairwise total-variation distance between the per-time
    /// distributions for times `0..=n_max`.
    pub fn max_pairwise_tv(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..=self.n_max as i64 {
            for b in (a + 1)..=self.n_max as i64 {
                worst = worst.max(weighted_tv(self.dist(a), self.dist(b)));
            }
        }
        worst
    }

    /// Max over `n` of the TV distance between times `n` and `−n`.
    pub fn max_reversal_tv(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 1..=self.n_max as i64 {
            worst = worst.max(weighted_tv(self.dist(n), self.dist(-n)));
        }
        worst
    }

    /// CSV rows `n,observable,bin,count` (weighted mass).
    pub fn to_csv(&self, observable: &str) -> String {
        let mut s = String::from("n,observable,bin,count\n");
        for n in -(self.n_max as i64)..=(self.n_max as i64) {
            for (bin, &c) in self.dist(n).iter().enumerate() {
                s.push_str(&format!("{n},{observable},{bin},{c}\n"));
            }
        }
        s
    }

    /// CSV of the pairwise TV matrix over times `0..=n_max`.
    pub fn tv_matrix_csv(&self) -> String {
        let mut s = String::from("n_a,n_b,tv\n");
        for a in 0..=self.n_max as i64 {
            for b in (a + 1)..=self.n_max as i64 {
                s.push_str(&format!("{a},{b},{}\n", weighted_tv(self.dist(a), self.dist(b))));
            }
        }
        s
    }
}

/// Estimate the probability that the embedded (non-delayed) chain, once it
/// leaves `vertex`, never revisits it. Trials that run `step_cap` steps or
/// reach a censor vertex without returning count as escapes; the censored
/// fraction is reported alongside.
pub fn escape_probability<R: Rng + ?Sized>(
    graph: &WalkGraph,
    vertex: u32,
    trials: usize,
    step_cap: usize,
    censor: Option<&[bool]>,
    rng: &mut R,
) -> (f64, f64) {
    let mut escapes = 0u64;
    let mut censored = 0u64;
    for _ in 0..trials {
        let mut cur = vertex;
        let mut returned = false;
        let mut hit_censor = false;
        for step in 0..step_cap {
            let deg = graph.degree(cur);
            if deg == 0 {
                break;
            }
            cur = graph.adj[cur as usize][rng.gen_range(0..deg)];
            if cur == vertex {
                returned = true;
                break;
            }
            if let Some(cs) = censor {
                if cs[cur as usize] {
                    hit_censor = true;
                    break;
                }
            }
            let _ = step;
        }
        if !returned {
            escapes += 1;
            if hit_censor {
                censored += 1;
            }
        }
    }
    (escapes as f64 / trials as f64, censored as f64 / trials as f64)
}

/// Ambient unit-ball walk: `X_0 = 0`, `X_n` uniform in `B(X_{n−1}, 1)`.
/// With a region radius, steps leaving `B(0, region)` are redrawn.
pub fn ambient_walk<R: Rng + ?Sized>(
    space: Space,
    steps: usize,
    region: Option<f64>,
    rng: &mut R,
) -> Result<Vec<Point>> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut cur = Point::ORIGIN;
    out.push(cur);
    for _ in 0..steps {
        let next = loop {
            let cand = space.sample_uniform_ball(&cur, 1.0, rng)?;
            match region {
                Some(r) if space.radial(&cand) > r => continue,
                _ => break cand,
            }
        };
        cur = next;
        out.push(cur);
    }
    Ok(out)
}

/// Long-run fraction of ambient-walk time spent in one component.
pub struct FrequencyEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub per_walk: Vec<f64>,
}

pub fn component_frequency<R: Rng + ?Sized>(
    scene: &Scene,
    phase: Phase,
    comp_id: u32,
    walks: usize,
    steps: usize,
    rng: &mut R,
) -> Result<FrequencyEstimate> {
    if walks == 0 || steps == 0 {
        return Err(Error::invalid_input("component frequency needs walks > 0 and steps > 0"));
    }
    let mut per_walk = Vec::with_capacity(walks);
    for _ in 0..walks {
        let path = ambient_walk(scene.space, steps, Some(scene.analysis_radius), rng)?;
        let mut inside = 0usize;
        for p in &path[1..] {
            if let Some(cell) = scene.raster.locate(p) {
                if scene.comp_label(cell, phase) == Some(comp_id) {
                    inside += 1;
                }
            }
        }
        per_walk.push(inside as f64 / steps as f64);
    }
    Ok(FrequencyEstimate { mean: stats::mean(&per_walk), stderr: stats::stderr(&per_walk), per_walk })
}
