//! Backbones of trees and the explicit unit flows that certify transience.
//!
//! The backbone of a tree relative to an attachment set (boundary-contacting
//! vertices standing in for infinite ends) is the union of the simple paths
//! between attachments. A unit flow from a root `y` pushes mass 1 out of `y`,
//! splitting uniformly over the `D_z − 1` outgoing edges at every interior
//! vertex; its energy decomposes into the part carried by branch vertices
//! (degree ≥ 3) and the part carried by degree-2 vertices. Attachment leaves
//! are flow sinks (the mass continues into the unrealized exterior), so the
//! evaluated vertex set is the root plus all vertices of degree ≥ 2.

use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};

/// An undirected tree/forest on vertices `0..n` as adjacency lists.
#[derive(Debug, Clone)]
pub struct TreeGraph {
    pub adj: Vec<Vec<u32>>,
}

impl TreeGraph {
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<TreeGraph> {
        let mut adj = vec![Vec::new(); n];
        let mut uf = crate::scene::UnionFind::new(n);
        for &(a, b) in edges {
            if a as usize >= n || b as usize >= n || a == b {
                return Err(Error::invalid_input(format!("bad tree edge ({a},{b})")));
            }
            if !uf.union(a as usize, b as usize) {
                return Err(Error::invalid_input(format!("edge ({a},{b}) closes a cycle")));
            }
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        Ok(TreeGraph { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }
}

/// The backbone: vertices on simple paths between attachment pairs, with the
/// induced edges. Empty when fewer than two attachments exist in a tree.
#[derive(Debug, Clone)]
pub struct Backbone {
    /// Original vertex ids, sorted.
    pub vertices: Vec<u32>,
    /// Adjacency in backbone-local indices.
    pub adj: Vec<Vec<u32>>,
    /// Backbone-local indices of attachment vertices.
    pub attachments: Vec<u32>,
}

impl Backbone {
    pub fn local_of(&self, original: u32) -> Option<u32> {
        self.vertices.binary_search(&original).ok().map(|i| i as u32)
    }

    pub fn degree(&self, local: u32) -> usize {
        self.adj[local as usize].len()
    }

    /// Branch vertices: degree ≥ 3 in the backbone.
    pub fn trifurcations(&self) -> Vec<u32> {
        (0..self.adj.len() as u32).filter(|&v| self.degree(v) >= 3).collect()
    }
}

/// Compute the backbone of a forest with respect to `attachment_set`:
/// iteratively prune non-attachment leaves, keeping exactly the union of
/// attachment-to-attachment paths (per tree; trees with fewer than two
/// attachments vanish).
pub fn backbone(tree: &TreeGraph, attachment_set: &[u32]) -> Backbone {
    let n = tree.n();
    let attach: HashSet<u32> = attachment_set.iter().copied().collect();
    let mut deg: Vec<usize> = (0..n).map(|v| tree.adj[v].len()).collect();
    let mut removed = vec![false; n];
    let mut queue: VecDeque<u32> = (0..n as u32)
        .filter(|&v| deg[v as usize] <= 1 && !attach.contains(&v))
        .collect();
    while let Some(v) = queue.pop_front() {
        if removed[v as usize] {
            continue;
        }
        removed[v as usize] = true;
        for &w in &tree.adj[v as usize] {
            if removed[w as usize] {
                continue;
            }
            deg[w as usize] -= 1;
            if deg[w as usize] <= 1 && !attach.contains(&w) {
                queue.push_back(w);
            }
        }
    }
    // isolated attachments (no surviving neighbor) are not on any pair path
    let mut keep: Vec<u32> = (0..n as u32).filter(|&v| !removed[v as usize]).collect();
    keep.retain(|&v| {
        tree.adj[v as usize].iter().any(|&w| !removed[w as usize]) || {
            // a lone attachment pair could be a single edge; degree check above
            // already covers it, so an isolated vertex is dropped
            false
        }
    });
    keep.sort_unstable();
    let local: std::collections::HashMap<u32, u32> =
        keep.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
    let mut adj = vec![Vec::new(); keep.len()];
    for (i, &v) in keep.iter().enumerate() {
        for &w in &tree.adj[v as usize] {
            if let Some(&j) = local.get(&w) {
                adj[i].push(j);
            }
        }
    }
    let attachments: Vec<u32> = attachment_set.iter().filter_map(|v| local.get(v).copied()).collect();
    Backbone { vertices: keep, adj, attachments }
}

/// A unit flow from `root` on a backbone, with its energy decomposition.
#[derive(Debug, Clone)]
pub struct FlowAssignment {
    pub root: u32,
    /// Flow value per backbone-local vertex (0 outside the root's tree).
    pub theta: Vec<f64>,
    /// Worst |inflow − outflow| over interior non-root vertices.
    pub kirchhoff_residual: f64,
    pub energy: f64,
    /// Energy over branch vertices (degree ≥ 3, root included).
    pub e1: f64,
    /// Energy over degree-2 vertices.
    pub e2: f64,
}

/// Compute the unit flow from `root` (a backbone-local index):
/// `θ(root) = 1`, each child of the root receives `1/D_root`, and every
/// other interior vertex splits its inflow uniformly over its `D − 1`
/// outgoing edges. Attachment leaves absorb their inflow.
pub fn unit_flow(backbone: &Backbone, root: u32) -> Result<FlowAssignment> {
    let n = backbone.adj.len();
    if root as usize >= n {
        return Err(Error::invalid_input("flow root is not a backbone vertex"));
    }
    let mut theta = vec![0.0; n];
    theta[root as usize] = 1.0;
    let mut parent = vec![u32::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    queue.push_back(root);
    let mut seen = vec![false; n];
    seen[root as usize] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        let deg = backbone.degree(v);
        let out_edges = if v == root { deg } else { deg - 1 };
        let share = if out_edges > 0 { theta[v as usize] / out_edges as f64 } else { 0.0 };
        for &w in &backbone.adj[v as usize] {
            if w == parent[v as usize] {
                continue;
            }
            if seen[w as usize] {
                return Err(Error::invariant("backbone contains a cycle"));
            }
            seen[w as usize] = true;
            parent[w as usize] = v;
            theta[w as usize] = share;
            queue.push_back(w);
        }
    }
    let mut kirchhoff_residual: f64 = 0.0;
    let mut e1 = KahanSum::default();
    let mut e2 = KahanSum::default();
    for &v in &order {
        let deg = backbone.degree(v);
        if v != root && deg >= 2 {
            let outflow: f64 = backbone.adj[v as usize]
                .iter()
                .filter(|&&w| w != parent[v as usize])
                .map(|&w| theta[w as usize])
                .sum();
            kirchhoff_residual = kirchhoff_residual.max((outflow - theta[v as usize]).abs());
        }
        let t2 = theta[v as usize] * theta[v as usize];
        if v == root || deg >= 3 {
            e1.add(t2);
        } else if deg == 2 {
            e2.add(t2);
        }
        // degree-1 attachments are sinks: excluded from the evaluated set
    }
    let (e1, e2) = (e1.value(), e2.value());
    Ok(FlowAssignment { root, theta, kirchhoff_residual, energy: e1 + e2, e1, e2 })
}

/// Text export of flows: one `root_id vertex_id theta` line per nonzero
/// flow value, in original vertex ids.
pub fn flows_text(backbone: &Backbone, flows: &[FlowAssignment]) -> String {
    let mut s = String::new();
    for f in flows {
        let root = backbone.vertices[f.root as usize];
        for (local, &theta) in f.theta.iter().enumerate() {
            if theta > 0.0 {
                let _ = std::fmt::Write::write_fmt(
                    &mut s,
                    format_args!("{root} {} {theta}\n", backbone.vertices[local]),
                );
            }
        }
    }
    s
}

/// Max over degree-2 vertices `x` of `Σ_roots θ_root(x)²`, given flows for
/// every branch-vertex root. Bounded by 1: truncation only removes
/// nonnegative terms from the infinite-forest bound.
pub fn incoming_mass(backbone: &Backbone, flows: &[FlowAssignment]) -> f64 {
    let mut best: f64 = 0.0;
    for v in 0..backbone.adj.len() {
        if backbone.degree(v as u32) != 2 {
            continue;
        }
        let total: f64 = flows.iter().map(|f| f.theta[v] * f.theta[v]).sum();
        best = best.max(total);
    }
    best
}

/// Kahan-compensated accumulator; the energy sums run over millions of tiny
/// terms and must match closed forms to near machine precision.
#[derive(Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Synthetic rooted tree where every interior vertex has the given degree;
/// leaves sit at `depth` edges from the root. Returns (tree, leaves).
pub fn synthetic_regular_tree(degree: usize, depth: usize) -> (TreeGraph, Vec<u32>) {
    assert!(degree >= 2 && depth >= 1);
    let mut adj: Vec<Vec<u32>> = vec![Vec::new()];
    let mut frontier = vec![0u32];
    let mut leaves = Vec::new();
    for level in 1..=depth {
        let mut next = Vec::new();
        for &v in &frontier {
            let children = if v == 0 { degree } else { degree - 1 };
            for _ in 0..children {
                let id = adj.len() as u32;
                adj.push(Vec::new());
                adj[v as usize].push(id);
                adj[id as usize].push(v);
                if level == depth {
                    leaves.push(id);
                } else {
                    next.push(id);
                }
            }
        }
        frontier = next;
    }
    (TreeGraph { adj }, leaves)
}
