//! Minimal spanning forests of labeled graphs.
//!
//! Edges carry distinct 64-bit labels; the minimal spanning forest keeps,
//! per connected component, the spanning tree that survives the cycle rule
//! (drop the maximal-label edge of every cycle), which on finite graphs is
//! the minimum-label spanning tree computed by Kruskal's algorithm.

use crate::error::{Error, Result};
use crate::scene::UnionFind;

/// An unoriented edge with its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledEdge {
    pub a: u32,
    pub b: u32,
    pub label: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derive an edge label from the two endpoint labels through a fixed 64-bit
/// mix; symmetric in the endpoints.
pub fn derive_edge_label(label_a: f64, label_b: f64) -> u64 {
    let (lo, hi) = {
        let a = label_a.to_bits();
        let b = label_b.to_bits();
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    };
    splitmix64(lo ^ splitmix64(hi))
}

/// Indices (into `edges`) of the minimal-spanning-forest edges.
pub fn minimal_spanning_forest(n_vertices: usize, edges: &[LabeledEdge]) -> Result<Vec<usize>> {
    let mut seen = std::collections::HashSet::with_capacity(edges.len());
    for e in edges {
        if e.a as usize >= n_vertices || e.b as usize >= n_vertices || e.a == e.b {
            return Err(Error::invalid_input(format!("bad edge {e:?} for {n_vertices} vertices")));
        }
        if !seen.insert(e.label) {
            return Err(Error::invalid_input(format!("duplicate edge label {}", e.label)));
        }
    }
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&i| edges[i].label);
    let mut uf = UnionFind::new(n_vertices);
    let mut kept = Vec::new();
    for i in order {
        if uf.union(edges[i].a as usize, edges[i].b as usize) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    Ok(kept)
}
