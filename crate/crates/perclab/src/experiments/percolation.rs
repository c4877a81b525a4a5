//! Independent Poisson-Boolean percolation inside a component.
//!
//! Given a marked Poisson measure `η` (sampled at some intensity
//! `lambda_max`), the level-λ vertex set consists of the η-atoms with label
//! at most `λ/lambda_max` that fall inside the component; vertices are
//! joined when their intrinsic (within-phase) distance is at most 2. The
//! level sets nest, so the percolation indicator is monotone in λ per seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::PointMeasure;
use crate::scene::{Phase, Scene, UnionFind};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentPercolation {
    pub lambdas: Vec<f64>,
    pub percolates: Vec<bool>,
    /// Smallest grid λ with a rim-touching cluster, when any.
    pub lambda_star: Option<f64>,
    pub n_vertices_max: usize,
    pub n_edges_max: usize,
}

/// Scan an increasing λ grid on one boundary-contacting component.
pub fn percolation_on_component(
    scene: &Scene,
    phase: Phase,
    comp_id: u32,
    lambda_grid: &[f64],
    eta: &PointMeasure,
) -> Result<ComponentPercolation> {
    let info = &scene.components(phase)[comp_id as usize];
    if !info.boundary_contact {
        return Err(Error::invalid_input("component is not boundary-contacting; nothing to percolate to"));
    }
    if lambda_grid.windows(2).any(|w| w[0] >= w[1]) || lambda_grid.is_empty() {
        return Err(Error::invalid_input("lambda grid must be strictly increasing and non-empty"));
    }
    let lambda_max = eta
        .lambda
        .ok_or_else(|| Error::invalid_input("eta measure must carry its sampling intensity"))?;
    if *lambda_grid.last().unwrap() > lambda_max + 1e-12 {
        return Err(Error::invalid_input("lambda grid exceeds the eta sampling intensity"));
    }

    // vertices at the top level: eta atoms inside the component
    struct Vertex {
        atom: u32,
        cell: u32,
        level: f64, // label * lambda_max: the λ at which the vertex appears
        rim: bool,
        deep: bool,
    }
    let mut vertices: Vec<Vertex> = Vec::new();
    for (i, atom) in eta.atoms.iter().enumerate() {
        if scene.space.radial(&atom.point) > scene.analysis_radius {
            continue;
        }
        if !scene.point_in_phase(&atom.point, phase) {
            continue;
        }
        let Some(cell) = scene.cell_for(&atom.point, phase) else {
            continue;
        };
        if scene.comp_label(cell, phase) != Some(comp_id) {
            continue;
        }
        let radial = scene.raster.cell_radial(cell);
        let rim = (radial - scene.analysis_radius).abs() <= scene.h * 0.5 + 1e-12;
        let deep = radial <= scene.analysis_radius / 2.0;
        vertices.push(Vertex { atom: i as u32, cell, level: atom.label * lambda_max, rim, deep });
    }

    // edges at the top level: ambient prefilter at distance 2, then the
    // intrinsic distance through the phase
    let mut cell_of_vertex: std::collections::HashMap<u32, Vec<usize>> = std::collections::HashMap::new();
    for (vi, v) in vertices.iter().enumerate() {
        cell_of_vertex.entry(v.cell).or_default().push(vi);
    }
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for (vi, v) in vertices.iter().enumerate() {
        let p = &eta.atoms[v.atom as usize].point;
        let reach = scene.distances_from_set_sparse(phase, &[v.cell], 2.0 + scene.h);
        for (vj, w) in vertices.iter().enumerate().skip(vi + 1) {
            let q = &eta.atoms[w.atom as usize].point;
            if scene.space.distance(p, q) > 2.0 {
                continue;
            }
            if let Some(&d) = reach.get(&w.cell) {
                if d <= 2.0 {
                    edges.push((vi as u32, vj as u32));
                }
            }
        }
    }

    let mut percolates = Vec::with_capacity(lambda_grid.len());
    let mut lambda_star = None;
    for &lambda in lambda_grid {
        let active: Vec<bool> = vertices.iter().map(|v| v.level <= lambda).collect();
        let mut uf = UnionFind::new(vertices.len());
        for &(a, b) in &edges {
            if active[a as usize] && active[b as usize] {
                uf.union(a as usize, b as usize);
            }
        }
        // a cluster stands in for an unbounded one when it spans: it holds a
        // vertex on the component's rim cells and one deep inside
        // B(0, L_a/2). A lone rim atom is not percolation.
        let mut root_rim = std::collections::HashSet::new();
        let mut root_deep = std::collections::HashSet::new();
        for (vi, v) in vertices.iter().enumerate() {
            if !active[vi] {
                continue;
            }
            let root = uf.find(vi);
            if v.rim {
                root_rim.insert(root);
            }
            if v.deep {
                root_deep.insert(root);
            }
        }
        let ok = root_rim.iter().any(|r| root_deep.contains(r));
        if ok && lambda_star.is_none() {
            lambda_star = Some(lambda);
        }
        percolates.push(ok);
    }
    // nesting makes the indicator monotone; verify as a postcondition
    for w in percolates.windows(2) {
        if w[0] && !w[1] {
            return Err(Error::invariant("percolation indicator must be monotone in lambda"));
        }
    }
    Ok(ComponentPercolation {
        lambdas: lambda_grid.to_vec(),
        percolates,
        lambda_star,
        n_vertices_max: vertices.len(),
        n_edges_max: edges.len(),
    })
}
