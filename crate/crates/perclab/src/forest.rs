//! Branch points of components and the labeled forest over them.
//!
//! A point `y` of the auxiliary process is an `r`-branch point (trifurcation)
//! for phase `S` when `B(y,1) ⊂ S`, no other auxiliary point lies within
//! `2r` of `y`, and removing the local component `C_S(y,r)` splits `C_S(y)`
//! into at least three boundary-contacting pieces. Each trifurcation sends
//! one oriented edge per boundary-contacting branch to the branch's
//! intrinsically nearest trifurcation, with near-ties (within `2h`) broken
//! by the smaller atom label; the unoriented symmetrization is checked to be
//! acyclic and the build fails loudly if it is not.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::process::PointMeasure;
use crate::raster::PointIndex;
use crate::scene::{Phase, Scene, UnionFind};

/// One piece of `C_S(y) ∖ C_S(y,r)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchInfo {
    pub boundary_contact: bool,
    pub cell_count: u32,
    /// Filled by the forest build: the branch contains another trifurcation.
    pub has_trifurcation: bool,
}

#[derive(Debug, Clone)]
pub struct Trifurcation {
    pub point: Point,
    pub scale: f64,
    /// Index of the atom in the auxiliary measure.
    pub y_index: u32,
    pub label: f64,
    /// Component id (in `phase`) of the hosting component.
    pub comp_id: u32,
    pub anchor_cell: u32,
    /// Cells of the local component `C_S(y, r)`, sorted.
    pub local_cells: Vec<u32>,
    pub branches: Vec<BranchInfo>,
    /// cell -> branch index over `C_S(y) ∖ C_S(y,r)`, sorted by cell.
    branch_map: Vec<(u32, u16)>,
}

impl Trifurcation {
    pub fn branch_of(&self, cell: u32) -> Option<u16> {
        self.branch_map
            .binary_search_by_key(&cell, |&(c, _)| c)
            .ok()
            .map(|i| self.branch_map[i].1)
    }

    pub fn boundary_branch_count(&self) -> usize {
        self.branches.iter().filter(|b| b.boundary_contact).count()
    }
}

/// An unoriented forest edge; `branch_a` is the branch of `a` containing `b`
/// and vice versa.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestEdge {
    pub a: u32,
    pub b: u32,
    pub branch_a: Option<u16>,
    pub branch_b: Option<u16>,
    /// Derived 64-bit label (mix of the endpoint labels).
    pub label: u64,
}

#[derive(Debug, Clone)]
pub struct TrifForest {
    pub phase: Phase,
    pub scale: f64,
    pub vertices: Vec<Trifurcation>,
    pub edges: Vec<ForestEdge>,
    /// Oriented edges `(from, to, branch of from)`.
    pub oriented: Vec<(u32, u32, u16)>,
    pub adj: Vec<Vec<u32>>,
    /// Vertex has a trifurcation in every boundary-contacting branch.
    pub interior_complete: Vec<bool>,
}

impl TrifForest {
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    /// Text export: `y_id y'_id label branch_y branch_y'` per line.
    pub fn edges_text(&self) -> String {
        let mut s = String::new();
        for e in &self.edges {
            let fmt = |b: Option<u16>| b.map(|x| x as i32).unwrap_or(-1);
            let _ = writeln!(s, "{} {} {} {} {}", e.a, e.b, e.label, fmt(e.branch_a), fmt(e.branch_b));
        }
        s
    }
}

/// Decompose `C_S(y) ∖ C_S(y, r)` into connected pieces.
fn branch_decomposition(
    scene: &Scene,
    phase: Phase,
    comp_id: u32,
    local_cells: &[u32],
) -> (Vec<BranchInfo>, Vec<(u32, u16)>) {
    let comp_cells = scene.component_cells(phase, comp_id);
    let mut branch_map: HashMap<u32, u16> = HashMap::with_capacity(comp_cells.len());
    let mut branches = Vec::new();
    let mut nb = Vec::new();
    let in_local = |c: u32| local_cells.binary_search(&c).is_ok();
    for &start in comp_cells {
        if in_local(start) || branch_map.contains_key(&start) {
            continue;
        }
        let idx = branches.len() as u16;
        let mut count = 0u32;
        let mut boundary = false;
        let mut stack = vec![start];
        branch_map.insert(start, idx);
        while let Some(c) = stack.pop() {
            count += 1;
            let radial = scene.raster.cell_radial(c);
            if (radial - scene.analysis_radius).abs() <= scene.h * 0.5 + 1e-12 {
                boundary = true;
            }
            scene.raster.neighbors(c, &mut nb);
            for &x in &nb {
                if scene.comp_label(x, phase) == Some(comp_id)
                    && !in_local(x)
                    && !branch_map.contains_key(&x)
                {
                    branch_map.insert(x, idx);
                    stack.push(x);
                }
            }
        }
        branches.push(BranchInfo { boundary_contact: boundary, cell_count: count, has_trifurcation: false });
    }
    let mut flat: Vec<(u32, u16)> = branch_map.into_iter().collect();
    flat.sort_unstable_by_key(|&(c, _)| c);
    (branches, flat)
}

/// Detect the `r`-trifurcations of `phase` among the atoms of `aux`.
pub fn find_trifurcations(scene: &Scene, aux: &PointMeasure, r: f64, phase: Phase) -> Result<Vec<Trifurcation>> {
    if !(r > 0.0) {
        return Err(Error::invalid_input("trifurcation scale must be > 0"));
    }
    if aux.space != scene.space {
        return Err(Error::invalid_input("auxiliary process lives in a different space"));
    }
    let points: Vec<Point> = aux.atoms.iter().map(|a| a.point).collect();
    let index = PointIndex::build(scene.space, points, (2.0 * r).max(1.0));
    let mut out = Vec::new();
    let mut near = Vec::new();
    let mut ball_cells = Vec::new();
    for (yi, atom) in aux.atoms.iter().enumerate() {
        if scene.space.radial(&atom.point) > scene.analysis_radius {
            continue;
        }
        index.query(&atom.point, 2.0 * r, &mut near);
        if near.iter().any(|&j| j as usize != yi) {
            continue;
        }
        // B(y,1) ⊂ S on the raster: every cell with center in the ball
        scene.raster.cells_in_ball(&atom.point, 1.0, &mut ball_cells);
        if ball_cells.is_empty() || !ball_cells.iter().all(|&c| scene.cell_in_phase(c, phase)) {
            continue;
        }
        let Some(anchor) = scene.cell_for(&atom.point, phase) else {
            continue;
        };
        let Some(comp_id) = scene.comp_label(anchor, phase) else {
            continue;
        };
        let local_cells = scene.local_component(&atom.point, r, phase)?;
        let (branches, branch_map) = branch_decomposition(scene, phase, comp_id, &local_cells);
        if branches.iter().filter(|b| b.boundary_contact).count() >= 3 {
            out.push(Trifurcation {
                point: atom.point,
                scale: r,
                y_index: yi as u32,
                label: atom.label,
                comp_id,
                anchor_cell: anchor,
                local_cells,
                branches,
                branch_map,
            });
        }
    }
    Ok(out)
}

/// Pick the edge partner among `(distance, label, vertex)` candidates:
/// nearest wins; distances within `tie` of the minimum count as ties and
/// resolve by the smaller label.
fn select_nearest(candidates: &[(f64, f64, u32)], tie: f64) -> u32 {
    let d_min = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    candidates
        .iter()
        .filter(|c| c.0 <= d_min + tie)
        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.2.cmp(&y.2)))
        .expect("candidate list is non-empty")
        .2
}

/// Build the labeled forest over the trifurcations of one scene.
///
/// For every vertex and every boundary-contacting branch holding at least
/// one other trifurcation, one oriented edge goes to the branch's nearest
/// trifurcation (intrinsic set distance between local components; distances
/// within `2h` count as ties and resolve by the smaller label). A cycle in
/// the symmetrized edge set is an invariant violation.
pub fn build_forest(scene: &Scene, mut trifurcations: Vec<Trifurcation>, phase: Phase) -> Result<TrifForest> {
    let n = trifurcations.len();
    let scale = trifurcations.first().map_or(0.0, |t| t.scale);
    let mut by_comp: HashMap<u32, Vec<u32>> = HashMap::new();
    for (i, t) in trifurcations.iter().enumerate() {
        by_comp.entry(t.comp_id).or_default().push(i as u32);
    }
    let tie = 2.0 * scene.h;
    let mut oriented: Vec<(u32, u32, u16)> = Vec::new();
    for i in 0..n {
        let peers: Vec<u32> = by_comp[&trifurcations[i].comp_id]
            .iter()
            .copied()
            .filter(|&j| j as usize != i)
            .collect();
        if peers.is_empty() {
            continue;
        }
        let dist = scene.distances_from_set(phase, &trifurcations[i].local_cells, None);
        let mut best_per_branch: HashMap<u16, Vec<(f64, f64, u32)>> = HashMap::new();
        for &j in &peers {
            let t2 = &trifurcations[j as usize];
            let Some(branch) = trifurcations[i].branch_of(t2.anchor_cell) else {
                continue;
            };
            let d = t2
                .local_cells
                .iter()
                .map(|&c| dist[c as usize])
                .fold(f64::INFINITY, f64::min);
            if d.is_finite() {
                best_per_branch.entry(branch).or_default().push((d, t2.label, j));
            }
        }
        let mut touched: Vec<u16> = best_per_branch.keys().copied().collect();
        touched.sort_unstable();
        for b in touched {
            if !trifurcations[i].branches[b as usize].boundary_contact {
                continue;
            }
            let winner = select_nearest(&best_per_branch[&b], tie);
            oriented.push((i as u32, winner, b));
        }
        // record which branches (bc or not) hold trifurcations
        for &b in best_per_branch.keys() {
            trifurcations[i].branches[b as usize].has_trifurcation = true;
        }
    }

    // symmetrize
    let mut edge_map: HashMap<(u32, u32), ForestEdge> = HashMap::new();
    for &(a, b, branch_a) in &oriented {
        let key = (a.min(b), a.max(b));
        let e = edge_map.entry(key).or_insert_with(|| ForestEdge {
            a: key.0,
            b: key.1,
            branch_a: None,
            branch_b: None,
            label: crate::msf::derive_edge_label(
                trifurcations[key.0 as usize].label,
                trifurcations[key.1 as usize].label,
            ),
        });
        if a == key.0 {
            e.branch_a = Some(branch_a);
        } else {
            e.branch_b = Some(branch_a);
        }
    }
    // fill the missing side from the partner's decomposition
    let mut edges: Vec<ForestEdge> = edge_map.into_values().collect();
    edges.sort_unstable_by_key(|e| (e.a, e.b));
    for e in &mut edges {
        if e.branch_a.is_none() {
            e.branch_a = trifurcations[e.a as usize].branch_of(trifurcations[e.b as usize].anchor_cell);
        }
        if e.branch_b.is_none() {
            e.branch_b = trifurcations[e.b as usize].branch_of(trifurcations[e.a as usize].anchor_cell);
        }
    }

    // acyclicity (cycle-check oracle: union-find during insertion)
    let mut uf = UnionFind::new(n);
    for e in &edges {
        if !uf.union(e.a as usize, e.b as usize) {
            return Err(Error::invariant(format!(
                "forest edge ({},{}) closes a cycle; distance computation inconsistent",
                e.a, e.b
            )));
        }
    }

    let mut adj = vec![Vec::new(); n];
    for e in &edges {
        adj[e.a as usize].push(e.b);
        adj[e.b as usize].push(e.a);
    }
    for l in &mut adj {
        l.sort_unstable();
    }
    let interior_complete: Vec<bool> = trifurcations
        .iter()
        .map(|t| {
            t.branches
                .iter()
                .filter(|b| b.boundary_contact)
                .all(|b| b.has_trifurcation)
        })
        .collect();

    Ok(TrifForest { phase, scale, vertices: trifurcations, edges, oriented, adj, interior_complete })
}

/// Mass-transport bookkeeping of the oriented edge set: per-seed out-mass
/// (edges with tail in `B(0, rho)`) and in-mass (head in `B(0, rho)`).
pub fn edge_transport(forest: &TrifForest, space: crate::geometry::Space, rho: f64) -> (u32, u32) {
    let mut out_mass = 0;
    let mut in_mass = 0;
    for &(a, b, _) in &forest.oriented {
        if space.radial(&forest.vertices[a as usize].point) <= rho {
            out_mass += 1;
        }
        if space.radial(&forest.vertices[b as usize].point) <= rho {
            in_mass += 1;
        }
    }
    (out_mass, in_mass)
}
