//! A realized Boolean model in a geodesic window.
//!
//! Atoms live in the sampled ball `B(0, L)`; the raster extends to
//! `L + max_radius` so every sampled ball is fully covered. Occupied cells
//! are exact for the realized measure everywhere. Vacant phase is only
//! trusted where sampling is complete, i.e. on cells with radial coordinate
//! at most `L − max_radius`; beyond that the unsampled exterior would bias
//! vacancy, so those cells are outside the vacant domain.
//!
//! "Unbounded" has no finite-window meaning; a component is flagged as
//! boundary-contacting when it meets the sphere of radius `L_a` (the
//! analysis radius). The halo `L − L_a` shields the analysis region.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Space};
use crate::process::PointMeasure;
use crate::raster::{PointIndex, Raster};

pub const NO_LABEL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Occupied,
    Vacant,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Occupied => "occupied",
            Phase::Vacant => "vacant",
        }
    }
}

/// Per-component bookkeeping produced by the labeling pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub id: u32,
    pub cell_count: u32,
    /// Meets the sphere of radius `L_a` (the finite "unbounded" proxy).
    pub boundary_contact: bool,
    /// Smallest radial coordinate of a member cell.
    pub min_radial: f64,
}

/// A reference to one component of one phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentRef {
    pub phase: Phase,
    pub id: u32,
    pub boundary_contact: bool,
    pub cell_count: u32,
    /// Atom indices whose balls belong to the component (occupied phase only).
    pub balls: Vec<u32>,
}

struct PhaseLabels {
    label: Vec<u32>,
    comps: Vec<ComponentInfo>,
    // CSR layout of cells per component
    offsets: Vec<u32>,
    cells: Vec<u32>,
}

pub struct Scene {
    pub space: Space,
    /// Radius of the sampled window (atoms live in `B(0, window_radius)`).
    pub window_radius: f64,
    /// Radius of the analysis region.
    pub analysis_radius: f64,
    pub h: f64,
    /// Largest radius the driving law can produce.
    pub max_radius: f64,
    pub measure: PointMeasure,
    pub raster: Raster,
    pub atom_index: PointIndex,
    occupied: Vec<bool>,
    covering_atom: Vec<u32>,
    occ: PhaseLabels,
    vac: PhaseLabels,
    /// Ball-graph component id per atom.
    pub ball_comp: Vec<u32>,
    pub n_ball_comps: u32,
    vacant_limit: f64,
}

fn is_rim(radial: f64, analysis_radius: f64, h: f64) -> bool {
    (radial - analysis_radius).abs() <= h * 0.5 + 1e-12
}

impl Scene {
    /// Build a scene from a sampled measure. `analysis_radius` must leave a
    /// halo of at least `max_radius` inside the sampled window, and the
    /// resolution must resolve the thinnest ball (`h <= min_radius/4`).
    pub fn build(measure: PointMeasure, analysis_radius: f64, h: f64, max_radius: f64) -> Result<Scene> {
        let space = measure.space;
        let window_radius = measure.sample_radius;
        let min_radius = measure.atoms.iter().map(|a| a.radius).fold(f64::INFINITY, f64::min);
        if min_radius.is_finite() && h > min_radius / 4.0 + 1e-12 {
            return Err(Error::invalid_config(format!(
                "resolution h={h} too coarse for thinnest ball radius {min_radius} (need h <= r/4)"
            )));
        }
        if !(analysis_radius > 0.0) || analysis_radius + max_radius > window_radius + 1e-9 {
            return Err(Error::invalid_config(format!(
                "analysis radius {analysis_radius} + max radius {max_radius} must fit in window {window_radius}"
            )));
        }
        let raster_radius = window_radius + max_radius;
        let raster = Raster::build(space, h, raster_radius)?;
        let n_cells = raster.n_cells() as usize;
        if n_cells > 80_000_000 {
            return Err(Error::invalid_config(format!("raster would need {n_cells} cells; shrink the window or coarsen h")));
        }

        let mut occupied = vec![false; n_cells];
        let mut covering_atom = vec![NO_LABEL; n_cells];
        let mut buf = Vec::new();
        for (i, atom) in measure.atoms.iter().enumerate() {
            raster.cells_in_ball(&atom.point, atom.radius, &mut buf);
            for &c in &buf {
                occupied[c as usize] = true;
                if covering_atom[c as usize] == NO_LABEL {
                    covering_atom[c as usize] = i as u32;
                }
            }
        }

        let points: Vec<Point> = measure.atoms.iter().map(|a| a.point).collect();
        let atom_index = PointIndex::build(space, points, (2.0 * max_radius).max(1.0));

        // ball graph components: union-find over atoms, candidate pairs from
        // the spatial index, deterministic merge order.
        let n_atoms = measure.atoms.len();
        let mut uf = UnionFind::new(n_atoms);
        let mut cand = Vec::new();
        for i in 0..n_atoms {
            let a = &measure.atoms[i];
            atom_index.query(&a.point, a.radius + max_radius, &mut cand);
            cand.sort_unstable();
            for &j in &cand {
                let j = j as usize;
                if j <= i {
                    continue;
                }
                let b = &measure.atoms[j];
                if space.within(&a.point, &b.point, a.radius + b.radius) {
                    uf.union(i, j);
                }
            }
        }
        let (ball_comp, n_ball_comps) = uf.compress_labels();

        let vacant_limit = window_radius - max_radius;
        let mut scene = Scene {
            space,
            window_radius,
            analysis_radius,
            h,
            max_radius,
            measure,
            raster,
            atom_index,
            occupied,
            covering_atom,
            occ: PhaseLabels { label: Vec::new(), comps: Vec::new(), offsets: Vec::new(), cells: Vec::new() },
            vac: PhaseLabels { label: Vec::new(), comps: Vec::new(), offsets: Vec::new(), cells: Vec::new() },
            ball_comp,
            n_ball_comps,
            vacant_limit,
        };
        scene.occ = scene.label_phase(Phase::Occupied);
        scene.vac = scene.label_phase(Phase::Vacant);
        Ok(scene)
    }

    /// True when the cell belongs to the phase's raster domain.
    pub fn cell_in_phase(&self, cell: u32, phase: Phase) -> bool {
        match phase {
            Phase::Occupied => self.occupied[cell as usize],
            Phase::Vacant => {
                !self.occupied[cell as usize] && self.raster.cell_radial(cell) <= self.vacant_limit + 1e-12
            }
        }
    }

    pub fn cell_occupied(&self, cell: u32) -> bool {
        self.occupied[cell as usize]
    }

    /// Exact phase membership of a point (independent of the raster).
    pub fn point_in_phase(&self, p: &Point, phase: Phase) -> bool {
        let mut hits = Vec::new();
        self.atom_index.query(p, self.max_radius, &mut hits);
        let covered = hits
            .iter()
            .any(|&i| self.space.within(&self.measure.atoms[i as usize].point, p, self.measure.atoms[i as usize].radius));
        match phase {
            Phase::Occupied => covered,
            Phase::Vacant => !covered && self.space.radial(p) <= self.vacant_limit + 1e-12,
        }
    }

    fn label_phase(&self, phase: Phase) -> PhaseLabels {
        let n = self.raster.n_cells();
        let mut label = vec![NO_LABEL; n as usize];
        let mut comps = Vec::new();
        let mut stack = Vec::new();
        let mut nb = Vec::new();
        let mut comp_cells: Vec<Vec<u32>> = Vec::new();
        for start in 0..n {
            if label[start as usize] != NO_LABEL || !self.cell_in_phase(start, phase) {
                continue;
            }
            let id = comps.len() as u32;
            let mut count = 0u32;
            let mut boundary = false;
            let mut min_radial = f64::INFINITY;
            let mut cells = Vec::new();
            label[start as usize] = id;
            stack.push(start);
            while let Some(c) = stack.pop() {
                count += 1;
                cells.push(c);
                let r = self.raster.cell_radial(c);
                min_radial = min_radial.min(r);
                if is_rim(r, self.analysis_radius, self.h) {
                    boundary = true;
                }
                self.raster.neighbors(c, &mut nb);
                for &x in &nb {
                    if label[x as usize] == NO_LABEL && self.cell_in_phase(x, phase) {
                        label[x as usize] = id;
                        stack.push(x);
                    }
                }
            }
            comps.push(ComponentInfo { id, cell_count: count, boundary_contact: boundary, min_radial });
            comp_cells.push(cells);
        }
        let mut offsets = Vec::with_capacity(comps.len() + 1);
        let mut cells = Vec::new();
        let mut total = 0u32;
        for mut list in comp_cells {
            offsets.push(total);
            total += list.len() as u32;
            list.sort_unstable();
            cells.extend(list);
        }
        offsets.push(total);
        PhaseLabels { label, comps, offsets, cells }
    }

    fn labels(&self, phase: Phase) -> &PhaseLabels {
        match phase {
            Phase::Occupied => &self.occ,
            Phase::Vacant => &self.vac,
        }
    }

    pub fn comp_label(&self, cell: u32, phase: Phase) -> Option<u32> {
        let l = self.labels(phase).label[cell as usize];
        (l != NO_LABEL).then_some(l)
    }

    pub fn components(&self, phase: Phase) -> &[ComponentInfo] {
        &self.labels(phase).comps
    }

    pub fn component_cells(&self, phase: Phase, id: u32) -> &[u32] {
        let l = self.labels(phase);
        &l.cells[l.offsets[id as usize] as usize..l.offsets[id as usize + 1] as usize]
    }

    /// Components with at least one cell inside the analysis region.
    pub fn components_in_analysis(&self, phase: Phase) -> Vec<&ComponentInfo> {
        self.labels(phase)
            .comps
            .iter()
            .filter(|c| c.min_radial < self.analysis_radius)
            .collect()
    }

    /// Atom list of an occupied component.
    pub fn component_balls(&self, id: u32) -> Vec<u32> {
        let mut out = Vec::new();
        for (i, atom) in self.measure.atoms.iter().enumerate() {
            if let Some(cell) = self.raster.locate(&atom.point) {
                if self.occ.label[cell as usize] == id {
                    out.push(i as u32);
                }
            }
        }
        out
    }

    /// The component containing `x`, or `None` when `x` is not in the phase.
    pub fn component_of(&self, x: &Point, phase: Phase) -> Option<ComponentRef> {
        if !self.point_in_phase(x, phase) {
            return None;
        }
        let cell = self.cell_for(x, phase)?;
        let id = self.comp_label(cell, phase)?;
        Some(self.component_ref(phase, id))
    }

    pub fn component_ref(&self, phase: Phase, id: u32) -> ComponentRef {
        let info = &self.labels(phase).comps[id as usize];
        ComponentRef {
            phase,
            id,
            boundary_contact: info.boundary_contact,
            cell_count: info.cell_count,
            balls: if phase == Phase::Occupied { self.component_balls(id) } else { Vec::new() },
        }
    }

    /// Raster cell representing `x` in the given phase: its own cell when the
    /// phases agree, otherwise the nearest in-phase cell within 2h (raster
    /// classification is by cell center and can disagree near ball edges).
    pub fn cell_for(&self, x: &Point, phase: Phase) -> Option<u32> {
        let cell = self.raster.locate(x)?;
        if self.cell_in_phase(cell, phase) {
            return Some(cell);
        }
        let mut near = Vec::new();
        self.raster.cells_in_ball(x, 2.0 * self.h, &mut near);
        near.retain(|&c| self.cell_in_phase(c, phase));
        near.into_iter()
            .min_by(|&a, &b| {
                self.space
                    .distance(&self.raster.center(a), x)
                    .total_cmp(&self.space.distance(&self.raster.center(b), x))
            })
    }

    /// Cells of `C_S(x, r)`: flood fill from `x` restricted to `B(x, r)`.
    pub fn local_component(&self, x: &Point, r: f64, phase: Phase) -> Result<Vec<u32>> {
        if self.space.radial(x) + r > self.raster.radius() + 1e-9 {
            return Err(Error::invalid_input("local component ball must fit inside the window"));
        }
        let Some(start) = self.cell_for(x, phase) else {
            return Ok(Vec::new());
        };
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        let mut stack = vec![start];
        seen.insert(start);
        let mut nb = Vec::new();
        while let Some(c) = stack.pop() {
            out.push(c);
            self.raster.neighbors(c, &mut nb);
            for &nxt in &nb {
                if !seen.contains(&nxt)
                    && self.cell_in_phase(nxt, phase)
                    && self.space.distance(&self.raster.center(nxt), x) <= r
                {
                    seen.insert(nxt);
                    stack.push(nxt);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Number of distinct raster components of `phase ∩ B(center, rho)`.
    ///
    /// The flood fill runs over cells within `rho + h` and counts the
    /// components holding a cell within `rho`: phase slivers thinner than a
    /// cell would otherwise shatter into spurious arcs along the ball
    /// boundary, and the one-cell band reconnects exactly those (the band
    /// vanishes as h → 0).
    pub fn count_components_in_ball(&self, center: &Point, rho: f64, phase: Phase) -> Result<u32> {
        if self.space.radial(center) + rho > self.analysis_radius + 1e-9 {
            return Err(Error::invalid_input("counting ball must sit inside the analysis region"));
        }
        let mut cells = Vec::new();
        self.raster.cells_in_ball(center, rho + self.h, &mut cells);
        cells.retain(|&c| self.cell_in_phase(c, phase));
        let index: std::collections::HashMap<u32, usize> =
            cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut uf = UnionFind::new(cells.len());
        let mut nb = Vec::new();
        for (i, &c) in cells.iter().enumerate() {
            self.raster.neighbors(c, &mut nb);
            for &x in &nb {
                if let Some(&j) = index.get(&x) {
                    uf.union(i, j);
                }
            }
        }
        let mut roots = std::collections::HashSet::new();
        for (i, &c) in cells.iter().enumerate() {
            if self.space.within(&self.raster.center(c), center, rho) {
                roots.insert(uf.find(i));
            }
        }
        Ok(roots.len() as u32)
    }

    /// Dijkstra from a source set over same-phase cells (diagonal steps allowed
    /// with the no-corner-cutting rule). Returns distances for all reached
    /// cells; unreached cells hold `f64::INFINITY`.
    pub fn distances_from_set(&self, phase: Phase, sources: &[u32], cutoff: Option<f64>) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.raster.n_cells() as usize];
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::new();
        for &s in sources {
            if self.cell_in_phase(s, phase) {
                dist[s as usize] = 0.0;
                heap.push(HeapItem { d: 0.0, cell: s });
            }
        }
        let mut nb = Vec::new();
        while let Some(HeapItem { d, cell }) = heap.pop() {
            if d > dist[cell as usize] {
                continue;
            }
            if let Some(cut) = cutoff {
                if d > cut {
                    continue;
                }
            }
            let c0 = self.raster.center(cell);
            self.raster.neighbors_diag(cell, &mut nb);
            for &(nxt, corners) in &nb {
                if !self.cell_in_phase(nxt, phase) {
                    continue;
                }
                if let Some((c1, c2)) = corners {
                    if !self.cell_in_phase(c1, phase) && !self.cell_in_phase(c2, phase) {
                        continue;
                    }
                }
                let w = self.space.distance(&c0, &self.raster.center(nxt));
                let nd = d + w;
                if nd < dist[nxt as usize] {
                    dist[nxt as usize] = nd;
                    heap.push(HeapItem { d: nd, cell: nxt });
                }
            }
        }
        dist
    }

    /// Sparse variant of [`Scene::distances_from_set`]: only visited cells
    /// are returned; intended for small cutoffs.
    pub fn distances_from_set_sparse(
        &self,
        phase: Phase,
        sources: &[u32],
        cutoff: f64,
    ) -> std::collections::HashMap<u32, f64> {
        let mut dist: std::collections::HashMap<u32, f64> = std::collections::HashMap::new();
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::new();
        for &s in sources {
            if self.cell_in_phase(s, phase) {
                dist.insert(s, 0.0);
                heap.push(HeapItem { d: 0.0, cell: s });
            }
        }
        let mut nb = Vec::new();
        while let Some(HeapItem { d, cell }) = heap.pop() {
            if d > *dist.get(&cell).unwrap_or(&f64::INFINITY) {
                continue;
            }
            if d > cutoff {
                continue;
            }
            let c0 = self.raster.center(cell);
            self.raster.neighbors_diag(cell, &mut nb);
            for &(nxt, corners) in &nb {
                if !self.cell_in_phase(nxt, phase) {
                    continue;
                }
                if let Some((c1, c2)) = corners {
                    if !self.cell_in_phase(c1, phase) && !self.cell_in_phase(c2, phase) {
                        continue;
                    }
                }
                let nd = d + self.space.distance(&c0, &self.raster.center(nxt));
                if nd <= cutoff && nd < *dist.get(&nxt).unwrap_or(&f64::INFINITY) {
                    dist.insert(nxt, nd);
                    heap.push(HeapItem { d: nd, cell: nxt });
                }
            }
        }
        dist
    }

    /// Intrinsic (within-phase) distance between two points; `INFINITY` when
    /// they lie in different components.
    pub fn intrinsic_distance(&self, phase: Phase, a: &Point, b: &Point) -> Result<f64> {
        if !self.point_in_phase(a, phase) || !self.point_in_phase(b, phase) {
            return Err(Error::invalid_input("intrinsic distance endpoints must lie in the phase"));
        }
        let (Some(ca), Some(cb)) = (self.cell_for(a, phase), self.cell_for(b, phase)) else {
            return Ok(f64::INFINITY);
        };
        if self.comp_label(ca, phase) != self.comp_label(cb, phase) {
            return Ok(f64::INFINITY);
        }
        let dist = self.distances_from_set(phase, &[ca], None);
        Ok(dist[cb as usize])
    }

    /// Occupied-cell fraction of the analysis region.
    pub fn occupied_fraction(&self) -> f64 {
        let mut total = 0u64;
        let mut occ = 0u64;
        for c in 0..self.raster.n_cells() {
            if self.raster.cell_radial(c) < self.analysis_radius {
                total += 1;
                if self.occupied[c as usize] {
                    occ += 1;
                }
            }
        }
        occ as f64 / total as f64
    }

    /// Cells lying on the analysis-radius rim.
    pub fn rim_cells(&self) -> Vec<u32> {
        (0..self.raster.n_cells())
            .filter(|&c| is_rim(self.raster.cell_radial(c), self.analysis_radius, self.h))
            .collect()
    }

    pub fn covering_atom(&self, cell: u32) -> Option<u32> {
        let a = self.covering_atom[cell as usize];
        (a != NO_LABEL).then_some(a)
    }

    pub fn vacant_limit(&self) -> f64 {
        self.vacant_limit
    }

    /// JSON-lines summary: one record per component of each phase.
    pub fn summary_jsonl(&self) -> String {
        let mut out = String::new();
        for phase in [Phase::Occupied, Phase::Vacant] {
            for info in self.components(phase) {
                let record = serde_json::json!({
                    "phase": phase.name(),
                    "id": info.id,
                    "cell_count": info.cell_count,
                    "boundary": info.boundary_contact,
                });
                let _ = writeln!(out, "{record}");
            }
        }
        out
    }

    /// Run-length-encoded dump of the occupied bitmap (debugging aid).
    pub fn raster_rle(&self) -> String {
        let mut out = String::new();
        let mut run_val = false;
        let mut run_len = 0u32;
        let _ = writeln!(out, "# rle cells={} h={}", self.raster.n_cells(), self.h);
        for c in 0..self.raster.n_cells() {
            let v = self.occupied[c as usize];
            if v == run_val {
                run_len += 1;
            } else {
                if run_len > 0 {
                    let _ = writeln!(out, "{} {}", if run_val { 1 } else { 0 }, run_len);
                }
                run_val = v;
                run_len = 1;
            }
        }
        if run_len > 0 {
            let _ = writeln!(out, "{} {}", if run_val { 1 } else { 0 }, run_len);
        }
        out
    }
}

struct HeapItem {
    d: f64,
    cell: u32,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.cell == other.cell
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap through reversal; ties broken by cell id for determinism
        other.d.total_cmp(&self.d).then_with(|| other.cell.cmp(&self.cell))
    }
}

/// Disjoint-set forest with union by size and path compression.
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        while self.parent[x] as usize != root {
            let next = self.parent[x] as usize;
            self.parent[x] = root as u32;
            x = next;
        }
        root
    }

    /// Returns false when the two were already in one set.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big as u32;
        self.size[big] += self.size[small];
        true
    }

    /// Relabel roots to consecutive ids in first-appearance order.
    pub fn compress_labels(&mut self) -> (Vec<u32>, u32) {
        let n = self.parent.len();
        let mut labels = vec![NO_LABEL; n];
        let mut next = 0u32;
        let mut out = vec![0u32; n];
        for (i, slot) in out.iter_mut().enumerate() {
            let r = {
                let mut root = i;
                while self.parent[root] as usize != root {
                    root = self.parent[root] as usize;
                }
                root
            };
            if labels[r] == NO_LABEL {
                labels[r] = next;
                next += 1;
            }
            *slot = labels[r];
        }
        (out, next)
    }
}
