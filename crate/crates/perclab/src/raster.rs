//! Metric-aware rasters and spatial indexing.
//!
//! 2D spaces use a geodesic polar grid: annuli of radial width `h`, each
//! split into sectors so that the angular cell extent is about `h` as well
//! (`Δφ ≈ h/ρ` in ℝ², `h/sinh ρ` in ℍ²). Sector counts are multiples of
//! [`ROTATION_SECTORS`], so a rotation by `2π/ROTATION_SECTORS` maps cells
//! onto cells exactly; the innermost annulus is a single disk cell. ℝ³ uses
//! a Cartesian grid with cube side `h/√3` (cell diameter `h`).
//!
//! The same polar binning, with a coarser width, backs [`PointIndex`], the
//! neighbor index used for ball-graph construction and coverage queries.

use crate::error::{Error, Result};
use crate::geometry::{Point, Space};

/// Every polar annulus has a sector count divisible by this, so rotations by
/// `2π/ROTATION_SECTORS` act exactly on the raster.
pub const ROTATION_SECTORS: u32 = 64;

const TAU: f64 = std::f64::consts::TAU;

/// Circumference of the circle of radius `rho`.
fn circumference(space: Space, rho: f64) -> f64 {
    match space {
        Space::Euclidean2 => TAU * rho,
        Space::HyperbolicPlane => TAU * rho.sinh(),
        Space::Euclidean3 => unreachable!("polar raster is 2D only"),
    }
}

/// Largest angular separation `δ` such that two points at radii ≥ `m` can be
/// within distance `r` of each other; `TAU` when unconstrained.
fn max_angle_at(space: Space, m: f64, r: f64) -> f64 {
    if m <= 0.0 {
        return TAU;
    }
    let one_minus_cos = match space {
        Space::Euclidean2 => r * r / (2.0 * m * m),
        Space::HyperbolicPlane => (r.cosh() - 1.0) / (m.sinh() * m.sinh()),
        Space::Euclidean3 => unreachable!(),
    };
    if one_minus_cos >= 2.0 {
        TAU
    } else {
        (1.0 - one_minus_cos).clamp(-1.0, 1.0).acos()
    }
}

#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub space: Space,
    pub h: f64,
    pub radius: f64,
    pub sectors: Vec<u32>,
    offsets: Vec<u32>,
    /// Per-cell annulus index (flat lookup; the labeling loops live on it).
    annulus: Vec<u16>,
    n_cells: u32,
}

impl PolarGrid {
    fn build(space: Space, h: f64, radius: f64, aligned: bool) -> PolarGrid {
        let n_annuli = (radius / h).ceil().max(1.0) as u32;
        let mut sectors = Vec::with_capacity(n_annuli as usize);
        let mut offsets = Vec::with_capacity(n_annuli as usize + 1);
        let mut total = 0u32;
        for i in 0..n_annuli {
            offsets.push(total);
            let n = if i == 0 {
                1
            } else {
                let mid = (i as f64 + 0.5) * h;
                let ideal = circumference(space, mid) / h;
                if aligned {
                    let m = ROTATION_SECTORS as f64;
                    (((ideal / m).round().max(1.0)) as u32) * ROTATION_SECTORS
                } else {
                    ideal.round().max(1.0) as u32
                }
            };
            sectors.push(n);
            total += n;
        }
        offsets.push(total);
        let mut annulus = Vec::with_capacity(total as usize);
        for (i, &n) in sectors.iter().enumerate() {
            annulus.extend(std::iter::repeat_n(i as u16, n as usize));
        }
        PolarGrid { space, h, radius, sectors, offsets, annulus, n_cells: total }
    }

    pub fn n_cells(&self) -> u32 {
        self.n_cells
    }

    pub fn n_annuli(&self) -> u32 {
        self.sectors.len() as u32
    }

    pub fn annulus_of(&self, cell: u32) -> u32 {
        self.annulus[cell as usize] as u32
    }

    pub fn cell_id(&self, annulus: u32, sector: u32) -> u32 {
        self.offsets[annulus as usize] + sector
    }

    pub fn split(&self, cell: u32) -> (u32, u32) {
        let a = self.annulus_of(cell);
        (a, cell - self.offsets[a as usize])
    }

    pub fn center(&self, cell: u32) -> Point {
        let (a, j) = self.split(cell);
        if a == 0 && self.sectors[0] == 1 {
            return Point::ORIGIN;
        }
        let rho = (a as f64 + 0.5) * self.h;
        let phi = (j as f64 + 0.5) / self.sectors[a as usize] as f64 * TAU;
        self.space.point_at_polar(rho, phi)
    }

    pub fn cell_radial(&self, cell: u32) -> f64 {
        let (a, _) = self.split(cell);
        if a == 0 && self.sectors[0] == 1 {
            0.0
        } else {
            (a as f64 + 0.5) * self.h
        }
    }

    pub fn locate(&self, p: &Point) -> Option<u32> {
        let rho = self.space.radial(p);
        let a = (rho / self.h).floor() as i64;
        if a < 0 || a >= self.sectors.len() as i64 {
            return None;
        }
        let a = a as usize;
        let n = self.sectors[a];
        if n == 1 {
            return Some(self.offsets[a]);
        }
        let mut phi = p.y.atan2(p.x);
        if phi < 0.0 {
            phi += TAU;
        }
        let j = ((phi / TAU * n as f64).floor() as i64).clamp(0, n as i64 - 1) as u32;
        Some(self.offsets[a] + j)
    }

    /// Sector range in annulus `a2` whose half-open angular span has interior
    /// overlap with sector `j` of annulus `a1`.
    fn overlapping(&self, a1: usize, j: u32, a2: usize, out: &mut Vec<u32>) {
        let n1 = self.sectors[a1] as u64;
        let n2 = self.sectors[a2] as u64;
        let j = j as u64;
        if n2 == 1 {
            out.push(self.offsets[a2]);
            return;
        }
        if n1 == 1 {
            for j2 in 0..n2 {
                out.push(self.offsets[a2] + j2 as u32);
            }
            return;
        }
        // interior overlap: j2*n1 < (j+1)*n2 and (j2+1)*n1 > j*n2
        let lo = (j * n2) / n1;
        let hi = (((j + 1) * n2).div_ceil(n1)).min(n2) - 1;
        for j2 in lo..=hi {
            if j2 * n1 < (j + 1) * n2 && (j2 + 1) * n1 > j * n2 {
                out.push(self.offsets[a2] + j2 as u32);
            }
        }
    }

    pub fn neighbors(&self, cell: u32, out: &mut Vec<u32>) {
        out.clear();
        let (a, j) = self.split(cell);
        let a = a as usize;
        let n = self.sectors[a];
        if n > 1 {
            out.push(self.offsets[a] + (j + 1) % n);
            if n > 2 {
                out.push(self.offsets[a] + (j + n - 1) % n);
            }
        }
        if a > 0 {
            self.overlapping(a, j, a - 1, out);
        }
        if a + 1 < self.sectors.len() {
            self.overlapping(a, j, a + 1, out);
        }
    }

    /// Face neighbors plus angular-diagonal steps into adjacent annuli. Each
    /// diagonal comes with up to two "corner" cells; a diagonal move is only
    /// admissible when at least one corner shares the phase (no corner
    /// cutting through walls).
    pub fn neighbors_diag(&self, cell: u32, out: &mut Vec<(u32, Option<(u32, u32)>)>) {
        out.clear();
        let mut plain = Vec::new();
        self.neighbors(cell, &mut plain);
        for c in &plain {
            out.push((*c, None));
        }
        let (a, j) = self.split(cell);
        let a = a as usize;
        let n = self.sectors[a];
        for a2 in [a.wrapping_sub(1), a + 1] {
            if a2 == usize::MAX || a2 >= self.sectors.len() {
                continue;
            }
            let mut overlap = Vec::new();
            self.overlapping(a, j, a2, &mut overlap);
            if overlap.is_empty() {
                continue;
            }
            let n2 = self.sectors[a2];
            if n2 <= 2 || n <= 1 {
                continue;
            }
            let lo = *overlap.iter().min().unwrap() - self.offsets[a2];
            let hi = *overlap.iter().max().unwrap() - self.offsets[a2];
            let before = self.offsets[a2] + (lo + n2 - 1) % n2;
            let after = self.offsets[a2] + (hi + 1) % n2;
            // corners: the same-annulus step toward the diagonal, and the
            // radially-adjacent cell the diagonal passes by.
            let side_minus = self.offsets[a] + (j + n - 1) % n;
            let side_plus = self.offsets[a] + (j + 1) % n;
            out.push((before, Some((side_minus, self.offsets[a2] + lo))));
            out.push((after, Some((side_plus, self.offsets[a2] + hi))));
        }
    }

    /// Cells whose center lies within metric distance `r` of `p`.
    pub fn cells_in_ball(&self, p: &Point, r: f64, out: &mut Vec<u32>) {
        out.clear();
        let rho_q = self.space.radial(p);
        let mut phi_q = p.y.atan2(p.x);
        if phi_q < 0.0 {
            phi_q += TAU;
        }
        let a_lo = (((rho_q - r) / self.h).floor().max(0.0)) as usize;
        let a_hi = ((((rho_q + r) / self.h).floor()) as usize).min(self.sectors.len() - 1);
        for a in a_lo..=a_hi {
            let n = self.sectors[a];
            let rho_m = if a == 0 && n == 1 { 0.0 } else { (a as f64 + 0.5) * self.h };
            if (rho_m - rho_q).abs() > r {
                continue;
            }
            let m = rho_m.min(rho_q);
            let dphi = max_angle_at(self.space, m, r);
            let (j_lo, j_hi) = if dphi >= std::f64::consts::PI {
                (0i64, n as i64 - 1)
            } else {
                let w = (dphi / TAU * n as f64).ceil() as i64 + 1;
                let jq = (phi_q / TAU * n as f64).floor() as i64;
                (jq - w, jq + w)
            };
            for jj in j_lo..=j_hi {
                let j = jj.rem_euclid(n as i64) as u32;
                let c = self.offsets[a] + j;
                if self.space.within(&self.center(c), p, r) {
                    out.push(c);
                }
            }
            if j_hi - j_lo + 1 >= n as i64 {
                // full annulus scanned; avoid duplicate pushes
                out.dedup();
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}

#[derive(Debug, Clone)]
pub struct CartGrid3 {
    pub h: f64,
    pub side: f64,
    pub radius: f64,
    n: [i64; 3],
}

impl CartGrid3 {
    fn build(h: f64, radius: f64) -> CartGrid3 {
        let side = h / 3f64.sqrt();
        let per_axis = (2.0 * radius / side).ceil() as i64;
        CartGrid3 { h, side, radius, n: [per_axis; 3] }
    }

    pub fn n_cells(&self) -> u32 {
        (self.n[0] * self.n[1] * self.n[2]) as u32
    }

    fn id(&self, ix: i64, iy: i64, iz: i64) -> Option<u32> {
        if ix < 0 || iy < 0 || iz < 0 || ix >= self.n[0] || iy >= self.n[1] || iz >= self.n[2] {
            None
        } else {
            Some(((ix * self.n[1] + iy) * self.n[2] + iz) as u32)
        }
    }

    fn coords(&self, cell: u32) -> (i64, i64, i64) {
        let c = cell as i64;
        let iz = c % self.n[2];
        let iy = (c / self.n[2]) % self.n[1];
        let ix = c / (self.n[1] * self.n[2]);
        (ix, iy, iz)
    }

    pub fn center(&self, cell: u32) -> Point {
        let (ix, iy, iz) = self.coords(cell);
        Point::new3(
            -self.radius + (ix as f64 + 0.5) * self.side,
            -self.radius + (iy as f64 + 0.5) * self.side,
            -self.radius + (iz as f64 + 0.5) * self.side,
        )
    }

    pub fn locate(&self, p: &Point) -> Option<u32> {
        let ix = ((p.x + self.radius) / self.side).floor() as i64;
        let iy = ((p.y + self.radius) / self.side).floor() as i64;
        let iz = ((p.z + self.radius) / self.side).floor() as i64;
        self.id(ix, iy, iz)
    }

    pub fn neighbors(&self, cell: u32, out: &mut Vec<u32>) {
        out.clear();
        let (ix, iy, iz) = self.coords(cell);
        for (dx, dy, dz) in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] {
            if let Some(c) = self.id(ix + dx, iy + dy, iz + dz) {
                out.push(c);
            }
        }
    }

    pub fn neighbors_diag(&self, cell: u32, out: &mut Vec<(u32, Option<(u32, u32)>)>) {
        out.clear();
        let (ix, iy, iz) = self.coords(cell);
        let mut face = Vec::new();
        self.neighbors(cell, &mut face);
        for c in face {
            out.push((c, None));
        }
        // edge diagonals with the two intermediate face cells as corners
        let deltas: [([i64; 3], [i64; 3], [i64; 3]); 12] = [
            ([1, 1, 0], [1, 0, 0], [0, 1, 0]),
            ([1, -1, 0], [1, 0, 0], [0, -1, 0]),
            ([-1, 1, 0], [-1, 0, 0], [0, 1, 0]),
            ([-1, -1, 0], [-1, 0, 0], [0, -1, 0]),
            ([1, 0, 1], [1, 0, 0], [0, 0, 1]),
            ([1, 0, -1], [1, 0, 0], [0, 0, -1]),
            ([-1, 0, 1], [-1, 0, 0], [0, 0, 1]),
            ([-1, 0, -1], [-1, 0, 0], [0, 0, -1]),
            ([0, 1, 1], [0, 1, 0], [0, 0, 1]),
            ([0, 1, -1], [0, 1, 0], [0, 0, -1]),
            ([0, -1, 1], [0, -1, 0], [0, 0, 1]),
            ([0, -1, -1], [0, -1, 0], [0, 0, -1]),
        ];
        for (d, c1, c2) in deltas {
            if let Some(cell2) = self.id(ix + d[0], iy + d[1], iz + d[2]) {
                let k1 = self.id(ix + c1[0], iy + c1[1], iz + c1[2]);
                let k2 = self.id(ix + c2[0], iy + c2[1], iz + c2[2]);
                if let (Some(k1), Some(k2)) = (k1, k2) {
                    out.push((cell2, Some((k1, k2))));
                }
            }
        }
    }

    pub fn cells_in_ball(&self, p: &Point, r: f64, out: &mut Vec<u32>) {
        out.clear();
        let lo = |v: f64| ((v - r + self.radius) / self.side).floor() as i64;
        let hi = |v: f64| ((v + r + self.radius) / self.side).floor() as i64;
        for ix in lo(p.x).max(0)..=hi(p.x).min(self.n[0] - 1) {
            for iy in lo(p.y).max(0)..=hi(p.y).min(self.n[1] - 1) {
                for iz in lo(p.z).max(0)..=hi(p.z).min(self.n[2] - 1) {
                    let c = self.id(ix, iy, iz).unwrap();
                    if self.center(c).sub_dist(p) <= r {
                        out.push(c);
                    }
                }
            }
        }
    }
}

impl Point {
    fn sub_dist(&self, o: &Point) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// A raster over the ball `B(0, radius)` with near-uniform metric cells.
#[derive(Debug, Clone)]
pub enum Raster {
    Polar(PolarGrid),
    Cart3(CartGrid3),
}

impl Raster {
    pub fn build(space: Space, h: f64, radius: f64) -> Result<Raster> {
        if !(h > 0.0) || !(radius > h) {
            return Err(Error::invalid_config(format!("raster needs 0 < h < radius, got h={h} radius={radius}")));
        }
        Ok(match space {
            Space::Euclidean2 | Space::HyperbolicPlane => Raster::Polar(PolarGrid::build(space, h, radius, true)),
            Space::Euclidean3 => Raster::Cart3(CartGrid3::build(h, radius)),
        })
    }

    pub fn space(&self) -> Space {
        match self {
            Raster::Polar(g) => g.space,
            Raster::Cart3(_) => Space::Euclidean3,
        }
    }

    pub fn h(&self) -> f64 {
        match self {
            Raster::Polar(g) => g.h,
            Raster::Cart3(g) => g.h,
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            Raster::Polar(g) => g.radius,
            Raster::Cart3(g) => g.radius,
        }
    }

    pub fn n_cells(&self) -> u32 {
        match self {
            Raster::Polar(g) => g.n_cells(),
            Raster::Cart3(g) => g.n_cells(),
        }
    }

    pub fn center(&self, cell: u32) -> Point {
        match self {
            Raster::Polar(g) => g.center(cell),
            Raster::Cart3(g) => g.center(cell),
        }
    }

    /// Radial coordinate of the cell center.
    pub fn cell_radial(&self, cell: u32) -> f64 {
        match self {
            Raster::Polar(g) => g.cell_radial(cell),
            Raster::Cart3(g) => g.center(cell).norm(),
        }
    }

    pub fn locate(&self, p: &Point) -> Option<u32> {
        match self {
            Raster::Polar(g) => g.locate(p),
            Raster::Cart3(g) => g.locate(p),
        }
    }

    pub fn neighbors(&self, cell: u32, out: &mut Vec<u32>) {
        match self {
            Raster::Polar(g) => g.neighbors(cell, out),
            Raster::Cart3(g) => g.neighbors(cell, out),
        }
    }

    pub fn neighbors_diag(&self, cell: u32, out: &mut Vec<(u32, Option<(u32, u32)>)>) {
        match self {
            Raster::Polar(g) => g.neighbors_diag(cell, out),
            Raster::Cart3(g) => g.neighbors_diag(cell, out),
        }
    }

    pub fn cells_in_ball(&self, p: &Point, r: f64, out: &mut Vec<u32>) {
        match self {
            Raster::Polar(g) => g.cells_in_ball(p, r, out),
            Raster::Cart3(g) => g.cells_in_ball(p, r, out),
        }
    }
}

/// Spatial index over a fixed point set for neighbor queries.
/// Per-annulus sector counts plus flattened `(sector, count, ids...)` runs.
type PolarBins = (Vec<u32>, Vec<Vec<u32>>);
type CartBins = (f64, std::collections::HashMap<(i64, i64, i64), Vec<u32>>);

#[derive(Debug, Clone)]
pub struct PointIndex {
    space: Space,
    width: f64,
    points: Vec<Point>,
    // polar bins for 2D, cube bins for 3D
    polar: Option<PolarBins>,
    cart: Option<CartBins>,
}

impl PointIndex {
    pub fn build(space: Space, points: Vec<Point>, width: f64) -> PointIndex {
        let width = width.max(1e-9);
        match space {
            Space::Euclidean2 | Space::HyperbolicPlane => {
                let max_rho = points.iter().map(|p| space.radial(p)).fold(0.0, f64::max);
                let n_annuli = (max_rho / width).floor() as usize + 1;
                let mut sectors = Vec::with_capacity(n_annuli);
                for a in 0..n_annuli {
                    let mid = (a as f64 + 0.5) * width;
                    let n = if a == 0 { 1 } else { (circumference(space, mid) / width).round().max(1.0) as u32 };
                    sectors.push(n);
                }
                // per annulus, a sector -> point-id map, flattened below
                let mut by_annulus: Vec<std::collections::HashMap<u32, Vec<u32>>> =
                    vec![std::collections::HashMap::new(); n_annuli];
                for (i, p) in points.iter().enumerate() {
                    let rho = space.radial(p);
                    let a = ((rho / width).floor() as usize).min(n_annuli - 1);
                    let n = sectors[a];
                    let mut phi = p.y.atan2(p.x);
                    if phi < 0.0 {
                        phi += TAU;
                    }
                    let j = ((phi / TAU * n as f64).floor() as i64).clamp(0, n as i64 - 1) as u32;
                    by_annulus[a].entry(j).or_default().push(i as u32);
                }
                let flat: Vec<Vec<u32>> = by_annulus
                    .into_iter()
                    .map(|m| {
                        let mut v: Vec<(u32, Vec<u32>)> = m.into_iter().collect();
                        v.sort_by_key(|(j, _)| *j);
                        let mut flat = Vec::new();
                        for (j, ids) in v {
                            flat.push(j);
                            flat.push(ids.len() as u32);
                            flat.extend(ids);
                        }
                        flat
                    })
                    .collect();
                PointIndex { space, width, points, polar: Some((sectors, flat)), cart: None }
            }
            Space::Euclidean3 => {
                let mut map: std::collections::HashMap<(i64, i64, i64), Vec<u32>> = std::collections::HashMap::new();
                for (i, p) in points.iter().enumerate() {
                    let key = (
                        (p.x / width).floor() as i64,
                        (p.y / width).floor() as i64,
                        (p.z / width).floor() as i64,
                    );
                    map.entry(key).or_default().push(i as u32);
                }
                PointIndex { space, width, points, polar: None, cart: Some((width, map)) }
            }
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Indices of points within metric distance `r` of `p`.
    pub fn query(&self, p: &Point, r: f64, out: &mut Vec<u32>) {
        out.clear();
        match (&self.polar, &self.cart) {
            (Some((sectors, bins)), None) => {
                let rho_q = self.space.radial(p);
                let mut phi_q = p.y.atan2(p.x);
                if phi_q < 0.0 {
                    phi_q += TAU;
                }
                let a_lo = (((rho_q - r) / self.width).floor().max(0.0)) as usize;
                let a_hi = ((((rho_q + r) / self.width).floor()) as usize).min(sectors.len().saturating_sub(1));
                for a in a_lo..=a_hi {
                    let n = sectors[a];
                    let ann_lo = a as f64 * self.width;
                    let m = ann_lo.min(rho_q);
                    let dphi = max_angle_at(self.space, m, r);
                    let flat = &bins[a];
                    let full = dphi >= std::f64::consts::PI || n <= 2;
                    let (j_lo, j_hi) = if full {
                        (0i64, n as i64 - 1)
                    } else {
                        let w = (dphi / TAU * n as f64).ceil() as i64 + 1;
                        let jq = (phi_q / TAU * n as f64).floor() as i64;
                        (jq - w, jq + w)
                    };
                    let mut k = 0;
                    while k < flat.len() {
                        let j = flat[k] as i64;
                        let cnt = flat[k + 1] as usize;
                        let ids = &flat[k + 2..k + 2 + cnt];
                        k += 2 + cnt;
                        let in_window = if full {
                            true
                        } else {
                            // compare j against [j_lo, j_hi] mod n
                            let n = n as i64;
                            let dj = (j - j_lo).rem_euclid(n);
                            dj <= (j_hi - j_lo)
                        };
                        if in_window {
                            for &i in ids {
                                if self.space.within(&self.points[i as usize], p, r) {
                                    out.push(i);
                                }
                            }
                        }
                    }
                }
            }
            (None, Some((width, map))) => {
                let lo = |v: f64| ((v - r) / width).floor() as i64;
                let hi = |v: f64| ((v + r) / width).floor() as i64;
                for ix in lo(p.x)..=hi(p.x) {
                    for iy in lo(p.y)..=hi(p.y) {
                        for iz in lo(p.z)..=hi(p.z) {
                            if let Some(ids) = map.get(&(ix, iy, iz)) {
                                for &i in ids {
                                    if self.space.within(&self.points[i as usize], p, r) {
                                        out.push(i);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn locate_center_roundtrip_polar() {
        for space in [Space::Euclidean2, Space::HyperbolicPlane] {
            let raster = Raster::build(space, 0.2, 5.0).unwrap();
            let mut misses = 0;
            for cell in (0..raster.n_cells()).step_by(7) {
                let c = raster.center(cell);
                if raster.locate(&c) != Some(cell) {
                    misses += 1;
                }
            }
            assert_eq!(misses, 0, "{space:?}");
        }
    }

    #[test]
    fn locate_center_roundtrip_cart3() {
        let raster = Raster::build(Space::Euclidean3, 0.5, 3.0).unwrap();
        for cell in (0..raster.n_cells()).step_by(11) {
            assert_eq!(raster.locate(&raster.center(cell)), Some(cell));
        }
    }

    #[test]
    fn neighbors_are_symmetric_and_close() {
        let mut rng = stream(31, 0, "raster-nb");
        for space in [Space::Euclidean2, Space::HyperbolicPlane] {
            let raster = Raster::build(space, 0.25, 4.0).unwrap();
            let mut nb = Vec::new();
            let mut back = Vec::new();
            for _ in 0..300 {
                let cell = rng.gen_range(0..raster.n_cells());
                raster.neighbors(cell, &mut nb);
                let c0 = raster.center(cell);
                for &n in nb.clone().iter() {
                    assert_ne!(n, cell);
                    // metric closeness: neighbor centers within a few h
                    assert!(space.distance(&c0, &raster.center(n)) < 4.0 * raster.h());
                    raster.neighbors(n, &mut back);
                    assert!(back.contains(&cell), "asymmetric adjacency {cell} {n} in {space:?}");
                }
            }
        }
    }

    #[test]
    fn cells_in_ball_exact_set() {
        let mut rng = stream(32, 0, "raster-ball");
        for space in [Space::Euclidean2, Space::HyperbolicPlane] {
            let raster = Raster::build(space, 0.3, 4.0).unwrap();
            let mut got = Vec::new();
            for _ in 0..20 {
                let p = space
                    .sample_uniform_ball(&Point::ORIGIN, 3.0, &mut rng)
                    .unwrap();
                let r = 0.5 + rng.gen::<f64>();
                raster.cells_in_ball(&p, r, &mut got);
                let brute: Vec<u32> = (0..raster.n_cells())
                    .filter(|&c| space.distance(&raster.center(c), &p) <= r)
                    .collect();
                assert_eq!(got, brute, "{space:?} r={r}");
            }
        }
    }

    #[test]
    fn point_index_matches_brute_force() {
        let mut rng = stream(33, 0, "ptindex");
        for space in [Space::Euclidean2, Space::Euclidean3, Space::HyperbolicPlane] {
            let max_r = if space == Space::HyperbolicPlane { 6.0 } else { 8.0 };
            let pts: Vec<Point> = (0..500)
                .map(|_| space.sample_uniform_ball(&Point::ORIGIN, max_r, &mut rng).unwrap())
                .collect();
            let index = PointIndex::build(space, pts.clone(), 2.0);
            let mut got = Vec::new();
            for _ in 0..30 {
                let q = space.sample_uniform_ball(&Point::ORIGIN, max_r, &mut rng).unwrap();
                let r = 0.5 + 1.5 * rng.gen::<f64>();
                index.query(&q, r, &mut got);
                let mut got = got.clone();
                got.sort_unstable();
                let brute: Vec<u32> = (0..pts.len() as u32)
                    .filter(|&i| space.distance(&pts[i as usize], &q) <= r)
                    .collect();
                assert_eq!(got, brute, "{space:?}");
            }
        }
    }

    #[test]
    fn rotation_alignment() {
        // rotating by 2π/ROTATION_SECTORS maps cell centers onto cell centers
        let raster = Raster::build(Space::Euclidean2, 0.2, 3.0).unwrap();
        let theta = TAU / ROTATION_SECTORS as f64;
        let mut checked = 0;
        for cell in (0..raster.n_cells()).step_by(13) {
            let c = raster.center(cell);
            let rotated = Point::new2(
                c.x * theta.cos() - c.y * theta.sin(),
                c.x * theta.sin() + c.y * theta.cos(),
            );
            let target = raster.locate(&rotated).unwrap();
            let d = Space::Euclidean2.distance(&raster.center(target), &rotated);
            assert!(d < 1e-9, "rotation misaligned: {d}");
            checked += 1;
        }
        assert!(checked > 50);
    }
}
