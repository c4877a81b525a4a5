//! Pivotal-ball scans: local modifications that flip a component's type.
//!
//! Occupied scan: for each probe atom `z` with no driving atom inside
//! `B(z, δ)`, insert sample balls uniformly in `B(z, δ)` and record the
//! fraction that flips the type of the origin's occupied component. The
//! probe ball is pivotal when the fraction is positive.
//!
//! Vacant scan: for each probe `z` (with no atoms of radius above the cap in
//! `B(z, Δ)`), delete the capped atoms centered in `B(z, Δ)` and record
//! whether the type of the origin's vacant component flips; deletion is a
//! single deterministic modification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::process::{delete_in_ball, insert_atom, PointMeasure, RadiusLaw};
use crate::rng::stream;
use crate::scene::{Phase, Scene};

use super::{evaluate_checked, evaluate_property, supports_incremental, ComponentProperty, ComponentView, EvalCtx};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PivotalHit {
    pub z_index: u32,
    pub flip_fraction: f64,
    pub pivotal: bool,
}

/// The merged occupied view of the origin's component after inserting one
/// ball at `x` with the given radius: base components touched by the new
/// ball, plus the newly occupied cells.
fn merged_view_after_insert(scene: &Scene, x: &Point, radius: f64, base_id: u32) -> ComponentView {
    let mut cells = Vec::new();
    scene.raster.cells_in_ball(x, radius, &mut cells);
    let mut ids = std::collections::BTreeSet::new();
    let mut extra = Vec::new();
    let mut nb = Vec::new();
    for &c in &cells {
        match scene.comp_label(c, Phase::Occupied) {
            Some(l) => {
                ids.insert(l);
            }
            None => {
                extra.push(c);
                // a newly occupied cell can bridge to occupied neighbors
                scene.raster.neighbors(c, &mut nb);
                for &n in &nb {
                    if let Some(l) = scene.comp_label(n, Phase::Occupied) {
                        ids.insert(l);
                    }
                }
            }
        }
    }
    if ids.contains(&base_id) {
        ComponentView::MergedOccupied { ids: ids.into_iter().collect(), extra_cells: extra }
    } else {
        ComponentView::Base { phase: Phase::Occupied, id: base_id }
    }
}

/// Scan probe atoms for occupied-phase pivotality of `C_O(0)`.
///
/// For each probe `z` in the analysis region with `ω(B(z, δ)) = 0`,
/// `samples` insertion points are drawn uniformly in `B(z, δ)` with radii
/// from `law` (rejection-capped at `radius_cap` when set); the reported
/// fraction counts type flips of the origin's component.
#[allow(clippy::too_many_arguments)]
pub fn pivotal_scan_occupied(
    scene: &Scene,
    property: &ComponentProperty,
    probes: &PointMeasure,
    delta: f64,
    samples: usize,
    law: &RadiusLaw,
    radius_cap: Option<f64>,
    ctx: &EvalCtx,
) -> Result<Vec<PivotalHit>> {
    let base = scene
        .component_of(&Point::ORIGIN, Phase::Occupied)
        .ok_or_else(|| Error::invalid_input("origin has no occupied component"))?;
    let base_view = ComponentView::Base { phase: Phase::Occupied, id: base.id };
    let base_type = evaluate_checked(property, scene, &base_view, ctx)?;
    let incremental = supports_incremental(property);
    let mut out = Vec::new();
    for (zi, probe) in probes.atoms.iter().enumerate() {
        if scene.space.radial(&probe.point) > scene.analysis_radius {
            continue;
        }
        if scene.measure.count_in_ball(&probe.point, delta) != 0 {
            continue; // the pivotal definition requires an empty probe ball
        }
        let mut rng = stream(ctx.master, ctx.replica, &format!("pivotal-occ-{zi}"));
        let mut flips = 0usize;
        for _ in 0..samples {
            let x = scene.space.sample_uniform_ball(&probe.point, delta, &mut rng)?;
            let mut radius = law.sample(&mut rng);
            if let Some(cap) = radius_cap {
                while radius > cap {
                    radius = law.sample(&mut rng);
                }
            }
            let new_type = if incremental {
                let view = merged_view_after_insert(scene, &x, radius, base.id);
                evaluate_property(property, scene, &view, ctx)?
            } else {
                let modified = insert_atom(&scene.measure, x, radius, 0.5)?;
                let scene2 = Scene::build(modified, scene.analysis_radius, scene.h, scene.max_radius.max(radius))?;
                let comp2 = scene2
                    .component_of(&Point::ORIGIN, Phase::Occupied)
                    .ok_or_else(|| Error::invariant("origin lost its occupied component after insertion"))?;
                evaluate_property(property, &scene2, &ComponentView::Base { phase: Phase::Occupied, id: comp2.id }, ctx)?
            };
            if new_type != base_type {
                flips += 1;
            }
        }
        let flip_fraction = flips as f64 / samples as f64;
        out.push(PivotalHit { z_index: zi as u32, flip_fraction, pivotal: flip_fraction > 0.0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VacantPivotalHit {
    pub z_index: u32,
    pub flipped: bool,
}

/// Scan probe atoms for vacant-phase pivotality of `C_V(0)`: delete the
/// atoms centered in `B(z, Δ)` with radius at most `radius_cap` and test
/// whether the type of the origin's vacant component flips. Probes with an
/// uncapped (larger-radius) atom inside the ball are skipped, mirroring the
/// capped-pivotal definition.
pub fn pivotal_scan_vacant(
    scene: &Scene,
    property: &ComponentProperty,
    probes: &PointMeasure,
    delta_big: f64,
    radius_cap: f64,
    ctx: &EvalCtx,
) -> Result<Vec<VacantPivotalHit>> {
    let base = scene
        .component_of(&Point::ORIGIN, Phase::Vacant)
        .ok_or_else(|| Error::invalid_input("origin has no vacant component"))?;
    let base_type = evaluate_checked(property, scene, &ComponentView::Base { phase: Phase::Vacant, id: base.id }, ctx)?;
    let mut out = Vec::new();
    for (zi, probe) in probes.atoms.iter().enumerate() {
        if scene.space.radial(&probe.point) > scene.analysis_radius {
            continue;
        }
        let oversize = scene.measure.atoms.iter().any(|a| {
            a.radius > radius_cap && scene.space.distance(&a.point, &probe.point) <= delta_big
        });
        if oversize {
            continue;
        }
        let modified = delete_in_ball(&scene.measure, &probe.point, delta_big, Some(radius_cap))?;
        let flipped = if modified.len() == scene.measure.len() {
            false // nothing deleted: the scene is unchanged
        } else {
            let scene2 = Scene::build(modified, scene.analysis_radius, scene.h, scene.max_radius)?;
            let comp2 = scene2
                .component_of(&Point::ORIGIN, Phase::Vacant)
                .ok_or_else(|| Error::invariant("origin lost its vacant component after deletion"))?;
            let t2 = evaluate_property(property, &scene2, &ComponentView::Base { phase: Phase::Vacant, id: comp2.id }, ctx)?;
            t2 != base_type
        };
        out.push(VacantPivotalHit { z_index: zi as u32, flipped });
    }
    Ok(out)
}
