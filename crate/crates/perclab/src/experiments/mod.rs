//! Component properties and the experiment harnesses built on them.

pub mod percolation;
pub mod pivotal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::process::{sample_poisson, thin_by_label, PointMeasure, RadiusLaw};
use crate::rng::stream;
use crate::scene::{Phase, Scene};
use crate::walks;

/// Built-in component properties. A property maps a component to a boolean
/// type; it must be constant on the component and, for the harness,
/// isometry-invariant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PropertyKind {
    BoundaryContact,
    CellCountAtLeast(u32),
    ContainsTrifurcation { scale: f64 },
    FrequencyAtLeast { threshold: f64, walks: usize, steps: usize },
    PercolatesAt { lambda: f64 },
    /// Deliberately non-invariant negative control.
    ComponentIdEven,
    /// Deliberately non-constant negative control (alternates per call);
    /// exists to exercise the double-evaluation guard.
    AlternatingDebug,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentProperty {
    pub name: String,
    pub kind: PropertyKind,
    pub isometry_invariant: bool,
}

impl ComponentProperty {
    pub fn boundary_contact() -> Self {
        ComponentProperty { name: "boundary-contact".into(), kind: PropertyKind::BoundaryContact, isometry_invariant: true }
    }

    pub fn cell_count_at_least(v: u32) -> Self {
        ComponentProperty {
            name: format!("cell-count>={v}"),
            kind: PropertyKind::CellCountAtLeast(v),
            isometry_invariant: true,
        }
    }

    pub fn contains_trifurcation(scale: f64) -> Self {
        ComponentProperty {
            name: format!("contains-trifurcation(r={scale})"),
            kind: PropertyKind::ContainsTrifurcation { scale },
            isometry_invariant: true,
        }
    }

    pub fn frequency_at_least(threshold: f64, walks: usize, steps: usize) -> Self {
        ComponentProperty {
            name: format!("frequency>={threshold}"),
            kind: PropertyKind::FrequencyAtLeast { threshold, walks, steps },
            isometry_invariant: true,
        }
    }

    pub fn percolates_at(lambda: f64) -> Self {
        ComponentProperty { name: format!("percolates@{lambda}"), kind: PropertyKind::PercolatesAt { lambda }, isometry_invariant: true }
    }

    pub fn component_id_even() -> Self {
        ComponentProperty { name: "component-id-even".into(), kind: PropertyKind::ComponentIdEven, isometry_invariant: false }
    }
}

/// Evaluation context: deterministic stream derivation plus the auxiliary
/// measures some properties need.
pub struct EvalCtx<'a> {
    pub master: u64,
    pub replica: u64,
    /// Auxiliary process for trifurcation-based properties.
    pub aux: Option<&'a PointMeasure>,
    /// Marked Poisson measure driving percolation-in-component.
    pub eta: Option<&'a PointMeasure>,
}

impl EvalCtx<'_> {
    pub fn bare(master: u64, replica: u64) -> EvalCtx<'static> {
        EvalCtx { master, replica, aux: None, eta: None }
    }
}

/// A component as seen by a property evaluator: either a base component of
/// the scene or the union produced by one ball insertion (incremental view
/// used by the occupied pivotal scan).
#[derive(Debug, Clone)]
pub enum ComponentView {
    Base { phase: Phase, id: u32 },
    /// Base occupied components merged by an inserted ball, plus the cells
    /// the new ball occupies on top of them.
    MergedOccupied { ids: Vec<u32>, extra_cells: Vec<u32> },
}

impl ComponentView {
    pub fn boundary_contact(&self, scene: &Scene) -> bool {
        match self {
            ComponentView::Base { phase, id } => scene.components(*phase)[*id as usize].boundary_contact,
            ComponentView::MergedOccupied { ids, extra_cells } => {
                ids.iter().any(|&i| scene.components(Phase::Occupied)[i as usize].boundary_contact)
                    || extra_cells.iter().any(|&c| {
                        (scene.raster.cell_radial(c) - scene.analysis_radius).abs() <= scene.h * 0.5 + 1e-12
                    })
            }
        }
    }

    pub fn cell_count(&self, scene: &Scene) -> u32 {
        match self {
            ComponentView::Base { phase, id } => scene.components(*phase)[*id as usize].cell_count,
            ComponentView::MergedOccupied { ids, extra_cells } => {
                ids.iter().map(|&i| scene.components(Phase::Occupied)[i as usize].cell_count).sum::<u32>()
                    + extra_cells.len() as u32
            }
        }
    }

    fn base_id(&self) -> u32 {
        match self {
            ComponentView::Base { id, .. } => *id,
            ComponentView::MergedOccupied { ids, .. } => ids.iter().copied().min().unwrap_or(0),
        }
    }
}

static ALTERNATOR: std::sync::atomic::AtomicBool = std::sync::atomic::AtomicBool::new(false);

/// Evaluate a property on a component view. Incremental (merged) views only
/// support the cheap structural properties; the pivotal scan falls back to a
/// full rebuild for the rest.
pub fn evaluate_property(
    prop: &ComponentProperty,
    scene: &Scene,
    view: &ComponentView,
    ctx: &EvalCtx,
) -> Result<bool> {
    let merged = matches!(view, ComponentView::MergedOccupied { .. });
    match &prop.kind {
        PropertyKind::BoundaryContact => Ok(view.boundary_contact(scene)),
        PropertyKind::CellCountAtLeast(v) => Ok(view.cell_count(scene) >= *v),
        PropertyKind::ComponentIdEven => Ok(view.base_id().is_multiple_of(2)),
        PropertyKind::AlternatingDebug => Ok(ALTERNATOR.fetch_xor(true, std::sync::atomic::Ordering::Relaxed)),
        PropertyKind::ContainsTrifurcation { scale } => {
            if merged {
                return Err(Error::invalid_input("trifurcation property needs a full scene rebuild"));
            }
            let aux = ctx.aux.ok_or_else(|| Error::invalid_input("trifurcation property needs an auxiliary measure"))?;
            let ComponentView::Base { phase, id } = view else { unreachable!() };
            let trifs = crate::forest::find_trifurcations(scene, aux, *scale, *phase)?;
            Ok(trifs.iter().any(|t| t.comp_id == *id))
        }
        PropertyKind::FrequencyAtLeast { threshold, walks: n_walks, steps } => {
            if merged {
                return Err(Error::invalid_input("frequency property needs a full scene rebuild"));
            }
            let ComponentView::Base { phase, id } = view else { unreachable!() };
            let mut rng = stream(ctx.master, ctx.replica, &format!("prop-freq-{}-{id}", phase.name()));
            let est = walks::component_frequency(scene, *phase, *id, *n_walks, *steps, &mut rng)?;
            Ok(est.mean >= *threshold)
        }
        PropertyKind::PercolatesAt { lambda } => {
            if merged {
                return Err(Error::invalid_input("percolation property needs a full scene rebuild"));
            }
            let eta = ctx.eta.ok_or_else(|| Error::invalid_input("percolation property needs an eta measure"))?;
            let ComponentView::Base { phase, id } = view else { unreachable!() };
            let out = percolation::percolation_on_component(scene, *phase, *id, &[*lambda], eta)?;
            Ok(out.percolates[0])
        }
    }
}

/// True when the property can be evaluated on a merged incremental view.
pub fn supports_incremental(prop: &ComponentProperty) -> bool {
    matches!(
        prop.kind,
        PropertyKind::BoundaryContact
            | PropertyKind::CellCountAtLeast(_)
            | PropertyKind::ComponentIdEven
            | PropertyKind::AlternatingDebug
    )
}

/// Evaluate `prop` twice on the same component; a disagreement means the
/// evaluator is not constant on components (an internal error).
pub fn evaluate_checked(
    prop: &ComponentProperty,
    scene: &Scene,
    view: &ComponentView,
    ctx: &EvalCtx,
) -> Result<bool> {
    let first = evaluate_property(prop, scene, view, ctx)?;
    let second = evaluate_property(prop, scene, view, ctx)?;
    if first != second {
        return Err(Error::invariant(format!("property '{}' is not component-constant", prop.name)));
    }
    Ok(first)
}

/// Per-seed output of the indistinguishability harness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndistSeedRecord {
    pub seed: u64,
    /// (component id, cell count, property value) per boundary-contacting
    /// component of the analysis region.
    pub components: Vec<(u32, u32, bool)>,
    pub mixed: bool,
}

/// Evaluate a property on every boundary-contacting component of a scene.
/// Non-invariant properties are refused: the dichotomy under test is only
/// meaningful for isometry-invariant properties.
pub fn indistinguishability_scene(
    scene: &Scene,
    property: &ComponentProperty,
    phase: Phase,
    ctx: &EvalCtx,
    seed: u64,
) -> Result<IndistSeedRecord> {
    if !property.isometry_invariant {
        return Err(Error::invalid_input(format!(
            "property '{}' is not isometry-invariant; the harness requires invariance",
            property.name
        )));
    }
    let mut components = Vec::new();
    for info in scene.components(phase) {
        if !info.boundary_contact || info.min_radial >= scene.analysis_radius {
            continue;
        }
        let view = ComponentView::Base { phase, id: info.id };
        let value = evaluate_checked(property, scene, &view, ctx)?;
        components.push((info.id, info.cell_count, value));
    }
    let mixed = components.iter().any(|c| c.2) && components.iter().any(|c| !c.2);
    Ok(IndistSeedRecord { seed, components, mixed })
}

/// Output of one coupled-monotonicity seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotoneSeedRecord {
    pub seed: u64,
    /// Cell-wise inclusion `O_{λ1} ⊆ O_{λ2}` (must always hold).
    pub inclusion_ok: bool,
    /// Crossing-component counts at the two intensities (occupied phase).
    pub crossing_low: u32,
    pub crossing_high: u32,
}

/// Crossing components: boundary-contacting and reaching inside
/// `B(0, analysis_radius / 2)`; the finite-window surrogate of an unbounded
/// spanning component.
pub fn crossing_count(scene: &Scene, phase: Phase) -> u32 {
    scene
        .components(phase)
        .iter()
        .filter(|c| c.boundary_contact && c.min_radial <= scene.analysis_radius / 2.0)
        .count() as u32
}

/// One seed of the uniqueness-monotonicity experiment: a shared marked
/// Poisson measure at the higher intensity, thinned by labels to the lower
/// one, so the occupied sets nest exactly.
#[allow(clippy::too_many_arguments)]
pub fn monotonicity_seed(
    space: crate::geometry::Space,
    lambda_low: f64,
    lambda_high: f64,
    analysis_radius: f64,
    halo: f64,
    h: f64,
    law: &RadiusLaw,
    master: u64,
    replica: u64,
) -> Result<MonotoneSeedRecord> {
    if !(lambda_low <= lambda_high) {
        return Err(Error::invalid_input("monotonicity needs lambda_low <= lambda_high"));
    }
    let mut rng = stream(master, replica, "monotone-measure");
    let high = sample_poisson(space, analysis_radius, halo, lambda_high, law, &mut rng)?;
    let low = thin_by_label(&high, lambda_low / lambda_high)?;
    let max_r = law.max_radius();
    let scene_high = Scene::build(high, analysis_radius, h, max_r)?;
    let scene_low = Scene::build(low, analysis_radius, h, max_r)?;
    let mut inclusion_ok = true;
    for c in 0..scene_low.raster.n_cells() {
        if scene_low.cell_occupied(c) && !scene_high.cell_occupied(c) {
            inclusion_ok = false;
            break;
        }
    }
    Ok(MonotoneSeedRecord {
        seed: replica,
        inclusion_ok,
        crossing_low: crossing_count(&scene_low, Phase::Occupied),
        crossing_high: crossing_count(&scene_high, Phase::Occupied),
    })
}

/// Empirical two-point connectivity: for each distance `t`, whether the
/// origin and a uniformly-rotated point at distance `t` share a component.
pub fn connectivity_seed<R: rand::Rng + ?Sized>(
    scene: &Scene,
    phase: Phase,
    distances: &[f64],
    rng: &mut R,
) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(distances.len());
    for &t in distances {
        if t + 1e-9 > scene.analysis_radius {
            return Err(Error::invalid_input(format!("connectivity distance {t} outside the analysis region")));
        }
        let connected = if t == 0.0 {
            scene.point_in_phase(&Point::ORIGIN, phase)
        } else {
            let phi = rng.gen::<f64>() * std::f64::consts::TAU;
            let p = scene.space.point_at_polar(t, phi);
            if !scene.point_in_phase(&Point::ORIGIN, phase) || !scene.point_in_phase(&p, phase) {
                false
            } else {
                let a = scene.cell_for(&Point::ORIGIN, phase);
                let b = scene.cell_for(&p, phase);
                match (a, b) {
                    (Some(a), Some(b)) => scene.comp_label(a, phase) == scene.comp_label(b, phase),
                    _ => false,
                }
            }
        };
        out.push(connected);
    }
    Ok(out)
}

/// A reproducible experiment record: config plus per-seed outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub name: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    pub per_seed: Vec<serde_json::Value>,
    pub summary: serde_json::Value,
}

impl ExperimentRecord {
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        s.push_str(&serde_json::json!({"record": "header", "name": self.name, "config": self.config, "master_seed": self.master_seed}).to_string());
        s.push('\n');
        for row in &self.per_seed {
            s.push_str(&row.to_string());
            s.push('\n');
        }
        s.push_str(&serde_json::json!({"record": "summary", "value": self.summary}).to_string());
        s.push('\n');
        s
    }
}
