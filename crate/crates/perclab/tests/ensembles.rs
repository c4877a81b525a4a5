//! Ensemble-level statistical invariants: trend tests and distributional
//! checks that need many seeds but stay below acceptance-suite weight.

mod common;

use rayon::prelude::*;

use perclab::geometry::{Point, Space};
use perclab::lab;
use perclab::process::{sample_poisson, PointMeasure, RadiusLaw};
use perclab::rng::stream;
use perclab::scene::{Phase, Scene};
use perclab::stats;
use perclab::walks::{
    component_frequency, two_sided_walk, NearbyAtomObservable, StationarityDiagnostic, WalkObservable,
};

const MASTER: u64 = 77_001;

/// Uniform-in-ball sampling composed with an isometry to `x` equals direct
/// sampling centered at `x` (two-sample KS on radial distances, 5% level).
#[test]
fn isometry_transported_sampling_matches_direct() {
    for space in [Space::Euclidean2, Space::HyperbolicPlane, Space::Euclidean3] {
        let mut rng = stream(MASTER, 0, &format!("ks-{}", space.name()));
        let target = space.sample_uniform_ball(&Point::ORIGIN, 2.0, &mut rng).unwrap();
        let r = 1.5;
        let n = 8000;
        let direct: Vec<f64> = (0..n)
            .map(|_| {
                let p = space.sample_uniform_ball(&target, r, &mut rng).unwrap();
                space.distance(&target, &p)
            })
            .collect();
        let transported: Vec<f64> = (0..n)
            .map(|_| {
                let g = space.sample_isometry_to(&target, &mut rng).unwrap();
                let p = space.sample_uniform_ball(&Point::ORIGIN, r, &mut rng).unwrap();
                space.distance(&target, &g.apply(&p))
            })
            .collect();
        let d = stats::ks_statistic(&direct, &transported);
        let crit = stats::ks_critical(0.05, n, n);
        assert!(d < crit, "{}: KS {d:.4} >= {crit:.4}", space.name());
    }
}

/// Finite-window N_S trend: in ℍ² at moderate intensity the number of
/// boundary-contacting occupied components keeps growing with the analysis
/// radius (no stabilization), unlike the Euclidean unique regime.
#[test]
fn hyperbolic_boundary_component_count_grows() {
    let lambda = 0.3;
    let windows = [4.0, 5.5, 7.0];
    let mut means = Vec::new();
    for (wi, &analysis) in windows.iter().enumerate() {
        let counts: Vec<f64> = (0..12u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream(MASTER, rep, &format!("ns-h2-{wi}"));
                let m = sample_poisson(Space::HyperbolicPlane, analysis, 1.5, lambda, &RadiusLaw::Constant(1.0), &mut rng)
                    .unwrap();
                let scene = Scene::build(m, analysis, 0.25, 1.0).unwrap();
                scene
                    .components(Phase::Occupied)
                    .iter()
                    .filter(|c| c.boundary_contact && c.min_radial < scene.analysis_radius)
                    .count() as f64
            })
            .collect();
        means.push(stats::mean(&counts));
    }
    assert!(
        means[1] > means[0] * 1.3 && means[2] > means[1] * 1.3,
        "boundary-component counts must grow with the window: {means:?}"
    );
}

/// Component frequency sanity: the empty scene has frequency 1; the giant
/// supercritical component's frequency matches its cell share; a small deep
/// component's frequency is near its cell share.
#[test]
fn component_frequency_matches_cell_share() {
    // empty scene
    let empty = Scene::build(PointMeasure::empty(Space::Euclidean2, 8.0), 6.0, 0.25, 1.0).unwrap();
    let vac = empty.components(Phase::Vacant)[0].id;
    let mut rng = stream(MASTER, 0, "freq-empty");
    let est = component_frequency(&empty, Phase::Vacant, vac, 4, 400, &mut rng).unwrap();
    assert_eq!(est.mean, 1.0, "empty scene: every step is vacant");

    // giant supercritical occupied component
    let mut rng = stream(MASTER, 0, "freq-giant");
    let m = sample_poisson(Space::Euclidean2, 10.0, 1.5, 1.0, &RadiusLaw::Constant(1.0), &mut rng).unwrap();
    let scene = Scene::build(m, 10.0, 0.25, 1.0).unwrap();
    let giant = scene
        .components(Phase::Occupied)
        .iter()
        .max_by_key(|c| c.cell_count)
        .unwrap();
    let analysis_cells: Vec<u32> = (0..scene.raster.n_cells())
        .filter(|&c| scene.raster.cell_radial(c) < scene.analysis_radius)
        .collect();
    let share = analysis_cells
        .iter()
        .filter(|&&c| scene.comp_label(c, Phase::Occupied) == Some(giant.id))
        .count() as f64
        / analysis_cells.len() as f64;
    let est = component_frequency(&scene, Phase::Occupied, giant.id, 20, 2000, &mut rng).unwrap();
    assert!(
        (est.mean - share).abs() < 0.02 + 3.0 * est.stderr,
        "giant frequency {} vs cell share {share}",
        est.mean
    );

    // small isolated ball deep inside a large window
    let mut m = PointMeasure::empty(Space::Euclidean2, 8.0);
    m = perclab::process::insert_atom(&m, Point::new2(1.5, 0.0), 1.0, 0.5).unwrap();
    let scene = Scene::build(m, 6.0, 0.25, 1.0).unwrap();
    let comp = scene.component_of(&Point::new2(1.5, 0.0), Phase::Occupied).unwrap();
    let share = comp.cell_count as f64
        / (0..scene.raster.n_cells())
            .filter(|&c| scene.raster.cell_radial(c) < scene.analysis_radius)
            .count() as f64;
    let mut rng = stream(MASTER, 0, "freq-ball");
    let est = component_frequency(&scene, Phase::Occupied, comp.id, 40, 4000, &mut rng).unwrap();
    assert!(
        (est.mean - share).abs() < 0.35 * share + 3.0 * est.stderr,
        "small-ball frequency {} vs share {share}",
        est.mean
    );
}

/// Isometry invariance of frequencies: boundary-contacting components picked
/// in three fixed directions are exchangeable in law, so their frequency
/// samples pass a one-way ANOVA (this would catch raster anisotropy bias).
#[test]
fn direction_groups_have_indistinguishable_frequencies() {
    let probe_radius = 3.5;
    let groups: Vec<Vec<f64>> = {
        let per_seed: Vec<Vec<Option<f64>>> = (0..40u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = stream(MASTER, rep, "anova-omega");
                let m = sample_poisson(Space::HyperbolicPlane, 5.0, 1.5, 0.3, &RadiusLaw::Constant(1.0), &mut rng)
                    .unwrap();
                let scene = Scene::build(m, 5.0, 0.25, 1.0).unwrap();
                let mut row = Vec::new();
                for k in 0..3 {
                    let phi = k as f64 / 3.0 * std::f64::consts::TAU;
                    let p = Space::HyperbolicPlane.point_at_polar(probe_radius, phi);
                    let value = match scene.component_of(&p, Phase::Occupied) {
                        Some(c) if c.boundary_contact => {
                            let mut rng_f = stream(MASTER, rep, &format!("anova-freq-{k}"));
                            let est = component_frequency(&scene, Phase::Occupied, c.id, 10, 1000, &mut rng_f).unwrap();
                            Some(est.mean)
                        }
                        _ => None,
                    };
                    row.push(value);
                }
                row
            })
            .collect();
        (0..3)
            .map(|k| per_seed.iter().filter_map(|row| row[k]).collect::<Vec<f64>>())
            .collect()
    };
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    assert!(sizes.iter().all(|&s| s >= 8), "need enough hits per direction: {sizes:?}");
    let p = stats::anova_pvalue(&groups);
    assert!(p > 0.05, "directional frequency groups distinguishable: ANOVA p = {p}");
}

/// Stationarity of the second built-in observable (independent-atom
/// indicator) on the spanning-forest walk ensemble.
#[test]
fn stationarity_holds_for_atom_indicator_observable() {
    let diag_parts: Vec<StationarityDiagnostic> = (0..300u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(MASTER, rep, "obs2-omega");
            let m = sample_poisson(Space::Euclidean2, 20.0, 2.0, 1.0, &RadiusLaw::Constant(1.0), &mut rng).unwrap();
            let scene = Scene::build(m, 20.0, 0.25, 1.0).unwrap();
            let graph = lab::msf_walk_graph(&scene, 16.0).unwrap();
            let mut rng_z = stream(MASTER, rep, "obs2-z");
            let z = sample_poisson(Space::Euclidean2, 20.0, 2.0, 0.2, &RadiusLaw::Constant(1.0), &mut rng_z).unwrap();
            let obs = NearbyAtomObservable { space: Space::Euclidean2, measure: &z, radius: 1.0 };
            let mut diag = StationarityDiagnostic::new(8, obs.bins());
            let mut rng_w = stream(MASTER, rep, "obs2-walks");
            for _ in 0..12 {
                let anchor = Space::Euclidean2.sample_uniform_ball(&Point::ORIGIN, 8.0, &mut rng_w).unwrap();
                match two_sided_walk(&graph, Space::Euclidean2, &anchor, 8, &mut rng_w) {
                    None => diag.record_rejected(),
                    Some(w) => diag.add_walk(&graph, &w, &obs),
                }
            }
            diag
        })
        .collect();
    let mut diag = StationarityDiagnostic::new(8, 2);
    for d in &diag_parts {
        diag.merge(d);
    }
    assert!(diag.accepted >= 2500, "accepted walks {}", diag.accepted);
    let tv = diag.max_pairwise_tv();
    assert!(tv <= 0.03, "atom-indicator TV {tv:.4} > 0.03");
}

/// ℝ³ scenes: the Cartesian raster agrees with the closed-form void
/// probability and produces coherent components.
#[test]
fn euclidean3_scene_void_probability() {
    let lambda = 0.15;
    let fractions: Vec<f64> = (0..24u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(MASTER, rep, "e3-omega");
            let m = sample_poisson(Space::Euclidean3, 4.0, 1.5, lambda, &RadiusLaw::Constant(1.0), &mut rng).unwrap();
            let scene = Scene::build(m, 4.0, 0.25, 1.0).unwrap();
            // sanity: exact membership test matches cell flags on a sample
            for c in (0..scene.raster.n_cells()).step_by(971) {
                let center = scene.raster.center(c);
                assert_eq!(scene.cell_occupied(c), scene.point_in_phase(&center, Phase::Occupied));
            }
            scene.occupied_fraction()
        })
        .collect();
    let mean = stats::mean(&fractions);
    let se = stats::stderr(&fractions);
    let expect = 1.0 - (-lambda * 4.0 / 3.0 * std::f64::consts::PI).exp();
    assert!(
        (mean - expect).abs() < 3.0 * se,
        "E3 occupied fraction {mean} vs 1−e^(−λ·4π/3)={expect} (se {se})"
    );
}

/// The non-structural component properties evaluate through the harness:
/// frequency thresholds, percolation levels, and trifurcation containment.
#[test]
fn rich_component_properties_evaluate() {
    use perclab::experiments::{evaluate_checked, ComponentProperty, ComponentView, EvalCtx};

    let mut rng = stream(MASTER, 3, "props-omega");
    let m = sample_poisson(Space::Euclidean2, 10.0, 3.4, 1.0, &RadiusLaw::Constant(1.0), &mut rng).unwrap();
    let scene = Scene::build(m, 10.0, 0.25, 1.0).unwrap();
    let giant = scene
        .components(Phase::Occupied)
        .iter()
        .max_by_key(|c| c.cell_count)
        .unwrap()
        .id;
    let view = ComponentView::Base { phase: Phase::Occupied, id: giant };

    let mut rng_aux = stream(MASTER, 3, "props-aux");
    let aux = sample_poisson(Space::Euclidean2, 10.0, 3.4, 0.035, &RadiusLaw::Constant(1.0), &mut rng_aux).unwrap();
    let mut rng_eta = stream(MASTER, 3, "props-eta");
    let eta = sample_poisson(Space::Euclidean2, 10.0, 3.4, 2.0, &RadiusLaw::Constant(1.0), &mut rng_eta).unwrap();
    let ctx = EvalCtx { master: MASTER, replica: 3, aux: Some(&aux), eta: Some(&eta) };

    // the giant at λ=1 dominates the walk's time
    let freq_hi = ComponentProperty::frequency_at_least(0.5, 10, 800);
    assert!(evaluate_checked(&freq_hi, &scene, &view, &ctx).unwrap());
    let freq_impossible = ComponentProperty::frequency_at_least(0.999, 10, 800);
    assert!(!evaluate_checked(&freq_impossible, &scene, &view, &ctx).unwrap());

    // an inner model at eta's full intensity percolates through the giant
    let perc = ComponentProperty::percolates_at(2.0);
    assert!(evaluate_checked(&perc, &scene, &view, &ctx).unwrap());

    // trifurcation containment evaluates without error (value is scene-dependent)
    let trif = ComponentProperty::contains_trifurcation(1.2);
    let _ = evaluate_checked(&trif, &scene, &view, &ctx).unwrap();
}

/// Escape probability on realized backbones with branch vertices sits above
/// the degree-3 tree floor.
#[test]
fn realized_backbone_escape_above_tree_floor() {
    let reports: Vec<lab::TransienceReport> = (0..8u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(MASTER, rep, "escape-omega");
            let m = sample_poisson(Space::Euclidean2, 11.0, 2.0, 1.0, &RadiusLaw::Constant(1.0), &mut rng).unwrap();
            let scene = Scene::build(m, 11.0, 0.25, 1.0).unwrap();
            lab::transience_seed(&scene, MASTER, rep).unwrap()
        })
        .collect();
    let with_flows: Vec<&lab::TransienceReport> = reports.iter().filter(|r| r.flows > 0).collect();
    assert!(with_flows.len() >= 5, "need backbones with branch vertices");
    for r in with_flows {
        assert!(
            r.min_escape > 0.3,
            "escape {} at a branch vertex fell below the degree-3 floor",
            r.min_escape
        );
    }
}
