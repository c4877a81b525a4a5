//! Parameter-scan diagnostics (ignored by default; run with `--ignored`).
//!
//! Prints stage-by-stage trifurcation statistics for candidate
//! configurations so ensemble parameters can be chosen with evidence:
//! how many auxiliary atoms pass the isolation clause, the fat-ball clause
//! `B(y,1) ⊂ S`, and the three-branch clause. Not an acceptance test.

use perclab::forest::{build_forest, find_trifurcations};
use perclab::geometry::{Point, Space};
use perclab::process::{sample_poisson, RadiusLaw};
use perclab::rng::stream;
use perclab::scene::{Phase, Scene};
use perclab::walks::{two_sided_walk, WalkGraph};

#[derive(Default)]
struct ScanRow {
    candidates: f64,
    isolated: f64,
    fat: f64,
    trifs: f64,
    edges: f64,
    complete: f64,
    accept: f64,
    cycles: usize,
    seconds: f64,
}

#[allow(clippy::too_many_arguments)]
fn scan(
    space: Space,
    phase: Phase,
    lambda: f64,
    r: f64,
    aux_intensity: f64,
    analysis: f64,
    h: f64,
    seeds: u64,
    master: u64,
) -> ScanRow {
    let halo = 1.0 + 2.0 * r;
    let start = std::time::Instant::now();
    let mut row = ScanRow::default();
    let mut anchor_trials = 0usize;
    let mut accept = 0usize;
    for rep in 0..seeds {
        let mut rng = stream(master, rep, "tune-omega");
        let m = sample_poisson(space, analysis, halo, lambda, &RadiusLaw::Constant(1.0), &mut rng).unwrap();
        let scene = Scene::build(m, analysis, h, 1.0).unwrap();
        let mut rng_aux = stream(master, rep, "tune-aux");
        let aux = sample_poisson(space, analysis, halo, aux_intensity, &RadiusLaw::Constant(1.0), &mut rng_aux).unwrap();

        // stage counters recomputed from the public pieces
        let mut ball_cells = Vec::new();
        for (yi, atom) in aux.atoms.iter().enumerate() {
            if space.radial(&atom.point) > analysis {
                continue;
            }
            row.candidates += 1.0;
            let isolated = !aux
                .atoms
                .iter()
                .enumerate()
                .any(|(j, other)| j != yi && space.distance(&other.point, &atom.point) <= 2.0 * r);
            if !isolated {
                continue;
            }
            row.isolated += 1.0;
            scene.raster.cells_in_ball(&atom.point, 1.0, &mut ball_cells);
            if ball_cells.is_empty() || !ball_cells.iter().all(|&c| scene.cell_in_phase(c, phase)) {
                continue;
            }
            row.fat += 1.0;
        }

        let trifs = find_trifurcations(&scene, &aux, r, phase).unwrap();
        row.trifs += trifs.len() as f64;
        match build_forest(&scene, trifs, phase) {
            Err(_) => row.cycles += 1,
            Ok(f) => {
                row.edges += f.edges.len() as f64;
                row.complete += f.interior_complete.iter().filter(|&&b| b).count() as f64;
                let graph = WalkGraph::from_forest(&f);
                let mut rng_w = stream(master, rep, "tune-anchors");
                for _ in 0..40 {
                    anchor_trials += 1;
                    let anchor = space.sample_uniform_ball(&Point::ORIGIN, analysis, &mut rng_w).unwrap();
                    if two_sided_walk(&graph, space, &anchor, 0, &mut rng_w).is_some() {
                        accept += 1;
                    }
                }
            }
        }
    }
    let s = seeds as f64;
    row.candidates /= s;
    row.isolated /= s;
    row.fat /= s;
    row.trifs /= s;
    row.edges /= s;
    row.complete /= s;
    row.accept = accept as f64 / anchor_trials.max(1) as f64;
    row.seconds = start.elapsed().as_secs_f64() / s;
    row
}

#[test]
#[ignore = "diagnostic parameter scan; run explicitly"]
fn tuning_scan() {
    let seeds: u64 = std::env::var("TUNE_SEEDS").ok().and_then(|s| s.parse().ok()).unwrap_or(6);
    println!(
        "{:<12} {:<9} {:>5} {:>5} {:>6} {:>5} | {:>6} {:>6} {:>6} {:>6} {:>6} {:>5} {:>6} {:>4} {:>7}",
        "space", "phase", "lam", "r", "auxI", "L_a", "cand", "isol", "fat", "trifs", "edges", "cmpl", "accept", "cyc", "s/seed"
    );
    let mut run = |space: Space, phase: Phase, lambda: f64, r: f64, analysis: f64, h: f64| {
        let aux = 1.0 / space.ball_volume(2.0 * r).unwrap();
        let row = scan(space, phase, lambda, r, aux, analysis, h, seeds, 777);
        println!(
            "{:<12} {:<9} {:>5.2} {:>5.2} {:>6.3} {:>5.1} | {:>6.1} {:>6.1} {:>6.2} {:>6.2} {:>6.2} {:>5.2} {:>6.3} {:>4} {:>7.2}",
            space.name(),
            phase.name(),
            lambda,
            r,
            aux,
            analysis,
            row.candidates,
            row.isolated,
            row.fat,
            row.trifs,
            row.edges,
            row.complete,
            row.accept,
            row.cycles,
            row.seconds
        );
    };

    for lambda in [0.2, 0.25, 0.3, 0.35, 0.4] {
        for r in [1.05, 1.2] {
            run(Space::HyperbolicPlane, Phase::Occupied, lambda, r, 6.5, 0.25);
        }
    }
    for lambda in [0.1, 0.14, 0.18, 0.22] {
        for r in [1.05, 1.2] {
            run(Space::HyperbolicPlane, Phase::Vacant, lambda, r, 6.5, 0.25);
        }
    }
}
