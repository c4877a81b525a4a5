//! Run configuration, orchestration, and artifact manifests.
//!
//! Configs are flat `key = value` text with `[section]` headers; no nesting.
//! Every run is reproducible bit-exactly from `(config, master seed)`: all
//! randomness flows through `rng::stream(master, replica, purpose)`, replicas
//! are the only parallel axis, and results are merged in replica order, so
//! the thread count never changes any output byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{self, percolation, pivotal, ComponentProperty, EvalCtx};
use crate::flow;
use crate::forest;
use crate::geometry::Space;
use crate::msf;
use crate::process::{sample_poisson, PointMeasure, RadiusLaw};
use crate::rng::stream;
use crate::scene::{Phase, Scene};
use crate::walks::{self, DegreeObservable, StationarityDiagnostic, WalkGraph, WalkObservable};

/// Parsed config file: `section.key -> (value, line number)`.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<ConfigMap> {
        let mut section = String::new();
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::invalid_config(format!("line {lineno}: unterminated section header")))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid_config(format!("line {lineno}: expected 'key = value'")))?;
            let full = if section.is_empty() { key.trim().to_string() } else { format!("{section}.{}", key.trim()) };
            if entries.insert(full.clone(), (value.trim().to_string(), lineno)).is_some() {
                return Err(Error::invalid_config(format!("line {lineno}: duplicate key '{full}'")));
            }
        }
        Ok(ConfigMap { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::invalid_config(format!("missing required key '{key}'")))
    }

    fn parse_field<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (v, line) = self
            .entries
            .get(key)
            .ok_or_else(|| Error::invalid_config(format!("missing required key '{key}'")))?;
        v.parse::<T>()
            .map_err(|_| Error::invalid_config(format!("line {line}: field '{key}': cannot parse '{v}'")))
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(_) => self.parse_field(key),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut last_section = String::new();
        for (key, (value, _)) in &self.entries {
            let (section, name) = key.rsplit_once('.').unwrap_or(("", key.as_str()));
            if section != last_section {
                let _ = writeln!(out, "[{section}]");
                last_section = section.to_string();
            }
            let _ = writeln!(out, "{name} = {value}");
        }
        out
    }
}

fn parse_radius_law(text: &str) -> Result<RadiusLaw> {
    let mut it = text.split_whitespace();
    let law = match it.next() {
        Some("constant") => {
            let r: f64 = it
                .next()
                .ok_or_else(|| Error::invalid_config("radius law 'constant' needs a value"))?
                .parse()
                .map_err(|_| Error::invalid_config("bad constant radius"))?;
            RadiusLaw::Constant(r)
        }
        Some("bounded") => {
            let mut pairs = Vec::new();
            for tok in it {
                let (v, p) = tok
                    .split_once(':')
                    .ok_or_else(|| Error::invalid_config("bounded radius law entries are value:prob"))?;
                pairs.push((
                    v.parse().map_err(|_| Error::invalid_config("bad radius value"))?,
                    p.parse().map_err(|_| Error::invalid_config("bad radius probability"))?,
                ));
            }
            RadiusLaw::BoundedIid(pairs)
        }
        Some("exptrunc") => {
            let rate: f64 = it
                .next()
                .ok_or_else(|| Error::invalid_config("radius law 'exptrunc' needs rate and cap"))?
                .parse()
                .map_err(|_| Error::invalid_config("bad rate"))?;
            let cap: f64 = it
                .next()
                .ok_or_else(|| Error::invalid_config("radius law 'exptrunc' needs rate and cap"))?
                .parse()
                .map_err(|_| Error::invalid_config("bad cap"))?;
            RadiusLaw::ExponentialTruncated { rate, cap }
        }
        other => return Err(Error::invalid_config(format!("unknown radius law {other:?}"))),
    };
    law.validate()?;
    Ok(law)
}

fn radius_law_text(law: &RadiusLaw) -> String {
    match law {
        RadiusLaw::Constant(r) => format!("constant {r}"),
        RadiusLaw::BoundedIid(pairs) => {
            let mut s = String::from("bounded");
            for (v, p) in pairs {
                let _ = write!(s, " {v}:{p}");
            }
            s
        }
        RadiusLaw::ExponentialTruncated { rate, cap } => format!("exptrunc {rate} {cap}"),
    }
}

/// A validated run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub space: Space,
    pub lambda: f64,
    pub radius_law: RadiusLaw,
    pub analysis_radius: f64,
    pub halo: f64,
    pub resolution: f64,
    pub phase: Phase,
    pub trif_scale: f64,
    pub aux_intensity: f64,
    pub probe_intensity: f64,
    pub master_seed: u64,
    pub replicas: u64,
    pub threads: usize,
    /// Extra per-experiment parameters, echoed verbatim.
    pub extra: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn from_map(map: &ConfigMap) -> Result<RunConfig> {
        let space = Space::from_name(map.required("model.space")?)
            .map_err(|e| Error::invalid_config(format!("field 'model.space': {e}")))?;
        let lambda: f64 = map.parse_field("model.lambda")?;
        let radius_law = parse_radius_law(map.required("model.radius")?)?;
        let analysis_radius: f64 = map.parse_field("window.analysis_radius")?;
        let halo: f64 = map.parse_field("window.halo")?;
        let resolution: f64 = map.parse_field("window.resolution")?;
        let phase = match map.get("forest.phase").unwrap_or("occupied") {
            "occupied" => Phase::Occupied,
            "vacant" => Phase::Vacant,
            other => return Err(Error::invalid_config(format!("field 'forest.phase': unknown phase '{other}'"))),
        };
        let trif_scale: f64 = map.parse_or("forest.trif_scale", 1.5)?;
        let aux_intensity: f64 = map.parse_or("forest.aux_intensity", 1.0)?;
        let probe_intensity: f64 = map.parse_or("forest.probe_intensity", 1.0)?;
        let master_seed: u64 = map.parse_or("run.seed", 0)?;
        let replicas: u64 = map.parse_or("run.replicas", 1)?;
        let threads: usize = map.parse_or("run.threads", 1)?;
        let mut extra = BTreeMap::new();
        for (k, (v, _)) in &map.entries {
            if let Some(name) = k.strip_prefix("experiment.") {
                extra.insert(name.to_string(), v.clone());
            }
        }
        let cfg = RunConfig {
            space,
            lambda,
            radius_law,
            analysis_radius,
            halo,
            resolution,
            phase,
            trif_scale,
            aux_intensity,
            probe_intensity,
            master_seed,
            replicas,
            threads,
            extra,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_map(&ConfigMap::parse(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::invalid_config("field 'model.lambda': intensity must be > 0"));
        }
        self.radius_law.validate()?;
        let min_r = self.radius_law.min_radius();
        if min_r > 0.0 && self.resolution > min_r / 4.0 + 1e-12 {
            return Err(Error::invalid_config(format!(
                "field 'window.resolution': h = {} exceeds min_radius/4 = {}; refine the raster or fatten the balls",
                self.resolution,
                min_r / 4.0
            )));
        }
        let need = self.radius_law.max_radius() + 2.0 * self.trif_scale;
        if self.halo + 1e-12 < need {
            return Err(Error::invalid_config(format!(
                "field 'window.halo': halo = {} is below max_radius + 2r = {}; the analysis region would see truncation",
                self.halo, need
            )));
        }
        let total = self.analysis_radius + self.halo;
        if self.space == Space::HyperbolicPlane && total > crate::geometry::MAX_HYPERBOLIC_WINDOW {
            return Err(Error::invalid_config(format!(
                "field 'window.analysis_radius': window {total} exceeds the hyperbolic cap {}",
                crate::geometry::MAX_HYPERBOLIC_WINDOW
            )));
        }
        if self.replicas == 0 {
            return Err(Error::invalid_config("field 'run.replicas': need at least one replica"));
        }
        Ok(())
    }

    /// Canonical config text; parsing it back yields an identical config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[model]");
        let _ = writeln!(s, "space = {}", self.space.name());
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "radius = {}", radius_law_text(&self.radius_law));
        let _ = writeln!(s, "[window]");
        let _ = writeln!(s, "analysis_radius = {}", self.analysis_radius);
        let _ = writeln!(s, "halo = {}", self.halo);
        let _ = writeln!(s, "resolution = {}", self.resolution);
        let _ = writeln!(s, "[forest]");
        let _ = writeln!(s, "phase = {}", self.phase.name());
        let _ = writeln!(s, "trif_scale = {}", self.trif_scale);
        let _ = writeln!(s, "aux_intensity = {}", self.aux_intensity);
        let _ = writeln!(s, "probe_intensity = {}", self.probe_intensity);
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "seed = {}", self.master_seed);
        let _ = writeln!(s, "replicas = {}", self.replicas);
        let _ = writeln!(s, "threads = {}", self.threads);
        if !self.extra.is_empty() {
            let _ = writeln!(s, "[experiment]");
            for (k, v) in &self.extra {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s
    }

    /// Canonical text with execution-only fields (thread count) normalized
    /// out; this is what the manifest hashes, so identical (config, seed)
    /// runs produce identical manifests at any thread count.
    pub fn reproducibility_text(&self) -> String {
        let mut me = self.clone();
        me.threads = 1;
        me.to_text()
    }

    fn extra_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.extra.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::invalid_config(format!("field 'experiment.{key}': cannot parse '{v}'"))),
        }
    }

    fn extra_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.extra.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::invalid_config(format!("field 'experiment.{key}': cannot parse '{v}'"))),
        }
    }

    fn extra_f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.extra.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::invalid_config(format!("field 'experiment.{key}': cannot parse '{t}'")))
                })
                .collect(),
        }
    }

    /// Sample the driving measure of one replica.
    pub fn sample_measure(&self, replica: u64) -> Result<PointMeasure> {
        let mut rng = stream(self.master_seed, replica, "omega");
        let mut m = sample_poisson(self.space, self.analysis_radius, self.halo, self.lambda, &self.radius_law, &mut rng)?;
        m.seed = Some(self.master_seed);
        Ok(m)
    }

    pub fn build_scene(&self, replica: u64) -> Result<Scene> {
        let m = self.sample_measure(replica)?;
        Scene::build(m, self.analysis_radius, self.resolution, self.radius_law.max_radius())
    }

    /// Auxiliary process (trifurcation candidates) of one replica.
    pub fn sample_aux(&self, replica: u64) -> Result<PointMeasure> {
        let mut rng = stream(self.master_seed, replica, "aux");
        sample_poisson(self.space, self.analysis_radius, self.halo, self.aux_intensity, &RadiusLaw::Constant(1.0), &mut rng)
    }

    /// Probe process (pivotal scan centers) of one replica.
    pub fn sample_probes(&self, replica: u64) -> Result<PointMeasure> {
        let mut rng = stream(self.master_seed, replica, "probes");
        sample_poisson(self.space, self.analysis_radius, self.halo, self.probe_intensity, &RadiusLaw::Constant(1.0), &mut rng)
    }
}

/// An artifact written by a run, hashed for the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub master_seed: u64,
    pub replicas: u64,
    pub config_sha256: String,
    pub artifacts: Vec<Artifact>,
}

fn sha256_hex(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(data);
    let d = h.finalize();
    let mut s = String::with_capacity(64);
    for b in d {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// In-memory run output: named artifacts in deterministic order.
pub struct RunOutput {
    pub command: String,
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub manifest: Manifest,
}

impl RunOutput {
    fn assemble(command: &str, config: &RunConfig, artifacts: Vec<(String, Vec<u8>)>) -> RunOutput {
        let manifest = Manifest {
            command: command.to_string(),
            master_seed: config.master_seed,
            replicas: config.replicas,
            config_sha256: sha256_hex(config.reproducibility_text().as_bytes()),
            artifacts: artifacts
                .iter()
                .map(|(name, data)| Artifact { name: name.clone(), sha256: sha256_hex(data), bytes: data.len() as u64 })
                .collect(),
        };
        RunOutput { command: command.to_string(), artifacts, manifest }
    }

    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.manifest).expect("manifest serializes")
    }

    /// Write artifacts plus `manifest.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, data) in &self.artifacts {
            std::fs::write(dir.join(name), data)?;
        }
        std::fs::write(dir.join("manifest.json"), self.manifest_json())?;
        Ok(())
    }
}

/// Run per-replica jobs on a bounded pool, merging in replica order.
fn run_replicas<T: Send, F: Fn(u64) -> Result<T> + Sync>(config: &RunConfig, job: F) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.max(1))
        .build()
        .map_err(|e| Error::invalid_config(format!("thread pool: {e}")))?;
    let results: Vec<(u64, Result<T>)> =
        pool.install(|| (0..config.replicas).into_par_iter().map(|r| (r, job(r))).collect());
    let mut out = Vec::with_capacity(results.len());
    for (_, r) in results {
        out.push(r?);
    }
    Ok(out)
}

/// `sample` subcommand: one point-measure text file per replica.
pub fn run_sample(config: &RunConfig) -> Result<RunOutput> {
    let measures = run_replicas(config, |r| config.sample_measure(r))?;
    let mut artifacts = Vec::new();
    for (r, m) in measures.iter().enumerate() {
        artifacts.push((format!("points-{r:04}.txt"), crate::process::to_text(m).into_bytes()));
    }
    Ok(RunOutput::assemble("sample", config, artifacts))
}

/// `scene` subcommand: JSON-lines component summaries per replica, plus
/// run-length-encoded raster dumps when `experiment.rle = 1`.
pub fn run_scene(config: &RunConfig) -> Result<RunOutput> {
    let want_rle = config.extra.get("rle").map(|v| v == "1").unwrap_or(false);
    let outputs = run_replicas(config, |r| {
        let scene = config.build_scene(r)?;
        let rle = if want_rle { Some(scene.raster_rle()) } else { None };
        Ok((scene.summary_jsonl(), rle))
    })?;
    let mut artifacts = Vec::new();
    for (r, (text, rle)) in outputs.iter().enumerate() {
        artifacts.push((format!("scene-{r:04}.jsonl"), text.clone().into_bytes()));
        if let Some(rle) = rle {
            artifacts.push((format!("raster-{r:04}.rle"), rle.clone().into_bytes()));
        }
    }
    Ok(RunOutput::assemble("scene", config, artifacts))
}

/// `forest` subcommand: edge lists plus per-replica stats.
pub fn run_forest(config: &RunConfig) -> Result<RunOutput> {
    let outputs = run_replicas(config, |r| {
        let scene = config.build_scene(r)?;
        let aux = config.sample_aux(r)?;
        let trifs = forest::find_trifurcations(&scene, &aux, config.trif_scale, config.phase)?;
        let f = forest::build_forest(&scene, trifs, config.phase)?;
        let stats_row = serde_json::json!({
            "replica": r,
            "vertices": f.n(),
            "edges": f.edges.len(),
            "interior_complete": f.interior_complete.iter().filter(|&&b| b).count(),
        });
        Ok((f.edges_text(), stats_row.to_string()))
    })?;
    let mut artifacts = Vec::new();
    let mut stats_text = String::new();
    for (r, (edges, row)) in outputs.iter().enumerate() {
        artifacts.push((format!("forest-{r:04}.txt"), edges.clone().into_bytes()));
        stats_text.push_str(row);
        stats_text.push('\n');
    }
    artifacts.push(("forest-stats.jsonl".into(), stats_text.into_bytes()));
    Ok(RunOutput::assemble("forest", config, artifacts))
}

/// `walk` subcommand: stationarity diagnostic over the replica ensemble.
pub fn run_walk(config: &RunConfig) -> Result<RunOutput> {
    let n_max = config.extra_usize("n_max", 10)?;
    let anchors_per_seed = config.extra_usize("anchors", 32)?;
    let walks_per_anchor = config.extra_usize("walks_per_anchor", 2)?;
    let obs = DegreeObservable { max_degree: 12 };
    let per_seed = run_replicas(config, |r| {
        let scene = config.build_scene(r)?;
        let aux = config.sample_aux(r)?;
        let trifs = forest::find_trifurcations(&scene, &aux, config.trif_scale, config.phase)?;
        let f = forest::build_forest(&scene, trifs, config.phase)?;
        let graph = WalkGraph::from_forest(&f);
        let mut diag = StationarityDiagnostic::new(n_max, obs.bins());
        let mut rng = stream(config.master_seed, r, "walks");
        let mut traces = String::new();
        for a in 0..anchors_per_seed {
            let anchor = config
                .space
                .sample_uniform_ball(&crate::geometry::Point::ORIGIN, config.analysis_radius, &mut rng)?;
            for _ in 0..walks_per_anchor {
                match walks::two_sided_walk(&graph, config.space, &anchor, n_max, &mut rng) {
                    None => diag.record_rejected(),
                    Some(w) => {
                        diag.add_walk(&graph, &w, &obs);
                        let path: Vec<u32> = (-(n_max as i64)..=n_max as i64).map(|n| w.at(n)).collect();
                        let _ = writeln!(
                            traces,
                            "{}",
                            serde_json::json!({"replica": r, "anchor": a, "path": path})
                        );
                    }
                }
            }
        }
        Ok((diag, traces))
    })?;
    let mut merged = StationarityDiagnostic::new(n_max, obs.bins());
    let mut traces_all = String::new();
    for (d, t) in &per_seed {
        merged.merge(d);
        traces_all.push_str(t);
    }
    let summary = serde_json::json!({
        "accepted": merged.accepted,
        "rejected": merged.rejected,
        "effective_samples": merged.effective_samples(),
        "max_pairwise_tv": merged.max_pairwise_tv(),
        "max_reversal_tv": merged.max_reversal_tv(),
    });
    let artifacts = vec![
        ("walk-diagnostic.csv".to_string(), merged.to_csv("degree").into_bytes()),
        ("walk-tv-matrix.csv".to_string(), merged.tv_matrix_csv().into_bytes()),
        ("walk-traces.jsonl".to_string(), traces_all.into_bytes()),
        ("walk-summary.json".to_string(), summary.to_string().into_bytes()),
    ];
    Ok(RunOutput::assemble("walk", config, artifacts))
}

fn csv_artifact(header: &str, rows: &[String]) -> Vec<u8> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s.into_bytes()
}

fn record_artifact(
    name: &str,
    config: &RunConfig,
    per_seed: Vec<serde_json::Value>,
    summary: serde_json::Value,
) -> (String, Vec<u8>) {
    // echo the execution-normalized config so records are byte-identical at
    // any thread count
    let mut echo = config.clone();
    echo.threads = 1;
    let record = experiments::ExperimentRecord {
        name: name.to_string(),
        config: serde_json::to_value(&echo).expect("config serializes"),
        master_seed: config.master_seed,
        per_seed,
        summary,
    };
    (format!("{name}-records.jsonl"), record.to_jsonl().into_bytes())
}

/// `experiment` subcommand dispatch.
pub fn run_experiment(config: &RunConfig, which: &str) -> Result<RunOutput> {
    match which {
        "pivotal" => run_pivotal(config),
        "indist" => run_indist(config),
        "monotone" => run_monotone(config),
        "connectivity" => run_connectivity(config),
        "percolation" => run_percolation(config),
        "transience" => run_transience(config),
        other => Err(Error::invalid_config(format!("unknown experiment '{other}'"))),
    }
}

fn run_pivotal(config: &RunConfig) -> Result<RunOutput> {
    let delta = config.extra_f64("delta", 0.125)?;
    let delta_big = config.extra_f64("delta_vacant", 2.0)?;
    let r_star = config.extra_f64("radius_cap", config.radius_law.max_radius())?;
    let samples = config.extra_usize("samples", 20)?;
    let prop = ComponentProperty::boundary_contact();
    let rows = run_replicas(config, |r| {
        let scene = config.build_scene(r)?;
        let probes = config.sample_probes(r)?;
        let ctx = EvalCtx { master: config.master_seed, replica: r, aux: None, eta: None };
        let occ = if scene.component_of(&crate::geometry::Point::ORIGIN, Phase::Occupied).is_some() {
            pivotal::pivotal_scan_occupied(&scene, &prop, &probes, delta, samples, &config.radius_law, Some(r_star), &ctx)?
        } else {
            Vec::new()
        };
        let vac = if scene.component_of(&crate::geometry::Point::ORIGIN, Phase::Vacant).is_some() {
            pivotal::pivotal_scan_vacant(&scene, &prop, &probes, delta_big, r_star, &ctx)?
        } else {
            Vec::new()
        };
        let mut out = Vec::new();
        for h in occ {
            out.push(format!("{r},occupied,{},{},{}", h.z_index, h.flip_fraction, h.pivotal));
        }
        for h in vac {
            out.push(format!("{r},vacant,{},{},{}", h.z_index, f64::from(u8::from(h.flipped)), h.flipped));
        }
        Ok(out)
    })?;
    let per_seed: Vec<serde_json::Value> = rows
        .iter()
        .enumerate()
        .map(|(r, lines)| serde_json::json!({"seed": r, "hits": lines.len()}))
        .collect();
    let all: Vec<String> = rows.into_iter().flatten().collect();
    let pivotal_total = all.iter().filter(|l| l.ends_with("true")).count();
    let artifacts = vec![
        (
            "pivotal.csv".to_string(),
            csv_artifact("seed,phase,z_index,flip_fraction,pivotal", &all),
        ),
        record_artifact("pivotal", config, per_seed, serde_json::json!({"pivotal_probes": pivotal_total})),
    ];
    Ok(RunOutput::assemble("experiment-pivotal", config, artifacts))
}

fn run_indist(config: &RunConfig) -> Result<RunOutput> {
    let count_threshold = config.extra_usize("cell_count_threshold", 0)?;
    let prop = if count_threshold > 0 {
        ComponentProperty::cell_count_at_least(count_threshold as u32)
    } else {
        ComponentProperty::boundary_contact()
    };
    let rows = run_replicas(config, |r| {
        let scene = config.build_scene(r)?;
        let ctx = EvalCtx { master: config.master_seed, replica: r, aux: None, eta: None };
        let rec = experiments::indistinguishability_scene(&scene, &prop, config.phase, &ctx, r)?;
        Ok(rec)
    })?;
    let mut lines = Vec::new();
    let mut mixed = 0usize;
    for rec in &rows {
        if rec.mixed {
            mixed += 1;
        }
        for (id, cells, value) in &rec.components {
            lines.push(format!("{},{},{},{},{}", rec.seed, id, cells, true, value));
        }
    }
    // stratify mixing by component size: boundary artifacts concentrate in
    // small components, so report mixing among large components separately
    let mut all_counts: Vec<u32> = rows.iter().flat_map(|r| r.components.iter().map(|c| c.1)).collect();
    all_counts.sort_unstable();
    let median_cells = all_counts.get(all_counts.len() / 2).copied().unwrap_or(0);
    let mixed_large = rows
        .iter()
        .filter(|r| {
            let large: Vec<bool> = r
                .components
                .iter()
                .filter(|c| c.1 >= median_cells)
                .map(|c| c.2)
                .collect();
            large.iter().any(|&v| v) && large.iter().any(|&v| !v)
        })
        .count();
    let summary = serde_json::json!({
        "property": prop.name,
        "seeds": rows.len(),
        "mixed_rate": mixed as f64 / rows.len() as f64,
        "median_cell_count": median_cells,
        "mixed_rate_large_components": mixed_large as f64 / rows.len() as f64,
    });
    let per_seed: Vec<serde_json::Value> = rows.iter().map(|r| serde_json::to_value(r).unwrap()).collect();
    let artifacts = vec![
        (
            "indist.csv".to_string(),
            csv_artifact("seed,component_id,cell_count,boundary,property_value", &lines),
        ),
        ("indist-summary.json".to_string(), summary.to_string().into_bytes()),
        record_artifact("indist", config, per_seed, summary.clone()),
    ];
    Ok(RunOutput::assemble("experiment-indist", config, artifacts))
}

fn run_monotone(config: &RunConfig) -> Result<RunOutput> {
    let lambda_low = config.extra_f64("lambda_low", config.lambda * 0.7)?;
    let lambda_high = config.extra_f64("lambda_high", config.lambda)?;
    let rows = run_replicas(config, |r| {
        experiments::monotonicity_seed(
            config.space,
            lambda_low,
            lambda_high,
            config.analysis_radius,
            config.halo,
            config.resolution,
            &config.radius_law,
            config.master_seed,
            r,
        )
    })?;
    let mut lines = Vec::new();
    let mut violations = 0usize;
    for rec in &rows {
        if rec.crossing_low == 1 && rec.crossing_high != 1 {
            violations += 1;
        }
        lines.push(format!("{},{},{},{}", rec.seed, rec.inclusion_ok, rec.crossing_low, rec.crossing_high));
    }
    let summary = serde_json::json!({
        "lambda_low": lambda_low,
        "lambda_high": lambda_high,
        "inclusion_violations": rows.iter().filter(|r| !r.inclusion_ok).count(),
        "uniqueness_violation_rate": violations as f64 / rows.len() as f64,
    });
    let per_seed: Vec<serde_json::Value> = rows.iter().map(|r| serde_json::to_value(r).unwrap()).collect();
    let artifacts = vec![
        ("monotone.csv".to_string(), csv_artifact("seed,inclusion_ok,crossing_low,crossing_high", &lines)),
        ("monotone-summary.json".to_string(), summary.to_string().into_bytes()),
        record_artifact("monotone", config, per_seed, summary.clone()),
    ];
    Ok(RunOutput::assemble("experiment-monotone", config, artifacts))
}

fn run_connectivity(config: &RunConfig) -> Result<RunOutput> {
    let default_grid: Vec<f64> = (0..6).map(|i| i as f64).collect();
    let grid = config.extra_f64_list("distances", &default_grid)?;
    let rows = run_replicas(config, |r| {
        let scene = config.build_scene(r)?;
        let mut rng = stream(config.master_seed, r, "connectivity");
        experiments::connectivity_seed(&scene, config.phase, &grid, &mut rng)
    })?;
    let n = rows.len() as f64;
    let mut lines = Vec::new();
    for (ti, &t) in grid.iter().enumerate() {
        let hits = rows.iter().filter(|row| row[ti]).count() as f64;
        let tau = hits / n;
        let se = (tau * (1.0 - tau) / n).sqrt();
        lines.push(format!("{t},{tau},{},{},{}", (tau - 1.96 * se).max(0.0), (tau + 1.96 * se).min(1.0), rows.len()));
    }
    let per_seed: Vec<serde_json::Value> = rows
        .iter()
        .enumerate()
        .map(|(r, row)| serde_json::json!({"seed": r, "connected": row}))
        .collect();
    let artifacts = vec![
        (
            "connectivity.csv".to_string(),
            csv_artifact("t,tau_hat,ci_lo,ci_hi,n_seeds", &lines),
        ),
        record_artifact("connectivity", config, per_seed, serde_json::json!({"distances": grid})),
    ];
    Ok(RunOutput::assemble("experiment-connectivity", config, artifacts))
}

fn run_percolation(config: &RunConfig) -> Result<RunOutput> {
    let default_grid: Vec<f64> = (1..=8).map(|i| i as f64 * 0.4).collect();
    let grid = config.extra_f64_list("lambda_grid", &default_grid)?;
    let eta_lambda = *grid.last().unwrap();
    let rows = run_replicas(config, |r| {
        let scene = config.build_scene(r)?;
        let mut rng = stream(config.master_seed, r, "eta");
        let eta = sample_poisson(config.space, config.analysis_radius, config.halo, eta_lambda, &RadiusLaw::Constant(1.0), &mut rng)?;
        // the largest boundary-contacting component of the phase
        let target = scene
            .components(config.phase)
            .iter()
            .filter(|c| c.boundary_contact)
            .max_by_key(|c| c.cell_count)
            .map(|c| c.id);
        match target {
            None => Ok(None),
            Some(id) => {
                let out = percolation::percolation_on_component(&scene, config.phase, id, &grid, &eta)?;
                Ok(Some(out))
            }
        }
    })?;
    let mut lines = Vec::new();
    for (ti, &lambda) in grid.iter().enumerate() {
        let present: Vec<&percolation::ComponentPercolation> = rows.iter().flatten().collect();
        let frac = present.iter().filter(|p| p.percolates[ti]).count() as f64 / present.len().max(1) as f64;
        lines.push(format!("{lambda},{frac},{}", config.analysis_radius));
    }
    let stars: Vec<String> = rows
        .iter()
        .enumerate()
        .map(|(r, row)| match row {
            Some(p) => format!("{r},{}", p.lambda_star.map_or("inf".into(), |l| l.to_string())),
            None => format!("{r},skip"),
        })
        .collect();
    let per_seed: Vec<serde_json::Value> = rows
        .iter()
        .enumerate()
        .map(|(r, row)| match row {
            Some(p) => serde_json::json!({"seed": r, "lambda_star": p.lambda_star, "vertices": p.n_vertices_max, "edges": p.n_edges_max}),
            None => serde_json::json!({"seed": r, "skipped": true}),
        })
        .collect();
    let artifacts = vec![
        ("percolation.csv".to_string(), csv_artifact("lambda,percolates_fraction,L_a", &lines)),
        ("percolation-stars.csv".to_string(), csv_artifact("seed,lambda_star", &stars)),
        record_artifact("percolation", config, per_seed, serde_json::json!({"lambda_grid": grid})),
    ];
    Ok(RunOutput::assemble("experiment-percolation", config, artifacts))
}

fn run_transience(config: &RunConfig) -> Result<RunOutput> {
    let rows = run_replicas(config, |r| {
        let scene = config.build_scene(r)?;
        transience_seed_with_export(&scene, config.master_seed, r)
    })?;
    let lines: Vec<String> = rows
        .iter()
        .enumerate()
        .map(|(r, (t, _))| {
            format!(
                "{r},{},{},{},{},{},{}",
                t.n_atoms, t.backbone_vertices, t.flows, t.max_e1, t.max_incoming_mass, t.max_kirchhoff_residual
            )
        })
        .collect();
    let per_seed: Vec<serde_json::Value> = rows.iter().map(|(r, _)| serde_json::to_value(r).unwrap()).collect();
    let worst_e1 = rows.iter().map(|(r, _)| r.max_e1).fold(0.0, f64::max);
    let mut artifacts = vec![
        (
            "transience.csv".to_string(),
            csv_artifact("seed,atoms,backbone_vertices,flows,max_e1,max_incoming_mass,max_kirchhoff", &lines),
        ),
        record_artifact("transience", config, per_seed, serde_json::json!({"worst_e1": worst_e1})),
    ];
    for (r, (_, flows)) in rows.iter().enumerate() {
        artifacts.push((format!("flows-{r:04}.txt"), flows.clone().into_bytes()));
    }
    Ok(RunOutput::assemble("experiment-transience", config, artifacts))
}

/// The ball-graph edge list of a scene with derived 64-bit labels.
pub fn ball_graph_edges(scene: &Scene) -> Vec<msf::LabeledEdge> {
    let atoms = &scene.measure.atoms;
    let mut edges = Vec::new();
    let mut near = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        scene.atom_index.query(&a.point, a.radius + scene.max_radius, &mut near);
        near.sort_unstable();
        for &j in &near {
            let j = j as usize;
            if j > i && scene.space.within(&a.point, &atoms[j].point, a.radius + atoms[j].radius) {
                edges.push(msf::LabeledEdge {
                    a: i as u32,
                    b: j as u32,
                    label: msf::derive_edge_label(a.label, atoms[j].label),
                });
            }
        }
    }
    edges
}

/// Walk view of the scene's labeled minimal spanning forest. Vertices beyond
/// `trust_radius` are marked incomplete (their neighborhoods feel the
/// sampling boundary) so walks censor there.
pub fn msf_walk_graph(scene: &Scene, trust_radius: f64) -> Result<WalkGraph> {
    let atoms = &scene.measure.atoms;
    let edges = ball_graph_edges(scene);
    let kept = msf::minimal_spanning_forest(atoms.len(), &edges)?;
    let forest_edges: Vec<(u32, u32)> = kept.iter().map(|&k| (edges[k].a, edges[k].b)).collect();
    let tree = flow::TreeGraph::from_edges(atoms.len(), &forest_edges)?;
    Ok(WalkGraph {
        positions: atoms.iter().map(|a| a.point).collect(),
        adj: tree.adj,
        interior_complete: atoms.iter().map(|a| scene.space.radial(&a.point) <= trust_radius).collect(),
    })
}

/// Flow-energy report of one scene's ball graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransienceReport {
    pub n_atoms: usize,
    pub backbone_vertices: usize,
    pub flows: usize,
    pub max_e1: f64,
    pub max_incoming_mass: f64,
    pub max_kirchhoff_residual: f64,
    pub min_escape: f64,
}

/// Ball graph -> labeled MSF -> backbone -> unit flows from every branch
/// vertex. Attachments are the atoms beyond the analysis sphere.
pub fn transience_seed(scene: &Scene, master: u64, replica: u64) -> Result<TransienceReport> {
    Ok(transience_seed_with_export(scene, master, replica)?.0)
}

/// [`transience_seed`] plus the `root_id vertex_id theta` flow export text.
pub fn transience_seed_with_export(scene: &Scene, master: u64, replica: u64) -> Result<(TransienceReport, String)> {
    let atoms = &scene.measure.atoms;
    let n = atoms.len();
    let edges = ball_graph_edges(scene);
    let kept = msf::minimal_spanning_forest(n, &edges)?;
    let forest_edges: Vec<(u32, u32)> = kept.iter().map(|&i| (edges[i].a, edges[i].b)).collect();
    let tree = flow::TreeGraph::from_edges(n, &forest_edges)?;
    let attachments: Vec<u32> = (0..n as u32)
        .filter(|&i| scene.space.radial(&atoms[i as usize].point) >= scene.analysis_radius)
        .collect();
    let bb = flow::backbone(&tree, &attachments);
    let roots = bb.trifurcations();
    let mut flows = Vec::new();
    for &root in &roots {
        flows.push(flow::unit_flow(&bb, root)?);
    }
    let max_e1 = flows.iter().map(|f| f.e1).fold(0.0, f64::max);
    let max_kirchhoff = flows.iter().map(|f| f.kirchhoff_residual).fold(0.0, f64::max);
    let max_mass = flow::incoming_mass(&bb, &flows);
    // escape probability from up to three roots
    let graph = WalkGraph {
        positions: bb.vertices.iter().map(|&v| atoms[v as usize].point).collect(),
        adj: bb.adj.clone(),
        interior_complete: vec![true; bb.vertices.len()],
    };
    let censor: Vec<bool> = (0..bb.vertices.len() as u32).map(|v| bb.attachments.contains(&v)).collect();
    let mut min_escape = f64::INFINITY;
    let mut rng = stream(master, replica, "transience-escape");
    for &root in roots.iter().take(3) {
        let (p, _) = walks::escape_probability(&graph, root, 2000, 4000, Some(&censor), &mut rng);
        min_escape = min_escape.min(p);
    }
    let report = TransienceReport {
        n_atoms: n,
        backbone_vertices: bb.vertices.len(),
        flows: flows.len(),
        max_e1,
        max_incoming_mass: max_mass,
        max_kirchhoff_residual: max_kirchhoff,
        min_escape: if min_escape.is_finite() { min_escape } else { 0.0 },
    };
    Ok((report, flow::flows_text(&bb, &flows)))
}

/// Data dictionary describing every CSV column the lab emits.
pub fn data_dictionary() -> String {
    let mut s = String::new();
    let mut table = |name: &str, cols: &[(&str, &str)]| {
        let _ = writeln!(s, "## {name}");
        for (c, d) in cols {
            let _ = writeln!(s, "- `{c}`: {d}");
        }
        let _ = writeln!(s);
    };
    table(
        "connectivity.csv",
        &[
            ("t", "geodesic distance between the origin and the probe point"),
            ("tau_hat", "fraction of seeds with both points in one component"),
            ("ci_lo", "lower 95% normal CI bound"),
            ("ci_hi", "upper 95% normal CI bound"),
            ("n_seeds", "number of seeds pooled"),
        ],
    );
    table(
        "walk-diagnostic.csv",
        &[
            ("n", "walk time (negative side from the backward walk)"),
            ("observable", "observable name (degree)"),
            ("bin", "observable bin"),
            ("count", "pooled weighted mass"),
        ],
    );
    table(
        "walk-tv-matrix.csv",
        &[
            ("n_a", "first walk time"),
            ("n_b", "second walk time"),
            ("tv", "total-variation distance between the two empirical distributions"),
        ],
    );
    table(
        "percolation.csv",
        &[
            ("lambda", "driving intensity of the inner Boolean model"),
            ("percolates_fraction", "fraction of seeds whose giant component carries a rim-touching cluster"),
            ("L_a", "analysis radius"),
        ],
    );
    table(
        "pivotal.csv",
        &[
            ("seed", "replica index"),
            ("phase", "occupied or vacant"),
            ("z_index", "probe atom index"),
            ("flip_fraction", "fraction of insertions flipping the origin component's type (occupied); 0/1 for vacant"),
            ("pivotal", "whether the probe ball is pivotal"),
        ],
    );
    table(
        "monotone.csv",
        &[
            ("seed", "replica index"),
            ("inclusion_ok", "cell-wise nesting of the coupled occupied sets"),
            ("crossing_low", "crossing components at the thinned intensity"),
            ("crossing_high", "crossing components at the full intensity"),
        ],
    );
    table(
        "indist.csv",
        &[
            ("seed", "replica index"),
            ("component_id", "component id within the seed"),
            ("cell_count", "raster cells of the component"),
            ("boundary", "always true: harness population is boundary-contacting"),
            ("property_value", "the component's type"),
        ],
    );
    table(
        "transience.csv",
        &[
            ("seed", "replica index"),
            ("atoms", "ball-graph vertices"),
            ("backbone_vertices", "vertices surviving the backbone pruning"),
            ("flows", "unit flows computed (one per branch vertex)"),
            ("max_e1", "largest branch-vertex energy; bounded by 2"),
            ("max_incoming_mass", "largest degree-2 incoming mass; bounded by 1"),
            ("max_kirchhoff", "largest conservation residual"),
        ],
    );
    s
}

/// Convenience: stderr of the mean of a 0/1 sequence.
pub fn binomial_se(successes: usize, n: usize) -> f64 {
    let p = successes as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
[model]
space = euclidean2
lambda = 0.8
radius = constant 1
[window]
analysis_radius = 6
halo = 4
resolution = 0.25
[forest]
trif_scale = 1.5
[run]
seed = 11
replicas = 2
threads = 1
";

    #[test]
    fn config_parses_and_roundtrips() {
        let cfg = RunConfig::parse(BASE).unwrap();
        assert_eq!(cfg.space, Space::Euclidean2);
        assert_eq!(cfg.replicas, 2);
        let text = cfg.to_text();
        let cfg2 = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.to_text(), cfg2.to_text());
    }

    #[test]
    fn config_rejects_coarse_resolution_with_line_info() {
        let bad = BASE.replace("resolution = 0.25", "resolution = 0.3");
        let err = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("window.resolution"), "{err}");
        assert!(err.contains("min_radius/4"), "{err}");
    }

    #[test]
    fn config_rejects_thin_halo() {
        let bad = BASE.replace("halo = 4", "halo = 2");
        let err = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("halo"), "{err}");
    }

    #[test]
    fn config_reports_bad_line() {
        let bad = format!("{BASE}\n[experiment]\nname value-without-equals\n");
        let err = ConfigMap::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn sample_run_is_deterministic_across_threads() {
        let cfg1 = RunConfig::parse(BASE).unwrap();
        let mut cfg4 = cfg1.clone();
        cfg4.threads = 4;
        let out1 = run_sample(&cfg1).unwrap();
        let out4 = run_sample(&cfg4).unwrap();
        assert_eq!(out1.manifest_json(), out4.manifest_json());
        assert_eq!(out1.artifacts, out4.artifacts);
    }

    #[test]
    fn scene_and_connectivity_runs() {
        let cfg = RunConfig::parse(BASE).unwrap();
        let out = run_scene(&cfg).unwrap();
        assert_eq!(out.artifacts.len(), 2);
        let out = run_experiment(&cfg, "connectivity").unwrap();
        assert_eq!(out.artifacts[0].0, "connectivity.csv");
        let text = String::from_utf8(out.artifacts[0].1.clone()).unwrap();
        assert!(text.starts_with("t,tau_hat,ci_lo,ci_hi,n_seeds"));
    }

    #[test]
    fn indist_run_emits_contracted_columns() {
        let cfg = RunConfig::parse(BASE).unwrap();
        let out = run_experiment(&cfg, "indist").unwrap();
        let csv = String::from_utf8(out.artifacts[0].1.clone()).unwrap();
        assert!(csv.starts_with("seed,component_id,cell_count,boundary,property_value"));
        let summary = String::from_utf8(out.artifacts[1].1.clone()).unwrap();
        assert!(summary.contains("mixed_rate"));
        assert!(summary.contains("mixed_rate_large_components"));
        assert!(run_experiment(&cfg, "nonsense").is_err());
    }
}
