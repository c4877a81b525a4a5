//! Marked point measures and their local modification operations.
//!
//! A [`PointMeasure`] is a simple counting measure: a list of atoms with
//! pairwise distinct points, each carrying a radius mark and a `[0,1]`
//! label. Labels are attached once at sampling time and serve both as
//! thinning marks for couplings and as tie-breaking labels downstream;
//! values are immutable, so every modification returns a new measure.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Space};

/// One atom of a marked point measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Point,
    pub radius: f64,
    pub label: f64,
}

/// Law of the i.i.d. radius marks. Bounded support is required so that the
/// number of balls meeting any fixed ball is finite by construction;
/// unbounded laws must carry an explicit cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadiusLaw {
    Constant(f64),
    /// Finitely many values with probabilities summing to 1.
    BoundedIid(Vec<(f64, f64)>),
    /// Exponential(rate) conditioned on `value <= cap`.
    ExponentialTruncated { rate: f64, cap: f64 },
}

impl RadiusLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            RadiusLaw::Constant(r) => {
                if *r > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid_input("constant radius must be > 0"))
                }
            }
            RadiusLaw::BoundedIid(pairs) => {
                if pairs.is_empty() || pairs.iter().any(|(v, p)| *v <= 0.0 || *p < 0.0) {
                    return Err(Error::invalid_input("bounded radius law needs positive values and probabilities"));
                }
                let total: f64 = pairs.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid_input(format!("radius probabilities sum to {total}, not 1")));
                }
                Ok(())
            }
            RadiusLaw::ExponentialTruncated { rate, cap } => {
                if *rate > 0.0 && *cap > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid_input("truncated exponential needs rate > 0 and cap > 0"))
                }
            }
        }
    }

    /// Largest radius the law can produce.
    pub fn max_radius(&self) -> f64 {
        match self {
            RadiusLaw::Constant(r) => *r,
            RadiusLaw::BoundedIid(pairs) => pairs.iter().map(|(v, _)| *v).fold(0.0, f64::max),
            RadiusLaw::ExponentialTruncated { cap, .. } => *cap,
        }
    }

    /// Smallest radius the law can produce (used by raster resolution checks).
    pub fn min_radius(&self) -> f64 {
        match self {
            RadiusLaw::Constant(r) => *r,
            RadiusLaw::BoundedIid(pairs) => pairs.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min),
            RadiusLaw::ExponentialTruncated { .. } => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            RadiusLaw::Constant(r) => *r,
            RadiusLaw::BoundedIid(pairs) => {
                let mut u: f64 = rng.gen();
                for (v, p) in pairs {
                    if u < *p {
                        return *v;
                    }
                    u -= p;
                }
                pairs.last().unwrap().0
            }
            RadiusLaw::ExponentialTruncated { rate, cap } => {
                // Inverse CDF of Exponential(rate) conditioned on <= cap.
                let u: f64 = rng.gen();
                let f_cap = 1.0 - (-rate * cap).exp();
                -(1.0 - u * f_cap).ln() / rate
            }
        }
    }
}

/// A simple counting measure with radius and label marks, together with the
/// geodesic ball it was sampled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMeasure {
    pub space: Space,
    /// Radius of the sampling ball `B(0, sample_radius)`.
    pub sample_radius: f64,
    pub atoms: Vec<Atom>,
    /// Intensity used at sampling time, when known.
    pub lambda: Option<f64>,
    /// Seed recorded at sampling time, when known.
    pub seed: Option<u64>,
}

impl PointMeasure {
    pub fn empty(space: Space, sample_radius: f64) -> PointMeasure {
        PointMeasure { space, sample_radius, atoms: Vec::new(), lambda: None, seed: None }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Count atoms with point inside the closed ball `B(center, r)`.
    pub fn count_in_ball(&self, center: &Point, r: f64) -> usize {
        self.atoms.iter().filter(|a| self.space.distance(&a.point, center) <= r).count()
    }

    fn has_point(&self, p: &Point) -> bool {
        self.atoms.iter().any(|a| a.point == *p)
    }
}

/// Sample a Poisson point measure with intensity `lambda` per unit volume in
/// `B(0, window_radius + halo)`, with i.i.d. radii and uniform labels.
pub fn sample_poisson<R: Rng + ?Sized>(
    space: Space,
    window_radius: f64,
    halo: f64,
    lambda: f64,
    radius_law: &RadiusLaw,
    rng: &mut R,
) -> Result<PointMeasure> {
    if !(lambda > 0.0) {
        return Err(Error::invalid_input(format!("intensity must be > 0, got {lambda}")));
    }
    if !(window_radius >= 0.0) || !(halo >= 0.0) {
        return Err(Error::invalid_input("window radius and halo must be >= 0"));
    }
    radius_law.validate()?;
    let r_total = window_radius + halo;
    if space == Space::HyperbolicPlane && r_total > crate::geometry::MAX_HYPERBOLIC_WINDOW {
        return Err(Error::invalid_config(format!(
            "hyperbolic window {r_total} exceeds the supported cap {}",
            crate::geometry::MAX_HYPERBOLIC_WINDOW
        )));
    }
    let mean = lambda * space.ball_volume(r_total)?;
    let n = if mean == 0.0 {
        0
    } else {
        Poisson::new(mean).map_err(|e| Error::invalid_input(format!("{e}")))?.sample(rng) as usize
    };
    let mut atoms = Vec::with_capacity(n);
    let mut measure = PointMeasure { space, sample_radius: r_total, atoms: Vec::new(), lambda: Some(lambda), seed: None };
    for _ in 0..n {
        let mut point = space.sample_uniform_ball(&Point::ORIGIN, r_total, rng)?;
        // Simplicity: resample on an exact coordinate collision.
        while measure.has_point(&point) || atoms_contains(&atoms, &point) {
            point = space.sample_uniform_ball(&Point::ORIGIN, r_total, rng)?;
        }
        atoms.push(Atom { point, radius: radius_law.sample(rng), label: rng.gen() });
    }
    measure.atoms = atoms;
    Ok(measure)
}

fn atoms_contains(atoms: &[Atom], p: &Point) -> bool {
    atoms.iter().any(|a| a.point == *p)
}

/// `ω + δ_{(x, radius, label)}`; the input is unchanged.
pub fn insert_atom(measure: &PointMeasure, x: Point, radius: f64, label: f64) -> Result<PointMeasure> {
    if measure.has_point(&x) {
        return Err(Error::invalid_input("insertion would duplicate an existing atom point"));
    }
    if !(radius > 0.0) || !(0.0..=1.0).contains(&label) {
        return Err(Error::invalid_input("insertion needs radius > 0 and label in [0,1]"));
    }
    let mut out = measure.clone();
    out.atoms.push(Atom { point: x, radius, label });
    out
        .space
        .chart_valid(&x)
        .then_some(out)
        .ok_or_else(|| Error::invalid_input("insertion point is not chart-valid"))
}

/// Remove the atoms with point in `B(center, r)` and, when `radius_cap` is
/// set, radius at most the cap. Deleting balls only enlarges the vacant set.
pub fn delete_in_ball(
    measure: &PointMeasure,
    center: &Point,
    r: f64,
    radius_cap: Option<f64>,
) -> Result<PointMeasure> {
    if !(r > 0.0) {
        return Err(Error::invalid_input("deletion radius must be > 0"));
    }
    let mut out = measure.clone();
    out.atoms.retain(|a| {
        let inside = measure.space.distance(&a.point, center) <= r;
        let capped = radius_cap.is_none_or(|cap| a.radius <= cap);
        !(inside && capped)
    });
    Ok(out)
}

/// Keep the atoms with label at most `t`. Thinning a Poisson(λ) measure
/// yields Poisson(tλ), and thinnings at increasing thresholds are nested.
pub fn thin_by_label(measure: &PointMeasure, t: f64) -> Result<PointMeasure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid_input(format!("thinning threshold must be in [0,1], got {t}")));
    }
    let mut out = measure.clone();
    out.atoms.retain(|a| a.label <= t);
    out.lambda = measure.lambda.map(|l| l * t);
    Ok(out)
}

/// Serialize to the line-oriented text format: a `#`-prefixed header
/// followed by one atom per line, `x y [z] radius label`. Floats print in
/// shortest round-trip form, so parsing back is bit-exact.
pub fn to_text(measure: &PointMeasure) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# perclab point-measure v1");
    let _ = writeln!(s, "# space {}", measure.space.name());
    let _ = writeln!(s, "# window {}", measure.sample_radius);
    if let Some(l) = measure.lambda {
        let _ = writeln!(s, "# lambda {l}");
    }
    if let Some(seed) = measure.seed {
        let _ = writeln!(s, "# seed {seed}");
    }
    let _ = writeln!(s, "# atoms {}", measure.atoms.len());
    let three_d = measure.space.dim() == 3;
    for a in &measure.atoms {
        if three_d {
            let _ = writeln!(s, "{} {} {} {} {}", a.point.x, a.point.y, a.point.z, a.radius, a.label);
        } else {
            let _ = writeln!(s, "{} {} {} {}", a.point.x, a.point.y, a.radius, a.label);
        }
    }
    s
}

/// Parse the text format produced by [`to_text`].
pub fn from_text(text: &str) -> Result<PointMeasure> {
    let mut space = None;
    let mut window = None;
    let mut lambda = None;
    let mut seed = None;
    let mut atoms = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::parse(format!("line {}: {msg}", lineno + 1));
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            match it.next() {
                Some("space") => {
                    space = Some(Space::from_name(it.next().ok_or_else(|| err("missing space kind"))?)?)
                }
                Some("window") => {
                    window = Some(
                        it.next()
                            .ok_or_else(|| err("missing window"))?
                            .parse::<f64>()
                            .map_err(|_| err("bad window value"))?,
                    )
                }
                Some("lambda") => {
                    lambda = Some(
                        it.next()
                            .ok_or_else(|| err("missing lambda"))?
                            .parse::<f64>()
                            .map_err(|_| err("bad lambda value"))?,
                    )
                }
                Some("seed") => {
                    seed = Some(
                        it.next()
                            .ok_or_else(|| err("missing seed"))?
                            .parse::<u64>()
                            .map_err(|_| err("bad seed value"))?,
                    )
                }
                _ => {}
            }
            continue;
        }
        let space = space.ok_or_else(|| err("atom line before the space header"))?;
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|_| err(&format!("bad float '{f}'"))))
            .collect::<Result<_>>()?;
        let want = space.dim() + 2;
        if fields.len() != want {
            return Err(err(&format!("expected {want} fields, got {}", fields.len())));
        }
        let (point, radius, label) = if space.dim() == 3 {
            (Point::new3(fields[0], fields[1], fields[2]), fields[3], fields[4])
        } else {
            (Point::new2(fields[0], fields[1]), fields[2], fields[3])
        };
        atoms.push(Atom { point, radius, label });
    }
    Ok(PointMeasure {
        space: space.ok_or_else(|| Error::parse("missing space header"))?,
        sample_radius: window.ok_or_else(|| Error::parse("missing window header"))?,
        atoms,
        lambda,
        seed,
    })
}
