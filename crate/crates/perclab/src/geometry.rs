//! Ambient spaces: metric, volume, uniform sampling and isometries.
//!
//! Three spaces are supported, each in a single chart: the Euclidean plane,
//! Euclidean 3-space, and the hyperbolic plane of curvature −1 in the open
//! unit Poincaré disk. Points are chart coordinates; hyperbolic quantities
//! are computed through the closed forms of the disk model
//! (`d(p,q) = arcosh(1 + 2|p−q|²/((1−|p|²)(1−|q|²)))`, disk area
//! `2π(cosh r − 1)`, Möbius automorphisms for isometries).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chart points in ℍ² are clamped to `|z| ≤ 1 − CHART_CLAMP`; window radii
/// are capped so that double precision suffices in the disk chart.
pub const CHART_CLAMP: f64 = 1e-12;

/// Largest supported window radius in ℍ².
pub const MAX_HYPERBOLIC_WINDOW: f64 = 12.0;

/// The ambient symmetric space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Euclidean2,
    Euclidean3,
    /// Hyperbolic plane, curvature −1, open unit Poincaré disk chart.
    HyperbolicPlane,
}

/// A point in the space's chart. The `z` coordinate is zero in 2D spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new2(x: f64, y: f64) -> Point {
        Point { x, y, z: 0.0 }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Point {
        Point { x, y, z }
    }

    /// Euclidean chart norm.
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    fn sub(&self, o: &Point) -> Point {
        Point::new3(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Euclidean2 | Space::HyperbolicPlane => 2,
            Space::Euclidean3 => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Space::Euclidean2 => "euclidean2",
            Space::Euclidean3 => "euclidean3",
            Space::HyperbolicPlane => "hyperbolic2",
        }
    }

    pub fn from_name(s: &str) -> Result<Space> {
        match s {
            "euclidean2" => Ok(Space::Euclidean2),
            "euclidean3" => Ok(Space::Euclidean3),
            "hyperbolic2" => Ok(Space::HyperbolicPlane),
            other => Err(Error::parse(format!("unknown space kind '{other}'"))),
        }
    }

    /// Chart validity: finite coordinates, `|z| < 1` for the disk, and a
    /// zero third coordinate in 2D spaces.
    pub fn chart_valid(&self, p: &Point) -> bool {
        let finite = p.x.is_finite() && p.y.is_finite() && p.z.is_finite();
        match self {
            Space::Euclidean2 => finite && p.z == 0.0,
            Space::Euclidean3 => finite,
            Space::HyperbolicPlane => finite && p.z == 0.0 && p.norm() < 1.0,
        }
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if self.chart_valid(p) {
            Ok(())
        } else {
            Err(Error::invalid_input(format!("point {p:?} not valid in chart of {}", self.name())))
        }
    }

    /// Clamp a disk-chart point away from the boundary.
    pub fn clamp_chart(&self, p: Point) -> Point {
        if *self != Space::HyperbolicPlane {
            return p;
        }
        let n = p.norm();
        let max = 1.0 - CHART_CLAMP;
        if n > max {
            let s = max / n;
            Point::new2(p.x * s, p.y * s)
        } else {
            p
        }
    }

    /// Geodesic distance between two chart-valid points.
    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        match self {
            Space::Euclidean2 | Space::Euclidean3 => p.sub(q).norm(),
            Space::HyperbolicPlane => {
                let d2 = {
                    let d = p.sub(q);
                    d.x * d.x + d.y * d.y
                };
                if d2 == 0.0 {
                    return 0.0;
                }
                let np = p.x * p.x + p.y * p.y;
                let nq = q.x * q.x + q.y * q.y;
                let arg = 1.0 + 2.0 * d2 / ((1.0 - np) * (1.0 - nq));
                arg.max(1.0).acosh()
            }
        }
    }

    /// `distance` with precondition checks, kept for external callers.
    pub fn try_distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(self.distance(p, q))
    }

    /// `distance(p, q) <= r` without transcendental calls (hot-path form).
    pub fn within(&self, p: &Point, q: &Point, r: f64) -> bool {
        if r < 0.0 {
            return false;
        }
        match self {
            Space::Euclidean2 | Space::Euclidean3 => {
                let dx = p.x - q.x;
                let dy = p.y - q.y;
                let dz = p.z - q.z;
                dx * dx + dy * dy + dz * dz <= r * r
            }
            Space::HyperbolicPlane => {
                let dx = p.x - q.x;
                let dy = p.y - q.y;
                let d2 = dx * dx + dy * dy;
                let np = p.x * p.x + p.y * p.y;
                let nq = q.x * q.x + q.y * q.y;
                // cosh d − 1 = 2|p−q|² / ((1−|p|²)(1−|q|²)) ≤ cosh r − 1
                2.0 * d2 <= (r.cosh() - 1.0) * (1.0 - np) * (1.0 - nq)
            }
        }
    }

    /// Volume of a metric ball of radius `r` (closed form).
    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::invalid_input(format!("ball radius must be >= 0, got {r}")));
        }
        Ok(match self {
            Space::Euclidean2 => std::f64::consts::PI * r * r,
            Space::Euclidean3 => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
            Space::HyperbolicPlane => 2.0 * std::f64::consts::PI * (r.cosh() - 1.0),
        })
    }

    /// Distance from the origin (the chart's radial geodesic coordinate).
    pub fn radial(&self, p: &Point) -> f64 {
        match self {
            Space::Euclidean2 | Space::Euclidean3 => p.norm(),
            Space::HyperbolicPlane => 2.0 * p.norm().min(1.0 - CHART_CLAMP).atanh(),
        }
    }

    /// Chart point at geodesic polar coordinates `(rho, phi)` (2D spaces).
    pub fn point_at_polar(&self, rho: f64, phi: f64) -> Point {
        let (s, c) = phi.sin_cos();
        match self {
            Space::Euclidean2 => Point::new2(rho * c, rho * s),
            Space::HyperbolicPlane => {
                let cr = (rho / 2.0).tanh().min(1.0 - CHART_CLAMP);
                Point::new2(cr * c, cr * s)
            }
            Space::Euclidean3 => panic!("polar chart is 2D only"),
        }
    }

    /// Sample a point uniformly (w.r.t. the volume measure) in `B(center, r)`.
    ///
    /// Exact inversion in geodesic polar coordinates: the angle is uniform
    /// and the radius has density ∝ sinh t (ℍ²) resp. t^{d−1} (ℝ^d); the
    /// polar sample around the origin is then moved by an isometry.
    pub fn sample_uniform_ball<R: Rng + ?Sized>(&self, center: &Point, r: f64, rng: &mut R) -> Result<Point> {
        if !(r > 0.0) {
            return Err(Error::invalid_input(format!("sampling radius must be > 0, got {r}")));
        }
        self.check_point(center)?;
        let u: f64 = rng.gen();
        match self {
            Space::Euclidean2 => {
                let t = r * u.sqrt();
                let phi = rng.gen::<f64>() * std::f64::consts::TAU;
                let (s, c) = phi.sin_cos();
                Ok(Point::new2(center.x + t * c, center.y + t * s))
            }
            Space::Euclidean3 => {
                let t = r * u.cbrt();
                let dir = random_unit3(rng);
                Ok(Point::new3(center.x + t * dir[0], center.y + t * dir[1], center.z + t * dir[2]))
            }
            Space::HyperbolicPlane => {
                let t = (1.0 + u * (r.cosh() - 1.0)).acosh();
                let phi = rng.gen::<f64>() * std::f64::consts::TAU;
                let p = self.point_at_polar(t, phi);
                if center.x == 0.0 && center.y == 0.0 {
                    Ok(p)
                } else {
                    let shift = Mobius::translation_to(center);
                    Ok(self.clamp_chart(shift.apply(&p)))
                }
            }
        }
    }

    /// Sample an isometry γ with `γ(0) = target` and uniform rotational part.
    pub fn sample_isometry_to<R: Rng + ?Sized>(&self, target: &Point, rng: &mut R) -> Result<Isometry> {
        self.check_point(target)?;
        match self {
            Space::Euclidean2 => {
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                Ok(Isometry::Euclidean {
                    rot: rot2(theta),
                    trans: *target,
                })
            }
            Space::Euclidean3 => Ok(Isometry::Euclidean {
                rot: random_rot3(rng),
                trans: *target,
            }),
            Space::HyperbolicPlane => {
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                let m = Mobius::translation_to(target).compose(&Mobius::rotation(theta));
                Ok(Isometry::Hyperbolic { m, flip: false })
            }
        }
    }
}

fn rot2(theta: f64) -> [[f64; 3]; 3] {
    let (s, c) = theta.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn random_unit3<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    // Marsaglia polar method on S².
    loop {
        let a = rng.gen::<f64>() * 2.0 - 1.0;
        let b = rng.gen::<f64>() * 2.0 - 1.0;
        let s = a * a + b * b;
        if s < 1.0 && s > 0.0 {
            let t = 2.0 * (1.0 - s).sqrt();
            return [a * t, b * t, 1.0 - 2.0 * s];
        }
    }
}

fn random_rot3<R: Rng + ?Sized>(rng: &mut R) -> [[f64; 3]; 3] {
    // Uniform rotation from a uniform unit quaternion.
    let q = loop {
        let q: [f64; 4] = [
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
        ];
        let n2 = q.iter().map(|v| v * v).sum::<f64>();
        if n2 > 1e-6 && n2 < 1.0 {
            let n = n2.sqrt();
            break [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        }
    };
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct C64 {
    re: f64,
    im: f64,
}

impl C64 {
    const ONE: C64 = C64 { re: 1.0, im: 0.0 };

    fn new(re: f64, im: f64) -> C64 {
        C64 { re, im }
    }

    fn conj(self) -> C64 {
        C64::new(self.re, -self.im)
    }

    fn add(self, o: C64) -> C64 {
        C64::new(self.re + o.re, self.im + o.im)
    }

    fn mul(self, o: C64) -> C64 {
        C64::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }

    fn div(self, o: C64) -> C64 {
        let d = o.re * o.re + o.im * o.im;
        C64::new((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)
    }

    fn scale(self, s: f64) -> C64 {
        C64::new(self.re * s, self.im * s)
    }
}

/// Orientation-preserving disk automorphism `z ↦ (a z + b)/(b̄ z + ā)`,
/// normalized to `|a|² − |b|² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    a: C64,
    b: C64,
}

impl Mobius {
    pub const IDENTITY: Mobius = Mobius { a: C64::ONE, b: C64 { re: 0.0, im: 0.0 } };

    /// Rotation by `theta` about the disk center.
    pub fn rotation(theta: f64) -> Mobius {
        let (s, c) = (theta / 2.0).sin_cos();
        Mobius { a: C64::new(c, s), b: C64::new(0.0, 0.0) }
    }

    /// The Möbius translation taking 0 to `w`, `z ↦ (z + w)/(w̄ z + 1)`.
    pub fn translation_to(w: &Point) -> Mobius {
        let n2 = w.x * w.x + w.y * w.y;
        let s = 1.0 / (1.0 - n2).sqrt();
        Mobius {
            a: C64::new(s, 0.0),
            b: C64::new(w.x, w.y).scale(s),
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        let z = C64::new(p.x, p.y);
        let num = self.a.mul(z).add(self.b);
        let den = self.b.conj().mul(z).add(self.a.conj());
        let r = num.div(den);
        Point::new2(r.re, r.im)
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Mobius) -> Mobius {
        Mobius {
            a: self.a.mul(other.a).add(self.b.mul(other.b.conj())),
            b: self.a.mul(other.b).add(self.b.mul(other.a.conj())),
        }
    }

    fn conj_entries(&self) -> Mobius {
        Mobius { a: self.a.conj(), b: self.b.conj() }
    }
}

/// An isometry of the ambient space.
#[derive(Debug, Clone, PartialEq)]
pub enum Isometry {
    /// Orthogonal matrix plus translation.
    Euclidean { rot: [[f64; 3]; 3], trans: Point },
    /// Disk automorphism with an optional pre-applied reflection `z ↦ z̄`.
    Hyperbolic { m: Mobius, flip: bool },
}

impl Isometry {
    pub fn apply(&self, p: &Point) -> Point {
        match self {
            Isometry::Euclidean { rot, trans } => {
                let v = [p.x, p.y, p.z];
                let mut out = [0.0; 3];
                for (i, row) in rot.iter().enumerate() {
                    out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
                }
                Point::new3(out[0] + trans.x, out[1] + trans.y, out[2] + trans.z)
            }
            Isometry::Hyperbolic { m, flip } => {
                let q = if *flip { Point::new2(p.x, -p.y) } else { *p };
                m.apply(&q)
            }
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Isometry) -> Result<Isometry> {
        match (self, other) {
            (Isometry::Euclidean { rot: r1, trans: t1 }, Isometry::Euclidean { rot: r2, trans: t2 }) => {
                let mut rot = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        rot[i][j] = (0..3).map(|k| r1[i][k] * r2[k][j]).sum();
                    }
                }
                let t2r = Isometry::Euclidean { rot: *r1, trans: Point::ORIGIN }.apply(t2);
                Ok(Isometry::Euclidean {
                    rot,
                    trans: Point::new3(t2r.x + t1.x, t2r.y + t1.y, t2r.z + t1.z),
                })
            }
            (Isometry::Hyperbolic { m: m1, flip: f1 }, Isometry::Hyperbolic { m: m2, flip: f2 }) => {
                let m2 = if *f1 { m2.conj_entries() } else { *m2 };
                Ok(Isometry::Hyperbolic { m: m1.compose(&m2), flip: f1 != f2 })
            }
            _ => Err(Error::invalid_input("cannot compose isometries of different spaces")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    const TAU: f64 = std::f64::consts::TAU;

    #[test]
    fn euclidean_distance_pythagoras() {
        let s = Space::Euclidean2;
        assert_eq!(s.distance(&Point::new2(0.0, 0.0), &Point::new2(3.0, 4.0)), 5.0);
    }

    #[test]
    fn hyperbolic_radial_distance() {
        // Radial geodesic: d(0, z) = 2 artanh |z|, so d(0, 0.5) = ln 3.
        let s = Space::HyperbolicPlane;
        let d = s.distance(&Point::ORIGIN, &Point::new2(0.5, 0.0));
        assert!((d - 3.0_f64.ln()).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn distance_identity_is_zero() {
        for s in [Space::Euclidean2, Space::Euclidean3, Space::HyperbolicPlane] {
            let p = match s {
                Space::Euclidean3 => Point::new3(0.2, -0.1, 0.4),
                _ => Point::new2(0.2, -0.1),
            };
            assert_eq!(s.distance(&p, &p), 0.0);
        }
    }

    #[test]
    fn chart_invalid_point_rejected() {
        let s = Space::HyperbolicPlane;
        assert!(s.try_distance(&Point::new2(1.5, 0.0), &Point::ORIGIN).is_err());
        assert!(s.try_distance(&Point::new2(f64::NAN, 0.0), &Point::ORIGIN).is_err());
    }

    #[test]
    fn ball_volume_closed_forms() {
        assert!((Space::Euclidean2.ball_volume(1.0).unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert!((Space::Euclidean3.ball_volume(2.0).unwrap() - 4.0 / 3.0 * std::f64::consts::PI * 8.0).abs() < 1e-12);
        let h = Space::HyperbolicPlane.ball_volume(1.0).unwrap();
        assert!((h - 2.0 * std::f64::consts::PI * (1f64.cosh() - 1.0)).abs() < 1e-12);
        // d(0, z) = 2 artanh|z| gives area 3.41228... at r = 1.
        assert!((h - 3.412283).abs() < 1e-5, "got {h}");
        for s in [Space::Euclidean2, Space::Euclidean3, Space::HyperbolicPlane] {
            assert_eq!(s.ball_volume(0.0).unwrap(), 0.0);
            assert!(s.ball_volume(-1.0).is_err());
        }
    }

    #[test]
    fn ball_volume_strictly_increasing() {
        for s in [Space::Euclidean2, Space::Euclidean3, Space::HyperbolicPlane] {
            let mut prev = 0.0;
            for i in 1..40 {
                let v = s.ball_volume(i as f64 * 0.25).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn uniform_ball_subball_fractions() {
        let mut rng = stream(11, 0, "geom-subball");
        // E²: fraction of B(0,1) samples inside radius 2^{-1/2} is 1/2.
        let n = 100_000;
        let mut hits = 0;
        let s = Space::Euclidean2;
        for _ in 0..n {
            let p = s.sample_uniform_ball(&Point::ORIGIN, 1.0, &mut rng).unwrap();
            if p.norm() <= std::f64::consts::FRAC_1_SQRT_2 {
                hits += 1;
            }
        }
        let frac = hits as f64 / n as f64;
        let se = (0.25f64 / n as f64).sqrt();
        assert!((frac - 0.5).abs() < 3.0 * se, "frac {frac}");

        // ℍ²: fraction of B(0,2) samples inside B(0,1) is the area ratio.
        let s = Space::HyperbolicPlane;
        let expect = (1f64.cosh() - 1.0) / (2f64.cosh() - 1.0);
        let mut hits = 0;
        for _ in 0..n {
            let p = s.sample_uniform_ball(&Point::ORIGIN, 2.0, &mut rng).unwrap();
            if s.radial(&p) <= 1.0 {
                hits += 1;
            }
        }
        let frac = hits as f64 / n as f64;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((frac - expect).abs() < 3.0 * se, "frac {frac} expect {expect}");
    }

    #[test]
    fn uniform_ball_equal_volume_shells_chi_square() {
        // split B(0,r) into 8 equal-volume shells; counts must be uniform
        let mut rng = stream(16, 0, "geom-chi");
        for (space, r) in [(Space::Euclidean2, 1.5), (Space::Euclidean3, 1.5), (Space::HyperbolicPlane, 2.0)] {
            let total = space.ball_volume(r).unwrap();
            let bins = 8usize;
            // shell edges: ball_volume(edge_k) = k/bins * total, inverted by bisection
            let mut edges = vec![0.0];
            for k in 1..bins {
                let target = k as f64 / bins as f64 * total;
                let (mut lo, mut hi) = (0.0, r);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if space.ball_volume(mid).unwrap() < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                edges.push(0.5 * (lo + hi));
            }
            edges.push(r);
            let n = 40_000;
            let mut counts = vec![0u64; bins];
            for _ in 0..n {
                let p = space.sample_uniform_ball(&Point::ORIGIN, r, &mut rng).unwrap();
                let d = space.radial(&p);
                let bin = edges.windows(2).position(|w| d >= w[0] && d <= w[1]).unwrap_or(bins - 1);
                counts[bin] += 1;
            }
            let expected = vec![n as f64 / bins as f64; bins];
            let stat = crate::stats::chi_square_stat(&counts, &expected);
            let p = crate::stats::chi_square_pvalue(stat, (bins - 1) as f64);
            assert!(p > 0.01, "{space:?}: shell chi-square p={p} (stat {stat:.1})");
        }
    }

    #[test]
    fn uniform_ball_small_radius_near_center() {
        let mut rng = stream(12, 0, "geom-small");
        for s in [Space::Euclidean2, Space::Euclidean3, Space::HyperbolicPlane] {
            let c = match s {
                Space::Euclidean3 => Point::new3(0.3, 0.1, -0.2),
                _ => Point::new2(0.3, 0.1),
            };
            let p = s.sample_uniform_ball(&c, 1e-9, &mut rng).unwrap();
            assert!(s.distance(&c, &p) <= 1e-9 + 1e-12);
        }
    }

    #[test]
    fn isometry_to_target_and_invariance() {
        let mut rng = stream(13, 0, "geom-iso");
        // Euclidean: γ(0) = (1,2).
        let g = Space::Euclidean2.sample_isometry_to(&Point::new2(1.0, 2.0), &mut rng).unwrap();
        let img = g.apply(&Point::ORIGIN);
        assert!((img.x - 1.0).abs() < 1e-12 && (img.y - 2.0).abs() < 1e-12);

        // Hyperbolic with target 0: a pure rotation, preserves |z|.
        let g = Space::HyperbolicPlane.sample_isometry_to(&Point::ORIGIN, &mut rng).unwrap();
        let p = Point::new2(0.4, -0.3);
        assert!((g.apply(&p).norm() - p.norm()).abs() < 1e-12);

        // Distance preservation over sampled pairs, all spaces.
        for s in [Space::Euclidean2, Space::Euclidean3, Space::HyperbolicPlane] {
            for _ in 0..100 {
                let t = s.sample_uniform_ball(&Point::ORIGIN, 2.0_f64.min(5.0), &mut rng).unwrap();
                let g = s.sample_isometry_to(&t, &mut rng).unwrap();
                let p = s.sample_uniform_ball(&Point::ORIGIN, 2.0, &mut rng).unwrap();
                let q = s.sample_uniform_ball(&Point::ORIGIN, 2.0, &mut rng).unwrap();
                let d0 = s.distance(&p, &q);
                let d1 = s.distance(&g.apply(&p), &g.apply(&q));
                assert!((d1 - d0).abs() < 1e-9 * (1.0 + d0), "space {s:?} d0={d0} d1={d1}");
            }
        }
    }

    #[test]
    fn isometry_composition_associative() {
        let mut rng = stream(14, 0, "geom-assoc");
        for s in [Space::Euclidean2, Space::Euclidean3, Space::HyperbolicPlane] {
            for _ in 0..50 {
                let mk = |rng: &mut _| {
                    let t = s.sample_uniform_ball(&Point::ORIGIN, 1.5, rng).unwrap();
                    s.sample_isometry_to(&t, rng).unwrap()
                };
                let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
                let left = a.compose(&b).unwrap().compose(&c).unwrap();
                let right = a.compose(&b.compose(&c).unwrap()).unwrap();
                let p = s.sample_uniform_ball(&Point::ORIGIN, 1.0, &mut rng).unwrap();
                let lp = left.apply(&p);
                let rp = right.apply(&p);
                assert!(s.distance(&lp, &rp) < 1e-9);
            }
        }
    }

    #[test]
    fn hyperbolic_reflection_preserves_distance() {
        let mut rng = stream(15, 0, "geom-flip");
        let s = Space::HyperbolicPlane;
        let t = Point::new2(0.3, 0.2);
        let g = match s.sample_isometry_to(&t, &mut rng).unwrap() {
            Isometry::Hyperbolic { m, .. } => Isometry::Hyperbolic { m, flip: true },
            _ => unreachable!(),
        };
        for _ in 0..50 {
            let p = s.sample_uniform_ball(&Point::ORIGIN, 2.0, &mut rng).unwrap();
            let q = s.sample_uniform_ball(&Point::ORIGIN, 2.0, &mut rng).unwrap();
            let d0 = s.distance(&p, &q);
            let d1 = s.distance(&g.apply(&p), &g.apply(&q));
            assert!((d1 - d0).abs() < 1e-9 * (1.0 + d0));
        }
    }

    #[test]
    fn polar_chart_roundtrip() {
        let s = Space::HyperbolicPlane;
        for rho in [0.1, 0.5, 1.0, 3.0, 8.0] {
            for k in 0..7 {
                let phi = k as f64 / 7.0 * TAU;
                let p = s.point_at_polar(rho, phi);
                assert!((s.radial(&p) - rho).abs() < 1e-9 * (1.0 + rho));
            }
        }
    }
}
