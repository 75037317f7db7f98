//! Geometry of the unit 2-sphere: points, geodesic nets, dense probe grids,
//! partitions of unity subordinate to metric balls, and the admissibility
//! bookkeeping that ties the scale parameters together.
//!
//! Conventions used throughout the crate:
//! * points are unit vectors in `R^3`, validated at construction;
//! * distances are geodesic (arc length, in `[0, pi]`);
//! * the sphere carries the normalized area measure of total mass 1.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::Result;

const UNIT_NORM_TOL: f64 = 1e-12;

/// A point on the unit sphere. The unit-norm invariant is enforced at
/// construction, so distance computations never need to re-validate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    coords: [f64; 3],
}

impl SpherePoint {
    /// Validates that `(x, y, z)` is a unit vector.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::invalid(format!(
                "point ({x}, {y}, {z}) is not on the unit sphere (norm {norm})"
            )));
        }
        Ok(SpherePoint { coords: [x, y, z] })
    }

    /// Projects a nonzero vector to the sphere.
    pub fn from_unnormalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::invalid(format!(
                "cannot normalize vector ({x}, {y}, {z}) with norm {norm}"
            )));
        }
        Ok(SpherePoint {
            coords: [x / norm, y / norm, z / norm],
        })
    }

    /// Spherical coordinates: `theta` is the polar angle from the north
    /// pole in `[0, pi]`, `phi` the azimuth.
    pub fn from_spherical(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) || !phi.is_finite() {
            return Err(Error::invalid(format!(
                "spherical coordinates out of range: theta {theta}, phi {phi}"
            )));
        }
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Ok(SpherePoint {
            coords: [st * cp, st * sp, ct],
        })
    }

    pub fn north_pole() -> Self {
        SpherePoint { coords: [0.0, 0.0, 1.0] }
    }

    pub fn south_pole() -> Self {
        SpherePoint { coords: [0.0, 0.0, -1.0] }
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn z(&self) -> f64 {
        self.coords[2]
    }

    pub fn coords(&self) -> [f64; 3] {
        self.coords
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.coords[0] * other.coords[0]
            + self.coords[1] * other.coords[1]
            + self.coords[2] * other.coords[2]
    }

    pub fn antipode(&self) -> SpherePoint {
        SpherePoint {
            coords: [-self.coords[0], -self.coords[1], -self.coords[2]],
        }
    }

    /// Polar angle from the north pole, `acos(z)`.
    pub fn polar_angle(&self) -> f64 {
        self.coords[2].clamp(-1.0, 1.0).acos()
    }

    pub fn azimuth(&self) -> f64 {
        self.coords[1].atan2(self.coords[0])
    }
}

/// Geodesic distance in `[0, pi]`. The dot product is clamped before
/// `acos` so antipodal rounding cannot produce NaN.
pub fn geodesic_distance(p: &SpherePoint, q: &SpherePoint) -> f64 {
    p.dot(q).clamp(-1.0, 1.0).acos()
}

/// A finite set of sensor locations with cached pairwise distances.
#[derive(Debug, Clone)]
pub struct SensorNet {
    points: Vec<SpherePoint>,
    distances: Vec<f64>,
    /// Set by [`SensorNet::verify_net_radius`]; `None` until verified.
    net_radius: Option<f64>,
}

impl SensorNet {
    pub fn from_points(points: Vec<SpherePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("a sensor net needs at least one point"));
        }
        let n = points.len();
        let mut distances = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = geodesic_distance(&points[i], &points[j]);
                distances[i * n + j] = d;
                distances[j * n + i] = d;
            }
        }
        Ok(SensorNet {
            points,
            distances,
            net_radius: None,
        })
    }

    /// Deterministic spiral net: latitudes equally spaced in `cos(theta)`,
    /// azimuths advanced by the golden angle.
    pub fn fibonacci(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("fibonacci net size must be positive"));
        }
        let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
        let mut points = Vec::with_capacity(n);
        for i in 0..n {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * i as f64;
            points.push(SpherePoint {
                coords: [r * phi.cos(), r * phi.sin(), z],
            });
        }
        SensorNet::from_points(points)
    }

    /// The twelve icosahedron vertices. Pairwise distances take exactly
    /// three values (atan 2, pi - atan 2, pi), which leaves wide windows
    /// for scale thresholds.
    pub fn icosahedron() -> Self {
        let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let norm = (1.0 + phi * phi).sqrt();
        let (a, b) = (1.0 / norm, phi / norm);
        let mut points = Vec::with_capacity(12);
        for &(s, t) in &[(a, b), (a, -b), (-a, b), (-a, -b)] {
            points.push(SpherePoint { coords: [0.0, s, t] });
            points.push(SpherePoint { coords: [s, t, 0.0] });
            points.push(SpherePoint { coords: [t, 0.0, s] });
        }
        SensorNet::from_points(points).expect("icosahedron vertices are unit points")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &SpherePoint {
        &self.points[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.points.len() + j]
    }

    /// Verified covering radius, if [`SensorNet::verify_net_radius`] has
    /// succeeded on this net.
    pub fn net_radius(&self) -> Option<f64> {
        self.net_radius
    }

    /// Closest pair of distinct sensors `(i, j, distance)`.
    pub fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let n = self.points.len();
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.distance(i, j);
                if best.map_or(true, |(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }

    /// Largest probe-to-net distance over the grid: a dense estimate of the
    /// covering radius. Also returns the witness probe realizing it.
    pub fn estimate_net_radius(&self, grid: &ProbeGrid) -> (f64, SpherePoint) {
        let (d, idx) = grid
            .points
            .par_iter()
            .enumerate()
            .map(|(idx, probe)| {
                // min distance == max dot; avoids acos in the inner loop.
                let best_dot = self
                    .points
                    .iter()
                    .map(|p| p.dot(probe))
                    .fold(f64::NEG_INFINITY, f64::max);
                (best_dot.clamp(-1.0, 1.0).acos(), idx)
            })
            .reduce(
                || (f64::NEG_INFINITY, usize::MAX),
                |a, b| {
                    // Deterministic: prefer larger distance, then smaller index.
                    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                        b
                    } else {
                        a
                    }
                },
            );
        (d, grid.points[idx])
    }

    /// Checks that every probe point lies within `rho` of the net, i.e. the
    /// net is a `rho`-covering at the grid's resolution. On success the
    /// verified radius is recorded on the net.
    pub fn verify_net_radius(&mut self, rho: f64, grid: &ProbeGrid) -> Result<NetRadiusCheck> {
        if rho <= 0.0 || !rho.is_finite() {
            return Err(Error::invalid(format!("covering radius must be positive, got {rho}")));
        }
        let (max_min, witness) = self.estimate_net_radius(grid);
        let covered = max_min <= rho;
        if covered {
            self.net_radius = Some(rho);
        }
        Ok(NetRadiusCheck {
            covered,
            requested_radius: rho,
            max_probe_distance: max_min,
            witness,
            probe_count: grid.points.len(),
        })
    }

    /// Writes `x,y,z` rows, one sensor per row, full `f64` precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["x", "y", "z"])?;
        for p in &self.points {
            writer.write_record([
                format!("{:.17e}", p.x()),
                format!("{:.17e}", p.y()),
                format!("{:.17e}", p.z()),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads a net written by [`SensorNet::write_csv`]. Rows must be unit
    /// vectors up to CSV rounding; each is re-projected exactly.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != 3 {
                return Err(Error::Format(format!(
                    "sensor CSV row {row} has {} fields, expected 3",
                    record.len()
                )));
            }
            let mut v = [0.0_f64; 3];
            for (i, field) in record.iter().enumerate() {
                v[i] = field.trim().parse::<f64>().map_err(|e| {
                    Error::Format(format!("sensor CSV row {row} field {i}: {e}"))
                })?;
            }
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::Format(format!(
                    "sensor CSV row {row} is not a unit vector (norm {norm})"
                )));
            }
            points.push(SpherePoint::from_unnormalized(v[0], v[1], v[2])?);
        }
        SensorNet::from_points(points)
    }

    /// SHA-256 of the coordinate bytes (little-endian f64), used to key
    /// operator caches.
    pub fn coordinate_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for p in &self.points {
            for c in p.coords() {
                hasher.update(c.to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// Result of a covering-radius verification.
#[derive(Debug, Clone, Serialize)]
pub struct NetRadiusCheck {
    pub covered: bool,
    pub requested_radius: f64,
    /// Largest probe-to-net distance found.
    pub max_probe_distance: f64,
    /// Probe realizing the maximum.
    pub witness: SpherePoint,
    pub probe_count: usize,
}

/// Dense deterministic point set used for covering checks and set-emptiness
/// witnesses: vertices of a repeatedly subdivided icosahedron.
#[derive(Debug, Clone)]
pub struct ProbeGrid {
    level: u32,
    points: Vec<SpherePoint>,
}

impl ProbeGrid {
    /// `level` subdivisions of the icosahedron: `10 * 4^level + 2` vertices.
    pub fn icosahedral(level: u32) -> Result<Self> {
        if level > 8 {
            return Err(Error::invalid(format!(
                "icosahedral subdivision level {level} exceeds the supported maximum 8"
            )));
        }
        let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let raw = [
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ];
        let mut vertices: Vec<[f64; 3]> = raw
            .iter()
            .map(|v| {
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                [v[0] / n, v[1] / n, v[2] / n]
            })
            .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next_faces = Vec::with_capacity(faces.len() * 4);
            for face in &faces {
                let mut mid = [0usize; 3];
                for e in 0..3 {
                    let a = face[e];
                    let b = face[(e + 1) % 3];
                    let key = (a.min(b), a.max(b));
                    mid[e] = *midpoint.entry(key).or_insert_with(|| {
                        let v = [
                            vertices[a][0] + vertices[b][0],
                            vertices[a][1] + vertices[b][1],
                            vertices[a][2] + vertices[b][2],
                        ];
                        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                        vertices.push([v[0] / n, v[1] / n, v[2] / n]);
                        vertices.len() - 1
                    });
                }
                next_faces.push([face[0], mid[0], mid[2]]);
                next_faces.push([face[1], mid[1], mid[0]]);
                next_faces.push([face[2], mid[2], mid[1]]);
                next_faces.push([mid[0], mid[1], mid[2]]);
            }
            faces = next_faces;
        }
        let points = vertices
            .into_iter()
            .map(|v| SpherePoint { coords: v })
            .collect::<Vec<_>>();
        Ok(ProbeGrid { level, points })
    }

    /// Default grid for covering-radius verification (163 842 points).
    pub fn verification_default() -> Self {
        ProbeGrid::icosahedral(7).expect("level 7 is supported")
    }

    /// Lighter grid for set-emptiness witnesses (10 242 points).
    pub fn witness_default() -> Self {
        ProbeGrid::icosahedral(5).expect("level 5 is supported")
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }
}

/// Scale parameters for an inference run, with the admissibility
/// inequalities evaluated at construction.
///
/// In strict mode every inequality must hold; in relaxed mode failures are
/// recorded in `violations` and the run proceeds.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibleRange {
    pub r: f64,
    pub r_prime: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub strict: bool,
    /// Stability interval `[2 r lambda, 2 r' / lambda]`.
    pub interval: (f64, f64),
    /// Whether `[a, b]` sits inside the stability interval. Reported as a
    /// diagnostic; desk-scale runs routinely leave the interval.
    pub ab_within_interval: bool,
    /// True when every admissibility inequality holds.
    pub admissible: bool,
    /// Human-readable list of violated inequalities (empty when admissible).
    pub violations: Vec<String>,
    /// Threshold exponents `m >= 1` additionally require the
    /// interior-disjointness assumption on supports; see
    /// [`check_disjointness_assumption`].
    pub requires_disjointness: bool,
}

impl AdmissibleRange {
    pub fn new(
        r: f64,
        r_prime: f64,
        lambda: f64,
        a: f64,
        b: f64,
        m: f64,
        strict: bool,
    ) -> Result<Self> {
        if !(r > 0.0) || !(r_prime > r) {
            return Err(Error::invalid(format!(
                "need 0 < r < r', got r = {r}, r' = {r_prime}"
            )));
        }
        if !(lambda > 1.0) {
            return Err(Error::invalid(format!("lambda must exceed 1, got {lambda}")));
        }
        if !(a > 0.0) || !(b > a) {
            return Err(Error::invalid(format!("need 0 < a < b, got a = {a}, b = {b}")));
        }
        if !(m > 0.0) {
            return Err(Error::invalid(format!("threshold exponent m must be positive, got {m}")));
        }
        let interval = (2.0 * r * lambda, 2.0 * r_prime / lambda);
        let mut violations = Vec::new();
        let l4 = lambda.powi(4);
        if r_prime / r <= 4.0 * l4 {
            violations.push(format!(
                "scale ratio r'/r = {:.6} must exceed 4 lambda^4 = {:.6}",
                r_prime / r,
                4.0 * l4
            ));
        }
        if 4.0 * r_prime >= std::f64::consts::FRAC_PI_2 {
            violations.push(format!(
                "4 r' = {:.6} must stay below pi/2 = {:.6}",
                4.0 * r_prime,
                std::f64::consts::FRAC_PI_2
            ));
        }
        let l2 = lambda * lambda;
        if b / a <= 4.0 * l2 {
            violations.push(format!(
                "threshold ratio b/a = {:.6} must exceed 4 lambda^2 = {:.6}",
                b / a,
                4.0 * l2
            ));
        }
        let ab_within_interval = a >= interval.0 && b <= interval.1;
        let admissible = violations.is_empty();
        if strict && !admissible {
            return Err(Error::invalid(format!(
                "strict admissibility rejected the parameters: {}",
                violations.join("; ")
            )));
        }
        Ok(AdmissibleRange {
            r,
            r_prime,
            lambda,
            a,
            b,
            m,
            strict,
            interval,
            ab_within_interval,
            admissible,
            violations,
            requires_disjointness: m >= 1.0,
        })
    }
}

/// Descending quintic ramp: 1 on `[0, inner]`, 0 on `[outer, inf)`, and a
/// `6t^5 - 15t^4 + 10t^3` smoothstep in between. Twice continuously
/// differentiable at both joins.
fn quintic_ramp(d: f64, inner: f64, outer: f64) -> f64 {
    if d <= inner {
        1.0
    } else if d >= outer {
        0.0
    } else {
        let t = (d - inner) / (outer - inner);
        let s = t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        1.0 - s
    }
}

/// Margin keeping supports strictly inside the nominal balls of radius
/// `lambda * epsilon / 2`.
const OUTER_MARGIN: f64 = 1.0 - 1e-6;

/// Smooth partition of unity subordinate to the balls of a sensor net.
///
/// Each bump is a radial quintic ramp equal to 1 inside
/// `epsilon / (2 lambda)` and vanishing at `(1 - 1e-6) * lambda * epsilon / 2`;
/// normalization by the sum makes the family sum to 1 wherever the bumps
/// cover. Construction fails if the configured probe grid exposes an
/// uncovered point, since the normalization would divide by zero there.
/// Radius of the (closed) support of one partition member at the given
/// parameters: the bump vanishes beyond `lambda * epsilon / 2`, shrunk by
/// the ramp margin.
pub fn support_outer_radius(epsilon: f64, lambda: f64) -> f64 {
    OUTER_MARGIN * lambda * epsilon / 2.0
}

#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    net: Arc<SensorNet>,
    epsilon: f64,
    lambda: f64,
    inner_radius: f64,
    outer_radius: f64,
    /// Whether the *inner* balls alone covered the probe grid (stronger
    /// than the support coverage required for well-definedness).
    inner_balls_cover: bool,
}

impl PartitionOfUnity {
    pub fn build(
        net: Arc<SensorNet>,
        epsilon: f64,
        lambda: f64,
        grid: &ProbeGrid,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(lambda > 1.0) {
            return Err(Error::invalid(format!("lambda must exceed 1, got {lambda}")));
        }
        let inner_radius = epsilon / (2.0 * lambda);
        let outer_radius = support_outer_radius(epsilon, lambda);
        let pou = PartitionOfUnity {
            net,
            epsilon,
            lambda,
            inner_radius,
            outer_radius,
            inner_balls_cover: false,
        };
        // cos is decreasing on [0, pi]: within-radius tests compare dots.
        let outer_cos = outer_radius.min(std::f64::consts::PI).cos();
        let inner_cos = inner_radius.min(std::f64::consts::PI).cos();
        let points = pou.net.points();
        let mut inner_cover = true;
        for probe in grid.points() {
            let best = points
                .iter()
                .map(|p| p.dot(probe))
                .fold(f64::NEG_INFINITY, f64::max);
            if best < outer_cos {
                return Err(Error::check(format!(
                    "partition supports fail to cover the sphere: probe ({:.6}, {:.6}, {:.6}) \
                     lies at distance {:.6} from the net, support radius is {:.6}",
                    probe.x(),
                    probe.y(),
                    probe.z(),
                    best.clamp(-1.0, 1.0).acos(),
                    outer_radius
                )));
            }
            if best < inner_cos {
                inner_cover = false;
            }
        }
        Ok(PartitionOfUnity {
            inner_balls_cover: inner_cover,
            ..pou
        })
    }

    pub fn net(&self) -> &SensorNet {
        &self.net
    }

    pub fn shared_net(&self) -> Arc<SensorNet> {
        Arc::clone(&self.net)
    }

    pub fn len(&self) -> usize {
        self.net.len()
    }

    pub fn is_empty(&self) -> bool {
        self.net.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn inner_balls_cover(&self) -> bool {
        self.inner_balls_cover
    }

    /// Unnormalized bump of sensor `z` at `x`.
    pub fn bump(&self, z: usize, x: &SpherePoint) -> f64 {
        let d = geodesic_distance(self.net.point(z), x);
        quintic_ramp(d, self.inner_radius, self.outer_radius)
    }

    /// Sum of all bumps at `x`; positive wherever the supports cover.
    pub fn bump_sum(&self, x: &SpherePoint) -> f64 {
        (0..self.net.len()).map(|z| self.bump(z, x)).sum()
    }

    /// Normalized member `f_z(x)`. Fails where the supports do not cover.
    pub fn value(&self, z: usize, x: &SpherePoint) -> Result<f64> {
        let sum = self.bump_sum(x);
        if sum <= 0.0 {
            return Err(Error::numerical(format!(
                "partition undefined at uncovered point ({:.6}, {:.6}, {:.6})",
                x.x(),
                x.y(),
                x.z()
            )));
        }
        Ok(self.bump(z, x) / sum)
    }

    /// All members at once; sums to exactly 1 by construction.
    pub fn values_at(&self, x: &SpherePoint) -> Result<Vec<f64>> {
        let bumps: Vec<f64> = (0..self.net.len()).map(|z| self.bump(z, x)).collect();
        let sum: f64 = bumps.iter().sum();
        if sum <= 0.0 {
            return Err(Error::numerical(format!(
                "partition undefined at uncovered point ({:.6}, {:.6}, {:.6})",
                x.x(),
                x.y(),
                x.z()
            )));
        }
        Ok(bumps.into_iter().map(|b| b / sum).collect())
    }

    /// True when the closed supports of members `z` and `w` intersect,
    /// i.e. the sensor distance is below twice the outer radius. Members
    /// are radial, so this is exact, not a quadrature statement.
    pub fn supports_overlap(&self, z: usize, w: usize) -> bool {
        self.net.distance(z, w) < 2.0 * self.outer_radius
    }
}

/// Witness pair for a failed interior-disjointness check.
#[derive(Debug, Clone, Serialize)]
pub struct TangencyWitness {
    pub z: usize,
    pub w: usize,
    pub distance: f64,
    pub tangency_distance: f64,
}

/// Result of the interior-disjointness assumption check: closed-ball
/// supports of radius `support_radius` violate it exactly when two balls
/// are tangent, i.e. the center distance equals twice the radius.
#[derive(Debug, Clone, Serialize)]
pub struct DisjointnessCheck {
    pub holds: bool,
    pub support_radius: f64,
    pub tolerance: f64,
    pub witnesses: Vec<TangencyWitness>,
}

/// Checks the interior-disjointness assumption for closed-ball supports of
/// the given radius: fails iff some pair of centers sits within `tol` of
/// the tangency distance `2 * support_radius`.
pub fn disjointness_check_at_radius(
    net: &SensorNet,
    support_radius: f64,
    tol: f64,
) -> DisjointnessCheck {
    let tangency = 2.0 * support_radius;
    let mut witnesses = Vec::new();
    let n = net.len();
    for z in 0..n {
        for w in (z + 1)..n {
            let d = net.distance(z, w);
            if (d - tangency).abs() < tol {
                witnesses.push(TangencyWitness {
                    z,
                    w,
                    distance: d,
                    tangency_distance: tangency,
                });
            }
        }
    }
    DisjointnessCheck {
        holds: witnesses.is_empty(),
        support_radius,
        tolerance: tol,
        witnesses,
    }
}

/// Interior-disjointness check at the partition support radius implied by
/// `(epsilon, lambda)`.
pub fn check_disjointness_assumption(
    net: &SensorNet,
    epsilon: f64,
    lambda: f64,
    tol: f64,
) -> DisjointnessCheck {
    disjointness_check_at_radius(net, support_outer_radius(epsilon, lambda), tol)
}
