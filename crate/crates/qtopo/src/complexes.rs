//! Simplicial complexes built from registration statistics and geometry.
//!
//! Three families share one clique machine: the quantum complex thresholds
//! pair probabilities, the classical complex tests support overlap, and the
//! Vietoris-Rips complex thresholds distances. The nerve of a cover is not
//! a flag complex; every simplex is tested by its own joint statistic.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use crate::error::Error;
use crate::geometry::{support_outer_radius, ProbeGrid, SensorNet, SpherePoint};
use crate::quadrature::SphereQuadrature;
use crate::quantize::{toeplitz_symbol, QuantizationContext};
use crate::registration::{quantum_kfold, ProbabilityTable};
use crate::symbols::{Region, Symbol};
use crate::Result;

/// Homology through degree 2 is blind past three-dimensional simplices, so
/// clique expansion never goes further than this.
pub const MAX_EXPANSION_DIM: usize = 3;

/// Default ceiling: simplices up to dimension 2 unless a caller asks for
/// the degree-2 boundary map as well.
pub const DEFAULT_MAX_DIM: usize = 2;

/// Finite simplicial complex over labeled vertices.
///
/// Simplices are stored per dimension as strictly increasing index tuples in
/// lexicographic order, so equality of complexes is plain structural
/// equality.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialComplex {
    labels: Vec<String>,
    simplices: Vec<Vec<Vec<usize>>>,
}

impl SimplicialComplex {
    /// Validate and wrap raw simplex lists: indices in range, tuples
    /// strictly increasing, lists sorted without duplicates, and the whole
    /// family closed under taking faces.
    pub fn from_parts(
        labels: Vec<String>,
        mut simplices: Vec<Vec<Vec<usize>>>,
    ) -> Result<SimplicialComplex> {
        if labels.is_empty() {
            return Err(Error::invalid("a complex needs at least one vertex label"));
        }
        while simplices.last().is_some_and(|l| l.is_empty()) {
            simplices.pop();
        }
        let n = labels.len();
        for (d, list) in simplices.iter().enumerate() {
            for s in list {
                if s.len() != d + 1 {
                    return Err(Error::invalid(format!(
                        "simplex {s:?} listed in dimension {d}"
                    )));
                }
                if s.windows(2).any(|w| w[0] >= w[1]) || s.iter().any(|&v| v >= n) {
                    return Err(Error::invalid(format!(
                        "simplex {s:?} is not a strictly increasing tuple of vertex indices"
                    )));
                }
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "dimension-{d} simplex list is not sorted and duplicate-free"
                )));
            }
        }
        let complex = SimplicialComplex { labels, simplices };
        complex.verify_closed()?;
        Ok(complex)
    }

    /// Check closure under taking faces; builders run this before returning.
    pub fn verify_closed(&self) -> Result<()> {
        for d in (1..self.simplices.len()).rev() {
            for s in &self.simplices[d] {
                let mut face = Vec::with_capacity(d);
                for drop in 0..=d {
                    face.clear();
                    face.extend(s.iter().enumerate().filter(|&(i, _)| i != drop).map(|(_, &v)| v));
                    if !self.has_simplex(&face) {
                        return Err(Error::check(format!(
                            "complex is not closed: {s:?} is present but its face {face:?} is missing"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    /// Largest dimension with a simplex, if any simplex exists at all.
    pub fn dim(&self) -> Option<usize> {
        if self.simplices.is_empty() {
            None
        } else {
            Some(self.simplices.len() - 1)
        }
    }

    pub fn simplices_of(&self, d: usize) -> &[Vec<usize>] {
        self.simplices.get(d).map_or(&[], |l| l.as_slice())
    }

    /// Simplex counts per dimension.
    pub fn counts(&self) -> Vec<usize> {
        self.simplices.iter().map(|l| l.len()).collect()
    }

    pub fn total_simplices(&self) -> usize {
        self.simplices.iter().map(|l| l.len()).sum()
    }

    pub fn has_simplex(&self, simplex: &[usize]) -> bool {
        self.position_of(simplex).is_some()
    }

    /// Index of a simplex within its dimension's sorted list.
    pub fn position_of(&self, simplex: &[usize]) -> Option<usize> {
        if simplex.is_empty() {
            return None;
        }
        let list = self.simplices.get(simplex.len() - 1)?;
        list.binary_search_by(|s| s.as_slice().cmp(simplex)).ok()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.simplices
            .iter()
            .enumerate()
            .map(|(d, l)| {
                let c = l.len() as i64;
                if d % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut sims = BTreeMap::new();
        for (d, list) in self.simplices.iter().enumerate() {
            if !list.is_empty() {
                sims.insert(d.to_string(), json!(list));
            }
        }
        json!({ "vertices": self.labels, "simplices": sims })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, &self.to_json())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// True iff every simplex of `k1` is a simplex of `k2`. The complexes must
/// be built over the same labeled vertex set.
pub fn inclusion_check(k1: &SimplicialComplex, k2: &SimplicialComplex) -> Result<bool> {
    if k1.labels != k2.labels {
        return Err(Error::invalid(
            "inclusion check requires identical vertex labels",
        ));
    }
    for list in &k1.simplices {
        for s in list {
            if !k2.has_simplex(s) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// First simplex of `k1` missing from `k2`, if any; the inclusion witness
/// used by interleaving reports.
pub fn find_missing_simplex(
    k1: &SimplicialComplex,
    k2: &SimplicialComplex,
) -> Result<Option<Vec<usize>>> {
    if k1.labels != k2.labels {
        return Err(Error::invalid(
            "inclusion check requires identical vertex labels",
        ));
    }
    for list in &k1.simplices {
        for s in list {
            if !k2.has_simplex(s) {
                return Ok(Some(s.clone()));
            }
        }
    }
    Ok(None)
}

/// Default labels for complexes over a sensor net.
pub fn sensor_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("z{i}")).collect()
}

/// All cliques of a symmetric edge predicate, up to `max_dim + 1` vertices.
///
/// Enumeration expands each clique only through higher-indexed neighbors of
/// its last vertex, one independent search per root vertex; the output is
/// deterministic whatever the parallel schedule.
pub fn flag_complex<F>(labels: &[String], edge: F, max_dim: usize) -> Result<SimplicialComplex>
where
    F: Fn(usize, usize) -> bool + Sync,
{
    let n = labels.len();
    if n == 0 {
        return Err(Error::invalid("a complex needs at least one vertex label"));
    }
    let cap = max_dim.min(MAX_EXPANSION_DIM);
    let mut adj = vec![vec![false; n]; n];
    for (i, row) in adj.iter_mut().enumerate() {
        for (j, a) in row.iter_mut().enumerate() {
            *a = i != j && edge(i, j);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if adj[i][j] != adj[j][i] {
                return Err(Error::invalid(format!(
                    "edge predicate is not symmetric between vertices {i} and {j}"
                )));
            }
        }
    }

    let per_root: Vec<Vec<Vec<usize>>> = (0..n)
        .into_par_iter()
        .map(|root| {
            let mut found = Vec::new();
            if cap >= 1 {
                let cands: Vec<usize> = ((root + 1)..n).filter(|&j| adj[root][j]).collect();
                grow_cliques(&adj, &mut vec![root], &cands, cap, &mut found);
            }
            found
        })
        .collect();

    let mut simplices: Vec<Vec<Vec<usize>>> = vec![Vec::new(); cap + 1];
    simplices[0] = (0..n).map(|i| vec![i]).collect();
    for found in per_root {
        for s in found {
            simplices[s.len() - 1].push(s);
        }
    }
    SimplicialComplex::from_parts(labels.to_vec(), simplices)
}

fn grow_cliques(
    adj: &[Vec<bool>],
    clique: &mut Vec<usize>,
    cands: &[usize],
    cap: usize,
    out: &mut Vec<Vec<usize>>,
) {
    for (idx, &c) in cands.iter().enumerate() {
        clique.push(c);
        out.push(clique.clone());
        if clique.len() <= cap {
            let next: Vec<usize> = cands[idx + 1..]
                .iter()
                .copied()
                .filter(|&x| adj[c][x])
                .collect();
            if !next.is_empty() {
                grow_cliques(adj, clique, &next, cap, out);
            }
        }
        clique.pop();
    }
}

/// Flag complex of thresholded quantum pair probabilities, with the literal
/// exponent rule `p >= hbar^m`.
pub fn quantum_complex(
    table: &ProbabilityTable,
    m: f64,
    hbar: f64,
    max_dim: usize,
) -> Result<SimplicialComplex> {
    if table.side != "quantum" {
        return Err(Error::invalid(format!(
            "quantum complex needs a quantum registration table, got a {} one",
            table.side
        )));
    }
    if !(hbar > 0.0 && hbar < 1.0) {
        return Err(Error::invalid(format!(
            "hbar must lie in (0, 1), got {hbar}"
        )));
    }
    quantum_complex_with_threshold(table, hbar.powf(m), max_dim)
}

/// Same flag construction with an explicitly calibrated threshold. The
/// comparison is non-strict, matching the `p >= hbar^m` convention.
pub fn quantum_complex_with_threshold(
    table: &ProbabilityTable,
    threshold: f64,
    max_dim: usize,
) -> Result<SimplicialComplex> {
    if !(threshold >= 0.0) {
        return Err(Error::invalid(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    let labels = sensor_labels(table.len());
    flag_complex(&labels, |i, j| table.pairs[i][j] >= threshold, max_dim)
}

/// Flag complex of overlapping partition supports at `(epsilon, lambda)`.
/// Positivity of the classical pair probability is decided from the support
/// radii, never from quadrature output.
pub fn classical_complex(
    net: &SensorNet,
    epsilon: f64,
    lambda: f64,
    max_dim: usize,
) -> Result<SimplicialComplex> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(lambda > 1.0) {
        return Err(Error::invalid(format!("lambda must exceed 1, got {lambda}")));
    }
    let reach = 2.0 * support_outer_radius(epsilon, lambda);
    let labels = sensor_labels(net.len());
    flag_complex(&labels, |i, j| net.distance(i, j) < reach, max_dim)
}

/// Vietoris-Rips complex at scale `t`: simplices of geodesic diameter
/// strictly below `t`.
pub fn vietoris_rips(net: &SensorNet, t: f64, max_dim: usize) -> Result<SimplicialComplex> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("Rips scale must be positive, got {t}")));
    }
    let labels = sensor_labels(net.len());
    flag_complex(&labels, |i, j| net.distance(i, j) < t, max_dim)
}

/// Sorted, deduplicated set of pairwise geodesic distances of a net; Rips
/// complexes only change when the scale crosses one of these.
pub fn pairwise_distance_set(net: &SensorNet) -> Vec<f64> {
    let mut out = Vec::with_capacity(net.len() * (net.len() - 1) / 2);
    for i in 0..net.len() {
        for j in (i + 1)..net.len() {
            out.push(net.distance(i, j));
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup();
    out
}

/// How nerve simplices are admitted.
pub enum NerveRule<'a> {
    /// `U_I` nonempty, decided by an exact membership witness: quadrature
    /// nodes first, then subdivision grids of increasing depth.
    ClassicalWitness,
    /// Joint registration probability `p_I > hbar^m`, strict, with the
    /// exponent hypothesis `m < 1/8` enforced.
    QuantumThreshold {
        ctx: &'a QuantizationContext,
        m: f64,
    },
    /// Joint registration probability `p_I > tau` for an explicitly
    /// calibrated threshold.
    QuantumCalibrated {
        ctx: &'a QuantizationContext,
        tau: f64,
    },
}

/// Nerve of a cover, admitted simplex by simplex (this is not a flag
/// complex). A simplex enters only if its own joint statistic passes and
/// every facet already entered, so the result is closed by construction.
pub fn nerve_complex(
    cover: &[Region],
    labels: &[String],
    k_max: usize,
    rule: &NerveRule<'_>,
) -> Result<SimplicialComplex> {
    let n = cover.len();
    if n == 0 {
        return Err(Error::invalid("a nerve needs a nonempty cover"));
    }
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "cover has {n} regions but {} labels were supplied",
            labels.len()
        )));
    }
    let cap = k_max.min(MAX_EXPANSION_DIM);

    enum Test {
        Witness(WitnessGrids),
        Quantum {
            effects: Vec<crate::linalg::CMatrix>,
            threshold: f64,
        },
    }
    let test = match rule {
        NerveRule::ClassicalWitness => {
            let grids = WitnessGrids::standard()?;
            grids.verify_cover(cover)?;
            Test::Witness(grids)
        }
        NerveRule::QuantumThreshold { ctx, m } => {
            if !(*m < 0.125) {
                return Err(Error::invalid(format!(
                    "the quantum nerve threshold hypothesis requires m < 1/8, got m = {m}"
                )));
            }
            let effects = cover
                .iter()
                .map(|r| toeplitz_symbol(ctx, &Symbol::Indicator(r)))
                .collect::<Result<Vec<_>>>()?;
            Test::Quantum {
                effects,
                threshold: ctx.hbar().powf(*m),
            }
        }
        NerveRule::QuantumCalibrated { ctx, tau } => {
            if !(*tau >= 0.0) {
                return Err(Error::invalid(format!(
                    "nerve threshold must be nonnegative, got {tau}"
                )));
            }
            let effects = cover
                .iter()
                .map(|r| toeplitz_symbol(ctx, &Symbol::Indicator(r)))
                .collect::<Result<Vec<_>>>()?;
            Test::Quantum {
                effects,
                threshold: *tau,
            }
        }
    };

    let admit = |indices: &[usize]| -> Result<bool> {
        match &test {
            Test::Witness(grids) => Ok(grids.find_witness(cover, indices).is_some()),
            Test::Quantum {
                effects, threshold, ..
            } => {
                let seq: Vec<&crate::linalg::CMatrix> =
                    indices.iter().map(|&i| &effects[i]).collect();
                Ok(quantum_kfold(&seq)? > *threshold)
            }
        }
    };

    let mut simplices: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut vertices = Vec::new();
    for i in 0..n {
        if admit(&[i])? {
            vertices.push(vec![i]);
        }
    }
    simplices.push(vertices);
    for d in 1..=cap {
        let prev = &simplices[d - 1];
        if prev.is_empty() {
            break;
        }
        let mut level = Vec::new();
        for base in prev {
            let last = *base.last().expect("nonempty simplex");
            for j in (last + 1)..n {
                let mut candidate = base.clone();
                candidate.push(j);
                // All facets must already be present; the two facets not
                // containing j are `base` itself and checked implicitly.
                let closed = (0..candidate.len() - 1).all(|drop| {
                    let face: Vec<usize> = candidate
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != drop)
                        .map(|(_, &v)| v)
                        .collect();
                    simplices[d - 1]
                        .binary_search_by(|s| s.as_slice().cmp(face.as_slice()))
                        .is_ok()
                });
                if closed && admit(&candidate)? {
                    level.push(candidate);
                }
            }
        }
        if level.is_empty() {
            break;
        }
        simplices.push(level);
    }
    SimplicialComplex::from_parts(labels.to_vec(), simplices)
}

/// Membership witness search points: a quadrature grid plus icosahedral
/// subdivisions of increasing depth as fallback.
struct WitnessGrids {
    base: SphereQuadrature,
    fallback: Vec<ProbeGrid>,
}

impl WitnessGrids {
    fn standard() -> Result<WitnessGrids> {
        Ok(WitnessGrids {
            base: SphereQuadrature::new(48, 96)?,
            fallback: (3..=6)
                .map(ProbeGrid::icosahedral)
                .collect::<Result<Vec<_>>>()?,
        })
    }

    fn base_points(&self) -> impl Iterator<Item = SpherePoint> + '_ {
        (0..self.base.n_theta()).flat_map(move |t| {
            (0..self.base.n_phi()).map(move |j| self.base.point(t, j))
        })
    }

    fn verify_cover(&self, cover: &[Region]) -> Result<()> {
        for x in self.base_points() {
            if !cover.iter().any(|r| r.contains(&x)) {
                return Err(Error::check(format!(
                    "cover does not cover M: node ({:.6}, {:.6}, {:.6}) is uncovered",
                    x.x(),
                    x.y(),
                    x.z()
                )));
            }
        }
        Ok(())
    }

    fn find_witness(&self, cover: &[Region], indices: &[usize]) -> Option<SpherePoint> {
        let inside =
            |x: &SpherePoint| indices.iter().all(|&i| cover[i].contains(x));
        if let Some(x) = self.base_points().find(|x| inside(x)) {
            return Some(x);
        }
        for grid in &self.fallback {
            if let Some(x) = grid.points().iter().find(|x| inside(x)) {
                return Some(x.clone());
            }
        }
        None
    }
}

/// Simplicial complex with a real filtration value per simplex; faces never
/// appear later than the simplices they bound.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComplex {
    complex: SimplicialComplex,
    values: Vec<Vec<f64>>,
}

impl FilteredComplex {
    pub fn new(complex: SimplicialComplex, values: Vec<Vec<f64>>) -> Result<FilteredComplex> {
        if values.len() != complex.simplices.len()
            || values
                .iter()
                .zip(&complex.simplices)
                .any(|(v, s)| v.len() != s.len())
        {
            return Err(Error::invalid(
                "filtration values must align with the simplex lists",
            ));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("filtration values must be finite"));
        }
        let fc = FilteredComplex { complex, values };
        fc.check_monotone()?;
        Ok(fc)
    }

    /// Every simplex must enter no earlier than each of its faces; the
    /// error names the offending pair.
    pub fn check_monotone(&self) -> Result<()> {
        for d in 1..self.values.len() {
            for (idx, s) in self.complex.simplices[d].iter().enumerate() {
                let v = self.values[d][idx];
                for drop in 0..s.len() {
                    let face: Vec<usize> = s
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != drop)
                        .map(|(_, &v)| v)
                        .collect();
                    let fpos = self
                        .complex
                        .position_of(&face)
                        .expect("complex verified closed");
                    let fv = self.values[d - 1][fpos];
                    if fv > v {
                        return Err(Error::invalid(format!(
                            "filtration is not monotone: simplex {s:?} at {v} precedes its face {face:?} at {fv}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Subcomplex of simplices with filtration value at most `v`.
    pub fn sublevel(&self, v: f64) -> Result<SimplicialComplex> {
        let simplices: Vec<Vec<Vec<usize>>> = self
            .complex
            .simplices
            .iter()
            .zip(&self.values)
            .map(|(list, vals)| {
                list.iter()
                    .zip(vals)
                    .filter(|&(_, &val)| val <= v)
                    .map(|(s, _)| s.clone())
                    .collect()
            })
            .collect();
        SimplicialComplex::from_parts(self.complex.labels.clone(), simplices)
    }

    /// Filtration by nested stages: each simplex gets the first stage value
    /// at which it appears. Stage values must be strictly increasing and
    /// the stages nested.
    pub fn from_stages(stages: &[(f64, SimplicialComplex)]) -> Result<FilteredComplex> {
        if stages.is_empty() {
            return Err(Error::invalid("a filtration needs at least one stage"));
        }
        for w in stages.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::invalid(format!(
                    "stage values must be strictly increasing, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
            if !inclusion_check(&w[0].1, &w[1].1)? {
                return Err(Error::check(format!(
                    "filtration stages are not nested: the stage at {} is not included in the stage at {}",
                    w[0].0, w[1].0
                )));
            }
        }
        let mut first_seen: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (value, complex) in stages {
            for list in &complex.simplices {
                for s in list {
                    first_seen.entry(s.clone()).or_insert(*value);
                }
            }
        }
        let last = &stages[stages.len() - 1].1;
        let values: Vec<Vec<f64>> = last
            .simplices
            .iter()
            .map(|list| {
                list.iter()
                    .map(|s| first_seen[s])
                    .collect()
            })
            .collect();
        FilteredComplex::new(last.clone(), values)
    }

    pub fn complex(&self) -> &SimplicialComplex {
        &self.complex
    }

    pub fn value(&self, dim: usize, idx: usize) -> f64 {
        self.values[dim][idx]
    }

    pub fn values_of(&self, dim: usize) -> &[f64] {
        self.values.get(dim).map_or(&[], |v| v.as_slice())
    }

    /// Sorted, deduplicated filtration grid.
    pub fn grid(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self.values.iter().flatten().copied().collect();
        g.sort_by(|a, b| a.total_cmp(b));
        g.dedup();
        g
    }

    pub fn total_simplices(&self) -> usize {
        self.complex.total_simplices()
    }
}

/// Rips filtration from an explicit distance matrix: every simplex up to
/// `max_dim` on the full point set, filtered by diameter. Quadratic in the
/// simplex count; meant for small point clouds.
pub fn rips_diameter_filtration(
    labels: &[String],
    dist: &[Vec<f64>],
    max_dim: usize,
) -> Result<FilteredComplex> {
    let n = labels.len();
    if dist.len() != n || dist.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("distance matrix shape mismatch"));
    }
    for i in 0..n {
        if dist[i][i] != 0.0 {
            return Err(Error::invalid(format!("nonzero self-distance at {i}")));
        }
        for j in 0..n {
            if !(dist[i][j] >= 0.0) || dist[i][j] != dist[j][i] {
                return Err(Error::invalid(format!(
                    "distance matrix is not symmetric nonnegative at ({i}, {j})"
                )));
            }
        }
    }
    let complex = flag_complex(labels, |_, _| true, max_dim)?;
    let values: Vec<Vec<f64>> = complex
        .simplices
        .iter()
        .map(|list| {
            list.iter()
                .map(|s| {
                    let mut diam: f64 = 0.0;
                    for a in 0..s.len() {
                        for b in (a + 1)..s.len() {
                            diam = diam.max(dist[s[a]][s[b]]);
                        }
                    }
                    diam
                })
                .collect()
        })
        .collect();
    FilteredComplex::new(complex, values)
}

/// Rips filtration of a sensor net by geodesic diameter.
pub fn net_rips_filtration(net: &SensorNet, max_dim: usize) -> Result<FilteredComplex> {
    let n = net.len();
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { net.distance(i, j) }).collect())
        .collect();
    rips_diameter_filtration(&sensor_labels(n), &dist, max_dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PartitionOfUnity;
    use crate::registration::{PairRoute, RegistrationSuite};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn letters(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{}", (b'a' + i as u8) as char)).collect()
    }

    #[test]
    fn empty_predicate_gives_vertices_only() {
        let c = flag_complex(&letters(4), |_, _| false, 2).unwrap();
        assert_eq!(c.counts(), vec![4]);
        assert_eq!(c.dim(), Some(0));
    }

    #[test]
    fn complete_predicate_gives_full_simplex() {
        let c = flag_complex(&letters(4), |_, _| true, 3).unwrap();
        assert_eq!(c.counts(), vec![4, 6, 4, 1]);
        assert_eq!(c.euler_characteristic(), 1);
        c.verify_closed().unwrap();
        // Expansion caps at dimension 3 even if more is requested.
        let capped = flag_complex(&letters(6), |_, _| true, 5).unwrap();
        assert_eq!(capped.dim(), Some(3));
    }

    #[test]
    fn triangle_plus_isolated_vertex() {
        let tri = |i: usize, j: usize| i != 3 && j != 3;
        let c = flag_complex(&letters(4), tri, 2).unwrap();
        assert_eq!(c.counts(), vec![4, 3, 1]);
        assert!(c.has_simplex(&[0, 1, 2]));
        assert!(!c.has_simplex(&[0, 3]));
    }

    #[test]
    fn asymmetric_predicate_is_rejected() {
        let err = flag_complex(&letters(3), |i, j| i < j, 2).unwrap_err();
        assert!(err.to_string().contains("not symmetric"));
    }

    fn tripod_net() -> SensorNet {
        // Pairwise geodesic distances are exactly pi/2 in floating point.
        SensorNet::from_points(vec![
            SpherePoint::north_pole(),
            SpherePoint::new(1.0, 0.0, 0.0).unwrap(),
            SpherePoint::new(0.0, 1.0, 0.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn rips_threshold_is_strict() {
        let net = tripod_net();
        assert_abs_diff_eq!(net.distance(0, 1), FRAC_PI_2, epsilon = 0.0);
        let at = vietoris_rips(&net, FRAC_PI_2, 2).unwrap();
        assert_eq!(at.counts(), vec![3]);
        let above = vietoris_rips(&net, FRAC_PI_2 * 1.01, 2).unwrap();
        assert_eq!(above.counts(), vec![3, 3, 1]);
    }

    fn square_net() -> SensorNet {
        SensorNet::from_points(vec![
            SpherePoint::new(1.0, 0.0, 0.0).unwrap(),
            SpherePoint::new(0.0, 1.0, 0.0).unwrap(),
            SpherePoint::new(-1.0, 0.0, 0.0).unwrap(),
            SpherePoint::new(0.0, -1.0, 0.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn square_between_side_and_diagonal_is_a_cycle() {
        // Sides pi/2, diagonals pi: a scale in between keeps the four sides
        // and no triangles.
        let c = vietoris_rips(&square_net(), 2.0, 2).unwrap();
        assert_eq!(c.counts(), vec![4, 4]);
        assert_eq!(c.euler_characteristic(), 0);
        assert!(c.has_simplex(&[0, 1]));
        assert!(!c.has_simplex(&[0, 2]));
    }

    #[test]
    fn rips_is_locally_constant_between_distance_values() {
        let net = SensorNet::fibonacci(20).unwrap();
        let gammas = pairwise_distance_set(&net);
        // Pick an interior gap and two scales inside it.
        let (lo, hi) = (gammas[4], gammas[5]);
        let t1 = lo + 0.25 * (hi - lo);
        let t2 = lo + 0.75 * (hi - lo);
        let r1 = vietoris_rips(&net, t1, 2).unwrap();
        let r2 = vietoris_rips(&net, t2, 2).unwrap();
        assert_eq!(r1, r2);
        // Crossing the gap boundary changes the complex.
        let r3 = vietoris_rips(&net, hi * 1.000001, 2).unwrap();
        assert_ne!(r1, r3);
    }

    #[test]
    fn classical_complex_sits_between_rips_scales() {
        let net = SensorNet::fibonacci(30).unwrap();
        let (eps, lam) = (0.5, 1.3);
        let c = classical_complex(&net, eps, lam, 2).unwrap();
        let below = vietoris_rips(&net, eps / lam, 2).unwrap();
        let above = vietoris_rips(&net, lam * eps, 2).unwrap();
        assert!(inclusion_check(&below, &c).unwrap());
        assert!(inclusion_check(&c, &above).unwrap());
    }

    #[test]
    fn quantum_complex_trivial_thresholds() {
        let net = SensorNet::fibonacci(10).unwrap();
        let grid = ProbeGrid::icosahedral(4).unwrap();
        let pou = PartitionOfUnity::build(net.into(), 1.3, 1.4, &grid).unwrap();
        let ctx = QuantizationContext::with_defaults(8).unwrap();
        let suite = RegistrationSuite::build(&ctx, &pou, 1e-9).unwrap();
        let table = suite.quantum_table(PairRoute::Matrix).unwrap();
        // The literal hbar^m rule at desk scale exceeds every pair
        // probability (the table sums to 1), leaving vertices only.
        let literal = quantum_complex(&table, 0.5, ctx.hbar(), 2).unwrap();
        assert_eq!(literal.counts(), vec![10]);
        // Threshold zero admits every edge.
        let complete = quantum_complex_with_threshold(&table, 0.0, 2).unwrap();
        assert_eq!(complete.counts()[1], 45);
        // A classical table is refused.
        let ct = suite.classical_table();
        assert!(quantum_complex(&ct, 0.5, ctx.hbar(), 2).is_err());
    }

    #[test]
    fn quantum_matches_classical_at_calibrated_threshold() {
        let net = SensorNet::icosahedron();
        let grid = ProbeGrid::icosahedral(4).unwrap();
        let (eps, lam) = (1.0, 1.4);
        let pou = PartitionOfUnity::build(net.into(), eps, lam, &grid).unwrap();
        let ctx = QuantizationContext::with_defaults(64).unwrap();
        let suite = RegistrationSuite::build(&ctx, &pou, 1e-9).unwrap();
        let qt = suite.quantum_table(PairRoute::Matrix).unwrap();
        let classical = classical_complex(pou.net(), eps, lam, 2).unwrap();
        // The support reach sits between the icosahedron edge length and
        // the next distance value, so the classical complex is the
        // icosahedron itself.
        assert_eq!(classical.counts(), vec![12, 30, 20]);
        assert_eq!(classical.euler_characteristic(), 2);

        // Calibrate: the threshold separates overlapping from disjoint
        // supports with a clear window on both sides.
        let mut overlap_min = f64::INFINITY;
        let mut disjoint_max: f64 = 0.0;
        for i in 0..12 {
            for j in 0..12 {
                if i == j {
                    continue;
                }
                if pou.supports_overlap(i, j) {
                    overlap_min = overlap_min.min(qt.pairs[i][j]);
                } else {
                    disjoint_max = disjoint_max.max(qt.pairs[i][j]);
                }
            }
        }
        assert!(
            disjoint_max < overlap_min / 10.0,
            "no separation window: disjoint max {disjoint_max}, overlap min {overlap_min}"
        );
        let tau = (overlap_min * disjoint_max.max(1e-300)).sqrt();
        let quantum = quantum_complex_with_threshold(&qt, tau, 2).unwrap();
        assert_eq!(quantum, classical);
    }

    #[test]
    fn nerve_of_single_full_cover_is_a_point() {
        let cover = vec![Region::Full];
        let c = nerve_complex(&cover, &letters(1), 3, &NerveRule::ClassicalWitness).unwrap();
        assert_eq!(c.counts(), vec![1]);
    }

    #[test]
    fn nerve_of_two_disjoint_caps_has_no_edge() {
        // Caps of radius 0.4 around the poles do not cover the sphere, so
        // pad the cover with the full region to satisfy the covering check;
        // the two caps still meet nothing.
        let cover = vec![
            Region::cap(SpherePoint::north_pole(), 0.4).unwrap(),
            Region::cap(SpherePoint::south_pole(), 0.4).unwrap(),
            Region::Full,
        ];
        let c = nerve_complex(&cover, &letters(3), 2, &NerveRule::ClassicalWitness).unwrap();
        assert_eq!(c.counts(), vec![3, 2]);
        assert!(c.has_simplex(&[0, 2]));
        assert!(c.has_simplex(&[1, 2]));
        assert!(!c.has_simplex(&[0, 1]));
    }

    fn tetrahedral_caps(radius: f64) -> Vec<Region> {
        let s = 1.0 / 3f64.sqrt();
        [
            [s, s, s],
            [s, -s, -s],
            [-s, s, -s],
            [-s, -s, s],
        ]
        .iter()
        .map(|c| Region::cap(SpherePoint::new(c[0], c[1], c[2]).unwrap(), radius).unwrap())
        .collect()
    }

    #[test]
    fn tetrahedral_cap_nerve_is_a_simplex_boundary() {
        // Radius between the covering radius acos(1/3) ~ 1.2310 and the
        // minimax radius acos(-1/3) ~ 1.9106: the four caps cover, triples
        // meet, but no point lies in all four.
        let cover = tetrahedral_caps(1.4);
        let c = nerve_complex(&cover, &letters(4), 3, &NerveRule::ClassicalWitness).unwrap();
        assert_eq!(c.counts(), vec![4, 6, 4]);
        assert_eq!(c.euler_characteristic(), 2);
        // Enlarging past the minimax radius fills in the solid simplex.
        let filled = nerve_complex(
            &tetrahedral_caps(1.95),
            &letters(4),
            3,
            &NerveRule::ClassicalWitness,
        )
        .unwrap();
        assert_eq!(filled.counts(), vec![4, 6, 4, 1]);
    }

    #[test]
    fn quantum_nerve_enforces_the_exponent_hypothesis() {
        let cover = tetrahedral_caps(1.4);
        let ctx = QuantizationContext::with_defaults(6).unwrap();
        let err = nerve_complex(
            &cover,
            &letters(4),
            2,
            &NerveRule::QuantumThreshold { ctx: &ctx, m: 0.125 },
        )
        .unwrap_err();
        assert!(err.to_string().contains("m < 1/8"));
        // Legal exponent: the literal threshold hbar^m is huge at desk
        // scale, so nothing passes; the calibrated rule recovers the
        // boundary of the simplex.
        let literal = nerve_complex(
            &cover,
            &letters(4),
            2,
            &NerveRule::QuantumThreshold { ctx: &ctx, m: 0.1 },
        )
        .unwrap();
        assert_eq!(literal.total_simplices(), 0);
        let ctx = QuantizationContext::with_defaults(24).unwrap();
        let calibrated = nerve_complex(
            &cover,
            &letters(4),
            3,
            &NerveRule::QuantumCalibrated { ctx: &ctx, tau: 1e-4 },
        )
        .unwrap();
        assert_eq!(calibrated.counts(), vec![4, 6, 4]);
    }

    #[test]
    fn inclusion_requires_matching_labels() {
        let a = flag_complex(&letters(3), |_, _| true, 2).unwrap();
        let b = flag_complex(&letters(4), |_, _| true, 2).unwrap();
        assert!(inclusion_check(&a, &b).is_err());
        assert!(inclusion_check(&a, &a).unwrap());
    }

    #[test]
    fn json_export_layout() {
        let c = vietoris_rips(&square_net(), 2.0, 2).unwrap();
        let v = c.to_json();
        assert_eq!(v["vertices"].as_array().unwrap().len(), 4);
        assert_eq!(v["simplices"]["0"].as_array().unwrap().len(), 4);
        assert_eq!(v["simplices"]["1"].as_array().unwrap().len(), 4);
        assert!(v["simplices"].get("2").is_none());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("complex.json");
        c.write_json(&path).unwrap();
        let parsed: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parsed, v);
    }

    #[test]
    fn filtered_complex_rejects_non_monotone_values() {
        let c = flag_complex(&letters(2), |_, _| true, 1).unwrap();
        let err = FilteredComplex::new(c, vec![vec![0.5, 0.0], vec![0.25]]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[0, 1]") && msg.contains("0.25") && msg.contains("0.5"), "{msg}");
    }

    #[test]
    fn stage_filtration_records_first_appearance() {
        let net = square_net();
        let stages = vec![
            (1.0, vietoris_rips(&net, 1.0, 2).unwrap()),
            (2.0, vietoris_rips(&net, 2.0, 2).unwrap()),
            (3.5, vietoris_rips(&net, 3.5, 2).unwrap()),
        ];
        let fc = FilteredComplex::from_stages(&stages).unwrap();
        assert_eq!(fc.complex().counts(), vec![4, 6, 4]);
        assert!(fc.values_of(0).iter().all(|&v| v == 1.0));
        let side = fc.complex().position_of(&[0, 1]).unwrap();
        let diag = fc.complex().position_of(&[0, 2]).unwrap();
        assert_eq!(fc.value(1, side), 2.0);
        assert_eq!(fc.value(1, diag), 3.5);
        // Shuffled stages are rejected.
        let bad = vec![stages[1].clone(), stages[0].clone()];
        assert!(FilteredComplex::from_stages(&bad).is_err());
    }

    #[test]
    fn diameter_filtration_of_the_square_cloud() {
        // Planar unit square: sides 1, diagonals sqrt(2).
        let d = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let dist: Vec<Vec<f64>> = pts
            .iter()
            .map(|&a| pts.iter().map(|&b| d(a, b)).collect())
            .collect();
        let fc = rips_diameter_filtration(&letters(4), &dist, 3).unwrap();
        assert_eq!(fc.complex().counts(), vec![4, 6, 4, 1]);
        let grid = fc.grid();
        assert_eq!(grid.len(), 3);
        assert_abs_diff_eq!(grid[1], 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(grid[2], 2f64.sqrt(), epsilon = 1e-15);
        // Triangles contain a diagonal, so they all enter at sqrt(2).
        assert!(fc.values_of(2).iter().all(|&v| v == grid[2]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rips_complexes_are_monotone_in_scale(
            s in 0.05f64..3.0,
            extra in 0.01f64..1.0,
        ) {
            let net = SensorNet::fibonacci(18).unwrap();
            let small = vietoris_rips(&net, s, 2).unwrap();
            let large = vietoris_rips(&net, s + extra, 2).unwrap();
            prop_assert!(inclusion_check(&small, &large).unwrap());
        }

        #[test]
        fn classical_complexes_are_monotone_in_epsilon(
            e1 in 0.1f64..1.2,
            extra in 0.01f64..0.8,
        ) {
            let net = SensorNet::fibonacci(16).unwrap();
            let small = classical_complex(&net, e1, 1.3, 2).unwrap();
            let large = classical_complex(&net, e1 + extra, 1.3, 2).unwrap();
            prop_assert!(inclusion_check(&small, &large).unwrap());
        }

        #[test]
        fn flag_complexes_are_closed(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1usize..8);
            let mut adj = vec![vec![false; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let e = rng.gen_bool(0.5);
                    adj[i][j] = e;
                    adj[j][i] = e;
                }
            }
            let c = flag_complex(&letters(n), |i, j| adj[i][j], 3).unwrap();
            c.verify_closed().unwrap();
        }
    }
}
