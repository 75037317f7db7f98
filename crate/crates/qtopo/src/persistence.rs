//! Persistent homology over Z/2.
//!
//! Boundary-matrix reduction with the clearing optimization yields barcodes;
//! persistent-image ranks come from two-step filtrations; a dense
//! Gaussian-elimination oracle cross-checks every rank claim. Coefficients
//! are fixed to Z/2: only ranks are ever asserted, so the cheapest field
//! wins.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::complexes::{inclusion_check, FilteredComplex, SimplicialComplex};
use crate::error::Error;
use crate::Result;

/// One interval of a persistence barcode, half-open `[birth, death)`;
/// essential classes carry `death = +inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub birth: f64,
    pub death: f64,
}

impl Bar {
    pub fn is_essential(&self) -> bool {
        self.death.is_infinite()
    }

    /// Whether the closed interval `[a, b]` sits inside the bar.
    pub fn contains_interval(&self, a: f64, b: f64) -> bool {
        self.birth <= a && b < self.death
    }
}

/// Bars per homology degree, sorted by (birth, death) within each degree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Barcode {
    degrees: Vec<Vec<Bar>>,
}

impl Barcode {
    pub fn bars(&self, degree: usize) -> &[Bar] {
        self.degrees.get(degree).map_or(&[], |b| b.as_slice())
    }

    pub fn max_degree(&self) -> Option<usize> {
        if self.degrees.is_empty() {
            None
        } else {
            Some(self.degrees.len() - 1)
        }
    }

    pub fn total_bars(&self) -> usize {
        self.degrees.iter().map(|b| b.len()).sum()
    }

    /// Betti number at parameter `v`: bars alive there.
    pub fn betti_at(&self, degree: usize, v: f64) -> usize {
        self.bars(degree)
            .iter()
            .filter(|b| b.birth <= v && v < b.death)
            .count()
    }

    /// Number of degree-`q` bars containing the closed interval `[a, b]`.
    pub fn bars_containing(&self, degree: usize, a: f64, b: f64) -> usize {
        self.bars(degree)
            .iter()
            .filter(|bar| bar.contains_interval(a, b))
            .count()
    }

    pub fn essential_count(&self, degree: usize) -> usize {
        self.bars(degree).iter().filter(|b| b.is_essential()).count()
    }

    /// `{degree: [[birth, death|null], ...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (q, bars) in self.degrees.iter().enumerate() {
            if bars.is_empty() {
                continue;
            }
            let list: Vec<serde_json::Value> = bars
                .iter()
                .map(|b| {
                    let death = if b.is_essential() {
                        serde_json::Value::Null
                    } else {
                        json!(b.death)
                    };
                    json!([b.birth, death])
                })
                .collect();
            map.insert(q.to_string(), json!(list));
        }
        serde_json::Value::Object(map)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, &self.to_json())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Standard column reduction, simplices ordered by
/// (filtration value, dimension, lexicographic tuple).
pub fn reduce_to_barcode(fc: &FilteredComplex, max_degree: usize) -> Result<Barcode> {
    reduce_with_tiebreak(fc, max_degree, None)
}

/// Same reduction with same-value, same-dimension ties broken by a seeded
/// hash instead of lexicographic order. The barcode must not depend on the
/// seed; this entry point exists to test exactly that.
pub fn reduce_to_barcode_seeded(
    fc: &FilteredComplex,
    max_degree: usize,
    seed: u64,
) -> Result<Barcode> {
    reduce_with_tiebreak(fc, max_degree, Some(seed))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn tuple_hash(seed: u64, tuple: &[usize]) -> u64 {
    let mut h = splitmix(seed);
    for &v in tuple {
        h = splitmix(h ^ v as u64);
    }
    h
}

fn reduce_with_tiebreak(
    fc: &FilteredComplex,
    max_degree: usize,
    seed: Option<u64>,
) -> Result<Barcode> {
    fc.check_monotone()?;
    let complex = fc.complex();
    let n_dims = complex.dim().map_or(0, |d| d + 1);
    if n_dims == 0 {
        return Ok(Barcode::default());
    }

    // Per-dimension filtration order: (value, tie key, tuple).
    let mut order: Vec<Vec<usize>> = Vec::with_capacity(n_dims);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(n_dims);
    let mut position: HashMap<&[usize], usize> = HashMap::new();
    for d in 0..n_dims {
        let list = complex.simplices_of(d);
        let mut idx: Vec<usize> = (0..list.len()).collect();
        idx.sort_by(|&a, &b| {
            let (va, vb) = (fc.value(d, a), fc.value(d, b));
            va.total_cmp(&vb)
                .then_with(|| match seed {
                    Some(s) => tuple_hash(s, &list[a]).cmp(&tuple_hash(s, &list[b])),
                    None => std::cmp::Ordering::Equal,
                })
                .then_with(|| list[a].cmp(&list[b]))
        });
        values.push(idx.iter().map(|&i| fc.value(d, i)).collect());
        for (pos, &i) in idx.iter().enumerate() {
            position.insert(list[i].as_slice(), pos);
        }
        order.push(idx);
    }

    // Boundary columns per dimension, rows indexed by the (d-1)-order.
    let mut columns: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n_dims];
    for d in 1..n_dims {
        let list = complex.simplices_of(d);
        columns[d] = order[d]
            .iter()
            .map(|&i| {
                let s = &list[i];
                let mut col: Vec<usize> = (0..s.len())
                    .map(|drop| {
                        let face: Vec<usize> = s
                            .iter()
                            .enumerate()
                            .filter(|&(k, _)| k != drop)
                            .map(|(_, &v)| v)
                            .collect();
                        position[face.as_slice()]
                    })
                    .collect();
                col.sort_unstable();
                col
            })
            .collect();
    }

    let mut bars: Vec<Vec<Bar>> = vec![Vec::new(); n_dims];
    // cleared[d][pos]: the d-simplex at pos is a pivot row of the (d+1)
    // reduction, hence a positive column that the twist lets us skip.
    let mut cleared: Vec<Vec<bool>> = (0..n_dims)
        .map(|d| vec![false; complex.simplices_of(d).len()])
        .collect();

    for d in (1..n_dims).rev() {
        let cols = &mut columns[d];
        let mut pivot_of_row: HashMap<usize, usize> = HashMap::new();
        for p in 0..cols.len() {
            if cleared[d][p] {
                cols[p].clear();
                continue;
            }
            loop {
                let Some(&low) = cols[p].last() else { break };
                match pivot_of_row.get(&low) {
                    Some(&q) => {
                        let merged = xor_sorted(&cols[p], &cols[q]);
                        cols[p] = merged;
                    }
                    None => {
                        pivot_of_row.insert(low, p);
                        cleared[d - 1][low] = true;
                        let (birth, death) = (values[d - 1][low], values[d][p]);
                        if birth < death {
                            bars[d - 1].push(Bar { birth, death });
                        }
                        break;
                    }
                }
            }
        }
        // Positive columns of dimension d that no (d+1)-column killed are
        // essential classes.
        for p in 0..cols.len() {
            if cols[p].is_empty() && !cleared[d][p] {
                bars[d].push(Bar {
                    birth: values[d][p],
                    death: f64::INFINITY,
                });
            }
        }
    }
    for p in 0..complex.simplices_of(0).len() {
        if !cleared[0][p] {
            bars[0].push(Bar {
                birth: values[0][p],
                death: f64::INFINITY,
            });
        }
    }

    bars.truncate(max_degree + 1);
    for list in &mut bars {
        list.sort_by(|a, b| a.birth.total_cmp(&b.birth).then(a.death.total_cmp(&b.death)));
    }
    while bars.last().is_some_and(|l| l.is_empty()) {
        bars.pop();
    }
    Ok(Barcode { degrees: bars })
}

fn xor_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Rank of the map `H_q(K_a) -> H_q(K_b)` induced by inclusion, computed by
/// reducing the two-step filtration (0 on `K_a`, 1 on the rest of `K_b`)
/// and counting degree-`q` bars that are born at 0 and survive past 1.
pub fn persistent_image_rank(
    ka: &SimplicialComplex,
    kb: &SimplicialComplex,
    degree: usize,
) -> Result<usize> {
    if !inclusion_check(ka, kb)? {
        return Err(Error::check(
            "persistent image rank requires the first complex to be included in the second",
        ));
    }
    let stages = vec![(0.0, ka.clone()), (1.0, kb.clone())];
    let fc = FilteredComplex::from_stages(&stages)?;
    let barcode = reduce_to_barcode(&fc, degree)?;
    Ok(barcode
        .bars(degree)
        .iter()
        .filter(|b| b.birth == 0.0 && b.death > 1.0)
        .count())
}

/// Betti number of a single complex through the reduction route.
pub fn betti_number(k: &SimplicialComplex, degree: usize) -> Result<usize> {
    persistent_image_rank(k, k, degree)
}

/// Ranks and transition ranks of a filtration family, zeroed outside a
/// closed window `J`.
#[derive(Debug, Clone, Serialize)]
pub struct TruncatedModule {
    pub degree: usize,
    pub grid: Vec<f64>,
    pub window: (f64, f64),
    /// `ranks[i]` = Betti at `grid[i]`, or 0 outside the window.
    pub ranks: Vec<usize>,
    /// `transitions[i][j]` = image rank `grid[i] -> grid[j]` for `i <= j`
    /// with `[grid[i], grid[j]]` inside the window; 0 otherwise.
    pub transitions: Vec<Vec<usize>>,
}

impl TruncatedModule {
    pub fn rank_at(&self, i: usize) -> usize {
        self.ranks[i]
    }

    pub fn transition(&self, i: usize, j: usize) -> usize {
        self.transitions[i][j]
    }
}

/// Truncate a nested family of complexes to the window `J = [lo, hi]`.
pub fn truncated_module(
    stages: &[(f64, SimplicialComplex)],
    degree: usize,
    window: (f64, f64),
) -> Result<TruncatedModule> {
    if stages.is_empty() {
        return Err(Error::invalid("a module needs at least one stage"));
    }
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(Error::invalid(format!(
            "window bounds are not ordered: [{lo}, {hi}]"
        )));
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
                "stages are not nested at {} -> {}",
                w[0].0, w[1].0
            )));
        }
    }
    let grid: Vec<f64> = stages.iter().map(|(v, _)| *v).collect();
    let inside = |v: f64| lo <= v && v <= hi;
    let n = stages.len();
    let mut ranks = vec![0usize; n];
    for (i, (v, k)) in stages.iter().enumerate() {
        if inside(*v) {
            ranks[i] = betti_number(k, degree)?;
        }
    }
    let mut transitions = vec![vec![0usize; n]; n];
    for i in 0..n {
        for j in i..n {
            if inside(grid[i]) && inside(grid[j]) {
                transitions[i][j] = if i == j {
                    ranks[i]
                } else {
                    persistent_image_rank(&stages[i].1, &stages[j].1, degree)?
                };
            }
        }
    }
    Ok(TruncatedModule {
        degree,
        grid,
        window,
        ranks,
        transitions,
    })
}

/// One sampled parameter of an interleaving check.
#[derive(Debug, Clone, Serialize)]
pub struct InterleavingSample {
    pub s: f64,
    /// `A_s included in B_{lambda s}`.
    pub a_in_b: bool,
    /// `B_s included in A_{lambda s}`.
    pub b_in_a: bool,
    /// First offending simplex and the direction it broke.
    pub witness: Option<(String, Vec<usize>)>,
}

/// Complex-level interleaving report between two families.
#[derive(Debug, Clone, Serialize)]
pub struct InterleavingReport {
    pub lambda: f64,
    pub samples: Vec<InterleavingSample>,
    pub holds: bool,
}

impl InterleavingReport {
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "interleaving check at lambda = {:.6}: {}\n",
            self.lambda,
            if self.holds { "holds" } else { "FAILS" }
        );
        for s in &self.samples {
            out.push_str(&format!(
                "  s = {:<12.6} A⊆B(λs): {:<5} B⊆A(λs): {:<5}",
                s.s, s.a_in_b, s.b_in_a
            ));
            if let Some((dir, w)) = &s.witness {
                out.push_str(&format!("  witness {dir}: {w:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Verify the two simplicial inclusions `A_s ⊆ B_{λs}` and `B_s ⊆ A_{λs}`
/// at every sampled parameter. The homology-level interleaving follows
/// functorially; the complex-level containment is what is checked.
pub fn interleaving_check<FA, FB>(
    family_a: FA,
    family_b: FB,
    lambda: f64,
    samples: &[f64],
) -> Result<InterleavingReport>
where
    FA: Fn(f64) -> Result<SimplicialComplex>,
    FB: Fn(f64) -> Result<SimplicialComplex>,
{
    if !(lambda >= 1.0) {
        return Err(Error::invalid(format!(
            "interleaving constant must be at least 1, got {lambda}"
        )));
    }
    if samples.is_empty() {
        return Err(Error::invalid("interleaving check needs sample parameters"));
    }
    let mut out = Vec::with_capacity(samples.len());
    let mut holds = true;
    for &s in samples {
        if !(s > 0.0) {
            return Err(Error::invalid(format!(
                "interleaving parameters must be positive, got {s}"
            )));
        }
        let a_s = family_a(s)?;
        let b_ls = family_b(lambda * s)?;
        let b_s = family_b(s)?;
        let a_ls = family_a(lambda * s)?;
        let missing_ab = crate::complexes::find_missing_simplex(&a_s, &b_ls)?;
        let missing_ba = crate::complexes::find_missing_simplex(&b_s, &a_ls)?;
        let witness = match (&missing_ab, &missing_ba) {
            (Some(w), _) => Some(("A⊆B".to_string(), w.clone())),
            (None, Some(w)) => Some(("B⊆A".to_string(), w.clone())),
            (None, None) => None,
        };
        let sample = InterleavingSample {
            s,
            a_in_b: missing_ab.is_none(),
            b_in_a: missing_ba.is_none(),
            witness,
        };
        holds &= sample.a_in_b && sample.b_in_a;
        out.push(sample);
    }
    Ok(InterleavingReport {
        lambda,
        samples: out,
        holds,
    })
}

/// Hard cap for the dense oracle.
pub const BRUTEFORCE_SIMPLEX_CAP: usize = 50_000;

/// Z/2 homology rank by dense Gaussian elimination of the boundary maps.
/// Independent of the reduction code path on purpose.
pub fn homology_rank_bruteforce(k: &SimplicialComplex, degree: usize) -> Result<usize> {
    let total = k.total_simplices();
    if total > BRUTEFORCE_SIMPLEX_CAP {
        return Err(Error::size_cap(format!(
            "brute-force homology is capped at {BRUTEFORCE_SIMPLEX_CAP} simplices, got {total}"
        )));
    }
    let n_q = k.simplices_of(degree).len();
    if n_q == 0 {
        return Ok(0);
    }
    let rank_d_q = boundary_rank(k, degree);
    let rank_d_q1 = boundary_rank(k, degree + 1);
    Ok(n_q - rank_d_q - rank_d_q1)
}

/// Rank of the boundary map from dimension `d` to `d - 1` over Z/2.
fn boundary_rank(k: &SimplicialComplex, d: usize) -> usize {
    if d == 0 {
        return 0;
    }
    let cols = k.simplices_of(d);
    let rows = k.simplices_of(d - 1);
    if cols.is_empty() || rows.is_empty() {
        return 0;
    }
    let row_index: HashMap<&[usize], usize> = rows
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect();
    let words = rows.len().div_ceil(64);
    // Column-major bit matrix; eliminate columns.
    let mut matrix: Vec<Vec<u64>> = cols
        .iter()
        .map(|s| {
            let mut col = vec![0u64; words];
            for drop in 0..s.len() {
                let face: Vec<usize> = s
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != drop)
                    .map(|(_, &v)| v)
                    .collect();
                let r = row_index[face.as_slice()];
                col[r / 64] ^= 1 << (r % 64);
            }
            col
        })
        .collect();
    let mut pivot_cols: Vec<Vec<u64>> = Vec::new();
    let mut pivot_of_row: HashMap<usize, usize> = HashMap::new();
    for mut col in matrix.drain(..) {
        loop {
            let Some(r) = first_set_bit(&col) else { break };
            if let Some(&pi) = pivot_of_row.get(&r) {
                for (w, pw) in col.iter_mut().zip(&pivot_cols[pi]) {
                    *w ^= pw;
                }
            } else {
                pivot_of_row.insert(r, pivot_cols.len());
                pivot_cols.push(col);
                break;
            }
        }
    }
    pivot_cols.len()
}

fn first_set_bit(col: &[u64]) -> Option<usize> {
    for (w, &word) in col.iter().enumerate() {
        if word != 0 {
            return Some(w * 64 + word.trailing_zeros() as usize);
        }
    }
    None
}

/// Greedy multiplicative matching diagnostic between two bar lists: an
/// upper bound on the log-scale bottleneck distance. Purely informational.
pub fn greedy_log_matching(a: &[Bar], b: &[Bar]) -> Result<f64> {
    let log_bar = |bar: &Bar| -> Result<(f64, f64)> {
        if !(bar.birth > 0.0) {
            return Err(Error::invalid(format!(
                "log-scale matching needs positive births, got {}",
                bar.birth
            )));
        }
        Ok((bar.birth.ln(), bar.death.ln()))
    };
    let dist = |x: (f64, f64), y: (f64, f64)| -> f64 {
        let dd = if x.1.is_infinite() && y.1.is_infinite() {
            0.0
        } else {
            (x.1 - y.1).abs()
        };
        (x.0 - y.0).abs().max(dd)
    };
    let diag = |x: (f64, f64)| -> f64 {
        if x.1.is_infinite() {
            f64::INFINITY
        } else {
            (x.1 - x.0) / 2.0
        }
    };
    let la = a.iter().map(&log_bar).collect::<Result<Vec<_>>>()?;
    let lb = b.iter().map(&log_bar).collect::<Result<Vec<_>>>()?;
    let mut used = vec![false; lb.len()];
    let mut bottleneck: f64 = 0.0;
    for &x in &la {
        let best = lb
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, &y)| (dist(x, y), j))
            .min_by(|p, q| p.0.total_cmp(&q.0));
        match best {
            Some((d, j)) if d <= diag(x) => {
                used[j] = true;
                bottleneck = bottleneck.max(d);
            }
            _ => bottleneck = bottleneck.max(diag(x)),
        }
    }
    for (j, &y) in lb.iter().enumerate() {
        if !used[j] {
            bottleneck = bottleneck.max(diag(y));
        }
    }
    Ok(bottleneck)
}
