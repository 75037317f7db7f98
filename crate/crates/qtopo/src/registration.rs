//! Registration statistics: which sensors fire, classically and quantumly.
//!
//! The classical model draws a point from the normalized area measure; a
//! probe registers at sensor `i` with probability `f_i(x)`, where the `f_i`
//! form a partition of unity, and repeated probes of the same point are
//! conditionally independent. The quantum model replaces `f_i` by the
//! Toeplitz effect `F_i = T(f_i)` acting on the maximally mixed state, with
//! sequential registration given by the square-root (Lüders) instrument.
//!
//! Pair probabilities admit two independent quantum routes that must agree:
//! the operator trace `tr(F_i F_j) / d` and the double kernel integral of
//! `f_i(x) f_j(y) |K(x, y)|^2` over the same quadrature grid.

use std::io::Write as _;
use std::path::Path;

use num::{BigInt, BigRational, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::geometry::{PartitionOfUnity, SpherePoint};
use crate::linalg::{
    eigvalsh, hermitize, identity, max_abs_entry, sqrt_psd, trace_product_re, trace_re, CMatrix,
};
use crate::quadrature::SphereQuadrature;
use crate::quantize::{
    kernel_intensity_closed, partition_member_grids, toeplitz_from_grid, toeplitz_symbol,
    QuantizationContext,
};
use crate::symbols::{Region, Symbol};
use crate::Result;

/// Which computation produced a quantum pair table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRoute {
    /// Normalized traces of effect products.
    Matrix,
    /// Double kernel-intensity quadrature.
    Kernel,
    /// Both, cross-checked entry by entry.
    Checked,
}

/// Single and pair registration probabilities with their provenance.
#[derive(Debug, Clone, Serialize)]
pub struct ProbabilityTable {
    pub side: &'static str,
    pub route: &'static str,
    pub k: Option<usize>,
    pub hbar: Option<f64>,
    pub epsilon: f64,
    pub lambda: f64,
    pub singles: Vec<f64>,
    pub pairs: Vec<Vec<f64>>,
}

impl ProbabilityTable {
    pub fn len(&self) -> usize {
        self.singles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singles.is_empty()
    }

    /// Entry-range and mass identities every registration table satisfies.
    pub fn validate(&self) -> Result<()> {
        let n = self.singles.len();
        if self.pairs.len() != n || self.pairs.iter().any(|r| r.len() != n) {
            return Err(Error::check("probability table shape mismatch"));
        }
        for v in self.singles.iter().chain(self.pairs.iter().flatten()) {
            if !(-1e-12..=1.0 + 1e-12).contains(v) {
                return Err(Error::check(format!(
                    "probability {v} outside [0, 1]"
                )));
            }
        }
        let singles_mass: f64 = self.singles.iter().sum();
        if (singles_mass - 1.0).abs() > 1e-10 {
            return Err(Error::check(format!(
                "single registration mass {singles_mass} differs from 1"
            )));
        }
        let pair_mass: f64 = self.pairs.iter().flatten().sum();
        if (pair_mass - 1.0).abs() > 1e-10 {
            return Err(Error::check(format!(
                "pair registration mass {pair_mass} differs from 1"
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.pairs[i][j] - self.pairs[j][i]).abs() > 1e-13 {
                    return Err(Error::check(format!(
                        "pair table asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pair entries as `z,w,p` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["z", "w", "p"])?;
        for (z, row) in self.pairs.iter().enumerate() {
            for (wi, p) in row.iter().enumerate() {
                w.write_record([z.to_string(), wi.to_string(), format!("{p:.17e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// A POVM together with the square roots of its effects, ready for
/// sequential registration.
#[derive(Debug, Clone)]
pub struct QuantumRegistration {
    effects: Vec<CMatrix>,
    roots: Vec<CMatrix>,
    dim: usize,
}

/// Validation summary for a candidate POVM.
#[derive(Debug, Clone, Serialize)]
pub struct PovmCheck {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub identity_defect: f64,
}

impl QuantumRegistration {
    /// Wrap explicit effects. Each must be Hermitian positive semidefinite
    /// and they must sum to the identity within `tol`.
    pub fn from_effects(effects: Vec<CMatrix>, tol: f64) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::invalid("a POVM needs at least one effect"));
        }
        let dim = effects[0].nrows();
        if effects.iter().any(|e| e.nrows() != dim || e.ncols() != dim) {
            return Err(Error::invalid("POVM effects must share one square shape"));
        }
        let check = povm_check(&effects)?;
        if check.min_eigenvalue < -tol {
            return Err(Error::check(format!(
                "candidate effect has eigenvalue {} below zero",
                check.min_eigenvalue
            )));
        }
        if check.identity_defect > tol {
            return Err(Error::check(format!(
                "candidate effects sum to the identity only within {}",
                check.identity_defect
            )));
        }
        let roots = effects
            .iter()
            .map(|e| {
                let mut h = e.clone();
                hermitize(&mut h);
                sqrt_psd(&h, "POVM effect")
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QuantumRegistration {
            effects,
            roots,
            dim,
        })
    }

    /// Quantize every member of a partition of unity on the context grid.
    pub fn from_partition(
        ctx: &QuantizationContext,
        pou: &PartitionOfUnity,
        tol: f64,
    ) -> Result<Self> {
        let grids = partition_member_grids(ctx, pou)?;
        let effects = grids
            .iter()
            .map(|g| toeplitz_from_grid(ctx, g))
            .collect::<Result<Vec<_>>>()?;
        QuantumRegistration::from_effects(effects, tol)
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn effect(&self, i: usize) -> &CMatrix {
        &self.effects[i]
    }

    pub fn effect_root(&self, i: usize) -> &CMatrix {
        &self.roots[i]
    }

    pub fn check(&self) -> Result<PovmCheck> {
        povm_check(&self.effects)
    }

    /// One-shot probability `tr(F_i) / d` on the maximally mixed state.
    pub fn single_probability(&self, i: usize) -> f64 {
        trace_re(&self.effects[i]) / self.dim as f64
    }

    /// Two-shot probability `tr(F_i F_j) / d`; symmetric in its arguments.
    pub fn pair_probability(&self, i: usize, j: usize) -> f64 {
        trace_product_re(&self.effects[i], &self.effects[j]) / self.dim as f64
    }

    pub fn pair_table(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| self.pair_probability(i, j)).collect())
            .collect()
    }

    /// Probability of registering the outcome sequence `indices` under the
    /// square-root instrument, starting from the maximally mixed state.
    pub fn sequence_probability(&self, indices: &[usize]) -> Result<f64> {
        if indices.is_empty() {
            return Err(Error::invalid("registration sequences must be nonempty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!(
                "sequence index {bad} out of range for {} effects",
                self.len()
            )));
        }
        let mut state = identity(self.dim) / num_complex::Complex::new(self.dim as f64, 0.0);
        for &i in indices {
            state = &self.roots[i] * state * &self.roots[i];
        }
        Ok(trace_re(&state))
    }

    /// Normalized post-registration state after outcome `i`.
    pub fn posterior(&self, rho: &CMatrix, i: usize) -> Result<CMatrix> {
        luders_update(rho, &self.effects[i], &self.roots[i])
    }
}

fn povm_check(effects: &[CMatrix]) -> Result<PovmCheck> {
    let dim = effects[0].nrows();
    let mut sum = CMatrix::zeros(dim, dim);
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    for e in effects {
        let mut h = e.clone();
        hermitize(&mut h);
        let eigs = eigvalsh(&h, "POVM effect")?;
        min_eig = min_eig.min(eigs[0]);
        max_eig = max_eig.max(eigs[dim - 1]);
        sum += e;
    }
    sum -= identity(dim);
    Ok(PovmCheck {
        min_eigenvalue: min_eig,
        max_eigenvalue: max_eig,
        identity_defect: max_abs_entry(&sum),
    })
}

/// Below this registration probability a conditioning branch is reported as
/// unreachable instead of producing a garbage posterior.
pub const VANISHING_PROBABILITY: f64 = 1e-14;

fn luders_update(rho: &CMatrix, effect: &CMatrix, root: &CMatrix) -> Result<CMatrix> {
    let p = trace_product_re(effect, rho);
    if p <= VANISHING_PROBABILITY {
        return Err(Error::numerical(format!(
            "outcome has vanishing probability ({p:.3e})"
        )));
    }
    let mut post = (root * rho * root) / num_complex::Complex::new(p, 0.0);
    hermitize(&mut post);
    Ok(post)
}

/// Normalized Lüders posterior `F^{1/2} rho F^{1/2} / tr(F rho)`.
pub fn luders_posterior(rho: &CMatrix, effect: &CMatrix) -> Result<CMatrix> {
    let mut h = effect.clone();
    hermitize(&mut h);
    let root = sqrt_psd(&h, "registration effect")?;
    luders_update(rho, effect, &root)
}

/// Probability of the operator sequence under square-root conjugation from
/// the maximally mixed state:
/// `tr(F_k^{1/2} ... F_2^{1/2} F_1 F_2^{1/2} ... F_k^{1/2}) / d`.
pub fn quantum_kfold(sequence: &[&CMatrix]) -> Result<f64> {
    if sequence.is_empty() {
        return Err(Error::invalid("registration sequences must be nonempty"));
    }
    let d = sequence[0].nrows();
    if sequence.iter().any(|f| f.nrows() != d || f.ncols() != d) {
        return Err(Error::invalid("sequence operators must share one shape"));
    }
    let mut state = identity(d) / num_complex::Complex::new(d as f64, 0.0);
    for f in sequence {
        let mut h = (*f).clone();
        hermitize(&mut h);
        let root = sqrt_psd(&h, "sequence effect")?;
        state = &root * state * &root;
    }
    Ok(trace_re(&state))
}

/// Classical probability of registering the sequence `indices` against an
/// indicator cover: the integral of `chi^(-len)` over the common
/// intersection, where `chi` counts covering regions.
pub fn classical_kfold(
    quad: &SphereQuadrature,
    regions: &[Region],
    indices: &[usize],
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::invalid("registration sequences must be nonempty"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= regions.len()) {
        return Err(Error::invalid(format!(
            "sequence index {bad} out of range for {} regions",
            regions.len()
        )));
    }
    let len = indices.len() as i32;
    let mut total = 0.0;
    for t in 0..quad.n_theta() {
        let mut row = 0.0;
        for j in 0..quad.n_phi() {
            let x = quad.point(t, j);
            let chi = regions.iter().filter(|r| r.contains(&x)).count();
            if chi == 0 {
                return Err(Error::check(format!(
                    "cover does not cover M: node ({:.6}, {:.6}, {:.6}) is uncovered",
                    x.x(),
                    x.y(),
                    x.z()
                )));
            }
            if indices.iter().all(|&i| regions[i].contains(&x)) {
                row += (chi as f64).powi(-len);
            }
        }
        total += row * quad.weight(t);
    }
    Ok(total)
}

/// Expectation of a symbol in the state `rho`: `tr(T(f) rho)`.
pub fn husimi_expectation(
    ctx: &QuantizationContext,
    rho: &CMatrix,
    symbol: &Symbol<'_>,
) -> Result<f64> {
    let op = toeplitz_symbol(ctx, symbol)?;
    Ok(trace_product_re(&op, rho))
}

/// Coherent-state (lower-symbol) expectation of an operator at a point.
pub fn coherent_expectation(ctx: &QuantizationContext, op: &CMatrix, x: &SpherePoint) -> f64 {
    let a = ctx.coherent_amplitudes(x);
    let mut num = num_complex::Complex::new(0.0, 0.0);
    let mut den = 0.0;
    for row in 0..ctx.dim() {
        den += a[row].norm_sqr();
        for col in 0..ctx.dim() {
            num += a[row].conj() * op[(row, col)] * a[col];
        }
    }
    num.re / den
}

/// Classical and quantum registration statistics for one partition of unity
/// at one spin level, with the cross-checks between them.
#[derive(Debug)]
pub struct RegistrationSuite {
    pub quantum: QuantumRegistration,
    pub classical_singles: Vec<f64>,
    pub quantum_singles: Vec<f64>,
    pub classical_pairs: Vec<Vec<f64>>,
    pub quantum_pairs: Vec<Vec<f64>>,
    epsilon: f64,
    lambda: f64,
    k: usize,
    /// Member grid values kept for kernel-route checks.
    member_grids: Vec<Vec<f64>>,
    /// Sparse per-member support data: node point and weighted value.
    supports: Vec<Vec<(SpherePoint, f64)>>,
}

/// Agreement diagnostics across the two sides and the two quantum routes.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub povm: PovmCheck,
    /// max_i |tr(F_i)/d - integral of f_i|
    pub single_route_gap: f64,
    /// max_i |sum_j p_ij - p_i| on the quantum side
    pub quantum_marginal_defect: f64,
    /// max_i |sum_j p_ij - p_i| on the classical side
    pub classical_marginal_defect: f64,
    /// |sum_ij p_ij - 1| quantum / classical
    pub quantum_mass_defect: f64,
    pub classical_mass_defect: f64,
}

impl RegistrationSuite {
    pub fn build(
        ctx: &QuantizationContext,
        pou: &PartitionOfUnity,
        tol: f64,
    ) -> Result<RegistrationSuite> {
        let member_grids = partition_member_grids(ctx, pou)?;
        let effects = member_grids
            .iter()
            .map(|g| toeplitz_from_grid(ctx, g))
            .collect::<Result<Vec<_>>>()?;
        let quantum = QuantumRegistration::from_effects(effects, tol)?;

        let quad = ctx.quadrature();
        let n_phi = quad.n_phi();
        let supports: Vec<Vec<(SpherePoint, f64)>> = member_grids
            .par_iter()
            .map(|g| {
                g.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(idx, &v)| {
                        (
                            quad.point(idx / n_phi, idx % n_phi),
                            quad.weight(idx / n_phi) * v,
                        )
                    })
                    .collect()
            })
            .collect();

        let n = quantum.len();
        let classical_singles: Vec<f64> = supports
            .iter()
            .map(|s| s.iter().map(|&(_, wv)| wv).sum())
            .collect();
        let quantum_singles: Vec<f64> = (0..n).map(|i| quantum.single_probability(i)).collect();
        // Support disjointness is decided geometrically; quadrature fills in
        // the overlapping entries.
        let classical_pairs: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if !pou.supports_overlap(i, j) {
                            0.0
                        } else {
                            sparse_pair_integral(ctx, i, j, &member_grids)
                        }
                    })
                    .collect()
            })
            .collect();
        let quantum_pairs = quantum.pair_table();

        Ok(RegistrationSuite {
            quantum,
            classical_singles,
            quantum_singles,
            classical_pairs,
            quantum_pairs,
            epsilon: pou.epsilon(),
            lambda: pou.lambda(),
            k: ctx.k(),
            member_grids,
            supports,
        })
    }

    pub fn len(&self) -> usize {
        self.quantum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quantum.is_empty()
    }

    pub fn member_grid(&self, i: usize) -> &[f64] {
        &self.member_grids[i]
    }

    pub fn classical_table(&self) -> ProbabilityTable {
        ProbabilityTable {
            side: "classical",
            route: "quadrature",
            k: None,
            hbar: None,
            epsilon: self.epsilon,
            lambda: self.lambda,
            singles: self.classical_singles.clone(),
            pairs: self.classical_pairs.clone(),
        }
    }

    pub fn quantum_table(&self, route: PairRoute) -> Result<ProbabilityTable> {
        let pairs = match route {
            PairRoute::Matrix => self.quantum_pairs.clone(),
            PairRoute::Kernel => self.kernel_pair_table(),
            PairRoute::Checked => {
                let kernel = self.kernel_pair_table();
                for (i, (rm, rk)) in self.quantum_pairs.iter().zip(&kernel).enumerate() {
                    for (j, (&a, &b)) in rm.iter().zip(rk).enumerate() {
                        let gap = (a - b).abs();
                        // The absolute floor absorbs trace-accumulation
                        // rounding in the matrix route, which dwarfs the true
                        // value on strongly separated pairs.
                        if gap > 1e-10 + 1e-6 * (a.abs() + b.abs()) {
                            return Err(Error::check(format!(
                                "quantum pair routes disagree at ({i}, {j}): \
                                 matrix {a:.12e} vs kernel {b:.12e}"
                            )));
                        }
                    }
                }
                self.quantum_pairs.clone()
            }
        };
        Ok(ProbabilityTable {
            side: "quantum",
            route: match route {
                PairRoute::Matrix => "matrix",
                PairRoute::Kernel => "kernel",
                PairRoute::Checked => "checked",
            },
            k: Some(self.k),
            hbar: Some(1.0 / self.k as f64),
            epsilon: self.epsilon,
            lambda: self.lambda,
            singles: self.quantum_singles.clone(),
            pairs,
        })
    }

    fn kernel_pair_table(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let k = self.k;
        let d = (self.k + 1) as f64;
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|j| {
                        let mut acc = 0.0;
                        for (x, wx) in &self.supports[i] {
                            let mut inner = 0.0;
                            for (y, wy) in &self.supports[j] {
                                inner += wy * kernel_intensity_closed(k, x, y);
                            }
                            acc += wx * inner;
                        }
                        acc / d
                    })
                    .collect()
            })
            .collect();
        let mut table = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                table[i][j] = upper[i][j - i];
                table[j][i] = upper[i][j - i];
            }
        }
        table
    }

    /// Classical probability of a registration sequence: the integral of the
    /// product of the member functions.
    pub fn classical_sequence_probability(
        &self,
        ctx: &QuantizationContext,
        indices: &[usize],
    ) -> Result<f64> {
        if indices.is_empty() {
            return Err(Error::invalid("registration sequences must be nonempty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!(
                "sequence index {bad} out of range for {} members",
                self.len()
            )));
        }
        let quad = ctx.quadrature();
        let n_phi = quad.n_phi();
        let first = &self.member_grids[indices[0]];
        let mut total = 0.0;
        for (idx, &v0) in first.iter().enumerate() {
            if v0 == 0.0 {
                continue;
            }
            let mut prod = v0;
            for &i in &indices[1..] {
                prod *= self.member_grids[i][idx];
                if prod == 0.0 {
                    break;
                }
            }
            total += quad.weight(idx / n_phi) * prod;
        }
        Ok(total)
    }

    /// Quantum pair probability by the kernel route for one pair.
    pub fn pair_probability_kernel(&self, i: usize, j: usize) -> f64 {
        let mut acc = 0.0;
        for (x, wx) in &self.supports[i] {
            let mut inner = 0.0;
            for (y, wy) in &self.supports[j] {
                inner += wy * kernel_intensity_closed(self.k, x, y);
            }
            acc += wx * inner;
        }
        acc / (self.k + 1) as f64
    }

    pub fn consistency(&self) -> Result<ConsistencyReport> {
        let povm = self.quantum.check()?;
        let n = self.len();
        let single_route_gap = (0..n)
            .map(|i| (self.quantum_singles[i] - self.classical_singles[i]).abs())
            .fold(0.0, f64::max);
        let marginal = |pairs: &[Vec<f64>], singles: &[f64]| -> f64 {
            (0..n)
                .map(|i| {
                    let row: f64 = pairs[i].iter().sum();
                    (row - singles[i]).abs()
                })
                .fold(0.0, f64::max)
        };
        let mass =
            |pairs: &[Vec<f64>]| -> f64 { (pairs.iter().flatten().sum::<f64>() - 1.0).abs() };
        Ok(ConsistencyReport {
            povm,
            single_route_gap,
            quantum_marginal_defect: marginal(&self.quantum_pairs, &self.quantum_singles),
            classical_marginal_defect: marginal(&self.classical_pairs, &self.classical_singles),
            quantum_mass_defect: mass(&self.quantum_pairs),
            classical_mass_defect: mass(&self.classical_pairs),
        })
    }
}

fn sparse_pair_integral(
    ctx: &QuantizationContext,
    i: usize,
    j: usize,
    grids: &[Vec<f64>],
) -> f64 {
    let quad = ctx.quadrature();
    let n_phi = quad.n_phi();
    grids[i]
        .iter()
        .zip(&grids[j])
        .enumerate()
        .filter(|(_, (&a, &b))| a != 0.0 && b != 0.0)
        .map(|(idx, (&a, &b))| quad.weight(idx / n_phi) * a * b)
        .sum()
}

/// Exact-rational registration on a finite hypergraph.
///
/// Points of a finite set are covered by subsets ("sensors"); the covering
/// multiplicity of `x` is `chi(x)`. A registration draw picks an incidence
/// pair uniformly, so the point measure is `chi(x) / sum_y chi(y)` and a
/// probe of `x` reports each covering sensor with probability `1/chi(x)`.
/// The probability of a registration sequence `I` is therefore
///
/// ```text
/// p_I = sum_{x in intersection of U_i} chi(x)^(1 - |I|) / sum_y chi(y),
/// ```
///
/// which is generally *not* reproduced by the Markov walk built from the
/// pair statistics; the gap witnesses the memory carried by the point.
#[derive(Debug, Clone)]
pub struct Hypergraph {
    n_points: usize,
    sets: Vec<Vec<bool>>,
    chi: Vec<usize>,
    chi_total: BigInt,
}

impl Hypergraph {
    pub fn new(n_points: usize, sets: &[Vec<usize>]) -> Result<Self> {
        if n_points == 0 || sets.is_empty() {
            return Err(Error::invalid("hypergraph needs points and sets"));
        }
        let mut membership = vec![vec![false; n_points]; sets.len()];
        for (s, set) in sets.iter().enumerate() {
            for &x in set {
                if x >= n_points {
                    return Err(Error::invalid(format!(
                        "set {s} references point {x} outside 0..{n_points}"
                    )));
                }
                membership[s][x] = true;
            }
        }
        let chi: Vec<usize> = (0..n_points)
            .map(|x| membership.iter().filter(|m| m[x]).count())
            .collect();
        if let Some(x) = chi.iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!(
                "point {x} is not covered by any set"
            )));
        }
        let chi_total = BigInt::from(chi.iter().sum::<usize>());
        Ok(Hypergraph {
            n_points,
            sets: membership,
            chi,
            chi_total,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn multiplicity(&self, x: usize) -> usize {
        self.chi[x]
    }

    pub fn set_size(&self, i: usize) -> usize {
        self.sets[i].iter().filter(|&&b| b).count()
    }

    /// Exact probability of the registration sequence `indices`.
    pub fn sequence_probability(&self, indices: &[usize]) -> Result<BigRational> {
        if indices.is_empty() {
            return Err(Error::invalid("registration sequences must be nonempty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.sets.len()) {
            return Err(Error::invalid(format!(
                "sequence index {bad} out of range for {} sets",
                self.sets.len()
            )));
        }
        let mut total = BigRational::zero();
        for x in 0..self.n_points {
            if indices.iter().any(|&i| !self.sets[i][x]) {
                continue;
            }
            // chi^(1 - len) / chi_total
            let mut den = self.chi_total.clone();
            for _ in 1..indices.len() {
                den *= BigInt::from(self.chi[x]);
            }
            total += BigRational::new(BigInt::from(1), den);
        }
        Ok(total)
    }

    pub fn single(&self, i: usize) -> Result<BigRational> {
        self.sequence_probability(&[i])
    }

    pub fn pair(&self, i: usize, j: usize) -> Result<BigRational> {
        self.sequence_probability(&[i, j])
    }

    /// `P(next = j | previous = i)` from the pair statistics.
    pub fn conditional(&self, j: usize, i: usize) -> Result<BigRational> {
        let pi = self.single(i)?;
        if pi.is_zero() {
            return Err(Error::numerical(format!(
                "conditioning on sensor {i} which never registers"
            )));
        }
        Ok(self.pair(i, j)? / pi)
    }

    /// Transition matrix of the induced random walk on sets:
    /// `P(j | i) = sum over the intersection of chi^(-1), divided by #U_i`.
    pub fn transition_matrix(&self) -> Result<Vec<Vec<BigRational>>> {
        for i in 0..self.n_sets() {
            if self.set_size(i) == 0 {
                return Err(Error::invalid(format!("set {i} is empty")));
            }
        }
        (0..self.n_sets())
            .map(|i| {
                (0..self.n_sets())
                    .map(|j| self.conditional(j, i))
                    .collect()
            })
            .collect()
    }

    /// Markov-walk surrogate for a sequence: the first single times the
    /// chain of pair conditionals.
    pub fn walk_probability(&self, indices: &[usize]) -> Result<BigRational> {
        if indices.is_empty() {
            return Err(Error::invalid("walks must be nonempty"));
        }
        let mut p = self.single(indices[0])?;
        for w in indices.windows(2) {
            p *= self.conditional(w[1], w[0])?;
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ProbeGrid, SensorNet};
    use crate::linalg::trace_re;
    use crate::quantize::toeplitz;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex;
    use proptest::prelude::*;

    fn small_suite(k: usize, n: usize) -> (QuantizationContext, RegistrationSuite) {
        let net = SensorNet::fibonacci(n).unwrap();
        let grid = ProbeGrid::icosahedral(4).unwrap();
        let pou = PartitionOfUnity::build(net.into(), 1.2, 1.4, &grid).unwrap();
        let ctx = QuantizationContext::with_defaults(k).unwrap();
        let suite = RegistrationSuite::build(&ctx, &pou, 1e-9).unwrap();
        (ctx, suite)
    }

    #[test]
    fn suite_is_internally_consistent() {
        let (_ctx, suite) = small_suite(12, 12);
        let report = suite.consistency().unwrap();
        assert!(report.povm.min_eigenvalue > -1e-12);
        assert!(report.povm.identity_defect < 1e-11);
        assert!(report.single_route_gap < 1e-12);
        assert!(report.quantum_marginal_defect < 1e-11);
        assert!(report.classical_marginal_defect < 1e-12);
        assert!(report.quantum_mass_defect < 1e-11);
        assert!(report.classical_mass_defect < 1e-12);
    }

    #[test]
    fn tables_validate_and_routes_cross_check() {
        let (_ctx, suite) = small_suite(10, 12);
        let ct = suite.classical_table();
        ct.validate().unwrap();
        let qt = suite.quantum_table(PairRoute::Checked).unwrap();
        qt.validate().unwrap();
        assert_eq!(qt.k, Some(10));
        let kernel = suite.quantum_table(PairRoute::Kernel).unwrap();
        for (a, b) in qt.pairs.iter().flatten().zip(kernel.pairs.iter().flatten()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn table_export_roundtrip_shapes() {
        let (_ctx, suite) = small_suite(6, 12);
        let qt = suite.quantum_table(PairRoute::Matrix).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("pairs.csv");
        let json_path = dir.path().join("pairs.json");
        qt.write_csv(&csv_path).unwrap();
        qt.write_json(&json_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().count(), 1 + 12 * 12);
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(value["side"], "quantum");
        assert_eq!(value["route"], "matrix");
        assert_eq!(value["k"], 6);
    }

    #[test]
    fn sequences_extend_pairs() {
        let (ctx, suite) = small_suite(8, 12);
        let q = &suite.quantum;
        let p2 = q.sequence_probability(&[2, 3]).unwrap();
        assert_abs_diff_eq!(p2, q.pair_probability(2, 3), epsilon = 1e-13);
        // Sequential quantum registration remembers more than the pair
        // statistics: a three-step alternation differs from the walk
        // surrogate built from pairs.
        let p3 = q.sequence_probability(&[2, 3, 2]).unwrap();
        let walk = q.pair_probability(2, 3) / q.single_probability(2)
            * q.pair_probability(3, 2)
            / q.single_probability(3)
            * q.single_probability(2);
        assert!((p3 - walk).abs() > 1e-9, "p3 = {p3}, walk = {walk}");
        let c3 = suite
            .classical_sequence_probability(&ctx, &[2, 3, 2])
            .unwrap();
        assert!(p3 >= 0.0 && c3 >= 0.0);
        // The free-function route with explicit operators agrees.
        let free = quantum_kfold(&[q.effect(2), q.effect(3), q.effect(2)]).unwrap();
        assert_abs_diff_eq!(free, p3, epsilon = 1e-13);
    }

    #[test]
    fn kfold_outcomes_sum_to_one() {
        let (_ctx, suite) = small_suite(6, 12);
        let q = &suite.quantum;
        let n = q.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    total += q.sequence_probability(&[i, j, l]).unwrap();
                }
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn luders_posterior_examples() {
        let (ctx, suite) = small_suite(6, 12);
        let q = &suite.quantum;
        let d = ctx.dim();
        let rho0 = identity(d) / Complex::new(d as f64, 0.0);
        // Maximally mixed in, effect-proportional out.
        let post = q.posterior(&rho0, 4).unwrap();
        let expected = q.effect(4) / Complex::new(trace_re(q.effect(4)), 0.0);
        assert!(max_abs_entry(&(post.clone() - expected)) < 1e-12);
        assert_abs_diff_eq!(trace_re(&post), 1.0, epsilon = 1e-12);
        // Identity effect is informationless.
        let id_post = luders_posterior(&post, &identity(d)).unwrap();
        assert!(max_abs_entry(&(id_post - post.clone())) < 1e-12);
        // Rank-one projector collapses any state onto itself.
        let mut v = crate::linalg::CVector::zeros(d);
        v[0] = Complex::new(0.6, 0.0);
        v[2] = Complex::new(0.0, 0.8);
        let proj = &v * v.adjoint();
        let collapsed = luders_posterior(&rho0, &proj).unwrap();
        assert!(max_abs_entry(&(collapsed - proj)) < 1e-12);
        // Vanishing-probability branch is reported, not computed.
        let mut w = crate::linalg::CVector::zeros(d);
        w[1] = Complex::new(1.0, 0.0);
        let pure = &w * w.adjoint();
        let mut u = crate::linalg::CVector::zeros(d);
        u[3] = Complex::new(1.0, 0.0);
        let orthogonal = &u * u.adjoint();
        assert!(luders_posterior(&pure, &orthogonal).is_err());
    }

    #[test]
    fn classical_kfold_on_indicator_covers() {
        let quad = SphereQuadrature::new(24, 48).unwrap();
        let sphere = vec![Region::Full];
        assert_abs_diff_eq!(
            classical_kfold(&quad, &sphere, &[0, 0, 0]).unwrap(),
            1.0,
            epsilon = 1e-13
        );
        // Two hemispheres: chi = 1 everywhere (up to the measure-zero
        // equator), intersection empty.
        let north = Region::hemisphere();
        let south = Region::hemisphere().complement();
        let halves = vec![north, south];
        assert_abs_diff_eq!(
            classical_kfold(&quad, &halves, &[0, 1]).unwrap(),
            0.0,
            epsilon = 0.0
        );
        assert_abs_diff_eq!(
            classical_kfold(&quad, &halves, &[0]).unwrap(),
            0.5,
            epsilon = 1e-13
        );
        // Uncovered sphere is reported.
        let cap = Region::cap(SpherePoint::north_pole(), 0.3).unwrap();
        assert!(classical_kfold(&quad, &[cap], &[0]).is_err());
    }

    #[test]
    fn husimi_expectation_matches_trace_route() {
        let ctx = QuantizationContext::with_defaults(9).unwrap();
        let d = ctx.dim();
        let rho0 = identity(d) / Complex::new(d as f64, 0.0);
        let one = |_: &SpherePoint| 1.0;
        assert_abs_diff_eq!(
            husimi_expectation(&ctx, &rho0, &Symbol::Smooth(&one)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let f = |x: &SpherePoint| 0.5 + 0.5 * x.z();
        let val = husimi_expectation(&ctx, &rho0, &Symbol::Smooth(&f)).unwrap();
        // On the maximally mixed state this is the normalized trace, which
        // matches the integral up to rounding.
        assert_abs_diff_eq!(val, 0.5, epsilon = 1e-12);
        assert!(val >= -1e-10);
    }

    #[test]
    fn coherent_expectation_localizes_the_height_function() {
        let k = 14;
        let ctx = QuantizationContext::with_defaults(k).unwrap();
        let height = toeplitz(&ctx, |x| x.z()).unwrap();
        let north = coherent_expectation(&ctx, &height, &SpherePoint::north_pole());
        assert_abs_diff_eq!(north, k as f64 / (k as f64 + 2.0), epsilon = 1e-12);
        let equator = coherent_expectation(
            &ctx,
            &height,
            &SpherePoint::from_spherical(std::f64::consts::FRAC_PI_2, 0.7).unwrap(),
        );
        assert_abs_diff_eq!(equator, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hypergraph_two_set_example() {
        // Points {0, 1, 2}, U_0 = {0, 1}, U_1 = {1, 2}.
        let h = Hypergraph::new(3, &[vec![0, 1], vec![1, 2]]).unwrap();
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let eighth = BigRational::new(BigInt::from(1), BigInt::from(8));
        let quarter = BigRational::new(BigInt::from(1), BigInt::from(4));
        assert_eq!(h.single(0).unwrap(), half);
        assert_eq!(h.pair(0, 1).unwrap(), eighth);
        assert_eq!(h.conditional(1, 0).unwrap(), quarter);
        let p = h.transition_matrix().unwrap();
        assert_eq!(p[0][1], quarter);
        for row in &p {
            let total: BigRational = row.iter().cloned().sum();
            assert_eq!(total, BigRational::new(BigInt::from(1), BigInt::from(1)));
        }
    }

    #[test]
    fn hypergraph_triangle_walk_gap() {
        // Triangle cover: U_0 = {0, 1}, U_1 = {1, 2}, U_2 = {2, 0}.
        let h = Hypergraph::new(3, &[vec![0, 1], vec![1, 2], vec![2, 0]]).unwrap();
        let reg = h.sequence_probability(&[0, 1, 0]).unwrap();
        let walk = h.walk_probability(&[0, 1, 0]).unwrap();
        assert_eq!(reg, BigRational::new(BigInt::from(1), BigInt::from(24)));
        assert_eq!(walk, BigRational::new(BigInt::from(1), BigInt::from(48)));
        assert_ne!(reg, walk);
    }

    proptest! {
        #[test]
        fn hypergraph_mass_and_marginals_are_exact(
            n_points in 1usize..5,
            masks in proptest::collection::vec(1u8..31, 1..5),
        ) {
            let mut sets: Vec<Vec<usize>> = masks
                .iter()
                .map(|&m| (0..n_points).filter(|&x| m & (1 << x) != 0).collect())
                .collect();
            // Guarantee coverage with one full set.
            sets.push((0..n_points).collect());
            let h = Hypergraph::new(n_points, &sets).unwrap();
            let one = BigRational::new(BigInt::from(1), BigInt::from(1));
            let total_single: BigRational =
                (0..h.n_sets()).map(|i| h.single(i).unwrap()).sum();
            prop_assert_eq!(&total_single, &one);
            let mut total_pairs = BigRational::zero();
            for i in 0..h.n_sets() {
                let mut row = BigRational::zero();
                for j in 0..h.n_sets() {
                    row += h.pair(i, j).unwrap();
                }
                prop_assert_eq!(&row, &h.single(i).unwrap());
                total_pairs += row;
            }
            prop_assert_eq!(&total_pairs, &one);
            // Triple outcomes are a probability distribution too.
            let mut total_triples = BigRational::zero();
            for i in 0..h.n_sets() {
                for j in 0..h.n_sets() {
                    for l in 0..h.n_sets() {
                        total_triples += h.sequence_probability(&[i, j, l]).unwrap();
                    }
                }
            }
            prop_assert_eq!(&total_triples, &one);
        }
    }
}
