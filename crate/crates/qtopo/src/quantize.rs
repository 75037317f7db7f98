//! Berezin–Toeplitz quantization at spin level `k`.
//!
//! The Hilbert space has dimension `d = k + 1` with semiclassical parameter
//! `hbar = 1/k`. In the weight basis `m = 0..=k` the coherent amplitudes are
//!
//! ```text
//! psi_m(theta, phi) = c_m cos^m(theta/2) sin^(k-m)(theta/2) e^(i (k-m) phi),
//! c_m^2 = (k+1) binom(k, m),
//! ```
//!
//! normalized so that `sum_m |psi_m|^2 = k + 1` everywhere. A Toeplitz
//! operator is `T(f)_{m m'} = \int f \bar{psi}_m psi_{m'} dmu` against the
//! normalized area measure. Three assembly routes are provided:
//!
//! * a product-quadrature route for arbitrary symbols, with the azimuthal
//!   integral done by FFT (`toeplitz`, `toeplitz_from_grid`);
//! * an exact route for zonal piecewise-polynomial symbols, which reduces to
//!   one-dimensional Gauss rules at their exactness order
//!   (`toeplitz_zonal_exact`);
//! * a semi-analytic route for geodesic cap indicators, where the azimuthal
//!   integral over each latitude is an interval and is integrated in closed
//!   form (`toeplitz_cap`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::Error;
use crate::geometry::{PartitionOfUnity, SpherePoint};
use crate::linalg::{identity, CMatrix, CVector, C64};
use crate::quadrature::{gauss_legendre_on, SphereQuadrature};
use crate::symbols::{PiecewisePoly, Region, Symbol};
use crate::Result;

/// Spin level, basis constants and the product quadrature grid shared by all
/// operator assemblies at that level.
#[derive(Debug, Clone)]
pub struct QuantizationContext {
    k: usize,
    quad: SphereQuadrature,
    /// `ln c_m^2 = ln(k+1) + ln binom(k, m)`.
    ln_c2: Vec<f64>,
    /// `c_m = exp(ln_c2 / 2)`.
    c: Vec<f64>,
    /// Per-row logs: `ln((1 + u_t)/2)`, `ln((1 - u_t)/2)`, `ln(w_t / 2)`.
    ln_up: Vec<f64>,
    ln_um: Vec<f64>,
    ln_w: Vec<f64>,
}

impl QuantizationContext {
    /// A context with an explicit grid. The grid must integrate every basis
    /// pair density exactly, which requires `n_theta >= k + 2` Gauss rows and
    /// `n_phi >= 2k + 2` azimuth nodes.
    pub fn new(k: usize, n_theta: usize, n_phi: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("spin level k must be at least 1"));
        }
        if n_theta < k + 2 {
            return Err(Error::invalid(format!(
                "n_theta = {n_theta} is below the exactness bound {} for k = {k}",
                k + 2
            )));
        }
        if n_phi < 2 * k + 2 {
            return Err(Error::invalid(format!(
                "n_phi = {n_phi} is below the exactness bound {} for k = {k}",
                2 * k + 2
            )));
        }
        let quad = SphereQuadrature::new(n_theta, n_phi)?;
        let lnfact = ln_factorials(k);
        let ln_d = ((k + 1) as f64).ln();
        let ln_c2: Vec<f64> = (0..=k)
            .map(|m| ln_d + lnfact[k] - lnfact[m] - lnfact[k - m])
            .collect();
        let c = ln_c2.iter().map(|l| (0.5 * l).exp()).collect();
        let ln_up = quad.u().iter().map(|u| (0.5 * (1.0 + u)).ln()).collect();
        let ln_um = quad.u().iter().map(|u| (0.5 * (1.0 - u)).ln()).collect();
        let ln_w = quad.u_weight().iter().map(|w| (0.5 * w).ln()).collect();
        Ok(QuantizationContext {
            k,
            quad,
            ln_c2,
            c,
            ln_up,
            ln_um,
            ln_w,
        })
    }

    /// The minimal exact grid for level `k`.
    pub fn with_defaults(k: usize) -> Result<Self> {
        QuantizationContext::new(k, k + 2, 2 * k + 2)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.k + 1
    }

    pub fn hbar(&self) -> f64 {
        1.0 / self.k as f64
    }

    pub fn quadrature(&self) -> &SphereQuadrature {
        &self.quad
    }

    /// Basis normalization `c_m`.
    pub fn basis_constant(&self, m: usize) -> f64 {
        self.c[m]
    }

    /// Row radial factor `(w_t / 2) ((1+u_t)/2)^(s/2) ((1-u_t)/2)^(k - s/2)`
    /// for `s = m + m'`, evaluated in log space.
    fn radial(&self, t: usize, s: usize) -> f64 {
        let half_s = s as f64 / 2.0;
        (self.ln_w[t] + half_s * self.ln_up[t] + (self.k as f64 - half_s) * self.ln_um[t]).exp()
    }

    /// Coherent amplitudes `psi_m(x)` for `m = 0..=k`.
    pub fn coherent_amplitudes(&self, x: &SpherePoint) -> CVector {
        let theta = x.polar_angle();
        let phi = x.azimuth();
        let ln_cos = (0.5 * theta).cos().ln();
        let ln_sin = (0.5 * theta).sin().ln();
        CVector::from_iterator(
            self.k + 1,
            (0..=self.k).map(|m| {
                let mut ln_mag = 0.5 * self.ln_c2[m];
                // Skip zero-exponent terms so that the poles stay finite.
                if m > 0 {
                    ln_mag += m as f64 * ln_cos;
                }
                if m < self.k {
                    ln_mag += (self.k - m) as f64 * ln_sin;
                }
                let mag = if ln_mag == f64::NEG_INFINITY {
                    0.0
                } else {
                    ln_mag.exp()
                };
                let arg = (self.k - m) as f64 * phi;
                Complex::from_polar(mag, arg)
            }),
        )
    }

    /// `sum_m |psi_m(x)|^2`; identically `k + 1` on the sphere.
    pub fn coherent_density(&self, x: &SpherePoint) -> f64 {
        self.coherent_amplitudes(x).iter().map(|a| a.norm_sqr()).sum()
    }
}

fn ln_factorials(k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k + 1];
    for i in 2..=k {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// Squared reproducing kernel `|K(x, y)|^2 = (k+1)^2 ((1 + x.y)/2)^k` in
/// closed form.
pub fn kernel_intensity_closed(k: usize, x: &SpherePoint, y: &SpherePoint) -> f64 {
    let d = (k + 1) as f64;
    d * d * (0.5 * (1.0 + x.dot(y))).max(0.0).powi(k as i32)
}

/// Squared reproducing kernel from the coherent amplitudes,
/// `|sum_m conj(psi_m(x)) psi_m(y)|^2`. Same quantity as
/// [`kernel_intensity_closed`] by a different route.
pub fn kernel_intensity(
    ctx: &QuantizationContext,
    x: &SpherePoint,
    y: &SpherePoint,
) -> f64 {
    let ax = ctx.coherent_amplitudes(x);
    let ay = ctx.coherent_amplitudes(y);
    let mut s = Complex::new(0.0, 0.0);
    for m in 0..=ctx.k {
        s += ax[m].conj() * ay[m];
    }
    s.norm_sqr()
}

/// Trace over the dimension, `tr(op) / d`.
pub fn normalized_trace(op: &CMatrix) -> f64 {
    crate::linalg::trace_re(op) / op.nrows() as f64
}

/// Quantize a tagged symbol by the route its structure allows: zonal
/// profiles exactly, single caps semi-analytically, everything else on the
/// context grid.
pub fn toeplitz_symbol(ctx: &QuantizationContext, symbol: &Symbol<'_>) -> Result<CMatrix> {
    match symbol {
        Symbol::Zonal(profile) => Ok(diagonal_operator(&toeplitz_zonal_exact(ctx, profile)?)),
        Symbol::Indicator(Region::Cap { center, radius }) => {
            toeplitz_cap(ctx, center, *radius, 24)
        }
        Symbol::Indicator(region) => {
            if let Ok(profile) = region.zonal_profile() {
                return Ok(diagonal_operator(&toeplitz_zonal_exact(ctx, &profile)?));
            }
            toeplitz(ctx, |x| region.indicator(x))
        }
        Symbol::Smooth(f) => toeplitz(ctx, f),
    }
}

/// Symbol values on the context grid, row-major: `values[t * n_phi + j]` is
/// the symbol at colatitude row `t`, azimuth node `j`.
pub fn grid_values<F>(ctx: &QuantizationContext, f: F) -> Vec<f64>
where
    F: Fn(&SpherePoint) -> f64 + Sync,
{
    let n_phi = ctx.quad.n_phi();
    let mut values = vec![0.0; ctx.quad.n_theta() * n_phi];
    values
        .par_chunks_mut(n_phi)
        .enumerate()
        .for_each(|(t, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(&ctx.quad.point(t, j));
            }
        });
    values
}

/// Toeplitz operator of an arbitrary symbol via the grid route.
pub fn toeplitz<F>(ctx: &QuantizationContext, f: F) -> Result<CMatrix>
where
    F: Fn(&SpherePoint) -> f64 + Sync,
{
    toeplitz_from_grid(ctx, &grid_values(ctx, f))
}

/// Toeplitz operator from precomputed grid values.
///
/// Per latitude row the azimuthal moments `fhat_t[q] = mean_j f e^{i q phi_j}`
/// come from one FFT; entry `(m, m')` is
/// `c_m c_m' sum_t radial(t, m + m') fhat_t[m - m']`. Rows that vanish
/// identically are skipped, so compactly supported symbols only pay for the
/// rows they touch. The result is Hermitian by construction.
pub fn toeplitz_from_grid(ctx: &QuantizationContext, values: &[f64]) -> Result<CMatrix> {
    let n_theta = ctx.quad.n_theta();
    let n_phi = ctx.quad.n_phi();
    if values.len() != n_theta * n_phi {
        return Err(Error::invalid(format!(
            "grid values have length {}, expected {}",
            values.len(),
            n_theta * n_phi
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("symbol produced a non-finite grid value"));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_phi);

    // Azimuthal moments per active row; None marks an identically zero row.
    let moments: Vec<Option<Vec<C64>>> = values
        .par_chunks(n_phi)
        .map(|row| {
            if row.iter().all(|&v| v == 0.0) {
                return None;
            }
            let mut buf: Vec<C64> = row.iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft.process(&mut buf);
            // Forward FFT gives sum_j v_j e^{-i q phi_j}; conjugate and
            // normalize to get the e^{+i q phi} moments.
            Some(buf.iter().map(|z| z.conj() / n_phi as f64).collect())
        })
        .collect();

    let active: Vec<usize> = (0..n_theta).filter(|&t| moments[t].is_some()).collect();
    let d = ctx.dim();
    let k = ctx.k;
    // Radial tables for the active rows, s = 0..=2k.
    let radial: Vec<Vec<f64>> = active
        .par_iter()
        .map(|&t| (0..=2 * k).map(|s| ctx.radial(t, s)).collect())
        .collect();

    let mut data = vec![Complex::new(0.0, 0.0); d * d];
    data.par_chunks_mut(d).enumerate().for_each(|(col, out)| {
        for (r, &t) in active.iter().enumerate() {
            let rad = &radial[r];
            let fh = moments[t].as_ref().unwrap();
            for (row, slot) in out.iter_mut().enumerate().take(col + 1) {
                // q = row - col <= 0 wraps to n_phi - (col - row).
                let q = if row == col { 0 } else { n_phi - (col - row) };
                *slot += rad[row + col] * fh[q];
            }
        }
        for (row, slot) in out.iter_mut().enumerate().take(col + 1) {
            *slot *= ctx.c[row] * ctx.c[col];
        }
    });
    let mut op = CMatrix::from_vec(d, d, data);
    for col in 0..d {
        for row in (col + 1)..d {
            op[(row, col)] = op[(col, row)].conj();
        }
    }
    Ok(op)
}

/// Diagonal of the Toeplitz operator of a zonal symbol, by per-piece Gauss
/// rules at their exactness order. For piecewise polynomials this is exact
/// up to rounding:
///
/// ```text
/// T_mm = c_m^2 \int f(u) ((1+u)/2)^m ((1-u)/2)^(k-m) du / 2
/// ```
pub fn toeplitz_zonal_exact(ctx: &QuantizationContext, profile: &PiecewisePoly) -> Result<Vec<f64>> {
    let k = ctx.k;
    let mut diag = vec![0.0; k + 1];
    for (piece, window) in profile.pieces().iter().zip(profile.breakpoints().windows(2)) {
        let degree = k + (piece.len() - 1);
        let n = degree / 2 + 1;
        let (nodes, weights) = gauss_legendre_on(window[0], window[1], n)?;
        for (&u, &w) in nodes.iter().zip(&weights) {
            let fu = piece
                .iter()
                .rev()
                .fold(0.0, |acc: f64, &cj| acc * u + cj);
            if fu == 0.0 {
                continue;
            }
            let ln_up = (0.5 * (1.0 + u)).ln();
            let ln_um = (0.5 * (1.0 - u)).ln();
            for (m, slot) in diag.iter_mut().enumerate() {
                let ln_mag = ctx.ln_c2[m] + m as f64 * ln_up + (k - m) as f64 * ln_um;
                *slot += 0.5 * w * fu * ln_mag.exp();
            }
        }
    }
    Ok(diag)
}

/// Dense diagonal operator from real entries.
pub fn diagonal_operator(diag: &[f64]) -> CMatrix {
    let d = diag.len();
    CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex::new(diag[i], 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    })
}

/// Composite Gauss rule on `[a, b]` whose subpanels shrink geometrically
/// toward both endpoints, for integrands with endpoint square-root kinks.
fn graded_panel_rule(a: f64, b: f64, nodes_per_panel: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    const LEVELS: u32 = 14;
    let half = 0.5 * (b - a);
    let mut cuts = vec![a];
    for i in (0..LEVELS).rev() {
        cuts.push(a + half * 0.25_f64.powi(i as i32 + 1));
    }
    cuts.push(a + half);
    for i in 1..=LEVELS {
        cuts.push(b - half * 0.25_f64.powi(i as i32));
    }
    cuts.push(b);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (n, wt) = gauss_legendre_on(w[0], w[1], nodes_per_panel)?;
        nodes.extend(n);
        weights.extend(wt);
    }
    Ok((nodes, weights))
}

/// Toeplitz operator of a geodesic cap indicator.
///
/// On the latitude `u` the cap cuts out the azimuth interval
/// `|phi - phi_c| < delta(u)` with
/// `cos delta = (cos rho - u u_c) / (s s_c)`, so the azimuthal moments are
/// `sin(q delta) / (pi q) e^{i q phi_c}` in closed form and only the
/// `u`-integral is numerical. The `u`-axis is split at the latitudes where
/// the cap boundary turns (`u_c cos rho -+ s_c sin rho`); `delta(u)` has
/// square-root kinks there, so each panel is subdivided geometrically toward
/// its endpoints and every subpanel gets a Gauss rule with
/// `nodes_per_panel` points. Panels where the cap covers the full circle
/// contribute to the diagonal modes only, and empty panels are skipped.
pub fn toeplitz_cap(
    ctx: &QuantizationContext,
    center: &SpherePoint,
    radius: f64,
    nodes_per_panel: usize,
) -> Result<CMatrix> {
    if !(radius > 0.0) || radius > std::f64::consts::PI {
        return Err(Error::invalid(format!(
            "cap radius must lie in (0, pi], got {radius}"
        )));
    }
    if nodes_per_panel == 0 {
        return Err(Error::invalid("cap assembly needs at least one node per panel"));
    }
    let k = ctx.k;
    let d = ctx.dim();
    let u_c = center.z();
    let s_c = (1.0 - u_c * u_c).max(0.0).sqrt();
    let phi_c = center.azimuth();
    let cos_r = radius.cos();
    let sin_r = radius.sin();

    let mut cuts = vec![-1.0_f64, 1.0];
    for v in [u_c * cos_r - s_c * sin_r, u_c * cos_r + s_c * sin_r] {
        if v > -1.0 && v < 1.0 {
            cuts.push(v);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    // delta(u): half-width of the cap's azimuth interval at latitude u.
    let half_width = |u: f64| -> f64 {
        let num = cos_r - u * u_c;
        let den = (1.0 - u * u).max(0.0).sqrt() * s_c;
        if den < 1e-300 {
            return if num <= 0.0 { std::f64::consts::PI } else { 0.0 };
        }
        (num / den).clamp(-1.0, 1.0).acos()
    };

    let mut data = vec![Complex::new(0.0, 0.0); d * d];
    for panel in cuts.windows(2) {
        let mid = 0.5 * (panel[0] + panel[1]);
        let delta_mid = half_width(mid);
        if delta_mid == 0.0 {
            continue;
        }
        let full = delta_mid >= std::f64::consts::PI;
        let (nodes, weights) = graded_panel_rule(panel[0], panel[1], nodes_per_panel)?;
        for (&u, &w) in nodes.iter().zip(&weights) {
            let ln_up = (0.5 * (1.0 + u)).ln();
            let ln_um = (0.5 * (1.0 - u)).ln();
            let radial = |s: usize| -> f64 {
                let half_s = s as f64 / 2.0;
                (half_s * ln_up + (k as f64 - half_s) * ln_um).exp()
            };
            if full {
                for m in 0..d {
                    data[m * d + m] += Complex::new(0.5 * w * radial(2 * m), 0.0);
                }
                continue;
            }
            let delta = half_width(u);
            // moments[q] = (1/2pi) int over the interval of e^{i q phi}.
            let moments: Vec<C64> = (0..=k)
                .map(|q| {
                    if q == 0 {
                        Complex::new(delta / std::f64::consts::PI, 0.0)
                    } else {
                        let qf = q as f64;
                        Complex::from_polar(1.0, qf * phi_c)
                            * ((qf * delta).sin() / (std::f64::consts::PI * qf))
                    }
                })
                .collect();
            for col in 0..d {
                for row in 0..=col {
                    // q = row - col <= 0, so use the conjugate moment.
                    let m = moments[col - row].conj();
                    data[col * d + row] += (0.5 * w * radial(row + col)) * m;
                }
            }
        }
    }
    for col in 0..d {
        for row in 0..=col {
            data[col * d + row] *= ctx.c[row] * ctx.c[col];
        }
    }
    let mut op = CMatrix::from_vec(d, d, data);
    for col in 0..d {
        for row in (col + 1)..d {
            op[(row, col)] = op[(col, row)].conj();
        }
    }
    Ok(op)
}

/// Trace of `T(f)` over the dimension, assembled from the diagonal alone.
/// Agrees with the quadrature integral of `f` up to rounding because the
/// coherent density is constant; keeping both routes makes that a checkable
/// identity rather than an assumption.
pub fn toeplitz_trace_mean(ctx: &QuantizationContext, values: &[f64]) -> Result<f64> {
    let n_theta = ctx.quad.n_theta();
    let n_phi = ctx.quad.n_phi();
    if values.len() != n_theta * n_phi {
        return Err(Error::invalid(format!(
            "grid values have length {}, expected {}",
            values.len(),
            n_theta * n_phi
        )));
    }
    let d = ctx.dim();
    let mut trace = 0.0;
    for t in 0..n_theta {
        let row = &values[t * n_phi..(t + 1) * n_phi];
        let mean = row.iter().sum::<f64>() / n_phi as f64;
        if mean == 0.0 {
            continue;
        }
        let mut density = 0.0;
        for (m, &lc) in ctx.ln_c2.iter().enumerate() {
            density += (lc + m as f64 * ctx.ln_up[t] + (ctx.k - m) as f64 * ctx.ln_um[t]).exp();
        }
        trace += (0.5 * ctx.quad.u_weight()[t]) * mean * density;
    }
    Ok(trace / d as f64)
}

/// Normalizing denominator `sum_z bump_z` of a partition of unity on the
/// context grid, row-major.
pub fn partition_denominator_grid(
    ctx: &QuantizationContext,
    pou: &PartitionOfUnity,
) -> Result<Vec<f64>> {
    let n_phi = ctx.quad.n_phi();
    let mut denom = vec![0.0; ctx.quad.n_theta() * n_phi];
    denom
        .par_chunks_mut(n_phi)
        .enumerate()
        .for_each(|(t, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = pou.bump_sum(&ctx.quad.point(t, j));
            }
        });
    if denom.iter().any(|&v| v <= 0.0) {
        return Err(Error::numerical(
            "partition supports fail to cover the quadrature grid",
        ));
    }
    Ok(denom)
}

/// Grid values of every partition member, sharing one denominator pass.
pub fn partition_member_grids(
    ctx: &QuantizationContext,
    pou: &PartitionOfUnity,
) -> Result<Vec<Vec<f64>>> {
    let denom = partition_denominator_grid(ctx, pou)?;
    let n_phi = ctx.quad.n_phi();
    Ok((0..pou.len())
        .map(|z| {
            let mut values = vec![0.0; denom.len()];
            values
                .par_chunks_mut(n_phi)
                .enumerate()
                .for_each(|(t, row)| {
                    for (j, v) in row.iter_mut().enumerate() {
                        let b = pou.bump(z, &ctx.quad.point(t, j));
                        *v = if b == 0.0 { 0.0 } else { b / denom[t * n_phi + j] };
                    }
                });
            values
        })
        .collect())
}

/// Maximal entrywise deviation of `sum_z T(f_z)` from the identity for a
/// partition of unity.
///
/// The normalizing denominator is evaluated once per grid node; each member
/// then assembles from its own bump divided by the cached denominator, and
/// the operators are accumulated one at a time.
pub fn partition_identity_defect(
    ctx: &QuantizationContext,
    pou: &PartitionOfUnity,
) -> Result<f64> {
    let n_theta = ctx.quad.n_theta();
    let n_phi = ctx.quad.n_phi();
    let denom = partition_denominator_grid(ctx, pou)?;
    let d = ctx.dim();
    let mut acc = CMatrix::zeros(d, d);
    let mut values = vec![0.0; n_theta * n_phi];
    for z in 0..pou.len() {
        values
            .par_chunks_mut(n_phi)
            .enumerate()
            .for_each(|(t, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    let b = pou.bump(z, &ctx.quad.point(t, j));
                    *v = if b == 0.0 { 0.0 } else { b / denom[t * n_phi + j] };
                }
            });
        acc += toeplitz_from_grid(ctx, &values)?;
    }
    acc -= identity(d);
    Ok(crate::linalg::max_abs_entry(&acc))
}

const CACHE_MAGIC: &[u8; 4] = b"BTOP";
const CACHE_VERSION: u32 = 1;

/// Persist one operator. Layout: magic `BTOP`, format version u32, `k` u32,
/// `d` u32, then `d*d` row-major entries, each two little-endian f64
/// `(re, im)`.
pub fn save_operator(path: &Path, k: usize, op: &CMatrix) -> Result<()> {
    let d = op.nrows();
    if op.ncols() != d {
        return Err(Error::invalid("operator cache stores square matrices"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(k as u32).to_le_bytes())?;
    w.write_all(&(d as u32).to_le_bytes())?;
    for row in 0..d {
        for col in 0..d {
            let z = op[(row, col)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load one operator saved by [`save_operator`], checking the level tag.
pub fn load_operator(path: &Path, expected_k: usize) -> Result<CMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if &head[0..4] != CACHE_MAGIC {
        return Err(Error::format("operator cache header mismatch"));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(Error::format(format!(
            "unsupported operator cache version {version}"
        )));
    }
    let k = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    if k != expected_k {
        return Err(Error::format(format!(
            "operator cache is for k = {k}, expected {expected_k}"
        )));
    }
    let d = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
    let mut buf = vec![0u8; d * d * 16];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format("operator cache is truncated"))?;
    let mut op = CMatrix::zeros(d, d);
    for row in 0..d {
        for col in 0..d {
            let off = (row * d + col) * 16;
            let re = f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[off + 8..off + 16].try_into().unwrap());
            op[(row, col)] = Complex::new(re, im);
        }
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(Error::format("operator cache has trailing bytes"));
    }
    Ok(op)
}
