//! Toeplitz calculus for piecewise-constant symbols.
//!
//! Operators of indicator symbols are almost projectors; this module
//! measures how far they miss, in normalized Schatten norms, and fits the
//! decay of the miss against `hbar = 1/k`. Everything here is assembled on
//! the plain product grid (no graded cap panels) so that the trace identity
//! `tr(T(f) T(g)) = double integral of f(x) g(y) |K(x,y)|^2` closes at the
//! quadrature level, not merely asymptotically.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::linalg::{
    eigvalsh, hermitian_defect, identity, singular_values, sqrt_psd, CMatrix,
};
use crate::quantize::{kernel_intensity_closed, toeplitz, toeplitz_zonal_exact, QuantizationContext};
use crate::geometry::SpherePoint;
use crate::symbols::{Region, SimpleFunction};
use crate::Result;

/// Normalized Schatten norm `(tr |T|^p / d)^{1/p}`.
///
/// Hermitian inputs go through the eigenvalues; anything else through
/// singular values.
pub fn schatten_norm(op: &CMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid(format!(
            "Schatten exponent must satisfy p >= 1, got {p}"
        )));
    }
    if op.nrows() != op.ncols() || op.nrows() == 0 {
        return Err(Error::invalid(format!(
            "Schatten norm needs a nonempty square matrix, got {}x{}",
            op.nrows(),
            op.ncols()
        )));
    }
    let d = op.nrows() as f64;
    let spectrum: Vec<f64> = if hermitian_defect(op) < 1e-10 {
        eigvalsh(op, "schatten norm")?
            .into_iter()
            .map(f64::abs)
            .collect()
    } else {
        singular_values(op, "schatten norm")?
    };
    Ok((spectrum.iter().map(|s| s.powf(p)).sum::<f64>() / d).powf(1.0 / p))
}

/// Schatten 2-norm straight from the entries, valid for any matrix.
fn schatten_two(op: &CMatrix) -> f64 {
    let d = op.nrows() as f64;
    (op.iter().map(|z| z.norm_sqr()).sum::<f64>() / d).sqrt()
}

/// Toeplitz operator of a region indicator on the plain grid.
///
/// A complement is assembled as `Id - T_A`, which is what the symbol algebra
/// dictates; the subtraction keeps the closure identities exact at the
/// matrix level instead of up to a second quadrature pass.
pub fn toeplitz_region(ctx: &QuantizationContext, region: &Region) -> Result<CMatrix> {
    match region {
        Region::Complement(inner) => Ok(identity(ctx.dim()) - toeplitz_region(ctx, inner)?),
        _ => toeplitz(ctx, |x| region.indicator(x)),
    }
}

/// Toeplitz operator of a simple function, sampled pointwise.
pub fn toeplitz_simple(ctx: &QuantizationContext, f: &SimpleFunction) -> Result<CMatrix> {
    toeplitz(ctx, |x| f.eval(x))
}

/// Normalized projector defect `tr(T - T^2)/d` of an operator expected to
/// satisfy `0 <= T <= 1`. An eigenvalue escaping `[0, 1]` means the
/// assembling quadrature broke, so that case is a diagnostic, not a number.
pub fn good_set_defect_of(op: &CMatrix, label: &str) -> Result<f64> {
    let eigen = eigvalsh(op, label)?;
    for &l in &eigen {
        if !(-1e-10..=1.0 + 1e-10).contains(&l) {
            return Err(Error::numerical(format!(
                "{label}: eigenvalue {l:.6e} escapes [0, 1]; quadrature assembly failed"
            )));
        }
    }
    let d = eigen.len() as f64;
    Ok((eigen.iter().map(|l| l * (1.0 - l)).sum::<f64>() / d).max(0.0))
}

/// `tr(T_A - T_A^2)/d` for a region indicator.
///
/// Complements reuse the inner region: `T_{A^c} = 1 - T_A` leaves
/// `T - T^2` unchanged, so the two defects are equal by construction.
pub fn good_set_defect(ctx: &QuantizationContext, region: &Region) -> Result<f64> {
    if let Region::Complement(inner) = region {
        return good_set_defect(ctx, inner);
    }
    let op = toeplitz_region(ctx, region)?;
    good_set_defect_of(&op, "good-set defect")
}

/// Weighted quadrature nodes split by region membership.
fn split_nodes(
    ctx: &QuantizationContext,
    region: &Region,
) -> (Vec<(SpherePoint, f64)>, Vec<(SpherePoint, f64)>) {
    let quad = ctx.quadrature();
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for t in 0..quad.n_theta() {
        let w = quad.weight(t);
        for j in 0..quad.n_phi() {
            let p = quad.point(t, j);
            if region.contains(&p) {
                inside.push((p, w));
            } else {
                outside.push((p, w));
            }
        }
    }
    (inside, outside)
}

/// Double quadrature of `|K(x, y)|^2` over `A x A^c`, both factors carrying
/// the normalized measure. Not divided by the dimension: the value matches
/// `tr(T_A - T_A^2)` at grid level, `d` times [`good_set_defect`].
pub fn good_set_integral(ctx: &QuantizationContext, region: &Region) -> Result<f64> {
    let k = ctx.k();
    let (inside, outside) = split_nodes(ctx, region);
    Ok(inside
        .par_iter()
        .map(|(x, wx)| {
            wx * outside
                .iter()
                .map(|(y, wy)| wy * kernel_intensity_closed(k, x, y))
                .sum::<f64>()
        })
        .sum())
}

/// `|| T(f) T(g) - T(fg) ||_2` for simple functions, with `fg` sampled
/// pointwise.
pub fn product_defect(
    ctx: &QuantizationContext,
    f: &SimpleFunction,
    g: &SimpleFunction,
) -> Result<f64> {
    let tf = toeplitz_simple(ctx, f)?;
    let tg = toeplitz_simple(ctx, g)?;
    let tfg = toeplitz(ctx, |x| f.product_value(g, x))?;
    Ok(schatten_two(&(&tf * &tg - tfg)))
}

/// Smallest grid value of a simple function; rejects negative functions.
fn require_nonnegative(ctx: &QuantizationContext, f: &SimpleFunction, what: &str) -> Result<()> {
    let quad = ctx.quadrature();
    let mut min = f64::INFINITY;
    for t in 0..quad.n_theta() {
        for j in 0..quad.n_phi() {
            min = min.min(f.eval(&quad.point(t, j)));
        }
    }
    if min < 0.0 {
        return Err(Error::invalid(format!(
            "{what} needs a nonnegative symbol; minimum grid value is {min:.6e}"
        )));
    }
    Ok(())
}

/// `|| T(f)^{1/2} - T(f^{1/2}) ||_4` for a nonnegative simple function.
pub fn sqrt_defect(ctx: &QuantizationContext, f: &SimpleFunction) -> Result<f64> {
    require_nonnegative(ctx, f, "square-root defect")?;
    let tf = toeplitz_simple(ctx, f)?;
    let left = sqrt_psd(&tf, "square root of T(f)")?;
    let right = toeplitz(ctx, |x| f.eval(x).max(0.0).sqrt())?;
    schatten_norm(&(left - right), 4.0)
}

/// Both sides of the multi-time comparison.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MultiTimeCheck {
    /// `tr(P* P)/d` with `P = T(f_1)^{1/2} ... T(f_m)^{1/2}`.
    pub lhs: f64,
    /// Quadrature of the pointwise product `f_1 ... f_m`.
    pub rhs: f64,
    pub gap: f64,
}

/// Compares the m-step registration trace with the classical product
/// integral for nonnegative simple functions.
pub fn multi_time_check(ctx: &QuantizationContext, fs: &[SimpleFunction]) -> Result<MultiTimeCheck> {
    if fs.is_empty() {
        return Err(Error::invalid("multi-time check needs at least one symbol"));
    }
    for f in fs {
        require_nonnegative(ctx, f, "multi-time check")?;
    }
    let mut product: Option<CMatrix> = None;
    for f in fs {
        let root = sqrt_psd(&toeplitz_simple(ctx, f)?, "multi-time factor")?;
        product = Some(match product {
            None => root,
            Some(p) => p * root,
        });
    }
    let p = product.expect("nonempty symbol list");
    let d = p.nrows() as f64;
    let lhs = p.iter().map(|z| z.norm_sqr()).sum::<f64>() / d;
    let rhs = ctx
        .quadrature()
        .integrate(|x| fs.iter().map(|f| f.eval(x)).product());
    Ok(MultiTimeCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// Exact spectrum of the Toeplitz operator of a polar cap `{theta < theta0}`.
#[derive(Debug, Clone)]
pub struct CapSpectrum {
    pub theta0: f64,
    /// Ascending eigenvalues; the operator is diagonal in the monomial basis.
    pub eigenvalues: Vec<f64>,
}

impl CapSpectrum {
    /// Distance from the spectrum to the half point.
    pub fn min_gap_to_half(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| (l - 0.5).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `|| T^2 - T ||_op = max lambda (1 - lambda)`.
    pub fn projector_defect_opnorm(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| (l * (1.0 - l)).abs())
            .fold(0.0, f64::max)
    }
}

/// Spectrum of the polar-cap operator via the exact zonal diagonal.
pub fn cap_spectrum(ctx: &QuantizationContext, theta0: f64) -> Result<CapSpectrum> {
    let cap = Region::cap(SpherePoint::north_pole(), theta0)?;
    let profile = cap.zonal_profile()?;
    let mut eigenvalues = toeplitz_zonal_exact(ctx, &profile)?;
    eigenvalues.sort_by(f64::total_cmp);
    Ok(CapSpectrum { theta0, eigenvalues })
}

/// Least-squares fit of `log(value)` against `log(hbar)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub used: usize,
    /// Samples discarded because the value vanished (log undefined).
    pub dropped: usize,
}

/// Fits the decay exponent of `(hbar, value)` samples. Vanishing values are
/// dropped (the decay beat the arithmetic); fewer than 4 surviving samples
/// is an error, not a fit.
pub fn fit_scaling_exponent(samples: &[(f64, f64)]) -> Result<ScalingFit> {
    for &(hbar, _) in samples {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::invalid(format!(
                "scaling fit needs positive hbar, got {hbar}"
            )));
        }
    }
    let usable: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(_, v)| v > 0.0 && v.is_finite())
        .map(|&(h, v)| (h.ln(), v.ln()))
        .collect();
    let dropped = samples.len() - usable.len();
    if usable.len() < 4 {
        return Err(Error::invalid(format!(
            "scaling fit needs at least 4 positive samples, got {} ({dropped} dropped)",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let mean_y = usable.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let var_x = usable.iter().map(|&(x, _)| (x - mean_x).powi(2)).sum::<f64>();
    let cov = usable
        .iter()
        .map(|&(x, y)| (x - mean_x) * (y - mean_y))
        .sum::<f64>();
    if var_x <= 0.0 {
        return Err(Error::invalid(
            "scaling fit needs at least two distinct hbar values",
        ));
    }
    let slope = cov / var_x;
    let intercept = mean_y - slope * mean_x;
    let residual = (usable
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ScalingFit {
        slope,
        intercept,
        residual,
        used: usable.len(),
        dropped,
    })
}

/// One defect scan: the sampled values, the fitted exponent, and the verdict
/// against a target exponent.
#[derive(Debug, Clone, Serialize)]
pub struct SchattenReport {
    pub quantity: String,
    /// `[k, value]` rows in scan order.
    pub samples: Vec<(usize, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub target: f64,
    pub pass: bool,
    pub dropped: usize,
}

impl SchattenReport {
    pub fn render_line(&self) -> String {
        format!(
            "{}: slope {:.4} (target >= {:.2}, residual {:.2e}) {}",
            self.quantity,
            self.slope,
            self.target,
            self.residual,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// Evaluates `defect` at every `k` concurrently (independent contexts on the
/// minimal exact grids) and fits the decay exponent against `hbar = 1/k`.
pub fn scan_schatten<F>(ks: &[usize], quantity: &str, target: f64, defect: F) -> Result<SchattenReport>
where
    F: Fn(&QuantizationContext) -> Result<f64> + Sync,
{
    if ks.is_empty() {
        return Err(Error::invalid("defect scan needs at least one k"));
    }
    let samples: Vec<(usize, f64)> = ks
        .par_iter()
        .map(|&k| {
            let ctx = QuantizationContext::with_defaults(k)?;
            Ok((k, defect(&ctx)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_scaling_exponent(
        &samples
            .iter()
            .map(|&(k, v)| (1.0 / k as f64, v))
            .collect::<Vec<_>>(),
    )?;
    Ok(SchattenReport {
        quantity: quantity.to_string(),
        samples,
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        target,
        pass: fit.slope >= target,
        dropped: fit.dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use approx::assert_abs_diff_eq;

    fn ctx(k: usize) -> QuantizationContext {
        QuantizationContext::with_defaults(k).unwrap()
    }

    fn tilted_cap(radius: f64) -> Region {
        let center = SpherePoint::from_unnormalized(0.3, -0.2, 0.93).unwrap();
        Region::cap(center, radius).unwrap()
    }

    #[test]
    fn schatten_norm_frozen_values() {
        let id = identity(7);
        for p in [1.0, 2.0, 3.5] {
            assert_abs_diff_eq!(schatten_norm(&id, p).unwrap(), 1.0, epsilon = 1e-12);
        }

        let mut proj = CMatrix::zeros(5, 5);
        proj[(0, 0)] = C64::new(1.0, 0.0);
        assert_abs_diff_eq!(schatten_norm(&proj, 1.0).unwrap(), 0.2, epsilon = 1e-12);

        let diag = crate::quantize::diagonal_operator(&[0.25, 0.75]);
        assert_abs_diff_eq!(
            schatten_norm(&diag, 2.0).unwrap(),
            (5.0f64 / 16.0).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn schatten_norm_uses_singular_values_off_hermitian() {
        // A nilpotent shift: singular values {1, 1, 0}.
        let mut shift = CMatrix::zeros(3, 3);
        shift[(0, 1)] = C64::new(1.0, 0.0);
        shift[(1, 2)] = C64::new(1.0, 0.0);
        assert_abs_diff_eq!(
            schatten_norm(&shift, 1.0).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            schatten_norm(&shift, 2.0).unwrap(),
            (2.0f64 / 3.0).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn schatten_norm_rejects_bad_exponent() {
        let id = identity(3);
        assert!(schatten_norm(&id, 0.5).is_err());
    }

    #[test]
    fn trivial_regions_have_zero_defect() {
        let c = ctx(12);
        assert!(good_set_defect(&c, &Region::Empty).unwrap() < 1e-12);
        assert!(good_set_defect(&c, &Region::Full).unwrap() < 1e-12);
        assert!(good_set_integral(&c, &Region::Empty).unwrap().abs() < 1e-12);
        assert!(good_set_integral(&c, &Region::Full).unwrap().abs() < 1e-12);
    }

    #[test]
    fn complement_defect_is_bitwise_equal() {
        let c = ctx(16);
        let cap = tilted_cap(0.9);
        let direct = good_set_defect(&c, &cap).unwrap();
        let complemented = good_set_defect(&c, &cap.clone().complement()).unwrap();
        assert_eq!(direct.to_bits(), complemented.to_bits());
        assert!(direct > 1e-4, "a desk-scale cap is not yet a projector");
    }

    #[test]
    fn complement_operator_is_identity_minus_original() {
        let c = ctx(14);
        let cap = tilted_cap(1.1);
        let t = toeplitz_region(&c, &cap).unwrap();
        let tc = toeplitz_region(&c, &cap.clone().complement()).unwrap();
        let resampled = toeplitz(&c, |x| 1.0 - cap.indicator(x)).unwrap();
        let structural = crate::linalg::max_abs_entry(&(identity(c.dim()) - &t - &tc));
        assert!(structural == 0.0, "complement must be Id - T exactly");
        let versus_grid = crate::linalg::max_abs_entry(&(tc - resampled));
        assert!(versus_grid < 1e-12, "grid assembly drifted: {versus_grid:.3e}");
    }

    #[test]
    fn kernel_integral_matches_operator_defect() {
        let c = ctx(24);
        let cap = tilted_cap(1.0);
        let defect = good_set_defect(&c, &cap).unwrap();
        let integral = good_set_integral(&c, &cap).unwrap();
        let d = c.dim() as f64;
        let relative = (integral - d * defect).abs() / (d * defect);
        assert!(
            relative < 1e-9,
            "trace identity should close at grid level, got relative gap {relative:.3e}"
        );
    }

    #[test]
    fn intersection_integral_inequality() {
        // (A cap B) x (A cap B)^c is contained in (A x A^c) union (B x B^c),
        // so the kernel mass obeys the corresponding inequality.
        let c = ctx(16);
        let a = tilted_cap(1.2);
        let b = Region::cap(SpherePoint::from_unnormalized(-0.4, 0.1, 0.91).unwrap(), 1.0)
            .unwrap();
        let both = Region::Intersection(vec![a.clone(), b.clone()]);
        let ia = good_set_integral(&c, &a).unwrap();
        let ib = good_set_integral(&c, &b).unwrap();
        let iab = good_set_integral(&c, &both).unwrap();
        assert!(
            iab <= ia + ib + 1e-12,
            "intersection mass {iab:.6e} exceeds {ia:.6e} + {ib:.6e}"
        );
        assert!(iab > 0.0);
    }

    #[test]
    fn boolean_regions_stay_inside_unit_interval() {
        let c = ctx(10);
        let a = tilted_cap(1.3);
        let b = Region::hemisphere();
        let regions = [
            Region::Union(vec![a.clone(), b.clone()]),
            Region::Intersection(vec![a.clone(), b.clone()]),
            Region::Union(vec![a.clone().complement(), b.clone()]),
            Region::Intersection(vec![a, b]).complement(),
        ];
        for region in regions {
            let defect = good_set_defect(&c, &region).unwrap();
            assert!(defect >= 0.0);
        }
    }

    #[test]
    fn defect_diagnostic_rejects_broken_operators() {
        let broken = crate::quantize::diagonal_operator(&[0.2, 1.5]);
        let err = good_set_defect_of(&broken, "unit test").unwrap_err();
        assert!(err.to_string().contains("escapes [0, 1]"));
    }

    #[test]
    fn hemisphere_defect_decays_like_sqrt_hbar() {
        let report = scan_schatten(&[8, 16, 32, 64], "hemisphere defect", 0.4, |c| {
            good_set_defect(c, &Region::hemisphere())
        })
        .unwrap();
        assert!(
            report.slope > 0.4 && report.slope < 0.75,
            "hemisphere defect slope {:.4} strayed from 1/2",
            report.slope
        );
        assert!(report.pass);
        assert_eq!(report.dropped, 0);
    }

    #[test]
    fn product_defect_examples() {
        let c = ctx(16);
        let full = SimpleFunction::indicator(Region::Full);
        assert!(product_defect(&c, &full, &full).unwrap() < 1e-12);

        // Complementary caps: fg = 0, the defect is the cross term.
        let cap = Region::hemisphere();
        let f = SimpleFunction::indicator(cap.clone());
        let g = SimpleFunction::indicator(cap.complement());
        let coarse = product_defect(&ctx(8), &f, &g).unwrap();
        let fine = product_defect(&ctx(32), &f, &g).unwrap();
        assert!(fine < coarse, "cross-term defect must decay: {coarse} -> {fine}");
        assert!(coarse > 1e-3);
    }

    #[test]
    fn intersection_product_defect_decays() {
        let a = tilted_cap(1.2);
        let b = Region::hemisphere();
        let f = SimpleFunction::indicator(a.clone());
        let g = SimpleFunction::indicator(b.clone());
        let value = |k: usize| {
            let c = ctx(k);
            let ta = toeplitz_simple(&c, &f).unwrap();
            let tb = toeplitz_simple(&c, &g).unwrap();
            let tab = toeplitz_region(&c, &Region::Intersection(vec![a.clone(), b.clone()]))
                .unwrap();
            schatten_two(&(&ta * &tb - tab))
        };
        let coarse = value(8);
        let fine = value(32);
        assert!(fine < coarse, "intersection defect must decay: {coarse} -> {fine}");
    }

    #[test]
    fn sqrt_defect_examples() {
        let c = ctx(16);
        let full = SimpleFunction::indicator(Region::Full);
        assert!(sqrt_defect(&c, &full).unwrap() < 1e-10);

        // 4 * indicator of the full sphere: T(4)^{1/2} = 2 Id = T(2).
        let four = SimpleFunction::new(vec![(4.0, Region::Full)]).unwrap();
        assert!(sqrt_defect(&c, &four).unwrap() < 1e-9);

        let cap = SimpleFunction::indicator(tilted_cap(1.0));
        let coarse = sqrt_defect(&ctx(8), &cap).unwrap();
        let fine = sqrt_defect(&ctx(32), &cap).unwrap();
        assert!(fine < coarse, "sqrt defect must decay: {coarse} -> {fine}");

        let negative = SimpleFunction::new(vec![(-1.0, Region::Full)]).unwrap();
        assert!(sqrt_defect(&c, &negative).is_err());
    }

    #[test]
    fn multi_time_examples() {
        let c = ctx(12);
        let full = SimpleFunction::indicator(Region::Full);
        let check = multi_time_check(&c, &[full.clone(), full.clone(), full]).unwrap();
        assert_abs_diff_eq!(check.lhs, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(check.rhs, 1.0, epsilon = 1e-12);

        // Disjoint caps: the classical product vanishes, the trace decays.
        let north = SimpleFunction::indicator(
            Region::cap(SpherePoint::north_pole(), 0.8).unwrap(),
        );
        let south = SimpleFunction::indicator(
            Region::cap(SpherePoint::south_pole(), 0.8).unwrap(),
        );
        let coarse = multi_time_check(&ctx(8), &[north.clone(), south.clone()]).unwrap();
        let fine = multi_time_check(&ctx(32), &[north, south]).unwrap();
        assert_eq!(coarse.rhs, 0.0);
        assert!(fine.lhs < coarse.lhs);
    }

    #[test]
    fn cap_spectrum_frozen_values() {
        let c1 = ctx(1);
        let hemi = cap_spectrum(&c1, std::f64::consts::FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(hemi.eigenvalues[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(hemi.eigenvalues[1], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(hemi.min_gap_to_half(), 0.25, epsilon = 1e-12);

        let full = cap_spectrum(&ctx(5), std::f64::consts::PI).unwrap();
        for l in &full.eigenvalues {
            assert_abs_diff_eq!(*l, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hemisphere_spectrum_approaches_half() {
        // Odd k keeps the dimension even: no exactly-central eigenvalue, so
        // the gap to 1/2 is positive and shrinking.
        let gaps: Vec<f64> = [5, 11, 23, 47]
            .iter()
            .map(|&k| {
                cap_spectrum(&ctx(k), std::f64::consts::FRAC_PI_2)
                    .unwrap()
                    .min_gap_to_half()
            })
            .collect();
        for pair in gaps.windows(2) {
            assert!(pair[1] < pair[0], "gap sequence must decrease: {gaps:?}");
        }
        // Even k pins an eigenvalue at exactly 1/2 by symmetry.
        let even = cap_spectrum(&ctx(6), std::f64::consts::FRAC_PI_2).unwrap();
        assert!(even.min_gap_to_half() < 1e-13);
        assert_abs_diff_eq!(even.projector_defect_opnorm(), 0.25, epsilon = 1e-13);
    }

    #[test]
    fn fit_recovers_synthetic_exponents() {
        let hbars: [f64; 5] = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
        let half: Vec<(f64, f64)> = hbars.iter().map(|&h| (h, h.sqrt())).collect();
        let fit = fit_scaling_exponent(&half).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.5, epsilon = 1e-10);
        assert!(fit.residual < 1e-10);

        let linear: Vec<(f64, f64)> = hbars.iter().map(|&h| (h, 3.0 * h)).collect();
        let fit = fit_scaling_exponent(&linear).unwrap();
        assert_abs_diff_eq!(fit.slope, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.intercept, 3.0f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn fit_drops_zeros_and_demands_four_samples() {
        let mixed = [
            (0.5, 0.1),
            (0.25, 0.05),
            (0.125, 0.02),
            (0.0625, 0.01),
            (0.03125, 0.0),
        ];
        let fit = fit_scaling_exponent(&mixed).unwrap();
        assert_eq!(fit.dropped, 1);
        assert_eq!(fit.used, 4);

        let short = [(0.5, 0.1), (0.25, 0.0), (0.125, 0.02), (0.0625, 0.01)];
        let err = fit_scaling_exponent(&short).unwrap_err();
        assert!(err.to_string().contains("at least 4"));

        assert!(fit_scaling_exponent(&[(0.0, 1.0); 5]).is_err());
    }

    #[test]
    fn scan_report_serializes_samples_as_pairs() {
        let report = scan_schatten(&[8, 12, 16, 24], "probe", 0.1, |c| {
            Ok(c.hbar().sqrt())
        })
        .unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["samples"][0][0], 8);
        assert!(json["pass"].as_bool().unwrap());
        assert_abs_diff_eq!(json["slope"].as_f64().unwrap(), 0.5, epsilon = 1e-10);
    }
}
