//! Dense complex linear algebra shared by the quantization and operator
//! calculus modules.
//!
//! Matrices are `nalgebra` dynamic matrices over `Complex<f64>`. Operators
//! on a level-`k` quantization space are small (dimension `k + 1`, a few
//! hundred at most), so dense eigendecompositions are cheap and every norm
//! is computed spectrally.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::Error;
use crate::Result;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest absolute deviation from Hermitian symmetry, `max |A - A*|`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            let d = (a[(i, j)] - a[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Largest absolute entry.
pub fn max_abs_entry(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Replaces `A` by its Hermitian part `(A + A*) / 2`, removing rounding
/// asymmetry from quadrature assembly.
pub fn hermitize(a: &mut CMatrix) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * C64::new(0.5, 0.0);
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
        let d = a[(j, j)];
        a[(j, j)] = C64::new(d.re, 0.0);
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order with the matching eigenvector
/// columns. Fails if the input is visibly non-Hermitian (tolerance scaled by
/// the largest entry) or the iteration does not converge.
pub fn eigh(a: &CMatrix, label: &str) -> Result<(Vec<f64>, CMatrix)> {
    let scale = max_abs_entry(a).max(1.0);
    let defect = hermitian_defect(a);
    if defect > 1e-10 * scale {
        return Err(Error::numerical(format!(
            "{label}: matrix is not Hermitian (defect {defect:.3e} at scale {scale:.3e})"
        )));
    }
    let mut sym = a.clone();
    hermitize(&mut sym);
    // symmetric_eigen does not sort, so reorder values and vectors together.
    let decomp = nalgebra::linalg::SymmetricEigen::new(sym);
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        decomp.eigenvalues[i]
            .partial_cmp(&decomp.eigenvalues[j])
            .expect("eigenvalues are finite")
    });
    let values: Vec<f64> = order.iter().map(|&i| decomp.eigenvalues[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(format!(
            "{label}: eigensolver produced non-finite eigenvalues"
        )));
    }
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &decomp.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(a: &CMatrix, label: &str) -> Result<Vec<f64>> {
    let (values, _) = eigh(a, label)?;
    Ok(values)
}

/// Applies `phi` to the spectrum of a Hermitian matrix: `V phi(D) V*`.
pub fn hermitian_calculus(
    a: &CMatrix,
    label: &str,
    phi: impl Fn(f64) -> f64,
) -> Result<CMatrix> {
    let (values, vectors) = eigh(a, label)?;
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let f = phi(v);
        if !f.is_finite() {
            return Err(Error::numerical(format!(
                "{label}: spectral function produced non-finite value at eigenvalue {v}"
            )));
        }
        for i in 0..n {
            scaled[(i, j)] *= C64::new(f, 0.0);
        }
    }
    let mut out = &scaled * vectors.adjoint();
    hermitize(&mut out);
    Ok(out)
}

/// Positive-semidefinite square root with a relative clamp: eigenvalues in
/// `[-tol_scale, 0)` are treated as rounding noise and clamped to zero;
/// anything below fails with the offending eigenvalue in the message.
pub fn sqrt_psd(a: &CMatrix, label: &str) -> Result<CMatrix> {
    let (values, vectors) = eigh(a, label)?;
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let floor = -1e-10 * scale.max(1.0);
    if let Some(bad) = values.iter().find(|&&v| v < floor) {
        return Err(Error::numerical(format!(
            "{label}: matrix is not positive semidefinite (eigenvalue {bad:.6e}, scale {scale:.3e})"
        )));
    }
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let f = v.max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= C64::new(f, 0.0);
        }
    }
    let mut out = &scaled * vectors.adjoint();
    hermitize(&mut out);
    Ok(out)
}

/// Operator norm. Hermitian inputs use `max |eigenvalue|`; general inputs
/// use the largest singular value via `A* A`.
pub fn operator_norm(a: &CMatrix, label: &str) -> Result<f64> {
    let scale = max_abs_entry(a).max(1.0);
    if hermitian_defect(a) <= 1e-10 * scale {
        let values = eigvalsh(a, label)?;
        Ok(values.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
    } else {
        let gram = a.adjoint() * a;
        let values = eigvalsh(&gram, label)?;
        let top = values.iter().fold(0.0_f64, |m, v| m.max(*v));
        Ok(top.max(0.0).sqrt())
    }
}

/// Singular values, ascending.
pub fn singular_values(a: &CMatrix, label: &str) -> Result<Vec<f64>> {
    let gram = a.adjoint() * a;
    let values = eigvalsh(&gram, label)?;
    Ok(values.iter().map(|v| v.max(0.0).sqrt()).collect())
}

/// Real part of the trace.
pub fn trace_re(a: &CMatrix) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].re).sum()
}

/// Real part of the Frobenius inner product `tr(A B)`. For Hermitian `A`,
/// `B` this is the trace of the product without forming it.
pub fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..a.ncols() {
            let p = a[(i, j)] * b[(j, i)];
            acc += p.re;
        }
    }
    acc
}

/// Identity matrix of dimension `n`.
pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// `max |A - I|` entrywise.
pub fn identity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((a[(i, j)] - target).norm());
        }
    }
    worst
}
