//! Gauss–Legendre rules and the product quadrature on the sphere used for
//! all operator assembly.
//!
//! The sphere carries the normalized measure; in coordinates
//! `u = cos(theta)` it is `du dphi / (4 pi)`, so a Gauss rule in `u` crossed
//! with a uniform azimuthal rule integrates `u`-polynomials of degree
//! `2 n_theta - 1` times azimuthal modes `|q| < n_phi` exactly.

use crate::error::Error;
use crate::geometry::SpherePoint;
use crate::Result;

/// Nodes (ascending) and weights of the `n`-point Gauss–Legendre rule on
/// `[-1, 1]`. Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::invalid("Gauss-Legendre rule needs at least one node"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre_and_derivative(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // The guess enumerates roots from the right; mirror for symmetry.
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_and_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    Ok((nodes, weights))
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped affinely onto `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(a < b) {
        return Err(Error::invalid(format!(
            "quadrature interval must satisfy a < b, got [{a}, {b}]"
        )));
    }
    let (xs, ws) = gauss_legendre(n)?;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    Ok((
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| half * w).collect(),
    ))
}

/// Product rule on the sphere for the normalized measure: Gauss–Legendre in
/// `u = cos(theta)`, uniform in azimuth. Node `(t, j)` sits at colatitude
/// `acos(u_t)`, azimuth `2 pi j / n_phi`, and carries weight
/// `w_t / (2 n_phi)`; the weights sum to 1.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    u: Vec<f64>,
    u_weight: Vec<f64>,
    n_phi: usize,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_phi == 0 {
            return Err(Error::invalid("azimuthal rule needs at least one node"));
        }
        let (u, u_weight) = gauss_legendre(n_theta)?;
        Ok(SphereQuadrature { u, u_weight, n_phi })
    }

    pub fn n_theta(&self) -> usize {
        self.u.len()
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn node_count(&self) -> usize {
        self.u.len() * self.n_phi
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Gauss weight of the `u`-row alone (sums to 2 over rows).
    pub fn u_weight(&self) -> &[f64] {
        &self.u_weight
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.n_phi as f64
    }

    /// Full normalized weight of node `(t, j)`.
    pub fn weight(&self, t: usize) -> f64 {
        self.u_weight[t] / (2.0 * self.n_phi as f64)
    }

    pub fn point(&self, t: usize, j: usize) -> SpherePoint {
        let u = self.u[t];
        let s = (1.0 - u * u).max(0.0).sqrt();
        let phi = self.phi(j);
        SpherePoint::from_unnormalized(s * phi.cos(), s * phi.sin(), u)
            .expect("quadrature node is on the sphere")
    }

    /// Integral of `f` against the normalized measure.
    pub fn integrate<F: Fn(&SpherePoint) -> f64>(&self, f: F) -> f64 {
        let mut acc = 0.0;
        for t in 0..self.u.len() {
            let mut row = 0.0;
            for j in 0..self.n_phi {
                row += f(&self.point(t, j));
            }
            acc += row * self.weight(t);
        }
        acc
    }
}
