//! Symbols for quantization: measurable regions built from geodesic caps,
//! zonal profiles (functions of the polar coordinate only), and
//! piecewise-constant "simple" functions.
//!
//! Membership predicates are exact; boundaries are measure zero and are
//! assigned to the open side of each cap.

use serde::Serialize;

use crate::error::Error;
use crate::geometry::{geodesic_distance, SpherePoint};
use crate::Result;

/// A region of the sphere generated by open geodesic caps under complement,
/// finite intersection and finite union.
#[derive(Debug, Clone)]
pub enum Region {
    Full,
    Empty,
    /// Open cap `{ x : d(x, center) < radius }`.
    Cap { center: SpherePoint, radius: f64 },
    Complement(Box<Region>),
    Intersection(Vec<Region>),
    Union(Vec<Region>),
}

impl Region {
    pub fn cap(center: SpherePoint, radius: f64) -> Result<Region> {
        if !(radius > 0.0) || radius > std::f64::consts::PI {
            return Err(Error::invalid(format!(
                "cap radius must lie in (0, pi], got {radius}"
            )));
        }
        Ok(Region::Cap { center, radius })
    }

    /// Northern hemisphere `{ z > 0 }`.
    pub fn hemisphere() -> Region {
        Region::Cap {
            center: SpherePoint::north_pole(),
            radius: std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn complement(self) -> Region {
        Region::Complement(Box::new(self))
    }

    pub fn contains(&self, x: &SpherePoint) -> bool {
        match self {
            Region::Full => true,
            Region::Empty => false,
            Region::Cap { center, radius } => geodesic_distance(center, x) < *radius,
            Region::Complement(inner) => !inner.contains(x),
            Region::Intersection(parts) => parts.iter().all(|r| r.contains(x)),
            Region::Union(parts) => parts.iter().any(|r| r.contains(x)),
        }
    }

    pub fn indicator(&self, x: &SpherePoint) -> f64 {
        if self.contains(x) {
            1.0
        } else {
            0.0
        }
    }

    /// For zonal regions (every cap centered at a pole), the set of open
    /// `u = cos(theta)` intervals whose union is the region. `None` when the
    /// region is not zonal.
    pub fn zonal_intervals(&self) -> Option<IntervalSet> {
        match self {
            Region::Full => Some(IntervalSet::full()),
            Region::Empty => Some(IntervalSet::empty()),
            Region::Cap { center, radius } => {
                let c = radius.cos();
                if (center.z() - 1.0).abs() < 1e-14 && center.x().abs() < 1e-14 && center.y().abs() < 1e-14 {
                    // North-polar cap: theta < radius, i.e. u > cos(radius).
                    Some(IntervalSet::from_interval(c, 1.0))
                } else if (center.z() + 1.0).abs() < 1e-14
                    && center.x().abs() < 1e-14
                    && center.y().abs() < 1e-14
                {
                    // South-polar cap: u < -cos(radius).
                    Some(IntervalSet::from_interval(-1.0, -c))
                } else {
                    None
                }
            }
            Region::Complement(inner) => inner.zonal_intervals().map(|s| s.complement()),
            Region::Intersection(parts) => {
                let mut acc = IntervalSet::full();
                for p in parts {
                    acc = acc.intersect(&p.zonal_intervals()?);
                }
                Some(acc)
            }
            Region::Union(parts) => {
                let mut acc = IntervalSet::empty();
                for p in parts {
                    acc = acc.union(&p.zonal_intervals()?);
                }
                Some(acc)
            }
        }
    }

    pub fn is_zonal(&self) -> bool {
        self.zonal_intervals().is_some()
    }

    /// Piecewise 0/1 profile in `u` for a zonal region; errors otherwise.
    pub fn zonal_profile(&self) -> Result<PiecewisePoly> {
        let set = self.zonal_intervals().ok_or_else(|| {
            Error::invalid("region is not zonal: some cap is not centered at a pole")
        })?;
        Ok(PiecewisePoly::indicator(&set))
    }
}

/// Finite union of disjoint subintervals of `[-1, 1]`, kept sorted.
/// Endpoint topology is ignored: these describe indicator functions up to
/// measure zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { intervals: vec![] }
    }

    pub fn full() -> Self {
        IntervalSet {
            intervals: vec![(-1.0, 1.0)],
        }
    }

    pub fn from_interval(lo: f64, hi: f64) -> Self {
        let lo = lo.max(-1.0);
        let hi = hi.min(1.0);
        if lo >= hi {
            IntervalSet::empty()
        } else {
            IntervalSet {
                intervals: vec![(lo, hi)],
            }
        }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cursor = -1.0;
        for &(lo, hi) in &self.intervals {
            if lo > cursor {
                out.push((cursor, lo));
            }
            cursor = cursor.max(hi);
        }
        if cursor < 1.0 {
            out.push((cursor, 1.0));
        }
        IntervalSet { intervals: out }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for &(a, b) in &self.intervals {
            for &(c, d) in &other.intervals {
                let lo = a.max(c);
                let hi = b.min(d);
                if lo < hi {
                    out.push((lo, hi));
                }
            }
        }
        out.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        IntervalSet { intervals: out }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all: Vec<(f64, f64)> = self
            .intervals
            .iter()
            .chain(other.intervals.iter())
            .copied()
            .collect();
        all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in all {
            if let Some(last) = out.last_mut() {
                if lo <= last.1 {
                    last.1 = last.1.max(hi);
                    continue;
                }
            }
            out.push((lo, hi));
        }
        IntervalSet { intervals: out }
    }

    pub fn contains(&self, u: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo < u && u < hi)
    }

    /// Total length of the interval set.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|&(lo, hi)| hi - lo).sum()
    }
}

/// Piecewise polynomial in `u = cos(theta)` on `[-1, 1]`: the exact-path
/// input for zonal Toeplitz operators.
///
/// `breakpoints` has length `pieces.len() + 1`, starts at -1 and ends at 1;
/// piece `i` holds ascending-power coefficients valid on
/// `[breakpoints[i], breakpoints[i + 1]]`.
#[derive(Debug, Clone)]
pub struct PiecewisePoly {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() != pieces.len() + 1 {
            return Err(Error::invalid(
                "piecewise polynomial needs one more breakpoint than pieces",
            ));
        }
        if breakpoints.first() != Some(&-1.0) || breakpoints.last() != Some(&1.0) {
            return Err(Error::invalid(
                "piecewise polynomial must span exactly [-1, 1]",
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "piecewise polynomial breakpoints must be strictly increasing",
            ));
        }
        if pieces.iter().any(|p| p.is_empty() || p.iter().any(|c| !c.is_finite())) {
            return Err(Error::invalid(
                "piecewise polynomial coefficients must be finite and nonempty",
            ));
        }
        Ok(PiecewisePoly {
            breakpoints,
            pieces,
        })
    }

    /// Single polynomial on all of `[-1, 1]`.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        PiecewisePoly::new(vec![-1.0, 1.0], vec![coeffs])
    }

    pub fn constant(c: f64) -> Self {
        PiecewisePoly {
            breakpoints: vec![-1.0, 1.0],
            pieces: vec![vec![c]],
        }
    }

    /// Indicator of a zonal interval set: value 1 on the set, 0 elsewhere.
    pub fn indicator(set: &IntervalSet) -> Self {
        let mut cuts = vec![-1.0_f64];
        for &(lo, hi) in set.intervals() {
            for v in [lo, hi] {
                if v > -1.0 && v < 1.0 {
                    cuts.push(v);
                }
            }
        }
        cuts.push(1.0);
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        let mut pieces = Vec::with_capacity(cuts.len() - 1);
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            pieces.push(vec![if set.contains(mid) { 1.0 } else { 0.0 }]);
        }
        PiecewisePoly {
            breakpoints: cuts,
            pieces,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(|p| p.len() - 1).max().unwrap_or(0)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let u = u.clamp(-1.0, 1.0);
        // Boundaries are measure zero; evaluate the piece whose closure
        // contains u, preferring the earlier piece at interior cuts.
        let idx = match self
            .breakpoints
            .iter()
            .position(|&b| u <= b)
        {
            Some(0) => 0,
            Some(i) => i - 1,
            None => self.pieces.len() - 1,
        };
        horner(&self.pieces[idx], u)
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// A symbol to quantize: an evaluation rule plus the structural tag that
/// selects the best assembly route.
#[derive(Clone, Copy)]
pub enum Symbol<'a> {
    /// Arbitrary bounded symbol, integrated on the context grid.
    Smooth(&'a (dyn Fn(&SpherePoint) -> f64 + Sync)),
    /// Indicator of a region; a single cap gets the semi-analytic route.
    Indicator(&'a Region),
    /// Zonal piecewise polynomial in `u = cos(theta)`; assembled exactly.
    Zonal(&'a PiecewisePoly),
}

impl<'a> Symbol<'a> {
    pub fn eval(&self, x: &SpherePoint) -> f64 {
        match self {
            Symbol::Smooth(f) => f(x),
            Symbol::Indicator(r) => r.indicator(x),
            Symbol::Zonal(p) => p.eval(x.z()),
        }
    }
}

impl std::fmt::Debug for Symbol<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Symbol::Smooth(_) => f.write_str("Symbol::Smooth(..)"),
            Symbol::Indicator(r) => write!(f, "Symbol::Indicator({r:?})"),
            Symbol::Zonal(p) => write!(f, "Symbol::Zonal({p:?})"),
        }
    }
}

/// Simple function: finite real combination of region indicators.
#[derive(Debug, Clone)]
pub struct SimpleFunction {
    terms: Vec<(f64, Region)>,
}

impl SimpleFunction {
    pub fn new(terms: Vec<(f64, Region)>) -> Result<Self> {
        if terms.iter().any(|(c, _)| !c.is_finite()) {
            return Err(Error::invalid("simple function coefficients must be finite"));
        }
        Ok(SimpleFunction { terms })
    }

    pub fn indicator(region: Region) -> Self {
        SimpleFunction {
            terms: vec![(1.0, region)],
        }
    }

    pub fn terms(&self) -> &[(f64, Region)] {
        &self.terms
    }

    pub fn eval(&self, x: &SpherePoint) -> f64 {
        self.terms
            .iter()
            .map(|(c, r)| if r.contains(x) { *c } else { 0.0 })
            .sum()
    }

    /// Pointwise product with another simple function (evaluated, not
    /// expanded into regions).
    pub fn product_value(&self, other: &SimpleFunction, x: &SpherePoint) -> f64 {
        self.eval(x) * other.eval(x)
    }

    /// Pointwise square root; valid when the function is nonnegative.
    pub fn sqrt_value(&self, x: &SpherePoint) -> Result<f64> {
        let v = self.eval(x);
        if v < 0.0 {
            return Err(Error::numerical(format!(
                "square root of a negative simple-function value {v}"
            )));
        }
        Ok(v.sqrt())
    }
}
