//! Variable exponents: bounds, hypothesis checks, the modular
//! `∫|u|^{p(x)}`, the Luxemburg norm and the Sobolev conjugate exponent.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodeField};
use crate::report::{Status, ValidationReport};

/// Stand-in for `p*(x) = +∞` in nodal arrays.
pub const SOBOLEV_INFINITY: f64 = f64::MAX;

/// Nodal exponent `p(x)` together with the comparison constant `r`.
#[derive(Debug, Clone)]
pub struct ExponentField {
    p: NodeField,
    p_cells: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
    r: f64,
}

/// `(min, max)` of a nodal exponent, rejecting any value `<= 1`.
pub fn exponent_bounds(p: &NodeField) -> Result<(f64, f64)> {
    if let Some((node, &value)) = p.values().iter().enumerate().find(|(_, v)| **v <= 1.0) {
        return Err(Error::InvalidExponent { node, value });
    }
    Ok((p.min(), p.max()))
}

impl ExponentField {
    /// Requires `p > 1` nodewise and `r >= 1`. The ordering `r <= p₋` is
    /// reported by [`ExponentField::validate`] rather than enforced, since
    /// some callers (eigenvalue runs, negative tests) deliberately violate it.
    pub fn new(p: NodeField, r: f64) -> Result<Self> {
        let (p_minus, p_plus) = exponent_bounds(&p)?;
        if !(r.is_finite() && r >= 1.0) {
            return Err(Error::InvalidParameter(format!("r = {r} (need 1 <= r < ∞)")));
        }
        let p_cells = p.mesh().to_cells(p.values());
        Ok(ExponentField { p, p_cells, p_minus, p_plus, r })
    }

    pub fn constant(mesh: &Arc<Mesh>, p: f64, r: f64) -> Result<Self> {
        Self::new(NodeField::constant(mesh, p), r)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.p.mesh()
    }

    pub fn p(&self) -> &NodeField {
        &self.p
    }

    /// `p` at cell quadrature points.
    pub fn p_cells(&self) -> &[f64] {
        &self.p_cells
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        Self::new(self.p.clone(), r)
    }

    /// Fraction of quadrature points where `p(x) - r > 1e-12`.
    pub fn fraction_p_above_r(&self) -> f64 {
        let n = self.p_cells.len() as f64;
        self.p_cells.iter().filter(|&&p| p - self.r > 1e-12).count() as f64 / n
    }

    /// True when `p ≡ r` on every quadrature point.
    pub fn is_identically_r(&self) -> bool {
        self.fraction_p_above_r() == 0.0 && self.p_cells.iter().all(|&p| (p - self.r).abs() <= 1e-12)
    }

    /// Checks `p₋ > 1`, `r <= p₋` and reports an empirical Hölder quotient
    /// `max |p(x) - p(x')| / |x - x'|^α` over node pairs.
    pub fn validate(&self, holder_alpha: f64) -> ValidationReport {
        let mut report = ValidationReport::default();
        report.push(
            "p_minus > 1",
            Status::from_bool(self.p_minus > 1.0),
            Some(self.p_minus),
            format!("p₋ = {}", self.p_minus),
        );
        report.push(
            "r <= p_minus",
            Status::from_bool(self.r >= 1.0 && self.r <= self.p_minus),
            Some(self.r),
            format!("r = {}, p₋ = {}", self.r, self.p_minus),
        );
        let q = holder_quotient(&self.p, holder_alpha);
        report.push(
            "holder_surrogate",
            Status::from_bool(q.is_finite()),
            Some(q),
            format!("max |Δp| / |Δx|^{holder_alpha} over node pairs (finite surrogate, not a proof)"),
        );
        report
    }
}

fn holder_quotient(p: &NodeField, alpha: f64) -> f64 {
    let nodes = p.mesh().nodes();
    let v = p.values();
    let mut best: f64 = 0.0;
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let d = ((nodes[i][0] - nodes[j][0]).powi(2) + (nodes[i][1] - nodes[j][1]).powi(2)).sqrt();
            best = best.max((v[i] - v[j]).abs() / d.powf(alpha));
        }
    }
    best
}

/// `∫ |u(x)|^{p(x)} dx` with the one-point rule: the nodal average of `u`
/// is raised to the cell exponent.
pub fn modular(u: &NodeField, p: &ExponentField) -> Result<f64> {
    u.check_same_mesh(p.p())?;
    Ok(modular_scaled(u, p, 1.0))
}

fn modular_scaled(u: &NodeField, p: &ExponentField, inv_lambda: f64) -> f64 {
    let mesh = u.mesh();
    let vals = u.values();
    (0..mesh.n_cells())
        .map(|c| (mesh.cell_average(vals, c) * inv_lambda).abs().powf(p.p_cells()[c]) * mesh.measures()[c])
        .sum()
}

/// `inf { λ > 0 : modular(u/λ) <= 1 }`, by bisection.
pub fn luxemburg_norm(u: &NodeField, p: &ExponentField) -> Result<f64> {
    u.check_same_mesh(p.p())?;
    if modular_scaled(u, p, 1.0) == 0.0 {
        return Ok(0.0);
    }
    let at = |lambda: f64| modular_scaled(u, p, 1.0 / lambda);
    let mut hi = u.max_abs().max(f64::MIN_POSITIVE);
    while at(hi) >= 1.0 {
        hi *= 2.0;
    }
    let mut lo = f64::EPSILON;
    if at(lo) <= 1.0 {
        // Only possible for extremely small fields; shrink the bracket.
        while lo > f64::MIN_POSITIVE && at(lo) <= 1.0 {
            lo *= 0.5;
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let m = at(mid);
        if (m - 1.0).abs() <= 1e-12 || mid == lo || mid == hi {
            return Ok(mid);
        }
        if m > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Nodal `p*(x) = N p / (N - p)` where `p < N`, [`SOBOLEV_INFINITY`] otherwise.
pub fn sobolev_conjugate(p: &ExponentField, dim: usize) -> NodeField {
    let n = dim as f64;
    let values = p
        .p()
        .values()
        .iter()
        .map(|&px| if px < n { n * px / (n - px) } else { SOBOLEV_INFINITY })
        .collect();
    NodeField::new(p.mesh(), values).expect("finite sentinel values")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSummary {
    pub p_minus: f64,
    pub p_plus: f64,
    pub r: f64,
}

impl From<&ExponentField> for ExponentSummary {
    fn from(e: &ExponentField) -> Self {
        ExponentSummary { p_minus: e.p_minus, p_plus: e.p_plus, r: e.r }
    }
}
