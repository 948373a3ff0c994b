//! First Dirichlet eigenpair of the isotropic `r`-Laplacian by
//! minimising the discrete Rayleigh quotient
//! `R(u) = Σ |∇u|^r |c| / Σ |u_q|^r |c|`.
//!
//! Steps are preconditioned by the stiffness matrix weighted with
//! `|∇u|^{r-2}`; for `r = 2` a unit step is exactly inverse iteration.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::linalg::BandedSpd;
use super::{assemble_metric, bump_profile, dot, max_abs};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodeField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    /// Stop when the max-norm of `∇R` falls below this.
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { grad_tol: 1e-11, max_iters: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenReport {
    pub lambda: f64,
    /// Nonnegative, normalised to `Σ φ_q^r |c| = 1`.
    pub phi: NodeField,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

struct Quotient {
    num: f64,
    den: f64,
}

impl Quotient {
    fn value(&self) -> f64 {
        self.num / self.den
    }
}

fn quotient(mesh: &Mesh, u: &[f64], r: f64) -> Quotient {
    let (mut num, mut den) = (0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let g = mesh.cell_gradient(u, c);
        let meas = mesh.measures()[c];
        num += (g[0] * g[0] + g[1] * g[1]).sqrt().powf(r) * meas;
        den += mesh.cell_average(u, c).abs().powf(r) * meas;
    }
    Quotient { num, den }
}

/// `∇R` with boundary entries zero.
fn quotient_gradient(mesh: &Mesh, u: &[f64], r: f64, out: &mut [f64]) -> Quotient {
    out.iter_mut().for_each(|x| *x = 0.0);
    let q = quotient(mesh, u, r);
    let lambda = q.value();
    let qw = mesh.quad_weight();
    for c in 0..mesh.n_cells() {
        let g = mesh.cell_gradient(u, c);
        let meas = mesh.measures()[c];
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let flux = if norm > 0.0 { r * norm.powf(r - 2.0) } else { 0.0 };
        let uq = mesh.cell_average(u, c);
        let mass = if uq != 0.0 { r * uq.abs().powf(r - 2.0) * uq } else { 0.0 };
        for (a, &k) in mesh.cell(c).iter().enumerate() {
            let b = mesh.basis_grads(c)[a];
            out[k] += (flux * (g[0] * b[0] + g[1] * b[1]) - lambda * mass * qw) * meas;
        }
    }
    for (k, x) in out.iter_mut().enumerate() {
        if mesh.is_boundary(k) {
            *x = 0.0;
        } else {
            *x /= q.den;
        }
    }
    q
}

fn normalise(mesh: &Mesh, u: &mut [f64], r: f64) {
    let den = quotient(mesh, u, r).den;
    let s = den.powf(-1.0 / r);
    u.iter_mut().for_each(|x| *x = (*x * s).abs());
}

/// First eigenpair of `-Δ_r` with zero Dirichlet data on `mesh`.
pub fn first_eigenpair(mesh: &Arc<Mesh>, r: f64, opts: &EigenOptions) -> Result<EigenReport> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("eigenproblem needs 1 < r < ∞, got {r}")));
    }
    let n = mesh.n_nodes();
    let interior = mesh.interior_nodes();
    let mut u = bump_profile(mesh).into_values();
    normalise(mesh, &mut u, r);
    let mut g = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut rhs = vec![0.0; interior.len()];
    let mut mat = BandedSpd::zeros(interior.len(), mesh.interior_half_bandwidth());

    let mut q = quotient_gradient(mesh, &u, r, &mut g);
    let mut iterations = 0;
    let mut stalled = 0;
    loop {
        let grad_norm = max_abs(&g);
        if grad_norm <= opts.grad_tol || stalled >= 3 || iterations >= opts.max_iters {
            let converged = grad_norm <= opts.grad_tol || stalled >= 3;
            return Ok(EigenReport { lambda: q.value(), phi: NodeField::new(mesh, u)?, iterations, converged, grad_norm });
        }
        let grad_scale = grad_norm.max(f64::MIN_POSITIVE);
        let floor = 1e-8 * mesh.nodes().len() as f64 * grad_scale;
        mat.clear();
        assemble_metric(mesh, &u, &mut mat, |_, xi| {
            let s = floor * floor + xi[0] * xi[0] + xi[1] * xi[1];
            (r * (r - 1.0) * s.powf(0.5 * (r - 2.0)) / q.den, [1.0, 1.0])
        });
        for (i, &k) in interior.iter().enumerate() {
            rhs[i] = -g[k];
        }
        d.iter_mut().for_each(|x| *x = 0.0);
        if mat.factor().is_ok() {
            mat.solve(&mut rhs);
            for (i, &k) in interior.iter().enumerate() {
                d[k] = rhs[i];
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) || d.iter().any(|x| !x.is_finite()) {
            for k in 0..n {
                d[k] = -g[k];
            }
            slope = -dot(&g, &g);
        }
        let lambda = q.value();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for k in 0..n {
                trial[k] = u[k] + t * d[k];
            }
            let v = quotient(mesh, &trial, r).value();
            if v.is_finite() && v <= lambda + 1e-4 * t * slope {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            stalled = 3;
            continue;
        }
        std::mem::swap(&mut u, &mut trial);
        normalise(mesh, &mut u, r);
        iterations += 1;
        q = quotient_gradient(mesh, &u, r, &mut g);
        if (lambda - q.value()).abs() <= 4.0 * f64::EPSILON * lambda {
            stalled += 1;
        } else {
            stalled = 0;
        }
    }
}

/// Richardson extrapolation of `coarse`, `fine` computed at step ratio
/// `ratio` with error order `order`.
pub fn richardson(coarse: f64, fine: f64, ratio: f64, order: f64) -> f64 {
    let k = ratio.powf(order);
    (k * fine - coarse) / (k - 1.0)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn discrete_lambda(n: usize, len: f64) -> f64 {
        let h = len / n as f64;
        let theta = PI * h / len;
        4.0 / (h * h) * (theta / 2.0).tan().powi(2)
    }

    #[test]
    fn linear_eigenvalue_matches_discrete_formula() {
        for n in [16, 64] {
            let m = Mesh::interval(0.0, 1.0, n).unwrap();
            let rep = first_eigenpair(&m, 2.0, &EigenOptions::default()).unwrap();
            assert!(rep.converged);
            assert!((rep.lambda - discrete_lambda(n, 1.0)).abs() < 1e-9 * rep.lambda, "{}", rep.lambda);
            assert!(rep.phi.min() >= 0.0);
        }
    }

    #[test]
    fn nonlinear_eigenvalue_scales_with_length() {
        let r = 3.0;
        let a = first_eigenpair(&Mesh::interval(0.0, 1.0, 64).unwrap(), r, &EigenOptions::default()).unwrap();
        let b = first_eigenpair(&Mesh::interval(0.0, 2.0, 64).unwrap(), r, &EigenOptions::default()).unwrap();
        assert!(a.converged && b.converged);
        // λ scales like L^{-r}, exactly on uniform meshes with equal cell counts.
        assert!((b.lambda / a.lambda - 0.5f64.powf(r)).abs() < 1e-8);
    }

    #[test]
    fn richardson_removes_leading_term() {
        let f = |h: f64| 2.0 + 3.0 * h * h;
        assert!((richardson(f(0.1), f(0.05), 2.0, 2.0) - 2.0).abs() < 1e-12);
    }
}
