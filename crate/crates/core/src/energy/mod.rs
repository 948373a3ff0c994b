//! Discrete energies and their derivatives.
//!
//! All functionals are finite sums over cells with one quadrature point
//! per cell. Gradients are piecewise constant, nodal data entering a
//! potential is averaged to the quadrature point.
//!
//! * `W(v) = Σ (r/p) |∇(v^{1/r})|^p |c|` and its anisotropic version `W_A`;
//!   the root is taken at the nodes before differencing.
//! * `D(u) = Σ (1/p) A(∇u) |c|`, and the energy
//!   `M̂(D(u)) - ∫F(x, u) + ∫G(x, u)` which covers `E` (no `M`, no `G`),
//!   `Ê` (with `G`) and `J` (with `M`).

pub mod terms;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use terms::{AbsorptionTerm, KirchhoffTerm, ReactionKind, ReactionTerm};

use crate::anisotropy::{AnisotropyModel, Local};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::mesh::{Mesh, NodeField};

/// Functionals that can be restricted to a segment of the positive cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineFunctional {
    /// `W` with the isotropic integrand, whatever the model's anisotropy.
    W,
    /// `W_A` with the model's integrand.
    WA,
    /// `Ĵ(v) = J(v^{1/r})`, the model's energy composed with the root.
    JHat,
}

/// Which functional an [`EnergyModel`] realises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    /// Gradient part only.
    Dirichlet,
    E,
    EHat,
    J,
}

/// The pieces of `M̂(D) - ∫F + ∫G`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyParts {
    pub dirichlet: f64,
    pub reaction: f64,
    pub absorption: f64,
    pub total: f64,
}

impl EnergyParts {
    /// Size of the summands, the natural scale for rounding errors in `total`.
    pub fn magnitude(&self) -> f64 {
        self.dirichlet.abs() + self.reaction.abs() + self.absorption.abs()
    }
}

#[derive(Debug, Clone)]
pub struct EnergyModel {
    anisotropy: AnisotropyModel,
    reaction: Option<ReactionTerm>,
    absorption: Option<AbsorptionTerm>,
    kirchhoff: Option<KirchhoffTerm>,
    eps: f64,
}

impl EnergyModel {
    pub fn new(anisotropy: AnisotropyModel) -> Self {
        EnergyModel { anisotropy, reaction: None, absorption: None, kirchhoff: None, eps: 0.0 }
    }

    pub fn with_reaction(mut self, reaction: ReactionTerm) -> Result<Self> {
        reaction.h().check_same_mesh(self.exponent().p())?;
        self.reaction = Some(reaction);
        Ok(self)
    }

    pub fn with_absorption(mut self, absorption: AbsorptionTerm) -> Result<Self> {
        absorption.ell().check_same_mesh(self.exponent().p())?;
        self.absorption = Some(absorption);
        Ok(self)
    }

    pub fn with_kirchhoff(mut self, kirchhoff: KirchhoffTerm) -> Self {
        self.kirchhoff = Some(kirchhoff);
        self
    }

    /// Regularisation `ε >= 0` of the gradient terms.
    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("regularisation ε = {eps}")));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.anisotropy.exponent().mesh()
    }

    pub fn exponent(&self) -> &ExponentField {
        self.anisotropy.exponent()
    }

    pub fn anisotropy(&self) -> &AnisotropyModel {
        &self.anisotropy
    }

    pub fn reaction(&self) -> Option<&ReactionTerm> {
        self.reaction.as_ref()
    }

    pub fn absorption(&self) -> Option<&AbsorptionTerm> {
        self.absorption.as_ref()
    }

    pub fn kirchhoff(&self) -> Option<&KirchhoffTerm> {
        self.kirchhoff.as_ref()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn kind(&self) -> EnergyKind {
        match (&self.reaction, &self.absorption, &self.kirchhoff) {
            (None, _, _) => EnergyKind::Dirichlet,
            (Some(_), _, Some(_)) => EnergyKind::J,
            (Some(_), Some(_), None) => EnergyKind::EHat,
            (Some(_), None, None) => EnergyKind::E,
        }
    }

    /// `M(D)`, or 1 without a Kirchhoff term.
    #[inline]
    pub fn prefactor(&self, dirichlet: f64) -> f64 {
        self.kirchhoff.map_or(1.0, |k| k.m(dirichlet))
    }

    fn m_hat(&self, dirichlet: f64) -> f64 {
        match &self.kirchhoff {
            Some(k) => k.m_hat_unchecked(dirichlet.max(0.0)),
            None => dirichlet,
        }
    }

    /// `D_ε(u) = Σ (1/p) A_ε(∇u) |c|`.
    pub fn dirichlet_values(&self, u: &[f64], eps: f64) -> f64 {
        let mesh = self.mesh();
        let mut d = 0.0;
        for c in 0..mesh.n_cells() {
            let loc = self.anisotropy.cell_local(c);
            let xi = mesh.cell_gradient(u, c);
            d += loc.a_value_eps(xi, eps) / loc.p * mesh.measures()[c];
        }
        d
    }

    /// Energy pieces at nodal values `u` with regularisation `eps`.
    pub fn parts_values(&self, u: &[f64], eps: f64) -> EnergyParts {
        let mesh = self.mesh();
        let mut d = 0.0;
        let mut f = 0.0;
        let mut g = 0.0;
        for c in 0..mesh.n_cells() {
            let loc = self.anisotropy.cell_local(c);
            let meas = mesh.measures()[c];
            let xi = mesh.cell_gradient(u, c);
            d += loc.a_value_eps(xi, eps) / loc.p * meas;
            if self.reaction.is_some() || self.absorption.is_some() {
                let uq = mesh.cell_average(u, c);
                if let Some(r) = &self.reaction {
                    f += r.potential_cell(c, uq) * meas;
                }
                if let Some(a) = &self.absorption {
                    g += a.potential_cell(c, uq) * meas;
                }
            }
        }
        let total = self.m_hat(d) - f + g;
        EnergyParts { dirichlet: d, reaction: f, absorption: g, total }
    }

    /// Gradient of the discrete energy with respect to the nodal values,
    /// with Dirichlet (boundary) entries set to zero. Returns the energy
    /// pieces at `u` as a by-product.
    pub fn gradient_values(&self, u: &[f64], eps: f64, out: &mut [f64]) -> EnergyParts {
        let mesh = self.mesh();
        out.iter_mut().for_each(|x| *x = 0.0);
        let pref = if self.kirchhoff.is_some() { self.prefactor(self.dirichlet_values(u, eps)) } else { 1.0 };
        let qw = mesh.quad_weight();
        let mut d = 0.0;
        let mut f = 0.0;
        let mut g = 0.0;
        for c in 0..mesh.n_cells() {
            let loc = self.anisotropy.cell_local(c);
            let meas = mesh.measures()[c];
            let xi = mesh.cell_gradient(u, c);
            d += loc.a_value_eps(xi, eps) / loc.p * meas;
            let flux = loc.flux_eps(xi, eps);
            let verts = mesh.cell(c);
            let grads = mesh.basis_grads(c);
            for (&k, bg) in verts.iter().zip(grads) {
                out[k] += pref * (flux[0] * bg[0] + flux[1] * bg[1]) * meas;
            }
            if self.reaction.is_some() || self.absorption.is_some() {
                let uq = mesh.cell_average(u, c);
                let mut nodal = 0.0;
                if let Some(r) = &self.reaction {
                    f += r.potential_cell(c, uq) * meas;
                    nodal -= r.f_cell(c, uq) * qw * meas;
                }
                if let Some(a) = &self.absorption {
                    g += a.potential_cell(c, uq) * meas;
                    nodal += a.g_cell(c, uq) * qw * meas;
                }
                for &k in verts {
                    out[k] += nodal;
                }
            }
        }
        for (k, x) in out.iter_mut().enumerate() {
            if mesh.is_boundary(k) {
                *x = 0.0;
            }
        }
        let total = self.m_hat(d) - f + g;
        EnergyParts { dirichlet: d, reaction: f, absorption: g, total }
    }

    /// Directional derivative of the energy at `u` along `dir`, split as
    /// `M(D) · Σ a_ε(∇u)·∇dir |c| - Σ f(u_q) dir_q |c| + Σ g(u_q) dir_q |c|`.
    /// Boundary entries of `dir` are not discarded.
    pub fn directional_values(&self, u: &[f64], dir: &[f64], eps: f64) -> f64 {
        let mesh = self.mesh();
        let pref = self.prefactor(if self.kirchhoff.is_some() { self.dirichlet_values(u, eps) } else { 0.0 });
        let mut flux_part = 0.0;
        let mut react = 0.0;
        let mut absorb = 0.0;
        for c in 0..mesh.n_cells() {
            let loc = self.anisotropy.cell_local(c);
            let meas = mesh.measures()[c];
            let flux = loc.flux_eps(mesh.cell_gradient(u, c), eps);
            let dg = mesh.cell_gradient(dir, c);
            flux_part += (flux[0] * dg[0] + flux[1] * dg[1]) * meas;
            if self.reaction.is_some() || self.absorption.is_some() {
                let uq = mesh.cell_average(u, c);
                let dq = mesh.cell_average(dir, c);
                if let Some(r) = &self.reaction {
                    react += r.f_cell(c, uq) * dq * meas;
                }
                if let Some(a) = &self.absorption {
                    absorb += a.g_cell(c, uq) * dq * meas;
                }
            }
        }
        pref * flux_part - react + absorb
    }

    fn check_field(&self, u: &NodeField) -> Result<()> {
        if !u.mesh().same_as(self.mesh()) {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    /// `M̂(D(u)) - ∫F + ∫G` at the model's `ε`.
    pub fn energy(&self, u: &NodeField) -> Result<f64> {
        self.check_field(u)?;
        Ok(self.parts_values(u.values(), self.eps).total)
    }

    pub fn parts(&self, u: &NodeField) -> Result<EnergyParts> {
        self.check_field(u)?;
        Ok(self.parts_values(u.values(), self.eps))
    }

    /// Nodal gradient whose pairing with a test field `φ` vanishing on the
    /// boundary is the directional derivative of [`EnergyModel::energy`].
    pub fn gateaux_gradient(&self, u: &NodeField) -> Result<NodeField> {
        self.check_field(u)?;
        let mut out = vec![0.0; u.len()];
        self.gradient_values(u.values(), self.eps, &mut out);
        NodeField::new(self.mesh(), out)
    }

    /// Max-norm of the gradient at `ε = 0`.
    pub fn residual_max(&self, u: &[f64]) -> f64 {
        let mut out = vec![0.0; u.len()];
        self.gradient_values(u, 0.0, &mut out);
        out.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn local_for(&self, functional: LineFunctional, c: usize) -> Local {
        let loc = *self.anisotropy.cell_local(c);
        match functional {
            LineFunctional::W => Local::isotropic(loc.p, loc.r, loc.dim),
            _ => loc,
        }
    }
}

/// Nodal `v^{1/r}` after checking that `v` lies in the discrete cone:
/// positive at interior nodes, nonnegative at boundary nodes.
pub fn cone_root(v: &NodeField, r: f64) -> Result<Vec<f64>> {
    let mesh = v.mesh();
    for (k, &x) in v.values().iter().enumerate() {
        let bad = if mesh.is_boundary(k) { x < 0.0 } else { x <= 0.0 };
        if bad || !x.is_finite() {
            return Err(Error::OutsideCone { node: k, value: x });
        }
    }
    Ok(if r == 1.0 { v.values().to_vec() } else { v.values().iter().map(|x| x.powf(1.0 / r)).collect() })
}

fn w_sum(model: &EnergyModel, functional: LineFunctional, w: &[f64]) -> f64 {
    let mesh = model.mesh();
    let mut total = 0.0;
    for c in 0..mesh.n_cells() {
        let loc = model.local_for(functional, c);
        let xi = mesh.cell_gradient(w, c);
        total += loc.r / loc.p * loc.a_value(xi) * mesh.measures()[c];
    }
    total
}

/// `W(v)` with the isotropic integrand.
pub fn w_functional(v: &NodeField, model: &EnergyModel) -> Result<f64> {
    model.check_field(v)?;
    let w = cone_root(v, model.exponent().r())?;
    Ok(w_sum(model, LineFunctional::W, &w))
}

/// `W_A(v)` with the model's anisotropic integrand.
pub fn w_a_functional(v: &NodeField, model: &EnergyModel) -> Result<f64> {
    model.check_field(v)?;
    let w = cone_root(v, model.exponent().r())?;
    Ok(w_sum(model, LineFunctional::WA, &w))
}

fn require_reaction(model: &EnergyModel) -> Result<&ReactionTerm> {
    model.reaction().ok_or(Error::MissingTerm("reaction"))
}

/// `E(u) = D(u) - ∫F(x, u)`.
pub fn energy_e(u: &NodeField, model: &EnergyModel) -> Result<f64> {
    require_reaction(model)?;
    let p = model.parts(u)?;
    Ok(p.dirichlet - p.reaction)
}

/// `Ê(u) = E(u) + ∫G(x, u)`.
pub fn energy_e_hat(u: &NodeField, model: &EnergyModel) -> Result<f64> {
    require_reaction(model)?;
    if model.absorption().is_none() {
        return Err(Error::MissingTerm("absorption"));
    }
    let p = model.parts(u)?;
    Ok(p.dirichlet - p.reaction + p.absorption)
}

/// `J(u) = M̂(D(u)) - ∫F(x, u)`.
pub fn energy_j(u: &NodeField, model: &EnergyModel) -> Result<f64> {
    require_reaction(model)?;
    let k = model.kirchhoff().ok_or(Error::MissingTerm("kirchhoff"))?;
    let p = model.parts(u)?;
    Ok(k.m_hat_unchecked(p.dirichlet.max(0.0)) - p.reaction)
}

fn combination(v1: &NodeField, v2: &NodeField, theta: f64) -> Result<NodeField> {
    v1.check_same_mesh(v2)?;
    if !theta.is_finite() {
        return Err(Error::InvalidParameter(format!("θ = {theta}")));
    }
    // v₁ + θ(v₂ - v₁) reproduces v₁ exactly when v₂ = v₁.
    v1.zip_map(v2, |a, b| a + theta * (b - a))
}

/// `Φ(θ) = functional((1-θ) v₁ + θ v₂)`.
pub fn phi_line(
    v1: &NodeField,
    v2: &NodeField,
    theta: f64,
    functional: LineFunctional,
    model: &EnergyModel,
) -> Result<f64> {
    model.check_field(v1)?;
    let v = combination(v1, v2, theta)?;
    let w = cone_root(&v, model.exponent().r())?;
    Ok(match functional {
        LineFunctional::W | LineFunctional::WA => w_sum(model, functional, &w),
        LineFunctional::JHat => model.parts_values(&w, model.eps()).total,
    })
}

/// Nodal `(v₂ - v₁) / v^{1-1/r}`, the θ-derivative of `r·v^{1/r}`.
pub fn line_quotient(v1: &NodeField, v2: &NodeField, v: &NodeField, r: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(v.len());
    for (k, ((&a, &b), &x)) in v1.values().iter().zip(v2.values()).zip(v.values()).enumerate() {
        let diff = b - a;
        let q = if x > 0.0 || r == 1.0 {
            diff / x.powf(1.0 - 1.0 / r)
        } else if diff == 0.0 {
            0.0
        } else {
            return Err(Error::OutsideCone { node: k, value: x });
        };
        out.push(q);
    }
    Ok(out)
}

/// `Φ'(θ)` from the integral formula. For `W` and `W_A` this is
/// `Σ a(∇w)·∇((v₂-v₁)/v^{1-1/r}) |c|` with `w = v^{1/r}`; for `Ĵ` it is
/// `(1/r)[M(D(w)) Σ a(∇w)·∇quot |c| - Σ f(w_q) quot_q |c| (+ Σ g(w_q) quot_q |c|)]`.
pub fn phi_prime(
    v1: &NodeField,
    v2: &NodeField,
    theta: f64,
    functional: LineFunctional,
    model: &EnergyModel,
) -> Result<f64> {
    model.check_field(v1)?;
    let r = model.exponent().r();
    let v = combination(v1, v2, theta)?;
    let w = cone_root(&v, r)?;
    let quot = line_quotient(v1, v2, &v, r)?;
    let mesh = model.mesh();
    Ok(match functional {
        LineFunctional::W | LineFunctional::WA => {
            let mut total = 0.0;
            for c in 0..mesh.n_cells() {
                let loc = model.local_for(functional, c);
                let flux = loc.flux(mesh.cell_gradient(&w, c));
                let dq = mesh.cell_gradient(&quot, c);
                total += (flux[0] * dq[0] + flux[1] * dq[1]) * mesh.measures()[c];
            }
            total
        }
        LineFunctional::JHat => model.directional_values(&w, &quot, model.eps()) / r,
    })
}

/// Half-width `δ` of the θ-interval `(-δ, 1+δ)` on which the segment
/// through `v₁, v₂` stays in the cone: `0.5 min min(v₁,v₂)/|v₂-v₁|`,
/// capped at 0.25. Nodes where `v₁ = v₂` do not constrain `δ`.
pub fn line_delta(v1: &NodeField, v2: &NodeField) -> Result<f64> {
    v1.check_same_mesh(v2)?;
    let mut delta: f64 = 0.25;
    for (&a, &b) in v1.values().iter().zip(v2.values()) {
        let diff = (b - a).abs();
        if diff > 0.0 {
            delta = delta.min(0.5 * a.min(b) / diff);
        }
    }
    Ok(delta.max(0.0))
}
