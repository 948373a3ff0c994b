//! Lower-order terms: power reactions `f = h s^{q-1}`, power absorptions
//! `g = ℓ s^{Q-1}` and the saturating Kirchhoff coefficient `M`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::NodeField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionKind {
    /// `f(x, s) = h(x) s^{q(x)-1}`.
    Power,
    /// `f(x, s) = h(x)` for `s >= 0`, the power kind with `q ≡ 1`.
    Source,
}

/// `s ↦ coef · s^{exp-1}` on `s >= 0`, zero for `s < 0`.
#[inline]
pub fn power_rate(coef: f64, exp: f64, s: f64) -> f64 {
    if s < 0.0 {
        0.0
    } else if exp == 1.0 {
        coef
    } else {
        coef * s.powf(exp - 1.0)
    }
}

/// Antiderivative of [`power_rate`] vanishing at 0: `coef · s^exp / exp`.
#[inline]
pub fn power_potential(coef: f64, exp: f64, s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if exp == 1.0 {
        coef * s
    } else {
        coef * s.powf(exp) / exp
    }
}

/// Derivative of [`power_rate`] in `s` (zero for `s <= 0`).
#[inline]
pub fn power_rate_slope(coef: f64, exp: f64, s: f64) -> f64 {
    if s <= 0.0 || exp == 1.0 {
        0.0
    } else {
        coef * (exp - 1.0) * s.powf(exp - 2.0)
    }
}

#[derive(Debug, Clone)]
pub struct ReactionTerm {
    kind: ReactionKind,
    h: NodeField,
    q: NodeField,
    h_cells: Vec<f64>,
    q_cells: Vec<f64>,
}

impl ReactionTerm {
    /// Requires `h >= 0` and `q >= 1` nodewise.
    pub fn power(h: NodeField, q: NodeField) -> Result<Self> {
        h.check_same_mesh(&q)?;
        check_nonnegative(&h, "h")?;
        if let Some((node, &value)) = q.values().iter().enumerate().find(|(_, v)| **v < 1.0) {
            return Err(Error::InvalidParameter(format!("reaction exponent q = {value} < 1 at node {node}")));
        }
        Ok(Self::build(ReactionKind::Power, h, q))
    }

    pub fn source(h: NodeField) -> Result<Self> {
        check_nonnegative(&h, "h")?;
        let q = NodeField::constant(h.mesh(), 1.0);
        Ok(Self::build(ReactionKind::Source, h, q))
    }

    fn build(kind: ReactionKind, h: NodeField, q: NodeField) -> Self {
        let mesh = h.mesh().clone();
        let h_cells = mesh.to_cells(h.values());
        let q_cells = mesh.to_cells(q.values());
        ReactionTerm { kind, h, q, h_cells, q_cells }
    }

    pub fn kind(&self) -> ReactionKind {
        self.kind
    }

    pub fn h(&self) -> &NodeField {
        &self.h
    }

    pub fn q(&self) -> &NodeField {
        &self.q
    }

    /// `f(x_k, s)` at node `k`.
    pub fn f_at_node(&self, k: usize, s: f64) -> f64 {
        power_rate(self.h.values()[k], self.q.values()[k], s)
    }

    /// `F(x_k, u)` at node `k`.
    pub fn potential_at_node(&self, k: usize, u: f64) -> f64 {
        power_potential(self.h.values()[k], self.q.values()[k], u)
    }

    #[inline]
    pub fn f_cell(&self, c: usize, s: f64) -> f64 {
        power_rate(self.h_cells[c], self.q_cells[c], s)
    }

    #[inline]
    pub fn potential_cell(&self, c: usize, u: f64) -> f64 {
        power_potential(self.h_cells[c], self.q_cells[c], u)
    }

    /// The same term with `h` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let h = self.h.scale(factor)?;
        match self.kind {
            ReactionKind::Power => Self::power(h, self.q.clone()),
            ReactionKind::Source => Self::source(h),
        }
    }
}

/// `F(x, u)` for a reaction of coefficient `h` and exponent `q`.
pub fn potential_f(h: f64, q: f64, u: f64) -> f64 {
    power_potential(h, q, u)
}

/// `G(x, u)` for an absorption of coefficient `ℓ` and exponent `Q`.
pub fn potential_g(ell: f64, big_q: f64, u: f64) -> f64 {
    power_potential(ell, big_q, u)
}

#[derive(Debug, Clone)]
pub struct AbsorptionTerm {
    ell: NodeField,
    big_q: NodeField,
    ell_cells: Vec<f64>,
    big_q_cells: Vec<f64>,
}

impl AbsorptionTerm {
    /// Requires `ℓ > 0` and `Q >= 1` nodewise; `Q >= r` is left to the
    /// validators.
    pub fn power(ell: NodeField, big_q: NodeField) -> Result<Self> {
        ell.check_same_mesh(&big_q)?;
        if let Some((node, &value)) = ell.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(Error::InvalidParameter(format!("absorption coefficient {value} <= 0 at node {node}")));
        }
        if let Some((node, &value)) = big_q.values().iter().enumerate().find(|(_, v)| **v < 1.0) {
            return Err(Error::InvalidParameter(format!("absorption exponent Q = {value} < 1 at node {node}")));
        }
        let mesh = ell.mesh().clone();
        let ell_cells = mesh.to_cells(ell.values());
        let big_q_cells = mesh.to_cells(big_q.values());
        Ok(AbsorptionTerm { ell, big_q, ell_cells, big_q_cells })
    }

    pub fn ell(&self) -> &NodeField {
        &self.ell
    }

    pub fn big_q(&self) -> &NodeField {
        &self.big_q
    }

    pub fn g_at_node(&self, k: usize, s: f64) -> f64 {
        power_rate(self.ell.values()[k], self.big_q.values()[k], s)
    }

    pub fn potential_at_node(&self, k: usize, u: f64) -> f64 {
        power_potential(self.ell.values()[k], self.big_q.values()[k], u)
    }

    #[inline]
    pub fn g_cell(&self, c: usize, s: f64) -> f64 {
        power_rate(self.ell_cells[c], self.big_q_cells[c], s)
    }

    #[inline]
    pub fn potential_cell(&self, c: usize, u: f64) -> f64 {
        power_potential(self.ell_cells[c], self.big_q_cells[c], u)
    }

    /// `∂g/∂s` at the quadrature point of cell `c`; finite only where `Q >= 2`
    /// or `s > 0`.
    #[inline]
    pub fn g_slope_cell(&self, c: usize, s: f64) -> f64 {
        power_rate_slope(self.ell_cells[c], self.big_q_cells[c], s)
    }

    pub fn big_q_cells(&self) -> &[f64] {
        &self.big_q_cells
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::power(self.ell.scale(factor)?, self.big_q.clone())
    }
}

/// Saturating Kirchhoff coefficient `M(s) = m_inf - (m_inf - m0)/(1 + s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KirchhoffTerm {
    pub m0: f64,
    pub m_inf: f64,
}

impl KirchhoffTerm {
    /// Any finite pair is accepted; whether it is admissible is decided by
    /// the validators.
    pub fn saturating(m0: f64, m_inf: f64) -> Result<Self> {
        if !(m0.is_finite() && m_inf.is_finite()) {
            return Err(Error::InvalidParameter(format!("Kirchhoff parameters m0 = {m0}, m_inf = {m_inf}")));
        }
        Ok(KirchhoffTerm { m0, m_inf })
    }

    /// `M ≡ 1`.
    pub fn unit() -> Self {
        KirchhoffTerm { m0: 1.0, m_inf: 1.0 }
    }

    #[inline]
    pub fn m(&self, s: f64) -> f64 {
        self.m_inf - (self.m_inf - self.m0) / (1.0 + s)
    }

    /// `M(+∞)`.
    pub fn m_limit(&self) -> f64 {
        self.m_inf
    }

    /// `M̂(t) = ∫₀ᵗ M = m_inf t - (m_inf - m0) ln(1 + t)`.
    pub fn m_hat(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::InvalidParameter(format!("M̂ needs t >= 0, got {t}")));
        }
        Ok(self.m_hat_unchecked(t))
    }

    #[inline]
    pub(crate) fn m_hat_unchecked(&self, t: f64) -> f64 {
        self.m_inf * t - (self.m_inf - self.m0) * t.ln_1p()
    }
}

fn check_nonnegative(f: &NodeField, name: &str) -> Result<()> {
    if let Some((node, &value)) = f.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::InvalidParameter(format!("{name} = {value} < 0 at node {node}")));
    }
    Ok(())
}
