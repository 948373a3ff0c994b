//! Checks of ray convexity, the Díaz–Saa gap and weak comparison on
//! discrete instances.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anisotropy::AnisotropyModel;
use crate::energy::{phi_line, phi_prime, EnergyModel, LineFunctional, ReactionTerm};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodeField};

/// Default admissibility cap on `sup w₁/w₂` and `sup w₂/w₁`.
pub const DEFAULT_RATIO_CAP: f64 = 1e6;

/// Relative threshold below which a slack or gap counts as zero.
pub const EQUALITY_TOL: f64 = 1e-10;

/// Relative spread of `v₂/v₁` below which a pair counts as proportional.
pub const PROPORTIONAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualityClass {
    Distinct,
    Proportional,
    Identical,
}

/// Classification of the nodal ratio `v₂/v₁` over nodes where both are
/// positive.
pub fn equality_class(v1: &NodeField, v2: &NodeField) -> Result<EqualityClass> {
    v1.check_same_mesh(v2)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&a, &b) in v1.values().iter().zip(v2.values()) {
        if a > 0.0 && b > 0.0 {
            let q = b / a;
            lo = lo.min(q);
            hi = hi.max(q);
        } else if a != b {
            return Ok(EqualityClass::Distinct);
        }
    }
    if !lo.is_finite() {
        return Ok(EqualityClass::Identical);
    }
    if hi - lo > PROPORTIONAL_TOL * hi {
        Ok(EqualityClass::Distinct)
    } else if (hi - 1.0).abs() <= PROPORTIONAL_TOL && (lo - 1.0).abs() <= PROPORTIONAL_TOL {
        Ok(EqualityClass::Identical)
    } else {
        Ok(EqualityClass::Proportional)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub thetas: Vec<f64>,
    /// `(1-θ)Φ(0) + θΦ(1) - Φ(θ)` per θ.
    pub slacks: Vec<f64>,
    pub min_slack: f64,
    /// `max(|Φ(0)|, |Φ(1)|)`, or 1 when both vanish.
    pub scale: f64,
    /// All slacks below `1e-10 · scale`.
    pub equality: bool,
    pub equality_class: EqualityClass,
    pub p_equiv_r: bool,
    /// No negative slack beyond rounding, and equality only on rays.
    pub consistent: bool,
}

impl ConvexityReport {
    pub fn relative_min_slack(&self) -> f64 {
        self.min_slack / self.scale
    }
}

/// Chord slacks of `Φ(θ) = functional((1-θ)v₁ + θv₂)` on `thetas`.
pub fn check_ray_convexity(
    v1: &NodeField,
    v2: &NodeField,
    functional: LineFunctional,
    model: &EnergyModel,
    thetas: &[f64],
) -> Result<ConvexityReport> {
    if thetas.is_empty() {
        return Err(Error::InvalidParameter("θ grid is empty".into()));
    }
    let phi0 = phi_line(v1, v2, 0.0, functional, model)?;
    let phi1 = phi_line(v1, v2, 1.0, functional, model)?;
    let mut slacks = Vec::with_capacity(thetas.len());
    for &t in thetas {
        slacks.push(phi0 + t * (phi1 - phi0) - phi_line(v1, v2, t, functional, model)?);
    }
    let min_slack = slacks.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = match phi0.abs().max(phi1.abs()) {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let equality = slacks.iter().all(|s| s.abs() <= EQUALITY_TOL * scale);
    let class = equality_class(v1, v2)?;
    let consistent = min_slack >= -EQUALITY_TOL * scale && (!equality || class != EqualityClass::Distinct);
    Ok(ConvexityReport {
        thetas: thetas.to_vec(),
        slacks,
        min_slack,
        scale,
        equality,
        equality_class: class,
        p_equiv_r: model.exponent().is_identically_r(),
        consistent,
    })
}

/// `((Φ(θ₁) + Φ(θ₂))/2 - Φ((θ₁+θ₂)/2), scale)` with scale as in
/// [`ConvexityReport`].
pub fn midpoint_slack(
    v1: &NodeField,
    v2: &NodeField,
    theta1: f64,
    theta2: f64,
    functional: LineFunctional,
    model: &EnergyModel,
) -> Result<(f64, f64)> {
    let a = phi_line(v1, v2, theta1, functional, model)?;
    let b = phi_line(v1, v2, theta2, functional, model)?;
    let mid = phi_line(v1, v2, 0.5 * (theta1 + theta2), functional, model)?;
    let scale = match a.abs().max(b.abs()) {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    Ok((0.5 * (a + b) - mid, scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBound {
    pub sup12: f64,
    pub sup21: f64,
    pub cap: f64,
    pub admissible: bool,
}

/// `max u₁/u₂` and `max u₂/u₁` over interior nodes.
pub fn ratio_bound(u1: &NodeField, u2: &NodeField, cap: f64) -> Result<RatioBound> {
    u1.check_same_mesh(u2)?;
    let mesh = u1.mesh();
    let mut sup12: f64 = 0.0;
    let mut sup21: f64 = 0.0;
    for &k in mesh.interior_nodes() {
        let (a, b) = (u1.values()[k], u2.values()[k]);
        for x in [a, b] {
            if x <= 0.0 {
                return Err(Error::OutsideCone { node: k, value: x });
            }
        }
        sup12 = sup12.max(a / b);
        sup21 = sup21.max(b / a);
    }
    Ok(RatioBound { sup12, sup21, cap, admissible: sup12 <= cap && sup21 <= cap })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `Φ'(1) - Φ'(0)` along the segment from `w₁^r` to `w₂^r`.
    pub gap: f64,
    /// `∫ a(∇w₁)·∇(w₁ - w₂^r/w₁^{r-1})`.
    pub i1: f64,
    /// `∫ a(∇w₂)·∇(w₁^r/w₂^{r-1} - w₂)`.
    pub i2: f64,
    /// `|i1| + |i2| + 1`.
    pub scale: f64,
    pub equality_class: EqualityClass,
    pub ratio_sup: f64,
    pub inv_ratio_sup: f64,
    pub p_equiv_r: bool,
    /// Whether a vanishing gap comes with the equality case predicted for
    /// the exponent configuration.
    pub equality_consistent: bool,
}

impl GapReport {
    pub fn relative_gap(&self) -> f64 {
        self.gap / self.scale
    }
}

/// Díaz–Saa gap of two fields positive inside and zero on the boundary,
/// computed with the model's anisotropic integrand.
pub fn diaz_saa_gap(w1: &NodeField, w2: &NodeField, model: &EnergyModel, cap: f64) -> Result<GapReport> {
    w1.check_same_mesh(w2)?;
    let mesh = w1.mesh();
    for w in [w1, w2] {
        if let Some(k) = (0..mesh.n_nodes()).find(|&k| mesh.is_boundary(k) && w.values()[k] != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "boundary value {} at node {k}; the gap needs zero boundary data",
                w.values()[k]
            )));
        }
    }
    let ratio = ratio_bound(w1, w2, cap)?;
    if !ratio.admissible {
        return Err(Error::Inadmissible { ratio: ratio.sup12.max(ratio.sup21), cap });
    }
    let r = model.exponent().r();
    let v1 = w1.map(|x| x.powf(r))?;
    let v2 = w2.map(|x| x.powf(r))?;
    let d0 = phi_prime(&v1, &v2, 0.0, LineFunctional::WA, model)?;
    let d1 = phi_prime(&v1, &v2, 1.0, LineFunctional::WA, model)?;
    let (i1, i2) = (-d0, -d1);
    let gap = d1 - d0;
    let scale = i1.abs() + i2.abs() + 1.0;
    let class = equality_class(w1, w2)?;
    let p_equiv_r = model.exponent().is_identically_r();
    let vanishing = gap.abs() <= EQUALITY_TOL * scale;
    let equality_consistent = if !vanishing {
        true
    } else if p_equiv_r {
        class != EqualityClass::Distinct
    } else {
        class == EqualityClass::Identical
    };
    Ok(GapReport {
        gap,
        i1,
        i2,
        scale,
        equality_class: class,
        ratio_sup: ratio.sup12,
        inv_ratio_sup: ratio.sup21,
        p_equiv_r,
        equality_consistent,
    })
}

/// Energy model for `-div a(x, ∇u) = f(x) u^{r-1}`.
pub fn bvp_model(anisotropy: &AnisotropyModel, f: &NodeField) -> Result<EnergyModel> {
    let r = anisotropy.exponent().r();
    let reaction = if r == 1.0 {
        ReactionTerm::source(f.clone())?
    } else {
        ReactionTerm::power(f.clone(), NodeField::constant(f.mesh(), r))?
    };
    EnergyModel::new(anisotropy.clone()).with_reaction(reaction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonMode {
    /// `u₁, u₂` are (numerical) solutions; only their order is checked.
    Solutions,
    /// Also require `u₁` to be a subsolution for `f₁` and `u₂` a
    /// supersolution for `f₂`, via the signs of the nodal residuals.
    SubSuper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    /// `max (u₁ - u₂)` over nodes.
    pub max_excess: f64,
    pub hypothesis_ok: bool,
    pub conclusion_ok: bool,
    pub f_ordered: bool,
    pub positive: bool,
    pub ratios_admissible: bool,
    /// Fraction of quadrature points with `p > r`; the theorem needs it > 0.
    pub fraction_p_above_r: f64,
    /// `max R(u₁)` for the `f₁` problem (subsolution needs `<= tol`).
    pub sub_residual_max: Option<f64>,
    /// `min R(u₂)` for the `f₂` problem (supersolution needs `>= -tol`).
    pub super_residual_min: Option<f64>,
    pub notes: Vec<String>,
}

/// Weak comparison for `-div a(x, ∇uᵢ) = fᵢ(x) uᵢ^{r-1}`. Hypothesis
/// violations are reported, never thrown.
pub fn comparison_check(
    u1: &NodeField,
    u2: &NodeField,
    f1: &NodeField,
    f2: &NodeField,
    anisotropy: &AnisotropyModel,
    tol: f64,
    mode: ComparisonMode,
) -> Result<ComparisonVerdict> {
    for f in [u2, f1, f2] {
        u1.check_same_mesh(f)?;
    }
    let mesh = u1.mesh();
    let mut notes = vec![];
    let max_excess = u1.values().iter().zip(u2.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);

    let f_ordered = f1.values().iter().zip(f2.values()).all(|(a, b)| a <= b) && f1.min() >= 0.0;
    if !f_ordered {
        notes.push("f1 <= f2 with f1 >= 0 fails".into());
    }
    let positive = mesh.interior_nodes().iter().all(|&k| u1.values()[k] > 0.0 && u2.values()[k] > 0.0)
        && u1.min() >= 0.0
        && u2.min() >= 0.0;
    if !positive {
        notes.push("u1, u2 not positive in the interior".into());
    }
    let ratios_admissible = positive && ratio_bound(u1, u2, DEFAULT_RATIO_CAP).map(|r| r.admissible).unwrap_or(false);
    if positive && !ratios_admissible {
        notes.push("ratio bound exceeds the admissibility cap".into());
    }
    let fraction = anisotropy.exponent().fraction_p_above_r();
    if fraction <= 0.0 {
        notes.push("p ≡ r: comparison is not asserted by the theorem".into());
    }
    let mut hypothesis_ok = f_ordered && positive && ratios_admissible && fraction > 0.0;

    let (mut sub, mut sup) = (None, None);
    if mode == ComparisonMode::SubSuper && f_ordered {
        let m1 = bvp_model(anisotropy, f1)?;
        let m2 = bvp_model(anisotropy, f2)?;
        let mut g = vec![0.0; u1.len()];
        m1.gradient_values(u1.values(), 0.0, &mut g);
        let s = mesh.interior_nodes().iter().map(|&k| g[k]).fold(f64::NEG_INFINITY, f64::max);
        m2.gradient_values(u2.values(), 0.0, &mut g);
        let t = mesh.interior_nodes().iter().map(|&k| g[k]).fold(f64::INFINITY, f64::min);
        if s > tol {
            notes.push(format!("u1 is not a subsolution (residual {s:e})"));
            hypothesis_ok = false;
        }
        if t < -tol {
            notes.push(format!("u2 is not a supersolution (residual {t:e})"));
            hypothesis_ok = false;
        }
        sub = Some(s);
        sup = Some(t);
    }
    Ok(ComparisonVerdict {
        max_excess,
        hypothesis_ok,
        conclusion_ok: max_excess <= tol,
        f_ordered,
        positive,
        ratios_admissible,
        fraction_p_above_r: fraction,
        sub_residual_max: sub,
        super_residual_min: sup,
        notes,
    })
}

/// Random field positive inside and zero on the boundary,
/// `amp · s(x) · exp(Σⱼ cⱼ cos(jπx) + dⱼ cos(jπy))` with `s` the product
/// bump; ratios of two such fields stay bounded.
pub fn sample_positive_field(mesh: &Arc<Mesh>, rng: &mut impl Rng) -> NodeField {
    let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.6..0.6)).collect();
    let d: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.6..0.6)).collect();
    let amp = rng.gen_range(0.2..3.0);
    let dim = mesh.dim();
    NodeField::from_fn(mesh, |x| {
        let mut e = 0.0;
        for j in 0..4 {
            let k = (j + 1) as f64 * std::f64::consts::PI;
            e += c[j] * (k * x[0]).cos();
            if dim == 2 {
                e += d[j] * (k * x[1]).cos();
            }
        }
        let s = if dim == 1 { x[0] * (1.0 - x[0]) } else { x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]) };
        amp * s * e.exp()
    })
    .expect("sampled field is finite")
}

/// `0.05, 0.10, …, 0.95`.
pub fn default_theta_grid() -> Vec<f64> {
    (1..20).map(|i| i as f64 / 20.0).collect()
}
