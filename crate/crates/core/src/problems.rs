//! Problem specifications for the three Dirichlet problems and the
//! closed-form hypothesis validators for the built-in power kinds.

use serde::{Deserialize, Serialize};

use crate::anisotropy::AnisotropyModel;
use crate::energy::{AbsorptionTerm, EnergyModel, KirchhoffTerm, ReactionKind, ReactionTerm};
use crate::error::{Error, Result};
use crate::exponent::{sobolev_conjugate, ExponentField, SOBOLEV_INFINITY};
use crate::mesh::NodeField;
use crate::report::{Status, ValidationReport};

/// Threshold for "positive measure" when counting quadrature points.
const FRACTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `-Δ_{p(x)} u = f(x, u)`.
    Problem1,
    /// `-Δ_{p(x)} u + g(x, u) = f(x, u)`.
    Problem2,
    /// `-M(D(u)) Δ_{p(x)} u = f(x, u)`.
    Kirchhoff,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub anisotropy: AnisotropyModel,
    pub reaction: ReactionTerm,
    pub absorption: Option<AbsorptionTerm>,
    pub kirchhoff: Option<KirchhoffTerm>,
    /// Solve even when the validators fail (e.g. to probe a sharpness regime).
    pub override_validation: bool,
}

impl ProblemSpec {
    pub fn problem1(anisotropy: AnisotropyModel, reaction: ReactionTerm) -> Self {
        ProblemSpec {
            kind: ProblemKind::Problem1,
            anisotropy,
            reaction,
            absorption: None,
            kirchhoff: None,
            override_validation: false,
        }
    }

    pub fn problem2(anisotropy: AnisotropyModel, reaction: ReactionTerm, absorption: AbsorptionTerm) -> Self {
        ProblemSpec {
            kind: ProblemKind::Problem2,
            anisotropy,
            reaction,
            absorption: Some(absorption),
            kirchhoff: None,
            override_validation: false,
        }
    }

    pub fn kirchhoff(anisotropy: AnisotropyModel, reaction: ReactionTerm, kirchhoff: KirchhoffTerm) -> Self {
        ProblemSpec {
            kind: ProblemKind::Kirchhoff,
            anisotropy,
            reaction,
            absorption: None,
            kirchhoff: Some(kirchhoff),
            override_validation: false,
        }
    }

    pub fn with_override(mut self, on: bool) -> Self {
        self.override_validation = on;
        self
    }

    pub fn exponent(&self) -> &ExponentField {
        self.anisotropy.exponent()
    }

    /// Checks that the terms required by `kind` are present.
    pub fn check_complete(&self) -> Result<()> {
        match self.kind {
            ProblemKind::Problem2 if self.absorption.is_none() => Err(Error::MissingTerm("absorption")),
            ProblemKind::Kirchhoff if self.kirchhoff.is_none() => Err(Error::MissingTerm("kirchhoff")),
            _ => Ok(()),
        }
    }

    pub fn energy_model(&self) -> Result<EnergyModel> {
        self.check_complete()?;
        let mut model = EnergyModel::new(self.anisotropy.clone()).with_reaction(self.reaction.clone())?;
        if let (ProblemKind::Problem2, Some(a)) = (self.kind, &self.absorption) {
            model = model.with_absorption(a.clone())?;
        }
        if let (ProblemKind::Kirchhoff, Some(k)) = (self.kind, self.kirchhoff) {
            model = model.with_kirchhoff(k);
        }
        Ok(model)
    }

    /// All validators relevant to `kind`, on default grids.
    pub fn validate(&self) -> Result<ValidationReport> {
        self.check_complete()?;
        let r = self.exponent().r();
        let mut report = validate_f(&self.reaction, r, &default_s_grid());
        if let (ProblemKind::Problem2, Some(a)) = (self.kind, &self.absorption) {
            report.extend(validate_g(a, r, self.exponent(), self.exponent().mesh().dim(), &default_s_grid()));
        }
        if let (ProblemKind::Kirchhoff, Some(k)) = (self.kind, &self.kirchhoff) {
            report.extend(validate_m(k, &default_t_grid()));
        }
        Ok(report)
    }
}

/// 200 log-spaced points in `[1e-6, 100]`.
pub fn default_s_grid() -> Vec<f64> {
    log_grid(1e-6, 100.0, 200)
}

/// 0, 0.5, …, 100.
pub fn default_t_grid() -> Vec<f64> {
    (0..=200).map(|i| 0.5 * i as f64).collect()
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

fn first_node(values: &[f64], bad: impl Fn(f64) -> bool) -> Option<(usize, f64)> {
    values.iter().enumerate().find(|(_, v)| bad(**v)).map(|(k, v)| (k, *v))
}

/// Hypotheses on the reaction `f(x, s) = h(x) s^{q(x)-1}`.
pub fn validate_f(term: &ReactionTerm, r: f64, s_grid: &[f64]) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let h = term.h().values();
    let q = term.q().values();

    // (f1): nonnegative on the grid and vanishing at s = 0.
    let negative = (0..h.len()).find(|&k| s_grid.iter().any(|&s| term.f_at_node(k, s) < 0.0));
    let nonzero_at_0 = first_node(q, |v| v <= 1.0).filter(|&(k, _)| h[k] > 0.0);
    match (negative, nonzero_at_0) {
        (Some(k), _) => rep.push("f1", Status::Fail, None, format!("f < 0 at node {k}")),
        (None, Some((k, _))) if term.kind() == ReactionKind::Source => {
            rep.push("f1", Status::Fail, Some(h[k]), format!("source term: f(x, 0) = h = {} at node {k}", h[k]))
        }
        (None, Some((k, _))) => rep.push("f1", Status::Fail, Some(h[k]), format!("q = 1 gives f(x, 0+) = h at node {k}")),
        (None, None) => rep.push("f1", Status::Pass, None, "h >= 0 and q > 1 nodewise"),
    }

    // (f2): s ↦ h s^{q-r} strictly decreasing iff q < r and h > 0.
    match first_node(q, |v| v >= r).or_else(|| first_node(h, |v| v <= 0.0)) {
        Some((k, _)) => rep.push(
            "f2",
            Status::Fail,
            Some(q[k]),
            format!("f/s^(r-1) = h s^(q-r) not strictly decreasing at node {k} (q = {}, h = {}, r = {r})", q[k], h[k]),
        ),
        None => rep.push("f2", Status::Pass, Some(term.q().max()), format!("q_+ = {} < r = {r}", term.q().max())),
    }

    // (f3): h s^{q-r} → ∞ at 0 and → 0 at ∞ uniformly iff q_+ < r and h_- > 0.
    let q_plus = term.q().max();
    let h_minus = term.h().min();
    if q_plus < r && h_minus > 0.0 {
        rep.push("f3", Status::Pass, Some(q_plus), format!("q_+ = {q_plus} < r and h_- = {h_minus} > 0"));
    } else {
        rep.push("f3", Status::Fail, Some(q_plus), format!("q_+ = {q_plus}, h_- = {h_minus}, r = {r}"));
    }
    rep
}

/// Hypotheses on the absorption `g(x, s) = ℓ(x) s^{Q(x)-1}` with growth
/// exponent `m ≡ Q`.
pub fn validate_g(
    term: &AbsorptionTerm,
    r: f64,
    p: &ExponentField,
    dim: usize,
    s_grid: &[f64],
) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let ell = term.ell().values();
    let big_q = term.big_q().values();

    // (g1): g(x, 0) = 0 and g > 0 for s > 0.
    let positive = (0..ell.len()).all(|k| s_grid.iter().all(|&s| term.g_at_node(k, s) > 0.0));
    match first_node(big_q, |v| v <= 1.0) {
        Some((k, v)) => rep.push("g1", Status::Fail, Some(v), format!("Q = {v} gives g(x, 0+) = ℓ at node {k}")),
        None if !positive => rep.push("g1", Status::Fail, None, "g not positive on the s grid"),
        None => rep.push("g1", Status::Pass, None, "ℓ > 0 and Q > 1 nodewise"),
    }

    // (g2): s ↦ ℓ s^{Q-r} nondecreasing iff Q >= r.
    match first_node(big_q, |v| v < r) {
        Some((k, v)) => rep.push("g2", Status::Fail, Some(v), format!("Q = {v} < r = {r} at node {k}")),
        None => rep.push("g2", Status::Pass, Some(term.big_q().min()), format!("Q_- = {} >= r", term.big_q().min())),
    }
    // Bound g <= C₀ s^{r-1} on [0, s₀] with s₀ = 1.
    let c0 = term.ell().max();
    rep.push("g_bound_c0", Status::Pass, Some(c0), "C0 = sup g(x, 1) for s0 = 1");

    // (g3): 1 < m(x) < p*(x) with m ≡ Q.
    let p_star = sobolev_conjugate(p, dim);
    let bad = (0..big_q.len()).find(|&k| !(big_q[k] > 1.0 && big_q[k] < p_star.values()[k]));
    match bad {
        Some(k) => {
            let ps = p_star.values()[k];
            let shown = if ps == SOBOLEV_INFINITY { "inf".to_string() } else { ps.to_string() };
            rep.push("g3", Status::Fail, Some(big_q[k]), format!("m = Q = {} not in (1, p* = {shown}) at node {k}", big_q[k]))
        }
        None => rep.push("g3", Status::Pass, Some(term.big_q().max()), "1 < Q < p* nodewise"),
    }
    // Growth constant of the limsup in (g3): g/s^{Q-1} = ℓ.
    rep.push("g_growth_c", Status::Pass, Some(c0), "limsup g / s^(m-1) = sup ℓ");
    rep
}

/// Hypotheses on the saturating Kirchhoff coefficient.
pub fn validate_m(term: &KirchhoffTerm, t_grid: &[f64]) -> ValidationReport {
    let mut rep = ValidationReport::default();
    rep.push("M1", Status::from_bool(term.m0 > 0.0), Some(term.m0), format!("M(0) = {}", term.m0));
    rep.push(
        "M2",
        Status::from_bool(term.m_inf >= term.m0),
        Some(term.m_inf - term.m0),
        format!("m_inf - m0 = {}", term.m_inf - term.m0),
    );
    rep.push("M3", Status::from_bool(term.m_inf.is_finite()), Some(term.m_inf), format!("M(+inf) = {}", term.m_inf));
    let worst = t_grid
        .iter()
        .filter(|&&t| t >= 0.0)
        .map(|&t| {
            let v = term.m_hat_unchecked(t);
            let tol = 1e-12 * (1.0 + t.abs() * term.m_inf.abs().max(term.m0.abs()));
            (term.m0 * t - v - tol).max(v - term.m_inf * t - tol)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    rep.push(
        "M_hat_bounds",
        Status::from_bool(worst <= 0.0),
        Some(worst),
        "M(0) t <= M̂(t) <= M(+inf) t on the t grid",
    );
    rep
}

/// `1 <= q₋ <= q₊ < r < p₋ <= p₊` and `r <= Q₋`.
pub fn validate_corollary_chain(q: &NodeField, big_q: &NodeField, r: f64, p: &ExponentField) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let (q_minus, q_plus) = (q.min(), q.max());
    let (p_minus, big_q_minus) = (p.p_minus(), big_q.min());
    rep.push("q_minus >= 1", Status::from_bool(q_minus >= 1.0), Some(q_minus), format!("q_- = {q_minus}"));
    rep.push("q_plus < r", Status::from_bool(q_plus < r), Some(q_plus), format!("q_+ = {q_plus}, r = {r}"));
    rep.push("r < p_minus", Status::from_bool(r < p_minus), Some(p_minus), format!("r = {r}, p_- = {p_minus}"));
    rep.push(
        "r <= Q_minus",
        Status::from_bool(r <= big_q_minus),
        Some(big_q_minus),
        format!("r = {r}, Q_- = {big_q_minus}"),
    );
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeTag {
    /// `q₊ < r <= p₋`: uniqueness from strict subhomogeneity.
    UniqueFull,
    /// `q <= r = p₋` with `p > r` on a set of positive measure.
    UniquePartialC,
    /// `p ≡ r` constant with `q < r` on a set of positive measure.
    UniquePartialD,
    /// `q ≡ r ≡ p` constant: the eigenvalue problem.
    DegenerateEigen,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    /// Fraction of quadrature points with `p > r`.
    pub fraction_p_above_r: f64,
    /// Fraction of quadrature points with `q < r`.
    pub fraction_q_below_r: f64,
}

/// Classifies a power-reaction instance into the uniqueness regimes.
pub fn sharpness_regime(spec: &ProblemSpec) -> Regime {
    let e = spec.exponent();
    let r = e.r();
    let mesh = e.mesh();
    let q_cells = mesh.to_cells(spec.reaction.q().values());
    let n = q_cells.len() as f64;
    let frac_p = e.fraction_p_above_r();
    let frac_q = q_cells.iter().filter(|&&q| r - q > FRACTION_TOL).count() as f64 / n;
    let (q_minus, q_plus) = (spec.reaction.q().min(), spec.reaction.q().max());
    let p_const = e.p_minus() == e.p_plus();
    let q_const = q_minus == q_plus;

    let tag = if p_const && q_const && e.p_minus() == r && q_minus == r {
        RegimeTag::DegenerateEigen
    } else if r == e.p_minus() && q_plus <= r && frac_p > 0.0 {
        RegimeTag::UniquePartialC
    } else if p_const && e.p_minus() == r && q_plus <= r && frac_q > 0.0 {
        RegimeTag::UniquePartialD
    } else if q_plus < r && r <= e.p_minus() {
        RegimeTag::UniqueFull
    } else {
        RegimeTag::Unclassified
    };
    Regime { tag, fraction_p_above_r: frac_p, fraction_q_below_r: frac_q }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::mesh::Mesh;

    fn mesh() -> Arc<Mesh> {
        Mesh::interval(0.0, 1.0, 16).unwrap()
    }

    fn field(m: &Arc<Mesh>, f: impl Fn(f64) -> f64) -> NodeField {
        NodeField::from_fn(m, |x| f(x[0])).unwrap()
    }

    fn reaction(m: &Arc<Mesh>, h: f64, q: impl Fn(f64) -> f64) -> ReactionTerm {
        ReactionTerm::power(NodeField::constant(m, h), field(m, q)).unwrap()
    }

    #[test]
    fn validate_f_examples() {
        let m = mesh();
        let s = default_s_grid();
        assert!(validate_f(&reaction(&m, 1.0, |_| 1.5), 2.0, &s).passed());
        let rep = validate_f(&reaction(&m, 1.0, |_| 2.0), 2.0, &s);
        assert_eq!(rep.status_of("f2"), Some(Status::Fail));
        let rep = validate_f(&reaction(&m, 1.0, |x| 1.2 + 0.5 * x), 1.6, &s);
        assert!(!rep.passed());
        assert_eq!(rep.status_of("f3"), Some(Status::Fail));
    }

    #[test]
    fn validate_g_examples() {
        let m = mesh();
        let s = default_s_grid();
        let p2 = ExponentField::constant(&m, 2.0, 2.0).unwrap();
        let ok = AbsorptionTerm::power(NodeField::constant(&m, 1.0), NodeField::constant(&m, 2.0)).unwrap();
        assert!(validate_g(&ok, 2.0, &p2, 1, &s).passed());
        let low = AbsorptionTerm::power(NodeField::constant(&m, 1.0), field(&m, |x| 1.5 + x)).unwrap();
        assert_eq!(validate_g(&low, 2.0, &p2, 1, &s).status_of("g2"), Some(Status::Fail));
        let m2 = Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap();
        let p15 = ExponentField::constant(&m2, 1.5, 1.2).unwrap();
        let high = AbsorptionTerm::power(NodeField::constant(&m2, 1.0), NodeField::constant(&m2, 7.0)).unwrap();
        let rep = validate_g(&high, 1.2, &p15, 2, &s);
        assert_eq!(rep.status_of("g3"), Some(Status::Fail));
        assert_eq!(rep.status_of("g2"), Some(Status::Pass));
    }

    #[test]
    fn validate_m_examples() {
        let t = default_t_grid();
        assert!(validate_m(&KirchhoffTerm::saturating(1.0, 2.0).unwrap(), &t).passed());
        let rep = validate_m(&KirchhoffTerm::saturating(0.0, 2.0).unwrap(), &t);
        assert_eq!(rep.status_of("M1"), Some(Status::Fail));
        let rep = validate_m(&KirchhoffTerm::saturating(2.0, 1.0).unwrap(), &t);
        assert_eq!(rep.status_of("M2"), Some(Status::Fail));
        assert_eq!(rep.status_of("M_hat_bounds"), Some(Status::Fail));
    }

    #[test]
    fn corollary_chain_examples() {
        let m = mesh();
        let c = |v: f64| NodeField::constant(&m, v);
        let p2 = ExponentField::constant(&m, 2.0, 1.8).unwrap();
        assert!(validate_corollary_chain(&c(1.5), &c(2.0), 1.8, &p2).passed());
        let rep = validate_corollary_chain(&c(1.5), &c(2.0), 2.0, &p2);
        assert_eq!(rep.status_of("r < p_minus"), Some(Status::Fail));
        let rep = validate_corollary_chain(&c(1.5), &c(1.5), 1.8, &p2);
        assert_eq!(rep.status_of("r <= Q_minus"), Some(Status::Fail));
    }

    fn spec(m: &Arc<Mesh>, p: impl Fn(f64) -> f64, r: f64, q: f64) -> ProblemSpec {
        let e = ExponentField::new(field(m, p), r).unwrap();
        ProblemSpec::problem1(AnisotropyModel::isotropic(e), reaction(m, 1.0, move |_| q))
    }

    #[test]
    fn regime_examples() {
        let m = mesh();
        let c = sharpness_regime(&spec(&m, |x| 2.0 + x, 2.0, 1.5));
        assert_eq!(c.tag, RegimeTag::UniquePartialC);
        assert!(c.fraction_p_above_r > 0.9);
        assert_eq!(sharpness_regime(&spec(&m, |_| 2.0, 2.0, 2.0)).tag, RegimeTag::DegenerateEigen);
        assert_eq!(sharpness_regime(&spec(&m, |_| 2.0, 1.5, 1.2)).tag, RegimeTag::UniqueFull);
        let e = ExponentField::constant(&m, 2.0, 2.0).unwrap();
        let d = ProblemSpec::problem1(AnisotropyModel::isotropic(e), reaction(&m, 1.0, |x| 2.0 - x));
        assert_eq!(sharpness_regime(&d).tag, RegimeTag::UniquePartialD);
        assert_eq!(sharpness_regime(&spec(&m, |_| 2.0, 1.5, 1.8)).tag, RegimeTag::Unclassified);
    }

    #[test]
    fn incomplete_specs_are_rejected() {
        let m = mesh();
        let mut s = spec(&m, |_| 2.0, 1.5, 1.2);
        s.kind = ProblemKind::Problem2;
        assert!(matches!(s.energy_model(), Err(Error::MissingTerm("absorption"))));
        s.kind = ProblemKind::Kirchhoff;
        assert!(matches!(s.validate(), Err(Error::MissingTerm("kirchhoff"))));
    }

    proptest! {
        #[test]
        fn validator_outcomes_ignore_coefficient_amplitudes(
            h in prop::collection::vec(0.01f64..50.0, 17),
            ell in prop::collection::vec(0.01f64..50.0, 17),
            q in 1.05f64..3.0, big_q in 1.05f64..4.0, r in 1.1f64..2.5,
        ) {
            let m = mesh();
            let s = default_s_grid();
            let p = ExponentField::constant(&m, 2.5, r).unwrap();
            let qf = NodeField::constant(&m, q);
            let big_qf = NodeField::constant(&m, big_q);
            let unit_f = ReactionTerm::power(NodeField::constant(&m, 1.0), qf.clone()).unwrap();
            let rand_f = ReactionTerm::power(NodeField::new(&m, h).unwrap(), qf.clone()).unwrap();
            let unit_g = AbsorptionTerm::power(NodeField::constant(&m, 1.0), big_qf.clone()).unwrap();
            let rand_g = AbsorptionTerm::power(NodeField::new(&m, ell).unwrap(), big_qf.clone()).unwrap();
            let statuses = |r: &ValidationReport| r.entries.iter().map(|e| e.status).collect::<Vec<_>>();
            prop_assert_eq!(statuses(&validate_f(&unit_f, r, &s)), statuses(&validate_f(&rand_f, r, &s)));
            prop_assert_eq!(statuses(&validate_g(&unit_g, r, &p, 1, &s)), statuses(&validate_g(&rand_g, r, &p, 1, &s)));
            if validate_corollary_chain(&qf, &big_qf, r, &p).passed() {
                prop_assert!(validate_f(&rand_f, r, &s).passed());
                prop_assert!(validate_g(&rand_g, r, &p, 1, &s).passed());
            }
        }
    }
}
