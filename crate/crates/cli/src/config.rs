//! Run configuration: a JSON document whose coefficient fields are scalar
//! expressions in `x` and `y`, sampled on the mesh when the run is built.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use pxlap::energy::{AbsorptionTerm, KirchhoffTerm, ReactionTerm};
use pxlap::problems::{ProblemKind, ProblemSpec};
use pxlap::{AnisotropyModel, ExponentField, Mesh, NodeField, ScalarExpr, SolverOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub exponent: ExponentConfig,
    pub anisotropy: AnisotropyConfig,
    pub problem: ProblemConfig,
    pub solver: SolverOptions,
    pub check: CheckConfig,
    pub eig: EigConfig,
    pub sweep: Option<SweepConfig>,
    pub seed: Option<u64>,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval { a: f64, b: f64, n: usize },
    Rectangle { ax: f64, bx: f64, ay: f64, by: f64, nx: usize, ny: usize },
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig::Interval { a: 0.0, b: 1.0, n: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentConfig {
    /// Expression for `p(x)`.
    pub p: String,
    pub r: f64,
    /// Exponent of the empirical Hölder quotient reported by `validate`.
    pub holder_alpha: f64,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        ExponentConfig { p: "2".into(), r: 2.0, holder_alpha: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnisotropyConfig {
    #[default]
    Isotropic,
    /// One weight expression per axis.
    Weighted { weights: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionConfig {
    Power { h: String, q: String },
    Source { h: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionConfig {
    pub ell: String,
    pub big_q: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KirchhoffConfig {
    pub m0: f64,
    pub m_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub reaction: ReactionConfig,
    pub absorption: Option<AbsorptionConfig>,
    pub kirchhoff: Option<KirchhoffConfig>,
    pub override_validation: bool,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            kind: ProblemKind::Problem1,
            reaction: ReactionConfig::Power { h: "1".into(), q: "1.5".into() },
            absorption: None,
            kirchhoff: None,
            override_validation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Random pairs per property suite.
    pub samples: usize,
    /// Samples for the structural checks on the anisotropy.
    pub structure_samples: usize,
    /// Relative tolerance for slacks and gaps.
    pub rel_tol: f64,
    /// Max-norm tolerance for ordering and multi-start agreement.
    pub tol: f64,
    /// Data of the comparison check, `f₁ <= f₂`.
    pub f1: String,
    pub f2: String,
    /// Random comparison pairs `f₂ = f₁ + bump` in addition to `f1`, `f2`.
    pub random_pairs: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            samples: 200,
            structure_samples: 400,
            rel_tol: 1e-10,
            tol: 1e-6,
            f1: "1".into(),
            f2: "2".into(),
            random_pairs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigConfig {
    pub r: f64,
    /// Number of meshes `n, 2n, 4n, …` with `n` from the domain block.
    pub levels: usize,
}

impl Default for EigConfig {
    fn default() -> Self {
        EigConfig { r: 2.0, levels: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Multiplies the reaction coefficient `h`.
    HScale,
    /// Multiplies the absorption coefficient `ℓ`.
    EllScale,
    /// Sets the saturation value `M(∞)` of the Kirchhoff term.
    MInf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn mesh(&self) -> Result<Arc<Mesh>> {
        Ok(match self.domain {
            DomainConfig::Interval { a, b, n } => Mesh::interval(a, b, n)?,
            DomainConfig::Rectangle { ax, bx, ay, by, nx, ny } => Mesh::rectangle(ax, bx, ay, by, nx, ny)?,
        })
    }

    pub fn exponent(&self, mesh: &Arc<Mesh>) -> Result<ExponentField> {
        Ok(ExponentField::new(sample(mesh, &self.exponent.p, "exponent.p")?, self.exponent.r)?)
    }

    pub fn anisotropy(&self, mesh: &Arc<Mesh>) -> Result<AnisotropyModel> {
        let e = self.exponent(mesh)?;
        Ok(match &self.anisotropy {
            AnisotropyConfig::Isotropic => AnisotropyModel::isotropic(e),
            AnisotropyConfig::Weighted { weights } => {
                let fields = weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| sample(mesh, w, &format!("anisotropy.weights[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                AnisotropyModel::weighted(e, fields)?
            }
        })
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        let mesh = self.mesh()?;
        let anisotropy = self.anisotropy(&mesh)?;
        let p = &self.problem;
        let reaction = match &p.reaction {
            ReactionConfig::Power { h, q } => {
                ReactionTerm::power(sample(&mesh, h, "problem.reaction.h")?, sample(&mesh, q, "problem.reaction.q")?)?
            }
            ReactionConfig::Source { h } => ReactionTerm::source(sample(&mesh, h, "problem.reaction.h")?)?,
        };
        let spec = match p.kind {
            ProblemKind::Problem1 => ProblemSpec::problem1(anisotropy, reaction),
            ProblemKind::Problem2 => {
                let Some(a) = &p.absorption else { bail!("problem2 needs an absorption block") };
                let term = AbsorptionTerm::power(
                    sample(&mesh, &a.ell, "problem.absorption.ell")?,
                    sample(&mesh, &a.big_q, "problem.absorption.big_q")?,
                )?;
                ProblemSpec::problem2(anisotropy, reaction, term)
            }
            ProblemKind::Kirchhoff => {
                let Some(k) = p.kirchhoff else { bail!("kirchhoff needs a kirchhoff block") };
                ProblemSpec::kirchhoff(anisotropy, reaction, KirchhoffTerm::saturating(k.m0, k.m_inf)?)
            }
        };
        Ok(spec.with_override(p.override_validation))
    }
}

pub fn sample(mesh: &Arc<Mesh>, source: &str, what: &str) -> Result<NodeField> {
    let expr = ScalarExpr::parse(source).with_context(|| format!("{what}: cannot parse {source:?}"))?;
    mesh.interpolate(&expr).with_context(|| format!("{what}: cannot evaluate {source:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        assert!(serde_json::from_str::<RunConfig>("{\"bogus\": 1}").is_err());
    }

    #[test]
    fn builds_weighted_rectangle() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"domain": {"kind": "rectangle", "ax": 0, "bx": 1, "ay": 0, "by": 2, "nx": 4, "ny": 8},
                "exponent": {"p": "2 + x*y", "r": 1.5},
                "anisotropy": {"kind": "weighted", "weights": ["1", "2 + sin(y)"]}}"#,
        )
        .unwrap();
        let spec = cfg.spec().unwrap();
        assert_eq!(spec.exponent().mesh().n_nodes(), 45);
        assert!((spec.exponent().p_plus() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn missing_blocks_are_config_errors() {
        let cfg: RunConfig = serde_json::from_str(r#"{"problem": {"kind": "problem2"}}"#).unwrap();
        assert!(cfg.spec().is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"exponent": {"p": "2 +"}}"#).unwrap();
        assert!(cfg.spec().is_err());
    }
}
