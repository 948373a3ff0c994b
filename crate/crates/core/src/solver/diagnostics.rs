//! Post-solve diagnostics and multi-start experiments.

use serde::{Deserialize, Serialize};

use super::{minimize_energy, solve, InitKind, SolveReport, SolverOptions};
use crate::anisotropy::AnisotropyModel;
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::inequality::{bvp_model, comparison_check, diaz_saa_gap, ComparisonMode, ComparisonVerdict, DEFAULT_RATIO_CAP};
use crate::mesh::NodeField;
use crate::problems::{sharpness_regime, ProblemSpec, Regime, RegimeTag};

/// Smallest one-sided inward slope `u(x_in) / dist` over boundary nodes;
/// a positive value is the discrete form of a negative outer normal derivative.
pub fn hopf_diagnostic(u: &NodeField) -> f64 {
    let mesh = u.mesh();
    (0..mesh.n_nodes())
        .filter_map(|k| mesh.inward_neighbor(k).map(|(j, d)| (u.values()[j] - u.values()[k]) / d))
        .fold(f64::INFINITY, f64::min)
}

/// `|M(D(u)) - Σ f(u_q) u_q |c| / Σ A(∇u) |c||`: testing the Kirchhoff
/// equation with `u` itself gives `M(D(u)) ∫A(∇u) = ∫f(u)u`.
pub fn kirchhoff_consistency(model: &EnergyModel, u: &NodeField) -> Option<f64> {
    let k = model.kirchhoff()?;
    let reaction = model.reaction()?;
    let mesh = model.mesh();
    let vals = u.values();
    let (mut num, mut den) = (0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let meas = mesh.measures()[c];
        let uq = mesh.cell_average(vals, c);
        num += reaction.f_cell(c, uq) * uq * meas;
        den += model.anisotropy().cell_local(c).a_value(mesh.cell_gradient(vals, c)) * meas;
    }
    if den <= 0.0 {
        return None;
    }
    let d = model.dirichlet_values(vals, 0.0);
    Some((k.m(d) - num / den).abs())
}

/// Max-norm of the discrete weak residual of `u` for the spec's problem.
pub fn weak_residual(u: &NodeField, spec: &ProblemSpec) -> Result<f64> {
    let model = spec.energy_model()?;
    if !u.mesh().same_as(model.mesh()) {
        return Err(Error::MeshMismatch);
    }
    Ok(model.residual_max(u.values()))
}

#[derive(Debug, Clone)]
pub struct UniquenessReport {
    /// The bump start followed by the random starts.
    pub runs: Vec<SolveReport>,
    pub max_distance: f64,
    /// Gap of each random run against the bump run, where admissible.
    pub pair_gaps: Vec<Option<f64>>,
    pub regime: Regime,
    /// Several solutions are expected in this regime.
    pub expected_multiplicity: bool,
    /// Some run did not converge.
    pub inconclusive: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessSummary {
    pub max_distance: f64,
    pub min_pair_gap: Option<f64>,
    pub expected_multiplicity: bool,
    pub inconclusive: bool,
    pub passed: bool,
}

impl UniquenessReport {
    pub fn summary(&self) -> UniquenessSummary {
        UniquenessSummary {
            max_distance: self.max_distance,
            min_pair_gap: self.pair_gaps.iter().flatten().copied().reduce(f64::min),
            expected_multiplicity: self.expected_multiplicity,
            inconclusive: self.inconclusive,
            passed: self.passed,
        }
    }
}

/// Solves from the bump start and `n_inits` random starts (seeds
/// `seed, seed + 1, …`) and compares the results in max-norm.
pub fn uniqueness_experiment(
    spec: &ProblemSpec,
    opts: &SolverOptions,
    n_inits: usize,
    seed: u64,
    tol: f64,
    exec: Exec,
) -> Result<UniquenessReport> {
    let mut inits = vec![InitKind::Bump];
    inits.extend((0..n_inits as u64).map(|i| InitKind::Random { seed: seed.wrapping_add(i) }));
    let runs = exec
        .map(&inits, |init| solve(spec, &SolverOptions { init: init.clone(), ..opts.clone() }))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut max_distance: f64 = 0.0;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            max_distance = max_distance.max(runs[i].solution.max_distance(&runs[j].solution)?);
        }
    }
    let model = spec.energy_model()?;
    let pair_gaps = runs[1..]
        .iter()
        .map(|run| diaz_saa_gap(&runs[0].solution, &run.solution, &model, DEFAULT_RATIO_CAP).ok().map(|g| g.gap))
        .collect();
    let regime = sharpness_regime(spec);
    let inconclusive = runs.iter().any(|r| !r.converged);
    Ok(UniquenessReport {
        passed: !inconclusive && max_distance <= tol,
        runs,
        max_distance,
        pair_gaps,
        expected_multiplicity: regime.tag == RegimeTag::DegenerateEigen,
        regime,
        inconclusive,
    })
}

/// Solves `-div a(x, ∇uᵢ) = fᵢ uᵢ^{r-1}` for both data and checks `u₁ <= u₂`.
pub fn weak_comparison_experiment(
    anisotropy: &AnisotropyModel,
    f1: &NodeField,
    f2: &NodeField,
    opts: &SolverOptions,
    tol: f64,
) -> Result<ComparisonVerdict> {
    let mut sols = vec![];
    for f in [f1, f2] {
        let rep = minimize_energy(&bvp_model(anisotropy, f)?, opts)?;
        if !rep.converged {
            return Err(Error::NonConvergence(format!(
                "comparison solve stopped with residual {:e}",
                rep.residual_max
            )));
        }
        sols.push(rep.solution);
    }
    comparison_check(&sols[0], &sols[1], f1, f2, anisotropy, tol, ComparisonMode::Solutions)
}
