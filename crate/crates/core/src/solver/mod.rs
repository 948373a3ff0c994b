//! Energy minimisation for the Dirichlet problems.
//!
//! Each stage minimises the `ε`-regularised energy by preconditioned
//! descent: the search direction solves `P d = -∇E` with `P` the stiffness
//! matrix weighted by the current diffusivity `M(D) (ε² + Q(∇u))^{(p-2)/2}`
//! (a Kačanov-type metric, plus the lumped absorption curvature), followed
//! by a backtracking line search. `ε` is decreased geometrically from
//! `eps0` to `eps_min`, then a last stage runs on the unregularised energy
//! so that the reported residual is the one the stopping test saw.

pub mod diagnostics;
pub mod eigen;
pub mod linalg;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use diagnostics::{
    hopf_diagnostic, kirchhoff_consistency, uniqueness_experiment, weak_comparison_experiment, weak_residual,
    UniquenessReport,
};
pub use eigen::{first_eigenpair, richardson, EigenOptions, EigenReport};

use crate::energy::{EnergyModel, EnergyParts};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodeField};
use crate::problems::{log_grid, sharpness_regime, ProblemKind, ProblemSpec, Regime};
use linalg::BandedSpd;

/// Starting point of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    /// Scaled bump `4(x-a)(b-x)/(b-a)²` (product form in 2D).
    Bump,
    /// Scaled `exp(ξ)` with `ξ` i.i.d. uniform on `[-1, 1]`, zero on the boundary.
    Random { seed: u64 },
    /// Nodal values used as given.
    Provided { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub eps0: f64,
    pub eps_min: f64,
    pub continuation: f64,
    /// Stationarity tolerance on the max-norm of the discrete gradient.
    pub grad_tol: f64,
    /// Iteration budget per stage.
    pub max_iters: usize,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo_c: f64,
    pub shrink: f64,
    pub init: InitKind,
    /// Replace `u` by `|u|` after each step when that does not raise the energy.
    pub abs_polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            eps0: 1e-2,
            eps_min: 1e-8,
            continuation: 0.1,
            grad_tol: 1e-9,
            max_iters: 5000,
            armijo_c: 1e-4,
            shrink: 0.5,
            init: InitKind::Bump,
            abs_polish: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.eps_min > 0.0 && self.eps_min <= self.eps0 && self.eps0.is_finite()) {
            return bad("need 0 < eps_min <= eps0");
        }
        if !(self.continuation > 0.0 && self.continuation < 1.0) {
            return bad("continuation factor must lie in (0, 1)");
        }
        if !(self.grad_tol > 0.0) || self.max_iters == 0 {
            return bad("grad_tol and max_iters must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 0.5 && self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("line search needs 0 < armijo_c < 0.5 and 0 < shrink < 1");
        }
        Ok(())
    }

    /// The regularisation ladder `eps0, eps0·c, …, eps_min`.
    pub fn eps_ladder(&self) -> Vec<f64> {
        let steps = ((self.eps_min / self.eps0).ln() / self.continuation.ln()).round().max(0.0) as usize;
        let mut out: Vec<f64> = (0..steps).map(|k| self.eps0 * self.continuation.powi(k as i32)).collect();
        out.push(self.eps_min);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Regularisation of the stage (0 for the final stage).
    pub eps: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub energy: f64,
    /// Accepted steps whose energy rose beyond the rounding band.
    pub monotone_violations: usize,
    /// Polishing steps skipped because `|u|` had higher energy.
    pub polish_rejections: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitRecord {
    /// Scale `t` applied to the profile.
    pub scale: f64,
    pub energy: f64,
    /// Some scale on the grid gave negative energy.
    pub negative_found: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: NodeField,
    pub energy: f64,
    pub parts: EnergyParts,
    /// Max-norm of the discrete gradient with the unregularised flux.
    pub residual_max: f64,
    pub stages: Vec<StageRecord>,
    pub converged: bool,
    /// `u > 0` at every interior node.
    pub positivity_ok: bool,
    pub hopf_margin: f64,
    pub kirchhoff_m0: Option<f64>,
    /// `|M(D(u)) - ∫f(u)u / ∫A(∇u)|`, the energy identity of the Kirchhoff problem.
    pub kirchhoff_consistency: Option<f64>,
    pub negative_energy: bool,
    pub init: InitRecord,
    pub regime: Option<Regime>,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }
}

/// `4(x-a)(b-x)/(b-a)²`, or its tensor product on a rectangle; max 1.
pub fn bump_profile(mesh: &Arc<Mesh>) -> NodeField {
    use crate::mesh::Domain;
    let b = |x: f64, lo: f64, hi: f64| 4.0 * (x - lo) * (hi - x) / ((hi - lo) * (hi - lo));
    let values = mesh
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, x)| {
            if mesh.is_boundary(k) {
                return 0.0;
            }
            match mesh.domain() {
                Domain::Interval { a, b: hi } => b(x[0], a, hi),
                Domain::Rectangle { ax, bx, ay, by } => b(x[0], ax, bx) * b(x[1], ay, by),
            }
        })
        .collect();
    NodeField::new(mesh, values).expect("bump values are finite")
}

fn random_profile(mesh: &Arc<Mesh>, seed: u64) -> NodeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..mesh.n_nodes())
        .map(|k| {
            let xi: f64 = rng.gen_range(-1.0..=1.0);
            if mesh.is_boundary(k) {
                0.0
            } else {
                xi.exp()
            }
        })
        .collect();
    NodeField::new(mesh, values).expect("random profile is finite")
}

/// Starting field for [`minimize_energy`]: a profile scaled by the `t` on a
/// log grid of `[1e-4, 10]` that minimises the unregularised energy.
pub fn initial_guess(model: &EnergyModel, opts: &SolverOptions) -> Result<(NodeField, InitRecord)> {
    let mesh = model.mesh();
    let profile = match &opts.init {
        InitKind::Provided { values } => {
            let u = NodeField::new(mesh, values.clone())?;
            let energy = model.parts_values(u.values(), 0.0).total;
            return Ok((u, InitRecord { scale: 1.0, energy, negative_found: energy < 0.0 }));
        }
        InitKind::Bump => bump_profile(mesh),
        InitKind::Random { seed } => random_profile(mesh, *seed),
    };
    if model.reaction().is_none() {
        let energy = model.parts_values(profile.values(), 0.0).total;
        return Ok((profile, InitRecord { scale: 1.0, energy, negative_found: false }));
    }
    let mut best = (f64::INFINITY, 1.0);
    for t in log_grid(1e-4, 10.0, 50) {
        let scaled: Vec<f64> = profile.values().iter().map(|v| t * v).collect();
        let e = model.parts_values(&scaled, 0.0).total;
        if e < best.0 {
            best = (e, t);
        }
    }
    let (energy, scale) = best;
    if !energy.is_finite() {
        return Err(Error::NonFinite("energy of the initial profile".into()));
    }
    Ok((profile.scale(scale)?, InitRecord { scale, energy, negative_found: energy < 0.0 }))
}

/// Adds `Σ_c κ_c (∇φ_a · W_c ∇φ_b) |c|` over interior pairs, where
/// `coef(c, ∇u_c)` returns the scalar `κ_c` and the diagonal weights `W_c`.
pub(crate) fn assemble_metric(
    mesh: &Mesh,
    u: &[f64],
    mat: &mut BandedSpd,
    coef: impl Fn(usize, [f64; 2]) -> (f64, [f64; 2]),
) {
    let dim = mesh.dim();
    for c in 0..mesh.n_cells() {
        let (kappa, w) = coef(c, mesh.cell_gradient(u, c));
        let scale = kappa * mesh.measures()[c];
        let verts = mesh.cell(c);
        let grads = mesh.basis_grads(c);
        for (a, &ka) in verts.iter().enumerate() {
            let Some(ia) = mesh.interior_index(ka) else { continue };
            for (b, &kb) in verts.iter().enumerate() {
                let Some(ib) = mesh.interior_index(kb) else { continue };
                if ib > ia {
                    continue;
                }
                let mut dot = w[0] * grads[a][0] * grads[b][0];
                if dim == 2 {
                    dot += w[1] * grads[a][1] * grads[b][1];
                }
                mat.add(ia, ib, scale * dot);
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Workspace {
    g: Vec<f64>,
    gt: Vec<f64>,
    d: Vec<f64>,
    trial: Vec<f64>,
    rhs: Vec<f64>,
    mat: BandedSpd,
}

impl Workspace {
    fn new(mesh: &Mesh) -> Self {
        let n = mesh.n_nodes();
        let m = mesh.interior_nodes().len();
        Workspace {
            g: vec![0.0; n],
            gt: vec![0.0; n],
            d: vec![0.0; n],
            trial: vec![0.0; n],
            rhs: vec![0.0; m],
            mat: BandedSpd::zeros(m, mesh.interior_half_bandwidth()),
        }
    }
}

/// Fills `ws.d` with `-P⁻¹ g`; falls back to `-g` if `P` cannot be factored.
fn precondition(model: &EnergyModel, u: &[f64], pref: f64, eps_pc: f64, ws: &mut Workspace) {
    let mesh = model.mesh();
    let aniso = model.anisotropy();
    ws.mat.clear();
    assemble_metric(mesh, u, &mut ws.mat, |c, xi| {
        let loc = aniso.cell_local(c);
        (pref * loc.diffusivity_eps(xi, eps_pc), loc.weights)
    });
    if let Some(abs) = model.absorption() {
        let qw = mesh.quad_weight();
        for c in 0..mesh.n_cells() {
            let slope = abs.g_slope_cell(c, mesh.cell_average(u, c));
            if slope.is_finite() && slope > 0.0 {
                for &k in mesh.cell(c) {
                    if let Some(i) = mesh.interior_index(k) {
                        ws.mat.add(i, i, slope * qw * mesh.measures()[c]);
                    }
                }
            }
        }
    }
    ws.d.iter_mut().for_each(|x| *x = 0.0);
    let interior = mesh.interior_nodes();
    for (i, &k) in interior.iter().enumerate() {
        ws.rhs[i] = -ws.g[k];
    }
    if ws.mat.factor().is_ok() {
        ws.mat.solve(&mut ws.rhs);
        if ws.rhs.iter().all(|x| x.is_finite()) {
            for (i, &k) in interior.iter().enumerate() {
                ws.d[k] = ws.rhs[i];
            }
            return;
        }
    }
    for &k in interior {
        ws.d[k] = -ws.g[k];
    }
}

fn run_stage(
    model: &EnergyModel,
    u: &mut Vec<f64>,
    eps: f64,
    eps_pc: f64,
    opts: &SolverOptions,
    ws: &mut Workspace,
) -> StageRecord {
    let mut parts = model.gradient_values(u, eps, &mut ws.g);
    let mut rec = StageRecord {
        eps,
        iterations: 0,
        converged: false,
        grad_norm: f64::INFINITY,
        energy: parts.total,
        monotone_violations: 0,
        polish_rejections: 0,
    };
    loop {
        rec.grad_norm = max_abs(&ws.g);
        rec.energy = parts.total;
        if rec.grad_norm <= opts.grad_tol {
            rec.converged = true;
            break;
        }
        if rec.iterations >= opts.max_iters || !parts.total.is_finite() {
            break;
        }
        let pref = model.prefactor(parts.dirichlet);
        precondition(model, u, pref, eps_pc, ws);
        let mut slope = dot(&ws.g, &ws.d);
        if !(slope < 0.0) {
            for (d, g) in ws.d.iter_mut().zip(&ws.g) {
                *d = -g;
            }
            slope = -dot(&ws.g, &ws.g);
        }
        // Energies are sums of O(n) terms; differences below this band are rounding.
        let band = 1e-13 * parts.magnitude().max(f64::MIN_POSITIVE);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for ((x, &ui), &di) in ws.trial.iter_mut().zip(u.iter()).zip(&ws.d) {
                *x = ui + t * di;
            }
            let trial = model.parts_values(&ws.trial, eps);
            if trial.total.is_finite() {
                if trial.total <= parts.total + opts.armijo_c * t * slope {
                    accepted = Some(trial);
                    break;
                }
                if trial.total <= parts.total + band {
                    // Approximate Wolfe test on the derivative, for steps whose
                    // energy change is lost in rounding.
                    model.gradient_values(&ws.trial, eps, &mut ws.gt);
                    let dphi = dot(&ws.gt, &ws.d);
                    if dphi <= -0.8 * slope && dphi >= 0.9 * slope {
                        accepted = Some(trial);
                        break;
                    }
                }
            }
            t *= opts.shrink;
        }
        let Some(new_parts) = accepted else { break };
        rec.iterations += 1;
        if new_parts.total > parts.total + band {
            rec.monotone_violations += 1;
        }
        std::mem::swap(u, &mut ws.trial);
        let mut energy = new_parts.total;
        if opts.abs_polish && u.iter().any(|&x| x < 0.0) {
            let polished: Vec<f64> = u.iter().map(|x| x.abs()).collect();
            let pe = model.parts_values(&polished, eps).total;
            if pe <= energy + band {
                *u = polished;
                energy = pe;
            } else {
                rec.polish_rejections += 1;
            }
        }
        parts = model.gradient_values(u, eps, &mut ws.g);
        debug_assert!((parts.total - energy).abs() <= band.max(1e-300) * 10.0 || !energy.is_finite());
    }
    rec
}

/// Minimises the model's energy over nodal fields vanishing on the boundary.
/// Running out of iterations is not an error: the report carries
/// `converged = false` and the last iterate.
pub fn minimize_energy(model: &EnergyModel, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let mesh = model.mesh().clone();
    let (start, init) = initial_guess(model, opts)?;
    let mut u = start.into_values();
    for (k, x) in u.iter_mut().enumerate() {
        if mesh.is_boundary(k) {
            *x = 0.0;
        }
    }
    let mut ws = Workspace::new(&mesh);
    let mut stages = vec![];
    for eps in opts.eps_ladder() {
        stages.push(run_stage(model, &mut u, eps, eps, opts, &mut ws));
    }
    let last = run_stage(model, &mut u, 0.0, opts.eps_min, opts, &mut ws);
    let converged = last.converged;
    stages.push(last);

    let parts = model.parts_values(&u, 0.0);
    if !parts.total.is_finite() {
        return Err(Error::NonFinite("energy at the final iterate".into()));
    }
    let residual_max = model.residual_max(&u);
    let solution = NodeField::new(&mesh, u)?;
    let positivity_ok = mesh.interior_nodes().iter().all(|&k| solution.values()[k] > 0.0);
    let hopf_margin = hopf_diagnostic(&solution);
    let (kirchhoff_m0, kirchhoff_consistency) = match model.kirchhoff() {
        Some(k) => (Some(k.m(parts.dirichlet)), kirchhoff_consistency(model, &solution)),
        None => (None, None),
    };
    Ok(SolveReport {
        solution,
        energy: parts.total,
        parts,
        residual_max,
        stages,
        converged,
        positivity_ok,
        hopf_margin,
        kirchhoff_m0,
        kirchhoff_consistency,
        negative_energy: parts.total < 0.0,
        init,
        regime: None,
    })
}

fn gate(spec: &ProblemSpec, expected: ProblemKind) -> Result<()> {
    if spec.kind != expected {
        return Err(Error::InvalidParameter(format!("expected a {expected:?} spec, got {:?}", spec.kind)));
    }
    if spec.override_validation {
        return spec.check_complete();
    }
    let report = spec.validate()?;
    if !report.passed() {
        return Err(Error::Validation(report.summary()));
    }
    Ok(())
}

fn solve_gated(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SolveReport> {
    let model = spec.energy_model()?;
    let mut report = minimize_energy(&model, opts)?;
    report.regime = Some(sharpness_regime(spec));
    Ok(report)
}

/// `-Δ_{p(x)} u = f(x, u)` by minimising `E`.
pub fn solve_problem1(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SolveReport> {
    gate(spec, ProblemKind::Problem1)?;
    solve_gated(spec, opts)
}

/// `-Δ_{p(x)} u + g(x, u) = f(x, u)` by minimising `Ê`.
pub fn solve_problem2(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SolveReport> {
    gate(spec, ProblemKind::Problem2)?;
    solve_gated(spec, opts)
}

/// The Kirchhoff problem by minimising `J`.
pub fn solve_kirchhoff(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SolveReport> {
    gate(spec, ProblemKind::Kirchhoff)?;
    solve_gated(spec, opts)
}

/// Dispatches on the spec's kind.
pub fn solve(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SolveReport> {
    match spec.kind {
        ProblemKind::Problem1 => solve_problem1(spec, opts),
        ProblemKind::Problem2 => solve_problem2(spec, opts),
        ProblemKind::Kirchhoff => solve_kirchhoff(spec, opts),
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::anisotropy::AnisotropyModel;
    use crate::energy::{AbsorptionTerm, KirchhoffTerm, ReactionTerm};
    use crate::exponent::ExponentField;

    fn linear_spec(n: usize) -> ProblemSpec {
        let m = Mesh::interval(0.0, 1.0, n).unwrap();
        let e = ExponentField::constant(&m, 2.0, 1.0).unwrap();
        ProblemSpec::problem1(AnisotropyModel::isotropic(e), ReactionTerm::source(NodeField::constant(&m, 1.0)).unwrap())
            .with_override(true)
    }

    #[test]
    fn eps_ladder_ends_at_eps_min() {
        let ladder = SolverOptions::default().eps_ladder();
        assert_eq!(ladder.len(), 7);
        assert_eq!(ladder[0], 1e-2);
        assert_eq!(*ladder.last().unwrap(), 1e-8);
        let one = SolverOptions { eps0: 1e-3, eps_min: 1e-3, ..Default::default() };
        assert_eq!(one.eps_ladder(), vec![1e-3]);
        assert!(SolverOptions { eps_min: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn linear_problem_matches_closed_form() {
        let spec = linear_spec(256);
        let rep = solve_problem1(&spec, &SolverOptions::default()).unwrap();
        assert!(rep.converged && rep.residual_max <= 1e-8);
        let exact = NodeField::from_fn(spec.exponent().mesh(), |x| 0.5 * x[0] * (1.0 - x[0])).unwrap();
        assert!(rep.solution.max_distance(&exact).unwrap() < 1e-10);
        assert!(rep.positivity_ok && rep.hopf_margin > 0.0);
        assert!(rep.stages.iter().all(|s| s.monotone_violations == 0));
    }

    #[test]
    fn validation_gates_solves() {
        let spec = linear_spec(16).with_override(false);
        assert!(matches!(solve_problem1(&spec, &SolverOptions::default()), Err(Error::Validation(_))));
        assert!(matches!(solve_problem2(&spec, &SolverOptions::default()), Err(Error::InvalidParameter(_))));
    }

    fn sublinear(n: usize) -> ProblemSpec {
        let m = Mesh::interval(0.0, 1.0, n).unwrap();
        let e = ExponentField::constant(&m, 2.0, 2.0).unwrap();
        ProblemSpec::problem1(
            AnisotropyModel::isotropic(e),
            ReactionTerm::power(NodeField::constant(&m, 1.0), NodeField::constant(&m, 1.5)).unwrap(),
        )
    }

    #[test]
    fn initial_guess_examples() {
        let model = sublinear(64).energy_model().unwrap();
        let (_, rec) = initial_guess(&model, &SolverOptions::default()).unwrap();
        assert!(rec.negative_found && rec.energy < 0.0);

        let m = model.mesh().clone();
        let e = ExponentField::constant(&m, 2.0, 2.0).unwrap();
        let flat = EnergyModel::new(AnisotropyModel::isotropic(e))
            .with_reaction(ReactionTerm::power(NodeField::constant(&m, 1e-12), NodeField::constant(&m, 2.0)).unwrap())
            .unwrap();
        let (_, rec) = initial_guess(&flat, &SolverOptions::default()).unwrap();
        assert!(!rec.negative_found);

        let values: Vec<f64> = (0..m.n_nodes()).map(|k| k as f64 * 0.01).collect();
        let opts = SolverOptions { init: InitKind::Provided { values: values.clone() }, ..Default::default() };
        let (u, _) = initial_guess(&model, &opts).unwrap();
        assert_eq!(u.values(), &values[..]);
    }

    #[test]
    fn sublinear_problem_is_positive_with_negative_energy() {
        let rep = solve_problem1(&sublinear(128), &SolverOptions::default()).unwrap();
        assert!(rep.converged, "{:?}", rep.stages);
        assert!(rep.positivity_ok && rep.negative_energy && rep.hopf_margin > 0.0);
        assert!(rep.residual_max <= 1e-9);
    }

    #[test]
    fn kirchhoff_unit_reproduces_problem1_bitwise() {
        let spec = sublinear(64);
        let base = solve_problem1(&spec, &SolverOptions::default()).unwrap();
        let k = ProblemSpec::kirchhoff(spec.anisotropy.clone(), spec.reaction.clone(), KirchhoffTerm::unit());
        let rep = solve_kirchhoff(&k, &SolverOptions::default()).unwrap();
        assert_eq!(base.solution.values(), rep.solution.values());
        assert_eq!(base.energy.to_bits(), rep.energy.to_bits());
        assert_relative_eq!(rep.kirchhoff_m0.unwrap(), 1.0);
    }

    #[test]
    fn absorption_problem_converges() {
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let e = ExponentField::constant(&m, 2.0, 1.8).unwrap();
        let spec = ProblemSpec::problem2(
            AnisotropyModel::isotropic(e),
            ReactionTerm::power(NodeField::constant(&m, 2.0), NodeField::constant(&m, 1.5)).unwrap(),
            AbsorptionTerm::power(NodeField::constant(&m, 1.0), NodeField::constant(&m, 2.0)).unwrap(),
        );
        let rep = solve_problem2(&spec, &SolverOptions::default()).unwrap();
        assert!(rep.converged && rep.positivity_ok && rep.negative_energy);
    }
}
