//! Subcommand implementations. Each returns the exit code of a completed
//! run; configuration problems and solver failures come back as [`CliError`].

use std::fmt::Write as _;

use pxlap::anisotropy::{HypothesisAReport, StrictConvexityReport};
use pxlap::energy::{EnergyParts, KirchhoffTerm, LineFunctional};
use pxlap::inequality::{
    check_ray_convexity, default_theta_grid, diaz_saa_gap, sample_positive_field, ComparisonVerdict,
    DEFAULT_RATIO_CAP,
};
use pxlap::problems::{validate_corollary_chain, ProblemKind, ProblemSpec, Regime};
use pxlap::solver::eigen::richardson;
use pxlap::solver::{weak_comparison_experiment, InitRecord, StageRecord};
use pxlap::{first_eigenpair, solve, EigenOptions, Exec, InitKind, Mesh, NodeField, SolveReport, ValidationReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{DomainConfig, RunConfig, SweepParameter};
use crate::output::{fmt_float, solution_csv, OutDir};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        CliError { code: EXIT_USAGE, error: error.into() }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<pxlap::Error>() {
            Some(pxlap::Error::NonConvergence(_)) => EXIT_NONCONVERGENCE,
            _ => EXIT_USAGE,
        };
        CliError { code, error }
    }
}

impl From<pxlap::Error> for CliError {
    fn from(error: pxlap::Error) -> Self {
        anyhow::Error::from(error).into()
    }
}

pub type CmdResult = Result<u8, CliError>;

pub struct Context {
    pub config: RunConfig,
    pub seed: Option<u64>,
    pub out: OutDir,
    pub quiet: bool,
}

impl Context {
    fn require_seed(&self, command: &str) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::usage(anyhow::anyhow!("{command} needs --seed (or a seed in the config)")))
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", line.as_ref());
        }
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    kind: ProblemKind,
    n_nodes: usize,
    energy: f64,
    parts: EnergyParts,
    residual_max: f64,
    converged: bool,
    iterations: usize,
    positivity_ok: bool,
    hopf_margin: f64,
    negative_energy: bool,
    kirchhoff_m0: Option<f64>,
    kirchhoff_consistency: Option<f64>,
    max_u: f64,
    init: InitRecord,
    regime: Option<Regime>,
    stages: &'a [StageRecord],
}

fn summarize<'a>(spec: &ProblemSpec, rep: &'a SolveReport) -> SolveSummary<'a> {
    SolveSummary {
        kind: spec.kind,
        n_nodes: rep.solution.len(),
        energy: rep.energy,
        parts: rep.parts,
        residual_max: rep.residual_max,
        converged: rep.converged,
        iterations: rep.iterations(),
        positivity_ok: rep.positivity_ok,
        hopf_margin: rep.hopf_margin,
        negative_energy: rep.negative_energy,
        kirchhoff_m0: rep.kirchhoff_m0,
        kirchhoff_consistency: rep.kirchhoff_consistency,
        max_u: rep.solution.max(),
        init: rep.init,
        regime: rep.regime,
        stages: &rep.stages,
    }
}

fn solver_options(ctx: &Context) -> Result<pxlap::SolverOptions, CliError> {
    let mut opts = ctx.config.solver.clone();
    if let InitKind::Random { seed } = &mut opts.init {
        if let Some(s) = ctx.seed {
            *seed = s;
        }
    }
    Ok(opts)
}

pub fn solve_cmd(ctx: &Context) -> CmdResult {
    let spec = ctx.config.spec()?;
    let opts = solver_options(ctx)?;
    let rep = match solve(&spec, &opts) {
        Ok(rep) => rep,
        Err(pxlap::Error::Validation(msg)) => {
            return Err(CliError::usage(anyhow::anyhow!("hypotheses fail (set override_validation to solve anyway): {msg}")))
        }
        Err(e) => return Err(e.into()),
    };
    ctx.out.write_text("solution.csv", &solution_csv(&rep.solution))?;
    let path = ctx.out.write_json("solve_report.json", &summarize(&spec, &rep))?;
    ctx.say(format!(
        "energy {} residual {} converged {} -> {}",
        fmt_float(rep.energy),
        fmt_float(rep.residual_max),
        rep.converged,
        path.display()
    ));
    Ok(if rep.converged { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

#[derive(Serialize)]
struct ValidateSummary {
    passed: bool,
    problem: ValidationReport,
    exponent: ValidationReport,
    exponent_chain: Option<ValidationReport>,
}

pub fn validate_cmd(ctx: &Context) -> CmdResult {
    let spec = ctx.config.spec()?;
    let problem = spec.validate()?;
    let exponent = spec.exponent().validate(ctx.config.exponent.holder_alpha);
    let exponent_chain = spec
        .absorption
        .as_ref()
        .filter(|_| spec.kind == ProblemKind::Problem2)
        .map(|a| validate_corollary_chain(spec.reaction.q(), a.big_q(), spec.exponent().r(), spec.exponent()));
    let passed = problem.passed() && exponent.passed() && exponent_chain.as_ref().is_none_or(|c| c.passed());
    let summary = ValidateSummary { passed, problem, exponent, exponent_chain };
    let path = ctx.out.write_json("validation.json", &summary)?;
    for entry in summary.problem.failures().chain(summary.exponent.failures()) {
        ctx.say(format!("fail {}: {}", entry.name, entry.witness));
    }
    ctx.say(format!("validation passed: {passed} -> {}", path.display()));
    Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[derive(Serialize)]
struct ConvexitySummary {
    samples: usize,
    min_relative_slack: f64,
    worst_sample: usize,
    violations: usize,
    rel_tol: f64,
    n_strict_convexity: StrictConvexityReport,
    hypothesis_a: HypothesisAReport,
    passed: bool,
}

pub fn check_convexity_cmd(ctx: &Context) -> CmdResult {
    let seed = ctx.require_seed("check-convexity")?;
    let cfg = &ctx.config;
    let mesh = cfg.mesh()?;
    let mut aniso = cfg.anisotropy(&mesh)?;
    let r = aniso.exponent().r();
    let model = pxlap::EnergyModel::new(aniso.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(NodeField, NodeField)> = (0..cfg.check.samples)
        .map(|_| {
            let a = sample_positive_field(&mesh, &mut rng);
            let b = sample_positive_field(&mesh, &mut rng);
            (a.map(|w| w.powf(r)).unwrap(), b.map(|w| w.powf(r)).unwrap())
        })
        .collect();
    let thetas = default_theta_grid();
    let slacks = Exec::Parallel.map(&pairs, |(v1, v2)| -> pxlap::Result<f64> {
        let mut worst = f64::INFINITY;
        for f in [LineFunctional::W, LineFunctional::WA] {
            worst = worst.min(check_ray_convexity(v1, v2, f, &model, &thetas)?.relative_min_slack());
        }
        Ok(worst)
    });
    let slacks = slacks.into_iter().collect::<pxlap::Result<Vec<f64>>>()?;
    let (worst_sample, min_relative_slack) = worst(&slacks);
    let violations = slacks.iter().filter(|&&s| s < -cfg.check.rel_tol).count();
    let n_strict = aniso.check_n_strict_convexity(cfg.check.structure_samples, seed);
    let hyp_a = aniso.check_hypothesis_a(cfg.check.structure_samples, seed)?;
    let passed = violations == 0 && n_strict.passed && hyp_a.passed;
    let summary = ConvexitySummary {
        samples: pairs.len(),
        min_relative_slack,
        worst_sample,
        violations,
        rel_tol: cfg.check.rel_tol,
        n_strict_convexity: n_strict,
        hypothesis_a: hyp_a,
        passed,
    };
    let path = ctx.out.write_json("convexity.json", &summary)?;
    ctx.say(format!(
        "min relative slack {} ({} violations), N strictly convex {}, hypothesis A {} -> {}",
        fmt_float(min_relative_slack),
        violations,
        n_strict.passed,
        hyp_a.passed,
        path.display()
    ));
    Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn worst(values: &[f64]) -> (usize, f64) {
    values.iter().copied().enumerate().fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
}

#[derive(Serialize)]
struct GapSummary {
    samples: usize,
    min_relative_gap: f64,
    worst_sample: usize,
    violations: usize,
    rel_tol: f64,
    identical_pair_gap: f64,
    passed: bool,
}

pub fn check_diaz_saa_cmd(ctx: &Context) -> CmdResult {
    let seed = ctx.require_seed("check-diaz-saa")?;
    let cfg = &ctx.config;
    let mesh = cfg.mesh()?;
    let model = pxlap::EnergyModel::new(cfg.anisotropy(&mesh)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(NodeField, NodeField)> = (0..cfg.check.samples)
        .map(|_| (sample_positive_field(&mesh, &mut rng), sample_positive_field(&mesh, &mut rng)))
        .collect();
    let gaps = Exec::Parallel
        .map(&pairs, |(w1, w2)| diaz_saa_gap(w1, w2, &model, DEFAULT_RATIO_CAP).map(|g| g.relative_gap()))
        .into_iter()
        .collect::<pxlap::Result<Vec<f64>>>()?;
    let (worst_sample, min_relative_gap) = worst(&gaps);
    let violations = gaps.iter().filter(|&&g| g < -cfg.check.rel_tol).count();
    let identical_pair_gap = match pairs.first() {
        Some((w, _)) => diaz_saa_gap(w, w, &model, DEFAULT_RATIO_CAP)?.gap,
        None => 0.0,
    };
    let passed = violations == 0 && identical_pair_gap == 0.0;
    let summary = GapSummary {
        samples: pairs.len(),
        min_relative_gap,
        worst_sample,
        violations,
        rel_tol: cfg.check.rel_tol,
        identical_pair_gap,
        passed,
    };
    let path = ctx.out.write_json("diaz_saa.json", &summary)?;
    ctx.say(format!("min relative gap {} ({} violations) -> {}", fmt_float(min_relative_gap), violations, path.display()));
    Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[derive(Serialize)]
struct ComparisonCase {
    label: String,
    verdict: ComparisonVerdict,
}

#[derive(Serialize)]
struct ComparisonSummary {
    cases: Vec<ComparisonCase>,
    max_excess: f64,
    passed: bool,
}

/// `f₁ = c·exp(a cos(πx))`, `f₂ = f₁ + b·bump` with random positive `a, b, c`.
fn monotone_pair(mesh: &std::sync::Arc<Mesh>, rng: &mut impl Rng) -> (NodeField, NodeField) {
    let (a, b, c) = (rng.gen_range(-0.5..0.5), rng.gen_range(0.1..1.0), rng.gen_range(0.5..2.0));
    let lift = pxlap::solver::bump_profile(mesh);
    let f1 = NodeField::from_fn(mesh, |x| c * (a * (std::f64::consts::PI * x[0]).cos()).exp()).unwrap();
    let f2 = f1.zip_map(&lift, |f, l| f + b * (0.25 + l)).unwrap();
    (f1, f2)
}

pub fn check_comparison_cmd(ctx: &Context) -> CmdResult {
    let seed = ctx.require_seed("check-comparison")?;
    let cfg = &ctx.config;
    let mesh = cfg.mesh()?;
    let aniso = cfg.anisotropy(&mesh)?;
    let opts = solver_options(ctx)?;
    let mut data = vec![(
        format!("f1 = {}, f2 = {}", cfg.check.f1, cfg.check.f2),
        crate::config::sample(&mesh, &cfg.check.f1, "check.f1")?,
        crate::config::sample(&mesh, &cfg.check.f2, "check.f2")?,
    )];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..cfg.check.random_pairs {
        let (f1, f2) = monotone_pair(&mesh, &mut rng);
        data.push((format!("random pair {i}"), f1, f2));
    }
    let verdicts = Exec::Parallel.map(&data, |(_, f1, f2)| weak_comparison_experiment(&aniso, f1, f2, &opts, cfg.check.tol));
    let mut cases = vec![];
    for ((label, _, _), v) in data.into_iter().zip(verdicts) {
        cases.push(ComparisonCase { label, verdict: v? });
    }
    let max_excess = cases.iter().map(|c| c.verdict.max_excess).fold(f64::NEG_INFINITY, f64::max);
    let passed = cases.iter().all(|c| c.verdict.hypothesis_ok && c.verdict.conclusion_ok);
    let path = ctx.out.write_json("comparison.json", &ComparisonSummary { cases, max_excess, passed })?;
    ctx.say(format!("max(u1 - u2) = {} -> {}", fmt_float(max_excess), path.display()));
    Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[derive(Serialize)]
struct EigenSummary {
    r: f64,
    resolutions: Vec<[usize; 2]>,
    lambdas: Vec<f64>,
    /// Last entry of the Richardson table (orders 2, 4, …).
    extrapolated: Option<f64>,
    converged: bool,
}

pub fn eig_cmd(ctx: &Context, r: f64, levels: usize) -> CmdResult {
    if levels == 0 {
        return Err(CliError::usage(anyhow::anyhow!("--levels must be positive")));
    }
    let mut resolutions = vec![];
    let mut meshes = vec![];
    for level in 0..levels {
        let f = 1usize << level;
        let mesh = match ctx.config.domain {
            DomainConfig::Interval { a, b, n } => Mesh::interval(a, b, n * f)?,
            DomainConfig::Rectangle { ax, bx, ay, by, nx, ny } => Mesh::rectangle(ax, bx, ay, by, nx * f, ny * f)?,
        };
        resolutions.push(mesh.resolution());
        meshes.push(mesh);
    }
    let reports = Exec::Parallel
        .map(&meshes, |m| first_eigenpair(m, r, &EigenOptions::default()))
        .into_iter()
        .collect::<pxlap::Result<Vec<_>>>()?;
    let lambdas: Vec<f64> = reports.iter().map(|e| e.lambda).collect();
    let mut table = lambdas.clone();
    let mut order = 2.0;
    while table.len() > 1 {
        table = table.windows(2).map(|w| richardson(w[0], w[1], 2.0, order)).collect();
        order += 2.0;
    }
    let extrapolated = (levels > 1).then(|| table[0]);
    let converged = reports.iter().all(|e| e.converged);
    let mut csv = String::from("nx,ny,lambda\n");
    for (res, l) in resolutions.iter().zip(&lambdas) {
        let _ = writeln!(csv, "{},{},{}", res[0], res[1], fmt_float(*l));
    }
    ctx.out.write_text("eigenvalues.csv", &csv)?;
    ctx.out.write_text("eigenfunction.csv", &solution_csv(&reports.last().unwrap().phi))?;
    let path = ctx.out.write_json("eigen_report.json", &EigenSummary { r, resolutions, lambdas, extrapolated, converged })?;
    ctx.say(format!(
        "lambda {} extrapolated {} -> {}",
        fmt_float(*reports.last().map(|e| &e.lambda).unwrap()),
        extrapolated.map_or("-".into(), fmt_float),
        path.display()
    ));
    Ok(if converged { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

pub fn sweep_cmd(ctx: &Context) -> CmdResult {
    let Some(sweep) = &ctx.config.sweep else {
        return Err(CliError::usage(anyhow::anyhow!("sweep needs a sweep block in the config")));
    };
    let base = ctx.config.spec()?;
    let opts = solver_options(ctx)?;
    let mut specs = vec![];
    for &v in &sweep.values {
        let mut spec = base.clone();
        match sweep.parameter {
            SweepParameter::HScale => spec.reaction = spec.reaction.scaled(v)?,
            SweepParameter::EllScale => {
                let Some(a) = &spec.absorption else {
                    return Err(CliError::usage(anyhow::anyhow!("ell_scale sweep needs an absorption term")));
                };
                spec.absorption = Some(a.scaled(v)?);
            }
            SweepParameter::MInf => {
                let Some(k) = spec.kirchhoff else {
                    return Err(CliError::usage(anyhow::anyhow!("m_inf sweep needs a Kirchhoff term")));
                };
                spec.kirchhoff = Some(KirchhoffTerm::saturating(k.m0, v)?);
            }
        }
        specs.push(spec);
    }
    let reports = Exec::Parallel.map(&specs, |s| solve(s, &opts));
    let mut csv = String::from("value,energy,max_u,residual_max,converged,iterations\n");
    let mut all_converged = true;
    for (&v, rep) in sweep.values.iter().zip(reports) {
        let rep = rep?;
        all_converged &= rep.converged;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_float(v),
            fmt_float(rep.energy),
            fmt_float(rep.solution.max()),
            fmt_float(rep.residual_max),
            rep.converged,
            rep.iterations()
        );
    }
    let path = ctx.out.write_text("sweep.csv", &csv)?;
    ctx.say(format!("{} points -> {}", sweep.values.len(), path.display()));
    Ok(if all_converged { EXIT_OK } else { EXIT_NONCONVERGENCE })
}
