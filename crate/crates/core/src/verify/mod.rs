//! Verification suites: manufactured solutions, dense oracles, refinement
//! studies and invariant checks, reported as machine-greppable lines
//! `CHECK <suite>.<name> PASS|FAIL <value> <bound>`.

pub mod data;
pub mod manufactured;
pub mod oracle;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::{Discretization, GridSpec, PlateRole, PressureField};
use crate::error::{Error, Result};
use crate::inertial::{self, InertialContext, InertialScheme, InertialState};
use crate::model::{InertialPressureConvention, InitialData, PermeabilityModel, PhysicalParams, SourceTerms};
use crate::operators::{CgSettings, OperatorContext};
use crate::quasistatic::{self, weak_residual, SourcePath, TestBank, TimeProfile, TransverseProfile};

pub use data::SmoothData;
pub use manufactured::{convergence_study, make_manufactured_qs, ConvergenceTable, ManufacturedCase, Refinement};
pub use oracle::{oracle_equivalence, stability_ladder, stability_report, OracleReport, StabilityLadder, StabilityReport};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CHECK {}.{} {} {:.6e} {:.6e}",
            self.suite,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.value,
            self.bound
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
    /// Free-form diagnostic lines (not checks).
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn extend(&mut self, other: SuiteReport) {
        self.checks.extend(other.checks);
        self.notes.extend(other.notes);
    }

    fn at_most(&mut self, suite: &str, name: &str, value: f64, bound: f64) {
        self.push(suite, name, value <= bound, value, bound);
    }

    fn at_least(&mut self, suite: &str, name: &str, value: f64, bound: f64) {
        self.push(suite, name, value >= bound, value, bound);
    }

    fn push(&mut self, suite: &str, name: &str, passed: bool, value: f64, bound: f64) {
        self.checks.push(Check {
            suite: suite.to_string(),
            name: name.to_string(),
            passed: passed && value.is_finite(),
            value,
            bound,
        });
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for note in &self.notes {
            writeln!(f, "# {note}")?;
        }
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Problem setup shared by the suites.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub params: PhysicalParams,
    pub grid: GridSpec,
    pub permeability: PermeabilityModel,
    pub t_final: f64,
    pub tau: f64,
    pub seed: u64,
    pub cg: CgSettings,
    /// Step count for the energy suites.
    pub energy_steps: usize,
}

impl VerifyConfig {
    pub fn new(params: PhysicalParams, grid: GridSpec, permeability: PermeabilityModel) -> Self {
        Self {
            params,
            grid,
            permeability,
            t_final: 1.0,
            tau: 0.05,
            seed: 0,
            cg: CgSettings::default(),
            energy_steps: 500,
        }
    }

    pub fn context(&self) -> Result<OperatorContext> {
        let disc = Discretization::new(self.grid.m, self.grid.n, self.grid.n3, self.params.h)?;
        Ok(OperatorContext::new(self.params, disc, self.permeability.clone())?.with_cg(self.cg))
    }

    /// Inertial context; `rho_p = 1` stands in when `rho_p == 0`.
    pub fn inertial_context(&self) -> Result<InertialContext> {
        let mut params = self.params;
        if params.rho_p <= 0.0 {
            params.rho_p = 1.0;
        }
        let disc = Discretization::new(self.grid.m, self.grid.n, self.grid.n3, self.params.h)?;
        let mut ictx = InertialContext::new(params, disc, self.permeability.clone())?;
        ictx.scaled.cg = self.cg;
        Ok(ictx)
    }
}

/// Suites run by `run_all`, in order.
pub const DEFAULT_SUITES: &[&str] = &[
    "permeability",
    "operators",
    "coercivity",
    "oracle",
    "energy",
    "dissipativity",
    "resolvent",
    "weakform",
    "stability",
    "initial",
    "translation",
    "linearity",
    "determinism",
    "boundary",
    "limit",
];

/// Every suite name, including the slower `convergence` study.
pub const ALL_SUITES: &[&str] = &[
    "permeability",
    "operators",
    "coercivity",
    "oracle",
    "energy",
    "dissipativity",
    "resolvent",
    "weakform",
    "stability",
    "initial",
    "translation",
    "linearity",
    "determinism",
    "boundary",
    "limit",
    "convergence",
];

pub fn run_suite(name: &str, cfg: &VerifyConfig) -> Result<SuiteReport> {
    match name {
        "permeability" => suite_permeability(cfg),
        "operators" => suite_operators(cfg),
        "coercivity" => suite_coercivity(cfg),
        "oracle" => suite_oracle(cfg),
        "energy" => suite_energy(cfg),
        "dissipativity" => suite_dissipativity(cfg),
        "resolvent" => suite_resolvent(cfg),
        "weakform" => suite_weakform(cfg),
        "stability" => suite_stability(cfg),
        "initial" => suite_initial(cfg),
        "translation" => suite_translation(cfg),
        "linearity" => suite_linearity(cfg),
        "determinism" => suite_determinism(cfg),
        "boundary" => suite_boundary(cfg),
        "limit" => suite_limit(cfg),
        "convergence" => suite_convergence(cfg),
        other => Err(Error::InvalidParams(format!("unknown verification suite '{other}'"))),
    }
}

pub fn run_all(names: &[&str], cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    for name in names {
        report.extend(run_suite(name, cfg)?);
    }
    Ok(report)
}

fn random_pressure(disc: &Discretization, rng: &mut ChaCha8Rng) -> PressureField {
    let mut p = disc.zero_pressure();
    p.values.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    p
}

fn random_inertial(disc: &Discretization, rng: &mut ChaCha8Rng, t: f64) -> InertialState {
    let mut y = InertialState::zeros(disc, t);
    let lam = disc.basis.eigenvalues();
    for (w, l) in y.w.coeffs.iter_mut().zip(lam) {
        *w = rng.gen_range(-1.0..1.0) / l;
    }
    y.v.coeffs.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    y.p = random_pressure(disc, rng);
    y
}

fn rel_diff(ctx: &OperatorContext, a: &PressureField, b: &PressureField) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    ctx.disc.l2_norm(&d) / ctx.disc.l2_norm(b).max(f64::MIN_POSITIVE)
}

fn suite_permeability(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut r = SuiteReport::default();
    let report = cfg.permeability.validate(cfg.grid, cfg.params.h, cfg.t_final)?;
    r.notes.push(format!(
        "permeability '{}' sampled range [{:.6}, {:.6}]",
        cfg.permeability.name,
        report.observed_min.unwrap_or(f64::NAN),
        report.observed_max.unwrap_or(f64::NAN)
    ));
    if let (Some(lo), Some(hi)) = (report.observed_min, report.observed_max) {
        r.at_least("permeability", "lower_bound_margin", lo - cfg.permeability.k_lower, 0.0);
        r.at_least("permeability", "upper_bound_margin", cfg.permeability.k_upper - hi, 0.0);
    }
    r.push("permeability", "validation", report.passed(), report.failures().count() as f64, 0.0);
    Ok(r)
}

fn suite_operators(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let ctx = cfg.context()?;
    let disc = &ctx.disc;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut adj, mut sym, mut mono, mut diagram, mut negative) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let p = random_pressure(disc, &mut rng);
        let q = random_pressure(disc, &mut rng);
        let mut z = disc.zero_plate(PlateRole::Moment);
        z.coeffs.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let kp_z = disc.moment(&p).dot(&z);
        let p_ktz = disc.dot(&p, &disc.lift_moment(&z));
        adj = adj.max((kp_z - p_ktz).abs() / (disc.l2_norm(&p) * z.l2_norm()));
        let bp = ctx.apply_b(&p);
        let bq = ctx.apply_b(&q);
        let scale = disc.l2_norm(&bp).max(disc.l2_norm(&bq)) * disc.l2_norm(&p).max(disc.l2_norm(&q));
        sym = sym.max((disc.dot(&bp, &q) - disc.dot(&p, &bq)).abs() / scale);
        let bpp = disc.dot(&bp, &p);
        let kp = disc.moment(&p).l2_norm().powi(2) * ctx.beta();
        mono = mono.max((bpp - kp).abs() / kp.max(f64::MIN_POSITIVE));
        negative = negative.max(-bpp);
        diagram = diagram.max(rel_diff(&ctx, &ctx.apply_b_via_diagram(&p), &bp));
    }
    let mut r = SuiteReport::default();
    r.at_most("operators", "moment_adjointness", adj, 1e-13);
    r.at_most("operators", "b_symmetry", sym, 1e-13);
    r.at_most("operators", "b_monotone_identity", mono, 1e-13);
    r.at_most("operators", "b_negative_part", negative, 0.0);
    r.at_most("operators", "diagram_collapse", diagram, 1e-12);
    Ok(r)
}

fn suite_coercivity(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let ctx = cfg.context()?;
    let disc = &ctx.disc;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let floor = ctx.params.c_p.min(cfg.permeability.k_lower);
    let times: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..cfg.t_final)).collect();
    let stiffs = times.iter().map(|&t| ctx.stiffness_at(t)).collect::<Result<Vec<_>>>()?;
    let mut violations = 0usize;
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let p = random_pressure(disc, &mut rng);
        let base = disc.dot(&ctx.apply_fluid_content(&p), &p);
        let v = disc.v_norm_sq(&p);
        for stiff in &stiffs {
            let lhs = base + 2.0 * ctx.a_form(stiff, &p, &p);
            let margin = lhs / (floor * v) - 1.0;
            worst = worst.min(margin);
            if lhs < floor * v {
                violations += 1;
            }
        }
    }
    let mut r = SuiteReport::default();
    r.at_most("coercivity", "violations", violations as f64, 0.0);
    r.at_least("coercivity", "relative_margin", worst, 0.0);
    Ok(r)
}

fn suite_oracle(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let ctx = cfg.context()?;
    let report = oracle_equivalence(&ctx, 0.5 * cfg.t_final, cfg.tau, cfg.seed)?;
    let mut r = SuiteReport::default();
    for e in &report.entries {
        r.at_most("oracle", e.name, e.value, e.bound);
    }
    Ok(r)
}

/// Largest relative increase of a sequence between consecutive entries.
pub fn max_relative_increase(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn suite_energy(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let ctx = cfg.context()?;
    let disc = &ctx.disc;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let steps = cfg.energy_steps;
    let t_final = cfg.tau * steps as f64;
    let p0 = random_pressure(disc, &mut rng);
    let run = quasistatic::run(&ctx, &InitialData::Pressure(p0), &SourceTerms::zero(), t_final, cfg.tau, SourcePath::Direct)?;
    let energies: Vec<f64> = run.states.iter().map(|s| s.diagnostics.energy).collect();
    let defects = quasistatic::energy_defects(&run);
    let worst_defect = defects.iter().zip(&energies).map(|(d, e)| d / e.max(f64::MIN_POSITIVE)).fold(f64::NEG_INFINITY, f64::max);
    let plate = run.states.iter().map(|s| s.diagnostics.plate_residual).fold(0.0, f64::max);

    let ictx = cfg.inertial_context()?;
    let y0 = random_inertial(ictx.disc(), &mut rng, 0.0);
    let irun = inertial::run_inertial(&ictx, &y0, &SourceTerms::zero(), t_final, cfg.tau, InertialScheme::BackwardEuler)?;
    let norms: Vec<f64> = irun.energy.iter().map(|e| e.x_norm).collect();

    let mut r = SuiteReport::default();
    r.at_most("energy", "quasistatic_max_relative_increase", max_relative_increase(&energies).max(0.0), 1e-12);
    r.at_most("energy", "quasistatic_step_inequality", worst_defect.max(0.0), 1e-10);
    r.at_most("energy", "plate_residual", plate, 1e-10);
    r.at_most("energy", "inertial_max_relative_increase", max_relative_increase(&norms).max(0.0), 1e-12);
    Ok(r)
}

fn suite_dissipativity(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let ictx = cfg.inertial_context()?;
    let disc = ictx.disc();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(3));
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let t = rng.gen_range(0.0..ictx.scaling.scaled_time(cfg.t_final));
        let y = random_inertial(disc, &mut rng, t);
        let gy = inertial::apply_generator(&ictx, &y)?;
        let identity = gy.x_dot(&y, disc) + inertial::dissipation(&ictx, &y)?;
        worst = worst.max(identity.abs() / y.x_norm_sq(disc));
    }
    let mut r = SuiteReport::default();
    r.at_most("dissipativity", "identity", worst, 1e-11);
    Ok(r)
}

fn suite_resolvent(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let ictx = cfg.inertial_context()?;
    let disc = ictx.disc();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(4));
    let sigma = ictx.scaling.scaled_time(cfg.tau);
    let mut worst = 0.0f64;
    let mut contraction = f64::NEG_INFINITY;
    for _ in 0..5 {
        let y = random_inertial(disc, &mut rng, 0.0);
        let (next, _) = inertial::solve_resolvent(&ictx, &y, sigma, sigma)?;
        worst = worst.max(inertial::resolvent_residual(&ictx, &next, &y, sigma)?);
        contraction = contraction.max(next.x_norm(disc) / y.x_norm(disc) - 1.0);
    }
    let bound = if inertial::uses_direct_blocks(&cfg.permeability) { 1e-12 } else { 10.0 * cfg.cg.tol };
    let mut r = SuiteReport::default();
    r.at_most("resolvent", "consistency", worst, bound);
    r.at_most("resolvent", "contraction", contraction.max(0.0), 1e-12);
    Ok(r)
}

/// Weak-form residuals on a refinement ladder.
#[derive(Debug, Clone)]
pub struct WeakformStudy {
    /// `(tau, N3, max plate residual, max pressure residual)`.
    pub rows: Vec<(f64, usize, f64, f64)>,
    /// Order in `tau` of the RMS residual over linear-in-`x3` tests (exact
    /// transverse derivative).
    pub time_order: f64,
    /// Order in the transverse spacing of the RMS residual over
    /// linear-in-time tests (exact time quadrature).
    pub space_order: f64,
}

/// Solves on smooth random data over a ladder and evaluates both weak-form
/// identities; additionally isolates the time and space orders.
pub fn weakform_study(
    params: PhysicalParams,
    permeability: &PermeabilityModel,
    in_plane: GridSpec,
    ladder: &[(f64, usize)],
    t_final: f64,
    data: &SmoothData,
    cg: CgSettings,
) -> Result<WeakformStudy> {
    let in_plane_modes = Discretization::new(in_plane.m, in_plane.n, 3, params.h)?.modes();
    let mut modes = vec![0];
    if in_plane_modes > 1 {
        modes.push(in_plane_modes - 1);
    }
    let bank = TestBank::standard(&modes);
    let modes: Vec<usize> = (0..in_plane_modes).collect();
    let time_bank = TestBank {
        plate: vec![],
        pressure: modes
            .iter()
            .flat_map(|&mode| {
                [TimeProfile::Quadratic, TimeProfile::Cosine].map(|time| quasistatic::PressureTest {
                    mode,
                    time,
                    profile: TransverseProfile::Linear,
                })
            })
            .collect(),
    };
    let space_bank = TestBank {
        plate: vec![],
        pressure: modes
            .iter()
            .flat_map(|&mode| {
                [TransverseProfile::Cosine, TransverseProfile::Cubic].map(|profile| quasistatic::PressureTest {
                    mode,
                    time: TimeProfile::Linear,
                    profile,
                })
            })
            .collect(),
    };
    let solve = |tau: f64, n3: usize| -> Result<(OperatorContext, quasistatic::QSRun)> {
        let disc = Discretization::new(in_plane.m, in_plane.n, n3, params.h)?;
        let ctx = OperatorContext::new(params, disc, permeability.clone())?.with_cg(cg);
        let init = InitialData::FluidContent(data.initial_fluid_content(&ctx.disc));
        let run = quasistatic::run(&ctx, &init, &data.sources(&ctx.disc), t_final, tau, SourcePath::Direct)?;
        Ok((ctx, run))
    };
    let mut rows = Vec::new();
    for &(tau, n3) in ladder {
        let (ctx, run) = solve(tau, n3)?;
        let report = weak_residual(&ctx, &run, &bank)?;
        rows.push((tau, n3, report.max_plate(), report.max_pressure()));
    }
    // Per-test residual histories; time order at the finest N3 with tau
    // varying, space order at the finest tau with N3 varying.
    let n3_max = ladder.iter().map(|r| r.1).max().unwrap_or(9);
    let tau_min = ladder.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let mut time_res: Vec<Vec<f64>> = Vec::new();
    let mut space_res: Vec<Vec<f64>> = Vec::new();
    for &(tau, _) in ladder {
        let (ctx, run) = solve(tau, n3_max)?;
        time_res.push(weak_residual(&ctx, &run, &time_bank)?.pressure);
    }
    for &(_, n3) in ladder {
        let (ctx, run) = solve(tau_min, n3)?;
        space_res.push(weak_residual(&ctx, &run, &space_bank)?.pressure);
    }
    // Individual residuals are signed and can cross zero on coarse rungs, so
    // the orders are fitted to the root-mean-square over the bank.
    let fitted = |steps: Vec<f64>, res: &[Vec<f64>]| {
        let x: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
        let y: Vec<f64> = res
            .iter()
            .map(|r| (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt().ln())
            .collect();
        manufactured::least_squares_slope(&x, &y)
    };
    let time_order = fitted(ladder.iter().map(|r| r.0).collect(), &time_res);
    let space_order = fitted(ladder.iter().map(|r| 2.0 * params.h / (r.1 as f64 - 1.0)).collect(), &space_res);
    Ok(WeakformStudy {
        rows,
        time_order,
        space_order,
    })
}

/// Ladder used by the weak-form and stability suites.
pub const REFINEMENT_LADDER: [(f64, usize); 4] = [(0.1, 9), (0.05, 17), (0.025, 33), (0.0125, 65)];

/// Ladder of the stability suite: one level finer than
/// [`REFINEMENT_LADDER`] so that the first rung resolves the fastest
/// transverse transient of the smooth data.
pub const STABILITY_LADDER: [(f64, usize); 4] = [(0.05, 17), (0.025, 33), (0.0125, 65), (0.00625, 129)];

/// Constant in `residual <= C (tau + N3^-2)`.
pub const WEAKFORM_CONSTANT: f64 = 1.0;

fn suite_weakform(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let data = SmoothData::random(cfg.seed);
    let grid = GridSpec::new(cfg.grid.m.min(2), cfg.grid.n.min(2), 0);
    let study = weakform_study(cfg.params, &cfg.permeability, grid, &REFINEMENT_LADDER, 1.0, &data, cfg.cg)?;
    let mut r = SuiteReport::default();
    let plate = study.rows.iter().map(|row| row.2).fold(0.0, f64::max);
    r.at_most("weakform", "plate_identity", plate, 1e-10);
    let worst_scaled = study
        .rows
        .iter()
        .map(|&(tau, n3, _, res)| res / (tau + 1.0 / (n3 * n3) as f64))
        .fold(0.0, f64::max);
    r.at_most("weakform", "pressure_scaled_residual", worst_scaled, WEAKFORM_CONSTANT);
    let decreasing = study.rows.windows(2).all(|w| w[1].3 < w[0].3);
    r.push("weakform", "pressure_decreasing", decreasing, study.rows.last().map_or(0.0, |x| x.3), study.rows[0].3);
    r.at_least("weakform", "time_order", study.time_order, 0.8);
    r.at_least("weakform", "space_order", study.space_order, 1.8);
    for (tau, n3, pl, pr) in &study.rows {
        r.notes.push(format!("weakform tau={tau} N3={n3} plate={pl:.3e} pressure={pr:.3e}"));
    }
    Ok(r)
}

fn suite_stability(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let data = SmoothData::random(cfg.seed);
    let grid = GridSpec::new(cfg.grid.m.min(2), cfg.grid.n.min(2), 0);
    let ladder = stability_ladder(cfg.params, &cfg.permeability, grid, &STABILITY_LADDER, 1.0, &data, cfg.cg)?;
    let mut r = SuiteReport::default();
    r.at_most("stability", "ratio_band", ladder.band(), 2.0);
    r.push("stability", "ratio_finite", ladder.sup().is_finite(), ladder.sup(), f64::INFINITY);
    for (tau, n3, s) in &ladder.rungs {
        r.notes.push(format!("stability tau={tau} N3={n3} lhs={:.6e} rhs={:.6e} ratio={:.6e}", s.lhs, s.rhs, s.ratio));
    }
    Ok(r)
}

/// Agreement of runs from `d0` and from `p(0) = (c_p I + B)^{-1} d0`, and
/// the norm sandwich `c ||d0|| <= ||p(0)|| <= ||d0|| / c_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialEquivalence {
    pub trajectory_difference: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
}

pub fn initial_equivalence(ctx: &OperatorContext, d0: &PressureField, sources: &SourceTerms, t_final: f64, tau: f64) -> Result<InitialEquivalence> {
    let from_d0 = quasistatic::run(ctx, &InitialData::FluidContent(d0.clone()), sources, t_final, tau, SourcePath::Direct)?;
    // With a plate load the imposed datum is d0 + alpha K~ Delta_D w_f(0).
    let zero_moment = ctx.disc.zero_plate(PlateRole::Moment);
    let w_f0 = ctx.solve_plate(&zero_moment, &sources.plate_load(&ctx.disc, 0.0));
    let mut shifted = ctx.disc.to_modal(d0);
    shifted.axpy(ctx.params.alpha, &ctx.lift_laplacian(&w_f0));
    let p0 = invert_fluid_content_direct(ctx, &shifted);
    let from_p0 = quasistatic::run(ctx, &InitialData::Pressure(p0.clone()), sources, t_final, tau, SourcePath::Direct)?;
    let mut diff = 0.0f64;
    for (a, b) in from_d0.states.iter().zip(&from_p0.states) {
        diff = diff.max(rel_diff(ctx, &a.p, &b.p));
    }
    let disc = &ctx.disc;
    let h = ctx.params.h;
    let c = 1.0 / (ctx.params.c_p + ctx.beta() * 2.0 * h.powi(3) / 3.0 + 1e-9);
    let (nd, np) = (disc.l2_norm(d0), disc.l2_norm(&invert_fluid_content_direct(ctx, d0)));
    Ok(InitialEquivalence {
        trajectory_difference: diff,
        lower_margin: np - c * nd,
        upper_margin: nd / ctx.params.c_p - np,
    })
}

/// `(c_p I + beta x3 m^T)^{-1}` per column by the Sherman-Morrison formula:
/// `p = d / c_p - beta x3 (m . d) / (c_p (c_p + beta m . x3))`.
pub fn invert_fluid_content_direct(ctx: &OperatorContext, d: &PressureField) -> PressureField {
    let grid = &ctx.disc.grid;
    let (c, beta) = (ctx.params.c_p, ctx.beta());
    let denom = c * (c + beta * grid.second_moment());
    let mut p = ctx.disc.to_modal(d);
    for k in 0..p.in_plane_len() {
        let md = grid.moment(p.column(k));
        for (v, x) in p.column_mut(k).iter_mut().zip(grid.nodes()) {
            *v = *v / c - beta * x * md / denom;
        }
    }
    p
}

fn suite_initial(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let ctx = cfg.context()?;
    let data = SmoothData::random(cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(5));
    let mut r = SuiteReport::default();
    let mut worst = 0.0f64;
    let mut lower = f64::INFINITY;
    let mut upper = f64::INFINITY;
    for trial in 0..4 {
        let d0 = if trial == 0 { data.initial_fluid_content(&ctx.disc) } else { random_pressure(&ctx.disc, &mut rng) };
        let eq = initial_equivalence(&ctx, &d0, &data.sources(&ctx.disc), cfg.t_final, cfg.tau)?;
        worst = worst.max(eq.trajectory_difference);
        lower = lower.min(eq.lower_margin);
        upper = upper.min(eq.upper_margin);
    }
    r.at_most("initial", "trajectory_agreement", worst, 10.0 * cfg.cg.tol);
    r.at_least("initial", "sandwich_lower_margin", lower, 0.0);
    r.at_least("initial", "sandwich_upper_margin", upper, 0.0);
    Ok(r)
}

fn suite_translation(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let ctx = cfg.context()?;
    let data = SmoothData::random(cfg.seed);
    let init = InitialData::FluidContent(data.initial_fluid_content(&ctx.disc));
    let sources = data.sources(&ctx.disc);
    let a = quasistatic::run(&ctx, &init, &sources, cfg.t_final, cfg.tau, SourcePath::Direct)?;
    let b = quasistatic::run(&ctx, &init, &sources, cfg.t_final, cfg.tau, SourcePath::Translated)?;
    let mut dp = 0.0f64;
    let mut dw = 0.0f64;
    for (x, y) in a.states.iter().zip(&b.states) {
        dp = dp.max(rel_diff(&ctx, &y.p, &x.p));
        let mut d = y.w.clone();
        d.axpy(-1.0, &x.w);
        dw = dw.max(d.l2_norm() / x.w.l2_norm().max(f64::MIN_POSITIVE));
    }
    let mut r = SuiteReport::default();
    r.at_most("translation", "pressure_agreement", dp, 10.0 * cfg.cg.tol);
    r.at_most("translation", "plate_agreement", dw, 10.0 * cfg.cg.tol);
    Ok(r)
}

fn suite_linearity(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let ctx = cfg.context()?;
    let (x, y) = (SmoothData::random(cfg.seed), SmoothData::random(cfg.seed.wrapping_add(17)));
    let (a, b) = (0.7, -1.3);
    let disc = &ctx.disc;
    let run = |d0: PressureField, sources: SourceTerms| quasistatic::run(&ctx, &InitialData::FluidContent(d0), &sources, cfg.t_final, cfg.tau, SourcePath::Direct);
    let rx = run(x.initial_fluid_content(disc), x.sources(disc))?;
    let ry = run(y.initial_fluid_content(disc), y.sources(disc))?;
    let mut d0 = x.initial_fluid_content(disc).scaled(a);
    d0.axpy(b, &y.initial_fluid_content(disc));
    let (xs, ys, dd) = (x.clone(), y.clone(), disc.clone());
    let (xg, yg, dg) = (x, y, disc.clone());
    let sources = SourceTerms::zero()
        .with_f(
            move |t| {
                let mut f = xs.plate_load(&dd, t);
                f.scale(a);
                f.axpy(b, &ys.plate_load(&dd, t));
                f
            },
            true,
        )
        .with_g(move |t| {
            let mut g = xg.fluid_source(&dg, t).scaled(a);
            g.axpy(b, &yg.fluid_source(&dg, t));
            g
        });
    let rc = run(d0, sources)?;
    let mut worst = 0.0f64;
    for ((sx, sy), sc) in rx.states.iter().zip(&ry.states).zip(&rc.states) {
        let mut combo = sx.p.scaled(a);
        combo.axpy(b, &sy.p);
        worst = worst.max(rel_diff(&ctx, &sc.p, &combo));
    }
    let mut r = SuiteReport::default();
    r.at_most("linearity", "superposition", worst, 100.0 * cfg.cg.tol);
    Ok(r)
}

fn suite_determinism(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let ctx = cfg.context()?;
    let data = SmoothData::random(cfg.seed);
    let init = InitialData::FluidContent(data.initial_fluid_content(&ctx.disc));
    let runs: Vec<_> = (0..2)
        .map(|_| quasistatic::run(&ctx, &init, &data.sources(&ctx.disc), cfg.t_final, cfg.tau, SourcePath::Direct))
        .collect::<Result<_>>()?;
    let identical = runs[0]
        .states
        .iter()
        .zip(&runs[1].states)
        .all(|(a, b)| a.p.values == b.p.values && a.w.coeffs == b.w.coeffs);
    // Perturbation of d0 by delta moves the trajectory by O(delta).
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(6));
    let delta = 1e-6;
    let mut pert = random_pressure(&ctx.disc, &mut rng);
    pert.scale(delta / ctx.disc.l2_norm(&pert));
    let mut d0 = data.initial_fluid_content(&ctx.disc);
    d0.axpy(1.0, &pert);
    let moved = quasistatic::run(&ctx, &InitialData::FluidContent(d0), &data.sources(&ctx.disc), cfg.t_final, cfg.tau, SourcePath::Direct)?;
    let mut change = 0.0;
    for (a, b) in runs[0].states[1..].iter().zip(&moved.states[1..]) {
        let mut d = b.p.clone();
        d.axpy(-1.0, &a.p);
        change += cfg.tau * ctx.disc.v_norm_sq(&d);
    }
    // Homogeneous energy estimate: sum tau ||p||_V^2 <= (T / c_p^2 + 1 / (2 c_p k_*)) ||delta||^2.
    let c = ctx.params.c_p;
    let bound = (cfg.t_final / (c * c) + 1.0 / (2.0 * c * cfg.permeability.k_lower)).sqrt();
    let mut r = SuiteReport::default();
    r.push("determinism", "bitwise_identical", identical, if identical { 0.0 } else { 1.0 }, 0.0);
    r.at_most("determinism", "perturbation_gain", change.sqrt() / delta, bound);
    Ok(r)
}

fn smooth_inertial_state(disc: &Discretization, t: f64) -> InertialState {
    // Coefficients decaying like lambda^-3 (w), lambda^-2 (v, p).
    let mut y = InertialState::zeros(disc, t);
    let lam = disc.basis.eigenvalues();
    for (k, &l) in lam.iter().enumerate() {
        let (m, n) = disc.basis.mode_of(k);
        let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
        y.w.coeffs[k] = sign * 1e3 / l.powi(3);
        y.v.coeffs[k] = 1e2 / (l * l);
        for (v, x) in y.p.column_mut(k).iter_mut().zip(disc.grid.nodes()) {
            *v = 1e2 * (1.0 + x) / (l * l);
        }
    }
    y
}

fn suite_boundary(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let mut smooth = Vec::new();
    let mut rough = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(7));
    let mut params = cfg.params;
    if params.rho_p <= 0.0 {
        params.rho_p = 1.0;
    }
    for m in [4usize, 8, 16] {
        let disc = Discretization::new(m, m, cfg.grid.n3, params.h)?;
        let ictx = InertialContext::new(params, disc, PermeabilityModel::constant(1.0))?;
        smooth.push(inertial::boundary_condition_check(&ictx, &smooth_inertial_state(ictx.disc(), 0.0)).tail_norm_sq);
        rough.push(inertial::boundary_condition_check(&ictx, &random_inertial(ictx.disc(), &mut rng, 0.0)).tail_norm_sq);
    }
    let mut r = SuiteReport::default();
    let drift = (smooth[2] - smooth[1]).abs() / smooth[1];
    r.at_most("boundary", "smooth_tail_refinement_drift", drift, 0.1);
    r.notes.push(format!("boundary rough-data tail norms (M=4,8,16): {:.3e} {:.3e} {:.3e}", rough[0], rough[1], rough[2]));
    Ok(r)
}

/// Distance between inertial and quasi-static pressure trajectories,
/// `max_n ||p_inertial - p_qs|| / max_n ||p_qs||`, for each `rho_p`.
pub fn quasistatic_limit(cfg: &VerifyConfig, rhos: &[f64]) -> Result<Vec<(f64, f64)>> {
    let ctx = cfg.context()?;
    let data = SmoothData::random(cfg.seed).with_scale(1.0, 0.0, 1.0);
    let d0 = data.initial_fluid_content(&ctx.disc);
    let sources = data.sources(&ctx.disc);
    let qs = quasistatic::run(&ctx, &InitialData::FluidContent(d0.clone()), &sources, cfg.t_final, cfg.tau, SourcePath::Direct)?;
    let scale = qs.states.iter().map(|s| ctx.disc.l2_norm(&s.p)).fold(0.0, f64::max);
    let mut out = Vec::new();
    for &rho in rhos {
        let mut params = cfg.params;
        params.rho_p = rho;
        let ictx = InertialContext::new(params, ctx.disc.clone(), cfg.permeability.clone())?;
        let init = InitialData::Inertial {
            w0: qs.states[0].w.clone(),
            w1: ctx.disc.zero_plate(PlateRole::Velocity),
            d0: d0.clone(),
            convention: InertialPressureConvention::FromDisplacement,
        };
        let y0 = ictx.initial_state(&init)?;
        let run = inertial::run_inertial(&ictx, &y0, &sources, cfg.t_final, cfg.tau, InertialScheme::BackwardEuler)?;
        let mut worst = 0.0f64;
        for (phys, q) in run.physical_states().iter().zip(&qs.states) {
            let mut d = phys.p.clone();
            d.axpy(-1.0, &q.p);
            worst = worst.max(ctx.disc.l2_norm(&d));
        }
        out.push((rho, worst / scale));
    }
    Ok(out)
}

fn suite_limit(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let rhos = [1.0, 1e-2, 1e-4, 1e-6];
    let distances = quasistatic_limit(cfg, &rhos)?;
    let mut r = SuiteReport::default();
    for (rho, d) in &distances {
        r.notes.push(format!("limit rho_p={rho:e} relative distance to quasi-static {d:.6e}"));
    }
    let first = distances[0].1;
    let last = distances[distances.len() - 1].1;
    r.at_most("limit", "final_over_initial_distance", last / first.max(f64::MIN_POSITIVE), 1.0);
    Ok(r)
}

/// Mode (1,1), `sigma = 1`, `k = 1` manufactured ladders.
pub fn manufactured_ladders(params: PhysicalParams, cg: CgSettings) -> Result<(ConvergenceTable, ConvergenceTable)> {
    let case = make_manufactured_qs(params, (1, 1), 1.0, &PermeabilityModel::constant(1.0))?;
    let time = convergence_study(
        &case,
        &[(1.0 / 20.0, 129), (1.0 / 40.0, 129), (1.0 / 80.0, 129), (1.0 / 160.0, 129)],
        Refinement::Time,
        (1, 1),
        1.0,
        cg,
    )?;
    let space = convergence_study(&case, &[(1e-4, 9), (1e-4, 17), (1e-4, 33), (1e-4, 65)], Refinement::Space, (1, 1), 1.0, cg)?;
    Ok((time, space))
}

fn suite_convergence(cfg: &VerifyConfig) -> Result<SuiteReport> {
    let (time, space) = manufactured_ladders(cfg.params, CgSettings::with_tol(cfg.cg.tol.min(1e-12)))?;
    Ok(convergence_checks(&time, &space))
}

/// Observed orders of the time and space ladders against 1 and 2, with a
/// tolerance of 0.2.
pub fn convergence_checks(time: &ConvergenceTable, space: &ConvergenceTable) -> SuiteReport {
    let mut r = SuiteReport::default();
    r.at_most("convergence", "time_order_p_error", (time.p_order - 1.0).abs(), 0.2);
    r.at_most("convergence", "time_order_w_error", (time.w_order - 1.0).abs(), 0.2);
    r.at_most("convergence", "space_order_p_error", (space.p_order - 2.0).abs(), 0.2);
    r.at_most("convergence", "space_order_w_error", (space.w_order - 2.0).abs(), 0.2);
    r.notes.push(format!("time ladder orders p={:.4} w={:.4}", time.p_order, time.w_order));
    r.notes.push(format!("space ladder orders p={:.4} w={:.4}", space.p_order, space.w_order));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> VerifyConfig {
        let mut cfg = VerifyConfig::new(
            PhysicalParams::new(1.0, 1.0, 1.0, 0.0, 0.5),
            GridSpec::new(2, 2, 9),
            PermeabilityModel::sin_in_time(1.0, 0.5, 1.0),
        );
        cfg.energy_steps = 50;
        cfg
    }

    #[test]
    fn check_line_grammar() {
        let c = Check {
            suite: "energy".into(),
            name: "x".into(),
            passed: true,
            value: 0.5,
            bound: 1.0,
        };
        assert_eq!(c.to_string(), "CHECK energy.x PASS 5.000000e-1 1.000000e0");
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(run_suite("nope", &tiny()).is_err());
    }

    #[test]
    fn fast_suites_pass_on_tiny_grid() {
        let cfg = tiny();
        for name in ["permeability", "operators", "coercivity", "oracle", "energy", "dissipativity", "resolvent", "initial", "translation", "linearity", "determinism"] {
            let report = run_suite(name, &cfg).unwrap();
            assert!(report.passed(), "{report}");
        }
    }
}
