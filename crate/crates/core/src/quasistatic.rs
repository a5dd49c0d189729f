//! Backward-Euler integration of the quasi-static system as the implicit
//! Cauchy problem `[(c_p I + B) p]_t + A(t) p = g`.
//!
//! Each step solves `(c_p I + B + tau A(t_{n+1})) p_{n+1} = rhs` by
//! preconditioned CG and reconstructs the plate from the modal plate
//! equation. The plate load enters either directly through the fluid
//! content `zeta = c_p p - alpha x3 Delta w` (default), or through the
//! translation `w = u + w_f`, `w_f = (D E)^{-1} f`.

use crate::discretization::{PlateField, PlateRole, PressureField, PressureLayout};
use crate::error::{Error, Result};
use crate::model::{InitialData, SourceTerms};
use crate::operators::{CgOutcome, OperatorContext, Pencil};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourcePath {
    /// Plate load inside every plate solve.
    #[default]
    Direct,
    /// Translate the load into corrected fluid source and initial datum.
    Translated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DifferenceScheme {
    /// `(w_f(t_n) - w_f(t_{n-1})) / tau`; matches backward Euler exactly.
    #[default]
    Backward,
    /// Second-order central differences (one-sided at the ends).
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    /// `((c_p I + B) p, p)`.
    pub energy: f64,
    /// `(A(t) p, p)`.
    pub dissipation: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub plate_residual: f64,
}

#[derive(Debug, Clone)]
pub struct QSState {
    pub t: f64,
    /// Modal layout.
    pub p: PressureField,
    pub w: PlateField,
    /// Fluid content in collocation layout.
    pub zeta: PressureField,
    pub diagnostics: StepDiagnostics,
}

/// Discrete data norms entering the stability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DataNorms {
    /// `sum tau (||f_n||^2_{W'} + ||(f_n - f_{n-1})/tau||^2_{W'})`.
    pub f_h1_sq: f64,
    /// `sum tau ||g_n||^2_{V'}`.
    pub g_l2_sq: f64,
    /// `||d0||^2`.
    pub d0_sq: f64,
}

impl DataNorms {
    pub fn total(&self) -> f64 {
        self.f_h1_sq + self.g_l2_sq + self.d0_sq
    }
}

#[derive(Debug, Clone)]
pub struct QSRun {
    pub tau: f64,
    pub states: Vec<QSState>,
    /// Fluid-content datum actually imposed.
    pub d0: PressureField,
    /// Sampled sources at every state time.
    pub f_samples: Vec<PlateField>,
    pub g_samples: Vec<PressureField>,
    pub data_norms: DataNorms,
    pub path: SourcePath,
}

impl QSRun {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn final_state(&self) -> &QSState {
        self.states.last().expect("run has at least the initial state")
    }

    /// `sum_{n>=1} tau ||p_n||_V^2`.
    pub fn pressure_l2v_sq(&self, ctx: &OperatorContext) -> f64 {
        self.states[1..].iter().map(|s| self.tau * ctx.disc.v_norm_sq(&s.p)).sum()
    }

    /// `sum_{n>=1} tau ||w_n||_W^2`.
    pub fn plate_l2w_sq(&self, ctx: &OperatorContext) -> f64 {
        self.states[1..]
            .iter()
            .map(|s| self.tau * s.w.w_norm(&ctx.disc.basis).powi(2))
            .sum()
    }

    pub fn total_cg_iterations(&self) -> usize {
        self.states.iter().map(|s| s.diagnostics.cg_iterations).sum()
    }
}

/// Result of moving the plate load into the pressure equation.
#[derive(Debug, Clone)]
pub struct Translation {
    /// `w_f(t_n) = (D E)^{-1} f(t_n)`.
    pub w_f: Vec<PlateField>,
    /// `alpha K~ Delta_D (d/dt) w_f` at each sample time.
    pub g_correction: Vec<PressureField>,
    /// `alpha K~ Delta_D w_f(0)`, added to `d0`.
    pub d0_correction: PressureField,
}

/// Computes the translation of a plate load sampled at uniform times.
pub fn translate_source(
    ctx: &OperatorContext,
    f: &[PlateField],
    tau: f64,
    f_time_regularity: bool,
    scheme: DifferenceScheme,
) -> Result<Translation> {
    if !f_time_regularity {
        return Err(Error::Regularity("translation needs a plate load with a time derivative".into()));
    }
    let needed = match scheme {
        DifferenceScheme::Backward => 2,
        DifferenceScheme::Central => 3,
    };
    if f.len() < needed {
        return Err(Error::Regularity(format!(
            "need at least {needed} load samples for differencing, got {}",
            f.len()
        )));
    }
    let zero_moment = ctx.disc.zero_plate(PlateRole::Moment);
    let w_f: Vec<PlateField> = f.iter().map(|fv| ctx.solve_plate(&zero_moment, fv)).collect();
    let n = w_f.len();
    let diff = |a: usize, b: usize, scale: f64| -> PlateField {
        let mut d = w_f[a].clone();
        d.axpy(-1.0, &w_f[b]);
        d.scale(scale);
        d
    };
    let rates: Vec<PlateField> = (0..n)
        .map(|i| match scheme {
            DifferenceScheme::Backward => {
                if i == 0 {
                    diff(1, 0, 1.0 / tau)
                } else {
                    diff(i, i - 1, 1.0 / tau)
                }
            }
            DifferenceScheme::Central => {
                if i == 0 {
                    let mut d = w_f[0].clone();
                    d.scale(-3.0);
                    d.axpy(4.0, &w_f[1]);
                    d.axpy(-1.0, &w_f[2]);
                    d.scale(0.5 / tau);
                    d
                } else if i == n - 1 {
                    let mut d = w_f[n - 1].clone();
                    d.scale(3.0);
                    d.axpy(-4.0, &w_f[n - 2]);
                    d.axpy(1.0, &w_f[n - 3]);
                    d.scale(0.5 / tau);
                    d
                } else {
                    diff(i + 1, i - 1, 0.5 / tau)
                }
            }
        })
        .collect();
    let alpha = ctx.params.alpha;
    let g_correction = rates.iter().map(|r| ctx.lift_laplacian(r).scaled(alpha)).collect();
    let d0_correction = ctx.lift_laplacian(&w_f[0]).scaled(alpha);
    Ok(Translation {
        w_f,
        g_correction,
        d0_correction,
    })
}

fn diagnostics_for(ctx: &OperatorContext, p: &PressureField, t: f64, outcome: CgOutcome, plate_residual: f64) -> Result<StepDiagnostics> {
    let stiff = ctx.stiffness_at(t)?;
    Ok(StepDiagnostics {
        energy: ctx.disc.dot(&ctx.apply_fluid_content(p), p),
        dissipation: ctx.a_form(&stiff, p, p),
        cg_iterations: outcome.iterations,
        cg_residual: outcome.residual,
        plate_residual,
    })
}

fn assemble_state(
    ctx: &OperatorContext,
    t: f64,
    p: PressureField,
    w: PlateField,
    f: &PlateField,
    outcome: CgOutcome,
) -> Result<QSState> {
    let kp = ctx.disc.moment(&p);
    let plate_residual = ctx.plate_residual(&w, &kp, f);
    let zeta = ctx.disc.to_collocation(&ctx.fluid_content(&p, &w));
    let diagnostics = diagnostics_for(ctx, &p, t, outcome, plate_residual)?;
    Ok(QSState {
        t,
        p,
        w,
        zeta,
        diagnostics,
    })
}

/// Builds the state at `t` from a pressure field with the plate load `f`.
pub fn state_from_pressure(ctx: &OperatorContext, t: f64, p: PressureField, f: &PlateField) -> Result<QSState> {
    ctx.disc.check_layout(&p)?;
    let p = ctx.disc.to_modal(&p);
    let w = ctx.solve_plate(&ctx.disc.moment(&p), f);
    assemble_state(ctx, t, p, w, f, CgOutcome { iterations: 0, residual: 0.0 })
}

fn check_step(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Step(format!("time step must be positive, got {tau}")));
    }
    Ok(())
}

/// One backward-Euler step with the plate load included directly:
/// `(c_p I + B + tau A) p_{n+1} = zeta_n + alpha K~ Delta_D w_f(t_{n+1}) + tau g_{n+1}`.
pub fn step(ctx: &OperatorContext, state: &QSState, tau: f64, g_next: &PressureField, f_next: &PlateField) -> Result<QSState> {
    check_step(tau)?;
    let t = state.t + tau;
    let zero_moment = ctx.disc.zero_plate(PlateRole::Moment);
    let w_f = ctx.solve_plate(&zero_moment, f_next);
    let mut rhs = ctx.disc.to_modal(&state.zeta);
    rhs.axpy(ctx.params.alpha, &ctx.lift_laplacian(&w_f));
    rhs.axpy(tau, &ctx.disc.to_modal(g_next));
    let stiff = ctx.stiffness_at(t)?;
    let pencil = Pencil::quasistatic(ctx, Some(stiff), tau);
    let (p, outcome) = pencil.solve_from(&rhs, Some(&state.p), ctx.cg)?;
    let w = ctx.solve_plate(&ctx.disc.moment(&p), f_next);
    assemble_state(ctx, t, p, w, f_next, outcome)
}

/// One step of the translated (`f = 0`) problem:
/// `(c_p I + B + tau A) p_{n+1} = (c_p I + B) p_n + tau (g_{n+1} + correction)`,
/// with `w = u + w_f`.
pub fn step_translated(
    ctx: &OperatorContext,
    state: &QSState,
    tau: f64,
    g_corrected: &PressureField,
    w_f_next: &PlateField,
    f_next: &PlateField,
) -> Result<QSState> {
    check_step(tau)?;
    let t = state.t + tau;
    let mut rhs = ctx.apply_fluid_content(&state.p);
    rhs.axpy(tau, &ctx.disc.to_modal(g_corrected));
    let stiff = ctx.stiffness_at(t)?;
    let pencil = Pencil::quasistatic(ctx, Some(stiff), tau);
    let (p, outcome) = pencil.solve_from(&rhs, Some(&state.p), ctx.cg)?;
    let mut w = ctx.solve_plate(&ctx.disc.moment(&p), &ctx.disc.zero_plate(PlateRole::Load));
    w.axpy(1.0, w_f_next);
    assemble_state(ctx, t, p, w, f_next, outcome)
}

/// Number of uniform steps of size `tau` covering `[0, t_final]`.
pub fn step_count(t_final: f64, tau: f64) -> Result<usize> {
    check_step(tau)?;
    if !(t_final > 0.0) {
        return Err(Error::Step(format!("final time must be positive, got {t_final}")));
    }
    let steps = (t_final / tau).round();
    if steps < 1.0 || ((steps * tau - t_final) / t_final).abs() > 1e-9 {
        return Err(Error::Step(format!("tau = {tau} does not divide T = {t_final}")));
    }
    Ok(steps as usize)
}

/// Integrates on `[0, t_final]` with uniform step `tau`.
pub fn run(
    ctx: &OperatorContext,
    init: &InitialData,
    sources: &SourceTerms,
    t_final: f64,
    tau: f64,
    path: SourcePath,
) -> Result<QSRun> {
    ctx.params.require_quasistatic()?;
    let steps = step_count(t_final, tau)?;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * tau).collect();
    sources.check_finite(&ctx.disc, &times)?;
    let f_samples: Vec<PlateField> = times.iter().map(|&t| sources.plate_load(&ctx.disc, t)).collect();
    let g_samples: Vec<PressureField> = times
        .iter()
        .map(|&t| ctx.disc.to_modal(&sources.fluid_source(&ctx.disc, t)))
        .collect();

    let zero_moment = ctx.disc.zero_plate(PlateRole::Moment);
    let w_f0 = ctx.solve_plate(&zero_moment, &f_samples[0]);
    // (c_p I + B) p(0) = d0 + alpha K~ Delta_D w_f(0)
    let load_shift = ctx.lift_laplacian(&w_f0).scaled(ctx.params.alpha);
    let (p0, d0, outcome0) = match init {
        InitialData::FluidContent(d0) => {
            ctx.disc.check_layout(d0)?;
            let d0 = ctx.disc.to_modal(d0);
            let mut target = d0.clone();
            target.axpy(1.0, &load_shift);
            let (p0, outcome) = ctx.invert_fluid_content(&target, ctx.cg)?;
            (p0, d0, outcome)
        }
        InitialData::Pressure(p0) => {
            ctx.disc.check_layout(p0)?;
            let p0 = ctx.disc.to_modal(p0);
            let mut d0 = ctx.apply_fluid_content(&p0);
            d0.axpy(-1.0, &load_shift);
            (p0, d0, CgOutcome { iterations: 0, residual: 0.0 })
        }
        InitialData::Inertial { .. } => {
            return Err(Error::InvalidParams("inertial initial data passed to the quasi-static solver".into()))
        }
    };

    let w0 = ctx.solve_plate(&ctx.disc.moment(&p0), &f_samples[0]);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(assemble_state(ctx, 0.0, p0, w0, &f_samples[0], outcome0)?);

    match path {
        SourcePath::Direct => {
            for n in 0..steps {
                let next = step(ctx, &states[n], tau, &g_samples[n + 1], &f_samples[n + 1])?;
                states.push(next);
            }
        }
        SourcePath::Translated => {
            let has_load = sources.f.is_some();
            let translation = if has_load {
                Some(translate_source(ctx, &f_samples, tau, sources.f_time_regularity, DifferenceScheme::Backward)?)
            } else {
                None
            };
            for n in 0..steps {
                let (g, w_f) = match &translation {
                    Some(tr) => {
                        let mut g = g_samples[n + 1].clone();
                        g.axpy(1.0, &tr.g_correction[n + 1]);
                        (g, tr.w_f[n + 1].clone())
                    }
                    None => (g_samples[n + 1].clone(), ctx.disc.zero_plate(PlateRole::Displacement)),
                };
                let next = step_translated(ctx, &states[n], tau, &g, &w_f, &f_samples[n + 1])?;
                states.push(next);
            }
        }
    }

    let data_norms = data_norms(ctx, &f_samples, &g_samples, &d0, tau);
    Ok(QSRun {
        tau,
        states,
        d0,
        f_samples,
        g_samples,
        data_norms,
        path,
    })
}

pub fn data_norms(
    ctx: &OperatorContext,
    f: &[PlateField],
    g: &[PressureField],
    d0: &PressureField,
    tau: f64,
) -> DataNorms {
    let basis = &ctx.disc.basis;
    let mut f_h1_sq = 0.0;
    for n in 1..f.len() {
        let mut diff = f[n].clone();
        diff.axpy(-1.0, &f[n - 1]);
        diff.scale(1.0 / tau);
        f_h1_sq += tau * (f[n].w_dual_norm(basis).powi(2) + diff.w_dual_norm(basis).powi(2));
    }
    let g_l2_sq = g[1..].iter().map(|gn| tau * ctx.disc.v_dual_norm_sq(gn)).sum();
    DataNorms {
        f_h1_sq,
        g_l2_sq,
        d0_sq: ctx.disc.dot(d0, d0),
    }
}

/// Per-step energy defect for unforced runs:
/// `1/2 ||p_{n+1}||^2_{c+B} - 1/2 ||p_n||^2_{c+B} + tau (A p_{n+1}, p_{n+1})`,
/// which backward Euler keeps `<= 0`.
pub fn energy_defects(run: &QSRun) -> Vec<f64> {
    run.states
        .windows(2)
        .map(|s| 0.5 * s[1].diagnostics.energy - 0.5 * s[0].diagnostics.energy + run.tau * s[1].diagnostics.dissipation)
        .collect()
}

/// Temporal profile of a test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeProfile {
    /// `T - t`
    Linear,
    /// `(T - t)^2`
    Quadratic,
    /// `cos(pi t / (2T))`
    Cosine,
}

impl TimeProfile {
    pub fn value(&self, t: f64, t_final: f64) -> f64 {
        match self {
            TimeProfile::Linear => t_final - t,
            TimeProfile::Quadratic => (t_final - t).powi(2),
            TimeProfile::Cosine => (std::f64::consts::FRAC_PI_2 * t / t_final).cos(),
        }
    }

    pub fn derivative(&self, t: f64, t_final: f64) -> f64 {
        match self {
            TimeProfile::Linear => -1.0,
            TimeProfile::Quadratic => -2.0 * (t_final - t),
            TimeProfile::Cosine => -std::f64::consts::FRAC_PI_2 / t_final * (std::f64::consts::FRAC_PI_2 * t / t_final).sin(),
        }
    }
}

/// Transverse profile of a pressure test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransverseProfile {
    /// `x3`
    Linear,
    /// `x3^3`
    Cubic,
    /// `cos(pi (x3 + h) / (2h))`
    Cosine,
}

impl TransverseProfile {
    pub fn value(&self, x3: f64, h: f64) -> f64 {
        match self {
            TransverseProfile::Linear => x3,
            TransverseProfile::Cubic => x3.powi(3),
            TransverseProfile::Cosine => (std::f64::consts::PI * (x3 + h) / (2.0 * h)).cos(),
        }
    }

    pub fn derivative(&self, x3: f64, h: f64) -> f64 {
        match self {
            TransverseProfile::Linear => 1.0,
            TransverseProfile::Cubic => 3.0 * x3 * x3,
            TransverseProfile::Cosine => {
                let a = std::f64::consts::PI / (2.0 * h);
                -a * (a * (x3 + h)).sin()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateTest {
    /// Flat mode index.
    pub mode: usize,
    pub time: TimeProfile,
}

/// `q(x, t) = theta(t) psi(x3) phi_mode(x1, x2)`; vanishes at `t = T` for
/// the profiles above except `Cosine`, which vanishes there as well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureTest {
    pub mode: usize,
    pub time: TimeProfile,
    pub profile: TransverseProfile,
}

#[derive(Debug, Clone, Default)]
pub struct TestBank {
    pub plate: Vec<PlateTest>,
    pub pressure: Vec<PressureTest>,
}

impl TestBank {
    /// Every combination over the given modes.
    pub fn standard(modes: &[usize]) -> Self {
        let times = [TimeProfile::Linear, TimeProfile::Quadratic, TimeProfile::Cosine];
        let profiles = [TransverseProfile::Linear, TransverseProfile::Cubic, TransverseProfile::Cosine];
        let mut bank = TestBank::default();
        for &mode in modes {
            for &time in &times {
                bank.plate.push(PlateTest { mode, time });
                for &profile in &profiles {
                    bank.pressure.push(PressureTest { mode, time, profile });
                }
            }
        }
        bank
    }
}

#[derive(Debug, Clone, Default)]
pub struct ResidualReport {
    /// Normalized residuals of the plate identity, one per plate test.
    pub plate: Vec<f64>,
    /// Normalized residuals of the pressure identity, one per pressure test.
    pub pressure: Vec<f64>,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.plate.iter().chain(&self.pressure).fold(0.0, |a, b| a.max(*b))
    }

    pub fn max_plate(&self) -> f64 {
        self.plate.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn max_pressure(&self) -> f64 {
        self.pressure.iter().fold(0.0, |a, b| a.max(*b))
    }
}

/// Evaluates both variational identities on a trajectory.
///
/// Plate identity, per test `z`:
/// `sum tau [D (Delta w, Delta z) + alpha (p, x3 Delta z) - (f, z)]`.
/// Pressure identity, per test `q` with `q(T) = 0`:
/// `sum tau (k d3 p, d3 q) - sum tau (zeta, q_t) - sum tau (g, q) - (d0, q(0))`,
/// with the `A` term using the exact `d3 q` at edge midpoints and the
/// `zeta` term on left endpoints. Each residual is divided by the sum of
/// the absolute values of its terms.
pub fn weak_residual(ctx: &OperatorContext, run: &QSRun, bank: &TestBank) -> Result<ResidualReport> {
    let tau = run.tau;
    let t_final = run.final_state().t;
    let lam = ctx.disc.basis.eigenvalues();
    let (alpha, d) = (ctx.params.alpha, ctx.params.d);
    let n_states = run.states.len();

    let mut report = ResidualReport::default();
    for test in &bank.plate {
        let l = lam[test.mode];
        let mut terms = [0.0f64; 3];
        for n in 1..n_states {
            let s = &run.states[n];
            let theta = test.time.value(s.t, t_final);
            let kp = ctx.disc.moment(&s.p).coeffs[test.mode];
            terms[0] += tau * d * l * l * s.w.coeffs[test.mode] * theta;
            terms[1] += tau * alpha * (-l) * kp * theta;
            terms[2] += tau * run.f_samples[n].coeffs[test.mode] * theta;
        }
        report.plate.push(normalized(terms[0] + terms[1] - terms[2], &terms));
    }

    let grid = &ctx.disc.grid;
    let h = grid.half_thickness();
    let basis = &ctx.disc.basis;
    let stiffs = run
        .states
        .iter()
        .map(|s| ctx.stiffness_at(s.t))
        .collect::<Result<Vec<_>>>()?;
    for test in &bank.pressure {
        let psi: Vec<f64> = grid.nodes().iter().map(|&x| test.profile.value(x, h)).collect();
        let dpsi: Vec<f64> = grid.midpoints().iter().map(|&x| test.profile.derivative(x, h)).collect();
        let mut q_modal = PlateField::zeros(ctx.disc.modes(), PlateRole::Moment);
        q_modal.coeffs[test.mode] = 1.0;
        let phi_points = basis.to_collocation(&q_modal.coeffs, 1);
        let spatial = |p: &PressureField| -> f64 { grid.dot(p.column(test.mode), &psi) };
        let a_term = |stiff: &crate::operators::Stiffness, p: &PressureField| -> f64 {
            match stiff {
                crate::operators::Stiffness::Shared(k) => {
                    let col = p.column(test.mode);
                    (0..k.len()).map(|e| k[e] * (col[e + 1] - col[e]) * dpsi[e]).sum::<f64>()
                }
                crate::operators::Stiffness::PerPoint { values, edges } => {
                    let pc = ctx.disc.to_collocation(p);
                    let mut acc = 0.0;
                    for (point, col) in pc.columns().enumerate() {
                        let k = &values[point * edges..(point + 1) * edges];
                        let s: f64 = (0..*edges).map(|e| k[e] * (col[e + 1] - col[e]) * dpsi[e]).sum();
                        acc += s * phi_points[point];
                    }
                    acc * basis.collocation_weight()
                }
            }
        };
        let mut terms = [0.0f64; 4];
        for n in 1..n_states {
            let s = &run.states[n];
            let theta = test.time.value(s.t, t_final);
            terms[0] += tau * theta * a_term(&stiffs[n], &s.p);
            terms[2] += tau * theta * spatial(&run.g_samples[n]);
        }
        for n in 0..n_states - 1 {
            let s = &run.states[n];
            let zeta = ctx.disc.to_modal(&s.zeta);
            terms[1] += tau * test.time.derivative(s.t, t_final) * spatial(&zeta);
        }
        terms[3] = test.time.value(0.0, t_final) * spatial(&run.d0);
        report
            .pressure
            .push(normalized(terms[0] - terms[1] - terms[2] - terms[3], &terms));
    }
    Ok(report)
}

fn normalized(residual: f64, terms: &[f64]) -> f64 {
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    if scale == 0.0 {
        0.0
    } else {
        residual.abs() / scale
    }
}

/// Modal-layout field check used by callers that build runs by hand.
pub fn require_modal(p: &PressureField) -> Result<()> {
    if p.layout != PressureLayout::Modal {
        return Err(Error::Layout("expected modal layout".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Discretization;
    use crate::model::{PermeabilityModel, PhysicalParams};
    use crate::operators::CgSettings;
    use std::f64::consts::PI;

    fn ctx(m: usize, n3: usize, k: PermeabilityModel) -> OperatorContext {
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 0.0, 0.5);
        OperatorContext::new(params, Discretization::new(m, m, n3, 0.5).unwrap(), k)
            .unwrap()
            .with_cg(CgSettings::with_tol(1e-12))
    }

    #[test]
    fn constant_pressure_is_steady() {
        let c = ctx(2, 9, PermeabilityModel::constant(1.0));
        let p0 = c.disc.separable_pressure(&[1.0; 4], |_| 1.0);
        let run = run(&c, &InitialData::Pressure(p0.clone()), &SourceTerms::zero(), 1.0, 0.1, SourcePath::Direct).unwrap();
        for s in &run.states {
            let mut d = s.p.clone();
            d.axpy(-1.0, &p0);
            assert!(c.disc.l2_norm(&d) < 1e-13);
        }
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let c = ctx(2, 9, PermeabilityModel::constant(1.0));
        let run = run(&c, &InitialData::FluidContent(c.disc.zero_pressure()), &SourceTerms::zero(), 0.5, 0.1, SourcePath::Direct).unwrap();
        assert_eq!(run.states.len(), 6);
        assert!(run.states.iter().all(|s| s.p.values.iter().all(|v| *v == 0.0) && s.w.coeffs.iter().all(|v| *v == 0.0)));
        let report = weak_residual(&c, &run, &TestBank::standard(&[0, 3])).unwrap();
        assert_eq!(report.max(), 0.0);
    }

    #[test]
    fn single_step_matches_dense_solve() {
        let c = ctx(1, 33, PermeabilityModel::constant(1.0));
        let h = 0.5;
        let p0 = c.disc.separable_pressure(&[1.0], |x| (PI * (x + h) / (2.0 * h)).cos());
        let tau = 1e-3;
        let zero_f = c.disc.zero_plate(PlateRole::Load);
        let s0 = state_from_pressure(&c, 0.0, p0.clone(), &zero_f).unwrap();
        let s1 = step(&c, &s0, tau, &c.disc.zero_pressure(), &zero_f).unwrap();
        let oracle = crate::operators::build_dense_oracle(&c, tau).unwrap();
        let expected = oracle.quasistatic_step(&p0, &c.disc.zero_pressure(), tau).unwrap();
        let mut d = s1.p.clone();
        d.axpy(-1.0, &expected);
        assert!(c.disc.l2_norm(&d) <= 1e-10 * c.disc.l2_norm(&expected));
        // The Neumann mode decays, by roughly tau * mu / c_eff.
        let ratio = c.disc.dot(&s1.p, &p0) / c.disc.dot(&p0, &p0);
        assert!(ratio < 1.0 && ratio > 1.0 - tau * (PI / (2.0 * h)).powi(2));
    }

    #[test]
    fn energy_is_monotone_without_sources() {
        let c = ctx(3, 17, PermeabilityModel::sin_in_time(1.0, 0.5, 3.0));
        let p0 = c.disc.sample_pressure(|x1, x2, x3| (PI * x1).sin() * (2.0 * PI * x2).sin() * (3.0 * x3).exp() + x3 * x1);
        let run = run(&c, &InitialData::Pressure(p0), &SourceTerms::zero(), 2.0, 0.05, SourcePath::Direct).unwrap();
        for (n, defect) in energy_defects(&run).iter().enumerate() {
            assert!(*defect <= 1e-10 * run.states[n].diagnostics.energy, "step {n}: {defect}");
        }
        for s in &run.states {
            assert!(s.diagnostics.plate_residual < 1e-10);
        }
    }

    #[test]
    fn translation_of_zero_and_constant_loads() {
        let c = ctx(2, 9, PermeabilityModel::constant(1.0));
        let zero = vec![c.disc.zero_plate(PlateRole::Load); 4];
        let tr = translate_source(&c, &zero, 0.1, true, DifferenceScheme::Central).unwrap();
        assert!(tr.w_f.iter().all(|w| w.coeffs.iter().all(|v| *v == 0.0)));
        assert!(tr.d0_correction.values.iter().all(|v| *v == 0.0));

        let f = PlateField::from_coeffs(vec![1.0, 0.5, -0.2, 0.0], PlateRole::Load);
        let constant = vec![f; 4];
        for scheme in [DifferenceScheme::Backward, DifferenceScheme::Central] {
            let tr = translate_source(&c, &constant, 0.1, true, scheme).unwrap();
            assert!(tr.g_correction.iter().all(|g| g.values.iter().all(|v| v.abs() < 1e-14)));
            assert!(tr.d0_correction.values.iter().any(|v| v.abs() > 1e-6));
        }
    }

    #[test]
    fn translation_requires_regular_load() {
        let c = ctx(1, 5, PermeabilityModel::constant(1.0));
        let f = vec![c.disc.zero_plate(PlateRole::Load); 2];
        assert!(matches!(translate_source(&c, &f, 0.1, false, DifferenceScheme::Backward), Err(Error::Regularity(_))));
        assert!(matches!(translate_source(&c, &f, 0.1, true, DifferenceScheme::Central), Err(Error::Regularity(_))));
    }

    #[test]
    fn translation_of_decaying_mode_is_second_order_with_central_differences() {
        let c = ctx(1, 9, PermeabilityModel::constant(1.0));
        let lam = 2.0 * PI * PI;
        let (alpha, d) = (c.params.alpha, c.params.d);
        let mut errors = Vec::new();
        for &tau in &[0.1, 0.05, 0.025] {
            let samples: Vec<PlateField> = (0..=10)
                .map(|i| PlateField::from_coeffs(vec![(-(i as f64) * tau).exp()], PlateRole::Load))
                .collect();
            let tr = translate_source(&c, &samples, tau, true, DifferenceScheme::Central).unwrap();
            let mut worst: f64 = 0.0;
            for (i, g) in tr.g_correction.iter().enumerate() {
                let t = i as f64 * tau;
                assert!((tr.w_f[i].coeffs[0] - (-t).exp() / (d * lam * lam)).abs() < 1e-15);
                // alpha x3 (-lambda) d/dt[e^{-t}/(D lambda^2)] = +alpha e^{-t} lambda/(D lambda^2) x3
                let amp = alpha * (-t).exp() * lam / (d * lam * lam);
                for (v, x) in g.values.iter().zip(c.disc.grid.nodes()) {
                    worst = worst.max((v - amp * x).abs());
                }
            }
            errors.push(worst);
        }
        let order = (errors[0] / errors[2]).log2() / 2.0;
        assert!((order - 2.0).abs() < 0.2, "observed order {order} from {errors:?}");
    }

    #[test]
    fn direct_and_translated_paths_agree() {
        let c = ctx(2, 17, PermeabilityModel::sin_in_time(1.0, 0.3, 2.0));
        let disc = c.disc.clone();
        let sources = SourceTerms::zero().with_f(
            move |t| {
                let mut f = disc.zero_plate(PlateRole::Load);
                f.coeffs[0] = (2.0 * t).sin() + 1.0;
                f.coeffs[3] = 0.5 * (-t).exp();
                f
            },
            true,
        );
        let d0 = c.disc.sample_pressure(|x1, _, x3| x1 * (1.0 - x1) * x3);
        let init = InitialData::FluidContent(d0);
        let a = run(&c, &init, &sources, 1.0, 0.05, SourcePath::Direct).unwrap();
        let b = run(&c, &init, &sources, 1.0, 0.05, SourcePath::Translated).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            let mut d = x.p.clone();
            d.axpy(-1.0, &y.p);
            assert!(c.disc.l2_norm(&d) <= 1e-10 * c.disc.l2_norm(&x.p));
            let mut dw = x.w.clone();
            dw.axpy(-1.0, &y.w);
            assert!(dw.l2_norm() <= 1e-10 * x.w.l2_norm());
        }
    }

    #[test]
    fn initial_condition_is_imposed() {
        let c = ctx(2, 9, PermeabilityModel::constant(1.0));
        let d0 = c.disc.sample_pressure(|x1, x2, x3| x1 * x2 + x3);
        let run = run(&c, &InitialData::FluidContent(d0.clone()), &SourceTerms::zero(), 0.2, 0.1, SourcePath::Direct).unwrap();
        let mut r = c.apply_fluid_content(&run.states[0].p);
        r.axpy(-1.0, &d0);
        assert!(c.disc.l2_norm(&r) <= 1e-12 * c.disc.l2_norm(&d0) * 10.0);
    }

    #[test]
    fn rejects_bad_steps() {
        let c = ctx(1, 5, PermeabilityModel::constant(1.0));
        let s = state_from_pressure(&c, 0.0, c.disc.zero_pressure(), &c.disc.zero_plate(PlateRole::Load)).unwrap();
        assert!(matches!(step(&c, &s, 0.0, &c.disc.zero_pressure(), &c.disc.zero_plate(PlateRole::Load)), Err(Error::Step(_))));
        assert!(matches!(step_count(1.0, 0.3), Err(Error::Step(_))));
    }

    #[test]
    fn runs_are_deterministic() {
        let c = ctx(2, 9, PermeabilityModel::sin_in_time(1.0, 0.5, 1.0));
        let d0 = c.disc.sample_pressure(|x1, x2, x3| (x1 - x2) * x3.cos());
        let init = InitialData::FluidContent(d0);
        let a = run(&c, &init, &SourceTerms::zero(), 0.5, 0.05, SourcePath::Direct).unwrap();
        let b = run(&c, &init, &SourceTerms::zero(), 0.5, 0.05, SourcePath::Direct).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x.p.values, y.p.values);
            assert_eq!(x.w.coeffs, y.w.coeffs);
        }
    }
}
