//! Manufactured quasi-static solutions and convergence ladders.

use std::f64::consts::PI;

use crate::discretization::{Discretization, PlateField, PlateRole, PressureField};
use crate::error::{Error, Result};
use crate::model::{InitialData, PermeabilityModel, PermeabilityStructure, PhysicalParams, SourceTerms};
use crate::operators::{CgSettings, OperatorContext};
use crate::quasistatic::{self, QSRun, SourcePath};

/// `p* = e^{-sigma t} cos(pi (x3 + h) / (2h)) phi_mn(x1, x2)` with plate
/// `w*` from the exact modal plate solve and sources by substitution.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub params: PhysicalParams,
    /// 1-based in-plane mode.
    pub mode: (usize, usize),
    pub sigma: f64,
    /// Constant permeability.
    pub k: f64,
    /// Amplitude of the plate load `f* = load e^{-sigma t} phi_mn`.
    pub load: f64,
}

/// Builds the manufactured case. Only constant permeability admits the
/// closed-form sources used here.
pub fn make_manufactured_qs(
    params: PhysicalParams,
    mode: (usize, usize),
    sigma: f64,
    permeability: &PermeabilityModel,
) -> Result<ManufacturedCase> {
    params.require_quasistatic()?;
    if permeability.structure != PermeabilityStructure::Constant {
        return Err(Error::UnsupportedPermeability(format!(
            "manufactured sources need a constant permeability, got '{}'",
            permeability.name
        )));
    }
    if mode.0 == 0 || mode.1 == 0 {
        return Err(Error::InvalidParams("mode indices are 1-based".into()));
    }
    Ok(ManufacturedCase {
        params,
        mode,
        sigma,
        k: permeability.evaluate(0.5, 0.5, 0.0, 0.0),
        load: 0.0,
    })
}

impl ManufacturedCase {
    pub fn with_load(mut self, load: f64) -> Self {
        self.load = load;
        self
    }

    pub fn lambda(&self) -> f64 {
        PI * PI * ((self.mode.0 * self.mode.0 + self.mode.1 * self.mode.1) as f64)
    }

    /// Transverse profile `cos(pi (x3 + h) / (2h))`.
    pub fn profile(&self, x3: f64) -> f64 {
        let h = self.params.h;
        (PI * (x3 + h) / (2.0 * h)).cos()
    }

    /// `-d3^2` eigenvalue of the profile: `(pi / 2h)^2`.
    pub fn transverse_rate(&self) -> f64 {
        (PI / (2.0 * self.params.h)).powi(2)
    }

    /// `int x3 cos(pi (x3 + h) / (2h)) dx3 = -8 h^2 / pi^2`.
    pub fn profile_moment(&self) -> f64 {
        -8.0 * self.params.h.powi(2) / (PI * PI)
    }

    fn decay(&self, t: f64) -> f64 {
        (-self.sigma * t).exp()
    }

    /// Modal amplitude of `w*` at `t = 0`.
    pub fn plate_amplitude(&self) -> f64 {
        let l = self.lambda();
        (self.load + self.params.alpha * l * self.profile_moment()) / (self.params.d * l * l)
    }

    fn mode_index(&self, disc: &Discretization) -> Result<usize> {
        let basis = &disc.basis;
        if self.mode.0 > basis.m() || self.mode.1 > basis.n() {
            return Err(Error::Size(format!(
                "mode {:?} is not resolved by a {}x{} basis",
                self.mode,
                basis.m(),
                basis.n()
            )));
        }
        Ok(basis.mode_index(self.mode.0, self.mode.1))
    }

    pub fn pressure(&self, disc: &Discretization, t: f64) -> Result<PressureField> {
        let k = self.mode_index(disc)?;
        let mut coeffs = vec![0.0; disc.modes()];
        coeffs[k] = self.decay(t);
        Ok(disc.separable_pressure(&coeffs, |x| self.profile(x)))
    }

    pub fn plate(&self, disc: &Discretization, t: f64) -> Result<PlateField> {
        let k = self.mode_index(disc)?;
        let mut w = disc.zero_plate(PlateRole::Displacement);
        w.coeffs[k] = self.plate_amplitude() * self.decay(t);
        Ok(w)
    }

    /// `g* = zeta*_t - d3 (k d3 p*)`, with
    /// `zeta* = c_p p* + alpha lambda x3 w*`.
    pub fn sources(&self, disc: &Discretization) -> Result<SourceTerms> {
        let k = self.mode_index(disc)?;
        let (c, alpha, sigma, lam) = (self.params.c_p, self.params.alpha, self.sigma, self.lambda());
        let (w_amp, mu, kk, load) = (self.plate_amplitude(), self.transverse_rate(), self.k, self.load);
        let me = self.clone();
        let disc_g = disc.clone();
        let disc_f = disc.clone();
        let modes = disc.modes();
        let g = move |t: f64| {
            let decay = (-sigma * t).exp();
            let mut coeffs = vec![0.0; modes];
            coeffs[k] = decay;
            disc_g.separable_pressure(&coeffs, |x| {
                -sigma * (c * me.profile(x) + alpha * lam * x * w_amp) + kk * mu * me.profile(x)
            })
        };
        let f = move |t: f64| {
            let mut f = disc_f.zero_plate(PlateRole::Load);
            f.coeffs[k] = load * (-sigma * t).exp();
            f
        };
        Ok(SourceTerms::zero().with_f(f, true).with_g(g))
    }

    pub fn context(&self, disc: Discretization, cg: CgSettings) -> Result<OperatorContext> {
        Ok(OperatorContext::new(self.params, disc, PermeabilityModel::constant(self.k))?.with_cg(cg))
    }

    /// Runs the solver from `p*(0)` on `[0, t_final]`.
    pub fn solve(&self, ctx: &OperatorContext, t_final: f64, tau: f64) -> Result<QSRun> {
        let p0 = self.pressure(&ctx.disc, 0.0)?;
        quasistatic::run(ctx, &InitialData::Pressure(p0), &self.sources(&ctx.disc)?, t_final, tau, SourcePath::Direct)
    }

    /// `(l2(V) error of p, l2(W) error of w)` against nodal samples.
    pub fn errors(&self, ctx: &OperatorContext, run: &QSRun) -> Result<(f64, f64)> {
        let disc = &ctx.disc;
        let mut ep = 0.0;
        let mut ew = 0.0;
        for s in &run.states[1..] {
            let mut dp = s.p.clone();
            dp.axpy(-1.0, &self.pressure(disc, s.t)?);
            ep += run.tau * disc.v_norm_sq(&dp);
            let mut dw = s.w.clone();
            dw.axpy(-1.0, &self.plate(disc, s.t)?);
            ew += run.tau * dw.w_norm(&disc.basis).powi(2);
        }
        Ok((ep.sqrt(), ew.sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    /// Order measured against `tau`.
    Time,
    /// Order measured against the transverse spacing `2h / (N3 - 1)`.
    Space,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub n3: usize,
    pub p_error: f64,
    pub w_error: f64,
    /// Order against the previous row (`None` for the first).
    pub p_order: Option<f64>,
    pub w_order: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub refinement: Refinement,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log error` against `log step`.
    pub p_order: f64,
    pub w_order: f64,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,n3,p_error,w_error,p_order,w_order\n");
        for r in &self.rows {
            let fmt_opt = |o: Option<f64>| o.map(|v| format!("{v:.6}")).unwrap_or_default();
            out.push_str(&format!(
                "{:e},{},{:e},{:e},{},{}\n",
                r.tau,
                r.n3,
                r.p_error,
                r.w_error,
                fmt_opt(r.p_order),
                fmt_opt(r.w_order)
            ));
        }
        out
    }
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Runs each rung `(tau, N3)` on an `M x N` basis over `[0, t_final]`,
/// rungs in parallel.
pub fn convergence_study(
    case: &ManufacturedCase,
    ladder: &[(f64, usize)],
    refinement: Refinement,
    in_plane: (usize, usize),
    t_final: f64,
    cg: CgSettings,
) -> Result<ConvergenceTable> {
    if ladder.len() < 3 {
        return Err(Error::InvalidParams(format!(
            "a convergence ladder needs at least 3 rungs, got {}",
            ladder.len()
        )));
    }
    let results: Vec<Result<(f64, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ladder
            .iter()
            .map(|&(tau, n3)| {
                scope.spawn(move || -> Result<(f64, f64)> {
                    let disc = Discretization::new(in_plane.0, in_plane.1, n3, case.params.h)?;
                    let ctx = case.context(disc, cg)?;
                    let run = case.solve(&ctx, t_final, tau)?;
                    case.errors(&ctx, &run)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Step("convergence rung panicked".into()))))
            .collect()
    });
    let errors = results.into_iter().collect::<Result<Vec<_>>>()?;
    let step = |&(tau, n3): &(f64, usize)| match refinement {
        Refinement::Time => tau,
        Refinement::Space => 2.0 * case.params.h / (n3 as f64 - 1.0),
    };
    let log_h: Vec<f64> = ladder.iter().map(|r| step(r).ln()).collect();
    let log_p: Vec<f64> = errors.iter().map(|e| e.0.ln()).collect();
    let log_w: Vec<f64> = errors.iter().map(|e| e.1.ln()).collect();
    let rows = ladder
        .iter()
        .zip(&errors)
        .enumerate()
        .map(|(i, (&(tau, n3), &(p_error, w_error)))| {
            let order = |logs: &[f64]| (i > 0).then(|| (logs[i] - logs[i - 1]) / (log_h[i] - log_h[i - 1]));
            ConvergenceRow {
                tau,
                n3,
                p_error,
                w_error,
                p_order: order(&log_p),
                w_order: order(&log_w),
            }
        })
        .collect();
    Ok(ConvergenceTable {
        refinement,
        rows,
        p_order: least_squares_slope(&log_h, &log_p),
        w_order: least_squares_slope(&log_h, &log_w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> PhysicalParams {
        PhysicalParams::new(1.0, 1.0, 1.0, 0.0, 0.5)
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn profile_moment_matches_quadrature() {
        let case = make_manufactured_qs(unit_params(), (1, 1), 1.0, &PermeabilityModel::constant(1.0)).unwrap();
        let q = simpson(|x| x * case.profile(x), -0.5, 0.5, 2000);
        assert!((q - case.profile_moment()).abs() < 1e-12);
        assert!((case.profile_moment() + 2.0 / (PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn transverse_term_is_pi_squared_for_unit_thickness() {
        let case = make_manufactured_qs(unit_params(), (1, 1), 1.0, &PermeabilityModel::constant(1.0)).unwrap();
        assert!((case.transverse_rate() - PI * PI).abs() < 1e-13);
        // second difference of the profile as an independent check
        let (x, e) = (0.1, 1e-4);
        let d2 = (case.profile(x + e) - 2.0 * case.profile(x) + case.profile(x - e)) / (e * e);
        assert!((-d2 - PI * PI * case.profile(x)).abs() < 1e-5);
    }

    #[test]
    fn steady_case_has_time_independent_source() {
        let case = make_manufactured_qs(unit_params(), (1, 1), 0.0, &PermeabilityModel::constant(1.0)).unwrap();
        let disc = Discretization::new(1, 1, 9, 0.5).unwrap();
        let s = case.sources(&disc).unwrap();
        assert_eq!(s.fluid_source(&disc, 0.0).values, s.fluid_source(&disc, 3.0).values);
    }

    #[test]
    fn rejects_non_constant_permeability() {
        let r = make_manufactured_qs(unit_params(), (1, 1), 1.0, &PermeabilityModel::sin_in_time(1.0, 0.5, 1.0));
        assert!(matches!(r, Err(Error::UnsupportedPermeability(_))));
    }

    #[test]
    fn plate_field_solves_plate_equation() {
        let case = make_manufactured_qs(unit_params(), (1, 2), 0.5, &PermeabilityModel::constant(1.0))
            .unwrap()
            .with_load(0.3);
        let l = case.lambda();
        let w = case.plate_amplitude();
        let r = unit_params().d * l * l * w - unit_params().alpha * l * case.profile_moment() - 0.3;
        assert!(r.abs() < 1e-13);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = [1.0f64, 0.5, 0.25].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 0.25, 0.0625].iter().map(|v| v.ln()).collect();
        assert!((least_squares_slope(&x, &y) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn short_ladders_are_rejected() {
        let case = make_manufactured_qs(unit_params(), (1, 1), 1.0, &PermeabilityModel::constant(1.0)).unwrap();
        let r = convergence_study(&case, &[(0.1, 9), (0.05, 9)], Refinement::Time, (1, 1), 1.0, CgSettings::default());
        assert!(matches!(r, Err(Error::InvalidParams(_))));
    }
}
