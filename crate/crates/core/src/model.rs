//! Physical parameters, permeability models, sources and initial data.

use std::fmt;
use std::sync::Arc;

use crate::discretization::{Discretization, GridSpec, PlateField, PressureField, SineBasis, TransverseGrid};
use crate::error::{Error, Result};

/// Default number of uniform time samples used by permeability validation.
pub const DEFAULT_VALIDATION_TIMES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Flexural rigidity.
    pub d: f64,
    /// Biot-Willis constant.
    pub alpha: f64,
    /// Storage coefficient.
    pub c_p: f64,
    /// Inertial parameter (0 for quasi-static).
    pub rho_p: f64,
    /// Half-thickness; the transverse domain is `(-h, h)`.
    pub h: f64,
    beta: f64,
}

impl PhysicalParams {
    pub fn new(d: f64, alpha: f64, c_p: f64, rho_p: f64, h: f64) -> Self {
        Self {
            d,
            alpha,
            c_p,
            rho_p,
            h,
            beta: alpha * alpha / d,
        }
    }

    /// `alpha^2 / D`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Overrides the cached `beta`; only useful to exercise validation.
    #[doc(hidden)]
    pub fn with_stored_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Checks the sign conditions and the cached `beta`.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new("params");
        report.check(self.d > 0.0 && self.d.is_finite(), "D must be positive", self.d);
        report.check(self.alpha > 0.0 && self.alpha.is_finite(), "alpha must be positive", self.alpha);
        report.check(self.h > 0.0 && self.h.is_finite(), "h must be positive", self.h);
        report.check(self.c_p >= 0.0 && self.c_p.is_finite(), "c_p must be nonnegative", self.c_p);
        report.check(self.rho_p >= 0.0 && self.rho_p.is_finite(), "rho_p must be nonnegative", self.rho_p);
        let recomputed = self.alpha * self.alpha / self.d;
        let rel = ((recomputed - self.beta) / recomputed).abs();
        report.check(rel <= 1e-15, "beta must equal alpha^2/D", self.beta);
        report
    }

    pub fn require_quasistatic(&self) -> Result<()> {
        self.validate().into_result()?;
        if !(self.c_p > 0.0) {
            return Err(Error::InvalidParams(
                "quasi-static solver requires c_p > 0 (incompressible case unsupported)".into(),
            ));
        }
        Ok(())
    }

    pub fn require_inertial(&self) -> Result<()> {
        self.require_quasistatic()?;
        if !(self.rho_p > 0.0) {
            return Err(Error::InvalidParams("inertial solver requires rho_p > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
}

/// Named pass/fail checks with observed values.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub subject: String,
    pub checks: Vec<CheckOutcome>,
    pub observed_min: Option<f64>,
    pub observed_max: Option<f64>,
}

impl ValidationReport {
    pub fn new(subject: &str) -> Self {
        Self {
            subject: subject.to_string(),
            checks: Vec::new(),
            observed_min: None,
            observed_max: None,
        }
    }

    pub fn check(&mut self, passed: bool, name: &str, value: f64) {
        self.checks.push(CheckOutcome {
            name: name.to_string(),
            passed,
            value,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn into_result(self) -> Result<Self> {
        if let Some(first) = self.failures().next() {
            return Err(Error::InvalidParams(format!("{} (got {})", first.name, first.value)));
        }
        Ok(self)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {} ({})",
                self.subject,
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermeabilityStructure {
    Constant,
    /// `k(x3, t)`: no in-plane dependence.
    TransverseOnly,
    General,
}

type KFn = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;
type EnvelopeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct DerivativeEnvelope {
    pub bound: EnvelopeFn,
    /// Declared `int_0^T K(t) dt`, if known.
    pub integral: Option<f64>,
}

/// Evaluable permeability `k(x1, x2, x3, t)` with declared bounds.
#[derive(Clone)]
pub struct PermeabilityModel {
    evaluate: KFn,
    pub k_lower: f64,
    pub k_upper: f64,
    pub envelope: Option<DerivativeEnvelope>,
    pub structure: PermeabilityStructure,
    pub name: String,
}

impl fmt::Debug for PermeabilityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PermeabilityModel")
            .field("name", &self.name)
            .field("k_lower", &self.k_lower)
            .field("k_upper", &self.k_upper)
            .field("structure", &self.structure)
            .field("envelope", &self.envelope.is_some())
            .finish()
    }
}

impl PermeabilityModel {
    pub fn new(
        name: &str,
        structure: PermeabilityStructure,
        k_lower: f64,
        k_upper: f64,
        evaluate: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            evaluate: Arc::new(evaluate),
            k_lower,
            k_upper,
            envelope: None,
            structure,
            name: name.to_string(),
        }
    }

    pub fn with_envelope(mut self, bound: impl Fn(f64) -> f64 + Send + Sync + 'static, integral: Option<f64>) -> Self {
        self.envelope = Some(DerivativeEnvelope {
            bound: Arc::new(bound),
            integral,
        });
        self
    }

    pub fn with_bounds(mut self, k_lower: f64, k_upper: f64) -> Self {
        self.k_lower = k_lower;
        self.k_upper = k_upper;
        self
    }

    /// `k == value` with bounds `[value, value]` and zero derivative.
    pub fn constant(value: f64) -> Self {
        Self::new("constant", PermeabilityStructure::Constant, value, value, move |_, _, _, _| value)
            .with_envelope(|_| 0.0, Some(0.0))
    }

    /// `k(t) = k0 + amplitude sin(omega t)`.
    pub fn sin_in_time(k0: f64, amplitude: f64, omega: f64) -> Self {
        let a = amplitude.abs();
        Self::new(
            "sin-in-time",
            PermeabilityStructure::TransverseOnly,
            k0 - a,
            k0 + a,
            move |_, _, _, t| k0 + amplitude * (omega * t).sin(),
        )
        .with_envelope(move |_| a * omega.abs(), None)
    }

    /// Two smoothly joined layers: `k(x3) = k0 (1 + contrast tanh(x3 / (width h)))`.
    pub fn layered_x3(k0: f64, contrast: f64, h: f64, width: f64) -> Self {
        let c = contrast.abs();
        let scale = width * h;
        Self::new(
            "layered-x3",
            PermeabilityStructure::TransverseOnly,
            k0 * (1.0 - c),
            k0 * (1.0 + c),
            move |_, _, x3, _| k0 * (1.0 + contrast * (x3 / scale).tanh()),
        )
        .with_envelope(|_| 0.0, Some(0.0))
    }

    /// `k~(x, s) = value_scale * k(x, time_scale * s)`, with bounds and
    /// derivative envelope transformed accordingly.
    pub fn rescaled(&self, value_scale: f64, time_scale: f64) -> Self {
        let inner = Arc::clone(&self.evaluate);
        let envelope = self.envelope.as_ref().map(|e| {
            let bound = Arc::clone(&e.bound);
            DerivativeEnvelope {
                bound: Arc::new(move |s| value_scale * time_scale * bound(time_scale * s)),
                integral: e.integral.map(|i| value_scale * i),
            }
        });
        Self {
            evaluate: Arc::new(move |x1, x2, x3, s| value_scale * inner(x1, x2, x3, time_scale * s)),
            k_lower: value_scale * self.k_lower,
            k_upper: value_scale * self.k_upper,
            envelope,
            structure: self.structure,
            name: self.name.clone(),
        }
    }

    pub fn evaluate(&self, x1: f64, x2: f64, x3: f64, t: f64) -> f64 {
        (self.evaluate)(x1, x2, x3, t)
    }

    /// Evaluates and enforces `k_lower <= k <= k_upper`.
    pub fn checked(&self, x1: f64, x2: f64, x3: f64, t: f64) -> Result<f64> {
        let value = self.evaluate(x1, x2, x3, t);
        if !value.is_finite() {
            return Err(Error::PermeabilityEval { value, x1, x2, x3, t });
        }
        if value < self.k_lower || value > self.k_upper {
            return Err(Error::BoundsViolation {
                value,
                lower: self.k_lower,
                upper: self.k_upper,
                x1,
                x2,
                x3,
                t,
            });
        }
        Ok(value)
    }

    /// Samples `k` on the grid (nodes and edge midpoints) at uniform time
    /// points and checks the declared bounds and derivative envelope.
    pub fn validate(&self, sample_grid: GridSpec, h: f64, t_final: f64) -> Result<ValidationReport> {
        self.validate_with(sample_grid, h, t_final, DEFAULT_VALIDATION_TIMES)
    }

    pub fn validate_with(
        &self,
        sample_grid: GridSpec,
        h: f64,
        t_final: f64,
        time_samples: usize,
    ) -> Result<ValidationReport> {
        if !(t_final > 0.0) {
            return Err(Error::InvalidParams(format!("validation horizon must be positive, got {t_final}")));
        }
        if !(self.k_lower > 0.0) || !(self.k_upper >= self.k_lower) || !self.k_upper.is_finite() {
            return Err(Error::InvalidParams(format!(
                "declared bounds must satisfy 0 < k_lower <= k_upper < inf, got [{}, {}]",
                self.k_lower, self.k_upper
            )));
        }
        let basis = SineBasis::new(sample_grid.m, sample_grid.n)?;
        let grid = TransverseGrid::new(sample_grid.n3, h)?;
        let mut x3s: Vec<f64> = grid.nodes().to_vec();
        x3s.extend_from_slice(grid.midpoints());
        let nt = time_samples.max(2);
        let dt = t_final / (nt as f64 - 1.0);
        let times: Vec<f64> = (0..nt).map(|i| i as f64 * dt).collect();

        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut worst_ratio: f64 = 0.0;
        for k in 0..basis.len() {
            let (x1, x2) = basis.collocation_point(k);
            for &x3 in &x3s {
                let series: Vec<f64> = times
                    .iter()
                    .map(|&t| self.checked(x1, x2, x3, t))
                    .collect::<Result<_>>()?;
                for &v in &series {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if let Some(env) = &self.envelope {
                    for i in 1..nt - 1 {
                        let deriv = (series[i + 1] - series[i - 1]) / (2.0 * dt);
                        let bound = (env.bound)(times[i]);
                        if deriv.abs() > bound * (1.0 + 1e-12) + 1e-14 {
                            return Err(Error::EnvelopeViolation {
                                observed: deriv.abs(),
                                envelope: bound,
                                t: times[i],
                            });
                        }
                        if bound > 0.0 {
                            worst_ratio = worst_ratio.max(deriv.abs() / bound);
                        }
                    }
                }
            }
        }
        let mut report = ValidationReport::new(&format!("permeability[{}]", self.name));
        report.check(lo >= self.k_lower, "k >= k_lower", lo);
        report.check(hi <= self.k_upper, "k <= k_upper", hi);
        if let Some(env) = &self.envelope {
            report.check(worst_ratio <= 1.0 + 1e-12, "|dk/dt| <= K(t)", worst_ratio);
            let integral: f64 = times
                .windows(2)
                .map(|w| 0.5 * (w[1] - w[0]) * ((env.bound)(w[0]) + (env.bound)(w[1])))
                .sum();
            report.check(integral.is_finite(), "K integrable on [0,T]", integral);
            if let Some(declared) = env.integral {
                report.check(
                    declared >= integral * (1.0 - 1e-6) - 1e-12,
                    "declared int K >= sampled int K",
                    declared,
                );
            }
        }
        report.observed_min = Some(lo);
        report.observed_max = Some(hi);
        Ok(report)
    }
}

type PlateLoadFn = Arc<dyn Fn(f64) -> PlateField + Send + Sync>;
type FluidSourceFn = Arc<dyn Fn(f64) -> PressureField + Send + Sync>;

/// Plate load `f(t)` as modal coefficients and fluid source `g(t)` as a
/// modal-layout pressure field. Absent terms are zero.
#[derive(Clone, Default)]
pub struct SourceTerms {
    pub f: Option<PlateLoadFn>,
    pub g: Option<FluidSourceFn>,
    /// Asserts that `f` is differentiable in time (needed for translation).
    pub f_time_regularity: bool,
}

impl fmt::Debug for SourceTerms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerms")
            .field("f", &self.f.is_some())
            .field("g", &self.g.is_some())
            .field("f_time_regularity", &self.f_time_regularity)
            .finish()
    }
}

impl SourceTerms {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn with_f(mut self, f: impl Fn(f64) -> PlateField + Send + Sync + 'static, smooth_in_time: bool) -> Self {
        self.f = Some(Arc::new(f));
        self.f_time_regularity = smooth_in_time;
        self
    }

    pub fn with_g(mut self, g: impl Fn(f64) -> PressureField + Send + Sync + 'static) -> Self {
        self.g = Some(Arc::new(g));
        self
    }

    pub fn plate_load(&self, disc: &Discretization, t: f64) -> PlateField {
        match &self.f {
            Some(f) => f(t),
            None => disc.zero_plate(crate::discretization::PlateRole::Load),
        }
    }

    pub fn fluid_source(&self, disc: &Discretization, t: f64) -> PressureField {
        match &self.g {
            Some(g) => g(t),
            None => disc.zero_pressure(),
        }
    }

    /// Checks that sampled values are finite at the given times.
    pub fn check_finite(&self, disc: &Discretization, times: &[f64]) -> Result<()> {
        for &t in times {
            if !self.plate_load(disc, t).is_finite() {
                return Err(Error::InvalidParams(format!("plate load is not finite at t={t}")));
            }
            if !self.fluid_source(disc, t).is_finite() {
                return Err(Error::InvalidParams(format!("fluid source is not finite at t={t}")));
            }
        }
        Ok(())
    }
}

/// Which plate state enters the inertial initial pressure
/// `p(0) = (d0 + alpha x3 Delta w_ref) / c_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InertialPressureConvention {
    #[default]
    FromVelocity,
    FromDisplacement,
}

#[derive(Debug, Clone)]
pub enum InitialData {
    /// Fluid content `d0 = [(c_p I + B) p](0)`.
    FluidContent(PressureField),
    Pressure(PressureField),
    Inertial {
        w0: PlateField,
        w1: PlateField,
        d0: PressureField,
        convention: InertialPressureConvention,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_params_pass() {
        let p = PhysicalParams::new(1.0, 1.0, 1.0, 0.0, 0.5);
        let report = p.validate();
        assert!(report.passed(), "{report}");
        assert_eq!(p.beta(), 1.0);
    }

    #[test]
    fn beta_is_alpha_squared_over_d() {
        let p = PhysicalParams::new(2.0, 1.0, 1.0, 0.0, 0.5);
        assert_eq!(p.beta(), 0.5);
    }

    #[test]
    fn zero_rigidity_fails() {
        let report = PhysicalParams::new(0.0, 1.0, 1.0, 0.0, 0.5).validate();
        assert!(!report.passed());
        assert!(report.failures().any(|c| c.name == "D must be positive"));
    }

    #[test]
    fn stale_beta_is_reported() {
        let p = PhysicalParams::new(2.0, 1.0, 1.0, 0.0, 0.5).with_stored_beta(0.5 + 1e-12);
        assert!(p.validate().failures().any(|c| c.name.contains("beta")));
    }

    #[test]
    fn solver_regimes() {
        assert!(PhysicalParams::new(1.0, 1.0, 0.0, 0.0, 0.5).require_quasistatic().is_err());
        assert!(PhysicalParams::new(1.0, 1.0, 1.0, 0.0, 0.5).require_inertial().is_err());
        assert!(PhysicalParams::new(1.0, 1.0, 1.0, 1.0, 0.5).require_inertial().is_ok());
    }

    #[test]
    fn constant_inside_declared_bounds() {
        let k = PermeabilityModel::constant(1.0).with_bounds(0.5, 2.0);
        let report = k.validate(GridSpec::new(2, 2, 5), 0.5, 1.0).unwrap();
        assert!(report.passed());
        assert_eq!(report.observed_min, Some(1.0));
    }

    #[test]
    fn sin_in_time_passes_dense_sampling() {
        let k = PermeabilityModel::sin_in_time(1.0, 0.5, 1.0).with_bounds(0.4, 1.6);
        let report = k.validate_with(GridSpec::new(1, 1, 5), 0.5, 10.0, 4001).unwrap();
        assert!(report.passed(), "{report}");
        // dense sampling oracle: |dk/dt| = 0.5 |cos t| attains the envelope
        let ratio = report.checks.iter().find(|c| c.name.contains("dk/dt")).unwrap().value;
        assert!(ratio > 0.999 && ratio <= 1.0);
    }

    #[test]
    fn k_equal_t_violates_lower_bound_at_zero() {
        let k = PermeabilityModel::new("ramp", PermeabilityStructure::TransverseOnly, 0.1, 1.0, |_, _, _, t| t);
        match k.validate(GridSpec::new(1, 1, 3), 0.5, 1.0) {
            Err(Error::BoundsViolation { value, t, .. }) => {
                assert_eq!(value, 0.0);
                assert_eq!(t, 0.0);
            }
            other => panic!("expected bounds violation, got {other:?}"),
        }
    }

    #[test]
    fn envelope_violation_detected() {
        let k = PermeabilityModel::sin_in_time(1.0, 0.5, 2.0).with_envelope(|_| 0.5, None);
        assert!(matches!(
            k.validate(GridSpec::new(1, 1, 3), 0.5, 3.0),
            Err(Error::EnvelopeViolation { .. })
        ));
    }

    #[test]
    fn layered_preset_respects_bounds() {
        let k = PermeabilityModel::layered_x3(1.0, 0.5, 0.5, 0.1);
        assert!(k.validate(GridSpec::new(2, 2, 33), 0.5, 1.0).unwrap().passed());
    }
}
