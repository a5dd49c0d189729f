//! Integrator for the inertial, compressible system written as a first-order
//! evolution `y' = G(t) y + F` for `y = [w, v, p]`.
//!
//! The solver works on the scaled system with unit rigidity, density and
//! storage. With `omega0 = sqrt(D / rho_p)` and scaled time `s = omega0 t`,
//! the variables `W = sqrt(D) w`, `V = sqrt(rho_p) v`, `P = sqrt(c_p) p`
//! satisfy, per in-plane mode with eigenvalue `lambda`,
//!
//! ```text
//! W' = V
//! V' = -lambda^2 W + a lambda K P + f~
//! P' = -a lambda x3 V - A~ P + g~
//! ```
//!
//! where `a = alpha / sqrt(c_p D)`, `k~ = k / (c_p omega0)`,
//! `f~ = f / sqrt(D)` and `g~ = g / (sqrt(c_p) omega0)`. In the X-norm
//! `|y|^2 = sum lambda^2 W^2 + sum V^2 + ||P||^2`, the coupling is
//! skew and `(G y, y)_X = -(k~ d3 P, d3 P)`.

use nalgebra::{DMatrix, DVector};

use crate::discretization::{Discretization, PlateField, PlateRole, PressureField, PressureLayout};
use crate::error::{Error, Result};
use crate::model::{InertialPressureConvention, InitialData, PermeabilityModel, PermeabilityStructure, PhysicalParams, SourceTerms};
use crate::operators::{CgOutcome, OperatorContext, Pencil, Stiffness};

/// Map between physical and scaled variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertialScaling {
    /// `sqrt(D / rho_p)`; scaled time is `omega0 * t`.
    pub omega0: f64,
    pub sqrt_d: f64,
    pub sqrt_rho: f64,
    pub sqrt_c: f64,
    /// `alpha / sqrt(c_p D)`.
    pub alpha: f64,
    /// `1 / (c_p omega0)`, applied to the permeability.
    pub k_scale: f64,
}

impl InertialScaling {
    pub fn new(params: &PhysicalParams) -> Result<Self> {
        params.require_inertial()?;
        let omega0 = (params.d / params.rho_p).sqrt();
        Ok(Self {
            omega0,
            sqrt_d: params.d.sqrt(),
            sqrt_rho: params.rho_p.sqrt(),
            sqrt_c: params.c_p.sqrt(),
            alpha: params.alpha / (params.c_p * params.d).sqrt(),
            k_scale: 1.0 / (params.c_p * omega0),
        })
    }

    pub fn scaled_time(&self, t: f64) -> f64 {
        self.omega0 * t
    }

    pub fn physical_time(&self, s: f64) -> f64 {
        s / self.omega0
    }

    /// Physical `(w, v, p)` to scaled `(W, V, P)`.
    pub fn to_scaled(&self, t: f64, w: &PlateField, v: &PlateField, p: &PressureField) -> InertialState {
        InertialState {
            t: self.scaled_time(t),
            w: scaled_plate(w, self.sqrt_d, PlateRole::Displacement),
            v: scaled_plate(v, self.sqrt_rho, PlateRole::Velocity),
            p: p.scaled(self.sqrt_c),
        }
    }

    /// Scaled state back to physical `(t, w, v, p)`.
    pub fn to_physical(&self, y: &InertialState) -> InertialState {
        InertialState {
            t: self.physical_time(y.t),
            w: scaled_plate(&y.w, 1.0 / self.sqrt_d, PlateRole::Displacement),
            v: scaled_plate(&y.v, 1.0 / self.sqrt_rho, PlateRole::Velocity),
            p: y.p.scaled(1.0 / self.sqrt_c),
        }
    }

    pub fn scale_load(&self, f: &PlateField) -> PlateField {
        scaled_plate(f, 1.0 / self.sqrt_d, PlateRole::Load)
    }

    pub fn scale_fluid_source(&self, g: &PressureField) -> PressureField {
        g.scaled(1.0 / (self.sqrt_c * self.omega0))
    }
}

fn scaled_plate(f: &PlateField, a: f64, role: PlateRole) -> PlateField {
    let mut out = f.clone();
    out.scale(a);
    out.role = role;
    out
}

/// `y = [w, v, p]` of the scaled system at scaled time `t`; pressure in
/// modal layout.
#[derive(Debug, Clone)]
pub struct InertialState {
    pub t: f64,
    pub w: PlateField,
    pub v: PlateField,
    pub p: PressureField,
}

impl InertialState {
    pub fn zeros(disc: &Discretization, t: f64) -> Self {
        Self {
            t,
            w: disc.zero_plate(PlateRole::Displacement),
            v: disc.zero_plate(PlateRole::Velocity),
            p: disc.zero_pressure(),
        }
    }

    /// `sum lambda^2 W^2 + sum V^2 + ||P||^2`.
    pub fn x_norm_sq(&self, disc: &Discretization) -> f64 {
        self.w.w_norm(&disc.basis).powi(2) + self.v.l2_norm().powi(2) + disc.dot(&self.p, &self.p)
    }

    pub fn x_norm(&self, disc: &Discretization) -> f64 {
        self.x_norm_sq(disc).sqrt()
    }

    /// X inner product.
    pub fn x_dot(&self, other: &InertialState, disc: &Discretization) -> f64 {
        let lam = disc.basis.eigenvalues();
        let w: f64 = self
            .w
            .coeffs
            .iter()
            .zip(&other.w.coeffs)
            .zip(lam)
            .map(|((a, b), l)| l * l * a * b)
            .sum();
        w + self.v.dot(&other.v) + disc.dot(&self.p, &other.p)
    }

    pub fn axpy(&mut self, a: f64, x: &InertialState) {
        self.w.axpy(a, &x.w);
        self.v.axpy(a, &x.v);
        self.p.axpy(a, &x.p);
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.v.is_finite() && self.p.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InertialScheme {
    /// Unconditionally contractive.
    #[default]
    BackwardEuler,
    /// Second order; the energy is only monitored for boundedness.
    CrankNicolson,
}

/// Operators of the scaled system together with the physical scaling.
#[derive(Debug, Clone)]
pub struct InertialContext {
    /// Context with `D = rho_p = c_p = 1`, coupling `a` and permeability `k~`.
    pub scaled: OperatorContext,
    pub scaling: InertialScaling,
    pub physical: PhysicalParams,
}

impl InertialContext {
    pub fn new(params: PhysicalParams, disc: Discretization, permeability: PermeabilityModel) -> Result<Self> {
        params.validate().into_result()?;
        let scaling = InertialScaling::new(&params)?;
        let scaled_params = PhysicalParams::new(1.0, scaling.alpha, 1.0, 1.0, params.h);
        let k = permeability.rescaled(scaling.k_scale, 1.0 / scaling.omega0);
        let scaled = OperatorContext::new(scaled_params, disc, k)?;
        Ok(Self {
            scaled,
            scaling,
            physical: params,
        })
    }

    pub fn disc(&self) -> &Discretization {
        &self.scaled.disc
    }

    /// Scaled initial state from physical data `(w0, w1, d0)`, with
    /// `c_p p(0) = d0 + alpha x3 Delta w_ref`.
    pub fn initial_state(&self, init: &InitialData) -> Result<InertialState> {
        let InitialData::Inertial { w0, w1, d0, convention } = init else {
            return Err(Error::InvalidParams("inertial runs need (w0, w1, d0) initial data".into()));
        };
        let disc = self.disc();
        disc.check_layout(d0)?;
        let w_ref = match convention {
            InertialPressureConvention::FromVelocity => w1,
            InertialPressureConvention::FromDisplacement => w0,
        };
        let physical_ctx = OperatorContext::new(self.physical, disc.clone(), PermeabilityModel::constant(1.0))?;
        let mut p0 = disc.to_modal(d0);
        p0.axpy(self.physical.alpha, &physical_ctx.lift_laplacian(w_ref));
        p0.scale(1.0 / self.physical.c_p);
        Ok(self.scaling.to_scaled(0.0, w0, w1, &p0))
    }
}

/// `G(t) y` for the scaled system (no sources).
pub fn apply_generator(ictx: &InertialContext, y: &InertialState) -> Result<InertialState> {
    let ctx = &ictx.scaled;
    let stiff = ctx.stiffness_at(y.t)?;
    Ok(apply_generator_with(ctx, &stiff, y))
}

fn apply_generator_with(ctx: &OperatorContext, stiff: &Stiffness, y: &InertialState) -> InertialState {
    let disc = &ctx.disc;
    let a = ctx.params.alpha;
    let lam = disc.basis.eigenvalues();
    let p = disc.to_modal(&y.p);
    let kp = disc.moment(&p);
    let dv: Vec<f64> = (0..lam.len())
        .map(|i| -lam[i] * lam[i] * y.w.coeffs[i] + a * lam[i] * kp.coeffs[i])
        .collect();
    // -a lambda x3 V = a x3 Delta_D V
    let mut dp = ctx.lift_laplacian(&y.v).scaled(a);
    dp.axpy(-1.0, &ctx.apply_a_with(stiff, &p));
    InertialState {
        t: y.t,
        w: PlateField::from_coeffs(y.v.coeffs.clone(), PlateRole::Displacement),
        v: PlateField::from_coeffs(dv, PlateRole::Velocity),
        p: dp,
    }
}

/// `(k~ d3 P, d3 P)` at the state's time.
pub fn dissipation(ictx: &InertialContext, y: &InertialState) -> Result<f64> {
    let ctx = &ictx.scaled;
    let stiff = ctx.stiffness_at(y.t)?;
    let p = ctx.disc.to_modal(&y.p);
    Ok(ctx.a_form(&stiff, &p, &p))
}

/// Solves `(I - sigma G(t)) y = r`, eliminating `V = (W - r_w) / sigma`.
///
/// Per mode, the remaining unknowns `(W, P)` satisfy
/// `(1 + sigma^2 lambda^2) W - sigma^2 a lambda (m . P) = r_w + sigma r_v` and
/// `a lambda x3 W + (I + sigma A~) P = r_p + a lambda x3 r_w`.
pub fn solve_resolvent(ictx: &InertialContext, r: &InertialState, sigma: f64, t: f64) -> Result<(InertialState, CgOutcome)> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Step(format!("time step must be positive, got {sigma}")));
    }
    let ctx = &ictx.scaled;
    let disc = &ctx.disc;
    let grid = &disc.grid;
    let n3 = grid.len();
    let a = ctx.params.alpha;
    let lam = disc.basis.eigenvalues();
    let stiff = ctx.stiffness_at(t)?;
    let rp = disc.to_modal(&r.p);
    let modes = lam.len();

    let mut w = vec![0.0; modes];
    let mut p = PressureField::zeros(modes, n3, PressureLayout::Modal);
    let mut outcome = CgOutcome {
        iterations: 0,
        residual: 0.0,
    };
    let s2 = sigma * sigma;
    match &stiff {
        Stiffness::Shared(edge_k) => {
            // Column operator W^{-1} S as a dense tridiagonal matrix.
            let mut a_col = DMatrix::zeros(n3, n3);
            let mut unit = vec![0.0; n3];
            let mut out = vec![0.0; n3];
            for j in 0..n3 {
                unit.iter_mut().for_each(|u| *u = 0.0);
                unit[j] = 1.0;
                grid.apply_operator(edge_k, &unit, &mut out);
                a_col.column_mut(j).copy_from_slice(&out);
            }
            for k in 0..modes {
                let l = lam[k];
                let mut block = DMatrix::zeros(n3 + 1, n3 + 1);
                block[(0, 0)] = 1.0 + s2 * l * l;
                for (j, m) in grid.moments().iter().enumerate() {
                    block[(0, j + 1)] = -s2 * a * l * m;
                }
                for (i, x) in grid.nodes().iter().enumerate() {
                    block[(i + 1, 0)] = a * l * x;
                    for j in 0..n3 {
                        block[(i + 1, j + 1)] = sigma * a_col[(i, j)];
                    }
                    block[(i + 1, i + 1)] += 1.0;
                }
                let mut rhs = DVector::zeros(n3 + 1);
                rhs[0] = r.w.coeffs[k] + sigma * r.v.coeffs[k];
                for (i, x) in grid.nodes().iter().enumerate() {
                    rhs[i + 1] = rp.column(k)[i] + a * l * x * r.w.coeffs[k];
                }
                let sol = block.lu().solve(&rhs).ok_or_else(|| {
                    let (m, n) = disc.basis.mode_of(k);
                    Error::SingularBlock { m, n }
                })?;
                w[k] = sol[0];
                p.column_mut(k).copy_from_slice(&sol.as_slice()[1..]);
            }
        }
        Stiffness::PerPoint { .. } => {
            // In-plane varying k couples the modes: eliminate W and solve
            // the SPD Schur complement (I + sigma A~ + gamma x3 m^T) P by CG.
            let gamma: Vec<f64> = lam.iter().map(|l| s2 * a * a * l * l / (1.0 + s2 * l * l)).collect();
            let mut rhs = rp.clone();
            for k in 0..modes {
                let l = lam[k];
                let rw = (r.w.coeffs[k] + sigma * r.v.coeffs[k]) / (1.0 + s2 * l * l);
                let shift = a * l * (r.w.coeffs[k] - rw);
                for (v, x) in rhs.column_mut(k).iter_mut().zip(grid.nodes()) {
                    *v += shift * x;
                }
            }
            let pencil = Pencil::general(ctx, 1.0, gamma, Some(stiff.clone()), sigma);
            let (sol, out) = pencil.solve(&rhs, ctx.cg)?;
            outcome = out;
            let kp = disc.moment(&sol);
            for k in 0..modes {
                let l = lam[k];
                w[k] = (r.w.coeffs[k] + sigma * r.v.coeffs[k] + s2 * a * l * kp.coeffs[k]) / (1.0 + s2 * l * l);
            }
            p = sol;
        }
    }
    let v: Vec<f64> = (0..modes).map(|k| (w[k] - r.w.coeffs[k]) / sigma).collect();
    Ok((
        InertialState {
            t,
            w: PlateField::from_coeffs(w, PlateRole::Displacement),
            v: PlateField::from_coeffs(v, PlateRole::Velocity),
            p,
        },
        outcome,
    ))
}

/// Largest per-mode relative residual of `(I - sigma G(t)) y = r`.
pub fn resolvent_residual(ictx: &InertialContext, y: &InertialState, r: &InertialState, sigma: f64) -> Result<f64> {
    let disc = ictx.disc();
    let gy = apply_generator(ictx, y)?;
    let rp = disc.to_modal(&r.p);
    let yp = disc.to_modal(&y.p);
    let n3 = disc.n3();
    let mut worst: f64 = 0.0;
    for k in 0..disc.modes() {
        let mut err = 0.0;
        let mut scale = 0.0;
        let rw = y.w.coeffs[k] - sigma * gy.w.coeffs[k];
        let rv = y.v.coeffs[k] - sigma * gy.v.coeffs[k];
        err += (rw - r.w.coeffs[k]).powi(2) + (rv - r.v.coeffs[k]).powi(2);
        scale += r.w.coeffs[k].powi(2) + r.v.coeffs[k].powi(2) + y.w.coeffs[k].powi(2) + y.v.coeffs[k].powi(2);
        for j in 0..n3 {
            let lhs = yp.column(k)[j] - sigma * gy.p.column(k)[j];
            err += (lhs - rp.column(k)[j]).powi(2);
            scale += rp.column(k)[j].powi(2) + yp.column(k)[j].powi(2);
        }
        if scale > 0.0 {
            worst = worst.max((err / scale).sqrt());
        }
    }
    Ok(worst)
}

/// Scaled sources `(0, f~, g~)` at scaled time `s`.
pub fn scaled_sources(ictx: &InertialContext, sources: &SourceTerms, s: f64) -> InertialState {
    let disc = ictx.disc();
    let t = ictx.scaling.physical_time(s);
    InertialState {
        t: s,
        w: disc.zero_plate(PlateRole::Displacement),
        v: ictx.scaling.scale_load(&sources.plate_load(disc, t)),
        p: disc.to_modal(&ictx.scaling.scale_fluid_source(&sources.fluid_source(disc, t))),
    }
}

/// One step of size `sigma` (scaled time) from `y_n`.
pub fn resolvent_step(
    ictx: &InertialContext,
    y_n: &InertialState,
    sigma: f64,
    sources: &SourceTerms,
    scheme: InertialScheme,
) -> Result<(InertialState, CgOutcome)> {
    let t_next = y_n.t + sigma;
    let f_next = scaled_sources(ictx, sources, t_next);
    let mut r = y_n.clone();
    r.p = ictx.disc().to_modal(&y_n.p);
    match scheme {
        InertialScheme::BackwardEuler => {
            r.axpy(sigma, &f_next);
            solve_resolvent(ictx, &r, sigma, t_next)
        }
        InertialScheme::CrankNicolson => {
            let half = 0.5 * sigma;
            let f_now = scaled_sources(ictx, sources, y_n.t);
            r.axpy(half, &apply_generator(ictx, y_n)?);
            r.axpy(half, &f_now);
            r.axpy(half, &f_next);
            solve_resolvent(ictx, &r, half, t_next)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    /// Scaled time.
    pub t: f64,
    pub x_norm: f64,
    /// `(k~ d3 P, d3 P)` at this state.
    pub dissipation: f64,
    /// Running `sum sigma (k~ d3 P, d3 P)`.
    pub dissipated: f64,
    /// `|y_{n+1}|^2 - |y_n|^2 + 2 sigma D(y_{n+1}) - 2 sigma (F, y_{n+1})_X`;
    /// nonpositive for backward Euler.
    pub balance_defect: f64,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct InertialRun {
    /// Scaled step.
    pub sigma: f64,
    pub scheme: InertialScheme,
    pub scaling: InertialScaling,
    /// Scaled states.
    pub states: Vec<InertialState>,
    pub energy: Vec<EnergyRecord>,
}

impl InertialRun {
    /// Whether `|y_{n+1}|_X <= |y_n|_X (1 + rel)` at every step.
    pub fn is_contractive(&self, rel: f64) -> bool {
        self.energy.windows(2).all(|e| e[1].x_norm <= e[0].x_norm * (1.0 + rel))
    }

    pub fn physical_states(&self) -> Vec<InertialState> {
        self.states.iter().map(|s| self.scaling.to_physical(s)).collect()
    }
}

/// Integrates from the scaled state `y0` on physical `[0, t_final]` with
/// physical step `tau`.
pub fn run_inertial(
    ictx: &InertialContext,
    y0: &InertialState,
    sources: &SourceTerms,
    t_final: f64,
    tau: f64,
    scheme: InertialScheme,
) -> Result<InertialRun> {
    let steps = crate::quasistatic::step_count(t_final, tau)?;
    if !y0.is_finite() {
        return Err(Error::InvalidParams("initial state is not finite".into()));
    }
    let disc = ictx.disc();
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * tau).collect();
    sources.check_finite(disc, &times)?;
    let sigma = ictx.scaling.scaled_time(tau);

    let mut y = y0.clone();
    y.p = disc.to_modal(&y0.p);
    let d0 = dissipation(ictx, &y)?;
    let mut energy = vec![EnergyRecord {
        t: y.t,
        x_norm: y.x_norm(disc),
        dissipation: d0,
        ..Default::default()
    }];
    let mut states = vec![y];
    for n in 0..steps {
        let prev = &states[n];
        let (next, outcome) = resolvent_step(ictx, prev, sigma, sources, scheme)?;
        if !next.is_finite() {
            return Err(Error::Step(format!("non-finite state at step {}", n + 1)));
        }
        let diss = dissipation(ictx, &next)?;
        let forcing = scaled_sources(ictx, sources, next.t).x_dot(&next, disc);
        let norm_sq = next.x_norm_sq(disc);
        let last = energy[n];
        energy.push(EnergyRecord {
            t: next.t,
            x_norm: norm_sq.sqrt(),
            dissipation: diss,
            dissipated: last.dissipated + sigma * diss,
            balance_defect: norm_sq - last.x_norm * last.x_norm + 2.0 * sigma * diss - 2.0 * sigma * forcing,
            cg_iterations: outcome.iterations,
        });
        states.push(next);
    }
    Ok(InertialRun {
        sigma,
        scheme,
        scaling: ictx.scaling,
        states,
        energy,
    })
}

/// Modal-tail diagnostic for the combined moment `Delta W + a K P`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryReport {
    /// `sum lambda^2 q^2` with `q = -lambda W + a K P`.
    pub tail_norm_sq: f64,
    /// Share of the tail norm carried by modes with `max(m, n) > max(M, N) / 2`.
    pub high_mode_fraction: f64,
}

pub fn boundary_condition_check(ictx: &InertialContext, y: &InertialState) -> BoundaryReport {
    let disc = ictx.disc();
    let basis = &disc.basis;
    let a = ictx.scaled.params.alpha;
    let kp = disc.moment(&disc.to_modal(&y.p));
    let cutoff = basis.m().max(basis.n()) / 2;
    let mut total = 0.0;
    let mut high = 0.0;
    for (k, &l) in basis.eigenvalues().iter().enumerate() {
        let q = -l * y.w.coeffs[k] + a * kp.coeffs[k];
        let contribution = l * l * q * q;
        total += contribution;
        let (m, n) = basis.mode_of(k);
        if m.max(n) > cutoff {
            high += contribution;
        }
    }
    BoundaryReport {
        tail_norm_sq: total,
        high_mode_fraction: if total > 0.0 { high / total } else { 0.0 },
    }
}

/// Dense generator in X-orthonormal coordinates
/// `(lambda W, V, sqrt(w_j) P_j)`, where the X inner product is Euclidean.
#[derive(Debug, Clone)]
pub struct DenseGenerator {
    pub matrix: DMatrix<f64>,
    modes: usize,
    sqrt_weights: Vec<f64>,
    lambdas: Vec<f64>,
}

impl DenseGenerator {
    pub fn encode(&self, y: &InertialState, disc: &Discretization) -> DVector<f64> {
        let n3 = self.sqrt_weights.len();
        let p = disc.to_modal(&y.p);
        let mut v = DVector::zeros(2 * self.modes + p.values.len());
        for k in 0..self.modes {
            v[k] = self.lambdas[k] * y.w.coeffs[k];
            v[self.modes + k] = y.v.coeffs[k];
        }
        for (i, x) in p.values.iter().enumerate() {
            v[2 * self.modes + i] = x * self.sqrt_weights[i % n3];
        }
        v
    }

    pub fn decode(&self, v: &DVector<f64>, t: f64) -> InertialState {
        let n3 = self.sqrt_weights.len();
        let m = self.modes;
        InertialState {
            t,
            w: PlateField::from_coeffs((0..m).map(|k| v[k] / self.lambdas[k]).collect(), PlateRole::Displacement),
            v: PlateField::from_coeffs((0..m).map(|k| v[m + k]).collect(), PlateRole::Velocity),
            p: PressureField {
                values: (0..v.len() - 2 * m).map(|i| v[2 * m + i] / self.sqrt_weights[i % n3]).collect(),
                layout: PressureLayout::Modal,
                n3,
            },
        }
    }

    /// `(I - sigma G) y = r` by dense LU.
    pub fn resolvent(&self, r: &InertialState, sigma: f64, disc: &Discretization) -> Result<InertialState> {
        let n = self.matrix.nrows();
        let lhs = DMatrix::identity(n, n) - &self.matrix * sigma;
        let sol = lhs
            .lu()
            .solve(&self.encode(r, disc))
            .ok_or_else(|| Error::Size("dense resolvent is singular".into()))?;
        Ok(self.decode(&sol, r.t))
    }
}

pub fn build_dense_generator(ictx: &InertialContext, t: f64) -> Result<DenseGenerator> {
    let disc = ictx.disc();
    let n = 2 * disc.modes() + disc.unknowns();
    if disc.unknowns() > crate::operators::MAX_DENSE_UNKNOWNS {
        return Err(Error::Size(format!(
            "dense generator limited to {} pressure unknowns, got {}",
            crate::operators::MAX_DENSE_UNKNOWNS,
            disc.unknowns()
        )));
    }
    let mut gen = DenseGenerator {
        matrix: DMatrix::zeros(n, n),
        modes: disc.modes(),
        sqrt_weights: disc.grid.weights().iter().map(|w| w.sqrt()).collect(),
        lambdas: disc.basis.eigenvalues().to_vec(),
    };
    let stiff = ictx.scaled.stiffness_at(t)?;
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let y = gen.decode(&e, t);
        let gy = apply_generator_with(&ictx.scaled, &stiff, &y);
        let col = gen.encode(&gy, disc);
        gen.matrix.column_mut(i).copy_from_slice(col.as_slice());
    }
    Ok(gen)
}

/// Whether the permeability structure allows the per-mode direct blocks.
pub fn uses_direct_blocks(k: &PermeabilityModel) -> bool {
    k.structure != PermeabilityStructure::General
}
