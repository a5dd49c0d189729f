//! Matrix-free operators of the pressure/plate system.
//!
//! Sign convention: sine modes diagonalize the Dirichlet Laplacian with
//! `Delta_D -> -lambda`, so `E = Delta_D^2 -> lambda^2`, `E^{1/2} -> lambda`.
//! The plate equation `D Delta^2 w + alpha Delta K p = f` becomes, per mode,
//! `D lambda^2 w - alpha lambda (Kp) = f`.

mod cg;
mod dense;

pub use cg::{pcg, CgOutcome, CgSettings};
pub use dense::{build_dense_oracle, DenseOracle, MAX_DENSE_UNKNOWNS};

use crate::discretization::{Discretization, PlateField, PlateRole, PressureField, PressureLayout};
use crate::error::{Error, Result};
use crate::model::{PermeabilityModel, PermeabilityStructure, PhysicalParams};

/// Edge permeabilities for one time level.
#[derive(Debug, Clone, PartialEq)]
pub enum Stiffness {
    /// One column of edge values shared by every in-plane point.
    Shared(Vec<f64>),
    /// `values[point * (N3 - 1) + e]` on the in-plane collocation lattice.
    PerPoint { values: Vec<f64>, edges: usize },
}

impl Stiffness {
    /// In-plane average per edge, used for column preconditioning.
    pub fn averaged(&self) -> Vec<f64> {
        match self {
            Stiffness::Shared(k) => k.clone(),
            Stiffness::PerPoint { values, edges } => {
                let points = values.len() / edges;
                let mut avg = vec![0.0; *edges];
                for col in values.chunks_exact(*edges) {
                    for (a, v) in avg.iter_mut().zip(col) {
                        *a += v;
                    }
                }
                avg.iter_mut().for_each(|a| *a /= points as f64);
                avg
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct OperatorContext {
    pub params: PhysicalParams,
    pub disc: Discretization,
    pub permeability: PermeabilityModel,
    pub cg: CgSettings,
}

impl OperatorContext {
    pub fn new(params: PhysicalParams, disc: Discretization, permeability: PermeabilityModel) -> Result<Self> {
        params.validate().into_result()?;
        if (params.h - disc.grid.half_thickness()).abs() > 1e-14 * params.h {
            return Err(Error::InvalidParams(format!(
                "grid half-thickness {} does not match h = {}",
                disc.grid.half_thickness(),
                params.h
            )));
        }
        if !(permeability.k_lower > 0.0) || !(permeability.k_upper >= permeability.k_lower) {
            return Err(Error::InvalidParams(format!(
                "permeability bounds [{}, {}] are not admissible",
                permeability.k_lower, permeability.k_upper
            )));
        }
        Ok(Self {
            params,
            disc,
            permeability,
            cg: CgSettings::default(),
        })
    }

    pub fn with_cg(mut self, cg: CgSettings) -> Self {
        self.cg = cg;
        self
    }

    pub fn beta(&self) -> f64 {
        self.params.beta()
    }

    /// Samples `k(., t)` at every edge midpoint the operator touches,
    /// enforcing the declared bounds.
    pub fn stiffness_at(&self, t: f64) -> Result<Stiffness> {
        let grid = &self.disc.grid;
        let k = &self.permeability;
        match k.structure {
            PermeabilityStructure::Constant | PermeabilityStructure::TransverseOnly => {
                let edges = grid
                    .midpoints()
                    .iter()
                    .map(|&x3| k.checked(0.5, 0.5, x3, t))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Stiffness::Shared(edges))
            }
            PermeabilityStructure::General => {
                let basis = &self.disc.basis;
                let edges = grid.len() - 1;
                let mut values = Vec::with_capacity(basis.len() * edges);
                for point in 0..basis.len() {
                    let (x1, x2) = basis.collocation_point(point);
                    for &x3 in grid.midpoints() {
                        values.push(k.checked(x1, x2, x3, t)?);
                    }
                }
                Ok(Stiffness::PerPoint { values, edges })
            }
        }
    }

    /// `A(t) p` as the Riesz representative of `(k d3 p, d3 .)`.
    pub fn apply_a(&self, p: &PressureField, t: f64) -> Result<PressureField> {
        let stiff = self.stiffness_at(t)?;
        Ok(self.apply_a_with(&stiff, p))
    }

    pub fn apply_a_with(&self, stiff: &Stiffness, p: &PressureField) -> PressureField {
        let grid = &self.disc.grid;
        match stiff {
            Stiffness::Shared(k) => {
                let mut out = PressureField::zeros(p.in_plane_len(), p.n3, p.layout);
                for (col, dst) in p.columns().zip(out.values.chunks_exact_mut(p.n3)) {
                    grid.apply_operator(k, col, dst);
                }
                out
            }
            Stiffness::PerPoint { values, edges } => {
                let colloc = self.disc.to_collocation(p);
                let mut out = PressureField::zeros(colloc.in_plane_len(), colloc.n3, PressureLayout::Collocation);
                for (point, (col, dst)) in colloc.columns().zip(out.values.chunks_exact_mut(p.n3)).enumerate() {
                    grid.apply_operator(&values[point * edges..(point + 1) * edges], col, dst);
                }
                match p.layout {
                    PressureLayout::Modal => self.disc.to_modal(&out),
                    PressureLayout::Collocation => out,
                }
            }
        }
    }

    /// `(A(t) p, q)` evaluated through the stiffness form.
    pub fn a_form(&self, stiff: &Stiffness, p: &PressureField, q: &PressureField) -> f64 {
        let grid = &self.disc.grid;
        match stiff {
            Stiffness::Shared(k) => {
                let s: f64 = p.columns().zip(q.columns()).map(|(a, b)| grid.stiffness_form(k, a, b)).sum();
                s * if p.layout == PressureLayout::Collocation {
                    self.disc.basis.collocation_weight()
                } else {
                    1.0
                }
            }
            Stiffness::PerPoint { values, edges } => {
                let (pc, qc) = (self.disc.to_collocation(p), self.disc.to_collocation(q));
                let s: f64 = pc
                    .columns()
                    .zip(qc.columns())
                    .enumerate()
                    .map(|(point, (a, b))| grid.stiffness_form(&values[point * edges..(point + 1) * edges], a, b))
                    .sum();
                s * self.disc.basis.collocation_weight()
            }
        }
    }

    /// `B p = beta K~ K p`.
    pub fn apply_b(&self, p: &PressureField) -> PressureField {
        let modal = self.disc.to_modal(p);
        let mut kp = self.disc.moment(&modal);
        kp.scale(self.beta());
        self.relayout(self.disc.lift_moment(&kp), p.layout)
    }

    /// `B p` composed literally along
    /// `K -> (-alpha Delta_D) -> (D E)^{-1} -> Delta_D -> (-alpha K~)`.
    pub fn apply_b_via_diagram(&self, p: &PressureField) -> PressureField {
        let modal = self.disc.to_modal(p);
        let kp = self.disc.moment(&modal);
        let (alpha, d) = (self.params.alpha, self.params.d);
        let lam = self.disc.basis.eigenvalues();
        let chain: Vec<f64> = kp
            .coeffs
            .iter()
            .zip(lam)
            .map(|(&q, &l)| {
                let forcing = -alpha * (-l * q);
                let w = forcing / (d * l * l);
                let lap_w = -l * w;
                -alpha * lap_w
            })
            .collect();
        let lifted = self.disc.lift_moment(&PlateField::from_coeffs(chain, PlateRole::Moment));
        self.relayout(lifted, p.layout)
    }

    /// `(c_p I + B) p`.
    pub fn apply_fluid_content(&self, p: &PressureField) -> PressureField {
        let mut out = self.apply_b(p);
        out.axpy(self.params.c_p, p);
        out
    }

    /// Solves `(c_p I + B) p = d` by conjugate gradients.
    pub fn invert_fluid_content(&self, d: &PressureField, settings: CgSettings) -> Result<(PressureField, CgOutcome)> {
        let pencil = Pencil::quasistatic(self, None, 0.0);
        pencil.solve(&self.disc.to_modal(d), settings)
    }

    /// Two-sided bounds `||d|| / upper <= ||(c_p I + B)^{-1} d|| <= ||d|| / c_p`
    /// for the discrete operator; returns `(c_p, upper)`.
    pub fn fluid_content_spectrum(&self) -> (f64, f64) {
        let c = self.params.c_p;
        (c, c + self.beta() * self.disc.grid.second_moment())
    }

    /// Modal plate solve `w = (f + alpha lambda Kp) / (D lambda^2)`.
    pub fn solve_plate(&self, pressure_moment: &PlateField, f: &PlateField) -> PlateField {
        let (alpha, d) = (self.params.alpha, self.params.d);
        let coeffs = self
            .disc
            .basis
            .eigenvalues()
            .iter()
            .zip(&pressure_moment.coeffs)
            .zip(&f.coeffs)
            .map(|((&l, &kp), &fv)| (fv + alpha * l * kp) / (d * l * l))
            .collect();
        PlateField::from_coeffs(coeffs, PlateRole::Displacement)
    }

    /// Modal plate operator `D Delta^2 w + alpha Delta K p`.
    pub fn plate_operator(&self, w: &PlateField, pressure_moment: &PlateField) -> PlateField {
        let (alpha, d) = (self.params.alpha, self.params.d);
        let coeffs = self
            .disc
            .basis
            .eigenvalues()
            .iter()
            .zip(&w.coeffs)
            .zip(&pressure_moment.coeffs)
            .map(|((&l, &wv), &kp)| d * l * l * wv - alpha * l * kp)
            .collect();
        PlateField::from_coeffs(coeffs, PlateRole::Load)
    }

    /// Relative residual of the modal plate equation.
    pub fn plate_residual(&self, w: &PlateField, pressure_moment: &PlateField, f: &PlateField) -> f64 {
        let lhs = self.plate_operator(w, pressure_moment);
        let mut scale: f64 = 0.0;
        let mut err: f64 = 0.0;
        for (((l, wv), kp), (fv, lv)) in self
            .disc
            .basis
            .eigenvalues()
            .iter()
            .zip(&w.coeffs)
            .zip(&pressure_moment.coeffs)
            .zip(f.coeffs.iter().zip(&lhs.coeffs))
        {
            let terms = (self.params.d * l * l * wv).abs() + (self.params.alpha * l * kp).abs() + fv.abs();
            scale = scale.max(terms);
            err = err.max((lv - fv).abs());
        }
        if scale == 0.0 {
            0.0
        } else {
            err / scale
        }
    }

    /// `Delta_D w` lifted by `x3`: the field `x3 Delta_D w` in modal layout.
    pub fn lift_laplacian(&self, w: &PlateField) -> PressureField {
        let lap: Vec<f64> = w
            .coeffs
            .iter()
            .zip(self.disc.basis.eigenvalues())
            .map(|(c, l)| -l * c)
            .collect();
        self.disc.lift_moment(&PlateField::from_coeffs(lap, PlateRole::Moment))
    }

    /// Fluid content `zeta = c_p p - alpha x3 Delta w`.
    pub fn fluid_content(&self, p: &PressureField, w: &PlateField) -> PressureField {
        let mut zeta = self.disc.to_modal(p).scaled(self.params.c_p);
        zeta.axpy(-self.params.alpha, &self.lift_laplacian(w));
        zeta
    }

    fn relayout(&self, modal: PressureField, layout: PressureLayout) -> PressureField {
        match layout {
            PressureLayout::Modal => modal,
            PressureLayout::Collocation => self.disc.to_collocation(&modal),
        }
    }
}

/// Column-structured SPD operator
/// `L p = shift p + gamma_col (x3 (m . p_col)) + dt A p`
/// on modal-layout fields, with a columnwise exact preconditioner for the
/// in-plane averaged permeability.
pub struct Pencil<'a> {
    ctx: &'a OperatorContext,
    shift: f64,
    rank_coef: Vec<f64>,
    stiffness: Option<Stiffness>,
    dt: f64,
}

impl<'a> Pencil<'a> {
    /// `(c_p I + B + dt A)` (or `c_p I + B` when `stiffness` is `None`).
    pub fn quasistatic(ctx: &'a OperatorContext, stiffness: Option<Stiffness>, dt: f64) -> Self {
        let rank_coef = vec![ctx.beta(); ctx.disc.modes()];
        Self {
            ctx,
            shift: ctx.params.c_p,
            rank_coef,
            stiffness,
            dt,
        }
    }

    pub fn general(ctx: &'a OperatorContext, shift: f64, rank_coef: Vec<f64>, stiffness: Option<Stiffness>, dt: f64) -> Self {
        assert_eq!(rank_coef.len(), ctx.disc.modes());
        Self {
            ctx,
            shift,
            rank_coef,
            stiffness,
            dt,
        }
    }

    pub fn apply(&self, p: &[f64], out: &mut [f64]) {
        let disc = &self.ctx.disc;
        let grid = &disc.grid;
        let n3 = grid.len();
        for (k, (col, dst)) in p.chunks_exact(n3).zip(out.chunks_exact_mut(n3)).enumerate() {
            let m = grid.moment(col) * self.rank_coef[k];
            for ((d, v), x) in dst.iter_mut().zip(col).zip(grid.nodes()) {
                *d = self.shift * v + m * x;
            }
        }
        if let Some(stiff) = &self.stiffness {
            if self.dt != 0.0 {
                let field = PressureField {
                    values: p.to_vec(),
                    layout: PressureLayout::Modal,
                    n3,
                };
                let ap = self.ctx.apply_a_with(stiff, &field);
                for (d, a) in out.iter_mut().zip(&ap.values) {
                    *d += self.dt * a;
                }
            }
        }
    }

    fn precondition(&self, edge_k: &[f64], r: &[f64], z: &mut [f64]) {
        let grid = &self.ctx.disc.grid;
        let n3 = grid.len();
        // P = shift I + dt W^{-1} S(k_avg); u = P^{-1} x3, shared by all columns
        let mut u = vec![0.0; n3];
        grid.solve_shifted(self.shift, self.dt, edge_k, grid.nodes(), &mut u);
        let mu = grid.moment(&u);
        for (k, (col, dst)) in r.chunks_exact(n3).zip(z.chunks_exact_mut(n3)).enumerate() {
            grid.solve_shifted(self.shift, self.dt, edge_k, col, dst);
            let gamma = self.rank_coef[k];
            let factor = gamma * grid.moment(dst) / (1.0 + gamma * mu);
            for (d, ui) in dst.iter_mut().zip(&u) {
                *d -= factor * ui;
            }
        }
    }

    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let grid = &self.ctx.disc.grid;
        a.chunks_exact(grid.len())
            .zip(b.chunks_exact(grid.len()))
            .map(|(x, y)| grid.dot(x, y))
            .sum()
    }

    /// Solves `L p = rhs` (modal layout) starting from zero.
    pub fn solve(&self, rhs: &PressureField, settings: CgSettings) -> Result<(PressureField, CgOutcome)> {
        self.solve_from(rhs, None, settings)
    }

    pub fn solve_from(
        &self,
        rhs: &PressureField,
        guess: Option<&PressureField>,
        settings: CgSettings,
    ) -> Result<(PressureField, CgOutcome)> {
        let n3 = self.ctx.disc.n3();
        let edge_k = match &self.stiffness {
            Some(s) => s.averaged(),
            None => vec![0.0; n3 - 1],
        };
        let mut x = guess.map(|g| g.values.clone()).unwrap_or_else(|| vec![0.0; rhs.values.len()]);
        let outcome = pcg(
            |p, out| self.apply(p, out),
            |r, z| self.precondition(&edge_k, r, z),
            |a, b| self.dot(a, b),
            &rhs.values,
            &mut x,
            settings,
        )?;
        Ok((
            PressureField {
                values: x,
                layout: PressureLayout::Modal,
                n3,
            },
            outcome,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ctx(m: usize, n3: usize, k: PermeabilityModel) -> OperatorContext {
        let params = PhysicalParams::new(1.3, 0.8, 0.7, 0.0, 0.5);
        OperatorContext::new(params, Discretization::new(m, m, n3, 0.5).unwrap(), k).unwrap()
    }

    fn random_field(c: &OperatorContext, rng: &mut ChaCha8Rng) -> PressureField {
        let mut p = c.disc.zero_pressure();
        p.values.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        p
    }

    fn general_k() -> PermeabilityModel {
        PermeabilityModel::new("bump", PermeabilityStructure::General, 0.5, 2.0, |x1, x2, x3, t| {
            1.0 + 0.4 * (PI * x1).sin() * (PI * x2).cos() + 0.2 * x3 + 0.1 * t.sin()
        })
    }

    #[test]
    fn a_kills_constants_in_x3() {
        for k in [PermeabilityModel::constant(1.0), general_k()] {
            let c = ctx(3, 9, k);
            let p = c.disc.separable_pressure(&[1.0, -2.0, 0.3, 0.0, 1.0, 4.0, 0.5, 0.5, 0.1], |_| 1.0);
            let ap = c.apply_a(&p, 0.3).unwrap();
            assert!(ap.values.iter().all(|v| v.abs() < 1e-10), "{:?}", ap.values);
        }
    }

    #[test]
    fn a_on_neumann_eigenfunction() {
        let h = 0.5;
        let mu = (PI / (2.0 * h)).powi(2);
        let mut prev = f64::INFINITY;
        for &n3 in &[17, 33, 65] {
            let c = ctx(2, n3, PermeabilityModel::constant(1.0));
            let p = c.disc.separable_pressure(&[0.0, 1.0, 0.0, 0.0], |x| (PI * (x + h) / (2.0 * h)).cos());
            let ap = c.apply_a(&p, 0.0).unwrap();
            let mut diff = p.scaled(mu);
            diff.axpy(-1.0, &ap);
            let rel = c.disc.l2_norm(&diff) / (mu * c.disc.l2_norm(&p));
            assert!(rel < prev / 3.5, "n3={n3} rel={rel}");
            prev = rel;
        }
    }

    #[test]
    fn a_is_coercive_in_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = general_k();
        let c = ctx(3, 17, k.clone());
        let stiff = c.stiffness_at(0.7).unwrap();
        for _ in 0..100 {
            let p = random_field(&c, &mut rng);
            let ap = c.apply_a_with(&stiff, &p);
            let form = c.disc.dot(&ap, &p);
            assert!((form - c.a_form(&stiff, &p, &p)).abs() < 1e-10 * form.abs());
            assert!(form >= k.k_lower * c.disc.gradient_norm_sq(&p) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn b_kills_constants_and_scales_x3() {
        let c = ctx(2, 33, PermeabilityModel::constant(1.0));
        let ones = c.disc.separable_pressure(&[1.0; 4], |_| 1.0);
        assert!(c.apply_b(&ones).values.iter().all(|v| v.abs() < 1e-15));
        let x3 = c.disc.separable_pressure(&[1.0; 4], |x| x);
        let bx = c.apply_b(&x3);
        let expected = c.beta() * 2.0 * 0.125 / 3.0;
        let dx = c.disc.grid.spacing();
        for (b, x) in bx.values.iter().zip(&x3.values) {
            assert!((b - expected * x).abs() <= c.beta() * dx * dx * 0.5 / 3.0 * x.abs() + 1e-15);
        }
    }

    #[test]
    fn diagram_collapses_to_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let c = ctx(4, 33, PermeabilityModel::constant(1.0));
        for _ in 0..10 {
            let p = random_field(&c, &mut rng);
            let b1 = c.apply_b(&p);
            let b2 = c.apply_b_via_diagram(&p);
            let mut d = b1.clone();
            d.axpy(-1.0, &b2);
            assert!(c.disc.l2_norm(&d) <= 1e-12 * c.disc.l2_norm(&b1));
        }
    }

    #[test]
    fn diagram_single_mode_hand_composition() {
        let c = ctx(1, 9, PermeabilityModel::constant(1.0));
        let p = c.disc.separable_pressure(&[0.5], |x| x);
        let lam = 2.0 * PI * PI;
        let (alpha, d) = (c.params.alpha, c.params.d);
        let kp = c.disc.grid.second_moment() * 0.5;
        let w = (alpha * lam * kp) / (d * lam * lam);
        let expected = -alpha * (-lam * w);
        let b = c.apply_b_via_diagram(&p);
        for (v, x) in b.values.iter().zip(c.disc.grid.nodes()) {
            assert!((v - expected * x).abs() < 1e-14);
        }
        assert!((expected - c.beta() * kp).abs() < 1e-14);
    }

    #[test]
    fn fluid_content_inverse_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c = ctx(3, 17, PermeabilityModel::constant(1.0));
        let ones = c.disc.separable_pressure(&[1.0; 9], |_| 1.0);
        let d = ones.scaled(c.params.c_p);
        let (p, _) = c.invert_fluid_content(&d, CgSettings::with_tol(1e-13)).unwrap();
        let mut diff = p.clone();
        diff.axpy(-1.0, &ones);
        assert!(c.disc.l2_norm(&diff) < 1e-12);

        let (lo, hi) = c.fluid_content_spectrum();
        for _ in 0..20 {
            let d = random_field(&c, &mut rng);
            let (p, _) = c.invert_fluid_content(&d, CgSettings::with_tol(1e-12)).unwrap();
            let mut r = c.apply_fluid_content(&p);
            r.axpy(-1.0, &d);
            assert!(c.disc.l2_norm(&r) <= 1e-12 * c.disc.l2_norm(&d) * 10.0);
            let (np, nd) = (c.disc.l2_norm(&p), c.disc.l2_norm(&d));
            assert!(np <= nd / lo * (1.0 + 1e-10));
            assert!(np >= nd / hi * (1.0 - 1e-10));
        }
    }

    #[test]
    fn fluid_content_of_x3_profile() {
        let c = ctx(1, 65, PermeabilityModel::constant(1.0));
        let d = c.disc.separable_pressure(&[1.0], |x| x);
        let (p, _) = c.invert_fluid_content(&d, CgSettings::with_tol(1e-13)).unwrap();
        let exact = 1.0 / (c.params.c_p + c.beta() * 2.0 * 0.125 / 3.0);
        let dx = c.disc.grid.spacing();
        for (v, x) in p.values.iter().zip(c.disc.grid.nodes()) {
            assert!((v - exact * x).abs() <= 2.0 * c.beta() * dx * dx * x.abs() + 1e-13);
        }
    }

    #[test]
    fn plate_solve_round_trip_and_single_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let c = ctx(3, 9, PermeabilityModel::constant(1.0));
        let mut f = c.disc.zero_plate(PlateRole::Load);
        f.coeffs[0] = 1.0;
        let zero_moment = c.disc.zero_plate(PlateRole::Moment);
        let w = c.solve_plate(&zero_moment, &f);
        let lam = 2.0 * PI * PI;
        assert!((w.coeffs[0] - 1.0 / (c.params.d * lam * lam)).abs() < 1e-16);
        assert!(w.coeffs[1..].iter().all(|v| *v == 0.0));

        let p = random_field(&c, &mut rng);
        let f = PlateField::from_coeffs((0..9).map(|_| rng.gen_range(-1.0..1.0)).collect(), PlateRole::Load);
        let kp = c.disc.moment(&p);
        let w = c.solve_plate(&kp, &f);
        assert!(c.plate_residual(&w, &kp, &f) < 1e-12);
        // Bp = -alpha K~ Delta_D w when f = 0
        let w0 = c.solve_plate(&kp, &c.disc.zero_plate(PlateRole::Load));
        let mut via_plate = c.lift_laplacian(&w0).scaled(-c.params.alpha);
        via_plate.axpy(-1.0, &c.apply_b(&p));
        assert!(c.disc.l2_norm(&via_plate) < 1e-13 * c.disc.l2_norm(&p));
    }

    #[test]
    fn operators_are_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let c = ctx(2, 9, general_k());
        let stiff = c.stiffness_at(0.2).unwrap();
        for _ in 0..10 {
            let (p, q) = (random_field(&c, &mut rng), random_field(&c, &mut rng));
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mut comb = p.scaled(a);
            comb.axpy(b, &q);
            let ops: Vec<Box<dyn Fn(&PressureField) -> PressureField>> = vec![
                Box::new(|x| c.apply_a_with(&stiff, x)),
                Box::new(|x| c.apply_b(x)),
                Box::new(|x| c.apply_fluid_content(x)),
            ];
            for op in &ops {
                let mut lhs = op(&comb);
                let mut rhs = op(&p).scaled(a);
                rhs.axpy(b, &op(&q));
                lhs.axpy(-1.0, &rhs);
                assert!(c.disc.l2_norm(&lhs) <= 1e-12 * c.disc.l2_norm(&rhs).max(1.0));
            }
        }
    }

    #[test]
    fn out_of_bounds_permeability_is_rejected_during_assembly() {
        let k = PermeabilityModel::new("bad", PermeabilityStructure::TransverseOnly, 0.5, 1.5, |_, _, x3, _| 1.0 + 4.0 * x3);
        let c = ctx(1, 9, k);
        assert!(matches!(c.stiffness_at(0.0), Err(Error::BoundsViolation { .. })));
    }

    #[test]
    fn collocation_and_modal_layouts_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let c = ctx(3, 9, general_k());
        let p = random_field(&c, &mut rng);
        let pc = c.disc.to_collocation(&p);
        for (a, b) in [
            (c.apply_a(&p, 0.4).unwrap(), c.apply_a(&pc, 0.4).unwrap()),
            (c.apply_b(&p), c.apply_b(&pc)),
        ] {
            let back = c.disc.to_modal(&b);
            let mut d = a.clone();
            d.axpy(-1.0, &back);
            assert!(c.disc.l2_norm(&d) < 1e-12 * c.disc.l2_norm(&a).max(1.0));
        }
    }
}
