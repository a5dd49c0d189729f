use super::{SineBasis, TransverseGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateRole {
    Displacement,
    Velocity,
    Load,
    Moment,
}

/// Sine coefficients of an in-plane field, one per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateField {
    pub coeffs: Vec<f64>,
    pub role: PlateRole,
}

impl PlateField {
    pub fn zeros(modes: usize, role: PlateRole) -> Self {
        Self {
            coeffs: vec![0.0; modes],
            role,
        }
    }

    pub fn from_coeffs(coeffs: Vec<f64>, role: PlateRole) -> Self {
        Self { coeffs, role }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// `L2(omega)` norm (orthonormal modes).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Laplacian norm `||Delta w|| = (sum lambda^2 c^2)^(1/2)`.
    pub fn w_norm(&self, basis: &SineBasis) -> f64 {
        self.coeffs
            .iter()
            .zip(basis.eigenvalues())
            .map(|(c, l)| (l * c).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Dual norm on `W'`: `(sum c^2 / lambda^2)^(1/2)`.
    pub fn w_dual_norm(&self, basis: &SineBasis) -> f64 {
        self.coeffs
            .iter()
            .zip(basis.eigenvalues())
            .map(|(c, l)| (c / l).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, other: &PlateField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn axpy(&mut self, a: f64, x: &PlateField) {
        for (y, v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|v| *v *= a);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureLayout {
    /// `values[mode * N3 + j]`
    Modal,
    /// `values[point * N3 + j]` on the in-plane collocation lattice
    Collocation,
}

/// Pressure on (in-plane representation) x (transverse nodes), x3-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    pub values: Vec<f64>,
    pub layout: PressureLayout,
    pub n3: usize,
}

impl PressureField {
    pub fn zeros(in_plane: usize, n3: usize, layout: PressureLayout) -> Self {
        Self {
            values: vec![0.0; in_plane * n3],
            layout,
            n3,
        }
    }

    pub fn in_plane_len(&self) -> usize {
        self.values.len() / self.n3
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.values[k * self.n3..(k + 1) * self.n3]
    }

    pub fn column_mut(&mut self, k: usize) -> &mut [f64] {
        let n3 = self.n3;
        &mut self.values[k * n3..(k + 1) * n3]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.n3)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn axpy(&mut self, a: f64, x: &PressureField) {
        debug_assert_eq!(self.layout, x.layout);
        for (y, v) in self.values.iter_mut().zip(&x.values) {
            *y += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }
}

/// The in-plane basis and transverse grid together.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub basis: SineBasis,
    pub grid: TransverseGrid,
}

impl Discretization {
    pub fn new(m: usize, n: usize, n3: usize, h: f64) -> Result<Self> {
        Ok(Self {
            basis: SineBasis::new(m, n)?,
            grid: TransverseGrid::new(n3, h)?,
        })
    }

    pub fn modes(&self) -> usize {
        self.basis.len()
    }

    pub fn n3(&self) -> usize {
        self.grid.len()
    }

    pub fn unknowns(&self) -> usize {
        self.modes() * self.n3()
    }

    pub fn zero_plate(&self, role: PlateRole) -> PlateField {
        PlateField::zeros(self.modes(), role)
    }

    pub fn zero_pressure(&self) -> PressureField {
        PressureField::zeros(self.modes(), self.n3(), PressureLayout::Modal)
    }

    /// Pressure from a profile in x3 times one in-plane mode coefficient
    /// pattern: `p(mode, x3_j) = coeffs[mode] * profile(x3_j)`.
    pub fn separable_pressure(&self, coeffs: &[f64], profile: impl Fn(f64) -> f64) -> PressureField {
        let mut p = self.zero_pressure();
        let prof: Vec<f64> = self.grid.nodes().iter().map(|&x| profile(x)).collect();
        for (k, c) in coeffs.iter().enumerate() {
            for (v, s) in p.column_mut(k).iter_mut().zip(&prof) {
                *v = c * s;
            }
        }
        p
    }

    /// Samples `f(x1, x2, x3)` on the collocation lattice and returns the
    /// modal-layout field.
    pub fn sample_pressure(&self, f: impl Fn(f64, f64, f64) -> f64) -> PressureField {
        let n3 = self.n3();
        let mut vals = vec![0.0; self.modes() * n3];
        for k in 0..self.modes() {
            let (x1, x2) = self.basis.collocation_point(k);
            for (j, &x3) in self.grid.nodes().iter().enumerate() {
                vals[k * n3 + j] = f(x1, x2, x3);
            }
        }
        self.to_modal(&PressureField {
            values: vals,
            layout: PressureLayout::Collocation,
            n3,
        })
    }

    /// Samples `f(x1, x2)` on the collocation lattice and projects to modes.
    pub fn sample_plate(&self, f: impl Fn(f64, f64) -> f64, role: PlateRole) -> PlateField {
        let vals: Vec<f64> = (0..self.modes())
            .map(|k| {
                let (x1, x2) = self.basis.collocation_point(k);
                f(x1, x2)
            })
            .collect();
        PlateField::from_coeffs(self.basis.to_modal(&vals, 1), role)
    }

    pub fn to_collocation(&self, p: &PressureField) -> PressureField {
        match p.layout {
            PressureLayout::Collocation => p.clone(),
            PressureLayout::Modal => PressureField {
                values: self.basis.to_collocation(&p.values, p.n3),
                layout: PressureLayout::Collocation,
                n3: p.n3,
            },
        }
    }

    pub fn to_modal(&self, p: &PressureField) -> PressureField {
        match p.layout {
            PressureLayout::Modal => p.clone(),
            PressureLayout::Collocation => PressureField {
                values: self.basis.to_modal(&p.values, p.n3),
                layout: PressureLayout::Modal,
                n3: p.n3,
            },
        }
    }

    /// Plate field values on the collocation lattice.
    pub fn plate_values(&self, w: &PlateField) -> Vec<f64> {
        self.basis.to_collocation(&w.coeffs, 1)
    }

    fn in_plane_weight(&self, layout: PressureLayout) -> f64 {
        match layout {
            PressureLayout::Modal => 1.0,
            PressureLayout::Collocation => self.basis.collocation_weight(),
        }
    }

    /// `L2(Omega_p)` inner product.
    pub fn dot(&self, a: &PressureField, b: &PressureField) -> f64 {
        debug_assert_eq!(a.layout, b.layout);
        let s: f64 = a
            .columns()
            .zip(b.columns())
            .map(|(x, y)| self.grid.dot(x, y))
            .sum();
        s * self.in_plane_weight(a.layout)
    }

    pub fn l2_norm(&self, p: &PressureField) -> f64 {
        self.dot(p, p).sqrt()
    }

    /// Discrete `||d/dx3 p||^2`.
    pub fn gradient_norm_sq(&self, p: &PressureField) -> f64 {
        p.columns().map(|c| self.grid.gradient_norm_sq(c)).sum::<f64>()
            * self.in_plane_weight(p.layout)
    }

    /// `||p||_V^2 = ||p||^2 + ||d/dx3 p||^2`.
    pub fn v_norm_sq(&self, p: &PressureField) -> f64 {
        self.dot(p, p) + self.gradient_norm_sq(p)
    }

    pub fn v_norm(&self, p: &PressureField) -> f64 {
        self.v_norm_sq(p).sqrt()
    }

    /// Dual norm on `V'` of a functional represented in the quadrature
    /// pairing: `sup (g, q) / ||q||_V`, computed from the Riesz
    /// representative `r` solving `(I + S) r = g` columnwise.
    pub fn v_dual_norm_sq(&self, g: &PressureField) -> f64 {
        let n3 = self.n3();
        let ones = vec![1.0; n3 - 1];
        let mut r = vec![0.0; n3];
        let mut acc = 0.0;
        for col in g.columns() {
            self.grid.solve_shifted(1.0, 1.0, &ones, col, &mut r);
            acc += self.grid.dot(col, &r);
        }
        acc * self.in_plane_weight(g.layout)
    }

    /// Transverse moment `K p = int x3 p dx3`, per mode (or per point).
    pub fn moment(&self, p: &PressureField) -> PlateField {
        let coeffs: Vec<f64> = p.columns().map(|c| self.grid.moment(c)).collect();
        let coeffs = match p.layout {
            PressureLayout::Modal => coeffs,
            PressureLayout::Collocation => self.basis.to_modal(&coeffs, 1),
        };
        PlateField::from_coeffs(coeffs, PlateRole::Moment)
    }

    /// Lift `K~ q = x3 q` into a modal-layout pressure field.
    pub fn lift_moment(&self, q: &PlateField) -> PressureField {
        self.separable_pressure(&q.coeffs, |x| x)
    }

    pub fn check_layout(&self, p: &PressureField) -> Result<()> {
        if p.n3 != self.n3() || p.in_plane_len() != self.modes() {
            return Err(Error::Layout(format!(
                "pressure shape {}x{} does not match discretization {}x{}",
                p.in_plane_len(),
                p.n3,
                self.modes(),
                self.n3()
            )));
        }
        Ok(())
    }
}
