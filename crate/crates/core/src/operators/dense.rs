//! Dense matrices assembled column by column from the matrix-free
//! operators, for verification on small problems.
//!
//! Pressure matrices are expressed in quadrature-orthonormal coordinates
//! (`sqrt(w_j) p_j`), where self-adjointness in the discrete `L2(Omega_p)`
//! inner product is ordinary matrix symmetry.

use nalgebra::{DMatrix, DVector};

use super::OperatorContext;
use crate::discretization::{PlateRole, PressureField, PressureLayout};
use crate::error::{Error, Result};

pub const MAX_DENSE_UNKNOWNS: usize = 4096;

#[derive(Debug, Clone)]
pub struct DenseOracle {
    pub t: f64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub fluid_content: DMatrix<f64>,
    /// Pressure (orthonormal coordinates) to plate displacement (modal), `f = 0`.
    pub plate_solve: DMatrix<f64>,
    sqrt_weights: Vec<f64>,
    n3: usize,
}

impl DenseOracle {
    /// Pressure field to orthonormal coordinates.
    pub fn encode(&self, p: &PressureField) -> DVector<f64> {
        DVector::from_iterator(
            p.values.len(),
            p.values.iter().enumerate().map(|(i, v)| v * self.sqrt_weights[i % self.n3]),
        )
    }

    pub fn decode(&self, v: &DVector<f64>) -> PressureField {
        PressureField {
            values: v.iter().enumerate().map(|(i, x)| x / self.sqrt_weights[i % self.n3]).collect(),
            layout: PressureLayout::Modal,
            n3: self.n3,
        }
    }

    /// `(c_p I + B + dt A) p_next = (c_p I + B) p_prev + dt g` by dense LU.
    pub fn quasistatic_step(&self, p_prev: &PressureField, g: &PressureField, dt: f64) -> Result<PressureField> {
        let lhs = &self.fluid_content + &self.a * dt;
        let rhs = &self.fluid_content * self.encode(p_prev) + self.encode(g) * dt;
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Size("dense quasi-static pencil is singular".into()))?;
        Ok(self.decode(&sol))
    }

    pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        (m - m.transpose()).norm() / norm
    }

    pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
        let sym = (m + m.transpose()) * 0.5;
        sym.symmetric_eigen().eigenvalues.min()
    }

    /// Numerical rank with relative threshold `tol`.
    pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
        let svd = m.clone().svd(false, false);
        let max = svd.singular_values.max();
        svd.singular_values.iter().filter(|s| **s > tol * max).count()
    }
}

/// Assembles the dense oracle at time `t`.
pub fn build_dense_oracle(ctx: &OperatorContext, t: f64) -> Result<DenseOracle> {
    let n = ctx.disc.unknowns();
    if n > MAX_DENSE_UNKNOWNS {
        return Err(Error::Size(format!(
            "dense oracle limited to {MAX_DENSE_UNKNOWNS} unknowns, got {n}"
        )));
    }
    let n3 = ctx.disc.n3();
    let sqrt_weights: Vec<f64> = ctx.disc.grid.weights().iter().map(|w| w.sqrt()).collect();
    let stiff = ctx.stiffness_at(t)?;
    let modes = ctx.disc.modes();

    let unit = |i: usize| {
        let mut p = PressureField::zeros(modes, n3, PressureLayout::Modal);
        p.values[i] = 1.0 / sqrt_weights[i % n3];
        p
    };
    let encode = |p: &PressureField| -> Vec<f64> {
        p.values.iter().enumerate().map(|(i, v)| v * sqrt_weights[i % n3]).collect()
    };
    let assemble = |op: &dyn Fn(&PressureField) -> PressureField| {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let col = encode(&op(&unit(i)));
            m.column_mut(i).copy_from_slice(&col);
        }
        m
    };
    let a = assemble(&|p| ctx.apply_a_with(&stiff, p));
    let b = assemble(&|p| ctx.apply_b(p));
    let fluid_content = assemble(&|p| ctx.apply_fluid_content(p));
    let zero_f = ctx.disc.zero_plate(PlateRole::Load);
    let mut plate_solve = DMatrix::zeros(modes, n);
    for i in 0..n {
        let w = ctx.solve_plate(&ctx.disc.moment(&unit(i)), &zero_f);
        plate_solve.column_mut(i).copy_from_slice(&w.coeffs);
    }
    Ok(DenseOracle {
        t,
        a,
        b,
        fluid_content,
        plate_solve,
        sqrt_weights,
        n3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Discretization;
    use crate::model::{PermeabilityModel, PhysicalParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_ctx() -> OperatorContext {
        let params = PhysicalParams::new(1.0, 0.9, 0.6, 0.0, 0.5);
        OperatorContext::new(
            params,
            Discretization::new(2, 2, 9, 0.5).unwrap(),
            PermeabilityModel::sin_in_time(1.0, 0.5, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn b_is_symmetric_positive_semidefinite() {
        let oracle = build_dense_oracle(&small_ctx(), 0.3).unwrap();
        assert!(DenseOracle::symmetry_defect(&oracle.b) <= 1e-13);
        assert!(DenseOracle::min_eigenvalue(&oracle.b) >= -1e-12);
        assert!(DenseOracle::symmetry_defect(&oracle.a) <= 1e-12);
    }

    #[test]
    fn fluid_content_spectrum_is_above_storage() {
        let c = small_ctx();
        let oracle = build_dense_oracle(&c, 0.0).unwrap();
        assert!(DenseOracle::min_eigenvalue(&oracle.fluid_content) >= c.params.c_p * (1.0 - 1e-12));
        let (_, hi) = c.fluid_content_spectrum();
        let max = oracle.fluid_content.clone().symmetric_eigen().eigenvalues.max();
        assert!((max - hi).abs() < 1e-12 * hi);
    }

    #[test]
    fn a_kernel_is_constants_per_column() {
        let c = small_ctx();
        let oracle = build_dense_oracle(&c, 1.1).unwrap();
        let ones = c.disc.separable_pressure(&[1.0, 2.0, -1.0, 0.5], |_| 1.0);
        let image = &oracle.a * oracle.encode(&ones);
        assert!(image.norm() < 1e-11);
        let n = c.disc.unknowns();
        assert_eq!(n - DenseOracle::rank(&oracle.a, 1e-12), c.disc.modes());
    }

    #[test]
    fn matrix_free_and_dense_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let c = small_ctx();
        let t = 0.8;
        let oracle = build_dense_oracle(&c, t).unwrap();
        for _ in 0..20 {
            let mut p = c.disc.zero_pressure();
            p.values.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            let v = oracle.encode(&p);
            let pairs = [
                (&oracle.a, c.apply_a(&p, t).unwrap()),
                (&oracle.b, c.apply_b(&p)),
                (&oracle.fluid_content, c.apply_fluid_content(&p)),
            ];
            for (m, mf) in pairs {
                let dense = m * &v;
                let diff = (&dense - oracle.encode(&mf)).norm();
                assert!(diff <= 1e-12 * dense.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn rejects_large_problems() {
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 0.0, 0.5);
        let c = OperatorContext::new(params, Discretization::new(12, 12, 33, 0.5).unwrap(), PermeabilityModel::constant(1.0)).unwrap();
        assert!(matches!(build_dense_oracle(&c, 0.0), Err(Error::Size(_))));
    }
}
