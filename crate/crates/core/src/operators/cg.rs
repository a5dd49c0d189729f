//! Preconditioned conjugate gradients for operators that are self-adjoint
//! and positive definite in a caller-supplied inner product.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Relative residual tolerance `||b - Ax|| <= tol ||b||`.
    pub tol: f64,
    /// `None` selects `10 sqrt(n) + 100`.
    pub max_iter: Option<usize>,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl CgSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, max_iter: None }
    }

    pub fn iteration_cap(&self, unknowns: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| 10 * (unknowns as f64).sqrt().ceil() as usize + 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `A x = b` starting from `x`. `dot` must be the inner product in
/// which both `apply` and `precondition` are self-adjoint.
pub fn pcg<A, P, D>(
    apply: A,
    precondition: P,
    dot: D,
    b: &[f64],
    x: &mut [f64],
    settings: CgSettings,
) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
    D: Fn(&[f64], &[f64]) -> f64,
{
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let cap = settings.iteration_cap(n);
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut residual = dot(&r, &r).sqrt() / b_norm;
    let mut iterations = 0;
    while residual > settings.tol {
        if iterations >= cap {
            return Err(Error::NoConvergence { iterations, residual });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NoConvergence { iterations, residual });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        iterations += 1;
        residual = dot(&r, &r).sqrt() / b_norm;
        if residual <= settings.tol {
            break;
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // Guard against drift of the recursive residual.
    apply(x, &mut r);
    let true_res = r
        .iter()
        .zip(b)
        .map(|(a, bi)| bi - a)
        .collect::<Vec<_>>();
    let true_residual = dot(&true_res, &true_res).sqrt() / b_norm;
    if true_residual > 10.0 * settings.tol {
        return Err(Error::NoConvergence {
            iterations,
            residual: true_residual,
        });
    }
    Ok(CgOutcome {
        iterations,
        residual: true_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let l = if i > 0 { x[i - 1] } else { 0.0 };
            let r = if i + 1 < n { x[i + 1] } else { 0.0 };
            out[i] = 2.0 * x[i] - l - r;
        }
    }

    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn solves_spd_tridiagonal() {
        let n = 50;
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = vec![0.0; n];
        let out = pcg(laplacian_1d, |r, z| z.copy_from_slice(r), euclid, &b, &mut x, CgSettings::with_tol(1e-12)).unwrap();
        let mut ax = vec![0.0; n];
        laplacian_1d(&x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        assert!(err / euclid(&b, &b).sqrt() < 1e-11);
        assert!(out.iterations <= n + 1);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let mut x = vec![1.0; 4];
        let out = pcg(laplacian_1d, |r, z| z.copy_from_slice(r), euclid, &[0.0; 4], &mut x, CgSettings::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reports_no_convergence() {
        let n = 200;
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let settings = CgSettings {
            tol: 1e-14,
            max_iter: Some(3),
        };
        match pcg(laplacian_1d, |r, z| z.copy_from_slice(r), euclid, &b, &mut x, settings) {
            Err(Error::NoConvergence { iterations, .. }) => assert_eq!(iterations, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
