//! Uniform transverse grid on `[-h, h]` with trapezoid quadrature and a
//! conservative second-order stiffness for `-d/dx3 (k d/dx3 .)` under
//! homogeneous Neumann conditions.
//!
//! The stiffness form is `a(p, q) = sum_e k_e (p_{e+1} - p_e)(q_{e+1} - q_e) / dx`
//! with `k_e` sampled at edge midpoints. Dividing row `j` by the trapezoid
//! weight `w_j` gives the ghost-node Neumann finite-difference operator.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TransverseGrid {
    h: f64,
    dx: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    moments: Vec<f64>,
    midpoints: Vec<f64>,
}

impl TransverseGrid {
    pub fn new(n3: usize, h: f64) -> Result<Self> {
        if n3 < 3 {
            return Err(Error::Size(format!("transverse grid needs N3 >= 3, got {n3}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParams(format!("half-thickness must be positive, got {h}")));
        }
        let dx = 2.0 * h / (n3 as f64 - 1.0);
        let nodes: Vec<f64> = (0..n3)
            .map(|j| {
                // mirror so that the grid is exactly symmetric about 0
                let left = -h + j as f64 * dx;
                let right = h - (n3 - 1 - j) as f64 * dx;
                if 2 * j < n3 - 1 {
                    left
                } else if 2 * j == n3 - 1 {
                    0.0
                } else {
                    right
                }
            })
            .collect();
        let mut weights = vec![dx; n3];
        weights[0] = 0.5 * dx;
        weights[n3 - 1] = 0.5 * dx;
        let moments = weights.iter().zip(&nodes).map(|(w, x)| w * x).collect();
        let midpoints = nodes.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        Ok(Self {
            h,
            dx,
            nodes,
            weights,
            moments,
            midpoints,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn half_thickness(&self) -> f64 {
        self.h
    }

    pub fn spacing(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Trapezoid weights `w_j`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// First-moment weights `m_j = w_j x3_j`.
    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    /// Edge midpoints, where the permeability is sampled.
    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    /// `sum_j w_j x3_j^2`, the discrete value of `2 h^3 / 3`.
    pub fn second_moment(&self) -> f64 {
        self.moments.iter().zip(&self.nodes).map(|(m, x)| m * x).sum()
    }

    /// Trapezoid integral of one column.
    pub fn integrate(&self, column: &[f64]) -> f64 {
        column.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// `sum_j m_j p_j` for one column.
    pub fn moment(&self, column: &[f64]) -> f64 {
        column.iter().zip(&self.moments).map(|(v, m)| v * m).sum()
    }

    /// Weighted inner product of two columns.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    /// Stiffness form `sum_e k_e (a_{e+1}-a_e)(b_{e+1}-b_e)/dx`.
    pub fn stiffness_form(&self, edge_k: &[f64], a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(edge_k.len(), self.len() - 1);
        let mut acc = 0.0;
        for e in 0..edge_k.len() {
            acc += edge_k[e] * (a[e + 1] - a[e]) * (b[e + 1] - b[e]);
        }
        acc / self.dx
    }

    /// Adds `scale * S(k) p` (unweighted stiffness product) into `out`.
    pub fn stiffness_apply_add(&self, edge_k: &[f64], p: &[f64], scale: f64, out: &mut [f64]) {
        let inv = scale / self.dx;
        for e in 0..edge_k.len() {
            let flux = edge_k[e] * (p[e + 1] - p[e]) * inv;
            out[e] -= flux;
            out[e + 1] += flux;
        }
    }

    /// Riesz representative of the stiffness form in the trapezoid inner
    /// product: `(W^{-1} S(k) p)_j`.
    pub fn apply_operator(&self, edge_k: &[f64], p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.stiffness_apply_add(edge_k, p, 1.0, out);
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= w;
        }
    }

    /// Discrete `||d/dx3 p||^2` of one column (difference quotients on edges).
    pub fn gradient_norm_sq(&self, p: &[f64]) -> f64 {
        p.windows(2).map(|d| (d[1] - d[0]).powi(2)).sum::<f64>() / self.dx
    }

    /// Solves `(a W + b S(k)) z = W r` for one column (tridiagonal, Thomas
    /// algorithm). Requires `a > 0`, `b >= 0`.
    pub fn solve_shifted(&self, a: f64, b: f64, edge_k: &[f64], r: &[f64], z: &mut [f64]) {
        let n = self.len();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        for j in 0..n {
            diag[j] = a * self.weights[j];
        }
        for e in 0..n - 1 {
            let s = b * edge_k[e] / self.dx;
            diag[e] += s;
            diag[e + 1] += s;
            off[e] = -s;
        }
        let mut rhs: Vec<f64> = r.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        // forward sweep
        for j in 1..n {
            let factor = off[j - 1] / diag[j - 1];
            diag[j] -= factor * off[j - 1];
            rhs[j] -= factor * rhs[j - 1];
        }
        z[n - 1] = rhs[n - 1] / diag[n - 1];
        for j in (0..n - 1).rev() {
            z[j] = (rhs[j] - off[j] * z[j + 1]) / diag[j];
        }
    }
}
