//! In-plane sine modes on the unit square.
//!
//! Modes are `phi_mn(x1, x2) = 2 sin(m pi x1) sin(n pi x2)`, orthonormal in
//! `L2((0,1)^2)`. The collocation grid is the interior lattice
//! `x1_i = i / (M + 1)`, `x2_j = j / (N + 1)`, on which the type-I sine
//! transform with this normalization is an exact orthogonal change of basis.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Upper bound on `M * N` accepted by [`SineBasis::new`].
pub const MAX_MODES: usize = 1 << 20;

/// Per-direction factor of the orthonormal sine convention: `phi = (SQRT_2 sin)(SQRT_2 sin)`.
pub const SINE_NORMALIZATION: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone)]
pub struct SineBasis {
    m: usize,
    n: usize,
    eigenvalues: Vec<f64>,
    // sin1[i * m + a] = SQRT_2 * sin((a+1) pi x1_i)
    sin1: Vec<f64>,
    sin2: Vec<f64>,
}

fn sine_table(count: usize) -> Vec<f64> {
    let mut table = vec![0.0; count * count];
    let spacing = 1.0 / (count as f64 + 1.0);
    for i in 0..count {
        let x = (i as f64 + 1.0) * spacing;
        for a in 0..count {
            table[i * count + a] = SINE_NORMALIZATION * ((a as f64 + 1.0) * PI * x).sin();
        }
    }
    table
}

impl SineBasis {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Size(format!("mode counts must be positive, got M={m}, N={n}")));
        }
        match m.checked_mul(n) {
            Some(total) if total <= MAX_MODES => {}
            _ => {
                return Err(Error::Size(format!(
                    "M*N = {m}*{n} exceeds the mode limit {MAX_MODES}"
                )))
            }
        }
        let mut eigenvalues = Vec::with_capacity(m * n);
        for a in 1..=m {
            for b in 1..=n {
                eigenvalues.push(PI * PI * ((a * a + b * b) as f64));
            }
        }
        Ok(Self {
            m,
            n,
            eigenvalues,
            sin1: sine_table(m),
            sin2: sine_table(n),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of mode `(a, b)`, both 1-based.
    pub fn mode_index(&self, a: usize, b: usize) -> usize {
        debug_assert!(a >= 1 && a <= self.m && b >= 1 && b <= self.n);
        (a - 1) * self.n + (b - 1)
    }

    /// Inverse of [`Self::mode_index`]; returns 1-based `(a, b)`.
    pub fn mode_of(&self, index: usize) -> (usize, usize) {
        (index / self.n + 1, index % self.n + 1)
    }

    /// Dirichlet Laplacian eigenvalues `pi^2 (a^2 + b^2)`, one per mode.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, a: usize, b: usize) -> f64 {
        self.eigenvalues[self.mode_index(a, b)]
    }

    /// Collocation coordinates `(x1, x2)` of in-plane point `index`.
    pub fn collocation_point(&self, index: usize) -> (f64, f64) {
        let i = index / self.n;
        let j = index % self.n;
        (
            (i as f64 + 1.0) / (self.m as f64 + 1.0),
            (j as f64 + 1.0) / (self.n as f64 + 1.0),
        )
    }

    /// Quadrature weight of each collocation point.
    pub fn collocation_weight(&self) -> f64 {
        1.0 / ((self.m as f64 + 1.0) * (self.n as f64 + 1.0))
    }

    /// Value of mode `(a, b)` at an arbitrary point.
    pub fn mode_value(a: usize, b: usize, x1: f64, x2: f64) -> f64 {
        2.0 * (a as f64 * PI * x1).sin() * (b as f64 * PI * x2).sin()
    }

    /// Evaluates the modal expansion `coeffs` (length `M*N`) at `(x1, x2)`.
    pub fn evaluate(&self, coeffs: &[f64], x1: f64, x2: f64) -> f64 {
        let s1: Vec<f64> = (1..=self.m).map(|a| (a as f64 * PI * x1).sin()).collect();
        let s2: Vec<f64> = (1..=self.n).map(|b| (b as f64 * PI * x2).sin()).collect();
        let mut acc = 0.0;
        for (a, sa) in s1.iter().enumerate() {
            for (b, sb) in s2.iter().enumerate() {
                acc += coeffs[a * self.n + b] * sa * sb;
            }
        }
        2.0 * acc
    }

    /// Modal coefficients to collocation values for `inner` interleaved
    /// components per in-plane entry (layout `index * inner + k`).
    pub fn to_collocation(&self, modal: &[f64], inner: usize) -> Vec<f64> {
        self.transform(modal, inner, false)
    }

    /// Collocation values to modal coefficients; exact inverse of
    /// [`Self::to_collocation`].
    pub fn to_modal(&self, values: &[f64], inner: usize) -> Vec<f64> {
        self.transform(values, inner, true)
    }

    fn transform(&self, input: &[f64], inner: usize, forward: bool) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        assert_eq!(input.len(), m * n * inner, "transform input has wrong length");
        // Both directions use the same symmetric-in-role tables:
        // inverse:  u[i,j] = sum_ab S1[i,a] S2[j,b] c[a,b]
        // forward:  c[a,b] = w * sum_ij S1[i,a] S2[j,b] u[i,j]
        // Pass 1 contracts the second in-plane index, pass 2 the first.
        let mut half = vec![0.0; m * n * inner];
        for r in 0..m {
            for q in 0..n {
                let out = &mut half[(r * n + q) * inner..(r * n + q + 1) * inner];
                for s in 0..n {
                    let coef = if forward {
                        self.sin2[s * n + q]
                    } else {
                        self.sin2[q * n + s]
                    };
                    let src = &input[(r * n + s) * inner..(r * n + s + 1) * inner];
                    for (o, v) in out.iter_mut().zip(src) {
                        *o += coef * v;
                    }
                }
            }
        }
        let mut output = vec![0.0; m * n * inner];
        for p in 0..m {
            for q in 0..n {
                let out = &mut output[(p * n + q) * inner..(p * n + q + 1) * inner];
                for r in 0..m {
                    let coef = if forward {
                        self.sin1[r * m + p]
                    } else {
                        self.sin1[p * m + r]
                    };
                    let src = &half[(r * n + q) * inner..(r * n + q + 1) * inner];
                    for (o, v) in out.iter_mut().zip(src) {
                        *o += coef * v;
                    }
                }
            }
        }
        if forward {
            let w = self.collocation_weight();
            output.iter_mut().for_each(|v| *v *= w);
        }
        output
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Smallest eigenvalue of the 5-point Dirichlet Laplacian on an `n x n`
    /// interior grid, found by inverse power iteration with a
    /// Gauss-Seidel inner solve.
    fn five_point_eigenvalues(n: usize) -> (f64, f64) {
        let hx = 1.0 / (n as f64 + 1.0);
        // The 5-point operator is separable; its exact eigenvalues are
        // 4/h^2 (sin^2(a pi h/2) + sin^2(b pi h/2)). Check the separable
        // formula against a Rayleigh quotient of the assembled stencil.
        let apply = |u: &Vec<f64>| -> Vec<f64> {
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let c = u[i * n + j];
                    let l = if i > 0 { u[(i - 1) * n + j] } else { 0.0 };
                    let r = if i + 1 < n { u[(i + 1) * n + j] } else { 0.0 };
                    let d = if j > 0 { u[i * n + j - 1] } else { 0.0 };
                    let t = if j + 1 < n { u[i * n + j + 1] } else { 0.0 };
                    out[i * n + j] = (4.0 * c - l - r - d - t) / (hx * hx);
                }
            }
            out
        };
        let rayleigh = |a: usize, b: usize| {
            let u: Vec<f64> = (0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    ((a as f64) * PI * (i as f64 + 1.0) * hx).sin()
                        * ((b as f64) * PI * (j as f64 + 1.0) * hx).sin()
                })
                .collect();
            let au = apply(&u);
            let num: f64 = u.iter().zip(&au).map(|(x, y)| x * y).sum();
            let den: f64 = u.iter().map(|x| x * x).sum();
            num / den
        };
        (rayleigh(1, 1), rayleigh(2, 1))
    }

    #[test]
    fn eigenvalues_match_finite_difference_limit() {
        let basis = SineBasis::new(2, 1).unwrap();
        let (fd11, fd21) = five_point_eigenvalues(255);
        assert!((basis.eigenvalue(1, 1) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((basis.eigenvalue(2, 1) - 5.0 * PI * PI).abs() < 1e-12);
        // second-order FD convergence: error ~ lambda^2 h^2 / 12
        assert!((fd11 - basis.eigenvalue(1, 1)).abs() / basis.eigenvalue(1, 1) < 1e-4);
        assert!((fd21 - basis.eigenvalue(2, 1)).abs() / basis.eigenvalue(2, 1) < 3e-4);
        assert!((basis.eigenvalue(1, 1) - 19.7392).abs() < 1e-4);
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(m, n, inner) in &[(1, 1, 1), (4, 3, 5), (7, 9, 2)] {
            let basis = SineBasis::new(m, n).unwrap();
            let c: Vec<f64> = (0..m * n * inner).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let back = basis.to_modal(&basis.to_collocation(&c, inner), inner);
            let scale = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            let err = c.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err / scale < 1e-13, "round trip error {err}");
        }
    }

    #[test]
    fn collocation_matches_pointwise_evaluation() {
        let basis = SineBasis::new(3, 2).unwrap();
        let c = vec![0.3, -1.0, 0.5, 0.25, 2.0, -0.7];
        let vals = basis.to_collocation(&c, 1);
        for (k, v) in vals.iter().enumerate() {
            let (x1, x2) = basis.collocation_point(k);
            assert!((basis.evaluate(&c, x1, x2) - v).abs() < 1e-13);
        }
    }

    #[test]
    fn parseval_with_collocation_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis = SineBasis::new(6, 5).unwrap();
        let c: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vals = basis.to_collocation(&c, 1);
        let discrete = basis.collocation_weight() * vals.iter().map(|v| v * v).sum::<f64>();
        let modal: f64 = c.iter().map(|v| v * v).sum();
        assert!((discrete - modal).abs() / modal < 1e-12);
    }

    #[test]
    fn rejects_empty_and_oversized() {
        assert!(matches!(SineBasis::new(0, 3), Err(Error::Size(_))));
        assert!(matches!(SineBasis::new(1 << 11, 1 << 11), Err(Error::Size(_))));
    }
}
