//! Smooth, grid-independent random data for refinement studies.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::{Discretization, PlateField, PlateRole, PressureField};
use crate::model::SourceTerms;

/// Highest in-plane mode index carrying data.
pub const DATA_MODES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
struct ModeTerm {
    /// 1-based mode.
    a: usize,
    b: usize,
    amplitude: f64,
    /// Transverse profile `cos(pi s (x3 + h) / (2h)) + r x3 / h`.
    s: f64,
    r: f64,
    /// Time factor `1 + c1 sin(omega t + phase)`.
    c1: f64,
    omega: f64,
    phase: f64,
}

impl ModeTerm {
    fn profile(&self, x3: f64, h: f64) -> f64 {
        (PI * self.s * (x3 + h) / (2.0 * h)).cos() + self.r * x3 / h
    }

    fn time(&self, t: f64) -> f64 {
        1.0 + self.c1 * (self.omega * t + self.phase).sin()
    }
}

/// Initial fluid content, plate load and fluid source built from a few
/// low modes with smooth transverse profiles and time factors.
#[derive(Debug, Clone)]
pub struct SmoothData {
    d0: Vec<ModeTerm>,
    f: Vec<ModeTerm>,
    g: Vec<ModeTerm>,
    /// Multipliers applied to the three parts.
    pub scale: (f64, f64, f64),
}

impl SmoothData {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = |count_scale: f64| -> Vec<ModeTerm> {
            let mut out = Vec::new();
            for a in 1..=DATA_MODES {
                for b in 1..=DATA_MODES {
                    out.push(ModeTerm {
                        a,
                        b,
                        amplitude: count_scale * rng.gen_range(-1.0..1.0) / (a * a + b * b) as f64,
                        s: rng.gen_range(0..3) as f64,
                        r: rng.gen_range(-0.5..0.5),
                        c1: rng.gen_range(-0.5..0.5),
                        omega: rng.gen_range(0.5..3.0),
                        phase: rng.gen_range(0.0..2.0 * PI),
                    });
                }
            }
            out
        };
        let d0 = terms(1.0);
        let f = terms(10.0);
        let g = terms(1.0);
        Self {
            d0,
            f,
            g,
            scale: (1.0, 1.0, 1.0),
        }
    }

    pub fn with_scale(mut self, d0: f64, f: f64, g: f64) -> Self {
        self.scale = (d0, f, g);
        self
    }

    fn pressure(terms: &[ModeTerm], disc: &Discretization, t: Option<f64>, scale: f64) -> PressureField {
        let basis = &disc.basis;
        let h = disc.grid.half_thickness();
        let mut p = disc.zero_pressure();
        for term in terms {
            if term.a > basis.m() || term.b > basis.n() {
                continue;
            }
            let k = basis.mode_index(term.a, term.b);
            let amp = scale * term.amplitude * t.map_or(1.0, |t| term.time(t));
            for (v, &x) in p.column_mut(k).iter_mut().zip(disc.grid.nodes()) {
                *v += amp * term.profile(x, h);
            }
        }
        p
    }

    pub fn initial_fluid_content(&self, disc: &Discretization) -> PressureField {
        Self::pressure(&self.d0, disc, None, self.scale.0)
    }

    pub fn plate_load(&self, disc: &Discretization, t: f64) -> PlateField {
        let basis = &disc.basis;
        let mut f = disc.zero_plate(PlateRole::Load);
        for term in &self.f {
            if term.a <= basis.m() && term.b <= basis.n() {
                f.coeffs[basis.mode_index(term.a, term.b)] += self.scale.1 * term.amplitude * term.time(t);
            }
        }
        f
    }

    pub fn fluid_source(&self, disc: &Discretization, t: f64) -> PressureField {
        Self::pressure(&self.g, disc, Some(t), self.scale.2)
    }

    pub fn sources(&self, disc: &Discretization) -> SourceTerms {
        let (a, b) = (self.clone(), self.clone());
        let (da, db) = (disc.clone(), disc.clone());
        let mut s = SourceTerms::zero();
        if self.scale.1 != 0.0 {
            s = s.with_f(move |t| a.plate_load(&da, t), true);
        }
        if self.scale.2 != 0.0 {
            s = s.with_g(move |t| b.fluid_source(&db, t));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn data_is_grid_independent_on_shared_nodes() {
        let data = SmoothData::random(1);
        let coarse = Discretization::new(2, 2, 5, 0.5).unwrap();
        let fine = Discretization::new(4, 4, 9, 0.5).unwrap();
        let (pc, pf) = (data.initial_fluid_content(&coarse), data.initial_fluid_content(&fine));
        for a in 1..=2 {
            for b in 1..=2 {
                let (kc, kf) = (coarse.basis.mode_index(a, b), fine.basis.mode_index(a, b));
                for j in 0..5 {
                    assert_eq!(pc.column(kc)[j], pf.column(kf)[2 * j]);
                }
            }
        }
        let high = fine.basis.mode_index(3, 1);
        assert!(pf.column(high).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_scale_drops_sources() {
        let data = SmoothData::random(2).with_scale(1.0, 0.0, 0.0);
        let disc = Discretization::new(2, 2, 5, 0.5).unwrap();
        let s = data.sources(&disc);
        assert!(s.f.is_none() && s.g.is_none());
    }
}
