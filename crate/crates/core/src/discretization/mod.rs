//! Spectral in-plane / finite-difference transverse discretization.

mod basis;
mod field;
mod grid;

pub use basis::{SineBasis, MAX_MODES, SINE_NORMALIZATION};
pub use field::{Discretization, PlateField, PlateRole, PressureField, PressureLayout};
pub use grid::TransverseGrid;

/// Grid resolution: in-plane mode counts and transverse node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub m: usize,
    pub n: usize,
    pub n3: usize,
}

impl GridSpec {
    pub fn new(m: usize, n: usize, n3: usize) -> Self {
        Self { m, n, n3 }
    }
}
