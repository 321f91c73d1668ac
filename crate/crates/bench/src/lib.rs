//! Fixtures shared by the benchmarks in `benches/`.

use sqlab_core::dynamics::{Equation, SqeConfig};
use sqlab_core::random::{gff_sample, purpose};
use sqlab_core::{CutoffProfile, RngStream, SpectralField, TorusGrid, WickParams};

pub fn grid(modes: usize) -> TorusGrid {
    TorusGrid::new(modes).expect("power-of-two grid")
}

pub fn gff(grid: &TorusGrid, seed: u64) -> SpectralField {
    gff_sample(grid, &RngStream::new(seed, purpose::SCRATCH))
}

/// Sharp-cutoff parameters at `alpha = 1`.
pub fn params(grid: &TorusGrid, level: u32) -> WickParams {
    WickParams::new(1.0, level, 0.5, &CutoffProfile::sharp(), grid).expect("admissible parameters")
}

pub fn sqe_config(grid: &TorusGrid, level: u32, equation: Equation) -> SqeConfig {
    SqeConfig::new(1.0, 0.01, equation, params(grid, level), CutoffProfile::sharp())
}
