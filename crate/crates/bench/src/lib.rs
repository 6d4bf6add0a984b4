//! Shared fixtures for the benchmarks.

use etabs_core::{Lattice, MarketParams};

pub fn market() -> MarketParams {
    MarketParams::new(0.2, 0.05).expect("valid market parameters")
}

/// Six-sigma window around ln 100 for half a year.
pub fn window(n: usize) -> Lattice {
    Lattice::centered_window(100f64.ln(), 0.2, 0.5, 6.0, n).expect("valid window")
}
