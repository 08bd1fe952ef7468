//! Fixtures shared by the benchmarks.

use nenu_core::shaping::{design, Constellation};

/// Mode B style constellation used throughout the benches.
pub fn mode_b() -> Constellation {
    design(32, 24, 0.93, 2.0).expect("valid design")
}
