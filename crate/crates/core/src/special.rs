//! Error-function family used by the mapper and the clipping model.

use std::f64::consts::PI;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Inverse error function on (-1, 1).
///
/// Starts from a rational approximation and polishes with Newton steps on
/// `erf` until the update falls below 1e-12 (relative to max(1, |x|)).
pub fn erf_inv(y: f64) -> f64 {
    assert!(y > -1.0 && y < 1.0, "erf_inv argument {y} outside (-1, 1)");
    if y == 0.0 {
        return 0.0;
    }
    let mut x = initial_guess(y);
    let two_over_sqrt_pi = 2.0 / PI.sqrt();
    for _ in 0..50 {
        let err = erf(x) - y;
        let step = err / (two_over_sqrt_pi * (-x * x).exp());
        x -= step;
        if step.abs() <= 1e-12 * x.abs().max(1.0) {
            // one extra step lands within an ulp or two
            let err = erf(x) - y;
            x -= err / (two_over_sqrt_pi * (-x * x).exp());
            break;
        }
    }
    x
}

// Giles' single-precision approximation, good to ~1e-7 across the domain.
fn initial_guess(y: f64) -> f64 {
    let w = -((1.0 - y) * (1.0 + y)).ln();
    let p = if w < 5.0 {
        let w = w - 2.5;
        let mut p = 2.810_226_36e-08;
        p = 3.432_739_39e-07 + p * w;
        p = -3.523_387_7e-06 + p * w;
        p = -4.391_506_54e-06 + p * w;
        p = 0.000_218_580_87 + p * w;
        p = -0.001_253_725_03 + p * w;
        p = -0.004_177_681_64 + p * w;
        p = 0.246_640_727 + p * w;
        1.501_409_41 + p * w
    } else {
        let w = w.sqrt() - 3.0;
        let mut p = -0.000_200_214_257;
        p = 0.000_100_950_558 + p * w;
        p = 0.001_349_343_22 + p * w;
        p = -0.003_673_428_44 + p * w;
        p = 0.005_739_507_73 + p * w;
        p = -0.007_622_461_3 + p * w;
        p = 0.009_438_870_47 + p * w;
        p = 1.001_674_06 + p * w;
        2.832_976_82 + p * w
    };
    p * y
}
