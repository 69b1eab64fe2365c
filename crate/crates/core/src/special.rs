//! The noisy-sign link function `Φ_σ(t) = erf(t / (√2 σ))` and its inverse.
//!
//! `Φ_σ(t)` is the expectation of `sign(t + ξ)` for `ξ ~ N(0, σ²)`.
//! The forward map uses `libm`'s erf/erfc (under 1 ulp). The inverse starts
//! from a single-precision rational approximation of erfinv and polishes it
//! with Newton steps; above `|y| = 0.5` the residual is formed through erfc
//! so the tail keeps full relative precision.

use crate::error::{DmeError, Result};
use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 60;

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(DmeError::param(format!("sigma must be positive and finite, got {sigma}")))
    }
}

/// `erf(t / (√2 σ))`, odd and strictly increasing in `t`.
pub fn phi_sigma(sigma: f64, t: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if t.is_nan() {
        return Err(DmeError::Domain { op: "phi_sigma", value: t });
    }
    Ok(libm::erf(t / (SQRT_2 * sigma)))
}

/// Rational starting point for erfinv (M. Giles' single precision fit).
fn erfinv_seed(x: f64) -> f64 {
    let mut w = -((1.0 - x) * (1.0 + x)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        let mut p = 2.810_226_36e-08;
        for c in [
            3.432_739_39e-07,
            -3.523_387_7e-06,
            -4.391_506_54e-06,
            0.000_218_580_87,
            -0.001_253_725_03,
            -0.004_177_681_64,
            0.246_640_727,
            1.501_409_41,
        ] {
            p = c + p * w;
        }
        p
    } else {
        w = w.sqrt() - 3.0;
        let mut p = -0.000_200_214_257;
        for c in [
            0.000_100_950_558,
            0.001_349_343_22,
            -0.003_673_428_44,
            0.005_739_507_73,
            -0.007_622_461_3,
            0.009_438_870_47,
            1.001_674_06,
            2.832_976_82,
        ] {
            p = c + p * w;
        }
        p
    };
    p * x
}

/// `x` with `phi_sigma(sigma, x) = y`, for `|y| < 1`.
pub fn inv_phi_sigma(sigma: f64, y: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(y.abs() < 1.0) {
        return Err(DmeError::Domain { op: "inv_phi_sigma", value: y });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let a = y.abs();
    let tail = 1.0 - a; // exact for a >= 0.5
    let mut u = erfinv_seed(a);
    let scale = SQRT_2 * sigma;
    for _ in 0..NEWTON_MAX_ITERS {
        let residual = if a <= 0.5 { libm::erf(u) - a } else { tail - libm::erfc(u) };
        if residual == 0.0 {
            break;
        }
        let slope = FRAC_2_SQRT_PI * (-u * u).exp();
        if slope == 0.0 {
            break;
        }
        let step = residual / slope;
        u -= step;
        if (step * scale).abs() <= NEWTON_TOL {
            break;
        }
    }
    Ok((scale * u).copysign(y))
}
