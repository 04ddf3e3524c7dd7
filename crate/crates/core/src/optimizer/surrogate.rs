//! First-order surrogates used by the penalty and SCA loops.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `a0^2 + (1 - 2 a0) a`, an upper bound on `a - a^2` that is tight at
/// `a = a0`.
pub fn penalty_surrogate(a0: f64, a: f64) -> f64 {
    a0 * a0 + (1.0 - 2.0 * a0) * a
}

/// `2 Re{w0^H Q w} - w0^H Q w0`, the tangent of `w^H Q w` at `w0`.
/// Underestimates the quadratic whenever `Q` is PSD.
pub fn linearized_quadratic(q: &DMatrix<Complex64>, w0: &DVector<Complex64>, w: &DVector<Complex64>) -> f64 {
    let qw0 = q * w0;
    2.0 * qw0.dotc(w).re - w0.dotc(&qw0).re
}

/// Scalar-gain form `2 Re{w0^H c (w - w0)} + c |w0|^2`.
pub fn linearized_scalar(c: f64, w0: &DVector<Complex64>, w: &DVector<Complex64>) -> f64 {
    2.0 * c * w0.dotc(&(w - w0)).re + c * w0.norm_squared()
}

pub fn quadratic(q: &DMatrix<Complex64>, w: &DVector<Complex64>) -> f64 {
    w.dotc(&(q * w)).re
}
