//! Elliptic integrals of the first kind in the parameter convention
//! `K(m) = F(pi/2, m)`, `F(phi, m) = \int_0^phi du / sqrt(1 - m sin^2 u)`.
//!
//! The complete integral uses the arithmetic-geometric mean, the incomplete
//! one Carlson's duplication form; both converge to full double precision.

use std::f64::consts::{FRAC_PI_2, PI};

const AGM_EPS: f64 = 1e-16;

/// Complete elliptic integral of the first kind, parameter `m = k^2`.
///
/// Valid for all `m < 1` (negative parameters included); returns infinity at
/// the logarithmic singularity `m = 1` and NaN beyond it.
pub fn elliptic_k(m: f64) -> f64 {
    if m.is_nan() || m > 1.0 {
        return f64::NAN;
    }
    if m == 1.0 {
        return f64::INFINITY;
    }
    let mut a = 1.0f64;
    let mut b = (1.0 - m).sqrt();
    for _ in 0..64 {
        if (a - b).abs() <= AGM_EPS * a.abs() {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        a = an;
        b = bn;
    }
    PI / (2.0 * a)
}

/// Carlson symmetric integral R_F by the duplication theorem.
fn carlson_rf(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    // assumes non-negative arguments with at most one zero
    for _ in 0..200 {
        let sqrt_x = x.sqrt();
        let sqrt_y = y.sqrt();
        let sqrt_z = z.sqrt();
        let lambda = sqrt_x * sqrt_y + sqrt_y * sqrt_z + sqrt_z * sqrt_x;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let mean = (x + y + z) / 3.0;
        let dev = (x - mean).abs().max((y - mean).abs()).max((z - mean).abs());
        if dev <= 1e-14 * mean {
            let dx = 1.0 - x / mean;
            let dy = 1.0 - y / mean;
            let dz = 1.0 - z / mean;
            let e2 = dx * dy + dy * dz + dz * dx;
            let e3 = dx * dy * dz;
            return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0)
                / mean.sqrt();
        }
    }
    f64::NAN
}

/// Incomplete elliptic integral of the first kind, parameter convention.
///
/// Handles any real amplitude through `F(phi + n pi, m) = F(phi, m) + 2 n K(m)`.
pub fn elliptic_f(phi: f64, m: f64) -> f64 {
    if phi == 0.0 {
        return 0.0;
    }
    if m == 0.0 {
        return phi;
    }
    if phi < 0.0 {
        return -elliptic_f(-phi, m);
    }
    // reduce to [-pi/2, pi/2]
    let n = ((phi + FRAC_PI_2) / PI).floor();
    let phi_r = phi - n * PI;
    let mut acc = 0.0;
    if n != 0.0 {
        acc += 2.0 * n * elliptic_k(m);
    }
    if phi_r != 0.0 {
        let s = phi_r.sin();
        let c = phi_r.cos();
        let w = 1.0 - m * s * s;
        if w < 0.0 {
            return f64::NAN;
        }
        // sin(phi_r) carries the sign of the reduced amplitude
        acc += s * carlson_rf(c * c, w, 1.0);
    }
    acc
}
