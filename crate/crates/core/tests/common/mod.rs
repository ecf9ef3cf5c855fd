//! Independent reference for the diatomic chain: resonances of a finite
//! central region coupled to two semi-infinite leads through surface Green
//! functions.

#![allow(dead_code)]

use bcd_core::CMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Central region: cells `0..=2`, sites ordered `a0 b0 a1 b1 a2 b2`.
pub const CENTRAL_SITES: usize = 6;

/// Chain `... a b a b ...` with all bonds 1 and the given site energies,
/// restricted to cells `0..=2`.
pub fn central_hamiltonian(ea: f64, eb: f64) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(CENTRAL_SITES, CENTRAL_SITES);
    for s in 0..CENTRAL_SITES {
        h[(s, s)] = if s % 2 == 0 { ea } else { eb };
        if s + 1 < CENTRAL_SITES {
            h[(s, s + 1)] = 1.0;
            h[(s + 1, s)] = 1.0;
        }
    }
    h
}

/// Site index of `(cell, orbital)` in the central region.
pub fn site(cell: i64, orbital: usize) -> usize {
    assert!((0..=2).contains(&cell) && orbital < 2);
    2 * cell as usize + orbital
}

/// The two roots of `g = 1 / (z - e1 - 1 / (z - e2 - g))`, i.e.
/// `w g^2 - u w g + u = 0` with `u = z - e2`, `w = z - e1`.
fn surface_roots(z: Complex64, e1: f64, e2: f64) -> [Complex64; 2] {
    let u = z - e2;
    let w = z - e1;
    let disc = (u * u * w * w - u * w * 4.0).sqrt();
    [(u * w + disc) / (w * 2.0), (u * w - disc) / (w * 2.0)]
}

/// Fixed-point iteration on the physical sheet (`Im z > 0`).
fn surface_iterate(z: Complex64, e1: f64, e2: f64) -> Complex64 {
    let mut g = Complex64::new(0.0, -1.0);
    for _ in 0..100_000 {
        let next = 1.0 / (z - e1 - 1.0 / (z - e2 - g));
        if (next - g).norm() < 1e-15 {
            return next;
        }
        g = next;
    }
    g
}

/// Surface Green function of a semi-infinite alternating chain whose end
/// site has energy `e1` and is followed by `e2`, continued from
/// `Re z + i` straight down to `z`. Crossing the real axis inside a band
/// lands on the same sheet as the Brillouin-zone continuation at that energy.
pub fn surface_green(z: Complex64, e1: f64, e2: f64) -> Complex64 {
    let top = Complex64::new(z.re, 1.0);
    let mut g = surface_iterate(top, e1, e2);
    let steps = 2000;
    for s in 1..=steps {
        let t = s as f64 / steps as f64;
        let zt = Complex64::new(z.re, 1.0 + t * (z.im - 1.0));
        let [r1, r2] = surface_roots(zt, e1, e2);
        g = if (r1 - g).norm() <= (r2 - g).norm() { r1 } else { r2 };
    }
    g
}

/// `z - H_C - V - Sigma(z)` with the leads attached at `a0` (left lead ends
/// on a `b` site) and `b2` (right lead starts on an `a` site).
pub fn effective_matrix(z: Complex64, ea: f64, eb: f64, v: &DMatrix<f64>) -> CMatrix {
    let h = central_hamiltonian(ea, eb) + v;
    let mut m = CMatrix::from_fn(CENTRAL_SITES, CENTRAL_SITES, |i, j| Complex64::new(-h[(i, j)], 0.0));
    for s in 0..CENTRAL_SITES {
        m[(s, s)] += z;
    }
    m[(0, 0)] -= surface_green(z, eb, ea);
    m[(5, 5)] -= surface_green(z, ea, eb);
    m
}

/// Zero of `det(z - H_eff(z))` near `z_init` by Newton with a centred
/// difference derivative.
pub fn oracle_resonance(z_init: Complex64, ea: f64, eb: f64, v: &DMatrix<f64>) -> Complex64 {
    let f = |z: Complex64| effective_matrix(z, ea, eb, v).determinant();
    let mut z = z_init;
    for _ in 0..100 {
        let h = 1e-6;
        let df = (f(z + h) - f(z - h)) / (2.0 * h);
        let dz = f(z) / df;
        z -= dz;
        if dz.norm() < 1e-14 {
            break;
        }
    }
    z
}
