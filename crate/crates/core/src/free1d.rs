//! One-dimensional free Laplacian: the outgoing Helmholtz kernel, the
//! integral equation for a compact potential on a uniform grid, and a
//! uniformly complex-scaled finite-difference Hamiltonian as a cross-check.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greens::{ComplexEnergyGrid, MapNode};
use crate::nep::{newton_refine, sigma_scan, smallest_singular, AnalyticMatrix, CVector, NewtonOptions, NewtonOutcome};
use crate::{CMatrix, C_ONE, C_ZERO};

/// Nodes `x_j = -L/2 + j h`, `j = 0..=L/h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    length: f64,
    step: f64,
    intervals: usize,
}

impl Grid1D {
    pub fn new(length: f64, step: f64) -> Result<Self> {
        if !(length > 0.0 && step > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParams("box length and step must be positive".into()));
        }
        let ratio = length / step;
        let intervals = ratio.round();
        if (ratio - intervals).abs() > 1e-12 * ratio.max(1.0) || intervals < 2.0 {
            return Err(Error::InvalidParams(format!(
                "box length {length} is not a multiple of step {step}"
            )));
        }
        Ok(Self {
            length,
            step,
            intervals: intervals as usize,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.intervals)
            .map(|j| -0.5 * self.length + j as f64 * self.step)
            .collect()
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.step; self.len()];
        w[0] *= 0.5;
        w[self.intervals] *= 0.5;
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Potential {
    /// `V(x) = 2 (exp(-(x/2)^2) - exp(-x^2))`.
    #[default]
    DoubleWell,
    Zero,
}

impl Potential {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "double-well" => Ok(Potential::DoubleWell),
            "zero" => Ok(Potential::Zero),
            _ => Err(Error::InvalidParams(format!("unknown potential `{name}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Potential::DoubleWell => "double-well",
            Potential::Zero => "zero",
        }
    }

    /// Analytic in `x`, so it can be evaluated on the rotated ray.
    pub fn eval(self, x: Complex64) -> Complex64 {
        match self {
            Potential::DoubleWell => ((-(x * 0.5) * (x * 0.5)).exp() - (-x * x).exp()) * 2.0,
            Potential::Zero => C_ZERO,
        }
    }

    pub fn eval_real(self, x: f64) -> f64 {
        self.eval(Complex64::new(x, 0.0)).re
    }
}

/// `e^{i sqrt(z) |x - x'|} / (2 i sqrt(z))` with `arg sqrt(z)` in `(-pi/2, pi/2]`.
pub fn helmholtz_kernel(z: Complex64, x: f64, xp: f64) -> Result<Complex64> {
    if z == C_ZERO {
        return Err(Error::BranchPoint);
    }
    let s = z.sqrt();
    let i = Complex64::i();
    Ok((i * s * (x - xp).abs()).exp() / (i * s * 2.0))
}

/// `d/dz` of [`helmholtz_kernel`]: `e^{isd} (d s + i) / (4 s^3)`.
pub fn helmholtz_kernel_derivative(z: Complex64, x: f64, xp: f64) -> Result<Complex64> {
    if z == C_ZERO {
        return Err(Error::BranchPoint);
    }
    let s = z.sqrt();
    let i = Complex64::i();
    let d = (x - xp).abs();
    Ok((i * s * d).exp() * (s * d + i) / (s * s * s * 4.0))
}

/// `A(z) = 1 - V K(z) W` on a [`Grid1D`].
#[derive(Debug, Clone)]
pub struct FreeSystem {
    grid: Grid1D,
    potential: Potential,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl FreeSystem {
    pub fn new(grid: Grid1D, potential: Potential) -> Self {
        let nodes = grid.nodes();
        let values = nodes.iter().map(|&x| potential.eval_real(x)).collect();
        Self {
            grid,
            potential,
            weights: grid.weights(),
            nodes,
            values,
        }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn potential(&self) -> Potential {
        self.potential
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `psi_j = sum_k K(x_j, x_k) w_k phi_k`.
    pub fn propagate(&self, z: Complex64, phi: &CVector) -> Result<CVector> {
        let n = self.nodes.len();
        let mut psi = CVector::zeros(n);
        for j in 0..n {
            let mut acc = C_ZERO;
            for k in 0..n {
                acc += helmholtz_kernel(z, self.nodes[j], self.nodes[k])? * self.weights[k] * phi[k];
            }
            psi[j] = acc;
        }
        Ok(psi)
    }

    fn assemble(&self, z: Complex64, with_derivative: bool) -> Result<(CMatrix, Option<CMatrix>)> {
        if z == C_ZERO {
            return Err(Error::BranchPoint);
        }
        let n = self.nodes.len();
        let s = z.sqrt();
        let i = Complex64::i();
        let k0 = C_ONE / (i * s * 2.0);
        let dk0 = C_ONE / (s * s * s * 4.0);
        let mut a = CMatrix::identity(n, n);
        let mut da = with_derivative.then(|| CMatrix::zeros(n, n));
        for j in 0..n {
            let v = self.values[j];
            if v == 0.0 {
                continue;
            }
            for k in 0..n {
                let d = (self.nodes[j] - self.nodes[k]).abs();
                let e = (i * s * d).exp();
                let vw = v * self.weights[k];
                a[(j, k)] -= e * k0 * vw;
                if let Some(da) = da.as_mut() {
                    da[(j, k)] = -(e * (s * d + i) * dk0 * vw);
                }
            }
        }
        Ok((a, da))
    }
}

impl AnalyticMatrix for FreeSystem {
    fn size(&self) -> usize {
        self.nodes.len()
    }

    fn eval(&self, z: Complex64) -> Result<CMatrix> {
        Ok(self.assemble(z, false)?.0)
    }

    fn eval_with_derivative(&self, z: Complex64) -> Result<(CMatrix, CMatrix)> {
        let (a, da) = self.assemble(z, true)?;
        Ok((a, da.expect("derivative requested")))
    }
}

pub fn assemble_free_a(grid: Grid1D, potential: Potential, z: Complex64) -> Result<CMatrix> {
    FreeSystem::new(grid, potential).eval(z)
}

/// `log10 sigma_min(A(z))` over a window.
pub fn free_scan(system: &FreeSystem, window: &ComplexEnergyGrid) -> Vec<MapNode<f64>> {
    sigma_scan(system, window)
}

pub fn refine_free(system: &FreeSystem, z_init: Complex64) -> Result<NewtonOutcome> {
    newton_refine(system, z_init, &NewtonOptions::default())
}

/// Source `phi` (unit null vector of `A(z0)`) and resonant function `psi`,
/// with `phi = V psi` on the nodes.
pub fn resonant_pair_free(system: &FreeSystem, z0: Complex64) -> Result<(CVector, CVector)> {
    let a = system.eval(z0)?;
    let phi = smallest_singular(&a).right;
    let psi = system.propagate(z0, &phi)?;
    Ok((phi, psi))
}

/// Scale so the largest modulus is 1 (plotting convention).
pub fn normalize_max(v: &CVector) -> CVector {
    let m = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        v.clone()
    } else {
        v / Complex64::from(m)
    }
}

/// Interior-node discretization of `-e^{-2i theta} d^2/dx^2 + V(x e^{i theta})`
/// with Dirichlet ends: returns `(diagonal, off_diagonal)` of the complex
/// symmetric tridiagonal matrix.
pub fn complex_scaled_tridiagonal(grid: Grid1D, potential: Potential, theta: f64) -> (Vec<Complex64>, Complex64) {
    let h = grid.step();
    let rot = Complex64::from_polar(1.0, theta);
    let kinetic = Complex64::from_polar(1.0, -2.0 * theta) / (h * h);
    let nodes = grid.nodes();
    let diag = nodes[1..nodes.len() - 1]
        .iter()
        .map(|&x| kinetic * 2.0 + potential.eval(rot * x))
        .collect();
    (diag, -kinetic)
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_4 + 1e-15) {
        return Err(Error::InvalidParams(format!("scaling angle {theta} outside (0, pi/4]")));
    }
    Ok(())
}

/// All eigenvalues of the complex-scaled Hamiltonian.
pub fn complex_scaled_spectrum(grid: Grid1D, potential: Potential, theta: f64) -> Result<Vec<Complex64>> {
    check_theta(theta)?;
    let (diag, off) = complex_scaled_tridiagonal(grid, potential, theta);
    let n = diag.len();
    let mut h = CMatrix::zeros(n, n);
    for j in 0..n {
        h[(j, j)] = diag[j];
        if j + 1 < n {
            h[(j, j + 1)] = off;
            h[(j + 1, j)] = off;
        }
    }
    let ev = h.eigenvalues().ok_or(Error::NoConvergence {
        iterations: 0,
        z: C_ZERO,
        residual: f64::NAN,
    })?;
    Ok(ev.iter().copied().collect())
}

/// Eigenvalue of the complex-scaled Hamiltonian closest to `target`, by
/// fixed-shift inverse iteration. The matrix is complex symmetric, so the
/// bilinear Rayleigh quotient is second-order accurate in the eigenvector.
pub fn complex_scaled_eigenvalue_near(
    grid: Grid1D,
    potential: Potential,
    theta: f64,
    target: Complex64,
) -> Result<Complex64> {
    check_theta(theta)?;
    let (diag, off) = complex_scaled_tridiagonal(grid, potential, theta);
    let n = diag.len();
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        (0..n)
            .map(|j| {
                let mut acc = diag[j] * v[j];
                if j > 0 {
                    acc += off * v[j - 1];
                }
                if j + 1 < n {
                    acc += off * v[j + 1];
                }
                acc
            })
            .collect()
    };
    let scale = diag.iter().map(|d| d.norm()).fold(2.0 * off.norm(), f64::max);

    let mut v = vec![C_ONE; n];
    let mut lambda = target;
    let mut res = f64::INFINITY;
    let max_iter = 1000;
    for _ in 0..max_iter {
        let w = tridiagonal_solve(&diag, off, target, &v).ok_or(Error::SingularMatrix { z: target })?;
        let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / norm).collect();
        let hv = apply(&v);
        let num: Complex64 = v.iter().zip(&hv).map(|(a, b)| a * b).sum();
        let den: Complex64 = v.iter().map(|a| a * a).sum();
        lambda = num / den;
        res = hv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if res <= 1e-12 * scale {
            return Ok(lambda);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        z: lambda,
        residual: res,
    })
}

/// Solve `(T - shift) x = b` for the symmetric tridiagonal `T`, with
/// partial pivoting.
fn tridiagonal_solve(diag: &[Complex64], off: Complex64, shift: Complex64, b: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = diag.len();
    // Banded LU with row interchanges: rows hold (d, u1, u2).
    let mut d: Vec<Complex64> = diag.iter().map(|x| x - shift).collect();
    let mut u1 = vec![off; n];
    let mut u2 = vec![C_ZERO; n];
    let mut l = vec![off; n];
    let mut rhs = b.to_vec();
    let tiny = 1e-300;
    for j in 0..n.saturating_sub(1) {
        if l[j].norm() > d[j].norm() {
            // Swap rows j and j+1.
            let (dj, u1j, u2j) = (d[j], u1[j], u2[j]);
            d[j] = l[j];
            u1[j] = d[j + 1];
            u2[j] = if j + 1 < n - 1 { u1[j + 1] } else { C_ZERO };
            l[j] = dj;
            d[j + 1] = u1j;
            if j + 1 < n - 1 {
                u1[j + 1] = u2j;
            }
            rhs.swap(j, j + 1);
        }
        if d[j].norm() < tiny {
            return None;
        }
        let m = l[j] / d[j];
        d[j + 1] -= m * u1[j];
        if j + 1 < n - 1 {
            u1[j + 1] -= m * u2[j];
        }
        rhs[j + 1] = rhs[j + 1] - m * rhs[j];
    }
    if d[n - 1].norm() < tiny {
        return None;
    }
    let mut x = vec![C_ZERO; n];
    for j in (0..n).rev() {
        let mut acc = rhs[j];
        if j + 1 < n {
            acc -= u1[j] * x[j + 1];
        }
        if j + 2 < n {
            acc -= u2[j] * x[j + 2];
        }
        x[j] = acc / d[j];
    }
    Some(x)
}

/// A refined zero of `A(z)` together with its drift under a box change.
#[derive(Debug, Clone)]
pub struct FreeResonance {
    pub z: Complex64,
    /// `|z(L2) - z(L1)|`; `None` if the second refinement failed.
    pub drift: Option<f64>,
    pub residual: f64,
}

impl FreeResonance {
    /// Physical resonances are insensitive to the box length.
    pub fn is_stable(&self, tol: f64) -> bool {
        self.drift.is_some_and(|d| d < tol)
    }
}

/// Scan `A(z)` on the first grid, refine every local minimum there and
/// again on a second grid of different length.
pub fn find_free_resonances(
    first: &FreeSystem,
    second: &FreeSystem,
    window: &ComplexEnergyGrid,
) -> Vec<FreeResonance> {
    let nodes = free_scan(first, window);
    let minima = crate::nep::scan_minima(window, &nodes);
    let mut found: Vec<FreeResonance> = Vec::new();
    for (seed, _) in minima {
        let Ok(r1) = refine_free(first, seed) else { continue };
        if found.iter().any(|f| (f.z - r1.z).norm() < 1e-8) {
            continue;
        }
        let drift = refine_free(second, r1.z).ok().map(|r2| (r2.z - r1.z).norm());
        found.push(FreeResonance {
            z: r1.z,
            drift,
            residual: r1.residual,
        });
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_and_weights() {
        let g = Grid1D::new(10.0, 0.05).unwrap();
        assert_eq!(g.len(), 201);
        let x = g.nodes();
        assert!((x[0] + 5.0).abs() < 1e-14 && (x[200] - 5.0).abs() < 1e-12);
        let w: f64 = g.weights().iter().sum();
        assert!((w - 10.0).abs() < 1e-12);
        assert!(Grid1D::new(10.0, 0.3).is_err());
    }

    #[test]
    fn kernel_values() {
        let k = helmholtz_kernel(C_ONE, 0.3, 0.3).unwrap();
        assert!((k - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        let k = helmholtz_kernel(Complex64::new(-1.0, 0.0), 0.0, 2.0).unwrap();
        assert!((k - Complex64::new(-0.5 * (-2.0f64).exp(), 0.0)).norm() < 1e-15);
        assert_eq!(helmholtz_kernel(C_ZERO, 0.0, 1.0), Err(Error::BranchPoint));
        let z = Complex64::new(1.0, -0.2);
        let near = helmholtz_kernel(z, 0.0, 1.0).unwrap().norm();
        let far = helmholtz_kernel(z, 0.0, 20.0).unwrap().norm();
        assert!(far > 5.0 * near);
        let s = z.sqrt();
        assert!((s * s - z).norm() < 1e-15);
    }

    #[test]
    fn kernel_symmetric_and_derivative() {
        let z = Complex64::new(0.7, -0.3);
        let a = helmholtz_kernel(z, -1.2, 2.5).unwrap();
        let b = helmholtz_kernel(z, 2.5, -1.2).unwrap();
        assert_eq!(a, b);
        let h = 1e-6;
        let fd = (helmholtz_kernel(z + h, 0.0, 2.0).unwrap() - helmholtz_kernel(z - h, 0.0, 2.0).unwrap()) / (2.0 * h);
        assert!((helmholtz_kernel_derivative(z, 0.0, 2.0).unwrap() - fd).norm() < 1e-8);
    }

    #[test]
    fn zero_potential_identity() {
        let g = Grid1D::new(4.0, 0.1).unwrap();
        let a = assemble_free_a(g, Potential::Zero, Complex64::new(0.5, -0.1)).unwrap();
        assert_eq!(a, CMatrix::identity(41, 41));
    }

    #[test]
    fn system_derivative_matches_difference() {
        let s = FreeSystem::new(Grid1D::new(6.0, 0.1).unwrap(), Potential::DoubleWell);
        let z = Complex64::new(0.7, -0.1);
        let h = 1e-6;
        let (_, da) = s.eval_with_derivative(z).unwrap();
        let fd = (s.eval(z + h).unwrap() - s.eval(z - h).unwrap()) / Complex64::from(2.0 * h);
        assert!((da - fd).norm() < 1e-7);
    }

    #[test]
    fn free_scaled_spectrum_is_rotated() {
        let g = Grid1D::new(4.0, 0.1).unwrap();
        let theta = 0.3;
        let ev = complex_scaled_spectrum(g, Potential::Zero, theta).unwrap();
        assert_eq!(ev.len(), 39);
        for e in ev {
            assert!((e.arg() + 2.0 * theta).abs() < 1e-9, "{e}");
        }
        assert!(complex_scaled_spectrum(g, Potential::Zero, 1.0).is_err());
    }

    #[test]
    fn inverse_iteration_matches_dense() {
        let g = Grid1D::new(8.0, 0.1).unwrap();
        let theta = 0.5;
        let all = complex_scaled_spectrum(g, Potential::DoubleWell, theta).unwrap();
        let target = Complex64::new(0.7, -0.1);
        let nearest = all
            .iter()
            .copied()
            .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
            .unwrap();
        let got = complex_scaled_eigenvalue_near(g, Potential::DoubleWell, theta, target).unwrap();
        assert!((got - nearest).norm() < 1e-9, "{got} vs {nearest}");
    }

    #[test]
    fn tridiagonal_solver() {
        let diag = vec![Complex64::new(0.0, 1e-3), Complex64::new(2.0, 0.0), Complex64::new(-1.0, 0.5), C_ONE];
        let off = Complex64::new(1.0, 0.2);
        let b = vec![C_ONE, Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.0), C_ZERO];
        let x = tridiagonal_solve(&diag, off, Complex64::new(0.1, 0.0), &b).unwrap();
        for j in 0..4 {
            let mut acc = (diag[j] - 0.1) * x[j];
            if j > 0 {
                acc += off * x[j - 1];
            }
            if j < 3 {
                acc += off * x[j + 1];
            }
            assert!((acc - b[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn upper_half_plane_nonsingular() {
        let s = FreeSystem::new(Grid1D::new(10.0, 0.1).unwrap(), Potential::DoubleWell);
        for re in [0.2, 0.8, 1.5, 2.3] {
            for im in [0.2, 0.6] {
                let a = s.eval(Complex64::new(re, im)).unwrap();
                assert!(crate::nep::singular_values(&a)[0] > 1e-2);
            }
        }
    }
}
