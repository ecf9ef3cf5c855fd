//! Nonlinear eigenvalue problems `A(z) x = 0` for analytic matrix families:
//! smallest-singular-value landscapes and bordered Newton refinement.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::greens::{ComplexEnergyGrid, MapNode};
use crate::CMatrix;

pub type CVector = DVector<Complex64>;

/// An analytic `n x n` matrix-valued function of `z`.
pub trait AnalyticMatrix: Sync {
    fn size(&self) -> usize;

    fn eval(&self, z: Complex64) -> Result<CMatrix>;

    /// `(A(z), A'(z))`.
    fn eval_with_derivative(&self, z: Complex64) -> Result<(CMatrix, CMatrix)>;
}

/// Singular values in ascending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(f64::total_cmp);
    s
}

#[derive(Debug, Clone)]
pub struct SmallestSingular {
    pub sigma_min: f64,
    /// Second smallest singular value (infinite for 1x1).
    pub sigma_second: f64,
    /// Unit right singular vector for `sigma_min`.
    pub right: CVector,
}

pub fn smallest_singular(a: &CMatrix) -> SmallestSingular {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let i0 = order[0];
    SmallestSingular {
        sigma_min: svd.singular_values[i0],
        sigma_second: order.get(1).map_or(f64::INFINITY, |&i| svd.singular_values[i]),
        right: v_t.row(i0).adjoint(),
    }
}

/// `log10 sigma_min(A(z))` at every grid node; failed evaluations are masked.
pub fn sigma_scan<F: AnalyticMatrix>(family: &F, grid: &ComplexEnergyGrid) -> Vec<MapNode<f64>> {
    grid.nodes()
        .into_par_iter()
        .map(|z| MapNode {
            z,
            value: family
                .eval(z)
                .ok()
                .map(|a| singular_values(&a)[0].max(f64::MIN_POSITIVE).log10()),
        })
        .collect()
}

/// Interior nodes strictly below their eight neighbours, deepest first.
pub fn scan_minima(grid: &ComplexEnergyGrid, nodes: &[MapNode<f64>]) -> Vec<(Complex64, f64)> {
    let mut out = Vec::new();
    if grid.n_re < 3 || grid.n_im < 3 {
        return out;
    }
    for i in 1..grid.n_re - 1 {
        for j in 1..grid.n_im - 1 {
            let node = nodes[grid.index(i, j)];
            let Some(v) = node.value else { continue };
            let is_min = (-1i64..=1).all(|di| {
                (-1i64..=1).all(|dj| {
                    if di == 0 && dj == 0 {
                        return true;
                    }
                    let nb = nodes[grid.index((i as i64 + di) as usize, (j as i64 + dj) as usize)];
                    nb.value.is_none_or(|w| v < w)
                })
            });
            if is_min {
                out.push((node.z, v));
            }
        }
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Convergence needs `|A x| <= residual_tol |x|` ...
    pub residual_tol: f64,
    /// ... and `|dz| <= step_tol * max(1, |z|)`.
    pub step_tol: f64,
    /// Fail if the iterate strays further than this from the seed.
    pub trust_radius: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            residual_tol: 1e-10,
            step_tol: 1e-12,
            trust_radius: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub z: Complex64,
    /// Kernel vector, normalized by `c^H x = 1` with `c` the seed vector.
    pub x: CVector,
    pub iterations: usize,
    /// `|A(z) x| / |x|` at the returned point.
    pub residual: f64,
    /// `|dz|` per iteration.
    pub steps: Vec<f64>,
    /// Seed singular vector used as the normalization functional.
    pub normalization: CVector,
}

/// Newton's method on `F(x, z) = (A(z) x, c^H x - 1)`, where `c` is the right
/// singular vector of `sigma_min(A(z_init))` kept fixed throughout.
pub fn newton_refine<F: AnalyticMatrix>(family: &F, z_init: Complex64, opts: &NewtonOptions) -> Result<NewtonOutcome> {
    let n = family.size();
    let c = smallest_singular(&family.eval(z_init)?).right;
    let mut x = c.clone();
    let mut z = z_init;
    let mut steps = Vec::new();

    for it in 1..=opts.max_iterations {
        let (a, da) = family.eval_with_derivative(z)?;
        let ax = &a * &x;
        let residual = ax.norm() / x.norm();

        let dax = &da * &x;
        let mut jac = CMatrix::zeros(n + 1, n + 1);
        jac.view_mut((0, 0), (n, n)).copy_from(&a);
        jac.view_mut((0, n), (n, 1)).copy_from(&dax);
        jac.view_mut((n, 0), (1, n)).copy_from(&c.adjoint());
        let mut rhs = CVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&(-&ax));
        rhs[n] = -(c.dotc(&x) - Complex64::new(1.0, 0.0));

        let delta = jac.lu().solve(&rhs).ok_or(Error::SingularMatrix { z })?;
        let dz = delta[n];
        if !(dz.re.is_finite() && dz.im.is_finite()) {
            return Err(Error::SingularMatrix { z });
        }
        x += delta.rows(0, n);
        z += dz;
        steps.push(dz.norm());

        if (z - z_init).norm() > opts.trust_radius {
            return Err(Error::DivergedOutsideWindow {
                start: z_init,
                z,
                radius: opts.trust_radius,
            });
        }
        if residual <= opts.residual_tol && dz.norm() <= opts.step_tol * z.norm().max(1.0) {
            let a = family.eval(z)?;
            let residual = (&a * &x).norm() / x.norm();
            return Ok(NewtonOutcome {
                z,
                x,
                iterations: it,
                residual,
                steps,
                normalization: c,
            });
        }
    }
    let residual = family
        .eval(z)
        .map(|a| (&a * &x).norm() / x.norm())
        .unwrap_or(f64::NAN);
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        z,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `A(z) = diag(z - 1, z - 2 + 0.5 i, 3)` plus a constant coupling.
    struct Toy;

    impl AnalyticMatrix for Toy {
        fn size(&self) -> usize {
            3
        }

        fn eval(&self, z: Complex64) -> Result<CMatrix> {
            Ok(self.eval_with_derivative(z)?.0)
        }

        fn eval_with_derivative(&self, z: Complex64) -> Result<(CMatrix, CMatrix)> {
            let one = Complex64::new(1.0, 0.0);
            let mut a = CMatrix::zeros(3, 3);
            a[(0, 0)] = z * z - 1.0;
            a[(1, 1)] = z - Complex64::new(2.0, 0.5);
            a[(2, 2)] = Complex64::new(3.0, 0.0);
            a[(0, 2)] = one;
            let mut d = CMatrix::zeros(3, 3);
            d[(0, 0)] = z * 2.0;
            d[(1, 1)] = one;
            Ok((a, d))
        }
    }

    #[test]
    fn newton_finds_simple_zeros() {
        let r = newton_refine(&Toy, Complex64::new(1.9, 0.4), &NewtonOptions::default()).unwrap();
        assert!((r.z - Complex64::new(2.0, 0.5)).norm() < 1e-12);
        assert!(r.residual < 1e-10);
        let r = newton_refine(&Toy, Complex64::new(1.1, 0.05), &NewtonOptions::default()).unwrap();
        assert!((r.z - 1.0).norm() < 1e-12);
        // Quadratic convergence: e_{k+1} ~ e_k^2.
        let s = &r.steps;
        let k = s.iter().position(|&x| x < 1e-4).unwrap();
        if k + 1 < s.len() && s[k + 1] > 1e-15 {
            assert!(s[k + 1] < 10.0 * s[k] * s[k]);
        }
    }

    #[test]
    fn trust_radius_enforced() {
        let opts = NewtonOptions {
            trust_radius: 0.01,
            ..Default::default()
        };
        let err = newton_refine(&Toy, Complex64::new(1.5, 0.2), &opts).unwrap_err();
        assert!(matches!(err, Error::DivergedOutsideWindow { .. }));
    }

    #[test]
    fn iteration_cap() {
        let opts = NewtonOptions {
            max_iterations: 1,
            ..Default::default()
        };
        let err = newton_refine(&Toy, Complex64::new(1.05, 0.02), &opts).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn scan_locates_minimum() {
        let grid = ComplexEnergyGrid::new((1.5, 2.5), (0.0, 1.0), 11, 11).unwrap();
        let nodes = sigma_scan(&Toy, &grid);
        let minima = scan_minima(&grid, &nodes);
        assert!((minima[0].0 - Complex64::new(2.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn smallest_singular_pair() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(0.0, 0.1),
            Complex64::new(1.0, 0.0),
        ]));
        let s = smallest_singular(&a);
        assert!((s.sigma_min - 0.1).abs() < 1e-14);
        assert!((s.sigma_second - 1.0).abs() < 1e-14);
        assert!((s.right[1].norm() - 1.0).abs() < 1e-14);
        assert_eq!(singular_values(&a).len(), 3);
    }
}
