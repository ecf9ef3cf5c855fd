//! Periodic tight-binding Hamiltonians and their Bloch transform.
//!
//! Wavevectors are always in reduced coordinates: `kappa = sum_i kappa_i b_i`
//! with `a_i . b_j = 2 pi delta_ij`. The Bloch matrix is
//!
//! ```text
//! H(kappa) = sum_T exp(2 pi i kappa . T) H0(0, T)
//! ```
//!
//! where `kappa . T` is the plain dot product of reduced coordinates and
//! integer translations. The Brillouin zone is `[-1/2, 1/2)^d` and every
//! quantity is 1-periodic in each reduced coordinate.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result, Warning};
use crate::CMatrix;

/// Relative tolerance for Hermiticity of the stored hoppings.
const HERMITIAN_TOL: f64 = 1e-12;

/// Bands closer than this (times the Bloch matrix norm) are flagged degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Periodic tight-binding model on a lattice isomorphic to `Z^d` with `M`
/// orbitals per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TightBindingModel {
    dim: usize,
    n_orb: usize,
    /// `T -> H0(0, T)`, the coupling of cell 0 to cell `T`.
    hoppings: BTreeMap<Vec<i64>, CMatrix>,
    /// Rows are the Cartesian lattice vectors.
    lattice_vectors: Vec<Vec<f64>>,
    labels: Vec<String>,
    /// Orbital positions inside the cell, reduced coordinates. Plotting only.
    orbital_positions: Vec<Vec<f64>>,
}

impl TightBindingModel {
    /// Builds a model from `(T, H0(0,T))` pairs. Repeated translations are
    /// summed. Fails unless `H0(0,-T) = H0(0,T)^dagger` for every `T`.
    pub fn new(
        dim: usize,
        n_orb: usize,
        hoppings: impl IntoIterator<Item = (Vec<i64>, CMatrix)>,
        lattice_vectors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        if n_orb == 0 {
            return Err(Error::InvalidModel("need at least one orbital per cell".into()));
        }
        if lattice_vectors.len() != dim || lattice_vectors.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidModel(format!(
                "expected {dim} lattice vectors of length {dim}"
            )));
        }
        let lattice = DMatrix::from_fn(dim, dim, |i, j| lattice_vectors[i][j]);
        if lattice.iter().any(|x| !x.is_finite()) || lattice.determinant().abs() < 1e-12 {
            return Err(Error::InvalidModel("lattice vectors are degenerate".into()));
        }

        let mut map: BTreeMap<Vec<i64>, CMatrix> = BTreeMap::new();
        for (t, m) in hoppings {
            if t.len() != dim {
                return Err(Error::InvalidModel(format!(
                    "translation {t:?} does not have dimension {dim}"
                )));
            }
            if m.nrows() != n_orb || m.ncols() != n_orb {
                return Err(Error::InvalidModel(format!(
                    "hopping at {t:?} is {}x{}, expected {n_orb}x{n_orb}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
                return Err(Error::InvalidModel(format!("non-finite hopping at {t:?}")));
            }
            *map.entry(t).or_insert_with(|| CMatrix::zeros(n_orb, n_orb)) += m;
        }
        // Drop vanishing hoppings except the on-site block.
        map.retain(|t, m| t.iter().all(|&x| x == 0) || m.norm() > 0.0);
        map.entry(vec![0; dim])
            .or_insert_with(|| CMatrix::zeros(n_orb, n_orb));

        let scale = map.values().map(|m| m.norm()).fold(1.0, f64::max);
        for (t, m) in &map {
            let minus: Vec<i64> = t.iter().map(|x| -x).collect();
            let partner = map
                .get(&minus)
                .ok_or_else(|| Error::InvalidModel(format!("missing partner of hopping {t:?}")))?;
            if (partner - m.adjoint()).norm() > HERMITIAN_TOL * scale {
                return Err(Error::InvalidModel(format!(
                    "H0(0,{minus:?}) is not the adjoint of H0(0,{t:?})"
                )));
            }
        }

        Ok(Self {
            dim,
            n_orb,
            hoppings: map,
            lattice_vectors,
            labels: (0..n_orb).map(|i| format!("o{i}")).collect(),
            orbital_positions: vec![vec![0.0; dim]; n_orb],
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_orb {
            return Err(Error::InvalidModel(format!(
                "{} labels for {} orbitals",
                labels.len(),
                self.n_orb
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_orbital_positions(mut self, positions: Vec<Vec<f64>>) -> Result<Self> {
        if positions.len() != self.n_orb || positions.iter().any(|p| p.len() != self.dim) {
            return Err(Error::InvalidModel("orbital positions have the wrong shape".into()));
        }
        self.orbital_positions = positions;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orb
    }

    pub fn hoppings(&self) -> &BTreeMap<Vec<i64>, CMatrix> {
        &self.hoppings
    }

    pub fn lattice_vectors(&self) -> &[Vec<f64>] {
        &self.lattice_vectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn orbital_positions(&self) -> &[Vec<f64>] {
        &self.orbital_positions
    }

    /// True if every stored hopping is real.
    /// Reference energy for degeneracy tolerances. `H(k)` itself may vanish
    /// (Dirac points), so the hopping blocks are included.
    fn energy_scale(&self, k: &[f64]) -> f64 {
        self.hoppings
            .values()
            .map(|m| m.norm())
            .fold(bloch_matrix_real(self, k).value.norm(), f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.hoppings
            .values()
            .all(|m| m.iter().all(|x| x.im == 0.0))
    }

    pub fn require_real(&self) -> Result<()> {
        if self.is_real() {
            Ok(())
        } else {
            Err(Error::InvalidModel("model has complex hoppings".into()))
        }
    }

    /// Gram matrix of the reciprocal basis, `G_ij = b_i . b_j`.
    ///
    /// Converts reduced gradients to Cartesian lengths: for a reduced
    /// gradient `g`, `|grad_cart|^2 = g^T G^{-1} g`.
    pub fn reciprocal_metric(&self) -> DMatrix<f64> {
        let a = DMatrix::from_fn(self.dim, self.dim, |i, j| self.lattice_vectors[i][j]);
        let aat = &a * a.transpose();
        aat.try_inverse().expect("lattice checked at construction") * (4.0 * PI * PI)
    }

    /// Inverse of [`reciprocal_metric`](Self::reciprocal_metric).
    pub fn inverse_reciprocal_metric(&self) -> DMatrix<f64> {
        let a = DMatrix::from_fn(self.dim, self.dim, |i, j| self.lattice_vectors[i][j]);
        (&a * a.transpose()) / (4.0 * PI * PI)
    }

    /// Cartesian length of a reduced-coordinate gradient.
    pub fn cartesian_gradient_norm(&self, reduced_gradient: &[f64]) -> f64 {
        let ginv = self.inverse_reciprocal_metric();
        let g = DVector::from_column_slice(reduced_gradient);
        (g.transpose() * ginv * &g)[(0, 0)].max(0.0).sqrt()
    }

    /// Cartesian diameter of the Brillouin zone cell spanned by the
    /// reciprocal vectors (longest diagonal of the parallelotope).
    pub fn zone_diameter(&self) -> f64 {
        let g = self.reciprocal_metric();
        let d = self.dim;
        let mut best: f64 = 0.0;
        // Diagonals sum_i s_i b_i with s_0 = +1 and the remaining signs free.
        for mask in 0..(1usize << (d - 1)) {
            let s: Vec<f64> = (0..d)
                .map(|i| if i > 0 && mask & (1 << (i - 1)) != 0 { -1.0 } else { 1.0 })
                .collect();
            let mut len2 = 0.0;
            for i in 0..d {
                for j in 0..d {
                    len2 += s[i] * s[j] * g[(i, j)];
                }
            }
            best = best.max(len2.sqrt());
        }
        best
    }

    /// Cartesian position of orbital `orb` in cell `cell`.
    pub fn cartesian_position(&self, cell: &[i64], orb: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for ((&n, &frac), a) in cell.iter().zip(&self.orbital_positions[orb]).zip(&self.lattice_vectors) {
            let r = n as f64 + frac;
            for (o, ac) in out.iter_mut().zip(a) {
                *o += r * ac;
            }
        }
        out
    }

    /// Largest `|T|_inf` among stored hoppings.
    pub fn hopping_range(&self) -> i64 {
        self.hoppings
            .keys()
            .flat_map(|t| t.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }

    /// `H0(R, R')` as a dense block.
    pub fn real_space_block(&self, r: &[i64], rp: &[i64]) -> CMatrix {
        let t: Vec<i64> = rp.iter().zip(r).map(|(a, b)| a - b).collect();
        self.hoppings
            .get(&t)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(self.n_orb, self.n_orb))
    }
}

/// Bloch matrix at a (possibly complex) wavevector.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochMatrix {
    pub kappa: Vec<Complex64>,
    pub value: CMatrix,
}

fn phase(kappa: &[Complex64], t: &[i64]) -> Complex64 {
    let dot: Complex64 = kappa
        .iter()
        .zip(t)
        .map(|(k, &ti)| k * ti as f64)
        .sum();
    (Complex64::new(0.0, 2.0 * PI) * dot).exp()
}

/// `sum_T exp(2 pi i kappa.T) H0(0,T)` at a complex reduced wavevector.
pub fn bloch_matrix(model: &TightBindingModel, kappa: &[Complex64]) -> BlochMatrix {
    assert_eq!(kappa.len(), model.dim, "wavevector dimension mismatch");
    let mut value = CMatrix::zeros(model.n_orb, model.n_orb);
    for (t, m) in &model.hoppings {
        value += m * phase(kappa, t);
    }
    BlochMatrix {
        kappa: kappa.to_vec(),
        value,
    }
}

/// Real-wavevector convenience wrapper for [`bloch_matrix`].
pub fn bloch_matrix_real(model: &TightBindingModel, k: &[f64]) -> BlochMatrix {
    let kappa: Vec<Complex64> = k.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    bloch_matrix(model, &kappa)
}

/// `d H(kappa) / d kappa_j` for each reduced direction `j`.
pub fn bloch_derivatives(model: &TightBindingModel, kappa: &[Complex64]) -> Vec<CMatrix> {
    let mut out = vec![CMatrix::zeros(model.n_orb, model.n_orb); model.dim];
    for (t, m) in &model.hoppings {
        let p = phase(kappa, t);
        for (j, d) in out.iter_mut().enumerate() {
            if t[j] != 0 {
                *d += m * (p * Complex64::new(0.0, 2.0 * PI * t[j] as f64));
            }
        }
    }
    out
}

/// Eigen-decomposition of the Hermitian Bloch matrix at a real wavevector.
#[derive(Debug, Clone)]
pub struct BandData {
    pub k: Vec<f64>,
    /// Ascending.
    pub energies: Vec<f64>,
    /// Column `n` is `u_nk`.
    pub vectors: CMatrix,
    /// `gradients[n]` is the reduced-coordinate gradient of band `n`.
    pub gradients: Vec<Vec<f64>>,
    /// Set when two bands are closer than the degeneracy tolerance.
    pub degeneracy: Option<Warning>,
}

impl BandData {
    pub fn min_gap(&self) -> f64 {
        self.energies
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    // Symmetrize to kill rounding asymmetry before the Hermitian solver.
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(h.nrows(), h.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (energies, vectors)
}

fn degeneracy_check(k: &[f64], energies: &[f64], scale: f64) -> Option<Warning> {
    let tol = DEGENERACY_TOL * scale;
    energies
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.min(g))))
        .filter(|&gap| gap <= tol)
        .map(|gap| Warning::DegenerateBands { k: k.to_vec(), gap })
}

/// Sorted bands, orthonormal Bloch vectors and Hellmann-Feynman gradients.
pub fn band_eigens(model: &TightBindingModel, k: &[f64]) -> BandData {
    let kappa: Vec<Complex64> = k.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let h = bloch_matrix(model, &kappa).value;
    let (energies, vectors) = hermitian_eigen(&h);
    let derivs = bloch_derivatives(model, &kappa);
    let gradients = (0..model.n_orb)
        .map(|n| hellmann_feynman(&vectors, &derivs, n))
        .collect();
    let degeneracy = degeneracy_check(k, &energies, model.energy_scale(k));
    BandData {
        k: k.to_vec(),
        energies,
        vectors,
        gradients,
        degeneracy,
    }
}

fn hellmann_feynman(vectors: &CMatrix, derivs: &[CMatrix], n: usize) -> Vec<f64> {
    let u = vectors.column(n);
    derivs
        .iter()
        .map(|d| (u.adjoint() * d * u)[(0, 0)].re)
        .collect()
}

/// Reduced-coordinate gradient of band `n` at `k`, `u^dagger (dH/dk) u`.
///
/// At a degeneracy the value depends on the arbitrary choice of basis in the
/// degenerate subspace; the warning is returned alongside.
pub fn band_gradient(model: &TightBindingModel, k: &[f64], n: usize) -> (Vec<f64>, Option<Warning>) {
    assert!(n < model.n_orb, "band index out of range");
    let data = band_eigens(model, k);
    let tol = DEGENERACY_TOL * model.energy_scale(k);
    let e = &data.energies;
    let near = (n > 0 && e[n] - e[n - 1] <= tol) || (n + 1 < e.len() && e[n + 1] - e[n] <= tol);
    let warn = near.then(|| Warning::DegenerateBands {
        k: k.to_vec(),
        gap: data.min_gap(),
    });
    (data.gradients[n].clone(), warn)
}

/// Bands along a path of real wavevectors.
///
/// Energies are sorted ascending at each point; within a degenerate cluster
/// the bands are ordered to maximize overlap with the previous point so that
/// plotted bands stay continuous.
pub fn band_sweep(model: &TightBindingModel, path: &[Vec<f64>]) -> Vec<BandData> {
    let mut out: Vec<BandData> = Vec::with_capacity(path.len());
    for k in path {
        let mut data = band_eigens(model, k);
        if let Some(prev) = out.last() {
            reorder_clusters(&mut data, prev);
        }
        out.push(data);
    }
    out
}

fn reorder_clusters(data: &mut BandData, prev: &BandData) {
    let m = data.energies.len();
    let h_norm = data.energies.iter().map(|e| e * e).sum::<f64>().sqrt();
    let tol = DEGENERACY_TOL * h_norm.max(1.0) * 1e4;
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && data.energies[end] - data.energies[end - 1] <= tol {
            end += 1;
        }
        if end - start > 1 {
            let mut idx: Vec<usize> = (start..end).collect();
            // Previous band n pairs with the current vector of largest overlap.
            let mut assigned = Vec::with_capacity(idx.len());
            for n in start..end {
                let pv = prev.vectors.column(n);
                let (pos, _) = idx
                    .iter()
                    .enumerate()
                    .map(|(p, &c)| (p, (pv.adjoint() * data.vectors.column(c))[(0, 0)].norm()))
                    .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
                assigned.push(idx.remove(pos));
            }
            let vecs = data.vectors.clone();
            let grads = data.gradients.clone();
            let ens = data.energies.clone();
            for (slot, &src) in (start..end).zip(&assigned) {
                data.vectors.set_column(slot, &vecs.column(src));
                data.gradients[slot] = grads[src].clone();
                data.energies[slot] = ens[src];
            }
        }
        start = end;
    }
}

/// Uniform `N^d` grid of reduced wavevectors `k_j = j / N`, index `j_0` fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KGrid {
    pub dim: usize,
    pub n: usize,
}

impl KGrid {
    pub fn new(dim: usize, n: usize) -> Self {
        Self { dim, n }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        (0..self.dim)
            .map(|_| {
                let j = flat % self.n;
                flat /= self.n;
                j
            })
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .rev()
            .fold(0, |acc, &j| acc * self.n + (j % self.n))
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .into_iter()
            .map(|j| j as f64 / self.n as f64)
            .collect()
    }

    /// Flat index of the neighbour shifted by `step` along `axis` (periodic).
    pub fn neighbour(&self, flat: usize, axis: usize, step: isize) -> usize {
        let mut m = self.multi_index(flat);
        let n = self.n as isize;
        m[axis] = ((m[axis] as isize + step).rem_euclid(n)) as usize;
        self.flat_index(&m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn diatomic_bloch_at_zero() {
        let m = models::make_diatomic(1.0, 0.0);
        let h = bloch_matrix_real(&m, &[0.0]).value;
        let expected = CMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(0.0)]);
        assert!((h - expected).norm() < 1e-14);
    }

    #[test]
    fn diatomic_bloch_matches_quoted_form() {
        // k in radians per cell is 2 pi times the reduced coordinate.
        let m = models::make_diatomic(1.0, 0.0);
        for &kr in &[0.1, 0.37, -0.42] {
            let k = 2.0 * PI * kr;
            let h = bloch_matrix_real(&m, &[kr]).value;
            let e = |x: f64| Complex64::new(0.0, x).exp();
            let expected =
                CMatrix::from_row_slice(2, 2, &[c(1.0), e(-k) + 1.0, e(k) + 1.0, c(0.0)]);
            assert!((h - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn flat_model_has_no_dispersion() {
        let d = CMatrix::from_row_slice(2, 2, &[c(0.3), c(0.1), c(0.1), c(-0.2)]);
        let m = TightBindingModel::new(1, 2, vec![(vec![0], d.clone())], vec![vec![1.0]]).unwrap();
        for &k in &[0.0, 0.25, -0.4] {
            assert!((bloch_matrix_real(&m, &[k]).value - &d).norm() < 1e-15);
        }
    }

    #[test]
    fn graphene_dirac_point_vanishes() {
        let g = models::make_graphene(1.0);
        let h = bloch_matrix_real(&g, &[1.0 / 3.0, -1.0 / 3.0]).value;
        assert!(h.norm() < 1e-14, "{h}");
    }

    #[test]
    fn diatomic_band_values() {
        let m = models::make_diatomic(1.0, 0.0);
        let b = band_eigens(&m, &[0.5]);
        assert!((b.energies[0] - 0.0).abs() < 1e-12);
        assert!((b.energies[1] - 1.0).abs() < 1e-12);
        let b = band_eigens(&m, &[0.0]);
        let s = 4.25f64.sqrt();
        assert!((b.energies[0] - (0.5 - s)).abs() < 1e-12);
        assert!((b.energies[1] - (0.5 + s)).abs() < 1e-12);
        assert!((b.energies[0] + 1.5616).abs() < 1e-4);
        assert!((b.energies[1] - 2.5616).abs() < 1e-4);
    }

    #[test]
    fn graphene_gamma_point() {
        let g = models::make_graphene(1.0);
        let b = band_eigens(&g, &[0.0, 0.0]);
        assert!((b.energies[0] + 3.0).abs() < 1e-12);
        assert!((b.energies[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_band_extremum() {
        let m = models::make_diatomic(1.0, 0.0);
        for n in 0..2 {
            let (g, w) = band_gradient(&m, &[0.0], n);
            assert!(w.is_none());
            assert!(g[0].abs() < 1e-12);
        }
    }

    fn fd_gradient(model: &TightBindingModel, k: &[f64], n: usize, step: f64) -> Vec<f64> {
        (0..k.len())
            .map(|j| {
                let mut kp = k.to_vec();
                let mut km = k.to_vec();
                kp[j] += step;
                km[j] -= step;
                (band_eigens(model, &kp).energies[n] - band_eigens(model, &km).energies[n])
                    / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn diatomic_gradient_matches_finite_difference() {
        // k = pi/2 in radians.
        let m = models::make_diatomic(1.0, 0.0);
        let k = [0.25];
        let (g, _) = band_gradient(&m, &k, 1);
        let fd = fd_gradient(&m, &k, 1, 1e-5);
        assert!((g[0] - fd[0]).abs() < 1e-6, "{g:?} vs {fd:?}");
    }

    #[test]
    fn graphene_gradient_on_fermi_line() {
        let g = models::make_graphene(1.0);
        // Bisect along the Gamma -> M direction for the E = 2 upper band.
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if band_eigens(&g, &[mid, 0.0]).energies[1] > 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = [lo, 0.0];
        let (grad, w) = band_gradient(&g, &k, 1);
        assert!(w.is_none());
        let norm = (grad[0] * grad[0] + grad[1] * grad[1]).sqrt();
        assert!(norm > 1.0);
        let fd = fd_gradient(&g, &k, 1, 1e-5);
        for j in 0..2 {
            assert!((grad[j] - fd[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_non_hermitian_hoppings() {
        let t0 = CMatrix::zeros(1, 1);
        let t1 = CMatrix::from_element(1, 1, c(1.0));
        let t_1 = CMatrix::from_element(1, 1, c(2.0));
        let r = TightBindingModel::new(
            1,
            1,
            vec![(vec![0], t0), (vec![1], t1), (vec![-1], t_1)],
            vec![vec![1.0]],
        );
        assert!(matches!(r, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn rejects_missing_partner() {
        let t1 = CMatrix::from_element(1, 1, c(1.0));
        let r = TightBindingModel::new(1, 1, vec![(vec![1], t1)], vec![vec![1.0]]);
        assert!(r.is_err());
    }

    #[test]
    fn degenerate_bands_flagged_at_dirac_point() {
        let g = models::make_graphene(1.0);
        let b = band_eigens(&g, &[1.0 / 3.0, -1.0 / 3.0]);
        assert!(matches!(b.degeneracy, Some(Warning::DegenerateBands { .. })));
        let (_, w) = band_gradient(&g, &[1.0 / 3.0, -1.0 / 3.0], 0);
        assert!(w.is_some());
    }

    #[test]
    fn reciprocal_metric_orthogonality() {
        let g = models::make_graphene(1.0);
        let metric = g.reciprocal_metric();
        let two_pi_sq = 4.0 * PI * PI;
        assert!((metric[(0, 0)] - two_pi_sq * 4.0 / 3.0).abs() < 1e-10);
        assert!((metric[(0, 1)] + two_pi_sq * 2.0 / 3.0).abs() < 1e-10);
        let chain = models::make_diatomic(1.0, 0.0);
        assert!((chain.zone_diameter() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn kgrid_roundtrip() {
        let g = KGrid::new(2, 5);
        for f in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(f)), f);
        }
        assert_eq!(g.neighbour(0, 0, -1), 4);
        assert_eq!(g.neighbour(0, 1, 1), 5);
    }

    #[test]
    fn sweep_keeps_degenerate_cluster_ordered() {
        let g = models::make_graphene(1.0);
        let path: Vec<Vec<f64>> = (0..=20)
            .map(|i| {
                let s = i as f64 / 20.0;
                vec![s / 3.0, -s / 3.0]
            })
            .collect();
        let bands = band_sweep(&g, &path);
        assert_eq!(bands.len(), 21);
        for b in &bands {
            assert!(b.energies[0] <= b.energies[1] + 1e-12);
        }
    }

    #[test]
    fn cartesian_gradient_norm_uses_metric() {
        let chain = models::make_chain1band();
        // d/dkappa of 2 cos(2 pi kappa) at kappa = 1/4 is -4 pi; Cartesian
        // gradient (radians, unit lattice) is -2.
        let n = chain.cartesian_gradient_norm(&[-4.0 * PI]);
        assert!((n - 2.0).abs() < 1e-12);
    }
}
