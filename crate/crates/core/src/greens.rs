//! Lattice Green function `R0(R, R'; z)` by (deformed) Brillouin-zone
//! quadrature:
//!
//! ```text
//! R0(R,R';z) ~ N^-d sum_k exp(2 pi i kappa.(R-R')) (z - H(kappa))^-1 det(1 + i h'(k)),
//! kappa = k + i h(k)
//! ```
//!
//! With `h = 0` this is the plain Monkhorst-Pack average, valid for
//! `Im z > 0`. A deformation built at energy `E` continues the result below
//! the real axis near `E`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bcd::{build_deformation, DeformationField, DeformationParams};
use crate::error::{Error, Result, Warning};
use crate::lattice::{band_eigens, bloch_matrix, KGrid, TightBindingModel};
use crate::CMatrix;

/// Condition estimate above which `z - H(kappa)` counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

/// k-points per work unit; partial sums are combined in chunk order so
/// results do not depend on the number of workers.
const CHUNK: usize = 64;

#[derive(Debug, Clone)]
struct KPoint {
    k: Vec<f64>,
    kappa: Vec<Complex64>,
    bloch: CMatrix,
    /// `det(1 + i h') / N^d`.
    weight: Complex64,
}

/// Binds a model to a deformation field and grid.
#[derive(Debug, Clone)]
pub struct GreenEvaluator {
    model: Arc<TightBindingModel>,
    field: Arc<DeformationField>,
    points: Arc<Vec<KPoint>>,
}

impl GreenEvaluator {
    pub fn new(model: TightBindingModel, field: DeformationField) -> Result<Self> {
        Self::from_shared(Arc::new(model), Arc::new(field))
    }

    pub fn from_shared(model: Arc<TightBindingModel>, field: Arc<DeformationField>) -> Result<Self> {
        if model.dim() != field.dim() {
            return Err(Error::Mismatch(format!(
                "model dimension {} but field dimension {}",
                model.dim(),
                field.dim()
            )));
        }
        let grid = field.grid();
        let norm = 1.0 / grid.len() as f64;
        let points = (0..grid.len())
            .map(|flat| {
                let kappa = field.kappa(flat);
                KPoint {
                    k: grid.point(flat),
                    bloch: bloch_matrix(&model, &kappa).value,
                    kappa,
                    weight: field.jacobians()[flat] * norm,
                }
            })
            .collect();
        Ok(Self {
            model,
            field,
            points: Arc::new(points),
        })
    }

    /// Plain quadrature (`h = 0`) on an `n^d` grid.
    pub fn undeformed(model: TightBindingModel, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParams("grid size must be positive".into()));
        }
        let field = DeformationField::trivial(model.dim(), n);
        Self::new(model, field)
    }

    /// Quadrature on the field targeted at `params.energy`.
    pub fn deformed(model: TightBindingModel, params: DeformationParams, n: usize) -> Result<Self> {
        let field = build_deformation(&model, params, n)?;
        Self::new(model, field)
    }

    /// Same model, new field at `energy` with this evaluator's parameters.
    pub fn retarget(&self, energy: f64) -> Result<Self> {
        let params = self
            .field
            .params()
            .ok_or_else(|| Error::InvalidParams("evaluator has no deformation parameters".into()))?
            .at_energy(energy);
        let field = build_deformation(&self.model, params, self.field.n())?;
        Self::from_shared(self.model.clone(), Arc::new(field))
    }

    pub fn model(&self) -> &TightBindingModel {
        &self.model
    }

    pub fn shared_model(&self) -> Arc<TightBindingModel> {
        self.model.clone()
    }

    pub fn field(&self) -> &DeformationField {
        &self.field
    }

    pub fn n(&self) -> usize {
        self.field.n()
    }

    pub fn warnings(&self) -> &[Warning] {
        self.field.warnings()
    }

    /// `R0(R, R'; z)` for several displacements `R - R'` in one pass.
    pub fn green_blocks(&self, z: Complex64, displacements: &[Vec<i64>]) -> Result<Vec<CMatrix>> {
        Ok(self.accumulate(z, displacements, false)?.0)
    }

    /// `R0` and `dR0/dz` for several displacements in one pass.
    pub fn green_blocks_with_derivative(
        &self,
        z: Complex64,
        displacements: &[Vec<i64>],
    ) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
        let (g, d) = self.accumulate(z, displacements, true)?;
        Ok((g, d.expect("derivative requested")))
    }

    pub fn green_block(&self, z: Complex64, r: &[i64], rp: &[i64]) -> Result<CMatrix> {
        let d = displacement(r, rp);
        Ok(self.green_blocks(z, &[d])?.remove(0))
    }

    /// `dR0/dz`: same quadrature with `-(z - H)^-2`.
    pub fn green_derivative(&self, z: Complex64, r: &[i64], rp: &[i64]) -> Result<CMatrix> {
        let d = displacement(r, rp);
        Ok(self.green_blocks_with_derivative(z, &[d])?.1.remove(0))
    }

    /// Trace per cell, `Tr R0(0, 0; z)`.
    pub fn trace(&self, z: Complex64) -> Result<Complex64> {
        let zero = vec![0; self.model.dim()];
        Ok(self.green_blocks(z, &[zero])?[0].trace())
    }

    fn accumulate(
        &self,
        z: Complex64,
        displacements: &[Vec<i64>],
        with_derivative: bool,
    ) -> Result<(Vec<CMatrix>, Option<Vec<CMatrix>>)> {
        let m = self.model.n_orbitals();
        for d in displacements {
            if d.len() != self.model.dim() {
                return Err(Error::Mismatch(format!("displacement {d:?} has wrong dimension")));
            }
        }
        let partials: Vec<Result<(Vec<CMatrix>, Vec<CMatrix>)>> = self
            .points
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = vec![CMatrix::zeros(m, m); displacements.len()];
                let mut dg = if with_derivative {
                    vec![CMatrix::zeros(m, m); displacements.len()]
                } else {
                    Vec::new()
                };
                for p in chunk {
                    let inv = resolvent(z, &p.bloch).ok_or_else(|| Error::SingularKPoint {
                        z,
                        kpoint: p.k.clone(),
                        condition: f64::INFINITY,
                    })?;
                    let cond = one_norm(&(CMatrix::identity(m, m) * z - &p.bloch)) * one_norm(&inv);
                    if !cond.is_finite() || cond > SINGULAR_CONDITION {
                        return Err(Error::SingularKPoint {
                            z,
                            kpoint: p.k.clone(),
                            condition: cond,
                        });
                    }
                    let inv2 = with_derivative.then(|| &inv * &inv);
                    for (i, d) in displacements.iter().enumerate() {
                        let w = bloch_phase(&p.kappa, d) * p.weight;
                        g[i] += &inv * w;
                        if let Some(inv2) = &inv2 {
                            dg[i] -= inv2 * w;
                        }
                    }
                }
                Ok((g, dg))
            })
            .collect();

        let mut g = vec![CMatrix::zeros(m, m); displacements.len()];
        let mut dg = vec![CMatrix::zeros(m, m); if with_derivative { displacements.len() } else { 0 }];
        for part in partials {
            let (pg, pdg) = part?;
            for (a, b) in g.iter_mut().zip(pg) {
                *a += b;
            }
            for (a, b) in dg.iter_mut().zip(pdg) {
                *a += b;
            }
        }
        Ok((g, with_derivative.then_some(dg)))
    }
}

fn displacement(r: &[i64], rp: &[i64]) -> Vec<i64> {
    r.iter().zip(rp).map(|(a, b)| a - b).collect()
}

fn bloch_phase(kappa: &[Complex64], d: &[i64]) -> Complex64 {
    let dot: Complex64 = kappa.iter().zip(d).map(|(k, &x)| k * x as f64).sum();
    (Complex64::new(0.0, 2.0 * PI) * dot).exp()
}

fn resolvent(z: Complex64, h: &CMatrix) -> Option<CMatrix> {
    let m = h.nrows();
    (CMatrix::identity(m, m) * z - h).try_inverse()
}

fn one_norm(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Rectangular grid of complex energies. Nodes are ordered column by column
/// (fixed `Re z`), imaginary part ascending within a column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEnergyGrid {
    pub re_min: f64,
    pub re_max: f64,
    pub n_re: usize,
    pub im_min: f64,
    pub im_max: f64,
    pub n_im: usize,
}

impl ComplexEnergyGrid {
    pub fn new(re: (f64, f64), im: (f64, f64), n_re: usize, n_im: usize) -> Result<Self> {
        let g = Self {
            re_min: re.0,
            re_max: re.1,
            n_re,
            im_min: im.0,
            im_max: im.1,
            n_im,
        };
        if n_re == 0 || n_im == 0 {
            return Err(Error::InvalidParams("grid counts must be at least 1".into()));
        }
        if ![re.0, re.1, im.0, im.1].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParams("grid ranges must be finite".into()));
        }
        Ok(g)
    }

    fn axis(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    pub fn re_values(&self) -> Vec<f64> {
        (0..self.n_re).map(|i| Self::axis(self.re_min, self.re_max, self.n_re, i)).collect()
    }

    pub fn im_values(&self) -> Vec<f64> {
        (0..self.n_im).map(|i| Self::axis(self.im_min, self.im_max, self.n_im, i)).collect()
    }

    pub fn nodes(&self) -> Vec<Complex64> {
        let im = self.im_values();
        self.re_values()
            .into_iter()
            .flat_map(|x| im.iter().map(move |&y| Complex64::new(x, y)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.n_re * self.n_im
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat node index of `(re index, im index)`.
    pub fn index(&self, i_re: usize, i_im: usize) -> usize {
        i_re * self.n_im + i_im
    }
}

/// One node of a complex-energy map; `None` marks a singular node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapNode<T> {
    pub z: Complex64,
    pub value: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    /// Use the evaluator's field for every node.
    FixedEnergy,
    /// Rebuild the field at `E = Re z` for each column.
    AdaptiveEnergy,
}

/// `Tr R0(0,0;z)` over a grid of complex energies.
pub fn trace_map(ev: &GreenEvaluator, grid: &ComplexEnergyGrid, mode: TraceMode) -> Result<Vec<MapNode<Complex64>>> {
    let im = grid.im_values();
    let columns: Vec<Result<Vec<MapNode<Complex64>>>> = grid
        .re_values()
        .into_par_iter()
        .map(|x| {
            let local;
            let ev = match mode {
                TraceMode::FixedEnergy => ev,
                TraceMode::AdaptiveEnergy => {
                    local = ev.retarget(x)?;
                    &local
                }
            };
            Ok(im
                .iter()
                .map(|&y| {
                    let z = Complex64::new(x, y);
                    MapNode {
                        z,
                        value: ev.trace(z).ok(),
                    }
                })
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(grid.len());
    for c in columns {
        out.extend(c?);
    }
    Ok(out)
}

/// Gaussian-smeared density of states per cell,
/// `N^-d sum_k sum_n exp(-((e_nk - E)/eta)^2) / (eta sqrt(pi))`.
///
/// The normalization makes the integral over `E` equal to the number of
/// orbitals per cell.
pub fn dos_smearing(model: &TightBindingModel, energy: f64, eta: f64, n: usize) -> Result<f64> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::InvalidParams("smearing width must be positive".into()));
    }
    let grid = KGrid::new(model.dim(), n);
    let norm = 1.0 / (eta * PI.sqrt() * grid.len() as f64);
    let sum: f64 = (0..grid.len())
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|flat| {
            band_eigens(model, &grid.point(flat))
                .energies
                .iter()
                .map(|e| {
                    let x = (e - energy) / eta;
                    (-x * x).exp()
                })
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    Ok(sum * norm)
}

/// Density of states `-Im Tr R0(0,0;E) / pi` from the field targeted at `E`.
pub fn dos_bcd(model: &TightBindingModel, energy: f64, params: DeformationParams, n: usize) -> Result<(f64, Vec<Warning>)> {
    let ev = GreenEvaluator::deformed(model.clone(), params.at_energy(energy), n)?;
    let tr = ev.trace(Complex64::new(energy, 0.0))?;
    Ok((-tr.im / PI, ev.warnings().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn flat_band_is_exact() {
        let m = models::make_flatband(0.7, 1);
        let ev = GreenEvaluator::undeformed(m.clone(), 16).unwrap();
        let z = Complex64::new(0.2, 0.3);
        let g = ev.green_block(z, &[0], &[0]).unwrap();
        assert!((g[(0, 0)] - 1.0 / (z - 0.7)).norm() < 1e-12);
        let off = ev.green_block(z, &[3], &[0]).unwrap();
        assert!(off[(0, 0)].norm() < 1e-12);
        let d = ev.green_derivative(z, &[0], &[0]).unwrap();
        assert!((d[(0, 0)] + 1.0 / ((z - 0.7) * (z - 0.7))).norm() < 1e-12);
    }

    #[test]
    fn single_band_chain_closed_form() {
        let ev = GreenEvaluator::undeformed(models::make_chain1band(), 200).unwrap();
        let z = Complex64::new(3.0, 0.0);
        let g = ev.green_block(z, &[0], &[0]).unwrap()[(0, 0)];
        assert!((g - 1.0 / 5f64.sqrt()).norm() < 1e-8, "{g}");
        let d = ev.green_derivative(z, &[0], &[0]).unwrap()[(0, 0)];
        assert!((d + 3.0 / 5f64.powf(1.5)).norm() < 1e-8, "{d}");
    }

    #[test]
    fn singular_k_point_detected() {
        let m = models::make_flatband(0.5, 1);
        let ev = GreenEvaluator::undeformed(m, 8).unwrap();
        let err = ev.green_block(Complex64::new(0.5, 0.0), &[0], &[0]).unwrap_err();
        assert!(matches!(err, Error::SingularKPoint { .. }));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let m = models::make_diatomic(1.0, 0.0);
        let p = DeformationParams::new(2.0, 0.3, 0.5).unwrap();
        let ev = GreenEvaluator::deformed(m, p, 50).unwrap();
        let z = Complex64::new(2.0, -0.05);
        let step = 1e-5;
        let fd = (ev.green_block(z + step, &[1], &[0]).unwrap() - ev.green_block(z - step, &[1], &[0]).unwrap())
            / Complex64::new(2.0 * step, 0.0);
        let d = ev.green_derivative(z, &[1], &[0]).unwrap();
        assert!((&fd - &d).norm() <= 1e-6 * d.norm(), "{fd} {d}");
    }

    #[test]
    fn flat_band_dos() {
        let m = models::make_flatband(0.4, 2);
        let eta = 0.3;
        let e = 0.55;
        let x: f64 = (0.4 - e) / eta;
        let expected = (-x * x).exp() / (eta * PI.sqrt());
        assert!((dos_smearing(&m, e, eta, 5).unwrap() - expected).abs() < 1e-14);
        let p = DeformationParams::new(e, 0.3, 0.4).unwrap();
        assert!(dos_bcd(&m, e, p, 8).unwrap().0.abs() < 1e-14);
    }

    #[test]
    fn grid_nodes_are_column_major() {
        let g = ComplexEnergyGrid::new((0.0, 1.0), (-1.0, 1.0), 3, 5).unwrap();
        let nodes = g.nodes();
        assert_eq!(nodes.len(), 15);
        assert_eq!(nodes[g.index(1, 0)], Complex64::new(0.5, -1.0));
        assert_eq!(nodes[g.index(2, 4)], Complex64::new(1.0, 1.0));
        assert!(ComplexEnergyGrid::new((0.0, 1.0), (0.0, 1.0), 0, 1).is_err());
        let single = ComplexEnergyGrid::new((0.3, 1.0), (0.2, 1.0), 1, 1).unwrap();
        assert_eq!(single.nodes(), vec![Complex64::new(0.3, 0.2)]);
    }

    #[test]
    fn adaptive_needs_parameters() {
        let ev = GreenEvaluator::undeformed(models::make_diatomic(1.0, 0.0), 10).unwrap();
        let g = ComplexEnergyGrid::new((0.0, 1.0), (0.5, 1.0), 2, 2).unwrap();
        assert!(trace_map(&ev, &g, TraceMode::AdaptiveEnergy).is_err());
        let map = trace_map(&ev, &g, TraceMode::FixedEnergy).unwrap();
        assert!(map.iter().all(|n| n.value.is_some()));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let field = DeformationField::trivial(2, 4);
        assert!(GreenEvaluator::new(models::make_chain1band(), field).is_err());
    }
}
