//! Defect integral equation `phi = V R0(z) phi` restricted to the defect
//! support: assembly, singular-value scans, Newton refinement, residue
//! normalization and resonant-state reconstruction.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::greens::{ComplexEnergyGrid, GreenEvaluator, MapNode, TraceMode};
use crate::nep::{
    newton_refine, sigma_scan, singular_values, smallest_singular, AnalyticMatrix, CVector, NewtonOptions,
};
use crate::{CMatrix, C_ONE, C_ZERO};

/// Second singular value of `A(z0)` below this means the kernel is not simple.
pub const SIMPLICITY_THRESHOLD: f64 = 1e-6;

/// `(R, i, R', j) -> V` on crystal orbitals.
pub type LatticeEntries = BTreeMap<(Vec<i64>, usize, Vec<i64>, usize), Complex64>;

/// A degree of freedom touched by a defect.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dof {
    Lattice { cell: Vec<i64>, orbital: usize },
    /// Index into [`DefectOperator::extra_sites`].
    Extra(usize),
}

/// A site outside the crystal with energy `energy`, coupled to lattice
/// orbitals `(R, i)` by the given amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtraSite {
    pub energy: f64,
    pub couplings: BTreeMap<(Vec<i64>, usize), Complex64>,
}

/// Compactly supported perturbation. Extra-site energies belong to the
/// unperturbed (decoupled) system; only their couplings enter `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectOperator {
    lattice_entries: LatticeEntries,
    extra_sites: Vec<ExtraSite>,
    support: Vec<Dof>,
    potential: CMatrix,
}

impl DefectOperator {
    pub fn new(lattice_entries: LatticeEntries, extra_sites: Vec<ExtraSite>) -> Result<Self> {
        let mut cells = BTreeSet::new();
        for (r, i, rp, j) in lattice_entries.keys() {
            if r.len() != rp.len() {
                return Err(Error::InvalidDefect(format!("entry {r:?} -> {rp:?} mixes dimensions")));
            }
            cells.insert((r.clone(), *i));
            cells.insert((rp.clone(), *j));
        }
        for site in &extra_sites {
            if !site.energy.is_finite() {
                return Err(Error::InvalidDefect("extra-site energy must be finite".into()));
            }
            cells.extend(site.couplings.keys().cloned());
        }
        if let Some(first) = cells.iter().next() {
            if cells.iter().any(|(r, _)| r.len() != first.0.len()) {
                return Err(Error::InvalidDefect("cells of different dimension".into()));
            }
        }

        let mut support: Vec<Dof> = cells
            .into_iter()
            .map(|(cell, orbital)| Dof::Lattice { cell, orbital })
            .collect();
        support.extend((0..extra_sites.len()).map(Dof::Extra));
        let pos: BTreeMap<&Dof, usize> = support.iter().enumerate().map(|(k, d)| (d, k)).collect();

        let n = support.len();
        let mut v = CMatrix::zeros(n, n);
        for ((r, i, rp, j), val) in &lattice_entries {
            let a = pos[&Dof::Lattice { cell: r.clone(), orbital: *i }];
            let b = pos[&Dof::Lattice { cell: rp.clone(), orbital: *j }];
            v[(a, b)] += val;
        }
        for (d, site) in extra_sites.iter().enumerate() {
            let e = pos[&Dof::Extra(d)];
            for ((r, i), val) in &site.couplings {
                let a = pos[&Dof::Lattice { cell: r.clone(), orbital: *i }];
                v[(a, e)] += val;
                v[(e, a)] += val.conj();
            }
        }
        let scale = v.norm().max(1.0);
        if (&v - v.adjoint()).norm() > 1e-12 * scale {
            return Err(Error::InvalidDefect("perturbation is not Hermitian".into()));
        }

        Ok(Self {
            lattice_entries,
            extra_sites,
            support,
            potential: v,
        })
    }

    pub fn lattice_entries(&self) -> &LatticeEntries {
        &self.lattice_entries
    }

    pub fn extra_sites(&self) -> &[ExtraSite] {
        &self.extra_sites
    }

    /// Lattice orbitals in sorted order, then extra sites.
    pub fn support(&self) -> &[Dof] {
        &self.support
    }

    /// `V` on the support, rows and columns ordered as [`support`](Self::support).
    pub fn potential_matrix(&self) -> &CMatrix {
        &self.potential
    }

    pub fn is_real(&self) -> bool {
        self.potential.iter().all(|x| x.im == 0.0)
    }

    /// Orbital indices and cell dimensions must fit the model.
    pub fn check_against(&self, dim: usize, n_orbitals: usize) -> Result<()> {
        for d in &self.support {
            if let Dof::Lattice { cell, orbital } = d {
                if cell.len() != dim || *orbital >= n_orbitals {
                    return Err(Error::InvalidDefect(format!(
                        "support entry ({cell:?}, {orbital}) does not fit a {dim}-d model with {n_orbitals} orbitals"
                    )));
                }
            }
        }
        Ok(())
    }

    fn lattice_dofs(&self) -> impl Iterator<Item = (usize, &Vec<i64>, usize)> {
        self.support.iter().enumerate().filter_map(|(k, d)| match d {
            Dof::Lattice { cell, orbital } => Some((k, cell, *orbital)),
            Dof::Extra(_) => None,
        })
    }
}

fn diff(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Resolvent of the extended unperturbed system on the support, optionally
/// with its `z`-derivative.
fn support_resolvent(
    ev: &GreenEvaluator,
    defect: &DefectOperator,
    z: Complex64,
    with_derivative: bool,
) -> Result<(CMatrix, Option<CMatrix>)> {
    defect.check_against(ev.model().dim(), ev.model().n_orbitals())?;
    let n = defect.support.len();
    let lat: Vec<_> = defect.lattice_dofs().collect();

    let mut displacements: Vec<Vec<i64>> = Vec::new();
    let mut index = BTreeMap::new();
    for (_, r, _) in &lat {
        for (_, rp, _) in &lat {
            let d = diff(r, rp);
            if !index.contains_key(&d) {
                index.insert(d.clone(), displacements.len());
                displacements.push(d);
            }
        }
    }

    let mut g = CMatrix::zeros(n, n);
    let mut dg = with_derivative.then(|| CMatrix::zeros(n, n));
    if !displacements.is_empty() {
        let (blocks, dblocks) = if with_derivative {
            let (b, d) = ev.green_blocks_with_derivative(z, &displacements)?;
            (b, Some(d))
        } else {
            (ev.green_blocks(z, &displacements)?, None)
        };
        for &(a, r, i) in &lat {
            for &(b, rp, j) in &lat {
                let k = index[&diff(r, rp)];
                g[(a, b)] = blocks[k][(i, j)];
                if let (Some(dg), Some(db)) = (dg.as_mut(), dblocks.as_ref()) {
                    dg[(a, b)] = db[k][(i, j)];
                }
            }
        }
    }
    for (a, d) in defect.support.iter().enumerate() {
        if let Dof::Extra(e) = d {
            let w = z - defect.extra_sites[*e].energy;
            if w == C_ZERO {
                return Err(Error::SingularMatrix { z });
            }
            g[(a, a)] = C_ONE / w;
            if let Some(dg) = dg.as_mut() {
                dg[(a, a)] = -C_ONE / (w * w);
            }
        }
    }
    Ok((g, dg))
}

/// `R0(z)` of the crystal plus decoupled extra sites, restricted to the support.
pub fn defect_resolvent_block(ev: &GreenEvaluator, defect: &DefectOperator, z: Complex64) -> Result<CMatrix> {
    Ok(support_resolvent(ev, defect, z, false)?.0)
}

/// `A(z) = 1 - V R0(z)` on the support.
pub fn assemble_a(ev: &GreenEvaluator, defect: &DefectOperator, z: Complex64) -> Result<CMatrix> {
    let r0 = defect_resolvent_block(ev, defect, z)?;
    let n = r0.nrows();
    Ok(CMatrix::identity(n, n) - defect.potential_matrix() * r0)
}

/// `A(z)` as an analytic family for the generic solvers.
pub struct DefectProblem<'a> {
    pub ev: &'a GreenEvaluator,
    pub defect: &'a DefectOperator,
}

impl AnalyticMatrix for DefectProblem<'_> {
    fn size(&self) -> usize {
        self.defect.support.len()
    }

    fn eval(&self, z: Complex64) -> Result<CMatrix> {
        assemble_a(self.ev, self.defect, z)
    }

    fn eval_with_derivative(&self, z: Complex64) -> Result<(CMatrix, CMatrix)> {
        let (r0, dr0) = support_resolvent(self.ev, self.defect, z, true)?;
        let v = self.defect.potential_matrix();
        let n = r0.nrows();
        Ok((CMatrix::identity(n, n) - v * r0, -(v * dr0.expect("derivative requested"))))
    }
}

/// `log10 sigma_min(A(z))` over the grid; nodes where `R0` fails are masked.
pub fn svd_scan(ev: &GreenEvaluator, defect: &DefectOperator, grid: &ComplexEnergyGrid) -> Vec<MapNode<f64>> {
    sigma_scan(&DefectProblem { ev, defect }, grid)
}

/// [`svd_scan`], optionally with the field rebuilt at `E = Re z` per column.
pub fn svd_scan_with(
    ev: &GreenEvaluator,
    defect: &DefectOperator,
    grid: &ComplexEnergyGrid,
    mode: TraceMode,
) -> Result<Vec<MapNode<f64>>> {
    if mode == TraceMode::FixedEnergy {
        return Ok(svd_scan(ev, defect, grid));
    }
    let im = grid.im_values();
    let columns = grid
        .re_values()
        .into_par_iter()
        .map(|x| {
            let local = ev.retarget(x)?;
            let problem = DefectProblem { ev: &local, defect };
            Ok(im
                .iter()
                .map(|&y| {
                    let z = Complex64::new(x, y);
                    MapNode {
                        z,
                        value: problem
                            .eval(z)
                            .ok()
                            .map(|a| singular_values(&a)[0].max(f64::MIN_POSITIVE).log10()),
                    }
                })
                .collect::<Vec<_>>())
        })
        .collect::<Vec<Result<Vec<_>>>>();
    let mut out = Vec::with_capacity(grid.len());
    for c in columns {
        out.extend(c?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ResonanceResult {
    pub z0: Complex64,
    /// Source vector on the support. Unit norm after refinement, rescaled by
    /// [`normalize_residue`].
    pub phi: CVector,
    pub sigma_min: f64,
    pub sigma_second: f64,
    pub newton_iters: usize,
    /// `|A(z0) phi| / |phi|`.
    pub residual: f64,
    /// `|dz|` per Newton iteration.
    pub steps: Vec<f64>,
    /// Factor applied to `phi` by [`normalize_residue`].
    pub residue_scale: Option<Complex64>,
    /// `psi = R0(z0) phi` on the support, set by [`normalize_residue`].
    pub psi: Option<CVector>,
    pub psi_samples: Option<BTreeMap<Dof, Complex64>>,
}

pub fn refine_resonance(
    ev: &GreenEvaluator,
    defect: &DefectOperator,
    z_init: Complex64,
) -> Result<ResonanceResult> {
    refine_resonance_with(ev, defect, z_init, &NewtonOptions::default())
}

pub fn refine_resonance_with(
    ev: &GreenEvaluator,
    defect: &DefectOperator,
    z_init: Complex64,
    opts: &NewtonOptions,
) -> Result<ResonanceResult> {
    let problem = DefectProblem { ev, defect };
    let out = newton_refine(&problem, z_init, opts)?;
    let a = problem.eval(out.z)?;
    let sv = smallest_singular(&a);
    let phi = &out.x / Complex64::from(out.x.norm());
    Ok(ResonanceResult {
        z0: out.z,
        residual: (&a * &phi).norm(),
        phi,
        sigma_min: sv.sigma_min,
        sigma_second: sv.sigma_second,
        newton_iters: out.iterations,
        steps: out.steps,
        residue_scale: None,
        psi: None,
        psi_samples: None,
    })
}

/// `<psi-bar| V R0'(z0) |phi>` with `psi = R0(z0) phi` (bilinear pairing).
pub fn residue_condition(
    ev: &GreenEvaluator,
    defect: &DefectOperator,
    z0: Complex64,
    phi: &CVector,
) -> Result<Complex64> {
    let (r0, dr0) = support_resolvent(ev, defect, z0, true)?;
    let psi = &r0 * phi;
    let rhs = defect.potential_matrix() * (dr0.expect("derivative requested") * phi);
    Ok(psi.transpose().dot(&rhs.transpose()))
}

/// Rescale `phi` so that `<psi-bar| V R0'(z0) |phi> = -1`; then
/// `R(z) ~ |psi><psi-bar| / (z - z0)` on the support.
///
/// The bilinear pairing is the residue only when `R0` is symmetric, so the
/// model and defect must be real.
pub fn normalize_residue(
    ev: &GreenEvaluator,
    defect: &DefectOperator,
    result: &ResonanceResult,
) -> Result<ResonanceResult> {
    ev.model().require_real()?;
    if !defect.is_real() {
        return Err(Error::InvalidDefect("residue normalization needs a real perturbation".into()));
    }
    let a = assemble_a(ev, defect, result.z0)?;
    let sv = smallest_singular(&a);
    if sv.sigma_second <= SIMPLICITY_THRESHOLD {
        return Err(Error::DegenerateResonance { second: sv.sigma_second });
    }
    let q = residue_condition(ev, defect, result.z0, &result.phi)?;
    if q == C_ZERO || !q.is_finite() {
        return Err(Error::SingularMatrix { z: result.z0 });
    }
    let mut s = (-C_ONE / q).sqrt();
    let lead = result
        .phi
        .iter()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .copied()
        .unwrap_or(C_ZERO);
    if (lead * s).re < 0.0 {
        s = -s;
    }
    let phi = &result.phi * s;
    let psi = defect_resolvent_block(ev, defect, result.z0)? * &phi;
    Ok(ResonanceResult {
        phi,
        psi: Some(psi),
        residue_scale: Some(s),
        ..result.clone()
    })
}

/// `R(z) = R0 (1 - V R0)^-1` on the support.
pub fn perturbed_resolvent_block(ev: &GreenEvaluator, defect: &DefectOperator, z: Complex64) -> Result<CMatrix> {
    let r0 = defect_resolvent_block(ev, defect, z)?;
    let n = r0.nrows();
    let a = CMatrix::identity(n, n) - defect.potential_matrix() * &r0;
    let inv = a.try_inverse().ok_or(Error::SingularMatrix { z })?;
    Ok(r0 * inv)
}

/// Perturbative width estimate `eps^2 R0(0, 0; Ed)` for a single extra site
/// coupled to one orbital, with the continuation retargeted at `Ed`.
/// The imaginary part approximates `Im z0`.
pub fn fermi_golden_rule(ev: &GreenEvaluator, defect: &DefectOperator) -> Result<Complex64> {
    let pattern = || Error::PatternMismatch("expected one extra site coupled to one orbital and no lattice entries".into());
    if !defect.lattice_entries.is_empty() || defect.extra_sites.len() != 1 {
        return Err(pattern());
    }
    let site = &defect.extra_sites[0];
    if site.couplings.len() != 1 {
        return Err(pattern());
    }
    let ((cell, orbital), eps) = site.couplings.iter().next().expect("one coupling");
    if cell.len() != ev.model().dim() || *orbital >= ev.model().n_orbitals() {
        return Err(Error::InvalidDefect("coupling does not fit the model".into()));
    }
    if *eps == C_ZERO {
        return Ok(C_ZERO);
    }
    let at_ed = ev.retarget(site.energy)?;
    let zero = vec![0; ev.model().dim()];
    let g = at_ed.green_blocks(Complex64::new(site.energy, 0.0), &[zero])?;
    Ok(g[0][(*orbital, *orbital)] * eps.norm_sqr())
}

/// `psi(R, i) = sum_s R0(R, R_s; z0)_{i, j_s} phi_s` for every orbital of the
/// window cells, plus the extra-site amplitudes `phi_d / (z0 - Ed)`.
pub fn resonant_state_samples(
    ev: &GreenEvaluator,
    defect: &DefectOperator,
    result: &ResonanceResult,
    window: &[Vec<i64>],
) -> Result<BTreeMap<Dof, Complex64>> {
    defect.check_against(ev.model().dim(), ev.model().n_orbitals())?;
    let m = ev.model().n_orbitals();
    let lat: Vec<_> = defect.lattice_dofs().collect();

    let mut displacements = Vec::new();
    let mut index = BTreeMap::new();
    for r in window {
        if r.len() != ev.model().dim() {
            return Err(Error::Mismatch(format!("window cell {r:?} has wrong dimension")));
        }
        for (_, rs, _) in &lat {
            let d = diff(r, rs);
            if !index.contains_key(&d) {
                index.insert(d.clone(), displacements.len());
                displacements.push(d);
            }
        }
    }
    let blocks = if displacements.is_empty() {
        Vec::new()
    } else {
        ev.green_blocks(result.z0, &displacements)?
    };

    let mut out = BTreeMap::new();
    for r in window {
        for i in 0..m {
            let mut acc = C_ZERO;
            for &(s, rs, j) in &lat {
                acc += blocks[index[&diff(r, rs)]][(i, j)] * result.phi[s];
            }
            out.insert(Dof::Lattice { cell: r.clone(), orbital: i }, acc);
        }
    }
    for (a, d) in defect.support.iter().enumerate() {
        if let Dof::Extra(e) = d {
            let w = result.z0 - defect.extra_sites[*e].energy;
            out.insert(d.clone(), result.phi[a] / w);
        }
    }
    Ok(out)
}
