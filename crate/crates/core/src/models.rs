//! Built-in systems: diatomic chain, graphene, single-band chain, flat band.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::lattice::TightBindingModel;
use crate::resonance::{DefectOperator, ExtraSite};
use crate::CMatrix;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A model, an optional defect and a short description of where the
/// parameters come from.
#[derive(Debug, Clone)]
pub struct NamedSystem {
    pub model: TightBindingModel,
    pub defect: Option<DefectOperator>,
    pub notes: String,
}

impl NamedSystem {
    pub fn new(model: TightBindingModel, defect: Option<DefectOperator>, notes: impl Into<String>) -> Self {
        Self {
            model,
            defect,
            notes: notes.into(),
        }
    }
}

/// Alternating chain `... a b a b ...` with site energies `Ea`, `Eb` and unit
/// hopping. Cell `n` holds `(a_n, b_n)`; `b_n` couples to `a_{n+1}`, so
///
/// ```text
/// H(k) = [[Ea, 1 + e^{-ik}], [1 + e^{ik}, Eb]],  k = 2 pi kappa.
/// ```
pub fn make_diatomic(ea: f64, eb: f64) -> TightBindingModel {
    let onsite = CMatrix::from_row_slice(2, 2, &[c(ea), c(1.0), c(1.0), c(eb)]);
    let mut right = CMatrix::zeros(2, 2);
    right[(1, 0)] = c(1.0);
    let left = right.adjoint();
    TightBindingModel::new(
        1,
        2,
        vec![(vec![0], onsite), (vec![1], right), (vec![-1], left)],
        vec![vec![1.0]],
    )
    .and_then(|m| m.with_labels(vec!["a".into(), "b".into()]))
    .and_then(|m| m.with_orbital_positions(vec![vec![0.0], vec![0.5]]))
    .expect("diatomic chain is a valid model")
}

/// Two intra-cell bonds `a_0-b_0` and `a_2-b_2` set to `eps`, isolating the
/// four-site block `b_0 a_1 b_1 a_2` when `eps = 0`. Entries are `eps - 1`.
pub fn make_diatomic_defect(eps: f64) -> DefectOperator {
    let dv = c(eps - 1.0);
    let mut entries = BTreeMap::new();
    for cell in [0i64, 2] {
        entries.insert((vec![cell], 0, vec![cell], 1), dv);
        entries.insert((vec![cell], 1, vec![cell], 0), dv);
    }
    DefectOperator::new(entries, Vec::new()).expect("diatomic defect is Hermitian")
}

/// Nearest-neighbour graphene with lattice vectors
/// `a1 = (sqrt3/2, 1/2)`, `a2 = (sqrt3/2, -1/2)` and
/// `H_AB(k) = -t (1 + e^{i k.a1} + e^{i k.a2})`.
pub fn make_graphene(t: f64) -> TightBindingModel {
    let ab = |v: f64| {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(v);
        m
    };
    let onsite = ab(-t) + ab(-t).adjoint();
    let h1 = ab(-t);
    let s3 = 3f64.sqrt() / 2.0;
    TightBindingModel::new(
        2,
        2,
        vec![
            (vec![0, 0], onsite),
            (vec![1, 0], h1.clone()),
            (vec![-1, 0], h1.adjoint()),
            (vec![0, 1], h1.clone()),
            (vec![0, -1], h1.adjoint()),
        ],
        vec![vec![s3, 0.5], vec![s3, -0.5]],
    )
    .and_then(|m| m.with_labels(vec!["A".into(), "B".into()]))
    .and_then(|m| m.with_orbital_positions(vec![vec![0.0, 0.0], vec![-1.0 / 3.0, -1.0 / 3.0]]))
    .expect("graphene is a valid model")
}

/// Adatom with site energy `ed` coupled by `eps` to orbital `attach` of cell 0
/// ("top" site).
pub fn make_adatom_defect(eps: f64, ed: f64, attach: usize, dim: usize) -> DefectOperator {
    let mut couplings = BTreeMap::new();
    couplings.insert((vec![0; dim], attach), c(eps));
    DefectOperator::new(BTreeMap::new(), vec![ExtraSite { energy: ed, couplings }])
        .expect("adatom defect is Hermitian")
}

/// One orbital per cell, unit hopping: `e(k) = 2 cos(2 pi kappa)`.
pub fn make_chain1band() -> TightBindingModel {
    let one = CMatrix::from_element(1, 1, c(1.0));
    TightBindingModel::new(
        1,
        1,
        vec![(vec![0], CMatrix::zeros(1, 1)), (vec![1], one.clone()), (vec![-1], one)],
        vec![vec![1.0]],
    )
    .expect("single-band chain is a valid model")
}

/// Dispersionless model with a single level `e0` per cell in `dim` dimensions.
pub fn make_flatband(e0: f64, dim: usize) -> TightBindingModel {
    let lattice = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    TightBindingModel::new(dim, 1, vec![(vec![0; dim], CMatrix::from_element(1, 1, c(e0)))], lattice)
        .expect("flat band is a valid model")
}

pub fn diatomic_system(ea: f64, eb: f64, eps: f64) -> NamedSystem {
    NamedSystem::new(
        make_diatomic(ea, eb),
        Some(make_diatomic_defect(eps)),
        format!("diatomic chain Ea={ea} Eb={eb}, bond defect eps={eps}"),
    )
}

pub fn graphene_adatom_system(t: f64, eps: f64, ed: f64) -> NamedSystem {
    NamedSystem::new(
        make_graphene(t),
        Some(make_adatom_defect(eps, ed, 0, 2)),
        format!("graphene t={t}, top-site adatom eps={eps} Ed={ed}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{band_eigens, bloch_matrix_real};
    use std::f64::consts::PI;

    fn hermitian_eigenvalues(m: CMatrix) -> Vec<f64> {
        let mut e: Vec<f64> = nalgebra::SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn diatomic_band_formula_sweep() {
        let (ea, eb) = (1.0, 0.0);
        let m = make_diatomic(ea, eb);
        for i in 0..1000 {
            let kr = -0.5 + i as f64 / 1000.0;
            let k = 2.0 * PI * kr;
            let root = ((ea - eb) * (ea - eb) / 4.0 + 4.0 * (k / 2.0).cos().powi(2)).sqrt();
            let b = band_eigens(&m, &[kr]);
            assert!((b.energies[0] - (0.5 * (ea + eb) - root)).abs() < 1e-12);
            assert!((b.energies[1] - (0.5 * (ea + eb) + root)).abs() < 1e-12);
        }
    }

    #[test]
    fn diatomic_spectrum_edges() {
        let m = make_diatomic(1.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut gap_lo, mut gap_hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..=400 {
            let b = band_eigens(&m, &[-0.5 + i as f64 / 400.0]);
            lo = lo.min(b.energies[0]);
            hi = hi.max(b.energies[1]);
            gap_lo = gap_lo.max(b.energies[0]);
            gap_hi = gap_hi.min(b.energies[1]);
        }
        assert!((lo - (0.5 - 4.25f64.sqrt())).abs() < 1e-12);
        assert!((hi - (0.5 + 4.25f64.sqrt())).abs() < 1e-12);
        assert!(gap_lo.abs() < 1e-12);
        assert!((gap_hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_diatomic_is_gapless() {
        let m = make_diatomic(0.0, 0.0);
        let b = band_eigens(&m, &[0.5]);
        assert!(b.energies[0].abs() < 1e-12 && b.energies[1].abs() < 1e-12);
    }

    #[test]
    fn diatomic_bloch_by_direct_summation() {
        // Independent assembly of sum_T e^{ikT} H0(0,T) at k = pi/3.
        let m = make_diatomic(1.0, 0.0);
        let k = PI / 3.0;
        let mut expected = CMatrix::zeros(2, 2);
        for (t, block) in m.hoppings() {
            expected += block * Complex64::new(0.0, k * t[0] as f64).exp();
        }
        let got = bloch_matrix_real(&m, &[k / (2.0 * PI)]).value;
        assert!((got - expected).norm() < 1e-14);
    }

    #[test]
    fn decoupled_block_eigenvalues() {
        // b0 a1 b1 a2 with unit hopping.
        let block = CMatrix::from_row_slice(
            4,
            4,
            &[
                c(0.0), c(1.0), c(0.0), c(0.0),
                c(1.0), c(1.0), c(1.0), c(0.0),
                c(0.0), c(1.0), c(0.0), c(1.0),
                c(0.0), c(0.0), c(1.0), c(1.0),
            ],
        );
        let e = hermitian_eigenvalues(block);
        let quoted = [-1.19, -0.29, 1.29, 2.19];
        for (a, b) in e.iter().zip(quoted) {
            assert!((a - b).abs() < 0.005, "{e:?}");
        }
    }

    #[test]
    fn unit_bond_defect_vanishes() {
        let d = make_diatomic_defect(1.0);
        assert!(d.potential_matrix().norm() == 0.0);
        assert_eq!(d.support().len(), 4);
    }

    #[test]
    fn graphene_bandwidth_and_chiral_pairs() {
        let g = make_graphene(1.0);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..30 {
            for j in 0..30 {
                let k = [i as f64 / 30.0 - 0.5, j as f64 / 30.0 - 0.5];
                let b = band_eigens(&g, &k);
                assert!((b.energies[0] + b.energies[1]).abs() < 1e-12);
                lo = lo.min(b.energies[0]);
                hi = hi.max(b.energies[1]);
            }
        }
        assert!((lo + 3.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        // Saddle point M = (1/2, 0) sits at |E| = t.
        let m = band_eigens(&g, &[0.5, 0.0]);
        assert!((m.energies[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_models_are_real() {
        for m in [make_diatomic(1.0, 0.0), make_graphene(1.0), make_chain1band(), make_flatband(0.5, 2)] {
            assert!(m.is_real());
        }
    }

    #[test]
    fn graphene_neighbours_equidistant() {
        let g = make_graphene(1.0);
        let a = g.cartesian_position(&[0, 0], 0);
        let dist = |cell: &[i64]| {
            let b = g.cartesian_position(cell, 1);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        };
        let d0 = dist(&[0, 0]);
        assert!((d0 - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((dist(&[1, 0]) - d0).abs() < 1e-12);
        assert!((dist(&[0, 1]) - d0).abs() < 1e-12);
    }

    #[test]
    fn adatom_support() {
        let d = make_adatom_defect(0.4, 2.0, 0, 2);
        assert_eq!(d.support().len(), 2);
        let v = d.potential_matrix();
        assert_eq!(v[(0, 1)], c(0.4));
        assert_eq!(v[(1, 0)], c(0.4));
    }
}
