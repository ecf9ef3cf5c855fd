mod common;

use bcd_core::resonance::LatticeEntries;
use bcd_core::{models, refine_resonance, DefectOperator, DeformationParams, GreenEvaluator};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EMBEDDED: [f64; 4] = [-1.19, -0.29, 1.29, 2.19];

fn evaluator(energy: f64, n: usize) -> GreenEvaluator {
    let params = DeformationParams::new(energy, 0.3, 0.5).unwrap();
    GreenEvaluator::deformed(models::make_diatomic(1.0, 0.0), params, n).unwrap()
}

fn central_potential(defect: &DefectOperator) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(common::CENTRAL_SITES, common::CENTRAL_SITES);
    for ((r, i, rp, j), val) in defect.lattice_entries() {
        v[(common::site(r[0], *i), common::site(rp[0], *j))] += val.re;
    }
    v
}

#[test]
fn oracle_reproduces_bound_state_limit() {
    // eps = 0: the central block decouples and the leads see a severed chain.
    let d = models::make_diatomic_defect(0.0);
    let v = central_potential(&d);
    let z = common::oracle_resonance(Complex64::new(1.29, 0.0), 1.0, 0.0, &v);
    assert!(z.im.abs() < 1e-10);
    assert!((z.re - 1.29).abs() < 0.01);
}

#[test]
fn oracle_surface_function_is_retarded_above_axis() {
    let g = common::surface_green(Complex64::new(1.5, 0.3), 1.0, 0.0);
    assert!(g.im < 0.0);
}

#[test]
fn diatomic_resonances_match_oracle() {
    let d = models::make_diatomic_defect(0.2);
    let v = central_potential(&d);
    for e in EMBEDDED {
        let r = refine_resonance(&evaluator(e, 200), &d, Complex64::new(e, 0.0)).unwrap();
        let oracle = common::oracle_resonance(r.z0, 1.0, 0.0, &v);
        assert!((r.z0 - oracle).norm() < 1e-6, "{} vs {}", r.z0, oracle);
        assert!(r.z0.im < 0.0);
    }
}

#[test]
fn random_defects_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..10 {
        let mut entries = LatticeEntries::new();
        for cell in [0i64, 2] {
            let dv = Complex64::new(0.2 - 1.0 + rng.random_range(-0.1..0.1), 0.0);
            entries.insert((vec![cell], 0, vec![cell], 1), dv);
            entries.insert((vec![cell], 1, vec![cell], 0), dv);
        }
        // A few extra real symmetric entries inside the six central sites.
        for _ in 0..3 {
            let (c1, o1) = (rng.random_range(0..=2i64), rng.random_range(0..2usize));
            let (c2, o2) = (rng.random_range(0..=2i64), rng.random_range(0..2usize));
            let x = Complex64::new(rng.random_range(-0.05..0.05), 0.0);
            *entries.entry((vec![c1], o1, vec![c2], o2)).or_default() += x;
            if (c1, o1) != (c2, o2) {
                *entries.entry((vec![c2], o2, vec![c1], o1)).or_default() += x;
            }
        }
        let d = DefectOperator::new(entries, vec![]).unwrap();
        assert!(d.support().len() <= 6);
        let v = central_potential(&d);
        let e = EMBEDDED[case % 4];
        let r = refine_resonance(&evaluator(e, 200), &d, Complex64::new(e, 0.0)).unwrap();
        let oracle = common::oracle_resonance(r.z0, 1.0, 0.0, &v);
        assert!((r.z0 - oracle).norm() < 1e-6, "case {case}: {} vs {}", r.z0, oracle);
    }
}

#[test]
fn widths_shrink_as_coupling_vanishes() {
    for e in EMBEDDED {
        let ev = evaluator(e, 200);
        let mut last = f64::INFINITY;
        let mut seed = Complex64::new(e, 0.0);
        for eps in [0.2, 0.1, 0.05] {
            let r = refine_resonance(&ev, &models::make_diatomic_defect(eps), seed).unwrap();
            assert!(r.z0.im < 0.0 && r.z0.im.abs() < last, "eps {eps}: {}", r.z0);
            last = r.z0.im.abs();
            seed = r.z0;
        }
    }
}

#[test]
fn newton_converges_quadratically() {
    let d = models::make_diatomic_defect(0.2);
    let r = refine_resonance(&evaluator(1.29, 200), &d, Complex64::new(1.29, 0.0)).unwrap();
    let s: Vec<f64> = r.steps.iter().copied().filter(|&x| x < 1e-4 && x > 1e-14).collect();
    for w in s.windows(2) {
        assert!(w[1] <= 10.0 * w[0] * w[0], "{:?}", r.steps);
    }
}
