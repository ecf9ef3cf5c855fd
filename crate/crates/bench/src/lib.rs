//! Fixtures shared by the benchmarks.

use bcd_core::{models, DefectOperator, DeformationParams, GreenEvaluator};

/// Deformed graphene evaluator and top-site adatom at the reference
/// parameters (`E = 2`, `alpha = 0.4`, `dE = 0.5`).
pub fn graphene_adatom(n: usize) -> (GreenEvaluator, DefectOperator) {
    let params = DeformationParams::new(2.0, 0.4, 0.5).expect("valid parameters");
    let ev = GreenEvaluator::deformed(models::make_graphene(1.0), params, n).expect("graphene deforms");
    (ev, models::make_adatom_defect(0.4, 2.0, 0, 2))
}

pub fn diatomic(n: usize, energy: f64) -> GreenEvaluator {
    let params = DeformationParams::new(energy, 0.3, 0.5).expect("valid parameters");
    GreenEvaluator::deformed(models::make_diatomic(1.0, 0.0), params, n).expect("diatomic deforms")
}
