//! Analytic continuation of periodic tight-binding Green functions by complex
//! deformation of the Brillouin zone, and defect resonances located through
//! the integral equation `phi = V R0(z) phi`.
//!
//! ```
//! use bcd_core::{models, DeformationParams, GreenEvaluator};
//! use num_complex::Complex64;
//!
//! let params = DeformationParams::new(1.8, 0.3, 0.5).unwrap();
//! let ev = GreenEvaluator::deformed(models::make_diatomic(1.0, 0.0), params, 50).unwrap();
//! // Below the real axis, inside the band [1, 2.56].
//! let g = ev.trace(Complex64::new(1.8, -0.05)).unwrap();
//! assert!(g.re.is_finite() && g.im.is_finite());
//! ```

use num_complex::Complex64;

pub mod bcd;
pub mod error;
pub mod free1d;
pub mod greens;
pub mod io;
pub mod lattice;
pub mod models;
pub mod nep;
pub mod resonance;

pub type CMatrix = nalgebra::DMatrix<Complex64>;

pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub use bcd::{
    build_deformation, validate_parameters, DeformationField, DeformationParams, JacobianScheme, ValidationReport,
};
pub use error::{Error, Result, Warning};
pub use greens::{trace_map, ComplexEnergyGrid, GreenEvaluator, MapNode, TraceMode};
pub use lattice::{band_eigens, bloch_matrix, KGrid, TightBindingModel};
pub use nep::{AnalyticMatrix, CVector, NewtonOptions};
pub use resonance::{
    assemble_a, defect_resolvent_block, fermi_golden_rule, normalize_residue, refine_resonance,
    resonant_state_samples, svd_scan, svd_scan_with, DefectOperator, Dof, ExtraSite, ResonanceResult,
};
