//! TOML descriptions of models and defects.
//!
//! ```toml
//! dimension = 1
//! orbitals = 2
//! lattice_vectors = [[1.0]]
//! labels = ["a", "b"]
//!
//! [[hopping]]
//! translation = [0]
//! matrix_re = [[1.0, 1.0], [1.0, 0.0]]
//!
//! [[hopping]]
//! translation = [1]
//! matrix_re = [[0.0, 0.0], [1.0, 0.0]]
//! ```
//!
//! `matrix_im` is optional. Every hopping needs its Hermitian partner.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::TightBindingModel;
use crate::resonance::{DefectOperator, ExtraSite, LatticeEntries};
use crate::CMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingRecord {
    pub translation: Vec<i64>,
    pub matrix_re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dimension: usize,
    pub orbitals: usize,
    pub lattice_vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Vec<f64>>>,
    pub hopping: Vec<HoppingRecord>,
}

fn matrix_from_rows(re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>, n: usize) -> Result<CMatrix> {
    let bad = || Error::InvalidModel(format!("hopping matrix must be {n}x{n}"));
    if re.len() != n || re.iter().any(|r| r.len() != n) {
        return Err(bad());
    }
    if let Some(im) = im {
        if im.len() != n || im.iter().any(|r| r.len() != n) {
            return Err(bad());
        }
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))
    }))
}

impl ModelFile {
    pub fn build(&self) -> Result<TightBindingModel> {
        let hoppings = self
            .hopping
            .iter()
            .map(|h| Ok((h.translation.clone(), matrix_from_rows(&h.matrix_re, h.matrix_im.as_ref(), self.orbitals)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut model = TightBindingModel::new(self.dimension, self.orbitals, hoppings, self.lattice_vectors.clone())?;
        if let Some(labels) = &self.labels {
            model = model.with_labels(labels.clone())?;
        }
        if let Some(pos) = &self.positions {
            model = model.with_orbital_positions(pos.clone())?;
        }
        Ok(model)
    }

    pub fn from_model(model: &TightBindingModel) -> Self {
        let n = model.n_orbitals();
        let hopping = model
            .hoppings()
            .iter()
            .map(|(t, m)| {
                let re = (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect();
                let im: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect();
                let has_im = im.iter().flatten().any(|&x| x != 0.0);
                HoppingRecord {
                    translation: t.clone(),
                    matrix_re: re,
                    matrix_im: has_im.then_some(im),
                }
            })
            .collect();
        Self {
            dimension: model.dim(),
            orbitals: n,
            lattice_vectors: model.lattice_vectors().to_vec(),
            labels: Some(model.labels().to_vec()),
            positions: Some(model.orbital_positions().to_vec()),
            hopping,
        }
    }
}

pub fn parse_model(text: &str) -> Result<TightBindingModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.build()
}

pub fn model_to_toml(model: &TightBindingModel) -> Result<String> {
    toml::to_string(&ModelFile::from_model(model)).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_model(path: &Path) -> Result<TightBindingModel> {
    parse_model(&std::fs::read_to_string(path)?)
}

/// ```toml
/// [[entry]]
/// cell = [0]
/// orbital = 0
/// to_cell = [0]
/// to_orbital = 1
/// re = -0.8
///
/// [[extra]]
/// energy = 2.0
/// [[extra.coupling]]
/// cell = [0, 0]
/// orbital = 0
/// re = 0.4
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DefectFile {
    #[serde(default)]
    pub entry: Vec<EntryRecord>,
    #[serde(default)]
    pub extra: Vec<ExtraRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryRecord {
    pub cell: Vec<i64>,
    pub orbital: usize,
    pub to_cell: Vec<i64>,
    pub to_orbital: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraRecord {
    pub energy: f64,
    #[serde(default)]
    pub coupling: Vec<CouplingRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingRecord {
    pub cell: Vec<i64>,
    pub orbital: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl DefectFile {
    pub fn build(&self) -> Result<DefectOperator> {
        let mut entries = LatticeEntries::new();
        for e in &self.entry {
            *entries
                .entry((e.cell.clone(), e.orbital, e.to_cell.clone(), e.to_orbital))
                .or_insert(Complex64::new(0.0, 0.0)) += Complex64::new(e.re, e.im);
        }
        let extras = self
            .extra
            .iter()
            .map(|x| {
                let mut couplings = BTreeMap::new();
                for c in &x.coupling {
                    *couplings
                        .entry((c.cell.clone(), c.orbital))
                        .or_insert(Complex64::new(0.0, 0.0)) += Complex64::new(c.re, c.im);
                }
                ExtraSite {
                    energy: x.energy,
                    couplings,
                }
            })
            .collect();
        DefectOperator::new(entries, extras)
    }
}

pub fn parse_defect(text: &str) -> Result<DefectOperator> {
    let file: DefectFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.build()
}

pub fn read_defect(path: &Path) -> Result<DefectOperator> {
    parse_defect(&std::fs::read_to_string(path)?)
}
