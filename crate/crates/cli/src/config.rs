//! Run configuration: one TOML file per run, overridden by flags.

use std::path::{Path, PathBuf};

use bcd_core::{models, DefectOperator, DeformationParams, TightBindingModel};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Diatomic {
        #[serde(default = "one")]
        ea: f64,
        #[serde(default)]
        eb: f64,
    },
    Graphene {
        #[serde(default = "one")]
        t: f64,
    },
    Chain1band,
    Flatband {
        #[serde(default)]
        e0: f64,
        #[serde(default = "one_usize")]
        dim: usize,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Diatomic { ea: 1.0, eb: 0.0 }
    }
}

impl ModelSpec {
    /// A built-in name with default parameters, or a path to a model file.
    pub fn from_flag(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "diatomic" => ModelSpec::default(),
            "graphene" => ModelSpec::Graphene { t: 1.0 },
            "chain1band" => ModelSpec::Chain1band,
            "flatband" => ModelSpec::Flatband { e0: 0.0, dim: 1 },
            _ if s.ends_with(".toml") => ModelSpec::File { path: s.into() },
            _ => return Err(CliError::Config(format!("unknown model '{s}'"))),
        })
    }

    pub fn label(&self) -> &str {
        match self {
            ModelSpec::Diatomic { .. } => "diatomic",
            ModelSpec::Graphene { .. } => "graphene",
            ModelSpec::Chain1band => "chain1band",
            ModelSpec::Flatband { .. } => "flatband",
            ModelSpec::File { .. } => "file",
        }
    }

    pub fn build(&self) -> Result<TightBindingModel, CliError> {
        Ok(match self {
            ModelSpec::Diatomic { ea, eb } => models::make_diatomic(*ea, *eb),
            ModelSpec::Graphene { t } => models::make_graphene(*t),
            ModelSpec::Chain1band => models::make_chain1band(),
            ModelSpec::Flatband { e0, dim } => {
                if !(1..=3).contains(dim) {
                    return Err(CliError::Config(format!("flatband dimension {dim} not in 1..=3")));
                }
                models::make_flatband(*e0, *dim)
            }
            ModelSpec::File { path } => bcd_core::io::read_model(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DefectSpec {
    /// The two weakened bonds of the diatomic chain.
    DiatomicBond { eps: f64 },
    Adatom {
        eps: f64,
        ed: f64,
        #[serde(default)]
        orbital: usize,
    },
    File { path: PathBuf },
}

impl DefectSpec {
    pub fn from_flag(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "diatomic-bond" => DefectSpec::DiatomicBond { eps: 0.2 },
            "adatom" => DefectSpec::Adatom {
                eps: 0.4,
                ed: 2.0,
                orbital: 0,
            },
            _ if s.ends_with(".toml") => DefectSpec::File { path: s.into() },
            _ => return Err(CliError::Config(format!("unknown defect '{s}'"))),
        })
    }

    pub fn build(&self, model: &TightBindingModel) -> Result<DefectOperator, CliError> {
        let d = match self {
            DefectSpec::DiatomicBond { eps } => models::make_diatomic_defect(*eps),
            DefectSpec::Adatom { eps, ed, orbital } => models::make_adatom_defect(*eps, *ed, *orbital, model.dim()),
            DefectSpec::File { path } => bcd_core::io::read_defect(path)?,
        };
        d.check_against(model.dim(), model.n_orbitals())?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeformationSpec {
    /// Target energy; `None` means no deformation unless `adaptive`.
    pub energy: Option<f64>,
    /// Retarget the deformation at `Re z` for every column of a map.
    pub adaptive: bool,
    pub alpha: f64,
    pub delta_e: f64,
}

impl Default for DeformationSpec {
    fn default() -> Self {
        Self {
            energy: None,
            adaptive: false,
            alpha: 0.3,
            delta_e: 0.5,
        }
    }
}

impl DeformationSpec {
    pub fn params(&self, energy: f64) -> Result<DeformationParams, CliError> {
        Ok(DeformationParams::new(energy, self.alpha, self.delta_e)?)
    }
}

/// `[re_min, re_max, im_min, im_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window(pub [f64; 4]);

impl Window {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let v: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("window '{s}': {e}")))?;
        let arr: [f64; 4] = v
            .try_into()
            .map_err(|_| CliError::Config(format!("window '{s}' needs re_min,re_max,im_min,im_max")))?;
        Ok(Window(arr))
    }

    pub fn re(&self) -> (f64, f64) {
        (self.0[0], self.0[1])
    }

    pub fn im(&self) -> (f64, f64) {
        (self.0[2], self.0[3])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DosSpec {
    /// `[e_min, e_max]`.
    pub energies: [f64; 2],
    pub count: usize,
    /// Smearing width for the comparison curve.
    pub eta: f64,
}

impl Default for DosSpec {
    fn default() -> Self {
        Self {
            energies: [-3.5, 3.5],
            count: 141,
            eta: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandsSpec {
    /// Corner points of the path in reduced coordinates; empty selects a
    /// default for the model dimension.
    pub path: Vec<Vec<f64>>,
    pub points_per_segment: usize,
}

impl Default for BandsSpec {
    fn default() -> Self {
        Self {
            path: Vec::new(),
            points_per_segment: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Free1dSpec {
    pub potential: String,
    pub box_length: f64,
    /// Second box length used to tell physical zeros from box artefacts.
    pub check_length: f64,
    pub step: f64,
    /// Rotation angle for the complex-scaling cross-check.
    pub theta: f64,
}

impl Default for Free1dSpec {
    fn default() -> Self {
        Self {
            potential: "double-well".into(),
            box_length: 10.0,
            check_length: 20.0,
            step: 0.05,
            theta: std::f64::consts::PI / 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub defect: Option<DefectSpec>,
    pub deformation: DeformationSpec,
    pub nk: usize,
    pub window: Option<Window>,
    /// `[n_re, n_im]` nodes of scan and map grids.
    pub resolution: [usize; 2],
    /// Newton seeds as `[re, im]`.
    pub seeds: Vec<[f64; 2]>,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub dos: DosSpec,
    pub bands: BandsSpec,
    pub free1d: Free1dSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            defect: None,
            deformation: DeformationSpec::default(),
            nk: 50,
            window: None,
            resolution: [81, 41],
            seeds: Vec::new(),
            out: PathBuf::from("bcd-out"),
            workers: None,
            dos: DosSpec::default(),
            bands: BandsSpec::default(),
            free1d: Free1dSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // Relative model/defect paths are taken from the config's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        if let ModelSpec::File { path } = &mut cfg.model {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(DefectSpec::File { path }) = &mut cfg.defect {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        Ok(cfg)
    }

    pub fn seeds_complex(&self) -> Vec<Complex64> {
        self.seeds.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.nk < 2 {
            return bad(format!("nk = {} must be at least 2", self.nk));
        }
        if self.resolution.iter().any(|&n| n < 2) {
            return bad(format!("resolution {:?} needs at least 2 nodes per axis", self.resolution));
        }
        let d = &self.deformation;
        let mut finite = vec![d.alpha, d.delta_e, self.dos.eta, self.free1d.box_length, self.free1d.step, self.free1d.theta];
        finite.extend(d.energy);
        finite.extend(self.window.iter().flat_map(|w| w.0));
        finite.extend(self.seeds.iter().flatten());
        finite.extend(self.dos.energies);
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("non-finite numeric field".into());
        }
        if let ModelSpec::File { path } = &self.model {
            if !path.exists() {
                return bad(format!("model file {} does not exist", path.display()));
            }
        }
        if let Some(DefectSpec::File { path }) = &self.defect {
            if !path.exists() {
                return bad(format!("defect file {} does not exist", path.display()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cfg = RunConfig {
            model: ModelSpec::Graphene { t: 1.0 },
            defect: Some(DefectSpec::Adatom {
                eps: 0.4,
                ed: 2.0,
                orbital: 0,
            }),
            deformation: DeformationSpec {
                energy: Some(2.0),
                adaptive: false,
                alpha: 0.4,
                delta_e: 0.5,
            },
            nk: 35,
            window: Some(Window([1.5, 2.5, -0.2, 0.05])),
            seeds: vec![[2.0, -0.1]],
            workers: Some(2),
            ..RunConfig::default()
        };
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::parse(&back.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg = RunConfig::parse("nk = 9\n[model]\nname = \"graphene\"\n").unwrap();
        assert_eq!(cfg.model, ModelSpec::Graphene { t: 1.0 });
        assert_eq!(cfg.deformation, DeformationSpec::default());
    }

    #[test]
    fn rejects_unknown_keys_and_small_grids() {
        assert!(RunConfig::parse("nk = 9\nbogus = 1\n").is_err());
        let cfg = RunConfig::parse("nk = 1\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn window_flag() {
        assert_eq!(Window::parse("0,1, -1 ,0.5").unwrap(), Window([0.0, 1.0, -1.0, 0.5]));
        assert!(Window::parse("0,1,2").is_err());
    }
}
