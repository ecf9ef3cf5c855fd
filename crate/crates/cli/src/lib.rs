//! Front end for `bcd-core`. Every subcommand reads a [`RunConfig`], applies
//! flag overrides, writes CSV files into the output directory and records
//! the effective configuration in `<command>.manifest.toml`.
//!
//! Flags can also be given through environment variables with the `BCD_`
//! prefix, e.g. `BCD_NK=35` or `BCD_SEED_Z="2-0.1i;2.1-0.05i"`.

pub mod commands;
pub mod config;
mod output;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

pub use config::{DefectSpec, ModelSpec, RunConfig, Window};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or inputs.
    Config(String),
    Core(bcd_core::Error),
    Io(String),
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Core(e) => e.name(),
            CliError::Io(_) => "Io",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<bcd_core::Error> for CliError {
    fn from(e: bcd_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "bcd", version, about = "Brillouin-zone deformation: continued Green functions and resonances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band energies along a path through the zone.
    Bands,
    /// Tr R0(0,0;z) per cell over a complex-energy window.
    Greenmap,
    /// Density of states, deformation method next to Gaussian smearing.
    Dos,
    /// log10 of the smallest singular value of 1 - V R0(z) over a window.
    Scan,
    /// Newton refinement of resonances from the given seeds.
    Refine,
    /// Free-Laplacian resonances: integral equation plus complex scaling.
    Free1d,
    /// Check the deformation parameters against the rules of thumb.
    Validate {
        /// Largest |R - R'| that will be evaluated.
        #[arg(long, default_value_t = 5.0)]
        rmax: f64,
        /// Largest |Im z| below the axis the continuation must reach.
        #[arg(long, default_value_t = 0.1)]
        depth: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Greenmap => "greenmap",
            Command::Dos => "dos",
            Command::Scan => "scan",
            Command::Refine => "refine",
            Command::Free1d => "free1d",
            Command::Validate { .. } => "validate",
        }
    }
}

/// Flags that override the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "BCD_CONFIG")]
    pub config: Option<PathBuf>,
    /// diatomic | graphene | chain1band | flatband | path/to/model.toml
    #[arg(long, global = true, env = "BCD_MODEL")]
    pub model: Option<String>,
    /// diatomic-bond | adatom | path/to/defect.toml
    #[arg(long, global = true, env = "BCD_DEFECT")]
    pub defect: Option<String>,
    /// Target energy of the deformation.
    #[arg(long, global = true, env = "BCD_ENERGY", allow_hyphen_values = true)]
    pub energy: Option<f64>,
    /// Retarget the deformation at Re z for every map column.
    #[arg(long, global = true, env = "BCD_ADAPTIVE")]
    pub adaptive: bool,
    #[arg(long, global = true, env = "BCD_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, global = true, env = "BCD_DELTA_E")]
    pub delta_e: Option<f64>,
    /// Grid points per reciprocal axis.
    #[arg(long, global = true, env = "BCD_NK")]
    pub nk: Option<usize>,
    /// re_min,re_max,im_min,im_max
    #[arg(long, global = true, env = "BCD_WINDOW", allow_hyphen_values = true)]
    pub window: Option<String>,
    /// n_re x n_im, e.g. 81x41
    #[arg(long, global = true, env = "BCD_RESOLUTION")]
    pub resolution: Option<String>,
    /// Newton seed such as 2-0.1i; repeatable.
    #[arg(long = "seed-z", global = true, env = "BCD_SEED_Z", value_delimiter = ';', allow_hyphen_values = true)]
    pub seed_z: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, env = "BCD_OUT")]
    pub out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true, env = "BCD_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, global = true, env = "BCD_ETA")]
    pub eta: Option<f64>,
    #[arg(long, global = true, env = "BCD_BOX_LENGTH")]
    pub box_length: Option<f64>,
    #[arg(long, global = true, env = "BCD_STEP")]
    pub step: Option<f64>,
    #[arg(long, global = true, env = "BCD_THETA")]
    pub theta: Option<f64>,
}

fn parse_resolution(s: &str) -> Result<[usize; 2], CliError> {
    let err = || CliError::Config(format!("resolution '{s}' should look like 81x41"));
    let (a, b) = s.split_once(['x', 'X', ',']).ok_or_else(err)?;
    Ok([a.trim().parse().map_err(|_| err())?, b.trim().parse().map_err(|_| err())?])
}

pub fn parse_complex(s: &str) -> Result<Complex64, CliError> {
    Complex64::from_str(s.trim()).map_err(|_| CliError::Config(format!("'{s}' is not a complex number")))
}

impl Overrides {
    /// Loads the config file (or defaults) and applies every flag that was set.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(m) = &self.model {
            let spec = ModelSpec::from_flag(m)?;
            // Same built-in name keeps the parameters from the file.
            if spec.label() != cfg.model.label() || matches!(spec, ModelSpec::File { .. }) {
                cfg.model = spec;
            }
        }
        if let Some(d) = &self.defect {
            cfg.defect = Some(DefectSpec::from_flag(d)?);
        }
        let d = &mut cfg.deformation;
        if self.energy.is_some() {
            d.energy = self.energy;
        }
        d.adaptive |= self.adaptive;
        if let Some(a) = self.alpha {
            d.alpha = a;
        }
        if let Some(e) = self.delta_e {
            d.delta_e = e;
        }
        if let Some(n) = self.nk {
            cfg.nk = n;
        }
        if let Some(w) = &self.window {
            cfg.window = Some(Window::parse(w)?);
        }
        if let Some(r) = &self.resolution {
            cfg.resolution = parse_resolution(r)?;
        }
        if !self.seed_z.is_empty() {
            cfg.seeds = self
                .seed_z
                .iter()
                .map(|s| parse_complex(s).map(|z| [z.re, z.im]))
                .collect::<Result<_, _>>()?;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if let Some(e) = self.eta {
            cfg.dos.eta = e;
        }
        if let Some(l) = self.box_length {
            cfg.free1d.box_length = l;
        }
        if let Some(h) = self.step {
            cfg.free1d.step = h;
        }
        if let Some(t) = self.theta {
            cfg.free1d.theta = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Resolves the configuration and runs one subcommand inside a thread pool
/// sized by `workers`. Returns the paths written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = cli.overrides.resolve()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| commands::dispatch(&cli.command, &cfg))
}
