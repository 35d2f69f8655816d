//! Run manifests: one JSON file per experiment, overridable from the
//! command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ttnprep_core::fourier::GridSpec;
use ttnprep_core::gaussian::{make_covariance, CovarianceMatrix, GeneratorSpec};
use ttnprep_core::pipeline::{PipelineOptions, QftMode, StructurePolicy, EXHAUSTIVE_MAX_DIM};

use crate::error::{CliError, Result};
use crate::formats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    Uniform {
        rho: f64,
    },
    Chain {
        rho: f64,
    },
    RandomTree {
        sigma: f64,
    },
    ExpDecayChain {
        sigma_max: f64,
    },
    Random {
        sigma_max: f64,
    },
    Stacked {
        rank: usize,
        sigma_max: f64,
    },
    /// Covariance JSON file; the seed is ignored.
    File {
        path: PathBuf,
    },
}

impl GeneratorConfig {
    pub fn sigma_max(&self) -> Option<f64> {
        match *self {
            GeneratorConfig::ExpDecayChain { sigma_max }
            | GeneratorConfig::Random { sigma_max }
            | GeneratorConfig::Stacked { sigma_max, .. } => Some(sigma_max),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    QftTtn,
    QftGates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Fixed,
    AutoOptimize,
    ExhaustiveOptimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub generator: GeneratorConfig,
    pub dim: usize,
    pub n: usize,
    pub a: f64,
    pub m: usize,
    pub chi: usize,
    pub chi_prime: usize,
    pub tci_sweeps: usize,
    pub tci_tol: f64,
    pub opt_sweeps: usize,
    pub mode: Mode,
    pub policy: Policy,
    /// Variable order of the fixed path; natural order when absent.
    pub order: Option<Vec<usize>>,
    pub seeds: Vec<u64>,
    /// Target accuracy for `analyze`.
    pub epsilon: f64,
    /// Bond dimensions compared by `structure-trial`.
    pub chis: Vec<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            generator: GeneratorConfig::Random { sigma_max: 0.2 },
            dim: 4,
            n: 8,
            a: 20.0,
            m: 5,
            chi: 8,
            chi_prime: 64,
            tci_sweeps: 8,
            tci_tol: 1e-10,
            opt_sweeps: 20,
            mode: Mode::QftGates,
            policy: Policy::Fixed,
            order: None,
            seeds: (0..20).collect(),
            epsilon: 1e-3,
            chis: vec![8, 16, 32],
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        self.grid()?;
        if self.chi == 0 || self.chi_prime == 0 {
            return bad("chi and chi_prime must be positive");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if self.chis.contains(&0) {
            return bad("chis must be positive");
        }
        if self.policy == Policy::ExhaustiveOptimal && self.dim > EXHAUSTIVE_MAX_DIM {
            return bad("exhaustive-optimal is limited to dim <= 6");
        }
        if let Some(order) = &self.order {
            let mut s = order.clone();
            s.sort_unstable();
            if s != (0..self.dim).collect::<Vec<_>>() {
                return bad("order must be a permutation of 0..dim");
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, self.n, self.a, self.m).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn covariance(&self, seed: u64) -> Result<CovarianceMatrix> {
        let spec = match &self.generator {
            GeneratorConfig::File { path } => {
                let sigma = formats::read_covariance(path)?;
                if sigma.dim() != self.dim {
                    return Err(CliError::Config(format!(
                        "covariance file has dim {}, config {}",
                        sigma.dim(),
                        self.dim
                    )));
                }
                return Ok(sigma);
            }
            GeneratorConfig::Uniform { rho } => GeneratorSpec::Uniform { rho: *rho },
            GeneratorConfig::Chain { rho } => GeneratorSpec::Chain { rho: *rho },
            GeneratorConfig::RandomTree { sigma } => GeneratorSpec::RandomTree { sigma: *sigma },
            GeneratorConfig::ExpDecayChain { sigma_max } => GeneratorSpec::ExpDecayChain { sigma_max: *sigma_max },
            GeneratorConfig::Random { sigma_max } => GeneratorSpec::Random { sigma_max: *sigma_max },
            GeneratorConfig::Stacked { rank, sigma_max } => {
                GeneratorSpec::Stacked { rank: *rank, sigma_max: *sigma_max }
            }
        };
        Ok(make_covariance(&spec, self.dim, seed)?)
    }

    pub fn path_order(&self) -> Vec<usize> {
        self.order.clone().unwrap_or_else(|| (0..self.dim).collect())
    }

    pub fn pipeline(&self, seed: u64) -> PipelineOptions {
        let mut o = PipelineOptions::new(self.chi);
        o.chi_prime = self.chi_prime;
        o.tci_sweeps = self.tci_sweeps;
        o.tci_tol = self.tci_tol;
        o.opt_sweeps = self.opt_sweeps;
        o.seed = seed;
        o.mode = match self.mode {
            Mode::QftTtn => QftMode::QftTtn,
            Mode::QftGates => QftMode::QftGates,
        };
        o.policy = match self.policy {
            Policy::Fixed => StructurePolicy::Fixed(self.path_order()),
            Policy::AutoOptimize => StructurePolicy::AutoOptimize,
            Policy::ExhaustiveOptimal => StructurePolicy::ExhaustiveOptimal,
        };
        o
    }
}
