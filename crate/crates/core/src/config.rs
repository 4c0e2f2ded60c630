//! Run configuration file (TOML).
//!
//! ```toml
//! seed = 42
//! d = 1
//! delta = 0.0
//!
//! [lattice]
//! dims = [2]
//!
//! [kernel]                 # kronecker | gaussian | rectangular | table
//! kind = "table"
//! values = { "0" = 1.0, "1" = 0.5, "-1" = 0.5 }
//!
//! [fit]
//! restarts = 20
//! max_iter = 200
//! rel_tol = 1e-10
//! init = "subsample"       # or "plusplus"
//!
//! [quasi]
//! beta = "sqrt"            # or { beta = "linear", c = 1.0 } / "constant"
//!
//! [sampler]
//! kind = "uniform"         # or "mixture" with components = [{ weight, mean, sigma }]
//!
//! [data]
//! count = 1000
//!
//! [experiment]
//! n_schedule = [100, 1000, 10000, 100000]
//! seeds = 5
//! m_ref = 1000000
//! reference_restarts = 10
//! net_size = 50
//! alpha = 0.01
//! lemma1_m = 1000000
//! lemma1_configs = 20
//! mc_m = 1000000
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{Component, Sampler};
use crate::error::{Error, Result};
use crate::lattice::{Kernel, Lattice, NeighborhoodFunction};
use crate::optimizer::{FitParams, Init, QuasiMinimizerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub d: usize,
    #[serde(default)]
    pub delta: f64,
    pub lattice: LatticeSpec,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub fit: FitSpec,
    #[serde(default)]
    pub quasi: QuasiSpec,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Kronecker,
    Gaussian { sigma: f64 },
    Rectangular { radius: u64 },
    /// Keys are comma-separated integer offsets, e.g. `"0,-1"`.
    Table { values: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitSpec {
    Subsample,
    Plusplus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSpec {
    pub restarts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub init: InitSpec,
}

impl Default for FitSpec {
    fn default() -> Self {
        let p = FitParams::default();
        Self {
            restarts: p.restarts,
            max_iter: p.max_iter,
            rel_tol: p.rel_tol,
            init: InitSpec::Subsample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "beta", rename_all = "lowercase", deny_unknown_fields)]
pub enum QuasiSpec {
    #[default]
    Sqrt,
    Linear { c: f64 },
    Constant { c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SamplerSpec {
    #[default]
    Uniform,
    Mixture { components: Vec<ComponentSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSpec {
    pub count: usize,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self { count: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub n_schedule: Vec<usize>,
    pub seeds: usize,
    pub m_ref: usize,
    pub reference_restarts: usize,
    pub net_size: usize,
    pub alpha: Option<f64>,
    pub lemma1_m: usize,
    pub lemma1_configs: usize,
    /// Draws for `mc-eval`.
    pub mc_m: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n_schedule: vec![100, 1000, 10_000, 100_000],
            seeds: 5,
            m_ref: 1_000_000,
            reference_restarts: 10,
            net_size: 50,
            alpha: None,
            lemma1_m: 1_000_000,
            lemma1_configs: 20,
            mc_m: 1_000_000,
        }
    }
}

/// What a command needs from the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Data,
    Fit,
    Eval,
    Lemma1,
    Ulln,
    Consistency,
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::param(field, reason)
}

fn parse_offset(key: &str) -> Result<Vec<i64>> {
    key.split(',')
        .map(|p| p.trim().parse::<i64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| invalid("kernel.values", format!("`{key}` is not a comma-separated integer offset")))
}

impl KernelSpec {
    pub fn to_kernel(&self) -> Result<Kernel> {
        Ok(match self {
            KernelSpec::Kronecker => Kernel::Kronecker,
            KernelSpec::Gaussian { sigma } => Kernel::Gaussian { sigma: *sigma },
            KernelSpec::Rectangular { radius } => Kernel::Rectangular { radius: *radius },
            KernelSpec::Table { values } => {
                let mut map = BTreeMap::new();
                for (k, &v) in values {
                    if map.insert(parse_offset(k)?, v).is_some() {
                        return Err(invalid("kernel.values", format!("offset `{k}` given twice")));
                    }
                }
                Kernel::Table(map)
            }
        })
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Short SHA-256 digest of the canonical serialization.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(&self.lattice.dims).map_err(|e| invalid("lattice.dims", e.to_string()))
    }

    pub fn neighborhood(&self, lattice: &Lattice) -> Result<NeighborhoodFunction> {
        NeighborhoodFunction::new(lattice, self.kernel.to_kernel()?)
            .map_err(|e| invalid("kernel", e.to_string()))
    }

    pub fn sampler(&self) -> Result<Sampler> {
        match &self.sampler {
            SamplerSpec::Uniform => Sampler::uniform(self.d),
            SamplerSpec::Mixture { components } => Sampler::mixture(
                self.d,
                components
                    .iter()
                    .map(|c| Component {
                        weight: c.weight,
                        mean: c.mean.clone(),
                        sigma: c.sigma,
                    })
                    .collect(),
            ),
        }
        .map_err(|e| invalid("sampler", e.to_string()))
    }

    pub fn quasi_spec(&self) -> QuasiMinimizerSpec {
        match self.quasi {
            QuasiSpec::Sqrt => QuasiMinimizerSpec::Sqrt,
            QuasiSpec::Linear { c } => QuasiMinimizerSpec::Linear(c),
            QuasiSpec::Constant { c } => QuasiMinimizerSpec::Constant(c),
        }
    }

    pub fn fit_params(&self) -> FitParams {
        FitParams {
            restarts: self.fit.restarts,
            max_iter: self.fit.max_iter,
            rel_tol: self.fit.rel_tol,
            delta: self.delta,
            init: match self.fit.init {
                InitSpec::Subsample => Init::Subsample,
                InitSpec::Plusplus => Init::PlusPlus,
            },
            seed: self.seed,
            quasi: self.quasi_spec(),
            keep_trace: false,
        }
    }

    /// Seeds `0..experiment.seeds` used for the `(n, seed)` grid.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.experiment.seeds as u64).collect()
    }

    /// Consistency checks; the error names the offending field.
    pub fn validate(&self, purpose: Purpose) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("d", "must be positive"));
        }
        let lattice = self.lattice()?;
        if lattice.rank() > self.d {
            return Err(invalid(
                "lattice.dims",
                format!("lattice dimension {} exceeds d = {}", lattice.rank(), self.d),
            ));
        }
        self.neighborhood(&lattice)?;
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(invalid("delta", "must be a nonnegative number"));
        }
        if lattice.len() >= 2 && self.delta >= (self.d as f64).sqrt() {
            return Err(invalid("delta", format!("must be below sqrt(d) = {}", (self.d as f64).sqrt())));
        }
        self.fit_params().validate()?;
        self.sampler()?;
        let exp = &self.experiment;
        match purpose {
            Purpose::Data => {
                if self.data.count == 0 {
                    return Err(invalid("data.count", "must be positive"));
                }
            }
            Purpose::Fit | Purpose::Eval => {}
            Purpose::Lemma1 => {
                let alpha = exp
                    .alpha
                    .ok_or_else(|| invalid("experiment.alpha", "required for the lemma1 experiment"))?;
                if self.delta.is_nan() || self.delta <= 0.0 {
                    return Err(invalid("delta", "the displacement bound needs delta > 0"));
                }
                if !(alpha > 0.0 && alpha < self.delta / 2.0) {
                    return Err(invalid(
                        "experiment.alpha",
                        format!(
                            "displacement bound hypothesis requires 0 < alpha < delta/2 (alpha = {alpha}, delta = {})",
                            self.delta
                        ),
                    ));
                }
                if exp.lemma1_m < 2 {
                    return Err(invalid("experiment.lemma1_m", "must be at least 2"));
                }
                if exp.lemma1_configs == 0 {
                    return Err(invalid("experiment.lemma1_configs", "must be positive"));
                }
            }
            Purpose::Ulln | Purpose::Consistency => {
                if exp.n_schedule.is_empty() || exp.n_schedule.contains(&0) {
                    return Err(invalid("experiment.n_schedule", "must be nonempty with positive sizes"));
                }
                if exp.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid("experiment.n_schedule", "must be strictly increasing"));
                }
                if exp.seeds == 0 {
                    return Err(invalid("experiment.seeds", "must be positive"));
                }
                if exp.m_ref < 2 {
                    return Err(invalid("experiment.m_ref", "must be at least 2"));
                }
                if purpose == Purpose::Ulln && exp.net_size == 0 {
                    return Err(invalid("experiment.net_size", "must be positive"));
                }
                if purpose == Purpose::Consistency
                    && self.fit.init == InitSpec::Subsample
                    && exp.n_schedule[0] < lattice.len()
                {
                    return Err(invalid("experiment.n_schedule", "smallest n must be at least |I| for subsample init"));
                }
            }
        }
        Ok(())
    }
}
