//! Seeded samplers on `[0,1]^d` and random separated configurations.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::quantizer::{Configuration, SampleSet};
use crate::rng::{label, substream, StreamRng, CHUNK};

/// Source of i.i.d. points in the unit cube.
pub trait PointSampler: Sync {
    fn dim(&self) -> usize;

    /// Write one draw into `out` (length `dim`).
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Uniform,
    Mixture {
        components: Vec<Component>,
        /// Gaussian mass of each component inside the cube.
        masses: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

/// Bounded-density distribution on `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampler {
    dim: usize,
    kind: Kind,
}

/// Minimum in-cube mass per mixture component; below it rejection is
/// considered pathological.
const MIN_ACCEPTANCE: f64 = 1e-3;

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

impl Sampler {
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::SamplerConfig("dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            kind: Kind::Uniform,
        })
    }

    /// Mixture of isotropic Gaussians truncated to the cube.
    pub fn mixture(dim: usize, components: Vec<Component>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::SamplerConfig("dimension must be positive".into()));
        }
        if components.is_empty() {
            return Err(Error::SamplerConfig("mixture has no components".into()));
        }
        for (k, c) in components.iter().enumerate() {
            if !(c.weight.is_finite() && c.weight > 0.0) {
                return Err(Error::SamplerConfig(format!(
                    "component {k}: weight {} is not positive",
                    c.weight
                )));
            }
            if !(c.sigma.is_finite() && c.sigma > 0.0) {
                return Err(Error::SamplerConfig(format!(
                    "component {k}: sigma {} is not positive",
                    c.sigma
                )));
            }
            if c.mean.len() != dim {
                return Err(Error::SamplerConfig(format!(
                    "component {k}: mean has {} coordinates, expected {dim}",
                    c.mean.len()
                )));
            }
            if c.mean.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(Error::SamplerConfig(format!(
                    "component {k}: mean {:?} is outside the unit cube",
                    c.mean
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::SamplerConfig(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let masses: Vec<f64> = components
            .iter()
            .map(|c| {
                c.mean
                    .iter()
                    .map(|&m| std_normal_cdf((1.0 - m) / c.sigma) - std_normal_cdf(-m / c.sigma))
                    .product()
            })
            .collect();
        if let Some(k) = masses.iter().position(|&z| z < MIN_ACCEPTANCE) {
            return Err(Error::SamplerConfig(format!(
                "component {k}: rejection acceptance rate {:.3e} is below {MIN_ACCEPTANCE:e}",
                masses[k]
            )));
        }
        let mut acc = 0.0;
        let cumulative = components
            .iter()
            .map(|c| {
                acc += c.weight;
                acc
            })
            .collect();
        Ok(Self {
            dim,
            kind: Kind::Mixture {
                components,
                masses,
                cumulative,
            },
        })
    }

    /// Upper bound `B` on the density.
    pub fn density_bound(&self) -> f64 {
        match &self.kind {
            Kind::Uniform => 1.0,
            Kind::Mixture {
                components, masses, ..
            } => components
                .iter()
                .zip(masses)
                .map(|(c, z)| {
                    let norm = (2.0 * std::f64::consts::PI * c.sigma * c.sigma)
                        .powf(self.dim as f64 / 2.0);
                    c.weight / (z * norm)
                })
                .sum(),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, Kind::Uniform)
    }
}

impl PointSampler for Sampler {
    fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match &self.kind {
            Kind::Uniform => out.iter_mut().for_each(|v| *v = rng.random::<f64>()),
            Kind::Mixture {
                components,
                cumulative,
                ..
            } => {
                let u: f64 = rng.random();
                let k = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(components.len() - 1);
                let c = &components[k];
                loop {
                    for (v, &m) in out.iter_mut().zip(&c.mean) {
                        let z: f64 = StandardNormal.sample(rng);
                        *v = m + c.sigma * z;
                    }
                    if out.iter().all(|v| (0.0..=1.0).contains(v)) {
                        break;
                    }
                }
            }
        }
    }
}

/// Draws `[c·CHUNK, c·CHUNK + count)` of the stream `(seed, ·)`.
pub(crate) fn draw_chunk<S: PointSampler + ?Sized>(
    sampler: &S,
    seed: u64,
    chunk: usize,
    count: usize,
) -> Vec<f64> {
    let dim = sampler.dim();
    let mut rng = substream(seed, &[label::SAMPLE, chunk as u64]);
    let mut out = vec![0.0; count * dim];
    for w in out.chunks_exact_mut(dim) {
        sampler.draw(&mut rng, w);
    }
    out
}

/// `count` i.i.d. draws, deterministic per `seed`.
pub fn sample<S: PointSampler + ?Sized>(sampler: &S, count: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| draw_chunk(sampler, seed, c, CHUNK.min(count - c * CHUNK)))
        .collect();
    Ok(SampleSet::from_raw(sampler.dim(), parts.concat()))
}

fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    std::f64::consts::PI.powf(h) / libm::tgamma(h + 1.0)
}

/// True when no configuration of `k` points in `[0,1]^d` can be
/// `δ`-separated: disjoint balls of radius `δ/2` around the points must fit
/// in the cube enlarged by `δ/2`.
pub fn provably_infeasible(k: usize, d: usize, delta: f64) -> bool {
    if k < 2 || delta <= 0.0 {
        return false;
    }
    if d == 1 {
        return (k - 1) as f64 * delta > 1.0;
    }
    k as f64 * unit_ball_volume(d) * (delta / 2.0).powi(d as i32) > (1.0 + delta).powi(d as i32)
}

/// Rejection-samples a uniform configuration in `D_I^δ`.
pub fn random_config_in_d(
    lattice: &Lattice,
    d: usize,
    delta: f64,
    seed: u64,
    max_tries: usize,
) -> Result<Configuration> {
    if d == 0 {
        return Err(Error::param("d", "data dimension must be positive"));
    }
    if lattice.rank() > d {
        return Err(Error::param(
            "lattice",
            format!("lattice dimension {} exceeds d = {d}", lattice.rank()),
        ));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::param("delta", format!("must be nonnegative, got {delta}")));
    }
    let k = lattice.len();
    if provably_infeasible(k, d, delta) {
        return Err(Error::InfeasibleSeparation(format!(
            "provably infeasible: {k} points cannot be {delta}-separated in [0,1]^{d}"
        )));
    }
    let uniform = Sampler::uniform(d)?;
    let mut rng = substream(seed, &[label::NET]);
    let mut coords = vec![0.0; k * d];
    for _ in 0..max_tries {
        for w in coords.chunks_exact_mut(d) {
            uniform.draw(&mut rng, w);
        }
        let x = Configuration::from_raw(d, coords.clone());
        if x.is_separated(delta) {
            return Ok(x);
        }
    }
    Err(Error::InfeasibleSeparation(format!(
        "no {delta}-separated configuration of {k} points in [0,1]^{d} after {max_tries} tries \
         (not provably infeasible; try more tries or a smaller delta)"
    )))
}
