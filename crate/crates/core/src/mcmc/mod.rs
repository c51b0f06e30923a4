//! Gibbs / Metropolis-within-Gibbs sampling of the per-participant models.
//!
//! Each sweep draws β from its Gaussian full conditional, then σ by
//! random-walk Metropolis on `ln σ`, then (AR1 only) φ by random-walk
//! Metropolis on `atanh φ`. Proposal scales adapt during burn-in only.

mod likelihood;
mod steps;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use likelihood::log_likelihood;
pub use steps::{ChainState, RandomWalk, Target, ADAPT_BATCH, TARGET_ACCEPTANCE};

use crate::ar1::CovarianceForm;
use crate::data::{Outcome, TrialSeries};
use crate::design::{build_design_matrix, DesignMatrix, ModelSpec, ModelVariant};
use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerConfig {
    pub n_chains: usize,
    /// Kept draws per chain after burn-in and thinning.
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_chains: 2,
            n_iterations: 10_000,
            burn_in: 5_000,
            thinning: 1,
            seed: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::InvalidConfig(
                "at least one chain is required".into(),
            ));
        }
        if self.n_iterations == 0 {
            return Err(Error::InvalidConfig(
                "at least one kept iteration is required".into(),
            ));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        self.n_iterations
            .checked_mul(self.thinning)
            .and_then(|k| k.checked_add(self.burn_in))
            .ok_or_else(|| Error::InvalidConfig("iteration count overflows".into()))?;
        Ok(())
    }

    fn total_sweeps(&self) -> usize {
        self.burn_in + self.n_iterations * self.thinning
    }
}

/// Identifies the data and model a set of draws belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct FitMeta {
    pub participant_id: String,
    pub outcome: Outcome,
    pub variant: ModelVariant,
    pub covariance: CovarianceForm,
    pub n_obs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    /// `draws[k][t]` is parameter `k` at kept iteration `t`.
    pub draws: Vec<Vec<f64>>,
    /// Post-burn-in acceptance rate of each Metropolis-updated parameter.
    pub acceptance: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorChains {
    pub meta: FitMeta,
    pub parameter_names: Vec<String>,
    pub chains: Vec<Chain>,
    pub config: SamplerConfig,
}

impl PosteriorChains {
    /// Assembles draws, checking shape and the support of σ and φ.
    pub fn new(
        meta: FitMeta,
        parameter_names: Vec<String>,
        chains: Vec<Chain>,
        config: SamplerConfig,
    ) -> Result<Self> {
        if chains.is_empty() {
            return Err(Error::InsufficientData("no chains".into()));
        }
        let n_iter = chains[0].draws.first().map_or(0, Vec::len);
        for (c, chain) in chains.iter().enumerate() {
            if chain.draws.len() != parameter_names.len() {
                return Err(Error::DimensionMismatch(format!(
                    "chain {c} has {} parameters, expected {}",
                    chain.draws.len(),
                    parameter_names.len()
                )));
            }
            if chain.draws.iter().any(|d| d.len() != n_iter) {
                return Err(Error::DimensionMismatch(format!(
                    "chain {c} has ragged draws"
                )));
            }
        }
        for (k, name) in parameter_names.iter().enumerate() {
            let bad = chains
                .iter()
                .flat_map(|c| &c.draws[k])
                .find(|&&v| match name.as_str() {
                    "sigma" => !(v > 0.0 && v.is_finite()),
                    "phi" => !(v.abs() < 1.0),
                    _ => !v.is_finite(),
                });
            if let Some(v) = bad {
                return Err(Error::InvalidConfig(format!(
                    "draw {v} of {name} is outside its support"
                )));
            }
        }
        Ok(PosteriorChains {
            meta,
            parameter_names,
            chains,
            config,
        })
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_iterations(&self) -> usize {
        self.chains[0].draws.first().map_or(0, Vec::len)
    }

    pub fn parameter_index(&self, name: &str) -> Result<usize> {
        self.parameter_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// One slice per chain.
    pub fn chains_of(&self, name: &str) -> Result<Vec<&[f64]>> {
        let k = self.parameter_index(name)?;
        Ok(self.chains.iter().map(|c| c.draws[k].as_slice()).collect())
    }

    /// All chains concatenated in chain order.
    pub fn pooled(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.chains_of(name)?.concat())
    }
}

/// A model bound to one participant's series; chains can be run
/// independently (and concurrently) by index.
#[derive(Clone, Debug)]
pub struct Sampler {
    target: Target,
    design: DesignMatrix,
    y: Vec<f64>,
    meta: FitMeta,
}

impl Sampler {
    pub fn new(model: &ModelSpec, series: &TrialSeries) -> Result<Self> {
        if series.outcome() != model.outcome {
            return Err(Error::Mismatch(format!(
                "model is for {} but series holds {}",
                model.outcome,
                series.outcome()
            )));
        }
        let design = build_design_matrix(series, model.variant)?;
        let y = series.values();
        if y.len() <= design.ncols() {
            return Err(Error::InsufficientData(format!(
                "participant {}: {} observations for {} coefficients",
                series.participant_id(),
                y.len(),
                design.ncols()
            )));
        }
        if steps::least_squares(design.matrix(), &DVector::from_column_slice(&y)).is_none() {
            return Err(Error::RankDeficient);
        }
        let target = Target::new(model, design.matrix(), &y)?;
        let meta = FitMeta {
            participant_id: series.participant_id().to_string(),
            outcome: series.outcome(),
            variant: model.variant,
            covariance: model.covariance,
            n_obs: y.len(),
        };
        Ok(Sampler {
            target,
            design,
            y,
            meta,
        })
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn meta(&self) -> &FitMeta {
        &self.meta
    }

    /// Chain RNG: ChaCha8 keyed by `seed`, stream selected by chain index.
    pub fn chain_rng(seed: u64, chain_index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chain_index as u64);
        rng
    }

    /// Starting point: least squares β, residual SD for σ, residual lag-1
    /// autocorrelation (clamped to ±0.95) for φ. Chains after the first are
    /// displaced by random offsets of about two standard errors so that the
    /// between-chain diagnostics have something to detect.
    pub fn initial_state(&self, chain_index: usize, rng: &mut ChaCha8Rng) -> ChainState {
        let model = self.target.model();
        let x = self.design.matrix();
        let beta_hat = self.target.least_squares_fit().clone();
        let (resid_sd, resid_rho) = steps::residual_summary(x, &self.y, &beta_hat);
        let mut beta: Vec<f64> = beta_hat.iter().copied().collect();
        let mut sigma = resid_sd;
        let mut phi = match model.variant {
            ModelVariant::Ar1 => Some(resid_rho.clamp(-0.95, 0.95)),
            _ => None,
        };
        if chain_index > 0 {
            let xtx_inv = (x.transpose() * x).try_inverse();
            for (j, b) in beta.iter_mut().enumerate() {
                let se = xtx_inv
                    .as_ref()
                    .map_or(0.0, |m| resid_sd * math::sqrt(m[(j, j)].max(0.0)));
                let z: f64 = StandardNormal.sample(rng);
                *b += 2.0 * se * z;
            }
            let z: f64 = StandardNormal.sample(rng);
            sigma *= math::exp(0.5 * z);
            if let Some(p) = phi.as_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *p = (*p + 0.3 * z).clamp(-0.95, 0.95);
            }
        }
        sigma = into_support(sigma, model.priors.sigma.support(), resid_sd);
        if let (Some(p), Some(prior)) = (phi.as_mut(), model.priors.phi) {
            let (lo, hi) = prior.support();
            if !(*p > lo && *p < hi) {
                *p = 0.5 * (lo.max(-0.95) + hi.min(0.95));
            }
        }
        if let Some(s) = model.pinned_sigma {
            sigma = s;
        }
        if let Some(p) = model.pinned_phi {
            phi = Some(p);
        }
        ChainState { beta, sigma, phi }
    }

    /// Runs one chain to completion.
    pub fn run_chain(&self, config: &SamplerConfig, chain_index: usize) -> Result<Chain> {
        config.validate()?;
        let model = self.target.model();
        let n_params = model.parameter_names().len();
        let mut rng = Self::chain_rng(config.seed, chain_index);
        let mut state = self.initial_state(chain_index, &mut rng);
        let sample_sigma = model.pinned_sigma.is_none();
        let sample_phi = model.variant == ModelVariant::Ar1 && model.pinned_phi.is_none();
        let mut sigma_walk = RandomWalk::new(0.1);
        let mut phi_walk = RandomWalk::new(0.1);

        let mut draws: Vec<Vec<f64>> = (0..n_params)
            .map(|_| Vec::with_capacity(config.n_iterations))
            .collect();
        for sweep in 0..config.total_sweeps() {
            state.beta = self
                .target
                .gibbs_step_beta(&state, &mut rng)
                .map_err(|e| match e {
                    Error::SingularPrecision => non_finite(chain_index, sweep, &state),
                    other => other,
                })?;
            if sample_sigma {
                state.sigma = self.target.mh_step_sigma(&state, &mut sigma_walk, &mut rng);
            }
            if sample_phi {
                state.phi = Some(self.target.mh_step_phi(&state, &mut phi_walk, &mut rng));
            }
            if !state.is_finite() {
                return Err(non_finite(chain_index, sweep, &state));
            }
            if sweep < config.burn_in {
                sigma_walk.adapt();
                phi_walk.adapt();
                if sweep + 1 == config.burn_in {
                    sigma_walk.reset_counts();
                    phi_walk.reset_counts();
                }
                continue;
            }
            if (sweep - config.burn_in).is_multiple_of(config.thinning) {
                for (k, b) in state.beta.iter().enumerate() {
                    draws[k].push(*b);
                }
                draws[state.beta.len()].push(state.sigma);
                if let Some(phi) = state.phi {
                    draws[state.beta.len() + 1].push(phi);
                }
            }
        }
        let mut acceptance = Vec::new();
        if sample_sigma {
            acceptance.push(("sigma".to_string(), sigma_walk.acceptance_rate()));
        }
        if sample_phi {
            acceptance.push(("phi".to_string(), phi_walk.acceptance_rate()));
        }
        Ok(Chain { draws, acceptance })
    }

    /// Collects chains produced elsewhere (for example in parallel).
    pub fn assemble(&self, config: &SamplerConfig, chains: Vec<Chain>) -> Result<PosteriorChains> {
        PosteriorChains::new(
            self.meta.clone(),
            self.target.model().parameter_names(),
            chains,
            *config,
        )
    }

    /// Runs all chains sequentially.
    pub fn run(&self, config: &SamplerConfig) -> Result<PosteriorChains> {
        config.validate()?;
        let chains = (0..config.n_chains)
            .map(|c| self.run_chain(config, c))
            .collect::<Result<Vec<_>>>()?;
        self.assemble(config, chains)
    }
}

/// Fits `model` to `series`.
pub fn run_sampler(
    model: &ModelSpec,
    series: &TrialSeries,
    config: &SamplerConfig,
) -> Result<PosteriorChains> {
    Sampler::new(model, series)?.run(config)
}

fn into_support(value: f64, (lo, hi): (f64, f64), fallback: f64) -> f64 {
    let lo = lo.max(0.0);
    if value > lo && value < hi && value.is_finite() {
        return value;
    }
    let f = fallback.abs().max(1e-6);
    if f > lo && f < hi {
        f
    } else if hi.is_finite() {
        0.5 * (lo + hi)
    } else {
        lo + 1.0
    }
}

fn non_finite(chain: usize, iteration: usize, state: &ChainState) -> Error {
    Error::NonFinite {
        chain,
        iteration,
        state: format!(
            "beta={:?} sigma={} phi={:?}",
            state.beta, state.sigma, state.phi
        ),
    }
}
