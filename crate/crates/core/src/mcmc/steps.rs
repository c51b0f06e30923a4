//! Full-conditional updates for one sweep of the sampler.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ar1::LaggedGram;
use crate::design::{ModelSpec, ModelVariant, PriorSpec};
use crate::error::{Error, Result};
use crate::math;

/// Current values of all sampled parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub beta: Vec<f64>,
    pub sigma: f64,
    /// `None` for the independent-error variants.
    pub phi: Option<f64>,
}

impl ChainState {
    pub fn is_finite(&self) -> bool {
        self.beta.iter().all(|b| b.is_finite())
            && self.sigma.is_finite()
            && self.phi.is_none_or(f64::is_finite)
    }
}

pub const TARGET_ACCEPTANCE: f64 = 0.44;
pub const ADAPT_BATCH: u32 = 50;

/// Random-walk proposal with a batch-adapted scale.
///
/// During burn-in the log scale moves by `min(0.05, 1/sqrt(batch))` after
/// every batch of [`ADAPT_BATCH`] proposals, up when the batch acceptance
/// rate exceeded [`TARGET_ACCEPTANCE`] and down otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomWalk {
    log_scale: f64,
    batch_accepted: u32,
    batch_len: u32,
    batches: u32,
    accepted: u64,
    proposed: u64,
}

impl RandomWalk {
    pub fn new(scale: f64) -> Self {
        RandomWalk {
            log_scale: math::ln(scale),
            batch_accepted: 0,
            batch_len: 0,
            batches: 0,
            accepted: 0,
            proposed: 0,
        }
    }

    pub fn scale(&self) -> f64 {
        math::exp(self.log_scale)
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.batch_len += 1;
        if accepted {
            self.accepted += 1;
            self.batch_accepted += 1;
        }
    }

    /// Applies the batch update if a batch has completed.
    pub fn adapt(&mut self) {
        if self.batch_len < ADAPT_BATCH {
            return;
        }
        self.batches += 1;
        let delta = (1.0 / math::sqrt(self.batches as f64)).min(0.05);
        let rate = self.batch_accepted as f64 / self.batch_len as f64;
        if rate > TARGET_ACCEPTANCE {
            self.log_scale += delta;
        } else {
            self.log_scale -= delta;
        }
        self.batch_accepted = 0;
        self.batch_len = 0;
    }

    /// Clears acceptance counters; the scale is kept.
    pub fn reset_counts(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
        self.batch_accepted = 0;
        self.batch_len = 0;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Posterior target for one participant and outcome.
///
/// Data enter only through the lag moments of `[X | e₀]` where
/// `e₀ = y - X β_ref`, so every likelihood evaluation costs O(p²)
/// regardless of series length. `β_ref` is the least-squares fit when it
/// exists, which keeps the residual quadratic free of cancellation.
#[derive(Clone, Debug)]
pub struct Target {
    model: ModelSpec,
    n: usize,
    p: usize,
    gram: LaggedGram,
    beta_ref: DVector<f64>,
    prior_mean: DVector<f64>,
    prior_precision: DVector<f64>,
}

impl Target {
    pub fn new(model: &ModelSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        model.validate()?;
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "X has {n} rows, y has {}",
                y.len()
            )));
        }
        if p != model.variant.n_beta() {
            return Err(Error::DimensionMismatch(format!(
                "X has {p} columns, model expects {}",
                model.variant.n_beta()
            )));
        }
        let yv = DVector::from_column_slice(y);
        let beta_ref = least_squares(x, &yv).unwrap_or_else(|| DVector::zeros(p));
        let e0 = &yv - x * &beta_ref;
        let mut z = DMatrix::<f64>::zeros(n, p + 1);
        z.columns_mut(0, p).copy_from(x);
        z.set_column(p, &e0);
        let (mean, precision) = model.priors.beta_normal_moments();
        Ok(Target {
            model: model.clone(),
            n,
            p,
            gram: LaggedGram::new(&z),
            beta_ref,
            prior_mean: DVector::from_vec(mean),
            prior_precision: DVector::from_vec(precision),
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    pub fn n_beta(&self) -> usize {
        self.p
    }

    pub(crate) fn least_squares_fit(&self) -> &DVector<f64> {
        &self.beta_ref
    }

    fn effective_phi(&self, phi: Option<f64>) -> f64 {
        match self.model.variant {
            ModelVariant::Ar1 => phi.unwrap_or(0.0),
            _ => 0.0,
        }
    }

    fn innovation_variance(&self, sigma: f64, phi: f64) -> f64 {
        match self.model.variant {
            ModelVariant::Ar1 => self.model.covariance.innovation_variance(phi, sigma),
            _ => sigma * sigma,
        }
    }

    /// `rᵀ Q(φ) r` for `r = y - Xβ`.
    pub fn residual_quadratic(&self, beta: &[f64], phi: f64) -> f64 {
        let p = self.p;
        let mut w = DVector::<f64>::zeros(p + 1);
        for j in 0..p {
            w[j] = -(beta[j] - self.beta_ref[j]);
        }
        w[p] = 1.0;
        let g = self.gram.at(phi);
        w.dot(&(g * &w)).max(0.0)
    }

    /// Log-likelihood from the cached lag moments.
    pub fn log_likelihood(&self, beta: &[f64], sigma: f64, phi: Option<f64>) -> f64 {
        let phi = self.effective_phi(phi);
        self.ln_lik_given_quadratic(sigma, phi, self.residual_quadratic(beta, phi))
    }

    fn ln_lik_given_quadratic(&self, sigma: f64, phi: f64, q: f64) -> f64 {
        let n = self.n as f64;
        let s2 = self.innovation_variance(sigma, phi);
        -0.5 * (n * math::ln(2.0 * PI) + n * math::ln(s2) - math::ln_1p(-phi * phi)) - 0.5 * q / s2
    }

    /// Mean and Cholesky factor of the precision of `β | σ, φ, y`.
    ///
    /// Precision `XᵀΩX + P₀`, mean solving `(XᵀΩX + P₀) μ = XᵀΩy + P₀ m₀`
    /// with `Ω = Q(φ)/s²`.
    pub fn beta_conditional(
        &self,
        sigma: f64,
        phi: Option<f64>,
    ) -> Result<(DVector<f64>, Cholesky<f64, Dyn>)> {
        let phi = self.effective_phi(phi);
        let s2 = self.innovation_variance(sigma, phi);
        let p = self.p;
        let g = self.gram.at(phi);
        let gxx = g.view((0, 0), (p, p)).into_owned();
        let gxe = g.view((0, p), (p, 1)).column(0).into_owned();
        let mut precision = &gxx / s2;
        for j in 0..p {
            precision[(j, j)] += self.prior_precision[j];
        }
        let rhs = (&gxx * &self.beta_ref + gxe) / s2
            + self.prior_precision.component_mul(&self.prior_mean);
        let chol = Cholesky::new(precision).ok_or(Error::SingularPrecision)?;
        let mean = chol.solve(&rhs);
        Ok((mean, chol))
    }

    /// Exact draw from the Gaussian full conditional of β.
    pub fn gibbs_step_beta<R: Rng + ?Sized>(
        &self,
        state: &ChainState,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let (mean, chol) = self.beta_conditional(state.sigma, state.phi)?;
        let z = DVector::<f64>::from_fn(self.p, |_, _| StandardNormal.sample(rng));
        // precision = L Lᵀ, so Lᵀ u = z gives u ~ N(0, precision⁻¹)
        let u = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or(Error::SingularPrecision)?;
        Ok((mean + u).iter().copied().collect())
    }

    /// Random-walk Metropolis on `ln σ`; returns the new σ.
    pub fn mh_step_sigma<R: Rng + ?Sized>(
        &self,
        state: &ChainState,
        walk: &mut RandomWalk,
        rng: &mut R,
    ) -> f64 {
        let phi = self.effective_phi(state.phi);
        let q = self.residual_quadratic(&state.beta, phi);
        let prior = self.model.priors.sigma;
        let log_target = |sigma: f64| -> f64 {
            let lp = prior.ln_density(sigma);
            if lp == f64::NEG_INFINITY {
                return lp;
            }
            // ln σ Jacobian of the log transform
            self.ln_lik_given_quadratic(sigma, phi, q) + lp + math::ln(sigma)
        };
        let eta = math::ln(state.sigma);
        let step: f64 = StandardNormal.sample(rng);
        let proposal = math::exp(eta + walk.scale() * step);
        accept(
            walk,
            rng,
            log_target(state.sigma),
            log_target(proposal),
            state.sigma,
            proposal,
        )
    }

    /// Random-walk Metropolis on `atanh φ`; returns the new φ.
    pub fn mh_step_phi<R: Rng + ?Sized>(
        &self,
        state: &ChainState,
        walk: &mut RandomWalk,
        rng: &mut R,
    ) -> f64 {
        let current = state.phi.unwrap_or(0.0);
        let prior = self
            .model
            .priors
            .phi
            .unwrap_or(PriorSpec::Uniform { lo: -1.0, hi: 1.0 });
        let log_target = |phi: f64| -> f64 {
            if !(phi.abs() < 1.0) {
                return f64::NEG_INFINITY;
            }
            let lp = prior.ln_density(phi);
            if lp == f64::NEG_INFINITY {
                return lp;
            }
            let q = self.residual_quadratic(&state.beta, phi);
            // dφ/dψ = 1 - φ²
            self.ln_lik_given_quadratic(state.sigma, phi, q) + lp + math::ln_1p(-phi * phi)
        };
        let step: f64 = StandardNormal.sample(rng);
        let proposal = math::tanh(math::atanh(current) + walk.scale() * step);
        accept(
            walk,
            rng,
            log_target(current),
            log_target(proposal),
            current,
            proposal,
        )
    }

    /// Conditional log density of σ used in tests and diagnostics.
    pub fn ln_sigma_conditional(&self, state: &ChainState, sigma: f64) -> f64 {
        let phi = self.effective_phi(state.phi);
        let q = self.residual_quadratic(&state.beta, phi);
        self.ln_lik_given_quadratic(sigma, phi, q) + self.model.priors.sigma.ln_density(sigma)
    }
}

fn accept<R: Rng + ?Sized>(
    walk: &mut RandomWalk,
    rng: &mut R,
    current_lp: f64,
    proposal_lp: f64,
    current: f64,
    proposal: f64,
) -> f64 {
    let log_u = math::ln(rng.random::<f64>());
    let ok = proposal_lp.is_finite() && log_u < proposal_lp - current_lp;
    walk.record(ok);
    if ok {
        proposal
    } else {
        current
    }
}

/// Least-squares coefficients, `None` when `XᵀX` is not positive definite.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    if x.nrows() < x.ncols() {
        return None;
    }
    let chol = Cholesky::new(x.transpose() * x)?;
    let l = chol.l();
    let min_diag = l.diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let max_diag = l.diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
    if !(min_diag > 1e-10 * max_diag) {
        return None;
    }
    Some(chol.solve(&(x.transpose() * y)))
}

/// Residual lag-1 autocorrelation of the least-squares fit, used for
/// initialization.
pub(crate) fn residual_summary(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> (f64, f64) {
    let yv = DVector::from_column_slice(y);
    let r = yv - x * beta;
    let n = r.len();
    let p = x.ncols();
    let ss = r.dot(&r);
    let dof = if n > p { (n - p) as f64 } else { 1.0 };
    let resid: Vec<f64> = r.iter().copied().collect();
    (
        math::sqrt(ss / dof),
        crate::stats::lag1_autocorrelation(&resid),
    )
}
