use nalgebra::DMatrix;
use nof1_core::design::{PriorSet, PriorSpec};
use nof1_core::diagnostics::summarize;
use nof1_core::mcmc::{ChainState, RandomWalk, Sampler, Target};
use nof1_core::synth::{generate_series, SynthSpec, ST_FIRST};
use nof1_core::{
    run_sampler, ModelSpec, ModelVariant, Outcome, PriorRegime, SamplerConfig, TrialSeries,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn synthetic(beta: [f64; 4], phi: f64, sigma: f64, k: usize, seed: u64) -> TrialSeries {
    generate_series(&SynthSpec {
        participant_id: "s1".into(),
        outcome: Outcome::StrideLength,
        beta,
        phi,
        sigma,
        strides_per_condition: k,
        condition_order: ST_FIRST,
        seed,
    })
    .unwrap()
}

fn short(n_iterations: usize, burn_in: usize, seed: u64) -> SamplerConfig {
    SamplerConfig {
        n_chains: 2,
        n_iterations,
        burn_in,
        thinning: 1,
        seed,
    }
}

#[test]
fn same_seed_same_draws() {
    let s = synthetic([1.4, -0.1, -0.03, -0.12], 0.5, 0.05, 30, 1);
    let m = ModelSpec::new(
        ModelVariant::Ar1,
        Outcome::StrideLength,
        PriorRegime::NonInformative,
    );
    let a = run_sampler(&m, &s, &short(500, 200, 9)).unwrap();
    let b = run_sampler(&m, &s, &short(500, 200, 9)).unwrap();
    let c = run_sampler(&m, &s, &short(500, 200, 10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.chains[0].draws, c.chains[0].draws);
    assert_ne!(a.chains[0].draws, a.chains[1].draws);
}

#[test]
fn default_config_shape() {
    let s = synthetic([1.4, -0.1, -0.03, -0.12], 0.0, 0.05, 20, 2);
    let m = ModelSpec::new(
        ModelVariant::Basic,
        Outcome::StrideLength,
        PriorRegime::NonInformative,
    );
    let fit = run_sampler(&m, &s, &SamplerConfig::default()).unwrap();
    assert_eq!(fit.n_chains(), 2);
    assert_eq!(fit.n_iterations(), 10_000);
    assert_eq!(
        fit.parameter_names,
        ["beta1", "beta2", "beta3", "beta4", "sigma"]
    );
}

#[test]
fn thinning_keeps_requested_count() {
    let s = synthetic([1.4, -0.1, -0.03, -0.12], 0.0, 0.05, 10, 3);
    let m = ModelSpec::new(
        ModelVariant::TimeCovariate,
        Outcome::StrideLength,
        PriorRegime::Informative,
    );
    let cfg = SamplerConfig {
        thinning: 3,
        ..short(100, 10, 1)
    };
    let fit = run_sampler(&m, &s, &cfg).unwrap();
    assert_eq!(fit.n_iterations(), 100);
    assert_eq!(fit.parameter_names.len(), 6);
}

#[test]
fn outcome_mismatch_rejected() {
    let s = synthetic([1.4, -0.1, -0.03, -0.12], 0.0, 0.05, 10, 3);
    let m = ModelSpec::new(
        ModelVariant::Basic,
        Outcome::StrideTime,
        PriorRegime::NonInformative,
    );
    assert!(run_sampler(&m, &s, &short(10, 0, 1)).is_err());
}

#[test]
fn basic_recovers_truth() {
    let beta = [1.4, -0.1, -0.03, -0.12];
    let s = synthetic(beta, 0.0, 0.05, 40, 4);
    let m = ModelSpec::new(
        ModelVariant::Basic,
        Outcome::StrideLength,
        PriorRegime::NonInformative,
    );
    let summary = summarize(&run_sampler(&m, &s, &short(4000, 1000, 4)).unwrap());
    assert!(summary.converged(), "{summary:?}");
    for (k, b) in beta.iter().enumerate() {
        let p = summary.get(&format!("beta{}", k + 1)).unwrap();
        assert!((p.mean - b).abs() < 3.0 * p.sd, "{p:?}");
    }
    let sigma = summary.get("sigma").unwrap();
    assert!((sigma.mean - 0.05).abs() < 3.0 * sigma.sd);
}

#[test]
fn phi_recovered_on_long_series() {
    let s = synthetic([1.4, -0.1, -0.03, -0.12], 0.6, 0.05, 125, 5);
    let m = ModelSpec::new(
        ModelVariant::Ar1,
        Outcome::StrideLength,
        PriorRegime::NonInformative,
    );
    let summary = summarize(&run_sampler(&m, &s, &short(4000, 2000, 5)).unwrap());
    let phi = summary.get("phi").unwrap();
    assert!((phi.mean - 0.6).abs() < 0.1, "{phi:?}");
    assert!(summary.converged());
}

#[test]
fn draws_stay_in_support() {
    let s = synthetic([1.4, -0.1, -0.03, -0.12], 0.95, 0.05, 15, 6);
    let m = ModelSpec::new(
        ModelVariant::Ar1,
        Outcome::StrideLength,
        PriorRegime::NonInformative,
    );
    let fit = run_sampler(&m, &s, &short(2000, 500, 6)).unwrap();
    assert!(fit.pooled("sigma").unwrap().iter().all(|&v| v > 0.0));
    assert!(fit.pooled("phi").unwrap().iter().all(|&v| v.abs() < 1.0));
}

fn half_cauchy_cdf(x: f64, scale: f64) -> f64 {
    2.0 / std::f64::consts::PI * (x / scale).atan()
}

fn prior_only_sigma(prior: PriorSpec, steps: usize, keep_every: usize, seed: u64) -> Vec<f64> {
    let mut model = ModelSpec::new(
        ModelVariant::Ar1,
        Outcome::StrideLength,
        PriorRegime::NonInformative,
    );
    model.priors.sigma = prior;
    let target = Target::new(&model, &DMatrix::zeros(0, 4), &[]).unwrap();
    let mut state = ChainState {
        beta: vec![0.0; 4],
        sigma: 1.0,
        phi: Some(0.0),
    };
    let mut walk = RandomWalk::new(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..20_000 {
        state.sigma = target.mh_step_sigma(&state, &mut walk, &mut rng);
        if i % 50 == 49 {
            walk.adapt();
        }
    }
    walk.reset_counts();
    let mut out = Vec::new();
    for i in 0..steps {
        state.sigma = target.mh_step_sigma(&state, &mut walk, &mut rng);
        if i % keep_every == 0 {
            out.push(state.sigma);
        }
    }
    out
}

#[test]
fn prior_only_sigma_is_half_cauchy() {
    let mut draws = prior_only_sigma(PriorSpec::HalfCauchy { scale: 2.5 }, 400_000, 100, 12);
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    let d = draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = half_cauchy_cdf(x, 2.5);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% Kolmogorov-Smirnov critical value
    assert!(d < 1.63 / n.sqrt(), "KS distance {d}");
}

#[test]
fn uniform_sigma_prior_caps_at_upper_bound() {
    let draws = prior_only_sigma(PriorSpec::Uniform { lo: 0.0, hi: 100.0 }, 50_000, 1, 13);
    assert!(draws.iter().all(|&s| s > 0.0 && s < 100.0));
    assert!(draws.iter().any(|&s| s > 90.0));
}

#[test]
fn prior_only_beta_matches_prior() {
    let model = ModelSpec::new(
        ModelVariant::Basic,
        Outcome::StrideLength,
        PriorRegime::Informative,
    );
    let target = Target::new(&model, &DMatrix::zeros(0, 4), &[]).unwrap();
    let (mean, chol) = target.beta_conditional(1.0, None).unwrap();
    assert!((mean[0] - 1.36).abs() < 1e-12);
    let cov = chol.inverse();
    assert!((cov[(0, 0)].sqrt() - 0.08).abs() < 1e-12);
    assert!((cov[(1, 1)] - 1000.0).abs() < 1e-9);
}

#[test]
fn beta_concentrates_as_sigma_vanishes() {
    let s = synthetic([1.4, 0.0, 0.0, 0.0], 0.0, 1e-9, 5, 7);
    let m = ModelSpec::new(
        ModelVariant::Basic,
        Outcome::StrideLength,
        PriorRegime::NonInformative,
    );
    let sampler = Sampler::new(&m, &s).unwrap();
    let (mean, _) = sampler.target().beta_conditional(1e-8, None).unwrap();
    assert!((mean[0] - 1.4).abs() < 1e-6);
}

#[test]
fn custom_priors_validated() {
    let mut priors = PriorSet {
        beta: vec![PriorSpec::Normal { mean: 0.0, sd: 1.0 }; 4],
        sigma: PriorSpec::HalfCauchy { scale: 2.5 },
        phi: Some(PriorSpec::Uniform { lo: -1.0, hi: 1.0 }),
    };
    let m = ModelSpec::new(
        ModelVariant::Ar1,
        Outcome::StrideLength,
        PriorRegime::NonInformative,
    );
    assert!(m.clone().with_priors(priors.clone()).validate().is_ok());
    priors.phi = Some(PriorSpec::Uniform { lo: -2.0, hi: 1.0 });
    assert!(m.with_priors(priors).validate().is_err());
}
