//! Convergence diagnostics, posterior summaries and posterior predictive checks.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::data::{MeanSd, Outcome, TrialSeries, WalkingCondition};
use crate::design::ModelVariant;
use crate::error::{Error, Result};
use crate::math;
use crate::mcmc::PosteriorChains;
use crate::special::f_quantile;
use crate::stats;

/// Fits whose PSRF upper limit reaches this value are flagged as not converged.
pub const CONVERGENCE_THRESHOLD: f64 = 1.1;

/// Quantile levels reported in summaries.
pub const QUANTILE_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Psrf {
    /// Point estimate before clamping; can dip below 1 by sampling noise.
    pub point_raw: f64,
    /// `max(point_raw, 1)`.
    pub point: f64,
    /// 97.5% quantile based upper limit, clamped to at least 1.
    pub upper: f64,
}

/// Gelman-Rubin potential scale reduction factor for one parameter.
///
/// Within-chain variance `W`, between-chain variance `B`, pooled estimate
/// `V = (n-1)/n W + (1 + 1/m) B/n`, scaled by the `(d+3)/(d+1)`
/// degrees-of-freedom correction; the upper limit replaces the between-chain
/// term by its 97.5% F quantile on `(m - 1, 2W²/var(s²)/m)` degrees of freedom.
/// Chains longer than the shortest one are truncated.
pub fn psrf_of(chains: &[&[f64]]) -> Result<Psrf> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::InsufficientData(
            "PSRF needs at least two chains".into(),
        ));
    }
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "PSRF needs at least 10 draws per chain, got {n}"
        )));
    }
    if chains.iter().any(|c| c[..n].iter().any(|v| !v.is_finite())) {
        return Err(Error::Degenerate("non-finite draws".into()));
    }
    let mf = m as f64;
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| stats::mean(&c[..n])).collect();
    let vars: Vec<f64> = chains
        .iter()
        .map(|c| stats::sample_variance(&c[..n]))
        .collect();
    let w = stats::mean(&vars);
    if !(w > 0.0) {
        return Err(Error::Degenerate("zero within-chain variance".into()));
    }
    let b = nf * stats::sample_variance(&means);
    let mu = stats::mean(&means);
    let mean_sq: Vec<f64> = means.iter().map(|x| x * x).collect();

    let var_w = stats::sample_variance(&vars) / mf;
    let var_b = 2.0 * b * b / (mf - 1.0);
    let cov_wb = (nf / mf) * (covariance(&vars, &mean_sq) - 2.0 * mu * covariance(&vars, &means));
    let growth = 1.0 + 1.0 / mf;
    let v = (nf - 1.0) / nf * w + growth * b / nf;
    let var_v = ((nf - 1.0) * (nf - 1.0) * var_w
        + growth * growth * var_b
        + 2.0 * (nf - 1.0) * growth * cov_wb)
        / (nf * nf);
    let df_adj = if var_v > 0.0 && var_v.is_finite() {
        let df_v = 2.0 * v * v / var_v;
        (df_v + 3.0) / (df_v + 1.0)
    } else {
        1.0
    };
    let r2_fixed = (nf - 1.0) / nf;
    let r2_random = growth * (1.0 / nf) * (b / w);
    let point_raw = math::sqrt(df_adj * (r2_fixed + r2_random));
    let upper_raw = if r2_random > 0.0 {
        let w_df = if var_w > 0.0 {
            2.0 * w * w / var_w
        } else {
            f64::INFINITY
        };
        let q = f_quantile(0.975, mf - 1.0, w_df);
        math::sqrt(df_adj * (r2_fixed + q * r2_random))
    } else {
        point_raw
    };
    Ok(Psrf {
        point_raw,
        point: point_raw.max(1.0),
        upper: upper_raw.max(1.0),
    })
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let ma = stats::mean(a);
    let mb = stats::mean(b);
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    s / (a.len() as f64 - 1.0)
}

pub fn psrf(chains: &PosteriorChains, parameter: &str) -> Result<Psrf> {
    psrf_of(&chains.chains_of(parameter)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ess {
    pub value: f64,
    /// Set when every draw is identical; `value` is then the draw count.
    pub degenerate: bool,
}

/// Effective sample size pooled over chains.
///
/// Multi-chain autocorrelations `ρ_t = 1 - (W - mean_c γ_c(t)) / V⁺` are
/// summed in pairs under Geyer's initial monotone positive sequence rule;
/// `ESS = mn / (1 + 2 Σ ρ_t)`, capped at `mn`.
pub fn ess_of(chains: &[&[f64]]) -> Result<Ess> {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let total = (m * n) as f64;
    if m * n < 100 {
        return Err(Error::InsufficientData(format!(
            "ESS needs at least 100 draws, got {}",
            m * n
        )));
    }
    if n < 4 {
        return Err(Error::InsufficientData(
            "ESS needs at least 4 draws per chain".into(),
        ));
    }
    if chains.iter().any(|c| c[..n].iter().any(|v| !v.is_finite())) {
        return Err(Error::Degenerate("non-finite draws".into()));
    }
    let first = chains[0][0];
    if chains.iter().all(|c| c[..n].iter().all(|&v| v == first)) {
        return Ok(Ess {
            value: total,
            degenerate: true,
        });
    }
    let nf = n as f64;
    let centered: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| {
            let mu = stats::mean(&c[..n]);
            c[..n].iter().map(|v| v - mu).collect()
        })
        .collect();
    let autocov = |t: usize| -> f64 {
        let s: f64 = centered
            .iter()
            .map(|c| {
                c[..n - t]
                    .iter()
                    .zip(&c[t..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / nf
            })
            .sum();
        s / m as f64
    };
    let means: Vec<f64> = chains.iter().map(|c| stats::mean(&c[..n])).collect();
    let w = autocov(0) * nf / (nf - 1.0);
    let mut var_plus = w * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += stats::sample_variance(&means);
    }
    let rho = |t: usize| 1.0 - (w - autocov(t)) / var_plus;

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let rho_even = if t == 0 { 1.0 } else { rho(t) };
        let pair = rho_even + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        t += 2;
    }
    let value = if tau > 0.0 {
        (total / tau).min(total)
    } else {
        total
    };
    Ok(Ess {
        value,
        degenerate: false,
    })
}

pub fn ess(chains: &PosteriorChains, parameter: &str) -> Result<Ess> {
    ess_of(&chains.chains_of(parameter)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// At [`QUANTILE_LEVELS`].
    pub quantiles: [f64; 5],
    pub psrf: Option<Psrf>,
    pub ess: Option<Ess>,
}

impl ParameterSummary {
    /// `None` when no PSRF could be computed (one chain, constant draws).
    pub fn converged(&self) -> Option<bool> {
        self.psrf.map(|p| p.upper < CONVERGENCE_THRESHOLD)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub participant_id: String,
    pub outcome: Outcome,
    pub variant: ModelVariant,
    pub parameters: Vec<ParameterSummary>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Result<&ParameterSummary> {
        self.parameters
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// True when every parameter with a PSRF is below the threshold and at
    /// least one PSRF exists.
    pub fn converged(&self) -> bool {
        let flags: Vec<bool> = self
            .parameters
            .iter()
            .filter_map(ParameterSummary::converged)
            .collect();
        !flags.is_empty() && flags.iter().all(|&f| f)
    }

    /// Parameters flagged as not converged.
    pub fn unconverged(&self) -> Vec<&str> {
        self.parameters
            .iter()
            .filter(|p| p.converged() == Some(false))
            .map(|p| p.name.as_str())
            .collect()
    }
}

/// Pooled-draw moments and quantiles for one sample.
pub fn describe_draws(draws: &[f64]) -> (f64, f64, [f64; 5]) {
    let sorted = stats::sorted(draws);
    let q = QUANTILE_LEVELS.map(|p| stats::quantile_sorted(&sorted, p));
    (stats::mean(draws), stats::sample_sd(draws), q)
}

/// Moments and quantiles of the pooled draws plus PSRF and ESS per parameter.
pub fn summarize(chains: &PosteriorChains) -> PosteriorSummary {
    let parameters = chains
        .parameter_names
        .iter()
        .map(|name| {
            let per_chain = chains.chains_of(name).expect("name from the same chains");
            let pooled = per_chain.concat();
            let (mean, sd, quantiles) = describe_draws(&pooled);
            ParameterSummary {
                name: name.clone(),
                mean,
                sd,
                quantiles,
                psrf: psrf_of(&per_chain).ok(),
                ess: ess_of(&per_chain).ok(),
            }
        })
        .collect();
    PosteriorSummary {
        participant_id: chains.meta.participant_id.clone(),
        outcome: chains.meta.outcome,
        variant: chains.meta.variant,
        parameters,
    }
}

/// Pooled draws of the four condition means `(β1, β1+β2, β1+β3, β1+β4)`, in
/// design order.
pub fn condition_mean_draws(chains: &PosteriorChains) -> Result<[Vec<f64>; 4]> {
    let b: Vec<Vec<f64>> = (1..=4)
        .map(|k| chains.pooled(&format!("beta{k}")))
        .collect::<Result<_>>()?;
    Ok(core::array::from_fn(|c| {
        if c == 0 {
            b[0].clone()
        } else {
            b[0].iter().zip(&b[c]).map(|(a, d)| a + d).collect()
        }
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionPosterior {
    pub condition: WalkingCondition,
    pub mean: f64,
    pub sd: f64,
    pub quantiles: [f64; 5],
}

/// Posterior of each condition mean.
pub fn condition_posteriors(chains: &PosteriorChains) -> Result<Vec<ConditionPosterior>> {
    let draws = condition_mean_draws(chains)?;
    Ok(WalkingCondition::ALL
        .into_iter()
        .map(|c| {
            let (mean, sd, quantiles) = describe_draws(&draws[c.index()]);
            ConditionPosterior {
                condition: c,
                mean,
                sd,
                quantiles,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpcRow {
    pub condition: WalkingCondition,
    pub modeled: MeanSd,
    pub observed: MeanSd,
    pub n_observed: usize,
}

impl PpcRow {
    pub fn mean_discrepancy(&self) -> f64 {
        self.modeled.mean - self.observed.mean
    }

    pub fn sd_discrepancy(&self) -> f64 {
        self.modeled.sd - self.observed.sd
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PpcReport {
    pub participant_id: String,
    pub outcome: Outcome,
    pub rows: Vec<PpcRow>,
}

/// Compares the modeled distribution of each condition with the observed one.
///
/// The modeled distribution mixes the posterior of the condition mean with
/// the marginal error variance (`σ²`, or the AR(1) marginal variance), so its
/// SD is `sqrt(var(μ_c) + E[marginal variance])`.
pub fn posterior_predictive(chains: &PosteriorChains, series: &TrialSeries) -> Result<PpcReport> {
    let meta = &chains.meta;
    if meta.participant_id != series.participant_id()
        || meta.outcome != series.outcome()
        || meta.n_obs != series.len()
    {
        return Err(Error::Mismatch(format!(
            "fit is ({}, {}, n={}) but series is ({}, {}, n={})",
            meta.participant_id,
            meta.outcome,
            meta.n_obs,
            series.participant_id(),
            series.outcome(),
            series.len()
        )));
    }
    let means = condition_mean_draws(chains)?;
    let sigma = chains.pooled("sigma")?;
    let marginal: Vec<f64> = match meta.variant {
        ModelVariant::Ar1 => {
            let phi = chains.pooled("phi")?;
            sigma
                .iter()
                .zip(&phi)
                .map(|(&s, &p)| meta.covariance.marginal_variance(p, s))
                .collect()
        }
        _ => sigma.iter().map(|s| s * s).collect(),
    };
    let error_var = stats::mean(&marginal);
    let rows = WalkingCondition::ALL
        .into_iter()
        .map(|c| {
            let draws = &means[c.index()];
            let observed = series.condition_values(c);
            PpcRow {
                condition: c,
                modeled: MeanSd {
                    mean: stats::mean(draws),
                    sd: math::sqrt(stats::sample_variance(draws) + error_var),
                },
                observed: MeanSd::of(&observed),
                n_observed: observed.len(),
            }
        })
        .collect();
    Ok(PpcReport {
        participant_id: series.participant_id().to_string(),
        outcome: series.outcome(),
        rows,
    })
}

/// Differences between posterior-mean condition means for all six
/// condition pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionDiffs {
    pub participant_id: String,
    pub outcome: Outcome,
    /// Posterior mean of each condition mean, design order.
    pub condition_means: [f64; 4],
}

impl ConditionDiffs {
    /// The six unordered pairs as `(from, to)`, reported as `to - from`.
    pub const PAIRS: [(WalkingCondition, WalkingCondition); 6] = [
        (WalkingCondition::StControl, WalkingCondition::DtControl),
        (WalkingCondition::StControl, WalkingCondition::StFatigue),
        (WalkingCondition::StControl, WalkingCondition::DtFatigue),
        (WalkingCondition::DtControl, WalkingCondition::StFatigue),
        (WalkingCondition::DtControl, WalkingCondition::DtFatigue),
        (WalkingCondition::StFatigue, WalkingCondition::DtFatigue),
    ];

    /// `mean(to) - mean(from)`.
    pub fn get(&self, from: WalkingCondition, to: WalkingCondition) -> f64 {
        self.condition_means[to.index()] - self.condition_means[from.index()]
    }

    pub fn pairs(&self) -> [(String, f64); 6] {
        Self::PAIRS.map(|(a, b)| (pair_label(a, b), self.get(a, b)))
    }
}

pub fn pair_label(from: WalkingCondition, to: WalkingCondition) -> String {
    format!("{} - {}", to.label(), from.label())
}

pub fn condition_diff_matrix(summary: &PosteriorSummary) -> Result<ConditionDiffs> {
    let b: Vec<f64> = (1..=4)
        .map(|k| summary.get(&format!("beta{k}")).map(|p| p.mean))
        .collect::<Result<_>>()?;
    Ok(ConditionDiffs {
        participant_id: summary.participant_id.clone(),
        outcome: summary.outcome,
        condition_means: [b[0], b[0] + b[1], b[0] + b[2], b[0] + b[3]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar1::CovarianceForm;
    use crate::mcmc::{Chain, FitMeta, SamplerConfig};
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, StandardNormal};

    fn normals(seed: u64, n: usize, mu: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mu, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn ar1_chain(seed: u64, n: usize, rho: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: f64 = StandardNormal.sample(&mut rng);
        x /= (1.0 - rho * rho).sqrt();
        (0..n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + e;
                x
            })
            .collect()
    }

    #[test]
    fn identical_chains_psrf() {
        let c = normals(1, 200, 0.0);
        let p = psrf_of(&[&c, &c]).unwrap();
        assert!((p.point_raw - (199.0f64 / 200.0).sqrt()).abs() < 1e-14);
        assert_eq!(p.point, 1.0);
        assert_eq!(p.upper, 1.0);
    }

    #[test]
    fn separated_chains_psrf() {
        let a = normals(2, 1000, 0.0);
        let b = normals(3, 1000, 5.0);
        let p = psrf_of(&[&a, &b]).unwrap();
        // B/W ~ n * 12.5, so R ~ sqrt(1 + 1.5 * 12.5) ~ 4.4
        assert!(p.point > 1.5, "{p:?}");
        assert!(p.upper >= p.point);
    }

    #[test]
    fn psrf_needs_two_chains() {
        let a = normals(2, 100, 0.0);
        assert!(psrf_of(&[&a]).is_err());
        assert!(psrf_of(&[&a[..5], &a[..5]]).is_err());
    }

    #[test]
    fn white_noise_ess() {
        let a = normals(4, 5000, 0.0);
        let b = normals(5, 5000, 0.0);
        let e = ess_of(&[&a, &b]).unwrap();
        assert!(e.value > 8000.0 && e.value <= 10000.0, "{e:?}");
    }

    #[test]
    fn ar1_ess_near_analytic() {
        let a = ar1_chain(6, 20_000, 0.9);
        let b = ar1_chain(7, 20_000, 0.9);
        let e = ess_of(&[&a, &b]).unwrap().value;
        let want = 40_000.0 * 0.1 / 1.9;
        assert!((e / want - 1.0).abs() < 0.3, "{e} vs {want}");
    }

    #[test]
    fn constant_chain_ess() {
        let c = vec![0.5; 200];
        let e = ess_of(&[&c]).unwrap();
        assert!(e.degenerate);
        assert_eq!(e.value, 200.0);
    }

    fn fake_chains(b: [f64; 4]) -> PosteriorChains {
        let draws = |v: f64| vec![v; 20];
        let chain = Chain {
            draws: vec![
                draws(b[0]),
                draws(b[1]),
                draws(b[2]),
                draws(b[3]),
                draws(0.1),
            ],
            acceptance: vec![],
        };
        PosteriorChains::new(
            FitMeta {
                participant_id: "p".into(),
                outcome: Outcome::StrideLength,
                variant: ModelVariant::Basic,
                covariance: CovarianceForm::Stationary,
                n_obs: 8,
            },
            ["beta1", "beta2", "beta3", "beta4", "sigma"]
                .map(String::from)
                .to_vec(),
            vec![chain.clone(), chain],
            SamplerConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn summary_median_of_four() {
        let chain = Chain {
            draws: vec![
                vec![1.0, 2.0],
                vec![0.0; 2],
                vec![0.0; 2],
                vec![0.0; 2],
                vec![1.0; 2],
            ],
            acceptance: vec![],
        };
        let mut other = chain.clone();
        other.draws[0] = vec![3.0, 4.0];
        let pc = PosteriorChains::new(
            fake_chains([0.0; 4]).meta,
            ["beta1", "beta2", "beta3", "beta4", "sigma"]
                .map(String::from)
                .to_vec(),
            vec![chain, other],
            SamplerConfig::default(),
        )
        .unwrap();
        let s = summarize(&pc);
        assert_eq!(s.get("beta1").unwrap().quantiles[2], 2.5);
        assert!(s.get("beta1").unwrap().psrf.is_none());
    }

    #[test]
    fn zero_contrasts_give_equal_modeled_means() {
        let pc = fake_chains([1.4, 0.0, 0.0, 0.0]);
        let d = condition_mean_draws(&pc).unwrap();
        for c in 1..4 {
            assert_eq!(d[c], d[0]);
        }
        let diffs = condition_diff_matrix(&summarize(&pc)).unwrap();
        assert!(diffs.pairs().iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn diff_matrix_identities() {
        let pc = fake_chains([1.43, -0.09, -0.03, -0.12]);
        let diffs = condition_diff_matrix(&summarize(&pc)).unwrap();
        use WalkingCondition::*;
        assert!((diffs.get(StControl, DtControl) + 0.09).abs() < 1e-12);
        assert!((diffs.get(StFatigue, DtFatigue) + 0.09).abs() < 1e-12);
        for a in WalkingCondition::ALL {
            for b in WalkingCondition::ALL {
                assert_eq!(diffs.get(a, b), -diffs.get(b, a));
                for c in WalkingCondition::ALL {
                    assert_eq!(diffs.get(a, c), diffs.get(a, b) + diffs.get(b, c));
                }
            }
        }
    }
}
