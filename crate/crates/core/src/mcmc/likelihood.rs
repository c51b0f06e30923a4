use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::ar1::{self, check_phi, check_sigma};
use crate::design::{DesignMatrix, ModelSpec, ModelVariant};
use crate::error::{Error, Result};
use crate::math;

/// Log-likelihood of `y` under the model at `(β, σ, φ)`.
///
/// Independent-error variants use `N(Xβ, σ² I)`; the AR1 variant uses the
/// multivariate normal with AR(1) covariance, evaluated in O(n) through the
/// innovations form of the quadratic and the closed-form log-determinant.
pub fn log_likelihood(
    model: &ModelSpec,
    beta: &[f64],
    sigma: f64,
    phi: Option<f64>,
    x: &DesignMatrix,
    y: &[f64],
) -> Result<f64> {
    check_sigma(sigma)?;
    let n = y.len();
    if x.nrows() != n || x.ncols() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "X is {}x{}, beta has {} entries, y has {}",
            x.nrows(),
            x.ncols(),
            beta.len(),
            n
        )));
    }
    let m = x.matrix();
    let resid: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..beta.len()).map(|j| m[(i, j)] * beta[j]).sum::<f64>())
        .collect();
    let ln_2pi = math::ln(2.0 * PI);
    match model.variant {
        ModelVariant::Basic | ModelVariant::TimeCovariate => {
            let ss: f64 = resid.iter().map(|r| r * r).sum();
            Ok(-0.5 * n as f64 * (ln_2pi + math::ln(sigma * sigma)) - 0.5 * ss / (sigma * sigma))
        }
        ModelVariant::Ar1 => {
            let phi = phi.ok_or_else(|| Error::InvalidConfig("AR1 likelihood needs phi".into()))?;
            check_phi(phi)?;
            let s2 = model.covariance.innovation_variance(phi, sigma);
            let q = ar1::quadratic_form(phi, &resid);
            let log_det = ar1::log_determinant(phi, sigma, n, model.covariance);
            Ok(-0.5 * (n as f64 * ln_2pi + log_det) - 0.5 * q / s2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Observation, Outcome, Provenance, TrialSeries, WalkingCondition};
    use crate::design::{build_design_matrix, PriorRegime};
    use alloc::vec;

    fn design(n_per: usize) -> DesignMatrix {
        let mut obs = Vec::new();
        for c in WalkingCondition::ALL {
            for i in 0..n_per {
                obs.push(Observation {
                    condition: c,
                    sequence_index: i as u32,
                    value: 1.0,
                });
            }
        }
        let s = TrialSeries::new("p", Outcome::StrideLength, obs, Provenance::default()).unwrap();
        build_design_matrix(&s, ModelVariant::Basic).unwrap()
    }

    #[test]
    fn standard_normal_at_mean() {
        let s = TrialSeries::new(
            "p",
            Outcome::StrideLength,
            WalkingCondition::ALL
                .iter()
                .map(|&c| Observation {
                    condition: c,
                    sequence_index: 0,
                    value: 1.0,
                })
                .collect(),
            Provenance::default(),
        )
        .unwrap();
        let x = build_design_matrix(&s, ModelVariant::Basic).unwrap();
        let model = ModelSpec::new(
            ModelVariant::Basic,
            Outcome::StrideLength,
            PriorRegime::NonInformative,
        );
        // four observations each exactly at its mean
        let beta = [1.0, 0.0, 0.0, 0.0];
        let ll = log_likelihood(&model, &beta, 1.0, None, &x, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((ll - 4.0 * -0.5 * (2.0 * PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn ar1_at_zero_phi_equals_basic() {
        let x = design(3);
        let y: Vec<f64> = (0..12).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
        let beta = [1.0, 0.05, -0.02, 0.01];
        let basic = ModelSpec::new(
            ModelVariant::Basic,
            Outcome::StrideLength,
            PriorRegime::NonInformative,
        );
        let ar1m = ModelSpec::new(
            ModelVariant::Ar1,
            Outcome::StrideLength,
            PriorRegime::NonInformative,
        );
        let a = log_likelihood(&basic, &beta, 0.3, None, &x, &y).unwrap();
        let b = log_likelihood(&ar1m, &beta, 0.3, Some(0.0), &x, &y).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters() {
        let x = design(1);
        let m = ModelSpec::new(
            ModelVariant::Ar1,
            Outcome::StrideLength,
            PriorRegime::NonInformative,
        );
        let y = vec![1.0; 4];
        let b = [1.0, 0.0, 0.0, 0.0];
        assert!(log_likelihood(&m, &b, 0.0, Some(0.1), &x, &y).is_err());
        assert!(log_likelihood(&m, &b, 1.0, Some(1.0), &x, &y).is_err());
        assert!(log_likelihood(&m, &b, 1.0, Some(0.1), &x, &y[..3]).is_err());
    }
}
