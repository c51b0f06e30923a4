//! AR(1) error covariance and its tridiagonal precision.
//!
//! With innovation variance `s²`, the stationary AR(1) covariance is
//! `s² φ^|i-j| / (1 - φ²)`. Its inverse is `Q / s²` where `Q` is tridiagonal:
//!
//! ```text
//! Q = | 1    -φ                      |
//!     | -φ  1+φ²  -φ                 |
//!     |       ...  ...  ...          |
//!     |            -φ   1+φ²   -φ    |
//!     |                  -φ     1    |
//! ```
//!
//! (`Q = 1 - φ²` when `n = 1`) and `ln det(cov) = n ln s² - ln(1 - φ²)`.
//! The two covariance forms below differ only in `s²`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum CovarianceForm {
    /// `σ² φ^|i-j| / (1 - φ²)`: σ is the innovation standard deviation.
    #[default]
    Stationary,
    /// `σ² (1 - φ²) φ^|i-j|`: σ is close to the marginal standard deviation.
    /// Kept for compatibility with fits produced by the original model code.
    Supplement,
}

impl CovarianceForm {
    pub fn label(self) -> &'static str {
        match self {
            CovarianceForm::Stationary => "stationary",
            CovarianceForm::Supplement => "supplement",
        }
    }

    /// Innovation variance `s²` implied by `(φ, σ)`.
    pub fn innovation_variance(self, phi: f64, sigma: f64) -> f64 {
        match self {
            CovarianceForm::Stationary => sigma * sigma,
            CovarianceForm::Supplement => {
                let k = 1.0 - phi * phi;
                sigma * sigma * k * k
            }
        }
    }

    /// Marginal variance of a single error term.
    pub fn marginal_variance(self, phi: f64, sigma: f64) -> f64 {
        self.innovation_variance(phi, sigma) / (1.0 - phi * phi)
    }
}

impl fmt::Display for CovarianceForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CovarianceForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stationary" | "default" => Ok(CovarianceForm::Stationary),
            "supplement" | "compat" | "compatibility" => Ok(CovarianceForm::Supplement),
            other => Err(Error::InvalidConfig(format!(
                "unknown covariance form `{other}`"
            ))),
        }
    }
}

pub(crate) fn check_phi(phi: f64) -> Result<()> {
    if phi.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::PhiOutOfRange(phi))
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveScale(sigma))
    }
}

/// Dense `n × n` error covariance.
pub fn ar1_covariance(
    phi: f64,
    sigma: f64,
    n: usize,
    form: CovarianceForm,
) -> Result<DMatrix<f64>> {
    check_phi(phi)?;
    check_sigma(sigma)?;
    if n == 0 {
        return Err(Error::DimensionMismatch(
            "covariance of an empty series".into(),
        ));
    }
    let scale = form.marginal_variance(phi, sigma);
    let mut powers = vec![1.0; n];
    for k in 1..n {
        powers[k] = powers[k - 1] * phi;
    }
    Ok(DMatrix::from_fn(n, n, |i, j| scale * powers[i.abs_diff(j)]))
}

/// `cov⁻¹ v` in O(n) using the tridiagonal precision.
pub fn ar1_precision_apply(
    phi: f64,
    sigma: f64,
    v: &[f64],
    form: CovarianceForm,
) -> Result<Vec<f64>> {
    check_phi(phi)?;
    check_sigma(sigma)?;
    let s2 = form.innovation_variance(phi, sigma);
    let mut out = tridiagonal_apply(phi, v);
    for x in &mut out {
        *x /= s2;
    }
    Ok(out)
}

/// `Q v` for the unscaled AR(1) precision `Q`.
pub fn tridiagonal_apply(phi: f64, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    match n {
        0 => Vec::new(),
        1 => vec![(1.0 - phi * phi) * v[0]],
        _ => {
            let interior = 1.0 + phi * phi;
            (0..n)
                .map(|t| {
                    let diag = if t == 0 || t == n - 1 { 1.0 } else { interior };
                    let mut x = diag * v[t];
                    if t > 0 {
                        x -= phi * v[t - 1];
                    }
                    if t + 1 < n {
                        x -= phi * v[t + 1];
                    }
                    x
                })
                .collect()
        }
    }
}

/// `rᵀ Q r` through the innovations: `(1-φ²) r₁² + Σ (r_t - φ r_{t-1})²`.
pub fn quadratic_form(phi: f64, r: &[f64]) -> f64 {
    let Some(&first) = r.first() else {
        return 0.0;
    };
    let mut acc = (1.0 - phi * phi) * first * first;
    for w in r.windows(2) {
        let e = w[1] - phi * w[0];
        acc += e * e;
    }
    acc
}

/// `ln det` of the `n × n` covariance.
pub fn log_determinant(phi: f64, sigma: f64, n: usize, form: CovarianceForm) -> f64 {
    let s2 = form.innovation_variance(phi, sigma);
    n as f64 * math::ln(s2) - math::ln_1p(-phi * phi)
}

/// Lag moments of a data matrix `Z` so that `Zᵀ Q(φ) Z` is available for
/// any φ in O(k²) instead of O(n k²):
///
/// `Zᵀ Q Z = M₀ - φ M₁ + φ² M₂`, with `M₀ = ZᵀZ`,
/// `M₁ = Σ_t (z_t z_{t+1}ᵀ + z_{t+1} z_tᵀ)` and `M₂ = Σ_t d_t z_t z_tᵀ`,
/// where `d_t` is 1 in the interior, 0 at the two ends and -1 when `n = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaggedGram {
    m0: DMatrix<f64>,
    m1: DMatrix<f64>,
    m2: DMatrix<f64>,
    n: usize,
}

impl LaggedGram {
    pub fn new(z: &DMatrix<f64>) -> Self {
        let n = z.nrows();
        let k = z.ncols();
        let m0 = z.transpose() * z;
        let mut m1 = DMatrix::<f64>::zeros(k, k);
        let mut m2 = DMatrix::<f64>::zeros(k, k);
        if n >= 2 {
            let head = z.rows(0, n - 1);
            let tail = z.rows(1, n - 1);
            let cross = head.transpose() * tail;
            m1 = &cross + cross.transpose();
            if n >= 3 {
                let inner = z.rows(1, n - 2);
                m2 = inner.transpose() * inner;
            }
        } else if n == 1 {
            m2 = -&m0;
        }
        LaggedGram { m0, m1, m2, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m0.nrows()
    }

    /// `Zᵀ Q(φ) Z`.
    pub fn at(&self, phi: f64) -> DMatrix<f64> {
        &self.m0 - &self.m1 * phi + &self.m2 * (phi * phi)
    }

    /// Single entry of `Zᵀ Q(φ) Z`.
    pub fn entry(&self, i: usize, j: usize, phi: f64) -> f64 {
        self.m0[(i, j)] - phi * self.m1[(i, j)] + phi * phi * self.m2[(i, j)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_inverse(phi: f64, sigma: f64, n: usize, form: CovarianceForm) -> DMatrix<f64> {
        ar1_covariance(phi, sigma, n, form)
            .unwrap()
            .cholesky()
            .expect("spd")
            .inverse()
    }

    #[test]
    fn white_noise_is_identity() {
        let c = ar1_covariance(0.0, 1.0, 3, CovarianceForm::Stationary).unwrap();
        assert_eq!(c, DMatrix::identity(3, 3));
        let v = [0.3, -1.0, 2.0];
        assert_eq!(
            ar1_precision_apply(0.0, 1.0, &v, CovarianceForm::Stationary).unwrap(),
            v.to_vec()
        );
    }

    #[test]
    fn two_by_two_forms() {
        // 1/(1-0.25) = 4/3, 0.5 * 4/3 = 2/3
        let c = ar1_covariance(0.5, 1.0, 2, CovarianceForm::Stationary).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[4.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0]);
        assert!((c - want).abs().max() < 1e-15);
        // (1-0.25) = 0.75, 0.75 * 0.5 = 0.375
        let c = ar1_covariance(0.5, 1.0, 2, CovarianceForm::Supplement).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.75, 0.375, 0.375, 0.75]);
        assert!((c - want).abs().max() < 1e-15);
    }

    #[test]
    fn scalar_precision() {
        let (phi, sigma) = (0.6, 1.7);
        let got = ar1_precision_apply(phi, sigma, &[2.5], CovarianceForm::Stationary).unwrap();
        assert!((got[0] - 2.5 * (1.0 - phi * phi) / (sigma * sigma)).abs() < 1e-15);
    }

    #[test]
    fn precision_matches_dense_inverse_n6() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        for form in [CovarianceForm::Stationary, CovarianceForm::Supplement] {
            let fast = ar1_precision_apply(0.7, 1.3, &v, form).unwrap();
            let dense = dense_inverse(0.7, 1.3, 6, form) * nalgebra::DVector::from_column_slice(&v);
            let scale = dense.amax();
            for (a, b) in fast.iter().zip(dense.iter()) {
                assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn log_det_matches_cholesky() {
        for &(phi, sigma, n) in &[
            (0.0, 1.0, 4),
            (0.9, 0.3, 12),
            (-0.5, 2.0, 1),
            (0.3, 0.05, 30),
        ] {
            for form in [CovarianceForm::Stationary, CovarianceForm::Supplement] {
                let l = ar1_covariance(phi, sigma, n, form)
                    .unwrap()
                    .cholesky()
                    .unwrap();
                let dense: f64 = l.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
                assert!((log_determinant(phi, sigma, n, form) - dense).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn phi_bounds_rejected() {
        assert_eq!(
            ar1_covariance(1.0, 1.0, 2, CovarianceForm::Stationary),
            Err(Error::PhiOutOfRange(1.0))
        );
        assert!(ar1_precision_apply(-1.2, 1.0, &[1.0], CovarianceForm::Stationary).is_err());
        assert!(ar1_precision_apply(0.2, 0.0, &[1.0], CovarianceForm::Stationary).is_err());
    }

    #[test]
    fn lagged_gram_matches_direct_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1usize, 2, 3, 17] {
            let z = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
            let g = LaggedGram::new(&z);
            for phi in [-0.8, 0.0, 0.45] {
                let mut qz = DMatrix::zeros(n, 3);
                for j in 0..3 {
                    let col: Vec<f64> = z.column(j).iter().copied().collect();
                    let out = tridiagonal_apply(phi, &col);
                    for i in 0..n {
                        qz[(i, j)] = out[i];
                    }
                }
                let direct = z.transpose() * qz;
                assert!((g.at(phi) - direct).abs().max() < 1e-12, "n={n} phi={phi}");
            }
        }
    }

    #[test]
    fn quadratic_form_matches_tridiagonal() {
        let r = [0.2, -0.4, 1.1, 0.0, 0.7];
        let qr = tridiagonal_apply(0.35, &r);
        let direct: f64 = r.iter().zip(&qr).map(|(a, b)| a * b).sum();
        assert!((quadratic_form(0.35, &r) - direct).abs() < 1e-14);
    }
}
