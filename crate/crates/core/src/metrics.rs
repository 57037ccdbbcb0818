//! Spectral efficiency with hybrid combining and rate aggregation.

use std::sync::atomic::{AtomicBool, Ordering};

use log::debug;
use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_part, log2_det_hpd, pairwise_sum, real, CMat};

/// Condition number of `W^* W` above which the post-combining noise
/// covariance is pseudo-inverted instead of inverted.
pub const NOISE_COND_LIMIT: f64 = 1e12;

/// Spectral efficiency of a precoder/combiner pair at `snr = ρ/σ²`, with
/// `σ² = 1`:
///
/// `log2 det(I + (ρ/Ns) R_n^{-1} W^* H F F^* H^* W)`, `R_n = σ² W^* W`,
/// where `f = F_RF F_BB` and `w = W_RF W_BB`.
pub fn spectral_efficiency(h: &CMat, f: &CMat, w: &CMat, snr: f64, ns: usize) -> f64 {
    let whf = w.adjoint() * h * f;
    let wtw = w.adjoint() * w;
    rate_from_parts(&whf, &wtw, snr, ns)
}

static ILL_CONDITIONED_SEEN: AtomicBool = AtomicBool::new(false);

/// Spectral efficiency from `W^* H F` and `W^* W` directly.
///
/// The noise covariance is whitened through the eigendecomposition of
/// `W^* W`. Directions with eigenvalue below `λ_max / NOISE_COND_LIMIT` carry
/// no noise and no signal after combining and are dropped.
pub fn rate_from_parts(whf: &CMat, wtw: &CMat, snr: f64, ns: usize) -> f64 {
    let eig = SymmetricEigen::new(hermitian_part(wtw));
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    if lmax <= 0.0 {
        debug!("zero combiner, rate is 0");
        return 0.0;
    }
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > lmax / NOISE_COND_LIMIT)
        .collect();
    if keep.len() < eig.eigenvalues.len() {
        // Routine when OMP reselects a column, so only the first one is loud.
        let level = if ILL_CONDITIONED_SEEN.swap(true, Ordering::Relaxed) {
            log::Level::Debug
        } else {
            log::Level::Warn
        };
        log::log!(
            level,
            "combiner Gram matrix is ill-conditioned; pseudo-inverting noise covariance on {} of {} dimensions",
            keep.len(),
            eig.eigenvalues.len()
        );
    }
    // T = Q_k Λ_k^{-1/2}; whitened signal T^* W^* H F
    let mut t = CMat::zeros(wtw.nrows(), keep.len());
    for (dst, &i) in keep.iter().enumerate() {
        let col = eig.eigenvectors.column(i) * real(1.0 / eig.eigenvalues[i].sqrt());
        t.set_column(dst, &col);
    }
    let s = t.adjoint() * whf;
    let m = CMat::identity(keep.len(), keep.len()) + &s * s.adjoint() * real(snr / ns as f64);
    log2_det_hpd(&m).max(0.0)
}

/// Aggregated rate over Monte Carlo trials at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub snr_db: f64,
    pub rate_mean: f64,
    pub rate_median: f64,
    /// Half-width of the normal-approximation 95% confidence interval.
    pub rate_ci95: f64,
    pub trials: usize,
}

impl RatePoint {
    /// Aggregates `rates`, which must be in trial order for bit-identical
    /// output across runs.
    pub fn from_rates(snr_db: f64, rates: &[f64]) -> RatePoint {
        let n = rates.len();
        assert!(n >= 1, "at least one trial is required");
        let mean = pairwise_sum(rates) / n as f64;
        let mut sorted = rates.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("rates are finite"));
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let ci95 = if n > 1 {
            let dev: Vec<f64> = rates.iter().map(|r| (r - mean).powi(2)).collect();
            let var = pairwise_sum(&dev) / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        RatePoint {
            snr_db,
            rate_mean: mean,
            rate_median: median,
            rate_ci95: ci95,
            trials: n,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
