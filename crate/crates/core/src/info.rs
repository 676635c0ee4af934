//! Ergodic capacity, STBC mutual information and their low-SNR expansion
//! coefficients.

use rayon::prelude::*;

use crate::channel::{equivalent_channel, sample_channel, Prng};
use crate::code::LinearDispersionCode;
use crate::error::{Error, Result};
use crate::linalg::{log_det_spd, realify, ComplexMatrix, RealMatrix};
use crate::silver::GeneratorMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogUnit {
    Bits,
    Nats,
}

impl LogUnit {
    fn from_nats(self, x: f64) -> f64 {
        match self {
            LogUnit::Bits => x / std::f64::consts::LN_2,
            LogUnit::Nats => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    pub snr_db: f64,
    pub unit: LogUnit,
}

impl CapacityEstimate {
    pub fn from_samples(samples: &[f64], snr: f64, unit: LogUnit) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n).sqrt(),
            trials: samples.len(),
            snr_db: 10.0 * snr.log10(),
            unit,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `log det(I + snr/n_t H H^H)` in nats for one realization.
pub fn capacity_of(h: &ComplexMatrix, snr: f64) -> f64 {
    let c = snr / h.cols() as f64;
    // the smaller Gram matrix has the same nonzero spectrum
    let gram = if h.rows() <= h.cols() {
        h * &h.adjoint()
    } else {
        &h.adjoint() * h
    };
    let m = &ComplexMatrix::identity(gram.rows()) + &gram.scale_real(c);
    0.5 * log_det_spd(&realify(&m)).expect("I + c HH^H is positive definite")
}

/// `(1/2T) log det(I + snr/n_t H_eq^T H_eq)` in nats for one realization.
pub fn mutual_info_of(h_eq: &RealMatrix, n_t: usize, t: usize, snr: f64) -> f64 {
    let c = snr / n_t as f64;
    let gram = h_eq.gram();
    let m = &RealMatrix::identity(gram.rows()) + &gram.scale(c);
    log_det_spd(&m).expect("I + c H_eq^T H_eq is positive definite") / (2.0 * t as f64)
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < 100 {
        return Err(Error::config("trials", format!("at least 100 trials required, got {trials}")));
    }
    Ok(())
}

/// Per-trial capacities in `unit`; trial `i` draws its channel first from
/// substream `i` of `seed`.
pub fn capacity_samples(n_t: usize, n_r: usize, snr: f64, trials: usize, seed: u64, unit: LogUnit) -> Vec<f64> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = Prng::for_trial(seed, i as u64);
            let ch = sample_channel(n_t, n_r, snr, &mut rng);
            unit.from_nats(capacity_of(&ch.h, snr))
        })
        .collect()
}

/// Per-trial STBC mutual information, on the same channels as
/// [`capacity_samples`] for the same seed.
pub fn mutual_info_samples(
    g: &GeneratorMatrix,
    n_t: usize,
    n_r: usize,
    snr: f64,
    trials: usize,
    seed: u64,
    unit: LogUnit,
) -> Result<Vec<f64>> {
    let rows = g.matrix().rows();
    if rows % (2 * n_t) != 0 {
        return Err(Error::DimensionMismatch(format!(
            "generator with {rows} rows does not fit n_t = {n_t}"
        )));
    }
    let t = rows / (2 * n_t);
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = Prng::for_trial(seed, i as u64);
            let ch = sample_channel(n_t, n_r, snr, &mut rng);
            let h_eq = equivalent_channel(&ch, g)?;
            Ok(unit.from_nats(mutual_info_of(&h_eq, n_t, t, snr)))
        })
        .collect()
}

/// `E log2 det(I + snr/n_t H H^H)` with its standard error.
pub fn ergodic_capacity_mc(n_t: usize, n_r: usize, snr: f64, trials: usize, seed: u64) -> Result<CapacityEstimate> {
    check_trials(trials)?;
    let s = capacity_samples(n_t, n_r, snr, trials, seed, LogUnit::Bits);
    Ok(CapacityEstimate::from_samples(&s, snr, LogUnit::Bits))
}

/// `E (1/2T) log2 det(I + snr/n_t H_eq^T H_eq)` with its standard error.
pub fn stbc_mutual_info_mc(
    g: &GeneratorMatrix,
    n_t: usize,
    n_r: usize,
    snr: f64,
    trials: usize,
    seed: u64,
) -> Result<CapacityEstimate> {
    check_trials(trials)?;
    let s = mutual_info_samples(g, n_t, n_r, snr, trials, seed, LogUnit::Bits)?;
    Ok(CapacityEstimate::from_samples(&s, snr, LogUnit::Bits))
}

/// First and second SNR coefficients of the code's mutual information and of the
/// channel capacity (natural log).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionCoefficients {
    pub i1: f64,
    pub i2: f64,
    pub c1: f64,
    pub c2: f64,
}

/// `n_r Σ tr(A_i A_i^H) / (2 T n_t)` over the power-scaled weights.
pub fn expansion_i1(code: &LinearDispersionCode, n_r: usize) -> f64 {
    n_r as f64 * code.total_energy() / (2.0 * code.t() as f64 * code.n_t() as f64)
}

fn i2_sum(code: &LinearDispersionCode, n_r: usize, off_diagonal_weight: f64) -> f64 {
    let w = code.effective_weights();
    let adj: Vec<ComplexMatrix> = w.iter().map(ComplexMatrix::adjoint).collect();
    let nr = n_r as f64;
    let mut sum = 0.0;
    for i in 0..w.len() {
        for j in i..w.len() {
            let s = &(&w[i] * &adj[j]) + &(&w[j] * &adj[i]);
            // S is Hermitian: tr(S^2) = ||S||_F^2 and tr S is real
            let term = s.frobenius_norm_sqr() + nr * s.trace().re.powi(2);
            sum += if i == j { term } else { off_diagonal_weight * term };
        }
    }
    let (t, n_t) = (code.t() as f64, code.n_t() as f64);
    -nr / (16.0 * t * n_t * n_t) * sum
}

/// Second SNR coefficient of the mutual information (nats):
/// `-n_r / (16 T n_t^2) Σ_i Σ_j (tr(S_ij^2) + n_r (tr S_ij)^2)` over all ordered
/// pairs, `S_ij = A_i A_j^H + A_j A_i^H` on the power-scaled weights.
///
/// This is `-(1/4T)(1/n_t^2) E tr((H_eq^T H_eq)^2)`; each unordered pair `i != j`
/// enters twice.
pub fn expansion_i2(code: &LinearDispersionCode, n_r: usize) -> f64 {
    i2_sum(code, n_r, 2.0)
}

/// The same sum restricted to `j >= i` (each unordered pair once). Agrees with
/// [`expansion_i2`] only when every `S_ij`, `i != j`, vanishes.
pub fn expansion_i2_upper_triangle(code: &LinearDispersionCode, n_r: usize) -> f64 {
    i2_sum(code, n_r, 1.0)
}

/// `n_r`
pub fn capacity_c1(n_r: usize) -> f64 {
    n_r as f64
}

/// `-(1/2)(1/n_t)^2 E tr((H H^H)^2) = -n_r (n_r + n_t) / (2 n_t)`.
pub fn capacity_c2(n_t: usize, n_r: usize) -> f64 {
    let (t, r) = (n_t as f64, n_r as f64);
    -r * (r + t) / (2.0 * t)
}

pub fn expansion_coefficients(code: &LinearDispersionCode, n_r: usize) -> ExpansionCoefficients {
    ExpansionCoefficients {
        i1: expansion_i1(code, n_r),
        i2: expansion_i2(code, n_r),
        c1: capacity_c1(n_r),
        c2: capacity_c2(code.n_t(), n_r),
    }
}

/// Monte-Carlo estimate of a low-SNR polynomial coefficient of the mutual
/// information (nats), fitted per realization and averaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitEstimate {
    pub mean: f64,
    pub std_error: f64,
}

fn mean_and_error(x: &[f64]) -> FitEstimate {
    let e = CapacityEstimate::from_samples(x, 1.0, LogUnit::Nats);
    FitEstimate {
        mean: e.mean,
        std_error: e.std_error,
    }
}

/// Weights `w` with `b = Σ w_k f(x_k)` for the cubic `a x + b x^2 + c x^3`
/// interpolating three points.
fn quadratic_weights(x: [f64; 3]) -> [f64; 3] {
    // Lagrange form of f(x)/x through (x_k, f_k / x_k); b is its linear coefficient
    let mut w = [0.0; 3];
    for k in 0..3 {
        let (p, q) = ((k + 1) % 3, (k + 2) % 3);
        let denom = (x[k] - x[p]) * (x[k] - x[q]);
        // coefficient of x in (x - x_p)(x - x_q) / denom
        w[k] = -(x[p] + x[q]) / denom / x[k];
    }
    w
}

/// Second-order coefficient from a cubic-through-origin fit at three SNRs.
pub fn mc_second_order_fit(
    g: &GeneratorMatrix,
    n_t: usize,
    n_r: usize,
    snrs: [f64; 3],
    trials: usize,
    seed: u64,
) -> Result<FitEstimate> {
    let w = quadratic_weights(snrs);
    let per_snr: Vec<Vec<f64>> = snrs
        .iter()
        .map(|&s| mutual_info_samples(g, n_t, n_r, s, trials, seed, LogUnit::Nats))
        .collect::<Result<_>>()?;
    let b: Vec<f64> = (0..trials)
        .map(|i| (0..3).map(|k| w[k] * per_snr[k][i]).sum())
        .collect();
    Ok(mean_and_error(&b))
}

/// Central-difference slope of the mutual information (nats) at `snr`.
pub fn mc_slope(g: &GeneratorMatrix, n_t: usize, n_r: usize, snr: f64, trials: usize, seed: u64) -> Result<FitEstimate> {
    let h = snr / 2.0;
    let hi = mutual_info_samples(g, n_t, n_r, snr + h, trials, seed, LogUnit::Nats)?;
    let lo = mutual_info_samples(g, n_t, n_r, snr - h, trials, seed, LogUnit::Nats)?;
    let d: Vec<f64> = hi.iter().zip(&lo).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    Ok(mean_and_error(&d))
}
