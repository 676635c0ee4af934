//! Constellations, seeded randomness and the Rayleigh block-fading channel
//! `Y = sqrt(snr / n_t) H S + N`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::linalg::{c64, kron_real, realify, Complex64, ComplexMatrix, RealMatrix};
use crate::silver::GeneratorMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstellationKind {
    Pam,
    Qam,
}

/// PAM or square QAM alphabet, scaled so every real coordinate has mean power 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    m: usize,
    scale: f64,
    levels: Vec<f64>,
}

impl Constellation {
    /// `m`-PAM: `{±1, ±3, ..., ±(m-1)} * scale`.
    pub fn pam(m: usize) -> Result<Self> {
        if m < 2 || m % 2 != 0 {
            return Err(Error::config("M", format!("PAM size must be even and >= 2, got {m}")));
        }
        Ok(Self::with_levels(ConstellationKind::Pam, m, m))
    }

    /// Square `m`-QAM whose coordinates are `sqrt(m)`-PAM.
    pub fn qam(m: usize) -> Result<Self> {
        let side = (m as f64).sqrt().round() as usize;
        if side * side != m || side < 2 || side % 2 != 0 {
            return Err(Error::config("M", format!("QAM size must be an even square >= 4, got {m}")));
        }
        Ok(Self::with_levels(ConstellationKind::Qam, m, side))
    }

    fn with_levels(kind: ConstellationKind, m: usize, side: usize) -> Self {
        // mean of (2i - side + 1)^2 over the alphabet is (side^2 - 1) / 3
        let scale = (1.5 / ((side * side - 1) as f64)).sqrt();
        let levels = (0..side)
            .map(|i| (2.0 * i as f64 - (side as f64 - 1.0)) * scale)
            .collect();
        Self {
            kind,
            m,
            scale,
            levels,
        }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Real alphabet each real symbol `s_i` is drawn from, ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn size_per_real(&self) -> usize {
        self.levels.len()
    }

    /// Alphabet points: real values for PAM, the complex grid for QAM.
    pub fn points(&self) -> Vec<Complex64> {
        match self.kind {
            ConstellationKind::Pam => self.levels.iter().map(|&x| c64(x, 0.0)).collect(),
            ConstellationKind::Qam => self
                .levels
                .iter()
                .flat_map(|&re| self.levels.iter().map(move |&im| c64(re, im)))
                .collect(),
        }
    }

    /// Mean of `s_i^2` over the real alphabet.
    pub fn mean_real_energy(&self) -> f64 {
        self.levels.iter().map(|x| x * x).sum::<f64>() / self.levels.len() as f64
    }

    /// Index of the level nearest to `x`, clipped to the alphabet.
    pub fn quantize(&self, x: f64) -> usize {
        let last = self.levels.len() - 1;
        let pos = ((x / self.scale + last as f64) / 2.0).round();
        if pos <= 0.0 {
            0
        } else {
            (pos as usize).min(last)
        }
    }

    /// Distinct nonzero differences `a - b` of the real alphabet, ascending.
    pub fn nonzero_differences(&self) -> Vec<f64> {
        let side = self.levels.len() as i64;
        (-(side - 1)..side)
            .filter(|&d| d != 0)
            .map(|d| 2.0 * d as f64 * self.scale)
            .collect()
    }

    pub fn random_indices(&self, n: usize, rng: &mut Prng) -> Vec<usize> {
        (0..n).map(|_| rng.below(self.levels.len())).collect()
    }

    pub fn symbols(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.levels[i]).collect()
    }
}

/// Seeded generator; `for_trial` derives an independent substream per trial.
#[derive(Debug, Clone)]
pub struct Prng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Self::for_trial(seed, 0)
    }

    pub fn for_trial(seed: u64, trial: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(trial);
        Self {
            seed,
            stream: trial,
            inner,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        // rejection sampling keeps the draw exactly uniform
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    /// Standard normal via Box-Muller.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Circularly symmetric complex Gaussian with unit variance.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let re = self.gaussian();
        let im = self.gaussian();
        c64(re * h, im * h)
    }

    pub fn complex_gaussian_matrix(&mut self, rows: usize, cols: usize) -> ComplexMatrix {
        let data = (0..rows * cols).map(|_| self.complex_gaussian()).collect();
        ComplexMatrix::new(rows, cols, data).expect("nonzero shape")
    }
}

/// One block-fading realization.
#[derive(Debug, Clone)]
pub struct ChannelInstance {
    /// `n_r x n_t`
    pub h: ComplexMatrix,
    /// Linear SNR per receive antenna.
    pub snr: f64,
}

impl ChannelInstance {
    pub fn n_t(&self) -> usize {
        self.h.cols()
    }

    pub fn n_r(&self) -> usize {
        self.h.rows()
    }

    /// `sqrt(snr / n_t)`
    pub fn gain(&self) -> f64 {
        (self.snr / self.n_t() as f64).sqrt()
    }
}

pub fn sample_channel(n_t: usize, n_r: usize, snr: f64, rng: &mut Prng) -> ChannelInstance {
    ChannelInstance {
        h: rng.complex_gaussian_matrix(n_r, n_t),
        snr,
    }
}

/// `sqrt(snr / n_t) H S` without noise.
pub fn transmit_noiseless(s: &ComplexMatrix, ch: &ChannelInstance) -> Result<ComplexMatrix> {
    Ok(ch.h.checked_mul(s)?.scale_real(ch.gain()))
}

/// `Y = sqrt(snr / n_t) H S + N` with unit-variance complex noise.
pub fn transmit(s: &ComplexMatrix, ch: &ChannelInstance, rng: &mut Prng) -> Result<ComplexMatrix> {
    let clean = transmit_noiseless(s, ch)?;
    let noise = rng.complex_gaussian_matrix(clean.rows(), clean.cols());
    Ok(&clean + &noise)
}

/// `H_eq = (I_T ⊗ realify(H)) G` using the physical (power-scaled) generator.
pub fn equivalent_channel(ch: &ChannelInstance, g: &GeneratorMatrix) -> Result<RealMatrix> {
    let n_t = ch.n_t();
    let rows = g.matrix().rows();
    if rows % (2 * n_t) != 0 {
        return Err(Error::DimensionMismatch(format!(
            "generator has {rows} rows, not a multiple of 2 n_t = {}",
            2 * n_t
        )));
    }
    let t = rows / (2 * n_t);
    let block = kron_real(&RealMatrix::identity(t), &realify(&ch.h));
    block.checked_mul(&g.physical())
}
