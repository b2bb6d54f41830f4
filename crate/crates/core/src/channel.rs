//! Baseband AWGN channel.
//!
//! Noise for symbol `k` is a pure function of `(seed, k)`: a ChaCha8 keystream
//! is positioned at a fixed word offset per symbol and two uniforms are turned
//! into an independent normal pair with the Box-Muller transform. Chunks of a
//! stream can therefore be processed in any order or on any number of workers.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::modem::SymbolStream;
use crate::{Error, Result};

/// Keystream used for channel noise.
pub(crate) const NOISE_STREAM: u64 = 0;
/// Keystream used for simulated source bits.
pub(crate) const SOURCE_STREAM: u64 = 1;

/// 32-bit keystream words consumed per symbol (two `u64` draws).
const WORDS_PER_SYMBOL: u128 = 4;

/// Convert an SNR in dB to the total complex noise variance, `E_s * 10^(-snr/10)`.
///
/// `snr_db = +inf` gives zero variance.
pub fn snr_to_sigma2(snr_db: f64, es: f64) -> f64 {
    es * 10f64.powf(-snr_db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    noise_variance: f64,
    pub seed: u64,
}

impl ChannelParams {
    /// `noise_variance` is the total complex variance; each axis gets half.
    pub fn new(noise_variance: f64, seed: u64) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::InvalidNoiseVariance(noise_variance));
        }
        Ok(ChannelParams {
            noise_variance,
            seed,
        })
    }

    pub fn from_snr_db(snr_db: f64, es: f64, seed: u64) -> Result<Self> {
        Self::new(snr_to_sigma2(snr_db, es), seed)
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Standard deviation of the noise on one axis, `sqrt(sigma2 / 2)`.
    pub fn axis_sigma(&self) -> f64 {
        (self.noise_variance / 2.0).sqrt()
    }
}

/// Deterministic per-symbol noise source.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    axis_sigma: f64,
}

impl NoiseSource {
    /// Source positioned at symbol index `start`.
    pub fn at(params: &ChannelParams, start: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(NOISE_STREAM);
        rng.set_word_pos(u128::from(start) * WORDS_PER_SYMBOL);
        NoiseSource {
            rng,
            axis_sigma: params.axis_sigma(),
        }
    }

    /// Noise sample for the next symbol.
    #[inline]
    pub fn next_sample(&mut self) -> Complex64 {
        let (a, b) = standard_normal_pair(&mut self.rng);
        Complex64::new(a * self.axis_sigma, b * self.axis_sigma)
    }
}

#[inline]
fn standard_normal_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    // 1 - u lies in (0, 1], keeping the logarithm finite
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Add AWGN to a stream whose first symbol has index 0.
pub fn awgn(tx: &SymbolStream, params: &ChannelParams) -> SymbolStream {
    awgn_at(tx, params, 0)
}

/// Add AWGN to a chunk whose first symbol has global index `start`.
pub fn awgn_at(tx: &SymbolStream, params: &ChannelParams, start: u64) -> SymbolStream {
    let mut noise = NoiseSource::at(params, start);
    SymbolStream {
        symbols: tx
            .symbols
            .iter()
            .map(|&s| s + noise.next_sample())
            .collect(),
    }
}
