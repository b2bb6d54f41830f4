//! Error-rate evaluation.
//!
//! Two independent routes:
//!
//! * closed-form nearest-boundary approximations ([`rates_ibp`],
//!   [`rates_mqam`]), and
//! * an exact evaluation from per-axis decision intervals
//!   ([`exact_rates`]), which uses the fact that both constellations are
//!   products of one level set and the noise is independent across axes.
//!
//! Noise convention: `sigma2` is the total complex noise variance and each
//! axis sees `sigma2 / 2`. The closed forms are written in terms of the
//! per-axis SNR `gamma = E_s / (sigma2 / 2)`, so their Q arguments are the
//! geometric distances divided by the per-axis noise deviation.

use serde::{Deserialize, Serialize};

use crate::constellation::{energy_factor, side_of, validate_order, Constellation};
use crate::{Error, Result};

/// Symbol, important-symbol and unimportant-symbol error rates.
///
/// `iser` counts symbols whose prefix is wrong; `user` counts symbols whose
/// prefix is right and suffix wrong.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub ser: f64,
    pub iser: f64,
    pub user: f64,
}

impl RateSet {
    pub fn clamped(self) -> Self {
        RateSet {
            ser: self.ser.clamp(0.0, 1.0),
            iser: self.iser.clamp(0.0, 1.0),
            user: self.user.clamp(0.0, 1.0),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.ser, self.iser, self.user]
    }
}

/// Gaussian upper tail `Q(x) = P(N(0,1) > x) = erfc(x / sqrt 2) / 2`.
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Per-axis SNR `E_s / (sigma2 / 2)` for an SNR given in dB.
pub fn axis_snr(snr_db: f64) -> f64 {
    2.0 * 10f64.powf(snr_db / 10.0)
}

/// Q argument of the prefix (sign) error on one axis: distance from the
/// innermost level, `d (1 - alpha + 2 alpha / sqrt M)`, over the noise
/// deviation, written in terms of `gamma = E_s / sigma_axis^2`.
pub fn iser_q_argument(order: u32, alpha: f64, gamma: f64) -> f64 {
    let side = (order as f64).sqrt();
    let inner = 1.0 - alpha + 2.0 * alpha / side;
    (inner * inner * gamma / energy_factor(order, alpha)).sqrt()
}

/// Q argument of a suffix error on one axis: `(d_min / 2) / sigma_axis`.
pub fn user_q_argument(order: u32, alpha: f64, gamma: f64) -> f64 {
    let m = order as f64;
    (4.0 * alpha * alpha * gamma / (m * energy_factor(order, alpha))).sqrt()
}

/// Q argument for conventional square QAM, `sqrt(3 gamma / (M - 1))`.
pub fn mqam_q_argument(order: u32, gamma: f64) -> f64 {
    (3.0 * gamma / (order as f64 - 1.0)).sqrt()
}

/// Per-axis error probabilities of the prefixed scheme before combining axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpAxisRates {
    /// Prefix error on one axis.
    pub important: f64,
    /// Suffix error on one axis.
    pub unimportant: f64,
}

pub fn ibp_axis_rates(order: u32, alpha: f64, snr_db: f64) -> Result<IbpAxisRates> {
    validate_order(order)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if alpha == 0.0 {
        return Err(Error::ZeroAlpha("closed-form suffix error rate"));
    }
    let gamma = axis_snr(snr_db);
    let side = side_of(order) as f64;
    Ok(IbpAxisRates {
        important: 2.0 / side * q_func(iser_q_argument(order, alpha, gamma)),
        unimportant: (2.0 - 4.0 / side) * q_func(user_q_argument(order, alpha, gamma)),
    })
}

/// Closed-form rates of the prefixed scheme.
pub fn rates_ibp(order: u32, alpha: f64, snr_db: f64) -> Result<RateSet> {
    let axis = ibp_axis_rates(order, alpha, snr_db)?;
    let (hi, hu) = (axis.important, axis.unimportant);
    let iser = 2.0 * hi - hi * hi;
    let user = 2.0 * hu - hu * hu;
    // one axis fails if its prefix fails, or its prefix holds and suffix fails
    let p1 = hu * (1.0 - hi) + hi;
    let ser = 2.0 * p1 - p1 * p1;
    Ok(RateSet { ser, iser, user }.clamped())
}

/// Closed-form rates of conventional Gray-coded square QAM whose prefix is
/// the two most significant bits of the in-phase Gray code.
pub fn rates_mqam(order: u32, snr_db: f64) -> Result<RateSet> {
    validate_order(order)?;
    let side = side_of(order) as f64;
    let q1 = q_func(mqam_q_argument(order, axis_snr(snr_db)));
    let iser = 6.0 / side * q1;
    let strip = side / 4.0;
    let quadrature = (2.0 * side - 2.0) / side * q1;
    let in_strip = 2.0 * (strip - 1.0) / strip * q1;
    let user = 1.0 - (1.0 - quadrature) * (1.0 - in_strip);
    let ser = user * (1.0 - iser) + iser;
    Ok(RateSet { ser, iser, user }.clamped())
}

/// Exact decision probabilities on one axis.
#[derive(Debug, Clone)]
pub struct AxisTransitions {
    levels: Vec<f64>,
    /// Row-major `P(decide j | sent i)`.
    matrix: Vec<f64>,
}

impl AxisTransitions {
    /// `levels` sorted ascending and strictly increasing; `sigma` is the
    /// per-axis noise deviation.
    pub fn new(levels: &[f64], sigma: f64) -> Self {
        let n = levels.len();
        let bounds: Vec<f64> = levels.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        let lower = |j: usize| {
            if j == 0 {
                f64::NEG_INFINITY
            } else {
                bounds[j - 1]
            }
        };
        let upper = |j: usize| if j + 1 == n { f64::INFINITY } else { bounds[j] };
        let mut matrix = vec![0.0; n * n];
        for (i, &x) in levels.iter().enumerate() {
            for j in 0..n {
                let (lo, hi) = (lower(j), upper(j));
                // each case written so no probability close to one is subtracted
                matrix[i * n + j] = if j == i {
                    1.0 - q_func((x - lo) / sigma) - q_func((hi - x) / sigma)
                } else if j > i {
                    q_func((lo - x) / sigma) - q_func((hi - x) / sigma)
                } else {
                    q_func((x - hi) / sigma) - q_func((x - lo) / sigma)
                };
            }
        }
        AxisTransitions {
            levels: levels.to_vec(),
            matrix,
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    #[inline]
    pub fn prob(&self, sent: usize, decided: usize) -> f64 {
        self.matrix[sent * self.levels.len() + decided]
    }

    /// Mean over levels of the probability of landing on the other side of
    /// zero.
    pub fn sign_flip_probability(&self) -> f64 {
        let n = self.levels.len();
        let total: f64 = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| (self.levels[j] > 0.0) != (self.levels[i] > 0.0))
                    .map(|j| self.prob(i, j))
                    .sum::<f64>()
            })
            .sum();
        total / n as f64
    }

    /// Mean over levels of the probability of any wrong decision.
    pub fn error_probability(&self) -> f64 {
        let n = self.levels.len();
        let total: f64 = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| self.prob(i, j))
                    .sum::<f64>()
            })
            .sum();
        total / n as f64
    }
}

/// Exact rates for equiprobable symbols, total complex noise variance `sigma2`.
///
/// Sums `P(decide (a', b') | sent (a, b)) = T[a][a'] T[b][b']` over every
/// erroneous decision and classifies it by the labels' prefixes.
pub fn exact_rates(c: &Constellation, sigma2: f64) -> Result<RateSet> {
    if c.alpha() == 0.0 {
        return Err(Error::ZeroAlpha("exact error rates"));
    }
    if sigma2 == 0.0 {
        return Ok(RateSet::default());
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::InvalidNoiseVariance(sigma2));
    }
    let levels: Vec<f64> = c.axis_levels().iter().map(|l| l.coordinate).collect();
    let t = AxisTransitions::new(&levels, (sigma2 / 2.0).sqrt());
    let side = levels.len();

    let (mut iser, mut user) = (0.0, 0.0);
    for a in 0..side {
        for b in 0..side {
            let sent = c.label_at(a, b);
            let prefix = c.prefix_of(sent);
            for a2 in 0..side {
                let pa = t.prob(a, a2);
                for b2 in 0..side {
                    if a2 == a && b2 == b {
                        continue;
                    }
                    let p = pa * t.prob(b, b2);
                    if c.prefix_of(c.label_at(a2, b2)) != prefix {
                        iser += p;
                    } else {
                        user += p;
                    }
                }
            }
        }
    }
    let m = c.order() as f64;
    let (iser, user) = (iser / m, user / m);
    Ok(RateSet {
        ser: iser + user,
        iser,
        user,
    }
    .clamped())
}
