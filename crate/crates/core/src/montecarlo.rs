//! Seeded Monte Carlo link simulation.
//!
//! A run is split into fixed-size chunks. Source labels and channel noise for
//! symbol `k` depend only on `(seed, k)`, and chunk tallies are integers merged
//! by addition, so results do not depend on scheduling or worker count.

use std::ops::{Add, AddAssign};

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{exact_rates, rates_ibp, rates_mqam, RateSet};
use crate::channel::{snr_to_sigma2, ChannelParams, NoiseSource, SOURCE_STREAM};
use crate::constellation::{
    analytic_energy, Constellation, ConstellationSpec, Normalization, Scheme,
};
use crate::modem::{Demodulator, PayloadFrame};
use crate::{Error, Result};

const CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolSource {
    /// Independent uniform labels.
    UniformRandomBits,
    /// Labels taken from the frames in order, repeated as needed.
    Frames(Vec<PayloadFrame>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub spec: ConstellationSpec,
    pub snr_db: f64,
    pub num_symbols: u64,
    pub seed: u64,
    pub source: SymbolSource,
}

impl McConfig {
    pub fn uniform(spec: ConstellationSpec, snr_db: f64, num_symbols: u64, seed: u64) -> Self {
        McConfig {
            spec,
            snr_db,
            num_symbols,
            seed,
            source: SymbolSource::UniformRandomBits,
        }
    }
}

/// Raw error tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct McCounts {
    pub symbols: u64,
    /// Decided label differs from the sent one.
    pub symbol_errors: u64,
    /// Prefix wrong (whatever the suffix).
    pub important_errors: u64,
    /// Prefix right, suffix wrong.
    pub unimportant_errors: u64,
    /// Prefix and suffix both wrong; a subset of `important_errors`.
    pub both_wrong: u64,
    pub important_bit_errors: u64,
    pub unimportant_bit_errors: u64,
}

impl Add for McCounts {
    type Output = McCounts;

    fn add(self, o: McCounts) -> McCounts {
        McCounts {
            symbols: self.symbols + o.symbols,
            symbol_errors: self.symbol_errors + o.symbol_errors,
            important_errors: self.important_errors + o.important_errors,
            unimportant_errors: self.unimportant_errors + o.unimportant_errors,
            both_wrong: self.both_wrong + o.both_wrong,
            important_bit_errors: self.important_bit_errors + o.important_bit_errors,
            unimportant_bit_errors: self.unimportant_bit_errors + o.unimportant_bit_errors,
        }
    }
}

impl AddAssign for McCounts {
    fn add_assign(&mut self, o: McCounts) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McResult {
    pub rates: RateSet,
    pub ber_important: f64,
    pub ber_unimportant: f64,
    /// Normal-approximation standard error of each rate.
    pub std_err: RateSet,
    pub counts: McCounts,
}

impl McResult {
    fn from_counts(counts: McCounts, suffix_bits: u32) -> Self {
        let n = counts.symbols as f64;
        let rate = |k: u64| k as f64 / n;
        let se = |p: f64| (p * (1.0 - p) / n).sqrt();
        let rates = RateSet {
            ser: rate(counts.symbol_errors),
            iser: rate(counts.important_errors),
            user: rate(counts.unimportant_errors),
        };
        McResult {
            rates,
            ber_important: counts.important_bit_errors as f64 / (2.0 * n),
            ber_unimportant: counts.unimportant_bit_errors as f64 / (f64::from(suffix_bits) * n),
            std_err: RateSet {
                ser: se(rates.ser),
                iser: se(rates.iser),
                user: se(rates.user),
            },
            counts,
        }
    }
}

/// Average symbol energy `E_s` of a built constellation.
pub fn symbol_energy(c: &Constellation) -> f64 {
    match c.spec().normalization {
        Normalization::UnitEnergy => 1.0,
        Normalization::FixedD(d) => analytic_energy(c.order(), c.alpha(), d),
    }
}

enum Labels {
    Uniform { seed: u64, shift: u32 },
    Sequence(Vec<u32>),
}

impl Labels {
    fn fill(&self, start: u64, out: &mut [u32]) {
        match self {
            Labels::Uniform { seed, shift } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(SOURCE_STREAM);
                rng.set_word_pos(u128::from(start) * 2);
                for l in out.iter_mut() {
                    *l = (rng.next_u64() >> shift) as u32;
                }
            }
            Labels::Sequence(seq) => {
                let len = seq.len() as u64;
                for (k, l) in out.iter_mut().enumerate() {
                    *l = seq[((start + k as u64) % len) as usize];
                }
            }
        }
    }
}

pub fn run(cfg: &McConfig) -> Result<McResult> {
    if cfg.num_symbols == 0 {
        return Err(Error::InvalidParameter(
            "num_symbols must be at least 1".into(),
        ));
    }
    let c = Constellation::build(cfg.spec)?;
    if c.alpha() == 0.0 {
        return Err(Error::ZeroAlpha(
            "Monte Carlo simulation (suffix bits are undecodable)",
        ));
    }
    let labels = match &cfg.source {
        SymbolSource::UniformRandomBits => Labels::Uniform {
            seed: cfg.seed,
            shift: 64 - c.bits_per_symbol(),
        },
        SymbolSource::Frames(frames) => {
            let mut seq = Vec::new();
            for f in frames {
                if f.order != c.order() {
                    return Err(Error::FrameMismatch {
                        order: c.order(),
                        reason: format!("frame was built for M = {}", f.order),
                    });
                }
                seq.extend(f.labels());
            }
            if seq.is_empty() {
                return Err(Error::InvalidParameter(
                    "frame source carries no symbols".into(),
                ));
            }
            Labels::Sequence(seq)
        }
    };
    let sigma2 = snr_to_sigma2(cfg.snr_db, symbol_energy(&c));
    let channel = if sigma2 > 0.0 {
        Some(ChannelParams::new(sigma2, cfg.seed)?)
    } else {
        None
    };
    let demod = Demodulator::new(&c);

    let chunks = cfg.num_symbols.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let start = k * CHUNK;
            let len = (cfg.num_symbols - start).min(CHUNK) as usize;
            simulate_chunk(&c, &demod, &labels, channel.as_ref(), start, len)
        })
        .reduce(McCounts::default, Add::add);
    Ok(McResult::from_counts(counts, c.suffix_bits()))
}

fn simulate_chunk(
    c: &Constellation,
    demod: &Demodulator<'_>,
    labels: &Labels,
    channel: Option<&ChannelParams>,
    start: u64,
    len: usize,
) -> McCounts {
    let mut sent = vec![0u32; len];
    labels.fill(start, &mut sent);
    let mut noise = channel.map(|p| NoiseSource::at(p, start));
    let mut counts = McCounts {
        symbols: len as u64,
        ..McCounts::default()
    };
    for &label in &sent {
        let p = c.point(label);
        let mut z = Complex64::new(p.i, p.q);
        if let Some(n) = noise.as_mut() {
            z += n.next_sample();
        }
        let decided = demod.decide(z);
        if decided == label {
            continue;
        }
        let prefix_diff = c.prefix_of(decided) ^ c.prefix_of(label);
        let suffix_diff = c.suffix_of(decided) ^ c.suffix_of(label);
        counts.symbol_errors += 1;
        counts.important_bit_errors += u64::from(prefix_diff.count_ones());
        counts.unimportant_bit_errors += u64::from(suffix_diff.count_ones());
        match (prefix_diff != 0, suffix_diff != 0) {
            (true, true) => {
                counts.important_errors += 1;
                counts.both_wrong += 1;
            }
            (true, false) => counts.important_errors += 1,
            (false, _) => counts.unimportant_errors += 1,
        }
    }
    counts
}

/// Cartesian grid of sweep cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub schemes: Vec<Scheme>,
    pub orders: Vec<u32>,
    pub alphas: Vec<f64>,
    pub snr_db: Vec<f64>,
}

impl SweepGrid {
    fn alphas_for(&self, scheme: Scheme) -> &[f64] {
        match scheme {
            Scheme::Ibp => &self.alphas,
            // alpha does not change conventional QAM; one pass per order
            Scheme::Mqam if self.alphas.is_empty() => &[],
            Scheme::Mqam => &[1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.schemes
            .iter()
            .map(|&s| self.alphas_for(s).len())
            .sum::<usize>()
            * self.orders.len()
            * self.snr_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in row-major order: scheme, order, alpha, SNR. Conventional
    /// QAM appears once per order and SNR, with alpha 1.
    pub fn cells(&self) -> Vec<(Scheme, u32, f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for &scheme in &self.schemes {
            for &order in &self.orders {
                for &alpha in self.alphas_for(scheme) {
                    for &snr in &self.snr_db {
                        out.push((scheme, order, alpha, snr));
                    }
                }
            }
        }
        out
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    pub scheme: Scheme,
    pub order: u32,
    /// Effective spread factor (1 for conventional QAM).
    pub alpha: f64,
    pub snr_db: f64,
    pub mc: McResult,
    pub analytic: RateSet,
    pub exact: RateSet,
}

pub fn evaluate_cell(
    scheme: Scheme,
    order: u32,
    alpha: f64,
    snr_db: f64,
    num_symbols: u64,
    seed: u64,
) -> Result<SweepRecord> {
    let spec = ConstellationSpec::new(scheme, order, alpha, Normalization::UnitEnergy)?;
    let c = Constellation::build(spec)?;
    let mc = run(&McConfig::uniform(spec, snr_db, num_symbols, seed))?;
    let analytic = match scheme {
        Scheme::Ibp => rates_ibp(order, spec.effective_alpha(), snr_db)?,
        Scheme::Mqam => rates_mqam(order, snr_db)?,
    };
    let exact = exact_rates(&c, snr_to_sigma2(snr_db, symbol_energy(&c)))?;
    Ok(SweepRecord {
        scheme,
        order,
        alpha: spec.effective_alpha(),
        snr_db,
        mc,
        analytic,
        exact,
    })
}

/// Evaluate every grid cell with the same seed, in grid order.
pub fn sweep(grid: &SweepGrid, num_symbols: u64, seed: u64) -> Result<Vec<SweepRecord>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    grid.cells()
        .into_par_iter()
        .map(|(scheme, order, alpha, snr)| {
            evaluate_cell(scheme, order, alpha, snr, num_symbols, seed)
        })
        .collect()
}

/// [`sweep`] on a dedicated pool of `workers` threads.
pub fn sweep_with_workers(
    grid: &SweepGrid,
    num_symbols: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<SweepRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| sweep(grid, num_symbols, seed))
}
