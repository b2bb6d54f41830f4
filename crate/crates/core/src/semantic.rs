//! Semantic payloads over the link.
//!
//! A record is a short list of `(index, weight)` pairs, e.g. the top topics of
//! a document and their activations. Each entry is serialized as an 8-bit
//! index followed by an IEEE-754 binary32 weight, both MSB-first, and an
//! importance mask decides which of those bits ride in symbol prefixes.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::channel::{awgn, ChannelParams};
use crate::constellation::Constellation;
use crate::modem::{demodulate, frame, map_labels, modulate, Demodulator, SymbolStream};
use crate::{Error, Result};

pub const INDEX_BITS: usize = 8;
pub const WEIGHT_BITS: usize = 32;
pub const ENTRY_BITS: usize = INDEX_BITS + WEIGHT_BITS;
/// Size of the index space.
pub const INDEX_SPACE: usize = 1 << INDEX_BITS;
/// Tolerable bit error rate for a successful task.
pub const DEFAULT_TAU: f64 = 0.05;
/// Topics available to the synthetic payload generator.
pub const SYNTH_TOPICS: usize = 20;
/// Entries retained per synthetic record.
pub const SYNTH_TOP_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticRecord {
    pub entries: Vec<(u32, f32)>,
}

impl SemanticRecord {
    pub fn new(entries: Vec<(u32, f32)>) -> Result<Self> {
        let r = SemanticRecord { entries };
        r.validate()?;
        Ok(r)
    }

    /// Retained entries per sample.
    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &(index, weight) in &self.entries {
            if index as usize >= INDEX_SPACE {
                return Err(Error::IndexOutOfRange(index));
            }
            if !weight.is_finite() {
                return Err(Error::NonFiniteWeight(weight));
            }
            if !seen.insert(index) {
                return Err(Error::DuplicateIndex(index));
            }
        }
        Ok(())
    }

    pub fn index_set(&self) -> BTreeSet<u32> {
        self.entries.iter().map(|e| e.0).collect()
    }

    /// Weights scattered over the full index space, zero elsewhere.
    pub fn dense_weights(&self) -> Vec<f64> {
        let mut v = vec![0.0; INDEX_SPACE];
        for &(index, weight) in &self.entries {
            v[index as usize] += f64::from(weight);
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskStrategy {
    /// Index fields important, weight fields unimportant.
    IndexImportant,
    /// The first (dominant) entry is important in full, the others are not.
    TopicBranch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportanceMask {
    pub strategy: MaskStrategy,
    /// One flag per serialized bit; `true` marks an important bit.
    pub flags: Vec<bool>,
}

impl ImportanceMask {
    pub fn important_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Split bits into (important, unimportant) streams, order preserved.
    pub fn split(&self, bits: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let mut imp = Vec::with_capacity(self.important_count());
        let mut unimp = Vec::with_capacity(bits.len() - imp.capacity());
        for (&b, &f) in bits.iter().zip(&self.flags) {
            if f {
                imp.push(b);
            } else {
                unimp.push(b);
            }
        }
        (imp, unimp)
    }

    /// Inverse of [`split`](Self::split).
    pub fn merge(&self, important: &[u8], unimportant: &[u8]) -> Vec<u8> {
        let (mut i, mut u) = (important.iter(), unimportant.iter());
        self.flags
            .iter()
            .map(|&f| {
                if f {
                    *i.next().unwrap_or(&0)
                } else {
                    *u.next().unwrap_or(&0)
                }
            })
            .collect()
    }
}

fn push_bits(value: u32, width: usize, out: &mut Vec<u8>) {
    out.extend((0..width).rev().map(|k| ((value >> k) & 1) as u8));
}

fn read_bits(bits: &[u8]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | u32::from(b & 1))
}

pub fn serialize(
    record: &SemanticRecord,
    strategy: MaskStrategy,
) -> Result<(Vec<u8>, ImportanceMask)> {
    record.validate()?;
    let mut bits = Vec::with_capacity(record.k() * ENTRY_BITS);
    let mut flags = Vec::with_capacity(record.k() * ENTRY_BITS);
    for (pos, &(index, weight)) in record.entries.iter().enumerate() {
        push_bits(index, INDEX_BITS, &mut bits);
        push_bits(weight.to_bits(), WEIGHT_BITS, &mut bits);
        match strategy {
            MaskStrategy::IndexImportant => {
                flags.extend(std::iter::repeat_n(true, INDEX_BITS));
                flags.extend(std::iter::repeat_n(false, WEIGHT_BITS));
            }
            MaskStrategy::TopicBranch => flags.extend(std::iter::repeat_n(pos == 0, ENTRY_BITS)),
        }
    }
    Ok((bits, ImportanceMask { strategy, flags }))
}

/// A received record. Indices may repeat after corruption.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedRecord {
    pub record: SemanticRecord,
    /// Entries whose weight decoded to NaN or infinity and was zeroed.
    pub sanitized: Vec<usize>,
}

pub fn deserialize(bits: &[u8]) -> Result<DecodedRecord> {
    if !bits.len().is_multiple_of(ENTRY_BITS) {
        return Err(Error::BitLength(bits.len(), ENTRY_BITS));
    }
    let mut entries = Vec::with_capacity(bits.len() / ENTRY_BITS);
    let mut sanitized = Vec::new();
    for (pos, chunk) in bits.chunks_exact(ENTRY_BITS).enumerate() {
        let index = read_bits(&chunk[..INDEX_BITS]);
        let mut weight = f32::from_bits(read_bits(&chunk[INDEX_BITS..]));
        if !weight.is_finite() {
            weight = 0.0;
            sanitized.push(pos);
        }
        entries.push((index, weight));
    }
    Ok(DecodedRecord {
        record: SemanticRecord { entries },
        sanitized,
    })
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cos_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    // sqrt(x * x) == x in IEEE arithmetic, so identical inputs give exactly 1
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trial {
    pub task_success: bool,
    pub ber: f64,
}

/// Fraction of trials that succeed with a bit error rate below `tau`.
/// Zero for an empty list.
pub fn task_accuracy(trials: &[Trial], tau: f64) -> f64 {
    if trials.is_empty() {
        return 0.0;
    }
    let ok = trials
        .iter()
        .filter(|t| t.task_success && t.ber < tau)
        .count();
    ok as f64 / trials.len() as f64
}

/// Per-point usage counts, indexed by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HeatmapCounts {
    pub counts: Vec<u64>,
}

impl HeatmapCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Normalized usage per grid cell `i_level * side + q_level`, so that
    /// heatmaps under different label maps of the same geometry line up.
    pub fn grid_distribution(&self, c: &Constellation) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        let side = c.side();
        let mut out = vec![0.0; side * side];
        for p in c.points() {
            out[p.i_level * side + p.q_level] = self.counts[p.label as usize] as f64 / total;
        }
        out
    }
}

pub fn usage_heatmap(stream: &SymbolStream, c: &Constellation) -> Result<HeatmapCounts> {
    let demod = Demodulator::new(c);
    let mut counts = vec![0u64; c.order() as usize];
    for z in &stream.symbols {
        let label = demod.decide(*z);
        let p = c.point(label);
        if p.i != z.re || p.q != z.im {
            return Err(Error::OffConstellation(z.re, z.im));
        }
        counts[label as usize] += 1;
    }
    Ok(HeatmapCounts { counts })
}

/// Total-variation distance between two heatmaps over the same grid.
pub fn heatmap_distance(
    a: &HeatmapCounts,
    ca: &Constellation,
    b: &HeatmapCounts,
    cb: &Constellation,
) -> Result<f64> {
    if ca.side() != cb.side() {
        return Err(Error::LengthMismatch(ca.side(), cb.side()));
    }
    let (pa, pb) = (a.grid_distribution(ca), b.grid_distribution(cb));
    Ok(0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Synthetic records with [`SYNTH_TOPICS`] topics and [`SYNTH_TOP_K`] entries each.
pub fn synth_payload(
    num_records: usize,
    concentration: f64,
    seed: u64,
) -> Result<Vec<SemanticRecord>> {
    synth_payload_with(num_records, concentration, seed, SYNTH_TOPICS, SYNTH_TOP_K)
}

/// Draw records whose indices follow a Zipf-like law `P(t) ~ (t + 1)^-concentration`
/// (sampled without replacement inside a record) and whose weights are a
/// flat Dirichlet draw sorted so the first drawn index gets the largest weight.
pub fn synth_payload_with(
    num_records: usize,
    concentration: f64,
    seed: u64,
    topics: usize,
    k: usize,
) -> Result<Vec<SemanticRecord>> {
    if !(concentration.is_finite() && concentration > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "concentration must be positive, got {concentration}"
        )));
    }
    if k == 0 || k > topics || topics > INDEX_SPACE {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {k} of {topics} topics"
        )));
    }
    let base: Vec<f64> = (0..topics)
        .map(|t| ((t + 1) as f64).powf(-concentration))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(num_records);
    for _ in 0..num_records {
        let mut weights = base.clone();
        let mut indices = Vec::with_capacity(k);
        for _ in 0..k {
            let dist = WeightedIndex::new(&weights)
                .map_err(|e| Error::InvalidParameter(format!("topic weights: {e}")))?;
            let t = dist.sample(&mut rng);
            weights[t] = 0.0;
            indices.push(t as u32);
        }
        let mut activations: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
        let sum: f64 = activations.iter().sum();
        activations.iter_mut().for_each(|a| *a /= sum);
        activations.sort_by(|a, b| b.total_cmp(a));
        records.push(SemanticRecord {
            entries: indices
                .into_iter()
                .zip(activations.into_iter().map(|a| a as f32))
                .collect(),
        });
    }
    Ok(records)
}

/// Bits, mask and per-record bit lengths for a whole payload.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPayload {
    pub bits: Vec<u8>,
    pub mask: ImportanceMask,
    pub record_bits: Vec<usize>,
}

pub fn encode_payload(
    records: &[SemanticRecord],
    strategy: MaskStrategy,
) -> Result<EncodedPayload> {
    let mut bits = Vec::new();
    let mut flags = Vec::new();
    let mut record_bits = Vec::with_capacity(records.len());
    for r in records {
        let (b, m) = serialize(r, strategy)?;
        record_bits.push(b.len());
        bits.extend(b);
        flags.extend(m.flags);
    }
    Ok(EncodedPayload {
        bits,
        mask: ImportanceMask { strategy, flags },
        record_bits,
    })
}

/// Everything measured on one pass of a payload through the link.
#[derive(Debug, Clone)]
pub struct LinkOutcome {
    pub decoded: Vec<DecodedRecord>,
    pub cos_sims: Vec<f64>,
    pub trials: Vec<Trial>,
    pub ber_important: f64,
    pub ber_unimportant: f64,
    pub symbols: usize,
    pub heatmap: HeatmapCounts,
}

impl LinkOutcome {
    pub fn mean_cos_sim(&self) -> f64 {
        if self.cos_sims.is_empty() {
            return 0.0;
        }
        self.cos_sims.iter().sum::<f64>() / self.cos_sims.len() as f64
    }

    pub fn task_accuracy(&self, tau: f64) -> f64 {
        task_accuracy(&self.trials, tau)
    }

    pub fn sanitized_weights(&self) -> usize {
        self.decoded.iter().map(|d| d.sanitized.len()).sum()
    }
}

fn mismatches(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Serialize, frame, modulate, pass through the channel (`None` for a
/// noiseless link), demodulate and decode a payload.
pub fn transmit_payload(
    records: &[SemanticRecord],
    strategy: MaskStrategy,
    c: &Constellation,
    channel: Option<&ChannelParams>,
) -> Result<LinkOutcome> {
    let enc = encode_payload(records, strategy)?;
    let (imp, unimp) = enc.mask.split(&enc.bits);
    let tx_frame = frame(&imp, &unimp, c.order())?;
    let tx = modulate(&tx_frame, c)?;
    let heatmap = usage_heatmap(&tx, c)?;
    let rx = match channel {
        Some(p) => awgn(&tx, p),
        None => tx.clone(),
    };
    let rx_frame = demodulate(&rx, c).into_frame(tx_frame.pad_imp, tx_frame.pad_unimp);
    let (imp_rx, unimp_rx) = rx_frame.deframe();
    let bits_rx = enc.mask.merge(&imp_rx, &unimp_rx);

    let mut decoded = Vec::with_capacity(records.len());
    let mut cos_sims = Vec::with_capacity(records.len());
    let mut trials = Vec::with_capacity(records.len());
    let mut offset = 0;
    for (r, &len) in records.iter().zip(&enc.record_bits) {
        let sent = &enc.bits[offset..offset + len];
        let got = &bits_rx[offset..offset + len];
        offset += len;
        let d = deserialize(got)?;
        cos_sims.push(cos_sim(&r.dense_weights(), &d.record.dense_weights())?);
        trials.push(Trial {
            task_success: d.record.index_set() == r.index_set(),
            ber: ratio(mismatches(sent, got), len),
        });
        decoded.push(d);
    }

    Ok(LinkOutcome {
        decoded,
        cos_sims,
        trials,
        ber_important: ratio(mismatches(&imp, &imp_rx), imp.len()),
        ber_unimportant: ratio(mismatches(&unimp, &unimp_rx), unimp.len()),
        symbols: tx.len(),
        heatmap,
    })
}

/// Heatmap of a label sequence, without going through framing.
pub fn label_heatmap(labels: &[u32], c: &Constellation) -> Result<HeatmapCounts> {
    usage_heatmap(&map_labels(labels, c), c)
}
