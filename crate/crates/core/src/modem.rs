//! Bit framing, symbol mapping and hard-decision demodulation.
//!
//! Every symbol carries two important bits in its prefix and `n - 2`
//! unimportant bits in its suffix. The two streams are framed separately and
//! zero-padded so they run out on the same symbol.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, PREFIX_BITS};
use crate::{Error, Result};

/// Importance-tagged bit streams, padded to a whole number of symbols.
///
/// Bits are stored one per byte, each 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadFrame {
    pub order: u32,
    pub important_bits: Vec<u8>,
    pub unimportant_bits: Vec<u8>,
    /// Zero bits appended to the important stream.
    pub pad_imp: usize,
    /// Zero bits appended to the unimportant stream.
    pub pad_unimp: usize,
}

impl PayloadFrame {
    pub fn symbol_count(&self) -> usize {
        self.important_bits.len() / PREFIX_BITS as usize
    }

    fn suffix_bits(&self) -> usize {
        (self.order.trailing_zeros() - PREFIX_BITS) as usize
    }

    /// Original streams with the padding stripped.
    pub fn deframe(&self) -> (Vec<u8>, Vec<u8>) {
        let imp = self.important_bits.len() - self.pad_imp;
        let unimp = self.unimportant_bits.len() - self.pad_unimp;
        (
            self.important_bits[..imp].to_vec(),
            self.unimportant_bits[..unimp].to_vec(),
        )
    }

    /// Symbol labels: prefix from the important stream, suffix from the
    /// unimportant one, both MSB-first.
    pub fn labels(&self) -> Vec<u32> {
        let s = self.suffix_bits();
        self.important_bits
            .chunks_exact(PREFIX_BITS as usize)
            .zip(self.unimportant_bits.chunks_exact(s))
            .map(|(p, u)| (pack(p) << s) | pack(u))
            .collect()
    }
}

fn pack(bits: &[u8]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | u32::from(b))
}

fn unpack(value: u32, width: usize, out: &mut Vec<u8>) {
    out.extend((0..width).rev().map(|k| ((value >> k) & 1) as u8));
}

fn check_bits(bits: &[u8]) -> Result<()> {
    match bits.iter().find(|&&b| b > 1) {
        Some(&b) => Err(Error::InvalidBit(b)),
        None => Ok(()),
    }
}

/// Zero-pad both streams to the smallest symbol count that carries them.
pub fn frame(important: &[u8], unimportant: &[u8], order: u32) -> Result<PayloadFrame> {
    crate::constellation::validate_order(order)?;
    check_bits(important)?;
    check_bits(unimportant)?;
    let p = PREFIX_BITS as usize;
    let s = (order.trailing_zeros() - PREFIX_BITS) as usize;
    let symbols = important
        .len()
        .div_ceil(p)
        .max(unimportant.len().div_ceil(s));

    let mut important_bits = important.to_vec();
    important_bits.resize(symbols * p, 0);
    let mut unimportant_bits = unimportant.to_vec();
    unimportant_bits.resize(symbols * s, 0);
    Ok(PayloadFrame {
        order,
        pad_imp: important_bits.len() - important.len(),
        pad_unimp: unimportant_bits.len() - unimportant.len(),
        important_bits,
        unimportant_bits,
    })
}

/// Complex baseband symbols, `I + jQ`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolStream {
    pub symbols: Vec<Complex64>,
}

impl SymbolStream {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Map label sequence to points.
pub fn map_labels(labels: &[u32], c: &Constellation) -> SymbolStream {
    SymbolStream {
        symbols: labels
            .iter()
            .map(|&l| {
                let p = c.point(l);
                Complex64::new(p.i, p.q)
            })
            .collect(),
    }
}

pub fn modulate(frame: &PayloadFrame, c: &Constellation) -> Result<SymbolStream> {
    if frame.order != c.order() {
        return Err(Error::FrameMismatch {
            order: c.order(),
            reason: format!("frame was built for M = {}", frame.order),
        });
    }
    let s = c.suffix_bits() as usize;
    let n_sym = frame.symbol_count();
    if frame.important_bits.len() != n_sym * PREFIX_BITS as usize
        || frame.unimportant_bits.len() != n_sym * s
    {
        return Err(Error::FrameMismatch {
            order: c.order(),
            reason: format!(
                "{} important and {} unimportant bits do not split into whole symbols",
                frame.important_bits.len(),
                frame.unimportant_bits.len()
            ),
        });
    }
    check_bits(&frame.important_bits)?;
    check_bits(&frame.unimportant_bits)?;
    Ok(map_labels(&frame.labels(), c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    /// Prefix and suffix both decided.
    Full,
    /// `alpha = 0`: suffix levels coincide, only the prefix is meaningful and
    /// suffix bits are reported as zero.
    PrefixOnly,
}

/// Nearest-level decisions on one axis.
#[derive(Debug, Clone)]
pub struct AxisDecider {
    /// Midpoints between consecutive levels.
    boundaries: Vec<f64>,
}

impl AxisDecider {
    pub fn new(levels: &[f64]) -> Self {
        AxisDecider {
            boundaries: levels.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect(),
        }
    }

    /// Index of the nearest level. A value exactly on a boundary goes to the
    /// level with the smaller magnitude; at a boundary of zero, to the
    /// positive side.
    #[inline]
    pub fn decide(&self, x: f64) -> usize {
        self.boundaries
            .partition_point(|&b| b < x || (b == x && b <= 0.0))
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }
}

/// Per-axis maximum-likelihood detector for a constellation.
///
/// Both schemes are Cartesian products of one level set, so nearest-point
/// detection over all M points splits exactly into two nearest-level
/// decisions.
#[derive(Debug, Clone)]
pub struct Demodulator<'a> {
    constellation: &'a Constellation,
    axis: AxisDecider,
    mode: DecodeMode,
}

impl<'a> Demodulator<'a> {
    pub fn new(constellation: &'a Constellation) -> Self {
        let levels: Vec<f64> = constellation
            .axis_levels()
            .iter()
            .map(|l| l.coordinate)
            .collect();
        let mode = if constellation.alpha() == 0.0 {
            DecodeMode::PrefixOnly
        } else {
            DecodeMode::Full
        };
        Demodulator {
            constellation,
            axis: AxisDecider::new(&levels),
            mode,
        }
    }

    pub fn mode(&self) -> DecodeMode {
        self.mode
    }

    pub fn axis(&self) -> &AxisDecider {
        &self.axis
    }

    /// Decided label for one received sample.
    #[inline]
    pub fn decide(&self, z: Complex64) -> u32 {
        let c = self.constellation;
        let label = c.label_at(self.axis.decide(z.re), self.axis.decide(z.im));
        match self.mode {
            DecodeMode::Full => label,
            DecodeMode::PrefixOnly => c.prefix_of(label) << c.suffix_bits(),
        }
    }
}

/// Output of [`demodulate`]: the decided labels and the bit streams they
/// carry. The streams still include any transmit-side padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    pub labels: Vec<u32>,
    pub important_bits: Vec<u8>,
    pub unimportant_bits: Vec<u8>,
    pub mode: DecodeMode,
    pub order: u32,
}

impl Demodulated {
    /// Attach the transmit-side pad counts.
    pub fn into_frame(self, pad_imp: usize, pad_unimp: usize) -> PayloadFrame {
        PayloadFrame {
            order: self.order,
            important_bits: self.important_bits,
            unimportant_bits: self.unimportant_bits,
            pad_imp,
            pad_unimp,
        }
    }
}

pub fn demodulate(rx: &SymbolStream, c: &Constellation) -> Demodulated {
    let demod = Demodulator::new(c);
    let s = c.suffix_bits() as usize;
    let labels: Vec<u32> = rx.symbols.iter().map(|&z| demod.decide(z)).collect();
    let mut important_bits = Vec::with_capacity(labels.len() * PREFIX_BITS as usize);
    let mut unimportant_bits = Vec::with_capacity(labels.len() * s);
    for &l in &labels {
        unpack(c.prefix_of(l), PREFIX_BITS as usize, &mut important_bits);
        unpack(c.suffix_of(l), s, &mut unimportant_bits);
    }
    Demodulated {
        labels,
        important_bits,
        unimportant_bits,
        mode: demod.mode(),
        order: c.order(),
    }
}
