//! Important-bit-prefixed square QAM.
//!
//! The first two bits of every symbol label (the prefix) select a QPSK
//! quadrant centre; the remaining bits (the suffix) select a Gray-coded offset
//! inside that quadrant, scaled by a spread factor `alpha`. With `alpha = 1`
//! the point set is the ordinary square M-QAM grid, with `alpha = 0` every
//! sub-constellation collapses onto its QPSK centre.
//!
//! Modules:
//!
//! * [`constellation`]: point sets, energies, safe/N-level classification.
//! * [`modem`]: framing of importance-tagged bit streams, mapping and
//!   per-axis maximum-likelihood decisions.
//! * [`channel`]: counter-based reproducible AWGN.
//! * [`analytic`]: closed-form SER/ISER/USER approximations and an exact
//!   per-axis oracle.
//! * [`montecarlo`]: seeded, parallel link simulation and parameter sweeps.
//! * [`semantic`]: record serialization, importance masks, CosSim, task
//!   accuracy and constellation usage heatmaps.
//!
//! SNR convention used throughout: `snr = E_s / sigma2` where `E_s` is the
//! mean of `(I^2 + Q^2) / 2` over the constellation and `sigma2` the total
//! complex noise variance, so each axis sees noise variance `sigma2 / 2`.

pub mod analytic;
pub mod channel;
pub mod constellation;
mod error;
pub mod modem;
pub mod montecarlo;
pub mod semantic;

pub use analytic::RateSet;
pub use constellation::{Constellation, ConstellationSpec, Normalization, Scheme};
pub use error::{Error, Result};
