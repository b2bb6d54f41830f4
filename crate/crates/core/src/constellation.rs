//! Constellation construction and geometry.
//!
//! Both schemes are products of one sorted set of per-axis levels, so every
//! constellation here is fully described by its axis levels plus a table
//! from `(I level, Q level)` to label.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of prefix (important) bits per symbol.
pub const PREFIX_BITS: u32 = 2;

/// Modulation orders supported: square grids with an even suffix split.
pub const SUPPORTED_ORDERS: [u32; 4] = [16, 64, 256, 1024];

/// Reflected binary Gray code.
#[inline]
pub fn gray_encode(k: u32) -> u32 {
    k ^ (k >> 1)
}

/// Inverse of [`gray_encode`].
#[inline]
pub fn gray_decode(mut g: u32) -> u32 {
    let mut k = g;
    while g > 1 {
        g >>= 1;
        k ^= g;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Important-bit-prefixed QAM: prefix selects the quadrant.
    Ibp,
    /// Conventional Gray-coded square QAM.
    Mqam,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ibp => "ibp",
            Scheme::Mqam => "mqam",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ibp" | "ibp-mqam" => Ok(Scheme::Ibp),
            "mqam" | "qam" => Ok(Scheme::Mqam),
            _ => Err(Error::InvalidParameter(format!("unknown scheme '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    /// Scale so the mean of `(I^2 + Q^2) / 2` is one.
    UnitEnergy,
    /// Fix the quadrant centre amplitude `d`.
    FixedD(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstellationSpec {
    pub scheme: Scheme,
    /// Modulation order M.
    pub order: u32,
    /// Spread factor; ignored (treated as 1) for [`Scheme::Mqam`].
    pub alpha: f64,
    pub normalization: Normalization,
}

impl ConstellationSpec {
    pub fn new(
        scheme: Scheme,
        order: u32,
        alpha: f64,
        normalization: Normalization,
    ) -> Result<Self> {
        let spec = ConstellationSpec {
            scheme,
            order,
            alpha,
            normalization,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ibp(order: u32, alpha: f64) -> Result<Self> {
        Self::new(Scheme::Ibp, order, alpha, Normalization::UnitEnergy)
    }

    pub fn mqam(order: u32) -> Result<Self> {
        Self::new(Scheme::Mqam, order, 1.0, Normalization::UnitEnergy)
    }

    pub fn validate(&self) -> Result<()> {
        validate_order(self.order)?;
        if self.scheme == Scheme::Ibp && !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if let Normalization::FixedD(d) = self.normalization {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidAmplitude(d));
            }
        }
        Ok(())
    }

    /// The spread factor actually used for geometry.
    pub fn effective_alpha(&self) -> f64 {
        match self.scheme {
            Scheme::Ibp => self.alpha,
            Scheme::Mqam => 1.0,
        }
    }

    /// Bits per symbol, `n = log2 M`.
    pub fn bits_per_symbol(&self) -> u32 {
        self.order.trailing_zeros()
    }

    /// Suffix (unimportant) bits per symbol, `s = n - 2`.
    pub fn suffix_bits(&self) -> u32 {
        self.bits_per_symbol() - PREFIX_BITS
    }

    /// Levels per axis, `sqrt(M)`.
    pub fn side(&self) -> usize {
        side_of(self.order)
    }

    /// `M' = 2^s`. Kept for completeness; the geometry only needs `sqrt(M)`.
    pub fn suffix_points(&self) -> u32 {
        1 << self.suffix_bits()
    }
}

pub(crate) fn validate_order(order: u32) -> Result<()> {
    if SUPPORTED_ORDERS.contains(&order) {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder(order))
    }
}

pub(crate) fn side_of(order: u32) -> usize {
    1usize << (order.trailing_zeros() / 2)
}

/// Mean of `(I^2 + Q^2) / 2` for centre amplitude `d`:
/// `(1 - 4 alpha^2 / (3M) + alpha^2 / 3) d^2`.
pub fn analytic_energy(order: u32, alpha: f64, d: f64) -> f64 {
    energy_factor(order, alpha) * d * d
}

/// [`analytic_energy`] with `d = 1`.
pub(crate) fn energy_factor(order: u32, alpha: f64) -> f64 {
    let m = order as f64;
    let a2 = alpha * alpha;
    1.0 - 4.0 * a2 / (3.0 * m) + a2 / 3.0
}

/// One per-axis coordinate. The I and Q axes share the same levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisLevel {
    pub coordinate: f64,
    /// Sign half of the axis: 0 for the positive half, 1 for the negative.
    /// Under [`Scheme::Ibp`] this is the important bit carried by the axis.
    pub prefix_bit: u8,
    /// Offset index inside the half, counted from the most negative offset.
    pub suffix_label: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstellationPoint {
    pub label: u32,
    pub i: f64,
    pub q: f64,
    /// Index into [`Constellation::axis_levels`] for the I coordinate.
    pub i_level: usize,
    /// Index into [`Constellation::axis_levels`] for the Q coordinate.
    pub q_level: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    spec: ConstellationSpec,
    d: f64,
    d_min: f64,
    /// Indexed by label.
    points: Vec<ConstellationPoint>,
    /// Sorted ascending by coordinate.
    axis_levels: Vec<AxisLevel>,
    /// `grid[i_level * side + q_level]` is the label at that grid cell.
    grid: Vec<u32>,
}

impl Constellation {
    pub fn build(spec: ConstellationSpec) -> Result<Self> {
        spec.validate()?;
        let alpha = spec.effective_alpha();
        let side = spec.side();
        let d = match spec.normalization {
            Normalization::UnitEnergy => 1.0 / energy_factor(spec.order, alpha).sqrt(),
            Normalization::FixedD(d) => d,
        };
        let d_min = 4.0 * d * alpha / side as f64;

        let (axis_levels, grid) = match spec.scheme {
            Scheme::Ibp => ibp_layout(&spec, d, d_min),
            Scheme::Mqam => mqam_layout(&spec, d_min),
        };

        let mut points = vec![
            ConstellationPoint {
                label: 0,
                i: 0.0,
                q: 0.0,
                i_level: 0,
                q_level: 0,
            };
            spec.order as usize
        ];
        for i_level in 0..side {
            for q_level in 0..side {
                let label = grid[i_level * side + q_level];
                points[label as usize] = ConstellationPoint {
                    label,
                    i: axis_levels[i_level].coordinate,
                    q: axis_levels[q_level].coordinate,
                    i_level,
                    q_level,
                };
            }
        }

        Ok(Constellation {
            spec,
            d,
            d_min,
            points,
            axis_levels,
            grid,
        })
    }

    pub fn spec(&self) -> &ConstellationSpec {
        &self.spec
    }

    pub fn scheme(&self) -> Scheme {
        self.spec.scheme
    }

    pub fn order(&self) -> u32 {
        self.spec.order
    }

    pub fn alpha(&self) -> f64 {
        self.spec.effective_alpha()
    }

    /// Quadrant centre amplitude per axis.
    pub fn d(&self) -> f64 {
        self.d
    }

    /// Spacing between adjacent suffix levels, `4 d alpha / sqrt(M)`.
    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn side(&self) -> usize {
        self.spec.side()
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.spec.bits_per_symbol()
    }

    pub fn suffix_bits(&self) -> u32 {
        self.spec.suffix_bits()
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[ConstellationPoint] {
        &self.points
    }

    pub fn point(&self, label: u32) -> &ConstellationPoint {
        &self.points[label as usize]
    }

    pub fn axis_levels(&self) -> &[AxisLevel] {
        &self.axis_levels
    }

    /// Label of the grid cell `(i_level, q_level)`.
    #[inline]
    pub fn label_at(&self, i_level: usize, q_level: usize) -> u32 {
        self.grid[i_level * self.side() + q_level]
    }

    /// The two important bits of a label.
    #[inline]
    pub fn prefix_of(&self, label: u32) -> u32 {
        label >> self.suffix_bits()
    }

    /// The unimportant bits of a label.
    #[inline]
    pub fn suffix_of(&self, label: u32) -> u32 {
        label & ((1 << self.suffix_bits()) - 1)
    }

    /// Empirical mean of `(I^2 + Q^2) / 2` over all points.
    pub fn mean_energy(&self) -> f64 {
        let sum: f64 = self.points.iter().map(|p| p.i * p.i + p.q * p.q).sum();
        sum / (2.0 * self.points.len() as f64)
    }

    /// Safe / N-level classification over 4-connected grid neighbours.
    /// Only defined on the uniform grid (`alpha = 1`).
    pub fn classify_points(&self) -> Result<PointClassCounts> {
        if self.alpha() != 1.0 {
            return Err(Error::ClassificationOffGrid(self.alpha()));
        }
        let side = self.side();
        let mut per_point = vec![PointClass::Safe; self.points.len()];
        let mut counts = PointClassCounts::default();
        for p in &self.points {
            let prefix = self.prefix_of(p.label);
            let (a, b) = (p.i_level as isize, p.q_level as isize);
            let differing = [(a - 1, b), (a + 1, b), (a, b - 1), (a, b + 1)]
                .into_iter()
                .filter(|&(x, y)| x >= 0 && y >= 0 && (x as usize) < side && (y as usize) < side)
                .filter(|&(x, y)| self.prefix_of(self.label_at(x as usize, y as usize)) != prefix)
                .count();
            let class = match differing {
                0 => PointClass::Safe,
                1 => PointClass::OneLevel,
                2 => PointClass::TwoLevel,
                n => {
                    return Err(Error::InvalidParameter(format!(
                        "point {} has {n} prefix-differing neighbours",
                        p.label
                    )))
                }
            };
            match class {
                PointClass::Safe => counts.safe += 1,
                PointClass::OneLevel => counts.one_level += 1,
                PointClass::TwoLevel => counts.two_level += 1,
            }
            per_point[p.label as usize] = class;
        }
        counts.per_point = per_point;
        Ok(counts)
    }

    /// Zero-padded MSB-first binary string of a label.
    pub fn label_bits(&self, label: u32) -> String {
        format!(
            "{:0width$b}",
            label,
            width = self.bits_per_symbol() as usize
        )
    }
}

/// Suffix offsets inside one half, most negative first: `(2j + 1 - side/2) / 2 * d_min`.
fn half_offsets(side: usize, d_min: f64) -> impl Iterator<Item = f64> {
    let half = side / 2;
    (0..half).map(move |j| (2.0 * j as f64 + 1.0 - half as f64) / 2.0 * d_min)
}

fn ibp_layout(spec: &ConstellationSpec, d: f64, d_min: f64) -> (Vec<AxisLevel>, Vec<u32>) {
    let side = spec.side();
    let half = side / 2;
    let n = spec.bits_per_symbol();
    let per_axis_suffix = spec.suffix_bits() / 2;

    // Sub-constellations are translations of one offset grid, so the suffix
    // index runs in the same direction in both halves.
    let negative = half_offsets(side, d_min)
        .enumerate()
        .map(|(j, o)| AxisLevel {
            coordinate: -d + o,
            prefix_bit: 1,
            suffix_label: j as u32,
        });
    let positive = half_offsets(side, d_min)
        .enumerate()
        .map(|(j, o)| AxisLevel {
            coordinate: d + o,
            prefix_bit: 0,
            suffix_label: j as u32,
        });
    let levels: Vec<AxisLevel> = negative.chain(positive).collect();

    let mut grid = vec![0u32; side * side];
    for (a, la) in levels.iter().enumerate() {
        for (b, lb) in levels.iter().enumerate() {
            grid[a * side + b] = (u32::from(la.prefix_bit) << (n - 1))
                | (u32::from(lb.prefix_bit) << (n - 2))
                | (gray_encode(la.suffix_label) << per_axis_suffix)
                | gray_encode(lb.suffix_label);
        }
    }
    debug_assert_eq!(levels.len(), half * 2);
    (levels, grid)
}

fn mqam_layout(spec: &ConstellationSpec, d_min: f64) -> (Vec<AxisLevel>, Vec<u32>) {
    let side = spec.side();
    let half = side / 2;
    let axis_bits = spec.bits_per_symbol() / 2;

    let levels: Vec<AxisLevel> = (0..side)
        .map(|k| {
            let coordinate = (2.0 * k as f64 + 1.0 - side as f64) / 2.0 * d_min;
            AxisLevel {
                coordinate,
                prefix_bit: u8::from(k < half),
                suffix_label: (k % half) as u32,
            }
        })
        .collect();

    let mut grid = vec![0u32; side * side];
    for a in 0..side {
        for b in 0..side {
            grid[a * side + b] = (gray_encode(a as u32) << axis_bits) | gray_encode(b as u32);
        }
    }
    (levels, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PointClass {
    Safe,
    OneLevel,
    TwoLevel,
}

impl PointClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PointClass::Safe => "safe",
            PointClass::OneLevel => "1-level",
            PointClass::TwoLevel => "2-level",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PointClassCounts {
    pub safe: usize,
    pub one_level: usize,
    pub two_level: usize,
    /// Indexed by label.
    pub per_point: Vec<PointClass>,
}

impl PointClassCounts {
    pub fn histogram(&self) -> (usize, usize, usize) {
        (self.safe, self.one_level, self.two_level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    fn fixed(scheme: Scheme, order: u32, alpha: f64, d: f64) -> Constellation {
        Constellation::build(
            ConstellationSpec::new(scheme, order, alpha, Normalization::FixedD(d)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn gray_basics() {
        assert_eq!(gray_encode(0), 0);
        assert_eq!(gray_encode(2), 3);
        for k in 0..1024 {
            assert_eq!(gray_decode(gray_encode(k)), k);
            if k > 0 {
                assert_eq!((gray_encode(k) ^ gray_encode(k - 1)).count_ones(), 1);
            }
        }
    }

    #[test]
    fn ibp16_unit_grid() {
        let c = fixed(Scheme::Ibp, 16, 1.0, 1.0);
        assert_eq!(c.d_min(), 1.0);
        let p = c.point(0);
        assert_eq!((p.i, p.q), (0.5, 0.5));
        let mut coords: Vec<f64> = c.axis_levels().iter().map(|l| l.coordinate).collect();
        coords.sort_by(f64::total_cmp);
        assert_eq!(coords, vec![-1.5, -0.5, 0.5, 1.5]);
    }

    #[test]
    fn alpha_zero_collapses_onto_qpsk() {
        for &m in &SUPPORTED_ORDERS {
            let c = fixed(Scheme::Ibp, m, 0.0, 0.7);
            for p in c.points() {
                assert_eq!(p.i.abs(), 0.7);
                assert_eq!(p.q.abs(), 0.7);
                let prefix = c.prefix_of(p.label);
                assert_eq!(p.i < 0.0, prefix & 0b10 != 0);
                assert_eq!(p.q < 0.0, prefix & 0b01 != 0);
            }
        }
    }

    #[test]
    fn energy_examples() {
        assert_eq!(analytic_energy(64, 0.0, 1.3), 1.3 * 1.3);
        assert!(rel_close(analytic_energy(64, 1.0, 1.0), 21.0 / 16.0, 1e-15));
        assert!(rel_close(analytic_energy(16, 1.0, 1.0), 1.25, 1e-15));
        assert!(rel_close(
            fixed(Scheme::Ibp, 64, 1.0, 1.0).mean_energy(),
            1.3125,
            1e-12
        ));
        assert!(rel_close(
            fixed(Scheme::Ibp, 16, 1.0, 1.0).mean_energy(),
            1.25,
            1e-12
        ));
    }

    #[test]
    fn energy_matches_closed_form_on_grid() {
        for &m in &SUPPORTED_ORDERS {
            for &alpha in &[0.0, 0.25, 0.5, 0.75, 1.0] {
                let c = fixed(Scheme::Ibp, m, alpha, 0.9);
                assert!(rel_close(
                    c.mean_energy(),
                    analytic_energy(m, alpha, 0.9),
                    1e-12
                ));
                let unit = Constellation::build(ConstellationSpec::ibp(m, alpha).unwrap()).unwrap();
                assert!(
                    rel_close(unit.mean_energy(), 1.0, 1e-12),
                    "m={m} alpha={alpha}"
                );
            }
        }
    }

    #[test]
    fn d_min_relation() {
        let c = fixed(Scheme::Ibp, 256, 0.4, 2.0);
        assert_eq!(c.d_min(), 4.0 * 2.0 * 0.4 / 16.0);
        let mut pos: Vec<f64> = c
            .axis_levels()
            .iter()
            .map(|l| l.coordinate)
            .filter(|&x| x > 0.0)
            .collect();
        pos.sort_by(f64::total_cmp);
        for w in pos.windows(2) {
            assert!(rel_close(w[1] - w[0], c.d_min(), 1e-12));
        }
        let centre = pos.iter().sum::<f64>() / pos.len() as f64;
        assert!(rel_close(centre, 2.0, 1e-12));
    }

    #[test]
    fn labels_are_bijective_and_symmetric() {
        for scheme in [Scheme::Ibp, Scheme::Mqam] {
            for &m in &SUPPORTED_ORDERS {
                let c = fixed(scheme, m, 0.6, 1.0);
                let mut seen = vec![false; m as usize];
                for a in 0..c.side() {
                    for b in 0..c.side() {
                        let l = c.label_at(a, b) as usize;
                        assert!(!seen[l]);
                        seen[l] = true;
                    }
                }
                let key = |i: f64, q: f64| ((i * 1e9).round() as i64, (q * 1e9).round() as i64);
                let mut set: Vec<_> = c.points().iter().map(|p| key(p.i, p.q)).collect();
                let mut neg_i: Vec<_> = c.points().iter().map(|p| key(-p.i, p.q)).collect();
                let mut neg_q: Vec<_> = c.points().iter().map(|p| key(p.i, -p.q)).collect();
                set.sort();
                neg_i.sort();
                neg_q.sort();
                assert_eq!(set, neg_i);
                assert_eq!(set, neg_q);
            }
        }
    }

    #[test]
    fn prefix_orientation() {
        let c = fixed(Scheme::Ibp, 64, 0.5, 1.0);
        for level in c.axis_levels() {
            assert_eq!(level.prefix_bit == 0, level.coordinate > 0.0);
        }
        // 00 and 11 land in opposite quadrants for any suffix
        for suffix in 0..16 {
            let a = c.point(suffix);
            let b = c.point(0b11 << 4 | suffix);
            assert!(a.i > 0.0 && a.q > 0.0 && b.i < 0.0 && b.q < 0.0);
        }
    }

    #[test]
    fn ibp_at_alpha_one_is_mqam_geometry() {
        for &m in &SUPPORTED_ORDERS {
            let ibp = Constellation::build(ConstellationSpec::ibp(m, 1.0).unwrap()).unwrap();
            let qam = Constellation::build(ConstellationSpec::mqam(m).unwrap()).unwrap();
            let mut a: Vec<(f64, f64)> = ibp.points().iter().map(|p| (p.i, p.q)).collect();
            let mut b: Vec<(f64, f64)> = qam.points().iter().map(|p| (p.i, p.q)).collect();
            a.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
            b.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
            for (x, y) in a.iter().zip(&b) {
                assert!((x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn classification_counts() {
        for &m in &SUPPORTED_ORDERS {
            let r = (m as f64).sqrt() as usize;
            let c = fixed(Scheme::Ibp, m, 1.0, 1.0).classify_points().unwrap();
            assert_eq!(c.histogram(), ((r - 2) * (r - 2), 4 * r - 8, 4));
            assert_eq!(c.safe + c.one_level + c.two_level, m as usize);
        }
        let q16 = fixed(Scheme::Mqam, 16, 1.0, 1.0).classify_points().unwrap();
        assert_eq!(q16.histogram(), (0, 8, 8));
        let q64 = fixed(Scheme::Mqam, 64, 1.0, 1.0).classify_points().unwrap();
        assert_eq!(q64.histogram(), (16, 48, 0));
        let q256 = fixed(Scheme::Mqam, 256, 1.0, 1.0)
            .classify_points()
            .unwrap();
        assert_eq!(q256.histogram(), (160, 96, 0));
    }

    #[test]
    fn classification_rejects_off_grid() {
        let c = fixed(Scheme::Ibp, 64, 0.5, 1.0);
        assert_eq!(
            c.classify_points().unwrap_err(),
            Error::ClassificationOffGrid(0.5)
        );
    }

    #[test]
    fn spec_validation() {
        assert_eq!(
            ConstellationSpec::ibp(32, 1.0).unwrap_err(),
            Error::UnsupportedOrder(32)
        );
        assert_eq!(
            ConstellationSpec::ibp(4, 1.0).unwrap_err(),
            Error::UnsupportedOrder(4)
        );
        assert_eq!(
            ConstellationSpec::ibp(64, 1.5).unwrap_err(),
            Error::InvalidAlpha(1.5)
        );
        assert!(ConstellationSpec::ibp(64, -0.1).is_err());
        assert!(ConstellationSpec::ibp(64, f64::NAN).is_err());
        // alpha is ignored for conventional QAM
        let s = ConstellationSpec::new(Scheme::Mqam, 64, 3.0, Normalization::UnitEnergy).unwrap();
        assert_eq!(s.effective_alpha(), 1.0);
        assert!(ConstellationSpec::new(Scheme::Ibp, 64, 1.0, Normalization::FixedD(0.0)).is_err());
        assert_eq!(s.suffix_points(), 16);
    }

    #[test]
    fn label_bits_format() {
        let c = fixed(Scheme::Ibp, 16, 1.0, 1.0);
        assert_eq!(c.label_bits(5), "0101");
    }
}
