//! Square QAM geometry and the canonical symbol index table.
//!
//! Symbols are indexed `0..M` (`D_{m}` is index `m − 1`). For 16-QAM the upper
//! two index bits select the real level and the lower two the imaginary
//! level, both through the table `[−3, −1, +3, +1]·β`. This places the corner
//! points at `D₁, D₃, D₉, D₁₁`, the center points at `D₆, D₈, D₁₄, D₁₆`, and
//! makes the index bits a per-axis Gray code. 4-QAM uses one bit per axis,
//! `0 → −β`, `1 → +β`.

use serde::{Deserialize, Serialize};

use crate::{Error, C64};

/// Supported constellation orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Modulation {
    Qam4,
    Qam16,
}

impl TryFrom<u32> for Modulation {
    type Error = Error;

    fn try_from(m: u32) -> Result<Self, Error> {
        match m {
            4 => Ok(Modulation::Qam4),
            16 => Ok(Modulation::Qam16),
            other => Err(Error::InvalidParameter(format!(
                "unsupported modulation order {other}"
            ))),
        }
    }
}

impl From<Modulation> for u32 {
    fn from(m: Modulation) -> u32 {
        m.order() as u32
    }
}

/// Position of a level along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisClass {
    /// Decision interval unbounded below.
    OuterLow,
    /// Decision interval of width `2β` centered on the level.
    Inner,
    /// Decision interval unbounded above.
    OuterHigh,
}

const LEVELS_16: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

impl Modulation {
    pub fn order(self) -> usize {
        match self {
            Modulation::Qam4 => 4,
            Modulation::Qam16 => 16,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qam4 => 2,
            Modulation::Qam16 => 4,
        }
    }

    pub fn bits_per_axis(self) -> usize {
        self.bits_per_symbol() / 2
    }

    /// `√M`.
    pub fn side(self) -> usize {
        match self {
            Modulation::Qam4 => 2,
            Modulation::Qam16 => 4,
        }
    }

    /// Unscaled level for an axis code (`±1` or `±1, ±3`).
    pub fn level(self, code: usize) -> f64 {
        match self {
            Modulation::Qam4 => {
                if code == 0 {
                    -1.0
                } else {
                    1.0
                }
            }
            Modulation::Qam16 => LEVELS_16[code],
        }
    }

    /// Axis code for an unscaled level.
    pub fn code_for_level(self, level: i32) -> usize {
        match self {
            Modulation::Qam4 => usize::from(level > 0),
            Modulation::Qam16 => match level {
                -3 => 0,
                -1 => 1,
                3 => 2,
                _ => 3,
            },
        }
    }

    /// Splits a symbol index into `(real code, imaginary code)`.
    pub fn axis_codes(self, index: usize) -> (usize, usize) {
        let b = self.bits_per_axis();
        (index >> b, index & ((1 << b) - 1))
    }

    pub fn index_from_codes(self, re: usize, im: usize) -> usize {
        (re << self.bits_per_axis()) | im
    }

    /// Scaled constellation point for a symbol index.
    pub fn point(self, index: usize, beta: f64) -> C64 {
        let (r, i) = self.axis_codes(index);
        C64::new(beta * self.level(r), beta * self.level(i))
    }

    /// Classification of one axis level in the standard (non-periodic) constellation.
    pub fn axis_class(self, code: usize) -> AxisClass {
        match self {
            Modulation::Qam4 => {
                if code == 0 {
                    AxisClass::OuterLow
                } else {
                    AxisClass::OuterHigh
                }
            }
            Modulation::Qam16 => match code {
                0 => AxisClass::OuterLow,
                2 => AxisClass::OuterHigh,
                _ => AxisClass::Inner,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_qam_classes_match_index_table() {
        let m = Modulation::Qam16;
        let class = |d: usize| {
            let (r, i) = m.axis_codes(d - 1);
            (m.axis_class(r), m.axis_class(i))
        };
        for d in [1, 3, 9, 11] {
            let (r, i) = class(d);
            assert!(r != AxisClass::Inner && i != AxisClass::Inner, "D{d}");
        }
        for d in [6, 8, 14, 16] {
            assert_eq!(class(d), (AxisClass::Inner, AxisClass::Inner), "D{d}");
        }
        for d in [2, 4, 5, 7, 10, 12, 13, 15] {
            let (r, i) = class(d);
            assert!((r == AxisClass::Inner) ^ (i == AxisClass::Inner), "D{d}");
        }
        assert_eq!(m.point(15, 1.0), C64::new(1.0, 1.0));
        assert_eq!(m.point(10, 1.0), C64::new(3.0, 3.0));
        assert_eq!(m.point(11, 1.0), C64::new(3.0, 1.0));
    }

    #[test]
    fn four_qam_quadrants() {
        let m = Modulation::Qam4;
        assert_eq!(m.point(0, 2.0), C64::new(-2.0, -2.0));
        assert_eq!(m.point(1, 2.0), C64::new(-2.0, 2.0));
        assert_eq!(m.point(2, 2.0), C64::new(2.0, -2.0));
        assert_eq!(m.point(3, 2.0), C64::new(2.0, 2.0));
    }

    #[test]
    fn codes_round_trip() {
        for m in [Modulation::Qam4, Modulation::Qam16] {
            for d in 0..m.order() {
                let (r, i) = m.axis_codes(d);
                assert_eq!(m.index_from_codes(r, i), d);
                assert_eq!(m.code_for_level(m.level(r) as i32), r);
            }
        }
    }
}
