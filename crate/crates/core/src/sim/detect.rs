//! Symbol detection and Gray bit mapping.

use crate::constellation::Modulation;
use crate::C64;

fn detect_axis(v: f64, beta: f64, m: Modulation) -> usize {
    let level = match m {
        Modulation::Qam4 => {
            if v >= 0.0 {
                1
            } else {
                -1
            }
        }
        Modulation::Qam16 => {
            if v < -2.0 * beta {
                -3
            } else if v < 0.0 {
                -1
            } else if v < 2.0 * beta {
                1
            } else {
                3
            }
        }
    };
    m.code_for_level(level)
}

/// Rectangular-region detector for a standard constellation: sign per axis
/// for 4-QAM, thresholds `0, ±2β` per axis for 16-QAM. Points on a threshold
/// go to the upper region.
pub fn detect_qam(y: C64, beta: f64, m: Modulation) -> usize {
    m.index_from_codes(detect_axis(y.re, beta, m), detect_axis(y.im, beta, m))
}

/// Folds both components into `[−β√M, β√M)` (modulo `2β√M`) and detects
/// against the base constellation.
pub fn detect_replica(y: C64, beta: f64, m: Modulation) -> usize {
    let p = 2.0 * beta * m.side() as f64;
    let fold = |v: f64| v - p * ((v + p / 2.0) / p).floor();
    detect_qam(C64::new(fold(y.re), fold(y.im)), beta, m)
}

/// Gray-coded bits of `index`, most significant first. Real-axis bits come
/// first, then imaginary-axis bits.
pub fn bits_for_symbol(index: usize, m: Modulation) -> Vec<u8> {
    let b = m.bits_per_symbol();
    (0..b).rev().map(|i| ((index >> i) & 1) as u8).collect()
}

/// Number of differing bits between two symbol indices.
pub fn bit_errors(tx: usize, rx: usize, m: Modulation) -> u32 {
    debug_assert!(tx < m.order() && rx < m.order());
    (tx ^ rx).count_ones()
}
