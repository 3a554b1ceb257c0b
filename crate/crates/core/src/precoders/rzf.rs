use crate::channel::EffectiveChannel;
use crate::constraints::ConstraintRegion;
use crate::{Error, Result, C64};

use super::zf::regularized_preimage;

const GAIN_TOL: f64 = 1e-8;

/// Outcome of the RZF parameter search.
#[derive(Debug, Clone, PartialEq)]
pub struct RzfSolution {
    pub x: Vec<C64>,
    pub k1: f64,
    pub k2: f64,
    pub power: f64,
}

/// `{0}` plus `points` log-spaced values over `[lo, hi]·scale` with
/// `scale = Kσ²/‖d‖²`.
pub fn default_k2_grid(n_users: usize, sigma: f64, d_norm_sq: f64) -> Vec<f64> {
    let scale = n_users as f64 * sigma * sigma / d_norm_sq;
    log_grid(1e-3 * scale, 1e2 * scale, 40)
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    std::iter::once(0.0)
        .chain((0..points).map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64)))
        .collect()
}

/// Smallest `k₁ ≥ 0` such that `k₁·v_k` lies in every user's region, or
/// `None` when no gain works (a halfplane that `v` cannot reach, or
/// equalities that disagree).
pub fn min_gain(v: &[C64], regions: &[ConstraintRegion]) -> Option<f64> {
    let mut lower: f64 = 0.0;
    let mut upper = f64::INFINITY;
    let mut fixed: Option<f64> = None;
    for r in regions {
        let vk = v[r.user];
        for p in &r.halfplanes {
            let s = p.coeff * p.axis.of(vk);
            if s > 0.0 {
                upper = upper.min(p.bound / s);
            } else if s < 0.0 {
                lower = lower.max(p.bound / s);
            } else if p.bound < 0.0 {
                return None;
            }
        }
        for q in &r.equalities {
            let va = q.axis.of(vk);
            if va == 0.0 {
                if q.value != 0.0 {
                    return None;
                }
                continue;
            }
            let g = q.value / va;
            match fixed {
                None => fixed = Some(g),
                Some(f) if (f - g).abs() <= GAIN_TOL * f.abs().max(g.abs()) => {}
                Some(_) => return None,
            }
        }
    }
    let k1 = match fixed {
        Some(f) => {
            if f < 0.0 || f < lower * (1.0 - GAIN_TOL) {
                return None;
            }
            f
        }
        None => lower,
    };
    if k1 > upper * (1.0 + GAIN_TOL) {
        return None;
    }
    Some(k1)
}

/// Regularized zero forcing `x = k₁H†(HH† + k₂I)⁻¹d` with `(k₁, k₂)` chosen
/// over `k2_grid` to minimize power subject to the regions. `k₂ = 0` must be
/// in the grid; it reproduces zero forcing when `d` meets the regions.
pub fn rzf_precode(
    h: &EffectiveChannel,
    d: &[C64],
    regions: &[ConstraintRegion],
    k2_grid: &[f64],
) -> Result<RzfSolution> {
    if !k2_grid.contains(&0.0) {
        return Err(Error::InvalidParameter("regularizer grid must contain 0".into()));
    }
    let mut best: Option<RzfSolution> = None;
    for &k2 in k2_grid {
        let t = regularized_preimage(h, d, k2)?;
        let v = h.apply(&t);
        let Some(k1) = min_gain(&v, regions) else {
            continue;
        };
        let power = k1 * k1 * t.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if best.as_ref().is_none_or(|b| power < b.power) {
            best = Some(RzfSolution {
                x: t.iter().map(|z| z * k1).collect(),
                k1,
                k2,
                power,
            });
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("no regularizer in the grid meets the regions".into()))
}
