//! Exact SEP regions, their critical boundary points, and the conservative
//! polytopes used as constraints.

use crate::constellation::{AxisClass, Modulation};
use crate::{Error, Result, C64};

use super::qfunc::{
    in_cell_probability, min_scaling_16qam, min_scaling_4qam,
    min_scaling_replica, one_minus_sqrt_complement, q_function, q_inverse, solve_delta,
};

/// Component of the noiseless receive signal a constraint acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Real,
    Imag,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::Real, Axis::Imag];

    pub fn of(self, y: C64) -> f64 {
        match self {
            Axis::Real => y.re,
            Axis::Imag => y.im,
        }
    }
}

/// Per-user constellation and reliability parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstellationSpec {
    pub modulation: Modulation,
    pub beta: f64,
    pub pe: f64,
    /// Per-dimension noise standard deviation, `σ² = N₀/2`.
    pub sigma: f64,
    pub replica: bool,
}

impl ConstellationSpec {
    /// Standard constellation at its minimum zero-forcing scaling `β⁻`.
    pub fn standard(modulation: Modulation, sigma: f64, pe: f64) -> Result<Self> {
        let beta = match modulation {
            Modulation::Qam4 => min_scaling_4qam(sigma, pe)?,
            Modulation::Qam16 => min_scaling_16qam(sigma, pe)?,
        };
        Ok(ConstellationSpec {
            modulation,
            beta,
            pe,
            sigma,
            replica: false,
        })
    }

    /// Replica constellation with scaling `β ≥ β⁻`.
    pub fn replica(modulation: Modulation, sigma: f64, pe: f64, beta: f64) -> Result<Self> {
        let min = min_scaling_replica(sigma, pe)?;
        if !(beta >= min * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "replica scaling {beta} below minimum {min}"
            )));
        }
        Ok(ConstellationSpec {
            modulation,
            beta,
            pe,
            sigma,
            replica: true,
        })
    }

    /// Margin `I = −σ·Q⁻¹(√(1 − Pe))`.
    pub fn margin(&self) -> f64 {
        let tail = one_minus_sqrt_complement(self.pe);
        self.sigma * q_inverse(tail).expect("pe validated at construction")
    }

    pub fn point(&self, symbol: usize) -> C64 {
        self.modulation.point(symbol, self.beta)
    }

    /// Half-width `δ₀` of the replica / inner-point box.
    pub fn delta0(&self) -> Result<f64> {
        solve_delta(self.beta, self.sigma, (1.0 - self.pe).sqrt())
    }

    /// Modulo lattice spacing `2β√M` of the replica constellation.
    pub fn lattice_spacing(&self) -> f64 {
        2.0 * self.beta * self.modulation.side() as f64
    }
}

/// Decision interval of `symbol` along `axis`. Replica points always have a
/// closed interval of width `2β`.
pub fn decision_interval(symbol: usize, axis: Axis, spec: &ConstellationSpec) -> (f64, f64) {
    let m = spec.modulation;
    let (r, i) = m.axis_codes(symbol);
    let code = if axis == Axis::Real { r } else { i };
    let center = spec.beta * m.level(code);
    let class = if spec.replica {
        AxisClass::Inner
    } else {
        m.axis_class(code)
    };
    match class {
        AxisClass::OuterLow => (f64::NEG_INFINITY, center + spec.beta),
        AxisClass::Inner => (center - spec.beta, center + spec.beta),
        AxisClass::OuterHigh => (center - spec.beta, f64::INFINITY),
    }
}

/// `P(ȳ + z ∈ [lo, hi])` for `z ~ N(0, σ²)`; `ȳ` may be infinite.
pub fn axis_correct_probability(y: f64, lo: f64, hi: f64, sigma: f64) -> f64 {
    if y.is_infinite() {
        let inside = if y > 0.0 { hi == f64::INFINITY } else { lo == f64::NEG_INFINITY };
        return if inside { 1.0 } else { 0.0 };
    }
    let upper_tail = q_function((hi - y) / sigma);
    let lower_tail = 1.0 - q_function((lo - y) / sigma);
    if lo == f64::NEG_INFINITY {
        1.0 - upper_tail
    } else if hi == f64::INFINITY {
        1.0 - lower_tail
    } else if y >= lo && y <= hi {
        1.0 - upper_tail - lower_tail
    } else {
        q_function((lo - y) / sigma) - q_function((hi - y) / sigma)
    }
}

/// Probability of correct detection `O^(r)·O^(i)` for noiseless output `y`
/// when `symbol` is sent.
pub fn exact_correct_probability(symbol: usize, y: (f64, f64), spec: &ConstellationSpec) -> f64 {
    let (lr, hr) = decision_interval(symbol, Axis::Real, spec);
    let (li, hi) = decision_interval(symbol, Axis::Imag, spec);
    axis_correct_probability(y.0, lr, hr, spec.sigma) * axis_correct_probability(y.1, li, hi, spec.sigma)
}

/// One enumerated point on the boundary `O^(r)·O^(i) = 1 − Pe` of the exact region.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    /// Which probability split produced the point.
    pub split: (f64, f64),
    pub point: (f64, f64),
}

/// Critical points on the boundary of the exact SEP region of `symbol`.
///
/// Outer axes use the one-sided tail, inner axes the two-sided widths
/// `δ₀, δ₁, δ₂`. Points for a symbol are reflections/translations of the
/// representative corner, side and center cases.
pub fn boundary_points(symbol: usize, spec: &ConstellationSpec) -> Result<Vec<BoundaryPoint>> {
    let m = spec.modulation;
    let (cr, ci) = m.axis_codes(symbol);
    let (beta, sigma, pe) = (spec.beta, spec.sigma, spec.pe);
    let class = |code| {
        if spec.replica {
            AxisClass::Inner
        } else {
            m.axis_class(code)
        }
    };
    let classes = (class(cr), class(ci));
    let centers = (beta * m.level(cr), beta * m.level(ci));
    let root = (1.0 - pe).sqrt();
    let alpha = in_cell_probability(beta, sigma);

    // One-sided offset from the decision threshold that leaves probability `p`
    // on the correct side: ȳ − threshold = −σ·Q⁻¹(p), signed outward.
    let outer = |axis_class: AxisClass, center: f64, p: f64| -> Result<f64> {
        let offset = -sigma * q_inverse_or_neg_inf(p)?;
        Ok(match axis_class {
            AxisClass::OuterHigh => (center - beta) + offset,
            AxisClass::OuterLow => (center + beta) - offset,
            AxisClass::Inner => unreachable!(),
        })
    };
    let far = |axis_class: AxisClass| match axis_class {
        AxisClass::OuterHigh => f64::INFINITY,
        _ => f64::NEG_INFINITY,
    };

    let mut pts = Vec::new();
    match classes {
        (AxisClass::Inner, AxisClass::Inner) => {
            let d0 = solve_delta(beta, sigma, root)?;
            let d1 = solve_delta(beta, sigma, (1.0 - pe) / alpha)?;
            for s in [-1.0, 1.0] {
                pts.push(BoundaryPoint {
                    split: ((1.0 - pe) / alpha, alpha),
                    point: (centers.0 + s * d1, centers.1),
                });
            }
            for s in [-1.0, 1.0] {
                pts.push(BoundaryPoint {
                    split: (alpha, (1.0 - pe) / alpha),
                    point: (centers.0, centers.1 + s * d1),
                });
            }
            for sr in [-1.0, 1.0] {
                for si in [-1.0, 1.0] {
                    pts.push(BoundaryPoint {
                        split: (root, root),
                        point: (centers.0 + sr * d0, centers.1 + si * d0),
                    });
                }
            }
        }
        (AxisClass::Inner, outer_class) | (outer_class, AxisClass::Inner) => {
            let real_is_outer = classes.0 != AxisClass::Inner;
            let (c_out, c_in) = if real_is_outer {
                (centers.0, centers.1)
            } else {
                (centers.1, centers.0)
            };
            let d0 = solve_delta(beta, sigma, root)?;
            let d2 = solve_delta(beta, sigma, 1.0 - pe)?;
            let mut push = |split: (f64, f64), out: f64, inn: f64| {
                let (point, split) = if real_is_outer {
                    ((out, inn), split)
                } else {
                    ((inn, out), (split.1, split.0))
                };
                pts.push(BoundaryPoint { split, point });
            };
            push(((1.0 - pe) / alpha, alpha), outer(outer_class, c_out, (1.0 - pe) / alpha)?, c_in);
            for s in [-1.0, 1.0] {
                push((root, root), outer(outer_class, c_out, root)?, c_in + s * d0);
            }
            for s in [-1.0, 1.0] {
                push((1.0, 1.0 - pe), far(outer_class), c_in + s * d2);
            }
        }
        (rc, ic) => {
            pts.push(BoundaryPoint {
                split: (1.0 - pe, 1.0),
                point: (outer(rc, centers.0, 1.0 - pe)?, far(ic)),
            });
            pts.push(BoundaryPoint {
                split: (1.0, 1.0 - pe),
                point: (far(rc), outer(ic, centers.1, 1.0 - pe)?),
            });
            pts.push(BoundaryPoint {
                split: (root, root),
                point: (outer(rc, centers.0, root)?, outer(ic, centers.1, root)?),
            });
        }
    }
    Ok(pts)
}

fn q_inverse_or_neg_inf(p: f64) -> Result<f64> {
    if p >= 1.0 {
        Ok(f64::NEG_INFINITY)
    } else {
        q_inverse(p)
    }
}

/// `coeff · ȳ_axis ≤ bound` with `coeff = ±1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub axis: Axis,
    pub coeff: f64,
    pub bound: f64,
}

/// `ȳ_axis = value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equality {
    pub axis: Axis,
    pub value: f64,
}

/// Conservative polytope `C(d)` on the noiseless output of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRegion {
    pub user: usize,
    pub halfplanes: Vec<HalfPlane>,
    pub equalities: Vec<Equality>,
}

impl ConstraintRegion {
    /// Largest constraint violation at `y` (`≤ 0` means inside).
    pub fn violation(&self, y: C64) -> f64 {
        let h = self
            .halfplanes
            .iter()
            .map(|p| p.coeff * p.axis.of(y) - p.bound);
        let e = self.equalities.iter().map(|q| (q.axis.of(y) - q.value).abs());
        h.chain(e).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, y: C64, tol: f64) -> bool {
        self.violation(y) <= tol
    }

    /// Finite vertices of the region. All regions are products of per-axis
    /// intervals, so the vertices are products of the finite interval ends.
    pub fn vertices(&self) -> Vec<C64> {
        let ends = |axis: Axis| -> Vec<f64> {
            if let Some(q) = self.equalities.iter().find(|q| q.axis == axis) {
                return vec![q.value];
            }
            self.halfplanes
                .iter()
                .filter(|p| p.axis == axis)
                .map(|p| p.bound / p.coeff)
                .collect()
        };
        let (re, im) = (ends(Axis::Real), ends(Axis::Imag));
        re.iter()
            .flat_map(|&r| im.iter().map(move |&i| C64::new(r, i)))
            .collect()
    }

    pub fn halfplanes_on(&self, axis: Axis) -> impl Iterator<Item = &HalfPlane> {
        self.halfplanes.iter().filter(move |p| p.axis == axis)
    }

    pub fn equality_on(&self, axis: Axis) -> Option<&Equality> {
        self.equalities.iter().find(|q| q.axis == axis)
    }
}

/// Box `|ȳ^(r) − center^(r)| ≤ δ`, `|ȳ^(i) − center^(i)| ≤ δ`. A zero-width
/// box is emitted as two equalities.
pub fn box_region(user: usize, center: C64, delta: f64) -> ConstraintRegion {
    let mut halfplanes = Vec::new();
    let mut equalities = Vec::new();
    for axis in Axis::BOTH {
        let c = axis.of(center);
        if delta == 0.0 {
            equalities.push(Equality { axis, value: c });
        } else {
            halfplanes.push(HalfPlane { axis, coeff: 1.0, bound: c + delta });
            halfplanes.push(HalfPlane { axis, coeff: -1.0, bound: -(c - delta) });
        }
    }
    ConstraintRegion {
        user,
        halfplanes,
        equalities,
    }
}

/// Conservative region `C(d)` for transmitting `symbol` to `user`.
///
/// * 4-QAM: one outward halfplane per axis with margin `I`.
/// * 16-QAM at `β⁻`: inner axes become equalities, outer axes a halfplane
///   `∓ȳ ≤ −(2β + I)`.
/// * Replica: a box of half-width `δ₀` around the base point. Boxes around
///   shifted replica points come from [`box_region`].
pub fn constraint_region(
    user: usize,
    symbol: usize,
    spec: &ConstellationSpec,
) -> Result<ConstraintRegion> {
    let m = spec.modulation;
    if symbol >= m.order() {
        return Err(Error::InvalidParameter(format!("symbol {symbol} out of range")));
    }
    if spec.replica {
        return Ok(box_region(user, spec.point(symbol), spec.delta0()?));
    }
    if m == Modulation::Qam16 {
        let min = min_scaling_16qam(spec.sigma, spec.pe)?;
        if (spec.beta - min).abs() > 1e-9 * min {
            return Err(Error::InvalidParameter(
                "standard 16-QAM regions require the minimum scaling".into(),
            ));
        }
    }
    let margin = spec.margin();
    let (cr, ci) = m.axis_codes(symbol);
    let mut halfplanes = Vec::new();
    let mut equalities = Vec::new();
    for (axis, code) in [(Axis::Real, cr), (Axis::Imag, ci)] {
        // threshold between this level and its inner neighbour
        let threshold = match m {
            Modulation::Qam4 => 0.0,
            Modulation::Qam16 => 2.0 * spec.beta,
        };
        match m.axis_class(code) {
            AxisClass::OuterHigh => halfplanes.push(HalfPlane {
                axis,
                coeff: -1.0,
                bound: -(threshold + margin),
            }),
            AxisClass::OuterLow => halfplanes.push(HalfPlane {
                axis,
                coeff: 1.0,
                bound: -(threshold + margin),
            }),
            AxisClass::Inner => equalities.push(Equality {
                axis,
                value: spec.beta * m.level(code),
            }),
        }
    }
    Ok(ConstraintRegion {
        user,
        halfplanes,
        equalities,
    })
}
