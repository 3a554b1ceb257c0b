//! Expansion of per-user regions through `ȳ_k = h_kᵀx` into the stacked real
//! system over `x̃ = (Re x₁, Im x₁, …, Re x_N, Im x_N)`.

use crate::channel::EffectiveChannel;
use crate::constellation::Modulation;
use crate::sparse::SparseMatrix;
use crate::{Error, Result, C64};

use super::geometry::{Axis, ConstellationSpec, ConstraintRegion};

/// Role of one constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `ȳ_axis ≤ bound`.
    Upper,
    /// `−ȳ_axis ≤ bound`.
    Lower,
    Equality,
    /// All-zero row with zero bound; skipped by the solver.
    Padding,
}

/// Where a row of `A` or `B` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowProvenance {
    pub user: usize,
    pub axis: Axis,
    pub kind: RowKind,
}

/// Number of inequality rows reserved per user and axis, and whether
/// equality rows exist at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowLayout {
    pub inequality_rows_per_axis: usize,
    pub equality_rows: bool,
}

impl RowLayout {
    /// `2K × 2N` inequalities and no equalities for standard 4-QAM;
    /// `4K` inequalities and `2K` equalities otherwise.
    pub fn for_spec(spec: &ConstellationSpec) -> Self {
        if spec.modulation == Modulation::Qam4 && !spec.replica {
            RowLayout {
                inequality_rows_per_axis: 1,
                equality_rows: false,
            }
        } else {
            RowLayout {
                inequality_rows_per_axis: 2,
                equality_rows: true,
            }
        }
    }
}

/// `min ‖x̃‖² s.t. Ax̃ ≤ c, Bx̃ = e` with per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub a: SparseMatrix,
    pub c: Vec<f64>,
    pub b: SparseMatrix,
    pub e: Vec<f64>,
    pub a_rows: Vec<RowProvenance>,
    pub b_rows: Vec<RowProvenance>,
}

impl ConstraintSystem {
    pub fn n_vars(&self) -> usize {
        self.a.n_cols()
    }

    pub fn active_inequalities(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.a.n_rows()).filter(|&i| self.a_rows[i].kind != RowKind::Padding)
    }

    pub fn active_equalities(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.b.n_rows()).filter(|&i| self.b_rows[i].kind != RowKind::Padding)
    }

    /// Largest inequality violation `max(Ax̃ − c)` over active rows
    /// (`−∞` when there are none).
    pub fn inequality_violation(&self, x: &[f64]) -> f64 {
        self.active_inequalities()
            .map(|i| self.a.row_dot(i, x) - self.c[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest equality residual `max |Bx̃ − e|` over active rows (0 when none).
    pub fn equality_violation(&self, x: &[f64]) -> f64 {
        self.active_equalities()
            .map(|i| (self.b.row_dot(i, x) - self.e[i]).abs())
            .fold(0.0, f64::max)
    }

    /// `max(0, inequality violation, equality residual)`.
    pub fn primal_violation(&self, x: &[f64]) -> f64 {
        self.inequality_violation(x)
            .max(self.equality_violation(x))
            .max(0.0)
    }

    /// `max(1, ‖c‖_∞, ‖e‖_∞)`, the scale used for feasibility tolerances.
    pub fn bound_scale(&self) -> f64 {
        self.c
            .iter()
            .chain(&self.e)
            .fold(1.0f64, |m, v| m.max(v.abs()))
    }
}

/// Real stacking `(Re x₁, Im x₁, …)`.
pub fn stack(x: &[C64]) -> Vec<f64> {
    x.iter().flat_map(|v| [v.re, v.im]).collect()
}

pub fn unstack(x: &[f64]) -> Vec<C64> {
    x.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()
}

/// Coefficients of `ȳ_axis` on `(Re x_n, Im x_n)` for channel tap `h`.
fn axis_coefficients(h: C64, axis: Axis) -> (f64, f64) {
    match axis {
        Axis::Real => (h.re, -h.im),
        Axis::Imag => (h.im, h.re),
    }
}

/// Builds the stacked system for one region per user.
///
/// Rows are grouped per user as `[real slots…, imaginary slots…]`; within an
/// axis the upper bound comes first, then the lower bound, and unused slots
/// are zero padding. Equality rows are `[real, imaginary]` per user.
pub fn assemble_qp(
    h: &EffectiveChannel,
    regions: &[ConstraintRegion],
    layout: RowLayout,
) -> Result<ConstraintSystem> {
    let k_users = h.n_users();
    let n_vars = 2 * h.n_subcarriers();
    if regions.len() != k_users {
        return Err(Error::Dimension(format!(
            "{} regions for {k_users} users",
            regions.len()
        )));
    }
    let per_axis = layout.inequality_rows_per_axis;
    let mut a_rows = Vec::with_capacity(2 * per_axis * k_users);
    let mut a_prov = Vec::with_capacity(2 * per_axis * k_users);
    let mut c = Vec::with_capacity(2 * per_axis * k_users);
    let mut b_rows = Vec::new();
    let mut b_prov = Vec::new();
    let mut e = Vec::new();

    for (k, region) in regions.iter().enumerate() {
        if region.user != k {
            return Err(Error::Dimension(format!(
                "region for user {} in slot {k}",
                region.user
            )));
        }
        let expand = |axis: Axis, scale: f64| -> Vec<(usize, f64)> {
            h.row(k)
                .iter()
                .flat_map(|&(n, hv)| {
                    let (cr, ci) = axis_coefficients(hv, axis);
                    [(2 * n, scale * cr), (2 * n + 1, scale * ci)]
                })
                .collect()
        };
        for axis in Axis::BOTH {
            let mut planes: Vec<_> = region.halfplanes_on(axis).collect();
            planes.sort_by(|p, q| q.coeff.total_cmp(&p.coeff));
            if planes.len() > per_axis {
                return Err(Error::Dimension(format!(
                    "user {k} has {} halfplanes on one axis, layout allows {per_axis}",
                    planes.len()
                )));
            }
            for slot in 0..per_axis {
                match planes.get(slot) {
                    Some(p) => {
                        a_rows.push(expand(axis, p.coeff));
                        c.push(p.bound);
                        a_prov.push(RowProvenance {
                            user: k,
                            axis,
                            kind: if p.coeff > 0.0 { RowKind::Upper } else { RowKind::Lower },
                        });
                    }
                    None => {
                        a_rows.push(Vec::new());
                        c.push(0.0);
                        a_prov.push(RowProvenance {
                            user: k,
                            axis,
                            kind: RowKind::Padding,
                        });
                    }
                }
            }
        }
        if layout.equality_rows {
            for axis in Axis::BOTH {
                match region.equality_on(axis) {
                    Some(q) => {
                        b_rows.push(expand(axis, 1.0));
                        e.push(q.value);
                        b_prov.push(RowProvenance {
                            user: k,
                            axis,
                            kind: RowKind::Equality,
                        });
                    }
                    None => {
                        b_rows.push(Vec::new());
                        e.push(0.0);
                        b_prov.push(RowProvenance {
                            user: k,
                            axis,
                            kind: RowKind::Padding,
                        });
                    }
                }
            }
        } else if !region.equalities.is_empty() {
            return Err(Error::Dimension(format!(
                "user {k} has equalities but the layout reserves none"
            )));
        }
    }

    Ok(ConstraintSystem {
        a: SparseMatrix::from_rows(n_vars, a_rows),
        c,
        b: SparseMatrix::from_rows(n_vars, b_rows),
        e,
        a_rows: a_prov,
        b_rows: b_prov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{box_region, constraint_region, q_inverse};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn flat_single_user_four_qam() {
        let h = EffectiveChannel::from_dense(&[vec![c(1.0, 0.0)]]).unwrap();
        let spec = ConstellationSpec::standard(Modulation::Qam4, 0.7, 1e-2).unwrap();
        let region = constraint_region(0, 3, &spec).unwrap();
        let sys = assemble_qp(&h, &[region], RowLayout::for_spec(&spec)).unwrap();
        let i = spec.margin();
        assert_eq!(sys.a.to_dense(), vec![vec![-1.0, -0.0], vec![-0.0, -1.0]]);
        assert_eq!(sys.c, vec![-i, -i]);
        assert_eq!(sys.b.n_rows(), 0);
    }

    #[test]
    fn worked_example_layout() {
        let h = EffectiveChannel::from_dense(&[
            vec![c(1.0, 1.0), c(-1.0, 1.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 1.0), c(1.0, -1.0)],
        ])
        .unwrap();
        let sigma = 0.5;
        let pe = 1e-3;
        let beta = 2.0;
        let delta0 = 0.3;
        let spec = ConstellationSpec::standard(Modulation::Qam16, sigma, pe).unwrap();
        let corner = constraint_region(1, 10, &spec).unwrap();
        // The corner halfplanes only depend on β through 2β + I: rebuild at β = 2.
        let i = -sigma * q_inverse((1.0f64 - pe).sqrt()).unwrap();
        let mut corner_at_beta = corner.clone();
        for p in &mut corner_at_beta.halfplanes {
            p.bound = -(2.0 * beta + i);
        }
        let center = box_region(0, c(beta, beta), delta0);
        let sys = assemble_qp(
            &h,
            &[center, corner_at_beta],
            RowLayout {
                inequality_rows_per_axis: 2,
                equality_rows: true,
            },
        )
        .unwrap();
        let a = sys.a.to_dense();
        let want = [
            [1.0, -1.0, -1.0, -1.0, 0.0, 0.0],
            [-1.0, 1.0, 1.0, 1.0, 0.0, 0.0],
            [1.0, 1.0, 1.0, -1.0, 0.0, 0.0],
            [-1.0, -1.0, -1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, -1.0, 1.0, -1.0, -1.0],
            [0.0; 6],
            [0.0, 0.0, -1.0, -1.0, 1.0, -1.0],
            [0.0; 6],
        ];
        for (got, want) in a.iter().zip(want.iter()) {
            assert_eq!(got.as_slice(), want.as_slice());
        }
        assert_eq!(sys.a_rows[5].kind, RowKind::Padding);
        assert!(sys.active_equalities().next().is_none());
    }
}
