use nalgebra::{DMatrix, DVector};

use crate::channel::EffectiveChannel;
use crate::constellation::Modulation;
use crate::constraints::{
    assemble_qp, box_region, min_scaling_replica, unstack, ConstellationSpec, RowLayout,
};
use crate::solver::{solve, SolveResult, SolverOptions};
use crate::{Error, Result, C64};

/// `[u]_p`: reduces both components into `[−p/2, p/2)`.
pub fn complex_modulo(u: C64, p: f64) -> C64 {
    let (fr, fi) = lattice_offset(u, p);
    C64::new(u.re - fr * p, u.im - fi * p)
}

fn lattice_offset(u: C64, p: f64) -> (f64, f64) {
    (((u.re + p / 2.0) / p).floor(), ((u.im + p / 2.0) / p).floor())
}

/// Greedy max-min ordering for successive precoding. Positions are filled from
/// the last: each step places the remaining user whose residual row norm
/// (orthogonal to all other remaining rows) is largest, which maximizes the
/// smallest diagonal entry of the triangular factor. Ties go to the lower
/// user index. Returns `order[position] = user`.
pub fn vblast_ordering(h: &EffectiveChannel) -> Result<Vec<usize>> {
    let hd = h.to_dense();
    let mut remaining: Vec<usize> = (0..h.n_users()).collect();
    let mut reversed = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let sub = hd.select_rows(&remaining);
        let gram: DMatrix<C64> = &sub * sub.adjoint();
        let inv = gram.try_inverse().ok_or(Error::RankDeficient)?;
        let mut pick = 0;
        for i in 1..remaining.len() {
            if inv[(i, i)].re < inv[(pick, pick)].re {
                pick = i;
            }
        }
        if !(inv[(pick, pick)].re > 0.0) {
            return Err(Error::RankDeficient);
        }
        reversed.push(remaining.remove(pick));
    }
    reversed.reverse();
    Ok(reversed)
}

/// Result of zero-forcing THP encoding for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ThpEncoding {
    /// `ordering[position] = user`.
    pub ordering: Vec<usize>,
    /// `N × K` factor with orthonormal columns, `H_π† = F R`.
    pub f: DMatrix<C64>,
    /// Lower-triangular `B = H_π F` with real positive diagonal.
    pub b: DMatrix<C64>,
    /// Intermediate symbols in position order.
    pub x_bar: Vec<C64>,
    /// Replica point reached by each user (indexed by user).
    pub replica_points: Vec<C64>,
    /// Integer lattice offsets `(a_R, a_I)` per user.
    pub offsets: Vec<(i64, i64)>,
    pub modulo_basis: f64,
    /// Transmit vector `x = F x̄`.
    pub x: Vec<C64>,
}

impl ThpEncoding {
    pub fn power(&self) -> f64 {
        self.x_bar.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Zero-forcing THP: V-BLAST ordering, QR of the reordered `H†`, successive
/// interference pre-subtraction with modulo `2β√M` per user.
pub fn thp_zf_encode(
    h: &EffectiveChannel,
    symbols: &[usize],
    spec: &ConstellationSpec,
) -> Result<ThpEncoding> {
    let k_users = h.n_users();
    if symbols.len() != k_users {
        return Err(Error::Dimension(format!(
            "{} symbols for {k_users} users",
            symbols.len()
        )));
    }
    if k_users > h.n_subcarriers() {
        return Err(Error::RankDeficient);
    }
    let ordering = vblast_ordering(h)?;
    let hd = h.to_dense();
    let h_pi = hd.select_rows(&ordering);
    let qr = h_pi.adjoint().qr();
    let mut f = qr.q();
    let mut r = qr.r();
    for i in 0..k_users {
        let diag = r[(i, i)];
        let mag = diag.norm();
        if mag == 0.0 {
            return Err(Error::ZeroDiagonal(i));
        }
        let phase = diag / mag;
        for j in 0..k_users {
            r[(i, j)] *= phase.conj();
        }
        for n in 0..f.nrows() {
            f[(n, i)] *= phase;
        }
        r[(i, i)] = C64::new(mag, 0.0);
    }
    let b = r.adjoint();
    let p = spec.lattice_spacing();
    let mut x_bar = vec![C64::default(); k_users];
    let mut replica_points = vec![C64::default(); k_users];
    let mut offsets = vec![(0, 0); k_users];
    for (pos, &user) in ordering.iter().enumerate() {
        let base = spec.point(symbols[user]);
        let mut u = base;
        for l in 0..pos {
            u -= b[(pos, l)] * x_bar[l];
        }
        let (fr, fi) = lattice_offset(u, p);
        let v = C64::new(u.re - fr * p, u.im - fi * p);
        x_bar[pos] = v / b[(pos, pos)].re;
        replica_points[user] = C64::new(base.re - fr * p, base.im - fi * p);
        offsets[user] = (-fr as i64, -fi as i64);
    }
    let x: Vec<C64> = (&f * DVector::from_column_slice(&x_bar)).iter().copied().collect();
    Ok(ThpEncoding {
        ordering,
        f,
        b,
        x_bar,
        replica_points,
        offsets,
        modulo_basis: p,
        x,
    })
}

/// SEP-constrained refinement of a THP encoding: minimize `‖x‖²` subject to
/// boxes of half-width `delta` around each user's recorded replica point.
pub fn thp_optimized(
    h: &EffectiveChannel,
    encoding: &ThpEncoding,
    spec: &ConstellationSpec,
    delta: f64,
    options: &SolverOptions,
) -> Result<(Vec<C64>, SolveResult)> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("box half-width {delta} must be non-negative")));
    }
    let regions: Vec<_> = encoding
        .replica_points
        .iter()
        .enumerate()
        .map(|(k, &d)| box_region(k, d, delta))
        .collect();
    let system = assemble_qp(h, &regions, RowLayout::for_spec(spec))?;
    let result = solve(&system, options)?;
    Ok((unstack(&result.x), result))
}

/// `points` evenly spaced scalings on `[β⁻, 1.6β⁻]`.
pub fn default_beta_grid(sigma: f64, pe: f64, points: usize) -> Result<Vec<f64>> {
    let min = min_scaling_replica(sigma, pe)?;
    if points <= 1 {
        return Ok(vec![min]);
    }
    Ok((0..points)
        .map(|i| min * (1.0 + 0.6 * i as f64 / (points - 1) as f64))
        .collect())
}

/// Outcome of the uniform scaling search.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSelection {
    pub beta: f64,
    /// Mean optimized-THP power at each grid point.
    pub mean_power: Vec<f64>,
}

/// Picks the grid scaling that minimizes mean optimized-THP power over a
/// calibration set of `(channel, symbols)` slots.
pub fn select_uniform_beta(
    calibration: &[(EffectiveChannel, Vec<usize>)],
    modulation: Modulation,
    sigma: f64,
    pe: f64,
    grid: &[f64],
    options: &SolverOptions,
) -> Result<BetaSelection> {
    if grid.is_empty() || calibration.is_empty() {
        return Err(Error::InvalidParameter("empty scaling grid or calibration set".into()));
    }
    let mut mean_power = Vec::with_capacity(grid.len());
    for &beta in grid {
        let spec = ConstellationSpec::replica(modulation, sigma, pe, beta)?;
        let delta = spec.delta0()?;
        let mut total = 0.0;
        for (h, symbols) in calibration {
            let enc = thp_zf_encode(h, symbols, &spec)?;
            let (_, res) = thp_optimized(h, &enc, &spec, delta, options)?;
            total += res.power();
        }
        mean_power.push(total / calibration.len() as f64);
    }
    let best = (0..grid.len())
        .min_by(|&i, &j| mean_power[i].total_cmp(&mean_power[j]))
        .expect("grid is non-empty");
    Ok(BetaSelection {
        beta: grid[best],
        mean_power,
    })
}
