//! Reference computations that share no code path with the library under
//! test: an exhaustive active-set QP solver, Gaussian interval quadrature and
//! a generator of small random precoding problems.

#[cfg(test)]
mod format_checks;
#[cfg(test)]
mod solver_checks;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_precoder::channel::{effective_channel, generate_channel, TapProfile};
use sparse_precoder::constellation::Modulation;
use sparse_precoder::constraints::{
    assemble_qp, box_region, constraint_region, ConstellationSpec, ConstraintSystem, RowKind,
    RowLayout,
};
use sparse_precoder::signature::generate_regular_signatures;
use sparse_precoder::C64;

/// Exact minimum of `‖x‖²` subject to `Ax ≤ c`, `Bx = e`, found by
/// enumerating active sets. For each candidate set the minimum-norm point of
/// the affine hull is `Mᵀ(MMᵀ)⁺r`; the optimum is the
/// smallest feasible candidate. Rows that are both bounds of one axis of one
/// user are never active together.
pub fn reference_qp(sys: &ConstraintSystem) -> (f64, Vec<f64>) {
    let n = sys.n_vars();
    let a = sys.a.to_dense();
    let b = sys.b.to_dense();
    let ineq: Vec<usize> = sys.active_inequalities().collect();
    let eq: Vec<usize> = sys.active_equalities().collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut chosen = Vec::new();
    enumerate(sys, &ineq, 0, &mut chosen, &mut |set| {
        let rows = eq.len() + set.len();
        let x = if rows == 0 {
            vec![0.0; n]
        } else {
            let mut m = DMatrix::zeros(rows, n);
            let mut r = DVector::zeros(rows);
            for (k, &i) in eq.iter().enumerate() {
                for j in 0..n {
                    m[(k, j)] = b[i][j];
                }
                r[k] = sys.e[i];
            }
            for (k, &i) in set.iter().enumerate() {
                for j in 0..n {
                    m[(eq.len() + k, j)] = a[i][j];
                }
                r[eq.len() + k] = sys.c[i];
            }
            let gram = &m * m.transpose();
            let eps = 1e-13 * gram.amax().max(1.0);
            let x = m.transpose() * gram.pseudo_inverse(eps).expect("svd") * &r;
            if (&m * &x - &r).amax() > 1e-9 * (1.0 + r.amax()) {
                return;
            }
            x.iter().copied().collect()
        };
        let feasible = ineq.iter().all(|&i| {
            let ax: f64 = (0..n).map(|j| a[i][j] * x[j]).sum();
            ax <= sys.c[i] + 1e-9 * (1.0 + sys.c[i].abs())
        });
        if feasible {
            let p: f64 = x.iter().map(|v| v * v).sum();
            if best.as_ref().is_none_or(|(q, _)| p < *q) {
                best = Some((p, x));
            }
        }
    });
    best.expect("feasible problem")
}

fn enumerate(
    sys: &ConstraintSystem,
    rows: &[usize],
    from: usize,
    chosen: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    visit(chosen);
    for idx in from..rows.len() {
        let r = rows[idx];
        let pr = sys.a_rows[r];
        let clash = chosen.iter().any(|&q| {
            let pq = sys.a_rows[q];
            pq.user == pr.user && pq.axis == pr.axis && pq.kind != pr.kind
                && matches!(pq.kind, RowKind::Upper | RowKind::Lower)
        });
        if clash {
            continue;
        }
        chosen.push(r);
        enumerate(sys, rows, idx + 1, chosen, visit);
        chosen.pop();
    }
}

/// `P(lo ≤ y + z ≤ hi)` for `z ~ N(0, σ²)` by composite Simpson quadrature
/// of the Gaussian density, truncated at 40σ from `y`. Infinite `y` is
/// resolved as a limit.
pub fn gaussian_interval_quadrature(y: f64, lo: f64, hi: f64, sigma: f64) -> f64 {
    if y.is_infinite() {
        let inside = if y > 0.0 { hi == f64::INFINITY } else { lo == f64::NEG_INFINITY };
        return if inside { 1.0 } else { 0.0 };
    }
    let a = lo.max(y - 40.0 * sigma);
    let b = hi.min(y + 40.0 * sigma);
    if a >= b {
        return 0.0;
    }
    // integrate the density on windows around its mass only
    let mut total = 0.0;
    let panels = 20_000usize;
    let h = (b - a) / panels as f64;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let pdf = |t: f64| norm * (-(t - y) * (t - y) / (2.0 * sigma * sigma)).exp();
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        total += h / 6.0 * (pdf(x0) + 4.0 * pdf(0.5 * (x0 + x1)) + pdf(x1));
    }
    total
}

/// Which family of constraint regions a random instance uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InstanceKind {
    Qam4,
    Qam16,
    ReplicaBox,
}

/// A random small precoding problem built through the public pipeline.
pub struct Instance {
    pub kind: InstanceKind,
    pub n: usize,
    pub k: usize,
    pub system: ConstraintSystem,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = std::f64::consts::FRAC_1_SQRT_2;
    loop {
        let n = rng.random_range(2..=6usize);
        let k = rng.random_range(1..=n.min(4));
        let l = rng.random_range(1..=n);
        let Ok(sig) = generate_regular_signatures(k, n, l, rng.random()) else {
            continue;
        };
        let taps = TapProfile::new(rng.random_range(1..=n.min(4)), 0.5).unwrap();
        let ch = generate_channel(k, n, &taps, &mut rng);
        let Ok(h) = effective_channel(&sig, &ch) else {
            continue;
        };
        let pe = [1e-2, 1e-3][rng.random_range(0..2)];
        let kind = [InstanceKind::Qam4, InstanceKind::Qam16, InstanceKind::ReplicaBox]
            [rng.random_range(0..3)];
        let (spec, regions) = match kind {
            InstanceKind::Qam4 | InstanceKind::Qam16 => {
                let m = if kind == InstanceKind::Qam4 { Modulation::Qam4 } else { Modulation::Qam16 };
                let spec = ConstellationSpec::standard(m, sigma, pe).unwrap();
                let regions = (0..k)
                    .map(|u| constraint_region(u, rng.random_range(0..m.order()), &spec).unwrap())
                    .collect::<Vec<_>>();
                (spec, regions)
            }
            InstanceKind::ReplicaBox => {
                let m = [Modulation::Qam4, Modulation::Qam16][rng.random_range(0..2)];
                let min = sparse_precoder::constraints::min_scaling_replica(sigma, pe).unwrap();
                let spec = ConstellationSpec::replica(m, sigma, pe, min * rng.random_range(1.0..1.6)).unwrap();
                let delta = spec.delta0().unwrap();
                let p = spec.lattice_spacing();
                let regions = (0..k)
                    .map(|u| {
                        let shift = C64::new(
                            p * rng.random_range(-2..=2) as f64,
                            p * rng.random_range(-2..=2) as f64,
                        );
                        box_region(u, spec.point(rng.random_range(0..m.order())) + shift, delta)
                    })
                    .collect::<Vec<_>>();
                (spec, regions)
            }
        };
        let Ok(system) = assemble_qp(&h, &regions, RowLayout::for_spec(&spec)) else {
            continue;
        };
        if system.active_inequalities().next().is_none() && system.active_equalities().next().is_none() {
            continue;
        }
        // the regions must be jointly reachable
        if sparse_precoder::precoders::zf_precode(&h, &vec![C64::default(); k]).is_err() {
            continue;
        }
        return Instance { kind, n, k, system };
    }
}
