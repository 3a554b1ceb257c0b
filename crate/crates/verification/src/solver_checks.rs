//! Dual solver against closed-form and exhaustive reference solutions.

use crate::{random_instance, reference_qp};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use sparse_precoder::channel::EffectiveChannel;
use sparse_precoder::constraints::{assemble_qp, Axis, ConstraintRegion, Equality, RowLayout};
use sparse_precoder::solver::{compute_kappa, primal_from_dual, solve, SolverOptions};
use sparse_precoder::C64;

fn tight() -> SolverOptions {
    SolverOptions {
        rel_tolerance: 1e-12,
        max_iterations: 400_000,
        ..Default::default()
    }
}

#[test]
fn equality_system_reaches_least_norm_solution() {
    // Orthogonal rows: each user sees disjoint subcarriers.
    let c = C64::new;
    let h = EffectiveChannel::from_rows(
        4,
        vec![vec![(0, c(1.0, 0.5)), (1, c(-0.3, 0.8))], vec![(2, c(0.7, -0.2)), (3, c(0.4, 0.9))]],
    )
    .unwrap();
    let targets = [c(1.5, -0.5), c(-2.0, 1.0)];
    let regions: Vec<ConstraintRegion> = targets
        .iter()
        .enumerate()
        .map(|(u, d)| ConstraintRegion {
            user: u,
            halfplanes: vec![],
            equalities: vec![
                Equality { axis: Axis::Real, value: d.re },
                Equality { axis: Axis::Imag, value: d.im },
            ],
        })
        .collect();
    let sys = assemble_qp(&h, &regions, RowLayout { inequality_rows_per_axis: 1, equality_rows: true }).unwrap();
    let b = DMatrix::from_fn(sys.b.n_rows(), sys.n_vars(), |i, j| sys.b.to_dense()[i][j]);
    let e = DVector::from_column_slice(&sys.e);
    let want = b.transpose() * (&b * b.transpose()).try_inverse().unwrap() * e;
    let res = solve(&sys, &tight()).unwrap();
    let err = (DVector::from_column_slice(&res.x) - &want).norm() / want.norm();
    assert!(err < 1e-6, "relative error {err}");
}

#[test]
fn worked_example_kappa_matches_dense_row_sums() {
    let c = C64::new;
    let h = EffectiveChannel::from_dense(&[
        vec![c(1.0, 1.0), c(-1.0, 1.0), c(0.0, 0.0)],
        vec![c(0.0, 0.0), c(1.0, 1.0), c(1.0, -1.0)],
    ])
    .unwrap();
    let spec = sparse_precoder::constraints::ConstellationSpec::replica(
        sparse_precoder::constellation::Modulation::Qam16,
        0.5,
        1e-3,
        2.0,
    )
    .unwrap();
    let regions = vec![
        sparse_precoder::constraints::constraint_region(0, 15, &spec).unwrap(),
        sparse_precoder::constraints::constraint_region(1, 10, &spec).unwrap(),
    ];
    let sys = assemble_qp(&h, &regions, RowLayout::for_spec(&spec)).unwrap();
    let a = sys.a.to_dense();
    let active: Vec<&Vec<f64>> = sys.active_inequalities().map(|i| &a[i]).collect();
    let gram = |p: &Vec<f64>, q: &Vec<f64>| p.iter().zip(q).map(|(x, y)| x * y).sum::<f64>();
    let want = active
        .iter()
        .map(|p| active.iter().map(|q| gram(p, q).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    assert!((compute_kappa(&sys).unwrap() - want).abs() < 1e-12);
}

#[test]
fn random_small_instances_match_exhaustive_reference() {
    let mut worst_obj = 0.0f64;
    let mut worst_viol = 0.0f64;
    let mut nonconverged = 0;
    for seed in 0..60 {
        let inst = random_instance(10_000 + seed);
        let (p_ref, _) = reference_qp(&inst.system);
        let res = solve(&inst.system, &tight()).unwrap();
        if !res.converged {
            nonconverged += 1;
            continue;
        }
        let scale = inst.system.bound_scale();
        worst_viol = worst_viol.max(inst.system.primal_violation(&res.x) / scale);
        worst_obj = worst_obj.max((res.power() - p_ref).abs() / p_ref.max(1e-12));
    }
    assert_eq!(nonconverged, 0);
    assert!(worst_obj <= 1e-3, "objective error {worst_obj}");
    assert!(worst_viol <= 1e-4, "violation {worst_viol}");
}

#[test]
fn converged_four_qam_never_exceeds_zero_forcing() {
    use sparse_precoder::constellation::Modulation;
    use sparse_precoder::sim::{draw_slot, precode, prepare_point, ExperimentConfig, Scheme};
    let cfg = ExperimentConfig {
        n_subcarriers: 8,
        users: vec![6],
        nonzeros: vec![3],
        modulation: Modulation::Qam4,
        slots: 30,
        signature_realizations: 3,
        solver: tight(),
        ..Default::default()
    };
    let setup = prepare_point(&cfg, 6, 3, 1e-3, &[Scheme::Proposed, Scheme::Zf]).unwrap();
    for s in 0..cfg.slots {
        let slot = draw_slot(&cfg, &setup, s).unwrap();
        let p = precode(&cfg, &setup, Scheme::Proposed, &slot.h, &slot.symbols).unwrap();
        let z = precode(&cfg, &setup, Scheme::Zf, &slot.h, &slot.symbols).unwrap();
        let power = |x: &[C64]| x.iter().map(|v| v.norm_sqr()).sum::<f64>();
        if p.converged {
            assert!(power(&p.x) <= power(&z.x) * (1.0 + 1e-3), "slot {s}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn returned_primal_is_bit_exact_function_of_duals(seed in 0u64..1_000_000) {
        let inst = random_instance(seed);
        let opts = SolverOptions { max_iterations: 50, ..Default::default() };
        let res = solve(&inst.system, &opts).unwrap();
        prop_assert!(res.lambda.iter().all(|&l| l >= 0.0));
        prop_assert_eq!(primal_from_dual(&inst.system, &res.lambda, &res.nu), res.x);
    }
}
