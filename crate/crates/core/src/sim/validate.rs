//! Self-checks run by the `validate` command on a few slots of a
//! configuration.

use crate::constraints::{assemble_qp, constraint_region, ConstraintRegion, RowLayout};
use crate::precoders::{thp_zf_encode, zf_precode};
use crate::signature::validate_regularity;
use crate::solver::{per_iteration_counters, solve, SolverOptions};
use crate::{Result, C64};

use super::config::{ExperimentConfig, Scheme};
use super::experiments::{draw_slot, precode, prepare_point, run_power_experiment};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

fn region_scale(r: &ConstraintRegion) -> f64 {
    r.halfplanes
        .iter()
        .map(|p| p.bound.abs())
        .chain(r.equalities.iter().map(|q| q.value.abs()))
        .fold(1.0, f64::max)
}

/// Runs the invariant suite on the first operating point of `cfg`, using
/// `slots` slots.
pub fn run_validation(cfg: &ExperimentConfig, slots: usize) -> Result<Vec<CheckResult>> {
    cfg.validate()?;
    let (k, l, pe) = (cfg.users[0], cfg.nonzeros[0], cfg.pe_targets[0]);
    let schemes = [Scheme::Proposed, Scheme::Zf, Scheme::Rzf, Scheme::ZfThp];
    let setup = prepare_point(cfg, k, l, pe, &schemes)?;
    let mut out = Vec::new();

    let bad_sigs = setup
        .signatures
        .iter()
        .filter(|s| !validate_regularity(s).valid)
        .count();
    out.push(check(
        "signature regularity",
        bad_sigs == 0,
        format!("{bad_sigs} of {} realizations irregular", setup.signatures.len()),
    ));

    let slots = slots.min(cfg.slots).max(1);
    let (mut zf_res, mut thp_res, mut tri, mut worst_margin) = (0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    let (mut rzf_over, mut par_mismatch, mut counter_mismatch) = (0usize, 0usize, 0usize);
    for s in 0..slots {
        let slot = draw_slot(cfg, &setup, s)?;
        let h = &slot.h;
        let d: Vec<C64> = slot.symbols.iter().map(|&v| setup.standard.point(v)).collect();
        let x = zf_precode(h, &d)?;
        let dmax = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let res = h.apply(&x).iter().zip(&d).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        zf_res = zf_res.max(res / dmax);
        let zf_power: f64 = x.iter().map(|v| v.norm_sqr()).sum();

        let enc = thp_zf_encode(h, &slot.symbols, &setup.replica_min)?;
        let y = h.apply(&enc.x);
        for (a, b) in y.iter().zip(&enc.replica_points) {
            thp_res = thp_res.max((a - b).norm());
        }
        let bmax = enc.b.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 0..k {
            for j in i + 1..k {
                tri = tri.max(enc.b[(i, j)].norm() / bmax);
            }
        }

        let p = precode(cfg, &setup, Scheme::Proposed, h, &slot.symbols)?;
        let y = h.apply(&p.x);
        if p.converged {
            for r in p.regions.as_ref().expect("proposed scheme has regions") {
                worst_margin = worst_margin.max(r.violation(y[r.user]) / region_scale(r));
            }
        }

        let r = precode(cfg, &setup, Scheme::Rzf, h, &slot.symbols)?;
        let rp: f64 = r.x.iter().map(|v| v.norm_sqr()).sum();
        if rp > zf_power * (1.0 + 1e-9) {
            rzf_over += 1;
        }

        let regions: Vec<_> = slot
            .symbols
            .iter()
            .enumerate()
            .map(|(u, &v)| constraint_region(u, v, &setup.standard))
            .collect::<Result<_>>()?;
        let system = assemble_qp(h, &regions, RowLayout::for_spec(&setup.standard))?;
        let seq = solve(&system, &cfg.solver)?;
        let par = solve(
            &system,
            &SolverOptions {
                parallel: true,
                ..cfg.solver.clone()
            },
        )?;
        if seq != par {
            par_mismatch += 1;
        }
        if cfg.modulation == crate::constellation::Modulation::Qam4
            && per_iteration_counters(&system).messages != (4 * k * l) as u64
        {
            counter_mismatch += 1;
        }
    }
    out.push(check("zero-forcing exactness", zf_res < 1e-8, format!("max relative residual {zf_res:.3e}")));
    out.push(check("THP zero interference", thp_res < 1e-8, format!("max residual {thp_res:.3e}")));
    out.push(check("THP triangularity", tri < 1e-10, format!("max relative upper entry {tri:.3e}")));
    out.push(check(
        "proposed conservativeness",
        worst_margin <= 1e-4,
        format!("worst scaled violation {worst_margin:.3e}"),
    ));
    out.push(check("RZF never above ZF", rzf_over == 0, format!("{rzf_over} slots above ZF power")));
    out.push(check(
        "parallel solver bit-identical",
        par_mismatch == 0,
        format!("{par_mismatch} mismatching solves"),
    ));
    if cfg.modulation == crate::constellation::Modulation::Qam4 {
        out.push(check(
            "message count 4KL per iteration",
            counter_mismatch == 0,
            format!("{counter_mismatch} mismatching systems"),
        ));
    }

    let small = ExperimentConfig {
        users: vec![k],
        nonzeros: vec![l],
        pe_targets: vec![pe],
        slots: cfg.signature_realizations,
        schemes: vec![Scheme::Proposed, Scheme::Zf],
        ..cfg.clone()
    };
    let a = run_power_experiment(&small)?;
    let b = run_power_experiment(&small)?;
    out.push(check(
        "bit-identical reruns",
        a == b,
        format!("{} rows compared", a.rows.len()),
    ));
    let mean_ok = a.rows.iter().all(|r| {
        let logged: Vec<f64> = a
            .slot_log
            .iter()
            .filter(|e| e.scheme == r.scheme)
            .map(|e| e.power)
            .collect();
        let mean = logged.iter().sum::<f64>() / logged.len() as f64;
        (mean - r.power_linear).abs() <= 1e-12 * mean
    });
    out.push(check("power equals mean of slot log", mean_ok, String::new()));
    Ok(out)
}
