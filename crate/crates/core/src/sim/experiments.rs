//! Monte-Carlo drivers for the power, BER and channel-uncertainty studies.

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{
    complex_gaussian, effective_channel, generate_channel, normalized_uncertainty,
    perturb_channel, EffectiveChannel,
};
use crate::constraints::{
    assemble_qp, constraint_region, unstack, ConstellationSpec, ConstraintRegion, RowLayout,
};
use crate::precoders::{
    default_beta_grid, regularized_preimage, rzf_precode, select_uniform_beta, thp_optimized,
    thp_zf_encode, zf_precode,
};
use crate::rng::{derive_seed, stream, Domain};
use crate::signature::{generate_regular_signatures, SignatureMatrix};
use crate::solver::{solve, OpCounters};
use crate::{Error, Result, C64};

use super::config::{ExperimentConfig, Scheme};
use super::detect::{bit_errors, detect_qam, detect_replica};

/// Channel redraws allowed per slot before a rank-deficient signature is
/// reported.
const MAX_REDRAWS: usize = 100;

/// One operating point of one scheme, aggregated over all slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub k: usize,
    pub n: usize,
    pub l: usize,
    pub m: usize,
    pub replica: bool,
    pub pe_target: f64,
    pub power_linear: f64,
    pub power_db: f64,
    /// Empirical symbol error rate (BER studies only).
    pub sep: Option<f64>,
    pub ber: Option<f64>,
    pub iters_mean: f64,
    pub messages_mean: f64,
    pub adds_mean: f64,
    pub muls_mean: f64,
    pub slots: usize,
    /// Standard error of the mean power.
    pub stderr_power: f64,
    /// Constellation scaling used by the scheme.
    pub beta: f64,
    /// Noisy symbol decisions behind `sep`.
    pub symbol_trials: u64,
    pub symbol_errors: u64,
    pub bit_trials: u64,
    pub bit_errors: u64,
    /// Solver runs that stopped without meeting the tolerances.
    pub nonconverged: usize,
    /// Slots whose noiseless output left a user's region (truthful channel only).
    pub infeasible: usize,
    /// Fraction of slots where the RZF search chose `k₂ = 0`.
    pub k2_zero_fraction: Option<f64>,
    /// Channel redraws caused by rank deficiency.
    pub redraws: usize,
    pub sigma_e: Option<f64>,
    /// Mean per-slot normalized estimation error in dB.
    pub tau_db: Option<f64>,
}

/// Per-slot record kept for auditing the aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotLogEntry {
    pub scheme: Scheme,
    pub k: usize,
    pub l: usize,
    pub pe_target: f64,
    pub sigma_e: Option<f64>,
    pub slot: usize,
    pub power: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub slot_log: Vec<SlotLogEntry>,
}

/// One transmission slot: the true effective channel and the data symbols.
#[derive(Debug, Clone)]
pub struct Slot {
    pub index: usize,
    pub h: EffectiveChannel,
    pub symbols: Vec<usize>,
    pub redraws: usize,
}

/// Output of one scheme on one channel.
#[derive(Debug, Clone)]
pub struct Precoded {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub counters: OpCounters,
    pub converged: bool,
    pub k2: Option<f64>,
    /// Regions the noiseless output must meet, for schemes that have them.
    pub regions: Option<Vec<ConstraintRegion>>,
}

/// Scheme parameters fixed for one `(K, L, Pe)` operating point.
#[derive(Debug, Clone)]
pub struct PointSetup {
    pub k: usize,
    pub l: usize,
    pub pe: f64,
    pub standard: ConstellationSpec,
    pub replica_min: ConstellationSpec,
    /// Replica constellation and box half-width for the optimized THP.
    pub opt_thp: Option<(ConstellationSpec, f64)>,
    pub signatures: Vec<SignatureMatrix>,
}

fn is_full_row_rank(h: &EffectiveChannel) -> bool {
    regularized_preimage(h, &vec![C64::default(); h.n_users()], 0.0).is_ok()
}

/// Signature matrices for every realization of an operating point.
pub fn draw_signatures(cfg: &ExperimentConfig, k: usize, l: usize) -> Result<Vec<SignatureMatrix>> {
    (0..cfg.signature_realizations)
        .map(|r| {
            let seed = derive_seed(cfg.seed, Domain::Signature, &[k as u64, l as u64, r as u64]);
            generate_regular_signatures(k, cfg.n_subcarriers, l, seed)
        })
        .collect()
}

fn draw_on(
    cfg: &ExperimentConfig,
    signature: &SignatureMatrix,
    domain_channel: Domain,
    domain_data: Domain,
    key: &[u64],
    index: usize,
) -> Result<Slot> {
    let k = signature.n_users();
    let mut redraws = 0;
    let h = loop {
        let mut idx = key.to_vec();
        idx.push(redraws as u64);
        let mut rng = stream(cfg.seed, domain_channel, &idx);
        let ch = generate_channel(k, cfg.n_subcarriers, &cfg.taps, &mut rng);
        let h = effective_channel(signature, &ch)?;
        if is_full_row_rank(&h) {
            break h;
        }
        redraws += 1;
        if redraws > MAX_REDRAWS {
            return Err(Error::RankDeficient);
        }
    };
    let mut rng = stream(cfg.seed, domain_data, key);
    let order = cfg.modulation.order();
    let symbols = (0..k).map(|_| rng.random_range(0..order)).collect();
    Ok(Slot {
        index,
        h,
        symbols,
        redraws,
    })
}

/// Draws slot `s` of an operating point. Channels and data do not depend on
/// the SEP target or the scheme.
pub fn draw_slot(cfg: &ExperimentConfig, setup: &PointSetup, s: usize) -> Result<Slot> {
    let signature = &setup.signatures[s / cfg.slots_per_signature()];
    let key = [setup.k as u64, setup.l as u64, s as u64];
    draw_on(cfg, signature, Domain::Channel, Domain::Data, &key, s)
}

fn draw_calibration_slot(cfg: &ExperimentConfig, setup: &PointSetup, c: usize) -> Result<Slot> {
    let signature = &setup.signatures[c % setup.signatures.len()];
    let key = [setup.k as u64, setup.l as u64, c as u64];
    draw_on(cfg, signature, Domain::Calibration, Domain::Calibration, &key, c)
}

/// Scalings, signatures and, when the optimized THP is requested, the
/// uniform replica scaling chosen on an independent calibration set.
pub fn prepare_point(
    cfg: &ExperimentConfig,
    k: usize,
    l: usize,
    pe: f64,
    schemes: &[Scheme],
) -> Result<PointSetup> {
    let sigma = cfg.sigma();
    let standard = ConstellationSpec::standard(cfg.modulation, sigma, pe)?;
    let min = crate::constraints::min_scaling_replica(sigma, pe)?;
    let replica_min = ConstellationSpec::replica(cfg.modulation, sigma, pe, min)?;
    let signatures = draw_signatures(cfg, k, l)?;
    let mut setup = PointSetup {
        k,
        l,
        pe,
        standard,
        replica_min,
        opt_thp: None,
        signatures,
    };
    if schemes.contains(&Scheme::OptThp) {
        let beta = match cfg.opt_thp_beta {
            Some(b) => b,
            None => {
                let calibration = map_slots(cfg, cfg.calibration_slots, |c| {
                    draw_calibration_slot(cfg, &setup, c).map(|s| (s.h, s.symbols))
                })?;
                let grid = default_beta_grid(sigma, pe, cfg.beta_grid_points)?;
                select_uniform_beta(&calibration, cfg.modulation, sigma, pe, &grid, &cfg.solver)?.beta
            }
        };
        let spec = ConstellationSpec::replica(cfg.modulation, sigma, pe, beta)?;
        let delta = spec.delta0()?;
        setup.opt_thp = Some((spec, delta));
    }
    Ok(setup)
}

fn standard_regions(symbols: &[usize], spec: &ConstellationSpec) -> Result<Vec<ConstraintRegion>> {
    symbols
        .iter()
        .enumerate()
        .map(|(k, &s)| constraint_region(k, s, spec))
        .collect()
}

/// Runs one scheme on channel `h` (the precoder's view of the channel).
pub fn precode(
    cfg: &ExperimentConfig,
    setup: &PointSetup,
    scheme: Scheme,
    h: &EffectiveChannel,
    symbols: &[usize],
) -> Result<Precoded> {
    let plain = |x: Vec<C64>, regions| Precoded {
        x,
        iterations: 0,
        counters: OpCounters::default(),
        converged: true,
        k2: None,
        regions,
    };
    match scheme {
        Scheme::Proposed => {
            let regions = standard_regions(symbols, &setup.standard)?;
            let system = assemble_qp(h, &regions, RowLayout::for_spec(&setup.standard))?;
            let res = solve(&system, &cfg.solver)?;
            Ok(Precoded {
                x: unstack(&res.x),
                iterations: res.iterations,
                counters: res.counters,
                converged: res.converged,
                k2: None,
                regions: Some(regions),
            })
        }
        Scheme::Zf => {
            let d: Vec<C64> = symbols.iter().map(|&s| setup.standard.point(s)).collect();
            let regions = standard_regions(symbols, &setup.standard)?;
            Ok(plain(zf_precode(h, &d)?, Some(regions)))
        }
        Scheme::Rzf => {
            let d: Vec<C64> = symbols.iter().map(|&s| setup.standard.point(s)).collect();
            let regions = standard_regions(symbols, &setup.standard)?;
            let d_norm: f64 = d.iter().map(|v| v.norm_sqr()).sum();
            let scale = setup.k as f64 * cfg.sigma().powi(2) / d_norm;
            let grid = rzf_grid(cfg, scale);
            let r = rzf_precode(h, &d, &regions, &grid)?;
            let mut p = plain(r.x, Some(regions));
            p.k2 = Some(r.k2);
            Ok(p)
        }
        Scheme::ZfThp => {
            let enc = thp_zf_encode(h, symbols, &setup.replica_min)?;
            let regions = thp_regions(&enc.replica_points, 0.0);
            Ok(plain(enc.x, Some(regions)))
        }
        Scheme::OptThp => {
            let (spec, delta) = setup
                .opt_thp
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("optimized THP was not prepared".into()))?;
            let enc = thp_zf_encode(h, symbols, spec)?;
            let (x, res) = thp_optimized(h, &enc, spec, *delta, &cfg.solver)?;
            Ok(Precoded {
                x,
                iterations: res.iterations,
                counters: res.counters,
                converged: res.converged,
                k2: None,
                regions: Some(thp_regions(&enc.replica_points, *delta)),
            })
        }
    }
}

fn thp_regions(points: &[C64], delta: f64) -> Vec<ConstraintRegion> {
    points
        .iter()
        .enumerate()
        .map(|(k, &d)| crate::constraints::box_region(k, d, delta))
        .collect()
}

fn rzf_grid(cfg: &ExperimentConfig, scale: f64) -> Vec<f64> {
    let (lo, hi) = cfg.rzf_grid_span;
    let (a, b) = ((lo * scale).log10(), (hi * scale).log10());
    let n = cfg.rzf_grid_points;
    std::iter::once(0.0)
        .chain((0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)))
        .collect()
}

fn map_slots<T: Send>(
    cfg: &ExperimentConfig,
    n: usize,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if cfg.parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn scheme_beta(setup: &PointSetup, scheme: Scheme) -> f64 {
    match scheme {
        Scheme::Proposed | Scheme::Zf | Scheme::Rzf => setup.standard.beta,
        Scheme::ZfThp => setup.replica_min.beta,
        Scheme::OptThp => setup.opt_thp.as_ref().map_or(f64::NAN, |(s, _)| s.beta),
    }
}

/// Per-slot measurements of one scheme.
#[derive(Debug, Clone, Default)]
struct SlotStats {
    power: f64,
    iterations: usize,
    counters: OpCounters,
    converged: bool,
    infeasible: bool,
    k2_zero: bool,
    symbol_errors: u64,
    bit_errors: u64,
    trials: u64,
    tau_db: f64,
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    Power,
    Ber,
    Uncertainty(f64),
}

fn feasibility_violated(regions: &[ConstraintRegion], y: &[C64]) -> bool {
    regions.iter().any(|r| {
        let scale = r
            .halfplanes
            .iter()
            .map(|p| p.bound.abs())
            .chain(r.equalities.iter().map(|q| q.value.abs()))
            .fold(1.0, f64::max);
        r.violation(y[r.user]) > 1e-4 * scale
    })
}

fn count_errors(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    beta: f64,
    y_clean: &[C64],
    symbols: &[usize],
    key: &[u64],
) -> (u64, u64, u64) {
    let m = cfg.modulation;
    let mut rng = stream(cfg.seed, Domain::Noise, key);
    let (mut se, mut be, mut trials) = (0, 0, 0);
    for _ in 0..cfg.noise_draws {
        for (k, &yc) in y_clean.iter().enumerate() {
            let y = yc + complex_gaussian(&mut rng, cfg.n0);
            let rx = if scheme.uses_replica() {
                detect_replica(y, beta, m)
            } else {
                detect_qam(y, beta, m)
            };
            if rx != symbols[k] {
                se += 1;
                be += bit_errors(symbols[k], rx, m) as u64;
            }
            trials += 1;
        }
    }
    (se, be, trials)
}

fn run_slot(
    cfg: &ExperimentConfig,
    setup: &PointSetup,
    schemes: &[Scheme],
    slot: &Slot,
    mode: Mode,
    sigma_index: u64,
) -> Result<Vec<SlotStats>> {
    let (h_design, tau_db) = match mode {
        Mode::Uncertainty(sigma_e) => {
            let mut rng = stream(
                cfg.seed,
                Domain::Estimation,
                &[setup.k as u64, setup.l as u64, slot.index as u64, sigma_index],
            );
            let h_hat = perturb_channel(&slot.h, sigma_e, &mut rng)?;
            let tau = normalized_uncertainty(&h_hat, &slot.h)?;
            (h_hat, tau)
        }
        _ => (slot.h.clone(), f64::NEG_INFINITY),
    };
    schemes
        .iter()
        .map(|&scheme| {
            let p = precode(cfg, setup, scheme, &h_design, &slot.symbols)?;
            let y = slot.h.apply(&p.x);
            let mut st = SlotStats {
                power: p.x.iter().map(|v| v.norm_sqr()).sum(),
                iterations: p.iterations,
                counters: p.counters,
                converged: p.converged,
                k2_zero: p.k2 == Some(0.0),
                tau_db,
                ..Default::default()
            };
            if matches!(mode, Mode::Power | Mode::Ber) {
                if let Some(regions) = &p.regions {
                    st.infeasible = feasibility_violated(regions, &y);
                }
            }
            if matches!(mode, Mode::Ber | Mode::Uncertainty(_)) {
                let key = [setup.k as u64, setup.l as u64, slot.index as u64, sigma_index];
                let beta = scheme_beta(setup, scheme);
                let (se, be, trials) = count_errors(cfg, scheme, beta, &y, &slot.symbols, &key);
                st.symbol_errors = se;
                st.bit_errors = be;
                st.trials = trials;
            }
            Ok(st)
        })
        .collect()
}

fn aggregate(
    cfg: &ExperimentConfig,
    setup: &PointSetup,
    scheme: Scheme,
    stats: &[&SlotStats],
    redraws: usize,
    mode: Mode,
) -> ResultRow {
    let n = stats.len() as f64;
    let mean = |f: &dyn Fn(&SlotStats) -> f64| stats.iter().map(|s| f(s)).sum::<f64>() / n;
    let power = mean(&|s| s.power);
    let var = stats.iter().map(|s| (s.power - power).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let symbol_trials: u64 = stats.iter().map(|s| s.trials).sum();
    let symbol_errors: u64 = stats.iter().map(|s| s.symbol_errors).sum();
    let bit_errors: u64 = stats.iter().map(|s| s.bit_errors).sum();
    let bits = cfg.modulation.bits_per_symbol() as u64;
    let with_noise = !matches!(mode, Mode::Power);
    ResultRow {
        scheme,
        k: setup.k,
        n: cfg.n_subcarriers,
        l: setup.l,
        m: cfg.modulation.order(),
        replica: scheme.uses_replica(),
        pe_target: setup.pe,
        power_linear: power,
        power_db: 10.0 * power.log10(),
        sep: with_noise.then(|| symbol_errors as f64 / symbol_trials as f64),
        ber: with_noise.then(|| bit_errors as f64 / (symbol_trials * bits) as f64),
        iters_mean: mean(&|s| s.iterations as f64),
        messages_mean: mean(&|s| s.counters.messages as f64),
        adds_mean: mean(&|s| s.counters.additions as f64),
        muls_mean: mean(&|s| s.counters.multiplications as f64),
        slots: stats.len(),
        stderr_power: (var / n).sqrt(),
        beta: scheme_beta(setup, scheme),
        symbol_trials,
        symbol_errors,
        bit_trials: symbol_trials * bits,
        bit_errors,
        nonconverged: stats.iter().filter(|s| !s.converged).count(),
        infeasible: stats.iter().filter(|s| s.infeasible).count(),
        k2_zero_fraction: (scheme == Scheme::Rzf)
            .then(|| stats.iter().filter(|s| s.k2_zero).count() as f64 / n),
        redraws,
        sigma_e: match mode {
            Mode::Uncertainty(s) => Some(s),
            _ => None,
        },
        tau_db: match mode {
            Mode::Uncertainty(_) => Some(mean(&|s| s.tau_db)),
            _ => None,
        },
    }
}

fn run(cfg: &ExperimentConfig, modes: &[Mode]) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let schemes = cfg.active_schemes();
    let mut out = ExperimentOutput::default();
    for &k in &cfg.users {
        for &l in &cfg.nonzeros {
            for &pe in &cfg.pe_targets {
                let setup = prepare_point(cfg, k, l, pe, &schemes)?;
                let slots = map_slots(cfg, cfg.slots, |s| draw_slot(cfg, &setup, s))?;
                let redraws = slots.iter().map(|s| s.redraws).sum();
                for (mi, &mode) in modes.iter().enumerate() {
                    let per_slot = map_slots(cfg, slots.len(), |s| {
                        run_slot(cfg, &setup, &schemes, &slots[s], mode, mi as u64)
                    })?;
                    for (j, &scheme) in schemes.iter().enumerate() {
                        let stats: Vec<&SlotStats> = per_slot.iter().map(|v| &v[j]).collect();
                        out.rows.push(aggregate(cfg, &setup, scheme, &stats, redraws, mode));
                        let sigma_e = match mode {
                            Mode::Uncertainty(s) => Some(s),
                            _ => None,
                        };
                        out.slot_log.extend(stats.iter().enumerate().map(|(s, st)| SlotLogEntry {
                            scheme,
                            k,
                            l,
                            pe_target: pe,
                            sigma_e,
                            slot: s,
                            power: st.power,
                            iterations: st.iterations,
                        }));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Mean transmit power per scheme over every `(K, L, Pe)` in the config.
pub fn run_power_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run(cfg, &[Mode::Power])
}

/// Power together with empirical SEP and BER from `noise_draws` independent
/// noise realizations per slot and user.
pub fn run_ber_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run(cfg, &[Mode::Ber])
}

/// BER when precoding uses a perturbed channel estimate, one row per scheme
/// and `σ_e` in the sweep. Reception always goes through the true channel.
pub fn run_uncertainty_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.sigma_e.is_empty() {
        return Err(Error::InvalidParameter("uncertainty sweep needs sigma_e values".into()));
    }
    let modes: Vec<Mode> = cfg.sigma_e.iter().map(|&s| Mode::Uncertainty(s)).collect();
    run(cfg, &modes)
}
