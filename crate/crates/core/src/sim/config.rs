//! Experiment configuration, loadable from TOML.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::TapProfile;
use crate::constellation::Modulation;
use crate::solver::SolverOptions;
use crate::{Error, Result};

/// Precoding scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// SEP-constrained minimum-power precoder solved by dual decomposition.
    Proposed,
    Zf,
    Rzf,
    ZfThp,
    OptThp,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Proposed,
        Scheme::Zf,
        Scheme::Rzf,
        Scheme::ZfThp,
        Scheme::OptThp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Zf => "zf",
            Scheme::Rzf => "rzf",
            Scheme::ZfThp => "zf-thp",
            Scheme::OptThp => "opt-thp",
        }
    }

    /// Whether the scheme transmits over the replica constellation.
    pub fn uses_replica(self) -> bool {
        matches!(self, Scheme::ZfThp | Scheme::OptThp)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown scheme '{s}'")))
    }
}

/// Everything that determines an experiment's output, together with the
/// master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of subcarriers `N`.
    pub n_subcarriers: usize,
    /// User counts `K` to sweep.
    pub users: Vec<usize>,
    /// Nonzeros per signature `L` to sweep.
    pub nonzeros: Vec<usize>,
    pub modulation: Modulation,
    /// Selects the replica-constellation schemes when `schemes` is empty.
    pub replica: bool,
    /// SEP targets to sweep.
    pub pe_targets: Vec<f64>,
    /// Noise spectral density; the per-dimension variance is `N₀/2`.
    pub n0: f64,
    pub slots: usize,
    /// Distinct signature matrices; consecutive blocks of
    /// `slots / signature_realizations` slots share one.
    pub signature_realizations: usize,
    pub schemes: Vec<Scheme>,
    /// Channel-estimation error standard deviations for the uncertainty sweep.
    pub sigma_e: Vec<f64>,
    pub seed: u64,
    /// Independent noise draws per precoded slot in BER runs.
    pub noise_draws: usize,
    pub taps: TapProfile,
    /// Points in the RZF regularizer grid (besides `k₂ = 0`).
    pub rzf_grid_points: usize,
    /// RZF grid span relative to `Kσ²/‖d‖²`.
    pub rzf_grid_span: (f64, f64),
    /// Uniform replica scalings tried on `[β⁻, 1.6β⁻]`.
    pub beta_grid_points: usize,
    /// Slots used to select the replica scaling for the optimized THP.
    pub calibration_slots: usize,
    /// Fixed replica scaling for the optimized THP, skipping calibration.
    pub opt_thp_beta: Option<f64>,
    /// Run slots on the rayon pool.
    pub parallel: bool,
    pub solver: SolverOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_subcarriers: 32,
            users: vec![32],
            nonzeros: vec![8],
            modulation: Modulation::Qam4,
            replica: false,
            pe_targets: vec![1e-3],
            n0: 1.0,
            slots: 1000,
            signature_realizations: 10,
            schemes: Vec::new(),
            sigma_e: Vec::new(),
            seed: 1,
            noise_draws: 100,
            taps: TapProfile::default(),
            rzf_grid_points: 40,
            rzf_grid_span: (1e-3, 1e2),
            beta_grid_points: 16,
            calibration_slots: 200,
            opt_thp_beta: None,
            parallel: false,
            solver: SolverOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Per-dimension noise standard deviation `σ = √(N₀/2)`.
    pub fn sigma(&self) -> f64 {
        (self.n0 / 2.0).sqrt()
    }

    /// Schemes to run, applying the replica default when none are listed.
    pub fn active_schemes(&self) -> Vec<Scheme> {
        if !self.schemes.is_empty() {
            return self.schemes.clone();
        }
        if self.replica {
            vec![Scheme::ZfThp, Scheme::OptThp]
        } else {
            vec![Scheme::Proposed, Scheme::Zf, Scheme::Rzf]
        }
    }

    /// Slots sharing one signature matrix.
    pub fn slots_per_signature(&self) -> usize {
        self.slots / self.signature_realizations
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_subcarriers == 0 || self.users.is_empty() || self.nonzeros.is_empty() {
            return bad("N, the user list and the nonzero list must be non-empty".into());
        }
        if let Some(&k) = self.users.iter().find(|&&k| k == 0 || k > self.n_subcarriers) {
            return bad(format!("K = {k} must lie in 1..=N"));
        }
        if let Some(&l) = self.nonzeros.iter().find(|&&l| l == 0 || l > self.n_subcarriers) {
            return bad(format!("L = {l} must lie in 1..=N"));
        }
        if self.pe_targets.is_empty() || self.pe_targets.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return bad("SEP targets must lie in (0, 1)".into());
        }
        if !(self.n0 > 0.0) {
            return bad("N0 must be positive".into());
        }
        if self.slots == 0
            || self.signature_realizations == 0
            || !self.slots.is_multiple_of(self.signature_realizations)
        {
            return bad(format!(
                "{} slots are not divisible into {} signature realizations",
                self.slots, self.signature_realizations
            ));
        }
        if self.sigma_e.iter().any(|&s| !(s >= 0.0)) {
            return bad("sigma_e values must be non-negative".into());
        }
        let (lo, hi) = self.rzf_grid_span;
        if !(lo > 0.0 && hi > lo) || self.rzf_grid_points < 2 {
            return bad("RZF grid needs 0 < lo < hi and at least two points".into());
        }
        if self.beta_grid_points == 0 || self.calibration_slots == 0 {
            return bad("replica scaling search needs at least one grid point and slot".into());
        }
        TapProfile::new(self.taps.n_taps, self.taps.decay_rate)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_and_defaults() {
        let cfg = ExperimentConfig::from_toml("users = [16, 32]\nmodulation = 16\nschemes = [\"proposed\", \"zf-thp\"]\n").unwrap();
        assert_eq!(cfg.users, vec![16, 32]);
        assert_eq!(cfg.modulation, Modulation::Qam16);
        assert_eq!(cfg.schemes, vec![Scheme::Proposed, Scheme::ZfThp]);
        assert_eq!(cfg.slots, 1000);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_inconsistent_values() {
        assert!(ExperimentConfig::from_toml("users = [40]").is_err());
        assert!(ExperimentConfig::from_toml("slots = 1001").is_err());
        assert!(ExperimentConfig::from_toml("pe_targets = [0.0]").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn scheme_names_roundtrip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        let cfg = ExperimentConfig {
            replica: true,
            ..Default::default()
        };
        assert!(cfg.active_schemes().iter().all(|s| s.uses_replica()));
    }
}
