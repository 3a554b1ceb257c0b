//! Frequency-selective channels and the sparse effective channel.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::signature::{FactorGraph, SignatureMatrix};
use crate::{Error, Result, C64};

/// Exponential power-delay profile: tap `q` has variance `λ̄·e^{−q·decay}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapProfile {
    pub n_taps: usize,
    pub decay_rate: f64,
}

impl Default for TapProfile {
    fn default() -> Self {
        TapProfile {
            n_taps: 8,
            decay_rate: 0.25,
        }
    }
}

impl TapProfile {
    pub fn new(n_taps: usize, decay_rate: f64) -> Result<Self> {
        if n_taps == 0 {
            return Err(Error::InvalidParameter("n_taps must be at least 1".into()));
        }
        if !(decay_rate > 0.0) {
            return Err(Error::InvalidParameter("decay_rate must be positive".into()));
        }
        Ok(TapProfile { n_taps, decay_rate })
    }

    /// Tap variances, normalized in closed form to sum to one.
    pub fn variances(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.n_taps)
            .map(|q| (-(q as f64) * self.decay_rate).exp())
            .collect();
        let norm = 1.0 / raw.iter().sum::<f64>();
        raw.into_iter().map(|v| v * norm).collect()
    }
}

/// Per-user time-domain taps and the resulting frequency response.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<Vec<C64>>,
    pub freq_response: Vec<Vec<C64>>,
}

/// `h̃_n = Σ_q g_q e^{−j2πqn/N}` for `n = 0..N`.
pub fn frequency_response(taps: &[C64], n_subcarriers: usize) -> Vec<C64> {
    (0..n_subcarriers)
        .map(|n| {
            taps.iter()
                .enumerate()
                .map(|(q, &g)| {
                    let phase = -2.0 * PI * ((q * n) % n_subcarriers) as f64 / n_subcarriers as f64;
                    g * C64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect()
}

/// Circularly symmetric complex Gaussian with total variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Draws independent channels for `n_users` users.
pub fn generate_channel<R: Rng + ?Sized>(
    n_users: usize,
    n_subcarriers: usize,
    profile: &TapProfile,
    rng: &mut R,
) -> ChannelRealization {
    let variances = profile.variances();
    let taps: Vec<Vec<C64>> = (0..n_users)
        .map(|_| variances.iter().map(|&v| complex_gaussian(rng, v)).collect())
        .collect();
    let freq_response = taps
        .iter()
        .map(|g| frequency_response(g, n_subcarriers))
        .collect();
    ChannelRealization {
        taps,
        freq_response,
    }
}

/// Sparse `K × N` complex channel seen by the precoder, `h_{k,n} = s_{k,n}·h̃_{k,n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    n_subcarriers: usize,
    rows: Vec<Vec<(usize, C64)>>,
    graph: FactorGraph,
}

impl EffectiveChannel {
    /// Builds from explicit sparse rows (sorted by column internally).
    pub fn from_rows(n_subcarriers: usize, mut rows: Vec<Vec<(usize, C64)>>) -> Result<Self> {
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            if row.iter().any(|&(c, _)| c >= n_subcarriers) {
                return Err(Error::Dimension("channel column exceeds N".into()));
            }
        }
        let graph = FactorGraph::from_rows(n_subcarriers, rows.clone());
        Ok(EffectiveChannel {
            n_subcarriers,
            rows,
            graph,
        })
    }

    /// Builds from a dense matrix, keeping exactly the nonzero entries.
    pub fn from_dense(dense: &[Vec<C64>]) -> Result<Self> {
        let n = dense.first().map_or(0, Vec::len);
        if dense.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged dense channel".into()));
        }
        let rows = dense
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != C64::new(0.0, 0.0))
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self::from_rows(n, rows)
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn row(&self, k: usize) -> &[(usize, C64)] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<(usize, C64)>] {
        &self.rows
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn get(&self, k: usize, n: usize) -> C64 {
        self.rows[k]
            .iter()
            .find(|&&(c, _)| c == n)
            .map_or(C64::new(0.0, 0.0), |&(_, v)| v)
    }

    /// Noiseless receive vector `ȳ = Hx`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n_subcarriers);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, h)| h * x[c]).sum())
            .collect()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|(_, h)| h.norm_sqr()))
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n_users(), self.n_subcarriers);
        for (k, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(k, c)] = v;
            }
        }
        m
    }

    /// Same support, rows permuted: row `i` of the result is row `order[i]`.
    pub fn permute_rows(&self, order: &[usize]) -> Self {
        let rows = order.iter().map(|&k| self.rows[k].clone()).collect();
        Self::from_rows(self.n_subcarriers, rows).expect("permutation keeps columns in range")
    }

    fn support_matches(&self, other: &Self) -> bool {
        self.n_subcarriers == other.n_subcarriers
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.0 == y.0))
    }
}

/// Masks the per-user frequency responses with the signature support.
pub fn effective_channel(
    s: &SignatureMatrix,
    channels: &ChannelRealization,
) -> Result<EffectiveChannel> {
    if channels.freq_response.len() != s.n_users()
        || channels
            .freq_response
            .iter()
            .any(|h| h.len() != s.n_subcarriers())
    {
        return Err(Error::Dimension(
            "channel realization does not match signature dimensions".into(),
        ));
    }
    let rows = s
        .rows()
        .iter()
        .zip(&channels.freq_response)
        .map(|(sig, h)| sig.iter().map(|&(c, v)| (c, h[c] * v)).collect())
        .collect();
    EffectiveChannel::from_rows(s.n_subcarriers(), rows)
}

/// Adds i.i.d. `CN(0, σ_e²)` estimation error to every nonzero of `H`.
pub fn perturb_channel<R: Rng + ?Sized>(
    h: &EffectiveChannel,
    sigma_e: f64,
    rng: &mut R,
) -> Result<EffectiveChannel> {
    if !(sigma_e >= 0.0) {
        return Err(Error::InvalidParameter("sigma_e must be non-negative".into()));
    }
    if sigma_e == 0.0 {
        return Ok(h.clone());
    }
    let var = sigma_e * sigma_e;
    let rows = h
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(c, v)| (c, v + complex_gaussian(rng, var)))
                .collect()
        })
        .collect();
    EffectiveChannel::from_rows(h.n_subcarriers(), rows)
}

/// `10·log₁₀(‖Ĥ − H‖_F² / ‖H‖_F²)` for one realization; `−∞` when `Ĥ = H`.
pub fn normalized_uncertainty(h_hat: &EffectiveChannel, h: &EffectiveChannel) -> Result<f64> {
    if !h_hat.support_matches(h) {
        return Err(Error::Dimension("estimated channel support differs".into()));
    }
    let denom = h.frobenius_sq();
    if denom == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let num: f64 = h_hat
        .rows()
        .iter()
        .zip(h.rows())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x.1 - y.1).norm_sqr()))
        .sum();
    Ok(10.0 * (num / denom).log10())
}
