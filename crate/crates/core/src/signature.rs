//! Regular sparse signature ensemble.
//!
//! Each user spreads its symbol over exactly `L` of the `N` subcarriers with
//! i.i.d. Rademacher signs scaled by `1/√L`. Subcarrier loads are balanced: at
//! full load every subcarrier carries exactly `L` users, otherwise either
//! `⌊αL⌋` or `⌊αL⌋ + 1` with `α = K/N`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, C64};

const MAX_RESTARTS: usize = 1000;

/// `K × N` sparse spreading matrix; row `k` is the signature of user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMatrix {
    n_users: usize,
    n_subcarriers: usize,
    nonzeros_per_user: usize,
    seed: u64,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SignatureMatrix {
    /// Wraps explicit rows. No regularity check is made; use
    /// [`validate_regularity`] for that.
    pub fn from_rows(
        n_subcarriers: usize,
        nonzeros_per_user: usize,
        seed: u64,
        mut rows: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            if row.iter().any(|&(c, _)| c >= n_subcarriers) {
                return Err(Error::Dimension(format!(
                    "signature column exceeds N={n_subcarriers}"
                )));
            }
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Dimension("duplicate signature column".into()));
            }
        }
        Ok(SignatureMatrix {
            n_users: rows.len(),
            n_subcarriers,
            nonzeros_per_user,
            seed,
            rows,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn nonzeros_per_user(&self) -> usize {
        self.nonzeros_per_user
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Nonzeros of user `k` as `(subcarrier, value)`, sorted by subcarrier.
    pub fn row(&self, k: usize) -> &[(usize, f64)] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.rows[k]
            .iter()
            .find(|&&(c, _)| c == n)
            .map_or(0.0, |&(_, v)| v)
    }

    pub fn column_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_subcarriers];
        for row in &self.rows {
            for &(c, _) in row {
                deg[c] += 1;
            }
        }
        deg
    }

    /// Connectivity with the signature values as edge weights.
    pub fn factor_graph(&self) -> FactorGraph {
        FactorGraph::from_rows(
            self.n_subcarriers,
            self.rows
                .iter()
                .map(|r| r.iter().map(|&(c, v)| (c, C64::new(v, 0.0))).collect())
                .collect(),
        )
    }
}

/// Bipartite graph between precoded-symbol nodes (subcarriers) and
/// output-symbol nodes (users).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    /// `psn_adjacency[n]`: users connected to subcarrier `n`, ascending.
    pub psn_adjacency: Vec<Vec<usize>>,
    /// `osn_adjacency[k]`: subcarriers connected to user `k`, ascending.
    pub osn_adjacency: Vec<Vec<usize>>,
    /// `edge_weights[k][j]` is the weight of edge `(k, osn_adjacency[k][j])`.
    pub edge_weights: Vec<Vec<C64>>,
}

impl FactorGraph {
    pub fn from_rows(n_subcarriers: usize, rows: Vec<Vec<(usize, C64)>>) -> Self {
        let mut psn_adjacency = vec![Vec::new(); n_subcarriers];
        let mut osn_adjacency = Vec::with_capacity(rows.len());
        let mut edge_weights = Vec::with_capacity(rows.len());
        for (k, row) in rows.into_iter().enumerate() {
            let (cols, weights): (Vec<usize>, Vec<C64>) = row.into_iter().unzip();
            for &n in &cols {
                psn_adjacency[n].push(k);
            }
            osn_adjacency.push(cols);
            edge_weights.push(weights);
        }
        FactorGraph {
            psn_adjacency,
            osn_adjacency,
            edge_weights,
        }
    }

    pub fn n_edges(&self) -> usize {
        self.osn_adjacency.iter().map(Vec::len).sum()
    }
}

/// Draws a regular (or nearly regular) signature matrix.
///
/// The support is built from a pool of subcarrier slots in which every
/// subcarrier appears `⌊αL⌋` times and `K·L − N·⌊αL⌋` randomly chosen
/// subcarriers appear once more. The shuffled pool is dealt `L` slots per
/// user; users dealt the same subcarrier twice are repaired with random slot
/// swaps between users, restarting from a fresh shuffle if repair stalls.
pub fn generate_regular_signatures(
    n_users: usize,
    n_subcarriers: usize,
    nonzeros_per_user: usize,
    seed: u64,
) -> Result<SignatureMatrix> {
    let (k, n, l) = (n_users, n_subcarriers, nonzeros_per_user);
    let reject = |reason| Error::NoAdmissiblePattern { k, n, l, reason };
    if k == 0 || n == 0 || l == 0 {
        return Err(reject("K, N and L must be positive"));
    }
    if l > n {
        return Err(reject("L exceeds N"));
    }
    if k > n {
        return Err(reject("K exceeds N"));
    }
    let base = k * l / n;
    let extra = k * l - n * base;
    if k == n && extra != 0 {
        return Err(reject("full load requires K·L divisible by N"));
    }
    if base + usize::from(extra > 0) > k {
        return Err(reject("column degree would exceed K"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = if l == n {
        vec![(0..n).collect::<Vec<_>>(); k]
    } else {
        deal_support(k, n, l, base, extra, &mut rng)
            .ok_or_else(|| reject("slot-swap repair exhausted its restart budget"))?
    };

    let scale = 1.0 / (l as f64).sqrt();
    let rows = support
        .into_iter()
        .map(|cols| {
            cols.into_iter()
                .map(|c| (c, if rng.random::<bool>() { scale } else { -scale }))
                .collect()
        })
        .collect();
    SignatureMatrix::from_rows(n, l, seed, rows)
}

fn deal_support<R: Rng>(
    k: usize,
    n: usize,
    l: usize,
    base: usize,
    extra: usize,
    rng: &mut R,
) -> Option<Vec<Vec<usize>>> {
    let max_swaps = 200 * k * l;
    for _ in 0..MAX_RESTARTS {
        let mut heavy: Vec<usize> = (0..n).collect();
        heavy.shuffle(rng);
        let mut pool: Vec<usize> = Vec::with_capacity(k * l);
        for c in 0..n {
            pool.extend(std::iter::repeat_n(c, base));
        }
        pool.extend_from_slice(&heavy[..extra]);
        pool.shuffle(rng);

        // counts[u][c]: how many of user u's slots hold subcarrier c
        let mut counts = vec![vec![0u16; n]; k];
        for (p, &c) in pool.iter().enumerate() {
            counts[p / l][c] += 1;
        }

        let mut swaps = 0;
        loop {
            let Some(p) = (0..pool.len()).find(|&p| counts[p / l][pool[p]] > 1) else {
                let mut support: Vec<Vec<usize>> = pool.chunks(l).map(<[usize]>::to_vec).collect();
                support.iter_mut().for_each(|s| s.sort_unstable());
                return Some(support);
            };
            if swaps >= max_swaps {
                break;
            }
            swaps += 1;
            let u = p / l;
            let q = rng.random_range(0..pool.len());
            let v = q / l;
            if u == v {
                continue;
            }
            let (cp, cq) = (pool[p], pool[q]);
            if cp == cq || counts[u][cq] > 0 || counts[v][cp] > 0 {
                continue;
            }
            counts[u][cp] -= 1;
            counts[u][cq] += 1;
            counts[v][cq] -= 1;
            counts[v][cp] += 1;
            pool.swap(p, q);
        }
    }
    None
}

/// Outcome of [`validate_regularity`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub valid: bool,
    /// Row degree → number of users with that degree.
    pub row_degree_histogram: BTreeMap<usize, usize>,
    /// Column degree → number of subcarriers with that degree.
    pub column_degree_histogram: BTreeMap<usize, usize>,
    pub bad_rows: Vec<usize>,
    pub bad_columns: Vec<usize>,
    /// `(user, subcarrier)` entries whose magnitude is not exactly `1/√L`.
    pub bad_entries: Vec<(usize, usize)>,
}

/// Checks the row-degree, column-degree and entry-magnitude invariants.
pub fn validate_regularity(s: &SignatureMatrix) -> RegularityReport {
    let (k, n, l) = (s.n_users(), s.n_subcarriers(), s.nonzeros_per_user());
    let mut row_hist = BTreeMap::new();
    let mut bad_rows = Vec::new();
    let mut bad_entries = Vec::new();
    let scale = 1.0 / (l as f64).sqrt();
    for (u, row) in s.rows().iter().enumerate() {
        *row_hist.entry(row.len()).or_insert(0) += 1;
        if row.len() != l {
            bad_rows.push(u);
        }
        for &(c, v) in row {
            if v != scale && v != -scale {
                bad_entries.push((u, c));
            }
        }
    }

    let base = (k * l).checked_div(n).unwrap_or(0);
    let mut col_hist = BTreeMap::new();
    let mut bad_columns = Vec::new();
    for (c, d) in s.column_degrees().into_iter().enumerate() {
        *col_hist.entry(d).or_insert(0) += 1;
        let ok = if k == n { d == l } else { d == base || d == base + 1 };
        if !ok {
            bad_columns.push(c);
        }
    }

    RegularityReport {
        valid: bad_rows.is_empty() && bad_columns.is_empty() && bad_entries.is_empty(),
        row_degree_histogram: row_hist,
        column_degree_histogram: col_hist,
        bad_rows,
        bad_columns,
        bad_entries,
    }
}
