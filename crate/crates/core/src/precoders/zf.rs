use nalgebra::{DMatrix, DVector};

use crate::channel::EffectiveChannel;
use crate::{Error, Result, C64};

/// Gram matrices with a pivot ratio below this are treated as singular.
const MIN_PIVOT_RATIO: f64 = 1e-12;

/// `H†(HH† + k₂I)⁻¹d` via a Cholesky solve on the `K × K` Gram matrix.
pub fn regularized_preimage(h: &EffectiveChannel, d: &[C64], k2: f64) -> Result<Vec<C64>> {
    if d.len() != h.n_users() {
        return Err(Error::Dimension(format!(
            "{} symbols for {} users",
            d.len(),
            h.n_users()
        )));
    }
    if !(k2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("regularizer {k2} must be non-negative")));
    }
    let hd = h.to_dense();
    let mut gram: DMatrix<C64> = &hd * hd.adjoint();
    for i in 0..gram.nrows() {
        gram[(i, i)] += C64::new(k2, 0.0);
    }
    let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
    let pivots = chol.l_dirty().diagonal();
    let (lo, hi) = pivots
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.re), hi.max(p.re)));
    if !(lo * lo > MIN_PIVOT_RATIO * hi * hi) {
        return Err(Error::RankDeficient);
    }
    let z = chol.solve(&DVector::from_column_slice(d));
    Ok((hd.adjoint() * z).iter().copied().collect())
}

/// Zero-forcing precoder `x = H†(HH†)⁻¹d`, the minimum-norm solution of `Hx = d`.
pub fn zf_precode(h: &EffectiveChannel, d: &[C64]) -> Result<Vec<C64>> {
    regularized_preimage(h, d, 0.0)
}
