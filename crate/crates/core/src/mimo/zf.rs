use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::channel::{CMatrix, C64};
use crate::error::{Error, Result};

/// Per-GN precoders `Phi_g` (`A_g x A_g`) and combiners `Gamma_gu` (`A_g x A_u`).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingDesign {
    pub precoders: Vec<CMatrix>,
    pub combiners: Vec<CMatrix>,
}

impl BeamformingDesign {
    pub fn len(&self) -> usize {
        self.precoders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.precoders.is_empty()
    }
}

const RANK_TOL: f64 = 1e-12;

/// Zero-forcing design for the co-served set.
///
/// The combiner for GN `g` is its block of rows of the pseudo-inverse of the
/// stacked channel `[H_1 .. H_K]`, so `Gamma_g H_j = 0` for `j != g`. The
/// precoder spreads power equally over the right singular vectors of the
/// whitened post-nulling channel `(Gamma_g Gamma_g^H)^(-1/2) Gamma_g H_g`.
pub fn zf_design(channels: &[CMatrix]) -> Result<BeamformingDesign> {
    let first = channels.first().ok_or_else(|| Error::Empty("co-served channel set".into()))?;
    let a_u = first.nrows();
    if channels.iter().any(|h| h.nrows() != a_u || h.ncols() == 0) {
        return Err(Error::DimensionMismatch("channels must share the UAV antenna count".into()));
    }
    let streams: usize = channels.iter().map(|h| h.ncols()).sum();
    if streams > a_u {
        return Err(Error::InsufficientAntennas { available: a_u, required: streams });
    }

    let mut stacked = DMatrix::<C64>::zeros(a_u, streams);
    let mut offset = 0;
    for h in channels {
        stacked.columns_mut(offset, h.ncols()).copy_from(h);
        offset += h.ncols();
    }

    let h_adj = stacked.adjoint();
    let gram = &h_adj * &stacked;
    let chol = Cholesky::new(gram).ok_or(Error::RankDeficient)?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..streams).map(|i| l[(i, i)].re.powi(2)).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) || diag.iter().any(|&d| d <= RANK_TOL * max) {
        return Err(Error::RankDeficient);
    }
    let pinv = chol.solve(&h_adj);

    let mut precoders = Vec::with_capacity(channels.len());
    let mut combiners = Vec::with_capacity(channels.len());
    let mut offset = 0;
    for h in channels {
        let a_g = h.ncols();
        let gamma = pinv.rows(offset, a_g).into_owned();
        offset += a_g;

        let effective = &gamma * h;
        let noise_cov = &gamma * gamma.adjoint();
        let whitened_gram = match Cholesky::new(noise_cov) {
            Some(c) => effective.adjoint() * c.solve(&effective),
            None => return Err(Error::RankDeficient),
        };
        let eig = SymmetricEigen::new(hermitize(whitened_gram));
        let scale = 1.0 / (a_g as f64).sqrt();
        precoders.push(eig.eigenvectors.scale(scale));
        combiners.push(gamma);
    }
    Ok(BeamformingDesign { precoders, combiners })
}

pub(crate) fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()).scale(0.5)
}

/// Largest ratio of residual interference power `|Gamma_g H_j Phi_j|_F^2`
/// to signal power `|Gamma_g H_g Phi_g|_F^2` over `j != g`.
pub fn interference_ratio(design: &BeamformingDesign, channels: &[CMatrix], target: usize) -> f64 {
    let gamma = &design.combiners[target];
    let signal = (gamma * &channels[target] * &design.precoders[target]).norm_squared();
    channels
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target)
        .map(|(j, h)| (gamma * h * &design.precoders[j]).norm_squared() / signal)
        .fold(0.0, f64::max)
}
