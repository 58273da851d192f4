use nalgebra::{Cholesky, SymmetricEigen};

use super::zf::{hermitize, BeamformingDesign};
use crate::channel::CMatrix;
use crate::error::{Error, Result};

/// Interference-plus-noise covariance `J` after combining for GN `target`.
fn interference_plus_noise(
    design: &BeamformingDesign,
    channels: &[CMatrix],
    tx_power: &[f64],
    target: usize,
    noise: f64,
) -> CMatrix {
    let gamma = &design.combiners[target];
    let mut j = (gamma * gamma.adjoint()).scale(noise);
    for (k, h) in channels.iter().enumerate() {
        if k == target {
            continue;
        }
        let t = gamma * h * &design.precoders[k];
        j += (&t * t.adjoint()).scale(tx_power[k]);
    }
    j
}

fn check(design: &BeamformingDesign, channels: &[CMatrix], tx_power: &[f64], target: usize) -> Result<()> {
    if channels.len() != design.len() || tx_power.len() != design.len() || target >= design.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} channels, {} powers, {} designed links, target {target}",
            channels.len(),
            tx_power.len(),
            design.len()
        )));
    }
    Ok(())
}

/// Achievable uplink rate (bits/s) of GN `target` in a co-served set:
/// `B log2 det(I + P H^H Gamma^H J^-1 Gamma H Phi Phi^H)`, evaluated through
/// an LU determinant of the `A_g x A_g` matrix.
pub fn instantaneous_rate(
    design: &BeamformingDesign,
    channels: &[CMatrix],
    tx_power: &[f64],
    target: usize,
    bandwidth: f64,
    noise: f64,
) -> Result<f64> {
    check(design, channels, tx_power, target)?;
    let j = interference_plus_noise(design, channels, tx_power, target, noise);
    let j_inv = j.try_inverse().ok_or(Error::SingularInterference)?;
    if j_inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularInterference);
    }
    let g = &design.combiners[target] * &channels[target];
    let phi = &design.precoders[target];
    let a_g = phi.nrows();
    let upsilon =
        CMatrix::identity(a_g, a_g) + (g.adjoint() * j_inv * &g * phi * phi.adjoint()).scale(tx_power[target]);
    let det = upsilon.determinant();
    Ok((bandwidth * det.norm().log2()).max(0.0))
}

/// Same rate through the Hermitian form `det(I + P Phi^H G^H J^-1 G Phi)`
/// and its eigenvalues, with `J` factored by Cholesky.
pub fn instantaneous_rate_eigen(
    design: &BeamformingDesign,
    channels: &[CMatrix],
    tx_power: &[f64],
    target: usize,
    bandwidth: f64,
    noise: f64,
) -> Result<f64> {
    check(design, channels, tx_power, target)?;
    let j = interference_plus_noise(design, channels, tx_power, target, noise);
    let chol = Cholesky::new(hermitize(j)).ok_or(Error::SingularInterference)?;
    let gp = &design.combiners[target] * &channels[target] * &design.precoders[target];
    let s = (gp.adjoint() * chol.solve(&gp)).scale(tx_power[target]);
    let eig = SymmetricEigen::new(hermitize(s));
    let bits: f64 = eig.eigenvalues.iter().map(|&l| (1.0 + l.max(0.0)).log2()).sum();
    Ok(bandwidth * bits)
}
