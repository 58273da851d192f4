//! Probabilistic air-to-ground channel: distance pathloss per link state,
//! elevation-dependent LoS probability and Rician small-scale fading.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{link_geometry, Environment};
use crate::Point3;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkState {
    Los,
    Nlos,
}

/// `H = sqrt(beta) * fading`, with `fading` of shape `A_u x A_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub beta: f64,
    pub state: LinkState,
    pub fading: CMatrix,
}

impl ChannelRealization {
    pub fn matrix(&self) -> CMatrix {
        self.fading.scale(self.beta.sqrt())
    }
}

/// Large-scale gain at distance `d` (meters, at least 1).
pub fn pathloss(d: f64, state: LinkState, env: &Environment) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(Error::BelowReferenceDistance(d));
    }
    Ok(match state {
        LinkState::Los => env.beta0() * d.powf(-env.alpha_los),
        LinkState::Nlos => env.nlos_attenuation * env.beta0() * d.powf(-env.alpha_nlos),
    })
}

/// Logistic LoS probability in the elevation angle (degrees).
pub fn p_los(theta_deg: f64, z1: f64, z2: f64) -> f64 {
    1.0 / (1.0 + z1 * (-z2 * (theta_deg - z1)).exp())
}

pub fn rician_k(theta_deg: f64, k1: f64, k2: f64) -> f64 {
    k1 * (k2 * theta_deg).exp()
}

/// Rows x columns of the most square uniform planar array with `n` elements.
fn upa_shape(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt().floor() as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    (rows.max(1), n / rows.max(1))
}

/// Half-wavelength UPA steering vector (array in the horizontal plane) for a
/// unit direction `dir`. Entries are unit-modulus.
pub fn steering(n: usize, dir: &Point3) -> DVector<C64> {
    let (_, cols) = upa_shape(n);
    DVector::from_fn(n, |k, _| {
        let (m, c) = (k / cols, k % cols);
        let phase = std::f64::consts::PI * (m as f64 * dir.x + c as f64 * dir.y);
        C64::from_polar(1.0, phase)
    })
}

/// Deterministic rank-one LoS term `a_u a_g^H` along the geometric GN-UAV direction.
pub fn los_component(p_u: &Point3, p_g: &Point3, a_u: usize, a_g: usize) -> CMatrix {
    let diff = p_g - p_u;
    let norm = diff.norm();
    let dir = if norm > 0.0 { diff / norm } else { Point3::new(0.0, 0.0, -1.0) };
    let au = steering(a_u, &dir);
    let ag = steering(a_g, &(-dir));
    &au * ag.adjoint()
}

/// I.i.d. circularly-symmetric unit-variance complex Gaussian entries.
pub fn rayleigh<R: Rng + ?Sized>(a_u: usize, a_g: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(a_u, a_g, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// `sqrt(K/(K+1)) det + sqrt(1/(K+1)) diffuse`. Infinite `K` yields the pure LoS term.
pub fn rician_mix(det: &CMatrix, diffuse: &CMatrix, k: f64) -> CMatrix {
    if k.is_infinite() {
        return det.clone();
    }
    let w_det = (k / (k + 1.0)).sqrt();
    let w_diff = (1.0 / (k + 1.0)).sqrt();
    det.scale(w_det) + diffuse.scale(w_diff)
}

/// One channel realization: the link state is drawn from the LoS
/// probability, LoS links get Rician fading around the steering term and
/// NLoS links get pure Rayleigh fading.
pub fn sample_channel<R: Rng + ?Sized>(
    p_u: &Point3,
    p_g: &Point3,
    a_u: usize,
    a_g: usize,
    env: &Environment,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if a_g == 0 || a_u < a_g {
        return Err(Error::DimensionMismatch(format!("A_u = {a_u}, A_g = {a_g}")));
    }
    let (d, theta) = link_geometry(p_u, p_g)?;
    let draw: f64 = rng.random();
    let state = if draw < p_los(theta, env.z1, env.z2) { LinkState::Los } else { LinkState::Nlos };
    let diffuse = rayleigh(a_u, a_g, rng);
    let fading = match state {
        LinkState::Los => {
            let k = rician_k(theta, env.k1, env.k2);
            rician_mix(&los_component(p_u, p_g, a_u, a_g), &diffuse, k)
        }
        LinkState::Nlos => diffuse,
    };
    Ok(ChannelRealization { beta: pathloss(d, state, env)?, state, fading })
}
