use serde::{Deserialize, Serialize};

use super::{instantaneous_rate, zf_design};
use crate::channel::{los_component, p_los, pathloss, rayleigh, rician_k, rician_mix, CMatrix, LinkState};
use crate::error::{Error, Result};
use crate::rng;
use crate::scenario::{link_geometry, Environment, GroundNode};
use crate::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkThroughput {
    /// Mean of the LoS/NLoS-mixed rate over fading draws, bits/s.
    pub mean_rate: f64,
    pub sample_count: usize,
    /// 95% normal-approximation half-width of the mean, bits/s.
    pub half_width: f64,
}

struct LinkGeometry {
    beta_los: f64,
    beta_nlos: f64,
    p_los: f64,
    k: f64,
    los_term: CMatrix,
    power: f64,
}

/// Fading-averaged throughput of every GN in a co-served batch.
///
/// Each draw mixes the LoS and NLoS rates with the elevation-dependent LoS
/// probability. Both states share the draw's diffuse component, and the ZF
/// design is recomputed per draw and per state. The diffuse component of GN
/// `g` in draw `k` comes from its own stream `(seed, k, g.id)`, so a GN sees
/// the same fading whatever else is in the batch.
pub fn batch_throughput(
    p_u: &Point3,
    gns: &[&GroundNode],
    uav_antennas: usize,
    env: &Environment,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<LinkThroughput>> {
    if n_samples == 0 {
        return Err(Error::Empty("n_samples must be at least 1".into()));
    }
    if gns.is_empty() {
        return Ok(Vec::new());
    }
    let links = gns
        .iter()
        .map(|g| {
            let (d, theta) = link_geometry(p_u, &g.position)?;
            Ok(LinkGeometry {
                beta_los: pathloss(d, LinkState::Los, env)?,
                beta_nlos: pathloss(d, LinkState::Nlos, env)?,
                p_los: p_los(theta, env.z1, env.z2),
                k: rician_k(theta, env.k1, env.k2),
                los_term: los_component(p_u, &g.position, uav_antennas, g.antenna_count),
                power: env.relative_tx_power(g.tx_power_w),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let powers: Vec<f64> = links.iter().map(|l| l.power).collect();
    let noise = env.noise_power();
    let bw = env.bandwidth_hz;

    let n = gns.len();
    let mut mean = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut los_h = Vec::with_capacity(n);
    let mut nlos_h = Vec::with_capacity(n);
    for k in 0..n_samples {
        los_h.clear();
        nlos_h.clear();
        for (g, l) in gns.iter().zip(&links) {
            let mut r = rng::stream(seed, &[k as u64, g.id as u64]);
            let diffuse = rayleigh(uav_antennas, g.antenna_count, &mut r);
            los_h.push(rician_mix(&l.los_term, &diffuse, l.k).scale(l.beta_los.sqrt()));
            nlos_h.push(diffuse.scale(l.beta_nlos.sqrt()));
        }
        let los_design = zf_design(&los_h)?;
        let nlos_design = zf_design(&nlos_h)?;
        for (i, l) in links.iter().enumerate() {
            let r_los = instantaneous_rate(&los_design, &los_h, &powers, i, bw, noise)?;
            let r_nlos = instantaneous_rate(&nlos_design, &nlos_h, &powers, i, bw, noise)?;
            let sample = l.p_los * r_los + (1.0 - l.p_los) * r_nlos;
            let delta = sample - mean[i];
            mean[i] += delta / (k + 1) as f64;
            m2[i] += delta * (sample - mean[i]);
        }
    }
    Ok(mean
        .into_iter()
        .zip(m2)
        .map(|(mean_rate, m2)| {
            let half_width = if n_samples > 1 {
                let var = m2 / (n_samples - 1) as f64;
                1.96 * (var / n_samples as f64).sqrt()
            } else {
                0.0
            };
            LinkThroughput { mean_rate: mean_rate.max(0.0), sample_count: n_samples, half_width }
        })
        .collect())
}

/// Throughput of `gn` while the GNs in `co_served` transmit concurrently.
pub fn average_throughput(
    p_u: &Point3,
    gn: &GroundNode,
    co_served: &[&GroundNode],
    uav_antennas: usize,
    env: &Environment,
    n_samples: usize,
    seed: u64,
) -> Result<LinkThroughput> {
    let mut set: Vec<&GroundNode> = vec![gn];
    set.extend(co_served.iter().copied().filter(|g| g.id != gn.id));
    Ok(batch_throughput(p_u, &set, uav_antennas, env, n_samples, seed)?[0])
}
