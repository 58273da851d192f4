//! Service-position search: a bounding-box pruning of the voxel grid
//! followed by an exhaustive reward evaluation of the surviving voxels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mimo::{antenna_batches, batch_throughput, service_outcome, LinkThroughput};
use crate::scenario::{Environment, GroundNode, LatencyMode, SiteConfig, VoxelIndex};
use crate::Point3;

/// Everything needed to score a cluster at a candidate position.
#[derive(Debug, Clone)]
pub struct RewardEvaluator<'a> {
    pub env: &'a Environment,
    pub uav_antennas: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub latency: LatencyMode,
    /// Batches finishing after this many seconds earn nothing.
    pub deadline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnService {
    pub gn_id: usize,
    pub throughput: LinkThroughput,
    /// Payload over mean rate; infinite when the link carries nothing.
    pub harvest_time: f64,
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEvaluation {
    pub services: Vec<GnService>,
    /// Time each antenna batch occupies the UAV, in service order.
    pub batch_durations: Vec<f64>,
    /// Cluster reward when service starts at mission time zero.
    pub reward: f64,
}

impl ClusterEvaluation {
    pub fn service_time(&self) -> f64 {
        self.batch_durations.iter().sum()
    }
}

impl RewardEvaluator<'_> {
    /// Serves `members` batch by batch from `p_u`; a batch starts when the
    /// previous one has finished.
    pub fn evaluate(&self, p_u: &Point3, members: &[&GroundNode]) -> Result<ClusterEvaluation> {
        let mut services = Vec::with_capacity(members.len());
        let mut batch_durations = Vec::new();
        let mut reward = 0.0;
        let mut start = 0.0;
        for (b, batch) in antenna_batches(members, self.uav_antennas).into_iter().enumerate() {
            let rates = batch_throughput(p_u, &batch, self.uav_antennas, self.env, self.mc_samples, self.seed)?;
            let mut duration: f64 = 0.0;
            let mut batch_reward = 0.0;
            for (g, t) in batch.iter().zip(rates) {
                let harvest_time = match service_outcome(g, t.mean_rate, start, self.latency) {
                    Ok(o) => {
                        batch_reward += o.reward;
                        duration = duration.max(o.harvest_time);
                        o.harvest_time
                    }
                    Err(Error::ZeroRate) => f64::INFINITY,
                    Err(e) => return Err(e),
                };
                services.push(GnService { gn_id: g.id, throughput: t, harvest_time, batch: b });
            }
            if start + duration <= self.deadline {
                reward += batch_reward;
            }
            batch_durations.push(duration);
            start += duration;
        }
        Ok(ClusterEvaluation { services, batch_durations, reward })
    }

    pub fn reward(&self, p_u: &Point3, members: &[&GroundNode]) -> Result<f64> {
        Ok(self.evaluate(p_u, members)?.reward)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServicePosition {
    pub cluster: usize,
    pub voxel: VoxelIndex,
    pub coordinate: Point3,
    pub cluster_reward: f64,
    pub evaluation: ClusterEvaluation,
}

impl ServicePosition {
    pub fn at_voxel(
        site: &SiteConfig,
        cluster: usize,
        voxel: VoxelIndex,
        members: &[&GroundNode],
        eval: &RewardEvaluator,
    ) -> Result<Self> {
        let coordinate = site.voxel_center(voxel);
        Self::at_point(site, cluster, coordinate, members, eval)
    }

    /// Position at an arbitrary point, scored there.
    pub fn at_point(
        site: &SiteConfig,
        cluster: usize,
        coordinate: Point3,
        members: &[&GroundNode],
        eval: &RewardEvaluator,
    ) -> Result<Self> {
        let voxel = site.voxel_index(&coordinate)?;
        let evaluation = eval.evaluate(&coordinate, members)?;
        Ok(ServicePosition { cluster, voxel, coordinate, cluster_reward: evaluation.reward, evaluation })
    }
}

/// Voxels whose footprint meets the members' bounding rectangle, at every altitude level.
pub fn bounding_box_voxels(site: &SiteConfig, members: &[&GroundNode]) -> Result<Vec<VoxelIndex>> {
    if members.is_empty() {
        return Err(Error::Empty("cluster has no members".into()));
    }
    let lo = members.iter().fold(Point3::repeat(f64::INFINITY), |a, g| a.inf(&g.position));
    let hi = members.iter().fold(Point3::repeat(f64::NEG_INFINITY), |a, g| a.sup(&g.position));
    let (_, _, nz) = site.dims();
    let a = site.voxel_index(&Point3::new(lo.x, lo.y, 0.0))?;
    let b = site.voxel_index(&Point3::new(hi.x, hi.y, 0.0))?;
    let mut out = Vec::new();
    for ix in a.ix..=b.ix {
        for iy in a.iy..=b.iy {
            for iz in 0..nz {
                out.push(VoxelIndex { ix, iy, iz });
            }
        }
    }
    Ok(out)
}

/// Exhaustive argmax of the cluster reward over `voxels`; ties go to the
/// lexicographically smallest index.
pub fn fine_search(
    site: &SiteConfig,
    voxels: &[VoxelIndex],
    cluster: usize,
    members: &[&GroundNode],
    eval: &RewardEvaluator,
) -> Result<ServicePosition> {
    let mut candidates = voxels.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    let mut best: Option<(VoxelIndex, f64)> = None;
    for &v in &candidates {
        let r = eval.reward(&site.voxel_center(v), members)?;
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((v, r));
        }
    }
    let (voxel, _) = best.ok_or_else(|| Error::Empty("no candidate voxels".into()))?;
    ServicePosition::at_voxel(site, cluster, voxel, members, eval)
}
