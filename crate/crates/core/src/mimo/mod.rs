//! Multi-user uplink MIMO: zero-forcing design, instantaneous rate,
//! fading-averaged throughput and the latency-discounted service reward.

mod rate;
mod reward;
mod throughput;
mod zf;

pub use rate::{instantaneous_rate, instantaneous_rate_eigen};
pub use reward::{reward, service_outcome, ServiceOutcome};
pub use throughput::{average_throughput, batch_throughput, LinkThroughput};
pub use zf::{interference_ratio, zf_design, BeamformingDesign};

use crate::scenario::GroundNode;

/// Splits GNs into groups that can be co-served by a UAV with `uav_antennas`
/// antennas: ordered by priority (descending, ties by id), then packed
/// next-fit while the antenna sum fits.
pub fn antenna_batches<'a>(gns: &[&'a GroundNode], uav_antennas: usize) -> Vec<Vec<&'a GroundNode>> {
    let mut order: Vec<&GroundNode> = gns.to_vec();
    order.sort_by(|a, b| b.traffic.priority.total_cmp(&a.traffic.priority).then(a.id.cmp(&b.id)));
    let mut batches: Vec<Vec<&GroundNode>> = Vec::new();
    let mut used = 0;
    for g in order {
        match batches.last_mut() {
            Some(b) if used + g.antenna_count <= uav_antennas => {
                b.push(g);
                used += g.antenna_count;
            }
            _ => {
                batches.push(vec![g]);
                used = g.antenna_count;
            }
        }
    }
    batches
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::TrafficClass;
    use crate::Point3;

    #[test]
    fn batches_respect_antennas_and_priority() {
        let classes = TrafficClass::defaults();
        let gns: Vec<GroundNode> = (0..6)
            .map(|id| GroundNode {
                id,
                position: Point3::zeros(),
                antenna_count: 4,
                tx_power_w: 0.2,
                traffic: classes[(5 - id) % 4].clone(),
            })
            .collect();
        let refs: Vec<&GroundNode> = gns.iter().collect();
        let b = antenna_batches(&refs, 16);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].len(), 4);
        let prios: Vec<f64> = b.iter().flatten().map(|g| g.traffic.priority).collect();
        assert!(prios.windows(2).all(|w| w[0] >= w[1]));
    }
}
