use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{GroundNode, LatencyMode, TrafficClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceOutcome {
    /// `nu / R_bar`, seconds.
    pub harvest_time: f64,
    pub reward: f64,
    /// Seconds from mission start until the payload is fully received.
    pub completion_time: f64,
}

/// `chi * gamma^((latency - delta_max) / 60 s)`: the discount compounds per minute.
pub fn reward(class: &TrafficClass, latency_s: f64) -> f64 {
    class.priority * class.discount.powf((latency_s - class.max_latency_s) / 60.0)
}

/// Harvest time, completion time and reward for one GN whose transmission
/// starts `elapsed_before_service` seconds into the mission.
pub fn service_outcome(
    gn: &GroundNode,
    mean_rate: f64,
    elapsed_before_service: f64,
    mode: LatencyMode,
) -> Result<ServiceOutcome> {
    if !(mean_rate > 0.0) {
        return Err(Error::ZeroRate);
    }
    let harvest_time = gn.traffic.payload_bits / mean_rate;
    let completion_time = elapsed_before_service + harvest_time;
    let latency = match mode {
        LatencyMode::Elapsed => completion_time,
        LatencyMode::Literal => harvest_time,
    };
    Ok(ServiceOutcome { harvest_time, reward: reward(&gn.traffic, latency), completion_time })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point3;

    fn gn(class: TrafficClass) -> GroundNode {
        GroundNode { id: 0, position: Point3::zeros(), antenna_count: 4, tx_power_w: 0.2, traffic: class }
    }

    #[test]
    fn on_deadline_pays_priority() {
        for c in TrafficClass::defaults() {
            assert_eq!(reward(&c, c.max_latency_s), c.priority);
        }
    }

    #[test]
    fn telemetry_one_minute_late() {
        let t = &TrafficClass::defaults()[0];
        assert!((reward(t, t.max_latency_s + 60.0) - 10.0).abs() < 1e-12);
        assert!(reward(t, t.max_latency_s - 1.0) > t.priority);
    }

    #[test]
    fn outcome_modes() {
        let t = TrafficClass::defaults()[0].clone();
        let g = gn(t.clone());
        // 256 Mb at 25.6 Mb/s -> 10 s
        let el = service_outcome(&g, 25.6e6, 100.0, LatencyMode::Elapsed).unwrap();
        assert!((el.harvest_time - 10.0).abs() < 1e-12);
        assert!((el.completion_time - 110.0).abs() < 1e-12);
        assert!((el.reward - reward(&t, 110.0)).abs() < 1e-9 * el.reward);
        let lit = service_outcome(&g, 25.6e6, 100.0, LatencyMode::Literal).unwrap();
        assert!((lit.reward - reward(&t, 10.0)).abs() < 1e-9 * lit.reward);
        assert!(matches!(service_outcome(&g, 0.0, 0.0, LatencyMode::Elapsed), Err(Error::ZeroRate)));
    }
}
