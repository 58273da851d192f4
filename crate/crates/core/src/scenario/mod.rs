//! Deployment site, ground nodes, UAV fleet and all configuration ingestion.
//!
//! A scenario is described by a TOML document. Every field has a default
//! taken from the reference simulation setup (3 km x 3 km x 150 m site,
//! 6 UAVs, 36 GNs, 5 MHz channels, 3000 s missions), so a config file only
//! needs to list what it overrides. Unknown keys are rejected.

mod grid;

pub use grid::{link_geometry, SiteConfig, VoxelIndex};

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::Point3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficClass {
    pub name: String,
    /// Priority `chi`.
    pub priority: f64,
    /// Maximum latency `delta_max` in seconds.
    pub max_latency_s: f64,
    /// Payload size `nu` in bits.
    pub payload_bits: f64,
    /// Post-deadline discount `gamma`, applied per minute of lateness.
    pub discount: f64,
}

impl TrafficClass {
    fn new(name: &str, priority: f64, max_latency_min: f64, payload_mbit: f64, discount: f64) -> Self {
        TrafficClass {
            name: name.to_string(),
            priority,
            max_latency_s: max_latency_min * 60.0,
            payload_bits: payload_mbit * 1e6,
            discount,
        }
    }

    /// The four reference traffic flows: telemetry, video, image, file.
    pub fn defaults() -> Vec<TrafficClass> {
        vec![
            TrafficClass::new("telemetry", 100.0, 9.1, 256.0, 0.10),
            TrafficClass::new("video", 84.0, 11.6, 1387.0, 0.24),
            TrafficClass::new("image", 72.0, 14.5, 512.0, 0.33),
            TrafficClass::new("file", 24.0, 19.0, 536.0, 0.80),
        ]
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !(self.priority > 0.0) {
            return Err(Error::invalid(format!("{path}.priority"), "priority must be positive"));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::invalid(format!("{path}.discount"), "discount must lie in (0, 1)"));
        }
        if !(self.payload_bits > 0.0) {
            return Err(Error::invalid(format!("{path}.payload_bits"), "payload must be positive"));
        }
        if !(self.max_latency_s > 0.0) {
            return Err(Error::invalid(format!("{path}.max_latency_s"), "max latency must be positive"));
        }
        Ok(())
    }
}

/// Radio environment constants.
///
/// `beta0_db` is the received per-antenna SNR at 1 m for a GN transmitting at
/// `reference_tx_power_dbm`; the noise power `B*N0` is normalised to one and
/// folded into that reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Environment {
    pub beta0_db: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub nlos_attenuation: f64,
    pub z1: f64,
    pub z2: f64,
    pub k1: f64,
    pub k2: f64,
    pub bandwidth_hz: f64,
    pub reference_tx_power_dbm: f64,
    pub gravity: f64,
    pub air_density: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            beta0_db: 40.0,
            alpha_los: 2.0,
            alpha_nlos: 2.8,
            nlos_attenuation: 0.2,
            z1: 9.61,
            z2: 0.16,
            k1: 1.0,
            k2: 0.05,
            bandwidth_hz: 5e6,
            reference_tx_power_dbm: 23.0,
            gravity: 9.81,
            air_density: 1.23,
        }
    }
}

impl Environment {
    pub fn beta0(&self) -> f64 {
        10f64.powf(self.beta0_db / 10.0)
    }

    /// Normalised noise power after combining, per unit `Gamma Gamma^H`.
    pub fn noise_power(&self) -> f64 {
        1.0
    }

    /// Transmit power relative to the reference power baked into `beta0`.
    pub fn relative_tx_power(&self, tx_power_w: f64) -> f64 {
        tx_power_w / dbm_to_watts(self.reference_tx_power_dbm)
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_los", self.alpha_los),
            ("alpha_nlos", self.alpha_nlos),
            ("nlos_attenuation", self.nlos_attenuation),
            ("z1", self.z1),
            ("z2", self.z2),
            ("k1", self.k1),
            ("bandwidth_hz", self.bandwidth_hz),
            ("gravity", self.gravity),
            ("air_density", self.air_density),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("environment.{name}"), "must be positive"));
            }
        }
        if self.k2 < 0.0 {
            return Err(Error::invalid("environment.k2", "must be non-negative"));
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Rotor power constants `C0..C4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Airframe {
    /// Weight `varrho` in newtons.
    pub weight: f64,
    pub fuselage_drag_ratio: f64,
    pub rotor_solidity: f64,
    /// Rotor disc area in m^2.
    pub rotor_disc_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavSpec {
    pub id: usize,
    pub antenna_count: usize,
    pub power: PowerConstants,
    pub airframe: Airframe,
    pub v_max: f64,
    pub a_max: f64,
    /// Average mobility power budget in watts.
    pub p_avg: f64,
    /// Index into the site's depot list.
    pub home_depot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetConfig {
    pub count: usize,
    pub antenna_count: usize,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub weight: f64,
    pub fuselage_drag_ratio: f64,
    pub rotor_solidity: f64,
    pub rotor_disc_area: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub p_avg: f64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        FleetConfig {
            count: 6,
            antenna_count: 16,
            c0: 1276.46,
            c1: 5.21e-5,
            c2: 709.27,
            c3: 129.92,
            c4: 0.02,
            weight: 80.0,
            fuselage_drag_ratio: 0.6,
            rotor_solidity: 0.1,
            rotor_disc_area: 0.5,
            v_max: 50.0,
            a_max: 5.0,
            p_avg: 5000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundNodeConfig {
    pub count: usize,
    pub antenna_count: usize,
    pub tx_power_dbm: f64,
    /// Optional per-GN traffic class names; GNs beyond the list fall back to round-robin.
    pub classes: Vec<String>,
    /// Optional fixed `(x, y)` positions; GNs beyond the list are drawn uniformly.
    pub positions: Vec<[f64; 2]>,
}

impl Default for GroundNodeConfig {
    fn default() -> Self {
        GroundNodeConfig {
            count: 36,
            antenna_count: 4,
            tx_power_dbm: 23.0,
            classes: Vec::new(),
            positions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    pub swarm_size: usize,
    pub subswarm_size: usize,
    pub segments: usize,
    pub max_evaluations: usize,
    /// Outer dual-ascent iterations.
    pub max_outer: usize,
    /// Initial subgradient step, in 1/W per W of residual.
    pub step0: f64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            swarm_size: 180,
            subswarm_size: 20,
            segments: 128,
            max_evaluations: 1000,
            max_outer: 20,
            step0: 1e-3,
        }
    }
}

/// How the discount exponent measures latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LatencyMode {
    /// Mission time elapsed until the payload is fully harvested.
    #[default]
    Elapsed,
    /// Transmission time only, `nu / R`.
    Literal,
}

/// Primal objective used by the trajectory tournaments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    #[default]
    Time,
    Power,
}

/// Whether both horizontal and vertical energy integrals carry the blade and
/// induced baseline, or the vertical one has its `v = 0` baseline removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HoverAccounting {
    #[default]
    Literal,
    SingleBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mc_samples: usize,
    pub latency: LatencyMode,
    pub cost: CostMode,
    pub hover_accounting: HoverAccounting,
    /// Cluster count; defaults to the UAV count.
    pub clusters: Option<usize>,
    pub kmeans_max_iters: usize,
    /// Baselines fly from the depot to their hover point and back.
    pub baseline_transit: bool,
    pub bnb_node_limit: u64,
    pub ibf_rounds: usize,
    pub igd_iters: usize,
    /// IGD step length in meters.
    pub igd_step: f64,
    pub voronoi_max_iters: usize,
    /// Altitude of the static and Voronoi baselines.
    pub baseline_altitude: f64,
    pub collision_repair_rounds: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mc_samples: 256,
            latency: LatencyMode::Elapsed,
            cost: CostMode::Time,
            hover_accounting: HoverAccounting::Literal,
            clusters: None,
            kmeans_max_iters: 100,
            baseline_transit: true,
            bnb_node_limit: 2_000_000,
            ibf_rounds: 2,
            igd_iters: 40,
            igd_step: 40.0,
            voronoi_max_iters: 100,
            baseline_altitude: 145.0,
            collision_repair_rounds: 8,
        }
    }
}

/// The TOML document as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub mission_duration: f64,
    pub site: SiteConfig,
    pub environment: Environment,
    pub fleet: FleetConfig,
    pub ground_nodes: GroundNodeConfig,
    pub traffic_classes: Vec<TrafficClass>,
    pub swarm: SwarmConfig,
    pub solver: SolverConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            mission_duration: 3000.0,
            site: SiteConfig::default(),
            environment: Environment::default(),
            fleet: FleetConfig::default(),
            ground_nodes: GroundNodeConfig::default(),
            traffic_classes: TrafficClass::defaults(),
            swarm: SwarmConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mission_duration > 0.0) {
            return Err(Error::invalid("mission_duration", "must be positive"));
        }
        self.site.validate()?;
        self.environment.validate()?;

        let f = &self.fleet;
        if f.count == 0 {
            return Err(Error::invalid("fleet.count", "at least one UAV is required"));
        }
        for (name, v) in [
            ("c0", f.c0),
            ("c1", f.c1),
            ("c2", f.c2),
            ("c3", f.c3),
            ("c4", f.c4),
            ("weight", f.weight),
            ("fuselage_drag_ratio", f.fuselage_drag_ratio),
            ("rotor_solidity", f.rotor_solidity),
            ("rotor_disc_area", f.rotor_disc_area),
            ("v_max", f.v_max),
            ("a_max", f.a_max),
            ("p_avg", f.p_avg),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("fleet.{name}"), "must be positive"));
            }
        }

        let g = &self.ground_nodes;
        if g.count == 0 {
            return Err(Error::invalid("ground_nodes.count", "at least one GN is required"));
        }
        if g.antenna_count == 0 {
            return Err(Error::invalid("ground_nodes.antenna_count", "must be at least 1"));
        }
        if f.antenna_count < g.antenna_count {
            return Err(Error::invalid(
                "fleet.antenna_count",
                "UAV antenna count must be at least the GN antenna count",
            ));
        }
        if g.positions.len() > g.count {
            return Err(Error::invalid("ground_nodes.positions", "more positions than GNs"));
        }
        for (i, p) in g.positions.iter().enumerate() {
            if !(0.0..=self.site.x_max).contains(&p[0]) || !(0.0..=self.site.y_max).contains(&p[1]) {
                return Err(Error::invalid(format!("ground_nodes.positions[{i}]"), "outside the site"));
            }
        }

        if self.traffic_classes.is_empty() {
            return Err(Error::invalid("traffic_classes", "at least one class is required"));
        }
        for (i, c) in self.traffic_classes.iter().enumerate() {
            c.validate(&format!("traffic_classes[{i}]"))?;
        }
        for (i, name) in g.classes.iter().enumerate() {
            if !self.traffic_classes.iter().any(|c| &c.name == name) {
                return Err(Error::invalid(
                    format!("ground_nodes.classes[{i}]"),
                    format!("unknown traffic class '{name}'"),
                ));
            }
        }

        let s = &self.swarm;
        if s.swarm_size == 0 || s.subswarm_size < 3 {
            return Err(Error::invalid("swarm.subswarm_size", "sub-swarms need at least 3 particles"));
        }
        if !s.swarm_size.is_multiple_of(s.subswarm_size) {
            return Err(Error::invalid("swarm.swarm_size", "swarm size must be divisible by sub-swarm size"));
        }
        if s.segments == 0 {
            return Err(Error::invalid("swarm.segments", "must be positive"));
        }
        if s.max_outer == 0 {
            return Err(Error::invalid("swarm.max_outer", "must be positive"));
        }
        if self.solver.mc_samples == 0 {
            return Err(Error::invalid("solver.mc_samples", "must be positive"));
        }
        if let Some(c) = self.solver.clusters {
            if c == 0 {
                return Err(Error::invalid("solver.clusters", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundNode {
    pub id: usize,
    pub position: Point3,
    pub antenna_count: usize,
    pub tx_power_w: f64,
    pub traffic: TrafficClass,
}

/// A validated, immutable scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub config: ScenarioConfig,
    pub site: SiteConfig,
    pub env: Environment,
    pub gns: Vec<GroundNode>,
    pub uavs: Vec<UavSpec>,
    pub mission_duration: f64,
    pub swarm: SwarmConfig,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let gns = generate_gns_from(&config, config.seed);
        let f = &config.fleet;
        let uavs = (0..f.count)
            .map(|id| UavSpec {
                id,
                antenna_count: f.antenna_count,
                power: PowerConstants { c0: f.c0, c1: f.c1, c2: f.c2, c3: f.c3, c4: f.c4 },
                airframe: Airframe {
                    weight: f.weight,
                    fuselage_drag_ratio: f.fuselage_drag_ratio,
                    rotor_solidity: f.rotor_solidity,
                    rotor_disc_area: f.rotor_disc_area,
                },
                v_max: f.v_max,
                a_max: f.a_max,
                p_avg: f.p_avg,
                home_depot: id % config.site.depots.len(),
            })
            .collect();
        Ok(ScenarioSpec {
            site: config.site.clone(),
            env: config.environment.clone(),
            gns,
            uavs,
            mission_duration: config.mission_duration,
            swarm: config.swarm.clone(),
            solver: config.solver.clone(),
            seed: config.seed,
            config,
        })
    }

    pub fn uav_count(&self) -> usize {
        self.uavs.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.solver.clusters.unwrap_or(self.uavs.len())
    }

    /// Representative airframe for the homogeneous fleet.
    pub fn uav(&self) -> &UavSpec {
        &self.uavs[0]
    }

    pub fn p_avg(&self) -> f64 {
        self.uav().p_avg
    }

    /// Rebuilds with a config edit applied; the GN roster is regenerated from the (possibly new) seed.
    pub fn modified(&self, edit: impl FnOnce(&mut ScenarioConfig)) -> Result<Self> {
        let mut cfg = self.config.clone();
        edit(&mut cfg);
        ScenarioSpec::from_config(cfg)
    }
}

pub fn load_scenario(text: &str) -> Result<ScenarioSpec> {
    ScenarioSpec::from_config(ScenarioConfig::parse(text)?)
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
    load_scenario(&text)
}

const GN_STREAM: u64 = 0x474E;

/// Draws the GN roster: uniform positions over the site footprint, traffic
/// classes round-robin over the class table unless pinned.
pub fn generate_gns(spec: &ScenarioSpec, seed: u64) -> Vec<GroundNode> {
    generate_gns_from(&spec.config, seed)
}

fn generate_gns_from(config: &ScenarioConfig, seed: u64) -> Vec<GroundNode> {
    let g = &config.ground_nodes;
    let classes = &config.traffic_classes;
    let mut rng = rng::stream(seed, &[GN_STREAM]);
    let tx_power_w = dbm_to_watts(g.tx_power_dbm);
    (0..g.count)
        .map(|id| {
            // Draw unconditionally so pinned positions do not shift later draws.
            let x = rng.random::<f64>() * config.site.x_max;
            let y = rng.random::<f64>() * config.site.y_max;
            let (x, y) = g.positions.get(id).map_or((x, y), |p| (p[0], p[1]));
            let traffic = g
                .classes
                .get(id)
                .and_then(|name| classes.iter().find(|c| &c.name == name))
                .unwrap_or(&classes[id % classes.len()])
                .clone();
            GroundNode {
                id,
                position: Point3::new(x, y, 0.0),
                antenna_count: g.antenna_count,
                tx_power_w,
                traffic,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let spec = load_scenario("").unwrap();
        assert_eq!(spec.uav_count(), 6);
        assert_eq!(spec.gns.len(), 36);
        assert_eq!(spec.env.bandwidth_hz, 5e6);
        assert_eq!(spec.mission_duration, 3000.0);
        assert_eq!(spec.uav().antenna_count, 16);
        assert_eq!(spec.gns[0].antenna_count, 4);
        assert!((spec.env.beta0() - 1e4).abs() < 1e-9);
        assert_eq!(spec.swarm.swarm_size / spec.swarm.subswarm_size, 9);
        assert!((spec.gns[0].tx_power_w - 0.199_526_231).abs() < 1e-8);
        assert!((spec.env.relative_tx_power(spec.gns[0].tx_power_w) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_dimension_rejected_with_path() {
        let err = load_scenario("[site]\nz_max = 0.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("site.z_max"), "{msg}");
        assert!(msg.contains("dimension must be positive"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(load_scenario("bogus = 1\n"), Err(Error::Parse(_))));
        assert!(matches!(load_scenario("[fleet]\nrotors = 4\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn override_merges_with_defaults() {
        let spec = load_scenario("[fleet]\ncount = 3\n").unwrap();
        let mut expected = ScenarioConfig::default();
        expected.fleet.count = 3;
        let hand_built = ScenarioSpec::from_config(expected).unwrap();
        assert_eq!(spec, hand_built);
        assert_eq!(spec.uav_count(), 3);
    }

    #[test]
    fn non_dividing_voxel_rejected() {
        let err = load_scenario("[site]\ndx = 7.0\n").unwrap_err();
        assert!(err.to_string().contains("site.dx"));
    }

    #[test]
    fn depot_must_be_on_ground() {
        let err = load_scenario("[site]\ndepots = [[0.0, 0.0, 5.0]]\n").unwrap_err();
        assert!(err.to_string().contains("site.depots[0]"));
    }

    #[test]
    fn discount_bounds_enforced() {
        let doc = r#"
[[traffic_classes]]
name = "x"
priority = 1.0
max_latency_s = 10.0
payload_bits = 1e6
discount = 1.0
"#;
        let err = load_scenario(doc).unwrap_err();
        assert!(err.to_string().contains("traffic_classes[0].discount"));
    }

    #[test]
    fn gns_are_inside_and_deterministic() {
        let spec = load_scenario("").unwrap();
        let a = generate_gns(&spec, 42);
        let b = generate_gns(&spec, 42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 36);
        for g in &a {
            assert!(spec.site.contains(&g.position));
            assert_eq!(g.position.z, 0.0);
            assert!(g.antenna_count >= 1);
        }
        assert_ne!(a, generate_gns(&spec, 43));
        // round-robin classes
        assert_eq!(a[0].traffic.name, "telemetry");
        assert_eq!(a[5].traffic.name, "video");
    }

    #[test]
    fn pinned_classes_and_positions() {
        let doc = r#"
[ground_nodes]
count = 3
classes = ["file"]
positions = [[10.0, 20.0]]
"#;
        let spec = load_scenario(doc).unwrap();
        assert_eq!(spec.gns[0].traffic.name, "file");
        assert_eq!(spec.gns[0].position, Point3::new(10.0, 20.0, 0.0));
        assert_eq!(spec.gns[1].traffic.name, "video");
    }

    #[test]
    fn empirical_mean_near_center() {
        let spec = load_scenario("[ground_nodes]\ncount = 10000\n").unwrap();
        let n = spec.gns.len() as f64;
        let mx = spec.gns.iter().map(|g| g.position.x).sum::<f64>() / n;
        let my = spec.gns.iter().map(|g| g.position.y).sum::<f64>() / n;
        assert!((mx - 1500.0).abs() < 15.0, "{mx}");
        assert!((my - 1500.0).abs() < 15.0, "{my}");
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ScenarioConfig::default();
        assert_eq!(ScenarioConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
