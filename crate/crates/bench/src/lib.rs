//! Fixtures shared by the benchmarks.

use skyharvest::scenario::{CostMode, HoverAccounting, SwarmConfig};
use skyharvest::trajectory_opt::{Edge, TrajectoryContext};
use skyharvest::{load_scenario, load_scenario_file, Point3, ScenarioSpec};

/// Reference defaults: 36 GNs, 6 UAVs, 3 km site.
pub fn default_spec() -> ScenarioSpec {
    load_scenario("").expect("defaults are valid")
}

pub fn desk_spec() -> ScenarioSpec {
    load_scenario_file(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/desk.toml")).expect("desk scenario is valid")
}

/// A swarm small enough to optimize an edge in milliseconds.
pub fn small_swarm() -> SwarmConfig {
    SwarmConfig { swarm_size: 36, subswarm_size: 12, segments: 32, max_evaluations: 300, max_outer: 4, ..SwarmConfig::default() }
}

pub fn context<'a>(spec: &'a ScenarioSpec, swarm: &'a SwarmConfig) -> TrajectoryContext<'a> {
    TrajectoryContext {
        site: &spec.site,
        uav: spec.uav(),
        env: &spec.env,
        swarm,
        cost: CostMode::Time,
        accounting: HoverAccounting::Literal,
    }
}

/// One kilometre at 50 m altitude.
pub fn level_edge() -> Edge {
    Edge::new(Point3::new(500.0, 500.0, 50.0), Point3::new(1500.0, 500.0, 50.0))
}
