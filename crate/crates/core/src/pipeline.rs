//! End-to-end solve: clusters, service positions, edge trajectories, tours.

use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, Clustering};
use crate::error::Result;
use crate::position_opt::{bounding_box_voxels, fine_search, RewardEvaluator, ServicePosition};
use crate::rng;
use crate::scenario::{GroundNode, ScenarioSpec};
use crate::scheduler::{bnb_mtsp, build_graph, repair_collisions, FleetGraph, FleetPlan, MissionParams, MissionReport};
use crate::trajectory_opt::{EdgeCache, TrajectoryContext};

const CLUSTER_STREAM: u64 = 0x434C;
const EVAL_STREAM: u64 = 0x4556;
const GRAPH_STREAM: u64 = 0x4752;

/// Seed of the fading draws used to score every position in a scenario.
/// Shared by the pipeline and the baselines so they see the same channels.
pub fn evaluation_seed(spec: &ScenarioSpec) -> u64 {
    rng::derive(spec.seed, &[EVAL_STREAM])
}

pub fn evaluator(spec: &ScenarioSpec) -> RewardEvaluator<'_> {
    RewardEvaluator {
        env: &spec.env,
        uav_antennas: spec.uav().antenna_count,
        mc_samples: spec.solver.mc_samples,
        seed: evaluation_seed(spec),
        latency: spec.solver.latency,
        deadline: spec.mission_duration,
    }
}

pub fn trajectory_context(spec: &ScenarioSpec) -> TrajectoryContext<'_> {
    TrajectoryContext {
        site: &spec.site,
        uav: spec.uav(),
        env: &spec.env,
        swarm: &spec.swarm,
        cost: spec.solver.cost,
        accounting: spec.solver.hover_accounting,
    }
}

pub fn mission_params(spec: &ScenarioSpec) -> MissionParams {
    MissionParams::new(&spec.uavs, spec.mission_duration, spec.solver.latency, spec.solver.bnb_node_limit)
}

pub fn graph_seed(spec: &ScenarioSpec) -> u64 {
    rng::derive(spec.seed, &[GRAPH_STREAM])
}

/// K-means over GN ground positions into `spec.cluster_count()` groups.
pub fn cluster_gns(spec: &ScenarioSpec) -> Result<Clustering> {
    cluster_gns_into(spec, spec.cluster_count())
}

pub fn cluster_gns_into(spec: &ScenarioSpec, clusters: usize) -> Result<Clustering> {
    let points: Vec<[f64; 2]> = spec.gns.iter().map(|g| [g.position.x, g.position.y]).collect();
    kmeans(&points, clusters, rng::derive(spec.seed, &[CLUSTER_STREAM]), spec.solver.kmeans_max_iters)
}

pub fn members<'a>(spec: &'a ScenarioSpec, clustering: &Clustering, cluster: usize) -> Vec<&'a GroundNode> {
    clustering.members(cluster).into_iter().map(|i| &spec.gns[i]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub clustering: Clustering,
    pub positions: Vec<ServicePosition>,
    pub graph: FleetGraph,
    pub params: MissionParams,
    pub plan: FleetPlan,
    pub report: MissionReport,
}

/// Best voxel of each cluster within its bounding box.
pub fn service_positions(spec: &ScenarioSpec, clustering: &Clustering) -> Result<Vec<ServicePosition>> {
    let eval = evaluator(spec);
    (0..clustering.len())
        .map(|c| {
            let m = members(spec, clustering, c);
            let voxels = bounding_box_voxels(&spec.site, &m)?;
            fine_search(&spec.site, &voxels, c, &m, &eval)
        })
        .collect()
}

pub fn run_pipeline(spec: &ScenarioSpec, cache: &mut EdgeCache) -> Result<PipelineOutput> {
    let clustering = cluster_gns(spec)?;
    let positions = service_positions(spec, &clustering)?;
    let ctx = trajectory_context(spec);
    let graph = build_graph(&positions, &spec.gns, &ctx, graph_seed(spec), cache)?;
    let params = mission_params(spec);
    let searched = bnb_mtsp(&graph, &params);
    let (mut plan, report) = repair_collisions(&searched, &graph, &params, &ctx, spec.solver.collision_repair_rounds)?;
    plan.optimal = searched.optimal;
    plan.nodes_expanded = searched.nodes_expanded;
    Ok(PipelineOutput { clustering, positions, graph, params, plan, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::load_scenario;

    const SMALL: &str = r#"
seed = 4
mission_duration = 400.0
[site]
x_max = 400.0
y_max = 400.0
z_max = 100.0
dx = 50.0
dy = 50.0
dz = 25.0
[ground_nodes]
count = 5
[fleet]
count = 2
[solver]
mc_samples = 4
[swarm]
swarm_size = 18
subswarm_size = 6
segments = 16
max_evaluations = 120
max_outer = 6
"#;

    #[test]
    fn small_scenario_end_to_end() {
        let spec = load_scenario(SMALL).unwrap();
        let mut cache = EdgeCache::new();
        let out = run_pipeline(&spec, &mut cache).unwrap();
        assert_eq!(out.positions.len(), 2);
        assert_eq!(out.graph.vertices.len(), 3);
        assert!(out.report.status.continuity && out.report.status.single_service && out.report.status.kinematics_and_power);
        assert!((out.report.total_reward - out.plan.total_reward).abs() <= 1e-12 * out.plan.total_reward.max(1.0));
        assert!(out.report.total_reward > 0.0);
        let again = run_pipeline(&spec, &mut EdgeCache::new()).unwrap();
        assert_eq!(out, again);
    }
}
