//! Fleet scheduling: the service graph over depots and cluster positions,
//! a reward-maximizing multi-UAV tour search, and a mission replay that
//! audits the resulting plan.

mod bnb;
mod simulate;

pub use bnb::{bnb_mtsp, greedy_plan};
pub use simulate::{exhaustive_search, repair_collisions, simulate_mission, Collision, ConstraintStatus, MissionReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mimo::reward;
use crate::position_opt::ServicePosition;
use crate::power::hover_power;
use crate::rng;
use crate::scenario::{GroundNode, LatencyMode, TrafficClass, UavSpec};
use crate::trajectory_opt::{Edge, EdgeCache, Trajectory, TrajectoryContext};
use crate::Point3;

/// Slack on time comparisons, seconds.
pub(crate) const TIME_EPS: f64 = 1e-9;
/// Relative slack on the mission-average power cap.
pub const POWER_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "index")]
pub enum VertexKind {
    Depot(usize),
    Cluster(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceItem {
    pub gn_id: usize,
    pub class: TrafficClass,
    /// Infinite when the link carries nothing; stored as `null` in JSON.
    #[serde(with = "unbounded")]
    pub harvest_time: f64,
    pub batch: usize,
}

/// JSON has no infinity, so unbounded times round-trip through `null`.
mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphVertex {
    pub kind: VertexKind,
    pub position: Point3,
    pub items: Vec<ServiceItem>,
    pub batch_durations: Vec<f64>,
}

impl GraphVertex {
    pub fn is_depot(&self) -> bool {
        matches!(self.kind, VertexKind::Depot(_))
    }
}

/// Complete graph over depots (first) and cluster service positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetGraph {
    pub vertices: Vec<GraphVertex>,
    /// Directed edge trajectories; `None` between two depots and on the diagonal.
    pub edges: Vec<Vec<Option<Trajectory>>>,
    pub depot_count: usize,
    /// Power drawn while hovering to serve, watts.
    pub hover_power: f64,
}

impl FleetGraph {
    pub fn cluster_count(&self) -> usize {
        self.vertices.len() - self.depot_count
    }

    pub fn cluster_vertex(&self, cluster: usize) -> usize {
        self.depot_count + cluster
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&Trajectory> {
        self.edges.get(from)?.get(to)?.as_ref()
    }

    pub fn travel_time(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return 0.0;
        }
        self.edge(from, to).map_or(f64::INFINITY, |t| t.duration)
    }

    pub fn undirected_edge_count(&self) -> usize {
        let n = self.vertices.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| self.edges[i][j].is_some()).count()
    }

    /// Earliest possible arrival delay into `to` from any other vertex.
    pub(crate) fn min_incoming(&self, to: usize) -> f64 {
        (0..self.vertices.len()).filter(|&v| v != to).map(|v| self.travel_time(v, to)).fold(f64::INFINITY, f64::min)
    }
}

/// Vertices of one fleet graph; the depot vertices come from `depots`.
pub fn graph_vertices(depots: &[Point3], positions: &[ServicePosition], gns: &[GroundNode]) -> Result<Vec<GraphVertex>> {
    let mut vertices: Vec<GraphVertex> = depots
        .iter()
        .enumerate()
        .map(|(i, p)| GraphVertex { kind: VertexKind::Depot(i), position: *p, items: Vec::new(), batch_durations: Vec::new() })
        .collect();
    for (c, sp) in positions.iter().enumerate() {
        let items = sp
            .evaluation
            .services
            .iter()
            .map(|s| {
                let gn = gns
                    .iter()
                    .find(|g| g.id == s.gn_id)
                    .ok_or_else(|| Error::Empty(format!("GN {} not in roster", s.gn_id)))?;
                Ok(ServiceItem { gn_id: s.gn_id, class: gn.traffic.clone(), harvest_time: s.harvest_time, batch: s.batch })
            })
            .collect::<Result<Vec<_>>>()?;
        vertices.push(GraphVertex {
            kind: VertexKind::Cluster(c),
            position: sp.coordinate,
            items,
            batch_durations: sp.evaluation.batch_durations.clone(),
        });
    }
    Ok(vertices)
}

const EDGE_STREAM: u64 = 0x4544;

/// Runs dual ascent for every ordered vertex pair except depot to depot.
/// Directions are solved separately: the kinetic term makes the cost of a
/// path depend on which way it is flown.
pub fn build_graph(
    positions: &[ServicePosition],
    gns: &[GroundNode],
    ctx: &TrajectoryContext,
    seed: u64,
    cache: &mut EdgeCache,
) -> Result<FleetGraph> {
    if positions.is_empty() {
        return Err(Error::Empty("no service positions".into()));
    }
    let depots: Vec<Point3> = (0..ctx.site.depots.len()).map(|i| ctx.site.depot(i)).collect();
    let vertices = graph_vertices(&depots, positions, gns)?;
    let n = vertices.len();
    let mut edges: Vec<Vec<Option<Trajectory>>> = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j || (vertices[i].is_depot() && vertices[j].is_depot()) {
                continue;
            }
            let edge = Edge::new(vertices[i].position, vertices[j].position);
            let r = cache.solve(&edge, ctx, rng::derive(seed, &[EDGE_STREAM, i as u64, j as u64]), &[])?;
            edges[i][j] = Some(r.trajectory);
        }
    }
    Ok(FleetGraph {
        vertices,
        edges,
        depot_count: depots.len(),
        hover_power: hover_power(ctx.uav, ctx.env, ctx.accounting),
    })
}

/// Fixed inputs of a scheduling problem besides the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionParams {
    pub mission_duration: f64,
    pub p_avg: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub latency: LatencyMode,
    /// Home depot index of each UAV, by UAV id.
    pub home_depots: Vec<usize>,
    pub node_limit: u64,
}

impl MissionParams {
    pub fn new(uavs: &[UavSpec], mission_duration: f64, latency: LatencyMode, node_limit: u64) -> Self {
        MissionParams {
            mission_duration,
            p_avg: uavs.first().map_or(0.0, |u| u.p_avg),
            v_max: uavs.first().map_or(0.0, |u| u.v_max),
            a_max: uavs.first().map_or(0.0, |u| u.a_max),
            latency,
            home_depots: uavs.iter().map(|u| u.home_depot).collect(),
            node_limit,
        }
    }

    pub fn uav_count(&self) -> usize {
        self.home_depots.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavTour {
    pub uav: usize,
    /// Depot vertex the tour starts and ends at.
    pub home: usize,
    /// Cluster vertices in visiting order.
    pub stops: Vec<usize>,
    /// Flown legs: home to first stop, between stops, last stop to home.
    pub legs: Vec<Trajectory>,
    /// Hovers at its single stop from mission start without flying there.
    #[serde(default)]
    pub stationed: bool,
}

impl UavTour {
    pub fn from_graph(graph: &FleetGraph, uav: usize, home: usize, stops: Vec<usize>) -> UavTour {
        let legs = if stops.is_empty() {
            Vec::new()
        } else {
            let path: Vec<usize> = std::iter::once(home).chain(stops.iter().copied()).chain(std::iter::once(home)).collect();
            path.windows(2).map(|w| graph.edge(w[0], w[1]).cloned().unwrap_or_else(|| Trajectory::stationary(graph.vertices[w[0]].position))).collect()
        };
        UavTour { uav, home, stops, legs, stationed: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnOutcome {
    pub gn_id: usize,
    pub cluster: Option<usize>,
    pub uav: Option<usize>,
    pub completion_time: Option<f64>,
    /// Latency fed to the reward.
    pub latency: Option<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetPlan {
    pub tours: Vec<UavTour>,
    pub total_reward: f64,
    pub per_uav_avg_power: Vec<f64>,
    /// False when the search stopped at its node budget.
    pub optimal: bool,
    pub nodes_expanded: u64,
}

impl FleetPlan {
    /// Plan from explicit stop lists, one per UAV; reward and power are left to the replay.
    pub fn from_stops(graph: &FleetGraph, params: &MissionParams, stops: &[Vec<usize>]) -> FleetPlan {
        let tours = stops
            .iter()
            .enumerate()
            .map(|(u, s)| UavTour::from_graph(graph, u, params.home_depots[u], s.clone()))
            .collect();
        FleetPlan { tours, total_reward: 0.0, per_uav_avg_power: vec![0.0; stops.len()], optimal: false, nodes_expanded: 0 }
    }
}

/// Outcome of serving one cluster vertex on arrival.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct VisitOutcome {
    pub departure: f64,
    pub service_time: f64,
    pub reward: f64,
    pub served_batches: usize,
}

/// Serves the longest prefix of antenna batches that still lets the UAV get
/// home by `T`. `None` when not even the first batch fits.
pub(crate) fn serve_visit(
    vertex: &GraphVertex,
    arrival: f64,
    return_time: f64,
    mission_duration: f64,
    latency: LatencyMode,
) -> Option<VisitOutcome> {
    let mut start = arrival;
    let mut reward_sum = 0.0;
    let mut served = 0;
    for (b, &d) in vertex.batch_durations.iter().enumerate() {
        let end = start + d;
        if end + return_time > mission_duration + TIME_EPS {
            break;
        }
        for it in vertex.items.iter().filter(|it| it.batch == b && it.harvest_time.is_finite()) {
            let l = match latency {
                LatencyMode::Elapsed => start + it.harvest_time,
                LatencyMode::Literal => it.harvest_time,
            };
            reward_sum += reward(&it.class, l);
        }
        start = end;
        served += 1;
    }
    (served > 0).then_some(VisitOutcome { departure: start, service_time: start - arrival, reward: reward_sum, served_batches: served })
}
