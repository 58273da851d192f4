//! Comparison schemes: static centroid hovering, Voronoi decompositions
//! under a distance or received-power metric, and two local position
//! searches, IGD (finite-difference gradient ascent) and IBF (repeated
//! full-site brute force over refreshed fading draws).
//!
//! IGD and IBF are adaptations: only their names and roles are fixed, the
//! step rules here are our own.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::channel::{p_los, pathloss, LinkState};
use crate::cluster::Clustering;
use crate::error::{Error, Result};
use crate::pipeline::{cluster_gns_into, evaluator, graph_seed, members, mission_params, trajectory_context};
use crate::position_opt::{fine_search, RewardEvaluator, ServicePosition};
use crate::power::hover_power;
use crate::rng;
use crate::scenario::{link_geometry, Environment, GroundNode, ScenarioSpec, SiteConfig};
use crate::scheduler::{build_graph, graph_vertices, simulate_mission, FleetGraph, FleetPlan, MissionParams, MissionReport};
use crate::trajectory_opt::EdgeCache;
use crate::Point3;

const VORONOI_STREAM: u64 = 0x564F;
const IGD_STREAM: u64 = 0x4947;
const IBF_STREAM: u64 = 0x4942;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Static,
    VoronoiDist,
    VoronoiRx,
    Igd,
    Ibf,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Static, Scheme::VoronoiDist, Scheme::VoronoiRx, Scheme::Igd, Scheme::Ibf];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Static => "static",
            Scheme::VoronoiDist => "voronoi-dist",
            Scheme::VoronoiRx => "voronoi-rx",
            Scheme::Igd => "igd",
            Scheme::Ibf => "ibf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoronoiMetric {
    Distance,
    RxPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub scheme: Scheme,
    /// Hover point per UAV; `None` for a UAV with nothing to serve.
    pub positions: Vec<Option<Point3>>,
    /// GN ids associated with each UAV.
    pub associations: Vec<Vec<usize>>,
    pub total_reward: f64,
    pub per_uav_avg_power: Vec<f64>,
    pub graph: FleetGraph,
    pub params: MissionParams,
    pub plan: FleetPlan,
    pub report: MissionReport,
}

/// Mean received power of `gn` at a UAV at `p`, relative to noise.
pub fn mean_rx_power(p: &Point3, gn: &GroundNode, env: &Environment) -> Result<f64> {
    let (d, theta) = link_geometry(p, &gn.position)?;
    let pl = p_los(theta, env.z1, env.z2);
    let gain = pl * pathloss(d, LinkState::Los, env)? + (1.0 - pl) * pathloss(d, LinkState::Nlos, env)?;
    Ok(env.relative_tx_power(gn.tx_power_w) * gain)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiOutcome {
    pub positions: Vec<Point3>,
    /// UAV index per GN.
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

/// Alternates best-UAV association and centroid moves at a fixed altitude
/// until the association repeats or `max_iters` is reached. Ties go to the
/// lowest UAV index; a UAV with an empty set stays where it is.
pub fn voronoi_partition(
    gns: &[GroundNode],
    starts: &[[f64; 2]],
    metric: VoronoiMetric,
    env: &Environment,
    altitude: f64,
    max_iters: usize,
) -> Result<VoronoiOutcome> {
    if starts.is_empty() {
        return Err(Error::Empty("no UAVs to partition for".into()));
    }
    let mut positions: Vec<Point3> = starts.iter().map(|s| Point3::new(s[0], s[1], altitude)).collect();
    let score = |p: &Point3, g: &GroundNode| -> Result<f64> {
        match metric {
            VoronoiMetric::Distance => Ok(-(p - g.position).norm()),
            VoronoiMetric::RxPower => mean_rx_power(p, g, env),
        }
    };
    let mut assignments: Vec<usize> = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        iterations += 1;
        let next = gns
            .iter()
            .map(|g| {
                let mut best = (0, f64::NEG_INFINITY);
                for (u, p) in positions.iter().enumerate() {
                    let s = score(p, g)?;
                    if s > best.1 {
                        best = (u, s);
                    }
                }
                Ok(best.0)
            })
            .collect::<Result<Vec<usize>>>()?;
        let stable = next == assignments;
        assignments = next;
        for (u, p) in positions.iter_mut().enumerate() {
            let set: Vec<&GroundNode> = gns.iter().zip(&assignments).filter(|(_, &a)| a == u).map(|(g, _)| g).collect();
            if !set.is_empty() {
                let n = set.len() as f64;
                p.x = set.iter().map(|g| g.position.x).sum::<f64>() / n;
                p.y = set.iter().map(|g| g.position.y).sum::<f64>() / n;
            }
        }
        if stable {
            break;
        }
    }
    Ok(VoronoiOutcome { positions, assignments, iterations })
}

fn snap(site: &SiteConfig, p: &Point3) -> Result<Point3> {
    let lo = Point3::new(site.dx, site.dy, site.dz) * 0.5;
    let hi = Point3::new(site.x_max, site.y_max, site.z_max) - lo;
    Ok(site.voxel_center(site.voxel_index(&p.sup(&lo).inf(&hi))?))
}

/// Gradient ascent on the cluster reward from `start`.
///
/// Each iteration takes central differences over one voxel edge with a
/// fresh fading seed shared by its six probes, moves `step` meters along
/// the gradient, and projects onto the hull of voxel centres. Visited points are scored at
/// their voxel centres under `eval`; the step halves whenever that score
/// does not improve. Returns the best visited voxel.
#[allow(clippy::too_many_arguments)]
pub fn igd_positioning(
    site: &SiteConfig,
    cluster: usize,
    members: &[&GroundNode],
    eval: &RewardEvaluator,
    start: Point3,
    step: f64,
    iters: usize,
    seed: u64,
) -> Result<ServicePosition> {
    let mut p = snap(site, &start)?;
    let mut best = (p, eval.reward(&p, members)?);
    let mut step = step;
    let h = Point3::new(site.dx, site.dy, site.dz) * 0.5;
    let (lo, hi) = (h, Point3::new(site.x_max, site.y_max, site.z_max) - h);
    let inside = |q: Point3| q.sup(&lo).inf(&hi);
    for k in 0..iters {
        if step <= 0.0 {
            break;
        }
        let probe = RewardEvaluator { seed: rng::derive(seed, &[IGD_STREAM, k as u64]), ..eval.clone() };
        let mut grad = Point3::zeros();
        for axis in 0..3 {
            let mut e = Point3::zeros();
            e[axis] = h[axis];
            let up = inside(p + e);
            let down = inside(p - e);
            if (up - down).norm() == 0.0 {
                continue;
            }
            let (ru, rd) = (probe.reward(&up, members)?, probe.reward(&down, members)?);
            grad[axis] = (ru - rd) / (up[axis] - down[axis]);
        }
        let n = grad.norm();
        if !(n > 0.0) {
            break;
        }
        p = inside(p + grad * (step / n));
        let c = snap(site, &p)?;
        let r = eval.reward(&c, members)?;
        if r > best.1 {
            best = (c, r);
        } else {
            step *= 0.5;
        }
    }
    ServicePosition::at_point(site, cluster, best.0, members, eval)
}

/// Full-site brute force, repeated `rounds` times with refreshed fading.
/// Round 0 uses `eval` as given; the round with the highest reward wins,
/// earliest on ties. The winner is re-scored under `eval`.
pub fn ibf_positioning(site: &SiteConfig, cluster: usize, members: &[&GroundNode], eval: &RewardEvaluator, rounds: usize) -> Result<ServicePosition> {
    let voxels = site.all_voxels();
    let mut best: Option<ServicePosition> = None;
    for r in 0..rounds.max(1) {
        let seed = if r == 0 { eval.seed } else { rng::derive(eval.seed, &[IBF_STREAM, r as u64]) };
        let round = RewardEvaluator { seed, ..eval.clone() };
        let sp = fine_search(site, &voxels, cluster, members, &round)?;
        if best.as_ref().is_none_or(|b| sp.cluster_reward > b.cluster_reward) {
            best = Some(sp);
        }
    }
    let b = best.expect("at least one round");
    ServicePosition::at_voxel(site, cluster, b.voxel, members, eval)
}

/// Scores hover points (one per serving UAV) by replaying a one-stop plan
/// per UAV. With `baseline_transit` each UAV flies out and back along an
/// optimized edge; otherwise it is stationed there from mission start.
fn evaluate_hover_plan(
    spec: &ScenarioSpec,
    scheme: Scheme,
    assigned: Vec<(usize, ServicePosition)>,
    cache: &mut EdgeCache,
) -> Result<BaselineResult> {
    let u = spec.uav_count();
    let sps: Vec<ServicePosition> = assigned.iter().map(|(_, sp)| sp.clone()).collect();
    let ctx = trajectory_context(spec);
    let transit = spec.solver.baseline_transit;
    let graph = if transit && !sps.is_empty() {
        build_graph(&sps, &spec.gns, &ctx, graph_seed(spec), cache)?
    } else {
        let depots: Vec<Point3> = (0..spec.site.depots.len()).map(|i| spec.site.depot(i)).collect();
        let vertices = graph_vertices(&depots, &sps, &spec.gns)?;
        let n = vertices.len();
        FleetGraph {
            vertices,
            edges: vec![vec![None; n]; n],
            depot_count: depots.len(),
            hover_power: hover_power(ctx.uav, ctx.env, ctx.accounting),
        }
    };
    let params = mission_params(spec);
    let mut stops = vec![Vec::new(); u];
    let mut positions = vec![None; u];
    let mut associations = vec![Vec::new(); u];
    for (k, (owner, sp)) in assigned.iter().enumerate() {
        stops[*owner].push(graph.cluster_vertex(k));
        positions[*owner] = Some(sp.coordinate);
        associations[*owner] = sp.evaluation.services.iter().map(|s| s.gn_id).collect();
    }
    let mut plan = FleetPlan::from_stops(&graph, &params, &stops);
    if !transit {
        for t in plan.tours.iter_mut().filter(|t| !t.stops.is_empty()) {
            t.legs.clear();
            t.stationed = true;
        }
    }
    let report = simulate_mission(&plan, &graph, &params, Some(&spec.site));
    plan.total_reward = report.total_reward;
    plan.per_uav_avg_power = report.per_uav_avg_power.clone();
    plan.optimal = true;
    Ok(BaselineResult {
        scheme,
        positions,
        associations,
        total_reward: report.total_reward,
        per_uav_avg_power: report.per_uav_avg_power.clone(),
        graph,
        params,
        plan,
        report,
    })
}

/// Configured baseline altitude, capped at the site ceiling.
fn baseline_altitude(spec: &ScenarioSpec) -> f64 {
    spec.solver.baseline_altitude.min(spec.site.z_max)
}

fn centroid_point(c: &[f64; 2], altitude: f64) -> Point3 {
    Point3::new(c[0], c[1], altitude)
}

/// UAV `u` hovers over the centroid of cluster `u` at the baseline altitude;
/// the clustering should have one cluster per UAV.
pub fn static_deployment(spec: &ScenarioSpec, clustering: &Clustering, cache: &mut EdgeCache) -> Result<BaselineResult> {
    let eval = evaluator(spec);
    let alt = baseline_altitude(spec);
    let assigned = (0..clustering.len().min(spec.uav_count()))
        .map(|c| {
            let m = members(spec, clustering, c);
            Ok((c, ServicePosition::at_point(&spec.site, c, centroid_point(&clustering.centroids[c], alt), &m, &eval)?))
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate_hover_plan(spec, Scheme::Static, assigned, cache)
}

/// Converge-then-hover Voronoi scheme, started from distinct GN positions.
pub fn voronoi_decomposition(spec: &ScenarioSpec, metric: VoronoiMetric, cache: &mut EdgeCache) -> Result<BaselineResult> {
    let u = spec.uav_count();
    let mut r = rng::stream(spec.seed, &[VORONOI_STREAM]);
    let picks = sample(&mut r, spec.gns.len(), u.min(spec.gns.len()));
    let starts: Vec<[f64; 2]> = picks.iter().map(|i| [spec.gns[i].position.x, spec.gns[i].position.y]).collect();
    let alt = baseline_altitude(spec);
    let v = voronoi_partition(&spec.gns, &starts, metric, &spec.env, alt, spec.solver.voronoi_max_iters)?;
    let eval = evaluator(spec);
    let mut assigned = Vec::new();
    for (owner, p) in v.positions.iter().enumerate() {
        let m: Vec<&GroundNode> = spec.gns.iter().zip(&v.assignments).filter(|(_, &a)| a == owner).map(|(g, _)| g).collect();
        if !m.is_empty() {
            let k = assigned.len();
            assigned.push((owner, ServicePosition::at_point(&spec.site, k, *p, &m, &eval)?));
        }
    }
    let scheme = match metric {
        VoronoiMetric::Distance => Scheme::VoronoiDist,
        VoronoiMetric::RxPower => Scheme::VoronoiRx,
    };
    evaluate_hover_plan(spec, scheme, assigned, cache)
}

pub fn run_baseline(spec: &ScenarioSpec, scheme: Scheme, cache: &mut EdgeCache) -> Result<BaselineResult> {
    match scheme {
        Scheme::Static => static_deployment(spec, &cluster_gns_into(spec, spec.uav_count())?, cache),
        Scheme::VoronoiDist => voronoi_decomposition(spec, VoronoiMetric::Distance, cache),
        Scheme::VoronoiRx => voronoi_decomposition(spec, VoronoiMetric::RxPower, cache),
        Scheme::Igd | Scheme::Ibf => {
            let clustering = cluster_gns_into(spec, spec.uav_count())?;
            let eval = evaluator(spec);
            let s = &spec.solver;
            let assigned = (0..clustering.len().min(spec.uav_count()))
                .map(|c| {
                    let m = members(spec, &clustering, c);
                    let sp = if scheme == Scheme::Igd {
                        let start = centroid_point(&clustering.centroids[c], baseline_altitude(spec));
                        igd_positioning(&spec.site, c, &m, &eval, start, s.igd_step, s.igd_iters, rng::derive(spec.seed, &[c as u64]))?
                    } else {
                        ibf_positioning(&spec.site, c, &m, &eval, s.ibf_rounds)?
                    };
                    Ok((c, sp))
                })
                .collect::<Result<Vec<_>>>()?;
            evaluate_hover_plan(spec, scheme, assigned, cache)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{LatencyMode, TrafficClass, VoxelIndex};

    fn gn(id: usize, x: f64, y: f64) -> GroundNode {
        GroundNode {
            id,
            position: Point3::new(x, y, 0.0),
            antenna_count: 4,
            tx_power_w: 0.2,
            traffic: TrafficClass::defaults()[id % 4].clone(),
        }
    }

    fn eval(env: &Environment) -> RewardEvaluator<'_> {
        RewardEvaluator { env, uav_antennas: 16, mc_samples: 4, seed: 11, latency: LatencyMode::Elapsed, deadline: f64::INFINITY }
    }

    #[test]
    fn single_uav_sits_at_global_centroid() {
        let gns = vec![gn(0, 0.0, 0.0), gn(1, 300.0, 0.0), gn(2, 0.0, 600.0)];
        let v = voronoi_partition(&gns, &[[50.0, 50.0]], VoronoiMetric::Distance, &Environment::default(), 145.0, 100).unwrap();
        assert_eq!(v.assignments, vec![0, 0, 0]);
        assert!((v.positions[0] - Point3::new(100.0, 200.0, 145.0)).norm() < 1e-12);
    }

    #[test]
    fn separated_blobs_split_blockwise() {
        let mut gns = Vec::new();
        for (k, base) in [[100.0, 100.0], [2000.0, 2200.0]].iter().enumerate() {
            for j in 0..4 {
                gns.push(gn(gns.len(), base[0] + 20.0 * j as f64, base[1] + 15.0 * (j % 2) as f64 + k as f64));
            }
        }
        for starts in [[[100.0, 100.0], [160.0, 101.0]], [[2000.0, 2201.0], [120.0, 115.0]], [[140.0, 115.0], [100.0, 100.0]]] {
            for metric in [VoronoiMetric::Distance, VoronoiMetric::RxPower] {
                let v = voronoi_partition(&gns, &starts, metric, &Environment::default(), 145.0, 100).unwrap();
                assert!((0..8).all(|i| v.assignments[i] == v.assignments[(i / 4) * 4]), "{metric:?} {:?}", v.assignments);
                assert_ne!(v.assignments[0], v.assignments[4]);
            }
        }
    }

    #[test]
    fn fixed_point_is_stable() {
        let gns = vec![gn(0, 0.0, 0.0), gn(1, 100.0, 0.0), gn(2, 900.0, 900.0), gn(3, 1000.0, 900.0)];
        let v = voronoi_partition(&gns, &[[0.0, 0.0], [900.0, 900.0]], VoronoiMetric::Distance, &Environment::default(), 145.0, 100).unwrap();
        let starts: Vec<[f64; 2]> = v.positions.iter().map(|p| [p.x, p.y]).collect();
        let again = voronoi_partition(&gns, &starts, VoronoiMetric::Distance, &Environment::default(), 145.0, 100).unwrap();
        assert_eq!(again.assignments, v.assignments);
        assert_eq!(again.iterations, 2);
        assert_eq!(again.positions, v.positions);
    }

    #[test]
    fn rx_power_falls_with_distance() {
        let env = Environment::default();
        let g = gn(0, 0.0, 0.0);
        let near = mean_rx_power(&Point3::new(50.0, 0.0, 145.0), &g, &env).unwrap();
        let far = mean_rx_power(&Point3::new(500.0, 0.0, 145.0), &g, &env).unwrap();
        assert!(near > far && far > 0.0);
    }

    fn small_site() -> SiteConfig {
        SiteConfig { x_max: 300.0, y_max: 300.0, z_max: 90.0, dx: 100.0, dy: 100.0, dz: 30.0, ..SiteConfig::default() }
    }

    #[test]
    fn ibf_equals_fine_search_on_whole_toy_site() {
        let env = Environment::default();
        let site = small_site();
        let gns = [gn(0, 40.0, 70.0), gn(1, 260.0, 120.0), gn(2, 150.0, 280.0)];
        let m: Vec<&GroundNode> = gns.iter().collect();
        let e = eval(&env);
        let ibf = ibf_positioning(&site, 0, &m, &e, 1).unwrap();
        let fs = fine_search(&site, &site.all_voxels(), 0, &m, &e).unwrap();
        assert_eq!(ibf, fs);
        assert_eq!(site.all_voxels().len(), 27);
        let more = ibf_positioning(&site, 0, &m, &e, 3).unwrap();
        assert!(site.all_voxels().contains(&more.voxel));
    }

    #[test]
    fn ibf_single_voxel_site() {
        let env = Environment::default();
        let site = SiteConfig { x_max: 50.0, y_max: 50.0, z_max: 50.0, dx: 50.0, dy: 50.0, dz: 50.0, ..SiteConfig::default() };
        let g = gn(0, 10.0, 10.0);
        let r = ibf_positioning(&site, 0, &[&g], &eval(&env), 2).unwrap();
        assert_eq!(r.voxel, VoxelIndex::new(0, 0, 0));
    }

    #[test]
    fn igd_zero_step_and_stationarity() {
        let env = Environment::default();
        let site = SiteConfig { x_max: 400.0, y_max: 400.0, z_max: 120.0, dx: 20.0, dy: 20.0, dz: 20.0, ..SiteConfig::default() };
        let gns = [gn(0, 100.0, 100.0), gn(1, 180.0, 140.0), gn(2, 120.0, 220.0)];
        let m: Vec<&GroundNode> = gns.iter().collect();
        let e = eval(&env);
        let start = site.voxel_center(VoxelIndex::new(3, 4, 2));
        let still = igd_positioning(&site, 0, &m, &e, start, 0.0, 10, 5).unwrap();
        assert_eq!(still.coordinate, start);

        let best = fine_search(&site, &site.all_voxels(), 0, &m, &e).unwrap();
        let from_best = igd_positioning(&site, 0, &m, &e, best.coordinate, 40.0, 20, 5).unwrap();
        let d = from_best.voxel;
        assert!(d.ix.abs_diff(best.voxel.ix) <= 1 && d.iy.abs_diff(best.voxel.iy) <= 1 && d.iz.abs_diff(best.voxel.iz) <= 1);

        let centroid = site.voxel_center(VoxelIndex::new(6, 7, 5));
        let local = igd_positioning(&site, 0, &m, &e, centroid, 40.0, 20, 5).unwrap();
        assert!(local.cluster_reward <= best.cluster_reward);
    }

    #[test]
    fn altitude_capped_at_ceiling() {
        let low = crate::load_scenario("[site]\nz_max = 100.0\n").unwrap();
        assert_eq!(baseline_altitude(&low), 100.0);
        assert_eq!(baseline_altitude(&crate::load_scenario("").unwrap()), 145.0);
    }
}
