use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{FleetGraph, FleetPlan, GnOutcome, MissionParams, UavTour, VertexKind, POWER_TOLERANCE, TIME_EPS};
use crate::error::Result;
use crate::mimo::reward;
use crate::scenario::{LatencyMode, SiteConfig, VoxelIndex};
use crate::trajectory_opt::{Edge, Trajectory, TrajectoryContext};
use crate::Point3;

/// Two UAVs in the same voxel at a sampled instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub time: f64,
    pub voxel: VoxelIndex,
    /// Lower id first.
    pub uavs: (usize, usize),
}

/// Mission constraints: tour continuity and deadline, voxel separation,
/// single service per cluster, kinematic limits plus the power budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintStatus {
    pub continuity: bool,
    pub collision_free: bool,
    pub single_service: bool,
    pub kinematics_and_power: bool,
}

impl ConstraintStatus {
    pub fn all(&self) -> bool {
        self.continuity && self.collision_free && self.single_service && self.kinematics_and_power
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionReport {
    pub total_reward: f64,
    pub served_count: usize,
    pub per_uav_avg_power: Vec<f64>,
    /// Landing time of each UAV; zero for idle ones.
    pub per_uav_return_time: Vec<f64>,
    /// One row per GN of the graph, ordered by id.
    pub outcomes: Vec<GnOutcome>,
    pub collisions: Vec<Collision>,
    /// Stops where not a single batch fit before the deadline.
    pub idle_stops: usize,
    pub violations: Vec<String>,
    pub status: ConstraintStatus,
}

#[derive(Debug, Clone, Copy)]
enum Motion<'a> {
    Leg(usize, &'a Trajectory),
    Hover(Point3),
}

#[derive(Debug, Clone, Copy)]
struct Span<'a> {
    start: f64,
    end: f64,
    motion: Motion<'a>,
}

struct Served {
    gn_id: usize,
    completion: f64,
    latency: f64,
    reward: f64,
}

struct TourReplay<'a> {
    spans: Vec<Span<'a>>,
    served: Vec<(usize, Served)>,
    return_time: f64,
    energy: f64,
    idle_stops: usize,
}

/// Walks one tour: flies each leg, then works through the stop's antenna
/// batches while a batch plus the flight home still fits before `T`.
fn replay<'a>(tour: &'a UavTour, g: &FleetGraph, p: &MissionParams) -> TourReplay<'a> {
    let mut r = TourReplay { spans: Vec::new(), served: Vec::new(), return_time: 0.0, energy: 0.0, idle_stops: 0 };
    let mut clock = 0.0;
    for (k, &stop) in tour.stops.iter().enumerate() {
        if !tour.stationed {
            if let Some(leg) = tour.legs.get(k) {
                r.spans.push(Span { start: clock, end: clock + leg.duration, motion: Motion::Leg(k, leg) });
                clock += leg.duration;
                r.energy += leg.energy();
            }
        }
        let Some(v) = g.vertices.get(stop) else { continue };
        let back = if tour.stationed { 0.0 } else { g.travel_time(stop, tour.home) };
        let arrival = clock;
        let mut batch = 0;
        while batch < v.batch_durations.len() && clock + v.batch_durations[batch] + back <= p.mission_duration + TIME_EPS {
            for it in &v.items {
                if it.batch != batch || !it.harvest_time.is_finite() {
                    continue;
                }
                let completion = clock + it.harvest_time;
                let latency = if p.latency == LatencyMode::Literal { it.harvest_time } else { completion };
                r.served.push((stop, Served { gn_id: it.gn_id, completion, latency, reward: reward(&it.class, latency) }));
            }
            clock += v.batch_durations[batch];
            batch += 1;
        }
        if batch == 0 {
            r.idle_stops += 1;
        }
        r.energy += g.hover_power * (clock - arrival);
        r.spans.push(Span { start: arrival, end: clock, motion: Motion::Hover(v.position) });
    }
    if tour.stationed {
        if let Some(&stop) = tour.stops.first() {
            let at = g.vertices.get(stop).map_or(Point3::zeros(), |v| v.position);
            r.spans = vec![Span { start: 0.0, end: p.mission_duration, motion: Motion::Hover(at) }];
            r.return_time = p.mission_duration;
            r.energy = g.hover_power * p.mission_duration;
        }
    } else if let Some(leg) = tour.legs.get(tour.stops.len()).filter(|_| !tour.stops.is_empty()) {
        r.spans.push(Span { start: clock, end: clock + leg.duration, motion: Motion::Leg(tour.stops.len(), leg) });
        clock += leg.duration;
        r.energy += leg.energy();
        r.return_time = clock;
    }
    r
}

fn position_at(spans: &[Span], t: f64) -> Option<Point3> {
    let s = spans.iter().find(|s| s.start <= t && t <= s.end)?;
    Some(match s.motion {
        Motion::Leg(_, leg) => leg.position_at(t - s.start),
        Motion::Hover(p) => p,
    })
}

fn detect_collisions(replays: &[TourReplay], site: &SiteConfig, horizon: f64) -> Vec<Collision> {
    let pads: HashSet<VoxelIndex> =
        (0..site.depots.len()).filter_map(|i| site.voxel_index(&site.clamp(&site.depot(i))).ok()).collect();
    let mut out = Vec::new();
    let steps = horizon.max(0.0).floor() as usize;
    for step in 0..=steps {
        let t = step as f64;
        let mut occupied: BTreeMap<VoxelIndex, usize> = BTreeMap::new();
        for (u, r) in replays.iter().enumerate() {
            let Some(p) = position_at(&r.spans, t) else { continue };
            let Ok(v) = site.voxel_index(&site.clamp(&p)) else { continue };
            if pads.contains(&v) {
                continue;
            }
            if let Some(&other) = occupied.get(&v) {
                out.push(Collision { time: t, voxel: v, uavs: (other.min(u), other.max(u)) });
            } else {
                occupied.insert(v, u);
            }
        }
    }
    out
}

/// Replays a plan and audits every mission constraint. Collision checks
/// run at 1 s resolution and only when `site` is given. Violations are
/// reported, never raised.
pub fn simulate_mission(plan: &FleetPlan, g: &FleetGraph, p: &MissionParams, site: Option<&SiteConfig>) -> MissionReport {
    let mut violations = Vec::new();
    let mut status = ConstraintStatus { continuity: true, collision_free: true, single_service: true, kinematics_and_power: true };
    let cap = p.p_avg * (1.0 + POWER_TOLERANCE);

    let mut seen: HashSet<usize> = HashSet::new();
    for tour in &plan.tours {
        for &s in &tour.stops {
            if !matches!(g.vertices.get(s).map(|v| v.kind), Some(VertexKind::Cluster(_))) {
                status.single_service = false;
                violations.push(format!("uav {} stops at non-cluster vertex {s}", tour.uav));
            } else if !seen.insert(s) {
                status.single_service = false;
                violations.push(format!("cluster vertex {s} visited more than once"));
            }
        }
    }

    for tour in plan.tours.iter().filter(|t| !t.stationed && !t.stops.is_empty()) {
        let home_ok = g.vertices.get(tour.home).is_some_and(|v| v.is_depot());
        let path: Vec<usize> = std::iter::once(tour.home).chain(tour.stops.iter().copied()).chain(std::iter::once(tour.home)).collect();
        let linked = home_ok
            && tour.legs.len() + 1 == path.len()
            && path.windows(2).zip(&tour.legs).all(|(w, leg)| {
                let ok = |v: usize, q: Point3| g.vertices.get(v).is_some_and(|x| (x.position - q).norm() <= 1e-6);
                ok(w[0], leg.start()) && ok(w[1], leg.end())
            });
        if !linked {
            status.continuity = false;
            violations.push(format!("uav {} legs do not form a closed tour from its depot", tour.uav));
        }
        for (k, leg) in tour.legs.iter().enumerate() {
            if leg.max_speed() > p.v_max * (1.0 + 1e-9) {
                status.kinematics_and_power = false;
                violations.push(format!("uav {} leg {k} speed {:.3} m/s over limit", tour.uav, leg.max_speed()));
            }
            if leg.max_acceleration() > p.a_max * (1.0 + 1e-6) {
                status.kinematics_and_power = false;
                violations.push(format!("uav {} leg {k} acceleration {:.3} m/s^2 over limit", tour.uav, leg.max_acceleration()));
            }
        }
    }

    let replays: Vec<TourReplay> = plan.tours.iter().map(|t| replay(t, g, p)).collect();
    let mut per_uav_avg_power = Vec::with_capacity(replays.len());
    for (tour, r) in plan.tours.iter().zip(&replays) {
        if !tour.stationed && r.return_time > p.mission_duration + TIME_EPS {
            status.continuity = false;
            violations.push(format!("uav {} lands at {:.3} s after the deadline", tour.uav, r.return_time));
        }
        let power = if r.return_time > 0.0 { r.energy / r.return_time } else { 0.0 };
        if power > cap {
            status.kinematics_and_power = false;
            violations.push(format!("uav {} averages {power:.1} W over the {:.1} W budget", tour.uav, p.p_avg));
        }
        per_uav_avg_power.push(power);
    }

    let mut outcomes: BTreeMap<usize, GnOutcome> = BTreeMap::new();
    for v in &g.vertices {
        if let VertexKind::Cluster(c) = v.kind {
            for it in &v.items {
                outcomes.insert(
                    it.gn_id,
                    GnOutcome { gn_id: it.gn_id, cluster: Some(c), uav: None, completion_time: None, latency: None, reward: 0.0 },
                );
            }
        }
    }
    for (tour, r) in plan.tours.iter().zip(&replays) {
        for (_, s) in &r.served {
            if let Some(o) = outcomes.get_mut(&s.gn_id) {
                if o.uav.is_none() {
                    *o = GnOutcome { uav: Some(tour.uav), completion_time: Some(s.completion), latency: Some(s.latency), reward: s.reward, ..o.clone() };
                }
            }
        }
    }
    let outcomes: Vec<GnOutcome> = outcomes.into_values().collect();

    let collisions = match site {
        Some(site) => {
            let horizon = replays.iter().map(|r| r.return_time).fold(p.mission_duration, f64::max);
            detect_collisions(&replays, site, horizon)
        }
        None => Vec::new(),
    };
    if let Some(c) = collisions.first() {
        status.collision_free = false;
        violations.push(format!("{} voxel conflicts, first uavs {:?} at {:.0} s", collisions.len(), c.uavs, c.time));
    }

    MissionReport {
        total_reward: outcomes.iter().map(|o| o.reward).sum(),
        served_count: outcomes.iter().filter(|o| o.uav.is_some()).count(),
        per_uav_avg_power,
        per_uav_return_time: replays.iter().map(|r| r.return_time).collect(),
        outcomes,
        collisions,
        idle_stops: replays.iter().map(|r| r.idle_stops).sum(),
        violations,
        status,
    }
}

/// Leg of `u` in flight at time `t`: (leg index, leg start time).
fn leg_at(tour: &UavTour, g: &FleetGraph, p: &MissionParams, t: f64) -> Option<(usize, f64)> {
    replay(tour, g, p).spans.iter().find_map(|s| match s.motion {
        Motion::Leg(k, leg) if s.start <= t && t <= s.end && leg.duration > 0.0 => Some((k, s.start)),
        _ => None,
    })
}

/// Full offset within 2 s of the conflict span, fading to zero over 10 s.
fn offset_weight(tau: f64, lo: f64, hi: f64) -> f64 {
    let gap = if tau < lo - 2.0 { lo - 2.0 - tau } else if tau > hi + 2.0 { tau - hi - 2.0 } else { 0.0 };
    (1.0 - gap / 10.0).max(0.0)
}

/// Lifts (or lowers, near the ceiling) the conflicting leg of the lower-id
/// UAV by one voxel layer around each conflict, re-repairs it, and replays,
/// for up to `rounds` rounds. The other UAV moves instead when the lower-id
/// one is hovering.
pub fn repair_collisions(
    plan: &FleetPlan,
    g: &FleetGraph,
    p: &MissionParams,
    ctx: &TrajectoryContext,
    rounds: usize,
) -> Result<(FleetPlan, MissionReport)> {
    let site = ctx.site;
    let mut plan = plan.clone();
    for _ in 0..rounds {
        let rep = simulate_mission(&plan, g, p, Some(site));
        let Some(first) = rep.collisions.first().cloned() else { break };
        let (a, b) = first.uavs;
        let Some((u, k, leg_start)) =
            [a, b].into_iter().find_map(|u| leg_at(&plan.tours[u], g, p, first.time).map(|(k, s)| (u, k, s)))
        else {
            break;
        };
        let leg = &plan.tours[u].legs[k];
        let hits: Vec<f64> = rep
            .collisions
            .iter()
            .filter(|c| c.uavs == first.uavs && c.time >= leg_start && c.time <= leg_start + leg.duration)
            .map(|c| c.time - leg_start)
            .collect();
        let lo = hits.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = hits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut particle = leg.to_particle();
        let n = particle.waypoints.len();
        let top = (1..n.saturating_sub(1))
            .filter(|&j| offset_weight(leg.times[j], lo, hi) > 0.0)
            .map(|j| particle.waypoints[j].z)
            .fold(f64::NEG_INFINITY, f64::max);
        let dz = if top + site.dz > site.z_max { -site.dz } else { site.dz };
        for j in 1..n.saturating_sub(1) {
            particle.waypoints[j].z += dz * offset_weight(leg.times[j], lo, hi);
        }
        let edge = Edge::new(leg.start(), leg.end());
        particle.repair(&edge, site, ctx.uav);
        plan.tours[u].legs[k] = particle.to_trajectory(ctx.uav, ctx.env, ctx.accounting)?;
    }
    let report = simulate_mission(&plan, g, p, Some(site));
    plan.total_reward = report.total_reward;
    plan.per_uav_avg_power = report.per_uav_avg_power.clone();
    Ok((plan, report))
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Best reward over every assignment of clusters to UAVs and every visiting
/// order, each plan checked by replay (collisions aside). Exponential; meant
/// for a handful of clusters.
pub fn exhaustive_search(g: &FleetGraph, p: &MissionParams) -> (f64, Vec<Vec<usize>>) {
    let (c, u) = (g.cluster_count(), p.uav_count());
    let mut best = (0.0, vec![Vec::new(); u]);
    let codes = (u + 1).pow(c as u32);
    for code in 0..codes {
        let mut groups = vec![Vec::new(); u];
        let mut x = code;
        for cl in 0..c {
            let owner = x % (u + 1);
            x /= u + 1;
            if owner < u {
                groups[owner].push(g.cluster_vertex(cl));
            }
        }
        let orders: Vec<Vec<Vec<usize>>> = groups.iter().map(|grp| permutations(grp)).collect();
        let mut idx = vec![0usize; u];
        loop {
            let stops: Vec<Vec<usize>> = (0..u).map(|i| orders[i][idx[i]].clone()).collect();
            let plan = FleetPlan::from_stops(g, p, &stops);
            let r = simulate_mission(&plan, g, p, None);
            let st = r.status;
            if st.continuity && st.single_service && st.kinematics_and_power && r.idle_stops == 0 && r.total_reward > best.0 {
                best = (r.total_reward, stops);
            }
            let mut i = 0;
            while i < u {
                idx[i] += 1;
                if idx[i] < orders[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == u {
                break;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::super::testing::{params, toy_graph};
    use super::super::bnb_mtsp;
    use super::*;

    fn toy() -> FleetGraph {
        toy_graph(
            &[
                (400.0, 0.0, vec![(0, 0, 20.0), (1, 1, 30.0)], vec![33.0]),
                (0.0, 400.0, vec![(2, 2, 40.0)], vec![40.0]),
            ],
            20.0,
            4500.0,
        )
    }

    #[test]
    fn replay_matches_hand_timeline() {
        let g = toy();
        let p = params(1, 1000.0);
        let plan = FleetPlan::from_stops(&g, &p, &[vec![1, 2]]);
        let r = simulate_mission(&plan, &g, &p, None);
        assert!(r.status.all(), "{:?}", r.violations);
        let out = (400.0f64 * 400.0 + 50.0 * 50.0).sqrt() / 20.0;
        let diag = (2.0f64).sqrt() * 400.0 / 20.0;
        assert!((r.per_uav_return_time[0] - (out + 33.0 + diag + 40.0 + out)).abs() < 1e-9);
        let classes = crate::scenario::TrafficClass::defaults();
        let expected = reward(&classes[0], out + 20.0) + reward(&classes[1], out + 30.0) + reward(&classes[2], out + 33.0 + diag + 40.0);
        assert!((r.total_reward - expected).abs() < 1e-12);
        assert_eq!(r.served_count, 3);
    }

    #[test]
    fn flags_repeats_deadline_and_power() {
        let g = toy();
        let p = params(2, 1000.0);
        let dup = FleetPlan::from_stops(&g, &p, &[vec![1], vec![1]]);
        assert!(!simulate_mission(&dup, &g, &p, None).status.single_service);
        let late = FleetPlan::from_stops(&g, &params(1, 80.0), &[vec![1, 2]]);
        let r = simulate_mission(&late, &g, &params(1, 80.0), None);
        assert!(r.idle_stops > 0 || !r.status.continuity);
        let hot = toy_graph(&[(400.0, 0.0, vec![(0, 0, 20.0)], vec![20.0])], 20.0, 6000.0);
        let r = simulate_mission(&FleetPlan::from_stops(&hot, &p, &[vec![1], vec![]]), &hot, &p, None);
        assert!(!r.status.kinematics_and_power);
        let mut broken = FleetPlan::from_stops(&g, &p, &[vec![1], vec![]]);
        broken.tours[0].legs.pop();
        assert!(!simulate_mission(&broken, &g, &p, None).status.continuity);
    }

    #[test]
    fn flight_through_hover_point_collides_and_gets_separated() {
        use super::super::{GraphVertex, ServiceItem};
        use crate::scenario::{CostMode, HoverAccounting, SwarmConfig, TrafficClass};
        let site = SiteConfig { x_max: 400.0, y_max: 400.0, z_max: 100.0, depots: vec![[0.0, 0.0, 0.0], [400.0, 0.0, 0.0]], ..SiteConfig::default() };
        let s = crate::load_scenario("").unwrap();
        let uav = crate::UavSpec { v_max: 20.0, a_max: 5.0, p_avg: 1e5, ..s.uav().clone() };
        let (env, acc, swarm) = (s.env.clone(), HoverAccounting::Literal, SwarmConfig::default());
        let ctx = TrajectoryContext { site: &site, uav: &uav, env: &env, swarm: &swarm, cost: CostMode::Time, accounting: acc };
        let class = TrafficClass::defaults()[0].clone();
        let vertex = |kind, at: Point3, gn: usize, dwell: f64| GraphVertex {
            kind,
            position: at,
            items: if dwell > 0.0 { vec![ServiceItem { gn_id: gn, class: class.clone(), harvest_time: dwell, batch: 0 }] } else { vec![] },
            batch_durations: if dwell > 0.0 { vec![dwell] } else { vec![] },
        };
        // UAV 0 flies the diagonal through B while UAV 1 hovers at B.
        let vertices = vec![
            vertex(VertexKind::Depot(0), Point3::new(0.0, 0.0, 0.0), 0, 0.0),
            vertex(VertexKind::Depot(1), Point3::new(400.0, 0.0, 0.0), 0, 0.0),
            vertex(VertexKind::Cluster(0), Point3::new(400.0, 400.0, 50.0), 0, 5.0),
            vertex(VertexKind::Cluster(1), Point3::new(205.0, 205.0, 25.625), 1, 60.0),
        ];
        let n = vertices.len();
        let mut edges = vec![vec![None; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j && !(i < 2 && j < 2) {
                    let e = Edge::new(vertices[i].position, vertices[j].position);
                    let mut particle = crate::trajectory_opt::Particle::straight(&e, 40, 4.0);
                    particle.repair(&e, &site, &uav);
                    edges[i][j] = Some(particle.to_trajectory(&uav, &env, acc).unwrap());
                }
            }
        }
        let g = FleetGraph { vertices, edges, depot_count: 2, hover_power: 4000.0 };
        let p = MissionParams { home_depots: vec![0, 1], p_avg: 1e5, v_max: 20.0, a_max: 5.0, ..params(2, 1000.0) };
        let plan = FleetPlan::from_stops(&g, &p, &[vec![2], vec![3]]);
        let r = simulate_mission(&plan, &g, &p, Some(&site));
        assert!(!r.collisions.is_empty());
        assert!(r.collisions.iter().all(|c| c.uavs == (0, 1)));
        let (fixed, rep) = repair_collisions(&plan, &g, &p, &ctx, 8).unwrap();
        assert!(rep.status.collision_free, "{:?}", rep.collisions);
        assert_ne!(fixed.tours[0].legs[0], plan.tours[0].legs[0]);
        assert_eq!(fixed.tours[1], plan.tours[1]);
        assert!(rep.status.kinematics_and_power, "{:?}", rep.violations);
        assert_eq!(rep.served_count, 2);
    }

    #[test]
    fn landed_and_pad_voxels_exempt() {
        let site = SiteConfig { x_max: 400.0, y_max: 400.0, z_max: 100.0, ..SiteConfig::default() };
        let g = toy();
        let p = params(2, 1000.0);
        let plan = FleetPlan::from_stops(&g, &p, &[vec![1], vec![2]]);
        let r = simulate_mission(&plan, &g, &p, Some(&site));
        assert!(r.collisions.is_empty(), "{:?}", r.collisions.first());
    }

    #[test]
    fn replay_reproduces_search_reward() {
        let g = toy_graph(
            &[
                (500.0, 0.0, vec![(0, 0, 30.0), (1, 1, 20.0)], vec![33.0]),
                (0.0, 700.0, vec![(2, 2, 60.0)], vec![66.0]),
                (600.0, 600.0, vec![(3, 3, 10.0), (4, 0, 12.0)], vec![13.0]),
            ],
            20.0,
            4500.0,
        );
        let p = params(2, 200.0);
        let plan = bnb_mtsp(&g, &p);
        let r = simulate_mission(&plan, &g, &p, None);
        assert!((r.total_reward - plan.total_reward).abs() <= 1e-12 * plan.total_reward);
        for (a, b) in r.per_uav_avg_power.iter().zip(&plan.per_uav_avg_power) {
            assert!((a - b).abs() < 1e-6);
        }
        let mut stops: Vec<usize> = plan.tours.iter().flat_map(|t| t.stops.clone()).collect();
        let n = stops.len();
        stops.dedup();
        stops.sort();
        stops.dedup();
        assert_eq!(stops.len(), n);
        assert!(r.status.continuity && r.status.single_service && r.status.kinematics_and_power);
    }

    #[test]
    fn stationed_tour_hovers_all_mission() {
        let g = toy();
        let p = params(1, 300.0);
        let mut plan = FleetPlan::from_stops(&g, &p, &[vec![1]]);
        plan.tours[0].legs.clear();
        plan.tours[0].stationed = true;
        let r = simulate_mission(&plan, &g, &p, None);
        assert!(r.status.continuity);
        assert_eq!(r.per_uav_avg_power[0], 4500.0);
        assert_eq!(r.outcomes[0].completion_time, Some(20.0));
    }
}
