use super::{serve_visit, FleetGraph, FleetPlan, MissionParams, VisitOutcome, POWER_TOLERANCE};
use crate::mimo::reward;
use crate::scenario::LatencyMode;

#[derive(Debug, Clone)]
struct Track {
    vertex: usize,
    time: f64,
    energy: f64,
    service: f64,
    stops: Vec<usize>,
}

impl Track {
    fn fresh(home: usize) -> Self {
        Track { vertex: home, time: 0.0, energy: 0.0, service: 0.0, stops: Vec::new() }
    }
}

/// Return time and mission-average power of a track closed by flying home.
fn closed_power(g: &FleetGraph, t: &Track, home: usize) -> (f64, f64) {
    if t.stops.is_empty() {
        return (0.0, 0.0);
    }
    let back = g.edge(t.vertex, home);
    let ret = t.time + back.map_or(0.0, |e| e.duration);
    let energy = t.energy + back.map_or(0.0, |e| e.energy()) + g.hover_power * t.service;
    (ret, energy / ret)
}

fn extend(g: &FleetGraph, p: &MissionParams, t: &Track, home: usize, cluster_vertex: usize) -> Option<VisitOutcome> {
    let arrival = t.time + g.travel_time(t.vertex, cluster_vertex);
    serve_visit(&g.vertices[cluster_vertex], arrival, g.travel_time(cluster_vertex, home), p.mission_duration, p.latency)
}

fn apply(g: &FleetGraph, t: &mut Track, cluster_vertex: usize, o: &VisitOutcome) {
    t.energy += g.edge(t.vertex, cluster_vertex).map_or(0.0, |e| e.energy());
    t.vertex = cluster_vertex;
    t.time = o.departure;
    t.service += o.service_time;
    t.stops.push(cluster_vertex);
}

struct Search<'a> {
    g: &'a FleetGraph,
    p: &'a MissionParams,
    power_cap: f64,
    visited: Vec<bool>,
    tracks: Vec<Track>,
    cur: usize,
    reward: f64,
    best_reward: f64,
    best_stops: Vec<Vec<usize>>,
    nodes: u64,
    exhausted: bool,
    min_in: Vec<f64>,
    min_return: Vec<f64>,
}

impl Search<'_> {
    fn power_ok(&self, u: usize) -> bool {
        closed_power(self.g, &self.tracks[u], self.p.home_depots[u]).1 <= self.power_cap
    }

    /// Every unvisited GN served the moment a UAV could first reach its cluster.
    fn bound(&self) -> f64 {
        let fresh_left = self.cur + 1 < self.tracks.len();
        let earliest = if fresh_left { 0.0 } else { self.tracks[self.cur].time };
        let mut b = self.reward;
        for (c, &seen) in self.visited.iter().enumerate() {
            if seen {
                continue;
            }
            let v = self.g.cluster_vertex(c);
            let arrival = earliest + self.min_in[v];
            for it in self.g.vertices[v].items.iter().filter(|it| it.harvest_time.is_finite()) {
                let done = arrival + it.harvest_time;
                if done + self.min_return[v] > self.p.mission_duration + super::TIME_EPS {
                    continue;
                }
                let latency = match self.p.latency {
                    LatencyMode::Elapsed => done,
                    LatencyMode::Literal => it.harvest_time,
                };
                b += reward(&it.class, latency);
            }
        }
        b
    }

    /// Identical UAVs (same home) fill in order: earlier ones non-empty and
    /// with a smaller first stop.
    fn may_start(&self, v: usize, cluster_vertex: usize) -> bool {
        (0..v).filter(|&w| self.p.home_depots[w] == self.p.home_depots[v]).all(|w| {
            self.tracks[w].stops.first().is_some_and(|&f| f < cluster_vertex)
        })
    }

    fn dfs(&mut self) {
        self.nodes += 1;
        if self.nodes > self.p.node_limit {
            self.exhausted = true;
            return;
        }
        if self.reward > self.best_reward && self.power_ok(self.cur) {
            self.best_reward = self.reward;
            self.best_stops = self.tracks.iter().map(|t| t.stops.clone()).collect();
        }
        if self.bound() <= self.best_reward {
            return;
        }

        let mut children: Vec<(usize, usize, VisitOutcome)> = Vec::new();
        for v in self.cur..self.tracks.len() {
            if v > self.cur && !self.power_ok(self.cur) {
                break;
            }
            for c in 0..self.visited.len() {
                if self.visited[c] {
                    continue;
                }
                let cv = self.g.cluster_vertex(c);
                if v > self.cur && !self.may_start(v, cv) {
                    continue;
                }
                if v == self.cur && self.tracks[v].stops.is_empty() && !self.may_start(v, cv) {
                    continue;
                }
                if let Some(o) = extend(self.g, self.p, &self.tracks[v], self.p.home_depots[v], cv) {
                    children.push((v, c, o));
                }
            }
        }
        children.sort_by(|a, b| b.2.reward.total_cmp(&a.2.reward).then((a.0, a.1).cmp(&(b.0, b.1))));

        for (v, c, o) in children {
            if self.exhausted {
                return;
            }
            let (saved_cur, saved_track) = (self.cur, self.tracks[v].clone());
            self.cur = v;
            apply(self.g, &mut self.tracks[v], self.g.cluster_vertex(c), &o);
            self.visited[c] = true;
            self.reward += o.reward;
            self.dfs();
            self.reward -= o.reward;
            self.visited[c] = false;
            self.tracks[v] = saved_track;
            self.cur = saved_cur;
        }
    }
}

/// Reward and per-UAV powers of explicit stop lists under the visit rules,
/// or `None` when a stop cannot serve anything or a power cap is exceeded.
fn evaluate_stops(g: &FleetGraph, p: &MissionParams, stops: &[Vec<usize>]) -> Option<(f64, Vec<f64>)> {
    let cap = p.p_avg * (1.0 + POWER_TOLERANCE);
    let mut total = 0.0;
    let mut powers = Vec::with_capacity(stops.len());
    for (u, s) in stops.iter().enumerate() {
        let home = p.home_depots[u];
        let mut t = Track::fresh(home);
        for &cv in s {
            let o = extend(g, p, &t, home, cv)?;
            total += o.reward;
            apply(g, &mut t, cv, &o);
        }
        let (_, power) = closed_power(g, &t, home);
        if power > cap {
            return None;
        }
        powers.push(power);
    }
    Some((total, powers))
}

/// Repeatedly appends the (UAV, cluster) visit with the largest immediate reward.
pub fn greedy_plan(g: &FleetGraph, p: &MissionParams) -> Vec<Vec<usize>> {
    let mut tracks: Vec<Track> = p.home_depots.iter().map(|&h| Track::fresh(h)).collect();
    let mut visited = vec![false; g.cluster_count()];
    loop {
        let mut best: Option<(f64, usize, usize, VisitOutcome)> = None;
        for (u, t) in tracks.iter().enumerate() {
            for (c, _) in visited.iter().enumerate().filter(|(_, &s)| !s) {
                let cv = g.cluster_vertex(c);
                if let Some(o) = extend(g, p, t, p.home_depots[u], cv) {
                    if best.as_ref().is_none_or(|b| o.reward > b.0) {
                        best = Some((o.reward, u, c, o));
                    }
                }
            }
        }
        let Some((_, u, c, o)) = best else { break };
        apply(g, &mut tracks[u], g.cluster_vertex(c), &o);
        visited[c] = true;
    }
    let stops: Vec<Vec<usize>> = tracks.into_iter().map(|t| t.stops).collect();
    if evaluate_stops(g, p, &stops).is_some() {
        stops
    } else {
        vec![Vec::new(); p.uav_count()]
    }
}

/// Reward-maximizing multi-UAV tours by depth-first branch-and-bound.
///
/// Tours are built one UAV at a time; each node is itself a candidate plan
/// (all open tours fly home), and is pruned when the optimistic bound cannot
/// beat the incumbent. Stops at `node_limit` with `optimal = false`.
pub fn bnb_mtsp(g: &FleetGraph, p: &MissionParams) -> FleetPlan {
    let u = p.uav_count();
    let greedy = greedy_plan(g, p);
    let (greedy_reward, _) = evaluate_stops(g, p, &greedy).unwrap_or((0.0, vec![0.0; u]));
    let n = g.vertices.len();
    let min_return: Vec<f64> =
        (0..n).map(|v| (0..g.depot_count).map(|d| g.travel_time(v, d)).fold(f64::INFINITY, f64::min)).collect();
    let mut s = Search {
        g,
        p,
        power_cap: p.p_avg * (1.0 + POWER_TOLERANCE),
        visited: vec![false; g.cluster_count()],
        tracks: p.home_depots.iter().map(|&h| Track::fresh(h)).collect(),
        cur: 0,
        reward: 0.0,
        best_reward: greedy_reward,
        best_stops: greedy,
        nodes: 0,
        exhausted: false,
        min_in: (0..n).map(|v| g.min_incoming(v)).collect(),
        min_return,
    };
    if u > 0 {
        s.dfs();
    }
    let stops = s.best_stops;
    let (total_reward, per_uav_avg_power) = evaluate_stops(g, p, &stops).unwrap_or((0.0, vec![0.0; u]));
    let mut plan = FleetPlan::from_stops(g, p, &stops);
    plan.total_reward = total_reward;
    plan.per_uav_avg_power = per_uav_avg_power;
    plan.optimal = !s.exhausted;
    plan.nodes_expanded = s.nodes;
    plan
}
