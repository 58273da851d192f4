//! Edge trajectories: a swarm of piecewise-linear paths with per-segment
//! speeds, optimized by a two-stage competitive swarm under a Lagrangian
//! average-power penalty, with the multiplier set by subgradient ascent.

mod dual;
mod lcso;

pub use dual::{dual_ascent, DualResult, DualState, EdgeCache};
pub use lcso::{apply_update, lcso_optimize, tournament_update, LcsoResult, LoserCoefficients, RunnerCoefficients};

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::power::{horizontal_power, trajectory_power, vertical_power, PowerReport, VelocityProfile};
use crate::scenario::{CostMode, Environment, HoverAccounting, SiteConfig, SwarmConfig, UavSpec};
use crate::Point3;

/// Segments shorter than this are treated as absent.
const MIN_SEGMENT: f64 = 1e-9;
/// Share of `a_max` budgeted separately to turning and to speed changes by the repair.
const REPAIR_SHARE: f64 = 0.7;
/// Lowest speed the clamp allows, relative to `v_max`.
pub const MIN_SPEED_RATIO: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: Point3,
    pub to: Point3,
}

impl Edge {
    pub fn new(from: Point3, to: Point3) -> Self {
        Edge { from, to }
    }

    pub fn length(&self) -> f64 {
        (self.to - self.from).norm()
    }

    pub fn reversed(&self) -> Edge {
        Edge { from: self.to, to: self.from }
    }
}

/// Everything the optimizer needs besides the edge and the multiplier.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryContext<'a> {
    pub site: &'a SiteConfig,
    pub uav: &'a UavSpec,
    pub env: &'a Environment,
    pub swarm: &'a SwarmConfig,
    pub cost: CostMode,
    pub accounting: HoverAccounting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    /// `M_seg + 1` waypoints; the first and last are the edge endpoints.
    pub waypoints: Vec<Point3>,
    /// One constant speed per segment.
    pub speeds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleVelocity {
    pub waypoints: Vec<Point3>,
    pub speeds: Vec<f64>,
}

impl ParticleVelocity {
    pub fn zeros(segments: usize) -> Self {
        ParticleVelocity { waypoints: vec![Point3::zeros(); segments + 1], speeds: vec![0.0; segments] }
    }
}

/// Joint times, positions and velocities implied by a particle. Each joint's
/// velocity is the mean of the adjacent segment velocities.
#[derive(Debug, Clone, PartialEq)]
struct Kinematics {
    times: Vec<f64>,
    positions: Vec<Point3>,
    velocities: Vec<Point3>,
}

impl Kinematics {
    fn accelerations(&self) -> Vec<f64> {
        let n = self.times.len();
        if n < 2 {
            return vec![0.0; n];
        }
        (0..n)
            .map(|k| {
                let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
                ((self.velocities[hi] - self.velocities[lo]) / (self.times[hi] - self.times[lo])).norm()
            })
            .collect()
    }
}

fn kinematics(waypoints: &[Point3], speeds: &[f64]) -> Kinematics {
    let mut times = vec![0.0];
    let mut positions = vec![waypoints[0]];
    let mut seg_vel: Vec<Point3> = Vec::new();
    for (k, &s) in speeds.iter().enumerate() {
        let d = waypoints[k + 1] - waypoints[k];
        let len = d.norm();
        if len < MIN_SEGMENT {
            continue;
        }
        times.push(times[times.len() - 1] + len / s);
        positions.push(waypoints[k + 1]);
        seg_vel.push(d * (s / len));
    }
    let velocities = match seg_vel.len() {
        0 => vec![Point3::zeros()],
        n => (0..=n)
            .map(|j| match j {
                0 => seg_vel[0],
                j if j == n => seg_vel[n - 1],
                j => (seg_vel[j - 1] + seg_vel[j]) * 0.5,
            })
            .collect(),
    };
    Kinematics { times, positions, velocities }
}

impl Particle {
    pub fn segments(&self) -> usize {
        self.speeds.len()
    }

    /// Straight line at constant speed.
    pub fn straight(edge: &Edge, segments: usize, speed: f64) -> Particle {
        let waypoints =
            (0..=segments).map(|j| edge.from + (edge.to - edge.from) * (j as f64 / segments as f64)).collect();
        Particle { waypoints, speeds: vec![speed; segments] }
    }

    /// Smooth random particle: the straight line bent by a half-sine bump
    /// and a speed profile with a slow sinusoidal ripple.
    pub fn random<R: Rng + ?Sized>(edge: &Edge, segments: usize, uav: &UavSpec, site: &SiteConfig, rng: &mut R) -> Particle {
        let mut p = Particle::straight(edge, segments, uav.v_max);
        let len = edge.length();
        if len > MIN_SEGMENT {
            let dir = (edge.to - edge.from) / len;
            let amplitude = rng.random::<f64>() * 0.1 * len;
            let normal = loop {
                let r = Point3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                let n = r - dir * r.dot(&dir);
                if n.norm() > 1e-3 {
                    break n.normalize();
                }
            };
            for (j, w) in p.waypoints.iter_mut().enumerate() {
                let s = j as f64 / segments as f64;
                *w += normal * (amplitude * (std::f64::consts::PI * s).sin());
            }
        }
        let base = (0.2 + 0.8 * rng.random::<f64>()) * uav.v_max;
        let ripple = 0.2 * rng.random::<f64>();
        let freq = rng.random_range(1..=3) as f64;
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        for (k, s) in p.speeds.iter_mut().enumerate() {
            let x = (k as f64 + 0.5) / segments as f64;
            *s = base * (1.0 + ripple * (std::f64::consts::TAU * freq * x + phase).sin());
        }
        p.repair(edge, site, uav);
        p
    }

    /// Projects onto the feasible set: endpoints pinned, waypoints inside
    /// the site, speeds in `[v_min, v_max]`, then speeds lowered until every
    /// joint acceleration is within `a_max`.
    pub fn repair(&mut self, edge: &Edge, site: &SiteConfig, uav: &UavSpec) {
        let n = self.waypoints.len();
        for w in self.waypoints.iter_mut() {
            *w = if w.iter().all(|c| c.is_finite()) { site.clamp(w) } else { edge.from };
        }
        self.waypoints[0] = edge.from;
        self.waypoints[n - 1] = edge.to;
        let v_min = MIN_SPEED_RATIO * uav.v_max;
        for s in self.speeds.iter_mut() {
            *s = if s.is_nan() { v_min } else { s.clamp(v_min, uav.v_max) };
        }

        let kept: Vec<usize> = (0..self.speeds.len())
            .filter(|&k| (self.waypoints[k + 1] - self.waypoints[k]).norm() >= MIN_SEGMENT)
            .collect();
        let budget = REPAIR_SHARE * uav.a_max;
        let seg = |k: usize| self.waypoints[k + 1] - self.waypoints[k];
        let mut caps: Vec<f64> = self.speeds.clone();
        for pair in kept.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (da, db) = (seg(a), seg(b));
            let (la, lb) = (da.norm(), db.norm());
            let cos = (da.dot(&db) / (la * lb)).clamp(-1.0, 1.0);
            let turn = cos.acos();
            if turn > 0.0 {
                let cap = (budget * 0.5 * (la + lb) / turn).sqrt();
                caps[a] = caps[a].min(cap);
                caps[b] = caps[b].min(cap);
            }
        }
        for i in 1..kept.len() {
            let (a, b) = (kept[i - 1], kept[i]);
            let reach = 0.5 * (seg(a).norm() + seg(b).norm());
            caps[b] = caps[b].min((caps[a] * caps[a] + 2.0 * budget * reach).sqrt());
        }
        for i in (1..kept.len()).rev() {
            let (a, b) = (kept[i - 1], kept[i]);
            let reach = 0.5 * (seg(a).norm() + seg(b).norm());
            caps[a] = caps[a].min((caps[b] * caps[b] + 2.0 * budget * reach).sqrt());
        }
        self.speeds = caps;

        // Scaling every speed by c scales each acceleration by c^2 exactly.
        let peak = kinematics(&self.waypoints, &self.speeds).accelerations().into_iter().fold(0.0, f64::max);
        if peak > uav.a_max {
            let c = (uav.a_max / peak).sqrt() * (1.0 - 1e-9);
            for s in self.speeds.iter_mut() {
                *s *= c;
            }
        }
    }

    pub fn to_trajectory(&self, uav: &UavSpec, env: &Environment, accounting: HoverAccounting) -> Result<Trajectory> {
        let k = kinematics(&self.waypoints, &self.speeds);
        Trajectory::from_samples(k.times, k.positions, k.velocities, uav, env, accounting)
    }
}

/// Timed, sampled 3D trajectory with its power figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Point3>,
    pub velocities: Vec<Point3>,
    pub duration: f64,
    pub report: PowerReport,
}

impl Trajectory {
    fn from_samples(
        times: Vec<f64>,
        positions: Vec<Point3>,
        velocities: Vec<Point3>,
        uav: &UavSpec,
        env: &Environment,
        accounting: HoverAccounting,
    ) -> Result<Trajectory> {
        if times.len() < 2 {
            return Ok(Trajectory::stationary(positions[0]));
        }
        let profile = VelocityProfile::from_velocities(times.clone(), &velocities)?;
        let report = trajectory_power(&profile, uav, env, accounting)?;
        Ok(Trajectory { duration: report.duration, times, positions, velocities, report })
    }

    /// Zero-length edge: no motion, no time, no energy.
    pub fn stationary(at: Point3) -> Trajectory {
        Trajectory {
            times: vec![0.0],
            positions: vec![at],
            velocities: vec![Point3::zeros()],
            duration: 0.0,
            report: PowerReport { horizontal_energy: 0.0, vertical_energy: 0.0, duration: 0.0, average_power: 0.0 },
        }
    }

    pub fn energy(&self) -> f64 {
        self.report.energy()
    }

    pub fn average_power(&self) -> f64 {
        self.report.average_power
    }

    pub fn start(&self) -> Point3 {
        self.positions[0]
    }

    pub fn end(&self) -> Point3 {
        self.positions[self.positions.len() - 1]
    }

    pub fn path_length(&self) -> f64 {
        self.positions.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn profile(&self) -> Option<VelocityProfile> {
        VelocityProfile::from_velocities(self.times.clone(), &self.velocities).ok()
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_acceleration(&self) -> f64 {
        Kinematics { times: self.times.clone(), positions: self.positions.clone(), velocities: self.velocities.clone() }
            .accelerations()
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Position at time `t` since departure, by linear interpolation between samples.
    pub fn position_at(&self, t: f64) -> Point3 {
        if t <= 0.0 || self.times.len() < 2 {
            return self.start();
        }
        let k = self.times.partition_point(|&x| x <= t);
        if k >= self.times.len() {
            return self.end();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let f = (t - t0) / (t1 - t0);
        self.positions[k - 1] + (self.positions[k] - self.positions[k - 1]) * f
    }

    /// The same path flown backwards, with its own power figures.
    pub fn reversed(&self, uav: &UavSpec, env: &Environment, accounting: HoverAccounting) -> Result<Trajectory> {
        let total = self.times[self.times.len() - 1];
        let times = self.times.iter().rev().map(|t| total - t).collect();
        let positions = self.positions.iter().rev().copied().collect();
        let velocities = self.velocities.iter().rev().map(|v| -v).collect();
        Trajectory::from_samples(times, positions, velocities, uav, env, accounting)
    }

    /// Particle encoding of the sampled path: one segment per sample gap,
    /// flown at the gap's mean speed.
    pub fn to_particle(&self) -> Particle {
        let speeds = self
            .times
            .windows(2)
            .zip(self.positions.windows(2))
            .map(|(t, p)| (p[1] - p[0]).norm() / (t[1] - t[0]))
            .collect();
        Particle { waypoints: self.positions.clone(), speeds }
    }

    /// Writes `tau,x,y,z,v_h,v_v,p_inst` rows.
    pub fn write_csv<W: Write>(&self, mut out: W, uav: &UavSpec, env: &Environment) -> std::io::Result<()> {
        writeln!(out, "tau,x,y,z,v_h,v_v,p_inst")?;
        let profile = self.profile();
        for k in 0..self.times.len() {
            let p = &self.positions[k];
            let (v_h, v_v, p_inst) = match &profile {
                Some(pr) => (
                    pr.v_h[k],
                    pr.v_v[k],
                    horizontal_power(pr.v_h[k], pr.a_h[k], uav, env) + vertical_power(pr.v_v[k], pr.a_v[k], uav, env),
                ),
                None => (0.0, 0.0, horizontal_power(0.0, 0.0, uav, env) + vertical_power(0.0, 0.0, uav, env)),
            };
            writeln!(out, "{},{},{},{},{},{},{}", self.times[k], p.x, p.y, p.z, v_h, v_v, p_inst)?;
        }
        Ok(())
    }
}

/// `t_delta * (1 + lambda * max(0, P_3D - P_avg))` for the time objective,
/// `P_3D` itself for the power objective.
pub fn lagrangian_cost(report: &PowerReport, lambda: f64, p_avg: f64, mode: CostMode) -> f64 {
    match mode {
        CostMode::Time => report.duration * (1.0 + lambda * (report.average_power - p_avg).max(0.0)),
        CostMode::Power => report.average_power,
    }
}

/// Cost of a particle under `lambda`; infeasible encodings cost infinity.
pub fn particle_cost(particle: &Particle, lambda: f64, ctx: &TrajectoryContext) -> f64 {
    match particle.to_trajectory(ctx.uav, ctx.env, ctx.accounting) {
        Ok(t) => lagrangian_cost(&t.report, lambda, ctx.uav.p_avg, ctx.cost),
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::scenario::load_scenario;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn spec() -> crate::ScenarioSpec {
        load_scenario("").unwrap()
    }

    #[test]
    fn straight_constant_speed() {
        let s = spec();
        let e = Edge::new(Point3::new(0.0, 0.0, 50.0), Point3::new(1000.0, 0.0, 50.0));
        let t = Particle::straight(&e, 10, 25.0).to_trajectory(s.uav(), &s.env, HoverAccounting::Literal).unwrap();
        assert_relative_eq!(t.duration, 40.0, max_relative = 1e-12);
        assert_relative_eq!(t.path_length(), 1000.0, max_relative = 1e-12);
        assert!(t.max_acceleration() < 1e-9);
        assert_relative_eq!(t.position_at(20.0).x, 500.0, max_relative = 1e-12);
        assert_eq!(t.position_at(100.0), e.to);
    }

    #[test]
    fn cost_examples() {
        let r = PowerReport { horizontal_energy: 0.0, vertical_energy: 60_000.0, duration: 10.0, average_power: 6000.0 };
        assert_eq!(lagrangian_cost(&r, 0.0, 5000.0, CostMode::Time), 10.0);
        // one unit of multiplier per watt of excess
        assert_eq!(lagrangian_cost(&r, 1.0, 5000.0, CostMode::Time), 10.0 * (1.0 + 1000.0));
        let slack = PowerReport { average_power: 4000.0, ..r };
        assert_eq!(lagrangian_cost(&slack, 0.0, 5000.0, CostMode::Time), lagrangian_cost(&slack, 7.0, 5000.0, CostMode::Time));
        assert_eq!(lagrangian_cost(&r, 3.0, 5000.0, CostMode::Power), 6000.0);
    }

    #[test]
    fn zero_length_edge_is_stationary() {
        let s = spec();
        let p = Point3::new(10.0, 10.0, 10.0);
        let t = Particle::straight(&Edge::new(p, p), 8, 10.0).to_trajectory(s.uav(), &s.env, HoverAccounting::Literal).unwrap();
        assert_eq!(t.duration, 0.0);
        assert_eq!(t.energy(), 0.0);
        assert_eq!(t.position_at(3.0), p);
    }

    #[test]
    fn reversal_preserves_geometry() {
        let s = spec();
        let e = Edge::new(Point3::new(0.0, 0.0, 0.0), Point3::new(600.0, 300.0, 120.0));
        let p = Particle::random(&e, 32, s.uav(), &s.site, &mut rng::rng(3));
        let t = p.to_trajectory(s.uav(), &s.env, HoverAccounting::Literal).unwrap();
        let r = t.reversed(s.uav(), &s.env, HoverAccounting::Literal).unwrap();
        assert_relative_eq!(r.duration, t.duration, max_relative = 1e-12);
        assert_eq!(r.start(), t.end());
        assert_relative_eq!(r.position_at(t.duration * 0.3), t.position_at(t.duration * 0.7), max_relative = 1e-9);
        assert_relative_eq!(r.max_acceleration(), t.max_acceleration(), max_relative = 1e-9);
    }

    #[test]
    fn csv_dump_has_one_row_per_sample() {
        let s = spec();
        let e = Edge::new(Point3::zeros(), Point3::new(100.0, 0.0, 20.0));
        let t = Particle::straight(&e, 4, 10.0).to_trajectory(s.uav(), &s.env, HoverAccounting::Literal).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf, s.uav(), &s.env).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("tau,x,y,z,v_h,v_v,p_inst"));
    }

    proptest! {
        #[test]
        fn repair_enforces_bounds(
            seed in 0u64..10_000,
            jitter in 0.0f64..200.0,
            x in 0.0f64..3000.0, y in 0.0f64..3000.0, z in 0.0f64..150.0,
        ) {
            let s = spec();
            let e = Edge::new(Point3::new(0.0, 0.0, 0.0), Point3::new(x, y, z));
            let mut r = rng::rng(seed);
            let mut p = Particle::random(&e, 24, s.uav(), &s.site, &mut r);
            for w in p.waypoints.iter_mut() {
                *w += Point3::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5, r.random::<f64>() - 0.5) * jitter;
            }
            for v in p.speeds.iter_mut() {
                *v += (r.random::<f64>() - 0.5) * 200.0;
            }
            p.repair(&e, &s.site, s.uav());
            prop_assert_eq!(p.waypoints[0], e.from);
            prop_assert_eq!(p.waypoints[24], e.to);
            prop_assert!(p.waypoints.iter().all(|w| s.site.contains(w)));
            prop_assert!(p.speeds.iter().all(|&v| v > 0.0 && v <= s.uav().v_max));
            let t = p.to_trajectory(s.uav(), &s.env, HoverAccounting::Literal).unwrap();
            prop_assert!(t.max_speed() <= s.uav().v_max * (1.0 + 1e-12));
            prop_assert!(t.max_acceleration() <= s.uav().a_max * (1.0 + 1e-9));
        }
    }
}
