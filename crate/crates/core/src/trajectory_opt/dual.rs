use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{lcso_optimize, Edge, Particle, Trajectory, TrajectoryContext};
use crate::error::{Error, Result};
use crate::power::hover_power;
use crate::rng;
use crate::scenario::CostMode;

/// Slack on the power constraint when accepting a trajectory.
pub(crate) const POWER_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: f64,
    pub step0: f64,
    /// Updates applied so far.
    pub steps: usize,
    /// `P_3D - P_avg` seen at each update, watts.
    pub residuals: Vec<f64>,
}

impl DualState {
    pub fn new(step0: f64) -> Self {
        DualState { lambda: 0.0, step0, steps: 0, residuals: Vec::new() }
    }

    /// Projected step `lambda <- max(0, lambda + step0 / sqrt(k) * residual)`.
    pub fn update(&mut self, residual: f64) {
        self.steps += 1;
        self.residuals.push(residual);
        let step = self.step0 / (self.steps as f64).sqrt();
        self.lambda = (self.lambda + step * residual).max(0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualResult {
    pub trajectory: Trajectory,
    pub particle: Particle,
    pub lambda: f64,
    pub state: DualState,
}

fn better(a: &Trajectory, b: &Trajectory, mode: CostMode) -> bool {
    match mode {
        CostMode::Time => a.duration < b.duration,
        CostMode::Power => a.average_power() < b.average_power(),
    }
}

/// Alternates swarm optimization under the current multiplier with a
/// projected subgradient step on the multiplier. Returns the best
/// trajectory satisfying `P_3D <= 1.01 P_avg` seen over the outer loop.
pub fn dual_ascent(edge: &Edge, ctx: &TrajectoryContext, seed: u64, warm: &[Particle]) -> Result<DualResult> {
    let p_avg = ctx.uav.p_avg;
    let floor = hover_power(ctx.uav, ctx.env, ctx.accounting);
    if !(p_avg > floor) {
        return Err(Error::BelowHoverFloor { p_avg, floor });
    }
    let mut state = DualState::new(ctx.swarm.step0);
    if edge.length() == 0.0 {
        let r = lcso_optimize(edge, 0.0, ctx, seed, &[])?;
        return Ok(DualResult { trajectory: r.trajectory, particle: r.particle, lambda: 0.0, state });
    }

    let limit = p_avg * (1.0 + POWER_TOLERANCE);
    let mut best: Option<(Trajectory, Particle, f64)> = None;
    let mut seeds: Vec<Particle> = warm.to_vec();
    let mut best_power = f64::INFINITY;
    for k in 0..ctx.swarm.max_outer {
        let r = lcso_optimize(edge, state.lambda, ctx, rng::derive(seed, &[k as u64]), &seeds)?;
        let power = r.trajectory.average_power();
        best_power = best_power.min(power);
        let feasible = power <= limit;
        if feasible && best.as_ref().is_none_or(|(t, _, _)| better(&r.trajectory, t, ctx.cost)) {
            best = Some((r.trajectory.clone(), r.particle.clone(), state.lambda));
        }
        let converged = feasible && (state.lambda == 0.0 || (power - p_avg).abs() <= POWER_TOLERANCE * p_avg);
        seeds = std::iter::once(r.particle).chain(best.as_ref().map(|b| b.1.clone())).collect();
        if converged {
            break;
        }
        state.update(power - p_avg);
    }
    match best {
        Some((trajectory, particle, lambda)) => Ok(DualResult { trajectory, particle, lambda, state }),
        None => Err(Error::NoFeasibleTrajectory { outer: ctx.swarm.max_outer, best_power, p_avg }),
    }
}

type CacheKey = ([u64; 6], u64, u64, CostMode);

/// Memoized dual-ascent results keyed by edge, power budget and seed.
#[derive(Debug, Default)]
pub struct EdgeCache {
    entries: HashMap<CacheKey, DualResult>,
}

impl EdgeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn solve(&mut self, edge: &Edge, ctx: &TrajectoryContext, seed: u64, warm: &[Particle]) -> Result<DualResult> {
        let f = |p: &crate::Point3| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        let (a, b) = (f(&edge.from), f(&edge.to));
        let key = ([a[0], a[1], a[2], b[0], b[1], b[2]], ctx.uav.p_avg.to_bits(), seed, ctx.cost);
        if let Some(hit) = self.entries.get(&key) {
            return Ok(hit.clone());
        }
        let r = dual_ascent(edge, ctx, seed, warm)?;
        self.entries.insert(key, r.clone());
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{load_scenario, HoverAccounting, ScenarioSpec, SwarmConfig, UavSpec};
    use crate::Point3;

    fn ctx<'a>(s: &'a ScenarioSpec, uav: &'a UavSpec, swarm: &'a SwarmConfig) -> TrajectoryContext<'a> {
        TrajectoryContext {
            site: &s.site,
            uav,
            env: &s.env,
            swarm,
            cost: CostMode::Time,
            accounting: HoverAccounting::Literal,
        }
    }

    fn swarm() -> SwarmConfig {
        SwarmConfig { swarm_size: 36, subswarm_size: 12, segments: 32, max_evaluations: 600, ..SwarmConfig::default() }
    }

    #[test]
    fn projection_clamps_at_zero() {
        let mut d = DualState::new(1e-3);
        d.update(-500.0);
        assert_eq!(d.lambda, 0.0);
        d.update(1000.0);
        assert!((d.lambda - 1e-3 / 2f64.sqrt() * 1000.0).abs() < 1e-15);
    }

    #[test]
    fn slack_budget_keeps_lambda_zero() {
        let s = load_scenario("").unwrap();
        let uav = UavSpec { p_avg: 1e6, ..s.uav().clone() };
        let sw = swarm();
        let c = ctx(&s, &uav, &sw);
        let e = Edge::new(Point3::zeros(), Point3::new(1000.0, 0.0, 0.0));
        let r = dual_ascent(&e, &c, 3, &[]).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert!(r.state.residuals.is_empty());
        let free = lcso_optimize(&e, 0.0, &c, rng::derive(3, &[0]), &[]).unwrap();
        assert_eq!(r.trajectory, free.trajectory);
    }

    #[test]
    fn moderate_budget_is_met_and_slower() {
        let s = load_scenario("").unwrap();
        let uav = s.uav().clone();
        let sw = swarm();
        let c = ctx(&s, &uav, &sw);
        let e = Edge::new(Point3::new(0.0, 0.0, 50.0), Point3::new(1000.0, 0.0, 50.0));
        let r = dual_ascent(&e, &c, 3, &[]).unwrap();
        assert!(r.trajectory.average_power() <= 1.01 * uav.p_avg);
        assert!(r.state.residuals.iter().any(|&x| x > 0.0));
        let free = lcso_optimize(&e, 0.0, &c, rng::derive(3, &[0]), &[]).unwrap();
        assert!(free.trajectory.average_power() > uav.p_avg);
        assert!(r.trajectory.duration > free.trajectory.duration);
    }

    #[test]
    fn below_hover_floor() {
        let s = load_scenario("").unwrap();
        let uav = UavSpec { p_avg: 3000.0, ..s.uav().clone() };
        let sw = swarm();
        let e = Edge::new(Point3::zeros(), Point3::new(100.0, 0.0, 0.0));
        assert!(matches!(dual_ascent(&e, &ctx(&s, &uav, &sw), 1, &[]), Err(Error::BelowHoverFloor { .. })));
    }

    #[test]
    fn cache_returns_identical_results() {
        let s = load_scenario("").unwrap();
        let uav = s.uav().clone();
        let sw = swarm();
        let c = ctx(&s, &uav, &sw);
        let e = Edge::new(Point3::zeros(), Point3::new(300.0, 200.0, 60.0));
        let mut cache = EdgeCache::new();
        let a = cache.solve(&e, &c, 9, &[]).unwrap();
        let b = cache.solve(&e, &c, 9, &[]).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(a, b);
        assert_eq!(a, dual_ascent(&e, &c, 9, &[]).unwrap());
    }
}
