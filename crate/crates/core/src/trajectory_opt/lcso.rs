use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::{particle_cost, Edge, Particle, ParticleVelocity, Trajectory, TrajectoryContext};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunnerCoefficients {
    pub n1: f64,
    pub n2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoserCoefficients {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

/// Runner-up and loser learn from the winner (and the loser also from the
/// runner-up); the winner is untouched. Both rules read the pre-update
/// runner-up. No repair is applied here.
pub fn apply_update(
    winner: &Particle,
    runner: &mut Particle,
    loser: &mut Particle,
    xi_r: &mut ParticleVelocity,
    xi_l: &mut ParticleVelocity,
    cr: RunnerCoefficients,
    cl: LoserCoefficients,
) {
    let old_runner = runner.clone();
    for j in 0..winner.waypoints.len() {
        xi_r.waypoints[j] = xi_r.waypoints[j] * cr.n1 + (winner.waypoints[j] - runner.waypoints[j]) * cr.n2;
        runner.waypoints[j] += xi_r.waypoints[j];
        xi_l.waypoints[j] = xi_l.waypoints[j] * cl.n1
            + (winner.waypoints[j] - loser.waypoints[j]) * cl.n2
            + (old_runner.waypoints[j] - loser.waypoints[j]) * cl.n3;
        loser.waypoints[j] += xi_l.waypoints[j];
    }
    for k in 0..winner.speeds.len() {
        xi_r.speeds[k] = cr.n1 * xi_r.speeds[k] + cr.n2 * (winner.speeds[k] - runner.speeds[k]);
        runner.speeds[k] += xi_r.speeds[k];
        xi_l.speeds[k] = cl.n1 * xi_l.speeds[k]
            + cl.n2 * (winner.speeds[k] - loser.speeds[k])
            + cl.n3 * (old_runner.speeds[k] - loser.speeds[k]);
        loser.speeds[k] += xi_l.speeds[k];
    }
}

/// Draws `n1, n2` for the runner-up rule, then fresh `n1, n2, n3` for the
/// loser rule, applies the update and repairs both particles.
#[allow(clippy::too_many_arguments)]
pub fn tournament_update<R: Rng + ?Sized>(
    winner: &Particle,
    runner: &mut Particle,
    loser: &mut Particle,
    xi_r: &mut ParticleVelocity,
    xi_l: &mut ParticleVelocity,
    edge: &Edge,
    ctx: &TrajectoryContext,
    rng: &mut R,
) {
    let cr = RunnerCoefficients { n1: rng.random(), n2: rng.random() };
    let cl = LoserCoefficients { n1: rng.random(), n2: rng.random(), n3: rng.random() };
    apply_update(winner, runner, loser, xi_r, xi_l, cr, cl);
    runner.repair(edge, ctx.site, ctx.uav);
    loser.repair(edge, ctx.site, ctx.uav);
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcsoResult {
    pub trajectory: Trajectory,
    pub particle: Particle,
    pub cost: f64,
    pub evaluations: usize,
    /// Best-ever cost after initialization and after each iteration.
    pub best_history: Vec<f64>,
}

const INIT_STREAM: u64 = 0x494E;
const STAGE2_STREAM: u64 = u64::MAX;

struct Swarm<'a> {
    particles: Vec<Particle>,
    velocities: Vec<ParticleVelocity>,
    costs: Vec<f64>,
    evaluations: usize,
    best_particle: Particle,
    best_cost: f64,
    lambda: f64,
    ctx: &'a TrajectoryContext<'a>,
}

impl Swarm<'_> {
    fn evaluate(&mut self, i: usize) {
        let c = particle_cost(&self.particles[i], self.lambda, self.ctx);
        self.costs[i] = c;
        self.evaluations += 1;
        if c < self.best_cost {
            self.best_cost = c;
            self.best_particle = self.particles[i].clone();
        }
    }

    /// Orders three indices by cost (ties by index) and updates runner-up and loser.
    fn tournament<R: Rng + ?Sized>(&mut self, mut triple: [usize; 3], edge: &Edge, rng: &mut R) -> usize {
        triple.sort_by(|&a, &b| self.costs[a].total_cmp(&self.costs[b]).then(a.cmp(&b)));
        let [w, r, l] = triple;
        let winner = self.particles[w].clone();
        let (mut pr, mut pl) = (self.particles[r].clone(), self.particles[l].clone());
        let (mut vr, mut vl) = (self.velocities[r].clone(), self.velocities[l].clone());
        tournament_update(&winner, &mut pr, &mut pl, &mut vr, &mut vl, edge, self.ctx, rng);
        self.particles[r] = pr;
        self.particles[l] = pl;
        self.velocities[r] = vr;
        self.velocities[l] = vl;
        self.evaluate(r);
        self.evaluate(l);
        w
    }
}

/// Two-stage competitive swarm on one edge under multiplier `lambda`.
///
/// `warm` particles (repaired first) replace the leading swarm members.
/// Iterations start while fewer than `F_max` evaluations have been spent.
pub fn lcso_optimize(edge: &Edge, lambda: f64, ctx: &TrajectoryContext, seed: u64, warm: &[Particle]) -> Result<LcsoResult> {
    for p in [edge.from, edge.to] {
        if !ctx.site.contains(&p) {
            return Err(Error::InfeasibleEdge(format!("vertex ({}, {}, {}) outside the site", p.x, p.y, p.z)));
        }
    }
    let sw = ctx.swarm;
    let m = sw.segments;
    let n = sw.swarm_size;
    if n < 3 || sw.subswarm_size < 3 || !n.is_multiple_of(sw.subswarm_size) {
        return Err(Error::InfeasibleEdge(format!("swarm of {n} in sub-swarms of {}", sw.subswarm_size)));
    }
    if edge.length() == 0.0 {
        let particle = Particle::straight(edge, m, ctx.uav.v_max);
        return Ok(LcsoResult {
            trajectory: Trajectory::stationary(edge.from),
            particle,
            cost: 0.0,
            evaluations: 0,
            best_history: vec![0.0],
        });
    }

    let mut init = rng::stream(seed, &[INIT_STREAM]);
    let particles: Vec<Particle> = (0..n)
        .map(|i| match warm.get(i) {
            Some(w) if w.speeds.len() == m => {
                let mut p = w.clone();
                p.repair(edge, ctx.site, ctx.uav);
                p
            }
            _ => Particle::random(edge, m, ctx.uav, ctx.site, &mut init),
        })
        .collect();
    let mut swarm = Swarm {
        best_particle: particles[0].clone(),
        particles,
        velocities: vec![ParticleVelocity::zeros(m); n],
        costs: vec![f64::INFINITY; n],
        evaluations: 0,
        best_cost: f64::INFINITY,
        lambda,
        ctx,
    };
    for i in 0..n {
        swarm.evaluate(i);
    }
    let mut history = vec![swarm.best_cost];

    let groups = n / sw.subswarm_size;
    let mut iteration: u64 = 0;
    while swarm.evaluations < sw.max_evaluations {
        let mut group_winners = Vec::with_capacity(groups);
        for g in 0..groups {
            let mut r = rng::stream(seed, &[iteration, g as u64]);
            let mut members: Vec<usize> = (g * sw.subswarm_size..(g + 1) * sw.subswarm_size).collect();
            members.shuffle(&mut r);
            let winners: Vec<usize> = members
                .chunks_exact(3)
                .map(|t| swarm.tournament([t[0], t[1], t[2]], edge, &mut r))
                .collect();
            group_winners.push(winners[r.random_range(0..winners.len())]);
        }
        if group_winners.len() >= 3 {
            let mut r = rng::stream(seed, &[iteration, STAGE2_STREAM]);
            let picked: Vec<usize> = group_winners.choose_multiple(&mut r, 3).copied().collect();
            swarm.tournament([picked[0], picked[1], picked[2]], edge, &mut r);
        }
        history.push(swarm.best_cost);
        iteration += 1;
    }

    let particle = swarm.best_particle.clone();
    let trajectory = particle.to_trajectory(ctx.uav, ctx.env, ctx.accounting)?;
    Ok(LcsoResult { trajectory, particle, cost: swarm.best_cost, evaluations: swarm.evaluations, best_history: history })
}
