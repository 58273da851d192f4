//! Rotary-wing mobility power: the 3D velocity is split into horizontal and
//! vertical components, each integrated through its own energy model, and the
//! trajectory-average power is their summed energy over the duration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Environment, HoverAccounting, UavSpec};
use crate::Point3;

/// Sampled speed profile. Accelerations are central finite differences of
/// the sampled speeds, one-sided at the endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile {
    pub times: Vec<f64>,
    pub v_h: Vec<f64>,
    pub v_v: Vec<f64>,
    pub a_h: Vec<f64>,
    pub a_v: Vec<f64>,
}

fn finite_difference(times: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|k| {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
            (v[hi] - v[lo]) / (times[hi] - times[lo])
        })
        .collect()
}

impl VelocityProfile {
    pub fn new(times: Vec<f64>, v_h: Vec<f64>, v_v: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || v_h.len() != times.len() || v_v.len() != times.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} times, {} horizontal, {} vertical samples",
                times.len(),
                v_h.len(),
                v_v.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DimensionMismatch("sample times must be strictly increasing".into()));
        }
        let a_h = finite_difference(&times, &v_h);
        let a_v = finite_difference(&times, &v_v);
        Ok(VelocityProfile { times, v_h, v_v, a_h, a_v })
    }

    pub fn from_velocities(times: Vec<f64>, velocities: &[Point3]) -> Result<Self> {
        let (v_h, v_v) = velocities.iter().map(decompose_velocity).unzip();
        VelocityProfile::new(times, v_h, v_v)
    }

    /// Constant horizontal and vertical speeds over `duration`, on `samples` points.
    pub fn constant(duration: f64, v_h: f64, v_v: f64, samples: usize) -> Result<Self> {
        Self::from_fn(duration, samples, |_| (v_h, v_v))
    }

    pub fn from_fn(duration: f64, samples: usize, f: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::ZeroDuration);
        }
        let n = samples.max(2);
        let times: Vec<f64> = (0..n).map(|k| duration * k as f64 / (n - 1) as f64).collect();
        let (v_h, v_v) = times.iter().map(|&t| f(t)).unzip();
        VelocityProfile::new(times, v_h, v_v)
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn max_speed(&self) -> f64 {
        self.v_h.iter().zip(&self.v_v).map(|(h, v)| h.hypot(*v)).fold(0.0, f64::max)
    }
}

/// Horizontal speed (magnitude of the x-y part) and signed vertical speed.
pub fn decompose_velocity(v: &Point3) -> (f64, f64) {
    (v.x.hypot(v.y), v.z)
}

/// Thrust-to-weight ratio for speed `v` and acceleration `a`.
pub fn kappa(v: f64, a: f64, uav: &UavSpec, env: &Environment) -> f64 {
    let af = &uav.airframe;
    let drag = env.air_density * af.fuselage_drag_ratio * af.rotor_solidity * af.rotor_disc_area * v * v;
    let inertial = 2.0 * af.weight * a / env.gravity;
    let num = drag + inertial;
    (1.0 + num * num / (4.0 * af.weight * af.weight)).sqrt()
}

/// Blade-profile plus induced power at speed `v` and ratio `k`.
fn rotor_power(v: f64, k: f64, uav: &UavSpec) -> f64 {
    let c = &uav.power;
    let blade = c.c0 * (1.0 + c.c1 * v * v);
    let x = v * v / c.c3;
    // sqrt(k^2 + x^2) - x, written without cancellation
    let gap = k * k / ((k * k + x * x).sqrt() + x);
    blade + k * c.c2 * gap.sqrt()
}

/// Instantaneous horizontal power integrand.
pub fn horizontal_power(v: f64, a: f64, uav: &UavSpec, env: &Environment) -> f64 {
    let v = v.abs();
    rotor_power(v, kappa(v, a, uav, env), uav) + uav.power.c4 * v * v * v
}

/// Instantaneous vertical power integrand; descent is charged like climb.
pub fn vertical_power(v: f64, a: f64, uav: &UavSpec, env: &Environment) -> f64 {
    let v = v.abs();
    rotor_power(v, kappa(v, a, uav, env), uav)
}

/// Blade plus induced power at rest, `C0 + C2`.
pub fn hover_baseline(uav: &UavSpec) -> f64 {
    uav.power.c0 + uav.power.c2
}

fn trapezoid(times: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    times.windows(2).enumerate().map(|(k, w)| 0.5 * (w[1] - w[0]) * (f(k) + f(k + 1))).sum()
}

pub fn horizontal_energy(profile: &VelocityProfile, uav: &UavSpec, env: &Environment) -> f64 {
    let p = profile;
    let integral = trapezoid(&p.times, |k| horizontal_power(p.v_h[k], p.a_h[k], uav, env));
    let (vi, vf) = (p.v_h[0], p.v_h[p.v_h.len() - 1]);
    integral + uav.airframe.weight / (2.0 * env.gravity) * (vf * vf - vi * vi)
}

pub fn vertical_energy(
    profile: &VelocityProfile,
    uav: &UavSpec,
    env: &Environment,
    accounting: HoverAccounting,
) -> f64 {
    let p = profile;
    let base = hover_baseline(uav);
    trapezoid(&p.times, |k| {
        let pw = vertical_power(p.v_v[k], p.a_v[k], uav, env);
        match accounting {
            HoverAccounting::Literal => pw,
            HoverAccounting::SingleBaseline => (pw - base).max(0.0),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub horizontal_energy: f64,
    pub vertical_energy: f64,
    pub duration: f64,
    pub average_power: f64,
}

impl PowerReport {
    pub fn energy(&self) -> f64 {
        self.horizontal_energy + self.vertical_energy
    }
}

/// Average mobility power `(E_h + E_v) / t_delta` of a sampled trajectory.
pub fn trajectory_power(
    profile: &VelocityProfile,
    uav: &UavSpec,
    env: &Environment,
    accounting: HoverAccounting,
) -> Result<PowerReport> {
    let duration = profile.duration();
    if !(duration > 0.0) {
        return Err(Error::ZeroDuration);
    }
    let e_h = horizontal_energy(profile, uav, env);
    let e_v = vertical_energy(profile, uav, env, accounting);
    Ok(PowerReport { horizontal_energy: e_h, vertical_energy: e_v, duration, average_power: (e_h + e_v) / duration })
}

/// Power while hovering in place.
pub fn hover_power(uav: &UavSpec, env: &Environment, accounting: HoverAccounting) -> f64 {
    let h = horizontal_power(0.0, 0.0, uav, env);
    let v = vertical_power(0.0, 0.0, uav, env);
    match accounting {
        HoverAccounting::Literal => h + v,
        HoverAccounting::SingleBaseline => h + (v - hover_baseline(uav)).max(0.0),
    }
}

/// The three reference flight profiles at a given mean horizontal speed:
/// constant-velocity level flight, level flight with a sinusoidal speed
/// oscillation of equal mean, and the latter plus a vertical oscillation.
pub mod reference_profiles {
    use super::*;

    /// Peak acceleration of the oscillations, m/s^2.
    pub const PEAK_ACCEL: f64 = 4.0;
    /// Speed amplitude of the oscillations, m/s.
    pub const AMPLITUDE: f64 = 2.0;
    pub const DURATION: f64 = 60.0;
    pub const SAMPLES: usize = 6001;

    fn omega() -> f64 {
        PEAK_ACCEL / AMPLITUDE
    }

    pub fn inertial_2d(v: f64) -> VelocityProfile {
        VelocityProfile::constant(DURATION, v, 0.0, SAMPLES).expect("valid profile")
    }

    pub fn non_inertial_2d(v: f64) -> VelocityProfile {
        let amp = AMPLITUDE.min(v);
        VelocityProfile::from_fn(DURATION, SAMPLES, |t| (v + amp * (omega() * t).sin(), 0.0)).expect("valid profile")
    }

    pub fn non_inertial_3d(v: f64) -> VelocityProfile {
        let amp = AMPLITUDE.min(v);
        VelocityProfile::from_fn(DURATION, SAMPLES, |t| {
            let s = (omega() * t).sin();
            (v + amp * s, AMPLITUDE * s)
        })
        .expect("valid profile")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::load_scenario;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setup() -> (UavSpec, Environment) {
        let s = load_scenario("").unwrap();
        (s.uav().clone(), s.env.clone())
    }

    #[test]
    fn decomposition() {
        assert_eq!(decompose_velocity(&Point3::new(3.0, 4.0, 0.0)), (5.0, 0.0));
        assert_eq!(decompose_velocity(&Point3::new(0.0, 0.0, 2.0)), (0.0, 2.0));
        let (h, v) = decompose_velocity(&Point3::new(3.0, 4.0, 12.0));
        assert_eq!((h, v), (5.0, 12.0));
        assert_relative_eq!(h.hypot(v), 13.0);
    }

    #[test]
    fn kappa_examples() {
        let (u, e) = setup();
        assert_eq!(kappa(0.0, 0.0, &u, &e), 1.0);
        // sqrt(1 + (2*80*5/9.81)^2 / (4*80^2))
        let expected = (1.0 + (800.0f64 / 9.81).powi(2) / 25_600.0).sqrt();
        assert_relative_eq!(kappa(0.0, 5.0, &u, &e), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 1.122_399, epsilon = 1e-6);
        assert!(kappa(10.0, 1.0, &u, &e) < kappa(10.0, 2.0, &u, &e));
    }

    #[test]
    fn hover_energies() {
        let (u, e) = setup();
        let p = VelocityProfile::constant(10.0, 0.0, 0.0, 11).unwrap();
        assert_relative_eq!(horizontal_energy(&p, &u, &e), 19_857.3, max_relative = 1e-12);
        assert_relative_eq!(vertical_energy(&p, &u, &e, HoverAccounting::Literal), 19_857.3, max_relative = 1e-12);
        let r = trajectory_power(&p, &u, &e, HoverAccounting::Literal).unwrap();
        assert_relative_eq!(r.average_power, 3_971.46, max_relative = 1e-12);
        assert_relative_eq!(hover_power(&u, &e, HoverAccounting::Literal), 3_971.46, max_relative = 1e-12);
        assert_relative_eq!(hover_power(&u, &e, HoverAccounting::SingleBaseline), 1_985.73, max_relative = 1e-12);
    }

    #[test]
    fn kinetic_term() {
        let (u, e) = setup();
        // Same integrand samples, different endpoint speeds: only the kinetic term differs.
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let flat = VelocityProfile { times: times.clone(), v_h: vec![10.0; 101], v_v: vec![0.0; 101], a_h: vec![0.0; 101], a_v: vec![0.0; 101] };
        let mut ramp = flat.clone();
        ramp.v_h[0] = 0.0;
        let diff = horizontal_energy(&ramp, &u, &e) - horizontal_energy(&flat, &u, &e);
        let integrand_change = 0.5 * 0.1 * (horizontal_power(0.0, 0.0, &u, &e) - horizontal_power(10.0, 0.0, &u, &e));
        assert_relative_eq!(diff - integrand_change, 80.0 / (2.0 * 9.81) * 100.0, max_relative = 1e-12);
        assert_relative_eq!(80.0 / (2.0 * 9.81) * 100.0, 407.75, epsilon = 0.01);
    }

    #[test]
    fn constant_speed_energy_is_linear_in_duration() {
        let (u, e) = setup();
        let a = horizontal_energy(&VelocityProfile::constant(10.0, 20.0, 0.0, 50).unwrap(), &u, &e);
        let b = horizontal_energy(&VelocityProfile::constant(20.0, 20.0, 0.0, 50).unwrap(), &u, &e);
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-12);
    }

    #[test]
    fn climb_matches_fine_trapezoid() {
        let (u, e) = setup();
        let coarse = VelocityProfile::constant(10.0, 0.0, 5.0, 11).unwrap();
        let fine = VelocityProfile::constant(10.0, 0.0, 5.0, 101).unwrap();
        let a = vertical_energy(&coarse, &u, &e, HoverAccounting::Literal);
        let b = vertical_energy(&fine, &u, &e, HoverAccounting::Literal);
        assert!((a - b).abs() < 1e-3 * b);
        let descend = VelocityProfile::constant(10.0, 0.0, -5.0, 11).unwrap();
        assert_relative_eq!(vertical_energy(&descend, &u, &e, HoverAccounting::Literal), a, max_relative = 1e-12);
    }

    #[test]
    fn zero_duration_rejected() {
        assert!(matches!(VelocityProfile::constant(0.0, 1.0, 0.0, 3), Err(Error::ZeroDuration)));
        assert!(VelocityProfile::new(vec![0.0, 0.0], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn quadrature_converges_on_smooth_profiles() {
        let (u, e) = setup();
        let f = |t: f64| (20.0 + 3.0 * (0.7 * t).sin(), 2.0 * (0.9 * t).cos());
        let a = VelocityProfile::from_fn(30.0, 3001, f).unwrap();
        let b = VelocityProfile::from_fn(30.0, 6001, f).unwrap();
        let (ha, hb) = (horizontal_energy(&a, &u, &e), horizontal_energy(&b, &u, &e));
        let (va, vb) = (
            vertical_energy(&a, &u, &e, HoverAccounting::Literal),
            vertical_energy(&b, &u, &e, HoverAccounting::Literal),
        );
        assert!((ha - hb).abs() < 1e-3 * hb);
        assert!((va - vb).abs() < 1e-3 * vb);
    }

    #[test]
    fn reference_profile_ordering() {
        let (u, e) = setup();
        use reference_profiles::*;
        for v in (0..=10).map(|k| k as f64 * 5.0) {
            let p = |prof: VelocityProfile| trajectory_power(&prof, &u, &e, HoverAccounting::Literal).unwrap().average_power;
            let (a, b, c) = (p(inertial_2d(v)), p(non_inertial_2d(v)), p(non_inertial_3d(v)));
            assert!(a <= b + 1e-9 && b <= c, "v={v}: {a} {b} {c}");
        }
    }

    proptest! {
        #[test]
        fn kappa_at_least_one(v in 0.0f64..80.0, a in -10.0f64..10.0) {
            let (u, e) = setup();
            prop_assert!(kappa(v, a, &u, &e) >= 1.0);
        }

        #[test]
        fn vertical_energy_nonnegative(speeds in proptest::collection::vec(-30.0f64..30.0, 2..40)) {
            let (u, e) = setup();
            let times: Vec<f64> = (0..speeds.len()).map(|k| k as f64 * 0.5).collect();
            let p = VelocityProfile::new(times, vec![0.0; speeds.len()], speeds).unwrap();
            for acc in [HoverAccounting::Literal, HoverAccounting::SingleBaseline] {
                prop_assert!(vertical_energy(&p, &u, &e, acc) >= 0.0);
            }
        }
    }
}
