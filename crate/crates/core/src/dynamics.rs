//! Event-driven trajectory propagation, Benettin Lyapunov estimation, and
//! mean free-flight time.

use crate::error::{Error, Result};
use crate::geometry::{next_collision, reflect, BilliardDomain, Ray};
use crate::vec2::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hard cap on collision events per propagation call.
const MAX_EVENTS: usize = 100_000_000;
/// Attempts to re-draw an initial condition after a tangency.
const MAX_RESAMPLES: usize = 1000;

/// State of a trajectory at one breakpoint. Breakpoints sit at t = 0, at every
/// wall collision, and at the truncation time; `v` is the velocity on the
/// segment *after* the breakpoint.
#[derive(Clone, Copy, Debug)]
pub struct Breakpoint {
    pub t: f64,
    pub q: Vec2,
    pub v: Vec2,
}

/// Piecewise-linear billiard path.
#[derive(Clone, Debug)]
pub struct Trajectory {
    breakpoints: Vec<Breakpoint>,
    horizon: f64,
}

impl Trajectory {
    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of wall collisions (interior breakpoints).
    pub fn collisions(&self) -> usize {
        self.breakpoints.len().saturating_sub(2)
    }

    /// Index of the segment containing `t`: largest k with t_k <= t.
    fn segment_index(&self, t: f64) -> usize {
        let idx = self.breakpoints.partition_point(|b| b.t <= t);
        idx.saturating_sub(1).min(self.breakpoints.len() - 2)
    }

    pub fn position_at(&self, t: f64) -> Result<Vec2> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfRange { t, horizon: self.horizon });
        }
        let b = &self.breakpoints[self.segment_index(t)];
        Ok(b.q + b.v * (t - b.t))
    }

    pub fn velocity_at(&self, t: f64) -> Result<Vec2> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfRange { t, horizon: self.horizon });
        }
        Ok(self.breakpoints[self.segment_index(t)].v)
    }
}

/// Propagate a point particle from `(q0, p0)` through `domain` until `t_max`.
/// The path is exact between collisions; the final breakpoint is truncated at
/// `t_max`. Tangency errors from the geometry layer propagate to the caller.
pub fn propagate(
    domain: &BilliardDomain,
    q0: Vec2,
    p0: Vec2,
    mass: f64,
    t_max: f64,
) -> Result<Trajectory> {
    if !(mass > 0.0) {
        return Err(Error::InvalidInput(format!("mass must be positive, got {mass}")));
    }
    if !(t_max > 0.0) {
        return Err(Error::InvalidInput(format!("t_max must be positive, got {t_max}")));
    }
    let mut v = p0 / mass;
    if v.norm() == 0.0 {
        return Err(Error::InvalidInput("initial momentum must be nonzero".into()));
    }
    let mut t = 0.0;
    let mut q = q0;
    let mut breakpoints = vec![Breakpoint { t, q, v }];

    loop {
        if breakpoints.len() > MAX_EVENTS {
            return Err(Error::InvalidInput("propagation exceeded event budget".into()));
        }
        let ray = Ray::from_velocity(q, v)?;
        let ev = next_collision(domain, &ray)?;
        if t + ev.time >= t_max {
            breakpoints.push(Breakpoint { t: t_max, q: q + v * (t_max - t), v });
            break;
        }
        t += ev.time;
        q = ev.point;
        v = reflect(v, ev.normal)?;
        breakpoints.push(Breakpoint { t, q, v });
    }

    Ok(Trajectory { breakpoints, horizon: t_max })
}

/// Result of the Benettin two-trajectory estimator.
#[derive(Clone, Copy, Debug)]
pub struct LyapunovEstimate {
    /// Maximal Lyapunov exponent, units 1/time.
    pub lambda: f64,
    pub std_error: f64,
    pub ensemble_size: usize,
    pub horizon: f64,
    /// Set when the estimate moved by more than 5% between the half-horizon
    /// and full-horizon windows (and the value is resolved away from zero).
    pub convergence_warning: bool,
    /// Relative change between the two windows.
    pub drift: f64,
    /// Smallest exponent resolvable at this horizon, ln(t_max / renorm) /
    /// t_max: near-integrable dynamics stretches separations algebraically,
    /// which the finite-horizon log-averaging reads as a residual exponent of
    /// this size. Combine with `std_error` when testing against zero.
    pub resolution_floor: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct LyapunovSettings {
    pub speed: f64,
    pub mass: f64,
    pub t_max: f64,
    /// Renormalization interval; a sensible default is one mean free time.
    pub renorm_interval: f64,
    /// Initial phase-space separation, in length units (position part);
    /// a sensible default is 1e-8 * diameter.
    pub d0: f64,
    pub ensemble: usize,
    pub seed: u64,
}

impl LyapunovSettings {
    pub fn defaults(domain: &BilliardDomain, speed: f64, mass: f64, t_max: f64) -> Self {
        LyapunovSettings {
            speed,
            mass,
            t_max,
            renorm_interval: domain.area() / domain.perimeter() * std::f64::consts::PI / speed,
            d0: 1e-8 * domain.diameter(),
            ensemble: 100,
            seed: 0,
        }
    }
}

///// Dimensionless phase-space distance between two states: positions are scaled
/// by the domain diameter and velocities by the reference speed.
fn phase_distance(diam: f64, speed: f64, qa: Vec2, va: Vec2, qb: Vec2, vb: Vec2) -> f64 {
    let dq = (qb - qa) / diam;
    let dv = (vb - va) / speed;
    (dq.norm_sq() + dv.norm_sq()).sqrt()
}

/// One window of paired propagation. Returns end states of both trajectories.
fn evolve_pair(
    domain: &BilliardDomain,
    mass: f64,
    dt: f64,
    a: (Vec2, Vec2),
    b: (Vec2, Vec2),
) -> Result<((Vec2, Vec2), (Vec2, Vec2))> {
    let ta = propagate(domain, a.0, a.1 * mass, mass, dt)?;
    let tb = propagate(domain, b.0, b.1 * mass, mass, dt)?;
    Ok((
        (ta.position_at(dt)?, ta.velocity_at(dt)?),
        (tb.position_at(dt)?, tb.velocity_at(dt)?),
    ))
}

/// Standard two-trajectory Benettin estimator of the maximal Lyapunov
/// exponent, averaged over an ensemble of random initial conditions at the
/// given speed. Tangencies restart the affected ensemble member with fresh
/// draws from its own stream.
pub fn lyapunov_benettin(
    domain: &BilliardDomain,
    settings: &LyapunovSettings,
) -> Result<LyapunovEstimate> {
    domain.validate()?;
    let s = settings;
    if !(s.speed > 0.0 && s.mass > 0.0 && s.t_max > 0.0 && s.renorm_interval > 0.0 && s.d0 > 0.0) {
        return Err(Error::InvalidInput("lyapunov settings must be positive".into()));
    }
    if s.ensemble == 0 {
        return Err(Error::InvalidInput("ensemble must be nonempty".into()));
    }
    let diam = domain.diameter();
    let d0 = s.d0 / diam; // dimensionless target separation
    let half_t = s.t_max / 2.0;

    let mut lambdas = Vec::with_capacity(s.ensemble);
    let mut halves = Vec::with_capacity(s.ensemble);

    for member in 0..s.ensemble {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(member as u64);

        'attempt: for attempt in 0..MAX_RESAMPLES {
            if attempt == MAX_RESAMPLES - 1 {
                return Err(Error::InvalidInput(
                    "benettin: too many tangency restarts".into(),
                ));
            }
            let q = domain.sample_uniform_point(&mut rng);
            let v = Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU)) * s.speed;
            let mut fid = (q, v);

            // Random unit displacement in the dimensionless phase metric.
            let mut dis = match displace(domain, &mut rng, diam, s.speed, fid, d0) {
                Some(st) => st,
                None => continue 'attempt,
            };
            let mut d_start = phase_distance(diam, s.speed, fid.0, fid.1, dis.0, dis.1);

            let mut sum_log = 0.0;
            let mut sum_log_half = 0.0;
            let mut t_acc = 0.0;
            while t_acc < s.t_max - 1e-12 * s.t_max {
                let dt = s.renorm_interval.min(s.t_max - t_acc);
                let (fa, fb) = match evolve_pair(domain, s.mass, dt, fid, dis) {
                    Ok(states) => states,
                    Err(Error::Tangency { .. }) => continue 'attempt,
                    Err(e) => return Err(e),
                };
                fid = fa;
                let d_end = phase_distance(diam, s.speed, fa.0, fa.1, fb.0, fb.1);
                if !(d_end > 0.0) {
                    continue 'attempt;
                }
                let crossed_half = t_acc < half_t && t_acc + dt >= half_t;
                sum_log += (d_end / d_start).ln();
                t_acc += dt;
                if crossed_half {
                    sum_log_half = sum_log;
                }

                // Renormalize the displaced state back to separation d0 along
                // the current difference direction.
                let scale = d0 / d_end;
                let cand = (
                    fid.0 + (fb.0 - fa.0) * scale,
                    fid.1 + (fb.1 - fa.1) * scale,
                );
                dis = match shrink_into_domain(domain, fid, cand) {
                    Some(st) => st,
                    None => continue 'attempt,
                };
                d_start = phase_distance(diam, s.speed, fid.0, fid.1, dis.0, dis.1);
                if !(d_start > 0.0) {
                    continue 'attempt;
                }
            }
            lambdas.push(sum_log / s.t_max);
            halves.push(sum_log_half / half_t);
            break 'attempt;
        }
    }

    let n = lambdas.len() as f64;
    let mean = lambdas.iter().sum::<f64>() / n;
    let var = lambdas.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let std_error = (var / n).sqrt();
    let mean_half = halves.iter().sum::<f64>() / n;
    let drift = if mean.abs() > 0.0 {
        (mean - mean_half).abs() / mean.abs()
    } else {
        0.0
    };
    let resolution_floor = (s.t_max / s.renorm_interval).ln().max(0.0) / s.t_max;
    // A zero-consistent exponent drifts wildly in relative terms; only warn
    // when the estimate is resolved away from zero.
    let convergence_warning =
        mean.abs() > 3.0 * std_error.hypot(resolution_floor) && drift > 0.05;

    Ok(LyapunovEstimate {
        lambda: mean,
        std_error,
        ensemble_size: lambdas.len(),
        horizon: s.t_max,
        convergence_warning,
        drift,
        resolution_floor,
    })
}

/// Initial displaced state: fiducial plus a random phase-space offset of
/// dimensionless size `d0`, with the position projection shrunk until it lands
/// inside the domain.
fn displace<R: Rng + ?Sized>(
    domain: &BilliardDomain,
    rng: &mut R,
    diam: f64,
    speed: f64,
    fid: (Vec2, Vec2),
    d0: f64,
) -> Option<(Vec2, Vec2)> {
    let mut u = [0.0f64; 4];
    for x in &mut u {
        // Box-Muller pairs would be fine too; a uniform direction on S^3 via
        // normalized Gaussians keeps the metric isotropic.
        *x = gaussian(rng);
    }
    let norm = (u.iter().map(|x| x * x).sum::<f64>()).sqrt();
    if norm == 0.0 {
        return None;
    }
    let dq = Vec2::new(u[0], u[1]) * (d0 / norm) * diam;
    let dv = Vec2::new(u[2], u[3]) * (d0 / norm) * speed;
    shrink_into_domain(domain, fid, (fid.0 + dq, fid.1 + dv))
}

/// Halve the offset from `fid` until the displaced position is interior.
fn shrink_into_domain(
    domain: &BilliardDomain,
    fid: (Vec2, Vec2),
    cand: (Vec2, Vec2),
) -> Option<(Vec2, Vec2)> {
    let mut dq = cand.0 - fid.0;
    let mut dv = cand.1 - fid.1;
    for _ in 0..80 {
        let q = fid.0 + dq;
        if domain.contains(q) {
            return Some((q, fid.1 + dv));
        }
        dq = dq * 0.5;
        dv = dv * 0.5;
    }
    None
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

/// Mean flight time between successive wall collisions.
#[derive(Clone, Copy, Debug)]
pub struct MeanFreeTime {
    pub mean: f64,
    pub std_error: f64,
    pub n_flights: usize,
}

/// Ensemble estimate of the average free-flight time at the given speed.
/// Edge flights (before the first and after the last collision) are dropped.
pub fn mean_free_time(
    domain: &BilliardDomain,
    speed: f64,
    ensemble: usize,
    t_max: f64,
    seed: u64,
) -> Result<MeanFreeTime> {
    domain.validate()?;
    if !(speed > 0.0 && t_max > 0.0) || ensemble == 0 {
        return Err(Error::InvalidInput("mean_free_time needs positive settings".into()));
    }
    let mut per_member = Vec::with_capacity(ensemble);
    let mut n_flights = 0usize;
    for member in 0..ensemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x4D46_5400 ^ member as u64); // independent of benettin streams

        for attempt in 0..MAX_RESAMPLES {
            if attempt == MAX_RESAMPLES - 1 {
                return Err(Error::InvalidInput(
                    "mean_free_time: too many tangency restarts".into(),
                ));
            }
            let q = domain.sample_uniform_point(&mut rng);
            let v = Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU)) * speed;
            match propagate(domain, q, v, 1.0, t_max) {
                Ok(traj) => {
                    let bps = traj.breakpoints();
                    let n = traj.collisions();
                    if n >= 2 {
                        let first = bps[1].t;
                        let last = bps[n].t;
                        per_member.push((last - first) / (n - 1) as f64);
                        n_flights += n - 1;
                    }
                    break;
                }
                Err(Error::Tangency { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    if per_member.len() < 2 {
        return Err(Error::InvalidInput(
            "mean_free_time: horizon too short to observe flights".into(),
        ));
    }
    let n = per_member.len() as f64;
    let mean = per_member.iter().sum::<f64>() / n;
    let var = per_member.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MeanFreeTime {
        mean,
        std_error: (var / n).sqrt(),
        n_flights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_bouncing_example() {
        let d = BilliardDomain::rectangle(1.0, 1.0).unwrap();
        let traj = propagate(&d, Vec2::new(0.5, 0.5), Vec2::new(1.0, 0.0), 1.0, 2.0).unwrap();
        let times: Vec<f64> = traj.breakpoints().iter().map(|b| b.t).collect();
        assert_eq!(times.len(), 4);
        assert!((times[1] - 0.5).abs() < 1e-12);
        assert!((times[2] - 1.5).abs() < 1e-12);
        assert!(traj.position_at(2.0).unwrap().distance(Vec2::new(0.5, 0.5)) < 1e-12);
        // Spec walk-through of position_at on the same path.
        assert!(traj.position_at(0.5).unwrap().distance(Vec2::new(1.0, 0.5)) < 1e-12);
        assert!(traj.position_at(1.0).unwrap().distance(Vec2::new(0.5, 0.5)) < 1e-12);
        assert!(traj.position_at(0.0).unwrap().distance(Vec2::new(0.5, 0.5)) < 1e-12);
    }

    #[test]
    fn disk_diameter_orbit() {
        let d = BilliardDomain::disk(1.0).unwrap();
        let traj = propagate(&d, Vec2::ZERO, Vec2::new(0.0, 1.0), 1.0, 10.0).unwrap();
        let times: Vec<f64> = traj
            .breakpoints()
            .iter()
            .skip(1)
            .take(traj.collisions())
            .map(|b| b.t)
            .collect();
        assert!((times[0] - 1.0).abs() < 1e-10);
        for w in times.windows(2) {
            assert!((w[1] - w[0] - 2.0).abs() < 1e-9, "collision spacing {w:?}");
        }
    }

    #[test]
    fn position_at_rejects_out_of_range() {
        let d = BilliardDomain::rectangle(1.0, 1.0).unwrap();
        let traj = propagate(&d, Vec2::new(0.5, 0.5), Vec2::new(1.0, 0.0), 1.0, 2.0).unwrap();
        assert!(matches!(traj.position_at(-0.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(traj.position_at(2.1), Err(Error::OutOfRange { .. })));
    }

    /// Fixed-step oracle: re-walk the path with tiny steps, reflecting when a
    /// step would exit, and compare interpolated positions.
    #[test]
    fn position_at_matches_fixed_step_oracle() {
        use rand::SeedableRng;
        let d = BilliardDomain::stadium(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t_max = 7.3;
        let mut checked = 0;
        while checked < 5 {
            let q0 = d.sample_uniform_point(&mut rng);
            let v0 = Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU));
            let traj = match propagate(&d, q0, v0, 1.0, t_max) {
                Ok(t) => t,
                Err(_) => continue,
            };
            // Walk the exact event times, then sample between them.
            let dt = 1e-4;
            let mut q = q0;
            let mut v = v0;
            let mut t = 0.0;
            let mut max_err: f64 = 0.0;
            while t + dt <= t_max {
                // step, reflecting via the exact geometry when leaving
                let ray = Ray::from_velocity(q, v).unwrap();
                let ev = match next_collision(&d, &ray) {
                    Ok(ev) => ev,
                    Err(_) => break,
                };
                if ev.time >= dt {
                    q = q + v * dt;
                    t += dt;
                } else {
                    q = ev.point;
                    v = reflect(v, ev.normal).unwrap();
                    t += ev.time;
                }
                let err = traj.position_at(t).unwrap().distance(q);
                max_err = max_err.max(err);
            }
            assert!(max_err < 1e-6, "max interpolation error {max_err}");
            checked += 1;
        }
    }

    #[test]
    fn stadium_trajectory_invariants() {
        use rand::SeedableRng;
        let d = BilliardDomain::stadium(1.0, 1.0).unwrap();
        let diam = d.diameter();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut done = 0;
        while done < 50 {
            let q0 = d.sample_uniform_point(&mut rng);
            let v0 = Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU)) * 1.0;
            let traj = match propagate(&d, q0, v0, 1.0, 100.0) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let speed0 = traj.breakpoints()[0].v.norm();
            for (k, b) in traj.breakpoints().iter().enumerate() {
                assert!(((b.v.norm() - speed0) / speed0).abs() < 1e-10);
                if k >= 1 && k <= traj.collisions() {
                    assert!(d.contains_tol(b.q, 1e-9 * diam));
                }
            }
            for w in traj.breakpoints().windows(2) {
                let hop = w[0].q + w[0].v * (w[1].t - w[0].t);
                assert!(hop.distance(w[1].q) < 1e-10 * diam);
            }
            // interpolated points stay inside
            for k in 0..200 {
                let t = 100.0 * k as f64 / 200.0;
                assert!(d.contains_tol(traj.position_at(t).unwrap(), 1e-9 * diam));
            }
            done += 1;
        }
    }

    #[test]
    fn lyapunov_integrable_vs_chaotic() {
        let speed = 1.0;
        let stadium = BilliardDomain::stadium(1.0, 1.0).unwrap();
        let disk = BilliardDomain::disk(1.0).unwrap();
        let rect = BilliardDomain::rectangle(1.0, 1.3).unwrap();

        let mut st = LyapunovSettings::defaults(&stadium, speed, 1.0, 300.0);
        st.ensemble = 40;
        st.seed = 21;
        let est_stadium = lyapunov_benettin(&stadium, &st).unwrap();

        let mut sd = LyapunovSettings::defaults(&disk, speed, 1.0, 300.0);
        sd.ensemble = 40;
        sd.seed = 22;
        let est_disk = lyapunov_benettin(&disk, &sd).unwrap();

        let mut sr = LyapunovSettings::defaults(&rect, speed, 1.0, 300.0);
        sr.ensemble = 40;
        sr.seed = 23;
        let est_rect = lyapunov_benettin(&rect, &sr).unwrap();

        assert!(
            est_disk.lambda.abs() < 3.0 * est_disk.std_error.hypot(est_disk.resolution_floor),
            "disk lambda {} +- {} (floor {})",
            est_disk.lambda,
            est_disk.std_error,
            est_disk.resolution_floor
        );
        assert!(
            est_rect.lambda.abs() < 3.0 * est_rect.std_error.hypot(est_rect.resolution_floor),
            "rect lambda {} +- {} (floor {})",
            est_rect.lambda,
            est_rect.std_error,
            est_rect.resolution_floor
        );
        assert!(est_stadium.lambda > 0.0);
        assert!(
            est_stadium.lambda > 10.0 * est_disk.lambda.abs().max(est_rect.lambda.abs()),
            "stadium {} vs disk {} rect {}",
            est_stadium.lambda,
            est_disk.lambda,
            est_rect.lambda
        );
    }

    #[test]
    fn lyapunov_scales_with_speed() {
        let stadium = BilliardDomain::stadium(1.0, 1.0).unwrap();
        let mut s1 = LyapunovSettings::defaults(&stadium, 1.0, 1.0, 400.0);
        s1.ensemble = 48;
        s1.seed = 31;
        let e1 = lyapunov_benettin(&stadium, &s1).unwrap();
        let mut s2 = LyapunovSettings::defaults(&stadium, 2.0, 1.0, 200.0);
        s2.ensemble = 48;
        s2.seed = 32;
        let e2 = lyapunov_benettin(&stadium, &s2).unwrap();
        let ratio = e2.lambda / e1.lambda;
        let sigma = ratio * ((e1.std_error / e1.lambda).powi(2) + (e2.std_error / e2.lambda).powi(2)).sqrt();
        assert!(
            (ratio - 2.0).abs() < 3.0 * sigma.max(0.05),
            "ratio {ratio} +- {sigma}"
        );
    }

    #[test]
    fn mean_free_time_matches_chord_identity() {
        // pi * area / perimeter for an ergodic billiard at unit speed.
        let d = BilliardDomain::stadium(1.0, 1.0).unwrap();
        let est = mean_free_time(&d, 1.0, 200, 400.0, 41).unwrap();
        let expected = std::f64::consts::PI * d.area() / d.perimeter();
        assert!(
            (est.mean - expected).abs() < 3.0 * est.std_error,
            "mean {} +- {} vs {}",
            est.mean,
            est.std_error,
            expected
        );
    }

    #[test]
    fn mean_free_time_scaling() {
        let d1 = BilliardDomain::stadium(1.0, 1.0).unwrap();
        let d2 = BilliardDomain::stadium(2.0, 2.0).unwrap();
        let e1 = mean_free_time(&d1, 1.0, 120, 300.0, 42).unwrap();
        let e2 = mean_free_time(&d2, 1.0, 120, 600.0, 43).unwrap();
        let se = (4.0 * e1.std_error.powi(2) + e2.std_error.powi(2)).sqrt();
        assert!((e2.mean - 2.0 * e1.mean).abs() < 3.0 * se);
        let e3 = mean_free_time(&d1, 2.0, 120, 300.0, 44).unwrap();
        let se = (e1.std_error.powi(2) / 4.0 + e3.std_error.powi(2)).sqrt();
        assert!((e3.mean - e1.mean / 2.0).abs() < 3.0 * se);
    }
}
