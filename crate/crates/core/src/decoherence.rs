//! Decoherence exponent along trajectory pairs, the Monte Carlo purity
//! estimator, and quadrature evaluators for the analytic separation models.
//!
//! The Monte Carlo path uses true billiard separations only; the analytic
//! separation models (Lyapunov spreading, free flight, ergodic average) are
//! reserved for the quadrature evaluators, so the simulation tests the regime
//! analysis rather than assuming it.

use crate::dynamics::{propagate, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::BilliardDomain;
use crate::initial_state::{sample_phase_point, BathParams, GaussianPacket, PhysicalConstants};
use crate::vec2::Vec2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// exp(-x) underflows to subnormal around x = 745; beyond that the factor is
/// clamped to zero and counted.
const EXP_UNDERFLOW: f64 = 745.0;
/// Fixed work-unit size for the parallel pair loop. Chunking (not the worker
/// count) determines the floating-point summation order, so runs with any
/// number of workers produce bit-identical results.
const PAIR_CHUNK: usize = 256;
const MAX_PAIR_RESAMPLES: usize = 1000;

/// Where a purity curve came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    MonteCarlo,
    QuadratureLyapunov,
    QuadratureFreeFlight,
    QuadratureErgodic,
    ClosedForm21,
    ClosedForm22,
    ClosedForm23,
    ClosedForm24,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Provenance::MonteCarlo => "monte-carlo",
            Provenance::QuadratureLyapunov => "quadrature-eq17",
            Provenance::QuadratureFreeFlight => "quadrature-eq18",
            Provenance::QuadratureErgodic => "quadrature-eq19",
            Provenance::ClosedForm21 => "closed-form-21",
            Provenance::ClosedForm22 => "closed-form-22",
            Provenance::ClosedForm23 => "closed-form-23",
            Provenance::ClosedForm24 => "closed-form-24",
        };
        f.write_str(s)
    }
}

/// Purity estimates on a dimensionless time grid tau = gamma t.
#[derive(Clone, Debug)]
pub struct PuritySeries {
    pub tau: Vec<f64>,
    pub purity: Vec<f64>,
    /// Per-point standard error; zero for closed forms and quadratures.
    pub std_error: Vec<f64>,
    pub provenance: Provenance,
    pub n_pairs: usize,
    /// Pairs re-drawn after a tangency during propagation.
    pub resampled_pairs: u64,
    /// Wigner position draws rejected for landing outside the domain.
    pub rejected_draws: u64,
    /// Per-pair factors clamped to zero for exponent overflow.
    pub underflows: u64,
}

impl PuritySeries {
    fn from_values(tau: Vec<f64>, purity: Vec<f64>, provenance: Provenance) -> Self {
        let n = tau.len();
        PuritySeries {
            tau,
            purity,
            std_error: vec![0.0; n],
            provenance,
            n_pairs: 0,
            resampled_pairs: 0,
            rejected_draws: 0,
            underflows: 0,
        }
    }
}

/// Exact cumulative integral of the squared separation between two
/// piecewise-linear trajectories. On every interval of the merged breakpoint
/// set the separation is affine, so |dq|^2 integrates in closed form; prefix
/// sums make evaluation at a whole time grid O(segments + grid).
#[derive(Clone, Debug)]
pub struct SeparationIntegral {
    seg_start: Vec<f64>,
    dq0: Vec<Vec2>,
    dv: Vec<Vec2>,
    prefix: Vec<f64>,
    horizon: f64,
}

impl SeparationIntegral {
    pub fn new(a: &Trajectory, b: &Trajectory) -> Result<Self> {
        let horizon = a.horizon().min(b.horizon());
        let mut times: Vec<f64> = Vec::with_capacity(a.breakpoints().len() + b.breakpoints().len());
        times.push(0.0);
        for bp in a.breakpoints().iter().chain(b.breakpoints().iter()) {
            if bp.t > 0.0 && bp.t < horizon {
                times.push(bp.t);
            }
        }
        times.push(horizon);
        times.sort_by(f64::total_cmp);
        times.dedup();

        let n = times.len() - 1;
        let mut seg_start = Vec::with_capacity(n);
        let mut dq0 = Vec::with_capacity(n);
        let mut dv = Vec::with_capacity(n);
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let t0 = times[i];
            let h = times[i + 1] - t0;
            let q = b.position_at(t0)? - a.position_at(t0)?;
            let v = b.velocity_at(t0)? - a.velocity_at(t0)?;
            seg_start.push(t0);
            dq0.push(q);
            dv.push(v);
            acc += segment_integral(q, v, h);
            prefix.push(acc);
        }
        Ok(SeparationIntegral { seg_start, dq0, dv, prefix, horizon })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Integral of |q_b(s) - q_a(s)|^2 over [0, t].
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfRange { t, horizon: self.horizon });
        }
        let idx = self
            .seg_start
            .partition_point(|s| *s <= t)
            .saturating_sub(1);
        let h = t - self.seg_start[idx];
        Ok(self.prefix[idx] + segment_integral(self.dq0[idx], self.dv[idx], h))
    }
}

/// Integral over [0, h] of |q + s v|^2 ds.
fn segment_integral(q: Vec2, v: Vec2, h: f64) -> f64 {
    q.norm_sq() * h + q.dot(v) * h * h + v.norm_sq() * h * h * h / 3.0
}

/// Exact value of the decoherence exponent integral between two trajectories.
pub fn integrate_sq_separation(a: &Trajectory, b: &Trajectory, t: f64) -> Result<f64> {
    SeparationIntegral::new(a, b)?.eval(t)
}

/// exp(-2 kappa I / hbar^2), clamped to zero below the f64 underflow range.
pub fn decoherence_factor(
    exponent_integral: f64,
    bath: &BathParams,
    c: &PhysicalConstants,
) -> f64 {
    let arg = 2.0 * bath.kappa(c) * exponent_integral / (c.hbar * c.hbar);
    if arg > EXP_UNDERFLOW {
        0.0
    } else {
        (-arg).exp()
    }
}

/// Per-pair random stream: deterministic in (seed, pair index), independent of
/// worker count and scheduling.
pub fn pair_rng(seed: u64, pair: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair.wrapping_add(1));
    rng
}

struct ChunkAccum {
    /// Sums of (factor - 1); centering at one keeps short-time variances
    /// well conditioned and makes tau = 0 exactly zero-error.
    sum_d: Vec<f64>,
    sum_d2: Vec<f64>,
    resampled: u64,
    rejected: u64,
    underflows: u64,
}

fn sample_pair_member(
    domain: &BilliardDomain,
    packet: &GaussianPacket,
    c: &PhysicalConstants,
    rng: &mut ChaCha8Rng,
    rejected: &mut u64,
) -> (Vec2, Vec2) {
    loop {
        let (r, p) = sample_phase_point(packet, c, rng);
        if domain.contains(r) {
            return (r, p);
        }
        *rejected += 1;
    }
}

/// Monte Carlo purity estimator: the mean over independently drawn trajectory
/// pairs of exp(-(2 kappa/hbar^2) * Int |dq|^2 ds), with each trajectory's
/// initial condition drawn from the Wigner density of the packet. One
/// propagation per trajectory is reused across the whole time grid.
///
/// `times` are physical times; the returned grid is tau = gamma t.
pub fn purity_mc(
    domain: &BilliardDomain,
    packet: &GaussianPacket,
    bath: &BathParams,
    c: &PhysicalConstants,
    times: &[f64],
    n_pairs: usize,
    seed: u64,
) -> Result<PuritySeries> {
    domain.validate()?;
    c.validate()?;
    validate_times(times)?;
    if n_pairs < 100 {
        return Err(Error::InvalidInput(format!(
            "purity_mc needs at least 100 pairs, got {n_pairs}"
        )));
    }
    let t_end = *times.last().unwrap();
    let n_times = times.len();

    let n_chunks = n_pairs.div_ceil(PAIR_CHUNK);
    let partials: Vec<Result<ChunkAccum>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * PAIR_CHUNK;
            let hi = ((chunk + 1) * PAIR_CHUNK).min(n_pairs);
            let mut acc = ChunkAccum {
                sum_d: vec![0.0; n_times],
                sum_d2: vec![0.0; n_times],
                resampled: 0,
                rejected: 0,
                underflows: 0,
            };
            for pair in lo..hi {
                let mut rng = pair_rng(seed, pair as u64);
                let mut found = false;
                for attempt in 0..MAX_PAIR_RESAMPLES {
                    let (r1, p1) =
                        sample_pair_member(domain, packet, c, &mut rng, &mut acc.rejected);
                    let (r2, p2) =
                        sample_pair_member(domain, packet, c, &mut rng, &mut acc.rejected);
                    let ta = if t_end > 0.0 {
                        propagate(domain, r1, p1, c.mass, t_end)
                    } else {
                        propagate(domain, r1, p1, c.mass, 1.0)
                    };
                    let tb = if t_end > 0.0 {
                        propagate(domain, r2, p2, c.mass, t_end)
                    } else {
                        propagate(domain, r2, p2, c.mass, 1.0)
                    };
                    let (ta, tb) = match (ta, tb) {
                        (Ok(a), Ok(b)) => (a, b),
                        (Err(Error::Tangency { .. }), _) | (_, Err(Error::Tangency { .. })) => {
                            acc.resampled += 1;
                            continue;
                        }
                        (Err(e), _) | (_, Err(e)) => return Err(e),
                    };
                    let sep = SeparationIntegral::new(&ta, &tb)?;
                    for (j, t) in times.iter().enumerate() {
                        let integral = sep.eval(*t)?;
                        let f = decoherence_factor(integral, bath, c);
                        if f == 0.0 {
                            acc.underflows += 1;
                        }
                        let d = f - 1.0;
                        acc.sum_d[j] += d;
                        acc.sum_d2[j] += d * d;
                    }
                    found = true;
                    let _ = attempt;
                    break;
                }
                if !found {
                    return Err(Error::InvalidInput(
                        "purity_mc: too many tangency resamples for one pair".into(),
                    ));
                }
            }
            Ok(acc)
        })
        .collect();

    // Sequential merge in chunk order keeps the result worker-count invariant.
    let mut sum_d = vec![0.0; n_times];
    let mut sum_d2 = vec![0.0; n_times];
    let mut resampled = 0u64;
    let mut rejected = 0u64;
    let mut underflows = 0u64;
    for partial in partials {
        let p = partial?;
        for j in 0..n_times {
            sum_d[j] += p.sum_d[j];
            sum_d2[j] += p.sum_d2[j];
        }
        resampled += p.resampled;
        rejected += p.rejected;
        underflows += p.underflows;
    }

    let n = n_pairs as f64;
    let mut purity = Vec::with_capacity(n_times);
    let mut std_error = Vec::with_capacity(n_times);
    for j in 0..n_times {
        let mean_d = sum_d[j] / n;
        purity.push(1.0 + mean_d);
        let var = ((sum_d2[j] - sum_d[j] * sum_d[j] / n) / (n - 1.0)).max(0.0);
        std_error.push((var / n).sqrt());
    }

    Ok(PuritySeries {
        tau: times.iter().map(|t| bath.gamma * t).collect(),
        purity,
        std_error,
        provenance: Provenance::MonteCarlo,
        n_pairs,
        resampled_pairs: resampled,
        rejected_draws: rejected,
        underflows,
    })
}

/// Analytic separation model used by the quadrature evaluator.
#[derive(Clone, Copy, Debug)]
pub enum SeparationModel {
    /// Isotropic exponential spreading at rate `lambda`:
    /// dq(s) = dr cosh(lambda s) + dp sinh(lambda s)/(m lambda).
    Lyapunov { lambda: f64 },
    /// Free flight: dq(s) = dr + s dp / m.
    FreeFlight,
    /// Constant squared separation, the ergodic average over the table.
    Ergodic { mean_sq_separation: f64 },
}

/// Evaluates the purity integral with the separation model inserted
/// analytically. The s-integral has polynomial/exponential antiderivatives;
/// the Gaussian average over the independent Wigner draws factorizes per
/// spatial component into identical 2-dimensional Gaussian integrals over
/// (dr_i, dp_i), each evaluated by the exact determinant formula
/// E[exp(-z^T M z)] = det(I + 2 C M)^{-1/2} with C = diag(sigma^2,
/// hbar^2/sigma^2) the covariance of the difference variables.
pub fn purity_quadrature(
    model: SeparationModel,
    packet: &GaussianPacket,
    bath: &BathParams,
    c: &PhysicalConstants,
    times: &[f64],
) -> Result<PuritySeries> {
    c.validate()?;
    validate_times(times)?;
    if let SeparationModel::Lyapunov { lambda } = model {
        if !(lambda > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "Lyapunov separation model needs lambda > 0, got {lambda}"
            )));
        }
    }
    let coef = 2.0 * bath.kappa(c) / (c.hbar * c.hbar);
    let vr = packet.sigma * packet.sigma;
    let vp = (c.hbar / packet.sigma).powi(2);
    let m = c.mass;

    let provenance = match model {
        SeparationModel::Lyapunov { .. } => Provenance::QuadratureLyapunov,
        SeparationModel::FreeFlight => Provenance::QuadratureFreeFlight,
        SeparationModel::Ergodic { .. } => Provenance::QuadratureErgodic,
    };

    let purity = times
        .iter()
        .map(|&t| match model {
            SeparationModel::FreeFlight => {
                let a11 = 2.0 * vr * coef * t;
                let a22 = 2.0 * vp * coef * t.powi(3) / (3.0 * m * m);
                let cross = vr * vp * (coef * t * t / m).powi(2);
                1.0 / ((1.0 + a11) * (1.0 + a22) - cross)
            }
            SeparationModel::Lyapunov { lambda } => {
                lyapunov_det_purity(coef, vr, vp, m, lambda, t)
            }
            SeparationModel::Ergodic { mean_sq_separation } => {
                let arg = coef * mean_sq_separation * t;
                if arg > EXP_UNDERFLOW {
                    0.0
                } else {
                    (-arg).exp()
                }
            }
        })
        .collect();

    Ok(PuritySeries::from_values(
        times.iter().map(|t| bath.gamma * t).collect(),
        purity,
        provenance,
    ))
}

/// det(I + 2CM)^{-1} for the hyperbolic separation model (two identical
/// spatial components give the square of det^{-1/2}).
fn lyapunov_det_purity(coef: f64, vr: f64, vp: f64, m: f64, lambda: f64, t: f64) -> f64 {
    let x = 2.0 * lambda * t;
    let m2l2 = m * m * lambda * lambda;
    if x > 250.0 {
        // Leading e^x coefficient of the determinant; the remainder is
        // e^{-x}-suppressed beyond any f64 relevance here.
        let k = coef * (vr / (4.0 * lambda) + vp / (4.0 * m2l2 * lambda))
            + vr * vp * coef * coef / (4.0 * m2l2 * lambda * lambda);
        let log_det = x + k.ln();
        return if log_det > EXP_UNDERFLOW { 0.0 } else { (-log_det).exp() };
    }
    let sh = x.sinh();
    let ch = x.cosh();
    let a11 = coef * vr * (t + sh / (2.0 * lambda));
    let a22 = coef * vp / m2l2 * (sh / (2.0 * lambda) - t);
    let tail = vr * vp * coef * coef / m2l2 * ((ch - 1.0) / (2.0 * lambda * lambda) - t * t);
    let det = 1.0 + a11 + a22 + tail;
    1.0 / det
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidInput("time grid must be nonempty".into()));
    }
    if times[0] < 0.0 {
        return Err(Error::InvalidInput("times must be non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("times must be strictly increasing".into()));
    }
    Ok(())
}
