//! Rate extraction from purity curves, bath-parameter sweeps, and the ergodic
//! mean-squared separation of a billiard table.
//!
//! Fits are performed on y = ln(1/P - 1) against tau, so an exponential
//! approach P = (1 + beta e^{2 Lambda tau})^{-1} appears as a straight line of
//! slope 2 Lambda and intercept ln beta.

use crate::decoherence::{purity_mc, PuritySeries};
use crate::dynamics::{lyapunov_benettin, LyapunovEstimate, LyapunovSettings};
use crate::error::{Error, Result};
use crate::geometry::BilliardDomain;
use crate::initial_state::{BathParams, GaussianPacket, PhysicalConstants};

/// Least-squares fit of ln(1/P - 1) vs tau.
#[derive(Clone, Copy, Debug)]
pub struct RateFit {
    /// Slope in tau units; 2 Lambda = 2 lambda / gamma for Lyapunov decay.
    pub rate: f64,
    /// Intercept; ln beta for the asymptotic law.
    pub intercept: f64,
    /// (tau_lo, tau_hi) actually used.
    pub window: (f64, f64),
    pub residual_rms: f64,
    pub n_points: usize,
}

/// Fits the decoherence rate of a purity series.
///
/// Without an explicit window, usable points are selected automatically:
/// purity strictly inside (0, 1), transformed value 1/P - 1 within
/// [1e-3, 1e3], Monte Carlo relative error below 10%, and — when the series
/// carries pair counts — purity at least five standard errors above the
/// sampling floor 1/n_pairs, which is where an MC mean of non-negative
/// factors stops resolving further decay.
pub fn fit_decoherence_rate(
    series: &PuritySeries,
    window: Option<(f64, f64)>,
) -> Result<RateFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for ((&tau, &p), &se) in series
        .tau
        .iter()
        .zip(&series.purity)
        .zip(&series.std_error)
    {
        if !(p > 0.0 && p < 1.0) {
            continue;
        }
        match window {
            Some((lo, hi)) => {
                if tau < lo || tau > hi {
                    continue;
                }
            }
            None => {
                let x = 1.0 / p - 1.0;
                if !(1e-3..=1e3).contains(&x) {
                    continue;
                }
                if se > 0.0 && se / p >= 0.1 {
                    continue;
                }
                if series.n_pairs > 0 {
                    let floor = 1.0 / series.n_pairs as f64;
                    if p <= floor + 5.0 * se {
                        continue;
                    }
                }
            }
        }
        xs.push(tau);
        ys.push((1.0 / p - 1.0).ln());
    }
    let n = xs.len();
    if n < 5 {
        return Err(Error::Fit(format!(
            "only {n} usable points for rate fit (need 5)"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate tau values in fit window".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let rate = sxy / sxx;
    let intercept = my - rate * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + rate * x);
            r * r
        })
        .sum();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in &xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    Ok(RateFit {
        rate,
        intercept,
        window: (lo, hi),
        residual_rms: (ss_res / nf).sqrt(),
        n_points: n,
    })
}

/// Monte Carlo settings shared by every row of a bath sweep.
#[derive(Clone, Debug)]
pub struct SweepSettings {
    /// Physical time grid shared across rows.
    pub times: Vec<f64>,
    pub n_pairs: usize,
    pub seed: u64,
    /// Settings for the single Benettin run backing the whole sweep.
    pub lyapunov: LyapunovSettings,
}

/// One bath setting of a sweep.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub gamma: f64,
    pub temperature: f64,
    pub kappa: f64,
    /// Fitted rate in tau units (expected 2 lambda / gamma).
    pub rate_tau: Option<f64>,
    /// Fitted rate in t units (expected 2 lambda).
    pub rate_t: Option<f64>,
    /// rate_t / (2 lambda_benettin).
    pub ratio: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub lambda: LyapunovEstimate,
    /// max/min of the successful rates in t units, if at least two succeeded.
    pub spread: Option<f64>,
}

/// Runs one purity_mc + rate fit per (gamma, T) pair against a single shared
/// Lyapunov estimate. Fit failures are recorded per row and never abort the
/// sweep.
pub fn bath_sweep(
    domain: &BilliardDomain,
    packet: &GaussianPacket,
    constants: &PhysicalConstants,
    gamma_list: &[f64],
    t_list: &[f64],
    settings: &SweepSettings,
) -> Result<SweepResult> {
    if gamma_list.len() != t_list.len() || gamma_list.is_empty() {
        return Err(Error::InvalidInput(
            "bath sweep needs equal-length nonempty gamma and T lists".into(),
        ));
    }
    let lambda = lyapunov_benettin(domain, &settings.lyapunov)?;
    let mut rows = Vec::with_capacity(gamma_list.len());
    for (i, (&gamma, &temperature)) in gamma_list.iter().zip(t_list).enumerate() {
        let bath = BathParams::new(gamma, temperature)?;
        let kappa = bath.kappa(constants);
        let series = purity_mc(
            domain,
            packet,
            &bath,
            constants,
            &settings.times,
            settings.n_pairs,
            settings.seed.wrapping_add(i as u64),
        )?;
        let row = match fit_decoherence_rate(&series, None) {
            Ok(fit) => {
                let rate_t = fit.rate * gamma;
                SweepRow {
                    gamma,
                    temperature,
                    kappa,
                    rate_tau: Some(fit.rate),
                    rate_t: Some(rate_t),
                    ratio: Some(rate_t / (2.0 * lambda.lambda)),
                    status: "ok".into(),
                }
            }
            Err(e) => SweepRow {
                gamma,
                temperature,
                kappa,
                rate_tau: None,
                rate_t: None,
                ratio: None,
                status: format!("fit-error: {e}"),
            },
        };
        rows.push(row);
    }
    let ok: Vec<f64> = rows.iter().filter_map(|r| r.rate_t).collect();
    let spread = if ok.len() >= 2 {
        let max = ok.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = ok.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(max / min)
    } else {
        None
    };
    Ok(SweepResult { rows, lambda, spread })
}

/// How to evaluate the ergodic average.
#[derive(Clone, Copy, Debug)]
pub enum ErgodicMethod {
    Analytic,
    MonteCarlo { n: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug)]
pub struct ErgodicAverage {
    pub value: f64,
    /// Zero for the analytic path.
    pub std_error: f64,
}

/// Mean squared separation of two independent uniform points in the domain,
/// <|q - q'|^2> = 2 (<|q|^2> - |<q>|^2). Closed forms exist for every
/// supported variant; the MC path is the cross-check.
pub fn ergodic_average(domain: &BilliardDomain, method: ErgodicMethod) -> Result<ErgodicAverage> {
    domain.validate()?;
    match method {
        ErgodicMethod::Analytic => Ok(ErgodicAverage {
            value: ergodic_average_analytic(domain),
            std_error: 0.0,
        }),
        ErgodicMethod::MonteCarlo { n, seed } => {
            if n < 2 {
                return Err(Error::InvalidInput("ergodic MC needs n >= 2 pairs".into()));
            }
            let mut rng = crate::decoherence::pair_rng(seed, 0xE7607);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..n {
                let q = domain.sample_uniform_point(&mut rng);
                let p = domain.sample_uniform_point(&mut rng);
                let d2 = q.distance(p).powi(2);
                sum += d2;
                sumsq += d2 * d2;
            }
            let nf = n as f64;
            let mean = sum / nf;
            let var = ((sumsq - sum * sum / nf) / (nf - 1.0)).max(0.0);
            Ok(ErgodicAverage {
                value: mean,
                std_error: (var / nf).sqrt(),
            })
        }
    }
}

fn ergodic_average_analytic(domain: &BilliardDomain) -> f64 {
    use std::f64::consts::PI;
    match *domain {
        // Per coordinate, E (x - x')^2 = L^2/6 for independent uniforms.
        BilliardDomain::Rectangle { lx, ly } => (lx * lx + ly * ly) / 6.0,
        // 2 <rho^2> = 2 * R^2/2.
        BilliardDomain::Disk { r } => r * r,
        // Second area moment about the centroid: rectangle part plus two
        // half-disk caps shifted to x = +-a.
        BilliardDomain::Stadium { a, r } => {
            let moment = 4.0 * a.powi(3) * r / 3.0
                + 4.0 * a * r.powi(3)
                + PI * r.powi(4) / 2.0
                + PI * a * a * r * r;
            2.0 * moment / domain.area()
        }
        // Square moment about its center minus the excised disk's.
        BilliardDomain::Sinai { l, r } => {
            let moment = l.powi(4) / 6.0 - PI * r.powi(4) / 2.0;
            2.0 * moment / domain.area()
        }
    }
}
