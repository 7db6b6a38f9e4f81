//! Subcommand implementations: orchestration of the core library plus
//! deterministic CSV and summary output.

use crate::config::{ConfigError, RunConfig, Spacing};
use bdc_core::{
    bath_sweep, derived_params, ergodic_average, lyapunov_benettin, purity_mc,
    purity_quadrature, BathParams, BilliardDomain, ErgodicMethod, GaussianPacket,
    LyapunovSettings, ModelParams, PhysicalConstants, SeparationModel,
    SweepSettings,
};
use bdc_core::models::{purity_eq21, purity_eq22, purity_eq23, purity_eq24};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Failure modes mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// exit 2
    Config(ConfigError),
    /// exit 3
    Convergence(String),
    /// exit 4
    Runtime(String),
    /// exit 5
    Oracle(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<bdc_core::Error> for CliError {
    fn from(e: bdc_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Runtime(_) => 4,
            CliError::Oracle(_) => 5,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Config(e) => e.to_string(),
            CliError::Convergence(m) | CliError::Runtime(m) | CliError::Oracle(m) => m.clone(),
        }
    }
}

pub type CliResult = Result<(), CliError>;

/// Shared invocation state: resolved config plus output options.
pub struct Ctx {
    pub cfg: RunConfig,
    pub out: Option<PathBuf>,
    pub summary: bool,
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl Ctx {
    /// Writes the CSV payload to `--out` (or stdout) and the resolved config
    /// to stdout and a `.cfg` sidecar next to the output file.
    fn emit(&self, csv: Option<&str>) -> CliResult {
        if let Some(csv) = csv {
            match &self.out {
                Some(path) => {
                    std::fs::write(path, csv)
                        .map_err(|e| CliError::Runtime(format!("writing {path:?}: {e}")))?;
                }
                None => print!("{csv}"),
            }
        }
        let echo = self.cfg.echo();
        if let Some(path) = &self.out {
            let sidecar = sidecar_path(path);
            std::fs::write(&sidecar, &echo)
                .map_err(|e| CliError::Runtime(format!("writing {sidecar:?}: {e}")))?;
        }
        println!("# resolved configuration");
        print!("{echo}");
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.workers)
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".cfg");
    PathBuf::from(name)
}

/// Benettin settings with config overrides applied; writes the resolved
/// values back so the config echo is fully numeric.
fn lyapunov_settings(cfg: &mut RunConfig, domain: &BilliardDomain) -> LyapunovSettings {
    let mut s = LyapunovSettings::defaults(domain, cfg.speed(), cfg.mass, cfg.lyap_t_max);
    s.ensemble = cfg.lyap_ensemble;
    s.seed = cfg.lyap_seed;
    if let Some(d0) = cfg.lyap_d0 {
        s.d0 = d0;
    }
    if let Some(r) = cfg.lyap_renorm {
        s.renorm_interval = r;
    }
    cfg.lyap_d0 = Some(s.d0);
    cfg.lyap_renorm = Some(s.renorm_interval);
    s
}

/// Default horizon min(0.5/gamma, 15/lambda); the first cap keeps tau well
/// below one, the second spans several Lyapunov times.
fn resolve_t_max(cfg: &mut RunConfig, lambda: f64, gamma_cap: f64) -> Result<f64, CliError> {
    if cfg.t_max.is_none() {
        let by_gamma = if gamma_cap > 0.0 { 0.5 / gamma_cap } else { f64::INFINITY };
        let by_lambda = if lambda > 0.0 { 15.0 / lambda } else { f64::INFINITY };
        let t = by_gamma.min(by_lambda);
        if !t.is_finite() {
            return Err(CliError::Config(ConfigError {
                field: "grid.t_max".into(),
                message: "cannot auto-resolve (gamma = 0 and lambda <= 0); set it explicitly"
                    .into(),
            }));
        }
        cfg.t_max = Some(t);
    }
    Ok(cfg.t_max.unwrap())
}

fn time_grid(t_max: f64, n: usize, spacing: Spacing) -> Result<Vec<f64>, CliError> {
    if n < 2 || !(t_max > 0.0) {
        return Err(CliError::Config(ConfigError {
            field: "grid.n_points".into(),
            message: format!("need n_points >= 2 and t_max > 0 (got {n}, {t_max})"),
        }));
    }
    Ok(match spacing {
        Spacing::Linear => (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect(),
        Spacing::Log => {
            let lo = t_max / 100.0;
            (0..n)
                .map(|k| lo * (t_max / lo).powf(k as f64 / (n - 1) as f64))
                .collect()
        }
    })
}

/// Analytic mean free time pi A / (P v): exact for any convex-boundary
/// billiard by the mean-chord identity.
fn mean_free_time_analytic(domain: &BilliardDomain, speed: f64) -> f64 {
    std::f64::consts::PI * domain.area() / (domain.perimeter() * speed)
}

struct Scene {
    domain: BilliardDomain,
    constants: PhysicalConstants,
    packet: GaussianPacket,
    bath: BathParams,
}

fn scene(cfg: &mut RunConfig) -> Result<Scene, CliError> {
    let domain = cfg.domain()?;
    let constants = cfg.constants()?;
    let packet = cfg.packet(&domain)?;
    let bath = BathParams::new(cfg.gamma, cfg.temperature).map_err(|e| {
        CliError::Config(ConfigError { field: "bath".into(), message: e.to_string() })
    })?;
    Ok(Scene { domain, constants, packet, bath })
}

// ---------------------------------------------------------------------------
// lyapunov

pub fn cmd_lyapunov(ctx: &mut Ctx) -> CliResult {
    let sc = scene(&mut ctx.cfg)?;
    let settings = lyapunov_settings(&mut ctx.cfg, &sc.domain);
    let est = lyapunov_benettin(&sc.domain, &settings)?;

    println!("lambda          = {}", fmt17(est.lambda));
    println!("std_error       = {}", fmt17(est.std_error));
    println!("resolution_floor= {}", fmt17(est.resolution_floor));
    println!("ensemble        = {}", est.ensemble_size);
    println!("horizon         = {}", fmt17(est.horizon));
    println!("drift           = {}", fmt17(est.drift));
    println!("convergence_warning = {}", est.convergence_warning);
    if ctx.summary {
        println!(
            "summary: command=lyapunov lambda={} std_error={} floor={} ensemble={} horizon={} drift={} warning={}",
            fmt17(est.lambda),
            fmt17(est.std_error),
            fmt17(est.resolution_floor),
            est.ensemble_size,
            fmt17(est.horizon),
            fmt17(est.drift),
            est.convergence_warning
        );
    }
    let csv = format!(
        "lambda,std_error,resolution_floor,ensemble,horizon,drift,convergence_warning\n{},{},{},{},{},{},{}\n",
        fmt17(est.lambda),
        fmt17(est.std_error),
        fmt17(est.resolution_floor),
        est.ensemble_size,
        fmt17(est.horizon),
        fmt17(est.drift),
        est.convergence_warning
    );
    ctx.emit(Some(&csv))?;
    if est.convergence_warning && ctx.cfg.lyap_strict {
        return Err(CliError::Convergence(format!(
            "lyapunov estimate drifted {:.1}% between half and full horizon",
            est.drift * 100.0
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// purity

fn closed_forms(mp: Option<&ModelParams>, tau: f64) -> [String; 4] {
    match mp {
        None => Default::default(),
        Some(mp) => {
            let e21 = fmt17(purity_eq21(tau, mp.a1, mp.a2));
            // The uncorrelated and Lyapunov laws carry a tau >= tau_o
            // regime label; below it the columns stay blank.
            let (e22, e23) = if tau >= mp.tau_o {
                (
                    fmt17(purity_eq22(tau, mp.tau_o, mp.kt_over_delta).unwrap_or(f64::NAN)),
                    fmt17(purity_eq23(tau, mp.b1, mp.b2, mp.b3, mp.lambda_ratio)),
                )
            } else {
                (String::new(), String::new())
            };
            let e24 = fmt17(purity_eq24(tau, mp.beta, mp.lambda_ratio));
            [e21, e22, e23, e24]
        }
    }
}

pub fn cmd_purity(ctx: &mut Ctx) -> CliResult {
    let sc = scene(&mut ctx.cfg)?;
    let settings = lyapunov_settings(&mut ctx.cfg, &sc.domain);
    let est = lyapunov_benettin(&sc.domain, &settings)?;
    let gamma = ctx.cfg.gamma;
    let t_max = resolve_t_max(&mut ctx.cfg, est.lambda, gamma)?;
    let times = time_grid(t_max, ctx.cfg.n_points, ctx.cfg.spacing)?;

    let pool = ctx.pool()?;
    let series = pool.install(|| {
        purity_mc(
            &sc.domain,
            &sc.packet,
            &sc.bath,
            &sc.constants,
            &times,
            ctx.cfg.n_pairs,
            ctx.cfg.seed,
        )
    })?;

    let t_o = mean_free_time_analytic(&sc.domain, ctx.cfg.speed());
    // Closed forms need gamma > 0 and a positive Lyapunov exponent; leave the
    // columns blank otherwise (e.g. the decoupled-bath control).
    let mp = if ctx.cfg.gamma > 0.0 && est.lambda > 0.0 {
        Some(derived_params(
            &sc.packet,
            &sc.bath,
            &sc.constants,
            est.lambda,
            sc.domain.area(),
            t_o,
        )?)
    } else {
        None
    };

    let mut csv =
        String::from("tau,purity_mc,stderr_mc,purity_eq21,purity_eq22,purity_eq23,purity_eq24\n");
    for j in 0..series.tau.len() {
        let [e21, e22, e23, e24] = closed_forms(mp.as_ref(), series.tau[j]);
        let _ = writeln!(
            csv,
            "{},{},{},{e21},{e22},{e23},{e24}",
            fmt17(series.tau[j]),
            fmt17(series.purity[j]),
            fmt17(series.std_error[j]),
        );
    }

    let resample_rate = series.resampled_pairs as f64 / series.n_pairs as f64;
    let reject_rate = series.rejected_draws as f64 / (2 * series.n_pairs) as f64;
    if reject_rate > 0.01 {
        eprintln!(
            "warning: {:.2}% of Wigner position draws fell outside the domain \
             (packet width comparable to the table)",
            reject_rate * 100.0
        );
    }
    println!("lambda   = {}", fmt17(est.lambda));
    println!("tau_o    = {}", fmt17(ctx.cfg.gamma * t_o));
    println!("n_pairs  = {}", series.n_pairs);
    println!("resampled_pairs = {}", series.resampled_pairs);
    println!("rejected_draws  = {}", series.rejected_draws);
    println!("underflows      = {}", series.underflows);
    if ctx.summary {
        println!(
            "summary: command=purity lambda={} tau_o={} n_pairs={} resampled={} rejected={} underflows={} final_purity={}",
            fmt17(est.lambda),
            fmt17(ctx.cfg.gamma * t_o),
            series.n_pairs,
            series.resampled_pairs,
            series.rejected_draws,
            series.underflows,
            fmt17(*series.purity.last().unwrap())
        );
    }
    ctx.emit(Some(&csv))?;
    if resample_rate > 0.01 {
        return Err(CliError::Runtime(format!(
            "propagation failure rate {:.2}% exceeds 1%",
            resample_rate * 100.0
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

pub fn cmd_sweep(ctx: &mut Ctx) -> CliResult {
    let sc = scene(&mut ctx.cfg)?;
    if ctx.cfg.sweep_gammas.len() != ctx.cfg.sweep_temperatures.len()
        || ctx.cfg.sweep_gammas.is_empty()
    {
        return Err(CliError::Config(ConfigError {
            field: "sweep.gammas".into(),
            message: "gammas and temperatures must be nonempty lists of equal length".into(),
        }));
    }
    let settings = lyapunov_settings(&mut ctx.cfg, &sc.domain);
    let est = lyapunov_benettin(&sc.domain, &settings)?;
    let gamma_cap = ctx.cfg.sweep_gammas.iter().cloned().fold(0.0, f64::max);
    let t_max = resolve_t_max(&mut ctx.cfg, est.lambda, gamma_cap)?;
    let times = time_grid(t_max, ctx.cfg.n_points, ctx.cfg.spacing)?;

    let sweep_settings = SweepSettings {
        times,
        n_pairs: ctx.cfg.n_pairs,
        seed: ctx.cfg.seed,
        lyapunov: settings,
    };
    let pool = ctx.pool()?;
    let gammas = ctx.cfg.sweep_gammas.clone();
    let temps = ctx.cfg.sweep_temperatures.clone();
    let result = pool.install(|| {
        bath_sweep(&sc.domain, &sc.packet, &sc.constants, &gammas, &temps, &sweep_settings)
    })?;

    let mut csv = String::from(
        "gamma,temperature,kappa,fitted_rate_tau,fitted_rate_t,lambda_benettin,ratio,status\n",
    );
    let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
    for row in &result.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            fmt17(row.gamma),
            fmt17(row.temperature),
            fmt17(row.kappa),
            opt(row.rate_tau),
            opt(row.rate_t),
            fmt17(result.lambda.lambda),
            opt(row.ratio),
            row.status
        );
    }

    let n_ok = result.rows.iter().filter(|r| r.rate_t.is_some()).count();
    println!("lambda_benettin = {}", fmt17(result.lambda.lambda));
    println!("rows_ok = {n_ok} / {}", result.rows.len());
    match result.spread {
        Some(s) => println!("rate_spread_max_over_min = {}", fmt17(s)),
        None => println!("rate_spread_max_over_min = n/a"),
    }
    if ctx.summary {
        println!(
            "summary: command=sweep lambda={} rows_ok={} rows={} spread={}",
            fmt17(result.lambda.lambda),
            n_ok,
            result.rows.len(),
            result.spread.map(fmt17).unwrap_or_else(|| "n/a".into())
        );
    }
    ctx.emit(Some(&csv))?;
    if n_ok == 0 {
        return Err(CliError::Runtime("no sweep row produced a rate fit".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// oracle

pub fn cmd_oracle(ctx: &mut Ctx) -> CliResult {
    let sc = scene(&mut ctx.cfg)?;
    if ctx.cfg.gamma <= 0.0 {
        return Err(CliError::Config(ConfigError {
            field: "bath.gamma".into(),
            message: "the oracle comparison needs gamma > 0".into(),
        }));
    }
    let settings = lyapunov_settings(&mut ctx.cfg, &sc.domain);
    let est = lyapunov_benettin(&sc.domain, &settings)?;
    if est.lambda <= 0.0 {
        return Err(CliError::Runtime(
            "oracle comparison needs a positive Lyapunov exponent".into(),
        ));
    }
    let t_o = mean_free_time_analytic(&sc.domain, ctx.cfg.speed());
    let mp = derived_params(
        &sc.packet,
        &sc.bath,
        &sc.constants,
        est.lambda,
        sc.domain.area(),
        t_o,
    )?;
    let gamma = ctx.cfg.gamma;

    // Free-flight regime: quadrature with the straight-line separation model
    // against the first closed form, on tau in (0, min(0.2, tau_o)].
    let tau_hi = mp.tau_o.min(0.2);
    let taus: Vec<f64> = (1..=200).map(|k| tau_hi * k as f64 / 200.0).collect();
    let times: Vec<f64> = taus.iter().map(|tau| tau / gamma).collect();
    let quad =
        purity_quadrature(SeparationModel::FreeFlight, &sc.packet, &sc.bath, &sc.constants, &times)?;
    let mut dev_ff = 0.0f64;
    for (j, &tau) in taus.iter().enumerate() {
        let reference = purity_eq21(tau, mp.a1, mp.a2);
        dev_ff = dev_ff.max(((quad.purity[j] - reference) / reference).abs());
    }

    // Lyapunov regime: hyperbolic separation model against the second closed
    // form, wherever the reference purity stays above 1e-6.
    let mut tau_hi = 0.05 / mp.lambda_ratio.max(1e-12);
    while purity_eq23(tau_hi, mp.b1, mp.b2, mp.b3, mp.lambda_ratio) > 1e-6 {
        tau_hi *= 1.05;
    }
    let taus: Vec<f64> = (1..=200).map(|k| tau_hi * k as f64 / 200.0).collect();
    let times: Vec<f64> = taus.iter().map(|tau| tau / gamma).collect();
    let quad = purity_quadrature(
        SeparationModel::Lyapunov { lambda: est.lambda },
        &sc.packet,
        &sc.bath,
        &sc.constants,
        &times,
    )?;
    let mut dev_ly = 0.0f64;
    for (j, &tau) in taus.iter().enumerate() {
        let reference = purity_eq23(tau, mp.b1, mp.b2, mp.b3, mp.lambda_ratio);
        if reference >= 1e-6 {
            dev_ly = dev_ly.max(((quad.purity[j] - reference) / reference).abs());
        }
    }

    let pass_ff = dev_ff <= 1e-6;
    let pass_ly = dev_ly <= 1e-6;
    println!(
        "free-flight : max relative deviation {} [{}]",
        fmt17(dev_ff),
        if pass_ff { "PASS" } else { "FAIL" }
    );
    println!(
        "lyapunov    : max relative deviation {} [{}]",
        fmt17(dev_ly),
        if pass_ly { "PASS" } else { "FAIL" }
    );
    if ctx.summary {
        println!(
            "summary: command=oracle dev_free_flight={} dev_lyapunov={} pass={}",
            fmt17(dev_ff),
            fmt17(dev_ly),
            pass_ff && pass_ly
        );
    }
    ctx.emit(None)?;
    if !(pass_ff && pass_ly) {
        return Err(CliError::Oracle(
            "closed forms deviate from the quadrature evaluation beyond 1e-6".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// ergavg

pub fn cmd_ergavg(ctx: &mut Ctx) -> CliResult {
    let domain = ctx.cfg.domain()?;
    let analytic = ergodic_average(&domain, ErgodicMethod::Analytic)?;
    let mc = ergodic_average(
        &domain,
        ErgodicMethod::MonteCarlo { n: ctx.cfg.ergavg_n_pairs, seed: ctx.cfg.seed },
    )?;
    let area = domain.area();

    println!("analytic      = {}", fmt17(analytic.value));
    println!("monte_carlo   = {} +- {}", fmt17(mc.value), fmt17(mc.std_error));
    println!("ratio_to_area = {}", fmt17(analytic.value / area));
    // The uncorrelated closed form tacitly replaces this average by A itself.
    println!("vs_implicit_1 = {}", fmt17(analytic.value / area));
    if ctx.summary {
        println!(
            "summary: command=ergavg analytic={} mc={} mc_stderr={} ratio_to_area={}",
            fmt17(analytic.value),
            fmt17(mc.value),
            fmt17(mc.std_error),
            fmt17(analytic.value / area)
        );
    }
    ctx.emit(None)
}
