//! Flat key-value run configuration.
//!
//! The on-disk format is one `key = value` per line with dotted keys
//! (`bath.gamma = 0.01`), `#` comments, and blank lines. Values resolved at
//! run time (packet position defaulting to the centroid, the automatic time
//! horizon) are echoed back numerically, so re-parsing an echoed config
//! reproduces the resolved state exactly.

use bdc_core::{BilliardDomain, GaussianPacket, PhysicalConstants, Vec2};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// A configuration error: named field plus message. Maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error in `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.into(), message: message.into() }
}

/// Grid spacing for the purity time axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// Fully resolved run configuration. Every field has a concrete value except
/// the ones marked optional, which commands resolve on demand.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub variant: String,
    pub stadium_a: f64,
    pub stadium_r: f64,
    pub disk_r: f64,
    pub rect_lx: f64,
    pub rect_ly: f64,
    pub sinai_l: f64,
    pub sinai_r: f64,
    /// None = centroid of the domain (resolved by `packet`).
    pub packet_x: Option<f64>,
    pub packet_y: Option<f64>,
    pub packet_px: f64,
    pub packet_py: f64,
    pub packet_sigma: f64,
    pub hbar: f64,
    pub mass: f64,
    pub kb: f64,
    pub gamma: f64,
    pub temperature: f64,
    /// None = min(0.5/gamma, 15/lambda), resolved once lambda is known.
    pub t_max: Option<f64>,
    pub n_points: usize,
    pub spacing: Spacing,
    pub n_pairs: usize,
    pub seed: u64,
    /// 0 = one worker per logical core.
    pub workers: usize,
    pub lyap_t_max: f64,
    pub lyap_ensemble: usize,
    /// None = 1e-8 * domain diameter.
    pub lyap_d0: Option<f64>,
    /// None = mean free time (pi * area / perimeter / speed).
    pub lyap_renorm: Option<f64>,
    pub lyap_seed: u64,
    /// Escalate a convergence warning to exit code 3.
    pub lyap_strict: bool,
    pub sweep_gammas: Vec<f64>,
    pub sweep_temperatures: Vec<f64>,
    pub ergavg_n_pairs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: "stadium".into(),
            stadium_a: 1.0,
            stadium_r: 1.0,
            disk_r: 1.0,
            rect_lx: 1.0,
            rect_ly: 1.0,
            sinai_l: 2.0,
            sinai_r: 0.5,
            packet_x: None,
            packet_y: None,
            packet_px: 0.7f64.cos(),
            packet_py: 0.7f64.sin(),
            packet_sigma: 0.05,
            hbar: 1.0,
            mass: 1.0,
            kb: 1.0,
            gamma: 0.01,
            temperature: 50.0,
            t_max: None,
            n_points: 60,
            spacing: Spacing::Linear,
            n_pairs: 100_000,
            seed: 1,
            workers: 0,
            lyap_t_max: 400.0,
            lyap_ensemble: 100,
            lyap_d0: None,
            lyap_renorm: None,
            lyap_seed: 1,
            lyap_strict: false,
            sweep_gammas: vec![0.005, 0.01, 0.02, 0.05],
            sweep_temperatures: vec![50.0, 50.0, 50.0, 50.0],
            ergavg_n_pairs: 1_000_000,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse().map_err(|_| err(key, format!("expected a number, got `{v}`")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse().map_err(|_| err(key, format!("expected a non-negative integer, got `{v}`")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64, ConfigError> {
    v.parse().map_err(|_| err(key, format!("expected a non-negative integer, got `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(err(key, format!("expected true/false, got `{v}`"))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(|s| parse_f64(key, s.trim()))
        .collect()
}

fn parse_opt_f64(key: &str, v: &str) -> Result<Option<f64>, ConfigError> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_f64(key, v).map(Some)
    }
}

impl RunConfig {
    /// Applies one dotted key. Unknown keys are a config error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "domain.variant" => self.variant = v.to_string(),
            "stadium.a" => self.stadium_a = parse_f64(key, v)?,
            "stadium.r" => self.stadium_r = parse_f64(key, v)?,
            "disk.r" => self.disk_r = parse_f64(key, v)?,
            "rectangle.lx" => self.rect_lx = parse_f64(key, v)?,
            "rectangle.ly" => self.rect_ly = parse_f64(key, v)?,
            "sinai.l" => self.sinai_l = parse_f64(key, v)?,
            "sinai.r" => self.sinai_r = parse_f64(key, v)?,
            "packet.x" => self.packet_x = parse_opt_f64(key, v)?,
            "packet.y" => self.packet_y = parse_opt_f64(key, v)?,
            "packet.px" => self.packet_px = parse_f64(key, v)?,
            "packet.py" => self.packet_py = parse_f64(key, v)?,
            "packet.sigma" => self.packet_sigma = parse_f64(key, v)?,
            "constants.hbar" => self.hbar = parse_f64(key, v)?,
            "constants.mass" => self.mass = parse_f64(key, v)?,
            "constants.kb" => self.kb = parse_f64(key, v)?,
            "bath.gamma" => self.gamma = parse_f64(key, v)?,
            "bath.temperature" => self.temperature = parse_f64(key, v)?,
            "grid.t_max" => self.t_max = parse_opt_f64(key, v)?,
            "grid.n_points" => self.n_points = parse_usize(key, v)?,
            "grid.spacing" => {
                self.spacing = match v {
                    "linear" => Spacing::Linear,
                    "log" => Spacing::Log,
                    _ => return Err(err(key, format!("expected linear or log, got `{v}`"))),
                }
            }
            "mc.n_pairs" => self.n_pairs = parse_usize(key, v)?,
            "mc.seed" => self.seed = parse_u64(key, v)?,
            "mc.workers" => self.workers = parse_usize(key, v)?,
            "lyapunov.t_max" => self.lyap_t_max = parse_f64(key, v)?,
            "lyapunov.ensemble" => self.lyap_ensemble = parse_usize(key, v)?,
            "lyapunov.d0" => self.lyap_d0 = parse_opt_f64(key, v)?,
            "lyapunov.renorm_interval" => self.lyap_renorm = parse_opt_f64(key, v)?,
            "lyapunov.seed" => self.lyap_seed = parse_u64(key, v)?,
            "lyapunov.strict" => self.lyap_strict = parse_bool(key, v)?,
            "sweep.gammas" => self.sweep_gammas = parse_list(key, v)?,
            "sweep.temperatures" => self.sweep_temperatures = parse_list(key, v)?,
            "ergavg.n_pairs" => self.ergavg_n_pairs = parse_usize(key, v)?,
            _ => return Err(err(key, "unknown config key")),
        }
        Ok(())
    }

    /// Parses file contents on top of the current values.
    pub fn apply_file(&mut self, contents: &str, path: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in contents.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(path, format!("line {}: expected `key = value`", lineno + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Applies `key=value` command-line overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                err("override", format!("expected KEY=VALUE, got `{item}`"))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// The billiard table described by the domain fields.
    pub fn domain(&self) -> Result<BilliardDomain, ConfigError> {
        let built = match self.variant.as_str() {
            "stadium" => BilliardDomain::stadium(self.stadium_a, self.stadium_r),
            "disk" => BilliardDomain::disk(self.disk_r),
            "rectangle" => BilliardDomain::rectangle(self.rect_lx, self.rect_ly),
            "sinai" => BilliardDomain::sinai(self.sinai_l, self.sinai_r),
            other => {
                return Err(err(
                    "domain.variant",
                    format!("expected stadium|disk|rectangle|sinai, got `{other}`"),
                ))
            }
        };
        built.map_err(|e| err("domain", e.to_string()))
    }

    pub fn constants(&self) -> Result<PhysicalConstants, ConfigError> {
        let c = PhysicalConstants { hbar: self.hbar, mass: self.mass, kb: self.kb };
        c.validate().map_err(|e| err("constants", e.to_string()))?;
        Ok(c)
    }

    /// Gaussian packet, with the position defaulted to the domain centroid.
    /// Also fills `packet_x` / `packet_y` so the echo is fully numeric.
    pub fn packet(&mut self, domain: &BilliardDomain) -> Result<GaussianPacket, ConfigError> {
        let centroid = domain.centroid();
        let x = *self.packet_x.get_or_insert(centroid.x);
        let y = *self.packet_y.get_or_insert(centroid.y);
        let r_o = Vec2::new(x, y);
        if !domain.contains(r_o) {
            return Err(err("packet.x", format!("position ({x}, {y}) is outside the domain")));
        }
        GaussianPacket::new(r_o, Vec2::new(self.packet_px, self.packet_py), self.packet_sigma)
            .map_err(|e| err("packet", e.to_string()))
    }

    /// Packet speed |p_o| / m.
    pub fn speed(&self) -> f64 {
        self.packet_px.hypot(self.packet_py) / self.mass
    }

    /// Canonical echo: every key, sorted, numbers at 17 significant digits.
    pub fn echo(&self) -> String {
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        let f = |x: f64| format!("{x:.16e}");
        let opt = |x: Option<f64>| x.map_or_else(|| "auto".to_string(), |v| format!("{v:.16e}"));
        map.insert("domain.variant", self.variant.clone());
        map.insert("stadium.a", f(self.stadium_a));
        map.insert("stadium.r", f(self.stadium_r));
        map.insert("disk.r", f(self.disk_r));
        map.insert("rectangle.lx", f(self.rect_lx));
        map.insert("rectangle.ly", f(self.rect_ly));
        map.insert("sinai.l", f(self.sinai_l));
        map.insert("sinai.r", f(self.sinai_r));
        map.insert("packet.x", opt(self.packet_x));
        map.insert("packet.y", opt(self.packet_y));
        map.insert("packet.px", f(self.packet_px));
        map.insert("packet.py", f(self.packet_py));
        map.insert("packet.sigma", f(self.packet_sigma));
        map.insert("constants.hbar", f(self.hbar));
        map.insert("constants.mass", f(self.mass));
        map.insert("constants.kb", f(self.kb));
        map.insert("bath.gamma", f(self.gamma));
        map.insert("bath.temperature", f(self.temperature));
        map.insert("grid.t_max", opt(self.t_max));
        map.insert("grid.n_points", self.n_points.to_string());
        map.insert(
            "grid.spacing",
            match self.spacing {
                Spacing::Linear => "linear".into(),
                Spacing::Log => "log".into(),
            },
        );
        map.insert("mc.n_pairs", self.n_pairs.to_string());
        map.insert("mc.seed", self.seed.to_string());
        map.insert("mc.workers", self.workers.to_string());
        map.insert("lyapunov.t_max", f(self.lyap_t_max));
        map.insert("lyapunov.ensemble", self.lyap_ensemble.to_string());
        map.insert("lyapunov.d0", opt(self.lyap_d0));
        map.insert("lyapunov.renorm_interval", opt(self.lyap_renorm));
        map.insert("lyapunov.seed", self.lyap_seed.to_string());
        map.insert("lyapunov.strict", self.lyap_strict.to_string());
        let list = |xs: &[f64]| {
            xs.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",")
        };
        map.insert("sweep.gammas", list(&self.sweep_gammas));
        map.insert("sweep.temperatures", list(&self.sweep_temperatures));
        map.insert("ergavg.n_pairs", self.ergavg_n_pairs.to_string());

        let mut out = String::new();
        for (k, v) in map {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
