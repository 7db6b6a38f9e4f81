//! Gaussian wave packet, its Wigner phase-space density, bath and physical
//! parameters, and the derived dimensionless groups.

use crate::error::{Error, Result};
use crate::models::ModelParams;
use crate::vec2::Vec2;
use rand::Rng;
use rand_distr::StandardNormal;

/// hbar, particle mass, Boltzmann constant. Natural units (all 1) by default.
#[derive(Clone, Copy, Debug)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
    pub kb: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { hbar: 1.0, mass: 1.0, kb: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.mass > 0.0 && self.kb > 0.0) {
            return Err(Error::InvalidInput(format!(
                "physical constants must be positive: hbar={}, mass={}, kb={}",
                self.hbar, self.mass, self.kb
            )));
        }
        Ok(())
    }
}

/// Ohmic bath in the weak-dissipation, high-temperature limit: a friction
/// constant and a temperature. The only combination entering the decoherence
/// exponent is the noise strength kappa = 4 m gamma kB T.
#[derive(Clone, Copy, Debug)]
pub struct BathParams {
    /// Friction constant, 1/time. Zero is allowed as the decoupled limit.
    pub gamma: f64,
    pub temperature: f64,
}

impl BathParams {
    pub fn new(gamma: f64, temperature: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(BathParams { gamma, temperature })
    }

    /// kappa = 4 m gamma kB T.
    pub fn kappa(&self, c: &PhysicalConstants) -> f64 {
        4.0 * c.mass * self.gamma * c.kb * self.temperature
    }

    /// D = 4 kB T / (m gamma); requires gamma > 0.
    pub fn diffusion(&self, c: &PhysicalConstants) -> Result<f64> {
        if self.gamma <= 0.0 {
            return Err(Error::ParameterDomain("diffusion constant needs gamma > 0".into()));
        }
        Ok(4.0 * c.kb * self.temperature / (c.mass * self.gamma))
    }
}

/// Single Gaussian wave packet centered at (r_o, p_o) with spatial width sigma.
#[derive(Clone, Copy, Debug)]
pub struct GaussianPacket {
    pub r_o: Vec2,
    pub p_o: Vec2,
    pub sigma: f64,
}

impl GaussianPacket {
    pub fn new(r_o: Vec2, p_o: Vec2, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
        }
        if !r_o.is_finite() || !p_o.is_finite() {
            return Err(Error::InvalidInput("packet center must be finite".into()));
        }
        Ok(GaussianPacket { r_o, p_o, sigma })
    }

    /// Width energy E-bar = hbar^2 / (2 m sigma^2).
    pub fn mean_energy(&self, c: &PhysicalConstants) -> f64 {
        c.hbar * c.hbar / (2.0 * c.mass * self.sigma * self.sigma)
    }

    /// Central speed |p_o| / m; the Lyapunov exponent is evaluated here.
    pub fn central_speed(&self, c: &PhysicalConstants) -> f64 {
        self.p_o.norm() / c.mass
    }
}

/// Wigner density of the packet at phase point (r, p):
/// (1/(pi hbar))^2 exp(-(r-r_o)^2/sigma^2 - sigma^2 (p-p_o)^2/hbar^2).
/// Non-negative and normalized to one over phase space.
pub fn wigner_density(
    packet: &GaussianPacket,
    c: &PhysicalConstants,
    r: Vec2,
    p: Vec2,
) -> f64 {
    let s2 = packet.sigma * packet.sigma;
    let pre = 1.0 / (std::f64::consts::PI * c.hbar).powi(2);
    let expo = -(r - packet.r_o).norm_sq() / s2
        - s2 * (p - packet.p_o).norm_sq() / (c.hbar * c.hbar);
    pre * expo.exp()
}

/// Independent Gaussian draw from the Wigner density: position components have
/// standard deviation sigma/sqrt(2) about r_o, momentum components
/// hbar/(sigma sqrt(2)) about p_o.
pub fn sample_phase_point<R: Rng + ?Sized>(
    packet: &GaussianPacket,
    c: &PhysicalConstants,
    rng: &mut R,
) -> (Vec2, Vec2) {
    let sr = packet.sigma / std::f64::consts::SQRT_2;
    let sp = c.hbar / (packet.sigma * std::f64::consts::SQRT_2);
    let g = |rng: &mut R| -> f64 { rng.sample(StandardNormal) };
    let r = packet.r_o + Vec2::new(g(rng) * sr, g(rng) * sr);
    let p = packet.p_o + Vec2::new(g(rng) * sp, g(rng) * sp);
    (r, p)
}

/// Dimensionless groups feeding the closed-form purity laws.
///
/// a1 = kB T / E-bar, a2 = D/(gamma sigma^2), Lambda = lambda/gamma,
/// b1 = a1/Lambda, b2 = (2 E-bar/(hbar lambda))^2,
/// b3 = 32 (kB T/(Lambda hbar lambda))^2, beta = b1 (1+b2)/2 + b3/2,
/// Delta = 2 pi hbar^2/(m A), tau_o = gamma t_o.
pub fn derived_params(
    packet: &GaussianPacket,
    bath: &BathParams,
    c: &PhysicalConstants,
    lambda: f64,
    area: f64,
    t_o: f64,
) -> Result<ModelParams> {
    c.validate()?;
    if bath.gamma <= 0.0 {
        return Err(Error::ParameterDomain("derived_params needs gamma > 0".into()));
    }
    if !(area > 0.0 && t_o > 0.0) {
        return Err(Error::InvalidInput("area and t_o must be positive".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "Lyapunov parameters need lambda > 0, got {lambda}"
        )));
    }
    let kt = c.kb * bath.temperature;
    let ebar = packet.mean_energy(c);
    let a1 = kt / ebar;
    let a2 = bath.diffusion(c)? / (bath.gamma * packet.sigma * packet.sigma);
    let lam_ratio = lambda / bath.gamma;
    let b1 = a1 / lam_ratio;
    let b2 = (2.0 * ebar / (c.hbar * lambda)).powi(2);
    let b3 = 32.0 * (kt / (lam_ratio * c.hbar * lambda)).powi(2);
    let beta = b1 * (1.0 + b2) / 2.0 + b3 / 2.0;
    let delta = 2.0 * std::f64::consts::PI * c.hbar * c.hbar / (c.mass * area);
    Ok(ModelParams {
        a1,
        a2,
        b1,
        b2,
        b3,
        beta,
        lambda_ratio: lam_ratio,
        tau_o: bath.gamma * t_o,
        kt_over_delta: kt / delta,
    })
}
