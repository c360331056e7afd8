//! Magnetometry and mirror-displacement sensitivities of a free-running maser,
//! limited by its phase diffusion, plus the output-field noise spectra they follow from.
//!
//! Internal cavity loss is taken as zero, so every emitted photon reaches the detector.

use serde::Serialize;

use crate::constants::TESLA_PER_GAUSS;
use crate::correlations::CorrelationState;
use crate::error::{MaserError, Result};
use crate::linewidth::{incoherent_number, PhaseNoiseResult};
use crate::meanfield::MasingRegime;
use crate::params::DerivedRates;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityResult {
    /// δB·√t_m in T·Hz^−1/2.
    pub delta_b_sqrt_tm: f64,
    /// δx·√t_m in m·Hz^−1/2.
    pub delta_x_sqrt_tm: f64,
    /// Upper edge of the slow-noise window for magnetometry, rad/s.
    pub omega_max_b: f64,
    /// Upper edge of the slow-noise window for displacement sensing, rad/s.
    pub omega_max_x: f64,
}

impl SensitivityResult {
    pub fn delta_b_gauss(&self) -> f64 {
        self.delta_b_sqrt_tm / TESLA_PER_GAUSS
    }
}

fn diffusion(pn: &PhaseNoiseResult) -> Result<f64> {
    if pn.gamma_st.is_finite() && pn.gamma_st > 0.0 {
        Ok(pn.gamma_st)
    } else {
        Err(MaserError::NotMasing)
    }
}

/// δB√t_m = γ_NV⁻¹(1 + κ_s/κ_c)√γ_ST.
pub fn magnetic_sensitivity(r: &DerivedRates, pn: &PhaseNoiseResult) -> Result<f64> {
    Ok((1.0 + r.kappa_s / r.kappa_c) * diffusion(pn)?.sqrt() / r.gamma_nv)
}

/// Magnetic sensitivity at analysis frequency `omega`, including the photon shot-noise term.
pub fn magnetic_sensitivity_at(r: &DerivedRates, pn: &PhaseNoiseResult, omega: f64) -> Result<f64> {
    let gamma_st = diffusion(pn)?;
    let ksum = r.kappa_c + r.kappa_s;
    let o2 = omega * omega;
    let shot = o2 / (4.0 * r.kappa_c * pn.n_coh) * (1.0 + 4.0 * o2 / (ksum * ksum));
    Ok(ksum / r.kappa_c * (shot + gamma_st).sqrt() / r.gamma_nv)
}

/// δx√t_m = (L/ω_c)(1 + κ_c/κ_s)√γ_ST.
pub fn displacement_sensitivity(r: &DerivedRates, pn: &PhaseNoiseResult) -> Result<f64> {
    Ok(r.cavity_length / r.omega_c * (1.0 + r.kappa_c / r.kappa_s) * diffusion(pn)?.sqrt())
}

pub fn sensitivities(r: &DerivedRates, pn: &PhaseNoiseResult) -> Result<SensitivityResult> {
    let corner = (2.0 * pn.n_incoh).sqrt() * r.kappa_c * r.kappa_s / (r.kappa_c + r.kappa_s);
    Ok(SensitivityResult {
        delta_b_sqrt_tm: magnetic_sensitivity(r, pn)?,
        delta_x_sqrt_tm: displacement_sensitivity(r, pn)?,
        omega_max_b: corner.min(0.5 * (r.kappa_c + r.kappa_s)),
        omega_max_x: corner.min(0.5 * r.kappa_s),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Spin-frequency noise from a fluctuating field; injected value in T·Hz^−1/2.
    Magnetic,
    /// Cavity-frequency noise from mirror motion; injected value in m·Hz^−1/2.
    Displacement,
}

/// Output-field quadrature noise, normalised to shot noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutputNoise {
    pub total: f64,
    pub shot: f64,
    /// Phase-diffusion (linewidth) contribution.
    pub background: f64,
    /// Contribution of the injected field or displacement noise.
    pub signal: f64,
}

fn masing_photons(cs: &CorrelationState) -> Result<f64> {
    if cs.regime == MasingRegime::Masing && cs.n_coh > 0.0 && cs.s_z > 0.0 {
        Ok(cs.n_coh)
    } else {
        Err(MaserError::NotMasing)
    }
}

/// Signal transfer coefficient: fraction of the injected frequency noise that reaches
/// the output phase at frequency Ω, multiplied by the conversion to rad/s.
fn signal_transfer(r: &DerivedRates, mode: NoiseMode, o2: f64) -> f64 {
    let k = 0.5 * (r.kappa_c + r.kappa_s);
    match mode {
        NoiseMode::Magnetic => {
            let hc = 0.5 * r.kappa_c;
            hc * hc / (k * k + o2) * r.gamma_nv * r.gamma_nv
        }
        NoiseMode::Displacement => {
            let hs = 0.5 * r.kappa_s;
            let conv = r.omega_c / r.cavity_length;
            (hs * hs + o2) / (k * k + o2) * conv * conv
        }
    }
}

pub fn output_noise_spectrum(
    r: &DerivedRates,
    cs: &CorrelationState,
    mode: NoiseMode,
    omega: f64,
    injected: f64,
) -> Result<OutputNoise> {
    let n_c = masing_photons(cs)?;
    if omega == 0.0 {
        return Err(MaserError::ZeroFrequencyPole);
    }
    let o2 = omega * omega;
    let k = 0.5 * (r.kappa_c + r.kappa_s);
    let hs = 0.5 * r.kappa_s;
    let pre = 4.0 * r.kappa_c * n_c / o2;
    let background =
        pre * hs * hs / (k * k + o2) * incoherent_number(r, cs) * r.kappa_c / (2.0 * n_c);
    let signal = pre * signal_transfer(r, mode, o2) * injected * injected;
    Ok(OutputNoise {
        total: 1.0 + background + signal,
        shot: 1.0,
        background,
        signal,
    })
}

/// Injected noise amplitude at which the signal term equals the phase-diffusion
/// background (SNR = 1, shot noise excluded).
pub fn sensitivity_from_spectrum(
    r: &DerivedRates,
    cs: &CorrelationState,
    mode: NoiseMode,
    omega: f64,
) -> Result<f64> {
    let unit = output_noise_spectrum(r, cs, mode, omega, 1.0)?;
    Ok((unit.background / unit.signal).sqrt())
}
