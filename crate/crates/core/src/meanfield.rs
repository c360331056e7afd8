//! Mean-field steady state of the undriven maser, masing threshold and frequency pulling.
//!
//! Frame and sign conventions (shared with [`crate::dynamics`]): amplitudes rotate at
//! the masing frequency ω, Δ_c = ω − ω_c, Δ_s = ω − ω_s and
//!
//! ```text
//! da/dt   = (−κ_c/2 + iΔ_c) a − i g S₋
//! dS₋/dt  = (−κ_s/2 + iΔ_s) S₋ + i g S_z a
//! dS_z/dt = (w − γ)N − (w + γ) S_z − 4g Im(a* S₋)
//! ```
//!
//! With `a` real and positive, S₋ = +iκ_c a/(2g) at resonance.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::numeric::{relative_residual, relative_residual_c};
use crate::params::DerivedRates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MasingRegime {
    BelowThreshold,
    Masing,
    OverPumped,
}

impl std::fmt::Display for MasingRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MasingRegime::BelowThreshold => "below-threshold",
            MasingRegime::Masing => "masing",
            MasingRegime::OverPumped => "over-pumped",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldState {
    pub s_z: f64,
    pub s_minus: Complex64,
    pub a: Complex64,
    pub n_c: f64,
    /// |S₋|²/S_z, the coherent magnon number.
    pub n_s: f64,
    /// Masing (or frame) frequency, rad/s.
    pub omega: f64,
    pub delta_cs: f64,
    pub regime: MasingRegime,
}

/// Resonant threshold κ_c^th = (4g²/κ_s)·N(w − γ)/(w + γ); 0 when no inversion is possible.
pub fn masing_threshold_kappa(r: &DerivedRates) -> f64 {
    if r.w <= r.gamma_eg || r.g == 0.0 {
        return 0.0;
    }
    4.0 * r.g * r.g / r.kappa_s * r.dark_inversion()
}

/// Inversion needed to sustain masing including the spin-cavity mismatch: κ_sκ_c(1 + δ²)/(4g²).
pub fn clamped_inversion(r: &DerivedRates) -> f64 {
    let d = r.mismatch();
    r.clamped_inversion() * (1.0 + d * d)
}

/// Threshold margin in spins: N(w−γ)/(w+γ) − κ_sκ_c(1+δ²)/(4g²). Positive means masing.
pub fn threshold_margin(r: &DerivedRates) -> f64 {
    r.dark_inversion() - clamped_inversion(r)
}

/// Strict masing condition, with the detuning correction.
pub fn is_masing(r: &DerivedRates) -> bool {
    r.g > 0.0 && threshold_margin(r) > 0.0
}

/// Pumping so hard that κ_s alone exceeds the collective emission rate.
/// Only meaningful when w_max itself lies above γ_eg.
pub fn is_over_pumped(r: &DerivedRates) -> bool {
    let w_max = r.w_max();
    w_max > r.gamma_eg && r.w > w_max
}

pub fn classify(r: &DerivedRates) -> MasingRegime {
    if is_masing(r) {
        MasingRegime::Masing
    } else if is_over_pumped(r) {
        MasingRegime::OverPumped
    } else {
        MasingRegime::BelowThreshold
    }
}

pub fn steady_state(r: &DerivedRates) -> Result<MeanFieldState> {
    r.validate()?;
    let omega = r.dragged_frequency();
    let delta_cs = r.mismatch();
    let regime = classify(r);
    if regime != MasingRegime::Masing {
        return Ok(MeanFieldState {
            s_z: r.dark_inversion(),
            s_minus: Complex64::new(0.0, 0.0),
            a: Complex64::new(0.0, 0.0),
            n_c: 0.0,
            n_s: 0.0,
            omega,
            delta_cs,
            regime,
        });
    }
    let s_z = clamped_inversion(r);
    // spin-to-photon flux, equal to κ_c n_c for any mismatch
    let flux = 0.5 * ((r.w - r.gamma_eg) * r.n_spins - (r.w + r.gamma_eg) * s_z);
    let n_c = flux / r.kappa_c;
    let a = Complex64::new(n_c.sqrt(), 0.0);
    let (_, ds) = frame_detunings(r);
    let half_ks = 0.5 * r.kappa_s;
    let s_minus = Complex64::new(0.0, r.g * s_z) * a / Complex64::new(half_ks, -ds);
    Ok(MeanFieldState {
        s_z,
        s_minus,
        a,
        n_c,
        n_s: s_minus.norm_sqr() / s_z,
        omega,
        delta_cs,
        regime,
    })
}

/// (Δ_c, Δ_s) = (ω − ω_c, ω − ω_s) at the pulled frequency, formed from the
/// spin-cavity difference so that no ~10¹⁰ rad/s cancellation is involved.
pub fn frame_detunings(r: &DerivedRates) -> (f64, f64) {
    let diff = r.omega_s - r.omega_c;
    let ksum = r.kappa_c + r.kappa_s;
    (r.kappa_c * diff / ksum, -r.kappa_s * diff / ksum)
}

/// Relative residuals of the three steady-state equations (cavity, spin, inversion)
/// in a frame with detunings `dc` = ω − ω_c and `ds` = ω − ω_s.
pub fn residuals(
    r: &DerivedRates,
    (dc, ds): (f64, f64),
    s_z: f64,
    s_minus: Complex64,
    a: Complex64,
) -> [f64; 3] {
    let i = Complex64::i();
    let cavity = relative_residual_c(&[
        -0.5 * r.kappa_c * a,
        i * dc * a,
        -i * r.g * s_minus,
    ]);
    let spin = relative_residual_c(&[
        -0.5 * r.kappa_s * s_minus,
        i * ds * s_minus,
        i * r.g * s_z * a,
    ]);
    let inversion = relative_residual(&[
        (r.w - r.gamma_eg) * r.n_spins,
        -(r.w + r.gamma_eg) * s_z,
        -4.0 * r.g * (a.conj() * s_minus).im,
    ]);
    [cavity, spin, inversion]
}

impl MeanFieldState {
    pub fn residuals(&self, r: &DerivedRates) -> [f64; 3] {
        residuals(r, frame_detunings(r), self.s_z, self.s_minus, self.a)
    }

    pub fn max_residual(&self, r: &DerivedRates) -> f64 {
        self.residuals(r).into_iter().fold(0.0, f64::max)
    }
}
