//! Phase diffusion of the masing mode: Schawlow–Townes coefficient, coherence
//! time, linewidth and the phase-noise spectrum. Amplitude fluctuations are neglected.

use serde::Serialize;

use crate::correlations::{closure_steady_state, CorrelationState};
use crate::error::{MaserError, Result};
use crate::meanfield::{is_masing, threshold_margin, MasingRegime};
use crate::numeric::{bisect, golden_max, logspace};
use crate::params::DerivedRates;
use crate::constants::TWO_PI;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseNoiseResult {
    /// Phase diffusion coefficient γ_ST, s⁻¹.
    pub gamma_st: f64,
    /// 2/γ_ST, s.
    pub t_coh: f64,
    /// γ_ST/2π, Hz.
    pub fwhm_linewidth: f64,
    /// n_th + N_e/S_z.
    pub n_incoh: f64,
    /// Emitted photon number used in the diffusion rate.
    pub n_coh: f64,
    /// Coherent magnon number.
    pub n_s: f64,
    pub spectrum: Option<Vec<SpectrumPoint>>,
}

/// One sample of the photon phase-noise spectrum S_c(Ω)/(4n_c), split into its
/// spin-noise and cavity-noise contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub omega: f64,
    pub total: f64,
    pub spin_term: f64,
    pub cavity_term: f64,
}

fn require_masing(cs: &CorrelationState) -> Result<(f64, f64)> {
    match (cs.regime, cs.n_s) {
        (MasingRegime::Masing, Some(n_s)) if cs.n_coh > 0.0 && cs.s_z > 0.0 => Ok((cs.n_coh, n_s)),
        _ => Err(MaserError::NotMasing),
    }
}

pub fn incoherent_number(r: &DerivedRates, cs: &CorrelationState) -> f64 {
    r.n_th + cs.n_e / cs.s_z
}

pub fn schawlow_townes(r: &DerivedRates, cs: &CorrelationState) -> Result<PhaseNoiseResult> {
    let (n_coh, n_s) = require_masing(cs)?;
    let n_incoh = incoherent_number(r, cs);
    let share = r.kappa_s / (r.kappa_c + r.kappa_s);
    let gamma_st = n_incoh * r.kappa_c / (2.0 * n_coh) * share * share;
    Ok(PhaseNoiseResult {
        gamma_st,
        t_coh: 2.0 / gamma_st,
        fwhm_linewidth: gamma_st / TWO_PI,
        n_incoh,
        n_coh,
        n_s,
        spectrum: None,
    })
}

/// Coherence time written as 4(1/κ_c + 1/κ_s)(n_c + n_s)/n_incoh.
pub fn coherence_time_photon_magnon(r: &DerivedRates, cs: &CorrelationState) -> Result<f64> {
    let (n_coh, n_s) = require_masing(cs)?;
    Ok(4.0 * (1.0 / r.kappa_c + 1.0 / r.kappa_s) * (n_coh + n_s) / incoherent_number(r, cs))
}

/// Closure solve followed by [`schawlow_townes`].
pub fn coherence(r: &DerivedRates) -> Result<PhaseNoiseResult> {
    schawlow_townes(r, &closure_steady_state(r)?)
}

/// Log-spaced grid from 10⁻⁶ to 10 times (κ_c + κ_s)/2, 200 points.
pub fn default_grid(r: &DerivedRates) -> Vec<f64> {
    let k = 0.5 * (r.kappa_c + r.kappa_s);
    logspace(1e-6 * k, 10.0 * k, 200)
}

pub fn phase_noise_spectrum(
    r: &DerivedRates,
    cs: &CorrelationState,
    omega_grid: &[f64],
) -> Result<Vec<SpectrumPoint>> {
    let (n_coh, _) = require_masing(cs)?;
    let k = 0.5 * (r.kappa_c + r.kappa_s);
    omega_grid
        .iter()
        .map(|&omega| {
            if omega == 0.0 {
                return Err(MaserError::ZeroFrequencyPole);
            }
            let o2 = omega * omega;
            let denom = 4.0 * n_coh * o2 * (k * k + o2);
            let spin_term = r.g * r.g * r.n_spins * r.kappa_s / denom;
            let cavity_term =
                (0.25 * r.kappa_s * r.kappa_s + o2) * r.kappa_c * (1.0 + 2.0 * r.n_th) / denom;
            Ok(SpectrumPoint {
                omega,
                total: spin_term + cavity_term,
                spin_term,
                cavity_term,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherenceOptimum {
    /// Spin-correlation optimum (2Ng²/κ_c − 1/T2*)/q, which tends to 2Ng²/(qκ_c)
    /// in the good-cavity limit.
    pub w_opt_analytic: f64,
    /// 2N²g²/(q n_th κ_c³).
    pub t_coh_opt_analytic: f64,
    pub w_opt_numeric: f64,
    pub t_coh_opt_numeric: f64,
}

/// Pump interval over which the masing condition holds, with everything but w fixed.
pub fn masing_pump_interval(r: &DerivedRates) -> Result<(f64, f64)> {
    let margin = |lw: f64| threshold_margin(&r.with_pump(lw.exp()));
    let guess = 2.0 * r.n_spins * r.g * r.g / (r.q * r.kappa_c);
    let mut peak = None;
    if guess > r.gamma_eg && margin(guess.ln()) > 0.0 {
        peak = Some(guess.ln());
    } else {
        for w in logspace(r.gamma_eg * 1.0001, 1e12, 400) {
            if margin(w.ln()) > 0.0 {
                peak = Some(w.ln());
                break;
            }
        }
    }
    let peak = peak.ok_or(MaserError::NotMasing)?;
    let lo = bisect(margin, r.gamma_eg.ln(), peak, 1e-13).ok_or(MaserError::NotMasing)?;
    let mut top = peak + 1.0;
    while margin(top) > 0.0 {
        top += 1.0;
    }
    let hi = bisect(margin, peak, top, 1e-13).ok_or(MaserError::NotMasing)?;
    Ok((lo.exp(), hi.exp()))
}

/// Optimal pump rate for coherence: closed form plus a 1-D numerical maximisation of
/// T_coh over w (via [`DerivedRates::with_pump`]).
pub fn optimal_coherence(r: &DerivedRates) -> Result<CoherenceOptimum> {
    let n = r.n_spins;
    let g2 = r.g * r.g;
    let w_a = (2.0 * n * g2 / r.kappa_c - 1.0 / r.t2_star) / r.q;
    let t_a = 2.0 * n * n * g2 / (r.q * r.n_th * r.kappa_c.powi(3));
    let (lo, hi) = masing_pump_interval(r)?;
    let t_at = |lw: f64| {
        let rw = r.with_pump(lw.exp());
        if !is_masing(&rw) {
            return 0.0;
        }
        coherence(&rw).map(|p| p.t_coh).unwrap_or(0.0)
    };
    let span = (hi / lo).ln();
    let (lw, t) = golden_max(t_at, lo.ln() + 1e-9 * span, hi.ln() - 1e-9 * span, 1e-12);
    Ok(CoherenceOptimum {
        w_opt_analytic: w_a,
        t_coh_opt_analytic: t_a,
        w_opt_numeric: lw.exp(),
        t_coh_opt_numeric: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_rates, SystemParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p0(q: f64, w: f64) -> DerivedRates {
        derive_rates(&SystemParams {
            quality_factor: q,
            pump_rate: w,
            ..SystemParams::baseline()
        })
        .unwrap()
    }

    #[test]
    fn baseline_coherence() {
        let r = p0(1e5, 1e5);
        let pn = coherence(&r).unwrap();
        assert!((5.7e4..6.3e4).contains(&pn.t_coh), "T_coh {}", pn.t_coh);
        assert_relative_eq!(pn.t_coh, 5.97e4, max_relative = 5e-3);
        assert!((4.5e-6..6.0e-6).contains(&pn.fwhm_linewidth));
        assert_eq!(pn.t_coh * pn.gamma_st, 2.0);
        // independent: n_incoh from the mean-field inversion
        let s = r.clamped_inversion();
        let n_e = 0.5 * (r.n_spins + s);
        assert_relative_eq!(pn.n_incoh, r.n_th + n_e / s, max_relative = 1e-6);
    }

    #[test]
    fn two_forms_agree() {
        let r = p0(1e5, 1e5);
        let cs = closure_steady_state(&r).unwrap();
        let pn = schawlow_townes(&r, &cs).unwrap();
        let t4 = coherence_time_photon_magnon(&r, &cs).unwrap();
        assert_relative_eq!(t4, pn.t_coh, max_relative = 1e-12);
        assert_relative_eq!(cs.n_coh / cs.n_s.unwrap(), r.kappa_s / r.kappa_c, max_relative = 1e-9);
    }

    #[test]
    fn not_masing_is_an_error() {
        let r = p0(1e4, 1e5);
        assert_eq!(coherence(&r), Err(MaserError::NotMasing));
        let cs = closure_steady_state(&r).unwrap();
        assert_eq!(phase_noise_spectrum(&r, &cs, &[1.0]), Err(MaserError::NotMasing));
    }

    #[test]
    fn spectrum_low_frequency_plateau() {
        let r = p0(1e5, 1e5);
        let cs = closure_steady_state(&r).unwrap();
        let pn = schawlow_townes(&r, &cs).unwrap();
        let k = 0.5 * (r.kappa_c + r.kappa_s);
        let sp = phase_noise_spectrum(&r, &cs, &[1e-3 * k]).unwrap()[0];
        let o = sp.omega;
        assert_relative_eq!(o * o * sp.total, pn.gamma_st, max_relative = 1e-3);
    }

    #[test]
    fn spectrum_roll_off_at_half_width() {
        let r = p0(1e5, 1e5);
        let cs = closure_steady_state(&r).unwrap();
        let k = 0.5 * (r.kappa_c + r.kappa_s);
        let pts = phase_noise_spectrum(&r, &cs, &[1e-6 * k, k]).unwrap();
        let (lo, at) = (pts[0], pts[1]);
        let w2 = |p: SpectrumPoint| (p.omega * p.omega * p.spin_term, p.omega * p.omega * p.cavity_term);
        let (spin_lo, cav_lo) = w2(lo);
        let (spin_k, cav_k) = w2(at);
        assert_relative_eq!(spin_k / spin_lo, 0.5, max_relative = 1e-9);
        // cavity term: (κ_s²/4 + K²)/(2 K²) × its plateau value (κ_s²/4)/K²
        let ks2 = 0.25 * r.kappa_s * r.kappa_s;
        assert_relative_eq!(cav_k / cav_lo, (ks2 + k * k) / (2.0 * ks2), max_relative = 1e-9);
    }

    #[test]
    fn spectrum_without_thermal_drive() {
        let mut r = p0(1e5, 1e5);
        r.n_th = 0.0;
        let cs = closure_steady_state(&r).unwrap();
        let pts = phase_noise_spectrum(&r, &cs, &default_grid(&r)).unwrap();
        assert_eq!(pts.len(), 200);
        for p in pts {
            let o2 = p.omega * p.omega;
            let k = 0.5 * (r.kappa_c + r.kappa_s);
            let cav = (0.25 * r.kappa_s * r.kappa_s + o2) * r.kappa_c / (4.0 * cs.n_coh * o2 * (k * k + o2));
            assert_relative_eq!(p.cavity_term, cav, max_relative = 1e-12);
            assert!(p.total > 0.0);
        }
    }

    #[test]
    fn zero_frequency_pole() {
        let r = p0(1e5, 1e5);
        let cs = closure_steady_state(&r).unwrap();
        assert_eq!(phase_noise_spectrum(&r, &cs, &[1.0, 0.0]), Err(MaserError::ZeroFrequencyPole));
    }

    #[test]
    fn gamma_vanishes_with_many_photons() {
        let r = p0(1e5, 1e5);
        let mut cs = closure_steady_state(&r).unwrap();
        let g0 = schawlow_townes(&r, &cs).unwrap().gamma_st;
        cs.n_coh *= 1e6;
        let g1 = schawlow_townes(&r, &cs).unwrap().gamma_st;
        assert_relative_eq!(g1 / g0, 1e-6, max_relative = 1e-12);
    }

    #[test]
    fn analytic_optimum_at_baseline() {
        let r = p0(1e5, 1e5);
        let opt = optimal_coherence(&r).unwrap();
        assert_relative_eq!(opt.t_coh_opt_analytic, 1.99e5, max_relative = 5e-3);
        assert_relative_eq!(opt.w_opt_analytic, 2.7e5, max_relative = 1e-2);
        // away from the good-cavity limit the numerical optimum is lower
        assert!(opt.t_coh_opt_numeric < opt.t_coh_opt_analytic);
        assert!(opt.t_coh_opt_numeric > coherence(&r).unwrap().t_coh);
    }

    #[test]
    fn analytic_scaling() {
        let r = p0(1e5, 1e5);
        let base = optimal_coherence(&r).unwrap();
        let n2 = optimal_coherence(&r.with_spins(2.0 * r.n_spins)).unwrap();
        assert_relative_eq!(n2.t_coh_opt_analytic / base.t_coh_opt_analytic, 4.0, max_relative = 1e-12);
        let q2 = optimal_coherence(&r.with_kappa_c(0.5 * r.kappa_c)).unwrap();
        assert_relative_eq!(q2.t_coh_opt_analytic / base.t_coh_opt_analytic, 8.0, max_relative = 1e-12);
        let good = p0(1e7, 1e5);
        let ratio = optimal_coherence(&good.with_kappa_c(0.5 * good.kappa_c)).unwrap().w_opt_analytic
            / optimal_coherence(&good).unwrap().w_opt_analytic;
        assert_relative_eq!(ratio, 2.0, max_relative = 1e-2);
    }

    #[test]
    fn numeric_optimum_good_cavity() {
        let r = p0(1e6, 1e5);
        let opt = optimal_coherence(&r).unwrap();
        let rel = (opt.t_coh_opt_numeric / opt.t_coh_opt_analytic - 1.0).abs();
        assert!(rel < 0.10, "relative gap {rel}");
    }

    #[test]
    fn pump_interval_brackets_masing() {
        let r = p0(1e5, 1e5);
        let (lo, hi) = masing_pump_interval(&r).unwrap();
        assert!(lo > r.gamma_eg && hi > lo);
        assert!(is_masing(&r.with_pump(lo * 1.001)));
        assert!(!is_masing(&r.with_pump(lo * 0.999)));
        assert!(!is_masing(&r.with_pump(hi * 1.001)));
        assert_relative_eq!(hi, r.w_max(), max_relative = 2e-2);
    }

    proptest! {
        #[test]
        fn identity_and_positivity(lq in 4.8f64..7.5, lw in 3.0f64..5.5, lo in -6.0f64..1.0) {
            let r = p0(10f64.powf(lq), 10f64.powf(lw));
            prop_assume!(is_masing(&r));
            let cs = closure_steady_state(&r).unwrap();
            let pn = schawlow_townes(&r, &cs).unwrap();
            let t4 = coherence_time_photon_magnon(&r, &cs).unwrap();
            prop_assert!((t4 / pn.t_coh - 1.0).abs() <= 1e-12);
            prop_assert!(pn.gamma_st > 0.0);
            let k = 0.5 * (r.kappa_c + r.kappa_s);
            let sp = phase_noise_spectrum(&r, &cs, &[10f64.powf(lo) * k, -10f64.powf(lo) * k]).unwrap();
            prop_assert!(sp[0].total > 0.0 && sp[1].total > 0.0);
        }
    }
}
