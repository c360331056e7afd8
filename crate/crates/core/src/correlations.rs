//! Second-order correlation closure, valid below and above threshold.
//!
//! Unknowns are the populations N_e, N_g, the spin-photon cross correlation
//! X = ⟨a†S₋⟩, the collective spin correlation C and the photon number n_c.
//! Eliminating everything in favour of the spin→photon flux F = wN_g − γN_e gives
//! a single quadratic a'F² + b'F − R₀ = 0 whose physical root is continuous in
//! g → 0. Working in F rather than S_z avoids the cancellation that otherwise
//! appears close to threshold.

use num_complex::Complex64;
use serde::Serialize;

use crate::constants::HBAR;
use crate::error::{MaserError, Result};
use crate::meanfield::{classify, is_masing, MasingRegime};
use crate::numeric::{golden_max, relative_residual, relative_residual_c};
use crate::params::DerivedRates;

/// Whether the cavity's thermal occupation drives the photon equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThermalPhotons {
    /// κ_c n_th drive kept at every operating point.
    #[default]
    Retained,
    /// Thermal drive removed (the usual simplification well above threshold).
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationState {
    pub n_e: f64,
    pub n_g: f64,
    pub s_z: f64,
    /// Total ⟨S₊S₋⟩ = (1 − 1/N)·C + N_e.
    pub spin_corr: f64,
    /// Collective (cross-spin) part C of the spin correlation.
    pub collective_corr: f64,
    /// ⟨a†S₋⟩.
    pub cross: Complex64,
    /// ⟨a†a⟩ including thermal photons when retained.
    pub n_c: f64,
    /// Emitted photons F/κ_c, i.e. n_c minus the thermal drive.
    pub n_coh: f64,
    /// C/S_z, defined only for S_z > 0.
    pub n_s: Option<f64>,
    /// Spin→photon flux wN_g − γN_e, s⁻¹.
    pub flux: f64,
    /// Thermal occupation actually used in the photon equation.
    pub n_th_drive: f64,
    /// Output power through the external port, W.
    pub p_out: f64,
    pub regime: MasingRegime,
}

pub fn closure_steady_state(r: &DerivedRates) -> Result<CorrelationState> {
    closure_steady_state_with(r, ThermalPhotons::Retained)
}

pub fn closure_steady_state_with(r: &DerivedRates, thermal: ThermalPhotons) -> Result<CorrelationState> {
    r.validate()?;
    let n = r.n_spins;
    let n_th = match thermal {
        ThermalPhotons::Retained => r.n_th,
        ThermalPhotons::Dropped => 0.0,
    };
    let delta = r.mismatch();
    let wsum = r.w + r.gamma_eg;
    let beta = 4.0 * r.g * r.g / ((r.kappa_s + r.kappa_c) * (1.0 + delta * delta));
    let d = (1.0 - 1.0 / n) / r.kappa_s + 1.0 / r.kappa_c;
    let s_a = r.dark_inversion();

    let r0 = beta * (0.5 * (n + s_a) + n_th * s_a);
    let a2 = 2.0 * beta * d / wsum;
    let b1 = 1.0 - beta * d * s_a + beta * (1.0 + 2.0 * n_th) / wsum;
    let disc = b1 * b1 + 4.0 * a2 * r0;
    if disc < 0.0 {
        // tolerate rounding-level negatives
        if disc < -1e-12 * b1 * b1 {
            return Err(MaserError::NoRealRoot { discriminant: disc });
        }
    }
    let sq = disc.max(0.0).sqrt();
    let flux = if a2 == 0.0 {
        r0 / b1
    } else if b1 >= 0.0 {
        2.0 * r0 / (b1 + sq)
    } else {
        (-b1 + sq) / (2.0 * a2)
    };

    let s_z = s_a - 2.0 * flux / wsum;
    let n_e = 0.5 * (n + s_z);
    let n_g = 0.5 * (n - s_z);
    let n_coh = flux / r.kappa_c;
    let n_c = n_th + n_coh;
    let collective_corr = s_z * flux / r.kappa_s;
    let spin_corr = (1.0 - 1.0 / n) * collective_corr + n_e;
    let cross = Complex64::new(-delta, 1.0) * (flux / (2.0 * r.g));
    let n_s = (s_z > 0.0).then(|| collective_corr / s_z);
    Ok(CorrelationState {
        n_e,
        n_g,
        s_z,
        spin_corr,
        collective_corr,
        cross: if r.g > 0.0 { cross } else { Complex64::new(0.0, 0.0) },
        n_c,
        n_coh,
        n_s,
        flux,
        n_th_drive: n_th,
        p_out: HBAR * r.omega_c * r.kappa_ex * n_c,
        regime: classify(r),
    })
}

/// Relative residuals of the four closure equations (populations, cross
/// correlation, spin correlation, photon number).
pub fn closure_residuals(r: &DerivedRates, cs: &CorrelationState) -> [f64; 4] {
    let i = Complex64::i();
    let n = r.n_spins;
    let k = 0.5 * (r.kappa_c + r.kappa_s);
    let det = r.omega_c - r.omega_s;
    let im_x = cs.cross.im;
    let pop = relative_residual(&[r.w * cs.n_g, -r.gamma_eg * cs.n_e, -2.0 * r.g * im_x]);
    let bracket = (1.0 - 1.0 / n) * cs.collective_corr + cs.n_e + cs.n_c * cs.s_z;
    let cross = relative_residual_c(&[-k * cs.cross, i * det * cs.cross, i * r.g * bracket]);
    let spin = relative_residual(&[-r.kappa_s * cs.collective_corr, 2.0 * r.g * cs.s_z * im_x]);
    let photon = relative_residual(&[
        -r.kappa_c * cs.n_c,
        2.0 * r.g * im_x,
        r.kappa_c * cs.n_th_drive,
    ]);
    [pop, cross, spin, photon]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationOptimum {
    pub w_opt: f64,
    pub corr_max: f64,
}

/// Closed-form optimum qw = 2Ng²/κ_c − 1/T2*, ⟨S₊S₋⟩ = N²/(8q)·(1 − κ_c/(2Ng²T2*))².
pub fn optimal_pump_for_correlation(r: &DerivedRates) -> Result<CorrelationOptimum> {
    let n = r.n_spins;
    let g2 = r.g * r.g;
    let w_opt = (2.0 * n * g2 / r.kappa_c - 1.0 / r.t2_star) / r.q;
    if !(w_opt > r.gamma_eg) || !is_masing(&r.with_pump(w_opt)) {
        return Err(MaserError::NotMasing);
    }
    let corr = 1.0 - r.kappa_c / (2.0 * n * g2 * r.t2_star);
    Ok(CorrelationOptimum {
        w_opt,
        corr_max: n * n / (8.0 * r.q) * corr * corr,
    })
}

/// Maximises the closure's total spin correlation over w by golden-section search
/// on log w around the closed-form optimum.
pub fn numeric_optimal_pump(r: &DerivedRates) -> Result<CorrelationOptimum> {
    let guess = optimal_pump_for_correlation(r)?;
    let lo = (guess.w_opt / 10.0).max(r.gamma_eg * (1.0 + 1e-9));
    let hi = guess.w_opt * 4.0;
    let corr_at = |lw: f64| {
        closure_steady_state(&r.with_pump(lw.exp()))
            .map(|c| c.spin_corr)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let (lw, corr_max) = golden_max(corr_at, lo.ln(), hi.ln(), 1e-10);
    Ok(CorrelationOptimum {
        w_opt: lw.exp(),
        corr_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{masing_threshold_kappa, steady_state};
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

    /// Straightforward oracle: solve the closure as a quadratic in S_z by
    /// eliminating the other unknowns (no flux reformulation), pick the root
    /// with the larger photon number that keeps n_c ≥ n_th·(1 − tiny).
    fn oracle(r: &DerivedRates, n_th: f64) -> (f64, f64) {
        let n = r.n_spins;
        let wsum = r.w + r.gamma_eg;
        let beta = 4.0 * r.g * r.g / (r.kappa_s + r.kappa_c);
        let d = (1.0 - 1.0 / n) / r.kappa_s + 1.0 / r.kappa_c;
        let s_a = r.dark_inversion();
        // F(S) = wsum (S_A − S)/2 ; F = β[D S F + (N+S)/2 + n_th S]
        // ⇒ β D wsum/2 · S² − [β D wsum/2 · S_A + wsum/2 + β/2 + β n_th] S + wsum/2·S_A − βN/2 = 0
        let qa = beta * d * wsum / 2.0;
        let qb = -(beta * d * wsum / 2.0 * s_a + wsum / 2.0 + beta / 2.0 + beta * n_th);
        let qc = wsum / 2.0 * s_a - beta * n / 2.0;
        let disc = qb * qb - 4.0 * qa * qc;
        let t = -0.5 * (qb - disc.sqrt() * qb.signum());
        let r1 = t / qa;
        let r2 = qc / t;
        let s = r1.min(r2);
        let f = wsum * (s_a - s) / 2.0;
        (s, n_th + f / r.kappa_c)
    }

    #[test]
    fn baseline_point() {
        let r = p0(1e5, 1e5);
        let cs = closure_steady_state(&r).unwrap();
        assert_relative_eq!(cs.s_z, 1.671e13, max_relative = 1e-3);
        assert_relative_eq!(cs.n_c, 5.49e12, max_relative = 1e-3);
        assert_relative_eq!(cs.p_out, 2.06e-6, max_relative = 5e-3);
        let (s, nc) = oracle(&r, r.n_th);
        assert_relative_eq!(cs.s_z, s, max_relative = 1e-9);
        assert_relative_eq!(cs.n_c, nc, max_relative = 1e-9);
        assert!(closure_residuals(&r, &cs).iter().all(|&x| x <= 1e-9));
        assert!(cs.spin_corr / cs.n_e > 1e6);
        assert_eq!(cs.regime, MasingRegime::Masing);
    }

    #[test]
    fn masing_root_matches_clamped_inversion() {
        let r = p0(1e5, 1e5);
        let cs = closure_steady_state_with(&r, ThermalPhotons::Dropped).unwrap();
        assert_relative_eq!(cs.s_z, r.clamped_inversion(), max_relative = 1e-6);
        let mf = steady_state(&r).unwrap();
        assert_relative_eq!(cs.n_c, mf.n_c, max_relative = 1e-6);
        assert_relative_eq!(r.kappa_c * cs.n_c, r.kappa_s * cs.n_s.unwrap(), max_relative = 1e-9);
    }

    #[test]
    fn zero_inversion_is_incoherent() {
        let r = p0(1e5, 200.0);
        let cs = closure_steady_state(&r).unwrap();
        assert!(cs.s_z.abs() <= 1e-6 * r.n_spins, "S_z = {}", cs.s_z);
        let ratio = cs.spin_corr / cs.n_e;
        assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
        // spontaneous emission adds N_e·(κ_s-weighted) photons on top of the thermal floor
        assert_relative_eq!(cs.n_c, r.n_th, max_relative = 1e-3);
        assert_eq!(cs.regime, MasingRegime::BelowThreshold);
    }

    #[test]
    fn below_threshold_zero_temperature_is_uncorrelated() {
        let mut r = p0(1e4, 1e5);
        r.n_th = 0.0;
        let cs = closure_steady_state(&r).unwrap();
        let ratio = cs.spin_corr / cs.n_e;
        assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
        assert_relative_eq!(cs.s_z, r.dark_inversion(), max_relative = 1e-3);
    }

    #[test]
    fn below_threshold_keeps_thermal_floor() {
        let r = p0(1e4, 1e5);
        let cs = closure_steady_state(&r).unwrap();
        assert!(cs.n_c >= r.n_th);
        // the oracle forms F from S_A − S, so its photon number carries ~1e−7 cancellation error here
        let (s, nc) = oracle(&r, r.n_th);
        assert_relative_eq!(cs.s_z, s, max_relative = 1e-12);
        assert_relative_eq!(cs.n_c, nc, max_relative = 1e-6);
        assert!(closure_residuals(&r, &cs).iter().all(|&x| x <= 1e-9));
    }

    #[test]
    fn correlation_optimum() {
        let r = p0(1e5, 1e5);
        let opt = optimal_pump_for_correlation(&r).unwrap();
        assert_relative_eq!(opt.w_opt, 2.68e5, max_relative = 2e-3);
        assert_relative_eq!(opt.corr_max, 5.1e24, max_relative = 5e-3);
        let num = numeric_optimal_pump(&r).unwrap();
        assert_relative_eq!(num.corr_max, opt.corr_max, max_relative = 1e-2);
        let at_opt = closure_steady_state(&r.with_pump(opt.w_opt)).unwrap();
        // half inversion holds only loosely away from the good-cavity limit
        assert!((at_opt.s_z / (0.5 * r.n_spins) - 1.0).abs() < 0.35);
    }

    #[test]
    fn correlation_optimum_good_cavity_limit() {
        let r = p0(1e5, 1e5);
        let n = r.n_spins;
        assert_relative_eq!(n * n / (8.0 * r.q), 1.0986e25, max_relative = 1e-4);
        let tiny_kc = r.with_kappa_c(1e-3);
        let opt = optimal_pump_for_correlation(&tiny_kc).unwrap();
        assert_relative_eq!(opt.corr_max, n * n / (8.0 * r.q), max_relative = 1e-6);
    }

    #[test]
    fn no_masing_anywhere_is_an_error() {
        let r = p0(1e3, 1e5);
        assert_eq!(optimal_pump_for_correlation(&r), Err(MaserError::NotMasing));
    }

    #[test]
    fn continuity_across_threshold() {
        let r0 = p0(1e5, 1e5);
        let kth = masing_threshold_kappa(&r0);
        let below = closure_steady_state(&r0.with_kappa_c(kth * (1.0 + 1e-7))).unwrap();
        let above = closure_steady_state(&r0.with_kappa_c(kth * (1.0 - 1e-7))).unwrap();
        assert_relative_eq!(below.n_c, above.n_c, max_relative = 1e-2);
        assert_relative_eq!(below.spin_corr, above.spin_corr, max_relative = 1e-2);
    }

    #[test]
    fn mean_field_agreement_well_above_threshold() {
        for (q, w) in [(1e5, 1e5), (1e6, 1e5), (1e6, 1e4), (1e7, 1e3)] {
            let r = p0(q, w);
            assert!(masing_threshold_kappa(&r) >= 2.0 * r.kappa_c);
            let cs = closure_steady_state(&r).unwrap();
            let mf = steady_state(&r).unwrap();
            assert!((cs.n_c - mf.n_c).abs() / mf.n_c <= 1e-3);
        }
    }

    #[test]
    fn superradiant_scaling_good_cavity() {
        let r = p0(1e7, 1e5);
        let pout = |r: &DerivedRates| {
            let w = optimal_pump_for_correlation(r).unwrap().w_opt;
            closure_steady_state(&r.with_pump(w)).unwrap().p_out
        };
        let ratio = pout(&r.with_spins(2.0 * r.n_spins)) / pout(&r);
        assert!((ratio / 4.0 - 1.0).abs() < 0.01, "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn closure_invariants(lq in 3.0f64..7.5, lw in 1.0f64..6.3, t in 0.0f64..400.0) {
            let r = derive_rates(&SystemParams {
                quality_factor: 10f64.powf(lq),
                pump_rate: 10f64.powf(lw),
                temperature_k: t,
                ..SystemParams::baseline()
            }).unwrap();
            let cs = closure_steady_state(&r).unwrap();
            prop_assert!(((cs.n_e + cs.n_g) / r.n_spins - 1.0).abs() <= 1e-9);
            prop_assert!(cs.n_e >= 0.0 && cs.n_g >= 0.0);
            prop_assert!(cs.spin_corr >= 0.0);
            prop_assert!(cs.n_c >= r.n_th * (1.0 - 1e-9) || cs.flux < 0.0);
            prop_assert!(cs.n_c >= 0.0);
            let flow = r.w * cs.n_g - r.gamma_eg * cs.n_e;
            prop_assert!((r.kappa_c * (cs.n_c - r.n_th) - flow).abs()
                <= 1e-9 * (r.w * cs.n_g + r.gamma_eg * cs.n_e));
            let res = closure_residuals(&r, &cs);
            prop_assert!(res.iter().all(|&x| x <= 1e-9), "{:?}", res);
        }
    }
}
