//! Built-in golden-value suite behind `--check`.
//!
//! Each check recomputes one headline number from scratch at the reference
//! operating points and compares it with an accepted window.

use serde::Serialize;

use crate::amplifier::{drive_steady_state, DriveSpec};
use crate::constants::TWO_PI;
use crate::error::{MaserError, Result};
use crate::linewidth::coherence;
use crate::meanfield::masing_threshold_kappa;
use crate::params::{derive_rates, thermal_occupation, DerivedRates, SystemParams};
use crate::sensitivity::sensitivities;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenCheck {
    pub name: &'static str,
    pub unit: &'static str,
    /// `None` when the computation itself failed.
    pub value: Option<f64>,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
    pub error: Option<String>,
}

fn check(name: &'static str, unit: &'static str, lo: f64, hi: f64, v: Result<f64>) -> GoldenCheck {
    match v {
        Ok(x) => GoldenCheck { name, unit, value: Some(x), lo, hi, pass: x >= lo && x <= hi, error: None },
        Err(e) => GoldenCheck { name, unit, value: None, lo, hi, pass: false, error: Some(e.to_string()) },
    }
}

fn at(q: f64, w: f64) -> Result<DerivedRates> {
    derive_rates(&SystemParams { quality_factor: q, pump_rate: w, ..SystemParams::baseline() })
}

pub fn run_checks() -> Vec<GoldenCheck> {
    let cross = at(1e5, 1e5);
    let pn = cross.as_ref().map_err(Clone::clone).and_then(coherence);
    let sens = match (&cross, &pn) {
        (Ok(r), Ok(p)) => sensitivities(r, p),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    let amp = at(4e4, 1e5).and_then(|r| {
        let sol = drive_steady_state(&r, &DriveSpec::resonant(&r, 1e-15))?;
        sol.stable_branch()
            .copied()
            .ok_or_else(|| MaserError::Domain("no unique stable branch".into()))
    });

    vec![
        check("t_coh", "s", 5.7e4, 6.3e4, pn.as_ref().map(|p| p.t_coh).map_err(Clone::clone)),
        check("fwhm_linewidth", "Hz", 4.5e-6, 6.0e-6, pn.as_ref().map(|p| p.fwhm_linewidth).map_err(Clone::clone)),
        check("delta_b", "T/sqrt(Hz)", 0.95e-12, 1.10e-12, sens.as_ref().map(|s| s.delta_b_sqrt_tm).map_err(Clone::clone)),
        check("delta_x", "m/sqrt(Hz)", 15.2e-15, 16.8e-15, sens.as_ref().map(|s| s.delta_x_sqrt_tm).map_err(Clone::clone)),
        check("gain_db", "dB", 24.5, 25.5, amp.as_ref().map(|b| b.gain_db).map_err(Clone::clone)),
        check(
            "t_n",
            "K",
            0.147,
            0.157,
            amp.as_ref()
                .map_err(Clone::clone)
                .and_then(|b| b.t_n.ok_or_else(|| MaserError::Domain("T_n undefined".into()))),
        ),
        check("n_th", "", 2040.0, 2130.0, Ok(thermal_occupation(TWO_PI * 3.0e9, 300.0))),
        check("w_max", "1/s", 5.30e5, 5.40e5, cross.as_ref().map(|r| r.w_max()).map_err(Clone::clone)),
        check(
            "q_threshold",
            "",
            4.3e4,
            4.7e4,
            cross.as_ref().map(|r| r.omega_c / masing_threshold_kappa(r)).map_err(Clone::clone),
        ),
    ]
}
