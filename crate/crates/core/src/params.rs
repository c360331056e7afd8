//! Device parameters and the rate-level quantities derived from them.
//!
//! [`SystemParams`] holds what an experimentalist would write down (cavity
//! frequency and Q, diamond volume and NV density, pump rate, temperature).
//! [`derive_rates`] turns it into [`DerivedRates`], the angular-frequency and
//! decay-rate set every other module works with. Configs and reports use Hz;
//! everything inside `DerivedRates` is rad/s or s⁻¹.

use serde::{Deserialize, Serialize};

use crate::constants::{C_LIGHT, HBAR, K_B, MU_0, TESLA_PER_GAUSS, TWO_PI};
use crate::error::{MaserError, Result};

/// Raw physical inputs of the spin-cavity system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Cavity resonance ν_c, Hz.
    pub cavity_frequency_hz: f64,
    /// Loaded quality factor Q.
    pub quality_factor: f64,
    /// Per-spin optical pump rate w, s⁻¹.
    pub pump_rate: f64,
    /// Environment temperature, K.
    pub temperature_k: f64,
    /// Ensemble dephasing time T2*, s.
    pub t2_star_s: f64,
    /// Spin-lattice relaxation rate γ_eg = 1/T1, s⁻¹.
    pub gamma_eg: f64,
    /// Pump-induced magnon decay multiplier q (κ_s gets q·w).
    pub pump_decay_multiplier: f64,
    /// NV gyromagnetic ratio, Hz/G.
    pub gyromagnetic_hz_per_gauss: f64,
    /// Ground-state zero-field splitting, Hz.
    pub zero_field_splitting_hz: f64,
    /// Applied field along the NV axis, G. `None` means exact spin-cavity resonance.
    pub field_gauss: Option<f64>,
    /// Cavity length L, m.
    pub cavity_length_m: f64,
    /// Effective cavity mode volume, m³.
    pub mode_volume_m3: f64,
    /// NV concentration, m⁻³.
    pub nv_density_m3: f64,
    /// Diamond volume, m³.
    pub diamond_volume_m3: f64,
    /// Orientation × hyperfine counting divisor (12 for four NV axes and three ¹⁴N lines).
    pub orientation_divisor: f64,
    /// Fraction of cavity decay that goes into the input/output port.
    pub kappa_ex_fraction: f64,
    /// Optional single-spin coupling g/2π, Hz. Overrides the mode-volume estimate.
    pub coupling_hz: Option<f64>,
}

impl SystemParams {
    /// The operating point of the room-temperature diamond maser contour maps:
    /// 3 GHz cavity, Q = 10⁵, w = 10⁵ s⁻¹, 3×3×0.5 mm³ diamond at 10¹⁷ cm⁻³,
    /// T2* = 0.5 μs, γ_eg = 200 s⁻¹, 300 K, g/2π = 0.02 Hz.
    pub fn baseline() -> Self {
        SystemParams {
            cavity_frequency_hz: 3.0e9,
            quality_factor: 1.0e5,
            pump_rate: 1.0e5,
            temperature_k: 300.0,
            t2_star_s: 0.5e-6,
            gamma_eg: 200.0,
            pump_decay_multiplier: 16.0,
            gyromagnetic_hz_per_gauss: 2.8e6,
            zero_field_splitting_hz: 2.87e9,
            field_gauss: None,
            cavity_length_m: 0.05,
            mode_volume_m3: 2.0e-6,
            nv_density_m3: 1.0e23,
            diamond_volume_m3: 3.0e-3 * 3.0e-3 * 0.5e-3,
            orientation_divisor: 12.0,
            kappa_ex_fraction: 1.0,
            coupling_hz: Some(0.02),
        }
    }

    /// Same device, but with g taken from the mode-volume estimate.
    pub fn baseline_geometric() -> Self {
        SystemParams {
            coupling_hz: None,
            ..Self::baseline()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cavity_frequency_hz", self.cavity_frequency_hz),
            ("quality_factor", self.quality_factor),
            ("pump_rate", self.pump_rate),
            ("t2_star_s", self.t2_star_s),
            ("gamma_eg", self.gamma_eg),
            ("pump_decay_multiplier", self.pump_decay_multiplier),
            ("gyromagnetic_hz_per_gauss", self.gyromagnetic_hz_per_gauss),
            ("zero_field_splitting_hz", self.zero_field_splitting_hz),
            ("cavity_length_m", self.cavity_length_m),
            ("mode_volume_m3", self.mode_volume_m3),
            ("nv_density_m3", self.nv_density_m3),
            ("diamond_volume_m3", self.diamond_volume_m3),
            ("orientation_divisor", self.orientation_divisor),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(MaserError::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        if !(self.temperature_k.is_finite() && self.temperature_k >= 0.0) {
            return Err(MaserError::InvalidParameter {
                name: "temperature_k",
                reason: format!("must be finite and >= 0, got {}", self.temperature_k),
            });
        }
        if !(0.0..=1.0).contains(&self.kappa_ex_fraction) {
            return Err(MaserError::InvalidParameter {
                name: "kappa_ex_fraction",
                reason: format!("must lie in [0, 1], got {}", self.kappa_ex_fraction),
            });
        }
        if let Some(b) = self.field_gauss {
            if !(b.is_finite() && b >= 0.0) {
                return Err(MaserError::InvalidParameter {
                    name: "field_gauss",
                    reason: format!("must be finite and >= 0, got {b}"),
                });
            }
        }
        if let Some(g) = self.coupling_hz {
            if !(g.is_finite() && g >= 0.0) {
                return Err(MaserError::InvalidParameter {
                    name: "coupling_hz",
                    reason: format!("must be finite and >= 0, got {g}"),
                });
            }
        }
        Ok(())
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::baseline()
    }
}

/// Rate-level description of the system. Angular frequencies in rad/s, rates in s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub omega_c: f64,
    pub omega_s: f64,
    /// Single-spin coupling g, rad/s.
    pub g: f64,
    /// Effective number of spins coupled to the mode.
    pub n_spins: f64,
    pub kappa_c: f64,
    pub kappa_ex: f64,
    /// Magnon decay q·w + 2/T2* + γ_eg.
    pub kappa_s: f64,
    pub n_th: f64,
    pub gamma_eg: f64,
    pub w: f64,
    pub q: f64,
    pub t2_star: f64,
    /// Gyromagnetic ratio in rad·s⁻¹·T⁻¹.
    pub gamma_nv: f64,
    pub cavity_length: f64,
    pub temperature: f64,
    /// False when |−1⟩ lies above |0⟩, where optical pumping cannot invert the transition.
    pub pump_inverts: bool,
}

impl DerivedRates {
    /// (w − γ_eg)/(w + γ_eg), the steady inversion per spin without stimulated emission.
    pub fn pump_ratio(&self) -> f64 {
        (self.w - self.gamma_eg) / (self.w + self.gamma_eg)
    }

    /// Dark-state inversion N(w − γ_eg)/(w + γ_eg).
    pub fn dark_inversion(&self) -> f64 {
        self.n_spins * self.pump_ratio()
    }

    /// κ_sκ_c/(4g²), the inversion clamped by stimulated emission at resonance.
    pub fn clamped_inversion(&self) -> f64 {
        self.kappa_s * self.kappa_c / (4.0 * self.g * self.g)
    }

    /// Normalized spin-cavity mismatch δ_cs = 2(ω_c − ω_s)/(κ_c + κ_s).
    pub fn mismatch(&self) -> f64 {
        2.0 * (self.omega_c - self.omega_s) / (self.kappa_c + self.kappa_s)
    }

    /// Pulled masing frequency (κ_c ω_s + κ_s ω_c)/(κ_c + κ_s).
    pub fn dragged_frequency(&self) -> f64 {
        self.omega_c + self.kappa_c * (self.omega_s - self.omega_c) / (self.kappa_c + self.kappa_s)
    }

    /// Over-pumping ceiling w_max = (4g²N/κ_c − 2/T2*)/q.
    pub fn w_max(&self) -> f64 {
        (4.0 * self.g * self.g * self.n_spins / self.kappa_c - 2.0 / self.t2_star) / self.q
    }

    /// Magnon decay for pump rate `w` with the other contributions unchanged.
    pub fn kappa_s_at(&self, w: f64) -> f64 {
        self.q * w + 2.0 / self.t2_star + self.gamma_eg
    }

    /// Copy with a different pump rate; κ_s is recomposed.
    pub fn with_pump(&self, w: f64) -> Self {
        DerivedRates {
            w,
            kappa_s: self.kappa_s_at(w),
            ..*self
        }
    }

    /// Copy with a different cavity decay; the external-port fraction is kept.
    pub fn with_kappa_c(&self, kappa_c: f64) -> Self {
        let fraction = if self.kappa_c > 0.0 {
            self.kappa_ex / self.kappa_c
        } else {
            1.0
        };
        DerivedRates {
            kappa_c,
            kappa_ex: fraction * kappa_c,
            ..*self
        }
    }

    /// Copy with a different spin count.
    pub fn with_spins(&self, n_spins: f64) -> Self {
        DerivedRates { n_spins, ..*self }
    }

    /// Cavity quality factor implied by κ_c.
    pub fn quality_factor(&self) -> f64 {
        self.omega_c / self.kappa_c
    }

    /// ħω_c/k_B in kelvin.
    pub fn photon_temperature(&self) -> f64 {
        HBAR * self.omega_c / K_B
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_c", self.omega_c),
            ("kappa_c", self.kappa_c),
            ("kappa_s", self.kappa_s),
            ("n_spins", self.n_spins),
            ("w", self.w),
            ("gamma_eg", self.gamma_eg),
            ("t2_star", self.t2_star),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(MaserError::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        let non_negative = [
            ("omega_s", self.omega_s),
            ("g", self.g),
            ("kappa_ex", self.kappa_ex),
            ("n_th", self.n_th),
        ];
        for (name, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(MaserError::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {value}"),
                });
            }
        }
        Ok(())
    }
}

/// Spin transition frequency and level ordering at a given field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionFrequency {
    /// |γ_NV B − D|, Hz.
    pub hz: f64,
    /// True when |−1⟩ has been pushed below |0⟩, so the pump can invert.
    pub pump_inverts: bool,
}

/// Frequency of the |−1⟩ ↔ |0⟩ transition at field `field_gauss`.
pub fn transition_frequency(field_gauss: f64, p: &SystemParams) -> TransitionFrequency {
    let zeeman = p.gyromagnetic_hz_per_gauss * field_gauss;
    TransitionFrequency {
        hz: (zeeman - p.zero_field_splitting_hz).abs(),
        pump_inverts: zeeman > p.zero_field_splitting_hz,
    }
}

/// Bose–Einstein occupation of a mode at angular frequency `omega` and temperature `t`.
pub fn thermal_occupation(omega: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega / (K_B * t);
    // exp_m1 overflows to +inf for large x, giving exactly 0
    1.0 / x.exp_m1()
}

/// Single-spin vacuum coupling γ_NV·√(μ₀ħω_c/(2V_eff)), rad/s.
pub fn geometric_coupling(p: &SystemParams) -> f64 {
    let omega_c = TWO_PI * p.cavity_frequency_hz;
    let gamma_nv = TWO_PI * p.gyromagnetic_hz_per_gauss / TESLA_PER_GAUSS;
    let vacuum_field = (MU_0 * HBAR * omega_c / (2.0 * p.mode_volume_m3)).sqrt();
    gamma_nv * vacuum_field
}

pub fn derive_rates(p: &SystemParams) -> Result<DerivedRates> {
    p.validate()?;
    let omega_c = TWO_PI * p.cavity_frequency_hz;
    let kappa_c = omega_c / p.quality_factor;
    let g = match p.coupling_hz {
        Some(hz) => TWO_PI * hz,
        None => geometric_coupling(p),
    };
    let (omega_s, pump_inverts) = match p.field_gauss {
        Some(b) => {
            let tf = transition_frequency(b, p);
            (TWO_PI * tf.hz, tf.pump_inverts)
        }
        None => (omega_c, true),
    };
    let rates = DerivedRates {
        omega_c,
        omega_s,
        g,
        n_spins: p.nv_density_m3 * p.diamond_volume_m3 / p.orientation_divisor,
        kappa_c,
        kappa_ex: p.kappa_ex_fraction * kappa_c,
        kappa_s: p.pump_decay_multiplier * p.pump_rate + 2.0 / p.t2_star_s + p.gamma_eg,
        n_th: thermal_occupation(omega_c, p.temperature_k),
        gamma_eg: p.gamma_eg,
        w: p.pump_rate,
        q: p.pump_decay_multiplier,
        t2_star: p.t2_star_s,
        gamma_nv: TWO_PI * p.gyromagnetic_hz_per_gauss / TESLA_PER_GAUSS,
        cavity_length: p.cavity_length_m,
        temperature: p.temperature_k,
        pump_inverts,
    };
    rates.validate()?;
    Ok(rates)
}

/// Round-trip time 2L/c of the cavity, s.
pub fn roundtrip_time(r: &DerivedRates) -> f64 {
    2.0 * r.cavity_length / C_LIGHT
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn baseline_spin_count_and_coupling() {
        let r = derive_rates(&SystemParams::baseline()).unwrap();
        assert_relative_eq!(r.n_spins, 0.375e14, max_relative = 1e-12);
        assert_relative_eq!(r.g / TWO_PI, 0.02, max_relative = 1e-12);

        let geo = derive_rates(&SystemParams::baseline_geometric()).unwrap();
        let g_hz = geo.g / TWO_PI;
        assert!((0.021..0.023).contains(&g_hz), "g/2π = {g_hz}");
        // rounds to the quoted 0.02 Hz
        assert_eq!((g_hz * 100.0).round() / 100.0, 0.02);
    }

    #[test]
    fn baseline_thermal_photons() {
        let r = derive_rates(&SystemParams::baseline()).unwrap();
        assert!((r.n_th - 2100.0).abs() / 2100.0 < 0.02, "n_th = {}", r.n_th);
        assert_relative_eq!(r.n_th, 2083.16, max_relative = 1e-5);
    }

    #[test]
    fn cavity_decay_uses_angular_frequency() {
        let r = derive_rates(&SystemParams::baseline()).unwrap();
        assert_relative_eq!(r.kappa_c, TWO_PI * 3.0e9 / 1.0e5, max_relative = 1e-15);
        assert_relative_eq!(r.kappa_c, 1.885e5, max_relative = 1e-3);
        assert_eq!(r.kappa_ex, r.kappa_c);
    }

    #[test]
    fn zero_temperature_has_no_thermal_photons() {
        let p = SystemParams {
            temperature_k: 0.0,
            ..SystemParams::baseline()
        };
        assert_eq!(derive_rates(&p).unwrap().n_th, 0.0);
        // deep quantum regime must not overflow
        assert_eq!(thermal_occupation(TWO_PI * 3.0e9, 1e-6), 0.0);
    }

    #[test]
    fn transition_frequency_examples() {
        let p = SystemParams::baseline();
        let at_2100 = transition_frequency(2100.0, &p);
        assert_relative_eq!(at_2100.hz, 3.01e9, max_relative = 1e-12);
        assert!(at_2100.pump_inverts);

        let at_zero = transition_frequency(0.0, &p);
        assert_eq!(at_zero.hz, 2.87e9);
        assert!(!at_zero.pump_inverts);

        let crossing = p.zero_field_splitting_hz / p.gyromagnetic_hz_per_gauss;
        assert_relative_eq!(crossing, 1025.0, max_relative = 1e-12);
        assert!(transition_frequency(crossing, &p).hz.abs() < 1e-3);
    }

    #[test]
    fn field_sets_spin_frequency() {
        let p = SystemParams {
            field_gauss: Some(2100.0),
            ..SystemParams::baseline()
        };
        let r = derive_rates(&p).unwrap();
        assert_relative_eq!(r.omega_s, TWO_PI * 3.01e9, max_relative = 1e-12);
        let r0 = derive_rates(&SystemParams::baseline()).unwrap();
        assert_eq!(r0.omega_s, r0.omega_c);
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad_q = SystemParams {
            quality_factor: 0.0,
            ..SystemParams::baseline()
        };
        assert!(matches!(
            derive_rates(&bad_q),
            Err(MaserError::InvalidParameter { name: "quality_factor", .. })
        ));
        let bad_t = SystemParams {
            temperature_k: -1.0,
            ..SystemParams::baseline()
        };
        assert!(derive_rates(&bad_t).is_err());
        let bad_frac = SystemParams {
            kappa_ex_fraction: 1.5,
            ..SystemParams::baseline()
        };
        assert!(derive_rates(&bad_frac).is_err());
        let bad_t2 = SystemParams {
            t2_star_s: 0.0,
            ..SystemParams::baseline()
        };
        assert!(derive_rates(&bad_t2).is_err());
    }

    #[test]
    fn rayleigh_jeans_limit_at_room_temperature() {
        let r = derive_rates(&SystemParams::baseline()).unwrap();
        let classical = K_B * 300.0 / (HBAR * r.omega_c);
        let ratio = r.n_th / classical;
        assert!((0.999..=1.0).contains(&ratio), "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn magnon_decay_composition(w in 1.0f64..1e7, t2 in 1e-8f64..1e-3, gamma in 1.0f64..1e4, q in 1.0f64..40.0) {
            let p = SystemParams { pump_rate: w, t2_star_s: t2, gamma_eg: gamma, pump_decay_multiplier: q, ..SystemParams::baseline() };
            let r = derive_rates(&p).unwrap();
            prop_assert_eq!(r.kappa_s, q * w + 2.0 / t2 + gamma);
            prop_assert_eq!(r.kappa_c, r.omega_c / p.quality_factor);
        }

        #[test]
        fn scale_consistency(rho in 1e20f64..1e25, qf in 1e3f64..1e8) {
            let p = SystemParams { nv_density_m3: rho, quality_factor: qf, ..SystemParams::baseline_geometric() };
            let r = derive_rates(&p).unwrap();
            let doubled = derive_rates(&SystemParams { nv_density_m3: 2.0 * rho, ..p }).unwrap();
            prop_assert_eq!(doubled.n_spins, 2.0 * r.n_spins);
            let halved_q = derive_rates(&SystemParams { quality_factor: qf / 2.0, ..p }).unwrap();
            prop_assert_eq!(halved_q.kappa_c, 2.0 * r.kappa_c);
            let big_volume = derive_rates(&SystemParams { mode_volume_m3: 4.0 * p.mode_volume_m3, ..p }).unwrap();
            prop_assert!((big_volume.g / r.g - 0.5).abs() <= 1e-12);
        }

        #[test]
        fn thermal_occupation_is_monotone(t1 in 0.0f64..1000.0, dt in 1e-3f64..100.0) {
            let omega = TWO_PI * 3.0e9;
            prop_assert!(thermal_occupation(omega, t1 + dt) > thermal_occupation(omega, t1));
            prop_assert!(thermal_occupation(omega, t1) >= 0.0);
        }
    }
}
