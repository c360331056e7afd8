//! Driven steady state: a single input tone at ω_in reflected off the
//! spin-loaded cavity, its power gain, branch stability and added noise.
//!
//! With x = 4g²S_z/(κ_sκ_c), d_c = 2Δ_c/κ_c, d_s = 2Δ_s/κ_s (Δ = ω_in − ω),
//! e = d_c + d_s, x₀ = 1 − d_c d_s and y = x − x₀, the inversion balance is the cubic
//!
//! ```text
//! y³ + (x₀ − x_A) y² + (e² + c) y + (x₀ − x_A) e² + c x₀ = 0
//! ```
//!
//! where x_A is x at the dark inversion and c = (2κ_ex/κ_c)(4g²/κ_sκ_c)·4|s_in|²/(w+γ).
//! The same cubic covers resonant and detuned drive. The reflection coefficient
//! s_out/s_in = 1 + (2κ_ex/κ_c)(1 − i d_s)/(y + i e) is evaluated from y directly,
//! so the near-pole masing branches keep full precision.

use num_complex::Complex64;
use serde::Serialize;

use crate::constants::{HBAR, K_B};
use crate::cubic::Cubic;
use crate::dynamics::{stability_in_frame, Frame, MaserState};
use crate::error::{MaserError, Result};
use crate::meanfield::{is_masing, is_over_pumped};
use crate::params::{roundtrip_time, DerivedRates};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriveSpec {
    /// Input power, W.
    pub p_in: f64,
    /// Input angular frequency, rad/s.
    pub omega_in: f64,
}

impl DriveSpec {
    pub fn new(p_in: f64, omega_in: f64) -> Self {
        DriveSpec { p_in, omega_in }
    }

    /// Tone at the cavity frequency.
    pub fn resonant(r: &DerivedRates, p_in: f64) -> Self {
        DriveSpec { p_in, omega_in: r.omega_c }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_in >= 0.0 && self.p_in.is_finite()) {
            return Err(MaserError::InvalidParameter { name: "p_in", reason: format!("{} must be >= 0", self.p_in) });
        }
        if !(self.omega_in > 0.0 && self.omega_in.is_finite()) {
            return Err(MaserError::InvalidParameter {
                name: "omega_in",
                reason: format!("{} must be > 0", self.omega_in),
            });
        }
        Ok(())
    }

    /// |s_in|² = P_in/(ħω_in), photons per second.
    pub fn photon_flux(&self) -> f64 {
        self.p_in / (HBAR * self.omega_in)
    }

    /// s_in, taken real and positive (it sets the phase reference).
    pub fn amplitude(&self) -> f64 {
        self.photon_flux().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplifierRegime {
    Absorbing,
    Amplifying,
    Masing,
    OverPumped,
}

impl AmplifierRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            AmplifierRegime::Absorbing => "absorbing",
            AmplifierRegime::Amplifying => "amplifying",
            AmplifierRegime::Masing => "masing",
            AmplifierRegime::OverPumped => "over-pumped",
        }
    }

    /// Inverted but below threshold: the over-pumped side of the masing region
    /// amplifies just like the low-pump side.
    pub fn is_amplifying(&self) -> bool {
        matches!(self, AmplifierRegime::Amplifying | AmplifierRegime::OverPumped)
    }

    /// Stable integer code, used for regime maps.
    pub fn code(&self) -> u8 {
        match self {
            AmplifierRegime::Absorbing => 0,
            AmplifierRegime::Amplifying => 1,
            AmplifierRegime::Masing => 2,
            AmplifierRegime::OverPumped => 3,
        }
    }
}

impl std::fmt::Display for AmplifierRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_regime(r: &DerivedRates) -> AmplifierRegime {
    if r.w < r.gamma_eg {
        AmplifierRegime::Absorbing
    } else if is_over_pumped(r) {
        AmplifierRegime::OverPumped
    } else if is_masing(r) {
        AmplifierRegime::Masing
    } else {
        AmplifierRegime::Amplifying
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Branch {
    pub s_z: f64,
    pub gain: f64,
    pub gain_db: f64,
    pub s_out: Complex64,
    pub a: Complex64,
    pub s_minus: Complex64,
    /// Output power ħω_in|s_out|², W.
    pub p_out: f64,
    /// Noise temperature, K; `None` where it is undefined (G < 1 or S_z ≤ 0).
    pub t_n: Option<f64>,
    pub stable: bool,
    /// Largest real part of the drift-matrix spectrum, s⁻¹.
    pub max_real_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplifierSolution {
    /// Ordered by S_z ascending.
    pub branches: Vec<Branch>,
    pub regime: AmplifierRegime,
    pub l_db: f64,
    pub tau_rt: f64,
    pub drive: DriveSpec,
}

impl AmplifierSolution {
    /// The unique stable branch, if there is exactly one.
    pub fn stable_branch(&self) -> Option<&Branch> {
        let mut it = self.branches.iter().filter(|b| b.stable);
        match (it.next(), it.next()) {
            (Some(b), None) => Some(b),
            _ => None,
        }
    }
}

/// Normalised drive-problem coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveCubic {
    /// 4g²/(κ_sκ_c).
    pub u: f64,
    pub x_a: f64,
    pub x0: f64,
    pub e: f64,
    pub d_s: f64,
    pub c: f64,
    pub coupling: f64,
}

impl DriveCubic {
    pub fn new(r: &DerivedRates, d: &DriveSpec) -> Self {
        let u = 4.0 * r.g * r.g / (r.kappa_s * r.kappa_c);
        let d_c = 2.0 * (d.omega_in - r.omega_c) / r.kappa_c;
        let d_s = 2.0 * (d.omega_in - r.omega_s) / r.kappa_s;
        let coupling = 2.0 * r.kappa_ex / r.kappa_c;
        DriveCubic {
            u,
            x_a: r.dark_inversion() * u,
            x0: 1.0 - d_c * d_s,
            e: d_c + d_s,
            d_s,
            c: coupling * u * 4.0 * d.photon_flux() / (r.w + r.gamma_eg),
            coupling,
        }
    }

    pub fn cubic(&self) -> Cubic {
        let e2 = self.e * self.e;
        let k = self.x0 - self.x_a;
        Cubic::new(k, e2 + self.c, k * e2 + self.c * self.x0)
    }

    /// (x_A − x)(y² + e²) − c·x, positive where the dark-state pull dominates.
    pub fn balance(&self, x: f64) -> f64 {
        let y = x - self.x0;
        (self.x_a - x) * (y * y + self.e * self.e) - self.c * x
    }

    /// Real roots in y, ascending.
    pub fn roots(&self) -> Result<Vec<f64>> {
        if self.c == 0.0 {
            let y = self.x_a - self.x0;
            if y == 0.0 && self.e == 0.0 {
                return Err(MaserError::AtThreshold);
            }
            return Ok(vec![y]);
        }
        Ok(self.cubic().real_roots())
    }

    pub fn reflection(&self, y: f64) -> Complex64 {
        Complex64::new(1.0, 0.0)
            + self.coupling * Complex64::new(1.0, -self.d_s) / Complex64::new(y, self.e)
    }
}

fn build_branch(r: &DerivedRates, d: &DriveSpec, dc: &DriveCubic, frame: &Frame, y: f64) -> Result<Branch> {
    let x = dc.x0 + y;
    let s_z = x / dc.u;
    let s_in = d.amplitude();
    let rho = dc.reflection(y);
    let s_out = rho * s_in;
    let a = r.kappa_ex.sqrt() * s_in * (2.0 / r.kappa_c) * Complex64::new(1.0, -dc.d_s) / Complex64::new(-y, -dc.e);
    let s_minus = Complex64::new(0.0, r.g * s_z) * a * (2.0 / r.kappa_s) / Complex64::new(1.0, -dc.d_s);
    let gain = rho.norm_sqr();
    let n_e = 0.5 * (r.n_spins + s_z);
    let t_n = if gain >= 1.0 && (s_z > 0.0 || gain == 1.0) {
        Some(noise_temperature(gain, r, s_z, n_e)?)
    } else {
        None
    };
    let state = MaserState::from_inversion(r, s_z, s_minus, a);
    let rep = stability_in_frame(r, frame, &state)?;
    Ok(Branch {
        s_z,
        gain,
        gain_db: 10.0 * gain.log10(),
        s_out,
        a,
        s_minus,
        p_out: HBAR * d.omega_in * s_out.norm_sqr(),
        t_n,
        stable: rep.stable,
        max_real_eigenvalue: rep.max_real,
    })
}

pub fn drive_steady_state(r: &DerivedRates, d: &DriveSpec) -> Result<AmplifierSolution> {
    r.validate()?;
    d.validate()?;
    let dc = DriveCubic::new(r, d);
    let frame = Frame::driven(r, d);
    let branches = dc
        .roots()?
        .into_iter()
        .map(|y| build_branch(r, d, &dc, &frame, y))
        .collect::<Result<Vec<_>>>()?;
    let tau_rt = roundtrip_time(r);
    Ok(AmplifierSolution {
        branches,
        regime: classify_regime(r),
        l_db: loss_db(r),
        tau_rt,
        drive: *d,
    })
}

/// Roundtrip loss −10·log₁₀(e^(−κ_c τ_rt)), dB.
pub fn loss_db(r: &DerivedRates) -> f64 {
    10.0 * r.kappa_c * roundtrip_time(r) / std::f64::consts::LN_10
}

/// Small-signal gain (A + B)²/(A − B)² with A the dark inversion and B = κ_sκ_c/(4g²).
/// Defined in the amplifying and over-pumped regimes.
pub fn weak_signal_gain(r: &DerivedRates) -> Result<f64> {
    let a = r.dark_inversion();
    let b = r.clamped_inversion();
    if a == b {
        return Err(MaserError::AtThreshold);
    }
    let regime = classify_regime(r);
    if !regime.is_amplifying() {
        return Err(MaserError::Regime { expected: "amplifying", found: regime.to_string() });
    }
    Ok(((a + b) / (a - b)).powi(2))
}

/// Added noise referred to the input, K.
pub fn noise_temperature(gain: f64, r: &DerivedRates, s_z: f64, n_e: f64) -> Result<f64> {
    if gain == 1.0 {
        return Ok(0.0);
    }
    if !(gain > 1.0) {
        return Err(MaserError::Domain(format!("noise temperature needs G >= 1, got {gain}")));
    }
    if !(s_z > 0.0) {
        return Err(MaserError::Domain(format!("noise temperature needs S_z > 0, got {s_z}")));
    }
    let ratio = loss_db(r) / (10.0 * gain.log10());
    let photon = HBAR * r.omega_c / K_B;
    Ok((1.0 - 1.0 / gain) * (ratio * r.temperature + (1.0 + ratio) * (n_e / s_z) * photon))
}

/// First-order weak-drive inversion A(1 − c/(x_A − 1)²) and the relative correction
/// c/(x_A − 1)². Resonant drive.
pub fn weak_signal_inversion(r: &DerivedRates, d: &DriveSpec) -> (f64, f64) {
    let dc = DriveCubic::new(r, d);
    let corr = dc.c / (dc.x_a - 1.0).powi(2);
    (r.dark_inversion() * (1.0 - corr), corr)
}

/// Stable masing branch for weak resonant drive: S_z = B(1 − δ), δ = √(c/(x_A − 1)).
/// Returns (S_z, δ).
pub fn masing_branch_inversion(r: &DerivedRates, d: &DriveSpec) -> Result<(f64, f64)> {
    if classify_regime(r) != AmplifierRegime::Masing {
        return Err(MaserError::NotMasing);
    }
    let dc = DriveCubic::new(r, d);
    let delta = (dc.c / (dc.x_a - 1.0)).sqrt();
    Ok((r.clamped_inversion() * (1.0 - delta), delta))
}

/// Gain on the stable masing branch, (2/δ − 1)².
pub fn masing_branch_gain(r: &DerivedRates, d: &DriveSpec) -> Result<f64> {
    let (_, delta) = masing_branch_inversion(r, d)?;
    Ok((2.0 / delta - 1.0).powi(2))
}

/// Damped fixed-point iteration S ← (1 − λ)S + λ·A/(1 + c/(y² + e²)) started
/// from the dark inversion. Finds the branch connected to the undriven state
/// when the map contracts (typically off resonance or below threshold).
pub fn self_consistent_inversion(r: &DerivedRates, d: &DriveSpec) -> Result<f64> {
    let dc = DriveCubic::new(r, d);
    let map = |x: f64| {
        let y = x - dc.x0;
        dc.x_a / (1.0 + dc.c / (y * y + dc.e * dc.e))
    };
    let lambda = 0.5;
    let mut x = dc.x_a;
    let mut residual = f64::INFINITY;
    for _ in 0..10_000 {
        let next = (1.0 - lambda) * x + lambda * map(x);
        residual = (next - x).abs() / next.abs().max(f64::MIN_POSITIVE);
        x = next;
        if residual <= 1e-10 {
            return Ok(x / dc.u);
        }
    }
    Err(MaserError::NonConvergence { iterations: 10_000, residual })
}
