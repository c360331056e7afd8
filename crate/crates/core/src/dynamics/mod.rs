//! Time-domain mean-field equations (noise terms dropped) and linear stability of
//! their fixed points.
//!
//! State vector: `[N_e, N_g, Re S₋, Im S₋, Re a, Im a]`. The frame rotates at the
//! pulled masing frequency when undriven and at the input frequency when driven;
//! the drive enters the cavity equation as `+√κ_ex s_in` with `s_in` real.
//! Away from resonance the Jacobian keeps the Δ rotation terms.

pub mod ode;

use std::io::Write;

use nalgebra::{Matrix5, Matrix6, SVector, Vector6};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::amplifier::DriveSpec;
use crate::error::{MaserError, Result};
use crate::meanfield::{frame_detunings, MeanFieldState};
use crate::numeric::relative_residual;
use crate::params::DerivedRates;
use ode::{solve, Control, Method, OdeConfig, OdeSystem};

/// Mean-field state. `N_e + N_g = N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaserState {
    pub n_e: f64,
    pub n_g: f64,
    pub s_minus: Complex64,
    pub a: Complex64,
}

impl MaserState {
    pub fn from_inversion(r: &DerivedRates, s_z: f64, s_minus: Complex64, a: Complex64) -> Self {
        MaserState {
            n_e: 0.5 * (r.n_spins + s_z),
            n_g: 0.5 * (r.n_spins - s_z),
            s_minus,
            a,
        }
    }

    /// Non-masing fixed point S₋ = a = 0 with S_z = N(w − γ)/(w + γ).
    pub fn dark(r: &DerivedRates) -> Self {
        Self::from_inversion(r, r.dark_inversion(), Complex64::default(), Complex64::default())
    }

    pub fn from_meanfield(r: &DerivedRates, m: &MeanFieldState) -> Self {
        Self::from_inversion(r, m.s_z, m.s_minus, m.a)
    }

    pub fn s_z(&self) -> f64 {
        self.n_e - self.n_g
    }

    pub fn n_c(&self) -> f64 {
        self.a.norm_sqr()
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.n_e, self.n_g, self.s_minus.re, self.s_minus.im, self.a.re, self.a.im)
    }

    pub fn from_vector(y: &Vector6<f64>) -> Self {
        MaserState {
            n_e: y[0],
            n_g: y[1],
            s_minus: Complex64::new(y[2], y[3]),
            a: Complex64::new(y[4], y[5]),
        }
    }
}

/// Rotating frame: detunings Δ_c = ω − ω_c, Δ_s = ω − ω_s and the constant
/// drive term √κ_ex·s_in added to da/dt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub dc: f64,
    pub ds: f64,
    pub drive: Complex64,
}

impl Frame {
    pub fn undriven(r: &DerivedRates) -> Self {
        let (dc, ds) = frame_detunings(r);
        Frame { dc, ds, drive: Complex64::default() }
    }

    pub fn driven(r: &DerivedRates, d: &DriveSpec) -> Self {
        Frame {
            dc: d.omega_in - r.omega_c,
            ds: d.omega_in - r.omega_s,
            drive: Complex64::new(r.kappa_ex.sqrt() * d.amplitude(), 0.0),
        }
    }

    pub fn new(r: &DerivedRates, drive: Option<&DriveSpec>) -> Self {
        drive.map_or_else(|| Self::undriven(r), |d| Self::driven(r, d))
    }

    pub fn is_driven(&self) -> bool {
        self.drive != Complex64::default()
    }
}

/// Individual additive terms of each drift component; their sum is dy/dt.
fn drift_terms(r: &DerivedRates, f: &Frame, y: &Vector6<f64>) -> [[f64; 5]; 6] {
    let (ne, ng, xs, ys, xa, ya) = (y[0], y[1], y[2], y[3], y[4], y[5]);
    let g = r.g;
    let s = ne - ng;
    let (hs, hc) = (0.5 * r.kappa_s, 0.5 * r.kappa_c);
    let flow = [r.w * ng, -r.gamma_eg * ne, -2.0 * g * xa * ys, 2.0 * g * ya * xs, 0.0];
    [
        flow,
        flow.map(|t| -t),
        [-hs * xs, -f.ds * ys, -g * s * ya, 0.0, 0.0],
        [-hs * ys, f.ds * xs, g * s * xa, 0.0, 0.0],
        [-hc * xa, -f.dc * ya, g * ys, f.drive.re, 0.0],
        [-hc * ya, f.dc * xa, -g * xs, f.drive.im, 0.0],
    ]
}

pub fn drift(r: &DerivedRates, f: &Frame, y: &Vector6<f64>) -> Vector6<f64> {
    let t = drift_terms(r, f, y);
    Vector6::from_fn(|i, _| t[i].iter().sum())
}

/// Largest per-equation relative residual |Σ terms| / Σ |terms|.
pub fn fixed_point_residual(r: &DerivedRates, f: &Frame, state: &MaserState) -> f64 {
    drift_terms(r, f, &state.to_vector())
        .iter()
        .map(|t| relative_residual(t))
        .fold(0.0, f64::max)
}

/// 6×6 real drift matrix about `state`.
pub fn jacobian(r: &DerivedRates, f: &Frame, y: &Vector6<f64>) -> Matrix6<f64> {
    let (xs, ys, xa, ya) = (y[2], y[3], y[4], y[5]);
    let g = r.g;
    let s = y[0] - y[1];
    let (hs, hc) = (0.5 * r.kappa_s, 0.5 * r.kappa_c);
    let row0 = [-r.gamma_eg, r.w, 2.0 * g * ya, -2.0 * g * xa, -2.0 * g * ys, 2.0 * g * xs];
    #[rustfmt::skip]
    let m = Matrix6::from_row_slice(&[
        row0[0], row0[1], row0[2], row0[3], row0[4], row0[5],
        -row0[0], -row0[1], -row0[2], -row0[3], -row0[4], -row0[5],
        -g * ya, g * ya, -hs, -f.ds, 0.0, -g * s,
        g * xa, -g * xa, f.ds, -hs, g * s, 0.0,
        0.0, 0.0, 0.0, g, -hc, -f.dc,
        0.0, 0.0, -g, 0.0, f.dc, -hc,
    ]);
    m
}

/// Drift matrix in (S_z, Re S₋, Im S₋, Re a, Im a); N_e + N_g is conserved, so the
/// 6×6 spectrum is this one plus an exact zero.
pub fn reduced_jacobian(r: &DerivedRates, f: &Frame, state: &MaserState) -> Matrix5<f64> {
    let (xs, ys, xa, ya) = (state.s_minus.re, state.s_minus.im, state.a.re, state.a.im);
    let g = r.g;
    let s = state.s_z();
    let (hs, hc) = (0.5 * r.kappa_s, 0.5 * r.kappa_c);
    #[rustfmt::skip]
    let m = Matrix5::from_row_slice(&[
        -(r.w + r.gamma_eg), 4.0 * g * ya, -4.0 * g * xa, -4.0 * g * ys, 4.0 * g * xs,
        -g * ya, -hs, -f.ds, 0.0, -g * s,
        g * xa, f.ds, -hs, g * s, 0.0,
        0.0, 0.0, g, -hc, -f.dc,
        0.0, -g, 0.0, f.dc, -hc,
    ]);
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Eigenvalues of the drift matrix with the population-conservation zero removed, s⁻¹.
    pub eigenvalues: Vec<Complex64>,
    /// Global-phase zero mode, excluded from the verdict (undriven masing states only).
    pub phase_mode: Option<Complex64>,
    /// Largest real part among the eigenvalues entering the verdict.
    pub max_real: f64,
    pub stable: bool,
}

/// Residual bound for [`jacobian_stability`].
pub const FIXED_POINT_TOL: f64 = 1e-6;

pub fn jacobian_stability(
    r: &DerivedRates,
    fixed_point: &MaserState,
    drive: Option<&DriveSpec>,
) -> Result<StabilityReport> {
    stability_in_frame(r, &Frame::new(r, drive), fixed_point)
}

pub fn stability_in_frame(r: &DerivedRates, f: &Frame, fp: &MaserState) -> Result<StabilityReport> {
    let residual = fixed_point_residual(r, f, fp);
    if !(residual <= FIXED_POINT_TOL) {
        return Err(MaserError::NotAFixedPoint { residual });
    }
    let n = r.n_spins;
    let spin = fp.s_minus.norm().max(n.sqrt());
    let field = fp.a.norm().max(1.0).max(2.0 * r.g * n.sqrt() / r.kappa_c);
    let scale = [n, spin, spin, field, field];
    let j = reduced_jacobian(r, f, fp);
    // similarity transform D⁻¹ J D keeps the spectrum and balances the entries
    let js = Matrix5::from_fn(|i, k| j[(i, k)] * scale[k] / scale[i]);
    let mut eig: Vec<Complex64> = js.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));

    let coherent = fp.a.norm() > 0.0 || fp.s_minus.norm() > 0.0;
    let mut phase_mode = None;
    let mut rest = eig.clone();
    if !f.is_driven() && coherent {
        let (idx, _) = rest
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .expect("five eigenvalues");
        if rest[idx].re.abs() < 1e-6 * r.kappa_c {
            phase_mode = Some(rest.remove(idx));
        }
    }
    let max_real = rest.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityReport {
        eigenvalues: eig,
        phase_mode,
        max_real,
        stable: max_real < 0.0,
    })
}

struct MaserOde<'a> {
    r: &'a DerivedRates,
    frame: Frame,
}

impl OdeSystem<6> for MaserOde<'_> {
    fn rhs(&self, y: &Vector6<f64>) -> Vector6<f64> {
        drift(self.r, &self.frame, y)
    }
    fn jacobian(&self, y: &Vector6<f64>) -> Matrix6<f64> {
        jacobian(self.r, &self.frame, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    /// Integration horizon. `None` picks 50·max(1/κ_c, 1/γ, 1/w) and keeps
    /// doubling it (up to `max_extensions` times) until the state converges.
    pub t_end: Option<f64>,
    pub rtol: f64,
    pub max_extensions: usize,
    /// Scaled-derivative threshold for convergence.
    pub converge_tol: f64,
    /// Consecutive accepted steps below threshold before declaring convergence.
    pub converge_steps: usize,
    /// Stop as soon as the state has converged.
    pub stop_on_convergence: bool,
    /// Keep every accepted step in the trace (otherwise only the end points).
    pub record: bool,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            t_end: None,
            rtol: 1e-10,
            max_extensions: 12,
            converge_tol: 1e-8,
            converge_steps: 20,
            stop_on_convergence: true,
            record: true,
            max_steps: 20_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsTrace {
    pub t: Vec<f64>,
    /// Rows of `[N_e, N_g, Re S₋, Im S₋, Re a, Im a]`.
    pub states: Vec<[f64; 6]>,
    pub converged: bool,
    /// Scaled derivative norm at the final state.
    pub final_residual: f64,
    pub final_state: MaserState,
    pub steps: usize,
    pub switched_to_implicit: bool,
}

impl DynamicsTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,n_e,n_g,re_s_minus,im_s_minus,re_a,im_a")?;
        for (t, y) in self.t.iter().zip(&self.states) {
            write!(w, "{t:.16e}")?;
            for v in y {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// 50·max(1/κ_c, 1/γ, 1/w).
pub fn default_t_end(r: &DerivedRates) -> f64 {
    let slow = (1.0 / r.kappa_c).max(1.0 / r.gamma_eg);
    let slow = if r.w > 0.0 { slow.max(1.0 / r.w) } else { slow };
    50.0 * slow
}

/// Dark populations with a spin coherence of magnitude √N and random phase, a = 0.
pub fn seeded_state(r: &DerivedRates, seed: u64) -> MaserState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    MaserState::from_inversion(
        r,
        r.dark_inversion(),
        Complex64::from_polar(r.n_spins.sqrt(), phi),
        Complex64::default(),
    )
}

fn component_scales(r: &DerivedRates) -> [f64; 6] {
    let n = r.n_spins;
    let spin = n.sqrt();
    let field = (2.0 * r.g * n.sqrt() / r.kappa_c).max(1.0);
    [n, n, spin, spin, field, field]
}

/// max_i |dy_i/dt| / (rate_i · scale_i), with the amplitude scales grown to the
/// current amplitudes.
fn scaled_derivative(r: &DerivedRates, y: &Vector6<f64>, f: &Vector6<f64>) -> f64 {
    let sc = component_scales(r);
    let spin = sc[2].max(y[2].hypot(y[3]));
    let field = sc[4].max(y[4].hypot(y[5]));
    let pop_rate = r.w + r.gamma_eg;
    let rates = [pop_rate, pop_rate, 0.5 * r.kappa_s, 0.5 * r.kappa_s, 0.5 * r.kappa_c, 0.5 * r.kappa_c];
    let scales = [sc[0], sc[1], spin, spin, field, field];
    (0..6).map(|i| f[i].abs() / (rates[i] * scales[i])).fold(0.0, f64::max)
}

pub fn integrate(
    r: &DerivedRates,
    init: &MaserState,
    t_end: Option<f64>,
    drive: Option<&DriveSpec>,
) -> Result<DynamicsTrace> {
    integrate_with(r, init, drive, &IntegrateOptions { t_end, ..IntegrateOptions::default() })
}

pub fn integrate_with(
    r: &DerivedRates,
    init: &MaserState,
    drive: Option<&DriveSpec>,
    opts: &IntegrateOptions,
) -> Result<DynamicsTrace> {
    r.validate()?;
    if let Some(d) = drive {
        d.validate()?;
    }
    let tol = 1e-9 * r.n_spins;
    if !(init.n_e >= -tol && init.n_g >= -tol)
        || (init.n_e + init.n_g - r.n_spins).abs() > 1e-6 * r.n_spins
        || !init.s_minus.is_finite()
        || !init.a.is_finite()
    {
        return Err(MaserError::InvalidParameter {
            name: "init",
            reason: "populations must be non-negative and sum to N".into(),
        });
    }
    if let Some(t) = opts.t_end {
        if !(t > 0.0 && t.is_finite()) {
            return Err(MaserError::InvalidParameter { name: "t_end", reason: format!("{t} must be > 0") });
        }
    }
    let sys = MaserOde { r, frame: Frame::new(r, drive) };
    let sc = component_scales(r);
    let cfg = OdeConfig {
        rtol: opts.rtol,
        atol: SVector::<f64, 6>::from_fn(|i, _| 1e-12 * sc[i]),
        h0: None,
        max_steps: opts.max_steps,
        stiff_switch: true,
    };
    let (mut horizon, extensions) = match opts.t_end {
        Some(t) => (t, 0),
        None => (default_t_end(r), opts.max_extensions),
    };

    let mut t_all = vec![0.0];
    let mut states = vec![init.to_vector().into()];
    let mut y = init.to_vector();
    let mut t0 = 0.0;
    let mut streak = 0usize;
    let mut converged = false;
    let mut steps = 0;
    let mut implicit = false;
    for round in 0..=extensions {
        let span = horizon - t0;
        let out = solve(&sys, y, span, &cfg, |t, yy, ff| {
            if opts.record {
                t_all.push(t0 + t);
                states.push((*yy).into());
            }
            if scaled_derivative(r, yy, ff) < opts.converge_tol {
                streak += 1;
            } else {
                streak = 0;
            }
            if streak >= opts.converge_steps && opts.stop_on_convergence {
                Control::Stop
            } else {
                Control::Continue
            }
        })?;
        steps += out.steps;
        implicit |= out.method == Method::Rosenbrock23;
        t0 += out.t;
        y = out.y;
        converged = streak >= opts.converge_steps;
        if converged || round == extensions {
            break;
        }
        horizon *= 2.0;
    }
    if !opts.record {
        t_all.push(t0);
        states.push(y.into());
    }
    let f_end = drift(r, &sys.frame, &y);
    Ok(DynamicsTrace {
        t: t_all,
        states,
        converged,
        final_residual: scaled_derivative(r, &y, &f_end),
        final_state: MaserState::from_vector(&y),
        steps,
        switched_to_implicit: implicit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::steady_state;
    use crate::params::{derive_rates, SystemParams};
    use approx::assert_relative_eq;

    fn p0(q: f64, w: f64) -> DerivedRates {
        derive_rates(&SystemParams { quality_factor: q, pump_rate: w, ..SystemParams::baseline() }).unwrap()
    }

    #[test]
    fn masing_fixed_point_is_stable() {
        let r = p0(1e5, 1e5);
        let m = steady_state(&r).unwrap();
        let rep = jacobian_stability(&r, &MaserState::from_meanfield(&r, &m), None).unwrap();
        assert!(rep.stable, "{rep:?}");
        let pm = rep.phase_mode.expect("phase zero mode");
        assert!(pm.re.abs() < 1e-6 * r.kappa_c);
        assert_eq!(rep.eigenvalues.len(), 5);
    }

    #[test]
    fn phase_mode_is_global_rotation() {
        // J·(0, −Im S₋, Re S₋, −Im a, Re a) = 0 at an undriven coherent fixed point
        let r = p0(1e5, 1e5);
        let m = steady_state(&r).unwrap();
        let st = MaserState::from_meanfield(&r, &m);
        let j = reduced_jacobian(&r, &Frame::undriven(&r), &st);
        let v = nalgebra::Vector5::new(0.0, -st.s_minus.im, st.s_minus.re, -st.a.im, st.a.re);
        let jv = j * v;
        let scale = j.abs() * v.abs();
        for i in 0..5 {
            assert!(jv[i].abs() <= 1e-12 * scale[i].max(1e-300), "row {i}");
        }
    }

    #[test]
    fn dark_state_stability() {
        let above = p0(1e5, 1e5);
        let rep = jacobian_stability(&above, &MaserState::dark(&above), None).unwrap();
        assert!(!rep.stable && rep.max_real > 0.0);
        let below = p0(1e4, 1e5);
        let rep = jacobian_stability(&below, &MaserState::dark(&below), None).unwrap();
        assert!(rep.stable, "{rep:?}");
        assert!(rep.phase_mode.is_none());
    }

    #[test]
    fn full_spectrum_adds_conservation_zero() {
        let r = p0(1e5, 1e5);
        let st = MaserState::from_meanfield(&r, &steady_state(&r).unwrap());
        let f = Frame::undriven(&r);
        let full = jacobian(&r, &f, &st.to_vector()).complex_eigenvalues();
        let red = stability_in_frame(&r, &f, &st).unwrap();
        // every reduced eigenvalue appears in the 6×6 spectrum
        for z in &red.eigenvalues {
            let best = full.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-6 * z.norm().max(r.kappa_c), "{z} missing");
        }
    }

    #[test]
    fn non_fixed_point_rejected() {
        let r = p0(1e5, 1e5);
        let s = seeded_state(&r, 1);
        assert!(matches!(jacobian_stability(&r, &s, None), Err(MaserError::NotAFixedPoint { .. })));
    }

    #[test]
    fn drift_conserves_population() {
        let r = p0(1e5, 1e5);
        let y = seeded_state(&r, 3).to_vector() + Vector6::new(0.0, 0.0, 0.0, 0.0, 1e3, -2e3);
        let f = drift(&r, &Frame::undriven(&r), &y);
        assert_eq!(f[0] + f[1], 0.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let r = p0(1e5, 1e5);
        let f = Frame { dc: 30.0, ds: -700.0, drive: Complex64::new(5e5, 0.0) };
        let y = Vector6::new(2.0e13, 1.7e13, 3e9, -1e9, 2e6, 7e5);
        let j = jacobian(&r, &f, &y);
        for k in 0..6 {
            let h = 1e-6 * y[k].abs();
            let mut yp = y;
            let mut ym = y;
            yp[k] += h;
            ym[k] -= h;
            let col = (drift(&r, &f, &yp) - drift(&r, &f, &ym)) / (2.0 * h);
            for i in 0..6 {
                let sc = (0..6).map(|m| (j[(i, m)] * y[m]).abs()).sum::<f64>() / y[k].abs();
                assert!((col[i] - j[(i, k)]).abs() <= 1e-6 * sc, "J[{i},{k}]");
            }
        }
    }

    #[test]
    fn converges_to_masing_state() {
        let r = p0(1e5, 1e5);
        let tr = integrate(&r, &seeded_state(&r, 7), None, None).unwrap();
        assert!(tr.converged);
        let m = steady_state(&r).unwrap();
        let fs = tr.final_state;
        assert_relative_eq!(fs.s_z(), m.s_z, max_relative = 1e-3);
        assert_relative_eq!(fs.n_c(), m.n_c, max_relative = 1e-3);
        assert_relative_eq!(fs.s_minus.norm(), m.s_minus.norm(), max_relative = 1e-3);
        // population conservation along the whole trajectory
        for y in &tr.states {
            assert!(((y[0] + y[1]) / r.n_spins - 1.0).abs() < 1e-9);
            assert!(y[0] >= 0.0 && y[1] >= 0.0);
        }
    }

    #[test]
    fn unseeded_dark_state_stays_dark() {
        let r = p0(1e5, 1e5);
        let init = MaserState::from_inversion(&r, 0.0, Complex64::default(), Complex64::default());
        let tr = integrate(&r, &init, None, None).unwrap();
        for y in &tr.states {
            assert_eq!(&y[2..], &[0.0; 4]);
        }
        assert_relative_eq!(tr.final_state.s_z(), r.dark_inversion(), max_relative = 1e-6);
    }

    #[test]
    fn absorbing_decays_to_dark() {
        let r = p0(1e5, 100.0);
        let tr = integrate(&r, &seeded_state(&r, 11), None, None).unwrap();
        assert!(tr.converged);
        assert_relative_eq!(tr.final_state.s_z(), r.dark_inversion(), max_relative = 1e-6);
        assert!(tr.final_state.n_c() < 1e-6);
    }

    #[test]
    fn trace_csv_has_one_row_per_step() {
        let r = p0(1e4, 1e5);
        let tr = integrate(&r, &seeded_state(&r, 2), Some(1e-4), None).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), tr.t.len() + 1);
        assert!(text.starts_with("t,n_e,n_g,"));
    }

    #[test]
    fn rejects_bad_inputs() {
        let r = p0(1e5, 1e5);
        let bad = MaserState { n_e: -1.0, ..MaserState::dark(&r) };
        assert!(integrate(&r, &bad, None, None).is_err());
        assert!(integrate(&r, &MaserState::dark(&r), Some(0.0), None).is_err());
    }
}
