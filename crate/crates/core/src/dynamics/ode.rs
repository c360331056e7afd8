//! Adaptive integrator for small autonomous systems: Dormand–Prince 5(4) with
//! Hairer's stiffness test, handing over to a linearly implicit Rosenbrock 2(3)
//! scheme (the ode23s coefficients) once the problem is detected as stiff.

use nalgebra::{Const, DimMin, SMatrix, SVector};

use crate::error::{MaserError, Result};

pub trait OdeSystem<const D: usize> {
    fn rhs(&self, y: &SVector<f64, D>) -> SVector<f64, D>;
    fn jacobian(&self, y: &SVector<f64, D>) -> SMatrix<f64, D, D>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dopri5,
    Rosenbrock23,
}

#[derive(Debug, Clone)]
pub struct OdeConfig<const D: usize> {
    pub rtol: f64,
    pub atol: SVector<f64, D>,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
    /// Allow the switch to the implicit scheme.
    pub stiff_switch: bool,
}

/// What the step callback wants the driver to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOutcome<const D: usize> {
    pub t: f64,
    pub y: SVector<f64, D>,
    pub steps: usize,
    pub rejected: usize,
    pub method: Method,
    /// True when the callback asked to stop before `t_end`.
    pub stopped: bool,
}

// Dormand–Prince tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn err_norm<const D: usize>(
    err: &SVector<f64, D>,
    y0: &SVector<f64, D>,
    y1: &SVector<f64, D>,
    cfg: &OdeConfig<D>,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..D {
        let sc = cfg.atol[i] + cfg.rtol * y0[i].abs().max(y1[i].abs());
        let e = err[i] / sc;
        acc += e * e;
    }
    (acc / D as f64).sqrt()
}

fn initial_step<const D: usize, S: OdeSystem<D>>(
    sys: &S,
    y0: &SVector<f64, D>,
    f0: &SVector<f64, D>,
    cfg: &OdeConfig<D>,
    span: f64,
) -> f64 {
    // Hairer & Wanner, Solving ODEs I, II.4
    let scale = |i: usize, y: &SVector<f64, D>| cfg.atol[i] + cfg.rtol * y[i].abs();
    let rms = |v: &SVector<f64, D>, y: &SVector<f64, D>| {
        ((0..D).map(|i| (v[i] / scale(i, y)).powi(2)).sum::<f64>() / D as f64).sqrt()
    };
    let d0 = rms(y0, y0);
    let d1 = rms(f0, y0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = y0 + f0 * h0;
    let f1 = sys.rhs(&y1);
    let d2 = rms(&(f1 - f0), y0) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates from t = 0 to `t_end`. `on_step(t, y, f)` is called after every
/// accepted step with the derivative at the new point.
pub fn solve<const D: usize, S, F>(
    sys: &S,
    y0: SVector<f64, D>,
    t_end: f64,
    cfg: &OdeConfig<D>,
    mut on_step: F,
) -> Result<OdeOutcome<D>>
where
    S: OdeSystem<D>,
    F: FnMut(f64, &SVector<f64, D>, &SVector<f64, D>) -> Control,
    Const<D>: DimMin<Const<D>, Output = Const<D>>,
{
    let mut t = 0.0;
    let mut y = y0;
    let mut f = sys.rhs(&y);
    let mut h = cfg.h0.unwrap_or_else(|| initial_step(sys, &y, &f, cfg, t_end));
    let mut method = Method::Dopri5;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut stiff_hits = 0usize;
    let mut non_stiff = 0usize;
    let d_ros = 1.0 / (2.0 + std::f64::consts::SQRT_2);
    let e32 = 6.0 + std::f64::consts::SQRT_2;

    while t < t_end {
        if steps >= cfg.max_steps {
            return Err(MaserError::NonConvergence {
                iterations: steps,
                residual: f.norm(),
            });
        }
        h = h.min(t_end - t);
        if h <= 1e-14 * t.abs().max(1e-300) || h < f64::MIN_POSITIVE {
            return Err(MaserError::StepSizeUnderflow { t, h });
        }
        match method {
            Method::Dopri5 => {
                let k1 = f;
                let k2 = sys.rhs(&(y + k1 * (h * A21)));
                let k3 = sys.rhs(&(y + (k1 * A31 + k2 * A32) * h));
                let k4 = sys.rhs(&(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
                let k5 = sys.rhs(&(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
                let y6 = y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h;
                let k6 = sys.rhs(&y6);
                let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
                let k7 = sys.rhs(&y_new);
                let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
                let en = err_norm(&err, &y, &y_new, cfg);
                let _ = (C2, C3, C4, C5);
                if en <= 1.0 && en.is_finite() {
                    // stiffness test: h·ρ with ρ ≈ ‖k7 − k6‖/‖y_new − y6‖
                    let den = (y_new - y6).norm();
                    if cfg.stiff_switch && den > 0.0 {
                        let hr = h * (k7 - k6).norm() / den;
                        if hr > 3.25 {
                            non_stiff = 0;
                            stiff_hits += 1;
                            if stiff_hits >= 15 {
                                method = Method::Rosenbrock23;
                            }
                        } else {
                            non_stiff += 1;
                            if non_stiff >= 6 {
                                stiff_hits = 0;
                            }
                        }
                    }
                    t += h;
                    y = y_new;
                    f = k7;
                    steps += 1;
                    let fac = if en == 0.0 { 10.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 10.0) };
                    h *= fac;
                    if on_step(t, &y, &f) == Control::Stop {
                        return Ok(OdeOutcome { t, y, steps, rejected, method, stopped: true });
                    }
                } else {
                    rejected += 1;
                    let fac = if en.is_finite() { (0.9 * en.powf(-0.2)).clamp(0.1, 1.0) } else { 0.1 };
                    h *= fac;
                }
            }
            Method::Rosenbrock23 => {
                let jac = sys.jacobian(&y);
                let w = SMatrix::<f64, D, D>::identity() - jac * (h * d_ros);
                let lu = w.lu();
                let solve_w = |b: &SVector<f64, D>| lu.solve(b);
                let f0 = f;
                let Some(k1) = solve_w(&f0) else {
                    h *= 0.5;
                    rejected += 1;
                    continue;
                };
                let f1 = sys.rhs(&(y + k1 * (0.5 * h)));
                let Some(k2a) = solve_w(&(f1 - k1)) else {
                    h *= 0.5;
                    rejected += 1;
                    continue;
                };
                let k2 = k2a + k1;
                let y_new = y + k2 * h;
                let f2 = sys.rhs(&y_new);
                let rhs3 = f2 - (k2 - f1) * e32 - (k1 - f0) * 2.0;
                let Some(k3) = solve_w(&rhs3) else {
                    h *= 0.5;
                    rejected += 1;
                    continue;
                };
                let err = (k1 - k2 * 2.0 + k3) * (h / 6.0);
                let en = err_norm(&err, &y, &y_new, cfg);
                if en <= 1.0 && en.is_finite() {
                    t += h;
                    y = y_new;
                    f = f2;
                    steps += 1;
                    let fac = if en == 0.0 { 5.0 } else { (0.8 * en.powf(-1.0 / 3.0)).clamp(0.2, 5.0) };
                    h *= fac;
                    if on_step(t, &y, &f) == Control::Stop {
                        return Ok(OdeOutcome { t, y, steps, rejected, method, stopped: true });
                    }
                } else {
                    rejected += 1;
                    let fac = if en.is_finite() { (0.8 * en.powf(-1.0 / 3.0)).clamp(0.1, 1.0) } else { 0.1 };
                    h *= fac;
                }
            }
        }
    }
    Ok(OdeOutcome { t, y, steps, rejected, method, stopped: false })
}
