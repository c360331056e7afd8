//! Two-dimensional parameter sweeps with per-cell dispatch to the model modules.
//!
//! Cells are independent and evaluated on a rayon pool; results are gathered by
//! index, so the output does not depend on scheduling. Undefined cells hold NaN.

pub mod output;
pub mod svg;

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::amplifier::{classify_regime, drive_steady_state, AmplifierSolution, DriveSpec};
use crate::config::Config;
use crate::constants::TWO_PI;
use crate::correlations::{closure_steady_state, CorrelationState};
use crate::error::{MaserError, Result};
use crate::linewidth::schawlow_townes;
use crate::meanfield::threshold_margin;
use crate::numeric::{bisect, linspace, logspace};
use crate::params::{derive_rates, DerivedRates, SystemParams};
use crate::sensitivity::sensitivities;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Axis {
    #[serde(rename = "Q")]
    Q,
    #[serde(rename = "w")]
    W,
    #[serde(rename = "P_in")]
    PIn,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Q => "Q",
            Axis::W => "w",
            Axis::PIn => "P_in",
        }
    }
}

impl FromStr for Axis {
    type Err = MaserError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q" | "q_factor" => Ok(Axis::Q),
            "w" | "pump_rate_per_s" => Ok(Axis::W),
            "p_in" | "p_in_w" => Ok(Axis::PIn),
            _ => Err(MaserError::InvalidParameter { name: "axis", reason: format!("unknown axis `{s}`") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Log,
    Linear,
}

impl FromStr for Scale {
    type Err = MaserError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "log" => Ok(Scale::Log),
            "linear" | "lin" => Ok(Scale::Linear),
            _ => Err(MaserError::InvalidParameter { name: "scale", reason: format!("unknown scale `{s}`") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisSpec {
    pub axis: Axis,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub scale: Scale,
}

impl AxisSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(MaserError::InvalidParameter { name: "axis", reason });
        if self.points < 1 {
            return bad(format!("{}: points must be >= 1", self.axis.name()));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return bad(format!("{}: need finite min <= max", self.axis.name()));
        }
        if self.scale == Scale::Log && !(self.min > 0.0) {
            return bad(format!("{}: log scale needs min > 0", self.axis.name()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        match self.scale {
            Scale::Log => logspace(self.min, self.max, self.points),
            Scale::Linear => linspace(self.min, self.max, self.points),
        }
    }

    /// Maps a value to [0, 1] along the axis (log or linear).
    pub fn fraction(&self, v: f64) -> f64 {
        let (a, b, x) = match self.scale {
            Scale::Log => (self.min.ln(), self.max.ln(), v.ln()),
            Scale::Linear => (self.min, self.max, v),
        };
        if b == a {
            0.5
        } else {
            (x - a) / (b - a)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Undriven inversion from the correlation closure.
    SZ,
    POut,
    SpinCorr,
    TCoh,
    DeltaB,
    DeltaX,
    GainDb,
    TN,
    Regime,
    /// Inversion on the driven stable branch.
    SZAmp,
}

impl Quantity {
    pub const ALL: [Quantity; 10] = [
        Quantity::SZ,
        Quantity::POut,
        Quantity::SpinCorr,
        Quantity::TCoh,
        Quantity::DeltaB,
        Quantity::DeltaX,
        Quantity::GainDb,
        Quantity::TN,
        Quantity::Regime,
        Quantity::SZAmp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::SZ => "s_z",
            Quantity::POut => "p_out",
            Quantity::SpinCorr => "spin_corr",
            Quantity::TCoh => "t_coh",
            Quantity::DeltaB => "delta_b",
            Quantity::DeltaX => "delta_x",
            Quantity::GainDb => "gain_db",
            Quantity::TN => "t_n",
            Quantity::Regime => "regime",
            Quantity::SZAmp => "s_z_amp",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            Quantity::SZ | Quantity::SZAmp | Quantity::SpinCorr | Quantity::Regime => "",
            Quantity::POut => "W",
            Quantity::TCoh => "s",
            Quantity::DeltaB => "T/sqrt(Hz)",
            Quantity::DeltaX => "m/sqrt(Hz)",
            Quantity::GainDb => "dB",
            Quantity::TN => "K",
        }
    }

    fn needs_closure(&self) -> bool {
        matches!(
            self,
            Quantity::SZ | Quantity::POut | Quantity::SpinCorr | Quantity::TCoh | Quantity::DeltaB | Quantity::DeltaX
        )
    }

    fn needs_amplifier(&self) -> bool {
        matches!(self, Quantity::GainDb | Quantity::TN | Quantity::SZAmp)
    }
}

impl FromStr for Quantity {
    type Err = MaserError;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == key)
            .ok_or_else(|| MaserError::InvalidParameter { name: "quantity", reason: format!("unknown quantity `{s}`") })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub x: AxisSpec,
    pub y: AxisSpec,
    pub base: SystemParams,
    pub p_in: f64,
    pub drive_detuning_hz: f64,
    pub quantities: Vec<Quantity>,
}

impl GridSpec {
    /// Q (x) by w (y), both log, 10×10, no quantities selected.
    pub fn default_axes(base: SystemParams) -> Self {
        GridSpec {
            x: AxisSpec { axis: Axis::Q, min: 1e3, max: 1e7, points: 10, scale: Scale::Log },
            y: AxisSpec { axis: Axis::W, min: 10.0, max: 1e6, points: 10, scale: Scale::Log },
            base,
            p_in: crate::config::DEFAULT_P_IN_W,
            drive_detuning_hz: 0.0,
            quantities: Vec::new(),
        }
    }

    pub fn from_config(c: &Config) -> Result<Self> {
        let base = c.system_params().map_err(|e| match e {
            crate::config::ConfigError::Invalid(m) => m,
            other => MaserError::InvalidParameter { name: "config", reason: other.to_string() },
        })?;
        let mut g = Self::default_axes(base);
        let axis = |name: &Option<String>, min: Option<f64>, max: Option<f64>, points: Option<usize>, scale: &Option<String>, dflt: AxisSpec| -> Result<AxisSpec> {
            Ok(AxisSpec {
                axis: name.as_deref().map(str::parse).transpose()?.unwrap_or(dflt.axis),
                min: min.unwrap_or(dflt.min),
                max: max.unwrap_or(dflt.max),
                points: points.unwrap_or(dflt.points),
                scale: scale.as_deref().map(str::parse).transpose()?.unwrap_or(dflt.scale),
            })
        };
        g.x = axis(&c.x_axis, c.x_min, c.x_max, c.x_points, &c.x_scale, g.x)?;
        g.y = axis(&c.y_axis, c.y_min, c.y_max, c.y_points, &c.y_scale, g.y)?;
        g.p_in = c.p_in();
        g.drive_detuning_hz = c.drive_detuning_hz.unwrap_or(0.0);
        if let Some(qs) = &c.quantities {
            g.quantities = qs.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate()?;
        self.y.validate()?;
        if self.x.axis == self.y.axis {
            return Err(MaserError::InvalidParameter { name: "axis", reason: "x and y axes must differ".into() });
        }
        if self.quantities.is_empty() {
            return Err(MaserError::InvalidParameter { name: "quantities", reason: "no quantity requested".into() });
        }
        self.base.validate()
    }

    /// Parameters and input power of the cell at axis values (x, y).
    pub fn cell_params(&self, xv: f64, yv: f64) -> (SystemParams, f64) {
        let mut p = self.base;
        let mut p_in = self.p_in;
        for (axis, v) in [(self.x.axis, xv), (self.y.axis, yv)] {
            match axis {
                Axis::Q => p.quality_factor = v,
                Axis::W => p.pump_rate = v,
                Axis::PIn => p_in = v,
            }
        }
        (p, p_in)
    }

    fn drive(&self, r: &DerivedRates, p_in: f64) -> DriveSpec {
        DriveSpec::new(p_in, r.omega_c + TWO_PI * self.drive_detuning_hz)
    }
}

/// Value of every requested quantity at one parameter point; NaN where undefined.
pub fn evaluate_cell(p: &SystemParams, drive: impl Fn(&DerivedRates) -> DriveSpec, quantities: &[Quantity]) -> Vec<f64> {
    let r = match derive_rates(p) {
        Ok(r) => r,
        Err(_) => return vec![f64::NAN; quantities.len()],
    };
    let cs: Option<CorrelationState> = if quantities.iter().any(Quantity::needs_closure) {
        closure_steady_state(&r).ok()
    } else {
        None
    };
    let pn = cs.as_ref().and_then(|cs| schawlow_townes(&r, cs).ok());
    let sens = if quantities.iter().any(|q| matches!(q, Quantity::DeltaB | Quantity::DeltaX)) {
        pn.as_ref().and_then(|pn| sensitivities(&r, pn).ok())
    } else {
        None
    };
    let amp: Option<AmplifierSolution> = if quantities.iter().any(Quantity::needs_amplifier) {
        drive_steady_state(&r, &drive(&r)).ok()
    } else {
        None
    };
    let stable = amp.as_ref().and_then(|a| a.stable_branch().copied());
    quantities
        .iter()
        .map(|q| {
            let v = match q {
                Quantity::SZ => cs.as_ref().map(|c| c.s_z),
                Quantity::POut => cs.as_ref().map(|c| c.p_out),
                Quantity::SpinCorr => cs.as_ref().map(|c| c.spin_corr),
                Quantity::TCoh => pn.as_ref().map(|p| p.t_coh),
                Quantity::DeltaB => sens.as_ref().map(|s| s.delta_b_sqrt_tm),
                Quantity::DeltaX => sens.as_ref().map(|s| s.delta_x_sqrt_tm),
                Quantity::GainDb => stable.map(|b| b.gain_db),
                Quantity::TN => stable.and_then(|b| b.t_n),
                Quantity::SZAmp => stable.map(|b| b.s_z),
                Quantity::Regime => Some(classify_regime(&r).code() as f64),
            };
            v.filter(|v| v.is_finite()).unwrap_or(f64::NAN)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub spec: GridSpec,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// One `y.len() × x.len()` matrix per quantity, rows indexed by y.
    pub data: BTreeMap<Quantity, Vec<Vec<f64>>>,
    /// Masing-threshold crossings, one polyline per crossing index.
    pub threshold: Vec<Vec<[f64; 2]>>,
    /// Analytic optimal-coherence pump line, when T_coh is requested on a Q–w grid.
    pub optimum: Option<Vec<[f64; 2]>>,
    pub code_version: String,
    /// Wall-clock creation time, seconds since the Unix epoch. Not written to CSV.
    pub created_unix: u64,
}

impl SweepGrid {
    pub fn matrix(&self, q: Quantity) -> Option<&Vec<Vec<f64>>> {
        self.data.get(&q)
    }
}

/// Worker count from `MASERLAB_THREADS`, falling back to available parallelism.
pub fn thread_count() -> usize {
    std::env::var("MASERLAB_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn run_sweep(spec: &GridSpec) -> Result<SweepGrid> {
    spec.validate()?;
    let xs = spec.x.values();
    let ys = spec.y.values();
    let nx = xs.len();
    let cells: Vec<(usize, usize)> = (0..ys.len()).flat_map(|j| (0..nx).map(move |i| (j, i))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| MaserError::Domain(format!("thread pool: {e}")))?;
    let results: Vec<Vec<f64>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(j, i)| {
                let (p, p_in) = spec.cell_params(xs[i], ys[j]);
                evaluate_cell(&p, |r| spec.drive(r, p_in), &spec.quantities)
            })
            .collect()
    });
    let mut data = BTreeMap::new();
    for (k, q) in spec.quantities.iter().enumerate() {
        let m: Vec<Vec<f64>> = (0..ys.len())
            .map(|j| (0..nx).map(|i| results[j * nx + i][k]).collect())
            .collect();
        data.insert(*q, m);
    }
    let optimum = if spec.quantities.contains(&Quantity::TCoh) { optimum_line(spec, &xs, &ys) } else { None };
    Ok(SweepGrid {
        spec: spec.clone(),
        threshold: threshold_polylines(spec, &xs, &ys),
        optimum,
        x: xs,
        y: ys,
        data,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    })
}

fn margin_at(spec: &GridSpec, xv: f64, yv: f64) -> f64 {
    let (p, _) = spec.cell_params(xv, yv);
    derive_rates(&p).map_or(f64::NAN, |r| threshold_margin(&r))
}

/// Threshold crossings along each grid column (fixed x), refined by bisection.
pub fn threshold_polylines(spec: &GridSpec, xs: &[f64], ys: &[f64]) -> Vec<Vec<[f64; 2]>> {
    let mut lines: Vec<Vec<[f64; 2]>> = Vec::new();
    let to_t = |v: f64| if spec.y.scale == Scale::Log { v.ln() } else { v };
    let from_t = |t: f64| if spec.y.scale == Scale::Log { t.exp() } else { t };
    for &xv in xs {
        let m: Vec<f64> = ys.iter().map(|&yv| margin_at(spec, xv, yv)).collect();
        let mut k = 0;
        for j in 1..ys.len() {
            let (a, b) = (m[j - 1], m[j]);
            if a.is_finite() && b.is_finite() && (a > 0.0) != (b > 0.0) {
                if let Some(t) = bisect(|t| margin_at(spec, xv, from_t(t)), to_t(ys[j - 1]), to_t(ys[j]), 1e-12) {
                    if lines.len() <= k {
                        lines.push(Vec::new());
                    }
                    lines[k].push([xv, from_t(t)]);
                    k += 1;
                }
            }
        }
    }
    lines
}

/// Analytic coherence-optimal pump w_opt(Q) as (x, y) points inside the grid.
fn optimum_line(spec: &GridSpec, xs: &[f64], ys: &[f64]) -> Option<Vec<[f64; 2]>> {
    let (q_axis_is_x, q_vals) = match (spec.x.axis, spec.y.axis) {
        (Axis::Q, Axis::W) => (true, xs),
        (Axis::W, Axis::Q) => (false, ys),
        _ => return None,
    };
    let w_range = if q_axis_is_x { (spec.y.min, spec.y.max) } else { (spec.x.min, spec.x.max) };
    let mut pts = Vec::new();
    for &q in q_vals {
        let p = SystemParams { quality_factor: q, ..spec.base };
        let Ok(r) = derive_rates(&p) else { continue };
        let w = (2.0 * r.n_spins * r.g * r.g / r.kappa_c - 1.0 / r.t2_star) / r.q;
        if w >= w_range.0 && w <= w_range.1 {
            pts.push(if q_axis_is_x { [q, w] } else { [w, q] });
        }
    }
    Some(pts)
}
