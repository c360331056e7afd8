//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 configuration or file error,
//! 3 numerical failure, 4 golden-check failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::amplifier::drive_steady_state;
use crate::config::{Config, ConfigError};
use crate::correlations::closure_steady_state;
use crate::dynamics::{
    default_t_end, integrate_with, seeded_state, stability_in_frame, Frame, IntegrateOptions,
};
use crate::error::MaserError;
use crate::golden::run_checks;
use crate::linewidth::{coherence, masing_pump_interval};
use crate::meanfield::{classify, masing_threshold_kappa, steady_state};
use crate::params::{derive_rates, DerivedRates};
use crate::sensitivity::sensitivities;
use crate::sweep::{output, run_sweep, svg, GridSpec, Quantity};

#[derive(Debug, Parser)]
#[command(name = "maserlab", version, about = "NV-diamond maser steady-state, noise and amplifier model")]
struct Cli {
    /// Run the built-in golden-value suite (before any subcommand).
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derived rates, thresholds and regime.
    Rates(Common),
    /// Mean-field steady state.
    Steady(Common),
    /// Second-order correlation steady state.
    Correlations(Common),
    /// Schawlow-Townes linewidth and coherence time.
    Linewidth(Common),
    /// Magnetic-field and displacement sensitivity.
    Sensitivity(Common),
    /// Driven steady state: branches, gain and noise temperature.
    Amplify(Common),
    /// Time-domain integration to a fixed point.
    Dynamics(DynamicsArgs),
    /// Parameter-grid sweep.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML or JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set q_factor=4e4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Pump rate w, s⁻¹.
    #[arg(long)]
    w: Option<f64>,
    /// Cavity quality factor.
    #[arg(long)]
    q: Option<f64>,
    /// Input power, W.
    #[arg(long = "p-in")]
    p_in: Option<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DynamicsArgs {
    #[command(flatten)]
    common: Common,
    /// Integration horizon, s. Extended automatically until the state settles.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Seed for the random initial spin phase.
    #[arg(long)]
    seed: Option<u64>,
    /// Include the input drive from the configuration.
    #[arg(long)]
    driven: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Quantity to evaluate. Repeatable; replaces the configured list.
    #[arg(long = "quantity")]
    quantities: Vec<String>,
    /// Heatmap of the first quantity.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Numeric(MaserError),
    Io(PathBuf, std::io::Error),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(..) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MaserError> for CliError {
    fn from(e: MaserError) -> Self {
        CliError::Numeric(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Scalar results of a single-point command.
struct Report {
    rows: Vec<(String, f64, &'static str)>,
    notes: Vec<String>,
    json: Value,
}

impl Report {
    fn new(json: Value) -> Self {
        Report { rows: Vec::new(), notes: Vec::new(), json }
    }

    fn row(&mut self, key: &str, value: f64, unit: &'static str) {
        self.rows.push((key.to_string(), value, unit));
    }
}

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    if cli.check {
        let checks = run_checks();
        let mut ok = true;
        for c in &checks {
            ok &= c.pass;
            let value = c.value.map_or_else(|| c.error.clone().unwrap_or_default(), |v| format!("{v:.6e}"));
            let _ = writeln!(
                out,
                "{} {:<16} {value} in [{:e}, {:e}] {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.lo,
                c.hi,
                c.unit
            );
        }
        if !ok {
            let _ = writeln!(err, "golden check failed");
            return 4;
        }
    }
    let Some(cmd) = cli.command else {
        if cli.check {
            return 0;
        }
        let _ = writeln!(err, "error: no subcommand given (try --help)");
        return 1;
    };
    match dispatch(cmd, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.code()
        }
    }
}

fn load(c: &Common) -> CliResult<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for s in &c.sets {
        cfg.set(s)?;
    }
    if c.w.is_some() {
        cfg.pump_rate_per_s = c.w;
    }
    if c.q.is_some() {
        cfg.q_factor = c.q;
    }
    if c.p_in.is_some() {
        cfg.p_in_w = c.p_in;
    }
    Ok(cfg)
}

fn rates_of(cfg: &Config) -> CliResult<DerivedRates> {
    let p = cfg.system_params()?;
    derive_rates(&p).map_err(|e| CliError::Config(e.to_string()))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn emit(report: &Report, c: &Common, out: &mut dyn Write) -> CliResult<()> {
    for n in &report.notes {
        let _ = writeln!(out, "{n}");
    }
    for (k, v, u) in &report.rows {
        let _ = writeln!(out, "{k:<22} {v:.6e} {u}");
    }
    if let Some(path) = &c.csv {
        let mut w = create(path)?;
        let io = |e| CliError::Io(path.clone(), e);
        writeln!(w, "quantity,value,unit").map_err(io)?;
        for (k, v, u) in &report.rows {
            writeln!(w, "{k},{v:.16e},{u}").map_err(io)?;
        }
        finish(w, path)?;
    }
    if let Some(path) = &c.json {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &report.json).map_err(|e| CliError::Io(path.clone(), e.into()))?;
        finish(w, path)?;
    }
    Ok(())
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Rates(c) => emit(&rates(&load(&c)?)?, &c, out),
        Command::Steady(c) => emit(&steady(&load(&c)?)?, &c, out),
        Command::Correlations(c) => emit(&correlations(&load(&c)?)?, &c, out),
        Command::Linewidth(c) => emit(&linewidth(&load(&c)?)?, &c, out),
        Command::Sensitivity(c) => emit(&sensitivity(&load(&c)?)?, &c, out),
        Command::Amplify(c) => emit(&amplify(&load(&c)?)?, &c, out),
        Command::Dynamics(a) => dynamics(&a, out),
        Command::Sweep(a) => sweep(&a, out),
    }
}

fn rates(cfg: &Config) -> CliResult<Report> {
    let r = rates_of(cfg)?;
    let mut rep = Report::new(json!({ "rates": r, "w_max": r.w_max(), "regime": classify(&r) }));
    rep.notes.push(format!("regime: {}", classify(&r)));
    rep.row("omega_c", r.omega_c, "rad/s");
    rep.row("omega_s", r.omega_s, "rad/s");
    rep.row("g", r.g, "rad/s");
    rep.row("n_spins", r.n_spins, "");
    rep.row("kappa_c", r.kappa_c, "1/s");
    rep.row("kappa_ex", r.kappa_ex, "1/s");
    rep.row("kappa_s", r.kappa_s, "1/s");
    rep.row("n_th", r.n_th, "");
    rep.row("w_max", r.w_max(), "1/s");
    let k_th = masing_threshold_kappa(&r);
    if k_th > 0.0 {
        rep.row("q_threshold", r.omega_c / k_th, "");
    }
    if let Ok((lo, hi)) = masing_pump_interval(&r) {
        rep.row("w_threshold_low", lo, "1/s");
        rep.row("w_threshold_high", hi, "1/s");
    }
    Ok(rep)
}

fn steady(cfg: &Config) -> CliResult<Report> {
    let r = rates_of(cfg)?;
    let m = steady_state(&r)?;
    let mut rep = Report::new(json!(m));
    rep.notes.push(format!("regime: {}", m.regime));
    rep.row("s_z", m.s_z, "");
    rep.row("n_c", m.n_c, "");
    rep.row("n_s", m.n_s, "");
    rep.row("omega", m.omega, "rad/s");
    rep.row("delta_cs", m.delta_cs, "rad/s");
    Ok(rep)
}

fn correlations(cfg: &Config) -> CliResult<Report> {
    let r = rates_of(cfg)?;
    let cs = closure_steady_state(&r)?;
    let mut rep = Report::new(json!(cs));
    rep.notes.push(format!("regime: {}", cs.regime));
    rep.row("s_z", cs.s_z, "");
    rep.row("n_e", cs.n_e, "");
    rep.row("n_g", cs.n_g, "");
    rep.row("spin_corr", cs.spin_corr, "");
    rep.row("n_c", cs.n_c, "");
    rep.row("n_coh", cs.n_coh, "");
    rep.row("p_out", cs.p_out, "W");
    Ok(rep)
}

fn linewidth(cfg: &Config) -> CliResult<Report> {
    let r = rates_of(cfg)?;
    let pn = coherence(&r)?;
    let mut rep = Report::new(json!(pn));
    rep.row("gamma_st", pn.gamma_st, "1/s");
    rep.row("t_coh", pn.t_coh, "s");
    rep.row("fwhm_linewidth", pn.fwhm_linewidth, "Hz");
    rep.row("n_incoh", pn.n_incoh, "");
    rep.row("n_coh", pn.n_coh, "");
    Ok(rep)
}

fn sensitivity(cfg: &Config) -> CliResult<Report> {
    let r = rates_of(cfg)?;
    let pn = coherence(&r)?;
    let s = sensitivities(&r, &pn)?;
    let mut rep = Report::new(json!({ "phase_noise": pn, "sensitivity": s }));
    rep.notes.push(format!("delta_B = {:.3} pT/sqrt(Hz)", s.delta_b_sqrt_tm * 1e12));
    rep.notes.push(format!("delta_x = {:.3} fm/sqrt(Hz)", s.delta_x_sqrt_tm * 1e15));
    rep.row("t_coh", pn.t_coh, "s");
    rep.row("delta_b", s.delta_b_sqrt_tm, "T/sqrt(Hz)");
    rep.row("delta_x", s.delta_x_sqrt_tm, "m/sqrt(Hz)");
    Ok(rep)
}

fn amplify(cfg: &Config) -> CliResult<Report> {
    let r = rates_of(cfg)?;
    let d = cfg.drive(&r)?;
    let sol = drive_steady_state(&r, &d)?;
    let mut rep = Report::new(json!(sol));
    rep.notes.push(format!("regime: {}", sol.regime));
    for (k, b) in sol.branches.iter().enumerate() {
        rep.notes.push(format!(
            "branch {k}: s_z = {:.6e}, gain = {:.3} dB, {}",
            b.s_z,
            b.gain_db,
            if b.stable { "stable" } else { "unstable" }
        ));
    }
    match sol.stable_branch() {
        Some(b) => {
            rep.notes.push(format!("gain = {:.1} dB", b.gain_db));
            match b.t_n {
                Some(t) => rep.notes.push(format!("T_n = {t:.3} K")),
                None => rep.notes.push("T_n undefined".into()),
            }
            rep.row("gain", b.gain, "");
            rep.row("gain_db", b.gain_db, "dB");
            rep.row("s_z", b.s_z, "");
            rep.row("p_out", b.p_out, "W");
            if let Some(t) = b.t_n {
                rep.row("t_n", t, "K");
            }
        }
        None => rep.notes.push("no unique stable branch".into()),
    }
    rep.row("l_db", sol.l_db, "dB");
    Ok(rep)
}

fn dynamics(a: &DynamicsArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load(&a.common)?;
    let r = rates_of(&cfg)?;
    let drive = if a.driven { Some(cfg.drive(&r)?) } else { None };
    let init = seeded_state(&r, a.seed.or(cfg.seed).unwrap_or(0));
    let opts = IntegrateOptions {
        t_end: a.t_end.or(cfg.t_end_s),
        record: a.common.csv.is_some(),
        ..IntegrateOptions::default()
    };
    let trace = integrate_with(&r, &init, drive.as_ref(), &opts)?;
    let fs = trace.final_state;
    let t_final = trace.t.last().copied().unwrap_or(opts.t_end.unwrap_or_else(|| default_t_end(&r)));
    let stab = stability_in_frame(&r, &Frame::new(&r, drive.as_ref()), &fs).ok();
    let mut rep = Report::new(json!({
        "converged": trace.converged,
        "steps": trace.steps,
        "switched_to_implicit": trace.switched_to_implicit,
        "final_residual": trace.final_residual,
        "final_state": fs,
        "stability": stab,
    }));
    rep.notes.push(format!("converged: {}", trace.converged));
    if let Some(s) = &stab {
        rep.notes.push(format!("fixed point: {}", if s.stable { "stable" } else { "unstable" }));
    }
    rep.row("t_final", t_final, "s");
    rep.row("steps", trace.steps as f64, "");
    rep.row("s_z", fs.s_z(), "");
    rep.row("n_c", fs.n_c(), "");
    rep.row("final_residual", trace.final_residual, "");
    // the CSV here is the trajectory, not the scalar table
    let scalar = Common { csv: None, json: a.common.json.clone(), config: None, sets: vec![], w: None, q: None, p_in: None };
    emit(&rep, &scalar, out)?;
    if let Some(path) = &a.common.csv {
        let mut w = create(path)?;
        trace.write_csv(&mut w).map_err(|e| CliError::Io(path.clone(), e))?;
        finish(w, path)?;
    }
    if !trace.converged {
        return Err(CliError::Numeric(MaserError::NonConvergence {
            iterations: trace.steps,
            residual: trace.final_residual,
        }));
    }
    Ok(())
}

fn sweep(a: &SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = load(&a.common)?;
    if !a.quantities.is_empty() {
        cfg.quantities = Some(a.quantities.clone());
    }
    let spec = GridSpec::from_config(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let grid = run_sweep(&spec)?;
    let _ = writeln!(
        out,
        "grid: {} ({}) x {} ({})",
        spec.x.axis.name(),
        spec.x.points,
        spec.y.axis.name(),
        spec.y.points
    );
    for q in &spec.quantities {
        let vals: Vec<f64> = grid.data[q].iter().flatten().copied().collect();
        let finite: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
        let (lo, hi) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        if finite.is_empty() {
            let _ = writeln!(out, "{:<10} all undefined", q.name());
        } else {
            let _ = writeln!(
                out,
                "{:<10} min {lo:.4e} max {hi:.4e} undefined {}/{}",
                q.name(),
                vals.len() - finite.len(),
                vals.len()
            );
        }
    }
    let _ = writeln!(out, "threshold polylines: {}", grid.threshold.len());
    if let Some(path) = &a.common.csv {
        let mut w = create(path)?;
        output::write_csv(&grid, &mut w).map_err(|e| CliError::Io(path.clone(), e))?;
        finish(w, path)?;
    }
    if let Some(path) = &a.common.json {
        let mut w = create(path)?;
        output::write_json(&grid, &mut w).map_err(|e| CliError::Io(path.clone(), e))?;
        finish(w, path)?;
    }
    if let Some(path) = &a.svg {
        let q: Quantity = spec.quantities[0];
        let text = svg::render(&grid, q).expect("requested quantity is present");
        let mut w = create(path)?;
        w.write_all(text.as_bytes()).map_err(|e| CliError::Io(path.clone(), e))?;
        finish(w, path)?;
    }
    Ok(())
}
