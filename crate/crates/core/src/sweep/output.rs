//! CSV and JSON serialisation of sweep grids.
//!
//! CSV: `# key=value` metadata lines, a header row, then one row per cell in
//! row-major order (y outer, x inner). Floats use 17 significant digits, undefined
//! cells are empty and the regime column holds its label. No timestamp is written,
//! so identical specs give identical files.

use std::io::{self, Write};

use serde_json::{json, Value};

use super::{Quantity, SweepGrid};
use crate::amplifier::AmplifierRegime;

const REGIMES: [AmplifierRegime; 4] = [
    AmplifierRegime::Absorbing,
    AmplifierRegime::Amplifying,
    AmplifierRegime::Masing,
    AmplifierRegime::OverPumped,
];

pub fn regime_label(code: f64) -> &'static str {
    REGIMES.iter().find(|r| r.code() as f64 == code).map_or("", |r| r.as_str())
}

fn fmt_value(q: Quantity, v: f64) -> String {
    if !v.is_finite() {
        String::new()
    } else if q == Quantity::Regime {
        regime_label(v).to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn metadata(grid: &SweepGrid) -> Vec<(String, String)> {
    let s = &grid.spec;
    let mut m = vec![
        ("code_version".to_string(), grid.code_version.clone()),
        ("x_axis".into(), s.x.axis.name().into()),
        ("x_min".into(), format!("{:.16e}", s.x.min)),
        ("x_max".into(), format!("{:.16e}", s.x.max)),
        ("x_points".into(), s.x.points.to_string()),
        ("x_scale".into(), format!("{:?}", s.x.scale).to_lowercase()),
        ("y_axis".into(), s.y.axis.name().into()),
        ("y_min".into(), format!("{:.16e}", s.y.min)),
        ("y_max".into(), format!("{:.16e}", s.y.max)),
        ("y_points".into(), s.y.points.to_string()),
        ("y_scale".into(), format!("{:?}", s.y.scale).to_lowercase()),
        ("p_in_w".into(), format!("{:.16e}", s.p_in)),
        ("drive_detuning_hz".into(), format!("{:.16e}", s.drive_detuning_hz)),
    ];
    // base parameters, sorted by key
    if let Ok(Value::Object(obj)) = serde_json::to_value(s.base) {
        for (k, v) in obj {
            m.push((format!("base.{k}"), v.to_string()));
        }
    }
    m
}

pub fn write_csv<W: Write>(grid: &SweepGrid, mut w: W) -> io::Result<()> {
    for (k, v) in metadata(grid) {
        writeln!(w, "# {k}={v}")?;
    }
    let qs: Vec<Quantity> = grid.spec.quantities.clone();
    write!(w, "{},{}", grid.spec.x.axis.name(), grid.spec.y.axis.name())?;
    for q in &qs {
        write!(w, ",{}", q.name())?;
    }
    writeln!(w)?;
    for (j, yv) in grid.y.iter().enumerate() {
        for (i, xv) in grid.x.iter().enumerate() {
            write!(w, "{xv:.16e},{yv:.16e}")?;
            for q in &qs {
                write!(w, ",{}", fmt_value(*q, grid.data[q][j][i]))?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn to_json(grid: &SweepGrid) -> Value {
    let mut quantities = serde_json::Map::new();
    for q in &grid.spec.quantities {
        // serde_json writes NaN as null
        quantities.insert(q.name().to_string(), json!({ "unit": q.unit(), "values": grid.data[q] }));
    }
    json!({
        "metadata": metadata(grid).into_iter().map(|(k, v)| (k, Value::String(v))).collect::<serde_json::Map<_, _>>(),
        "created_unix": grid.created_unix,
        "x_axis": grid.spec.x.axis.name(),
        "y_axis": grid.spec.y.axis.name(),
        "x": grid.x,
        "y": grid.y,
        "quantities": quantities,
        "regime_codes": REGIMES.iter().map(|r| json!({"code": r.code(), "label": r.as_str()})).collect::<Vec<_>>(),
        "threshold": grid.threshold,
        "optimum": grid.optimum,
    })
}

pub fn write_json<W: Write>(grid: &SweepGrid, w: W) -> io::Result<()> {
    serde_json::to_writer_pretty(w, &to_json(grid)).map_err(io::Error::other)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemParams;
    use crate::sweep::{run_sweep, GridSpec};

    fn small() -> SweepGrid {
        let mut g = GridSpec::default_axes(SystemParams::baseline());
        g.x.points = 4;
        g.y.points = 3;
        g.quantities = vec![Quantity::TCoh, Quantity::Regime];
        run_sweep(&g).unwrap()
    }

    #[test]
    fn csv_layout() {
        let grid = small();
        let mut buf = Vec::new();
        write_csv(&grid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], "Q,w,t_coh,regime");
        assert_eq!(body.len(), 1 + 12);
        // undefined T_coh is an empty field
        assert!(body.iter().any(|l| l.contains(",,")));
        assert!(text.lines().any(|l| l == "# x_axis=Q"));
        let first: Vec<&str> = body[1].split(',').collect();
        assert_eq!(first[0].parse::<f64>().unwrap(), grid.x[0]);
    }

    #[test]
    fn csv_is_deterministic() {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_csv(&small(), &mut a).unwrap();
        write_csv(&small(), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_nulls() {
        let v = to_json(&small());
        let t = &v["quantities"]["t_coh"]["values"];
        assert!(t.as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).any(|c| c.is_null()));
        assert_eq!(v["x"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn labels() {
        assert_eq!(regime_label(2.0), "masing");
        assert_eq!(regime_label(3.0), "over-pumped");
        assert_eq!(regime_label(9.0), "");
    }
}
