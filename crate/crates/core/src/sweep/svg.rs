//! Heatmap rendering of one sweep quantity, with the threshold polyline (solid
//! white) and the optimal-coherence pump line (dashed blue) on top.
//!
//! Colour ramp, low to high: #30123b, #4662d7, #36aaf9, #1ae4b6, #72fe5e,
//! #c8ef34, #faba39, #f66b19, #ca2a04. Quantities that are strictly positive and
//! span more than two decades are coloured on a log scale. Undefined cells are grey.

use std::fmt::Write as _;

use super::{AxisSpec, Quantity, SweepGrid};
use super::output::regime_label;

const RAMP: [(u8, u8, u8); 9] = [
    (0x30, 0x12, 0x3b),
    (0x46, 0x62, 0xd7),
    (0x36, 0xaa, 0xf9),
    (0x1a, 0xe4, 0xb6),
    (0x72, 0xfe, 0x5e),
    (0xc8, 0xef, 0x34),
    (0xfa, 0xba, 0x39),
    (0xf6, 0x6b, 0x19),
    (0xca, 0x2a, 0x04),
];

pub fn ramp(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

struct ColorScale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl ColorScale {
    fn fit(values: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        let log = lo > 0.0 && hi / lo > 100.0;
        Some(ColorScale { lo, hi, log })
    }

    fn t(&self, v: f64) -> f64 {
        let (a, b, x) = if self.log { (self.lo.ln(), self.hi.ln(), v.ln()) } else { (self.lo, self.hi, v) };
        if b > a {
            (x - a) / (b - a)
        } else {
            0.5
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 40.0;
const PW: f64 = 460.0;
const PH: f64 = 380.0;

fn px(ax: &AxisSpec, v: f64) -> f64 {
    LEFT + ax.fraction(v) * PW
}

fn py(ax: &AxisSpec, v: f64) -> f64 {
    TOP + (1.0 - ax.fraction(v)) * PH
}

/// Cell edges along an axis in pixel units, midway between neighbouring samples.
fn edges(vals: &[f64], ax: &AxisSpec, to_px: impl Fn(&AxisSpec, f64) -> f64) -> Vec<f64> {
    let c: Vec<f64> = vals.iter().map(|&v| to_px(ax, v)).collect();
    if c.len() == 1 {
        let (a, b) = (to_px(ax, ax.min), to_px(ax, ax.max));
        return if a == b { vec![a - PW.min(PH) / 2.0, a + PW.min(PH) / 2.0] } else { vec![a, b] };
    }
    let mut e = Vec::with_capacity(c.len() + 1);
    e.push(c[0] - 0.5 * (c[1] - c[0]));
    for w in c.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    let n = c.len();
    e.push(c[n - 1] + 0.5 * (c[n - 1] - c[n - 2]));
    e
}

pub fn render(grid: &SweepGrid, q: Quantity) -> Option<String> {
    let m = grid.data.get(&q)?;
    let scale = ColorScale::fit(m.iter().flatten().copied());
    let (xa, ya) = (&grid.spec.x, &grid.spec.y);
    let xe = edges(&grid.x, xa, px);
    let ye = edges(&grid.y, ya, py);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for (j, row) in m.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            let fill = match (&scale, v.is_finite()) {
                (Some(sc), true) => {
                    let (r, g, b) = ramp(sc.t(v));
                    format!("#{r:02x}{g:02x}{b:02x}")
                }
                _ => "#bdbdbd".to_string(),
            };
            let (x0, x1) = (xe[i].min(xe[i + 1]), xe[i].max(xe[i + 1]));
            let (y0, y1) = (ye[j].min(ye[j + 1]), ye[j].max(ye[j + 1]));
            let _ = writeln!(
                s,
                r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                x1 - x0,
                y1 - y0
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let poly = |pts: &[[f64; 2]]| {
        pts.iter()
            .map(|p| format!("{:.2},{:.2}", px(xa, p[0]), py(ya, p[1])))
            .collect::<Vec<_>>()
            .join(" ")
    };
    for line in &grid.threshold {
        let _ = writeln!(
            s,
            r#"<polyline class="threshold" points="{}" fill="none" stroke="white" stroke-width="2"/>"#,
            poly(line)
        );
    }
    if let Some(opt) = &grid.optimum {
        if !opt.is_empty() {
            let _ = writeln!(
                s,
                r##"<polyline class="optimum" points="{}" fill="none" stroke="#1f4fff" stroke-width="2" stroke-dasharray="8 5"/>"##,
                poly(opt)
            );
        }
    }
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{PW}" height="{PH}" fill="none" stroke="black"/>"#);
    let scale_word = |a: &AxisSpec| if a.scale == super::Scale::Log { " (log)" } else { "" };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}{}</text>"#,
        LEFT + PW / 2.0,
        TOP + PH + 30.0,
        xa.axis.name(),
        scale_word(xa)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}{}</text>"#,
        TOP + PH / 2.0,
        TOP + PH / 2.0,
        ya.axis.name(),
        scale_word(ya)
    );
    for (v, anchor_x) in [(xa.min, LEFT), (xa.max, LEFT + PW)] {
        let _ = writeln!(s, r#"<text x="{anchor_x}" y="{}" text-anchor="middle">{v:.3e}</text>"#, TOP + PH + 15.0);
    }
    for (v, anchor_y) in [(ya.min, TOP + PH), (ya.max, TOP)] {
        let _ = writeln!(s, r#"<text x="{}" y="{anchor_y}" text-anchor="end">{v:.3e}</text>"#, LEFT - 4.0);
    }
    let unit = if q.unit().is_empty() { String::new() } else { format!(" [{}]", q.unit()) };
    let _ = writeln!(s, r#"<text x="{LEFT}" y="24">{}{unit}</text>"#, q.name());
    // colour bar
    let (bx, by, bh) = (LEFT + PW + 20.0, TOP, PH);
    for k in 0..64 {
        let t = 1.0 - k as f64 / 63.0;
        let (r, g, b) = ramp(t);
        let _ = writeln!(
            s,
            r##"<rect x="{bx}" y="{:.2}" width="16" height="{:.2}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
            by + k as f64 * bh / 64.0,
            bh / 64.0 + 0.5
        );
    }
    if let Some(sc) = &scale {
        let fmt = |v: f64| if q == Quantity::Regime { regime_label(v).to_string() } else { format!("{v:.2e}") };
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx + 20.0, by + 10.0, fmt(sc.hi));
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx + 20.0, by + bh, fmt(sc.lo));
        if sc.log {
            let _ = writeln!(s, r#"<text x="{}" y="{}">log</text>"#, bx + 20.0, by + bh / 2.0);
        }
    }
    let _ = writeln!(s, "</svg>");
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemParams;
    use crate::sweep::{run_sweep, GridSpec};

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), RAMP[0]);
        assert_eq!(ramp(1.0), RAMP[8]);
        assert_eq!(ramp(-3.0), RAMP[0]);
    }

    #[test]
    fn renders_overlays() {
        let mut g = GridSpec::default_axes(SystemParams::baseline());
        g.x.points = 8;
        g.y.points = 8;
        g.quantities = vec![Quantity::TCoh];
        let grid = run_sweep(&g).unwrap();
        let svg = render(&grid, Quantity::TCoh).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(r#"class="threshold""#));
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg.matches("<rect").count(), 2 + 64 + 64);
        assert!(render(&grid, Quantity::GainDb).is_none());
    }
}
