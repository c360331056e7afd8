//! Small scalar helpers shared by the solvers.

/// Relative residual of an equation written as a sum of terms: |Σ t| / Σ |t|.
/// Returns 0 when every term vanishes.
pub fn relative_residual(terms: &[f64]) -> f64 {
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    if scale == 0.0 {
        return 0.0;
    }
    terms.iter().sum::<f64>().abs() / scale
}

/// Complex variant: |Σ z| / Σ |z|.
pub fn relative_residual_c(terms: &[num_complex::Complex64]) -> f64 {
    let scale: f64 = terms.iter().map(|t| t.norm()).sum();
    if scale == 0.0 {
        return 0.0;
    }
    terms.iter().sum::<num_complex::Complex64>().norm() / scale
}

/// Maximises `f` on `[lo, hi]` by golden-section search. Returns (x, f(x)).
/// `f` is assumed unimodal on the interval.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> (f64, f64) {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol * (1.0 + c.abs().max(d.abs())) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`. `None` if the endpoints share a sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rtol: f64) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a).abs() <= rtol * m.abs() {
            break;
        }
    }
    Some(0.5 * (a + b))
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Log-spaced points; the endpoints are returned exactly.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect();
    if let Some(f) = v.first_mut() {
        *f = lo;
    }
    if n > 1 {
        v[n - 1] = hi;
    }
    v
}
