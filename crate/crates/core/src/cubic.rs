//! Real roots of a monic cubic y³ + b₂y² + b₁y + b₀.
//!
//! One root comes from the closed form (trigonometric or Cardano), is Newton-polished
//! and deflated; the remaining quadratic is solved in cancellation-free form.
//! Deflation picks, term by term, whichever of the two algebraically equivalent
//! expressions has the smaller rounding bound, which keeps nearly coincident root
//! pairs (masing branches at tiny drive) separable.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub b2: f64,
    pub b1: f64,
    pub b0: f64,
}

impl Cubic {
    pub fn new(b2: f64, b1: f64, b0: f64) -> Self {
        Cubic { b2, b1, b0 }
    }

    pub fn eval(&self, y: f64) -> f64 {
        ((y + self.b2) * y + self.b1) * y + self.b0
    }

    fn deriv(&self, y: f64) -> f64 {
        (3.0 * y + 2.0 * self.b2) * y + self.b1
    }

    /// |p(y)| / Σ|terms|.
    pub fn relative_residual(&self, y: f64) -> f64 {
        let scale = (y * y * y).abs() + (self.b2 * y * y).abs() + (self.b1 * y).abs() + self.b0.abs();
        if scale == 0.0 {
            0.0
        } else {
            self.eval(y).abs() / scale
        }
    }

    /// Discriminant 18b₂b₁b₀ − 4b₂³b₀ + b₂²b₁² − 4b₁³ − 27b₀²; positive means
    /// three distinct real roots.
    pub fn discriminant(&self) -> f64 {
        let (a, b, c) = (self.b2, self.b1, self.b0);
        18.0 * a * b * c - 4.0 * a.powi(3) * c + a * a * b * b - 4.0 * b.powi(3) - 27.0 * c * c
    }

    /// Newton iteration that only accepts steps lowering |p|.
    pub fn polish(&self, mut y: f64) -> f64 {
        let mut fy = self.eval(y);
        for _ in 0..50 {
            let d = self.deriv(y);
            if fy == 0.0 || d == 0.0 || !d.is_finite() {
                break;
            }
            let next = y - fy / d;
            let fn_ = self.eval(next);
            if !(fn_.abs() < fy.abs()) {
                break;
            }
            let done = (next - y).abs() <= 1e-15 * y.abs();
            y = next;
            fy = fn_;
            if done {
                break;
            }
        }
        y
    }

    /// Root of largest magnitude from the closed form.
    fn dominant_root(&self) -> f64 {
        let (a, b, c) = (self.b2, self.b1, self.b0);
        // depressed cubic t³ + pt + q with y = t − a/3
        let shift = a / 3.0;
        let p = b - a * a / 3.0;
        let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
        let cands: Vec<f64> = if p < 0.0 && 4.0 * p * p * p + 27.0 * q * q < 0.0 {
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let th = arg.acos() / 3.0;
            (0..3).map(|k| m * (th - 2.0 * PI * k as f64 / 3.0).cos() - shift).collect()
        } else {
            let d = q * q / 4.0 + p * p * p / 27.0;
            let big = -(q.signum()) * (q.abs() / 2.0 + d.max(0.0).sqrt()).cbrt();
            let t = if big != 0.0 { big - p / (3.0 * big) } else { 0.0 };
            vec![t - shift]
        };
        cands.into_iter().max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap_or(0.0)
    }

    /// All real roots, ascending, each polished by Newton's method.
    pub fn real_roots(&self) -> Vec<f64> {
        let r1 = self.polish(self.dominant_root());
        let eps = f64::EPSILON;
        let (p1, q1) = if r1 == 0.0 {
            (self.b2, self.b1)
        } else {
            // (y − r₁)(y² + p y + q): q = −b₀/r₁ = b₁ + p r₁, p = b₂ + r₁ = (q − b₁)/r₁
            let q_div = -self.b0 / r1;
            let p_add = self.b2 + r1;
            let p_div = (q_div - self.b1) / r1;
            let err_add = eps * self.b2.abs().max(r1.abs());
            let err_div = eps * q_div.abs().max(self.b1.abs()) / r1.abs();
            let p = if err_div < err_add { p_div } else { p_add };
            let q_add = self.b1 + p * r1;
            let q = if eps * q_div.abs() <= eps * self.b1.abs().max((p * r1).abs()) { q_div } else { q_add };
            (p, q)
        };
        let mut roots = vec![r1];
        let disc = p1 * p1 - 4.0 * q1;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let big = -0.5 * (p1 + p1.signum() * s);
            let big = if p1 == 0.0 { 0.5 * s } else { big };
            let small = if big != 0.0 { q1 / big } else { -big };
            for y in [big, small] {
                roots.push(self.polish(y));
            }
        }
        roots.sort_by(f64::total_cmp);
        roots
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_roots(r: [f64; 3]) -> Cubic {
        Cubic::new(-(r[0] + r[1] + r[2]), r[0] * r[1] + r[1] * r[2] + r[0] * r[2], -r[0] * r[1] * r[2])
    }

    #[test]
    fn three_simple_roots() {
        let c = from_roots([-2.0, 0.5, 3.0]);
        let r = c.real_roots();
        assert_eq!(r.len(), 3);
        for (a, b) in r.iter().zip([-2.0, 0.5, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(c.discriminant() > 0.0);
    }

    #[test]
    fn single_real_root() {
        // (y − 1)(y² + 1)
        let c = Cubic::new(-1.0, 1.0, -1.0);
        assert_eq!(c.real_roots(), vec![1.0]);
        assert!(c.discriminant() < 0.0);
    }

    #[test]
    fn close_pair_far_from_third_root() {
        let d = 3e-8;
        let c = from_roots([-d, d, 0.9]);
        let r = c.real_roots();
        assert_eq!(r.len(), 3);
        assert!((r[0] + d).abs() < 1e-12 * d.max(1.0) && (r[0] / -d - 1.0).abs() < 1e-6);
        assert!((r[1] / d - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_root() {
        let c = Cubic::new(1.0, -2.0, 0.0);
        let r = c.real_roots();
        assert_eq!(r, vec![-2.0, 0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn recovers_roots(a in -1e3f64..1e3, b in -1e3f64..1e3, c in -1e3f64..1e3) {
            let mut want = [a, b, c];
            want.sort_by(f64::total_cmp);
            prop_assume!(want[1] - want[0] > 1e-3 && want[2] - want[1] > 1e-3);
            let got = from_roots(want).real_roots();
            prop_assert_eq!(got.len(), 3);
            let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (g, w) in got.iter().zip(want) {
                prop_assert!((g - w).abs() <= 1e-9 * scale, "{} vs {}", g, w);
            }
        }

        #[test]
        fn roots_have_small_residual(b2 in -10f64..10.0, b1 in -10f64..10.0, b0 in -10f64..10.0) {
            let c = Cubic::new(b2, b1, b0);
            let roots = c.real_roots();
            prop_assert!(!roots.is_empty() && roots.len() <= 3);
            for y in roots {
                prop_assert!(c.relative_residual(y) < 1e-12);
            }
        }
    }
}
