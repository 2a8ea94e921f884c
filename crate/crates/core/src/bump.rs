//! The standard C^∞ bump `B(s) = exp(-1/(1 - s²))` on `(-1, 1)` with exact
//! derivatives of every order.
//!
//! Derivatives are carried as `B^(k)(s) = P_k(s) / (1 - s²)^(2k) · B(s)` where
//! the polynomials obey
//! `P_{k+1} = P_k' g² + 4k s g P_k - 2 s P_k`, `g = 1 - s²`.

use std::sync::OnceLock;

/// Highest derivative order tabulated for the bump.
pub const MAX_BUMP_ORDER: usize = 16;

fn poly_table() -> &'static [Vec<f64>] {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        // g = 1 - s², coefficients in ascending powers.
        let g = [1.0, 0.0, -1.0];
        let g2 = poly_mul(&g, &g);
        let mut out = vec![vec![1.0]];
        for k in 0..MAX_BUMP_ORDER {
            let p = &out[k];
            let dp = poly_deriv(p);
            let a = poly_mul(&dp, &g2);
            let b = poly_scale(&poly_mul(&poly_mul(&[0.0, 1.0], &g), p), 4.0 * k as f64);
            let c = poly_scale(&poly_mul(&[0.0, 1.0], p), -2.0);
            out.push(poly_add(&poly_add(&a, &b), &c));
        }
        out
    })
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
        .collect()
}

fn poly_scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

fn poly_deriv(a: &[f64]) -> Vec<f64> {
    if a.len() <= 1 {
        return vec![0.0];
    }
    a.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect()
}

fn poly_eval(a: &[f64], s: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

/// k-th derivative of the unit bump at `s`. Zero outside `(-1, 1)`.
pub fn unit_bump_deriv(k: usize, s: f64) -> f64 {
    assert!(k <= MAX_BUMP_ORDER, "bump derivative order {k} exceeds {MAX_BUMP_ORDER}");
    let g = 1.0 - s * s;
    if g <= 0.0 {
        return 0.0;
    }
    let p = poly_eval(&poly_table()[k], s);
    let log_mag = -1.0 / g - 2.0 * k as f64 * g.ln();
    p * log_mag.exp()
}

/// Bump `B((t - center) / half_width)` on the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump1D {
    pub center: f64,
    pub half_width: f64,
}

impl Bump1D {
    pub fn new(center: f64, half_width: f64) -> Self {
        assert!(half_width > 0.0, "bump half-width must be positive");
        Self { center, half_width }
    }

    pub fn eval(&self, t: f64) -> f64 {
        unit_bump_deriv(0, (t - self.center) / self.half_width)
    }

    pub fn deriv(&self, k: usize, t: f64) -> f64 {
        let s = (t - self.center) / self.half_width;
        unit_bump_deriv(k, s) * self.half_width.powi(-(k as i32))
    }

    /// Taylor coefficients `f^(k)(t) / k!` for `k = 0..=order`.
    pub fn taylor(&self, t: f64, order: usize) -> Vec<f64> {
        let mut fact = 1.0;
        (0..=order)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                self.deriv(k, t) / fact
            })
            .collect()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for k in 0..6 {
            for &s in &[-0.7, -0.2, 0.0, 0.35, 0.8] {
                let num = fd(|t| unit_bump_deriv(k, t), s, 1e-4);
                let exact = unit_bump_deriv(k + 1, s);
                let scale = exact.abs().max(1.0);
                assert!((num - exact).abs() < 1e-6 * scale, "k={k} s={s}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn vanishes_outside_support() {
        let b = Bump1D::new(0.2, 0.1);
        assert_eq!(b.eval(0.31), 0.0);
        assert_eq!(b.deriv(3, 0.0999), 0.0);
        assert!(b.eval(0.2) > 0.36 && b.eval(0.2) < 0.37);
    }

    #[test]
    fn scaled_derivative_chain_rule() {
        let b = Bump1D::new(-0.1, 0.25);
        let t = 0.02;
        let num = fd(|x| b.deriv(2, x), t, 1e-5);
        assert!((num - b.deriv(3, t)).abs() < 1e-5 * b.deriv(3, t).abs().max(1.0));
    }
}
