//! Reference computations for the acceptance target, written without the
//! library's quadrature, root finding, FFT or exact-comparison code.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rayon::prelude::*;

use osclab::field::SmoothField;

pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Largest `n` with `n² <= t`. Integers below 2^53 are exact in `f64`, so
/// the comparisons are exact.
pub fn isqrt(t: f64) -> i64 {
    let mut n = t.sqrt() as i64 + 2;
    while (n * n) as f64 > t {
        n -= 1;
    }
    n
}

/// The cell of the tiling holding `xi` in its interior, or `None` on an
/// endpoint. Cells: `[k n0, (k+1) n0]` inside `|ξ| < n0²`, `[n², (n+1)²]`
/// and mirrors outside.
pub fn cell(lambda: f64, xi: f64) -> Option<(i64, i64)> {
    let n0 = isqrt(lambda.abs());
    let a = xi.abs();
    if a < (n0 * n0) as f64 {
        let mut k = (xi / n0 as f64).floor() as i64;
        while ((k * n0) as f64) > xi {
            k -= 1;
        }
        while (((k + 1) * n0) as f64) <= xi {
            k += 1;
        }
        if xi == (k * n0) as f64 {
            return None;
        }
        return Some((k * n0, (k + 1) * n0));
    }
    let n = isqrt(a);
    if a == (n * n) as f64 {
        return None;
    }
    if xi > 0.0 {
        Some((n * n, (n + 1) * (n + 1)))
    } else {
        Some((-(n + 1) * (n + 1), -n * n))
    }
}

/// `(1/9)|Q|² <= max{|λ|, |ξ|} <= 4|Q|²` in rationals.
pub fn boxsize(lambda: f64, len: i64, xi: f64) -> bool {
    let m = rational(lambda.abs().max(xi.abs()));
    let l2 = int(len * len);
    m.clone() * int(9) >= l2 && m <= l2 * int(4)
}

/// `Σ_k c_k e^{2πikx}` on the grid `x_m = -1/2 + m/N`.
pub fn trig_samples(n: usize, coeffs: &[(i64, Complex64)]) -> Vec<Complex64> {
    (0..n)
        .map(|m| {
            let x = -0.5 + m as f64 / n as f64;
            coeffs.iter().map(|(k, c)| c * Complex64::from_polar(1.0, 2.0 * PI * *k as f64 * x)).sum()
        })
        .collect()
}

pub fn rel_l2(f: &[Complex64], g: &[Complex64]) -> f64 {
    let num: f64 = f.iter().zip(g).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = f.iter().map(|a| a.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Fourth-order central differences.
pub fn fd_gradient(f: &dyn SmoothField, x: &[f64]) -> Vec<f64> {
    let h = 1e-4;
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            let at = |y: &mut Vec<f64>, s: f64| {
                y[k] = x[k] + s * h;
                f.eval(y)
            };
            let v = (-at(&mut y, 2.0) + 8.0 * at(&mut y, 1.0) - 8.0 * at(&mut y, -1.0) + at(&mut y, -2.0)) / (12.0 * h);
            y[k] = x[k];
            v
        })
        .collect()
}

/// Root of `g` on `[a, b]` by the Illinois variant of regula falsi.
pub fn illinois(mut g: impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let (mut fa, mut fb) = (g(a), g(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = g(c);
        if fc == 0.0 || (b - a).abs() < 1e-15 {
            return Some(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
            return Some(0.5 * (a + b));
        }
    }
    Some(0.5 * (a + b))
}

/// `∫ F dσ` over `{ρ = 0} ∩ Π [lo_k, hi_k]` using the graph over the axes
/// other than `axis`, a tensor trapezoid rule with `n` nodes per axis and
/// the root of `ρ` along `axis` inside `[-b1, b1]`.
pub fn surface_integral(
    rho: &dyn SmoothField,
    b1: f64,
    axis: usize,
    lo: &[f64],
    hi: &[f64],
    n: usize,
    f: impl Fn(&[f64]) -> Complex64 + Sync,
) -> Complex64 {
    let dim = lo.len();
    let slice: Vec<usize> = (0..dim).filter(|&k| k != axis).collect();
    let m = slice.len();
    let total = n.pow(m as u32);
    let weights: Vec<f64> = slice.iter().map(|&k| (hi[k] - lo[k]) / (n - 1) as f64).collect();
    (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut x = vec![0.0; dim];
            let mut w = 1.0;
            let mut rem = flat;
            for (s, &k) in slice.iter().enumerate() {
                let i = rem % n;
                rem /= n;
                x[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (n - 1) as f64;
                w *= weights[s] * if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            }
            let mut y = x.clone();
            let root = illinois(
                |t| {
                    y[axis] = t;
                    rho.eval(&y)
                },
                -b1,
                b1,
            );
            let Some(t) = root else { return Complex64::new(0.0, 0.0) };
            if t < lo[axis] || t > hi[axis] {
                return Complex64::new(0.0, 0.0);
            }
            x[axis] = t;
            let v = f(&x);
            if v == Complex64::new(0.0, 0.0) {
                return v;
            }
            let g = fd_gradient(rho, &x);
            let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
            v * (w * norm / g[axis].abs())
        })
        .sum()
}

pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}
