//! The window `φ = κ · (β * β)` with `β(x) = B(8x)` supported in `[-1/8, 1/8]`.
//!
//! `φ` is even, supported in `[-1/4, 1/4]` and `φ̂ = κ β̂² >= 0`. The default
//! profile picks `κ` so that `min_{|ν| <= 1/2} φ̂ = 1`; the `raw` profile
//! keeps `κ = 1`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::bump::Bump1D;
use crate::error::{Error, Result};

/// Highest tabulated derivative of `φ`.
pub const MAX_WINDOW_ORDER: usize = 8;

pub const DEFAULT_GRID: usize = 1 << 14;

/// Spacing of the `β̂` table.
const FOURIER_STEP: f64 = 1.0 / 64.0;
/// Intervals used to sample `β` for its transform.
const FOURIER_SAMPLES: usize = 2048;

#[derive(Debug, Clone, Serialize)]
pub struct Window {
    pub profile: String,
    pub half_width: f64,
    /// Table intervals across `[-1/4, 1/4]`.
    pub grid: usize,
    pub scale: f64,
    /// `min φ̂` on `[-1/2, 1/2]` before scaling.
    pub raw_floor: f64,
    pub fourier_floor: f64,
    /// `C = 1 / fourier_floor`.
    pub analysis_constant: f64,
    pub sup_abs: f64,
    pub l2_norm: f64,
    #[serde(skip)]
    tables: Vec<Vec<f64>>,
    #[serde(skip)]
    beta_hat: Vec<f64>,
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fa.resize(size, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fb.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    fa.iter().take(len).map(|c| c.re / size as f64).collect()
}

/// Six-point Lagrange interpolation in a uniform table starting at `x0`.
fn interp6(table: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let t = (x - x0) / h;
    let n = table.len();
    let i = t.floor() as isize;
    let start = (i - 2).clamp(0, n as isize - 6) as usize;
    let mut acc = 0.0;
    for a in 0..6 {
        let xa = (start + a) as f64;
        let mut w = 1.0;
        for b in 0..6 {
            if a != b {
                w *= (t - (start + b) as f64) / (xa - (start + b) as f64);
            }
        }
        acc += w * table[start + a];
    }
    acc
}

pub fn make_window(profile: &str, grid: usize) -> Result<Window> {
    let normalize = match profile {
        "default" => true,
        "raw" => false,
        other => return Err(Error::InvalidInput(format!("unknown window profile `{other}`; known: default, raw"))),
    };
    if grid < 64 || grid % 2 != 0 {
        return Err(Error::InvalidInput(format!("window grid must be an even integer >= 64, got {grid}")));
    }
    let beta = Bump1D::new(0.0, 0.125);
    let h = 0.5 / grid as f64;
    let half = grid / 2;
    // β^(k) on y_j = -1/8 + j h, j = 0..=grid/2
    let beta_tables: Vec<Vec<f64>> = (0..=MAX_WINDOW_ORDER)
        .map(|k| (0..=half).map(|j| beta.deriv(k, -0.125 + j as f64 * h)).collect())
        .collect();
    // φ^(k) = β^(⌊k/2⌋) * β^(k - ⌊k/2⌋) on x_i = -1/4 + i h
    let mut tables: Vec<Vec<f64>> = (0..=MAX_WINDOW_ORDER)
        .map(|k| {
            let a = k / 2;
            convolve(&beta_tables[a], &beta_tables[k - a]).into_iter().map(|v| v * h).collect()
        })
        .collect();

    // β̂ on u_k = k · FOURIER_STEP through one zero-padded transform
    let hy = 0.25 / FOURIER_SAMPLES as f64;
    let size = (1.0 / (FOURIER_STEP * hy)).round() as usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    let m = FOURIER_SAMPLES / 2;
    for j in 0..=m {
        let v = beta.eval(j as f64 * hy) * hy;
        buf[j] = Complex64::new(v, 0.0);
        if j > 0 {
            buf[size - j] = Complex64::new(v, 0.0);
        }
    }
    FftPlanner::<f64>::new().plan_fft_forward(size).process(&mut buf);
    let beta_hat: Vec<f64> = buf.iter().take(size / 2).map(|c| c.re).collect();

    let mut w = Window {
        profile: profile.to_string(),
        half_width: 0.25,
        grid,
        scale: 1.0,
        raw_floor: 0.0,
        fourier_floor: 0.0,
        analysis_constant: 0.0,
        sup_abs: 0.0,
        l2_norm: 0.0,
        tables: Vec::new(),
        beta_hat,
    };
    let dense = 4096;
    let raw_floor = (0..=dense)
        .map(|i| w.raw_fourier(-0.5 + i as f64 / dense as f64))
        .fold(f64::INFINITY, f64::min);
    if !(raw_floor > 0.0) {
        return Err(Error::InvalidInput(format!("window transform is not positive on [-1/2, 1/2]: min {raw_floor:e}")));
    }
    let scale = if normalize { 1.0 / raw_floor } else { 1.0 };
    for t in &mut tables {
        t.iter_mut().for_each(|v| *v *= scale);
    }
    w.scale = scale;
    w.raw_floor = raw_floor;
    w.fourier_floor = raw_floor * scale;
    w.analysis_constant = 1.0 / w.fourier_floor;
    w.sup_abs = tables[0].iter().fold(0.0, |a, &b| a.max(b.abs()));
    w.l2_norm = (tables[0].iter().map(|v| v * v).sum::<f64>() * h).sqrt();
    w.tables = tables;
    Ok(w)
}

impl Window {
    pub fn default_window() -> Result<Self> {
        make_window("default", DEFAULT_GRID)
    }

    fn table_step(&self) -> f64 {
        0.5 / self.grid as f64
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.deriv(0, x)
    }

    /// `φ^(k)(x)`.
    pub fn deriv(&self, k: usize, x: f64) -> f64 {
        assert!(k <= MAX_WINDOW_ORDER, "window derivative order {k} exceeds {MAX_WINDOW_ORDER}");
        if x.abs() >= self.half_width {
            return 0.0;
        }
        interp6(&self.tables[k], -0.25, self.table_step(), x)
    }

    fn raw_fourier(&self, nu: f64) -> f64 {
        let a = nu.abs();
        let limit = (self.beta_hat.len() - 4) as f64 * FOURIER_STEP;
        if a >= limit {
            return 0.0;
        }
        let b = interp6(&self.beta_hat, 0.0, FOURIER_STEP, a);
        b * b
    }

    /// `φ̂(ν) = ∫ φ(x) e^{-2πixν} dx`.
    pub fn fourier(&self, nu: f64) -> f64 {
        self.scale * self.raw_fourier(nu)
    }

    /// Table nodes `(x_i, φ(x_i))`, for dumping.
    pub fn samples(&self, stride: usize) -> Vec<(f64, f64)> {
        let h = self.table_step();
        self.tables[0].iter().enumerate().step_by(stride.max(1)).map(|(i, &v)| (-0.25 + i as f64 * h, v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_invariants() {
        let w = make_window("default", 4096).unwrap();
        assert_eq!(w.eval(0.25), 0.0);
        assert_eq!(w.eval(-0.3), 0.0);
        assert!((w.eval(0.1) - w.eval(-0.1)).abs() < 1e-12 * w.sup_abs);
        assert!((w.fourier_floor - 1.0).abs() < 1e-12);
        assert!(w.raw_floor > 0.0);
        assert!(w.eval(0.2) > 0.0);
    }

    #[test]
    fn transform_matches_direct_quadrature() {
        let w = make_window("default", 4096).unwrap();
        let n = 8192;
        let h = 0.5 / n as f64;
        for &nu in &[0.0, 0.3, 0.5, 2.0, 7.5] {
            let direct: f64 = (0..=n)
                .map(|i| {
                    let x = -0.25 + i as f64 * h;
                    w.eval(x) * (2.0 * std::f64::consts::PI * nu * x).cos() * h
                })
                .sum();
            assert!((direct - w.fourier(nu)).abs() < 1e-9 * w.fourier(0.0), "nu={nu}: {direct} vs {}", w.fourier(nu));
        }
    }

    #[test]
    fn derivative_tables_consistent() {
        let w = make_window("default", 4096).unwrap();
        let dx = 1e-5;
        for k in 0..4 {
            for &x in &[-0.2, -0.05, 0.0, 0.13] {
                let fd = (w.deriv(k, x + dx) - w.deriv(k, x - dx)) / (2.0 * dx);
                let exact = w.deriv(k + 1, x);
                let scale = w.tables[k + 1].iter().fold(0.0, |a: f64, &b| a.max(b.abs()));
                assert!((fd - exact).abs() < 1e-6 * scale, "k={k} x={x}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn raw_profile_floor_below_one() {
        let w = make_window("raw", 1024).unwrap();
        assert_eq!(w.scale, 1.0);
        assert!(w.fourier_floor < 1.0);
        assert!(make_window("bogus", 1024).is_err());
    }
}
