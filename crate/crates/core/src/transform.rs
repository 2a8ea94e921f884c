//! The analysis map `V` and its reconstruction on periodic signals.
//!
//! Signals live on `[-1/2, 1/2)` sampled at `x_m = -1/2 + m/N`. Their
//! frequencies are the integers `ν` with `-N/2 <= ν < N/2`, and
//! `f̂(ν) = ∫ f(x) e^{-2πixν} dx`. A bin belongs to the cell with
//! `lo <= ν < hi`.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::packet::WavePacket;
use crate::tiling::{IntervalQ, Location, Tiling};
use crate::window::Window;

/// Relative energy at `|ν| >= xi_max` tolerated as round-off.
pub const BAND_TOL: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub values: Vec<Complex64>,
}

pub fn frequency_of_bin(b: usize, n: usize) -> i64 {
    if b < n / 2 {
        b as i64
    } else {
        b as i64 - n as i64
    }
}

fn sign(nu: i64) -> f64 {
    if nu.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Smallest power of two `N` with `N/2 > 2 xi_max`.
pub fn grid_size_for(xi_max: f64) -> usize {
    let mut n = 8usize;
    while (n / 2) as f64 <= 2.0 * xi_max {
        n *= 2;
    }
    n
}

impl Signal {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, m: usize) -> f64 {
        -0.5 + m as f64 / self.len() as f64
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> Complex64) -> Self {
        Self { values: (0..n).map(|m| f(-0.5 + m as f64 / n as f64)).collect() }
    }

    /// `f̂(ν)` indexed by bin.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let n = self.len();
        let mut buf = self.values.clone();
        FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
        for (b, v) in buf.iter_mut().enumerate() {
            *v *= sign(frequency_of_bin(b, n)) / n as f64;
        }
        buf
    }

    pub fn from_spectrum(spec: &[Complex64]) -> Self {
        let n = spec.len();
        let mut buf: Vec<Complex64> =
            spec.iter().enumerate().map(|(b, v)| v * sign(frequency_of_bin(b, n))).collect();
        FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut buf);
        Self { values: buf }
    }

    /// `‖f‖₂` over one period.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.len() as f64).sqrt()
    }

    /// Random spectrum on `|ν| < xi_max`.
    pub fn random_bandlimited(n: usize, xi_max: f64, rng: &mut impl Rng) -> Self {
        let spec: Vec<Complex64> = (0..n)
            .map(|b| {
                if ((frequency_of_bin(b, n)).abs() as f64) < xi_max {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Self::from_spectrum(&spec)
    }
}

/// Fraction of the energy at `|ν| >= xi_max`.
pub fn out_of_band_energy(sig: &Signal, xi_max: f64) -> f64 {
    let spec = sig.spectrum();
    let n = sig.len();
    let (mut inside, mut outside) = (0.0, 0.0);
    for (b, v) in spec.iter().enumerate() {
        if (frequency_of_bin(b, n).abs() as f64) < xi_max {
            inside += v.norm_sqr();
        } else {
            outside += v.norm_sqr();
        }
    }
    if inside + outside == 0.0 {
        0.0
    } else {
        outside / (inside + outside)
    }
}

/// Zeroes every frequency with `|ν| >= xi_max`.
pub fn project_band_limited(sig: &Signal, xi_max: f64) -> Signal {
    let n = sig.len();
    let mut spec = sig.spectrum();
    for (b, v) in spec.iter_mut().enumerate() {
        if (frequency_of_bin(b, n).abs() as f64) >= xi_max {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    Signal::from_spectrum(&spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCoefficients {
    pub cell: IntervalQ,
    /// `Vf(y_m, ξ)` for `ξ` in the interior of the cell.
    pub values: Vec<Complex64>,
}

/// `Vf(y, ξ)`, stored once per cell since it is constant in `ξ` there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficients {
    pub n: usize,
    pub cells: Vec<CellCoefficients>,
}

impl Coefficients {
    /// `‖Vf‖²_{L²(dy dξ)}`.
    pub fn norm_sq(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.cell.length() as f64 * c.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.n as f64)
            .sum()
    }

    /// `Vf(y_m, ξ)`; zero on cell boundaries.
    pub fn value(&self, t: &Tiling, m: usize, xi: f64) -> Result<Complex64> {
        match t.locate(xi)? {
            Location::Boundary => Ok(Complex64::new(0.0, 0.0)),
            Location::Cell { cell, .. } => Ok(self
                .cells
                .iter()
                .find(|c| c.cell == cell)
                .map(|c| c.values[m])
                .unwrap_or(Complex64::new(0.0, 0.0))),
        }
    }
}

fn check_grid(t: &Tiling, n: usize) -> Result<()> {
    if n < 8 || (n / 2) as f64 <= 2.0 * t.xi_max {
        return Err(Error::InvalidInput(format!(
            "{n} samples do not resolve xi_max = {}; need N/2 > 2 xi_max (try N = {})",
            t.xi_max,
            grid_size_for(t.xi_max)
        )));
    }
    Ok(())
}

/// `Vf(y, ξ) = |Q|^(-1/2) (T_Q f)(y)` for `ξ ∈ Q`, where
/// `(T_Q f)^ = f̂ χ_Q / φ̂((· - ξ_Q)/|Q|)`.
pub fn analysis(w: &Window, t: &Tiling, f: &Signal) -> Result<Coefficients> {
    let n = f.len();
    check_grid(t, n)?;
    let energy = out_of_band_energy(f, t.xi_max);
    if energy > BAND_TOL {
        return Err(Error::BandLimit { xi_max: t.xi_max, energy });
    }
    let spec = f.spectrum();
    let mut per_cell: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); t.cells.len()];
    for (b, v) in spec.iter().enumerate() {
        let nu = frequency_of_bin(b, n) as f64;
        if nu.abs() >= t.xi_max {
            continue;
        }
        if let Some(c) = t.bin_cell(nu) {
            per_cell[c].push((b, *v));
        }
    }
    let cells = t
        .cells
        .par_iter()
        .zip(per_cell.par_iter())
        .map(|(cell, bins)| {
            let q = cell.length() as f64;
            let mut g = vec![Complex64::new(0.0, 0.0); n];
            for &(b, v) in bins {
                let nu = frequency_of_bin(b, n) as f64;
                g[b] = v / w.fourier((nu - cell.center()) / q) / q.sqrt();
            }
            CellCoefficients { cell: *cell, values: Signal::from_spectrum(&g).values }
        })
        .collect();
    Ok(Coefficients { n, cells })
}

/// `∫∫ Vf(y, ξ) φ_ξ(x - y) dy dξ`; the `ξ` integral is exact since the
/// integrand is constant on each cell.
pub fn synthesis(w: &Window, t: &Tiling, coeffs: &Coefficients) -> Result<Signal> {
    let n = coeffs.n;
    check_grid(t, n)?;
    for c in &coeffs.cells {
        if !t.cells.contains(&c.cell) {
            return Err(Error::CellMismatch);
        }
        if c.values.len() != n {
            return Err(Error::InvalidInput(format!("cell holds {} samples, expected {n}", c.values.len())));
        }
    }
    let parts: Vec<Vec<Complex64>> = coeffs
        .cells
        .par_iter()
        .map(|c| {
            let packet = WavePacket::new(c.cell);
            let q = packet.scale();
            let spec = Signal::new(c.values.clone()).spectrum();
            spec.iter()
                .enumerate()
                .map(|(b, v)| {
                    if *v == Complex64::new(0.0, 0.0) {
                        return *v;
                    }
                    v * (q * packet.fourier(w, frequency_of_bin(b, n) as f64))
                })
                .collect()
        })
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); n];
    for p in parts {
        for (a, b) in total.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok(Signal::from_spectrum(&total))
}

/// `‖f - g‖₂ / ‖f‖₂`.
pub fn relative_error(f: &Signal, g: &Signal) -> f64 {
    let num: f64 = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = f.values.iter().map(|a| a.norm_sqr()).sum();
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiling::build_tiling;
    use crate::window::make_window;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spectrum_convention() {
        let n = 64;
        let s = Signal::from_fn(n, |x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 3.0 * x));
        let spec = s.spectrum();
        assert!((spec[3] - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        let back = Signal::from_spectrum(&spec);
        assert!(relative_error(&s, &back) < 1e-14);
    }

    #[test]
    fn round_trip_and_bound() {
        let w = make_window("default", 4096).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &lambda in &[1.0, 10.0, 100.0] {
            let xi_max = 4.0 * lambda + 20.0;
            let t = build_tiling(lambda, xi_max).unwrap();
            let n = grid_size_for(xi_max);
            let f = Signal::random_bandlimited(n, xi_max, &mut rng);
            let c = analysis(&w, &t, &f).unwrap();
            let g = synthesis(&w, &t, &c).unwrap();
            assert!(relative_error(&f, &g) < 1e-10);
            let ratio = c.norm_sq() / f.l2_norm().powi(2);
            assert!(ratio <= w.analysis_constant + 1e-6, "{ratio}");
        }
    }

    #[test]
    fn single_cell_support() {
        let w = make_window("default", 4096).unwrap();
        let t = build_tiling(10.0, 30.0).unwrap();
        let n = grid_size_for(30.0);
        let f = Signal::from_fn(n, |x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 11.0 * x));
        let c = analysis(&w, &t, &f).unwrap();
        for cc in &c.cells {
            let nz = cc.values.iter().any(|v| v.norm() > 1e-12);
            assert_eq!(nz, cc.cell.lo == 9, "{:?}", cc.cell);
        }
        assert_eq!(c.value(&t, 0, 9.0).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(c.value(&t, 5, 10.0).unwrap(), c.value(&t, 5, 15.5).unwrap());
    }

    #[test]
    fn errors() {
        let w = make_window("default", 1024).unwrap();
        let t = build_tiling(10.0, 30.0).unwrap();
        let n = grid_size_for(30.0);
        let f = Signal::from_fn(n, |x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 40.0 * x));
        assert!(matches!(analysis(&w, &t, &f), Err(Error::BandLimit { .. })));
        assert!(matches!(analysis(&w, &t, &Signal::zeros(32)), Err(Error::InvalidInput(_))));
        let other = build_tiling(17.0, 30.0).unwrap();
        let c = analysis(&w, &t, &Signal::zeros(n)).unwrap();
        assert!(c.norm_sq() == 0.0);
        assert!(matches!(synthesis(&w, &other, &c), Err(Error::CellMismatch)));
        let z = synthesis(&w, &t, &c).unwrap();
        assert!(z.values.iter().all(|v| v.norm() == 0.0));
    }
}
