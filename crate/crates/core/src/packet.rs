//! Wave packets `φ_Q(x) = |Q|^(1/2) e^{2πixξ_Q} φ(|Q|x)` and the scale probe
//! for their derivatives.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tiling::{cmp_f64_ratio, IntervalQ, Location, Tiling};
use crate::window::{Window, MAX_WINDOW_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WavePacket {
    pub cell: IntervalQ,
}

impl WavePacket {
    pub fn new(cell: IntervalQ) -> Self {
        Self { cell }
    }

    pub fn modulation(&self) -> f64 {
        self.cell.center()
    }

    pub fn scale(&self) -> f64 {
        self.cell.length() as f64
    }

    /// `φ_Q` vanishes for `|x| >= 1 / (4|Q|)`.
    pub fn half_support(&self) -> f64 {
        0.25 / self.scale()
    }

    pub fn eval(&self, w: &Window, x: f64) -> Complex64 {
        let q = self.scale();
        let env = w.eval(q * x);
        if env == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(q.sqrt() * env, 2.0 * PI * x * self.modulation())
    }

    /// `φ̂_Q(ν) = |Q|^(-1/2) φ̂((ν - ξ_Q) / |Q|)`.
    pub fn fourier(&self, w: &Window, nu: f64) -> f64 {
        let q = self.scale();
        w.fourier((nu - self.modulation()) / q) / q.sqrt()
    }
}

/// `φ_ξ`: the packet of the cell containing `ξ`, or `None` on a boundary.
pub fn packet_for(t: &Tiling, xi: f64) -> Result<Option<WavePacket>> {
    Ok(match t.locate(xi)? {
        Location::Cell { cell, .. } => Some(WavePacket::new(cell)),
        Location::Boundary => None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeProbe {
    pub xi: f64,
    pub k: usize,
    pub cell: IntervalQ,
    pub r: f64,
    /// `φ_ξ` vanishes outside `[-r/2, r/2]`.
    pub support_ok: bool,
    /// `sup_x |∂^k (e^{-2πixξ} φ_ξ(x))| · r^(1/2 + k)`.
    pub ratio: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Samples across the support used to estimate the supremum.
const PROBE_SAMPLES: usize = 4000;

pub fn derivative_bound_probe(w: &Window, t: &Tiling, xi: f64, k: usize) -> Result<DerivativeProbe> {
    if k > MAX_WINDOW_ORDER {
        return Err(Error::InvalidInput(format!("derivative order {k} exceeds {MAX_WINDOW_ORDER}")));
    }
    let packet = packet_for(t, xi)?.ok_or(Error::BoundaryFrequency(xi))?;
    let q = packet.scale();
    let m = t.lambda.abs().max(xi.abs());
    let r = m.powf(-0.5);
    // 1/(4|Q|) <= r/2  ⇔  max{|λ|, |ξ|} <= 4|Q|², decided exactly
    let l = BigInt::from(packet.cell.length());
    let support_ok = cmp_f64_ratio(m, &(&l * &l * 4), &BigInt::from(1)) != Ordering::Greater;

    // e^{-2πixξ} φ_ξ(x) = |Q|^(1/2) e^{2πixδ} φ(|Q|x) with δ = ξ_Q - ξ
    let delta = packet.modulation() - xi;
    let coeffs: Vec<Complex64> = (0..=k)
        .map(|j| Complex64::new(0.0, 2.0 * PI * delta).powu((k - j) as u32) * binomial(k, j) * q.powi(j as i32))
        .collect();
    let mut sup: f64 = 0.0;
    for s in 0..=PROBE_SAMPLES {
        let u = -0.25 + 0.5 * s as f64 / PROBE_SAMPLES as f64;
        let mut v = Complex64::new(0.0, 0.0);
        for (j, c) in coeffs.iter().enumerate() {
            v += c * w.deriv(j, u);
        }
        sup = sup.max(v.norm());
    }
    sup *= q.sqrt();
    Ok(DerivativeProbe { xi, k, cell: packet.cell, r, support_ok, ratio: sup * r.powf(0.5 + k as f64) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiling::build_tiling;
    use crate::window::make_window;

    #[test]
    fn packet_norm_is_window_norm() {
        let w = make_window("default", 4096).unwrap();
        let t = build_tiling(10.0, 100.0).unwrap();
        for c in &t.cells {
            let p = WavePacket::new(*c);
            let n = 20000;
            let a = p.half_support();
            let h = 2.0 * a / n as f64;
            let norm2: f64 = (0..=n).map(|i| p.eval(&w, -a + i as f64 * h).norm_sqr() * h).sum();
            assert!((norm2.sqrt() - w.l2_norm).abs() < 1e-8 * w.l2_norm);
        }
    }

    #[test]
    fn k0_ratio_bound_and_support() {
        let w = make_window("default", 4096).unwrap();
        let t = build_tiling(10.0, 100.0).unwrap();
        let p = derivative_bound_probe(&w, &t, 12.0, 0).unwrap();
        assert!(p.support_ok);
        assert!((p.r - 12f64.powf(-0.5)).abs() < 1e-15);
        assert!(p.ratio <= 3f64.sqrt() * w.sup_abs);
        assert!(matches!(derivative_bound_probe(&w, &t, 9.0, 1), Err(Error::BoundaryFrequency(_))));
    }
}
