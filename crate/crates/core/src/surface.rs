//! Graph charts of `M = {ρ = 0}` over coordinate slices and quadrature of
//! functions on `M` with respect to surface measure.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::SmoothField;
use crate::instance::ProblemInstance;

/// Nodes per parallel work unit. Partial sums are combined in chunk order,
/// so serial and parallel runs give identical bits.
const CHUNK: usize = 4096;

pub fn default_tol(b1: f64) -> f64 {
    1e-12 * (1.0 + b1.abs())
}

/// Inserts `t` at position `j0` of the slice point.
pub fn assemble(j0: usize, slice: &[f64], t: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(slice.len() + 1);
    x.extend_from_slice(&slice[..j0]);
    x.push(t);
    x.extend_from_slice(&slice[j0..]);
    x
}

fn axis_deriv(rho: &dyn SmoothField, j0: usize, x: &[f64]) -> f64 {
    let mut alpha = vec![0u8; x.len()];
    alpha[j0] = 1;
    rho.deriv(&alpha, x)
}

/// Root of `t ↦ ρ(slice with x_{j0} = t)` on `[-b1, b1]` by Newton steps,
/// falling back to bisection whenever a step leaves the bracket.
pub fn solve_on_axis(rho: &dyn SmoothField, b1: f64, j0: usize, slice: &[f64], tol: f64) -> Result<f64> {
    let f = |t: f64| rho.eval(&assemble(j0, slice, t));
    let (mut lo, mut hi) = (-b1, b1);
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::NoRoot { axis: j0, slice: slice.to_vec() });
    }
    let rising = fhi > 0.0;
    // linear interpolation start
    let mut t = lo - flo * (hi - lo) / (fhi - flo);
    for _ in 0..200 {
        let x = assemble(j0, slice, t);
        let ft = rho.eval(&x);
        if (ft > 0.0) == rising {
            hi = t;
        } else {
            lo = t;
        }
        let slope = axis_deriv(rho, j0, &x);
        let newton = t - ft / slope;
        if ft.abs() <= tol {
            // one polishing step when it stays inside the bracket
            if slope != 0.0 && newton > lo && newton < hi && f(newton).abs() <= ft.abs() {
                return Ok(newton);
            }
            return Ok(t);
        }
        t = if slope != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
            let ft = f(t);
            if ft.abs() <= tol.max(1e-10) {
                return Ok(t);
            }
            return Err(Error::NonConvergence(format!("root bracket collapsed with |rho| = {ft:e}")));
        }
    }
    Err(Error::NonConvergence(format!("graph solve along axis {j0} did not converge")))
}

/// The coordinate `x_{j0}` on `M` above a slice point.
pub fn graph_solve(inst: &ProblemInstance, j0: usize, slice_point: &[f64], tol: f64) -> Result<f64> {
    let n = inst.dim();
    if j0 >= n {
        return Err(Error::InvalidInput(format!("axis {j0} out of range for dimension {n}")));
    }
    if slice_point.len() != n - 1 {
        return Err(Error::InvalidInput(format!("slice point needs {} coordinates", n - 1)));
    }
    if slice_point.iter().any(|v| v.abs() >= inst.b1) {
        return Err(Error::OutOfBox(slice_point.to_vec()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    solve_on_axis(inst.rho.as_ref(), inst.b1, j0, slice_point, tol)
}

/// `M` as the graph `x_{j0} = Ψ(slice)`.
#[derive(Debug, Clone, Copy)]
pub struct GraphChart<'a> {
    pub inst: &'a ProblemInstance,
    pub j0: usize,
}

impl<'a> GraphChart<'a> {
    pub fn new(inst: &'a ProblemInstance, j0: usize) -> Result<Self> {
        if j0 >= inst.dim() {
            return Err(Error::InvalidInput(format!("axis {j0} out of range for dimension {}", inst.dim())));
        }
        Ok(Self { inst, j0 })
    }

    pub fn psi(&self, slice: &[f64]) -> Result<f64> {
        solve_on_axis(self.inst.rho.as_ref(), self.inst.b1, self.j0, slice, default_tol(self.inst.b1))
    }

    pub fn point(&self, slice: &[f64]) -> Result<Vec<f64>> {
        Ok(assemble(self.j0, slice, self.psi(slice)?))
    }

    /// `∂_j Ψ = -∂_j ρ / ∂_{j0} ρ` in slice order.
    pub fn grad_psi(&self, slice: &[f64]) -> Result<Vec<f64>> {
        let x = self.point(slice)?;
        let g = self.inst.rho.gradient(&x);
        let g0 = g[self.j0];
        Ok(g.iter().enumerate().filter(|(k, _)| *k != self.j0).map(|(_, v)| -v / g0).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// Tensor midpoint rule with the given per-axis counts.
    Midpoint,
    /// Shifted Halton points; `nodes` points, shift drawn from `seed`.
    QuasiRandom { nodes: usize, seed: u64 },
}

/// A quadrature over the slice box `Π [lo_k, hi_k]` of a graph chart.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceQuad {
    pub j0: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
    pub rule: Rule,
}

impl SurfaceQuad {
    pub fn midpoint(j0: usize, lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Self {
        Self { j0, lo, hi, counts, rule: Rule::Midpoint }
    }

    /// Same count on every axis of the slice box `[-b0, b0]^(2d-1)`.
    pub fn on_b0(inst: &ProblemInstance, j0: usize, count: usize) -> Self {
        let m = inst.dim() - 1;
        Self::midpoint(j0, vec![-inst.b0; m], vec![inst.b0; m], vec![count; m])
    }

    pub fn refined(&self, factor: usize) -> Self {
        let mut q = self.clone();
        match &mut q.rule {
            Rule::Midpoint => q.counts.iter_mut().for_each(|c| *c *= factor),
            Rule::QuasiRandom { nodes, .. } => *nodes *= factor.pow(self.lo.len() as u32),
        }
        q
    }

    pub fn node_count(&self) -> usize {
        match self.rule {
            Rule::Midpoint => self.counts.iter().product(),
            Rule::QuasiRandom { nodes, .. } => nodes,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let m = dim - 1;
        if self.j0 >= dim {
            return Err(Error::InvalidInput(format!("axis {} out of range for dimension {dim}", self.j0)));
        }
        if self.lo.len() != m || self.hi.len() != m {
            return Err(Error::InvalidInput(format!("slice box must have {m} axes")));
        }
        if matches!(self.rule, Rule::Midpoint) && (self.counts.len() != m || self.counts.contains(&0)) {
            return Err(Error::InvalidInput(format!("need {m} positive per-axis counts")));
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidInput("slice box has an empty axis".into()));
        }
        Ok(())
    }

    /// `Σ w_k g(s_k)` over the slice nodes.
    pub fn integrate_slice<F>(&self, g: F) -> Complex64
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let m = self.lo.len();
        let total = self.node_count();
        let volume: f64 = self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product();
        let weight = volume / total as f64;
        let shift: Vec<f64> = match self.rule {
            Rule::QuasiRandom { seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..m).map(|_| rng.gen::<f64>()).collect()
            }
            Rule::Midpoint => Vec::new(),
        };
        let node = |flat: usize, s: &mut [f64]| match self.rule {
            Rule::Midpoint => {
                let mut rem = flat;
                for k in 0..m {
                    let c = self.counts[k];
                    let i = rem % c;
                    rem /= c;
                    s[k] = self.lo[k] + (self.hi[k] - self.lo[k]) * (i as f64 + 0.5) / c as f64;
                }
            }
            Rule::QuasiRandom { .. } => {
                for k in 0..m {
                    let u = (radical_inverse(flat as u64 + 1, PRIMES[k]) + shift[k]).fract();
                    s[k] = self.lo[k] + (self.hi[k] - self.lo[k]) * u;
                }
            }
        };
        let n_chunks = total.div_ceil(CHUNK);
        let partial: Vec<Complex64> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut s = vec![0.0; m];
                let mut acc = Complex64::new(0.0, 0.0);
                for flat in c * CHUNK..((c + 1) * CHUNK).min(total) {
                    node(flat, &mut s);
                    acc += g(&s);
                }
                acc
            })
            .collect();
        partial.into_iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b) * weight
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

/// `|∇ρ| / |∂_{j0} ρ|`, the surface density in graph coordinates.
pub fn graph_density(grad: &[f64], j0: usize) -> f64 {
    grad.iter().map(|g| g * g).sum::<f64>().sqrt() / grad[j0].abs()
}

/// `∫_M F dσ` by quadrature over the slice box. Slice points where the chart
/// has no root in B1 contribute zero; other solver failures are returned.
pub fn surface_integral_with<F>(inst: &ProblemInstance, quad: &SurfaceQuad, integrand: F) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    quad.validate(inst.dim())?;
    let failure = std::sync::Mutex::new(None::<Error>);
    let j0 = quad.j0;
    let tol = default_tol(inst.b1);
    let value = quad.integrate_slice(|s| match solve_on_axis(inst.rho.as_ref(), inst.b1, j0, s, tol) {
        Ok(t) => {
            let x = assemble(j0, s, t);
            let val = integrand(&x);
            if val == Complex64::new(0.0, 0.0) {
                return val;
            }
            val * graph_density(&inst.rho.gradient(&x), j0)
        }
        Err(Error::NoRoot { .. }) => Complex64::new(0.0, 0.0),
        Err(e) => {
            failure.lock().expect("failure slot").get_or_insert(e);
            Complex64::new(0.0, 0.0)
        }
    });
    match failure.into_inner().expect("failure slot") {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Midpoint quadrature of `∫_M F dσ` over the slice box `[-b0, b0]^(2d-1)`.
pub fn surface_integral<F>(inst: &ProblemInstance, integrand: F, j0: usize, resolution: &[usize]) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let m = inst.dim() - 1;
    if j0 >= inst.dim() {
        return Err(Error::InvalidInput(format!("axis {j0} out of range for dimension {}", inst.dim())));
    }
    let q = SurfaceQuad::midpoint(j0, vec![-inst.b0; m], vec![inst.b0; m], resolution.to_vec());
    surface_integral_with(inst, &q, integrand)
}

/// Two quasi-random estimates with different shifts; fails when they differ
/// by more than `rel_tol` of the larger magnitude (floored by `abs_floor`).
pub fn qmc_checked<F>(inst: &ProblemInstance, quad: &SurfaceQuad, seeds: (u64, u64), rel_tol: f64, abs_floor: f64, integrand: F) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let nodes = match quad.rule {
        Rule::QuasiRandom { nodes, .. } => nodes,
        Rule::Midpoint => return Err(Error::InvalidInput("agreement check needs a quasi-random rule".into())),
    };
    let mut qa = quad.clone();
    qa.rule = Rule::QuasiRandom { nodes, seed: seeds.0 };
    let mut qb = quad.clone();
    qb.rule = Rule::QuasiRandom { nodes, seed: seeds.1 };
    let a = surface_integral_with(inst, &qa, &integrand)?;
    let b = surface_integral_with(inst, &qb, &integrand)?;
    let scale = a.norm().max(b.norm()).max(abs_floor);
    if (a - b).norm() > rel_tol * scale {
        return Err(Error::NonConvergence(format!(
            "quasi-random estimates disagree: {a} vs {b} with {nodes} nodes"
        )));
    }
    Ok((a + b) * 0.5)
}

/// `f_sup · Π_{j≠j0} |I_j| · (1 + (2d-1)(C_ρ C'_ρ)²)^(1/2)`.
pub fn size_bound_check(inst: &ProblemInstance, f_sup: f64, interval_lengths: &[f64], j0: usize) -> f64 {
    if f_sup == 0.0 {
        return 0.0;
    }
    let n = inst.dim();
    let lip = inst.graph_lipschitz();
    let prod: f64 = interval_lengths.iter().enumerate().filter(|(k, _)| *k != j0).map(|(_, l)| l).product();
    f_sup * prod * (1.0 + (n as f64 - 1.0) * lip * lip).sqrt()
}
