//! Problem instances `(d, b0, b1, ρ, Φ, a)` and their admissible constants.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{FieldRef, Polynomial, SmoothField, TensorBump};
use crate::nondegeneracy;

/// Partials of ρ smaller than this count as a violation of the implicit
/// function hypothesis.
pub const GRADIENT_FLOOR: f64 = 1e-9;

/// Default number of grid points per axis for constant estimation.
pub const DEFAULT_GRID_DENSITY: usize = 9;

pub const BUILTIN_NAMES: [&str; 5] = ["paper-even-d2", "paper-odd-d3", "flat", "tilted", "sum"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibleConstants {
    pub c_rho: f64,
    /// `1 / inf |∂_i ρ|`; infinite when some partial vanishes on the grid.
    pub c_rho_inv: f64,
    pub c_phi: f64,
    pub c_amp: f64,
    pub min_partial: f64,
    pub min_partial_axis: usize,
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub name: String,
    pub d: usize,
    pub b0: f64,
    pub b1: f64,
    pub rho: FieldRef,
    pub phi: FieldRef,
    pub amp: FieldRef,
    pub c_rho: f64,
    pub c_rho_inv: f64,
    pub c_phi: f64,
    pub c_amp: f64,
    /// Sampled lower bound for the nondegeneracy determinant; `None` when the
    /// coarse scan finds a degenerate sample.
    pub c_hyp: Option<f64>,
    pub implicit_ok: bool,
}

impl ProblemInstance {
    pub fn new(
        name: impl Into<String>,
        d: usize,
        b0: f64,
        b1: f64,
        rho: FieldRef,
        phi: FieldRef,
        amp: FieldRef,
    ) -> Result<Self> {
        let name = name.into();
        if d < 2 {
            return Err(Error::InvalidInput(format!("d must be at least 2, got {d}")));
        }
        if !(b0 > 0.0 && b0 < b1 && b1.is_finite()) {
            return Err(Error::InvalidInput(format!("need 0 < b0 < b1, got b0={b0}, b1={b1}")));
        }
        let n = 2 * d;
        for (label, f, order) in [("rho", &rho, n + 3), ("phi", &phi, n + 2), ("amp", &amp, n + 2)] {
            if f.dim() != n {
                return Err(Error::InvalidInput(format!("{label} has dimension {} but 2d = {n}", f.dim())));
            }
            if f.max_order() < order {
                return Err(Error::InvalidInput(format!(
                    "{label} provides derivatives to order {} but {order} are required",
                    f.max_order()
                )));
            }
        }
        check_amplitude_support(amp.as_ref(), b0, b1)?;
        let k = estimate_constants(rho.as_ref(), phi.as_ref(), amp.as_ref(), d, b1, DEFAULT_GRID_DENSITY);
        let mut inst = Self {
            name,
            d,
            b0,
            b1,
            rho,
            phi,
            amp,
            c_rho: k.c_rho,
            c_rho_inv: k.c_rho_inv,
            c_phi: k.c_phi,
            c_amp: k.c_amp,
            c_hyp: None,
            implicit_ok: k.min_partial >= GRADIENT_FLOOR,
        };
        let coarse = nondegeneracy::certify(&inst, &nondegeneracy::Grid::tensor(n, b1, 3), 16);
        inst.c_hyp = (coarse.c_lower > nondegeneracy::DEGENERATE_THRESHOLD).then_some(coarse.c_lower);
        Ok(inst)
    }

    pub fn dim(&self) -> usize {
        2 * self.d
    }

    /// Built-in instances registered by name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "paper-even-d2" => model_instance(2),
            "paper-odd-d3" => model_instance(3),
            "flat" => {
                let rho = Polynomial::linear(&[0.0, 0.0, 0.0, 1.0]);
                simple_instance(name, 2, 0.25, 0.5, rho, Polynomial::zero(4))
            }
            "tilted" => {
                let rho = Polynomial::linear(&[1.0, 0.0, 0.0, 1.0]);
                simple_instance(name, 2, 0.25, 0.5, rho, Polynomial::zero(4))
            }
            "sum" => {
                let rho = Polynomial::linear(&[1.0; 4]);
                simple_instance(name, 2, 0.125, 0.25, rho, Polynomial::zero(4))
            }
            other => Err(Error::InvalidInput(format!(
                "unknown instance `{other}`; known: {}",
                BUILTIN_NAMES.join(", ")
            ))),
        }
    }

    /// Refuses λ with `|λ|^(-1/2) > min(b1 - b0, 1)`.
    pub fn check_lambda(&self, lambda: f64) -> Result<()> {
        let bound = (self.b1 - self.b0).min(1.0);
        if !lambda.is_finite() || lambda == 0.0 || lambda.abs().powf(-0.5) > bound {
            return Err(Error::ConstraintViolation(format!(
                "|lambda|^(-1/2) must not exceed min(b1 - b0, 1) = {bound}; lambda = {lambda}"
            )));
        }
        Ok(())
    }

    pub fn min_lambda(&self) -> f64 {
        (self.b1 - self.b0).min(1.0).powi(-2)
    }

    pub fn in_b1(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= self.b1)
    }

    /// `C_ρ · C'_ρ`, the graph Lipschitz constant.
    pub fn graph_lipschitz(&self) -> f64 {
        self.c_rho * self.c_rho_inv
    }

    pub fn with_phi(&self, phi: FieldRef) -> Result<Self> {
        Self::new(self.name.clone(), self.d, self.b0, self.b1, self.rho.clone(), phi, self.amp.clone())
    }
}

/// The example phases: ρ = Σ_{k<d} x_k x_k' + Σ_k x_k + Σ_k x_k'; Φ = x_1 x_2
/// for d = 2 and Φ = x_1 x_2 + x_1' x_2' for d = 3.
fn model_instance(d: usize) -> Result<ProblemInstance> {
    let n = 2 * d;
    let mut rho_terms = Vec::new();
    for k in 0..d - 1 {
        let mut e = vec![0u8; n];
        e[k] = 1;
        e[d + k] = 1;
        rho_terms.push((e, 1.0));
    }
    for k in 0..n {
        let mut e = vec![0u8; n];
        e[k] = 1;
        rho_terms.push((e, 1.0));
    }
    let rho = Polynomial::new(n, rho_terms)?;
    let mut phi_terms = Vec::new();
    let mut e = vec![0u8; n];
    e[0] = 1;
    e[1] = 1;
    phi_terms.push((e, 1.0));
    if d % 2 == 1 {
        let mut e = vec![0u8; n];
        e[d] = 1;
        e[d + 1] = 1;
        phi_terms.push((e, 1.0));
    }
    let phi = Polynomial::new(n, phi_terms)?;
    let name = if d == 2 { "paper-even-d2" } else { "paper-odd-d3" };
    simple_instance(name, d, 0.25, 0.5, rho, phi)
}

fn simple_instance(name: &str, d: usize, b0: f64, b1: f64, rho: Polynomial, phi: Polynomial) -> Result<ProblemInstance> {
    let amp: FieldRef = Arc::new(TensorBump::centered(2 * d, b0));
    ProblemInstance::new(name, d, b0, b1, Arc::new(rho), Arc::new(phi), amp)
}

fn check_amplitude_support(amp: &dyn SmoothField, b0: f64, b1: f64) -> Result<()> {
    if let Some(factors) = amp.tensor_factors() {
        for b in factors {
            let (lo, hi) = b.support();
            if lo < -b0 - 1e-15 || hi > b0 + 1e-15 {
                return Err(Error::InvalidInput(format!(
                    "amplitude factor support [{lo}, {hi}] leaves [-b0, b0]"
                )));
            }
        }
        return Ok(());
    }
    // Spot check on a coarse grid of B1 \ B0.
    let n = amp.dim();
    let pts = linspace(-b1, b1, 7);
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    loop {
        for k in 0..n {
            x[k] = pts[idx[k]];
        }
        if x.iter().any(|v| v.abs() > b0) && amp.eval(&x) != 0.0 {
            return Err(Error::InvalidInput(format!("amplitude does not vanish at {x:?} outside B0")));
        }
        if !advance(&mut idx, pts.len()) {
            return Ok(());
        }
    }
}

/// `n` equispaced points on `[lo, hi]` including both ends; one point means
/// the midpoint.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Odometer increment; returns `false` after the last index tuple.
pub fn advance(idx: &mut [usize], base: usize) -> bool {
    for slot in idx.iter_mut() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

fn grid_point(flat: usize, n: usize, pts: &[f64]) -> Vec<f64> {
    let m = pts.len();
    let mut rem = flat;
    (0..n)
        .map(|_| {
            let v = pts[rem % m];
            rem /= m;
            v
        })
        .collect()
}

fn multi_indices(n: usize, max_total: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = vec![0u8; n];
    fn rec(pos: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur[pos] = e as u8;
            rec(pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, max_total, &mut cur, &mut out);
    out
}

/// `max_{|α| <= order} sup_grid |∂^α f|`.
pub fn sup_derivatives(f: &dyn SmoothField, b1: f64, order: usize, density: usize) -> f64 {
    let n = f.dim();
    let pts = linspace(-b1, b1, density);
    let alphas: Vec<Vec<u8>> = multi_indices(n, order).into_iter().filter(|a| !f.deriv_vanishes(a)).collect();
    if alphas.is_empty() {
        return 0.0;
    }
    if let Some(factors) = f.tensor_factors() {
        // sup of a product over a tensor grid is the product of sups
        return alphas
            .iter()
            .map(|a| {
                factors
                    .iter()
                    .zip(a)
                    .map(|(b, &k)| pts.iter().map(|&t| b.deriv(k as usize, t).abs()).fold(0.0, f64::max))
                    .product::<f64>()
            })
            .fold(0.0, f64::max);
    }
    let total = pts.len().pow(n as u32);
    (0..total)
        .into_par_iter()
        .map(|flat| {
            let x = grid_point(flat, n, &pts);
            alphas.iter().map(|a| f.deriv(a, &x).abs()).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Minimum over grid and axes of `|∂_i ρ|`, with the minimizing axis.
pub fn min_partial(rho: &dyn SmoothField, b1: f64, density: usize) -> (f64, usize) {
    let n = rho.dim();
    let pts = linspace(-b1, b1, density);
    let total = pts.len().pow(n as u32);
    (0..total)
        .into_par_iter()
        .map(|flat| {
            let x = grid_point(flat, n, &pts);
            rho.gradient(&x)
                .iter()
                .enumerate()
                .map(|(k, g)| (g.abs(), k))
                .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
        })
        .reduce(|| (f64::INFINITY, 0), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
}

pub fn estimate_constants(
    rho: &dyn SmoothField,
    phi: &dyn SmoothField,
    amp: &dyn SmoothField,
    d: usize,
    b1: f64,
    density: usize,
) -> AdmissibleConstants {
    let n = 2 * d;
    let (m, axis) = min_partial(rho, b1, density);
    AdmissibleConstants {
        c_rho: sup_derivatives(rho, b1, n + 3, density),
        c_rho_inv: if m > 0.0 { 1.0 / m } else { f64::INFINITY },
        c_phi: sup_derivatives(phi, b1, n + 2, density),
        c_amp: sup_derivatives(amp, b1, n + 2, density),
        min_partial: m,
        min_partial_axis: axis,
    }
}

/// Grid estimates of `C_ρ, C'_ρ, C_Φ, C_a`; fails when some partial of ρ
/// drops below [`GRADIENT_FLOOR`].
pub fn admissible_constants(inst: &ProblemInstance, grid_density: usize) -> Result<AdmissibleConstants> {
    if grid_density == 0 {
        return Err(Error::InvalidInput("grid density must be positive".into()));
    }
    let k = estimate_constants(inst.rho.as_ref(), inst.phi.as_ref(), inst.amp.as_ref(), inst.d, inst.b1, grid_density);
    if k.min_partial < GRADIENT_FLOOR {
        let pts = linspace(-inst.b1, inst.b1, grid_density);
        let n = inst.dim();
        let total = pts.len().pow(n as u32);
        let point = (0..total)
            .map(|f| grid_point(f, n, &pts))
            .find(|x| inst.rho.gradient(x)[k.min_partial_axis].abs() <= k.min_partial)
            .unwrap_or_default();
        return Err(Error::GradientFloor { axis: k.min_partial_axis, value: k.min_partial, point });
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_example_constants() {
        let inst = ProblemInstance::builtin("paper-even-d2").unwrap();
        let k = admissible_constants(&inst, 9).unwrap();
        // |∂_{x1} ρ| = |1 + x1'| >= 0.5, all other partials are >= 0.5 or 1
        assert!((k.min_partial - 0.5).abs() < 1e-15);
        assert!((k.c_rho_inv - 2.0).abs() < 1e-15);
        assert!((k.c_rho - 2.25).abs() < 1e-15);
        assert!((k.c_phi - 1.0).abs() < 1e-15);
        assert!((inst.graph_lipschitz() - 4.5).abs() < 1e-14);
        assert!(inst.implicit_ok);
        assert!(inst.c_hyp.unwrap() > 0.0);
    }

    #[test]
    fn sum_field_has_unit_constant() {
        let inst = ProblemInstance::builtin("sum").unwrap();
        for density in [1, 3, 9] {
            let k = admissible_constants(&inst, density).unwrap();
            assert_eq!(k.c_rho, 1.0);
            assert_eq!(k.c_rho_inv, 1.0);
        }
        assert!(inst.c_hyp.is_none());
    }

    #[test]
    fn flat_field_violates_implicit_hypothesis() {
        let inst = ProblemInstance::builtin("flat").unwrap();
        assert!(!inst.implicit_ok);
        assert!(matches!(admissible_constants(&inst, 3), Err(Error::GradientFloor { .. })));
    }

    #[test]
    fn constants_monotone_in_density() {
        let inst = ProblemInstance::builtin("paper-even-d2").unwrap();
        let mut prev: Option<AdmissibleConstants> = None;
        for density in [3, 5, 9, 17] {
            let k = admissible_constants(&inst, density).unwrap();
            if let Some(p) = prev {
                assert!(k.c_rho >= p.c_rho && k.c_phi >= p.c_phi && k.c_amp >= p.c_amp);
                assert!(k.c_rho_inv >= p.c_rho_inv);
            }
            prev = Some(k);
        }
    }

    #[test]
    fn lambda_constraint() {
        let inst = ProblemInstance::builtin("paper-even-d2").unwrap();
        assert!(inst.check_lambda(16.0).is_ok());
        assert!(matches!(inst.check_lambda(15.0), Err(Error::ConstraintViolation(_))));
        assert!(inst.check_lambda(-100.0).is_ok());
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(-1.0, 1.0, 3), vec![-1.0, 0.0, 1.0]);
        assert_eq!(linspace(-1.0, 1.0, 1), vec![0.0]);
    }
}
