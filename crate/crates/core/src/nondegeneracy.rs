//! The bordered-Hessian nondegeneracy certificate and the change of
//! variables `Ψ_{v,λ}` whose Jacobian it controls.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{advance, linspace, ProblemInstance};

/// Samples whose best `|det|` is below this are recorded as failures.
pub const DEGENERATE_THRESHOLD: f64 = 1e-10;

pub const DEFAULT_CIRCLE_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub i_set: Vec<usize>,
    pub j_set: Vec<usize>,
}

impl Partition {
    /// Validates and sorts both sets.
    pub fn new(d: usize, mut i_set: Vec<usize>, mut j_set: Vec<usize>) -> Result<Self> {
        i_set.sort_unstable();
        j_set.sort_unstable();
        if i_set.len() != d || j_set.len() != d {
            return Err(Error::InvalidInput(format!("partition sets must both have size {d}")));
        }
        let mut all: Vec<usize> = i_set.iter().chain(&j_set).copied().collect();
        all.sort_unstable();
        if all != (0..2 * d).collect::<Vec<_>>() {
            return Err(Error::InvalidInput(format!(
                "partition {i_set:?} | {j_set:?} is not a split of 0..{}",
                2 * d
            )));
        }
        Ok(Self { i_set, j_set })
    }

    pub fn swapped(&self) -> Self {
        Self { i_set: self.j_set.clone(), j_set: self.i_set.clone() }
    }
}

/// Partitions with coordinate 0 in `i_set`, in lexicographic order of `i_set`.
/// Swapping the two sets only changes the sign of the determinant, so these
/// cover every split up to that symmetry.
pub fn canonical_partitions(d: usize) -> Vec<Partition> {
    let n = 2 * d;
    let mut out = Vec::new();
    let mut rest: Vec<usize> = Vec::with_capacity(d - 1);
    fn rec(start: usize, n: usize, need: usize, rest: &mut Vec<usize>, d: usize, out: &mut Vec<Partition>) {
        if need == 0 {
            let mut i_set = vec![0];
            i_set.extend_from_slice(rest);
            let j_set = (0..n).filter(|k| !i_set.contains(k)).collect();
            out.push(Partition::new(d, i_set, j_set).expect("valid by construction"));
            return;
        }
        for k in start..n {
            rest.push(k);
            rec(k + 1, n, need - 1, rest, d, out);
            rest.pop();
        }
    }
    rec(1, n, d - 1, &mut rest, d, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CirclePoint {
    pub tau_tilde: f64,
    pub tau: f64,
}

impl CirclePoint {
    pub fn new(tau_tilde: f64, tau: f64) -> Result<Self> {
        let r2 = tau_tilde * tau_tilde + tau * tau;
        if !((r2 - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidInput(format!(
                "({tau_tilde}, {tau}) is not on the unit circle"
            )));
        }
        Ok(Self { tau_tilde, tau })
    }

    pub fn from_angle(theta: f64) -> Self {
        Self { tau_tilde: theta.cos(), tau: theta.sin() }
    }

    /// `n` equispaced angles starting at 0.
    pub fn circle(n: usize) -> Vec<Self> {
        (0..n).map(|k| Self::from_angle(2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect()
    }
}

/// Sample points in B1.
#[derive(Debug, Clone)]
pub enum Grid {
    Tensor { dim: usize, axis: Vec<f64> },
    Points(Vec<Vec<f64>>),
}

impl Grid {
    pub fn tensor(dim: usize, b1: f64, density: usize) -> Self {
        Grid::Tensor { dim, axis: linspace(-b1, b1, density) }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Tensor { dim, axis } => axis.len().pow(*dim as u32),
            Grid::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        match self {
            Grid::Tensor { dim, axis } => {
                let m = axis.len();
                let mut rem = i;
                (0..*dim)
                    .map(|_| {
                        let v = axis[rem % m];
                        rem /= m;
                        v
                    })
                    .collect()
            }
            Grid::Points(p) => p[i].clone(),
        }
    }

    fn spacing(&self) -> Option<f64> {
        match self {
            Grid::Tensor { axis, .. } if axis.len() > 1 => Some(axis[1] - axis[0]),
            _ => None,
        }
    }
}

/// Derivative data of ρ and Φ at one point.
struct LocalData {
    grad_rho: Vec<f64>,
    hess_rho: Vec<Vec<f64>>,
    hess_phi: Vec<Vec<f64>>,
}

impl LocalData {
    fn at(inst: &ProblemInstance, x: &[f64]) -> Self {
        Self { grad_rho: inst.rho.gradient(x), hess_rho: inst.rho.hessian(x), hess_phi: inst.phi.hessian(x) }
    }

    fn matrix(&self, p: &Partition, w: &CirclePoint) -> DMatrix<f64> {
        let d = p.i_set.len();
        let mut m = DMatrix::zeros(d + 1, d + 1);
        for (k, &i) in p.i_set.iter().enumerate() {
            m[(k, 0)] = self.grad_rho[i];
            for (l, &j) in p.j_set.iter().enumerate() {
                m[(k, l + 1)] = w.tau_tilde * self.hess_phi[i][j] + w.tau * self.hess_rho[i][j];
            }
        }
        for (l, &j) in p.j_set.iter().enumerate() {
            m[(d, l + 1)] = self.grad_rho[j];
        }
        m
    }

    fn det(&self, p: &Partition, w: &CirclePoint) -> f64 {
        self.matrix(p, w).determinant()
    }
}

/// The bordered matrix: rows `i_1..i_d` hold `(∂_{i_k} ρ, ∂²_{i_k j_l}(τ̃Φ + τρ))`,
/// the last row is `(0, ∂_{j_l} ρ)`.
pub fn bordered_matrix(inst: &ProblemInstance, p: &Partition, x: &[f64], w: &CirclePoint) -> Result<DMatrix<f64>> {
    check_partition(inst, p)?;
    if x.len() != inst.dim() {
        return Err(Error::InvalidInput(format!("point has {} coordinates, expected {}", x.len(), inst.dim())));
    }
    Ok(LocalData::at(inst, x).matrix(p, w))
}

pub fn bordered_det(inst: &ProblemInstance, p: &Partition, x: &[f64], w: &CirclePoint) -> Result<f64> {
    Ok(bordered_matrix(inst, p, x, w)?.determinant())
}

fn check_partition(inst: &ProblemInstance, p: &Partition) -> Result<()> {
    Partition::new(inst.d, p.i_set.clone(), p.j_set.clone()).map(|_| ())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub x_index: usize,
    pub angle_index: usize,
    pub partition: usize,
    pub det: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NondegeneracyReport {
    pub c_lower: f64,
    /// `c_lower` minus a Lipschitz allowance for the gaps between samples.
    pub c_padded: Option<f64>,
    pub partitions: Vec<Partition>,
    pub circle: Vec<CirclePoint>,
    pub n_x: usize,
    pub witnesses: Vec<Witness>,
    pub failures: Vec<(Vec<f64>, CirclePoint)>,
    pub worst: Option<(Vec<f64>, CirclePoint)>,
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    pub threshold: f64,
    pub lipschitz_padding: bool,
    /// Negates every determinant; used to check that the battery notices.
    pub flip_sign: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { threshold: DEGENERATE_THRESHOLD, lipschitz_padding: false, flip_sign: false }
    }
}

pub fn certify(inst: &ProblemInstance, x_grid: &Grid, circle_points: usize) -> NondegeneracyReport {
    certify_with(inst, x_grid, circle_points, CertifyOptions::default())
}

pub fn certify_with(inst: &ProblemInstance, x_grid: &Grid, circle_points: usize, opts: CertifyOptions) -> NondegeneracyReport {
    let parts = canonical_partitions(inst.d);
    let circle = CirclePoint::circle(circle_points.max(1));
    let per_x: Vec<Vec<Witness>> = (0..x_grid.len())
        .into_par_iter()
        .map(|xi| {
            let local = LocalData::at(inst, &x_grid.point(xi));
            circle
                .iter()
                .enumerate()
                .map(|(ai, w)| {
                    let mut best = Witness { x_index: xi, angle_index: ai, partition: 0, det: 0.0 };
                    for (pi, p) in parts.iter().enumerate() {
                        let mut det = local.det(p, w);
                        if opts.flip_sign {
                            det = -det;
                        }
                        // strict comparison keeps the lexicographically smallest i_set on ties
                        if det.abs() > best.det.abs() || pi == 0 {
                            best = Witness { partition: pi, det, ..best };
                        }
                    }
                    best
                })
                .collect()
        })
        .collect();
    let witnesses: Vec<Witness> = per_x.into_iter().flatten().collect();
    let mut c_lower = f64::INFINITY;
    let mut worst = None;
    let mut failures = Vec::new();
    for w in &witnesses {
        let m = w.det.abs();
        if m < c_lower {
            c_lower = m;
            worst = Some((w.x_index, w.angle_index));
        }
        if m < opts.threshold {
            failures.push((x_grid.point(w.x_index), circle[w.angle_index]));
        }
    }
    if witnesses.is_empty() {
        c_lower = 0.0;
    }
    let c_padded = opts.lipschitz_padding.then(|| c_lower - lipschitz_allowance(x_grid, &witnesses, circle.len()));
    NondegeneracyReport {
        c_lower,
        c_padded,
        partitions: parts,
        worst: worst.map(|(xi, ai)| (x_grid.point(xi), circle[ai])),
        circle,
        n_x: x_grid.len(),
        witnesses,
        failures,
    }
}

/// Estimated slope of the sampled `max |det|` times half the sample gap.
fn lipschitz_allowance(grid: &Grid, witnesses: &[Witness], n_circle: usize) -> f64 {
    let value = |xi: usize, ai: usize| witnesses[xi * n_circle + ai].det.abs();
    let dtheta = 2.0 * std::f64::consts::PI / n_circle as f64;
    let mut l_theta: f64 = 0.0;
    for xi in 0..grid.len() {
        for ai in 0..n_circle {
            let next = (ai + 1) % n_circle;
            l_theta = l_theta.max((value(xi, next) - value(xi, ai)).abs() / dtheta);
        }
    }
    let mut allowance = l_theta * dtheta / 2.0;
    if let (Grid::Tensor { dim, axis }, Some(h)) = (grid, grid.spacing()) {
        let m = axis.len();
        let mut l_x: f64 = 0.0;
        let mut idx = vec![0usize; *dim];
        loop {
            let flat: usize = idx.iter().rev().fold(0, |acc, &k| acc * m + k);
            for (k, &ik) in idx.iter().enumerate() {
                if ik + 1 < m {
                    let stride = m.pow(k as u32);
                    for ai in 0..n_circle {
                        l_x = l_x.max((value(flat + stride, ai) - value(flat, ai)).abs() / h);
                    }
                }
            }
            if !advance(&mut idx, m) {
                break;
            }
        }
        allowance += l_x * h * (*dim as f64).sqrt() / 2.0;
    }
    allowance
}

fn assemble(inst: &ProblemInstance, p: &Partition, v: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    check_partition(inst, p)?;
    if v.len() != inst.d || u.len() != inst.d {
        return Err(Error::InvalidInput(format!("u and v must have {} coordinates", inst.d)));
    }
    let mut x = vec![0.0; inst.dim()];
    for (k, &i) in p.i_set.iter().enumerate() {
        x[i] = v[k];
    }
    for (l, &j) in p.j_set.iter().enumerate() {
        x[j] = u[l];
    }
    if !inst.in_b1(&x) {
        return Err(Error::OutOfBox(x));
    }
    Ok(x)
}

/// `Ψ_{v,λ}(u, τ) = (ρ(u, v), λ ∇_v Φ(u, v) + τ ∇_v ρ(u, v))` with `v` the
/// `i_set` coordinates and `u` the `j_set` coordinates.
pub fn psi_map(inst: &ProblemInstance, p: &Partition, v_fixed: &[f64], lambda: f64, u: &[f64], tau: f64) -> Result<Vec<f64>> {
    let x = assemble(inst, p, v_fixed, u)?;
    let gr = inst.rho.gradient(&x);
    let gp = inst.phi.gradient(&x);
    let mut out = vec![inst.rho.eval(&x)];
    out.extend(p.i_set.iter().map(|&i| lambda * gp[i] + tau * gr[i]));
    Ok(out)
}

/// Jacobian of `Ψ_{v,λ}` with respect to `(u_1, ..., u_d, τ)`.
pub fn psi_jacobian(inst: &ProblemInstance, p: &Partition, v_fixed: &[f64], lambda: f64, u: &[f64], tau: f64) -> Result<DMatrix<f64>> {
    let x = assemble(inst, p, v_fixed, u)?;
    let d = inst.d;
    let local = LocalData::at(inst, &x);
    let mut m = DMatrix::zeros(d + 1, d + 1);
    for (l, &j) in p.j_set.iter().enumerate() {
        m[(0, l)] = local.grad_rho[j];
    }
    for (k, &i) in p.i_set.iter().enumerate() {
        for (l, &j) in p.j_set.iter().enumerate() {
            m[(k + 1, l)] = lambda * local.hess_phi[i][j] + tau * local.hess_rho[i][j];
        }
        m[(k + 1, d)] = local.grad_rho[i];
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogeneityRow {
    pub lambda: f64,
    pub tau: f64,
    pub det: f64,
    pub ratio: f64,
    pub singular: bool,
}

/// `|det ∂Ψ/∂(u, τ)| / (λ² + τ²)^((d-1)/2)` for each `(λ, τ)`.
pub fn jacobian_homogeneity_probe(
    inst: &ProblemInstance,
    p: &Partition,
    v_fixed: &[f64],
    u: &[f64],
    lambda_tau_pairs: &[(f64, f64)],
) -> Result<Vec<HomogeneityRow>> {
    lambda_tau_pairs
        .iter()
        .map(|&(lambda, tau)| {
            let r2 = lambda * lambda + tau * tau;
            if r2 == 0.0 {
                return Err(Error::InvalidInput("(lambda, tau) = (0, 0) has no direction".into()));
            }
            let det = psi_jacobian(inst, p, v_fixed, lambda, u, tau)?.determinant();
            let ratio = det.abs() / r2.powf((inst.d as f64 - 1.0) / 2.0);
            Ok(HomogeneityRow { lambda, tau, det, ratio, singular: det.abs() < f64::MIN_POSITIVE })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Collision {
    pub first: usize,
    pub second: usize,
    pub distance: f64,
}

/// All pairs of distinct samples `(u, τ)` whose images under `Ψ_{v,λ}` are
/// closer than `tol`.
pub fn injectivity_probe(
    inst: &ProblemInstance,
    p: &Partition,
    v_fixed: &[f64],
    lambda: f64,
    samples: &[(Vec<f64>, f64)],
    tol: f64,
) -> Result<Vec<Collision>> {
    let images: Vec<Vec<f64>> = samples
        .iter()
        .map(|(u, tau)| psi_map(inst, p, v_fixed, lambda, u, *tau))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for a in 0..samples.len() {
        for b in a + 1..samples.len() {
            if samples[a] == samples[b] {
                continue;
            }
            let dist = images[a].iter().zip(&images[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            if dist < tol {
                out.push(Collision { first: a, second: b, distance: dist });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::field::Polynomial;

    fn even() -> ProblemInstance {
        ProblemInstance::builtin("paper-even-d2").unwrap()
    }

    #[test]
    fn canonical_partition_counts() {
        assert_eq!(canonical_partitions(2).len(), 3);
        assert_eq!(canonical_partitions(3).len(), 10);
        let p = &canonical_partitions(2)[0];
        assert_eq!(p.i_set, vec![0, 1]);
        assert_eq!(p.j_set, vec![2, 3]);
    }

    #[test]
    fn even_example_determinants() {
        let inst = even();
        let pa = Partition::new(2, vec![0, 2], vec![1, 3]).unwrap();
        let pb = Partition::new(2, vec![0, 1], vec![2, 3]).unwrap();
        let x = [0.3, -0.2, 0.1, 0.4];
        let w = CirclePoint::from_angle(0.7);
        let da = bordered_det(&inst, &pa, &x, &w).unwrap();
        let db = bordered_det(&inst, &pb, &x, &w).unwrap();
        assert!((da + (1.0 + x[0]) * w.tau_tilde).abs() < 1e-14);
        assert!((db + w.tau).abs() < 1e-14);
    }

    #[test]
    fn swap_changes_sign_only() {
        let inst = even();
        let x = [0.1, 0.2, -0.3, 0.05];
        let w = CirclePoint::from_angle(2.1);
        for p in canonical_partitions(2) {
            let a = bordered_det(&inst, &p, &x, &w).unwrap();
            let b = bordered_det(&inst, &p.swapped(), &x, &w).unwrap();
            assert!((a.abs() - b.abs()).abs() < 1e-14);
        }
    }

    #[test]
    fn origin_of_circle_rejected() {
        assert!(CirclePoint::new(0.0, 0.0).is_err());
        assert!(CirclePoint::new(0.6, 0.8).is_ok());
    }

    #[test]
    fn invalid_partition_rejected() {
        assert!(Partition::new(2, vec![0, 1], vec![1, 3]).is_err());
        assert!(Partition::new(2, vec![0], vec![1, 2, 3]).is_err());
    }

    #[test]
    fn zero_phase_is_degenerate() {
        let inst = ProblemInstance::builtin("sum").unwrap();
        let x = [0.0; 4];
        let w = CirclePoint::new(1.0, 0.0).unwrap();
        for p in canonical_partitions(2) {
            assert_eq!(bordered_det(&inst, &p, &x, &w).unwrap(), 0.0);
        }
        let rep = certify(&inst, &Grid::tensor(4, inst.b1, 3), 8);
        assert!(!rep.failures.is_empty());
        assert_eq!(rep.c_lower, 0.0);
    }

    #[test]
    fn certify_refinement_never_increases() {
        let inst = even();
        let a = certify(&inst, &Grid::tensor(4, 0.5, 3), 16);
        let b = certify(&inst, &Grid::tensor(4, 0.5, 5), 32);
        assert!(b.c_lower <= a.c_lower);
        assert!(a.failures.is_empty());
    }

    #[test]
    fn padding_lowers_bound() {
        let inst = even();
        let opts = CertifyOptions { lipschitz_padding: true, ..Default::default() };
        let r = certify_with(&inst, &Grid::tensor(4, 0.5, 3), 16, opts);
        assert!(r.c_padded.unwrap() <= r.c_lower);
    }

    #[test]
    fn psi_map_flat_case() {
        let inst = ProblemInstance::builtin("sum").unwrap();
        let p = canonical_partitions(2)[0].clone();
        let out = psi_map(&inst, &p, &[0.1, 0.05], 3.0, &[0.02, -0.1], 1.0).unwrap();
        assert!((out[0] - 0.07).abs() < 1e-15);
        assert_eq!(&out[1..], &[1.0, 1.0]);
        assert!(matches!(psi_map(&inst, &p, &[0.3, 0.0], 1.0, &[0.0, 0.0], 0.0), Err(Error::OutOfBox(_))));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let inst = even();
        let p = Partition::new(2, vec![0, 2], vec![1, 3]).unwrap();
        let v = [0.1, -0.2];
        let (u, tau, lambda) = ([0.05, 0.15], 0.3, 0.9);
        let jac = psi_jacobian(&inst, &p, &v, lambda, &u, tau).unwrap();
        let h = 1e-6;
        for col in 0..3 {
            let shift = |s: f64| {
                let mut uu = u;
                let mut tt = tau;
                if col < 2 {
                    uu[col] += s;
                } else {
                    tt += s;
                }
                psi_map(&inst, &p, &v, lambda, &uu, tt).unwrap()
            };
            let (a, b) = (shift(h), shift(-h));
            for row in 0..3 {
                let fd = (a[row] - b[row]) / (2.0 * h);
                assert!((fd - jac[(row, col)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn homogeneity_along_rays() {
        let inst = even();
        let p = canonical_partitions(2)[1].clone();
        let rows = jacobian_homogeneity_probe(&inst, &p, &[0.1, 0.2], &[-0.1, 0.05], &[(0.3, 0.4), (0.6, 0.8), (3.3, 4.4)]).unwrap();
        for r in &rows[1..] {
            assert!((r.ratio - rows[0].ratio).abs() <= 1e-12 * rows[0].ratio);
        }
    }

    #[test]
    fn homogeneity_zero_for_flat_rho_zero_phi() {
        let rho = Arc::new(Polynomial::linear(&[1.0, 1.0, 1.0, 1.0]));
        let inst = ProblemInstance::builtin("sum").unwrap();
        let inst = ProblemInstance::new("t", 2, inst.b0, inst.b1, rho, Arc::new(Polynomial::zero(4)), inst.amp.clone()).unwrap();
        let p = canonical_partitions(2)[0].clone();
        let rows = jacobian_homogeneity_probe(&inst, &p, &[0.0, 0.0], &[0.0, 0.0], &[(0.0, 1.0)]).unwrap();
        assert_eq!(rows[0].det, 0.0);
        assert!(rows[0].singular);
    }

    #[test]
    fn injectivity_excludes_identical_and_finds_degenerate() {
        let inst = ProblemInstance::builtin("sum").unwrap();
        let p = canonical_partitions(2)[0].clone();
        let samples = vec![(vec![0.01, -0.01], 0.5), (vec![-0.01, 0.01], 0.5), (vec![0.01, -0.01], 0.5)];
        let c = injectivity_probe(&inst, &p, &[0.0, 0.0], 2.0, &samples, 1e-12).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|c| samples[c.first] != samples[c.second]));
    }
}
