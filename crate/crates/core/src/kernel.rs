//! The functional `I_λ(f_1, …, f_2d) = ∫_M e^{iλΦ} Π f_j(x_j) a(x) dσ`, the
//! kernel `𝓘(y, ξ)` obtained by inserting wave packets, and the scale
//! diagnostics attached to it.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::bump::Bump1D;
use crate::error::{Error, Result};
use crate::instance::{advance, linspace, ProblemInstance, GRADIENT_FLOOR};
use crate::packet::{packet_for, WavePacket};
use crate::stationary::projected_phase_gradient;
use crate::surface::{assemble, default_tol, solve_on_axis, surface_integral_with, Rule, SurfaceQuad};
use crate::tiling::{IntervalQ, Tiling};
use crate::window::Window;

/// One term `c φ_Q(x - y)` of a packet expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PacketTerm {
    pub coeff: Complex64,
    pub shift: f64,
    pub cell: IntervalQ,
}

#[derive(Debug, Clone)]
pub enum Profile {
    /// `χ_{|x - center| < half_width}`.
    Indicator,
    /// Smooth bump of the given half-width.
    Bump,
    Constant,
    Zero,
    /// Finite sum of wave packets; `center` and `half_width` are ignored.
    Packets { terms: Vec<PacketTerm>, window: Arc<Window> },
}

/// `f(x) = scale · e^{i modulation (x - center)} · profile(x)`.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub profile: Profile,
    pub center: f64,
    pub half_width: f64,
    /// Angular frequency.
    pub modulation: f64,
    pub scale: Complex64,
}

fn unit_bump_l2() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        let b = Bump1D::new(0.0, 1.0);
        let n = 20000;
        let h = 2.0 / n as f64;
        ((0..n).map(|i| b.eval(-1.0 + (i as f64 + 0.5) * h).powi(2)).sum::<f64>() * h).sqrt()
    })
}

impl TestFunction {
    pub fn new(profile: Profile, center: f64, half_width: f64, modulation: f64) -> Self {
        Self { profile, center, half_width, modulation, scale: Complex64::new(1.0, 0.0) }
    }

    pub fn packets(terms: Vec<PacketTerm>, window: Arc<Window>) -> Self {
        Self::new(Profile::Packets { terms, window }, 0.0, 0.0, 0.0)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let u = x - self.center;
        let env = match &self.profile {
            Profile::Indicator => {
                if u.abs() < self.half_width {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::Bump => Bump1D::new(0.0, self.half_width).eval(u),
            Profile::Constant => 1.0,
            Profile::Zero => 0.0,
            Profile::Packets { terms, window } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in terms {
                    acc += t.coeff * WavePacket::new(t.cell).eval(window, x - t.shift);
                }
                return self.scale * acc;
            }
        };
        if env == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.scale * Complex64::from_polar(env, self.modulation * u)
    }

    /// Closed interval outside which `f` vanishes; `None` for the zero
    /// function, infinite ends for constants.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.scale == Complex64::new(0.0, 0.0) {
            return None;
        }
        match &self.profile {
            Profile::Indicator | Profile::Bump => Some((self.center - self.half_width, self.center + self.half_width)),
            Profile::Constant => Some((f64::NEG_INFINITY, f64::INFINITY)),
            Profile::Zero => None,
            Profile::Packets { terms, .. } => terms
                .iter()
                .filter(|t| t.coeff != Complex64::new(0.0, 0.0))
                .map(|t| {
                    let a = WavePacket::new(t.cell).half_support();
                    (t.shift - a, t.shift + a)
                })
                .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1))),
        }
    }

    /// Largest angular frequency carried by `f`.
    pub fn frequency(&self) -> f64 {
        match &self.profile {
            Profile::Packets { terms, .. } => {
                terms.iter().map(|t| 2.0 * PI * t.cell.center().abs()).fold(0.0, f64::max)
            }
            _ => self.modulation.abs(),
        }
    }

    /// `‖f‖₂`; constants are measured on `[-b, b]`.
    pub fn l2_norm(&self, b: f64) -> f64 {
        let s = self.scale.norm();
        match &self.profile {
            Profile::Indicator => s * (2.0 * self.half_width).sqrt(),
            Profile::Bump => s * self.half_width.sqrt() * unit_bump_l2(),
            Profile::Constant => s * (2.0 * b).sqrt(),
            Profile::Zero => 0.0,
            Profile::Packets { .. } => match self.support() {
                None => 0.0,
                Some((lo, hi)) => {
                    let n = 1 << 15;
                    let h = (hi - lo) / n as f64;
                    ((0..n).map(|i| self.eval(lo + (i as f64 + 0.5) * h).norm_sqr()).sum::<f64>() * h).sqrt()
                }
            },
        }
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.modulation = -self.modulation;
        out.scale = self.scale.conj();
        if let Profile::Packets { terms, window } = &self.profile {
            let terms = terms
                .iter()
                .map(|t| PacketTerm {
                    coeff: t.coeff.conj(),
                    shift: t.shift,
                    cell: IntervalQ { lo: -t.cell.hi, hi: -t.cell.lo, kind: t.cell.kind },
                })
                .collect();
            out.profile = Profile::Packets { terms, window: window.clone() };
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Extremizer,
    RandomBump,
    User,
}

#[derive(Debug, Clone)]
pub struct TestFunctionFamily {
    pub kind: FamilyKind,
    pub funcs: Vec<TestFunction>,
}

impl TestFunctionFamily {
    pub fn new(kind: FamilyKind, funcs: Vec<TestFunction>) -> Self {
        Self { kind, funcs }
    }

    pub fn norms(&self, b: f64) -> Vec<f64> {
        self.funcs.iter().map(|f| f.l2_norm(b)).collect()
    }

    /// Each slot divided by its L² norm.
    pub fn normalized(&self, b: f64) -> Result<Self> {
        let mut out = self.clone();
        for (k, f) in out.funcs.iter_mut().enumerate() {
            let n = f.l2_norm(b);
            if !(n > 0.0) {
                return Err(Error::InvalidInput(format!("slot {k} has zero norm and cannot be normalized")));
            }
            f.scale /= n;
        }
        Ok(out)
    }

    pub fn conj(&self) -> Self {
        Self { kind: self.kind, funcs: self.funcs.iter().map(|f| f.conj()).collect() }
    }
}

/// Base point on `M` used to center the test families: the origin when it
/// lies on `M`, otherwise the chart point above the zero slice along the last axis.
pub fn base_point(inst: &ProblemInstance) -> Result<Vec<f64>> {
    let n = inst.dim();
    let zero = vec![0.0; n];
    if inst.rho.eval(&zero).abs() <= default_tol(inst.b1) {
        return Ok(zero);
    }
    let t = solve_on_axis(inst.rho.as_ref(), inst.b1, n - 1, &vec![0.0; n - 1], default_tol(inst.b1))?;
    Ok(assemble(n - 1, &vec![0.0; n - 1], t))
}

#[derive(Debug, Clone)]
pub struct Extremizer {
    pub family: TestFunctionFamily,
    pub c_prime: f64,
    pub c: f64,
    /// Largest `|λ(Φ(x) - Φ(x*) - ∇Φ(x*)·(x - x*))|` found on the support.
    pub phase_error: f64,
}

/// `f_j(x) = e^{-iλ(x - x*_j) ∂_jΦ(x*)} χ_{|x - x*_j| < c' λ^{-1/2}}` for
/// `j < 2d`, and half-width `c c' λ^{-1/2}` in the last slot. `c'` is halved
/// until the phase error on the support is below `π/4`.
pub fn extremizer_family(inst: &ProblemInstance, lambda: f64, c_prime: f64, c: f64) -> Result<Extremizer> {
    inst.check_lambda(lambda)?;
    if !(c_prime > 0.0 && c > 0.0) {
        return Err(Error::InvalidInput("extremizer constants must be positive".into()));
    }
    let n = inst.dim();
    let x0 = base_point(inst)?;
    let g0 = inst.phi.gradient(&x0);
    let phi0 = inst.phi.eval(&x0);
    let s = lambda.abs().powf(-0.5);
    let mut cp = c_prime;
    for _ in 0..40 {
        let hw: Vec<f64> = (0..n).map(|j| if j + 1 == n { c * cp * s } else { cp * s }).collect();
        if (0..n).any(|j| x0[j].abs() + hw[j] >= inst.b1) {
            cp *= 0.5;
            continue;
        }
        // phase error on the slice box, lifted to M
        let pts = 7;
        let mut idx = vec![0usize; n - 1];
        let mut worst: f64 = 0.0;
        loop {
            let slice: Vec<f64> = (0..n - 1).map(|k| x0[k] + hw[k] * (2.0 * idx[k] as f64 / (pts - 1) as f64 - 1.0)).collect();
            match solve_on_axis(inst.rho.as_ref(), inst.b1, n - 1, &slice, default_tol(inst.b1)) {
                Ok(t) => {
                    let x = assemble(n - 1, &slice, t);
                    let lin: f64 = (0..n).map(|k| g0[k] * (x[k] - x0[k])).sum();
                    worst = worst.max((lambda * (inst.phi.eval(&x) - phi0 - lin)).abs());
                }
                Err(Error::NoRoot { .. }) => {}
                Err(e) => return Err(e),
            }
            if !advance(&mut idx, pts) {
                break;
            }
        }
        if worst < PI / 4.0 {
            let funcs = (0..n)
                .map(|j| TestFunction::new(Profile::Indicator, x0[j], hw[j], -lambda * g0[j]))
                .collect();
            return Ok(Extremizer { family: TestFunctionFamily::new(FamilyKind::Extremizer, funcs), c_prime: cp, c, phase_error: worst });
        }
        cp *= 0.5;
    }
    Err(Error::NonConvergence("could not shrink the extremizer support below the phase tolerance".into()))
}

/// Random bump family parameters: centers on `M`, half-widths and relative
/// modulations `m_j` (the modulation at `λ` is `λ m_j`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpFamilySpec {
    pub centers: Vec<f64>,
    pub half_widths: Vec<f64>,
    pub relative_modulations: Vec<f64>,
}

impl BumpFamilySpec {
    pub fn random(inst: &ProblemInstance, rng: &mut impl Rng) -> Result<Self> {
        let n = inst.dim();
        let x0 = base_point(inst)?;
        let spread = 0.4 * inst.b0;
        for _ in 0..100 {
            let slice: Vec<f64> = (0..n - 1).map(|k| x0[k] + rng.gen_range(-spread..spread)).collect();
            let t = match solve_on_axis(inst.rho.as_ref(), inst.b1, n - 1, &slice, default_tol(inst.b1)) {
                Ok(t) => t,
                Err(Error::NoRoot { .. }) => continue,
                Err(e) => return Err(e),
            };
            let centers = assemble(n - 1, &slice, t);
            if centers.iter().any(|c| c.abs() > 0.6 * inst.b0) {
                continue;
            }
            let half_widths = (0..n).map(|_| rng.gen_range(0.32..0.6) * inst.b0).collect();
            let relative_modulations = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
            return Ok(Self { centers, half_widths, relative_modulations });
        }
        Err(Error::NonConvergence("no base point on M found for a random family".into()))
    }

    pub fn at(&self, lambda: f64) -> TestFunctionFamily {
        let funcs = (0..self.centers.len())
            .map(|j| TestFunction::new(Profile::Bump, self.centers[j], self.half_widths[j], lambda * self.relative_modulations[j]))
            .collect();
        TestFunctionFamily::new(FamilyKind::RandomBump, funcs)
    }
}

/// Resolution rule for the oscillatory quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadPolicy {
    /// Nodes per local wavelength of the total phase.
    pub points_per_wavelength: f64,
    /// Nodes per axis across the support at minimum.
    pub min_points: usize,
    pub max_nodes: usize,
    /// Quasi-random nodes used when the slice has more than three axes.
    pub qmc_nodes: usize,
    pub qmc_seeds: (u64, u64),
    /// Relative disagreement between successive refinements that counts as
    /// non-convergence.
    pub agreement: f64,
    /// Disagreements below `abs_floor · ∫|F| dσ` are ignored.
    pub abs_floor: f64,
    pub check: bool,
}

impl Default for QuadPolicy {
    fn default() -> Self {
        Self {
            points_per_wavelength: 10.0,
            min_points: 16,
            max_nodes: 400_000_000,
            qmc_nodes: 1 << 20,
            qmc_seeds: (11, 29),
            agreement: 0.05,
            abs_floor: 1e-9,
            check: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral {
    pub value: Complex64,
    /// Value at half the resolution, or the second quasi-random estimate.
    pub check_value: Complex64,
    pub nodes: usize,
}

impl Integral {
    pub fn zero() -> Self {
        Self { value: Complex64::new(0.0, 0.0), check_value: Complex64::new(0.0, 0.0), nodes: 0 }
    }
}

/// Per-axis sup of `|∂_k f|` over a box, sampled on a small grid.
fn box_sup_gradient(f: &dyn crate::field::SmoothField, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = lo.len();
    let pts = if n <= 4 { 5 } else { 3 };
    let axes: Vec<Vec<f64>> = (0..n).map(|k| linspace(lo[k], hi[k], pts)).collect();
    let mut idx = vec![0usize; n];
    let mut sup = vec![0.0f64; n];
    let mut x = vec![0.0; n];
    loop {
        for k in 0..n {
            x[k] = axes[k][idx[k]];
        }
        for (s, g) in sup.iter_mut().zip(f.gradient(&x)) {
            *s = s.max(g.abs());
        }
        if !advance(&mut idx, pts) {
            return sup;
        }
    }
}

/// `∫_M F dσ` over `M ∩ Π [lo_k, hi_k]` with the graph chart along `j0`.
/// `rates[k]` bounds the angular frequency of `F` along axis `k`.
fn oscillatory_integral<F>(inst: &ProblemInstance, lo: &[f64], hi: &[f64], j0: usize, rates: &[f64], policy: &QuadPolicy, integrand: F) -> Result<Integral>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let n = inst.dim();
    let on_box = |x: &[f64]| -> Complex64 {
        if x.iter().zip(lo).zip(hi).any(|((v, a), b)| v < a || v > b) {
            return Complex64::new(0.0, 0.0);
        }
        integrand(x)
    };
    let slice_lo: Vec<f64> = (0..n).filter(|&k| k != j0).map(|k| lo[k]).collect();
    let slice_hi: Vec<f64> = (0..n).filter(|&k| k != j0).map(|k| hi[k]).collect();
    // graph slopes on the box bound how the j0 phase rate leaks into slice axes
    let grad_sup = box_sup_gradient(inst.rho.as_ref(), lo, hi);
    let g0_min = {
        let mut m = f64::INFINITY;
        let mut idx = vec![0usize; n];
        let axes: Vec<Vec<f64>> = (0..n).map(|k| linspace(lo[k], hi[k], 3)).collect();
        let mut x = vec![0.0; n];
        loop {
            for k in 0..n {
                x[k] = axes[k][idx[k]];
            }
            let mut a = vec![0u8; n];
            a[j0] = 1;
            m = m.min(inst.rho.deriv(&a, &x).abs());
            if !advance(&mut idx, 3) {
                break;
            }
        }
        m.max(GRADIENT_FLOOR)
    };
    let counts: Vec<usize> = (0..n)
        .filter(|&k| k != j0)
        .enumerate()
        .map(|(s, k)| {
            let slope = (grad_sup[k] / g0_min).min(inst.graph_lipschitz().max(1.0) * 4.0);
            let rate = 1.25 * (rates[k] + slope * rates[j0]);
            let width = slice_hi[s] - slice_lo[s];
            let by_phase = (policy.points_per_wavelength * rate * width / (2.0 * PI)).ceil() as usize;
            by_phase.max(policy.min_points)
        })
        .collect();
    let m = n - 1;
    if m <= 3 {
        let total: f64 = counts.iter().map(|&c| c as f64).product();
        if total > policy.max_nodes as f64 {
            return Err(Error::NonConvergence(format!(
                "resolving the phase needs {total:.3e} nodes, above the limit {}",
                policy.max_nodes
            )));
        }
        let fine = SurfaceQuad::midpoint(j0, slice_lo.clone(), slice_hi.clone(), counts.clone());
        let value = surface_integral_with(inst, &fine, &on_box)?;
        let half: Vec<usize> = counts.iter().map(|&c| (c / 2).max(1)).collect();
        let coarse = SurfaceQuad::midpoint(j0, slice_lo, slice_hi, half);
        let check_value = if policy.check { surface_integral_with(inst, &coarse, &on_box)? } else { value };
        if policy.check {
            let mass = surface_integral_with(inst, &coarse, |x| Complex64::new(on_box(x).norm(), 0.0))?.re;
            let diff = (value - check_value).norm();
            if diff > policy.agreement * value.norm() && diff > policy.abs_floor * mass {
                return Err(Error::NonConvergence(format!(
                    "successive refinements disagree: {value} vs {check_value} ({} nodes)",
                    fine.node_count()
                )));
            }
        }
        Ok(Integral { value, check_value, nodes: fine.node_count() })
    } else {
        let quad = SurfaceQuad { j0, lo: slice_lo, hi: slice_hi, counts: Vec::new(), rule: Rule::QuasiRandom { nodes: policy.qmc_nodes, seed: policy.qmc_seeds.0 } };
        let a = surface_integral_with(inst, &quad, &on_box)?;
        let mut qb = quad.clone();
        qb.rule = Rule::QuasiRandom { nodes: policy.qmc_nodes, seed: policy.qmc_seeds.1 };
        let b = surface_integral_with(inst, &qb, &on_box)?;
        if policy.check {
            let mass = surface_integral_with(inst, &qb, |x| Complex64::new(on_box(x).norm(), 0.0))?.re;
            let diff = (a - b).norm();
            if diff > policy.agreement * a.norm().max(b.norm()) && diff > policy.abs_floor * mass {
                return Err(Error::NonConvergence(format!("quasi-random estimates disagree: {a} vs {b}")));
            }
        }
        Ok(Integral { value: (a + b) * 0.5, check_value: b, nodes: 2 * policy.qmc_nodes })
    }
}

/// Chart axis: the widest interval among axes whose partial of `ρ` at the
/// box center is at least half the largest partial.
fn chart_axis(inst: &ProblemInstance, lo: &[f64], hi: &[f64]) -> usize {
    let center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let g = inst.rho.gradient(&center);
    let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut best = None::<(usize, f64)>;
    for k in 0..lo.len() {
        if g[k].abs() < 0.5 * gmax {
            continue;
        }
        let w = hi[k] - lo[k];
        if best.map_or(true, |(_, bw)| w >= bw) {
            best = Some((k, w));
        }
    }
    best.map(|b| b.0).unwrap_or(lo.len() - 1)
}

/// `I_λ` for the family by surface quadrature.
pub fn eval_i(inst: &ProblemInstance, fam: &TestFunctionFamily, lambda: f64, policy: &QuadPolicy) -> Result<Integral> {
    inst.check_lambda(lambda)?;
    let n = inst.dim();
    if fam.funcs.len() != n {
        return Err(Error::InvalidInput(format!("family has {} slots but 2d = {n}", fam.funcs.len())));
    }
    let mut lo = vec![-inst.b0; n];
    let mut hi = vec![inst.b0; n];
    for (k, f) in fam.funcs.iter().enumerate() {
        match f.support() {
            None => return Ok(Integral::zero()),
            Some((a, b)) => {
                lo[k] = lo[k].max(a);
                hi[k] = hi[k].min(b);
            }
        }
        if !(lo[k] < hi[k]) {
            return Ok(Integral::zero());
        }
    }
    let phi_sup = box_sup_gradient(inst.phi.as_ref(), &lo, &hi);
    let rates: Vec<f64> = (0..n).map(|k| lambda.abs() * phi_sup[k] + fam.funcs[k].frequency()).collect();
    let j0 = chart_axis(inst, &lo, &hi);
    oscillatory_integral(inst, &lo, &hi, j0, &rates, policy, |x| {
        let a = inst.amp.eval(x);
        if a == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut v = Complex64::from_polar(a, lambda * inst.phi.eval(x));
        for (f, &xk) in fam.funcs.iter().zip(x) {
            v *= f.eval(xk);
            if v == Complex64::new(0.0, 0.0) {
                break;
            }
        }
        v
    })
}

/// Packets `φ_{ξ_j}` for each axis; errors on boundary frequencies.
pub fn kernel_packets(t: &Tiling, xi: &[f64]) -> Result<Vec<WavePacket>> {
    xi.iter().map(|&x| packet_for(t, x)?.ok_or(Error::BoundaryFrequency(x))).collect()
}

/// `Σ_j h_j sup_{B1} |∂_jρ|`, the largest `|ρ(y)|` compatible with a point
/// of `M` in the packet box of half-widths `h`.
pub fn support_bound(inst: &ProblemInstance, half_widths: &[f64]) -> f64 {
    let n = inst.dim();
    let sup = box_sup_gradient(inst.rho.as_ref(), &vec![-inst.b1; n], &vec![inst.b1; n]);
    half_widths.iter().zip(&sup).map(|(h, s)| h * s).sum()
}

/// Safety factor applied to [`support_bound`] before short-circuiting.
pub const SUPPORT_MARGIN: f64 = 1.25;

/// `𝓘(y, ξ) = ∫_M e^{iλΦ(x)} Π φ_{ξ_j}(x_j - y_j) a(x) dσ(x)`.
pub fn kernel_eval(inst: &ProblemInstance, w: &Window, t: &Tiling, y: &[f64], xi: &[f64], lambda: f64, policy: &QuadPolicy) -> Result<Integral> {
    inst.check_lambda(lambda)?;
    let n = inst.dim();
    if y.len() != n || xi.len() != n {
        return Err(Error::InvalidInput(format!("y and xi need {n} components")));
    }
    let packets = kernel_packets(t, xi)?;
    let hw: Vec<f64> = packets.iter().map(|p| p.half_support()).collect();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for k in 0..n {
        lo[k] = (y[k] - hw[k]).max(-inst.b0);
        hi[k] = (y[k] + hw[k]).min(inst.b0);
        if !(lo[k] < hi[k]) {
            return Ok(Integral::zero());
        }
    }
    if inst.rho.eval(y).abs() > SUPPORT_MARGIN * support_bound(inst, &hw) {
        return Ok(Integral::zero());
    }
    let phi_sup = box_sup_gradient(inst.phi.as_ref(), &lo, &hi);
    let rates: Vec<f64> = (0..n).map(|k| lambda.abs() * phi_sup[k] + 2.0 * PI * packets[k].modulation().abs()).collect();
    // envelope resolution: at least `min_points` across each packet
    let mut policy = *policy;
    policy.min_points = policy.min_points.max(16);
    let mut best = 0;
    for k in 0..n {
        if hi[k] - lo[k] > hi[best] - lo[best] {
            best = k;
        }
    }
    let g = inst.rho.gradient(y);
    let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let j0 = if g[best].abs() >= 0.5 * gmax { best } else { chart_axis(inst, &lo, &hi) };
    oscillatory_integral(inst, &lo, &hi, j0, &rates, &policy, |x| {
        let a = inst.amp.eval(x);
        if a == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut v = Complex64::from_polar(a, lambda * inst.phi.eval(x));
        for ((p, &xk), &yk) in packets.iter().zip(x).zip(y) {
            v *= p.eval(w, xk - yk);
            if v == Complex64::new(0.0, 0.0) {
                break;
            }
        }
        v
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleData {
    pub r: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
    /// `r_min² / r_max`.
    pub r_tilde: f64,
}

/// `r_j = max{|λ|, |ξ_j|}^(-1/2)`.
pub fn scales(lambda: f64, xi: &[f64]) -> ScaleData {
    let r: Vec<f64> = xi.iter().map(|x| lambda.abs().max(x.abs()).powf(-0.5)).collect();
    let r_min = r.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = r.iter().cloned().fold(0.0, f64::max);
    ScaleData { r_tilde: r_min * r_min / r_max, r, r_min, r_max }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    /// Strongly unbalanced packet scales.
    Xi1,
    Xi2,
}

/// `Ξ₁` iff `min_j r_j <= c_split · max_j r_j`.
pub fn classify_region(lambda: f64, xi: &[f64], c_split: f64) -> Result<Region> {
    if !(c_split > 0.0 && c_split < 1.0) {
        return Err(Error::InvalidInput(format!("c_split must lie in (0, 1), got {c_split}")));
    }
    let s = scales(lambda, xi);
    Ok(if s.r_min <= c_split * s.r_max { Region::Xi1 } else { Region::Xi2 })
}

pub const DEFAULT_C_SPLIT: f64 = 0.25;

/// `τ₀ = -∇ρ(y)·(λ∇Φ(y) + 2πξ) / |∇ρ(y)|²`.
pub fn tau0(inst: &ProblemInstance, y: &[f64], xi: &[f64], lambda: f64) -> Result<f64> {
    if !inst.in_b1(y) {
        return Err(Error::OutOfBox(y.to_vec()));
    }
    let g = inst.rho.gradient(y);
    let norm2: f64 = g.iter().map(|a| a * a).sum();
    if !(norm2.sqrt() >= GRADIENT_FLOOR) {
        return Err(Error::DegenerateGradient(y.to_vec()));
    }
    let gphi = inst.phi.gradient(y);
    let dot: f64 = (0..inst.dim()).map(|k| g[k] * (lambda * gphi[k] + 2.0 * PI * xi[k])).sum();
    Ok(-dot / norm2)
}

/// `|(λ∇Φ(y) + 2πξ + τ₀∇ρ(y))·∇ρ(y)| / (|λ∇Φ(y) + 2πξ| |∇ρ(y)|)`.
pub fn tau0_residual(inst: &ProblemInstance, y: &[f64], xi: &[f64], lambda: f64) -> Result<f64> {
    let t = tau0(inst, y, xi, lambda)?;
    let g = inst.rho.gradient(y);
    let gphi = inst.phi.gradient(y);
    let v: Vec<f64> = (0..inst.dim()).map(|k| lambda * gphi[k] + 2.0 * PI * xi[k]).collect();
    let dot: f64 = v.iter().zip(&g).map(|(a, b)| (a + t * b) * b).sum();
    let scale = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0) * g.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(dot.abs() / scale)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSample {
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
}

/// Samples with `y ∈ M` and `2πξ` within `√λ` of the normal line
/// `-(λ∇Φ(y) + τ∇ρ(y))`, `τ ∈ [-λ, λ]`, so the kernel is not negligible.
/// Frequencies on cell boundaries or beyond the cap are redrawn.
pub fn stationary_samples(inst: &ProblemInstance, t: &Tiling, lambda: f64, count: usize, rng: &mut impl Rng) -> Result<Vec<KernelSample>> {
    let n = inst.dim();
    let spread = 0.5 * inst.b0;
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > 100 * count + 100 {
            return Err(Error::NonConvergence("could not draw kernel samples inside the tiling cap".into()));
        }
        let slice: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-spread..spread)).collect();
        let s = match solve_on_axis(inst.rho.as_ref(), inst.b1, n - 1, &slice, default_tol(inst.b1)) {
            Ok(s) => s,
            Err(Error::NoRoot { .. }) => continue,
            Err(e) => return Err(e),
        };
        let y = assemble(n - 1, &slice, s);
        if y[n - 1].abs() > spread {
            continue;
        }
        let g = inst.rho.gradient(&y);
        let gp = inst.phi.gradient(&y);
        let tau = rng.gen_range(-lambda.abs()..lambda.abs());
        let xi: Vec<f64> = (0..n)
            .map(|k| (-(lambda * gp[k] + tau * g[k]) + lambda.abs().sqrt() * rng.gen_range(-1.0..1.0)) / (2.0 * PI))
            .collect();
        let ok = xi.iter().all(|&x| matches!(t.locate(x), Ok(crate::tiling::Location::Cell { .. })));
        if ok {
            out.push(KernelSample { y, xi });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelProbeRow {
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    pub value: Complex64,
    pub abs: f64,
    pub region: Region,
    /// `(1 + r̃|P|)^(-N) r_{j0}^(-1) Π r_j^(1/2)` with `j0` maximizing `r_j`
    /// and `P` the projected phase gradient at `y`.
    pub size_bound: f64,
    pub size_ratio: f64,
    /// `(|λ| + |ξ|)^(-(N-1)/2) |λ|^(-d/2)` for samples in the first region.
    pub rapid_bound: Option<f64>,
    pub rapid_ratio: Option<f64>,
    pub nodes: usize,
}

pub fn size_bound(inst: &ProblemInstance, lambda: f64, y: &[f64], xi: &[f64], n: usize) -> Result<f64> {
    let s = scales(lambda, xi);
    let p = projected_phase_gradient(inst, lambda, xi, y)?;
    let pn = p.iter().map(|a| a * a).sum::<f64>().sqrt();
    let prod: f64 = s.r.iter().map(|r| r.sqrt()).product();
    Ok((1.0 + s.r_tilde * pn).powi(-(n as i32)) / s.r_max * prod)
}

#[allow(clippy::too_many_arguments)]
pub fn kernel_decay_probe(
    inst: &ProblemInstance,
    w: &Window,
    t: &Tiling,
    samples: &[KernelSample],
    lambda: f64,
    n: usize,
    c_split: f64,
    policy: &QuadPolicy,
) -> Result<Vec<KernelProbeRow>> {
    let d = inst.d;
    if n == 0 || n > 2 * d + 2 {
        return Err(Error::InvalidInput(format!("N must lie in 1..={}, got {n}", 2 * d + 2)));
    }
    samples
        .iter()
        .map(|s| {
            let k = kernel_eval(inst, w, t, &s.y, &s.xi, lambda, policy)?;
            let region = classify_region(lambda, &s.xi, c_split)?;
            let bound = size_bound(inst, lambda, &s.y, &s.xi, n)?;
            let abs = k.value.norm();
            let (rapid_bound, rapid_ratio) = if region == Region::Xi1 {
                let xi_norm = s.xi.iter().map(|a| a * a).sum::<f64>().sqrt();
                let b = (lambda.abs() + xi_norm).powf(-((n as f64) - 1.0) / 2.0) * lambda.abs().powf(-(d as f64) / 2.0);
                (Some(b), Some(abs / b))
            } else {
                (None, None)
            };
            Ok(KernelProbeRow {
                y: s.y.clone(),
                xi: s.xi.clone(),
                value: k.value,
                abs,
                region,
                size_bound: bound,
                size_ratio: abs / bound,
                rapid_bound,
                rapid_ratio,
                nodes: k.nodes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_examples() {
        let s = scales(100.0, &[0.0; 4]);
        assert!(s.r.iter().all(|&r| (r - 0.1).abs() < 1e-15));
        let s = scales(100.0, &[400.0, 0.0, 0.0, 0.0]);
        assert!((s.r[0] - 0.05).abs() < 1e-15 && (s.r_min - 0.05).abs() < 1e-15);
        assert!((s.r_tilde - 0.025).abs() < 1e-15);
    }

    #[test]
    fn region_examples() {
        assert_eq!(classify_region(100.0, &[0.0; 4], 0.99).unwrap(), Region::Xi2);
        assert_eq!(classify_region(100.0, &[1e6, 0.0, 0.0, 0.0], 0.5).unwrap(), Region::Xi1);
        // r_min = 0.05 = 0.5 · 0.1 exactly
        assert_eq!(classify_region(100.0, &[400.0, 0.0, 0.0, 0.0], 0.5).unwrap(), Region::Xi1);
        assert!(classify_region(100.0, &[0.0; 4], 1.0).is_err());
    }

    #[test]
    fn tau0_examples() {
        let inst = ProblemInstance::builtin("sum").unwrap();
        let t = tau0(&inst, &[0.01, 0.02, -0.03, 0.0], &[1.0; 4], 7.0).unwrap();
        assert!((t + 2.0 * PI).abs() < 1e-14);
        let even = ProblemInstance::builtin("paper-even-d2").unwrap();
        let y = [0.1, 0.2, -0.1, 0.3];
        let g = even.phi.gradient(&y);
        let xi: Vec<f64> = g.iter().map(|v| -50.0 * v / (2.0 * PI)).collect();
        assert!(tau0(&even, &y, &xi, 50.0).unwrap().abs() < 1e-13);
        assert!(tau0_residual(&even, &y, &[3.0, 1.0, -2.0, 5.0], 50.0).unwrap() < 1e-14);
    }

    #[test]
    fn zero_and_flat_functionals() {
        let inst = ProblemInstance::builtin("sum").unwrap();
        let zero = TestFunctionFamily::new(FamilyKind::User, (0..4).map(|_| TestFunction::new(Profile::Zero, 0.0, 0.0, 0.0)).collect());
        assert_eq!(eval_i(&inst, &zero, 100.0, &QuadPolicy::default()).unwrap().value, Complex64::new(0.0, 0.0));
        let ones = TestFunctionFamily::new(FamilyKind::User, (0..4).map(|_| TestFunction::new(Profile::Constant, 0.0, 0.0, 0.0)).collect());
        let a = eval_i(&inst, &ones, 100.0, &QuadPolicy::default()).unwrap().value;
        let b = eval_i(&inst, &ones, 400.0, &QuadPolicy::default()).unwrap().value;
        assert!(a.re > 0.0 && a.im.abs() < 1e-15);
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn extremizer_shape() {
        let inst = ProblemInstance::builtin("paper-even-d2").unwrap();
        let e = extremizer_family(&inst, 100.0, 0.1, inst.graph_lipschitz()).unwrap();
        assert_eq!(e.c_prime, 0.1);
        assert!(e.phase_error < PI / 4.0);
        assert!((e.family.funcs[0].half_width - 0.01).abs() < 1e-15);
        assert!((e.family.funcs[3].half_width - 0.01 * inst.graph_lipschitz()).abs() < 1e-15);
    }

    #[test]
    fn kernel_short_circuits() {
        let inst = ProblemInstance::builtin("paper-even-d2").unwrap();
        let w = crate::window::make_window("default", 2048).unwrap();
        let t = crate::tiling::build_tiling(100.0, 1000.0).unwrap();
        let xi = [5.0, -5.0, 15.0, 25.0];
        let far = kernel_eval(&inst, &w, &t, &[0.9, 0.0, 0.0, 0.0], &xi, 100.0, &QuadPolicy::default()).unwrap();
        assert_eq!(far.value, Complex64::new(0.0, 0.0));
        assert_eq!(far.nodes, 0);
        let off = kernel_eval(&inst, &w, &t, &[0.2, 0.2, 0.2, 0.2], &xi, 100.0, &QuadPolicy::default()).unwrap();
        assert_eq!(off.value, Complex64::new(0.0, 0.0));
        assert!(matches!(kernel_eval(&inst, &w, &t, &[0.0; 4], &[10.0, 0.5, 0.5, 0.5], 100.0, &QuadPolicy::default()), Err(Error::BoundaryFrequency(_))));
    }
}
