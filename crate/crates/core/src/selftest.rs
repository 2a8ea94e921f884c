//! The built-in check battery behind `osclab selftest`.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bump::Bump1D;
use crate::decay::{decay_fit, geometric, FamilySpec};
use crate::error::Result;
use crate::field::{PhaseField, TensorBump};
use crate::instance::ProblemInstance;
use crate::kernel::{kernel_eval, stationary_samples, support_bound, BumpFamilySpec, QuadPolicy, SUPPORT_MARGIN};
use crate::manifest::Check;
use crate::nondegeneracy::{bordered_det, canonical_partitions, certify_with, jacobian_homogeneity_probe, CertifyOptions, CirclePoint, Grid, Partition};
use crate::packet::derivative_bound_probe;
use crate::stationary::{apply_x, ibp_convergence, pairing_check, AdjointKind, TangentField};
use crate::surface::{assemble, default_tol, solve_on_axis, SurfaceQuad};
use crate::tiling::{boxsize_holds, boxsize_holds_on_cell, build_tiling, cell_for, Location};
use crate::transform::{analysis, grid_size_for, relative_error, synthesis, Signal};
use crate::window::Window;

#[derive(Debug, Clone, Copy, Default)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Smaller sample counts; the slow quadrature checks are skipped.
    pub quick: bool,
    pub flip_sign: bool,
}

fn timed(name: &str, limit_s: f64, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let t = Instant::now();
    match f() {
        Ok((ok, detail)) => {
            let e = t.elapsed().as_secs_f64();
            let in_time = e < limit_s;
            let detail = format!("{detail}; {e:.2} s (limit {limit_s} s)");
            Check::new(name, ok && in_time, detail)
        }
        Err(e) => Check::new(name, false, format!("error: {e}")),
    }
}

pub fn battery(opts: &SelftestOptions) -> Vec<Check> {
    let mut out = Vec::new();
    let even = match ProblemInstance::builtin("paper-even-d2") {
        Ok(i) => i,
        Err(e) => return vec![Check::new("instance", false, e.to_string())],
    };
    let window = match Window::default_window() {
        Ok(w) => w,
        Err(e) => return vec![Check::new("window", false, e.to_string())],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = |full: usize, quick: usize| if opts.quick { quick } else { full };

    out.push(timed("tiling-boxsize", 10.0, || {
        let mut bad = 0usize;
        for lambda in [1.0, 10.0, 37.5, 100.0, 1e3, 1e4, 1e6] {
            let t = build_tiling(lambda, 16.0 * lambda)?;
            bad += t.cells.iter().filter(|c| !boxsize_holds_on_cell(lambda, c)).count();
        }
        let n = scale(1_000_000, 10_000);
        for _ in 0..n {
            let lambda = 10f64.powf(rng.gen_range(0.0..6.0));
            let xi = rng.gen_range(-8.0 * lambda..8.0 * lambda);
            if let Location::Cell { cell, .. } = cell_for(lambda, xi)? {
                if !boxsize_holds(lambda, &cell, xi) {
                    bad += 1;
                }
            }
        }
        Ok((bad == 0, format!("{n} random pairs, {bad} violations")))
    }));

    let mut worst_err: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let recon = timed("reconstruction", 60.0, || {
        let per = scale(50, 4);
        for lambda in [1.0, 10.0, 100.0] {
            let xi_max = 4.0 * lambda;
            let t = build_tiling(lambda, xi_max)?;
            let n = grid_size_for(xi_max);
            for _ in 0..per {
                let f = Signal::random_bandlimited(n, xi_max, &mut rng);
                let c = analysis(&window, &t, &f)?;
                let g = synthesis(&window, &t, &c)?;
                worst_err = worst_err.max(relative_error(&f, &g));
                worst_ratio = worst_ratio.max(c.norm_sq() / f.l2_norm().powi(2));
            }
        }
        Ok((worst_err <= 1e-6, format!("max relative error {worst_err:.3e}")))
    });
    out.push(recon);
    let bound = 1.0 / window.fourier_floor + 1e-6;
    out.push(Check::new(
        "analysis-bound",
        worst_ratio > 0.0 && worst_ratio <= bound,
        format!("max |Vf|^2/|f|^2 = {worst_ratio:.6} against {bound:.6}"),
    ));

    out.push(timed("packet-scaling", 60.0, || {
        let mut ratios = vec![Vec::new(); 3];
        let mut support = true;
        let mut drawn = 0;
        while drawn < 50 {
            let lambda = 10f64.powf(rng.gen_range(2.0..4.0));
            let xi = rng.gen_range(-4.0 * lambda..4.0 * lambda);
            let t = build_tiling(lambda, 4.0 * lambda)?;
            if !matches!(t.locate(xi)?, Location::Cell { .. }) {
                continue;
            }
            drawn += 1;
            for (k, r) in ratios.iter_mut().enumerate() {
                let p = derivative_bound_probe(&window, &t, xi, k)?;
                support &= p.support_ok;
                r.push(p.ratio);
            }
        }
        let spread: Vec<f64> = ratios
            .iter()
            .map(|r| r.iter().cloned().fold(0.0, f64::max) / r.iter().cloned().fold(f64::INFINITY, f64::min))
            .collect();
        let ok = support && spread.iter().all(|s| *s <= 10.0);
        Ok((ok, format!("max/min ratio per k = {spread:.3?}, support contained: {support}")))
    }));

    out.push(timed("example-determinants", 60.0, || {
        let pa = Partition::new(2, vec![0, 2], vec![1, 3])?;
        let pb = Partition::new(2, vec![0, 1], vec![2, 3])?;
        let closed = |p: &Partition, x: &[f64], w: &CirclePoint| if *p == pa { -(1.0 + x[0]) * w.tau_tilde } else { -w.tau };
        let mut worst: f64 = 0.0;
        for _ in 0..scale(1000, 100) {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let w = CirclePoint::from_angle(rng.gen_range(0.0..2.0 * PI));
            for p in [&pa, &pb] {
                let got = bordered_det(&even, p, &x, &w)?;
                let want = closed(p, &x, &w);
                worst = worst.max((got - want).abs() / want.abs().max(1e-300));
            }
        }
        let opts_c = CertifyOptions { flip_sign: opts.flip_sign, ..Default::default() };
        let density = scale(9, 5);
        let grid = Grid::tensor(4, even.b1, density);
        let rep = certify_with(&even, &grid, 64, opts_c);
        // witnesses carry signed determinants that must match the formulas
        let parts = canonical_partitions(2);
        let mut witness_err: f64 = 0.0;
        for w in &rep.witnesses {
            let p = &parts[w.partition];
            if *p == pa || *p == pb {
                let x = grid.point(w.x_index);
                let want = closed(p, &x, &rep.circle[w.angle_index]);
                witness_err = witness_err.max((w.det - want).abs() / want.abs().max(1e-300));
            }
        }
        let ok = worst <= 1e-10 && witness_err <= 1e-10 && rep.failures.is_empty() && rep.c_lower >= 0.44;
        Ok((ok, format!("formula error {worst:.2e}, witness error {witness_err:.2e}, c_lower {:.5}", rep.c_lower)))
    }));

    out.push(timed("jacobian-homogeneity", 60.0, || {
        let parts = canonical_partitions(2);
        let mut worst: f64 = 0.0;
        for _ in 0..scale(1000, 100) {
            let p = &parts[rng.gen_range(0..parts.len())];
            let v: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.2..0.2)).collect();
            let u: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.2..0.2)).collect();
            let (l, t) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let s = rng.gen_range(1.5..20.0);
            let rows = jacobian_homogeneity_probe(&even, p, &v, &u, &[(l, t), (s * l, s * t)])?;
            if rows[0].singular {
                continue;
            }
            worst = worst.max((rows[0].ratio - rows[1].ratio).abs() / rows[0].ratio);
        }
        Ok((worst <= 1e-10, format!("max relative ray deviation {worst:.2e}")))
    }));

    if opts.quick {
        out.push(Check::skip("ibp-identity", "skipped in quick mode"));
    } else {
        out.push(timed("ibp-identity", 300.0, || {
            let phase = PhaseField::new(even.phi.clone(), 50.0, vec![0.0; 4]);
            let hw = 0.2;
            let psi = TensorBump::centered(4, hw);
            let mut ok = true;
            let mut detail = Vec::new();
            for (n, res) in [(1usize, 48usize), (2, 80)] {
                let quad = SurfaceQuad::midpoint(3, vec![-hw; 3], vec![hw; 3], vec![res; 3]);
                let c = ibp_convergence(&even, &phase, &psi, TangentField::Projected(0), Complex64::new(10.0, 0.0), n, &quad, AdjointKind::Surface)?;
                ok &= c.coarse.rel_error <= 1e-4 && c.order >= 2.0;
                detail.push(format!("N={n}: error {:.2e} at {res}, order {:.2}", c.coarse.rel_error, c.order));
            }
            Ok((ok, detail.join(", ")))
        }));
    }

    out.push(timed("adjoint-tangency", 300.0, || {
        let fields = TangentField::all(4);
        let mut worst: f64 = 0.0;
        let mut count = 0;
        while count < scale(10_000, 500) {
            let slice: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.45..0.45)).collect();
            let t = match solve_on_axis(even.rho.as_ref(), even.b1, 3, &slice, default_tol(even.b1)) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let x = assemble(3, &slice, t);
            let f = fields[count % fields.len()];
            worst = worst.max(apply_x(&even, f, even.rho.as_ref(), &x)?.abs());
            count += 1;
        }
        let mut pair_worst: f64 = 0.0;
        for k in 0..scale(20, 3) {
            let bump = |rng: &mut ChaCha8Rng| {
                TensorBump::new((0..4).map(|_| Bump1D::new(rng.gen_range(-0.04..0.04), rng.gen_range(0.12..0.18))).collect())
            };
            let f = bump(&mut rng);
            let g = bump(&mut rng);
            let field = fields[k % fields.len()];
            let lo: Vec<f64> = (0..3).map(|i| f.factors[i].support().0.max(g.factors[i].support().0)).collect();
            let hi: Vec<f64> = (0..3).map(|i| f.factors[i].support().1.min(g.factors[i].support().1)).collect();
            let quad = SurfaceQuad::midpoint(3, lo, hi, vec![64; 3]);
            let p = pairing_check(&even, field, &f, &g, &quad, AdjointKind::Surface)?;
            pair_worst = pair_worst.max(p.rel_error);
        }
        Ok((worst <= 1e-8 && pair_worst <= 1e-5, format!("max |X rho| {worst:.2e}, max pairing error {pair_worst:.2e} of the surface mass")))
    }));

    if opts.quick {
        out.push(Check::skip("sharpness-slope", "skipped in quick mode"));
        out.push(Check::skip("upper-bound", "skipped in quick mode"));
    } else {
        let policy = QuadPolicy { min_points: 24, ..Default::default() };
        let lambdas = geometric(25.0, 800.0, 6);
        out.push(timed("sharpness-slope", 900.0, || {
            let r = decay_fit(&even, &FamilySpec::extremizer(), &lambdas, &policy)?;
            Ok(((r.slope + 1.5).abs() <= 0.15, format!("slope {:.4}", r.slope)))
        }));
        out.push(timed("upper-bound", 1200.0, || {
            let mut worst: f64 = 0.0;
            let mut violations = 0;
            for _ in 0..20 {
                let spec = BumpFamilySpec::random(&even, &mut rng)?;
                let r = decay_fit(&even, &FamilySpec::RandomBump { spec, normalized: true }, &lambdas, &policy)?;
                worst = worst.max(r.upper_ratio_max);
                violations += r.violation as usize;
            }
            Ok((violations == 0, format!("max upper ratio {worst:.3e}, {violations} monotone blow-ups")))
        }));
    }

    out.push(timed("kernel-diagnostics", 600.0, || {
        let lambda = 100.0;
        let t = build_tiling(lambda, 8.0 * lambda)?;
        let policy = QuadPolicy::default();
        let fine = QuadPolicy { points_per_wavelength: 20.0, min_points: 40, ..Default::default() };
        let samples = stationary_samples(&even, &t, lambda, scale(20, 3), &mut rng)?;
        let mut worst: f64 = 0.0;
        for s in &samples {
            let a = kernel_eval(&even, &window, &t, &s.y, &s.xi, lambda, &policy)?.value;
            let b = kernel_eval(&even, &window, &t, &s.y, &s.xi, lambda, &fine)?.value;
            worst = worst.max((a - b).norm() / b.norm().max(1e-300));
        }
        let mut zeros = true;
        for s in &samples {
            let far: Vec<f64> = s.y.iter().map(|v| v + 0.9).collect();
            zeros &= kernel_eval(&even, &window, &t, &far, &s.xi, lambda, &policy)?.value == Complex64::new(0.0, 0.0);
            let g = even.rho.gradient(&s.y);
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let hw: Vec<f64> = s.xi.iter().map(|&x| crate::packet::packet_for(&t, x).ok().flatten().map_or(0.0, |p| p.half_support())).collect();
            let push = 2.0 * SUPPORT_MARGIN * support_bound(&even, &hw) / gn;
            let off: Vec<f64> = s.y.iter().zip(&g).map(|(v, gk)| v + push * gk / gn).collect();
            if even.rho.eval(&off).abs() > SUPPORT_MARGIN * support_bound(&even, &hw) {
                zeros &= kernel_eval(&even, &window, &t, &off, &s.xi, lambda, &policy)?.value == Complex64::new(0.0, 0.0);
            }
        }
        Ok((worst <= 0.01 && zeros, format!("max refinement disagreement {worst:.2e}, exact zeros: {zeros}")))
    }));

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::Status;

    #[test]
    fn flip_sign_is_noticed() {
        let checks = battery(&SelftestOptions { seed: 3, quick: true, flip_sign: true });
        let det = checks.iter().find(|c| c.name == "example-determinants").unwrap();
        assert_eq!(det.status, Status::Fail, "{det:?}");
    }
}
