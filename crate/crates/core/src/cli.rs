//! Subcommand implementations behind the `osclab` binary.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::decay::{decay_fit, DecayReport, FamilySpec};
use crate::error::{Error, Result};
use crate::field::{PhaseField, TensorBump};
use crate::instance::ProblemInstance;
use crate::kernel::{kernel_decay_probe, stationary_samples, BumpFamilySpec, KernelSample, QuadPolicy};
use crate::manifest::{Check, Run, RunManifest};
use crate::nondegeneracy::{certify_with, CertifyOptions, Grid};
use crate::packet::derivative_bound_probe;
use crate::selftest::{battery, SelftestOptions};
use crate::signal_io;
use crate::stationary::{ibp_convergence, AdjointKind, TangentField};
use crate::surface::SurfaceQuad;
use crate::tiling::{boxsize_holds, boxsize_holds_on_cell, build_tiling, cell_for, Location};
use crate::transform::{analysis, grid_size_for, relative_error, synthesis, Signal};
use crate::window::{make_window, Window};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

/// Output directory override; the only environment variable consulted.
pub const OUT_ENV: &str = "OSCLAB_OUT";

#[derive(Debug, Parser)]
#[command(name = "osclab", version, about = "Multilinear oscillatory integrals over hypersurfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Single worker thread, for bit-reproducible reductions.
    #[arg(long, global = true)]
    pub serial: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated λ values, overriding the config.
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    Tiling,
    Window,
    Reconstruct,
    Certify,
    Kernel,
    Ibp,
    Decay,
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Tiling => "tiling",
            Command::Window => "window",
            Command::Reconstruct => "reconstruct",
            Command::Certify => "certify",
            Command::Kernel => "kernel",
            Command::Ibp => "ibp",
            Command::Decay => "decay",
            Command::Selftest => "selftest",
        }
    }
}

/// A parsed invocation with CLI overrides already applied.
pub struct Context {
    pub command: Command,
    pub config: ExperimentConfig,
    pub text: String,
    pub out: PathBuf,
    pub seed: u64,
    pub serial: bool,
    pub lambdas: Option<Vec<f64>>,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let text = match &cli.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Io(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut config = ExperimentConfig::parse(&text)?;
        if let Some(s) = cli.seed {
            config.run.seed = s;
        }
        config.run.serial |= cli.serial;
        let out = cli
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .or_else(|| config.run.out.clone())
            .unwrap_or_else(|| PathBuf::from("osclab-out").join(cli.command.name()));
        config.run.out = Some(out.clone());
        Ok(Self { command: cli.command, seed: config.run.seed, serial: config.run.serial, config, text, out, lambdas: cli.lambda.clone() })
    }

    fn instance(&self) -> Result<ProblemInstance> {
        self.config.instance(&self.text)
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn first_lambda(&self, default: f64) -> f64 {
        self.lambdas.as_ref().and_then(|l| l.first().copied()).unwrap_or(default)
    }
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NonConvergence(_) => EXIT_NONCONVERGENCE,
        _ => EXIT_USAGE,
    }
}

/// Runs one subcommand, always attempting to write a manifest. Returns the
/// manifest (when the output directory is usable) and the exit code.
pub fn execute(ctx: &Context) -> (Option<RunManifest>, i32) {
    let mut run = match Run::new(&ctx.out) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("osclab: {e}");
            return (None, EXIT_USAGE);
        }
    };
    let result = match ctx.command {
        Command::Tiling => cmd_tiling(ctx, &mut run),
        Command::Window => cmd_window(ctx, &mut run),
        Command::Reconstruct => cmd_reconstruct(ctx, &mut run),
        Command::Certify => cmd_certify(ctx, &mut run),
        Command::Kernel => cmd_kernel(ctx, &mut run),
        Command::Ibp => cmd_ibp(ctx, &mut run),
        Command::Decay => cmd_decay(ctx, &mut run),
        Command::Selftest => cmd_selftest(ctx, &mut run),
    };
    let (code, error) = match &result {
        Ok(()) if run.all_pass() => (EXIT_PASS, None),
        Ok(()) => (EXIT_FAIL, None),
        Err(e) => {
            run.check(Check::new(ctx.command.name(), false, e.to_string()));
            (exit_code_for(e), Some(e.to_string()))
        }
    };
    match run.finish(ctx.command.name(), ctx.seed, ctx.serial, ctx.config.echo(), error) {
        Ok(m) => {
            for c in &m.checks {
                println!("{:<24} {:?} {}", c.name, c.status, c.detail);
            }
            (Some(m), code)
        }
        Err(e) => {
            eprintln!("osclab: {e}");
            (None, EXIT_USAGE)
        }
    }
}

pub fn cmd_tiling(ctx: &Context, run: &mut Run) -> Result<()> {
    let c = &ctx.config.tiling;
    let lambda = ctx.first_lambda(c.lambda);
    let n0 = crate::tiling::n0_for(lambda)?;
    let xi_max = c.xi_max.unwrap_or(((n0 + 2) * (n0 + 2)) as f64);
    let t = build_tiling(lambda, xi_max)?;
    run.write("tiling.csv", t.to_csv())?;
    let mut dat = String::from("# center length\n");
    for q in &t.cells {
        writeln!(dat, "{} {}", q.center(), q.length()).expect("string write");
    }
    run.write("tiling.dat", dat)?;
    let bad_cells = t.cells.iter().filter(|q| !boxsize_holds_on_cell(lambda, q)).count();
    run.check(Check::new("boxsize-cells", bad_cells == 0, format!("{} cells, {bad_cells} violations", t.cells.len())));
    let contiguous = t.cells.windows(2).all(|w| w[0].hi == w[1].lo);
    let covers = t.cells.first().map_or(false, |q| q.lo as f64 <= -xi_max) && t.cells.last().map_or(false, |q| q.hi as f64 >= xi_max);
    run.check(Check::new("cover", contiguous && covers, format!("contiguous: {contiguous}, covers [-{xi_max}, {xi_max}]: {covers}")));
    if !(c.lambda_max >= 1.0) {
        return Err(Error::InvalidInput(format!("lambda_max must be at least 1, got {}", c.lambda_max)));
    }
    let mut rng = ctx.rng();
    let mut bad = 0usize;
    for _ in 0..c.samples {
        let l = 10f64.powf(rng.gen_range(0.0..=c.lambda_max.log10()));
        let xi = rng.gen_range(-8.0 * l..8.0 * l);
        if let Location::Cell { cell, .. } = cell_for(l, xi)? {
            bad += !boxsize_holds(l, &cell, xi) as usize;
        }
    }
    run.check(Check::new("boxsize-random", bad == 0, format!("{} random pairs, {bad} violations", c.samples)));
    run.write_json("summary.json", &serde_json::json!({ "lambda": lambda, "n0": t.n0, "xi_max": xi_max, "cells": t.cells.len() }))
}

fn window_of(ctx: &Context) -> Result<Window> {
    make_window(&ctx.config.window.profile, ctx.config.window.grid)
}

pub fn cmd_window(ctx: &Context, run: &mut Run) -> Result<()> {
    let c = &ctx.config.window;
    let w = window_of(ctx)?;
    run.write_json("window.json", &w)?;
    let mut dat = String::from("# x phi\n");
    for (x, v) in w.samples(c.stride) {
        writeln!(dat, "{x:e} {v:e}").expect("string write");
    }
    run.write("window.dat", dat)?;
    let mut fdat = String::from("# nu phi_hat\n");
    for k in 0..=400 {
        let nu = -2.0 + k as f64 / 100.0;
        writeln!(fdat, "{nu:e} {:e}", w.fourier(nu)).expect("string write");
    }
    run.write("window_fourier.dat", fdat)?;
    run.check(Check::new("fourier-floor", w.fourier_floor > 0.0, format!("min phi_hat on [-1/2, 1/2] = {:e}", w.fourier_floor)));

    let mut rng = ctx.rng();
    let mut csv = String::from("lambda,xi,k,cell_lo,cell_hi,r,support_ok,ratio\n");
    let mut per_k = vec![Vec::new(); 3];
    let mut support = true;
    let mut drawn = 0;
    while drawn < c.probe_samples {
        let lambda = 10f64.powf(rng.gen_range(2.0..4.0));
        let xi = rng.gen_range(-4.0 * lambda..4.0 * lambda);
        let t = build_tiling(lambda, 4.0 * lambda)?;
        if !matches!(t.locate(xi)?, Location::Cell { .. }) {
            continue;
        }
        drawn += 1;
        for (k, r) in per_k.iter_mut().enumerate() {
            let p = derivative_bound_probe(&w, &t, xi, k)?;
            support &= p.support_ok;
            r.push(p.ratio);
            writeln!(csv, "{lambda:e},{xi:e},{k},{},{},{:e},{},{:e}", p.cell.lo, p.cell.hi, p.r, p.support_ok, p.ratio).expect("string write");
        }
    }
    run.write("packet_probe.csv", csv)?;
    let spread: Vec<f64> = per_k
        .iter()
        .map(|r| r.iter().cloned().fold(0.0, f64::max) / r.iter().cloned().fold(f64::INFINITY, f64::min))
        .collect();
    run.check(Check::new("packet-support", support, format!("{drawn} samples")));
    run.check(Check::new("packet-scaling", spread.iter().all(|s| *s <= 10.0), format!("max/min ratio per k = {spread:.3?}")));
    Ok(())
}

pub fn cmd_reconstruct(ctx: &Context, run: &mut Run) -> Result<()> {
    let c = &ctx.config.reconstruct;
    let w = window_of(ctx)?;
    let lambdas = ctx.lambdas.clone().unwrap_or_else(|| c.lambdas.clone());
    let bound = 1.0 / w.fourier_floor + 1e-6;
    let mut csv = String::from("lambda,signal,n,rel_error,norm_ratio\n");
    let mut worst_err: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut rng = ctx.rng();
    let input = match &c.input {
        Some(p) => Some(signal_io::read_signal(p)?),
        None => None,
    };
    for &lambda in &lambdas {
        let xi_max = c.xi_max.unwrap_or(c.xi_max_factor * lambda.abs()).max(lambda.abs());
        let t = build_tiling(lambda, xi_max)?;
        let signals: Vec<Signal> = match &input {
            Some(s) => vec![s.clone()],
            None => (0..c.signals).map(|_| Signal::random_bandlimited(grid_size_for(xi_max), xi_max, &mut rng)).collect(),
        };
        for (k, f) in signals.iter().enumerate() {
            let coeffs = analysis(&w, &t, f)?;
            let g = synthesis(&w, &t, &coeffs)?;
            let err = relative_error(f, &g);
            let ratio = coeffs.norm_sq() / f.l2_norm().powi(2);
            worst_err = worst_err.max(err);
            worst_ratio = worst_ratio.max(ratio);
            writeln!(csv, "{lambda:e},{k},{},{err:e},{ratio:e}", f.len()).expect("string write");
            if input.is_some() {
                let name = format!("reconstructed_{k}_{lambda}.{}", if c.binary { "oscs" } else { "txt" });
                let bytes = if c.binary { signal_io::to_binary(&g) } else { signal_io::to_text(&g).into_bytes() };
                run.write(&name, bytes)?;
            }
        }
    }
    run.write("reconstruct.csv", csv)?;
    run.check(Check::new("reconstruction", worst_err <= c.tolerance, format!("max relative error {worst_err:.3e} (tolerance {:e})", c.tolerance)));
    run.check(Check::new("analysis-bound", worst_ratio <= bound, format!("max |Vf|^2/|f|^2 = {worst_ratio:.6} against {bound:.6}")));
    Ok(())
}

pub fn cmd_certify(ctx: &Context, run: &mut Run) -> Result<()> {
    let c = &ctx.config.certify;
    let inst = ctx.instance()?;
    let grid = Grid::tensor(inst.dim(), inst.b1, c.grid_density);
    let opts = CertifyOptions { threshold: c.threshold, lipschitz_padding: c.lipschitz_padding, flip_sign: false };
    let rep = certify_with(&inst, &grid, c.circle_points, opts);
    let mut wcsv = String::from("x_index,angle_index,partition,det\n");
    for w in &rep.witnesses {
        writeln!(wcsv, "{},{},{},{:e}", w.x_index, w.angle_index, w.partition, w.det).expect("string write");
    }
    run.write("witnesses.csv", wcsv)?;
    let mut fcsv = String::from("x,tau_tilde,tau\n");
    for (x, w) in &rep.failures {
        let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        writeln!(fcsv, "{},{},{}", xs.join(" "), w.tau_tilde, w.tau).expect("string write");
    }
    run.write("failures.csv", fcsv)?;
    run.write_json(
        "certify.json",
        &serde_json::json!({
            "instance": inst.name,
            "c_lower": rep.c_lower,
            "c_padded": rep.c_padded,
            "n_x": rep.n_x,
            "circle_points": rep.circle.len(),
            "failures": rep.failures.len(),
            "worst": rep.worst,
        }),
    )?;
    run.check(Check::new(
        "nondegeneracy",
        rep.failures.is_empty(),
        format!("c_lower {:.6}, {} failing samples", rep.c_lower, rep.failures.len()),
    ));
    Ok(())
}

pub fn cmd_kernel(ctx: &Context, run: &mut Run) -> Result<()> {
    let c = &ctx.config.kernel;
    let inst = ctx.instance()?;
    let w = window_of(ctx)?;
    let lambda = ctx.first_lambda(c.lambda);
    let t = build_tiling(lambda, c.xi_max_factor * lambda.abs())?;
    let mut rng = ctx.rng();
    let mut samples = stationary_samples(&inst, &t, lambda, c.samples, &mut rng)?;
    // one sample far outside the amplitude support
    if let Some(s) = samples.first().cloned() {
        samples.push(KernelSample { y: s.y.iter().map(|v| v + 0.9).collect(), xi: s.xi });
    }
    let rows = kernel_decay_probe(&inst, &w, &t, &samples, lambda, c.order, c.c_split, &QuadPolicy::default())?;
    let mut csv = String::from("y,xi,re,im,abs,region,size_bound,size_ratio,rapid_ratio,nodes\n");
    for r in &rows {
        let join = |v: &[f64]| v.iter().map(|a| format!("{a:e}")).collect::<Vec<_>>().join(" ");
        writeln!(
            csv,
            "{},{},{:e},{:e},{:e},{:?},{:e},{:e},{},{}",
            join(&r.y),
            join(&r.xi),
            r.value.re,
            r.value.im,
            r.abs,
            r.region,
            r.size_bound,
            r.size_ratio,
            r.rapid_ratio.map_or(String::new(), |v| format!("{v:e}")),
            r.nodes
        )
        .expect("string write");
    }
    run.write("kernel.csv", csv)?;
    let finite = rows.iter().all(|r| r.size_ratio.is_finite());
    let max_ratio = rows.iter().map(|r| r.size_ratio).fold(0.0, f64::max);
    run.check(Check::new("size-ratio-finite", finite, format!("max ratio {max_ratio:.3e} over {} samples", rows.len())));
    let far = rows.last().map_or(true, |r| r.value == Complex64::new(0.0, 0.0));
    run.check(Check::new("support-short-circuit", far, "sample outside B1 gives exact zero"));
    Ok(())
}

fn parse_field(s: &str, n: usize) -> Result<TangentField> {
    let bad = || Error::InvalidInput(format!("unknown field `{s}`; use x1..x{n} or a-b"));
    let f = if let Some(k) = s.strip_prefix('x') {
        TangentField::Projected(k.parse::<usize>().map_err(|_| bad())?.checked_sub(1).ok_or_else(bad)?)
    } else if let Some((a, b)) = s.split_once('-') {
        let a = a.parse::<usize>().map_err(|_| bad())?.checked_sub(1).ok_or_else(bad)?;
        let b = b.parse::<usize>().map_err(|_| bad())?.checked_sub(1).ok_or_else(bad)?;
        TangentField::Rotational(a, b)
    } else {
        return Err(bad());
    };
    f.validate(n)?;
    Ok(f)
}

/// Chart axis with the largest `|∂_k ρ(0)|`, the last on ties.
fn chart_axis_at_origin(inst: &ProblemInstance) -> usize {
    let g = inst.rho.gradient(&vec![0.0; inst.dim()]);
    let mut best = inst.dim() - 1;
    for k in (0..inst.dim()).rev() {
        if g[k].abs() > g[best].abs() {
            best = k;
        }
    }
    best
}

pub fn cmd_ibp(ctx: &Context, run: &mut Run) -> Result<()> {
    let c = &ctx.config.ibp;
    let inst = ctx.instance()?;
    let lambda = ctx.first_lambda(c.lambda);
    inst.check_lambda(lambda)?;
    let field = parse_field(&c.field, inst.dim())?;
    let kind = if c.adjoint == "divergence" { AdjointKind::Divergence } else { AdjointKind::Surface };
    let phase = PhaseField::new(inst.phi.clone(), lambda, vec![0.0; inst.dim()]);
    let hw = c.psi_half_width;
    let psi = TensorBump::centered(inst.dim(), hw);
    let j0 = chart_axis_at_origin(&inst);
    let m = inst.dim() - 1;
    let mut csv = String::from("n,resolution,rel_error_coarse,rel_error_fine,order,lhs_re,lhs_im\n");
    for (&n, &res) in c.orders.iter().zip(&c.resolutions) {
        let quad = SurfaceQuad::midpoint(j0, vec![-hw; m], vec![hw; m], vec![res; m]);
        let r = ibp_convergence(&inst, &phase, &psi, field, Complex64::new(c.k_tilde, 0.0), n, &quad, kind)?;
        writeln!(csv, "{n},{res},{:e},{:e},{},{:e},{:e}", r.coarse.rel_error, r.fine.rel_error, r.order, r.coarse.lhs.re, r.coarse.lhs.im).expect("string write");
        run.check(Check::new(
            format!("ibp-n{n}"),
            r.coarse.rel_error <= c.tolerance && r.order >= c.min_order,
            format!("error {:.3e} at {res}, {:.3e} refined, order {:.2}", r.coarse.rel_error, r.fine.rel_error, r.order),
        ));
    }
    run.write("ibp.csv", csv)
}

fn write_decay(run: &mut Run, stem: &str, r: &DecayReport) -> Result<()> {
    run.write(&format!("{stem}.csv"), r.to_csv())?;
    run.write(&format!("{stem}.dat"), r.to_dat())?;
    run.write_json(&format!("{stem}.json"), &r.summary_json())
}

pub fn cmd_decay(ctx: &Context, run: &mut Run) -> Result<()> {
    let c = &ctx.config.decay;
    let inst = ctx.instance()?;
    let lambdas = ctx.lambdas.clone().unwrap_or_else(|| c.lambdas.clone());
    crate::decay::check_lambda_list(&inst, &lambdas)?;
    let policy = QuadPolicy { points_per_wavelength: c.points_per_wavelength, min_points: c.min_points, ..Default::default() };
    let d = inst.d as f64;
    if c.family == "extremizer" {
        let spec = FamilySpec::Extremizer { c_prime: c.c_prime, c: c.c, normalized: c.normalized };
        let r = decay_fit(&inst, &spec, &lambdas, &policy)?;
        write_decay(run, "decay", &r)?;
        if c.normalized {
            let floor = -(d - 1.0) / 2.0 - c.slope_tolerance;
            run.check(Check::new("normalized-slope", r.slope >= floor, format!("slope {:.4}, floor {floor}", r.slope)));
        } else {
            let target = -(2.0 * d - 1.0) / 2.0;
            run.check(Check::new(
                "sharpness-slope",
                (r.slope - target).abs() <= c.slope_tolerance,
                format!("slope {:.4}, target {target} ± {}", r.slope, c.slope_tolerance),
            ));
        }
        run.check(Check::new("upper-bound", !r.violation, format!("max upper ratio {:.3e}", r.upper_ratio_max)));
    } else {
        let mut rng = ctx.rng();
        let mut violations = 0;
        let mut summary = Vec::new();
        for k in 0..c.families {
            let spec = BumpFamilySpec::random(&inst, &mut rng)?;
            let r = decay_fit(&inst, &FamilySpec::RandomBump { spec, normalized: c.normalized }, &lambdas, &policy)?;
            violations += r.violation as usize;
            write_decay(run, &format!("decay_{k:02}"), &r)?;
            summary.push(r.summary_json());
        }
        run.write_json("decay_summary.json", &summary)?;
        run.check(Check::new("upper-bound", violations == 0, format!("{} families, {violations} monotone blow-ups", c.families)));
    }
    Ok(())
}

pub fn cmd_selftest(ctx: &Context, run: &mut Run) -> Result<()> {
    let s = &ctx.config.selftest;
    let opts = SelftestOptions { seed: ctx.seed, quick: s.quick, flip_sign: s.inject.as_deref() == Some("flip-sign") };
    let checks = battery(&opts);
    run.write_json("selftest.json", &checks)?;
    for c in checks {
        run.check(c);
    }
    Ok(())
}

/// Parses arguments, configures the thread pool and runs.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let ctx = match Context::from_cli(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("osclab: {e}");
            return EXIT_USAGE;
        }
    };
    if ctx.serial {
        // fails only if a pool already exists, which keeps its setting
        let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    }
    execute(&ctx).1
}
