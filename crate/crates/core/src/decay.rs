//! λ-sweeps of the functional and the fitted decay exponent.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::kernel::{eval_i, extremizer_family, BumpFamilySpec, FamilyKind, QuadPolicy, TestFunctionFamily};

/// How the family is rebuilt at each λ.
#[derive(Debug, Clone)]
pub enum FamilySpec {
    Extremizer { c_prime: f64, c: Option<f64>, normalized: bool },
    RandomBump { spec: BumpFamilySpec, normalized: bool },
    Fixed(TestFunctionFamily),
}

impl FamilySpec {
    pub fn extremizer() -> Self {
        FamilySpec::Extremizer { c_prime: 0.1, c: None, normalized: false }
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            FamilySpec::Extremizer { .. } => FamilyKind::Extremizer,
            FamilySpec::RandomBump { .. } => FamilyKind::RandomBump,
            FamilySpec::Fixed(f) => f.kind,
        }
    }

    pub fn normalized(&self) -> bool {
        match self {
            FamilySpec::Extremizer { normalized, .. } | FamilySpec::RandomBump { normalized, .. } => *normalized,
            FamilySpec::Fixed(_) => false,
        }
    }

    pub fn at(&self, inst: &ProblemInstance, lambda: f64) -> Result<TestFunctionFamily> {
        let (fam, normalized) = match self {
            FamilySpec::Extremizer { c_prime, c, normalized } => {
                let c = c.unwrap_or_else(|| inst.graph_lipschitz());
                (extremizer_family(inst, lambda, *c_prime, c)?.family, *normalized)
            }
            FamilySpec::RandomBump { spec, normalized } => (spec.at(lambda), *normalized),
            FamilySpec::Fixed(f) => (f.clone(), false),
        };
        if normalized {
            fam.normalized(inst.b1)
        } else {
            Ok(fam)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub lambda: f64,
    pub value: Complex64,
    pub abs: f64,
    pub nodes: usize,
    pub norm_product: f64,
    /// `|I_λ| |λ|^((d-1)/2) / Π ‖f_j‖₂`.
    pub upper_ratio: f64,
    /// `|I_λ| |λ|^((2d-1)/2)`.
    pub lower_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub instance: String,
    pub family: FamilyKind,
    pub normalized: bool,
    pub rows: Vec<DecayRow>,
    pub slope: f64,
    pub intercept: f64,
    pub upper_ratio_max: f64,
    /// Only reported for the extremizer family.
    pub lower_ratio_min: Option<f64>,
    /// Upper ratios nondecreasing along the sweep with more than tenfold growth.
    pub violation: bool,
}

/// Tenfold growth threshold for [`DecayReport::violation`].
pub const VIOLATION_GROWTH: f64 = 10.0;

/// At least four values of one sign, geometrically spaced, each admissible.
pub fn check_lambda_list(inst: &ProblemInstance, lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < 4 {
        return Err(Error::InvalidInput(format!("a decay sweep needs at least 4 lambda values, got {}", lambdas.len())));
    }
    for &l in lambdas {
        inst.check_lambda(l)?;
    }
    let ratio = lambdas[1] / lambdas[0];
    if !(ratio > 1.0) {
        return Err(Error::InvalidInput("lambda values must increase in magnitude with a common sign".into()));
    }
    for w in lambdas.windows(2) {
        let r = w[1] / w[0];
        if (r - ratio).abs() > 1e-6 * ratio {
            return Err(Error::InvalidInput(format!("lambda values are not geometrically spaced: ratio {r} vs {ratio}")));
        }
    }
    Ok(())
}

/// `n` geometric values from `lo` to `hi`.
pub fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn decay_fit(inst: &ProblemInstance, fam: &FamilySpec, lambdas: &[f64], policy: &QuadPolicy) -> Result<DecayReport> {
    check_lambda_list(inst, lambdas)?;
    let d = inst.d as f64;
    let rows = lambdas
        .par_iter()
        .map(|&lambda| {
            let f = fam.at(inst, lambda)?;
            let v = eval_i(inst, &f, lambda, policy)?;
            let norm_product: f64 = f.norms(inst.b1).iter().product();
            let abs = v.value.norm();
            let l = lambda.abs();
            Ok(DecayRow {
                lambda,
                value: v.value,
                abs,
                nodes: v.nodes,
                norm_product,
                upper_ratio: if norm_product > 0.0 { abs * l.powf((d - 1.0) / 2.0) / norm_product } else { 0.0 },
                lower_ratio: abs * l.powf((2.0 * d - 1.0) / 2.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let nonzero: Vec<&DecayRow> = rows.iter().filter(|r| r.abs > 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::InvalidInput("the functional vanishes at every lambda; the family misses M within the amplitude support".into()));
    }
    if nonzero.len() < 2 {
        return Err(Error::InvalidInput("fewer than two nonzero values; no slope can be fitted".into()));
    }
    let lx: Vec<f64> = nonzero.iter().map(|r| r.lambda.abs().ln()).collect();
    let ly: Vec<f64> = nonzero.iter().map(|r| r.abs.ln()).collect();
    let (slope, intercept) = least_squares(&lx, &ly);
    let upper: Vec<f64> = rows.iter().map(|r| r.upper_ratio).collect();
    let upper_ratio_max = upper.iter().cloned().fold(0.0, f64::max);
    let monotone = upper.windows(2).all(|w| w[1] >= w[0]);
    let violation = monotone && upper[0] > 0.0 && upper[upper.len() - 1] > VIOLATION_GROWTH * upper[0];
    let lower_ratio_min = (fam.kind() == FamilyKind::Extremizer)
        .then(|| rows.iter().map(|r| r.lower_ratio).fold(f64::INFINITY, f64::min));
    Ok(DecayReport {
        instance: inst.name.clone(),
        family: fam.kind(),
        normalized: fam.normalized(),
        rows,
        slope,
        intercept,
        upper_ratio_max,
        lower_ratio_min,
        violation,
    })
}

impl DecayReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,re_I,im_I,abs_I,n_quad_nodes\n");
        for r in &self.rows {
            writeln!(out, "{:e},{:e},{:e},{:e},{}", r.lambda, r.value.re, r.value.im, r.abs, r.nodes).expect("string write");
        }
        out
    }

    /// Two columns `lambda abs_I` for plotting on log axes.
    pub fn to_dat(&self) -> String {
        let mut out = String::from("# lambda abs_I\n");
        for r in &self.rows {
            writeln!(out, "{:e} {:e}", r.lambda, r.abs).expect("string write");
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "instance": self.instance,
            "family": self.family,
            "normalized": self.normalized,
            "slope": self.slope,
            "intercept": self.intercept,
            "upper_ratio_max": self.upper_ratio_max,
            "lower_ratio_min": self.lower_ratio_min,
            "violation": self.violation,
        })
    }
}
