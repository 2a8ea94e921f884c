//! Experiment configuration files: TOML with one section per subcommand.
//! Unknown keys are rejected and every diagnostic names a line.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{Error, Result};
use crate::field::{FieldRef, Polynomial, TensorBump};
use crate::instance::ProblemInstance;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub instance: InstanceConfig,
    pub run: RunConfig,
    pub tiling: TilingConfig,
    pub window: WindowConfig,
    pub reconstruct: ReconstructConfig,
    pub certify: CertifyConfig,
    pub kernel: KernelConfig,
    pub ibp: IbpConfig,
    pub decay: DecayConfig,
    pub selftest: SelftestConfig,
}

/// Either a built-in `name` or explicit polynomial tables in the
/// `e1 ... en : coeff` line format.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceConfig {
    pub name: Option<String>,
    pub d: Option<usize>,
    pub b0: Option<f64>,
    pub b1: Option<f64>,
    pub rho: Option<Spanned<String>>,
    pub phi: Option<Spanned<String>>,
    /// Half-width of the tensor bump amplitude; defaults to `b0`.
    pub amp_half_width: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub serial: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 1, out: None, serial: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TilingConfig {
    pub lambda: f64,
    /// Defaults to `(⌊√λ⌋ + 2)²`.
    pub xi_max: Option<f64>,
    /// Random `(λ, ξ)` pairs for the boxsize battery.
    pub samples: usize,
    pub lambda_max: f64,
}

impl Default for TilingConfig {
    fn default() -> Self {
        Self { lambda: 10.0, xi_max: None, samples: 100_000, lambda_max: 1e6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub profile: String,
    pub grid: usize,
    /// Every `stride`-th table node goes into the plot file.
    pub stride: usize,
    pub probe_samples: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { profile: "default".into(), grid: crate::window::DEFAULT_GRID, stride: 16, probe_samples: 50 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructConfig {
    pub lambdas: Vec<f64>,
    pub signals: usize,
    /// Band limit as a multiple of `|λ|`.
    pub xi_max_factor: f64,
    pub input: Option<PathBuf>,
    pub xi_max: Option<f64>,
    pub tolerance: f64,
    pub binary: bool,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self { lambdas: vec![1.0, 10.0, 100.0], signals: 50, xi_max_factor: 4.0, input: None, xi_max: None, tolerance: 1e-6, binary: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub grid_density: usize,
    pub circle_points: usize,
    pub threshold: f64,
    pub lipschitz_padding: bool,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { grid_density: 9, circle_points: 64, threshold: crate::nondegeneracy::DEGENERATE_THRESHOLD, lipschitz_padding: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub lambda: f64,
    pub samples: usize,
    pub order: usize,
    pub c_split: f64,
    /// Tiling cap as a multiple of `|λ|`.
    pub xi_max_factor: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { lambda: 100.0, samples: 20, order: 2, c_split: crate::kernel::DEFAULT_C_SPLIT, xi_max_factor: 8.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IbpConfig {
    pub lambda: f64,
    pub orders: Vec<usize>,
    /// Per-axis slice resolution for each entry of `orders`.
    pub resolutions: Vec<usize>,
    /// `x1`..`x2d` for projected fields, `a-b` for rotational ones.
    pub field: String,
    pub k_tilde: f64,
    pub psi_half_width: f64,
    pub tolerance: f64,
    pub min_order: f64,
    pub adjoint: String,
}

impl Default for IbpConfig {
    fn default() -> Self {
        Self {
            lambda: 50.0,
            orders: vec![1, 2],
            resolutions: vec![48, 80],
            field: "x1".into(),
            k_tilde: 10.0,
            psi_half_width: 0.2,
            tolerance: 1e-4,
            min_order: 2.0,
            adjoint: "surface".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    /// `extremizer` or `random-bump`.
    pub family: String,
    pub normalized: bool,
    pub c_prime: f64,
    pub c: Option<f64>,
    pub lambdas: Vec<f64>,
    /// Number of random families.
    pub families: usize,
    pub slope_tolerance: f64,
    pub points_per_wavelength: f64,
    pub min_points: usize,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            family: "extremizer".into(),
            normalized: false,
            c_prime: 0.1,
            c: None,
            lambdas: crate::decay::geometric(25.0, 800.0, 6),
            families: 20,
            slope_tolerance: 0.15,
            points_per_wavelength: 10.0,
            min_points: 24,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelftestConfig {
    /// Fault injection for mutation checks: `flip-sign` negates every
    /// bordered determinant.
    pub inject: Option<String>,
    /// Reduced sample counts; slow quadrature checks are skipped.
    pub quick: bool,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Canonical TOML echo, with defaults filled in.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self, text: &str) -> Result<()> {
        let field_err = |key: &str, message: String| {
            let line = find_key_line(text, key);
            Error::Parse { line, message: format!("{key}: {message}") }
        };
        let positive = [
            ("tolerance", self.reconstruct.tolerance),
            ("xi_max_factor", self.reconstruct.xi_max_factor),
            ("threshold", self.certify.threshold),
            ("k_tilde", self.ibp.k_tilde),
            ("psi_half_width", self.ibp.psi_half_width),
            ("slope_tolerance", self.decay.slope_tolerance),
            ("points_per_wavelength", self.decay.points_per_wavelength),
            ("c_prime", self.decay.c_prime),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(field_err(key, format!("must be positive, got {v}")));
            }
        }
        if self.ibp.tolerance <= 0.0 {
            return Err(field_err("tolerance", "must be positive".into()));
        }
        if self.ibp.orders.len() != self.ibp.resolutions.len() {
            return Err(field_err("resolutions", "needs one entry per IBP order".into()));
        }
        if !(self.kernel.c_split > 0.0 && self.kernel.c_split < 1.0) {
            return Err(field_err("c_split", format!("must lie in (0, 1), got {}", self.kernel.c_split)));
        }
        if let Some(c) = self.decay.c {
            if !(c > 0.0) {
                return Err(field_err("c", "must be positive".into()));
            }
        }
        if !matches!(self.decay.family.as_str(), "extremizer" | "random-bump") {
            return Err(field_err("family", format!("unknown family `{}`", self.decay.family)));
        }
        if !matches!(self.ibp.adjoint.as_str(), "surface" | "divergence") {
            return Err(field_err("adjoint", format!("unknown adjoint `{}`", self.ibp.adjoint)));
        }
        if let Some(inj) = &self.selftest.inject {
            if inj != "flip-sign" {
                return Err(field_err("inject", format!("unknown fault `{inj}`")));
            }
        }
        Ok(())
    }

    /// Builds the instance and checks every configured λ against it.
    pub fn instance(&self, text: &str) -> Result<ProblemInstance> {
        let ic = &self.instance;
        let inst = match (&ic.rho, &ic.phi) {
            (None, None) => ProblemInstance::builtin(ic.name.as_deref().unwrap_or("paper-even-d2"))?,
            (Some(rho), Some(phi)) => {
                let need = |v: Option<f64>, key: &str| {
                    v.ok_or_else(|| Error::Parse { line: find_key_line(text, "rho"), message: format!("explicit tables need `{key}`") })
                };
                let d = ic.d.ok_or_else(|| Error::Parse { line: find_key_line(text, "rho"), message: "explicit tables need `d`".into() })?;
                let b0 = need(ic.b0, "b0")?;
                let b1 = need(ic.b1, "b1")?;
                let rho = parse_table(text, rho)?;
                let phi = parse_table(text, phi)?;
                let amp: FieldRef = Arc::new(TensorBump::centered(2 * d, ic.amp_half_width.unwrap_or(b0)));
                let name = ic.name.clone().unwrap_or_else(|| "custom".into());
                ProblemInstance::new(name, d, b0, b1, Arc::new(rho), Arc::new(phi), amp)?
            }
            _ => {
                return Err(Error::Parse { line: find_key_line(text, "rho").max(find_key_line(text, "phi")), message: "give both `rho` and `phi` tables or neither".into() })
            }
        };
        Ok(inst)
    }
}

/// 1-based line of the first `key =` assignment, or 0.
pub fn find_key_line(text: &str, key: &str) -> usize {
    for (i, line) in text.lines().enumerate() {
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return i + 1;
            }
        }
    }
    0
}

/// Parses a polynomial table, translating its line numbers to the file.
fn parse_table(text: &str, table: &Spanned<String>) -> Result<Polynomial> {
    let start = table.span().start;
    let mut first = line_of(text, start);
    // a multiline literal drops the newline right after its opening quotes
    let head = &text[start.min(text.len())..];
    if (head.starts_with("'''") || head.starts_with("\"\"\"")) && head[3..].starts_with('\n') {
        first += 1;
    }
    Polynomial::parse(table.get_ref()).map_err(|e| match e {
        Error::Parse { line, message } if line > 0 => Error::Parse { line: first + line - 1, message },
        Error::Parse { message, .. } => Error::Parse { line: first, message },
        other => Error::Parse { line: first, message: other.to_string() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c.run.seed, 1);
        assert_eq!(c.ibp.orders, vec![1, 2]);
        assert!(c.echo().contains("[decay]"));
        assert_eq!(c.instance("").unwrap().name, "paper-even-d2");
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = "[run]\nseed = 3\n\n[kernel]\nlambda = 100\nbogus = 1\n";
        match ExperimentConfig::parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_value_reports_line() {
        let text = "[kernel]\nc_split = 1.5\n";
        match ExperimentConfig::parse(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("c_split"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn polynomial_tables() {
        let text = "[instance]\nd = 2\nb0 = 0.25\nb1 = 0.5\nrho = '''\n0 0 0 1 : 1\n'''\nphi = '''\n1 1 0 0 : 1\n1 x 0 0 : 2\n'''\n";
        let c = ExperimentConfig::parse(text).unwrap();
        match c.instance(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 10),
            other => panic!("{other:?}"),
        }
        let good = text.replace("1 x 0 0 : 2\n", "");
        let c = ExperimentConfig::parse(&good).unwrap();
        let inst = c.instance(&good).unwrap();
        assert_eq!(inst.name, "custom");
        assert_eq!(inst.phi.eval(&[0.5, 0.5, 0.0, 0.0]), 0.25);
    }
}
