//! Smooth scalar fields on boxes in R^n with a partial-derivative oracle.

use std::fmt;
use std::sync::Arc;

use crate::bump::Bump1D;
use crate::error::{Error, Result};
use crate::jet::{JetSpace, RealJet};

/// A scalar field with derivatives up to `max_order`.
///
/// Multi-indices are exponent tuples: `alpha[k]` is the number of
/// derivatives taken in coordinate `k`.
pub trait SmoothField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn max_order(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn deriv(&self, alpha: &[u8], x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut alpha = vec![0u8; n];
        (0..n)
            .map(|k| {
                alpha[k] = 1;
                let v = self.deriv(&alpha, x);
                alpha[k] = 0;
                v
            })
            .collect()
    }

    fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut h = vec![vec![0.0; n]; n];
        let mut alpha = vec![0u8; n];
        for i in 0..n {
            for j in i..n {
                alpha[i] += 1;
                alpha[j] += 1;
                let v = self.deriv(&alpha, x);
                alpha[i] = 0;
                alpha[j] = 0;
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        h
    }

    /// Taylor jet of order `order` at `x`.
    fn jet(&self, x: &[f64], order: usize) -> RealJet {
        let space = JetSpace::get(self.dim(), order);
        let coeffs = space
            .monomials()
            .iter()
            .map(|m| self.deriv(m, x) / multi_factorial(m))
            .collect();
        RealJet::from_coeffs(&space, coeffs, order)
    }

    /// `true` when `∂^alpha` is known to vanish identically.
    fn deriv_vanishes(&self, _alpha: &[u8]) -> bool {
        false
    }

    /// For product fields `Π_k f_k(x_k)`, the one-dimensional factors.
    fn tensor_factors(&self) -> Option<Vec<Bump1D>> {
        None
    }
}

pub type FieldRef = Arc<dyn SmoothField>;

pub fn multi_factorial(alpha: &[u8]) -> f64 {
    alpha.iter().map(|&a| (1..=a as u32).map(f64::from).product::<f64>()).product()
}

/// Multivariate polynomial with exact derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<(Vec<u8>, f64)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(Vec<u8>, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("polynomial dimension must be positive".into()));
        }
        let mut merged: Vec<(Vec<u8>, f64)> = Vec::new();
        for (e, c) in terms {
            if e.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "exponent tuple {e:?} has length {} but dimension is {dim}",
                    e.len()
                )));
            }
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite coefficient for {e:?}")));
            }
            match merged.iter_mut().find(|(m, _)| *m == e) {
                Some(slot) => slot.1 += c,
                None => merged.push((e, c)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self { dim, terms: merged })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    /// Linear form `Σ c_k x_k`.
    pub fn linear(coeffs: &[f64]) -> Self {
        let n = coeffs.len();
        let terms = coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let mut e = vec![0u8; n];
                e[k] = 1;
                (e, c)
            })
            .collect();
        Self::new(n, terms).expect("linear form is well formed")
    }

    pub fn terms(&self) -> &[(Vec<u8>, f64)] {
        &self.terms
    }

    pub fn degree_in(&self, axis: usize) -> u8 {
        self.terms.iter().map(|(e, _)| e[axis]).max().unwrap_or(0)
    }

    /// Parses the text format: one term per line, `e1 e2 ... en : coeff`.
    /// Blank lines and text after `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            let (lhs, rhs) = line
                .split_once(':')
                .ok_or_else(|| parse_err("expected `exponents : coefficient`".into()))?;
            let exps: Vec<u8> = lhs
                .split_whitespace()
                .map(|t| t.parse::<u8>().map_err(|_| parse_err(format!("bad exponent `{t}`"))))
                .collect::<Result<_>>()?;
            if exps.is_empty() {
                return Err(parse_err("no exponents given".into()));
            }
            let coeff: f64 = rhs
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad coefficient `{}`", rhs.trim())))?;
            if !coeff.is_finite() {
                return Err(parse_err("coefficient is not finite".into()));
            }
            match dim {
                None => dim = Some(exps.len()),
                Some(n) if n != exps.len() => {
                    return Err(parse_err(format!("expected {n} exponents, found {}", exps.len())))
                }
                _ => {}
            }
            terms.push((exps, coeff));
        }
        let dim = dim.ok_or(Error::Parse { line: 0, message: "polynomial has no terms".into() })?;
        Self::new(dim, terms)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (e, c) in &self.terms {
            let exps: Vec<String> = e.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{} : {c:e}\n", exps.join(" ")));
        }
        out
    }

    /// The derivative `∂^alpha p` as a polynomial.
    pub fn derivative(&self, alpha: &[u8]) -> Polynomial {
        let mut terms = Vec::new();
        for (e, c) in &self.terms {
            if e.iter().zip(alpha).any(|(a, b)| a < b) {
                continue;
            }
            let mut coef = *c;
            let mut ne = e.clone();
            for k in 0..self.dim {
                for j in 0..alpha[k] {
                    coef *= (e[k] - j) as f64;
                }
                ne[k] -= alpha[k];
            }
            terms.push((ne, coef));
        }
        Polynomial::new(self.dim, terms).expect("derivative keeps dimension")
    }
}

fn falling(e: u8, a: u8) -> f64 {
    (0..a).map(|j| (e - j) as f64).product()
}

fn factorial(a: u8) -> f64 {
    (1..=a).map(|j| j as f64).product()
}

impl SmoothField for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&p, &v)| v.powi(p as i32)).product::<f64>())
            .sum()
    }

    fn deriv(&self, alpha: &[u8], x: &[f64]) -> f64 {
        let mut acc = 0.0;
        'terms: for (e, c) in &self.terms {
            let mut t = *c;
            for k in 0..self.dim {
                if e[k] < alpha[k] {
                    continue 'terms;
                }
                t *= falling(e[k], alpha[k]) * x[k].powi((e[k] - alpha[k]) as i32);
            }
            acc += t;
        }
        acc
    }

    fn jet(&self, x: &[f64], order: usize) -> RealJet {
        let space = JetSpace::get(self.dim, order);
        let mut coeffs = vec![0.0; space.len()];
        // Taylor coefficient of h^m in c Π (x_k + h_k)^{e_k} is c Π C(e_k, m_k) x_k^{e_k - m_k}
        for (e, c) in &self.terms {
            'mono: for (slot, m) in coeffs.iter_mut().zip(space.monomials()) {
                let mut t = *c;
                for k in 0..self.dim {
                    if m[k] > e[k] {
                        continue 'mono;
                    }
                    t *= falling(e[k], m[k]) / factorial(m[k]) * x[k].powi((e[k] - m[k]) as i32);
                }
                *slot += t;
            }
        }
        RealJet::from_coeffs(&space, coeffs, order)
    }

    fn deriv_vanishes(&self, alpha: &[u8]) -> bool {
        !self.terms.iter().any(|(e, _)| e.iter().zip(alpha).all(|(a, b)| a >= b))
    }
}

/// Product of one-dimensional bumps `Π_k B_k(x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBump {
    pub factors: Vec<Bump1D>,
    pub scale: f64,
}

impl TensorBump {
    pub fn new(factors: Vec<Bump1D>) -> Self {
        Self { factors, scale: 1.0 }
    }

    /// Same bump `B(x/half_width)` in every coordinate.
    pub fn centered(dim: usize, half_width: f64) -> Self {
        Self::new(vec![Bump1D::new(0.0, half_width); dim])
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.scale = s;
        self
    }
}

impl SmoothField for TensorBump {
    fn dim(&self) -> usize {
        self.factors.len()
    }

    fn max_order(&self) -> usize {
        crate::bump::MAX_BUMP_ORDER
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut p = self.scale;
        for (b, &v) in self.factors.iter().zip(x) {
            p *= b.eval(v);
            if p == 0.0 {
                break;
            }
        }
        p
    }

    fn deriv(&self, alpha: &[u8], x: &[f64]) -> f64 {
        let mut p = self.scale;
        for ((b, &a), &v) in self.factors.iter().zip(alpha).zip(x) {
            p *= b.deriv(a as usize, v);
            if p == 0.0 {
                break;
            }
        }
        p
    }

    fn jet(&self, x: &[f64], order: usize) -> RealJet {
        let space = JetSpace::get(self.dim(), order);
        let tables: Vec<Vec<f64>> =
            self.factors.iter().zip(x).map(|(b, &v)| b.taylor(v, order)).collect();
        let coeffs = space
            .monomials()
            .iter()
            .map(|m| {
                self.scale * m.iter().enumerate().map(|(k, &e)| tables[k][e as usize]).product::<f64>()
            })
            .collect();
        RealJet::from_coeffs(&space, coeffs, order)
    }

    fn tensor_factors(&self) -> Option<Vec<Bump1D>> {
        if self.scale == 1.0 {
            Some(self.factors.clone())
        } else {
            None
        }
    }
}

/// User-supplied closure with central finite-difference derivatives.
///
/// A derivative of total order `k` uses step `h_k = ε^(1/(k+2))`.
#[derive(Clone)]
pub struct NumericField {
    dim: usize,
    max_order: usize,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for NumericField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NumericField").field("dim", &self.dim).field("max_order", &self.max_order).finish()
    }
}

impl NumericField {
    pub fn new(dim: usize, max_order: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, max_order, f: Arc::new(f) }
    }

    pub fn step(order: usize) -> f64 {
        f64::EPSILON.powf(1.0 / (order as f64 + 2.0))
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

impl SmoothField for NumericField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> usize {
        self.max_order
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn deriv(&self, alpha: &[u8], x: &[f64]) -> f64 {
        let total: usize = alpha.iter().map(|&a| a as usize).sum();
        if total == 0 {
            return self.eval(x);
        }
        let h = Self::step(total);
        // Tensor product of centred differences `δ_h^m` along each active axis.
        let axes: Vec<(usize, u32)> =
            alpha.iter().enumerate().filter(|(_, &a)| a > 0).map(|(k, &a)| (k, a as u32)).collect();
        let mut counters = vec![0u32; axes.len()];
        let mut acc = 0.0;
        let mut point = x.to_vec();
        loop {
            let mut w = 1.0;
            for (slot, &(k, m)) in axes.iter().enumerate() {
                let j = counters[slot];
                w *= if j % 2 == 0 { 1.0 } else { -1.0 } * binomial(m, j);
                point[k] = x[k] + (m as f64 / 2.0 - j as f64) * h;
            }
            acc += w * (self.f)(&point);
            let mut slot = 0;
            loop {
                if slot == axes.len() {
                    return acc / h.powi(total as i32);
                }
                counters[slot] += 1;
                if counters[slot] <= axes[slot].1 {
                    break;
                }
                counters[slot] = 0;
                slot += 1;
            }
        }
    }
}

/// The phase `λΦ(x) + 2π ξ·x`.
#[derive(Debug, Clone)]
pub struct PhaseField {
    pub phi: FieldRef,
    pub lambda: f64,
    pub xi: Vec<f64>,
}

impl PhaseField {
    pub fn new(phi: FieldRef, lambda: f64, xi: Vec<f64>) -> Self {
        assert_eq!(phi.dim(), xi.len(), "frequency vector must match field dimension");
        Self { phi, lambda, xi }
    }
}

impl SmoothField for PhaseField {
    fn dim(&self) -> usize {
        self.phi.dim()
    }

    fn max_order(&self) -> usize {
        self.phi.max_order()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.xi.iter().zip(x).map(|(a, b)| a * b).sum();
        self.lambda * self.phi.eval(x) + 2.0 * std::f64::consts::PI * lin
    }

    fn deriv(&self, alpha: &[u8], x: &[f64]) -> f64 {
        let total: usize = alpha.iter().map(|&a| a as usize).sum();
        match total {
            0 => self.eval(x),
            1 => {
                let k = alpha.iter().position(|&a| a == 1).expect("order one");
                self.lambda * self.phi.deriv(alpha, x) + 2.0 * std::f64::consts::PI * self.xi[k]
            }
            _ => self.lambda * self.phi.deriv(alpha, x),
        }
    }

    fn jet(&self, x: &[f64], order: usize) -> RealJet {
        let mut j = self.phi.jet(x, order).scale(self.lambda);
        let lin: f64 = self.xi.iter().zip(x).map(|(a, b)| a * b).sum();
        j = j.add_const(2.0 * std::f64::consts::PI * lin);
        if order >= 1 {
            let space = j.space().clone();
            let mut coeffs = j.coeffs().to_vec();
            let mut e = vec![0u8; self.dim()];
            for (k, &xk) in self.xi.iter().enumerate() {
                e[k] = 1;
                coeffs[space.index_of(&e).expect("first-order monomial")] += 2.0 * std::f64::consts::PI * xk;
                e[k] = 0;
            }
            j = RealJet::from_coeffs(&space, coeffs, order);
        }
        j
    }

    fn deriv_vanishes(&self, alpha: &[u8]) -> bool {
        let total: usize = alpha.iter().map(|&a| a as usize).sum();
        total >= 2 && self.phi.deriv_vanishes(alpha)
    }
}
