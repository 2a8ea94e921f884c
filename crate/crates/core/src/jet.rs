//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A jet of order `p` at a point stores `∂^α f / α!` for `|α| <= p`. Products
//! and univariate compositions are exact up to the truncation order, so nested
//! first-order operators can be applied without finite-difference noise:
//! every derivative lowers the number of trustworthy orders by one, which the
//! jet tracks in `valid`.

use std::collections::HashMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use num_traits::Zero;

/// Scalars a jet can carry.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + From<f64>
{
}

impl Scalar for f64 {}
impl Scalar for Complex64 {}

/// Monomial bookkeeping shared by all jets with the same `(nvars, order)`.
#[derive(Debug)]
pub struct JetSpace {
    pub nvars: usize,
    pub order: usize,
    monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    mul_table: Vec<(u32, u32, u32)>,
    // per variable: (source monomial, target monomial, factor) for ∂/∂x_v
    deriv_table: Vec<Vec<(u32, u32, f64)>>,
}

impl JetSpace {
    fn build(nvars: usize, order: usize) -> Self {
        let mut monomials = Vec::new();
        for total in 0..=order {
            let mut cur = vec![0u8; nvars];
            enumerate_total(nvars, total, 0, &mut cur, &mut monomials);
        }
        let index: HashMap<Vec<u8>, usize> =
            monomials.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let tot = |m: &[u8]| m.iter().map(|&e| e as usize).sum::<usize>();
        let mut mul_table = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if tot(a) + tot(b) > order {
                    continue;
                }
                let c: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul_table.push((i as u32, j as u32, index[&c] as u32));
            }
        }
        let mut deriv_table = vec![Vec::new(); nvars];
        for (v, table) in deriv_table.iter_mut().enumerate() {
            for (i, m) in monomials.iter().enumerate() {
                if m[v] == 0 {
                    continue;
                }
                let mut t = m.clone();
                t[v] -= 1;
                table.push((i as u32, index[&t] as u32, m[v] as f64));
            }
        }
        Self { nvars, order, monomials, index, mul_table, deriv_table }
    }

    /// Shared space for `(nvars, order)`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monomials
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }
}

fn enumerate_total(n: usize, remaining: usize, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos == n - 1 {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e as u8;
        enumerate_total(n, remaining - e, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

#[derive(Debug, Clone)]
pub struct Jet<T: Scalar> {
    space: Arc<JetSpace>,
    coeffs: Vec<T>,
    valid: usize,
}

pub type RealJet = Jet<f64>;
pub type ComplexJet = Jet<Complex64>;

impl<T: Scalar> Jet<T> {
    pub fn zero(space: &Arc<JetSpace>) -> Self {
        Self { space: space.clone(), coeffs: vec![T::zero(); space.len()], valid: space.order }
    }

    pub fn constant(space: &Arc<JetSpace>, c: T) -> Self {
        let mut j = Self::zero(space);
        j.coeffs[0] = c;
        j
    }

    /// Jet from Taylor coefficients listed in the space's monomial order.
    pub fn from_coeffs(space: &Arc<JetSpace>, coeffs: Vec<T>, valid: usize) -> Self {
        assert_eq!(coeffs.len(), space.len());
        Self { space: space.clone(), coeffs, valid: valid.min(space.order) }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Number of orders that are still exact.
    pub fn valid_order(&self) -> usize {
        self.valid
    }

    /// `∂/∂x_var`, losing one order of validity.
    pub fn deriv(&self, var: usize) -> Self {
        assert!(self.valid >= 1, "jet has no valid derivative left");
        let mut out = vec![T::zero(); self.coeffs.len()];
        for &(src, dst, f) in &self.space.deriv_table[var] {
            out[dst as usize] += self.coeffs[src as usize] * f;
        }
        Self { space: self.space.clone(), coeffs: out, valid: self.valid - 1 }
    }

    /// Restriction to a space of lower order. Monomials are graded by total
    /// degree, so the smaller space is a prefix of the larger one.
    pub fn truncate(&self, space: &Arc<JetSpace>) -> Self {
        assert!(space.nvars == self.space.nvars && space.order <= self.space.order, "truncation must lower the order");
        Self { space: space.clone(), coeffs: self.coeffs[..space.len()].to_vec(), valid: self.valid.min(space.order) }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
            valid: self.valid,
        }
    }

    pub fn scale_by(&self, s: T) -> Self {
        Self {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
            valid: self.valid,
        }
    }

    pub fn add_const(&self, c: T) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// `Σ_k a_k h^k` where `h = self - self(0)` and `a_k` are given.
    pub fn compose(&self, taylor: &[T]) -> Self {
        let mut h = self.clone();
        h.coeffs[0] = T::zero();
        let mut out = Jet::constant(&self.space, taylor[0]);
        out.valid = self.valid;
        let mut power = Jet::constant(&self.space, T::from(1.0));
        for a in taylor.iter().take(self.space.order + 1).skip(1) {
            power = &power * &h;
            out = &out + &power.scale_by(*a);
        }
        out.valid = self.valid;
        out
    }
}

impl RealJet {
    /// Jet of the coordinate function `x_var` around `x0`.
    pub fn variable(space: &Arc<JetSpace>, x0: f64, var: usize) -> Self {
        let mut j = Self::constant(space, x0);
        if space.order >= 1 {
            let mut e = vec![0u8; space.nvars];
            e[var] = 1;
            j.coeffs[space.index[&e]] = 1.0;
        }
        j
    }

    pub fn to_complex(&self) -> ComplexJet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
            valid: self.valid,
        }
    }

    pub fn recip(&self) -> Self {
        let a = self.value();
        let p = self.space.order;
        let mut t = Vec::with_capacity(p + 1);
        let mut term = 1.0 / a;
        for _ in 0..=p {
            t.push(term);
            term *= -1.0 / a;
        }
        self.compose(&t)
    }

    pub fn sqrt(&self) -> Self {
        let a = self.value();
        let p = self.space.order;
        // binomial series of (a + h)^(1/2)
        let mut t = Vec::with_capacity(p + 1);
        let mut coef = a.sqrt();
        for k in 0..=p {
            t.push(coef);
            coef *= (0.5 - k as f64) / ((k + 1) as f64) / a;
        }
        self.compose(&t)
    }

    pub fn ln(&self) -> Self {
        let a = self.value();
        let p = self.space.order;
        let mut t = vec![a.ln()];
        for k in 1..=p {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            t.push(sign / (k as f64 * a.powi(k as i32)));
        }
        self.compose(&t)
    }
}

impl<'a, T: Scalar> Add for &'a Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Jet<T> {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(&a, &b)| a + b).collect(),
            valid: self.valid.min(rhs.valid),
        }
    }
}

impl<'a, T: Scalar> Sub for &'a Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Jet<T> {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(&a, &b)| a - b).collect(),
            valid: self.valid.min(rhs.valid),
        }
    }
}

impl<'a, T: Scalar> Mul for &'a Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Jet<T> {
        let mut out = vec![T::zero(); self.coeffs.len()];
        for &(i, j, k) in &self.space.mul_table {
            out[k as usize] += self.coeffs[i as usize] * rhs.coeffs[j as usize];
        }
        Jet { space: self.space.clone(), coeffs: out, valid: self.valid.min(rhs.valid) }
    }
}

impl<'a, T: Scalar> Neg for &'a Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.scale(-1.0)
    }
}

/// Complex jet times real jet.
pub fn mul_real(a: &ComplexJet, b: &RealJet) -> ComplexJet {
    let mut out = vec![Complex64::zero(); a.coeffs.len()];
    for &(i, j, k) in &a.space.mul_table {
        out[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
    }
    Jet { space: a.space.clone(), coeffs: out, valid: a.valid.min(b.valid) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_is_a_prefix() {
        let big = JetSpace::get(3, 4);
        let small = JetSpace::get(3, 2);
        assert_eq!(&big.monomials()[..small.len()], small.monomials());
    }

    #[test]
    fn space_sizes() {
        assert_eq!(JetSpace::get(4, 3).len(), 35);
        assert_eq!(JetSpace::get(2, 2).len(), 6);
        assert_eq!(JetSpace::get(1, 5).len(), 6);
    }

    #[test]
    fn product_and_derivative_of_polynomial() {
        let s = JetSpace::get(2, 3);
        let x = RealJet::variable(&s, 0.5, 0);
        let y = RealJet::variable(&s, -0.25, 1);
        // f = x^2 y
        let f = &(&x * &x) * &y;
        assert!((f.value() - 0.25 * -0.25).abs() < 1e-15);
        let fx = f.deriv(0);
        assert!((fx.value() - 2.0 * 0.5 * -0.25).abs() < 1e-15);
        let fxy = fx.deriv(1);
        assert!((fxy.value() - 1.0).abs() < 1e-15);
        assert_eq!(fxy.valid_order(), 1);
    }

    #[test]
    fn elementary_functions() {
        let s = JetSpace::get(1, 4);
        let x = RealJet::variable(&s, 2.0, 0);
        let r = x.recip();
        // d/dx 1/x = -1/x^2, second derivative 2/x^3
        assert!((r.deriv(0).value() + 0.25).abs() < 1e-14);
        assert!((r.deriv(0).deriv(0).value() - 0.25).abs() < 1e-14);
        let q = x.sqrt();
        assert!((q.deriv(0).value() - 0.5 / 2f64.sqrt()).abs() < 1e-14);
        let l = x.ln();
        assert!((l.deriv(0).deriv(0).deriv(0).value() - 2.0 / 8.0).abs() < 1e-14);
    }
}
