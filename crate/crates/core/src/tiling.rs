//! The λ-dependent interval cover of frequency space: cells of length
//! `n0 = ⌊√|λ|⌋` on `[-n0², n0²]` and cells between consecutive squares
//! farther out.

use std::cmp::Ordering;
use std::fmt::Write as _;

use num_bigint::BigInt;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    Central,
    PositiveQuadratic,
    NegativeQuadratic,
}

impl CellKind {
    pub fn label(&self) -> &'static str {
        match self {
            CellKind::Central => "central",
            CellKind::PositiveQuadratic => "positive-quadratic",
            CellKind::NegativeQuadratic => "negative-quadratic",
        }
    }
}

/// A closed cell `[lo, hi]` with integer endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IntervalQ {
    pub lo: i64,
    pub hi: i64,
    pub kind: CellKind,
}

impl IntervalQ {
    pub fn length(&self) -> i64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi) as f64
    }

    pub fn contains_interior(&self, xi: f64) -> bool {
        (self.lo as f64) < xi && xi < (self.hi as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Cell { index: usize, cell: IntervalQ },
    /// A shared endpoint, where the packet is defined to be zero.
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tiling {
    pub lambda: f64,
    pub n0: i64,
    pub xi_max: f64,
    /// Sorted by `lo`.
    pub cells: Vec<IntervalQ>,
}

/// Largest `n` with `n² <= t` for `t >= 0` (exact for `n² < 2^53`).
pub fn isqrt_floor(t: f64) -> i64 {
    let mut n = t.sqrt().floor() as i64;
    while ((n + 1) * (n + 1)) as f64 <= t {
        n += 1;
    }
    while n > 0 && (n * n) as f64 > t {
        n -= 1;
    }
    n
}

pub fn n0_for(lambda: f64) -> Result<i64> {
    if !(lambda.abs() >= 1.0) || !lambda.is_finite() {
        return Err(Error::ConstraintViolation(format!("tiling needs |lambda| >= 1, got {lambda}")));
    }
    Ok(isqrt_floor(lambda.abs()))
}

pub fn build_tiling(lambda: f64, xi_max: f64) -> Result<Tiling> {
    let n0 = n0_for(lambda)?;
    if !(xi_max >= lambda.abs()) || !xi_max.is_finite() {
        return Err(Error::InvalidInput(format!("xi_max = {xi_max} must be at least |lambda| = {}", lambda.abs())));
    }
    let mut positive = Vec::new();
    let mut n = n0;
    while ((n * n) as f64) < xi_max {
        positive.push(IntervalQ { lo: n * n, hi: (n + 1) * (n + 1), kind: CellKind::PositiveQuadratic });
        n += 1;
    }
    let mut cells: Vec<IntervalQ> = positive
        .iter()
        .rev()
        .map(|c| IntervalQ { lo: -c.hi, hi: -c.lo, kind: CellKind::NegativeQuadratic })
        .collect();
    for k in -n0..n0 {
        cells.push(IntervalQ { lo: k * n0, hi: (k + 1) * n0, kind: CellKind::Central });
    }
    cells.extend(positive);
    Ok(Tiling { lambda, n0, xi_max, cells })
}

/// The cell of `𝒬_λ` whose interior holds `xi`, found arithmetically.
pub fn cell_for(lambda: f64, xi: f64) -> Result<Location> {
    let n0 = n0_for(lambda)?;
    let a = xi.abs();
    if a < (n0 * n0) as f64 {
        let k = (xi / n0 as f64).floor() as i64;
        if xi == (k * n0) as f64 {
            return Ok(Location::Boundary);
        }
        let cell = IntervalQ { lo: k * n0, hi: (k + 1) * n0, kind: CellKind::Central };
        return Ok(Location::Cell { index: usize::MAX, cell });
    }
    let n = isqrt_floor(a);
    if a == (n * n) as f64 {
        return Ok(Location::Boundary);
    }
    let cell = if xi > 0.0 {
        IntervalQ { lo: n * n, hi: (n + 1) * (n + 1), kind: CellKind::PositiveQuadratic }
    } else {
        IntervalQ { lo: -(n + 1) * (n + 1), hi: -n * n, kind: CellKind::NegativeQuadratic }
    };
    Ok(Location::Cell { index: usize::MAX, cell })
}

impl Tiling {
    pub fn locate(&self, xi: f64) -> Result<Location> {
        if !(xi.abs() <= self.xi_max) {
            return Err(Error::OutOfCap { xi, xi_max: self.xi_max });
        }
        // first cell with hi > xi
        let idx = self.cells.partition_point(|c| (c.hi as f64) <= xi);
        let cell = self.cells[idx.min(self.cells.len() - 1)];
        if xi == cell.lo as f64 || xi == cell.hi as f64 {
            return Ok(Location::Boundary);
        }
        Ok(Location::Cell { index: idx, cell })
    }

    /// Cell with `lo <= nu < hi`, used to assign discrete frequency bins.
    pub fn bin_cell(&self, nu: f64) -> Option<usize> {
        let idx = self.cells.partition_point(|c| (c.hi as f64) <= nu);
        (idx < self.cells.len() && (self.cells[idx].lo as f64) <= nu).then_some(idx)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lo,hi,kind,center\n");
        for c in &self.cells {
            writeln!(out, "{},{},{},{}", c.lo, c.hi, c.kind.label(), c.center()).expect("string write");
        }
        out
    }
}

/// Exact comparison of a finite `x` with `num / den`, `den > 0`.
pub fn cmp_f64_ratio(x: f64, num: &BigInt, den: &BigInt) -> Ordering {
    if x == 0.0 {
        return BigInt::from(0).cmp(num);
    }
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exp_bits == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp_bits - 1075) };
    let mut lhs = BigInt::from(mant) * den;
    if negative {
        lhs = -lhs;
    }
    if exp >= 0 {
        (lhs << exp as usize).cmp(num)
    } else {
        lhs.cmp(&(num.clone() << (-exp) as usize))
    }
}

/// `(1/9)|Q|² <= max{|λ|, |ξ|} <= 4|Q|²` decided in exact arithmetic.
pub fn boxsize_holds(lambda: f64, cell: &IntervalQ, xi: f64) -> bool {
    let m = lambda.abs().max(xi.abs());
    let l = BigInt::from(cell.length());
    let l2 = &l * &l;
    let lower = cmp_f64_ratio(m, &l2, &BigInt::from(9)) != Ordering::Less;
    let upper = cmp_f64_ratio(m, &(l2 * 4), &BigInt::from(1)) != Ordering::Greater;
    lower && upper
}

/// The boxsize inequality for every `ξ` in the closed cell: the extremes of
/// `max{|λ|, |ξ|}` over the cell are attained at endpoints or at `|ξ| = 0`.
pub fn boxsize_holds_on_cell(lambda: f64, cell: &IntervalQ) -> bool {
    let lo = cell.lo as f64;
    let hi = cell.hi as f64;
    let nearest = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
    let farthest = lo.abs().max(hi.abs());
    boxsize_holds(lambda, cell, nearest) && boxsize_holds(lambda, cell, farthest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(t: &Tiling) -> Vec<(i64, i64)> {
        t.cells.iter().map(|c| (c.lo, c.hi)).collect()
    }

    #[test]
    fn lambda_one() {
        let t = build_tiling(1.0, 9.0).unwrap();
        assert_eq!(t.n0, 1);
        assert_eq!(spans(&t), vec![(-9, -4), (-4, -1), (-1, 0), (0, 1), (1, 4), (4, 9)]);
    }

    #[test]
    fn lambda_ten() {
        let t = build_tiling(10.0, 25.0).unwrap();
        assert_eq!(t.n0, 3);
        let expect = vec![(-25, -16), (-16, -9), (-9, -6), (-6, -3), (-3, 0), (0, 3), (3, 6), (6, 9), (9, 16), (16, 25)];
        assert_eq!(spans(&t), expect);
        let q = t.cells[8];
        assert_eq!(q.length(), 7);
        assert!(boxsize_holds_on_cell(10.0, &q));
    }

    #[test]
    fn locate_examples() {
        let t = build_tiling(10.0, 25.0).unwrap();
        match t.locate(12.0).unwrap() {
            Location::Cell { cell, .. } => assert_eq!((cell.lo, cell.hi), (9, 16)),
            other => panic!("{other:?}"),
        }
        assert_eq!(t.locate(9.0).unwrap(), Location::Boundary);
        match t.locate(-2.0).unwrap() {
            Location::Cell { cell, .. } => assert_eq!((cell.lo, cell.hi), (-3, 0)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(t.locate(26.0), Err(Error::OutOfCap { .. })));
    }

    #[test]
    fn arithmetic_locate_agrees_with_list() {
        let t = build_tiling(37.5, 400.0).unwrap();
        for k in -3999..4000 {
            let xi = k as f64 * 0.1 + 0.013;
            let a = t.locate(xi).unwrap();
            let b = cell_for(37.5, xi).unwrap();
            match (a, b) {
                (Location::Cell { cell: x, .. }, Location::Cell { cell: y, .. }) => assert_eq!(x, y),
                (Location::Boundary, Location::Boundary) => {}
                other => panic!("{xi}: {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(build_tiling(0.5, 10.0), Err(Error::ConstraintViolation(_))));
        assert!(matches!(build_tiling(10.0, 5.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn half_open_bins() {
        let t = build_tiling(10.0, 25.0).unwrap();
        assert_eq!(t.cells[t.bin_cell(9.0).unwrap()].lo, 9);
        assert_eq!(t.cells[t.bin_cell(-25.0).unwrap()].lo, -25);
        assert_eq!(t.bin_cell(25.0), None);
    }

    #[test]
    fn exact_comparison() {
        let nine = BigInt::from(9);
        assert_eq!(cmp_f64_ratio(0.1, &BigInt::from(1), &BigInt::from(10)), Ordering::Greater);
        assert_eq!(cmp_f64_ratio(1.0, &BigInt::from(9), &nine), Ordering::Equal);
        assert_eq!(cmp_f64_ratio(-0.5, &BigInt::from(-1), &BigInt::from(2)), Ordering::Equal);
        assert_eq!(cmp_f64_ratio(1e-300, &BigInt::from(0), &nine), Ordering::Greater);
    }
}
