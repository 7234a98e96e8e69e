//! Closed-form generalized Lelong numbers of the toric families and exact
//! property checks.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LelongError, Result};
use crate::expr::{classify_toric, PshExpr, ToricForm, ToricKind};

/// A value that is exact whenever the data are rational.
#[derive(Clone, Debug, PartialEq)]
pub enum NuValue {
    Exact(BigRational),
    Approx(f64),
}

impl NuValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            NuValue::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            NuValue::Approx(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            NuValue::Exact(q) => Some(q),
            NuValue::Approx(_) => None,
        }
    }
}

impl fmt::Display for NuValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NuValue::Exact(q) if q.is_integer() => write!(f, "{}", q.numer()),
            NuValue::Exact(q) => write!(f, "{}/{}", q.numer(), q.denom()),
            NuValue::Approx(x) => write!(f, "{x}"),
        }
    }
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact rational value of a finite float.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| LelongError::invalid(format!("{x} is not finite")))
}

/// Parses a decimal like `0.05` or `-1.25e-1` into an exact rational.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || LelongError::invalid(format!("not a decimal number: `{s}`"));
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}0").parse::<BigInt>().map_err(|_| bad())? / BigInt::from(10);
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut q = BigRational::from_integer(digits);
    if scale >= 0 {
        q *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        q /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -q } else { q })
}

fn check_t(form: &ToricForm, t: &BigRational) -> Result<()> {
    if t.is_negative() || *t >= rat(form.n as i64) {
        return Err(LelongError::invalid(format!(
            "t = {} outside [0, {})",
            NuValue::Exact(t.clone()),
            form.n
        )));
    }
    Ok(())
}

fn max_rat(a: BigRational, b: BigRational) -> BigRational {
    if a >= b {
        a
    } else {
        b
    }
}

/// `ν_{0,t}` of a toric form.
///
/// Monomials use `max(max_i α_i, Σα/(n−t))`: integrability transverse to
/// each hyperplane `z_i = 0` requires `s > α_i`, a condition the
/// `Σα/k` formula only captures when all exponents are equal.
pub fn nu_exact(form: &ToricForm, t: &BigRational) -> Result<NuValue> {
    check_t(form, t)?;
    let n = rat(form.n as i64);
    let base = match &form.kind {
        ToricKind::SumSquares { k } => max_rat(rat(1) / rat(*k as i64), BigRational::one() / (n - t)),
        ToricKind::Monomial { alpha } => {
            let sum: i64 = alpha.iter().map(|&a| a as i64).sum();
            let top = *alpha.iter().max().unwrap() as i64;
            max_rat(rat(top), rat(sum) / (n - t))
        }
        ToricKind::TwoVarCusp { a } => {
            let v = if t.is_zero() {
                2.0 / (1.0 + 1.0 / a)
            } else if t.is_one() {
                2.0 * a.min(1.0)
            } else {
                return Err(LelongError::Unsupported(format!(
                    "no closed form for the cusp at t = {}",
                    NuValue::Exact(t.clone())
                )));
            };
            return Ok(NuValue::Approx(form.scale * v));
        }
    };
    let scale = rational_from_f64(form.scale)?;
    Ok(NuValue::Exact(scale * base))
}

pub fn nu_exact_f64(form: &ToricForm, t: f64) -> Result<f64> {
    Ok(nu_exact(form, &rational_from_f64(t)?)?.to_f64())
}

/// The literal two-term formula `max(Σα/k, Σα/(n−t))` for monomials, kept
/// for comparison with [`nu_exact`]; other forms defer to `nu_exact`.
pub fn nu_exact_literal(form: &ToricForm, t: &BigRational) -> Result<NuValue> {
    match &form.kind {
        ToricKind::Monomial { alpha } => {
            check_t(form, t)?;
            let sum = rat(alpha.iter().map(|&a| a as i64).sum());
            let k = rat(alpha.len() as i64);
            let n = rat(form.n as i64);
            let v = max_rat(sum.clone() / k, sum / (n - t));
            Ok(NuValue::Exact(rational_from_f64(form.scale)? * v))
        }
        _ => nu_exact(form, t),
    }
}

/// Upper bound from the relative type: `ν0/(1 − ν0/σ)` below the pole,
/// `0` above it and `+∞` at it.
pub fn property5_bound(nu0: f64, sigma: f64) -> Result<f64> {
    if !(nu0 > 0.0 && sigma > 0.0) {
        return Err(LelongError::invalid("nu0 and sigma must be positive"));
    }
    Ok(if nu0 < sigma {
        nu0 / (1.0 - nu0 / sigma)
    } else if nu0 > sigma {
        0.0
    } else {
        f64::INFINITY
    })
}

/// Classical Lelong number of the form at the origin.
pub fn classical_lelong(form: &ToricForm) -> f64 {
    let v = match &form.kind {
        ToricKind::SumSquares { .. } => 1.0,
        ToricKind::Monomial { alpha } => alpha.iter().map(|&a| a as f64).sum(),
        ToricKind::TwoVarCusp { a } => 2.0 * a.min(1.0),
    };
    form.scale * v
}

/// `liminf φ/ψ` for `ψ = t·log|z|`.
pub fn relative_type_radial(form: &ToricForm, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(LelongError::invalid("relative type needs t > 0"));
    }
    Ok(classical_lelong(form) / t)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkodaRow {
    pub t: String,
    pub nu_00: f64,
    pub nu_0_top: f64,
    pub weighted: f64,
    pub n_nu_00: f64,
    /// Which of the three inequalities hold with equality.
    pub equalities: [bool; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkodaReport {
    pub rows: Vec<SkodaRow>,
    pub violations: Vec<String>,
    pub skipped: Vec<String>,
    /// Whether every comparison was made in exact arithmetic.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq)]
enum Num {
    Q(BigRational),
    F(f64),
}

impl Num {
    fn from(v: NuValue) -> Num {
        match v {
            NuValue::Exact(q) => Num::Q(q),
            NuValue::Approx(x) => Num::F(x),
        }
    }

    fn f(&self) -> f64 {
        match self {
            Num::Q(q) => q.to_f64().unwrap(),
            Num::F(x) => *x,
        }
    }

    fn mul(&self, q: &BigRational) -> Num {
        match self {
            Num::Q(a) => Num::Q(a * q),
            Num::F(a) => Num::F(a * q.to_f64().unwrap()),
        }
    }

    /// `self ≤ other`, with a relative rounding allowance for floats.
    fn le(&self, other: &Num) -> bool {
        match (self, other) {
            (Num::Q(a), Num::Q(b)) => a <= b,
            _ => self.f() <= other.f() + 1e-12 * (1.0 + other.f().abs()),
        }
    }

    fn same(&self, other: &Num) -> bool {
        match (self, other) {
            (Num::Q(a), Num::Q(b)) => a == b,
            _ => (self.f() - other.f()).abs() <= 1e-12 * (1.0 + other.f().abs()),
        }
    }
}

fn show(t: &BigRational) -> String {
    NuValue::Exact(t.clone()).to_string()
}

/// Checks `ν₀,₀ ≤ ν₀,ₙ₋₁ ≤ (n−t)ν₀,ₜ ≤ n·ν₀,₀` at each grid point, that
/// `(n−t)ν₀,ₜ` is nonincreasing, `ν₀,ₜ` convex and `1/ν₀,ₜ` concave.
pub fn skoda_chain_check(form: &ToricForm, t_grid: &[BigRational]) -> Result<SkodaReport> {
    let n = form.n as i64;
    let nq = rat(n);
    let nu00 = Num::from(nu_exact(form, &rat(0))?);
    let nutop = Num::from(nu_exact(form, &rat(n - 1))?);
    let mut exact = matches!(nu00, Num::Q(_)) && matches!(nutop, Num::Q(_));
    let mut violations = Vec::new();
    let mut skipped = Vec::new();
    let mut rows = Vec::new();
    let mut grid: Vec<BigRational> = t_grid.to_vec();
    grid.sort();
    grid.dedup();
    let mut points: Vec<(BigRational, Num)> = Vec::new();
    for t in &grid {
        let v = match nu_exact(form, t) {
            Ok(v) => Num::from(v),
            Err(LelongError::Unsupported(msg)) => {
                skipped.push(msg);
                continue;
            }
            Err(e) => return Err(e),
        };
        exact &= matches!(v, Num::Q(_));
        let weighted = v.mul(&(nq.clone() - t));
        let n_nu00 = nu00.mul(&nq);
        let checks = [(&nu00, &nutop), (&nutop, &weighted), (&weighted, &n_nu00)];
        let names = ["ν00 ≤ ν0,n−1", "ν0,n−1 ≤ (n−t)ν0t", "(n−t)ν0t ≤ n·ν00"];
        let mut equalities = [false; 3];
        for (i, (lhs, rhs)) in checks.iter().enumerate() {
            if !lhs.le(rhs) {
                violations.push(format!("t={}: {} fails ({} > {})", show(t), names[i], lhs.f(), rhs.f()));
            }
            equalities[i] = lhs.same(rhs);
        }
        rows.push(SkodaRow {
            t: show(t),
            nu_00: nu00.f(),
            nu_0_top: nutop.f(),
            weighted: weighted.f(),
            n_nu_00: n_nu00.f(),
            equalities,
        });
        points.push((t.clone(), v));
    }
    for w in points.windows(2) {
        let (t0, v0) = &w[0];
        let (t1, v1) = &w[1];
        let a = v0.mul(&(nq.clone() - t0));
        let b = v1.mul(&(nq.clone() - t1));
        if !b.le(&a) {
            violations.push(format!("(n−t)ν increases between t={} and t={}", show(t0), show(t1)));
        }
        if !v0.le(v1) {
            violations.push(format!("ν decreases between t={} and t={}", show(t0), show(t1)));
        }
    }
    for w in points.windows(3) {
        let (t0, v0) = &w[0];
        let (t1, v1) = &w[1];
        let (t2, v2) = &w[2];
        // t1 = λ t0 + (1−λ) t2
        let lam = (t2.clone() - t1) / (t2.clone() - t0);
        let one_minus = BigRational::one() - lam.clone();
        let chord = add(&v0.mul(&lam), &v2.mul(&one_minus));
        if !v1.le(&chord) {
            violations.push(format!("convexity fails at t={}", show(t1)));
        }
        let (r0, r1, r2) = (recip(v0), recip(v1), recip(v2));
        let chord = add(&r0.mul(&lam), &r2.mul(&one_minus));
        if !chord.le(&r1) {
            violations.push(format!("concavity of 1/ν fails at t={}", show(t1)));
        }
    }
    Ok(SkodaReport {
        rows,
        violations,
        skipped,
        exact,
    })
}

fn add(a: &Num, b: &Num) -> Num {
    match (a, b) {
        (Num::Q(x), Num::Q(y)) => Num::Q(x + y),
        _ => Num::F(a.f() + b.f()),
    }
}

fn recip(a: &Num) -> Num {
    match a {
        Num::Q(x) => Num::Q(x.recip()),
        Num::F(x) => Num::F(1.0 / x),
    }
}

/// Evenly spaced exact grid `lo, lo+step, …` with every point `< hi_excl`.
pub fn t_grid(lo: &BigRational, hi_excl: &BigRational, step: &BigRational) -> Vec<BigRational> {
    let mut out = Vec::new();
    let mut t = lo.clone();
    while t < *hi_excl {
        out.push(t.clone());
        t += step;
    }
    out
}

/// Interval `[lo, hi]` containing `ν_{0,t}(expr)`: exact for toric leaves
/// and bounded leaves, and propagated through scaling, sums
/// (`max ν ≤ ν(Σ) ≤ Σ ν`) and maxima (`min ν / n ≤ ν(max) ≤ min ν`).
pub fn nu_interval(expr: &PshExpr, n: usize, t: f64) -> (f64, f64) {
    if let Some(form) = classify_toric(expr, n) {
        if let Ok(v) = nu_exact_f64(&form, t) {
            return (v, v);
        }
    }
    match expr.expand() {
        PshExpr::LogSumPow(terms) => {
            let origin = vec![num_complex::Complex64::new(0.0, 0.0); n];
            if terms.iter().any(|t| t.poly.eval(&origin).norm() > 0.0) {
                (0.0, 0.0)
            } else {
                (0.0, f64::INFINITY)
            }
        }
        PshExpr::Scale(c, e) => {
            let (lo, hi) = nu_interval(&e, n, t);
            (c * lo, c * hi)
        }
        PshExpr::Sum(es) => es.iter().fold((0.0, 0.0), |(lo, hi), e| {
            let (l, h) = nu_interval(e, n, t);
            (f64::max(lo, l), hi + h)
        }),
        PshExpr::Max(es) => {
            let parts: Vec<(f64, f64)> = es.iter().map(|e| nu_interval(e, n, t)).collect();
            let lo = parts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = parts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            (lo / n as f64, hi)
        }
        PshExpr::Compose(..) => unreachable!("expanded"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use proptest::prelude::*;

    fn q(s: &str) -> BigRational {
        parse_decimal(s).unwrap()
    }

    fn exact(form: &ToricForm, t: &str) -> BigRational {
        nu_exact(form, &q(t)).unwrap().as_exact().unwrap().clone()
    }

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(q("0.05"), rat(1) / rat(20));
        assert_eq!(q("-1.25e-1"), rat(-1) / rat(8));
        assert_eq!(q("3"), rat(3));
        assert_eq!(q(".5"), rat(1) / rat(2));
        assert!(parse_decimal("1.2.3").is_err());
        assert!(parse_decimal("abc").is_err());
    }

    #[test]
    fn spec_values() {
        let f = ToricForm::sum_squares(2, 3).unwrap();
        assert_eq!(exact(&f, "0"), rat(1) / rat(2));
        let f = ToricForm::monomial(vec![1, 1], 2).unwrap();
        assert_eq!(exact(&f, "1"), rat(2));
        let f = ToricForm::cusp(3.0).unwrap();
        assert_eq!(nu_exact(&f, &q("0")).unwrap(), NuValue::Approx(1.5));
        assert_eq!(nu_exact(&f, &q("1")).unwrap(), NuValue::Approx(2.0));
        assert!(matches!(nu_exact(&f, &q("0.5")), Err(LelongError::Unsupported(_))));
        let f = ToricForm::sum_squares(1, 1).unwrap().with_scale(2.0).unwrap();
        assert_eq!(exact(&f, "0"), rat(2));
        let f = ToricForm::sum_squares(3, 3).unwrap();
        assert_eq!(exact(&f, "0"), rat(1) / rat(3));
        assert!(nu_exact(&f, &q("3")).is_err());
    }

    #[test]
    fn unequal_exponents_differ_from_the_two_term_formula() {
        let f = ToricForm::monomial(vec![1, 2], 2).unwrap();
        assert_eq!(exact(&f, "0"), rat(2));
        let lit = nu_exact_literal(&f, &q("0")).unwrap();
        assert_eq!(lit.as_exact().unwrap(), &(rat(3) / rat(2)));
        // equal exponents: both agree
        let f = ToricForm::monomial(vec![2, 2], 3).unwrap();
        for t in ["0", "1", "2"] {
            assert_eq!(nu_exact(&f, &q(t)).unwrap(), nu_exact_literal(&f, &q(t)).unwrap());
        }
    }

    #[test]
    fn property5_examples() {
        assert_eq!(property5_bound(0.5, 1.0).unwrap(), 1.0);
        assert_eq!(property5_bound(2.0, 1.0).unwrap(), 0.0);
        assert_eq!(property5_bound(1.0, 1.0).unwrap(), f64::INFINITY);
        assert!(property5_bound(0.0, 1.0).is_err());
    }

    #[test]
    fn relative_types() {
        let f = ToricForm::sum_squares(2, 3).unwrap();
        assert_eq!(relative_type_radial(&f, 1.0).unwrap(), 1.0);
        let f = ToricForm::monomial(vec![2, 3], 2).unwrap();
        assert_eq!(relative_type_radial(&f, 1.0).unwrap(), 5.0);
        assert_eq!(relative_type_radial(&f, 2.0).unwrap(), 2.5);
        assert!(relative_type_radial(&f, 0.0).is_err());
    }

    #[test]
    fn skoda_sharpness_cases() {
        // SumSquares(k=1, n=2): at t = n−k = 1 the middle inequality is an equality
        let f = ToricForm::sum_squares(1, 2).unwrap();
        let r = skoda_chain_check(&f, &[q("1")]).unwrap();
        assert!(r.violations.is_empty());
        assert!(r.exact);
        assert!(r.rows[0].equalities[1]);
        // Monomial with k = n at t = 0: (n−t)ν = nν00
        let f = ToricForm::monomial(vec![1, 1, 1], 3).unwrap();
        let r = skoda_chain_check(&f, &[q("0")]).unwrap();
        assert!(r.violations.is_empty());
        assert!(r.rows[0].equalities[2]);
        let f = ToricForm::sum_squares(2, 3).unwrap();
        let grid: Vec<_> = ["0", "0.5", "1", "1.5", "2"].iter().map(|s| q(s)).collect();
        let r = skoda_chain_check(&f, &grid).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
    }

    #[test]
    fn cusp_chain_skips_intermediate_t() {
        let f = ToricForm::cusp(2.0).unwrap();
        let r = skoda_chain_check(&f, &[q("0"), q("0.5"), q("1")]).unwrap();
        assert_eq!(r.skipped.len(), 1);
        assert!(r.violations.is_empty());
        assert!(!r.exact);
    }

    #[test]
    fn intervals() {
        let n = 2;
        let e = parse("log(|z1|^1) + 0.5*log(|z1|^2 + |z2|^2)").unwrap();
        let (lo, hi) = nu_interval(&e, n, 0.0);
        assert_eq!((lo, hi), (1.0, 1.5));
        let e = parse("max(log(|z1|^1), log(|z2|^1))").unwrap();
        let (lo, hi) = nu_interval(&e, n, 0.0);
        assert_eq!((lo, hi), (0.5, 1.0));
        let e = parse("log(|1 + z1|^2) + log(|z1|^1)").unwrap();
        assert_eq!(nu_interval(&e, n, 1.0), (1.0, 1.0));
    }

    fn arb_form() -> impl Strategy<Value = ToricForm> {
        (1usize..=6).prop_flat_map(|n| {
            prop_oneof![
                (1..=n).prop_map(move |k| ToricForm::sum_squares(k, n).unwrap()),
                prop::collection::vec(1u32..=5, 1..=n).prop_map(move |a| ToricForm::monomial(a, n).unwrap()),
            ]
        })
    }

    proptest! {
        #[test]
        fn chain_and_convexity_hold(form in arb_form(), c in 1u32..8) {
            let form = form.with_scale(c as f64 * 0.5).unwrap();
            let n = rat(form.n as i64);
            let grid = t_grid(&rat(0), &n, &(rat(1) / rat(20)));
            let r = skoda_chain_check(&form, &grid).unwrap();
            prop_assert!(r.violations.is_empty(), "{:?}", r.violations);
            prop_assert!(r.exact);
        }

        #[test]
        fn scaling_is_linear(form in arb_form(), c in 1u32..20, tn in 0u32..20) {
            let t = rat(tn as i64) * rat(form.n as i64) / rat(20);
            let base = nu_exact(&form, &t).unwrap();
            let scaled = nu_exact(&form.clone().with_scale(c as f64).unwrap(), &t).unwrap();
            prop_assert_eq!(scaled.as_exact().unwrap(), &(base.as_exact().unwrap() * rat(c as i64)));
        }
    }
}
