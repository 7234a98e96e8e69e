//! Plurisubharmonic expressions: AST, parser, printer, evaluation and
//! toric pattern detection.

mod classify;
mod compiled;
mod parse;
pub mod poly;

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LelongError, Result};

pub use classify::{classify_toric, ToricForm, ToricKind};
pub use compiled::CompiledExpr;
pub use parse::{parse, parse_in_dim};
pub use poly::{Exponent, Poly, PolyMap};

/// A point of `C^n` with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint(Vec<Complex64>);

impl ComplexPoint {
    pub fn new(coords: Vec<Complex64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(LelongError::invalid("a point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(LelongError::invalid("point has a non-finite coordinate"));
        }
        Ok(ComplexPoint(coords))
    }

    pub fn origin(n: usize) -> Self {
        ComplexPoint(vec![Complex64::new(0.0, 0.0); n.max(1)])
    }

    pub fn real(xs: &[f64]) -> Result<Self> {
        ComplexPoint::new(xs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|c| c.norm_sqr() == 0.0)
    }
}

/// One summand `|p|^alpha` inside a `log(...)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowTerm {
    pub poly: Poly,
    pub exponent: f64,
}

impl PowTerm {
    pub fn new(poly: Poly, exponent: f64) -> Self {
        PowTerm { poly, exponent }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PshExpr {
    LogSumPow(Vec<PowTerm>),
    Scale(f64, Box<PshExpr>),
    Sum(Vec<PshExpr>),
    Max(Vec<PshExpr>),
    Compose(Box<PshExpr>, PolyMap),
}

impl PshExpr {
    /// `φ ≡ 0`.
    pub fn zero() -> Self {
        PshExpr::Sum(Vec::new())
    }

    /// `log(|z_{i+1}|)`.
    pub fn log_abs_var(i: usize) -> Self {
        PshExpr::LogSumPow(vec![PowTerm::new(Poly::var(i), 1.0)])
    }

    /// `log |p|^alpha`.
    pub fn log_pow(p: Poly, alpha: f64) -> Self {
        PshExpr::LogSumPow(vec![PowTerm::new(p, alpha)])
    }

    pub fn scale(self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(LelongError::invalid(format!("scale factor must be positive, got {c}")));
        }
        Ok(PshExpr::Scale(c, Box::new(self)))
    }

    pub fn compose(&self, f: &PolyMap) -> Result<PshExpr> {
        let arity = self.arity();
        if arity > f.n_out() {
            return Err(LelongError::Arity {
                expected: f.n_out(),
                found: arity,
                context: "composition".into(),
            });
        }
        Ok(PshExpr::Compose(Box::new(self.clone()), f.clone()))
    }

    /// Smallest ambient dimension the expression can be evaluated in.
    pub fn arity(&self) -> usize {
        match self {
            PshExpr::LogSumPow(terms) => terms.iter().map(|t| t.poly.arity()).max().unwrap_or(0),
            PshExpr::Scale(_, e) => e.arity(),
            PshExpr::Sum(es) | PshExpr::Max(es) => es.iter().map(PshExpr::arity).max().unwrap_or(0),
            PshExpr::Compose(_, f) => f.n_in(),
        }
    }

    /// Checks exponent and scale positivity and composition arities.
    pub fn validate(&self) -> Result<()> {
        match self {
            PshExpr::LogSumPow(terms) => {
                if terms.is_empty() {
                    return Err(LelongError::invalid("log() needs at least one term"));
                }
                for t in terms {
                    if !(t.exponent > 0.0 && t.exponent.is_finite()) {
                        return Err(LelongError::invalid(format!(
                            "exponent must be positive, got {}",
                            t.exponent
                        )));
                    }
                }
                Ok(())
            }
            PshExpr::Scale(c, e) => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(LelongError::invalid(format!("scale must be positive, got {c}")));
                }
                e.validate()
            }
            PshExpr::Sum(es) => es.iter().try_for_each(PshExpr::validate),
            PshExpr::Max(es) => {
                if es.is_empty() {
                    return Err(LelongError::invalid("max() needs at least one argument"));
                }
                es.iter().try_for_each(PshExpr::validate)
            }
            PshExpr::Compose(e, f) => {
                if e.arity() > f.n_out() {
                    return Err(LelongError::Arity {
                        expected: f.n_out(),
                        found: e.arity(),
                        context: "composition".into(),
                    });
                }
                e.validate()
            }
        }
    }

    /// Replaces every `Compose` node by substituting the map into the
    /// polynomials below it.
    pub fn expand(&self) -> PshExpr {
        match self {
            PshExpr::LogSumPow(_) => self.clone(),
            PshExpr::Scale(c, e) => PshExpr::Scale(*c, Box::new(e.expand())),
            PshExpr::Sum(es) => PshExpr::Sum(es.iter().map(PshExpr::expand).collect()),
            PshExpr::Max(es) => PshExpr::Max(es.iter().map(PshExpr::expand).collect()),
            PshExpr::Compose(e, f) => e.expand().substitute(f.components()),
        }
    }

    fn substitute(&self, map: &[Poly]) -> PshExpr {
        match self {
            PshExpr::LogSumPow(terms) => PshExpr::LogSumPow(
                terms
                    .iter()
                    .map(|t| PowTerm::new(t.poly.substitute(map), t.exponent))
                    .collect(),
            ),
            PshExpr::Scale(c, e) => PshExpr::Scale(*c, Box::new(e.substitute(map))),
            PshExpr::Sum(es) => PshExpr::Sum(es.iter().map(|e| e.substitute(map)).collect()),
            PshExpr::Max(es) => PshExpr::Max(es.iter().map(|e| e.substitute(map)).collect()),
            PshExpr::Compose(e, f) => e.expand().substitute(&f.compose_polys(map)),
        }
    }

    /// `φ(a + ζ)` as an expression in `ζ`, with polynomials re-expanded
    /// around `a` so that vanishing at `a` stays exact.
    pub fn translate(&self, a: &[Complex64]) -> PshExpr {
        fn go(e: &PshExpr, a: &[Complex64]) -> PshExpr {
            match e {
                PshExpr::LogSumPow(terms) => PshExpr::LogSumPow(
                    terms
                        .iter()
                        .map(|t| PowTerm::new(t.poly.shifted(a), t.exponent))
                        .collect(),
                ),
                PshExpr::Scale(c, e) => PshExpr::Scale(*c, Box::new(go(e, a))),
                PshExpr::Sum(es) => PshExpr::Sum(es.iter().map(|e| go(e, a)).collect()),
                PshExpr::Max(es) => PshExpr::Max(es.iter().map(|e| go(e, a)).collect()),
                PshExpr::Compose(..) => unreachable!("expanded"),
            }
        }
        go(&self.expand(), a)
    }

    /// Evaluates at `z`; `-∞` is a legitimate value.
    pub fn evaluate(&self, z: &[Complex64]) -> Result<f64> {
        let arity = self.arity();
        if arity > z.len() {
            return Err(LelongError::Arity {
                expected: arity,
                found: z.len(),
                context: "evaluation point".into(),
            });
        }
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: &[Complex64]) -> f64 {
        match self {
            PshExpr::LogSumPow(terms) => {
                let logs: Vec<f64> = terms.iter().map(|t| t.exponent * t.poly.eval(z).norm().ln()).collect();
                log_sum_exp(&logs)
            }
            PshExpr::Scale(c, e) => c * e.eval_unchecked(z),
            PshExpr::Sum(es) => {
                let mut acc = 0.0;
                for e in es {
                    let v = e.eval_unchecked(z);
                    if v == f64::NEG_INFINITY {
                        return v;
                    }
                    acc += v;
                }
                acc
            }
            PshExpr::Max(es) => es.iter().map(|e| e.eval_unchecked(z)).fold(f64::NEG_INFINITY, f64::max),
            PshExpr::Compose(e, f) => e.eval_unchecked(&f.apply(z)),
        }
    }

    /// Compiles into a flat form for repeated evaluation in dimension `n`.
    pub fn compile(&self, n: usize) -> Result<CompiledExpr> {
        let arity = self.arity();
        if arity > n {
            return Err(LelongError::Arity {
                expected: n,
                found: arity,
                context: "compilation".into(),
            });
        }
        Ok(CompiledExpr::new(&self.expand(), n))
    }

    /// Exact Lelong number at the origin of a one-variable expression,
    /// `+∞` when it is identically `-∞`.
    pub fn order_at_origin_1d(&self) -> f64 {
        match self.expand() {
            PshExpr::LogSumPow(terms) => terms
                .iter()
                .map(|t| match t.poly.lowest_degree() {
                    Some(d) => t.exponent * d as f64,
                    None => f64::INFINITY,
                })
                .fold(f64::INFINITY, f64::min),
            PshExpr::Scale(c, e) => c * e.order_at_origin_1d(),
            PshExpr::Sum(es) => es.iter().map(PshExpr::order_at_origin_1d).sum(),
            PshExpr::Max(es) => es.iter().map(PshExpr::order_at_origin_1d).fold(f64::INFINITY, f64::min),
            PshExpr::Compose(..) => unreachable!("expanded"),
        }
    }
}

pub(crate) fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

impl fmt::Display for PshExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_sum(&self.expand(), f)
    }
}

fn write_sum(e: &PshExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        PshExpr::Sum(es) if es.len() >= 2 => {
            for (i, c) in es.iter().enumerate() {
                if i > 0 {
                    write!(f, " + ")?;
                }
                write_prod(c, f)?;
            }
            Ok(())
        }
        _ => write_prod(e, f),
    }
}

fn write_prod(e: &PshExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        PshExpr::Scale(c, inner) => {
            write!(f, "{c}*")?;
            write_atom(inner, f)
        }
        _ => write_atom(e, f),
    }
}

fn write_atom(e: &PshExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        PshExpr::LogSumPow(terms) => {
            write!(f, "log(")?;
            for (i, t) in terms.iter().enumerate() {
                if i > 0 {
                    write!(f, " + ")?;
                }
                write!(f, "|{}|^{}", t.poly, t.exponent)?;
            }
            write!(f, ")")
        }
        PshExpr::Max(es) => {
            write!(f, "max(")?;
            for (i, c) in es.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write_sum(c, f)?;
            }
            write!(f, ")")
        }
        PshExpr::Sum(es) if es.is_empty() => write!(f, "0"),
        _ => {
            write!(f, "(")?;
            write_sum(e, f)?;
            write!(f, ")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn evaluation_examples() {
        let e = parse("0.5*log(|z1|^2 + |z2|^2)").unwrap();
        let v = e.evaluate(&[c(3.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert!((v - 5f64.ln()).abs() < 1e-15);

        let e = parse("log(|z1*z2|^1)").unwrap();
        assert_eq!(e.evaluate(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap(), f64::NEG_INFINITY);

        let e = parse("2*log(|z1|^1)").unwrap();
        let v = e.evaluate(&[c(std::f64::consts::E, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let e = parse("log(|z3|^1)").unwrap();
        assert!(matches!(e.evaluate(&[c(1.0, 0.0)]), Err(LelongError::Arity { .. })));
    }

    #[test]
    fn compose_examples() {
        let e = parse("log(|z1|^1)").unwrap();
        let shear = PolyMap::new(vec![Poly::var(0).add(&Poly::var(1).pow(2)), Poly::var(1)], 2).unwrap();
        let g = e.compose(&shear).unwrap();
        let v = g.evaluate(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);

        let p = PolyMap::power_map(&[3]);
        let g = e.compose(&p).unwrap();
        let v = g.evaluate(&[c(0.5, 0.0)]).unwrap();
        assert!((v - 3.0 * 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn translate_keeps_exact_zero() {
        let e = parse("log(|z1 - 0.3|^1)").unwrap();
        let t = e.translate(&[c(0.3, 0.0)]);
        // the shifted polynomial is exactly ζ1
        assert_eq!(t, PshExpr::log_abs_var(0));
    }

    #[test]
    fn one_dimensional_order() {
        let e = parse("0.5*log(|z1^2 + z1^3|^2 + |z1|^3) + max(log(|z1|^1), 2*log(|z1^2|^1))").unwrap();
        assert_eq!(e.order_at_origin_1d(), 0.5 * 3.0 + 1.0);
        assert_eq!(parse("0").unwrap().order_at_origin_1d(), 0.0);
        assert_eq!(parse("log(|1 + z1|^1)").unwrap().order_at_origin_1d(), 0.0);
    }

    #[test]
    fn print_expands_compose() {
        let e = parse("log(|z1|^2)").unwrap();
        let g = e.compose(&PolyMap::power_map(&[2])).unwrap();
        assert_eq!(parse(&g.to_string()).unwrap(), g.expand());
    }

    fn arb_poly() -> impl Strategy<Value = Poly> {
        let term = (prop::collection::vec(0u32..3, 1..4), -3i32..4, -2i32..3)
            .prop_map(|(e, re, im)| (Exponent::new(e), c(re as f64 * 0.5, im as f64 * 0.25)));
        prop::collection::vec(term, 1..4)
            .prop_map(Poly::from_terms)
            .prop_filter("nonzero", |p| !p.is_zero())
    }

    fn arb_expr() -> impl Strategy<Value = PshExpr> {
        let leaf = prop::collection::vec((arb_poly(), 1u32..9), 1..3)
            .prop_map(|ts| PshExpr::LogSumPow(ts.into_iter().map(|(p, a)| PowTerm::new(p, a as f64 * 0.5)).collect()));
        leaf.prop_recursive(3, 12, 3, |inner| {
            prop_oneof![
                (1u32..20, inner.clone()).prop_map(|(c, e)| PshExpr::Scale(c as f64 * 0.25, Box::new(e))),
                prop::collection::vec(inner.clone(), 2..4).prop_map(PshExpr::Sum),
                prop::collection::vec(inner, 1..3).prop_map(PshExpr::Max),
                Just(PshExpr::zero()),
            ]
        })
    }

    fn arb_point(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n)
            .prop_map(|v| v.into_iter().map(|(a, b)| c(a, b)).collect())
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let text = e.to_string();
            let back = parse(&text).unwrap();
            prop_assert_eq!(&back, &e, "text: {}", text);
            prop_assert_eq!(back.to_string(), text);
        }

        #[test]
        fn scale_is_exact(e in arb_expr(), k in 1u32..40, z in arb_point(3)) {
            let cf = k as f64 * 0.37;
            let base = e.evaluate(&z).unwrap();
            let scaled = e.clone().scale(cf).unwrap().evaluate(&z).unwrap();
            prop_assert_eq!(scaled, cf * base);
        }

        #[test]
        fn compose_matches_pointwise(e in arb_expr(), z in arb_point(3), m in prop::collection::vec(arb_poly(), 3)) {
            let f = PolyMap::new(m, 3).unwrap();
            let g = e.compose(&f).unwrap();
            let lhs = g.evaluate(&z).unwrap();
            let rhs = e.evaluate(&f.apply(&z)).unwrap();
            let expanded = g.expand().evaluate(&z).unwrap();
            prop_assert!(lhs == rhs);
            if rhs.is_finite() {
                prop_assert!((expanded - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()), "{} vs {}", expanded, rhs);
            }
        }

        #[test]
        fn compiled_matches_tree(e in arb_expr(), z in arb_point(3)) {
            let compiled = e.compile(3).unwrap();
            let a = e.evaluate(&z).unwrap();
            let b = compiled.value(&z);
            if a.is_finite() {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{} vs {}", a, b);
            } else {
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn compose_identity_is_neutral(e in arb_expr(), z in arb_point(3)) {
            let g = e.compose(&PolyMap::identity(3)).unwrap();
            prop_assert_eq!(g.evaluate(&z).unwrap(), e.evaluate(&z).unwrap());
        }
    }
}
