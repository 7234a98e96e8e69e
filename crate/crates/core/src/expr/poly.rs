//! Sparse multivariate polynomials with complex coefficients and exact
//! integer exponents.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LelongError, Result};

/// A monomial exponent vector. Trailing zeros are trimmed so that equal
/// monomials compare equal regardless of the ambient dimension.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Exponent(Vec<u32>);

impl Exponent {
    pub fn new(mut powers: Vec<u32>) -> Self {
        while powers.last() == Some(&0) {
            powers.pop();
        }
        Exponent(powers)
    }

    pub fn one() -> Self {
        Exponent(Vec::new())
    }

    pub fn var(index: usize, power: u32) -> Self {
        let mut v = vec![0; index + 1];
        v[index] = power;
        Exponent::new(v)
    }

    pub fn powers(&self) -> &[u32] {
        &self.0
    }

    pub fn power(&self, var: usize) -> u32 {
        self.0.get(var).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Number of variables this monomial needs.
    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, other: &Exponent) -> Exponent {
        let len = self.0.len().max(other.0.len());
        let v = (0..len).map(|i| self.power(i) + other.power(i)).collect();
        Exponent::new(v)
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for (i, &p) in self.0.iter().enumerate() {
            if p > 0 {
                acc *= z[i].powu(p);
            }
        }
        acc
    }
}

/// Polynomial in `z1..zn` stored as a map from exponent to coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Poly {
    terms: BTreeMap<Exponent, Complex64>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: Complex64) -> Self {
        let mut p = Poly::zero();
        p.add_term(Exponent::one(), c);
        p
    }

    /// The coordinate function `z_{index+1}`.
    pub fn var(index: usize) -> Self {
        Poly::monomial(Complex64::new(1.0, 0.0), Exponent::var(index, 1))
    }

    pub fn monomial(c: Complex64, e: Exponent) -> Self {
        let mut p = Poly::zero();
        p.add_term(e, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Exponent, Complex64)>) -> Self {
        let mut p = Poly::zero();
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, e: Exponent, c: Complex64) {
        let entry = self.terms.entry(e.clone()).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
        if *entry == Complex64::new(0.0, 0.0) {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &Complex64)> {
        self.terms.iter()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.terms.keys().map(Exponent::arity).max().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Exponent::degree).max().unwrap_or(0)
    }

    /// Returns `Some((coefficient, exponent))` when the polynomial is a single monomial.
    pub fn as_monomial(&self) -> Option<(Complex64, &Exponent)> {
        if self.terms.len() == 1 {
            let (e, c) = self.terms.iter().next().unwrap();
            Some((*c, e))
        } else {
            None
        }
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.terms.iter().map(|(e, c)| c * e.eval(z)).sum()
    }

    /// Value and holomorphic gradient `(dp/dz_1, ..., dp/dz_n)` at `z`.
    pub fn eval_with_grad(&self, z: &[Complex64], grad: &mut [Complex64]) -> Complex64 {
        for g in grad.iter_mut() {
            *g = Complex64::new(0.0, 0.0);
        }
        let mut value = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            value += c * e.eval(z);
            for (i, &p) in e.powers().iter().enumerate() {
                if p == 0 {
                    continue;
                }
                let mut d = c * Complex64::new(p as f64, 0.0);
                for (j, &q) in e.powers().iter().enumerate() {
                    let q = if j == i { q - 1 } else { q };
                    if q > 0 {
                        d *= z[j].powu(q);
                    }
                }
                grad[i] += d;
            }
        }
        value
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                out.add_term(e1.mul(e2), c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::constant(Complex64::new(1.0, 0.0));
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                out = out.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        out
    }

    /// Lowest total degree among the terms, `None` for the zero polynomial.
    pub fn lowest_degree(&self) -> Option<u32> {
        self.terms.keys().map(Exponent::degree).min()
    }

    /// `p(a + ζ)` as a polynomial in `ζ`. Coefficients that are within
    /// rounding error of zero (measured against the same expansion with all
    /// moduli) are dropped, so exact cancellation survives the shift.
    pub fn shifted(&self, a: &[Complex64]) -> Poly {
        let shift: Vec<Poly> = (0..a.len().max(self.arity()))
            .map(|i| {
                let ai = a.get(i).copied().unwrap_or_default();
                Poly::var(i).add(&Poly::constant(ai))
            })
            .collect();
        let abs_shift: Vec<Poly> = (0..shift.len())
            .map(|i| {
                let ai = a.get(i).map(|c| c.norm()).unwrap_or(0.0);
                Poly::var(i).add(&Poly::constant(Complex64::new(ai, 0.0)))
            })
            .collect();
        let abs_self = Poly {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), Complex64::new(c.norm(), 0.0)))
                .collect(),
        };
        let value = self.substitute(&shift);
        let bound = abs_self.substitute(&abs_shift);
        let tol = 64.0 * f64::EPSILON * (1.0 + self.degree() as f64);
        Poly {
            terms: value
                .terms
                .into_iter()
                .filter(|(e, c)| {
                    let b = bound.terms.get(e).map(|b| b.re).unwrap_or(0.0);
                    c.norm() > tol * b
                })
                .collect(),
        }
    }

    /// Substitutes `z_i := map[i]` for every variable.
    pub fn substitute(&self, map: &[Poly]) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            let mut term = Poly::constant(*c);
            for (i, &p) in e.powers().iter().enumerate() {
                if p > 0 {
                    term = term.mul(&map[i].pow(p));
                }
            }
            out = out.add(&term);
        }
        out
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x}")
}

/// Formats a coefficient in the DSL's literal syntax.
pub(crate) fn fmt_coeff(c: Complex64) -> String {
    if c.im == 0.0 {
        if c.re < 0.0 {
            format!("({})", fmt_real(c.re))
        } else {
            fmt_real(c.re)
        }
    } else {
        let sign = if c.im < 0.0 || (c.im == 0.0 && c.im.is_sign_negative()) {
            "-"
        } else {
            "+"
        };
        format!("({}{}{}i)", fmt_real(c.re), sign, fmt_real(c.im.abs()))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let mut factors = Vec::new();
            let unit = *c == Complex64::new(1.0, 0.0);
            if !unit || e.degree() == 0 {
                factors.push(fmt_coeff(*c));
            }
            for (i, &p) in e.powers().iter().enumerate() {
                match p {
                    0 => {}
                    1 => factors.push(format!("z{}", i + 1)),
                    _ => factors.push(format!("z{}^{}", i + 1, p)),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

/// A polynomial map `C^{n_in} -> C^{n_out}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyMap {
    components: Vec<Poly>,
    n_in: usize,
}

impl PolyMap {
    pub fn new(components: Vec<Poly>, n_in: usize) -> Result<Self> {
        for (i, c) in components.iter().enumerate() {
            if c.arity() > n_in {
                return Err(LelongError::Arity {
                    expected: n_in,
                    found: c.arity(),
                    context: format!("component {} of polynomial map", i + 1),
                });
            }
        }
        Ok(PolyMap { components, n_in })
    }

    pub fn identity(n: usize) -> Self {
        PolyMap {
            components: (0..n).map(Poly::var).collect(),
            n_in: n,
        }
    }

    /// `z_i -> z_i^{p_i}`.
    pub fn power_map(powers: &[u32]) -> Self {
        PolyMap {
            components: powers
                .iter()
                .enumerate()
                .map(|(i, &p)| Poly::monomial(Complex64::new(1.0, 0.0), Exponent::var(i, p)))
                .collect(),
            n_in: powers.len(),
        }
    }

    /// `w -> offset + matrix * w` where `matrix` is `n_out x n_in` (row-major).
    pub fn affine(offset: &[Complex64], matrix: &[Vec<Complex64>], n_in: usize) -> Self {
        let components = offset
            .iter()
            .zip(matrix)
            .map(|(o, row)| {
                let mut p = Poly::constant(*o);
                for (j, c) in row.iter().enumerate() {
                    p.add_term(Exponent::var(j, 1), *c);
                }
                p
            })
            .collect();
        PolyMap { components, n_in }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Poly] {
        &self.components
    }

    pub fn apply(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.components.iter().map(|p| p.eval(z)).collect()
    }

    /// Image point and Jacobian (`jac[i][j] = d f_i / d z_j`).
    pub fn apply_with_jacobian(&self, z: &[Complex64]) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
        let mut jac = vec![vec![Complex64::new(0.0, 0.0); z.len()]; self.components.len()];
        let values = self
            .components
            .iter()
            .zip(jac.iter_mut())
            .map(|(p, row)| p.eval_with_grad(z, row))
            .collect();
        (values, jac)
    }

    /// Components with `map` substituted for their variables.
    pub fn compose_polys(&self, map: &[Poly]) -> Vec<Poly> {
        self.components.iter().map(|p| p.substitute(map)).collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PolyMap) -> PolyMap {
        PolyMap {
            components: self
                .components
                .iter()
                .map(|p| p.substitute(&inner.components))
                .collect(),
            n_in: inner.n_in,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exponent_trims_trailing_zeros() {
        assert_eq!(Exponent::new(vec![1, 0, 0]), Exponent::var(0, 1));
        assert_eq!(Exponent::one().degree(), 0);
    }

    #[test]
    fn arithmetic_and_evaluation() {
        let z1 = Poly::var(0);
        let z2 = Poly::var(1);
        let p = z1.add(&z2.pow(2)); // z1 + z2^2
        let z = [c(1.0, 0.0), c(1.0, 0.0)];
        assert_eq!(p.eval(&z), c(2.0, 0.0));
        let sq = p.mul(&p);
        assert_eq!(
            sq.eval(&[c(0.5, 1.0), c(-1.0, 0.25)]),
            p.eval(&[c(0.5, 1.0), c(-1.0, 0.25)]).powu(2)
        );
        assert!(p.sub(&p).is_zero());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = Poly::from_terms([
            (Exponent::new(vec![2, 1]), c(1.0, -2.0)),
            (Exponent::new(vec![0, 3]), c(0.5, 0.0)),
            (Exponent::one(), c(3.0, 1.0)),
        ]);
        let z = [c(0.3, -0.7), c(1.1, 0.2)];
        let mut g = [c(0.0, 0.0); 2];
        p.eval_with_grad(&z, &mut g);
        let h = 1e-6;
        for i in 0..2 {
            let mut zp = z;
            zp[i] += c(h, 0.0);
            let fd = (p.eval(&zp) - p.eval(&z)) / h;
            assert!((fd - g[i]).norm() < 1e-4, "coordinate {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn substitution_composes() {
        // (z1 + z2^2) o (w1 * w2, w1)
        let p = Poly::var(0).add(&Poly::var(1).pow(2));
        let map = vec![Poly::var(0).mul(&Poly::var(1)), Poly::var(0)];
        let q = p.substitute(&map);
        let w = [c(0.4, 0.1), c(-0.2, 0.9)];
        let direct = p.eval(&[w[0] * w[1], w[0]]);
        assert!((q.eval(&w) - direct).norm() < 1e-14);
    }

    #[test]
    fn poly_map_arity_checked() {
        assert!(PolyMap::new(vec![Poly::var(2)], 2).is_err());
        assert!(PolyMap::new(vec![Poly::var(1)], 2).is_ok());
    }
}
