//! Detection of the toric normal forms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::{Exponent, Poly};
use super::{PowTerm, PshExpr};
use crate::error::{LelongError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ToricKind {
    /// `½·log(|z_1|² + … + |z_k|²)`.
    SumSquares { k: usize },
    /// `log|z_1^{α_1} ⋯ z_k^{α_k}|`.
    Monomial { alpha: Vec<u32> },
    /// `log(|z_1|² + |z_2|^{2a})`, only in dimension 2.
    TwoVarCusp { a: f64 },
}

/// A toric family member `scale · kind` on `C^n`, acting on the variables
/// listed in `vars` (zero-based, in the order the family expects).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToricForm {
    pub kind: ToricKind,
    pub n: usize,
    pub scale: f64,
    pub vars: Vec<usize>,
}

impl ToricForm {
    pub fn sum_squares(k: usize, n: usize) -> Result<Self> {
        ToricForm {
            kind: ToricKind::SumSquares { k },
            n,
            scale: 1.0,
            vars: (0..k).collect(),
        }
        .validated()
    }

    pub fn monomial(alpha: Vec<u32>, n: usize) -> Result<Self> {
        let k = alpha.len();
        ToricForm {
            kind: ToricKind::Monomial { alpha },
            n,
            scale: 1.0,
            vars: (0..k).collect(),
        }
        .validated()
    }

    pub fn cusp(a: f64) -> Result<Self> {
        ToricForm {
            kind: ToricKind::TwoVarCusp { a },
            n: 2,
            scale: 1.0,
            vars: vec![0, 1],
        }
        .validated()
    }

    pub fn with_scale(mut self, c: f64) -> Result<Self> {
        self.scale *= c;
        self.validated()
    }

    /// Number of variables the form depends on.
    pub fn k(&self) -> usize {
        match &self.kind {
            ToricKind::SumSquares { k } => *k,
            ToricKind::Monomial { alpha } => alpha.len(),
            ToricKind::TwoVarCusp { .. } => 2,
        }
    }

    fn validated(self) -> Result<Self> {
        let k = self.k();
        if k == 0 || k > self.n {
            return Err(LelongError::invalid(format!("need 1 ≤ k ≤ n, got k={k}, n={}", self.n)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(LelongError::invalid("scale must be positive"));
        }
        if self.vars.len() != k || self.vars.iter().any(|&v| v >= self.n) {
            return Err(LelongError::invalid("variable list inconsistent with the form"));
        }
        let mut sorted = self.vars.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != k {
            return Err(LelongError::invalid("repeated variable in the form"));
        }
        match &self.kind {
            ToricKind::Monomial { alpha } if alpha.contains(&0) => {
                Err(LelongError::invalid("monomial exponents must be ≥ 1"))
            }
            ToricKind::TwoVarCusp { a } if !(*a > 0.0 && a.is_finite()) || self.n != 2 => {
                Err(LelongError::invalid("cusp needs a > 0 and n = 2"))
            }
            _ => Ok(self),
        }
    }

    /// The form as an expression with the same pointwise values.
    pub fn to_expr(&self) -> PshExpr {
        let one = Complex64::new(1.0, 0.0);
        match &self.kind {
            ToricKind::SumSquares { .. } => PshExpr::Scale(
                self.scale / 2.0,
                Box::new(PshExpr::LogSumPow(
                    self.vars.iter().map(|&v| PowTerm::new(Poly::var(v), 2.0)).collect(),
                )),
            ),
            ToricKind::Monomial { alpha } => {
                let mut e = vec![0; self.n];
                for (&v, &a) in self.vars.iter().zip(alpha) {
                    e[v] = a;
                }
                PshExpr::Scale(
                    self.scale,
                    Box::new(PshExpr::log_pow(Poly::monomial(one, Exponent::new(e)), 1.0)),
                )
            }
            ToricKind::TwoVarCusp { a } => PshExpr::Scale(
                self.scale,
                Box::new(PshExpr::LogSumPow(vec![
                    PowTerm::new(Poly::var(self.vars[0]), 2.0),
                    PowTerm::new(Poly::var(self.vars[1]), 2.0 * a),
                ])),
            ),
        }
    }
}

fn is_integer(x: f64) -> bool {
    x.is_finite() && x.fract() == 0.0 && x >= 1.0 && x < u32::MAX as f64
}

/// Recognizes the toric families in dimension `n`, up to positive scaling
/// and a permutation of variables.
pub fn classify_toric(expr: &PshExpr, n: usize) -> Option<ToricForm> {
    if expr.arity() > n {
        return None;
    }
    let mut scale = 1.0;
    let mut e = expr.expand();
    loop {
        match e {
            PshExpr::Scale(c, inner) => {
                scale *= c;
                e = *inner;
            }
            PshExpr::Sum(mut es) | PshExpr::Max(mut es) if es.len() == 1 => e = es.pop().unwrap(),
            _ => break,
        }
    }
    let terms = match e {
        PshExpr::LogSumPow(terms) => terms,
        _ => return None,
    };
    // every term must be a unimodular monomial
    let mut monos = Vec::with_capacity(terms.len());
    for t in &terms {
        let (c, ex) = t.poly.as_monomial()?;
        if c.norm() != 1.0 || ex.degree() == 0 {
            return None;
        }
        monos.push((ex.clone(), t.exponent));
    }

    let single_var = |ex: &Exponent| -> Option<(usize, u32)> {
        let nz: Vec<(usize, u32)> = ex
            .powers()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0)
            .map(|(i, &p)| (i, p))
            .collect();
        (nz.len() == 1).then(|| nz[0])
    };

    if monos.len() == 1 {
        let (ex, pw) = &monos[0];
        if let Some((v, 1)) = single_var(ex) {
            if *pw == 2.0 {
                return ToricForm {
                    kind: ToricKind::SumSquares { k: 1 },
                    n,
                    scale: 2.0 * scale,
                    vars: vec![v],
                }
                .validated()
                .ok();
            }
        }
        let vars: Vec<usize> = (0..ex.arity()).filter(|&i| ex.power(i) > 0).collect();
        let beta: Vec<f64> = vars.iter().map(|&i| ex.power(i) as f64).collect();
        let (alpha, s) = if beta.iter().all(|b| is_integer(scale * pw * b)) {
            (beta.iter().map(|b| (scale * pw * b) as u32).collect::<Vec<_>>(), 1.0)
        } else if beta.iter().all(|b| is_integer(pw * b)) {
            (beta.iter().map(|b| (pw * b) as u32).collect(), scale)
        } else {
            (beta.iter().map(|&b| b as u32).collect(), scale * pw)
        };
        return ToricForm {
            kind: ToricKind::Monomial { alpha },
            n,
            scale: s,
            vars,
        }
        .validated()
        .ok();
    }

    // several single-variable terms |z_v|^{p·α}
    let mut items = Vec::with_capacity(monos.len());
    for (ex, pw) in &monos {
        let (v, p) = single_var(ex)?;
        items.push((v, p as f64 * pw));
    }
    let mut vars: Vec<usize> = items.iter().map(|(v, _)| *v).collect();
    let mut uniq = vars.clone();
    uniq.sort_unstable();
    uniq.dedup();
    if uniq.len() != vars.len() {
        return None;
    }
    if items.iter().all(|(_, w)| *w == 2.0) {
        let k = vars.len();
        return ToricForm {
            kind: ToricKind::SumSquares { k },
            n,
            scale: 2.0 * scale,
            vars,
        }
        .validated()
        .ok();
    }
    if items.len() == 2 && n == 2 {
        let (first, second) = if items[0].1 == 2.0 {
            (items[0], items[1])
        } else if items[1].1 == 2.0 {
            (items[1], items[0])
        } else {
            return None;
        };
        vars = vec![first.0, second.0];
        return ToricForm {
            kind: ToricKind::TwoVarCusp { a: second.1 / 2.0 },
            n,
            scale,
            vars,
        }
        .validated()
        .ok();
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use rand::{Rng, SeedableRng};

    fn agree_on_random_points(e: &PshExpr, f: &ToricForm) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let fe = f.to_expr();
        for _ in 0..100 {
            let z: Vec<Complex64> = (0..f.n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let a = e.evaluate(&z).unwrap();
            let b = fe.evaluate(&z).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn examples() {
        let e = parse("0.5*log(|z1|^2 + |z2|^2)").unwrap();
        let f = classify_toric(&e, 2).unwrap();
        assert_eq!(f.kind, ToricKind::SumSquares { k: 2 });
        assert_eq!(f.scale, 1.0);
        agree_on_random_points(&e, &f);

        let e = parse("0.5*log(|z1|^2+|z2|^2+|z3|^2)").unwrap();
        let f = classify_toric(&e, 4).unwrap();
        assert_eq!((f.kind.clone(), f.n), (ToricKind::SumSquares { k: 3 }, 4));
        agree_on_random_points(&e, &f);

        let e = parse("log(|z1^2*z2^3|^1)").unwrap();
        let f = classify_toric(&e, 2).unwrap();
        assert_eq!(f.kind, ToricKind::Monomial { alpha: vec![2, 3] });
        agree_on_random_points(&e, &f);

        let e = parse("log(|z1|^2 + |z2|^6)").unwrap();
        let f = classify_toric(&e, 2).unwrap();
        assert_eq!(f.kind, ToricKind::TwoVarCusp { a: 3.0 });
        agree_on_random_points(&e, &f);
    }

    #[test]
    fn reordered_and_scaled() {
        let e = parse("3*log(|z2|^6 + |z1|^2)").unwrap();
        let f = classify_toric(&e, 2).unwrap();
        assert_eq!(f.vars, vec![0, 1]);
        assert_eq!(f.scale, 3.0);
        agree_on_random_points(&e, &f);

        let e = parse("0.25*log(|z3^2*z1|^2)").unwrap();
        let f = classify_toric(&e, 3).unwrap();
        assert_eq!(f.vars, vec![0, 2]);
        agree_on_random_points(&e, &f);

        let e = parse("log(|(0.6+0.8i)*z2|^2 + |z3|^2)").unwrap();
        let f = classify_toric(&e, 3).unwrap();
        assert_eq!(f.kind, ToricKind::SumSquares { k: 2 });
        agree_on_random_points(&e, &f);
    }

    #[test]
    fn non_members() {
        for s in [
            "log(|z1 + z2|^2)",
            "log(|2*z1|^2)",
            "log(|z1|^4 + |z2|^6)",
            "log(|z1|^2) + log(|z2|^2)",
            "max(log(|z1|^1), log(|z2|^1))",
            "log(|z1|^2 + |z1|^4)",
            "0",
        ] {
            assert!(classify_toric(&parse(s).unwrap(), 2).is_none(), "{s}");
        }
        // cusp only lives in dimension 2
        assert!(classify_toric(&parse("log(|z1|^2 + |z2|^6)").unwrap(), 3).is_none());
    }
}
