//! Integrands in local coordinates `ζ = z − a`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::expr::{CompiledExpr, PshExpr};
use crate::weights::{WeightKind, WeightSpec};

/// The weight `ψ` seen from its centre.
#[derive(Clone, Debug)]
pub enum LocalWeight {
    /// `t·log|ζ|`.
    Radial(f64),
    /// `Σ β_i log|ζ_i|`.
    Product(Vec<f64>),
    /// `c·ψ(ζ)` for a compiled expression `ψ`.
    Expr(CompiledExpr, f64),
}

impl LocalWeight {
    pub fn from_spec(w: &WeightSpec, n: usize) -> Result<Self> {
        Ok(match &w.kind {
            WeightKind::Radial { t } => LocalWeight::Radial(*t),
            WeightKind::Expr { expr } => LocalWeight::Expr(expr.compile(n)?, 1.0),
        })
    }

    /// `c·ψ`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            LocalWeight::Radial(t) => LocalWeight::Radial(c * t),
            LocalWeight::Product(b) => LocalWeight::Product(b.iter().map(|x| c * x).collect()),
            LocalWeight::Expr(e, m) => LocalWeight::Expr(e.clone(), c * m),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LocalWeight::Radial(t) => *t == 0.0,
            LocalWeight::Product(b) => b.iter().all(|&x| x == 0.0),
            LocalWeight::Expr(_, m) => *m == 0.0,
        }
    }

    pub fn psi(&self, z: &[Complex64]) -> f64 {
        match self {
            LocalWeight::Radial(t) => {
                if *t == 0.0 {
                    0.0
                } else {
                    t * 0.5 * norm_sqr(z).ln()
                }
            }
            LocalWeight::Product(b) => b
                .iter()
                .zip(z)
                .filter(|(&bi, _)| bi != 0.0)
                .map(|(bi, zi)| bi * zi.norm().ln())
                .sum(),
            LocalWeight::Expr(e, m) => {
                if *m == 0.0 {
                    0.0
                } else {
                    m * e.value(z)
                }
            }
        }
    }

    /// `ψ` with its Wirtinger gradient `∂ψ/∂ζ_i` written to `grad`.
    pub fn psi_and_grad(&self, z: &[Complex64], grad: &mut [Complex64]) -> f64 {
        match self {
            LocalWeight::Radial(t) => {
                if *t == 0.0 {
                    grad.iter_mut().for_each(|g| *g = Complex64::new(0.0, 0.0));
                    return 0.0;
                }
                let r2 = norm_sqr(z);
                for (g, zi) in grad.iter_mut().zip(z) {
                    *g = zi.conj() * (0.5 * t / r2);
                }
                t * 0.5 * r2.ln()
            }
            LocalWeight::Product(b) => {
                let mut v = 0.0;
                for ((g, bi), zi) in grad.iter_mut().zip(b).zip(z) {
                    if *bi == 0.0 {
                        *g = Complex64::new(0.0, 0.0);
                    } else {
                        *g = 0.5 * bi / zi;
                        v += bi * zi.norm().ln();
                    }
                }
                v
            }
            LocalWeight::Expr(e, m) => {
                if *m == 0.0 {
                    grad.iter_mut().for_each(|g| *g = Complex64::new(0.0, 0.0));
                    return 0.0;
                }
                let v = e.value_grad(z, grad);
                grad.iter_mut().for_each(|g| *g *= *m);
                m * v
            }
        }
    }

    /// `ψ` and the Euclidean norm of its real gradient.
    pub fn psi_and_slope(&self, z: &[Complex64], scratch: &mut [Complex64]) -> (f64, f64) {
        match self {
            LocalWeight::Radial(t) => {
                if *t == 0.0 {
                    (0.0, 0.0)
                } else {
                    let r2 = norm_sqr(z);
                    (t * 0.5 * r2.ln(), t.abs() / r2.sqrt())
                }
            }
            LocalWeight::Product(b) => {
                let mut v = 0.0;
                let mut g2 = 0.0;
                for (bi, zi) in b.iter().zip(z) {
                    if *bi != 0.0 {
                        let r = zi.norm();
                        v += bi * r.ln();
                        g2 += (bi / r).powi(2);
                    }
                }
                (v, g2.sqrt())
            }
            LocalWeight::Expr(e, m) => {
                if *m == 0.0 {
                    return (0.0, 0.0);
                }
                let v = e.value_grad(z, scratch);
                (m * v, 2.0 * m.abs() * norm_sqr(scratch).sqrt())
            }
        }
    }
}

pub fn norm_sqr(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

/// Integration domain around the centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Ball(f64),
    Polydisc(f64),
}

impl Domain {
    pub fn radius(&self) -> f64 {
        match self {
            Domain::Ball(r) | Domain::Polydisc(r) => *r,
        }
    }

    pub fn contains(&self, z: &[Complex64]) -> bool {
        match self {
            Domain::Ball(r) => norm_sqr(z) <= r * r,
            Domain::Polydisc(r) => z.iter().all(|c| c.norm_sqr() <= r * r),
        }
    }
}

/// `φ(a + ζ)` together with the weight and domain.
#[derive(Clone, Debug)]
pub struct LocalProblem {
    pub dim: usize,
    pub phi: CompiledExpr,
    pub weight: LocalWeight,
    pub domain: Domain,
}

impl LocalProblem {
    pub fn new(expr: &PshExpr, a: &[Complex64], weight: LocalWeight, domain: Domain) -> Result<Self> {
        let n = a.len();
        let phi = expr.translate(a).compile(n)?;
        Ok(LocalProblem {
            dim: n,
            phi,
            weight,
            domain,
        })
    }
}

/// Uniform direction on the unit sphere of `C^n`.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let r = norm_sqr(&v).sqrt();
        if r > 1e-300 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

/// Standard complex Gaussian with `E|g|² = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(
        rng.sample::<f64, _>(StandardNormal) * s,
        rng.sample::<f64, _>(StandardNormal) * s,
    )
}

/// Open-interval uniform on `(0, 1)`.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}
