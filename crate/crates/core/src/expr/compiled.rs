//! Flat evaluation form with Wirtinger gradients.

use num_complex::Complex64;

use super::{log_sum_exp, PshExpr};

#[derive(Clone, Debug)]
struct CTerm {
    coeff: Complex64,
    pows: Vec<(usize, u32)>,
}

#[derive(Clone, Debug)]
struct CPoly {
    terms: Vec<CTerm>,
}

impl CPoly {
    fn eval(&self, z: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut v = t.coeff;
            for &(i, p) in &t.pows {
                v *= z[i].powu(p);
            }
            acc += v;
        }
        acc
    }

    /// `Σ |c_α z^α|`, the scale of the rounding error in `eval`.
    fn eval_abs(&self, z: &[Complex64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.pows
                    .iter()
                    .fold(t.coeff.norm(), |v, &(i, p)| v * z[i].norm().powi(p as i32))
            })
            .sum()
    }

    /// Value, accumulating `∂p/∂z_i` into `grad`.
    fn eval_grad(&self, z: &[Complex64], grad: &mut [Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut full = t.coeff;
            for &(i, p) in &t.pows {
                full *= z[i].powu(p);
            }
            acc += full;
            for (j, &(i, p)) in t.pows.iter().enumerate() {
                let mut d = t.coeff * p as f64 * z[i].powu(p - 1);
                for (k, &(i2, p2)) in t.pows.iter().enumerate() {
                    if k != j {
                        d *= z[i2].powu(p2);
                    }
                }
                grad[i] += d;
            }
        }
        acc
    }
}

#[derive(Clone, Debug)]
enum Node {
    Lsp(Vec<(CPoly, f64)>),
    Scale(f64, Box<Node>),
    Sum(Vec<Node>),
    Max(Vec<Node>),
}

/// Compiled expression on a fixed ambient dimension. Gradients are the
/// holomorphic Wirtinger derivatives `∂φ/∂z_i`; the real gradient norm is
/// `2·|∂φ|`.
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    root: Node,
    dim: usize,
}

impl CompiledExpr {
    pub(crate) fn new(e: &PshExpr, dim: usize) -> Self {
        CompiledExpr { root: build(e), dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, z: &[Complex64]) -> f64 {
        value(&self.root, z)
    }

    /// Value and `∂φ/∂z`, written into `grad` (length `dim`).
    pub fn value_grad(&self, z: &[Complex64], grad: &mut [Complex64]) -> f64 {
        for g in grad.iter_mut() {
            *g = Complex64::new(0.0, 0.0);
        }
        value_grad(&self.root, z, grad)
    }

    /// First-order bound on the rounding error of `value(z)` coming from
    /// cancellation inside the polynomials. Infinite where the value is
    /// `-∞` or a polynomial has no significant digits left.
    pub fn value_error(&self, z: &[Complex64]) -> f64 {
        value_error(&self.root, z)
    }
}

fn build(e: &PshExpr) -> Node {
    match e {
        PshExpr::LogSumPow(terms) => Node::Lsp(
            terms
                .iter()
                .map(|t| {
                    let cp = CPoly {
                        terms: t
                            .poly
                            .terms()
                            .map(|(ex, c)| CTerm {
                                coeff: *c,
                                pows: ex
                                    .powers()
                                    .iter()
                                    .enumerate()
                                    .filter(|(_, &p)| p > 0)
                                    .map(|(i, &p)| (i, p))
                                    .collect(),
                            })
                            .collect(),
                    };
                    (cp, t.exponent)
                })
                .collect(),
        ),
        PshExpr::Scale(c, e) => Node::Scale(*c, Box::new(build(e))),
        PshExpr::Sum(es) => Node::Sum(es.iter().map(build).collect()),
        PshExpr::Max(es) => Node::Max(es.iter().map(build).collect()),
        PshExpr::Compose(..) => unreachable!("compile expands compositions first"),
    }
}

fn value(node: &Node, z: &[Complex64]) -> f64 {
    match node {
        Node::Lsp(terms) => {
            if terms.len() == 1 {
                let (p, a) = &terms[0];
                return a * p.eval(z).norm().ln();
            }
            let logs: Vec<f64> = terms.iter().map(|(p, a)| a * p.eval(z).norm().ln()).collect();
            log_sum_exp(&logs)
        }
        Node::Scale(c, e) => c * value(e, z),
        Node::Sum(es) => {
            let mut acc = 0.0;
            for e in es {
                let v = value(e, z);
                if v == f64::NEG_INFINITY {
                    return v;
                }
                acc += v;
            }
            acc
        }
        Node::Max(es) => es.iter().map(|e| value(e, z)).fold(f64::NEG_INFINITY, f64::max),
    }
}

fn value_error(node: &Node, z: &[Complex64]) -> f64 {
    match node {
        Node::Lsp(terms) => {
            // perturb each |p_j| by its rounding scale and see how far the log-sum moves
            let evals: Vec<(f64, f64, f64)> = terms
                .iter()
                .map(|(p, a)| {
                    let slack = (p.terms.len() + 1) as f64 * f64::EPSILON * p.eval_abs(z);
                    (p.eval(z).norm(), slack, *a)
                })
                .collect();
            let logs: Vec<f64> = evals.iter().map(|(v, _, a)| a * v.ln()).collect();
            let total = log_sum_exp(&logs);
            if total == f64::NEG_INFINITY {
                return f64::INFINITY;
            }
            let rel: f64 = evals
                .iter()
                .zip(&logs)
                .map(|((v, e, a), l)| (a * (v + e).ln() - total).exp() - (l - total).exp())
                .sum();
            rel.ln_1p()
        }
        Node::Scale(c, e) => c.abs() * value_error(e, z),
        Node::Sum(es) => es.iter().map(|e| value_error(e, z)).sum(),
        Node::Max(es) => es.iter().map(|e| value_error(e, z)).fold(0.0, f64::max),
    }
}

fn value_grad(node: &Node, z: &[Complex64], grad: &mut [Complex64]) -> f64 {
    match node {
        Node::Lsp(terms) => {
            let n = z.len();
            let mut logs = Vec::with_capacity(terms.len());
            let mut parts = Vec::with_capacity(terms.len());
            for (p, a) in terms {
                let mut g = vec![Complex64::new(0.0, 0.0); n];
                let v = p.eval_grad(z, &mut g);
                logs.push(a * v.norm().ln());
                parts.push((v, g, *a));
            }
            let total = log_sum_exp(&logs);
            if total == f64::NEG_INFINITY {
                return total;
            }
            for (l, (v, g, a)) in logs.iter().zip(parts) {
                if *l == f64::NEG_INFINITY {
                    continue;
                }
                let w = (l - total).exp();
                let f = w * a * 0.5 / v;
                for (gi, di) in grad.iter_mut().zip(g) {
                    *gi += f * di;
                }
            }
            total
        }
        Node::Scale(c, e) => {
            let mut g = vec![Complex64::new(0.0, 0.0); z.len()];
            let v = value_grad(e, z, &mut g);
            for (gi, di) in grad.iter_mut().zip(g) {
                *gi += c * di;
            }
            c * v
        }
        Node::Sum(es) => {
            let mut acc = 0.0;
            for e in es {
                let v = value_grad(e, z, grad);
                if v == f64::NEG_INFINITY {
                    return v;
                }
                acc += v;
            }
            acc
        }
        Node::Max(es) => {
            let mut best = f64::NEG_INFINITY;
            let mut best_g = vec![Complex64::new(0.0, 0.0); z.len()];
            for e in es {
                let mut g = vec![Complex64::new(0.0, 0.0); z.len()];
                let v = value_grad(e, z, &mut g);
                if v > best {
                    best = v;
                    best_g = g;
                }
            }
            for (gi, di) in grad.iter_mut().zip(best_g) {
                *gi += di;
            }
            best
        }
    }
}
