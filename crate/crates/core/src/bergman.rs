//! Degree-truncated weighted Bergman functions.
//!
//! The space is spanned by `z^γ z^α`, `|α| ≤ D`, with the weight
//! `e^{-2mφ(z) - 2ψ(z-a)}` on `B(0, r)`; `γ` absorbs the monomial factors
//! of `φ` that would otherwise make every basis element non-integrable.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LelongError, Result};
use crate::exec::Exec;
use crate::expr::{CompiledExpr, ComplexPoint, Exponent, Poly, PowTerm, PshExpr};
use crate::montecarlo::local::{norm_sqr, open_unit, unit_direction, LocalWeight};
use crate::montecarlo::profile::shell_volume;
use crate::rng::substream;
use crate::weights::WeightSpec;

/// Dyadic shells around the weight centre used as strata.
const SHELLS: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct BergmanModel {
    pub center: ComplexPoint,
    pub m: u32,
    pub degree: u32,
    pub radius: f64,
    pub gamma: Vec<u32>,
    pub basis: Vec<Vec<u32>>,
    /// `G_{αβ} = ∫ conj(e_α) e_β e^{-2mφ-2ψ(·-a)}`.
    pub gram: DMatrix<Complex64>,
    factor: nalgebra::Cholesky<Complex64, nalgebra::Dyn>,
    pub quadrature: QuadratureSpec,
}

/// Serializable snapshot of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub center: Vec<Complex64>,
    pub m: u32,
    pub degree: u32,
    pub radius: f64,
    pub gamma: Vec<u32>,
    pub basis: Vec<Vec<u32>>,
    pub gram: Vec<Vec<Complex64>>,
    pub factor: Vec<Vec<Complex64>>,
    pub quadrature: QuadratureSpec,
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix, by an
/// independent solver (nalgebra's own stops early on near-degenerate spectra).
fn hermitian_eigen(g: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let d = g.nrows();
    let m = faer::Mat::<Complex64>::from_fn(d, d, |i, j| g[(i, j)]);
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| LelongError::numerical(format!("Gram eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    Ok((
        (0..d).map(|i| s[i].re).collect(),
        DMatrix::from_fn(d, d, |i, j| u[(i, j)]),
    ))
}

/// Multi-indices of total degree ≤ `d` in `n` variables, by degree then
/// lexicographically, so lower degrees form a prefix.
pub fn multi_indices(n: usize, d: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for deg in 0..=d {
        let mut cur = vec![0u32; n];
        fill(&mut out, &mut cur, 0, deg);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, i: usize, left: u32) {
    let n = cur.len();
    if n == 0 {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if i == n - 1 {
        cur[i] = left;
        out.push(cur.clone());
        return;
    }
    for k in (0..=left).rev() {
        cur[i] = k;
        fill(out, cur, i + 1, left - k);
    }
}

/// Total exponent `κ_i` of `z_i` in the top-level monomial factors of `φ`.
pub fn monomial_orders(expr: &PshExpr, n: usize) -> Vec<f64> {
    let mut k = vec![0.0; n];
    collect_orders(&expr.expand(), 1.0, &mut k);
    k
}

fn collect_orders(e: &PshExpr, c: f64, k: &mut [f64]) {
    match e {
        PshExpr::Scale(s, inner) => collect_orders(inner, c * s, k),
        PshExpr::Sum(xs) => xs.iter().for_each(|x| collect_orders(x, c, k)),
        PshExpr::LogSumPow(terms) if terms.len() == 1 => {
            if let Some((_, ex)) = terms[0].poly.as_monomial() {
                for (i, p) in ex.powers().iter().enumerate() {
                    if i < k.len() {
                        k[i] += c * terms[0].exponent * *p as f64;
                    }
                }
            }
        }
        _ => {}
    }
}

/// Smallest integers `γ_i > mκ_i − 1`.
pub fn multiplier(expr: &PshExpr, n: usize, m: u32) -> Vec<u32> {
    monomial_orders(expr, n)
        .into_iter()
        .map(|k| {
            let x = m as f64 * k - 1.0;
            // guard against 1.9999999 for integral products
            let x = if (x - x.round()).abs() < 1e-9 { x.round() } else { x };
            (x.floor() + 1.0).max(0.0) as u32
        })
        .collect()
}

fn basis_values(basis: &[Vec<u32>], gamma: &[u32], z: &[Complex64], out: &mut [Complex64]) {
    let g: Complex64 = gamma.iter().zip(z).map(|(&p, zi)| zi.powu(p)).product();
    for (o, a) in out.iter_mut().zip(basis) {
        *o = g * a.iter().zip(z).map(|(&p, zi)| zi.powu(p)).product::<Complex64>();
    }
}

fn sample_shell<R: Rng + ?Sized>(rng: &mut R, n: usize, r1: f64, r2: f64) -> Vec<Complex64> {
    let q = (r1 / r2).powi(2 * n as i32);
    let rad = r2 * (q + open_unit(rng) * (1.0 - q)).powf(1.0 / (2 * n) as f64);
    unit_direction(rng, n).into_iter().map(|c| c * rad).collect()
}

struct Integrand<'a> {
    phi: CompiledExpr,
    weight: LocalWeight,
    a: &'a [Complex64],
    m: f64,
    r: f64,
}

impl Integrand<'_> {
    /// Weight at `z`, or `None` outside the domain.
    fn weight(&self, z: &[Complex64]) -> Option<f64> {
        if norm_sqr(z) > self.r * self.r {
            return None;
        }
        let zeta: Vec<Complex64> = z.iter().zip(self.a).map(|(x, a)| x - a).collect();
        let arg = -2.0 * self.m * self.phi.value(z) - 2.0 * self.weight.psi(&zeta);
        if arg.is_nan() {
            return Some(0.0);
        }
        Some(arg.min(700.0).exp())
    }
}

/// Gram matrix by stratified sampling over dyadic shells around `a`
/// clipped to `B(0, r)`, plus the innermost ball.
fn gram_matrix(
    it: &Integrand,
    basis: &[Vec<u32>],
    gamma: &[u32],
    n: usize,
    q: &QuadratureSpec,
    exec: Exec,
) -> DMatrix<Complex64> {
    let dim = basis.len();
    let a_norm = norm_sqr(it.a).sqrt();
    let outer = it.r + a_norm;
    let per = (q.samples / (SHELLS + 1)).max(1);
    let parts = exec.map(SHELLS + 1, |k| {
        let mut rng = substream(q.seed, &[0x4245_5247, k as u64]);
        let (r1, r2) = if k < SHELLS {
            (outer * 0.5f64.powi(k as i32 + 1), outer * 0.5f64.powi(k as i32))
        } else {
            (0.0, outer * 0.5f64.powi(SHELLS as i32))
        };
        let vol = shell_volume(n, r1, r2);
        let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        for _ in 0..per {
            let zeta = sample_shell(&mut rng, n, r1, r2);
            let z: Vec<Complex64> = zeta.iter().zip(it.a).map(|(x, a)| x + a).collect();
            let Some(w) = it.weight(&z) else { continue };
            if w == 0.0 {
                continue;
            }
            basis_values(basis, gamma, &z, &mut v);
            for i in 0..dim {
                let ci = v[i].conj() * w;
                for j in i..dim {
                    acc[(i, j)] += ci * v[j];
                }
            }
        }
        acc * Complex64::new(vol / per as f64, 0.0)
    });
    let mut g = DMatrix::<Complex64>::zeros(dim, dim);
    for p in parts {
        g += p;
    }
    for i in 0..dim {
        g[(i, i)] = Complex64::new(g[(i, i)].re, 0.0);
        for j in 0..i {
            g[(i, j)] = g[(j, i)].conj();
        }
    }
    g
}

/// Eigenvalue floor relative to the trace below which a model is rejected.
pub const GRAM_FLOOR: f64 = 1e-12;

#[allow(clippy::too_many_arguments)]
pub fn build_model(
    expr: &PshExpr,
    w: &WeightSpec,
    a: &ComplexPoint,
    m: u32,
    degree: u32,
    radius: f64,
    quad: &QuadratureSpec,
    exec: Exec,
) -> Result<BergmanModel> {
    let n = a.dim();
    if m == 0 {
        return Err(LelongError::invalid("m must be a positive integer"));
    }
    if !(radius > 0.0) {
        return Err(LelongError::invalid("radius must be positive"));
    }
    if quad.samples < 64 {
        return Err(LelongError::invalid("need at least 64 quadrature samples"));
    }
    if w.dim() != n || expr.arity() > n {
        return Err(LelongError::Arity {
            expected: n,
            found: w.dim().max(expr.arity()),
            context: "Bergman model".into(),
        });
    }
    let it = Integrand {
        phi: expr.compile(n)?,
        weight: LocalWeight::from_spec(w, n)?,
        a: a.coords(),
        m: m as f64,
        r: radius,
    };
    let gamma = multiplier(expr, n, m);
    let basis = multi_indices(n, degree);
    let gram = gram_matrix(&it, &basis, &gamma, n, quad, exec);
    let trace: f64 = (0..gram.nrows()).map(|i| gram[(i, i)].re).sum();
    if !(trace.is_finite() && trace > 0.0) {
        return Err(LelongError::numerical(format!(
            "Gram matrix has trace {trace}; the weight is not integrable or the sample is too small"
        )));
    }
    let lmin = hermitian_eigen(&gram)?.0[0];
    if !(lmin > GRAM_FLOOR * trace) {
        return Err(LelongError::numerical(format!(
            "Gram matrix nearly singular: λ_min = {lmin:e}, trace = {trace:e}"
        )));
    }
    let factor = gram
        .clone()
        .cholesky()
        .ok_or_else(|| LelongError::numerical("Cholesky factorization failed"))?;
    Ok(BergmanModel {
        center: a.clone(),
        m,
        degree,
        radius,
        gamma,
        basis,
        gram,
        factor,
        quadrature: quad.clone(),
    })
}

impl BergmanModel {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `conj(e_α(z))`, the vector paired with `G^{-1}`.
    fn eval_vector(&self, z: &[Complex64]) -> DVector<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim()];
        basis_values(&self.basis, &self.gamma, z, &mut v);
        DVector::from_iterator(v.len(), v.into_iter().map(|c| c.conj()))
    }

    fn check_point(&self, z: &ComplexPoint) -> Result<()> {
        if z.dim() != self.center.dim() {
            return Err(LelongError::Arity {
                expected: self.center.dim(),
                found: z.dim(),
                context: "Bergman evaluation".into(),
            });
        }
        if z.norm() > self.radius {
            return Err(LelongError::invalid(format!(
                "point |z| = {} outside the domain radius {}",
                z.norm(),
                self.radius
            )));
        }
        Ok(())
    }

    /// `sup{|h(z)|² : ‖h‖ ≤ 1}` over the truncated space.
    pub fn bergman_value(&self, z: &ComplexPoint) -> Result<f64> {
        self.check_point(z)?;
        let u = self.eval_vector(z.coords());
        let x = self.factor.solve(&u);
        Ok(u.dotc(&x).re.max(0.0))
    }

    /// The same supremum from the eigendecomposition of the Gram matrix.
    pub fn bergman_value_eigen(&self, z: &ComplexPoint) -> Result<f64> {
        self.check_point(z)?;
        let u = self.eval_vector(z.coords());
        let (vals, vecs) = hermitian_eigen(&self.gram)?;
        Ok(vals
            .iter()
            .zip(vecs.column_iter())
            .map(|(l, v)| v.dotc(&u).norm_sqr() / l)
            .sum())
    }

    /// Eigenvalues of the Gram matrix, ascending.
    pub fn gram_eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eigen(&self.gram)?.0)
    }

    /// `(1/2m) log B(z)`.
    pub fn psi_m(&self, z: &ComplexPoint) -> Result<f64> {
        let b = self.bergman_value(z)?;
        if !(b > 0.0) {
            return Err(LelongError::numerical("Bergman value vanishes at the point"));
        }
        Ok(b.ln() / (2.0 * self.m as f64))
    }

    /// Coefficients `c` of the kernel column at `z`: `⟨h, K_z⟩ = h(z)` for
    /// every `h` in the span, with `⟨h, k⟩ = k* G h`.
    pub fn kernel_coefficients(&self, z: &ComplexPoint) -> Result<DVector<Complex64>> {
        self.check_point(z)?;
        Ok(self.factor.solve(&self.eval_vector(z.coords())))
    }

    /// `⟨h, k⟩` in the weighted norm.
    pub fn inner(&self, h: &DVector<Complex64>, k: &DVector<Complex64>) -> Complex64 {
        k.dotc(&(&self.gram * h))
    }

    /// `h(z)` for coefficients `h`.
    pub fn eval_element(&self, h: &DVector<Complex64>, z: &[Complex64]) -> Complex64 {
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim()];
        basis_values(&self.basis, &self.gamma, z, &mut v);
        v.iter().zip(h.iter()).map(|(a, b)| a * b).sum()
    }

    /// `Ψ = (1/2m) log B(·)` as an expression: with `G = LL*`,
    /// `B(z) = Σ_j |q_j(z)|²` where `q_j = Σ_α conj((L⁻¹)_{jα}) z^{γ+α}`.
    pub fn psi_expr(&self) -> Result<PshExpr> {
        let d = self.dim();
        let linv = self
            .factor
            .l()
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or_else(|| LelongError::numerical("singular Cholesky factor"))?;
        let terms = (0..d)
            .map(|j| {
                let poly = Poly::from_terms(self.basis.iter().enumerate().map(|(i, a)| {
                    let e: Vec<u32> = a.iter().zip(&self.gamma).map(|(x, g)| x + g).collect();
                    (Exponent::new(e), linv[(j, i)].conj())
                }));
                PowTerm::new(poly, 2.0)
            })
            .filter(|t| !t.poly.is_zero())
            .collect();
        PshExpr::LogSumPow(terms).scale(0.5 / self.m as f64)
    }

    pub fn hermitian_residual(&self) -> f64 {
        (&self.gram - self.gram.adjoint()).norm() / self.gram.norm()
    }

    pub fn dump(&self) -> ModelDump {
        let rows = |m: &DMatrix<Complex64>| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        };
        ModelDump {
            center: self.center.coords().to_vec(),
            m: self.m,
            degree: self.degree,
            radius: self.radius,
            gamma: self.gamma.clone(),
            basis: self.basis.clone(),
            gram: rows(&self.gram),
            factor: rows(&self.factor.l()),
            quadrature: self.quadrature.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub m: u32,
    pub point: Vec<Complex64>,
    pub phi: f64,
    pub psi: f64,
    pub sup_phi: f64,
    /// `m(φ − Ψ)`; the lower bound needs this below `c1`.
    pub lower_gap: f64,
    /// `m(Ψ − sup φ) − (l − n) log r′`; the upper bound needs this below `c2`.
    pub upper_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub c1: f64,
    pub c2: f64,
    pub margin: f64,
    pub fit_ms: Vec<u32>,
    pub check_ms: Vec<u32>,
    pub rows: Vec<SandwichRow>,
    pub violations: usize,
    /// `max |Ψ − φ|` per `m`, in `m` order.
    pub widths: Vec<(u32, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichParams {
    pub t: f64,
    pub l: f64,
    pub delta: f64,
    pub r_prime: f64,
    pub degree: u32,
    pub radius: f64,
    pub samples: usize,
}

/// `φ − c1/m ≤ Ψ_z^m(z) ≤ sup_{|ζ−z|<r′} φ + (l−n) log r′/m + c2/m`.
///
/// `c1`, `c2` are fitted on the smaller half of `m_list`; the larger half
/// is then checked against them with an allowance `margin` for quadrature
/// noise, measured by rebuilding each model with a second seed.
pub fn sandwich_check(
    expr: &PshExpr,
    points: &[ComplexPoint],
    m_list: &[u32],
    p: &SandwichParams,
    seed: u64,
    exec: Exec,
) -> Result<SandwichReport> {
    if points.is_empty() || m_list.len() < 2 {
        return Err(LelongError::invalid("need points and at least two values of m"));
    }
    let n = points[0].dim();
    if !(p.delta > 0.0 && p.delta < 1.0) {
        return Err(LelongError::invalid("δ must lie in (0, 1)"));
    }
    // ψ = t log|z| satisfies l log|z| ≥ ψ ≥ (n−δ) log|z| near 0 iff l ≤ t ≤ n−δ
    if !(p.l <= p.t && p.t <= n as f64 - p.delta) {
        return Err(LelongError::invalid(format!(
            "need l ≤ t ≤ n−δ, got l={}, t={}, n−δ={}",
            p.l,
            p.t,
            n as f64 - p.delta
        )));
    }
    let mut ms = m_list.to_vec();
    ms.sort_unstable();
    ms.dedup();
    let split = ms.len().div_ceil(2);
    let fit_ms = ms[..split].to_vec();
    let check_ms = ms[split..].to_vec();
    let compiled = expr.compile(n)?;
    let mut rows = Vec::new();
    let mut noise: f64 = 0.0;
    for (pi, z) in points.iter().enumerate() {
        let phi = compiled.value(z.coords());
        if !phi.is_finite() {
            return Err(LelongError::invalid("test points must have φ > −∞"));
        }
        let sup_phi = sup_on_ball(&compiled, z.coords(), p.r_prime, seed ^ pi as u64);
        for &m in &ms {
            let w = crate::weights::make_radial(p.t, z.clone())?;
            let mut psis = [0.0; 2];
            for (k, psi) in psis.iter_mut().enumerate() {
                let quad = QuadratureSpec {
                    samples: p.samples,
                    seed: crate::rng::stream_key(seed, &[pi as u64, m as u64, k as u64]),
                };
                let model = build_model(expr, &w, z, m, p.degree, p.radius, &quad, exec)?;
                *psi = model.psi_m(z)?;
            }
            noise = noise.max(m as f64 * (psis[0] - psis[1]).abs());
            let psi = psis[0];
            rows.push(SandwichRow {
                m,
                point: z.coords().to_vec(),
                phi,
                psi,
                sup_phi,
                lower_gap: m as f64 * (phi - psi),
                upper_gap: m as f64 * (psi - sup_phi) - (p.l - n as f64) * p.r_prime.ln(),
            });
        }
    }
    let margin = 3.0 * noise + 0.05;
    let fit = |f: &dyn Fn(&SandwichRow) -> f64| {
        rows.iter()
            .filter(|r| fit_ms.contains(&r.m))
            .map(f)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let c1 = fit(&|r| r.lower_gap);
    let c2 = fit(&|r| r.upper_gap);
    let violations = rows
        .iter()
        .filter(|r| check_ms.contains(&r.m))
        .filter(|r| r.lower_gap > c1 + margin || r.upper_gap > c2 + margin)
        .count();
    let widths = ms
        .iter()
        .map(|&m| {
            let w = rows
                .iter()
                .filter(|r| r.m == m)
                .map(|r| (r.psi - r.phi).abs())
                .fold(0.0, f64::max);
            (m, w)
        })
        .collect();
    Ok(SandwichReport {
        c1,
        c2,
        margin,
        fit_ms,
        check_ms,
        rows,
        violations,
        widths,
    })
}

/// Sampled `sup φ` over `B(z, ρ)` (a lower estimate of the true sup).
fn sup_on_ball(phi: &CompiledExpr, z: &[Complex64], rho: f64, seed: u64) -> f64 {
    let n = z.len();
    let mut rng = substream(seed, &[0x5355_5050]);
    let mut best = phi.value(z);
    for _ in 0..4096 {
        let rad = rho * open_unit(&mut rng).powf(1.0 / (2 * n) as f64);
        let p: Vec<Complex64> = unit_direction(&mut rng, n)
            .into_iter()
            .zip(z)
            .map(|(d, c)| c + d * rad)
            .collect();
        best = best.max(phi.value(&p));
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttenuationPoint {
    pub point: Vec<Complex64>,
    /// Shell-sup slope of `log B_z(z)` at the point.
    pub slope: f64,
    pub stderr: f64,
    pub positive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttenuationParams {
    pub t: f64,
    pub m: u32,
    pub degree: u32,
    pub radius: f64,
    pub samples: usize,
    /// Radii `ρ_j = rho0·2^{-j}` for `j = 0..shells`.
    pub rho0: f64,
    pub shells: usize,
    pub points_per_shell: usize,
}

impl Default for AttenuationParams {
    fn default() -> Self {
        AttenuationParams {
            t: 1.0,
            m: 1,
            degree: 4,
            radius: 0.5,
            samples: 6000,
            rho0: 0.1,
            shells: 6,
            points_per_shell: 6,
        }
    }
}

/// Classical Lelong number of `z ↦ log B_z(z)` at each grid point from the
/// slope of shell suprema against `log ρ`.
pub fn attenuation_probe(
    expr: &PshExpr,
    grid: &[ComplexPoint],
    p: &AttenuationParams,
    seed: u64,
    exec: Exec,
) -> Result<Vec<AttenuationPoint>> {
    let mut out = Vec::new();
    for (gi, g) in grid.iter().enumerate() {
        let n = g.dim();
        let mut pts = Vec::new();
        for j in 0..p.shells {
            let rho = p.rho0 * 0.5f64.powi(j as i32);
            let mut rng = substream(seed, &[0x4154_544E, gi as u64, j as u64]);
            let mut best = f64::NEG_INFINITY;
            for s in 0..p.points_per_shell {
                let z: Vec<Complex64> = unit_direction(&mut rng, n)
                    .into_iter()
                    .zip(g.coords())
                    .map(|(d, c)| c + d * rho)
                    .collect();
                let z = ComplexPoint::new(z)?;
                let w = crate::weights::make_radial(p.t, z.clone())?;
                let quad = QuadratureSpec {
                    samples: p.samples,
                    seed: crate::rng::stream_key(seed, &[gi as u64, j as u64, s as u64]),
                };
                let model = build_model(expr, &w, &z, p.m, p.degree, p.radius, &quad, exec)?;
                let b = model.bergman_value(&z)?;
                best = best.max(b.ln());
            }
            pts.push((rho.ln(), best));
        }
        let (slope, stderr) = crate::weights::ols_slope_stderr(&pts);
        out.push(AttenuationPoint {
            point: g.coords().to_vec(),
            slope,
            stderr,
            positive: slope > 0.5 && slope > 3.0 * stderr,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::weights::make_radial;
    use std::f64::consts::PI;

    fn quad(samples: usize) -> QuadratureSpec {
        QuadratureSpec { samples, seed: 5 }
    }

    #[test]
    fn eigen_oracle_resolves_close_eigenvalues() {
        let lambdas = [10.0, 0.4, 0.4 + 1e-9, 2e-4, 2.1e-4, 1.3e-5, 1.4e-5];
        let d = lambdas.len();
        let u = crate::geometry::haar_unitary(d, 11).unwrap().entries;
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            lambdas.iter().map(|&l| Complex64::new(l, 0.0)),
        ));
        let g = &u * diag * u.adjoint();
        let g = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
        let (ev, vecs) = hermitian_eigen(&g).unwrap();
        let mut want = lambdas.to_vec();
        want.sort_by(|a, b| a.total_cmp(b));
        for (x, y) in ev.iter().zip(&want) {
            assert!((x - y).abs() < 1e-13, "{x} vs {y}");
        }
        let rebuilt = &vecs
            * DMatrix::from_diagonal(&DVector::from_iterator(d, ev.iter().map(|&l| Complex64::new(l, 0.0))))
            * vecs.adjoint();
        assert!((rebuilt - &g).norm() < 1e-13 * g.norm());
    }

    #[test]
    fn indices_are_graded() {
        let b = multi_indices(2, 2);
        assert_eq!(
            b,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(multi_indices(3, 4).len(), 35);
        assert_eq!(&multi_indices(2, 6)[..b.len()], &b[..]);
    }

    #[test]
    fn multiplier_orders() {
        let e = parse("log(|z1|^1) + 0.5*log(|1|^2 + |z2|^2)").unwrap();
        assert_eq!(multiplier(&e, 2, 1), vec![1, 0]);
        assert_eq!(multiplier(&e, 2, 4), vec![4, 0]);
        let e = parse("0.3*log(|z1|^1)").unwrap();
        assert_eq!(multiplier(&e, 2, 1), vec![0, 0]);
        assert_eq!(multiplier(&e, 2, 8), vec![2, 0]);
        let e = parse("log(|z1^2*z2^2|^1)").unwrap();
        assert_eq!(multiplier(&e, 2, 1), vec![2, 2]);
    }

    #[test]
    fn disc_moments() {
        let a = ComplexPoint::origin(1);
        let w = make_radial(0.0, a.clone()).unwrap();
        let m = build_model(&PshExpr::zero(), &w, &a, 1, 1, 1.0, &quad(200_000), Exec::Parallel).unwrap();
        assert!((m.gram[(0, 0)].re - PI).abs() < 0.01 * PI);
        assert!((m.gram[(1, 1)].re - PI / 2.0).abs() < 0.02 * PI);
        assert!(m.gram[(0, 1)].norm() < 0.02);
        assert!(m.hermitian_residual() <= 1e-10);
        let b0 = build_model(&PshExpr::zero(), &w, &a, 1, 0, 1.0, &quad(200_000), Exec::Parallel).unwrap();
        assert!((b0.bergman_value(&a).unwrap() - 1.0 / PI).abs() < 0.01 / PI);
    }

    #[test]
    fn oracle_monotonicity_and_reproducing() {
        let a = ComplexPoint::real(&[0.05, -0.02]).unwrap();
        let w = make_radial(1.0, a.clone()).unwrap();
        let e = parse("log(|z1|^1) + 0.5*log(|1|^2 + |z2|^2)").unwrap();
        let models: Vec<BergmanModel> = (0..=4)
            .map(|d| build_model(&e, &w, &a, 1, d, 0.5, &quad(20_000), Exec::Parallel).unwrap())
            .collect();
        let z = ComplexPoint::real(&[0.1, 0.2]).unwrap();
        let mut last = 0.0;
        for m in &models {
            let b = m.bergman_value(&z).unwrap();
            let o = m.bergman_value_eigen(&z).unwrap();
            assert!((b - o).abs() <= 1e-8 * o, "{b} vs {o}");
            assert!(b >= last * (1.0 - 1e-10));
            last = b;
        }
        let m = &models[3];
        let k = m.kernel_coefficients(&z).unwrap();
        for j in 0..m.dim() {
            let mut h = DVector::zeros(m.dim());
            h[j] = Complex64::new(1.0, 0.5);
            let lhs = m.inner(&h, &k);
            let rhs = m.eval_element(&h, z.coords());
            assert!((lhs - rhs).norm() <= 1e-8 * rhs.norm().max(1e-300));
        }
    }

    #[test]
    fn psi_expression_matches_model() {
        let a = ComplexPoint::origin(2);
        let w = make_radial(1.0, a.clone()).unwrap();
        let e = parse("log(|z1*z2^2|^1)").unwrap();
        let m = build_model(&e, &w, &a, 2, 3, 0.5, &quad(8000), Exec::Sequential).unwrap();
        let psi = m.psi_expr().unwrap();
        for p in [[0.1, 0.2], [-0.3, 0.05], [0.2, -0.2]] {
            let z = ComplexPoint::real(&p).unwrap();
            let (x, y) = (psi.evaluate(z.coords()).unwrap(), m.psi_m(&z).unwrap());
            assert!((x - y).abs() < 1e-9 * y.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn rejections() {
        let a = ComplexPoint::origin(1);
        let w = make_radial(0.0, a.clone()).unwrap();
        let e = PshExpr::zero();
        assert!(build_model(&e, &w, &a, 0, 1, 1.0, &quad(1000), Exec::Sequential).is_err());
        assert!(build_model(&e, &w, &a, 1, 1, 1.0, &quad(10), Exec::Sequential).is_err());
        let m = build_model(&e, &w, &a, 1, 1, 1.0, &quad(1000), Exec::Sequential).unwrap();
        assert!(m.bergman_value(&ComplexPoint::real(&[2.0]).unwrap()).is_err());
        // far too few samples for degree 6 in the disc: near-singular Gram
        let r = build_model(&e, &w, &a, 1, 12, 1.0, &quad(64), Exec::Sequential);
        assert!(r.is_err());
    }

    #[test]
    fn deterministic_across_modes() {
        let a = ComplexPoint::origin(2);
        let w = make_radial(1.0, a.clone()).unwrap();
        let e = parse("log(|z1|^1)").unwrap();
        let x = build_model(&e, &w, &a, 1, 2, 0.5, &quad(3000), Exec::Parallel).unwrap();
        let y = build_model(&e, &w, &a, 1, 2, 0.5, &quad(3000), Exec::Sequential).unwrap();
        assert_eq!(x.gram, y.gram);
    }
}
