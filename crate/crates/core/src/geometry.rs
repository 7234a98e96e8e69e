//! Haar unitaries, random planes, restriction to planes, and the
//! polar/Grassmannian decomposition of Lebesgue measure.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LelongError, Result};
use crate::exec::Exec;
use crate::expr::{ComplexPoint, PolyMap, PshExpr};
use crate::montecarlo::local::{complex_normal, norm_sqr, unit_direction};
use crate::montecarlo::threshold::{estimate_threshold, ThresholdConfig, ThresholdEstimate};
use crate::rng::substream;
use crate::weights::make_radial;

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    pub entries: DMatrix<Complex64>,
}

impl UnitaryMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Operator-norm bound `‖U*U − I‖` (Frobenius, which dominates it).
    pub fn residual(&self) -> f64 {
        let n = self.dim();
        (self.entries.adjoint() * &self.entries - DMatrix::identity(n, n)).norm()
    }

    pub fn apply(&self, z: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.entries[(i, j)] * z[j]).sum())
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.entries[(i, j)]).collect()).collect()
    }

    /// The linear map `z ↦ Uz` as a polynomial map.
    pub fn as_map(&self) -> PolyMap {
        let n = self.dim();
        PolyMap::affine(&vec![Complex64::new(0.0, 0.0); n], &self.rows(), n)
    }
}

/// Haar unitary from `rng`: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` moved into `Q`.
pub fn haar_unitary_from<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| complex_normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix { entries: q }
}

pub fn haar_unitary(n: usize, seed: u64) -> Result<UnitaryMatrix> {
    if n == 0 {
        return Err(LelongError::invalid("dimension must be at least 1"));
    }
    let mut rng = substream(seed, &[0x4841_4152, n as u64]);
    Ok(haar_unitary_from(n, &mut rng))
}

/// A `k`-plane through the origin of `C^n` given by an orthonormal frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    pub frame: DMatrix<Complex64>,
}

impl Subspace {
    pub fn k(&self) -> usize {
        self.frame.ncols()
    }

    pub fn n(&self) -> usize {
        self.frame.nrows()
    }

    pub fn residual(&self) -> f64 {
        let k = self.k();
        (self.frame.adjoint() * &self.frame - DMatrix::identity(k, k)).norm()
    }

    pub fn embed(&self, w: &[Complex64]) -> Vec<Complex64> {
        (0..self.n())
            .map(|i| (0..self.k()).map(|j| self.frame[(i, j)] * w[j]).sum())
            .collect()
    }

    /// Span of the given standard basis vectors.
    pub fn coordinate(n: usize, axes: &[usize]) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|&a| a >= n) {
            return Err(LelongError::invalid("axes out of range"));
        }
        let frame = DMatrix::from_fn(n, axes.len(), |i, j| {
            Complex64::new(if axes[j] == i { 1.0 } else { 0.0 }, 0.0)
        });
        Ok(Subspace { frame })
    }

    fn rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.n())
            .map(|i| (0..self.k()).map(|j| self.frame[(i, j)]).collect())
            .collect()
    }
}

pub fn random_subspace_from<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Result<Subspace> {
    if k == 0 || k > n {
        return Err(LelongError::invalid(format!("need 1 ≤ k ≤ n, got k={k}, n={n}")));
    }
    let u = haar_unitary_from(n, rng);
    Ok(Subspace {
        frame: u.entries.columns(0, k).into_owned(),
    })
}

pub fn random_subspace(k: usize, n: usize, seed: u64) -> Result<Subspace> {
    let mut rng = substream(seed, &[0x5355_4253, k as u64, n as u64]);
    random_subspace_from(k, n, &mut rng)
}

/// `φ` restricted to `T`, as a function of the frame coordinates.
pub fn restrict(expr: &PshExpr, t: &Subspace) -> Result<PshExpr> {
    if expr.arity() > t.n() {
        return Err(LelongError::Arity {
            expected: t.n(),
            found: expr.arity(),
            context: "restriction".into(),
        });
    }
    let map = PolyMap::affine(&vec![Complex64::new(0.0, 0.0); t.n()], &t.rows(), t.k());
    expr.compose(&map)
}

/// Test functions with an independently known integral over `C^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    /// `exp(−Σ λ_i |z_i|²)`, integral `Π π/λ_i`.
    Gaussian { lambdas: Vec<f64> },
    /// Logistic-smoothed indicator of the unit ball, `1/(1 + e^{(|z|²−1)/ε})`.
    SmoothBall { eps: f64 },
}

impl TestFunction {
    pub fn gaussian(n: usize) -> Self {
        TestFunction::Gaussian { lambdas: vec![1.0; n] }
    }

    pub fn value(&self, z: &[Complex64]) -> f64 {
        match self {
            TestFunction::Gaussian { lambdas } => {
                (-lambdas.iter().zip(z).map(|(l, c)| l * c.norm_sqr()).sum::<f64>()).exp()
            }
            TestFunction::SmoothBall { eps } => {
                let x = (norm_sqr(z) - 1.0) / eps;
                if x > 700.0 {
                    0.0
                } else {
                    1.0 / (1.0 + x.exp())
                }
            }
        }
    }

    /// `∫_{C^n} g dλ`.
    pub fn integral(&self, n: usize) -> Result<f64> {
        match self {
            TestFunction::Gaussian { lambdas } => {
                if lambdas.len() != n || lambdas.iter().any(|&l| !(l > 0.0)) {
                    return Err(LelongError::invalid("Gaussian test function needs n positive rates"));
                }
                Ok(lambdas.iter().map(|l| std::f64::consts::PI / l).product())
            }
            TestFunction::SmoothBall { eps } => {
                if !(*eps > 0.0) {
                    return Err(LelongError::invalid("eps must be positive"));
                }
                // radial: c_n ∫ g(r) r^{2n-1} dr = (c_n/2) ∫ g(√ρ) ρ^{n-1} dρ, Simpson in ρ
                let top = 1.0 + 60.0 * eps;
                let m = 20_000;
                let h = top / m as f64;
                let f = |rho: f64| {
                    let x = (rho - 1.0) / eps;
                    rho.powi(n as i32 - 1) / (1.0 + x.exp())
                };
                let mut acc = f(0.0) + f(top);
                for i in 1..m {
                    acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
                }
                Ok(0.5 * sphere_area(n) * acc * h / 3.0)
            }
        }
    }

    /// Standard deviation for the Gaussian importance sampler on planes.
    fn proposal_sigma(&self) -> f64 {
        match self {
            TestFunction::Gaussian { lambdas } => {
                let lmin = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
                (1.0 / lmin).sqrt()
            }
            TestFunction::SmoothBall { .. } => 1.0,
        }
    }
}

/// `c_k`, the area of the unit sphere `S^{2k−1}`: `2π^k/(k−1)!`.
pub fn sphere_area(k: usize) -> f64 {
    let mut v = 2.0 * std::f64::consts::PI.powi(k as i32);
    for j in 1..k {
        v /= j as f64;
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrassmannReport {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    /// Spread of the per-plane integrals (relative standard deviation).
    pub plane_spread: f64,
    pub constant: f64,
}

/// Compares `∫ g dλ_n` with `(c_n/c_k) ∫_G ∫_T |z|^{2(n−k)} g dλ_k dμ(T)`.
pub fn polar_grassmann_check(
    g: &TestFunction,
    k: usize,
    n: usize,
    n_planes: usize,
    n_samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<GrassmannReport> {
    if k == 0 || k > n {
        return Err(LelongError::invalid(format!("need 1 ≤ k ≤ n, got k={k}, n={n}")));
    }
    if n_planes == 0 || n_samples == 0 {
        return Err(LelongError::invalid("need at least one plane and one sample"));
    }
    let lhs = g.integral(n)?;
    let sigma = g.proposal_sigma();
    let per_plane = exec.map(n_planes, |p| {
        let mut rng = substream(seed, &[0x4752_4153, p as u64]);
        let t = random_subspace_from(k, n, &mut rng).expect("k checked");
        // importance sampling with w ~ CN(0, σ² I_k)
        let log_norm = k as f64 * (std::f64::consts::PI * sigma * sigma).ln();
        let mut acc = 0.0;
        for _ in 0..n_samples {
            let w: Vec<Complex64> = (0..k).map(|_| complex_normal(&mut rng) * sigma).collect();
            let r2 = norm_sqr(&w);
            let log_p = -log_norm - r2 / (sigma * sigma);
            let z = t.embed(&w);
            acc += r2.powi((n - k) as i32) * g.value(&z) * (-log_p).exp();
        }
        acc / n_samples as f64
    });
    let mean = per_plane.iter().sum::<f64>() / n_planes as f64;
    let sd = if n_planes > 1 {
        (per_plane.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_planes - 1) as f64).sqrt()
    } else {
        0.0
    };
    let constant = sphere_area(n) / sphere_area(k);
    let rhs = constant * mean;
    Ok(GrassmannReport {
        lhs,
        rhs,
        rel_error: (lhs - rhs).abs() / lhs,
        plane_spread: sd / mean.abs().max(f64::MIN_POSITIVE),
        constant,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineEstimate {
    pub index: usize,
    pub direction: Vec<Complex64>,
    pub estimate: ThresholdEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinesReport {
    pub median: f64,
    /// Median absolute deviation of the per-line values.
    pub mad: f64,
    pub lines: Vec<LineEstimate>,
    /// Set when a sizeable fraction of lines disagrees with the median,
    /// which happens on the exceptional set of directions.
    pub multimodal: bool,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// `φ` on the complex line `a + C·v`, in the line coordinate.
pub fn restrict_to_line(expr: &PshExpr, a: &ComplexPoint, v: &[Complex64]) -> Result<PshExpr> {
    let n = a.dim();
    if expr.arity() > n || v.len() != n {
        return Err(LelongError::Arity {
            expected: n,
            found: expr.arity().max(v.len()),
            context: "line restriction".into(),
        });
    }
    let rows: Vec<Vec<Complex64>> = v.iter().map(|c| vec![*c]).collect();
    let map = PolyMap::affine(&vec![Complex64::new(0.0, 0.0); n], &rows, 1);
    Ok(expr.translate(a.coords()).compose(&map)?.expand())
}

/// Median over Haar-random lines through `a` of the integrability index
/// of `φ` restricted to the line.
pub fn lelong_via_lines(
    expr: &PshExpr,
    a: &ComplexPoint,
    n_lines: usize,
    cfg: &ThresholdConfig,
    seed: u64,
) -> Result<LinesReport> {
    if n_lines < 3 {
        return Err(LelongError::invalid("need at least 3 lines"));
    }
    let n = a.dim();
    let origin = ComplexPoint::origin(1);
    let w = make_radial(0.0, origin.clone())?;
    let mut lines = Vec::with_capacity(n_lines);
    for i in 0..n_lines {
        let mut rng = substream(seed, &[0x4C49_4E45, i as u64]);
        let v = unit_direction(&mut rng, n);
        let restricted = restrict_to_line(expr, a, &v)?;
        let estimate = estimate_threshold(&restricted, &w, &origin, cfg, crate::rng::stream_key(seed, &[i as u64]))?;
        lines.push(LineEstimate {
            index: i,
            direction: v,
            estimate,
        });
    }
    let mut vals: Vec<f64> = lines.iter().map(|l| l.estimate.nu_hat).collect();
    let med = median(&mut vals);
    let mut dev: Vec<f64> = vals.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&mut dev);
    let half_width = lines
        .iter()
        .map(|l| 0.5 * (l.estimate.ci.1 - l.estimate.ci.0))
        .filter(|w| w.is_finite())
        .fold(0.0, f64::max);
    let cut = (3.0 * mad).max(2.0 * half_width).max(cfg.tol);
    let outliers = lines.iter().filter(|l| (l.estimate.nu_hat - med).abs() > cut).count();
    Ok(LinesReport {
        median: med,
        mad,
        multimodal: outliers * 4 > n_lines,
        lines,
    })
}
