//! Property checks built on the threshold oracle.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ams::AmsConfig;
use super::threshold::{bisect, estimate_decay, estimate_threshold, local_problem, ThresholdConfig, ThresholdEstimate};
use crate::error::{LelongError, Result};
use crate::expr::{ComplexPoint, PolyMap, PshExpr};
use crate::rng::stream_key;
use crate::weights::{make_radial, WeightSpec};

/// Half-width of a CI, treating an unbounded side as the estimate itself.
pub fn half_width(e: &ThresholdEstimate) -> f64 {
    let hi = if e.ci.1.is_finite() { e.ci.1 } else { e.nu_hat };
    0.5 * (hi - e.ci.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoelderReport {
    pub nu1: f64,
    pub nu2: f64,
    pub nu_sum: f64,
    pub nu_max: f64,
    pub slack_sum: f64,
    pub slack_max: f64,
    pub subadditive_ok: bool,
    pub max_property_ok: bool,
    pub violations: Vec<String>,
}

/// `ν(φ+φ′) ≤ ν(φ)+ν(φ′)` and `ν(max(φ,φ′)) ≥ min(ν(φ),ν(φ′))`, each up to
/// the summed CI half-widths. All four estimates share one seed.
pub fn hoelder_property_suite(
    e1: &PshExpr,
    e2: &PshExpr,
    w: &WeightSpec,
    a: &ComplexPoint,
    cfg: &ThresholdConfig,
    seed: u64,
) -> Result<HoelderReport> {
    let sum = PshExpr::Sum(vec![e1.clone(), e2.clone()]);
    let max = PshExpr::Max(vec![e1.clone(), e2.clone()]);
    let exprs = [e1, e2, &sum, &max];
    let mut est = Vec::with_capacity(4);
    for e in exprs {
        est.push(estimate_threshold(e, w, a, cfg, seed)?);
    }
    let hw: Vec<f64> = est.iter().map(half_width).collect();
    let nu: Vec<f64> = est.iter().map(|e| e.nu_hat).collect();
    let slack_sum = hw[0] + hw[1] + hw[2];
    let slack_max = hw[0].max(hw[1]) + hw[3];
    let subadditive_ok = nu[2] <= nu[0] + nu[1] + slack_sum;
    let max_property_ok = nu[3] >= nu[0].min(nu[1]) - slack_max;
    let mut violations = Vec::new();
    if !subadditive_ok {
        violations.push(format!("ν(φ+φ′) = {} > {} + {} + {}", nu[2], nu[0], nu[1], slack_sum));
    }
    if !max_property_ok {
        violations.push(format!(
            "ν(max) = {} < min({}, {}) − {}",
            nu[3], nu[0], nu[1], slack_max
        ));
    }
    Ok(HoelderReport {
        nu1: nu[0],
        nu2: nu[1],
        nu_sum: nu[2],
        nu_max: nu[3],
        slack_sum,
        slack_max,
        subadditive_ok,
        max_property_ok,
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub nu: f64,
    pub nu_other: f64,
    /// The value `nu_other` is compared against.
    pub target: f64,
    pub slack: f64,
    pub ok: bool,
}

/// `ν(Scale(c, φ)) = c·ν(φ)` within the combined CI.
pub fn scaling_check(expr: &PshExpr, c: f64, t: f64, n: usize, cfg: &ThresholdConfig, seed: u64) -> Result<PairReport> {
    let a = ComplexPoint::origin(n);
    let w = make_radial(t, a.clone())?;
    let base = estimate_threshold(expr, &w, &a, cfg, seed)?;
    let scaled = estimate_threshold(&expr.clone().scale(c)?, &w, &a, cfg, seed)?;
    let target = c * base.nu_hat;
    let slack = c * half_width(&base) + half_width(&scaled);
    Ok(PairReport {
        nu: base.nu_hat,
        nu_other: scaled.nu_hat,
        target,
        slack,
        ok: (scaled.nu_hat - target).abs() <= slack,
    })
}

/// Determinant of the Jacobian of `f` at the origin.
pub fn jacobian_det_at_origin(f: &PolyMap) -> Result<Complex64> {
    let n = f.n_in();
    if f.n_out() != n {
        return Err(LelongError::invalid("map must be square"));
    }
    let zero = vec![Complex64::new(0.0, 0.0); n];
    let (value, jac) = f.apply_with_jacobian(&zero);
    if value.iter().any(|v| v.norm() > 1e-12) {
        return Err(LelongError::invalid("map must fix the origin"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| jac[i][j]);
    Ok(m.determinant())
}

/// `ν_{0,t}(φ∘f) = ν_{0,t}(φ)` within the combined CI.
pub fn biholo_invariance_check(
    expr: &PshExpr,
    f: &PolyMap,
    t: f64,
    cfg: &ThresholdConfig,
    seed: u64,
) -> Result<PairReport> {
    let det = jacobian_det_at_origin(f)?;
    if det.norm() < 1e-10 {
        return Err(LelongError::invalid("singular Jacobian at the origin"));
    }
    let n = f.n_in();
    let a = ComplexPoint::origin(n);
    let w = make_radial(t, a.clone())?;
    let base = estimate_threshold(expr, &w, &a, cfg, seed)?;
    let composed = estimate_threshold(&expr.compose(f)?.expand(), &w, &a, cfg, seed)?;
    let slack = half_width(&base) + half_width(&composed);
    Ok(PairReport {
        nu: base.nu_hat,
        nu_other: composed.nu_hat,
        target: base.nu_hat,
        slack,
        ok: (composed.nu_hat - base.nu_hat).abs() <= slack,
    })
}

/// The shear `(z1 + c·z2^d, z2, ..., zn)`.
pub fn shear(n: usize, c: Complex64, d: u32) -> Result<PolyMap> {
    use crate::expr::{Exponent, Poly};
    if n < 2 {
        return Err(LelongError::invalid("a shear needs n ≥ 2"));
    }
    let mut comps: Vec<Poly> = (0..n).map(Poly::var).collect();
    comps[0].add_term(Exponent::var(1, d), c);
    PolyMap::new(comps, n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub point: ComplexPoint,
    pub nu_hat: f64,
    pub ci: (f64, f64),
    pub above: bool,
}

fn min_spacing(grid: &[ComplexPoint]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            let d: f64 = grid[i]
                .coords()
                .iter()
                .zip(grid[j].coords())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if d > 0.0 {
                best = best.min(d);
            }
        }
    }
    best
}

/// Per-point thresholds over a grid; the estimation ball shrinks to half
/// the grid spacing so neighbouring singularities stay outside it.
pub fn levelset_scan(
    expr: &PshExpr,
    w: &WeightSpec,
    grid: &[ComplexPoint],
    c: f64,
    cfg: &ThresholdConfig,
    seed: u64,
) -> Result<Vec<ScanPoint>> {
    if grid.is_empty() {
        return Err(LelongError::invalid("grid must be nonempty"));
    }
    if !(c > 0.0) {
        return Err(LelongError::invalid("level must be positive"));
    }
    let mut local = cfg.clone();
    local.radius = cfg.radius.min(0.5 * min_spacing(grid));
    grid.iter()
        .enumerate()
        .map(|(i, p)| {
            let est = estimate_threshold(expr, w, p, &local, stream_key(seed, &[i as u64]))?;
            Ok(ScanPoint {
                point: p.clone(),
                nu_hat: est.nu_hat,
                ci: est.ci,
                above: est.nu_hat >= c,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub eps: f64,
    /// Fitted exponent `e(1)` with weight `(1−ε)ψ`.
    pub exponent: f64,
    pub stderr: f64,
    pub diverges: bool,
    /// `ε < τδ`, where the singularity can be moved onto the weight.
    pub predicted_divergent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub nu: f64,
    pub delta: f64,
    pub tau: f64,
    pub rows: Vec<ShiftRow>,
    pub violations: usize,
}

/// For `ν_{a,ψ}(φ) = 1+δ > 1`, the integral at `s = 1` against `(1−ε)ψ` stays
/// divergent for `ε < τδ`. `nu` is the known (or estimated) threshold.
#[allow(clippy::too_many_arguments)]
pub fn singularity_shift_check(
    expr: &PshExpr,
    w: &WeightSpec,
    a: &ComplexPoint,
    nu: f64,
    tau: f64,
    epsilons: &[f64],
    cfg: &ThresholdConfig,
    seed: u64,
) -> Result<ShiftReport> {
    let delta = nu - 1.0;
    if !(delta > 0.0) {
        return Err(LelongError::invalid(format!("needs ν > 1, got {nu}")));
    }
    if !(tau > 0.0) {
        return Err(LelongError::invalid("τ must be positive"));
    }
    let base = local_problem(expr, w, a, cfg.radius)?;
    let mut rows = Vec::new();
    for (i, &eps) in epsilons.iter().enumerate() {
        if !(0.0..1.0).contains(&eps) {
            return Err(LelongError::invalid(format!("ε must lie in [0, 1), got {eps}")));
        }
        let mut p = base.clone();
        p.weight = base.weight.scaled(1.0 - eps);
        let d = estimate_decay(&p, cfg, stream_key(seed, &[i as u64]));
        let exponent = 2.0 * d.rate - 2.0;
        let stderr = 2.0 * d.stderr;
        rows.push(ShiftRow {
            eps,
            exponent,
            stderr,
            diverges: exponent <= stderr,
            predicted_divergent: eps < tau * delta,
        });
    }
    let violations = rows.iter().filter(|r| r.predicted_divergent && !r.diverges).count();
    Ok(ShiftReport {
        nu,
        delta,
        tau,
        rows,
        violations,
    })
}

/// Reduced budgets for property sweeps.
pub fn quick_config() -> ThresholdConfig {
    ThresholdConfig {
        replicas: 6,
        ams: AmsConfig {
            particles: 120,
            levels: 160,
            mh_steps: 16,
            ..AmsConfig::default()
        },
        ..ThresholdConfig::default()
    }
}

/// Threshold estimate from an already-built problem (used by callers that
/// alter the weight or domain).
pub fn threshold_of(p: &super::local::LocalProblem, cfg: &ThresholdConfig, seed: u64) -> ThresholdEstimate {
    bisect(estimate_decay(p, cfg, seed), cfg, seed)
}
