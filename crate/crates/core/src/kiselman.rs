//! Kiselman's directed Lelong numbers
//! `ν_w(φ, a) = lim sup_{|z_i − w_i| = r^{a_i}} φ / log r`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{LelongError, Result};
use crate::exec::Exec;
use crate::expr::{ComplexPoint, PolyMap, PshExpr};
use crate::geometry::{haar_unitary, restrict_to_line, UnitaryMatrix};
use crate::montecarlo::local::{Domain, LocalProblem, LocalWeight};
use crate::montecarlo::threshold::{converges, estimate_decay, exponent_at, CurvePoint, ThresholdConfig};
use crate::rng::substream;
use crate::weights::ols_slope_stderr;

/// Shells entering the slope fit.
pub const FIT_SHELLS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSpec {
    pub a_dirs: Vec<f64>,
    pub rational: Option<(Vec<u32>, u32)>,
}

impl DirectionSpec {
    pub fn new(a_dirs: Vec<f64>) -> Result<Self> {
        if a_dirs.is_empty() || a_dirs.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(LelongError::invalid("directions must be finite and nonnegative"));
        }
        if a_dirs.iter().all(|&a| a == 0.0) {
            return Err(LelongError::invalid("at least one direction must be positive"));
        }
        Ok(DirectionSpec { a_dirs, rational: None })
    }

    /// `a_i = p_i / q`.
    pub fn rational(p: Vec<u32>, q: u32) -> Result<Self> {
        if q == 0 || p.contains(&0) {
            return Err(LelongError::invalid("p_i and q must be positive integers"));
        }
        let mut d = DirectionSpec::new(p.iter().map(|&x| x as f64 / q as f64).collect())?;
        d.rational = Some((p, q));
        Ok(d)
    }

    pub fn ones(n: usize) -> Self {
        DirectionSpec::rational(vec![1; n], 1).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.a_dirs.len()
    }

    /// `c·a`; the rational form is dropped.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        DirectionSpec::new(self.a_dirs.iter().map(|a| c * a).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KiselmanConfig {
    /// Decreasing radii.
    pub radii: Vec<f64>,
    pub samples_per_shell: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for KiselmanConfig {
    fn default() -> Self {
        KiselmanConfig {
            radii: geometric_radii(0.2, 0.5, 10),
            samples_per_shell: 4096,
            exec: Exec::Parallel,
        }
    }
}

pub fn geometric_radii(r0: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| r0 * ratio.powi(j as i32)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSup {
    pub r: f64,
    pub shell_sup: f64,
    pub quotient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalEstimate {
    pub nu: f64,
    pub stderr: f64,
    pub shells: Vec<ShellSup>,
    pub warnings: Vec<String>,
}

/// Additive recurrence with the generalized golden ratio; fractional parts
/// of `k·α` fill the torus evenly.
fn kronecker_steps(n: usize) -> Vec<f64> {
    let mut g = 2.0f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (n + 1) as f64);
    }
    (1..=n).map(|i| g.powi(-(i as i32)).fract()).collect()
}

fn shell_sup(
    phi: &crate::expr::CompiledExpr,
    w: &[Complex64],
    radii: &[f64],
    samples: usize,
    steps: &[f64],
    shift: &[f64],
) -> f64 {
    let n = w.len();
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    let mut best = f64::NEG_INFINITY;
    for k in 0..samples {
        for i in 0..n {
            let th = TAU * (shift[i] + k as f64 * steps[i]).fract();
            z[i] = w[i] + Complex64::from_polar(radii[i], th);
        }
        let v = phi.value(&z);
        if v > best {
            best = v;
        }
    }
    best
}

/// Shell suprema on the tori `|z_i − w_i| = r_j^{a_i}` and the slope of
/// `S_j` against `log r_j` over the smallest shells.
pub fn directional_nu(
    expr: &PshExpr,
    w: &ComplexPoint,
    dirs: &DirectionSpec,
    cfg: &KiselmanConfig,
    seed: u64,
) -> Result<DirectionalEstimate> {
    let n = w.dim();
    if dirs.dim() != n || expr.arity() > n {
        return Err(LelongError::Arity {
            expected: n,
            found: dirs.dim().max(expr.arity()),
            context: "directional Lelong number".into(),
        });
    }
    if cfg.radii.len() < FIT_SHELLS {
        return Err(LelongError::invalid(format!("need at least {FIT_SHELLS} radii")));
    }
    if cfg.radii.iter().any(|r| !(*r > 0.0 && *r < 1.0)) || cfg.radii.windows(2).any(|p| p[1] >= p[0]) {
        return Err(LelongError::invalid("radii must decrease within (0, 1)"));
    }
    if cfg.samples_per_shell == 0 {
        return Err(LelongError::invalid("need at least one sample per shell"));
    }
    let phi = expr.compile(n)?;
    let steps = kronecker_steps(n);
    let sups = cfg.exec.map(cfg.radii.len(), |j| {
        let mut rng = substream(seed, &[0x4B49_5345, j as u64]);
        let shift: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let rs: Vec<f64> = dirs.a_dirs.iter().map(|a| cfg.radii[j].powf(*a)).collect();
        shell_sup(&phi, w.coords(), &rs, cfg.samples_per_shell, &steps, &shift)
    });
    let mut warnings = Vec::new();
    let mut shells = Vec::new();
    for (r, s) in cfg.radii.iter().zip(sups) {
        if s == f64::NEG_INFINITY || s.is_nan() {
            warnings.push(format!("shell r={r:e} lies in the singular locus; skipped"));
            continue;
        }
        shells.push(ShellSup {
            r: *r,
            shell_sup: s,
            quotient: s / r.ln(),
        });
    }
    if shells.len() < 2 {
        return Err(LelongError::numerical("fewer than two usable shells"));
    }
    let start = shells.len().saturating_sub(FIT_SHELLS);
    let pts: Vec<(f64, f64)> = shells[start..].iter().map(|s| (s.r.ln(), s.shell_sup)).collect();
    let (nu, stderr) = ols_slope_stderr(&pts);
    Ok(DirectionalEstimate {
        nu,
        stderr,
        shells,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleReport {
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub ok: bool,
}

/// `ν_0(φ, p/q)` against `q^{-1} ν_0(φ(z_1^{p_1}, …, z_n^{p_n}))`.
pub fn rescale_identity_check(
    expr: &PshExpr,
    p: &[u32],
    q: u32,
    cfg: &KiselmanConfig,
    seed: u64,
) -> Result<RescaleReport> {
    let n = p.len();
    let dirs = DirectionSpec::rational(p.to_vec(), q)?;
    let origin = ComplexPoint::origin(n);
    let lhs = directional_nu(expr, &origin, &dirs, cfg, seed)?;
    let composed = expr.compose(&PolyMap::power_map(p))?.expand();
    let rhs = directional_nu(&composed, &origin, &DirectionSpec::ones(n), cfg, seed)?;
    let r = rhs.nu / q as f64;
    let tolerance = (4.0 * lhs.stderr.hypot(rhs.stderr / q as f64)).max(0.02);
    Ok(RescaleReport {
        lhs: lhs.nu,
        rhs: r,
        tolerance,
        ok: (lhs.nu - r).abs() <= tolerance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralReport {
    pub p: Vec<u32>,
    pub q: u32,
    pub directional: DirectionalEstimate,
    pub nu_below_one: bool,
    /// `e(q)` of the anisotropic weighted integral.
    pub exponent: CurvePoint,
    pub integral_converges: bool,
    pub agree: bool,
    /// Orders of `φ∘U` along the coordinate axes.
    pub axis_orders: Vec<f64>,
    /// Order along a random line, the classical Lelong number.
    pub generic_order: f64,
    /// Some axis sees a larger order than a generic line, so the axes are
    /// in special position for `φ∘U`.
    pub non_generic: bool,
}

/// Compares `ν_0(φ∘U, p/q) < 1` with convergence of
/// `∫ e^{−2φ∘U/q − 2Σ(1 − 1/(n p_i)) log|z_i|}` near 0.
pub fn directional_integral_check(
    expr: &PshExpr,
    dirs: &DirectionSpec,
    rotation: &UnitaryMatrix,
    kcfg: &KiselmanConfig,
    tcfg: &ThresholdConfig,
    seed: u64,
) -> Result<IntegralReport> {
    let Some((p, q)) = dirs.rational.clone() else {
        return Err(LelongError::invalid(
            "the integral test needs rational directions p_i/q",
        ));
    };
    tcfg.validate()?;
    let n = dirs.dim();
    if rotation.dim() != n {
        return Err(LelongError::Arity {
            expected: n,
            found: rotation.dim(),
            context: "rotation".into(),
        });
    }
    let rotated = expr.compose(&rotation.as_map())?.expand();
    let origin = ComplexPoint::origin(n);
    let directional = directional_nu(&rotated, &origin, dirs, kcfg, seed)?;
    let nu_below_one = directional.nu < 1.0;

    let beta: Vec<f64> = p.iter().map(|&pi| 1.0 - 1.0 / (n as f64 * pi as f64)).collect();
    let problem = LocalProblem::new(
        &rotated,
        origin.coords(),
        LocalWeight::Product(beta),
        Domain::Polydisc(tcfg.radius),
    )?;
    let decay = estimate_decay(&problem, tcfg, seed);
    let exponent = exponent_at(&decay, q as f64);
    let integral_converges = converges(&exponent);

    let zero = Complex64::new(0.0, 0.0);
    let axis_orders = (0..n)
        .map(|i| {
            let mut v = vec![zero; n];
            v[i] = Complex64::new(1.0, 0.0);
            restrict_to_line(&rotated, &origin, &v).map(|e| e.order_at_origin_1d())
        })
        .collect::<Result<Vec<f64>>>()?;
    let u = haar_unitary(n, seed ^ 0x4C49_4E45)?;
    let line: Vec<Complex64> = (0..n).map(|i| u.entries[(i, 0)]).collect();
    let generic_order = restrict_to_line(&rotated, &origin, &line)?.order_at_origin_1d();
    let non_generic = axis_orders.iter().any(|o| *o > generic_order + 1e-9);
    Ok(IntegralReport {
        p,
        q,
        directional,
        nu_below_one,
        exponent,
        integral_converges,
        agree: nu_below_one == integral_converges,
        axis_orders,
        generic_order,
        non_generic,
    })
}
