//! The weight `ψ` and a numerical audit of the admissibility conditions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LelongError, Result};
use crate::exec::Exec;
use crate::expr::{ComplexPoint, PshExpr};
use crate::montecarlo::local::{unit_direction, LocalWeight};
use crate::montecarlo::profile::{divergence_exponent, profile_local, ProfileConfig};
use crate::rng::substream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightKind {
    /// `t·log|z − a|`.
    Radial { t: f64 },
    /// `ψ(z − a)` for an expression `ψ` centred at the origin.
    Expr { expr: PshExpr },
}

/// Declared admissibility parameters `(τ, l, M, α)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeclaredParams {
    pub tau: f64,
    pub l: f64,
    pub m: f64,
    pub alpha: f64,
}

impl DeclaredParams {
    pub fn new(tau: f64, l: f64, m: f64, alpha: f64) -> Result<Self> {
        if !(tau > 0.0 && l > 0.0 && m > 0.0 && alpha > 0.0 && alpha <= 1.0) {
            return Err(LelongError::invalid(
                "declared parameters need τ, l, M > 0 and α in (0, 1]",
            ));
        }
        Ok(DeclaredParams { tau, l, m, alpha })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub center: ComplexPoint,
    pub declared: Option<DeclaredParams>,
}

/// `t·log|z − a|`, requiring `0 ≤ t < n`.
pub fn make_radial(t: f64, a: ComplexPoint) -> Result<WeightSpec> {
    let n = a.dim() as f64;
    if !(t >= 0.0 && t < n) {
        return Err(LelongError::invalid(format!(
            "radial weight needs 0 ≤ t < n = {n}; t = {t} makes e^(-2(1+τ)ψ) non-integrable"
        )));
    }
    Ok(WeightSpec {
        kind: WeightKind::Radial { t },
        center: a,
        declared: None,
    })
}

pub fn make_expr_weight(expr: PshExpr, a: ComplexPoint, declared: Option<DeclaredParams>) -> Result<WeightSpec> {
    expr.validate()?;
    if expr.arity() > a.dim() {
        return Err(LelongError::Arity {
            expected: a.dim(),
            found: expr.arity(),
            context: "weight expression".into(),
        });
    }
    Ok(WeightSpec {
        kind: WeightKind::Expr { expr },
        center: a,
        declared,
    })
}

impl WeightSpec {
    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn with_declared(mut self, p: DeclaredParams) -> Self {
        self.declared = Some(p);
        self
    }

    /// `ψ(z − a)`.
    pub fn evaluate(&self, z: &[Complex64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(LelongError::Arity {
                expected: self.dim(),
                found: z.len(),
                context: "weight evaluation".into(),
            });
        }
        let zeta: Vec<Complex64> = z.iter().zip(self.center.coords()).map(|(x, a)| x - a).collect();
        Ok(match &self.kind {
            WeightKind::Radial { t } => {
                if *t == 0.0 {
                    0.0
                } else {
                    t * zeta.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().ln()
                }
            }
            WeightKind::Expr { expr } => expr.evaluate(&zeta)?,
        })
    }

    /// The same weight moved to another centre.
    pub fn recentered(&self, a: ComplexPoint) -> WeightSpec {
        WeightSpec {
            kind: self.kind.clone(),
            center: a,
            declared: self.declared,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub integrability_margin_ok: bool,
    /// Per-annulus decay exponent of `∫ e^{-2(1+τ)ψ}` (log2 units).
    pub decay_exponent: f64,
    pub decay_stderr: f64,
    pub lower_bound_ok: bool,
    /// `max ψ(z)/log|z|` over the shells; `ψ ≥ M·log|z|` near 0 iff this is `≤ M`.
    pub worst_ratio: f64,
    pub hoelder_ok: bool,
    /// Largest `|e^{2ψ(x)} − e^{2ψ(y)}| / |x − y|^α` observed.
    pub hoelder_quotient: f64,
    /// Slope of `log2` of the per-shell Hölder quotient against shell index.
    pub hoelder_growth: f64,
    pub lelong_estimate: f64,
    pub lelong_ok: bool,
    pub warnings: Vec<String>,
}

/// Shell indices used by the audit: radii `2^{-k}`, `k = 4..=20`.
pub const AUDIT_SHELLS: std::ops::RangeInclusive<i32> = 4..=20;

fn default_params(w: &WeightSpec) -> DeclaredParams {
    w.declared.unwrap_or(DeclaredParams {
        tau: 0.01,
        l: 1.0,
        m: w.dim() as f64,
        alpha: 1.0,
    })
}

/// Audits the four admissibility conditions on dyadic shells around the
/// centre. Radial weights are answered analytically except for the decay
/// exponent, which is always measured.
pub fn audit_admissibility(w: &WeightSpec, seed: u64, samples: usize) -> Result<AdmissibilityReport> {
    let n = w.dim();
    let params = default_params(w);
    let mut warnings = Vec::new();
    if w.declared.is_none() {
        warnings.push("no declared parameters; using τ=0.01, l=1, M=n, α=1".into());
    }
    let local = LocalWeight::from_spec(w, n)?;
    let samples = samples.max(64);

    // (i) decay of ∫ e^{-2(1+τ)ψ} on dyadic annuli
    let cfg = ProfileConfig {
        k_min: *AUDIT_SHELLS.start(),
        k_max: *AUDIT_SHELLS.end(),
        n_samples: samples,
        exec: Exec::Parallel,
    };
    let zero = PshExpr::zero().compile(n)?;
    let profile = profile_local(&zero, f64::INFINITY, &local.scaled(1.0 + params.tau), n, &cfg, seed)?;
    let (decay, decay_se) = match divergence_exponent(&profile) {
        Ok(d) => (d.exponent, d.stderr),
        Err(e) => {
            warnings.push(format!("decay exponent unavailable: {e}"));
            (f64::NAN, f64::NAN)
        }
    };
    let integrability_margin_ok = decay > 0.0;

    if let WeightKind::Radial { t } = w.kind {
        let holder_exp = (2.0 * t).min(1.0);
        return Ok(AdmissibilityReport {
            integrability_margin_ok,
            decay_exponent: decay,
            decay_stderr: decay_se,
            lower_bound_ok: t <= params.m,
            worst_ratio: t,
            hoelder_ok: t > 0.0 && params.alpha <= holder_exp,
            hoelder_quotient: f64::NAN,
            hoelder_growth: 0.0,
            lelong_estimate: t,
            lelong_ok: t > 0.0 && (t - params.l).abs() <= 1e-12,
            warnings,
        });
    }

    let shells: Vec<i32> = AUDIT_SHELLS.collect();
    let alpha = params.alpha;
    let per_shell = Exec::Parallel.map(shells.len(), |j| {
        let k = shells[j];
        let r = (2.0f64).powi(-k);
        let mut rng = substream(seed, &[0xA0D1, k as u64]);
        let mut sup_psi = f64::NEG_INFINITY;
        let mut worst = f64::NEG_INFINITY;
        let mut quotient: f64 = 0.0;
        for _ in 0..samples {
            let u = unit_direction(&mut rng, n);
            let x: Vec<Complex64> = u.iter().map(|c| c * r).collect();
            let px = local.psi(&x);
            sup_psi = sup_psi.max(px);
            worst = worst.max(px / r.ln());
            // a nearby point at distance ≈ r/4 within the shell region
            let v = unit_direction(&mut rng, n);
            let y: Vec<Complex64> = x.iter().zip(&v).map(|(a, b)| a + b * (0.25 * r)).collect();
            let py = local.psi(&y);
            let d: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            if px.is_finite() && py.is_finite() && d > 0.0 {
                let q = ((2.0 * px).exp() - (2.0 * py).exp()).abs() / d.powf(alpha);
                quotient = quotient.max(q);
            }
        }
        (r, sup_psi, worst, quotient)
    });

    let worst_ratio = per_shell.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    let lower_bound_ok = worst_ratio <= params.m * (1.0 + 1e-9);

    let hoelder_quotient = per_shell.iter().map(|s| s.3).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = shells
        .iter()
        .zip(&per_shell)
        .filter(|(_, s)| s.3 > 0.0)
        .map(|(&k, s)| (k as f64, s.3.log2()))
        .collect();
    let hoelder_growth = ols_slope(&pts).unwrap_or(0.0);
    let hoelder_ok = hoelder_quotient.is_finite() && hoelder_growth <= 0.25;

    let pts: Vec<(f64, f64)> = per_shell
        .iter()
        .filter(|s| s.1.is_finite())
        .map(|s| (s.0.ln(), s.1))
        .collect();
    let lelong_estimate = ols_slope(&pts).unwrap_or(f64::NAN);
    let lelong_ok = lelong_estimate > 0.0 && (lelong_estimate - params.l).abs() <= 0.05 * params.l.max(1.0);

    Ok(AdmissibilityReport {
        integrability_margin_ok,
        decay_exponent: decay,
        decay_stderr: decay_se,
        lower_bound_ok,
        worst_ratio,
        hoelder_ok,
        hoelder_quotient,
        hoelder_growth,
        lelong_estimate,
        lelong_ok,
        warnings,
    })
}

/// Ordinary least-squares slope.
pub(crate) fn ols_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// OLS slope and its standard error; `(NaN, ∞)` when undetermined.
pub(crate) fn ols_slope_stderr(pts: &[(f64, f64)]) -> (f64, f64) {
    let Some(b) = ols_slope(pts) else {
        return (f64::NAN, f64::INFINITY);
    };
    let m = pts.len() as f64;
    if m < 3.0 {
        return (b, f64::INFINITY);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let rss: f64 = pts.iter().map(|p| (p.1 - my - b * (p.0 - mx)).powi(2)).sum();
    (b, (rss / (m - 2.0) / sxx).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn radial_range() {
        assert!(make_radial(1.0, ComplexPoint::origin(2)).is_ok());
        assert!(make_radial(0.0, ComplexPoint::origin(2)).is_ok());
        assert!(make_radial(2.0, ComplexPoint::origin(2)).is_err());
        assert!(make_radial(-0.1, ComplexPoint::origin(2)).is_err());
    }

    #[test]
    fn radial_weight_values() {
        let w = make_radial(1.0, ComplexPoint::real(&[1.0, 0.0]).unwrap()).unwrap();
        let v = w
            .evaluate(&[Complex64::new(4.0, 0.0), Complex64::new(0.0, 4.0)])
            .unwrap();
        assert!((v - 5f64.ln()).abs() < 1e-15);
        let w0 = make_radial(0.0, ComplexPoint::origin(3)).unwrap();
        assert_eq!(w0.evaluate(&[Complex64::new(0.0, 0.0); 3]).unwrap(), 0.0);
    }

    #[test]
    fn radial_audit_passes_and_matches_decay_prediction() {
        let n = 2;
        let t = (n - 1) as f64;
        let tau = 0.05;
        let w = make_radial(t, ComplexPoint::origin(n))
            .unwrap()
            .with_declared(DeclaredParams::new(tau, t, t, 1.0).unwrap());
        let r = audit_admissibility(&w, 11, 1024).unwrap();
        assert!(
            r.integrability_margin_ok && r.lower_bound_ok && r.hoelder_ok && r.lelong_ok,
            "{r:?}"
        );
        assert_eq!(r.lelong_estimate, t);
        let predicted = 2.0 * n as f64 - 2.0 * t * (1.0 + tau);
        assert!(
            (r.decay_exponent - predicted).abs() <= 3.0 * r.decay_stderr.max(1e-3),
            "{} vs {predicted} ± {}",
            r.decay_exponent,
            r.decay_stderr
        );
    }

    #[test]
    fn l1_weight_audit() {
        let psi = parse("log(|z1|^1 + |z2|^1)").unwrap();
        let w = make_expr_weight(
            psi,
            ComplexPoint::origin(2),
            Some(DeclaredParams::new(0.1, 1.0, 1.0, 1.0).unwrap()),
        )
        .unwrap();
        let r = audit_admissibility(&w, 5, 512).unwrap();
        assert!(r.hoelder_ok, "{r:?}");
        assert!((r.lelong_estimate - 1.0).abs() < 0.02, "{}", r.lelong_estimate);
        // brute-force oracle: sup over a fine torus grid on |z| = r
        let grid_sup = |rad: f64| {
            let mut best = f64::NEG_INFINITY;
            for i in 0..=200 {
                let th = i as f64 / 200.0 * std::f64::consts::FRAC_PI_2;
                let (a, b) = (rad * th.cos(), rad * th.sin());
                best = best.max((a + b).ln());
            }
            best
        };
        let slope = (grid_sup(2f64.powi(-20)) - grid_sup(2f64.powi(-4))) / (2f64.powi(-20).ln() - 2f64.powi(-4).ln());
        assert!((r.lelong_estimate - slope).abs() < 0.02);
    }

    #[test]
    fn lower_bound_follows_the_inequality() {
        let psi = parse("0.5*log(|z1|^2 + |z2|^2)").unwrap();
        let at = |m: f64| {
            let w = make_expr_weight(
                psi.clone(),
                ComplexPoint::origin(2),
                Some(DeclaredParams::new(0.1, 1.0, m, 1.0).unwrap()),
            )
            .unwrap();
            audit_admissibility(&w, 3, 256).unwrap()
        };
        let low = at(0.5);
        let high = at(2.0);
        assert!((low.worst_ratio - 1.0).abs() < 1e-9);
        assert!(!low.lower_bound_ok);
        assert!(high.lower_bound_ok);
        assert!(at(1.0).lower_bound_ok);
    }

    #[test]
    fn too_large_hoelder_exponent_detected() {
        // e^{2ψ} = |z|^{0.5} is only 1/2-Hölder
        let psi = parse("0.125*log(|z1|^2 + |z2|^2)").unwrap();
        let w = make_expr_weight(
            psi,
            ComplexPoint::origin(2),
            Some(DeclaredParams::new(0.1, 0.25, 1.0, 1.0).unwrap()),
        )
        .unwrap();
        assert!(!audit_admissibility(&w, 3, 256).unwrap().hoelder_ok);
    }

    #[test]
    fn audit_is_deterministic() {
        let psi = parse("log(|z1|^1 + |z2|^1)").unwrap();
        let w = make_expr_weight(psi, ComplexPoint::origin(2), None).unwrap();
        let a = audit_admissibility(&w, 9, 128).unwrap();
        let b = audit_admissibility(&w, 9, 128).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
