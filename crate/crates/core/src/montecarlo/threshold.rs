//! Integrability threshold `ν_{a,ψ}(φ)` by bisection on a fitted decay rate.

use serde::{Deserialize, Serialize};

use super::ams::{fit_decay, run_ams, AmsConfig};
use super::local::{Domain, LocalProblem, LocalWeight};
use crate::error::{LelongError, Result};
use crate::exec::Exec;
use crate::expr::{ComplexPoint, PshExpr};
use crate::weights::WeightSpec;

/// Relative allowance on the fitted rate for finite-depth bias (polynomial
/// prefactors at ties, incomplete mixing), added to the CI in quadrature.
pub const RATE_SYSTEMATIC: f64 = 0.015;

pub const BELOW_BRACKET: &str = "threshold below s_lo";
pub const ABOVE_BRACKET: &str = "threshold above s_hi";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub bracket: (f64, f64),
    pub tol: f64,
    /// Radius of the ball around `a`.
    pub radius: f64,
    pub replicas: usize,
    pub ams: AmsConfig,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            bracket: (0.05, 8.0),
            tol: 0.02,
            radius: 1.0 / 16.0,
            replicas: 8,
            ams: AmsConfig {
                levels: 240,
                ..AmsConfig::default()
            },
            exec: Exec::Parallel,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bracket;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(LelongError::invalid(format!("bad bracket ({lo}, {hi})")));
        }
        if !(self.tol > 0.0) {
            return Err(LelongError::invalid("tolerance must be positive"));
        }
        if !(self.radius > 0.0) {
            return Err(LelongError::invalid("radius must be positive"));
        }
        if self.replicas < 2 {
            return Err(LelongError::invalid("need at least 2 replicas"));
        }
        if self.ams.particles < 8 {
            return Err(LelongError::invalid("need at least 8 particles"));
        }
        Ok(())
    }
}

/// Fitted `c` in `V(u) ≈ u^d e^{-2cu}`; `c = ∞` when the sublevel sets
/// empty out at a finite level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    pub rate: f64,
    pub stderr: f64,
    pub per_replica: Vec<f64>,
    /// The same fit with a `d·ln u` term, for diagnostics.
    pub rate_with_log: f64,
    pub acceptance: f64,
    pub stalled: usize,
    /// Replicas stopped at floating-point resolution.
    #[serde(default)]
    pub resolution_limited: usize,
    /// Replicas of those that stopped before `MIN_RESOLVED_LEVELS` and were dropped.
    #[serde(default)]
    pub unresolved: usize,
}

/// Fewest levels a replica cut short by rounding must keep to be fitted.
pub const MIN_RESOLVED_LEVELS: usize = 32;

pub fn estimate_decay(p: &LocalProblem, cfg: &ThresholdConfig, seed: u64) -> DecayEstimate {
    let traces = cfg
        .exec
        .map(cfg.replicas, |r| run_ams(p, &cfg.ams, seed, r as u64, cfg.exec));
    let mut rates = Vec::with_capacity(traces.len());
    let mut with_log = Vec::new();
    let mut stalled = 0;
    let mut unresolved = 0;
    for tr in &traces {
        if tr.resolution_limited && tr.levels.len() < MIN_RESOLVED_LEVELS {
            unresolved += 1;
            continue;
        }
        match fit_decay(tr, false) {
            Some((c, _)) if c.is_finite() && c > 0.0 && !tr.stalled => {
                rates.push(c);
                if let Some((c2, _)) = fit_decay(tr, true) {
                    with_log.push(c2);
                }
            }
            _ => {
                stalled += 1;
                rates.push(f64::INFINITY);
            }
        }
    }
    let acceptance = traces.iter().map(|t| t.acceptance).sum::<f64>() / traces.len() as f64;
    let finite: Vec<f64> = rates.iter().copied().filter(|c| c.is_finite()).collect();
    let (rate, stderr) = if stalled * 2 > rates.len() {
        (f64::INFINITY, 0.0)
    } else if finite.len() < 2 {
        (f64::NAN, 0.0)
    } else {
        let m = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / m;
        let var = finite.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (mean, (var / m).sqrt())
    };
    let rate_with_log = if with_log.is_empty() {
        f64::NAN
    } else {
        with_log.iter().sum::<f64>() / with_log.len() as f64
    };
    DecayEstimate {
        rate,
        stderr,
        per_replica: rates,
        rate_with_log,
        acceptance,
        stalled,
        resolution_limited: traces.iter().filter(|t| t.resolution_limited).count(),
        unresolved,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub s: f64,
    pub exponent: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub nu_hat: f64,
    pub ci: (f64, f64),
    pub exponent_curve: Vec<CurvePoint>,
    pub bisection_trace: Vec<f64>,
    pub seed: u64,
    pub warnings: Vec<String>,
    pub decay: DecayEstimate,
}

/// `e(s) = 2c - 2/s` with its standard error; `e > 0` means convergence.
pub(crate) fn exponent_at(d: &DecayEstimate, s: f64) -> CurvePoint {
    CurvePoint {
        s,
        exponent: 2.0 * d.rate - 2.0 / s,
        stderr: 2.0 * d.stderr,
    }
}

/// Ties within one standard error count as divergent.
pub(crate) fn converges(p: &CurvePoint) -> bool {
    p.exponent > p.stderr
}

/// Bisection on the sign of `e(s)` over the configured bracket.
pub fn bisect(decay: DecayEstimate, cfg: &ThresholdConfig, seed: u64) -> ThresholdEstimate {
    let (mut lo, mut hi) = cfg.bracket;
    let mut warnings = Vec::new();
    if decay.stalled > 0 {
        warnings.push(format!(
            "{} of {} replicas stalled",
            decay.stalled,
            decay.per_replica.len()
        ));
    }
    if decay.resolution_limited > 0 {
        warnings.push(format!(
            "{} of {} replicas stopped at floating-point resolution{}",
            decay.resolution_limited,
            decay.per_replica.len() + decay.unresolved,
            if decay.unresolved > 0 {
                format!(", {} dropped", decay.unresolved)
            } else {
                String::new()
            }
        ));
    }
    if decay.acceptance < 0.02 && decay.rate.is_finite() {
        warnings.push(format!("low Metropolis acceptance {:.3}", decay.acceptance));
    }
    let mut curve = vec![exponent_at(&decay, lo), exponent_at(&decay, hi)];
    let mut trace = Vec::new();
    if converges(&curve[0]) {
        warnings.push(BELOW_BRACKET.into());
        return ThresholdEstimate {
            nu_hat: 0.0,
            ci: (0.0, lo),
            exponent_curve: curve,
            bisection_trace: trace,
            seed,
            warnings,
            decay,
        };
    }
    if !converges(&curve[1]) {
        warnings.push(ABOVE_BRACKET.into());
        return ThresholdEstimate {
            nu_hat: hi,
            ci: (hi, f64::INFINITY),
            exponent_curve: curve,
            bisection_trace: trace,
            seed,
            warnings,
            decay,
        };
    }
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        let pt = exponent_at(&decay, mid);
        trace.push(mid);
        if converges(&pt) {
            hi = mid;
        } else {
            lo = mid;
        }
        curve.push(pt);
    }
    let nu_hat = 0.5 * (lo + hi);
    let z = (1.96 * decay.stderr).hypot(RATE_SYSTEMATIC * decay.rate);
    let c_lo = decay.rate - z;
    let ci_hi = if c_lo > 0.0 { 1.0 / c_lo } else { f64::INFINITY };
    let ci_lo = 1.0 / (decay.rate + z);
    let ci = ((ci_lo.min(nu_hat) - cfg.tol).max(0.0), ci_hi.max(nu_hat) + cfg.tol);
    ThresholdEstimate {
        nu_hat,
        ci,
        exponent_curve: curve,
        bisection_trace: trace,
        seed,
        warnings,
        decay,
    }
}

/// Local problem for `φ` around `a` with the weight `w` recentred there.
pub fn local_problem(expr: &PshExpr, w: &WeightSpec, a: &ComplexPoint, radius: f64) -> Result<LocalProblem> {
    let n = a.dim();
    if w.dim() != n {
        return Err(LelongError::Arity {
            expected: n,
            found: w.dim(),
            context: "weight dimension".into(),
        });
    }
    if expr.arity() > n {
        return Err(LelongError::Arity {
            expected: n,
            found: expr.arity(),
            context: "expression arity".into(),
        });
    }
    let shifted = w.recentered(a.clone());
    let weight = LocalWeight::from_spec(&shifted, n)?;
    LocalProblem::new(expr, a.coords(), weight, Domain::Ball(radius))
}

/// Monte Carlo estimate of `ν_{a,ψ}(φ)`.
pub fn estimate_threshold(
    expr: &PshExpr,
    w: &WeightSpec,
    a: &ComplexPoint,
    cfg: &ThresholdConfig,
    seed: u64,
) -> Result<ThresholdEstimate> {
    cfg.validate()?;
    expr.validate()?;
    let p = local_problem(expr, w, a, cfg.radius)?;
    let decay = estimate_decay(&p, cfg, seed);
    if decay.rate.is_nan() {
        return Err(LelongError::numerical(
            "sublevel sets fall below floating-point resolution before the decay can be fitted",
        ));
    }
    Ok(bisect(decay, cfg, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::weights::make_radial;

    fn est(text: &str, n: usize, t: f64, seed: u64) -> ThresholdEstimate {
        let a = ComplexPoint::origin(n);
        let w = make_radial(t, a.clone()).unwrap();
        estimate_threshold(&parse(text).unwrap(), &w, &a, &ThresholdConfig::default(), seed).unwrap()
    }

    #[test]
    fn log_of_coordinate() {
        let e = est("log(|z1|^1)", 2, 0.0, 1);
        assert!((e.nu_hat - 1.0).abs() < 0.05, "{e:?}");
        assert!(e.ci.0 <= 1.0 && 1.0 <= e.ci.1);
        assert_eq!(e.seed, 1);
    }

    #[test]
    fn zero_function_is_below_bracket() {
        let e = est("0", 2, 1.0, 3);
        assert_eq!(e.nu_hat, 0.0);
        assert!(e.warnings.iter().any(|w| w == BELOW_BRACKET));
    }

    #[test]
    fn bounded_function_has_zero_threshold() {
        let e = est("log(|1 + z1|^2)", 2, 0.0, 4);
        assert_eq!(e.nu_hat, 0.0, "{e:?}");
    }

    #[test]
    fn above_bracket_is_flagged() {
        let e = est("log(|z1|^20)", 1, 0.0, 5);
        assert_eq!(e.nu_hat, 8.0);
        assert!(e.warnings.iter().any(|w| w == ABOVE_BRACKET));
    }

    #[test]
    fn bisection_converges_to_tolerance() {
        let d = DecayEstimate {
            rate: 1.25,
            stderr: 0.0,
            per_replica: vec![1.25; 4],
            rate_with_log: 1.25,
            acceptance: 0.5,
            stalled: 0,
            resolution_limited: 0,
            unresolved: 0,
        };
        let cfg = ThresholdConfig::default();
        let e = bisect(d, &cfg, 0);
        assert!((e.nu_hat - 0.8).abs() <= cfg.tol);
        assert!(e.bisection_trace.len() >= 8);
        // one stderr tie counts as divergent
        let tie = DecayEstimate {
            rate: 1.0,
            stderr: 0.5,
            per_replica: vec![1.0; 4],
            rate_with_log: 1.0,
            acceptance: 0.5,
            stalled: 0,
            resolution_limited: 0,
            unresolved: 0,
        };
        let pt = exponent_at(&tie, 1.0);
        assert!(!converges(&pt));
    }

    #[test]
    fn rejects_bad_config() {
        let a = ComplexPoint::origin(1);
        let w = make_radial(0.0, a.clone()).unwrap();
        let e = parse("log(|z1|^1)").unwrap();
        let cfg = ThresholdConfig {
            bracket: (1.0, 0.5),
            ..ThresholdConfig::default()
        };
        assert!(estimate_threshold(&e, &w, &a, &cfg, 0).is_err());
        let cfg = ThresholdConfig {
            tol: 0.0,
            ..ThresholdConfig::default()
        };
        assert!(estimate_threshold(&e, &w, &a, &cfg, 0).is_err());
        let b = ComplexPoint::origin(2);
        assert!(estimate_threshold(&e, &w, &b, &ThresholdConfig::default(), 0).is_err());
    }
}
