//! Dyadic-annulus integral profiles.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::local::{norm_sqr, open_unit, unit_direction, LocalWeight};
use crate::error::{LelongError, Result};
use crate::exec::Exec;
use crate::expr::{CompiledExpr, PshExpr};
use crate::rng::substream;
use crate::weights::WeightSpec;

/// Batches per annulus for median-of-means.
pub const BATCHES: usize = 16;
/// Exponent arguments are clamped to `±CLIP` before exponentiation.
pub const CLIP: f64 = 700.0;

#[derive(Clone, Debug)]
pub struct ProfileConfig {
    pub k_min: i32,
    pub k_max: i32,
    pub n_samples: usize,
    pub exec: Exec,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            k_min: 4,
            k_max: 18,
            n_samples: 4096,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusProfile {
    pub k_min: i32,
    pub k_max: i32,
    pub masses: Vec<f64>,
    pub stderr: Vec<f64>,
    pub s: f64,
    pub seed: u64,
    pub n_samples: usize,
    /// Samples whose exponent hit the clamp.
    pub clipped: u64,
}

impl AnnulusProfile {
    pub fn ks(&self) -> impl Iterator<Item = i32> {
        self.k_min..=self.k_max
    }
}

/// Volume of `{r1 ≤ |z| ≤ r2}` in `C^n`.
pub fn shell_volume(n: usize, r1: f64, r2: f64) -> f64 {
    let mut unit = 1.0;
    for j in 1..=n {
        unit *= std::f64::consts::PI / j as f64;
    }
    let q = (r1 / r2).powi(2 * n as i32);
    unit * r2.powi(2 * n as i32) * (1.0 - q)
}

/// Uniform point of the annulus `r1 ≤ |z| ≤ r2` around the origin.
pub fn sample_annulus<R: Rng + ?Sized>(rng: &mut R, n: usize, r1: f64, r2: f64) -> Vec<Complex64> {
    let q = (r1 / r2).powi(2 * n as i32);
    let u = open_unit(rng);
    let r = r2 * (q + u * (1.0 - q)).powf(1.0 / (2 * n) as f64);
    unit_direction(rng, n).into_iter().map(|c| c * r).collect()
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

/// Profile of `∫_{A(k)} e^{-2φ/s - 2ψ}` in local coordinates; `s = ∞`
/// drops `φ`.
pub(crate) fn profile_local(
    phi: &CompiledExpr,
    s: f64,
    weight: &LocalWeight,
    n: usize,
    cfg: &ProfileConfig,
    seed: u64,
) -> Result<AnnulusProfile> {
    if !(s > 0.0) {
        return Err(LelongError::invalid(format!("s must be positive, got {s}")));
    }
    if cfg.k_min >= cfg.k_max {
        return Err(LelongError::invalid("need k_min < k_max"));
    }
    if cfg.n_samples < 64 {
        return Err(LelongError::invalid("need at least 64 samples per annulus"));
    }
    let ks: Vec<i32> = (cfg.k_min..=cfg.k_max).collect();
    let per_batch = cfg.n_samples / BATCHES;
    let tasks = ks.len() * BATCHES;
    let results = cfg.exec.map(tasks, |task| {
        let k = ks[task / BATCHES];
        let b = task % BATCHES;
        let mut rng = substream(seed, &[k as u64, b as u64]);
        let r2 = (2.0f64).powi(-k);
        let r1 = 0.5 * r2;
        let mut sum = 0.0;
        let mut clipped = 0u64;
        for _ in 0..per_batch {
            let z = sample_annulus(&mut rng, n, r1, r2);
            let mut arg = -2.0 * weight.psi(&z);
            if s.is_finite() {
                arg -= 2.0 * phi.value(&z) / s;
            }
            if !(-CLIP..=CLIP).contains(&arg) {
                clipped += 1;
                arg = if arg.is_nan() { CLIP } else { arg.clamp(-CLIP, CLIP) };
            }
            sum += arg.exp();
        }
        (sum / per_batch as f64, clipped)
    });
    let mut masses = Vec::with_capacity(ks.len());
    let mut stderr = Vec::with_capacity(ks.len());
    let mut clipped = 0;
    for (i, &k) in ks.iter().enumerate() {
        let batch = &results[i * BATCHES..(i + 1) * BATCHES];
        clipped += batch.iter().map(|b| b.1).sum::<u64>();
        let mut means: Vec<f64> = batch.iter().map(|b| b.0).collect();
        let mean = means.iter().sum::<f64>() / BATCHES as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
        let med = median(&mut means);
        let r2 = (2.0f64).powi(-k);
        let vol = shell_volume(n, 0.5 * r2, r2);
        masses.push(vol * med);
        // asymptotic efficiency of the median relative to the mean: √(π/2)
        stderr.push(vol * 1.2533 * (var / BATCHES as f64).sqrt());
    }
    Ok(AnnulusProfile {
        k_min: cfg.k_min,
        k_max: cfg.k_max,
        masses,
        stderr,
        s,
        seed,
        n_samples: per_batch * BATCHES,
        clipped,
    })
}

/// Per-annulus masses of `e^{-2φ/s - 2ψ(·-a)}` around the weight's centre.
pub fn integral_profile(
    expr: &PshExpr,
    w: &WeightSpec,
    s: f64,
    cfg: &ProfileConfig,
    seed: u64,
) -> Result<AnnulusProfile> {
    let n = w.dim();
    if expr.arity() > n {
        return Err(LelongError::Arity {
            expected: n,
            found: expr.arity(),
            context: "integral profile".into(),
        });
    }
    let phi = expr.translate(w.center.coords()).compile(n)?;
    let weight = LocalWeight::from_spec(w, n)?;
    profile_local(&phi, s, &weight, n, cfg, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceFit {
    /// Slope of `-log2 m_k` against `k`; positive means summable masses.
    pub exponent: f64,
    pub stderr: f64,
    pub n_used: usize,
    pub flags: Vec<String>,
}

/// Weighted least-squares decay exponent of a profile.
pub fn divergence_exponent(profile: &AnnulusProfile) -> Result<DivergenceFit> {
    let pts: Vec<(f64, f64, f64)> = profile
        .ks()
        .zip(profile.masses.iter().zip(&profile.stderr))
        .filter(|(_, (m, _))| **m > 0.0 && m.is_finite())
        .map(|(k, (m, se))| {
            let y = -m.log2();
            let sy = (se / (m * std::f64::consts::LN_2)).max(1e-6);
            (k as f64, y, sy)
        })
        .collect();
    if pts.is_empty() {
        return Ok(DivergenceFit {
            exponent: f64::INFINITY,
            stderr: 0.0,
            n_used: 0,
            flags: vec!["all annulus masses are zero".into()],
        });
    }
    if pts.len() < 6 {
        return Err(LelongError::numerical(format!(
            "only {} annuli with positive mass; need 6",
            pts.len()
        )));
    }
    let sw: f64 = pts.iter().map(|p| 1.0 / p.2.powi(2)).sum();
    let mx = pts.iter().map(|p| p.0 / p.2.powi(2)).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.1 / p.2.powi(2)).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2) / p.2.powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my) / p.2.powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let chi2: f64 = pts.iter().map(|p| ((p.1 - icpt - slope * p.0) / p.2).powi(2)).sum();
    let dof = (pts.len() - 2) as f64;
    let inflate = (chi2 / dof).max(1.0);
    let mut flags = Vec::new();
    if profile.clipped > 0 {
        flags.push(format!("{} samples clipped", profile.clipped));
    }
    Ok(DivergenceFit {
        exponent: slope,
        stderr: (inflate / sxx).sqrt(),
        n_used: pts.len(),
        flags,
    })
}

/// Uniform sample of a ball of radius `r` (used by callers that need the
/// same sampler as the profiles).
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, n: usize, r: f64) -> Vec<Complex64> {
    let u = open_unit(rng);
    let rad = r * u.powf(1.0 / (2 * n) as f64);
    unit_direction(rng, n).into_iter().map(|c| c * rad).collect()
}

/// `|z|` for a local point.
pub fn radius(z: &[Complex64]) -> f64 {
    norm_sqr(z).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ComplexPoint};
    use crate::weights::make_radial;

    fn cfg(k_min: i32, k_max: i32, n_samples: usize) -> ProfileConfig {
        ProfileConfig {
            k_min,
            k_max,
            n_samples,
            exec: Exec::Parallel,
        }
    }

    #[test]
    fn zero_function_gives_annulus_volumes() {
        let w = make_radial(0.0, ComplexPoint::origin(2)).unwrap();
        let p = integral_profile(&PshExpr::zero(), &w, 1.0, &cfg(4, 12, 256), 1).unwrap();
        for (k, m) in p.ks().zip(&p.masses) {
            let exact = std::f64::consts::PI.powi(2) / 2.0 * 2f64.powi(-4 * k) * (1.0 - 2f64.powi(-4));
            assert!((m - exact).abs() <= 1e-12 * exact, "k={k}: {m} vs {exact}");
        }
        let fit = divergence_exponent(&p).unwrap();
        assert!((fit.exponent - 4.0).abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_log_slopes() {
        // closed form: ∫_{A(k)} |z|^{-2/s} = 2π ∫ r^{1-2/s} dr, so -log2 m_k has slope 2 - 2/s
        let w = make_radial(0.0, ComplexPoint::origin(1)).unwrap();
        let e = parse("log(|z1|^1)").unwrap();
        for (s, expected) in [(2.0, 1.0), (4.0, 1.5), (1.0, 0.0)] {
            let p = integral_profile(&e, &w, s, &cfg(4, 18, 1024), 2).unwrap();
            let fit = divergence_exponent(&p).unwrap();
            assert!((fit.exponent - expected).abs() < 0.02, "s={s}: {fit:?}");
            // the per-annulus closed form
            for (k, m) in p.ks().zip(&p.masses) {
                let (r1, r2) = (2f64.powi(-k - 1), 2f64.powi(-k));
                let b = 2.0 - 2.0 / s;
                let exact = if b == 0.0 {
                    2.0 * std::f64::consts::PI * (r2 / r1).ln()
                } else {
                    2.0 * std::f64::consts::PI * (r2.powf(b) - r1.powf(b)) / b
                };
                assert!((m - exact).abs() < 0.05 * exact, "k={k}");
            }
        }
    }

    #[test]
    fn sum_of_squares_slope() {
        let w = make_radial(0.0, ComplexPoint::origin(2)).unwrap();
        let e = parse("0.5*log(|z1|^2 + |z2|^2)").unwrap();
        for s in [0.75, 1.0, 2.0] {
            let p = integral_profile(&e, &w, s, &cfg(4, 18, 512), 3).unwrap();
            let fit = divergence_exponent(&p).unwrap();
            assert!((fit.exponent - (4.0 - 2.0 / s)).abs() < 0.01, "{fit:?}");
        }
    }

    #[test]
    fn profile_is_deterministic_across_modes() {
        let w = make_radial(1.0, ComplexPoint::origin(2)).unwrap();
        let e = parse("log(|z1*z2|^1)").unwrap();
        let mut c = cfg(4, 10, 128);
        let a = integral_profile(&e, &w, 3.0, &c, 5).unwrap();
        c.exec = Exec::Sequential;
        let b = integral_profile(&e, &w, 3.0, &c, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_zero_masses_flagged() {
        let p = AnnulusProfile {
            k_min: 0,
            k_max: 7,
            masses: vec![0.0; 8],
            stderr: vec![0.0; 8],
            s: 1.0,
            seed: 0,
            n_samples: 64,
            clipped: 0,
        };
        let fit = divergence_exponent(&p).unwrap();
        assert_eq!(fit.exponent, f64::INFINITY);
        assert!(!fit.flags.is_empty());
        let mut q = p.clone();
        q.masses[0] = 1.0;
        assert!(divergence_exponent(&q).is_err());
    }

    #[test]
    fn input_validation() {
        let w = make_radial(0.0, ComplexPoint::origin(1)).unwrap();
        let e = parse("log(|z1|^1)").unwrap();
        assert!(integral_profile(&e, &w, 0.0, &cfg(4, 8, 64), 0).is_err());
        assert!(integral_profile(&e, &w, 1.0, &cfg(8, 8, 64), 0).is_err());
        assert!(integral_profile(&e, &w, 1.0, &cfg(4, 8, 32), 0).is_err());
        assert!(integral_profile(&parse("log(|z2|^1)").unwrap(), &w, 1.0, &cfg(4, 8, 64), 0).is_err());
    }
}
