//! Adaptive multilevel splitting for weighted sublevel volumes
//! `V(u) = ∫_{φ<-u} e^{-2ψ} dλ` over a small domain.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::local::{complex_normal, norm_sqr, open_unit, unit_direction, Domain, LocalProblem, LocalWeight};
use crate::exec::Exec;
use crate::rng::{substream, StreamRng};

const KAPPAS: [f64; 3] = [0.1, 0.4, 1.5];
/// Scales of the logarithmic moves.
const LOG_KAPPAS: [f64; 4] = [0.1, 0.5, 1.5, 4.0];
/// A replica stops once some particle's `φ` carries a rounding error above this.
pub const MAX_LEVEL_ERROR: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmsConfig {
    pub particles: usize,
    /// Splitting levels per replica; each halves the mass.
    pub levels: usize,
    pub mh_steps: usize,
    pub burn_in: usize,
    /// Stop once the level exceeds this value of `-φ`.
    pub max_level: f64,
}

impl Default for AmsConfig {
    fn default() -> Self {
        AmsConfig {
            particles: 200,
            levels: 80,
            mh_steps: 40,
            burn_in: 200,
            max_level: 600.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmsTrace {
    /// Levels `u_j` (values of `-φ`).
    pub levels: Vec<f64>,
    /// `ln V(u_j) - ln V(-∞)`.
    pub log_mass: Vec<f64>,
    /// `ln V(-∞)`, the weighted volume of the domain.
    pub log_total: f64,
    pub stalled: bool,
    /// Stopped because `φ` could no longer be evaluated to `MAX_LEVEL_ERROR`
    /// on the particles (cancellation in double precision).
    #[serde(default)]
    pub resolution_limited: bool,
    pub acceptance: f64,
}

#[derive(Clone, Debug)]
struct Particle {
    z: Vec<Complex64>,
    x: f64,
    lw: f64,
    ell: f64,
    /// Per-coordinate step scales.
    ells: Vec<f64>,
    /// Coordinate choice probabilities for log-polar moves.
    pick: Vec<f64>,
}

struct Ctx<'a> {
    p: &'a LocalProblem,
}

impl Ctx<'_> {
    fn eval(&self, z: Vec<Complex64>, scratch: &mut [Complex64]) -> Option<Particle> {
        if !self.p.domain.contains(&z) {
            return None;
        }
        let n = z.len();
        let (gphi, gpsi) = scratch.split_at_mut(n);
        let phi = self.p.phi.value_grad(&z, gphi);
        let psi = self.p.weight.psi_and_grad(&z, gpsi);
        if !phi.is_finite() || !psi.is_finite() {
            return None;
        }
        let r = self.p.domain.radius();
        let scale = |slope: f64| {
            let l = if slope > 0.0 && slope.is_finite() {
                (1.0 / slope).min(r)
            } else {
                r
            };
            l.max(1e-300)
        };
        let ell = scale(2.0 * (norm_sqr(gphi).sqrt() + norm_sqr(gpsi).sqrt()));
        let ells = (0..n).map(|i| scale(2.0 * (gphi[i].norm() + gpsi[i].norm()))).collect();
        // half uniform, half proportional to |ζ_i ∂_iφ|
        let sens: Vec<f64> = (0..n).map(|i| z[i].norm() * gphi[i].norm()).collect();
        let total: f64 = sens.iter().sum();
        let pick = sens
            .iter()
            .map(|s| {
                let u = 1.0 / n as f64;
                if total > 0.0 && total.is_finite() {
                    0.5 * u + 0.5 * s / total
                } else {
                    u
                }
            })
            .collect();
        Some(Particle {
            z,
            x: -phi,
            lw: -2.0 * psi,
            ell,
            ells,
            pick,
        })
    }

    /// One Metropolis-Hastings move targeting `e^{-2ψ}` restricted to `{x > level}`.
    fn step(&self, cur: &mut Particle, level: f64, rng: &mut StreamRng, scratch: &mut [Complex64]) -> bool {
        let n = cur.z.len();
        // log-polar moves carry most of the mixing along the singular directions
        let (z, log_q) = match [0u8, 1, 2, 2, 2, 3][rng.gen_range(0..6)] {
            0 => {
                let kappa = KAPPAS[rng.gen_range(0..KAPPAS.len())];
                let sigma = kappa * cur.ell;
                let d: Vec<Complex64> = (0..n).map(|_| complex_normal(rng) * sigma).collect();
                let z: Vec<Complex64> = cur.z.iter().zip(&d).map(|(a, b)| a + b).collect();
                let Some(next) = self.eval(z, scratch) else {
                    return false;
                };
                let sigma2 = kappa * next.ell;
                let d2 = norm_sqr(&d);
                let log_q = 2.0 * n as f64 * (sigma / sigma2).ln() - d2 / (sigma2 * sigma2) + d2 / (sigma * sigma);
                return self.accept(cur, next, log_q, level, rng);
            }
            1 => {
                let kappa = KAPPAS[rng.gen_range(0..KAPPAS.len())];
                let i = rng.gen_range(0..n);
                let sigma = kappa * cur.ells[i];
                let d = complex_normal(rng) * sigma;
                let mut z = cur.z.clone();
                z[i] += d;
                let Some(next) = self.eval(z, scratch) else {
                    return false;
                };
                let sigma2 = kappa * next.ells[i];
                let d2 = d.norm_sqr();
                let log_q = 2.0 * (sigma / sigma2).ln() - d2 / (sigma2 * sigma2) + d2 / (sigma * sigma);
                return self.accept(cur, next, log_q, level, rng);
            }
            2 => {
                let kappa = LOG_KAPPAS[rng.gen_range(0..LOG_KAPPAS.len())];
                let i = pick_index(&cur.pick, rng.gen());
                if cur.z[i] == Complex64::new(0.0, 0.0) {
                    return false;
                }
                let eta = Complex64::new(
                    kappa * rng.sample::<f64, _>(rand_distr::StandardNormal),
                    kappa * std::f64::consts::PI * rng.sample::<f64, _>(rand_distr::StandardNormal),
                );
                let mut z = cur.z.clone();
                z[i] *= eta.exp();
                let Some(next) = self.eval(z, scratch) else {
                    return false;
                };
                let log_q = 2.0 * eta.re + (next.pick[i] / cur.pick[i]).ln();
                return self.accept(cur, next, log_q, level, rng);
            }
            _ => {
                let kappa = LOG_KAPPAS[rng.gen_range(0..LOG_KAPPAS.len())];
                let eta = kappa * rng.sample::<f64, _>(rand_distr::StandardNormal);
                let f = eta.exp();
                (cur.z.iter().map(|c| c * f).collect(), 2.0 * n as f64 * eta)
            }
        };
        match self.eval(z, scratch) {
            Some(next) => self.accept(cur, next, log_q, level, rng),
            None => false,
        }
    }

    fn accept(&self, cur: &mut Particle, next: Particle, log_q: f64, level: f64, rng: &mut StreamRng) -> bool {
        if next.x <= level {
            return false;
        }
        let log_a = next.lw - cur.lw + log_q;
        if log_a >= 0.0 || open_unit(rng).ln() < log_a {
            *cur = next;
            true
        } else {
            false
        }
    }

    fn initial(&self, rng: &mut StreamRng, scratch: &mut [Complex64], burn_in: usize) -> (Particle, bool) {
        let n = self.p.dim;
        let r = self.p.domain.radius();
        let exact = matches!(
            (&self.p.weight, self.p.domain),
            (LocalWeight::Radial(_), Domain::Ball(_)) | (LocalWeight::Product(_), Domain::Polydisc(_))
        );
        loop {
            let z = match (&self.p.weight, self.p.domain) {
                (LocalWeight::Radial(t), Domain::Ball(_)) => {
                    let rad = r * open_unit(rng).powf(1.0 / (2.0 * n as f64 - 2.0 * t));
                    unit_direction(rng, n).into_iter().map(|c| c * rad).collect()
                }
                (LocalWeight::Product(b), Domain::Polydisc(_)) => b
                    .iter()
                    .map(|bi| {
                        let rad = r * open_unit(rng).powf(1.0 / (2.0 - 2.0 * bi));
                        Complex64::from_polar(rad, rng.gen::<f64>() * std::f64::consts::TAU)
                    })
                    .collect(),
                (_, Domain::Ball(_)) => {
                    let rad = r * open_unit(rng).powf(1.0 / (2 * n) as f64);
                    unit_direction(rng, n).into_iter().map(|c| c * rad).collect()
                }
                (_, Domain::Polydisc(_)) => (0..n)
                    .map(|_| {
                        let rad = r * open_unit(rng).sqrt();
                        Complex64::from_polar(rad, rng.gen::<f64>() * std::f64::consts::TAU)
                    })
                    .collect(),
            };
            if let Some(mut p) = self.eval(z, scratch) {
                if !exact {
                    for _ in 0..burn_in {
                        self.step(&mut p, f64::NEG_INFINITY, rng, scratch);
                    }
                }
                return (p, exact);
            }
        }
    }
}

fn pick_index(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Log of the `e^{-2ψ}`-volume of the domain, exact where a closed form
/// exists and `None` otherwise.
pub fn log_weighted_volume(p: &LocalProblem) -> Option<f64> {
    let n = p.dim as f64;
    let r = p.domain.radius();
    match (&p.weight, p.domain) {
        (LocalWeight::Radial(t), Domain::Ball(_)) => {
            // ∫_{|z|<r} |z|^{-2t} = σ_{2n-1} r^{2n-2t} / (2n-2t)
            let log_sphere = (2.0f64).ln() + n * std::f64::consts::PI.ln() - ln_gamma_int(p.dim);
            Some(log_sphere + (2.0 * n - 2.0 * t) * r.ln() - (2.0 * n - 2.0 * t).ln())
        }
        (LocalWeight::Product(b), Domain::Polydisc(_)) => Some(
            b.iter()
                .map(|bi| (std::f64::consts::PI / (1.0 - bi)).ln() + (2.0 - 2.0 * bi) * r.ln())
                .sum(),
        ),
        _ => None,
    }
}

fn ln_gamma_int(n: usize) -> f64 {
    (1..n).map(|j| (j as f64).ln()).sum()
}

/// One AMS replica. Deterministic in `(seed, replica)`.
pub fn run_ams(p: &LocalProblem, cfg: &AmsConfig, seed: u64, replica: u64, exec: Exec) -> AmsTrace {
    let ctx = Ctx { p };
    let n = p.dim;
    let np = cfg.particles.max(4);
    let init: Vec<(Particle, bool)> = exec.map(np, |i| {
        let mut rng = substream(seed, &[replica, u64::MAX, i as u64]);
        let mut scratch = vec![Complex64::new(0.0, 0.0); 2 * n];
        ctx.initial(&mut rng, &mut scratch, cfg.burn_in)
    });
    let mut parts: Vec<Particle> = init.into_iter().map(|x| x.0).collect();
    let log_total = log_weighted_volume(p).unwrap_or(f64::NAN);
    let mut levels = Vec::with_capacity(cfg.levels);
    let mut log_mass = Vec::with_capacity(cfg.levels);
    let mut acc = 0u64;
    let mut tried = 0u64;
    let mut lm = 0.0;
    let mut stalled = false;
    let mut resolution_limited = false;
    for lev in 0..cfg.levels {
        if parts.iter().any(|q| !(p.phi.value_error(&q.z) <= MAX_LEVEL_ERROR)) {
            resolution_limited = true;
            break;
        }
        let mut xs: Vec<f64> = parts.iter().map(|q| q.x).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let level = xs[np / 2 - 1];
        if level > cfg.max_level {
            break;
        }
        let alive: Vec<usize> = (0..np).filter(|&i| parts[i].x > level).collect();
        if alive.is_empty() {
            stalled = true;
            break;
        }
        lm += (alive.len() as f64 / np as f64).ln();
        levels.push(level);
        log_mass.push(lm);
        let mut rng = substream(seed, &[replica, lev as u64, u64::MAX]);
        let parents: Vec<usize> = (0..np)
            .map(|i| {
                if parts[i].x > level {
                    i
                } else {
                    alive[rng.gen_range(0..alive.len())]
                }
            })
            .collect();
        let prev = &parts;
        let moved: Vec<(Particle, u64)> = exec.map(np, |i| {
            let mut rng = substream(seed, &[replica, lev as u64, i as u64]);
            let mut scratch = vec![Complex64::new(0.0, 0.0); 2 * n];
            let mut q = prev[parents[i]].clone();
            let mut a = 0;
            for _ in 0..cfg.mh_steps {
                a += ctx.step(&mut q, level, &mut rng, &mut scratch) as u64;
            }
            (q, a)
        });
        tried += (np * cfg.mh_steps) as u64;
        acc += moved.iter().map(|m| m.1).sum::<u64>();
        parts = moved.into_iter().map(|m| m.0).collect();
    }
    AmsTrace {
        levels,
        log_mass,
        log_total,
        stalled,
        resolution_limited,
        acceptance: if tried > 0 { acc as f64 / tried as f64 } else { 0.0 },
    }
}

/// Least-squares fit of `ln V = A - 2c·u + d·ln u` on the deepest levels;
/// returns `(c, d)`.
pub fn fit_decay(trace: &AmsTrace, with_log: bool) -> Option<(f64, f64)> {
    let m = trace.levels.len();
    if m < 8 {
        return None;
    }
    let start = m / 3;
    let pts: Vec<(f64, f64)> = trace.levels[start..]
        .iter()
        .copied()
        .zip(trace.log_mass[start..].iter().copied())
        .collect();
    let use_log = with_log && pts.iter().all(|p| p.0 > 0.0);
    let cols = if use_log { 3 } else { 2 };
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(u, y) in &pts {
        let row = [1.0, u, if use_log { u.ln() } else { 0.0 }];
        for i in 0..cols {
            atb[i] += row[i] * y;
            for j in 0..cols {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let coef = solve(&ata, &atb, cols)?;
    Some((-coef[1] / 2.0, if use_log { coef[2] } else { 0.0 }))
}

#[allow(clippy::needless_range_loop)]
fn solve(a: &[[f64; 3]; 3], b: &[f64; 3], n: usize) -> Option<[f64; 3]> {
    let mut m = *a;
    let mut v = *b;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())?;
        if m[piv][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, piv);
        v.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
                v[r] -= f * v[c];
            }
        }
    }
    let mut out = [0.0; 3];
    for i in 0..n {
        out[i] = v[i] / m[i][i];
    }
    Some(out)
}
