//! Distributional checks on Haar unitaries and random subspaces.

use statrs::distribution::{Beta, ContinuousCDF};

use lelong_core::geometry::{haar_unitary_from, random_subspace_from};
use lelong_core::rng::substream;

const N: usize = 4000;
/// Reject at p < 1e-3.
const P_MIN: f64 = 1e-3;

/// Asymptotic Kolmogorov p-value of the one-sample KS statistic.
fn ks_pvalue(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max);
    let lam = (m.sqrt() + 0.12 + 0.11 / m.sqrt()) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lam * lam).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn entry_modulus_is_beta() {
    // |U_11|² ~ Beta(1, n−1)
    for n in 2..=4usize {
        let mut rng = substream(1, &[n as u64]);
        let xs: Vec<f64> = (0..N)
            .map(|_| haar_unitary_from(n, &mut rng).entries[(0, 0)].norm_sqr())
            .collect();
        let beta = Beta::new(1.0, (n - 1) as f64).unwrap();
        let p = ks_pvalue(xs, |x| beta.cdf(x));
        assert!(p > P_MIN, "n={n}: p={p}");
    }
}

#[test]
fn entry_phase_is_uniform() {
    let mut rng = substream(2, &[]);
    let xs: Vec<f64> = (0..N)
        .map(|_| haar_unitary_from(3, &mut rng).entries[(1, 2)].arg())
        .collect();
    let p = ks_pvalue(xs, |x| (x + std::f64::consts::PI) / (2.0 * std::f64::consts::PI));
    assert!(p > P_MIN, "p={p}");
}

#[test]
fn columns_are_uniform_on_the_sphere() {
    // the last column sees the same Beta law as the first
    let mut rng = substream(3, &[]);
    let xs: Vec<f64> = (0..N)
        .map(|_| haar_unitary_from(3, &mut rng).entries[(2, 2)].norm_sqr())
        .collect();
    let beta = Beta::new(1.0, 2.0).unwrap();
    assert!(ks_pvalue(xs, |x| beta.cdf(x)) > P_MIN);
}

#[test]
fn projection_onto_random_plane_is_beta() {
    // ‖P e1‖² ~ Beta(k, n−k) for P the projection onto a Haar k-plane
    for (k, n) in [(1usize, 2usize), (1, 3), (2, 3), (2, 4)] {
        let mut rng = substream(4, &[k as u64, n as u64]);
        let xs: Vec<f64> = (0..N)
            .map(|_| {
                let s = random_subspace_from(k, n, &mut rng).unwrap();
                (0..k).map(|j| s.frame[(0, j)].norm_sqr()).sum()
            })
            .collect();
        let beta = Beta::new(k as f64, (n - k) as f64).unwrap();
        let p = ks_pvalue(xs, |x| beta.cdf(x));
        assert!(p > P_MIN, "k={k} n={n}: p={p}");
    }
}

#[test]
fn ks_rejects_a_wrong_law() {
    let mut rng = substream(5, &[]);
    let xs: Vec<f64> = (0..N)
        .map(|_| haar_unitary_from(3, &mut rng).entries[(0, 0)].norm_sqr())
        .collect();
    let wrong = Beta::new(1.0, 1.0).unwrap();
    assert!(ks_pvalue(xs, |x| wrong.cdf(x)) < 1e-6);
}
