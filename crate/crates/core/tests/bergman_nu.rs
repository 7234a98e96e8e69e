//! `ν(Ψ^m) ≤ ν(φ)` for monomial `φ`, with `Ψ^m = (1/2m) log B_0` the
//! truncated Bergman potential centred at the origin.

use lelong_core::bergman::{build_model, QuadratureSpec};
use lelong_core::montecarlo::estimate_threshold;
use lelong_core::montecarlo::suites::{half_width, quick_config};
use lelong_core::rng::stream_key;
use lelong_core::weights::make_radial;
use lelong_core::{parse, ComplexPoint, Exec};

#[test]
fn bergman_potential_does_not_raise_the_threshold() {
    let cfg = quick_config();
    let a = ComplexPoint::origin(2);
    for (i, text) in ["log(|z1|^1)", "log(|z1*z2|^1)", "log(|z1^2*z2|^1)"].iter().enumerate() {
        let phi = parse(text).unwrap();
        for t in [0.0, 1.0] {
            let w = make_radial(t, a.clone()).unwrap();
            let base = estimate_threshold(&phi, &w, &a, &cfg, stream_key(3, &[i as u64, t as u64])).unwrap();
            for m in [1u32, 2] {
                let quad = QuadratureSpec {
                    samples: 8000,
                    seed: stream_key(4, &[i as u64, m as u64]),
                };
                let model = build_model(&phi, &w, &a, m, 3, 0.5, &quad, Exec::Parallel).unwrap();
                let psi = model.psi_expr().unwrap();
                let est =
                    estimate_threshold(&psi, &w, &a, &cfg, stream_key(5, &[i as u64, t as u64, m as u64])).unwrap();
                let slack = half_width(&base) + half_width(&est);
                assert!(
                    est.nu_hat <= base.nu_hat + slack,
                    "{text} t={t} m={m}: ν(Ψ) = {} > ν(φ) = {} + {slack}",
                    est.nu_hat,
                    base.nu_hat
                );
            }
        }
    }
}
