use num_complex::Complex64;
use proptest::prelude::*;

use lelong_core::bergman::{build_model, multi_indices, QuadratureSpec};
use lelong_core::geometry::{haar_unitary, restrict_to_line};
use lelong_core::kiselman::{directional_nu, DirectionSpec, KiselmanConfig};
use lelong_core::rng::stream_key;
use lelong_core::toric::classical_lelong;
use lelong_core::weights::make_radial;
use lelong_core::{ComplexPoint, Exec, ToricForm};

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

fn arb_form() -> impl Strategy<Value = ToricForm> {
    (2usize..=3).prop_flat_map(|n| {
        prop_oneof![
            (1..=n).prop_map(move |k| ToricForm::sum_squares(k, n).unwrap()),
            prop::collection::vec(1u32..=4, 1..=n).prop_map(move |a| ToricForm::monomial(a, n).unwrap()),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn basis_size_is_binomial(n in 1usize..=4, d in 0u32..=7) {
        let idx = multi_indices(n, d);
        prop_assert_eq!(idx.len() as u64, binomial(n as u64 + d as u64, d as u64));
        prop_assert!(idx.windows(2).all(|w| w[0].iter().sum::<u32>() <= w[1].iter().sum::<u32>()));
    }

    #[test]
    fn stream_keys_separate_tags(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(stream_key(seed, &[a]), stream_key(seed, &[a]));
        if a != b {
            prop_assert_ne!(stream_key(seed, &[a]), stream_key(seed, &[b]));
        }
        prop_assert_ne!(stream_key(seed, &[a]), stream_key(seed, &[a, 0]));
    }

    #[test]
    fn generic_line_sees_classical_lelong_number(form in arb_form(), seed in any::<u64>()) {
        let n = form.n;
        let u = haar_unitary(n, seed).unwrap();
        let v: Vec<Complex64> = (0..n).map(|i| u.entries[(i, 0)]).collect();
        let line = restrict_to_line(&form.to_expr(), &ComplexPoint::origin(n), &v).unwrap();
        prop_assert!((line.order_at_origin_1d() - classical_lelong(&form)).abs() < 1e-9);
    }

    #[test]
    fn monomial_directional_number_is_linear(alpha in prop::collection::vec(1u32..=4, 2), a in prop::collection::vec(0.2f64..3.0, 2)) {
        // shell sups of log|z^α| on the torus |z_i| = r^{a_i} are exact
        let form = ToricForm::monomial(alpha.clone(), 2).unwrap();
        let d = DirectionSpec::new(a.clone()).unwrap();
        let cfg = KiselmanConfig { samples_per_shell: 64, ..KiselmanConfig::default() };
        let r = directional_nu(&form.to_expr(), &ComplexPoint::origin(2), &d, &cfg, 1).unwrap();
        let exact: f64 = alpha.iter().zip(&a).map(|(x, y)| *x as f64 * y).sum();
        prop_assert!((r.nu - exact).abs() < 1e-9 * exact, "{} vs {}", r.nu, exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn bergman_value_grows_with_degree(
        alpha in prop::collection::vec(0u32..=2, 2),
        t in 0.0f64..1.5,
        seed in any::<u64>(),
        pts in prop::collection::vec((-0.24f64..0.24, -0.24f64..0.24, -0.24f64..0.24, -0.24f64..0.24), 5),
    ) {
        let text = format!("log(|z1^{}*z2^{}|^1) + 0.5*log(|1|^2 + |z1|^2)", alpha[0] + 1, alpha[1] + 1);
        let e = lelong_core::parse(&text).unwrap();
        let a = ComplexPoint::origin(2);
        let w = make_radial(t, a.clone()).unwrap();
        let quad = QuadratureSpec { samples: 6000, seed };
        let models: Vec<_> = (0..=3)
            .map(|d| build_model(&e, &w, &a, 1, d, 0.5, &quad, Exec::Sequential).unwrap())
            .collect();
        for (x1, y1, x2, y2) in pts {
            let z = ComplexPoint::new(vec![Complex64::new(x1, y1), Complex64::new(x2, y2)]).unwrap();
            let mut last = 0.0;
            for m in &models {
                let b = m.bergman_value(&z).unwrap();
                prop_assert!(b >= last * (1.0 - 1e-10), "{} < {}", b, last);
                let psi = m.psi_expr().unwrap().evaluate(z.coords()).unwrap();
                prop_assert!((psi - b.ln() / 2.0).abs() < 1e-8 * psi.abs().max(1.0));
                last = b;
            }
        }
    }
}
