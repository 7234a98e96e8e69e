//! `lelong verify`: one named check per property.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use lelong_core::bergman::{build_model, QuadratureSpec};
use lelong_core::geometry::{lelong_via_lines, polar_grassmann_check, TestFunction};
use lelong_core::kiselman::{rescale_identity_check, KiselmanConfig};
use lelong_core::montecarlo::suites::{half_width, hoelder_property_suite, quick_config, scaling_check};
use lelong_core::montecarlo::{estimate_threshold, ThresholdConfig};
use lelong_core::rng::{stream_key, substream};
use lelong_core::toric::{nu_exact_f64, parse_decimal, skoda_chain_check, t_grid};
use lelong_core::weights::make_radial;
use lelong_core::{parse, ComplexPoint, Exec, Result, ToricForm};

use crate::args::{Suite, VerifyArgs};
use crate::commands::require_seed;
use crate::report::{Report, Table};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

struct Budget {
    cfg: ThresholdConfig,
    grass_samples: usize,
    bergman_points: usize,
    lines: usize,
}

fn toric_forms() -> Result<Vec<ToricForm>> {
    Ok(vec![
        ToricForm::sum_squares(1, 2)?,
        ToricForm::sum_squares(2, 3)?,
        ToricForm::monomial(vec![1, 2], 3)?,
        ToricForm::monomial(vec![2, 2], 2)?,
        ToricForm::cusp(3.0)?,
    ])
}

fn skoda_and_convexity() -> Result<(Check, Check)> {
    let mut chain = Vec::new();
    let mut convex = Vec::new();
    let step = parse_decimal("0.05")?;
    let zero = parse_decimal("0")?;
    for f in toric_forms()? {
        let top = parse_decimal(&format!("{}", f.n))?;
        let rep = skoda_chain_check(&f, &t_grid(&zero, &top, &step))?;
        for v in rep.violations {
            if v.contains("convexity") || v.contains("concavity") {
                convex.push(v);
            } else {
                chain.push(v);
            }
        }
    }
    Ok((
        check("skoda_chain", chain.is_empty(), chain.join("; ")),
        check("convexity_in_t", convex.is_empty(), convex.join("; ")),
    ))
}

fn oracle_equivalence(b: &Budget, seed: u64) -> Result<Check> {
    let mut bad = Vec::new();
    for (i, (text, n, t)) in [("0.5*log(|z1|^2 + |z2|^2)", 2, 1.0), ("log(|z1*z2|^1)", 2, 0.0)]
        .into_iter()
        .enumerate()
    {
        let e = parse(text)?;
        let form = lelong_core::classify_toric(&e, n).expect("toric");
        let exact = nu_exact_f64(&form, t)?;
        let a = ComplexPoint::origin(n);
        let est = estimate_threshold(
            &e,
            &make_radial(t, a.clone())?,
            &a,
            &b.cfg,
            stream_key(seed, &[i as u64]),
        )?;
        if !(est.ci.0 <= exact && exact <= est.ci.1) {
            bad.push(format!(
                "{text} t={t}: exact {exact} outside ({}, {})",
                est.ci.0, est.ci.1
            ));
        }
    }
    Ok(check("oracle_equivalence", bad.is_empty(), bad.join("; ")))
}

fn bergman_monotonicity(b: &Budget, seed: u64) -> Result<Check> {
    let e = parse("log(|z1|^1) + 0.5*log(|1|^2 + |z2|^2)")?;
    let a = ComplexPoint::real(&[0.05, -0.05])?;
    let w = make_radial(1.0, a.clone())?;
    let quad = QuadratureSpec { samples: 20_000, seed };
    let models = (0..=4)
        .map(|d| build_model(&e, &w, &a, 1, d, 0.5, &quad, Exec::Parallel))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = substream(seed, &[0x4D4F_4E4F]);
    let mut bad = 0;
    for _ in 0..b.bergman_points {
        let z: Vec<Complex64> = (0..2)
            .map(|_| Complex64::new(rng.gen_range(-0.24..0.24), rng.gen_range(-0.24..0.24)))
            .collect();
        let z = ComplexPoint::new(z)?;
        let vals = models.iter().map(|m| m.bergman_value(&z)).collect::<Result<Vec<_>>>()?;
        if vals.windows(2).any(|p| p[1] < p[0] * (1.0 - 1e-10)) {
            bad += 1;
        }
        let last = models.last().unwrap();
        let o = last.bergman_value_eigen(&z)?;
        if (vals[4] - o).abs() > 1e-8 * o {
            bad += 1;
        }
    }
    // reproducing identity on one point
    let m = &models[3];
    let z = ComplexPoint::real(&[0.1, 0.1])?;
    let k = m.kernel_coefficients(&z)?;
    let h = DVector::from_fn(m.dim(), |i, _| Complex64::new(1.0 / (1 + i) as f64, 0.3));
    let (lhs, rhs) = (m.inner(&h, &k), m.eval_element(&h, z.coords()));
    if (lhs - rhs).norm() > 1e-8 * rhs.norm() {
        bad += 1;
    }
    Ok(check(
        "bergman_monotonicity",
        bad == 0,
        format!("{bad} failures over {} points", b.bergman_points),
    ))
}

pub fn run(a: &VerifyArgs) -> Result<Report> {
    let seed = require_seed(a.seed)?;
    let b = match a.suite {
        Suite::Fast => Budget {
            cfg: quick_config(),
            grass_samples: 2000,
            bergman_points: 20,
            lines: 5,
        },
        Suite::Full => Budget {
            cfg: ThresholdConfig::default(),
            grass_samples: 10_000,
            bergman_points: 100,
            lines: 9,
        },
    };
    let key = |i: u64| stream_key(seed, &[i]);
    let mut checks = Vec::new();

    let log1 = parse("log(|z1|^1)")?;
    let s = scaling_check(&log1, 2.0, 0.0, 2, &b.cfg, key(1))?;
    checks.push(check(
        "scaling",
        s.ok,
        format!("ν(2φ) = {} vs 2ν(φ) = {} ± {}", s.nu_other, s.target, s.slack),
    ));

    let a2 = ComplexPoint::origin(2);
    let h = hoelder_property_suite(
        &log1,
        &parse("log(|z2|^1)")?,
        &make_radial(1.0, a2.clone())?,
        &a2,
        &b.cfg,
        key(2),
    )?;
    checks.push(check(
        "subadditivity",
        h.subadditive_ok,
        format!("ν(φ+φ′) = {} ≤ {} + {} (slack {})", h.nu_sum, h.nu1, h.nu2, h.slack_sum),
    ));
    checks.push(check(
        "max_property",
        h.max_property_ok,
        format!(
            "ν(max) = {} ≥ min({}, {}) (slack {})",
            h.nu_max, h.nu1, h.nu2, h.slack_max
        ),
    ));

    let (chain, convex) = skoda_and_convexity()?;
    checks.push(chain);
    checks.push(convex);

    checks.push(oracle_equivalence(&b, key(3))?);

    let pairs: &[(usize, usize)] = match a.suite {
        Suite::Fast => &[(2, 1)],
        Suite::Full => &[(2, 1), (3, 1), (3, 2)],
    };
    let mut worst: f64 = 0.0;
    for &(n, k) in pairs {
        let g = polar_grassmann_check(
            &TestFunction::gaussian(n),
            k,
            n,
            200,
            b.grass_samples,
            key(4),
            Exec::Parallel,
        )?;
        worst = worst.max(g.rel_error);
    }
    checks.push(check(
        "grassmann_formula",
        worst <= 0.03,
        format!("max relative error {worst:.4}"),
    ));

    let ball = parse("0.5*log(|z1|^2 + |z2|^2)")?;
    let lines = lelong_via_lines(&ball, &a2, b.lines, &b.cfg, key(5))?;
    let top = estimate_threshold(&ball, &make_radial(1.0, a2.clone())?, &a2, &b.cfg, key(6))?;
    let hw = lines.lines.iter().map(|l| half_width(&l.estimate)).fold(0.0, f64::max);
    let slack = hw + half_width(&top);
    checks.push(check(
        "line_restriction",
        (lines.median - top.nu_hat).abs() <= slack,
        format!("median {} vs t=n−1 threshold {} ± {}", lines.median, top.nu_hat, slack),
    ));

    checks.push(bergman_monotonicity(&b, key(7))?);

    let r = rescale_identity_check(
        &parse("log(|z1*z2|^1)")?,
        &[2, 3],
        1,
        &KiselmanConfig::default(),
        key(8),
    )?;
    checks.push(check(
        "kiselman_rescaling",
        r.ok,
        format!("{} vs {} (tolerance {})", r.lhs, r.rhs, r.tolerance),
    ));

    let violations = checks.iter().filter(|c| !c.passed).count();
    let mut table = Table::new(&["name", "status", "detail"]);
    for c in &checks {
        table.push(vec![
            c.name.to_string(),
            if c.passed { "pass" } else { "FAIL" }.to_string(),
            c.detail.clone(),
        ]);
    }
    let suite = match a.suite {
        Suite::Fast => "fast",
        Suite::Full => "full",
    };
    let mut rep = Report::csv(
        json!({ "suite": suite, "checks": checks, "violations": violations }),
        table,
        Some(seed),
    )
    .with_meta("suite", suite)
    .with_meta("violations", violations);
    rep.violations = violations;
    Ok(rep)
}
