use num_complex::Complex64;
use num_rational::BigRational;
use serde_json::{json, Value};
use std::str::FromStr;

use lelong_core::bergman::{build_model, QuadratureSpec};
use lelong_core::kiselman::{directional_nu, geometric_radii, DirectionSpec, KiselmanConfig};
use lelong_core::montecarlo::suites::levelset_scan;
use lelong_core::montecarlo::threshold::{ABOVE_BRACKET, BELOW_BRACKET};
use lelong_core::montecarlo::{
    divergence_exponent, estimate_threshold, integral_profile, AmsConfig, ProfileConfig, ThresholdConfig,
    ThresholdEstimate,
};
use lelong_core::rng::stream_key;
use lelong_core::toric::{nu_exact, nu_exact_literal, parse_decimal, t_grid};
use lelong_core::weights::{make_expr_weight, make_radial, WeightSpec};
use lelong_core::{classify_toric, parse, ComplexPoint, Exec, LelongError, PshExpr, Result, ToricForm};

use crate::args::*;
use crate::report::{num, Report, Table};

pub fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| LelongError::invalid("--seed is required for randomized commands"))
}

pub fn parse_expr(a: &ExprArgs) -> Result<(PshExpr, usize)> {
    let e = parse(&a.expr)?;
    let n = a.n.unwrap_or_else(|| e.arity().max(1));
    if e.arity() > n {
        return Err(LelongError::Arity {
            expected: n,
            found: e.arity(),
            context: "--n".into(),
        });
    }
    Ok((e, n))
}

/// Comma-separated complex coordinates; `None` is the origin.
pub fn parse_point(text: Option<&str>, n: usize) -> Result<ComplexPoint> {
    let Some(text) = text else {
        return Ok(ComplexPoint::origin(n));
    };
    let coords = text
        .split(',')
        .map(|c| {
            let c = c.trim().replace(' ', "");
            Complex64::from_str(&c).map_err(|_| LelongError::invalid(format!("bad complex number `{c}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if coords.len() != n {
        return Err(LelongError::Arity {
            expected: n,
            found: coords.len(),
            context: "point coordinates".into(),
        });
    }
    ComplexPoint::new(coords)
}

pub fn parse_grid(text: &str, n: usize) -> Result<Vec<ComplexPoint>> {
    let pts = text
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|p| parse_point(Some(p), n))
        .collect::<Result<Vec<_>>>()?;
    if pts.is_empty() {
        return Err(LelongError::invalid("empty grid"));
    }
    Ok(pts)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| LelongError::invalid(format!("not a number: `{s}`")))
}

fn split_colon(s: &str, parts: usize, what: &str) -> Result<Vec<String>> {
    let v: Vec<String> = s.split(':').map(|x| x.trim().to_string()).collect();
    if v.len() != parts {
        return Err(LelongError::invalid(format!(
            "{what} must have {parts} ':'-separated parts, got `{s}`"
        )));
    }
    Ok(v)
}

fn fmt_point(p: &ComplexPoint) -> String {
    p.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn weight_spec(w: &WeightArgs, n: usize) -> Result<WeightSpec> {
    let a = parse_point(w.center.as_deref(), n)?;
    match &w.weight_expr {
        Some(text) => make_expr_weight(parse(text)?, a, None),
        None => make_radial(w.weight_t.unwrap_or(0.0), a),
    }
}

pub fn threshold_config(b: &BudgetArgs) -> Result<ThresholdConfig> {
    let br = split_colon(&b.bracket, 2, "--bracket")?;
    let defaults = ThresholdConfig::default();
    let cfg = ThresholdConfig {
        bracket: (parse_f64(&br[0])?, parse_f64(&br[1])?),
        tol: b.tol,
        radius: b.radius,
        replicas: b.replicas,
        ams: AmsConfig {
            particles: b.particles,
            levels: b.levels,
            ..defaults.ams
        },
        ..defaults
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn exact(a: &ExactArgs) -> Result<Report> {
    let (e, n) = parse_expr(&a.expr)?;
    let form = classify_toric(&e, n)
        .ok_or_else(|| LelongError::Unsupported(format!("`{}` is not a recognized toric form", a.expr.expr)))?;
    let t = parse_decimal(&a.t)?;
    let v = nu_exact(&form, &t)?;
    let lit = nu_exact_literal(&form, &t)?;
    let mut table = Table::new(&["t", "exact", "value"]);
    table.push(vec![a.t.clone(), v.to_string(), num(v.to_f64())]);
    let body = json!({
        "expr": a.expr.expr,
        "n": n,
        "t": a.t,
        "form": format!("{:?}", form.kind),
        "scale": form.scale,
        "exact": v.to_string(),
        "value": v.to_f64(),
        "literal_formula": lit.to_string(),
    });
    Ok(Report::csv(body, table, None))
}

/// Columns shared by `estimate` and `scan-t`.
const THRESHOLD_HEADER: [&str; 6] = ["t", "nu_hat", "ci_lo", "ci_hi", "exact", "flags"];

/// Closed form at `t` with its flags; empty when there is none.
fn exact_cell(form: Option<&ToricForm>, t: &BigRational, flags: &mut Vec<String>) -> Result<(String, Value)> {
    let Some(f) = form else {
        flags.push("no_closed_form".into());
        return Ok((String::new(), Value::Null));
    };
    match nu_exact(f, t) {
        Ok(v) => {
            let lit = nu_exact_literal(f, t)?;
            if lit != v {
                flags.push(format!("literal_formula={lit}"));
            }
            Ok((
                num(v.to_f64()),
                json!({ "value": v.to_f64(), "rational": v.to_string(), "literal_formula": lit.to_string() }),
            ))
        }
        Err(LelongError::Unsupported(_)) => {
            flags.push("no_closed_form".into());
            Ok((String::new(), Value::Null))
        }
        Err(e) => Err(e),
    }
}

fn estimate_flags(est: &ThresholdEstimate, flags: &mut Vec<String>) {
    for w in &est.warnings {
        if w.contains(BELOW_BRACKET) {
            flags.push("below_bracket".into());
        } else if w.contains(ABOVE_BRACKET) {
            flags.push("above_bracket".into());
        } else {
            flags.push("warning".into());
        }
    }
}

fn threshold_row(t: &str, est: Option<&ThresholdEstimate>, exact: String, flags: Vec<String>) -> Vec<String> {
    let (nu, lo, hi) = match est {
        Some(e) => (num(e.nu_hat), num(e.ci.0), num(e.ci.1)),
        None => (String::new(), String::new(), String::new()),
    };
    vec![t.to_string(), nu, lo, hi, exact, flags.join(";")]
}

pub fn estimate(a: &EstimateArgs) -> Result<Report> {
    let seed = require_seed(a.seed)?;
    let (e, n) = parse_expr(&a.expr)?;
    let w = weight_spec(&a.weight, n)?;
    let cfg = threshold_config(&a.budget)?;
    let est = estimate_threshold(&e, &w, &w.center, &cfg, seed)?;
    let mut flags = Vec::new();
    estimate_flags(&est, &mut flags);
    // the closed forms are ν_{0,t} for radial weights at the origin
    let t = match (&a.weight.weight_expr, w.center.is_origin()) {
        (None, true) => Some(a.weight.weight_t.unwrap_or(0.0)),
        _ => None,
    };
    let (exact, exact_json) = match t {
        Some(t) => exact_cell(classify_toric(&e, n).as_ref(), &parse_decimal(&num(t))?, &mut flags)?,
        None => (String::new(), Value::Null),
    };
    let mut body = json!({ "expr": a.expr.expr, "n": n, "estimate": est, "exact": exact_json });
    if let Some(range) = &a.budget.annuli {
        let r = split_colon(range, 2, "--annuli")?;
        let pcfg = ProfileConfig {
            k_min: r[0].parse().map_err(|_| LelongError::invalid("bad --annuli"))?,
            k_max: r[1].parse().map_err(|_| LelongError::invalid("bad --annuli"))?,
            n_samples: a.budget.samples,
            exec: Exec::Parallel,
        };
        let prof = integral_profile(&e, &w, 1.0, &pcfg, seed)?;
        let fit = divergence_exponent(&prof)?;
        body["annulus_profile"] = json!({ "s": 1.0, "profile": prof, "fit": fit });
    }
    let mut table = Table::new(&THRESHOLD_HEADER);
    let t_cell = t.map(num).unwrap_or_default();
    table.push(threshold_row(&t_cell, Some(&est), exact, flags));
    Ok(Report::csv(body, table, Some(seed)))
}

pub fn scan_t(a: &ScanArgs) -> Result<Report> {
    let (e, n) = parse_expr(&a.expr)?;
    let g = split_colon(&a.t_grid, 3, "--t-grid")?;
    let (lo, hi, step) = (parse_decimal(&g[0])?, parse_decimal(&g[1])?, parse_decimal(&g[2])?);
    if step <= BigRational::from_integer(0.into()) {
        return Err(LelongError::invalid("--t-grid step must be positive"));
    }
    let half = step.clone() / BigRational::from_integer(2.into());
    let grid = t_grid(&lo, &(hi + half), &step);
    let form = classify_toric(&e, n);
    if form.is_none() && !a.estimate {
        return Err(LelongError::Unsupported(
            "no closed form for this expression; pass --estimate".into(),
        ));
    }
    let seed = if a.estimate {
        Some(require_seed(a.seed)?)
    } else {
        a.seed
    };
    let cfg = threshold_config(&a.budget)?;
    let mut table = Table::new(&THRESHOLD_HEADER);
    let mut rows = Vec::new();
    for (i, t) in grid.iter().enumerate() {
        let tf = num_traits::ToPrimitive::to_f64(t).unwrap_or(f64::NAN);
        let mut flags = Vec::new();
        let (exact, exact_json) = exact_cell(form.as_ref(), t, &mut flags)?;
        let mut obj = json!({ "t": tf, "exact": exact_json });
        let est = match seed.filter(|_| a.estimate) {
            Some(s) => {
                let a0 = ComplexPoint::origin(n);
                let w = make_radial(tf, a0.clone())?;
                let est = estimate_threshold(&e, &w, &a0, &cfg, stream_key(s, &[i as u64]))?;
                estimate_flags(&est, &mut flags);
                obj["estimate"] = json!(est);
                Some(est)
            }
            None => None,
        };
        table.push(threshold_row(&num(tf), est.as_ref(), exact, flags));
        rows.push(obj);
    }
    Ok(Report::csv(
        json!({ "expr": a.expr.expr, "n": n, "rows": rows }),
        table,
        seed,
    ))
}

pub fn restrict(a: &RestrictArgs) -> Result<Report> {
    let seed = require_seed(a.seed)?;
    let (e, n) = parse_expr(&a.expr)?;
    let center = parse_point(a.center.as_deref(), n)?;
    let cfg = threshold_config(&a.budget)?;
    let rep = lelong_core::geometry::lelong_via_lines(&e, &center, a.lines, &cfg, seed)?;
    let mut table = Table::new(&["line_index", "nu_hat", "ci_lo", "ci_hi"]);
    for l in &rep.lines {
        table.push(vec![
            l.index.to_string(),
            num(l.estimate.nu_hat),
            num(l.estimate.ci.0),
            num(l.estimate.ci.1),
        ]);
    }
    let body = json!({ "expr": a.expr.expr, "n": n, "lines": rep });
    Ok(Report::csv(body, table, Some(seed))
        .with_meta("median", num(rep.median))
        .with_meta("mad", num(rep.mad))
        .with_meta("multimodal", rep.multimodal))
}

pub fn bergman(a: &BergmanArgs) -> Result<Report> {
    let seed = require_seed(a.seed)?;
    let (e, n) = parse_expr(&a.expr)?;
    let grid = parse_grid(&a.grid, n)?;
    let fixed = match &a.center {
        Some(c) => Some(parse_point(Some(c), n)?),
        None => None,
    };
    let degree = a.degree.unwrap_or(if n <= 2 { 6 } else { 4 });
    let phi = e.compile(n)?;
    let mut table = Table::new(&["point", "bergman_value", "psi_m", "phi", "dim"]);
    let mut rows = Vec::new();
    for (i, z) in grid.iter().enumerate() {
        let center = fixed.clone().unwrap_or_else(|| z.clone());
        let w = make_radial(a.t, center.clone())?;
        let quad = QuadratureSpec {
            samples: a.samples,
            seed: stream_key(seed, &[i as u64]),
        };
        let model = build_model(&e, &w, &center, a.m, degree, a.radius, &quad, Exec::Parallel)?;
        if i == 0 {
            if let Some(path) = &a.dump {
                let text = serde_json::to_string_pretty(&model.dump()).expect("serializable");
                std::fs::write(path, text).map_err(|err| LelongError::invalid(format!("{}: {err}", path.display())))?;
            }
        }
        let b = model.bergman_value(z)?;
        let psi = if b > 0.0 {
            b.ln() / (2.0 * a.m as f64)
        } else {
            f64::NEG_INFINITY
        };
        let ph = phi.value(z.coords());
        table.push(vec![fmt_point(z), num(b), num(psi), num(ph), model.dim().to_string()]);
        rows.push(json!({ "point": z, "bergman_value": b, "psi_m": psi, "phi": ph, "gamma": model.gamma }));
    }
    let body = json!({ "expr": a.expr.expr, "n": n, "m": a.m, "degree": degree, "radius": a.radius, "rows": rows });
    Ok(Report::csv(body, table, Some(seed)))
}

fn parse_dir(s: &str) -> Result<f64> {
    match s.split_once('/') {
        Some((p, q)) => Ok(parse_f64(p)? / parse_f64(q)?),
        None => parse_f64(s),
    }
}

pub fn kiselman(a: &KiselmanArgs) -> Result<Report> {
    let seed = require_seed(a.seed)?;
    let dirs: Vec<f64> = a.dirs.split(',').map(parse_dir).collect::<Result<_>>()?;
    let n = a.expr.n.unwrap_or(dirs.len());
    let (e, n) = parse_expr(&ExprArgs {
        expr: a.expr.expr.clone(),
        n: Some(n),
    })?;
    let w = parse_point(a.point.as_deref(), n)?;
    let r = split_colon(&a.radii, 3, "--radii")?;
    let count: usize = r[2].parse().map_err(|_| LelongError::invalid("bad radius count"))?;
    let cfg = KiselmanConfig {
        radii: geometric_radii(parse_f64(&r[0])?, parse_f64(&r[1])?, count),
        samples_per_shell: a.samples,
        exec: Exec::Parallel,
    };
    let est = directional_nu(&e, &w, &DirectionSpec::new(dirs)?, &cfg, seed)?;
    let mut table = Table::new(&["r", "shell_sup", "quotient"]);
    for s in &est.shells {
        table.push(vec![num(s.r), num(s.shell_sup), num(s.quotient)]);
    }
    let body = json!({ "expr": a.expr.expr, "n": n, "estimate": est });
    Ok(Report::csv(body, table, Some(seed))
        .with_meta("nu", num(est.nu))
        .with_meta("stderr", num(est.stderr)))
}

pub fn levelset(a: &LevelsetArgs) -> Result<Report> {
    let seed = require_seed(a.seed)?;
    let (e, n) = parse_expr(&a.expr)?;
    let w = weight_spec(&a.weight, n)?;
    let grid = parse_grid(&a.grid, n)?;
    let cfg = threshold_config(&a.budget)?;
    let scan = levelset_scan(&e, &w, &grid, a.c, &cfg, seed)?;
    let mut table = Table::new(&["point", "nu_hat", "ci_lo", "ci_hi", "above"]);
    for p in &scan {
        table.push(vec![
            fmt_point(&p.point),
            num(p.nu_hat),
            num(p.ci.0),
            num(p.ci.1),
            p.above.to_string(),
        ]);
    }
    let body: Value = json!({ "expr": a.expr.expr, "n": n, "c": a.c, "points": scan });
    Ok(Report::csv(body, table, Some(seed)))
}
