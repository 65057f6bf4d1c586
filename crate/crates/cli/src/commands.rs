use std::path::Path;

use normbound::constants::{
    c_const, doob_factor, k1_with_maximizer, k2_const, k3_const, k_const, AlphaBeta,
};
use normbound::lipschitz::{analyze_corpus_entry, concentration_tail};
use normbound::martingale_lab::{
    drifted_two_point_model, enumerate_exact, equal_weights, lattice_grid, linear_weights,
    moment_domination_from, one_sided_model, rademacher_model, sign_adapted_model, simulate_mc,
    standard_t_grid, tail_domination_from, two_point_increment, uniform_grid, unit_grid,
    verify_lemma_lr, verify_maximal_moment, MartingaleModel, VerificationReport,
};
use normbound::schema::{parse_bound_sequence, parse_corpus, parse_model, SCHEMA_VERSION};
use normbound::tail_bounds::{
    bound_report, combined_bound, hoeffding_bound, optimal_bound, pinelis_bound, rademacher_discrete_bound,
    BoundQuery,
};
use serde_json::{json, Value};

use crate::args::{Command, Method, Suite};
use crate::CliError;

/// A finished command: the JSON record, its CSV projection, and whether
/// every checked inequality held.
pub struct Output {
    pub record: Value,
    pub csv_header: Vec<&'static str>,
    pub csv_rows: Vec<Vec<String>>,
    pub passed: bool,
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn record(command: &str, input: Value, method: &str, result: Value, tolerance: Value) -> Value {
    json!({
        "schema": SCHEMA_VERSION,
        "command": command,
        "input": input,
        "method": method,
        "result": result,
        "tolerance": tolerance,
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn parts<const N: usize>(spec: &str, rest: &str) -> Result<[f64; N], CliError> {
    let vals: Vec<&str> = rest.split(':').collect();
    if vals.len() != N {
        return Err(CliError::usage(format!("model spec {spec:?} needs {N} parameter(s)")));
    }
    let mut out = [0.0; N];
    for (o, v) in out.iter_mut().zip(vals) {
        *o = v
            .parse()
            .map_err(|_| CliError::usage(format!("bad number {v:?} in model spec {spec:?}")))?;
    }
    Ok(out)
}

fn count(v: f64, spec: &str) -> Result<usize, CliError> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(CliError::usage(format!("step count in {spec:?} must be a positive integer")))
    }
}

/// Builds a model from a preset spec or a model file.
pub fn load_model(spec: &str) -> Result<MartingaleModel, CliError> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let model = match name {
        "rademacher" => rademacher_model(&equal_weights(count(parts::<1>(spec, rest)?[0], spec)?)),
        "rademacher-linear" => rademacher_model(&linear_weights(count(parts::<1>(spec, rest)?[0], spec)?)),
        "two-point" => two_point_increment(parts::<1>(spec, rest)?[0]).map(|tp| tp.model()),
        "sign-adapted" => sign_adapted_model(count(parts::<1>(spec, rest)?[0], spec)?),
        "drifted" => {
            let [r, drift, n] = parts::<3>(spec, rest)?;
            drifted_two_point_model(r, drift, count(n, spec)?)
        }
        "one-sided" => {
            let [p, n] = parts::<2>(spec, rest)?;
            one_sided_model(p, count(n, spec)?)
        }
        _ => return Ok(parse_model(&read(Path::new(spec))?)?),
    }?;
    Ok(model)
}

pub fn run(command: &Command) -> Result<Output, CliError> {
    match command {
        Command::Constants { alpha, beta } => constants(*alpha, *beta),
        Command::Bound { x, s, method } => bound(*x, *s, *method),
        Command::BoundSequence { file, x } => bound_sequence(file, *x),
        Command::Rademacher { n, x, weights } => rademacher(*n, *x, weights.as_deref()),
        Command::Verify { suite } => verify(suite),
        Command::Simulate {
            model,
            paths,
            seed,
            x_grid,
        } => simulate(&model.model, *paths, *seed, x_grid),
        Command::Lipschitz { file, x_grid } => lipschitz(file, x_grid),
    }
}

fn constants(alpha: f64, beta: f64) -> Result<Output, CliError> {
    let ab = AlphaBeta::new(alpha, beta)?;
    let mut notes = Vec::new();
    let mut attempt = |name: &str, r: normbound::Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{name}: {e}"));
            None
        }
    };
    let k1 = k1_with_maximizer(ab);
    let k1_value = attempt("k1", k1.as_ref().map(|r| r.value).map_err(Clone::clone));
    let (k1_sigma, k1_edge) = k1.as_ref().map(|r| (r.sigma, r.at_bracket_edge)).unwrap_or((None, false));
    let k1_limit = k1_value.is_some() && k1_sigma.is_none();
    let k2 = attempt("k2", k2_const(ab));
    let k3 = attempt("k3", k3_const(ab));
    let c = c_const(ab);
    let k = k_const(ab);
    let result = json!({
        "c": c,
        "k": k,
        "k1": k1_value,
        "k1_sigma": k1_sigma,
        "k1_is_limit": k1_limit,
        "k1_at_bracket_edge": k1_edge,
        "k2": k2,
        "k3": k3,
        "doob_factor": if alpha > 1.0 { Some(doob_factor(alpha)) } else { None },
        "notes": notes,
    });
    let rows = vec![vec![
        num(alpha),
        num(beta),
        num(c),
        num(k),
        opt_num(k1_value),
        opt_num(k1_sigma),
        opt_num(k2),
        opt_num(k3),
    ]];
    Ok(Output {
        record: record(
            "constants",
            json!({"alpha": alpha, "beta": beta}),
            "closed forms; k1 by log-scale search with golden-section refinement",
            result,
            json!({"k1_argument_tolerance": 1e-10}),
        ),
        csv_header: vec!["alpha", "beta", "c", "k", "k1", "k1_sigma", "k2", "k3"],
        csv_rows: rows,
        passed: true,
    })
}

fn bound(x: f64, s: f64, method: Method) -> Result<Output, CliError> {
    let q = BoundQuery::new(x, s)?;
    let report = bound_report(q);
    let (name, result, rows) = match method {
        Method::All => (
            "all",
            serde_json::to_value(report).expect("serializable"),
            vec![
                ("hoeffding", report.hoeffding),
                ("pinelis", report.pinelis),
                ("combined", report.combined),
                ("optimal", report.optimal),
            ],
        ),
        single => {
            let (name, value) = match single {
                Method::Hoeffding => ("hoeffding", hoeffding_bound(q)),
                Method::Pinelis => ("pinelis", pinelis_bound(q)),
                Method::Combined => ("combined", combined_bound(q)),
                _ => ("optimal", optimal_bound(q).value),
            };
            let mut result = json!({ "value": value });
            if single == Method::Optimal {
                result["optimal_t"] = json!(report.optimal_t);
                result["boundary_limit"] = json!(report.boundary_limit);
            }
            (name, result, vec![(name, value)])
        }
    };
    Ok(Output {
        record: record(
            "bound",
            json!({"x": x, "s": s, "method": name}),
            name,
            result,
            json!({"optimal_argument_tolerance": 1e-9}),
        ),
        csv_header: vec!["x", "s", "method", "value"],
        csv_rows: rows.into_iter().map(|(m, v)| vec![num(x), num(s), m.to_string(), num(v)]).collect(),
        passed: true,
    })
}

fn bound_sequence(file: &Path, x: f64) -> Result<Output, CliError> {
    let doc = parse_bound_sequence(&read(file)?)?;
    let r = doc.evaluate(x)?;
    let rows = vec![vec![num(x), num(r.scale), num(r.combined), opt_num(r.truncated)]];
    Ok(Output {
        record: record(
            "bound-sequence",
            json!({"x": x, "document": doc}),
            if r.truncated.is_some() { "combined+union-truncation" } else { "combined" },
            serde_json::to_value(&r).expect("serializable"),
            json!({}),
        ),
        csv_header: vec!["x", "scale", "combined", "truncated"],
        csv_rows: rows,
        passed: true,
    })
}

fn rademacher(n: u32, x: f64, weights: Option<&[f64]>) -> Result<Output, CliError> {
    let weights = match weights {
        Some(w) if w.len() != n as usize => {
            return Err(CliError::usage(format!("{} weights given for n = {n}", w.len())));
        }
        Some(w) => w.to_vec(),
        None => equal_weights(n as usize),
    };
    let model = rademacher_model(&weights)?;
    let e = enumerate_exact(&model)?;
    let exact = e.tail(x);
    let discrete = rademacher_discrete_bound(n, x)?;
    let s = model.scale();
    let combined = combined_bound(BoundQuery::new(x, s)?);
    let norm_ok = (s - 1.0).abs() <= 1e-12;
    let passed = !norm_ok || exact <= discrete;
    Ok(Output {
        record: record(
            "rademacher",
            json!({"n": n, "x": x, "weights": weights}),
            "exact enumeration",
            json!({
                "tail": exact,
                "scale": s,
                "discrete_comparison": discrete,
                "discrete_comparison_applies": norm_ok,
                "combined": combined,
            }),
            json!({}),
        ),
        csv_header: vec!["n", "x", "tail", "discrete_comparison", "combined"],
        csv_rows: vec![vec![n.to_string(), num(x), num(exact), num(discrete), num(combined)]],
        passed,
    })
}

fn report_output(suite: &str, input: Value, method: &str, tolerance: Value, rep: VerificationReport) -> Output {
    let row = vec![
        suite.to_string(),
        rep.checks.to_string(),
        rep.failed.to_string(),
        rep.passed.to_string(),
        num(rep.min_slack),
    ];
    let passed = rep.passed;
    Output {
        record: record(
            "verify",
            input,
            method,
            serde_json::to_value(&rep).expect("serializable"),
            tolerance,
        ),
        csv_header: vec!["suite", "checks", "failed", "passed", "min_slack"],
        csv_rows: vec![row],
        passed,
    }
}

fn chosen_scale(m: &MartingaleModel, scale: Option<f64>) -> Result<f64, CliError> {
    match scale {
        Some(s) if !(s.is_finite() && s > 0.0) => Err(CliError::usage(format!("--scale must be positive, got {s}"))),
        Some(s) => Ok(s),
        None => Ok(m.scale()),
    }
}

fn verify(suite: &Suite) -> Result<Output, CliError> {
    let domination = json!({"relative_to_max_1_rhs": 1e-10});
    Ok(match suite {
        Suite::Lemma {
            r_steps,
            t_min,
            t_max,
            t_step,
        } => {
            if *r_steps == 0 {
                return Err(CliError::usage("--r-steps must be positive"));
            }
            let rep = verify_lemma_lr(&unit_grid(*r_steps), &uniform_grid(*t_min, *t_max, *t_step)?)?;
            report_output(
                "lemma",
                json!({"suite": "lemma", "r_steps": r_steps, "t_min": t_min, "t_max": t_max, "t_step": t_step}),
                "product grid",
                json!({"relative_to_max_1_abs_rhs": 1e-9}),
                rep,
            )
        }
        Suite::Moments { model, scale } => {
            let m = load_model(&model.model)?;
            let e = enumerate_exact(&m)?;
            let s = chosen_scale(&m, *scale)?;
            let rep = moment_domination_from(&e, s, &standard_t_grid(s))?;
            report_output(
                "moments",
                json!({"suite": "moments", "model": model.model, "scale": s}),
                "exact enumeration",
                domination,
                rep,
            )
        }
        Suite::Tails { model, scale } => {
            let m = load_model(&model.model)?;
            let e = enumerate_exact(&m)?;
            let s = chosen_scale(&m, *scale)?;
            let rep = tail_domination_from(&e, m.kind, s, &lattice_grid(&e))?;
            report_output(
                "tails",
                json!({"suite": "tails", "model": model.model, "scale": s}),
                "exact enumeration",
                domination,
                rep,
            )
        }
        Suite::Maximal {
            model,
            alpha,
            beta,
            x,
            t,
        } => {
            let m = load_model(&model.model)?;
            let rep = verify_maximal_moment(&m, AlphaBeta::new(*alpha, *beta)?, *x, *t)?;
            report_output(
                "maximal",
                json!({"suite": "maximal", "model": model.model, "alpha": alpha, "beta": beta, "x": x, "t": t}),
                "exact enumeration",
                domination,
                rep,
            )
        }
        Suite::ConstantsChain { alphas, beta_step } => {
            if !(*beta_step > 0.0) {
                return Err(CliError::usage("--beta-step must be positive"));
            }
            let mut rep = VerificationReport::new("constants-chain");
            for &a in alphas {
                if !(a > 1.0) {
                    return Err(CliError::usage(format!("alphas must exceed 1, got {a}")));
                }
                let mut k = 0usize;
                loop {
                    let b = k as f64 * beta_step;
                    if b >= a {
                        break;
                    }
                    let p = AlphaBeta::new(a, b)?;
                    let loc = [("alpha", a), ("beta", b)];
                    let k1 = normbound::constants::k1_const(p)?;
                    rep.record("k <= k1", &loc, k_const(p), k1, 1e-8);
                    rep.record("k1 <= k2", &loc, k1, k2_const(p)?, 1e-8);
                    rep.record("k1 <= k3", &loc, k1, k3_const(p)?, 1e-8);
                    k += 1;
                }
                let diag = normbound::constants::k1_const(AlphaBeta::new(a, a)?)?;
                let gap = (diag - doob_factor(a)).abs();
                rep.record("|k1(a,a) - (a/(a-1))^a|", &[("alpha", a), ("beta", a)], gap, 1e-6, 0.0);
            }
            report_output(
                "constants-chain",
                json!({"suite": "constants-chain", "alphas": alphas, "beta_step": beta_step}),
                "closed forms and k1 search",
                json!({"chain_slack": -1e-8, "diagonal": 1e-6}),
                rep,
            )
        }
    })
}

fn simulate(spec: &str, paths: usize, seed: u64, x_grid: &[f64]) -> Result<Output, CliError> {
    let m = load_model(spec)?;
    let rep = simulate_mc(&m, paths, seed, x_grid)?;
    let s = m.scale();
    let mut passed = true;
    let mut bounds = Vec::new();
    for t in &rep.tails {
        let b = if s > 0.0 { combined_bound(BoundQuery::new(t.x, s)?) } else { f64::NAN };
        if t.final_tail > b + t.final_half_width {
            passed = false;
        }
        bounds.push(b);
    }
    let rows = rep
        .tails
        .iter()
        .zip(&bounds)
        .map(|(t, b)| {
            vec![
                num(t.x),
                num(t.final_tail),
                num(t.final_half_width),
                num(t.max_tail),
                num(t.max_half_width),
                num(*b),
            ]
        })
        .collect();
    let mut result = serde_json::to_value(&rep).expect("serializable");
    result["scale"] = json!(s);
    result["combined_bounds"] = json!(bounds);
    Ok(Output {
        record: record(
            "simulate",
            json!({"model": spec, "paths": paths, "seed": seed, "x": x_grid}),
            "ChaCha8 keyed by (seed, path index)",
            result,
            json!({"confidence": 0.99}),
        ),
        csv_header: vec!["x", "final_tail", "final_half_width", "max_tail", "max_half_width", "combined_bound"],
        csv_rows: rows,
        passed,
    })
}

fn lipschitz(file: &Path, x_grid: &[f64]) -> Result<Output, CliError> {
    let entries = parse_corpus(&read(file)?)?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut passed = true;
    for e in &entries {
        let r = analyze_corpus_entry(e.g, &e.variables, e.convex)?;
        passed &= r.passed;
        let mut tails = Vec::new();
        for &x in x_grid {
            let by_r = if r.radius > 0.0 { Some(concentration_tail(r.radius, x)?) } else { None };
            let by_s = if r.s > 0.0 { Some(concentration_tail(r.s, x)?) } else { None };
            rows.push(vec![
                e.name.clone(),
                num(x),
                num(r.radius),
                num(r.s),
                opt_num(by_r.map(|c| c.plain)),
                opt_num(by_r.map(|c| c.tighter)),
                opt_num(by_s.map(|c| c.tighter)),
            ]);
            tails.push(json!({"x": x, "radius_bound": by_r, "scale_bound": by_s}));
        }
        if x_grid.is_empty() {
            rows.push(vec![e.name.clone(), String::new(), num(r.radius), num(r.s), String::new(), String::new(), String::new()]);
        }
        results.push(json!({
            "name": e.name,
            "g": e.g.name(),
            "analysis": r,
            "tails": tails,
        }));
    }
    Ok(Output {
        record: record(
            "lipschitz",
            json!({"file": file.display().to_string(), "x": x_grid}),
            "exact enumeration",
            json!({"entries": results}),
            json!({"martingale_difference_mean": 1e-12, "domination": 1e-10}),
        ),
        csv_header: vec!["entry", "x", "radius", "s", "radius_plain", "radius_tight", "scale_tight"],
        csv_rows: rows,
        passed,
    })
}
