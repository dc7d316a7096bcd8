use std::fmt::Write as _;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use num_rational::BigRational;
use serde_json::{json, Value};

use vstruct_core::analytic::closed_form::{
    cov_rm_fixed_terms, cov_rm_random_terms, var_m_fixed_terms,
};
use vstruct_core::analytic::{
    component_cov_random, cov_rm_random_family, fixed_summary, random_covariance, Family, Variant,
};
use vstruct_core::combine::CombineReport;
use vstruct_core::errata::{check_errata, CheckStatus};
use vstruct_core::numeric::{format_rational, parse_rational, ratio_to_f64};
use vstruct_core::oracles::{
    enumerate_fixed, enumerate_random, mixture_random, mixture_random_family, EnumCaps,
    ExactMoments,
};
use vstruct_core::par::available_workers;
use vstruct_core::report::{Method, MomentReport};
use vstruct_core::simulate::{run_simulation, SimConfig};
use vstruct_core::sweep::{sweep, valid_c_range, write_csv, Axis, SweepSpec};
use vstruct_core::verify::{self, VerifyPlan};
use vstruct_core::{golden, Design, Error, Regime};

use crate::args::{
    params_json, AnalyticArgs, Cli, Command, EnumerateArgs, MixtureArgs, SimulateArgs, SweepArgs,
    VerifyArgs,
};
use crate::config::strip_run_options;
use crate::manifest::{self, RunManifest, TOOL};

type Fallible<T> = Result<T, Box<dyn std::error::Error>>;

enum Body {
    /// Wrapped as `{"manifest": .., "result": ..}`.
    Json(Value),
    /// Written verbatim; the manifest goes only to the side files.
    Text(String),
}

struct Outcome {
    parameters: Value,
    seed: Option<u64>,
    methods: Vec<String>,
    body: Body,
    failed: bool,
}

impl Outcome {
    fn json(parameters: Value, methods: Vec<String>, result: Value) -> Self {
        Outcome {
            parameters,
            seed: None,
            methods,
            body: Body::Json(result),
            failed: false,
        }
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Analytic(_) => "analytic",
        Command::Enumerate(_) => "enumerate",
        Command::Mixture(_) => "mixture",
        Command::Simulate(_) => "simulate",
        Command::Sweep(_) => "sweep",
        Command::Verify(_) => "verify",
        Command::Replay(_) => "replay",
    }
}

/// Run `cli`; `args` is the expanded command line without the program name.
pub fn execute(cli: &Cli, args: &[String], allow_replay: bool) -> Fallible<ExitCode> {
    let workers = cli.workers.unwrap_or_else(available_workers);
    if workers == 0 {
        return Err(Error::domain("workers", "need at least one worker").into());
    }
    let (command, recorded) = match &cli.command {
        Command::Replay(r) => {
            if !allow_replay {
                return Err("a manifest cannot replay another replay".into());
            }
            let m = manifest::read(&r.file)?;
            if m.version != env!("CARGO_PKG_VERSION") {
                eprintln!(
                    "warning: manifest written by {TOOL} {}, replaying with {}",
                    m.version,
                    env!("CARGO_PKG_VERSION")
                );
            }
            let argv = std::iter::once(TOOL.to_string()).chain(m.args.iter().cloned());
            let inner = Cli::try_parse_from(argv)
                .map_err(|e| format!("manifest arguments do not parse: {e}"))?;
            if matches!(inner.command, Command::Replay(_)) {
                return Err("a manifest cannot replay another replay".into());
            }
            (inner.command, m.args)
        }
        other => (other.clone(), strip_run_options(args)),
    };
    let outcome = run(&command, workers)?;
    let manifest = RunManifest {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: vstruct_core::VERSION.into(),
        subcommand: subcommand_name(&command).into(),
        args: recorded,
        parameters: outcome.parameters,
        seed: outcome.seed,
        methods: outcome.methods,
        timestamp: None,
    };
    let bytes = match outcome.body {
        Body::Json(result) => {
            let mut s =
                serde_json::to_string_pretty(&json!({ "manifest": &manifest, "result": result }))?;
            s.push('\n');
            s
        }
        Body::Text(t) => t,
    };
    match &cli.output {
        Some(path) => {
            std::fs::write(path, &bytes)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            write_manifest(&manifest::sidecar(path), &manifest)?;
        }
        None => std::io::stdout().lock().write_all(bytes.as_bytes())?,
    }
    if let Some(path) = &cli.manifest {
        write_manifest(path, &manifest)?;
    }
    Ok(if outcome.failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn write_manifest(path: &std::path::Path, m: &RunManifest) -> Fallible<()> {
    let mut s = serde_json::to_string_pretty(&m.stamped())?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

fn run(command: &Command, workers: usize) -> Fallible<Outcome> {
    match command {
        Command::Analytic(a) => analytic(a),
        Command::Enumerate(a) => enumerate(a, workers),
        Command::Mixture(a) => mixture(a, workers),
        Command::Simulate(a) => simulate(a, workers),
        Command::Sweep(a) => sweep_cmd(a, workers),
        Command::Verify(a) => verify_cmd(a, workers),
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    }
}

fn design_json(d: &Design) -> Value {
    match *d {
        Design::Random { n } => json!({ "regime": "random", "n": n }),
        Design::Fixed { n0, n1 } => json!({ "regime": "fixed", "n0": n0, "n1": n1 }),
    }
}

fn with_design(mut params: Value, d: &Design) -> Value {
    if let (Value::Object(p), Value::Object(extra)) = (&mut params, design_json(d)) {
        p.extend(extra);
    }
    params
}

fn analytic(a: &AnalyticArgs) -> Fallible<Outcome> {
    let design = a.design.design()?;
    let params = a.params.resolve(design.regime())?;
    let p = params.to_f64();
    let method = format!("analytic:{}", a.family);
    let mut result = match design {
        Design::Random { n } => {
            let cov = cov_rm_random_family(&p, n, a.family)?;
            let mut v = serde_json::to_value(MomentReport::covariance_only(
                Regime::Random,
                n,
                Method::Analytic,
                Some(a.family),
                cov,
            ))?;
            if a.explain {
                let exact = random_covariance(&p, n)?;
                v["explain"] = json!({
                    "closed_form_terms_times_n": cov_rm_random_terms(&p, n, Variant::Corrected)?,
                    "closed_form_components": component_cov_random(&p, n, Variant::Corrected)?.labelled(),
                    "exact_components": labelled_exact(&exact.cov_mr),
                });
            }
            v
        }
        Design::Fixed { n0, n1 } => {
            let s = fixed_summary(&p, n0, n1, a.family)?;
            let mut v = serde_json::to_value(MomentReport::from_summary(
                Regime::Fixed,
                n0 + n1,
                Some((n0, n1)),
                Method::Analytic,
                Some(a.family),
                &s,
            ))?;
            if a.explain {
                v["explain"] = json!({
                    "var_m_terms_times_n_squared": var_m_fixed_terms(&p, n0, n1, Variant::Corrected)?,
                    "cov_rm_terms": cov_rm_fixed_terms(&p, n0, n1)?,
                });
            }
            v
        }
    };
    if let Value::Object(o) = &mut result {
        o.insert("true_effect".into(), json!(p.true_effect()));
    }
    Ok(Outcome::json(
        with_design(params_json(&params, design.regime()), &design),
        vec![method],
        result,
    ))
}

fn labelled_exact(cov_mr: &[[f64; 2]; 4]) -> Value {
    let mut out = serde_json::Map::new();
    for (i, m) in ["M11", "M10", "M01", "M00"].iter().enumerate() {
        for (j, r) in ["R1", "R0"].iter().enumerate() {
            out.insert(format!("{m}.{r}"), json!(cov_mr[i][j]));
        }
    }
    Value::Object(out)
}

fn moments_json(em: &ExactMoments<f64>, family: Option<Family>) -> Fallible<Value> {
    let s = em.summary();
    let mut v = serde_json::to_value(em.to_json(family))?;
    v["combine"] = serde_json::to_value(CombineReport::new(s.var_r, s.var_m, s.cov_rm).ok())?;
    Ok(v)
}

fn rational_moments_json(
    em: &ExactMoments<BigRational>,
    family: Option<Family>,
) -> Fallible<Value> {
    let mut v = moments_json(&to_f64_moments(em), family)?;
    let m = &em.moments;
    v["rational"] = json!({
        "e_r": format_rational(&m.e_r),
        "e_m": format_rational(&m.e_m),
        "var_r": format_rational(&m.var_r),
        "var_m": format_rational(&m.var_m),
        "cov_rm": format_rational(&m.cov_rm),
    });
    Ok(v)
}

fn to_f64_moments(em: &ExactMoments<BigRational>) -> ExactMoments<f64> {
    use vstruct_core::analytic::ComponentMoments;
    let m = &em.moments;
    let mean = std::array::from_fn(|i| ratio_to_f64(&m.mean[i]));
    let cov = std::array::from_fn(|i| std::array::from_fn(|j| ratio_to_f64(&m.cov[i][j])));
    ExactMoments {
        method: em.method,
        moments: ComponentMoments::from_components(mean, cov),
        mass: ratio_to_f64(&em.mass),
        neglected_mass: ratio_to_f64(&em.neglected_mass),
        support: em.support,
    }
}

fn enumerate(a: &EnumerateArgs, workers: usize) -> Fallible<Outcome> {
    let design = a.design.design()?;
    let params = a.params.resolve(design.regime())?;
    let caps = EnumCaps {
        random_max_n: a.max_n,
        fixed_max_support: a.max_support,
    };
    let result = match (design, a.rational) {
        (Design::Random { n }, true) => rational_moments_json(
            &enumerate_random(&params.cell_probs(), n, &caps, workers)?,
            None,
        )?,
        (Design::Fixed { n0, n1 }, true) => rational_moments_json(
            &enumerate_fixed(&params.cell_probs_fixed(), n0, n1, &caps, workers)?,
            None,
        )?,
        (Design::Random { n }, false) => moments_json(
            &enumerate_random(&params.to_f64().cell_probs(), n, &caps, workers)?,
            None,
        )?,
        (Design::Fixed { n0, n1 }, false) => moments_json(
            &enumerate_fixed(&params.to_f64().cell_probs_fixed(), n0, n1, &caps, workers)?,
            None,
        )?,
    };
    let method = if a.rational {
        "enumeration:rational"
    } else {
        "enumeration"
    };
    Ok(Outcome::json(
        with_design(params_json(&params, design.regime()), &design),
        vec![method.into()],
        result,
    ))
}

fn mixture(a: &MixtureArgs, workers: usize) -> Fallible<Outcome> {
    let params = a.params.resolve(Regime::Random)?;
    let design = Design::random(a.n)?;
    let result = if a.rational {
        if a.family != Family::Exact {
            return Err(Error::domain("rational", "exact arithmetic needs --family exact").into());
        }
        rational_moments_json(&mixture_random(&params, a.n, workers)?, Some(a.family))?
    } else {
        moments_json(
            &mixture_random_family(&params.to_f64(), a.n, a.family, workers)?,
            Some(a.family),
        )?
    };
    let method = format!(
        "mixture:{}{}",
        a.family,
        if a.rational { ":rational" } else { "" }
    );
    Ok(Outcome::json(
        with_design(params_json(&params, Regime::Random), &design),
        vec![method],
        result,
    ))
}

fn simulate(a: &SimulateArgs, workers: usize) -> Fallible<Outcome> {
    let design = a.design.design()?;
    let params = a.params.resolve(design.regime())?;
    let mut cfg = SimConfig::new(design, a.reps, a.seed);
    cfg.chunk_size = a.chunk_size;
    cfg.alphas = a.alphas.clone();
    cfg.workers = workers;
    let result = run_simulation(&cfg, &params.to_f64())?;
    let mut out = Outcome::json(
        with_design(params_json(&params, design.regime()), &design),
        vec!["monte-carlo".into()],
        serde_json::to_value(result)?,
    );
    out.seed = Some(a.seed);
    Ok(out)
}

fn real(name: &str, text: &str) -> Fallible<f64> {
    let r = parse_rational(text).map_err(|e| Error::domain(name, e.to_string()))?;
    Ok(ratio_to_f64(&r))
}

fn sweep_cmd(a: &SweepArgs, workers: usize) -> Fallible<Outcome> {
    let q0 = real("q0", &a.q0)?;
    let q1 = real("q1", &a.q1)?;
    let pz = real("pz", &a.pz)?;
    let d = real("d", &a.d)?;
    let c = if a.c_full_range {
        let (lo, hi) = valid_c_range(q0, q1, d, pz)
            .ok_or_else(|| Error::domain("c", "no C keeps every p_Y in [0, 1]"))?;
        Axis::new(lo, hi, a.c_steps)?
    } else {
        let from = a
            .c_from
            .ok_or_else(|| Error::domain("c-from", "missing --c-from (or give --c-full-range)"))?;
        let to = a
            .c_to
            .ok_or_else(|| Error::domain("c-to", "missing --c-to (or give --c-full-range)"))?;
        Axis::new(from, to, a.c_steps)?
    };
    let method = a.method.unwrap_or(match a.regime {
        Regime::Random => Method::Mixture,
        Regime::Fixed => Method::Analytic,
    });
    let spec = SweepSpec {
        regime: a.regime,
        n: a.n,
        fraction: Axis::new(a.frac_from, a.frac_to, a.frac_steps)?,
        c,
        zoom: a.zoom,
        d,
        q0,
        q1,
        pz,
        method,
        family: a.family,
        reps: a.reps,
        seed: a.seed,
    };
    spec.validate()?;
    let res = sweep(&spec, workers)?;
    if !res.skipped.is_empty() {
        eprintln!(
            "note: {} of {} grid points skipped",
            res.skipped.len(),
            spec.len()
        );
        for s in &res.skipped {
            eprintln!(
                "  point {} (fraction {}, C {}): {}",
                s.index, s.px_or_xi, s.c_param, s.reason
            );
        }
    }
    let body = match a.format.as_str() {
        "csv" => {
            let mut buf = Vec::new();
            write_csv(&res.rows, &mut buf)?;
            Body::Text(String::from_utf8(buf)?)
        }
        "json" => Body::Json(serde_json::to_value(&res)?),
        other => {
            return Err(Error::domain("format", format!("{other:?} is not csv or json")).into())
        }
    };
    Ok(Outcome {
        parameters: serde_json::to_value(&spec)?,
        seed: (method == Method::MonteCarlo).then_some(a.seed),
        methods: vec![format!("{method}:{}", a.family)],
        body,
        failed: false,
    })
}

fn verify_cmd(a: &VerifyArgs, workers: usize) -> Fallible<Outcome> {
    if a.tol.is_nan() || a.tol < 0.0 {
        return Err(Error::domain("tol", "tolerance must be non-negative").into());
    }
    let plan = VerifyPlan {
        grid_size: a.grid_size,
        nmax: a.nmax,
        arm_max: a.arm_max,
        mixture_nmax: a.mixture_nmax,
        tol: a.tol,
    };
    let rows = verify::run(&plan, workers)?;
    let mut out = String::new();
    let mut failed = false;
    writeln!(
        out,
        "agreement with enumeration: {} parameter sets, random N 2..={}, mixture N 2..={}, fixed arms 1..={}, tolerance {:e}",
        plan.grid_size.min(verify::FULL_GRID),
        plan.nmax,
        plan.mixture_nmax,
        plan.arm_max,
        plan.tol
    )?;
    writeln!(
        out,
        "{:<10}{:>12}{:>8}{:>14}",
        "check", "comparisons", "failed", "max |diff|"
    )?;
    for check in ["random", "mixture", "fixed"] {
        let sel: Vec<_> = rows.iter().filter(|r| r.check == check).collect();
        let bad = sel.iter().filter(|r| !r.pass).count();
        let worst = sel.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
        failed |= bad > 0;
        writeln!(out, "{check:<10}{:>12}{bad:>8}{worst:>14.3e}", sel.len())?;
    }
    for r in rows.iter().filter(|r| !r.pass) {
        writeln!(
            out,
            "FAIL {} {} size {} {}: {:.15e} vs {:.15e}",
            r.check, r.params, r.size, r.quantity, r.candidate, r.oracle
        )?;
    }
    writeln!(out, "\nerrata")?;
    for e in check_errata()? {
        failed |= e.status == CheckStatus::Failed;
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2e}"));
        writeln!(
            out,
            "{:<4}{:<12}corrected {:<10}printed {:<10}{}",
            e.id,
            format!("{:?}", e.status).to_lowercase(),
            fmt(e.corrected_error),
            fmt(e.printed_error),
            e.detail
        )?;
    }
    if a.golden {
        writeln!(out, "\ngolden values")?;
        for g in golden::check_all(&golden::load()?, workers)? {
            failed |= !g.pass;
            let v = &g.golden;
            writeln!(
                out,
                "{:<5}{:<14}{:<14}{:<16}expected {:.10} got {:.10} (tol {:e})",
                if g.pass { "ok" } else { "FAIL" },
                v.setting,
                v.family.to_string(),
                v.quantity,
                v.value,
                g.computed,
                v.tolerance
            )?;
        }
    }
    writeln!(out, "\nresult: {}", if failed { "FAIL" } else { "PASS" })?;
    Ok(Outcome {
        parameters: serde_json::to_value(plan)?,
        seed: None,
        methods: vec![
            "analytic:exact".into(),
            "enumeration".into(),
            "mixture:exact".into(),
        ],
        body: Body::Text(out),
        failed,
    })
}
