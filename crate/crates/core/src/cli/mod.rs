//! Command-line interface: configuration, dispatch, and report emission.
//!
//! Every run requires an explicit `--seed`; reports are deterministic
//! byte-for-byte for a fixed config and seed (the wall-time field is the
//! one exception and is always emitted last).

pub mod config;
pub mod json;

use std::time::Instant;

use crate::cluster::{ClusterConstructionSpec, ConstructionMethod};
use crate::error::{Error, Result};
use crate::extremal::{
    consistency_report, estimate_albin, estimate_berman, estimate_cluster_sup,
    estimate_difference, estimate_samorodnitsky, m_approximation_curve, ConsistencyVerdict,
    EstimateReport,
};
use crate::identities::{default_battery, run_identity, IdentityOutcome};
use crate::maxstable::{
    fidi_neglog, neglog_empirical, sample_max_stable, MaxStableRep, MaxStableSampleSpec,
};
use crate::models::Sampler;
use crate::rng::rng_for;
use config::{default_window, load_model_file, parse_i64_list, ModelFile};
use json::Json;

const SCHEMA_VERSION: &str = "1";

const USAGE: &str = "\
tailcluster — cluster random fields, extremal-index estimators, max-stable checks

USAGE:
  tailcluster <COMMAND> [FLAGS]

COMMANDS:
  simulate         sample the representer field and write CSV rows
  estimate         run extremal-index estimators (--rep <name>|all)
  compare          run >= 2 representations and report pairwise z-scores
  maxstable-check  compare de Haan / shifted-cluster samplers against the
                   finite-dimensional law
  identity-check   run the distributional-identity battery
  m-approx         truncation-error curve of the m-approximation

FLAGS:
  --model PATH     model config file (key = value lines)
  --rep NAME       representation (repeatable or comma separated):
                   samorodnitsky, berman_tau0, berman_tau_alpha, albin_b1,
                   albin_b2, difference_theta, difference_z,
                   cluster_sup_<construction>, all
  --n N            Monte Carlo sample count (default 10000)
  --seed U64       random seed (required)
  --window A[,A]   window half-width per axis (default model-dependent)
  --threads N      worker threads (default env TAILCLUSTER_THREADS or 1)
  --out PATH       output file (default stdout)
  --format F       json | csv (default json)
  --b X            threshold parameter for albin/berman/constructions
  --tau X          exceedance exponent for berman/constructions
  --literal-b      use the literal printed b-variant of the berman form
  --points LIST    grid points for maxstable-check (default 0,1,3)
  --levels LIST    levels for maxstable-check (default 0.5,1,2)
  --eps X          series stopping epsilon (default 0.01)
  --m-list LIST    truncation radii for m-approx (default 1,2,4,8)
  --battery NAME   identity battery (default 'default')
";

#[derive(Debug, Clone, PartialEq)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    pub model_path: Option<String>,
    pub reps: Vec<String>,
    pub n: u64,
    pub seed: u64,
    pub window: Option<Vec<i64>>,
    pub threads: usize,
    pub out: Option<String>,
    format: OutputFormat,
    pub b: Option<f64>,
    pub tau: Option<f64>,
    pub literal_b: bool,
    pub points: Vec<i64>,
    pub levels: Vec<f64>,
    pub eps: f64,
    pub m_list: Vec<f64>,
    pub battery: String,
}

fn parse_args(args: &[String]) -> Result<RunConfig> {
    if args.is_empty() {
        return Err(Error::config("missing command"));
    }
    let command = args[0].clone();
    let known = [
        "simulate",
        "estimate",
        "compare",
        "maxstable-check",
        "identity-check",
        "m-approx",
    ];
    if !known.contains(&command.as_str()) {
        return Err(Error::config(format!("unknown command '{command}'")));
    }
    let mut cfg = RunConfig {
        command,
        model_path: None,
        reps: Vec::new(),
        n: 10_000,
        seed: 0,
        window: None,
        threads: std::env::var("TAILCLUSTER_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(1),
        out: None,
        format: OutputFormat::Json,
        b: None,
        tau: None,
        literal_b: false,
        points: vec![0, 1, 3],
        levels: vec![0.5, 1.0, 2.0],
        eps: 0.01,
        m_list: vec![1.0, 2.0, 4.0, 8.0],
        battery: "default".into(),
    };
    let mut seed_seen = false;
    let mut it = args[1..].iter();
    while let Some(flag) = it.next() {
        let mut value = |name: &str| -> Result<String> {
            it.next()
                .cloned()
                .ok_or_else(|| Error::config(format!("flag {name} needs a value")))
        };
        match flag.as_str() {
            "--model" => cfg.model_path = Some(value("--model")?),
            "--rep" => {
                let v = value("--rep")?;
                cfg.reps.extend(v.split(',').map(|s| s.trim().to_string()));
            }
            "--n" => {
                cfg.n = value("--n")?
                    .parse()
                    .map_err(|_| Error::config("bad --n"))?;
                if cfg.n < 1 {
                    return Err(Error::config("--n must be at least 1"));
                }
            }
            "--seed" => {
                cfg.seed = value("--seed")?
                    .parse()
                    .map_err(|_| Error::config("bad --seed"))?;
                seed_seen = true;
            }
            "--window" => cfg.window = Some(parse_i64_list(&value("--window")?, "window")?),
            "--threads" => {
                cfg.threads = value("--threads")?
                    .parse()
                    .map_err(|_| Error::config("bad --threads"))?;
                if cfg.threads < 1 {
                    return Err(Error::config("--threads must be at least 1"));
                }
            }
            "--out" => cfg.out = Some(value("--out")?),
            "--format" => {
                cfg.format = match value("--format")?.as_str() {
                    "json" => OutputFormat::Json,
                    "csv" => OutputFormat::Csv,
                    other => return Err(Error::config(format!("unknown format '{other}'"))),
                }
            }
            "--b" => cfg.b = Some(value("--b")?.parse().map_err(|_| Error::config("bad --b"))?),
            "--tau" => {
                cfg.tau = Some(value("--tau")?.parse().map_err(|_| Error::config("bad --tau"))?)
            }
            "--literal-b" => cfg.literal_b = true,
            "--points" => cfg.points = parse_i64_list(&value("--points")?, "points")?,
            "--levels" => {
                cfg.levels = value("--levels")?
                    .split(',')
                    .map(|v| v.trim().parse().map_err(|_| Error::config("bad --levels")))
                    .collect::<Result<_>>()?
            }
            "--eps" => cfg.eps = value("--eps")?.parse().map_err(|_| Error::config("bad --eps"))?,
            "--m-list" => {
                cfg.m_list = value("--m-list")?
                    .split(',')
                    .map(|v| v.trim().parse().map_err(|_| Error::config("bad --m-list")))
                    .collect::<Result<_>>()?
            }
            "--battery" => cfg.battery = value("--battery")?,
            other => return Err(Error::config(format!("unknown flag '{other}'"))),
        }
    }
    if !seed_seen {
        return Err(Error::config("--seed is required: every run must be reproducible"));
    }
    Ok(cfg)
}

fn load_model(cfg: &RunConfig) -> Result<ModelFile> {
    let path = cfg
        .model_path
        .as_ref()
        .ok_or_else(|| Error::config("--model is required for this command"))?;
    load_model_file(path)
}

fn resolve_window(cfg: &RunConfig, mf: &ModelFile) -> Vec<i64> {
    cfg.window
        .clone()
        .or_else(|| mf.window.clone())
        .unwrap_or_else(|| default_window(&mf.model))
}

const ALL_REPS: &[&str] = &[
    "samorodnitsky",
    "berman_tau0",
    "berman_tau_alpha",
    "albin_b1",
    "albin_b2",
    "difference_theta",
    "cluster_sup_ffd_theta",
];

fn run_representation(
    name: &str,
    cfg: &RunConfig,
    mf: &ModelFile,
    window: &[i64],
) -> Result<EstimateReport> {
    let model = &mf.model;
    let lat = &mf.lattice;
    let (n, seed, threads) = (cfg.n, cfg.seed, cfg.threads);
    match name {
        "samorodnitsky" => estimate_samorodnitsky(model, lat, window, n, seed, threads),
        "berman_tau0" => estimate_berman(
            model,
            lat,
            window,
            0.0,
            cfg.b.unwrap_or(1.0),
            cfg.literal_b,
            n,
            seed,
            threads,
        ),
        "berman_tau_alpha" => estimate_berman(
            model,
            lat,
            window,
            model.alpha,
            cfg.b.unwrap_or(1.0),
            cfg.literal_b,
            n,
            seed,
            threads,
        ),
        "albin_b1" => estimate_albin(model, lat, window, 1.0, n, seed, threads),
        "albin_b2" => estimate_albin(model, lat, window, 2.0, n, seed, threads),
        "difference_theta" => estimate_difference(model, lat, window, false, n, seed, threads),
        "difference_z" => estimate_difference(model, lat, window, true, n, seed, threads),
        other => {
            if let Some(method_name) = other.strip_prefix("cluster_sup_") {
                let method = ConstructionMethod::parse(method_name)?;
                let mut spec = match &mf.construction {
                    Some(c) if c.method == method => c.clone(),
                    _ => ClusterConstructionSpec::new(method, lat.clone()),
                };
                if let Some(b) = cfg.b {
                    spec = spec.with_b(b);
                }
                if let Some(tau) = cfg.tau {
                    spec = spec.with_tau(tau);
                }
                estimate_cluster_sup(&spec, model, window, n, seed, threads)
            } else {
                Err(Error::config(format!("unknown representation '{other}'")))
            }
        }
    }
}

fn estimate_to_json(e: &EstimateReport) -> Json {
    let mut o = Json::obj();
    o.set("representation", Json::Str(e.representation.clone()));
    o.set("value", Json::Float(e.value));
    o.set("stderr", Json::Float(e.stderr));
    o.set("n_samples", Json::UInt(e.n_samples));
    o.set("n_effective", Json::Float(e.n_effective));
    o.set("per_draw_variance", Json::Float(e.per_draw_variance));
    o.set("window_drift", Json::Float(e.window_drift));
    let mut d = Json::obj();
    for (k, v) in &e.diagnostics {
        d.set(k, Json::Float(*v));
    }
    o.set("diagnostics", d);
    o
}

fn verdict_to_json(v: &ConsistencyVerdict) -> Json {
    let mut o = Json::obj();
    o.set("pass", Json::Bool(v.pass));
    o.set("max_z", Json::Float(v.max_z));
    o.set("n_flagged", Json::UInt(v.n_flagged as u64));
    let mut pairs = Vec::new();
    for (a, b, z) in &v.pairs {
        let mut p = Json::obj();
        p.set("left", Json::Str(a.clone()));
        p.set("right", Json::Str(b.clone()));
        p.set("z", Json::Float(*z));
        pairs.push(p);
    }
    o.set("pairs", Json::Array(pairs));
    o
}

fn identity_to_json(o: &IdentityOutcome) -> Json {
    let mut j = Json::obj();
    j.set("id", Json::Str(o.id.clone()));
    j.set("identity", Json::Str(o.identity.clone()));
    j.set("z_max", Json::Float(o.z_max));
    let mut sides = Vec::new();
    for s in &o.sides {
        let mut sj = Json::obj();
        sj.set("label", Json::Str(s.label.clone()));
        sj.set("value", Json::Float(s.value));
        sj.set("stderr", Json::Float(s.stderr));
        sides.push(sj);
    }
    j.set("sides", Json::Array(sides));
    j
}

fn report_skeleton(cfg: &RunConfig, mf: Option<&ModelFile>, window: Option<&[i64]>) -> Json {
    let mut report = Json::obj();
    report.set("schema_version", Json::Str(SCHEMA_VERSION.into()));
    report.set("command", Json::Str(cfg.command.clone()));
    let mut c = Json::obj();
    c.set("n", Json::UInt(cfg.n));
    c.set("seed", Json::UInt(cfg.seed));
    c.set("threads", Json::UInt(cfg.threads as u64));
    if let Some(w) = window {
        c.set(
            "window",
            Json::Array(w.iter().map(|&a| Json::Int(a)).collect()),
        );
    }
    if let Some(path) = &cfg.model_path {
        c.set("model_path", Json::Str(path.clone()));
    }
    if let Some(mf) = mf {
        let mut m = Json::obj();
        for (k, v) in &mf.raw {
            m.set(k, Json::Str(v.clone()));
        }
        c.set("model", m);
    }
    report.set("config", c);
    report.set(
        "build_id",
        Json::Str(format!("tailcluster-{}", env!("CARGO_PKG_VERSION"))),
    );
    report
}

fn cmd_estimate(cfg: &RunConfig, compare_mode: bool) -> Result<Json> {
    let mf = load_model(cfg)?;
    let window = resolve_window(cfg, &mf);
    let mut reps: Vec<String> = if cfg.reps.is_empty() {
        if compare_mode {
            Vec::new()
        } else {
            vec!["all".into()]
        }
    } else {
        cfg.reps.clone()
    };
    if reps.iter().any(|r| r == "all") {
        reps = ALL_REPS.iter().map(|s| s.to_string()).collect();
    }
    if compare_mode && reps.len() < 2 {
        return Err(Error::config("compare needs at least two representations"));
    }
    if reps.is_empty() {
        return Err(Error::config("no representation selected"));
    }
    let mut estimates = Vec::new();
    for rep in &reps {
        estimates.push(run_representation(rep, cfg, &mf, &window)?);
    }
    let mut report = report_skeleton(cfg, Some(&mf), Some(&window));
    report.set(
        "estimates",
        Json::Array(estimates.iter().map(estimate_to_json).collect()),
    );
    if compare_mode {
        let verdict = consistency_report(&estimates)?;
        report.set("consistency", verdict_to_json(&verdict));
    }
    Ok(report)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<String> {
    let mf = load_model(cfg)?;
    let window = resolve_window(cfg, &mf);
    let sampler = Sampler::new(&mf.model, &window)?;
    let mut out = String::new();
    out.push_str(&format!("# command = simulate\n# seed = {}\n# n = {}\n", cfg.seed, cfg.n));
    out.push_str(&format!("# kind = {}\n", mf.model.kind_name()));
    let l = mf.model.dim_l();
    let mut header: Vec<String> = (0..l).map(|i| format!("t{i}")).collect();
    header.insert(0, "sample".into());
    header.push("value".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..cfg.n {
        let mut rng = rng_for(cfg.seed, crate::rng::salt(0x51, i));
        let z = sampler.sample_z(&mut rng);
        z.for_each_covered(|t, v| {
            let coords: Vec<String> = t.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!(
                "{},{},{}\n",
                i,
                coords.join(","),
                json::format_f64(v[0])
            ));
        });
    }
    Ok(out)
}

fn cmd_maxstable_check(cfg: &RunConfig) -> Result<Json> {
    let mf = load_model(cfg)?;
    let model = &mf.model;
    let points: Vec<Vec<i64>> = cfg.points.iter().map(|&p| vec![p]).collect();
    if model.dim_l() != 1 {
        return Err(Error::config("maxstable-check points are one-dimensional"));
    }
    let construction = mf
        .construction
        .as_ref()
        .map(|c| c.method)
        .unwrap_or(ConstructionMethod::FfdTheta);
    let dehaan_spec = MaxStableSampleSpec::new(points.clone(), MaxStableRep::DeHaan)
        .with_epsilon(cfg.eps);
    let rosinski_spec = MaxStableSampleSpec::new(
        points.clone(),
        MaxStableRep::Rosinski { construction },
    )
    .with_epsilon(cfg.eps);
    let dh = sample_max_stable(model, &dehaan_spec, cfg.n, cfg.seed, cfg.threads)?;
    let ro = sample_max_stable(model, &rosinski_spec, cfg.n, cfg.seed + 1, cfg.threads)?;

    let mut rows = Vec::new();
    for &x in &cfg.levels {
        let levels = vec![x; points.len()];
        let (fidi, fidi_se) = fidi_neglog(model, &points, &levels, cfg.n, cfg.seed + 2, cfg.threads)?;
        let (dh_nl, dh_se) = neglog_empirical(&dh, &levels)?;
        let (ro_nl, ro_se) = neglog_empirical(&ro, &levels)?;
        let z_dh = (dh_nl - fidi).abs() / (dh_se * dh_se + fidi_se * fidi_se).sqrt();
        let z_ro = (ro_nl - fidi).abs() / (ro_se * ro_se + fidi_se * fidi_se).sqrt();
        let mut row = Json::obj();
        row.set("level", Json::Float(x));
        row.set("fidi_neglog", Json::Float(fidi));
        row.set("fidi_stderr", Json::Float(fidi_se));
        row.set("dehaan_neglog", Json::Float(dh_nl));
        row.set("dehaan_stderr", Json::Float(dh_se));
        row.set("rosinski_neglog", Json::Float(ro_nl));
        row.set("rosinski_stderr", Json::Float(ro_se));
        row.set("z_dehaan", Json::Float(z_dh));
        row.set("z_rosinski", Json::Float(z_ro));
        rows.push(row);
    }

    // marginal KS distances at the origin point
    let mut dh_marginal: Vec<f64> = dh.values.iter().map(|v| v[0]).collect();
    let mut ro_marginal: Vec<f64> = ro.values.iter().map(|v| v[0]).collect();
    let ks_cross = crate::stats::ks_two_sample(&mut dh_marginal, &mut ro_marginal);
    let ks_frechet = crate::stats::ks_statistic(&mut dh_marginal, |x| {
        crate::stats::frechet_cdf(x, model.alpha)
    });

    let mut report = report_skeleton(cfg, Some(&mf), None);
    report.set("levels", Json::Array(rows));
    let mut diag = Json::obj();
    diag.set("marginal_ks_dehaan_vs_rosinski", Json::Float(ks_cross));
    diag.set("marginal_ks_dehaan_vs_frechet", Json::Float(ks_frechet));
    diag.set("dehaan_mean_terms", Json::Float(dh.mean_terms));
    diag.set("rosinski_mean_terms", Json::Float(ro.mean_terms));
    diag.set("dehaan_truncated_samples", Json::UInt(dh.truncated_samples));
    diag.set("rosinski_truncated_samples", Json::UInt(ro.truncated_samples));
    diag.set("stopping_epsilon", Json::Float(cfg.eps));
    diag.set("dehaan_c_hat", Json::Float(dh.c_hat));
    report.set("diagnostics", diag);
    Ok(report)
}

fn cmd_identity_check(cfg: &RunConfig) -> Result<Json> {
    if cfg.battery != "default" {
        return Err(Error::config(format!("unknown battery '{}'", cfg.battery)));
    }
    let cases = default_battery(cfg.n, cfg.seed);
    let mut outcomes = Vec::new();
    let mut max_z = 0.0f64;
    let mut flagged = 0usize;
    let mut pass = true;
    for case in &cases {
        let out = run_identity(case, cfg.threads)?;
        max_z = max_z.max(out.z_max);
        if out.z_max >= 5.0 {
            pass = false;
        } else if out.z_max >= 4.0 {
            flagged += 1;
        }
        outcomes.push(out);
    }
    if flagged > 2 {
        pass = false;
    }
    let mut report = report_skeleton(cfg, None, None);
    report.set(
        "cases",
        Json::Array(outcomes.iter().map(identity_to_json).collect()),
    );
    let mut summary = Json::obj();
    summary.set("n_cases", Json::UInt(cases.len() as u64));
    summary.set("max_z", Json::Float(max_z));
    summary.set("n_flagged", Json::UInt(flagged as u64));
    summary.set("pass", Json::Bool(pass));
    report.set("summary", summary);
    Ok(report)
}

fn cmd_m_approx(cfg: &RunConfig) -> Result<Json> {
    let mf = load_model(cfg)?;
    let window = resolve_window(cfg, &mf);
    // shifts sweep a quarter of the evaluation window: wide enough to
    // exercise the representation, narrow enough that the per-point
    // normalization stays meaningful
    let shift_half: Vec<i64> = window.iter().map(|&a| (a / 4).max(4)).collect();
    let curve = m_approximation_curve(
        &mf.model,
        &window,
        &shift_half,
        &cfg.m_list,
        cfg.n,
        cfg.seed,
        cfg.threads,
    )?;
    let mut rows = Vec::new();
    let mut monotone = true;
    for (i, &(m, err, se)) in curve.iter().enumerate() {
        if i > 0 {
            let (_, prev_err, prev_se) = curve[i - 1];
            if err > prev_err + 3.0 * (se * se + prev_se * prev_se).sqrt() {
                monotone = false;
            }
        }
        let mut row = Json::obj();
        row.set("m", Json::Float(m));
        row.set("error", Json::Float(err));
        row.set("stderr", Json::Float(se));
        rows.push(row);
    }
    let mut report = report_skeleton(cfg, Some(&mf), Some(&window));
    report.set("truncation_error", Json::Array(rows));
    let mut summary = Json::obj();
    summary.set("nonincreasing", Json::Bool(monotone));
    report.set("summary", summary);
    Ok(report)
}

fn csv_from_report(report: &Json) -> String {
    // one row per estimate, metadata as '#'-prefixed header lines
    let mut out = String::new();
    let Json::Object(entries) = report else {
        return out;
    };
    for (k, v) in entries {
        match v {
            Json::Str(s) => out.push_str(&format!("# {k} = {s}\n")),
            Json::UInt(u) => out.push_str(&format!("# {k} = {u}\n")),
            _ => {}
        }
    }
    out.push_str("representation,value,stderr,n_samples,n_effective\n");
    for (k, v) in entries {
        if k == "estimates" {
            if let Json::Array(list) = v {
                for e in list {
                    if let Json::Object(fields) = e {
                        let get = |name: &str| -> String {
                            fields
                                .iter()
                                .find(|(fk, _)| fk == name)
                                .map(|(_, fv)| match fv {
                                    Json::Float(x) => json::format_f64(*x),
                                    Json::UInt(u) => u.to_string(),
                                    Json::Str(s) => s.clone(),
                                    _ => String::new(),
                                })
                                .unwrap_or_default()
                        };
                        out.push_str(&format!(
                            "{},{},{},{},{}\n",
                            get("representation"),
                            get("value"),
                            get("stderr"),
                            get("n_samples"),
                            get("n_effective")
                        ));
                    }
                }
            }
        }
    }
    out
}

fn write_output(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let body = match cfg.command.as_str() {
        "simulate" => {
            let csv = cmd_simulate(cfg)?;
            write_output(cfg, &csv)?;
            return Ok(());
        }
        "estimate" => cmd_estimate(cfg, false)?,
        "compare" => cmd_estimate(cfg, true)?,
        "maxstable-check" => cmd_maxstable_check(cfg)?,
        "identity-check" => cmd_identity_check(cfg)?,
        "m-approx" => cmd_m_approx(cfg)?,
        _ => unreachable!("validated in parse_args"),
    };
    let mut report = body;
    report.set(
        "wall_time_ms",
        Json::UInt(started.elapsed().as_millis() as u64),
    );
    let text = match cfg.format {
        OutputFormat::Json => report.render(),
        OutputFormat::Csv => csv_from_report(&report),
    };
    write_output(cfg, &text)
}

/// Parse arguments, execute, and return the process exit code:
/// 0 success, 2 configuration error, 3 numerical failure or contract
/// violation.
pub fn dispatch(args: &[String]) -> i32 {
    if args.iter().any(|a| a == "--help" || a == "-h") || args.is_empty() {
        eprint!("{USAGE}");
        return if args.is_empty() { 2 } else { 0 };
    }
    let cfg = match parse_args(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            eprint!("{USAGE}");
            return 2;
        }
    };
    match run(&cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
