mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use config::{lookup, required, switch, usage, with_default, ConfigFile, UsageError};
use onloop::enumerate::{enumerate_bipartite, enumerate_loops, in_loop_layout, verify_fixed_point_order};
use onloop::fredholm::{self, KernelSpec};
use onloop::maps::classify;
use onloop::nested::{self, series_f_p_loop, LoopModelParams, SeriesRing};
use onloop::rigid::{self, PhasePoint};

const SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "onloop", version, about = "O(n) loop model on random quadrangulations")]
struct Cli {
    /// key=value file supplying parameters not given as flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the artifact here instead of standard output
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    /// Canonical series text (series and loop enumeration only)
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the gasket fixed point for the face weights
    Gasket(GasketArgs),
    /// Critical line of the rigid model with junction diagnostics
    PhaseDiagram(PhaseArgs),
    /// Nyström solve of the integral equation
    Fredholm(FredholmArgs),
    /// Exact expansion of F_p^loop
    Series(SeriesArgs),
    /// Residual tables of the identity suites
    Identities(IdentityArgs),
    /// Exhaustive enumeration of small maps
    Enumerate(EnumerateArgs),
    /// Spectral density and moments of the rigid model resolvent
    Resolvent(ResolventArgs),
}

#[derive(Args, Debug)]
struct GasketArgs {
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    h1: Option<f64>,
    #[arg(long)]
    h2: Option<f64>,
    /// Rigid loops (h2 = 0)
    #[arg(long)]
    rigid: bool,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args, Debug)]
struct PhaseArgs {
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// JSON summary path (CSV output only)
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KernelKind {
    Rigid,
    General,
}

#[derive(Args, Debug)]
struct FredholmArgs {
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    /// h1/h2 for the general kernel
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Debug)]
struct SeriesArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    rigid: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Elliptic,
    Rings,
    All,
}

#[derive(Args, Debug)]
struct IdentityArgs {
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EnumKind {
    Bipartite,
    Loops,
    FixedPoint,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[arg(long, value_enum)]
    kind: Option<EnumKind>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    max_edges: Option<usize>,
    #[arg(long)]
    max_faces: Option<usize>,
    #[arg(long)]
    order: Option<u32>,
    #[arg(long)]
    rigid: bool,
}

#[derive(Args, Debug)]
struct ResolventArgs {
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    h1: Option<f64>,
    /// Points of the density grid on the cut
    #[arg(long)]
    grid: Option<usize>,
    /// Number of moments F_k returned
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

/// What a command produced: the artifact and the exit status it implies.
struct Artifact {
    body: String,
    status: u8,
}

impl Artifact {
    fn ok(body: String) -> Self {
        Artifact { body, status: 0 }
    }
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn with_schema(command: &str, mut v: Value) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("schema".into(), json!(SCHEMA));
    out.insert("command".into(), json!(command));
    if let Value::Object(m) = &mut v {
        out.append(m);
    } else {
        out.insert("result".into(), v);
    }
    Value::Object(out)
}

fn csv_text<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn f17(x: f64) -> String {
    format!("{x:.17e}")
}

fn check_format(f: Format, allowed: &[Format], command: &str) -> Result<Format> {
    if allowed.contains(&f) {
        Ok(f)
    } else {
        usage(format!("{command} does not support --format {f:?}").to_lowercase())
    }
}

fn cmd_gasket(a: GasketArgs, cfg: &ConfigFile, format: Option<Format>) -> Result<Artifact> {
    let n: f64 = required(a.n, cfg, "n")?;
    let g: f64 = required(a.g, cfg, "g")?;
    let h1: f64 = required(a.h1, cfg, "h1")?;
    let rigid = switch(a.rigid, cfg, "rigid")?;
    let h2: f64 = if rigid {
        match lookup(a.h2, cfg, "h2")? {
            Some(v) if v != 0.0 => return usage("--rigid requires h2 = 0"),
            _ => 0.0,
        }
    } else {
        required(a.h2, cfg, "h2")?
    };
    let kmax: usize = with_default(a.kmax, cfg, "kmax", 64)?;
    let tol: f64 = with_default(a.tol, cfg, "tol", 1e-12)?;
    let max_iter: usize = with_default(a.max_iter, cfg, "max-iter", 100_000)?;
    for (name, v) in [("n", n), ("g", g), ("h1", h1), ("h2", h2)] {
        if !(v.is_finite() && v >= 0.0) {
            return usage(format!("--{name} must be finite and non-negative"));
        }
    }
    if kmax < 2 {
        return usage("--kmax must be at least 2");
    }
    let format = check_format(format.unwrap_or(Format::Json), &[Format::Json, Format::Csv], "gasket")?;
    let params = LoopModelParams::symmetric(n, g, h1, h2);
    let sol = nested::solve_gasket(&params, kmax, tol, max_iter)?;
    let status = if sol.is_converged() { 0 } else { 2 };
    let phase = if sol.is_converged() { Some(classify(&sol.weight_sequence())) } else { None };
    let body = match format {
        Format::Csv => csv_text(
            &["k", "g_k", "F_k"],
            (1..=kmax).map(|k| vec![k.to_string(), f17(sol.weights[k - 1]), f17(sol.fk[k])]),
        )?,
        _ => {
            let mut v = sol.to_json();
            v["phase"] = json!(phase);
            v["F2"] = json!(sol.fk.get(2));
            json_text(&with_schema("gasket", v))
        }
    };
    Ok(Artifact { body, status })
}

fn cmd_phase_diagram(a: PhaseArgs, cfg: &ConfigFile, format: Option<Format>) -> Result<Artifact> {
    let n: f64 = required(a.n, cfg, "n")?;
    let samples: usize = with_default(a.samples, cfg, "samples", 40)?;
    if !(n > 0.0 && n < 2.0) {
        return usage(format!("--n = {n} must lie in (0, 2)"));
    }
    if !(2..=10_000).contains(&samples) {
        return usage("--samples must lie in 2..=10000");
    }
    let format = check_format(format.unwrap_or(Format::Csv), &[Format::Json, Format::Csv], "phase-diagram")?;
    let line = rigid::assemble_diagram(n, samples)?;
    let summary = with_schema(
        "phase-diagram",
        json!({
            "n": line.n,
            "b": line.b,
            "g_star": line.endpoint.0,
            "h1_star": line.endpoint.1,
            "junction": line.junction,
            "points": line.points.len(),
        }),
    );
    if format == Format::Json {
        let mut v = summary;
        v["points"] = json!(line.points);
        return Ok(Artifact::ok(json_text(&v)));
    }
    if let Some(path) = a.summary {
        std::fs::write(&path, json_text(&summary)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Artifact::ok(line.to_csv()))
}

fn cmd_fredholm(a: FredholmArgs, cfg: &ConfigFile, format: Option<Format>) -> Result<Artifact> {
    let tau: f64 = required(a.tau, cfg, "tau")?;
    let n: f64 = required(a.n, cfg, "n")?;
    let rho: f64 = required(a.rho, cfg, "rho")?;
    let kernel = lookup(a.kernel.map(|k| format!("{k:?}").to_lowercase()), cfg, "kernel")?.unwrap_or("rigid".into());
    let grid: usize = with_default(a.grid, cfg, "grid", 64)?;
    let spec = match kernel.as_str() {
        "rigid" => KernelSpec::rigid(tau),
        "general" => KernelSpec::general(required(a.ratio, cfg, "ratio")?, tau),
        other => return usage(format!("unknown kernel {other}")),
    };
    let spec = spec.map_err(|e| UsageError(e.to_string()))?;
    if grid < 16 {
        return usage("--grid must be at least 16");
    }
    let format = check_format(format.unwrap_or(Format::Csv), &[Format::Json, Format::Csv], "fredholm")?;
    let sol = fredholm::solve(&spec, n, rho, grid)?;
    let body = match format {
        Format::Csv => sol.to_csv(),
        _ => {
            let crit = if spec.is_critical() { None } else { sol.critical_rho().ok() };
            json_text(&with_schema(
                "fredholm",
                json!({
                    "kernel": spec,
                    "n": n,
                    "rho": rho,
                    "nodes": sol.nodes,
                    "f": sol.f_values,
                    "f_at_1": sol.f_at_1,
                    "integral": sol.integral,
                    "residual": sol.residual,
                    "critical_rho": crit,
                }),
            ))
        }
    };
    Ok(Artifact::ok(body))
}

fn series_rows(s: &onloop::series::MultiSeries) -> Vec<Vec<String>> {
    s.terms()
        .map(|(m, c)| {
            let mut r: Vec<String> = m.0.iter().map(|e| e.to_string()).collect();
            r.push(c.to_string());
            r
        })
        .collect()
}

fn series_artifact(command: &str, s: &onloop::series::MultiSeries, format: Format, extra: Value) -> Result<String> {
    Ok(match format {
        Format::Text => s.to_canonical_text(),
        Format::Csv => csv_text(&["n", "g", "h1", "h2", "coefficient"], series_rows(s))?,
        Format::Json => {
            let mut v = extra;
            v["canonical"] = json!(s.to_canonical_text());
            json_text(&with_schema(command, v))
        }
    })
}

fn cmd_series(a: SeriesArgs, cfg: &ConfigFile, format: Option<Format>) -> Result<Artifact> {
    let p: usize = required(a.p, cfg, "p")?;
    let order: u32 = required(a.order, cfg, "order")?;
    let rigid = switch(a.rigid, cfg, "rigid")?;
    if order > nested::SERIES_ORDER_CAP {
        return usage(format!("--order must be at most {}", nested::SERIES_ORDER_CAP));
    }
    let ring = if rigid { SeriesRing::Rigid } else { SeriesRing::Symmetric };
    let s = in_loop_layout(&series_f_p_loop(p, order, ring)?, order)?;
    let extra = json!({ "p": p, "order": order, "ring": ring });
    Ok(Artifact::ok(series_artifact("series", &s, format.unwrap_or(Format::Text), extra)?))
}

fn cmd_identities(a: IdentityArgs, cfg: &ConfigFile, format: Option<Format>) -> Result<Artifact> {
    let suite = match lookup(a.suite.map(|s| format!("{s:?}").to_lowercase()), cfg, "suite")?.as_deref() {
        None | Some("all") => Suite::All,
        Some("elliptic") => Suite::Elliptic,
        Some("rings") => Suite::Rings,
        Some(other) => return usage(format!("unknown suite {other}")),
    };
    let seed: u64 = with_default(a.seed, cfg, "seed", 1)?;
    let format = check_format(format.unwrap_or(Format::Csv), &[Format::Json, Format::Csv], "identities")?;
    let mut checks = Vec::new();
    if suite != Suite::Rings {
        checks.extend(onloop::elliptic::identity_suite());
    }
    if suite != Suite::Elliptic {
        checks.extend(onloop::rings::identity_suite(seed));
    }
    let all_passed = checks.iter().all(|c| c.passed());
    let body = match format {
        Format::Csv => csv_text(
            &["name", "residual", "threshold", "passed"],
            checks.iter().map(|c| vec![c.name.clone(), format!("{:.3e}", c.residual), format!("{:e}", c.threshold), c.passed().to_string()]),
        )?,
        _ => json_text(&with_schema("identities", json!({ "passed": all_passed, "checks": checks }))),
    };
    Ok(Artifact { body, status: if all_passed { 0 } else { 2 } })
}

fn cmd_enumerate(a: EnumerateArgs, cfg: &ConfigFile, format: Option<Format>) -> Result<Artifact> {
    let kind = match lookup(a.kind.map(|k| format!("{k:?}").to_lowercase()), cfg, "kind")?.as_deref() {
        None | Some("bipartite") => EnumKind::Bipartite,
        Some("loops") => EnumKind::Loops,
        Some("fixedpoint") | Some("fixed-point") => EnumKind::FixedPoint,
        Some(other) => return usage(format!("unknown kind {other}")),
    };
    let rigid = switch(a.rigid, cfg, "rigid")?;
    let cap = |e: onloop::enumerate::EnumError| -> anyhow::Error {
        match e {
            onloop::enumerate::EnumError::CapExceeded(m) | onloop::enumerate::EnumError::Invalid(m) => UsageError(m).into(),
            other => other.into(),
        }
    };
    match kind {
        EnumKind::Bipartite => {
            let p: usize = required(a.p, cfg, "p")?;
            let max_edges: usize = required(a.max_edges, cfg, "max-edges")?;
            let format = check_format(format.unwrap_or(Format::Csv), &[Format::Json, Format::Csv], "enumerate")?;
            let counts = enumerate_bipartite(p, max_edges).map_err(cap)?;
            let label = |prof: &Vec<usize>| prof.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
            let body = match format {
                Format::Csv => csv_text(&["face_degrees", "count"], counts.iter().map(|(k, c)| vec![label(k), c.to_string()]))?,
                _ => {
                    let rows: Vec<Value> = counts.iter().map(|(k, c)| json!({ "face_degrees": k, "count": c })).collect();
                    json_text(&with_schema("enumerate", json!({ "kind": "bipartite", "p": p, "max_edges": max_edges, "counts": rows })))
                }
            };
            Ok(Artifact::ok(body))
        }
        EnumKind::Loops => {
            let p: usize = required(a.p, cfg, "p")?;
            let max_faces: usize = required(a.max_faces, cfg, "max-faces")?;
            let s = enumerate_loops(p, max_faces, rigid).map_err(cap)?;
            let s = in_loop_layout(&s, max_faces as u32)?;
            let extra = json!({ "kind": "loops", "p": p, "max_faces": max_faces, "rigid": rigid });
            Ok(Artifact::ok(series_artifact("enumerate", &s, format.unwrap_or(Format::Text), extra)?))
        }
        EnumKind::FixedPoint => {
            let order: u32 = required(a.order, cfg, "order")?;
            check_format(format.unwrap_or(Format::Json), &[Format::Json], "enumerate --kind fixed-point")?;
            let r = verify_fixed_point_order(order, rigid).map_err(cap)?;
            let status = if r.passed() { 0 } else { 2 };
            let body = json_text(&with_schema("enumerate", json!({ "kind": "fixed-point", "passed": r.passed(), "report": r })));
            Ok(Artifact { body, status })
        }
    }
}

fn cmd_resolvent(a: ResolventArgs, cfg: &ConfigFile, format: Option<Format>) -> Result<Artifact> {
    let n: f64 = required(a.n, cfg, "n")?;
    let g: f64 = required(a.g, cfg, "g")?;
    let h1: f64 = required(a.h1, cfg, "h1")?;
    let grid: usize = with_default(a.grid, cfg, "grid", 201)?;
    let kmax: usize = with_default(a.kmax, cfg, "kmax", 200)?;
    let tol: f64 = with_default(a.tol, cfg, "tol", 1e-13)?;
    if grid < 3 {
        return usage("--grid must be at least 3");
    }
    let format = check_format(format.unwrap_or(Format::Json), &[Format::Json, Format::Csv], "resolvent")?;
    let point = PhasePoint::new(n, g, h1).map_err(|e| UsageError(e.to_string()))?;
    let (hs, h0) = (rigid::nongeneric_endpoint(n).1, rigid::nongeneric_start(n));
    let on_line = h1 >= hs * (1.0 - 1e-12)
        && h1 <= h0 * (1.0 + 1e-12)
        && (g - rigid::nongeneric_g(n, h1)).abs() <= 1e-12 + 1e-10 * g;
    let (class, gamma, tau, density, moments, edge) = if on_line {
        let d = rigid::critical_density(&point)?;
        let class = match d.phase {
            rigid::CriticalPhase::Dense => "nongeneric-dense",
            rigid::CriticalPhase::Dilute => "nongeneric-dilute",
        };
        (class, d.gamma, 1.0, d.density(grid), d.scaled_moments(kmax), d.edge_exponent())
    } else {
        let r = rigid::general_resolvent(&point, tol)?;
        let class = match r.classification() {
            rigid::ResolventClass::Subcritical => "subcritical",
            rigid::ResolventClass::GenericCritical => "generic-critical",
        };
        (class, r.gamma(), r.tau(), r.density(grid), r.scaled_moments(kmax), r.edge_exponent())
    };
    let body = match format {
        Format::Csv => density.to_csv(),
        _ => json_text(&with_schema(
            "resolvent",
            json!({
                "n": n, "g": g, "h1": h1,
                "class": class,
                "gamma": gamma,
                "tau": tau,
                "R1": gamma * gamma / 4.0,
                "edge_exponent": edge,
                "moment_exponent": rigid::moment_exponent(&moments),
                "scaled_moments": moments,
                "density": density.values,
            }),
        )),
    };
    Ok(Artifact::ok(body))
}

fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var("ONLOOP_WORKERS") else {
        return Ok(());
    };
    let workers: usize = match raw.trim().parse() {
        Ok(w) if w > 0 => w,
        _ => return usage(format!("ONLOOP_WORKERS={raw} is not a positive integer")),
    };
    rayon::ThreadPoolBuilder::new().num_threads(workers).build_global().context("configuring worker pool")?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    configure_workers()?;
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let format = cli.format;
    let artifact = match cli.command {
        Command::Gasket(a) => cmd_gasket(a, &cfg, format)?,
        Command::PhaseDiagram(a) => cmd_phase_diagram(a, &cfg, format)?,
        Command::Fredholm(a) => cmd_fredholm(a, &cfg, format)?,
        Command::Series(a) => cmd_series(a, &cfg, format)?,
        Command::Identities(a) => cmd_identities(a, &cfg, format)?,
        Command::Enumerate(a) => cmd_enumerate(a, &cfg, format)?,
        Command::Resolvent(a) => cmd_resolvent(a, &cfg, format)?,
    };
    match &cli.output {
        Some(path) => std::fs::write(path, &artifact.body).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(artifact.body.as_bytes())?,
    }
    Ok(artifact.status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
