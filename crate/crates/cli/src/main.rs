//! `neumann-atlas`: batch experiments on Neumann domains and star-like
//! domains.
//!
//! Every command writes one document (CSV with a `#` metadata preamble, or
//! JSON) to `--output` or stdout. The metadata always carries the complete
//! configuration, so an output file is enough to rerun it.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for numerical
//! failures.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use neumann_atlas::export::{fmt_f64, Table};
use neumann_atlas::isoperimetric::{cheeger_curve, curve_table, log_grid, WallModel};
use neumann_atlas::rearrange::{
    gradient_inequality_check, level_profile, perimeter_inequality_check, sample_quarter, separable_h_profile,
    threshold_grid, BumpFunction, DEFAULT_THRESHOLDS,
};
use neumann_atlas::spectral::{gap_table, ground_state_gap, EigenResult};
use neumann_atlas::stardomain::{
    admissibility_window, boundary_asymptotics_check, lambda_ab, quarter_area, ratio_sweep, rho_star_lens,
    sweep_table, StarParams,
};
use neumann_atlas::tracer::{census, histogram_table, rho_statistics, TraceConfig};
use neumann_atlas::wavefield::{sample_random_wave, sample_separable, WaveSpec};
use neumann_atlas::Error;

#[derive(Debug, Parser, Serialize)]
#[command(name = "neumann-atlas", version, about = "Neumann domains of torus eigenfunctions and star-like domains")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "NEUMANN_ATLAS_THREADS")]
    #[serde(skip)]
    threads: Option<usize>,

    /// Output file; stdout when omitted.
    #[arg(long, short, global = true)]
    #[serde(skip)]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase", tag = "command")]
enum Command {
    /// Decompose one field into Neumann domains.
    Trace(TraceArgs),
    /// ρ statistics over random-wave realizations.
    Stats(StatsArgs),
    /// Closed-form facts about Ω_{a,b}.
    Star(StarArgs),
    /// λ_v, λ_h and their gap for Λ_{a,b}.
    Spectral(SpectralArgs),
    /// Sector rearrangement of a test function on Λ_{a,b}.
    Rearrange(RearrangeArgs),
    /// F and C along the Cheeger family of Λ_{a,b}.
    Cheeger(CheegerArgs),
}

#[derive(Debug, Args, Serialize)]
struct TraceArgs {
    /// Energy E = n₁² + n₂² of a random wave.
    #[arg(long, conflicts_with = "separable")]
    energy: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Separable field 2cos(2πn₁x₁)cos(2πn₂x₂), given as n1,n2.
    #[arg(long, value_parser = parse_modes)]
    separable: Option<[u32; 2]>,
    /// Grid points per side.
    #[arg(long, default_value_t = 512)]
    resolution: usize,
}

fn parse_modes(s: &str) -> Result<[u32; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok([a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?]),
        _ => Err("expected n1,n2".into()),
    }
}

#[derive(Debug, Args, Serialize)]
struct StatsArgs {
    #[arg(long)]
    energy: u64,
    #[arg(long, default_value_t = 10)]
    realizations: u64,
    /// Seed of the first realization; the others use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    resolution: usize,
    /// Also write the JSON summary here (CSV output only).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct StarArgs {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    /// Additional ratios b/a (with a = 1) for the sweep table.
    #[arg(long, value_delimiter = ',')]
    ratios: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
struct SpectralArgs {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    /// Approximate number of mesh cells of the coarse level.
    #[arg(long, default_value_t = 20_000)]
    cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TestFunction {
    /// cos(πx₁/2a)·sin(πx₂/2b).
    Separable,
    /// Seeded Gaussian bumps with a cutoff near h.
    Bumps,
}

#[derive(Debug, Args, Serialize)]
struct RearrangeArgs {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    /// Sector opening.
    #[arg(long, default_value_t = 0.2 * std::f64::consts::PI)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = TestFunction::Separable)]
    function: TestFunction,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Equispaced thresholds between 0 and max ψ.
    #[arg(long, default_value_t = DEFAULT_THRESHOLDS)]
    thresholds: usize,
    /// Sampling cells along x₁ (half as many across).
    #[arg(long, default_value_t = 200)]
    resolution: usize,
}

#[derive(Debug, Args, Serialize)]
struct CheegerArgs {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    /// Number of areas, geometrically spaced in (0, |Λ|).
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long, value_enum, default_value_t = Model::Exact)]
    model: Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Model {
    Exact,
    Gaussian,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::InvalidInput(_) | Error::Parse(_) | Error::Resolution { .. }) => Failure::Config(e),
            Some(_) => Failure::Numerical(e),
            None if e.downcast_ref::<io::Error>().is_some() => Failure::Config(e),
            None => Failure::Numerical(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::from(e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config(anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(anyhow!("cannot start thread pool: {e}")))?;
    }
    let config = serde_json::to_string(cli).map_err(|e| Failure::Config(e.into()))?;
    let doc = match &cli.command {
        Command::Trace(a) => trace(a, cli.format)?,
        Command::Stats(a) => stats(a, cli.format, &config)?,
        Command::Star(a) => star(a, cli.format)?,
        Command::Spectral(a) => spectral(a, cli.format)?,
        Command::Rearrange(a) => rearrange(a, cli.format)?,
        Command::Cheeger(a) => cheeger(a, cli.format)?,
    };
    let text = match doc {
        Document::Table(mut t) => {
            let mut meta = vec![("config".to_string(), config.clone()), ("version".into(), env!("CARGO_PKG_VERSION").into())];
            meta.append(&mut t.metadata);
            t.metadata = meta;
            t.to_string()
        }
        Document::Json(v) => {
            let wrapped = serde_json::json!({
                "config": serde_json::from_str::<serde_json::Value>(&config).expect("round trip"),
                "version": env!("CARGO_PKG_VERSION"),
                "result": v,
            });
            let mut s = serde_json::to_string_pretty(&wrapped).map_err(|e| Failure::Numerical(e.into()))?;
            s.push('\n');
            s
        }
    };
    write_output(cli.output.as_ref(), &text).map_err(Failure::Config)
}

fn write_output(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

enum Document {
    Table(Table),
    Json(serde_json::Value),
}

fn json<T: Serialize>(v: &T) -> Result<Document, Failure> {
    Ok(Document::Json(serde_json::to_value(v).map_err(|e| Failure::Numerical(e.into()))?))
}

fn params(a: f64, b: f64) -> Result<StarParams, Failure> {
    Ok(StarParams::new(a, b)?)
}

fn trace(a: &TraceArgs, format: Format) -> Result<Document, Failure> {
    let field = match (&a.separable, a.energy) {
        (Some(n), None) => sample_separable(n[0], n[1], a.resolution)?,
        (None, Some(e)) => sample_random_wave(&WaveSpec::gaussian(e, a.seed)?, a.resolution)?,
        _ => return Err(Failure::Config(anyhow!("give exactly one of --energy or --separable"))),
    };
    let c = census(&field, &TraceConfig::default())?;
    match format {
        Format::Json => json(&c),
        Format::Csv => {
            let mut t = c.to_table();
            t.meta("excluded_domains", c.excluded_count)
                .meta("failed_lines", c.failed_lines)
                .meta("lambda", fmt_f64(c.lambda));
            Ok(Document::Table(t))
        }
    }
}

#[derive(Serialize)]
struct StatsSummary {
    energy: u64,
    realizations: u64,
    failed_realizations: u64,
    domains: usize,
    excluded_domains: usize,
    exceed_ground: f64,
    exceed_general: f64,
    per_kind: Vec<KindSummary>,
}

#[derive(Serialize)]
struct KindSummary {
    kind: &'static str,
    count: usize,
    exceed_ground: f64,
    exceed_general: f64,
}

fn stats(a: &StatsArgs, format: Format, config: &str) -> Result<Document, Failure> {
    if a.realizations == 0 {
        return Err(Failure::Config(anyhow!("--realizations must be positive")));
    }
    let mut censuses = Vec::new();
    let mut failed = 0;
    let mut last_error = None;
    for seed in a.seed..a.seed + a.realizations {
        let spec = WaveSpec::gaussian(a.energy, seed)?;
        let field = sample_random_wave(&spec, a.resolution)?;
        match census(&field, &TraceConfig::default()) {
            Ok(c) => censuses.push(c),
            Err(e) => {
                failed += 1;
                last_error = Some(e);
            }
        }
    }
    if censuses.is_empty() {
        let e = last_error.map(anyhow::Error::from).unwrap_or_else(|| anyhow!("no realizations"));
        return Err(Failure::Numerical(e.context(format!("all {failed} realizations failed"))));
    }
    let st = rho_statistics(&censuses);
    let summary = StatsSummary {
        energy: a.energy,
        realizations: a.realizations,
        failed_realizations: failed,
        domains: st.overall.total,
        excluded_domains: st.excluded,
        exceed_ground: st.overall.exceed_ground,
        exceed_general: st.overall.exceed_general,
        per_kind: st
            .per_kind
            .iter()
            .map(|(k, h)| KindSummary {
                kind: k.as_str(),
                count: h.total,
                exceed_ground: h.exceed_ground,
                exceed_general: h.exceed_general,
            })
            .collect(),
    };
    match format {
        Format::Json => json(&serde_json::json!({ "summary": summary, "statistics": st })),
        Format::Csv => {
            if let Some(p) = &a.summary {
                let doc = serde_json::json!({
                    "config": serde_json::from_str::<serde_json::Value>(config).expect("round trip"),
                    "summary": summary,
                });
                let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Numerical(e.into()))? + "\n";
                write_output(Some(p), &text).map_err(Failure::Config)?;
            }
            let mut t = histogram_table(&st.overall);
            t.meta("domains", summary.domains)
                .meta("failed_realizations", failed)
                .meta("excluded_domains", summary.excluded_domains)
                .meta("exceed_ground", fmt_f64(summary.exceed_ground))
                .meta("exceed_general", fmt_f64(summary.exceed_general));
            for k in &summary.per_kind {
                t.meta(&format!("exceed_ground_{}", k.kind), fmt_f64(k.exceed_ground));
            }
            Ok(Document::Table(t))
        }
    }
}

fn star(a: &StarArgs, format: Format) -> Result<Document, Failure> {
    let p = params(a.a, a.b)?;
    let mut ratios = vec![p.ratio()];
    ratios.extend(a.ratios.iter().copied().filter(|r| *r != p.ratio()));
    let sweep = ratio_sweep(&ratios)?;
    let asym = boundary_asymptotics_check(&p)?;
    let rho = rho_star_lens(&p);
    let window = admissibility_window(&p);
    match format {
        Format::Json => json(&serde_json::json!({
            "params": p,
            "lambda_ab": lambda_ab(&p),
            "quarter_area": quarter_area(&p),
            "rho": rho,
            "admissibility": window,
            "asymptotics": asym,
            "sweep": sweep,
        })),
        Format::Csv => {
            let mut t = sweep_table(&sweep);
            t.meta("lambda_ab", fmt_f64(lambda_ab(&p)))
                .meta("quarter_area", fmt_f64(quarter_area(&p)))
                .meta("rho_star", fmt_f64(rho.rho_star))
                .meta("rho_lens", fmt_f64(rho.rho_lens))
                .meta("feasible", window.feasible)
                .meta("alpha_window", format!("{} {}", fmt_f64(window.alpha_lo), fmt_f64(window.alpha_hi)))
                .meta("wedge_slope", fmt_f64(asym.wedge_slope))
                .meta("cusp_exponent", fmt_f64(asym.cusp_exponent));
            Ok(Document::Table(t))
        }
    }
}

fn spectral(a: &SpectralArgs, format: Format) -> Result<Document, Failure> {
    let p = params(a.a, a.b)?;
    if a.cells < 16 {
        return Err(Failure::Config(anyhow!("--cells must be at least 16")));
    }
    let g = ground_state_gap(&p, a.cells)?;
    if !(g.gap > 0.0) {
        return Err(Failure::Numerical(anyhow!("lambda_h - lambda_v = {} is not positive", g.gap)));
    }
    match format {
        Format::Json => json(&serde_json::json!({
            "params": p,
            "lambda_ab": g.lambda_ab,
            "v": summary_of(&g.lambda_v),
            "h": summary_of(&g.lambda_h),
            "gap": g.gap,
            "gap_error": g.gap_error,
        })),
        Format::Csv => {
            let mut t = gap_table(std::slice::from_ref(&g));
            t.meta("cells", g.lambda_v.n_cells)
                .meta("residual_v", fmt_f64(g.lambda_v.residual))
                .meta("residual_h", fmt_f64(g.lambda_h.residual));
            Ok(Document::Table(t))
        }
    }
}

fn summary_of(r: &EigenResult) -> serde_json::Value {
    serde_json::json!({
        "eigenvalue": r.eigenvalue,
        "refined": r.refined,
        "extrapolated": r.extrapolated,
        "extrapolation_error": r.extrapolation_error,
        "residual": r.residual,
        "cells": r.n_cells,
    })
}

fn rearrange(a: &RearrangeArgs, format: Format) -> Result<Document, Failure> {
    let p = params(a.a, a.b)?;
    if a.thresholds < 2 || a.resolution < 4 {
        return Err(Failure::Config(anyhow!("need --thresholds >= 2 and --resolution >= 4")));
    }
    if !(a.alpha > 0.0 && a.alpha < 2.0 * std::f64::consts::PI) {
        return Err(Failure::Config(anyhow!("--alpha must lie in (0, 2π)")));
    }
    let (nx, nt) = (a.resolution, (a.resolution / 2).max(2));
    let f = match a.function {
        TestFunction::Separable => sample_quarter(&p, nx, nt, separable_h_profile(&p)),
        TestFunction::Bumps => {
            let bump = BumpFunction::random(&p, a.seed);
            sample_quarter(&p, nx, nt, |x| bump.eval(x))
        }
    };
    let grad = gradient_inequality_check(&f, a.alpha, a.thresholds)?;
    let report = perimeter_inequality_check(&f, &threshold_grid(&f, a.thresholds), a.alpha)?;
    let profile = level_profile(&f, a.thresholds)?;
    match format {
        Format::Json => json(&serde_json::json!({
            "params": p,
            "alpha": a.alpha,
            "total_area": profile.total_area,
            "gradient": grad,
            "perimeter": report,
        })),
        Format::Csv => {
            let mut t = Table::new(&["t", "mu", "perim_h_original", "perim_h_star", "holds"]);
            for r in &report.rows {
                t.push(vec![
                    fmt_f64(r.t),
                    fmt_f64(r.mu),
                    fmt_f64(r.perim_h_original),
                    fmt_f64(r.perim_h_star),
                    r.holds.to_string(),
                ]);
            }
            t.meta("dirichlet_star", fmt_f64(grad.lhs))
                .meta("dirichlet_original", fmt_f64(grad.rhs))
                .meta("dirichlet_inequality_holds", grad.holds)
                .meta("perimeter_fraction_holding", fmt_f64(report.fraction_holding));
            Ok(Document::Table(t))
        }
    }
}

fn cheeger(a: &CheegerArgs, format: Format) -> Result<Document, Failure> {
    let p = params(a.a, a.b)?;
    if a.points < 3 {
        return Err(Failure::Config(anyhow!("--points must be at least 3")));
    }
    let model = match a.model {
        Model::Exact => WallModel::Exact,
        Model::Gaussian => WallModel::Gaussian,
    };
    let area = quarter_area(&p);
    let curve = cheeger_curve(&p, &log_grid(1e-5 * area, 0.999 * area, a.points), model)?;
    match format {
        Format::Json => json(&curve),
        Format::Csv => {
            let mut t = curve_table(&curve.points);
            t.meta("argmin_eta", fmt_f64(curve.argmin_eta)).meta("min_c", fmt_f64(curve.min_c));
            if let Some(e) = curve.transition_eta {
                t.meta("transition_eta", fmt_f64(e));
            }
            if let Some(e) = curve.cutoff {
                t.meta("cutoff_eta", fmt_f64(e));
            }
            Ok(Document::Table(t))
        }
    }
}
