//! `ellstab` command-line harness.
//!
//! Exit status: `0` when every check passes, `2` when a report was written
//! with failing checks, `1` on configuration or evaluation errors. The scalar
//! precision is chosen by `ELLSTAB_PRECISION` (`double`, the default, or
//! `wide`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ellstab::abelianization::{restriction_matrix_grass, GrassParams};
use ellstab::draw::{DrawConstraints, Drawer};
use ellstab::envelopes::{restriction_matrix_hypertoric, restriction_matrix_tpn, Chamber, EnvelopeParams};
use ellstab::io::{ComplexJson, MatrixJson, ParamsFile};
use ellstab::ktheory_limit::{default_q_sequence, growth_basis, stab_support_limit, theta_ratio_limit, SlopePath};
use ellstab::qspecial::{theta, theta_direct, theta_three_term, MultPoint, QContext};
use ellstab::report::{params_digest, CheckRecord, VerificationReport};
use ellstab::rmatrix::{check_dyb, check_unitarity, DynWeight, RForm, RMatrix};
use ellstab::scalar::{cx, to_f64};
use ellstab::suite::{run_suite, Precision, SuiteConfig, WideScalar, DYB_TOL, RMATRIX_TOL, THETA_LIMIT_TOL};
use ellstab::vertex::{vertex_prefactor, vertex_tpn};
use ellstab::Real;

#[derive(Parser)]
#[command(name = "ellstab", version, about = "Elliptic stable envelopes, R-matrices and vertex functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate ϑ at a point, with the three-term identity as a check.
    Theta(ThetaArgs),
    /// Restriction matrix of the stable envelope.
    Stab(StabArgs),
    /// Restriction matrix of the `T*Gr(k, n)` envelope.
    Grass(GrassArgs),
    /// R-matrix identity checks over seeded draws.
    Rmatrix(RmatrixArgs),
    /// Vertex function coefficients.
    Vertex(VertexArgs),
    /// K-theory limits of theta ratios, growth bases and envelope supports.
    Limits(LimitsArgs),
    /// Run verification suites.
    Verify(VerifyArgs),
}

/// A complex number or log coordinate written `re,im`.
fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `re,im`")?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Args)]
struct ThetaArgs {
    /// `q` as `re,im`.
    #[arg(long, value_parser = parse_pair)]
    q: (f64, f64),
    /// `ln x` as `re,im`.
    #[arg(long, value_parser = parse_pair)]
    u: (f64, f64),
}

#[derive(Clone, Copy, ValueEnum)]
enum Space {
    Tpn,
    Hypertoric,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChamberArg {
    Standard,
    Opposite,
}

#[derive(Args)]
struct DrawArgs {
    /// Parameter document; a seeded draw is used when absent.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StabArgs {
    #[arg(long, value_enum, default_value = "tpn")]
    space: Space,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "standard")]
    chamber: ChamberArg,
    /// Also write the matrix as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    draw: DrawArgs,
}

#[derive(Args)]
struct GrassArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    draw: DrawArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum RCheck {
    Dyb,
    Unitarity,
}

#[derive(Clone, Copy, ValueEnum)]
enum RFormArg {
    Product,
    Closed,
    Felder,
}

#[derive(Args)]
struct RmatrixArgs {
    #[arg(long, value_enum)]
    check: RCheck,
    #[arg(long, value_enum, default_value = "closed")]
    form: RFormArg,
    #[arg(long, default_value_t = 50)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VertexArgs {
    #[arg(long, value_enum, default_value = "tpn")]
    space: Space,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long, default_value_t = 12)]
    order: usize,
    #[command(flatten)]
    draw: DrawArgs,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("mode").required(true))]
struct LimitsArgs {
    /// `ϑ(az)/ϑ(z)` along `z = q^{-L}` for `L = k + 1/2`, `k = 0, 1, 2`.
    #[arg(long, group = "mode")]
    theta_ratio: bool,
    /// Solution basis of `f(qz) = q^α w z^{-N} f(z)`: `N α`.
    #[arg(long, group = "mode", num_args = 2, value_names = ["N", "ALPHA"])]
    growth: Option<Vec<f64>>,
    /// Laurent support of the `T*P¹` envelope at slope `L`.
    #[arg(long, group = "mode", allow_hyphen_values = true)]
    stab_support: Option<f64>,
    /// `ln a` (theta ratio) or `ln ħ^{1/2}` (support) as `re,im`.
    #[arg(long, value_parser = parse_pair, default_value = "0.3,0.8")]
    point: (f64, f64),
    /// Phase of `z` along the path.
    #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
    phase: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite names or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    suite: Vec<String>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    m_max: i64,
    /// Record wall time per check; reports then differ between runs.
    #[arg(long)]
    timings: bool,
}

enum Outcome {
    Done,
    Failed,
}

fn main() -> ExitCode {
    match run() {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn precision() -> anyhow::Result<Precision> {
    match std::env::var("ELLSTAB_PRECISION") {
        Ok(s) => Ok(Precision::parse(&s)?),
        Err(std::env::VarError::NotPresent) => Ok(Precision::Double),
        Err(e) => bail!("ELLSTAB_PRECISION: {e}"),
    }
}

macro_rules! dispatch {
    ($prec:expr, $f:ident ( $($arg:expr),* )) => {
        match $prec {
            Precision::Double => $f::<f64>($($arg),*),
            Precision::Wide => $f::<WideScalar>($($arg),*),
        }
    };
}

fn run() -> anyhow::Result<Outcome> {
    let cli = Cli::parse();
    let prec = precision()?;
    match cli.command {
        Command::Theta(a) => emit(&dispatch!(prec, cmd_theta(&a))?, None).map(|_| Outcome::Done),
        Command::Stab(a) => dispatch!(prec, cmd_stab(&a)).map(|_| Outcome::Done),
        Command::Grass(a) => dispatch!(prec, cmd_grass(&a)).map(|_| Outcome::Done),
        Command::Rmatrix(a) => finish(dispatch!(prec, cmd_rmatrix(&a, prec))?, a.out.as_deref()),
        Command::Vertex(a) => emit(&dispatch!(prec, cmd_vertex(&a))?, a.draw.out.as_deref()).map(|_| Outcome::Done),
        Command::Limits(a) => {
            let (value, pass) = dispatch!(prec, cmd_limits(&a))?;
            emit(&value, a.out.as_deref())?;
            Ok(if pass { Outcome::Done } else { Outcome::Failed })
        }
        Command::Verify(a) => {
            let mut cfg = SuiteConfig::new(a.seed, a.suite.clone());
            cfg.params = a.params.clone();
            cfg.output = a.out.clone();
            cfg.timings = a.timings;
            cfg.m_max = a.m_max;
            let report = run_suite(&cfg, prec)?;
            if a.out.is_none() {
                println!("{}", report.to_json());
            }
            summarize(&report);
            Ok(if report.all_pass() { Outcome::Done } else { Outcome::Failed })
        }
    }
}

fn emit(value: &Value, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn finish(report: VerificationReport, out: Option<&Path>) -> anyhow::Result<Outcome> {
    emit(&serde_json::to_value(&report)?, out)?;
    summarize(&report);
    Ok(if report.all_pass() { Outcome::Done } else { Outcome::Failed })
}

fn summarize(report: &VerificationReport) {
    let failed: Vec<&str> = report.failures().map(|r| r.check_id.as_str()).collect();
    eprintln!("{} checks, {} failed", report.records.len(), failed.len());
    for id in failed {
        eprintln!("  FAIL {id}");
    }
}

/// Parameters from `--params` or a seeded generic draw with `n` points.
fn load_params<T: Real>(draw: &DrawArgs, n: Option<usize>) -> anyhow::Result<(EnvelopeParams<T>, Option<ParamsFile>)> {
    match &draw.params {
        Some(path) => {
            let f = ParamsFile::read(path)?;
            if let Some(n) = n {
                if n != f.a_log.len() {
                    bail!("--n {n} disagrees with {} entries of a_log", f.a_log.len());
                }
            }
            Ok((f.envelope()?, Some(f)))
        }
        None => {
            let c = DrawConstraints::with_n(n.unwrap_or(2));
            Ok((Drawer::new(draw.seed).draw::<T>(&c)?.1, None))
        }
    }
}

fn cmd_theta<T: Real>(a: &ThetaArgs) -> anyhow::Result<Value> {
    let ctx = QContext::<T>::new(cx(a.q.0, a.q.1))?;
    let x = MultPoint::<T>::new(cx(a.u.0, a.u.1));
    let three = theta_three_term(x, MultPoint::new(cx(0.31, -0.7)), MultPoint::new(cx(-0.45, 1.1)), &ctx)?;
    Ok(json!({
        "theta": ComplexJson::from_cx(theta(x, &ctx)?),
        "theta_direct": ComplexJson::from_cx(theta_direct(x, &ctx)?),
        "three_term_residual": to_f64(three.relative()),
        "trunc": ctx.trunc(),
    }))
}

fn cmd_stab<T: Real>(a: &StabArgs) -> anyhow::Result<()> {
    let m = match a.space {
        Space::Tpn => {
            let (p, _) = load_params::<T>(&a.draw, a.n)?;
            let c = match a.chamber {
                ChamberArg::Standard => Chamber::standard(p.n()),
                ChamberArg::Opposite => Chamber::standard(p.n()).opposite(),
            };
            let m = restriction_matrix_tpn(&p, &c)?;
            MatrixJson::from_cmat((0..p.n()).map(|i| format!("F{}", i + 1)).collect(), &m.in_index_order())
        }
        Space::Hypertoric => {
            let path = a.draw.params.as_ref().context("--space hypertoric needs --params")?;
            let f = ParamsFile::read(path)?;
            let h = f.hypertoric().context("parameter file lacks weight_matrix and fixed_points")?;
            MatrixJson::from_restriction(&restriction_matrix_hypertoric(&h, &f.hyper_params::<T>()?)?)
        }
    };
    write_matrix(&m, a.draw.out.as_deref(), a.csv.as_deref())
}

fn cmd_grass<T: Real>(a: &GrassArgs) -> anyhow::Result<()> {
    let n = a.n.or_else(|| a.draw.params.is_none().then_some(4));
    let (p, file) = load_params::<T>(&a.draw, n)?;
    let k = a.k.or(file.as_ref().and_then(|f| f.k)).unwrap_or(2);
    let chamber = Chamber::standard(p.n());
    let m = restriction_matrix_grass(&GrassParams::new(k, p)?, &chamber)?;
    write_matrix(&MatrixJson::from_restriction(&m), a.draw.out.as_deref(), a.csv.as_deref())
}

fn write_matrix(m: &MatrixJson, out: Option<&Path>, csv: Option<&Path>) -> anyhow::Result<()> {
    if let Some(path) = csv {
        std::fs::write(path, m.to_csv()?).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(&serde_json::to_value(m)?, out)
}

fn cmd_rmatrix<T: Real>(a: &RmatrixArgs, prec: Precision) -> anyhow::Result<VerificationReport> {
    let form = match a.form {
        RFormArg::Product => RForm::Product,
        RFormArg::Closed => RForm::Closed,
        RFormArg::Felder => RForm::Felder,
    };
    let (name, default_tol) = match a.check {
        RCheck::Dyb => ("dyb", DYB_TOL),
        RCheck::Unitarity => ("unitarity", RMATRIX_TOL),
    };
    let tol = a.tol.unwrap_or(default_tol);
    let mut report = VerificationReport::new(a.seed, prec.label(), vec!["rmatrix".into()]);
    let mut d = Drawer::new(a.seed);
    let c = DrawConstraints { re_box: 1.5, hbar_re_box: 1.5, ..DrawConstraints::with_n(3) };
    for i in 0..a.draws {
        let (raw, p) = d.draw::<T>(&c)?;
        let r = RMatrix::new(form, p.hbar_half, p.ctx);
        let residual = match a.check {
            RCheck::Dyb => check_dyb(&r, &p.a, p.z, &DynWeight::sl2_defining()).map(|x| to_f64(x.relative())),
            RCheck::Unitarity => check_unitarity(&r, p.a[0].div(&p.a[1]), p.z).map(to_f64),
        };
        let id = format!("rmatrix.{name}.d{i:03}");
        report.records.push(match residual {
            Ok(x) => CheckRecord::new(id, params_digest(&raw), x, tol),
            Err(_) => CheckRecord::errored(id, params_digest(&raw), tol),
        });
    }
    report.finalize();
    Ok(report)
}

fn cmd_vertex<T: Real>(a: &VertexArgs) -> anyhow::Result<Value> {
    if let Space::Hypertoric = a.space {
        bail!("vertex coefficients are implemented for --space tpn");
    }
    let (p, _) = load_params::<T>(&a.draw, a.n)?;
    if a.k >= p.n() {
        bail!("--k {} outside 0..{}", a.k, p.n());
    }
    let series = vertex_tpn(a.k, a.order, &p)?;
    Ok(json!({
        "n": p.n(),
        "k": a.k,
        "order": a.order,
        "coefficients": series.coeffs.iter().map(|c| ComplexJson::from_cx(*c)).collect::<Vec<_>>(),
        "prefactor": ComplexJson::from_cx(vertex_prefactor(a.k, &p)?),
        "value_at_z": ComplexJson::from_cx(series.eval(p.z.value())),
    }))
}

fn cmd_limits<T: Real>(a: &LimitsArgs) -> anyhow::Result<(Value, bool)> {
    let point = MultPoint::<T>::new(cx(a.point.0, a.point.1));
    if a.theta_ratio {
        let mut reports = Vec::new();
        for k in 0..=2i64 {
            let path = SlopePath::new(k as f64 + 0.5, a.phase, default_q_sequence())?;
            reports.push(theta_ratio_limit(point, &path, k, THETA_LIMIT_TOL)?);
        }
        let pass = reports.iter().all(|r| r.pass);
        return Ok((serde_json::to_value(reports)?, pass));
    }
    if let Some(g) = &a.growth {
        let n = g[0];
        if n.fract() != 0.0 || n < 1.0 {
            bail!("N must be a positive integer, got {n}");
        }
        let path = SlopePath::new(0.5, 0.0, default_q_sequence())?;
        let r = growth_basis::<T>(n as u32, g[1], a.phase, &path)?;
        let pass = r.pass;
        return Ok((serde_json::to_value(r)?, pass));
    }
    let l = a.stab_support.expect("clap enforces one mode");
    let path = SlopePath::new(l, a.phase, default_q_sequence())?;
    let r = stab_support_limit(point, &path, 32, ellstab::suite::SUPPORT_FIT_TOL)?;
    let pass = r.pass;
    Ok((serde_json::to_value(r)?, pass))
}
