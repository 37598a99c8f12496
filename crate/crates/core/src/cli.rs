//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when a validation rule fails (`mc`,
//! `lasso-check`), 2 on usage or configuration errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{evaluate, BoundParams, EVALUATORS};
use crate::constants::{constant, oracle_minimum, Certificate, ConeSpec, ConstantRecord, NormMode, OracleTarget, MAX_ORACLE_DIM};
use crate::ensembles::{sample, DesignSample, EnsembleSpec, SampleSidecar};
use crate::error::{Error, Result};
use crate::matcore::{fmt_f64, sym_matrix_from_csv, SymMatrix};
use crate::verify::{oracle_inequality_check, problem_compat, run_experiment, ExperimentConfig, InequalityStatus, LassoProblem};

#[derive(Parser, Debug)]
#[command(name = "isoquad", version, about = "Compatibility constants, restricted eigenvalues and their concentration bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a design matrix from an ensemble.
    Gen(GenArgs),
    /// Compute a compatibility constant or restricted eigenvalue.
    Constants(ConstantsArgs),
    /// Evaluate a named bound: `bounds Dm --m 3 --Cm 0.5`.
    Bounds(BoundsArgs),
    /// Run a Monte Carlo experiment config.
    Mc(McArgs),
    /// Fit a seeded Lasso problem and check the oracle inequality.
    #[command(name = "lasso-check")]
    LassoCheck(LassoArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Gaussian,
    Rademacher,
    Laplace,
    StudentT,
}

/// Ensemble from a JSON file or from quick flags.
#[derive(Args, Debug)]
struct EnsembleArgs {
    /// EnsembleSpec JSON file (required for SEM variants).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gaussian")]
    variant: VariantArg,
    #[arg(long)]
    p: Option<usize>,
    /// Equicorrelation of the mixing covariance.
    #[arg(long)]
    rho: Option<f64>,
    /// Degrees of freedom for student-t.
    #[arg(long, default_value_t = 5.0)]
    nu: f64,
}

impl EnsembleArgs {
    fn build(&self) -> Result<EnsembleSpec> {
        if let Some(path) = &self.spec {
            let spec: EnsembleSpec = read_json(path)?;
            spec.validate()?;
            return Ok(spec);
        }
        let p = self.p.ok_or_else(|| Error::InvalidParameter("give --p or --spec".into()))?;
        let mut spec = match self.variant {
            VariantArg::Gaussian => EnsembleSpec::gaussian(p),
            VariantArg::Rademacher => EnsembleSpec::rademacher(p),
            VariantArg::Laplace => EnsembleSpec::laplace(p),
            VariantArg::StudentT => EnsembleSpec::student_t(p, self.nu),
        };
        if let Some(rho) = self.rho {
            spec = spec.with_sigma0(SymMatrix::equicorrelated(p, rho));
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// CSV destination; a JSON sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    /// Symmetric matrix CSV (dimension line, then rows).
    #[arg(long, conflicts_with = "design")]
    matrix: Option<PathBuf>,
    /// Data matrix CSV; its Gram matrix is used.
    #[arg(long)]
    design: Option<PathBuf>,
    /// Use the column-normalized Gram matrix of `--design`.
    #[arg(long, requires = "design")]
    normalized: bool,
    /// Support, 1-based, comma separated.
    #[arg(long = "S", value_delimiter = ',', required = true)]
    support: Vec<usize>,
    #[arg(long = "L")]
    l: f64,
    /// compat, re, re_u or adaptive.
    #[arg(long, default_value = "compat")]
    mode: String,
    /// Cross-check with the brute-force oracle (p <= 8).
    #[arg(long)]
    certify: bool,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// Evaluator name; omit with --list.
    name: Option<String>,
    #[arg(long)]
    list: bool,
    /// BoundParams JSON applied before the overrides.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Overrides as `--key value`, `--key=value` or `--param key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct McArgs {
    config: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-trial CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args, Debug)]
struct LassoArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long)]
    n: usize,
    /// Active set, 1-based, comma separated.
    #[arg(long = "S", value_delimiter = ',', required = true)]
    support: Vec<usize>,
    #[arg(long, default_value_t = 2.0)]
    lambda_factor: f64,
    /// Fixed penalty; required when --noise-sd is 0.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

enum Outcome {
    Ok,
    Failed,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn zero_based(support: &[usize]) -> Result<Vec<usize>> {
    support.iter().map(|&j| j.checked_sub(1).ok_or_else(|| Error::InvalidParameter("--S is 1-based; 0 is not a column".into()))).collect()
}

fn parse_value(key: &str, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("`{key}` expects a number, got `{raw}`")))
}

/// Applies `--key value`, `--key=value` and `--param key=value` tokens.
fn apply_overrides(params: &mut BoundParams, tokens: &[String]) -> Result<()> {
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        let Some(flag) = tok.strip_prefix("--") else {
            return Err(Error::InvalidParameter(format!("unexpected argument `{tok}`")));
        };
        let (key, value) = if flag == "param" {
            let kv = tokens.get(i + 1).ok_or_else(|| Error::InvalidParameter("--param needs key=value".into()))?;
            i += 2;
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::InvalidParameter(format!("--param needs key=value, got `{kv}`")))?;
            (k.to_string(), v.to_string())
        } else if let Some((k, v)) = flag.split_once('=') {
            i += 1;
            (k.to_string(), v.to_string())
        } else {
            let v = tokens.get(i + 1).ok_or_else(|| Error::InvalidParameter(format!("--{flag} needs a value")))?;
            i += 2;
            (flag.to_string(), v.clone())
        };
        params.set(&key, parse_value(&key, &value)?)?;
    }
    Ok(())
}

fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> Result<Outcome> {
    let spec = a.ensemble.build()?;
    let x = sample(&spec, a.n, a.seed)?;
    let sidecar = SampleSidecar { spec, seed: a.seed, n: x.n, p: x.p, sigma_hat_sq: x.sigma_hat_sq.clone() };
    match &a.out {
        Some(path) => {
            write_file(path, &x.to_csv())?;
            let mut side = path.as_os_str().to_owned();
            side.push(".json");
            write_file(Path::new(&side), &json(&sidecar)?)?;
            match a.format {
                Format::Json => out.write_all(json(&sidecar)?.as_bytes())?,
                Format::Csv => writeln!(out, "{}", path.display())?,
            }
        }
        None => match a.format {
            Format::Csv => out.write_all(x.to_csv().as_bytes())?,
            Format::Json => {
                #[derive(Serialize)]
                struct Full<'a> {
                    #[serde(flatten)]
                    sidecar: &'a SampleSidecar,
                    x: Vec<&'a [f64]>,
                }
                let rows: Vec<&[f64]> = (0..x.n).map(|i| x.row(i)).collect();
                out.write_all(json(&Full { sidecar: &sidecar, x: rows })?.as_bytes())?;
            }
        },
    }
    Ok(Outcome::Ok)
}

fn cmd_constants(a: &ConstantsArgs, out: &mut dyn Write) -> Result<Outcome> {
    let m = match (&a.matrix, &a.design) {
        (Some(path), _) => sym_matrix_from_csv(&read_text(path)?)?,
        (None, Some(path)) => {
            let d = DesignSample::from_csv(&read_text(path)?)?;
            if a.normalized {
                d.gram_normalized
            } else {
                d.gram
            }
        }
        (None, None) => return Err(Error::InvalidParameter("give --matrix or --design".into())),
    };
    let cone = ConeSpec::new(zero_based(&a.support)?, a.l, NormMode::parse(&a.mode)?);
    let mut result = constant(&m, &cone)?;
    let mut oracle_value = None;
    if a.certify {
        if m.dim() > MAX_ORACLE_DIM {
            return Err(Error::CapExceeded { what: format!("--certify dimension {}", m.dim()), cap: MAX_ORACLE_DIM });
        }
        let o = oracle_minimum(&m, OracleTarget::Cone(&cone), 4000)?;
        if (o.value - result.value).abs() <= 1e-4 * o.value.abs().max(1.0) {
            result.certificate = Certificate::Oracle;
        }
        oracle_value = Some(o.value);
    }
    let rec = ConstantRecord::new(result, &cone, &m);
    match a.format {
        Format::Json => {
            let mut v = serde_json::to_value(&rec)?;
            if let Some(o) = oracle_value {
                v["oracle_value"] = serde_json::json!(o);
            }
            out.write_all((serde_json::to_string_pretty(&v)? + "\n").as_bytes())?;
        }
        Format::Csv => {
            writeln!(out, "value,certificate,gap_estimate,orthant_count,matrix_hash")?;
            let cert = serde_json::to_value(rec.certificate)?;
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(rec.value),
                cert.as_str().unwrap_or(""),
                fmt_f64(rec.gap_estimate),
                rec.orthant_count,
                rec.matrix_hash
            )?;
        }
    }
    Ok(Outcome::Ok)
}

fn cmd_bounds(a: &BoundsArgs, out: &mut dyn Write) -> Result<Outcome> {
    if a.list {
        for name in EVALUATORS {
            writeln!(out, "{name}")?;
        }
        return Ok(Outcome::Ok);
    }
    let name = a.name.as_deref().ok_or_else(|| Error::InvalidParameter("missing bound name (or --list)".into()))?;
    let mut params = match &a.params {
        Some(path) => read_json(path)?,
        None => BoundParams::default(),
    };
    // Flags after the bound name land in `overrides`; pick `--format` back out.
    let mut format = a.format;
    let mut rest = Vec::with_capacity(a.overrides.len());
    let mut it = a.overrides.iter();
    while let Some(tok) = it.next() {
        let value = match tok.as_str() {
            "--format" => it.next().map(String::as_str),
            t => match t.strip_prefix("--format=") {
                Some(v) => Some(v),
                None => {
                    rest.push(tok.clone());
                    continue;
                }
            },
        };
        format = match value {
            Some("json") => Format::Json,
            Some("csv") => Format::Csv,
            other => return Err(Error::InvalidParameter(format!("--format expects json or csv, got {other:?}"))),
        };
    }
    apply_overrides(&mut params, &rest)?;
    let rep = evaluate(name, &params)?;
    match format {
        Format::Json => out.write_all(json(&rep)?.as_bytes())?,
        Format::Csv => {
            writeln!(out, "name,value,void")?;
            writeln!(out, "{},{},{}", rep.name, fmt_f64(rep.value), rep.void)?;
        }
    }
    Ok(Outcome::Ok)
}

fn cmd_mc(a: &McArgs, out: &mut dyn Write) -> Result<Outcome> {
    let mut cfg: ExperimentConfig = read_json(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.master_seed = seed;
    }
    let rep = run_experiment(&cfg)?;
    let text = rep.to_json()? + "\n";
    if let Some(path) = &a.csv {
        write_file(path, &rep.to_csv())?;
    }
    match (&a.out, a.format) {
        (Some(path), _) => {
            write_file(path, &text)?;
            for c in &rep.checks {
                writeln!(out, "{} {}", if c.passed { "PASS" } else { "FAIL" }, c.check)?;
            }
        }
        (None, Format::Json) => out.write_all(text.as_bytes())?,
        (None, Format::Csv) => out.write_all(rep.to_csv().as_bytes())?,
    }
    Ok(if rep.passed { Outcome::Ok } else { Outcome::Failed })
}

fn cmd_lasso(a: &LassoArgs, out: &mut dyn Write) -> Result<Outcome> {
    let spec = a.ensemble.build()?;
    let support = zero_based(&a.support)?;
    let prob = LassoProblem::seeded(&spec, a.n, &support, a.amplitude, a.noise_sd, a.lambda_factor, a.lambda, a.seed)?;
    let compat = problem_compat(&prob)?.unwrap_or(0.0);
    let rec = oracle_inequality_check(&prob, compat)?;
    match a.format {
        Format::Json => out.write_all(json(&rec)?.as_bytes())?,
        Format::Csv => {
            writeln!(out, "lambda,lambda0,L,compat,lhs,rhs,status")?;
            let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            let status = serde_json::to_value(rec.status)?;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_f64(rec.lambda),
                fmt_f64(rec.lambda0),
                opt(rec.l),
                fmt_f64(rec.compat),
                opt(rec.lhs),
                opt(rec.rhs),
                status.as_str().unwrap_or("")
            )?;
        }
    }
    let kkt_ok = rec.fit.as_ref().is_none_or(|f| f.kkt_residual <= 1e-7);
    Ok(if rec.status == InequalityStatus::Fail || !kkt_ok { Outcome::Failed } else { Outcome::Ok })
}

/// Runs the CLI on `args` (including the program name), writing results to
/// `out` and diagnostics to `err`. Returns the exit status.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let res = match &cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Constants(a) => cmd_constants(a, out),
        Command::Bounds(a) => cmd_bounds(a, out),
        Command::Mc(a) => cmd_mc(a, out),
        Command::LassoCheck(a) => cmd_lasso(a, out),
    };
    match res {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::Failed) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(std::iter::once("isoquad").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn bounds_dm() {
        let (code, out, _) = call(&["bounds", "Dm", "--m", "3", "--Cm", "0.5", "--format", "csv"]);
        assert_eq!(code, 0);
        assert!(out.contains("Dm,2.0,"), "{out}");
    }

    #[test]
    fn override_forms() {
        let mut p = BoundParams::default();
        apply_overrides(&mut p, &["--m=5".into(), "--param".into(), "Cm=0.25".into(), "--t".into(), "3".into()]).unwrap();
        assert_eq!((p.m, p.c_m, p.t), (5.0, 0.25, 3.0));
        assert!(apply_overrides(&mut p, &["--bogus".into(), "1".into()]).is_err());
        assert!(apply_overrides(&mut p, &["--m".into(), "x".into()]).is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["bounds", "nope"]).0, 2);
        let (code, _, err) = call(&["mc", "/nonexistent/config.json"]);
        assert_eq!(code, 2);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn zero_based_support() {
        assert_eq!(zero_based(&[1, 3]).unwrap(), vec![0, 2]);
        assert!(zero_based(&[0]).is_err());
    }
}
