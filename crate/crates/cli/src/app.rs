//! Command-line front end: flags and `--config` files become one JSON
//! config, which goes through the same validation as a config file.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::config::{validate_value, ValidationErrors};
use crate::run::{execute, RunError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MINIMAX_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "minimax-lab", version, about = "Risk, domination and least-favourable-prior experiments for invariant estimators")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Risk of one estimator over a parameter grid.
    Risk(Flags),
    /// Paired comparison of two estimators with common random numbers.
    Dominate(Flags),
    /// Nesting and coverage check of a restriction's shift sequence.
    Conditions(Flags),
    /// Bayes risks of growing finite-support priors and their shifted images.
    Lfp(Flags),
    /// Euclidean projection of a point onto a restriction.
    Project(Flags),
    /// Risk-minimizing constants of an equivariant family.
    Optimize(Flags),
    /// Print the normalized config, or the list of problems with it.
    Validate(Flags),
}

#[derive(Debug, Args, Default)]
struct Flags {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Observations per replicate (preset argument).
    #[arg(long)]
    m: Option<usize>,
    /// Dimension, for presets and named cones.
    #[arg(long)]
    p: Option<usize>,
    /// Quantile multiplier (preset argument).
    #[arg(long)]
    eta: Option<f64>,
    /// Grid point as comma-separated coordinates; repeat for more points.
    #[arg(long, allow_hyphen_values = true)]
    theta: Vec<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Estimator preset or JSON object.
    #[arg(long)]
    estimator: Option<String>,
    /// Incumbent estimator preset or JSON object (dominate).
    #[arg(long)]
    incumbent: Option<String>,
    /// monte-carlo or quadrature.
    #[arg(long)]
    method: Option<String>,
    /// orthant, simple-order, tree-order, umbrella, interval, half-line-lower,
    /// half-line-upper, or a JSON object.
    #[arg(long)]
    restriction: Option<String>,
    /// Peak index of an umbrella cone (1-based).
    #[arg(long)]
    peak: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<f64>,
    #[arg(long)]
    nmax: Option<usize>,
    /// Number of random coverage probes.
    #[arg(long)]
    probes: Option<usize>,
    /// Point to project, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    /// Comma-separated prior sizes n (lfp).
    #[arg(long)]
    ns: Option<String>,
    #[arg(long)]
    spacing: Option<f64>,
    /// Constant family (optimize): scale-multiple, cov-diagonal, or a JSON object.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

fn flag_error(flag: &str, message: impl Into<String>) -> ValidationErrors {
    ValidationErrors::single(format!("--{flag}"), message)
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, ValidationErrors> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| flag_error(flag, format!("`{s}`: {e}")))
        })
        .collect()
}

/// A preset name, or a JSON value when the text looks like one.
fn name_or_json(flag: &str, text: &str) -> Result<Value, ValidationErrors> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| flag_error(flag, e.to_string()))
    } else {
        Ok(Value::String(text.to_string()))
    }
}

fn restriction_value(f: &Flags, name: &str) -> Result<Value, ValidationErrors> {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| flag_error(flag, format!("--restriction {name} needs --{flag}")));
    Ok(match name {
        "orthant" | "simple-order" | "tree-order" | "umbrella" => {
            let p = f.p.ok_or_else(|| flag_error("p", format!("--restriction {name} needs --p")))?;
            let mut v = json!({"cone": name, "p": p});
            if let Some(peak) = f.peak {
                v["peak"] = peak.into();
            }
            v
        }
        "interval" => json!({"type": "interval", "lower": need(f.lower, "lower")?, "upper": need(f.upper, "upper")?}),
        "half-line-lower" => json!({"type": "half-line-lower", "bound": need(f.lower, "lower")?}),
        "half-line-upper" => json!({"type": "half-line-upper", "bound": need(f.upper, "upper")?}),
        other => return name_or_json("restriction", other).and_then(|v| match v {
            Value::Object(_) => Ok(v),
            _ => Err(flag_error(
                "restriction",
                format!("unknown restriction `{other}`; use orthant, simple-order, tree-order, umbrella, interval, half-line-lower, half-line-upper or a JSON object"),
            )),
        }),
    })
}

/// Merges the config file and the flags into one JSON object.
fn build_config(command: Option<&str>, f: &Flags) -> Result<Value, ValidationErrors> {
    let mut obj: Map<String, Value> = match &f.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| flag_error("config", format!("{}: {e}", path.display())))?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(o)) => o,
                Ok(_) => return Err(flag_error("config", "config must be a JSON object")),
                Err(e) => return Err(flag_error("config", format!("invalid JSON: {e}"))),
            }
        }
        None => Map::new(),
    };
    if let Some(c) = command {
        obj.insert("command".into(), c.into());
    }
    let mut preset_args = Map::new();
    if let Some(name) = &f.preset {
        obj.insert("preset".into(), name.clone().into());
        if let Some(m) = f.m {
            preset_args.insert("m".into(), m.into());
        }
        if let Some(p) = f.p {
            if f.restriction.is_none() {
                preset_args.insert("p".into(), p.into());
            }
        }
        if let Some(eta) = f.eta {
            preset_args.insert("eta".into(), eta.into());
        }
    } else if f.m.is_some() || f.eta.is_some() {
        return Err(flag_error("m", "--m and --eta are preset arguments; give --preset"));
    }
    if !preset_args.is_empty() {
        obj.insert("preset_args".into(), Value::Object(preset_args));
    }
    if !f.theta.is_empty() {
        let points = f
            .theta
            .iter()
            .map(|t| parse_list("theta", t).map(|v| json!(v)))
            .collect::<Result<Vec<_>, _>>()?;
        obj.insert("grid".into(), Value::Array(points));
    }
    if let Some(r) = f.reps {
        obj.insert("replicates".into(), r.into());
    }
    if let Some(s) = f.seed {
        obj.insert("seed".into(), s.into());
    }
    if let Some(e) = &f.estimator {
        obj.insert("estimator".into(), name_or_json("estimator", e)?);
    }
    if let Some(e) = &f.incumbent {
        obj.insert("incumbent".into(), name_or_json("incumbent", e)?);
    }
    if let Some(m) = &f.method {
        obj.insert("method".into(), m.clone().into());
    }
    if let Some(r) = &f.restriction {
        obj.insert("restriction".into(), restriction_value(f, r)?);
    }
    if let Some(n) = f.nmax {
        obj.insert("n_max".into(), n.into());
    }
    if let Some(n) = f.probes {
        obj.insert("probes".into(), n.into());
    }
    if let Some(p) = &f.point {
        obj.insert("point".into(), json!(parse_list("point", p)?));
    }
    if let Some(ns) = &f.ns {
        let ns = ns
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|e| flag_error("ns", format!("`{s}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        obj.insert("ns".into(), json!(ns));
    }
    if let Some(h) = f.spacing {
        obj.insert("spacing".into(), h.into());
    }
    if let Some(fam) = &f.family {
        let v = match name_or_json("family", fam)? {
            Value::String(name) => json!({"family": name}),
            v => v,
        };
        obj.insert("family".into(), v);
    }
    if f.output.is_some() || f.format.is_some() {
        let mut out = match obj.remove("output") {
            Some(Value::Object(o)) => o,
            _ => Map::new(),
        };
        if let Some(p) = &f.output {
            out.insert("path".into(), p.display().to_string().into());
        }
        if let Some(fmt) = &f.format {
            out.insert("format".into(), fmt.clone().into());
        }
        obj.insert("output".into(), Value::Object(out));
    }
    Ok(Value::Object(obj))
}

fn report_validation(err: &mut dyn Write, errors: &ValidationErrors) -> u8 {
    let _ = writeln!(err, "invalid configuration:");
    for e in &errors.0 {
        let _ = writeln!(err, "  {e}");
    }
    EXIT_VALIDATION
}

/// Parses `args` (program name first) and runs the command. Reports go to
/// `out` unless written to a file; summaries and errors go to `err` (the
/// summary goes to `out` when the report was written to a file).
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // --help and --version render to stdout and succeed
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_VALIDATION;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let (command, flags) = match &cli.command {
        Sub::Risk(f) => (Some("risk"), f),
        Sub::Dominate(f) => (Some("dominate"), f),
        Sub::Conditions(f) => (Some("conditions"), f),
        Sub::Lfp(f) => (Some("lfp"), f),
        Sub::Project(f) => (Some("project"), f),
        Sub::Optimize(f) => (Some("optimize"), f),
        Sub::Validate(f) => (None, f),
    };
    let config = match build_config(command, flags).and_then(validate_value) {
        Ok(c) => c,
        Err(e) => return report_validation(err, &e),
    };
    if command.is_none() {
        let text = serde_json::to_string_pretty(&config).expect("configs serialize");
        let _ = writeln!(out, "{text}");
        return EXIT_OK;
    }
    match execute(&config) {
        Ok(report) => {
            if config.output.path.is_some() {
                let _ = writeln!(out, "{}", report.summary);
            } else {
                let _ = write!(out, "{}", report.body);
                let _ = writeln!(err, "{}", report.summary);
            }
            EXIT_OK
        }
        Err(RunError::Numerical(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_NUMERICAL
        }
        Err(e @ RunError::Io { .. }) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_IO
        }
    }
}

/// Worker cap from the environment; `Ok(None)` when unset.
pub fn threads_from_env() -> Result<Option<usize>, ValidationErrors> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ValidationErrors::single(
                THREADS_ENV,
                format!("expected a positive integer, got `{v}`"),
            )),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (u8, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["minimax-lab"];
        full.extend_from_slice(args);
        let code = run_cli(full, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn project_example() {
        let (code, out, _) = call(&["project", "--restriction", "simple-order", "--p", "3", "--point", "3,1,2"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out, "2,2,2\n");
    }

    #[test]
    fn conditions_example() {
        let (code, out, err) = call(&["conditions", "--restriction", "orthant", "--p", "2", "--nmax", "50", "--seed", "1"]);
        assert_eq!(code, EXIT_OK, "{err}");
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["verdict"], "pass");
        assert!(err.starts_with("verdict: pass"));
    }

    #[test]
    fn missing_seed_exits_with_validation_code() {
        let (code, _, err) = call(&["risk", "--preset", "quantile-mre-normal", "--reps", "100"]);
        assert_eq!(code, EXIT_VALIDATION);
        assert!(err.contains("$.seed: seed required"), "{err}");
    }

    #[test]
    fn unknown_estimator_lists_presets() {
        let (code, _, err) = call(&["risk", "--preset", "katz-risk", "--estimator", "bogus"]);
        assert_eq!(code, EXIT_VALIDATION);
        assert!(err.contains("valid presets") && err.contains("pava-x"), "{err}");
    }

    #[test]
    fn numerical_failures_exit_with_code_three() {
        // the known-scale interval cannot hold the shifted prior supports
        let (code, _, err) = call(&["lfp", "--preset", "lfp-halfline", "--restriction", "interval", "--lower", "0", "--upper", "1", "--ns", "2"]);
        assert_eq!(code, EXIT_NUMERICAL, "{err}");
        assert!(err.contains("embedding error"), "{err}");
    }

    #[test]
    fn validate_prints_the_normalized_config() {
        let (code, out, err) = call(&["validate", "--preset", "katz-halfline", "--seed", "9"]);
        assert_eq!(code, EXIT_OK, "{err}");
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["command"], "dominate");
        assert_eq!(v["replicates"], 1_000_000);
        assert_eq!(v["estimator"]["type"], "restricted-flat-bayes");
    }

    #[test]
    fn config_file_with_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"preset": "katz-risk", "grid": [0.5]}"#).unwrap();
        let out_path = dir.path().join("out.csv");
        let (code, out, err) = call(&[
            "risk",
            "--config",
            path.to_str().unwrap(),
            "--theta",
            "1",
            "--output",
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
        assert!(out.starts_with("risk 0.58528"), "{out}");
        let csv = std::fs::read_to_string(out_path).unwrap();
        assert!(csv.starts_with("theta,risk,se,replicates,seed,method\n1.0000000000000000e0,"));
    }

    #[test]
    fn bad_flags_are_validation_errors() {
        let (code, _, _) = call(&["risk", "--reps", "many"]);
        assert_eq!(code, EXIT_VALIDATION);
        let (code, _, err) = call(&["risk", "--m", "3"]);
        assert_eq!(code, EXIT_VALIDATION);
        assert!(err.contains("--m"));
    }
}
