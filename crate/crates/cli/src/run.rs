//! Executes a validated experiment and renders its report.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;

use minimax_core::conditions::{default_probes, verify_conditions, ConditionReport};
use minimax_core::projection::project;
use minimax_core::risk::{
    domination_check, lfp_run, optimize_equivariant_constant, sup_risk, DominationReport,
    LfpReport, OptimizationReport, RiskEstimate, RiskMethod, RiskMode, SearchSpec, SupRisk,
};
use minimax_core::{Error, ParameterPoint};

use crate::config::{flat_from_point, point_from_flat, Command, ExperimentConfig, Format, Method, Probes};

/// Rendered report plus a one-line summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub body: String,
    pub summary: String,
    pub format: Format,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Numerical(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// 17 significant digits: enough to round-trip every `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn method_name(m: RiskMethod) -> &'static str {
    match m {
        RiskMethod::MonteCarlo => "monte-carlo",
        RiskMethod::Quadrature => "quadrature",
    }
}

fn indexed(prefix: &str, k: usize) -> Vec<String> {
    if k == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=k).map(|i| format!("{prefix}{i}")).collect()
    }
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing memory")).expect("csv output is UTF-8")
}

fn json_text<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn estimate_cells(e: &RiskEstimate) -> Vec<String> {
    vec![
        fmt_num(e.risk),
        fmt_num(e.se),
        e.replicates.to_string(),
        e.seed.to_string(),
        method_name(e.method).to_string(),
    ]
}

const ESTIMATE_COLUMNS: [&str; 5] = ["risk", "se", "replicates", "seed", "method"];

fn show_point(theta: &ParameterPoint) -> String {
    let v: Vec<String> = flat_from_point(theta).iter().map(|x| x.to_string()).collect();
    format!("({})", v.join(", "))
}

/// Runs the experiment without touching the filesystem.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let format = cfg.output.format;
    let quad = cfg.quadrature.unwrap_or_default();
    let expect = |what: &str| Error::Argument(format!("validated config lacks {what}"));
    match cfg.command {
        Command::Risk => {
            let model = cfg.model.as_ref().ok_or_else(|| expect("model"))?;
            let mode = match cfg.method {
                Some(Method::Quadrature) => RiskMode::Quadrature,
                _ => RiskMode::MonteCarlo {
                    replicates: cfg.replicates.ok_or_else(|| expect("replicates"))?,
                    seed: cfg.seed.ok_or_else(|| expect("seed"))?,
                },
            };
            let sup = sup_risk(
                model,
                cfg.estimator.as_ref().ok_or_else(|| expect("estimator"))?,
                cfg.loss.as_ref().ok_or_else(|| expect("loss"))?,
                cfg.grid.as_deref().ok_or_else(|| expect("grid"))?,
                cfg.restriction.as_ref(),
                mode,
                &quad,
            )?;
            Ok(render_risk(&sup, format))
        }
        Command::Dominate => {
            let report = domination_check(
                cfg.model.as_ref().ok_or_else(|| expect("model"))?,
                cfg.estimator.as_ref().ok_or_else(|| expect("estimator"))?,
                cfg.incumbent.as_ref().ok_or_else(|| expect("incumbent"))?,
                cfg.loss.as_ref().ok_or_else(|| expect("loss"))?,
                cfg.grid.as_deref().ok_or_else(|| expect("grid"))?,
                cfg.replicates.ok_or_else(|| expect("replicates"))?,
                cfg.seed.ok_or_else(|| expect("seed"))?,
                &quad,
            )?;
            Ok(render_domination(&report, format))
        }
        Command::Conditions => {
            let r = cfg.restriction.as_ref().ok_or_else(|| expect("restriction"))?;
            let n_max = cfg.n_max.ok_or_else(|| expect("n_max"))?;
            let seed = cfg.seed.ok_or_else(|| expect("seed"))?;
            let probes = match cfg.probes.as_ref().ok_or_else(|| expect("probes"))? {
                Probes::Count(k) => default_probes(r, *k, n_max, seed),
                Probes::Points(p) => p.clone(),
            };
            let report = verify_conditions(
                r,
                n_max,
                &probes,
                cfg.nesting_samples.ok_or_else(|| expect("nesting_samples"))?,
                seed,
            )?;
            Ok(render_conditions(&report))
        }
        Command::Lfp => {
            let report = lfp_run(
                cfg.model.as_ref().ok_or_else(|| expect("model"))?,
                cfg.restriction.as_ref().ok_or_else(|| expect("restriction"))?,
                cfg.ns.as_deref().ok_or_else(|| expect("ns"))?,
                cfg.spacing.ok_or_else(|| expect("spacing"))?,
                cfg.loss.as_ref().ok_or_else(|| expect("loss"))?,
                &quad,
            )?;
            Ok(render_lfp(&report, format))
        }
        Command::Project => {
            let r = cfg.restriction.as_ref().ok_or_else(|| expect("restriction"))?;
            let point = cfg.point.as_deref().ok_or_else(|| expect("point"))?;
            let x = point_from_flat(r.ambient(), point).map_err(Error::Shape)?;
            let projected = project(r, &x)?;
            Ok(render_projection(&projected, format))
        }
        Command::Optimize => {
            let mut search = SearchSpec::new(
                cfg.replicates.ok_or_else(|| expect("replicates"))?,
                cfg.seed.ok_or_else(|| expect("seed"))?,
            );
            if let Some(t) = cfg.tolerance {
                search.tolerance = t;
            }
            let report = optimize_equivariant_constant(
                cfg.model.as_ref().ok_or_else(|| expect("model"))?,
                cfg.family.as_ref().ok_or_else(|| expect("family"))?,
                cfg.loss.as_ref().ok_or_else(|| expect("loss"))?,
                &search,
                &quad,
            )?;
            Ok(render_optimization(&report, format))
        }
    }
}

/// Runs the experiment and writes the report to the configured path, if any.
pub fn execute(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    let report = run(cfg)?;
    if let Some(path) = &cfg.output.path {
        std::fs::write(path, &report.body).map_err(|source| RunError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(report)
}

fn render_risk(sup: &SupRisk, format: Format) -> Report {
    let summary = match sup.risks.as_slice() {
        [(_, e)] if e.method == RiskMethod::MonteCarlo => {
            format!("risk {:.6} (se {:.2e}, {} replicates)", e.risk, e.se, e.replicates)
        }
        [(_, e)] => format!("risk {:.10} (quadrature)", e.risk),
        _ => format!("sup risk {:.10} at theta = {}", sup.value, show_point(&sup.argmax)),
    };
    let body = match format {
        Format::Csv => {
            let k = flat_from_point(&sup.risks[0].0).len();
            let mut header = indexed("theta", k);
            header.extend(ESTIMATE_COLUMNS.iter().map(|s| s.to_string()));
            let rows: Vec<Vec<String>> = sup
                .risks
                .iter()
                .map(|(theta, e)| {
                    let mut row: Vec<String> = flat_from_point(theta).into_iter().map(fmt_num).collect();
                    row.extend(estimate_cells(e));
                    row
                })
                .collect();
            csv_text(&header, &rows)
        }
        Format::Json => {
            let rows: Vec<_> = sup
                .risks
                .iter()
                .map(|(theta, e)| json!({"theta": theta, "estimate": e}))
                .collect();
            json_text(&json!({"risks": rows, "sup": sup.value, "argmax": sup.argmax}))
        }
    };
    Report { body, summary, format }
}

fn render_domination(report: &DominationReport, format: Format) -> Report {
    let worst = report
        .rows
        .iter()
        .map(|r| r.difference)
        .fold(f64::NEG_INFINITY, f64::max);
    let verdict = serde_json::to_value(report.verdict).expect("verdict serializes");
    let summary = format!(
        "verdict: {} (largest paired difference {:.3e} over {} points)",
        verdict.as_str().unwrap_or_default(),
        worst,
        report.rows.len()
    );
    let body = match format {
        Format::Csv => {
            let k = flat_from_point(&report.rows[0].theta).len();
            let mut header = indexed("theta", k);
            header.push("estimator".into());
            header.extend(ESTIMATE_COLUMNS.iter().map(|s| s.to_string()));
            let mut rows = Vec::with_capacity(3 * report.rows.len());
            for r in &report.rows {
                let theta: Vec<String> = flat_from_point(&r.theta).into_iter().map(fmt_num).collect();
                let diff = RiskEstimate {
                    risk: r.difference,
                    se: r.difference_se,
                    ..r.challenger
                };
                for (label, e) in [("challenger", &r.challenger), ("incumbent", &r.incumbent), ("difference", &diff)] {
                    let mut row = theta.clone();
                    row.push(label.into());
                    row.extend(estimate_cells(e));
                    rows.push(row);
                }
            }
            csv_text(&header, &rows)
        }
        Format::Json => json_text(report),
    };
    Report { body, summary, format }
}

fn render_conditions(report: &ConditionReport) -> Report {
    let failures: usize = report.nesting.iter().map(|c| c.failures).sum();
    let summary = format!(
        "verdict: {} (nesting failures {failures}, uncovered probes {} of {})",
        if report.passed() { "pass" } else { "fail" },
        report.uncovered(),
        report.coverage.len()
    );
    Report {
        body: json_text(report),
        summary,
        format: Format::Json,
    }
}

fn render_lfp(report: &LfpReport, format: Format) -> Report {
    let last = report.rows.last().expect("lfp reports have rows");
    let summary = format!(
        "r_n = {:.10} at n = {} (reference {:.10}); increasing: {}; max |r - r*| = {:.1e}",
        last.bayes_risk, last.n, report.reference, report.strictly_increasing, report.max_shift_discrepancy
    );
    let body = match format {
        Format::Csv => {
            let header: Vec<String> = ["n", "atoms", "shift", "bayes_risk", "shifted_bayes_risk", "gap", "reference"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.atoms.to_string(),
                        r.shift.to_string(),
                        fmt_num(r.bayes_risk),
                        fmt_num(r.shifted_bayes_risk),
                        fmt_num(r.gap),
                        fmt_num(report.reference),
                    ]
                })
                .collect();
            csv_text(&header, &rows)
        }
        Format::Json => json_text(report),
    };
    Report { body, summary, format }
}

fn render_projection(point: &ParameterPoint, format: Format) -> Report {
    let flat = flat_from_point(point);
    let mut line = String::new();
    for (i, x) in flat.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        // shortest representation that round-trips
        write!(line, "{x}").expect("writing to a string");
    }
    let body = match format {
        Format::Csv => format!("{line}\n"),
        Format::Json => json_text(point),
    };
    Report {
        body,
        summary: line,
        format,
    }
}

fn render_optimization(report: &OptimizationReport, format: Format) -> Report {
    let constants: Vec<String> = report.constants.iter().map(|c| format!("{c:.6}")).collect();
    let summary = format!(
        "constants [{}] with risk {:.6} (se {:.2e})",
        constants.join(", "),
        report.risk.risk,
        report.risk.se
    );
    let body = match format {
        Format::Csv => {
            let mut header = indexed("constant", report.constants.len());
            header.extend(ESTIMATE_COLUMNS.iter().map(|s| s.to_string()));
            let mut row: Vec<String> = report.constants.iter().copied().map(fmt_num).collect();
            row.extend(estimate_cells(&report.risk));
            csv_text(&header, &[row])
        }
        Format::Json => json_text(report),
    };
    Report { body, summary, format }
}
