//! Experiment configuration: JSON parsing, preset expansion, defaults and
//! aggregated validation. Nothing runs until every error has been collected.

use std::fmt;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use minimax_core::conditions::DEFAULT_NESTING_SAMPLES;
use minimax_core::quadrature::QuadratureSpec;
use minimax_core::restriction::make_cone;
use minimax_core::risk::{default_replicates, ConstantFamily};
use minimax_core::{
    Ambient, ConeKind, EstimatorSpec, GroupKind, LossSpec, Matrix, ModelSpec, ParameterPoint,
    Restriction,
};

use crate::presets;

pub const DEFAULT_N_MAX: usize = 50;
pub const DEFAULT_PROBE_COUNT: usize = 1000;
pub const DEFAULT_LFP_NS: [usize; 5] = [1, 2, 4, 8, 16];
pub const DEFAULT_SPACING: f64 = 0.25;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Risk,
    Dominate,
    Conditions,
    Lfp,
    Project,
    Optimize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Risk => "risk",
            Command::Dominate => "dominate",
            Command::Conditions => "conditions",
            Command::Lfp => "lfp",
            Command::Project => "project",
            Command::Optimize => "optimize",
        }
    }

    /// Keys a command reads besides `command`, `preset`, `preset_args`,
    /// `seed` and `output`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Command::Risk => &[
                "model", "loss", "estimator", "restriction", "grid", "method", "replicates",
                "quadrature",
            ],
            Command::Dominate => &[
                "model", "loss", "estimator", "incumbent", "restriction", "grid", "replicates",
                "quadrature",
            ],
            Command::Conditions => &["restriction", "n_max", "probes", "nesting_samples"],
            Command::Lfp => &["model", "loss", "restriction", "ns", "spacing", "quadrature"],
            Command::Project => &["restriction", "point"],
            Command::Optimize => &[
                "model", "loss", "family", "replicates", "tolerance", "quadrature",
            ],
        }
    }

    fn needs_seed(self, method: Option<Method>) -> bool {
        match self {
            Command::Risk => method != Some(Method::Quadrature),
            Command::Dominate | Command::Conditions | Command::Optimize => true,
            Command::Lfp | Command::Project => false,
        }
    }
}

const KNOWN_KEYS: [&str; 22] = [
    "command", "preset", "preset_args", "model", "loss", "estimator", "incumbent", "restriction",
    "grid", "method", "replicates", "seed", "quadrature", "n_max", "probes", "nesting_samples",
    "ns", "spacing", "point", "family", "tolerance", "output",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MonteCarlo,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// Probe points for the coverage check: a count of random probes or an
/// explicit list.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Probes {
    Count(usize),
    Points(Vec<ParameterPoint>),
}

/// A validated, fully defaulted experiment. Fields a command does not read
/// are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incumbent: Option<EstimatorSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restriction: Option<Restriction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<ParameterPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<Probes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nesting_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<ConstantFamily>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    /// JSON path of the offending value, `$` for the root.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

impl ValidationErrors {
    pub fn single(path: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationErrors(vec![ValidationError {
            path: path.into(),
            message: message.into(),
        }])
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.0.iter().any(|e| e.message.contains(needle) || e.path.contains(needle))
    }
}

#[derive(Default)]
struct Errors(Vec<ValidationError>);

impl Errors {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationError {
            path: path.into(),
            message: message.into(),
        });
    }
}

fn path(key: &str) -> String {
    format!("$.{key}")
}

fn take<T: DeserializeOwned>(obj: &mut Map<String, Value>, key: &str, errs: &mut Errors) -> Option<T> {
    let v = obj.remove(key)?;
    match serde_json::from_value(v) {
        Ok(t) => Some(t),
        Err(e) => {
            errs.push(path(key), e.to_string());
            None
        }
    }
}

/// Parses and validates config text.
pub fn validate(text: &str) -> Result<ExperimentConfig, ValidationErrors> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| ValidationErrors::single("$", format!("invalid JSON: {e}")))?;
    validate_value(value)
}

/// Validates an already parsed config.
pub fn validate_value(value: Value) -> Result<ExperimentConfig, ValidationErrors> {
    let Value::Object(mut obj) = value else {
        return Err(ValidationErrors::single("$", "config must be a JSON object"));
    };
    let mut errs = Errors::default();

    let preset = match obj.remove("preset") {
        None => {
            if obj.remove("preset_args").is_some() {
                errs.push(path("preset_args"), "preset_args given without a preset");
            }
            None
        }
        Some(Value::String(name)) => {
            let args = obj.remove("preset_args");
            match presets::experiment(&name, args) {
                Ok(mut base) => {
                    if let (Some(user), Some(own)) = (obj.get("command"), base.get("command")) {
                        if user != own {
                            errs.push(
                                path("command"),
                                format!("preset `{name}` runs the {own} command, not {user}"),
                            );
                        }
                    }
                    base.extend(std::mem::take(&mut obj));
                    obj = base;
                }
                Err(msg) => errs.push(path("preset"), msg),
            }
            Some(name)
        }
        Some(_) => {
            errs.push(path("preset"), "preset must be a name");
            None
        }
    };

    for key in obj.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            errs.push(path(key), "unknown key");
        }
    }
    let Some(command) = take::<Command>(&mut obj, "command", &mut errs) else {
        if !errs.0.iter().any(|e| e.path == "$.command") {
            errs.push(path("command"), "command required");
        }
        return Err(ValidationErrors(errs.0));
    };
    for key in obj.keys() {
        let shared = ["seed", "output"].contains(&key.as_str());
        if KNOWN_KEYS.contains(&key.as_str()) && !shared && !command.keys().contains(&key.as_str()) {
            errs.push(path(key), format!("not used by the {} command", command.name()));
        }
    }

    let model: Option<ModelSpec> = take(&mut obj, "model", &mut errs);
    if let Some(m) = &model {
        if let Err(e) = m.validate() {
            errs.push(path("model"), e.to_string());
        }
    }
    let loss: Option<LossSpec> = take(&mut obj, "loss", &mut errs);
    let restriction = obj
        .remove("restriction")
        .and_then(|v| match parse_restriction(v) {
            Ok(r) => Some(r),
            Err(msg) => {
                errs.push(path("restriction"), msg);
                None
            }
        });
    let estimator = resolve_estimator(&mut obj, "estimator", &model, &loss, &restriction, &mut errs);
    let incumbent = resolve_estimator(&mut obj, "incumbent", &model, &loss, &restriction, &mut errs);
    let grid_raw = obj.remove("grid");
    let method: Option<Method> = take(&mut obj, "method", &mut errs);
    let replicates: Option<usize> = take(&mut obj, "replicates", &mut errs);
    let seed: Option<u64> = take(&mut obj, "seed", &mut errs);
    let quadrature: Option<QuadratureSpec> = take(&mut obj, "quadrature", &mut errs);
    let n_max: Option<usize> = take(&mut obj, "n_max", &mut errs);
    let probes_raw = obj.remove("probes");
    let nesting_samples: Option<usize> = take(&mut obj, "nesting_samples", &mut errs);
    let ns: Option<Vec<usize>> = take(&mut obj, "ns", &mut errs);
    let spacing: Option<f64> = take(&mut obj, "spacing", &mut errs);
    let point: Option<Vec<f64>> = take(&mut obj, "point", &mut errs);
    let family: Option<ConstantFamily> = take(&mut obj, "family", &mut errs);
    let tolerance: Option<f64> = take(&mut obj, "tolerance", &mut errs);
    let explicit_csv = obj
        .get("output")
        .and_then(|o| o.get("format"))
        .is_some_and(|f| f == "csv");
    let output: Option<OutputSpec> = take(&mut obj, "output", &mut errs);

    let require = |present: bool, key: &str, errs: &mut Errors| {
        if !present && !errs.0.iter().any(|e| e.path == path(key)) {
            errs.push(path(key), format!("{key} required for the {} command", command.name()));
        }
    };
    let uses = |key: &str| command.keys().contains(&key);

    for key in ["model", "loss"] {
        if uses(key) {
            let present = if key == "model" { model.is_some() } else { loss.is_some() };
            require(present, key, &mut errs);
        }
    }
    match command {
        Command::Risk | Command::Dominate => {
            require(estimator.is_some(), "estimator", &mut errs);
            require(grid_raw.is_some(), "grid", &mut errs);
        }
        Command::Conditions | Command::Lfp | Command::Project => {
            require(restriction.is_some(), "restriction", &mut errs);
        }
        Command::Optimize => require(family.is_some(), "family", &mut errs),
    }
    if command == Command::Dominate {
        require(incumbent.is_some(), "incumbent", &mut errs);
    }
    if command == Command::Project {
        require(point.is_some(), "point", &mut errs);
    }
    if seed.is_none() && command.needs_seed(method) && !errs.0.iter().any(|e| e.path == "$.seed") {
        errs.push(path("seed"), "seed required");
    }

    let grid = match (grid_raw, &model) {
        (Some(raw), Some(model)) => match parse_grid(raw, model) {
            Ok(points) => {
                for (i, theta) in points.iter().enumerate() {
                    if let Err(e) = theta.validate_for(model) {
                        errs.push(format!("$.grid[{i}]"), e.to_string());
                        continue;
                    }
                    if let Some(r) = &restriction {
                        if r.check_shape(theta).is_ok() && !r.contains(theta).unwrap_or(false) {
                            errs.push(format!("$.grid[{i}]"), "point lies outside the restriction");
                        }
                    }
                }
                Some(points)
            }
            Err(msg) => {
                errs.push(path("grid"), msg);
                None
            }
        },
        _ => None,
    };

    if let (Some(model), Some(est)) = (&model, &estimator) {
        if let Err(e) = est.validate(model) {
            errs.push(path("estimator"), e.to_string());
        }
    }
    if let (Some(model), Some(est)) = (&model, &incumbent) {
        if let Err(e) = est.validate(model) {
            errs.push(path("incumbent"), e.to_string());
        }
    }
    if let Some(q) = &quadrature {
        if let Err(e) = q.validate() {
            errs.push(path("quadrature"), e.to_string());
        }
    }
    if let Some(r) = replicates {
        if r < 2 {
            errs.push(path("replicates"), "need at least 2 replicates");
        }
    }
    if n_max == Some(0) {
        errs.push(path("n_max"), "n_max must be positive");
    }
    if nesting_samples == Some(0) {
        errs.push(path("nesting_samples"), "nesting_samples must be positive");
    }
    if let Some(ns) = &ns {
        if ns.is_empty() || ns.contains(&0) {
            errs.push(path("ns"), "ns must be a nonempty list of positive integers");
        }
    }
    if let Some(h) = spacing {
        if !(h > 0.0 && h.is_finite()) {
            errs.push(path("spacing"), "spacing must be positive");
        }
    }
    if let Some(t) = tolerance {
        if !(t > 0.0 && t.is_finite()) {
            errs.push(path("tolerance"), "tolerance must be positive");
        }
    }
    if command == Command::Risk && method == Some(Method::Quadrature) && replicates.is_some() {
        errs.push(path("replicates"), "quadrature risks take no replicates");
    }

    let probes = match probes_raw {
        None => None,
        Some(Value::Number(n)) => match n.as_u64() {
            Some(c) if c > 0 => Some(Probes::Count(c as usize)),
            _ => {
                errs.push(path("probes"), "probe count must be a positive integer");
                None
            }
        },
        Some(raw) => restriction.as_ref().and_then(|r| {
            match parse_points(raw, |v| point_from_flat(r.ambient(), v)) {
                Ok(points) => {
                    for (i, p) in points.iter().enumerate() {
                        if let Err(e) = r.check_shape(p) {
                            errs.push(format!("$.probes[{i}]"), e.to_string());
                        }
                    }
                    Some(Probes::Points(points))
                }
                Err(msg) => {
                    errs.push(path("probes"), msg);
                    None
                }
            }
        }),
    };

    if let (Some(r), Some(pt)) = (&restriction, &point) {
        if let Err(msg) = point_from_flat(r.ambient(), pt) {
            errs.push(path("point"), msg);
        }
    }
    let mut output = output.unwrap_or_default();
    if command == Command::Conditions {
        if explicit_csv {
            errs.push("$.output.format", "condition reports are JSON only");
        }
        output.format = Format::Json;
    }

    if !errs.0.is_empty() {
        return Err(ValidationErrors(errs.0));
    }

    let mc = |m: &Option<ModelSpec>| m.as_ref().map(default_replicates);
    let method = if command == Command::Risk {
        Some(method.unwrap_or(Method::MonteCarlo))
    } else {
        None
    };
    let replicates = match command {
        Command::Risk if method == Some(Method::MonteCarlo) => replicates.or(mc(&model)),
        Command::Dominate | Command::Optimize => replicates.or(mc(&model)),
        _ => None,
    };
    Ok(ExperimentConfig {
        command,
        preset,
        model,
        loss,
        estimator,
        incumbent,
        restriction,
        grid,
        method,
        replicates,
        seed,
        quadrature: uses("quadrature").then(|| quadrature.unwrap_or_default()),
        n_max: uses("n_max").then_some(n_max.unwrap_or(DEFAULT_N_MAX)),
        probes: uses("probes").then(|| probes.unwrap_or(Probes::Count(DEFAULT_PROBE_COUNT))),
        nesting_samples: uses("nesting_samples")
            .then_some(nesting_samples.unwrap_or(DEFAULT_NESTING_SAMPLES)),
        ns: uses("ns").then(|| ns.unwrap_or_else(|| DEFAULT_LFP_NS.to_vec())),
        spacing: uses("spacing").then_some(spacing.unwrap_or(DEFAULT_SPACING)),
        point,
        family,
        tolerance: uses("tolerance").then_some(tolerance.unwrap_or(DEFAULT_TOLERANCE)),
        output,
    })
}

fn resolve_estimator(
    obj: &mut Map<String, Value>,
    key: &str,
    model: &Option<ModelSpec>,
    loss: &Option<LossSpec>,
    restriction: &Option<Restriction>,
    errs: &mut Errors,
) -> Option<EstimatorSpec> {
    match obj.remove(key)? {
        Value::String(name) => {
            let Some(model) = model else {
                errs.push(path(key), "estimator presets need a model");
                return None;
            };
            match presets::estimator(&name, model, loss.as_ref(), restriction.as_ref()) {
                Ok(spec) => Some(spec),
                Err(msg) => {
                    errs.push(path(key), msg);
                    None
                }
            }
        }
        v => match serde_json::from_value(v) {
            Ok(spec) => Some(spec),
            Err(e) => {
                errs.push(path(key), e.to_string());
                None
            }
        },
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConeShorthand {
    cone: String,
    p: usize,
    #[serde(default)]
    peak: Option<usize>,
    #[serde(default)]
    r: Option<usize>,
}

/// A full restriction object, or `{"cone": name, "p": p}` for the named
/// polyhedral cones.
pub fn parse_restriction(v: Value) -> Result<Restriction, String> {
    let is_cone = v.as_object().is_some_and(|o| o.contains_key("cone"));
    let r = if is_cone {
        let short: ConeShorthand = serde_json::from_value(v).map_err(|e| e.to_string())?;
        let mut kind = Map::new();
        kind.insert("kind".into(), Value::String(short.cone.clone()));
        if let Some(peak) = short.peak {
            kind.insert("peak".into(), peak.into());
        }
        if let Some(r) = short.r {
            kind.insert("r".into(), r.into());
        }
        let kind: ConeKind = serde_json::from_value(Value::Object(kind)).map_err(|e| {
            format!("cone `{}`: {e} (cones: orthant, simple-order, tree-order, umbrella)", short.cone)
        })?;
        make_cone(kind, short.p).map_err(|e| e.to_string())?
    } else {
        serde_json::from_value::<Restriction>(v).map_err(|e| e.to_string())?
    };
    r.validate().map_err(|e| e.to_string())?;
    Ok(r)
}

/// The parameter space a model's points live in.
pub fn model_ambient(model: &ModelSpec) -> Ambient {
    match model.kind {
        GroupKind::Location => Ambient::Location(1),
        GroupKind::MultivariateLocation => Ambient::Location(model.p),
        GroupKind::Scale => Ambient::Scale(model.p),
        GroupKind::LocationScale => Ambient::LocationScale,
        GroupKind::Wishart => Ambient::Covariance(model.p),
    }
}

/// Reads a flat coordinate vector: locations, scales, `(mu, sigma)`, or a
/// row-major covariance.
pub fn point_from_flat(ambient: Ambient, v: &[f64]) -> Result<ParameterPoint, String> {
    let expect = match ambient {
        Ambient::Location(p) | Ambient::Scale(p) => p,
        Ambient::LocationScale => 2,
        Ambient::Covariance(p) => p * p,
    };
    if v.len() != expect {
        return Err(format!("expected {expect} coordinates, got {}", v.len()));
    }
    Ok(match ambient {
        Ambient::Location(_) => ParameterPoint::locations(v.to_vec()),
        Ambient::Scale(_) => ParameterPoint::scales(v.to_vec()),
        Ambient::LocationScale => ParameterPoint::location_scale(v[0], v[1]),
        Ambient::Covariance(p) => ParameterPoint::covariance(Matrix::from_row_slice(p, p, v)),
    })
}

/// Inverse of [`point_from_flat`].
pub fn flat_from_point(theta: &ParameterPoint) -> Vec<f64> {
    if let Some(c) = &theta.covariance {
        let p = c.nrows();
        return (0..p * p).map(|k| c[(k / p, k % p)]).collect();
    }
    let mut v = theta.location.clone();
    v.extend(&theta.scale);
    v
}

fn parse_points(
    raw: Value,
    from_flat: impl Fn(&[f64]) -> Result<ParameterPoint, String>,
) -> Result<Vec<ParameterPoint>, String> {
    let Value::Array(items) = raw else {
        return Err("expected a list of points".into());
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| match item {
            Value::Number(_) => {
                let x = item.as_f64().ok_or("non-finite coordinate")?;
                from_flat(&[x]).map_err(|e| format!("[{i}]: {e}"))
            }
            Value::Array(_) => {
                let v: Vec<f64> = serde_json::from_value(item).map_err(|e| format!("[{i}]: {e}"))?;
                from_flat(&v).map_err(|e| format!("[{i}]: {e}"))
            }
            other => serde_json::from_value(other).map_err(|e| format!("[{i}]: {e}")),
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Linspace {
    start: Coords,
    stop: Coords,
    count: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Coords {
    One(f64),
    Many(Vec<f64>),
}

impl Coords {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Coords::One(x) => vec![x],
            Coords::Many(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
enum GridShape {
    #[serde(rename = "points")]
    Points(Value),
    #[serde(rename = "linspace")]
    Linspace(Linspace),
}

/// `[...]`, `{"points": [...]}` or `{"linspace": {"start", "stop", "count"}}`.
pub fn parse_grid(raw: Value, model: &ModelSpec) -> Result<Vec<ParameterPoint>, String> {
    let ambient = model_ambient(model);
    let from_flat = |v: &[f64]| point_from_flat(ambient, v);
    let points = match raw {
        Value::Array(_) => parse_points(raw, from_flat)?,
        other => match serde_json::from_value::<GridShape>(other).map_err(|e| e.to_string())? {
            GridShape::Points(v) => parse_points(v, from_flat)?,
            GridShape::Linspace(Linspace { start, stop, count }) => {
                let (a, b) = (start.into_vec(), stop.into_vec());
                if a.len() != b.len() {
                    return Err("linspace start and stop differ in length".into());
                }
                if count == 0 {
                    return Err("linspace count must be positive".into());
                }
                (0..count)
                    .map(|i| {
                        let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                        let v: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + (y - x) * t).collect();
                        from_flat(&v)
                    })
                    .collect::<Result<_, _>>()?
            }
        },
    };
    if points.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn risk_config() -> Value {
        json!({
            "command": "risk",
            "model": {"kind": "location", "base": {"name": "normal"}, "m": 1},
            "loss": {"estimand": "location", "shape": "squared-error"},
            "estimator": "identity",
            "grid": [0.0, 1.0],
            "seed": 7
        })
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = validate_value(risk_config()).unwrap();
        assert_eq!(cfg.method, Some(Method::MonteCarlo));
        assert_eq!(cfg.replicates, Some(1_000_000));
        assert_eq!(cfg.quadrature, Some(QuadratureSpec::default()));
        assert_eq!(cfg.estimator, Some(EstimatorSpec::Identity));
        assert_eq!(cfg.output.format, Format::Csv);
        assert_eq!(cfg.grid.as_ref().unwrap().len(), 2);
        assert!(cfg.ns.is_none());
    }

    #[test]
    fn missing_seed_is_reported() {
        let mut v = risk_config();
        v.as_object_mut().unwrap().remove("seed");
        let err = validate_value(v).unwrap_err();
        assert!(err.0.iter().any(|e| e.message == "seed required"), "{err}");
    }

    #[test]
    fn quadrature_risk_needs_no_seed() {
        let mut v = risk_config();
        let o = v.as_object_mut().unwrap();
        o.remove("seed");
        o.insert("method".into(), json!("quadrature"));
        let cfg = validate_value(v).unwrap();
        assert_eq!(cfg.replicates, None);
    }

    #[test]
    fn unknown_estimator_lists_presets() {
        let mut v = risk_config();
        v["estimator"] = json!("stein-magic");
        let err = validate_value(v).unwrap_err();
        assert!(err.mentions("valid presets") && err.mentions("katz"), "{err}");
    }

    #[test]
    fn errors_are_aggregated_with_paths() {
        let mut v = risk_config();
        let o = v.as_object_mut().unwrap();
        o.remove("seed");
        o.insert("colour".into(), json!("blue"));
        o.insert("ns".into(), json!([1, 2]));
        o.insert("grid".into(), json!([[0.0, 1.0]]));
        let err = validate_value(v).unwrap_err();
        let paths: Vec<&str> = err.0.iter().map(|e| e.path.as_str()).collect();
        for p in ["$.colour", "$.ns", "$.seed", "$.grid"] {
            assert!(paths.contains(&p), "{p} missing from {err}");
        }
    }

    #[test]
    fn nested_unknown_fields_are_rejected() {
        let mut v = risk_config();
        v["model"]["colour"] = json!(1);
        let err = validate_value(v).unwrap_err();
        assert!(err.0.iter().any(|e| e.path == "$.model"), "{err}");
    }

    #[test]
    fn grid_points_must_lie_in_the_restriction() {
        let mut v = risk_config();
        v["restriction"] = json!({"type": "half-line-lower", "bound": 0.5});
        let err = validate_value(v).unwrap_err();
        assert!(err.0.iter().any(|e| e.path == "$.grid[0]"), "{err}");
    }

    #[test]
    fn linspace_grid() {
        let model = ModelSpec::location(minimax_core::BaseDensity::Normal, 1);
        let g = parse_grid(json!({"linspace": {"start": -1.0, "stop": 1.0, "count": 41}}), &model).unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g[20].location, vec![0.0]);
        assert_eq!(g[40].location, vec![1.0]);
    }

    #[test]
    fn cone_shorthand() {
        let r = parse_restriction(json!({"cone": "simple-order", "p": 3})).unwrap();
        assert_eq!(r.ambient(), Ambient::Location(3));
        assert!(parse_restriction(json!({"cone": "star", "p": 3})).is_err());
    }

    #[test]
    fn normalized_config_validates_again() {
        let cfg = validate_value(risk_config()).unwrap();
        let again = validate_value(serde_json::to_value(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn covariance_points_round_trip() {
        let v = [2.0, 0.5, 0.5, 1.0];
        let p = point_from_flat(Ambient::Covariance(2), &v).unwrap();
        assert_eq!(flat_from_point(&p), v.to_vec());
    }
}
