//! Named estimators and ready-made experiments.
//!
//! Estimator presets are resolved against the model, loss and restriction
//! of the config they appear in. Experiment presets expand to a full config
//! object; keys given next to the preset override the expanded ones.

use serde::Deserialize;
use serde_json::{json, Map, Value};

use minimax_core::restriction::make_cone;
use minimax_core::{
    ConeKind, Coordinate, Estimand, EstimatorSpec, GroupKind, LossShape, LossSpec, ModelSpec,
    Restriction,
};

pub const ESTIMATOR_PRESETS: [&str; 12] = [
    "identity",
    "pitman",
    "mre",
    "katz",
    "tmre",
    "quantile-mre",
    "js-cov",
    "s-over-m",
    "pava-x",
    "hartigan",
    "scale-mre",
    "scale-mre-lower",
];

pub const EXPERIMENT_PRESETS: [&str; 12] = [
    "quantile-mre-normal",
    "katz-halfline",
    "katz-risk",
    "tmre-interval",
    "pava-cone",
    "hartigan-cone",
    "scale-lower",
    "quantile-omega1",
    "js-cov",
    "js-cov-search",
    "linear-combination",
    "lfp-halfline",
];

fn unknown_estimator(name: &str) -> String {
    format!(
        "unknown estimator `{name}`; valid presets: {}",
        ESTIMATOR_PRESETS.join(", ")
    )
}

/// `T/(m+1)` is the best multiple of the total under scale-invariant
/// squared error for exponential data, and its projection onto `[b, inf)`.
fn scale_multiple_for(model: &ModelSpec) -> Result<f64, String> {
    match model.base {
        minimax_core::BaseDensity::Exponential => Ok(1.0 / (model.m as f64 + 1.0)),
        minimax_core::BaseDensity::Gamma { shape } => {
            // E[T]/E[T^2] with T ~ Gamma(m a, 1)
            let k = model.m as f64 * shape;
            Ok(1.0 / (k + 1.0))
        }
        other => Err(format!("no closed-form scale multiple for base {other:?}")),
    }
}

/// Resolves an estimator preset in the context of a config.
pub fn estimator(
    name: &str,
    model: &ModelSpec,
    loss: Option<&LossSpec>,
    restriction: Option<&Restriction>,
) -> Result<EstimatorSpec, String> {
    let shape = loss.map(|l| l.shape);
    let difference_shape = shape.filter(|s| s.is_difference()).unwrap_or(LossShape::SquaredError);
    let cone_constraints = |p: usize| -> Result<Restriction, String> {
        match restriction {
            Some(r @ Restriction::PolyhedralCone { .. }) => Ok(r.clone()),
            Some(other) => Err(format!("`{name}` needs a cone restriction, got {other:?}")),
            None => make_cone(ConeKind::SimpleOrder { r: None }, p).map_err(|e| e.to_string()),
        }
    };
    let spec = match name {
        "identity" => EstimatorSpec::Identity,
        "pitman" => EstimatorSpec::PitmanLocation {
            shape: difference_shape,
        },
        "mre" => return mre(model, loss),
        "katz" => EstimatorSpec::RestrictedFlatBayes {
            restriction: restriction.cloned().unwrap_or(Restriction::HalfLineLower {
                bound: 0.0,
                parameter: Coordinate::Location,
            }),
            shape: LossShape::SquaredError,
        },
        "tmre" => {
            let base = if model.m == 1 {
                EstimatorSpec::Identity
            } else {
                EstimatorSpec::PitmanLocation {
                    shape: difference_shape,
                }
            };
            EstimatorSpec::Projected {
                base: Box::new(base),
                restriction: restriction.cloned().unwrap_or(Restriction::Interval {
                    lower: -1.0,
                    upper: 1.0,
                    scale_unknown: false,
                }),
            }
        }
        "quantile-mre" => match loss.map(|l| &l.estimand) {
            Some(Estimand::Quantile { eta }) => EstimatorSpec::QuantileMre { eta: *eta },
            _ => return Err("`quantile-mre` takes eta from a quantile loss".into()),
        },
        "js-cov" => EstimatorSpec::cov_a0(model.m, model.p).map_err(|e| e.to_string())?,
        "s-over-m" => EstimatorSpec::CovDiag {
            a: vec![1.0 / model.m as f64; model.p],
            name: Some("S/m".into()),
        },
        "pava-x" => EstimatorSpec::Projected {
            base: Box::new(EstimatorSpec::Identity),
            restriction: cone_constraints(model.p)?,
        },
        "hartigan" => match cone_constraints(model.p)? {
            Restriction::PolyhedralCone { constraints } => EstimatorSpec::ConeFlatBayes { constraints },
            _ => unreachable!("cone_constraints returns cones"),
        },
        "scale-mre" => EstimatorSpec::ScaleMultiple {
            c: scale_multiple_for(model)?,
        },
        "scale-mre-lower" => EstimatorSpec::Projected {
            base: Box::new(EstimatorSpec::ScaleMultiple {
                c: scale_multiple_for(model)?,
            }),
            restriction: restriction.cloned().unwrap_or(Restriction::HalfLineLower {
                bound: 1.0,
                parameter: Coordinate::Scale,
            }),
        },
        _ => return Err(unknown_estimator(name)),
    };
    Ok(spec)
}

/// The equivariant rule matching the model's group and the loss.
fn mre(model: &ModelSpec, loss: Option<&LossSpec>) -> Result<EstimatorSpec, String> {
    let loss = loss.ok_or("`mre` needs a loss")?;
    Ok(match (model.kind, &loss.estimand) {
        (GroupKind::Location, Estimand::Location) => EstimatorSpec::PitmanLocation { shape: loss.shape },
        (GroupKind::Scale, Estimand::ScalePower { power }) => EstimatorSpec::MreScale {
            shape: loss.shape,
            power: *power,
        },
        (GroupKind::Scale, Estimand::ScaleProduct { exponents }) => EstimatorSpec::MreScaleProduct {
            shape: loss.shape,
            exponents: exponents.clone(),
        },
        (GroupKind::LocationScale, Estimand::Quantile { eta }) => EstimatorSpec::QuantileMre { eta: *eta },
        (GroupKind::MultivariateLocation, Estimand::LinearCombination { a }) => {
            EstimatorSpec::LinearMre { a: a.clone(), b: None }
        }
        (GroupKind::MultivariateLocation, Estimand::Location) => EstimatorSpec::Identity,
        (GroupKind::Wishart, Estimand::Covariance) => {
            EstimatorSpec::cov_a0(model.m, model.p).map_err(|e| e.to_string())?
        }
        (kind, estimand) => return Err(format!("no equivariant preset for {kind:?} with {estimand:?}")),
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetArgs {
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub eta: Option<f64>,
}

fn normal() -> Value {
    json!({"name": "normal"})
}

fn squared_location() -> Value {
    json!({"estimand": "location", "shape": "squared-error"})
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("presets are objects"),
    }
}

/// Expands an experiment preset.
pub fn experiment(name: &str, args: Option<Value>) -> Result<Map<String, Value>, String> {
    let args: PresetArgs = match args {
        None => PresetArgs::default(),
        Some(v) => serde_json::from_value(v).map_err(|e| format!("preset_args: {e}"))?,
    };
    let allow = |m: bool, p: bool, eta: bool| -> Result<(), String> {
        let bad = [
            ("m", args.m.is_some() && !m),
            ("p", args.p.is_some() && !p),
            ("eta", args.eta.is_some() && !eta),
        ];
        match bad.iter().find(|(_, b)| *b) {
            Some((k, _)) => Err(format!("preset `{name}` takes no `{k}` argument")),
            None => Ok(()),
        }
    };
    let half_line = json!({"type": "half-line-lower", "bound": 0.0});
    let v = match name {
        "quantile-mre-normal" => {
            allow(true, false, true)?;
            let eta = args.eta.unwrap_or(1.0);
            json!({
                "command": "risk",
                "model": {"kind": "location-scale", "base": normal(), "m": args.m.unwrap_or(3)},
                "loss": {"estimand": {"quantile": {"eta": eta}}, "shape": "squared-error"},
                "estimator": "quantile-mre",
                "grid": [[0.0, 1.0], [5.0, 2.0]],
                "method": "monte-carlo"
            })
        }
        "katz-halfline" => {
            allow(false, false, false)?;
            json!({
                "command": "dominate",
                "model": {"kind": "location", "base": normal(), "m": 1},
                "loss": squared_location(),
                "restriction": half_line,
                "estimator": "katz",
                "incumbent": "identity",
                "grid": [0.0, 0.25, 0.5, 1.0, 2.0, 4.0]
            })
        }
        "katz-risk" => {
            allow(false, false, false)?;
            json!({
                "command": "risk",
                "method": "quadrature",
                "model": {"kind": "location", "base": normal(), "m": 1},
                "loss": squared_location(),
                "restriction": half_line,
                "estimator": "katz",
                "grid": [0.0, 0.25, 0.5, 1.0, 2.0, 4.0]
            })
        }
        "tmre-interval" => {
            allow(false, false, false)?;
            json!({
                "command": "risk",
                "method": "quadrature",
                "model": {"kind": "location", "base": normal(), "m": 1},
                "loss": squared_location(),
                "restriction": {"type": "interval", "lower": -1.0, "upper": 1.0},
                "estimator": "tmre",
                "grid": {"linspace": {"start": -1.0, "stop": 1.0, "count": 41}}
            })
        }
        "pava-cone" | "hartigan-cone" => {
            let p = if name == "pava-cone" {
                allow(false, true, false)?;
                args.p.unwrap_or(3)
            } else {
                allow(false, false, false)?;
                2
            };
            let grid = ordered_grid(p);
            json!({
                "command": "dominate",
                "model": {"kind": "multivariate-location", "base": normal(), "m": 1, "p": p},
                "loss": squared_location(),
                "restriction": {"cone": "simple-order", "p": p},
                "estimator": if name == "pava-cone" { "pava-x" } else { "hartigan" },
                "incumbent": "identity",
                "grid": grid
            })
        }
        "scale-lower" => {
            allow(true, false, false)?;
            json!({
                "command": "dominate",
                "model": {"kind": "scale", "base": {"name": "exponential"}, "m": args.m.unwrap_or(1)},
                "loss": {"estimand": {"scale-power": {"power": 1.0}}, "shape": "scale-invariant-squared"},
                "restriction": {"type": "half-line-lower", "bound": 1.0, "parameter": "scale"},
                "estimator": "scale-mre-lower",
                "incumbent": "scale-mre",
                "grid": [1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0]
            })
        }
        "quantile-omega1" => {
            allow(true, false, true)?;
            let eta = args.eta.unwrap_or(1.645);
            json!({
                "command": "dominate",
                "model": {"kind": "location-scale", "base": normal(), "m": args.m.unwrap_or(3)},
                "loss": {"estimand": {"quantile": {"eta": eta}}, "shape": "squared-error"},
                "restriction": {"type": "quantile-cone", "eta": eta},
                "estimator": {
                    "type": "projected",
                    "base": {"type": "quantile-mre", "eta": eta},
                    "restriction": {"type": "half-line-lower", "bound": 0.0}
                },
                "incumbent": "quantile-mre",
                "grid": [[0.0, 1.0], [-eta, 1.0], [-eta * 2.0, 2.0], [1.0, 1.0], [-eta * 0.5, 0.5]]
            })
        }
        "js-cov" | "js-cov-search" => {
            allow(true, false, false)?;
            let m = args.m.unwrap_or(5);
            let model = json!({"kind": "wishart", "base": normal(), "m": m, "p": 2});
            let loss = json!({"estimand": "covariance", "shape": "stein"});
            if name == "js-cov" {
                json!({
                    "command": "dominate",
                    "model": model,
                    "loss": loss,
                    "estimator": "js-cov",
                    "incumbent": "s-over-m",
                    "grid": [[1.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 4.0], [2.0, 0.5, 0.5, 1.0]]
                })
            } else {
                json!({
                    "command": "optimize",
                    "model": model,
                    "loss": loss,
                    "family": {"family": "cov-diagonal"}
                })
            }
        }
        "linear-combination" => {
            allow(false, false, false)?;
            let a = [1.0, 2.0, -1.0];
            json!({
                "command": "risk",
                "model": {"kind": "multivariate-location", "base": normal(), "m": 1, "p": 3},
                "loss": {"estimand": {"linear-combination": {"a": a}}, "shape": "squared-error"},
                "estimator": "mre",
                "grid": [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5], [10.0, 3.0, -4.0]]
            })
        }
        "lfp-halfline" => {
            allow(false, false, false)?;
            json!({
                "command": "lfp",
                "model": {"kind": "location", "base": normal(), "m": 1},
                "loss": squared_location(),
                "restriction": half_line,
                "ns": [1, 2, 4, 8, 16],
                "spacing": 0.25
            })
        }
        _ => {
            return Err(format!(
                "unknown experiment preset `{name}`; valid presets: {}",
                EXPERIMENT_PRESETS.join(", ")
            ))
        }
    };
    Ok(object(v))
}

/// Ordered points `mu_1 <= ... <= mu_p`: the apex, boundary points with
/// ties, and interior points at growing separation.
fn ordered_grid(p: usize) -> Vec<Vec<f64>> {
    let ramp = |step: f64| -> Vec<f64> { (0..p).map(|i| step * i as f64).collect() };
    let mut grid = vec![ramp(0.0)];
    for step in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        grid.push(ramp(step));
    }
    let mut tie = vec![0.0; p];
    tie[p - 1] = 1.0;
    grid.push(tie);
    grid.push((0..p).map(|i| if i == 0 { -3.0 } else { 0.0 }).collect());
    grid
}
