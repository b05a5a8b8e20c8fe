//! Monte Carlo search for the best constant(s) in an equivariant family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_and_se, RiskEstimate, RiskMethod, DECISION_SE};
use crate::error::{Error, Result};
use crate::estimators::{mean_and_spread, EstimatorSpec};
use crate::loss::{loss_value, LossSpec};
use crate::models::{draw_replicate, DataPoint, GroupKind, Matrix, ModelSpec, ParameterPoint};
use crate::quadrature::QuadratureSpec;
use crate::rng::Substreams;

/// Equivariant families indexed by constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstantFamily {
    /// `c T`, `T` the sum of the observations.
    ScaleMultiple,
    /// `mean + eta c S`.
    Quantile { eta: f64 },
    /// `L diag(a) L'`.
    CovDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    pub replicates: usize,
    pub seed: u64,
    /// Width below which a golden-section bracket is accepted.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Parameter points for the constant-risk pre-check; the first one is
    /// also where the risk is minimized. Defaults depend on the model.
    #[serde(default)]
    pub probes: Option<[ParameterPoint; 2]>,
}

fn default_tolerance() -> f64 {
    1e-4
}

impl SearchSpec {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            tolerance: default_tolerance(),
            probes: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationReport {
    pub constants: Vec<f64>,
    pub risk: RiskEstimate,
    /// Risks of the starting member at the two probes.
    pub precheck: [RiskEstimate; 2],
}

fn default_probes(model: &ModelSpec) -> [ParameterPoint; 2] {
    let p = model.p;
    match model.kind {
        GroupKind::Location => [ParameterPoint::location(0.0), ParameterPoint::location(3.7)],
        GroupKind::Scale => [
            ParameterPoint::scales(vec![1.0; p]),
            ParameterPoint::scales((1..=p).map(|i| 1.5 + i as f64).collect()),
        ],
        GroupKind::LocationScale => [
            ParameterPoint::location_scale(0.0, 1.0),
            ParameterPoint::location_scale(5.0, 2.0),
        ],
        GroupKind::MultivariateLocation => [
            ParameterPoint::locations(vec![0.0; p]),
            ParameterPoint::locations((1..=p).map(|i| i as f64).collect()),
        ],
        GroupKind::Wishart => {
            let mut b = Matrix::from_fn(p, p, |i, j| if i == j { (i + 1) as f64 } else { 0.3 });
            b = (&b + b.transpose()) * 0.5;
            [ParameterPoint::covariance(Matrix::identity(p, p)), ParameterPoint::covariance(b)]
        }
    }
}

fn member(family: &ConstantFamily, c: &[f64]) -> EstimatorSpec {
    match family {
        ConstantFamily::ScaleMultiple => EstimatorSpec::ScaleMultiple { c: c[0] },
        ConstantFamily::Quantile { eta } => EstimatorSpec::QuantileFamily { eta: *eta, c: c[0] },
        ConstantFamily::CovDiagonal => EstimatorSpec::CovDiag {
            a: c.to_vec(),
            name: None,
        },
    }
}

/// Risk of a family member on stored draws (common random numbers).
fn risk_on(
    draws: &[DataPoint],
    model: &ModelSpec,
    theta: &ParameterPoint,
    family: &ConstantFamily,
    c: &[f64],
    loss: &LossSpec,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let rule = member(family, c);
    let losses: Vec<f64> = draws
        .par_iter()
        .map(|x| rule.evaluate(model, x, quad).and_then(|d| loss_value(loss, theta, &d)))
        .collect::<Result<_>>()?;
    Ok(mean_and_se(&losses))
}

/// Minimizer of a unimodal function on `[a, b]` to width `tol`.
fn golden_section(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Starting constants from moment matching on the stored draws.
fn pilot(
    family: &ConstantFamily,
    model: &ModelSpec,
    theta: &ParameterPoint,
    draws: &[DataPoint],
) -> Result<Vec<f64>> {
    let n = draws.len() as f64;
    Ok(match family {
        ConstantFamily::ScaleMultiple => {
            let mean_t = draws
                .iter()
                .map(|x| x.as_vector().map(|v| v.iter().sum::<f64>()))
                .sum::<Result<f64>>()?
                / n;
            vec![theta.sigma() / mean_t.abs().max(f64::MIN_POSITIVE)]
        }
        ConstantFamily::Quantile { .. } => {
            let (mut s1, mut s2) = (0.0, 0.0);
            for x in draws {
                let (_, s) = mean_and_spread(x.as_vector()?);
                s1 += s;
                s2 += s * s;
            }
            vec![theta.sigma() * s1 / s2.max(f64::MIN_POSITIVE)]
        }
        ConstantFamily::CovDiagonal => vec![1.0 / model.m as f64; model.p],
    })
}

fn check_family(model: &ModelSpec, family: &ConstantFamily) -> Result<()> {
    let ok = match family {
        ConstantFamily::CovDiagonal => model.kind == GroupKind::Wishart,
        ConstantFamily::ScaleMultiple => model.kind != GroupKind::Wishart,
        ConstantFamily::Quantile { .. } => model.kind != GroupKind::Wishart && model.m >= 2,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::ModelMismatch(format!("{family:?} cannot be applied to {model:?}")))
    }
}

/// Constants minimizing the Monte Carlo risk of an equivariant family,
/// after checking that the family's risk does not depend on the parameter.
pub fn optimize_equivariant_constant(
    model: &ModelSpec,
    family: &ConstantFamily,
    loss: &LossSpec,
    search: &SearchSpec,
    quad: &QuadratureSpec,
) -> Result<OptimizationReport> {
    model.validate()?;
    check_family(model, family)?;
    if search.replicates < 2 || !(search.tolerance > 0.0) {
        return Err(Error::Argument("search needs >= 2 replicates and a positive tolerance".into()));
    }
    let probes = search.probes.clone().unwrap_or_else(|| default_probes(model));
    let theta = &probes[0];
    theta.validate_for(model)?;
    probes[1].validate_for(model)?;

    let streams = Substreams::new(search.seed);
    let draws: Vec<DataPoint> = (0..search.replicates as u64)
        .into_par_iter()
        .map(|i| draw_replicate(model, theta, &streams, i))
        .collect();
    let start = pilot(family, model, theta, &draws)?;

    // constant-risk pre-check with common random numbers at both probes
    let rule = member(family, &start);
    let seq = |t: &ParameterPoint| -> Result<Vec<f64>> {
        (0..search.replicates as u64)
            .into_par_iter()
            .map(|i| {
                let x = draw_replicate(model, t, &streams, i);
                rule.evaluate(model, &x, quad).and_then(|d| loss_value(loss, t, &d))
            })
            .collect()
    };
    let (a, b) = (seq(&probes[0])?, seq(&probes[1])?);
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let (d, se) = mean_and_se(&diff);
    let (ra, sa) = mean_and_se(&a);
    let (rb, sb) = mean_and_se(&b);
    if d.abs() > DECISION_SE * se + 1e-9 * (1.0 + ra.abs()) {
        return Err(Error::ModelMismatch(format!(
            "risk of {family:?} is not constant: {ra} at {:?} vs {rb} at {:?}",
            probes[0], probes[1]
        )));
    }
    let estimate = |risk, se| RiskEstimate {
        risk,
        se,
        replicates: search.replicates,
        seed: search.seed,
        method: RiskMethod::MonteCarlo,
    };

    let mut c = start;
    let objective = |c: &[f64]| risk_on(&draws, model, theta, family, c, loss, quad).map(|r| r.0);
    for _sweep in 0..50 {
        let mut moved = 0.0f64;
        for i in 0..c.len() {
            let centre = c[i];
            let (lo, hi) = match family {
                ConstantFamily::Quantile { .. } => (0.0, 4.0 * centre.abs().max(0.25)),
                _ => (centre * 1e-2, centre * 10.0),
            };
            let mut trial = c.clone();
            let best = golden_section(
                |v| {
                    trial[i] = v;
                    objective(&trial)
                },
                lo,
                hi,
                search.tolerance * 0.1,
            )?;
            moved = moved.max((best - c[i]).abs());
            c[i] = best;
        }
        if moved < search.tolerance {
            break;
        }
    }
    let (risk, se) = risk_on(&draws, model, theta, family, &c, loss, quad)?;
    Ok(OptimizationReport {
        constants: c,
        risk: estimate(risk, se),
        precheck: [estimate(ra, sa), estimate(rb, sb)],
    })
}
