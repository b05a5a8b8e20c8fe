//! Frequentist risk by Monte Carlo and quadrature, paired comparisons,
//! Bayes risks of finite-support priors and equivariant-constant search.
//!
//! Every Monte Carlo loss sequence is indexed by replicate and reduced in a
//! fixed order, so results do not depend on the number of worker threads.

mod bayes;
mod optimize;

pub use bayes::{bayes_risk, lfp_run, shifted_prior_pair, LfpReport, LfpRow, PriorSupport, MAX_EMBEDDING_SHIFT};
pub use optimize::{optimize_equivariant_constant, ConstantFamily, OptimizationReport, SearchSpec};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::group::GroupElement;
use crate::loss::{loss_value, LossSpec};
use crate::models::{draw_replicate, DataPoint, GroupKind, ModelSpec, ParameterPoint};
use crate::quadrature::{log_window, try_integrate, try_integrate_with_breaks, QuadratureSpec};
use crate::restriction::{Coordinate, Restriction};
use crate::rng::Substreams;

/// Default Monte Carlo size for scalar and vector data.
pub const DEFAULT_REPLICATES: usize = 1_000_000;
/// Default Monte Carlo size for matrix data.
pub const DEFAULT_MATRIX_REPLICATES: usize = 100_000;
/// Number of standard errors behind every Monte Carlo verdict.
pub const DECISION_SE: f64 = 3.0;

pub fn default_replicates(model: &ModelSpec) -> usize {
    if model.kind == GroupKind::Wishart {
        DEFAULT_MATRIX_REPLICATES
    } else {
        DEFAULT_REPLICATES
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskMethod {
    MonteCarlo,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub risk: f64,
    /// Sample standard deviation over `sqrt(replicates)`; zero for quadrature.
    pub se: f64,
    pub replicates: usize,
    pub seed: u64,
    pub method: RiskMethod,
}

impl RiskEstimate {
    fn quadrature(risk: f64) -> Self {
        Self {
            risk,
            se: 0.0,
            replicates: 0,
            seed: 0,
            method: RiskMethod::Quadrature,
        }
    }
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// `(mean, standard error of the mean)`.
pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(losses: &[f64], seed: u64) -> RiskEstimate {
    let (risk, se) = mean_and_se(losses);
    RiskEstimate {
        risk,
        se,
        replicates: losses.len(),
        seed,
        method: RiskMethod::MonteCarlo,
    }
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < 2 {
        return Err(Error::Argument(format!("need at least 2 replicates, got {replicates}")));
    }
    Ok(())
}

fn first_error(results: Vec<Result<f64>>) -> Result<Vec<f64>> {
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Replicate {
                replicate: i as u64,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Per-replicate losses `L(theta, delta(X_i))`, `X_i` drawn from substream `i`.
pub fn loss_sequence(
    model: &ModelSpec,
    theta: &ParameterPoint,
    estimator: &EstimatorSpec,
    loss: &LossSpec,
    replicates: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    estimator.validate(model)?;
    theta.validate_for(model)?;
    let streams = Substreams::new(seed);
    let results: Vec<Result<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let x = draw_replicate(model, theta, &streams, i);
            let d = estimator.evaluate(model, &x, quad)?;
            loss_value(loss, theta, &d)
        })
        .collect();
    first_error(results)
}

/// Losses of the same replicates after mapping everything by `g`: the draw
/// `X_i` at `theta` becomes `g X_i`, and the loss is taken at `g theta`.
/// For an equivariant rule under an invariant loss this reproduces
/// [`loss_sequence`] at `theta` up to rounding.
#[allow(clippy::too_many_arguments)]
pub fn mapped_loss_sequence(
    model: &ModelSpec,
    theta: &ParameterPoint,
    g: &GroupElement,
    estimator: &EstimatorSpec,
    loss: &LossSpec,
    replicates: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    estimator.validate(model)?;
    theta.validate_for(model)?;
    g.validate()?;
    let moved = g.act_parameter(theta)?;
    moved.validate_for(model)?;
    let streams = Substreams::new(seed);
    let results: Vec<Result<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let x = g.act_data(&draw_replicate(model, theta, &streams, i))?;
            let d = estimator.evaluate(model, &x, quad)?;
            loss_value(loss, &moved, &d)
        })
        .collect();
    first_error(results)
}

/// Monte Carlo estimate of `R(theta, delta)`.
pub fn mc_risk(
    model: &ModelSpec,
    theta: &ParameterPoint,
    estimator: &EstimatorSpec,
    loss: &LossSpec,
    replicates: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<RiskEstimate> {
    check_replicates(replicates)?;
    let losses = loss_sequence(model, theta, estimator, loss, replicates, seed, quad)?;
    Ok(summarize(&losses, seed))
}

/// Maps standardized noise `z` to one replicate at `theta`, mirroring the
/// sampler.
fn noise_to_data(model: &ModelSpec, theta: &ParameterPoint, z: &[f64]) -> DataPoint {
    let p = model.p;
    DataPoint::Vector(match model.kind {
        GroupKind::Location | GroupKind::MultivariateLocation => z
            .iter()
            .enumerate()
            .map(|(k, v)| theta.location[k % p] + v)
            .collect(),
        GroupKind::Scale => z.iter().enumerate().map(|(k, v)| theta.scale[k % p] * v).collect(),
        GroupKind::LocationScale => z.iter().map(|v| theta.mu() + theta.sigma() * v).collect(),
        GroupKind::Wishart => unreachable!("matrix data are rejected earlier"),
    })
}

/// Kinks of a rule in data space, used as quadrature breakpoints.
fn decision_breaks(estimator: &EstimatorSpec) -> Vec<f64> {
    match estimator {
        EstimatorSpec::Projected { base, restriction } if **base == EstimatorSpec::Identity => {
            match *restriction {
                Restriction::HalfLineLower { bound, .. } | Restriction::HalfLineUpper { bound, .. } => {
                    vec![bound]
                }
                Restriction::Interval { lower, upper, .. } => vec![lower, upper],
                _ => Vec::new(),
            }
        }
        _ => Vec::new(),
    }
}

/// Noise window holding all but a negligible tail of the base density.
fn noise_window(model: &ModelSpec) -> Result<(f64, f64)> {
    let base = model.base;
    let w = log_window(
        |z| base.ln_pdf(z),
        base.support(),
        base.mean(),
        base.spread(),
    )?;
    Ok((w.lo, w.hi))
}

/// `R(theta, delta)` by integrating over the noise of a replicate with at
/// most two scalar values.
pub fn quadrature_risk(
    model: &ModelSpec,
    theta: &ParameterPoint,
    estimator: &EstimatorSpec,
    loss: &LossSpec,
    quad: &QuadratureSpec,
) -> Result<RiskEstimate> {
    estimator.validate(model)?;
    theta.validate_for(model)?;
    quad.validate()?;
    let width = model.replicate_width();
    if model.kind == GroupKind::Wishart || width > 2 {
        return Err(Error::Argument(format!(
            "quadrature risk supports replicates of at most 2 scalars, got {width}"
        )));
    }
    let base = model.base;
    let (lo, hi) = noise_window(model)?;
    let integrand = |z: &[f64]| -> Result<f64> {
        let density: f64 = z.iter().map(|&v| base.pdf(v)).product();
        if density == 0.0 {
            return Ok(0.0);
        }
        let x = noise_to_data(model, theta, z);
        let d = estimator.evaluate(model, &x, quad)?;
        Ok(loss_value(loss, theta, &d)? * density)
    };
    let value = if width == 1 {
        let breaks: Vec<f64> = decision_breaks(estimator)
            .into_iter()
            .map(|b| match model.kind {
                GroupKind::Scale => b / theta.sigma(),
                GroupKind::LocationScale => (b - theta.mu()) / theta.sigma(),
                _ => b - theta.location[0],
            })
            .collect();
        try_integrate_with_breaks(|z| integrand(&[z]), lo, hi, &breaks, quad)?.value
    } else {
        try_integrate(
            |z1| try_integrate(|z2| integrand(&[z1, z2]), lo, hi, quad).map(|i| i.value),
            lo,
            hi,
            quad,
        )?
        .value
    };
    Ok(RiskEstimate::quadrature(value))
}

#[derive(Debug, Clone, Serialize)]
pub struct SupRisk {
    pub value: f64,
    pub argmax: ParameterPoint,
    pub risks: Vec<(ParameterPoint, RiskEstimate)>,
}

/// How risks are computed at each parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskMode {
    MonteCarlo { replicates: usize, seed: u64 },
    Quadrature,
}

/// Risk at one point under `mode`.
pub fn risk_at(
    model: &ModelSpec,
    theta: &ParameterPoint,
    estimator: &EstimatorSpec,
    loss: &LossSpec,
    mode: RiskMode,
    quad: &QuadratureSpec,
) -> Result<RiskEstimate> {
    match mode {
        RiskMode::MonteCarlo { replicates, seed } => {
            mc_risk(model, theta, estimator, loss, replicates, seed, quad)
        }
        RiskMode::Quadrature => quadrature_risk(model, theta, estimator, loss, quad),
    }
}

/// Largest risk over a grid. Monte Carlo mode uses one seed for every grid
/// point, so risks at different points are paired.
pub fn sup_risk(
    model: &ModelSpec,
    estimator: &EstimatorSpec,
    loss: &LossSpec,
    grid: &[ParameterPoint],
    restriction: Option<&Restriction>,
    mode: RiskMode,
    quad: &QuadratureSpec,
) -> Result<SupRisk> {
    if grid.is_empty() {
        return Err(Error::Argument("risk grid is empty".into()));
    }
    if let Some(r) = restriction {
        for theta in grid {
            if !r.contains(theta)? {
                return Err(Error::Argument(format!("grid point {theta:?} is outside {r:?}")));
            }
        }
    }
    let risks: Vec<RiskEstimate> = grid
        .par_iter()
        .map(|theta| risk_at(model, theta, estimator, loss, mode, quad))
        .collect::<Result<_>>()?;
    let (best, value) = risks
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, r)| {
            if r.risk > bv {
                (i, r.risk)
            } else {
                (bi, bv)
            }
        });
    Ok(SupRisk {
        value,
        argmax: grid[best].clone(),
        risks: grid.iter().cloned().zip(risks).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DominationVerdict {
    Dominates,
    Ties,
    DoesNotDominate,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationRow {
    pub theta: ParameterPoint,
    pub challenger: RiskEstimate,
    pub incumbent: RiskEstimate,
    /// Mean of the paired loss differences, challenger minus incumbent.
    pub difference: f64,
    pub difference_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub rows: Vec<DominationRow>,
    pub verdict: DominationVerdict,
}

/// Verdict from paired differences `(mean, se)`.
pub fn domination_verdict(diffs: &[(f64, f64)]) -> DominationVerdict {
    let not_worse = diffs.iter().all(|&(d, se)| d <= DECISION_SE * se);
    let strictly_better = diffs.iter().any(|&(d, se)| d < -DECISION_SE * se);
    if not_worse && strictly_better {
        DominationVerdict::Dominates
    } else if diffs.iter().all(|&(d, se)| d.abs() <= DECISION_SE * se) {
        DominationVerdict::Ties
    } else {
        DominationVerdict::DoesNotDominate
    }
}

/// Paired Monte Carlo comparison over a grid with common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn domination_check(
    model: &ModelSpec,
    challenger: &EstimatorSpec,
    incumbent: &EstimatorSpec,
    loss: &LossSpec,
    grid: &[ParameterPoint],
    replicates: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<DominationReport> {
    if grid.is_empty() {
        return Err(Error::Argument("comparison grid is empty".into()));
    }
    check_replicates(replicates)?;
    let rows: Vec<DominationRow> = grid
        .par_iter()
        .map(|theta| -> Result<DominationRow> {
            let a = loss_sequence(model, theta, challenger, loss, replicates, seed, quad)?;
            let b = loss_sequence(model, theta, incumbent, loss, replicates, seed, quad)?;
            let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let (difference, difference_se) = mean_and_se(&diff);
            Ok(DominationRow {
                theta: theta.clone(),
                challenger: summarize(&a, seed),
                incumbent: summarize(&b, seed),
                difference,
                difference_se,
            })
        })
        .collect::<Result<_>>()?;
    let diffs: Vec<(f64, f64)> = rows.iter().map(|r| (r.difference, r.difference_se)).collect();
    Ok(DominationReport {
        verdict: domination_verdict(&diffs),
        rows,
    })
}

/// Location or scale coordinate of a one-dimensional parameter.
pub(crate) fn scalar_coordinate(model: &ModelSpec) -> Result<Coordinate> {
    match (model.kind, model.p) {
        (GroupKind::Location, 1) => Ok(Coordinate::Location),
        (GroupKind::Scale, 1) => Ok(Coordinate::Scale),
        _ => Err(Error::Argument(format!(
            "expected a scalar location or scale family, got {:?} with p = {}",
            model.kind, model.p
        ))),
    }
}
