//! Bayes risks of finite-support priors for scalar location and scale
//! families, the shifted-prior identity, and least-favourable sequences.

use serde::{Deserialize, Serialize};

use super::{noise_window, quadrature_risk, scalar_coordinate};
use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::group::GroupElement;
use crate::loss::{loss_value, Decision, Estimand, LossShape, LossSpec};
use crate::models::{BaseDensity, ModelSpec, ParameterPoint};
use crate::quadrature::{try_integrate, try_integrate_on_panels, QuadratureSpec};
use crate::restriction::{coordinate, shift_element, Coordinate, Restriction};

/// Largest `m(n)` tried when embedding a prior support in the restriction.
pub const MAX_EMBEDDING_SHIFT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSupport {
    pub points: Vec<ParameterPoint>,
    pub weights: Vec<f64>,
}

impl PriorSupport {
    pub fn new(points: Vec<ParameterPoint>, weights: Vec<f64>) -> Result<Self> {
        let prior = Self { points, weights };
        prior.validate()?;
        Ok(prior)
    }

    pub fn uniform(points: Vec<ParameterPoint>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    /// Atoms `k h`, `|k h| <= half_width`.
    pub fn location_atoms(half_width: f64, spacing: f64) -> Result<Self> {
        check_spacing(spacing)?;
        let k = (half_width / spacing + 1e-9).floor() as i64;
        Self::uniform((-k..=k).map(|i| ParameterPoint::location(i as f64 * spacing)).collect())
    }

    /// Atoms `exp(k h)` within `[1/ratio, ratio]`.
    pub fn scale_atoms(ratio: f64, spacing: f64) -> Result<Self> {
        check_spacing(spacing)?;
        if !(ratio >= 1.0) {
            return Err(Error::Argument(format!("scale atom range needs ratio >= 1, got {ratio}")));
        }
        let k = (ratio.ln() / spacing + 1e-9).floor() as i64;
        Self::uniform((-k..=k).map(|i| ParameterPoint::scale((i as f64 * spacing).exp())).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.points.len() != self.weights.len() {
            return Err(Error::Argument("prior needs one positive weight per support point".into()));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Argument("prior weights must be positive".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!("prior weights sum to {total}, not 1")));
        }
        for (i, a) in self.points.iter().enumerate() {
            if self.points[..i].contains(a) {
                return Err(Error::Argument(format!("repeated support point {a:?}")));
            }
        }
        Ok(())
    }

    /// The prior with every atom moved by `g`.
    pub fn pushed(&self, g: &GroupElement) -> Result<Self> {
        Ok(Self {
            points: self
                .points
                .iter()
                .map(|p| g.act_parameter(p))
                .collect::<Result<_>>()?,
            weights: self.weights.clone(),
        })
    }
}

fn check_spacing(spacing: f64) -> Result<()> {
    if spacing > 0.0 && spacing.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("atom spacing must be positive, got {spacing}")))
    }
}

/// Scalar atoms of a prior for a location or scale model.
struct Atoms {
    coord: Coordinate,
    base: BaseDensity,
    values: Vec<f64>,
    ln_weights: Vec<f64>,
    points: Vec<ParameterPoint>,
}

impl Atoms {
    fn new(model: &ModelSpec, prior: &PriorSupport) -> Result<Self> {
        prior.validate()?;
        if model.m != 1 {
            return Err(Error::Argument(format!(
                "Bayes risks use one observation per replicate, got m = {}",
                model.m
            )));
        }
        let coord = scalar_coordinate(model)?;
        for p in &prior.points {
            p.validate_for(model)?;
        }
        Ok(Self {
            coord,
            base: model.base,
            values: prior.points.iter().map(|p| coordinate(p, coord)).collect(),
            ln_weights: prior.weights.iter().map(|w| w.ln()).collect(),
            points: prior.points.clone(),
        })
    }

    fn data(&self, k: usize, z: f64) -> f64 {
        match self.coord {
            Coordinate::Location => self.values[k] + z,
            Coordinate::Scale => self.values[k] * z,
        }
    }

    fn ln_likelihood(&self, k: usize, x: f64) -> f64 {
        let t = self.values[k];
        match self.coord {
            Coordinate::Location => self.base.ln_pdf(x - t),
            Coordinate::Scale => self.base.ln_pdf(x / t) - t.ln(),
        }
    }

    /// Bayes decision at `x` for the discrete posterior.
    fn rule(&self, shape: LossShape, x: f64) -> Result<f64> {
        let ln_post: Vec<f64> = (0..self.values.len())
            .map(|k| self.ln_weights[k] + self.ln_likelihood(k, x))
            .collect();
        let top = ln_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("observation {x} has zero marginal density")));
        }
        let w: Vec<f64> = ln_post.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        let t = &self.values;
        Ok(match (self.coord, shape) {
            (Coordinate::Location, LossShape::SquaredError) => {
                w.iter().zip(t).map(|(w, t)| w * t).sum::<f64>() / total
            }
            (Coordinate::Location, LossShape::Absolute) => {
                let mut order: Vec<usize> = (0..t.len()).collect();
                order.sort_by(|&a, &b| t[a].total_cmp(&t[b]));
                let mut acc = 0.0;
                let mut median = t[order[order.len() - 1]];
                for &k in &order {
                    acc += w[k];
                    if acc >= 0.5 * total {
                        median = t[k];
                        break;
                    }
                }
                median
            }
            (Coordinate::Scale, LossShape::ScaleInvariantSquared) => {
                let a: f64 = w.iter().zip(t).map(|(w, s)| w / s).sum();
                let b: f64 = w.iter().zip(t).map(|(w, s)| w / (s * s)).sum();
                a / b
            }
            (Coordinate::Scale, LossShape::Entropy) => {
                total / w.iter().zip(t).map(|(w, s)| w / s).sum::<f64>()
            }
            _ => {
                return Err(Error::LossDomain(format!(
                    "no discrete Bayes rule for {shape:?} on a {:?} parameter",
                    self.coord
                )))
            }
        })
    }

    fn check_loss(&self, loss: &LossSpec) -> Result<()> {
        let ok = match (self.coord, &loss.estimand) {
            (Coordinate::Location, Estimand::Location) => {
                matches!(loss.shape, LossShape::SquaredError | LossShape::Absolute)
            }
            (Coordinate::Scale, Estimand::ScalePower { power }) => {
                *power == 1.0
                    && matches!(loss.shape, LossShape::ScaleInvariantSquared | LossShape::Entropy)
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::LossDomain(format!(
                "Bayes risk supports squared/absolute location losses and scale losses for sigma, got {loss:?}"
            )))
        }
    }

    /// `L(theta_k, delta(x(z))) f(z)`.
    fn integrand(&self, loss: &LossSpec, k: usize, z: f64) -> Result<f64> {
        let density = self.base.pdf(z);
        if density == 0.0 {
            return Ok(0.0);
        }
        let d = self.rule(loss.shape, self.data(k, z))?;
        Ok(loss_value(loss, &self.points[k], &Decision::Scalar(d))? * density)
    }
}

/// Bayes risk together with the noise-space partition used for each atom.
fn bayes_risk_with_panels(
    model: &ModelSpec,
    prior: &PriorSupport,
    loss: &LossSpec,
    quad: &QuadratureSpec,
) -> Result<(f64, Vec<Vec<(f64, f64)>>)> {
    quad.validate()?;
    let atoms = Atoms::new(model, prior)?;
    atoms.check_loss(loss)?;
    let (lo, hi) = noise_window(model)?;
    let mut total = 0.0;
    let mut panels = Vec::with_capacity(prior.points.len());
    for (k, w) in prior.weights.iter().enumerate() {
        let r = try_integrate(|z| atoms.integrand(loss, k, z), lo, hi, quad)?;
        total += w * r.value;
        panels.push(r.panels);
    }
    Ok((total, panels))
}

/// `sum_k w_k R(theta_k, delta_pi)` for the Bayes rule `delta_pi` of a
/// finite-support prior.
pub fn bayes_risk(
    model: &ModelSpec,
    prior: &PriorSupport,
    loss: &LossSpec,
    quad: &QuadratureSpec,
) -> Result<f64> {
    bayes_risk_with_panels(model, prior, loss, quad).map(|(r, _)| r)
}

fn bayes_risk_on_panels(
    model: &ModelSpec,
    prior: &PriorSupport,
    loss: &LossSpec,
    panels: &[Vec<(f64, f64)>],
) -> Result<f64> {
    let atoms = Atoms::new(model, prior)?;
    atoms.check_loss(loss)?;
    let mut total = 0.0;
    for (k, w) in prior.weights.iter().enumerate() {
        total += w * try_integrate_on_panels(|z| atoms.integrand(loss, k, z), &panels[k])?;
    }
    Ok(total)
}

/// `(r, r*)`: Bayes risks of the prior and of its image under `g^-1`, the
/// latter evaluated on the same noise-space nodes, so the two agree up to
/// rounding for an invariant problem.
pub fn shifted_prior_pair(
    model: &ModelSpec,
    prior: &PriorSupport,
    g: &GroupElement,
    loss: &LossSpec,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    g.validate()?;
    let (r, panels) = bayes_risk_with_panels(model, prior, loss, quad)?;
    if g.is_identity() {
        return Ok((r, r));
    }
    let moved = prior.pushed(&g.inverse())?;
    let r_star = bayes_risk_on_panels(model, &moved, loss, &panels)?;
    Ok((r, r_star))
}

#[derive(Debug, Clone, Serialize)]
pub struct LfpRow {
    pub n: usize,
    pub atoms: usize,
    /// Smallest `m` with `g_m^-1(S_n)` inside the restriction.
    pub shift: usize,
    pub bayes_risk: f64,
    pub shifted_bayes_risk: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LfpReport {
    pub rows: Vec<LfpRow>,
    /// Constant risk of the best equivariant rule.
    pub reference: f64,
    pub strictly_increasing: bool,
    pub bounded_by_reference: bool,
    pub max_shift_discrepancy: f64,
}

fn embedding_shift(restriction: &Restriction, prior: &PriorSupport) -> Result<(usize, GroupElement)> {
    for m in 1..=MAX_EMBEDDING_SHIFT {
        let g = shift_element(restriction, m)?;
        let inv = g.inverse();
        let mut inside = true;
        for p in &prior.points {
            if !restriction.contains(&inv.act_parameter(p)?)? {
                inside = false;
                break;
            }
        }
        if inside {
            return Ok((m, g));
        }
    }
    Err(Error::Embedding(format!(
        "no shift m <= {MAX_EMBEDDING_SHIFT} moves the {} prior atoms into {restriction:?}",
        prior.points.len()
    )))
}

/// Bayes risks of nested uniform-atom priors and of their images inside the
/// restriction, against the equivariant minimax value.
pub fn lfp_run(
    model: &ModelSpec,
    restriction: &Restriction,
    ns: &[usize],
    spacing: f64,
    loss: &LossSpec,
    quad: &QuadratureSpec,
) -> Result<LfpReport> {
    restriction.validate()?;
    let coord = scalar_coordinate(model)?;
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::Argument("lfp needs a nonempty list of positive n".into()));
    }
    let (mre, at) = match coord {
        Coordinate::Location => (
            EstimatorSpec::PitmanLocation { shape: loss.shape },
            ParameterPoint::location(0.0),
        ),
        Coordinate::Scale => (
            EstimatorSpec::MreScale {
                shape: loss.shape,
                power: 1.0,
            },
            ParameterPoint::scale(1.0),
        ),
    };
    let reference = quadrature_risk(model, &at, &mre, loss, quad)?.risk;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let prior = match coord {
            Coordinate::Location => PriorSupport::location_atoms(n as f64, spacing)?,
            Coordinate::Scale => PriorSupport::scale_atoms(n as f64, spacing)?,
        };
        let (shift, g) = embedding_shift(restriction, &prior)?;
        let (r, r_star) = shifted_prior_pair(model, &prior, &g, loss, quad)?;
        rows.push(LfpRow {
            n,
            atoms: prior.points.len(),
            shift,
            bayes_risk: r,
            shifted_bayes_risk: r_star,
            gap: reference - r,
        });
    }
    Ok(LfpReport {
        strictly_increasing: rows.windows(2).all(|w| w[1].bayes_risk > w[0].bayes_risk),
        bounded_by_reference: rows.iter().all(|r| r.bayes_risk <= reference + 1e-9),
        max_shift_discrepancy: rows
            .iter()
            .map(|r| (r.bayes_risk - r.shifted_bayes_risk).abs())
            .fold(0.0, f64::max),
        reference,
        rows,
    })
}
