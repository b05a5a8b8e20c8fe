//! Equivariant, restricted and projected estimators behind one
//! serializable description.

mod closed_form;
mod location;
mod posterior;
mod scale;

use serde::{Deserialize, Serialize};

pub use closed_form::{a0, c_m, cov_equivariant, linear_mre, mean_and_spread, quantile_family, quantile_mre};
pub use location::{
    pitman_location, pitman_location_general, restricted_flat_bayes, restricted_flat_bayes_cone,
    MIN_POSTERIOR_MASS,
};
pub use scale::{mre_scale, mre_scale_product};

use crate::error::{Error, Result};
use crate::loss::{Decision, LossShape};
use crate::models::{rows, DataPoint, GroupKind, Matrix, ModelSpec, ParameterPoint};
use crate::projection::project;
use crate::quadrature::QuadratureSpec;
use crate::restriction::{Ambient, Restriction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// Flat-prior Bayes rule for a scalar location family.
    PitmanLocation { shape: LossShape },
    /// Bayes rule under the prior `1/sigma` for `sigma^power`.
    MreScale { shape: LossShape, power: f64 },
    /// Bayes rule under `prod 1/sigma_j` for `prod sigma_j^{r_j}`.
    MreScaleProduct { shape: LossShape, exponents: Vec<f64> },
    /// Flat prior truncated to a half-line or interval, squared error.
    RestrictedFlatBayes {
        restriction: Restriction,
        #[serde(default = "squared")]
        shape: LossShape,
    },
    /// Flat prior on a single half-space cone, normal data.
    ConeFlatBayes {
        #[serde(with = "rows")]
        constraints: Matrix,
    },
    /// Base rule followed by the Euclidean projection onto the restriction.
    Projected {
        base: Box<EstimatorSpec>,
        restriction: Restriction,
    },
    /// `mean + eta c_m S`.
    QuantileMre { eta: f64 },
    /// `mean + eta c S`.
    QuantileFamily { eta: f64, c: f64 },
    /// `c T` with `T` the sum of the observations.
    ScaleMultiple { c: f64 },
    /// `sum a_i (x_i - b_i)`; `b` defaults to the base-density means.
    LinearMre {
        a: Vec<f64>,
        #[serde(default)]
        b: Option<Vec<f64>>,
    },
    /// `L A L'` with `A = diag(a)`.
    CovDiag {
        a: Vec<f64>,
        #[serde(default)]
        name: Option<String>,
    },
    /// `delta(X) = X` for a single observation, `S` for Wishart data.
    Identity,
}

fn squared() -> LossShape {
    LossShape::SquaredError
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Argument(msg()))
    }
}

impl EstimatorSpec {
    /// `CovDiag` with `A0` for the given Wishart degrees of freedom.
    pub fn cov_a0(m: usize, p: usize) -> Result<Self> {
        Ok(EstimatorSpec::CovDiag {
            a: a0(m, p)?,
            name: Some("A0".into()),
        })
    }

    /// Structural compatibility with a model, checked once before any
    /// replicate is evaluated.
    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        model.validate()?;
        let kind = model.kind;
        let scalar_location = kind == GroupKind::Location && model.p == 1;
        match self {
            EstimatorSpec::PitmanLocation { shape } => {
                require(scalar_location, || "pitman needs a scalar location family".into())?;
                require(shape.is_difference(), || format!("{shape:?} is not a location loss"))
            }
            EstimatorSpec::MreScale { shape, power } => {
                require(kind == GroupKind::Scale && model.p == 1, || {
                    "scale MRE needs a one-component scale family".into()
                })?;
                require(shape.is_ratio(), || format!("{shape:?} is not a scale loss"))?;
                require(*power != 0.0 && power.is_finite(), || "power must be nonzero".into())
            }
            EstimatorSpec::MreScaleProduct { shape, exponents } => {
                require(kind == GroupKind::Scale && exponents.len() == model.p, || {
                    "scale-product MRE needs one exponent per scale component".into()
                })?;
                require(shape.is_ratio(), || format!("{shape:?} is not a scale loss"))
            }
            EstimatorSpec::RestrictedFlatBayes { restriction, shape } => {
                require(scalar_location, || {
                    "restricted flat-prior Bayes needs a scalar location family".into()
                })?;
                require(*shape == LossShape::SquaredError, || {
                    "restricted flat-prior Bayes is the squared-error rule".into()
                })?;
                restriction.validate()?;
                location::location_bounds(restriction).map(|_| ())
            }
            EstimatorSpec::ConeFlatBayes { constraints } => {
                require(
                    kind == GroupKind::MultivariateLocation
                        && model.base == crate::models::BaseDensity::Normal
                        && constraints.nrows() == 1
                        && constraints.ncols() == model.p,
                    || "cone flat-prior Bayes needs normal multivariate data and one constraint row".into(),
                )
            }
            EstimatorSpec::Projected { base, restriction } => {
                base.validate(model)?;
                restriction.validate()?;
                require(
                    !matches!(restriction, Restriction::CovDet { .. } | Restriction::QuantileBox { .. } | Restriction::QuantileCone { .. })
                        && !matches!(restriction, Restriction::ScaleProduct { exponents, .. } if exponents.iter().any(|&r| r <= 0.0)),
                    || format!("cannot project decisions onto {restriction:?}"),
                )
            }
            EstimatorSpec::QuantileMre { .. } | EstimatorSpec::QuantileFamily { .. } => {
                require(kind == GroupKind::LocationScale && model.m >= 2, || {
                    "quantile rules need a location-scale family with m >= 2".into()
                })
            }
            EstimatorSpec::ScaleMultiple { c } => {
                require(kind == GroupKind::Scale && model.p == 1 && *c > 0.0, || {
                    "cT needs a one-component scale family and c > 0".into()
                })
            }
            EstimatorSpec::LinearMre { a, b } => {
                require(
                    kind == GroupKind::MultivariateLocation && model.m == 1 && a.len() == model.p,
                    || "linear rule needs one observation per location component".into(),
                )?;
                require(b.as_ref().is_none_or(|b| b.len() == a.len()), || {
                    "b must match a in length".into()
                })
            }
            EstimatorSpec::CovDiag { a, .. } => {
                require(kind == GroupKind::Wishart && a.len() == model.p, || {
                    "diagonal covariance rule needs Wishart data with p entries".into()
                })?;
                require(a.iter().all(|&v| v > 0.0 && v.is_finite()), || {
                    "diagonal entries must be positive".into()
                })
            }
            EstimatorSpec::Identity => require(kind == GroupKind::Wishart || model.m == 1, || {
                "identity rule needs one observation per replicate".into()
            }),
        }
    }

    /// `delta(x)` for one replicate.
    pub fn evaluate(&self, model: &ModelSpec, x: &DataPoint, quad: &QuadratureSpec) -> Result<Decision> {
        match self {
            EstimatorSpec::PitmanLocation { shape } => {
                let x = x.as_vector()?;
                let d = if *shape == LossShape::SquaredError {
                    pitman_location(model, x, quad)?
                } else {
                    pitman_location_general(model, *shape, x, quad)?
                };
                Ok(Decision::Scalar(d))
            }
            EstimatorSpec::MreScale { shape, power } => {
                mre_scale(model, *power, *shape, x.as_vector()?, quad).map(Decision::Scalar)
            }
            EstimatorSpec::MreScaleProduct { shape, exponents } => {
                mre_scale_product(model, exponents, *shape, x.as_vector()?, quad).map(Decision::Scalar)
            }
            EstimatorSpec::RestrictedFlatBayes { restriction, .. } => {
                restricted_flat_bayes(model, restriction, x.as_vector()?, quad).map(Decision::Scalar)
            }
            EstimatorSpec::ConeFlatBayes { constraints } => {
                let x = x.as_vector()?;
                let p = model.p;
                let mut mean = vec![0.0; p];
                for (k, v) in x.iter().enumerate() {
                    mean[k % p] += v / model.m as f64;
                }
                restricted_flat_bayes_cone(constraints, &mean, model.m).map(Decision::Vector)
            }
            EstimatorSpec::Projected { base, restriction } => {
                projected_estimate(base, restriction, model, x, quad)
            }
            EstimatorSpec::QuantileMre { eta } => quantile_mre(x.as_vector()?, *eta).map(Decision::Scalar),
            EstimatorSpec::QuantileFamily { eta, c } => {
                quantile_family(x.as_vector()?, *eta, *c).map(Decision::Scalar)
            }
            EstimatorSpec::ScaleMultiple { c } => {
                Ok(Decision::Scalar(c * x.as_vector()?.iter().sum::<f64>()))
            }
            EstimatorSpec::LinearMre { a, b } => {
                let x = x.as_vector()?;
                match b {
                    Some(b) => {
                        if b.len() != a.len() || x.len() != a.len() {
                            return Err(Error::Shape("a, b and x differ in length".into()));
                        }
                        Ok(Decision::Scalar(
                            a.iter().zip(b).zip(x).map(|((a, b), x)| a * (x - b)).sum(),
                        ))
                    }
                    None => linear_mre(&vec![model.base; a.len()], a, x).map(Decision::Scalar),
                }
            }
            EstimatorSpec::CovDiag { a, .. } => cov_equivariant(x.as_matrix()?, a).map(Decision::Matrix),
            EstimatorSpec::Identity => Ok(match x {
                DataPoint::Matrix(s) => Decision::Matrix(s.clone()),
                DataPoint::Vector(v) if v.len() == 1 => Decision::Scalar(v[0]),
                DataPoint::Vector(v) if v.len() == model.p => Decision::Vector(v.clone()),
                DataPoint::Vector(v) => {
                    return Err(Error::Shape(format!(
                        "identity rule got {} values for dimension {}",
                        v.len(),
                        model.p
                    )))
                }
            }),
        }
    }
}

fn decision_to_point(d: &Decision, ambient: Ambient) -> Result<ParameterPoint> {
    match ambient {
        Ambient::Location(_) => Ok(ParameterPoint::locations(d.as_vector()?)),
        Ambient::Scale(_) => Ok(ParameterPoint::scales(d.as_vector()?)),
        Ambient::Covariance(_) => Ok(ParameterPoint::covariance(d.as_matrix()?.clone())),
        Ambient::LocationScale => Err(Error::Argument(
            "decisions cannot be projected onto a location-scale set".into(),
        )),
    }
}

fn point_to_decision(p: ParameterPoint, like: &Decision, ambient: Ambient) -> Decision {
    let values = match ambient {
        Ambient::Location(_) => p.location,
        Ambient::Scale(_) => p.scale,
        _ => return Decision::Matrix(p.covariance.expect("covariance ambient")),
    };
    match like {
        Decision::Scalar(_) => Decision::Scalar(values[0]),
        _ => Decision::Vector(values),
    }
}

/// Evaluates `base` and projects its decision onto the restriction.
pub fn projected_estimate(
    base: &EstimatorSpec,
    restriction: &Restriction,
    model: &ModelSpec,
    x: &DataPoint,
    quad: &QuadratureSpec,
) -> Result<Decision> {
    let d = base.evaluate(model, x, quad)?;
    let ambient = restriction.ambient();
    let point = decision_to_point(&d, ambient)?;
    let projected = project(restriction, &point)?;
    Ok(point_to_decision(projected, &d, ambient))
}

#[cfg(test)]
mod tests;
