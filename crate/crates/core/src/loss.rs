//! Estimands and invariant loss functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{rows, Matrix, ParameterPoint};

/// Bowl-shaped profile applied to the standardized discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossShape {
    /// `z^2`
    SquaredError,
    /// `(z - 1)^2`
    ScaleInvariantSquared,
    /// `z - ln z - 1`
    Entropy,
    /// `|z|`
    Absolute,
    /// `z^4`
    Quartic,
    /// `tr(y) - ln|y| - p`
    Stein,
    /// `tr((y - I)^2)`
    SquaredIdentity,
}

impl LossShape {
    pub const ALL: [LossShape; 7] = [
        LossShape::SquaredError,
        LossShape::ScaleInvariantSquared,
        LossShape::Entropy,
        LossShape::Absolute,
        LossShape::Quartic,
        LossShape::Stein,
        LossShape::SquaredIdentity,
    ];

    /// Shapes acting on a signed difference (minimum at 0).
    pub fn is_difference(self) -> bool {
        matches!(
            self,
            LossShape::SquaredError | LossShape::Absolute | LossShape::Quartic
        )
    }

    /// Shapes acting on a positive ratio (minimum at 1).
    pub fn is_ratio(self) -> bool {
        matches!(self, LossShape::ScaleInvariantSquared | LossShape::Entropy)
    }

    pub fn is_matrix(self) -> bool {
        matches!(self, LossShape::Stein | LossShape::SquaredIdentity)
    }

    /// `rho(z)` for scalar shapes.
    pub fn rho(self, z: f64) -> Result<f64> {
        match self {
            LossShape::SquaredError => Ok(z * z),
            LossShape::Absolute => Ok(z.abs()),
            LossShape::Quartic => Ok(z.powi(4)),
            LossShape::ScaleInvariantSquared => Ok((z - 1.0) * (z - 1.0)),
            LossShape::Entropy => {
                if z > 0.0 {
                    Ok(z - z.ln() - 1.0)
                } else {
                    Err(Error::LossDomain(format!(
                        "entropy loss needs a positive ratio, got {z}"
                    )))
                }
            }
            LossShape::Stein | LossShape::SquaredIdentity => Err(Error::LossDomain(format!(
                "{self:?} is a matrix loss"
            ))),
        }
    }

    /// `psi(y)` for matrix shapes.
    pub fn psi(self, y: &Matrix) -> Result<f64> {
        let p = y.nrows();
        match self {
            LossShape::Stein => {
                let det = y.determinant();
                if !(det > 0.0) {
                    return Err(Error::LossDomain(format!(
                        "Stein loss needs det(y) > 0, got {det}"
                    )));
                }
                Ok(y.trace() - det.ln() - p as f64)
            }
            LossShape::SquaredIdentity => {
                let d = y - Matrix::identity(p, p);
                Ok((&d * &d).trace())
            }
            _ => Err(Error::LossDomain(format!("{self:?} is a scalar loss"))),
        }
    }
}

/// Quantity being estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Estimand {
    /// The location vector (a scalar in one dimension); vector losses use
    /// the Euclidean norm of `d - mu`.
    Location,
    /// `sigma^power` of a single scale parameter.
    ScalePower { power: f64 },
    /// `a' mu`.
    LinearCombination { a: Vec<f64> },
    /// `prod_i sigma_i^{r_i}`.
    ScaleProduct { exponents: Vec<f64> },
    /// `mu + eta sigma`, measured in units of `sigma`.
    Quantile { eta: f64 },
    /// The covariance matrix, through `psi(Sigma^{-1} delta)`.
    Covariance,
}

impl Estimand {
    /// Value of the estimand at `theta`, for scalar estimands.
    pub fn scalar_value(&self, theta: &ParameterPoint) -> Result<f64> {
        match self {
            Estimand::Location if theta.location.len() == 1 => Ok(theta.location[0]),
            Estimand::ScalePower { power } => Ok(theta.sigma().powf(*power)),
            Estimand::LinearCombination { a } => {
                check_len(a.len(), theta.location.len(), "linear combination")?;
                Ok(a.iter().zip(&theta.location).map(|(a, m)| a * m).sum())
            }
            Estimand::ScaleProduct { exponents } => {
                check_len(exponents.len(), theta.scale.len(), "scale product")?;
                Ok(exponents
                    .iter()
                    .zip(&theta.scale)
                    .map(|(r, s)| s.powf(*r))
                    .product())
            }
            Estimand::Quantile { eta } => Ok(theta.mu() + eta * theta.sigma()),
            _ => Err(Error::Shape(format!("{self:?} is not a scalar estimand here"))),
        }
    }
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what}: length {a} vs parameter length {b}")))
    }
}

/// Estimand plus loss profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub estimand: Estimand,
    pub shape: LossShape,
}

impl LossSpec {
    pub fn new(estimand: Estimand, shape: LossShape) -> Self {
        Self { estimand, shape }
    }

    pub fn squared_error() -> Self {
        Self::new(Estimand::Location, LossShape::SquaredError)
    }
}

/// A value of the decision space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(#[serde(with = "rows")] Matrix),
}

impl Decision {
    pub fn as_scalar(&self) -> Result<f64> {
        match self {
            Decision::Scalar(d) => Ok(*d),
            Decision::Vector(v) if v.len() == 1 => Ok(v[0]),
            other => Err(Error::Shape(format!("expected a scalar decision, got {other:?}"))),
        }
    }

    pub fn as_vector(&self) -> Result<Vec<f64>> {
        match self {
            Decision::Scalar(d) => Ok(vec![*d]),
            Decision::Vector(v) => Ok(v.clone()),
            Decision::Matrix(_) => Err(Error::Shape("expected a vector decision".into())),
        }
    }

    pub fn as_matrix(&self) -> Result<&Matrix> {
        match self {
            Decision::Matrix(m) => Ok(m),
            other => Err(Error::Shape(format!("expected a matrix decision, got {other:?}"))),
        }
    }
}

/// `L(theta, d)`.
pub fn loss_value(loss: &LossSpec, theta: &ParameterPoint, d: &Decision) -> Result<f64> {
    let shape = loss.shape;
    match &loss.estimand {
        Estimand::Location => {
            require(shape.is_difference(), shape, "location")?;
            let dv = d.as_vector()?;
            check_len(dv.len(), theta.location.len(), "location decision")?;
            if dv.len() == 1 {
                shape.rho(dv[0] - theta.location[0])
            } else {
                let norm = dv
                    .iter()
                    .zip(&theta.location)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                shape.rho(norm)
            }
        }
        Estimand::LinearCombination { .. } => {
            require(shape.is_difference(), shape, "linear combination")?;
            shape.rho(d.as_scalar()? - loss.estimand.scalar_value(theta)?)
        }
        Estimand::ScalePower { .. } | Estimand::ScaleProduct { .. } => {
            require(shape.is_ratio(), shape, "scale")?;
            shape.rho(d.as_scalar()? / loss.estimand.scalar_value(theta)?)
        }
        Estimand::Quantile { eta } => {
            require(shape.is_difference(), shape, "quantile")?;
            let sigma = theta.sigma();
            shape.rho((d.as_scalar()? - theta.mu() - eta * sigma) / sigma)
        }
        Estimand::Covariance => {
            require(shape.is_matrix(), shape, "covariance")?;
            let sigma = theta
                .covariance
                .as_ref()
                .ok_or_else(|| Error::Shape("covariance loss needs Sigma".into()))?;
            let delta = d.as_matrix()?;
            if delta.shape() != sigma.shape() {
                return Err(Error::Shape("decision and Sigma differ in shape".into()));
            }
            let chol = sigma.clone().cholesky().ok_or_else(|| {
                Error::ParameterDomain("Sigma is not invertible".into())
            })?;
            shape.psi(&chol.solve(delta))
        }
    }
}

fn require(ok: bool, shape: LossShape, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::LossDomain(format!(
            "{shape:?} is not defined for a {what} estimand"
        )))
    }
}
