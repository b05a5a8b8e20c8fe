//! Group elements and their actions on data (`g`), parameters (`g bar`) and
//! decisions (`g*`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{Decision, Estimand};
use crate::models::{DataPoint, ParameterPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum GroupElement {
    /// Additive shift of a location vector.
    Shift(Vec<f64>),
    /// Componentwise multiplication by positive factors.
    Scale(Vec<f64>),
    /// Affine map `x -> scale * x + shift`.
    ShiftScale { shift: f64, scale: f64 },
    /// `Sigma -> lambda Sigma` (data vectors scale by `sqrt(lambda)`).
    MatrixScale(f64),
}

fn mismatch(g: &GroupElement, what: &str) -> Error {
    Error::Argument(format!("{g:?} cannot act on {what}"))
}

impl GroupElement {
    pub fn shift(c: f64) -> Self {
        GroupElement::Shift(vec![c])
    }

    pub fn scale(s: f64) -> Self {
        GroupElement::Scale(vec![s])
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let ok = match self {
            GroupElement::Shift(v) => v.iter().all(|x| x.is_finite()),
            GroupElement::Scale(v) => v.iter().all(|&x| positive(x)),
            GroupElement::ShiftScale { shift, scale } => shift.is_finite() && positive(*scale),
            GroupElement::MatrixScale(l) => positive(*l),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid group element {self:?}")))
        }
    }

    pub fn inverse(&self) -> Self {
        match self {
            GroupElement::Shift(v) => GroupElement::Shift(v.iter().map(|x| -x).collect()),
            GroupElement::Scale(v) => GroupElement::Scale(v.iter().map(|x| 1.0 / x).collect()),
            GroupElement::ShiftScale { shift, scale } => GroupElement::ShiftScale {
                shift: -shift / scale,
                scale: 1.0 / scale,
            },
            GroupElement::MatrixScale(l) => GroupElement::MatrixScale(1.0 / l),
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        use GroupElement::*;
        match (self, other) {
            (Shift(a), Shift(b)) if a.len() == b.len() => {
                Ok(Shift(a.iter().zip(b).map(|(x, y)| x + y).collect()))
            }
            (Scale(a), Scale(b)) if a.len() == b.len() => {
                Ok(Scale(a.iter().zip(b).map(|(x, y)| x * y).collect()))
            }
            (
                ShiftScale { shift: c1, scale: s1 },
                ShiftScale { shift: c2, scale: s2 },
            ) => Ok(ShiftScale {
                shift: s1 * c2 + c1,
                scale: s1 * s2,
            }),
            (MatrixScale(a), MatrixScale(b)) => Ok(MatrixScale(a * b)),
            _ => Err(Error::Argument(format!("cannot compose {self:?} with {other:?}"))),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            GroupElement::Shift(v) => v.iter().all(|&x| x == 0.0),
            GroupElement::Scale(v) => v.iter().all(|&x| x == 1.0),
            GroupElement::ShiftScale { shift, scale } => *shift == 0.0 && *scale == 1.0,
            GroupElement::MatrixScale(l) => *l == 1.0,
        }
    }

    /// `g bar theta`.
    pub fn act_parameter(&self, theta: &ParameterPoint) -> Result<ParameterPoint> {
        let mut out = theta.clone();
        match self {
            GroupElement::Shift(v) => {
                if v.len() != theta.location.len() {
                    return Err(mismatch(self, "a parameter of this location dimension"));
                }
                for (m, c) in out.location.iter_mut().zip(v) {
                    *m += c;
                }
            }
            GroupElement::Scale(v) => {
                if v.len() != theta.scale.len() || !theta.location.is_empty() {
                    return Err(mismatch(self, "this parameter"));
                }
                for (s, f) in out.scale.iter_mut().zip(v) {
                    *s *= f;
                }
            }
            GroupElement::ShiftScale { shift, scale } => {
                if theta.location.len() != 1 || theta.scale.len() != 1 {
                    return Err(mismatch(self, "a parameter without (mu, sigma)"));
                }
                out.location[0] = scale * theta.location[0] + shift;
                out.scale[0] = scale * theta.scale[0];
            }
            GroupElement::MatrixScale(l) => {
                let sigma = theta
                    .covariance
                    .as_ref()
                    .ok_or_else(|| mismatch(self, "a parameter without covariance"))?;
                out.covariance = Some(sigma * *l);
            }
        }
        Ok(out)
    }

    /// `g x` for one replicate.
    pub fn act_data(&self, x: &DataPoint) -> Result<DataPoint> {
        match (self, x) {
            (GroupElement::Shift(v), DataPoint::Vector(xs)) => {
                if v.is_empty() || xs.len() % v.len() != 0 {
                    return Err(mismatch(self, "data of this width"));
                }
                let p = v.len();
                Ok(DataPoint::Vector(
                    xs.iter().enumerate().map(|(k, x)| x + v[k % p]).collect(),
                ))
            }
            (GroupElement::Scale(v), DataPoint::Vector(xs)) => {
                if v.is_empty() || xs.len() % v.len() != 0 {
                    return Err(mismatch(self, "data of this width"));
                }
                let p = v.len();
                Ok(DataPoint::Vector(
                    xs.iter().enumerate().map(|(k, x)| x * v[k % p]).collect(),
                ))
            }
            (GroupElement::ShiftScale { shift, scale }, DataPoint::Vector(xs)) => Ok(
                DataPoint::Vector(xs.iter().map(|x| scale * x + shift).collect()),
            ),
            (GroupElement::MatrixScale(l), DataPoint::Matrix(s)) => Ok(DataPoint::Matrix(s * *l)),
            _ => Err(mismatch(self, "this data point")),
        }
    }

    /// `g* d` for a decision about `estimand`.
    pub fn act_decision(&self, d: &Decision, estimand: &Estimand) -> Result<Decision> {
        use GroupElement::*;
        match (estimand, self) {
            (Estimand::Location, Shift(v)) => {
                let dv = d.as_vector()?;
                if dv.len() != v.len() {
                    return Err(mismatch(self, "a decision of this dimension"));
                }
                let out: Vec<f64> = dv.iter().zip(v).map(|(a, b)| a + b).collect();
                Ok(if matches!(d, Decision::Scalar(_)) {
                    Decision::Scalar(out[0])
                } else {
                    Decision::Vector(out)
                })
            }
            (Estimand::Location | Estimand::Quantile { .. }, ShiftScale { shift, scale }) => {
                Ok(Decision::Scalar(scale * d.as_scalar()? + shift))
            }
            (Estimand::Quantile { .. }, Shift(v)) if v.len() == 1 => {
                Ok(Decision::Scalar(d.as_scalar()? + v[0]))
            }
            (Estimand::LinearCombination { a }, Shift(v)) if a.len() == v.len() => {
                let ac: f64 = a.iter().zip(v).map(|(a, c)| a * c).sum();
                Ok(Decision::Scalar(d.as_scalar()? + ac))
            }
            (Estimand::ScalePower { power }, Scale(v)) if v.len() == 1 => {
                Ok(Decision::Scalar(d.as_scalar()? * v[0].powf(*power)))
            }
            (Estimand::ScalePower { power }, ShiftScale { scale, .. }) => {
                Ok(Decision::Scalar(d.as_scalar()? * scale.powf(*power)))
            }
            (Estimand::ScaleProduct { exponents }, Scale(v)) if exponents.len() == v.len() => {
                let f: f64 = v.iter().zip(exponents).map(|(s, r)| s.powf(*r)).product();
                Ok(Decision::Scalar(d.as_scalar()? * f))
            }
            (Estimand::Covariance, MatrixScale(l)) => Ok(Decision::Matrix(d.as_matrix()? * *l)),
            _ => Err(mismatch(self, "decisions about this estimand")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_examples() {
        let th = GroupElement::shift(3.0)
            .act_parameter(&ParameterPoint::location(1.0))
            .unwrap();
        assert_eq!(th.location, vec![4.0]);
        let d = GroupElement::scale(2.0)
            .act_decision(&Decision::Scalar(5.0), &Estimand::ScalePower { power: 1.0 })
            .unwrap();
        assert_eq!(d, Decision::Scalar(10.0));
        let x = GroupElement::ShiftScale {
            shift: -1.0,
            scale: 2.0,
        }
        .act_data(&DataPoint::Vector(vec![4.0]))
        .unwrap();
        assert_eq!(x, DataPoint::Vector(vec![7.0]));
    }

    #[test]
    fn variant_mismatch_is_argument_error() {
        let err = GroupElement::MatrixScale(2.0).act_data(&DataPoint::Vector(vec![1.0]));
        assert!(matches!(err, Err(Error::Argument(_))));
        let err = GroupElement::scale(2.0).act_parameter(&ParameterPoint::location(1.0));
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn composition_with_inverse_is_identity() {
        let g = GroupElement::ShiftScale {
            shift: -3.5,
            scale: 0.7,
        };
        let e = g.compose(&g.inverse()).unwrap();
        let GroupElement::ShiftScale { shift, scale } = e else { panic!() };
        assert!(shift.abs() < 1e-12 && (scale - 1.0).abs() < 1e-12);
    }
}
