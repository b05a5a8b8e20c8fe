//! Restricted parameter spaces and the group-shift sequences that carry them
//! onto the full parameter space.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::models::{rows, Matrix, ParameterPoint};

/// Relative tolerance on constraint residuals for boundary membership.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Which scalar parameter a half-line bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinate {
    #[default]
    Location,
    Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Restriction {
    /// `[bound, inf)` for the chosen coordinate.
    HalfLineLower {
        bound: f64,
        #[serde(default)]
        parameter: Coordinate,
    },
    /// `(-inf, bound]` (or `(0, bound]` for a scale).
    HalfLineUpper {
        bound: f64,
        #[serde(default)]
        parameter: Coordinate,
    },
    /// `mu in [lower, upper]`, with `sigma > 0` free when the scale is unknown.
    Interval {
        lower: f64,
        upper: f64,
        #[serde(default)]
        scale_unknown: bool,
    },
    /// `{mu : C mu >= 0}` with `C` of full row rank.
    PolyhedralCone {
        #[serde(with = "rows")]
        constraints: Matrix,
    },
    /// `prod_i sigma_i^{r_i} >= bound`.
    ScaleProduct { exponents: Vec<f64>, bound: f64 },
    /// `{(mu, sigma) : mu + eta sigma >= 0}`.
    QuantileCone { eta: f64 },
    /// `{(mu, sigma) : mu >= lower, sigma >= scale_lower}`.
    QuantileBox { lower: f64, scale_lower: f64 },
    /// `{Sigma > 0 : |Sigma| >= bound}` in dimension `p`.
    CovDet { bound: f64, p: usize },
    /// `{Sigma > 0 : tr(Sigma) >= bound}` in dimension `p`.
    CovTrace { bound: f64, p: usize },
}

/// The full space a restriction lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ambient {
    Location(usize),
    Scale(usize),
    LocationScale,
    Covariance(usize),
}

impl Restriction {
    pub fn validate(&self) -> Result<()> {
        let arg = |m: String| Err(Error::Argument(m));
        match self {
            Restriction::HalfLineLower { bound, parameter }
            | Restriction::HalfLineUpper { bound, parameter } => {
                if !bound.is_finite() {
                    return arg("half-line bound must be finite".into());
                }
                if *parameter == Coordinate::Scale && *bound <= 0.0 {
                    return arg(format!("scale bound must be positive, got {bound}"));
                }
                Ok(())
            }
            Restriction::Interval { lower, upper, .. } => {
                if lower < upper && lower.is_finite() && upper.is_finite() {
                    Ok(())
                } else {
                    arg(format!("interval requires a < b, got [{lower}, {upper}]"))
                }
            }
            Restriction::PolyhedralCone { constraints } => check_cone(constraints),
            Restriction::ScaleProduct { exponents, bound } => {
                if exponents.is_empty() || !(*bound > 0.0) {
                    arg("scale product needs exponents and a positive bound".into())
                } else {
                    Ok(())
                }
            }
            Restriction::QuantileCone { eta } => {
                if eta.is_finite() {
                    Ok(())
                } else {
                    arg("eta must be finite".into())
                }
            }
            Restriction::QuantileBox { lower, scale_lower } => {
                if lower.is_finite() && *scale_lower >= 0.0 && scale_lower.is_finite() {
                    Ok(())
                } else {
                    arg("quantile box needs finite a and b >= 0".into())
                }
            }
            Restriction::CovDet { bound, p } | Restriction::CovTrace { bound, p } => {
                if *bound > 0.0 && *p >= 1 {
                    Ok(())
                } else {
                    arg("covariance restrictions need a positive bound and p >= 1".into())
                }
            }
        }
    }

    pub fn ambient(&self) -> Ambient {
        match self {
            Restriction::HalfLineLower { parameter, .. }
            | Restriction::HalfLineUpper { parameter, .. } => match parameter {
                Coordinate::Location => Ambient::Location(1),
                Coordinate::Scale => Ambient::Scale(1),
            },
            Restriction::Interval { scale_unknown, .. } => {
                if *scale_unknown {
                    Ambient::LocationScale
                } else {
                    Ambient::Location(1)
                }
            }
            Restriction::PolyhedralCone { constraints } => Ambient::Location(constraints.ncols()),
            Restriction::ScaleProduct { exponents, .. } => Ambient::Scale(exponents.len()),
            Restriction::QuantileCone { .. } | Restriction::QuantileBox { .. } => {
                Ambient::LocationScale
            }
            Restriction::CovDet { p, .. } | Restriction::CovTrace { p, .. } => Ambient::Covariance(*p),
        }
    }

    /// Checks that `theta` has the restriction's ambient shape.
    pub fn check_shape(&self, theta: &ParameterPoint) -> Result<()> {
        let ok = match self.ambient() {
            Ambient::Location(p) => theta.location.len() == p,
            Ambient::Scale(p) => theta.scale.len() == p,
            Ambient::LocationScale => theta.location.len() == 1 && theta.scale.len() == 1,
            Ambient::Covariance(p) => theta
                .covariance
                .as_ref()
                .is_some_and(|c| c.nrows() == p && c.ncols() == p),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "parameter {theta:?} does not match the ambient space of {self:?}"
            )))
        }
    }

    /// Membership; boundary points are inside.
    pub fn contains(&self, theta: &ParameterPoint) -> Result<bool> {
        self.check_shape(theta)?;
        let tol = |x: f64| BOUNDARY_TOL * (1.0 + x.abs());
        Ok(match self {
            Restriction::HalfLineLower { bound, parameter } => {
                let v = coordinate(theta, *parameter);
                v >= bound - tol(*bound)
            }
            Restriction::HalfLineUpper { bound, parameter } => {
                let v = coordinate(theta, *parameter);
                v <= bound + tol(*bound) && (*parameter == Coordinate::Location || v > 0.0)
            }
            Restriction::Interval {
                lower,
                upper,
                scale_unknown,
            } => {
                let mu = theta.location[0];
                mu >= lower - tol(*lower)
                    && mu <= upper + tol(*upper)
                    && (!scale_unknown || theta.scale[0] > 0.0)
            }
            Restriction::PolyhedralCone { constraints } => {
                let mu = DVector::from_column_slice(&theta.location);
                let scale = mu.amax();
                (constraints * &mu).iter().all(|&r| r >= -tol(scale))
            }
            Restriction::ScaleProduct { exponents, bound } => {
                theta.scale.iter().all(|&s| s > 0.0)
                    && scale_product(exponents, &theta.scale) >= bound * (1.0 - BOUNDARY_TOL)
            }
            Restriction::QuantileCone { eta } => {
                let (mu, sigma) = (theta.location[0], theta.scale[0]);
                sigma >= 0.0 && mu + eta * sigma >= -tol(mu.abs() + (eta * sigma).abs())
            }
            Restriction::QuantileBox { lower, scale_lower } => {
                let (mu, sigma) = (theta.location[0], theta.scale[0]);
                mu >= lower - tol(*lower) && sigma >= scale_lower - tol(*scale_lower) && sigma >= 0.0
            }
            Restriction::CovDet { bound, .. } => {
                let c = theta.covariance.as_ref().expect("shape checked");
                c.clone().cholesky().is_some() && c.determinant() >= bound * (1.0 - BOUNDARY_TOL)
            }
            Restriction::CovTrace { bound, .. } => {
                let c = theta.covariance.as_ref().expect("shape checked");
                c.clone().cholesky().is_some() && c.trace() >= bound * (1.0 - BOUNDARY_TOL)
            }
        })
    }
}

pub(crate) fn coordinate(theta: &ParameterPoint, c: Coordinate) -> f64 {
    match c {
        Coordinate::Location => theta.location[0],
        Coordinate::Scale => theta.scale[0],
    }
}

pub(crate) fn scale_product(exponents: &[f64], scale: &[f64]) -> f64 {
    exponents
        .iter()
        .zip(scale)
        .map(|(r, s)| s.powf(*r))
        .product()
}

fn check_cone(c: &Matrix) -> Result<()> {
    let (q, p) = c.shape();
    if q == 0 || q > p {
        return Err(Error::Argument(format!(
            "cone constraint matrix must be q x p with 1 <= q <= p, got {q} x {p}"
        )));
    }
    let sv = c.clone().singular_values();
    let largest = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * largest).count();
    if rank < q {
        return Err(Error::Argument(format!(
            "cone constraint matrix has rank {rank} < {q}"
        )));
    }
    Ok(())
}

/// Named polyhedral cones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConeKind {
    /// `mu_i >= 0` for every coordinate.
    Orthant,
    /// `mu_1 <= ... <= mu_r` (all coordinates when `r` is absent).
    SimpleOrder {
        #[serde(default)]
        r: Option<usize>,
    },
    /// `mu_1 <= mu_i` for every `i`.
    TreeOrder,
    /// `mu_1 <= ... <= mu_peak >= ... >= mu_p` (1-based peak).
    Umbrella { peak: usize },
}

/// Builds the full-row-rank constraint matrix of a named cone.
pub fn make_cone(kind: ConeKind, p: usize) -> Result<Restriction> {
    if p < 2 {
        return Err(Error::Argument(format!("cones need p >= 2, got {p}")));
    }
    let mut rows_: Vec<Vec<f64>> = Vec::new();
    let unit_diff = |lo: usize, hi: usize| {
        // row encoding mu_hi - mu_lo >= 0
        let mut r = vec![0.0; p];
        r[lo] = -1.0;
        r[hi] = 1.0;
        r
    };
    match kind {
        ConeKind::Orthant => {
            for i in 0..p {
                let mut r = vec![0.0; p];
                r[i] = 1.0;
                rows_.push(r);
            }
        }
        ConeKind::SimpleOrder { r } => {
            let r = r.unwrap_or(p);
            if r < 2 || r > p {
                return Err(Error::Argument(format!("simple order needs 2 <= r <= p, got r = {r}")));
            }
            for i in 0..r - 1 {
                rows_.push(unit_diff(i, i + 1));
            }
        }
        ConeKind::TreeOrder => {
            for i in 1..p {
                rows_.push(unit_diff(0, i));
            }
        }
        ConeKind::Umbrella { peak } => {
            if peak < 1 || peak > p {
                return Err(Error::Argument(format!("umbrella peak must be in 1..={p}, got {peak}")));
            }
            let m = peak - 1;
            for i in 0..m {
                rows_.push(unit_diff(i, i + 1));
            }
            for i in m..p - 1 {
                rows_.push(unit_diff(i + 1, i));
            }
        }
    }
    let constraints = rows::from_rows(&rows_).map_err(Error::Argument)?;
    let cone = Restriction::PolyhedralCone { constraints };
    cone.validate()?;
    Ok(cone)
}

/// Minimum-norm solution of `C g = -n 1`.
pub(crate) fn cone_shift(c: &Matrix, n: f64) -> Result<Vec<f64>> {
    let q = c.nrows();
    let gram = c * c.transpose();
    let y = gram
        .cholesky()
        .ok_or_else(|| Error::Argument("cone constraint matrix is rank deficient".into()))?
        .solve(&DVector::from_element(q, -n));
    Ok((c.transpose() * y).iter().copied().collect())
}

/// The `n`-th element of the shift sequence carrying the restriction out to
/// the full space.
pub fn shift_element(restriction: &Restriction, n: usize) -> Result<GroupElement> {
    if n == 0 {
        return Err(Error::Argument("shift index n must be >= 1".into()));
    }
    restriction.validate()?;
    let nf = n as f64;
    Ok(match restriction {
        Restriction::HalfLineLower { parameter, .. } => match parameter {
            Coordinate::Location => GroupElement::shift(-nf),
            Coordinate::Scale => GroupElement::scale(1.0 / nf),
        },
        Restriction::HalfLineUpper { parameter, .. } => match parameter {
            Coordinate::Location => GroupElement::shift(nf),
            Coordinate::Scale => GroupElement::scale(nf),
        },
        Restriction::Interval {
            lower,
            upper,
            scale_unknown,
        } => {
            if *scale_unknown {
                GroupElement::ShiftScale {
                    shift: -nf * (lower + upper) / 2.0,
                    scale: nf,
                }
            } else {
                GroupElement::shift(-nf)
            }
        }
        Restriction::PolyhedralCone { constraints } => {
            GroupElement::Shift(cone_shift(constraints, nf)?)
        }
        Restriction::ScaleProduct { exponents, .. } => {
            if exponents.iter().any(|&r| r == 0.0) {
                return Err(Error::Argument(
                    "scale-product shift is undefined when an exponent is zero".into(),
                ));
            }
            GroupElement::Scale(exponents.iter().map(|r| nf.powf(-1.0 / r)).collect())
        }
        Restriction::QuantileCone { .. } | Restriction::QuantileBox { .. } => {
            GroupElement::ShiftScale {
                shift: -nf,
                scale: 1.0 / nf,
            }
        }
        Restriction::CovDet { .. } | Restriction::CovTrace { .. } => {
            GroupElement::MatrixScale(1.0 / nf)
        }
    })
}
