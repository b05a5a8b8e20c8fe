//! Location rules: the Pitman estimator and flat-prior Bayes rules on
//! restricted sets.

use nalgebra::DVector;

use super::posterior::location_posterior;
use crate::error::{Error, Result};
use crate::loss::LossShape;
use crate::models::{BaseDensity, GroupKind, Matrix, ModelSpec};
use crate::quadrature::QuadratureSpec;
use crate::restriction::{Coordinate, Restriction};
use crate::special::{inverse_mills, normal_cdf, truncated_normal_mean, LN_SQRT_2PI};

/// Smallest admissible ratio of truncated to untruncated posterior mass.
pub const MIN_POSTERIOR_MASS: f64 = 1e-300;

fn require_scalar_location(model: &ModelSpec) -> Result<()> {
    if model.kind != GroupKind::Location || model.p != 1 {
        return Err(Error::Argument(format!(
            "expected a scalar location family, got {:?} with p = {}",
            model.kind, model.p
        )));
    }
    Ok(())
}

/// Posterior mean of `theta` under the flat prior.
pub fn pitman_location(model: &ModelSpec, x: &[f64], quad: &QuadratureSpec) -> Result<f64> {
    require_scalar_location(model)?;
    let post = location_posterior(model.base, x, f64::NEG_INFINITY, f64::INFINITY)?;
    let c = 0.5 * (post.lo + post.hi);
    let e = post.expectations(&[&|t| t - c], quad)?;
    Ok(c + e[0])
}

/// Subgradient of a convex difference shape.
fn shape_slope(shape: LossShape) -> Result<fn(f64) -> f64> {
    match shape {
        LossShape::SquaredError => Ok(|z| 2.0 * z),
        LossShape::Absolute => Ok(|z: f64| if z == 0.0 { 0.0 } else { z.signum() }),
        LossShape::Quartic => Ok(|z| 4.0 * z * z * z),
        other => Err(Error::LossDomain(format!(
            "{other:?} is not a location loss shape"
        ))),
    }
}

/// Minimizer of the flat-prior posterior expected loss `E[rho(d - theta)]`,
/// located to `1e-8` by bisection on its (monotone) derivative.
pub fn pitman_location_general(
    model: &ModelSpec,
    shape: LossShape,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    require_scalar_location(model)?;
    let slope = shape_slope(shape)?;
    let post = location_posterior(model.base, x, f64::NEG_INFINITY, f64::INFINITY)?;
    post.solve_first_order(&slope, 1e-8, quad)
}

/// `(lower, upper)` of a one-dimensional location restriction.
pub(crate) fn location_bounds(restriction: &Restriction) -> Result<(f64, f64)> {
    match *restriction {
        Restriction::HalfLineLower {
            bound,
            parameter: Coordinate::Location,
        } => Ok((bound, f64::INFINITY)),
        Restriction::HalfLineUpper {
            bound,
            parameter: Coordinate::Location,
        } => Ok((f64::NEG_INFINITY, bound)),
        Restriction::Interval { lower, upper, .. } => Ok((lower, upper)),
        ref other => Err(Error::Argument(format!(
            "flat-prior Bayes rule needs a half-line or interval on the location, got {other:?}"
        ))),
    }
}

/// `ln Phi(z)`, accurate far into the lower tail.
fn ln_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        normal_cdf(z).ln()
    } else {
        -0.5 * z * z - LN_SQRT_2PI - inverse_mills(z).ln()
    }
}

/// `ln P(a <= Z <= b)` for a standard normal `Z`.
fn ln_normal_mass(a: f64, b: f64) -> f64 {
    if b == f64::INFINITY {
        ln_normal_cdf(-a)
    } else if a == f64::NEG_INFINITY {
        ln_normal_cdf(b)
    } else if a > 0.0 {
        (normal_cdf(-a) - normal_cdf(-b)).ln()
    } else if b < 0.0 {
        (normal_cdf(b) - normal_cdf(a)).ln()
    } else {
        (1.0 - normal_cdf(a) - normal_cdf(-b)).ln()
    }
}

/// Posterior mean of `theta` under the flat prior restricted to a half-line
/// or interval. Normal data use the closed-form truncated normal mean, other
/// base densities use quadrature.
pub fn restricted_flat_bayes(
    model: &ModelSpec,
    restriction: &Restriction,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    require_scalar_location(model)?;
    restriction.validate()?;
    let (lower, upper) = location_bounds(restriction)?;
    if model.base == BaseDensity::Normal {
        let m = x.len() as f64;
        let mean = x.iter().sum::<f64>() / m;
        let sd = m.sqrt().recip();
        let (a, b) = ((lower - mean) / sd, (upper - mean) / sd);
        let ln_mass = ln_normal_mass(a, b);
        if !(ln_mass >= MIN_POSTERIOR_MASS.ln()) {
            return Err(underflow(ln_mass, x));
        }
        return Ok(mean + sd * truncated_normal_mean(0.0, a, b));
    }
    let full = location_posterior(model.base, x, f64::NEG_INFINITY, f64::INFINITY)?;
    let cut = location_posterior(model.base, x, lower, upper).map_err(|e| match e {
        Error::Domain(_) => underflow(f64::NEG_INFINITY, x),
        other => other,
    })?;
    let ln_mass = cut.log_mass(quad)? - full.log_mass(quad)?;
    if !(ln_mass >= MIN_POSTERIOR_MASS.ln()) {
        return Err(underflow(ln_mass, x));
    }
    let c = 0.5 * (cut.lo + cut.hi);
    let e = cut.expectations(&[&|t| t - c], quad)?;
    Ok((c + e[0]).clamp(lower, upper))
}

fn underflow(ln_mass: f64, x: &[f64]) -> Error {
    Error::Underflow(format!(
        "posterior mass on the restricted set is exp({ln_mass:.1}) of the total for data {x:?}"
    ))
}

/// Posterior mean of a normal location vector under the flat prior on the
/// half-space `{c' mu >= 0}` (one-row cone). For the bivariate simple order
/// this is the rotated-coordinate rule: the component along `c` is a
/// truncated normal and the orthogonal part is untouched.
pub fn restricted_flat_bayes_cone(
    constraints: &Matrix,
    mean: &[f64],
    observations: usize,
) -> Result<Vec<f64>> {
    if constraints.nrows() != 1 {
        return Err(Error::Argument(format!(
            "flat-prior cone rule supports a single half-space constraint, got {} rows",
            constraints.nrows()
        )));
    }
    if constraints.ncols() != mean.len() {
        return Err(Error::Shape("constraint width differs from data dimension".into()));
    }
    let c = DVector::from_iterator(mean.len(), constraints.row(0).iter().copied());
    let norm = c.norm();
    let unit = c / norm;
    let x = DVector::from_column_slice(mean);
    let sd = (observations as f64).sqrt().recip();
    let z = unit.dot(&x) / sd;
    if ln_normal_cdf(z) < MIN_POSTERIOR_MASS.ln() {
        return Err(underflow(ln_normal_cdf(z), mean));
    }
    let shift = sd * inverse_mills(z);
    Ok((x + unit * shift).iter().copied().collect())
}
