//! Generalized Bayes rules for scale families under the prior `1/sigma`.

use super::posterior::inverse_scale_posterior;
use crate::error::{Error, Result};
use crate::loss::LossShape;
use crate::models::{GroupKind, ModelSpec};
use crate::quadrature::QuadratureSpec;

/// `ln E[u^k]` for each `k`, where `u = 1/sigma` follows the posterior of one
/// scale component. Data are rescaled by `max |x_i|` so the window search
/// always starts near the posterior mode; the rescaling is undone exactly.
fn log_inverse_moments(
    model: &ModelSpec,
    x: &[f64],
    powers: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let s = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("scale data must be nonzero and finite, got {x:?}")));
    }
    let scaled: Vec<f64> = x.iter().map(|v| v / s).collect();
    let post = inverse_scale_posterior(model.base, &scaled)?;
    let hs: Vec<Box<dyn Fn(f64) -> f64>> = powers
        .iter()
        .map(|&k| Box::new(move |u: f64| u.powf(k)) as Box<dyn Fn(f64) -> f64>)
        .collect();
    let refs: Vec<&dyn Fn(f64) -> f64> = hs.iter().map(|h| h.as_ref()).collect();
    let e = post.expectations(&refs, quad)?;
    powers
        .iter()
        .zip(e)
        .map(|(&k, v)| {
            if v > 0.0 && v.is_finite() {
                Ok(v.ln() - k * s.ln())
            } else {
                Err(Error::Domain(format!("posterior moment E[sigma^-{k}] is not finite")))
            }
        })
        .collect()
}

/// Generalized Bayes estimate of `tau = prod sigma_j^{r_j}` for a scale
/// family with independent components. The posterior factorizes, so
/// `E[tau^-k | x]` is a product of per-component moments.
///
/// For `(z - 1)^2` the rule is `E[tau^-1] / E[tau^-2]`; for entropy loss it
/// is `1 / E[tau^-1]`.
pub fn mre_scale_product(
    model: &ModelSpec,
    exponents: &[f64],
    shape: LossShape,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    if model.kind != GroupKind::Scale {
        return Err(Error::Argument(format!("expected a scale family, got {:?}", model.kind)));
    }
    if exponents.len() != model.p {
        return Err(Error::Shape(format!(
            "{} exponents for {} scale components",
            exponents.len(),
            model.p
        )));
    }
    if x.len() != model.m * model.p {
        return Err(Error::Shape(format!(
            "replicate has {} values, expected {}",
            x.len(),
            model.m * model.p
        )));
    }
    let (mut ln_first, mut ln_second) = (0.0, 0.0);
    for (j, &r) in exponents.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        let column: Vec<f64> = x.iter().skip(j).step_by(model.p).copied().collect();
        let powers = match shape {
            LossShape::ScaleInvariantSquared => vec![r, 2.0 * r],
            LossShape::Entropy => vec![r],
            other => {
                return Err(Error::LossDomain(format!("{other:?} is not a scale loss shape")))
            }
        };
        let lm = log_inverse_moments(model, &column, &powers, quad)?;
        ln_first += lm[0];
        if let Some(second) = lm.get(1) {
            ln_second += second;
        }
    }
    Ok(match shape {
        LossShape::ScaleInvariantSquared => (ln_first - ln_second).exp(),
        _ => (-ln_first).exp(),
    })
}

/// Generalized Bayes estimate of `sigma^power` for a one-component scale
/// family.
pub fn mre_scale(
    model: &ModelSpec,
    power: f64,
    shape: LossShape,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    if model.p != 1 {
        return Err(Error::Shape("mre_scale needs a single scale component".into()));
    }
    mre_scale_product(model, &[power], shape, x, quad)
}
