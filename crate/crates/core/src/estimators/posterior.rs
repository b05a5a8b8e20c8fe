//! One-dimensional generalized-Bayes posteriors evaluated by quadrature.

use crate::error::{Error, Result};
use crate::models::BaseDensity;
use crate::quadrature::{log_window, try_integrate, try_integrate_with_breaks, QuadratureSpec};

/// Unnormalized log posterior on an interval, with a mass window.
pub(crate) struct Posterior<F: Fn(f64) -> f64> {
    logf: F,
    pub lo: f64,
    pub hi: f64,
    peak: f64,
}

impl<F: Fn(f64) -> f64> Posterior<F> {
    pub fn new(logf: F, support: (f64, f64), start: f64, step: f64) -> Result<Self> {
        let w = log_window(&logf, support, start, step)?;
        Ok(Self {
            logf,
            lo: w.lo,
            hi: w.hi,
            peak: w.peak,
        })
    }

    pub fn weight(&self, t: f64) -> f64 {
        (((self.logf)(t)) - self.peak).exp()
    }

    /// Log of the normalizing constant.
    pub fn log_mass(&self, quad: &QuadratureSpec) -> Result<f64> {
        let z = try_integrate(|t| Ok(self.weight(t)), self.lo, self.hi, quad)?.value;
        if !(z > 0.0) {
            return Err(Error::Domain("posterior has zero mass".into()));
        }
        Ok(z.ln() + self.peak)
    }

    /// `E[h(t)]` for each `h`.
    pub fn expectations(&self, hs: &[&dyn Fn(f64) -> f64], quad: &QuadratureSpec) -> Result<Vec<f64>> {
        let z = try_integrate(|t| Ok(self.weight(t)), self.lo, self.hi, quad)?.value;
        if !(z > 0.0) {
            return Err(Error::Domain("posterior has zero mass".into()));
        }
        hs.iter()
            .map(|h| {
                try_integrate(|t| Ok(h(t) * self.weight(t)), self.lo, self.hi, quad)
                    .map(|i| i.value / z)
            })
            .collect()
    }

    /// Root of the nondecreasing map `d -> E[g(d - t)]` by bisection over the
    /// mass window. `g` may jump at zero, so `d` is a quadrature breakpoint.
    pub fn solve_first_order(
        &self,
        g: &dyn Fn(f64) -> f64,
        tol: f64,
        quad: &QuadratureSpec,
    ) -> Result<f64> {
        let eval = |d: f64| -> Result<f64> {
            try_integrate_with_breaks(
                |t| Ok(g(d - t) * self.weight(t)),
                self.lo,
                self.hi,
                &[d],
                quad,
            )
            .map(|i| i.value)
        };
        let (mut a, mut b) = (self.lo, self.hi);
        for _ in 0..200 {
            if b - a <= tol * (1.0 + a.abs().max(b.abs())) {
                break;
            }
            let mid = 0.5 * (a + b);
            if eval(mid)? < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// Location posterior `prod f(x_i - theta)` under a flat prior, restricted
/// to `[lower, upper]`.
pub(crate) fn location_posterior<'a>(
    base: BaseDensity,
    x: &'a [f64],
    lower: f64,
    upper: f64,
) -> Result<Posterior<impl Fn(f64) -> f64 + 'a>> {
    if x.is_empty() {
        return Err(Error::Shape("empty replicate".into()));
    }
    let (zl, zu) = base.support();
    let xmin = x.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = (xmax - zu).max(lower);
    let hi = (xmin - zl).min(upper);
    if !(lo < hi) {
        return Err(Error::Domain(format!(
            "likelihood vanishes on the parameter set: support ({lo}, {hi}) is empty"
        )));
    }
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    let logf = move |t: f64| x.iter().map(|xi| base.ln_pdf(xi - t)).sum::<f64>();
    Posterior::new(logf, (lo, hi), mean - base.mean(), base.spread() / m.sqrt())
}

/// Posterior of `u = 1/sigma` under the prior `1/sigma` for a scale family:
/// density proportional to `u^(m-1) prod f(u x_i)`.
pub(crate) fn inverse_scale_posterior<'a>(
    base: BaseDensity,
    x: &'a [f64],
) -> Result<Posterior<impl Fn(f64) -> f64 + 'a>> {
    let m = x.len();
    if m == 0 {
        return Err(Error::Shape("empty replicate".into()));
    }
    let (zl, _) = base.support();
    if zl >= 0.0 && x.iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("negative observation for a positive scale family".into()));
    }
    let logf = move |u: f64| {
        let power = if m > 1 { (m - 1) as f64 * u.ln() } else { 0.0 };
        power + x.iter().map(|&xi| base.ln_pdf(u * xi)).sum::<f64>()
    };
    Posterior::new(logf, (0.0, f64::INFINITY), 1.0, 0.1)
}
