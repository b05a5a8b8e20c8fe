//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! The integrator keeps the final panel partition so that a second integral
//! can be evaluated on exactly the same (or a mapped) set of nodes. That is
//! what makes the shifted-prior Bayes-risk comparison exact up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadrature configuration shared by every integral in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Target relative error of the whole integral.
    pub rel_tol: f64,
    /// Absolute error floor, used when the integral is (near) zero.
    pub abs_tol: f64,
    /// Upper bound on the number of panels before giving up.
    pub max_panels: usize,
    /// Number of equal panels the interval is cut into before refinement.
    pub initial_panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_panels: 4000,
            initial_panels: 8,
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) {
            return Err(Error::Argument("quadrature tolerances must be positive".into()));
        }
        if self.max_panels == 0 || self.initial_panels == 0 {
            return Err(Error::Argument("quadrature panel counts must be positive".into()));
        }
        Ok(())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    /// Final partition, sorted left to right.
    pub panels: Vec<(f64, f64)>,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One Gauss–Kronrod panel: (kronrod estimate, error estimate).
fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let k = kronrod * half;
    let g = gauss * half;
    if !k.is_finite() {
        return Err(Error::Domain(format!(
            "non-finite integrand on panel [{a}, {b}]"
        )));
    }
    Ok((k, (k - g).abs()))
}

/// Integrates a fallible integrand over `[a, b]`.
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Argument(format!("integration bounds must be finite: [{a}, {b}]")));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            panels: vec![(a, b)],
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    struct Panel {
        a: f64,
        b: f64,
        value: f64,
        error: f64,
        splittable: bool,
    }

    let n0 = spec.initial_panels.max(1);
    let width = (hi - lo) / n0 as f64;
    let mut panels = Vec::with_capacity(n0 * 4);
    for i in 0..n0 {
        let pa = lo + width * i as f64;
        let pb = if i + 1 == n0 { hi } else { lo + width * (i + 1) as f64 };
        let (value, error) = gk15(&mut f, pa, pb)?;
        panels.push(Panel {
            a: pa,
            b: pb,
            value,
            error,
            splittable: true,
        });
    }

    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.error).sum();
        let target = spec.abs_tol.max(spec.rel_tol * total.abs());
        if err <= target {
            break;
        }
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.splittable)
            .max_by(|(_, x), (_, y)| x.error.total_cmp(&y.error))
            .map(|(i, _)| i);
        let Some(worst) = worst else {
            // every panel is at floating resolution; accept if the residual
            // error is small relative to the scale of the problem
            if err <= 1e3 * target {
                break;
            }
            return Err(Error::convergence("adaptive quadrature", err));
        };
        if panels.len() >= spec.max_panels {
            return Err(Error::convergence("adaptive quadrature", err));
        }
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) || (p.b - p.a) <= 1e-13 * (hi - lo) {
            panels.push(Panel {
                splittable: false,
                ..p
            });
            continue;
        }
        let (v1, e1) = gk15(&mut f, p.a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, p.b)?;
        panels.push(Panel {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
            splittable: true,
        });
        panels.push(Panel {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
            splittable: true,
        });
    }

    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    // Sum left to right so the value depends only on the partition.
    let value: f64 = panels.iter().map(|p| p.value).sum();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    Ok(Integral {
        value: sign * value,
        error,
        panels: panels.iter().map(|p| (p.a, p.b)).collect(),
    })
}

/// Integrates an infallible integrand over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
{
    try_integrate(|x| Ok(f(x)), a, b, spec)
}

/// Integrates over `[a, b]` with mandatory breakpoints (kinks, support edges).
pub fn try_integrate_with_breaks<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);
    let mut value = 0.0;
    let mut error = 0.0;
    let mut panels = Vec::new();
    let sub = QuadratureSpec {
        initial_panels: spec.initial_panels.div_ceil(edges.len() - 1).max(1),
        ..*spec
    };
    for w in edges.windows(2) {
        let part = try_integrate(&mut f, w[0], w[1], &sub)?;
        value += part.value;
        error += part.error;
        panels.extend(part.panels);
    }
    Ok(Integral {
        value,
        error,
        panels,
    })
}

/// Applies the fixed 15-point Kronrod rule on a given partition.
pub fn try_integrate_on_panels<F>(mut f: F, panels: &[(f64, f64)]) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut total = 0.0;
    for &(a, b) in panels {
        total += gk15(&mut f, a, b)?.0;
    }
    Ok(total)
}

/// A window `[lo, hi]` holding essentially all of the mass of an unnormalized
/// log-density, plus a reference log value near its maximum.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogWindow {
    pub lo: f64,
    pub hi: f64,
    pub peak: f64,
}

/// Log-density drop (natural log units) treated as negligible tail mass.
pub(crate) const TAIL_DROP: f64 = 40.0;

/// Walks outward from `start` with geometrically growing steps until the log
/// density falls `TAIL_DROP` below the best value seen or the support bound is
/// reached. Assumes the density is unimodal on its support.
pub(crate) fn log_window<F>(
    logf: F,
    support: (f64, f64),
    start: f64,
    step: f64,
) -> Result<LogWindow>
where
    F: Fn(f64) -> f64,
{
    let (lb, ub) = support;
    if !(lb < ub) {
        return Err(Error::Domain(format!("empty support [{lb}, {ub}]")));
    }
    let start = start.clamp(lb, ub);
    let mut peak = logf(start);
    // at a support edge the density may vanish; nudge inside
    let mut origin = start;
    if !peak.is_finite() {
        let inner = if ub.is_finite() && lb.is_finite() {
            0.5 * (lb + ub)
        } else if lb.is_finite() {
            lb + step
        } else {
            ub - step
        };
        origin = inner;
        peak = logf(inner);
        if !peak.is_finite() {
            return Err(Error::Domain("log-density is not finite inside its support".into()));
        }
    }

    let walk = |direction: f64, bound: f64, peak: &mut f64| -> f64 {
        let mut x = origin;
        let mut h = step;
        for _ in 0..4000 {
            let nx = x + direction * h;
            if (direction > 0.0 && nx >= bound) || (direction < 0.0 && nx <= bound) {
                return bound;
            }
            let v = logf(nx);
            if v > *peak {
                *peak = v;
            }
            x = nx;
            if v < *peak - TAIL_DROP {
                return nx;
            }
            h *= 1.25;
        }
        x
    };
    let hi = walk(1.0, ub, &mut peak);
    let lo = walk(-1.0, lb, &mut peak);

    // refine the reference value on a grid so the integrand stays O(1)
    let n = 64;
    for i in 1..n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let v = logf(x);
        if v.is_finite() && v > peak {
            peak = v;
        }
    }
    Ok(LogWindow { lo, hi, peak })
}
