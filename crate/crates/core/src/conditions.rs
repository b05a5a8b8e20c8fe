//! Numerical check of the nesting and coverage conditions for a shift
//! sequence `g_n` applied to a restricted space `B_n = Omega*`:
//! `g_n Omega* ⊂ g_{n+1} Omega*` and `∪_n g_n Omega* = Omega`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::models::{Matrix, ParameterPoint};
use crate::restriction::{shift_element, Ambient, Coordinate, Restriction};
use crate::rng::{derive_seed, Substreams};

/// Default number of `Omega*` points sampled per nesting step.
pub const DEFAULT_NESTING_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct NestingCheck {
    pub n: usize,
    pub samples: usize,
    pub failures: usize,
    pub passed: bool,
}

/// Smallest `n` whose image contains a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    CoveredAt(usize),
    NotCovered,
}

impl Serialize for Coverage {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Coverage::CoveredAt(n) => s.serialize_u64(*n as u64),
            Coverage::NotCovered => s.serialize_str("not covered up to n_max"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageEntry {
    pub probe: ParameterPoint,
    pub covered: Coverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub restriction: Restriction,
    pub n_max: usize,
    pub seed: u64,
    pub nesting: Vec<NestingCheck>,
    pub coverage: Vec<CoverageEntry>,
    pub nesting_pass: bool,
    pub coverage_pass: bool,
    pub verdict: Verdict,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn uncovered(&self) -> usize {
        self.coverage
            .iter()
            .filter(|c| c.covered == Coverage::NotCovered)
            .count()
    }
}

fn spread<R: Rng>(rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e * 10f64.powf(rng.random_range(-1.0..1.0))
}

fn random_spd<R: Rng>(p: usize, rng: &mut R) -> Matrix {
    let a = Matrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose() + Matrix::identity(p, p) * 0.1
}

/// Draws a random point of the restricted space, including boundary points
/// with positive probability where the set has a flat boundary.
pub fn sample_member<R: Rng>(restriction: &Restriction, rng: &mut R) -> Result<ParameterPoint> {
    let on_boundary = |rng: &mut R| rng.random_bool(0.2);
    Ok(match restriction {
        Restriction::HalfLineLower { bound, parameter } => match parameter {
            Coordinate::Location => ParameterPoint::location(if on_boundary(rng) {
                *bound
            } else {
                bound + spread(rng)
            }),
            Coordinate::Scale => ParameterPoint::scale(bound * (1.0 + spread(rng))),
        },
        Restriction::HalfLineUpper { bound, parameter } => match parameter {
            Coordinate::Location => ParameterPoint::location(bound - spread(rng)),
            Coordinate::Scale => ParameterPoint::scale(bound * (-spread(rng)).exp()),
        },
        Restriction::Interval {
            lower,
            upper,
            scale_unknown,
        } => {
            let mu = lower + (upper - lower) * rng.random::<f64>();
            if *scale_unknown {
                ParameterPoint::location_scale(mu, rng.sample::<f64, _>(StandardNormal).exp())
            } else {
                ParameterPoint::location(mu)
            }
        }
        Restriction::PolyhedralCone { constraints } => {
            // mu = C^+ y + (I - C^+ C) z with y >= 0, so C mu = y
            let (q, p) = constraints.shape();
            let gram = constraints * constraints.transpose();
            let chol = gram
                .cholesky()
                .ok_or_else(|| Error::Argument("rank-deficient cone".into()))?;
            let pinv = constraints.transpose() * chol.inverse();
            let y = DVector::from_fn(q, |_, _| {
                if rng.random_bool(0.3) {
                    0.0
                } else {
                    spread(rng)
                }
            });
            let z = DVector::from_fn(p, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
            let null_part = &z - &pinv * (constraints * &z);
            let mu = &pinv * y + null_part;
            ParameterPoint::locations(mu.iter().copied().collect())
        }
        Restriction::ScaleProduct { exponents, bound } => {
            let mut sigma: Vec<f64> = (0..exponents.len())
                .map(|_| rng.sample::<f64, _>(StandardNormal).exp())
                .collect();
            let j = exponents
                .iter()
                .position(|&r| r != 0.0)
                .ok_or_else(|| Error::Argument("all exponents are zero".into()))?;
            let tau: f64 = exponents.iter().zip(&sigma).map(|(r, s)| s.powf(*r)).product();
            let target = bound * spread(rng).exp();
            sigma[j] *= (target / tau).powf(1.0 / exponents[j]);
            ParameterPoint::scales(sigma)
        }
        Restriction::QuantileCone { eta } => {
            let sigma = rng.sample::<f64, _>(StandardNormal).exp();
            let slack = if on_boundary(rng) { 0.0 } else { spread(rng) };
            ParameterPoint::location_scale(-eta * sigma + slack, sigma)
        }
        Restriction::QuantileBox { lower, scale_lower } => {
            let mu = if on_boundary(rng) { *lower } else { lower + spread(rng) };
            let sigma = (scale_lower + spread(rng)).max(f64::MIN_POSITIVE);
            ParameterPoint::location_scale(mu, sigma)
        }
        Restriction::CovDet { bound, p } => {
            let s = random_spd(*p, rng);
            let target = bound * spread(rng).exp();
            let lambda = (target / s.determinant()).powf(1.0 / *p as f64);
            ParameterPoint::covariance(s * lambda)
        }
        Restriction::CovTrace { bound, p } => {
            let s = random_spd(*p, rng);
            let target = bound * spread(rng).exp();
            let lambda = target / s.trace();
            ParameterPoint::covariance(s * lambda)
        }
    })
}

/// Random probes of the full space: locations uniform in
/// `[-n_max/4, n_max/4]`, log-scales uniform in `±ln(n_max)/4`.
pub fn default_probes(
    restriction: &Restriction,
    count: usize,
    n_max: usize,
    seed: u64,
) -> Vec<ParameterPoint> {
    let half_width = n_max as f64 / 4.0;
    let mut log_width = (n_max as f64).ln() / 4.0;
    if let Restriction::ScaleProduct { exponents, .. } = restriction {
        log_width /= exponents.iter().map(|r| r.abs()).sum::<f64>().max(1.0);
    }
    let streams = Substreams::new(derive_seed(seed, 0x9e0b));
    (0..count as u64)
        .map(|i| {
            let mut rng = streams.stream(i);
            let loc = |rng: &mut rand_chacha::ChaCha8Rng| rng.random_range(-half_width..=half_width);
            let log_scale = |rng: &mut rand_chacha::ChaCha8Rng| {
                rng.random_range(-log_width..=log_width).exp()
            };
            match restriction.ambient() {
                Ambient::Location(p) => {
                    ParameterPoint::locations((0..p).map(|_| loc(&mut rng)).collect())
                }
                Ambient::Scale(p) => {
                    ParameterPoint::scales((0..p).map(|_| log_scale(&mut rng)).collect())
                }
                Ambient::LocationScale => {
                    let mu = loc(&mut rng);
                    ParameterPoint::location_scale(mu, log_scale(&mut rng))
                }
                Ambient::Covariance(p) => {
                    let a = Matrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let q = a.qr().q();
                    let d = Matrix::from_diagonal(&DVector::from_fn(p, |_, _| log_scale(&mut rng)));
                    let s = &q * d * q.transpose();
                    ParameterPoint::covariance((&s + s.transpose()) * 0.5)
                }
            }
        })
        .collect()
}

/// Checks nesting for `n = 1, ..., n_max - 1` and coverage of every probe by
/// some `g_n Omega*` with `n <= n_max`.
pub fn verify_conditions(
    restriction: &Restriction,
    n_max: usize,
    probes: &[ParameterPoint],
    nesting_samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    restriction.validate()?;
    if n_max == 0 || nesting_samples == 0 {
        return Err(Error::Argument("n_max and nesting samples must be positive".into()));
    }
    for probe in probes {
        restriction.check_shape(probe)?;
    }
    let shifts: Vec<_> = (1..=n_max)
        .map(|n| shift_element(restriction, n))
        .collect::<Result<_>>()?;

    let streams = Substreams::new(derive_seed(seed, 0x0e57));
    let nesting: Vec<NestingCheck> = (1..n_max)
        .into_par_iter()
        .map(|n| -> Result<NestingCheck> {
            let g = &shifts[n - 1];
            let next_inv = shifts[n].inverse();
            let mut failures = 0;
            for k in 0..nesting_samples {
                let mut rng = streams.stream(((n as u64) << 32) | k as u64);
                let omega = sample_member(restriction, &mut rng)?;
                let image = g.act_parameter(&omega)?;
                let back = next_inv.act_parameter(&image)?;
                if !restriction.contains(&back)? {
                    failures += 1;
                }
            }
            Ok(NestingCheck {
                n,
                samples: nesting_samples,
                failures,
                passed: failures == 0,
            })
        })
        .collect::<Result<_>>()?;

    let coverage: Vec<CoverageEntry> = probes
        .par_iter()
        .map(|probe| -> Result<CoverageEntry> {
            for (i, g) in shifts.iter().enumerate() {
                let back = g.inverse().act_parameter(probe)?;
                if restriction.contains(&back)? {
                    return Ok(CoverageEntry {
                        probe: probe.clone(),
                        covered: Coverage::CoveredAt(i + 1),
                    });
                }
            }
            Ok(CoverageEntry {
                probe: probe.clone(),
                covered: Coverage::NotCovered,
            })
        })
        .collect::<Result<_>>()?;

    let nesting_pass = nesting.iter().all(|c| c.passed);
    let coverage_pass = coverage.iter().all(|c| c.covered != Coverage::NotCovered);
    Ok(ConditionReport {
        restriction: restriction.clone(),
        n_max,
        seed,
        nesting,
        coverage,
        nesting_pass,
        coverage_pass,
        verdict: if nesting_pass && coverage_pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restriction::{make_cone, ConeKind};

    #[test]
    fn members_are_members() {
        let streams = Substreams::new(4);
        let cases = vec![
            make_cone(ConeKind::Umbrella { peak: 2 }, 4).unwrap(),
            Restriction::ScaleProduct {
                exponents: vec![1.0, -2.0],
                bound: 3.0,
            },
            Restriction::QuantileCone { eta: -0.7 },
            Restriction::CovDet { bound: 2.0, p: 3 },
            Restriction::CovTrace { bound: 2.0, p: 3 },
        ];
        for r in cases {
            for i in 0..200 {
                let mut rng = streams.stream(i);
                let m = sample_member(&r, &mut rng).unwrap();
                assert!(r.contains(&m).unwrap(), "{r:?} {m:?}");
            }
        }
    }

    #[test]
    fn interval_with_unknown_scale_passes() {
        let r = Restriction::Interval {
            lower: 0.0,
            upper: 1.0,
            scale_unknown: true,
        };
        let probes = default_probes(&r, 200, 40, 2);
        let rep = verify_conditions(&r, 40, &probes, 200, 2).unwrap();
        assert!(rep.passed());
        // images are mu in [-n/2, n/2]
        let g = shift_element(&r, 6).unwrap();
        let lo = g.act_parameter(&ParameterPoint::location_scale(0.0, 1.0)).unwrap();
        let hi = g.act_parameter(&ParameterPoint::location_scale(1.0, 1.0)).unwrap();
        assert_eq!((lo.location[0], hi.location[0]), (-3.0, 3.0));
    }

    #[test]
    fn interval_with_known_scale_fails_coverage() {
        let r = Restriction::Interval {
            lower: 0.0,
            upper: 1.0,
            scale_unknown: false,
        };
        let probes = default_probes(&r, 100, 40, 3);
        let rep = verify_conditions(&r, 40, &probes, 100, 3).unwrap();
        assert!(!rep.coverage_pass);
        assert!(!rep.nesting_pass);
        assert_eq!(rep.verdict, Verdict::Fail);
    }

    #[test]
    fn orthant_box_needs_n_of_one_hundred() {
        let r = make_cone(ConeKind::Orthant, 2).unwrap();
        let streams = Substreams::new(9);
        let probes: Vec<_> = (0..100)
            .map(|i| {
                let mut rng = streams.stream(i);
                ParameterPoint::locations(vec![
                    rng.random_range(-100.0..=100.0),
                    rng.random_range(-100.0..=100.0),
                ])
            })
            .collect();
        let rep = verify_conditions(&r, 100, &probes, 200, 1).unwrap();
        assert!(rep.passed());
        let rep = verify_conditions(&r, 50, &probes, 200, 1).unwrap();
        assert!(rep.nesting_pass && !rep.coverage_pass);
    }

    #[test]
    fn report_serializes_uncovered_marker() {
        let r = Restriction::Interval {
            lower: 0.0,
            upper: 1.0,
            scale_unknown: false,
        };
        let rep = verify_conditions(&r, 3, &[ParameterPoint::location(5.0)], 10, 0).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("not covered up to n_max"));
        assert!(json.contains("\"verdict\":\"fail\""));
    }
}
