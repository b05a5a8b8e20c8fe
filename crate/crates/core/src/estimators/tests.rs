use super::*;
use crate::models::BaseDensity;
use crate::restriction::{make_cone, ConeKind, Coordinate};

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn pitman_examples() {
    let normal = ModelSpec::location(BaseDensity::Normal, 3);
    let d = pitman_location(&normal, &[0.2, -0.4, 1.1], &quad()).unwrap();
    assert!(close(d, 0.3, 1e-8), "{d}");
    let unif = ModelSpec::location(BaseDensity::UniformUnit, 1);
    let d = pitman_location(&unif, &[0.7], &quad()).unwrap();
    assert!(close(d, 0.2, 1e-8), "{d}");
    let expo = ModelSpec::location(BaseDensity::Exponential, 1);
    let d = pitman_location(&expo, &[2.0], &quad()).unwrap();
    assert!(close(d, 1.0, 1e-8), "{d}");
}

#[test]
fn pitman_general_examples() {
    let normal2 = ModelSpec::location(BaseDensity::Normal, 2);
    let d = pitman_location_general(&normal2, LossShape::Absolute, &[0.0, 1.0], &quad()).unwrap();
    assert!(close(d, 0.5, 1e-7), "{d}");
    let normal1 = ModelSpec::location(BaseDensity::Normal, 1);
    let d = pitman_location_general(&normal1, LossShape::Quartic, &[2.5], &quad()).unwrap();
    assert!(close(d, 2.5, 1e-7), "{d}");
    for (base, x) in [
        (BaseDensity::Exponential, vec![2.0, 2.7, 4.1]),
        (BaseDensity::UniformUnit, vec![0.3, 0.9]),
        (BaseDensity::Normal, vec![-1.0, 3.0, 0.5]),
        (BaseDensity::Gamma { shape: 3.0 }, vec![4.0, 6.5]),
    ] {
        let model = ModelSpec::location(base, x.len());
        let g = pitman_location_general(&model, LossShape::SquaredError, &x, &quad()).unwrap();
        let p = pitman_location(&model, &x, &quad()).unwrap();
        assert!(close(g, p, 1e-7), "{base:?}: {g} vs {p}");
    }
}

#[test]
fn exponential_median_rule() {
    // posterior e^{theta - x} on theta < x has median x - ln 2
    let expo = ModelSpec::location(BaseDensity::Exponential, 1);
    let d = pitman_location_general(&expo, LossShape::Absolute, &[2.0], &quad()).unwrap();
    assert!(close(d, 2.0 - std::f64::consts::LN_2, 1e-7), "{d}");
}

#[test]
fn pitman_rejects_incompatible_data() {
    let unif = ModelSpec::location(BaseDensity::UniformUnit, 2);
    assert!(matches!(
        pitman_location(&unif, &[0.0, 3.0], &quad()),
        Err(Error::Domain(_))
    ));
}

#[test]
fn scale_mre_examples() {
    let x = [0.4, 2.2, 1.3, 0.05];
    let t: f64 = x.iter().sum();
    let model = ModelSpec::scale(BaseDensity::Exponential, 4);
    let d = mre_scale(&model, 1.0, LossShape::ScaleInvariantSquared, &x, &quad()).unwrap();
    assert!(close(d, t / 5.0, 1e-8 * t), "{d}");
    let d = mre_scale(&model, 1.0, LossShape::Entropy, &x, &quad()).unwrap();
    assert!(close(d, t / 4.0, 1e-8 * t), "{d}");
    let gamma = ModelSpec::scale(BaseDensity::Gamma { shape: 2.5 }, 1);
    let d = mre_scale(&gamma, 1.0, LossShape::Entropy, &[3.0], &quad()).unwrap();
    assert!(close(d, 3.0 / 2.5, 1e-8), "{d}");
    assert!(matches!(
        mre_scale(&ModelSpec::scale(BaseDensity::Exponential, 2), 1.0, LossShape::Entropy, &[0.0, 0.0], &quad()),
        Err(Error::Domain(_))
    ));
}

#[test]
fn scale_product_factorizes() {
    // two exponential components, tau = sigma_1 sigma_2, m = 2:
    // u_j ~ Gamma(2, T_j), E[u] = 2/T, E[u^2] = 6/T^2
    let model = ModelSpec::scale_components(BaseDensity::Exponential, 2, 2);
    let x = [1.0, 0.5, 2.0, 1.5];
    let (t1, t2) = (3.0, 2.0);
    let d = mre_scale_product(&model, &[1.0, 1.0], LossShape::ScaleInvariantSquared, &x, &quad())
        .unwrap();
    let expected = (4.0 / (t1 * t2)) / (36.0 / (t1 * t1 * t2 * t2));
    assert!(close(d, expected, 1e-8), "{d} vs {expected}");
}

#[test]
fn katz_examples() {
    let model = ModelSpec::location(BaseDensity::Normal, 1);
    let half = Restriction::HalfLineLower {
        bound: 0.0,
        parameter: Coordinate::Location,
    };
    let d = restricted_flat_bayes(&model, &half, &[0.0], &quad()).unwrap();
    assert!(close(d, 0.797_884_560_802_865_4, 1e-12));
    let d = restricted_flat_bayes(&model, &half, &[-3.0], &quad()).unwrap();
    assert!(close(d, 0.283_098_654_930_44, 1e-10), "{d}");
    // truncated normal mean on [0,1] at x = 10
    let unit = Restriction::Interval {
        lower: 0.0,
        upper: 1.0,
        scale_unknown: false,
    };
    let d = restricted_flat_bayes(&model, &unit, &[10.0], &quad()).unwrap();
    assert!(close(d, 0.891_543_711_987_5, 1e-9), "{d}");
    assert!(matches!(
        restricted_flat_bayes(&model, &half, &[-60.0], &quad()),
        Err(Error::Underflow(_))
    ));
}

#[test]
fn katz_quadrature_path_matches_closed_form() {
    // posterior proportional to e^theta on [0, x]
    let model = ModelSpec::location(BaseDensity::Exponential, 1);
    let half = Restriction::HalfLineLower {
        bound: 0.0,
        parameter: Coordinate::Location,
    };
    let x = 1.5f64;
    let d = restricted_flat_bayes(&model, &half, &[x], &quad()).unwrap();
    let expected = x - 1.0 + x / x.exp_m1();
    assert!(close(d, expected, 1e-8), "{d} vs {expected}");
    assert!(matches!(
        restricted_flat_bayes(&model, &half, &[-1.0], &quad()),
        Err(Error::Underflow(_))
    ));
}

#[test]
fn cone_rule_examples() {
    let c = Matrix::from_row_slice(1, 2, &[-1.0, 1.0]);
    let d = restricted_flat_bayes_cone(&c, &[0.0, 0.0], 1).unwrap();
    let half = 0.797_884_560_802_865_4 * std::f64::consts::FRAC_1_SQRT_2;
    assert!(close(d[0], -half, 1e-12) && close(d[1], half, 1e-12));
    let d = restricted_flat_bayes_cone(&c, &[-5.0, 5.0], 1).unwrap();
    assert!(close(d[0], -5.0, 1e-4) && close(d[1], 5.0, 1e-4));
}

#[test]
fn cone_rule_matches_plane_quadrature() {
    // brute-force posterior mean over the half-plane mu_1 <= mu_2
    let x = [0.8, 0.3];
    let spec = QuadratureSpec::with_rel_tol(1e-10);
    let inner = |mu1: f64, h: &dyn Fn(f64, f64) -> f64| {
        crate::quadrature::integrate(
            |mu2| h(mu1, mu2) * (-0.5 * ((mu1 - x[0]).powi(2) + (mu2 - x[1]).powi(2))).exp(),
            mu1,
            mu1 + 14.0,
            &spec,
        )
        .unwrap()
        .value
    };
    let outer = |h: &dyn Fn(f64, f64) -> f64| {
        crate::quadrature::integrate(|mu1| inner(mu1, h), -14.0, 14.0, &spec)
            .unwrap()
            .value
    };
    let z = outer(&|_, _| 1.0);
    let m1 = outer(&|a, _| a) / z;
    let m2 = outer(&|_, b| b) / z;
    let c = Matrix::from_row_slice(1, 2, &[-1.0, 1.0]);
    let d = restricted_flat_bayes_cone(&c, &x, 1).unwrap();
    assert!(close(d[0], m1, 1e-8) && close(d[1], m2, 1e-8), "{d:?} vs {m1} {m2}");
}

#[test]
fn cone_rule_needs_one_row() {
    let r = make_cone(ConeKind::SimpleOrder { r: None }, 3).unwrap();
    let Restriction::PolyhedralCone { constraints } = r else { panic!() };
    assert!(matches!(
        restricted_flat_bayes_cone(&constraints, &[0.0, 0.0, 0.0], 1),
        Err(Error::Argument(_))
    ));
}

#[test]
fn quantile_examples() {
    assert!(close(c_m(2).unwrap(), 0.797_884_560_802_865_4, 1e-12));
    assert!(close(c_m(3).unwrap(), 0.626_657_068_657_750_1, 1e-12));
    let d = quantile_mre(&[0.0, 0.0, 3.0], 1.0).unwrap();
    assert!(close(d, 1.0 + 0.626_657_068_657_750_1 * 6f64.sqrt(), 1e-12));
    assert!(close(d, 2.5349, 1e-4));
    assert_eq!(quantile_mre(&[1.0, 4.0, 7.0], 0.0).unwrap(), 4.0);
    assert!(matches!(quantile_mre(&[1.0], 1.0), Err(Error::Argument(_))));
    assert!(matches!(c_m(1), Err(Error::Argument(_))));
    // large m stays finite through log-gamma
    assert!(c_m(100_000).unwrap().is_finite());
}

#[test]
fn c_m_is_decreasing_and_bounded() {
    let mut prev = f64::INFINITY;
    for m in 2..=200 {
        let c = c_m(m).unwrap();
        assert!(c < prev);
        assert!((m - 1) as f64 * c * c < 1.0);
        prev = c;
    }
}

#[test]
fn linear_examples() {
    let n = BaseDensity::Normal;
    let e = BaseDensity::Exponential;
    assert_eq!(linear_mre(&[n, n], &[1.0, -1.0], &[3.0, 1.0]).unwrap(), 2.0);
    assert_eq!(linear_mre(&[e, e], &[1.0, 1.0], &[2.0, 3.0]).unwrap(), 3.0);
    assert_eq!(linear_mre(&[n], &[1.0], &[0.37]).unwrap(), 0.37);
    let pit = pitman_location(&ModelSpec::location(n, 1), &[0.37], &quad()).unwrap();
    assert!(close(pit, 0.37, 1e-8));
    assert!(matches!(linear_mre(&[n], &[1.0, 2.0], &[1.0]), Err(Error::Shape(_))));
}

#[test]
fn covariance_examples() {
    assert_eq!(a0(5, 2).unwrap(), vec![1.0 / 6.0, 1.0 / 4.0]);
    let a = [0.3, 0.7, 1.9];
    let d = cov_equivariant(&Matrix::identity(3, 3), &a).unwrap();
    assert_eq!(d, Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&a)));
    let s = Matrix::from_element(1, 1, 7.5);
    let d = cov_equivariant(&s, &a0(5, 1).unwrap()).unwrap();
    assert!(close(d[(0, 0)], 1.5, 1e-15));
    let bad = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(matches!(cov_equivariant(&bad, &[1.0, 1.0]), Err(Error::Decomposition(_))));
}

#[test]
fn a0_is_positive_and_increasing() {
    for p in 1..6 {
        for m in p..p + 10 {
            let a = a0(m, p).unwrap();
            assert!(a.iter().all(|&v| v > 0.0));
            assert!(a.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn projected_examples() {
    let model = ModelSpec::location(BaseDensity::Normal, 1);
    let interval = Restriction::Interval {
        lower: -1.0,
        upper: 1.0,
        scale_unknown: false,
    };
    let rule = EstimatorSpec::Projected {
        base: Box::new(EstimatorSpec::Identity),
        restriction: interval.clone(),
    };
    rule.validate(&model).unwrap();
    let d = rule.evaluate(&model, &DataPoint::Vector(vec![2.0]), &quad()).unwrap();
    assert_eq!(d, Decision::Scalar(1.0));
    let d = rule.evaluate(&model, &DataPoint::Vector(vec![0.25]), &quad()).unwrap();
    assert_eq!(d, Decision::Scalar(0.25));

    let mv = ModelSpec::multivariate_location(BaseDensity::Normal, 1, 3);
    let order = make_cone(ConeKind::SimpleOrder { r: None }, 3).unwrap();
    let rule = EstimatorSpec::Projected {
        base: Box::new(EstimatorSpec::Identity),
        restriction: order,
    };
    rule.validate(&mv).unwrap();
    let d = rule
        .evaluate(&mv, &DataPoint::Vector(vec![3.0, 1.0, 2.0]), &quad())
        .unwrap();
    let v = d.as_vector().unwrap();
    assert!(v.iter().all(|&c| close(c, 2.0, 1e-12)), "{v:?}");
}

#[test]
fn projected_scale_decision() {
    let model = ModelSpec::scale(BaseDensity::Exponential, 2);
    let rule = EstimatorSpec::Projected {
        base: Box::new(EstimatorSpec::MreScale {
            shape: LossShape::ScaleInvariantSquared,
            power: 1.0,
        }),
        restriction: Restriction::HalfLineLower {
            bound: 1.0,
            parameter: Coordinate::Scale,
        },
    };
    rule.validate(&model).unwrap();
    let d = rule.evaluate(&model, &DataPoint::Vector(vec![0.3, 0.6]), &quad()).unwrap();
    assert_eq!(d, Decision::Scalar(1.0));
    let d = rule.evaluate(&model, &DataPoint::Vector(vec![3.0, 6.0]), &quad()).unwrap();
    assert!(close(d.as_scalar().unwrap(), 3.0, 1e-8));
}

#[test]
fn validation_rejects_mismatches() {
    let scale = ModelSpec::scale(BaseDensity::Exponential, 2);
    assert!(EstimatorSpec::QuantileMre { eta: 1.0 }.validate(&scale).is_err());
    assert!(EstimatorSpec::PitmanLocation {
        shape: LossShape::Entropy
    }
    .validate(&ModelSpec::location(BaseDensity::Normal, 1))
    .is_err());
    let w = ModelSpec::wishart(2, 5);
    assert!(EstimatorSpec::CovDiag {
        a: vec![1.0, -1.0],
        name: None
    }
    .validate(&w)
    .is_err());
    assert!(EstimatorSpec::cov_a0(5, 2).unwrap().validate(&w).is_ok());
    let det = Restriction::CovDet { bound: 1.0, p: 2 };
    assert!(EstimatorSpec::Projected {
        base: Box::new(EstimatorSpec::Identity),
        restriction: det
    }
    .validate(&w)
    .is_err());
}

#[test]
fn spec_round_trips_through_json() {
    let rule = EstimatorSpec::Projected {
        base: Box::new(EstimatorSpec::QuantileMre { eta: 1.0 }),
        restriction: Restriction::HalfLineLower {
            bound: 0.0,
            parameter: Coordinate::Location,
        },
    };
    let text = serde_json::to_string(&rule).unwrap();
    let back: EstimatorSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(rule, back);
}
