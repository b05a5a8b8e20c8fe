//! Loss invariance, group laws and density transformation on random inputs.

use minimax_core::loss::{loss_value, Decision, Estimand, LossShape, LossSpec};
use minimax_core::models::{log_density, BaseDensity, DataPoint, Matrix, ModelSpec, ParameterPoint};
use minimax_core::GroupElement;
use proptest::prelude::*;

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn spd(entries: &[f64], p: usize) -> Matrix {
    let a = Matrix::from_fn(p, p, |i, j| entries[i * p + j]);
    &a * a.transpose() + Matrix::identity(p, p) * 0.5
}

fn check_invariant(
    loss: &LossSpec,
    theta: &ParameterPoint,
    d: &Decision,
    g: &GroupElement,
) -> Result<(), TestCaseError> {
    let before = loss_value(loss, theta, d).unwrap();
    let moved_theta = g.act_parameter(theta).unwrap();
    let moved_d = g.act_decision(d, &loss.estimand).unwrap();
    let after = loss_value(loss, &moved_theta, &moved_d).unwrap();
    prop_assert!(same(before, after), "{loss:?}: {before} vs {after}");
    Ok(())
}

const DIFFERENCE: [LossShape; 3] = [LossShape::SquaredError, LossShape::Absolute, LossShape::Quartic];
const RATIO: [LossShape; 2] = [LossShape::ScaleInvariantSquared, LossShape::Entropy];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn location_losses(mu in -10.0..10.0f64, d in -10.0..10.0f64, c in -10.0..10.0f64, k in 0usize..3) {
        let loss = LossSpec::new(Estimand::Location, DIFFERENCE[k]);
        check_invariant(&loss, &ParameterPoint::location(mu), &Decision::Scalar(d), &GroupElement::shift(c))?;
    }

    #[test]
    fn vector_location_losses(
        mu in prop::collection::vec(-5.0..5.0f64, 3),
        d in prop::collection::vec(-5.0..5.0f64, 3),
        c in prop::collection::vec(-5.0..5.0f64, 3),
        k in 0usize..3,
    ) {
        let loss = LossSpec::new(Estimand::Location, DIFFERENCE[k]);
        check_invariant(&loss, &ParameterPoint::locations(mu), &Decision::Vector(d), &GroupElement::Shift(c))?;
    }

    #[test]
    fn linear_combination_losses(
        mu in prop::collection::vec(-5.0..5.0f64, 2),
        a in prop::collection::vec(-3.0..3.0f64, 2),
        d in -10.0..10.0f64,
        c in prop::collection::vec(-5.0..5.0f64, 2),
        k in 0usize..3,
    ) {
        let loss = LossSpec::new(Estimand::LinearCombination { a }, DIFFERENCE[k]);
        check_invariant(&loss, &ParameterPoint::locations(mu), &Decision::Scalar(d), &GroupElement::Shift(c))?;
    }

    #[test]
    fn scale_losses(
        sigma in 0.1..10.0f64,
        d in 0.05..20.0f64,
        s in 0.1..10.0f64,
        power in prop::sample::select(vec![1.0, 2.0, -1.0, 0.5]),
        k in 0usize..2,
    ) {
        let loss = LossSpec::new(Estimand::ScalePower { power }, RATIO[k]);
        check_invariant(&loss, &ParameterPoint::scale(sigma), &Decision::Scalar(d), &GroupElement::scale(s))?;
    }

    #[test]
    fn scale_product_losses(
        sigma in prop::collection::vec(0.2..5.0f64, 3),
        r in prop::collection::vec(-2.0..2.0f64, 3),
        d in 0.05..20.0f64,
        s in prop::collection::vec(0.2..5.0f64, 3),
        k in 0usize..2,
    ) {
        let loss = LossSpec::new(Estimand::ScaleProduct { exponents: r }, RATIO[k]);
        check_invariant(&loss, &ParameterPoint::scales(sigma), &Decision::Scalar(d), &GroupElement::Scale(s))?;
    }

    #[test]
    fn quantile_losses(
        mu in -10.0..10.0f64,
        sigma in 0.1..5.0f64,
        eta in -2.0..2.0f64,
        d in -10.0..10.0f64,
        shift in -10.0..10.0f64,
        scale in 0.1..5.0f64,
        k in 0usize..3,
    ) {
        let loss = LossSpec::new(Estimand::Quantile { eta }, DIFFERENCE[k]);
        let g = GroupElement::ShiftScale { shift, scale };
        check_invariant(&loss, &ParameterPoint::location_scale(mu, sigma), &Decision::Scalar(d), &g)?;
    }

    #[test]
    fn covariance_losses(
        a in prop::collection::vec(-2.0..2.0f64, 9),
        b in prop::collection::vec(-2.0..2.0f64, 9),
        lambda in 0.1..10.0f64,
        stein in any::<bool>(),
    ) {
        let shape = if stein { LossShape::Stein } else { LossShape::SquaredIdentity };
        let loss = LossSpec::new(Estimand::Covariance, shape);
        check_invariant(
            &loss,
            &ParameterPoint::covariance(spd(&a, 3)),
            &Decision::Matrix(spd(&b, 3)),
            &GroupElement::MatrixScale(lambda),
        )?;
    }

    #[test]
    fn group_laws(
        c in prop::collection::vec(-10.0..10.0f64, 2),
        s in prop::collection::vec(0.1..10.0f64, 2),
        mu in prop::collection::vec(-10.0..10.0f64, 2),
        sigma in prop::collection::vec(0.1..10.0f64, 2),
        lambda in 0.1..10.0f64,
    ) {
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| same(*x, *y));
        // parameters
        let g = GroupElement::Shift(c.clone());
        let t = ParameterPoint::locations(mu.clone());
        let back = g.inverse().act_parameter(&g.act_parameter(&t).unwrap()).unwrap();
        prop_assert!(close(&back.location, &mu));
        let g = GroupElement::Scale(s.clone());
        let t = ParameterPoint::scales(sigma.clone());
        let back = g.inverse().act_parameter(&g.act_parameter(&t).unwrap()).unwrap();
        prop_assert!(close(&back.scale, &sigma));
        let g = GroupElement::ShiftScale { shift: c[0], scale: s[0] };
        let t = ParameterPoint::location_scale(mu[0], sigma[0]);
        let back = g.inverse().act_parameter(&g.act_parameter(&t).unwrap()).unwrap();
        prop_assert!(same(back.location[0], mu[0]) && same(back.scale[0], sigma[0]));
        // data
        let x = DataPoint::Vector(mu.clone());
        let back = g.inverse().act_data(&g.act_data(&x).unwrap()).unwrap();
        prop_assert!(close(back.as_vector().unwrap(), &mu));
        let m = GroupElement::MatrixScale(lambda);
        let sm = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&sigma));
        let back = m.inverse().act_data(&m.act_data(&DataPoint::Matrix(sm.clone())).unwrap()).unwrap();
        prop_assert!((back.as_matrix().unwrap() - &sm).amax() <= 1e-12 * sm.amax());
        // decisions
        let est = Estimand::Quantile { eta: 1.0 };
        let d = Decision::Scalar(mu[1]);
        let back = g.inverse().act_decision(&g.act_decision(&d, &est).unwrap(), &est).unwrap();
        prop_assert!(same(back.as_scalar().unwrap(), mu[1]));
        // composition with the inverse
        let e = g.compose(&g.inverse()).unwrap();
        let GroupElement::ShiftScale { shift, scale } = e else { unreachable!() };
        prop_assert!(shift.abs() < 1e-12 && (scale - 1.0).abs() < 1e-12);
    }

    #[test]
    fn location_density_is_shift_invariant(
        mu in -5.0..5.0f64,
        c in -5.0..5.0f64,
        z in prop::collection::vec(0.01..0.99f64, 3),
        base in prop::sample::select(vec![BaseDensity::Normal, BaseDensity::Exponential, BaseDensity::Gamma { shape: 2.5 }, BaseDensity::UniformUnit]),
    ) {
        let model = ModelSpec::location(base, 3);
        let x: Vec<f64> = z.iter().map(|v| mu + v).collect();
        let a = log_density(&model, &ParameterPoint::location(mu), &DataPoint::Vector(x.clone())).unwrap();
        let moved: Vec<f64> = x.iter().map(|v| v + c).collect();
        let b = log_density(&model, &ParameterPoint::location(mu + c), &DataPoint::Vector(moved)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn scale_density_transforms_with_jacobian(
        sigma in 0.2..5.0f64,
        s in 0.2..5.0f64,
        z in prop::collection::vec(0.05..3.0f64, 2),
        base in prop::sample::select(vec![BaseDensity::Normal, BaseDensity::Exponential, BaseDensity::Gamma { shape: 1.7 }]),
    ) {
        let model = ModelSpec::scale(base, 2);
        let x: Vec<f64> = z.iter().map(|v| sigma * v).collect();
        let a = log_density(&model, &ParameterPoint::scale(sigma), &DataPoint::Vector(x.clone())).unwrap();
        let moved: Vec<f64> = x.iter().map(|v| s * v).collect();
        let b = log_density(&model, &ParameterPoint::scale(s * sigma), &DataPoint::Vector(moved)).unwrap();
        // f(sx | s sigma) s^m = f(x | sigma)
        let b = b + 2.0 * s.ln();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }
}
