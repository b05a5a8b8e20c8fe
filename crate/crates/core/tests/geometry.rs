//! Projection and shift-sequence properties over every restriction variant.

use minimax_core::conditions::{default_probes, sample_member, verify_conditions, DEFAULT_NESTING_SAMPLES};
use minimax_core::models::{Matrix, ParameterPoint};
use minimax_core::projection::{dykstra, pava, project};
use minimax_core::restriction::{make_cone, Ambient, ConeKind, Coordinate, Restriction};
use minimax_core::rng::Substreams;
use rand::Rng;
use rand_distr::StandardNormal;

fn convex_variants() -> Vec<Restriction> {
    let mut v = vec![
        Restriction::HalfLineLower { bound: 0.5, parameter: Coordinate::Location },
        Restriction::HalfLineUpper { bound: -1.0, parameter: Coordinate::Location },
        Restriction::HalfLineLower { bound: 1.0, parameter: Coordinate::Scale },
        Restriction::HalfLineUpper { bound: 2.0, parameter: Coordinate::Scale },
        Restriction::Interval { lower: -1.0, upper: 2.0, scale_unknown: false },
        Restriction::Interval { lower: 0.0, upper: 1.0, scale_unknown: true },
        Restriction::ScaleProduct { exponents: vec![1.0, 0.5], bound: 2.0 },
        Restriction::QuantileCone { eta: 1.645 },
        Restriction::QuantileCone { eta: -0.5 },
        Restriction::QuantileBox { lower: -1.0, scale_lower: 0.5 },
        Restriction::CovTrace { bound: 3.0, p: 2 },
    ];
    for kind in [
        ConeKind::Orthant,
        ConeKind::SimpleOrder { r: None },
        ConeKind::SimpleOrder { r: Some(3) },
        ConeKind::TreeOrder,
        ConeKind::Umbrella { peak: 2 },
    ] {
        v.push(make_cone(kind, 4).unwrap());
    }
    v
}

/// A random point of the ambient space (positive scales, SPD covariances).
fn random_point<R: Rng>(restriction: &Restriction, rng: &mut R) -> ParameterPoint {
    let mut normal = || -> f64 { rng.sample::<f64, _>(StandardNormal) };
    match restriction.ambient() {
        Ambient::Location(p) => ParameterPoint::locations((0..p).map(|_| 3.0 * normal()).collect()),
        Ambient::Scale(p) => ParameterPoint::scales((0..p).map(|_| normal().exp()).collect()),
        Ambient::LocationScale => {
            let mu = 3.0 * normal();
            ParameterPoint::location_scale(mu, normal().exp())
        }
        Ambient::Covariance(p) => {
            let a = Matrix::from_fn(p, p, |_, _| normal());
            ParameterPoint::covariance(&a * a.transpose() + Matrix::identity(p, p) * 0.05)
        }
    }
}

fn flat(p: &ParameterPoint) -> Vec<f64> {
    let mut v = p.location.clone();
    v.extend(&p.scale);
    if let Some(c) = &p.covariance {
        v.extend(c.iter());
    }
    v
}

fn dist(a: &ParameterPoint, b: &ParameterPoint) -> f64 {
    flat(a).iter().zip(flat(b)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn projection_is_idempotent_and_lands_inside() {
    let streams = Substreams::new(17);
    for (k, r) in convex_variants().iter().enumerate() {
        for i in 0..10_000u64 {
            let mut rng = streams.stream(((k as u64) << 32) | i);
            let x = random_point(r, &mut rng);
            let once = project(r, &x).unwrap();
            let twice = project(r, &once).unwrap();
            assert!(dist(&once, &twice) <= 1e-10, "{r:?} at {x:?}");
            assert!(r.contains(&once).unwrap(), "{r:?}: {once:?}");
        }
    }
}

#[test]
fn projection_is_a_contraction_towards_members() {
    let streams = Substreams::new(23);
    for (k, r) in convex_variants().iter().enumerate() {
        for i in 0..1000u64 {
            let mut rng = streams.stream(((k as u64) << 32) | i);
            let x = random_point(r, &mut rng);
            let omega = sample_member(r, &mut rng).unwrap();
            let px = project(r, &x).unwrap();
            assert!(
                dist(&px, &omega) <= dist(&x, &omega) * (1.0 + 1e-9) + 1e-9,
                "{r:?}: x {x:?} omega {omega:?}"
            );
        }
    }
}

/// Exact simple-order projection by enumerating every split into
/// consecutive blocks.
fn brute_force_isotonic(y: &[f64]) -> Vec<f64> {
    let p = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (p - 1)) {
        let mut fit = Vec::with_capacity(p);
        let mut start = 0;
        for i in 0..p {
            if i == p - 1 || mask & (1 << i) != 0 {
                let block = &y[start..=i];
                let mean = block.iter().sum::<f64>() / block.len() as f64;
                fit.extend(std::iter::repeat_n(mean, block.len()));
                start = i + 1;
            }
        }
        if fit.windows(2).all(|w| w[0] <= w[1] + 1e-15) {
            let d: f64 = fit.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, fit));
            }
        }
    }
    best.unwrap().1
}

#[test]
fn pava_matches_enumeration_and_dykstra() {
    let streams = Substreams::new(5);
    for i in 0..100u64 {
        let mut rng = streams.stream(i);
        let p = rng.random_range(2..=6);
        let y: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
        let fit = pava(&y);
        let oracle = brute_force_isotonic(&y);
        assert!(fit.iter().zip(&oracle).all(|(a, b)| (a - b).abs() < 1e-8), "{y:?}");
        assert!(fit.windows(2).all(|w| w[0] <= w[1]));
        let mean_in = y.iter().sum::<f64>() / p as f64;
        let mean_out = fit.iter().sum::<f64>() / p as f64;
        assert!((mean_in - mean_out).abs() < 1e-12);
        let Restriction::PolyhedralCone { constraints } = make_cone(ConeKind::SimpleOrder { r: None }, p).unwrap() else {
            unreachable!()
        };
        let alt = dykstra(&constraints, &y).unwrap();
        assert!(fit.iter().zip(&alt).all(|(a, b)| (a - b).abs() < 1e-6));
    }
}

#[test]
fn every_variant_nests() {
    let mut variants: Vec<Restriction> = convex_variants()
        .into_iter()
        .filter(|r| !matches!(r, Restriction::Interval { scale_unknown: false, .. }))
        .collect();
    variants.push(Restriction::CovDet { bound: 2.0, p: 2 });
    variants.push(Restriction::ScaleProduct { exponents: vec![2.0, -1.0], bound: 0.5 });
    variants.push(Restriction::QuantileBox { lower: -2.0, scale_lower: 0.0 });
    for r in &variants {
        let probes = default_probes(r, 10, 30, 3);
        let rep = verify_conditions(r, 30, &probes, DEFAULT_NESTING_SAMPLES, 3).unwrap();
        assert!(rep.nesting_pass, "{r:?}");
    }
}

#[test]
fn known_scale_interval_is_the_negative_control() {
    let r = Restriction::Interval { lower: 0.0, upper: 1.0, scale_unknown: false };
    let probes = default_probes(&r, 100, 50, 1);
    let rep = verify_conditions(&r, 50, &probes, 100, 1).unwrap();
    assert!(!rep.coverage_pass);
}

#[test]
fn cones_pass_both_conditions_at_p4() {
    for kind in [
        ConeKind::Orthant,
        ConeKind::SimpleOrder { r: None },
        ConeKind::TreeOrder,
        ConeKind::Umbrella { peak: 3 },
    ] {
        let r = make_cone(kind, 4).unwrap();
        let probes = default_probes(&r, 1000, 50, 8);
        let rep = verify_conditions(&r, 50, &probes, DEFAULT_NESTING_SAMPLES, 8).unwrap();
        assert!(rep.passed(), "{kind:?}: {} uncovered", rep.uncovered());
    }
}
