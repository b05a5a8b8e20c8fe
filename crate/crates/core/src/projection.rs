//! Euclidean projection onto convex restricted parameter spaces.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::models::{Matrix, ParameterPoint};
use crate::restriction::{coordinate, scale_product, Coordinate, Restriction};

/// Stopping threshold on the change of the Dykstra state over one sweep.
pub const DYKSTRA_TOL: f64 = 1e-10;
pub const DYKSTRA_MAX_SWEEPS: usize = 100_000;

/// Weighted least-squares isotonic (nondecreasing) fit by pool-adjacent-violators.
pub fn pava_weighted(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len(), "values and weights differ in length");
    // blocks of (weighted mean, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&v, &wt) in y.iter().zip(w) {
        blocks.push((v, wt, 1));
        while blocks.len() >= 2 {
            let (m2, w2, n2) = blocks[blocks.len() - 1];
            let (m1, w1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let tw = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 + m2 * w2) / tw, tw, n1 + n2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// Projection onto `{x_1 <= x_2 <= ... <= x_n}`.
pub fn pava(y: &[f64]) -> Vec<f64> {
    pava_weighted(y, &vec![1.0; y.len()])
}

/// Dykstra's alternating projections onto the half-spaces `c_i . x >= 0`.
pub fn dykstra(constraints: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    let q = constraints.nrows();
    let p = constraints.ncols();
    if x.len() != p {
        return Err(Error::Shape(format!("point has length {}, cone expects {p}", x.len())));
    }
    let rows: Vec<DVector<f64>> = (0..q)
        .map(|i| constraints.row(i).transpose().into_owned())
        .collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.norm_squared()).collect();
    let mut cur = DVector::from_column_slice(x);
    let mut increments = vec![DVector::<f64>::zeros(p); q];
    let scale = 1.0 + cur.amax();
    let mut gap = f64::INFINITY;
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let mut change = 0.0;
        for i in 0..q {
            let shifted = &cur + &increments[i];
            let dot = rows[i].dot(&shifted);
            let next = if dot < 0.0 {
                &shifted - &rows[i] * (dot / norms[i])
            } else {
                shifted.clone()
            };
            let new_inc = &shifted - &next;
            change += (&next - &cur).norm_squared() + (&new_inc - &increments[i]).norm_squared();
            increments[i] = new_inc;
            cur = next;
        }
        gap = change.sqrt();
        if gap < DYKSTRA_TOL * scale {
            return Ok(cur.iter().copied().collect());
        }
    }
    Err(Error::convergence("Dykstra projection", gap))
}

/// Detects `C` rows of the form `e_{k+1} - e_k` over a consecutive run and
/// returns the covered coordinate range.
fn simple_order_span(c: &Matrix) -> Option<(usize, usize)> {
    let (q, p) = c.shape();
    let start = (0..p).find(|&j| c[(0, j)] != 0.0)?;
    if start + q >= p {
        return None;
    }
    for i in 0..q {
        for j in 0..p {
            let expected = if j == start + i {
                -1.0
            } else if j == start + i + 1 {
                1.0
            } else {
                0.0
            };
            if c[(i, j)] != expected {
                return None;
            }
        }
    }
    Some((start, start + q + 1))
}

/// Detects rows with a single positive entry in distinct columns.
fn orthant_coordinates(c: &Matrix) -> Option<Vec<usize>> {
    let mut cols = Vec::with_capacity(c.nrows());
    for i in 0..c.nrows() {
        let nz: Vec<usize> = (0..c.ncols()).filter(|&j| c[(i, j)] != 0.0).collect();
        if nz.len() != 1 || c[(i, nz[0])] <= 0.0 || cols.contains(&nz[0]) {
            return None;
        }
        cols.push(nz[0]);
    }
    Some(cols)
}

/// Projection of a point onto a polyhedral cone.
pub fn project_cone(constraints: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != constraints.ncols() {
        return Err(Error::Shape(format!(
            "point has length {}, cone expects {}",
            x.len(),
            constraints.ncols()
        )));
    }
    if let Some((lo, hi)) = simple_order_span(constraints) {
        let mut out = x.to_vec();
        out[lo..hi].copy_from_slice(&pava(&x[lo..hi]));
        return Ok(out);
    }
    if let Some(cols) = orthant_coordinates(constraints) {
        let mut out = x.to_vec();
        for j in cols {
            out[j] = out[j].max(0.0);
        }
        return Ok(out);
    }
    let approx = dykstra(constraints, x)?;
    Ok(polish(constraints, x, approx))
}

/// Replaces an iterative cone projection by the exact projection onto the
/// subspace cut out by its active constraints, when that point is feasible
/// and the multipliers are non-negative (so it satisfies KKT exactly).
fn polish(constraints: &Matrix, x: &[f64], approx: Vec<f64>) -> Vec<f64> {
    let p = x.len();
    let y = DVector::from_column_slice(&approx);
    let xv = DVector::from_column_slice(x);
    let scale = 1.0 + xv.amax();
    let active: Vec<usize> = (0..constraints.nrows())
        .filter(|&i| constraints.row(i).transpose().dot(&y) <= 1e-6 * scale)
        .collect();
    if active.is_empty() {
        return approx;
    }
    let a = Matrix::from_fn(active.len(), p, |i, j| constraints[(active[i], j)]);
    let Ok(gram_inv) = (&a * a.transpose()).pseudo_inverse(1e-12) else {
        return approx;
    };
    // x = z + A' nu with A z = 0; KKT needs nu <= 0 for c.z >= 0 rows
    let nu = &gram_inv * (&a * &xv);
    let z = &xv - a.transpose() * &nu;
    let feasible = (0..constraints.nrows())
        .all(|i| constraints.row(i).transpose().dot(&z) >= -1e-14 * scale);
    let tol = 1e-9 * scale;
    if feasible && nu.iter().all(|&v| v <= tol) && (&z - &y).amax() <= 1e-6 * scale {
        z.iter().copied().collect()
    } else {
        approx
    }
}

/// Projection onto `{s > 0 : prod s_i^{r_i} >= c}` for positive exponents.
/// KKT: `s_i = (sigma_i + sqrt(sigma_i^2 + 4 lambda r_i)) / 2`, with lambda
/// found by bisection on the active constraint.
fn project_scale_product(exponents: &[f64], bound: f64, sigma: &[f64]) -> Result<Vec<f64>> {
    if exponents.iter().any(|&r| r <= 0.0) {
        return Err(Error::UnsupportedProjection(
            "scale-product sets with non-positive exponents are not convex".into(),
        ));
    }
    if scale_product(exponents, sigma) >= bound {
        return Ok(sigma.to_vec());
    }
    let target = bound.ln();
    let at = |lambda: f64| -> Vec<f64> {
        sigma
            .iter()
            .zip(exponents)
            .map(|(s, r)| 0.5 * (s + (s * s + 4.0 * lambda * r).sqrt()))
            .collect()
    };
    let g = |lambda: f64| -> f64 {
        at(lambda)
            .iter()
            .zip(exponents)
            .map(|(s, r)| r * s.ln())
            .sum()
    };
    let mut hi = 1.0;
    while g(hi) < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::convergence("scale-product projection", f64::INFINITY));
        }
    }
    let mut lo = 0.0;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // upper end of the bracket satisfies the constraint
    Ok(at(hi))
}

/// Euclidean (Frobenius for covariances) projection onto the restriction.
pub fn project(restriction: &Restriction, x: &ParameterPoint) -> Result<ParameterPoint> {
    restriction.validate()?;
    restriction.check_shape(x)?;
    let mut out = x.clone();
    match restriction {
        Restriction::HalfLineLower { bound, parameter } => {
            let v = coordinate(x, *parameter).max(*bound);
            set_coordinate(&mut out, *parameter, v);
        }
        Restriction::HalfLineUpper { bound, parameter } => {
            let v = coordinate(x, *parameter).min(*bound);
            set_coordinate(&mut out, *parameter, v);
        }
        Restriction::Interval { lower, upper, .. } => {
            out.location[0] = x.location[0].clamp(*lower, *upper);
        }
        Restriction::PolyhedralCone { constraints } => {
            out.location = project_cone(constraints, &x.location)?;
        }
        Restriction::ScaleProduct { exponents, bound } => {
            out.scale = project_scale_product(exponents, *bound, &x.scale)?;
        }
        Restriction::QuantileCone { eta } => {
            // closure {mu + eta sigma >= 0, sigma >= 0}: nearest of the point
            // itself, its projections on the two faces, and the apex
            let (mu, sigma) = (x.location[0], x.scale[0]);
            let feasible = |m: f64, s: f64| s >= 0.0 && m + eta * s >= 0.0;
            let norm2 = 1.0 + eta * eta;
            let t = (mu + eta * sigma) / norm2;
            // put the face candidate exactly on mu + eta sigma = 0
            let face_sigma = sigma - eta * t;
            let candidates = [
                (mu, sigma),
                (-eta * face_sigma, face_sigma),
                (mu.max(0.0), 0.0),
                (0.0, 0.0),
            ];
            let (m, s) = candidates
                .into_iter()
                .filter(|&(m, s)| feasible(m, s) || (m == 0.0 && s == 0.0))
                .min_by(|a, b| {
                    let da = (a.0 - mu).powi(2) + (a.1 - sigma).powi(2);
                    let db = (b.0 - mu).powi(2) + (b.1 - sigma).powi(2);
                    da.total_cmp(&db)
                })
                .expect("apex is always a candidate");
            out.location[0] = m;
            out.scale[0] = s;
        }
        Restriction::QuantileBox { lower, scale_lower } => {
            out.location[0] = x.location[0].max(*lower);
            out.scale[0] = x.scale[0].max(*scale_lower);
        }
        Restriction::CovDet { .. } => {
            return Err(Error::UnsupportedProjection(
                "the determinant restriction is not convex".into(),
            ))
        }
        Restriction::CovTrace { bound, p } => {
            let sigma = x.covariance.as_ref().expect("shape checked");
            let tr = sigma.trace();
            if tr < *bound {
                let add = (bound - tr) / *p as f64;
                out.covariance = Some(sigma + Matrix::identity(*p, *p) * add);
            }
        }
    }
    Ok(out)
}

fn set_coordinate(theta: &mut ParameterPoint, c: Coordinate, v: f64) {
    match c {
        Coordinate::Location => theta.location[0] = v,
        Coordinate::Scale => theta.scale[0] = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restriction::{make_cone, ConeKind};

    #[test]
    fn projection_examples() {
        let iv = Restriction::Interval {
            lower: -1.0,
            upper: 1.0,
            scale_unknown: false,
        };
        assert_eq!(project(&iv, &ParameterPoint::location(2.0)).unwrap().location, vec![1.0]);
        let so = make_cone(ConeKind::SimpleOrder { r: None }, 3).unwrap();
        let p = project(&so, &ParameterPoint::locations(vec![3.0, 1.0, 2.0])).unwrap();
        assert_eq!(p.location, vec![2.0, 2.0, 2.0]);
        let orth = make_cone(ConeKind::Orthant, 2).unwrap();
        let p = project(&orth, &ParameterPoint::locations(vec![-1.0, 2.0])).unwrap();
        assert_eq!(p.location, vec![0.0, 2.0]);
    }

    #[test]
    fn det_projection_unsupported() {
        let r = Restriction::CovDet { bound: 1.0, p: 2 };
        let err = project(&r, &ParameterPoint::covariance(Matrix::identity(2, 2) * 0.5));
        assert!(matches!(err, Err(Error::UnsupportedProjection(_))));
    }

    #[test]
    fn trace_projection_adds_identity() {
        let r = Restriction::CovTrace { bound: 4.0, p: 2 };
        let p = project(&r, &ParameterPoint::covariance(Matrix::identity(2, 2))).unwrap();
        assert_eq!(p.covariance.unwrap(), Matrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn dykstra_agrees_with_pava_on_simple_order() {
        let Restriction::PolyhedralCone { constraints } =
            make_cone(ConeKind::SimpleOrder { r: None }, 5).unwrap()
        else {
            unreachable!()
        };
        let x = [4.0, -1.0, 3.0, 0.5, 0.0];
        let a = dykstra(&constraints, &x).unwrap();
        let b = pava(&x);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-6, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn pava_partial_order_leaves_tail() {
        let so = make_cone(ConeKind::SimpleOrder { r: Some(2) }, 3).unwrap();
        let p = project(&so, &ParameterPoint::locations(vec![3.0, 1.0, -7.0])).unwrap();
        assert_eq!(p.location, vec![2.0, 2.0, -7.0]);
    }

    #[test]
    fn scale_product_projection_is_on_boundary() {
        let r = Restriction::ScaleProduct {
            exponents: vec![1.0, 1.0],
            bound: 4.0,
        };
        let p = project(&r, &ParameterPoint::scales(vec![1.0, 1.0])).unwrap();
        // symmetric case: (2, 2)
        assert!((p.scale[0] - 2.0).abs() < 1e-9 && (p.scale[1] - 2.0).abs() < 1e-9);
        assert!(r.contains(&p).unwrap());
        let mixed = Restriction::ScaleProduct {
            exponents: vec![2.0, -1.0],
            bound: 1.0,
        };
        assert!(matches!(
            project(&mixed, &ParameterPoint::scales(vec![0.1, 1.0])),
            Err(Error::UnsupportedProjection(_))
        ));
    }

    #[test]
    fn quantile_cone_projection() {
        let r = Restriction::QuantileCone { eta: 1.0 };
        let p = project(&r, &ParameterPoint::location_scale(-3.0, 1.0)).unwrap();
        assert!((p.location[0] + 2.0).abs() < 1e-9 && (p.scale[0] - 2.0).abs() < 1e-9);
        let r = Restriction::QuantileCone { eta: -1.0 };
        let p = project(&r, &ParameterPoint::location_scale(-5.0, 1.0)).unwrap();
        assert!(p.location[0].abs() < 1e-9 && p.scale[0].abs() < 1e-9);
        assert!(r.contains(&p).unwrap());
    }
}
