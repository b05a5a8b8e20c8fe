//! Closed-form equivariant rules.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::models::{check_spd, BaseDensity, Matrix};

/// `c_m = Gamma(m/2) / (sqrt(2) Gamma((m+1)/2))`, evaluated on the log scale.
pub fn c_m(m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::Argument(format!("c_m needs m >= 2, got {m}")));
    }
    let m = m as f64;
    Ok((libm::lgamma(m / 2.0) - libm::lgamma((m + 1.0) / 2.0) - 0.5 * std::f64::consts::LN_2).exp())
}

/// `(mean, S)` with `S^2` the centered sum of squares.
pub fn mean_and_spread(x: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    let ss = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss.sqrt())
}

/// `mean + eta c S`, the equivariant quantile family.
pub fn quantile_family(x: &[f64], eta: f64, c: f64) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Argument(format!("quantile rule needs m >= 2, got {}", x.len())));
    }
    let (mean, s) = mean_and_spread(x);
    Ok(mean + eta * c * s)
}

/// Best equivariant quantile estimate for normal data: `mean + eta c_m S`.
pub fn quantile_mre(x: &[f64], eta: f64) -> Result<f64> {
    quantile_family(x, eta, c_m(x.len())?)
}

/// `sum a_i (x_i - b_i)` with `b_i` the mean of the `i`-th base density.
pub fn linear_mre(bases: &[BaseDensity], a: &[f64], x: &[f64]) -> Result<f64> {
    if bases.len() != a.len() || a.len() != x.len() {
        return Err(Error::Shape(format!(
            "linear rule needs matching lengths, got {} bases, {} weights, {} observations",
            bases.len(),
            a.len(),
            x.len()
        )));
    }
    Ok(bases
        .iter()
        .zip(a)
        .zip(x)
        .map(|((b, a), x)| a * (x - b.mean()))
        .sum())
}

/// `L A L'` with `L` the lower Cholesky factor of `S` (positive diagonal).
pub fn cov_equivariant(s: &Matrix, a: &[f64]) -> Result<Matrix> {
    if s.nrows() != s.ncols() || s.nrows() != a.len() {
        return Err(Error::Shape(format!(
            "S is {}x{} but A has {} diagonal entries",
            s.nrows(),
            s.ncols(),
            a.len()
        )));
    }
    if a.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Argument(format!("diagonal entries must be positive, got {a:?}")));
    }
    check_spd(s).map_err(|e| Error::Decomposition(e.to_string()))?;
    let l = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Decomposition("S is not positive definite".into()))?
        .l();
    let la = &l * Matrix::from_diagonal(&DVector::from_column_slice(a));
    Ok(&la * l.transpose())
}

/// `A0 = diag(1 / (m + p - 2i + 1))`, `i = 1..p`.
pub fn a0(m: usize, p: usize) -> Result<Vec<f64>> {
    if p == 0 || m < p {
        return Err(Error::Argument(format!("A0 needs 1 <= p <= m, got m = {m}, p = {p}")));
    }
    Ok((1..=p).map(|i| 1.0 / (m + p + 1 - 2 * i) as f64).collect())
}
