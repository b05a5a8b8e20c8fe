//! Invariant probability families: location, scale, location-scale,
//! multivariate location and Wishart models over a small catalogue of base
//! densities.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Substreams;
use crate::special::LN_SQRT_2PI;

pub type Matrix = DMatrix<f64>;

/// Acting group of the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    Location,
    Scale,
    LocationScale,
    MultivariateLocation,
    Wishart,
}

impl GroupKind {
    pub const ALL: [GroupKind; 5] = [
        GroupKind::Location,
        GroupKind::Scale,
        GroupKind::LocationScale,
        GroupKind::MultivariateLocation,
        GroupKind::Wishart,
    ];
}

/// Standardized base density `f(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseDensity {
    Normal,
    /// `exp(-z)` on `z > 0`.
    Exponential,
    /// `z^(shape-1) exp(-z) / Gamma(shape)` on `z > 0`.
    Gamma { shape: f64 },
    /// Indicator of `(0, 1)`.
    UniformUnit,
}

impl BaseDensity {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BaseDensity::Gamma { shape } if !(shape > 0.0 && shape.is_finite()) => Err(
                Error::Argument(format!("gamma shape must be positive, got {shape}")),
            ),
            _ => Ok(()),
        }
    }

    /// Open support `(lo, hi)`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            BaseDensity::Normal => (f64::NEG_INFINITY, f64::INFINITY),
            BaseDensity::Exponential | BaseDensity::Gamma { .. } => (0.0, f64::INFINITY),
            BaseDensity::UniformUnit => (0.0, 1.0),
        }
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        match *self {
            BaseDensity::Normal => -0.5 * z * z - LN_SQRT_2PI,
            BaseDensity::Exponential => {
                if z > 0.0 {
                    -z
                } else if z == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            BaseDensity::Gamma { shape } => {
                if z > 0.0 {
                    (shape - 1.0) * z.ln() - z - libm::lgamma(shape)
                } else if z == 0.0 && shape == 1.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            BaseDensity::UniformUnit => {
                if (0.0..=1.0).contains(&z) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.ln_pdf(z).exp()
    }

    /// `E[Z]` under the base density.
    pub fn mean(&self) -> f64 {
        match *self {
            BaseDensity::Normal => 0.0,
            BaseDensity::Exponential => 1.0,
            BaseDensity::Gamma { shape } => shape,
            BaseDensity::UniformUnit => 0.5,
        }
    }

    /// A characteristic width, used to seed quadrature windows.
    pub fn spread(&self) -> f64 {
        match *self {
            BaseDensity::Normal | BaseDensity::Exponential => 1.0,
            BaseDensity::Gamma { shape } => shape.sqrt().max(0.25),
            BaseDensity::UniformUnit => 0.25,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            BaseDensity::Normal => rng.sample(StandardNormal),
            BaseDensity::Exponential => rng.sample(Exp1),
            BaseDensity::Gamma { shape } => Gamma::new(shape, 1.0)
                .expect("validated gamma shape")
                .sample(rng),
            BaseDensity::UniformUnit => rng.random::<f64>(),
        }
    }
}

/// An invariant family together with its per-replicate sample layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: GroupKind,
    pub base: BaseDensity,
    /// Observations per replicate; the degrees of freedom for Wishart.
    pub m: usize,
    /// Dimension of each observation (1 for scalar families).
    #[serde(default = "one")]
    pub p: usize,
}

fn one() -> usize {
    1
}

impl ModelSpec {
    pub fn location(base: BaseDensity, m: usize) -> Self {
        Self {
            kind: GroupKind::Location,
            base,
            m,
            p: 1,
        }
    }

    pub fn scale(base: BaseDensity, m: usize) -> Self {
        Self {
            kind: GroupKind::Scale,
            base,
            m,
            p: 1,
        }
    }

    /// `p` independent scale components, `m` observations each.
    pub fn scale_components(base: BaseDensity, m: usize, p: usize) -> Self {
        Self {
            kind: GroupKind::Scale,
            base,
            m,
            p,
        }
    }

    pub fn location_scale(base: BaseDensity, m: usize) -> Self {
        Self {
            kind: GroupKind::LocationScale,
            base,
            m,
            p: 1,
        }
    }

    pub fn multivariate_location(base: BaseDensity, m: usize, p: usize) -> Self {
        Self {
            kind: GroupKind::MultivariateLocation,
            base,
            m,
            p,
        }
    }

    pub fn wishart(p: usize, dof: usize) -> Self {
        Self {
            kind: GroupKind::Wishart,
            base: BaseDensity::Normal,
            m: dof,
            p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.m == 0 || self.p == 0 {
            return Err(Error::Argument("m and p must be positive".into()));
        }
        match self.kind {
            GroupKind::Location | GroupKind::LocationScale if self.p != 1 => Err(Error::Argument(
                format!("{:?} models are scalar (p = 1), got p = {}", self.kind, self.p),
            )),
            GroupKind::LocationScale if self.m < 2 => Err(Error::Argument(
                "location-scale models require m >= 2".into(),
            )),
            GroupKind::Wishart if self.m < self.p => Err(Error::Argument(format!(
                "Wishart degrees of freedom m = {} must be at least p = {}",
                self.m, self.p
            ))),
            GroupKind::Wishart if self.base != BaseDensity::Normal => Err(Error::Argument(
                "Wishart models are built from normal vectors".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Number of scalars in one replicate (vector kinds only).
    pub fn replicate_width(&self) -> usize {
        match self.kind {
            GroupKind::Wishart => self.p * self.p,
            _ => self.m * self.p,
        }
    }
}

/// A point of the parameter space. Only the components relevant to the
/// model's group kind are populated.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterPoint {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub location: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scale: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rows")]
    pub covariance: Option<Matrix>,
}

impl ParameterPoint {
    pub fn location(mu: f64) -> Self {
        Self {
            location: vec![mu],
            ..Self::default()
        }
    }

    pub fn locations(mu: Vec<f64>) -> Self {
        Self {
            location: mu,
            ..Self::default()
        }
    }

    pub fn scale(sigma: f64) -> Self {
        Self {
            scale: vec![sigma],
            ..Self::default()
        }
    }

    pub fn scales(sigma: Vec<f64>) -> Self {
        Self {
            scale: sigma,
            ..Self::default()
        }
    }

    pub fn location_scale(mu: f64, sigma: f64) -> Self {
        Self {
            location: vec![mu],
            scale: vec![sigma],
            covariance: None,
        }
    }

    pub fn covariance(sigma: Matrix) -> Self {
        Self {
            covariance: Some(sigma),
            ..Self::default()
        }
    }

    pub fn mu(&self) -> f64 {
        self.location.first().copied().unwrap_or(0.0)
    }

    pub fn sigma(&self) -> f64 {
        self.scale.first().copied().unwrap_or(1.0)
    }

    /// Checks positivity/definiteness and that the populated components
    /// match `model`.
    pub fn validate_for(&self, model: &ModelSpec) -> Result<()> {
        if self.scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::ParameterDomain(format!(
                "scale components must be positive: {:?}",
                self.scale
            )));
        }
        if self.location.iter().any(|m| !m.is_finite()) {
            return Err(Error::ParameterDomain("non-finite location".into()));
        }
        let shape_err = |what: &str| {
            Err(Error::ParameterDomain(format!(
                "{what} for a {:?} model with p = {}: {self:?}",
                model.kind, model.p
            )))
        };
        match model.kind {
            GroupKind::Location if self.location.len() != 1 => shape_err("expected one location"),
            GroupKind::Scale if self.scale.len() != model.p => shape_err("expected p scales"),
            GroupKind::LocationScale if self.location.len() != 1 || self.scale.len() != 1 => {
                shape_err("expected (mu, sigma)")
            }
            GroupKind::MultivariateLocation if self.location.len() != model.p => {
                shape_err("expected p locations")
            }
            GroupKind::Wishart => match &self.covariance {
                Some(sigma) if sigma.nrows() == model.p && sigma.ncols() == model.p => {
                    check_spd(sigma)
                }
                _ => shape_err("expected a p x p covariance"),
            },
            _ => Ok(()),
        }
    }
}

/// Symmetric with all eigenvalues positive (checked through Cholesky).
pub fn check_spd(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::ParameterDomain("covariance must be square".into()));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::ParameterDomain("covariance must be symmetric".into()));
    }
    if m.iter().any(|v| !v.is_finite()) || m.clone().cholesky().is_none() {
        return Err(Error::ParameterDomain("covariance must be positive definite".into()));
    }
    Ok(())
}

/// One replicate: `m * p` scalars (observation-major) or a Wishart matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum DataPoint {
    Vector(Vec<f64>),
    Matrix(Matrix),
}

impl DataPoint {
    pub fn as_vector(&self) -> Result<&[f64]> {
        match self {
            DataPoint::Vector(v) => Ok(v),
            DataPoint::Matrix(_) => Err(Error::Shape("expected vector data, got a matrix".into())),
        }
    }

    pub fn as_matrix(&self) -> Result<&Matrix> {
        match self {
            DataPoint::Matrix(m) => Ok(m),
            DataPoint::Vector(_) => Err(Error::Shape("expected matrix data, got a vector".into())),
        }
    }
}

/// Replicate draws, one replicate per row.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSample {
    Vectors { width: usize, values: Vec<f64> },
    Matrices(Vec<Matrix>),
}

impl DataSample {
    pub fn len(&self) -> usize {
        match self {
            DataSample::Vectors { width, values } => values.len() / width,
            DataSample::Matrices(ms) => ms.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> Option<&[f64]> {
        match self {
            DataSample::Vectors { width, values } => values.get(i * width..(i + 1) * width),
            DataSample::Matrices(_) => None,
        }
    }

    pub fn point(&self, i: usize) -> DataPoint {
        match self {
            DataSample::Vectors { .. } => DataPoint::Vector(self.row(i).expect("in range").to_vec()),
            DataSample::Matrices(ms) => DataPoint::Matrix(ms[i].clone()),
        }
    }
}

/// Draws replicate `index` of the run seeded by `streams`. The draw is a
/// group transformation of standardized noise, so the same index at `g theta`
/// yields `g` applied to the draw at `theta`.
pub fn draw_replicate(
    model: &ModelSpec,
    theta: &ParameterPoint,
    streams: &Substreams,
    index: u64,
) -> DataPoint {
    let mut rng = streams.stream(index);
    let base = model.base;
    match model.kind {
        GroupKind::Location => {
            let mu = theta.location[0];
            DataPoint::Vector((0..model.m).map(|_| mu + base.draw(&mut rng)).collect())
        }
        GroupKind::Scale => {
            let mut out = Vec::with_capacity(model.m * model.p);
            for _ in 0..model.m {
                for j in 0..model.p {
                    out.push(theta.scale[j] * base.draw(&mut rng));
                }
            }
            DataPoint::Vector(out)
        }
        GroupKind::LocationScale => {
            let (mu, sigma) = (theta.location[0], theta.scale[0]);
            DataPoint::Vector(
                (0..model.m)
                    .map(|_| mu + sigma * base.draw(&mut rng))
                    .collect(),
            )
        }
        GroupKind::MultivariateLocation => {
            let mut out = Vec::with_capacity(model.m * model.p);
            for _ in 0..model.m {
                for j in 0..model.p {
                    out.push(theta.location[j] + base.draw(&mut rng));
                }
            }
            DataPoint::Vector(out)
        }
        GroupKind::Wishart => {
            let sigma = theta.covariance.as_ref().expect("validated covariance");
            let chol = sigma.clone().cholesky().expect("validated SPD").l();
            DataPoint::Matrix(bartlett(&chol, model.m, &mut rng))
        }
    }
}

/// Bartlett construction: `S = L A A' L'` with `A` lower triangular,
/// `A_ii^2 ~ chi^2(m - i + 1)` and standard normal entries below the diagonal.
fn bartlett<R: Rng + ?Sized>(chol: &Matrix, dof: usize, rng: &mut R) -> Matrix {
    let p = chol.nrows();
    let mut a = Matrix::zeros(p, p);
    for i in 0..p {
        let k = (dof - i) as f64;
        let c: f64 = ChiSquared::new(k).expect("positive dof").sample(rng);
        a[(i, i)] = c.sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = chol * a;
    let s = &la * la.transpose();
    // symmetrize away rounding
    (&s + s.transpose()) * 0.5
}

/// Draws `replicates` independent replicates. Replicate `i` depends only on
/// `(seed, i)`, so the result is identical for any worker count.
pub fn sample(
    model: &ModelSpec,
    theta: &ParameterPoint,
    replicates: usize,
    seed: u64,
) -> Result<DataSample> {
    model.validate()?;
    theta.validate_for(model)?;
    let streams = Substreams::new(seed);
    let points: Vec<DataPoint> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| draw_replicate(model, theta, &streams, i))
        .collect();
    Ok(match model.kind {
        GroupKind::Wishart => DataSample::Matrices(
            points
                .into_iter()
                .map(|p| match p {
                    DataPoint::Matrix(m) => m,
                    DataPoint::Vector(_) => unreachable!(),
                })
                .collect(),
        ),
        _ => {
            let width = model.replicate_width();
            let mut values = Vec::with_capacity(width * replicates);
            for p in points {
                if let DataPoint::Vector(v) = p {
                    values.extend(v);
                }
            }
            DataSample::Vectors { width, values }
        }
    })
}

/// Log joint density of one replicate.
pub fn log_density(model: &ModelSpec, theta: &ParameterPoint, x: &DataPoint) -> Result<f64> {
    theta.validate_for(model)?;
    let base = model.base;
    match model.kind {
        GroupKind::Wishart => {
            let s = x.as_matrix()?;
            if s.nrows() != model.p || s.ncols() != model.p {
                return Err(Error::Shape(format!(
                    "expected a {0}x{0} matrix, got {1}x{2}",
                    model.p,
                    s.nrows(),
                    s.ncols()
                )));
            }
            wishart_log_density(theta.covariance.as_ref().expect("validated"), s, model.m)
        }
        _ => {
            let v = x.as_vector()?;
            if v.len() != model.replicate_width() {
                return Err(Error::Shape(format!(
                    "expected {} values per replicate, got {}",
                    model.replicate_width(),
                    v.len()
                )));
            }
            let p = model.p;
            let total = v
                .iter()
                .enumerate()
                .map(|(k, &xi)| match model.kind {
                    GroupKind::Location => base.ln_pdf(xi - theta.location[0]),
                    GroupKind::MultivariateLocation => base.ln_pdf(xi - theta.location[k % p]),
                    GroupKind::Scale => {
                        let s = theta.scale[k % p];
                        base.ln_pdf(xi / s) - s.ln()
                    }
                    GroupKind::LocationScale => {
                        let (mu, s) = (theta.location[0], theta.scale[0]);
                        base.ln_pdf((xi - mu) / s) - s.ln()
                    }
                    GroupKind::Wishart => unreachable!(),
                })
                .sum();
            Ok(total)
        }
    }
}

/// Joint density of one replicate at `x`.
pub fn density(model: &ModelSpec, theta: &ParameterPoint, x: &DataPoint) -> Result<f64> {
    log_density(model, theta, x).map(f64::exp)
}

fn wishart_log_density(sigma: &Matrix, s: &Matrix, dof: usize) -> Result<f64> {
    let p = sigma.nrows();
    let n = dof as f64;
    let cs = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::ParameterDomain("covariance is not SPD".into()))?;
    let Some(css) = s.clone().cholesky() else {
        return Ok(f64::NEG_INFINITY);
    };
    let ln_det = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| -> f64 {
        2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    };
    let trace = cs.solve(s).trace();
    let pf = p as f64;
    let ln_mgamma = pf * (pf - 1.0) / 4.0 * std::f64::consts::PI.ln()
        + (0..p).map(|j| libm::lgamma((n - j as f64) / 2.0)).sum::<f64>();
    Ok((n - pf - 1.0) / 2.0 * ln_det(&css)
        - 0.5 * trace
        - n * pf / 2.0 * std::f64::consts::LN_2
        - n / 2.0 * ln_det(&cs)
        - ln_mgamma)
}

/// Serde helpers storing matrices as a list of rows.
pub mod rows {
    use super::Matrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix, String> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err("matrix rows have unequal lengths".into());
        }
        Ok(Matrix::from_fn(n, k, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

mod opt_rows {
    use super::{rows, Matrix};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Matrix>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(rows::to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Matrix>, D::Error> {
        let r = Option::<Vec<Vec<f64>>>::deserialize(d)?;
        r.map(|r| rows::from_rows(&r).map_err(serde::de::Error::custom))
            .transpose()
    }
}
