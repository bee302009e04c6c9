//! Geometry of the product of spheres `M_k = (S^{k-1})^n`.
//!
//! A point is an `n×k` matrix with unit rows; the tangent space at `σ` holds
//! the matrices whose rows are orthogonal to the matching rows of `σ`. The
//! objective is `f(σ) = ⟨σ, Aσ⟩` with multipliers `Λ = ddiag(Aσσᵀ)`.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{self, Geometry, Multipliers};
use crate::rng::{self, SeededRng};
use crate::symmat::{row_dots, SymmetricMatrix};

pub(crate) const UNIT_TOL: f64 = 1e-10;
pub(crate) const TANGENT_TOL: f64 = 1e-10;

/// A point of `M_k`: `n` unit vectors in `R^k`, stored as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereConfig {
    rows: DMatrix<f64>,
}

impl SphereConfig {
    /// Wraps `rows`, checking every row has unit norm to within 1e-10.
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        check_shape(&rows)?;
        for (i, norm_sq) in row_dots(&rows, &rows).iter().enumerate() {
            if (norm_sq.sqrt() - 1.0).abs() > UNIT_TOL {
                return Err(Error::NotOnManifold(format!(
                    "row {i} has norm {}",
                    norm_sq.sqrt()
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Normalizes each row of `rows`; zero rows are rejected.
    pub fn from_unnormalized(mut rows: DMatrix<f64>) -> Result<Self> {
        check_shape(&rows)?;
        for i in 0..rows.nrows() {
            if !normalize_row(&mut rows, i) {
                return Err(Error::NotOnManifold(format!("row {i} is zero")));
            }
        }
        Ok(Self { rows })
    }

    pub(crate) fn from_raw(rows: DMatrix<f64>) -> Self {
        Self { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn k(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn into_rows(self) -> DMatrix<f64> {
        self.rows
    }

    /// Writes `config n <n> k <k>` followed by one row per line (17 significant digits).
    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        write_rows(w, &format!("config n {} k {}", self.n(), self.k()), &self.rows)
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let (header, rows) = read_rows(r)?;
        match header.as_slice() {
            [c, nk, n, kk, k] if c == "config" && nk == "n" && kk == "k" => {
                let n = parse_dim(n)?;
                let k = parse_dim(k)?;
                Self::new(reshape(rows, n, k)?)
            }
            _ => Err(Error::Parse { line: 1, msg: "expected `config n <n> k <k>`".into() }),
        }
    }
}

/// A tangent vector at some [`SphereConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    rows: DMatrix<f64>,
}

impl TangentField {
    /// Wraps `rows` after checking `⟨uᵢ, σᵢ⟩ = 0` (to 1e-10) against `base`.
    pub fn new(base: &SphereConfig, rows: DMatrix<f64>) -> Result<Self> {
        check_tangent(base.rows(), &rows)?;
        Ok(Self { rows })
    }

    pub fn zeros(base: &SphereConfig) -> Self {
        Self { rows: DMatrix::zeros(base.n(), base.k()) }
    }

    pub(crate) fn from_raw(rows: DMatrix<f64>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn into_rows(self) -> DMatrix<f64> {
        self.rows
    }

    pub fn norm(&self) -> f64 {
        self.rows.norm()
    }

    pub fn dot(&self, other: &TangentField) -> f64 {
        self.rows.dot(&other.rows)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { rows: &self.rows * c }
    }

    /// Unit Frobenius norm copy; `None` for the zero field.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(1.0 / n))
    }
}

/// Riemannian Hessian of `f` at a fixed base point, with `Aσ` and `Λ` cached.
#[derive(Debug, Clone)]
pub struct HessianOperator<'a> {
    a: &'a SymmetricMatrix,
    base: &'a SphereConfig,
    a_sigma: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl<'a> HessianOperator<'a> {
    pub fn new(a: &'a SymmetricMatrix, base: &'a SphereConfig) -> Result<Self> {
        check_dims(a, base.rows())?;
        let a_sigma = a.apply(base.rows());
        let lambda = row_dots(base.rows(), &a_sigma);
        Ok(Self { a, base, a_sigma, lambda })
    }

    pub fn base(&self) -> &SphereConfig {
        self.base
    }

    pub fn a(&self) -> &'a SymmetricMatrix {
        self.a
    }

    /// Diagonal of `Λ = ddiag(Aσσᵀ)`, i.e. `Λᵢ = ⟨σᵢ, (Aσ)ᵢ⟩`.
    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn a_sigma(&self) -> &DMatrix<f64> {
        &self.a_sigma
    }
}

/// Geometry of `(S^{k-1})^n` for the generic solvers.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sphere;

impl Geometry for Sphere {
    fn check_matrix(&self, _a: &SymmetricMatrix) -> Result<()> {
        Ok(())
    }

    fn random_point(&self, n: usize, k: usize, rng: &mut SeededRng) -> DMatrix<f64> {
        random_rows(n, k, rng)
    }

    fn project(&self, sigma: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        project_rows(sigma, v)
    }

    fn retract(&self, sigma: &DMatrix<f64>, u: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        Ok(retract_rows(sigma, u, t))
    }

    fn multipliers(&self, sigma: &DMatrix<f64>, a_sigma: &DMatrix<f64>) -> Multipliers {
        Multipliers::Diagonal(row_dots(sigma, a_sigma))
    }

    fn hessian(
        &self,
        a: &SymmetricMatrix,
        sigma: &DMatrix<f64>,
        a_sigma: &DMatrix<f64>,
        lambda: &Multipliers,
        u: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let Multipliers::Diagonal(l) = lambda else {
            unreachable!("sphere multipliers are diagonal")
        };
        hessian_rows(a, sigma, a_sigma, l, u)
    }
}

pub(crate) fn check_shape(rows: &DMatrix<f64>) -> Result<()> {
    if rows.nrows() == 0 || rows.ncols() == 0 {
        return Err(Error::InvalidParameter(format!(
            "configuration must be at least 1x1, got {}x{}",
            rows.nrows(),
            rows.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_dims(a: &SymmetricMatrix, sigma: &DMatrix<f64>) -> Result<()> {
    if a.n() != sigma.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "matrix order {} but configuration has {} rows",
            a.n(),
            sigma.nrows()
        )));
    }
    Ok(())
}

fn check_same_shape(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    Ok(())
}

pub(crate) fn check_tangent(sigma: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<()> {
    check_same_shape(sigma, u)?;
    let dots = row_dots(sigma, u);
    let norms = row_dots(u, u);
    for i in 0..sigma.nrows() {
        if dots[i].abs() > TANGENT_TOL * norms[i].sqrt().max(1.0) {
            return Err(Error::NotTangent(format!("row {i}: ⟨uᵢ, σᵢ⟩ = {:.3e}", dots[i])));
        }
    }
    Ok(())
}

/// Divides row `i` by its norm; returns false for a zero row.
pub(crate) fn normalize_row(m: &mut DMatrix<f64>, i: usize) -> bool {
    let norm = m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    for v in m.row_mut(i).iter_mut() {
        *v /= norm;
    }
    true
}

pub(crate) fn random_rows(n: usize, k: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    let mut m = geometry::gaussian_matrix(n, k, rng);
    for i in 0..n {
        while !normalize_row(&mut m, i) {
            for v in m.row_mut(i).iter_mut() {
                *v = rng::gaussian(rng);
            }
        }
    }
    m
}

/// `v − ddiag(vσᵀ)σ`.
pub(crate) fn project_rows(sigma: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let dots = row_dots(sigma, v);
    let mut out = v.clone();
    for (mut col, scol) in out.column_iter_mut().zip(sigma.column_iter()) {
        for i in 0..col.len() {
            col[i] -= dots[i] * scol[i];
        }
    }
    out
}

/// Row `i` becomes `(σᵢ + t·uᵢ)/√(1 + t²‖uᵢ‖²)`, then is renormalized.
pub(crate) fn retract_rows(sigma: &DMatrix<f64>, u: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    if t == 0.0 {
        return sigma.clone();
    }
    let usq = row_dots(u, u);
    let mut out = sigma + u * t;
    let (n, k) = out.shape();
    for c in 0..k {
        for i in 0..n {
            out[(i, c)] /= (1.0 + t * t * usq[i]).sqrt();
        }
    }
    for i in 0..n {
        normalize_row(&mut out, i);
    }
    out
}

pub(crate) fn hessian_rows(
    a: &SymmetricMatrix,
    sigma: &DMatrix<f64>,
    a_sigma: &DMatrix<f64>,
    lambda: &DVector<f64>,
    u: &DMatrix<f64>,
) -> DMatrix<f64> {
    let au = a.apply(u);
    // ddiag(Aσuᵀ + Auσᵀ)
    let corr = row_dots(a_sigma, u) + row_dots(&au, sigma);
    let mut v = au;
    for ((mut col, ucol), scol) in v.column_iter_mut().zip(u.column_iter()).zip(sigma.column_iter()) {
        for i in 0..col.len() {
            col[i] = 2.0 * (col[i] - lambda[i] * ucol[i]) - 2.0 * corr[i] * scol[i];
        }
    }
    project_rows(sigma, &v)
}

/// Projection onto the tangent space at `sigma`.
pub fn project_tangent(sigma: &SphereConfig, v: &DMatrix<f64>) -> Result<TangentField> {
    check_same_shape(sigma.rows(), v)?;
    Ok(TangentField::from_raw(project_rows(sigma.rows(), v)))
}

/// `P_{M_k}(σ + t·u)` in closed form.
pub fn retract(sigma: &SphereConfig, u: &TangentField, t: f64) -> Result<SphereConfig> {
    check_same_shape(sigma.rows(), u.rows())?;
    Ok(SphereConfig::from_raw(retract_rows(sigma.rows(), u.rows(), t)))
}

/// `f(σ) = ⟨σ, Aσ⟩`.
pub fn objective(a: &SymmetricMatrix, sigma: &SphereConfig) -> Result<f64> {
    check_dims(a, sigma.rows())?;
    Ok(sigma.rows().dot(&a.apply(sigma.rows())))
}

/// `grad f(σ) = 2(A − Λ)σ`.
pub fn gradient(a: &SymmetricMatrix, sigma: &SphereConfig) -> Result<TangentField> {
    check_dims(a, sigma.rows())?;
    let a_sigma = a.apply(sigma.rows());
    Ok(TangentField::from_raw(gradient_from(sigma.rows(), &a_sigma)))
}

pub(crate) fn gradient_from(sigma: &DMatrix<f64>, a_sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let lambda = row_dots(sigma, a_sigma);
    let mut g = a_sigma.clone();
    for (mut col, scol) in g.column_iter_mut().zip(sigma.column_iter()) {
        for i in 0..col.len() {
            col[i] = 2.0 * (col[i] - lambda[i] * scol[i]);
        }
    }
    g
}

/// `Hess f(σ)[u] = P⊥(2(A − Λ)u − 2 ddiag(Aσuᵀ + Auσᵀ)σ)`.
pub fn hessian_apply(h: &HessianOperator<'_>, u: &TangentField) -> Result<TangentField> {
    check_tangent(h.base.rows(), u.rows())?;
    Ok(TangentField::from_raw(hessian_rows(
        h.a,
        h.base.rows(),
        &h.a_sigma,
        &h.lambda,
        u.rows(),
    )))
}

/// `⟨u, Hess[u]⟩/⟨u, u⟩`, evaluated as `2⟨u, (A − Λ)u⟩/⟨u, u⟩`.
pub fn rayleigh(h: &HessianOperator<'_>, u: &TangentField) -> Result<f64> {
    check_tangent(h.base.rows(), u.rows())?;
    if u.norm() == 0.0 {
        return Err(Error::ZeroTangent);
    }
    let au = h.a.apply(u.rows());
    Ok(geometry::curvature_from_au(
        u.rows(),
        &au,
        &Multipliers::Diagonal(h.lambda.clone()),
    ))
}

/// Rows drawn uniformly on `S^{k-1}` (normalized Gaussians).
pub fn random_config(n: usize, k: usize, seed: u64) -> Result<SphereConfig> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidParameter(format!("need n, k >= 1 (got n = {n}, k = {k})")));
    }
    let mut r = rng::seeded(seed);
    Ok(SphereConfig::from_raw(random_rows(n, k, &mut r)))
}

/// Projected Gaussian tangent with unit Frobenius norm (zero when `k = 1`).
pub fn random_tangent(sigma: &SphereConfig, seed: u64) -> TangentField {
    let mut r = rng::seeded(seed);
    TangentField::from_raw(Sphere.random_tangent(sigma.rows(), &mut r))
}

pub(crate) fn write_rows<W: Write>(mut w: W, header: &str, rows: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "{header}")?;
    let mut line = String::new();
    for i in 0..rows.nrows() {
        line.clear();
        for (j, v) in rows.row(i).iter().enumerate() {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub(crate) fn read_rows<R: BufRead>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut header = None;
    let mut rows = Vec::new();
    for (no, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if header.is_none() {
            header = Some(t.split_whitespace().map(str::to_string).collect());
            continue;
        }
        let row = t
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line: no + 1, msg: e.to_string() })?;
        rows.push(row);
    }
    let header = header.ok_or(Error::Parse { line: 0, msg: "missing header".into() })?;
    Ok((header, rows))
}

pub(crate) fn parse_dim(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Parse { line: 1, msg: format!("bad dimension `{s}`") })
}

pub(crate) fn reshape(rows: Vec<Vec<f64>>, n: usize, k: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {n} rows of {k} values"),
        });
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(n, k, &flat))
}
