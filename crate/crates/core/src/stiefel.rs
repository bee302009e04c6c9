//! Geometry of `M_{o,d,k} = O(d,k)^m` for the rank-k Orthogonal-Cut problem.
//!
//! A point is an `(m·d)×k` matrix whose `m` consecutive `d×k` row blocks have
//! orthonormal rows (`σᵢᵀσᵢ = I_d` for the `k×d` frame `σᵢ`). The tangent
//! space at `σ` holds `u` with `sym(uᵢσᵢᵀ) = 0` in every block. With `d = 1`
//! everything reduces to [`crate::sphere`], and the code routes through it so
//! the two pipelines agree bit for bit.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DMatrixView, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{self, Geometry, Multipliers};
use crate::rng::{self, SeededRng};
use crate::sphere;
use crate::symmat::SymmetricMatrix;

const ORTHO_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-12;

/// A point of `O(d,k)^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelConfig {
    m: usize,
    d: usize,
    rows: DMatrix<f64>,
}

impl StiefelConfig {
    /// Wraps `rows` (`(m·d)×k`), checking `‖σᵢσᵢᵀ − I_d‖_F ≤ 1e-9` per block.
    pub fn new(d: usize, rows: DMatrix<f64>) -> Result<Self> {
        let m = block_count(d, &rows)?;
        for t in 0..m {
            let b = rows.rows(t * d, d);
            let err = (&b * b.transpose() - DMatrix::identity(d, d)).norm();
            if err > ORTHO_TOL {
                return Err(Error::NotOnManifold(format!(
                    "block {t} deviates from orthonormal by {err:.3e}"
                )));
            }
        }
        Ok(Self { m, d, rows })
    }

    pub(crate) fn from_raw(d: usize, rows: DMatrix<f64>) -> Self {
        Self { m: rows.nrows() / d, d, rows }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// Block `i` as a `d×k` view (the transpose of the frame `σᵢ ∈ O(d,k)`).
    pub fn block(&self, i: usize) -> DMatrixView<'_, f64> {
        self.rows.rows(i * self.d, self.d)
    }

    pub fn into_rows(self) -> DMatrix<f64> {
        self.rows
    }

    pub fn write_text<W: Write>(&self, w: W) -> Result<()> {
        let header = format!("occonfig m {} d {} k {}", self.m, self.d, self.k());
        sphere::write_rows(w, &header, &self.rows)
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let (header, rows) = sphere::read_rows(r)?;
        match header.as_slice() {
            [c, mk, m, dk, d, kk, k] if c == "occonfig" && mk == "m" && dk == "d" && kk == "k" => {
                let m = sphere::parse_dim(m)?;
                let d = sphere::parse_dim(d)?;
                let k = sphere::parse_dim(k)?;
                Self::new(d, sphere::reshape(rows, m * d, k)?)
            }
            _ => Err(Error::Parse {
                line: 1,
                msg: "expected `occonfig m <m> d <d> k <k>`".into(),
            }),
        }
    }
}

/// A tangent vector at some [`StiefelConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelTangent {
    rows: DMatrix<f64>,
}

impl StiefelTangent {
    /// Checks `σᵢᵀuᵢ + uᵢᵀσᵢ = 0` to 1e-9 in every block.
    pub fn new(base: &StiefelConfig, rows: DMatrix<f64>) -> Result<Self> {
        if rows.shape() != base.rows.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                rows.shape(),
                base.rows.shape()
            )));
        }
        let d = base.d;
        for t in 0..base.m {
            let s = sym(&(rows.rows(t * d, d) * base.block(t).transpose()));
            if s.norm() > ORTHO_TOL * rows.rows(t * d, d).norm().max(1.0) {
                return Err(Error::NotTangent(format!("block {t}: ‖sym(uσᵀ)‖ = {:.3e}", s.norm())));
            }
        }
        Ok(Self { rows })
    }

    pub(crate) fn from_raw(rows: DMatrix<f64>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn norm(&self) -> f64 {
        self.rows.norm()
    }
}

/// Geometry of `O(d,k)^m` for the generic solvers.
#[derive(Debug, Clone, Copy)]
pub struct Stiefel {
    pub d: usize,
}

impl Geometry for Stiefel {
    fn check_matrix(&self, a: &SymmetricMatrix) -> Result<()> {
        match a.block_dim() {
            Some(d) if d == self.d => Ok(()),
            Some(d) => Err(Error::DimensionMismatch(format!(
                "matrix block dimension {d}, manifold block dimension {}",
                self.d
            ))),
            None => Err(Error::MissingBlockStructure),
        }
    }

    fn random_point(&self, n: usize, k: usize, rng: &mut SeededRng) -> DMatrix<f64> {
        if self.d == 1 {
            return sphere::random_rows(n, k, rng);
        }
        let mut g = geometry::gaussian_matrix(n, k, rng);
        for t in 0..n / self.d {
            while !gram_schmidt_block(&mut g, t * self.d, self.d) {
                for i in t * self.d..(t + 1) * self.d {
                    for v in g.row_mut(i).iter_mut() {
                        *v = rng::gaussian(rng);
                    }
                }
            }
        }
        g
    }

    fn project(&self, sigma: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        if self.d == 1 {
            return sphere::project_rows(sigma, v);
        }
        project_blocks(self.d, sigma, v)
    }

    fn retract(&self, sigma: &DMatrix<f64>, u: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        if self.d == 1 {
            return Ok(sphere::retract_rows(sigma, u, t));
        }
        polar_retract(self.d, sigma, u, t)
    }

    fn multipliers(&self, sigma: &DMatrix<f64>, a_sigma: &DMatrix<f64>) -> Multipliers {
        if self.d == 1 {
            return sphere::Sphere.multipliers(sigma, a_sigma);
        }
        block_multipliers(self.d, sigma, a_sigma)
    }

    fn hessian(
        &self,
        a: &SymmetricMatrix,
        sigma: &DMatrix<f64>,
        a_sigma: &DMatrix<f64>,
        lambda: &Multipliers,
        u: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        if self.d == 1 {
            return sphere::Sphere.hessian(a, sigma, a_sigma, lambda, u);
        }
        let au = a.apply(u);
        let v = (au - lambda.apply(u)) * 2.0;
        project_blocks(self.d, sigma, &v)
    }
}

fn block_count(d: usize, rows: &DMatrix<f64>) -> Result<usize> {
    sphere::check_shape(rows)?;
    if d == 0 || rows.nrows() % d != 0 {
        return Err(Error::InvalidBlockDim { n: rows.nrows(), d });
    }
    if rows.ncols() < d {
        return Err(Error::InvalidParameter(format!(
            "rank k = {} must be at least d = {d}",
            rows.ncols()
        )));
    }
    Ok(rows.nrows() / d)
}

pub(crate) fn sym(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

/// Orthonormalizes rows `start..start+d` in place; false if they are dependent.
fn gram_schmidt_block(g: &mut DMatrix<f64>, start: usize, d: usize) -> bool {
    for r in start..start + d {
        for p in start..r {
            let dot = g.row(r).dot(&g.row(p));
            for c in 0..g.ncols() {
                let pv = g[(p, c)];
                g[(r, c)] -= dot * pv;
            }
        }
        if g.row(r).norm() < SINGULAR_TOL {
            return false;
        }
        sphere::normalize_row(g, r);
    }
    true
}

/// Blockwise `vᵢ − sym(vᵢσᵢᵀ)σᵢ` (row-block convention).
pub(crate) fn project_blocks(d: usize, sigma: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = v.clone();
    for t in 0..sigma.nrows() / d {
        let s = sigma.rows(t * d, d);
        let vt = v.rows(t * d, d);
        let corr = sym(&(vt * s.transpose())) * s;
        let mut o = out.rows_mut(t * d, d);
        o -= corr;
    }
    out
}

/// Block `t` of `Λ` is `sym((Aσ)ₜσₜᵀ)`, the symmetrized diagonal block of `Aσσᵀ`.
pub(crate) fn block_multipliers(d: usize, sigma: &DMatrix<f64>, a_sigma: &DMatrix<f64>) -> Multipliers {
    let blocks = (0..sigma.nrows() / d)
        .map(|t| sym(&(a_sigma.rows(t * d, d) * sigma.rows(t * d, d).transpose())))
        .collect();
    Multipliers::Blocks { d, blocks }
}

/// Polar factor of each block of `σ + t·u` (nearest matrix with orthonormal rows).
pub(crate) fn polar_retract(d: usize, sigma: &DMatrix<f64>, u: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let y = sigma + u * t;
    let mut out = DMatrix::zeros(y.nrows(), y.ncols());
    for b in 0..y.nrows() / d {
        let yb = y.rows(b * d, d);
        // polar factor (YYᵀ)^(-1/2)·Y from the eigendecomposition of the d×d Gram matrix
        let eig = SymmetricEigen::new(&yb * yb.transpose());
        let smin = eig.eigenvalues.min().max(0.0).sqrt();
        if !(smin >= SINGULAR_TOL) {
            return Err(Error::RetractionUndefined { block: b, singular_value: smin });
        }
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let p = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
        let q = p * yb;
        // one Newton–Schulz step, Q ← (3I − QQᵀ)Q/2, squares the orthonormality error
        let g = &q * q.transpose();
        let q = (DMatrix::identity(d, d) * 3.0 - g) * q * 0.5;
        out.rows_mut(b * d, d).copy_from(&q);
    }
    Ok(out)
}

fn check_base(sigma: &StiefelConfig, v: &DMatrix<f64>) -> Result<()> {
    if v.shape() != sigma.rows.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            v.shape(),
            sigma.rows.shape()
        )));
    }
    Ok(())
}

fn check_matrix(a: &SymmetricMatrix, sigma: &StiefelConfig) -> Result<()> {
    Stiefel { d: sigma.d }.check_matrix(a)?;
    sphere::check_dims(a, &sigma.rows)
}

pub fn oc_project_tangent(sigma: &StiefelConfig, v: &DMatrix<f64>) -> Result<StiefelTangent> {
    check_base(sigma, v)?;
    Ok(StiefelTangent::from_raw(Stiefel { d: sigma.d }.project(&sigma.rows, v)))
}

/// Blockwise polar retraction of `σ + t·u`.
pub fn oc_retract(sigma: &StiefelConfig, u: &StiefelTangent, t: f64) -> Result<StiefelConfig> {
    check_base(sigma, &u.rows)?;
    let rows = Stiefel { d: sigma.d }.retract(&sigma.rows, &u.rows, t)?;
    Ok(StiefelConfig::from_raw(sigma.d, rows))
}

pub fn oc_objective(a: &SymmetricMatrix, sigma: &StiefelConfig) -> Result<f64> {
    check_matrix(a, sigma)?;
    Ok(sigma.rows.dot(&a.apply(&sigma.rows)))
}

/// `Λ(σ)` as `m` symmetric `d×d` blocks (a diagonal when `d = 1`).
pub fn oc_multipliers(a: &SymmetricMatrix, sigma: &StiefelConfig) -> Result<Multipliers> {
    check_matrix(a, sigma)?;
    let a_sigma = a.apply(&sigma.rows);
    Ok(Stiefel { d: sigma.d }.multipliers(&sigma.rows, &a_sigma))
}

/// `grad f(σ) = P_T(2Aσ) = 2(A − Λ)σ`.
pub fn oc_gradient(a: &SymmetricMatrix, sigma: &StiefelConfig) -> Result<StiefelTangent> {
    check_matrix(a, sigma)?;
    let a_sigma = a.apply(&sigma.rows);
    if sigma.d == 1 {
        return Ok(StiefelTangent::from_raw(sphere::gradient_from(&sigma.rows, &a_sigma)));
    }
    let lambda = block_multipliers(sigma.d, &sigma.rows, &a_sigma);
    Ok(StiefelTangent::from_raw((a_sigma - lambda.apply(&sigma.rows)) * 2.0))
}

/// `2⟨u, (A − Λ)u⟩/⟨u, u⟩`.
pub fn oc_rayleigh(a: &SymmetricMatrix, sigma: &StiefelConfig, u: &StiefelTangent) -> Result<f64> {
    check_matrix(a, sigma)?;
    check_base(sigma, &u.rows)?;
    if u.norm() == 0.0 {
        return Err(Error::ZeroTangent);
    }
    let lambda = oc_multipliers(a, sigma)?;
    let au = a.apply(&u.rows);
    Ok(geometry::curvature_from_au(&u.rows, &au, &lambda))
}

pub fn oc_random_config(m: usize, d: usize, k: usize, seed: u64) -> Result<StiefelConfig> {
    if m == 0 || d == 0 || k < d {
        return Err(Error::InvalidParameter(format!(
            "need m, d >= 1 and k >= d (got m = {m}, d = {d}, k = {k})"
        )));
    }
    let mut r = rng::seeded(seed);
    Ok(StiefelConfig::from_raw(d, Stiefel { d }.random_point(m * d, k, &mut r)))
}

pub fn oc_random_tangent(sigma: &StiefelConfig, seed: u64) -> StiefelTangent {
    let mut r = rng::seeded(seed);
    StiefelTangent::from_raw(Stiefel { d: sigma.d }.random_tangent(&sigma.rows, &mut r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{self, SphereConfig, TangentField};

    fn goe_blocks(n: usize, d: usize, seed: u64) -> SymmetricMatrix {
        let mut r = rng::seeded(seed);
        let g = geometry::gaussian_matrix(n, n, &mut r);
        SymmetricMatrix::from_dense((&g + g.transpose()) * 0.5)
            .unwrap()
            .with_block_dim(d)
            .unwrap()
    }

    #[test]
    fn normal_directions_are_annihilated() {
        let s = oc_random_config(3, 2, 4, 1).unwrap();
        let mut v = DMatrix::zeros(6, 4);
        let sym_mat = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -2.0]);
        for t in 0..3 {
            v.rows_mut(2 * t, 2).copy_from(&(&sym_mat * s.block(t)));
        }
        assert!(oc_project_tangent(&s, &v).unwrap().norm() < 1e-14);
        let u = oc_random_tangent(&s, 2);
        let pu = oc_project_tangent(&s, u.rows()).unwrap();
        assert!((pu.rows() - u.rows()).amax() < 1e-12);
        assert!(StiefelTangent::new(&s, u.rows().clone()).is_ok());
    }

    #[test]
    fn retract_at_zero_and_orthonormality() {
        let s = oc_random_config(4, 3, 5, 3).unwrap();
        let u = oc_random_tangent(&s, 4);
        let r0 = oc_retract(&s, &u, 0.0).unwrap();
        assert!((r0.rows() - s.rows()).amax() < 1e-14);
        for t in [0.1, 0.5, 2.0] {
            let r = oc_retract(&s, &u, t).unwrap();
            for b in 0..4 {
                let blk = r.block(b);
                assert!((&blk * blk.transpose() - DMatrix::identity(3, 3)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn singular_block_is_an_error() {
        let s = StiefelConfig::new(2, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        // t·u cancels the second row of σ
        let u = StiefelTangent::from_raw(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]));
        assert!(matches!(oc_retract(&s, &u, 1.0), Err(Error::RetractionUndefined { .. })));
    }

    #[test]
    fn identity_has_zero_gradient() {
        let a = SymmetricMatrix::identity(9).with_block_dim(3).unwrap();
        let s = oc_random_config(3, 3, 4, 8).unwrap();
        assert!(oc_gradient(&a, &s).unwrap().norm() < 1e-13);
        assert!(matches!(
            oc_gradient(&SymmetricMatrix::identity(9), &s),
            Err(Error::MissingBlockStructure)
        ));
    }

    #[test]
    fn gradient_is_projected_euclidean_gradient() {
        let a = goe_blocks(12, 3, 5);
        let s = oc_random_config(4, 3, 5, 6).unwrap();
        let g = oc_gradient(&a, &s).unwrap();
        let p = oc_project_tangent(&s, &(a.apply(s.rows()) * 2.0)).unwrap();
        assert!((g.rows() - p.rows()).amax() < 1e-12);
    }

    #[test]
    fn d1_general_path_agrees_with_sphere() {
        let s = sphere::random_config(8, 3, 2).unwrap();
        let u = sphere::random_tangent(&s, 3);
        for t in [0.0, 0.3, 1.7] {
            let a = polar_retract(1, s.rows(), u.rows(), t).unwrap();
            let b = sphere::retract(&s, &u, t).unwrap();
            assert!((a - b.rows()).amax() < 1e-12);
        }
        let mut r = rng::seeded(4);
        let v = geometry::gaussian_matrix(8, 3, &mut r);
        let p = project_blocks(1, s.rows(), &v);
        assert!((p - sphere::project_tangent(&s, &v).unwrap().rows()).amax() < 1e-12);
    }

    #[test]
    fn d1_typed_api_reduces_exactly() {
        let a = goe_blocks(10, 1, 9);
        let sc = sphere::random_config(10, 4, 17).unwrap();
        let oc = oc_random_config(10, 1, 4, 17).unwrap();
        assert_eq!(sc.rows(), oc.rows());
        let su: TangentField = sphere::random_tangent(&sc, 18);
        let ou = oc_random_tangent(&oc, 18);
        assert_eq!(su.rows(), ou.rows());
        assert_eq!(sphere::gradient(&a, &sc).unwrap().rows(), oc_gradient(&a, &oc).unwrap().rows());
        assert_eq!(sphere::objective(&a, &sc).unwrap(), oc_objective(&a, &oc).unwrap());
        let h = sphere::HessianOperator::new(&a, &sc).unwrap();
        assert_eq!(sphere::rayleigh(&h, &su).unwrap(), oc_rayleigh(&a, &oc, &ou).unwrap());
        let r1: SphereConfig = sphere::retract(&sc, &su, 0.4).unwrap();
        let r2 = oc_retract(&oc, &ou, 0.4).unwrap();
        assert_eq!(r1.rows(), r2.rows());
    }

    #[test]
    fn occonfig_text_round_trip() {
        let s = oc_random_config(2, 2, 3, 4).unwrap();
        let mut buf = Vec::new();
        s.write_text(&mut buf).unwrap();
        assert!(buf.starts_with(b"occonfig m 2 d 2 k 3\n"));
        assert_eq!(StiefelConfig::read_text(&buf[..]).unwrap(), s);
    }
}
