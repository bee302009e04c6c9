//! Shared interface between the two constraint manifolds and the solvers.
//!
//! Points and tangent vectors are plain `n×k` matrices here; the typed
//! wrappers live in [`crate::sphere`] and [`crate::stiefel`].

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::rng::{self, SeededRng};
use crate::symmat::SymmetricMatrix;

/// The multiplier matrix `Λ(σ)`: diagonal for the sphere product, block
/// diagonal with symmetric `d×d` blocks for the Stiefel product.
#[derive(Debug, Clone, PartialEq)]
pub enum Multipliers {
    Diagonal(DVector<f64>),
    Blocks { d: usize, blocks: Vec<DMatrix<f64>> },
}

impl Multipliers {
    /// `Λ·u`.
    pub fn apply(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Multipliers::Diagonal(l) => {
                let mut out = u.clone();
                for mut col in out.column_iter_mut() {
                    col.component_mul_assign(l);
                }
                out
            }
            Multipliers::Blocks { d, blocks } => {
                let mut out = DMatrix::zeros(u.nrows(), u.ncols());
                for (t, b) in blocks.iter().enumerate() {
                    let prod = b * u.rows(t * d, *d);
                    out.rows_mut(t * d, *d).copy_from(&prod);
                }
                out
            }
        }
    }

    /// `Tr Λ`, which equals `f(σ)`.
    pub fn trace(&self) -> f64 {
        match self {
            Multipliers::Diagonal(l) => l.sum(),
            Multipliers::Blocks { blocks, .. } => blocks.iter().map(|b| b.trace()).sum(),
        }
    }

    /// Upper bound on `‖Λ‖₂`.
    pub fn norm_bound(&self) -> f64 {
        match self {
            Multipliers::Diagonal(l) => l.amax(),
            Multipliers::Blocks { blocks, .. } => blocks
                .iter()
                .map(|b| b.norm())
                .fold(0.0, f64::max),
        }
    }
}

/// Operations a constraint manifold provides to the solvers.
pub trait Geometry: Send + Sync {
    /// Checks that `A` is compatible with a point of `rows` rows.
    fn check_matrix(&self, a: &SymmetricMatrix) -> Result<()>;

    /// A random point with `n` rows and rank `k`.
    fn random_point(&self, n: usize, k: usize, rng: &mut SeededRng) -> DMatrix<f64>;

    /// Orthogonal projection onto the tangent space at `sigma`.
    fn project(&self, sigma: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64>;

    /// `P_M(σ + t·u)`.
    fn retract(&self, sigma: &DMatrix<f64>, u: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>>;

    /// `Λ(σ)` from `σ` and `Aσ`.
    fn multipliers(&self, sigma: &DMatrix<f64>, a_sigma: &DMatrix<f64>) -> Multipliers;

    /// Riemannian Hessian applied to a tangent `u`. The default is
    /// `P(2(A − Λ)u)`, valid for any manifold whose Hessian quadratic form is
    /// `2⟨v, (A − Λ)u⟩`.
    fn hessian(
        &self,
        a: &SymmetricMatrix,
        sigma: &DMatrix<f64>,
        _a_sigma: &DMatrix<f64>,
        lambda: &Multipliers,
        u: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let au = a.apply(u);
        let v = (au - lambda.apply(u)) * 2.0;
        self.project(sigma, &v)
    }

    /// Random tangent vector with unit Frobenius norm (projected Gaussian).
    fn random_tangent(&self, sigma: &DMatrix<f64>, rng: &mut SeededRng) -> DMatrix<f64> {
        let (n, k) = sigma.shape();
        let g = gaussian_matrix(n, k, rng);
        let mut u = self.project(sigma, &g);
        let norm = u.norm();
        if norm > 0.0 {
            u /= norm;
        }
        u
    }
}

/// `n×k` standard Gaussian matrix filled in row-major order.
pub(crate) fn gaussian_matrix(n: usize, k: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    let data: Vec<f64> = (0..n * k).map(|_| rng::gaussian(rng)).collect();
    DMatrix::from_row_slice(n, k, &data)
}

/// `2⟨u, (A − Λ)u⟩ / ⟨u, u⟩` given `Au`.
pub(crate) fn curvature_from_au(u: &DMatrix<f64>, au: &DMatrix<f64>, lambda: &Multipliers) -> f64 {
    let num = 2.0 * (u.dot(au) - u.dot(&lambda.apply(u)));
    num / u.norm_squared()
}
