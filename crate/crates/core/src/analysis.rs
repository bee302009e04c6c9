//! SDP-value estimation, Grothendieck-type certificates, rounding and
//! recovery metrics.
//!
//! SDP values are estimated by high-rank solves. Each estimate is the
//! objective of a feasible point, so it never exceeds the true SDP value; the
//! range estimate `rg` is therefore also a lower bound on `Rg(A)`. A passing
//! certificate check compares against a possibly low SDP estimate, which errs
//! in the lenient direction by at most the estimation gap.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::rng;
use crate::solver::{self, SolverOptions};
use crate::sphere::{self, SphereConfig};
use crate::stiefel::{self, StiefelConfig};
use crate::symmat::SymmetricMatrix;

/// Goemans–Williamson constant, truncated.
pub const ALPHA_GW: f64 = 0.878;

/// Relative slack of the certificate checks: `tolerance = 1e-6·n·‖A‖₁`.
pub const CERTIFICATE_REL_TOL: f64 = 1e-6;

const BRUTEFORCE_MAX_N: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpEstimate {
    /// Estimate of `SDP(A)`.
    pub value_plus: f64,
    /// Estimate of `SDP(−A)`.
    pub value_minus: f64,
    pub rank_used: usize,
    pub epsilon_used: f64,
    /// `value_plus + value_minus`.
    pub rg: f64,
    /// Both underlying solves reached their certificate.
    pub converged: bool,
}

/// Rank at which the low-rank problem has the same optimum as the SDP:
/// `⌈√(2n)⌉ + 1`.
pub fn sdp_rank(n: usize) -> usize {
    (2.0 * n as f64).sqrt().ceil() as usize + 1
}

/// Rank used for Orthogonal-Cut SDP estimates with `d×d` blocks:
/// `⌈√(n(d + 1))⌉ + 1`, never below `d`.
pub fn oc_sdp_rank(n: usize, d: usize) -> usize {
    ((n as f64 * (d as f64 + 1.0)).sqrt().ceil() as usize + 1).max(d)
}

/// Solver settings used by the estimators: [`SolverOptions::warm`] with target `epsilon`.
pub fn estimator_options(a: &SymmetricMatrix, k: usize, epsilon: f64, seed: u64) -> SolverOptions {
    SolverOptions { epsilon: Some(epsilon), ..SolverOptions::warm(a, k, seed) }
}

/// Estimates `SDP(A)` and `SDP(−A)` with rank [`sdp_rank`] solves.
pub fn estimate_sdp(a: &SymmetricMatrix, epsilon: f64, seed: u64) -> Result<SdpEstimate> {
    let opts = estimator_options(a, sdp_rank(a.n()), epsilon, seed);
    estimate_sdp_with(a, &opts)
}

/// As [`estimate_sdp`] with caller-supplied solver options (including rank).
pub fn estimate_sdp_with(a: &SymmetricMatrix, opts: &SolverOptions) -> Result<SdpEstimate> {
    let plus = solver::solve(a, opts)?;
    let mut opts_minus = opts.clone();
    opts_minus.seed = rng::derive_seed(opts.seed, 0x4E47);
    let minus = solver::solve(&a.negated(), &opts_minus)?;
    Ok(SdpEstimate {
        value_plus: plus.objective,
        value_minus: minus.objective,
        rank_used: opts.k,
        epsilon_used: plus.epsilon,
        rg: plus.objective + minus.objective,
        converged: plus.converged && minus.converged,
    })
}

/// Orthogonal-Cut analogue of [`estimate_sdp`]; `A` must carry a block dimension.
pub fn oc_estimate_sdp(a: &SymmetricMatrix, epsilon: f64, seed: u64) -> Result<SdpEstimate> {
    let d = a.block_dim().ok_or(Error::MissingBlockStructure)?;
    let opts = estimator_options(a, oc_sdp_rank(a.n(), d), epsilon, seed);
    oc_estimate_sdp_with(a, &opts)
}

pub fn oc_estimate_sdp_with(a: &SymmetricMatrix, opts: &SolverOptions) -> Result<SdpEstimate> {
    let plus = solver::oc_solve(a, opts)?;
    let mut opts_minus = opts.clone();
    opts_minus.seed = rng::derive_seed(opts.seed, 0x4E47);
    let minus = solver::oc_solve(&a.negated(), &opts_minus)?;
    Ok(SdpEstimate {
        value_plus: plus.objective,
        value_minus: minus.objective,
        rank_used: opts.k,
        epsilon_used: plus.epsilon,
        rg: plus.objective + minus.objective,
        converged: plus.converged && minus.converged,
    })
}

/// Largest `n` accepted by [`dual_upper_bound`], which uses a dense eigensolver.
pub const DUAL_BOUND_MAX_N: usize = 4000;

/// Certified upper bound on `SDP(A)` from a point `σ`: with `Λ = ddiag(Aσσᵀ)`,
/// the diagonal matrix `Λ + δI` with `δ = max(0, −λ_min(Λ − A))` is dual
/// feasible, so `SDP(A) ≤ Tr Λ + nδ`.
pub fn dual_upper_bound(a: &SymmetricMatrix, sigma: &SphereConfig) -> Result<f64> {
    let n = a.n();
    if n > DUAL_BOUND_MAX_N {
        return Err(Error::TooLarge { n, max: DUAL_BOUND_MAX_N });
    }
    if sigma.n() != n {
        return Err(Error::DimensionMismatch(format!("σ has {} rows, A has order {n}", sigma.n())));
    }
    let a_sigma = a.apply(sigma.rows());
    let lambda = crate::symmat::row_dots(sigma.rows(), &a_sigma);
    let mut m = -a.to_dense();
    for i in 0..n {
        m[(i, i)] += lambda[i];
    }
    let lmin = SymmetricEigen::new(m).eigenvalues.min();
    Ok(lambda.sum() + n as f64 * (-lmin).max(0.0))
}

/// Outcome of a Grothendieck-type certificate check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateCheck {
    pub holds: bool,
    /// `f(σ) − bound`.
    pub slack: f64,
    pub objective: f64,
    /// `SDP_est − Rg_est/(k_eff − 1) − nε/2`.
    pub bound: f64,
    /// Effective rank: `k` on the sphere product, `2k/(d + 1)` on the Stiefel product.
    pub k_eff: f64,
    pub tolerance: f64,
}

fn certificate(a: &SymmetricMatrix, objective: f64, k_eff: f64, eps: f64, est: &SdpEstimate) -> CertificateCheck {
    let n = a.n() as f64;
    let bound = est.value_plus - est.rg / (k_eff - 1.0) - 0.5 * n * eps;
    let slack = objective - bound;
    let tolerance = CERTIFICATE_REL_TOL * n * a.l1_norm();
    CertificateCheck { holds: slack >= -tolerance, slack, objective, bound, k_eff, tolerance }
}

/// Checks `f(σ) ≥ SDP(A) − Rg(A)/(k − 1) − nε/2` using estimated SDP values.
pub fn grothendieck_check(
    a: &SymmetricMatrix,
    sigma: &SphereConfig,
    epsilon: f64,
    est: &SdpEstimate,
) -> Result<CertificateCheck> {
    let k = sigma.k();
    if k < 2 {
        return Err(Error::InvalidParameter(format!("certificate needs k >= 2, got {k}")));
    }
    let f = sphere::objective(a, sigma)?;
    Ok(certificate(a, f, k as f64, epsilon, est))
}

/// Orthogonal-Cut version with `k_d = 2k/(d + 1)` in place of `k`.
pub fn oc_grothendieck_check(
    a: &SymmetricMatrix,
    sigma: &StiefelConfig,
    epsilon: f64,
    est: &SdpEstimate,
) -> Result<CertificateCheck> {
    let kd = 2.0 * sigma.k() as f64 / (sigma.d() as f64 + 1.0);
    if kd <= 1.0 {
        return Err(Error::InvalidParameter(format!("certificate needs 2k/(d+1) > 1, got {kd}")));
    }
    let f = stiefel::oc_objective(a, sigma)?;
    Ok(certificate(a, f, kd, epsilon, est))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingResult {
    pub labels: Vec<f64>,
    pub value: f64,
    pub samples_tried: usize,
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn check_nonnegative(adj: &SymmetricMatrix) -> Result<()> {
    if adj.shift() < 0.0 {
        return Err(Error::NegativeWeight { i: 0, j: 0, value: adj.shift() });
    }
    for (i, j, v) in adj.upper_entries() {
        if v < 0.0 {
            return Err(Error::NegativeWeight { i, j, value: v });
        }
    }
    Ok(())
}

/// `(1/4)Σᵢⱼ A_ij(1 − xᵢxⱼ)` over ordered pairs, i.e. the weight of cut edges.
pub fn cut_value(adj: &SymmetricMatrix, labels: &[f64]) -> Result<f64> {
    if labels.len() != adj.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a graph on {} vertices",
            labels.len(),
            adj.n()
        )));
    }
    let x = DMatrix::from_column_slice(labels.len(), 1, labels);
    let quad = x.dot(&adj.apply(&x));
    let total = adj.row_sums().sum();
    Ok(0.25 * (total - quad))
}

/// Best-of-`num_samples` random-hyperplane rounding; ties go to `+1`.
pub fn gw_round(adj: &SymmetricMatrix, sigma: &SphereConfig, num_samples: usize, seed: u64) -> Result<RoundingResult> {
    if num_samples == 0 {
        return Err(Error::InvalidParameter("num_samples must be >= 1".into()));
    }
    if sigma.n() != adj.n() {
        return Err(Error::DimensionMismatch(format!("σ has {} rows, graph has {} vertices", sigma.n(), adj.n())));
    }
    check_nonnegative(adj)?;
    let mut r = rng::seeded(seed);
    let rows = sigma.rows();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..num_samples {
        let g = DVector::from_fn(sigma.k(), |_, _| rng::gaussian(&mut r));
        let proj = rows * &g;
        let labels: Vec<f64> = proj.iter().map(|&v| sign(v)).collect();
        let value = cut_value(adj, &labels)?;
        if best.as_ref().map_or(true, |(b, _)| value > *b) {
            best = Some((value, labels));
        }
    }
    let (value, labels) = best.expect("at least one sample");
    Ok(RoundingResult { labels, value, samples_tried: num_samples })
}

/// Exact MaxCut by enumerating the `2^(n−1)` labelings with the last vertex
/// fixed, in Gray-code order. Returns the value and an optimal labeling.
pub fn maxcut_bruteforce(adj: &SymmetricMatrix) -> Result<(f64, Vec<f64>)> {
    let n = adj.n();
    if n > BRUTEFORCE_MAX_N {
        return Err(Error::TooLarge { n, max: BRUTEFORCE_MAX_N });
    }
    check_nonnegative(adj)?;
    let w = adj.to_dense();
    let mut x = vec![1.0; n];
    let mut cut = 0.0;
    let mut best = (0.0, x.clone());
    if n <= 1 {
        return Ok(best);
    }
    let free = n - 1;
    for step in 1u64..(1u64 << free) {
        let v = step.trailing_zeros() as usize;
        // flipping v changes the cut by x_v·Σ_{j≠v} w_vj x_j
        let mut s = 0.0;
        for j in 0..n {
            if j != v {
                s += w[(v, j)] * x[j];
            }
        }
        cut += x[v] * s;
        x[v] = -x[v];
        if cut > best.0 {
            best = (cut, x.clone());
        }
    }
    Ok(best)
}

/// Signs of the top left singular vector of `σ`, ties to `+1`. The overall
/// sign is fixed so that the first nonzero entry of the vector is positive.
pub fn principal_sign(sigma: &DMatrix<f64>) -> Vec<f64> {
    let gram = sigma.transpose() * sigma;
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.imax();
    let w = eig.eigenvectors.column(top).into_owned();
    let mut v = sigma * w;
    if let Some(first) = v.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
    v.iter().map(|&x| sign(x)).collect()
}

/// `‖σᵀu‖₂²/n²`.
pub fn correlation(sigma: &DMatrix<f64>, u: &[f64]) -> Result<f64> {
    let n = sigma.nrows();
    if u.len() != n {
        return Err(Error::DimensionMismatch(format!("u has length {}, σ has {n} rows", u.len())));
    }
    let uv = DVector::from_column_slice(u);
    let s = sigma.tr_mul(&uv);
    Ok(s.norm_squared() / (n as f64 * n as f64))
}

/// `(⟨x, u⟩/n)²` for label vectors.
pub fn overlap(x: &[f64], u: &[f64]) -> Result<f64> {
    if x.len() != u.len() || x.is_empty() {
        return Err(Error::DimensionMismatch(format!("lengths {} and {}", x.len(), u.len())));
    }
    let dot: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
    Ok((dot / x.len() as f64).powi(2))
}
