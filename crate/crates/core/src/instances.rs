//! Seeded random instance generators.
//!
//! Every generator is a deterministic function of its parameters and seed
//! (see [`crate::rng`] for the fixed generator). Sparse storage is used when
//! the expected density is below 10%; rank-one centering terms are attached
//! lazily with [`SymmetricMatrix::with_shift`].

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, SeededRng};
use crate::symmat::SymmetricMatrix;

const SPARSE_DENSITY: f64 = 0.1;
const REGULAR_MAX_RESTARTS: usize = 200;

/// A generated problem: the data matrix, optional planted labels, and metadata.
#[derive(Debug, Clone)]
pub struct Instance {
    pub a: SymmetricMatrix,
    /// Planted `±1` labels.
    pub ground_truth: Option<Vec<f64>>,
    /// Uncentered adjacency for graph models.
    pub adjacency: Option<SymmetricMatrix>,
    pub meta: InstanceMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMeta {
    pub model: &'static str,
    pub n: usize,
    pub params: Vec<(&'static str, f64)>,
    pub seed: u64,
}

impl InstanceMeta {
    /// `model=<m> n=<n> <key>=<value> ... seed=<s>`.
    pub fn line(&self) -> String {
        let mut s = format!("model={} n={}", self.model, self.n);
        for (k, v) in &self.params {
            s.push_str(&format!(" {k}={v}"));
        }
        s.push_str(&format!(" seed={}", self.seed));
        s
    }
}

/// `W_ii ~ N(0, 2/n)`, `W_ij ~ N(0, 1/n)` for `i < j`, drawn row by row over the
/// upper triangle.
pub fn goe(n: usize, seed: u64) -> Result<SymmetricMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let mut r = rng::seeded(seed);
    let off = (1.0 / n as f64).sqrt();
    let diag = (2.0 / n as f64).sqrt();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let z = rng::gaussian(&mut r);
            if i == j {
                m[(i, i)] = diag * z;
            } else {
                m[(i, j)] = off * z;
                m[(j, i)] = off * z;
            }
        }
    }
    SymmetricMatrix::from_dense(m)
}

fn random_signs(n: usize, r: &mut SeededRng) -> Vec<f64> {
    (0..n).map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

/// `A(λ) = (λ/n)uuᵀ + W` with `u` uniform on `{±1}ⁿ` and `W = goe(n, seed)`.
pub fn spiked(n: usize, lambda: f64, seed: u64) -> Result<Instance> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let w = goe(n, seed)?;
    let mut r = rng::seeded(rng::derive_seed(seed, 0x5B1C));
    let u = random_signs(n, &mut r);
    let c = lambda / n as f64;
    let mut m = w.to_dense();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] += c * u[i] * u[j];
        }
    }
    Ok(Instance {
        a: SymmetricMatrix::from_dense(m)?,
        ground_truth: Some(u),
        adjacency: None,
        meta: InstanceMeta { model: "spiked", n, params: vec![("lambda", lambda)], seed },
    })
}

/// Signal-to-noise ratio `(a − b)/√(2(a + b))` of the two-group block model.
pub fn sbm_snr(a: f64, b: f64) -> f64 {
    (a - b) / (2.0 * (a + b)).sqrt()
}

fn edge_list_matrix(n: usize, edges: Vec<(usize, usize, f64)>, expected_density: f64) -> Result<SymmetricMatrix> {
    if expected_density < SPARSE_DENSITY {
        SymmetricMatrix::from_triplets(n, edges)
    } else {
        SymmetricMatrix::from_triplets_dense(n, edges)
    }
}

/// Two balanced groups, edge probability `a/n` within and `b/n` across.
/// Returns `(A_G − (d/n)11ᵀ)/√d` with `d = (a + b)/2` and keeps `A_G`.
pub fn sbm(n: usize, a: f64, b: f64, seed: u64) -> Result<Instance> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!("n must be even and positive, got {n}")));
    }
    let nf = n as f64;
    if !(b >= 0.0 && b <= a) || a > nf {
        return Err(Error::InvalidParameter(format!("need 0 <= b <= a <= n (a = {a}, b = {b})")));
    }
    if a + b == 0.0 {
        return Err(Error::InvalidParameter("a + b must be positive".into()));
    }
    let mut r = rng::seeded(seed);
    let mut u: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { -1.0 }).collect();
    u.shuffle(&mut r);
    let (p_in, p_out) = (a / nf, b / nf);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if u[i] == u[j] { p_in } else { p_out };
            if r.gen_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    let d = 0.5 * (a + b);
    let density = d / nf;
    let adjacency = edge_list_matrix(n, edges, density)?;
    let scale = 1.0 / d.sqrt();
    let centered = adjacency.scaled(scale).with_shift(-(d / nf) * scale);
    Ok(Instance {
        a: centered,
        ground_truth: Some(u),
        adjacency: Some(adjacency),
        meta: InstanceMeta { model: "sbm", n, params: vec![("a", a), ("b", b)], seed },
    })
}

/// Each unordered pair is an edge independently with probability `d_avg/n`.
pub fn erdos_renyi(n: usize, d_avg: f64, seed: u64) -> Result<SymmetricMatrix> {
    let nf = n as f64;
    if n == 0 || !(d_avg >= 0.0) || d_avg > nf {
        return Err(Error::InvalidParameter(format!("need n >= 1 and 0 <= d_avg <= n (n = {n}, d_avg = {d_avg})")));
    }
    let p = d_avg / nf;
    let mut r = rng::seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.gen_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    edge_list_matrix(n, edges, p)
}

/// Random simple `d`-regular graph from the pairing model. Points are matched
/// one random pair at a time; a pair that would create a loop or a repeated
/// edge is redrawn, and a matching that gets stuck is restarted (at most 200
/// consecutive restarts).
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<SymmetricMatrix> {
    if n == 0 || d >= n || (n * d) % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "need d < n and n·d even (n = {n}, d = {d})"
        )));
    }
    let mut r = rng::seeded(seed);
    for _ in 0..REGULAR_MAX_RESTARTS {
        if let Some(edges) = try_pairing(n, d, &mut r) {
            let triplets = edges.into_iter().map(|(i, j)| (i, j, 1.0));
            return edge_list_matrix(n, triplets.collect(), d as f64 / n as f64);
        }
    }
    Err(Error::GeneratorFailed(format!(
        "pairing model failed {REGULAR_MAX_RESTARTS} consecutive times (n = {n}, d = {d})"
    )))
}

fn try_pairing(n: usize, d: usize, r: &mut SeededRng) -> Option<Vec<(usize, usize)>> {
    let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(d)).collect();
    let mut edges = HashSet::with_capacity(n * d / 2);
    while !points.is_empty() {
        let len = points.len();
        let budget = 50 * len;
        let mut placed = false;
        for _ in 0..budget {
            let i = r.gen_range(0..len);
            let j = r.gen_range(0..len);
            let (u, v) = (points[i], points[j]);
            if i == j || u == v || edges.contains(&(u.min(v), u.max(v))) {
                continue;
            }
            edges.insert((u.min(v), u.max(v)));
            let (hi, lo) = (i.max(j), i.min(j));
            points.swap_remove(hi);
            points.swap_remove(lo);
            placed = true;
            break;
        }
        if !placed {
            return None;
        }
    }
    let mut out: Vec<_> = edges.into_iter().collect();
    out.sort_unstable();
    Some(out)
}

/// `A_G − (d/n)11ᵀ` for a random `d`-regular graph, with the shift kept lazy.
pub fn centered_regular(n: usize, d: usize, seed: u64) -> Result<SymmetricMatrix> {
    let g = random_regular(n, d, seed)?;
    Ok(g.with_shift(-(d as f64) / n as f64))
}

/// Objective matrix for MaxCut: `f(σ) = ⟨−A_G, σσᵀ⟩`, so that the cut of
/// `x ∈ {±1}ⁿ` equals `(Σᵢⱼ A_G,ij + f(x))/4`.
pub fn maxcut_matrix(adjacency: &SymmetricMatrix) -> SymmetricMatrix {
    adjacency.negated()
}

/// GOE matrix viewed as `d×d` blocks for the Orthogonal-Cut problem.
pub fn goe_blocks(n: usize, d: usize, seed: u64) -> Result<SymmetricMatrix> {
    goe(n, seed)?.with_block_dim(d)
}

/// Nonstandard group-synchronization model: blocks `(λ/m)·RᵢRⱼᵀ` plus a GOE
/// matrix of order `m·d`, with `Rᵢ` Haar-distributed in `SO(d)`. The noise law
/// is a modeling choice of this crate. Returns the matrix and the `Rᵢ`.
pub fn so_d_sync(m: usize, d: usize, lambda: f64, seed: u64) -> Result<(SymmetricMatrix, Vec<DMatrix<f64>>)> {
    if m == 0 || d == 0 || !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("need m, d >= 1, lambda >= 0 (m = {m}, d = {d})")));
    }
    let n = m * d;
    let w = goe(n, seed)?;
    let mut r = rng::seeded(rng::derive_seed(seed, 0x50D));
    let rots: Vec<DMatrix<f64>> = (0..m).map(|_| haar_rotation(d, &mut r)).collect();
    let mut a = w.to_dense();
    let c = lambda / m as f64;
    for i in 0..m {
        for j in 0..m {
            let blk = &rots[i] * rots[j].transpose() * c;
            let mut view = a.view_mut((i * d, j * d), (d, d));
            view += blk;
        }
    }
    Ok((SymmetricMatrix::from_dense(a)?.with_block_dim(d)?, rots))
}

fn haar_rotation(d: usize, r: &mut SeededRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng::gaussian(r));
    let qr = g.qr();
    let (mut q, rr) = qr.unpack();
    for c in 0..d {
        if rr[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn goe_is_deterministic_with_expected_diagonal_scale() {
        let a = goe(50, 3).unwrap();
        assert_eq!(a, goe(50, 3).unwrap());
        assert_ne!(a, goe(50, 4).unwrap());
        // n = 1: a single N(0, 2) draw
        let one = goe(1, 9).unwrap();
        let mut r = rng::seeded(9);
        assert_eq!(one.get(0, 0), 2f64.sqrt() * rng::gaussian(&mut r));
    }

    #[test]
    fn spiked_with_zero_signal_is_goe() {
        let inst = spiked(30, 0.0, 5).unwrap();
        assert_eq!(inst.a.to_dense(), goe(30, 5).unwrap().to_dense());
        assert!(inst.ground_truth.unwrap().iter().all(|v| v.abs() == 1.0));
    }

    #[test]
    fn sbm_labels_are_balanced() {
        let inst = sbm(40, 6.0, 2.0, 1).unwrap();
        let u = inst.ground_truth.unwrap();
        assert_eq!(u.iter().sum::<f64>(), 0.0);
        assert!(sbm(41, 6.0, 2.0, 1).is_err());
        assert!(sbm(10, 20.0, 2.0, 1).is_err());
        assert!(sbm(10, 2.0, 3.0, 1).is_err());
        assert_eq!(sbm_snr(5.0, 5.0), 0.0);
        assert!((sbm_snr(12.0, 4.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sbm_centering_matches_formula() {
        let inst = sbm(20, 8.0, 2.0, 7).unwrap();
        let g = inst.adjacency.unwrap().to_dense();
        let d: f64 = 5.0;
        let a = inst.a.to_dense();
        for i in 0..20 {
            for j in 0..20 {
                let expect = (g[(i, j)] - d / 20.0) / d.sqrt();
                assert!((a[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_er_graph() {
        let g = erdos_renyi(10, 0.0, 1).unwrap();
        assert_eq!(g.nnz(), 0);
    }

    #[test]
    fn regular_rows_sum_to_degree() {
        let g = random_regular(50, 4, 2).unwrap();
        let sums = g.row_sums();
        assert!(sums.iter().all(|&s| s == 4.0));
        for i in 0..50 {
            assert_eq!(g.get(i, i), 0.0);
        }
        assert!(random_regular(5, 3, 1).is_err());
        let c = centered_regular(50, 4, 2).unwrap();
        assert!(c.row_sums().amax() < 1e-12);
        assert!(c.l1_norm() <= 8.0);
    }

    #[test]
    fn so_d_rotations_are_proper() {
        let (a, rots) = so_d_sync(4, 3, 2.0, 1).unwrap();
        assert_eq!(a.block_dim(), Some(3));
        for r in rots {
            assert!((r.transpose() * &r - DMatrix::identity(3, 3)).norm() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }
}
