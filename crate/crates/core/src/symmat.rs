//! Real symmetric matrices with dense or compressed-row storage.
//!
//! A [`SymmetricMatrix`] is immutable once built. Sparse storage keeps both
//! triangles so the mat-vec loop has no symmetry branches. A uniform rank-one
//! term `c·11ᵀ` can be attached lazily (centered adjacency matrices), in which
//! case every kernel and norm acts on the effective matrix `core + c·11ᵀ`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng;

const ASYMMETRY_TOL: f64 = 1e-8;

/// Compressed sparse row storage of the full symmetric pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(DMatrix<f64>),
    Sparse(Csr),
}

/// Cached norms of the effective matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormCache {
    /// Maximum absolute column sum.
    pub l1: f64,
    /// Power-iteration estimate of the spectral norm (never above the true value).
    pub l2_est: f64,
    /// Relative tolerance used for `l2_est`.
    pub l2_tol: f64,
    pub fro: f64,
}

/// Result of [`SymmetricMatrix::opnorm_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpNormEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub const DEFAULT_OPNORM_TOL: f64 = 1e-7;
pub const DEFAULT_OPNORM_ITERS: usize = 5000;
const DEFAULT_OPNORM_SEED: u64 = 0x0B5E_55ED;

#[derive(Debug, Clone)]
pub struct SymmetricMatrix {
    n: usize,
    storage: Storage,
    shift: f64,
    block_dim: Option<usize>,
    norms: OnceLock<NormCache>,
}

impl PartialEq for SymmetricMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.storage == other.storage
            && self.shift.to_bits() == other.shift.to_bits()
            && self.block_dim == other.block_dim
    }
}

impl SymmetricMatrix {
    /// Builds a dense matrix, replacing `b` by `(b + bᵀ)/2`.
    ///
    /// Fails when `‖b − bᵀ‖_F > 1e-8·‖b‖_F`.
    pub fn from_dense(b: DMatrix<f64>) -> Result<Self> {
        if b.nrows() != b.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if b.nrows() == 0 {
            return Err(Error::InvalidParameter("matrix order must be positive".into()));
        }
        let bt = b.transpose();
        let fro = b.norm();
        let asym = (&b - &bt).norm();
        if asym > ASYMMETRY_TOL * fro {
            return Err(Error::Asymmetric(asym / fro));
        }
        let sym = if asym == 0.0 { b } else { (b + bt) * 0.5 };
        Ok(Self::wrap(sym.nrows(), Storage::Dense(sym)))
    }

    /// Builds a sparse matrix from `(i, j, value)` entries; each entry sets both
    /// `A[i][j]` and `A[j][i]`. Repeated positions must agree (up to 1e-8
    /// relative) and are stored once. Explicit zeros are dropped.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let map = collect_upper(n, triplets)?;
        Ok(Self::wrap(n, Storage::Sparse(csr_from_upper(n, &map))))
    }

    /// Same input convention as [`from_triplets`](Self::from_triplets), dense storage.
    pub fn from_triplets_dense<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let map = collect_upper(n, triplets)?;
        let mut m = DMatrix::zeros(n, n);
        for (&(i, j), &v) in &map {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        Ok(Self::wrap(n, Storage::Dense(m)))
    }

    pub fn identity(n: usize) -> Self {
        Self::wrap(n, Storage::Dense(DMatrix::identity(n, n)))
    }

    pub fn zeros(n: usize) -> Self {
        Self::wrap(n, Storage::Dense(DMatrix::zeros(n, n)))
    }

    fn wrap(n: usize, storage: Storage) -> Self {
        Self {
            n,
            storage,
            shift: 0.0,
            block_dim: None,
            norms: OnceLock::new(),
        }
    }

    /// Adds the lazily applied term `c·11ᵀ` (accumulating onto any existing one).
    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift += c;
        self.norms = OnceLock::new();
        self
    }

    /// Marks the matrix as an `m×m` array of `d×d` blocks.
    pub fn with_block_dim(mut self, d: usize) -> Result<Self> {
        if d == 0 || self.n % d != 0 {
            return Err(Error::InvalidBlockDim { n: self.n, d });
        }
        self.block_dim = Some(d);
        Ok(self)
    }

    pub fn without_block_dim(mut self) -> Self {
        self.block_dim = None;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_dim(&self) -> Option<usize> {
        self.block_dim
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    /// Coefficient `c` of the lazy `c·11ᵀ` term.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Stored entries of the core (excluding the rank-one term).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.iter().filter(|v| **v != 0.0).count(),
            Storage::Sparse(s) => s.nnz(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let core = match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::Sparse(s) => s
                .row(i)
                .find(|&(c, _)| c == j)
                .map_or(0.0, |(_, v)| v),
        };
        core + self.shift
    }

    /// Densified effective matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(s) => {
                let mut m = DMatrix::zeros(self.n, self.n);
                for i in 0..self.n {
                    for (j, v) in s.row(i) {
                        m[(i, j)] = v;
                    }
                }
                m
            }
        };
        if self.shift != 0.0 {
            m.add_scalar_mut(self.shift);
        }
        m
    }

    /// Dense copy of this matrix with the rank-one term folded in.
    pub fn densified(&self) -> Self {
        let mut out = Self::wrap(self.n, Storage::Dense(self.to_dense()));
        out.block_dim = self.block_dim;
        out
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m * c),
            Storage::Sparse(s) => Storage::Sparse(Csr {
                values: s.values.iter().map(|v| v * c).collect(),
                ..s.clone()
            }),
        };
        Self {
            n: self.n,
            storage,
            shift: self.shift * c,
            block_dim: self.block_dim,
            norms: OnceLock::new(),
        }
    }

    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| self.get(i, i))
    }

    /// Effective row sums `A·1`.
    pub fn row_sums(&self) -> DVector<f64> {
        let ones = DMatrix::from_element(self.n, 1, 1.0);
        DVector::from_column_slice(self.apply(&ones).as_slice())
    }

    /// Upper-triangle entries `(i, j, value)` with `i ≤ j` and nonzero value.
    pub fn upper_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        match (&self.storage, self.shift) {
            (Storage::Sparse(s), c) if c == 0.0 => {
                for i in 0..self.n {
                    for (j, v) in s.row(i) {
                        if j >= i {
                            out.push((i, j, v));
                        }
                    }
                }
            }
            _ => {
                let m = self.to_dense();
                for i in 0..self.n {
                    for j in i..self.n {
                        let v = m[(i, j)];
                        if v != 0.0 {
                            out.push((i, j, v));
                        }
                    }
                }
            }
        }
        out
    }

    /// `A·X` for an `n×k` matrix `X`, without a dimension check.
    pub(crate) fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = match &self.storage {
            Storage::Dense(m) => m * x,
            Storage::Sparse(s) => {
                let (n, k) = x.shape();
                let mut out = DMatrix::zeros(n, k);
                let xs = x.as_slice();
                let os = out.as_mut_slice();
                for c in 0..k {
                    let col = &xs[c * n..(c + 1) * n];
                    let dst = &mut os[c * n..(c + 1) * n];
                    for (i, slot) in dst.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for (j, v) in s.row(i) {
                            acc += v * col[j];
                        }
                        *slot = acc;
                    }
                }
                out
            }
        };
        if self.shift != 0.0 {
            for (c, mut col) in out.column_iter_mut().enumerate() {
                let sum: f64 = x.column(c).sum();
                col.add_scalar_mut(self.shift * sum);
            }
        }
        out
    }

    /// Maximum absolute column sum of the effective matrix.
    pub fn l1_norm(&self) -> f64 {
        let c = self.shift;
        match &self.storage {
            Storage::Dense(m) => m
                .column_iter()
                .map(|col| col.iter().map(|v| (v + c).abs()).sum::<f64>())
                .fold(0.0, f64::max),
            Storage::Sparse(s) => (0..self.n)
                .map(|i| {
                    let mut count = 0usize;
                    let stored: f64 = s
                        .row(i)
                        .map(|(_, v)| {
                            count += 1;
                            (v + c).abs()
                        })
                        .sum();
                    stored + (self.n - count) as f64 * c.abs()
                })
                .fold(0.0, f64::max),
        }
    }

    pub fn fro_norm(&self) -> f64 {
        let c = self.shift;
        match &self.storage {
            Storage::Dense(m) => m.iter().map(|v| (v + c) * (v + c)).sum::<f64>().sqrt(),
            Storage::Sparse(s) => {
                let stored: f64 = s.values.iter().map(|v| (v + c) * (v + c)).sum();
                let implicit = (self.n * self.n - s.nnz()) as f64 * c * c;
                (stored + implicit).sqrt()
            }
        }
    }

    /// Power iteration on `A²` (`v ← A(Av)`, normalized) from a seeded random
    /// start. The estimate `‖Av‖` never exceeds `‖A‖₂`. Converged when the
    /// relative change of the Rayleigh quotient `vᵀA²v` stays below `rel_tol`
    /// for three consecutive iterations.
    pub fn opnorm_estimate(&self, rel_tol: f64, max_iters: usize, seed: u64) -> OpNormEstimate {
        let n = self.n;
        let mut r = rng::seeded(seed);
        let mut v = DMatrix::from_fn(n, 1, |_, _| rng::gaussian(&mut r));
        let norm = v.norm();
        v /= norm;
        let mut prev = f64::NAN;
        let mut streak = 0;
        let mut best = 0.0f64;
        for it in 1..=max_iters {
            let w = self.apply(&v);
            let rq = w.norm_squared();
            best = best.max(rq.sqrt());
            if rq == 0.0 {
                return OpNormEstimate { value: 0.0, converged: true, iterations: it };
            }
            if prev.is_finite() && (rq - prev).abs() <= rel_tol * rq {
                streak += 1;
                if streak >= 3 {
                    return OpNormEstimate { value: best, converged: true, iterations: it };
                }
            } else {
                streak = 0;
            }
            prev = rq;
            let mut next = self.apply(&w);
            let nn = next.norm();
            if nn == 0.0 {
                return OpNormEstimate { value: best, converged: true, iterations: it };
            }
            next /= nn;
            v = next;
        }
        OpNormEstimate { value: best, converged: false, iterations: max_iters }
    }

    /// Norms of the effective matrix, computed on first use.
    pub fn norms(&self) -> &NormCache {
        self.norms.get_or_init(|| {
            let est = self.opnorm_estimate(DEFAULT_OPNORM_TOL, DEFAULT_OPNORM_ITERS, DEFAULT_OPNORM_SEED);
            NormCache {
                l1: self.l1_norm(),
                l2_est: est.value,
                l2_tol: DEFAULT_OPNORM_TOL,
                fro: self.fro_norm(),
            }
        })
    }

    /// Writes the `symmat` text format (upper triangle, shortest round-trip decimals).
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        match self.block_dim {
            Some(d) => writeln!(w, "symmat n {} blockdim {}", self.n, d)?,
            None => writeln!(w, "symmat n {}", self.n)?,
        }
        let mut line = String::new();
        for (i, j, v) in self.upper_entries() {
            line.clear();
            let _ = write!(line, "{i} {j} {v:?}");
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads the `symmat` text format. Entries are mirrored; the result is
    /// sparse when fewer than 10% of the entries are nonzero.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (n, block_dim) = loop {
            let Some((no, line)) = lines.next() else {
                return Err(Error::Parse { line: 0, msg: "missing header".into() });
            };
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            break parse_header(no + 1, t)?;
        };
        let mut triplets = Vec::new();
        for (no, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            let bad = |msg: &str| Error::Parse { line: no + 1, msg: msg.to_string() };
            if parts.len() != 3 {
                return Err(bad("expected `i j value`"));
            }
            let i: usize = parts[0].parse().map_err(|_| bad("bad row index"))?;
            let j: usize = parts[1].parse().map_err(|_| bad("bad column index"))?;
            let v: f64 = parts[2].parse().map_err(|_| bad("bad value"))?;
            triplets.push((i, j, v));
        }
        let off = triplets.iter().filter(|t| t.0 != t.1).count();
        let diag = triplets.len() - off;
        let density = (2 * off + diag) as f64 / (n * n) as f64;
        let a = if density < 0.1 {
            Self::from_triplets(n, triplets)?
        } else {
            Self::from_triplets_dense(n, triplets)?
        };
        match block_dim {
            Some(d) => a.with_block_dim(d),
            None => Ok(a),
        }
    }
}

fn parse_header(line: usize, t: &str) -> Result<(usize, Option<usize>)> {
    let bad = |msg: &str| Error::Parse { line, msg: msg.to_string() };
    let parts: Vec<&str> = t.split_whitespace().collect();
    match parts.as_slice() {
        ["symmat", "n", n] => Ok((n.parse().map_err(|_| bad("bad order"))?, None)),
        ["symmat", "n", n, "blockdim", d] => Ok((
            n.parse().map_err(|_| bad("bad order"))?,
            Some(d.parse().map_err(|_| bad("bad block dimension"))?),
        )),
        _ => Err(bad("expected `symmat n <n> [blockdim <d>]`")),
    }
    .and_then(|(n, d): (usize, Option<usize>)| {
        if n == 0 {
            Err(bad("order must be positive"))
        } else {
            Ok((n, d))
        }
    })
}

fn collect_upper<I>(n: usize, triplets: I) -> Result<BTreeMap<(usize, usize), f64>>
where
    I: IntoIterator<Item = (usize, usize, f64)>,
{
    if n == 0 {
        return Err(Error::InvalidParameter("matrix order must be positive".into()));
    }
    let mut map = BTreeMap::new();
    for (i, j, v) in triplets {
        if i >= n || j >= n {
            return Err(Error::DimensionMismatch(format!("entry ({i}, {j}) outside {n}x{n}")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite entry at ({i}, {j})")));
        }
        let key = (i.min(j), i.max(j));
        if let Some(&old) = map.get(&key) {
            let old: f64 = old;
            if (old - v).abs() > ASYMMETRY_TOL * old.abs().max(v.abs()) {
                return Err(Error::Asymmetric((old - v).abs() / old.abs().max(v.abs())));
            }
            map.insert(key, 0.5 * (old + v));
        } else {
            map.insert(key, v);
        }
    }
    map.retain(|_, v| *v != 0.0);
    Ok(map)
}

fn csr_from_upper(n: usize, map: &BTreeMap<(usize, usize), f64>) -> Csr {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (&(i, j), &v) in map {
        rows[i].push((j, v));
        if i != j {
            rows[j].push((i, v));
        }
    }
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for mut row in rows {
        row.sort_unstable_by_key(|e| e.0);
        for (j, v) in row {
            indices.push(j);
            values.push(v);
        }
        indptr.push(indices.len());
    }
    Csr { n, indptr, indices, values }
}

/// `A·X` with a dimension check.
pub fn symmatmul(a: &SymmetricMatrix, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != a.n() || x.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.n(),
            a.n(),
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(a.apply(x))
}

/// Keeps the diagonal of a square matrix, zeroing everything else.
pub fn ddiag(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "ddiag needs a square matrix, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(DMatrix::from_diagonal(&b.diagonal()))
}

/// Row-wise inner products `⟨xᵢ, yᵢ⟩`, i.e. the diagonal of `x·yᵀ`.
pub fn row_dots(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DVector<f64> {
    debug_assert_eq!(x.shape(), y.shape());
    let n = x.nrows();
    let mut out = DVector::zeros(n);
    for (cx, cy) in x.column_iter().zip(y.column_iter()) {
        for i in 0..n {
            out[i] += cx[i] * cy[i];
        }
    }
    out
}
