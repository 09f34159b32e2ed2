//! Linear operators between finite-dimensional Euclidean spaces.
//!
//! A [`LinearMap`] is an immutable expression tree over a handful of
//! primitive kinds (dense, identity, zero, diagonal, first difference,
//! orthonormal DCT). Composite kinds (scaled, composed, sum, adjoint) share
//! their children through `Arc`, so cloning a map is cheap and maps can be
//! shared across threads.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};

/// Default relative tolerance for operator-norm estimation.
pub const NORM_TOL: f64 = 1e-10;
/// Default iteration cap for power iteration.
pub const NORM_MAX_ITER: usize = 1_000_000;
/// Largest number of matrix entries [`materialize`] will allocate.
pub const MATERIALIZE_BUDGET: usize = 25_000_000;
/// Largest map materialized for exact norms and Gram matrices.
pub(crate) const EXACT_NORM_ENTRIES: usize = 400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Dense,
    Identity,
    Zero,
    Diagonal,
    FirstDifference,
    Dct,
    Scaled,
    Composed,
    Sum,
    Adjoint,
}

/// Orthonormal type-II DCT of a fixed length.
pub struct Dct {
    len: usize,
    plan: Arc<dyn TransformType2And3<f64>>,
}

impl Dct {
    pub fn new(len: usize) -> Self {
        let plan = DctPlanner::new().plan_dct2(len);
        Dct { len, plan }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn forward(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut buf: Vec<f64> = u.iter().copied().collect();
        self.plan.process_dct2(&mut buf);
        let n = self.len as f64;
        let s0 = (1.0 / n).sqrt();
        let sk = (2.0 / n).sqrt();
        buf[0] *= s0;
        for b in buf.iter_mut().skip(1) {
            *b *= sk;
        }
        DVector::from_vec(buf)
    }

    fn inverse(&self, c: &DVector<f64>) -> DVector<f64> {
        let n = self.len as f64;
        let mut buf: Vec<f64> = c.iter().copied().collect();
        // rustdct's DCT-III halves the DC term
        buf[0] *= 2.0 * (1.0 / n).sqrt();
        let sk = (2.0 / n).sqrt();
        for b in buf.iter_mut().skip(1) {
            *b *= sk;
        }
        self.plan.process_dct3(&mut buf);
        DVector::from_vec(buf)
    }
}

impl fmt::Debug for Dct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dct({})", self.len)
    }
}

#[derive(Clone)]
enum Node {
    Dense(Arc<DMatrix<f64>>),
    Identity(usize),
    Zero { rows: usize, cols: usize },
    Diagonal(Arc<DVector<f64>>),
    FirstDifference(usize),
    Dct(Arc<Dct>),
    Scaled(f64, Arc<LinearMap>),
    Composed(Arc<LinearMap>, Arc<LinearMap>),
    Sum(Arc<LinearMap>, Arc<LinearMap>),
    Adjoint(Arc<LinearMap>),
}

/// A linear operator `ℝ^in_dim → ℝ^out_dim` with its adjoint.
#[derive(Clone)]
pub struct LinearMap {
    node: Node,
    in_dim: usize,
    out_dim: usize,
}

impl fmt::Debug for LinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Dense(m) => write!(f, "Dense({}x{})", m.nrows(), m.ncols()),
            Node::Identity(n) => write!(f, "Identity({n})"),
            Node::Zero { rows, cols } => write!(f, "Zero({rows}x{cols})"),
            Node::Diagonal(d) => write!(f, "Diagonal({})", d.len()),
            Node::FirstDifference(n) => write!(f, "FirstDifference({n})"),
            Node::Dct(d) => write!(f, "{d:?}"),
            Node::Scaled(a, l) => write!(f, "Scaled({a}, {l:?})"),
            Node::Composed(o, i) => write!(f, "Composed({o:?} ∘ {i:?})"),
            Node::Sum(a, b) => write!(f, "Sum({a:?} + {b:?})"),
            Node::Adjoint(l) => write!(f, "Adjoint({l:?})"),
        }
    }
}

impl LinearMap {
    pub fn dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Input("dense operator must be non-empty".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("dense operator has non-finite entries".into()));
        }
        let (out_dim, in_dim) = m.shape();
        Ok(LinearMap { node: Node::Dense(Arc::new(m)), in_dim, out_dim })
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "identity dimension must be positive");
        LinearMap { node: Node::Identity(n), in_dim: n, out_dim: n }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero map dimensions must be positive");
        LinearMap { node: Node::Zero { rows, cols }, in_dim: cols, out_dim: rows }
    }

    pub fn diagonal(d: DVector<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Input("diagonal operator must be non-empty".into()));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("diagonal operator has non-finite entries".into()));
        }
        let n = d.len();
        Ok(LinearMap { node: Node::Diagonal(Arc::new(d)), in_dim: n, out_dim: n })
    }

    /// First-order difference `(Du)_i = u_{i+1} - u_i`, mapping `ℝ^n → ℝ^{n-1}`.
    pub fn first_difference(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Input(format!("first difference needs n >= 2, got {n}")));
        }
        Ok(LinearMap { node: Node::FirstDifference(n), in_dim: n, out_dim: n - 1 })
    }

    /// Orthonormal type-II DCT on `ℝ^n`.
    pub fn dct(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("DCT length must be positive".into()));
        }
        Ok(LinearMap { node: Node::Dct(Arc::new(Dct::new(n))), in_dim: n, out_dim: n })
    }

    pub fn scaled(alpha: f64, l: &LinearMap) -> Self {
        LinearMap {
            node: Node::Scaled(alpha, Arc::new(l.clone())),
            in_dim: l.in_dim,
            out_dim: l.out_dim,
        }
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &LinearMap, inner: &LinearMap) -> Result<Self> {
        if outer.in_dim != inner.out_dim {
            return Err(Error::Dimension(format!(
                "cannot compose {}x{} after {}x{}",
                outer.out_dim, outer.in_dim, inner.out_dim, inner.in_dim
            )));
        }
        Ok(LinearMap {
            node: Node::Composed(Arc::new(outer.clone()), Arc::new(inner.clone())),
            in_dim: inner.in_dim,
            out_dim: outer.out_dim,
        })
    }

    /// Composition of a chain, applied right to left.
    pub fn chain(maps: &[&LinearMap]) -> Result<Self> {
        let (last, rest) = maps
            .split_last()
            .ok_or_else(|| Error::Input("empty operator chain".into()))?;
        let mut acc = (*last).clone();
        for m in rest.iter().rev() {
            acc = LinearMap::compose(m, &acc)?;
        }
        Ok(acc)
    }

    pub fn sum(a: &LinearMap, b: &LinearMap) -> Result<Self> {
        if a.in_dim != b.in_dim || a.out_dim != b.out_dim {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                a.out_dim, a.in_dim, b.out_dim, b.in_dim
            )));
        }
        Ok(LinearMap {
            node: Node::Sum(Arc::new(a.clone()), Arc::new(b.clone())),
            in_dim: a.in_dim,
            out_dim: a.out_dim,
        })
    }

    pub fn adjoint(&self) -> Self {
        match &self.node {
            Node::Identity(_) | Node::Diagonal(_) => self.clone(),
            Node::Zero { rows, cols } => LinearMap::zero(*cols, *rows),
            Node::Adjoint(inner) => (**inner).clone(),
            _ => LinearMap {
                node: Node::Adjoint(Arc::new(self.clone())),
                in_dim: self.out_dim,
                out_dim: self.in_dim,
            },
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kind(&self) -> MapKind {
        match self.node {
            Node::Dense(_) => MapKind::Dense,
            Node::Identity(_) => MapKind::Identity,
            Node::Zero { .. } => MapKind::Zero,
            Node::Diagonal(_) => MapKind::Diagonal,
            Node::FirstDifference(_) => MapKind::FirstDifference,
            Node::Dct(_) => MapKind::Dct,
            Node::Scaled(..) => MapKind::Scaled,
            Node::Composed(..) => MapKind::Composed,
            Node::Sum(..) => MapKind::Sum,
            Node::Adjoint(_) => MapKind::Adjoint,
        }
    }

    /// Entries of a diagonal map, if this is one.
    pub fn diagonal_entries(&self) -> Option<&DVector<f64>> {
        match &self.node {
            Node::Diagonal(d) => Some(d),
            _ => None,
        }
    }

    /// `α` when the map is `α·Id`.
    pub fn scaled_identity_factor(&self) -> Option<f64> {
        match &self.node {
            Node::Identity(_) => Some(1.0),
            Node::Scaled(a, l) => l.scaled_identity_factor().map(|b| a * b),
            _ => None,
        }
    }

    /// Whether any node of the expression is an explicit dense matrix.
    pub fn has_dense(&self) -> bool {
        match &self.node {
            Node::Dense(_) => true,
            Node::Scaled(_, l) | Node::Adjoint(l) => l.has_dense(),
            Node::Composed(a, b) | Node::Sum(a, b) => a.has_dense() || b.has_dense(),
            _ => false,
        }
    }

    pub fn is_zero_map(&self) -> bool {
        match &self.node {
            Node::Zero { .. } => true,
            Node::Scaled(a, l) => *a == 0.0 || l.is_zero_map(),
            Node::Composed(o, i) => o.is_zero_map() || i.is_zero_map(),
            Node::Adjoint(l) => l.is_zero_map(),
            _ => false,
        }
    }

    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        assert_eq!(u.len(), self.in_dim, "operator input dimension mismatch");
        match &self.node {
            Node::Dense(m) => &**m * u,
            Node::Identity(_) => u.clone(),
            Node::Zero { rows, .. } => DVector::zeros(*rows),
            Node::Diagonal(d) => d.component_mul(u),
            Node::FirstDifference(n) => DVector::from_fn(n - 1, |i, _| u[i + 1] - u[i]),
            Node::Dct(d) => d.forward(u),
            Node::Scaled(a, l) => l.apply(u) * *a,
            Node::Composed(o, i) => o.apply(&i.apply(u)),
            Node::Sum(a, b) => a.apply(u) + b.apply(u),
            Node::Adjoint(l) => l.apply_adjoint(u),
        }
    }

    pub fn apply_adjoint(&self, w: &DVector<f64>) -> DVector<f64> {
        assert_eq!(w.len(), self.out_dim, "operator adjoint input dimension mismatch");
        match &self.node {
            Node::Dense(m) => m.tr_mul(w),
            Node::Identity(_) => w.clone(),
            Node::Zero { cols, .. } => DVector::zeros(*cols),
            Node::Diagonal(d) => d.component_mul(w),
            Node::FirstDifference(n) => {
                let n = *n;
                DVector::from_fn(n, |j, _| {
                    let left = if j > 0 { w[j - 1] } else { 0.0 };
                    let right = if j < n - 1 { w[j] } else { 0.0 };
                    left - right
                })
            }
            Node::Dct(d) => d.inverse(w),
            Node::Scaled(a, l) => l.apply_adjoint(w) * *a,
            Node::Composed(o, i) => i.apply_adjoint(&o.apply_adjoint(w)),
            Node::Sum(a, b) => a.apply_adjoint(w) + b.apply_adjoint(w),
            Node::Adjoint(l) => l.apply(w),
        }
    }

    /// Exact inverse for the kinds where one is available structurally, or
    /// via LU for dense maps.
    pub fn inverse(&self) -> Result<LinearMap> {
        if self.in_dim != self.out_dim {
            return Err(Error::Designer(format!(
                "{}x{} operator is not square",
                self.out_dim, self.in_dim
            )));
        }
        match &self.node {
            Node::Identity(_) => Ok(self.clone()),
            Node::Dct(_) => Ok(self.adjoint()),
            Node::Adjoint(l) => Ok(l.inverse()?.adjoint()),
            Node::Diagonal(d) => {
                if d.iter().any(|v| *v == 0.0) {
                    return Err(Error::Designer("diagonal operator has a zero entry".into()));
                }
                LinearMap::diagonal(d.map(|v| 1.0 / v))
            }
            Node::Scaled(a, l) => {
                if *a == 0.0 {
                    return Err(Error::Designer("operator is scaled by zero".into()));
                }
                Ok(LinearMap::scaled(1.0 / a, &l.inverse()?))
            }
            Node::Composed(o, i) => LinearMap::compose(&i.inverse()?, &o.inverse()?),
            Node::Dense(m) => {
                let inv = DMatrix::clone(m)
                    .try_inverse()
                    .ok_or_else(|| Error::Designer("dense operator is singular".into()))?;
                LinearMap::dense(inv)
            }
            Node::Sum(..) => {
                let m = materialize(self, MATERIALIZE_BUDGET)?;
                let inv = m
                    .try_inverse()
                    .ok_or_else(|| Error::Designer("operator sum is singular".into()))?;
                LinearMap::dense(inv)
            }
            Node::Zero { .. } | Node::FirstDifference(_) => {
                Err(Error::Designer(format!("{:?} operator is not invertible", self.kind())))
            }
        }
    }
}

/// `B*B` in the cheapest form available.
#[derive(Debug, Clone)]
pub(crate) enum Gram {
    Zero,
    Scalar(f64),
    Dense(DMatrix<f64>),
    /// Dense `B*B` whose inverse is tridiagonal, applied by a banded solve.
    InverseTridiagonal(DMatrix<f64>, Tridiagonal),
    General(LinearMap),
}

const BAND_TOL: f64 = 1e-10;

/// LDLᵀ factors of a symmetric positive definite tridiagonal matrix.
#[derive(Debug, Clone)]
pub(crate) struct Tridiagonal {
    pivots: Vec<f64>,
    multipliers: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiagonal {
    /// Factor `g⁻¹` when it is tridiagonal to within `BAND_TOL`.
    fn of_inverse(g: &DMatrix<f64>) -> Option<Self> {
        let n = g.nrows();
        if n < 3 {
            return None;
        }
        let inv = g.clone().cholesky()?.inverse();
        let scale = inv.amax();
        let outside = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .filter(|(i, j)| i.abs_diff(*j) > 1)
            .map(|(i, j)| inv[(i, j)].abs())
            .fold(0.0, f64::max);
        if !(outside <= BAND_TOL * scale) {
            return None;
        }
        let off: Vec<f64> = (0..n - 1).map(|i| 0.5 * (inv[(i, i + 1)] + inv[(i + 1, i)])).collect();
        let mut pivots = vec![inv[(0, 0)]];
        let mut multipliers = Vec::with_capacity(n - 1);
        for i in 1..n {
            let l = off[i - 1] / pivots[i - 1];
            let d = inv[(i, i)] - l * off[i - 1];
            if !(d > 0.0) {
                return None;
            }
            multipliers.push(l);
            pivots.push(d);
        }
        Some(Tridiagonal { pivots, multipliers, off })
    }

    fn solve(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.pivots.len();
        let mut x = u.clone();
        for i in 1..n {
            x[i] -= self.multipliers[i - 1] * x[i - 1];
        }
        x[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.off[i] * x[i + 1]) / self.pivots[i];
        }
        x
    }
}

impl Gram {
    pub(crate) fn new(b: &LinearMap) -> Result<Self> {
        if b.is_zero_map() {
            return Ok(Gram::Zero);
        }
        if let Some(alpha) = b.scaled_identity_factor() {
            return Ok(Gram::Scalar(alpha * alpha));
        }
        if b.has_dense() && b.in_dim() * b.out_dim() <= EXACT_NORM_ENTRIES {
            let m = materialize(b, EXACT_NORM_ENTRIES)?;
            let g = m.tr_mul(&m);
            return Ok(match Tridiagonal::of_inverse(&g) {
                Some(t) => Gram::InverseTridiagonal(g, t),
                None => Gram::Dense(g),
            });
        }
        Ok(Gram::General(LinearMap::compose(&b.adjoint(), b)?))
    }

    pub(crate) fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        match self {
            Gram::Zero => DVector::zeros(u.len()),
            Gram::Scalar(c) => u * *c,
            Gram::Dense(m) => m * u,
            Gram::InverseTridiagonal(_, t) => t.solve(u),
            Gram::General(g) => g.apply(u),
        }
    }

    pub(crate) fn as_map(&self, dim: usize) -> Result<LinearMap> {
        Ok(match self {
            Gram::Zero => LinearMap::zero(dim, dim),
            Gram::Scalar(c) => LinearMap::scaled(*c, &LinearMap::identity(dim)),
            Gram::Dense(m) | Gram::InverseTridiagonal(m, _) => LinearMap::dense(m.clone())?,
            Gram::General(g) => g.clone(),
        })
    }
}

/// Estimate `‖L‖_op`.
///
/// Closed forms are used for identity, zero, diagonal, first-difference and
/// DCT maps (and scalings/adjoints of them); everything else goes through
/// power iteration on `L*L` from a seeded start vector.
pub fn operator_norm(l: &LinearMap, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("norm tolerance must be positive, got {tol}")));
    }
    match &l.node {
        Node::Identity(_) | Node::Dct(_) => Ok(1.0),
        Node::Zero { .. } => Ok(0.0),
        Node::Diagonal(d) => Ok(d.amax()),
        Node::FirstDifference(n) => {
            Ok(2.0 * (std::f64::consts::PI / (2.0 * *n as f64)).cos())
        }
        Node::Scaled(a, inner) => Ok(a.abs() * operator_norm(inner, tol, max_iter)?),
        Node::Adjoint(inner) => operator_norm(inner, tol, max_iter),
        _ => power_iteration(l, tol, max_iter),
    }
}

fn power_iteration(l: &LinearMap, tol: f64, max_iter: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut u = DVector::from_fn(l.in_dim, |_, _| rng.random_range(-1.0..1.0));
    u /= u.norm();
    let mut q_prev = f64::NAN;
    for _ in 0..max_iter {
        let lu = l.apply(&u);
        let q = lu.norm_squared();
        if q == 0.0 {
            return Ok(0.0);
        }
        if (q - q_prev).abs() <= tol * q {
            return Ok(q.sqrt());
        }
        q_prev = q;
        let next = l.apply_adjoint(&lu);
        let nn = next.norm();
        if nn == 0.0 {
            return Ok(0.0);
        }
        u = next / nn;
    }
    Err(Error::NonConvergence {
        what: "power iteration",
        iterations: max_iter,
        last: q_prev.max(0.0).sqrt(),
    })
}

/// Dense matrix of `L`, built column by column from the standard basis.
pub fn materialize(l: &LinearMap, budget: usize) -> Result<DMatrix<f64>> {
    let entries = l.in_dim.saturating_mul(l.out_dim);
    if entries > budget {
        return Err(Error::Resource(format!(
            "materializing {}x{} exceeds budget of {budget} entries",
            l.out_dim, l.in_dim
        )));
    }
    if let Node::Dense(m) = &l.node {
        return Ok((**m).clone());
    }
    let mut out = DMatrix::zeros(l.out_dim, l.in_dim);
    let mut e = DVector::zeros(l.in_dim);
    for j in 0..l.in_dim {
        e[j] = 1.0;
        out.set_column(j, &l.apply(&e));
        e[j] = 0.0;
    }
    Ok(out)
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Input(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn symmetrized(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square_finite(m)?;
    let asym = (m - m.transpose()).amax();
    let scale = m.amax().max(1.0);
    if asym > 1e-10 * scale {
        return Err(Error::Input(format!("matrix asymmetry {asym:e} exceeds tolerance")));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let s = symmetrized(m)?;
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn min_eigenvalue_symmetric(m: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?[0])
}

pub fn max_eigenvalue_symmetric(m: &DMatrix<f64>) -> Result<f64> {
    Ok(*symmetric_eigenvalues(m)?.last().expect("non-empty"))
}

/// Smallest singular value of `L`; zero when `L` is wide.
pub fn min_singular_value(l: &LinearMap) -> Result<f64> {
    if l.out_dim < l.in_dim {
        return Ok(0.0);
    }
    let m = materialize(l, MATERIALIZE_BUDGET)?;
    let sv = m.singular_values();
    Ok(sv.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Write a dense matrix as row-major CSV with round-trip float formatting.
pub fn write_dense_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_dense_csv<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = parse_csv_row(line).map_err(|msg| Error::Parse { line: idx + 1, msg })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 0, msg: "empty matrix".into() });
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub(crate) fn parse_csv_row(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split(',')
        .map(|tok| {
            let tok = tok.trim();
            match tok {
                "inf" | "+inf" | "Inf" => Ok(f64::INFINITY),
                "-inf" | "-Inf" => Ok(f64::NEG_INFINITY),
                _ => tok.parse::<f64>().map_err(|e| format!("bad number '{tok}': {e}")),
            }
        })
        .collect()
}
