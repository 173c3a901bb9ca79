//! Truncated Fock spaces, composite systems and the states and operators on
//! them.
//!
//! Composite spaces list their factors in a fixed order. For the full
//! two-node device that order is `(cavity S1, qubit I1, cavity S3, qubit I2)`;
//! see [`SpaceSpec::two_node`]. Index `i` of a composite basis is the
//! row-major (first factor slowest) combination of the factor indices.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use num_complex::Complex64 as C64;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const EIGEN_TOL: f64 = 1e-9;
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpaceSpec {
    dims: Vec<usize>,
}

impl SpaceSpec {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDimension("space needs at least one subsystem".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::InvalidDimension(format!("subsystem dimension {d} < 1")));
        }
        Ok(Self { dims })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn qubit() -> Self {
        Self { dims: vec![2] }
    }

    /// One cavity with its ancilla qubit: `(cavity, qubit)`.
    pub fn node(cutoff: usize) -> Result<Self> {
        Self::new(vec![cutoff, 2])
    }

    /// `(cavity S1, qubit I1, cavity S3, qubit I2)`.
    pub fn two_node(cutoff: usize) -> Result<Self> {
        Self::new(vec![cutoff, 2, cutoff, 2])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn concat(&self, other: &SpaceSpec) -> SpaceSpec {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SpaceSpec { dims }
    }

    pub fn subspace(&self, keep: &[usize]) -> Result<SpaceSpec> {
        check_indices(self, keep)?;
        SpaceSpec::new(keep.iter().map(|&k| self.dims[k]).collect())
    }

    /// Composite basis index from per-subsystem indices.
    pub fn index(&self, digits: &[usize]) -> usize {
        assert_eq!(digits.len(), self.dims.len());
        digits.iter().zip(&self.dims).fold(0, |acc, (&d, &n)| {
            assert!(d < n, "digit {d} out of range for subsystem of dim {n}");
            acc * n + d
        })
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &n) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % n;
            index /= n;
        }
        out
    }
}

fn check_indices(space: &SpaceSpec, idx: &[usize]) -> Result<()> {
    for (pos, &k) in idx.iter().enumerate() {
        if k >= space.n_subsystems() {
            return Err(Error::InvalidArgument(format!(
                "subsystem index {k} out of range for {} subsystems",
                space.n_subsystems()
            )));
        }
        if idx[..pos].contains(&k) {
            return Err(Error::InvalidArgument(format!("subsystem index {k} repeated")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOp {
    space: SpaceSpec,
    matrix: CMatrix,
}

impl LinearOp {
    pub fn new(space: SpaceSpec, matrix: CMatrix) -> Result<Self> {
        let n = space.total();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidDimension(format!(
                "operator is {}x{}, space has dimension {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    /// Operator on a single subsystem whose dimension is the matrix size.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let space = SpaceSpec::single(matrix.nrows())?;
        Self::new(space, matrix)
    }

    pub fn identity(space: &SpaceSpec) -> Self {
        Self { space: space.clone(), matrix: linalg::identity(space.total()) }
    }

    pub fn zeros(space: &SpaceSpec) -> Self {
        let n = space.total();
        Self { space: space.clone(), matrix: CMatrix::zeros(n, n) }
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    /// `self * rhs`; spaces must agree.
    pub fn compose(&self, rhs: &LinearOp) -> Result<Self> {
        same_space(&self.space, &rhs.space)?;
        Ok(Self { space: self.space.clone(), matrix: linalg::matmul(&self.matrix, &rhs.matrix) })
    }

    pub fn add(&self, rhs: &LinearOp) -> Result<Self> {
        same_space(&self.space, &rhs.space)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix + &rhs.matrix })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.map(|z| z * s) }
    }

    pub fn apply(&self, ket: &Ket) -> Result<CVector> {
        same_space(&self.space, &ket.space)?;
        Ok(&self.matrix * &ket.amplitudes)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermiticity_error(&self.matrix) <= tol
    }

    /// `max |U†U − I|` elementwise.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        linalg::max_abs(&(linalg::matmul(&self.matrix.adjoint(), &self.matrix) - linalg::identity(n)))
    }

    /// Lift a single-subsystem operator into `space` at position `slot`.
    pub fn embed(&self, space: &SpaceSpec, slot: usize) -> Result<LinearOp> {
        check_indices(space, &[slot])?;
        if space.dims()[slot] != self.dim() {
            return Err(Error::InvalidDimension(format!(
                "operator of dim {} does not fit subsystem {slot} of dim {}",
                self.dim(),
                space.dims()[slot]
            )));
        }
        let left: usize = space.dims()[..slot].iter().product();
        let right: usize = space.dims()[slot + 1..].iter().product();
        let m = linalg::kron(&linalg::kron(&linalg::identity(left), &self.matrix), &linalg::identity(right));
        LinearOp::new(space.clone(), m)
    }

    pub fn expect(&self, rho: &DensityMatrix) -> Result<C64> {
        same_space(&self.space, &rho.space)?;
        Ok(trace_product(&self.matrix, &rho.matrix))
    }
}

/// `Tr[a b]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn same_space(a: &SpaceSpec, b: &SpaceSpec) -> Result<()> {
    if a != b {
        return Err(Error::InvalidDimension(format!("space mismatch: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    space: SpaceSpec,
    amplitudes: CVector,
}

impl Ket {
    pub fn new(space: SpaceSpec, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.total() {
            return Err(Error::InvalidDimension(format!(
                "ket has {} amplitudes, space has dimension {}",
                amplitudes.len(),
                space.total()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!("ket norm {norm} is not 1")));
        }
        Ok(Self { space, amplitudes })
    }

    /// Normalizes `amplitudes`; zero vectors are rejected.
    pub fn normalized(space: SpaceSpec, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("cannot normalize the zero vector".into()));
        }
        Self::new(space, amplitudes.unscale(norm))
    }

    pub fn basis(space: &SpaceSpec, index: usize) -> Result<Self> {
        let n = space.total();
        if index >= n {
            return Err(Error::InvalidArgument(format!("basis index {index} >= dimension {n}")));
        }
        let mut v = CVector::zeros(n);
        v[index] = c(1.0, 0.0);
        Ok(Self { space: space.clone(), amplitudes: v })
    }

    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        Self::basis(&SpaceSpec::single(dim)?, n)
    }

    pub fn ground() -> Self {
        Self::basis(&SpaceSpec::qubit(), 0).expect("qubit basis")
    }

    pub fn excited() -> Self {
        Self::basis(&SpaceSpec::qubit(), 1).expect("qubit basis")
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn projector(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix { space: self.space.clone(), matrix: m }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: SpaceSpec,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(space: SpaceSpec, matrix: CMatrix) -> Result<Self> {
        let n = space.total();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidDimension(format!(
                "density matrix is {}x{}, space has dimension {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = linalg::hermiticity_error(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidArgument(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        let tr = linalg::trace(&matrix).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidArgument(format!("density matrix trace {tr} is not 1")));
        }
        let min = linalg::eigvalsh(&matrix)[0];
        if min < -EIGEN_TOL {
            return Err(Error::InvalidArgument(format!("density matrix has eigenvalue {min:e} < 0")));
        }
        Ok(Self { space, matrix: linalg::hermitian_part(&matrix) })
    }

    /// Trusted constructor for results of trace-preserving maps; only
    /// symmetrizes away roundoff.
    pub(crate) fn from_raw(space: SpaceSpec, matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), space.total());
        Self { space, matrix: linalg::hermitian_part(&matrix) }
    }

    /// Divides by the trace; errors on a vanishing trace.
    pub fn normalize(space: SpaceSpec, matrix: CMatrix) -> Result<Self> {
        let tr = linalg::trace(&matrix).re;
        if tr <= 0.0 {
            return Err(Error::InvalidArgument(format!("cannot normalize operator with trace {tr}")));
        }
        Ok(Self::from_raw(space, matrix.unscale(tr)))
    }

    pub fn from_ket(ket: &Ket) -> Self {
        ket.projector()
    }

    pub fn maximally_mixed(space: &SpaceSpec) -> Self {
        let n = space.total();
        Self { space: space.clone(), matrix: linalg::identity(n).unscale(n as f64) }
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.matrix, &self.matrix).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    pub fn expect(&self, op: &LinearOp) -> Result<f64> {
        Ok(op.expect(self)?.re)
    }

    /// `U ρ U†`
    pub fn evolve(&self, u: &LinearOp) -> Result<DensityMatrix> {
        same_space(&self.space, u.space())?;
        Ok(Self::from_raw(self.space.clone(), linalg::conjugate(u.matrix(), &self.matrix)))
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        same_space(&self.space, &other.space)?;
        Ok(0.5 * linalg::trace_norm_hermitian(&(&self.matrix - &other.matrix)))
    }
}

/// Annihilation and creation operators on a `dim`-level truncated mode.
pub fn ladder_ops(dim: usize) -> Result<(LinearOp, LinearOp)> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("ladder operators need dim >= 2, got {dim}")));
    }
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    let a = LinearOp::from_matrix(a)?;
    let ad = a.adjoint();
    Ok((a, ad))
}

pub fn number_op(dim: usize) -> Result<LinearOp> {
    let space = SpaceSpec::single(dim)?;
    let diag = CVector::from_fn(dim, |n, _| c(n as f64, 0.0));
    LinearOp::new(space, CMatrix::from_diagonal(&diag))
}

/// `exp(β a† − β* a)` on the truncated space.
///
/// Matrix elements close to the cutoff are distorted by truncation; a
/// warning is logged when `|β|² > dim / 4`.
pub fn displacement(dim: usize, beta: C64) -> Result<LinearOp> {
    if dim == 1 {
        return LinearOp::from_matrix(linalg::identity(1));
    }
    if beta.norm_sqr() > dim as f64 / 4.0 {
        log::warn!("displacement |beta|^2 = {:.3} is large for cutoff {dim}", beta.norm_sqr());
    }
    let (a, ad) = ladder_ops(dim)?;
    let gen = ad.matrix().map(|z| z * beta) - a.matrix().map(|z| z * beta.conj());
    LinearOp::from_matrix(linalg::expm(&gen))
}

/// `⟨n|D(γ)|m⟩` of the untruncated displacement operator for `n, m < dim`.
pub fn displacement_elements(dim: usize, gamma: C64) -> CMatrix {
    let lf = log_factorials(dim);
    let g2 = gamma.norm_sqr();
    let pref = (-0.5 * g2).exp();
    CMatrix::from_fn(dim, dim, |n, m| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..=n.min(m) {
            let mag = 0.5 * (lf[n] + lf[m]) - lf[k] - lf[n - k] - lf[m - k];
            acc += gamma.powu((n - k) as u32) * (-gamma.conj()).powu((m - k) as u32) * mag.exp();
        }
        acc * pref
    })
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n.max(1)];
    for k in 1..n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// Photon-number parity `exp(iπ a†a)`.
pub fn parity_op(dim: usize) -> Result<LinearOp> {
    let space = SpaceSpec::single(dim)?;
    let diag = CVector::from_fn(dim, |n, _| c(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0));
    LinearOp::new(space, CMatrix::from_diagonal(&diag))
}

/// Objects that compose under the Kronecker product.
pub trait Composite: Sized {
    fn space_of(&self) -> &SpaceSpec;
    fn kron_with(&self, other: &Self, space: SpaceSpec) -> Self;
}

impl Composite for LinearOp {
    fn space_of(&self) -> &SpaceSpec {
        &self.space
    }
    fn kron_with(&self, other: &Self, space: SpaceSpec) -> Self {
        LinearOp { space, matrix: linalg::kron(&self.matrix, &other.matrix) }
    }
}

impl Composite for Ket {
    fn space_of(&self) -> &SpaceSpec {
        &self.space
    }
    fn kron_with(&self, other: &Self, space: SpaceSpec) -> Self {
        Ket { space, amplitudes: self.amplitudes.kronecker(&other.amplitudes) }
    }
}

impl Composite for DensityMatrix {
    fn space_of(&self) -> &SpaceSpec {
        &self.space
    }
    fn kron_with(&self, other: &Self, space: SpaceSpec) -> Self {
        DensityMatrix { space, matrix: linalg::kron(&self.matrix, &other.matrix) }
    }
}

/// Kronecker composition in the order given.
pub fn tensor<T: Composite + Clone>(parts: &[T]) -> Result<T> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("tensor of an empty list".into()))?;
    let mut acc = first.clone();
    for p in rest {
        let space = acc.space_of().concat(p.space_of());
        acc = acc.kron_with(p, space);
    }
    Ok(acc)
}

/// Partial trace of an arbitrary operator over the subsystems not in `keep`.
/// The kept subsystems stay in their original order.
pub fn partial_trace_matrix(m: &CMatrix, space: &SpaceSpec, keep: &[usize]) -> Result<(CMatrix, SpaceSpec)> {
    check_indices(space, keep)?;
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    let dims = space.dims();
    let kept = SpaceSpec::new(keep_sorted.iter().map(|&k| dims[k]).collect())?;
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep_sorted.contains(k)).collect();
    let traced_space_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let n_traced: usize = traced_space_dims.iter().product();
    let nk = kept.total();
    let mut out = CMatrix::zeros(nk, nk);
    let mut digits = vec![0usize; dims.len()];
    let place = |digits: &mut Vec<usize>, kept_idx: usize, traced_idx: usize| {
        let kd = kept.digits(kept_idx);
        for (slot, &k) in keep_sorted.iter().enumerate() {
            digits[k] = kd[slot];
        }
        let mut rem = traced_idx;
        for (slot, &k) in traced.iter().enumerate().rev() {
            digits[k] = rem % traced_space_dims[slot];
            rem /= traced_space_dims[slot];
        }
    };
    let mut row_index = vec![0usize; nk * n_traced];
    for i in 0..nk {
        for t in 0..n_traced {
            place(&mut digits, i, t);
            row_index[i * n_traced + t] = space.index(&digits);
        }
    }
    for i in 0..nk {
        for j in 0..nk {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..n_traced {
                acc += m[(row_index[i * n_traced + t], row_index[j * n_traced + t])];
            }
            out[(i, j)] = acc;
        }
    }
    Ok((out, kept))
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("partial trace must keep at least one subsystem".into()));
    }
    let (m, space) = partial_trace_matrix(&rho.matrix, &rho.space, keep)?;
    Ok(DensityMatrix::from_raw(space, m))
}

/// Transpose of the factor `subsystem` only.
pub fn partial_transpose_matrix(m: &CMatrix, space: &SpaceSpec, subsystem: usize) -> Result<CMatrix> {
    check_indices(space, &[subsystem])?;
    let n = space.total();
    let digits: Vec<Vec<usize>> = (0..n).map(|i| space.digits(i)).collect();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut di = digits[i].clone();
            let mut dj = digits[j].clone();
            std::mem::swap(&mut di[subsystem], &mut dj[subsystem]);
            out[(space.index(&di), space.index(&dj))] = m[(i, j)];
        }
    }
    Ok(out)
}

pub fn partial_transpose(rho: &DensityMatrix, subsystem: usize) -> Result<LinearOp> {
    let m = partial_transpose_matrix(&rho.matrix, &rho.space, subsystem)?;
    LinearOp::new(rho.space.clone(), m)
}
