//! Dense complex linear algebra helpers.
//!
//! nalgebra's generic gemm is slow for complex scalars, so products above a
//! small size are routed through three real matrix products (Gauss/Karatsuba
//! split), which hit the optimized `f64` kernel.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const SPLIT_THRESHOLD: usize = 32;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn split(m: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

/// Complex matrix product `a * b`.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimension mismatch");
    if a.nrows().max(a.ncols()).max(b.ncols()) < SPLIT_THRESHOLD {
        return a * b;
    }
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let t1 = &ar * &br;
    let t2 = &ai * &bi;
    let t3 = (&ar + &ai) * (&br + &bi);
    CMatrix::from_fn(a.nrows(), b.ncols(), |i, j| {
        C64::new(t1[(i, j)] - t2[(i, j)], t3[(i, j)] - t1[(i, j)] - t2[(i, j)])
    })
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// `u * m * u†`
pub fn conjugate(u: &CMatrix, m: &CMatrix) -> CMatrix {
    matmul(&matmul(u, m), &u.adjoint())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().sum()
}

/// Max absolute elementwise deviation from Hermiticity.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    eigh(m).0
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let n = m.nrows();
    let scaled = CMatrix::from_fn(n, n, |i, j| vecs[(i, j)] * f(vals[j]));
    matmul(&scaled, &vecs.adjoint())
}

/// Principal square root of a positive semidefinite matrix (negative
/// eigenvalues from roundoff are clipped to zero).
pub fn sqrtm_psd(m: &CMatrix) -> CMatrix {
    hermitian_fn(m, |x| x.max(0.0).sqrt())
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    eigvalsh(m).iter().map(|x| x.abs()).sum()
}

fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm: matrix must be square");
    if n == 0 {
        return a.clone();
    }
    let nrm = norm1(a);
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.scale(0.5_f64.powi(s));
    let id = identity(n);
    let a2 = matmul(&a, &a);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a4, &a2);
    let b = &PADE13;
    let lin = |m6: f64, m4: f64, m2: f64, m0: f64| -> CMatrix {
        a6.scale(m6) + a4.scale(m4) + a2.scale(m2) + id.scale(m0)
    };
    let u_inner = matmul(&a6, &lin(b[13], b[11], b[9], 0.0)) + lin(b[7], b[5], b[3], b[1]);
    let u = matmul(&a, &u_inner);
    let v = matmul(&a6, &lin(b[12], b[10], b[8], 0.0)) + lin(b[6], b[4], b[2], b[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("expm: singular Padé denominator");
    for _ in 0..s {
        r = matmul(&r, &r);
    }
    r
}

/// Orthonormal basis (columns) for the orthogonal complement of the span of
/// the given orthonormal columns.
pub fn orthogonal_complement(basis: &CMatrix) -> CMatrix {
    let n = basis.nrows();
    let proj = matmul(basis, &basis.adjoint());
    let comp = identity(n) - proj;
    let (vals, vecs) = eigh(&comp);
    let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > 0.5).collect();
    CMatrix::from_fn(n, keep.len(), |i, j| vecs[(i, keep[j])])
}

/// Unitary factor of the polar decomposition of a square matrix.
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    matmul(&u, &v_t)
}

pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
