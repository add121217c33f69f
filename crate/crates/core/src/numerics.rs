//! Small dense complex linear algebra.
//!
//! Matrices here are tiny (order at most a few dozen), so the Hermitian
//! eigensolver is a plain cyclic Jacobi sweep. Storage is nalgebra's
//! column-major `DMatrix<Complex64>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not Hermitian (max |A - A^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("empty matrix")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite entry encountered")]
    NonFinite,
    #[error("eigensolver did not converge (off-diagonal residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("matrix is not positive definite enough to solve (condition estimate {condition:e})")]
    NearSingular { condition: f64 },
}

/// A square complex matrix with `A == A^H` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Accepts `a` if it is Hermitian up to `1e-12 * max(1, max|a|)`, then
    /// symmetrizes it.
    pub fn new(a: CMatrix) -> Result<Self, NumericsError> {
        if a.nrows() != a.ncols() {
            return Err(NumericsError::NotSquare { rows: a.nrows(), cols: a.ncols() });
        }
        if a.nrows() == 0 {
            return Err(NumericsError::Empty);
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut dev: f64 = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
            }
        }
        if dev > 1e-12 * scale {
            return Err(NumericsError::NotHermitian { deviation: dev });
        }
        Ok(Self::symmetrize(a))
    }

    /// Takes the Hermitian part `(A + A^H)/2` without any check.
    pub fn from_hermitian_part(a: &CMatrix) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "Hermitian part of a non-square matrix");
        Self::symmetrize((a + a.adjoint()).scale(0.5))
    }

    fn symmetrize(mut a: CMatrix) -> Self {
        let n = a.nrows();
        for i in 0..n {
            a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
                a[(i, j)] = v;
                a[(j, i)] = v.conj();
            }
        }
        HermitianMatrix(a)
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Eigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` pairs with `values[k]`.
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn max_value(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn min_value(&self) -> f64 {
        self.values[0]
    }
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic complex Jacobi eigendecomposition.
pub fn hermitian_eig(a: &HermitianMatrix) -> Result<Eigen, NumericsError> {
    let n = a.order();
    let mut m = a.as_matrix().clone();
    let mut v = CMatrix::identity(n, n);
    let fro = m.norm();
    if fro == 0.0 {
        return Ok(Eigen { values: vec![0.0; n], vectors: v });
    }
    let target = 1e-15 * fro;
    let max_sweeps = (10 * n * n).max(30);
    let mut sweeps = 0;
    while off_diagonal_norm(&m) > target {
        if sweeps == max_sweeps {
            return Err(NumericsError::NoConvergence { residual: off_diagonal_norm(&m) / fro });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let e = apq / mag;
                let tau = (m[(q, q)].re - m[(p, p)].re) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U = identity except U_pp = U_qq = c, U_pq = s e, U_qp = -s conj(e).
                let upq = e * s;
                let uqp = -e.conj() * s;
                for r in 0..n {
                    let mp = m[(r, p)];
                    let mq = m[(r, q)];
                    m[(r, p)] = mp * c + mq * uqp;
                    m[(r, q)] = mp * upq + mq * c;
                }
                for col in 0..n {
                    let mp = m[(p, col)];
                    let mq = m[(q, col)];
                    m[(p, col)] = mp * c + mq * uqp.conj();
                    m[(q, col)] = mp * upq.conj() + mq * c;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                for r in 0..n {
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = vp * c + vq * uqp;
                    v[(r, q)] = vp * upq + vq * c;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(x, x)].re.total_cmp(&m[(y, y)].re));
    let values = order.iter().map(|&k| m[(k, k)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

/// Eigenvalue of largest modulus of a general square matrix (ties: larger
/// real part). Backed by nalgebra's complex Schur decomposition.
pub fn max_eig_general(a: &CMatrix) -> Result<Complex64, NumericsError> {
    if a.nrows() != a.ncols() {
        return Err(NumericsError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if a.nrows() == 0 {
        return Err(NumericsError::Empty);
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), 1e-15, 10_000)
        .ok_or(NumericsError::NoConvergence { residual: f64::NAN })?;
    let eigs = schur.eigenvalues().ok_or(NumericsError::NoConvergence { residual: f64::NAN })?;
    let mut best = eigs[0];
    for &z in eigs.iter().skip(1) {
        let (nz, nb) = (z.norm(), best.norm());
        let tie = (nz - nb).abs() <= 1e-12 * nb.max(1e-300);
        if (!tie && nz > nb) || (tie && z.re > best.re) {
            best = z;
        }
    }
    Ok(best)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-major stacking.
pub fn vec(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`] for a square `n x n` result.
pub fn unvec(v: &CVector, n: usize) -> CMatrix {
    assert_eq!(v.len(), n * n, "unvec length");
    CMatrix::from_column_slice(n, n, v.as_slice())
}

/// Solves `A x = b` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &HermitianMatrix, b: &CVector) -> Result<CVector, NumericsError> {
    let n = a.order();
    if b.len() != n {
        return Err(NumericsError::Dimension { expected: n, got: b.len() });
    }
    let eig = hermitian_eig(a)?;
    let (lo, hi) = (eig.min_value(), eig.max_value());
    if hi <= 0.0 || lo <= 1e-12 * hi {
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        return Err(NumericsError::NearSingular { condition });
    }
    let chol = nalgebra::linalg::Cholesky::new(a.as_matrix().clone())
        .ok_or(NumericsError::NearSingular { condition: hi / lo })?;
    let x = chol.solve(b);
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    Ok(x)
}

/// `exp(j * angle(z))`, with the angle of zero taken as 0.
pub fn unit_phase(z: Complex64) -> Complex64 {
    if z.norm() == 0.0 {
        ONE
    } else {
        z / z.norm()
    }
}
