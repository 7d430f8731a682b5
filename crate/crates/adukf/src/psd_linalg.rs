//! Symmetric dense linear algebra for covariance handling.
//!
//! Filter covariances only stay positive definite in exact arithmetic; after
//! enough round-off they can drift to the semi-definite boundary. The
//! factorization here tolerates that: pivots inside a small band around zero
//! produce a zeroed column instead of a failure, and only genuinely negative
//! pivots are rejected. The rank-1 update/downdate and the QR-based factor
//! compression are what the square-root filter variant runs on.

use thiserror::Error;

use crate::matrix::Mat;
use crate::Scalar;

/// Relative pivot tolerance, scaled by the largest absolute diagonal entry.
pub const DEFAULT_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    /// A Cholesky pivot fell below the negative tolerance band.
    #[error("matrix is indefinite: negative pivot at column {col}")]
    IndefiniteMatrix { col: usize },
    /// A rank-1 downdate would push the factored product indefinite.
    #[error("rank-1 downdate breaks positive definiteness at column {col}")]
    DowndateBreaksPD { col: usize },
    /// A solve was requested against a singular (semi-definite) matrix.
    #[error("matrix is singular: zero pivot at column {col}")]
    SingularMatrix { col: usize },
}

/// Square matrix that is symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    mat: Mat<T>,
}

impl<T: Scalar> SymMatrix<T> {
    /// Symmetrizes an arbitrary square matrix as `(M + Mᵀ)/2`.
    ///
    /// Idempotent: a symmetric input is returned unchanged.
    pub fn symmetrize(m: &Mat<T>) -> Self {
        assert!(m.is_square(), "symmetrize requires a square matrix");
        let half = T::from_f64(0.5).unwrap();
        let mut out = Mat::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            out[(i, i)] = m[(i, i)];
            for j in 0..i {
                let v = (m[(i, j)] + m[(j, i)]) * half;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Self { mat: out }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            mat: Mat::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: Mat::identity(n),
        }
    }

    pub fn from_diag(d: &[T]) -> Self {
        Self {
            mat: Mat::from_diag(d),
        }
    }

    /// Block-diagonal assembly; the result order is the sum of block orders.
    pub fn block_diag(blocks: &[&SymMatrix<T>]) -> Self {
        let n: usize = blocks.iter().map(|b| b.dim()).sum();
        let mut out = Mat::zeros(n, n);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.dim() {
                for j in 0..b.dim() {
                    out[(off + i, off + j)] = b[(i, j)];
                }
            }
            off += b.dim();
        }
        Self { mat: out }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn as_mat(&self) -> &Mat<T> {
        &self.mat
    }

    pub fn into_mat(self) -> Mat<T> {
        self.mat
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self[(i, i)]).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            mat: self.mat.add(&other.mat),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            mat: self.mat.scale(s),
        }
    }

    fn max_abs_diag(&self) -> T {
        (0..self.dim()).fold(T::zero(), |m, i| m.max(self[(i, i)].abs()))
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for SymMatrix<T> {
    type Output = T;

    fn index(&self, idx: (usize, usize)) -> &T {
        &self.mat[idx]
    }
}

/// Lower-triangular factor with nonnegative diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular<T> {
    mat: Mat<T>,
}

impl<T: Scalar> LowerTriangular<T> {
    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn as_mat(&self) -> &Mat<T> {
        &self.mat
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        self.mat.col(j)
    }

    /// Reconstructs the factored product `L Lᵀ` (exactly symmetric).
    pub fn product(&self) -> SymMatrix<T> {
        let n = self.dim();
        let mut out = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = T::zero();
                for k in 0..=j {
                    s = s + self.mat[(i, k)] * self.mat[(j, k)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        SymMatrix { mat: out }
    }

    /// Solves `L x = b` by forward substitution.
    pub fn forward_solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = vec![T::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for (k, &xk) in x[..i].iter().enumerate() {
                s = s - self.mat[(i, k)] * xk;
            }
            let d = self.mat[(i, i)];
            if d == T::zero() {
                return Err(LinalgError::SingularMatrix { col: i });
            }
            x[i] = s / d;
        }
        Ok(x)
    }

    /// Solves `Lᵀ x = b` by back substitution.
    pub fn back_solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for (k, &xk) in x.iter().enumerate().skip(i + 1) {
                s = s - self.mat[(k, i)] * xk;
            }
            let d = self.mat[(i, i)];
            if d == T::zero() {
                return Err(LinalgError::SingularMatrix { col: i });
            }
            x[i] = s / d;
        }
        Ok(x)
    }
}

/// Semi-definite Cholesky factorization `M = L Lᵀ`.
///
/// Pivots inside `±tol·max|diag|` are treated as zero: the column is zeroed
/// and the `definite` flag is cleared. Pivots below the band are an error.
pub fn psd_cholesky<T: Scalar>(
    m: &SymMatrix<T>,
    tol: T,
) -> Result<(LowerTriangular<T>, bool), LinalgError> {
    assert!(tol > T::zero(), "pivot tolerance must be positive");
    let n = m.dim();
    let band = tol * m.max_abs_diag();
    let mut l = Mat::zeros(n, n);
    let mut definite = true;
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d > band {
            let piv = d.sqrt();
            l[(j, j)] = piv;
            for i in j + 1..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / piv;
            }
        } else if d >= -band {
            // Semi-definite path: zero pivot, zero column.
            definite = false;
        } else {
            return Err(LinalgError::IndefiniteMatrix { col: j });
        }
    }
    Ok((LowerTriangular { mat: l }, definite))
}

/// [`psd_cholesky`] with the default pivot tolerance.
pub fn psd_cholesky_default<T: Scalar>(
    m: &SymMatrix<T>,
) -> Result<(LowerTriangular<T>, bool), LinalgError> {
    psd_cholesky(m, T::from_f64(DEFAULT_PIVOT_TOL).unwrap())
}

/// Sign of a rank-1 factor modification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateSign {
    Update,
    Downdate,
}

/// Rank-1 update/downdate of a Cholesky factor: returns `R` with
/// `R Rᵀ = L Lᵀ ± v vᵀ`.
///
/// The update uses plane rotations column by column (handles zero pivots);
/// the downdate uses the hyperbolic LINPACK-style recurrence and fails when
/// the modified product would lose positive definiteness.
pub fn chol_rank1<T: Scalar>(
    l: &LowerTriangular<T>,
    v: &[T],
    sign: UpdateSign,
) -> Result<LowerTriangular<T>, LinalgError> {
    let n = l.dim();
    assert_eq!(v.len(), n, "update vector length must match factor order");
    let mut l = l.mat.clone();
    let mut v = v.to_vec();
    for j in 0..n {
        let ljj = l[(j, j)];
        let vj = v[j];
        match sign {
            UpdateSign::Update => {
                let r = ljj.hypot(vj);
                if r == T::zero() {
                    continue;
                }
                let c = ljj / r;
                let s = vj / r;
                l[(j, j)] = r;
                for i in j + 1..n {
                    let lij = l[(i, j)];
                    l[(i, j)] = c * lij + s * v[i];
                    v[i] = c * v[i] - s * lij;
                }
            }
            UpdateSign::Downdate => {
                if vj == T::zero() {
                    continue;
                }
                let arg = ljj * ljj - vj * vj;
                if arg <= T::zero() {
                    return Err(LinalgError::DowndateBreaksPD { col: j });
                }
                let r = arg.sqrt();
                let c = r / ljj;
                let s = vj / ljj;
                l[(j, j)] = r;
                for i in j + 1..n {
                    l[(i, j)] = (l[(i, j)] - s * v[i]) / c;
                    v[i] = c * v[i] - s * l[(i, j)];
                }
            }
        }
    }
    Ok(LowerTriangular { mat: l })
}

/// Compresses a wide matrix `M` (r rows, c ≥ r columns) into the
/// lower-triangular `L` with `L Lᵀ = M Mᵀ`, via Householder QR of `Mᵀ`.
///
/// Diagonal signs are normalized to nonnegative so the factor is unique.
pub fn triangularize<T: Scalar>(m: &Mat<T>) -> LowerTriangular<T> {
    let r = m.rows();
    let c = m.cols();
    assert!(
        c >= r,
        "triangularize needs at least as many columns as rows"
    );
    // Householder QR on the tall transpose; only R is needed.
    let mut a = m.transpose();
    for k in 0..r {
        let mut norm = T::zero();
        for i in k..c {
            norm = norm + a[(i, k)] * a[(i, k)];
        }
        let norm = norm.sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if a[(k, k)] >= T::zero() { -norm } else { norm };
        let mut w: Vec<T> = (k..c).map(|i| a[(i, k)]).collect();
        w[0] = w[0] - alpha;
        let wnorm2 = w.iter().fold(T::zero(), |acc, &x| acc + x * x);
        a[(k, k)] = alpha;
        for i in k + 1..c {
            a[(i, k)] = T::zero();
        }
        if wnorm2 == T::zero() {
            continue;
        }
        let two = T::from_f64(2.0).unwrap();
        for j in k + 1..r {
            let mut proj = T::zero();
            for i in k..c {
                proj = proj + w[i - k] * a[(i, j)];
            }
            let coef = two * proj / wnorm2;
            for i in k..c {
                a[(i, j)] = a[(i, j)] - coef * w[i - k];
            }
        }
    }
    // L = Rᵀ with column signs flipped to a nonnegative diagonal.
    let mut l = Mat::zeros(r, r);
    for i in 0..r {
        for j in 0..=i {
            l[(i, j)] = a[(j, i)];
        }
    }
    for j in 0..r {
        if l[(j, j)] < T::zero() {
            for i in j..r {
                l[(i, j)] = -l[(i, j)];
            }
        }
    }
    LowerTriangular { mat: l }
}

/// Solves `M X = B` for symmetric positive definite `M`.
pub fn solve_spd<T: Scalar>(m: &SymMatrix<T>, b: &Mat<T>) -> Result<Mat<T>, LinalgError> {
    assert_eq!(m.dim(), b.rows(), "dimension mismatch in SPD solve");
    let (l, definite) = psd_cholesky_default(m)?;
    if !definite {
        return Err(LinalgError::SingularMatrix { col: 0 });
    }
    let mut x = Mat::zeros(b.rows(), b.cols());
    for j in 0..b.cols() {
        let y = l.forward_solve(&b.col(j))?;
        let xj = l.back_solve(&y)?;
        x.set_col(j, &xj);
    }
    Ok(x)
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse<T: Scalar>(m: &SymMatrix<T>) -> Result<SymMatrix<T>, LinalgError> {
    let inv = solve_spd(m, &Mat::identity(m.dim()))?;
    Ok(SymMatrix::symmetrize(&inv))
}
