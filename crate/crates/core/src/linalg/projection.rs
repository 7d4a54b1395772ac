use super::{herm_eig, identity, norm2, normalized_trace, svd, CMatrix};
use crate::error::{Error, Result};

/// Default rank tolerance, relative to the largest singular value.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Orthogonal projection with its rank and the tolerance it was built at.
#[derive(Debug, Clone)]
pub struct Projection {
    pub matrix: CMatrix,
    pub rank: usize,
    pub tol: f64,
}

impl Projection {
    /// Wraps a matrix after checking it is a self-adjoint idempotent.
    pub fn new(matrix: CMatrix, tol: f64) -> Result<Self> {
        super::check_matrix(&matrix)?;
        let idem = norm2(&(&matrix * &matrix - &matrix));
        let sa = norm2(&(&matrix - matrix.adjoint()));
        if idem > tol || sa > tol {
            return Err(Error::InvalidParameter(format!(
                "not a projection: |P^2-P| = {idem:e}, |P-P*| = {sa:e}"
            )));
        }
        let rank = (matrix.nrows() as f64 * normalized_trace(&matrix).re).round() as usize;
        Ok(Self { matrix, rank, tol })
    }

    /// Projection onto the span of orthonormal columns.
    pub fn from_basis(basis: &CMatrix, n: usize, tol: f64) -> Self {
        let matrix = if basis.ncols() == 0 {
            CMatrix::zeros(n, n)
        } else {
            basis * basis.adjoint()
        };
        Self {
            matrix,
            rank: basis.ncols(),
            tol,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(n, n),
            rank: 0,
            tol: DEFAULT_RANK_TOL,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: identity(n),
            rank: n,
            tol: DEFAULT_RANK_TOL,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `tau(P) = rank / n`.
    pub fn trace(&self) -> f64 {
        self.rank as f64 / self.dim() as f64
    }

    pub fn complement(&self) -> Self {
        Self {
            matrix: identity(self.dim()) - &self.matrix,
            rank: self.dim() - self.rank,
            tol: self.tol,
        }
    }

    /// Orthonormal basis of the range (`n x rank`).
    pub fn basis(&self) -> CMatrix {
        let n = self.dim();
        if self.rank == 0 {
            return CMatrix::zeros(n, 0);
        }
        let sym = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        let eig = herm_eig(&sym).expect("symmetrized projection is Hermitian");
        eig.vectors.columns(n - self.rank, self.rank).into_owned()
    }

    /// `max(|P^2 - P|_2, |P - P*|_2)`.
    pub fn defect(&self) -> f64 {
        let p = &self.matrix;
        norm2(&(p * p - p)).max(norm2(&(p - p.adjoint())))
    }

    /// `|P T P - T P|_2`, zero exactly when the range is `T`-invariant.
    pub fn invariance_residual(&self, t: &CMatrix) -> f64 {
        let p = &self.matrix;
        norm2(&(p * t * p - t * p))
    }
}

/// Projection onto the span of left singular vectors of `e` whose singular
/// value exceeds `tol * s_max`.
pub fn range_projection(e: &CMatrix, tol: f64) -> Projection {
    let n = e.nrows();
    let dec = svd(e);
    let smax = dec.s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Projection {
            matrix: CMatrix::zeros(n, n),
            rank: 0,
            tol,
        };
    }
    let rank = dec.s.iter().take_while(|&&s| s > tol * smax).count();
    let basis = dec.u.columns(0, rank).into_owned();
    Projection::from_basis(&basis, n, tol)
}

/// Projection onto `range(P) ∩ range(Q)`.
///
/// A unit vector lies in both ranges iff it is an eigenvector of `P + Q`
/// with eigenvalue 2; near-intersections show up as eigenvalues
/// `1 + cos(theta)` for small principal angles `theta`.
pub fn proj_meet(p: &Projection, q: &Projection) -> Result<Projection> {
    super::check_same_dim(&p.matrix, &q.matrix)?;
    let n = p.dim();
    let tol = p.tol.max(q.tol);
    if p.rank == 0 || q.rank == 0 {
        return Ok(Projection {
            matrix: CMatrix::zeros(n, n),
            rank: 0,
            tol,
        });
    }
    let sum = &p.matrix + &q.matrix;
    let sym = (&sum + sum.adjoint()).scale(0.5);
    let eig = herm_eig(&sym)?;
    let rank = eig.values.iter().filter(|&&v| v >= 2.0 - tol).count();
    let basis = eig.vectors.columns(n - rank, rank).into_owned();
    Ok(Projection::from_basis(&basis, n, tol))
}

/// Join via complements: `P ∨ Q = (P⊥ ∧ Q⊥)⊥`.
pub fn proj_join(p: &Projection, q: &Projection) -> Result<Projection> {
    Ok(proj_meet(&p.complement(), &q.complement())?.complement())
}
