//! Dense matrix kernels shared by every other module: top eigen/singular
//! subspaces, complements, projections, Kronecker products and the sin-theta
//! subspace distance.
//!
//! Eigen and SVD outputs are canonical only as subspaces: columns may be
//! rotated or sign-flipped between runs, so comparisons go through
//! [`sin_theta`], never column-wise.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{argument, Result};

/// Dense real matrix, the universal data carrier.
pub type Matrix = DMatrix<f64>;

const ORTHO_TOL: f64 = 1e-10;

/// A p x r column-orthonormal basis, identified with its column span.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Matrix,
}

impl Subspace {
    /// Wraps a column-orthonormal matrix. Fails if `basis^T basis` deviates
    /// from the identity by more than 1e-10 in Frobenius norm or any entry is
    /// non-finite.
    pub fn new(basis: Matrix) -> Result<Self> {
        if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
            return Err(argument(format!(
                "subspace rank {} out of range for ambient dimension {}",
                basis.ncols(),
                basis.nrows()
            )));
        }
        if basis.iter().any(|x| !x.is_finite()) {
            return Err(argument("subspace basis contains non-finite entries"));
        }
        let gram = basis.transpose() * &basis;
        let dev = (&gram - Matrix::identity(basis.ncols(), basis.ncols())).norm();
        if dev > ORTHO_TOL {
            return Err(argument(format!(
                "basis columns are not orthonormal (deviation {dev:.3e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Re-orthonormalizes by QR before wrapping; for bases that are
    /// orthonormal only up to roundoff beyond the constructor tolerance.
    pub fn orthonormalize(m: Matrix) -> Result<Self> {
        let r = m.ncols();
        let qr = m.qr();
        let q = qr.q().columns(0, r).into_owned();
        Self::new(q)
    }

    /// The identity basis of R^p (rank = ambient dimension).
    pub fn full(p: usize) -> Self {
        Self {
            basis: Matrix::identity(p, p),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// True when the span is all of R^p (complement is empty).
    pub fn is_full(&self) -> bool {
        self.rank() == self.ambient_dim()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn into_basis(self) -> Matrix {
        self.basis
    }
}

/// Top-`r` eigenvector subspace of a symmetric matrix, eigenvalues ordered
/// descending. The input is symmetrized as (S + S^T)/2 before decomposition
/// to suppress floating-point asymmetry; genuinely asymmetric input is
/// rejected.
pub fn top_eigenvectors(s: &Matrix, r: usize) -> Result<Subspace> {
    check_symmetric(s)?;
    let p = s.nrows();
    if r < 1 || r > p {
        return Err(argument(format!("rank {r} out of range 1..={p}")));
    }
    let sym = (s + s.transpose()) / 2.0;
    let eig = SymmetricEigen::new(sym);
    let order = descending_order(eig.eigenvalues.as_slice());
    let mut basis = Matrix::zeros(p, r);
    for (j, &idx) in order.iter().take(r).enumerate() {
        basis.set_column(j, &eig.eigenvectors.column(idx));
    }
    Subspace::new(basis)
}

/// All eigenvalues of a symmetric matrix, descending.
pub fn symmetric_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(s)?;
    let sym = (s + s.transpose()) / 2.0;
    let eig = SymmetricEigen::new(sym);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(vals)
}

/// Top-`r` left singular subspace of `m`, computed as the top eigenvectors
/// of the Gram matrix M M^T. (The backend's vector-producing SVD returns an
/// inconsistent factorization on some exactly rank-deficient inputs, so the
/// symmetric eigensolver is used instead; the Gram route is accurate to
/// roundoff whenever the relevant singular gap is open.) When `r` exceeds the
/// numerical rank, trailing columns are an arbitrary orthonormal completion.
pub fn top_left_singular_vectors(m: &Matrix, r: usize) -> Result<Subspace> {
    let k = m.nrows().min(m.ncols());
    if r < 1 || r > k {
        return Err(argument(format!("rank {r} out of range 1..={k}")));
    }
    let gram = m * m.transpose();
    top_eigenvectors(&gram, r)
}

/// Singular values of `m`, descending.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut vals: Vec<f64> = svd.singular_values.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    vals
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Orthonormal basis of the orthogonal complement of `u`, computed as the
/// top (p-r) eigenvectors of I - U U^T.
pub fn orthonormal_complement(u: &Subspace) -> Result<Subspace> {
    let p = u.ambient_dim();
    let r = u.rank();
    if r >= p {
        return Err(argument(
            "complement of a full-dimensional subspace is empty",
        ));
    }
    let proj = Matrix::identity(p, p) - u.basis() * u.basis().transpose();
    top_eigenvectors(&proj, p - r)
}

/// sin-theta distance between two equal-rank subspaces: the operator norm of
/// U_perp^T V, equivalently the largest principal-angle sine. Computed from
/// the complement-projected basis (I - U U^T) V, which shares its singular
/// values with U_perp^T V.
pub fn sin_theta(u: &Subspace, v: &Subspace) -> Result<f64> {
    check_same_shape(u, v)?;
    if u.is_full() {
        return Ok(0.0);
    }
    let rejected = v.basis() - u.basis() * (u.basis().transpose() * v.basis());
    Ok(spectral_norm(&rejected).min(1.0))
}

/// Frobenius-norm sin-theta distance, ||U_perp^T V||_F.
pub fn sin_theta_frob(u: &Subspace, v: &Subspace) -> Result<f64> {
    check_same_shape(u, v)?;
    if u.is_full() {
        return Ok(0.0);
    }
    let rejected = v.basis() - u.basis() * (u.basis().transpose() * v.basis());
    Ok(rejected.norm())
}

/// Kronecker product with the index convention
/// (A (x) B)_{p3(r-1)+v, p4(s-1)+w} = A_{rs} B_{vw}.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    /// P_U x: keep the component in span(U).
    Span,
    /// P_{U_perp} x: remove the component in span(U).
    Complement,
}

/// Applies P_U or P_{U_perp} to one side of `x` without materializing the
/// p x p projector.
pub fn project_out(x: &Matrix, u: &Subspace, side: Side, part: Part) -> Result<Matrix> {
    let dim = match side {
        Side::Left => x.nrows(),
        Side::Right => x.ncols(),
    };
    if dim != u.ambient_dim() {
        return Err(argument(format!(
            "projection dimension mismatch: matrix side {dim}, subspace ambient {}",
            u.ambient_dim()
        )));
    }
    let projected = match side {
        Side::Left => u.basis() * (u.basis().transpose() * x),
        Side::Right => (x * u.basis()) * u.basis().transpose(),
    };
    Ok(match part {
        Part::Span => projected,
        Part::Complement => x - projected,
    })
}

fn check_symmetric(s: &Matrix) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(argument(format!(
            "matrix is {}x{}, expected square",
            s.nrows(),
            s.ncols()
        )));
    }
    let scale = s.norm().max(1.0);
    let asym = (s - s.transpose()).norm();
    if asym > 1e-10 * scale {
        return Err(argument(format!(
            "matrix is not symmetric (relative deviation {:.3e})",
            asym / scale
        )));
    }
    Ok(())
}

fn check_same_shape(u: &Subspace, v: &Subspace) -> Result<()> {
    if u.ambient_dim() != v.ambient_dim() || u.rank() != v.rank() {
        return Err(argument(format!(
            "subspace shape mismatch: {}x{} vs {}x{}",
            u.ambient_dim(),
            u.rank(),
            v.ambient_dim(),
            v.rank()
        )));
    }
    Ok(())
}

fn descending_order(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    idx
}
