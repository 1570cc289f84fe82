//! Validated bipartite density matrices.

use crate::error::{Error, Result};
use crate::matlin::{self, CMatrix, Subsystem};

/// Allowed deviation of the trace from one before renormalising.
pub const TRACE_TOL: f64 = 1e-8;
/// Most negative eigenvalue accepted for an input state.
pub const PSD_TOL: f64 = 1e-9;
/// Generators clip eigenvalues in `(−CLIP_TOL, 0)` to zero.
pub const CLIP_TOL: f64 = 1e-12;

/// Hermitian, unit-trace, positive semidefinite matrix on `C^{d_A} ⊗ C^{d_B}`.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMatrix,
    dims: (usize, usize),
}

impl DensityMatrix {
    /// Validates and symmetrises `m`; the trace is renormalised to exactly one.
    pub fn new(m: CMatrix, dims: (usize, usize)) -> Result<Self> {
        let (da, db) = dims;
        if da == 0 || db == 0 || m.nrows() != da * db || m.ncols() != da * db {
            return Err(Error::Dimension(format!(
                "matrix {}x{} does not match dims {da}x{db}",
                m.nrows(),
                m.ncols()
            )));
        }
        let h = matlin::hermitize(&m)?;
        let tr = h.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidArgument(format!("trace is {tr}, expected 1")));
        }
        let h = h.unscale(tr);
        let min = matlin::min_eigenvalue(&h)?;
        if min < -PSD_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(Self { matrix: h, dims })
    }

    /// Normalises a PSD matrix of arbitrary positive trace, clipping tiny
    /// negative eigenvalues. Used by the state generators.
    pub fn from_unnormalized(m: CMatrix, dims: (usize, usize)) -> Result<Self> {
        let h = matlin::hermitize(&m)?;
        let tr = h.trace().re;
        if tr.is_nan() || tr <= 0.0 {
            return Err(Error::InvalidArgument(format!("matrix has non-positive trace {tr}")));
        }
        let h = h.unscale(tr);
        let spec = matlin::hermitian_eig(&h)?;
        let min = spec.min();
        let h = if min < -CLIP_TOL {
            return Err(Error::NotPositive { min_eigenvalue: min });
        } else if min < 0.0 {
            let clipped = spec.map(|l| l.max(0.0));
            let t = clipped.trace().re;
            let c = clipped.unscale(t);
            (&c + c.adjoint()).scale(0.5)
        } else {
            h
        };
        Self::new(h, dims)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn reduced(&self, keep: Subsystem) -> CMatrix {
        matlin::partial_trace(&self.matrix, self.dims, keep).expect("dims validated at construction")
    }

    pub fn purity(&self) -> f64 {
        matlin::trace_product(&self.matrix, &self.matrix).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        matlin::min_eigenvalue(&self.matrix).expect("validated Hermitian")
    }

    pub fn maximally_mixed(dims: (usize, usize)) -> Self {
        let n = dims.0 * dims.1;
        Self { matrix: CMatrix::identity(n, n).unscale(n as f64), dims }
    }

    pub fn product(a: &CMatrix, b: &CMatrix) -> Result<Self> {
        Self::new(matlin::kron(a, b), (a.nrows(), b.nrows()))
    }

    /// Projector onto a (not necessarily normalised) vector.
    pub fn pure(psi: &[num_complex::Complex64], dims: (usize, usize)) -> Result<Self> {
        let v = CMatrix::from_column_slice(psi.len(), 1, psi);
        Self::from_unnormalized(&v * v.adjoint(), dims)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::c64;

    #[test]
    fn validation() {
        assert!(DensityMatrix::new(CMatrix::identity(4, 4).scale(0.25), (2, 2)).is_ok());
        assert!(DensityMatrix::new(CMatrix::identity(4, 4), (2, 2)).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(4, 4).scale(0.25), (2, 3)).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c64(1.5, 0.0);
        m[(1, 1)] = c64(-0.5, 0.0);
        assert!(matches!(DensityMatrix::new(m, (1, 2)), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn pure_state_normalised() {
        let s = DensityMatrix::pure(&[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)], (2, 2)).unwrap();
        assert!((s.purity() - 1.0).abs() < 1e-14);
        assert!((s.reduced(Subsystem::A) - CMatrix::identity(2, 2).scale(0.5)).norm() < 1e-15);
    }
}
