//! Dense complex/real matrix kernel.
//!
//! Thin layer over `nalgebra` that fixes the conventions the rest of the
//! crate relies on: eigenvalues and singular values sorted non-increasing,
//! Hermitian inputs checked then symmetrized, and bipartite index order
//! `(a, b) -> a * d_B + b`.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Relative Hermiticity tolerance, measured against the Frobenius norm.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| c64(x, 0.0))
}

pub fn real_part(m: &CMatrix) -> RMatrix {
    m.map(|z| z.re)
}

pub fn max_imag(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn ensure_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn ensure_square(m: &CMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Largest `|m_ij - conj(m_ji)|`.
pub fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Checks Hermiticity to [`HERMITIAN_TOL`] (relative) and returns `(M + M†)/2`.
pub fn hermitize(m: &CMatrix) -> Result<CMatrix> {
    ensure_square(m)?;
    ensure_finite(m)?;
    let asym = max_asymmetry(m);
    let allowed = HERMITIAN_TOL * m.norm().max(f64::MIN_POSITIVE);
    if asym > allowed {
        return Err(Error::NotHermitian {
            max_asymmetry: asym,
            allowed,
        });
    }
    Ok((m + m.adjoint()).scale(0.5))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let lam = self.values[j];
            scaled.column_mut(j).scale_mut(lam);
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `V f(Λ) V†` for a scalar function of the eigenvalues.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(lam));
        }
        &scaled * self.vectors.adjoint()
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

pub fn hermitian_eig(m: &CMatrix) -> Result<Spectrum> {
    let h = hermitize(m)?;
    Ok(hermitian_eig_unchecked(h))
}

/// Skips the Hermiticity check; the caller guarantees `h` is exactly Hermitian.
pub(crate) fn hermitian_eig_unchecked(h: CMatrix) -> Spectrum {
    let n = h.nrows();
    if n == 0 {
        return Spectrum {
            values: vec![],
            vectors: h,
        };
    }
    let eig = SymmetricEigen::new(h);
    let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&raw);
    let values = order.iter().map(|&i| raw[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Spectrum { values, vectors }
}

pub fn eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let h = hermitize(m)?;
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

pub fn min_eigenvalue(m: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.last().copied().unwrap_or(0.0))
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct RealSpectrum {
    pub values: Vec<f64>,
    pub vectors: RMatrix,
}

pub fn symmetric_eig(m: &RMatrix) -> Result<RealSpectrum> {
    let cm = to_complex(m);
    hermitize(&cm)?;
    let sym = (m + m.transpose()).scale(0.5);
    let n = sym.nrows();
    let eig = SymmetricEigen::new(sym);
    let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&raw);
    Ok(RealSpectrum {
        values: order.iter().map(|&i| raw[i]).collect(),
        vectors: RMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]),
    })
}

/// Thin singular value decomposition `m = U diag(σ) V†`, σ non-increasing.
#[derive(Debug, Clone)]
pub struct Svd<T: nalgebra::Scalar> {
    pub u: DMatrix<T>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<T>,
}

impl Svd<Complex64> {
    pub fn reconstruct(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us * self.v.adjoint()
    }
}

impl Svd<f64> {
    pub fn reconstruct(&self) -> RMatrix {
        let mut us = self.u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us * self.v.transpose()
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD. Slower than bidiagonalisation but
/// accurate to working precision on every singular value, including for
/// rank-deficient inputs where `nalgebra`'s `SVD` can return a wrong
/// leading value.
fn jacobi_svd<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Svd<T> {
    let (r, c) = m.shape();
    if r < c {
        let t = jacobi_svd(&m.adjoint());
        return Svd { u: t.v, singular_values: t.singular_values, v: t.u };
    }
    let mut a = m.clone();
    let mut v = DMatrix::<T>::identity(c, c);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let g = a.column(p).dotc(&a.column(q));
                let gm = g.clone().modulus();
                if gm == 0.0 || gm <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Rotate a_p against e^{-iφ} a_q, which has a real overlap |g|.
                let phase = g.unscale(gm).conjugate();
                let zeta = (beta - alpha) / (2.0 * gm);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)].clone();
                        let xq = mat[(i, q)].clone() * phase.clone();
                        mat[(i, p)] = xp.clone().scale(cs) - xq.clone().scale(sn);
                        mat[(i, q)] = xp.scale(sn) + xq.scale(cs);
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..c).map(|j| a.column(j).norm()).collect();
    let order = descending_order(&norms);
    let smax = norms[order[0]];
    let mut u = DMatrix::<T>::zeros(r, c);
    let mut filled = Vec::with_capacity(c);
    let mut deficient = Vec::new();
    for (j, &k) in order.iter().enumerate() {
        if norms[k] > f64::EPSILON * smax && norms[k] > 0.0 {
            u.set_column(j, &a.column(k).unscale(norms[k]));
            filled.push(j);
        } else {
            deficient.push(j);
        }
    }
    // Complete U with unit vectors orthogonalised against the columns so far.
    for j in deficient {
        let mut best: Option<(f64, nalgebra::DVector<T>)> = None;
        for e in 0..r {
            let mut w = nalgebra::DVector::<T>::zeros(r);
            w[e] = T::one();
            for _ in 0..2 {
                for &l in &filled {
                    let proj = u.column(l).dotc(&w);
                    w -= u.column(l) * proj;
                }
            }
            let n = w.norm();
            if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
                best = Some((n, w));
            }
        }
        let (n, w) = best.expect("r >= c > 0");
        u.set_column(j, &w.unscale(n));
        filled.push(j);
    }
    Svd {
        u,
        singular_values: order.iter().map(|&k| norms[k]).collect(),
        v: DMatrix::from_fn(c, c, |i, j| v[(i, order[j])].clone()),
    }
}

pub fn svd(m: &CMatrix) -> Result<Svd<Complex64>> {
    ensure_finite(m)?;
    let (r, c) = m.shape();
    if r.min(c) == 0 {
        return Ok(Svd { u: CMatrix::zeros(r, 0), singular_values: vec![], v: CMatrix::zeros(c, 0) });
    }
    Ok(jacobi_svd(m))
}

pub fn real_svd(m: &RMatrix) -> Result<Svd<f64>> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (r, c) = m.shape();
    if r.min(c) == 0 {
        return Ok(Svd { u: RMatrix::zeros(r, 0), singular_values: vec![], v: RMatrix::zeros(c, 0) });
    }
    Ok(jacobi_svd(m))
}

/// Matrices whose singular values we can take.
pub trait SingularValues {
    fn singular_values_desc(&self) -> Vec<f64>;
}

impl<T: ComplexField<RealField = f64>> SingularValues for DMatrix<T> {
    fn singular_values_desc(&self) -> Vec<f64> {
        if self.nrows().min(self.ncols()) == 0 {
            return vec![];
        }
        jacobi_svd(self).singular_values
    }
}

pub fn trace_norm<M: SingularValues>(m: &M) -> f64 {
    m.singular_values_desc().iter().sum()
}

/// Sum of the `k` largest singular values, `1 <= k <= min(rows, cols)`.
pub fn ky_fan_norm<M: SingularValues>(m: &M, k: usize) -> Result<f64> {
    let s = m.singular_values_desc();
    if k == 0 || k > s.len() {
        return Err(Error::InvalidArgument(format!(
            "Ky-Fan index {k} outside 1..={}",
            s.len()
        )));
    }
    Ok(s[..k].iter().sum())
}

pub fn operator_norm<M: SingularValues>(m: &M) -> f64 {
    m.singular_values_desc().first().copied().unwrap_or(0.0)
}

/// Which tensor factor of a bipartite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

fn check_bipartite(m: &CMatrix, dims: (usize, usize)) -> Result<()> {
    let (da, db) = dims;
    if da == 0 || db == 0 || m.nrows() != da * db || m.ncols() != da * db {
        return Err(Error::Dimension(format!(
            "matrix {}x{} does not match dims {}x{}",
            m.nrows(),
            m.ncols(),
            da,
            db
        )));
    }
    Ok(())
}

/// Reduced matrix on the `keep` factor.
pub fn partial_trace(rho: &CMatrix, dims: (usize, usize), keep: Subsystem) -> Result<CMatrix> {
    check_bipartite(rho, dims)?;
    let (da, db) = dims;
    Ok(match keep {
        Subsystem::A => CMatrix::from_fn(da, da, |a, a2| {
            (0..db).map(|b| rho[(a * db + b, a2 * db + b)]).sum()
        }),
        Subsystem::B => CMatrix::from_fn(db, db, |b, b2| {
            (0..da).map(|a| rho[(a * db + b, a * db + b2)]).sum()
        }),
    })
}

pub fn partial_transpose(rho: &CMatrix, dims: (usize, usize), side: Subsystem) -> Result<CMatrix> {
    check_bipartite(rho, dims)?;
    let (da, db) = dims;
    let n = da * db;
    Ok(CMatrix::from_fn(n, n, |r, c| {
        let (a, b) = (r / db, r % db);
        let (a2, b2) = (c / db, c % db);
        match side {
            Subsystem::B => rho[(a * db + b2, a2 * db + b)],
            Subsystem::A => rho[(a2 * db + b, a * db + b2)],
        }
    }))
}

/// Realignment `R(m)_{(a,a'),(b,b')} = m_{(a,b),(a',b')}`, a `d_A² x d_B²` matrix.
pub fn realign(m: &CMatrix, dims: (usize, usize)) -> Result<CMatrix> {
    check_bipartite(m, dims)?;
    let (da, db) = dims;
    Ok(CMatrix::from_fn(da * da, db * db, |r, c| {
        let (a, a2) = (r / da, r % da);
        let (b, b2) = (c / db, c % db);
        m[(a * db + b, a2 * db + b2)]
    }))
}

pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMatrix::identity(n, n)).norm()
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.trace().re
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
