//! Orthonormal Hermitian observable bases and the orthogonal representation
//! of unitaries on basis space.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{c64, kron, max_imag, real_part, unitarity_deviation, CMatrix, RMatrix};

/// Tolerance of the Gram-matrix test `tr(M_i M_j) = δ_ij`.
pub const GRAM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// `D_i`, then `X_ij`, then `Y_kl`, each family in lexicographic `(i, j)` order.
    Standard,
    /// `{1, σx, σy, σz}/√2`.
    Pauli,
    /// `1/√d`, symmetric off-diagonals, antisymmetric off-diagonals, then
    /// the diagonal generators `diag(1,…,1,−l,0,…)/√(l(l+1))`.
    GellMann,
    /// Displaced parity operators `P(q,p)/√d` for odd `d`, `(q,p)` in
    /// lexicographic order.
    WeylParity,
    Custom,
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(BasisKind::Standard),
            "pauli" => Ok(BasisKind::Pauli),
            "gellmann" | "gell-mann" => Ok(BasisKind::GellMann),
            "weyl" | "weyl-parity" => Ok(BasisKind::WeylParity),
            other => Err(Error::InvalidArgument(format!("unknown basis kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObservableBasis {
    dim: usize,
    kind: BasisKind,
    ops: Vec<CMatrix>,
}

/// `d² x d²` unitary whose columns are the row-major vectorised basis elements.
#[derive(Debug, Clone)]
pub struct GammaIsometry(pub CMatrix);

fn unit(d: usize, i: usize, j: usize, z: Complex64) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(i, j)] = z;
    m
}

fn require_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("basis dimension must be at least 2, got {d}")));
    }
    Ok(())
}

impl ObservableBasis {
    pub fn standard(d: usize) -> Result<Self> {
        require_dim(d)?;
        let mut ops = Vec::with_capacity(d * d);
        for i in 0..d {
            ops.push(unit(d, i, i, c64(1.0, 0.0)));
        }
        for i in 0..d {
            for j in i + 1..d {
                ops.push(unit(d, i, j, c64(FRAC_1_SQRT_2, 0.0)) + unit(d, j, i, c64(FRAC_1_SQRT_2, 0.0)));
            }
        }
        for k in 0..d {
            for l in k + 1..d {
                // i(|k><l| - |l><k|)/√2
                ops.push(unit(d, k, l, c64(0.0, FRAC_1_SQRT_2)) + unit(d, l, k, c64(0.0, -FRAC_1_SQRT_2)));
            }
        }
        Ok(Self { dim: d, kind: BasisKind::Standard, ops })
    }

    pub fn pauli() -> Self {
        let s = FRAC_1_SQRT_2;
        let z = c64(0.0, 0.0);
        let m = |a: [Complex64; 4]| CMatrix::from_row_slice(2, 2, &a);
        let ops = vec![
            m([c64(s, 0.0), z, z, c64(s, 0.0)]),
            m([z, c64(s, 0.0), c64(s, 0.0), z]),
            m([z, c64(0.0, -s), c64(0.0, s), z]),
            m([c64(s, 0.0), z, z, c64(-s, 0.0)]),
        ];
        Self { dim: 2, kind: BasisKind::Pauli, ops }
    }

    pub fn gellmann(d: usize) -> Result<Self> {
        require_dim(d)?;
        let mut ops = Vec::with_capacity(d * d);
        ops.push(CMatrix::identity(d, d).scale(1.0 / (d as f64).sqrt()));
        for j in 0..d {
            for k in j + 1..d {
                ops.push(unit(d, j, k, c64(FRAC_1_SQRT_2, 0.0)) + unit(d, k, j, c64(FRAC_1_SQRT_2, 0.0)));
            }
        }
        for j in 0..d {
            for k in j + 1..d {
                ops.push(unit(d, j, k, c64(0.0, -FRAC_1_SQRT_2)) + unit(d, k, j, c64(0.0, FRAC_1_SQRT_2)));
            }
        }
        for l in 1..d {
            let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let mut m = CMatrix::zeros(d, d);
            for i in 0..l {
                m[(i, i)] = c64(norm, 0.0);
            }
            m[(l, l)] = c64(-(l as f64) * norm, 0.0);
            ops.push(m);
        }
        // The ordering above is the usual σx, σy, σz one for d = 2.
        Ok(Self { dim: d, kind: BasisKind::GellMann, ops })
    }

    pub fn weyl_parity(d: usize) -> Result<Self> {
        if d < 3 || d.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "Weyl parity basis needs odd d >= 3, got {d}"
            )));
        }
        let scale = 1.0 / (d as f64).sqrt();
        let ops = (0..d)
            .flat_map(|q| (0..d).map(move |p| (q, p)))
            .map(|(q, p)| parity_operator(d, q, p).scale(scale))
            .collect();
        Ok(Self { dim: d, kind: BasisKind::WeylParity, ops })
    }

    /// Wraps user-supplied operators after checking Hermiticity and the Gram test.
    pub fn custom(ops: Vec<CMatrix>) -> Result<Self> {
        let d = ops.first().map(|m| m.nrows()).unwrap_or(0);
        require_dim(d)?;
        if ops.len() != d * d || ops.iter().any(|m| m.nrows() != d || m.ncols() != d) {
            return Err(Error::Dimension(format!("a basis for d={d} needs {} operators of size {d}x{d}", d * d)));
        }
        for m in &ops {
            crate::matlin::hermitize(m)?;
        }
        let basis = Self { dim: d, kind: BasisKind::Custom, ops };
        let dev = basis.gram_deviation();
        if dev > 1e-10 {
            return Err(Error::InvalidArgument(format!("operators are not orthonormal (Gram deviation {dev:.3e})")));
        }
        Ok(basis)
    }

    pub fn of_kind(kind: BasisKind, d: usize) -> Result<Self> {
        match kind {
            BasisKind::Standard => Self::standard(d),
            BasisKind::Pauli if d == 2 => Ok(Self::pauli()),
            BasisKind::Pauli => Err(Error::InvalidArgument(format!("Pauli basis needs d=2, got {d}"))),
            BasisKind::GellMann => Self::gellmann(d),
            BasisKind::WeylParity => Self::weyl_parity(d),
            BasisKind::Custom => Err(Error::InvalidArgument("custom bases need explicit operators".into())),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Real Gram matrix `tr(M_i M_j)`.
    pub fn gram(&self) -> RMatrix {
        let n = self.ops.len();
        RMatrix::from_fn(n, n, |i, j| crate::matlin::trace_product(&self.ops[i], &self.ops[j]).re)
    }

    pub fn gram_deviation(&self) -> f64 {
        let n = self.ops.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let g = crate::matlin::trace_product(&self.ops[i], &self.ops[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - c64(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn gamma(&self) -> GammaIsometry {
        let d = self.dim;
        let n = self.ops.len();
        GammaIsometry(CMatrix::from_fn(d * d, n, |r, c| self.ops[c][(r / d, r % d)]))
    }

    /// `tr(X M_k)` for each basis element; real when `x` is Hermitian.
    pub fn coefficients(&self, x: &CMatrix) -> Vec<Complex64> {
        self.ops.iter().map(|m| crate::matlin::trace_product(x, m)).collect()
    }

    /// Real expectation values `<M_k> = tr(ρ M_k)`.
    pub fn expectations(&self, rho: &CMatrix) -> Vec<f64> {
        self.coefficients(rho).into_iter().map(|z| z.re).collect()
    }

    /// `Σ_k w_k M_k`.
    pub fn combine(&self, weights: &[f64]) -> CMatrix {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for (w, m) in weights.iter().zip(&self.ops) {
            acc += m.scale(*w);
        }
        acc
    }

    /// Traces `tr(M_k)`.
    pub fn traces(&self) -> Vec<f64> {
        self.ops.iter().map(|m| m.trace().re).collect()
    }
}

/// Unnormalised parity operator `W(q,p) P(0,0) W(q,p)†`, with
/// `P(0,0)|x> = |−x>` and `W(q,p) = X^q Z^p`.
pub fn parity_operator(d: usize, q: usize, p: usize) -> CMatrix {
    let omega = |k: usize| {
        let phase = 2.0 * std::f64::consts::PI * (k % d) as f64 / d as f64;
        c64(phase.cos(), phase.sin())
    };
    let p00 = CMatrix::from_fn(d, d, |r, c| if (r + c) % d == 0 { c64(1.0, 0.0) } else { c64(0.0, 0.0) });
    // X^q Z^p |x> = ω^{px} |x+q>
    let w = CMatrix::from_fn(d, d, |r, c| if r == (c + q) % d { omega(p * c) } else { c64(0.0, 0.0) });
    &w * p00 * w.adjoint()
}

/// Real orthogonal `O = Γ^T (U^T ⊗ U†) Γ*`, so that `U M_i U† = Σ_j O_ij M_j`.
pub fn unitary_to_orthogonal(u: &CMatrix, basis: &ObservableBasis) -> Result<RMatrix> {
    let d = basis.dim();
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::Dimension(format!("unitary is {}x{}, basis has d={d}", u.nrows(), u.ncols())));
    }
    let dev = unitarity_deviation(u);
    if dev > 1e-10 {
        return Err(Error::NotUnitary { deviation: dev });
    }
    let gamma = basis.gamma().0;
    let o = gamma.transpose() * kron(&u.transpose(), &u.adjoint()) * gamma.map(|z| z.conj());
    let imag = max_imag(&o);
    if imag > 1e-9 {
        return Err(Error::Numerical(format!("orthogonal representation has imaginary part {imag:.3e}")));
    }
    Ok(real_part(&o))
}
