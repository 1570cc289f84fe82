//! Covariance matrices (CMs) of observables, their block form for
//! bipartite systems, and the structural facts they satisfy.
//!
//! For observables `M_k` and a state ρ:
//!   non-symmetric  `γ_ij   = <M_i M_j> − <M_i><M_j>`
//!   symmetric      `γ^S_ij = <{M_i, M_j}>/2 − <M_i><M_j>`

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::matlin::{self, c64, CMatrix, RMatrix, Subsystem};
use crate::observables::{BasisKind, ObservableBasis};

/// Most negative CM eigenvalue tolerated before the input is declared invalid.
pub const CM_PSD_TOL: f64 = 1e-9;
/// Largest reconstruction residual accepted by [`reconstruct_state`].
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CmKind {
    Symmetric,
    NonSymmetric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub kind: CmKind,
    pub basis: BasisKind,
    pub dim: usize,
    /// Real symmetric for the symmetric kind, Hermitian otherwise.
    #[serde(with = "crate::io::cmatrix_serde")]
    pub matrix: CMatrix,
    pub first_moments: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        matlin::eigenvalues(&self.matrix)
    }

    /// Real part; exact for the symmetric kind.
    pub fn real(&self) -> RMatrix {
        matlin::real_part(&self.matrix)
    }
}

/// `[[A, C], [C^T, B]]` over `{A_k ⊗ 1}` followed by `{1 ⊗ B_k}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockCovarianceMatrix {
    pub kind: CmKind,
    pub dims: (usize, usize),
    pub basis_a: BasisKind,
    pub basis_b: BasisKind,
    #[serde(with = "crate::io::cmatrix_serde")]
    pub a: CMatrix,
    #[serde(with = "crate::io::cmatrix_serde")]
    pub b: CMatrix,
    /// `C_ij = <A_i ⊗ B_j> − <A_i><B_j>`; real because the two factors commute.
    #[serde(with = "crate::io::rmatrix_serde")]
    pub c: RMatrix,
    pub moments_a: Vec<f64>,
    pub moments_b: Vec<f64>,
    pub purity_a: f64,
    pub purity_b: f64,
}

impl BlockCovarianceMatrix {
    pub fn assembled(&self) -> CMatrix {
        let (na, nb) = (self.a.nrows(), self.b.nrows());
        let mut m = CMatrix::zeros(na + nb, na + nb);
        m.view_mut((0, 0), (na, na)).copy_from(&self.a);
        m.view_mut((na, na), (nb, nb)).copy_from(&self.b);
        let c = matlin::to_complex(&self.c);
        m.view_mut((0, na), (na, nb)).copy_from(&c);
        m.view_mut((na, 0), (nb, na)).copy_from(&c.transpose());
        m
    }

    pub fn a_real(&self) -> RMatrix {
        matlin::real_part(&self.a)
    }

    pub fn b_real(&self) -> RMatrix {
        matlin::real_part(&self.b)
    }
}

fn check_state_dim(rho: &CMatrix, d: usize) -> Result<()> {
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::Dimension(format!(
            "state is {}x{}, basis acts on d={d}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(())
}

/// Raw CM of `rho` without the positivity check.
fn raw_cm(rho: &CMatrix, basis: &ObservableBasis, kind: CmKind) -> (CMatrix, Vec<f64>) {
    let ops = basis.ops();
    let n = ops.len();
    let moments = basis.expectations(rho);
    let rho_m: Vec<CMatrix> = ops.iter().map(|m| rho * m).collect();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // tr(ρ M_i M_j)
            g[(i, j)] = matlin::trace_product(&rho_m[i], &ops[j]);
        }
    }
    let g = match kind {
        CmKind::NonSymmetric => g,
        CmKind::Symmetric => g.map(|z| c64(z.re, 0.0)),
    };
    let cm = CMatrix::from_fn(n, n, |i, j| g[(i, j)] - c64(moments[i] * moments[j], 0.0));
    (cm, moments)
}

fn check_psd(m: &CMatrix) -> Result<()> {
    let min = matlin::min_eigenvalue(m)?;
    if min < -CM_PSD_TOL {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    Ok(())
}

/// CM of a single-system state `rho` (any Hermitian unit-trace PSD matrix).
pub fn build_cm(rho: &CMatrix, basis: &ObservableBasis, kind: CmKind) -> Result<CovarianceMatrix> {
    check_state_dim(rho, basis.dim())?;
    let rho = matlin::hermitize(rho)?;
    let (matrix, first_moments) = raw_cm(&rho, basis, kind);
    let matrix = matlin::hermitize(&matrix)?;
    check_psd(&matrix)?;
    Ok(CovarianceMatrix { kind, basis: basis.kind(), dim: basis.dim(), matrix, first_moments })
}

/// Correlation matrix `T_ij = tr(ρ A_i ⊗ B_j)` by direct index contraction.
pub fn correlation_matrix(rho: &CMatrix, dims: (usize, usize), basis_a: &ObservableBasis, basis_b: &ObservableBasis) -> Result<RMatrix> {
    let (da, db) = dims;
    if basis_a.dim() != da || basis_b.dim() != db {
        return Err(Error::Dimension(format!(
            "bases act on {}x{}, state dims are {da}x{db}",
            basis_a.dim(),
            basis_b.dim()
        )));
    }
    check_state_dim(rho, da * db)?;
    let (na, nb) = (basis_a.len(), basis_b.len());
    let mut t = RMatrix::zeros(na, nb);
    for (i, ai) in basis_a.ops().iter().enumerate() {
        // Q_i[b, b'] = Σ_{a,a'} ρ[(a,b),(a',b')] A_i[a', a]
        let q = CMatrix::from_fn(db, db, |b, b2| {
            let mut acc = c64(0.0, 0.0);
            for a in 0..da {
                for a2 in 0..da {
                    acc += rho[(a * db + b, a2 * db + b2)] * ai[(a2, a)];
                }
            }
            acc
        });
        for (j, bj) in basis_b.ops().iter().enumerate() {
            t[(i, j)] = matlin::trace_product(&q, bj).re;
        }
    }
    Ok(t)
}

pub fn build_block_cm(rho: &DensityMatrix, basis_a: &ObservableBasis, basis_b: &ObservableBasis, kind: CmKind) -> Result<BlockCovarianceMatrix> {
    let dims = rho.dims();
    let t = correlation_matrix(rho.matrix(), dims, basis_a, basis_b)?;
    let rho_a = rho.reduced(Subsystem::A);
    let rho_b = rho.reduced(Subsystem::B);
    let a = build_cm(&rho_a, basis_a, kind)?;
    let b = build_cm(&rho_b, basis_b, kind)?;
    let c = RMatrix::from_fn(t.nrows(), t.ncols(), |i, j| t[(i, j)] - a.first_moments[i] * b.first_moments[j]);
    let block = BlockCovarianceMatrix {
        kind,
        dims,
        basis_a: basis_a.kind(),
        basis_b: basis_b.kind(),
        a: a.matrix,
        b: b.matrix,
        c,
        moments_a: a.first_moments,
        moments_b: b.first_moments,
        purity_a: matlin::trace_product(&rho_a, &rho_a).re,
        purity_b: matlin::trace_product(&rho_b, &rho_b).re,
    };
    check_psd(&block.assembled())?;
    Ok(block)
}

/// `O γ O^T`; the result no longer refers to a named basis.
pub fn transform_cm(gamma: &CovarianceMatrix, o: &RMatrix) -> Result<CovarianceMatrix> {
    let n = gamma.matrix.nrows();
    if o.nrows() != n || o.ncols() != n {
        return Err(Error::Dimension(format!("transform is {}x{}, CM is {n}x{n}", o.nrows(), o.ncols())));
    }
    let oc = matlin::to_complex(o);
    let m = &oc * &gamma.matrix * oc.transpose();
    let moments = o * nalgebra::DVector::from_column_slice(&gamma.first_moments);
    Ok(CovarianceMatrix {
        kind: gamma.kind,
        basis: BasisKind::Custom,
        dim: gamma.dim,
        matrix: (&m + m.adjoint()).scale(0.5),
        first_moments: moments.iter().copied().collect(),
    })
}

/// Local transform `O_A ⊕ O_B` of a block CM.
pub fn transform_block_cm(cm: &BlockCovarianceMatrix, oa: &RMatrix, ob: &RMatrix) -> Result<BlockCovarianceMatrix> {
    if oa.nrows() != cm.a.nrows() || ob.nrows() != cm.b.nrows() || !oa.is_square() || !ob.is_square() {
        return Err(Error::Dimension("local transforms do not match the CM blocks".into()));
    }
    let (oac, obc) = (matlin::to_complex(oa), matlin::to_complex(ob));
    let a = &oac * &cm.a * oac.transpose();
    let b = &obc * &cm.b * obc.transpose();
    Ok(BlockCovarianceMatrix {
        a: (&a + a.adjoint()).scale(0.5),
        b: (&b + b.adjoint()).scale(0.5),
        c: oa * &cm.c * ob.transpose(),
        moments_a: (oa * nalgebra::DVector::from_column_slice(&cm.moments_a)).iter().copied().collect(),
        moments_b: (ob * nalgebra::DVector::from_column_slice(&cm.moments_b)).iter().copied().collect(),
        basis_a: BasisKind::Custom,
        basis_b: BasisKind::Custom,
        ..cm.clone()
    })
}

/// Recovers first moments from the antisymmetric part of a non-symmetric CM:
/// `γ_ij − γ_ji = tr(ρ [M_i, M_j])`, together with `tr ρ = 1`.
fn moments_from_commutators(gamma: &CMatrix, basis: &ObservableBasis) -> Result<Vec<f64>> {
    let ops = basis.ops();
    let n = ops.len();
    let traces = basis.traces();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let comm = &ops[i] * &ops[j] - &ops[j] * &ops[i];
            if comm.norm() < 1e-14 {
                continue;
            }
            // tr([M_i, M_j] M_k) is purely imaginary for Hermitian M's.
            rows.push(ops.iter().map(|mk| matlin::trace_product(&comm, mk).im).collect());
            rhs.push((gamma[(i, j)] - gamma[(j, i)]).im);
        }
    }
    rows.push(traces);
    rhs.push(1.0);
    let a = RMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
    let b = nalgebra::DVector::from_vec(rhs);
    let svd = matlin::real_svd(&a)?;
    let tol = 1e-10 * svd.singular_values[0].max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < n {
        return Err(Error::InvalidArgument(format!(
            "commutators of this basis determine only {rank} of {n} moments"
        )));
    }
    // Least-squares solution V Σ^{-1} U^T b.
    let coeffs = svd.u.transpose() * b;
    let scaled = nalgebra::DVector::from_iterator(n, coeffs.iter().zip(&svd.singular_values).map(|(c, s)| c / s));
    Ok((&svd.v * scaled).iter().copied().collect())
}

/// Reconstructs the unique state with non-symmetric CM `gamma`.
pub fn reconstruct_state(gamma: &CovarianceMatrix, basis: &ObservableBasis) -> Result<DensityMatrix> {
    if gamma.kind != CmKind::NonSymmetric {
        return Err(Error::InvalidArgument("reconstruction needs a non-symmetric CM".into()));
    }
    if gamma.dim != basis.dim() || gamma.matrix.nrows() != basis.len() {
        return Err(Error::Dimension("CM does not match the basis".into()));
    }
    let m = moments_from_commutators(&gamma.matrix, basis)?;
    let rho = basis.combine(&m);
    let (rebuilt, _) = raw_cm(&rho, basis, CmKind::NonSymmetric);
    let residual = (&rebuilt - &gamma.matrix).norm();
    if residual > RECONSTRUCTION_TOL {
        return Err(Error::InconsistentCovariance { residual });
    }
    DensityMatrix::new(rho, (basis.dim(), 1)).map_err(|_| Error::InconsistentCovariance { residual })
}

/// Reconstructs a bipartite state from its non-symmetric block CM via
/// `<A_k ⊗ B_l> = C_kl + <A_k><B_l>`.
pub fn reconstruct_bipartite(cm: &BlockCovarianceMatrix, basis_a: &ObservableBasis, basis_b: &ObservableBasis) -> Result<DensityMatrix> {
    let wrap = |m: &CMatrix, basis: &ObservableBasis| CovarianceMatrix {
        kind: cm.kind,
        basis: basis.kind(),
        dim: basis.dim(),
        matrix: m.clone(),
        first_moments: vec![],
    };
    let rho_a = reconstruct_state(&wrap(&cm.a, basis_a), basis_a)?;
    let rho_b = reconstruct_state(&wrap(&cm.b, basis_b), basis_b)?;
    let ma = basis_a.expectations(rho_a.matrix());
    let mb = basis_b.expectations(rho_b.matrix());
    let (da, db) = (basis_a.dim(), basis_b.dim());
    let mut rho = CMatrix::zeros(da * db, da * db);
    for (k, ak) in basis_a.ops().iter().enumerate() {
        for (l, bl) in basis_b.ops().iter().enumerate() {
            let w = cm.c[(k, l)] + ma[k] * mb[l];
            if w != 0.0 {
                rho += matlin::kron(ak, bl).scale(w);
            }
        }
    }
    let state = DensityMatrix::new(rho, (da, db)).map_err(|_| Error::InconsistentCovariance { residual: f64::NAN })?;
    let rebuilt = build_block_cm(&state, basis_a, basis_b, cm.kind)?;
    let residual = (rebuilt.assembled() - cm.assembled()).norm();
    if residual > RECONSTRUCTION_TOL {
        return Err(Error::InconsistentCovariance { residual });
    }
    Ok(state)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PureStructureReport {
    pub kind: CmKind,
    pub rank: usize,
    pub expected_rank: usize,
    pub nonzero_eigenvalues: Vec<f64>,
    pub expected_eigenvalue: f64,
    /// `‖γ² − γ‖_F` (non-symmetric) or `‖(2γ)² − 2γ‖_F` (symmetric).
    pub idempotency_residual: f64,
    pub consistent: bool,
}

/// Checks the spectral signature of a pure-state CM: rank `d−1` with unit
/// eigenvalues (non-symmetric), rank `2(d−1)` with eigenvalues ½ (symmetric).
pub fn check_pure_cm_structure(gamma: &CovarianceMatrix) -> Result<PureStructureReport> {
    let d = gamma.dim;
    let vals = gamma.eigenvalues()?;
    let nonzero: Vec<f64> = vals.iter().copied().filter(|v| v.abs() > 1e-8).collect();
    let (expected_rank, expected_eigenvalue, scaled) = match gamma.kind {
        CmKind::NonSymmetric => (d - 1, 1.0, gamma.matrix.clone()),
        CmKind::Symmetric => (2 * (d - 1), 0.5, gamma.matrix.scale(2.0)),
    };
    let idempotency_residual = (&scaled * &scaled - &scaled).norm();
    let consistent = nonzero.len() == expected_rank
        && nonzero.iter().all(|v| (v - expected_eigenvalue).abs() < 1e-8)
        && idempotency_residual < 1e-8;
    Ok(PureStructureReport {
        kind: gamma.kind,
        rank: nonzero.len(),
        expected_rank,
        nonzero_eigenvalues: nonzero,
        expected_eigenvalue,
        idempotency_residual,
        consistent,
    })
}

/// Minimal eigenvalue of `γ(Σ p_k ρ_k) − Σ p_k γ(ρ_k)`; non-negative by concavity.
pub fn concavity_check(states: &[CMatrix], probs: &[f64], basis: &ObservableBasis, kind: CmKind) -> Result<f64> {
    if states.len() != probs.len() || states.is_empty() {
        return Err(Error::InvalidArgument("need one weight per state".into()));
    }
    if probs.iter().any(|&p| p < 0.0) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument("weights must form a probability vector".into()));
    }
    let d = basis.dim();
    let mut mix = CMatrix::zeros(d, d);
    let mut avg = CMatrix::zeros(basis.len(), basis.len());
    for (rho, &p) in states.iter().zip(probs) {
        mix += rho.scale(p);
        avg += build_cm(rho, basis, kind)?.matrix.scale(p);
    }
    let diff = build_cm(&mix, basis, kind)?.matrix - avg;
    matlin::min_eigenvalue(&matlin::hermitize(&diff)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlipSide {
    A,
    B,
    Both,
}

#[derive(Debug, Clone)]
pub struct BlochInversion {
    /// Hermitian and unit trace, but not necessarily positive.
    pub matrix: CMatrix,
    pub min_eigenvalue: f64,
}

fn pauli_products() -> Vec<CMatrix> {
    let p = ObservableBasis::pauli();
    let s: Vec<CMatrix> = p.ops().iter().map(|m| m.scale(std::f64::consts::SQRT_2)).collect();
    let mut out = Vec::with_capacity(16);
    for a in &s {
        for b in &s {
            out.push(matlin::kron(a, b));
        }
    }
    out
}

/// Two-qubit Bloch inversion: `<σ_i^A> ↦ −<σ_i^A>` and
/// `<σ_i^A ⊗ σ_j^B> ↦ <σ_i^A ⊗ σ_j^B> − 2<σ_i^A><σ_j^B>`, keeping the
/// symmetric block CM fixed. `Both` applies the flip on A then on B.
pub fn bloch_invert(rho: &CMatrix, side: FlipSide) -> Result<BlochInversion> {
    check_state_dim(rho, 4)?;
    let rho = matlin::hermitize(rho)?;
    let products = pauli_products();
    // λ_ij = tr(ρ σ_i ⊗ σ_j), ρ = ¼ Σ λ_ij σ_i ⊗ σ_j
    let mut lam = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            lam[i][j] = matlin::trace_product(&rho, &products[4 * i + j]).re;
        }
    }
    let flip_a = |l: [[f64; 4]; 4]| {
        let mut out = l;
        for i in 1..4 {
            out[i][0] = -l[i][0];
            for j in 1..4 {
                out[i][j] = l[i][j] - 2.0 * l[i][0] * l[0][j];
            }
        }
        out
    };
    let flip_b = |l: [[f64; 4]; 4]| {
        let mut out = l;
        for j in 1..4 {
            out[0][j] = -l[0][j];
            for i in 1..4 {
                out[i][j] = l[i][j] - 2.0 * l[i][0] * l[0][j];
            }
        }
        out
    };
    let lam = match side {
        FlipSide::A => flip_a(lam),
        FlipSide::B => flip_b(lam),
        FlipSide::Both => flip_b(flip_a(lam)),
    };
    let mut out = CMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            out += products[4 * i + j].scale(lam[i][j] / 4.0);
        }
    }
    let out = (&out + out.adjoint()).scale(0.5);
    let min_eigenvalue = matlin::min_eigenvalue(&out)?;
    Ok(BlochInversion { matrix: out, min_eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_fn(v.len(), v.len(), |i, j| if i == j { c64(v[i], 0.0) } else { c64(0.0, 0.0) })
    }

    #[test]
    fn single_qubit_maximally_mixed() {
        let g = build_cm(&diag(&[0.5, 0.5]), &ObservableBasis::pauli(), CmKind::Symmetric).unwrap();
        let expected = diag(&[0.0, 0.5, 0.5, 0.5]);
        assert!((g.matrix - expected).norm() < 1e-15);
    }

    #[test]
    fn trace_identity() {
        let g = build_cm(&diag(&[1.0, 0.0]), &ObservableBasis::pauli(), CmKind::NonSymmetric).unwrap();
        assert!((g.trace() - 1.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in [CmKind::Symmetric, CmKind::NonSymmetric] {
            for basis in [ObservableBasis::standard(3).unwrap(), ObservableBasis::gellmann(3).unwrap(), ObservableBasis::weyl_parity(3).unwrap()] {
                let rho = states::random_density(3, 3, &mut rng).unwrap();
                let g = build_cm(rho.matrix(), &basis, kind).unwrap();
                assert!((g.trace() - (3.0 - rho.purity())).abs() < 1e-10);
                if kind == CmKind::Symmetric {
                    assert!(matlin::max_imag(&g.matrix) < 1e-15);
                }
            }
        }
    }

    #[test]
    fn block_cm_product_and_bell() {
        let pa = ObservableBasis::pauli();
        let prod = DensityMatrix::product(&diag(&[0.3, 0.7]), &diag(&[0.6, 0.4])).unwrap();
        let cm = build_block_cm(&prod, &pa, &pa, CmKind::Symmetric).unwrap();
        assert!(cm.c.norm() < 1e-12);

        let bell = states::bell_diagonal(1.0, -1.0, 1.0).unwrap();
        let cm = build_block_cm(&bell, &pa, &pa, CmKind::Symmetric).unwrap();
        let eff = cm.c.view((1, 1), (3, 3)).clone_owned();
        let expected = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -0.5, 0.5]));
        assert!((eff - expected).norm() < 1e-14);
    }

    #[test]
    fn block_cm_is_psd_for_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g3 = ObservableBasis::gellmann(3).unwrap();
        for _ in 0..20 {
            let rho = states::random_bipartite((3, 3), 9, &mut rng).unwrap();
            let cm = build_block_cm(&rho, &g3, &g3, CmKind::Symmetric).unwrap();
            assert!(matlin::min_eigenvalue(&cm.assembled()).unwrap() > -1e-12);
            assert!((cm.a.trace().re - (3.0 - cm.purity_a)).abs() < 1e-10);
        }
    }

    #[test]
    fn transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g3 = ObservableBasis::gellmann(3).unwrap();
        let rho = states::random_density(3, 3, &mut rng).unwrap();
        let g = build_cm(rho.matrix(), &g3, CmKind::Symmetric).unwrap();
        let same = transform_cm(&g, &RMatrix::identity(9, 9)).unwrap();
        assert!((same.matrix - &g.matrix).norm() < 1e-15);

        let o = RMatrix::from_fn(9, 9, |_, _| rand::Rng::random::<f64>(&mut rng)).qr().q();
        let t = transform_cm(&g, &o).unwrap();
        let (e1, e2) = (g.eigenvalues().unwrap(), t.eigenvalues().unwrap());
        assert!(e1.iter().zip(&e2).all(|(a, b)| (a - b).abs() < 1e-12));

        let rho2 = states::random_bipartite((2, 3), 6, &mut rng).unwrap();
        let pa = ObservableBasis::pauli();
        let cm = build_block_cm(&rho2, &pa, &g3, CmKind::Symmetric).unwrap();
        let oa = RMatrix::from_fn(4, 4, |_, _| rand::Rng::random::<f64>(&mut rng)).qr().q();
        let ob = RMatrix::from_fn(9, 9, |_, _| rand::Rng::random::<f64>(&mut rng)).qr().q();
        let local = transform_block_cm(&cm, &oa, &ob).unwrap();
        let mut direct = RMatrix::zeros(13, 13);
        direct.view_mut((0, 0), (4, 4)).copy_from(&oa);
        direct.view_mut((4, 4), (9, 9)).copy_from(&ob);
        let full = CovarianceMatrix {
            kind: CmKind::Symmetric,
            basis: BasisKind::Custom,
            dim: 6,
            matrix: cm.assembled(),
            first_moments: cm.moments_a.iter().chain(&cm.moments_b).copied().collect(),
        };
        let whole = transform_cm(&full, &direct).unwrap();
        assert!((whole.matrix - local.assembled()).norm() < 1e-12);
    }

    #[test]
    fn reconstruction_roundtrips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s2 = ObservableBasis::standard(2).unwrap();
        let psi = states::random_density(2, 1, &mut rng).unwrap();
        let g = build_cm(psi.matrix(), &s2, CmKind::NonSymmetric).unwrap();
        let back = reconstruct_state(&g, &s2).unwrap();
        let fidelity = matlin::trace_product(back.matrix(), psi.matrix()).re;
        assert!((fidelity - 1.0).abs() < 1e-8);

        let s3 = ObservableBasis::standard(3).unwrap();
        let mixed = CMatrix::identity(3, 3).unscale(3.0);
        let g = build_cm(&mixed, &s3, CmKind::NonSymmetric).unwrap();
        assert!((reconstruct_state(&g, &s3).unwrap().matrix() - mixed).norm() < 1e-12);

        let rho = states::random_bipartite((3, 3), 9, &mut rng).unwrap();
        let cm = build_block_cm(&rho, &s3, &s3, CmKind::NonSymmetric).unwrap();
        let back = reconstruct_bipartite(&cm, &s3, &s3).unwrap();
        assert!((back.matrix() - rho.matrix()).norm() < 1e-8);
    }

    #[test]
    fn reconstruction_rejects_symmetric_or_inconsistent() {
        let s2 = ObservableBasis::standard(2).unwrap();
        let g = build_cm(&diag(&[1.0, 0.0]), &s2, CmKind::Symmetric).unwrap();
        assert!(reconstruct_state(&g, &s2).is_err());
        let mut g = build_cm(&diag(&[1.0, 0.0]), &s2, CmKind::NonSymmetric).unwrap();
        g.matrix[(0, 0)] += c64(0.3, 0.0);
        assert!(matches!(reconstruct_state(&g, &s2), Err(Error::InconsistentCovariance { .. })));
    }

    #[test]
    fn pure_state_structure() {
        let p = ObservableBasis::pauli();
        let zero = diag(&[1.0, 0.0]);
        let r = check_pure_cm_structure(&build_cm(&zero, &p, CmKind::NonSymmetric).unwrap()).unwrap();
        assert!(r.consistent && r.rank == 1);
        let r = check_pure_cm_structure(&build_cm(&zero, &p, CmKind::Symmetric).unwrap()).unwrap();
        assert!(r.consistent && r.rank == 2);
        assert!(r.nonzero_eigenvalues.iter().all(|v| (v - 0.5).abs() < 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = states::random_density(4, 1, &mut rng).unwrap();
        let g = build_cm(psi.matrix(), &ObservableBasis::standard(4).unwrap(), CmKind::NonSymmetric).unwrap();
        assert!((g.trace() - 3.0).abs() < 1e-10);
        assert!(check_pure_cm_structure(&g).unwrap().consistent);
        let mixed = build_cm(&diag(&[0.5, 0.5]), &p, CmKind::NonSymmetric).unwrap();
        assert!(!check_pure_cm_structure(&mixed).unwrap().consistent);
    }

    #[test]
    fn concavity() {
        let p = ObservableBasis::pauli();
        let zero = diag(&[1.0, 0.0]);
        let one = diag(&[0.0, 1.0]);
        assert!(concavity_check(std::slice::from_ref(&zero), &[1.0], &p, CmKind::Symmetric).unwrap().abs() < 1e-14);
        assert!(concavity_check(&[zero, one], &[0.5, 0.5], &p, CmKind::Symmetric).unwrap() >= -1e-15);
    }

    #[test]
    fn bloch_inversion() {
        let bell = states::bell_diagonal(0.3, -0.2, 0.1).unwrap();
        let inv = bloch_invert(bell.matrix(), FlipSide::A).unwrap();
        assert!((inv.matrix - bell.matrix()).norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pa = ObservableBasis::pauli();
        for _ in 0..20 {
            let rho = states::random_bipartite((2, 2), 4, &mut rng).unwrap();
            let both = bloch_invert(rho.matrix(), FlipSide::Both).unwrap();
            let e1 = matlin::eigenvalues(rho.matrix()).unwrap();
            let e2 = matlin::eigenvalues(&both.matrix).unwrap();
            assert!(e1.iter().zip(&e2).all(|(a, b)| (a - b).abs() < 1e-12));
            let one = bloch_invert(rho.matrix(), FlipSide::A).unwrap();
            if one.min_eigenvalue >= 0.0 {
                let flipped = DensityMatrix::new(one.matrix.clone(), (2, 2)).unwrap();
                let c1 = build_block_cm(&rho, &pa, &pa, CmKind::Symmetric).unwrap();
                let c2 = build_block_cm(&flipped, &pa, &pa, CmKind::Symmetric).unwrap();
                assert!((c1.assembled() - c2.assembled()).norm() < 1e-10);
            }
        }
    }
}
