//! Two-qubit covariance matrix test as a semidefinite program, with the dual
//! witness and the local uncertainty relation it induces.
//!
//! Primal: minimise `−λ` subject to
//! `γ_eff − κ_A ⊕ κ_B ⪰ 0`, `κ_{A,B} = ½[(1+λ)𝟙₃ − ρ_{A,B}] ⪰ 0`, `tr ρ_{A,B} = 1+λ`,
//! with `ρ_{A,B}` real symmetric. Variables are `λ` followed by five free
//! coordinates of each of `ρ_A`, `ρ_B`. The dual objective is
//! `1 − tr(γ_eff Z_1)`, so `Z_1` is the covariance-matrix witness.

use serde::{Deserialize, Serialize};

use super::{Criterion, CriterionVerdict, Details, VerdictStatus};
use crate::covariance::{build_block_cm, CmKind};
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::matlin::{self, CMatrix, RMatrix};
use crate::observables::ObservableBasis;
use crate::sdp::{self, SdpOptions, SdpProblem, SdpSolution, SdpStatus};

/// A witness value must fall this far below 1 to count as a detection.
pub const WITNESS_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CmWitness {
    #[serde(with = "crate::io::rmatrix_serde")]
    pub z1: RMatrix,
    /// `tr(γ_eff Z_1)`.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LurPair {
    #[serde(with = "crate::io::cmatrix_serde")]
    pub a: CMatrix,
    #[serde(with = "crate::io::cmatrix_serde")]
    pub b: CMatrix,
}

/// Observables `Â_k`, `B̂_k` with `Σ_k δ²(Â_k ⊗ 𝟙 + 𝟙 ⊗ B̂_k) ≥ bound` on separable states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LurSet {
    pub pairs: Vec<LurPair>,
    pub bound: f64,
    /// The sum evaluated on the tested state.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpReport {
    /// Optimal `λ`; negative iff the state violates the criterion.
    pub lambda: f64,
    pub witness: CmWitness,
    pub lur: LurSet,
    pub solution: SdpSolution,
}

/// The 6×6 symmetric CM over `σ_k/√2`, `k = 1..3`, on both sides.
pub fn gamma_eff(rho: &DensityMatrix) -> Result<RMatrix> {
    if rho.dims() != (2, 2) {
        return Err(Error::Dimension(format!("two-qubit test needs dims 2x2, got {:?}", rho.dims())));
    }
    let p = ObservableBasis::pauli();
    let full = matlin::real_part(&build_block_cm(rho, &p, &p, CmKind::Symmetric)?.assembled());
    let idx = [1, 2, 3, 5, 6, 7];
    Ok(RMatrix::from_fn(6, 6, |i, j| full[(idx[i], idx[j])]))
}

/// `Σ_k δ²(A_k ⊗ 𝟙 + 𝟙 ⊗ B_k)` on `ρ`.
pub fn lur_value(rho: &DensityMatrix, a_ops: &[CMatrix], b_ops: &[CMatrix]) -> Result<f64> {
    if a_ops.len() != b_ops.len() {
        return Err(Error::InvalidArgument(format!("{} A-observables but {} B-observables", a_ops.len(), b_ops.len())));
    }
    let (da, db) = rho.dims();
    let ia = CMatrix::identity(da, da);
    let ib = CMatrix::identity(db, db);
    let mut total = 0.0;
    for (a, b) in a_ops.iter().zip(b_ops) {
        if a.shape() != (da, da) || b.shape() != (db, db) {
            return Err(Error::Dimension("observable size does not match the state".into()));
        }
        let m = matlin::kron(&matlin::hermitize(a)?, &ib) + matlin::kron(&ia, &matlin::hermitize(b)?);
        let mean = matlin::trace_product(rho.matrix(), &m).re;
        let second = matlin::trace_product(rho.matrix(), &(&m * &m)).re;
        total += second - mean * mean;
    }
    Ok(total)
}

/// Free coordinates of a real symmetric 3×3 matrix with fixed trace: the
/// entries `(0,0)`, `(1,1)` (each paired with `−E_22`) and the three
/// off-diagonal pairs.
fn trace_fixed_directions() -> Vec<RMatrix> {
    let mut out = Vec::with_capacity(5);
    for i in 0..2 {
        let mut e = RMatrix::zeros(3, 3);
        e[(i, i)] = 1.0;
        e[(2, 2)] = -1.0;
        out.push(e);
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let mut e = RMatrix::zeros(3, 3);
        e[(i, j)] = 1.0;
        e[(j, i)] = 1.0;
        out.push(e);
    }
    out
}

fn embed(e: &RMatrix, offset: usize) -> RMatrix {
    let mut m = RMatrix::zeros(6, 6);
    m.view_mut((offset, offset), (3, 3)).copy_from(e);
    m
}

/// Blocks `[6, 3, 3]` for `γ_eff − κ_A ⊕ κ_B ⪰ 0` and `κ_A, κ_B ⪰ 0`. The
/// trace constraints are solved for `(ρ_{A,B})_22 = 1 + λ − (ρ)_00 − (ρ)_11`
/// rather than imposed as paired inequalities, which would leave the dual
/// optimum unbounded.
fn problem(gamma: &RMatrix) -> Result<SdpProblem> {
    let mut e22 = RMatrix::zeros(3, 3);
    e22[(2, 2)] = 1.0;
    let i3 = RMatrix::identity(3, 3);
    let z3 = RMatrix::zeros(3, 3);
    // ½(ρ_A ⊕ ρ_B) contributes ½(1+λ)(E_22 ⊕ E_22) through the eliminated entries.
    let corner = (embed(&e22, 0) + embed(&e22, 3)) * 0.5;
    let f0 = vec![gamma - RMatrix::identity(6, 6) * 0.5 + &corner, (&i3 - &e22) * 0.5, (&i3 - &e22) * 0.5];
    let mut fi = vec![vec![RMatrix::identity(6, 6) * -0.5 + &corner, (&i3 - &e22) * 0.5, (&i3 - &e22) * 0.5]];
    for e in trace_fixed_directions() {
        fi.push(vec![embed(&e, 0) * 0.5, &e * -0.5, z3.clone()]);
    }
    for e in trace_fixed_directions() {
        fi.push(vec![embed(&e, 3) * 0.5, z3.clone(), &e * -0.5]);
    }
    let mut c = vec![0.0; fi.len()];
    c[0] = -1.0;
    SdpProblem::new(c, f0, fi)
}

fn lur_from_witness(z1: &RMatrix) -> Result<Vec<LurPair>> {
    let spec = matlin::symmetric_eig(z1)?;
    let p = ObservableBasis::pauli();
    let sigma = &p.ops()[1..];
    let mut pairs = Vec::new();
    for (k, &l) in spec.values.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let w = spec.vectors.column(k) * l.sqrt();
        let side = |off: usize| {
            (0..3).fold(CMatrix::zeros(2, 2), |acc, i| acc + sigma[i].scale(w[off + i]))
        };
        pairs.push(LurPair { a: side(0), b: side(3) });
    }
    Ok(pairs)
}

/// Solves the two-qubit program. A solver failure yields an undetermined
/// verdict with a NaN margin rather than an error.
pub fn cmc_sdp_2q(rho: &DensityMatrix, opts: &SdpOptions) -> Result<CriterionVerdict> {
    let gamma = gamma_eff(rho)?;
    let sol = sdp::solve(&problem(&gamma)?, opts)?;
    let z1 = sol.z[0].clone();
    let value = matlin::trace_product(&matlin::to_complex(&gamma), &matlin::to_complex(&z1)).re;
    let pairs = lur_from_witness(&z1)?;
    let (a_ops, b_ops): (Vec<_>, Vec<_>) = pairs.iter().map(|p| (p.a.clone(), p.b.clone())).unzip();
    let lur_val = lur_value(rho, &a_ops, &b_ops)?;
    let (margin, status) = if sol.status == SdpStatus::Optimal {
        // Detected iff tr(γ_eff Z_1) < 1 − WITNESS_SLACK.
        ((1.0 - value) - (WITNESS_SLACK - super::EPS_MARGIN), VerdictStatus::Decided)
    } else {
        (f64::NAN, VerdictStatus::Undetermined)
    };
    let report = SdpReport {
        lambda: sol.x[0],
        witness: CmWitness { z1, value },
        lur: LurSet { pairs, bound: 1.0, value: lur_val },
        solution: sol,
    };
    Ok(CriterionVerdict::new(Criterion::Sdp2q, margin, status, Details::Sdp(Box::new(report))))
}
