//! Operator Schmidt decomposition `ρ = Σ_k λ_k G_k^A ⊗ G_k^B`.

use serde::{Deserialize, Serialize};

use crate::covariance::correlation_matrix;
use crate::density::DensityMatrix;
use crate::error::Result;
use crate::matlin::{self, CMatrix};
use crate::observables::ObservableBasis;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchmidtOperatorDecomposition {
    /// Non-negative, non-increasing, length `min(d_A², d_B²)`.
    pub lambdas: Vec<f64>,
    #[serde(skip)]
    pub ops_a: Vec<CMatrix>,
    #[serde(skip)]
    pub ops_b: Vec<CMatrix>,
    /// `tr(G_k^A)` and `tr(G_k^B)`.
    pub g_a: Vec<f64>,
    pub g_b: Vec<f64>,
}

impl SchmidtOperatorDecomposition {
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.ops_a[0].nrows() * self.ops_b[0].nrows();
        let mut acc = CMatrix::zeros(n, n);
        for ((l, a), b) in self.lambdas.iter().zip(&self.ops_a).zip(&self.ops_b) {
            acc += matlin::kron(a, b).scale(*l);
        }
        acc
    }
}

/// Decomposes via the SVD of the real coefficient matrix `ξ_kl = tr(ρ G_k ⊗ G_l)`
/// over Gell-Mann bases. Sides are never swapped: `ops_a` always act on A and
/// the thin SVD handles `d_A > d_B` directly.
pub fn operator_schmidt(rho: &DensityMatrix) -> Result<SchmidtOperatorDecomposition> {
    let (da, db) = rho.dims();
    let ba = ObservableBasis::gellmann(da)?;
    let bb = ObservableBasis::gellmann(db)?;
    let xi = correlation_matrix(rho.matrix(), (da, db), &ba, &bb)?;
    let svd = matlin::real_svd(&xi)?;
    let k = svd.singular_values.len();
    let (tra, trb) = (ba.traces(), bb.traces());
    let mut ops_a = Vec::with_capacity(k);
    let mut ops_b = Vec::with_capacity(k);
    let mut g_a = Vec::with_capacity(k);
    let mut g_b = Vec::with_capacity(k);
    for j in 0..k {
        let u: Vec<f64> = svd.u.column(j).iter().copied().collect();
        let v: Vec<f64> = svd.v.column(j).iter().copied().collect();
        g_a.push(u.iter().zip(&tra).map(|(x, t)| x * t).sum());
        g_b.push(v.iter().zip(&trb).map(|(x, t)| x * t).sum());
        ops_a.push(ba.combine(&u));
        ops_b.push(bb.combine(&v));
    }
    Ok(SchmidtOperatorDecomposition { lambdas: svd.singular_values, ops_a, ops_b, g_a, g_b })
}
