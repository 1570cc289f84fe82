//! Local filter normal form.
//!
//! Minimises `f_ρ(σ_A, σ_B) = tr[ρ (σ_A ⊗ σ_B)] / ((det σ_A)^{1/d_A} (det σ_B)^{1/d_B})`
//! by alternating exact minimisation over one side at a time. With the
//! other side fixed, the minimiser over `σ_A` is proportional to `X^{-1}`
//! where `X` is the current reduced state on A, so each half-sweep applies
//! the determinant-one filter `X^{-1/2}/det(X^{-1/2})^{1/d_A}`. At the fixed
//! point both reduced states of the filtered state are maximally mixed.

use serde::{Deserialize, Serialize};

use crate::covariance::correlation_matrix;
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::matlin::{self, hermitian_eig_unchecked, CMatrix, Subsystem};
use crate::observables::ObservableBasis;

/// Description of the iteration, reported alongside every normal form.
pub const SCHEDULE: &str = "alternating exact minimisation: A-side then B-side per sweep";

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FilterOptions {
    pub max_iter: usize,
    /// Relative change of `f` below which a sweep counts as stable.
    pub tol: f64,
    /// States with a smaller minimal eigenvalue are mixed with this much white noise.
    pub noise_eps: f64,
    /// Largest entry of `ρ̃_{A,B} − 1/d_{A,B}` accepted for convergence.
    pub marginal_tol: f64,
    /// Give up once the marginal deviation fails to halve over this many
    /// sweeps; 0 disables the check. Boundary states approach their normal
    /// form only sublinearly, or stall at a rounding floor above `marginal_tol`.
    pub stall_window: usize,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self { max_iter: 10_000, tol: 1e-10, noise_eps: 1e-9, marginal_tol: 1e-9, stall_window: 500 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalForm {
    /// `d_A d_B` times the singular values of the traceless correlation
    /// block `tr(ρ̃ Ĝ_i ⊗ Ĝ_k)`, non-increasing.
    pub xi: Vec<f64>,
    #[serde(with = "crate::io::cmatrix_serde")]
    pub filter_a: CMatrix,
    #[serde(with = "crate::io::cmatrix_serde")]
    pub filter_b: CMatrix,
    #[serde(with = "crate::io::cmatrix_serde")]
    pub rho_tilde: CMatrix,
    pub converged: bool,
    pub f_value: f64,
    pub iterations: usize,
    pub f_history: Vec<f64>,
    pub noise_mixed: bool,
    /// Stopped early by the stall check.
    pub stalled: bool,
    pub marginal_deviation: f64,
    pub schedule: String,
}

/// `f_ρ(σ_A, σ_B)`; both marginals must be strictly positive definite.
pub fn f_rho(rho: &CMatrix, sigma_a: &CMatrix, sigma_b: &CMatrix) -> Result<f64> {
    let (da, db) = (sigma_a.nrows(), sigma_b.nrows());
    if rho.nrows() != da * db {
        return Err(Error::Dimension(format!("state size {} does not match {da}x{db}", rho.nrows())));
    }
    let mut log_det = 0.0;
    for (s, d) in [(sigma_a, da), (sigma_b, db)] {
        let spec = matlin::hermitian_eig(s)?;
        if spec.min() <= 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "f is only defined for full-rank marginals (min eigenvalue {:.3e})",
                spec.min()
            )));
        }
        log_det += spec.values.iter().map(|v| v.ln()).sum::<f64>() / d as f64;
    }
    let num = matlin::trace_product(rho, &matlin::kron(sigma_a, sigma_b)).re;
    Ok(num / log_det.exp())
}

/// Determinant-one `X^{-1/2}` for a positive definite `X`.
fn unimodular_inv_sqrt(x: &CMatrix) -> Result<CMatrix> {
    let spec = hermitian_eig_unchecked((x + x.adjoint()).scale(0.5));
    if spec.min().is_nan() || spec.min() <= 0.0 {
        return Err(Error::Numerical(format!("reduced state lost full rank (min eigenvalue {:.3e})", spec.min())));
    }
    let d = spec.values.len() as f64;
    let mean_log = spec.values.iter().map(|v| v.ln()).sum::<f64>() / d;
    // λ^{-1/2} · (Π λ)^{1/(2d)}
    Ok(spec.map(|v| (0.5 * (mean_log - v.ln())).exp()))
}

/// `(F_A ⊗ F_B) ρ (F_A ⊗ F_B)†` with one of the factors the identity.
fn apply_local(rho: &CMatrix, dims: (usize, usize), f: &CMatrix, side: Subsystem) -> CMatrix {
    let (da, db) = dims;
    let k = match side {
        Subsystem::A => matlin::kron(f, &CMatrix::identity(db, db)),
        Subsystem::B => matlin::kron(&CMatrix::identity(da, da), f),
    };
    let out = &k * rho * k.adjoint();
    (&out + out.adjoint()).scale(0.5)
}

fn marginal_deviation(rho: &CMatrix, dims: (usize, usize)) -> f64 {
    let tr = rho.trace().re;
    let mut worst = 0.0f64;
    for (side, d) in [(Subsystem::A, dims.0), (Subsystem::B, dims.1)] {
        let r = matlin::partial_trace(rho, dims, side).expect("dims checked");
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 / d as f64 } else { 0.0 };
                worst = worst.max((r[(i, j)] / tr - target).norm());
            }
        }
    }
    worst
}

/// `d_A d_B` times the singular values of the traceless Gell-Mann block of `rho`.
pub fn normal_form_coefficients(rho: &CMatrix, dims: (usize, usize)) -> Result<Vec<f64>> {
    let (da, db) = dims;
    let ga = ObservableBasis::gellmann(da)?;
    let gb = ObservableBasis::gellmann(db)?;
    let t = correlation_matrix(rho, dims, &ga, &gb)?;
    let traceless = t.view((1, 1), (da * da - 1, db * db - 1)).clone_owned();
    let scale = (da * db) as f64;
    Ok(matlin::real_svd(&traceless)?.singular_values.iter().map(|s| s * scale).collect())
}

pub fn normal_form(rho: &DensityMatrix, opts: &FilterOptions) -> Result<NormalForm> {
    let dims = rho.dims();
    let (da, db) = dims;
    let n = da * db;
    let noise_mixed = rho.min_eigenvalue() < opts.noise_eps;
    let start = if noise_mixed {
        rho.matrix().scale(1.0 - opts.noise_eps) + CMatrix::identity(n, n).scale(opts.noise_eps / n as f64)
    } else {
        rho.matrix().clone()
    };

    let mut fa = CMatrix::identity(da, da);
    let mut fb = CMatrix::identity(db, db);
    let mut cur = start.clone();
    let mut f_history = Vec::new();
    let mut stable = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;
    let mut prev_f = cur.trace().re;
    let mut stalled = false;
    let mut checkpoint_dev = f64::INFINITY;
    while iterations < opts.max_iter {
        iterations += 1;
        let ma = unimodular_inv_sqrt(&matlin::partial_trace(&cur, dims, Subsystem::A)?)?;
        cur = apply_local(&cur, dims, &ma, Subsystem::A);
        fa = &ma * fa;
        let mb = unimodular_inv_sqrt(&matlin::partial_trace(&cur, dims, Subsystem::B)?)?;
        cur = apply_local(&cur, dims, &mb, Subsystem::B);
        fb = &mb * fb;

        let f = cur.trace().re;
        f_history.push(f);
        if ((prev_f - f) / f).abs() < opts.tol {
            stable += 1;
        } else {
            stable = 0;
        }
        prev_f = f;
        if stable >= 3 && marginal_deviation(&cur, dims) <= opts.marginal_tol {
            converged = true;
            break;
        }
        if opts.stall_window > 0 && iterations.is_multiple_of(opts.stall_window) {
            let dev = marginal_deviation(&cur, dims);
            if dev > 0.5 * checkpoint_dev {
                stalled = true;
                break;
            }
            checkpoint_dev = dev;
        }
    }

    // Recompute from the input so rounding in the sweeps does not accumulate.
    let k = matlin::kron(&fa, &fb);
    let filtered = &k * &start * k.adjoint();
    let filtered = (&filtered + filtered.adjoint()).scale(0.5);
    let f_value = filtered.trace().re;
    let rho_tilde = filtered.unscale(f_value);
    let marginal_deviation = marginal_deviation(&rho_tilde, dims);
    let xi = normal_form_coefficients(&rho_tilde, dims)?;
    Ok(NormalForm {
        xi,
        filter_a: fa,
        filter_b: fb,
        rho_tilde,
        converged,
        f_value,
        iterations,
        f_history,
        noise_mixed,
        stalled,
        marginal_deviation,
        schedule: SCHEDULE.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn f_of_maximally_mixed_is_one() {
        let rho = CMatrix::identity(9, 9).unscale(9.0);
        let s = CMatrix::identity(3, 3).unscale(3.0);
        assert!((f_rho(&rho, &s, &s).unwrap() - 1.0).abs() < 1e-14);
        let singular = CMatrix::from_fn(3, 3, |i, j| if i == j && i > 0 { matlin::c64(0.5, 0.0) } else { matlin::c64(0.0, 0.0) });
        assert!(f_rho(&rho, &singular, &s).is_err());
    }

    #[test]
    fn f_is_positive_and_matches_filters() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let rho = states::random_bipartite((3, 3), 9, &mut rng).unwrap();
            let ra = rho.reduced(Subsystem::A);
            let rb = rho.reduced(Subsystem::B);
            assert!(f_rho(rho.matrix(), &ra, &rb).unwrap() > 0.0);
            let nf = normal_form(&rho, &FilterOptions::default()).unwrap();
            let ta = nf.filter_a.adjoint() * &nf.filter_a;
            let tb = nf.filter_b.adjoint() * &nf.filter_b;
            let f = f_rho(rho.matrix(), &ta.unscale(ta.trace().re), &tb.unscale(tb.trace().re)).unwrap();
            assert!((f - nf.f_value).abs() < 1e-9 * nf.f_value);
        }
    }

    #[test]
    fn random_states_reach_maximally_mixed_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for dims in [(3, 3), (2, 3), (2, 2)] {
            for _ in 0..10 {
                let rho = states::random_bipartite(dims, dims.0 * dims.1, &mut rng).unwrap();
                let nf = normal_form(&rho, &FilterOptions::default()).unwrap();
                assert!(nf.converged);
                assert!(nf.marginal_deviation < 1e-7);
                assert!(nf.f_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
                assert!((nf.filter_a.determinant() - matlin::c64(1.0, 0.0)).norm() < 1e-8);
                assert!((nf.filter_b.determinant() - matlin::c64(1.0, 0.0)).norm() < 1e-8);
                assert!(nf.xi.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn bell_diagonal_is_already_normal() {
        let c = [0.3, -0.2, 0.1];
        let rho = states::bell_diagonal(c[0], c[1], c[2]).unwrap();
        let nf = normal_form(&rho, &FilterOptions::default()).unwrap();
        // ρ = ¼(1 + Σ c_k σ_k ⊗ σ_k) has ξ_k = 2|c_k| in the orthonormal convention.
        let expected = [0.6, 0.4, 0.2];
        for (x, e) in nf.xi.iter().zip(expected) {
            assert!((x - e).abs() < 1e-7);
        }
        let ua = nf.filter_a.adjoint() * &nf.filter_a;
        assert!((ua - CMatrix::identity(2, 2)).norm() < 1e-7);
    }

    #[test]
    fn maximally_mixed_has_zero_coefficients() {
        let nf = normal_form(&DensityMatrix::maximally_mixed((3, 3)), &FilterOptions::default()).unwrap();
        assert!(nf.xi.iter().all(|&x| x < 1e-12));
        assert!(nf.converged);
    }

    #[test]
    fn normal_form_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let rho = states::random_bipartite((3, 3), 9, &mut rng).unwrap();
        let nf = normal_form(&rho, &FilterOptions::default()).unwrap();
        let again = normal_form(&DensityMatrix::new(nf.rho_tilde.clone(), (3, 3)).unwrap(), &FilterOptions::default()).unwrap();
        for (a, b) in nf.xi.iter().zip(&again.xi) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn boundary_states_stop_early() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let rho = states::random_separable((3, 3), 1, &mut rng).unwrap();
        let nf = normal_form(&rho, &FilterOptions::default()).unwrap();
        assert!(!nf.converged && nf.stalled);
        assert!(nf.iterations < 2000, "{}", nf.iterations);
        let full = normal_form(&rho, &FilterOptions { stall_window: 0, max_iter: 3000, ..FilterOptions::default() }).unwrap();
        assert!(!full.stalled && full.iterations == 3000);
    }

    #[test]
    fn rank_deficient_input_is_mixed_first() {
        let rho = states::werner_2q(1.0).unwrap();
        let nf = normal_form(&rho, &FilterOptions::default()).unwrap();
        assert!(nf.noise_mixed);
    }
}
