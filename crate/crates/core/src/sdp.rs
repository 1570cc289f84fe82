//! Small dense semidefinite programs with block-diagonal data.
//!
//! Primal: minimise `c^T x` subject to `F(x) = F_0 + Σ_i x_i F_i ⪰ 0`.
//! Dual:   maximise `−tr(F_0 Z)` subject to `tr(F_i Z) = c_i`, `Z ⪰ 0`.
//!
//! Internally this is the standard pair with `X = Z`, `y = −x`,
//! `S = F(x)`, solved by an infeasible-start primal-dual path-following
//! method (HKM search direction, Mehrotra predictor-corrector). Blocks are
//! assembled into one dense matrix; the sizes this crate needs are tiny.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::RMatrix;

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub c: Vec<f64>,
    pub block_sizes: Vec<usize>,
    pub f0: Vec<RMatrix>,
    /// `fi[i][k]` is block `k` of `F_{i+1}`.
    pub fi: Vec<Vec<RMatrix>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SdpOptions {
    /// Target duality gap `c^T x + tr(F_0 Z)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    /// The primal is infeasible; `z` holds a normalised improving dual ray.
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    #[serde(skip)]
    pub z: Vec<RMatrix>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `c^T x + tr(F_0 Z)`.
    pub gap: f64,
    /// `max_i |tr(F_i Z) − c_i|`.
    pub dual_residual: f64,
    /// Minimal eigenvalue of `F(x)`.
    pub primal_min_eigenvalue: f64,
    pub status: SdpStatus,
    pub iterations: usize,
}

fn is_symmetric(m: &RMatrix) -> bool {
    let scale = m.norm().max(1.0);
    (m - m.transpose()).norm() <= 1e-12 * scale
}

impl SdpProblem {
    pub fn new(c: Vec<f64>, f0: Vec<RMatrix>, fi: Vec<Vec<RMatrix>>) -> Result<Self> {
        let block_sizes: Vec<usize> = f0.iter().map(|b| b.nrows()).collect();
        if fi.len() != c.len() {
            return Err(Error::Dimension(format!("{} objective entries for {} constraint matrices", c.len(), fi.len())));
        }
        for (k, blocks) in std::iter::once(&f0).chain(fi.iter()).enumerate() {
            if blocks.len() != block_sizes.len() {
                return Err(Error::Dimension(format!("matrix {k} has {} blocks, expected {}", blocks.len(), block_sizes.len())));
            }
            for (b, &n) in blocks.iter().zip(&block_sizes) {
                if b.nrows() != n || b.ncols() != n {
                    return Err(Error::Dimension(format!("matrix {k} has a block of shape {:?}, expected {n}x{n}", b.shape())));
                }
                if !is_symmetric(b) {
                    return Err(Error::InvalidArgument(format!("matrix {k} has a non-symmetric block")));
                }
            }
        }
        Ok(Self { c, block_sizes, f0, fi })
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    /// `F(x)` block by block.
    pub fn eval(&self, x: &[f64]) -> Vec<RMatrix> {
        let mut out = self.f0.clone();
        for (xi, blocks) in x.iter().zip(&self.fi) {
            for (o, b) in out.iter_mut().zip(blocks) {
                *o += b * *xi;
            }
        }
        out
    }

    fn dense(&self, blocks: &[RMatrix]) -> RMatrix {
        let n: usize = self.block_sizes.iter().sum();
        let mut m = RMatrix::zeros(n, n);
        let mut off = 0;
        for b in blocks {
            let k = b.nrows();
            m.view_mut((off, off), (k, k)).copy_from(b);
            off += k;
        }
        m
    }

    fn split(&self, m: &RMatrix) -> Vec<RMatrix> {
        let mut off = 0;
        self.block_sizes
            .iter()
            .map(|&k| {
                let b = m.view((off, off), (k, k)).clone_owned();
                off += k;
                b
            })
            .collect()
    }
}

fn inner(a: &RMatrix, b: &RMatrix) -> f64 {
    a.dot(b)
}

fn sym(m: RMatrix) -> RMatrix {
    (&m + m.transpose()) * 0.5
}

/// Largest `α` with `X + α ΔX ⪰ 0` (infinite if every direction is non-negative).
fn max_step(x: &RMatrix, dx: &RMatrix) -> Option<f64> {
    let l = x.clone().cholesky()?.l();
    let linv = l.try_inverse()?;
    let w = sym(&linv * dx * linv.transpose());
    let min = w.symmetric_eigenvalues().min();
    Some(if min >= 0.0 { f64::INFINITY } else { -1.0 / min })
}

fn min_eig(m: &RMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym(m.clone()).symmetric_eigenvalues().min()
}

struct Iterate {
    x: RMatrix,
    y: DVector<f64>,
    s: RMatrix,
}

pub fn solve(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let m = p.n_vars();
    let n: usize = p.block_sizes.iter().sum();
    let cmat = p.dense(&p.f0);
    let amat: Vec<RMatrix> = p.fi.iter().map(|b| p.dense(b)).collect();
    let b = DVector::from_column_slice(&p.c);
    let nf = n as f64;

    // Starting point in the spirit of common interior-point codes.
    let a_norms: Vec<f64> = amat.iter().map(|a| a.norm()).collect();
    let xi0 = (0..m)
        .map(|i| nf.sqrt() * (1.0 + b[i].abs()) / (1.0 + a_norms[i]))
        .fold(nf.sqrt(), f64::max)
        .max(1.0);
    let eta0 = (1.0 + a_norms.iter().copied().fold(cmat.norm(), f64::max)) / nf.sqrt();
    let mut it = Iterate { x: RMatrix::identity(n, n) * xi0, y: DVector::zeros(m), s: RMatrix::identity(n, n) * eta0.max(1.0) };

    let a_of = |x: &RMatrix| DVector::from_iterator(m, amat.iter().map(|a| inner(a, x)));
    let at_of = |y: &DVector<f64>| {
        let mut acc = RMatrix::zeros(n, n);
        for (yi, a) in y.iter().zip(&amat) {
            acc += a * *yi;
        }
        acc
    };

    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let rp = &b - a_of(&it.x);
        let rd = &cmat - &it.s - at_of(&it.y);
        let mu = inner(&it.x, &it.s) / nf;
        let gap = inner(&cmat, &it.x) - b.dot(&it.y);
        if rp.amax() <= 1e-10 && rd.amax() <= 1e-10 && gap.abs() <= opts.tol && mu * nf <= opts.tol {
            status = SdpStatus::Optimal;
            break;
        }
        // Dual ray: tr(F_i Z) → 0 relative to Z while tr(F_0 Z) stays negative.
        let trx = it.x.trace();
        if trx > 1e8 {
            let ray = &it.x / trx;
            let f0z = inner(&cmat, &ray);
            if f0z < -1e-6 && a_of(&ray).amax() < 1e-8 {
                status = SdpStatus::Infeasible;
                break;
            }
        }
        iterations += 1;

        let sinv = match it.s.clone().cholesky() {
            Some(ch) => ch.inverse(),
            None => break,
        };
        // Schur complement M_ij = tr(A_i X A_j S^{-1}).
        let xas: Vec<RMatrix> = amat.iter().map(|a| &it.x * a * &sinv).collect();
        let schur = DMatrix::from_fn(m, m, |i, j| inner(&amat[i], &xas[j].transpose()));
        let schur = (&schur + schur.transpose()) * 0.5;
        // Zero or dependent constraint matrices make M singular; fall back to
        // the minimum-norm solution.
        let chol = schur.clone().cholesky();
        let pinv = chol.is_none().then(|| {
            let eig = schur.clone().symmetric_eigen();
            let tol = 1e-13 * eig.eigenvalues.amax().max(1.0);
            let inv = eig.eigenvalues.map(|l| if l > tol { 1.0 / l } else { 0.0 });
            &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
        });
        let solve_m = |rhs: &DVector<f64>| match (&chol, &pinv) {
            (Some(c), _) => Some(c.solve(rhs)),
            (None, Some(p)) => Some(p * rhs),
            (None, None) => None,
        };

        // For a complementarity target R_c:
        //   ΔX = (R_c − X ΔS) S^{-1} (symmetrised), ΔS = R_d − A^T Δy,
        //   M Δy = r_p − A((R_c − X R_d) S^{-1}).
        let direction = |rc: &RMatrix| -> Option<(RMatrix, DVector<f64>, RMatrix)> {
            let base = (rc - &it.x * &rd) * &sinv;
            let dy = solve_m(&(&rp - a_of(&sym(base))))?;
            let ds = &rd - at_of(&dy);
            let dx = sym((rc - &it.x * &ds) * &sinv);
            Some((dx, dy, ds))
        };
        let xs = &it.x * &it.s;
        let Some((dxa, _, dsa)) = direction(&(-&xs)) else { break };
        let (Some(ap_max), Some(ad_max)) = (max_step(&it.x, &dxa), max_step(&it.s, &dsa)) else { break };
        let (apa, ada) = (ap_max.min(1.0), ad_max.min(1.0));
        let mu_aff = inner(&(&it.x + &dxa * apa), &(&it.s + &dsa * ada)) / nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let rc = RMatrix::identity(n, n) * (sigma * mu) - &xs - &dxa * &dsa;
        let Some((dx, dy, ds)) = direction(&rc) else { break };
        let (Some(ap_max), Some(ad_max)) = (max_step(&it.x, &dx), max_step(&it.s, &ds)) else { break };
        let gamma = 0.9 + 0.09 * apa.min(ada);
        let ap = (gamma * ap_max).min(1.0);
        let ad = (gamma * ad_max).min(1.0);
        it.x = sym(&it.x + &dx * ap);
        it.y += &dy * ad;
        it.s = sym(&it.s + &ds * ad);
    }

    let x: Vec<f64> = it.y.iter().map(|v| -v).collect();
    let z = p.split(&it.x);
    let (z, x) = if status == SdpStatus::Infeasible {
        let t = it.x.trace();
        (z.into_iter().map(|b| b / t).collect(), x)
    } else {
        (z, x)
    };
    let fx = p.eval(&x);
    let primal_objective: f64 = p.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    let f0z: f64 = p.f0.iter().zip(&z).map(|(f, z)| inner(f, z)).sum();
    let dual_residual = p
        .fi
        .iter()
        .zip(&p.c)
        .map(|(blocks, ci)| (blocks.iter().zip(&z).map(|(f, z)| inner(f, z)).sum::<f64>() - ci).abs())
        .fold(0.0, f64::max);
    Ok(SdpSolution {
        primal_min_eigenvalue: fx.iter().map(min_eig).fold(f64::INFINITY, f64::min),
        x,
        z,
        primal_objective,
        dual_objective: -f0z,
        gap: primal_objective + f0z,
        dual_residual,
        status,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> RMatrix {
        RMatrix::from_element(1, 1, v)
    }

    #[test]
    fn trivial_feasibility() {
        let p = SdpProblem::new(vec![0.0], vec![RMatrix::identity(2, 2)], vec![vec![RMatrix::zeros(2, 2)]]).unwrap();
        let s = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!(s.gap.abs() <= 1e-8);
        assert!(s.primal_min_eigenvalue >= 0.0);
    }

    #[test]
    fn one_dimensional_lp() {
        // min x s.t. x − 2 ≥ 0
        let p = SdpProblem::new(vec![1.0], vec![scalar(-2.0)], vec![vec![scalar(1.0)]]).unwrap();
        let s = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.x[0] - 2.0).abs() < 1e-7, "{:?}", s);
        assert!(s.gap.abs() <= 1e-8 && s.gap >= -1e-9);
        assert!(s.dual_residual < 1e-7);
    }

    #[test]
    fn small_matrix_problem() {
        // min x s.t. [[x, 1], [1, x]] ⪰ 0 → x* = 1
        let f0 = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = SdpProblem::new(vec![1.0], vec![f0], vec![vec![RMatrix::identity(2, 2)]]).unwrap();
        let s = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-7);
        let z = &s.z[0];
        assert!(min_eig(z) > -1e-9);
        let comp = p.eval(&s.x)[0].clone() * z;
        assert!(comp.norm() <= 10.0 * 1e-8 + 1e-9);
    }

    #[test]
    fn detects_infeasible_primal() {
        // F(x) = −1 + 0·x can never be positive.
        let p = SdpProblem::new(vec![0.0], vec![scalar(-1.0)], vec![vec![scalar(0.0)]]).unwrap();
        let s = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);
        assert!(s.z.iter().map(|b| inner(&p.f0[0], b)).sum::<f64>() < 0.0);
    }

    #[test]
    fn rejects_malformed_data() {
        let asym = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(SdpProblem::new(vec![1.0], vec![asym], vec![vec![RMatrix::identity(2, 2)]]).is_err());
        assert!(SdpProblem::new(vec![1.0, 2.0], vec![scalar(1.0)], vec![vec![scalar(1.0)]]).is_err());
    }
}
