//! State families and random ensembles.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::matlin::{c64, kron, CMatrix};

fn outer(v: &[f64]) -> CMatrix {
    CMatrix::from_fn(v.len(), v.len(), |i, j| c64(v[i] * v[j], 0.0))
}

/// The four unnormalised chessboard vectors in `C^3 ⊗ C^3`.
pub fn chessboard_vectors(m: f64, n: f64, a: f64, b: f64, c: f64, d: f64) -> Result<[[f64; 9]; 4]> {
    if m == 0.0 || n == 0.0 {
        return Err(Error::InvalidArgument("chessboard parameters m and n must be non-zero".into()));
    }
    Ok([
        [m, 0.0, a * c / n, 0.0, n, 0.0, 0.0, 0.0, 0.0],
        [0.0, a, 0.0, b, 0.0, c, 0.0, 0.0, 0.0],
        [n, 0.0, 0.0, 0.0, -m, 0.0, a * d / m, 0.0, 0.0],
        [0.0, b, 0.0, -a, 0.0, 0.0, 0.0, d, 0.0],
    ])
}

/// `ρ ∝ Σ_j |V_j><V_j|`, a PPT entangled 3x3 family.
pub fn chessboard(m: f64, n: f64, a: f64, b: f64, c: f64, d: f64) -> Result<DensityMatrix> {
    let vs = chessboard_vectors(m, n, a, b, c, d)?;
    let sum = vs.iter().map(|v| outer(v)).fold(CMatrix::zeros(9, 9), |acc, x| acc + x);
    DensityMatrix::from_unnormalized(sum, (3, 3))
}

/// Chessboard state with the six parameters drawn from `N(0, 2)`.
pub fn sample_chessboard<R: Rng + ?Sized>(rng: &mut R) -> Result<DensityMatrix> {
    let normal = Normal::new(0.0, 2.0).expect("valid normal");
    let p: Vec<f64> = (0..6).map(|_| normal.sample(rng)).collect();
    chessboard(p[0], p[1], p[2], p[3], p[4], p[5])
}

/// The five product vectors of the "Tiles" unextendible product basis.
pub fn upb_vectors() -> [[f64; 9]; 5] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let e = |i: usize| {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        v
    };
    let sub = |x: [f64; 3], y: [f64; 3]| [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
    let prod = |x: [f64; 3], y: [f64; 3], s: f64| {
        let mut v = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                v[3 * i + j] = s * x[i] * y[j];
            }
        }
        v
    };
    [
        prod(e(0), sub(e(0), e(1)), h),
        prod(sub(e(0), e(1)), e(2), h),
        prod(e(2), sub(e(1), e(2)), h),
        prod(sub(e(1), e(2)), e(0), h),
        prod([1.0; 3], [1.0; 3], 1.0 / 3.0),
    ]
}

/// `p ρ_BE + (1−p) 1/9` with `ρ_BE = (1 − Σ_i |ψ_i><ψ_i|)/4`.
pub fn upb_tiles(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("mixing parameter {p} outside [0, 1]")));
    }
    let proj = upb_vectors().iter().map(|v| outer(v)).fold(CMatrix::zeros(9, 9), |acc, x| acc + x);
    let be = (CMatrix::identity(9, 9) - proj).scale(0.25);
    let rho = be.scale(p) + CMatrix::identity(9, 9).scale((1.0 - p) / 9.0);
    DensityMatrix::from_unnormalized(rho, (3, 3))
}

/// The two-qubit matrix `ρ_ε` before any positivity check.
pub fn rho_epsilon_matrix(eps: f64, r: f64, s: f64, t: f64) -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    let h = eps / 2.0;
    m[(0, 0)] = c64(h * (1.0 + r), 0.0);
    m[(0, 3)] = c64(h * t, 0.0);
    m[(3, 0)] = c64(h * t, 0.0);
    m[(2, 2)] = c64(h * (s - r), 0.0);
    m[(3, 3)] = c64(h * (1.0 - s), 0.0);
    m[(1, 1)] = c64(1.0 - eps, 0.0);
    m
}

pub fn rho_epsilon(eps: f64, r: f64, s: f64, t: f64) -> Result<DensityMatrix> {
    DensityMatrix::new(rho_epsilon_matrix(eps, r, s, t), (2, 2))
}

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c64(StandardNormal.sample(rng), StandardNormal.sample(rng)))
}

/// `G G† / tr(G G†)` with a `d x rank` complex Gaussian `G`.
pub fn random_density<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    random_bipartite((d, 1), rank, rng)
}

pub fn random_bipartite<R: Rng + ?Sized>(dims: (usize, usize), rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    let n = dims.0 * dims.1;
    if rank == 0 || rank > n {
        return Err(Error::InvalidArgument(format!("rank {rank} outside 1..={n}")));
    }
    let g = ginibre(n, rank, rng);
    DensityMatrix::from_unnormalized(&g * g.adjoint(), dims)
}

fn random_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let v = ginibre(d, 1, rng);
    let v = v.unscale(v.norm());
    &v * v.adjoint()
}

/// Explicit convex mixture of `n_terms` random product pure states.
pub fn random_separable<R: Rng + ?Sized>(dims: (usize, usize), n_terms: usize, rng: &mut R) -> Result<DensityMatrix> {
    if n_terms == 0 {
        return Err(Error::InvalidArgument("need at least one product term".into()));
    }
    let n = dims.0 * dims.1;
    let mut acc = CMatrix::zeros(n, n);
    for _ in 0..n_terms {
        let w: f64 = rng.random::<f64>() + 1e-3;
        acc += kron(&random_pure(dims.0, rng), &random_pure(dims.1, rng)).scale(w);
    }
    DensityMatrix::from_unnormalized(acc, dims)
}

/// `p |ψ−><ψ−| + (1−p) 1/4`.
pub fn werner_2q(p: f64) -> Result<DensityMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let singlet = outer(&[0.0, s, -s, 0.0]);
    DensityMatrix::new(singlet.scale(p) + CMatrix::identity(4, 4).scale((1.0 - p) / 4.0), (2, 2))
}

/// `¼(1 + Σ_k c_k σ_k ⊗ σ_k)`.
pub fn bell_diagonal(c1: f64, c2: f64, c3: f64) -> Result<DensityMatrix> {
    let z = c64(0.0, 0.0);
    let sx = CMatrix::from_row_slice(2, 2, &[z, c64(1.0, 0.0), c64(1.0, 0.0), z]);
    let sy = CMatrix::from_row_slice(2, 2, &[z, c64(0.0, -1.0), c64(0.0, 1.0), z]);
    let sz = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), z, z, c64(-1.0, 0.0)]);
    let m = CMatrix::identity(4, 4) + kron(&sx, &sx).scale(c1) + kron(&sy, &sy).scale(c2) + kron(&sz, &sz).scale(c3);
    DensityMatrix::new(m.scale(0.25), (2, 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::{self, partial_transpose, Subsystem};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ppt_min(rho: &DensityMatrix) -> f64 {
        matlin::min_eigenvalue(&partial_transpose(rho.matrix(), rho.dims(), Subsystem::B).unwrap()).unwrap()
    }

    #[test]
    fn chessboard_family() {
        let all_one = chessboard(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(all_one.min_eigenvalue() >= -1e-12);
        assert!(chessboard(1.0, 2.0, 0.0, 0.5, -1.0, 0.3).is_ok());
        assert!(chessboard(0.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let rho = sample_chessboard(&mut rng).unwrap();
            assert!(ppt_min(&rho) > -1e-9);
            let rank = matlin::eigenvalues(rho.matrix()).unwrap().iter().filter(|&&v| v > 1e-10).count();
            assert!(rank <= 4);
        }
        let a = sample_chessboard(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_chessboard(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn upb_family() {
        let proj: f64 = upb_vectors().iter().map(|v| v.iter().map(|x| x * x).sum::<f64>()).sum();
        assert!((proj - 5.0).abs() < 1e-14);
        let mixed = upb_tiles(0.0).unwrap();
        assert!((mixed.matrix() - CMatrix::identity(9, 9).unscale(9.0)).norm() < 1e-15);
        let be = upb_tiles(1.0).unwrap();
        assert!(ppt_min(&be) > -1e-12);
        assert!(be.min_eigenvalue() > -1e-12);
        assert!(upb_tiles(1.5).is_err());
    }

    #[test]
    fn rho_epsilon_family() {
        let r = rho_epsilon(1.0, 0.2, 0.45, 0.0).unwrap();
        assert!(ppt_min(&r) >= -1e-12);
        let pure = rho_epsilon(0.0, 0.2, 0.45, 1.0 / 16.0).unwrap();
        assert!((pure.matrix()[(1, 1)].re - 1.0).abs() < 1e-15);
        assert!(rho_epsilon(1.0, 0.9, 0.45, 0.0).is_err());
    }

    #[test]
    fn random_ensembles() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random_density(4, 1, &mut rng).unwrap();
        assert!((r.purity() - 1.0).abs() < 1e-12);
        for _ in 0..50 {
            assert!(ppt_min(&random_separable((2, 3), 3, &mut rng).unwrap()) > -1e-12);
        }
        let w = werner_2q(1.0).unwrap();
        assert!((w.purity() - 1.0).abs() < 1e-14);
        assert!((w.matrix()[(1, 2)].re + 0.5).abs() < 1e-15);
        assert!(bell_diagonal(1.0, 1.0, 1.0).is_err());
    }
}
