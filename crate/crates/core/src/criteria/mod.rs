//! Separability tests. Every test reports a margin `LHS − RHS` of its
//! defining inequality; a positive margin beyond [`EPS_MARGIN`] certifies
//! entanglement.

mod two_qubit;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use two_qubit::{cmc_sdp_2q, gamma_eff, lur_value, CmWitness, LurPair, LurSet, SdpReport, WITNESS_SLACK};

use crate::covariance::{build_block_cm, BlockCovarianceMatrix, CmKind};
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::filtering::{normal_form, FilterOptions};
use crate::matlin::{self, ky_fan_norm, operator_norm, trace_norm, Subsystem};
use crate::observables::{BasisKind, ObservableBasis};
use crate::schmidt::operator_schmidt;
use crate::sdp::SdpOptions;

/// Margins at or below this value count as "not detected".
pub const EPS_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    Ppt,
    Ccnr,
    DeVicente,
    SingularValues,
    Trace,
    Schmidt,
    KyFanWeyl(usize),
    Filter,
    Sdp2q,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Ppt => f.write_str("ppt"),
            Criterion::Ccnr => f.write_str("ccnr"),
            Criterion::DeVicente => f.write_str("de-vicente"),
            Criterion::SingularValues => f.write_str("singular-value"),
            Criterion::Trace => f.write_str("trace"),
            Criterion::Schmidt => f.write_str("schmidt"),
            Criterion::KyFanWeyl(s) => write!(f, "kyfan-weyl-{s}"),
            Criterion::Filter => f.write_str("filter-cmc"),
            Criterion::Sdp2q => f.write_str("sdp-2q"),
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ppt" => Criterion::Ppt,
            "ccnr" => Criterion::Ccnr,
            "de-vicente" | "devicente" => Criterion::DeVicente,
            "singular-value" | "singular-values" | "sv" => Criterion::SingularValues,
            "trace" => Criterion::Trace,
            "schmidt" => Criterion::Schmidt,
            "filter-cmc" | "filter" => Criterion::Filter,
            "sdp-2q" | "sdp" => Criterion::Sdp2q,
            other => match other.strip_prefix("kyfan-weyl-").map(str::parse) {
                Some(Ok(s)) if s >= 1 => Criterion::KyFanWeyl(s),
                _ => return Err(Error::InvalidArgument(format!("unknown criterion '{other}'"))),
            },
        })
    }
}

impl Criterion {
    /// Criteria applicable to a state of the given dimensions, in report order.
    pub fn applicable(dims: (usize, usize)) -> Vec<Criterion> {
        let mut out = vec![
            Criterion::Ppt,
            Criterion::Ccnr,
            Criterion::DeVicente,
            Criterion::SingularValues,
            Criterion::Trace,
            Criterion::Schmidt,
        ];
        if dims.0 == dims.1 {
            out.extend((1..dims.0).map(Criterion::KyFanWeyl));
        }
        out.push(Criterion::Filter);
        if dims == (2, 2) {
            out.push(Criterion::Sdp2q);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStatus {
    Decided,
    /// Filtering hit its iteration cap; the verdict is sound but may be weaker.
    BestEffort,
    /// The numerical pipeline failed; neither detected nor cleared.
    Undetermined,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Details {
    Ppt { min_eigenvalue: f64 },
    Bound { lhs: f64, rhs: f64 },
    Schmidt { lambdas: Vec<f64>, g_a: Vec<f64>, g_b: Vec<f64>, lhs: f64, rhs: f64 },
    Filter {
        xi: Vec<f64>,
        sum_xi: f64,
        /// Bounds actually applied, as `(name, value)`.
        bounds: Vec<(String, f64)>,
        converged: bool,
        iterations: usize,
        f_value: f64,
        noise_mixed: bool,
        marginal_deviation: f64,
    },
    Sdp(Box<SdpReport>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub name: String,
    pub detected: bool,
    pub margin: f64,
    pub status: VerdictStatus,
    pub details: Details,
}

impl CriterionVerdict {
    /// The SDP payload, for verdicts produced by the two-qubit program.
    pub fn sdp_report(&self) -> Option<&SdpReport> {
        match &self.details {
            Details::Sdp(r) => Some(r),
            _ => None,
        }
    }

    fn new(criterion: Criterion, margin: f64, status: VerdictStatus, details: Details) -> Self {
        Self { name: criterion.to_string(), detected: margin > EPS_MARGIN, margin, status, details }
    }

    fn bound(criterion: Criterion, lhs: f64, rhs: f64) -> Self {
        Self::new(criterion, lhs - rhs, VerdictStatus::Decided, Details::Bound { lhs, rhs })
    }
}

/// Shared options for [`evaluate`] and [`run_all`].
#[derive(Debug, Clone, Copy)]
pub struct CriteriaOptions {
    pub filter: FilterOptions,
    pub sdp: SdpOptions,
    /// Local basis for the covariance-matrix tests. Their margins do not
    /// depend on it up to rounding.
    pub basis: BasisKind,
}

impl Default for CriteriaOptions {
    fn default() -> Self {
        Self { filter: FilterOptions::default(), sdp: SdpOptions::default(), basis: BasisKind::GellMann }
    }
}

fn gellmann_pair(dims: (usize, usize)) -> Result<(ObservableBasis, ObservableBasis)> {
    Ok((ObservableBasis::gellmann(dims.0)?, ObservableBasis::gellmann(dims.1)?))
}

/// Symmetric block CM over the given local bases. Trace and Ky-Fan norms
/// of its blocks do not depend on which orthonormal bases are chosen.
pub fn symmetric_block_cm(rho: &DensityMatrix, basis: BasisKind) -> Result<BlockCovarianceMatrix> {
    let (da, db) = rho.dims();
    let ba = ObservableBasis::of_kind(basis, da)?;
    let bb = ObservableBasis::of_kind(basis, db)?;
    build_block_cm(rho, &ba, &bb, CmKind::Symmetric)
}

pub fn ppt(rho: &DensityMatrix) -> Result<CriterionVerdict> {
    let pt = matlin::partial_transpose(rho.matrix(), rho.dims(), Subsystem::B)?;
    let min = matlin::min_eigenvalue(&pt)?;
    Ok(CriterionVerdict::new(Criterion::Ppt, -min, VerdictStatus::Decided, Details::Ppt { min_eigenvalue: min }))
}

/// Sum of operator Schmidt coefficients at most one.
pub fn ccnr(rho: &DensityMatrix) -> Result<CriterionVerdict> {
    let s = operator_schmidt(rho)?;
    Ok(CriterionVerdict::bound(Criterion::Ccnr, s.lambdas.iter().sum(), 1.0))
}

/// `‖ℭ^red‖_tr ≤ √((1 − 1/d_A)(1 − 1/d_B))` for the traceless correlation block.
pub fn de_vicente(rho: &DensityMatrix) -> Result<CriterionVerdict> {
    let (da, db) = rho.dims();
    let (ga, gb) = gellmann_pair((da, db))?;
    let t = crate::covariance::correlation_matrix(rho.matrix(), (da, db), &ga, &gb)?;
    let red = t.view((1, 1), (da * da - 1, db * db - 1)).clone_owned();
    let rhs = ((1.0 - 1.0 / da as f64) * (1.0 - 1.0 / db as f64)).sqrt();
    Ok(CriterionVerdict::bound(Criterion::DeVicente, trace_norm(&red), rhs))
}

/// `‖C‖_tr ≤ √([1 − tr ρ_A²][1 − tr ρ_B²])`.
pub fn cmc_singular_values(rho: &DensityMatrix, basis: BasisKind) -> Result<CriterionVerdict> {
    let cm = symmetric_block_cm(rho, basis)?;
    let rhs = ((1.0 - cm.purity_a).max(0.0) * (1.0 - cm.purity_b).max(0.0)).sqrt();
    Ok(CriterionVerdict::bound(Criterion::SingularValues, trace_norm(&cm.c), rhs))
}

/// How `cmc_trace` pairs rows of `C` with columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceMode {
    /// Rotate both local bases by the singular vectors of `C`, making it
    /// diagonal, and pair index `i` with `i`.
    Auto,
    /// Pair A-index `i` with B-index `J[i]` in the chosen local bases;
    /// `J` holds `d_A²` distinct indices and needs `d_A ≤ d_B`.
    Pairing(Vec<usize>),
}

/// `2 Σ_i |C_{i, j_i}| ≤ [1 − tr ρ_A²] + [1 − tr ρ_B²]`.
pub fn cmc_trace(rho: &DensityMatrix, mode: &TraceMode, basis: BasisKind) -> Result<CriterionVerdict> {
    let cm = symmetric_block_cm(rho, basis)?;
    let lhs = match mode {
        TraceMode::Auto => 2.0 * trace_norm(&cm.c),
        TraceMode::Pairing(j) => {
            let (na, nb) = cm.c.shape();
            let mut seen = vec![false; nb];
            if na > nb || j.len() != na || j.iter().any(|&k| k >= nb || std::mem::replace(&mut seen[k], true)) {
                return Err(Error::InvalidArgument(format!(
                    "pairing needs {na} distinct indices below {nb}"
                )));
            }
            2.0 * j.iter().enumerate().map(|(i, &k)| cm.c[(i, k)].abs()).sum::<f64>()
        }
    };
    Ok(CriterionVerdict::bound(Criterion::Trace, lhs, (1.0 - cm.purity_a) + (1.0 - cm.purity_b)))
}

/// `2 Σ_i |λ_i − λ_i² g_i^A g_i^B| ≤ 2 − Σ_i λ_i² [(g_i^A)² + (g_i^B)²]`.
pub fn cmc_schmidt(rho: &DensityMatrix) -> Result<CriterionVerdict> {
    let s = operator_schmidt(rho)?;
    let mut lhs = 0.0;
    let mut rhs = 2.0;
    for ((l, ga), gb) in s.lambdas.iter().zip(&s.g_a).zip(&s.g_b) {
        lhs += 2.0 * (l - l * l * ga * gb).abs();
        rhs -= l * l * (ga * ga + gb * gb);
    }
    let margin = lhs - rhs;
    Ok(CriterionVerdict::new(
        Criterion::Schmidt,
        margin,
        VerdictStatus::Decided,
        Details::Schmidt { lambdas: s.lambdas, g_a: s.g_a, g_b: s.g_b, lhs, rhs },
    ))
}

/// `‖C‖²_{KF(k)} ≤ (k‖A‖ − s)(k‖B‖ − s)` with `k = d² − d + 1 + s`, equal local dimensions.
pub fn cmc_kyfan_weyl(rho: &DensityMatrix, s: usize, basis: BasisKind) -> Result<CriterionVerdict> {
    let (da, db) = rho.dims();
    if da != db {
        return Err(Error::InvalidArgument(format!("Ky-Fan/Weyl test needs equal dimensions, got {da}x{db}")));
    }
    let d = da;
    if s == 0 || s >= d {
        return Err(Error::InvalidArgument(format!("s must lie in 1..={} for d={d}", d - 1)));
    }
    let cm = symmetric_block_cm(rho, basis)?;
    let k = d * d - d + 1 + s;
    let kf = ky_fan_norm(&cm.c, k)?;
    let (kf_, s_) = (k as f64, s as f64);
    let fa = (kf_ * operator_norm(&cm.a_real()) - s_).max(0.0);
    let fb = (kf_ * operator_norm(&cm.b_real()) - s_).max(0.0);
    Ok(CriterionVerdict::bound(Criterion::KyFanWeyl(s), kf * kf, fa * fb))
}

/// Bound on `Σ ξ_i` for `d_A < d_B` that uses maximally mixed marginals.
fn uneven_bound(da: f64, db: f64) -> f64 {
    da * db / 2.0 * (1.0 - 1.0 / da + (da * da - 1.0) / db + f64::min(0.0, -(db - 1.0) + (db * db - da * da) / db))
}

/// `Σ ξ_i ≤ d² − d` in the filter normal form; for unequal dimensions the
/// larger of the two violations of the uneven-dimension bounds.
pub fn cmc_filter(rho: &DensityMatrix, opts: &FilterOptions) -> Result<CriterionVerdict> {
    let (da, db) = rho.dims();
    let nf = normal_form(rho, opts)?;
    let sum: f64 = nf.xi.iter().sum();
    let (lo, hi) = (da.min(db) as f64, da.max(db) as f64);
    let mut bounds = vec![("bloch".to_string(), (lo * hi * (lo - 1.0) * (hi - 1.0)).sqrt())];
    if da != db && nf.converged {
        bounds.push(("diagonal".to_string(), uneven_bound(lo, hi)));
    }
    let margin = bounds.iter().map(|(_, b)| sum - b).fold(f64::NEG_INFINITY, f64::max);
    let status = if nf.converged { VerdictStatus::Decided } else { VerdictStatus::BestEffort };
    Ok(CriterionVerdict::new(
        Criterion::Filter,
        margin,
        status,
        Details::Filter {
            xi: nf.xi,
            sum_xi: sum,
            bounds,
            converged: nf.converged,
            iterations: nf.iterations,
            f_value: nf.f_value,
            noise_mixed: nf.noise_mixed,
            marginal_deviation: nf.marginal_deviation,
        },
    ))
}

pub fn evaluate(criterion: Criterion, rho: &DensityMatrix, opts: &CriteriaOptions) -> Result<CriterionVerdict> {
    match criterion {
        Criterion::Ppt => ppt(rho),
        Criterion::Ccnr => ccnr(rho),
        Criterion::DeVicente => de_vicente(rho),
        Criterion::SingularValues => cmc_singular_values(rho, opts.basis),
        Criterion::Trace => cmc_trace(rho, &TraceMode::Auto, opts.basis),
        Criterion::Schmidt => cmc_schmidt(rho),
        Criterion::KyFanWeyl(s) => cmc_kyfan_weyl(rho, s, opts.basis),
        Criterion::Filter => cmc_filter(rho, &opts.filter),
        Criterion::Sdp2q => cmc_sdp_2q(rho, &opts.sdp),
    }
}

/// Every applicable criterion, in [`Criterion::applicable`] order.
pub fn run_all(rho: &DensityMatrix, opts: &CriteriaOptions) -> Result<Vec<CriterionVerdict>> {
    Criterion::applicable(rho.dims()).into_iter().map(|c| evaluate(c, rho, opts)).collect()
}

/// Margins of a list of criteria; convenient for sweeps.
pub fn margins(rho: &DensityMatrix, criteria: &[Criterion], opts: &CriteriaOptions) -> Result<Vec<f64>> {
    criteria.iter().map(|&c| evaluate(c, rho, opts).map(|v| v.margin)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::{c64, CMatrix};
    use crate::states;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn product() -> DensityMatrix {
        let a = CMatrix::from_fn(3, 3, |i, j| if i == j { c64([0.5, 0.3, 0.2][i], 0.0) } else { c64(0.0, 0.0) });
        let b = CMatrix::from_fn(3, 3, |i, j| if i == j { c64([0.1, 0.6, 0.3][i], 0.0) } else { c64(0.0, 0.0) });
        DensityMatrix::product(&a, &b).unwrap()
    }

    #[test]
    fn names_roundtrip() {
        for c in Criterion::applicable((3, 3)).into_iter().chain([Criterion::Sdp2q]) {
            assert_eq!(c.to_string().parse::<Criterion>().unwrap(), c);
        }
        assert!("kyfan-weyl-0".parse::<Criterion>().is_err());
        assert!("nope".parse::<Criterion>().is_err());
    }

    #[test]
    fn product_state_is_never_detected() {
        let rho = product();
        for v in run_all(&rho, &CriteriaOptions::default()).unwrap() {
            assert!(!v.detected, "{} detected a product state (margin {})", v.name, v.margin);
        }
    }

    #[test]
    fn singlet_margins() {
        let singlet = states::werner_2q(1.0).unwrap();
        assert!((ppt(&singlet).unwrap().margin - 0.5).abs() < 1e-12);
        let bell = states::bell_diagonal(1.0, -1.0, 1.0).unwrap();
        assert!((ccnr(&bell).unwrap().margin - 1.0).abs() < 1e-12);
        for v in run_all(&singlet, &CriteriaOptions::default()).unwrap() {
            assert!(v.detected, "{} missed the singlet (margin {})", v.name, v.margin);
        }
    }

    #[test]
    fn werner_crossings() {
        for (p, expect) in [(0.3, false), (0.34, true), (0.9, true), (0.1, false)] {
            let w = states::werner_2q(p).unwrap();
            assert_eq!(ppt(&w).unwrap().detected, expect, "ppt p={p}");
            assert_eq!(de_vicente(&w).unwrap().detected, expect, "de Vicente p={p}");
            assert_eq!(cmc_filter(&w, &FilterOptions::default()).unwrap().detected, expect, "filter p={p}");
            assert!((ppt(&w).unwrap().margin - (3.0 * p - 1.0) / 4.0).abs() < 1e-12);
            let dv = de_vicente(&w).unwrap();
            if let Details::Bound { lhs, rhs } = dv.details {
                assert!((lhs - 1.5 * p).abs() < 1e-12 && (rhs - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn trace_pairing_validation() {
        let rho = product();
        assert!(cmc_trace(&rho, &TraceMode::Pairing((0..9).collect()), BasisKind::GellMann).is_ok());
        assert!(cmc_trace(&rho, &TraceMode::Pairing(vec![0; 9]), BasisKind::GellMann).is_err());
        let auto = cmc_trace(&rho, &TraceMode::Auto, BasisKind::GellMann).unwrap();
        let diag = cmc_trace(&rho, &TraceMode::Pairing((0..9).collect()), BasisKind::GellMann).unwrap();
        assert!(auto.margin >= diag.margin - 1e-12);
    }

    #[test]
    fn cm_margins_do_not_depend_on_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = states::random_bipartite((3, 3), 2, &mut rng).unwrap();
        for kind in [BasisKind::Standard, BasisKind::WeylParity] {
            let a = cmc_singular_values(&rho, BasisKind::GellMann).unwrap().margin;
            let b = cmc_singular_values(&rho, kind).unwrap().margin;
            assert!((a - b).abs() < 1e-10);
            let a = cmc_kyfan_weyl(&rho, 2, BasisKind::GellMann).unwrap().margin;
            let b = cmc_kyfan_weyl(&rho, 2, kind).unwrap().margin;
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn kyfan_weyl_requires_equal_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = states::random_bipartite((2, 3), 6, &mut rng).unwrap();
        assert!(cmc_kyfan_weyl(&rho, 1, BasisKind::GellMann).is_err());
        assert!(cmc_kyfan_weyl(&product(), 3, BasisKind::GellMann).is_err());
        let bell = states::werner_2q(1.0).unwrap();
        let v = cmc_kyfan_weyl(&bell, 1, BasisKind::Pauli).unwrap();
        // Pauli blocks of the singlet: A = B = ½ diag(0,1,1,1), C = −½ diag(0,1,1,1).
        assert!((v.margin - (2.25 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_schmidt_subspaces_do_not_change_margins() {
        // The Bell state has four equal coefficients; local unitaries rotate the
        // degenerate singular subspace without changing any margin.
        let bell = states::werner_2q(0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = crate::matlin::CMatrix::from_fn(2, 2, |_, _| c64(rand::Rng::random::<f64>(&mut rng), rand::Rng::random::<f64>(&mut rng))).qr().q();
        let uu = matlin::kron(&u, &u);
        let rotated = DensityMatrix::new(&uu * bell.matrix() * uu.adjoint(), (2, 2)).unwrap();
        for (a, b) in [(cmc_schmidt(&bell), cmc_schmidt(&rotated)), (ccnr(&bell), ccnr(&rotated))] {
            assert!((a.unwrap().margin - b.unwrap().margin).abs() < 1e-10);
        }
    }
}
