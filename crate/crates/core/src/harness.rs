//! Reproducible experiments: threshold bisection over one-parameter
//! families, Monte Carlo detection fractions and the ρ_ε region scan.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::{bloch_invert, FlipSide};
use crate::criteria::{evaluate, CriteriaOptions, Criterion, VerdictStatus, EPS_MARGIN};
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::matlin::{self, Subsystem};
use crate::states;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionMode {
    Parallel,
    Sequential,
}

impl Default for ExecutionMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecutionMode::Parallel
        } else {
            ExecutionMode::Sequential
        }
    }
}

/// Independent stream `index` of the generator seeded by `seed`. Sample `i`
/// sees the same numbers whatever the thread count or evaluation order.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `(0..n).map(f)` in index order, spread over the rayon pool when asked.
/// Without the `parallel` feature both modes run sequentially.
pub fn map_indexed<T, F>(n: usize, mode: ExecutionMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecutionMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// One-parameter families for threshold searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamFamily {
    Upb,
    Werner,
}

impl std::str::FromStr for ParamFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upb" => Ok(ParamFamily::Upb),
            "werner" => Ok(ParamFamily::Werner),
            other => Err(Error::InvalidArgument(format!("no one-parameter family '{other}'"))),
        }
    }
}

impl ParamFamily {
    pub fn state(self, p: f64) -> Result<DensityMatrix> {
        match self {
            ParamFamily::Upb => states::upb_tiles(p),
            ParamFamily::Werner => states::werner_2q(p),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ThresholdOptions {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub presweep: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self { lo: 0.0, hi: 1.0, tol: 1e-4, presweep: 20 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub criterion: String,
    /// Smallest detected parameter, to within `tol`; `None` if nothing in range is detected.
    pub p_star: Option<f64>,
    /// Final `(undetected, detected)` bracket.
    pub bracket: Option<(f64, f64)>,
    pub presweep: Vec<(f64, bool)>,
    pub evaluations: usize,
}

/// Bisects on the detection boolean. Detection must be monotone in `p`;
/// an evenly spaced presweep checks this first and picks the bracket.
pub fn threshold(
    state: impl Fn(f64) -> Result<DensityMatrix>,
    criterion: Criterion,
    opts: &ThresholdOptions,
    copts: &CriteriaOptions,
) -> Result<ThresholdResult> {
    if opts.lo.is_nan() || opts.hi.is_nan() || opts.lo >= opts.hi || opts.tol.is_nan() || opts.tol <= 0.0 || opts.presweep < 2 {
        return Err(Error::InvalidArgument("threshold needs lo < hi, tol > 0 and at least 2 presweep points".into()));
    }
    let detected = |p: f64| -> Result<bool> { Ok(evaluate(criterion, &state(p)?, copts)?.detected) };
    let n = opts.presweep;
    let mut presweep = Vec::with_capacity(n);
    for i in 0..n {
        let p = opts.lo + (opts.hi - opts.lo) * i as f64 / (n - 1) as f64;
        presweep.push((p, detected(p)?));
    }
    let mut evaluations = n;
    if let Some(w) = presweep.windows(2).find(|w| w[0].1 && !w[1].1) {
        return Err(Error::InvalidArgument(format!(
            "{criterion} detection is not monotone: detected at {} but not at {}",
            w[0].0, w[1].0
        )));
    }
    let first = presweep.iter().position(|&(_, d)| d);
    let (mut a, mut b) = match first {
        None => return Ok(ThresholdResult { criterion: criterion.to_string(), p_star: None, bracket: None, presweep, evaluations }),
        Some(0) => {
            let lo = opts.lo;
            return Ok(ThresholdResult { criterion: criterion.to_string(), p_star: Some(lo), bracket: None, presweep, evaluations });
        }
        Some(k) => (presweep[k - 1].0, presweep[k].0),
    };
    while b - a > opts.tol {
        let m = 0.5 * (a + b);
        evaluations += 1;
        if detected(m)? {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(ThresholdResult {
        criterion: criterion.to_string(),
        p_star: Some(0.5 * (a + b)),
        bracket: Some((a, b)),
        presweep,
        evaluations,
    })
}

/// Ensembles for Monte Carlo benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum SampleFamily {
    Chessboard,
    Random { dims: (usize, usize), rank: usize },
    Separable { dims: (usize, usize), terms: usize },
}

impl SampleFamily {
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            SampleFamily::Chessboard => (3, 3),
            SampleFamily::Random { dims, .. } | SampleFamily::Separable { dims, .. } => dims,
        }
    }

    pub fn sample(&self, seed: u64, index: u64) -> Result<DensityMatrix> {
        let mut rng = sample_rng(seed, index);
        match *self {
            SampleFamily::Chessboard => states::sample_chessboard(&mut rng),
            SampleFamily::Random { dims, rank } => states::random_bipartite(dims, rank, &mut rng),
            SampleFamily::Separable { dims, terms } => states::random_separable(dims, terms, &mut rng),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRow {
    pub index: usize,
    pub criterion: String,
    pub margin: f64,
    pub detected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionSummary {
    pub criterion: String,
    pub detected: usize,
    pub fraction: f64,
    pub best_effort: usize,
    pub undetermined: usize,
}

/// Samples detected by `subset` but not by `superset`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Inclusion {
    pub subset: String,
    pub superset: String,
    pub counterexamples: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub family: SampleFamily,
    pub n_samples: usize,
    pub seed: u64,
    pub criteria: Vec<CriterionSummary>,
    pub inclusions: Vec<Inclusion>,
    pub wall_time_s: f64,
    pub version: String,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub family: SampleFamily,
    pub n: usize,
    pub seed: u64,
    pub criteria: Vec<Criterion>,
    pub mode: ExecutionMode,
    pub criteria_options: CriteriaOptions,
}

const INCLUSIONS: [(Criterion, Criterion); 3] = [
    (Criterion::DeVicente, Criterion::SingularValues),
    (Criterion::Trace, Criterion::SingularValues),
    (Criterion::Ccnr, Criterion::Schmidt),
];

/// Evaluates every criterion on `n` samples. Rows come back ordered by
/// sample index then criterion. A numerical failure inside one criterion
/// is recorded as an undetermined NaN row instead of aborting the run.
pub fn benchmark(opts: &BenchmarkOptions) -> Result<(BenchmarkReport, Vec<SampleRow>)> {
    let start = Instant::now();
    let per_sample = map_indexed(opts.n, opts.mode, |i| -> Result<Vec<(f64, bool, VerdictStatus)>> {
        let rho = opts.family.sample(opts.seed, i as u64)?;
        opts.criteria
            .iter()
            .map(|&c| match evaluate(c, &rho, &opts.criteria_options) {
                Ok(v) => Ok((v.margin, v.detected, v.status)),
                Err(e) if !e.is_input_error() => Ok((f64::NAN, false, VerdictStatus::Undetermined)),
                Err(e) => Err(e),
            })
            .collect()
    });
    let per_sample: Vec<_> = per_sample.into_iter().collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(opts.n * opts.criteria.len());
    for (i, results) in per_sample.iter().enumerate() {
        for (c, &(margin, detected, _)) in opts.criteria.iter().zip(results) {
            rows.push(SampleRow { index: i, criterion: c.to_string(), margin, detected });
        }
    }
    let criteria = opts
        .criteria
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let count = |pred: &dyn Fn(&(f64, bool, VerdictStatus)) -> bool| per_sample.iter().filter(|r| pred(&r[k])).count();
            let detected = count(&|r| r.1);
            CriterionSummary {
                criterion: c.to_string(),
                detected,
                fraction: if opts.n == 0 { 0.0 } else { detected as f64 / opts.n as f64 },
                best_effort: count(&|r| r.2 == VerdictStatus::BestEffort),
                undetermined: count(&|r| r.2 == VerdictStatus::Undetermined),
            }
        })
        .collect();
    let pos = |c: Criterion| opts.criteria.iter().position(|&x| x == c);
    let inclusions = INCLUSIONS
        .iter()
        .filter_map(|&(sub, sup)| {
            let (a, b) = (pos(sub)?, pos(sup)?);
            Some(Inclusion {
                subset: sub.to_string(),
                superset: sup.to_string(),
                counterexamples: (0..opts.n).filter(|&i| per_sample[i][a].1 && !per_sample[i][b].1).collect(),
            })
        })
        .collect();
    let report = BenchmarkReport {
        family: opts.family,
        n_samples: opts.n,
        seed: opts.seed,
        criteria,
        inclusions,
        wall_time_s: start.elapsed().as_secs_f64(),
        version: VERSION.to_string(),
    };
    Ok((report, rows))
}

/// Writes `index,criterion,margin,detected` rows. Margins use Rust's
/// shortest round-trip formatting, so equal runs give identical bytes.
pub fn write_csv<W: Write>(rows: &[SampleRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `ρ_ε` and its A-side Bloch inversion get the same PPT verdict.
    Same,
    /// Exactly one of the two is PPT-detected.
    Different,
    /// `ρ_ε` or its inversion is not positive semidefinite.
    NotAState,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Fig1Point {
    pub eps: f64,
    pub r: f64,
    pub region: Region,
}

const STATE_TOL: f64 = 1e-9;

fn ppt_detected(m: &matlin::CMatrix) -> Result<bool> {
    let pt = matlin::partial_transpose(m, (2, 2), Subsystem::B)?;
    Ok(-matlin::min_eigenvalue(&pt)? > EPS_MARGIN)
}

pub fn classify_rho_epsilon(eps: f64, r: f64, s: f64, t: f64) -> Result<Region> {
    let m = states::rho_epsilon_matrix(eps, r, s, t);
    if matlin::min_eigenvalue(&m)? < -STATE_TOL {
        return Ok(Region::NotAState);
    }
    let inv = bloch_invert(&m, FlipSide::A)?;
    if inv.min_eigenvalue < -STATE_TOL {
        return Ok(Region::NotAState);
    }
    Ok(if ppt_detected(&m)? == ppt_detected(&inv.matrix)? { Region::Same } else { Region::Different })
}

/// Scans `ε, r ∈ [0, 1]` on a grid of the given step.
pub fn fig1(step: f64, s: f64, t: f64, mode: ExecutionMode) -> Result<Vec<Fig1Point>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid step {step} outside (0, 1]")));
    }
    let n = (1.0 / step).round() as usize + 1;
    let coord = |i: usize| (i as f64 * step).min(1.0);
    map_indexed(n * n, mode, |k| {
        let (eps, r) = (coord(k / n), coord(k % n));
        classify_rho_epsilon(eps, r, s, t).map(|region| Fig1Point { eps, r, region })
    })
    .into_iter()
    .collect()
}

pub fn write_fig1_csv<W: Write>(points: &[Fig1Point], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
