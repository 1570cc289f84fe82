use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use cmcsep::criteria::{self, cmc_sdp_2q, CriteriaOptions, Criterion};
use cmcsep::filtering::{normal_form, FilterOptions};
use cmcsep::harness::{self, BenchmarkOptions, ExecutionMode, ParamFamily, SampleFamily, ThresholdOptions};
use cmcsep::io::{read_state, StateFile};
use cmcsep::{states, BasisKind, DensityMatrix, Error, VerdictStatus};

#[derive(Parser)]
#[command(name = "cmcsep", version, about = "Covariance matrix entanglement criteria for bipartite states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Parallel,
    Sequential,
}

impl From<Mode> for ExecutionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Parallel => ExecutionMode::Parallel,
            Mode::Sequential => ExecutionMode::Sequential,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GenFamily {
    Chessboard,
    Upb,
    RhoEps,
    Werner,
    Random,
    Separable,
}

#[derive(Subcommand)]
enum Command {
    /// Run separability criteria on a state file and print JSON verdicts.
    Detect {
        state: PathBuf,
        /// Comma-separated criterion names, or "all".
        #[arg(long, default_value = "all")]
        criteria: String,
        /// Local observable basis for the covariance-matrix tests.
        #[arg(long, default_value = "gellmann")]
        basis: String,
    },
    /// Solve the two-qubit program and print the witness and LUR observables.
    Witness { state: PathBuf },
    /// Compute the local filter normal form.
    NormalForm {
        state: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Generate a state file.
    Gen {
        #[arg(long)]
        family: GenFamily,
        /// Family parameters: chessboard m,n,a,b,c,d; upb/werner p; rho-eps eps,r,s,t;
        /// random/separable dA,dB[,rank|terms].
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Bisect the smallest detected mixing parameter of a family.
    Threshold {
        #[arg(long, default_value = "upb")]
        family: String,
        #[arg(long)]
        criterion: String,
        #[arg(long, default_value_t = 0.0)]
        p_lo: f64,
        #[arg(long, default_value_t = 1.0)]
        p_hi: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Detection fractions over a random ensemble.
    Benchmark {
        #[arg(long, default_value = "chessboard")]
        family: String,
        #[arg(short, long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "filter-cmc,singular-value,trace,schmidt,ccnr,de-vicente")]
        criteria: String,
        /// Per-sample CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "parallel")]
        mode: Mode,
    },
    /// Classify the ρ_ε family on an (ε, r) grid and print CSV.
    Fig1 {
        #[arg(long, default_value_t = 0.005)]
        step: f64,
        #[arg(long, default_value_t = 0.45)]
        s: f64,
        #[arg(long, default_value_t = 0.0625)]
        t: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_criteria(list: &str, dims: Option<(usize, usize)>) -> Result<Vec<Criterion>, Error> {
    if list == "all" {
        return dims
            .map(Criterion::applicable)
            .ok_or_else(|| Error::InvalidArgument("\"all\" needs a state to pick criteria".into()));
    }
    list.split(',').map(|s| s.trim().parse()).collect()
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn generate(family: GenFamily, params: &[f64], seed: u64) -> Result<(DensityMatrix, serde_json::Value), Error> {
    let need = |n: usize| {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("family needs {n} parameters, got {}", params.len())))
        }
    };
    let dims_of = |p: &[f64]| -> Result<(usize, usize), Error> {
        if p.len() < 2 || p[..2].iter().any(|x| *x < 1.0 || x.fract() != 0.0) {
            return Err(Error::InvalidArgument("expected integer dimensions dA,dB".into()));
        }
        Ok((p[0] as usize, p[1] as usize))
    };
    let mut rng = harness::sample_rng(seed, 0);
    let rho = match family {
        GenFamily::Chessboard if params.is_empty() => states::sample_chessboard(&mut rng)?,
        GenFamily::Chessboard => {
            need(6)?;
            states::chessboard(params[0], params[1], params[2], params[3], params[4], params[5])?
        }
        GenFamily::Upb => {
            need(1)?;
            states::upb_tiles(params[0])?
        }
        GenFamily::Werner => {
            need(1)?;
            states::werner_2q(params[0])?
        }
        GenFamily::RhoEps => {
            need(4)?;
            states::rho_epsilon(params[0], params[1], params[2], params[3])?
        }
        GenFamily::Random => {
            let dims = dims_of(params)?;
            let rank = params.get(2).map_or(dims.0 * dims.1, |r| *r as usize);
            states::random_bipartite(dims, rank, &mut rng)?
        }
        GenFamily::Separable => {
            let dims = dims_of(params)?;
            let terms = params.get(2).map_or(dims.0 * dims.1, |r| *r as usize);
            states::random_separable(dims, terms, &mut rng)?
        }
    };
    let name = match family {
        GenFamily::Chessboard => "chessboard",
        GenFamily::Upb => "upb",
        GenFamily::RhoEps => "rho-eps",
        GenFamily::Werner => "werner",
        GenFamily::Random => "random",
        GenFamily::Separable => "separable",
    };
    Ok((rho, json!({ "family": name, "params": params, "seed": seed })))
}

fn sample_family(name: &str) -> Result<SampleFamily, Error> {
    let mut parts = name.split(':');
    let head = parts.next().unwrap_or_default();
    let nums: Vec<usize> = parts.map(|p| p.parse().map_err(|_| Error::InvalidArgument(format!("bad number '{p}' in family")))).collect::<Result<_, _>>()?;
    match (head, nums.as_slice()) {
        ("chessboard", []) => Ok(SampleFamily::Chessboard),
        ("random", [a, b]) => Ok(SampleFamily::Random { dims: (*a, *b), rank: a * b }),
        ("random", [a, b, r]) => Ok(SampleFamily::Random { dims: (*a, *b), rank: *r }),
        ("separable", [a, b]) => Ok(SampleFamily::Separable { dims: (*a, *b), terms: a * b }),
        ("separable", [a, b, t]) => Ok(SampleFamily::Separable { dims: (*a, *b), terms: *t }),
        _ => Err(Error::InvalidArgument(format!(
            "unknown ensemble '{name}' (chessboard, random:dA:dB[:rank], separable:dA:dB[:terms])"
        ))),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Detect { state, criteria: list, basis } => {
            let rho = read_state(&state)?;
            let basis: BasisKind = basis.parse()?;
            let opts = CriteriaOptions { basis, ..CriteriaOptions::default() };
            let verdicts = parse_criteria(&list, Some(rho.dims()))?
                .into_iter()
                .map(|c| criteria::evaluate(c, &rho, &opts))
                .collect::<Result<Vec<_>, _>>()?;
            print_json(&verdicts)
        }
        Command::Witness { state } => {
            let rho = read_state(&state)?;
            let v = cmc_sdp_2q(&rho, &Default::default())?;
            let report = v.sdp_report().expect("two-qubit verdict carries its report");
            print_json(&json!({
                "detected": v.detected,
                "margin": v.margin,
                "status": v.status,
                "lambda": report.lambda,
                "witness": report.witness,
                "lur": report.lur,
                "solver": report.solution,
            }))?;
            if v.status == VerdictStatus::Undetermined {
                return Err(Error::Numerical(format!("solver stopped with status {:?}", report.solution.status)).into());
            }
            Ok(())
        }
        Command::NormalForm { state, max_iter, tol } => {
            let rho = read_state(&state)?;
            let opts = FilterOptions { max_iter, tol, ..FilterOptions::default() };
            print_json(&normal_form(&rho, &opts)?)
        }
        Command::Gen { family, params, seed, output: path } => {
            let (rho, meta) = generate(family, &params, seed)?;
            let file = StateFile::from_state(&rho, Some(meta));
            let mut out = output(path.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &file)?;
            writeln!(out)?;
            Ok(())
        }
        Command::Threshold { family, criterion, p_lo, p_hi, tol } => {
            let family: ParamFamily = family.parse()?;
            let criterion: Criterion = criterion.parse()?;
            let opts = ThresholdOptions { lo: p_lo, hi: p_hi, tol, ..ThresholdOptions::default() };
            let r = harness::threshold(|p| family.state(p), criterion, &opts, &CriteriaOptions::default())?;
            print_json(&r)
        }
        Command::Benchmark { family, n, seed, criteria: list, csv, mode } => {
            let opts = BenchmarkOptions {
                family: sample_family(&family)?,
                n,
                seed,
                criteria: parse_criteria(&list, Some(sample_family(&family)?.dims()))?,
                mode: mode.into(),
                criteria_options: CriteriaOptions::default(),
            };
            let (report, rows) = harness::benchmark(&opts)?;
            if let Some(p) = csv {
                harness::write_csv(&rows, output(Some(&p))?)?;
            }
            print_json(&report)
        }
        Command::Fig1 { step, s, t, output: path } => {
            let pts = harness::fig1(step, s, t, ExecutionMode::default())?;
            harness::write_fig1_csv(&pts, output(path.as_deref())?)?;
            Ok(())
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("CMCSEP_THREADS") {
        let n: usize = v.parse().with_context(|| format!("CMCSEP_THREADS={v} is not a number"))?;
        if n == 0 {
            bail!("CMCSEP_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if !e.is_input_error() => 1,
        _ => 2,
    }
}

// `cmcsep ... | head` closes stdout early; that is not an error.
fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        let io = c.downcast_ref::<io::Error>().or_else(|| match c.downcast_ref::<Error>() {
            Some(Error::Io(e)) => Some(e),
            _ => None,
        });
        io.is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<serde_json::Error>().is_some_and(|e| e.io_error_kind() == Some(io::ErrorKind::BrokenPipe))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
