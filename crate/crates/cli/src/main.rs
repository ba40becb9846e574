use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fsparse_core::exact::{distance_from_ranked, exact_hashing_error, exact_spectrum, exact_top_s_energy};
use fsparse_core::experiments::{self, ExperimentTable};
use fsparse_core::instances::{gen_dno, gen_dyes, gen_flat, gen_noisy_sparse, gen_sparse, CoeffLaw, InstanceMeta};
use fsparse_core::oracle::squared_norm_exact;
use fsparse_core::{
    estimate_distance, estimate_squared_norm, ffst_test, CosetHash, EstimatorParams, FunctionOracle, QueryLedger,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

mod record;

use record::RunRecord;

#[derive(Parser)]
#[command(name = "fsparse", version, about = "Fourier sparsity estimation and testing on the Boolean cube")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a function file.
    Gen(GenArgs),
    /// Estimate the squared distance to s-sparsity.
    Estimate(QueryArgs),
    /// Run the sparsity tester.
    Test(QueryArgs),
    /// Exact distance, top-s energy and optional hashing error (small n).
    Exact(ExactArgs),
    /// Run a seeded sweep and write CSV.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Sparse,
    Noisy,
    Flat,
    Dyes,
    Dno,
}

#[derive(Args)]
struct GenArgs {
    kind: GenKind,
    #[arg(long)]
    n: u32,
    /// Sparsity (support size for sparse, noisy and dyes).
    #[arg(long, default_value_t = 1)]
    s: u64,
    /// Noise energy for `noisy`.
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Metadata path; defaults to `<output>.meta.json`.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long)]
    s: u64,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiplier in gamma = ceil(mult * s / eps^4).
    #[arg(long)]
    gamma_mult: Option<f64>,
    /// Repetitions per top-s run (odd).
    #[arg(long)]
    ell: Option<u32>,
    /// Amplification runs (odd).
    #[arg(long)]
    reps: Option<u32>,
    /// Hash codimension.
    #[arg(long)]
    d_override: Option<u32>,
}

impl EstimatorArgs {
    fn params(&self) -> EstimatorParams {
        let mut p = EstimatorParams::new(self.s, self.eps, self.delta);
        if let Some(m) = self.gamma_mult {
            p.c_gamma = m;
        }
        p.ell_override = self.ell;
        p.reps_override = self.reps;
        p.d_override = self.d_override;
        p
    }
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    est: EstimatorArgs,
    /// Known squared norm. Defaults to 1 for `estimate`; required by `test`
    /// unless `--measure-norm` is given.
    #[arg(long)]
    norm: Option<f64>,
    /// Estimate the squared norm from extra charged queries.
    #[arg(long, conflicts_with = "norm")]
    measure_norm: bool,
    /// Samples used by `--measure-norm`.
    #[arg(long, default_value_t = 10_000)]
    norm_samples: usize,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    s: u64,
    /// Codimension of a random hash whose exact hashing error is reported.
    #[arg(long)]
    hash_d: Option<u32>,
    #[arg(long, default_value_t = 0)]
    hash_seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    HashingError,
    Mse,
    QueryScaling,
    LowerBound,
    OracleEquivalence,
    TesterPower,
}

#[derive(Args)]
struct ExperimentArgs {
    name: ExperimentName,
    #[arg(long, default_value_t = 10)]
    n: u32,
    /// Sparsity; a comma-separated list for `query-scaling`.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    s: Vec<u64>,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    jobs: Option<usize>,
    /// Query count for `lower-bound`.
    #[arg(long, default_value_t = 8)]
    q: u64,
    /// Sparsity against which NO draws are measured in `lower-bound`;
    /// defaults to 2^n / 8.
    #[arg(long)]
    s_far: Option<u64>,
    /// CSV path; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Estimate(a) => cmd_query(a, false),
        Command::Test(a) => cmd_query(a, true),
        Command::Exact(a) => cmd_exact(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load(path: &Path) -> Result<FunctionOracle> {
    FunctionOracle::load(path).with_context(|| format!("loading {}", path.display()))
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (oracle, mut meta) = match a.kind {
        GenKind::Sparse => {
            let inst = gen_sparse(a.n, a.s, &mut rng, CoeffLaw::default())?;
            (inst.oracle, inst.meta)
        }
        GenKind::Noisy => {
            let inst = gen_noisy_sparse(a.n, a.s, a.rho, &mut rng)?;
            (inst.oracle, inst.meta)
        }
        GenKind::Flat => {
            let inst = gen_flat(a.n, a.s, &mut rng)?;
            (inst.oracle, inst.meta)
        }
        GenKind::Dyes => {
            let inst = gen_dyes(a.n, a.s, &mut rng)?;
            let meta = gaussian_meta("dyes", a.n, a.s, &inst.oracle, Some(0.0));
            (inst.oracle, meta)
        }
        GenKind::Dno => {
            let inst = gen_dno(a.n, &mut rng)?;
            let distance = distance_from_ranked(&exact_spectrum(&inst.oracle.to_table()?)?, a.s);
            let meta = gaussian_meta("dno", a.n, a.s, &inst.oracle, Some(distance));
            (inst.oracle, meta)
        }
    };
    meta.seed = Some(a.seed);
    write_output(a.output.as_deref(), &(oracle.to_json()? + "\n"))?;
    let meta_path = a.meta.or_else(|| a.output.as_ref().map(|p| sidecar_path(p)));
    if let Some(p) = meta_path {
        write_output(Some(&p), &to_json(&meta)?)?;
    }
    Ok(())
}

fn gaussian_meta(kind: &str, n: u32, s: u64, oracle: &FunctionOracle, distance: Option<f64>) -> InstanceMeta {
    InstanceMeta {
        kind: kind.into(),
        n,
        s,
        seed: None,
        noise_mass: None,
        exact_distance: distance,
        squared_norm: squared_norm_exact(oracle),
    }
}

fn sidecar_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn cmd_query(a: QueryArgs, test: bool) -> Result<()> {
    let oracle = load(&a.input)?;
    let ledger = QueryLedger::new();
    let start = Instant::now();
    let norm = if a.measure_norm {
        let mut rng = ChaCha8Rng::seed_from_u64(a.est.seed ^ 0x6e6f_726d);
        estimate_squared_norm(&oracle, &ledger, a.norm_samples, &mut rng)?
    } else {
        match (a.norm, test) {
            (Some(v), _) => v,
            (None, false) => 1.0,
            (None, true) => bail!("`test` needs --norm or --measure-norm"),
        }
    };
    let params = a.est.params().with_known_norm(norm);
    let mut rec = RunRecord::new(if test { "test" } else { "estimate" }, oracle.n(), &params, a.est.seed);
    if test {
        let v = ffst_test(&oracle, &ledger, &params, a.est.seed)?;
        rec.set_resolved(&v.params);
        rec.xi = Some(v.xi);
        rec.threshold = Some(v.threshold);
        rec.verdict = Some(if v.accept { "accept" } else { "reject" }.into());
    } else {
        let est = estimate_distance(&oracle, &ledger, &params, a.est.seed)?;
        rec.set_resolved(&est.energy.params);
        rec.xi = Some(est.energy.xi);
        rec.distance = Some(est.distance);
    }
    rec.known_norm = norm;
    rec.queries_used = ledger.count();
    rec.wall_time_secs = start.elapsed().as_secs_f64();
    write_output(None, &to_json(&rec)?)
}

#[derive(Serialize)]
struct ExactRecord {
    command: &'static str,
    n: u32,
    s: u64,
    squared_norm: f64,
    top_s_energy: f64,
    distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hash_d: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hash_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hashing_error: Option<f64>,
}

fn cmd_exact(a: ExactArgs) -> Result<()> {
    let oracle = load(&a.input)?;
    let ranked = exact_spectrum(&oracle.to_table()?)?;
    let hashing_error = match a.hash_d {
        Some(d) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.hash_seed);
            let hash = CosetHash::sample(d, oracle.n(), &mut rng)?;
            Some(exact_hashing_error(&ranked, &hash, a.s)?)
        }
        None => None,
    };
    let rec = ExactRecord {
        command: "exact",
        n: oracle.n(),
        s: a.s,
        squared_norm: ranked.total_energy(),
        top_s_energy: exact_top_s_energy(&ranked, a.s),
        distance: distance_from_ranked(&ranked, a.s),
        hash_d: a.hash_d,
        hash_seed: a.hash_d.map(|_| a.hash_seed),
        hashing_error,
    };
    write_output(None, &to_json(&rec)?)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    if a.trials == 0 {
        bail!("--trials must be at least 1");
    }
    if a.s.is_empty() {
        bail!("--s needs at least one value");
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build()?;
    let s = a.s[0];
    let table = pool.install(|| -> Result<ExperimentTable> {
        Ok(match a.name {
            ExperimentName::HashingError => experiments::hashing_error_sweep(a.n, s, a.eps, a.trials, a.seed)?.table,
            ExperimentName::Mse => experiments::mse_sweep(a.n, s, a.eps, a.trials, a.seed)?.table,
            ExperimentName::QueryScaling => experiments::query_scaling(a.n, &a.s, a.eps, a.delta, a.seed)?.table,
            ExperimentName::LowerBound => {
                let s_far = a.s_far.unwrap_or((1u64 << a.n.min(62)) / 8);
                experiments::lower_bound_sweep(a.n, s, s_far, a.q, a.trials, a.seed)?.table
            }
            ExperimentName::OracleEquivalence => {
                experiments::oracle_equivalence(a.n, s, a.eps, a.delta, a.trials, a.seed)?.table
            }
            ExperimentName::TesterPower => experiments::tester_power(a.n, s, a.eps, a.delta, a.trials, a.seed)?.table,
        })
    })?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.write_record(&table.summary)?;
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    write_output(a.output.as_deref(), &String::from_utf8(bytes)?)
}
