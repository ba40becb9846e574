//! Top-s Fourier energy estimation by coset hashing, the derived l2-squared
//! distance estimate, and the sparsity tester built on it.
//!
//! One estimation run draws a random codimension-`d` subspace `H`, then for each
//! of `ell` repetitions samples `gamma` pairs `(x, x + z)` with `x` uniform on
//! F_2^n and `z` uniform on the row space of the hash matrix. The products
//! `f(x) f(x + z)` are summed per shift pattern `c`; a Walsh-Hadamard butterfly
//! over the pattern sums then yields every bucket estimate
//! `y_t = (1/gamma) sum (-1)^{c.t} f(x) f(x + z_c)` at once. The per-bucket
//! median across repetitions is taken and the `s` largest medians are summed.
//!
//! The whole query multiset depends only on the seed, `n` and the resolved
//! parameters, never on returned values.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{fwht_in_place, mask, sign};
use crate::error::{invalid, Result};
use crate::hashing::{Bucket, CosetHash, ShiftTable};
use crate::oracle::{FunctionOracle, QueryLedger};

pub const DEFAULT_C_GAMMA: f64 = 4.0;
pub const DEFAULT_C_ELL: f64 = 2.0;

/// Samples evaluated per oracle batch.
const CHUNK: usize = 1 << 14;

/// User-facing estimator parameters. Concrete sizes are obtained with
/// [`derive_params`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub s: u64,
    pub eps: f64,
    pub delta: f64,
    pub c_gamma: f64,
    pub c_ell: f64,
    pub d_override: Option<u32>,
    pub gamma_override: Option<u64>,
    pub ell_override: Option<u32>,
    pub reps_override: Option<u32>,
    /// Squared norm `||f||_2^2` assumed by the distance and the test threshold.
    pub known_norm: f64,
}

impl EstimatorParams {
    pub fn new(s: u64, eps: f64, delta: f64) -> Self {
        Self {
            s,
            eps,
            delta,
            c_gamma: DEFAULT_C_GAMMA,
            c_ell: DEFAULT_C_ELL,
            d_override: None,
            gamma_override: None,
            ell_override: None,
            reps_override: None,
            known_norm: 1.0,
        }
    }

    pub fn with_known_norm(mut self, known_norm: f64) -> Self {
        self.known_norm = known_norm;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(invalid("sparsity s must be at least 1"));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(invalid(format!("eps must lie in (0, 1], got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.c_gamma > 0.0 && self.c_gamma.is_finite()) {
            return Err(invalid("c_gamma must be positive"));
        }
        if !(self.c_ell >= 0.0 && self.c_ell.is_finite()) {
            return Err(invalid("c_ell must be non-negative"));
        }
        if !(self.known_norm > 0.0 && self.known_norm.is_finite()) {
            return Err(invalid(format!("known_norm must be positive, got {}", self.known_norm)));
        }
        Ok(())
    }
}

/// Concrete sizes for one estimation: codimension `d`, samples per repetition
/// `gamma`, repetitions `ell` and amplification runs `reps`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub s: u64,
    pub d: u32,
    pub gamma: u64,
    pub ell: u32,
    pub reps: u32,
}

impl ResolvedParams {
    /// Queries made by one top-s energy run.
    pub fn run_queries(&self) -> u64 {
        2 * self.gamma * self.ell as u64
    }

    /// Queries made by a full amplified estimate: `2 gamma ell reps`.
    pub fn query_budget(&self) -> u64 {
        self.run_queries() * self.reps as u64
    }

    fn validate(&self, n: u32) -> Result<()> {
        if self.s == 0 {
            return Err(invalid("sparsity s must be at least 1"));
        }
        if self.d > n {
            return Err(invalid(format!("codimension d = {} exceeds n = {n}", self.d)));
        }
        if self.gamma == 0 {
            return Err(invalid("gamma must be at least 1"));
        }
        if self.ell == 0 || self.ell.is_multiple_of(2) {
            return Err(invalid(format!("ell must be odd and positive, got {}", self.ell)));
        }
        if self.reps == 0 || self.reps.is_multiple_of(2) {
            return Err(invalid(format!("reps must be odd and positive, got {}", self.reps)));
        }
        Ok(())
    }
}

/// Ceiling that ignores float noise around integers, so that e.g.
/// `4 * 32 / 0.2^4` gives 80000 and not 80001.
fn ceil_tol(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

fn odd_at_least(x: f64) -> u32 {
    let k = ceil_tol(x).max(1.0) as u32;
    if k.is_multiple_of(2) {
        k + 1
    } else {
        k
    }
}

/// Resolve `(d, gamma, ell, reps)` for dimension `n`:
///
/// - `d = min(n, ceil(log2(max(2, 2s/eps^4))))`
/// - `gamma = ceil(c_gamma s / eps^4)`
/// - `ell` = smallest odd integer `>= max(1, c_ell ceil(log2(1/eps)))`
/// - `reps` = smallest odd integer `>= max(1, ceil(2 ln(1/delta)))`
///
/// Explicit overrides replace the derived values and are validated as-is.
pub fn derive_params(params: &EstimatorParams, n: u32) -> Result<ResolvedParams> {
    params.validate()?;
    if n == 0 {
        return Err(invalid("dimension n must be at least 1"));
    }
    let eps4 = params.eps.powi(4);
    let s = params.s as f64;

    let d = match params.d_override {
        Some(d) => d,
        None => {
            let ratio = (2.0 * s / eps4).max(2.0);
            let d = ceil_tol(ratio.log2());
            (d as u32).min(n)
        }
    };
    let gamma = match params.gamma_override {
        Some(g) => g,
        None => {
            let g = ceil_tol(params.c_gamma * s / eps4);
            if g >= u64::MAX as f64 {
                return Err(invalid("gamma overflows a 64-bit count"));
            }
            g as u64
        }
    };
    let ell = match params.ell_override {
        Some(l) => l,
        None => odd_at_least(params.c_ell * ceil_tol((1.0 / params.eps).log2())),
    };
    let reps = match params.reps_override {
        Some(r) => r,
        None => odd_at_least(ceil_tol(2.0 * (1.0 / params.delta).ln())),
    };
    let resolved = ResolvedParams { s: params.s, d, gamma, ell, reps };
    resolved.validate(n)?;
    if resolved.gamma.checked_mul(2 * ell as u64 * reps as u64).is_none() {
        return Err(invalid("query budget overflows a 64-bit count"));
    }
    Ok(resolved)
}

/// Result of one top-s energy run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Sum of the medians of the chosen buckets.
    pub xi: f64,
    /// Median estimate per bucket, indexed by syndrome.
    pub bucket_medians: Vec<f64>,
    /// Up to `s` buckets with the largest medians, ordered by median descending
    /// then syndrome ascending.
    pub chosen_buckets: Vec<Bucket>,
    pub hash: CosetHash,
    pub params: ResolvedParams,
    /// `2 gamma ell` for this run.
    pub queries_used: u64,
    pub seed: u64,
}

/// Draws the sample stream of one repetition in fixed-size chunks.
struct PairSampler<'a> {
    rng: ChaCha8Rng,
    point_mask: u64,
    pattern_mask: u64,
    shifts: &'a ShiftTable,
    remaining: u64,
}

impl<'a> PairSampler<'a> {
    fn new(seed: u64, n: u32, d: u32, gamma: u64, shifts: &'a ShiftTable) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            point_mask: mask(n),
            pattern_mask: mask(d),
            shifts,
            remaining: gamma,
        }
    }

    /// Fills `points` with interleaved `(x, x + z_c)` and `patterns` with `c`.
    /// Returns false once the repetition is exhausted.
    fn next_chunk(&mut self, points: &mut Vec<u64>, patterns: &mut Vec<u64>) -> bool {
        points.clear();
        patterns.clear();
        if self.remaining == 0 {
            return false;
        }
        let take = self.remaining.min(CHUNK as u64) as usize;
        self.remaining -= take as u64;
        for _ in 0..take {
            let x = self.rng.next_u64() & self.point_mask;
            let c = self.rng.next_u64() & self.pattern_mask;
            points.push(x);
            points.push(x ^ self.shifts.get(c));
            patterns.push(c);
        }
        true
    }
}

/// Bucket estimates `y_t` of one repetition on a fixed hash, through the
/// per-pattern sums and a single butterfly.
pub fn single_repetition_estimates(
    oracle: &FunctionOracle,
    ledger: &QueryLedger,
    hash: &CosetHash,
    gamma: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if gamma == 0 {
        return Err(invalid("gamma must be at least 1"));
    }
    crate::cube::check_dims(hash.n(), oracle.n())?;
    let shifts = hash.shift_table();
    let mut sampler = PairSampler::new(seed, oracle.n(), hash.d(), gamma, &shifts);
    let mut sums = vec![0.0; hash.bucket_count()];
    let (mut points, mut patterns, mut values) = (Vec::new(), Vec::new(), Vec::new());
    while sampler.next_chunk(&mut points, &mut patterns) {
        values.clear();
        oracle.evaluate_raw_into(ledger, &points, &mut values);
        for (c, pair) in patterns.iter().zip(values.chunks_exact(2)) {
            sums[*c as usize] += pair[0] * pair[1];
        }
    }
    fwht_in_place(&mut sums);
    let scale = 1.0 / gamma as f64;
    sums.iter_mut().for_each(|v| *v *= scale);
    Ok(sums)
}

/// Same estimates as [`single_repetition_estimates`], updating every bucket on
/// every sample. `O(gamma 2^d)`.
pub fn single_repetition_estimates_naive(
    oracle: &FunctionOracle,
    ledger: &QueryLedger,
    hash: &CosetHash,
    gamma: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if gamma == 0 {
        return Err(invalid("gamma must be at least 1"));
    }
    crate::cube::check_dims(hash.n(), oracle.n())?;
    let shifts = hash.shift_table();
    let mut sampler = PairSampler::new(seed, oracle.n(), hash.d(), gamma, &shifts);
    let mut y = vec![0.0; hash.bucket_count()];
    let weight = 1.0 / gamma as f64;
    let (mut points, mut patterns, mut values) = (Vec::new(), Vec::new(), Vec::new());
    while sampler.next_chunk(&mut points, &mut patterns) {
        values.clear();
        oracle.evaluate_raw_into(ledger, &points, &mut values);
        for (c, pair) in patterns.iter().zip(values.chunks_exact(2)) {
            let term = weight * pair[0] * pair[1];
            for (t, yt) in y.iter_mut().enumerate() {
                *yt += sign(*c, t as u64) * term;
            }
        }
    }
    Ok(y)
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    values[(values.len() - 1) / 2]
}

type RepetitionFn = fn(&FunctionOracle, &QueryLedger, &CosetHash, u64, u64) -> Result<Vec<f64>>;

fn top_s_energy_with(
    oracle: &FunctionOracle,
    ledger: &QueryLedger,
    params: &ResolvedParams,
    seed: u64,
    repetition: RepetitionFn,
) -> Result<EnergyReport> {
    let n = oracle.n();
    params.validate(n)?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let hash = CosetHash::sample(params.d, n, &mut master)?;
    let rep_seeds: Vec<u64> = (0..params.ell).map(|_| master.next_u64()).collect();

    let estimates: Vec<Vec<f64>> =
        rep_seeds.par_iter().map(|&rs| repetition(oracle, ledger, &hash, params.gamma, rs)).collect::<Result<_>>()?;

    let buckets = hash.bucket_count();
    let mut column = vec![0.0; estimates.len()];
    let bucket_medians: Vec<f64> = (0..buckets)
        .map(|t| {
            for (slot, rep) in column.iter_mut().zip(&estimates) {
                *slot = rep[t];
            }
            median(&mut column)
        })
        .collect();

    let chosen_buckets = top_buckets(&bucket_medians, params.s);
    let xi = chosen_buckets.iter().map(|b| bucket_medians[b.0 as usize]).sum();
    Ok(EnergyReport {
        xi,
        bucket_medians,
        chosen_buckets,
        hash,
        params: *params,
        queries_used: params.run_queries(),
        seed,
    })
}

/// The `s` buckets with the largest medians (all of them when `2^d < s`),
/// ordered by median descending then syndrome ascending.
fn top_buckets(medians: &[f64], s: u64) -> Vec<Bucket> {
    let order = |a: &usize, b: &usize| medians[*b].total_cmp(&medians[*a]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..medians.len()).collect();
    let take = usize::try_from(s).unwrap_or(usize::MAX).min(idx.len());
    if take < idx.len() && take > 0 {
        idx.select_nth_unstable_by(take - 1, order);
        idx.truncate(take);
    }
    idx.sort_by(order);
    idx.truncate(take);
    idx.into_iter().map(|t| Bucket(t as u64)).collect()
}

/// One run of top-s energy estimation with fresh hash and samples derived from
/// `seed`. Uses the pattern-sum butterfly.
pub fn estimate_top_s_energy(
    oracle: &FunctionOracle,
    ledger: &QueryLedger,
    params: &ResolvedParams,
    seed: u64,
) -> Result<EnergyReport> {
    top_s_energy_with(oracle, ledger, params, seed, single_repetition_estimates)
}

/// Reference version of [`estimate_top_s_energy`] that updates every bucket per
/// sample. Same sample stream for the same seed.
pub fn estimate_top_s_energy_naive(
    oracle: &FunctionOracle,
    ledger: &QueryLedger,
    params: &ResolvedParams,
    seed: u64,
) -> Result<EnergyReport> {
    top_s_energy_with(oracle, ledger, params, seed, single_repetition_estimates_naive)
}

/// Outcome of the median-amplified energy estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplifiedEnergy {
    /// Median of the per-run energy estimates.
    pub xi: f64,
    pub run_xis: Vec<f64>,
    pub params: ResolvedParams,
    pub queries_used: u64,
    /// True when `2^n <= s` and no queries were made.
    pub short_circuited: bool,
}

fn whole_space_fits(n: u32, s: u64) -> bool {
    n < 64 && (1u64 << n) <= s
}

/// `reps` independent top-s runs, each with its own hash and substream, and
/// the median of their estimates. Runs may execute concurrently; the result is
/// independent of scheduling.
pub fn amplified_top_s_energy(
    oracle: &FunctionOracle,
    ledger: &QueryLedger,
    params: &EstimatorParams,
    seed: u64,
) -> Result<AmplifiedEnergy> {
    let n = oracle.n();
    let resolved = derive_params(params, n)?;
    if whole_space_fits(n, params.s) {
        return Ok(AmplifiedEnergy {
            xi: params.known_norm,
            run_xis: Vec::new(),
            params: resolved,
            queries_used: 0,
            short_circuited: true,
        });
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let run_seeds: Vec<u64> = (0..resolved.reps).map(|_| master.next_u64()).collect();
    let run_xis: Vec<f64> = run_seeds
        .par_iter()
        .map(|&rs| estimate_top_s_energy(oracle, ledger, &resolved, rs).map(|r| r.xi))
        .collect::<Result<_>>()?;
    let xi = median(&mut run_xis.clone());
    Ok(AmplifiedEnergy { xi, run_xis, params: resolved, queries_used: resolved.query_budget(), short_circuited: false })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// `clamp(known_norm - xi, 0, known_norm)`.
    pub distance: f64,
    pub energy: AmplifiedEnergy,
    pub known_norm: f64,
    pub seed: u64,
}

/// Estimate of the squared l2 distance from `f` to the nearest s-sparse
/// function.
pub fn estimate_distance(
    oracle: &FunctionOracle,
    ledger: &QueryLedger,
    params: &EstimatorParams,
    seed: u64,
) -> Result<DistanceEstimate> {
    let energy = amplified_top_s_energy(oracle, ledger, params, seed)?;
    let distance =
        if energy.short_circuited { 0.0 } else { (params.known_norm - energy.xi).clamp(0.0, params.known_norm) };
    Ok(DistanceEstimate { distance, energy, known_norm: params.known_norm, seed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub accept: bool,
    pub xi: f64,
    pub threshold: f64,
    pub params: ResolvedParams,
    pub queries_used: u64,
}

/// Sparsity test: estimate the top-s energy at accuracy `eps/2` and accept iff
/// it exceeds `(1 - eps/2) ||f||_2^2`.
pub fn ffst_test(
    oracle: &FunctionOracle,
    ledger: &QueryLedger,
    params: &EstimatorParams,
    seed: u64,
) -> Result<TestVerdict> {
    params.validate()?;
    let half = EstimatorParams { eps: params.eps / 2.0, ..params.clone() };
    let energy = amplified_top_s_energy(oracle, ledger, &half, seed)?;
    let threshold = (1.0 - params.eps / 2.0) * params.known_norm;
    Ok(TestVerdict {
        accept: energy.short_circuited || energy.xi > threshold,
        xi: energy.xi,
        threshold,
        params: energy.params,
        queries_used: energy.queries_used,
    })
}
