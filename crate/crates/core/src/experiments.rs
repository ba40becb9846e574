//! Seeded statistical sweeps. Each returns typed results plus a flat table
//! (header, one row per trial, summary row) for CSV export.
//!
//! Trials run on per-trial ChaCha substreams derived from the master seed and
//! are collected in trial order, so output does not depend on thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cube::CubePoint;
use crate::error::{invalid, Result};
use crate::estimator::{derive_params, estimate_distance, ffst_test, single_repetition_estimates, EstimatorParams};
use crate::exact::{distance_from_ranked, exact_hashing_error, exact_spectrum};
use crate::hashing::{exact_bucket_energies, CosetHash};
use crate::instances::{
    frobenius_deviation, gen_dno, gen_dyes, gen_flat, gen_random_dense, gen_sparse, norm_threshold_rule,
    sample_query_set, CoeffLaw,
};
use crate::oracle::{squared_norm_exact, QueryLedger};

/// Header, per-trial rows and a final summary row, all as plain strings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Vec<String>,
}

impl ExperimentTable {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new(), summary: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn set_summary(&mut self, mut row: Vec<String>) {
        row.resize(self.header.len(), String::new());
        self.summary = row;
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn int(v: impl Into<u64>) -> String {
    v.into().to_string()
}

fn flag(b: bool) -> String {
    (b as u8).to_string()
}

fn trial_seeds(seed: u64, trials: usize) -> Result<Vec<u64>> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..trials).map(|_| master.next_u64()).collect())
}

fn fraction(flags: impl Iterator<Item = bool>, total: usize) -> f64 {
    flags.filter(|b| *b).count() as f64 / total as f64
}

fn mean(values: impl Iterator<Item = f64>, total: usize) -> f64 {
    values.sum::<f64>() / total as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HashingErrorSweep {
    pub d: u32,
    pub bound: f64,
    pub errors: Vec<f64>,
    pub fraction_within: f64,
    pub table: ExperimentTable,
}

/// Exact hashing error of many random codimension-`d` hashes on one flat-spectrum
/// unit function, with `d` derived from `(s, eps)` and compared to `5 eps^2`.
pub fn hashing_error_sweep(n: u32, s: u64, eps: f64, trials: usize, seed: u64) -> Result<HashingErrorSweep> {
    let seeds = trial_seeds(seed, trials)?;
    let d = derive_params(&EstimatorParams::new(s, eps, 0.5), n)?.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f1a7);
    let instance = gen_flat(n, s, &mut rng)?;
    let ranked = exact_spectrum(&instance.oracle.to_table()?)?;
    let norm = ranked.total_energy();
    let bound = 5.0 * eps * eps * norm;

    let errors: Vec<f64> = seeds
        .par_iter()
        .map(|&ts| {
            let mut trng = ChaCha8Rng::seed_from_u64(ts);
            let hash = CosetHash::sample(d, n, &mut trng)?;
            exact_hashing_error(&ranked, &hash, s)
        })
        .collect::<Result<_>>()?;

    let fraction_within = fraction(errors.iter().map(|e| *e <= bound), trials);
    let mut table = ExperimentTable::new(&["trial", "d", "hashing_error", "bound", "within_bound"]);
    for (i, e) in errors.iter().enumerate() {
        table.push(vec![int(i as u64), int(d), num(*e), num(bound), flag(*e <= bound)]);
    }
    table.set_summary(vec![
        "summary".into(),
        int(d),
        num(mean(errors.iter().copied(), trials)),
        num(bound),
        num(fraction_within),
    ]);
    Ok(HashingErrorSweep { d, bound, errors, fraction_within, table })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MseSweep {
    pub d: u32,
    pub gamma: u64,
    /// `eps^4 ||f||^2 / s`.
    pub bound: f64,
    /// Empirical `E|y_t - y_t exact|^2` per bucket.
    pub per_bucket_mse: Vec<f64>,
    pub max_mse: f64,
    pub mean_mse: f64,
    pub table: ExperimentTable,
}

/// Repeated single-repetition bucket estimates on one fixed hash and random
/// unit-norm function, against the exact bucket energies.
pub fn mse_sweep(n: u32, s: u64, eps: f64, repetitions: usize, seed: u64) -> Result<MseSweep> {
    let seeds = trial_seeds(seed, repetitions)?;
    let params = derive_params(&EstimatorParams::new(s, eps, 0.5), n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0bad_cafe);
    let oracle = gen_random_dense(n, &mut rng)?;
    let hash = CosetHash::sample(params.d, n, &mut rng)?;
    let coeffs = crate::cube::wht_forward(&oracle.to_table()?);
    let mut exact = vec![0.0; hash.bucket_count()];
    for (b, e) in exact_bucket_energies(&coeffs, &hash)? {
        exact[b.0 as usize] = e;
    }
    let norm = squared_norm_exact(&oracle);
    let ledger = QueryLedger::new();

    let sq_errors: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&rs| {
            let y = single_repetition_estimates(&oracle, &ledger, &hash, params.gamma, rs)?;
            Ok(y.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).collect())
        })
        .collect::<Result<_>>()?;

    let buckets = exact.len();
    let per_bucket_mse: Vec<f64> = (0..buckets).map(|t| mean(sq_errors.iter().map(|r| r[t]), repetitions)).collect();
    let max_mse = per_bucket_mse.iter().copied().fold(0.0, f64::max);
    let mean_mse = mean(per_bucket_mse.iter().copied(), buckets);
    let bound = eps.powi(4) / s as f64 * norm;

    let mut table = ExperimentTable::new(&["trial", "d", "gamma", "mean_sq_error", "max_sq_error", "bound"]);
    for (i, r) in sq_errors.iter().enumerate() {
        table.push(vec![
            int(i as u64),
            int(params.d),
            int(params.gamma),
            num(mean(r.iter().copied(), buckets)),
            num(r.iter().copied().fold(0.0, f64::max)),
            num(bound),
        ]);
    }
    table.set_summary(vec![
        "summary".into(),
        int(params.d),
        int(params.gamma),
        num(mean_mse),
        num(max_mse),
        num(bound),
    ]);
    Ok(MseSweep { d: params.d, gamma: params.gamma, bound, per_bucket_mse, max_mse, mean_mse, table })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryScalingRow {
    pub s: u64,
    pub d: u32,
    pub gamma: u64,
    pub ell: u32,
    pub reps: u32,
    pub budget: u64,
    pub measured: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryScaling {
    pub rows: Vec<QueryScalingRow>,
    pub table: ExperimentTable,
}

/// Full distance estimates on a flat function for each `s`, recording the
/// derived budget `2 gamma ell reps` and the ledger count.
pub fn query_scaling(n: u32, s_values: &[u64], eps: f64, delta: f64, seed: u64) -> Result<QueryScaling> {
    if s_values.is_empty() {
        return Err(invalid("at least one sparsity value is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let oracle = gen_flat(n, 1, &mut rng)?.oracle;
    let mut rows = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let params = EstimatorParams::new(s, eps, delta);
        let ledger = QueryLedger::new();
        let est = estimate_distance(&oracle, &ledger, &params, seed)?;
        let r = est.energy.params;
        rows.push(QueryScalingRow {
            s,
            d: r.d,
            gamma: r.gamma,
            ell: r.ell,
            reps: r.reps,
            budget: r.query_budget(),
            measured: ledger.count(),
        });
    }
    let mut table = ExperimentTable::new(&["trial", "s", "d", "gamma", "ell", "reps", "query_budget", "queries_used"]);
    for (i, r) in rows.iter().enumerate() {
        table.push(vec![
            int(i as u64),
            int(r.s),
            int(r.d),
            int(r.gamma),
            int(r.ell),
            int(r.reps),
            int(r.budget),
            int(r.measured),
        ]);
    }
    let exact = rows.iter().all(|r| r.budget == r.measured);
    table.set_summary(vec![
        "summary".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        flag(exact),
    ]);
    Ok(QueryScaling { rows, table })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundTrial {
    pub yes_squared_norm: f64,
    pub no_squared_norm: f64,
    pub yes_distance: f64,
    pub no_distance: f64,
    pub frobenius: f64,
    pub yes_accept: bool,
    pub no_accept: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundSweep {
    pub trials: Vec<LowerBoundTrial>,
    pub mean_yes_norm: f64,
    pub mean_no_norm: f64,
    pub max_yes_distance: f64,
    /// Fraction of NO draws at distance at least 1/3 from `s_far`-sparsity.
    pub no_far_fraction: f64,
    pub mean_frobenius: f64,
    /// `q^2 / s`.
    pub frobenius_bound: f64,
    pub advantage: f64,
    pub table: ExperimentTable,
}

/// Per trial: one YES draw with support size `s` and one NO draw; squared norms,
/// exact distances (YES to `s`-sparsity, NO to `s_far`-sparsity), the squared
/// Frobenius deviation of the YES covariance on a fresh `q`-point query set, and
/// the verdicts of a norm-threshold rule on one fixed `q`-point query set.
pub fn lower_bound_sweep(n: u32, s: u64, s_far: u64, q: u64, trials: usize, seed: u64) -> Result<LowerBoundSweep> {
    let seeds = trial_seeds(seed, trials)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10_b0_0d);
    let fixed: Vec<CubePoint> = sample_query_set(n, q, &mut rng)?;
    let rule = norm_threshold_rule(1.0);
    let ledger = QueryLedger::new();

    let rows: Vec<LowerBoundTrial> = seeds
        .par_iter()
        .map(|&ts| -> Result<LowerBoundTrial> {
            let mut trng = ChaCha8Rng::seed_from_u64(ts);
            let yes = gen_dyes(n, s, &mut trng)?;
            let no = gen_dno(n, &mut trng)?;
            let fresh = sample_query_set(n, q, &mut trng)?;
            let support = yes.support.as_deref().unwrap_or_default();
            let yes_table = yes.oracle.to_table()?;
            let no_table = no.oracle.to_table()?;
            Ok(LowerBoundTrial {
                yes_squared_norm: squared_norm_exact(&yes.oracle),
                no_squared_norm: squared_norm_exact(&no.oracle),
                yes_distance: distance_from_ranked(&exact_spectrum(&yes_table)?, s),
                no_distance: distance_from_ranked(&exact_spectrum(&no_table)?, s_far),
                frobenius: frobenius_deviation(support, &fresh)?,
                yes_accept: rule(&fixed, &yes.oracle.evaluate_batch(&ledger, &fixed)?),
                no_accept: rule(&fixed, &no.oracle.evaluate_batch(&ledger, &fixed)?),
            })
        })
        .collect::<Result<_>>()?;

    let mean_yes_norm = mean(rows.iter().map(|r| r.yes_squared_norm), trials);
    let mean_no_norm = mean(rows.iter().map(|r| r.no_squared_norm), trials);
    let max_yes_distance = rows.iter().map(|r| r.yes_distance).fold(0.0, f64::max);
    let no_far_fraction = fraction(rows.iter().map(|r| r.no_distance >= 1.0 / 3.0), trials);
    let mean_frobenius = mean(rows.iter().map(|r| r.frobenius), trials);
    let frobenius_bound = (q * q) as f64 / s as f64;
    let advantage = (fraction(rows.iter().map(|r| r.yes_accept), trials)
        - fraction(rows.iter().map(|r| r.no_accept), trials))
    .abs();

    let mut table = ExperimentTable::new(&[
        "trial",
        "yes_squared_norm",
        "no_squared_norm",
        "yes_distance",
        "no_distance",
        "frobenius",
        "yes_accept",
        "no_accept",
    ]);
    for (i, r) in rows.iter().enumerate() {
        table.push(vec![
            int(i as u64),
            num(r.yes_squared_norm),
            num(r.no_squared_norm),
            num(r.yes_distance),
            num(r.no_distance),
            num(r.frobenius),
            flag(r.yes_accept),
            flag(r.no_accept),
        ]);
    }
    table.set_summary(vec![
        "summary".into(),
        num(mean_yes_norm),
        num(mean_no_norm),
        num(max_yes_distance),
        num(no_far_fraction),
        num(mean_frobenius),
        num(advantage),
        num(frobenius_bound),
    ]);
    Ok(LowerBoundSweep {
        trials: rows,
        mean_yes_norm,
        mean_no_norm,
        max_yes_distance,
        no_far_fraction,
        mean_frobenius,
        frobenius_bound,
        advantage,
        table,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceSweep {
    pub exact: Vec<f64>,
    pub estimates: Vec<f64>,
    pub fraction_within: f64,
    pub table: ExperimentTable,
}

/// Estimated vs exact distance to s-sparsity on random dense unit-norm
/// functions.
pub fn oracle_equivalence(n: u32, s: u64, eps: f64, delta: f64, trials: usize, seed: u64) -> Result<EquivalenceSweep> {
    let seeds = trial_seeds(seed, trials)?;
    let params = EstimatorParams::new(s, eps, delta);
    let pairs: Vec<(f64, f64)> = seeds
        .par_iter()
        .map(|&ts| {
            let mut trng = ChaCha8Rng::seed_from_u64(ts);
            let oracle = gen_random_dense(n, &mut trng)?;
            let exact = distance_from_ranked(&exact_spectrum(&oracle.to_table()?)?, s);
            let est = estimate_distance(&oracle, &QueryLedger::new(), &params, trng.next_u64())?;
            Ok((exact, est.distance))
        })
        .collect::<Result<_>>()?;
    let fraction_within = fraction(pairs.iter().map(|(a, b)| (a - b).abs() <= eps), trials);
    let mut table = ExperimentTable::new(&["trial", "exact_distance", "estimated_distance", "abs_error", "within_eps"]);
    for (i, (a, b)) in pairs.iter().enumerate() {
        table.push(vec![int(i as u64), num(*a), num(*b), num((a - b).abs()), flag((a - b).abs() <= eps)]);
    }
    table.set_summary(vec![
        "summary".into(),
        num(mean(pairs.iter().map(|p| p.0), trials)),
        num(mean(pairs.iter().map(|p| p.1), trials)),
        num(mean(pairs.iter().map(|p| (p.0 - p.1).abs()), trials)),
        num(fraction_within),
    ]);
    Ok(EquivalenceSweep {
        exact: pairs.iter().map(|p| p.0).collect(),
        estimates: pairs.iter().map(|p| p.1).collect(),
        fraction_within,
        table,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TesterPower {
    pub sparse_accept_rate: f64,
    pub flat_reject_rate: f64,
    pub flat_distance: f64,
    pub table: ExperimentTable,
}

/// Tester verdicts on planted s-sparse instances and on flat-spectrum
/// instances. Both are queried through dense tables.
pub fn tester_power(n: u32, s: u64, eps: f64, delta: f64, trials: usize, seed: u64) -> Result<TesterPower> {
    let seeds = trial_seeds(seed, trials)?;
    let params = EstimatorParams::new(s, eps, delta);
    let rows: Vec<(bool, f64, bool, f64, f64)> = seeds
        .par_iter()
        .map(|&ts| {
            let mut trng = ChaCha8Rng::seed_from_u64(ts);
            let sparse = gen_sparse(n, s, &mut trng, CoeffLaw::default())?.oracle.densified()?;
            let flat = gen_flat(n, s, &mut trng)?;
            let vs = ffst_test(&sparse, &QueryLedger::new(), &params, trng.next_u64())?;
            let vf = ffst_test(&flat.oracle, &QueryLedger::new(), &params, trng.next_u64())?;
            Ok((vs.accept, vs.xi, vf.accept, vf.xi, flat.exact_distance.unwrap_or(f64::NAN)))
        })
        .collect::<Result<_>>()?;
    let sparse_accept_rate = fraction(rows.iter().map(|r| r.0), trials);
    let flat_reject_rate = fraction(rows.iter().map(|r| !r.2), trials);
    let flat_distance = rows.first().map(|r| r.4).unwrap_or(f64::NAN);
    let mut table =
        ExperimentTable::new(&["trial", "sparse_accept", "sparse_xi", "flat_accept", "flat_xi", "flat_distance"]);
    for (i, r) in rows.iter().enumerate() {
        table.push(vec![int(i as u64), flag(r.0), num(r.1), flag(r.2), num(r.3), num(r.4)]);
    }
    table.set_summary(vec![
        "summary".into(),
        num(sparse_accept_rate),
        String::new(),
        num(1.0 - flat_reject_rate),
        String::new(),
        num(flat_distance),
    ]);
    Ok(TesterPower { sparse_accept_rate, flat_reject_rate, flat_distance, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trials_rejected() {
        assert!(hashing_error_sweep(8, 2, 0.5, 0, 1).is_err());
        assert!(mse_sweep(8, 2, 0.5, 0, 1).is_err());
        assert!(lower_bound_sweep(8, 4, 32, 4, 0, 1).is_err());
        assert!(query_scaling(8, &[], 0.5, 0.2, 1).is_err());
    }

    #[test]
    fn tables_have_summary_rows() {
        let sweep = hashing_error_sweep(8, 2, 0.6, 5, 3).unwrap();
        assert_eq!(sweep.table.rows.len(), 5);
        assert_eq!(sweep.table.summary[0], "summary");
        assert_eq!(sweep.table.summary.len(), sweep.table.header.len());
    }

    #[test]
    fn query_scaling_doubles() {
        let out = query_scaling(10, &[2, 4, 8], 0.5, 0.3, 4).unwrap();
        for w in out.rows.windows(2) {
            assert_eq!(w[1].gamma, 2 * w[0].gamma);
            assert_eq!(w[1].measured, 2 * w[0].measured);
        }
        assert!(out.rows.iter().all(|r| r.budget == r.measured));
    }

    #[test]
    fn sweeps_are_seed_deterministic() {
        let a = mse_sweep(8, 2, 0.7, 6, 9).unwrap();
        let b = mse_sweep(8, 2, 0.7, 6, 9).unwrap();
        assert_eq!(a, b);
    }
}
