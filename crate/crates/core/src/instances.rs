//! Instance generators: planted sparse, noisy sparse and flat spectra, plus the
//! Gaussian YES/NO distributions used to probe the non-adaptive lower bound.

use std::collections::HashSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{check_dims, mask, sign, wht_inverse, CubePoint, SpectralTable, MAX_ALGEBRAIC_DIM};
use crate::error::{invalid, Error, Result};
use crate::exact::{distance_from_ranked, exact_spectrum, MAX_EXACT_DIM};
use crate::oracle::{squared_norm_exact, Coefficient, FunctionOracle, SparseSpectrum};

/// Law for the magnitudes of planted coefficients. Signs are uniform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CoeffLaw {
    UniformMagnitude { lo: f64, hi: f64 },
    Gaussian,
    Unit,
}

impl Default for CoeffLaw {
    fn default() -> Self {
        CoeffLaw::UniformMagnitude { lo: 0.5, hi: 1.5 }
    }
}

impl CoeffLaw {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let v = match *self {
                CoeffLaw::UniformMagnitude { lo, hi } => {
                    let m = rng.random_range(lo..=hi);
                    if rng.random::<bool>() {
                        m
                    } else {
                        -m
                    }
                }
                CoeffLaw::Gaussian => rng.sample::<f64, _>(StandardNormal),
                CoeffLaw::Unit => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            if v != 0.0 {
                return v;
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let CoeffLaw::UniformMagnitude { lo, hi } = *self {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(invalid(format!("magnitude range [{lo}, {hi}] must be positive")));
            }
        }
        Ok(())
    }
}

/// Provenance of a generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub kind: String,
    pub n: u32,
    pub s: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_mass: Option<f64>,
    /// Squared l2 distance to s-sparsity, when known.
    pub exact_distance: Option<f64>,
    pub squared_norm: f64,
}

/// A test function with a known spectrum and distance to sparsity.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedInstance {
    pub oracle: FunctionOracle,
    /// Nonzero coefficients of the function.
    pub spectrum: SparseSpectrum,
    pub exact_distance: Option<f64>,
    pub meta: InstanceMeta,
}

fn check_sparsity(n: u32, s: u64) -> Result<()> {
    if n == 0 || n > MAX_ALGEBRAIC_DIM {
        return Err(invalid(format!("dimension n = {n} out of range")));
    }
    if s == 0 || (n < 64 && s > 1u64 << n) {
        return Err(invalid(format!("sparsity s = {s} must lie in [1, 2^{n}]")));
    }
    Ok(())
}

/// `s` distinct uniform frequencies of F_2^n, in draw order. Rejection
/// sampling while the support is at most half the space, Floyd's method
/// otherwise.
pub fn sample_support<R: Rng + ?Sized>(n: u32, s: u64, rng: &mut R) -> Result<Vec<u64>> {
    check_sparsity(n, s)?;
    let space = 1u64 << n;
    if s <= space / 2 || n > 40 {
        let mut seen = HashSet::with_capacity(s as usize);
        let mut out = Vec::with_capacity(s as usize);
        while out.len() < s as usize {
            let a = rng.random::<u64>() & mask(n);
            if seen.insert(a) {
                out.push(a);
            }
        }
        Ok(out)
    } else {
        Ok(index::sample(rng, space as usize, s as usize).into_iter().map(|i| i as u64).collect())
    }
}

/// Unit-norm function with exactly `s` nonzero coefficients on uniform distinct
/// frequencies. Sparse backing.
pub fn gen_sparse<R: Rng + ?Sized>(n: u32, s: u64, rng: &mut R, law: CoeffLaw) -> Result<PlantedInstance> {
    law.validate()?;
    let support = sample_support(n, s, rng)?;
    let entries = support.into_iter().map(|alpha| Coefficient { alpha, value: law.draw(rng) }).collect();
    let spectrum = SparseSpectrum::new(n, entries)?.normalized()?;
    Ok(PlantedInstance {
        oracle: FunctionOracle::sparse(spectrum.clone()),
        meta: InstanceMeta {
            kind: "sparse".into(),
            n,
            s,
            seed: None,
            noise_mass: None,
            exact_distance: Some(0.0),
            squared_norm: spectrum.squared_norm(),
        },
        spectrum,
        exact_distance: Some(0.0),
    })
}

fn dense_instance(kind: &str, n: u32, s: u64, coeffs: Vec<f64>, noise_mass: Option<f64>) -> Result<PlantedInstance> {
    let coeff_table = SpectralTable::new(n, coeffs)?;
    let values = wht_inverse(&coeff_table);
    let ranked = exact_spectrum(&values)?;
    let exact = distance_from_ranked(&ranked, s);
    let entries = coeff_table
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(a, v)| Coefficient { alpha: a as u64, value: *v })
        .collect();
    let spectrum = SparseSpectrum::new(n, entries)?;
    let oracle = FunctionOracle::dense(values);
    Ok(PlantedInstance {
        meta: InstanceMeta {
            kind: kind.into(),
            n,
            s,
            seed: None,
            noise_mass,
            exact_distance: Some(exact),
            squared_norm: squared_norm_exact(&oracle),
        },
        oracle,
        spectrum,
        exact_distance: Some(exact),
    })
}

/// Unit-norm signal on `s` planted frequencies with total energy `1 - rho`, plus
/// energy `rho` spread evenly over every other frequency. Each planted energy
/// must strictly exceed each noise energy. Dense backing, `n <= 24`.
pub fn gen_noisy_sparse<R: Rng + ?Sized>(n: u32, s: u64, rho: f64, rng: &mut R) -> Result<PlantedInstance> {
    if n > MAX_EXACT_DIM {
        return Err(Error::DimensionTooLarge { n, limit: MAX_EXACT_DIM });
    }
    check_sparsity(n, s)?;
    if !(0.0..1.0).contains(&rho) {
        return Err(invalid(format!("noise mass must lie in [0, 1), got {rho}")));
    }
    let space = 1u64 << n;
    if rho > 0.0 && s == space {
        return Err(invalid("no frequencies left for noise when s = 2^n"));
    }
    let law = CoeffLaw::default();
    let support = sample_support(n, s, rng)?;
    let raw: Vec<f64> = support.iter().map(|_| law.draw(rng)).collect();
    let raw_energy: f64 = raw.iter().map(|v| v * v).sum();
    let scale = ((1.0 - rho) / raw_energy).sqrt();

    let noise_energy = if rho > 0.0 { rho / (space - s) as f64 } else { 0.0 };
    let min_planted = raw.iter().map(|v| (v * scale).powi(2)).fold(f64::INFINITY, f64::min);
    if min_planted <= noise_energy {
        return Err(invalid(format!("planted energy {min_planted} does not dominate noise energy {noise_energy}")));
    }

    let mut coeffs = vec![0.0; space as usize];
    if rho > 0.0 {
        let amp = noise_energy.sqrt();
        for c in coeffs.iter_mut() {
            *c = if rng.random::<bool>() { amp } else { -amp };
        }
    }
    for (alpha, v) in support.iter().zip(&raw) {
        coeffs[*alpha as usize] = v * scale;
    }
    dense_instance("noisy", n, s, coeffs, Some(rho))
}

/// Unit-norm function whose every Fourier coefficient has energy `2^-n`, with
/// uniform random signs. Its distance to s-sparsity is `1 - s 2^-n`. Dense
/// backing, `n <= 24`.
pub fn gen_flat<R: Rng + ?Sized>(n: u32, s: u64, rng: &mut R) -> Result<PlantedInstance> {
    if n > MAX_EXACT_DIM {
        return Err(Error::DimensionTooLarge { n, limit: MAX_EXACT_DIM });
    }
    check_sparsity(n, s)?;
    let amp = (-(n as f64) / 2.0).exp2();
    let coeffs = (0..1usize << n).map(|_| if rng.random::<bool>() { amp } else { -amp }).collect();
    dense_instance("flat", n, s, coeffs, None)
}

/// Unit-norm function with independent standard normal values, rescaled.
/// Dense backing, `n <= 24`.
pub fn gen_random_dense<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<FunctionOracle> {
    if n > MAX_EXACT_DIM {
        return Err(Error::DimensionTooLarge { n, limit: MAX_EXACT_DIM });
    }
    let values = (0..1usize << n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    FunctionOracle::dense(SpectralTable::new(n, values)?).normalized()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussianKind {
    Yes,
    No,
}

/// Draw from one of the two Gaussian-coefficient distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSpectrumInstance {
    pub kind: GaussianKind,
    pub n: u32,
    /// Support size: `s` for YES, `2^n` for NO.
    pub s: u64,
    /// Support set in draw order (YES only).
    pub support: Option<Vec<u64>>,
    pub oracle: FunctionOracle,
}

/// `f_S = s^{-1/2} sum_{z in S} g_z chi_z` with `S` a uniform size-`s` subset and
/// independent standard normal `g_z`. Evaluated lazily.
pub fn gen_dyes<R: Rng + ?Sized>(n: u32, s: u64, rng: &mut R) -> Result<GaussianSpectrumInstance> {
    let support = sample_support(n, s, rng)?;
    let k = (s as f64).sqrt().recip();
    let entries = support.iter().map(|&alpha| Coefficient { alpha, value: k * CoeffLaw::Gaussian.draw(rng) }).collect();
    Ok(GaussianSpectrumInstance {
        kind: GaussianKind::Yes,
        n,
        s,
        support: Some(support),
        oracle: FunctionOracle::sparse(SparseSpectrum::new(n, entries)?),
    })
}

/// `f = 2^{-n/2} sum_z g_z chi_z` over all `2^n` frequencies. Dense backing,
/// `n <= 24`.
pub fn gen_dno<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<GaussianSpectrumInstance> {
    if n > MAX_EXACT_DIM {
        return Err(Error::DimensionTooLarge { n, limit: MAX_EXACT_DIM });
    }
    if n == 0 {
        return Err(invalid("dimension n must be at least 1"));
    }
    let k = (-(n as f64) / 2.0).exp2();
    let coeffs: Vec<f64> = (0..1usize << n).map(|_| k * rng.sample::<f64, _>(StandardNormal)).collect();
    let values = wht_inverse(&SpectralTable::new(n, coeffs)?);
    Ok(GaussianSpectrumInstance {
        kind: GaussianKind::No,
        n,
        s: 1u64 << n,
        support: None,
        oracle: FunctionOracle::dense(values),
    })
}

/// `E[f(x) f(y)]` under YES with support `support` (`(1/s) sum_{z in S}
/// chi_z(x) chi_z(y)`), or under NO when `support` is `None` (`[x == y]`).
pub fn covariance_entry(support: Option<&[u64]>, x: CubePoint, y: CubePoint) -> Result<f64> {
    check_dims(x.dim(), y.dim())?;
    match support {
        None => Ok(if x == y { 1.0 } else { 0.0 }),
        Some(s) => {
            if s.is_empty() {
                return Err(invalid("support must be nonempty"));
            }
            let diff = x.bits() ^ y.bits();
            Ok(s.iter().map(|&z| sign(z, diff)).sum::<f64>() / s.len() as f64)
        }
    }
}

/// Squared Frobenius norm `||I_q - M_S||_F^2` where `M_S[i][j]` is the YES
/// covariance between query points `i` and `j`.
pub fn frobenius_deviation(support: &[u64], queries: &[CubePoint]) -> Result<f64> {
    if queries.is_empty() {
        return Err(invalid("query set must be nonempty"));
    }
    let mut total = 0.0;
    for (i, &x) in queries.iter().enumerate() {
        for (j, &y) in queries.iter().enumerate() {
            let id = if i == j { 1.0 } else { 0.0 };
            total += (id - covariance_entry(Some(support), x, y)?).powi(2);
        }
    }
    Ok(total)
}

/// `q` distinct uniform points, sorted ascending.
pub fn sample_query_set<R: Rng + ?Sized>(n: u32, q: u64, rng: &mut R) -> Result<Vec<CubePoint>> {
    let mut pts = sample_support(n, q, rng)?;
    pts.sort_unstable();
    Ok(pts.into_iter().map(|b| CubePoint::from_raw(b, n)).collect())
}

/// Decision rule of a non-adaptive distinguisher: sees the fixed query points
/// and the function values there; returns true for "s-sparse".
pub type DecisionRule<'a> = dyn Fn(&[CubePoint], &[f64]) -> bool + Sync + 'a;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistinguishingTrial {
    pub yes_accept: bool,
    pub no_accept: bool,
    pub yes_squared_norm: f64,
    pub no_squared_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistinguishingOutcome {
    pub trials: Vec<DistinguishingTrial>,
    pub accept_rate_yes: f64,
    pub accept_rate_no: f64,
    /// `|Pr[accept | YES] - Pr[accept | NO]|`.
    pub advantage: f64,
}

/// Draw `trials` functions from each of YES and NO, query each on one fixed
/// random set of `q` points, and report the rule's empirical advantage. Trials
/// use per-trial substreams, so results do not depend on scheduling.
pub fn distinguishing_experiment<R: Rng + ?Sized>(
    n: u32,
    s: u64,
    q: u64,
    trials: usize,
    rule: &DecisionRule<'_>,
    rng: &mut R,
) -> Result<DistinguishingOutcome> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    if q == 0 {
        return Err(invalid("query count q must be at least 1"));
    }
    check_sparsity(n, s)?;
    let queries = sample_query_set(n, q, rng)?;
    let seeds: Vec<u64> = (0..trials).map(|_| rng.next_u64()).collect();
    let ledger = crate::oracle::QueryLedger::new();

    let rows: Vec<DistinguishingTrial> = seeds
        .par_iter()
        .map(|&seed| -> Result<DistinguishingTrial> {
            let mut trng = ChaCha8Rng::seed_from_u64(seed);
            let yes = gen_dyes(n, s, &mut trng)?;
            let no = gen_dno(n, &mut trng)?;
            let yv = yes.oracle.evaluate_batch(&ledger, &queries)?;
            let nv = no.oracle.evaluate_batch(&ledger, &queries)?;
            Ok(DistinguishingTrial {
                yes_accept: rule(&queries, &yv),
                no_accept: rule(&queries, &nv),
                yes_squared_norm: squared_norm_exact(&yes.oracle),
                no_squared_norm: squared_norm_exact(&no.oracle),
            })
        })
        .collect::<Result<_>>()?;

    let rate = |f: fn(&DistinguishingTrial) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / trials as f64;
    let accept_rate_yes = rate(|r| r.yes_accept);
    let accept_rate_no = rate(|r| r.no_accept);
    Ok(DistinguishingOutcome {
        trials: rows,
        accept_rate_yes,
        accept_rate_no,
        advantage: (accept_rate_yes - accept_rate_no).abs(),
    })
}

/// Accept iff the mean of the squared queried values is at most `tau`.
pub fn norm_threshold_rule(tau: f64) -> impl Fn(&[CubePoint], &[f64]) -> bool + Sync {
    move |_, values| values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64 <= tau
}

/// Full-information rule for `q = 2^n`: rebuild the table from the queried
/// values and accept iff its exact distance to s-sparsity is below `1e-9`.
/// Rejects whenever the query set is not the whole cube.
pub fn exact_sparsity_rule(n: u32, s: u64) -> impl Fn(&[CubePoint], &[f64]) -> bool + Sync {
    move |points, values| {
        if n > MAX_EXACT_DIM || points.len() as u64 != 1u64 << n {
            return false;
        }
        let mut table = vec![0.0; 1usize << n];
        for (p, v) in points.iter().zip(values) {
            table[p.bits() as usize] = *v;
        }
        match SpectralTable::new(n, table).and_then(|t| exact_spectrum(&t)) {
            Ok(ranked) => distance_from_ranked(&ranked, s) < 1e-9,
            Err(_) => false,
        }
    }
}
