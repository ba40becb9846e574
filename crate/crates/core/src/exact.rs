//! Brute-force ground truth at small n: full spectra, top-s energies, distances
//! to sparsity and hashing errors.

use serde::{Deserialize, Serialize};

use crate::cube::check_dims;
use crate::cube::{wht_forward, SpectralTable};
use crate::error::{Error, Result};
use crate::hashing::{exact_bucket_energies, CosetHash};

pub const MAX_EXACT_DIM: u32 = 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub alpha: u64,
    pub coefficient: f64,
    pub energy: f64,
}

/// Every Fourier coefficient, sorted by energy descending and frequency
/// ascending on ties.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedSpectrum {
    n: u32,
    entries: Vec<RankedEntry>,
}

impl RankedSpectrum {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn total_energy(&self) -> f64 {
        self.entries.iter().map(|e| e.energy).sum()
    }

    pub fn support_size(&self) -> usize {
        self.entries.iter().filter(|e| e.energy != 0.0).count()
    }
}

fn check_exact_dim(n: u32) -> Result<()> {
    if n > MAX_EXACT_DIM {
        Err(Error::DimensionTooLarge { n, limit: MAX_EXACT_DIM })
    } else {
        Ok(())
    }
}

/// Full transform of a dense table of function values, ranked.
pub fn exact_spectrum(values: &SpectralTable) -> Result<RankedSpectrum> {
    check_exact_dim(values.n())?;
    let coeffs = wht_forward(values);
    let mut entries: Vec<RankedEntry> = coeffs
        .values()
        .iter()
        .enumerate()
        .map(|(alpha, &c)| RankedEntry { alpha: alpha as u64, coefficient: c, energy: c * c })
        .collect();
    entries.sort_by(|a, b| b.energy.total_cmp(&a.energy).then(a.alpha.cmp(&b.alpha)));
    Ok(RankedSpectrum { n: values.n(), entries })
}

/// `max_{|S| = s} sum_{alpha in S} f_hat(alpha)^2`.
pub fn exact_top_s_energy(ranked: &RankedSpectrum, s: u64) -> f64 {
    let take = usize::try_from(s).unwrap_or(usize::MAX);
    ranked.entries.iter().take(take).map(|e| e.energy).sum()
}

/// `||f||_2^2 - top_s`, i.e. the squared l2 distance to the closest s-sparse
/// function.
pub fn exact_distance_to_sparsity(values: &SpectralTable, s: u64) -> Result<f64> {
    let ranked = exact_spectrum(values)?;
    Ok(distance_from_ranked(&ranked, s))
}

pub fn distance_from_ranked(ranked: &RankedSpectrum, s: u64) -> f64 {
    let total = ranked.total_energy();
    let tail: f64 = ranked.entries.iter().skip(usize::try_from(s).unwrap_or(usize::MAX)).map(|e| e.energy).sum();
    tail.clamp(0.0, total)
}

/// Energy of the top s buckets minus the energy of the top s coefficients.
/// Clamped at zero against round-off.
pub fn exact_hashing_error(ranked: &RankedSpectrum, hash: &CosetHash, s: u64) -> Result<f64> {
    check_dims(hash.n(), ranked.n)?;
    let mut buckets = vec![0.0; hash.bucket_count()];
    for e in &ranked.entries {
        buckets[hash.syndrome(e.alpha) as usize] += e.energy;
    }
    buckets.sort_by(|a, b| b.total_cmp(a));
    let take = usize::try_from(s).unwrap_or(usize::MAX);
    let top_buckets: f64 = buckets.iter().take(take).sum();
    Ok((top_buckets - exact_top_s_energy(ranked, s)).max(0.0))
}

/// Same as [`exact_hashing_error`] but grouping through
/// [`exact_bucket_energies`] on the coefficient table.
pub fn hashing_error_via_buckets(values: &SpectralTable, hash: &CosetHash, s: u64) -> Result<f64> {
    let coeffs = wht_forward(values);
    let mut energies: Vec<f64> = exact_bucket_energies(&coeffs, hash)?.into_values().collect();
    energies.sort_by(|a, b| b.total_cmp(a));
    let take = usize::try_from(s).unwrap_or(usize::MAX);
    let mut coeff_energies: Vec<f64> = coeffs.values().iter().map(|c| c * c).collect();
    coeff_energies.sort_by(|a, b| b.total_cmp(a));
    let top_b: f64 = energies.iter().take(take).sum();
    let top_c: f64 = coeff_energies.iter().take(take).sum();
    Ok((top_b - top_c).max(0.0))
}
