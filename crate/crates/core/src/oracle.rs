//! Query access to functions `f: F_2^n -> R`.
//!
//! The estimator sees a function only through [`FunctionOracle::evaluate_batch`],
//! which charges every evaluated point to a [`QueryLedger`]. Ground-truth helpers
//! such as [`squared_norm_exact`] read the backing directly and are not charged.

use std::collections::HashSet;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{self, check_dims, mask, sign, CubePoint, SpectralTable, MAX_ALGEBRAIC_DIM};
use crate::error::{invalid, Error, Result};

/// One nonzero Fourier coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub alpha: u64,
    pub value: f64,
}

/// A Fourier-sparse function given by its nonzero coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSpectrum {
    n: u32,
    entries: Vec<Coefficient>,
}

impl SparseSpectrum {
    pub fn new(n: u32, entries: Vec<Coefficient>) -> Result<Self> {
        if n > MAX_ALGEBRAIC_DIM {
            return Err(Error::DimensionTooLarge { n, limit: MAX_ALGEBRAIC_DIM });
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for c in &entries {
            if c.alpha & !mask(n) != 0 {
                return Err(invalid(format!("frequency {} does not fit in {n} bits", c.alpha)));
            }
            if !c.value.is_finite() || c.value == 0.0 {
                return Err(invalid(format!("coefficient at {} must be finite and nonzero, got {}", c.alpha, c.value)));
            }
            if !seen.insert(c.alpha) {
                return Err(invalid(format!("duplicate frequency {}", c.alpha)));
            }
        }
        Ok(Self { n, entries })
    }

    pub fn from_pairs(n: u32, pairs: &[(u64, f64)]) -> Result<Self> {
        Self::new(n, pairs.iter().map(|&(alpha, value)| Coefficient { alpha, value }).collect())
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn entries(&self) -> &[Coefficient] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `sum_alpha f_hat(alpha) chi_alpha(x)`.
    #[inline]
    pub fn evaluate(&self, x: u64) -> f64 {
        self.entries.iter().map(|c| c.value * sign(c.alpha, x)).sum()
    }

    /// `||f||_2^2` by Parseval.
    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|c| c.value * c.value).sum()
    }

    /// Dense coefficient table indexed by frequency.
    pub fn coefficient_table(&self) -> Result<SpectralTable> {
        let mut values = SpectralTable::zeros(self.n)?.into_values();
        for c in &self.entries {
            values[c.alpha as usize] = c.value;
        }
        SpectralTable::new(self.n, values)
    }

    /// Dense table of function values.
    pub fn to_table(&self) -> Result<SpectralTable> {
        Ok(cube::wht_inverse(&self.coefficient_table()?))
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.squared_norm();
        if norm == 0.0 {
            return Err(Error::ZeroFunction);
        }
        let k = norm.sqrt().recip();
        Ok(Self {
            n: self.n,
            entries: self.entries.iter().map(|c| Coefficient { alpha: c.alpha, value: c.value * k }).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Backing {
    Dense(SpectralTable),
    Sparse(SparseSpectrum),
}

/// Immutable query-access wrapper around a function on F_2^n.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionOracle {
    backing: Backing,
}

impl FunctionOracle {
    pub fn dense(table: SpectralTable) -> Self {
        Self { backing: Backing::Dense(table) }
    }

    pub fn sparse(spectrum: SparseSpectrum) -> Self {
        Self { backing: Backing::Sparse(spectrum) }
    }

    pub fn n(&self) -> u32 {
        match &self.backing {
            Backing::Dense(t) => t.n(),
            Backing::Sparse(s) => s.n(),
        }
    }

    pub fn backing(&self) -> &Backing {
        &self.backing
    }

    /// Value at `x` without touching any ledger. Ground-truth use only.
    #[inline]
    pub(crate) fn value_at(&self, x: u64) -> f64 {
        match &self.backing {
            Backing::Dense(t) => t.values()[x as usize],
            Backing::Sparse(s) => s.evaluate(x),
        }
    }

    /// Evaluate at every point, charging each to the ledger.
    pub fn evaluate_batch(&self, ledger: &QueryLedger, points: &[CubePoint]) -> Result<Vec<f64>> {
        let n = self.n();
        for p in points {
            check_dims(n, p.dim())?;
        }
        let raw: Vec<u64> = points.iter().map(|p| p.bits()).collect();
        let mut out = Vec::with_capacity(raw.len());
        self.evaluate_raw_into(ledger, &raw, &mut out);
        Ok(out)
    }

    /// Batch evaluation of raw points already known to fit in `n` bits.
    /// Appends to `out` and charges the ledger.
    pub(crate) fn evaluate_raw_into(&self, ledger: &QueryLedger, points: &[u64], out: &mut Vec<f64>) {
        ledger.charge(points);
        match &self.backing {
            Backing::Dense(t) => {
                let v = t.values();
                out.extend(points.iter().map(|&x| v[x as usize]));
            }
            Backing::Sparse(s) => out.extend(points.iter().map(|&x| s.evaluate(x))),
        }
    }

    /// Dense table of values. Sparse backings are materialized by inverse transform.
    pub fn to_table(&self) -> Result<SpectralTable> {
        match &self.backing {
            Backing::Dense(t) => Ok(t.clone()),
            Backing::Sparse(s) => s.to_table(),
        }
    }

    /// Same function with a dense backing.
    pub fn densified(&self) -> Result<Self> {
        Ok(Self::dense(self.to_table()?))
    }

    /// Rescale to `||f||_2^2 = 1`.
    pub fn normalized(&self) -> Result<Self> {
        match &self.backing {
            Backing::Sparse(s) => Ok(Self::sparse(s.normalized()?)),
            Backing::Dense(t) => {
                let norm = t.mean_square();
                if norm == 0.0 {
                    return Err(Error::ZeroFunction);
                }
                let mut t = t.clone();
                t.scale(norm.sqrt().recip());
                Ok(Self::dense(t))
            }
        }
    }

    pub fn to_file(&self) -> FunctionFile {
        match &self.backing {
            Backing::Dense(t) => FunctionFile { n: t.n(), body: FunctionBody::Dense { values: t.values().to_vec() } },
            Backing::Sparse(s) => {
                FunctionFile { n: s.n(), body: FunctionBody::Sparse { coeffs: s.entries().to_vec() } }
            }
        }
    }

    pub fn from_file(file: FunctionFile) -> Result<Self> {
        match file.body {
            FunctionBody::Dense { values } => Ok(Self::dense(SpectralTable::new(file.n, values)?)),
            FunctionBody::Sparse { coeffs } => Ok(Self::sparse(SparseSpectrum::new(file.n, coeffs)?)),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// On-disk function format: `{"n": .., "repr": "dense", "values": [..]}` or
/// `{"n": .., "repr": "sparse", "coeffs": [{"alpha": .., "value": ..}, ..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionFile {
    pub n: u32,
    #[serde(flatten)]
    pub body: FunctionBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "repr", rename_all = "lowercase")]
pub enum FunctionBody {
    Dense { values: Vec<f64> },
    Sparse { coeffs: Vec<Coefficient> },
}

/// Counts oracle evaluations, optionally recording every queried point.
///
/// Increments are atomic so concurrent estimator runs leave an exact count.
/// Recorded points may interleave in any order across threads.
#[derive(Debug, Default)]
pub struct QueryLedger {
    count: AtomicU64,
    recorded: Option<Mutex<Vec<u64>>>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn recording() -> Self {
        Self { count: AtomicU64::new(0), recorded: Some(Mutex::new(Vec::new())) }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }

    pub fn is_recording(&self) -> bool {
        self.recorded.is_some()
    }

    /// Recorded points as a sorted multiset, if recording is enabled.
    pub fn recorded_multiset(&self) -> Option<Vec<u64>> {
        self.recorded.as_ref().map(|m| {
            let mut v = m.lock().expect("ledger mutex poisoned").clone();
            v.sort_unstable();
            v
        })
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::SeqCst);
        if let Some(m) = &self.recorded {
            m.lock().expect("ledger mutex poisoned").clear();
        }
    }

    fn charge(&self, points: &[u64]) {
        if let Some(m) = &self.recorded {
            m.lock().expect("ledger mutex poisoned").extend_from_slice(points);
        }
        self.count.fetch_add(points.len() as u64, Ordering::SeqCst);
    }
}

/// `||f||_2^2` from the backing: mean of squared values for dense tables, sum
/// of squared coefficients for sparse spectra. Not charged.
pub fn squared_norm_exact(oracle: &FunctionOracle) -> f64 {
    match oracle.backing() {
        Backing::Dense(t) => t.mean_square(),
        Backing::Sparse(s) => s.squared_norm(),
    }
}

/// Mean of `f(x)^2` over `m` uniform points; charges `m` queries.
pub fn estimate_squared_norm<R: Rng + ?Sized>(
    oracle: &FunctionOracle,
    ledger: &QueryLedger,
    m: usize,
    rng: &mut R,
) -> Result<f64> {
    if m == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let space = mask(oracle.n());
    let points: Vec<u64> = (0..m).map(|_| rng.random::<u64>() & space).collect();
    let mut values = Vec::with_capacity(m);
    oracle.evaluate_raw_into(ledger, &points, &mut values);
    Ok(values.iter().map(|v| v * v).sum::<f64>() / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::wht_forward;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(n: u32, seed: u64) -> FunctionOracle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals = (0..1usize << n).map(|_| rng.random_range(-2.0..2.0)).collect();
        FunctionOracle::dense(SpectralTable::new(n, vals).unwrap())
    }

    fn random_sparse(n: u32, k: usize, seed: u64) -> SparseSpectrum {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        while entries.len() < k {
            let alpha = rng.random::<u64>() & mask(n);
            if seen.insert(alpha) {
                entries.push(Coefficient { alpha, value: rng.random_range(0.1..1.0) });
            }
        }
        SparseSpectrum::new(n, entries).unwrap()
    }

    #[test]
    fn evaluate_batch_examples() {
        let ledger = QueryLedger::new();
        let one = FunctionOracle::sparse(SparseSpectrum::from_pairs(5, &[(0, 1.0)]).unwrap());
        let x = CubePoint::new(0b10110, 5).unwrap();
        assert_eq!(one.evaluate_batch(&ledger, &[x]).unwrap(), vec![1.0]);

        let beta = CubePoint::new(0b00111, 5).unwrap();
        let chi_beta = FunctionOracle::sparse(SparseSpectrum::from_pairs(5, &[(beta.bits(), 1.0)]).unwrap());
        let want = cube::chi(beta, x).unwrap() as f64;
        assert_eq!(chi_beta.evaluate_batch(&ledger, &[x]).unwrap(), vec![want]);
        assert_eq!(ledger.count(), 2);

        let ledger = QueryLedger::new();
        let dense = random_dense(3, 1);
        let all: Vec<CubePoint> = (0..8).map(|b| CubePoint::new(b, 3).unwrap()).collect();
        let got = dense.evaluate_batch(&ledger, &all).unwrap();
        assert_eq!(got, dense.to_table().unwrap().values());
        assert_eq!(ledger.count(), 8);

        let wrong = CubePoint::new(0, 4).unwrap();
        assert!(dense.evaluate_batch(&ledger, &[wrong]).is_err());
    }

    #[test]
    fn sparse_spectrum_validation() {
        assert!(SparseSpectrum::from_pairs(3, &[(1, 1.0), (1, 2.0)]).is_err());
        assert!(SparseSpectrum::from_pairs(3, &[(1, 0.0)]).is_err());
        assert!(SparseSpectrum::from_pairs(3, &[(8, 1.0)]).is_err());
        assert!(SparseSpectrum::from_pairs(3, &[(2, f64::INFINITY)]).is_err());
    }

    #[test]
    fn squared_norm_examples() {
        let f = FunctionOracle::sparse(SparseSpectrum::from_pairs(6, &[(9, 1.0)]).unwrap());
        assert_eq!(squared_norm_exact(&f), 1.0);
        let f = FunctionOracle::sparse(SparseSpectrum::from_pairs(6, &[(3, 0.6), (40, 0.8)]).unwrap());
        assert!((squared_norm_exact(&f) - 1.0).abs() <= 1e-15);

        let f = random_dense(4, 9);
        let table = f.to_table().unwrap();
        let via_coeffs = wht_forward(&table).sum_square();
        assert!((squared_norm_exact(&f) - via_coeffs).abs() <= 1e-12);
    }

    #[test]
    fn estimate_squared_norm_exact_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ledger = QueryLedger::new();
        let one = FunctionOracle::sparse(SparseSpectrum::from_pairs(8, &[(0, 1.0)]).unwrap());
        assert_eq!(estimate_squared_norm(&one, &ledger, 37, &mut rng).unwrap(), 1.0);
        let c = FunctionOracle::sparse(SparseSpectrum::from_pairs(8, &[(77, -1.5)]).unwrap());
        assert_eq!(estimate_squared_norm(&c, &ledger, 10, &mut rng).unwrap(), 2.25);
        assert_eq!(ledger.count(), 47);
        assert!(estimate_squared_norm(&c, &ledger, 0, &mut rng).is_err());
    }

    // f = a chi_alpha + b chi_beta with a^2 + b^2 = 1 has f^2 = 1 + 2ab chi_{alpha^beta},
    // so Var[f(x)^2] = 4a^2b^2 <= 1 and the m = 10^4 mean has sigma <= 0.01.
    #[test]
    fn estimate_squared_norm_two_characters() {
        let f = FunctionOracle::sparse(SparseSpectrum::from_pairs(10, &[(3, 0.6), (700, 0.8)]).unwrap());
        let ledger = QueryLedger::new();
        let seeds = 200;
        let good = (0..seeds)
            .filter(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (estimate_squared_norm(&f, &ledger, 10_000, &mut rng).unwrap() - 1.0).abs() <= 0.05
            })
            .count();
        assert!(good as f64 >= 0.99 * seeds as f64);
    }

    #[test]
    fn normalization() {
        let f = FunctionOracle::sparse(SparseSpectrum::from_pairs(4, &[(5, 2.0)]).unwrap());
        let g = f.normalized().unwrap();
        assert_eq!(g, FunctionOracle::sparse(SparseSpectrum::from_pairs(4, &[(5, 1.0)]).unwrap()));
        assert_eq!(g.normalized().unwrap(), g);

        let d = random_dense(5, 2).normalized().unwrap();
        assert!((squared_norm_exact(&d) - 1.0).abs() <= 1e-12);

        let zero = FunctionOracle::dense(SpectralTable::zeros(3).unwrap());
        assert!(matches!(zero.normalized(), Err(Error::ZeroFunction)));
    }

    #[test]
    fn json_format() {
        let f = FunctionOracle::sparse(SparseSpectrum::from_pairs(3, &[(5, 0.5)]).unwrap());
        let text = f.to_json().unwrap();
        assert_eq!(text, r#"{"n":3,"repr":"sparse","coeffs":[{"alpha":5,"value":0.5}]}"#);
        assert_eq!(FunctionOracle::from_json(&text).unwrap(), f);

        let parsed = FunctionOracle::from_json(r#"{"repr":"dense","n":1,"values":[1,-2]}"#).unwrap();
        assert_eq!(parsed.to_table().unwrap().values(), &[1.0, -2.0]);

        assert!(FunctionOracle::from_json(r#"{"n":2,"repr":"dense","values":[1]}"#).is_err());
        assert!(FunctionOracle::from_json(r#"{"n":2,"repr":"tensor"}"#).is_err());
    }

    #[test]
    fn recording_ledger_reset() {
        let ledger = QueryLedger::recording();
        let f = random_dense(4, 0);
        let pts: Vec<CubePoint> = [3, 1, 3].iter().map(|&b| CubePoint::new(b, 4).unwrap()).collect();
        f.evaluate_batch(&ledger, &pts).unwrap();
        assert_eq!(ledger.recorded_multiset().unwrap(), vec![1, 3, 3]);
        ledger.reset();
        assert_eq!(ledger.count(), 0);
        assert_eq!(ledger.recorded_multiset().unwrap(), Vec::<u64>::new());
        assert!(QueryLedger::new().recorded_multiset().is_none());
    }

    proptest! {
        #[test]
        fn sparse_and_dense_evaluation_agree(n in 1u32..=12, k in 1usize..20, seed in any::<u64>()) {
            let k = k.min(1 << n);
            let spectrum = random_sparse(n, k, seed);
            let table = spectrum.to_table().unwrap();
            for x in 0..(1u64 << n) {
                prop_assert!((table.values()[x as usize] - spectrum.evaluate(x)).abs() <= 1e-10);
            }
        }
    }
}
