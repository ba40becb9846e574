//! Coset hashing of the Fourier spectrum.
//!
//! A full-rank `d x n` matrix `W` defines the subspace `H = ker W`. Frequencies
//! are bucketed by their syndrome `t = W alpha`, whose fibers are exactly the
//! `2^d` cosets of `H`. Shifts are drawn from the row space of `W`: pattern `c`
//! maps to `z_c = c^T W`, and `chi_alpha(z_c) = (-1)^{c . t(alpha)}`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{check_dims, gf2_rank, mask, sample_full_rank_matrix, sign, CubePoint, Gf2Matrix, SpectralTable};
use crate::error::{invalid, Error, Result};
use crate::oracle::{FunctionOracle, SparseSpectrum};

/// Largest n for which [`exact_projection_eval`] runs.
pub const MAX_PROJECTION_DIM: u32 = 20;

/// A coset of `H`, labelled by its syndrome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bucket(pub u64);

impl Bucket {
    pub fn syndrome(self) -> u64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShiftPattern {
    pub c: u64,
    pub z: CubePoint,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetHash {
    w: Gf2Matrix,
}

impl CosetHash {
    pub fn new(w: Gf2Matrix) -> Result<Self> {
        if gf2_rank(&w) != w.d() as usize {
            return Err(invalid("hash matrix must have full row rank"));
        }
        Ok(Self { w })
    }

    /// Uniformly random codimension-`d` subspace of F_2^n.
    pub fn sample<R: Rng + ?Sized>(d: u32, n: u32, rng: &mut R) -> Result<Self> {
        Ok(Self { w: sample_full_rank_matrix(d, n, rng)? })
    }

    pub fn n(&self) -> u32 {
        self.w.n()
    }

    pub fn d(&self) -> u32 {
        self.w.d()
    }

    pub fn bucket_count(&self) -> usize {
        1usize << self.d()
    }

    pub fn matrix(&self) -> &Gf2Matrix {
        &self.w
    }

    pub fn bucket_of(&self, alpha: CubePoint) -> Result<Bucket> {
        check_dims(self.n(), alpha.dim())?;
        Ok(Bucket(self.w.apply(alpha.bits())))
    }

    #[inline]
    pub(crate) fn syndrome(&self, alpha: u64) -> u64 {
        self.w.apply(alpha)
    }

    pub fn shift_pattern(&self, c: u64) -> Result<ShiftPattern> {
        if c & !mask(self.d()) != 0 {
            return Err(invalid(format!("shift pattern {c} does not fit in d = {} bits", self.d())));
        }
        Ok(ShiftPattern { c, z: CubePoint::from_raw(self.w.combine_rows(c), self.n()) })
    }

    pub fn shift_vector(&self, c: u64) -> Result<CubePoint> {
        Ok(self.shift_pattern(c)?.z)
    }

    pub(crate) fn shift_table(&self) -> ShiftTable {
        ShiftTable::new(&self.w)
    }
}

/// `c -> z_c` in two table lookups: the low and high halves of `c` each index a
/// table of partial XORs.
pub(crate) struct ShiftTable {
    low_bits: u32,
    low: Vec<u64>,
    high: Vec<u64>,
}

impl ShiftTable {
    fn new(w: &Gf2Matrix) -> Self {
        let d = w.d();
        let low_bits = d / 2;
        let low = (0..1u64 << low_bits).map(|c| w.combine_rows(c)).collect();
        let high = (0..1u64 << (d - low_bits)).map(|c| w.combine_rows(c << low_bits)).collect();
        Self { low_bits, low, high }
    }

    #[inline]
    pub(crate) fn get(&self, c: u64) -> u64 {
        self.low[(c & mask(self.low_bits)) as usize] ^ self.high[(c >> self.low_bits) as usize]
    }
}

/// Borrowed view of a spectrum, sparse or as a dense coefficient table.
#[derive(Clone, Copy, Debug)]
pub enum SpectrumRef<'a> {
    Sparse(&'a SparseSpectrum),
    Dense(&'a SpectralTable),
}

impl<'a> From<&'a SparseSpectrum> for SpectrumRef<'a> {
    fn from(s: &'a SparseSpectrum) -> Self {
        SpectrumRef::Sparse(s)
    }
}

impl<'a> From<&'a SpectralTable> for SpectrumRef<'a> {
    fn from(t: &'a SpectralTable) -> Self {
        SpectrumRef::Dense(t)
    }
}

impl SpectrumRef<'_> {
    pub fn n(&self) -> u32 {
        match self {
            SpectrumRef::Sparse(s) => s.n(),
            SpectrumRef::Dense(t) => t.n(),
        }
    }

    pub fn for_each(&self, mut f: impl FnMut(u64, f64)) {
        match self {
            SpectrumRef::Sparse(s) => s.entries().iter().for_each(|c| f(c.alpha, c.value)),
            SpectrumRef::Dense(t) => t.values().iter().enumerate().for_each(|(a, v)| f(a as u64, *v)),
        }
    }
}

/// Energy `sum_{alpha in bucket t} f_hat(alpha)^2` for each bucket that receives
/// at least one coefficient. Missing buckets have energy zero.
pub fn exact_bucket_energies<'a>(
    spectrum: impl Into<SpectrumRef<'a>>,
    hash: &CosetHash,
) -> Result<BTreeMap<Bucket, f64>> {
    let spectrum = spectrum.into();
    check_dims(hash.n(), spectrum.n())?;
    let mut energies = BTreeMap::new();
    spectrum.for_each(|alpha, value| {
        *energies.entry(Bucket(hash.syndrome(alpha))).or_insert(0.0) += value * value;
    });
    Ok(energies)
}

/// Projected function `f|_{t}(z0) = E_c[f(z0 + z_c) (-1)^{c.t}]`, evaluated
/// exactly over all `2^d` shifts.
pub fn exact_projection_eval(oracle: &FunctionOracle, hash: &CosetHash, t: Bucket, z0: CubePoint) -> Result<f64> {
    let n = oracle.n();
    if n > MAX_PROJECTION_DIM {
        return Err(Error::DimensionTooLarge { n, limit: MAX_PROJECTION_DIM });
    }
    check_dims(hash.n(), n)?;
    check_dims(n, z0.dim())?;
    if t.0 & !mask(hash.d()) != 0 {
        return Err(invalid(format!("bucket {} does not fit in d = {} bits", t.0, hash.d())));
    }
    let shifts = hash.shift_table();
    let count = hash.bucket_count();
    let total: f64 = (0..count as u64).map(|c| oracle.value_at(z0.bits() ^ shifts.get(c)) * sign(c, t.0)).sum();
    Ok(total / count as f64)
}
