//! Vectors and matrices over GF(2), characters of F_2^n and the Walsh-Hadamard
//! transform.
//!
//! A point of the cube is stored as an integer whose bit `i` is coordinate `i`.
//! The same encoding labels frequencies, so a dense table indexed by `x` can be
//! transformed in place into a table indexed by `alpha`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest dimension accepted by the purely algebraic operations.
pub const MAX_ALGEBRAIC_DIM: u32 = 62;
/// Largest dimension for which a dense table of `2^n` values may be built.
pub const MAX_DENSE_DIM: u32 = 30;

#[inline]
pub fn mask(n: u32) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Parity of the GF(2) inner product of two raw bit vectors.
#[inline]
pub fn parity(a: u64, b: u64) -> bool {
    (a & b).count_ones() & 1 == 1
}

/// `(-1)^{a.b}` as a float.
#[inline]
pub fn sign(a: u64, b: u64) -> f64 {
    if parity(a, b) {
        -1.0
    } else {
        1.0
    }
}

/// An element of F_2^n. Doubles as a frequency label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubePoint {
    bits: u64,
    n: u32,
}

impl CubePoint {
    pub fn new(bits: u64, n: u32) -> Result<Self> {
        if n > MAX_ALGEBRAIC_DIM {
            return Err(Error::DimensionTooLarge { n, limit: MAX_ALGEBRAIC_DIM });
        }
        if bits & !mask(n) != 0 {
            return Err(invalid(format!("point {bits} does not fit in {n} bits")));
        }
        Ok(Self { bits, n })
    }

    pub fn zero(n: u32) -> Self {
        Self { bits: 0, n }
    }

    /// Caller guarantees `bits < 2^n`.
    #[inline]
    pub(crate) fn from_raw(bits: u64, n: u32) -> Self {
        debug_assert!(bits & !mask(n) == 0);
        Self { bits, n }
    }

    #[inline]
    pub fn bits(self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn dim(self) -> u32 {
        self.n
    }

    pub fn xor(self, other: CubePoint) -> Result<CubePoint> {
        check_dims(self.n, other.n)?;
        Ok(Self { bits: self.bits ^ other.bits, n: self.n })
    }
}

#[inline]
pub(crate) fn check_dims(expected: u32, actual: u32) -> Result<()> {
    if expected != actual {
        Err(Error::DimensionMismatch { expected, actual })
    } else {
        Ok(())
    }
}

/// `popcount(a AND b) mod 2`.
pub fn parity_dot(a: CubePoint, b: CubePoint) -> Result<u8> {
    check_dims(a.n, b.n)?;
    Ok(parity(a.bits, b.bits) as u8)
}

/// The character `chi_alpha(x) = (-1)^{alpha.x}`.
pub fn chi(alpha: CubePoint, x: CubePoint) -> Result<i8> {
    Ok(if parity_dot(alpha, x)? == 0 { 1 } else { -1 })
}

/// A dense table of `2^n` reals indexed by cube point (or by frequency once
/// transformed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralTable {
    n: u32,
    values: Vec<f64>,
}

impl SpectralTable {
    pub fn new(n: u32, values: Vec<f64>) -> Result<Self> {
        if n > MAX_DENSE_DIM {
            return Err(Error::DimensionTooLarge { n, limit: MAX_DENSE_DIM });
        }
        if values.len() != 1usize << n {
            return Err(Error::Malformed(format!(
                "table for n = {n} needs {} entries, got {}",
                1usize << n,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Malformed(format!("non-finite entry at index {i}")));
        }
        Ok(Self { n, values })
    }

    pub fn zeros(n: u32) -> Result<Self> {
        if n > MAX_DENSE_DIM {
            return Err(Error::DimensionTooLarge { n, limit: MAX_DENSE_DIM });
        }
        Ok(Self { n, values: vec![0.0; 1usize << n] })
    }

    /// Table of the character `chi_beta` evaluated at every point.
    pub fn character(beta: CubePoint) -> Result<Self> {
        let n = beta.dim();
        let mut t = Self::zeros(n)?;
        for (x, v) in t.values.iter_mut().enumerate() {
            *v = sign(beta.bits(), x as u64);
        }
        Ok(t)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Mean of the squared entries, i.e. `||f||_2^2` when the table holds
    /// function values.
    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }

    /// Sum of the squared entries, i.e. `||f||_2^2` when the table holds
    /// Fourier coefficients.
    pub fn sum_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Unscaled in-place Walsh-Hadamard butterfly. `data.len()` must be a power of two.
pub fn fwht_in_place(data: &mut [f64]) {
    let len = data.len();
    debug_assert!(len.is_power_of_two());
    let mut half = 1;
    while half < len {
        for block in data.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        half <<= 1;
    }
}

/// `f_hat(alpha) = E_x[f(x) chi_alpha(x)]`.
pub fn wht_forward(table: &SpectralTable) -> SpectralTable {
    let mut out = table.clone();
    fwht_in_place(&mut out.values);
    out.scale(1.0 / table.len() as f64);
    out
}

/// `f(x) = sum_alpha f_hat(alpha) chi_alpha(x)`.
pub fn wht_inverse(coeffs: &SpectralTable) -> SpectralTable {
    let mut out = coeffs.clone();
    fwht_in_place(&mut out.values);
    out
}

/// `t -> sum_c (-1)^{c.t} sums[c]`, the unscaled butterfly over `2^d` entries.
pub fn signed_combine(sums: &[f64]) -> Result<Vec<f64>> {
    if !sums.len().is_power_of_two() {
        return Err(Error::Malformed(format!("signed_combine needs a power-of-two length, got {}", sums.len())));
    }
    let mut out = sums.to_vec();
    fwht_in_place(&mut out);
    Ok(out)
}

/// A `d x n` matrix over GF(2), one row per bit vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gf2Matrix {
    n: u32,
    rows: Vec<u64>,
}

impl Gf2Matrix {
    pub fn new(n: u32, rows: Vec<u64>) -> Result<Self> {
        if n > MAX_ALGEBRAIC_DIM {
            return Err(Error::DimensionTooLarge { n, limit: MAX_ALGEBRAIC_DIM });
        }
        if let Some(r) = rows.iter().find(|r| **r & !mask(n) != 0) {
            return Err(invalid(format!("row {r} does not fit in {n} bits")));
        }
        Ok(Self { n, rows })
    }

    pub fn identity(n: u32) -> Result<Self> {
        Self::new(n, (0..n).map(|i| 1u64 << i).collect())
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn d(&self) -> u32 {
        self.rows.len() as u32
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    /// `M v` as a d-bit pattern: bit `i` is `row_i . v`.
    #[inline]
    pub fn apply(&self, v: u64) -> u64 {
        self.rows.iter().enumerate().fold(0, |acc, (i, &r)| acc | ((parity(r, v) as u64) << i))
    }

    /// `c^T M`: XOR of the rows selected by the bits of `c`.
    #[inline]
    pub fn combine_rows(&self, c: u64) -> u64 {
        self.rows.iter().enumerate().filter(|(i, _)| (c >> i) & 1 == 1).fold(0, |acc, (_, &r)| acc ^ r)
    }
}

/// Rank over GF(2) by elimination on leading bits.
pub fn gf2_rank(m: &Gf2Matrix) -> usize {
    let mut basis = [0u64; 64];
    let mut rank = 0;
    for &row in m.rows() {
        let mut v = row;
        while v != 0 {
            let lead = 63 - v.leading_zeros() as usize;
            if basis[lead] == 0 {
                basis[lead] = v;
                rank += 1;
                break;
            }
            v ^= basis[lead];
        }
    }
    rank
}

/// Uniform rank-`d` matrix with `n` columns: draw uniform rows and redraw the
/// whole matrix until it has full row rank.
pub fn sample_full_rank_matrix<R: Rng + ?Sized>(d: u32, n: u32, rng: &mut R) -> Result<Gf2Matrix> {
    if d > n {
        return Err(invalid(format!("codimension d = {d} exceeds n = {n}")));
    }
    if n > MAX_ALGEBRAIC_DIM {
        return Err(Error::DimensionTooLarge { n, limit: MAX_ALGEBRAIC_DIM });
    }
    let m = mask(n);
    loop {
        let rows: Vec<u64> = (0..d).map(|_| rng.random::<u64>() & m).collect();
        let candidate = Gf2Matrix { n, rows };
        if gf2_rank(&candidate) == d as usize {
            return Ok(candidate);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(bits: u64, n: u32) -> CubePoint {
        CubePoint::new(bits, n).unwrap()
    }

    // Direct O(4^n) evaluation of the defining expectation.
    fn forward_by_definition(values: &[f64]) -> Vec<f64> {
        let len = values.len();
        (0..len)
            .map(|alpha| {
                (0..len)
                    .map(|x| {
                        let s = if ((alpha & x) as u64).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                        values[x] * s
                    })
                    .sum::<f64>()
                    / len as f64
            })
            .collect()
    }

    fn random_table(n: u32, seed: u64) -> SpectralTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals = (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect();
        SpectralTable::new(n, vals).unwrap()
    }

    #[test]
    fn parity_dot_examples() {
        assert_eq!(parity_dot(pt(0, 3), pt(0b111, 3)).unwrap(), 0);
        assert_eq!(parity_dot(pt(0b101, 3), pt(0b101, 3)).unwrap(), 0);
        assert_eq!(parity_dot(pt(0b110, 3), pt(0b010, 3)).unwrap(), 1);
        assert!(matches!(parity_dot(pt(1, 3), pt(1, 4)), Err(Error::DimensionMismatch { expected: 3, actual: 4 })));
    }

    #[test]
    fn chi_examples() {
        for x in 0..16 {
            assert_eq!(chi(pt(0, 4), pt(x, 4)).unwrap(), 1);
            assert_eq!(chi(pt(x, 4), pt(0, 4)).unwrap(), 1);
        }
        assert_eq!(chi(pt(0b11, 2), pt(0b01, 2)).unwrap(), -1);
        assert!(chi(pt(0, 2), pt(0, 5)).is_err());
    }

    #[test]
    fn cube_point_rejects_out_of_range() {
        assert!(CubePoint::new(8, 3).is_err());
        assert!(CubePoint::new(0, 63).is_err());
        assert!(CubePoint::new(u64::MAX >> 2, 62).is_ok());
    }

    #[test]
    fn forward_of_constant_is_delta() {
        let t = SpectralTable::new(3, vec![1.0; 8]).unwrap();
        let f = wht_forward(&t);
        assert_eq!(f.values()[0], 1.0);
        assert!(f.values()[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn forward_of_character_is_delta_at_beta() {
        for beta in 0..16 {
            let f = wht_forward(&SpectralTable::character(pt(beta, 4)).unwrap());
            for (alpha, v) in f.values().iter().enumerate() {
                let want = if alpha as u64 == beta { 1.0 } else { 0.0 };
                assert_eq!(*v, want);
            }
        }
    }

    #[test]
    fn forward_matches_definition_n3() {
        let t = random_table(3, 7);
        let fast = wht_forward(&t);
        let direct = forward_by_definition(t.values());
        for (a, b) in fast.values().iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn inverse_examples() {
        let mut delta = vec![0.0; 8];
        delta[0] = 2.5;
        let t = wht_inverse(&SpectralTable::new(3, delta).unwrap());
        assert!(t.values().iter().all(|v| *v == 2.5));

        let beta = 0b110;
        let mut delta = vec![0.0; 8];
        delta[beta] = 1.0;
        let t = wht_inverse(&SpectralTable::new(3, delta).unwrap());
        assert_eq!(t, SpectralTable::character(pt(beta as u64, 3)).unwrap());

        let t = random_table(4, 3);
        let back = wht_inverse(&wht_forward(&t));
        for (a, b) in back.values().iter().zip(t.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn table_validation() {
        assert!(SpectralTable::new(2, vec![0.0; 3]).is_err());
        assert!(SpectralTable::new(1, vec![0.0, f64::NAN]).is_err());
        assert!(SpectralTable::zeros(31).is_err());
    }

    #[test]
    fn signed_combine_examples() {
        let mut delta = vec![0.0; 8];
        delta[0] = 1.0;
        assert_eq!(signed_combine(&delta).unwrap(), vec![1.0; 8]);
        assert_eq!(signed_combine(&[3.0, 1.5]).unwrap(), vec![4.5, 1.5]);
        assert!(signed_combine(&[1.0, 2.0, 3.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sums: Vec<f64> = (0..8).map(|_| rng.random_range(-5.0..5.0)).collect();
        let fast = signed_combine(&sums).unwrap();
        for t in 0..8u64 {
            let direct: f64 = (0..8u64).map(|c| sign(c, t) * sums[c as usize]).sum();
            assert!((fast[t as usize] - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(gf2_rank(&Gf2Matrix::new(5, vec![0, 0, 0]).unwrap()), 0);
        assert_eq!(gf2_rank(&Gf2Matrix::identity(6).unwrap()), 6);
        assert_eq!(gf2_rank(&Gf2Matrix::new(5, vec![0b10110, 0b10110]).unwrap()), 1);
        assert_eq!(gf2_rank(&Gf2Matrix::new(3, vec![0b011, 0b110, 0b101]).unwrap()), 2);
    }

    #[test]
    fn full_rank_sampling_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = sample_full_rank_matrix(0, 5, &mut rng).unwrap();
        assert_eq!(m.d(), 0);
        let m = sample_full_rank_matrix(3, 3, &mut rng).unwrap();
        assert_eq!(gf2_rank(&m), 3);
        assert!(sample_full_rank_matrix(4, 3, &mut rng).is_err());
    }

    // Number of codimension-d subspaces containing a fixed nonzero v, over all
    // codimension-d subspaces, is (2^{n-d}-1)/(2^n-1).
    #[test]
    fn full_rank_sampling_kernel_frequency() {
        let (d, n, draws) = (4u32, 10u32, 10_000usize);
        let v = 0b1011001110u64;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let hits = (0..draws).filter(|_| sample_full_rank_matrix(d, n, &mut rng).unwrap().apply(v) == 0).count();
        let p = ((1u64 << (n - d)) - 1) as f64 / ((1u64 << n) - 1) as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = hits as f64 / draws as f64;
        assert!((freq - p).abs() <= 3.0 * sigma, "freq {freq} vs {p}");
    }

    proptest! {
        #[test]
        fn parseval_holds(n in 1u32..10, seed in any::<u64>()) {
            let t = random_table(n, seed);
            let coeffs = wht_forward(&t);
            prop_assert!((coeffs.sum_square() - t.mean_square()).abs() <= 1e-10);
        }

        #[test]
        fn round_trip_is_identity(n in 1u32..=12, seed in any::<u64>()) {
            let t = random_table(n, seed);
            let back = wht_inverse(&wht_forward(&t));
            for (a, b) in back.values().iter().zip(t.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn signed_combine_matches_double_loop(d in 0u32..=8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let len = 1usize << d;
            let sums: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = signed_combine(&sums).unwrap();
            for (t, got) in fast.iter().enumerate() {
                let direct: f64 = sums.iter().enumerate().map(|(c, v)| sign(c as u64, t as u64) * v).sum();
                prop_assert!((got - direct).abs() <= 1e-12);
            }
        }

        #[test]
        fn sampled_matrices_have_full_rank(n in 1u32..=62, frac in 0.0f64..=1.0, seed in any::<u64>()) {
            let d = (frac * n as f64).floor() as u32;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = sample_full_rank_matrix(d, n, &mut rng).unwrap();
            prop_assert_eq!(gf2_rank(&m), d as usize);
        }
    }
}
