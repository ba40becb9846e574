//! Sublinear-query estimation of the squared l2 distance from a real function
//! on F_2^n to the nearest Fourier s-sparse function, a sparsity tester built
//! on it, and brute-force ground truth for validating both.
//!
//! - [`cube`]: GF(2) vectors and matrices, characters, Walsh-Hadamard transform.
//! - [`oracle`]: query access to functions and query accounting.
//! - [`hashing`]: bucketing of the spectrum by cosets of a random subspace.
//! - [`estimator`]: top-s energy estimation, distance estimation and testing.
//! - [`exact`]: exact spectra, distances and hashing errors at small n.
//! - [`instances`]: planted, flat and Gaussian lower-bound instances.
//! - [`experiments`]: seeded sweeps that drive the CLI and acceptance suite.

pub mod cube;
pub mod error;
pub mod estimator;
pub mod exact;
pub mod experiments;
pub mod hashing;
pub mod instances;
pub mod oracle;

pub use cube::{chi, gf2_rank, parity_dot, sample_full_rank_matrix, signed_combine, wht_forward, wht_inverse};
pub use cube::{CubePoint, Gf2Matrix, SpectralTable};
pub use error::{Error, Result};
pub use estimator::{
    derive_params, estimate_distance, estimate_top_s_energy, estimate_top_s_energy_naive, ffst_test, DistanceEstimate,
    EnergyReport, EstimatorParams, ResolvedParams, TestVerdict,
};
pub use exact::{exact_distance_to_sparsity, exact_hashing_error, exact_spectrum, exact_top_s_energy, RankedSpectrum};
pub use hashing::{exact_bucket_energies, exact_projection_eval, Bucket, CosetHash};
pub use oracle::{estimate_squared_norm, squared_norm_exact, FunctionOracle, QueryLedger, SparseSpectrum};
