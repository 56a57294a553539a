//! Bipartite entanglement of pure states via the Schmidt spectrum of a
//! contiguous site split.
//!
//! With site 0 as the most significant basis bit, splitting after site
//! `k` makes the amplitude vector a contiguous `2^k x 2^(N-k)` matrix
//! `M[a][b] = amplitudes[a * 2^(N-k) + b]`; the Schmidt spectrum is the
//! squared singular values of `M`. The reduced density matrix itself is
//! never formed outside of test oracles.

use nalgebra::DMatrix;

use crate::error::CoreError;
use crate::states::StateVector;

/// Spectrum values below this are treated as exact zeros: dropped from the
/// spectrum and contributing nothing to the entropy.
pub const SPECTRUM_FLOOR: f64 = 1e-12;

/// Maximum tolerated squared-norm deviation of an input state.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Eigenvalues of the reduced density matrix of the split's first block,
/// descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    pub values: Vec<f64>,
}

impl SchmidtSpectrum {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Schmidt spectrum of `state` split into sites `[0, split_site)` versus
/// the rest: reshape, singular values, square. Costs one SVD of a
/// `2^split x 2^(N-split)` matrix.
pub fn schmidt_spectrum(
    state: &StateVector,
    split_site: usize,
) -> Result<SchmidtSpectrum, CoreError> {
    let n = state.n_sites();
    if split_site < 1 || split_site > n - 1 {
        return Err(CoreError::InvalidSplit {
            split: split_site,
            n_sites: n,
        });
    }
    let norm_sq = state.norm_sqr();
    if (norm_sq - 1.0).abs() > NORM_TOLERANCE {
        return Err(CoreError::NotNormalized {
            norm_sq,
            limit: NORM_TOLERANCE,
        });
    }
    let rows = 1usize << split_site;
    let cols = 1usize << (n - split_site);
    // Filling column-major storage from the contiguous amplitude slice
    // yields the transpose of the row-major reshape; singular values are
    // unaffected by transposition.
    let reshaped = DMatrix::from_column_slice(cols, rows, state.amplitudes());
    let svd = nalgebra::SVD::new_unordered(reshaped, false, false);
    let mut values: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    values.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    while values.last().is_some_and(|v| *v < SPECTRUM_FLOOR * 1e-2) {
        values.pop();
    }
    Ok(SchmidtSpectrum { values })
}

/// `S = -sum_i lambda_i ln(lambda_i)` in nats, with values below
/// [`SPECTRUM_FLOOR`] contributing 0.
pub fn von_neumann_entropy(spectrum: &SchmidtSpectrum) -> f64 {
    spectrum
        .values
        .iter()
        .filter(|&&v| v >= SPECTRUM_FLOOR)
        .map(|&v| -v * v.ln())
        .sum()
}

/// The same entropy rescaled to bits.
pub fn von_neumann_entropy_bits(spectrum: &SchmidtSpectrum) -> f64 {
    von_neumann_entropy(spectrum) / std::f64::consts::LN_2
}

/// Entropy of the equal-size bipartition: first `N/2` sites versus the
/// rest. Requires an even site count.
pub fn half_split_entropy(state: &StateVector) -> Result<f64, CoreError> {
    let n = state.n_sites();
    if n % 2 != 0 {
        return Err(CoreError::OddSiteCount { n_sites: n });
    }
    Ok(von_neumann_entropy(&schmidt_spectrum(state, n / 2)?))
}

/// Closed-form mean entropy of a Haar-random state split into subsystems
/// of dimension `dim_a <= dim_b`: `ln(dim_a) - dim_a / (2 * dim_b)`. This
/// is the large-dimension form; it runs about 4% low at 4x4 and is within
/// 0.1% of the exact ensemble mean from 16x16 up. See
/// [`haar_mean_entropy_exact`] for the finite-size value.
pub fn haar_mean_entropy(dim_a: usize, dim_b: usize) -> f64 {
    let (a, b) = (dim_a.min(dim_b) as f64, dim_a.max(dim_b) as f64);
    a.ln() - a / (2.0 * b)
}

/// Exact ensemble mean of the half-split entropy at any finite dimension:
/// `sum_{k=n+1}^{m*n} 1/k - (m - 1) / (2n)` with `m <= n`. Converges to
/// [`haar_mean_entropy`] as the dimensions grow. O(m*n) time.
pub fn haar_mean_entropy_exact(dim_a: usize, dim_b: usize) -> f64 {
    let (m, n) = (dim_a.min(dim_b), dim_a.max(dim_b));
    let mut tail = 0.0;
    for k in (n + 1)..=(m * n) {
        tail += 1.0 / k as f64;
    }
    tail - (m as f64 - 1.0) / (2.0 * n as f64)
}
