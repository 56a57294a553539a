//! Pure-state representation, reproducible random-state sampling, and
//! expectation values.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::CoreError;
use crate::operators::{apply_pauli_string, HamiltonianKernel, HamiltonianSpec, PauliTerm};

/// Imaginary residue above which an expectation value is reported as a
/// kernel bug rather than float noise.
pub const IMAG_ABORT_LIMIT: f64 = 1e-8;

/// How random states are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateMode {
    /// Normalized i.i.d. complex Gaussian amplitudes: uniform on the unit
    /// sphere of the full Hilbert space.
    #[default]
    Haar,
    /// Tensor product of independently random single-spin states.
    ProductRandom,
}

impl StateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StateMode::Haar => "haar",
            StateMode::ProductRandom => "product-random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "haar" => Some(StateMode::Haar),
            "product-random" => Some(StateMode::ProductRandom),
            _ => None,
        }
    }
}

/// A normalized state of `n_sites` spins: `2^n_sites` complex amplitudes.
/// Site 0 is the most significant bit of the basis index; bit value 0 is
/// spin-up (Z eigenvalue +1).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_sites: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wraps amplitudes after rescaling them to unit norm.
    pub fn normalized(n_sites: usize, mut amplitudes: Vec<Complex64>) -> Result<Self, CoreError> {
        Self::check_len(n_sites, amplitudes.len())?;
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq <= 0.0 || !norm_sq.is_finite() {
            return Err(CoreError::NotNormalized {
                norm_sq,
                limit: 1e-12,
            });
        }
        let scale = 1.0 / norm_sq.sqrt();
        for a in &mut amplitudes {
            *a *= scale;
        }
        Ok(StateVector {
            n_sites,
            amplitudes,
        })
    }

    /// Wraps amplitudes as-is. Used for operator outputs, which are in
    /// general unnormalized.
    pub fn from_raw(n_sites: usize, amplitudes: Vec<Complex64>) -> Result<Self, CoreError> {
        Self::check_len(n_sites, amplitudes.len())?;
        Ok(StateVector {
            n_sites,
            amplitudes,
        })
    }

    pub fn basis_state(n_sites: usize, index: usize) -> Result<Self, CoreError> {
        let dim = 1usize << n_sites;
        if index >= dim {
            return Err(CoreError::DimensionMismatch {
                expected: dim,
                actual: index,
            });
        }
        let mut amplitudes = vec![Complex64::ZERO; dim];
        amplitudes[index] = Complex64::ONE;
        Ok(StateVector {
            n_sites,
            amplitudes,
        })
    }

    fn check_len(n_sites: usize, len: usize) -> Result<(), CoreError> {
        let dim = 1usize
            .checked_shl(n_sites as u32)
            .filter(|_| n_sites >= 1 && n_sites < usize::BITS as usize)
            .ok_or(CoreError::DimensionMismatch {
                expected: 0,
                actual: len,
            })?;
        if len != dim {
            return Err(CoreError::DimensionMismatch {
                expected: dim,
                actual: len,
            });
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>` with `self` conjugated.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64, CoreError> {
        if self.dim() != other.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// A reproducible random stream: a master seed shared by a whole run plus a
/// per-draw stream id. Identical `(master_seed, stream_id)` produce
/// identical draws regardless of thread count or execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream {
            master_seed,
            stream_id,
        }
    }

    /// Packs an h-grid index and a sample index into a stream id.
    pub fn for_grid(master_seed: u64, h_index: usize, sample_index: usize) -> Self {
        RngStream {
            master_seed,
            stream_id: ((h_index as u64) << 32) | sample_index as u64,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Draws a Haar-uniform state: independent standard-normal real and
/// imaginary parts for every amplitude, then one normalization pass.
pub fn random_state(n_sites: usize, stream: &RngStream) -> Result<StateVector, CoreError> {
    if n_sites < 1 {
        return Err(CoreError::InvalidConfig("need at least one site".into()));
    }
    let dim = 1usize << n_sites;
    let mut rng = stream.rng();
    let mut amplitudes = Vec::with_capacity(dim);
    for _ in 0..dim {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        amplitudes.push(Complex64::new(re, im));
    }
    StateVector::normalized(n_sites, amplitudes)
}

/// Draws a product of independent single-spin states: per site, a random
/// normalized 2-component complex Gaussian vector, tensored together in
/// site order.
pub fn random_product_state(n_sites: usize, stream: &RngStream) -> Result<StateVector, CoreError> {
    if n_sites < 1 {
        return Err(CoreError::InvalidConfig("need at least one site".into()));
    }
    let mut rng = stream.rng();
    let mut amplitudes = vec![Complex64::ONE];
    for _ in 0..n_sites {
        let up = Complex64::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        let down = Complex64::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        let norm = (up.norm_sqr() + down.norm_sqr()).sqrt();
        let (up, down) = (up / norm, down / norm);
        let mut next = Vec::with_capacity(amplitudes.len() * 2);
        for a in &amplitudes {
            next.push(a * up);
            next.push(a * down);
        }
        amplitudes = next;
    }
    StateVector::normalized(n_sites, amplitudes)
}

pub fn random_state_with_mode(
    n_sites: usize,
    stream: &RngStream,
    mode: StateMode,
) -> Result<StateVector, CoreError> {
    match mode {
        StateMode::Haar => random_state(n_sites, stream),
        StateMode::ProductRandom => random_product_state(n_sites, stream),
    }
}

fn real_part_checked(value: Complex64) -> Result<f64, CoreError> {
    if value.im.abs() > IMAG_ABORT_LIMIT {
        return Err(CoreError::ImaginaryResidue {
            residue: value.im.abs(),
            limit: IMAG_ABORT_LIMIT,
        });
    }
    Ok(value.re)
}

/// `Re <psi|H|psi>` through the matrix-free kernel. The imaginary residue
/// is float noise for a Hermitian kernel and is discarded; a residue above
/// `IMAG_ABORT_LIMIT` is reported as an error.
pub fn expectation_energy(state: &StateVector, spec: &HamiltonianSpec) -> Result<f64, CoreError> {
    let kernel = HamiltonianKernel::new(spec)?;
    expectation_energy_kernel(state, &kernel)
}

/// Same as [`expectation_energy`] but reusing a prebuilt kernel.
pub fn expectation_energy_kernel(
    state: &StateVector,
    kernel: &HamiltonianKernel,
) -> Result<f64, CoreError> {
    let applied = kernel.apply(state.amplitudes())?;
    let value: Complex64 = state
        .amplitudes()
        .iter()
        .zip(&applied)
        .map(|(a, b)| a.conj() * b)
        .sum();
    real_part_checked(value)
}

/// `Re <psi|P|psi>` for a single Pauli string.
pub fn expectation_pauli(state: &StateVector, term: &PauliTerm) -> Result<f64, CoreError> {
    let applied = apply_pauli_string(state, term)?;
    real_part_checked(state.inner(&applied)?)
}

/// Average magnetization `(1/N) sum_i <Z_i>` together with the per-site
/// `<Z_i>` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Magnetization {
    pub mean: f64,
    pub site_z: Vec<f64>,
}

// The Z-diagonal observables below factor the basis index into a leading
// and a trailing site group, s = a * 2^n_lo + b, and reduce the per-state
// probabilities to per-group marginals first. Sites inside one group are
// then resolved by strided signed sums over a small array instead of a
// bit test per basis state, which keeps the per-sample cost at
// O(2^N + groups * 2^(N/2)).

/// Sum of `xs` with the sign decided by one index bit: blocks of `stride`
/// alternate +/-.
fn signed_sum(xs: &[f64], stride: usize) -> f64 {
    let mut acc = 0.0;
    let mut base = 0;
    while base < xs.len() {
        for x in &xs[base..base + stride] {
            acc += x;
        }
        for x in &xs[base + stride..base + 2 * stride] {
            acc -= x;
        }
        base += 2 * stride;
    }
    acc
}

/// Sum of `xs` signed by the parity of two index bits, given as strides
/// with `stride_a > stride_b`.
fn signed_sum2(xs: &[f64], stride_a: usize, stride_b: usize) -> f64 {
    let mut acc = 0.0;
    for (block, chunk) in xs.chunks_exact(stride_b).enumerate() {
        let offset = block * stride_b;
        let sign_bits = (offset & stride_a != 0) as u8 ^ (offset & stride_b != 0) as u8;
        if sign_bits == 0 {
            for x in chunk {
                acc += x;
            }
        } else {
            for x in chunk {
                acc -= x;
            }
        }
    }
    acc
}

/// Probability marginals over the leading-site group (`hi[a] = sum_b p`)
/// and the trailing-site group (`lo[b] = sum_a p`).
fn group_marginals(amps: &[Complex64], dim_lo: usize) -> (Vec<f64>, Vec<f64>) {
    let dim_hi = amps.len() / dim_lo;
    let mut hi = vec![0.0f64; dim_hi];
    let mut lo = vec![0.0f64; dim_lo];
    for (a, row) in amps.chunks_exact(dim_lo).enumerate() {
        let mut row_sum = 0.0;
        for (b, amp) in row.iter().enumerate() {
            let p = amp.norm_sqr();
            lo[b] += p;
            row_sum += p;
        }
        hi[a] = row_sum;
    }
    (hi, lo)
}

/// Computes every `<Z_i>`: each basis state's probability contributes its
/// Z eigenvalue (+1 for a clear bit, -1 for a set bit) at every site.
pub fn magnetization(state: &StateVector) -> Magnetization {
    let n = state.n_sites();
    let n_lo = n / 2;
    let n_hi = n - n_lo;
    let (hi, lo) = group_marginals(state.amplitudes(), 1 << n_lo);
    let mut site_z = vec![0.0f64; n];
    for (i, z) in site_z.iter_mut().enumerate() {
        *z = if i < n_hi {
            signed_sum(&hi, 1 << (n_hi - 1 - i))
        } else {
            signed_sum(&lo, 1 << (n - 1 - i))
        };
    }
    let mean = site_z.iter().sum::<f64>() / n as f64;
    Magnetization { mean, site_z }
}

/// Computes `<Z_i Z_j>` for every listed pair.
///
/// Pairs within one site group reduce to signed sums over that group's
/// probability marginal; pairs straddling the groups factorize through
/// per-row signed sums over the trailing sites.
pub fn zz_pair_expectations(state: &StateVector, pairs: &[(usize, usize)]) -> Vec<f64> {
    let n = state.n_sites();
    let n_lo = n / 2;
    let n_hi = n - n_lo;
    let dim_lo = 1usize << n_lo;
    let amps = state.amplitudes();
    let dim_hi = amps.len() / dim_lo;

    let ordered: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&(i, j)| (i.min(j), i.max(j)))
        .collect();
    let cross: Vec<(usize, usize, usize)> = ordered
        .iter()
        .enumerate()
        .filter(|&(_, &(i, j))| i < n_hi && j >= n_hi)
        .map(|(k, &(i, j))| (k, i, j - n_hi))
        .collect();

    let mut hi = vec![0.0f64; dim_hi];
    let mut lo = vec![0.0f64; dim_lo];
    let mut p_row = vec![0.0f64; dim_lo];
    let mut row_signed = vec![0.0f64; n_lo];
    let mut acc = vec![0.0f64; pairs.len()];
    for (a, row) in amps.chunks_exact(dim_lo).enumerate() {
        let mut row_sum = 0.0;
        for (b, amp) in row.iter().enumerate() {
            let p = amp.norm_sqr();
            p_row[b] = p;
            lo[b] += p;
            row_sum += p;
        }
        hi[a] = row_sum;
        for (jj, g) in row_signed.iter_mut().enumerate() {
            *g = signed_sum(&p_row, 1 << (n_lo - 1 - jj));
        }
        for &(k, i, jj) in &cross {
            let g = row_signed[jj];
            if a & (1 << (n_hi - 1 - i)) == 0 {
                acc[k] += g;
            } else {
                acc[k] -= g;
            }
        }
    }
    for (k, &(i, j)) in ordered.iter().enumerate() {
        if j < n_hi {
            acc[k] = signed_sum2(&hi, 1 << (n_hi - 1 - i), 1 << (n_hi - 1 - j));
        } else if i >= n_hi {
            acc[k] = signed_sum2(&lo, 1 << (n - 1 - i), 1 << (n - 1 - j));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::operators::{build_hamiltonian_dense, PauliAxis};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn sampled_states_are_normalized() {
        for n in [1, 2, 4, 6] {
            let s = random_state(n, &RngStream::new(42, 7)).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            let p = random_product_state(n, &RngStream::new(42, 7)).unwrap();
            assert!((p.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_streams_reproduce_identical_states() {
        let a = random_state(4, &RngStream::new(9, 123)).unwrap();
        let b = random_state(4, &RngStream::new(9, 123)).unwrap();
        assert_eq!(a.amplitudes(), b.amplitudes());
        let c1 = random_state(4, &RngStream::new(9, 124)).unwrap();
        assert_ne!(a.amplitudes(), c1.amplitudes());
        let d = random_state(4, &RngStream::new(10, 123)).unwrap();
        assert_ne!(a.amplitudes(), d.amplitudes());
    }

    #[test]
    fn grid_stream_ids_pack_h_and_sample_indices() {
        let s = RngStream::for_grid(5, 3, 17);
        assert_eq!(s.stream_id, (3u64 << 32) | 17);
        assert_eq!(RngStream::for_grid(5, 0, 0).stream_id, 0);
    }

    #[test]
    fn mean_z_over_many_samples_is_near_zero() {
        let n_samples = 20_000;
        let term = PauliTerm::single(0, PauliAxis::Z);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for k in 0..n_samples {
            let state = random_state(4, &RngStream::new(31, k)).unwrap();
            let z = expectation_pauli(&state, &term).unwrap();
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / n_samples as f64;
        let var = (sum_sq - sum * sum / n_samples as f64) / (n_samples as f64 - 1.0);
        let bound = 4.0 * (var / n_samples as f64).sqrt();
        assert!(mean.abs() <= bound, "mean {mean} bound {bound}");
    }

    #[test]
    fn all_up_energy_is_minus_eight_on_doubled_two_by_two() {
        let lat = build_lattice(2, 2).unwrap();
        let spec = HamiltonianSpec::new(lat, 1.0, 0.0);
        let up = StateVector::basis_state(4, 0).unwrap();
        assert!((expectation_energy(&up, &spec).unwrap() + 8.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_superposition_energy_is_minus_h_times_n() {
        let lat = build_lattice(2, 2).unwrap();
        let spec = HamiltonianSpec::new(lat, 0.77, 1.0);
        let dim = 16;
        let plus = StateVector::normalized(4, vec![c(1.0); dim]).unwrap();
        assert!((expectation_energy(&plus, &spec).unwrap() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn energy_matches_dense_quadratic_form() {
        for (rows, cols) in [(1, 2), (2, 2), (2, 3)] {
            let lat = build_lattice(rows, cols).unwrap();
            let n = lat.n_sites;
            let spec = HamiltonianSpec::new(lat, 1.0, 1.7);
            let dense = build_hamiltonian_dense(&spec).unwrap();
            for seed in 0..5 {
                let state = random_state(n, &RngStream::new(77, seed)).unwrap();
                let fast = expectation_energy(&state, &spec).unwrap();
                let hv = dense.matvec(state.amplitudes());
                let slow: Complex64 = state
                    .amplitudes()
                    .iter()
                    .zip(&hv)
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                assert!((fast - slow.re).abs() < 1e-10);
                assert!(slow.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pauli_expectation_examples() {
        let up = StateVector::basis_state(2, 0).unwrap();
        assert!((expectation_pauli(&up, &PauliTerm::single(0, PauliAxis::Z)).unwrap() - 1.0).abs() < 1e-12);

        let bell =
            StateVector::normalized(2, vec![c(1.0), Complex64::ZERO, Complex64::ZERO, c(1.0)])
                .unwrap();
        let zz = PauliTerm::zz_pair(0, 1).unwrap();
        assert!((expectation_pauli(&bell, &zz).unwrap() - 1.0).abs() < 1e-12);
        assert!(expectation_pauli(&bell, &PauliTerm::single(0, PauliAxis::Z))
            .unwrap()
            .abs() < 1e-12);
    }

    #[test]
    fn magnetization_examples() {
        let up = StateVector::basis_state(2, 0b00).unwrap();
        assert!((magnetization(&up).mean - 1.0).abs() < 1e-12);

        let down = StateVector::basis_state(2, 0b11).unwrap();
        assert!((magnetization(&down).mean + 1.0).abs() < 1e-12);

        let neel = StateVector::basis_state(4, 0b0101).unwrap();
        let m = magnetization(&neel);
        assert!(m.mean.abs() < 1e-12);
        assert_eq!(m.site_z, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn magnetization_agrees_with_per_site_pauli_expectations() {
        let state = random_state(5, &RngStream::new(3, 3)).unwrap();
        let m = magnetization(&state);
        for site in 0..5 {
            let z = expectation_pauli(&state, &PauliTerm::single(site, PauliAxis::Z)).unwrap();
            assert!((m.site_z[site] - z).abs() < 1e-12);
            assert!(m.site_z[site].abs() <= 1.0 + 1e-12);
        }
        assert!(m.mean.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn pair_expectations_agree_with_pauli_strings() {
        let state = random_state(4, &RngStream::new(8, 1)).unwrap();
        let pairs = [(0, 1), (0, 3), (1, 2), (2, 3)];
        let batch = zz_pair_expectations(&state, &pairs);
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let term = PauliTerm::zz_pair(i, j).unwrap();
            let direct = expectation_pauli(&state, &term).unwrap();
            assert!((batch[k] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn global_phase_changes_no_expectation() {
        let lat = build_lattice(2, 2).unwrap();
        let spec = HamiltonianSpec::new(lat, 1.0, 0.9);
        let state = random_state(4, &RngStream::new(21, 0)).unwrap();
        let phase = Complex64::from_polar(1.0, 1.234);
        let rotated = StateVector::from_raw(
            4,
            state.amplitudes().iter().map(|a| a * phase).collect(),
        )
        .unwrap();
        let e1 = expectation_energy(&state, &spec).unwrap();
        let e2 = expectation_energy(&rotated, &spec).unwrap();
        assert!((e1 - e2).abs() < 1e-12);
        let m1 = magnetization(&state);
        let m2 = magnetization(&rotated);
        assert!((m1.mean - m2.mean).abs() < 1e-12);
    }

    #[test]
    fn product_states_have_unentangled_structure() {
        // For a product state, <Z_i Z_j> factorizes into <Z_i><Z_j>.
        let state = random_product_state(4, &RngStream::new(55, 9)).unwrap();
        let m = magnetization(&state);
        for (i, j) in [(0usize, 1usize), (1, 3), (0, 3)] {
            let zz = zz_pair_expectations(&state, &[(i, j)])[0];
            assert!((zz - m.site_z[i] * m.site_z[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_vector_cannot_be_normalized() {
        assert!(StateVector::normalized(2, vec![Complex64::ZERO; 4]).is_err());
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(StateVector::from_raw(2, vec![Complex64::ZERO; 3]).is_err());
        assert!(StateVector::basis_state(2, 4).is_err());
    }
}
