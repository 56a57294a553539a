//! Pauli operators and the transverse-field Ising Hamiltonian, as dense
//! matrices for small systems and as a matrix-free bitwise kernel for the
//! sampling path.
//!
//! Basis-state convention used everywhere: site 0 is the most significant
//! bit of the basis index, bit value 0 means spin-up (Z eigenvalue +1), so
//! the bit mask for site `i` on `n` sites is `1 << (n - 1 - i)`.

use num_complex::Complex64;

use crate::error::CoreError;
use crate::lattice::LatticeSpec;
use crate::states::StateVector;

/// Largest site count for which dense `2^N x 2^N` operators may be built.
pub const DENSE_SITE_LIMIT: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Z,
}

/// A product of single-site Pauli factors with a real coefficient.
/// Factor sites are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub factors: Vec<(usize, PauliAxis)>,
}

impl PauliTerm {
    pub fn new(coefficient: f64, factors: Vec<(usize, PauliAxis)>) -> Result<Self, CoreError> {
        if factors.is_empty() {
            return Err(CoreError::InvalidConfig(
                "Pauli term needs at least one factor".into(),
            ));
        }
        if !factors.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(CoreError::InvalidConfig(
                "Pauli term sites must be strictly increasing".into(),
            ));
        }
        Ok(PauliTerm {
            coefficient,
            factors,
        })
    }

    /// Single-site Pauli with coefficient 1.
    pub fn single(site: usize, axis: PauliAxis) -> Self {
        PauliTerm {
            coefficient: 1.0,
            factors: vec![(site, axis)],
        }
    }

    /// `Z_i Z_j` with coefficient 1 (`i < j` enforced by construction).
    pub fn zz_pair(i: usize, j: usize) -> Result<Self, CoreError> {
        PauliTerm::new(1.0, vec![(i, PauliAxis::Z), (j, PauliAxis::Z)])
    }

    /// Combined bit mask of the X factors (the bits the term flips).
    fn flip_mask(&self, n_sites: usize) -> usize {
        self.factors
            .iter()
            .filter(|(_, a)| *a == PauliAxis::X)
            .fold(0, |m, (s, _)| m | site_mask(n_sites, *s))
    }

    /// Combined bit mask of the Z factors (the bits that decide the sign).
    fn z_mask(&self, n_sites: usize) -> usize {
        self.factors
            .iter()
            .filter(|(_, a)| *a == PauliAxis::Z)
            .fold(0, |m, (s, _)| m | site_mask(n_sites, *s))
    }

    fn max_site(&self) -> usize {
        self.factors.last().map(|(s, _)| *s).unwrap_or(0)
    }
}

/// The transverse-field Ising Hamiltonian
/// `H = -J * sum_bonds m_ij Z_i Z_j - h * sum_i X_i`
/// as an explicit term list over a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub lattice: LatticeSpec,
    pub coupling_j: f64,
    pub field_h: f64,
    pub terms: Vec<PauliTerm>,
}

impl HamiltonianSpec {
    pub fn new(lattice: LatticeSpec, coupling_j: f64, field_h: f64) -> Self {
        let mut terms = Vec::with_capacity(lattice.bonds.len() + lattice.n_sites);
        for b in &lattice.bonds {
            terms.push(PauliTerm {
                coefficient: -coupling_j * f64::from(b.multiplicity),
                factors: vec![(b.i, PauliAxis::Z), (b.j, PauliAxis::Z)],
            });
        }
        for site in 0..lattice.n_sites {
            terms.push(PauliTerm {
                coefficient: -field_h,
                factors: vec![(site, PauliAxis::X)],
            });
        }
        HamiltonianSpec {
            lattice,
            coupling_j,
            field_h,
            terms,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.lattice.n_sites
    }
}

/// Row-major dense complex matrix of dimension `2^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub dimension: usize,
    pub entries: Vec<Complex64>,
}

impl DenseOperator {
    pub fn zeros(dimension: usize) -> Self {
        DenseOperator {
            dimension,
            entries: vec![Complex64::ZERO; dimension * dimension],
        }
    }

    pub fn identity(dimension: usize) -> Self {
        let mut op = DenseOperator::zeros(dimension);
        for k in 0..dimension {
            op.entries[k * dimension + k] = Complex64::ONE;
        }
        op
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dimension + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dimension + col] = value;
    }

    pub fn add_at(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dimension + col] += value;
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dimension).map(|k| self.get(k, k)).sum()
    }

    pub fn matmul(&self, other: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dimension, other.dimension);
        let d = self.dimension;
        let mut out = DenseOperator::zeros(d);
        for r in 0..d {
            for k in 0..d {
                let a = self.get(r, k);
                if a == Complex64::ZERO {
                    continue;
                }
                for c in 0..d {
                    out.entries[r * d + c] += a * other.entries[k * d + c];
                }
            }
        }
        out
    }

    pub fn matvec(&self, amps: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dimension, amps.len());
        let d = self.dimension;
        let mut out = vec![Complex64::ZERO; d];
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::ZERO;
            for (c, a) in amps.iter().enumerate() {
                acc += self.entries[r * d + c] * a;
            }
            *o = acc;
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> DenseOperator {
        DenseOperator {
            dimension: self.dimension,
            entries: self.entries.iter().map(|e| e * factor).collect(),
        }
    }

    pub fn add(&self, other: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dimension, other.dimension);
        DenseOperator {
            dimension: self.dimension,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        assert_eq!(self.dimension, other.dimension);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dimension;
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_fn(self.dimension, self.dimension, |r, c| self.get(r, c))
    }
}

pub fn site_mask(n_sites: usize, site: usize) -> usize {
    1 << (n_sites - 1 - site)
}

/// Z eigenvalue of `site` in basis state `index`: +1 for a clear bit
/// (spin-up), -1 for a set bit.
pub fn z_sign(n_sites: usize, site: usize, index: usize) -> f64 {
    if index & site_mask(n_sites, site) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_dense_guard(n_sites: usize) -> Result<(), CoreError> {
    if n_sites > DENSE_SITE_LIMIT {
        return Err(CoreError::DenseGuard {
            n_sites,
            limit: DENSE_SITE_LIMIT,
        });
    }
    Ok(())
}

/// The single-site Pauli `axis` on `site`, extended to `n_sites` spins by
/// identity factors on every other site.
pub fn extended_pauli(
    n_sites: usize,
    site: usize,
    axis: PauliAxis,
) -> Result<DenseOperator, CoreError> {
    if site >= n_sites {
        return Err(CoreError::SiteOutOfRange { site, n_sites });
    }
    check_dense_guard(n_sites)?;
    let dim = 1 << n_sites;
    let mask = site_mask(n_sites, site);
    let mut op = DenseOperator::zeros(dim);
    match axis {
        PauliAxis::Z => {
            for s in 0..dim {
                let sign = if s & mask == 0 { 1.0 } else { -1.0 };
                op.set(s, s, Complex64::new(sign, 0.0));
            }
        }
        PauliAxis::X => {
            for s in 0..dim {
                op.set(s ^ mask, s, Complex64::ONE);
            }
        }
    }
    Ok(op)
}

/// Realizes the Hamiltonian as an explicit dense matrix. Test-and-oracle
/// path only; the sampling loop never calls this.
pub fn build_hamiltonian_dense(spec: &HamiltonianSpec) -> Result<DenseOperator, CoreError> {
    let n = spec.n_sites();
    check_dense_guard(n)?;
    let dim = 1 << n;
    let mut op = DenseOperator::zeros(dim);
    for term in &spec.terms {
        if term.max_site() >= n {
            return Err(CoreError::SiteOutOfRange {
                site: term.max_site(),
                n_sites: n,
            });
        }
        let flip = term.flip_mask(n);
        let zmask = term.z_mask(n);
        for s in 0..dim {
            let sign = parity_sign(s & zmask);
            op.add_at(s ^ flip, s, Complex64::new(term.coefficient * sign, 0.0));
        }
    }
    Ok(op)
}

#[inline]
fn parity_sign(bits: usize) -> f64 {
    if bits.count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone)]
struct OffDiagTerm {
    flip: usize,
    zmask: usize,
    coefficient: f64,
}

/// Matrix-free realization of a Hamiltonian: a precomputed diagonal for the
/// pure-Z terms plus a flip/sign rule per off-diagonal term. Applying it
/// costs `O(2^N * (diagonal terms + off-diagonal terms))` and never builds
/// a `2^N x 2^N` matrix.
#[derive(Debug, Clone)]
pub struct HamiltonianKernel {
    n_sites: usize,
    diag: Vec<f64>,
    offdiag: Vec<OffDiagTerm>,
}

impl HamiltonianKernel {
    pub fn new(spec: &HamiltonianSpec) -> Result<Self, CoreError> {
        let n = spec.n_sites();
        let dim = 1usize << n;
        let mut diag = vec![0.0f64; dim];
        let mut offdiag = Vec::new();
        for term in &spec.terms {
            if term.max_site() >= n {
                return Err(CoreError::SiteOutOfRange {
                    site: term.max_site(),
                    n_sites: n,
                });
            }
            let flip = term.flip_mask(n);
            let zmask = term.z_mask(n);
            if flip == 0 {
                for (s, d) in diag.iter_mut().enumerate() {
                    *d += term.coefficient * parity_sign(s & zmask);
                }
            } else {
                offdiag.push(OffDiagTerm {
                    flip,
                    zmask,
                    coefficient: term.coefficient,
                });
            }
        }
        Ok(HamiltonianKernel {
            n_sites: n,
            diag,
            offdiag,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// Writes `H * amps` into `out`.
    pub fn apply_into(&self, amps: &[Complex64], out: &mut [Complex64]) -> Result<(), CoreError> {
        let dim = self.dim();
        if amps.len() != dim {
            return Err(CoreError::DimensionMismatch {
                expected: dim,
                actual: amps.len(),
            });
        }
        if out.len() != dim {
            return Err(CoreError::DimensionMismatch {
                expected: dim,
                actual: out.len(),
            });
        }
        for s in 0..dim {
            out[s] = self.diag[s] * amps[s];
        }
        for t in &self.offdiag {
            if t.zmask == 0 {
                for (s, o) in out.iter_mut().enumerate() {
                    *o += t.coefficient * amps[s ^ t.flip];
                }
            } else {
                for (s, o) in out.iter_mut().enumerate() {
                    let src = s ^ t.flip;
                    *o += t.coefficient * parity_sign(src & t.zmask) * amps[src];
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, amps: &[Complex64]) -> Result<Vec<Complex64>, CoreError> {
        let mut out = vec![Complex64::ZERO; self.dim()];
        self.apply_into(amps, &mut out)?;
        Ok(out)
    }
}

/// `H |psi>` without materializing `H`: the pure-Z part scales each
/// amplitude by a precomputed sign sum, each X term adds the amplitude at
/// the bit-flipped index. The result is in general unnormalized.
pub fn apply_hamiltonian(
    state: &StateVector,
    spec: &HamiltonianSpec,
) -> Result<StateVector, CoreError> {
    let kernel = HamiltonianKernel::new(spec)?;
    let out = kernel.apply(state.amplitudes())?;
    StateVector::from_raw(state.n_sites(), out)
}

/// Applies a single Pauli string: X factors flip bits, Z factors contribute
/// a sign from the source basis state. The result is in general
/// unnormalized (it is scaled by the term coefficient).
pub fn apply_pauli_string(state: &StateVector, term: &PauliTerm) -> Result<StateVector, CoreError> {
    let n = state.n_sites();
    if term.max_site() >= n {
        return Err(CoreError::SiteOutOfRange {
            site: term.max_site(),
            n_sites: n,
        });
    }
    let dim = 1usize << n;
    let amps = state.amplitudes();
    let flip = term.flip_mask(n);
    let zmask = term.z_mask(n);
    let mut out = vec![Complex64::ZERO; dim];
    for (s, o) in out.iter_mut().enumerate() {
        let src = s ^ flip;
        *o = term.coefficient * parity_sign(src & zmask) * amps[src];
    }
    StateVector::from_raw(n, out)
}
