//! Square-lattice geometry: site indexing, nearest-neighbor bonds under
//! periodic boundaries, and the pair-distance index used by correlation
//! analysis.

use std::collections::BTreeMap;

use crate::error::CoreError;

/// How periodic-boundary bonds that join the same unordered site pair are
/// counted. A lattice dimension of length 2 produces two distinct edges
/// between each neighbor pair; `Honored` keeps them as multiplicity 2,
/// `Dedup` collapses them to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BondMultiplicityMode {
    #[default]
    Honored,
    Dedup,
}

impl BondMultiplicityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BondMultiplicityMode::Honored => "honored",
            BondMultiplicityMode::Dedup => "dedup",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "honored" => Some(BondMultiplicityMode::Honored),
            "dedup" => Some(BondMultiplicityMode::Dedup),
            _ => None,
        }
    }
}

/// An unordered nearest-neighbor pair `(i, j)` with `i < j` and the number of
/// distinct periodic edges joining it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub multiplicity: u32,
}

/// Square lattice with row-major site indexing (`site = r * cols + c`) and
/// periodic boundary conditions in both directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    pub n_sites: usize,
    pub bonds: Vec<Bond>,
}

impl LatticeSpec {
    /// Sum of bond multiplicities: the number of periodic edges.
    pub fn edge_count(&self) -> u32 {
        self.bonds.iter().map(|b| b.multiplicity).sum()
    }

    /// Returns a copy with every bond multiplicity forced to 1.
    pub fn dedup_bonds(&self) -> LatticeSpec {
        LatticeSpec {
            rows: self.rows,
            cols: self.cols,
            n_sites: self.n_sites,
            bonds: self
                .bonds
                .iter()
                .map(|b| Bond {
                    i: b.i,
                    j: b.j,
                    multiplicity: 1,
                })
                .collect(),
        }
    }

    pub fn with_multiplicity_mode(&self, mode: BondMultiplicityMode) -> LatticeSpec {
        match mode {
            BondMultiplicityMode::Honored => self.clone(),
            BondMultiplicityMode::Dedup => self.dedup_bonds(),
        }
    }
}

/// All site pairs `(i, j)` whose linear-index separation `j - i` equals
/// `distance`, in ascending order of `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairDistanceIndex {
    pub distance: usize,
    pub pairs: Vec<(usize, usize)>,
}

/// Builds the periodic square lattice with `rows * cols` sites.
///
/// Each site is bonded to its right and down neighbors with wraparound.
/// When a dimension has length 2 the wraparound edge coincides with the
/// direct edge and folds into multiplicity 2; a dimension of length 1
/// contributes no bonds in that direction.
pub fn build_lattice(rows: usize, cols: usize) -> Result<LatticeSpec, CoreError> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(CoreError::InvalidLattice {
            rows,
            cols,
            reason: "need at least 2 sites to form a bond",
        });
    }
    let n_sites = rows * cols;
    let mut folded: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    let mut add = |a: usize, b: usize| {
        let key = (a.min(b), a.max(b));
        *folded.entry(key).or_insert(0) += 1;
    };
    for r in 0..rows {
        for c in 0..cols {
            let site = r * cols + c;
            if cols >= 2 {
                add(site, r * cols + (c + 1) % cols);
            }
            if rows >= 2 {
                add(site, ((r + 1) % rows) * cols + c);
            }
        }
    }
    let bonds = folded
        .into_iter()
        .map(|((i, j), multiplicity)| Bond { i, j, multiplicity })
        .collect();
    Ok(LatticeSpec {
        rows,
        cols,
        n_sites,
        bonds,
    })
}

/// All pairs at linear-index distance `d` in an `n_sites` lattice.
pub fn pairs_at_distance(lattice: &LatticeSpec, d: usize) -> Result<PairDistanceIndex, CoreError> {
    let n = lattice.n_sites;
    if d < 1 || d > n - 1 {
        return Err(CoreError::InvalidDistance { distance: d, n_sites: n });
    }
    let pairs = (0..n - d).map(|i| (i, i + d)).collect();
    Ok(PairDistanceIndex { distance: d, pairs })
}
