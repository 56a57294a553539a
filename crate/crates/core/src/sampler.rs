//! The simulation loop: for each field value draw random states, evaluate
//! all observables, and persist the dataset, correlation accumulator, and
//! run manifest.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::entanglement::half_split_entropy;
use crate::error::CoreError;
use crate::lattice::{build_lattice, pairs_at_distance, BondMultiplicityMode, LatticeSpec};
use crate::operators::{HamiltonianKernel, HamiltonianSpec};
use crate::states::{
    expectation_energy_kernel, magnetization, random_state_with_mode, zz_pair_expectations,
    RngStream, StateMode,
};

/// Version stamp written into every manifest; mixed-version runs are
/// rejected at report time.
pub const SCHEMA_VERSION: u32 = 1;

/// Full description of one experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub lattice: LatticeSpec,
    pub coupling_j: f64,
    pub h_values: Vec<f64>,
    pub samples_per_h: usize,
    pub master_seed: u64,
    pub bond_multiplicity_mode: BondMultiplicityMode,
    pub state_mode: StateMode,
    pub record_correlators: bool,
}

impl SweepConfig {
    /// The defaults: J = 1, h from 1.0 to 5.0 in steps of 0.25, 5000
    /// samples per h, wraparound multiplicities honored, Haar states,
    /// correlators recorded.
    pub fn with_defaults(lattice: LatticeSpec, master_seed: u64) -> Self {
        SweepConfig {
            lattice,
            coupling_j: 1.0,
            h_values: h_grid(1.0, 5.0, 0.25).expect("default grid is valid"),
            samples_per_h: 5000,
            master_seed,
            bond_multiplicity_mode: BondMultiplicityMode::Honored,
            state_mode: StateMode::Haar,
            record_correlators: true,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.h_values.is_empty() {
            return Err(CoreError::InvalidConfig("h grid is empty".into()));
        }
        if !self.h_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(CoreError::InvalidConfig(
                "h grid must be strictly ascending".into(),
            ));
        }
        if self.samples_per_h < 1 {
            return Err(CoreError::InvalidConfig(
                "need at least one sample per h".into(),
            ));
        }
        if self.lattice.n_sites % 2 != 0 {
            return Err(CoreError::InvalidConfig(format!(
                "entropy needs an even site count, lattice has {}",
                self.lattice.n_sites
            )));
        }
        Ok(())
    }

    /// The lattice with the configured bond-multiplicity mode applied.
    pub fn effective_lattice(&self) -> LatticeSpec {
        self.lattice.with_multiplicity_mode(self.bond_multiplicity_mode)
    }
}

/// Uniform grid `h_min, h_min + step, ..` up to and including `h_max`
/// (within float tolerance).
pub fn h_grid(h_min: f64, h_max: f64, h_step: f64) -> Result<Vec<f64>, CoreError> {
    if !h_step.is_finite() || h_step <= 0.0 {
        return Err(CoreError::InvalidConfig("h step must be positive".into()));
    }
    if h_max < h_min {
        return Err(CoreError::InvalidConfig("h max is below h min".into()));
    }
    let count = ((h_max - h_min) / h_step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| h_min + i as f64 * h_step).collect())
}

/// One sampled state's observables.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub h: f64,
    pub sample_index: usize,
    pub stream_id: u64,
    pub energy: f64,
    pub magnetization: f64,
    pub entropy: f64,
    pub site_z: Vec<f64>,
}

/// All records of one sweep, in (h index, sample index) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_sites: usize,
    pub records: Vec<SampleRecord>,
}

impl Dataset {
    /// Distinct h values in first-appearance order.
    pub fn h_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.records {
            if out.last() != Some(&r.h) {
                out.push(r.h);
            }
        }
        out
    }
}

/// Running sums for one (h, distance) cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorrelatorCell {
    pub connected_sum: f64,
    pub raw_sum: f64,
    pub count: usize,
}

/// Connected and raw pair correlators accumulated per (h, linear-index
/// distance), averaged over the pairs at each distance per state.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorAccumulator {
    pub n_sites: usize,
    pub h_values: Vec<f64>,
    /// Indexed `[h index][distance - 1]`.
    pub cells: Vec<Vec<CorrelatorCell>>,
}

impl CorrelatorAccumulator {
    pub fn new(n_sites: usize, h_values: Vec<f64>) -> Self {
        let cells = vec![vec![CorrelatorCell::default(); n_sites.saturating_sub(1)]; h_values.len()];
        CorrelatorAccumulator {
            n_sites,
            h_values,
            cells,
        }
    }

    pub fn distances(&self) -> usize {
        self.n_sites.saturating_sub(1)
    }

    /// Folds one state's pair expectations into the (h, distance) cells.
    /// `pair_values` holds `<Z_i Z_j>` for `all_pairs`, which is grouped by
    /// distance via `dist_ranges` (start, length per distance).
    fn accumulate_state(
        &mut self,
        h_index: usize,
        site_z: &[f64],
        pair_values: &[f64],
        all_pairs: &[(usize, usize)],
        dist_ranges: &[(usize, usize)],
    ) {
        for (di, &(start, len)) in dist_ranges.iter().enumerate() {
            let mut connected = 0.0;
            let mut raw = 0.0;
            for k in start..start + len {
                let (i, j) = all_pairs[k];
                let zz = pair_values[k];
                connected += zz - site_z[i] * site_z[j];
                raw += zz;
            }
            let cell = &mut self.cells[h_index][di];
            cell.connected_sum += connected / len as f64;
            cell.raw_sum += raw / len as f64;
            cell.count += 1;
        }
    }

    pub fn is_complete(&self, samples_per_h: usize) -> bool {
        self.cells
            .iter()
            .all(|row| row.iter().all(|c| c.count == samples_per_h))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub dataset: Dataset,
    pub correlators: CorrelatorAccumulator,
}

/// Runs the full grid: `|h_values| * samples_per_h` independent states,
/// each drawn from its own RNG stream and evaluated for energy
/// (matrix-free), per-site `<Z_i>`, magnetization, half-split entropy, and
/// (optionally) all pair correlators.
///
/// Samples are generated in parallel; records and accumulator sums are
/// committed in (h index, sample index) order, so the output is identical
/// for every thread count.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput, CoreError> {
    config.validate()?;
    let lattice = config.effective_lattice();
    let n = lattice.n_sites;

    let mut all_pairs: Vec<(usize, usize)> = Vec::new();
    let mut dist_ranges: Vec<(usize, usize)> = Vec::new();
    for d in 1..n {
        let index = pairs_at_distance(&lattice, d)?;
        dist_ranges.push((all_pairs.len(), index.pairs.len()));
        all_pairs.extend(index.pairs);
    }

    let mut records = Vec::with_capacity(config.h_values.len() * config.samples_per_h);
    let mut correlators = CorrelatorAccumulator::new(n, config.h_values.clone());

    for (h_index, &h) in config.h_values.iter().enumerate() {
        let spec = HamiltonianSpec::new(lattice.clone(), config.coupling_j, h);
        let kernel = HamiltonianKernel::new(&spec)?;
        let results: Vec<Result<(SampleRecord, Vec<f64>), CoreError>> = (0..config.samples_per_h)
            .into_par_iter()
            .map(|sample_index| {
                let stream = RngStream::for_grid(config.master_seed, h_index, sample_index);
                let state = random_state_with_mode(n, &stream, config.state_mode)?;
                let energy = expectation_energy_kernel(&state, &kernel)?;
                let mag = magnetization(&state);
                let entropy = half_split_entropy(&state)?;
                let pair_values = if config.record_correlators {
                    zz_pair_expectations(&state, &all_pairs)
                } else {
                    Vec::new()
                };
                let record = SampleRecord {
                    h,
                    sample_index,
                    stream_id: stream.stream_id,
                    energy,
                    magnetization: mag.mean,
                    entropy,
                    site_z: mag.site_z,
                };
                Ok((record, pair_values))
            })
            .collect();
        for result in results {
            let (record, pair_values) = result?;
            if config.record_correlators {
                correlators.accumulate_state(
                    h_index,
                    &record.site_z,
                    &pair_values,
                    &all_pairs,
                    &dist_ranges,
                );
            }
            records.push(record);
        }
    }

    Ok(SweepOutput {
        dataset: Dataset {
            n_sites: n,
            records,
        },
        correlators,
    })
}

/// Serializes a float with 17 significant digits, enough for an exact
/// round-trip of every finite f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn dataset_header(n_sites: usize) -> String {
    let mut header = String::from("h,sample_index,stream_id,energy,magnetization,entropy");
    for i in 0..n_sites {
        header.push_str(&format!(",z_{i}"));
    }
    header
}

/// Writes the dataset as CSV: fixed header, one row per record, floats
/// with 17 significant digits, LF line endings.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<(), CoreError> {
    let io_err = |e| CoreError::io(path.display().to_string(), e);
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    let mut line = dataset_header(dataset.n_sites);
    line.push('\n');
    w.write_all(line.as_bytes()).map_err(io_err)?;
    for r in &dataset.records {
        line.clear();
        line.push_str(&format_float(r.h));
        line.push_str(&format!(",{},{}", r.sample_index, r.stream_id));
        for v in [r.energy, r.magnetization, r.entropy] {
            line.push(',');
            line.push_str(&format_float(v));
        }
        for z in &r.site_z {
            line.push(',');
            line.push_str(&format_float(*z));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn parse_cell<T: std::str::FromStr>(
    cell: &str,
    path: &Path,
    line_no: usize,
    what: &str,
) -> Result<T, CoreError> {
    cell.parse().map_err(|_| {
        CoreError::parse(
            path.display().to_string(),
            line_no,
            format!("cannot parse {what} from {cell:?}"),
        )
    })
}

/// Reads a dataset back, validating the header and every row's column
/// count; errors name the offending line.
pub fn read_dataset(path: &Path) -> Result<Dataset, CoreError> {
    let text =
        fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| {
        CoreError::parse(path.display().to_string(), 1, "missing header".to_string())
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    let fixed = ["h", "sample_index", "stream_id", "energy", "magnetization", "entropy"];
    if cols.len() <= fixed.len() || cols[..fixed.len()] != fixed {
        return Err(CoreError::parse(
            path.display().to_string(),
            1,
            format!("unexpected header {header:?}"),
        ));
    }
    let n_sites = cols.len() - fixed.len();
    for (i, col) in cols[fixed.len()..].iter().enumerate() {
        if *col != format!("z_{i}") {
            return Err(CoreError::parse(
                path.display().to_string(),
                1,
                format!("unexpected site column {col:?}"),
            ));
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != fixed.len() + n_sites {
            return Err(CoreError::parse(
                path.display().to_string(),
                line_no,
                format!(
                    "expected {} columns, found {}",
                    fixed.len() + n_sites,
                    cells.len()
                ),
            ));
        }
        let mut site_z = Vec::with_capacity(n_sites);
        for cell in &cells[fixed.len()..] {
            site_z.push(parse_cell::<f64>(cell, path, line_no, "site expectation")?);
        }
        records.push(SampleRecord {
            h: parse_cell(cells[0], path, line_no, "h")?,
            sample_index: parse_cell(cells[1], path, line_no, "sample index")?,
            stream_id: parse_cell(cells[2], path, line_no, "stream id")?,
            energy: parse_cell(cells[3], path, line_no, "energy")?,
            magnetization: parse_cell(cells[4], path, line_no, "magnetization")?,
            entropy: parse_cell(cells[5], path, line_no, "entropy")?,
            site_z,
        });
    }
    Ok(Dataset { n_sites, records })
}

/// Writes the per-(h, distance) correlator means. Cells that received no
/// samples are omitted.
pub fn write_correlations(acc: &CorrelatorAccumulator, path: &Path) -> Result<(), CoreError> {
    let io_err = |e| CoreError::io(path.display().to_string(), e);
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(b"n_spins,h,distance,connected_mean,raw_mean,count\n")
        .map_err(io_err)?;
    for (hi, h) in acc.h_values.iter().enumerate() {
        for d in 1..=acc.distances() {
            let cell = &acc.cells[hi][d - 1];
            if cell.count == 0 {
                continue;
            }
            let connected = cell.connected_sum / cell.count as f64;
            let raw = cell.raw_sum / cell.count as f64;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                acc.n_sites,
                format_float(*h),
                d,
                format_float(connected),
                format_float(raw),
                cell.count
            )
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Reads a correlation file back into an accumulator (sums are
/// reconstructed as mean times count).
pub fn read_correlations(path: &Path) -> Result<CorrelatorAccumulator, CoreError> {
    let text =
        fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| {
        CoreError::parse(path.display().to_string(), 1, "missing header".to_string())
    })?;
    if header != "n_spins,h,distance,connected_mean,raw_mean,count" {
        return Err(CoreError::parse(
            path.display().to_string(),
            1,
            format!("unexpected header {header:?}"),
        ));
    }
    let mut n_sites = 0usize;
    let mut h_values: Vec<f64> = Vec::new();
    let mut rows: Vec<(usize, f64, usize, f64, f64, usize)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return Err(CoreError::parse(
                path.display().to_string(),
                line_no,
                format!("expected 6 columns, found {}", cells.len()),
            ));
        }
        let row_sites: usize = parse_cell(cells[0], path, line_no, "spin count")?;
        if n_sites == 0 {
            n_sites = row_sites;
        } else if n_sites != row_sites {
            return Err(CoreError::parse(
                path.display().to_string(),
                line_no,
                format!("spin count changed from {n_sites} to {row_sites}"),
            ));
        }
        let h: f64 = parse_cell(cells[1], path, line_no, "h")?;
        if !h_values.contains(&h) {
            h_values.push(h);
        }
        rows.push((
            row_sites,
            h,
            parse_cell(cells[2], path, line_no, "distance")?,
            parse_cell(cells[3], path, line_no, "connected mean")?,
            parse_cell(cells[4], path, line_no, "raw mean")?,
            parse_cell(cells[5], path, line_no, "count")?,
        ));
    }
    let mut acc = CorrelatorAccumulator::new(n_sites, h_values);
    for (_, h, d, connected, raw, count) in rows {
        let hi = acc.h_values.iter().position(|x| *x == h).expect("h listed");
        if d < 1 || d > acc.distances() {
            return Err(CoreError::parse(
                path.display().to_string(),
                0,
                format!("distance {d} out of range for {n_sites} spins"),
            ));
        }
        let cell = &mut acc.cells[hi][d - 1];
        cell.connected_sum = connected * count as f64;
        cell.raw_sum = raw * count as f64;
        cell.count = count;
    }
    Ok(acc)
}

/// Counters reported alongside a finished sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub records_written: usize,
    pub duration_seconds: f64,
}

/// Writes the run manifest: plain `key=value` lines, fixed order, exact
/// float encoding, enough to reconstruct the sweep configuration.
pub fn write_manifest(
    config: &SweepConfig,
    summary: &RunSummary,
    path: &Path,
) -> Result<(), CoreError> {
    let io_err = |e| CoreError::io(path.display().to_string(), e);
    let h_list: Vec<String> = config.h_values.iter().map(|h| format_float(*h)).collect();
    let mut out = String::new();
    out.push_str(&format!("schema_version={SCHEMA_VERSION}\n"));
    out.push_str(&format!("rows={}\n", config.lattice.rows));
    out.push_str(&format!("cols={}\n", config.lattice.cols));
    out.push_str(&format!("n_sites={}\n", config.lattice.n_sites));
    out.push_str(&format!("coupling_j={}\n", format_float(config.coupling_j)));
    out.push_str(&format!("h_values={}\n", h_list.join(",")));
    out.push_str(&format!("samples_per_h={}\n", config.samples_per_h));
    out.push_str(&format!("master_seed={}\n", config.master_seed));
    out.push_str(&format!(
        "bond_multiplicity_mode={}\n",
        config.bond_multiplicity_mode.as_str()
    ));
    out.push_str(&format!("state_mode={}\n", config.state_mode.as_str()));
    out.push_str(&format!(
        "record_correlators={}\n",
        config.record_correlators
    ));
    out.push_str(&format!("code_version={}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("records_written={}\n", summary.records_written));
    out.push_str(&format!(
        "duration_seconds={}\n",
        format_float(summary.duration_seconds)
    ));
    fs::write(path, out).map_err(io_err)
}

/// Reads a manifest back into the sweep configuration and run summary.
/// Rejects unknown schema versions.
pub fn read_manifest(path: &Path) -> Result<(SweepConfig, RunSummary), CoreError> {
    let text =
        fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let path_str = path.display().to_string();
    let mut pairs = std::collections::BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CoreError::parse(path_str.clone(), idx + 1, format!("expected key=value, got {line:?}"))
        })?;
        pairs.insert(key.to_string(), value.to_string());
    }
    let get = |key: &str| {
        pairs
            .get(key)
            .ok_or_else(|| CoreError::parse(path_str.clone(), 0, format!("missing key {key}")))
    };
    let parse_err =
        |key: &str, value: &str| CoreError::parse(path_str.clone(), 0, format!("bad {key}: {value:?}"));

    let version: u32 = get("schema_version")?
        .parse()
        .map_err(|_| parse_err("schema_version", get("schema_version").unwrap()))?;
    if version != SCHEMA_VERSION {
        return Err(CoreError::parse(
            path_str,
            0,
            format!("unsupported schema version {version}, expected {SCHEMA_VERSION}"),
        ));
    }
    let rows: usize = get("rows")?.parse().map_err(|_| parse_err("rows", get("rows").unwrap()))?;
    let cols: usize = get("cols")?.parse().map_err(|_| parse_err("cols", get("cols").unwrap()))?;
    let lattice = build_lattice(rows, cols)?;
    let n_sites: usize = get("n_sites")?
        .parse()
        .map_err(|_| parse_err("n_sites", get("n_sites").unwrap()))?;
    if n_sites != lattice.n_sites {
        return Err(CoreError::parse(
            path_str,
            0,
            format!("n_sites {n_sites} does not match {rows}x{cols}"),
        ));
    }
    let coupling_j: f64 = get("coupling_j")?
        .parse()
        .map_err(|_| parse_err("coupling_j", get("coupling_j").unwrap()))?;
    let mut h_values = Vec::new();
    for piece in get("h_values")?.split(',') {
        h_values.push(
            piece
                .parse::<f64>()
                .map_err(|_| parse_err("h_values", piece))?,
        );
    }
    let samples_per_h: usize = get("samples_per_h")?
        .parse()
        .map_err(|_| parse_err("samples_per_h", get("samples_per_h").unwrap()))?;
    let master_seed: u64 = get("master_seed")?
        .parse()
        .map_err(|_| parse_err("master_seed", get("master_seed").unwrap()))?;
    let bond_multiplicity_mode = BondMultiplicityMode::parse(get("bond_multiplicity_mode")?)
        .ok_or_else(|| parse_err("bond_multiplicity_mode", get("bond_multiplicity_mode").unwrap()))?;
    let state_mode = StateMode::parse(get("state_mode")?)
        .ok_or_else(|| parse_err("state_mode", get("state_mode").unwrap()))?;
    let record_correlators: bool = get("record_correlators")?
        .parse()
        .map_err(|_| parse_err("record_correlators", get("record_correlators").unwrap()))?;
    let records_written: usize = get("records_written")?
        .parse()
        .map_err(|_| parse_err("records_written", get("records_written").unwrap()))?;
    let duration_seconds: f64 = get("duration_seconds")?
        .parse()
        .map_err(|_| parse_err("duration_seconds", get("duration_seconds").unwrap()))?;

    Ok((
        SweepConfig {
            lattice,
            coupling_j,
            h_values,
            samples_per_h,
            master_seed,
            bond_multiplicity_mode,
            state_mode,
            record_correlators,
        },
        RunSummary {
            records_written,
            duration_seconds,
        },
    ))
}
