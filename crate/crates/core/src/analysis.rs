//! Post-processing of sampled datasets: summary statistics per field value,
//! correlation tables, finite-difference derivatives of the energy curve,
//! histograms, and plain CSV plot data.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::CoreError;
use crate::sampler::{format_float, CorrelatorAccumulator, Dataset};

/// Which observable a summary row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Energy,
    Magnetization,
    Entropy,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::Energy, Quantity::Magnetization, Quantity::Entropy];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Energy => "energy",
            Quantity::Magnetization => "magnetization",
            Quantity::Entropy => "entropy",
        }
    }
}

/// One-pass mean and variance accumulator (Welford's recurrence), stable
/// against the catastrophic cancellation a sum-of-squares approach hits.
#[derive(Debug, Clone, Copy)]
pub struct StreamingStats {
    count: usize,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Default for StreamingStats {
    fn default() -> Self {
        StreamingStats {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl StreamingStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub h: f64,
    pub quantity: Quantity,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Per-(h, observable) statistics, h-major in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub n_sites: usize,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn row(&self, h: f64, quantity: Quantity) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.h == h && r.quantity == quantity)
    }
}

fn group_indices_by_h(dataset: &Dataset) -> (Vec<f64>, Vec<Vec<usize>>) {
    let mut h_values: Vec<f64> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (idx, record) in dataset.records.iter().enumerate() {
        match h_values.iter().position(|h| h.to_bits() == record.h.to_bits()) {
            Some(gi) => groups[gi].push(idx),
            None => {
                h_values.push(record.h);
                groups.push(vec![idx]);
            }
        }
    }
    (h_values, groups)
}

/// Reduces a dataset to per-(h, observable) mean, unbiased variance, min,
/// max, and count.
pub fn summarize(dataset: &Dataset) -> Result<SummaryTable, CoreError> {
    if dataset.records.is_empty() {
        return Err(CoreError::EmptyInput("dataset"));
    }
    let (h_values, groups) = group_indices_by_h(dataset);
    let mut rows = Vec::with_capacity(h_values.len() * Quantity::ALL.len());
    for (h, group) in h_values.iter().zip(&groups) {
        for quantity in Quantity::ALL {
            let mut stats = StreamingStats::default();
            for &idx in group {
                let r = &dataset.records[idx];
                stats.push(match quantity {
                    Quantity::Energy => r.energy,
                    Quantity::Magnetization => r.magnetization,
                    Quantity::Entropy => r.entropy,
                });
            }
            rows.push(SummaryRow {
                h: *h,
                quantity,
                mean: stats.mean(),
                variance: stats.variance(),
                min: stats.min(),
                max: stats.max(),
                count: stats.count(),
            });
        }
    }
    Ok(SummaryTable {
        n_sites: dataset.n_sites,
        rows,
    })
}

pub fn write_summary(table: &SummaryTable, path: &Path) -> Result<(), CoreError> {
    let io_err = |e| CoreError::io(path.display().to_string(), e);
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(b"h,quantity,mean,variance,min,max,count\n")
        .map_err(io_err)?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            format_float(r.h),
            r.quantity.as_str(),
            format_float(r.mean),
            format_float(r.variance),
            format_float(r.min),
            format_float(r.max),
            r.count
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub distance: usize,
    pub connected_mean: f64,
    pub raw_mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationPerH {
    pub h: f64,
    pub distance: usize,
    pub connected_mean: f64,
    pub raw_mean: f64,
    pub count: usize,
}

/// Correlators pooled across the field grid (each sampled state weighted
/// equally), with the per-h breakdown kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    pub n_sites: usize,
    pub pooled: Vec<CorrelationRow>,
    pub per_h: Vec<CorrelationPerH>,
}

pub fn correlation_table(acc: &CorrelatorAccumulator) -> Result<CorrelationTable, CoreError> {
    if acc.h_values.is_empty() || acc.distances() == 0 {
        return Err(CoreError::EmptyInput("correlator accumulator"));
    }
    let mut pooled = Vec::new();
    let mut per_h = Vec::new();
    for d in 1..=acc.distances() {
        let mut connected_sum = 0.0;
        let mut raw_sum = 0.0;
        let mut count = 0usize;
        for (hi, h) in acc.h_values.iter().enumerate() {
            let cell = &acc.cells[hi][d - 1];
            if cell.count == 0 {
                continue;
            }
            connected_sum += cell.connected_sum;
            raw_sum += cell.raw_sum;
            count += cell.count;
            per_h.push(CorrelationPerH {
                h: *h,
                distance: d,
                connected_mean: cell.connected_sum / cell.count as f64,
                raw_mean: cell.raw_sum / cell.count as f64,
                count: cell.count,
            });
        }
        if count > 0 {
            pooled.push(CorrelationRow {
                distance: d,
                connected_mean: connected_sum / count as f64,
                raw_mean: raw_sum / count as f64,
                count,
            });
        }
    }
    if pooled.is_empty() {
        return Err(CoreError::IncompleteAccumulator(
            "no correlator cells hold any samples".into(),
        ));
    }
    per_h.sort_by(|a, b| {
        a.h.partial_cmp(&b.h)
            .unwrap()
            .then(a.distance.cmp(&b.distance))
    });
    Ok(CorrelationTable {
        n_sites: acc.n_sites,
        pooled,
        per_h,
    })
}

pub fn write_correlation_table(table: &CorrelationTable, path: &Path) -> Result<(), CoreError> {
    let io_err = |e| CoreError::io(path.display().to_string(), e);
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(b"distance,connected_mean,raw_mean,count\n")
        .map_err(io_err)?;
    for r in &table.pooled {
        writeln!(
            w,
            "{},{},{},{}",
            r.distance,
            format_float(r.connected_mean),
            format_float(r.raw_mean),
            r.count
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// A derivative estimate along the field grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSeries {
    pub order: u32,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// True when the boundary values are copies of the nearest interior
    /// stencil rather than genuine boundary estimates (second order only).
    pub endpoints_copied: bool,
}

fn check_uniform_grid(grid: &[f64]) -> Result<f64, CoreError> {
    if grid.len() < 3 {
        return Err(CoreError::TooFewPoints {
            needed: 3,
            got: grid.len(),
        });
    }
    let step = grid[1] - grid[0];
    if !step.is_finite() || step <= 0.0 {
        return Err(CoreError::NonUniformGrid);
    }
    for w in grid.windows(2) {
        let d = w[1] - w[0];
        if !d.is_finite() || d <= 0.0 || ((d - step) / step).abs() > 1e-9 {
            return Err(CoreError::NonUniformGrid);
        }
    }
    Ok(step)
}

/// First or second derivative on a uniform ascending grid.
///
/// Order 1 uses central differences inside and one-sided three-point
/// stencils of the same accuracy at both ends, so linear and quadratic
/// inputs differentiate exactly. Order 2 uses the central three-point
/// second difference; the two boundary values are copied from the nearest
/// interior point and flagged via `endpoints_copied`.
pub fn finite_difference(
    grid: &[f64],
    values: &[f64],
    order: u32,
) -> Result<DerivativeSeries, CoreError> {
    if grid.len() != values.len() {
        return Err(CoreError::DimensionMismatch {
            expected: grid.len(),
            actual: values.len(),
        });
    }
    let step = check_uniform_grid(grid)?;
    let n = grid.len();
    let mut out = vec![0.0; n];
    match order {
        1 => {
            for i in 1..n - 1 {
                out[i] = (values[i + 1] - values[i - 1]) / (2.0 * step);
            }
            out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * step);
            out[n - 1] =
                (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * step);
        }
        2 => {
            for i in 1..n - 1 {
                out[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (step * step);
            }
            out[0] = out[1];
            out[n - 1] = out[n - 2];
        }
        other => {
            return Err(CoreError::InvalidConfig(format!(
                "derivative order must be 1 or 2, got {other}"
            )));
        }
    }
    Ok(DerivativeSeries {
        order,
        grid: grid.to_vec(),
        values: out,
        endpoints_copied: order == 2,
    })
}

/// Per-sample energy derivatives, aggregated across samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDerivative {
    pub order: u32,
    pub grid: Vec<f64>,
    /// Mean over samples of the per-sample derivative at each grid point.
    pub mean: Vec<f64>,
    /// Unbiased variance of the per-sample derivatives.
    pub variance: Vec<f64>,
    pub samples: usize,
    pub endpoints_copied: bool,
}

/// Differentiates each sample's energy curve separately (records paired by
/// sample index across the h grid) and averages the results. Because the
/// stencils are linear, the mean curve agrees with differentiating the
/// mean energy directly.
pub fn paired_sample_derivative(
    dataset: &Dataset,
    order: u32,
) -> Result<PairedDerivative, CoreError> {
    if dataset.records.is_empty() {
        return Err(CoreError::EmptyInput("dataset"));
    }
    let (h_values, groups) = group_indices_by_h(dataset);
    let samples = groups[0].len();
    if groups.iter().any(|g| g.len() != samples) {
        return Err(CoreError::RaggedSamples);
    }
    for group in &groups {
        for slot in 0..samples {
            if dataset.records[group[slot]].sample_index
                != dataset.records[groups[0][slot]].sample_index
            {
                return Err(CoreError::RaggedSamples);
            }
        }
    }
    let mut stats: Vec<StreamingStats> = vec![StreamingStats::default(); h_values.len()];
    let mut curve = vec![0.0; h_values.len()];
    let mut endpoints_copied = false;
    for slot in 0..samples {
        for (gi, group) in groups.iter().enumerate() {
            curve[gi] = dataset.records[group[slot]].energy;
        }
        let series = finite_difference(&h_values, &curve, order)?;
        endpoints_copied = series.endpoints_copied;
        for (stat, v) in stats.iter_mut().zip(&series.values) {
            stat.push(*v);
        }
    }
    Ok(PairedDerivative {
        order,
        grid: h_values,
        mean: stats.iter().map(|s| s.mean()).collect(),
        variance: stats.iter().map(|s| s.variance()).collect(),
        samples,
        endpoints_copied,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Lower and upper edge of one bin.
    pub fn edges(&self, bin: usize) -> (f64, f64) {
        (
            self.min + bin as f64 * self.bin_width,
            self.min + (bin + 1) as f64 * self.bin_width,
        )
    }
}

/// Uniform-bin histogram over `[min, max]`; the maximum lands in the last
/// bin, and constant data collapses to a single bin.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram, CoreError> {
    if values.is_empty() {
        return Err(CoreError::EmptyInput("histogram"));
    }
    if bins == 0 {
        return Err(CoreError::InvalidConfig("need at least one bin".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::InvalidConfig(
            "histogram input contains a non-finite value".into(),
        ));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(Histogram {
            min,
            max,
            bin_width: 0.0,
            counts: vec![values.len() as u64],
        });
    }
    let width = (max - min) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = (((v - min) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram {
        min,
        max,
        bin_width: width,
        counts,
    })
}

pub fn write_histogram(hist: &Histogram, path: &Path) -> Result<(), CoreError> {
    let io_err = |e| CoreError::io(path.display().to_string(), e);
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(b"bin_low,bin_high,count\n").map_err(io_err)?;
    for (i, count) in hist.counts.iter().enumerate() {
        let (low, high) = hist.edges(i);
        writeln!(w, "{},{},{}", format_float(low), format_float(high), count)
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn write_rows(path: &Path, header: &str, rows: &[String]) -> Result<(), CoreError> {
    let io_err = |e| CoreError::io(path.display().to_string(), e);
    let mut out = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err)
}

/// Writes the standard set of plain-CSV plot inputs into `out_dir`:
/// mean curves per observable, the energy-variance scaling row, pooled
/// correlations versus distance, first and second derivatives of the mean
/// energy, and one histogram per observable. Returns the written paths.
/// Reruns over the same dataset produce byte-identical files.
pub fn emit_plot_data(
    dataset: &Dataset,
    correlators: Option<&CorrelatorAccumulator>,
    bins: usize,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CoreError> {
    let summary = summarize(dataset)?;
    fs::create_dir_all(out_dir).map_err(|e| CoreError::io(out_dir.display().to_string(), e))?;
    let mut written = Vec::new();

    for quantity in Quantity::ALL {
        let path = out_dir.join(format!("mean_{}_vs_h.csv", quantity.as_str()));
        let rows: Vec<String> = summary
            .rows
            .iter()
            .filter(|r| r.quantity == quantity)
            .map(|r| {
                format!(
                    "{},{},{},{}",
                    format_float(r.h),
                    format_float(r.mean),
                    format_float(r.variance),
                    r.count
                )
            })
            .collect();
        write_rows(&path, "h,mean,variance,count", &rows)?;
        written.push(path);
    }

    let path = out_dir.join("energy_variance_vs_n.csv");
    let rows: Vec<String> = summary
        .rows
        .iter()
        .filter(|r| r.quantity == Quantity::Energy)
        .map(|r| {
            format!(
                "{},{},{},{}",
                summary.n_sites,
                format_float(r.h),
                format_float(r.variance),
                r.count
            )
        })
        .collect();
    write_rows(&path, "n_spins,h,energy_variance,count", &rows)?;
    written.push(path);

    let path = out_dir.join("correlation_vs_distance.csv");
    let rows: Vec<String> = match correlators {
        Some(acc) => {
            let table = correlation_table(acc)?;
            table
                .pooled
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{},{}",
                        r.distance,
                        format_float(r.connected_mean),
                        format_float(r.raw_mean),
                        r.count
                    )
                })
                .collect()
        }
        None => Vec::new(),
    };
    write_rows(&path, "distance,connected_mean,raw_mean,count", &rows)?;
    written.push(path);

    let grid: Vec<f64> = summary
        .rows
        .iter()
        .filter(|r| r.quantity == Quantity::Energy)
        .map(|r| r.h)
        .collect();
    let mean_energy: Vec<f64> = summary
        .rows
        .iter()
        .filter(|r| r.quantity == Quantity::Energy)
        .map(|r| r.mean)
        .collect();
    for order in [1u32, 2] {
        let path = out_dir.join(format!("energy_derivative_{order}_vs_h.csv"));
        let rows: Vec<String> = if grid.len() >= 3 {
            let series = finite_difference(&grid, &mean_energy, order)?;
            series
                .grid
                .iter()
                .zip(&series.values)
                .map(|(h, v)| {
                    format!(
                        "{},{},{}",
                        format_float(*h),
                        format_float(*v),
                        series.endpoints_copied
                    )
                })
                .collect()
        } else {
            Vec::new()
        };
        write_rows(&path, "h,derivative,endpoints_copied", &rows)?;
        written.push(path);
    }

    for quantity in Quantity::ALL {
        let values: Vec<f64> = dataset
            .records
            .iter()
            .map(|r| match quantity {
                Quantity::Energy => r.energy,
                Quantity::Magnetization => r.magnetization,
                Quantity::Entropy => r.entropy,
            })
            .collect();
        let hist = histogram(&values, bins)?;
        let path = out_dir.join(format!("{}_histogram.csv", quantity.as_str()));
        write_histogram(&hist, &path)?;
        written.push(path);
    }

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::sampler::{run_sweep, SampleRecord, SweepConfig};
    use crate::states::{magnetization, random_state, zz_pair_expectations, RngStream};
    use rand::Rng;
    use rand::SeedableRng;

    fn record(h: f64, sample_index: usize, energy: f64) -> SampleRecord {
        SampleRecord {
            h,
            sample_index,
            stream_id: sample_index as u64,
            energy,
            magnetization: energy / 10.0,
            entropy: energy.abs(),
            site_z: vec![0.0, 0.0],
        }
    }

    fn toy_dataset() -> Dataset {
        Dataset {
            n_sites: 2,
            records: vec![
                record(1.0, 0, 1.0),
                record(1.0, 1, 2.0),
                record(1.0, 2, 3.0),
                record(2.0, 0, 5.0),
                record(2.0, 1, 7.0),
                record(2.0, 2, 9.0),
            ],
        }
    }

    #[test]
    fn summary_matches_hand_computed_statistics() {
        let table = summarize(&toy_dataset()).unwrap();
        assert_eq!(table.rows.len(), 6);
        let energy = table.row(1.0, Quantity::Energy).unwrap();
        assert_eq!(energy.mean, 2.0);
        assert_eq!(energy.variance, 1.0);
        assert_eq!(energy.min, 1.0);
        assert_eq!(energy.max, 3.0);
        assert_eq!(energy.count, 3);
        let energy_2 = table.row(2.0, Quantity::Energy).unwrap();
        assert_eq!(energy_2.mean, 7.0);
        assert_eq!(energy_2.variance, 4.0);
        let mag = table.row(1.0, Quantity::Magnetization).unwrap();
        assert!((mag.mean - 0.2).abs() < 1e-15);
    }

    #[test]
    fn summary_rejects_an_empty_dataset() {
        let dataset = Dataset {
            n_sites: 2,
            records: vec![],
        };
        assert!(matches!(
            summarize(&dataset),
            Err(CoreError::EmptyInput("dataset"))
        ));
    }

    #[test]
    fn streaming_variance_agrees_with_two_pass_on_shifted_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let values: Vec<f64> = (0..1_000_000)
            .map(|_| 1.0e6 + rng.gen::<f64>())
            .collect();
        let mut stats = StreamingStats::default();
        for &v in &values {
            stats.push(v);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let two_pass = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (values.len() - 1) as f64;
        assert!((stats.variance() - two_pass).abs() / two_pass < 1e-9);
        assert!((stats.mean() - mean).abs() / mean.abs() < 1e-12);
    }

    #[test]
    fn correlation_table_pools_cells_across_h() {
        let mut acc = CorrelatorAccumulator::new(3, vec![1.0, 2.0]);
        acc.cells[0][0].connected_sum = 2.0;
        acc.cells[0][0].raw_sum = 4.0;
        acc.cells[0][0].count = 2;
        acc.cells[1][0].connected_sum = 4.0;
        acc.cells[1][0].raw_sum = 2.0;
        acc.cells[1][0].count = 2;
        acc.cells[0][1].connected_sum = 1.0;
        acc.cells[0][1].raw_sum = 1.0;
        acc.cells[0][1].count = 2;
        acc.cells[1][1].connected_sum = 0.0;
        acc.cells[1][1].raw_sum = 0.0;
        acc.cells[1][1].count = 2;
        let table = correlation_table(&acc).unwrap();
        assert_eq!(table.pooled.len(), 2);
        assert_eq!(table.pooled[0].distance, 1);
        assert_eq!(table.pooled[0].connected_mean, 1.5);
        assert_eq!(table.pooled[0].raw_mean, 1.5);
        assert_eq!(table.pooled[0].count, 4);
        assert_eq!(table.pooled[1].connected_mean, 0.25);
        assert_eq!(table.per_h.len(), 4);
        assert_eq!(table.per_h[0].h, 1.0);
        assert_eq!(table.per_h[0].connected_mean, 1.0);
    }

    #[test]
    fn connected_correlators_ignore_a_global_spin_flip() {
        let stream = RngStream::new(3, 0);
        let state = random_state(4, &stream).unwrap();
        let pairs = vec![(0, 1), (1, 2), (0, 3)];
        let zz = zz_pair_expectations(&state, &pairs);
        let z = magnetization(&state).site_z;

        let flipped_amps: Vec<_> = (0..state.dim())
            .map(|s| state.amplitudes()[s ^ (state.dim() - 1)])
            .collect();
        let flipped =
            crate::states::StateVector::normalized(4, flipped_amps).unwrap();
        let zz_f = zz_pair_expectations(&flipped, &pairs);
        let z_f = magnetization(&flipped).site_z;

        for (k, &(i, j)) in pairs.iter().enumerate() {
            let connected = zz[k] - z[i] * z[j];
            let connected_f = zz_f[k] - z_f[i] * z_f[j];
            assert!((connected - connected_f).abs() < 1e-12);
            assert!((z[i] + z_f[i]).abs() < 1e-12, "single-site signs flip");
        }
    }

    #[test]
    fn first_derivative_is_exact_on_linear_and_quadratic_data() {
        let grid: Vec<f64> = (0..9).map(|i| 0.5 + 0.25 * i as f64).collect();
        let linear: Vec<f64> = grid.iter().map(|h| 4.0 * h - 7.0).collect();
        let series = finite_difference(&grid, &linear, 1).unwrap();
        assert!(!series.endpoints_copied);
        for v in &series.values {
            assert!((v - 4.0).abs() < 1e-12);
        }
        let quadratic: Vec<f64> = grid.iter().map(|h| 3.0 * h * h - h).collect();
        let series = finite_difference(&grid, &quadratic, 1).unwrap();
        for (h, v) in series.grid.iter().zip(&series.values) {
            assert!((v - (6.0 * h - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn second_derivative_is_exact_on_quadratic_data() {
        let grid: Vec<f64> = (0..9).map(|i| 1.0 + 0.5 * i as f64).collect();
        let quadratic: Vec<f64> = grid.iter().map(|h| 3.0 * h * h - h + 2.0).collect();
        let series = finite_difference(&grid, &quadratic, 2).unwrap();
        assert!(series.endpoints_copied);
        for v in &series.values {
            assert!((v - 6.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cubic_first_derivative_reproduces_the_reference_value() {
        let grid: Vec<f64> = (0..11).map(|i| 0.5 + 0.1 * i as f64).collect();
        let cubic: Vec<f64> = grid.iter().map(|h| h * h * h).collect();
        let series = finite_difference(&grid, &cubic, 1).unwrap();
        let at_one = series
            .grid
            .iter()
            .position(|h| (h - 1.0).abs() < 1e-12)
            .unwrap();
        // Central difference of h^3 at h = 1 with step 0.1: exact value
        // 3 + 0.1^2 = 3.01, not the analytic 3.
        assert!((series.values[at_one] - 3.01).abs() < 1e-9);
    }

    #[test]
    fn derivative_input_validation() {
        let grid = [1.0, 2.0, 3.0];
        let values = [1.0, 2.0, 3.0];
        assert!(matches!(
            finite_difference(&grid[..2], &values[..2], 1),
            Err(CoreError::TooFewPoints { needed: 3, got: 2 })
        ));
        assert!(matches!(
            finite_difference(&[1.0, 2.0, 2.5], &values, 1),
            Err(CoreError::NonUniformGrid)
        ));
        assert!(matches!(
            finite_difference(&[3.0, 2.0, 1.0], &values, 1),
            Err(CoreError::NonUniformGrid)
        ));
        assert!(matches!(
            finite_difference(&grid, &values[..2], 1),
            Err(CoreError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            finite_difference(&grid, &values, 3),
            Err(CoreError::InvalidConfig(_))
        ));
    }

    #[test]
    fn paired_derivative_mean_matches_derivative_of_the_mean() {
        // energy(h, k) = (k + 1) h^2, so each sample's first derivative is
        // 2 (k + 1) h and the mean over four samples is 5 h.
        let mut records = Vec::new();
        for i in 0..5 {
            let h = 1.0 + 0.25 * i as f64;
            for k in 0..4usize {
                records.push(record(h, k, (k + 1) as f64 * h * h));
            }
        }
        let dataset = Dataset {
            n_sites: 2,
            records,
        };
        let paired = paired_sample_derivative(&dataset, 1).unwrap();
        assert_eq!(paired.samples, 4);
        for (h, m) in paired.grid.iter().zip(&paired.mean) {
            assert!((m - 5.0 * h).abs() < 1e-9);
        }
        let summary = summarize(&dataset).unwrap();
        let grid: Vec<f64> = paired.grid.clone();
        let mean_energy: Vec<f64> = grid
            .iter()
            .map(|h| summary.row(*h, Quantity::Energy).unwrap().mean)
            .collect();
        let of_mean = finite_difference(&grid, &mean_energy, 1).unwrap();
        for (a, b) in paired.mean.iter().zip(&of_mean.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ragged_sample_sets_are_rejected() {
        let mut dataset = toy_dataset();
        dataset.records.pop();
        assert!(matches!(
            paired_sample_derivative(&dataset, 1),
            Err(CoreError::RaggedSamples)
        ));
        let mut dataset = toy_dataset();
        dataset.records[4].sample_index = 9;
        assert!(matches!(
            paired_sample_derivative(&dataset, 1),
            Err(CoreError::RaggedSamples)
        ));
    }

    #[test]
    fn histogram_partitions_every_value() {
        let values = [0.0, 0.05, 0.3, 0.5, 0.55, 0.9, 1.0, 1.0];
        let hist = histogram(&values, 5).unwrap();
        assert_eq!(hist.counts, vec![2, 1, 2, 0, 3]);
        assert_eq!(hist.total(), 8);
        assert_eq!(hist.edges(0), (0.0, 0.2));

        let constant = [2.5; 7];
        let hist = histogram(&constant, 50).unwrap();
        assert_eq!(hist.counts, vec![7]);
        assert_eq!(hist.bin_width, 0.0);

        assert!(matches!(
            histogram(&[], 5),
            Err(CoreError::EmptyInput("histogram"))
        ));
        assert!(histogram(&values, 0).is_err());
        assert!(histogram(&[1.0, f64::NAN], 5).is_err());
    }

    #[test]
    fn plot_emission_is_complete_and_repeatable() {
        let mut config = SweepConfig::with_defaults(build_lattice(2, 2).unwrap(), 5);
        config.h_values = vec![1.0, 1.5, 2.0];
        config.samples_per_h = 4;
        let out = run_sweep(&config).unwrap();

        let dir_a = std::env::temp_dir().join("qising-plots-a");
        let dir_b = std::env::temp_dir().join("qising-plots-b");
        let _ = fs::remove_dir_all(&dir_a);
        let _ = fs::remove_dir_all(&dir_b);
        let written_a =
            emit_plot_data(&out.dataset, Some(&out.correlators), 10, &dir_a).unwrap();
        let written_b =
            emit_plot_data(&out.dataset, Some(&out.correlators), 10, &dir_b).unwrap();
        assert!(written_a.len() >= 7, "got {} plot files", written_a.len());
        assert_eq!(written_a.len(), written_b.len());
        for (a, b) in written_a.iter().zip(&written_b) {
            assert_eq!(a.file_name(), b.file_name());
            let bytes_a = fs::read(a).unwrap();
            let bytes_b = fs::read(b).unwrap();
            assert_eq!(bytes_a, bytes_b, "{:?} differs between reruns", a.file_name());
            assert!(!bytes_a.is_empty());
        }
        let names: Vec<String> = written_a
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        for expected in [
            "mean_energy_vs_h.csv",
            "mean_magnetization_vs_h.csv",
            "mean_entropy_vs_h.csv",
            "energy_variance_vs_n.csv",
            "correlation_vs_distance.csv",
            "energy_derivative_1_vs_h.csv",
            "energy_derivative_2_vs_h.csv",
            "energy_histogram.csv",
            "magnetization_histogram.csv",
            "entropy_histogram.csv",
        ] {
            assert!(names.contains(&expected.to_string()), "missing {expected}");
        }
    }
}
