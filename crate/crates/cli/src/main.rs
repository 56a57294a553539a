//! Command-line front end: generate datasets, analyze them, tabulate
//! correlations, differentiate the energy curve, and print combined
//! reports.
//!
//! Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage
//! errors (clap's default).

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use qising_core::analysis::{
    correlation_table, emit_plot_data, finite_difference, paired_sample_derivative, summarize,
    write_correlation_table, write_summary, Quantity, SummaryTable,
};
use qising_core::lattice::{build_lattice, BondMultiplicityMode};
use qising_core::sampler::{
    format_float, h_grid, read_correlations, read_dataset, read_manifest, run_sweep,
    write_correlations, write_dataset, write_manifest, RunSummary, SweepConfig,
};
use qising_core::states::StateMode;

#[derive(Parser)]
#[command(
    name = "qising",
    version,
    about = "Random-state sampling toolkit for the transverse-field Ising model on periodic square lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a field sweep and write dataset, correlations, and manifest
    Generate(GenerateArgs),
    /// Summarize a dataset and emit plot-ready CSV files
    Analyze(AnalyzeArgs),
    /// Tabulate pair correlations versus distance
    Correlate(CorrelateArgs),
    /// Differentiate the energy curve along the field grid
    Derive(DeriveArgs),
    /// Print a combined report over one or more dataset directories
    Report(ReportArgs),
}

fn parse_state_mode(s: &str) -> Result<StateMode, String> {
    StateMode::parse(s).ok_or_else(|| format!("expected 'haar' or 'product-random', got {s:?}"))
}

fn parse_bond_mode(s: &str) -> Result<BondMultiplicityMode, String> {
    BondMultiplicityMode::parse(s)
        .ok_or_else(|| format!("expected 'honored' or 'dedup', got {s:?}"))
}

#[derive(Args)]
struct GenerateArgs {
    /// Lattice rows
    #[arg(long, default_value_t = 2)]
    rows: usize,
    /// Lattice columns
    #[arg(long, default_value_t = 2)]
    cols: usize,
    /// Bond coupling strength
    #[arg(long, default_value_t = 1.0)]
    j: f64,
    /// First field value
    #[arg(long, default_value_t = 1.0)]
    h_min: f64,
    /// Last field value
    #[arg(long, default_value_t = 5.0)]
    h_max: f64,
    /// Field grid spacing
    #[arg(long, default_value_t = 0.25)]
    h_step: f64,
    /// States drawn per field value
    #[arg(long, default_value_t = 5000)]
    samples: usize,
    /// Master seed for the random-state streams
    #[arg(long)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// State ensemble: haar or product-random
    #[arg(long, default_value = "haar", value_parser = parse_state_mode)]
    state_mode: StateMode,
    /// Wraparound bond handling: honored or dedup
    #[arg(long, default_value = "honored", value_parser = parse_bond_mode)]
    bond_mode: BondMultiplicityMode,
    /// Worker thread count (defaults to all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Dataset directory (or a dataset CSV file)
    #[arg(long)]
    input: PathBuf,
    /// Histogram bin count
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Output directory (defaults to the input directory)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Dataset directory (or a correlations CSV file)
    #[arg(long)]
    input: PathBuf,
    /// Output directory (defaults to the input directory)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct DeriveArgs {
    /// Dataset directory (or a dataset CSV file)
    #[arg(long)]
    input: PathBuf,
    /// Derivative order
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    order: u32,
    /// Differentiate each sample's curve before averaging
    #[arg(long)]
    per_sample: bool,
    /// Output directory (defaults to the input directory)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Dataset directories, each holding dataset.csv and manifest.txt
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

struct CommandError(String);

impl From<qising_core::CoreError> for CommandError {
    fn from(err: qising_core::CoreError) -> Self {
        CommandError(err.to_string())
    }
}

impl From<rayon::ThreadPoolBuildError> for CommandError {
    fn from(err: rayon::ThreadPoolBuildError) -> Self {
        CommandError(err.to_string())
    }
}

/// Writes to stdout, swallowing errors such as a closed pipe; the CSV
/// files carry the data, stdout is only a courtesy view.
fn emit(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Analyze(args) => analyze(args),
        Command::Correlate(args) => correlate(args),
        Command::Derive(args) => derive(args),
        Command::Report(args) => report(args),
    };
    if let Err(CommandError(message)) = result {
        eprintln!("error: {message}");
        std::process::exit(1);
    }
}

/// `--input` may name the directory or the CSV file itself.
fn resolve_input(input: &Path, file_name: &str) -> PathBuf {
    if input.is_dir() {
        input.join(file_name)
    } else {
        input.to_path_buf()
    }
}

fn output_dir(input: &Path, out_dir: Option<PathBuf>) -> PathBuf {
    match out_dir {
        Some(dir) => dir,
        None => {
            if input.is_dir() {
                input.to_path_buf()
            } else {
                input.parent().map(Path::to_path_buf).unwrap_or_default()
            }
        }
    }
}

fn generate(args: GenerateArgs) -> Result<(), CommandError> {
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    let lattice = build_lattice(args.rows, args.cols)?;
    let config = SweepConfig {
        lattice,
        coupling_j: args.j,
        h_values: h_grid(args.h_min, args.h_max, args.h_step)?,
        samples_per_h: args.samples,
        master_seed: args.seed,
        bond_multiplicity_mode: args.bond_mode,
        state_mode: args.state_mode,
        record_correlators: true,
    };
    config.validate()?;

    let started = Instant::now();
    let output = run_sweep(&config)?;
    let duration = started.elapsed().as_secs_f64();

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CommandError(format!("cannot create {}: {e}", args.out_dir.display())))?;
    write_dataset(&output.dataset, &args.out_dir.join("dataset.csv"))?;
    write_correlations(&output.correlators, &args.out_dir.join("correlations.csv"))?;
    let summary = RunSummary {
        records_written: output.dataset.records.len(),
        duration_seconds: duration,
    };
    write_manifest(&config, &summary, &args.out_dir.join("manifest.txt"))?;

    emit(&format!(
        "wrote {} records ({} field values x {} samples, {} sites) to {} in {:.1}s\n",
        summary.records_written,
        config.h_values.len(),
        config.samples_per_h,
        config.lattice.n_sites,
        args.out_dir.display(),
        duration
    ));
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<(), CommandError> {
    let dataset_path = resolve_input(&args.input, "dataset.csv");
    let dataset = read_dataset(&dataset_path)?;
    if dataset.records.is_empty() {
        return Err(CommandError(format!(
            "empty dataset: {} has a header but no records",
            dataset_path.display()
        )));
    }
    let out_dir = output_dir(&args.input, args.out_dir);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CommandError(format!("cannot create {}: {e}", out_dir.display())))?;

    let summary = summarize(&dataset)?;
    write_summary(&summary, &out_dir.join("summary.csv"))?;

    let correlations_path = dataset_path.with_file_name("correlations.csv");
    let correlators = if correlations_path.is_file() {
        Some(read_correlations(&correlations_path)?)
    } else {
        None
    };
    let plots = emit_plot_data(&dataset, correlators.as_ref(), args.bins, &out_dir.join("plots"))?;

    emit(&format!(
        "analyzed {} records across {} field values; wrote summary.csv and {} plot files to {}\n",
        dataset.records.len(),
        dataset.h_values().len(),
        plots.len(),
        out_dir.display()
    ));
    Ok(())
}

fn correlate(args: CorrelateArgs) -> Result<(), CommandError> {
    let path = resolve_input(&args.input, "correlations.csv");
    let accumulator = read_correlations(&path)?;
    let table = correlation_table(&accumulator)?;
    let out_dir = output_dir(&args.input, args.out_dir);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CommandError(format!("cannot create {}: {e}", out_dir.display())))?;
    write_correlation_table(&table, &out_dir.join("correlation_table.csv"))?;

    let mut text = format!(
        "{} sites, pooled over {} field values\n",
        table.n_sites,
        accumulator.h_values.len()
    );
    text.push_str(&format!(
        "{:>8}  {:>13}  {:>13}  {:>8}\n",
        "distance", "connected", "raw", "count"
    ));
    for row in &table.pooled {
        text.push_str(&format!(
            "{:>8}  {:>13.6e}  {:>13.6e}  {:>8}\n",
            row.distance, row.connected_mean, row.raw_mean, row.count
        ));
    }
    emit(&text);
    Ok(())
}

fn derive(args: DeriveArgs) -> Result<(), CommandError> {
    let dataset_path = resolve_input(&args.input, "dataset.csv");
    let dataset = read_dataset(&dataset_path)?;
    let out_dir = output_dir(&args.input, args.out_dir);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CommandError(format!("cannot create {}: {e}", out_dir.display())))?;

    if args.per_sample {
        let paired = paired_sample_derivative(&dataset, args.order)?;
        let path = out_dir.join(format!("energy_derivative_{}_per_sample.csv", args.order));
        let mut out = String::from("h,mean,variance,samples,endpoints_copied\n");
        for (i, h) in paired.grid.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                format_float(*h),
                format_float(paired.mean[i]),
                format_float(paired.variance[i]),
                paired.samples,
                paired.endpoints_copied
            ));
        }
        std::fs::write(&path, out)
            .map_err(|e| CommandError(format!("cannot write {}: {e}", path.display())))?;
        let mut text = format!(
            "order-{} derivative of {} per-sample energy curves; wrote {}\n",
            args.order,
            paired.samples,
            path.display()
        );
        for (h, m) in paired.grid.iter().zip(&paired.mean) {
            text.push_str(&format!("{h:>8.4}  {m:>13.6e}\n"));
        }
        emit(&text);
    } else {
        let summary = summarize(&dataset)?;
        let (grid, mean_energy) = energy_curve(&summary);
        let series = finite_difference(&grid, &mean_energy, args.order)?;
        let path = out_dir.join(format!("energy_derivative_{}.csv", args.order));
        let mut out = String::from("h,derivative,endpoints_copied\n");
        for (h, v) in series.grid.iter().zip(&series.values) {
            out.push_str(&format!(
                "{},{},{}\n",
                format_float(*h),
                format_float(*v),
                series.endpoints_copied
            ));
        }
        std::fs::write(&path, out)
            .map_err(|e| CommandError(format!("cannot write {}: {e}", path.display())))?;
        let mut text = format!(
            "order-{} derivative of the mean energy curve; wrote {}\n",
            args.order,
            path.display()
        );
        for (h, v) in series.grid.iter().zip(&series.values) {
            text.push_str(&format!("{h:>8.4}  {v:>13.6e}\n"));
        }
        emit(&text);
    }
    Ok(())
}

fn energy_curve(summary: &SummaryTable) -> (Vec<f64>, Vec<f64>) {
    let rows = summary.rows.iter().filter(|r| r.quantity == Quantity::Energy);
    rows.map(|r| (r.h, r.mean)).unzip()
}

struct ReportEntry {
    label: String,
    n_sites: usize,
    records: usize,
    config: SweepConfig,
    summary: SummaryTable,
    correlations: Option<Vec<Option<f64>>>,
}

const REPORT_DISTANCES: usize = 15;

fn report(args: ReportArgs) -> Result<(), CommandError> {
    let mut entries = Vec::new();
    for dir in &args.inputs {
        let (config, _) = read_manifest(&dir.join("manifest.txt"))?;
        let dataset = read_dataset(&dir.join("dataset.csv"))?;
        if dataset.n_sites != config.lattice.n_sites {
            return Err(CommandError(format!(
                "{}: dataset has {} site columns but the manifest says {}",
                dir.display(),
                dataset.n_sites,
                config.lattice.n_sites
            )));
        }
        let summary = summarize(&dataset)?;
        let correlations_path = dir.join("correlations.csv");
        let correlations = if correlations_path.is_file() {
            let table = correlation_table(&read_correlations(&correlations_path)?)?;
            let mut by_distance: Vec<Option<f64>> = vec![None; REPORT_DISTANCES];
            for row in &table.pooled {
                if row.distance <= REPORT_DISTANCES {
                    by_distance[row.distance - 1] = Some(row.connected_mean);
                }
            }
            Some(by_distance)
        } else {
            None
        };
        entries.push(ReportEntry {
            label: format!("N={}", dataset.n_sites),
            n_sites: dataset.n_sites,
            records: dataset.records.len(),
            config,
            summary,
            correlations,
        });
    }
    entries.sort_by_key(|e| e.n_sites);
    for i in 1..entries.len() {
        if entries[i].n_sites == entries[i - 1].n_sites {
            entries[i].label = format!("N={}#{}", entries[i].n_sites, i);
        }
    }

    let mut text = String::from("Datasets\n");
    text.push_str(&format!(
        "  {:<8} {:>7} {:>9} {:>10} {:>12} {:>8}\n",
        "label", "lattice", "h points", "samples/h", "seed", "records"
    ));
    for e in &entries {
        text.push_str(&format!(
            "  {:<8} {:>7} {:>9} {:>10} {:>12} {:>8}\n",
            e.label,
            format!("{}x{}", e.config.lattice.rows, e.config.lattice.cols),
            e.config.h_values.len(),
            e.config.samples_per_h,
            e.config.master_seed,
            e.records
        ));
    }

    text.push_str("\nConnected pair correlation by distance (pooled over h)\n");
    text.push_str(&format!("  {:>8}", "distance"));
    for e in &entries {
        text.push_str(&format!(" {:>13}", e.label));
    }
    text.push('\n');
    for d in 1..=REPORT_DISTANCES {
        text.push_str(&format!("  {d:>8}"));
        for e in &entries {
            match e.correlations.as_ref().and_then(|c| c[d - 1]) {
                Some(value) => text.push_str(&format!(" {value:>13.4e}")),
                None => text.push_str(&format!(" {:>13}", "-")),
            }
        }
        text.push('\n');
    }

    text.push_str("\nEnergy sample variance by field\n");
    let mut h_union: Vec<f64> = Vec::new();
    for e in &entries {
        for h in &e.config.h_values {
            if !h_union.iter().any(|x| x.to_bits() == h.to_bits()) {
                h_union.push(*h);
            }
        }
    }
    h_union.sort_by(|a, b| a.partial_cmp(b).unwrap());
    text.push_str(&format!("  {:>8}", "h"));
    for e in &entries {
        text.push_str(&format!(" {:>13}", e.label));
    }
    text.push('\n');
    for h in &h_union {
        text.push_str(&format!("  {h:>8.3}"));
        for e in &entries {
            match e.summary.row(*h, Quantity::Energy) {
                Some(row) => text.push_str(&format!(" {:>13.4e}", row.variance)),
                None => text.push_str(&format!(" {:>13}", "-")),
            }
        }
        text.push('\n');
    }
    emit(&text);
    Ok(())
}
