//! Randomized invariants: structural identities of the lattice, gauge
//! invariance of the observables, exactness of the CSV round trip, and
//! linearity of the derivative stencils.

use std::path::PathBuf;

use num_complex::Complex64;
use proptest::prelude::*;

use qising_core::analysis::{finite_difference, histogram, StreamingStats};
use qising_core::entanglement::half_split_entropy;
use qising_core::lattice::{build_lattice, pairs_at_distance};
use qising_core::operators::HamiltonianSpec;
use qising_core::sampler::{
    h_grid, read_dataset, write_dataset, Dataset, SampleRecord,
};
use qising_core::states::{
    expectation_energy, magnetization, random_state, RngStream, StateVector,
};

fn temp_path(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("qising-property-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn finite_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL,
        prop::num::f64::SUBNORMAL,
        prop::num::f64::ZERO,
        Just(f64::MAX),
        Just(f64::MIN_POSITIVE),
        Just(5e-324),
    ]
}

proptest! {
    #[test]
    fn lattice_pair_groups_partition_all_site_pairs(rows in 1usize..5, cols in 1usize..6) {
        prop_assume!(rows * cols >= 2);
        let lattice = build_lattice(rows, cols).unwrap();
        let n = lattice.n_sites;
        let mut total = 0usize;
        for d in 1..n {
            total += pairs_at_distance(&lattice, d).unwrap().pairs.len();
        }
        prop_assert_eq!(total, n * (n - 1) / 2);
    }

    #[test]
    fn periodic_lattices_have_two_edges_per_site(rows in 2usize..5, cols in 2usize..5) {
        let lattice = build_lattice(rows, cols).unwrap();
        prop_assert_eq!(lattice.edge_count() as usize, 2 * lattice.n_sites);
        for bond in &lattice.bonds {
            prop_assert!(bond.i < bond.j);
            prop_assert!(bond.multiplicity == 1 || bond.multiplicity == 2);
        }
    }

    #[test]
    fn observables_ignore_a_global_phase(seed in 0u64..1000, phase in 0.0..std::f64::consts::TAU) {
        let stream = RngStream::new(seed, 0);
        let state = random_state(4, &stream).unwrap();
        let rotated: Vec<Complex64> = state
            .amplitudes()
            .iter()
            .map(|a| a * Complex64::from_polar(1.0, phase))
            .collect();
        let rotated = StateVector::normalized(4, rotated).unwrap();

        let spec = HamiltonianSpec::new(build_lattice(2, 2).unwrap(), 1.0, 1.0);
        let e = expectation_energy(&state, &spec).unwrap();
        let e_rot = expectation_energy(&rotated, &spec).unwrap();
        prop_assert!((e - e_rot).abs() < 1e-10);

        let m = magnetization(&state).mean;
        let m_rot = magnetization(&rotated).mean;
        prop_assert!((m - m_rot).abs() < 1e-10);

        let s = half_split_entropy(&state).unwrap();
        let s_rot = half_split_entropy(&rotated).unwrap();
        prop_assert!((s - s_rot).abs() < 1e-10);
    }

    #[test]
    fn dataset_round_trip_preserves_every_bit(
        values in prop::collection::vec((finite_f64(), finite_f64(), finite_f64()), 1..20),
        seed in 0u64..u64::MAX,
    ) {
        let records: Vec<SampleRecord> = values
            .iter()
            .enumerate()
            .map(|(k, &(a, b, c))| SampleRecord {
                h: 1.0 + k as f64,
                sample_index: k,
                stream_id: seed.wrapping_add(k as u64),
                energy: a,
                magnetization: b,
                entropy: c,
                site_z: vec![a, -b],
            })
            .collect();
        let dataset = Dataset { n_sites: 2, records };
        let path = temp_path(&format!("roundtrip-{seed:016x}.csv"));
        write_dataset(&dataset, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        std::fs::remove_file(&path).ok();
        prop_assert_eq!(dataset.records.len(), back.records.len());
        for (a, b) in dataset.records.iter().zip(&back.records) {
            prop_assert_eq!(a.energy.to_bits(), b.energy.to_bits());
            prop_assert_eq!(a.magnetization.to_bits(), b.magnetization.to_bits());
            prop_assert_eq!(a.entropy.to_bits(), b.entropy.to_bits());
            prop_assert_eq!(a.stream_id, b.stream_id);
            for (x, y) in a.site_z.iter().zip(&b.site_z) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn histogram_counts_every_value_once(
        values in prop::collection::vec(-1e6f64..1e6, 1..200),
        bins in 1usize..64,
    ) {
        let hist = histogram(&values, bins).unwrap();
        prop_assert_eq!(hist.total(), values.len() as u64);
    }

    #[test]
    fn grid_generation_hits_the_requested_point_count(
        h_min in -10.0f64..10.0,
        step in 0.05f64..2.0,
        points in 1usize..40,
    ) {
        let h_max = h_min + (points - 1) as f64 * step;
        let grid = h_grid(h_min, h_max, step).unwrap();
        prop_assert_eq!(grid.len(), points);
        prop_assert_eq!(grid[0], h_min);
    }

    #[test]
    fn derivative_stencils_are_linear(
        coeffs in prop::collection::vec(-5.0f64..5.0, 6),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        order in 1u32..3,
    ) {
        let grid: Vec<f64> = (0..6).map(|i| 1.0 + 0.5 * i as f64).collect();
        let f: Vec<f64> = coeffs.clone();
        let g: Vec<f64> = coeffs.iter().rev().cloned().collect();
        let combined: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let df = finite_difference(&grid, &f, order).unwrap();
        let dg = finite_difference(&grid, &g, order).unwrap();
        let dc = finite_difference(&grid, &combined, order).unwrap();
        for i in 0..grid.len() {
            let expected = a * df.values[i] + b * dg.values[i];
            prop_assert!((dc.values[i] - expected).abs() < 1e-9 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn streaming_stats_stay_ordered(values in prop::collection::vec(-1e3f64..1e3, 1..100)) {
        let mut stats = StreamingStats::default();
        for &v in &values {
            stats.push(v);
        }
        prop_assert!(stats.variance() >= 0.0);
        prop_assert!(stats.min() <= stats.mean() + 1e-12);
        prop_assert!(stats.mean() <= stats.max() + 1e-12);
        prop_assert_eq!(stats.count(), values.len());
    }
}
