use std::collections::BTreeSet;

use enprocell::evaluation::{run_inter, run_intra, shared_labels, sweep_components, time_predict, Protocol};
use enprocell::Error;
use enprocell_core::{ExpressionMatrix, LabeledDataset, Matrix, NetworkConfig, PipelineConfig, SynthSpec, TrainedPipeline};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(hvg: usize, n_pcs: usize) -> PipelineConfig {
    PipelineConfig {
        hvg_count: hvg,
        n_pcs,
        network: NetworkConfig {
            hidden_sizes: vec![16, 8],
            epochs: 60,
            batch_size: 16,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn synth(cells: Vec<usize>, genes: usize, seed: u64) -> LabeledDataset {
    SynthSpec {
        n_cells_per_class: cells,
        n_genes: genes,
        informative_genes: 30,
        class_separation: 10.0,
        seed,
        ..Default::default()
    }
    .generate()
    .unwrap()
}

fn without_time(mut r: enprocell_core::EvalReport) -> enprocell_core::EvalReport {
    r.predict_wall_time = 0.0;
    r
}

/// Relabels the classes of a synthetic dataset by position: class `i`
/// becomes `names[i]`.
fn rename(ds: &LabeledDataset, names: &[&str]) -> LabeledDataset {
    let (dict, ids) = ds.encode_labels();
    assert_eq!(dict.len(), names.len());
    let labels = ids.iter().map(|&c| names[c].to_owned()).collect();
    LabeledDataset::new(ds.matrix.clone(), labels, ds.batch.clone()).unwrap()
}

#[test]
fn intra_is_deterministic_per_seed() {
    let ds = synth(vec![40; 3], 80, 1);
    let a = run_intra(&ds, &config(40, 5), 0.2, 7).unwrap();
    let b = run_intra(&ds, &config(40, 5), 0.2, 7).unwrap();
    assert_eq!(without_time(a.report), without_time(b.report));
    assert_eq!(a.pipeline, b.pipeline);
}

#[test]
fn intra_ignores_row_order() {
    let ds = synth(vec![40; 3], 80, 2);
    let mut order: Vec<usize> = (0..ds.n_cells()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let shuffled = ds.select_cells(&order).unwrap();
    let a = run_intra(&ds, &config(40, 5), 0.2, 3).unwrap();
    let b = run_intra(&shuffled, &config(40, 5), 0.2, 3).unwrap();
    assert_eq!(without_time(a.report), without_time(b.report));
}

#[test]
fn intra_split_is_stratified() {
    let sizes = [40usize, 23, 31];
    let ds = synth(sizes.to_vec(), 80, 3);
    let r = run_intra(&ds, &config(40, 5), 0.2, 11).unwrap().report;
    for (c, &n) in r.per_class.iter().zip(&sizes) {
        let expected = 0.2 * n as f64;
        assert!((c.support as f64 - expected).abs() <= 1.0, "{}: {} of {n}", c.label, c.support);
    }
    assert_eq!(r.confusion.iter().flatten().sum::<usize>(), r.n_cells);
}

#[test]
fn intra_separable_five_classes() {
    let ds = synth(vec![60; 5], 120, 4);
    let r = run_intra(&ds, &config(60, 10), 0.2, 0).unwrap().report;
    assert!(r.accuracy >= 0.95 && r.macro_f1 >= 0.95, "{} {}", r.accuracy, r.macro_f1);
}

#[test]
fn intra_names_the_small_class() {
    let ds = synth(vec![40, 4, 40], 80, 5);
    let err = run_intra(&ds, &config(40, 5), 0.2, 0).unwrap_err();
    assert!(err.to_string().contains("type_1"), "{err}");
}

#[test]
fn inter_is_restricted_to_shared_labels() {
    let names9 = ["alpha", "beta", "delta", "gamma", "epsilon", "acinar", "ductal", "stellate", "endothelial"];
    let reference = rename(&synth(vec![30; 4], 80, 6), &["alpha", "beta", "delta", "schwann"]);
    let query = rename(&synth(vec![20; 9], 80, 7), &names9);
    let shared = shared_labels(&[&reference, &query]);
    assert_eq!(shared, BTreeSet::from(["alpha".into(), "beta".into(), "delta".into()]));
    let out = run_inter(&[reference], &query, &config(40, 5)).unwrap();
    assert_eq!(out.report.labels, ["alpha", "beta", "delta"]);
    assert_eq!(out.labels, ["alpha", "beta", "delta"]);
    assert_eq!(out.report.n_cells, 60);
}

#[test]
fn inter_errors() {
    let a = rename(&synth(vec![20; 3], 60, 8), &["x", "y", "z"]);
    let b = rename(&synth(vec![20; 3], 60, 9), &["x", "p", "q"]);
    assert!(run_inter(std::slice::from_ref(&a), &b, &config(40, 5)).is_err());
    assert!(run_inter(&[], &a, &config(40, 5)).is_err());

    let renamed: Vec<String> = a.matrix.gene_names().iter().map(|g| format!("other_{g}")).collect();
    let disjoint = ExpressionMatrix::from_dense(&a.matrix.to_dense(), renamed, a.matrix.cell_ids().to_vec()).unwrap();
    let disjoint = a.with_matrix(disjoint).unwrap();
    assert!(matches!(run_inter(&[a], &disjoint, &config(40, 5)), Err(Error::Core(_))));
}

#[test]
fn self_query_does_at_least_as_well_as_intra() {
    let ds = synth(vec![40; 3], 80, 10);
    let other = synth(vec![40; 3], 80, 11);
    let intra = run_intra(&ds, &config(40, 5), 0.2, 0).unwrap().report;
    let inter = run_inter(&[ds.clone(), other], &ds, &config(40, 5)).unwrap().report;
    assert!(inter.accuracy >= intra.accuracy, "{} < {}", inter.accuracy, intra.accuracy);
}

fn sweep_dataset() -> LabeledDataset {
    synth(vec![60; 3], 150, 12)
}

#[test]
fn sweep_grid_of_eleven() {
    let protocol = Protocol::Intra {
        dataset: sweep_dataset(),
        test_fraction: 0.2,
        split_seed: 0,
    };
    let base = PipelineConfig {
        network: NetworkConfig { epochs: 15, ..config(120, 0).network },
        ..config(120, 0)
    };
    let grid: Vec<usize> = (0..=10).map(|i| i * 10).rev().collect();
    let serial = sweep_components(&protocol, &base, &grid, 1).unwrap();
    assert_eq!(serial.rows.len(), 11);
    assert!(serial.rows.windows(2).all(|w| w[0].n_pcs < w[1].n_pcs));
    let parallel = sweep_components(&protocol, &base, &grid, 4).unwrap();
    assert_eq!(serial, parallel);

    let mda_only = protocol.run(&PipelineConfig { n_pcs: 0, ..base.clone() }).unwrap().report;
    assert_eq!(serial.rows[0].accuracy, mda_only.accuracy);
    assert_eq!(serial.rows[0].macro_f1, mda_only.macro_f1);

    let deduped = sweep_components(&protocol, &base, &[10, 0, 10], 1).unwrap();
    assert_eq!(deduped.rows.iter().map(|r| r.n_pcs).collect::<Vec<_>>(), [0, 10]);
    assert!(sweep_components(&protocol, &base, &[], 1).is_err());
}

/// Cells lie on a plane in gene space (up to the curvature the log
/// transform adds), so PCA components beyond the second add nothing.
fn two_direction_dataset() -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let genes = 30;
    let u: Vec<f64> = (0..genes).map(|_| rng.random_range(0.0..1.0)).collect();
    let v: Vec<f64> = (0..genes).map(|_| rng.random_range(0.0..1.0)).collect();
    let centers = [(0.0, 4.0), (3.5, -2.0), (-3.5, -2.0)];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, (cx, cy)) in centers.iter().enumerate() {
        for _ in 0..60 {
            let a = cx + rng.random_range(-1.0..1.0);
            let b = cy + rng.random_range(-1.0..1.0);
            rows.push((0..genes).map(|g| 10.0 + a * u[g] + b * v[g]).collect::<Vec<_>>());
            labels.push(format!("t{k}"));
        }
    }
    let dense = Matrix::from_rows(&rows).unwrap();
    let names = (0..genes).map(|g| format!("g{g}")).collect();
    let cells = (0..rows.len()).map(|c| format!("c{c:03}")).collect();
    LabeledDataset::new(ExpressionMatrix::from_dense(&dense, names, cells).unwrap(), labels, None).unwrap()
}

#[test]
fn sweep_plateaus_on_two_direction_data() {
    let protocol = Protocol::Intra {
        dataset: two_direction_dataset(),
        test_fraction: 0.2,
        split_seed: 1,
    };
    let base = PipelineConfig { use_mda: false, ..config(30, 2) };
    let result = sweep_components(&protocol, &base, &[2, 4, 6, 8, 10], 2).unwrap();
    let acc: Vec<f64> = result.rows.iter().map(|r| r.accuracy).collect();
    let max = acc.iter().cloned().fold(f64::MIN, f64::max);
    let min = acc.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max - min < 0.02, "{acc:?}");
}

fn trained() -> (TrainedPipeline, LabeledDataset) {
    let ds = synth(vec![40; 3], 80, 14);
    (TrainedPipeline::fit(&ds, &config(40, 5)).unwrap(), ds)
}

#[test]
fn timing_takes_the_median_of_repeats() {
    let (p, ds) = trained();
    let t = time_predict(&p, &ds.matrix, None, 5).unwrap();
    assert_eq!(t.samples.len(), 5);
    let mut sorted = t.samples.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(t.median, sorted[2]);
    assert!(time_predict(&p, &ds.matrix, None, 0).is_err());
}

#[test]
fn timing_grows_roughly_linearly() {
    let (p, ds) = trained();
    let dense = ds.matrix.to_dense();
    let make = |copies: usize| {
        let rows: Vec<usize> = (0..copies).flat_map(|_| 0..ds.n_cells()).collect();
        let ids = (0..rows.len()).map(|i| format!("q{i}")).collect();
        ExpressionMatrix::from_dense(&dense.select_rows(&rows), ds.matrix.gene_names().to_vec(), ids).unwrap()
    };
    let (small, large) = (make(25), make(50));
    // wall-clock ratios are noisy on a loaded machine; take the best of a few tries
    let ratios: Vec<f64> = (0..3)
        .map(|_| {
            let a = time_predict(&p, &small, None, 7).unwrap().median;
            let b = time_predict(&p, &large, None, 7).unwrap().median;
            b / a
        })
        .collect();
    assert!(ratios.iter().any(|r| (1.5..=3.0).contains(r)), "{ratios:?}");
}
