//! The two experimental protocols, the component-count sweep and
//! prediction timing.

use std::collections::BTreeSet;
use std::time::Instant;

use enprocell_core::expression::intersect_genes;
use enprocell_core::metrics::score;
use enprocell_core::split::{rng_from_seed, stratified_split};
use enprocell_core::{EvalReport, Error as CoreError, ExpressionMatrix, LabeledDataset, PipelineConfig, TrainedPipeline};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Held-out share of each class in the intra-dataset protocol.
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// Smallest class the intra-dataset split accepts.
pub const MIN_CLASS_SIZE: usize = 5;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: EvalReport,
    pub pipeline: TrainedPipeline,
    /// Labels the report was restricted to (all labels for intra runs).
    pub labels: Vec<String>,
}

/// Stratified train/test split of `dataset`, fit on the train part, scored on
/// the test part.
///
/// The split is drawn over cells in cell-id order, so the outcome does not
/// depend on the row order of the input.
pub fn run_intra(dataset: &LabeledDataset, config: &PipelineConfig, test_fraction: f64, split_seed: u64) -> Result<Outcome> {
    let dataset = dataset.select_cells(&dataset.canonical_order())?;
    for (label, &count) in &dataset.class_counts() {
        if count < MIN_CLASS_SIZE {
            return Err(CoreError::ClassTooSmall {
                label: label.to_string(),
                count,
                required: MIN_CLASS_SIZE,
            }
            .into());
        }
    }
    let (dict, ids) = dataset.encode_labels();
    let mut rng = rng_from_seed(split_seed);
    let (train, test) = stratified_split(&ids, dict.len(), test_fraction, &mut rng)?;
    let train_set = dataset.select_cells(&train)?;
    let test_set = dataset.select_cells(&test)?;

    let pipeline = TrainedPipeline::fit(&train_set, config)?;
    let start = Instant::now();
    let prediction = match (&test_set.batch, config.align_batches) {
        (Some(b), true) => pipeline.predict(&test_set.matrix, Some(b.as_slice()))?,
        _ => pipeline.predict::<String>(&test_set.matrix, None)?,
    };
    let elapsed = start.elapsed().as_secs_f64();
    let mut report = score(&test_set.labels, &prediction.labels)?;
    report.predict_wall_time = elapsed;
    Ok(Outcome {
        report,
        pipeline,
        labels: dict,
    })
}

/// Cell types present in every dataset.
pub fn shared_labels(datasets: &[&LabeledDataset]) -> BTreeSet<String> {
    let mut iter = datasets.iter();
    let mut shared: BTreeSet<String> = iter.next().map(|d| d.classes().into_iter().collect()).unwrap_or_default();
    for d in iter {
        let classes: BTreeSet<String> = d.classes().into_iter().collect();
        shared = shared.intersection(&classes).cloned().collect();
    }
    shared
}

/// Trains on the reference datasets and scores the query.
///
/// Every dataset is first restricted to the cell types they all share and to
/// the genes they all measure. The references are concatenated, each one
/// tagged as its own batch (cell ids are prefixed `ref<i>/` to keep them
/// unique). With `align_batches`, each reference batch and then the query
/// are moved onto the reference centroid in projected space.
pub fn run_inter(references: &[LabeledDataset], query: &LabeledDataset, config: &PipelineConfig) -> Result<Outcome> {
    if references.is_empty() {
        return Err(CoreError::Invalid("at least one reference dataset is required".into()).into());
    }
    let all: Vec<&LabeledDataset> = references.iter().chain(std::iter::once(query)).collect();
    let shared = shared_labels(&all);
    if shared.len() < 2 {
        return Err(CoreError::Invalid(format!(
            "reference and query share {} cell type(s); at least 2 are needed",
            shared.len()
        ))
        .into());
    }
    let restricted = all.iter().map(|d| d.restrict_labels(&shared)).collect::<Result<Vec<_>, _>>()?;
    let matrices: Vec<&ExpressionMatrix> = restricted.iter().map(|d| &d.matrix).collect();
    let common = intersect_genes(&matrices)?;
    let (query_matrix, ref_matrices) = common.split_last().expect("query is last");
    let refs = ref_matrices
        .iter()
        .zip(&restricted)
        .map(|(m, d)| d.with_matrix(m.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let reference = stack_references(&refs)?;
    let query_labels = &restricted.last().expect("query is last").labels;

    let pipeline = TrainedPipeline::fit(&reference, config)?;
    let start = Instant::now();
    let prediction = if config.align_batches {
        let one_batch = vec![0u8; query_matrix.n_cells()];
        pipeline.predict(query_matrix, Some(one_batch.as_slice()))?
    } else {
        pipeline.predict::<u8>(query_matrix, None)?
    };
    let elapsed = start.elapsed().as_secs_f64();
    let mut report = score(query_labels, &prediction.labels)?;
    report.predict_wall_time = elapsed;
    Ok(Outcome {
        report,
        pipeline,
        labels: shared.into_iter().collect(),
    })
}

/// Concatenates reference datasets over the genes they all measure, tagging
/// each as batch `ref<i>` and prefixing its cell ids with `ref<i>/`.
pub fn stack_references(references: &[LabeledDataset]) -> Result<LabeledDataset> {
    let matrices: Vec<&ExpressionMatrix> = references.iter().map(|d| &d.matrix).collect();
    let common = if matrices.len() > 1 {
        intersect_genes(&matrices)?
    } else {
        matrices.iter().map(|m| (*m).clone()).collect()
    };
    let mut parts = Vec::with_capacity(common.len());
    let mut labels = Vec::new();
    let mut batch = Vec::new();
    for (i, (m, d)) in common.iter().zip(references).enumerate() {
        let ids = m.cell_ids().iter().map(|c| format!("ref{i}/{c}")).collect();
        parts.push(m.with_cell_ids(ids)?);
        labels.extend(d.labels.iter().cloned());
        batch.extend(std::iter::repeat_n(format!("ref{i}"), m.n_cells()));
    }
    let part_refs: Vec<&ExpressionMatrix> = parts.iter().collect();
    Ok(LabeledDataset::new(ExpressionMatrix::concat_cells(&part_refs)?, labels, Some(batch))?)
}

/// Which protocol a sweep repeats.
#[derive(Debug, Clone)]
pub enum Protocol {
    Intra {
        dataset: LabeledDataset,
        test_fraction: f64,
        split_seed: u64,
    },
    Inter {
        references: Vec<LabeledDataset>,
        query: LabeledDataset,
    },
}

impl Protocol {
    pub fn run(&self, config: &PipelineConfig) -> Result<Outcome> {
        match self {
            Protocol::Intra {
                dataset,
                test_fraction,
                split_seed,
            } => run_intra(dataset, config, *test_fraction, *split_seed),
            Protocol::Inter { references, query } => run_inter(references, query, config),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n_pcs: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ascending, distinct `n_pcs`.
    pub rows: Vec<SweepRow>,
}

/// One full protocol run per PCA component count, everything else fixed.
/// `n_pcs = 0` gives MDA-only runs. Grid points run on up to `jobs` threads;
/// each point is deterministic, so the result does not depend on `jobs`.
pub fn sweep_components(protocol: &Protocol, base: &PipelineConfig, grid: &[usize], jobs: usize) -> Result<SweepResult> {
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() {
        return Err(CoreError::Invalid("component grid is empty".into()).into());
    }
    let run = |&n_pcs: &usize| -> Result<SweepRow> {
        let config = PipelineConfig { n_pcs, ..base.clone() };
        let report = protocol.run(&config)?.report;
        Ok(SweepRow {
            n_pcs,
            accuracy: report.accuracy,
            macro_f1: report.macro_f1,
        })
    };
    let rows = if jobs <= 1 {
        grid.iter().map(run).collect::<Result<Vec<_>>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| grid.par_iter().map(run).collect::<Result<Vec<_>>>())?
    };
    Ok(SweepResult { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    /// Seconds per repeat, in run order.
    pub samples: Vec<f64>,
    pub median: f64,
}

/// Median wall-clock seconds of `predict` over `repeats` runs, after one
/// untimed warm-up run. Covers recipe application through argmax.
pub fn time_predict(pipeline: &TrainedPipeline, matrix: &ExpressionMatrix, batch: Option<&[String]>, repeats: usize) -> Result<Timing> {
    if repeats == 0 {
        return Err(CoreError::Invalid("repeats must be at least 1".into()).into());
    }
    pipeline.predict(matrix, batch)?;
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let p = pipeline.predict(matrix, batch)?;
        samples.push(start.elapsed().as_secs_f64());
        std::hint::black_box(p);
    }
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    };
    Ok(Timing { samples, median })
}
