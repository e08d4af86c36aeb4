//! Recipe + projection + network bundled into one deployable predictor.

use alloc::string::String;
use alloc::vec::Vec;

use super::network::{argmax, forward, ClassifierModel};
use super::train::{train, EpochRecord, NetworkConfig};
use crate::error::{Error, Result};
use crate::expression::{ExpressionMatrix, LabeledDataset};
use crate::linalg::Matrix;
use crate::preprocess::{apply_recipe, fit_recipe, PreprocessRecipe, DEFAULT_HVG_COUNT};
use crate::projection::{align_to, fit_mda, fit_pca, project, ProjectionBasis, DEFAULT_EPSILON_SCALE};

/// Every knob of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub hvg_count: usize,
    /// PCA components `l`; 0 gives an MDA-only basis.
    pub n_pcs: usize,
    /// Include the MDA block; `false` gives a PCA-only basis.
    pub use_mda: bool,
    pub epsilon_scale: f64,
    /// Center each training batch on the global centroid before training.
    pub align_batches: bool,
    pub network: NetworkConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            hvg_count: DEFAULT_HVG_COUNT,
            n_pcs: 100,
            use_mda: true,
            epsilon_scale: DEFAULT_EPSILON_SCALE,
            align_batches: true,
            network: NetworkConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hvg_count == 0 {
            return Err(Error::invalid("hvg count must be positive"));
        }
        if self.n_pcs == 0 && !self.use_mda {
            return Err(Error::invalid("a basis needs PCA components, MDA components, or both"));
        }
        if !(self.epsilon_scale > 0.0) || !self.epsilon_scale.is_finite() {
            return Err(Error::invalid("epsilon scale must be positive"));
        }
        self.network.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub config: PipelineConfig,
    pub n_train_cells: usize,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// `(name, digest)` pairs identifying the training inputs; filled in by
    /// callers that read data from files.
    pub fingerprints: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub recipe: PreprocessRecipe,
    pub basis: ProjectionBasis,
    pub model: ClassifierModel,
    /// Mean of the projected training cells; query batches are moved here
    /// when predicting with batch alignment.
    pub reference_centroid: Vec<f64>,
    pub meta: TrainingMeta,
}

/// Per-cell predictions, in input row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<String>,
    pub classes: Vec<usize>,
    /// cells × classes, columns ordered as the model's label dictionary.
    pub probabilities: Matrix,
}

impl Prediction {
    pub fn max_probability(&self, cell: usize) -> f64 {
        self.probabilities[(cell, self.classes[cell])]
    }
}

/// Fits the ensemble basis on preprocessed cells with class ids.
pub fn fit_projection(
    data: &Matrix,
    labels: &[usize],
    gene_names: Vec<String>,
    config: &PipelineConfig,
) -> Result<ProjectionBasis> {
    let pca = fit_pca(data, config.n_pcs)?;
    let mda = if config.use_mda {
        Some(fit_mda(data, labels, config.epsilon_scale)?)
    } else {
        None
    };
    ProjectionBasis::ensemble(pca, mda, gene_names)
}

impl TrainedPipeline {
    /// Fits recipe, basis and network on `dataset`.
    ///
    /// Cells are processed in canonical (cell-id) order, so the result does
    /// not depend on row order. With `align_batches` set and batch ids
    /// present, each batch is centered on the global centroid in projected
    /// space before training.
    pub fn fit(dataset: &LabeledDataset, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let dataset = dataset.select_cells(&dataset.canonical_order())?;
        let (dict, ids) = dataset.encode_labels();
        if dict.len() < 2 {
            return Err(Error::invalid("training needs at least two cell types"));
        }
        let recipe = fit_recipe(&dataset.matrix, config.hvg_count)?;
        let x = apply_recipe(&dataset.matrix, &recipe)?;
        let basis = fit_projection(&x, &ids, recipe.selected_genes.clone(), config)?;
        let mut embedded = project(&x, &basis)?;
        let reference_centroid = embedded.column_means();
        if config.align_batches {
            if let Some(batch) = &dataset.batch {
                embedded = align_to(&embedded, batch, &reference_centroid)?;
            }
        }
        let outcome = train(&embedded, &ids, dict, &config.network)?;
        Ok(TrainedPipeline {
            recipe,
            basis,
            model: outcome.model,
            reference_centroid,
            meta: TrainingMeta {
                config: config.clone(),
                n_train_cells: dataset.n_cells(),
                history: outcome.history,
                best_epoch: outcome.best_epoch,
                fingerprints: Vec::new(),
            },
        })
    }

    /// Checks that the three stages chain together.
    pub fn validate(&self) -> Result<()> {
        self.recipe.validate()?;
        self.model.validate()?;
        if self.recipe.selected_genes != self.basis.gene_names {
            return Err(Error::invalid("recipe genes differ from basis genes"));
        }
        if self.basis.n_components() != self.model.input_dim {
            return Err(Error::DimensionMismatch {
                context: "basis components vs network input",
                expected: self.model.input_dim,
                found: self.basis.n_components(),
            });
        }
        if self.reference_centroid.len() != self.model.input_dim {
            return Err(Error::DimensionMismatch {
                context: "reference centroid",
                expected: self.model.input_dim,
                found: self.reference_centroid.len(),
            });
        }
        Ok(())
    }

    /// Recipe, then projection, then (with `batch`) per-batch alignment onto
    /// the training centroid.
    pub fn embed<B: Ord>(&self, matrix: &ExpressionMatrix, batch: Option<&[B]>) -> Result<Matrix> {
        let x = apply_recipe(matrix, &self.recipe)?;
        let p = project(&x, &self.basis)?;
        match batch {
            Some(b) => align_to(&p, b, &self.reference_centroid),
            None => Ok(p),
        }
    }

    /// Labels every cell of `matrix`. Passing batch ids turns on alignment;
    /// a query without batch ids can pass one shared id to align it as a
    /// whole.
    pub fn predict<B: Ord>(&self, matrix: &ExpressionMatrix, batch: Option<&[B]>) -> Result<Prediction> {
        let embedded = self.embed(matrix, batch)?;
        self.classify(&embedded)
    }

    /// Forward pass and argmax on already embedded cells.
    pub fn classify(&self, embedded: &Matrix) -> Result<Prediction> {
        let probabilities = forward(&self.model, embedded)?;
        let classes: Vec<usize> = probabilities.row_iter().map(argmax).collect();
        let labels = classes.iter().map(|&c| self.model.label_dict[c].clone()).collect();
        Ok(Prediction {
            labels,
            classes,
            probabilities,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SynthSpec;
    use alloc::vec;

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            hvg_count: 40,
            n_pcs: 5,
            network: NetworkConfig {
                hidden_sizes: vec![16, 8],
                epochs: 60,
                batch_size: 16,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn data() -> LabeledDataset {
        SynthSpec {
            n_cells_per_class: vec![40, 40, 40],
            n_genes: 60,
            informative_genes: 12,
            class_separation: 10.0,
            sparsity: 0.0,
            seed: 3,
            ..Default::default()
        }
        .generate()
        .unwrap()
    }

    #[test]
    fn fits_and_predicts_training_data() {
        let ds = data();
        let p = TrainedPipeline::fit(&ds, &small_config()).unwrap();
        p.validate().unwrap();
        assert_eq!(p.basis.n_components(), 3 + 5);
        let pred = p.predict::<String>(&ds.matrix, None).unwrap();
        let correct = pred.labels.iter().zip(&ds.labels).filter(|(a, b)| a == b).count();
        assert_eq!(correct, ds.n_cells());
        for row in pred.probabilities.row_iter() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_cells_get_identical_predictions() {
        let ds = data();
        let p = TrainedPipeline::fit(&ds, &small_config()).unwrap();
        let dense = ds.matrix.to_dense().select_rows(&[5, 70, 5]);
        let ids = ["a", "b", "c"].map(String::from).to_vec();
        let twice = ExpressionMatrix::from_dense(&dense, ds.matrix.gene_names().to_vec(), ids).unwrap();
        let pred = p.predict::<String>(&twice, None).unwrap();
        assert_eq!(pred.labels[0], pred.labels[2]);
        assert_eq!(pred.probabilities.row(0), pred.probabilities.row(2));
    }

    #[test]
    fn row_order_does_not_matter() {
        let ds = data();
        let rev: Vec<usize> = (0..ds.n_cells()).rev().collect();
        let a = TrainedPipeline::fit(&ds, &small_config()).unwrap();
        let b = TrainedPipeline::fit(&ds.select_cells(&rev).unwrap(), &small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_errors() {
        let ds = data();
        let cfg = PipelineConfig { n_pcs: 0, use_mda: false, ..small_config() };
        assert!(TrainedPipeline::fit(&ds, &cfg).is_err());
        let cfg = PipelineConfig { n_pcs: 10_000, ..small_config() };
        assert!(TrainedPipeline::fit(&ds, &cfg).is_err());
        let p = TrainedPipeline::fit(&ds, &small_config()).unwrap();
        let missing = ds.matrix.select_genes(&[0, 1]).unwrap();
        assert!(matches!(p.predict::<String>(&missing, None), Err(Error::MissingGenes(_))));
    }

    #[test]
    fn mda_only_basis() {
        let ds = data();
        let cfg = PipelineConfig { n_pcs: 0, ..small_config() };
        let p = TrainedPipeline::fit(&ds, &cfg).unwrap();
        assert_eq!(p.basis.ensemble, p.basis.mda.as_ref().unwrap().components);
    }
}
