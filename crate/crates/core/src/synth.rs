//! Labeled synthetic expression data with known class geometry.
//!
//! Every cell starts at a constant baseline with independent Gaussian noise
//! on each gene. The informative genes are split into one block per class;
//! cells of class `i` are shifted up on block `i` by the amount that puts all
//! class centroids at the requested mutual distance. Optional nuisance genes
//! share strong latent factors that vary across cells independently of the
//! class, optional housekeeping genes at the end of the gene list carry most
//! of every cell's library, and optional batch offsets move whole batches
//! along one random direction. Values are truncated at zero and then randomly
//! zeroed.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::expression::{ExpressionMatrix, LabeledDataset};
use crate::linalg::{self, Matrix};
use crate::split::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_cells_per_class: Vec<usize>,
    pub n_genes: usize,
    /// Distance between any two class centroids, in units of `noise_std`.
    pub class_separation: f64,
    /// Genes `0..informative_genes` carry the class signal.
    pub informative_genes: usize,
    /// Probability that an entry is zeroed after generation.
    pub sparsity: f64,
    /// Position of each batch along a shared random unit direction in gene
    /// space; cells are assigned to batches round-robin.
    pub batch_offsets: Option<Vec<f64>>,
    pub seed: u64,
    /// Genes following the informative ones that load on latent factors.
    pub nuisance_genes: usize,
    pub nuisance_factors: usize,
    /// Standard deviation each nuisance gene inherits from its factor.
    pub nuisance_scale: f64,
    /// The last genes of the list, expressed at `housekeeping_level` with a
    /// 10% relative spread and no class or factor signal. At a high level
    /// they dominate library sizes, as a few genes do in real cells.
    pub housekeeping_genes: usize,
    pub housekeeping_level: f64,
    pub baseline: f64,
    pub noise_std: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_cells_per_class: vec![100; 3],
            n_genes: 200,
            class_separation: 8.0,
            informative_genes: 30,
            sparsity: 0.0,
            batch_offsets: None,
            seed: 0,
            nuisance_genes: 0,
            nuisance_factors: 0,
            nuisance_scale: 4.0,
            housekeeping_genes: 0,
            housekeeping_level: 10_000.0,
            baseline: 5.0,
            noise_std: 1.0,
        }
    }
}

impl SynthSpec {
    pub fn n_classes(&self) -> usize {
        self.n_cells_per_class.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells_per_class.iter().sum()
    }

    /// Informative genes per class block.
    pub fn block_size(&self) -> usize {
        self.informative_genes / self.n_classes().max(1)
    }

    /// Shift applied to each gene of a class's block. Two centroids differ
    /// on two blocks, so their distance is `shift · sqrt(2 · block)`.
    pub fn class_shift(&self) -> f64 {
        let g = self.block_size();
        if g == 0 {
            return 0.0;
        }
        self.class_separation * self.noise_std / libm::sqrt(2.0 * g as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_classes();
        if k < 2 {
            return Err(Error::invalid("synthetic data needs at least two classes"));
        }
        if let Some(c) = self.n_cells_per_class.iter().position(|&c| c < 2) {
            return Err(Error::invalid(format!("class {c} needs at least two cells")));
        }
        if self.n_genes == 0 {
            return Err(Error::invalid("synthetic data needs at least one gene"));
        }
        if self.informative_genes > self.n_genes {
            return Err(Error::invalid("informative genes exceed the gene count"));
        }
        if self.class_separation != 0.0 && self.informative_genes < k {
            return Err(Error::invalid("need at least one informative gene per class"));
        }
        if !(self.class_separation >= 0.0) || !self.class_separation.is_finite() {
            return Err(Error::invalid("class separation must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::invalid("sparsity must lie in [0, 1)"));
        }
        if self.informative_genes + self.nuisance_genes > self.n_genes {
            return Err(Error::invalid("informative plus nuisance genes exceed the gene count"));
        }
        if self.informative_genes + self.nuisance_genes + self.housekeeping_genes > self.n_genes {
            return Err(Error::invalid("informative, nuisance and housekeeping genes exceed the gene count"));
        }
        if self.nuisance_genes > 0 && self.nuisance_factors == 0 {
            return Err(Error::invalid("nuisance genes need at least one factor"));
        }
        for (name, v) in [
            ("nuisance scale", self.nuisance_scale),
            ("housekeeping level", self.housekeeping_level),
            ("baseline", self.baseline),
            ("noise std", self.noise_std),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and non-negative")));
            }
        }
        if let Some(offsets) = &self.batch_offsets {
            if offsets.is_empty() || offsets.iter().any(|o| !o.is_finite()) {
                return Err(Error::invalid("batch offsets must be a non-empty list of finite values"));
            }
        }
        Ok(())
    }

    /// The unit gene-space direction batches are shifted along.
    pub fn batch_direction(&self) -> Vec<f64> {
        let mut rng = rng_from_seed(self.seed ^ 0x6261_7463_6864_6972);
        let mut d: Vec<f64> = (0..self.n_genes).map(|_| rng.sample(StandardNormal)).collect();
        let n = linalg::norm(&d);
        d.iter_mut().for_each(|v| *v /= n);
        d
    }

    /// Generates the dataset. Cells are laid out class by class and named
    /// `cell000000…`, genes `gene00000…`, labels `type_0…`, batches
    /// `batch_0…`.
    pub fn generate(&self) -> Result<LabeledDataset> {
        self.validate()?;
        let k = self.n_classes();
        let n = self.n_cells();
        let m = self.n_genes;
        let block = self.block_size();
        let shift = self.class_shift();
        let nuisance_start = self.informative_genes;
        let per_factor = if self.nuisance_factors == 0 {
            0
        } else {
            self.nuisance_genes.div_ceil(self.nuisance_factors)
        };
        // keep nuisance genes clear of the truncation at zero
        let nuisance_base = self.baseline.max(4.0 * self.nuisance_scale);
        let housekeeping_start = m - self.housekeeping_genes;
        let direction = self.batch_direction();

        let mut rng = rng_from_seed(self.seed);
        let mut values = Matrix::zeros(n, m);
        let mut labels = Vec::with_capacity(n);
        let mut batch = self.batch_offsets.as_ref().map(|_| Vec::with_capacity(n));
        let mut factors = vec![0.0; self.nuisance_factors];
        let mut cell = 0;
        for (class, &count) in self.n_cells_per_class.iter().enumerate() {
            for _ in 0..count {
                for f in factors.iter_mut() {
                    *f = rng.sample(StandardNormal);
                }
                let offset = self.batch_offsets.as_ref().map(|o| {
                    let b = cell % o.len();
                    if let Some(ids) = batch.as_mut() {
                        ids.push(format!("batch_{b}"));
                    }
                    o[b]
                });
                let row = values.row_mut(cell);
                for (g, v) in row.iter_mut().enumerate() {
                    let noise: f64 = rng.sample(StandardNormal);
                    let mut x = self.noise_std * noise;
                    if g >= housekeeping_start {
                        x = self.housekeeping_level * (1.0 + 0.1 * noise);
                    } else if g >= nuisance_start && g < nuisance_start + self.nuisance_genes {
                        x += nuisance_base + self.nuisance_scale * factors[(g - nuisance_start) / per_factor];
                    } else {
                        x += self.baseline;
                    }
                    if block > 0 && g < block * k && g / block == class {
                        x += shift;
                    }
                    if let Some(o) = offset {
                        x += o * direction[g];
                    }
                    let dropped = self.sparsity > 0.0 && rng.random::<f64>() < self.sparsity;
                    *v = if dropped { 0.0 } else { x.max(0.0) };
                }
                labels.push(format!("type_{class}"));
                cell += 1;
            }
        }
        let genes = (0..m).map(|g| format!("gene{g:05}")).collect();
        let cells = (0..n).map(|c| format!("cell{c:06}")).collect();
        let matrix = ExpressionMatrix::from_dense(&values, genes, cells)?;
        LabeledDataset::new(matrix, labels, batch)
    }
}

/// Sorted-label class centroids of a dataset, densified.
pub fn class_centroids(dataset: &LabeledDataset) -> (Vec<String>, Vec<Vec<f64>>) {
    let (dict, ids) = dataset.encode_labels();
    let m = dataset.matrix.n_genes();
    let mut sums = vec![vec![0.0; m]; dict.len()];
    let mut counts = vec![0usize; dict.len()];
    for (cell, &c) in ids.iter().enumerate() {
        let (genes, vals) = dataset.matrix.row(cell);
        for (&g, &v) in genes.iter().zip(vals) {
            sums[c][g] += v;
        }
        counts[c] += 1;
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= c as f64);
    }
    (dict, sums)
}
