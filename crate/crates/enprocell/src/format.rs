//! The single-file pipeline container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ENPC" | version: u32 | payload length: u64 | payload | SHA-256 of everything before it
//! ```
//!
//! The payload holds the recipe, both projection bases, the network, the
//! reference centroid and the training metadata. Matrices are stored as
//! `rows: u64, cols: u64` followed by row-major `f64`s. Nothing time- or
//! host-dependent is written, so equal pipelines give equal bytes.

use std::path::Path;

use enprocell_core::classifier::{Dense, EpochRecord};
use enprocell_core::{
    ClassifierModel, MdaBasis, Matrix, NetworkConfig, PcaBasis, PipelineConfig, PreprocessRecipe, ProjectionBasis,
    TrainedPipeline, TrainingMeta,
};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ENPC";
pub const FORMAT_VERSION: u32 = 1;
const PREFIX: usize = 4 + 4 + 8;
const DIGEST: usize = 32;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bool(&mut self, v: bool) {
        self.u8(v as u8);
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn strs(&mut self, v: &[String]) {
        self.usize(v.len());
        v.iter().for_each(|s| self.str(s));
    }
    fn f64s(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|x| self.f64(*x));
    }
    fn matrix(&mut self, m: &Matrix) {
        self.usize(m.rows());
        self.usize(m.cols());
        m.as_slice().iter().for_each(|x| self.f64(*x));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

type Decode<T> = std::result::Result<T, String>;

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Decode<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("payload ends early")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Decode<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Decode<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Decode<usize> {
        usize::try_from(self.u64()?).map_err(|_| "length overflows usize".into())
    }
    /// A count of items at least `item_size` bytes each, checked against the
    /// remaining payload before anything is allocated.
    fn count(&mut self, item_size: usize) -> Decode<usize> {
        let n = self.usize()?;
        if n.saturating_mul(item_size) > self.bytes.len() - self.pos {
            return Err("length field exceeds payload".into());
        }
        Ok(n)
    }
    fn f64(&mut self) -> Decode<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn bool(&mut self) -> Decode<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(format!("invalid flag byte {b}")),
        }
    }
    fn str(&mut self) -> Decode<String> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "invalid UTF-8 string".into())
    }
    fn strs(&mut self) -> Decode<Vec<String>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.str()).collect()
    }
    fn f64s(&mut self) -> Decode<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn matrix(&mut self) -> Decode<Matrix> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let len = rows.checked_mul(cols).ok_or("matrix size overflows")?;
        if len.saturating_mul(8) > self.bytes.len() - self.pos {
            return Err("matrix exceeds payload".into());
        }
        let data = (0..len).map(|_| self.f64()).collect::<Decode<Vec<f64>>>()?;
        Matrix::from_vec(rows, cols, data).map_err(|e| e.to_string())
    }
}

fn encode_payload(p: &TrainedPipeline) -> Vec<u8> {
    let mut w = Writer::default();
    let r = &p.recipe;
    w.usize(r.hvg_count);
    w.f64(r.size_factor_target);
    w.strs(&r.selected_genes);
    w.f64s(&r.per_gene_mean);
    w.f64s(&r.per_gene_std);

    let b = &p.basis;
    w.strs(&b.gene_names);
    w.matrix(&b.pca.components);
    w.f64s(&b.pca.eigenvalues);
    w.f64s(&b.pca.center);
    w.f64(b.pca.total_variance);
    w.bool(b.mda.is_some());
    if let Some(mda) = &b.mda {
        w.matrix(&mda.components);
        w.f64s(&mda.eigenvalues);
        w.usize(mda.class_means.len());
        mda.class_means.iter().for_each(|m| w.f64s(m));
        w.f64(mda.regularization);
    }

    let m = &p.model;
    w.usize(m.input_dim);
    w.strs(&m.label_dict);
    w.usize(m.layers.len());
    for layer in &m.layers {
        w.matrix(&layer.weights);
        w.f64s(&layer.bias);
    }
    w.f64s(&p.reference_centroid);

    let meta = &p.meta;
    let c = &meta.config;
    w.usize(c.hvg_count);
    w.usize(c.n_pcs);
    w.bool(c.use_mda);
    w.f64(c.epsilon_scale);
    w.bool(c.align_batches);
    let n = &c.network;
    w.usize(n.hidden_sizes.len());
    n.hidden_sizes.iter().for_each(|h| w.usize(*h));
    w.u64(n.seed);
    w.usize(n.epochs);
    w.usize(n.batch_size);
    w.f64(n.learning_rate);
    w.f64(n.validation_fraction);
    w.usize(n.patience);
    w.usize(meta.n_train_cells);
    w.usize(meta.history.len());
    for e in &meta.history {
        w.usize(e.epoch);
        w.f64(e.train_loss);
        w.f64(e.val_loss);
        w.f64(e.val_accuracy);
    }
    w.usize(meta.best_epoch);
    w.usize(meta.fingerprints.len());
    for (name, digest) in &meta.fingerprints {
        w.str(name);
        w.str(digest);
    }
    w.0
}

fn decode_payload(bytes: &[u8]) -> Decode<TrainedPipeline> {
    let mut r = Reader { bytes, pos: 0 };
    let recipe = PreprocessRecipe {
        hvg_count: r.usize()?,
        size_factor_target: r.f64()?,
        selected_genes: r.strs()?,
        per_gene_mean: r.f64s()?,
        per_gene_std: r.f64s()?,
    };

    let gene_names = r.strs()?;
    let pca = PcaBasis {
        components: r.matrix()?,
        eigenvalues: r.f64s()?,
        center: r.f64s()?,
        total_variance: r.f64()?,
    };
    let mda = if r.bool()? {
        let components = r.matrix()?;
        let eigenvalues = r.f64s()?;
        let k = r.count(8)?;
        let class_means = (0..k).map(|_| r.f64s()).collect::<Decode<_>>()?;
        Some(MdaBasis {
            components,
            eigenvalues,
            class_means,
            regularization: r.f64()?,
        })
    } else {
        None
    };
    let basis = ProjectionBasis::ensemble(pca, mda, gene_names).map_err(|e| e.to_string())?;

    let input_dim = r.usize()?;
    let label_dict = r.strs()?;
    let n_layers = r.count(16)?;
    let layers = (0..n_layers)
        .map(|_| {
            Ok(Dense {
                weights: r.matrix()?,
                bias: r.f64s()?,
            })
        })
        .collect::<Decode<_>>()?;
    let model = ClassifierModel {
        layers,
        label_dict,
        input_dim,
    };
    let reference_centroid = r.f64s()?;

    let hvg_count = r.usize()?;
    let n_pcs = r.usize()?;
    let use_mda = r.bool()?;
    let epsilon_scale = r.f64()?;
    let align_batches = r.bool()?;
    let n_hidden = r.count(8)?;
    let hidden_sizes = (0..n_hidden).map(|_| r.usize()).collect::<Decode<_>>()?;
    let network = NetworkConfig {
        hidden_sizes,
        seed: r.u64()?,
        epochs: r.usize()?,
        batch_size: r.usize()?,
        learning_rate: r.f64()?,
        validation_fraction: r.f64()?,
        patience: r.usize()?,
    };
    let n_train_cells = r.usize()?;
    let n_epochs = r.count(32)?;
    let history = (0..n_epochs)
        .map(|_| {
            Ok(EpochRecord {
                epoch: r.usize()?,
                train_loss: r.f64()?,
                val_loss: r.f64()?,
                val_accuracy: r.f64()?,
            })
        })
        .collect::<Decode<_>>()?;
    let best_epoch = r.usize()?;
    let n_prints = r.count(16)?;
    let fingerprints = (0..n_prints).map(|_| Ok((r.str()?, r.str()?))).collect::<Decode<_>>()?;
    if r.pos != bytes.len() {
        return Err(format!("{} trailing payload bytes", bytes.len() - r.pos));
    }
    Ok(TrainedPipeline {
        recipe,
        basis,
        model,
        reference_centroid,
        meta: TrainingMeta {
            config: PipelineConfig {
                hvg_count,
                n_pcs,
                use_mda,
                epsilon_scale,
                align_batches,
                network,
            },
            n_train_cells,
            history,
            best_epoch,
            fingerprints,
        },
    })
}

/// The complete file contents for `pipeline`.
pub fn to_bytes(pipeline: &TrainedPipeline) -> Vec<u8> {
    let payload = encode_payload(pipeline);
    let mut out = Vec::with_capacity(PREFIX + payload.len() + DIGEST);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Parses file contents; `path` only labels errors. The version is checked
/// before the checksum so files from a newer writer say so explicitly.
pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<TrainedPipeline> {
    if bytes.len() < PREFIX + DIGEST || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "not a pipeline file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            path: path.to_owned(),
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let declared = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if declared != (bytes.len() - PREFIX - DIGEST) as u64 {
        return Err(Error::Checksum(path.to_owned()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checksum(path.to_owned()));
    }
    let pipeline = decode_payload(&body[PREFIX..]).map_err(|m| Error::format(path, m))?;
    pipeline.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(pipeline)
}

pub fn save_pipeline(pipeline: &TrainedPipeline, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(pipeline)).map_err(|e| Error::io(path, e))
}

pub fn load_pipeline(path: &Path) -> Result<TrainedPipeline> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
