//! Flat `key=value` run configuration shared by every command.
//!
//! Keys are the long flag names without dashes (`hvg=2000`, `hidden=64,16`).
//! Precedence is defaults, then the config file, then flags. Outputs echo
//! the effective configuration as `#@ key=value` comment lines, and a config
//! file may contain such lines verbatim, so any output header can be fed
//! back with `--config` to reproduce it.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use enprocell_core::classifier::ARCHITECTURES;
use enprocell_core::preprocess::DEFAULT_HVG_COUNT;
use enprocell_core::projection::DEFAULT_EPSILON_SCALE;
use enprocell_core::{NetworkConfig, PipelineConfig, SynthSpec};

use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_TEST_FRACTION;
use crate::io::{Delimiter, LabelOptions, Orientation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Intra,
    Inter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Dense,
    Mtx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub ref_matrix: Vec<String>,
    pub ref_labels: Vec<String>,
    pub query: Option<String>,
    pub query_labels: Option<String>,
    pub model: Option<String>,
    pub format: MatrixFormat,
    pub orientation: Orientation,
    pub delimiter: Delimiter,
    pub labels_header: bool,
    pub hvg: usize,
    /// A single value for train/evaluate; the grid for sweep.
    pub pcs: Vec<usize>,
    pub mda: bool,
    pub epsilon: f64,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub val_frac: f64,
    pub patience: usize,
    pub split_seed: u64,
    pub test_frac: f64,
    pub align_batches: bool,
    pub probs: bool,
    pub repeats: usize,
    pub cells_per_class: Vec<usize>,
    pub genes: usize,
    pub separation: f64,
    pub informative: usize,
    pub sparsity: f64,
    pub batch_offsets: Vec<f64>,
    pub nuisance_genes: usize,
    pub nuisance_factors: usize,
    pub nuisance_scale: f64,
    pub baseline: f64,
    pub housekeeping_genes: usize,
    pub housekeeping_level: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let net = NetworkConfig::default();
        let synth = SynthSpec::default();
        RunConfig {
            mode: Mode::Intra,
            ref_matrix: Vec::new(),
            ref_labels: Vec::new(),
            query: None,
            query_labels: None,
            model: None,
            format: MatrixFormat::Dense,
            orientation: Orientation::CellsAsRows,
            delimiter: Delimiter::Comma,
            labels_header: false,
            hvg: DEFAULT_HVG_COUNT,
            pcs: vec![100],
            mda: true,
            epsilon: DEFAULT_EPSILON_SCALE,
            hidden: net.hidden_sizes,
            epochs: net.epochs,
            batch_size: net.batch_size,
            lr: net.learning_rate,
            seed: net.seed,
            val_frac: net.validation_fraction,
            patience: net.patience,
            split_seed: 0,
            test_frac: DEFAULT_TEST_FRACTION,
            align_batches: true,
            probs: false,
            repeats: 5,
            cells_per_class: vec![200; 5],
            genes: 500,
            separation: synth.class_separation,
            informative: 50,
            sparsity: 0.3,
            batch_offsets: Vec::new(),
            nuisance_genes: 0,
            nuisance_factors: 0,
            nuisance_scale: synth.nuisance_scale,
            baseline: 0.0,
            housekeeping_genes: 10,
            housekeeping_level: synth.housekeeping_level,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v)).collect()
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key} takes on or off, got {value:?}"))),
    }
}

/// An empty value clears an optional path.
fn optional(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_owned())
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn switch(b: bool) -> String {
    if b { "on" } else { "off" }.to_owned()
}

/// `network1`…`network6` or an explicit comma-separated width list.
pub fn parse_hidden(value: &str) -> Result<Vec<usize>> {
    if let Some(n) = value.trim().strip_prefix("network") {
        let i: usize = parse("hidden", n)?;
        return ARCHITECTURES
            .get(i.wrapping_sub(1))
            .map(|a| a.to_vec())
            .ok_or_else(|| Error::Config(format!("no architecture {value:?}; use network1 to network6")));
    }
    let sizes: Vec<usize> = parse_list("hidden", value)?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::Config("hidden needs one or more positive widths".into()));
    }
    Ok(sizes)
}

impl RunConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "mode" => {
                self.mode = match v {
                    "intra" => Mode::Intra,
                    "inter" => Mode::Inter,
                    _ => return Err(Error::Config(format!("mode takes intra or inter, got {v:?}"))),
                }
            }
            "ref-matrix" => self.ref_matrix = v.split(',').filter(|s| !s.is_empty()).map(str::to_owned).collect(),
            "ref-labels" => self.ref_labels = v.split(',').filter(|s| !s.is_empty()).map(str::to_owned).collect(),
            "query" => self.query = optional(v),
            "query-labels" => self.query_labels = optional(v),
            "model" => self.model = optional(v),
            "format" => {
                self.format = match v {
                    "dense" => MatrixFormat::Dense,
                    "mtx" => MatrixFormat::Mtx,
                    _ => return Err(Error::Config(format!("format takes dense or mtx, got {v:?}"))),
                }
            }
            "orientation" => {
                self.orientation = match v {
                    "cells" => Orientation::CellsAsRows,
                    "genes" => Orientation::GenesAsRows,
                    _ => return Err(Error::Config(format!("orientation takes cells or genes, got {v:?}"))),
                }
            }
            "delimiter" => {
                self.delimiter = match v {
                    "comma" => Delimiter::Comma,
                    "tab" => Delimiter::Tab,
                    _ => return Err(Error::Config(format!("delimiter takes comma or tab, got {v:?}"))),
                }
            }
            "labels-header" => self.labels_header = parse_switch(key, v)?,
            "hvg" => self.hvg = parse(key, v)?,
            "pcs" => {
                self.pcs = parse_list(key, v)?;
                if self.pcs.is_empty() {
                    return Err(Error::Config("pcs needs at least one value".into()));
                }
            }
            "mda" => self.mda = parse_switch(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "hidden" => self.hidden = parse_hidden(v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch-size" => self.batch_size = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "val-frac" => self.val_frac = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "split-seed" => self.split_seed = parse(key, v)?,
            "test-frac" => self.test_frac = parse(key, v)?,
            "align-batches" => self.align_batches = parse_switch(key, v)?,
            "probs" => self.probs = parse_switch(key, v)?,
            "repeats" => self.repeats = parse(key, v)?,
            "cells-per-class" => self.cells_per_class = parse_list(key, v)?,
            "genes" => self.genes = parse(key, v)?,
            "separation" => self.separation = parse(key, v)?,
            "informative" => self.informative = parse(key, v)?,
            "sparsity" => self.sparsity = parse(key, v)?,
            "batch-offsets" => self.batch_offsets = parse_list(key, v)?,
            "nuisance-genes" => self.nuisance_genes = parse(key, v)?,
            "nuisance-factors" => self.nuisance_factors = parse(key, v)?,
            "nuisance-scale" => self.nuisance_scale = parse(key, v)?,
            "baseline" => self.baseline = parse(key, v)?,
            "housekeeping-genes" => self.housekeeping_genes = parse(key, v)?,
            "housekeeping-level" => self.housekeeping_level = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a config file of `key=value` lines and `#` comments.
    ///
    /// A file with `#@` lines is taken to be a previous output: only those
    /// lines are read and the rest (its table) is ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let echoed = text.lines().any(|l| l.trim_start().starts_with("#@"));
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.trim().strip_prefix("#@") {
                Some(setting) => setting.trim(),
                None if echoed || raw.trim().starts_with('#') => continue,
                None => raw.trim(),
            };
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    /// Every setting in canonical form, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |o: &Option<String>| o.clone().unwrap_or_default();
        vec![
            ("mode", match self.mode { Mode::Intra => "intra", Mode::Inter => "inter" }.to_owned()),
            ("ref-matrix", self.ref_matrix.join(",")),
            ("ref-labels", self.ref_labels.join(",")),
            ("query", opt(&self.query)),
            ("query-labels", opt(&self.query_labels)),
            ("model", opt(&self.model)),
            ("format", match self.format { MatrixFormat::Dense => "dense", MatrixFormat::Mtx => "mtx" }.to_owned()),
            (
                "orientation",
                match self.orientation { Orientation::CellsAsRows => "cells", Orientation::GenesAsRows => "genes" }.to_owned(),
            ),
            ("delimiter", match self.delimiter { Delimiter::Comma => "comma", Delimiter::Tab => "tab" }.to_owned()),
            ("labels-header", switch(self.labels_header)),
            ("hvg", self.hvg.to_string()),
            ("pcs", join(&self.pcs)),
            ("mda", switch(self.mda)),
            ("epsilon", self.epsilon.to_string()),
            ("hidden", join(&self.hidden)),
            ("epochs", self.epochs.to_string()),
            ("batch-size", self.batch_size.to_string()),
            ("lr", self.lr.to_string()),
            ("seed", self.seed.to_string()),
            ("val-frac", self.val_frac.to_string()),
            ("patience", self.patience.to_string()),
            ("split-seed", self.split_seed.to_string()),
            ("test-frac", self.test_frac.to_string()),
            ("align-batches", switch(self.align_batches)),
            ("probs", switch(self.probs)),
            ("repeats", self.repeats.to_string()),
            ("cells-per-class", join(&self.cells_per_class)),
            ("genes", self.genes.to_string()),
            ("separation", self.separation.to_string()),
            ("informative", self.informative.to_string()),
            ("sparsity", self.sparsity.to_string()),
            ("batch-offsets", join(&self.batch_offsets)),
            ("nuisance-genes", self.nuisance_genes.to_string()),
            ("nuisance-factors", self.nuisance_factors.to_string()),
            ("nuisance-scale", self.nuisance_scale.to_string()),
            ("baseline", self.baseline.to_string()),
            ("housekeeping-genes", self.housekeeping_genes.to_string()),
            ("housekeeping-level", self.housekeeping_level.to_string()),
        ]
    }

    /// `#@ key=value` lines for the top of an output file.
    pub fn header(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("#@ {k}={v}\n")).collect()
    }

    pub fn label_options(&self) -> LabelOptions {
        LabelOptions {
            delimiter: self.delimiter,
            header: self.labels_header,
        }
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            hidden_sizes: self.hidden.clone(),
            seed: self.seed,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            validation_fraction: self.val_frac,
            patience: self.patience,
        }
    }

    /// Pipeline settings with `n_pcs` taken from the (single-valued) `pcs`.
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let [n_pcs] = self.pcs[..] else {
            return Err(Error::Config("pcs must be a single value for this command".into()));
        };
        Ok(self.pipeline_config_with(n_pcs))
    }

    pub fn pipeline_config_with(&self, n_pcs: usize) -> PipelineConfig {
        PipelineConfig {
            hvg_count: self.hvg,
            n_pcs,
            use_mda: self.mda,
            epsilon_scale: self.epsilon,
            align_batches: self.align_batches,
            network: self.network_config(),
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            n_cells_per_class: self.cells_per_class.clone(),
            n_genes: self.genes,
            class_separation: self.separation,
            informative_genes: self.informative,
            sparsity: self.sparsity,
            batch_offsets: (!self.batch_offsets.is_empty()).then(|| self.batch_offsets.clone()),
            seed: self.seed,
            nuisance_genes: self.nuisance_genes,
            nuisance_factors: self.nuisance_factors,
            nuisance_scale: self.nuisance_scale,
            housekeeping_genes: self.housekeeping_genes,
            housekeeping_level: self.housekeeping_level,
            baseline: self.baseline,
            ..SynthSpec::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use enprocell_core::classifier::DEFAULT_ARCHITECTURE;

    #[test]
    fn defaults_match_the_library() {
        let c = RunConfig::default();
        assert_eq!(c.hidden, ARCHITECTURES[DEFAULT_ARCHITECTURE]);
        assert_eq!(c.pipeline_config().unwrap().network, NetworkConfig::default());
    }

    #[test]
    fn presets_and_lists() {
        assert_eq!(parse_hidden("network1").unwrap(), [64, 16]);
        assert_eq!(parse_hidden("100,55").unwrap(), [100, 55]);
        assert!(parse_hidden("network7").is_err());
        assert!(parse_hidden("network0").is_err());
        assert!(parse_hidden("3,0").is_err());
    }

    #[test]
    fn header_round_trips_through_a_config_file() {
        let mut c = RunConfig::default();
        c.set("pcs", "0,10,20").unwrap();
        c.set("lr", "0.0005").unwrap();
        c.set("align-batches", "off").unwrap();
        c.set("ref-matrix", "a.csv,b.csv").unwrap();
        c.set("batch-offsets", "0,2.5").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("echo.cfg");
        std::fs::write(&p, format!("# produced by a run\n{}accuracy,macro_f1\n1,1\n", c.header())).unwrap();
        let mut back = RunConfig::default();
        back.apply_file(&p).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bad_settings() {
        let mut c = RunConfig::default();
        assert!(c.set("nope", "1").is_err());
        assert!(c.set("hvg", "-3").is_err());
        assert!(c.set("mda", "maybe").is_err());
        c.set("pcs", "5,6").unwrap();
        assert!(c.pipeline_config().is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.cfg");
        std::fs::write(&p, "hvg 20\n").unwrap();
        let err = c.apply_file(&p).unwrap_err();
        assert!(err.to_string().contains(":1:"));
    }
}
