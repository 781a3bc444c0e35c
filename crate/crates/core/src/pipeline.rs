//! End-to-end model: fitted preprocessing, optional convolutional front
//! end and the ELM head, stored as one JSON document so on-line
//! prediction needs nothing but the model file.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{split_validation, Label, Manifest, RadioMap};
use crate::elm::{sweep_hidden, ElmModel, SweepResult};
use crate::error::{Error, Result};
use crate::featurizer::{featurize, init_featurizer, FeaturizerOverrides, FeaturizerSpec};
use crate::linalg::DenseMatrix;
use crate::preprocess::{NormMode, PreprocessParams};

pub const MODEL_FORMAT: &str = "cnnelm-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Knn,
    ElmOnly,
    CnnElm,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::Knn, Approach::ElmOnly, Approach::CnnElm];

    pub fn key(self) -> &'static str {
        match self {
            Approach::Knn => "knn",
            Approach::ElmOnly => "elm_only",
            Approach::CnnElm => "cnn_elm",
        }
    }

    pub fn is_stochastic(self) -> bool {
        self != Approach::Knn
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::Knn => "1-NN",
            Approach::ElmOnly => "ELM",
            Approach::CnnElm => "CNN-ELM",
        })
    }
}

impl std::str::FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "knn" | "1nn" | "1_nn" => Ok(Approach::Knn),
            "elm" | "elm_only" => Ok(Approach::ElmOnly),
            "cnn_elm" | "cnnelm" => Ok(Approach::CnnElm),
            other => Err(Error::Config(format!(
                "unknown approach '{other}' (knn | elm_only | cnn_elm)"
            ))),
        }
    }
}

/// Everything needed to train one ELM-based model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub approach: Approach,
    pub hidden: usize,
    pub c: f64,
    pub seed: u64,
    pub norm_mode: NormMode,
    pub kernel_size: usize,
    pub n_filters: usize,
    pub quantize: bool,
}

impl TrainConfig {
    pub fn new(approach: Approach, hidden: usize, c: f64, seed: u64) -> Self {
        Self {
            approach,
            hidden,
            c,
            seed,
            norm_mode: NormMode::PerFeature,
            kernel_size: 3,
            n_filters: 2,
            quantize: false,
        }
    }

    pub fn featurizer_overrides(&self) -> FeaturizerOverrides {
        FeaturizerOverrides {
            n_filters: Some(self.n_filters),
            kernel_size: Some(self.kernel_size),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub dataset: String,
    pub config: TrainConfig,
    pub config_digest: String,
    pub n_aps: usize,
    /// Column layout of the training file, reused for query files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<Manifest>,
    pub preprocess: PreprocessParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub featurizer: Option<FeaturizerSpec>,
    pub elm: ElmModel,
}

impl TrainedModel {
    pub fn fit(train: &RadioMap, config: &TrainConfig) -> Result<Self> {
        if config.approach == Approach::Knn {
            return Err(Error::Config(
                "1-NN has no trainable model; use the benchmark harness".into(),
            ));
        }
        let preprocess = PreprocessParams::fit(train, config.norm_mode)?;
        let x = preprocess.transform(&train.rss)?;
        let featurizer = match config.approach {
            Approach::CnnElm => Some(init_featurizer(
                config.seed,
                train.n_aps(),
                &config.featurizer_overrides(),
            )?),
            _ => None,
        };
        let x = match &featurizer {
            Some(spec) => featurize(&x, spec)?,
            None => x,
        };
        let mut elm = ElmModel::train(&x, &train.labels(), config.hidden, config.c, config.seed)?;
        if config.quantize {
            elm = elm.quantize();
        }
        Ok(Self {
            format: MODEL_FORMAT.to_string(),
            dataset: train.name.clone(),
            config_digest: crate::eval::config_digest(&(&train.name, config)),
            config: config.clone(),
            n_aps: train.n_aps(),
            manifest: None,
            preprocess,
            featurizer,
            elm,
        })
    }

    /// Preprocessed (and featurized, when configured) inputs for the ELM.
    pub fn features(&self, rss: &DenseMatrix) -> Result<DenseMatrix> {
        if rss.cols() != self.n_aps {
            return Err(Error::Shape(format!(
                "model expects {} APs, got {}",
                self.n_aps,
                rss.cols()
            )));
        }
        let x = self.preprocess.transform(rss)?;
        match &self.featurizer {
            Some(spec) => featurize(&x, spec),
            None => Ok(x),
        }
    }

    pub fn predict(&self, rss: &DenseMatrix, quantized: bool) -> Result<Vec<Label>> {
        let x = self.features(rss)?;
        if quantized {
            self.elm.predict_quantized(&x)
        } else {
            self.elm.predict(&x)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let model: TrainedModel = serde_json::from_reader(std::io::BufReader::new(file))?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Config(format!(
                "unsupported model format '{}'",
                model.format
            )));
        }
        Ok(model)
    }
}

/// Holds out a stratified `val_fraction` of `train`, fits preprocessing on
/// the rest and sweeps the hidden-layer size over `5, 5 + step, ..., l_max`
/// for the configured approach. `config.hidden` is ignored.
pub fn sweep(
    train: &RadioMap,
    config: &TrainConfig,
    l_max: usize,
    step: usize,
    val_fraction: f64,
) -> Result<SweepResult> {
    if config.approach == Approach::Knn {
        return Err(Error::Config("1-NN has no hidden layer to sweep".into()));
    }
    let (fit_map, val_map) = split_validation(train, val_fraction, config.seed)?;
    let preprocess = PreprocessParams::fit(&fit_map, config.norm_mode)?;
    let mut x_fit = preprocess.transform(&fit_map.rss)?;
    let mut x_val = preprocess.transform(&val_map.rss)?;
    if config.approach == Approach::CnnElm {
        let spec = init_featurizer(config.seed, train.n_aps(), &config.featurizer_overrides())?;
        x_fit = featurize(&x_fit, &spec)?;
        x_val = featurize(&x_val, &spec)?;
    }
    sweep_hidden(
        &x_fit,
        &fit_map.labels(),
        &x_val,
        &val_map.labels(),
        config.c,
        l_max,
        step,
        config.seed,
    )
}
