//! Run configuration: command-line flags, an optional JSON config file and
//! registry defaults, resolved in that order of precedence.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cnnelm::dataset::DatasetDescriptor;
use cnnelm::{Approach, Error, NormMode, Result, TrainConfig};
use serde::{Deserialize, Serialize};

/// Hidden-layer size: a count, or `auto` to pick one by validation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Raw", into = "Raw")]
pub enum HiddenSetting {
    Count(usize),
    Auto,
}

/// Regularization term: a value, or `registry` for the dataset default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Raw", into = "Raw")]
pub enum CSetting {
    Value(f64),
    Registry,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Raw {
    Int(u64),
    Num(f64),
    Text(String),
}

impl FromStr for HiddenSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Self::Count(n)),
            _ => Err(format!("expected a positive count or 'auto', got '{s}'")),
        }
    }
}

impl FromStr for CSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("registry") {
            return Ok(Self::Registry);
        }
        match s.parse::<f64>() {
            Ok(c) if c > 0.0 && c.is_finite() => Ok(Self::Value(c)),
            _ => Err(format!(
                "expected a positive number or 'registry', got '{s}'"
            )),
        }
    }
}

impl TryFrom<Raw> for HiddenSetting {
    type Error = String;

    fn try_from(raw: Raw) -> std::result::Result<Self, String> {
        match raw {
            Raw::Int(n) if n > 0 => Ok(Self::Count(n as usize)),
            Raw::Int(n) => Err(format!("L must be a positive integer, got {n}")),
            Raw::Num(n) => Err(format!("L must be a positive integer, got {n}")),
            Raw::Text(s) => s.parse(),
        }
    }
}

impl From<HiddenSetting> for Raw {
    fn from(h: HiddenSetting) -> Self {
        match h {
            HiddenSetting::Count(n) => Raw::Int(n as u64),
            HiddenSetting::Auto => Raw::Text("auto".into()),
        }
    }
}

impl TryFrom<Raw> for CSetting {
    type Error = String;

    fn try_from(raw: Raw) -> std::result::Result<Self, String> {
        match raw {
            Raw::Int(c) => Raw::Text(c.to_string()).try_into(),
            Raw::Num(c) => Raw::Text(c.to_string()).try_into(),
            Raw::Text(s) => s.parse(),
        }
    }
}

impl From<CSetting> for Raw {
    fn from(c: CSetting) -> Self {
        match c {
            CSetting::Value(v) => Raw::Num(v),
            CSetting::Registry => Raw::Text("registry".into()),
        }
    }
}

/// Keys accepted in a `--config` JSON file; all optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<String>,
    pub approach: Option<Approach>,
    pub seed: Option<u64>,
    #[serde(rename = "L")]
    pub hidden: Option<HiddenSetting>,
    pub c: Option<CSetting>,
    pub norm_mode: Option<NormMode>,
    pub kernel_size: Option<usize>,
    pub n_filters: Option<usize>,
    pub quantize: Option<bool>,
    pub output_dir: Option<PathBuf>,
    pub l_max: Option<usize>,
    pub step: Option<usize>,
    pub val_fraction: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Values given on the command line; `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct FlagConfig {
    pub dataset: Option<String>,
    pub approach: Option<Approach>,
    pub seed: Option<u64>,
    pub hidden: Option<HiddenSetting>,
    pub c: Option<CSetting>,
    pub norm_mode: Option<NormMode>,
    pub kernel_size: Option<usize>,
    pub n_filters: Option<usize>,
    pub quantize: bool,
    pub output_dir: Option<PathBuf>,
    pub l_max: Option<usize>,
    pub step: Option<usize>,
    pub val_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Flag,
    File,
    Registry,
    Sweep,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Flag => "flag",
            Source::File => "config file",
            Source::Registry => "registry",
            Source::Sweep => "sweep",
        })
    }
}

/// Fully resolved settings, echoed to the user and hashed into the
/// config digest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub dataset: String,
    pub approach: Approach,
    pub seed: u64,
    #[serde(rename = "L")]
    pub hidden: HiddenSetting,
    pub hidden_source: Source,
    pub c: f64,
    pub c_source: Source,
    pub norm_mode: NormMode,
    pub kernel_size: usize,
    pub n_filters: usize,
    pub quantize: bool,
    pub output_dir: PathBuf,
    pub l_max: usize,
    pub step: usize,
    pub val_fraction: f64,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_L_MAX: usize = 600;
pub const DEFAULT_STEP: usize = 5;
pub const DEFAULT_VAL_FRACTION: f64 = 0.2;

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<(T, Source)> {
    flag.map(|v| (v, Source::Flag))
        .or_else(|| file.map(|v| (v, Source::File)))
}

impl RunConfig {
    /// Dataset name from the flag or, failing that, the config file.
    pub fn dataset_name(flags: &FlagConfig, file: &FileConfig) -> Result<String> {
        flags
            .dataset
            .clone()
            .or_else(|| file.dataset.clone())
            .ok_or_else(|| Error::Config("no dataset given (--dataset or config file)".into()))
    }

    pub fn resolve(
        flags: FlagConfig,
        file: FileConfig,
        dataset: String,
        descriptor: Option<&DatasetDescriptor>,
    ) -> Result<Self> {
        let from_registry = |what: &str| {
            Error::Config(format!(
                "dataset '{dataset}' has no registry entry; give {what} explicitly"
            ))
        };
        let (hidden, hidden_source) = match pick(flags.hidden, file.hidden) {
            Some(h) => h,
            None => (
                HiddenSetting::Count(descriptor.ok_or_else(|| from_registry("--L"))?.hidden),
                Source::Registry,
            ),
        };
        let (c, c_source) = match pick(flags.c, file.c) {
            Some((CSetting::Value(c), src)) => (c, src),
            _ => (
                descriptor.ok_or_else(|| from_registry("--c"))?.c,
                Source::Registry,
            ),
        };
        let config = Self {
            approach: flags.approach.or(file.approach).unwrap_or(Approach::CnnElm),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            hidden,
            hidden_source,
            c,
            c_source,
            norm_mode: flags.norm_mode.or(file.norm_mode).unwrap_or_default(),
            kernel_size: flags.kernel_size.or(file.kernel_size).unwrap_or(3),
            n_filters: flags.n_filters.or(file.n_filters).unwrap_or(2),
            quantize: flags.quantize || file.quantize.unwrap_or(false),
            output_dir: flags
                .output_dir
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from(".")),
            l_max: flags.l_max.or(file.l_max).unwrap_or(DEFAULT_L_MAX),
            step: flags.step.or(file.step).unwrap_or(DEFAULT_STEP),
            val_fraction: flags
                .val_fraction
                .or(file.val_fraction)
                .unwrap_or(DEFAULT_VAL_FRACTION),
            dataset,
        };
        Ok(config)
    }

    pub fn train_config(&self, hidden: usize) -> TrainConfig {
        TrainConfig {
            norm_mode: self.norm_mode,
            kernel_size: self.kernel_size,
            n_filters: self.n_filters,
            quantize: self.quantize,
            ..TrainConfig::new(self.approach, hidden, self.c, self.seed)
        }
    }

    pub fn digest(&self) -> String {
        cnnelm::eval::config_digest(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cnnelm::registry_lookup;

    #[test]
    fn settings_parse() {
        assert_eq!(
            "auto".parse::<HiddenSetting>().unwrap(),
            HiddenSetting::Auto
        );
        assert_eq!(
            "530".parse::<HiddenSetting>().unwrap(),
            HiddenSetting::Count(530)
        );
        assert!("0".parse::<HiddenSetting>().is_err());
        assert_eq!("registry".parse::<CSetting>().unwrap(), CSetting::Registry);
        assert_eq!("0.1".parse::<CSetting>().unwrap(), CSetting::Value(0.1));
        assert!("-1".parse::<CSetting>().is_err());
    }

    #[test]
    fn file_config_accepts_numbers_and_keywords() {
        let f: FileConfig =
            serde_json::from_str(r#"{"L": "auto", "c": 0.05, "approach": "elm_only"}"#).unwrap();
        assert_eq!(f.hidden, Some(HiddenSetting::Auto));
        assert_eq!(f.c, Some(CSetting::Value(0.05)));
        assert_eq!(f.approach, Some(Approach::ElmOnly));
        assert!(serde_json::from_str::<FileConfig>(r#"{"hiden": 3}"#).is_err());
    }

    #[test]
    fn precedence_flag_file_registry() {
        let uji = registry_lookup("UJI1").unwrap();
        let file = FileConfig {
            hidden: Some(HiddenSetting::Count(100)),
            c: Some(CSetting::Value(0.5)),
            seed: Some(9),
            ..Default::default()
        };
        let flags = FlagConfig {
            hidden: Some(HiddenSetting::Count(200)),
            ..Default::default()
        };
        let r = RunConfig::resolve(flags, file, "UJI1".into(), Some(&uji)).unwrap();
        assert_eq!(
            (r.hidden, r.hidden_source),
            (HiddenSetting::Count(200), Source::Flag)
        );
        assert_eq!((r.c, r.c_source), (0.5, Source::File));
        assert_eq!(r.seed, 9);

        let r = RunConfig::resolve(
            FlagConfig::default(),
            FileConfig::default(),
            "UJI1".into(),
            Some(&uji),
        )
        .unwrap();
        assert_eq!((r.hidden, r.c), (HiddenSetting::Count(530), 0.1));
        assert_eq!(r.c_source, Source::Registry);

        let flags = FlagConfig {
            c: Some(CSetting::Registry),
            ..Default::default()
        };
        assert!(RunConfig::resolve(flags, FileConfig::default(), "X".into(), None).is_err());
    }
}
