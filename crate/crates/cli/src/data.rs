//! Resolves a `--dataset` argument to files on disk or the synthetic map.

use std::path::{Path, PathBuf};

use cnnelm::dataset::{DatasetDescriptor, DbType, Manifest, Registry};
use cnnelm::eval::DataSource;
use cnnelm::synthetic::{SyntheticConfig, SYNTHETIC_NAME};
use cnnelm::{Error, RadioMap, Result};

/// Data seed of the built-in synthetic map.
pub const SYNTHETIC_SEED: u64 = 1;

#[derive(Debug, Clone)]
pub struct ResolvedDataset {
    pub name: String,
    pub descriptor: Option<DatasetDescriptor>,
    pub manifest: Manifest,
    pub source: DataSource,
}

impl ResolvedDataset {
    pub fn load(&self) -> Result<(RadioMap, RadioMap)> {
        self.source.load(&self.name)
    }
}

fn synthetic_descriptor(cfg: &SyntheticConfig) -> DatasetDescriptor {
    DatasetDescriptor {
        name: SYNTHETIC_NAME.to_string(),
        train_size: cfg.train_size,
        test_size: cfg.test_size,
        n_aps: cfg.n_aps,
        hidden: 530,
        c: 0.1,
        db_type: if cfg.buildings > 1 {
            DbType::MultiBuildingMultiFloor
        } else {
            DbType::MultiFloor
        },
        sentinel_raw: 100.0,
    }
}

/// Registry of the public benchmarks plus the synthetic map.
pub fn registry() -> Registry {
    let mut reg = Registry::builtin();
    reg.register(synthetic_descriptor(&SyntheticConfig::default()))
        .expect("synthetic descriptor is valid");
    reg
}

fn relative_to(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// `spec` is a registry name (files under `<data_dir>/<NAME>/`), the
/// synthetic map's name, or a path to a manifest JSON that names its
/// `train` and `test` files.
pub fn resolve(spec: &str, data_dir: Option<&Path>) -> Result<ResolvedDataset> {
    let reg = registry();
    let as_path = Path::new(spec);
    if spec.ends_with(".json") || as_path.is_file() {
        let manifest = Manifest::from_file(as_path)?;
        let base = as_path.parent().unwrap_or(Path::new("."));
        let stem = as_path.file_stem().and_then(|s| s.to_str()).unwrap_or(spec);
        let name = if stem == "manifest" {
            base.canonicalize()
                .ok()
                .and_then(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
                .unwrap_or_else(|| stem.to_string())
        } else {
            stem.to_string()
        };
        let file = |p: &Option<PathBuf>, what: &str| {
            p.as_ref()
                .map(|p| relative_to(base, p))
                .ok_or_else(|| Error::Config(format!("{spec}: manifest has no '{what}' path")))
        };
        let train = file(&manifest.train, "train")?;
        let test = file(&manifest.test, "test")?;
        return Ok(ResolvedDataset {
            descriptor: reg.lookup(&name).ok().cloned(),
            name,
            source: DataSource::Files {
                train,
                test,
                manifest: manifest.clone(),
            },
            manifest,
        });
    }

    let descriptor = reg.lookup(spec)?.clone();
    if descriptor.name == SYNTHETIC_NAME {
        let config = SyntheticConfig::default();
        return Ok(ResolvedDataset {
            name: descriptor.name.clone(),
            manifest: Manifest::simple(config.n_aps, config.buildings > 1, 100.0),
            descriptor: Some(descriptor),
            source: DataSource::Synthetic {
                config,
                seed: SYNTHETIC_SEED,
            },
        });
    }

    let root = data_dir.ok_or_else(|| {
        Error::Config(format!(
            "dataset {} needs a data directory (--data-dir or CNNELM_DATA_DIR)",
            descriptor.name
        ))
    })?;
    let dir = root.join(&descriptor.name);
    let manifest_path = dir.join("manifest.json");
    let mut manifest = if manifest_path.is_file() {
        Manifest::from_file(&manifest_path)?
    } else if descriptor.db_type == DbType::MultiBuildingMultiFloor {
        Manifest::uji()
    } else {
        return Err(Error::Config(format!(
            "{} has no manifest describing its columns",
            manifest_path.display()
        )));
    };
    let train = relative_to(
        &dir,
        manifest.train.as_deref().unwrap_or(Path::new("train.csv")),
    );
    let test = relative_to(
        &dir,
        manifest.test.as_deref().unwrap_or(Path::new("test.csv")),
    );
    manifest.train = None;
    manifest.test = None;
    Ok(ResolvedDataset {
        name: descriptor.name.clone(),
        descriptor: Some(descriptor),
        source: DataSource::Files {
            train,
            test,
            manifest: manifest.clone(),
        },
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_and_registry_names() {
        let s = resolve("synth", None).unwrap();
        assert_eq!(s.name, "SYNTH");
        assert_eq!(s.descriptor.unwrap().hidden, 530);
        assert!(matches!(resolve("UJI1", None), Err(Error::Config(_))));
        assert!(matches!(
            resolve("NOPE", None),
            Err(Error::UnknownDataset { .. })
        ));
        let u = resolve("uji1", Some(Path::new("/data"))).unwrap();
        match u.source {
            DataSource::Files { train, .. } => assert_eq!(train, Path::new("/data/UJI1/train.csv")),
            _ => panic!("expected files"),
        }
        assert!(resolve("TUT1", Some(Path::new("/nonexistent"))).is_err());
    }
}
