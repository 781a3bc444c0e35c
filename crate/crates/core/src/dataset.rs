//! Radio maps, CSV ingestion and the benchmark dataset registry.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Canonical RSS value for "access point not detected".
pub const NOT_DETECTED: f64 = 0.0;

/// Ground-truth or predicted location class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    pub building: Option<u32>,
    pub floor: u32,
}

impl Label {
    pub fn new(building: Option<u32>, floor: u32) -> Self {
        Self { building, floor }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.building {
            Some(b) => write!(f, "(building {b}, floor {})", self.floor),
            None => write!(f, "(floor {})", self.floor),
        }
    }
}

/// A set of RSS fingerprints with per-sample building/floor labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    pub name: String,
    /// N x n_aps, in dBm, with undetected cells at [`NOT_DETECTED`].
    pub rss: DenseMatrix,
    pub building: Option<Vec<u32>>,
    pub floor: Vec<u32>,
    /// Coordinate columns carried through from the source file, unused.
    pub coords: Vec<Vec<f64>>,
}

impl RadioMap {
    pub fn new(
        name: impl Into<String>,
        rss: DenseMatrix,
        building: Option<Vec<u32>>,
        floor: Vec<u32>,
    ) -> Result<Self> {
        let n = rss.rows();
        if floor.len() != n || building.as_ref().is_some_and(|b| b.len() != n) {
            return Err(Error::Shape(format!(
                "{n} fingerprints but {} floor labels",
                floor.len()
            )));
        }
        if let Some(pos) = rss.as_slice().iter().position(|&v| v > 0.0) {
            let cols = rss.cols();
            return Err(Error::Schema(format!(
                "positive RSS {} at row {}, column {}",
                rss.as_slice()[pos],
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            name: name.into(),
            rss,
            building,
            floor,
            coords: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.rss.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_aps(&self) -> usize {
        self.rss.cols()
    }

    pub fn is_multi_building(&self) -> bool {
        self.building.is_some()
    }

    pub fn label(&self, i: usize) -> Label {
        Label::new(self.building.as_ref().map(|b| b[i]), self.floor[i])
    }

    pub fn labels(&self) -> Vec<Label> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    /// Rows in the given order, labels and coordinates included.
    pub fn subset(&self, idx: &[usize]) -> RadioMap {
        RadioMap {
            name: self.name.clone(),
            rss: self.rss.select_rows(idx),
            building: self
                .building
                .as_ref()
                .map(|b| idx.iter().map(|&i| b[i]).collect()),
            floor: idx.iter().map(|&i| self.floor[i]).collect(),
            coords: if self.coords.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| self.coords[i].clone()).collect()
            },
        }
    }

    /// Number of fingerprints per (building, floor) class.
    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for l in self.labels() {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }
}

/// Column layout of a fingerprint CSV file.
///
/// Column indices are zero-based; `ap_columns` is an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub ap_columns: [usize; 2],
    pub floor_col: usize,
    pub building_col: Option<usize>,
    pub sentinel: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coord_columns: Vec<usize>,
    /// Optional data file paths, relative to the manifest's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
}

impl Manifest {
    /// Layout of the UJIIndoorLoc files: 520 WAP columns followed by
    /// longitude, latitude, floor and building id.
    pub fn uji() -> Self {
        Self {
            ap_columns: [0, 519],
            floor_col: 522,
            building_col: Some(523),
            sentinel: 100.0,
            coord_columns: vec![520, 521],
            train: None,
            test: None,
        }
    }

    /// AP columns first, then floor, then building if present: the layout
    /// written by [`write_csv`].
    pub fn simple(n_aps: usize, with_building: bool, sentinel: f64) -> Self {
        Self {
            ap_columns: [0, n_aps.saturating_sub(1)],
            floor_col: n_aps,
            building_col: with_building.then_some(n_aps + 1),
            sentinel,
            coord_columns: Vec::new(),
            train: None,
            test: None,
        }
    }

    pub fn n_aps(&self) -> usize {
        self.ap_columns[1] + 1 - self.ap_columns[0]
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ap_columns[0] > self.ap_columns[1] {
            return Err(Error::Schema(format!(
                "empty AP column range {:?}",
                self.ap_columns
            )));
        }
        if !self.sentinel.is_finite() {
            return Err(Error::Schema("sentinel must be finite".into()));
        }
        Ok(())
    }

    fn max_column(&self) -> usize {
        let mut max = self.ap_columns[1].max(self.floor_col);
        if let Some(b) = self.building_col {
            max = max.max(b);
        }
        self.coord_columns.iter().fold(max, |m, &c| m.max(c))
    }
}

fn parse_label(cell: &str, path: &Path, line: u64, what: &str) -> Result<u32> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| parse_err(format!("non-numeric {what} label '{cell}'")))?;
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(parse_err(format!(
            "{what} label {v} is not a non-negative integer"
        )));
    }
    Ok(v as u32)
}

fn open_csv(
    path: &Path,
    manifest: &Manifest,
    max_column: usize,
) -> Result<(csv::Reader<std::fs::File>, usize)> {
    manifest.validate()?;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let width = reader.headers()?.len();
    if max_column >= width {
        return Err(Error::Schema(format!(
            "{}: header has {width} columns but the manifest references column {max_column}",
            path.display(),
        )));
    }
    Ok((reader, width))
}

/// Appends the AP cells of one record, mapping the sentinel to
/// [`NOT_DETECTED`].
fn push_rss(
    record: &csv::StringRecord,
    manifest: &Manifest,
    rss: &mut Vec<f64>,
) -> std::result::Result<(), String> {
    let [ap_start, ap_end] = manifest.ap_columns;
    for col in ap_start..=ap_end {
        let cell = &record[col];
        let v: f64 = cell
            .parse()
            .map_err(|_| format!("non-numeric RSS '{cell}' in column {col}"))?;
        if !v.is_finite() {
            return Err(format!("non-finite RSS in column {col}"));
        }
        if v == manifest.sentinel {
            rss.push(NOT_DETECTED);
        } else if v > 0.0 {
            return Err(format!(
                "RSS {v} dBm in column {col} is positive and not the sentinel"
            ));
        } else {
            rss.push(v);
        }
    }
    Ok(())
}

/// Loads a fingerprint CSV (with header row) using the given column layout.
/// Cells equal to `manifest.sentinel` become [`NOT_DETECTED`]; every other
/// RSS cell is kept verbatim.
pub fn load_csv(path: &Path, manifest: &Manifest, name: &str) -> Result<RadioMap> {
    let (mut reader, width) = open_csv(path, manifest, manifest.max_column())?;
    let n_aps = manifest.n_aps();
    let mut rss = Vec::new();
    let mut floors = Vec::new();
    let mut buildings = manifest.building_col.map(|_| Vec::new());
    let mut coords = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        if !reader.read_record(&mut record)? {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() != width {
            return Err(parse_err(format!(
                "expected {width} columns, found {}",
                record.len()
            )));
        }
        push_rss(&record, manifest, &mut rss).map_err(parse_err)?;
        floors.push(parse_label(
            &record[manifest.floor_col],
            path,
            line,
            "floor",
        )?);
        if let (Some(b), Some(col)) = (buildings.as_mut(), manifest.building_col) {
            b.push(parse_label(&record[col], path, line, "building")?);
        }
        if !manifest.coord_columns.is_empty() {
            let row = manifest
                .coord_columns
                .iter()
                .map(|&c| {
                    record[c]
                        .parse::<f64>()
                        .map_err(|_| parse_err(format!("non-numeric coordinate in column {c}")))
                })
                .collect::<Result<Vec<_>>>()?;
            coords.push(row);
        }
    }
    let n = floors.len();
    let rss = DenseMatrix::new(n, n_aps, rss)?;
    let mut map = RadioMap::new(name, rss, buildings, floors)?;
    map.coords = coords;
    Ok(map)
}

/// Reads only the AP columns of a fingerprint CSV, for unlabeled query
/// files. Label columns, if any, are ignored.
pub fn load_rss(path: &Path, manifest: &Manifest) -> Result<DenseMatrix> {
    let (mut reader, width) = open_csv(path, manifest, manifest.ap_columns[1])?;
    let mut rss = Vec::new();
    let mut rows = 0;
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() != width {
            return Err(parse_err(format!(
                "expected {width} columns, found {}",
                record.len()
            )));
        }
        push_rss(&record, manifest, &mut rss).map_err(parse_err)?;
        rows += 1;
    }
    DenseMatrix::new(rows, manifest.n_aps(), rss)
}

/// Writes a radio map as CSV: AP columns, then floor, then building if
/// present. Undetected cells are written as `sentinel`.
pub fn write_csv(map: &RadioMap, path: &Path, sentinel: f64) -> Result<Manifest> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let n = map.n_aps();
    let mut header: Vec<String> = (1..=n).map(|i| format!("WAP{i:03}")).collect();
    header.push("FLOOR".into());
    if map.is_multi_building() {
        header.push("BUILDINGID".into());
    }
    w.write_record(&header)?;
    for i in 0..map.len() {
        let mut rec: Vec<String> = map
            .rss
            .row(i)
            .iter()
            .map(|&v| {
                if v == NOT_DETECTED {
                    format!("{sentinel}")
                } else {
                    format!("{v}")
                }
            })
            .collect();
        rec.push(map.floor[i].to_string());
        if let Some(b) = &map.building {
            rec.push(b[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(Manifest::simple(n, map.is_multi_building(), sentinel))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DbType {
    /// Multi-floor, single building.
    #[serde(rename = "MF")]
    MultiFloor,
    /// Multi-building and multi-floor.
    #[serde(rename = "MB-MF")]
    MultiBuildingMultiFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub train_size: usize,
    pub test_size: usize,
    pub n_aps: usize,
    /// Hidden-neuron count used for this dataset.
    pub hidden: usize,
    /// Regularization term (the ridge shift is `1 / c`).
    pub c: f64,
    pub db_type: DbType,
    pub sentinel_raw: f64,
}

use DbType::{MultiBuildingMultiFloor as MBMF, MultiFloor as MF};

#[rustfmt::skip]
const BUILTIN: [(&str, usize, usize, usize, usize, f64, DbType); 12] = [
    ("LIB1", 576, 3120, 174, 105, 0.05, MF),
    ("LIB2", 576, 3120, 197, 105, 0.01, MF),
    ("TUT1", 1476, 490, 309, 75, 0.1, MF),
    ("TUT2", 584, 176, 354, 160, 0.01, MF),
    ("TUT3", 697, 3951, 992, 235, 0.05, MF),
    ("TUT4", 3951, 697, 992, 275, 0.05, MF),
    ("TUT5", 446, 982, 489, 195, 0.01, MF),
    ("TUT6", 3116, 7269, 652, 450, 0.1, MF),
    ("TUT7", 2787, 6504, 801, 200, 1.0, MF),
    ("UJI1", 19861, 1111, 520, 530, 0.1, MBMF),
    ("UJI2", 20972, 5179, 520, 215, 0.01, MBMF),
    ("UTS1", 9108, 388, 589, 275, 0.01, MF),
];

/// Dataset descriptors: the twelve public benchmarks plus user entries.
#[derive(Debug, Clone)]
pub struct Registry {
    entries: Vec<DatasetDescriptor>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Registry {
    pub fn builtin() -> Self {
        let entries = BUILTIN
            .iter()
            .map(
                |&(name, train, test, aps, hidden, c, db_type)| DatasetDescriptor {
                    name: name.to_string(),
                    train_size: train,
                    test_size: test,
                    n_aps: aps,
                    hidden,
                    c,
                    db_type,
                    sentinel_raw: 100.0,
                },
            )
            .collect();
        Self { entries }
    }

    /// Adds or replaces an entry.
    pub fn register(&mut self, desc: DatasetDescriptor) -> Result<()> {
        if desc.hidden == 0 || !(desc.c.is_finite() && desc.c > 0.0) {
            return Err(Error::Config(format!(
                "descriptor {} needs hidden > 0 and c > 0",
                desc.name
            )));
        }
        match self
            .entries
            .iter_mut()
            .find(|d| d.name.eq_ignore_ascii_case(&desc.name))
        {
            Some(slot) => *slot = desc,
            None => self.entries.push(desc),
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn entries(&self) -> &[DatasetDescriptor] {
        &self.entries
    }

    /// Case-insensitive lookup.
    pub fn lookup(&self, name: &str) -> Result<&DatasetDescriptor> {
        self.entries
            .iter()
            .find(|d| d.name.eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| Error::UnknownDataset {
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}

/// Looks up one of the built-in benchmark datasets.
pub fn registry_lookup(name: &str) -> Result<DatasetDescriptor> {
    Registry::builtin().lookup(name).cloned()
}

/// Stratified random split by (building, floor) class.
///
/// Each class of size `s >= 2` sends `min(ceil(fraction * s), s - 1)` randomly
/// chosen fingerprints to the validation map; smaller classes stay whole in
/// training. Both outputs keep the input row order.
pub fn split_validation(map: &RadioMap, fraction: f64, seed: u64) -> Result<(RadioMap, RadioMap)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "validation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if map.is_empty() {
        return Err(Error::Empty("radio map to split".into()));
    }
    let mut groups: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for i in 0..map.len() {
        groups.entry(map.label(i)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_validation = vec![false; map.len()];
    for (label, mut members) in groups {
        if members.len() < 2 {
            log::warn!(
                "{}: class {label} has {} fingerprint(s); kept whole in training",
                map.name,
                members.len()
            );
            continue;
        }
        let take = ((fraction * members.len() as f64).ceil() as usize).min(members.len() - 1);
        members.shuffle(&mut rng);
        for &i in &members[..take] {
            in_validation[i] = true;
        }
    }
    let (val, train): (Vec<usize>, Vec<usize>) = (0..map.len()).partition(|&i| in_validation[i]);
    Ok((map.subset(&train), map.subset(&val)))
}
