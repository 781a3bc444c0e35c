//! Hit rates, phase timing, baseline normalization and benchmark reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{load_csv, Label, Manifest, RadioMap};
use crate::elm::ElmModel;
use crate::error::{Error, Result};
use crate::featurizer::{featurize, init_featurizer, FeaturizerOverrides};
use crate::knn::KnnIndex;
use crate::linalg::DenseMatrix;
use crate::pipeline::Approach;
use crate::preprocess::{NormMode, PreprocessParams};
use crate::synthetic::SyntheticConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Building,
    Floor,
}

/// Percentage of exact matches on one label field. Building hit rate is
/// `None` when the ground truth carries no building labels.
pub fn hit_rate(predicted: &[Label], truth: &[Label], field: Field) -> Result<Option<f64>> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} ground-truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Empty("hit rate over zero samples".into()));
    }
    if field == Field::Building && truth.iter().any(|t| t.building.is_none()) {
        return Ok(None);
    }
    let hits = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| match field {
            Field::Building => p.building == t.building,
            Field::Floor => p.floor == t.floor,
        })
        .count();
    Ok(Some(100.0 * hits as f64 / truth.len() as f64))
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn config_digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config values serialize");
    Sha256::digest(&bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Median over repetitions, seconds.
    pub seconds: f64,
    pub min: f64,
    pub repetitions: usize,
}

const SHORT_PHASE: f64 = 0.1;
const SHORT_PHASE_REPS: usize = 5;

/// Wall-clock time of `phase` on a monotonic clock. Phases shorter than
/// 100 ms are re-run (five runs in total) and the median is reported.
/// The value returned is the first run's.
pub fn time_phase<R>(mut phase: impl FnMut() -> R) -> (R, Timing) {
    let start = Instant::now();
    let result = phase();
    let first = start.elapsed().as_secs_f64();
    let mut samples = vec![first];
    if first < SHORT_PHASE {
        for _ in 1..SHORT_PHASE_REPS {
            let start = Instant::now();
            std::hint::black_box(phase());
            samples.push(start.elapsed().as_secs_f64());
        }
    }
    samples.sort_by(f64::total_cmp);
    let timing = Timing {
        seconds: samples[samples.len() / 2],
        min: samples[0],
        repetitions: samples.len(),
    };
    (result, timing)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Normalized {
    pub building_hit: Option<f64>,
    pub floor_hit: Option<f64>,
    pub train_time: Option<f64>,
    pub test_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub approach: Approach,
    /// `None` for seed-averaged rows.
    pub seed: Option<u64>,
    pub building_hit: Option<f64>,
    pub floor_hit: f64,
    pub train_time: Option<f64>,
    pub test_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<Normalized>,
    pub config_digest: String,
    /// Extra per-phase timings, seconds.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub phases: BTreeMap<String, f64>,
}

fn ratio(value: Option<f64>, base: Option<f64>) -> Option<f64> {
    match (value, base) {
        (Some(v), Some(b)) if b != 0.0 => Some(v / b),
        _ => None,
    }
}

/// Divides every metric of `report` by the baseline's.
pub fn normalize(report: &EvalReport, baseline: &EvalReport) -> Result<EvalReport> {
    if report.dataset != baseline.dataset {
        return Err(Error::Config(format!(
            "cannot normalize {} against a baseline on {}",
            report.dataset, baseline.dataset
        )));
    }
    let mut out = report.clone();
    out.normalized = Some(Normalized {
        building_hit: ratio(report.building_hit, baseline.building_hit),
        floor_hit: ratio(Some(report.floor_hit), Some(baseline.floor_hit)),
        train_time: ratio(report.train_time, baseline.train_time),
        test_time: ratio(Some(report.test_time), Some(baseline.test_time)),
    });
    Ok(out)
}

/// Values published alongside the method, consumed as constants.
pub mod published {
    /// One dataset row of the four-approach comparison table: baseline
    /// raw values, then `[ζb, ζf, δtr, δte]` normalized to the baseline for
    /// CNNLoc, ELM and CNN-ELM.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct ComparisonRow {
        pub dataset: &'static str,
        pub baseline_building: Option<f64>,
        pub baseline_floor: f64,
        pub baseline_test_time: f64,
        pub cnnloc: [Option<f64>; 4],
        pub elm: [Option<f64>; 4],
        pub cnn_elm: [Option<f64>; 4],
    }

    const fn row(
        dataset: &'static str,
        baseline_building: Option<f64>,
        baseline_floor: f64,
        baseline_test_time: f64,
        cnnloc: [Option<f64>; 4],
        elm: [Option<f64>; 4],
        cnn_elm: [Option<f64>; 4],
    ) -> ComparisonRow {
        ComparisonRow {
            dataset,
            baseline_building,
            baseline_floor,
            baseline_test_time,
            cnnloc,
            elm,
            cnn_elm,
        }
    }

    const N: Option<f64> = None;
    const fn s(v: f64) -> Option<f64> {
        Some(v)
    }

    #[rustfmt::skip]
    pub const COMPARISON: [ComparisonRow; 12] = [
        row("LIB1", N, 99.20, 0.1328, [N, s(1.0039), s(1.0), s(3.2084)], [N, s(1.0042), s(0.0105), s(0.2647)], [N, s(1.0074), s(0.0897), s(0.7417)]),
        row("LIB2", N, 99.81, 0.0972, [N, s(0.9830), s(1.0), s(4.7390)], [N, s(0.9888), s(0.0119), s(0.4769)], [N, s(0.9929), s(0.0244), s(0.4777)]),
        row("TUT1", N, 90.82, 0.0559, [N, s(0.9753), s(1.0), s(8.1930)], [N, s(0.9820), s(0.0042), s(0.5141)], [N, s(1.0045), s(0.0066), s(0.5328)]),
        row("TUT2", N, 94.32, 0.0239, [N, s(0.9759), s(1.0), s(8.0924)], [N, s(0.9518), s(0.0120), s(0.9895)], [N, s(0.9760), s(0.0147), s(1.1848)]),
        row("TUT3", N, 91.60, 0.1949, [N, s(0.9710), s(1.0), s(3.6773)], [N, s(1.0177), s(0.0138), s(0.4998)], [N, s(1.0182), s(0.0156), s(0.5218)]),
        row("TUT4", N, 94.69, 0.1754, [N, s(0.9606), s(1.0), s(1.4059)], [N, s(0.9954), s(0.0022), s(0.1661)], [N, s(1.0121), s(0.0042), s(0.1720)]),
        row("TUT5", N, 96.84, 0.0355, [N, s(1.0126), s(1.0), s(7.9418)], [N, s(1.0074), s(0.0121), s(0.7801)], [N, s(1.0147), s(0.0201), s(0.7493)]),
        row("TUT6", N, 99.66, 0.8479, [N, s(1.0011), s(1.0), s(1.3660)], [N, s(0.9996), s(0.0033), s(0.0765)], [N, s(0.9988), s(0.0079), s(0.1562)]),
        row("TUT7", N, 98.36, 0.8233, [N, s(0.9712), s(1.0), s(1.1628)], [N, s(0.9919), s(0.0029), s(0.0651)], [N, s(0.9922), s(0.0052), s(0.0795)]),
        row("UJI1", s(100.0), 92.17, 0.6946, [s(0.9973), s(1.0322), s(1.0), s(0.9338)], [s(0.9991), s(0.9375), s(0.0007), s(0.0395)], [s(1.0), s(1.0010), s(0.0010), s(0.0488)]),
        row("UJI2", s(100.0), 91.31, 2.9602, [s(1.0), s(0.9444), s(1.0), s(0.2622)], [s(0.9996), s(0.9854), s(0.0005), s(0.0163)], [s(1.0), s(1.0173), s(0.0011), s(0.0141)]),
        row("UTS1", N, 94.07, 0.1541, [N, s(0.9151), s(1.0), s(3.4835)], [N, s(0.9890), s(0.0011), s(0.1840)], [N, s(1.0137), s(0.0019), s(0.3950)]),
    ];

    /// Average row of the comparison table.
    #[rustfmt::skip]
    pub const COMPARISON_AVG: ComparisonRow =
        row("Avg.", s(100.0), 95.24, 0.52, [s(0.9987), s(0.9789), s(1.0), s(3.7055)], [s(0.9994), s(0.9876), s(0.0063), s(0.3394)], [s(1.0), s(1.0041), s(0.0160), s(0.4228)]);

    /// Raw results `(approach, dataset, hidden, ζb, ζf, δtr, δte)`.
    pub const RAW: [(&str, &str, usize, Option<f64>, f64, f64, f64); 4] = [
        ("AFARLS", "UJI1", 1000, Some(100.0), 95.41, 84.68, 0.21),
        ("AFARLS", "TUT3", 1000, None, 94.18, 2.40, 0.57),
        ("CNN-ELM", "UJI1", 530, Some(100.0), 92.26, 0.26, 0.03),
        ("CNN-ELM", "TUT3", 235, None, 93.27, 0.22, 0.10),
    ];

    pub fn comparison(dataset: &str) -> Option<&'static ComparisonRow> {
        COMPARISON
            .iter()
            .find(|r| r.dataset.eq_ignore_ascii_case(dataset))
    }
}

/// Static row for a method whose numbers are quoted, not reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedRow {
    pub dataset: String,
    pub approach: String,
    pub building_hit: Option<f64>,
    pub floor_hit: Option<f64>,
    pub train_time: Option<f64>,
    pub test_time: Option<f64>,
    pub normalized: Normalized,
}

pub const PUBLISHED_TAG: &str = "published, not reproduced";

/// CNNLoc and AFARLS rows for the given datasets.
pub fn published_rows(datasets: &[String]) -> Vec<PublishedRow> {
    let mut rows = Vec::new();
    for name in datasets {
        if let Some(r) = published::comparison(name) {
            rows.push(PublishedRow {
                dataset: r.dataset.to_string(),
                approach: format!("CNNLoc ({PUBLISHED_TAG})"),
                building_hit: None,
                floor_hit: None,
                train_time: None,
                test_time: None,
                normalized: Normalized {
                    building_hit: r.cnnloc[0],
                    floor_hit: r.cnnloc[1],
                    train_time: r.cnnloc[2],
                    test_time: r.cnnloc[3],
                },
            });
        }
        for &(approach, ds, _, zb, zf, tr, te) in &published::RAW {
            if approach == "AFARLS" && ds.eq_ignore_ascii_case(name) {
                rows.push(PublishedRow {
                    dataset: ds.to_string(),
                    approach: format!("AFARLS ({PUBLISHED_TAG})"),
                    building_hit: zb,
                    floor_hit: Some(zf),
                    train_time: Some(tr),
                    test_time: Some(te),
                    normalized: Normalized::default(),
                });
            }
        }
    }
    rows
}

/// Where a benchmark dataset's train and test maps come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Files {
        train: PathBuf,
        test: PathBuf,
        manifest: Manifest,
    },
    Synthetic {
        config: SyntheticConfig,
        seed: u64,
    },
    InMemory {
        train: Box<RadioMap>,
        test: Box<RadioMap>,
    },
}

impl DataSource {
    pub fn load(&self, name: &str) -> Result<(RadioMap, RadioMap)> {
        match self {
            DataSource::Files {
                train,
                test,
                manifest,
            } => Ok((
                load_csv(train, manifest, name)?,
                load_csv(test, manifest, name)?,
            )),
            DataSource::Synthetic { config, seed } => {
                let (mut tr, mut te) = config.generate(*seed)?;
                tr.name = name.to_string();
                te.name = name.to_string();
                Ok((tr, te))
            }
            DataSource::InMemory { train, test } => Ok(((**train).clone(), (**test).clone())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkDataset {
    pub name: String,
    pub hidden: usize,
    pub c: f64,
    pub source: DataSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub approaches: Vec<Approach>,
    pub seeds: Vec<u64>,
    pub norm_mode: NormMode,
    pub kernel_size: usize,
    pub n_filters: usize,
    /// Score the ELM approaches through their 8-bit weights.
    pub quantized: bool,
    /// Include preprocessing of the train/test matrices in the timings.
    pub end_to_end: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            approaches: Approach::ALL.to_vec(),
            seeds: vec![1, 2, 3, 4, 5],
            norm_mode: NormMode::PerFeature,
            kernel_size: 3,
            n_filters: 2,
            quantized: false,
            end_to_end: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub dataset: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub config_digest: String,
    /// One row per (dataset, approach, seed).
    pub runs: Vec<EvalReport>,
    /// Seed means per (dataset, approach).
    pub averaged: Vec<EvalReport>,
    /// Mean of the averaged rows over datasets, per approach.
    pub overall: Vec<EvalReport>,
    pub published: Vec<PublishedRow>,
    pub failures: Vec<Failure>,
}

#[derive(Serialize)]
struct RunKey<'a> {
    dataset: &'a str,
    approach: Approach,
    seed: Option<u64>,
    hidden: Option<usize>,
    c: Option<f64>,
    config: &'a BenchmarkConfig,
}

struct Prepared {
    x_train: DenseMatrix,
    x_test: DenseMatrix,
    y_train: Vec<Label>,
    y_test: Vec<Label>,
    preprocess_time: f64,
}

fn prepare(train: &RadioMap, test: &RadioMap, mode: NormMode) -> Result<Prepared> {
    if test.n_aps() != train.n_aps() {
        return Err(Error::Shape(format!(
            "train has {} APs, test has {}",
            train.n_aps(),
            test.n_aps()
        )));
    }
    let start = Instant::now();
    let params = PreprocessParams::fit(train, mode)?;
    let x_train = params.transform(&train.rss)?;
    let x_test = params.transform(&test.rss)?;
    Ok(Prepared {
        x_train,
        x_test,
        y_train: train.labels(),
        y_test: test.labels(),
        preprocess_time: start.elapsed().as_secs_f64(),
    })
}

fn report(
    dataset: &str,
    approach: Approach,
    seed: Option<u64>,
    predicted: &[Label],
    truth: &[Label],
    train_time: Option<f64>,
    test_time: f64,
    digest: String,
) -> Result<EvalReport> {
    Ok(EvalReport {
        dataset: dataset.to_string(),
        approach,
        seed,
        building_hit: hit_rate(predicted, truth, Field::Building)?,
        floor_hit: hit_rate(predicted, truth, Field::Floor)?.expect("floor always present"),
        train_time,
        test_time,
        normalized: None,
        config_digest: digest,
        phases: BTreeMap::new(),
    })
}

fn run_knn(ds: &BenchmarkDataset, p: &Prepared, cfg: &BenchmarkConfig) -> Result<EvalReport> {
    let index = KnnIndex::build(p.x_train.clone(), p.y_train.clone())?;
    let (predicted, t) = time_phase(|| index.classify_batch(&p.x_test));
    let predicted = predicted?;
    let extra = if cfg.end_to_end {
        p.preprocess_time
    } else {
        0.0
    };
    let digest = config_digest(&RunKey {
        dataset: &ds.name,
        approach: Approach::Knn,
        seed: None,
        hidden: None,
        c: None,
        config: cfg,
    });
    let mut r = report(
        &ds.name,
        Approach::Knn,
        None,
        &predicted,
        &p.y_test,
        None,
        t.seconds + extra,
        digest,
    )?;
    r.phases.insert("classify_s".into(), t.seconds);
    Ok(r)
}

fn run_elm(
    ds: &BenchmarkDataset,
    p: &Prepared,
    cfg: &BenchmarkConfig,
    approach: Approach,
    seed: u64,
) -> Result<EvalReport> {
    let spec = match approach {
        Approach::CnnElm => Some(init_featurizer(
            seed,
            p.x_train.cols(),
            &FeaturizerOverrides {
                n_filters: Some(cfg.n_filters),
                kernel_size: Some(cfg.kernel_size),
                ..Default::default()
            },
        )?),
        _ => None,
    };
    let feats = |x: &DenseMatrix| -> Result<DenseMatrix> {
        match &spec {
            Some(s) => featurize(x, s),
            None => Ok(x.clone()),
        }
    };
    let (f_train, t_feat_train) = time_phase(|| feats(&p.x_train));
    let f_train = f_train?;
    let (model, t_fit) =
        time_phase(|| ElmModel::train(&f_train, &p.y_train, ds.hidden, ds.c, seed));
    let mut model = model?;
    if cfg.quantized {
        model = model.quantize();
    }
    let (f_test, t_feat_test) = time_phase(|| feats(&p.x_test));
    let f_test = f_test?;
    let (predicted, t_pred) = time_phase(|| {
        if cfg.quantized {
            model.predict_quantized(&f_test)
        } else {
            model.predict(&f_test)
        }
    });
    let predicted = predicted?;
    let extra = if cfg.end_to_end {
        p.preprocess_time
    } else {
        0.0
    };
    let digest = config_digest(&RunKey {
        dataset: &ds.name,
        approach,
        seed: Some(seed),
        hidden: Some(ds.hidden),
        c: Some(ds.c),
        config: cfg,
    });
    let mut r = report(
        &ds.name,
        approach,
        Some(seed),
        &predicted,
        &p.y_test,
        Some(t_feat_train.seconds + t_fit.seconds + extra),
        t_feat_test.seconds + t_pred.seconds + extra,
        digest,
    )?;
    if spec.is_some() {
        r.phases
            .insert("featurize_train_s".into(), t_feat_train.seconds);
        r.phases
            .insert("featurize_test_s".into(), t_feat_test.seconds);
    }
    r.phases.insert("fit_s".into(), t_fit.seconds);
    r.phases.insert("predict_s".into(), t_pred.seconds);
    r.phases.insert("preprocess_s".into(), p.preprocess_time);
    Ok(r)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn mean_opt<'a>(rows: &'a [&'a EvalReport], f: impl Fn(&EvalReport) -> Option<f64>) -> Option<f64> {
    if rows.iter().any(|r| f(r).is_none()) {
        return None;
    }
    mean(rows.iter().filter_map(|r| f(r)))
}

/// Averages rows that share a dataset (or an approach, for the overall
/// row); normalized fields average over the rows that carry them.
fn average(rows: &[&EvalReport], dataset: &str, digest: String) -> EvalReport {
    let first = rows[0];
    let norm = |f: fn(&Normalized) -> Option<f64>| {
        mean(
            rows.iter()
                .filter_map(|r| r.normalized.as_ref().and_then(f)),
        )
    };
    let normalized = rows
        .iter()
        .any(|r| r.normalized.is_some())
        .then(|| Normalized {
            building_hit: norm(|n| n.building_hit),
            floor_hit: norm(|n| n.floor_hit),
            train_time: norm(|n| n.train_time),
            test_time: norm(|n| n.test_time),
        });
    let mut phases = BTreeMap::new();
    for key in first.phases.keys() {
        if let Some(m) = mean(rows.iter().filter_map(|r| r.phases.get(key).copied())) {
            phases.insert(key.clone(), m);
        }
    }
    EvalReport {
        dataset: dataset.to_string(),
        approach: first.approach,
        seed: None,
        building_hit: mean(rows.iter().filter_map(|r| r.building_hit)),
        floor_hit: mean(rows.iter().map(|r| r.floor_hit)).expect("non-empty"),
        train_time: mean_opt(rows, |r| r.train_time),
        test_time: mean(rows.iter().map(|r| r.test_time)).expect("non-empty"),
        normalized,
        config_digest: digest,
        phases,
    }
}

/// Runs every approach on every dataset. 1-NN is deterministic and runs
/// once per dataset; its result is reported under every seed. Datasets that
/// fail to load or train are recorded and skipped.
pub fn run_benchmark(
    datasets: &[BenchmarkDataset],
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkReport> {
    if cfg.approaches.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::Config("benchmark needs approaches and seeds".into()));
    }
    let mut runs = Vec::new();
    let mut averaged = Vec::new();
    let mut failures = Vec::new();
    for ds in datasets {
        let result = (|| -> Result<(Vec<EvalReport>, Vec<EvalReport>)> {
            let (train, test) = ds.source.load(&ds.name)?;
            let p = prepare(&train, &test, cfg.norm_mode)?;
            let baseline = run_knn(ds, &p, cfg)?;
            let baseline = normalize(&baseline, &baseline)?;
            let mut ds_runs = Vec::new();
            let mut ds_avg = Vec::new();
            for &approach in &cfg.approaches {
                let mut rows = Vec::new();
                for &seed in &cfg.seeds {
                    let r = match approach {
                        Approach::Knn => EvalReport {
                            seed: Some(seed),
                            ..baseline.clone()
                        },
                        _ => normalize(&run_elm(ds, &p, cfg, approach, seed)?, &baseline)?,
                    };
                    log::info!(
                        "{} {approach} seed {seed}: floor {:.2}%, test {:.4}s",
                        ds.name,
                        r.floor_hit,
                        r.test_time
                    );
                    rows.push(r);
                }
                let refs: Vec<&EvalReport> = rows.iter().collect();
                let digest = config_digest(&(&ds.name, approach, cfg));
                let avg = average(&refs, &ds.name, digest);
                let avg = normalize(&avg, &baseline)?;
                ds_avg.push(avg);
                ds_runs.extend(rows);
            }
            Ok((ds_runs, ds_avg))
        })();
        match result {
            Ok((r, a)) => {
                runs.extend(r);
                averaged.extend(a);
            }
            Err(e) => {
                log::warn!("{}: {e}", ds.name);
                failures.push(Failure {
                    dataset: ds.name.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let overall = cfg
        .approaches
        .iter()
        .filter_map(|&a| {
            let rows: Vec<&EvalReport> = averaged.iter().filter(|r| r.approach == a).collect();
            (!rows.is_empty()).then(|| average(&rows, "Avg.", config_digest(&("Avg.", a, cfg))))
        })
        .collect();
    let names: Vec<String> = datasets.iter().map(|d| d.name.clone()).collect();
    Ok(BenchmarkReport {
        config: cfg.clone(),
        config_digest: config_digest(&(cfg, &names)),
        runs,
        averaged,
        overall,
        published: published_rows(&names),
        failures,
    })
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    dataset: &'a str,
    approach: String,
    seed: String,
    zeta_b: Option<f64>,
    zeta_f: Option<f64>,
    delta_tr_s: Option<f64>,
    delta_te_s: Option<f64>,
    norm_zeta_b: Option<f64>,
    norm_zeta_f: Option<f64>,
    norm_delta_tr: Option<f64>,
    norm_delta_te: Option<f64>,
    config_digest: &'a str,
}

impl<'a> CsvRow<'a> {
    fn from_report(r: &'a EvalReport) -> Self {
        let n = r.normalized.unwrap_or_default();
        Self {
            dataset: &r.dataset,
            approach: r.approach.key().to_string(),
            seed: r.seed.map_or_else(|| "mean".to_string(), |s| s.to_string()),
            zeta_b: r.building_hit,
            zeta_f: Some(r.floor_hit),
            delta_tr_s: r.train_time,
            delta_te_s: Some(r.test_time),
            norm_zeta_b: n.building_hit,
            norm_zeta_f: n.floor_hit,
            norm_delta_tr: n.train_time,
            norm_delta_te: n.test_time,
            config_digest: &r.config_digest,
        }
    }

    fn from_published(r: &'a PublishedRow) -> Self {
        Self {
            dataset: &r.dataset,
            approach: r.approach.clone(),
            seed: String::new(),
            zeta_b: r.building_hit,
            zeta_f: r.floor_hit,
            delta_tr_s: r.train_time,
            delta_te_s: r.test_time,
            norm_zeta_b: r.normalized.building_hit,
            norm_zeta_f: r.normalized.floor_hit,
            norm_delta_tr: r.normalized.train_time,
            norm_delta_te: r.normalized.test_time,
            config_digest: "",
        }
    }
}

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 12] = [
    "dataset",
    "approach",
    "seed",
    "zeta_b",
    "zeta_f",
    "delta_tr_s",
    "delta_te_s",
    "norm_zeta_b",
    "norm_zeta_f",
    "norm_delta_tr",
    "norm_delta_te",
    "config_digest",
];

impl BenchmarkReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in self.runs.iter().chain(&self.averaged).chain(&self.overall) {
            w.serialize(CsvRow::from_report(r))?;
        }
        for r in &self.published {
            w.serialize(CsvRow::from_published(r))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_files(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("report.csv");
        let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(f)?;
        let json_path = dir.join("report.json");
        let f = std::fs::File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
        serde_json::to_writer_pretty(f, self)?;
        let txt_path = dir.join("report.txt");
        std::fs::write(&txt_path, self.render_table()).map_err(|e| Error::io(&txt_path, e))?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Text table in the layout of the four-approach comparison: raw
    /// baseline metrics, then normalized metrics for each other approach.
    pub fn render_table(&self) -> String {
        fn cell(v: Option<f64>, prec: usize) -> String {
            v.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"))
        }
        let others: Vec<Approach> = self
            .config
            .approaches
            .iter()
            .copied()
            .filter(|&a| a != Approach::Knn)
            .collect();
        let mut out = String::new();
        let _ = write!(
            out,
            "{:<10}|{:>8}{:>8}{:>10}",
            "Database", "zb[%]", "zf[%]", "dte[s]"
        );
        for a in &others {
            let _ = write!(out, " | {:^38}", a.to_string());
        }
        let _ = write!(out, " | {:^38}", "CNNLoc (published)");
        out.push('\n');
        let _ = write!(out, "{:<10}|{:>26}", "", "");
        for _ in 0..=others.len() {
            let _ = write!(
                out,
                " | {:>9}{:>9}{:>10}{:>10}",
                "~zb", "~zf", "~dtr", "~dte"
            );
        }
        out.push('\n');
        let rows_for = |dataset: &str, rows: &[EvalReport]| -> Option<String> {
            let base = rows
                .iter()
                .find(|r| r.dataset == dataset && r.approach == Approach::Knn);
            let mut line = String::new();
            let _ = write!(
                line,
                "{:<10}|{:>8}{:>8}{:>10}",
                dataset,
                cell(base.and_then(|b| b.building_hit), 2),
                cell(base.map(|b| b.floor_hit), 2),
                cell(base.map(|b| b.test_time), 4)
            );
            for a in &others {
                let n = rows
                    .iter()
                    .find(|r| r.dataset == dataset && r.approach == *a)
                    .and_then(|r| r.normalized)
                    .unwrap_or_default();
                let _ = write!(
                    line,
                    " | {:>9}{:>9}{:>10}{:>10}",
                    cell(n.building_hit, 4),
                    cell(n.floor_hit, 4),
                    cell(n.train_time, 4),
                    cell(n.test_time, 4)
                );
            }
            let p = published::comparison(dataset);
            let pc = |i: usize| p.and_then(|p| p.cnnloc[i]);
            let _ = write!(
                line,
                " | {:>9}{:>9}{:>10}{:>10}",
                cell(pc(0), 4),
                cell(pc(1), 4),
                cell(pc(2), 4),
                cell(pc(3), 4)
            );
            Some(line)
        };
        let mut names: Vec<&str> = Vec::new();
        for r in &self.averaged {
            if !names.contains(&r.dataset.as_str()) {
                names.push(&r.dataset);
            }
        }
        for name in names {
            if let Some(line) = rows_for(name, &self.averaged) {
                out.push_str(&line);
                out.push('\n');
            }
        }
        if let Some(line) = rows_for("Avg.", &self.overall) {
            out.push_str(&line);
            out.push('\n');
        }
        for f in &self.failures {
            let _ = writeln!(out, "{:<10}| failed: {}", f.dataset, f.error);
        }
        out
    }
}
