use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use cnnelm::dataset::{load_csv, load_rss, write_csv, Label, Manifest, RadioMap, NOT_DETECTED};
use cnnelm::elm::SweepResult;
use cnnelm::eval::{run_benchmark, time_phase, BenchmarkConfig, BenchmarkDataset, BenchmarkReport};
use cnnelm::{hit_rate, sweep, Approach, Error, Field, NormMode, Result, TrainedModel};
use serde::Serialize;

use crate::config::{FileConfig, FlagConfig, HiddenSetting, RunConfig, Source};
use crate::data::{self, ResolvedDataset};

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// I/O, parsing or configuration problem (exit 2).
    Run(Error),
    /// Evaluation below a requested threshold (exit 1).
    Gate(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn fmt_hit(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.2}%"))
}

#[derive(Debug, Serialize)]
pub struct MapSummary {
    pub fingerprints: usize,
    pub aps: usize,
    pub buildings: Option<usize>,
    pub floors: usize,
    pub classes: usize,
    pub detected_fraction: f64,
    pub weakest_dbm: Option<f64>,
    pub strongest_dbm: Option<f64>,
    pub silent_aps: usize,
}

pub fn summarize(map: &RadioMap) -> MapSummary {
    let cells = map.rss.as_slice();
    let detected: Vec<f64> = cells
        .iter()
        .copied()
        .filter(|&v| v != NOT_DETECTED)
        .collect();
    let silent_aps = (0..map.n_aps())
        .filter(|&j| (0..map.len()).all(|i| map.rss.get(i, j) == NOT_DETECTED))
        .count();
    MapSummary {
        fingerprints: map.len(),
        aps: map.n_aps(),
        buildings: map
            .building
            .as_ref()
            .map(|b| b.iter().collect::<BTreeSet<_>>().len()),
        floors: map.floor.iter().collect::<BTreeSet<_>>().len(),
        classes: map.class_counts().len(),
        detected_fraction: if cells.is_empty() {
            0.0
        } else {
            detected.len() as f64 / cells.len() as f64
        },
        weakest_dbm: detected.iter().copied().reduce(f64::min),
        strongest_dbm: detected.iter().copied().reduce(f64::max),
        silent_aps,
    }
}

pub fn ingest(dataset: &ResolvedDataset, export: Option<&Path>, json: bool) -> CmdResult {
    let (train, test) = dataset.load()?;
    let summary = serde_json::json!({
        "dataset": dataset.name,
        "manifest": dataset.manifest,
        "train": summarize(&train),
        "test": summarize(&test),
    });
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&summary).map_err(Error::from)?
        );
    } else {
        println!("dataset {}", dataset.name);
        for (part, map) in [("train", &train), ("test", &test)] {
            let s = summarize(map);
            println!(
                "  {part:<5} {} fingerprints x {} APs, {} buildings, {} floors, {} classes, {:.1}% cells detected, RSS [{}, {}] dBm, {} silent APs",
                s.fingerprints,
                s.aps,
                s.buildings.map_or_else(|| "1".into(), |b| b.to_string()),
                s.floors,
                s.classes,
                100.0 * s.detected_fraction,
                s.weakest_dbm.map_or_else(|| "-".into(), |v| v.to_string()),
                s.strongest_dbm.map_or_else(|| "-".into(), |v| v.to_string()),
                s.silent_aps
            );
        }
    }
    if let Some(dir) = export {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let sentinel = dataset.manifest.sentinel;
        let mut manifest = write_csv(&train, &dir.join("train.csv"), sentinel)?;
        write_csv(&test, &dir.join("test.csv"), sentinel)?;
        manifest.train = Some("train.csv".into());
        manifest.test = Some("test.csv".into());
        write_json(&dir.join("manifest.json"), &manifest)?;
        log::info!("wrote {}", dir.display());
        eprintln!("exported {} to {}", dataset.name, dir.display());
    }
    Ok(())
}

fn resolve_run(
    flags: FlagConfig,
    config_path: Option<&Path>,
    data_dir: Option<&Path>,
) -> CmdResult<(RunConfig, ResolvedDataset)> {
    let file = match config_path {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let name = RunConfig::dataset_name(&flags, &file)?;
    let dataset = data::resolve(&name, data_dir)?;
    let run = RunConfig::resolve(
        flags,
        file,
        dataset.name.clone(),
        dataset.descriptor.as_ref(),
    )?;
    Ok((run, dataset))
}

fn echo(run: &RunConfig) {
    eprintln!(
        "resolved: dataset={} approach={} seed={} L={} ({}) c={} ({}) norm={:?} kernel={} filters={} quantize={}",
        run.dataset,
        run.approach,
        run.seed,
        match run.hidden {
            HiddenSetting::Count(n) => n.to_string(),
            HiddenSetting::Auto => "auto".into(),
        },
        run.hidden_source,
        run.c,
        run.c_source,
        run.norm_mode,
        run.kernel_size,
        run.n_filters,
        run.quantize
    );
    eprintln!("config digest: {}", run.digest());
}

fn run_sweep(run: &RunConfig, train: &RadioMap) -> Result<SweepResult> {
    log::info!(
        "sweeping L over 5, {}, ..., {} on a {:.0}% validation split",
        5 + run.step,
        run.l_max,
        100.0 * run.val_fraction
    );
    let result = sweep(
        train,
        &run.train_config(0),
        run.l_max,
        run.step,
        run.val_fraction,
    )?;
    for p in &result.points {
        log::info!(
            "L={:<5} floor {:.2}%  building {}",
            p.hidden,
            p.floor_hit,
            fmt_hit(p.building_hit)
        );
    }
    Ok(result)
}

#[derive(Serialize)]
struct TrainRecord<'a> {
    config: &'a RunConfig,
    config_digest: String,
    model: PathBuf,
    train_time_s: f64,
    train_building_hit: Option<f64>,
    train_floor_hit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepResult>,
}

pub fn train(flags: FlagConfig, config_path: Option<&Path>, data_dir: Option<&Path>) -> CmdResult {
    let (mut run, dataset) = resolve_run(flags, config_path, data_dir)?;
    if run.approach == Approach::Knn {
        return Err(Error::Config("1-NN has no model to train; use `benchmark`".into()).into());
    }
    let (train, _) = dataset.load()?;
    let sweep = match run.hidden {
        HiddenSetting::Auto => {
            let result = run_sweep(&run, &train)?;
            run.hidden = HiddenSetting::Count(result.selected);
            run.hidden_source = Source::Sweep;
            Some(result)
        }
        HiddenSetting::Count(_) => None,
    };
    let HiddenSetting::Count(hidden) = run.hidden else {
        unreachable!("hidden count resolved above")
    };
    echo(&run);

    let cfg = run.train_config(hidden);
    let start = std::time::Instant::now();
    let mut model = TrainedModel::fit(&train, &cfg)?;
    let train_time = start.elapsed().as_secs_f64();
    model.dataset = dataset.name.clone();
    model.manifest = Some(dataset.manifest.clone());
    model.config_digest = run.digest();

    let predicted = model.predict(&train.rss, false)?;
    let truth = train.labels();
    let floor = hit_rate(&predicted, &truth, Field::Floor)?.unwrap_or(0.0);
    let building = hit_rate(&predicted, &truth, Field::Building)?;

    std::fs::create_dir_all(&run.output_dir).map_err(io_err(&run.output_dir))?;
    let model_path = run.output_dir.join("model.json");
    model.save(&model_path)?;
    let record = TrainRecord {
        config: &run,
        config_digest: run.digest(),
        model: model_path.clone(),
        train_time_s: train_time,
        train_building_hit: building,
        train_floor_hit: floor,
        sweep,
    };
    write_json(&run.output_dir.join("run.json"), &record)?;

    println!(
        "trained {} on {} ({} fingerprints), L={hidden}, c={}",
        run.approach,
        dataset.name,
        train.len(),
        run.c
    );
    println!("train time: {train_time:.3} s");
    println!(
        "training-set hit rates: building {}, floor {floor:.2}%",
        fmt_hit(building)
    );
    println!("model: {}", model_path.display());
    Ok(())
}

pub fn predict(
    model_path: &Path,
    queries: &Path,
    output: Option<&Path>,
    quantized: bool,
    manifest_path: Option<&Path>,
) -> CmdResult {
    let mut model = TrainedModel::load(model_path)?;
    let manifest = match manifest_path {
        Some(p) => Manifest::from_file(p)?,
        None => model.manifest.clone().ok_or_else(|| {
            Error::Config("model has no stored column layout; pass --manifest".into())
        })?,
    };
    if quantized && model.elm.quantized.is_none() {
        log::info!("model has no stored 8-bit weights; quantizing in memory");
        model.elm = model.elm.quantize();
    }
    let rss = load_rss(queries, &manifest)?;
    let (predicted, t) = time_phase(|| model.predict(&rss, quantized));
    let predicted = predicted?;
    log::info!(
        "predicted {} queries in {:.4} s",
        predicted.len(),
        t.seconds
    );

    let mut out = String::from("building,floor\n");
    for l in &predicted {
        let _ = writeln!(
            out,
            "{},{}",
            l.building.map_or_else(String::new, |b| b.to_string()),
            l.floor
        );
    }
    match output {
        Some(p) => std::fs::write(p, out).map_err(io_err(p))?,
        None => std::io::stdout()
            .write_all(out.as_bytes())
            .map_err(io_err(Path::new("<stdout>")))?,
    }

    // Labelled query files also get hit rates.
    if !predicted.is_empty() {
        if let Ok(map) = load_csv(queries, &manifest, &model.dataset) {
            let truth: Vec<Label> = map.labels();
            let floor = hit_rate(&predicted, &truth, Field::Floor)?.unwrap_or(0.0);
            let building = hit_rate(&predicted, &truth, Field::Building)?;
            eprintln!(
                "hit rates: building {}, floor {floor:.2}%",
                fmt_hit(building)
            );
        }
    }
    Ok(())
}

pub fn sweep_cmd(
    flags: FlagConfig,
    config_path: Option<&Path>,
    data_dir: Option<&Path>,
    output: Option<&Path>,
) -> CmdResult {
    let (mut run, dataset) = resolve_run(flags, config_path, data_dir)?;
    run.hidden = HiddenSetting::Auto;
    run.hidden_source = Source::Sweep;
    echo(&run);
    let (train, _) = dataset.load()?;
    let result = run_sweep(&run, &train)?;
    println!("{:>6}  {:>9}  {:>9}", "L", "floor", "building");
    for p in &result.points {
        println!(
            "{:>6}  {:>8.2}%  {:>9}",
            p.hidden,
            p.floor_hit,
            fmt_hit(p.building_hit)
        );
    }
    println!("selected L = {}", result.selected);
    if let Some(p) = output {
        write_json(
            p,
            &serde_json::json!({ "config": run, "config_digest": run.digest(), "sweep": result }),
        )?;
    }
    Ok(())
}

pub struct BenchmarkArgs {
    pub datasets: Vec<String>,
    pub approaches: Vec<Approach>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub norm_mode: NormMode,
    pub kernel_size: usize,
    pub n_filters: usize,
    pub quantized: bool,
    pub end_to_end: bool,
    pub fail_under: Option<f64>,
}

pub fn benchmark(args: BenchmarkArgs, data_dir: Option<&Path>) -> CmdResult {
    let names: Vec<String> = if args.datasets.iter().any(|d| d.eq_ignore_ascii_case("all")) {
        cnnelm::dataset::Registry::builtin()
            .names()
            .into_iter()
            .map(String::from)
            .collect()
    } else {
        args.datasets.clone()
    };
    let mut datasets = Vec::new();
    for name in &names {
        let ds = data::resolve(name, data_dir)?;
        let desc = ds.descriptor.clone().ok_or_else(|| {
            Error::Config(format!(
                "{name}: benchmark datasets need a registry entry for L and c"
            ))
        })?;
        datasets.push(BenchmarkDataset {
            name: ds.name,
            hidden: desc.hidden,
            c: desc.c,
            source: ds.source,
        });
    }
    let cfg = BenchmarkConfig {
        approaches: args.approaches,
        seeds: args.seeds,
        norm_mode: args.norm_mode,
        kernel_size: args.kernel_size,
        n_filters: args.n_filters,
        quantized: args.quantized,
        end_to_end: args.end_to_end,
    };
    let report = run_benchmark(&datasets, &cfg)?;
    eprintln!("config digest: {}", report.config_digest);
    report.write_files(&args.output_dir)?;
    print!("{}", report.render_table());
    eprintln!(
        "{} runs, {} failed datasets; reports in {}",
        report.runs.len(),
        report.failures.len(),
        args.output_dir.display()
    );
    if report.averaged.is_empty() {
        return Err(Error::Config("no dataset could be benchmarked".into()).into());
    }
    if let Some(min) = args.fail_under {
        let below: Vec<String> = report
            .averaged
            .iter()
            .filter(|r| r.floor_hit < min)
            .map(|r| format!("{} {} {:.2}%", r.dataset, r.approach, r.floor_hit))
            .collect();
        if !below.is_empty() {
            return Err(Failure::Gate(format!(
                "floor hit below {min}%: {}",
                below.join(", ")
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

pub fn report(input: &Path, format: ReportFormat) -> CmdResult {
    let report = BenchmarkReport::load_json(input)?;
    match format {
        ReportFormat::Table => print!("{}", report.render_table()),
        ReportFormat::Csv => report.write_csv(std::io::stdout())?,
        ReportFormat::Json => println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(Error::from)?
        ),
    }
    Ok(())
}
