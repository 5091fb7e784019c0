//! Payload size and latency sweep over the length of the flexible dimension,
//! plus the qualitative metrics (conformity and contingent disclosure).

use std::collections::HashSet;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use tokio::net::TcpListener;

use crate::annotate::{conformity_check, PageMode};
use crate::catalog::{Inventory, ProductCatalog, Variation};
use crate::consumer::Client;
use crate::error::{Error, Result};
use crate::heuristics::{
    classify_dimensions, expected_count, ClassificationPolicy, Heuristic, ItemKind, PublicationItem, PublishOptions,
};
use crate::publish::{write_page, CountingWriter};
use crate::resolver;

/// Action targets on benchmark pages point here so page bytes do not depend
/// on the port the embedded server happened to bind.
pub const BENCH_PUBLIC_URL: &str = "http://127.0.0.1:8080";

pub const CSV_HEADER: [&str; 9] = [
    "heuristic",
    "n",
    "annotation_count",
    "payload_bytes",
    "page_bytes",
    "gen_time_ms",
    "serve_time_ms",
    "conformity",
    "disclosure_ratio",
];

const CAPPED: &str = "capped";

/// Fraction of variations whose exact availability a page reveals: only
/// concrete items disclose one variation each.
pub fn disclosure_ratio<'a, I>(items: I, catalog: &ProductCatalog) -> f64
where
    I: IntoIterator<Item = &'a PublicationItem>,
{
    let disclosed: HashSet<Variation> = items
        .into_iter()
        .filter(|it| it.kind() == ItemKind::Concrete)
        .filter_map(PublicationItem::variation)
        .collect();
    disclosed.len() as f64 / catalog.count_variations() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub repetitions: usize,
}

impl Timing {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        Some(Timing {
            mean_ms: samples.iter().sum::<f64>() / samples.len() as f64,
            min_ms: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            repetitions: samples.len(),
        })
    }
}

/// Measurements of one (heuristic, n) cell. `None` byte and time fields on
/// a capped row mean the page was refused; `serve_time` is also `None` when
/// serving was not measured or failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRecord {
    pub heuristic: Heuristic,
    pub n: usize,
    pub annotation_count: u64,
    pub payload_bytes: Option<u64>,
    pub page_bytes: Option<u64>,
    pub gen_time: Option<Timing>,
    pub serve_time: Option<Timing>,
    pub conformity: Option<bool>,
    pub disclosure_ratio: f64,
    pub capped: bool,
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub flexible_dimension: String,
    pub n_values: Vec<usize>,
    pub heuristics: Vec<Heuristic>,
    pub repetitions: usize,
    pub options: PublishOptions,
    pub measure_serve: bool,
    pub check_conformity: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub heuristic: Heuristic,
    pub n: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct SweepResult {
    pub records: Vec<BenchRecord>,
    pub failures: Vec<Failure>,
    pub warnings: Vec<String>,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Streams the page through a pipe into the conformity checker so the
/// largest pages never sit in memory or on disk.
fn check_page_conformity(
    heuristic: Heuristic,
    catalog: &ProductCatalog,
    inventory: &Inventory,
    options: &PublishOptions,
) -> Result<bool> {
    let (reader, writer) = std::io::pipe()?;
    std::thread::scope(|scope| {
        let producer = scope.spawn(move || {
            write_page(
                heuristic,
                catalog,
                inventory,
                options,
                BENCH_PUBLIC_URL,
                PageMode::Bulk,
                writer,
                |_| Ok(()),
            )
            .map(|_| ())
        });
        let report = conformity_check(BufReader::with_capacity(1 << 16, reader));
        producer.join().expect("page producer panicked")?;
        Ok(report?.conforms)
    })
}

fn measure_generation(heuristic: Heuristic, catalog: &ProductCatalog, config: &SweepConfig) -> Result<BenchRecord> {
    let inventory = Inventory::new(catalog);
    let options = &config.options;
    let count = expected_count(heuristic, catalog, options)?;
    if heuristic == Heuristic::Full && count > options.hard_cap {
        return Ok(BenchRecord {
            heuristic,
            n: 0,
            annotation_count: count,
            payload_bytes: None,
            page_bytes: None,
            gen_time: None,
            serve_time: None,
            conformity: None,
            disclosure_ratio: 1.0,
            capped: true,
        });
    }

    // The warm-up run also collects the deterministic figures.
    let mut disclosed: HashSet<Variation> = HashSet::new();
    let (_, stats) = write_page(
        heuristic,
        catalog,
        &inventory,
        options,
        BENCH_PUBLIC_URL,
        PageMode::Bulk,
        CountingWriter::default(),
        |a| {
            if a.item().kind() == ItemKind::Concrete {
                disclosed.extend(a.item().variation());
            }
            Ok(())
        },
    )?;
    let mut samples = Vec::with_capacity(config.repetitions);
    for _ in 0..config.repetitions {
        let started = Instant::now();
        let (sink, _) = write_page(
            heuristic,
            catalog,
            &inventory,
            options,
            BENCH_PUBLIC_URL,
            PageMode::Bulk,
            CountingWriter::default(),
            |_| Ok(()),
        )?;
        samples.push(ms_since(started));
        std::hint::black_box(sink.bytes);
    }
    let conformity = if config.check_conformity {
        Some(check_page_conformity(heuristic, catalog, &inventory, options)?)
    } else {
        None
    };
    Ok(BenchRecord {
        heuristic,
        n: 0,
        annotation_count: stats.annotation_count,
        payload_bytes: Some(stats.payload_bytes),
        page_bytes: Some(stats.page_bytes),
        gen_time: Timing::from_samples(&samples),
        serve_time: None,
        conformity,
        disclosure_ratio: disclosed.len() as f64 / catalog.count_variations() as f64,
        capped: false,
    })
}

async fn measure_serving(client: &Client, url: &str, repetitions: usize) -> Result<Timing> {
    client.drain(url).await?;
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let started = Instant::now();
        client.drain(url).await?;
        samples.push(ms_since(started));
    }
    Ok(Timing::from_samples(&samples).expect("at least one repetition"))
}

/// Runs every (heuristic, n) cell. Heuristics run one after another; a
/// failing cell is reported and the sweep continues.
pub async fn run_sweep(template: &ProductCatalog, config: &SweepConfig) -> Result<SweepResult> {
    if config.n_values.is_empty() {
        return Err(Error::Validation("the sweep needs at least one n value".into()));
    }
    if config.repetitions < 3 {
        return Err(Error::Validation(format!(
            "timings need at least 3 repetitions, got {}",
            config.repetitions
        )));
    }
    // Classify once, on the template: a flexible dimension shrunk to n = 1
    // must not turn short halfway through the sweep.
    let split = classify_dimensions(template, &config.options.classification)?;
    let mut config = config.clone();
    config.options.classification = ClassificationPolicy::Fixed { short: split.short };
    let config = &config;
    let client = Client::new();
    let mut result = SweepResult::default();
    for &n in &config.n_values {
        let catalog = Arc::new(template.with_dimension_length(&config.flexible_dimension, n)?);
        let server = if config.measure_serve {
            let listener = TcpListener::bind("127.0.0.1:0").await?;
            Some(
                resolver::spawn(
                    listener,
                    catalog.clone(),
                    config.options.clone(),
                    Some(BENCH_PUBLIC_URL),
                )
                .await?,
            )
        } else {
            None
        };
        for &heuristic in &config.heuristics {
            tracing::info!(%heuristic, n, "measuring");
            let cat = catalog.clone();
            let cfg = config.clone();
            let generated = tokio::task::spawn_blocking(move || measure_generation(heuristic, &cat, &cfg))
                .await
                .map_err(|e| Error::Contract(format!("measurement task failed: {e}")))?;
            let mut record = match generated {
                Ok(r) => r,
                Err(e) => {
                    tracing::warn!(%heuristic, n, error = %e, "measurement failed");
                    result.failures.push(Failure {
                        heuristic,
                        n,
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            record.n = n;
            if let (Some(server), false) = (&server, record.capped) {
                let url = format!("{}/page/{heuristic}", server.url());
                match measure_serving(&client, &url, config.repetitions).await {
                    Ok(t) => record.serve_time = Some(t),
                    Err(e) => {
                        let warning = format!("{heuristic} n={n}: serve time not measured: {e}");
                        tracing::warn!("{warning}");
                        result.warnings.push(warning);
                    }
                }
            }
            result.records.push(record);
        }
        if let Some(server) = server {
            server.shutdown().await?;
        }
    }
    result
        .records
        .sort_by(|a, b| a.heuristic.as_str().cmp(b.heuristic.as_str()).then(a.n.cmp(&b.n)));
    Ok(result)
}

fn ms_field(t: Option<Timing>, capped: bool, pick: fn(&Timing) -> f64) -> String {
    match (capped, t) {
        (true, _) => CAPPED.into(),
        (false, Some(t)) => format!("{:.3}", pick(&t)),
        (false, None) => String::new(),
    }
}

fn bytes_field(b: Option<u64>, capped: bool) -> String {
    match (capped, b) {
        (true, _) => CAPPED.into(),
        (false, Some(b)) => b.to_string(),
        (false, None) => String::new(),
    }
}

fn main_row(r: &BenchRecord) -> Vec<String> {
    vec![
        r.heuristic.to_string(),
        r.n.to_string(),
        r.annotation_count.to_string(),
        bytes_field(r.payload_bytes, r.capped),
        bytes_field(r.page_bytes, r.capped),
        ms_field(r.gen_time, r.capped, |t| t.mean_ms),
        ms_field(r.serve_time, r.capped, |t| t.mean_ms),
        match (r.capped, r.conformity) {
            (true, _) => CAPPED.into(),
            (false, Some(c)) => c.to_string(),
            (false, None) => String::new(),
        },
        r.disclosure_ratio.to_string(),
    ]
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// The main CSV, rows in (heuristic, n) order, timing means to three decimals.
pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    write_rows(out, &CSV_HEADER, records.iter().map(main_row)).map_err(|e| Error::Stream(std::io::Error::other(e)))
}

pub const EXTENDED_HEADER: [&str; 14] = [
    "heuristic",
    "n",
    "annotation_count",
    "payload_bytes",
    "page_bytes",
    "gen_time_ms",
    "gen_time_min_ms",
    "gen_time_max_ms",
    "serve_time_ms",
    "serve_time_min_ms",
    "serve_time_max_ms",
    "repetitions",
    "conformity",
    "disclosure_ratio",
];

/// Main columns plus min/max timings and the repetition count.
pub fn write_extended_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let rows = records.iter().map(|r| {
        let base = main_row(r);
        let reps = r.gen_time.map(|t| t.repetitions.to_string()).unwrap_or_default();
        vec![
            base[0].clone(),
            base[1].clone(),
            base[2].clone(),
            base[3].clone(),
            base[4].clone(),
            base[5].clone(),
            ms_field(r.gen_time, r.capped, |t| t.min_ms),
            ms_field(r.gen_time, r.capped, |t| t.max_ms),
            base[6].clone(),
            ms_field(r.serve_time, r.capped, |t| t.min_ms),
            ms_field(r.serve_time, r.capped, |t| t.max_ms),
            reps,
            base[7].clone(),
            base[8].clone(),
        ]
    });
    write_rows(out, &EXTENDED_HEADER, rows).map_err(|e| Error::Stream(std::io::Error::other(e)))
}

/// `bench.csv` → `bench.extended.csv`.
pub fn extended_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.extended.csv"))
}

pub fn emit_csv(records: &[BenchRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Validation("no records to write".into()));
    }
    let create = |p: &Path| std::fs::File::create(p).map_err(|e| Error::io(p, e));
    write_csv(records, create(path)?)?;
    let ext = extended_path(path);
    write_extended_csv(records, create(&ext)?)
}

/// A gnuplot script plotting payload against n on linear and log axes.
pub fn gnuplot_script(csv_path: &Path, heuristics: &[Heuristic]) -> String {
    let csv = csv_path.display().to_string().replace('\'', "");
    let stem = csv_path.with_extension("").display().to_string().replace('\'', "");
    let plot = |title: &str| {
        let series: Vec<String> = heuristics
            .iter()
            .map(|h| {
                format!(
                    "'{csv}' using (strcol(1) eq '{h}' ? $2 : 1/0):(strcol(1) eq '{h}' ? $4 : 1/0) with linespoints title '{h}'"
                )
            })
            .collect();
        format!("set title '{title}'\nplot {}\n", series.join(", \\\n     "))
    };
    format!(
        "# payload bytes against the length of the flexible dimension\n\
         set datafile separator ','\n\
         set key top left\n\
         set xlabel 'n'\n\
         set ylabel 'payload bytes'\n\
         set terminal pngcairo size 900,600\n\
         set output '{stem}-linear.png'\n\
         {}\
         set logscale y\n\
         set output '{stem}-log.png'\n\
         {}",
        plot("annotation payload (linear)"),
        plot("annotation payload (log)"),
    )
}

/// Least-squares line through the points: (slope, intercept, R²).
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
