//! The `matpub` command line.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 hard cap
//! refusal, 3 transport failure, 4 partial benchmark failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::annotate::PageMode;
use crate::bench::{self, SweepConfig};
use crate::catalog::Inventory;
use crate::config::Config;
use crate::consumer::{self, Client, DEFAULT_CONCURRENCY};
use crate::error::{Error, Result};
use crate::heuristics::Heuristic;
use crate::publish::write_page;
use crate::resolver;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CAP: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "matpub",
    version,
    about = "Publish structured data for multi-dimensional products"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Path to the JSON configuration file.
    #[arg(long, default_value = "config/matpub.json")]
    pub config: PathBuf,
    /// Length of the flexible dimension; defaults to the catalog's own.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write annotations.jsonl and page.html for one heuristic.
    Generate {
        #[command(flatten)]
        common: Common,
        /// full, abstraction, specialization, type-level or selective.
        #[arg(long)]
        heuristic: String,
        /// Output directory, created if missing.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the booking engine until interrupted.
    Serve {
        #[command(flatten)]
        common: Common,
    },
    /// Resolve queries against an annotated page.
    Crawl {
        #[command(flatten)]
        common: Common,
        /// URL of an annotated page, e.g. http://127.0.0.1:8080/page/selective.
        #[arg(long)]
        page_url: String,
        /// One desired variation as `name=value,name=value,…`.
        #[arg(long, conflicts_with = "experiment", required_unless_present = "experiment")]
        query: Option<String>,
        /// Number of seeded random queries to resolve.
        #[arg(long)]
        experiment: Option<usize>,
        /// Seed for the experiment's query sample.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Book what is found.
        #[arg(long)]
        book: bool,
        /// Also print every experiment trace before the summary.
        #[arg(long)]
        traces: bool,
        /// Maximum number of concurrent traces.
        #[arg(long, default_value_t = DEFAULT_CONCURRENCY)]
        concurrency: usize,
    },
    /// Sweep the flexible dimension and write the benchmark CSV.
    Bench {
        /// Path to the JSON configuration file.
        #[arg(long, default_value = "config/matpub.json")]
        config: PathBuf,
        /// CSV path; overrides the configured one.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write a gnuplot script next to the CSV.
        #[arg(long)]
        gnuplot: bool,
        /// Comma-separated heuristics; overrides the configured ones.
        #[arg(long, value_delimiter = ',')]
        heuristics: Option<Vec<String>>,
        /// Comma-separated n values; overrides the configured ones.
        #[arg(long, value_delimiter = ',')]
        n_values: Option<Vec<usize>>,
        /// Timed repetitions per cell (at least 3).
        #[arg(long)]
        repetitions: Option<usize>,
        /// Skip the HTTP serve-time measurement.
        #[arg(long)]
        no_serve: bool,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::Transport(_) => EXIT_TRANSPORT,
        _ => EXIT_CONFIG,
    }
}

/// Parses `name=value,name=value`.
pub fn parse_query(spec: &str) -> Result<Vec<(String, String)>> {
    spec.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("query part {pair:?} is not name=value")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(|f| BufWriter::with_capacity(1 << 16, f))
        .map_err(|e| Error::io(path, e))
}

fn generate(common: &Common, heuristic: &str, out: &Path) -> Result<i32> {
    let config = Config::load(&common.config)?;
    let heuristic: Heuristic = heuristic.parse()?;
    let catalog = config.catalog(common.n)?;
    let options = config.publish_options();
    let base = config
        .server
        .public_url
        .clone()
        .unwrap_or_else(|| format!("http://{}:{}", config.server.host, config.server.port));
    // Refuse before touching the output directory.
    let _ = crate::heuristics::publish(heuristic, &catalog, &Inventory::new(&catalog), &options)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let jsonl_path = out.join("annotations.jsonl");
    let page_path = out.join("page.html");
    let mut jsonl = create(&jsonl_path)?;
    let inventory = Inventory::new(&catalog);
    let (mut page, stats) = write_page(
        heuristic,
        &catalog,
        &inventory,
        &options,
        &base,
        PageMode::Bulk,
        create(&page_path)?,
        |a| {
            jsonl.write_all(a.jsonld().as_bytes())?;
            jsonl.write_all(b"\n")?;
            Ok(())
        },
    )?;
    jsonl.flush().map_err(|e| Error::io(&jsonl_path, e))?;
    page.flush().map_err(|e| Error::io(&page_path, e))?;
    print_json(&json!({
        "heuristic": heuristic,
        "annotation_count": stats.annotation_count,
        "payload_bytes": stats.payload_bytes,
        "page_bytes": stats.page_bytes,
        "annotations": jsonl_path,
        "page": page_path,
    }))?;
    Ok(EXIT_OK)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

async fn serve(common: &Common) -> Result<i32> {
    let config = Config::load(&common.config)?;
    let catalog = Arc::new(config.catalog(common.n)?);
    let addr = config.bind_addr()?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Config(format!("cannot listen on {addr}: {e}")))?;
    let handle = resolver::spawn(
        listener,
        catalog.clone(),
        config.publish_options(),
        config.server.public_url.as_deref(),
    )
    .await?;
    tracing::info!(
        addr = %handle.addr(),
        endpoint_base = handle.state().endpoint_base(),
        variations = catalog.count_variations(),
        "serving"
    );
    shutdown_signal().await;
    tracing::info!("shutting down");
    handle.shutdown().await?;
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
async fn crawl(
    common: &Common,
    page_url: &str,
    query: Option<&str>,
    experiment: Option<usize>,
    seed: u64,
    book: bool,
    traces: bool,
    concurrency: usize,
) -> Result<i32> {
    let client = Client::new();
    match (query, experiment) {
        (Some(q), _) => {
            let desired = parse_query(q)?;
            let trace = consumer::resolve(&client, page_url, &desired, book).await?;
            print_json(&trace)?;
        }
        (None, Some(n)) => {
            let config = Config::load(&common.config)?;
            let catalog = config.catalog(common.n)?;
            let (summary, all) =
                consumer::hit_ratio_experiment(&client, page_url, &catalog, n, seed, book, concurrency).await?;
            if traces {
                for t in &all {
                    print_json(t)?;
                }
            }
            print_json(&summary)?;
        }
        (None, None) => return Err(Error::Validation("either --query or --experiment is required".into())),
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
async fn run_bench(
    config_path: &Path,
    output: Option<PathBuf>,
    gnuplot: bool,
    heuristics: Option<Vec<String>>,
    n_values: Option<Vec<usize>>,
    repetitions: Option<usize>,
    no_serve: bool,
) -> Result<i32> {
    let config = Config::load(config_path)?;
    let catalog = config.catalog(None)?;
    let heuristics = match heuristics {
        Some(names) => names.iter().map(|h| h.parse()).collect::<Result<Vec<Heuristic>>>()?,
        None => config.bench.heuristics.clone(),
    };
    let sweep = SweepConfig {
        flexible_dimension: config.flexible_dimension.clone(),
        n_values: n_values.unwrap_or_else(|| config.bench.n_values.clone()),
        heuristics: heuristics.clone(),
        repetitions: repetitions.unwrap_or(config.bench.repetitions),
        options: config.publish_options(),
        measure_serve: !no_serve,
        check_conformity: true,
    };
    let output = output.unwrap_or_else(|| config.bench.output.clone());
    let result = bench::run_sweep(&catalog, &sweep).await?;
    if result.records.is_empty() {
        for f in &result.failures {
            eprintln!("{} n={}: {}", f.heuristic, f.n, f.message);
        }
        return Ok(EXIT_PARTIAL);
    }
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    bench::emit_csv(&result.records, &output)?;
    if gnuplot {
        let script = output.with_extension("gp");
        std::fs::write(&script, bench::gnuplot_script(&output, &heuristics)).map_err(|e| Error::io(&script, e))?;
    }

    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "{:<15} {:>6} {:>9} {:>14} {:>12} {:>12} {:>10}",
        "heuristic", "n", "count", "payload_bytes", "gen_ms", "serve_ms", "disclosure"
    )?;
    for r in &result.records {
        let fmt_ms = |t: Option<bench::Timing>| t.map_or_else(|| "-".to_string(), |t| format!("{:.3}", t.mean_ms));
        writeln!(
            out,
            "{:<15} {:>6} {:>9} {:>14} {:>12} {:>12} {:>10.6}",
            r.heuristic.as_str(),
            r.n,
            r.annotation_count,
            r.payload_bytes.map_or_else(|| "capped".into(), |b| b.to_string()),
            fmt_ms(r.gen_time),
            fmt_ms(r.serve_time),
            r.disclosure_ratio,
        )?;
    }
    drop(out);
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    for f in &result.failures {
        eprintln!("failed: {} n={}: {}", f.heuristic, f.n, f.message);
    }
    Ok(if result.failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

pub async fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Generate { common, heuristic, out } => generate(&common, &heuristic, &out),
        Command::Serve { common } => serve(&common).await,
        Command::Crawl {
            common,
            page_url,
            query,
            experiment,
            seed,
            book,
            traces,
            concurrency,
        } => {
            crawl(
                &common,
                &page_url,
                query.as_deref(),
                experiment,
                seed,
                book,
                traces,
                concurrency,
            )
            .await
        }
        Command::Bench {
            config,
            output,
            gnuplot,
            heuristics,
            n_values,
            repetitions,
            no_serve,
        } => run_bench(&config, output, gnuplot, heuristics, n_values, repetitions, no_serve).await,
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
