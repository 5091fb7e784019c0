//! The single JSON configuration file shared by every subcommand.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::ProductCatalog;
use crate::error::{Error, Result};
use crate::heuristics::{ClassificationPolicy, Heuristic, PickerPolicy, PublishOptions, DEFAULT_HARD_CAP};

pub const HOST_ENV: &str = "MATPUB_HOST";
pub const PORT_ENV: &str = "MATPUB_PORT";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Policies {
    pub classification: ClassificationPolicy,
    pub picker: PickerPolicy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// Base URL written into action targets; defaults to the bound address.
    pub public_url: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            public_url: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub n_values: Vec<usize>,
    pub repetitions: usize,
    pub output: PathBuf,
    pub heuristics: Vec<Heuristic>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_values: vec![1, 183, 365, 730, 1825],
            repetitions: 3,
            output: PathBuf::from("bench.csv"),
            heuristics: Heuristic::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    catalog: PathBuf,
    #[serde(default = "default_flexible")]
    flexible_dimension: String,
    #[serde(default)]
    policies: Policies,
    #[serde(default)]
    server: ServerConfig,
    #[serde(default = "default_cap")]
    hard_cap: u64,
    #[serde(default)]
    bench: BenchConfig,
}

fn default_flexible() -> String {
    "arrival".into()
}

fn default_cap() -> u64 {
    DEFAULT_HARD_CAP
}

#[derive(Clone, Debug)]
pub struct Config {
    /// Absolute or relative to the working directory; already resolved
    /// against the config file's directory.
    pub catalog_path: PathBuf,
    pub flexible_dimension: String,
    pub policies: Policies,
    pub server: ServerConfig,
    pub hard_cap: u64,
    pub bench: BenchConfig,
}

impl Config {
    /// Reads a config file. Relative paths inside it are relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        Self::from_json_str(&text, dir)
    }

    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
        if file.hard_cap == 0 {
            return Err(Error::Config("hard_cap must be positive".into()));
        }
        if file.bench.repetitions == 0 {
            return Err(Error::Config("bench.repetitions must be at least 1".into()));
        }
        file.policies
            .classification
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        Ok(Config {
            catalog_path: resolve(file.catalog),
            flexible_dimension: file.flexible_dimension,
            policies: file.policies,
            server: file.server,
            hard_cap: file.hard_cap,
            bench: BenchConfig {
                output: resolve(file.bench.output),
                ..file.bench
            },
        })
    }

    /// The configured catalog, with the flexible dimension resized to `n`
    /// when given.
    pub fn catalog(&self, n: Option<usize>) -> Result<ProductCatalog> {
        let catalog = ProductCatalog::load(&self.catalog_path)?;
        match n {
            None => Ok(catalog),
            Some(n) => catalog.with_dimension_length(&self.flexible_dimension, n),
        }
    }

    pub fn publish_options(&self) -> PublishOptions {
        PublishOptions {
            classification: self.policies.classification.clone(),
            picker: self.policies.picker.clone(),
            hard_cap: self.hard_cap,
        }
    }

    /// Host and port after applying the environment overrides.
    pub fn bind_addr(&self) -> Result<SocketAddr> {
        self.bind_addr_with(|k| std::env::var(k).ok())
    }

    fn bind_addr_with(&self, env: impl Fn(&str) -> Option<String>) -> Result<SocketAddr> {
        let host = env(HOST_ENV).unwrap_or_else(|| self.server.host.clone());
        let port = match env(PORT_ENV) {
            Some(p) => p
                .parse::<u16>()
                .map_err(|_| Error::Config(format!("{PORT_ENV} is not a port number: {p:?}")))?,
            None => self.server.port,
        };
        let text = if host.contains(':') {
            format!("[{host}]:{port}")
        } else {
            format!("{host}:{port}")
        };
        std::net::ToSocketAddrs::to_socket_addrs(&text)
            .map_err(|e| Error::Config(format!("cannot resolve {text}: {e}")))?
            .next()
            .ok_or_else(|| Error::Config(format!("{text} resolves to no address")))
    }
}
