//! Python bindings. Structured results cross the boundary as JSON and are
//! decoded with the stdlib `json` module.

use std::collections::HashMap;
use std::sync::Arc;

use engine::annotate::{self, PageMode};
use engine::catalog::{Inventory, ProductCatalog};
use engine::heuristics::{self, ClassificationPolicy, Heuristic, PickerPolicy, PublishOptions, DEFAULT_HARD_CAP};
use engine::publish::{self as pages, CountingWriter};
use engine::resolver::{self, SearchRequest, DEFAULT_PER_PAGE};
use engine::{bench, consumer, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

const DEFAULT_BASE: &str = "http://127.0.0.1:8080";

create_exception!(matpub, MatpubError, PyException, "Base class for engine failures.");
create_exception!(
    matpub,
    CapExceededError,
    MatpubError,
    "Full materialization refused by the hard cap."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::CapExceeded { .. } => CapExceededError::new_err(e.to_string()),
        Error::Validation(_) | Error::InvalidCatalog(_) | Error::InvalidPolicy(_) | Error::Config(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => MatpubError::new_err(e.to_string()),
    }
}

fn loads<'py>(py: Python<'py>, json: String) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

fn dumps<T: ?Sized + serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| MatpubError::new_err(e.to_string()))
}

fn heuristic(name: &str) -> PyResult<Heuristic> {
    name.parse().map_err(to_py)
}

fn options(threshold: usize, picker_seed: Option<u64>, hard_cap: u64) -> PublishOptions {
    PublishOptions {
        classification: ClassificationPolicy::Threshold {
            length_threshold: threshold,
        },
        picker: picker_seed.map_or(PickerPolicy::FirstLexicographic, |seed| PickerPolicy::SeededRandom {
            seed,
        }),
        hard_cap,
    }
}

/// A product catalog: dimensions, additive pricing and seeded inventory.
#[pyclass(frozen, module = "matpub")]
struct Catalog {
    inner: Arc<ProductCatalog>,
}

impl Catalog {
    fn wrap(inner: ProductCatalog) -> Self {
        Catalog { inner: Arc::new(inner) }
    }

    fn variation(&self, assignments: &HashMap<String, String>) -> PyResult<engine::catalog::Variation> {
        self.inner
            .variation_from_assignments(assignments.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .map_err(to_py)
    }
}

#[pymethods]
impl Catalog {
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        ProductCatalog::load(path).map(Catalog::wrap).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ProductCatalog::from_json_str(text).map(Catalog::wrap).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json_value().to_string()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.product().name.clone()
    }

    /// `(name, length)` per dimension, in declared order.
    #[getter]
    fn dimensions(&self) -> Vec<(String, usize)> {
        self.inner
            .dimensions()
            .iter()
            .map(|d| (d.name().to_string(), d.len()))
            .collect()
    }

    #[getter]
    fn currency(&self) -> String {
        self.inner.currency().to_string()
    }

    fn count_variations(&self) -> u64 {
        self.inner.count_variations()
    }

    fn __len__(&self) -> usize {
        self.inner.count_variations() as usize
    }

    fn with_dimension_length(&self, name: &str, n: usize) -> PyResult<Self> {
        self.inner
            .with_dimension_length(name, n)
            .map(Catalog::wrap)
            .map_err(to_py)
    }

    fn with_availability_rate(&self, rate: f64) -> PyResult<Self> {
        self.inner
            .with_availability_rate(rate)
            .map(Catalog::wrap)
            .map_err(to_py)
    }

    fn with_inventory_seed(&self, seed: u64) -> Self {
        Catalog::wrap(self.inner.with_inventory_seed(seed))
    }

    /// The variation at `rank` in enumeration order, as a name → value dict
    /// in declared dimension order.
    fn variation_at<'py>(&self, py: Python<'py>, rank: u64) -> PyResult<Bound<'py, PyDict>> {
        let v = self
            .inner
            .variation_at(rank)
            .ok_or_else(|| PyValueError::new_err(format!("rank {rank} is out of range")))?;
        let out = PyDict::new(py);
        for (name, value) in self.inner.assignments(&v) {
            out.set_item(name, value)?;
        }
        Ok(out)
    }

    fn canonical_id(&self, assignments: HashMap<String, String>) -> PyResult<String> {
        Ok(self.inner.canonical_id(&self.variation(&assignments)?))
    }

    /// Price as a decimal string, e.g. `"555.00"`.
    fn price(&self, assignments: HashMap<String, String>) -> PyResult<String> {
        let v = self.variation(&assignments)?;
        Ok(self.inner.price(&v).map_err(to_py)?.to_string())
    }

    /// Availability before any booking.
    fn is_available(&self, assignments: HashMap<String, String>) -> PyResult<bool> {
        Ok(self.inner.initial_availability(&self.variation(&assignments)?))
    }

    fn __repr__(&self) -> String {
        let dims: Vec<String> = self
            .inner
            .dimensions()
            .iter()
            .map(|d| format!("{}={}", d.name(), d.len()))
            .collect();
        format!("Catalog({:?}, {})", self.inner.product().name, dims.join(", "))
    }
}

#[pyfunction]
#[pyo3(signature = (catalog, heuristic, threshold = 5))]
fn expected_count(catalog: &Catalog, heuristic: &str, threshold: usize) -> PyResult<u64> {
    let h = self::heuristic(heuristic)?;
    heuristics::expected_count(h, &catalog.inner, &options(threshold, None, DEFAULT_HARD_CAP)).map_err(to_py)
}

/// Serialized JSON-LD documents for one heuristic, against the seeded inventory.
#[pyfunction]
#[pyo3(signature = (catalog, heuristic, base_url = DEFAULT_BASE, threshold = 5, picker_seed = None, hard_cap = DEFAULT_HARD_CAP))]
fn publish(
    py: Python<'_>,
    catalog: &Catalog,
    heuristic: &str,
    base_url: &str,
    threshold: usize,
    picker_seed: Option<u64>,
    hard_cap: u64,
) -> PyResult<Vec<String>> {
    let h = self::heuristic(heuristic)?;
    let opts = options(threshold, picker_seed, hard_cap);
    let catalog = catalog.inner.clone();
    py.detach(move || {
        let inventory = Inventory::new(&catalog);
        pages::annotations(h, &catalog, &inventory, &opts, base_url)
            .map(|list| list.into_iter().map(|a| a.jsonld().to_string()).collect())
    })
    .map_err(to_py)
}

/// The annotated HTML page and its byte statistics. `page` selects
/// paginated rendering.
#[pyfunction]
#[pyo3(signature = (catalog, heuristic, base_url = DEFAULT_BASE, page = None, per_page = DEFAULT_PER_PAGE, threshold = 5, picker_seed = None, hard_cap = DEFAULT_HARD_CAP))]
#[allow(clippy::too_many_arguments)]
fn render_page<'py>(
    py: Python<'py>,
    catalog: &Catalog,
    heuristic: &str,
    base_url: &str,
    page: Option<u64>,
    per_page: u64,
    threshold: usize,
    picker_seed: Option<u64>,
    hard_cap: u64,
) -> PyResult<(Bound<'py, PyBytes>, Bound<'py, PyAny>)> {
    let h = self::heuristic(heuristic)?;
    let opts = options(threshold, picker_seed, hard_cap);
    let mode = page.map_or(PageMode::Bulk, |page| PageMode::Paginated { page, per_page });
    let catalog = catalog.inner.clone();
    let (bytes, stats) = py
        .detach(move || {
            let inventory = Inventory::new(&catalog);
            pages::write_page(h, &catalog, &inventory, &opts, base_url, mode, Vec::new(), |_| Ok(()))
        })
        .map_err(to_py)?;
    let stats = dumps(&serde_json::json!({
        "annotation_count": stats.annotation_count,
        "payload_bytes": stats.payload_bytes,
        "element_bytes": stats.element_bytes,
        "shell_bytes": stats.shell_bytes,
        "page_bytes": stats.page_bytes,
    }))?;
    Ok((PyBytes::new(py, &bytes), loads(py, stats)?))
}

/// Page size in bytes without keeping the page.
#[pyfunction]
#[pyo3(signature = (catalog, heuristic, threshold = 5, hard_cap = DEFAULT_HARD_CAP))]
fn page_size(py: Python<'_>, catalog: &Catalog, heuristic: &str, threshold: usize, hard_cap: u64) -> PyResult<u64> {
    let h = self::heuristic(heuristic)?;
    let opts = options(threshold, None, hard_cap);
    let catalog = catalog.inner.clone();
    py.detach(move || {
        let inventory = Inventory::new(&catalog);
        pages::write_page(
            h,
            &catalog,
            &inventory,
            &opts,
            DEFAULT_BASE,
            PageMode::Bulk,
            CountingWriter::default(),
            |_| Ok(()),
        )
        .map(|(sink, _)| sink.bytes)
    })
    .map_err(to_py)
}

#[pyfunction]
fn conformity_check<'py>(py: Python<'py>, page: &[u8]) -> PyResult<Bound<'py, PyAny>> {
    let report = annotate::conformity_check(page).map_err(to_py)?;
    loads(py, dumps(&report)?)
}

#[pyfunction]
#[pyo3(signature = (catalog, heuristic, threshold = 5, picker_seed = None))]
fn disclosure_ratio(catalog: &Catalog, heuristic: &str, threshold: usize, picker_seed: Option<u64>) -> PyResult<f64> {
    let h = self::heuristic(heuristic)?;
    let opts = options(threshold, picker_seed, u64::MAX);
    let inventory = Inventory::new(&catalog.inner);
    let items: Vec<_> = heuristics::publish(h, &catalog.inner, &inventory, &opts)
        .map_err(to_py)?
        .collect();
    Ok(bench::disclosure_ratio(&items, &catalog.inner))
}

/// `(short, long)` dimension names. Without a budget the length threshold
/// decides; with one, dimensions are added shortest first while the
/// projected page stays within it.
#[pyfunction]
#[pyo3(signature = (catalog, threshold = 5, byte_budget = None, item_bytes = 600))]
fn classify_dimensions(
    catalog: &Catalog,
    threshold: usize,
    byte_budget: Option<u64>,
    item_bytes: u64,
) -> PyResult<(Vec<String>, Vec<String>)> {
    let policy = match byte_budget {
        Some(byte_budget) => ClassificationPolicy::Budget {
            byte_budget,
            item_bytes,
        },
        None => ClassificationPolicy::Threshold {
            length_threshold: threshold,
        },
    };
    let split = heuristics::classify_dimensions(&catalog.inner, &policy).map_err(to_py)?;
    Ok((split.short, split.long))
}

/// Available variations matching `constraints`, against the seeded inventory.
#[pyfunction]
#[pyo3(signature = (catalog, constraints = None, page = 1, per_page = DEFAULT_PER_PAGE, base_url = DEFAULT_BASE))]
fn search<'py>(
    py: Python<'py>,
    catalog: &Catalog,
    constraints: Option<HashMap<String, String>>,
    page: u64,
    per_page: u64,
    base_url: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mut pairs: Vec<(String, String)> = constraints.unwrap_or_default().into_iter().collect();
    pairs.push(("page".into(), page.to_string()));
    pairs.push(("per_page".into(), per_page.to_string()));
    let request = SearchRequest::from_pairs(&catalog.inner, pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
        .map_err(to_py)?;
    let inventory = Inventory::new(&catalog.inner);
    let book_url = format!("{}{}", base_url.trim_end_matches('/'), annotate::BOOK_PATH);
    let response = resolver::search(&catalog.inner, &inventory, &request, &book_url);
    loads(py, dumps(&response)?)
}

/// Parsed annotations of a page plus warnings for blocks that failed to parse.
#[pyfunction]
fn extract_annotations<'py>(py: Python<'py>, page: &[u8]) -> PyResult<Bound<'py, PyAny>> {
    let extraction = consumer::extract_annotations(page);
    loads(py, dumps(&extraction)?)
}

#[pymodule]
fn matpub(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Catalog>()?;
    m.add("MatpubError", m.py().get_type::<MatpubError>())?;
    m.add("CapExceededError", m.py().get_type::<CapExceededError>())?;
    m.add("HEURISTICS", Heuristic::ALL.map(Heuristic::as_str).to_vec())?;
    m.add_function(wrap_pyfunction!(expected_count, m)?)?;
    m.add_function(wrap_pyfunction!(publish, m)?)?;
    m.add_function(wrap_pyfunction!(render_page, m)?)?;
    m.add_function(wrap_pyfunction!(page_size, m)?)?;
    m.add_function(wrap_pyfunction!(conformity_check, m)?)?;
    m.add_function(wrap_pyfunction!(disclosure_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(classify_dimensions, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(extract_annotations, m)?)?;
    Ok(())
}
