//! End-to-end page production: heuristic, elevation, serialization and page
//! rendering, streamed into any writer.

use std::io::Write;

use crate::annotate::page::{page_window, PageNav};
use crate::annotate::{annotate, Annotation, PageMode, PageStats, PageWriter};
use crate::catalog::{Inventory, ProductCatalog};
use crate::error::Result;
use crate::heuristics::{expected_count, full_materialization_range, publish, Heuristic, ItemStream, PublishOptions};

/// Items of one page. Bulk full materialization is subject to the hard cap;
/// a paginated page is bounded by `per_page` and is not.
pub fn page_items<'a>(
    heuristic: Heuristic,
    catalog: &'a ProductCatalog,
    inventory: &'a Inventory,
    options: &PublishOptions,
    mode: PageMode,
) -> Result<(ItemStream<'a>, Option<PageNav>)> {
    let (stream, nav): (ItemStream<'a>, _) = match mode {
        PageMode::Bulk => (publish(heuristic, catalog, inventory, options)?, None),
        PageMode::Paginated { page, per_page } => {
            let total = expected_count(heuristic, catalog, options)?;
            let (start, len) = page_window(total, mode)?;
            let stream: ItemStream<'a> = if heuristic == Heuristic::Full {
                Box::new(full_materialization_range(
                    catalog,
                    inventory,
                    u64::MAX,
                    start,
                    Some(len),
                )?)
            } else {
                Box::new(
                    publish(heuristic, catalog, inventory, options)?
                        .skip(start as usize)
                        .take(len as usize),
                )
            };
            (stream, Some(PageNav { page, per_page, total }))
        }
    };
    Ok((stream, nav))
}

pub fn page_title(catalog: &ProductCatalog, heuristic: Heuristic) -> String {
    format!("{} ({})", catalog.product().name, heuristic)
}

/// Writes the page for `heuristic` and hands every annotation to
/// `on_annotation` as it is embedded. Nothing is written when the heuristic
/// itself fails.
#[allow(clippy::too_many_arguments)]
pub fn write_page<W, F>(
    heuristic: Heuristic,
    catalog: &ProductCatalog,
    inventory: &Inventory,
    options: &PublishOptions,
    endpoint_base: &str,
    mode: PageMode,
    out: W,
    on_annotation: F,
) -> Result<(W, PageStats)>
where
    W: Write,
    F: FnMut(&Annotation) -> Result<()>,
{
    let (items, nav) = page_items(heuristic, catalog, inventory, options, mode)?;
    write_items(heuristic, catalog, items, nav, endpoint_base, out, on_annotation)
}

/// The rendering half of [`write_page`], for items obtained from [`page_items`].
pub fn write_items<W, F>(
    heuristic: Heuristic,
    catalog: &ProductCatalog,
    items: ItemStream<'_>,
    nav: Option<PageNav>,
    endpoint_base: &str,
    out: W,
    mut on_annotation: F,
) -> Result<(W, PageStats)>
where
    W: Write,
    F: FnMut(&Annotation) -> Result<()>,
{
    let mut writer = PageWriter::begin(out, catalog, &page_title(catalog, heuristic))?;
    for item in items {
        let annotation = annotate(item, catalog, endpoint_base)?;
        on_annotation(&annotation)?;
        writer.push(&annotation)?;
    }
    writer.finish(nav)
}

/// All annotations of a heuristic, collected. Only for bounded outputs.
pub fn annotations(
    heuristic: Heuristic,
    catalog: &ProductCatalog,
    inventory: &Inventory,
    options: &PublishOptions,
    endpoint_base: &str,
) -> Result<Vec<Annotation>> {
    publish(heuristic, catalog, inventory, options)?
        .map(|item| annotate(item, catalog, endpoint_base))
        .collect()
}

/// A sink that only counts bytes.
#[derive(Clone, Copy, Debug, Default)]
pub struct CountingWriter {
    pub bytes: u64,
}

impl Write for CountingWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.bytes += buf.len() as u64;
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}
