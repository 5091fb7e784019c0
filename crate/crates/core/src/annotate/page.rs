//! Annotated HTML pages. Each annotation is embedded as one JSON-LD script
//! block followed by the visible element it describes, so a page conforms by
//! construction.

use std::io::Write;

use crate::catalog::{ProductCatalog, RangeSummary};
use crate::error::{Error, Result};
use crate::heuristics::PriceInfo;

use super::Annotation;

pub const SCRIPT_OPEN: &str = "<script type=\"application/ld+json\">";
pub const SCRIPT_CLOSE: &str = "</script>\n";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PageMode {
    #[default]
    Bulk,
    Paginated {
        page: u64,
        per_page: u64,
    },
}

/// Byte accounting of a rendered page.
///
/// `page_bytes == shell_bytes + payload_bytes + annotation_count * wrapper + element_bytes`
/// where `wrapper` is the script open/close overhead.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PageStats {
    pub annotation_count: u64,
    pub payload_bytes: u64,
    pub element_bytes: u64,
    pub shell_bytes: u64,
    pub page_bytes: u64,
}

impl PageStats {
    pub const WRAPPER_BYTES: u64 = (SCRIPT_OPEN.len() + SCRIPT_CLOSE.len()) as u64;
}

/// The window `[start, start + len)` a mode selects out of `total` items.
pub fn page_window(total: u64, mode: PageMode) -> Result<(u64, u64)> {
    match mode {
        PageMode::Bulk => Ok((0, total)),
        PageMode::Paginated { page, per_page } => {
            if per_page == 0 {
                return Err(Error::Validation("per_page must be at least 1".into()));
            }
            // An empty list still has a (blank) first page.
            let pages = total.div_ceil(per_page).max(1);
            if page == 0 || page > pages {
                return Err(Error::PageNotFound { page, pages });
            }
            let start = (page - 1) * per_page;
            Ok((start, per_page.min(total - start)))
        }
    }
}

pub(crate) fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// The visible counterpart of an annotation.
pub fn offer_element(annotation: &Annotation, catalog: &ProductCatalog) -> String {
    let item = annotation.item();
    let mut out = String::with_capacity(256);
    out.push_str("<section class=\"offer\" id=\"");
    out.push_str(annotation.dom_anchor_id());
    out.push_str("\"><h2>");
    out.push_str(&escape_html(&catalog.product().name));
    out.push_str("</h2><dl>");
    for (name, value) in item.fixed(catalog) {
        out.push_str(&format!(
            "<dt>{}</dt><dd>{}</dd>",
            escape_html(name),
            escape_html(value)
        ));
    }
    for (name, range) in item.ranges(catalog) {
        let shown = match range {
            RangeSummary::Values(values) => values.join(", "),
            RangeSummary::Span { min, max, .. } => format!("{min} to {max}"),
        };
        out.push_str(&format!(
            "<dt>{}</dt><dd>{}</dd>",
            escape_html(name),
            escape_html(&shown)
        ));
    }
    out.push_str("</dl><p class=\"price\">");
    let currency = escape_html(catalog.currency());
    match item.price() {
        PriceInfo::Exact(p) => out.push_str(&format!("{p} {currency}")),
        PriceInfo::Range { min, max } if min == max => out.push_str(&format!("{min} {currency}")),
        PriceInfo::Range { min, max } => out.push_str(&format!("{min} to {max} {currency}")),
    }
    out.push_str("</p><p class=\"availability\">");
    out.push_str(if item.available() { "available" } else { "sold out" });
    out.push_str("</p></section>\n");
    out
}

/// Navigation block of a paginated page.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PageNav {
    pub page: u64,
    pub per_page: u64,
    pub total: u64,
}

impl PageNav {
    fn render(&self) -> String {
        let pages = self.total.div_ceil(self.per_page).max(1);
        let mut out = format!("<nav class=\"pagination\"><span>page {} of {pages}</span>", self.page);
        if self.page > 1 {
            out.push_str(&format!(
                " <a rel=\"prev\" href=\"?page={}&amp;per_page={}\">previous</a>",
                self.page - 1,
                self.per_page
            ));
        }
        if self.page < pages {
            out.push_str(&format!(
                " <a rel=\"next\" href=\"?page={}&amp;per_page={}\">next</a>",
                self.page + 1,
                self.per_page
            ));
        }
        out.push_str("</nav>\n");
        out
    }
}

/// Streams an annotated page into `W`, counting bytes as it goes.
pub struct PageWriter<'c, W: Write> {
    out: W,
    catalog: &'c ProductCatalog,
    stats: PageStats,
}

impl<'c, W: Write> PageWriter<'c, W> {
    pub fn begin(mut out: W, catalog: &'c ProductCatalog, title: &str) -> Result<Self> {
        let product = catalog.product();
        let head = format!(
            "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n</head>\n<body>\n<main>\n<h1>{}</h1>\n<p class=\"description\">{}</p>\n",
            escape_html(title),
            escape_html(&product.name),
            escape_html(&product.description),
        );
        out.write_all(head.as_bytes())?;
        let stats = PageStats {
            shell_bytes: head.len() as u64,
            page_bytes: head.len() as u64,
            ..PageStats::default()
        };
        Ok(PageWriter { out, catalog, stats })
    }

    pub fn push(&mut self, annotation: &Annotation) -> Result<()> {
        let element = offer_element(annotation, self.catalog);
        self.out.write_all(SCRIPT_OPEN.as_bytes())?;
        self.out.write_all(annotation.jsonld().as_bytes())?;
        self.out.write_all(SCRIPT_CLOSE.as_bytes())?;
        self.out.write_all(element.as_bytes())?;
        let size = annotation.byte_size() as u64;
        self.stats.annotation_count += 1;
        self.stats.payload_bytes += size;
        self.stats.element_bytes += element.len() as u64;
        self.stats.page_bytes += size + PageStats::WRAPPER_BYTES + element.len() as u64;
        Ok(())
    }

    pub fn stats(&self) -> PageStats {
        self.stats
    }

    pub fn finish(mut self, nav: Option<PageNav>) -> Result<(W, PageStats)> {
        let mut tail = nav.map(|n| n.render()).unwrap_or_default();
        tail.push_str("</main>\n</body>\n</html>\n");
        self.out.write_all(tail.as_bytes())?;
        self.out.flush()?;
        self.stats.shell_bytes += tail.len() as u64;
        self.stats.page_bytes += tail.len() as u64;
        Ok((self.out, self.stats))
    }
}

/// Renders a whole page in memory. Paginated mode embeds only the current
/// page's annotations.
pub fn render_page(
    annotations: &[Annotation],
    catalog: &ProductCatalog,
    title: &str,
    mode: PageMode,
) -> Result<(Vec<u8>, PageStats)> {
    let (start, len) = page_window(annotations.len() as u64, mode)?;
    let mut w = PageWriter::begin(Vec::new(), catalog, title)?;
    for a in &annotations[start as usize..(start + len) as usize] {
        w.push(a)?;
    }
    let nav = match mode {
        PageMode::Bulk => None,
        PageMode::Paginated { page, per_page } => Some(PageNav {
            page,
            per_page,
            total: annotations.len() as u64,
        }),
    };
    w.finish(nav)
}
