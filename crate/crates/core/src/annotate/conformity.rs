//! Content conformity: every embedded annotation must describe a visible
//! offer element on the same page, and every visible offer element must be
//! described by an annotation.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Serialize;
use serde_json::Value;

use super::html::{Event, Scanner};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Orphan {
    /// A JSON-LD block whose anchor has no visible element; `anchor` is
    /// absent when the block did not parse or carries no `@id`.
    Annotation { anchor: Option<String> },
    /// A visible offer element no annotation points to.
    Element { id: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConformityReport {
    pub conforms: bool,
    pub annotation_count: usize,
    pub element_count: usize,
    pub orphans: Vec<Orphan>,
}

fn anchor_of(body: &[u8]) -> Option<String> {
    let doc: Value = serde_json::from_slice(body).ok()?;
    doc.get("@id")?.as_str()?.strip_prefix('#').map(str::to_string)
}

/// Matches annotation anchors against visible `.offer` elements as multisets.
pub fn conformity_check<R: BufRead>(page: R) -> Result<ConformityReport> {
    // anchor -> (annotations, visible elements)
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut report = ConformityReport::default();
    let mut unanchored = 0usize;
    for event in Scanner::new(page) {
        match event? {
            Event::Script(tag, body) if tag.is_json_ld() => {
                report.annotation_count += 1;
                match anchor_of(&body) {
                    Some(anchor) => counts.entry(anchor).or_default().0 += 1,
                    None => unanchored += 1,
                }
            }
            Event::Start(tag) if tag.has_class("offer") && !tag.is_hidden() => {
                if let Some(id) = tag.attr("id") {
                    report.element_count += 1;
                    counts.entry(id.to_string()).or_default().1 += 1;
                }
            }
            _ => {}
        }
    }
    report
        .orphans
        .extend(std::iter::repeat_n(Orphan::Annotation { anchor: None }, unanchored));
    for (anchor, (annotations, elements)) in counts {
        for _ in elements..annotations {
            report.orphans.push(Orphan::Annotation {
                anchor: Some(anchor.clone()),
            });
        }
        for _ in annotations..elements {
            report.orphans.push(Orphan::Element { id: anchor.clone() });
        }
    }
    report.conforms = report.orphans.is_empty();
    Ok(report)
}
