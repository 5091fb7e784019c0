//! The subset of RFC 6570 used for action targets: simple string expansion
//! `{var}` plus level-3 form-style query expansion `{?a,b}` and continuation
//! `{&a,b}`. Undefined variables are omitted.

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use crate::error::{Error, Result};

/// Everything except RFC 3986 unreserved characters is percent-encoded.
const UNRESERVED: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

pub fn encode_component(value: &str) -> String {
    utf8_percent_encode(value, UNRESERVED).to_string()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Operator {
    Simple,
    Query,
    Continuation,
}

#[derive(Debug, PartialEq, Eq)]
enum Part<'a> {
    Literal(&'a str),
    Expression(Operator, Vec<&'a str>),
}

fn parse(template: &str) -> Result<Vec<Part<'_>>> {
    let bad = |msg: &str| Error::Validation(format!("URI template {template:?}: {msg}"));
    let mut parts = Vec::new();
    let mut rest = template;
    while !rest.is_empty() {
        match rest.find('{') {
            Some(0) => {
                let end = rest.find('}').ok_or_else(|| bad("unclosed expression"))?;
                let body = &rest[1..end];
                let (op, vars) = match body.as_bytes().first() {
                    Some(b'?') => (Operator::Query, &body[1..]),
                    Some(b'&') => (Operator::Continuation, &body[1..]),
                    Some(b'+' | b'#' | b'.' | b'/' | b';' | b'=' | b',' | b'!' | b'@' | b'|') => {
                        return Err(bad("unsupported operator"))
                    }
                    _ => (Operator::Simple, body),
                };
                let names: Vec<&str> = vars.split(',').collect();
                for n in &names {
                    if n.is_empty() || !n.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
                        return Err(bad("invalid variable name"));
                    }
                }
                parts.push(Part::Expression(op, names));
                rest = &rest[end + 1..];
            }
            Some(i) => {
                parts.push(Part::Literal(&rest[..i]));
                rest = &rest[i..];
            }
            None => {
                if rest.contains('}') {
                    return Err(bad("stray '}'"));
                }
                parts.push(Part::Literal(rest));
                rest = "";
            }
        }
    }
    Ok(parts)
}

/// Variable names in order of appearance.
pub fn variables(template: &str) -> Result<Vec<String>> {
    Ok(parse(template)?
        .into_iter()
        .filter_map(|p| match p {
            Part::Expression(_, names) => Some(names),
            Part::Literal(_) => None,
        })
        .flatten()
        .map(str::to_string)
        .collect())
}

pub fn expand<F>(template: &str, lookup: F) -> Result<String>
where
    F: Fn(&str) -> Option<String>,
{
    let mut out = String::with_capacity(template.len() + 32);
    for part in parse(template)? {
        match part {
            Part::Literal(s) => out.push_str(s),
            Part::Expression(Operator::Simple, names) => {
                let values: Vec<String> = names
                    .iter()
                    .filter_map(|n| lookup(n))
                    .map(|v| encode_component(&v))
                    .collect();
                out.push_str(&values.join(","));
            }
            Part::Expression(op, names) => {
                let mut first = op == Operator::Query;
                for n in names {
                    if let Some(v) = lookup(n) {
                        out.push(if first { '?' } else { '&' });
                        first = false;
                        out.push_str(n);
                        out.push('=');
                        out.push_str(&encode_component(&v));
                    }
                }
            }
        }
    }
    Ok(out)
}
