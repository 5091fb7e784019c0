//! A streaming tag scanner. Pages of full materializations reach hundreds of
//! megabytes, so nothing here builds a document tree: the scanner yields start
//! tags and script bodies and forgets everything else.

use std::io::{self, BufRead};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tag {
    /// Lowercased element name.
    pub name: String,
    /// Attributes with lowercased names and entity-decoded values.
    pub attrs: Vec<(String, String)>,
}

impl Tag {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.attr("class")
            .is_some_and(|c| c.split_ascii_whitespace().any(|x| x == class))
    }

    /// True when the element itself is hidden from rendering.
    pub fn is_hidden(&self) -> bool {
        if self.attr("hidden").is_some() {
            return true;
        }
        self.attr("style").is_some_and(|style| {
            let compact: String = style
                .chars()
                .filter(|c| !c.is_whitespace())
                .collect::<String>()
                .to_ascii_lowercase();
            compact
                .split(';')
                .any(|decl| decl == "display:none" || decl == "visibility:hidden")
        })
    }

    pub fn is_json_ld(&self) -> bool {
        self.name == "script"
            && self
                .attr("type")
                .is_some_and(|t| t.trim().eq_ignore_ascii_case("application/ld+json"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Start(Tag),
    /// A script element with its raw body.
    Script(Tag, Vec<u8>),
}

pub struct Scanner<R> {
    reader: R,
    scratch: Vec<u8>,
    failed: bool,
}

impl<R: BufRead> Scanner<R> {
    pub fn new(reader: R) -> Self {
        Scanner {
            reader,
            scratch: Vec::new(),
            failed: false,
        }
    }

    fn byte(&mut self) -> io::Result<Option<u8>> {
        let buf = self.reader.fill_buf()?;
        let Some(&b) = buf.first() else {
            return Ok(None);
        };
        self.reader.consume(1);
        Ok(Some(b))
    }

    /// Reads through the next `<`; false at end of input.
    fn skip_to_lt(&mut self) -> io::Result<bool> {
        loop {
            let (found, used) = {
                let buf = self.reader.fill_buf()?;
                if buf.is_empty() {
                    return Ok(false);
                }
                match buf.iter().position(|&b| b == b'<') {
                    Some(i) => (true, i + 1),
                    None => (false, buf.len()),
                }
            };
            self.reader.consume(used);
            if found {
                return Ok(true);
            }
        }
    }

    /// Reads through `terminator`, appending the bytes before it to `out`.
    fn read_through(&mut self, terminator: &[u8], out: &mut Vec<u8>) -> io::Result<bool> {
        let start = out.len();
        loop {
            let last = *terminator.last().expect("non-empty terminator");
            if self.reader.read_until(last, out)? == 0 {
                return Ok(false);
            }
            if out.len() - start >= terminator.len() && out.ends_with(terminator) {
                out.truncate(out.len() - terminator.len());
                return Ok(true);
            }
        }
    }

    /// Reads the rest of a tag after its first byte, honouring quoted values.
    fn read_tag(&mut self, first: u8) -> io::Result<Vec<u8>> {
        let mut text = vec![first];
        if first == b'>' {
            text.clear();
            return Ok(text);
        }
        let mut quote: Option<u8> = None;
        loop {
            let Some(b) = self.byte()? else {
                return Ok(text);
            };
            match (quote, b) {
                (None, b'>') => return Ok(text),
                (None, b'"' | b'\'') => quote = Some(b),
                (Some(q), _) if q == b => quote = None,
                _ => {}
            }
            text.push(b);
        }
    }

    /// Reads a raw-text body up to its case-insensitive end tag.
    fn read_raw_text(&mut self, name: &str) -> io::Result<Vec<u8>> {
        let mut body = Vec::new();
        let close: Vec<u8> = format!("/{name}").into_bytes();
        loop {
            if self.reader.read_until(b'<', &mut body)? == 0 {
                return Ok(body);
            }
            if body.last() != Some(&b'<') {
                return Ok(body);
            }
            let mut probe = Vec::with_capacity(close.len() + 1);
            let mut matched = true;
            for &want in &close {
                match self.byte()? {
                    Some(b) => {
                        probe.push(b);
                        if !b.eq_ignore_ascii_case(&want) {
                            matched = false;
                            break;
                        }
                    }
                    None => {
                        matched = false;
                        break;
                    }
                }
            }
            if matched {
                match self.byte()? {
                    Some(b'>') => {
                        body.pop();
                        return Ok(body);
                    }
                    Some(b) if b.is_ascii_whitespace() || b == b'/' => {
                        body.pop();
                        let mut rest = Vec::new();
                        self.read_through(b">", &mut rest)?;
                        return Ok(body);
                    }
                    Some(b) => probe.push(b),
                    None => {}
                }
            }
            body.extend_from_slice(&probe);
        }
    }

    fn next_event(&mut self) -> io::Result<Option<Event>> {
        loop {
            if !self.skip_to_lt()? {
                return Ok(None);
            }
            let Some(first) = self.byte()? else {
                return Ok(None);
            };
            match first {
                b'!' => {
                    let mut head = Vec::new();
                    for _ in 0..2 {
                        if let Some(b) = self.byte()? {
                            head.push(b);
                        }
                    }
                    self.scratch.clear();
                    let mut scratch = std::mem::take(&mut self.scratch);
                    if head == b"--" {
                        self.read_through(b"-->", &mut scratch)?;
                    } else if !head.contains(&b'>') {
                        self.read_through(b">", &mut scratch)?;
                    }
                    self.scratch = scratch;
                }
                b'/' | b'?' => {
                    self.read_tag(first)?;
                }
                b if b.is_ascii_alphabetic() => {
                    let text = self.read_tag(b)?;
                    let tag = parse_tag(&text);
                    match tag.name.as_str() {
                        "script" => {
                            let body = if text.ends_with(b"/") {
                                Vec::new()
                            } else {
                                self.read_raw_text("script")?
                            };
                            return Ok(Some(Event::Script(tag, body)));
                        }
                        "style" | "textarea" | "title" => {
                            let name = tag.name.clone();
                            self.read_raw_text(&name)?;
                            return Ok(Some(Event::Start(tag)));
                        }
                        _ => return Ok(Some(Event::Start(tag))),
                    }
                }
                // A bare `<` in text.
                _ => {}
            }
        }
    }
}

impl<R: BufRead> Iterator for Scanner<R> {
    type Item = io::Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_event() {
            Ok(e) => e.map(Ok),
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Bodies of every JSON-LD script block, in document order.
pub fn json_ld_blocks<R: BufRead>(reader: R) -> impl Iterator<Item = io::Result<Vec<u8>>> {
    Scanner::new(reader).filter_map(|e| match e {
        Ok(Event::Script(tag, body)) if tag.is_json_ld() => Some(Ok(body)),
        Ok(_) => None,
        Err(e) => Some(Err(e)),
    })
}

fn decode_entities(raw: &str) -> String {
    if !raw.contains('&') {
        return raw.to_string();
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        let Some(end) = rest.find(';').filter(|&e| e <= 10) else {
            out.push('&');
            rest = &rest[1..];
            continue;
        };
        let entity = &rest[1..end];
        let decoded = match entity {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            _ => entity
                .strip_prefix("#x")
                .or_else(|| entity.strip_prefix("#X"))
                .and_then(|h| u32::from_str_radix(h, 16).ok())
                .or_else(|| entity.strip_prefix('#').and_then(|d| d.parse().ok()))
                .and_then(char::from_u32),
        };
        match decoded {
            Some(c) => {
                out.push(c);
                rest = &rest[end + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn parse_tag(text: &[u8]) -> Tag {
    let text = String::from_utf8_lossy(text);
    let s = text.trim_end_matches('/');
    let name_end = s.find(|c: char| c.is_ascii_whitespace() || c == '/').unwrap_or(s.len());
    let name = s[..name_end].to_ascii_lowercase();
    let mut attrs = Vec::new();
    let bytes = s.as_bytes();
    let mut i = name_end;
    while i < bytes.len() {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'/') {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'=' && bytes[i] != b'/' {
            i += 1;
        }
        if start == i {
            break;
        }
        let attr_name = s[start..i].to_ascii_lowercase();
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < bytes.len() && bytes[i] == b'=' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') {
                let q = bytes[i];
                let vstart = i + 1;
                i = vstart;
                while i < bytes.len() && bytes[i] != q {
                    i += 1;
                }
                value = decode_entities(&s[vstart..i]);
                i = (i + 1).min(bytes.len());
            } else {
                let vstart = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                value = decode_entities(&s[vstart..i]);
            }
        }
        attrs.push((attr_name, value));
    }
    Tag { name, attrs }
}
