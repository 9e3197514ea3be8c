//! Tag-soup HTML tokenizer and table builder.
//!
//! The tokenizer never fails: anything that does not look like markup is
//! text, unterminated constructs run to end of input, and every slice is cut
//! at an ASCII delimiter so it always lands on a UTF-8 boundary. The table
//! builder only tracks `<table>`, row, and cell structure; all other
//! elements are carried along verbatim inside the raw cell fragments.

use std::collections::BTreeMap;

/// Upper bounds taken from the HTML table model.
const MAX_COLSPAN: usize = 1000;
const MAX_ROWSPAN: usize = 65534;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Token<'a> {
    Start {
        name: String,
        attrs: Vec<(String, String)>,
        self_closing: bool,
        start: usize,
        end: usize,
    },
    End {
        name: String,
        start: usize,
    },
    Text(&'a str),
}

pub(crate) struct Tokenizer<'a> {
    src: &'a str,
    pos: usize,
    raw_text: Option<&'static str>,
}

impl<'a> Tokenizer<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Self {
            src,
            pos: 0,
            raw_text: None,
        }
    }

    fn bytes(&self) -> &'a [u8] {
        self.src.as_bytes()
    }

    /// Position of the first byte at or after `from` matching `pred`, or the
    /// end of input.
    fn seek(&self, from: usize, pred: impl Fn(u8) -> bool) -> usize {
        self.bytes()[from.min(self.src.len())..]
            .iter()
            .position(|&b| pred(b))
            .map_or(self.src.len(), |p| from + p)
    }

    fn find_str(&self, from: usize, needle: &str) -> Option<usize> {
        self.src.get(from..)?.find(needle).map(|p| from + p)
    }

    /// Finds `</name` case-insensitively, returning its offset.
    fn find_close_tag(&self, from: usize, name: &str) -> Option<usize> {
        let bytes = self.bytes();
        let mut at = from;
        while let Some(lt) = self.find_str(at, "</") {
            let tail = &bytes[lt + 2..];
            if tail.len() >= name.len() && tail[..name.len()].eq_ignore_ascii_case(name.as_bytes())
            {
                return Some(lt);
            }
            at = lt + 2;
        }
        None
    }

    fn skip_past(&mut self, from: usize, needle: &str) {
        self.pos = self
            .find_str(from, needle)
            .map_or(self.src.len(), |p| p + needle.len());
    }

    fn start_tag(&mut self, lt: usize) -> Option<Token<'a>> {
        let bytes = self.bytes();
        let name_end = self.seek(lt + 1, |b| b.is_ascii_whitespace() || b == b'/' || b == b'>');
        let name = self.src[lt + 1..name_end].to_ascii_lowercase();
        let mut attrs = Vec::new();
        let mut i = name_end;
        let mut self_closing = false;
        loop {
            i = self.seek(i, |b| !b.is_ascii_whitespace());
            match bytes.get(i) {
                // EOF inside a tag drops the tag.
                None => {
                    self.pos = self.src.len();
                    return None;
                }
                Some(b'>') => {
                    i += 1;
                    break;
                }
                Some(b'/') => {
                    self_closing = bytes.get(i + 1) == Some(&b'>');
                    i += 1;
                    continue;
                }
                Some(_) => {}
            }
            let attr_end = self.seek(i + 1, |b| {
                b.is_ascii_whitespace() || b == b'/' || b == b'>' || b == b'='
            });
            let attr_name = self.src[i..attr_end].to_ascii_lowercase();
            i = self.seek(attr_end, |b| !b.is_ascii_whitespace());
            let mut value = String::new();
            if bytes.get(i) == Some(&b'=') {
                i = self.seek(i + 1, |b| !b.is_ascii_whitespace());
                match bytes.get(i) {
                    Some(&q) if q == b'"' || q == b'\'' => {
                        let close = self.seek(i + 1, |b| b == q);
                        if close >= self.src.len() {
                            self.pos = self.src.len();
                            return None;
                        }
                        value = self.src[i + 1..close].to_string();
                        i = close + 1;
                    }
                    Some(_) => {
                        let end = self.seek(i, |b| b.is_ascii_whitespace() || b == b'>');
                        value = self.src[i..end].to_string();
                        i = end;
                    }
                    None => {}
                }
            }
            attrs.push((attr_name, value));
        }
        self.pos = i;
        if matches!(name.as_str(), "script" | "style" | "textarea" | "title") && !self_closing {
            self.raw_text = Some(match name.as_str() {
                "script" => "script",
                "style" => "style",
                "textarea" => "textarea",
                _ => "title",
            });
        }
        Some(Token::Start {
            name,
            attrs,
            self_closing,
            start: lt,
            end: i,
        })
    }

    fn end_tag(&mut self, lt: usize) -> Option<Token<'a>> {
        let name_end = self.seek(lt + 2, |b| b.is_ascii_whitespace() || b == b'/' || b == b'>');
        let name = self.src[lt + 2..name_end].to_ascii_lowercase();
        let gt = self.seek(name_end, |b| b == b'>');
        if gt >= self.src.len() {
            self.pos = self.src.len();
            return None;
        }
        self.pos = gt + 1;
        Some(Token::End { name, start: lt })
    }
}

impl<'a> Iterator for Tokenizer<'a> {
    type Item = Token<'a>;

    fn next(&mut self) -> Option<Token<'a>> {
        loop {
            let len = self.src.len();
            if self.pos >= len {
                return None;
            }
            if let Some(name) = self.raw_text.take() {
                let close = self.find_close_tag(self.pos, name).unwrap_or(len);
                let text = &self.src[self.pos..close];
                self.pos = close;
                // Script and style bodies are never visible text.
                if matches!(name, "textarea" | "title") && !text.is_empty() {
                    return Some(Token::Text(text));
                }
                continue;
            }
            let bytes = self.bytes();
            let at = self.pos;
            if bytes[at] != b'<' {
                let end = self.seek(at, |b| b == b'<');
                self.pos = end;
                return Some(Token::Text(&self.src[at..end]));
            }
            match bytes.get(at + 1) {
                Some(b'!') => {
                    if self.src[at..].starts_with("<!--") {
                        self.skip_past(at + 4, "-->");
                    } else {
                        self.skip_past(at + 2, ">");
                    }
                }
                Some(b'?') => self.skip_past(at + 2, ">"),
                Some(b'/') => match bytes.get(at + 2) {
                    Some(b) if b.is_ascii_alphabetic() => {
                        if let Some(tok) = self.end_tag(at) {
                            return Some(tok);
                        }
                    }
                    Some(b'>') => self.pos = at + 3,
                    _ => self.skip_past(at + 2, ">"),
                },
                Some(b) if b.is_ascii_alphabetic() => {
                    if let Some(tok) = self.start_tag(at) {
                        return Some(tok);
                    }
                }
                _ => {
                    // A lone '<' is text.
                    let end = self.seek(at + 1, |b| b == b'<');
                    self.pos = end;
                    return Some(Token::Text(&self.src[at..end]));
                }
            }
        }
    }
}

/// One cell as written in the document, before cleaning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCell {
    /// Inner HTML of the cell, markup preserved.
    pub html: String,
    /// Whether the cell was a `<th>`.
    pub header: bool,
}

/// A table as written in the document, with spans expanded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ParsedTable {
    pub rows: Vec<Vec<RawCell>>,
    pub is_recursive: bool,
}

struct SpannedCell {
    cell: RawCell,
    colspan: usize,
    rowspan: usize,
}

struct OpenCell {
    content_start: usize,
    header: bool,
    colspan: usize,
    rowspan: usize,
}

struct OpenTable {
    order: usize,
    rows: Vec<Vec<SpannedCell>>,
    row_open: bool,
    cell: Option<OpenCell>,
    is_recursive: bool,
}

impl OpenTable {
    fn close_cell(&mut self, src: &str, at: usize) {
        if let Some(open) = self.cell.take() {
            let html = src[open.content_start..at.max(open.content_start)].to_string();
            if !self.row_open {
                self.rows.push(Vec::new());
                self.row_open = true;
            }
            if let Some(row) = self.rows.last_mut() {
                row.push(SpannedCell {
                    cell: RawCell {
                        html,
                        header: open.header,
                    },
                    colspan: open.colspan,
                    rowspan: open.rowspan,
                });
            }
        }
    }

    fn close_row(&mut self, src: &str, at: usize) {
        self.close_cell(src, at);
        self.row_open = false;
    }

    fn finish(mut self, src: &str, at: usize) -> (usize, ParsedTable) {
        self.close_row(src, at);
        let rows = expand_spans(self.rows);
        (
            self.order,
            ParsedTable {
                rows,
                is_recursive: self.is_recursive,
            },
        )
    }
}

fn span_attr(attrs: &[(String, String)], name: &str) -> Option<usize> {
    attrs
        .iter()
        .find(|(k, _)| k == name)
        .and_then(|(_, v)| {
            let digits: String = v.trim().chars().take_while(char::is_ascii_digit).collect();
            digits.parse::<usize>().ok()
        })
}

/// Duplicates spanned cells into every grid slot they cover. Rows are not
/// padded: a span only lands in a later row if that row reaches its column.
fn expand_spans(rows: Vec<Vec<SpannedCell>>) -> Vec<Vec<RawCell>> {
    let mut carried: BTreeMap<usize, (usize, RawCell)> = BTreeMap::new();
    let mut out_rows = Vec::with_capacity(rows.len());
    for row in rows {
        let mut active = std::mem::take(&mut carried);
        let mut out: Vec<RawCell> = Vec::new();
        let place = |out: &mut Vec<RawCell>,
                     active: &mut BTreeMap<usize, (usize, RawCell)>,
                     carried: &mut BTreeMap<usize, (usize, RawCell)>| {
            while let Some((left, cell)) = active.remove(&out.len()) {
                if left > 1 {
                    carried.insert(out.len(), (left - 1, cell.clone()));
                }
                out.push(cell);
            }
        };
        for spanned in row {
            place(&mut out, &mut active, &mut carried);
            for _ in 0..spanned.colspan {
                if spanned.rowspan > 1 {
                    carried.insert(out.len(), (spanned.rowspan - 1, spanned.cell.clone()));
                }
                out.push(spanned.cell.clone());
            }
        }
        place(&mut out, &mut active, &mut carried);
        // Spans past the end of a short row are consumed without padding.
        for (col, (left, cell)) in active {
            if left > 1 {
                carried.insert(col, (left - 1, cell));
            }
        }
        if !out.is_empty() {
            out_rows.push(out);
        }
    }
    out_rows
}

/// Extracts every `<table>` element in document order of its start tag.
pub(crate) fn parse_tables(src: &str) -> Vec<ParsedTable> {
    let mut stack: Vec<OpenTable> = Vec::new();
    let mut done: Vec<(usize, ParsedTable)> = Vec::new();
    let mut seen = 0usize;

    for token in Tokenizer::new(src) {
        match token {
            Token::Start {
                name,
                attrs,
                start,
                end,
                ..
            } => match name.as_str() {
                "table" => {
                    for open in &mut stack {
                        open.is_recursive = true;
                    }
                    stack.push(OpenTable {
                        order: seen,
                        rows: Vec::new(),
                        row_open: false,
                        cell: None,
                        is_recursive: false,
                    });
                    seen += 1;
                }
                "tr" | "thead" | "tbody" | "tfoot" => {
                    if let Some(table) = stack.last_mut() {
                        table.close_row(src, start);
                        if name == "tr" {
                            table.rows.push(Vec::new());
                            table.row_open = true;
                        }
                    }
                }
                "td" | "th" => {
                    if let Some(table) = stack.last_mut() {
                        table.close_cell(src, start);
                        if !table.row_open {
                            table.rows.push(Vec::new());
                            table.row_open = true;
                        }
                        let colspan = span_attr(&attrs, "colspan")
                            .unwrap_or(1)
                            .clamp(1, MAX_COLSPAN);
                        let rowspan = match span_attr(&attrs, "rowspan").unwrap_or(1) {
                            0 => MAX_ROWSPAN,
                            n => n.min(MAX_ROWSPAN),
                        };
                        table.cell = Some(OpenCell {
                            content_start: end,
                            header: name == "th",
                            colspan,
                            rowspan,
                        });
                    }
                }
                _ => {}
            },
            Token::End { name, start } => match name.as_str() {
                "table" => {
                    if let Some(table) = stack.pop() {
                        done.push(table.finish(src, start));
                    }
                }
                "tr" | "thead" | "tbody" | "tfoot" => {
                    if let Some(table) = stack.last_mut() {
                        table.close_row(src, start);
                    }
                }
                "td" | "th" => {
                    if let Some(table) = stack.last_mut() {
                        table.close_cell(src, start);
                    }
                }
                _ => {}
            },
            Token::Text(_) => {}
        }
    }
    while let Some(table) = stack.pop() {
        done.push(table.finish(src, src.len()));
    }
    done.sort_by_key(|(order, _)| *order);
    done.into_iter()
        .map(|(_, t)| t)
        .filter(|t| !t.rows.is_empty())
        .collect()
}
