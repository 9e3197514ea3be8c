//! Cell text cleaning.

use super::parser::{Token, Tokenizer};

/// Elements whose boundaries separate words when rendered.
fn breaks_text(name: &str) -> bool {
    matches!(
        name,
        "br" | "p"
            | "div"
            | "li"
            | "ul"
            | "ol"
            | "dd"
            | "dt"
            | "dl"
            | "tr"
            | "td"
            | "th"
            | "table"
            | "caption"
            | "hr"
            | "h1"
            | "h2"
            | "h3"
            | "h4"
            | "h5"
            | "h6"
            | "img"
    )
}

/// Outcome of cleaning one raw cell, distinguishing link-only cells from
/// cells with no visible text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellText {
    Text(String),
    LinkOnly,
    Empty,
}

impl CellText {
    pub fn into_text(self) -> Option<String> {
        match self {
            CellText::Text(s) => Some(s),
            _ => None,
        }
    }
}

/// Cleans a raw cell fragment and reports whether its visible text came only
/// from anchor content.
pub fn classify_cell(raw: &str) -> CellText {
    let mut out = String::with_capacity(raw.len());
    let mut anchor_depth = 0usize;
    let mut plain = false;
    let mut linked = false;

    for token in Tokenizer::new(raw) {
        match token {
            Token::Start {
                name, self_closing, ..
            } => {
                if name == "a" && !self_closing {
                    anchor_depth += 1;
                } else if breaks_text(&name) {
                    out.push(' ');
                }
            }
            Token::End { name, .. } => {
                if name == "a" {
                    anchor_depth = anchor_depth.saturating_sub(1);
                } else if breaks_text(&name) {
                    out.push(' ');
                }
            }
            Token::Text(text) => {
                let decoded = html_escape::decode_html_entities(text);
                let visible: String = decoded
                    .chars()
                    .map(|c| {
                        if c == '<' || c == '>' || c.is_control() {
                            ' '
                        } else {
                            c
                        }
                    })
                    .collect();
                if visible.chars().any(|c| !c.is_whitespace()) {
                    if anchor_depth > 0 {
                        linked = true;
                    } else {
                        plain = true;
                    }
                }
                out.push_str(&visible);
            }
        }
    }

    let text = out.split_whitespace().collect::<Vec<_>>().join(" ");
    if text.is_empty() {
        CellText::Empty
    } else if linked && !plain {
        CellText::LinkOnly
    } else {
        CellText::Text(text)
    }
}

/// Strips markup from a raw cell, collapsing whitespace. Returns `None` for
/// empty cells and for cells whose only visible text is link text.
pub fn clean_cell(raw: &str) -> Option<String> {
    classify_cell(raw).into_text()
}
