//! Lenient decoding of near-JSON text, counting the single-character
//! repairs needed to make it parse.
//!
//! Repairs are applied in a fixed order so the count is reproducible:
//!
//! 1. code-fence lines (```` ``` ````, ```` ```json ````) are dropped, one repair each;
//! 2. the remaining errors are fixed one edit at a time. At each stop the
//!    strict checker reports the failure point and the candidate edits are
//!    tried in class order (trailing commas, colons, quotes, other commas,
//!    then brackets and braces).
//!    The first edit that makes the whole document valid wins; failing that,
//!    every single-character insert or delete of a structural character at a
//!    token boundary shortly before the failure point is tried; failing that,
//!    the edit that moves the failure point furthest forward is kept.

use serde::Serialize;
use serde_json::Value;

use crate::syntax::{check, Container, Expect, SyntaxError, TokenKind};

pub const DEFAULT_REPAIR_BUDGET: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeReport {
    /// Number of repairs applied (the JSON decode error count).
    pub error_count: usize,
    pub repaired: bool,
    pub document: Option<Value>,
    /// The repaired text, when decoding succeeded after repairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repaired_text: Option<String>,
}

impl DecodeReport {
    fn clean(doc: Value) -> Self {
        DecodeReport {
            error_count: 0,
            repaired: false,
            document: Some(doc),
            repaired_text: None,
        }
    }

    fn exhausted(budget: usize) -> Self {
        DecodeReport {
            error_count: budget,
            repaired: false,
            document: None,
            repaired_text: None,
        }
    }
}

pub fn lenient_decode(raw: &str) -> DecodeReport {
    lenient_decode_with_budget(raw, DEFAULT_REPAIR_BUDGET)
}

pub fn lenient_decode_with_budget(raw: &str, budget: usize) -> DecodeReport {
    if let Ok(doc) = serde_json::from_str::<Value>(raw) {
        return DecodeReport::clean(doc);
    }
    let mut count = 0usize;
    let mut text = strip_fences(raw, &mut count);
    loop {
        if count > budget {
            return DecodeReport::exhausted(budget);
        }
        match check(&text) {
            Ok(()) => {
                return match serde_json::from_str::<Value>(&text) {
                    Ok(doc) if count > 0 => DecodeReport {
                        error_count: count,
                        repaired: true,
                        document: Some(doc),
                        repaired_text: Some(text),
                    },
                    // the checker and serde disagree (e.g. a lone surrogate
                    // escape); no character repair can help
                    _ => DecodeReport::exhausted(budget),
                };
            }
            Err(err) => {
                if count == budget {
                    return DecodeReport::exhausted(budget);
                }
                let edit = choose_edit(&text, &err);
                edit.apply(&mut text);
                count += 1;
            }
        }
    }
}

fn strip_fences(raw: &str, count: &mut usize) -> String {
    let mut out = String::with_capacity(raw.len());
    for line in raw.split_inclusive('\n') {
        if line.trim_start().starts_with("```") {
            *count += 1;
        } else {
            out.push_str(line);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edit {
    Insert(usize, u8),
    Delete(usize),
}

impl Edit {
    fn apply(self, text: &mut String) {
        match self {
            Edit::Insert(at, c) => text.insert(at, c as char),
            Edit::Delete(at) => {
                text.remove(at);
            }
        }
    }

    fn applied(self, text: &str) -> String {
        let mut s = String::with_capacity(text.len() + 1);
        match self {
            Edit::Insert(at, c) => {
                s.push_str(&text[..at]);
                s.push(c as char);
                s.push_str(&text[at..]);
            }
            Edit::Delete(at) => {
                s.push_str(&text[..at]);
                s.push_str(&text[at + 1..]);
            }
        }
        s
    }

    /// Map an offset in the edited text back to the original text.
    fn unshift(self, offset: usize) -> usize {
        match self {
            Edit::Insert(at, _) if offset > at => offset - 1,
            Edit::Delete(at) if offset >= at => offset + 1,
            _ => offset,
        }
    }

    fn valid_on(self, text: &str) -> bool {
        match self {
            Edit::Insert(at, _) => at <= text.len() && text.is_char_boundary(at),
            Edit::Delete(at) => {
                at < text.len() && text.is_char_boundary(at) && text.as_bytes()[at].is_ascii()
            }
        }
    }
}

const STRUCTURAL: [u8; 6] = *b"\",}]{[";

fn choose_edit(text: &str, err: &SyntaxError) -> Edit {
    let smart = smart_candidates(text, err);
    // (progress, order) of the best partial fix seen so far
    let mut best: Option<(usize, Edit)> = None;
    let consider = |edit: Edit, best: &mut Option<(usize, Edit)>| -> bool {
        match check(&edit.applied(text)) {
            Ok(()) => true,
            Err(e) => {
                let progress = edit.unshift(e.offset);
                if best.is_none_or(|(p, _)| progress > p) {
                    *best = Some((progress, edit));
                }
                false
            }
        }
    };
    for &edit in &smart {
        if consider(edit, &mut best) {
            return edit;
        }
    }
    for edit in boundary_candidates(text, err.offset) {
        if smart.contains(&edit) {
            continue;
        }
        if consider(edit, &mut best) {
            return edit;
        }
    }
    best.map(|(_, e)| e)
        .unwrap_or(Edit::Insert(err.offset.min(text.len()), b'"'))
}

fn push(out: &mut Vec<Edit>, text: &str, edit: Edit) {
    if edit.valid_on(text) && !out.contains(&edit) {
        out.push(edit);
    }
}

/// Context-driven candidates, in class order: trailing comma, colon,
/// quotes, commas, brackets.
fn smart_candidates(text: &str, err: &SyntaxError) -> Vec<Edit> {
    let b = text.as_bytes();
    let p = err.offset;
    let at_p = b.get(p).copied();
    let mut prev_end = p.min(b.len());
    while prev_end > 0 && b[prev_end - 1].is_ascii_whitespace() {
        prev_end -= 1;
    }
    let mut out = Vec::new();

    // trailing comma before a closer
    if matches!(at_p, Some(b'}' | b']')) && matches!(err.expect, Expect::Key | Expect::Value) {
        if let Some(c) = err.last_comma {
            push(&mut out, text, Edit::Delete(c));
        }
    }

    // missing colon after a key
    if err.expect == Expect::Colon {
        push(&mut out, text, Edit::Insert(prev_end, b':'));
        push(&mut out, text, Edit::Insert(p, b':'));
    }

    // quotes
    if let Some((start, is_key)) = err.open_string {
        let content = &text[start + 1..p.min(text.len())];
        let trimmed = content.trim_end();
        let trimmed_end = start + 1 + trimmed.len();
        if trimmed.ends_with(',') {
            push(&mut out, text, Edit::Insert(trimmed_end - 1, b'"'));
        }
        if is_key {
            if let Some(i) = content.find(':') {
                push(&mut out, text, Edit::Insert(start + 1 + i, b'"'));
            }
        }
        push(&mut out, text, Edit::Insert(trimmed_end, b'"'));
        push(&mut out, text, Edit::Insert(p, b'"'));
    }
    if let Some(tok) = err.last_token {
        match tok.kind {
            TokenKind::String { key } if tok.end <= p => {
                push(&mut out, text, Edit::Delete(tok.end - 1));
                if key && err.expect == Expect::Colon {
                    if let Some(i) = text[tok.start + 1..tok.end - 1].find(':') {
                        push(&mut out, text, Edit::Insert(tok.start + 1 + i, b'"'));
                    }
                }
            }
            TokenKind::Scalar if at_p == Some(b'"') => {
                push(&mut out, text, Edit::Insert(tok.start, b'"'));
            }
            _ => {}
        }
    }
    push(&mut out, text, Edit::Insert(p, b'"'));
    if at_p == Some(b'"') {
        push(&mut out, text, Edit::Delete(p));
    }

    // commas
    push(&mut out, text, Edit::Insert(prev_end, b','));
    push(&mut out, text, Edit::Insert(p, b','));
    if at_p == Some(b',') {
        push(&mut out, text, Edit::Delete(p));
    }
    if let Some(c) = err.last_comma {
        push(&mut out, text, Edit::Delete(c));
    }

    // brackets and braces
    if matches!(at_p, Some(b'{' | b'}' | b'[' | b']')) {
        push(&mut out, text, Edit::Delete(p));
    }
    if let Some(top) = err.stack.last() {
        let closer = top.kind.closer();
        push(&mut out, text, Edit::Insert(prev_end, closer));
        push(&mut out, text, Edit::Insert(p, closer));
        if let Some(c) = err.last_comma.filter(|&c| c > top.open) {
            push(&mut out, text, Edit::Insert(c, closer));
        }
        if let Some(v) = top.last_value_start {
            push(&mut out, text, Edit::Insert(v, b'{'));
            push(&mut out, text, Edit::Insert(v, b'['));
        }
        if top.kind == Container::Array && at_p == Some(b'}') {
            push(&mut out, text, Edit::Insert(prev_end, b']'));
        }
    }
    if let Some(tok) = err.last_token {
        if matches!(tok.kind, TokenKind::String { .. }) {
            push(&mut out, text, Edit::Insert(tok.start, b'{'));
        }
    }
    push(&mut out, text, Edit::Insert(p, b'{'));
    push(&mut out, text, Edit::Insert(p, b'['));
    out
}

fn is_boundary(c: u8) -> bool {
    c.is_ascii_whitespace() || matches!(c, b'{' | b'}' | b'[' | b']' | b',' | b':' | b'"')
}

/// How far before the failure point the exhaustive search looks.
const SEARCH_WINDOW: usize = 512;

/// Every structural insert or delete at a token boundary within
/// [`SEARCH_WINDOW`] bytes before the failure point, up to just past it.
fn boundary_candidates(text: &str, p: usize) -> impl Iterator<Item = Edit> + '_ {
    let b = text.as_bytes();
    let limit = (p + 1).min(b.len());
    (p.saturating_sub(SEARCH_WINDOW)..=limit)
        .filter(move |&q| {
            text.is_char_boundary(q)
                && (q == 0
                    || q == b.len()
                    || is_boundary(b[q - 1])
                    || is_boundary(b[q]))
        })
        .flat_map(move |q| {
            let del = (q < b.len() && STRUCTURAL.contains(&b[q])).then_some(Edit::Delete(q));
            STRUCTURAL
                .iter()
                .map(move |&c| Edit::Insert(q, c))
                .chain(del)
        })
}
