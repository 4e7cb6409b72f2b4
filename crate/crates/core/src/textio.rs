//! Helpers for the tab-separated model text format.

use crate::error::{Error, Result};

pub(crate) fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn unesc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

/// Splits text into unescaped tab-separated fields, skipping blanks and `#` comments.
pub(crate) fn split_lines(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').map(unesc).collect())
        .collect()
}

pub(crate) fn parse_f64(s: Option<&String>) -> Result<f64> {
    let s = s.ok_or_else(|| Error::Parse("missing numeric field".into()))?;
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad number '{s}'")))
}

pub(crate) fn parse_usize(s: Option<&String>) -> Result<usize> {
    let s = s.ok_or_else(|| Error::Parse("missing integer field".into()))?;
    s.parse::<usize>()
        .map_err(|_| Error::Parse(format!("bad integer '{s}'")))
}
