//! Search/replace patching.
//!
//! A search block must occur exactly once. Matching is exact first; when
//! there is no exact occurrence a single whitespace-tolerant pass runs,
//! where runs of spaces/tabs collapse to one space and line-end whitespace
//! is ignored. The two passes are never mixed.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditBlock {
    pub path: String,
    pub search: String,
    pub replace: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchPass {
    Exact,
    WhitespaceTolerant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchMatch {
    pub pass: MatchPass,
    /// Byte range in the original content.
    pub range: Range<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatchError {
    #[error("search block is empty")]
    EmptySearch,
    #[error("search block not found (also tried ignoring whitespace differences)")]
    NotFound,
    #[error("search block matches {count}+ locations; include more surrounding lines")]
    Ambiguous { pass: MatchPass, count: usize },
}

/// Start offsets of up to `limit` possibly-overlapping occurrences.
fn occurrences(haystack: &str, needle: &str, limit: usize) -> Vec<usize> {
    let mut found = Vec::new();
    let mut from = 0;
    while found.len() < limit {
        let Some(pos) = haystack[from..].find(needle) else { break };
        let at = from + pos;
        found.push(at);
        // step one character so overlapping matches are counted
        let step = haystack[at..].chars().next().map_or(1, char::len_utf8);
        from = at + step;
        if from > haystack.len() {
            break;
        }
    }
    found
}

struct Normalized {
    text: String,
    /// Original byte span for every byte of `text`.
    spans: Vec<(usize, usize)>,
}

fn normalize(src: &str) -> Normalized {
    let mut text = String::with_capacity(src.len());
    let mut spans = Vec::with_capacity(src.len());
    let mut line_start = 0;
    for line in src.split_inclusive('\n') {
        let (body, newline) = match line.strip_suffix('\n') {
            Some(b) => (b, true),
            None => (line, false),
        };
        let kept = body.trim_end_matches([' ', '\t']);
        let mut run: Option<(usize, usize)> = None;
        for (i, ch) in kept.char_indices() {
            let at = line_start + i;
            if ch == ' ' || ch == '\t' {
                run = Some(match run {
                    Some((s, _)) => (s, at + 1),
                    None => (at, at + 1),
                });
                continue;
            }
            if let Some(span) = run.take() {
                text.push(' ');
                spans.push(span);
            }
            text.push(ch);
            for _ in 0..ch.len_utf8() {
                spans.push((at, at + ch.len_utf8()));
            }
        }
        if let Some(span) = run.take() {
            text.push(' ');
            spans.push(span);
        }
        if newline {
            let at = line_start + body.len();
            text.push('\n');
            spans.push((at, at + 1));
        }
        line_start += line.len();
    }
    Normalized { text, spans }
}

#[cfg(test)]
pub(crate) fn normalize_whitespace(src: &str) -> String {
    normalize(src).text
}

pub fn locate(content: &str, search: &str) -> Result<SearchMatch, PatchError> {
    if search.is_empty() {
        return Err(PatchError::EmptySearch);
    }
    match occurrences(content, search, 2).as_slice() {
        [at] => {
            return Ok(SearchMatch {
                pass: MatchPass::Exact,
                range: *at..*at + search.len(),
            })
        }
        [] => {}
        many => {
            return Err(PatchError::Ambiguous {
                pass: MatchPass::Exact,
                count: many.len(),
            })
        }
    }
    let haystack = normalize(content);
    let needle = normalize(search).text;
    if needle.is_empty() {
        return Err(PatchError::NotFound);
    }
    match occurrences(&haystack.text, &needle, 2).as_slice() {
        [] => Err(PatchError::NotFound),
        [at] => {
            let start = haystack.spans[*at].0;
            let end = haystack.spans[at + needle.len() - 1].1;
            Ok(SearchMatch {
                pass: MatchPass::WhitespaceTolerant,
                range: start..end,
            })
        }
        many => Err(PatchError::Ambiguous {
            pass: MatchPass::WhitespaceTolerant,
            count: many.len(),
        }),
    }
}

/// Replaces the single occurrence of `search` with `replace`.
pub fn replace_unique(
    content: &str,
    search: &str,
    replace: &str,
) -> Result<(String, MatchPass), PatchError> {
    let m = locate(content, search)?;
    let mut out = String::with_capacity(content.len() + replace.len());
    out.push_str(&content[..m.range.start]);
    out.push_str(replace);
    out.push_str(&content[m.range.end..]);
    Ok((out, m.pass))
}
