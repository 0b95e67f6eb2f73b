//! Pulling a JSON document out of free-form assistant text.

use serde::de::DeserializeOwned;

/// Returns the body of the last closed ``` fenced block, or the whole
/// trimmed text when no closed block exists.
pub fn extract_structured(text: &str) -> &str {
    let mut last: Option<(usize, usize)> = None;
    let mut open: Option<usize> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let bare = line.trim_end_matches(['\n', '\r']);
        match open {
            None if bare.trim_start().starts_with("```") => open = Some(offset + line.len()),
            Some(start) if bare.trim() == "```" => {
                last = Some((start, offset));
                open = None;
            }
            _ => {}
        }
        offset += line.len();
    }
    match last {
        Some((start, end)) => text[start..end].trim(),
        None => text.trim(),
    }
}

pub(crate) fn parse_structured<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let body = extract_structured(text);
    if body.is_empty() {
        return Err("reply contains no JSON document".into());
    }
    serde_json::from_str(body).map_err(|e| format!("reply does not match the expected shape: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use regex::Regex;
    use serde::Deserialize;

    /// Independent reference: regex over the whole text, last match wins.
    fn reference_extract(text: &str) -> String {
        let re = Regex::new(r"(?ms)^[ \t]*```[^\n]*\n(.*?)\n?^[ \t]*```[ \t]*\r?$").unwrap();
        match re.captures_iter(text).last() {
            Some(c) => c[1].trim().to_string(),
            None => text.trim().to_string(),
        }
    }

    #[derive(Debug, Deserialize, PartialEq)]
    struct Doc {
        app_summary: String,
        workflows: Vec<String>,
    }

    #[test]
    fn fenced_block_is_parsed() {
        let text = "```json\n{\"app_summary\": \"x\", \"workflows\": []}\n```";
        let doc: Doc = parse_structured(text).unwrap();
        assert_eq!(doc.app_summary, "x");
    }

    #[test]
    fn prose_around_the_block_is_ignored() {
        let text = "Here is the document you asked for.\n\n```json\n{\"app_summary\": \"x\", \"workflows\": [\"a\"]}\n```\nLet me know if anything is missing.";
        let doc: Doc = parse_structured(text).unwrap();
        assert_eq!(doc.workflows, vec!["a"]);
        assert_eq!(extract_structured(text), reference_extract(text));
    }

    #[test]
    fn last_block_wins_and_matches_reference() {
        let cases = [
            "```\n{\"a\":1}\n```\nthen\n```json\n{\"a\":2}\n```",
            "no fences at all {\"a\":3}",
            "  {\"a\":4}  ",
            "```json\n{\"a\":5}\n```\n```json\n{\"unterminated\": true}\n",
            "intro\n```text\nnot json\n```\n",
        ];
        for c in cases {
            assert_eq!(extract_structured(c), reference_extract(c), "case {c:?}");
        }
        assert_eq!(extract_structured(cases[0]), "{\"a\":2}");
        assert_eq!(extract_structured(cases[3]), "{\"a\":5}");
    }

    #[test]
    fn whole_text_fallback() {
        let doc: Doc = parse_structured("{\"app_summary\":\"y\",\"workflows\":[]}").unwrap();
        assert_eq!(doc.app_summary, "y");
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let err = parse_structured::<Doc>("```json\n{\"app_summary\": 3}\n```").unwrap_err();
        assert!(err.contains("expected shape"), "{err}");
        assert!(parse_structured::<Doc>("   ").is_err());
    }
}
