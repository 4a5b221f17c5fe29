//! Tolerant extraction of coordinate pairs from model replies.
//!
//! Models are asked for `[x, y]` arrays but reply in many shapes: fenced
//! JSON, prose around an array, `x = 2.5, y = -1`, parenthesized pairs, or
//! bare numbers. The routes below are tried in order of strictness; the
//! first one that yields the expected number of pairs wins. Out-of-range
//! coordinates are clamped into the square rather than rejected — a model
//! answering `[7, -9]` clearly means the corner.

use regex::Regex;
use serde_json::Value;
use std::sync::OnceLock;
use thiserror::Error;

use crate::beosonic::BeoCoord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("expected_count must be at least 1")]
    ZeroExpected,
    #[error("no numbers found in the reply")]
    NoNumbers,
    #[error("found {got} coordinate pairs, expected {expected}")]
    WrongCount { got: usize, expected: usize },
    #[error("found {count} numbers, which do not pair up")]
    OddNumbers { count: usize },
    #[error("reply contains a non-finite number")]
    NonFinite,
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").unwrap())
}

fn labeled_re() -> &'static (Regex, Regex) {
    static RE: OnceLock<(Regex, Regex)> = OnceLock::new();
    RE.get_or_init(|| {
        let num = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)";
        (
            Regex::new(&format!(r"(?i)\bx\s*[=:]\s*{num}")).unwrap(),
            Regex::new(&format!(r"(?i)\by\s*[=:]\s*{num}")).unwrap(),
        )
    })
}

fn paren_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let num = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)";
        Regex::new(&format!(r"\(\s*{num}\s*,\s*{num}\s*\)")).unwrap()
    })
}

/// Interprets a JSON value as coordinate pairs: either a flat `[x, y]`
/// (one pair) or an array of such pairs. Anything else is not a match.
fn value_to_pairs(v: &Value) -> Option<Vec<(f64, f64)>> {
    let items = v.as_array()?;
    if items.len() == 2 {
        if let (Some(x), Some(y)) = (items[0].as_f64(), items[1].as_f64()) {
            return Some(vec![(x, y)]);
        }
    }
    if items.is_empty() {
        return None;
    }
    let mut pairs = Vec::with_capacity(items.len());
    for item in items {
        let inner = item.as_array()?;
        if inner.len() != 2 {
            return None;
        }
        pairs.push((inner[0].as_f64()?, inner[1].as_f64()?));
    }
    Some(pairs)
}

/// Finds the first bracketed substring that parses as a JSON pair array.
fn json_pairs(text: &str) -> Option<Vec<(f64, f64)>> {
    let bytes = text.as_bytes();
    for start in 0..bytes.len() {
        if bytes[start] != b'[' {
            continue;
        }
        let mut depth = 0usize;
        for end in start..bytes.len() {
            match bytes[end] {
                b'[' => depth += 1,
                b']' => {
                    depth -= 1;
                    if depth == 0 {
                        if let Ok(v) = serde_json::from_str::<Value>(&text[start..=end]) {
                            if let Some(pairs) = value_to_pairs(&v) {
                                return Some(pairs);
                            }
                        }
                        break; // malformed or wrong shape: try the next '['
                    }
                }
                _ => {}
            }
        }
    }
    None
}

fn labeled_pairs(text: &str) -> Option<Vec<(f64, f64)>> {
    let (x_re, y_re) = labeled_re();
    let xs: Vec<f64> = x_re
        .captures_iter(text)
        .filter_map(|c| c[1].parse().ok())
        .collect();
    let ys: Vec<f64> = y_re
        .captures_iter(text)
        .filter_map(|c| c[1].parse().ok())
        .collect();
    if xs.is_empty() || xs.len() != ys.len() {
        return None;
    }
    Some(xs.into_iter().zip(ys).collect())
}

fn paren_pairs(text: &str) -> Option<Vec<(f64, f64)>> {
    let pairs: Vec<(f64, f64)> = paren_re()
        .captures_iter(text)
        .filter_map(|c| Some((c[1].parse().ok()?, c[2].parse().ok()?)))
        .collect();
    if pairs.is_empty() {
        None
    } else {
        Some(pairs)
    }
}

/// Extracts exactly `expected_count` coordinate pairs from a model reply,
/// clamping each into the valid square.
///
/// Extraction routes, in order: a JSON array (possibly embedded in prose or
/// a code fence), labeled `x = …` / `y = …` values, parenthesized `(x, y)`
/// pairs, and finally all bare numbers in reading order. A route that
/// yields the wrong number of pairs is skipped in favor of the next; if
/// every route misses, the error reports the most structured count seen.
pub fn parse_coords(text: &str, expected_count: usize) -> Result<Vec<BeoCoord>, ParseError> {
    if expected_count == 0 {
        return Err(ParseError::ZeroExpected);
    }

    let mut best_count: Option<usize> = None;
    for route in [json_pairs, labeled_pairs, paren_pairs] {
        if let Some(pairs) = route(text) {
            if pairs.len() == expected_count {
                return clamp_all(&pairs);
            }
            best_count.get_or_insert(pairs.len());
        }
    }

    let numbers: Vec<f64> = number_re()
        .find_iter(text)
        .filter_map(|m| m.as_str().parse::<f64>().ok())
        .collect();
    if numbers.len() == 2 * expected_count {
        let pairs: Vec<(f64, f64)> = numbers.chunks(2).map(|c| (c[0], c[1])).collect();
        return clamp_all(&pairs);
    }

    if let Some(got) = best_count {
        return Err(ParseError::WrongCount {
            got,
            expected: expected_count,
        });
    }
    if numbers.is_empty() {
        return Err(ParseError::NoNumbers);
    }
    if numbers.len() % 2 == 1 {
        return Err(ParseError::OddNumbers {
            count: numbers.len(),
        });
    }
    Err(ParseError::WrongCount {
        got: numbers.len() / 2,
        expected: expected_count,
    })
}

fn clamp_all(pairs: &[(f64, f64)]) -> Result<Vec<BeoCoord>, ParseError> {
    pairs
        .iter()
        .map(|&(x, y)| BeoCoord::clamped(x, y).map_err(|_| ParseError::NonFinite))
        .collect()
}
