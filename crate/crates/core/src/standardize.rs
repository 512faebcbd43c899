//! Character-level clean-up applied to every text before annotation.

use std::collections::HashMap;
use std::sync::OnceLock;

/// The frozen mapping table: code point, replacement (possibly empty).
pub const CHARMAP_MANIFEST: &str = include_str!("../schema/charmap.tsv");

/// Marker used for force-tokenised hyphens.
pub const HYPHEN_MARK: &str = " @-@ ";

/// Parses the mapping manifest into (char, replacement) pairs, in file order.
pub fn parse_charmap(text: &str) -> Result<Vec<(char, String)>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let from = cols.next().unwrap_or_default();
        let to = cols.next().unwrap_or_default();
        let parse = |hex: &str| {
            u32::from_str_radix(hex, 16)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| format!("line {}: bad code point '{hex}'", n + 1))
        };
        let from = parse(from)?;
        let to = to
            .split_whitespace()
            .map(parse)
            .collect::<Result<String, _>>()?;
        out.push((from, to));
    }
    Ok(out)
}

fn charmap() -> &'static HashMap<char, String> {
    static MAP: OnceLock<HashMap<char, String>> = OnceLock::new();
    MAP.get_or_init(|| {
        parse_charmap(CHARMAP_MANIFEST)
            .expect("bundled charmap is valid")
            .into_iter()
            .collect()
    })
}

fn is_removed_control(c: char) -> bool {
    (c.is_ascii_control() && c != '\t' && c != '\n') || c == '\u{7f}'
}

/// Removes non-printable ASCII (tab and newline kept), maps quotes, dashes,
/// superscripts and Unicode spaces to their ASCII forms, and collapses runs
/// of spaces. The language code is accepted for interface stability; the
/// table is the same for every language.
pub fn standardize(text: &str, _lang: &str) -> String {
    let map = charmap();
    let mut out = String::with_capacity(text.len());
    let push = |c: char, out: &mut String| {
        if c == ' ' && out.ends_with(' ') {
            return;
        }
        out.push(c);
    };
    for c in text.chars() {
        if is_removed_control(c) {
            continue;
        }
        match map.get(&c) {
            Some(rep) => rep.chars().for_each(|r| push(r, &mut out)),
            None => push(c, &mut out),
        }
    }
    out
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Marks intra-word hyphens as token boundaries: `EVP-Fraktion` becomes
/// `EVP @-@ Fraktion`. Both neighbours must be word characters and at least
/// one a letter, so numeric ranges such as `20-30` stay intact.
pub fn force_tokenize_hyphens(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        if c == '-' && i > 0 && i + 1 < chars.len() {
            let (l, r) = (chars[i - 1], chars[i + 1]);
            if is_word_char(l) && is_word_char(r) && (l.is_alphabetic() || r.is_alphabetic()) {
                out.push_str(HYPHEN_MARK);
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// Inverse of [`force_tokenize_hyphens`].
pub fn join_hyphens(text: &str) -> String {
    text.replace(HYPHEN_MARK, "-")
}
