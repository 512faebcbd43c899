//! Runs a UD parser over segments and assembles vertical-format rows.
//!
//! Fillers are taken out of the parser input and put back as `FP` rows at
//! their original positions. Multiword tokens appear twice: once as a
//! surface row (`:010`, scored and aligned) and once as expansion rows
//! (`:010:1`, `:010:2`) carrying the syntactic annotation.

use std::collections::BTreeSet;
use std::ops::Range;

use log::warn;
use thiserror::Error;

use crate::adapter::{ParserAdapter, Sentence};
use crate::ids::{IdWidths, ItemId};
use crate::records::{Conllu, RowKind, RowMeta, WordRow, FP_TAG};
use crate::standardize::join_hyphens;

/// Language of the text a segment id stands for: the source language for
/// originals, the target language for translations and interpretations.
pub fn segment_lang(id: &ItemId) -> &str {
    if id.ttype == "ORG" {
        &id.src_lang
    } else {
        &id.tgt_lang
    }
}

/// Metadata shared by all rows of a segment.
pub fn row_meta(id: &ItemId, speaker_id: Option<&str>) -> RowMeta {
    let seg = id.segment_id();
    RowMeta {
        doc_id: Some(format!(
            "{}_{}{}_{}_{}",
            seg.ttype,
            seg.mode.map(|m| format!("{m}_")).unwrap_or_default(),
            seg.src_lang,
            seg.tgt_lang,
            seg.doc
        )),
        seg_id: Some(seg.to_string()),
        lpair: Some(seg.lpair()),
        lang: Some(segment_lang(&seg).to_string()),
        mode: seg.mode.map(|m| m.code().to_string()),
        ttype: Some(seg.ttype.clone()),
        speaker_id: speaker_id.map(str::to_string),
    }
}

/// A segment after parsing and filler reinsertion.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedSegment {
    pub seg_id: ItemId,
    /// The parser input: the segment text without fillers.
    pub text: String,
    pub rows: Vec<WordRow>,
    /// Character span in `text` per row; expansion rows share their
    /// surface row's span, fillers have none.
    pub spans: Vec<Option<Range<usize>>>,
    /// 0-based word indices of filler rows.
    pub fp_positions: Vec<usize>,
    /// 0-based word index of the first word of each sentence.
    pub sentence_boundaries: Vec<usize>,
    pub parsed: bool,
    pub warnings: Vec<String>,
}

impl TokenizedSegment {
    /// Row indices and tokens of the surface words that get scored and
    /// aligned (no fillers, no expansion rows).
    pub fn scored_words(&self) -> Vec<(usize, &str)> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.kind() == RowKind::Word)
            .map(|(i, r)| (i, r.token().unwrap_or("")))
            .collect()
    }

    /// Surface-word count (fillers and expansions excluded).
    pub fn word_count(&self) -> usize {
        self.scored_words().len()
    }

    /// Space-joined surface tokens, fillers included.
    pub fn tokens_line(&self) -> String {
        self.rows
            .iter()
            .filter(|r| matches!(r.kind(), RowKind::Word | RowKind::Filler))
            .filter_map(|r| r.token())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("row {0} has no usable integer id")]
    BadId(usize),
    #[error("word {0} has no usable head")]
    BadHead(usize),
    #[error("sentence has {0} roots")]
    Roots(usize),
    #[error("head chain from word {0} loops")]
    Cycle(usize),
}

/// Checks that the syntactic words of a sentence form one rooted tree.
/// Multiword range rows are skipped.
pub fn validate_tree(sentence: &[Conllu]) -> Result<(), TreeError> {
    let words: Vec<&Conllu> = sentence
        .iter()
        .filter(|c| !c.id.as_deref().is_some_and(|id| id.contains('-') || id.contains('.')))
        .collect();
    let n = words.len();
    let mut heads = vec![0usize; n + 1];
    for (k, w) in words.iter().enumerate() {
        let id: usize = w.id.as_deref().and_then(|s| s.parse().ok()).ok_or(TreeError::BadId(k))?;
        if id != k + 1 {
            return Err(TreeError::BadId(k));
        }
        let head: usize = w
            .head_id
            .as_deref()
            .and_then(|s| s.parse().ok())
            .filter(|&h| h <= n && h != id)
            .ok_or(TreeError::BadHead(id))?;
        heads[id] = head;
    }
    let roots = (1..=n).filter(|&i| heads[i] == 0).count();
    if roots != 1 {
        return Err(TreeError::Roots(roots));
    }
    for start in 1..=n {
        let (mut cur, mut steps) = (start, 0);
        while cur != 0 {
            cur = heads[cur];
            steps += 1;
            if steps > n {
                return Err(TreeError::Cycle(start));
            }
        }
    }
    Ok(())
}

/// Joins pre-tokenized text back into running text: no space before
/// closing punctuation and clitics, none after opening brackets, and
/// `@-@` hyphen marks rejoined.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    const CLOSE: [&str; 12] = [".", ",", ";", ":", "!", "?", ")", "]", "}", "%", "...", "\u{201d}"];
    const OPEN: [&str; 4] = ["(", "[", "{", "\u{201e}"];
    const CLITICS: [&str; 7] = ["n't", "'s", "'m", "'re", "'ll", "'d", "'ve"];
    let mut out = String::new();
    let mut glue = true;
    for t in tokens {
        let t = t.as_ref();
        let attach = CLOSE.contains(&t) || CLITICS.iter().any(|c| t.eq_ignore_ascii_case(c));
        if !out.is_empty() && !glue && !attach {
            out.push(' ');
        }
        out.push_str(t);
        glue = OPEN.contains(&t);
    }
    join_hyphens(&out)
}

/// Locates each token in `text` left to right, ignoring whitespace inside
/// both. Tokens that cannot be found get None.
pub fn locate_tokens<S: AsRef<str>>(text: &str, tokens: &[S]) -> (Vec<Option<Range<usize>>>, Vec<String>) {
    let chars: Vec<char> = text.chars().collect();
    let mut cursor = 0;
    let mut spans = Vec::with_capacity(tokens.len());
    let mut warnings = Vec::new();
    let matches_at = |start: usize, tok: &[char]| -> Option<usize> {
        let mut p = start;
        for &c in tok {
            while p < chars.len() && chars[p].is_whitespace() {
                p += 1;
            }
            if p >= chars.len() || chars[p] != c {
                return None;
            }
            p += 1;
        }
        Some(p)
    };
    for t in tokens {
        let tok: Vec<char> = t.as_ref().chars().filter(|c| !c.is_whitespace()).collect();
        let mut start = cursor;
        while start < chars.len() && chars[start].is_whitespace() {
            start += 1;
        }
        let found = if tok.is_empty() {
            None
        } else {
            matches_at(start, &tok).map(|e| start..e).or_else(|| {
                (start..chars.len())
                    .filter(|&s| chars[s] == tok[0])
                    .find_map(|s| matches_at(s, &tok).map(|e| s..e))
            })
        };
        match found {
            Some(span) => {
                cursor = span.end;
                spans.push(Some(span));
            }
            None => {
                warnings.push(format!("token '{}' not found in segment text", t.as_ref()));
                spans.push(None);
            }
        }
    }
    (spans, warnings)
}

/// Syntactic content of one surface word: its own annotation, or the
/// annotations of its expansion rows.
enum Surface {
    Word(Conllu),
    Multi(String, Vec<Conllu>),
}

fn surfaces_of(sentence: &Sentence) -> Vec<Surface> {
    let mut out = Vec::new();
    let mut pending: Option<(String, usize, Vec<Conllu>)> = None;
    for row in sentence {
        let id = row.id.as_deref().unwrap_or("");
        if id.contains('.') {
            continue;
        }
        if let Some((a, b)) = id.split_once('-') {
            if let Some((form, _, parts)) = pending.take() {
                out.push(Surface::Multi(form, parts));
            }
            let span = b.parse::<usize>().unwrap_or(0).saturating_sub(a.parse::<usize>().unwrap_or(0)) + 1;
            pending = Some((row.token.clone().unwrap_or_default(), span, Vec::new()));
            continue;
        }
        match pending.as_mut() {
            Some((_, span, parts)) => {
                parts.push(row.clone());
                if parts.len() == *span {
                    let (form, _, parts) = pending.take().expect("pending multiword");
                    out.push(Surface::Multi(form, parts));
                }
            }
            None => out.push(Surface::Word(row.clone())),
        }
    }
    if let Some((form, _, parts)) = pending {
        out.push(Surface::Multi(form, parts));
    }
    out
}

fn filler_row(id: ItemId, token: &str) -> WordRow {
    let mut r = WordRow::new(id);
    r.conllu.token = Some(token.to_string());
    r.conllu.pos = Some(FP_TAG.to_string());
    r
}

/// Parses `clean_text` (whitespace tokens, fillers at `fp_positions`) and
/// builds its rows. A parser failure leaves a segment of unparsed rows
/// rather than dropping it.
pub fn annotate_segment(
    seg_id: &ItemId,
    clean_text: &str,
    fp_positions: &[usize],
    meta: &RowMeta,
    widths: IdWidths,
    parser: &dyn ParserAdapter,
) -> TokenizedSegment {
    let seg_id = seg_id.segment_id();
    let lang = segment_lang(&seg_id).to_lowercase();
    let ws_tokens: Vec<&str> = clean_text.split_whitespace().collect();
    let fps: BTreeSet<usize> = fp_positions.iter().copied().filter(|&p| p < ws_tokens.len()).collect();
    let kept: Vec<&str> = ws_tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| !fps.contains(i))
        .map(|(_, t)| *t)
        .collect();
    let text = kept.join(" ");
    let mut seg = TokenizedSegment {
        seg_id: seg_id.clone(),
        text: text.clone(),
        rows: Vec::new(),
        spans: Vec::new(),
        fp_positions: Vec::new(),
        sentence_boundaries: Vec::new(),
        parsed: true,
        warnings: Vec::new(),
    };
    if ws_tokens.is_empty() {
        let mut r = WordRow::new(seg_id.clone());
        r.meta = meta.clone();
        seg.rows.push(r);
        seg.spans.push(None);
        return seg;
    }

    // Surface words with their annotation, by sentence.
    let mut words: Vec<Surface> = Vec::new();
    if !text.is_empty() {
        match parser.parse(&text, &lang) {
            Ok(sentences) => {
                for s in &sentences {
                    if let Err(e) = validate_tree(s) {
                        seg.warnings.push(format!("sentence {}: {e}", seg.sentence_boundaries.len() + 1));
                    }
                    let surf = surfaces_of(s);
                    if !surf.is_empty() {
                        seg.sentence_boundaries.push(words.len());
                    }
                    words.extend(surf);
                }
            }
            Err(e) => {
                warn!("{seg_id}: parser failed, rows left unannotated: {e}");
                seg.parsed = false;
                seg.warnings.push(e.to_string());
                words = kept
                    .iter()
                    .map(|t| Surface::Word(Conllu {
                        token: Some(t.to_string()),
                        ..Conllu::default()
                    }))
                    .collect();
            }
        }
    }
    let forms: Vec<String> = words
        .iter()
        .map(|w| match w {
            Surface::Word(c) => c.token.clone().unwrap_or_default(),
            Surface::Multi(f, _) => f.clone(),
        })
        .collect();
    let (word_spans, warnings) = locate_tokens(&text, &forms);
    seg.warnings.extend(warnings);

    // Character offset in `text` where each kept whitespace token starts.
    let mut kept_starts = Vec::with_capacity(kept.len());
    let mut off = 0;
    for t in &kept {
        kept_starts.push(off);
        off += t.chars().count() + 1;
    }
    // Where each filler goes: before the first word starting at or after
    // the next kept token.
    let mut insert_before: Vec<(usize, &str)> = Vec::new();
    let mut kept_seen = 0;
    for (i, t) in ws_tokens.iter().enumerate() {
        if fps.contains(&i) {
            let at = match kept_starts.get(kept_seen) {
                Some(&start) => word_spans
                    .iter()
                    .position(|s| s.as_ref().is_some_and(|s| s.start >= start))
                    .unwrap_or(words.len()),
                None => words.len(),
            };
            insert_before.push((at, t));
        } else {
            kept_seen += 1;
        }
    }

    let mut number = 0u32;
    let mut fp_iter = insert_before.into_iter().peekable();
    let mut boundaries = Vec::new();
    let sentence_starts: BTreeSet<usize> = seg.sentence_boundaries.iter().copied().collect();
    let mut push_fillers = |upto: usize, seg: &mut TokenizedSegment, number: &mut u32| {
        while let Some((_, t)) = fp_iter.next_if(|(at, _)| *at <= upto) {
            *number += 1;
            let mut r = filler_row(seg_id.with_word(*number, widths.word), t);
            r.meta = meta.clone();
            seg.fp_positions.push(*number as usize - 1);
            seg.rows.push(r);
            seg.spans.push(None);
        }
    };
    for (k, (w, span)) in words.into_iter().zip(word_spans).enumerate() {
        push_fillers(k, &mut seg, &mut number);
        number += 1;
        if sentence_starts.contains(&k) {
            boundaries.push(number as usize - 1);
        }
        let id = seg_id.with_word(number, widths.word);
        match w {
            Surface::Word(c) => {
                let mut r = WordRow::new(id);
                r.conllu = c;
                r.meta = meta.clone();
                seg.rows.push(r);
                seg.spans.push(span);
            }
            Surface::Multi(form, parts) => {
                let mut r = WordRow::new(id.clone());
                r.conllu.token = Some(form);
                r.meta = meta.clone();
                seg.rows.push(r);
                seg.spans.push(span.clone());
                for (sub, c) in parts.into_iter().enumerate() {
                    let mut e = WordRow::new(id.with_sub(sub as u16 + 1));
                    e.conllu = c;
                    e.meta = meta.clone();
                    seg.rows.push(e);
                    seg.spans.push(span.clone());
                }
            }
        }
    }
    push_fillers(usize::MAX, &mut seg, &mut number);
    seg.sentence_boundaries = boundaries;
    seg
}

/// Character span per row, as in [`TokenizedSegment::spans`].
pub fn surface_map(seg: &TokenizedSegment) -> &[Option<Range<usize>>] {
    &seg.spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::mock::{FailingParser, NaiveParser};

    fn sid() -> ItemId {
        ItemId::parse("SI_DE_EN_030-21").unwrap()
    }

    fn annotate(text: &str, fps: &[usize]) -> TokenizedSegment {
        let meta = row_meta(&sid(), Some("fEN3"));
        annotate_segment(&sid(), text, fps, &meta, IdWidths::default(), &NaiveParser)
    }

    fn ids(seg: &TokenizedSegment) -> Vec<String> {
        seg.rows
            .iter()
            .map(|r| {
                let s = r.word_id.to_string();
                s[s.find(':').unwrap()..].to_string()
            })
            .collect()
    }

    fn tokens(seg: &TokenizedSegment) -> Vec<&str> {
        seg.rows.iter().map(|r| r.token().unwrap()).collect()
    }

    #[test]
    fn filler_and_multiword_rows() {
        let seg = annotate("It's all euh very well-intended.", &[2]);
        assert_eq!(
            ids(&seg),
            [":001", ":001:1", ":001:2", ":002", ":003", ":004", ":005", ":006"]
        );
        assert_eq!(tokens(&seg), ["It's", "It", "'s", "all", "euh", "very", "well-intended", "."]);
        assert_eq!(seg.text, "It's all very well-intended.");
        assert_eq!(seg.fp_positions, [2]);
        let fp = &seg.rows[4];
        assert_eq!(fp.kind(), RowKind::Filler);
        assert_eq!((fp.conllu.id.as_ref(), fp.conllu.head_id.as_ref()), (None, None));
        let surface = &seg.rows[0];
        assert_eq!(surface.conllu.id, None);
        assert_eq!(seg.rows[1].conllu.id.as_deref(), Some("1"));
        assert_eq!(seg.rows[3].conllu.id.as_deref(), Some("3"));
        assert_eq!(seg.rows[5].conllu.id.as_deref(), Some("4"));
        assert_eq!(
            seg.scored_words().iter().map(|w| w.1).collect::<Vec<_>>(),
            ["It's", "all", "very", "well-intended", "."]
        );
        assert_eq!(seg.rows[0].meta.speaker_id.as_deref(), Some("fEN3"));
        assert_eq!(seg.rows[0].meta.lang.as_deref(), Some("EN"));
        assert_eq!(seg.tokens_line(), "It's all euh very well-intended .");
    }

    #[test]
    fn numbering_continues_across_sentences() {
        let seg = annotate("It's all euh hm euh very well-intended. But there's", &[2, 3, 4]);
        let rows: Vec<(String, &str)> = ids(&seg).into_iter().zip(tokens(&seg)).collect();
        assert_eq!(rows[10], (":009".to_string(), "But"));
        assert_eq!(rows[11], (":010".to_string(), "there's"));
        assert_eq!(rows[12], (":010:1".to_string(), "there"));
        assert_eq!(seg.rows[10].conllu.id.as_deref(), Some("1"));
        assert_eq!(seg.sentence_boundaries, [0, 8]);
        assert_eq!(seg.fp_positions, [2, 3, 4]);
    }

    #[test]
    fn fillers_at_edges() {
        let seg = annotate("euh yes euh", &[0, 2]);
        assert_eq!(tokens(&seg), ["euh", "yes", "euh"]);
        assert_eq!(seg.fp_positions, [0, 2]);
    }

    #[test]
    fn filler_only_segment() {
        let seg = annotate("euh hm", &[0, 1]);
        assert!(seg.rows.iter().all(|r| r.kind() == RowKind::Filler));
        assert_eq!(seg.word_count(), 0);
        assert_eq!(seg.text, "");
    }

    #[test]
    fn empty_segment_gets_placeholder() {
        let seg = annotate("", &[]);
        assert_eq!(seg.rows.len(), 1);
        assert_eq!(seg.rows[0].kind(), RowKind::Empty);
    }

    #[test]
    fn parser_failure_keeps_rows() {
        let meta = RowMeta::default();
        let seg = annotate_segment(&sid(), "so euh yes", &[1], &meta, IdWidths::default(), &FailingParser);
        assert!(!seg.parsed);
        assert_eq!(tokens(&seg), ["so", "euh", "yes"]);
        assert!(seg.rows.iter().all(|r| r.conllu.id.is_none() && r.conllu.lemma.is_none()));
    }

    #[test]
    fn spans() {
        let seg = annotate("It's all", &[]);
        assert_eq!(seg.spans, [Some(0..4), Some(0..4), Some(0..4), Some(5..8)]);
        let seg = annotate("very well-intended.", &[]);
        assert_eq!(surface_map(&seg)[1], Some(5..18));
        let seg = annotate("so euh yes", &[1]);
        assert_eq!(seg.spans[1], None);
    }

    #[test]
    fn removing_fillers_and_expansions_restores_text() {
        let text = "Well euh I'd say (roughly) 20 % of them, hum, im Haus.";
        let fps: Vec<usize> = text
            .split_whitespace()
            .enumerate()
            .filter(|(_, t)| matches!(t.trim_matches(','), "euh" | "hum"))
            .map(|(i, _)| i)
            .collect();
        let seg = annotate(&text.replace("hum,", "hum"), &fps);
        let joined: String = seg.scored_words().iter().map(|w| w.1).collect();
        let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        assert_eq!(joined, squash(&seg.text));
        assert!(seg.warnings.is_empty(), "{:?}", seg.warnings);
    }

    #[test]
    fn trees() {
        let row = |id: &str, head: &str| Conllu {
            id: Some(id.into()),
            head_id: Some(head.into()),
            ..Conllu::default()
        };
        assert!(validate_tree(&[row("1-2", ""), row("1", "2"), row("2", "0")]).is_ok());
        assert_eq!(validate_tree(&[row("1", "0"), row("2", "0")]), Err(TreeError::Roots(2)));
        assert_eq!(
            validate_tree(&[row("1", "2"), row("2", "1"), row("3", "0")]),
            Err(TreeError::Cycle(1))
        );
        assert_eq!(validate_tree(&[row("1", "7")]), Err(TreeError::BadHead(1)));
    }

    #[test]
    fn detokenizing() {
        assert_eq!(
            detokenize(&["It", "'s", "all", "(", "very", ")", "well", "@-@", "intended", "."]),
            "It's all (very) well-intended."
        );
    }
}
