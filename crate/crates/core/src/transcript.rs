//! Spoken transcript notation: pauses, fragments, repairs and variants.
//!
//! Notation handled here:
//!
//! * `/` on its own is a pause.
//! * a token ending in `/` is a fragment (`ad/`, `f/`).
//! * `[N#text]` repairs the disfluent region ending at the preceding fluent
//!   token; with empty text the fluent token is kept as is.
//! * `[x:rest]` marks a phonetic or lengthened variant of the preceding token.
//! * any other bracket is recorded as unresolved and dropped.
//!
//! Filler particles (`euh`, `hum`, `hm`) are the only disfluencies that
//! survive into the clean text.

use std::ops::Range;

use crate::records::is_filler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DisfluencyKind {
    Fp,
    Pause,
    Truncation,
    MidwordBreak,
    RepetitionRepair,
    PhoneticVariant,
    ContractionExpansion,
    Unresolved,
}

/// One annotated disfluency. `span` is a character range in the raw text.
#[derive(Debug, Clone, PartialEq)]
pub struct DisfluencyEvent {
    pub kind: DisfluencyKind,
    pub span: Range<usize>,
    pub resolution: Option<String>,
    /// The numeral of a `[N#...]` repair, recorded but not enforced.
    pub marker: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    pub span: Range<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SegmentDisfluencyCounts {
    pub disfluencies: u32,
    pub fillers: u32,
    pub fillers_plus_3: u32,
}

impl SegmentDisfluencyCounts {
    pub fn from_events(events: &[DisfluencyEvent]) -> Self {
        let mut counts = SegmentDisfluencyCounts::default();
        for e in events {
            use DisfluencyKind::*;
            match e.kind {
                ContractionExpansion | Unresolved => continue,
                Fp => {
                    counts.fillers += 1;
                    counts.fillers_plus_3 += 1;
                }
                MidwordBreak | RepetitionRepair | Truncation => counts.fillers_plus_3 += 1,
                Pause | PhoneticVariant => {}
            }
            counts.disfluencies += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTranscript {
    pub events: Vec<DisfluencyEvent>,
    pub tokens: Vec<String>,
    pub warnings: Vec<ParseWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSegment {
    pub clean: String,
    pub tokens: Vec<String>,
    pub fp_positions: Vec<usize>,
    pub counts: SegmentDisfluencyCounts,
    pub events: Vec<DisfluencyEvent>,
    pub warnings: Vec<ParseWarning>,
}

#[derive(Debug, Clone, PartialEq)]
enum Lexeme {
    Word(String),
    Fragment(String),
    Pause,
    Bracket { content: String, suffix: String },
    Unbalanced(String),
}

fn lex(raw: &str) -> Vec<(Lexeme, Range<usize>)> {
    let chars: Vec<char> = raw.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if chars[i] == '[' {
            match chars[i..].iter().position(|&c| c == ']') {
                Some(off) => {
                    let close = i + off;
                    let content: String = chars[i + 1..close].iter().collect();
                    let mut j = close + 1;
                    while j < chars.len() && !chars[j].is_whitespace() && chars[j] != '[' {
                        j += 1;
                    }
                    let suffix: String = chars[close + 1..j].iter().collect();
                    out.push((Lexeme::Bracket { content, suffix }, start..j));
                    i = j;
                }
                None => {
                    let mut j = i;
                    while j < chars.len() && !chars[j].is_whitespace() {
                        j += 1;
                    }
                    out.push((Lexeme::Unbalanced(chars[i..j].iter().collect()), start..j));
                    i = j;
                }
            }
            continue;
        }
        let mut j = i;
        while j < chars.len() && !chars[j].is_whitespace() && chars[j] != '[' {
            j += 1;
        }
        let tok: String = chars[i..j].iter().collect();
        let lexeme = if tok == "/" {
            Lexeme::Pause
        } else if tok.contains(']') {
            Lexeme::Unbalanced(tok)
        } else if tok.ends_with('/') {
            Lexeme::Fragment(tok)
        } else {
            Lexeme::Word(tok)
        };
        out.push((lexeme, start..j));
        i = j;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeKind {
    Fluent,
    Filler,
    Fragment,
    Pause,
}

#[derive(Debug, Clone)]
struct Node {
    kind: NodeKind,
    text: String,
    span: Range<usize>,
    /// Part of a repair region already resolved by an earlier marker.
    consumed: bool,
    /// Index of this fragment's event in the event list.
    event: Option<usize>,
}

fn push_word(nodes: &mut Vec<Node>, events: &mut Vec<DisfluencyEvent>, text: String, span: Range<usize>) {
    let folded = text.to_lowercase();
    if is_filler(&folded) {
        events.push(DisfluencyEvent {
            kind: DisfluencyKind::Fp,
            span: span.clone(),
            resolution: None,
            marker: None,
        });
        nodes.push(Node {
            kind: NodeKind::Filler,
            text: folded,
            span,
            consumed: false,
            event: None,
        });
    } else {
        nodes.push(Node {
            kind: NodeKind::Fluent,
            text,
            span,
            consumed: false,
            event: None,
        });
    }
}

fn attach_suffix(nodes: &mut [Node], suffix: &str) {
    if suffix.is_empty() {
        return;
    }
    if let Some(n) = nodes
        .iter_mut()
        .rev()
        .find(|n| matches!(n.kind, NodeKind::Fluent | NodeKind::Filler))
    {
        n.text.push_str(suffix);
    }
}

fn parse_marker(content: &str) -> Option<(u32, String)> {
    let (n, text) = content.split_once('#')?;
    if n.is_empty() || !n.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((n.parse().ok()?, text.trim().to_string()))
}

/// Applies a `[N#text]` repair to the nodes seen so far. Returns false when
/// no fluent token is available to anchor the repair.
fn apply_repair(
    nodes: &mut [Node],
    events: &mut Vec<DisfluencyEvent>,
    marker: u32,
    text: &str,
    suffix: &str,
    span: Range<usize>,
) -> bool {
    let mut anchor = None;
    let mut fragments = Vec::new();
    for (idx, node) in nodes.iter().enumerate().rev() {
        if node.consumed {
            break;
        }
        match node.kind {
            NodeKind::Pause => continue,
            NodeKind::Fragment => fragments.push(idx),
            NodeKind::Filler => break,
            NodeKind::Fluent => {
                if anchor.is_some() {
                    break;
                }
                anchor = Some(idx);
            }
        }
    }
    let Some(anchor) = anchor else {
        return false;
    };
    for &f in &fragments {
        nodes[f].consumed = true;
    }
    nodes[anchor].consumed = true;

    if text.is_empty() {
        events.push(DisfluencyEvent {
            kind: DisfluencyKind::RepetitionRepair,
            span,
            resolution: None,
            marker: Some(marker),
        });
    } else {
        let replaced = std::mem::take(&mut nodes[anchor].text);
        for &f in &fragments {
            if let Some(e) = nodes[f].event {
                events[e].kind = DisfluencyKind::MidwordBreak;
                events[e].resolution = Some(text.to_string());
                events[e].marker = Some(marker);
            }
        }
        if fragments.is_empty() {
            let kind = if replaced.contains(['\'', '’']) {
                DisfluencyKind::ContractionExpansion
            } else {
                DisfluencyKind::RepetitionRepair
            };
            events.push(DisfluencyEvent {
                kind,
                span: nodes[anchor].span.start..span.end,
                resolution: Some(text.to_string()),
                marker: Some(marker),
            });
        }
        nodes[anchor].text = text.to_string();
    }
    nodes[anchor].text.push_str(suffix);
    true
}

/// Parses one annotated segment into disfluency events and the resolved
/// surface tokens (filler particles kept in place).
pub fn parse_transcript(raw: &str) -> ParsedTranscript {
    let mut nodes: Vec<Node> = Vec::new();
    let mut events: Vec<DisfluencyEvent> = Vec::new();
    let mut warnings = Vec::new();

    for (lexeme, span) in lex(raw) {
        match lexeme {
            Lexeme::Word(w) => push_word(&mut nodes, &mut events, w, span),
            Lexeme::Pause => {
                events.push(DisfluencyEvent {
                    kind: DisfluencyKind::Pause,
                    span: span.clone(),
                    resolution: None,
                    marker: None,
                });
                nodes.push(Node {
                    kind: NodeKind::Pause,
                    text: String::new(),
                    span,
                    consumed: false,
                    event: None,
                });
            }
            Lexeme::Fragment(f) => {
                events.push(DisfluencyEvent {
                    kind: DisfluencyKind::Truncation,
                    span: span.clone(),
                    resolution: None,
                    marker: None,
                });
                nodes.push(Node {
                    kind: NodeKind::Fragment,
                    text: f,
                    span,
                    consumed: false,
                    event: Some(events.len() - 1),
                });
            }
            Lexeme::Unbalanced(tok) => {
                warnings.push(ParseWarning {
                    span: span.clone(),
                    message: format!("unbalanced bracket in '{tok}'"),
                });
                log::warn!("unbalanced bracket in transcript token '{tok}'");
                events.push(DisfluencyEvent {
                    kind: DisfluencyKind::Unresolved,
                    span,
                    resolution: None,
                    marker: None,
                });
            }
            Lexeme::Bracket { content, suffix } => {
                if let Some((marker, text)) = parse_marker(&content) {
                    if !apply_repair(&mut nodes, &mut events, marker, &text, &suffix, span.clone()) {
                        warnings.push(ParseWarning {
                            span: span.clone(),
                            message: format!("repair [{content}] has no preceding token"),
                        });
                        events.push(DisfluencyEvent {
                            kind: DisfluencyKind::Unresolved,
                            span,
                            resolution: None,
                            marker: Some(marker),
                        });
                        attach_suffix(&mut nodes, &suffix);
                    }
                } else if content.contains(':') {
                    events.push(DisfluencyEvent {
                        kind: DisfluencyKind::PhoneticVariant,
                        span,
                        resolution: Some(content),
                        marker: None,
                    });
                    attach_suffix(&mut nodes, &suffix);
                } else {
                    warnings.push(ParseWarning {
                        span: span.clone(),
                        message: format!("unrecognised bracket [{content}]"),
                    });
                    events.push(DisfluencyEvent {
                        kind: DisfluencyKind::Unresolved,
                        span,
                        resolution: Some(content),
                        marker: None,
                    });
                    attach_suffix(&mut nodes, &suffix);
                }
            }
        }
    }

    remove_restarts(&mut nodes, &mut events);

    let tokens = nodes
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::Fluent | NodeKind::Filler))
        .flat_map(|n| n.text.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .collect();
    ParsedTranscript {
        events,
        tokens,
        warnings,
    }
}

/// Drops a fluent token that is restarted after one or more fragments
/// (`the s/ the` keeps only the second `the`).
fn remove_restarts(nodes: &mut Vec<Node>, events: &mut Vec<DisfluencyEvent>) {
    let mut i = 0;
    while i < nodes.len() {
        if nodes[i].kind != NodeKind::Fluent {
            i += 1;
            continue;
        }
        let mut saw_fragment = false;
        let mut next = None;
        for (j, n) in nodes.iter().enumerate().skip(i + 1) {
            match n.kind {
                NodeKind::Fragment => saw_fragment = true,
                NodeKind::Pause => {}
                NodeKind::Fluent | NodeKind::Filler => {
                    next = Some(j);
                    break;
                }
            }
        }
        let restart = next.is_some_and(|j| {
            saw_fragment
                && nodes[j].kind == NodeKind::Fluent
                && nodes[j].text.to_lowercase() == nodes[i].text.to_lowercase()
        });
        if restart {
            events.push(DisfluencyEvent {
                kind: DisfluencyKind::RepetitionRepair,
                span: nodes[i].span.clone(),
                resolution: None,
                marker: None,
            });
            nodes.remove(i);
        } else {
            i += 1;
        }
    }
    events.sort_by_key(|e| (e.span.start, e.span.end));
}

/// Resolves the notation and returns clean text with only filler particles
/// kept, their token positions, and the segment's disfluency counts.
pub fn normalize_segment(raw: &str) -> NormalizedSegment {
    let parsed = parse_transcript(raw);
    let mut tokens = parsed.tokens;
    if let Some(first) = tokens.first_mut() {
        if !is_filler(first) {
            *first = capitalize(first);
        }
    }
    let fp_positions = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| is_filler(t))
        .map(|(i, _)| i)
        .collect();
    NormalizedSegment {
        clean: tokens.join(" "),
        counts: SegmentDisfluencyCounts::from_events(&parsed.events),
        tokens,
        fp_positions,
        events: parsed.events,
        warnings: parsed.warnings,
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
