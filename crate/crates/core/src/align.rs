//! Word alignment from contextual subword embeddings by bidirectional
//! softmax over the dot-product similarity matrix.

use std::collections::BTreeMap;
use std::ops::Range;

use thiserror::Error;

use crate::adapter::{AdapterError, EmbeddedSubword, EncoderAdapter};
use crate::records::{RowKind, WordRow};

pub const DEFAULT_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("no {0} subwords to align")]
    Empty(&'static str),
    #[error("{side} vector {index} has dimension {found}, expected {expected}")]
    Dimension {
        side: &'static str,
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("no source rows to summarise")]
    NoRows,
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

/// How the two directional softmax values are tested against the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MutualRule {
    /// Both directions must exceed the threshold.
    #[default]
    Both,
    /// Their mean must exceed it.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignConfig {
    pub threshold: f64,
    pub rule: MutualRule,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            threshold: DEFAULT_THRESHOLD,
            rule: MutualRule::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubwordPair {
    pub src: usize,
    pub tgt: usize,
    pub score: f64,
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

fn check_dims(side: &'static str, v: &[Vec<f64>], expected: usize) -> Result<(), AlignError> {
    match v.iter().position(|x| x.len() != expected) {
        Some(index) => Err(AlignError::Dimension {
            side,
            index,
            expected,
            found: v[index].len(),
        }),
        None => Ok(()),
    }
}

/// Kept subword pairs with their mutual score `(A + B) / 2`, where `A` is
/// the row softmax and `B` the column softmax of the similarity matrix.
pub fn subword_align(
    src: &[Vec<f64>],
    tgt: &[Vec<f64>],
    config: AlignConfig,
) -> Result<Vec<SubwordPair>, AlignError> {
    if src.is_empty() {
        return Err(AlignError::Empty("source"));
    }
    if tgt.is_empty() {
        return Err(AlignError::Empty("target"));
    }
    let dim = src[0].len();
    check_dims("source", src, dim)?;
    check_dims("target", tgt, dim)?;
    let (n, m) = (src.len(), tgt.len());
    let sim: Vec<Vec<f64>> = src
        .iter()
        .map(|s| tgt.iter().map(|t| s.iter().zip(t).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let mut rows = sim.clone();
    rows.iter_mut().for_each(|r| softmax_in_place(r));
    let mut cols: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| sim[i][j]).collect()).collect();
    cols.iter_mut().for_each(|c| softmax_in_place(c));
    let thr = config.threshold;
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let (a, b) = (rows[i][j], cols[j][i]);
            let score = (a + b) / 2.0;
            let keep = a > 0.0
                && b > 0.0
                && match config.rule {
                    MutualRule::Both => a > thr && b > thr,
                    MutualRule::Mean => score > thr,
                };
            if keep {
                pairs.push(SubwordPair { src: i, tgt: j, score });
            }
        }
    }
    Ok(pairs)
}

/// All target words a source word is linked to, in order, with scores.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentLink {
    pub src_word: usize,
    pub tgt_words: Vec<usize>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WordAlignment {
    pub links: Vec<AlignmentLink>,
    /// Source words without any link.
    pub unaligned: Vec<usize>,
}

impl WordAlignment {
    pub fn targets_of(&self, src_word: usize) -> Option<&AlignmentLink> {
        self.links.iter().find(|l| l.src_word == src_word)
    }

    /// Source words linked to each target word.
    pub fn reverse(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut rev: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for l in &self.links {
            for &t in &l.tgt_words {
                rev.entry(t).or_default().push(l.src_word);
            }
        }
        rev
    }
}

/// Averages pair scores per word pair and keeps those above `threshold`.
/// `src_map[i]` is the word of source subword `i` (None for subwords that
/// belong to no scored word).
pub fn aggregate_to_words(
    pairs: &[SubwordPair],
    src_map: &[Option<usize>],
    tgt_map: &[Option<usize>],
    n_src_words: usize,
    threshold: f64,
) -> WordAlignment {
    let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for p in pairs {
        let (Some(Some(s)), Some(Some(t))) = (src_map.get(p.src), tgt_map.get(p.tgt)) else {
            continue;
        };
        let e = sums.entry((*s, *t)).or_insert((0.0, 0));
        e.0 += p.score;
        e.1 += 1;
    }
    let mut by_src: BTreeMap<usize, AlignmentLink> = BTreeMap::new();
    for ((s, t), (sum, k)) in sums {
        let mean = sum / k as f64;
        if mean > threshold {
            let l = by_src.entry(s).or_insert_with(|| AlignmentLink {
                src_word: s,
                tgt_words: Vec::new(),
                scores: Vec::new(),
            });
            l.tgt_words.push(t);
            l.scores.push(mean);
        }
    }
    WordAlignment {
        unaligned: (0..n_src_words).filter(|s| !by_src.contains_key(s)).collect(),
        links: by_src.into_values().collect(),
    }
}

/// Assigns each subword to the word whose character span overlaps it most.
pub fn map_subwords(subwords: &[EmbeddedSubword], words: &[Option<Range<usize>>]) -> Vec<Option<usize>> {
    subwords
        .iter()
        .map(|s| {
            words
                .iter()
                .enumerate()
                .filter_map(|(w, span)| {
                    let span = span.as_ref()?;
                    let overlap = s.span.end.min(span.end).saturating_sub(s.span.start.max(span.start));
                    (overlap > 0).then_some((overlap, w))
                })
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
                .map(|(_, w)| w)
        })
        .collect()
}

/// One side of a segment pair as the aligner needs it.
pub struct AlignInput<'a> {
    pub text: &'a str,
    pub lang: &'a str,
    /// Character span of every word in `text`; None for words not in it.
    pub spans: &'a [Option<Range<usize>>],
}

/// Embeds both sides independently and aligns their words.
pub fn align_segment(
    encoder: &dyn EncoderAdapter,
    src: &AlignInput,
    tgt: &AlignInput,
    config: AlignConfig,
) -> Result<WordAlignment, AlignError> {
    let se = encoder.embed(src.text, src.lang)?;
    let te = encoder.embed(tgt.text, tgt.lang)?;
    let sv: Vec<Vec<f64>> = se.iter().map(|s| s.vector.clone()).collect();
    let tv: Vec<Vec<f64>> = te.iter().map(|s| s.vector.clone()).collect();
    let pairs = subword_align(&sv, &tv, config)?;
    Ok(aggregate_to_words(
        &pairs,
        &map_subwords(&se, src.spans),
        &map_subwords(&te, tgt.spans),
        src.spans.len(),
        config.threshold,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentStats {
    pub src_tokens: usize,
    pub pct_unaligned: f64,
    pub pct_multi: f64,
}

/// Unaligned and multi-aligned shares of source words (fillers and
/// expansion rows excluded).
pub fn alignment_stats(rows: &[WordRow]) -> Result<AlignmentStats, AlignError> {
    let words: Vec<&WordRow> = rows.iter().filter(|r| r.kind() == RowKind::Word).collect();
    if words.is_empty() {
        return Err(AlignError::NoRows);
    }
    let links = |r: &WordRow| r.aligned_word_id.as_ref().map_or(0, Vec::len);
    let unaligned = words.iter().filter(|r| links(r) == 0).count();
    let multi = words.iter().filter(|r| links(r) > 1).count();
    let n = words.len() as f64;
    Ok(AlignmentStats {
        src_tokens: words.len(),
        pct_unaligned: 100.0 * unaligned as f64 / n,
        pct_multi: 100.0 * multi as f64 / n,
    })
}
