//! Corpus-level filtering, overlap removal, train/test splitting and
//! descriptive statistics. The pipeline order is fixed: empty-segment
//! filter, score filter, overlap removal, split.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ids::{ItemId, Mode};
use crate::records::{RowKind, WordRow};

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error("{lpair}: only {eligible} documents have at least {min_segments} segments, {needed} needed for the test split")]
    InsufficientDocs {
        lpair: String,
        eligible: usize,
        needed: usize,
        min_segments: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelSegment {
    pub src: String,
    pub tgt: String,
}

impl ParallelSegment {
    pub fn new(src: &str, tgt: &str) -> Self {
        ParallelSegment {
            src: src.to_string(),
            tgt: tgt.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentPair {
    pub doc_id: String,
    pub segments: Vec<ParallelSegment>,
    /// Mean sentence-alignment score of the document.
    pub alignment_score: Option<f64>,
    pub speaker: Option<String>,
    pub date: Option<String>,
    /// Language of the original speech.
    pub src_lang: String,
    /// `DE-EN` or `EN-DE`.
    pub lpair: String,
    pub mode: Mode,
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// What [`filter_empty_segments`] did to one document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmptyReport {
    /// Indices (in the input document) of removed segments.
    pub removed: Vec<usize>,
    /// Index of the interior segment that caused the document to be dropped.
    pub dropped_at: Option<usize>,
}

/// Handles half-empty segment pairs of written documents. A pair inside
/// the document whose non-empty side has more than three words drops the
/// whole document; pairs at either edge (including runs of them) and
/// short ones are removed on their own. Spoken documents pass unchanged.
pub fn filter_empty_segments(doc: DocumentPair) -> (Option<DocumentPair>, EmptyReport) {
    let mut report = EmptyReport::default();
    if doc.mode == Mode::Spoken {
        return (Some(doc), report);
    }
    let empty: Vec<bool> = doc
        .segments
        .iter()
        .map(|s| s.src.trim().is_empty() || s.tgt.trim().is_empty())
        .collect();
    let n = empty.len();
    let lead = empty.iter().take_while(|&&e| e).count();
    let trail = empty.iter().rev().take_while(|&&e| e).count();
    for (i, s) in doc.segments.iter().enumerate() {
        if !empty[i] {
            continue;
        }
        let edge = i < lead || i >= n - trail;
        let other = word_count(&s.src).max(word_count(&s.tgt));
        if !edge && other > 3 {
            report.dropped_at = Some(i);
            report.removed.clear();
            return (None, report);
        }
        report.removed.push(i);
    }
    let removed: HashSet<usize> = report.removed.iter().copied().collect();
    let segments = doc
        .segments
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, s)| s)
        .collect();
    (Some(DocumentPair { segments, ..doc }), report)
}

/// Document-score cutoffs per translation direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCutoffs {
    pub by_lpair: BTreeMap<String, f64>,
}

impl Default for ScoreCutoffs {
    fn default() -> Self {
        ScoreCutoffs {
            by_lpair: [("DE-EN".to_string(), 0.3), ("EN-DE".to_string(), 0.5)].into(),
        }
    }
}

impl ScoreCutoffs {
    pub fn cutoff(&self, lpair: &str) -> Option<f64> {
        self.by_lpair.get(lpair).copied()
    }
}

/// Keeps documents whose alignment score is strictly above `cutoff`.
pub fn filter_by_score(docs: Vec<DocumentPair>, cutoff: f64) -> Vec<DocumentPair> {
    docs.into_iter()
        .filter(|d| match d.alignment_score {
            Some(s) => s > cutoff,
            None => {
                warn!("{}: no alignment score, document excluded", d.doc_id);
                false
            }
        })
        .collect()
}

/// [`filter_by_score`] with the cutoff of each document's direction.
/// Documents of a direction without a cutoff are kept.
pub fn filter_by_direction(docs: Vec<DocumentPair>, cutoffs: &ScoreCutoffs) -> Vec<DocumentPair> {
    let mut by: BTreeMap<String, Vec<DocumentPair>> = BTreeMap::new();
    let mut order = Vec::new();
    for d in docs {
        order.push(d.doc_id.clone());
        by.entry(d.lpair.clone()).or_default().push(d);
    }
    let mut kept: Vec<DocumentPair> = Vec::new();
    for (lpair, group) in by {
        match cutoffs.cutoff(&lpair) {
            Some(c) => kept.extend(filter_by_score(group, c)),
            None => kept.extend(group),
        }
    }
    let rank: BTreeMap<&String, usize> = order.iter().enumerate().map(|(i, d)| (d, i)).collect();
    kept.sort_by_key(|d| rank[&d.doc_id]);
    kept
}

/// Identifies the same speech across modes.
pub type OverlapKey = (String, String, String);

/// The default matcher: date, speaker and original language, when all known.
pub fn default_overlap_key(doc: &DocumentPair) -> Option<OverlapKey> {
    Some((doc.date.clone()?, doc.speaker.clone()?, doc.src_lang.clone()))
}

/// Removes written documents whose speech also appears in the spoken
/// set. Returns the kept and the removed documents.
pub fn remove_overlap(
    written: Vec<DocumentPair>,
    spoken: &[DocumentPair],
    key: impl Fn(&DocumentPair) -> Option<OverlapKey>,
) -> (Vec<DocumentPair>, Vec<DocumentPair>) {
    let spoken_keys: HashSet<OverlapKey> = spoken.iter().filter_map(&key).collect();
    written
        .into_iter()
        .partition(|d| !key(d).is_some_and(|k| spoken_keys.contains(&k)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub test_docs: usize,
    pub min_segments: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_docs: 170,
            min_segments: 12,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Splits {
    pub test: Vec<DocumentPair>,
    pub train: Vec<DocumentPair>,
    /// Train documents left out to balance the directions.
    pub unused: Vec<DocumentPair>,
}

fn direction_rng(seed: u64, lpair: &str) -> ChaCha8Rng {
    let salt = lpair.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
    ChaCha8Rng::seed_from_u64(seed ^ salt)
}

fn total_segments(docs: &[DocumentPair]) -> usize {
    docs.iter().map(|d| d.segments.len()).sum()
}

/// Picks `test_docs` documents with at least `min_segments` segments per
/// direction so that their segment total approaches the spoken total of
/// that direction: each pick is the document closest to the remaining
/// target divided by the remaining picks, ties broken by a seeded
/// shuffle. The rest is train; the direction with more train segments
/// is randomly subsampled by document until it just reaches the other.
pub fn make_splits(
    written: Vec<DocumentPair>,
    spoken_segments: &BTreeMap<String, usize>,
    config: &SplitConfig,
) -> Result<Splits, BuildError> {
    let mut by: BTreeMap<String, Vec<DocumentPair>> = BTreeMap::new();
    for d in written {
        by.entry(d.lpair.clone()).or_default().push(d);
    }
    let mut splits = Splits::default();
    let mut train_by: BTreeMap<String, Vec<DocumentPair>> = BTreeMap::new();
    for (lpair, mut docs) in by {
        let mut rng = direction_rng(config.seed, &lpair);
        docs.shuffle(&mut rng);
        let (mut pool, rest): (Vec<_>, Vec<_>) = docs
            .into_iter()
            .partition(|d| d.segments.len() >= config.min_segments);
        if pool.len() < config.test_docs {
            return Err(BuildError::InsufficientDocs {
                lpair,
                eligible: pool.len(),
                needed: config.test_docs,
                min_segments: config.min_segments,
            });
        }
        let target = spoken_segments
            .get(&lpair)
            .copied()
            .unwrap_or(config.test_docs * config.min_segments);
        let mut remaining = target as f64;
        let mut test = Vec::with_capacity(config.test_docs);
        for k in 0..config.test_docs {
            let want = remaining / (config.test_docs - k) as f64;
            let best = pool
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    let da = (a.segments.len() as f64 - want).abs();
                    let db = (b.segments.len() as f64 - want).abs();
                    da.total_cmp(&db)
                })
                .map(|(i, _)| i)
                .expect("pool holds enough documents");
            let doc = pool.remove(best);
            remaining -= doc.segments.len() as f64;
            test.push(doc);
        }
        let mut train = pool;
        train.extend(rest);
        splits.test.extend(test);
        train_by.insert(lpair, train);
    }
    if let Some(smallest) = train_by.values().map(|d| total_segments(d)).min() {
        for (lpair, docs) in train_by {
            if total_segments(&docs) == smallest {
                splits.train.extend(docs);
                continue;
            }
            let mut rng = direction_rng(config.seed.wrapping_add(1), &lpair);
            let mut docs = docs;
            docs.shuffle(&mut rng);
            let mut total = 0;
            for d in docs {
                if total < smallest {
                    total += d.segments.len();
                    splits.train.push(d);
                } else {
                    splits.unused.push(d);
                }
            }
        }
    }
    Ok(splits)
}

/// Descriptive statistics of one (mode, lpair, ttype) group of vertical rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub mode: String,
    pub lpair: String,
    pub ttype: String,
    /// Surface words and fillers; multiwords counted once.
    pub words: usize,
    pub segs: usize,
    pub docs: usize,
    pub pct_empty: f64,
    pub fps: usize,
    pub pct_segs_with_fp: f64,
    pub mean_len: f64,
    pub sd_len: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub pct_multi_sentence: f64,
}

#[derive(Default)]
struct SegAcc {
    len: usize,
    fps: usize,
    roots: usize,
}

/// Statistics per (mode, lpair, ttype) of vertical rows. A segment is
/// empty when it has no word or filler rows; it is multi-sentence when
/// more than one of its rows has CoNLL-U id 1.
pub fn describe(rows: &[WordRow]) -> Vec<CorpusStats> {
    type Key = (String, String, String);
    let mut groups: BTreeMap<Key, (BTreeMap<ItemId, SegAcc>, BTreeSet<String>)> = BTreeMap::new();
    for r in rows {
        let id = &r.word_id;
        let key = (
            id.mode.map(|m| m.code().to_string()).unwrap_or_default(),
            id.lpair(),
            id.ttype.clone(),
        );
        let (segs, docs) = groups.entry(key).or_default();
        docs.insert(id.doc_key());
        let acc = segs.entry(id.segment_id()).or_default();
        match r.kind() {
            RowKind::Word => acc.len += 1,
            RowKind::Filler => {
                acc.len += 1;
                acc.fps += 1;
            }
            RowKind::Expansion | RowKind::Empty => {}
        }
        if r.conllu.id.as_deref() == Some("1") {
            acc.roots += 1;
        }
    }
    groups
        .into_iter()
        .map(|((mode, lpair, ttype), (segs, docs))| {
            let n = segs.len();
            let lens: Vec<f64> = segs.values().map(|s| s.len as f64).collect();
            let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
            let mean = if n == 0 { 0.0 } else { lens.iter().sum::<f64>() / n as f64 };
            let sd = if n < 2 {
                0.0
            } else {
                (lens.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            };
            CorpusStats {
                mode,
                lpair,
                ttype,
                words: segs.values().map(|s| s.len).sum(),
                segs: n,
                docs: docs.len(),
                pct_empty: pct(segs.values().filter(|s| s.len == 0).count()),
                fps: segs.values().map(|s| s.fps).sum(),
                pct_segs_with_fp: pct(segs.values().filter(|s| s.fps > 0).count()),
                mean_len: mean,
                sd_len: sd,
                min_len: segs.values().map(|s| s.len).min().unwrap_or(0),
                max_len: segs.values().map(|s| s.len).max().unwrap_or(0),
                pct_multi_sentence: pct(segs.values().filter(|s| s.roots > 1).count()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, lpair: &str, segs: &[(&str, &str)]) -> DocumentPair {
        DocumentPair {
            doc_id: id.to_string(),
            segments: segs.iter().map(|(s, t)| ParallelSegment::new(s, t)).collect(),
            alignment_score: Some(0.9),
            speaker: None,
            date: None,
            src_lang: lpair[..2].to_string(),
            lpair: lpair.to_string(),
            mode: Mode::Written,
        }
    }

    fn sized(id: usize, lpair: &str, n: usize) -> DocumentPair {
        doc(&format!("{lpair}{id}"), lpair, &vec![("a", "b"); n])
    }

    const TEN: &str = "one two three four five six seven eight nine ten";

    #[test]
    fn interior_empty_drops_document() {
        let d = doc("d", "DE-EN", &[("a", "b"), (TEN, ""), ("c", "d")]);
        let (kept, report) = filter_empty_segments(d);
        assert!(kept.is_none());
        assert_eq!(report.dropped_at, Some(1));
    }

    #[test]
    fn edge_and_short_empties_are_removed() {
        let d = doc("d", "DE-EN", &[("a", "b"), ("one two three", ""), ("c", "d"), ("", TEN)]);
        let (kept, report) = filter_empty_segments(d);
        assert_eq!(kept.unwrap().segments, [ParallelSegment::new("a", "b"), ParallelSegment::new("c", "d")]);
        assert_eq!(report.removed, [1, 3]);
        let clean = doc("d", "DE-EN", &[("a", "b")]);
        assert_eq!(filter_empty_segments(clean.clone()).0, Some(clean));
        let mut spoken = doc("s", "DE-EN", &[("a", "b"), (TEN, ""), ("c", "d")]);
        spoken.mode = Mode::Spoken;
        assert_eq!(filter_empty_segments(spoken.clone()).0, Some(spoken));
    }

    #[test]
    fn score_cutoffs() {
        let mut a = doc("a", "DE-EN", &[]);
        a.alignment_score = Some(0.2);
        let mut b = doc("b", "DE-EN", &[]);
        b.alignment_score = Some(0.4);
        let mut c = doc("c", "EN-DE", &[]);
        c.alignment_score = Some(0.4);
        let mut d = doc("d", "EN-DE", &[]);
        d.alignment_score = None;
        let kept = filter_by_score(vec![a.clone(), b.clone()], 0.3);
        assert_eq!(kept, [b.clone()]);
        let kept = filter_by_direction(vec![a, b.clone(), c, d], &ScoreCutoffs::default());
        assert_eq!(kept, [b]);
        assert!(filter_by_score(vec![], 0.3).is_empty());
    }

    #[test]
    fn overlap_by_key() {
        let with = |id: &str, date: &str, spk: &str| {
            let mut d = doc(id, "EN-DE", &[]);
            d.date = Some(date.into());
            d.speaker = Some(spk.into());
            d
        };
        let written = vec![with("w1", "2010-01-01", "x"), with("w2", "2010-01-02", "x"), doc("w3", "EN-DE", &[])];
        let spoken = vec![with("s1", "2010-01-02", "x")];
        let (kept, removed) = remove_overlap(written, &spoken, default_overlap_key);
        assert_eq!(removed.iter().map(|d| d.doc_id.as_str()).collect::<Vec<_>>(), ["w2"]);
        assert_eq!(kept.len(), 2);
        let (kept, removed) = remove_overlap(kept, &[], default_overlap_key);
        assert_eq!((kept.len(), removed.len()), (2, 0));
    }

    fn corpus(seed: u64) -> Vec<DocumentPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut docs = Vec::new();
        for (lpair, n) in [("DE-EN", 1000), ("EN-DE", 800)] {
            for i in 0..n {
                let len = rand::Rng::random_range(&mut rng, 3..40);
                docs.push(sized(i, lpair, len));
            }
        }
        docs
    }

    fn spoken_sizes() -> BTreeMap<String, usize> {
        [("DE-EN".to_string(), 3249), ("EN-DE".to_string(), 3440)].into()
    }

    #[test]
    fn splits_hit_targets_and_balance() {
        let docs = corpus(4);
        let s = make_splits(docs.clone(), &spoken_sizes(), &SplitConfig::default()).unwrap();
        for (lpair, target) in spoken_sizes() {
            let test: Vec<&DocumentPair> = s.test.iter().filter(|d| d.lpair == lpair).collect();
            assert_eq!(test.len(), 170);
            assert!(test.iter().all(|d| d.segments.len() >= 12));
            let total: usize = test.iter().map(|d| d.segments.len()).sum();
            assert!(total.abs_diff(target) <= 10, "{lpair}: {total} vs {target}");
        }
        let train = |l: &str| s.train.iter().filter(|d| d.lpair == l).map(|d| d.segments.len()).sum::<usize>();
        let max_doc = docs.iter().map(|d| d.segments.len()).max().unwrap();
        assert!(train("DE-EN").abs_diff(train("EN-DE")) <= max_doc);
        assert_eq!(s, make_splits(docs, &spoken_sizes(), &SplitConfig::default()).unwrap());
    }

    #[test]
    fn too_few_long_documents() {
        let docs: Vec<DocumentPair> = (0..5).map(|i| sized(i, "DE-EN", 20)).collect();
        let err = make_splits(docs, &spoken_sizes(), &SplitConfig::default()).unwrap_err();
        assert!(matches!(err, BuildError::InsufficientDocs { eligible: 5, .. }));
    }

    fn vrow(id: &str, token: &str, conllu_id: Option<&str>, pos: &str) -> WordRow {
        let mut r = WordRow::new(ItemId::parse(id).unwrap());
        r.conllu.token = Some(token.into());
        r.conllu.id = conllu_id.map(str::to_string);
        r.conllu.pos = Some(pos.into());
        r
    }

    #[test]
    fn description_counts() {
        let rows = vec![
            vrow("ORG_SP_DE_EN_001-01:001", "Ja", Some("1"), "X"),
            vrow("ORG_SP_DE_EN_001-01:002", "euh", None, "FP"),
            vrow("ORG_SP_DE_EN_001-01:003", "gut", Some("2"), "X"),
            vrow("ORG_SP_DE_EN_001-02:001", "zum", None, "X"),
            vrow("ORG_SP_DE_EN_001-02:001:1", "zu", Some("1"), "X"),
            vrow("ORG_SP_DE_EN_001-02:001:2", "dem", Some("2"), "X"),
            vrow("ORG_SP_DE_EN_001-02:002", "Nein", Some("1"), "X"),
            WordRow::new(ItemId::parse("ORG_SP_DE_EN_002-01").unwrap()),
            vrow("ORG_SP_DE_EN_002-02:001", "so", Some("1"), "X"),
        ];
        let s = &describe(&rows)[0];
        assert_eq!((s.segs, s.docs, s.words, s.fps), (4, 2, 6, 1));
        assert_eq!(s.pct_empty, 25.0);
        assert_eq!(s.pct_segs_with_fp, 25.0);
        assert_eq!(s.pct_multi_sentence, 25.0);
        assert_eq!((s.min_len, s.max_len), (0, 3));
        assert_eq!(s.mean_len, 1.5);
        let var = (1.5f64.powi(2) * 2.0 + 0.5f64.powi(2) * 2.0) / 3.0;
        assert!((s.sd_len - var.sqrt()).abs() < 1e-12);
        assert!(describe(&[]).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn split_partitions_input(seed in 0u64..20) {
            let docs = corpus(seed);
            let s = make_splits(docs.clone(), &spoken_sizes(), &SplitConfig { seed, ..Default::default() }).unwrap();
            let mut ids: Vec<String> = s.test.iter().chain(&s.train).chain(&s.unused).map(|d| d.doc_id.clone()).collect();
            let test: HashSet<&String> = s.test.iter().map(|d| &d.doc_id).collect();
            prop_assert!(s.train.iter().all(|d| !test.contains(&d.doc_id)));
            ids.sort();
            let mut want: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
            want.sort();
            prop_assert_eq!(ids, want);
        }
    }
}
