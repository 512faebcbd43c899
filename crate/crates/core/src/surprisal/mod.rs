//! Word-level surprisal from causal LM and MT adapters.
//!
//! Subword scores are grouped into units at word starts (punctuation kept
//! apart) and then mapped onto the parser's words by [`realign_cascade`].

pub mod bleu;
pub mod cascade;

use log::warn;

use crate::adapter::{ingest, AdapterError, CausalLm, MtAdapter, SubwordScore};
pub use cascade::{realign_cascade, Block, RecoveryRule, Unit, WordSurprisal};

/// Subwords kept by bounded scoring.
pub const DEFAULT_CAP: usize = 150;
/// Subwords of context (including the scored one) in sliding-window mode.
pub const DEFAULT_WINDOW: usize = 64;

/// The scores of one segment for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSegment {
    pub words: Vec<WordSurprisal>,
    /// Surprisal of every subword that was scored, in order.
    pub subword_bits: Vec<f64>,
    pub units: Vec<Unit>,
    pub blocks: Vec<Block>,
    /// Why the segment has no scores, when it has none.
    pub reason: Option<String>,
}

impl ScoredSegment {
    /// All words null, with a reason.
    pub fn unscored(n_words: usize, reason: impl Into<String>) -> Self {
        ScoredSegment {
            words: (0..n_words)
                .map(|j| WordSurprisal {
                    word_index: j,
                    bits: None,
                    n_subwords: 0,
                    rule: RecoveryRule::Failed,
                })
                .collect(),
            subword_bits: Vec::new(),
            units: Vec::new(),
            blocks: Vec::new(),
            reason: Some(reason.into()),
        }
    }

    fn from_subwords<W: AsRef<str>>(subwords: &[SubwordScore], words: &[W]) -> Self {
        let units = preaggregate(subwords);
        let r = realign_cascade(&units, words);
        ScoredSegment {
            words: r.words,
            subword_bits: subwords.iter().map(SubwordScore::bits).collect(),
            units,
            blocks: r.blocks,
            reason: None,
        }
    }

    pub fn bits(&self) -> Vec<Option<f64>> {
        self.words.iter().map(|w| w.bits).collect()
    }
}

/// Groups subwords into word units. Punctuation-only subwords at either
/// edge of a group become units of their own; punctuation inside a word
/// stays with it.
pub fn preaggregate(subwords: &[SubwordScore]) -> Vec<Unit> {
    let mut groups: Vec<&[SubwordScore]> = Vec::new();
    let mut start = 0;
    for i in 1..=subwords.len() {
        if i == subwords.len() || subwords[i].begins_word {
            if i > start {
                groups.push(&subwords[start..i]);
            }
            start = i;
        }
    }
    let single = |s: &SubwordScore| Unit::new(&s.surface, s.bits());
    let mut units = Vec::new();
    for g in groups {
        let lead = g.iter().take_while(|s| s.is_punct_unit).count();
        if lead == g.len() {
            units.extend(g.iter().map(single));
            continue;
        }
        let trail = g.iter().rev().take_while(|s| s.is_punct_unit).count();
        units.extend(g[..lead].iter().map(single));
        let core = &g[lead..g.len() - trail];
        units.push(Unit {
            surface: core.iter().map(|s| s.surface.as_str()).collect(),
            bits: core.iter().map(SubwordScore::bits).sum(),
            n_subwords: core.len(),
        });
        units.extend(g[g.len() - trail..].iter().map(single));
    }
    units
}

fn failed<W>(words: &[W], role: &str, err: &AdapterError) -> ScoredSegment {
    warn!("{role}: segment left unscored: {err}");
    ScoredSegment::unscored(words.len(), err.to_string())
}

/// Scores `text` left to right and maps the first `cap` subwords onto
/// `words` (the surface tokens of the text, FPs removed). Words past the
/// cap come back null.
pub fn score_segment_bounded<W: AsRef<str>>(
    lm: &dyn CausalLm,
    text: &str,
    words: &[W],
    cap: usize,
) -> ScoredSegment {
    if text.trim().is_empty() || words.is_empty() {
        return ScoredSegment::unscored(words.len(), "nothing to score");
    }
    let role = lm.identity();
    let scored = lm
        .score(text)
        .and_then(|raw| ingest(&role, lm.convention(), &raw[..raw.len().min(cap)]));
    match scored {
        Ok(subwords) => ScoredSegment::from_subwords(&subwords, words),
        Err(e) => failed(words, &role, &e),
    }
}

/// Like [`score_segment_bounded`] without the cap: subword `t >= window`
/// (0-based) is rescored with only the `window - 1` subwords before it as
/// context.
pub fn score_sliding_window<W: AsRef<str>>(
    lm: &dyn CausalLm,
    text: &str,
    words: &[W],
    window: usize,
) -> ScoredSegment {
    if text.trim().is_empty() || words.is_empty() {
        return ScoredSegment::unscored(words.len(), "nothing to score");
    }
    let role = lm.identity();
    let scored = lm.score(text).and_then(|mut raw| {
        let surfaces: Vec<String> = raw.iter().map(|s| s.surface.clone()).collect();
        for t in window.max(1)..raw.len() {
            let ctx = &surfaces[t + 1 - window..=t];
            let last = lm.score_subwords(ctx)?.pop().ok_or_else(|| AdapterError::Invalid {
                role: role.clone(),
                message: "window rescoring returned no subwords".to_string(),
            })?;
            raw[t].logprob = last.logprob;
        }
        ingest(&role, lm.convention(), &raw)
    });
    match scored {
        Ok(subwords) => ScoredSegment::from_subwords(&subwords, words),
        Err(e) => failed(words, &role, &e),
    }
}

/// Target-side surprisal under teacher forcing. `words` are the target
/// surface tokens with FPs removed.
pub fn score_mt<W: AsRef<str>>(mt: &dyn MtAdapter, src: &str, tgt: &str, words: &[W]) -> ScoredSegment {
    if src.trim().is_empty() {
        return ScoredSegment::unscored(words.len(), "empty source");
    }
    if tgt.trim().is_empty() || words.is_empty() {
        return ScoredSegment::unscored(words.len(), "empty target");
    }
    let role = mt.identity();
    match mt.score(src, tgt).and_then(|raw| ingest(&role, mt.convention(), &raw)) {
        Ok(subwords) => ScoredSegment::from_subwords(&subwords, words),
        Err(e) => failed(words, &role, &e),
    }
}

/// Sentence BLEU of the argmax prediction against the gold target.
pub fn pseudo_bleu(mt: &dyn MtAdapter, src: &str, tgt: &str) -> Result<f64, AdapterError> {
    let predicted = mt.predict_argmax(src, tgt)?;
    if predicted.is_empty() {
        warn!("{}: empty argmax prediction, BLEU set to 0", mt.identity());
        return Ok(0.0);
    }
    let hyp = mt.convention().detokenize(&predicted);
    Ok(bleu::sentence_bleu(&hyp, tgt))
}

/// Mean word surprisal (non-null words only) and mean subword surprisal.
pub fn segment_aggregates(seg: &ScoredSegment) -> (Option<f64>, Option<f64>) {
    let words: Vec<f64> = seg.words.iter().filter_map(|w| w.bits).collect();
    if words.is_empty() {
        return (None, None);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let subw = (!seg.subword_bits.is_empty()).then(|| mean(&seg.subword_bits));
    (Some(mean(&words)), subw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::mock::{tokenize, HashLm, HashMt};
    use crate::adapter::{Convention, LogBase, RawSubword};
    use proptest::prelude::*;
    use std::collections::HashMap;

    /// Replays fixed per-subword probabilities for whole-text scoring.
    struct TableLm {
        conv: Convention,
        subwords: Vec<(String, f64)>,
    }

    impl CausalLm for TableLm {
        fn identity(&self) -> String {
            "table".into()
        }
        fn convention(&self) -> &Convention {
            &self.conv
        }
        fn score(&self, _text: &str) -> Result<Vec<RawSubword>, AdapterError> {
            Ok(self
                .subwords
                .iter()
                .map(|(s, p)| RawSubword {
                    surface: s.clone(),
                    logprob: p.log2(),
                    begins_word: None,
                })
                .collect())
        }
        fn score_subwords(&self, _s: &[String]) -> Result<Vec<RawSubword>, AdapterError> {
            unreachable!()
        }
    }

    fn table(v: &[(&str, f64)]) -> TableLm {
        TableLm {
            conv: Convention {
                begin_marker: Some("Ġ".into()),
                byte_level: true,
                log_base: LogBase::Two,
            },
            subwords: v.iter().map(|(s, p)| (s.to_string(), *p)).collect(),
        }
    }

    #[test]
    fn one_subword_at_half_is_one_bit() {
        let lm = table(&[("Yes", 0.5)]);
        let s = score_segment_bounded(&lm, "Yes", &["Yes"], DEFAULT_CAP);
        assert_eq!(s.bits(), [Some(1.0)]);
    }

    #[test]
    fn subword_bits_add() {
        let lm = table(&[("Absicht", 0.25), ("en", 0.5)]);
        let s = score_segment_bounded(&lm, "Absichten", &["Absichten"], DEFAULT_CAP);
        let oracle = -(0.25f64 * 0.5).log2();
        assert!((s.bits()[0].unwrap() - oracle).abs() < 1e-12);
        assert_eq!(s.words[0].n_subwords, 2);
    }

    #[test]
    fn punctuation_is_kept_apart() {
        let lm = table(&[("(", 0.5), ("well", 0.5), ("-", 0.5), ("int", 0.5), (").", 0.5), ("Ġok", 0.5)]);
        let subwords = ingest("t", lm.convention(), &lm.score("").unwrap()).unwrap();
        let surf: Vec<String> = preaggregate(&subwords).into_iter().map(|u| u.surface).collect();
        assert_eq!(surf, ["(", "well-int", ").", "ok"]);
    }

    #[test]
    fn cap_nulls_trailing_words() {
        let lm = table(&[("a", 0.5), ("Ġb", 0.5), ("Ġc", 0.5)]);
        let s = score_segment_bounded(&lm, "a b c", &["a", "b", "c"], 2);
        assert_eq!(s.bits(), [Some(1.0), Some(1.0), None]);
        assert_eq!(s.words[2].rule, RecoveryRule::Failed);
        assert_eq!(s.subword_bits.len(), 2);
    }

    #[test]
    fn adapter_failure_keeps_segment() {
        struct Broken(Convention);
        impl CausalLm for Broken {
            fn identity(&self) -> String {
                "broken".into()
            }
            fn convention(&self) -> &Convention {
                &self.0
            }
            fn score(&self, _: &str) -> Result<Vec<RawSubword>, AdapterError> {
                Err(AdapterError::Remote {
                    role: "broken".into(),
                    message: "down".into(),
                })
            }
            fn score_subwords(&self, _: &[String]) -> Result<Vec<RawSubword>, AdapterError> {
                unreachable!()
            }
        }
        let s = score_segment_bounded(&Broken(Convention::gpt2()), "a b", &["a", "b"], DEFAULT_CAP);
        assert_eq!(s.bits(), [None, None]);
        assert!(s.reason.is_some());
    }

    fn long_text(n: usize) -> (String, Vec<String>) {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        (words.join(" "), words)
    }

    #[test]
    fn window_matches_bounded_on_short_segments() {
        let lm = HashLm::new(3);
        let (text, words) = long_text(30);
        let a = score_segment_bounded(&lm, &text, &words, DEFAULT_CAP);
        let b = score_sliding_window(&lm, &text, &words, DEFAULT_WINDOW);
        assert_eq!(a, b);
    }

    /// Records the context every `score_subwords` call receives.
    struct Spy {
        inner: HashLm,
        calls: std::sync::Mutex<HashMap<String, Vec<String>>>,
    }

    impl CausalLm for Spy {
        fn identity(&self) -> String {
            self.inner.identity()
        }
        fn convention(&self) -> &Convention {
            self.inner.convention()
        }
        fn score(&self, text: &str) -> Result<Vec<RawSubword>, AdapterError> {
            self.inner.score(text)
        }
        fn score_subwords(&self, s: &[String]) -> Result<Vec<RawSubword>, AdapterError> {
            self.calls
                .lock()
                .unwrap()
                .insert(s.last().unwrap().clone(), s.to_vec());
            self.inner.score_subwords(s)
        }
    }

    #[test]
    fn window_conditions_on_previous_63() {
        let (text, words) = long_text(70);
        let spy = Spy {
            inner: HashLm::new(9),
            calls: Default::default(),
        };
        let s = score_sliding_window(&spy, &text, &words, DEFAULT_WINDOW);
        let subwords = tokenize(&text, "Ġ", 4);
        assert_eq!(subwords.len(), 70);
        // Subword 70 (1-based) sees subwords 7..69 before it.
        let ctx = spy.calls.lock().unwrap()[&subwords[69]].clone();
        assert_eq!(ctx, subwords[6..70]);
        let direct = spy.inner.score_subwords(&subwords[6..70]).unwrap();
        let oracle = -direct.last().unwrap().logprob / std::f64::consts::LN_2;
        assert!((s.subword_bits[69] - oracle).abs() < 1e-12);
        let full = spy.inner.score(&text).unwrap();
        assert!((s.subword_bits[69] + full[69].logprob / std::f64::consts::LN_2).abs() > 1e-9);
    }

    #[test]
    fn certain_mt_gives_zero_bits() {
        let mt = HashMt::constant(1.0);
        let s = score_mt(&mt, "Das ist gut", "That is good", &["That", "is", "good"]);
        assert_eq!(s.bits(), [Some(0.0); 3]);
        assert_eq!(score_mt(&mt, "", "x", &["x"]).reason.as_deref(), Some("empty source"));
        assert_eq!(score_mt(&mt, "x", " ", &["x"]).reason.as_deref(), Some("empty target"));
    }

    #[test]
    fn copying_mt_scores_100_bleu() {
        let mt = HashMt::constant(1.0);
        assert_eq!(pseudo_bleu(&mt, "Das ist gut", "That is good.").unwrap(), 100.0);
    }

    #[test]
    fn aggregates() {
        let mut s = ScoredSegment::unscored(3, "");
        s.words[0].bits = Some(2.0);
        s.words[2].bits = Some(4.0);
        s.subword_bits = vec![1.0, 1.0, 4.0];
        assert_eq!(segment_aggregates(&s), (Some(3.0), Some(2.0)));
        assert_eq!(segment_aggregates(&ScoredSegment::unscored(2, "")), (None, None));
    }

    proptest! {
        #[test]
        fn prefix_scoring_is_stable(n in 2usize..25, k in 1usize..25, seed in 0u64..50) {
            let k = k.min(n);
            let lm = HashLm::new(seed);
            let (text, words) = long_text(n);
            let (ptext, pwords) = long_text(k);
            let full = score_segment_bounded(&lm, &text, &words, DEFAULT_CAP);
            let pre = score_segment_bounded(&lm, &ptext, &pwords, DEFAULT_CAP);
            prop_assert_eq!(&full.bits()[..k], &pre.bits()[..]);
        }

        #[test]
        fn scored_words_conserve_subword_bits(n in 1usize..40, seed in 0u64..50) {
            let lm = HashLm::new(seed);
            let words: Vec<String> = (0..n)
                .map(|i| match i % 5 { 0 => "Hello.".into(), 1 => "p.m.".into(), 2 => "(x)".into(), 3 => "well-intended".into(), _ => format!("{i}%") })
                .collect();
            let text = words.join(" ");
            let s = score_segment_bounded(&lm, &text, &words, DEFAULT_CAP);
            let total: f64 = s.subword_bits.iter().sum();
            let assigned: f64 = s.words.iter().filter_map(|w| w.bits).sum();
            prop_assert!(s.words.iter().all(|w| w.rule != RecoveryRule::Failed));
            prop_assert!((total - assigned).abs() < 1e-9 * total.max(1.0));
        }
    }
}
