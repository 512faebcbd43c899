//! Annotation of one aligned segment pair end to end: cleaning, parsing,
//! surprisal from every configured model, word alignment and the
//! segment-level aggregates.

use log::warn;

use crate::adapter::{CausalLm, EncoderAdapter, MtAdapter, ParserAdapter};
use crate::align::{align_segment, AlignConfig, AlignInput, WordAlignment};
use crate::annotate::{annotate_segment, row_meta, segment_lang, TokenizedSegment};
use crate::ids::{IdWidths, ItemId};
use crate::records::{is_filler, SegmentPairRecord, SegmentRecord, SurprisalColumn, WordRow};
use crate::standardize::standardize;
use crate::surprisal::{
    pseudo_bleu, score_mt, score_segment_bounded, score_sliding_window, segment_aggregates, ScoredSegment,
    DEFAULT_CAP,
};
use crate::transcript::{normalize_segment, SegmentDisfluencyCounts};

/// The models available to a run. Absent models leave their columns NA.
#[derive(Clone, Copy)]
pub struct Models<'a> {
    pub parser: &'a dyn ParserAdapter,
    pub lm_base: Option<&'a dyn CausalLm>,
    pub lm_ft: Option<&'a dyn CausalLm>,
    pub mt_base: Option<&'a dyn MtAdapter>,
    pub mt_ft: Option<&'a dyn MtAdapter>,
    pub encoder: Option<&'a dyn EncoderAdapter>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub cap: usize,
    /// Score with a sliding window of this many subwords instead of the
    /// bounded left context.
    pub window: Option<usize>,
    pub align: AlignConfig,
    pub widths: IdWidths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cap: DEFAULT_CAP,
            window: None,
            align: AlignConfig::default(),
            widths: IdWidths::default(),
        }
    }
}

/// One side of an input pair. Spoken sides are transcripts in the
/// disfluency notation; written sides are plain text.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInput {
    pub id: ItemId,
    pub text: String,
    pub speaker_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairInput {
    pub src: SideInput,
    pub tgt: SideInput,
    pub spoken: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSide {
    pub segment: TokenizedSegment,
    pub record: SegmentRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedPair {
    pub src: AnnotatedSide,
    pub tgt: AnnotatedSide,
    pub pair: SegmentPairRecord,
}

impl AnnotatedPair {
    /// Vertical rows, source side first.
    pub fn rows(&self) -> impl Iterator<Item = &WordRow> {
        self.src.segment.rows.iter().chain(&self.tgt.segment.rows)
    }
}

/// Cleans a side: transcripts are normalized first, then every text is
/// standardized. Returns the clean text, filler token positions and the
/// disfluency counts (spoken only).
pub fn clean_side(text: &str, lang: &str, spoken: bool) -> (String, Vec<usize>, Option<SegmentDisfluencyCounts>) {
    if !spoken {
        return (standardize(text, lang), Vec::new(), None);
    }
    let n = normalize_segment(text);
    let clean = standardize(&n.clean, lang);
    let fps = clean
        .split_whitespace()
        .enumerate()
        .filter(|(_, t)| is_filler(t))
        .map(|(i, _)| i)
        .collect();
    (clean, fps, Some(n.counts))
}

fn prepare(side: &SideInput, spoken: bool, models: &Models, config: &PipelineConfig) -> AnnotatedSide {
    let lang = segment_lang(&side.id).to_lowercase();
    let (clean, fps, counts) = clean_side(&side.text, &lang, spoken);
    let meta = row_meta(&side.id, side.speaker_id.as_deref());
    let mut segment = annotate_segment(&side.id, &clean, &fps, &meta, config.widths, models.parser);
    for r in &mut segment.rows {
        r.raw_seg = Some(clean.clone());
    }
    let mut record = SegmentRecord::new(side.id.segment_id());
    record.doc_id = meta.doc_id.clone();
    record.lpair = meta.lpair.clone();
    record.lang = meta.lang.clone();
    record.mode = meta.mode.clone();
    record.ttype = meta.ttype.clone();
    record.speaker_id = meta.speaker_id.clone();
    record.raw_seg = Some(clean);
    record.tokens = Some(segment.tokens_line());
    record.wc_tok = Some(segment.word_count() as u32);
    if let Some(c) = counts {
        record.disfluencies = Some(c.disfluencies);
        record.fillers = Some(c.fillers);
        record.fillers_plus_3 = Some(c.fillers_plus_3);
    }
    AnnotatedSide { segment, record }
}

fn write_bits(segment: &mut TokenizedSegment, scored: &ScoredSegment, column: SurprisalColumn) {
    let rows: Vec<usize> = segment.scored_words().into_iter().map(|(i, _)| i).collect();
    for (w, i) in scored.words.iter().zip(rows) {
        *segment.rows[i].surprisal_mut(column) = w.bits;
    }
}

fn lm_score(lm: &dyn CausalLm, seg: &TokenizedSegment, config: &PipelineConfig) -> ScoredSegment {
    let words: Vec<&str> = seg.scored_words().into_iter().map(|(_, t)| t).collect();
    match config.window {
        Some(w) => score_sliding_window(lm, &seg.text, &words, w),
        None => score_segment_bounded(lm, &seg.text, &words, config.cap),
    }
}

fn score_side(side: &mut AnnotatedSide, models: &Models, config: &PipelineConfig) {
    for (lm, column) in [
        (models.lm_base, SurprisalColumn::BaseGpt2),
        (models.lm_ft, SurprisalColumn::FtGpt2),
    ] {
        let Some(lm) = lm else { continue };
        let scored = lm_score(lm, &side.segment, config);
        write_bits(&mut side.segment, &scored, column);
        let (tok, subw) = segment_aggregates(&scored);
        let r = &mut side.record;
        match column {
            SurprisalColumn::BaseGpt2 => (r.base_gpt_avs, r.base_gpt_avs_subw) = (tok, subw),
            _ => (r.ft_gpt_avs, r.ft_gpt_avs_subw) = (tok, subw),
        }
    }
}

fn score_translation(out: &mut AnnotatedPair, models: &Models) {
    let src = out.src.segment.text.clone();
    let tgt = out.tgt.segment.text.clone();
    for (mt, column) in [
        (models.mt_base, SurprisalColumn::BaseMt),
        (models.mt_ft, SurprisalColumn::FtMt),
    ] {
        let Some(mt) = mt else { continue };
        let words: Vec<String> = out
            .tgt
            .segment
            .scored_words()
            .into_iter()
            .map(|(_, t)| t.to_string())
            .collect();
        let scored = score_mt(mt, &src, &tgt, &words);
        write_bits(&mut out.tgt.segment, &scored, column);
        let (tok, subw) = segment_aggregates(&scored);
        let bleu = if src.trim().is_empty() || tgt.trim().is_empty() {
            None
        } else {
            pseudo_bleu(mt, &src, &tgt)
                .map_err(|e| warn!("{}: no BLEU: {e}", out.pair.tgt_seg_id))
                .ok()
        };
        let p = &mut out.pair;
        match column {
            SurprisalColumn::BaseMt => (p.base_mt_avs, p.base_mt_avs_subw, p.base_bleu) = (tok, subw, bleu),
            _ => (p.ft_mt_avs, p.ft_mt_avs_subw, p.ft_bleu) = (tok, subw, bleu),
        }
    }
}

/// Writes alignment lists onto both sides: source rows list their target
/// words, target rows the source words linked to them.
pub fn apply_alignment(src: &mut TokenizedSegment, tgt: &mut TokenizedSegment, alignment: &WordAlignment) {
    let src_rows: Vec<usize> = src.scored_words().into_iter().map(|(i, _)| i).collect();
    let tgt_rows: Vec<usize> = tgt.scored_words().into_iter().map(|(i, _)| i).collect();
    let describe = |seg: &TokenizedSegment, rows: &[usize], words: &[usize]| {
        let tokens = words.iter().map(|&w| seg.rows[rows[w]].token().unwrap_or("").to_string()).collect();
        let ids = words.iter().map(|&w| seg.rows[rows[w]].word_id.to_string()).collect();
        (tokens, ids)
    };
    for link in &alignment.links {
        let (tokens, ids) = describe(tgt, &tgt_rows, &link.tgt_words);
        let row = &mut src.rows[src_rows[link.src_word]];
        row.aligned_word = Some(tokens);
        row.aligned_word_id = Some(ids);
    }
    for (t, sources) in alignment.reverse() {
        let (tokens, ids) = describe(src, &src_rows, &sources);
        let row = &mut tgt.rows[tgt_rows[t]];
        row.aligned_word = Some(tokens);
        row.aligned_word_id = Some(ids);
    }
}

fn align_pair(out: &mut AnnotatedPair, encoder: &dyn EncoderAdapter, config: &PipelineConfig) {
    let (src, tgt) = (&out.src.segment, &out.tgt.segment);
    if src.word_count() == 0 || tgt.word_count() == 0 {
        return;
    }
    let spans = |seg: &TokenizedSegment| -> Vec<_> {
        seg.scored_words().into_iter().map(|(i, _)| seg.spans[i].clone()).collect()
    };
    let (ss, ts) = (spans(src), spans(tgt));
    let (sl, tl) = (segment_lang(&src.seg_id).to_lowercase(), segment_lang(&tgt.seg_id).to_lowercase());
    let result = align_segment(
        encoder,
        &AlignInput { text: &src.text, lang: &sl, spans: &ss },
        &AlignInput { text: &tgt.text, lang: &tl, spans: &ts },
        config.align,
    );
    match result {
        Ok(a) => apply_alignment(&mut out.src.segment, &mut out.tgt.segment, &a),
        Err(e) => warn!("{}: alignment skipped: {e}", out.src.segment.seg_id),
    }
}

/// Annotates one segment pair with everything the models allow.
pub fn annotate_pair(input: &PairInput, models: &Models, config: &PipelineConfig) -> AnnotatedPair {
    let mut src = prepare(&input.src, input.spoken, models, config);
    let mut tgt = prepare(&input.tgt, input.spoken, models, config);
    score_side(&mut src, models, config);
    score_side(&mut tgt, models, config);
    let mut pair = SegmentPairRecord::new(src.record.seg_id.clone(), tgt.record.seg_id.clone());
    pair.src_doc_id = src.record.doc_id.clone();
    pair.tgt_doc_id = tgt.record.doc_id.clone();
    pair.lpair = src.record.lpair.clone();
    pair.mode = src.record.mode.clone();
    pair.src_raw_seg = src.record.raw_seg.clone();
    pair.tgt_raw_seg = tgt.record.raw_seg.clone();
    let mut out = AnnotatedPair { src, tgt, pair };
    score_translation(&mut out, models);
    if let Some(encoder) = models.encoder {
        align_pair(&mut out, encoder, config);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapter::mock::{HashEncoder, HashLm, HashMt, NaiveParser};
    use crate::records::RowKind;

    fn input() -> PairInput {
        PairInput {
            src: SideInput {
                id: ItemId::parse("ORG_SP_DE_EN_030-21").unwrap(),
                text: "Es ist alles sehr gut gemeint.".into(),
                speaker_id: Some("mDE1".into()),
            },
            tgt: SideInput {
                id: ItemId::parse("SI_SP_DE_EN_030-21").unwrap(),
                text: "it's all euh very well-intended.".into(),
                speaker_id: Some("fEN3".into()),
            },
            spoken: true,
        }
    }

    fn annotate_with(models: &Models) -> AnnotatedPair {
        annotate_pair(&input(), models, &PipelineConfig::default())
    }

    #[test]
    fn full_pair() {
        let (lm, mt, enc) = (HashLm::new(1), HashMt::new(2), HashEncoder { dim: 8 });
        let models = Models {
            parser: &NaiveParser,
            lm_base: Some(&lm),
            lm_ft: None,
            mt_base: Some(&mt),
            mt_ft: None,
            encoder: Some(&enc),
        };
        let out = annotate_with(&models);
        let tgt = &out.tgt.segment;
        assert_eq!(tgt.text, "It's all very well-intended.");
        for r in &tgt.rows {
            match r.kind() {
                RowKind::Word => {
                    assert!(r.srp_base_gpt2.is_some() && r.srp_base_mt.is_some());
                    assert!(r.srp_ft_gpt2.is_none());
                }
                _ => assert!(r.srp_base_gpt2.is_none() && r.srp_base_mt.is_none()),
            }
        }
        assert!(out.src.segment.rows.iter().all(|r| r.srp_base_mt.is_none()));
        assert_eq!(out.tgt.record.fillers, Some(1));
        assert_eq!(out.tgt.record.wc_tok, Some(5));
        assert!(out.tgt.record.base_gpt_avs.is_some());
        assert!(out.pair.base_bleu.is_some_and(|b| (0.0..=100.0).contains(&b)));
        assert!(out.pair.ft_bleu.is_none());
        // Every alignment on the source side is mirrored on the target side.
        for r in &out.src.segment.rows {
            for id in r.aligned_word_id.iter().flatten() {
                let t = tgt.rows.iter().find(|t| &t.word_id.to_string() == id).unwrap();
                assert!(t.aligned_word_id.as_ref().unwrap().contains(&r.word_id.to_string()));
            }
        }
    }

    #[test]
    fn parse_only() {
        let models = Models {
            parser: &NaiveParser,
            lm_base: None,
            lm_ft: None,
            mt_base: None,
            mt_ft: None,
            encoder: None,
        };
        let out = annotate_with(&models);
        assert!(out.rows().all(|r| r.srp_base_gpt2.is_none() && r.aligned_word.is_none()));
        assert_eq!(out.src.record.base_gpt_avs, None);
        assert_eq!(out.pair.src_raw_seg.as_deref(), Some("Es ist alles sehr gut gemeint."));
    }

    #[test]
    fn empty_side_is_kept() {
        let lm = HashLm::new(1);
        let mt = HashMt::new(2);
        let models = Models {
            parser: &NaiveParser,
            lm_base: Some(&lm),
            lm_ft: None,
            mt_base: Some(&mt),
            mt_ft: None,
            encoder: None,
        };
        let mut inp = input();
        inp.tgt.text = String::new();
        let out = annotate_pair(&inp, &models, &PipelineConfig::default());
        assert_eq!(out.tgt.segment.rows.len(), 1);
        assert_eq!(out.tgt.segment.rows[0].kind(), RowKind::Empty);
        assert_eq!(out.pair.base_bleu, None);
        assert_eq!(out.tgt.record.base_gpt_avs, None);
        assert!(out.src.record.base_gpt_avs.is_some());
    }
}
