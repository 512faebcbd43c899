//! Row types of the vertical (word), long (segment) and wide (segment pair)
//! tables.

use serde::{Deserialize, Serialize};

use crate::ids::ItemId;

/// Filler particle forms kept in the spoken transcripts.
pub const FILLERS: [&str; 3] = ["euh", "hum", "hm"];

/// Part-of-speech tag carried by reinserted filler rows.
pub const FP_TAG: &str = "FP";

pub fn is_filler(token: &str) -> bool {
    FILLERS.contains(&token)
}

/// The ten CoNLL-U fields, each nullable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Conllu {
    pub id: Option<String>,
    pub token: Option<String>,
    pub lemma: Option<String>,
    pub pos: Option<String>,
    pub xpos: Option<String>,
    pub feats: Option<String>,
    pub head_id: Option<String>,
    pub rel: Option<String>,
    pub deps: Option<String>,
    pub misc: Option<String>,
}

/// Segment-level metadata repeated on every vertical row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowMeta {
    pub doc_id: Option<String>,
    pub seg_id: Option<String>,
    pub lpair: Option<String>,
    pub lang: Option<String>,
    pub mode: Option<String>,
    pub ttype: Option<String>,
    pub speaker_id: Option<String>,
}

/// Which of the four surprisal columns a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurprisalColumn {
    BaseGpt2,
    FtGpt2,
    BaseMt,
    FtMt,
}

impl SurprisalColumn {
    pub const ALL: [SurprisalColumn; 4] = [
        SurprisalColumn::BaseGpt2,
        SurprisalColumn::FtGpt2,
        SurprisalColumn::BaseMt,
        SurprisalColumn::FtMt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SurprisalColumn::BaseGpt2 => "srp_base_gpt2",
            SurprisalColumn::FtGpt2 => "srp_ft_gpt2",
            SurprisalColumn::BaseMt => "srp_base_mt",
            SurprisalColumn::FtMt => "srp_ft_mt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// A surface word, including multiword surface forms such as "It's".
    Word,
    /// A multitoken expansion row (`:<word>:<sub>`).
    Expansion,
    /// A reinserted filler particle.
    Filler,
    /// Placeholder for an empty segment.
    Empty,
}

/// One row of the vertical format.
#[derive(Debug, Clone, PartialEq)]
pub struct WordRow {
    pub word_id: ItemId,
    pub conllu: Conllu,
    pub srp_base_gpt2: Option<f64>,
    pub srp_ft_gpt2: Option<f64>,
    pub srp_base_mt: Option<f64>,
    pub srp_ft_mt: Option<f64>,
    pub aligned_word: Option<Vec<String>>,
    pub aligned_word_id: Option<Vec<String>>,
    pub meta: RowMeta,
    pub raw_seg: Option<String>,
    /// Columns not known to the schema, in file order.
    pub extra: Vec<(String, String)>,
}

impl WordRow {
    pub fn new(word_id: ItemId) -> WordRow {
        WordRow {
            word_id,
            conllu: Conllu::default(),
            srp_base_gpt2: None,
            srp_ft_gpt2: None,
            srp_base_mt: None,
            srp_ft_mt: None,
            aligned_word: None,
            aligned_word_id: None,
            meta: RowMeta::default(),
            raw_seg: None,
            extra: Vec::new(),
        }
    }

    pub fn kind(&self) -> RowKind {
        if self.word_id.sub_index.is_some() {
            RowKind::Expansion
        } else if self.conllu.pos.as_deref() == Some(FP_TAG) {
            RowKind::Filler
        } else if self.word_id.word.is_none() {
            RowKind::Empty
        } else {
            RowKind::Word
        }
    }

    pub fn token(&self) -> Option<&str> {
        self.conllu.token.as_deref()
    }

    pub fn surprisal(&self, column: SurprisalColumn) -> Option<f64> {
        match column {
            SurprisalColumn::BaseGpt2 => self.srp_base_gpt2,
            SurprisalColumn::FtGpt2 => self.srp_ft_gpt2,
            SurprisalColumn::BaseMt => self.srp_base_mt,
            SurprisalColumn::FtMt => self.srp_ft_mt,
        }
    }

    pub fn surprisal_mut(&mut self, column: SurprisalColumn) -> &mut Option<f64> {
        match column {
            SurprisalColumn::BaseGpt2 => &mut self.srp_base_gpt2,
            SurprisalColumn::FtGpt2 => &mut self.srp_ft_gpt2,
            SurprisalColumn::BaseMt => &mut self.srp_base_mt,
            SurprisalColumn::FtMt => &mut self.srp_ft_mt,
        }
    }
}

/// One row of the long (segment-level) format.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub seg_id: ItemId,
    pub doc_id: Option<String>,
    pub lpair: Option<String>,
    pub lang: Option<String>,
    pub mode: Option<String>,
    pub ttype: Option<String>,
    pub speaker_id: Option<String>,
    pub delivery_rate: Option<f64>,
    pub delivery_wpm: Option<f64>,
    pub speech_timing_sec: Option<f64>,
    pub source_text_delivery_type: Option<String>,
    pub base_gpt_avs: Option<f64>,
    pub base_gpt_avs_subw: Option<f64>,
    pub ft_gpt_avs: Option<f64>,
    pub ft_gpt_avs_subw: Option<f64>,
    pub disfluencies: Option<u32>,
    pub fillers: Option<u32>,
    pub fillers_plus_3: Option<u32>,
    pub raw_seg: Option<String>,
    pub tokens: Option<String>,
    pub wc_tok: Option<u32>,
    pub extra: Vec<(String, String)>,
}

impl SegmentRecord {
    pub fn new(seg_id: ItemId) -> SegmentRecord {
        SegmentRecord {
            seg_id,
            doc_id: None,
            lpair: None,
            lang: None,
            mode: None,
            ttype: None,
            speaker_id: None,
            delivery_rate: None,
            delivery_wpm: None,
            speech_timing_sec: None,
            source_text_delivery_type: None,
            base_gpt_avs: None,
            base_gpt_avs_subw: None,
            ft_gpt_avs: None,
            ft_gpt_avs_subw: None,
            disfluencies: None,
            fillers: None,
            fillers_plus_3: None,
            raw_seg: None,
            tokens: None,
            wc_tok: None,
            extra: Vec::new(),
        }
    }
}

/// One row of the wide (segment pair) format.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPairRecord {
    pub src_seg_id: ItemId,
    pub tgt_seg_id: ItemId,
    pub src_doc_id: Option<String>,
    pub tgt_doc_id: Option<String>,
    pub lpair: Option<String>,
    pub mode: Option<String>,
    pub src_raw_seg: Option<String>,
    pub tgt_raw_seg: Option<String>,
    pub base_mt_avs: Option<f64>,
    pub base_mt_avs_subw: Option<f64>,
    pub ft_mt_avs: Option<f64>,
    pub ft_mt_avs_subw: Option<f64>,
    pub base_bleu: Option<f64>,
    pub ft_bleu: Option<f64>,
    pub extra: Vec<(String, String)>,
}

impl SegmentPairRecord {
    pub fn new(src_seg_id: ItemId, tgt_seg_id: ItemId) -> SegmentPairRecord {
        SegmentPairRecord {
            src_seg_id,
            tgt_seg_id,
            src_doc_id: None,
            tgt_doc_id: None,
            lpair: None,
            mode: None,
            src_raw_seg: None,
            tgt_raw_seg: None,
            base_mt_avs: None,
            base_mt_avs_subw: None,
            ft_mt_avs: None,
            ft_mt_avs_subw: None,
            base_bleu: None,
            ft_bleu: None,
            extra: Vec::new(),
        }
    }
}
