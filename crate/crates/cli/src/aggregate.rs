use std::collections::HashMap;
use std::path::PathBuf;

use clap::Args;
use vrtkit_core::ids::ItemId;
use vrtkit_core::records::{RowKind, SegmentPairRecord, SegmentRecord, SurprisalColumn, WordRow};

use crate::error::CliError;
use crate::io::{emit_table, read_rows, read_vertical};
use crate::Run;

const SOURCE_TTYPE: &str = "ORG";

#[derive(Args)]
pub struct AggregateArgs {
    /// Vertical tables.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Segment (long) table to write.
    #[arg(long)]
    long: Option<PathBuf>,
    /// Segment-pair (wide) table to write.
    #[arg(long)]
    wide: Option<PathBuf>,
    /// Earlier long table whose columns that cannot be derived from word
    /// rows (delivery, subword means, disfluency counts) are carried over.
    #[arg(long)]
    long_sidecar: Option<PathBuf>,
    /// Earlier wide table supplying subword means and BLEU.
    #[arg(long)]
    wide_sidecar: Option<PathBuf>,
    /// Leave out segments without any word.
    #[arg(long)]
    drop_empty: bool,
}

/// Rows of one segment, kept in file order.
pub struct Segment<'a> {
    pub id: ItemId,
    pub rows: Vec<&'a WordRow>,
}

impl Segment<'_> {
    fn words(&self) -> impl Iterator<Item = &&WordRow> {
        self.rows.iter().filter(|r| r.kind() == RowKind::Word)
    }

    fn mean(&self, column: SurprisalColumn) -> Option<f64> {
        let v: Vec<f64> = self.words().filter_map(|r| r.surprisal(column)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    fn is_empty(&self) -> bool {
        self.rows.iter().all(|r| r.kind() == RowKind::Empty)
    }
}

pub fn segments(rows: &[WordRow]) -> Vec<Segment<'_>> {
    let mut index: HashMap<ItemId, usize> = HashMap::new();
    let mut out: Vec<Segment> = Vec::new();
    for r in rows {
        let id = r.word_id.segment_id();
        let i = *index.entry(id.clone()).or_insert_with(|| {
            out.push(Segment { id, rows: Vec::new() });
            out.len() - 1
        });
        out[i].rows.push(r);
    }
    out
}

/// A long record from word rows alone. Fillers are counted from FP rows
/// on spoken segments.
pub fn long_record(seg: &Segment) -> SegmentRecord {
    let first = seg.rows[0];
    let mut rec = SegmentRecord::new(seg.id.clone());
    let m = &first.meta;
    rec.doc_id = m.doc_id.clone();
    rec.lpair = m.lpair.clone().or_else(|| Some(seg.id.lpair()));
    rec.lang = m.lang.clone();
    rec.mode = m.mode.clone().or_else(|| seg.id.mode.map(|x| x.code().to_string()));
    rec.ttype = m.ttype.clone().or_else(|| Some(seg.id.ttype.clone()));
    rec.speaker_id = m.speaker_id.clone();
    rec.raw_seg = seg.rows.iter().find_map(|r| r.raw_seg.clone());
    let tokens: Vec<&str> = seg
        .rows
        .iter()
        .filter(|r| matches!(r.kind(), RowKind::Word | RowKind::Filler))
        .filter_map(|r| r.token())
        .collect();
    rec.tokens = Some(tokens.join(" "));
    rec.wc_tok = Some(seg.words().count() as u32);
    rec.base_gpt_avs = seg.mean(SurprisalColumn::BaseGpt2);
    rec.ft_gpt_avs = seg.mean(SurprisalColumn::FtGpt2);
    if rec.mode.as_deref() == Some("SP") {
        rec.fillers = Some(seg.rows.iter().filter(|r| r.kind() == RowKind::Filler).count() as u32);
    }
    rec
}

fn merge_long(rec: &mut SegmentRecord, old: &SegmentRecord) {
    rec.delivery_rate = old.delivery_rate;
    rec.delivery_wpm = old.delivery_wpm;
    rec.speech_timing_sec = old.speech_timing_sec;
    rec.source_text_delivery_type = old.source_text_delivery_type.clone();
    rec.base_gpt_avs_subw = old.base_gpt_avs_subw;
    rec.ft_gpt_avs_subw = old.ft_gpt_avs_subw;
    rec.disfluencies = old.disfluencies;
    rec.fillers_plus_3 = old.fillers_plus_3;
    if rec.speaker_id.is_none() {
        rec.speaker_id = old.speaker_id.clone();
    }
    if rec.mode.is_none() {
        rec.mode = old.mode.clone();
        rec.fillers = old.fillers;
    }
}

/// Wide records for every target segment whose source segment is present.
pub fn wide_records(segs: &[Segment]) -> Vec<SegmentPairRecord> {
    let by_id: HashMap<&ItemId, &Segment> = segs.iter().map(|s| (&s.id, s)).collect();
    let mut out = Vec::new();
    for tgt in segs.iter().filter(|s| s.id.ttype != SOURCE_TTYPE) {
        let src_id = ItemId {
            ttype: SOURCE_TTYPE.to_string(),
            ..tgt.id.clone()
        };
        let Some(src) = by_id.get(&src_id) else { continue };
        let mut p = SegmentPairRecord::new(src_id.clone(), tgt.id.clone());
        p.src_doc_id = src.rows[0].meta.doc_id.clone();
        p.tgt_doc_id = tgt.rows[0].meta.doc_id.clone();
        p.lpair = Some(tgt.id.lpair());
        p.mode = tgt.rows[0].meta.mode.clone().or_else(|| tgt.id.mode.map(|m| m.code().to_string()));
        p.src_raw_seg = src.rows.iter().find_map(|r| r.raw_seg.clone());
        p.tgt_raw_seg = tgt.rows.iter().find_map(|r| r.raw_seg.clone());
        p.base_mt_avs = tgt.mean(SurprisalColumn::BaseMt);
        p.ft_mt_avs = tgt.mean(SurprisalColumn::FtMt);
        out.push(p);
    }
    out
}

fn merge_wide(p: &mut SegmentPairRecord, old: &SegmentPairRecord) {
    p.base_mt_avs_subw = old.base_mt_avs_subw;
    p.ft_mt_avs_subw = old.ft_mt_avs_subw;
    p.base_bleu = old.base_bleu;
    p.ft_bleu = old.ft_bleu;
}

pub fn run(run: &Run, args: &AggregateArgs) -> Result<(), CliError> {
    if args.long.is_none() && args.wide.is_none() {
        return Err(CliError::Config("aggregate needs --long and/or --wide".into()));
    }
    let rows = read_vertical(&args.inputs)?;
    let mut segs = segments(&rows);
    if args.drop_empty {
        segs.retain(|s| !s.is_empty());
    }
    let prov = run.provenance(&[]);
    if let Some(path) = &args.long {
        let old: HashMap<String, SegmentRecord> = match &args.long_sidecar {
            Some(p) => read_rows::<SegmentRecord>(p)?
                .1
                .into_iter()
                .map(|r| (r.seg_id.to_string(), r))
                .collect(),
            None => HashMap::new(),
        };
        let long: Vec<SegmentRecord> = segs
            .iter()
            .map(|s| {
                let mut rec = long_record(s);
                if let Some(o) = old.get(&s.id.to_string()) {
                    merge_long(&mut rec, o);
                }
                rec
            })
            .collect();
        emit_table(&long, Some(path), &prov)?;
    }
    if let Some(path) = &args.wide {
        let old: HashMap<(String, String), SegmentPairRecord> = match &args.wide_sidecar {
            Some(p) => read_rows::<SegmentPairRecord>(p)?
                .1
                .into_iter()
                .map(|r| ((r.src_seg_id.to_string(), r.tgt_seg_id.to_string()), r))
                .collect(),
            None => HashMap::new(),
        };
        let mut wide = wide_records(&segs);
        for p in &mut wide {
            if let Some(o) = old.get(&(p.src_seg_id.to_string(), p.tgt_seg_id.to_string())) {
                merge_wide(p, o);
            }
        }
        emit_table(&wide, Some(path), &prov)?;
    }
    Ok(())
}
