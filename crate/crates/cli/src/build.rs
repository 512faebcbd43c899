use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use clap::Args;
use vrtkit_core::builder::{
    default_overlap_key, filter_by_direction, filter_empty_segments, make_splits, remove_overlap, DocumentPair,
    ParallelSegment, ScoreCutoffs, SplitConfig,
};
use vrtkit_core::ids::Mode;

use crate::annotate::parse_mode;
use crate::error::CliError;
use crate::io::{cell, emit_tsv, Tsv};
use crate::Run;

#[derive(Args)]
pub struct BuildArgs {
    /// Document metadata TSV: doc_id, lpair, mode, src_lang and optional
    /// score, speaker, date.
    #[arg(long)]
    docs: PathBuf,
    /// Segment TSV: doc_id, src, tgt, one row per segment in document order.
    #[arg(long)]
    segments: PathBuf,
    /// Document listing with the split of each document (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Segments of the kept documents after filtering.
    #[arg(long)]
    segments_out: Option<PathBuf>,
}

pub const LISTING: [&str; 5] = ["doc_id", "lpair", "mode", "split", "n_segs"];

fn read_docs(args: &BuildArgs) -> Result<Vec<DocumentPair>, CliError> {
    let t = Tsv::read(&args.docs)?;
    let (id, lpair, mode, lang) = (t.column("doc_id")?, t.column("lpair")?, t.column("mode")?, t.column("src_lang")?);
    let opt = |c: &str| t.column(c).ok();
    let (score, speaker, date) = (opt("score"), opt("speaker"), opt("date"));
    let mut docs = Vec::with_capacity(t.rows.len());
    for (i, r) in t.rows.iter().enumerate() {
        let need = |c: usize, what: &str| cell(r, Some(c)).ok_or_else(|| t.bad(i, format!("empty {what}")));
        let alignment_score = cell(r, score)
            .map(|s| s.parse::<f64>().map_err(|_| t.bad(i, format!("score '{s}' is not a number"))))
            .transpose()?;
        docs.push(DocumentPair {
            doc_id: need(id, "doc_id")?.to_string(),
            segments: Vec::new(),
            alignment_score,
            speaker: cell(r, speaker).map(str::to_string),
            date: cell(r, date).map(str::to_string),
            src_lang: need(lang, "src_lang")?.to_string(),
            lpair: need(lpair, "lpair")?.to_string(),
            mode: parse_mode(need(mode, "mode")?).map_err(|e| t.bad(i, e.to_string()))?,
        });
    }
    let index: HashMap<String, usize> = docs.iter().enumerate().map(|(i, d)| (d.doc_id.clone(), i)).collect();
    let s = Tsv::read(&args.segments)?;
    let (sid, src, tgt) = (s.column("doc_id")?, s.column("src")?, s.column("tgt")?);
    for (i, r) in s.rows.iter().enumerate() {
        let doc = cell(r, Some(sid)).ok_or_else(|| s.bad(i, "empty doc_id"))?;
        let &d = index.get(doc).ok_or_else(|| s.bad(i, format!("document '{doc}' is not in {}", t.path)))?;
        docs[d].segments.push(ParallelSegment::new(
            cell(r, Some(src)).unwrap_or(""),
            cell(r, Some(tgt)).unwrap_or(""),
        ));
    }
    Ok(docs)
}

pub fn run(run: &Run, args: &BuildArgs) -> Result<(), CliError> {
    let docs = read_docs(args)?;
    let cfg = &run.config;
    let cutoffs = ScoreCutoffs {
        by_lpair: [
            ("DE-EN".to_string(), cfg.require::<f64>("cutoff.DE-EN")?),
            ("EN-DE".to_string(), cfg.require::<f64>("cutoff.EN-DE")?),
        ]
        .into(),
    };
    let split_cfg = SplitConfig {
        test_docs: cfg.require("test_docs")?,
        min_segments: cfg.require("min_segments")?,
        seed: cfg.require("seed")?,
    };

    let mut listing: Vec<(DocumentPair, &str)> = Vec::new();
    let (spoken, written): (Vec<_>, Vec<_>) = docs.into_iter().partition(|d| d.mode == Mode::Spoken);
    let mut spoken_segments: BTreeMap<String, usize> = BTreeMap::new();
    for d in &spoken {
        *spoken_segments.entry(d.lpair.clone()).or_default() += d.segments.len();
    }

    let mut kept = Vec::new();
    for d in written {
        match filter_empty_segments(d.clone()) {
            (Some(k), _) => kept.push(k),
            (None, _) => listing.push((d, "dropped_empty")),
        }
    }
    let ids: Vec<String> = kept.iter().map(|d| d.doc_id.clone()).collect();
    let before: HashMap<String, DocumentPair> = kept.iter().map(|d| (d.doc_id.clone(), d.clone())).collect();
    let kept = filter_by_direction(kept, &cutoffs);
    let survived: std::collections::HashSet<&String> = kept.iter().map(|d| &d.doc_id).collect();
    for id in &ids {
        if !survived.contains(id) {
            listing.push((before[id].clone(), "low_score"));
        }
    }
    let (kept, overlapping) = remove_overlap(kept, &spoken, default_overlap_key);
    listing.extend(overlapping.into_iter().map(|d| (d, "overlap")));
    let splits = make_splits(kept, &spoken_segments, &split_cfg)?;
    listing.extend(spoken.into_iter().map(|d| (d, "spoken")));
    listing.extend(splits.test.into_iter().map(|d| (d, "test")));
    listing.extend(splits.train.into_iter().map(|d| (d, "train")));
    listing.extend(splits.unused.into_iter().map(|d| (d, "unused")));
    listing.sort_by(|a, b| (&a.0.lpair, &a.0.doc_id).cmp(&(&b.0.lpair, &b.0.doc_id)));

    let mut summary: BTreeMap<(String, &str), (usize, usize)> = BTreeMap::new();
    for (d, split) in &listing {
        let e = summary.entry((d.lpair.clone(), split)).or_default();
        e.0 += 1;
        e.1 += d.segments.len();
    }
    let extra: Vec<String> = summary
        .iter()
        .map(|((lpair, split), (docs, segs))| format!("split {lpair} {split} docs={docs} segs={segs}"))
        .collect();
    for line in &extra {
        log::info!("{line}");
    }
    let prov = run.provenance(&extra);

    let rows: Vec<Vec<String>> = listing
        .iter()
        .map(|(d, split)| {
            vec![
                d.doc_id.clone(),
                d.lpair.clone(),
                d.mode.code().to_string(),
                split.to_string(),
                d.segments.len().to_string(),
            ]
        })
        .collect();
    emit_tsv(args.out.as_deref(), &prov, &LISTING, &rows)?;

    if let Some(path) = &args.segments_out {
        let mut seg_rows = Vec::new();
        for (d, split) in listing.iter().filter(|(_, s)| matches!(*s, "test" | "train" | "spoken")) {
            for (i, s) in d.segments.iter().enumerate() {
                let text = |t: &str| if t.is_empty() { "NA".to_string() } else { t.to_string() };
                seg_rows.push(vec![d.doc_id.clone(), split.to_string(), (i + 1).to_string(), text(&s.src), text(&s.tgt)]);
            }
        }
        emit_tsv(Some(path), &prov, &["doc_id", "split", "seg", "src", "tgt"], &seg_rows)?;
    }
    Ok(())
}
