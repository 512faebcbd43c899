use std::path::PathBuf;

use clap::Args;
use vrtkit_core::align::alignment_stats;
use vrtkit_core::builder::describe;
use vrtkit_core::records::WordRow;

use crate::error::CliError;
use crate::io::{emit_tsv, num, read_vertical};
use crate::Run;

const SOURCE_TTYPE: &str = "ORG";

#[derive(Args)]
pub struct StatsArgs {
    /// Vertical tables.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub const HEADER: [&str; 17] = [
    "mode",
    "lpair",
    "ttype",
    "words",
    "segs",
    "docs",
    "pct_empty",
    "fps",
    "pct_segs_with_fp",
    "mean_len",
    "sd_len",
    "min_len",
    "max_len",
    "pct_multi_sentence",
    "src_tokens",
    "pct_unaligned",
    "pct_multi",
];

/// One row per (mode, lpair, ttype). Alignment shares are filled on
/// source-text groups only.
pub fn report(rows: &[WordRow]) -> Vec<Vec<String>> {
    describe(rows)
        .into_iter()
        .map(|s| {
            let align = (s.ttype == SOURCE_TTYPE)
                .then(|| {
                    let group: Vec<WordRow> = rows
                        .iter()
                        .filter(|r| {
                            let id = &r.word_id;
                            id.ttype == s.ttype
                                && id.lpair() == s.lpair
                                && id.mode.map(|m| m.code()).unwrap_or("") == s.mode
                        })
                        .cloned()
                        .collect();
                    alignment_stats(&group).ok()
                })
                .flatten();
            vec![
                s.mode,
                s.lpair,
                s.ttype,
                s.words.to_string(),
                s.segs.to_string(),
                s.docs.to_string(),
                num(Some(s.pct_empty), 2),
                s.fps.to_string(),
                num(Some(s.pct_segs_with_fp), 2),
                num(Some(s.mean_len), 2),
                num(Some(s.sd_len), 2),
                s.min_len.to_string(),
                s.max_len.to_string(),
                num(Some(s.pct_multi_sentence), 2),
                align.map_or("NA".into(), |a| a.src_tokens.to_string()),
                num(align.map(|a| a.pct_unaligned), 2),
                num(align.map(|a| a.pct_multi), 2),
            ]
        })
        .collect()
}

pub fn run(run: &Run, args: &StatsArgs) -> Result<(), CliError> {
    let mut rows = read_vertical(&args.inputs)?;
    if let Some(d) = run.config.get("direction") {
        rows.retain(|r| r.word_id.lpair() == d);
    }
    if let Some(m) = run.config.get("mode") {
        let m = crate::annotate::parse_mode(m)?;
        rows.retain(|r| r.word_id.mode == Some(m));
    }
    emit_tsv(args.out.as_deref(), &run.provenance(&[]), &HEADER, &report(&rows))
}
