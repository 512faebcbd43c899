use std::path::PathBuf;

use clap::Args;
use log::warn;
use vrtkit_core::transcript::normalize_segment;

use crate::error::CliError;
use crate::io::{cell, emit_tsv, Tsv};
use crate::Run;

#[derive(Args)]
pub struct NormalizeArgs {
    /// TSV with `seg_id` and `text` columns.
    input: PathBuf,
    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub const HEADER: [&str; 6] = ["seg_id", "raw_seg", "fp_positions", "disfluencies", "fillers", "fillers+3"];

pub fn run(run: &Run, args: &NormalizeArgs) -> Result<(), CliError> {
    let t = Tsv::read(&args.input)?;
    let (id_col, text_col) = (t.column("seg_id")?, t.column("text")?);
    let mut rows = Vec::with_capacity(t.rows.len());
    for (i, r) in t.rows.iter().enumerate() {
        let id = cell(r, Some(id_col)).ok_or_else(|| t.bad(i, "empty seg_id"))?;
        let n = normalize_segment(cell(r, Some(text_col)).unwrap_or(""));
        for w in &n.warnings {
            warn!("{id}: {} at {:?}", w.message, w.span);
        }
        let fps: Vec<String> = n.fp_positions.iter().map(usize::to_string).collect();
        rows.push(vec![
            id.to_string(),
            if n.clean.is_empty() { "NA".into() } else { n.clean },
            if fps.is_empty() { "NA".into() } else { fps.join(",") },
            n.counts.disfluencies.to_string(),
            n.counts.fillers.to_string(),
            n.counts.fillers_plus_3.to_string(),
        ]);
    }
    emit_tsv(args.out.as_deref(), &run.provenance(&[]), &HEADER, &rows)
}
