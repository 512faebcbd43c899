use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use rayon::prelude::*;
use vrtkit_core::adapter::wire::{
    LineClient, ModelBackend, Recorder, ReplayStore, WireEncoder, WireLm, WireMt, WireParser,
};
use vrtkit_core::align::{AlignConfig, MutualRule};
use vrtkit_core::ids::{ItemId, Mode};
use vrtkit_core::pipeline::{annotate_pair, AnnotatedPair, Models, PairInput, PipelineConfig, SideInput};
use vrtkit_core::records::{SegmentPairRecord, SegmentRecord, WordRow};

use crate::error::CliError;
use crate::io::{cell, emit_table, Tsv};
use crate::Run;

pub const ROLES: [&str; 6] = ["parser", "gpt2_base", "gpt2_ft", "mt_base", "mt_ft", "encoder"];

#[derive(Args)]
pub struct AnnotateArgs {
    /// TSV with src_seg_id, tgt_seg_id, src_text, tgt_text and optional
    /// src_speaker, tgt_speaker columns.
    input: PathBuf,
    /// Directory for vertical.tsv, long.tsv and wide.tsv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Model server speaking line-delimited JSON on stdin/stdout, instead of replay files.
    #[arg(long)]
    adapter_cmd: Option<String>,
    /// Adapter headers (replay-file format) for the roles the server provides.
    #[arg(long, requires = "adapter_cmd")]
    adapter_decl: Option<PathBuf>,
    /// Save every server exchange as a replay file.
    #[arg(long, requires = "adapter_cmd")]
    record: Option<PathBuf>,
}

struct Backend {
    shared: Arc<dyn ModelBackend>,
    recorder: Option<Arc<Recorder<LineClient>>>,
}

fn open_backend(run: &Run, args: &AnnotateArgs) -> Result<Backend, CliError> {
    if let Some(cmd) = &args.adapter_cmd {
        let mut parts = cmd.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| CliError::Config("--adapter-cmd is empty".into()))?;
        let rest: Vec<String> = parts.collect();
        let mut client = LineClient::spawn(&program, &rest)?;
        let decl_path = args
            .adapter_decl
            .as_deref()
            .ok_or_else(|| CliError::Config("--adapter-cmd needs --adapter-decl".into()))?;
        let decl = ReplayStore::open(decl_path)?;
        for role in ROLES {
            if let Some((identity, conv)) = decl.describe(role) {
                client.declare(role, &identity, conv);
            }
        }
        if args.record.is_some() {
            let rec = Arc::new(Recorder::new(client));
            return Ok(Backend {
                shared: rec.clone(),
                recorder: Some(rec),
            });
        }
        return Ok(Backend {
            shared: Arc::new(client),
            recorder: None,
        });
    }
    let paths = run.config.list("replay");
    if paths.is_empty() {
        return Err(CliError::Config("annotate needs --replay or --adapter-cmd".into()));
    }
    let mut store = ReplayStore::default();
    for p in paths {
        store.merge(ReplayStore::open(Path::new(&p))?);
    }
    Ok(Backend {
        shared: Arc::new(store),
        recorder: None,
    })
}

/// Adapters bound at startup. The parser is required; any other role is
/// used when the backend declares it.
struct Bound {
    parser: WireParser,
    lm_base: Option<WireLm>,
    lm_ft: Option<WireLm>,
    mt_base: Option<WireMt>,
    mt_ft: Option<WireMt>,
    encoder: Option<WireEncoder>,
    identities: Vec<String>,
}

impl Bound {
    fn new(b: &Arc<dyn ModelBackend>) -> Result<Bound, CliError> {
        let declared = |role: &str| b.describe(role).is_some();
        let lm = |role: &str| declared(role).then(|| WireLm::bind(b.clone(), role)).transpose();
        let mt = |role: &str| declared(role).then(|| WireMt::bind(b.clone(), role)).transpose();
        let identities = ROLES
            .iter()
            .filter_map(|r| b.describe(r).map(|(id, _)| format!("adapter {r} {id}")))
            .collect();
        Ok(Bound {
            parser: WireParser::bind(b.clone(), "parser")?,
            lm_base: lm("gpt2_base")?,
            lm_ft: lm("gpt2_ft")?,
            mt_base: mt("mt_base")?,
            mt_ft: mt("mt_ft")?,
            encoder: declared("encoder")
                .then(|| WireEncoder::bind(b.clone(), "encoder"))
                .transpose()?,
            identities,
        })
    }

    fn models(&self) -> Models<'_> {
        Models {
            parser: &self.parser,
            lm_base: self.lm_base.as_ref().map(|m| m as _),
            lm_ft: self.lm_ft.as_ref().map(|m| m as _),
            mt_base: self.mt_base.as_ref().map(|m| m as _),
            mt_ft: self.mt_ft.as_ref().map(|m| m as _),
            encoder: self.encoder.as_ref().map(|m| m as _),
        }
    }
}

pub fn pipeline_config(run: &Run) -> Result<PipelineConfig, CliError> {
    let rule = match run.config.get("align_rule").unwrap_or("both") {
        "both" => MutualRule::Both,
        "mean" => MutualRule::Mean,
        other => return Err(CliError::Config(format!("align_rule: expected both or mean, got '{other}'"))),
    };
    Ok(PipelineConfig {
        cap: run.config.require("cap")?,
        window: run.config.parse("window")?,
        align: AlignConfig {
            threshold: run.config.require("threshold")?,
            rule,
        },
        ..PipelineConfig::default()
    })
}

pub fn parse_mode(s: &str) -> Result<Mode, CliError> {
    match s {
        "SP" | "spoken" => Ok(Mode::Spoken),
        "WR" | "written" => Ok(Mode::Written),
        _ => Err(CliError::Config(format!("mode: expected SP or WR, got '{s}'"))),
    }
}

fn read_pairs(run: &Run, path: &Path) -> Result<Vec<PairInput>, CliError> {
    let t = Tsv::read(path)?;
    let cols = [
        t.column("src_seg_id")?,
        t.column("tgt_seg_id")?,
        t.column("src_text")?,
        t.column("tgt_text")?,
    ];
    let speakers = [t.column("src_speaker").ok(), t.column("tgt_speaker").ok()];
    let forced = run.config.get("mode").map(parse_mode).transpose()?;
    let direction = run.config.get("direction");
    let mut out = Vec::new();
    for (i, r) in t.rows.iter().enumerate() {
        let id = |c: usize| -> Result<ItemId, CliError> {
            let s = cell(r, Some(c)).ok_or_else(|| t.bad(i, "empty segment id"))?;
            ItemId::parse(s).map_err(|e| t.bad(i, format!("'{s}': {e}")))
        };
        let (src, tgt) = (id(cols[0])?, id(cols[1])?);
        if direction.is_some_and(|d| d != src.lpair()) {
            continue;
        }
        let mode = forced
            .or(src.mode)
            .ok_or_else(|| t.bad(i, "segment id has no mode; pass --mode SP or WR"))?;
        let side = |id: ItemId, text: usize, speaker: Option<usize>| SideInput {
            id,
            text: cell(r, Some(text)).unwrap_or("").to_string(),
            speaker_id: cell(r, speaker).map(str::to_string),
        };
        out.push(PairInput {
            src: side(src, cols[2], speakers[0]),
            tgt: side(tgt, cols[3], speakers[1]),
            spoken: mode == Mode::Spoken,
        });
    }
    Ok(out)
}

/// Pair indices grouped by source document, in order of first appearance.
fn by_document(pairs: &[PairInput]) -> Vec<Vec<usize>> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let id = &p.src.id;
        let key = format!("{}|{:?}|{}", id.lpair(), id.mode, id.doc_key());
        let g = *index.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

pub struct Annotated {
    pub vertical: Vec<WordRow>,
    pub long: Vec<SegmentRecord>,
    pub wide: Vec<SegmentPairRecord>,
}

/// Flattens annotated pairs. A source segment shared by several targets
/// contributes its rows and record once.
pub fn collect(pairs: Vec<AnnotatedPair>) -> Annotated {
    let mut out = Annotated {
        vertical: Vec::new(),
        long: Vec::new(),
        wide: Vec::new(),
    };
    let mut seen = HashSet::new();
    for p in pairs {
        for side in [p.src, p.tgt] {
            if seen.insert(side.record.seg_id.to_string()) {
                out.vertical.extend(side.segment.rows);
                out.long.push(side.record);
            }
        }
        out.wide.push(p.pair);
    }
    out
}

pub fn run(run: &Run, args: &AnnotateArgs) -> Result<(), CliError> {
    let config = pipeline_config(run)?;
    let pairs = read_pairs(run, &args.input)?;
    let backend = open_backend(run, args)?;
    let bound = Bound::new(&backend.shared)?;
    let pool = run.thread_pool()?;
    let groups = by_document(&pairs);
    log::info!("{} pairs in {} documents, {} workers", pairs.len(), groups.len(), pool.current_num_threads());
    let done: Vec<Vec<AnnotatedPair>> = pool.install(|| {
        groups
            .par_iter()
            .map(|g| {
                let models = bound.models();
                g.iter().map(|&i| annotate_pair(&pairs[i], &models, &config)).collect()
            })
            .collect()
    });
    let out = collect(done.into_iter().flatten().collect());
    log::info!("{} word rows", out.vertical.len());

    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    let prov = run.provenance(&bound.identities);
    emit_table(&out.vertical, Some(&args.out_dir.join("vertical.tsv")), &prov)?;
    emit_table(&out.long, Some(&args.out_dir.join("long.tsv")), &prov)?;
    emit_table(&out.wide, Some(&args.out_dir.join("wide.tsv")), &prov)?;

    if let (Some(rec), Some(path)) = (&backend.recorder, &args.record) {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        rec.write_jsonl(&ROLES, BufWriter::new(file))?;
    }
    Ok(())
}
