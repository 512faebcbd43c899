//! Reading and writing the gzip-compressed TSV tables.
//!
//! Column order per format is frozen in `schema/columns.txt`, which is
//! compiled into the crate and checked against the codecs below in tests.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::sync::OnceLock;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::ids::ItemId;
use crate::records::{Conllu, RowMeta, SegmentPairRecord, SegmentRecord, WordRow};

pub const NA: &str = "NA";
pub const LIST_SEP: &str = ", ";

/// The frozen schema manifest.
pub const SCHEMA_MANIFEST: &str = include_str!("../schema/columns.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Vertical,
    Long,
    Wide,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Vertical => "vertical",
            Format::Long => "long",
            Format::Wide => "wide",
        }
    }

    /// Column specs for this format, in file order.
    pub fn columns(self) -> &'static [ColumnSpec] {
        &schema()[&self]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub optional: bool,
}

fn schema() -> &'static HashMap<Format, Vec<ColumnSpec>> {
    static SCHEMA: OnceLock<HashMap<Format, Vec<ColumnSpec>>> = OnceLock::new();
    SCHEMA.get_or_init(|| parse_manifest(SCHEMA_MANIFEST).expect("bundled schema manifest is valid"))
}

/// Parses a schema manifest: `[format]` sections listing one column per line.
pub fn parse_manifest(text: &str) -> Result<HashMap<Format, Vec<ColumnSpec>>, String> {
    let mut out: HashMap<Format, Vec<ColumnSpec>> = HashMap::new();
    let mut current = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(section) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let format = match section {
                "vertical" => Format::Vertical,
                "long" => Format::Long,
                "wide" => Format::Wide,
                other => return Err(format!("line {}: unknown format section '{other}'", n + 1)),
            };
            out.entry(format).or_default();
            current = Some(format);
            continue;
        }
        let format = current.ok_or_else(|| format!("line {}: column outside a section", n + 1))?;
        let (name, optional) = match line.strip_suffix('?') {
            Some(name) => (name, true),
            None => (line, false),
        };
        out.entry(format).or_default().push(ColumnSpec {
            name: name.to_string(),
            optional,
        });
    }
    Ok(out)
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("table has no header row")]
    NoHeader,
    #[error("missing required column '{0}'")]
    MissingColumn(String),
    #[error("duplicate column '{0}' in header")]
    DuplicateColumn(String),
    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column '{column}': cannot read '{value}' as {expected}")]
    Coercion {
        line: usize,
        column: String,
        value: String,
        expected: &'static str,
    },
    #[error("row {row}: extra columns {found:?} differ from the first row's {expected:?}")]
    Heterogeneous {
        row: usize,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("row {row}, column '{column}': {reason}")]
    Unserializable {
        row: usize,
        column: String,
        reason: String,
    },
}

/// A record type that maps onto one of the three formats.
pub trait TableRecord: Sized {
    const FORMAT: Format;

    /// Cells for the fixed schema columns, in manifest order.
    fn to_cells(&self, enc: &mut CellWriter);

    fn from_cells(row: &CellReader<'_>) -> Result<Self, TableError>;

    fn extra(&self) -> &[(String, String)];

    fn set_extra(&mut self, extra: Vec<(String, String)>);
}

/// Collects serialized cells for one row, remembering the first failure.
pub struct CellWriter {
    row: usize,
    format: Format,
    cells: Vec<String>,
    error: Option<TableError>,
}

impl CellWriter {
    fn new(row: usize, format: Format) -> Self {
        CellWriter {
            row,
            format,
            cells: Vec::new(),
            error: None,
        }
    }

    fn column_name(&self) -> String {
        self.format
            .columns()
            .get(self.cells.len())
            .map(|c| c.name.clone())
            .unwrap_or_else(|| format!("#{}", self.cells.len()))
    }

    fn fail(&mut self, reason: String) {
        if self.error.is_none() {
            self.error = Some(TableError::Unserializable {
                row: self.row,
                column: self.column_name(),
                reason,
            });
        }
    }

    fn check_text(&mut self, s: &str) -> bool {
        if s.contains(['\t', '\n', '\r']) {
            self.fail(format!("text {s:?} contains a tab or line break"));
            false
        } else if s == NA {
            self.fail("text equal to the null marker NA".to_string());
            false
        } else {
            true
        }
    }

    pub fn text(&mut self, v: &Option<String>) {
        let cell = match v {
            Some(s) if self.check_text(s) => s.clone(),
            Some(_) => String::new(),
            None => NA.to_string(),
        };
        self.cells.push(cell);
    }

    pub fn id(&mut self, v: &ItemId) {
        self.cells.push(v.to_string());
    }

    pub fn real(&mut self, v: Option<f64>) {
        let cell = match v {
            Some(x) if x.is_finite() => format!("{x}"),
            Some(x) => {
                self.fail(format!("non-finite value {x}"));
                String::new()
            }
            None => NA.to_string(),
        };
        self.cells.push(cell);
    }

    /// Surprisal in bits: finite and non-negative.
    pub fn bits(&mut self, v: Option<f64>) {
        if let Some(x) = v {
            if x < 0.0 {
                self.fail(format!("negative surprisal {x}"));
            }
        }
        self.real(v)
    }

    pub fn count(&mut self, v: Option<u32>) {
        self.cells
            .push(v.map(|x| x.to_string()).unwrap_or_else(|| NA.to_string()));
    }

    pub fn list(&mut self, v: &Option<Vec<String>>) {
        let cell = match v {
            None => NA.to_string(),
            Some(items) if items.is_empty() => {
                self.fail("empty list (use null)".to_string());
                String::new()
            }
            Some(items) => {
                for item in items {
                    if item.is_empty() || item.contains(LIST_SEP) {
                        self.fail(format!("list element {item:?} is empty or contains ', '"));
                    }
                }
                let joined = items.join(LIST_SEP);
                self.check_text(&joined);
                joined
            }
        };
        self.cells.push(cell);
    }
}

/// Typed access to the cells of one data line.
pub struct CellReader<'a> {
    line: usize,
    index: &'a HashMap<String, usize>,
    cells: Vec<&'a str>,
}

impl<'a> CellReader<'a> {
    fn raw(&self, column: &str) -> Option<&'a str> {
        let idx = *self.index.get(column)?;
        let cell = self.cells[idx];
        (cell != NA).then_some(cell)
    }

    fn coercion(&self, column: &str, value: &str, expected: &'static str) -> TableError {
        TableError::Coercion {
            line: self.line,
            column: column.to_string(),
            value: value.to_string(),
            expected,
        }
    }

    pub fn text(&self, column: &str) -> Option<String> {
        self.raw(column).map(str::to_string)
    }

    pub fn id(&self, column: &str) -> Result<ItemId, TableError> {
        let value = self
            .raw(column)
            .ok_or_else(|| self.coercion(column, NA, "an item id"))?;
        ItemId::parse(value).map_err(|_| self.coercion(column, value, "an item id"))
    }

    pub fn real(&self, column: &str) -> Result<Option<f64>, TableError> {
        match self.raw(column) {
            None => Ok(None),
            Some(v) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(self.coercion(column, v, "a finite real")),
            },
        }
    }

    pub fn bits(&self, column: &str) -> Result<Option<f64>, TableError> {
        match self.real(column)? {
            Some(x) if x < 0.0 => Err(self.coercion(column, self.raw(column).unwrap_or_default(), "non-negative bits")),
            other => Ok(other),
        }
    }

    pub fn count(&self, column: &str) -> Result<Option<u32>, TableError> {
        match self.raw(column) {
            None => Ok(None),
            Some(v) => v
                .parse::<u32>()
                .map(Some)
                .map_err(|_| self.coercion(column, v, "a count")),
        }
    }

    pub fn list(&self, column: &str) -> Option<Vec<String>> {
        self.raw(column)
            .map(|v| v.split(LIST_SEP).map(str::to_string).collect())
    }
}

/// Writes `rows` as a gzip-compressed TSV with the given provenance lines
/// (each emitted as `# <line>` before the header).
pub fn write_table<R: TableRecord, W: Write>(
    rows: &[R],
    sink: W,
    provenance: &[String],
) -> Result<(), TableError> {
    let mut gz = GzEncoder::new(sink, Compression::default());
    write_table_plain(rows, &mut gz, provenance)?;
    gz.finish()?.flush()?;
    Ok(())
}

/// Same as [`write_table`] but without compression.
pub fn write_table_plain<R: TableRecord, W: Write>(
    rows: &[R],
    mut sink: W,
    provenance: &[String],
) -> Result<(), TableError> {
    let extra_names: Vec<String> = rows
        .first()
        .map(|r| r.extra().iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();

    let mut out = String::new();
    for line in provenance {
        for l in line.lines() {
            out.push_str("# ");
            out.push_str(l);
            out.push('\n');
        }
    }
    let header: Vec<&str> = R::FORMAT
        .columns()
        .iter()
        .map(|c| c.name.as_str())
        .chain(extra_names.iter().map(String::as_str))
        .collect();
    out.push_str(&header.join("\t"));
    out.push('\n');
    sink.write_all(out.as_bytes())?;

    for (i, row) in rows.iter().enumerate() {
        let names: Vec<&String> = row.extra().iter().map(|(k, _)| k).collect();
        if names.len() != extra_names.len() || names.iter().zip(&extra_names).any(|(a, b)| *a != b) {
            return Err(TableError::Heterogeneous {
                row: i,
                expected: extra_names.clone(),
                found: names.into_iter().cloned().collect(),
            });
        }
        let mut enc = CellWriter::new(i, R::FORMAT);
        row.to_cells(&mut enc);
        debug_assert_eq!(enc.cells.len(), R::FORMAT.columns().len());
        for (_, v) in row.extra() {
            if enc.check_text(v) {
                enc.cells.push(v.clone());
            }
        }
        if let Some(err) = enc.error {
            return Err(err);
        }
        let mut line = enc.cells.join("\t");
        line.push('\n');
        sink.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Table contents plus any provenance lines found before the header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<R> {
    pub provenance: Vec<String>,
    pub rows: Vec<R>,
}

/// Reads a TSV table, gzip-compressed or plain.
pub fn read_table<R: TableRecord, S: Read>(source: S) -> Result<Table<R>, TableError> {
    let mut reader = BufReader::new(source);
    let is_gz = {
        let head = reader.fill_buf()?;
        head.len() >= 2 && head[0] == 0x1f && head[1] == 0x8b
    };
    let mut text = String::new();
    if is_gz {
        MultiGzDecoder::new(reader).read_to_string(&mut text)?;
    } else {
        reader.read_to_string(&mut text)?;
    }
    parse_table(&text)
}

fn parse_table<R: TableRecord>(text: &str) -> Result<Table<R>, TableError> {
    let mut lines = text.split('\n').enumerate().peekable();
    let mut provenance = Vec::new();
    let header = loop {
        match lines.next() {
            None => return Err(TableError::NoHeader),
            Some((_, l)) if l.starts_with('#') => {
                let l = l.strip_prefix('#').unwrap_or(l);
                provenance.push(l.strip_prefix(' ').unwrap_or(l).to_string());
            }
            Some((_, l)) if l.is_empty() => return Err(TableError::NoHeader),
            Some((_, l)) => break l,
        }
    };
    let names: Vec<&str> = header.split('\t').collect();
    let mut index = HashMap::new();
    for (i, name) in names.iter().enumerate() {
        if index.insert(name.to_string(), i).is_some() {
            return Err(TableError::DuplicateColumn(name.to_string()));
        }
    }
    let specs = R::FORMAT.columns();
    for spec in specs {
        if !spec.optional && !index.contains_key(&spec.name) {
            return Err(TableError::MissingColumn(spec.name.clone()));
        }
    }
    let extra_cols: Vec<(usize, &str)> = names
        .iter()
        .enumerate()
        .filter(|(_, n)| !specs.iter().any(|s| s.name == **n))
        .map(|(i, n)| (i, *n))
        .collect();

    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != names.len() {
            return Err(TableError::RaggedRow {
                line: n + 1,
                expected: names.len(),
                found: cells.len(),
            });
        }
        let reader = CellReader {
            line: n + 1,
            index: &index,
            cells,
        };
        let mut record = R::from_cells(&reader)?;
        record.set_extra(
            extra_cols
                .iter()
                .map(|(i, name)| (name.to_string(), reader.cells[*i].to_string()))
                .collect(),
        );
        rows.push(record);
    }
    Ok(Table { provenance, rows })
}

impl TableRecord for WordRow {
    const FORMAT: Format = Format::Vertical;

    fn to_cells(&self, enc: &mut CellWriter) {
        enc.id(&self.word_id);
        let c = &self.conllu;
        for f in [
            &c.id, &c.token, &c.lemma, &c.pos, &c.xpos, &c.feats, &c.head_id, &c.rel, &c.deps,
            &c.misc,
        ] {
            enc.text(f);
        }
        enc.bits(self.srp_base_gpt2);
        enc.bits(self.srp_ft_gpt2);
        enc.bits(self.srp_base_mt);
        enc.bits(self.srp_ft_mt);
        enc.list(&self.aligned_word);
        enc.list(&self.aligned_word_id);
        let m = &self.meta;
        for f in [
            &m.doc_id, &m.seg_id, &m.lpair, &m.lang, &m.mode, &m.ttype, &m.speaker_id,
        ] {
            enc.text(f);
        }
        enc.text(&self.raw_seg);
    }

    fn from_cells(r: &CellReader<'_>) -> Result<Self, TableError> {
        Ok(WordRow {
            word_id: r.id("word_id")?,
            conllu: Conllu {
                id: r.text("id"),
                token: r.text("token"),
                lemma: r.text("lemma"),
                pos: r.text("pos"),
                xpos: r.text("xpos"),
                feats: r.text("feats"),
                head_id: r.text("head_id"),
                rel: r.text("rel"),
                deps: r.text("deps"),
                misc: r.text("misc"),
            },
            srp_base_gpt2: r.bits("srp_base_gpt2")?,
            srp_ft_gpt2: r.bits("srp_ft_gpt2")?,
            srp_base_mt: r.bits("srp_base_mt")?,
            srp_ft_mt: r.bits("srp_ft_mt")?,
            aligned_word: r.list("aligned_word"),
            aligned_word_id: r.list("aligned_word_id"),
            meta: RowMeta {
                doc_id: r.text("doc_id"),
                seg_id: r.text("seg_id"),
                lpair: r.text("lpair"),
                lang: r.text("lang"),
                mode: r.text("mode"),
                ttype: r.text("ttype"),
                speaker_id: r.text("speaker_id"),
            },
            raw_seg: r.text("raw_seg"),
            extra: Vec::new(),
        })
    }

    fn extra(&self) -> &[(String, String)] {
        &self.extra
    }

    fn set_extra(&mut self, extra: Vec<(String, String)>) {
        self.extra = extra;
    }
}

impl TableRecord for SegmentRecord {
    const FORMAT: Format = Format::Long;

    fn to_cells(&self, enc: &mut CellWriter) {
        enc.id(&self.seg_id);
        for f in [
            &self.doc_id,
            &self.lpair,
            &self.lang,
            &self.mode,
            &self.ttype,
            &self.speaker_id,
        ] {
            enc.text(f);
        }
        enc.real(self.delivery_rate);
        enc.real(self.delivery_wpm);
        enc.real(self.speech_timing_sec);
        enc.text(&self.source_text_delivery_type);
        enc.bits(self.base_gpt_avs);
        enc.bits(self.base_gpt_avs_subw);
        enc.bits(self.ft_gpt_avs);
        enc.bits(self.ft_gpt_avs_subw);
        enc.count(self.disfluencies);
        enc.count(self.fillers);
        enc.count(self.fillers_plus_3);
        enc.text(&self.raw_seg);
        enc.text(&self.tokens);
        enc.count(self.wc_tok);
    }

    fn from_cells(r: &CellReader<'_>) -> Result<Self, TableError> {
        Ok(SegmentRecord {
            seg_id: r.id("seg_id")?,
            doc_id: r.text("doc_id"),
            lpair: r.text("lpair"),
            lang: r.text("lang"),
            mode: r.text("mode"),
            ttype: r.text("ttype"),
            speaker_id: r.text("speaker_id"),
            delivery_rate: r.real("delivery_rate")?,
            delivery_wpm: r.real("delivery_wpm")?,
            speech_timing_sec: r.real("speech_timing_sec")?,
            source_text_delivery_type: r.text("source_text_delivery_type"),
            base_gpt_avs: r.bits("base_gpt_AvS")?,
            base_gpt_avs_subw: r.bits("base_gpt_AvS_subw")?,
            ft_gpt_avs: r.bits("ft_gpt_AvS")?,
            ft_gpt_avs_subw: r.bits("ft_gpt_AvS_subw")?,
            disfluencies: r.count("disfluencies")?,
            fillers: r.count("fillers")?,
            fillers_plus_3: r.count("fillers+3")?,
            raw_seg: r.text("raw_seg"),
            tokens: r.text("tokens"),
            wc_tok: r.count("wc_tok")?,
            extra: Vec::new(),
        })
    }

    fn extra(&self) -> &[(String, String)] {
        &self.extra
    }

    fn set_extra(&mut self, extra: Vec<(String, String)>) {
        self.extra = extra;
    }
}

impl TableRecord for SegmentPairRecord {
    const FORMAT: Format = Format::Wide;

    fn to_cells(&self, enc: &mut CellWriter) {
        enc.id(&self.src_seg_id);
        enc.id(&self.tgt_seg_id);
        for f in [
            &self.src_doc_id,
            &self.tgt_doc_id,
            &self.lpair,
            &self.mode,
            &self.src_raw_seg,
            &self.tgt_raw_seg,
        ] {
            enc.text(f);
        }
        enc.bits(self.base_mt_avs);
        enc.bits(self.base_mt_avs_subw);
        enc.bits(self.ft_mt_avs);
        enc.bits(self.ft_mt_avs_subw);
        enc.real(self.base_bleu);
        enc.real(self.ft_bleu);
    }

    fn from_cells(r: &CellReader<'_>) -> Result<Self, TableError> {
        Ok(SegmentPairRecord {
            src_seg_id: r.id("src_seg_id")?,
            tgt_seg_id: r.id("tgt_seg_id")?,
            src_doc_id: r.text("src_doc_id"),
            tgt_doc_id: r.text("tgt_doc_id"),
            lpair: r.text("lpair"),
            mode: r.text("mode"),
            src_raw_seg: r.text("src_raw_seg"),
            tgt_raw_seg: r.text("tgt_raw_seg"),
            base_mt_avs: r.bits("base_mt_AvS")?,
            base_mt_avs_subw: r.bits("base_mt_AvS_subw")?,
            ft_mt_avs: r.bits("ft_mt_AvS")?,
            ft_mt_avs_subw: r.bits("ft_mt_AvS_subw")?,
            base_bleu: r.real("base_bleu")?,
            ft_bleu: r.real("ft_bleu")?,
            extra: Vec::new(),
        })
    }

    fn extra(&self) -> &[(String, String)] {
        &self.extra
    }

    fn set_extra(&mut self, extra: Vec<(String, String)>) {
        self.extra = extra;
    }
}
