//! Hierarchical item identifiers.
//!
//! Every textual unit in the corpus carries an identifier of the form
//! `<ttype>_<mode>_<src>_<tgt>_<doc>-<seg>[:<word>[:<sub>]]`, for example
//! `ORG_SP_DE_EN_131-02:001` (first word of segment 02 of document 131).
//! The mode component is omitted in some released tables
//! (`SI_DE_EN_030-21:010:1`), so it is optional here.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Recording mode of a subcorpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Spoken,
    Written,
}

impl Mode {
    pub fn code(self) -> &'static str {
        match self {
            Mode::Spoken => "SP",
            Mode::Written => "WR",
        }
    }

    pub fn from_code(code: &str) -> Option<Mode> {
        match code {
            "SP" => Some(Mode::Spoken),
            "WR" => Some(Mode::Written),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::from_code(s).ok_or_else(|| format!("unknown mode code '{s}' (expected SP or WR)"))
    }
}

/// A zero-padded numeric component. The width is kept so that rendering a
/// parsed identifier reproduces the input exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Padded {
    pub value: u32,
    pub width: u8,
}

impl Padded {
    pub fn new(value: u32, width: u8) -> Self {
        Padded { value, width }
    }

    fn parse(s: &str) -> Option<Padded> {
        if s.is_empty() || s.len() > u8::MAX as usize || !s.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let value = s.parse().ok()?;
        Some(Padded {
            value,
            width: s.len() as u8,
        })
    }
}

impl fmt::Display for Padded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$}", self.value, width = self.width as usize)
    }
}

impl PartialOrd for Padded {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Padded {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.value, self.width).cmp(&(other.value, other.width))
    }
}

/// Zero-padding widths used when minting identifiers from integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdWidths {
    pub doc: u8,
    pub seg: u8,
    pub word: u8,
}

impl Default for IdWidths {
    fn default() -> Self {
        IdWidths {
            doc: 3,
            seg: 2,
            word: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdComponent {
    TextType,
    SrcLang,
    TgtLang,
    DocId,
    SegId,
    WordId,
    SubIndex,
    Trailing,
}

impl fmt::Display for IdComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            IdComponent::TextType => "ttype",
            IdComponent::SrcLang => "src_lang",
            IdComponent::TgtLang => "tgt_lang",
            IdComponent::DocId => "doc_id",
            IdComponent::SegId => "seg_id",
            IdComponent::WordId => "word_id",
            IdComponent::SubIndex => "sub_index",
            IdComponent::Trailing => "trailing input",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("malformed item id '{input}': missing {component}")]
    Missing { input: String, component: IdComponent },
    #[error("malformed item id '{input}': invalid {component} '{found}'")]
    Invalid {
        input: String,
        component: IdComponent,
        found: String,
    },
}

impl IdError {
    pub fn component(&self) -> IdComponent {
        match self {
            IdError::Missing { component, .. } | IdError::Invalid { component, .. } => *component,
        }
    }
}

/// Identifier of a document, segment, word or multitoken expansion row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemId {
    pub ttype: String,
    pub mode: Option<Mode>,
    pub src_lang: String,
    pub tgt_lang: String,
    pub doc: Padded,
    pub seg: Padded,
    pub word: Option<Padded>,
    pub sub_index: Option<u16>,
}

fn is_ttype(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_uppercase())
}

fn is_lang(s: &str) -> bool {
    s.len() == 2 && s.bytes().all(|b| b.is_ascii_uppercase())
}

impl ItemId {
    /// Segment-level identifier minted from integers.
    pub fn segment(
        ttype: &str,
        mode: Option<Mode>,
        src_lang: &str,
        tgt_lang: &str,
        doc: u32,
        seg: u32,
        widths: IdWidths,
    ) -> ItemId {
        ItemId {
            ttype: ttype.to_string(),
            mode,
            src_lang: src_lang.to_string(),
            tgt_lang: tgt_lang.to_string(),
            doc: Padded::new(doc, widths.doc),
            seg: Padded::new(seg, widths.seg),
            word: None,
            sub_index: None,
        }
    }

    pub fn parse(s: &str) -> Result<ItemId, IdError> {
        let missing = |component| IdError::Missing {
            input: s.to_string(),
            component,
        };
        let invalid = |component, found: &str| IdError::Invalid {
            input: s.to_string(),
            component,
            found: found.to_string(),
        };

        let mut parts = s.splitn(5, '_');
        let ttype = parts
            .next()
            .filter(|p| !p.is_empty())
            .ok_or_else(|| missing(IdComponent::TextType))?;
        if !is_ttype(ttype) {
            return Err(invalid(IdComponent::TextType, ttype));
        }

        // `SP`/`WR` in second place is a mode unless the rest only reads as
        // `<src>_<tgt>_<locator>` with `SP`/`WR` as the source language.
        let fields: Vec<&str> = s.split('_').collect();
        let mut next = parts.next().ok_or_else(|| missing(IdComponent::SrcLang))?;
        let lang_reading = fields.len() >= 4 && is_lang(fields[2]) && !is_lang(fields[3]);
        let mode = Mode::from_code(next).filter(|_| !lang_reading);
        if mode.is_some() {
            next = parts.next().ok_or_else(|| missing(IdComponent::SrcLang))?;
        }
        if !is_lang(next) {
            return Err(invalid(IdComponent::SrcLang, next));
        }
        let src_lang = next;

        let tgt_lang = parts.next().ok_or_else(|| missing(IdComponent::TgtLang))?;
        if !is_lang(tgt_lang) {
            return Err(invalid(IdComponent::TgtLang, tgt_lang));
        }

        // Without a mode component the remainder may still hold a fifth '_'
        // field; everything after the languages is the numeric locator.
        let rest: String = if mode.is_some() {
            parts.next().ok_or_else(|| missing(IdComponent::DocId))?.to_string()
        } else {
            let tail: Vec<&str> = parts.collect();
            if tail.is_empty() {
                return Err(missing(IdComponent::DocId));
            }
            tail.join("_")
        };

        let mut colon = rest.split(':');
        let docseg = colon.next().unwrap_or_default();
        let (doc, seg) = match docseg.split_once('-') {
            Some((d, g)) => (d, Some(g)),
            None => (docseg, None),
        };
        let doc = Padded::parse(doc).ok_or_else(|| {
            if doc.is_empty() {
                missing(IdComponent::DocId)
            } else {
                invalid(IdComponent::DocId, doc)
            }
        })?;
        let seg = seg.ok_or_else(|| missing(IdComponent::SegId))?;
        let seg = Padded::parse(seg).ok_or_else(|| invalid(IdComponent::SegId, seg))?;

        let word = match colon.next() {
            None => None,
            Some(w) => Some(Padded::parse(w).ok_or_else(|| invalid(IdComponent::WordId, w))?),
        };
        let sub_index = match colon.next() {
            None => None,
            Some(x) => {
                if x.is_empty() || !x.bytes().all(|b| b.is_ascii_digit()) || x.starts_with('0') {
                    return Err(invalid(IdComponent::SubIndex, x));
                }
                Some(x.parse().map_err(|_| invalid(IdComponent::SubIndex, x))?)
            }
        };
        if let Some(extra) = colon.next() {
            return Err(invalid(IdComponent::Trailing, extra));
        }

        Ok(ItemId {
            ttype: ttype.to_string(),
            mode,
            src_lang: src_lang.to_string(),
            tgt_lang: tgt_lang.to_string(),
            doc,
            seg,
            word,
            sub_index,
        })
    }

    /// The enclosing segment identifier (word and sub-index dropped).
    pub fn segment_id(&self) -> ItemId {
        ItemId {
            word: None,
            sub_index: None,
            ..self.clone()
        }
    }

    pub fn with_word(&self, word: u32, width: u8) -> ItemId {
        ItemId {
            word: Some(Padded::new(word, width)),
            sub_index: None,
            ..self.clone()
        }
    }

    pub fn with_sub(&self, sub: u16) -> ItemId {
        debug_assert!(self.word.is_some());
        ItemId {
            sub_index: Some(sub),
            ..self.clone()
        }
    }

    /// `<src>-<tgt>`, e.g. `DE-EN`.
    pub fn lpair(&self) -> String {
        format!("{}-{}", self.src_lang, self.tgt_lang)
    }

    /// The document key `<doc>` rendered with its padding.
    pub fn doc_key(&self) -> String {
        self.doc.to_string()
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_", self.ttype)?;
        if let Some(mode) = self.mode {
            write!(f, "{}_", mode)?;
        }
        write!(
            f,
            "{}_{}_{}-{}",
            self.src_lang, self.tgt_lang, self.doc, self.seg
        )?;
        if let Some(word) = self.word {
            write!(f, ":{word}")?;
            if let Some(sub) = self.sub_index {
                write!(f, ":{sub}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for ItemId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ItemId::parse(s)
    }
}
