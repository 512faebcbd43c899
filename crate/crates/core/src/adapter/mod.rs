//! Contracts for the external models: causal LM, MT, encoder and UD parser.
//!
//! Model outputs are plain data so that they can be recorded and replayed;
//! see [`wire`] for the line-delimited exchange format.

pub mod mock;
pub mod wire;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bytelevel;
use crate::records::Conllu;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter '{role}' has no recorded response for {request}")]
    ReplayMiss { role: String, request: String },
    #[error("adapter '{role}' returned an error: {message}")]
    Remote { role: String, message: String },
    #[error("adapter '{role}' returned an unexpected response to {request}")]
    UnexpectedResponse { role: String, request: String },
    #[error("adapter '{role}' produced invalid output: {message}")]
    Invalid { role: String, message: String },
    #[error("adapter transport failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed exchange record on line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    E,
    Two,
    Ten,
}

impl LogBase {
    fn to_base2(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x,
            LogBase::E => x / std::f64::consts::LN_2,
            LogBase::Ten => x * std::f64::consts::LOG2_10,
        }
    }
}

/// How a model marks word starts and encodes its subword surfaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convention {
    /// Prefix that marks the first subword of a word (`Ġ`, `▁`), if any.
    pub begin_marker: Option<String>,
    /// Surfaces use the byte-level alphabet and need decoding.
    #[serde(default)]
    pub byte_level: bool,
    pub log_base: LogBase,
}

impl Convention {
    pub fn gpt2() -> Self {
        Convention {
            begin_marker: Some("Ġ".to_string()),
            byte_level: true,
            log_base: LogBase::E,
        }
    }

    pub fn sentencepiece() -> Self {
        Convention {
            begin_marker: Some("▁".to_string()),
            byte_level: false,
            log_base: LogBase::E,
        }
    }

    /// The surface with the begin marker removed and bytes decoded.
    pub fn clean_surface(&self, raw: &str) -> String {
        let stripped = match &self.begin_marker {
            Some(m) => raw.strip_prefix(m.as_str()).unwrap_or(raw),
            None => raw,
        };
        if self.byte_level {
            bytelevel::decode_lossy(stripped)
        } else {
            stripped.to_string()
        }
    }

    /// Joins raw subword surfaces back into text.
    pub fn detokenize(&self, raw: &[String]) -> String {
        let mut out = String::new();
        for s in raw {
            let stripped = match &self.begin_marker {
                Some(m) => match s.strip_prefix(m.as_str()) {
                    Some(rest) => {
                        out.push(' ');
                        rest
                    }
                    None => s.as_str(),
                },
                None => s.as_str(),
            };
            out.push_str(stripped);
        }
        if self.byte_level {
            out = bytelevel::decode_lossy(&out);
        }
        out.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

/// One subword as a model reports it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSubword {
    pub surface: String,
    pub logprob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub begins_word: Option<bool>,
}

/// A scored subword after ingestion: base-2 log-probability, marker
/// stripped, word-start flag resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordScore {
    pub raw: String,
    pub surface: String,
    pub logprob2: f64,
    pub begins_word: bool,
    pub is_punct_unit: bool,
}

impl SubwordScore {
    pub fn bits(&self) -> f64 {
        -self.logprob2
    }
}

pub fn is_punct(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| !c.is_alphanumeric() && !c.is_whitespace())
}

/// Converts raw model output to base-2 scores. Positive log-probabilities
/// within rounding noise are clamped to zero; anything larger is rejected.
pub fn ingest(
    role: &str,
    convention: &Convention,
    raw: &[RawSubword],
) -> Result<Vec<SubwordScore>, AdapterError> {
    raw.iter()
        .enumerate()
        .map(|(i, s)| {
            let mut lp = convention.log_base.to_base2(s.logprob);
            if !lp.is_finite() || lp > 1e-9 {
                return Err(AdapterError::Invalid {
                    role: role.to_string(),
                    message: format!("log-probability {} for subword {i} '{}'", s.logprob, s.surface),
                });
            }
            if lp > 0.0 {
                lp = 0.0;
            }
            let marked = convention
                .begin_marker
                .as_deref()
                .is_some_and(|m| s.surface.starts_with(m));
            let surface = convention.clean_surface(&s.surface);
            Ok(SubwordScore {
                begins_word: i == 0 || s.begins_word.unwrap_or(marked),
                is_punct_unit: is_punct(&surface),
                raw: s.surface.clone(),
                surface,
                logprob2: lp,
            })
        })
        .collect()
}

/// A left-to-right language model scored within one segment.
pub trait CausalLm {
    fn identity(&self) -> String;

    fn convention(&self) -> &Convention;

    /// Scores the whole text, the first subword conditioned on the begin
    /// token only.
    fn score(&self, text: &str) -> Result<Vec<RawSubword>, AdapterError>;

    /// Scores a given subword sequence (raw surfaces as returned by
    /// [`CausalLm::score`]), each conditioned on the begin token and the
    /// preceding subwords of this sequence only.
    fn score_subwords(&self, subwords: &[String]) -> Result<Vec<RawSubword>, AdapterError>;
}

/// A translation model under teacher forcing.
pub trait MtAdapter {
    fn identity(&self) -> String;

    fn convention(&self) -> &Convention;

    /// Target subword scores given the source and the gold target prefix.
    fn score(&self, src: &str, tgt: &str) -> Result<Vec<RawSubword>, AdapterError>;

    /// At each target position, the argmax subword given the gold prefix.
    fn predict_argmax(&self, src: &str, tgt: &str) -> Result<Vec<String>, AdapterError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSubword {
    pub surface: String,
    /// Character span in the embedded text.
    pub span: Range<usize>,
    pub vector: Vec<f64>,
}

/// A contextual encoder; each text is embedded on its own.
pub trait EncoderAdapter {
    fn identity(&self) -> String;

    fn embed(&self, text: &str, lang: &str) -> Result<Vec<EmbeddedSubword>, AdapterError>;
}

/// One parsed sentence: CoNLL-U rows, multiword ranges (`1-2`) included.
pub type Sentence = Vec<Conllu>;

/// A UD parser fed raw, detokenized text.
pub trait ParserAdapter {
    fn identity(&self) -> String;

    fn parse(&self, text: &str, lang: &str) -> Result<Vec<Sentence>, AdapterError>;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(surface: &str, logprob: f64) -> RawSubword {
        RawSubword {
            surface: surface.to_string(),
            logprob,
            begins_word: None,
        }
    }

    #[test]
    fn ingestion_converts_and_flags() {
        let conv = Convention::gpt2();
        let s = ingest(
            "lm",
            &conv,
            &[raw("It", 0.5f64.ln()), raw("'s", 0.25f64.ln()), raw("ĠÃ¼ber", 0.0), raw("%.", -1.0)],
        )
        .unwrap();
        assert!((s[0].bits() - 1.0).abs() < 1e-12);
        assert!((s[1].bits() - 2.0).abs() < 1e-12);
        assert_eq!(s[0].surface, "It");
        assert!(s[0].begins_word);
        assert!(!s[1].begins_word);
        assert!(s[2].begins_word);
        assert_eq!(s[2].surface, "über");
        assert!(s[3].is_punct_unit);
        assert!(!s[3].begins_word);
    }

    #[test]
    fn explicit_flag_overrides_marker() {
        let conv = Convention {
            begin_marker: None,
            byte_level: false,
            log_base: LogBase::Two,
        };
        let mut b = raw("b", -1.0);
        b.begins_word = Some(true);
        let s = ingest("lm", &conv, &[raw("a", -1.0), b, raw("c", -3.0)]).unwrap();
        assert_eq!(s.iter().map(|x| x.begins_word).collect::<Vec<_>>(), [true, true, false]);
        assert_eq!(s[2].bits(), 3.0);
    }

    #[test]
    fn positive_logprob_is_rejected() {
        let conv = Convention::gpt2();
        assert!(ingest("lm", &conv, &[raw("a", 0.3)]).is_err());
        assert!(ingest("lm", &conv, &[raw("a", f64::NAN)]).is_err());
        let s = ingest("lm", &conv, &[raw("a", 1e-12)]).unwrap();
        assert_eq!(s[0].logprob2, 0.0);
    }

    #[test]
    fn detokenize_restores_text() {
        let conv = Convention::gpt2();
        let toks: Vec<String> = ["It", "'s", "Ġall", "Ġvery", "Ġwell", "-", "int", "ended", "."]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(conv.detokenize(&toks), "It's all very well-intended.");
        let sp = Convention::sentencepiece();
        let toks: Vec<String> = ["▁guten", "▁Absicht", "en"].iter().map(|s| s.to_string()).collect();
        assert_eq!(sp.detokenize(&toks), "guten Absichten");
    }
}
