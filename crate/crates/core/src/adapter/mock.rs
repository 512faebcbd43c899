//! Deterministic stand-ins for the external models, used by tests.

use super::{
    AdapterError, CausalLm, Convention, EmbeddedSubword, EncoderAdapter, LogBase, MtAdapter,
    ParserAdapter, RawSubword, Sentence,
};
use crate::records::Conllu;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Splits one whitespace word into subword pieces: letter/digit runs in
/// chunks of at most `chunk` characters, and runs of other characters kept
/// together (so `99%.` gives `99`, `%.`).
pub fn pieces(word: &str, chunk: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut cur_alnum = None;
    for c in word.chars() {
        let alnum = c.is_alphanumeric();
        let boundary = match cur_alnum {
            None => false,
            Some(prev) => prev != alnum || (alnum && cur.chars().count() >= chunk),
        };
        if boundary {
            out.push(std::mem::take(&mut cur));
        }
        cur.push(c);
        cur_alnum = Some(alnum);
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Subword tokenization shared by the mock models: `marker` is prefixed to
/// the first piece of every word except the first.
pub fn tokenize(text: &str, marker: &str, chunk: usize) -> Vec<String> {
    let mut out = Vec::new();
    for (w, word) in text.split_whitespace().enumerate() {
        for (p, piece) in pieces(word, chunk).into_iter().enumerate() {
            if p == 0 && w > 0 {
                out.push(format!("{marker}{piece}"));
            } else {
                out.push(piece);
            }
        }
    }
    out
}

fn hashed_logprob(seed: u64, context: &[String], token: &str) -> f64 {
    let mut h = fnv(FNV_OFFSET ^ seed, b"<|bos|>");
    for c in context {
        h = fnv(h, c.as_bytes());
        h = fnv(h, &[0xff]);
    }
    h = fnv(h, token.as_bytes());
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    (0.001 + 0.95 * u).ln()
}

/// A causal LM whose log-probabilities are a hash of the full left context
/// and the subword, in natural-log units.
#[derive(Debug, Clone)]
pub struct HashLm {
    pub seed: u64,
    pub chunk: usize,
    /// When set, every subword gets this natural log-probability.
    pub fixed: Option<f64>,
    convention: Convention,
}

impl HashLm {
    pub fn new(seed: u64) -> Self {
        HashLm {
            seed,
            chunk: 4,
            fixed: None,
            convention: Convention {
                begin_marker: Some("Ġ".to_string()),
                byte_level: false,
                log_base: LogBase::E,
            },
        }
    }

    pub fn constant(p: f64) -> Self {
        HashLm {
            fixed: Some(p.ln()),
            ..HashLm::new(0)
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        tokenize(text, "Ġ", self.chunk)
    }
}

impl CausalLm for HashLm {
    fn identity(&self) -> String {
        format!("mock-hash-lm(seed={},chunk={})", self.seed, self.chunk)
    }

    fn convention(&self) -> &Convention {
        &self.convention
    }

    fn score(&self, text: &str) -> Result<Vec<RawSubword>, AdapterError> {
        self.score_subwords(&self.tokenize(text))
    }

    fn score_subwords(&self, subwords: &[String]) -> Result<Vec<RawSubword>, AdapterError> {
        Ok(subwords
            .iter()
            .enumerate()
            .map(|(i, s)| RawSubword {
                surface: s.clone(),
                logprob: self
                    .fixed
                    .unwrap_or_else(|| hashed_logprob(self.seed, &subwords[..i], s)),
                begins_word: None,
            })
            .collect())
    }
}

/// A translation model with hashed teacher-forced scores. Its argmax
/// prediction copies the gold subword unless the hash says otherwise.
#[derive(Debug, Clone)]
pub struct HashMt {
    pub seed: u64,
    pub fixed: Option<f64>,
    /// Probability that the argmax equals the gold subword.
    pub copy_rate: f64,
    convention: Convention,
}

impl HashMt {
    pub fn new(seed: u64) -> Self {
        HashMt {
            seed,
            fixed: None,
            copy_rate: 0.7,
            convention: Convention::sentencepiece(),
        }
    }

    pub fn constant(p: f64) -> Self {
        HashMt {
            fixed: Some(p.ln()),
            copy_rate: 1.0,
            ..HashMt::new(0)
        }
    }

    pub fn tokenize(&self, tgt: &str) -> Vec<String> {
        let mut toks = tokenize(tgt, "▁", 5);
        if let Some(first) = toks.first_mut() {
            first.insert(0, '▁');
        }
        toks
    }
}

impl MtAdapter for HashMt {
    fn identity(&self) -> String {
        format!("mock-hash-mt(seed={})", self.seed)
    }

    fn convention(&self) -> &Convention {
        &self.convention
    }

    fn score(&self, src: &str, tgt: &str) -> Result<Vec<RawSubword>, AdapterError> {
        let toks = self.tokenize(tgt);
        let ctx_seed = fnv(self.seed, src.as_bytes());
        Ok(toks
            .iter()
            .enumerate()
            .map(|(i, s)| RawSubword {
                surface: s.clone(),
                logprob: self
                    .fixed
                    .unwrap_or_else(|| hashed_logprob(ctx_seed, &toks[..i], s)),
                begins_word: None,
            })
            .collect())
    }

    fn predict_argmax(&self, src: &str, tgt: &str) -> Result<Vec<String>, AdapterError> {
        let toks = self.tokenize(tgt);
        let ctx_seed = fnv(self.seed ^ 0x5bd1_e995, src.as_bytes());
        Ok(toks
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let u = hashed_logprob(ctx_seed, &toks[..i], s).exp();
                if u <= self.copy_rate {
                    s.clone()
                } else {
                    "▁the".to_string()
                }
            })
            .collect())
    }
}

/// An encoder that embeds each subword piece by hashing its lowercased
/// surface, so identical strings on both sides get identical vectors.
#[derive(Debug, Clone)]
pub struct HashEncoder {
    pub dim: usize,
}

impl HashEncoder {
    pub fn vector(&self, surface: &str) -> Vec<f64> {
        let key = surface.to_lowercase();
        (0..self.dim)
            .map(|k| {
                let h = fnv(fnv(FNV_OFFSET, key.as_bytes()), &(k as u64).to_le_bytes());
                (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect()
    }
}

impl EncoderAdapter for HashEncoder {
    fn identity(&self) -> String {
        format!("mock-hash-encoder(dim={})", self.dim)
    }

    fn embed(&self, text: &str, _lang: &str) -> Result<Vec<EmbeddedSubword>, AdapterError> {
        let mut out = Vec::new();
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let mut offset = start;
            for piece in pieces(&word, 4) {
                let len = piece.chars().count();
                out.push(EmbeddedSubword {
                    vector: self.vector(&piece),
                    surface: piece,
                    span: offset..offset + len,
                });
                offset += len;
            }
        }
        Ok(out)
    }
}

const EN_CLITICS: [&str; 7] = ["n't", "'s", "'m", "'re", "'ll", "'d", "'ve"];

fn split_multiword(word: &str, lang: &str) -> Option<Vec<String>> {
    if lang.eq_ignore_ascii_case("de") {
        let lower = word.to_lowercase();
        let parts: &[&str] = match lower.as_str() {
            "zum" => &["zu", "dem"],
            "zur" => &["zu", "der"],
            "im" => &["in", "dem"],
            "am" => &["an", "dem"],
            "vom" => &["von", "dem"],
            _ => return None,
        };
        let mut parts: Vec<String> = parts.iter().map(|s| s.to_string()).collect();
        if word.chars().next().is_some_and(char::is_uppercase) {
            let mut c = parts[0].chars();
            parts[0] = c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default();
        }
        return Some(parts);
    }
    for clitic in EN_CLITICS {
        if let Some(stem) = word.strip_suffix(clitic) {
            if !stem.is_empty() && stem.chars().all(char::is_alphabetic) {
                return Some(vec![stem.to_string(), clitic.to_string()]);
            }
        }
    }
    None
}

/// Splits a whitespace word into surface tokens: leading and trailing
/// punctuation become separate tokens, except that a final period stays
/// on dotted abbreviations (`p.m.`).
pub fn surface_tokens(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let is_p = |c: &char| !c.is_alphanumeric();
    let lead = chars.iter().take_while(|c| is_p(c)).count();
    if lead == chars.len() {
        return chars.iter().map(|c| c.to_string()).collect();
    }
    let trail = chars.iter().rev().take_while(|c| is_p(c)).count();
    let mut core: String = chars[lead..chars.len() - trail].iter().collect();
    let mut trailing: Vec<char> = chars[chars.len() - trail..].to_vec();
    if core.contains('.') && trailing.first() == Some(&'.') {
        core.push('.');
        trailing.remove(0);
    }
    let mut out: Vec<String> = chars[..lead].iter().map(|c| c.to_string()).collect();
    out.push(core);
    out.extend(trailing.iter().map(|c| c.to_string()));
    out
}

/// A rule-based parser good enough for pipeline tests: whitespace and
/// punctuation tokenization, clitic multiwords, sentence breaks after
/// `.!?` before a capital, every word attached to the sentence's first.
#[derive(Debug, Clone, Default)]
pub struct NaiveParser;

impl ParserAdapter for NaiveParser {
    fn identity(&self) -> String {
        "mock-naive-parser".to_string()
    }

    fn parse(&self, text: &str, lang: &str) -> Result<Vec<Sentence>, AdapterError> {
        let mut surfaces: Vec<String> = Vec::new();
        for word in text.split_whitespace() {
            surfaces.extend(surface_tokens(word));
        }
        let mut sentences: Vec<Vec<String>> = Vec::new();
        let mut cur: Vec<String> = Vec::new();
        for (i, s) in surfaces.iter().enumerate() {
            cur.push(s.clone());
            let ends = matches!(s.as_str(), "." | "!" | "?");
            let next_upper = surfaces
                .get(i + 1)
                .and_then(|n| n.chars().next())
                .is_some_and(char::is_uppercase);
            if ends && next_upper {
                sentences.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            sentences.push(cur);
        }
        Ok(sentences.iter().map(|s| build_sentence(s, lang)).collect())
    }
}

fn build_sentence(surfaces: &[String], lang: &str) -> Sentence {
    let mut rows = Vec::new();
    let mut next_id = 1usize;
    let word = |id: usize, form: &str| {
        let punct = form.chars().all(|c| !c.is_alphanumeric());
        let num = form.chars().any(|c| c.is_ascii_digit());
        Conllu {
            id: Some(id.to_string()),
            token: Some(form.to_string()),
            lemma: Some(form.to_lowercase()),
            pos: Some(if punct { "PUNCT" } else if num { "NUM" } else { "X" }.to_string()),
            xpos: Some("_".to_string()),
            feats: None,
            head_id: Some(if id == 1 { "0" } else { "1" }.to_string()),
            rel: Some(if id == 1 { "root" } else if punct { "punct" } else { "dep" }.to_string()),
            deps: None,
            misc: None,
        }
    };
    for s in surfaces {
        match split_multiword(s, lang) {
            Some(parts) => {
                let last = next_id + parts.len() - 1;
                rows.push(Conllu {
                    id: Some(format!("{next_id}-{last}")),
                    token: Some(s.clone()),
                    ..Conllu::default()
                });
                for p in parts {
                    rows.push(word(next_id, &p));
                    next_id += 1;
                }
            }
            None => {
                rows.push(word(next_id, s));
                next_id += 1;
            }
        }
    }
    rows
}

/// A parser that always fails, for exercising the unparsed-segment path.
#[derive(Debug, Clone, Default)]
pub struct FailingParser;

impl ParserAdapter for FailingParser {
    fn identity(&self) -> String {
        "mock-failing-parser".to_string()
    }

    fn parse(&self, _text: &str, _lang: &str) -> Result<Vec<Sentence>, AdapterError> {
        Err(AdapterError::Remote {
            role: "parser".to_string(),
            message: "parser unavailable".to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[String]) -> Vec<&str> {
        v.iter().map(String::as_str).collect()
    }

    #[test]
    fn pieces_split_on_class_changes() {
        assert_eq!(pieces("99%.", 4), ["99", "%."]);
        assert_eq!(pieces("well-intended.", 4), ["well", "-", "inte", "nded", "."]);
        assert_eq!(pieces("p.m.", 4), ["p", ".", "m", "."]);
    }

    #[test]
    fn lm_score_matches_explicit_subwords() {
        let lm = HashLm::new(7);
        let text = "It's all very well-intended.";
        let toks = lm.tokenize(text);
        assert_eq!(strs(&toks)[..4], ["It", "'", "s", "Ġall"]);
        assert_eq!(lm.score(text).unwrap(), lm.score_subwords(&toks).unwrap());
        let a = lm.score_subwords(&toks[..3]).unwrap();
        assert_eq!(a[..], lm.score(text).unwrap()[..3]);
    }

    #[test]
    fn lm_depends_on_context() {
        let lm = HashLm::new(1);
        let a = lm.score_subwords(&["x".into(), "Ġy".into()]).unwrap();
        let b = lm.score_subwords(&["z".into(), "Ġy".into()]).unwrap();
        assert_ne!(a[1].logprob, b[1].logprob);
        assert!(a.iter().all(|s| s.logprob < 0.0));
    }

    #[test]
    fn parser_handles_multiwords_and_sentences() {
        let s = NaiveParser.parse("It's all very well-intended. But there's", "en").unwrap();
        assert_eq!(s.len(), 2);
        let ids: Vec<&str> = s[0].iter().map(|r| r.id.as_deref().unwrap()).collect();
        assert_eq!(ids, ["1-2", "1", "2", "3", "4", "5", "6"]);
        let forms: Vec<&str> = s[0].iter().map(|r| r.token.as_deref().unwrap()).collect();
        assert_eq!(forms, ["It's", "It", "'s", "all", "very", "well-intended", "."]);
        assert_eq!(s[1][0].token.as_deref(), Some("But"));
    }

    #[test]
    fn parser_keeps_abbreviations_and_splits_symbols() {
        let s = NaiveParser.parse("at 5.30 p.m. on über 99%.", "en").unwrap();
        let forms: Vec<&str> = s[0].iter().map(|r| r.token.as_deref().unwrap()).collect();
        assert_eq!(forms, ["at", "5.30", "p.m.", "on", "über", "99", "%", "."]);
    }

    #[test]
    fn german_contractions_expand() {
        let s = NaiveParser.parse("Zum Beispiel", "de").unwrap();
        let forms: Vec<&str> = s[0].iter().map(|r| r.token.as_deref().unwrap()).collect();
        assert_eq!(forms, ["Zum", "Zu", "dem", "Beispiel"]);
    }

    #[test]
    fn encoder_spans_cover_pieces() {
        let e = HashEncoder { dim: 4 }.embed("gut, ja", "de").unwrap();
        let spans: Vec<_> = e.iter().map(|s| s.span.clone()).collect();
        assert_eq!(spans, [0..3, 3..4, 5..7]);
        assert_eq!(e[0].vector.len(), 4);
    }
}
