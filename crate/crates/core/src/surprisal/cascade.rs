//! Realignment of pre-aggregated subword units to parser words.
//!
//! Units and words are walked together in blocks that end where both
//! sides reach the same character boundary (whitespace ignored). Each
//! block is then resolved by the first rule that applies.

use std::ops::Range;

use crate::adapter::is_punct;
use crate::bytelevel;

/// Share of a split unit assigned to the word it starts in.
pub const HEAD_SHARE: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecoveryRule {
    /// Unit and word surfaces are identical.
    Exact,
    /// Identical after decoding byte-level surfaces and removing whitespace.
    Normalized,
    Abbreviation,
    FloatLike,
    PunctSequence,
    Split7525,
    Summed,
    Failed,
}

impl RecoveryRule {
    pub fn name(self) -> &'static str {
        match self {
            RecoveryRule::Exact => "none",
            RecoveryRule::Normalized => "normalized",
            RecoveryRule::Abbreviation => "abbreviation",
            RecoveryRule::FloatLike => "float_like",
            RecoveryRule::PunctSequence => "punct_sequence",
            RecoveryRule::Split7525 => "split_75_25",
            RecoveryRule::Summed => "summed",
            RecoveryRule::Failed => "failed",
        }
    }
}

/// A pre-aggregated scoring unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub surface: String,
    pub bits: f64,
    pub n_subwords: usize,
}

impl Unit {
    pub fn new(surface: &str, bits: f64) -> Self {
        Unit {
            surface: surface.to_string(),
            bits,
            n_subwords: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordSurprisal {
    pub word_index: usize,
    pub bits: Option<f64>,
    pub n_subwords: usize,
    pub rule: RecoveryRule,
}

/// Units `units` were resolved against words `words` by `rule`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub units: Range<usize>,
    pub words: Range<usize>,
    pub rule: RecoveryRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realignment {
    pub words: Vec<WordSurprisal>,
    pub blocks: Vec<Block>,
}

fn norm_unit(s: &str) -> Vec<char> {
    bytelevel::decode_lossy(s)
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect()
}

fn norm_word(s: &str) -> Vec<char> {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn is_abbreviation(word: &str) -> bool {
    word.ends_with('.') && word.chars().any(char::is_alphabetic)
}

struct Walk<'a, W> {
    units: &'a [Unit],
    words: &'a [W],
    un: Vec<Vec<char>>,
    wn: Vec<Vec<char>>,
    out: Vec<WordSurprisal>,
    blocks: Vec<Block>,
}

impl<W: AsRef<str>> Walk<'_, W> {
    fn credit(&mut self, word: usize, bits: f64, n_subwords: usize, rule: RecoveryRule) {
        let w = &mut self.out[word];
        w.bits = Some(w.bits.unwrap_or(0.0) + bits);
        w.n_subwords += n_subwords;
        w.rule = rule;
    }

    fn fail(&mut self, units: Range<usize>, words: Range<usize>) {
        for j in words.clone() {
            self.out[j] = WordSurprisal {
                word_index: j,
                bits: None,
                n_subwords: 0,
                rule: RecoveryRule::Failed,
            };
        }
        self.blocks.push(Block {
            units,
            words,
            rule: RecoveryRule::Failed,
        });
    }

    /// Resolves a block whose two sides spell the same characters.
    fn resolve(&mut self, units: Range<usize>, words: Range<usize>) -> bool {
        let (k, m) = (units.len(), words.len());
        let word = |j: usize| self.words[j].as_ref();
        let rule = if k == 1 && m == 1 {
            let rule = if self.units[units.start].surface == word(words.start) {
                RecoveryRule::Exact
            } else {
                RecoveryRule::Normalized
            };
            let u = &self.units[units.start];
            let (bits, n) = (u.bits, u.n_subwords);
            self.credit(words.start, bits, n, rule);
            rule
        } else if m == 1 {
            let w = word(words.start);
            let rule = if is_abbreviation(w) {
                RecoveryRule::Abbreviation
            } else if w.chars().any(|c| c.is_ascii_digit()) {
                RecoveryRule::FloatLike
            } else {
                RecoveryRule::Summed
            };
            let bits: f64 = self.units[units.clone()].iter().map(|u| u.bits).sum();
            let n: usize = self.units[units.clone()].iter().map(|u| u.n_subwords).sum();
            self.credit(words.start, bits, n, rule);
            rule
        } else {
            // One or more units straddle word boundaries; every straddled
            // trailing word must be punctuation.
            let mut shares: Vec<(usize, f64, usize)> = Vec::new();
            let word_ends: Vec<usize> = words
                .clone()
                .scan(0, |acc, j| {
                    *acc += self.wn[j].len();
                    Some(*acc)
                })
                .collect();
            let mut pos = 0;
            for i in units.clone() {
                let (start, end) = (pos, pos + self.un[i].len());
                pos = end;
                let first = word_ends.iter().position(|&e| e > start).unwrap_or(m - 1);
                let last = if end == start {
                    first
                } else {
                    word_ends.iter().position(|&e| e >= end).unwrap_or(m - 1)
                };
                let u = &self.units[i];
                if first == last {
                    shares.push((words.start + first, u.bits, u.n_subwords));
                    continue;
                }
                if !(first + 1..=last).all(|t| is_punct(word(words.start + t))) {
                    return false;
                }
                shares.push((words.start + first, HEAD_SHARE * u.bits, u.n_subwords));
                let tail = (1.0 - HEAD_SHARE) * u.bits / (last - first) as f64;
                for t in first + 1..=last {
                    shares.push((words.start + t, tail, 0));
                }
            }
            let rule = if k == 1 {
                RecoveryRule::Split7525
            } else {
                RecoveryRule::PunctSequence
            };
            for (j, bits, n) in shares {
                self.credit(j, bits, n, rule);
            }
            rule
        };
        self.blocks.push(Block { units, words, rule });
        true
    }

    /// First later position where a unit and a word match and the rest of
    /// both sequences have the same length.
    fn resync(&self, i0: usize, j0: usize) -> Option<(usize, usize)> {
        let suffix = |v: &[Vec<char>]| {
            let mut s = vec![0usize; v.len() + 1];
            for i in (0..v.len()).rev() {
                s[i] = s[i + 1] + v[i].len();
            }
            s
        };
        let (su, sw) = (suffix(&self.un), suffix(&self.wn));
        let mut best: Option<(usize, usize)> = None;
        for i in i0..self.un.len() {
            for j in j0..self.wn.len() {
                if (i, j) == (i0, j0) || self.un[i].is_empty() {
                    continue;
                }
                if let Some((bi, bj)) = best {
                    if i + j > bi + bj || (i + j == bi + bj && i >= bi) {
                        continue;
                    }
                }
                if self.un[i] == self.wn[j] && su[i] == sw[j] {
                    best = Some((i, j));
                }
            }
        }
        best
    }
}

/// Assigns unit bits to words. Words in unresolvable stretches get null
/// bits and [`RecoveryRule::Failed`]; everything else is recovered by the
/// first matching rule and the block list records which units fed which
/// words.
pub fn realign_cascade<W: AsRef<str>>(units: &[Unit], words: &[W]) -> Realignment {
    let mut walk = Walk {
        units,
        words,
        un: units.iter().map(|u| norm_unit(&u.surface)).collect(),
        wn: words.iter().map(|w| norm_word(w.as_ref())).collect(),
        out: (0..words.len())
            .map(|j| WordSurprisal {
                word_index: j,
                bits: None,
                n_subwords: 0,
                rule: RecoveryRule::Failed,
            })
            .collect(),
        blocks: Vec::new(),
    };
    let (nu, nw) = (units.len(), words.len());
    let (mut i, mut j) = (0, 0);
    while i < nu && j < nw {
        let (i0, j0) = (i, j);
        let (mut a, mut b) = (walk.un[i].len(), walk.wn[j].len());
        let (mut i1, mut j1) = (i + 1, j + 1);
        let mut complete = true;
        while a != b {
            if a < b {
                if i1 == nu {
                    complete = false;
                    break;
                }
                a += walk.un[i1].len();
                i1 += 1;
            } else {
                if j1 == nw {
                    complete = false;
                    break;
                }
                b += walk.wn[j1].len();
                j1 += 1;
            }
        }
        let same = complete && {
            let left: Vec<char> = walk.un[i0..i1].concat();
            let right: Vec<char> = walk.wn[j0..j1].concat();
            left == right
        };
        if same && walk.resolve(i0..i1, j0..j1) {
            i = i1;
            j = j1;
            continue;
        }
        match walk.resync(i0, j0) {
            Some((ri, rj)) => {
                walk.fail(i0..ri, j0..rj);
                i = ri;
                j = rj;
            }
            None => {
                walk.fail(i0..nu, j0..nw);
                i = nu;
                j = nw;
            }
        }
    }
    if i < nu || j < nw {
        walk.fail(i..nu, j..nw);
    }
    Realignment {
        words: walk.out,
        blocks: walk.blocks,
    }
}
