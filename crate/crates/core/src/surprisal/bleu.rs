//! Sentence-level BLEU as computed by sacreBLEU's `sentence_bleu`: the
//! `13a` tokenizer, up to 4-grams, effective order and exponential
//! smoothing of zero n-gram matches.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

const MAX_ORDER: usize = 4;

fn rules() -> &'static [(Regex, &'static str); 4] {
    static RULES: OnceLock<[(Regex, &'static str); 4]> = OnceLock::new();
    RULES.get_or_init(|| {
        let re = |p: &str| Regex::new(p).expect("static pattern");
        [
            (re(r"([\{-~\[-` -&\(-\+:-@/])"), " $1 "),
            (re(r"([^0-9])([\.,])"), "$1 $2 "),
            (re(r"([\.,])([^0-9])"), " $1 $2"),
            (re(r"([0-9])(-)"), "$1 $2 "),
        ]
    })
}

/// The mteval-v13a tokenization.
pub fn tokenize_13a(line: &str) -> Vec<String> {
    let mut s = line
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if s.contains('&') {
        s = s
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut s = format!(" {s} ");
    for (re, rep) in rules() {
        s = re.replace_all(&s, *rep).into_owned();
    }
    s.split_whitespace().map(str::to_string).collect()
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// BLEU in [0, 100] of `hyp` against a single reference.
pub fn sentence_bleu(hyp: &str, reference: &str) -> f64 {
    let h = tokenize_13a(hyp);
    let r = tokenize_13a(reference);
    if h.is_empty() {
        return 0.0;
    }
    let mut correct = [0usize; MAX_ORDER];
    let mut total = [0usize; MAX_ORDER];
    for n in 1..=MAX_ORDER {
        let hc = ngrams(&h, n);
        let rc = ngrams(&r, n);
        total[n - 1] = h.len().saturating_sub(n - 1);
        correct[n - 1] = hc
            .iter()
            .map(|(g, c)| (*c).min(rc.get(g).copied().unwrap_or(0)))
            .sum();
    }
    if correct.iter().all(|&c| c == 0) {
        return 0.0;
    }
    // Precisions as fractions of 1 so that a perfect match is exactly 1.
    let mut precisions = [0.0f64; MAX_ORDER];
    let mut smooth = 1.0;
    let mut order = 0;
    for n in 0..MAX_ORDER {
        if total[n] == 0 {
            break;
        }
        order = n + 1;
        precisions[n] = if correct[n] == 0 {
            smooth *= 2.0;
            1.0 / (smooth * total[n] as f64)
        } else {
            correct[n] as f64 / total[n] as f64
        };
    }
    let (c, rl) = (h.len() as f64, r.len() as f64);
    let bp = if c >= rl { 1.0 } else { (1.0 - rl / c).exp() };
    let gm = precisions[..order]
        .iter()
        .product::<f64>()
        .powf(1.0 / order as f64);
    (100.0 * bp * gm).min(100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize_13a("Hello, world."), ["Hello", ",", "world", "."]);
        assert_eq!(tokenize_13a("3.5 and 1,000"), ["3.5", "and", "1,000"]);
        assert_eq!(tokenize_13a("it's (well-known)"), ["it's", "(", "well-known", ")"]);
        assert_eq!(tokenize_13a("10-20 &amp; more"), ["10", "-", "20", "&", "more"]);
    }

    #[test]
    fn identity_is_100() {
        assert_eq!(sentence_bleu("It's all very well-intended.", "It's all very well-intended."), 100.0);
        assert_eq!(sentence_bleu("yes", "yes"), 100.0);
    }

    #[test]
    fn hand_computed_pair() {
        // p1 = 3/4, p2 = 1/3, p3 = 1/(2*2), p4 = 1/(4*1); BP = 1.
        let oracle = 100.0 * (0.75f64 * (1.0 / 3.0) * 0.25 * 0.25).powf(0.25);
        let got = sentence_bleu("a b x d", "a b c d");
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 35.35533905932738).abs() < 1e-9);
    }

    #[test]
    fn unigram_overlap_is_positive() {
        let b = sentence_bleu("d c b a", "a b c d");
        assert!(b > 0.0 && b < 100.0);
        assert_eq!(sentence_bleu("x y", "a b"), 0.0);
        assert_eq!(sentence_bleu("", "a b"), 0.0);
    }

    #[test]
    fn short_hypothesis_pays_brevity() {
        // Effective order 2, BP = exp(1 - 4/2).
        let oracle = 100.0 * (1.0f64 - 2.0).exp();
        assert!((sentence_bleu("a b", "a b c d") - oracle).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bounded(h in "[a-d ]{0,20}", r in "[a-d ]{1,20}") {
            let b = sentence_bleu(&h, &r);
            prop_assert!((0.0..=100.0).contains(&b));
            if tokenize_13a(&h) != tokenize_13a(&r) {
                prop_assert!(b < 100.0);
            }
        }
    }
}
