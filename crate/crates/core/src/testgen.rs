//! Seeded generators of random table records, used by round-trip tests.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ids::{ItemId, Mode, Padded};
use crate::records::{SegmentPairRecord, SegmentRecord, WordRow};

const ALPHABET: &[char] = &[
    'a', 'b', 'E', 'z', 'ä', 'ß', 'é', '\'', '-', '.', ',', ' ', '"', '#', '%', '0', '7', ':',
];

fn text(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(0..12);
    let s: String = (0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect();
    if s == "NA" {
        "N A".to_string()
    } else {
        s
    }
}

fn opt_text(rng: &mut ChaCha8Rng) -> Option<String> {
    rng.random_bool(0.8).then(|| text(rng))
}

fn bits(rng: &mut ChaCha8Rng) -> Option<f64> {
    rng.random_bool(0.8).then(|| match rng.random_range(0..4) {
        0 => rng.random_range(0.0..60.0),
        1 => (rng.random_range(0.0..60.0f64) * 10.0).round() / 10.0,
        2 => 0.0,
        _ => rng.random::<f64>() * 1e-300,
    })
}

fn real(rng: &mut ChaCha8Rng) -> Option<f64> {
    rng.random_bool(0.8).then(|| rng.random_range(-1e6..1e6))
}

fn count(rng: &mut ChaCha8Rng) -> Option<u32> {
    rng.random_bool(0.8).then(|| rng.random_range(0..500))
}

fn list(rng: &mut ChaCha8Rng) -> Option<Vec<String>> {
    rng.random_bool(0.6).then(|| {
        let n = rng.random_range(1..4);
        (0..n)
            .map(|_| {
                let len = rng.random_range(1..8);
                (0..len)
                    .map(|_| *['x', 'y', 'Ü', '_', ':', '1'].choose(rng).unwrap())
                    .collect()
            })
            .collect()
    })
}

fn padded(rng: &mut ChaCha8Rng, width: u8, max: u32) -> Padded {
    Padded::new(rng.random_range(0..max), width)
}

pub fn item_id(rng: &mut ChaCha8Rng, word: bool) -> ItemId {
    let ttype = *["ORG", "SI", "TR"].choose(rng).unwrap();
    let mode = *[Some(Mode::Spoken), Some(Mode::Written), None].choose(rng).unwrap();
    let (src, tgt) = *[("DE", "EN"), ("EN", "DE")].choose(rng).unwrap();
    let mut id = ItemId {
        ttype: ttype.to_string(),
        mode,
        src_lang: src.to_string(),
        tgt_lang: tgt.to_string(),
        doc: padded(rng, 3, 1000),
        seg: padded(rng, 2, 100),
        word: None,
        sub_index: None,
    };
    if word {
        id.word = Some(padded(rng, 3, 1000));
        if rng.random_bool(0.2) {
            id.sub_index = Some(rng.random_range(1..4));
        }
    }
    id
}

pub fn word_rows(seed: u64, n: usize) -> Vec<WordRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut row = WordRow::new(item_id(&mut rng, true));
            let c = &mut row.conllu;
            for f in [
                &mut c.id,
                &mut c.token,
                &mut c.lemma,
                &mut c.pos,
                &mut c.xpos,
                &mut c.feats,
                &mut c.head_id,
                &mut c.rel,
                &mut c.deps,
                &mut c.misc,
            ] {
                *f = opt_text(&mut rng);
            }
            row.srp_base_gpt2 = bits(&mut rng);
            row.srp_ft_gpt2 = bits(&mut rng);
            row.srp_base_mt = bits(&mut rng);
            row.srp_ft_mt = bits(&mut rng);
            row.aligned_word = list(&mut rng);
            row.aligned_word_id = list(&mut rng);
            let m = &mut row.meta;
            for f in [
                &mut m.doc_id,
                &mut m.seg_id,
                &mut m.lpair,
                &mut m.lang,
                &mut m.mode,
                &mut m.ttype,
                &mut m.speaker_id,
            ] {
                *f = opt_text(&mut rng);
            }
            row.raw_seg = opt_text(&mut rng);
            row
        })
        .collect()
}

pub fn segment_records(seed: u64, n: usize) -> Vec<SegmentRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut r = SegmentRecord::new(item_id(&mut rng, false));
            r.doc_id = opt_text(&mut rng);
            r.lpair = opt_text(&mut rng);
            r.lang = opt_text(&mut rng);
            r.mode = opt_text(&mut rng);
            r.ttype = opt_text(&mut rng);
            r.speaker_id = opt_text(&mut rng);
            r.delivery_rate = real(&mut rng);
            r.delivery_wpm = real(&mut rng);
            r.speech_timing_sec = real(&mut rng);
            r.source_text_delivery_type = opt_text(&mut rng);
            r.base_gpt_avs = bits(&mut rng);
            r.base_gpt_avs_subw = bits(&mut rng);
            r.ft_gpt_avs = bits(&mut rng);
            r.ft_gpt_avs_subw = bits(&mut rng);
            r.disfluencies = count(&mut rng);
            r.fillers = count(&mut rng);
            r.fillers_plus_3 = count(&mut rng);
            r.raw_seg = opt_text(&mut rng);
            r.tokens = opt_text(&mut rng);
            r.wc_tok = count(&mut rng);
            r
        })
        .collect()
}

pub fn segment_pair_records(seed: u64, n: usize) -> Vec<SegmentPairRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let src = item_id(&mut rng, false);
            let tgt = item_id(&mut rng, false);
            let mut r = SegmentPairRecord::new(src, tgt);
            r.src_doc_id = opt_text(&mut rng);
            r.tgt_doc_id = opt_text(&mut rng);
            r.lpair = opt_text(&mut rng);
            r.mode = opt_text(&mut rng);
            r.src_raw_seg = opt_text(&mut rng);
            r.tgt_raw_seg = opt_text(&mut rng);
            r.base_mt_avs = bits(&mut rng);
            r.base_mt_avs_subw = bits(&mut rng);
            r.ft_mt_avs = bits(&mut rng);
            r.ft_mt_avs_subw = bits(&mut rng);
            r.base_bleu = rng.random_bool(0.8).then(|| rng.random_range(0.0..=100.0));
            r.ft_bleu = rng.random_bool(0.8).then(|| rng.random_range(0.0..=100.0));
            r
        })
        .collect()
}
