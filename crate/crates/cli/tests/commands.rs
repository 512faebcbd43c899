use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrtkit_core::ids::ItemId;
use vrtkit_core::records::{Conllu, SegmentPairRecord, SegmentRecord, WordRow, FP_TAG};
use vrtkit_core::table::{read_table, write_table_plain, TableRecord};

fn vrtkit() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vrtkit"));
    for (k, _) in std::env::vars() {
        if k.starts_with("VRTKIT_") {
            c.env_remove(k);
        }
    }
    c
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/appendix_a.jsonl")
}

fn table<R: TableRecord>(path: &Path) -> Vec<R> {
    read_table::<R, _>(std::fs::File::open(path).unwrap()).unwrap().rows
}

/// TSV body lines, comment lines dropped.
fn body(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

fn config_line<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    let prefix = format!("# config {key}=");
    text.lines().find_map(|l| l.strip_prefix(prefix.as_str()))
}

#[test]
fn normalize_cleans_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.tsv");
    std::fs::write(&input, "seg_id\ttext\nSI_SP_DE_EN_001-01\tI/ I am euh [s:] here [2#]\nSI_SP_DE_EN_001-02\t\n")
        .unwrap();
    let out = ok(vrtkit().arg("normalize").arg(&input).output().unwrap());
    assert!(out.starts_with("# vrtkit "));
    let rows = body(&out);
    assert_eq!(rows[0], ["seg_id", "raw_seg", "fp_positions", "disfluencies", "fillers", "fillers+3"]);
    assert_eq!(rows[1][1], "I am euh here");
    assert_eq!(rows[1][2], "2");
    assert_eq!(rows[1][4], "1");
    assert_eq!(rows.len(), 3);
}

#[test]
fn config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.tsv");
    std::fs::write(&input, "seg_id\ttext\nSI_SP_DE_EN_001-01\tyes\n").unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "seed = 7\ncap = 100\nthreshold = 0.05\n").unwrap();
    let out = ok(vrtkit()
        .arg("normalize")
        .arg(&input)
        .arg("--config")
        .arg(&conf)
        .args(["--seed", "3"])
        .env("VRTKIT_SEED", "5")
        .env("VRTKIT_CAP", "120")
        .output()
        .unwrap());
    assert_eq!(config_line(&out, "seed"), Some("3"));
    assert_eq!(config_line(&out, "cap"), Some("120"));
    assert_eq!(config_line(&out, "threshold"), Some("0.05"));
    assert_eq!(config_line(&out, "variant"), Some("base"));
    assert_eq!(config_line(&out, "workers"), None);
}

#[test]
fn errors_are_json_records() {
    let bad_key = vrtkit().args(["--set", "bogus=1", "normalize", "x.tsv"]).output().unwrap();
    assert!(!bad_key.status.success());
    let rec: serde_json::Value = serde_json::from_slice(&bad_key.stderr).unwrap();
    assert_eq!(rec["error"], "config");
    assert_eq!(rec["command"], "normalize");

    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.tsv");
    std::fs::write(&input, "seg_id\twords\nA\tb\n").unwrap();
    let out = vrtkit().arg("normalize").arg(&input).output().unwrap();
    let rec: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(rec["message"].as_str().unwrap().contains("text"));

    let no_backend = vrtkit().arg("annotate").arg(&input).args(["--out-dir", "o"]).output().unwrap();
    assert!(!no_backend.status.success());
}

fn appendix_pairs(dir: &Path) -> PathBuf {
    let p = dir.join("pairs.tsv");
    std::fs::write(
        &p,
        "src_seg_id\ttgt_seg_id\tsrc_text\ttgt_text\n\
         ORG_DE_EN_030-21\tSI_DE_EN_030-21\tBegonnen ist alles mit guten Absichten, aber leider gibt es\t\
         It's all euh hm euh very well-intended. But there's\n",
    )
    .unwrap();
    p
}

#[test]
fn annotate_aggregate_stats() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = appendix_pairs(dir.path());
    let out = dir.path().join("out");
    ok(vrtkit()
        .arg("annotate")
        .arg(&pairs)
        .arg("--out-dir")
        .arg(&out)
        .arg("--replay")
        .arg(fixture())
        .args(["--mode", "SP"])
        .output()
        .unwrap());
    let vertical = out.join("vertical.tsv");
    let text = std::fs::read_to_string(&vertical).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# adapter ")));

    let long_path = dir.path().join("long.tsv.gz");
    let wide_path = dir.path().join("wide.tsv");
    ok(vrtkit()
        .arg("aggregate")
        .arg(&vertical)
        .arg("--long")
        .arg(&long_path)
        .arg("--long-sidecar")
        .arg(out.join("long.tsv"))
        .arg("--wide")
        .arg(&wide_path)
        .arg("--wide-sidecar")
        .arg(out.join("wide.tsv"))
        .output()
        .unwrap());
    let fresh: Vec<SegmentRecord> = table(&long_path);
    let annotated: Vec<SegmentRecord> = table(&out.join("long.tsv"));
    assert_eq!(fresh.len(), 2);
    for (a, b) in fresh.iter().zip(&annotated) {
        assert_eq!(a.seg_id, b.seg_id);
        assert_eq!(a.wc_tok, b.wc_tok);
        assert_eq!(a.fillers, b.fillers);
        assert_eq!(a.disfluencies, b.disfluencies);
    }
    let wide: Vec<SegmentPairRecord> = table(&wide_path);
    let old: Vec<SegmentPairRecord> = table(&out.join("wide.tsv"));
    assert_eq!(wide.len(), 1);
    assert_eq!(wide[0].base_bleu, old[0].base_bleu);

    let stats = ok(vrtkit().arg("stats").arg(&vertical).output().unwrap());
    let rows = body(&stats);
    let col = |name: &str| rows[0].iter().position(|c| c == name).unwrap();
    let src = rows.iter().find(|r| r[col("ttype")] == "ORG").unwrap();
    let tgt = rows.iter().find(|r| r[col("ttype")] == "SI").unwrap();
    assert_eq!(src[col("words")], "11");
    assert_eq!(src[col("src_tokens")], "11");
    assert_eq!(src[col("pct_multi")], "9.09");
    assert_eq!(tgt[col("fps")], "3");
    assert_eq!(tgt[col("pct_unaligned")], "NA");
}

#[test]
fn build_lists_every_document() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs.tsv");
    let segs = dir.path().join("segs.tsv");
    let mut d = String::from("doc_id\tlpair\tmode\tsrc_lang\tscore\n");
    let mut s = String::from("doc_id\tsrc\ttgt\n");
    d.push_str("sp1\tDE-EN\tSP\tDE\tNA\n");
    for i in 0..3 {
        s.push_str(&format!("sp1\tspoken {i}\tgesprochen {i}\n"));
    }
    for i in 0..40 {
        let score = if i % 10 == 0 { 0.1 } else { 0.9 };
        d.push_str(&format!("w{i:02}\tDE-EN\tWR\tDE\t{score}\n"));
        for j in 0..15 {
            s.push_str(&format!("w{i:02}\tsatz {i} {j}\tsentence {i} {j}\n"));
        }
    }
    d.push_str("hollow\tDE-EN\tWR\tDE\t0.9\n");
    s.push_str("hollow\ta b\tc d\nhollow\tone two three four five\tNA\nhollow\te f\tg h\n");
    std::fs::write(&docs, d).unwrap();
    std::fs::write(&segs, s).unwrap();

    let run = |seed: &str| {
        ok(vrtkit()
            .arg("build")
            .arg("--docs")
            .arg(&docs)
            .arg("--segments")
            .arg(&segs)
            .args(["--set", "test_docs=5", "--seed", seed])
            .output()
            .unwrap())
    };
    let a = run("4");
    assert_eq!(body(&a), body(&run("4")));
    let rows = body(&a);
    assert_eq!(rows.len(), 1 + 42);
    let count = |split: &str| rows.iter().filter(|r| r[3] == split).count();
    assert_eq!(count("spoken"), 1);
    assert_eq!(count("dropped_empty"), 1);
    assert_eq!(count("low_score"), 4);
    assert_eq!(count("test"), 5);
    assert_eq!(count("train") + count("unused"), 31);
    assert!(a.lines().any(|l| l == "# split DE-EN test docs=5 segs=75"));
}

const SPEAKERS: usize = 8;

fn word(id: &str, token: &str, speaker: usize) -> WordRow {
    let mut r = WordRow::new(ItemId::parse(id).unwrap());
    r.conllu = Conllu {
        token: Some(token.into()),
        pos: (token == "euh").then(|| FP_TAG.to_string()),
        ..Conllu::default()
    };
    r.meta.speaker_id = Some(format!("spk{speaker}"));
    r
}

/// Spoken DE-EN rows where fillers precede words of high LM surprisal.
fn simulated_vertical(seed: u64) -> Vec<WordRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for doc in 1..=40 {
        let speaker = doc % SPEAKERS;
        for seg in 1..=6 {
            let src_id = |w: usize| format!("ORG_SP_DE_EN_{doc:03}-{seg:02}:{w:03}");
            let tgt_id = |w: usize| format!("SI_SP_DE_EN_{doc:03}-{seg:02}:{w:03}");
            let mut tgt = Vec::new();
            let mut n = 0;
            for _ in 0..8 {
                let lm: f64 = rng.random_range(1.0..15.0);
                let p = 1.0 / (1.0 + (-(lm - 12.0)).exp());
                if rng.random::<f64>() < p {
                    n += 1;
                    tgt.push(word(&tgt_id(n), "euh", speaker));
                }
                n += 1;
                let mut w = word(&tgt_id(n), "w", speaker);
                w.srp_base_gpt2 = Some(lm);
                w.srp_ft_gpt2 = Some(lm * 0.8 + rng.random_range(0.0..1.0));
                w.srp_base_mt = Some(lm + rng.random_range(-1.0..2.0));
                w.srp_ft_mt = Some(lm * 0.9 + rng.random_range(-1.0..1.0));
                tgt.push(w);
            }
            let words: Vec<String> = tgt
                .iter()
                .filter(|r| r.conllu.token.as_deref() == Some("w"))
                .map(|r| r.word_id.to_string())
                .collect();
            for (i, t) in words.chunks(2).enumerate() {
                let mut s = word(&src_id(i + 1), "q", speaker + SPEAKERS);
                s.srp_base_gpt2 = Some(rng.random_range(1.0..15.0));
                s.srp_ft_gpt2 = Some(rng.random_range(1.0..15.0));
                s.aligned_word_id = Some(t.to_vec());
                rows.push(s);
            }
            rows.extend(tgt);
        }
    }
    rows
}

fn write_vertical(dir: &Path) -> PathBuf {
    let path = dir.join("sim.tsv");
    let mut f = std::fs::File::create(&path).unwrap();
    write_table_plain(&simulated_vertical(3), &mut f, &[]).unwrap();
    path
}

#[test]
fn fp_analyze_compares_variants() {
    let dir = tempfile::tempdir().unwrap();
    let vertical = write_vertical(dir.path());
    let summary = dir.path().join("summary.tsv");
    let out = ok(vrtkit()
        .arg("fp-analyze")
        .arg(&vertical)
        .args(["--direction", "DE-EN", "--compare", "--summary"])
        .arg(&summary)
        .output()
        .unwrap());
    let rows = body(&out);
    assert_eq!(rows[0], ["direction", "variant", "term", "estimate", "se", "z", "sig"]);
    assert_eq!(rows.len(), 1 + 2 * 7);
    let nxtw = rows.iter().find(|r| r[1] == "base" && r[2] == "nxtwS_tgt").unwrap();
    assert!(nxtw[3].parse::<f64>().unwrap() > 0.0);
    assert_eq!(nxtw[6], "*");
    assert!(out.lines().any(|l| l.starts_with("# compare base-ft delta_aic=")));
    let s = body(&std::fs::read_to_string(&summary).unwrap());
    assert_eq!(s.len(), 3);

    let other = vrtkit().arg("fp-analyze").arg(&vertical).args(["--direction", "EN-DE"]).output().unwrap();
    assert!(!other.status.success());
}

#[test]
fn gam_curve() {
    let dir = tempfile::tempdir().unwrap();
    let vertical = write_vertical(dir.path());
    let out = ok(vrtkit()
        .arg("gam")
        .arg(&vertical)
        .args(["--set", "gam_points=20"])
        .output()
        .unwrap());
    let rows = body(&out);
    assert_eq!(rows[0], ["x", "y", "lower", "upper"]);
    assert_eq!(rows.len(), 21);
    for r in &rows[1..] {
        let v: Vec<f64> = r.iter().map(|c| c.parse().unwrap()).collect();
        assert!(v[2] <= v[1] && v[1] <= v[3]);
    }
    let line = out.lines().find(|l| l.starts_with("# gam ")).unwrap();
    assert!(line.contains("y=lm x=mt"));
    let swapped = ok(vrtkit().arg("gam").arg(&vertical).arg("--swap").output().unwrap());
    assert!(swapped.contains("# gam y=mt x=lm"));
}
