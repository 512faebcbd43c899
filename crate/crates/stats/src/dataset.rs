//! Observations for the filler-particle models, built from vertical rows.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use vrtkit_core::ids::ItemId;
use vrtkit_core::records::{RowKind, SurprisalColumn, WordRow};

use crate::logistic::{GroupFactor, LogisticData};
use crate::{Result, StatsError};

pub const PREDICTORS: [&str; 6] = ["nxtwS_tgt", "nxtwS_src", "nxtwS_mt", "AvS_tgt", "AvS_src", "AvS_mt"];

const SOURCE_TTYPE: &str = "ORG";

/// Which pair of models the surprisal columns come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Base,
    Ft,
}

impl Variant {
    pub fn lm(self) -> SurprisalColumn {
        match self {
            Variant::Base => SurprisalColumn::BaseGpt2,
            Variant::Ft => SurprisalColumn::FtGpt2,
        }
    }

    pub fn mt(self) -> SurprisalColumn {
        match self {
            Variant::Base => SurprisalColumn::BaseMt,
            Variant::Ft => SurprisalColumn::FtMt,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Base => "base",
            Variant::Ft => "ft",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "base" => Ok(Variant::Base),
            "ft" => Ok(Variant::Ft),
            _ => Err(format!("unknown variant '{s}' (expected base or ft)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Speaker,
    Doc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpObservation {
    pub word_id: ItemId,
    /// The word is preceded by a filler particle.
    pub outcome: bool,
    /// z-scored, in the order of [`PREDICTORS`].
    pub predictors: [f64; 6],
    pub speaker_id: String,
    pub doc_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpDataset {
    pub direction: String,
    pub variant: Variant,
    pub observations: Vec<FpObservation>,
    /// Raw means and standard deviations used for z-scoring.
    pub means: [f64; 6],
    pub sds: [f64; 6],
    /// Target word rows seen before any exclusion.
    pub target_words: usize,
    pub fp_rows: usize,
}

impl FpDataset {
    pub fn positives(&self) -> usize {
        self.observations.iter().filter(|o| o.outcome).count()
    }

    pub fn to_logistic(&self, groups: &[GroupBy]) -> LogisticData {
        let columns = (0..PREDICTORS.len())
            .map(|j| self.observations.iter().map(|o| o.predictors[j]).collect())
            .collect();
        let groups = groups
            .iter()
            .map(|g| {
                let (name, labels): (&str, Vec<&str>) = match g {
                    GroupBy::Speaker => ("speaker_id", self.observations.iter().map(|o| o.speaker_id.as_str()).collect()),
                    GroupBy::Doc => ("doc_id", self.observations.iter().map(|o| o.doc_id.as_str()).collect()),
                };
                GroupFactor::from_labels(name, &labels)
            })
            .collect();
        LogisticData {
            names: PREDICTORS.iter().map(|s| s.to_string()).collect(),
            columns,
            outcome: self.observations.iter().map(|o| o.outcome).collect(),
            groups,
        }
    }
}

/// Centers and scales `values` in place (sd with n - 1).
pub fn zscore(name: &str, values: &mut [f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::ConstantColumn { column: name.to_string() });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(StatsError::ConstantColumn { column: name.to_string() });
    }
    for v in values.iter_mut() {
        *v = (*v - mean) / sd;
    }
    Ok((mean, sd))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

fn source_segment(id: &ItemId) -> ItemId {
    ItemId {
        ttype: SOURCE_TTYPE.to_string(),
        ..id.segment_id()
    }
}

/// Segments in first-appearance order, rows in file order.
fn segments(rows: &[WordRow]) -> Vec<(ItemId, Vec<&WordRow>)> {
    let mut order: Vec<(ItemId, Vec<&WordRow>)> = Vec::new();
    let mut at: HashMap<ItemId, usize> = HashMap::new();
    for r in rows {
        let seg = r.word_id.segment_id();
        let i = *at.entry(seg.clone()).or_insert_with(|| {
            order.push((seg, Vec::new()));
            order.len() - 1
        });
        order[i].1.push(r);
    }
    order
}

/// One observation per target word with both surprisal values and at
/// least one aligned, scored source word. `direction` is e.g. `DE-EN`.
pub fn build_fp_dataset(rows: &[WordRow], direction: &str, variant: Variant) -> Result<FpDataset> {
    let (lm, mt) = (variant.lm(), variant.mt());
    let in_direction = |id: &ItemId| id.lpair() == direction;
    let segs = segments(rows);

    let mut source_bits: HashMap<String, Option<f64>> = HashMap::new();
    let mut reverse: HashMap<String, Vec<String>> = HashMap::new();
    let mut source_avs: HashMap<ItemId, f64> = HashMap::new();
    for (seg, seg_rows) in &segs {
        if seg.ttype != SOURCE_TTYPE || !in_direction(seg) {
            continue;
        }
        let words: Vec<&&WordRow> = seg_rows.iter().filter(|r| r.kind() == RowKind::Word).collect();
        for r in &words {
            let id = r.word_id.to_string();
            source_bits.insert(id.clone(), r.surprisal(lm));
            for t in r.aligned_word_id.iter().flatten() {
                reverse.entry(t.clone()).or_default().push(id.clone());
            }
        }
        if let Some(m) = mean(words.iter().filter_map(|r| r.surprisal(lm))) {
            source_avs.insert(seg.clone(), m);
        }
    }

    let mut raw: Vec<(FpObservation, [f64; 6])> = Vec::new();
    let (mut target_words, mut fp_rows) = (0, 0);
    for (seg, seg_rows) in &segs {
        if seg.ttype == SOURCE_TTYPE || !in_direction(seg) {
            continue;
        }
        let words = || seg_rows.iter().filter(|r| r.kind() == RowKind::Word);
        let avs_tgt = mean(words().filter_map(|r| r.surprisal(lm)));
        let avs_mt = mean(words().filter_map(|r| r.surprisal(mt)));
        let avs_src = source_avs.get(&source_segment(seg)).copied();
        let mut prev: Option<RowKind> = None;
        for r in seg_rows {
            let kind = r.kind();
            match kind {
                RowKind::Expansion => continue,
                RowKind::Filler => fp_rows += 1,
                RowKind::Word => target_words += 1,
                RowKind::Empty => {}
            }
            let after_fp = prev == Some(RowKind::Filler);
            prev = Some(kind);
            if kind != RowKind::Word {
                continue;
            }
            let id = r.word_id.to_string();
            let mut aligned: Vec<&String> = reverse.get(&id).into_iter().flatten().collect();
            aligned.extend(r.aligned_word_id.iter().flatten());
            let mut seen = HashSet::new();
            aligned.retain(|a| seen.insert(*a));
            let src = mean(aligned.iter().filter_map(|a| source_bits.get(*a).copied().flatten()));
            let (Some(t), Some(m), Some(s), Some(at), Some(am), Some(as_)) =
                (r.surprisal(lm), r.surprisal(mt), src, avs_tgt, avs_mt, avs_src)
            else {
                continue;
            };
            let obs = FpObservation {
                word_id: r.word_id.clone(),
                outcome: after_fp,
                predictors: [0.0; 6],
                speaker_id: r.meta.speaker_id.clone().unwrap_or_else(|| "NA".into()),
                doc_id: r.meta.doc_id.clone().unwrap_or_else(|| seg.doc_key()),
            };
            raw.push((obs, [t, s, m, at, as_, am]));
        }
    }
    if raw.is_empty() {
        return Err(StatsError::Empty(format!("{direction} target words")));
    }

    let mut means = [0.0; 6];
    let mut sds = [0.0; 6];
    for j in 0..PREDICTORS.len() {
        let mut col: Vec<f64> = raw.iter().map(|(_, v)| v[j]).collect();
        let (m, s) = zscore(PREDICTORS[j], &mut col)?;
        means[j] = m;
        sds[j] = s;
        for ((obs, _), z) in raw.iter_mut().zip(col) {
            obs.predictors[j] = z;
        }
    }
    Ok(FpDataset {
        direction: direction.to_string(),
        variant,
        observations: raw.into_iter().map(|(o, _)| o).collect(),
        means,
        sds,
        target_words,
        fp_rows,
    })
}

/// Word-level (MT, LM) surprisal pairs of target words in `direction`.
pub fn surprisal_pairs(rows: &[WordRow], direction: Option<&str>, variant: Variant) -> (Vec<f64>, Vec<f64>) {
    rows.iter()
        .filter(|r| r.kind() == RowKind::Word && r.word_id.ttype != SOURCE_TTYPE)
        .filter(|r| direction.is_none_or(|d| r.word_id.lpair() == d))
        .filter_map(|r| Some((r.surprisal(variant.mt())?, r.surprisal(variant.lm())?)))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use vrtkit_core::records::{Conllu, FP_TAG};

    fn row(id: &str, tok: &str, lm: Option<f64>, mt: Option<f64>, aligned: &[&str]) -> WordRow {
        let mut r = WordRow::new(ItemId::parse(id).unwrap());
        r.conllu = Conllu {
            token: Some(tok.into()),
            pos: (tok == "euh").then(|| FP_TAG.to_string()),
            ..Conllu::default()
        };
        r.srp_base_gpt2 = lm;
        r.srp_base_mt = mt;
        if !aligned.is_empty() {
            r.aligned_word_id = Some(aligned.iter().map(|s| s.to_string()).collect());
        }
        r.meta.speaker_id = Some(if id.starts_with("ORG") { "mDE1" } else { "fEN3" }.into());
        r
    }

    fn corpus() -> Vec<WordRow> {
        vec![
            row("ORG_SP_DE_EN_001-01:001", "Das", Some(4.0), None, &["SI_SP_DE_EN_001-01:002"]),
            row("ORG_SP_DE_EN_001-01:002", "ist", Some(2.0), None, &["SI_SP_DE_EN_001-01:002", "SI_SP_DE_EN_001-01:003"]),
            row("ORG_SP_DE_EN_001-01:003", "gut", Some(6.0), None, &[]),
            row("SI_SP_DE_EN_001-01:001", "euh", None, None, &[]),
            row("SI_SP_DE_EN_001-01:002", "This", Some(5.0), Some(7.0), &[]),
            row("SI_SP_DE_EN_001-01:003", "is", Some(1.0), Some(3.0), &[]),
            row("SI_SP_DE_EN_001-01:004", "fine", Some(9.0), Some(8.0), &[]),
            row("SI_SP_DE_EN_001-01:005", "euh", None, None, &[]),
            row("SI_SP_DE_EN_001-01:006", "now", Some(3.0), Some(2.0), &["ORG_SP_DE_EN_001-01:003"]),
            row("ORG_SP_DE_EN_001-02:001", "Ja", Some(3.0), None, &["SI_SP_DE_EN_001-02:001"]),
            row("SI_SP_DE_EN_001-02:001", "Yes", Some(2.0), Some(4.0), &[]),
        ]
    }

    #[test]
    fn outcome_alignment_and_means() {
        let d = build_fp_dataset(&corpus(), "DE-EN", Variant::Base).unwrap();
        let ids: Vec<String> = d.observations.iter().map(|o| o.word_id.to_string()).collect();
        // "fine" has no aligned source word.
        assert_eq!(
            ids,
            [
                "SI_SP_DE_EN_001-01:002",
                "SI_SP_DE_EN_001-01:003",
                "SI_SP_DE_EN_001-01:006",
                "SI_SP_DE_EN_001-02:001"
            ]
        );
        assert_eq!(
            d.observations.iter().map(|o| o.outcome).collect::<Vec<_>>(),
            [true, false, true, false]
        );
        assert_eq!((d.target_words, d.fp_rows, d.positives()), (5, 2, 2));
        // Raw nxtwS_src: mean(4, 2) = 3, then 2, 6, 3.
        let raw = |j: usize| -> Vec<f64> {
            d.observations.iter().map(|o| o.predictors[j] * d.sds[j] + d.means[j]).collect()
        };
        let close = |a: Vec<f64>, b: [f64; 4]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(raw(1), [3.0, 2.0, 6.0, 3.0]));
        assert!(close(raw(3), [4.5, 4.5, 4.5, 2.0]));
        assert!(close(raw(4), [4.0, 4.0, 4.0, 3.0]));
        assert!(close(raw(5), [5.0, 5.0, 5.0, 4.0]));
        for j in 0..6 {
            let col: Vec<f64> = d.observations.iter().map(|o| o.predictors[j]).collect();
            let m = col.iter().sum::<f64>() / 4.0;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0;
            assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_segment_means_are_an_error() {
        // A single segment gives constant AvS columns.
        match build_fp_dataset(&corpus()[..9], "DE-EN", Variant::Base) {
            Err(StatsError::ConstantColumn { column }) => assert_eq!(column, "AvS_tgt"),
            other => panic!("expected constant column, got {other:?}"),
        }
    }

    #[test]
    fn zscore_oracle() {
        let mut v = [1.0, 2.0, 3.0, 4.0];
        let (m, s) = zscore("x", &mut v).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(zscore("k", &mut [2.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn other_direction_is_empty() {
        assert!(matches!(
            build_fp_dataset(&corpus(), "EN-DE", Variant::Base),
            Err(StatsError::Empty(_))
        ));
    }

    #[test]
    fn pairs_for_gam() {
        let (x, y) = surprisal_pairs(&corpus(), Some("DE-EN"), Variant::Base);
        assert_eq!(x, [7.0, 3.0, 8.0, 2.0, 4.0]);
        assert_eq!(y, [5.0, 1.0, 9.0, 3.0, 2.0]);
    }
}
