use std::path::PathBuf;

use clap::Args;
use vrtkit_core::records::WordRow;
use vrtkit_stats::dataset::{build_fp_dataset, surprisal_pairs, GroupBy, Variant};
use vrtkit_stats::gam::{fit_gam, GamConfig};
use vrtkit_stats::logistic::{compare_models, fit_logistic, FitResult, Preferred};

use crate::annotate::parse_mode;
use crate::error::CliError;
use crate::io::{emit_tsv, num, read_vertical};
use crate::Run;

#[derive(Args)]
pub struct FpArgs {
    /// Vertical tables.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Coefficient table (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fit both variants and compare them.
    #[arg(long)]
    compare: bool,
    /// Model-level summary table.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
pub struct GamArgs {
    /// Vertical tables.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Curve table (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Regress MT surprisal on LM surprisal instead.
    #[arg(long)]
    swap: bool,
}

pub const COEF_HEADER: [&str; 7] = ["direction", "variant", "term", "estimate", "se", "z", "sig"];
pub const SUMMARY_HEADER: [&str; 8] = ["direction", "variant", "n_obs", "positives", "log_lik", "aic", "c", "group_sd"];
pub const CURVE_HEADER: [&str; 4] = ["x", "y", "lower", "upper"];

pub fn parse_groups(spec: &str) -> Result<Vec<GroupBy>, CliError> {
    if spec == "none" {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|g| match g.trim() {
            "speaker" => Ok(GroupBy::Speaker),
            "doc" => Ok(GroupBy::Doc),
            other => Err(CliError::Config(format!("groups: expected speaker, doc or none, got '{other}'"))),
        })
        .collect()
}

fn filtered_rows(run: &Run, inputs: &[PathBuf]) -> Result<Vec<WordRow>, CliError> {
    let mut rows = read_vertical(inputs)?;
    if let Some(m) = run.config.get("mode") {
        let m = parse_mode(m)?;
        rows.retain(|r| r.word_id.mode == Some(m));
    }
    Ok(rows)
}

fn preferred(p: Preferred, a: Variant, b: Variant) -> String {
    match p {
        Preferred::First => a.to_string(),
        Preferred::Second => b.to_string(),
        Preferred::Neither => "neither".to_string(),
    }
}

struct Fitted {
    variant: Variant,
    positives: usize,
    fit: FitResult,
}

pub fn run_fp(run: &Run, args: &FpArgs) -> Result<(), CliError> {
    let direction: String = run.config.require("direction")?;
    let variant: Variant = run.config.require("variant")?;
    let groups = parse_groups(run.config.get("groups").unwrap_or("speaker"))?;
    let rows = filtered_rows(run, &args.inputs)?;
    let variants = if args.compare {
        vec![Variant::Base, Variant::Ft]
    } else {
        vec![variant]
    };
    let mut fits = Vec::new();
    for v in variants {
        let data = build_fp_dataset(&rows, &direction, v)?;
        let fit = fit_logistic(&data.to_logistic(&groups))?;
        fits.push(Fitted {
            variant: v,
            positives: data.positives(),
            fit,
        });
    }

    let mut extra = Vec::new();
    let mut summary = Vec::new();
    for f in &fits {
        let sd: Vec<String> = f.fit.group_sd.iter().map(|(g, s)| format!("{g}={s:.4}")).collect();
        let sd = if sd.is_empty() { "NA".to_string() } else { sd.join(",") };
        extra.push(format!(
            "model {direction} {} n_obs={} positives={} log_lik={:.3} aic={:.3} c={:.4} group_sd={sd}",
            f.variant, f.fit.n_obs, f.positives, f.fit.log_lik, f.fit.aic, f.fit.c
        ));
        summary.push(vec![
            direction.clone(),
            f.variant.to_string(),
            f.fit.n_obs.to_string(),
            f.positives.to_string(),
            num(Some(f.fit.log_lik), 3),
            num(Some(f.fit.aic), 3),
            num(Some(f.fit.c), 4),
            sd,
        ]);
    }
    if let [a, b] = fits.as_slice() {
        let cmp = compare_models(&a.fit, &b.fit)?;
        extra.push(format!(
            "compare {}-{} delta_aic={:.3} delta_c={:.4} by_aic={} by_c={}",
            a.variant,
            b.variant,
            cmp.delta_aic,
            cmp.delta_c,
            preferred(cmp.by_aic, a.variant, b.variant),
            preferred(cmp.by_c, a.variant, b.variant),
        ));
    }
    let prov = run.provenance(&extra);
    let coef_rows: Vec<Vec<String>> = fits
        .iter()
        .flat_map(|f| {
            f.fit.coefficients.iter().map(|c| {
                vec![
                    direction.clone(),
                    f.variant.to_string(),
                    c.name.clone(),
                    num(Some(c.estimate), 4),
                    num(Some(c.se), 4),
                    num(Some(c.z()), 3),
                    if c.significant() { "*" } else { "" }.to_string(),
                ]
            })
        })
        .collect();
    emit_tsv(args.out.as_deref(), &prov, &COEF_HEADER, &coef_rows)?;
    if let Some(path) = &args.summary {
        emit_tsv(Some(path), &prov, &SUMMARY_HEADER, &summary)?;
    }
    Ok(())
}

pub fn run_gam(run: &Run, args: &GamArgs) -> Result<(), CliError> {
    let variant: Variant = run.config.require("variant")?;
    let swap = args.swap || run.config.require::<bool>("gam_swap")?;
    let points: usize = run.config.require("gam_points")?;
    let rows = filtered_rows(run, &args.inputs)?;
    let (mt, lm) = surprisal_pairs(&rows, run.config.get("direction"), variant);
    let (x, y, orientation) = if swap { (lm, mt, "y=mt x=lm") } else { (mt, lm, "y=lm x=mt") };
    let cfg = GamConfig {
        n_splines: run.config.require("n_splines")?,
        ..GamConfig::default()
    };
    let fit = fit_gam(&x, &y, &cfg)?;
    let prov = run.provenance(&[format!(
        "gam {orientation} n={} lambda={} edf={:.3} gcv={:.4} pseudo_R2={:.4}",
        fit.n, fit.lambda, fit.edf, fit.gcv, fit.pseudo_r2
    )]);
    let rows: Vec<Vec<String>> = fit
        .curve(points)
        .into_iter()
        .map(|p| vec![num(Some(p.x), 4), num(Some(p.y), 4), num(Some(p.lower), 4), num(Some(p.upper), 4)])
        .collect();
    emit_tsv(args.out.as_deref(), &prov, &CURVE_HEADER, &rows)
}
