//! `vocalplan pref` — candidate manifest -> preference tuples.
//!
//! Every row is scored by WER (reference text vs hypothesis transcript)
//! and speaking rate (hypothesis words over the audio duration). Rows
//! carrying a plan are chosen-pool candidates and are kept when they pass
//! the quality gates; rows without a plan are rejected-pool candidates
//! and are kept when they fail them. Tuples pair both pools by identical
//! normalized text.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use clap::Args;
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::Serialize;
use vocalplan_core::features::{parse_plan, serialize_plan};
use vocalplan_core::pipeline::{
    build_pref_tuples, classify_sample, compute_wer, normalize_text, read_jsonl, speaking_rate,
    write_pref_tuples, ByteTokenizer, ChosenCandidate, PrefRecord, Thresholds, Verdict,
};

use crate::{commands::emit, CmdError, Ctx};

#[derive(Args)]
pub struct PrefArgs {
    /// Candidate manifest, one JSON record per line
    #[arg(long)]
    candidates: PathBuf,

    /// WER above this rejects a sample
    #[arg(long)]
    tau_wer_high: Option<f64>,

    /// Speaking rate (words/s) below this rejects a sample
    #[arg(long)]
    tau_sr: Option<f64>,

    /// Output file for the preference tuples (JSON-lines)
    #[arg(long)]
    out: PathBuf,

    /// Summary JSON path (stdout when omitted)
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Serialize)]
struct PrefSummary {
    tau_wer_high: f64,
    tau_sr: f64,
    rows: usize,
    chosen_pool: usize,
    rejected_pool: usize,
    dropped_chosen_candidates: usize,
    dropped_base_candidates: usize,
    duplicate_texts: usize,
    tuples: usize,
    unmatched_rejected: usize,
    unmatched_chosen: usize,
}

enum Routed {
    Chosen(String, ChosenCandidate),
    Rejected(String, Vec<u32>),
    DroppedChosen,
    DroppedBase,
}

fn route_row(row: &PrefRecord, thresholds: &Thresholds) -> Result<Routed, String> {
    let wer = compute_wer(&row.text, &row.hypothesis).map_err(|e| e.to_string())?;
    let sr = speaking_rate(&row.hypothesis, row.duration).map_err(|e| e.to_string())?;
    let quality = classify_sample(wer, sr, thresholds);
    let key = normalize_text(&row.text);
    if key.is_empty() {
        return Err("text is empty after normalization".into());
    }
    if row.speech_tokens.is_empty() {
        return Err("speech_tokens is empty".into());
    }
    match (&row.plan, quality.verdict) {
        (Some(plan_value), Verdict::Chosen) => {
            let plan = parse_plan(&plan_value.to_string()).map_err(|e| e.to_string())?;
            let canonical = serialize_plan(&plan).map_err(|e| e.to_string())?;
            Ok(Routed::Chosen(
                key,
                ChosenCandidate {
                    plan: ByteTokenizer.encode(&canonical),
                    speech: row.speech_tokens.clone(),
                },
            ))
        }
        (Some(_), Verdict::Rejected) => Ok(Routed::DroppedChosen),
        (None, Verdict::Rejected) => Ok(Routed::Rejected(key, row.speech_tokens.clone())),
        (None, Verdict::Chosen) => Ok(Routed::DroppedBase),
    }
}

pub fn run(args: PrefArgs, ctx: &Ctx) -> Result<(), CmdError> {
    let thresholds = Thresholds::new(
        ctx.cfg.resolve(args.tau_wer_high, "tau_wer_high", 0.1)?,
        ctx.cfg.resolve(args.tau_sr, "tau_sr", 1.5)?,
    )
    .map_err(|e| CmdError::input(e.to_string()))?;

    let file = File::open(&args.candidates)
        .map_err(|e| CmdError::input(format!("cannot read {}: {e}", args.candidates.display())))?;
    let rows: Vec<PrefRecord> = read_jsonl(BufReader::new(file))
        .map_err(|e| CmdError::input(format!("{}: {e}", args.candidates.display())))?;
    if rows.is_empty() {
        return Err(CmdError::input(format!(
            "candidate manifest {} contains no rows",
            args.candidates.display()
        )));
    }

    let routed: Vec<Result<Routed, String>> = ctx.with_pool(|| {
        rows.par_iter()
            .map(|row| route_row(row, &thresholds))
            .collect()
    })?;

    let mut bad_rows = Vec::new();
    let mut rejected_pool: IndexMap<String, Vec<u32>> = IndexMap::new();
    let mut chosen_pool: IndexMap<String, ChosenCandidate> = IndexMap::new();
    let mut dropped_chosen = 0usize;
    let mut dropped_base = 0usize;
    let mut duplicates = 0usize;
    for (i, result) in routed.into_iter().enumerate() {
        match result {
            Err(msg) => bad_rows.push(format!("line {}: {msg}", i + 1)),
            Ok(Routed::Chosen(key, candidate)) => {
                if chosen_pool.contains_key(&key) {
                    duplicates += 1;
                } else {
                    chosen_pool.insert(key, candidate);
                }
            }
            Ok(Routed::Rejected(key, tokens)) => {
                if rejected_pool.contains_key(&key) {
                    duplicates += 1;
                } else {
                    rejected_pool.insert(key, tokens);
                }
            }
            Ok(Routed::DroppedChosen) => dropped_chosen += 1,
            Ok(Routed::DroppedBase) => dropped_base += 1,
        }
    }
    if !bad_rows.is_empty() {
        return Err(CmdError::input(format!(
            "malformed candidate rows:\n  {}",
            bad_rows.join("\n  ")
        )));
    }

    let (tuples, pairing) = build_pref_tuples(&rejected_pool, &chosen_pool);
    let out = File::create(&args.out)
        .map_err(|e| CmdError::input(format!("cannot write {}: {e}", args.out.display())))?;
    write_pref_tuples(BufWriter::new(out), &tuples)
        .map_err(|e| CmdError::input(format!("cannot write {}: {e}", args.out.display())))?;

    let summary = PrefSummary {
        tau_wer_high: thresholds.tau_wer_high,
        tau_sr: thresholds.tau_sr,
        rows: rows.len(),
        chosen_pool: chosen_pool.len(),
        rejected_pool: rejected_pool.len(),
        dropped_chosen_candidates: dropped_chosen,
        dropped_base_candidates: dropped_base,
        duplicate_texts: duplicates,
        tuples: pairing.tuples,
        unmatched_rejected: pairing.unmatched_rejected,
        unmatched_chosen: pairing.unmatched_chosen,
    };
    let summary_json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CmdError::input(format!("summary serialization: {e}")))?;
    emit(args.summary.as_deref(), &summary_json)
}
