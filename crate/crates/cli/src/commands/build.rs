//! `vocalplan build` — corpus manifest -> packed training chunks.
//!
//! Manifest records need `transcript` and `speech_tokens`; the SFT stage
//! additionally needs `plan`. Speech tokens must avoid the reserved
//! special-token range 256..=259 (raw bytes below it, a separate speech
//! vocabulary above it). Sequences longer than the chunk length are
//! skipped and reported in the stats rather than failing the run.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use vocalplan_core::features::{parse_plan, serialize_plan};
use vocalplan_core::pipeline::{
    assemble_pretrain_sequence, assemble_sft_sequence, pack_sequences, read_jsonl,
    speech_only_mask, write_chunks, BuildRecord, ByteTokenizer, SpecialTokens, TokenSequence,
    DEFAULT_CHUNK_LEN,
};

use crate::{commands::emit, CmdError, Ctx};

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Pretrain,
    Sft,
}

#[derive(Args)]
pub struct BuildArgs {
    /// Corpus manifest, one JSON record per line
    #[arg(long)]
    manifest: PathBuf,

    /// Which sequence layout to assemble
    #[arg(long, value_enum)]
    stage: Stage,

    /// Packed chunk length in tokens
    #[arg(long)]
    chunk_len: Option<usize>,

    /// Output file for the packed chunks
    #[arg(long)]
    out: PathBuf,

    /// Stats JSON path (stdout when omitted)
    #[arg(long)]
    stats: Option<PathBuf>,

    /// Restrict the loss mask to the speech span
    #[arg(long)]
    mask_prompt: bool,
}

#[derive(Serialize)]
struct BuildStats {
    stage: &'static str,
    chunk_len: usize,
    sequences: usize,
    skipped: usize,
    skipped_records: Vec<String>,
    chunks: usize,
    padding_fraction: f64,
}

fn record_label(record: &BuildRecord, index: usize) -> String {
    record
        .id
        .clone()
        .unwrap_or_else(|| format!("record {}", index + 1))
}

fn assemble_one(
    record: &BuildRecord,
    index: usize,
    stage: Stage,
    mask_prompt: bool,
    specials: &SpecialTokens,
) -> Result<TokenSequence, CmdError> {
    let label = record_label(record, index);
    let tokenizer = ByteTokenizer;
    if record.transcript.trim().is_empty() {
        return Err(CmdError::input(format!("{label}: empty transcript")));
    }
    if let Some(&bad) = record
        .speech_tokens
        .iter()
        .find(|&&t| (256..=259).contains(&t))
    {
        return Err(CmdError::input(format!(
            "{label}: speech token {bad} collides with the reserved special range 256..=259"
        )));
    }
    let text_tokens = tokenizer.encode(&record.transcript);
    let seq = match stage {
        Stage::Pretrain => assemble_pretrain_sequence(&text_tokens, &record.speech_tokens, specials),
        Stage::Sft => {
            let plan_value = record.plan.as_ref().ok_or_else(|| {
                CmdError::input(format!("{label}: missing field \"plan\" required for stage sft"))
            })?;
            let plan = parse_plan(&plan_value.to_string())
                .map_err(|e| CmdError::input(format!("{label}: invalid plan: {e}")))?;
            let canonical = serialize_plan(&plan)
                .map_err(|e| CmdError::input(format!("{label}: plan: {e}")))?;
            let plan_tokens = tokenizer.encode(&canonical);
            assemble_sft_sequence(&text_tokens, &plan_tokens, &record.speech_tokens, specials)
        }
    }
    .map_err(|e| CmdError::input(format!("{label}: {e}")))?;
    if mask_prompt {
        speech_only_mask(&seq, specials).map_err(|e| CmdError::input(format!("{label}: {e}")))
    } else {
        Ok(seq)
    }
}

pub fn run(args: BuildArgs, ctx: &Ctx) -> Result<(), CmdError> {
    let chunk_len = ctx
        .cfg
        .resolve(args.chunk_len, "chunk_len", DEFAULT_CHUNK_LEN)?;
    let file = File::open(&args.manifest)
        .map_err(|e| CmdError::input(format!("cannot read {}: {e}", args.manifest.display())))?;
    let records: Vec<BuildRecord> = read_jsonl(BufReader::new(file))
        .map_err(|e| CmdError::input(format!("{}: {e}", args.manifest.display())))?;
    if records.is_empty() {
        return Err(CmdError::input(format!(
            "manifest {} contains no records",
            args.manifest.display()
        )));
    }

    let specials = SpecialTokens::default();
    let assembled: Vec<Result<TokenSequence, CmdError>> = ctx.with_pool(|| {
        records
            .par_iter()
            .enumerate()
            .map(|(i, record)| assemble_one(record, i, args.stage, args.mask_prompt, &specials))
            .collect()
    })?;

    // Oversized sequences are skipped with a count; anything else fails.
    let mut sequences = Vec::with_capacity(assembled.len());
    let mut skipped_records = Vec::new();
    for (i, result) in assembled.into_iter().enumerate() {
        let seq = result?;
        if seq.len() > chunk_len {
            eprintln!(
                "vocalplan: skipping {} ({} tokens > chunk length {chunk_len})",
                record_label(&records[i], i),
                seq.len()
            );
            skipped_records.push(record_label(&records[i], i));
        } else {
            sequences.push(seq);
        }
    }

    let chunks = pack_sequences(&sequences, chunk_len, specials.pad)
        .map_err(|e| CmdError::input(format!("packing: {e}")))?;
    let out = File::create(&args.out)
        .map_err(|e| CmdError::input(format!("cannot write {}: {e}", args.out.display())))?;
    write_chunks(BufWriter::new(out), &chunks)
        .map_err(|e| CmdError::input(format!("cannot write {}: {e}", args.out.display())))?;

    let pad_tokens: usize = chunks
        .iter()
        .map(|c| c.tokens.iter().filter(|&&t| t == specials.pad).count())
        .sum();
    let stats = BuildStats {
        stage: match args.stage {
            Stage::Pretrain => "pretrain",
            Stage::Sft => "sft",
        },
        chunk_len,
        sequences: sequences.len(),
        skipped: skipped_records.len(),
        skipped_records,
        chunks: chunks.len(),
        padding_fraction: if chunks.is_empty() {
            0.0
        } else {
            pad_tokens as f64 / (chunks.len() * chunk_len) as f64
        },
    };
    let stats_json = serde_json::to_string_pretty(&stats)
        .map_err(|e| CmdError::input(format!("stats serialization: {e}")))?;
    emit(args.stats.as_deref(), &stats_json)
}
