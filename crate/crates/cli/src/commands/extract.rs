//! `vocalplan extract` — audio + word timestamps -> vocal plan JSON.

use std::path::PathBuf;

use clap::Args;
use vocalplan_core::audio_io::load_wav;
use vocalplan_core::dsp::{analyze, AnalysisConfig};
use vocalplan_core::features::{segment_features, serialize_plan, VocalPlan};
use vocalplan_core::segmenter::{merge_words, read_words_jsonl};

use crate::{commands::emit, CmdError, Ctx};

#[derive(Args)]
pub struct ExtractArgs {
    /// Input WAV file (16-bit PCM or 32-bit float)
    #[arg(long)]
    audio: PathBuf,

    /// Word timestamps, one JSON object per line (word/start/end)
    #[arg(long)]
    words: PathBuf,

    /// Write the plan here instead of stdout
    #[arg(long, short)]
    out: Option<PathBuf>,

    /// Analysis frame length in milliseconds
    #[arg(long)]
    frame_ms: Option<f64>,

    /// Analysis hop in milliseconds
    #[arg(long)]
    hop_ms: Option<f64>,

    /// Lower bound of the F0 search range in Hz
    #[arg(long)]
    f_min: Option<f64>,

    /// Upper bound of the F0 search range in Hz
    #[arg(long)]
    f_max: Option<f64>,

    /// Normalized-correlation threshold below which a frame is unvoiced
    #[arg(long)]
    voicing_threshold: Option<f64>,

    /// Segment-merge duration threshold in seconds
    #[arg(long)]
    merge_threshold: Option<f64>,
}

fn stage_err(stage: &str, err: impl std::fmt::Display) -> CmdError {
    CmdError::input(format!("extract failed at {stage}: {err}"))
}

pub fn run(args: ExtractArgs, ctx: &Ctx) -> Result<(), CmdError> {
    let defaults = AnalysisConfig::default();
    let config = AnalysisConfig {
        frame_ms: ctx.cfg.resolve(args.frame_ms, "frame_ms", defaults.frame_ms)?,
        hop_ms: ctx.cfg.resolve(args.hop_ms, "hop_ms", defaults.hop_ms)?,
        f_min: ctx.cfg.resolve(args.f_min, "f_min", defaults.f_min)?,
        f_max: ctx.cfg.resolve(args.f_max, "f_max", defaults.f_max)?,
        voicing_threshold: ctx.cfg.resolve(
            args.voicing_threshold,
            "voicing_threshold",
            defaults.voicing_threshold,
        )?,
    };
    let merge_threshold = ctx
        .cfg
        .resolve(args.merge_threshold, "merge_threshold", 1.0)?;

    let buffer = load_wav(&args.audio).map_err(|e| stage_err("audio", e))?;
    let track = analyze(&buffer, &config).map_err(|e| stage_err("analysis", e))?;
    let words = read_words_jsonl(&args.words).map_err(|e| stage_err("timestamps", e))?;
    let segments = merge_words(&words, merge_threshold).map_err(|e| stage_err("segmenter", e))?;

    let mut plan_segments = Vec::with_capacity(segments.len());
    for segment in &segments {
        plan_segments.push(segment_features(&track, segment).map_err(|e| stage_err("features", e))?);
    }
    let plan = VocalPlan {
        segments: plan_segments,
    };
    let text = serialize_plan(&plan).map_err(|e| stage_err("plan", e))?;
    emit(args.out.as_deref(), &text)
}
