//! `vocalplan mcd` — mel-cepstral distortion between WAV pairs.
//!
//! Inputs are processed independently at their native sample rates. The
//! single-pair form prints one decimal with three places; batch mode
//! reads a JSON-lines pair manifest and emits one JSON object per pair.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vocalplan_core::audio_io::load_wav;
use vocalplan_core::mcd::{mcd, mel_cepstrum, DEFAULT_N_COEFFS, DEFAULT_N_FILTERS};
use vocalplan_core::pipeline::read_jsonl;

use crate::{commands::emit, CmdError, Ctx};

#[derive(Args)]
pub struct McdArgs {
    /// First WAV file (positional form)
    wav_a: Option<PathBuf>,

    /// Second WAV file (positional form)
    wav_b: Option<PathBuf>,

    /// JSON-lines manifest of {"a": path, "b": path} pairs
    #[arg(long, conflicts_with_all = ["wav_a", "wav_b"])]
    manifest: Option<PathBuf>,

    /// Retained cepstral coefficients (c0 excluded)
    #[arg(long)]
    n_coeffs: Option<usize>,

    /// Mel filterbank size
    #[arg(long)]
    n_filters: Option<usize>,
}

#[derive(Deserialize)]
struct PairRecord {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Serialize)]
struct PairResult<'a> {
    a: &'a Path,
    b: &'a Path,
    mcd: f64,
}

fn pair_mcd(a: &Path, b: &Path, n_coeffs: usize, n_filters: usize) -> Result<f64, CmdError> {
    let buf_a = load_wav(a).map_err(|e| CmdError::input(e.to_string()))?;
    let buf_b = load_wav(b).map_err(|e| CmdError::input(e.to_string()))?;
    let track_a = mel_cepstrum(&buf_a, n_coeffs, n_filters)
        .map_err(|e| CmdError::input(format!("{}: {e}", a.display())))?;
    let track_b = mel_cepstrum(&buf_b, n_coeffs, n_filters)
        .map_err(|e| CmdError::input(format!("{}: {e}", b.display())))?;
    mcd(&track_a, &track_b).map_err(|e| CmdError::input(e.to_string()))
}

pub fn run(args: McdArgs, ctx: &Ctx) -> Result<(), CmdError> {
    let n_coeffs = ctx.cfg.resolve(args.n_coeffs, "n_coeffs", DEFAULT_N_COEFFS)?;
    let n_filters = ctx
        .cfg
        .resolve(args.n_filters, "n_filters", DEFAULT_N_FILTERS)?;

    if let Some(manifest) = &args.manifest {
        let file = File::open(manifest)
            .map_err(|e| CmdError::input(format!("cannot read {}: {e}", manifest.display())))?;
        let pairs: Vec<PairRecord> = read_jsonl(BufReader::new(file))
            .map_err(|e| CmdError::input(format!("{}: {e}", manifest.display())))?;
        if pairs.is_empty() {
            return Err(CmdError::input(format!(
                "pair manifest {} contains no rows",
                manifest.display()
            )));
        }
        let values: Vec<Result<f64, CmdError>> = ctx.with_pool(|| {
            pairs
                .par_iter()
                .map(|p| pair_mcd(&p.a, &p.b, n_coeffs, n_filters))
                .collect()
        })?;
        let mut lines = String::new();
        for (pair, value) in pairs.iter().zip(values) {
            let value = value?;
            let result = PairResult {
                a: &pair.a,
                b: &pair.b,
                mcd: (value * 1000.0).round() / 1000.0,
            };
            lines.push_str(&serde_json::to_string(&result).expect("serializable"));
            lines.push('\n');
        }
        print!("{lines}");
        return Ok(());
    }

    let (Some(a), Some(b)) = (&args.wav_a, &args.wav_b) else {
        return Err(CmdError::input(
            "expected two WAV paths, or --manifest for batch mode",
        ));
    };
    let value = pair_mcd(a, b, n_coeffs, n_filters)?;
    emit(None, &format!("{value:.3}"))
}
