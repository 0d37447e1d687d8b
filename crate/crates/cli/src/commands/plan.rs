//! `vocalplan plan` — conductor request, or prompt rendering with
//! `--dry-run`.
//!
//! The API key is read from the `VOCALPLAN_API_KEY` environment variable,
//! never from a flag.

use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use vocalplan_core::conductor::{
    render_prompt, ConductorClient, ConductorRequest, EndpointConfig,
};
use vocalplan_core::features::{serialize_plan, SpeakerBaseline};

use crate::{commands::emit, CmdError, Ctx};

pub const API_KEY_ENV: &str = "VOCALPLAN_API_KEY";

#[derive(Args)]
pub struct PlanArgs {
    /// Text to synthesize
    #[arg(long)]
    text: String,

    /// Stylistic instruction for the conductor
    #[arg(long)]
    instruction: String,

    /// Chat-completion base URL (e.g. https://host/v1)
    #[arg(long)]
    endpoint: Option<String>,

    /// Model name passed to the endpoint
    #[arg(long)]
    model: Option<String>,

    /// Request timeout in seconds
    #[arg(long)]
    timeout: Option<f64>,

    /// Transient-failure retry budget
    #[arg(long)]
    max_retries: Option<u32>,

    /// Sampling temperature passed through to the endpoint
    #[arg(long)]
    temperature: Option<f64>,

    /// Print the rendered prompt without calling any endpoint
    #[arg(long)]
    dry_run: bool,

    /// Speaker baseline pitch override in Hz
    #[arg(long)]
    baseline_pitch: Option<i64>,

    /// Speaker baseline RMS energy override
    #[arg(long)]
    baseline_energy: Option<f64>,

    /// Speaker baseline spectral centroid override in Hz
    #[arg(long)]
    baseline_centroid: Option<i64>,

    /// Write output here instead of stdout
    #[arg(long, short)]
    out: Option<PathBuf>,
}

pub fn run(args: PlanArgs, ctx: &Ctx) -> Result<(), CmdError> {
    let mut baseline = SpeakerBaseline::default();
    if let Some(p) = ctx.cfg.resolve_opt(args.baseline_pitch, "baseline_pitch")? {
        baseline.pitch_hz = p;
    }
    if let Some(e) = ctx.cfg.resolve_opt(args.baseline_energy, "baseline_energy")? {
        baseline.energy_rms = e;
    }
    if let Some(c) = ctx
        .cfg
        .resolve_opt(args.baseline_centroid, "baseline_centroid")?
    {
        baseline.spectral_centroid_hz = c;
    }
    let request = ConductorRequest {
        text: args.text,
        instruction: args.instruction,
        baseline,
    };

    if args.dry_run {
        let prompt =
            render_prompt(&request).map_err(|e| CmdError::input(format!("prompt: {e}")))?;
        return emit(args.out.as_deref(), &prompt);
    }

    let endpoint = ctx
        .cfg
        .resolve_opt(args.endpoint, "endpoint")?
        .ok_or_else(|| CmdError::input("--endpoint is required unless --dry-run is set"))?;
    let model = ctx
        .cfg
        .resolve(args.model, "model", "gemini-2.5-pro".to_string())?;
    let timeout_s: f64 = ctx.cfg.resolve(args.timeout, "timeout", 30.0)?;
    if !(timeout_s > 0.0) {
        return Err(CmdError::input("--timeout must be positive"));
    }

    let mut config = EndpointConfig::new(endpoint, model);
    config.timeout = Duration::from_secs_f64(timeout_s);
    config.max_retries = ctx.cfg.resolve(args.max_retries, "max_retries", 3)?;
    config.temperature = ctx.cfg.resolve_opt(args.temperature, "temperature")?;
    config.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());

    let client = ConductorClient::new(config)
        .map_err(|e| CmdError::input(format!("endpoint config: {e}")))?;
    let plan = client.request_plan(&request).map_err(|e| CmdError {
        code: i32::from(e.class()),
        message: e.to_string(),
    })?;
    let text =
        serialize_plan(&plan).map_err(|e| CmdError::input(format!("serialization: {e}")))?;
    emit(args.out.as_deref(), &text)
}
