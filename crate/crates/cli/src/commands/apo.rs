//! `vocalplan apo` — preference tuples -> trained toy policy.
//!
//! The starting policy doubles as the frozen reference, so the loss opens
//! at zero and training is driven by the margin term. The trace CSV holds
//! the loss before each step plus the final loss.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use vocalplan_core::apo::{preference_margin, train_apo, ApoConfig, ToyPolicy};
use vocalplan_core::pipeline::read_pref_tuples;

use crate::{commands::emit, CmdError, Ctx};

#[derive(Args)]
pub struct ApoArgs {
    /// Preference tuples, one JSON record per line
    #[arg(long)]
    pref: PathBuf,

    /// Implicit-reward scale
    #[arg(long)]
    beta: Option<f64>,

    /// Gradient-descent step size
    #[arg(long, alias = "lr")]
    learning_rate: Option<f64>,

    /// Full-batch descent steps
    #[arg(long)]
    epochs: Option<usize>,

    /// Context order of the tabular policy
    #[arg(long)]
    context_len: Option<usize>,

    /// Vocabulary size (inferred from the data when omitted)
    #[arg(long)]
    vocab_size: Option<usize>,

    /// Loss-trace CSV path (step,loss)
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Serialize)]
struct ApoMetrics {
    tuples: usize,
    vocab_size: usize,
    context_len: usize,
    beta: f64,
    learning_rate: f64,
    epochs: usize,
    initial_loss: f64,
    final_loss: f64,
    margin_before: f64,
    margin_after: f64,
    margin_delta: f64,
}

pub fn run(args: ApoArgs, ctx: &Ctx) -> Result<(), CmdError> {
    let file = File::open(&args.pref)
        .map_err(|e| CmdError::input(format!("cannot read {}: {e}", args.pref.display())))?;
    let tuples = read_pref_tuples(BufReader::new(file))
        .map_err(|e| CmdError::input(format!("{}: {e}", args.pref.display())))?;
    if tuples.is_empty() {
        return Err(CmdError::input(format!(
            "preference file {} contains no tuples",
            args.pref.display()
        )));
    }

    let max_id = tuples
        .iter()
        .flat_map(|t| {
            t.text
                .iter()
                .chain(&t.plan)
                .chain(&t.chosen)
                .chain(&t.rejected)
        })
        .max()
        .copied()
        .unwrap_or(0);
    let inferred = (max_id as usize + 1).max(2);
    let vocab_size = ctx.cfg.resolve(args.vocab_size, "vocab_size", inferred)?;
    let context_len = ctx.cfg.resolve(args.context_len, "context_len", 1)?;
    let config = ApoConfig {
        beta: ctx.cfg.resolve(args.beta, "beta", 0.1)?,
        learning_rate: ctx.cfg.resolve(args.learning_rate, "learning_rate", 1.0)?,
        epochs: ctx.cfg.resolve(args.epochs, "epochs", 50)?,
    };

    let theta = ToyPolicy::uniform(vocab_size, context_len)
        .map_err(|e| CmdError::input(e.to_string()))?;
    let reference = theta.clone();

    let margin_before =
        preference_margin(&theta, &tuples).map_err(|e| CmdError::input(e.to_string()))?;
    let outcome = train_apo(&theta, &reference, &tuples, &config)
        .map_err(|e| CmdError::input(e.to_string()))?;
    let margin_after = preference_margin(&outcome.policy, &tuples)
        .map_err(|e| CmdError::input(e.to_string()))?;

    if let Some(trace_path) = &args.trace {
        let mut out = File::create(trace_path)
            .map_err(|e| CmdError::input(format!("cannot write {}: {e}", trace_path.display())))?;
        let mut csv = String::from("step,loss\n");
        for (step, loss) in outcome.trace.iter().enumerate() {
            csv.push_str(&format!("{step},{loss:.12}\n"));
        }
        out.write_all(csv.as_bytes())
            .map_err(|e| CmdError::input(format!("cannot write {}: {e}", trace_path.display())))?;
    }

    let metrics = ApoMetrics {
        tuples: tuples.len(),
        vocab_size,
        context_len,
        beta: config.beta,
        learning_rate: config.learning_rate,
        epochs: config.epochs,
        initial_loss: outcome.trace[0],
        final_loss: *outcome.trace.last().expect("non-empty trace"),
        margin_before,
        margin_after,
        margin_delta: margin_after - margin_before,
    };
    let metrics_json = serde_json::to_string_pretty(&metrics)
        .map_err(|e| CmdError::input(format!("metrics serialization: {e}")))?;
    emit(None, &metrics_json)
}
