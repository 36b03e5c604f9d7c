//! `quantize`: fit a codebook over the token stream by EMA updates, then
//! emit assignments. Gumbel mode samples indices instead of taking the
//! nearest code.

use std::path::PathBuf;

use latentlab_core::io::{save_codebook, write_csv};
use latentlab_core::vq::{quantize_gumbel, Codebook, DEFAULT_CODES, DEFAULT_DECAY};
use latentlab_core::{Rng, Tensor};

use crate::config::{ensure_out_dir, Resolver};
use crate::{CliError, CommonArgs};

#[derive(clap::Args)]
pub struct QuantizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Codebook size.
    #[arg(long)]
    pub k: Option<usize>,
    /// EMA passes over the token stream.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// `kmeans` (nearest code) or `gumbel` (sampled index).
    #[arg(long)]
    pub mode: Option<String>,
    /// Gumbel temperature.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
}

/// One token of the quantization stream.
struct StreamToken {
    record_id: String,
    token_index: usize,
    vector: Tensor,
}

/// Token stream: per-record token embeddings when present, otherwise the
/// record vector itself as a single token.
fn token_stream(
    records: &[latentlab_core::geometry::LatentRecord],
) -> Result<(Vec<StreamToken>, usize), CliError> {
    let mut stream = Vec::new();
    for r in records {
        match &r.tokens {
            Some(tokens) if !tokens.is_empty() => {
                for (i, t) in tokens.iter().enumerate() {
                    stream.push(StreamToken {
                        record_id: r.id.clone(),
                        token_index: i,
                        vector: t.vector.clone(),
                    });
                }
            }
            _ => stream.push(StreamToken {
                record_id: r.id.clone(),
                token_index: 0,
                vector: r.vector.clone(),
            }),
        }
    }
    let width = stream
        .first()
        .map(|t| t.vector.len())
        .ok_or_else(|| CliError::validation("empty token stream".to_string()))?;
    if stream.iter().any(|t| t.vector.len() != width) {
        return Err(CliError::validation("token embeddings differ in width".to_string()));
    }
    Ok((stream, width))
}

pub fn quantize(args: QuantizeArgs) -> Result<(), CliError> {
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let input = resolver.path(args.input, "input")?;
    let out = resolver.path(args.common.out, "out")?;
    let seed = resolver.u64(args.common.seed, "seed", 0);
    let k = resolver.usize(args.k, "k", DEFAULT_CODES);
    let epochs = resolver.usize(args.epochs, "epochs", 20);
    let mode = resolver.string(args.mode, "mode", "kmeans");
    let tau = resolver.f64(args.tau, "tau", 1.0);
    let decay = resolver.f64(args.decay, "decay", DEFAULT_DECAY);
    ensure_out_dir(&out)?;

    let records = super::load_records(&input)?;
    let (stream, width) = token_stream(&records)?;
    let mut rng = Rng::from_seed(seed).split_str("quantize");

    // Batch the stream per record set pass; EMA fit runs in kmeans
    // assignment mode regardless of the final emission mode.
    let batch: Vec<f64> = stream.iter().flat_map(|t| t.vector.data().to_vec()).collect();
    let batch = Tensor::from_vec(vec![stream.len(), width], batch)?;
    let mut book = Codebook::init_from_batch(
        &batch,
        k,
        decay,
        latentlab_core::vq::DEFAULT_EPSILON,
        &mut rng,
    )?;
    let mut fit_rows = Vec::new();
    for epoch in 0..epochs {
        let q = book.quantize_kmeans(&batch)?;
        book.ema_update(&batch, &q.indices)?;
        book.reseed_dead(&batch, &mut rng)?;
        fit_rows.push(vec![
            format!("{epoch}"),
            format!("{}", q.vq_loss),
            format!("{}", q.commit_loss),
        ]);
    }
    write_csv(&out.join("fit.csv"), &["epoch", "vq_loss", "commit_loss"], &fit_rows)?;

    let indices: Vec<usize> = match mode.as_str() {
        "kmeans" => book.quantize_kmeans(&batch)?.indices,
        "gumbel" => {
            // Logits: negative squared distances to each code.
            let mut logits = Vec::with_capacity(stream.len() * k);
            for t in &stream {
                for code in 0..k {
                    let d: f64 = t
                        .vector
                        .data()
                        .iter()
                        .zip(book.entry(code))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    logits.push(-d);
                }
            }
            let logits = Tensor::from_vec(vec![stream.len(), k], logits)?;
            quantize_gumbel(&logits, tau, &mut rng)?
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown mode {other:?} (expected kmeans|gumbel)"
            )))
        }
    };

    let rows: Vec<Vec<String>> = stream
        .iter()
        .zip(indices.iter())
        .map(|(t, code)| {
            vec![t.record_id.clone(), format!("{}", t.token_index), format!("{code}")]
        })
        .collect();
    write_csv(&out.join("assignments.csv"), &["id", "token", "code"], &rows)?;
    save_codebook(&out.join("codebook.ckpt"), &book)?;
    resolver.write_resolved(&out)?;
    Ok(())
}
