//! `train-flow` and `train-vae`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use latentlab_core::flow::{
    FlowModel, FlowTrainConfig, Objective, DEFAULT_BLOCKS, DEFAULT_SIGMA2,
};
use latentlab_core::io::{save_flow, write_csv};
use latentlab_core::optim::AdamWConfig;
use latentlab_core::vae::{Schedule, VaeModel, VaeTrainConfig};
use latentlab_core::{Rng, Tensor};

use crate::config::{ensure_out_dir, Resolver};
use crate::{CliError, CommonArgs};

#[derive(clap::Args)]
pub struct TrainFlowArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Embedding dataset (JSON-lines of records).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// `unsup` (negative log-likelihood) or `sup` (cluster-supervised).
    #[arg(long)]
    pub mode: Option<String>,
    /// Label key whose values name the clusters (supervised mode).
    #[arg(long)]
    pub label_key: Option<String>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
}

pub fn train_flow(args: TrainFlowArgs) -> Result<(), CliError> {
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let input = resolver.path(args.input, "input")?;
    let out = resolver.path(args.common.out, "out")?;
    let seed = resolver.u64(args.common.seed, "seed", 0);
    let mode = resolver.string(args.mode, "mode", "unsup");
    let blocks = resolver.usize(args.blocks, "blocks", DEFAULT_BLOCKS);
    let hidden = resolver.usize(args.hidden, "hidden", latentlab_core::flow::DEFAULT_HIDDEN);
    let steps = resolver.usize(args.steps, "steps", 200);
    let batch = resolver.usize(args.batch, "batch", 32);
    let lr = resolver.f64(args.lr, "lr", 5e-4);
    let sigma2 = resolver.f64(args.sigma2, "sigma2", DEFAULT_SIGMA2);
    let label_key = resolver.string(args.label_key, "label-key", "cluster");
    ensure_out_dir(&out)?;

    let records = super::load_records(&input)?;
    let dim = records[0].vector.len();
    resolver.note("dim", serde_json::Value::from(dim as u64));

    let objective = match mode.as_str() {
        "unsup" => Objective::Unsupervised,
        "sup" => {
            // Cluster centres: per-label mean of the input embeddings.
            let mut sums: BTreeMap<String, (Tensor, usize)> = BTreeMap::new();
            for r in &records {
                let label = r.label(&label_key).ok_or_else(|| {
                    CliError::validation(format!(
                        "record {:?} lacks label key {label_key:?}",
                        r.id
                    ))
                })?;
                let entry = sums
                    .entry(label.to_string())
                    .or_insert_with(|| (Tensor::zeros(&[dim]), 0));
                entry.0 = entry.0.add(&r.vector).map_err(CliError::from)?;
                entry.1 += 1;
            }
            let centers: BTreeMap<String, Tensor> = sums
                .into_iter()
                .map(|(label, (sum, n))| (label, sum.scale(1.0 / n as f64)))
                .collect();
            Objective::Supervised { centers, sigma2 }
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown mode {other:?} (expected unsup|sup)"
            )))
        }
    };

    let examples: Vec<(Tensor, Option<String>)> = records
        .iter()
        .map(|r| (r.vector.clone(), r.label(&label_key).map(str::to_string)))
        .collect();

    let mut model = FlowModel::new(dim, blocks, hidden, seed)?;
    let report = model.train(
        &examples,
        &objective,
        &FlowTrainConfig {
            steps,
            batch_size: batch,
            optimizer: AdamWConfig::with_lr(lr),
            seed,
        },
    )?;

    save_flow(&out.join("flow.ckpt"), &model)?;
    let rows: Vec<Vec<String>> = report
        .losses
        .iter()
        .enumerate()
        .map(|(i, l)| vec![format!("{i}"), format!("{l}")])
        .collect();
    write_csv(&out.join("losses.csv"), &["step", "loss"], &rows)?;

    // Forward-mapped embeddings for downstream evaluation.
    let mut mapped_rows = Vec::new();
    for r in &records {
        let (z, logdet) = model.forward(&r.vector)?;
        let mut row = vec![r.id.clone()];
        row.extend(super::vector_row(&z));
        row.push(format!("{logdet}"));
        mapped_rows.push(row);
    }
    let mut header: Vec<String> = vec!["id".into()];
    header.extend((0..dim).map(|i| format!("z{i}")));
    header.push("logdet".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("latents.csv"), &header_refs, &mapped_rows)?;

    resolver.write_resolved(&out)?;
    Ok(())
}

#[derive(clap::Args)]
pub struct TrainVaeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Number of cyclical KL-weight cycles over the run.
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Free-bits threshold per latent dimension.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

pub fn train_vae(args: TrainVaeArgs) -> Result<(), CliError> {
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let input = resolver.path(args.input, "input")?;
    let out = resolver.path(args.common.out, "out")?;
    let seed = resolver.u64(args.common.seed, "seed", 0);
    let latent_dim = resolver.usize(args.latent_dim, "latent-dim", 8);
    let hidden = resolver.usize(args.hidden, "hidden", 32);
    let steps = resolver.usize(args.steps, "steps", 200);
    let cycles = resolver.usize(args.cycles, "cycles", 4);
    let lambda = resolver.f64(args.lambda, "lambda", 0.5);
    let batch = resolver.usize(args.batch, "batch", 16);
    let lr = resolver.f64(args.lr, "lr", 1e-3);
    ensure_out_dir(&out)?;

    let records = super::load_records(&input)?;
    let input_dim = records[0].vector.len();
    let role_vocab = VaeModel::role_vocab_from_records(&records);
    if role_vocab.is_empty() {
        return Err(CliError::validation(
            "records carry no labels; the conditional VAE needs role keys",
        ));
    }
    resolver.note("input-dim", serde_json::Value::from(input_dim as u64));
    resolver.note(
        "role-vocab",
        serde_json::Value::from(role_vocab.clone()),
    );

    let schedule = Schedule::new(steps, cycles.max(1), lambda)?;
    let mut rng = Rng::from_seed(seed).split_str("vae-init");
    let mut model = VaeModel::new(input_dim, latent_dim, hidden, role_vocab, &mut rng);
    let losses = model.train(
        &records,
        &schedule,
        &VaeTrainConfig { batch_size: batch, optimizer: AdamWConfig::with_lr(lr), seed },
    )?;

    let rows: Vec<Vec<String>> = losses
        .iter()
        .enumerate()
        .map(|(i, l)| {
            vec![
                format!("{i}"),
                format!("{l}"),
                format!("{}", schedule.beta_at(i).unwrap_or(1.0)),
            ]
        })
        .collect();
    write_csv(&out.join("losses.csv"), &["step", "loss", "beta"], &rows)?;

    // Posterior means per record: the latent table downstream metrics use.
    let mut latent_rows = Vec::new();
    for r in &records {
        let roles: Vec<String> = r.labels.keys().cloned().collect();
        let params = model.posterior_params(&r.vector, &roles)?;
        let mut row = vec![r.id.clone()];
        row.extend(super::vector_row(&params.mu));
        latent_rows.push(row);
    }
    let mut header: Vec<String> = vec!["id".into()];
    header.extend((0..latent_dim).map(|i| format!("mu{i}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("latents.csv"), &header_refs, &latent_rows)?;

    latentlab_core::io::save_vae(&out.join("vae.ckpt"), &model)?;
    resolver.write_resolved(&out)?;
    Ok(())
}
