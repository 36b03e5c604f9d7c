//! Geometry commands: `traverse`, `interpolate`, `arith`, `cone-check`,
//! `augment`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use latentlab_core::geometry::{
    self, arithmetic as latent_arithmetic, cone_membership, default_cone_tolerance,
    interpolate as latent_interpolate, ou_walk, traverse_dimension, ArithmeticOp, ConeSpec,
    IdentityTransform, LatentTransform,
};
use latentlab_core::io::{load_codebook, load_flow, write_csv, write_records};
use latentlab_core::tree::{apply_path, fit_tree, shortest_cross_path, DEFAULT_MAX_DEPTH, DEFAULT_MIN_LEAF};
use latentlab_core::{Rng, Tensor};

use crate::config::{ensure_out_dir, Resolver};
use crate::{CliError, CommonArgs};

fn vector_header(prefix: &str, dim: usize, extra: &[&str]) -> Vec<String> {
    let mut h = vec!["id".to_string()];
    h.extend((0..dim).map(|i| format!("{prefix}{i}")));
    h.extend(extra.iter().map(|s| s.to_string()));
    h
}

fn write_vector_csv(
    path: &std::path::Path,
    prefix: &str,
    dim: usize,
    rows: Vec<Vec<String>>,
    extra: &[&str],
) -> Result<(), CliError> {
    let header = vector_header(prefix, dim, extra);
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &refs, &rows)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// traverse
// ---------------------------------------------------------------------------

#[derive(clap::Args)]
pub struct TraverseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// `dim`, `ou`, or `guided`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Seed record id (`dim` and `ou` modes).
    #[arg(long)]
    pub id: Option<String>,
    /// Dimension to resample (`dim` mode).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Mean-reversion factor (`ou` mode).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Noise scale (`ou` mode).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Label key separating the two classes (`guided` mode).
    #[arg(long)]
    pub label_key: Option<String>,
    /// Source class label (`guided` mode).
    #[arg(long)]
    pub from: Option<String>,
    /// Target class label (`guided` mode).
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
}

pub fn traverse(args: TraverseArgs) -> Result<(), CliError> {
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let input = resolver.path(args.input, "input")?;
    let out = resolver.path(args.common.out, "out")?;
    let seed = resolver.u64(args.common.seed, "seed", 0);
    let mode = resolver.string(args.mode, "mode", "dim");
    ensure_out_dir(&out)?;
    let records = super::load_records(&input)?;
    let mut rng = Rng::from_seed(seed).split_str("traverse");

    match mode.as_str() {
        "dim" => {
            let id = resolver
                .opt_string(args.id, "id")
                .ok_or_else(|| CliError::validation("--id is required in dim mode"))?;
            let dim = resolver.usize(args.dim, "dim", 0);
            let record = super::find_record(&records, &id)?;
            let moved = traverse_dimension(&record.vector, dim, &mut rng)?;
            let rows = vec![
                {
                    let mut r = vec!["seed".to_string()];
                    r.extend(super::vector_row(&record.vector));
                    r
                },
                {
                    let mut r = vec!["traversed".to_string()];
                    r.extend(super::vector_row(&moved));
                    r
                },
            ];
            write_vector_csv(&out.join("traversal.csv"), "z", record.vector.len(), rows, &[])?;
        }
        "ou" => {
            let id = resolver
                .opt_string(args.id, "id")
                .ok_or_else(|| CliError::validation("--id is required in ou mode"))?;
            let gamma = resolver.f64(args.gamma, "gamma", 0.5);
            let sigma = resolver.f64(args.sigma, "sigma", 0.1);
            let steps = resolver.usize(args.steps, "steps", 10);
            let record = super::find_record(&records, &id)?;
            let path = ou_walk(&record.vector, gamma, sigma, steps, &mut rng);
            let mut rows = vec![{
                let mut r = vec!["0".to_string()];
                r.extend(super::vector_row(&record.vector));
                r
            }];
            for (i, z) in path.iter().enumerate() {
                let mut r = vec![format!("{}", i + 1)];
                r.extend(super::vector_row(z));
                rows.push(r);
            }
            write_vector_csv(&out.join("walk.csv"), "z", record.vector.len(), rows, &[])?;
        }
        "guided" => {
            let label_key = resolver.string(args.label_key, "label-key", "cluster");
            let from = resolver
                .opt_string(args.from, "from")
                .ok_or_else(|| CliError::validation("--from is required in guided mode"))?;
            let to = resolver
                .opt_string(args.to, "to")
                .ok_or_else(|| CliError::validation("--to is required in guided mode"))?;
            let max_depth = resolver.usize(args.max_depth, "max-depth", DEFAULT_MAX_DEPTH);
            let min_leaf = resolver.usize(args.min_leaf, "min-leaf", DEFAULT_MIN_LEAF);

            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut from_records = Vec::new();
            for r in &records {
                match r.label(&label_key) {
                    Some(l) if l == from => {
                        xs.push(r.vector.clone());
                        ys.push(0);
                        from_records.push(r);
                    }
                    Some(l) if l == to => {
                        xs.push(r.vector.clone());
                        ys.push(1);
                    }
                    _ => {}
                }
            }
            let tree = fit_tree(&xs, &ys, max_depth, min_leaf)?;
            let path = shortest_cross_path(&tree, 0, 1)?;
            std::fs::write(out.join("tree.json"), tree.export_json()?)
                .map_err(|e| CliError::runtime(format!("write tree: {e}")))?;
            std::fs::write(
                out.join("path.json"),
                serde_json::to_string_pretty(&path)
                    .map_err(|e| CliError::runtime(e.to_string()))?,
            )
            .map_err(|e| CliError::runtime(format!("write path: {e}")))?;

            let mut rows = Vec::new();
            let mut moved = 0usize;
            for r in &from_records {
                let edited = apply_path(&tree, &r.vector, &path)?;
                let class = tree.predict(&edited)?;
                if class == 1 {
                    moved += 1;
                }
                let mut row = vec![r.id.clone()];
                row.extend(super::vector_row(&edited));
                row.push(format!("{class}"));
                rows.push(row);
            }
            let dim = xs[0].len();
            write_vector_csv(&out.join("traversal.csv"), "z", dim, rows, &["class"])?;
            let ratio = moved as f64 / from_records.len().max(1) as f64;
            write_csv(
                &out.join("summary.csv"),
                &["name", "value", "n"],
                &[vec![
                    "guided_traversal_ratio".into(),
                    format!("{ratio}"),
                    format!("{}", from_records.len()),
                ]],
            )?;
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown mode {other:?} (expected dim|ou|guided)"
            )))
        }
    }
    resolver.write_resolved(&out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// interpolate
// ---------------------------------------------------------------------------

#[derive(clap::Args)]
pub struct InterpolateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// `latent` or `token`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub from_id: Option<String>,
    #[arg(long)]
    pub to_id: Option<String>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Codebook checkpoint (`token` mode).
    #[arg(long)]
    pub codebook: Option<PathBuf>,
}

pub fn interpolate(args: InterpolateArgs) -> Result<(), CliError> {
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let input = resolver.path(args.input, "input")?;
    let out = resolver.path(args.common.out, "out")?;
    let _seed = resolver.u64(args.common.seed, "seed", 0);
    let mode = resolver.string(args.mode, "mode", "latent");
    let step = resolver.f64(args.step, "step", 0.1);
    let from_id = resolver
        .opt_string(args.from_id, "from-id")
        .ok_or_else(|| CliError::validation("--from-id is required"))?;
    let to_id = resolver
        .opt_string(args.to_id, "to-id")
        .ok_or_else(|| CliError::validation("--to-id is required"))?;
    ensure_out_dir(&out)?;

    let records = super::load_records(&input)?;
    let from = super::find_record(&records, &from_id)?;
    let to = super::find_record(&records, &to_id)?;

    match mode.as_str() {
        "latent" => {
            let path = latent_interpolate(&from.vector, &to.vector, step)?;
            let mut rows = Vec::new();
            for (k, z) in path.iter().enumerate() {
                let mut row = vec![format!("{}", k as f64 * step)];
                row.extend(super::vector_row(z));
                rows.push(row);
            }
            write_vector_csv(&out.join("path.csv"), "z", from.vector.len(), rows, &[])?;
        }
        "token" => {
            let book_path = resolver.path(args.codebook, "codebook")?;
            let book = load_codebook(&book_path)?;
            let from_tokens = from
                .tokens
                .as_ref()
                .ok_or_else(|| CliError::validation(format!("record {from_id:?} has no tokens")))?;
            let to_tokens = to
                .tokens
                .as_ref()
                .ok_or_else(|| CliError::validation(format!("record {to_id:?} has no tokens")))?;
            if from_tokens.len() != to_tokens.len() {
                return Err(CliError::validation(format!(
                    "token interpolation needs equal lengths, got {} and {}",
                    from_tokens.len(),
                    to_tokens.len()
                )));
            }
            // Path over t = 0, step, ..., 1: each token moves by the
            // weighted-minimal-distance rule, chaining on its predecessor.
            let mut rows = Vec::new();
            let mut current: Vec<Tensor> =
                from_tokens.iter().map(|t| t.vector.clone()).collect();
            let mut t = 0.0;
            let mut k = 0usize;
            loop {
                let mut row = vec![format!("{t}")];
                let mut next = Vec::with_capacity(current.len());
                for (tok_idx, prev) in current.iter().enumerate() {
                    let code =
                        book.token_interpolate(prev, &to_tokens[tok_idx].vector, t)?;
                    row.push(format!("{code}"));
                    next.push(Tensor::vector(book.entry(code)));
                }
                rows.push(row);
                current = next;
                k += 1;
                t = k as f64 * step;
                if t > 1.0 + 1e-12 {
                    break;
                }
                if t > 1.0 {
                    t = 1.0;
                }
            }
            let mut header = vec!["t".to_string()];
            header.extend((0..from_tokens.len()).map(|i| format!("code{i}")));
            let refs: Vec<&str> = header.iter().map(String::as_str).collect();
            write_csv(&out.join("token_path.csv"), &refs, &rows)?;
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown mode {other:?} (expected latent|token)"
            )))
        }
    }
    resolver.write_resolved(&out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// arith
// ---------------------------------------------------------------------------

#[derive(clap::Args)]
pub struct ArithArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// `add`, `sub`, or `average`.
    #[arg(long)]
    pub op: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
}

pub fn arith(args: ArithArgs) -> Result<(), CliError> {
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let input = resolver.path(args.input, "input")?;
    let out = resolver.path(args.common.out, "out")?;
    let _seed = resolver.u64(args.common.seed, "seed", 0);
    let op_name = resolver.string(args.op, "op", "add");
    let a_id = resolver
        .opt_string(args.a, "a")
        .ok_or_else(|| CliError::validation("--a is required"))?;
    let b_id = resolver
        .opt_string(args.b, "b")
        .ok_or_else(|| CliError::validation("--b is required"))?;
    ensure_out_dir(&out)?;

    let op: ArithmeticOp = op_name.parse()?;
    let records = super::load_records(&input)?;
    let a = super::find_record(&records, &a_id)?;
    let b = super::find_record(&records, &b_id)?;
    let result = latent_arithmetic(op, &a.vector, &b.vector)?;

    // Nearest record to the result, a cheap stand-in for decoding.
    let mut nearest: Option<(&str, f64)> = None;
    for r in &records {
        let d = r.vector.euclidean_distance(&result)?;
        if nearest.is_none_or(|(_, nd)| d < nd) {
            nearest = Some((&r.id, d));
        }
    }
    let (nearest_id, nearest_dist) = nearest.expect("records nonempty");

    let mut row = vec![format!("{op_name}({a_id},{b_id})")];
    row.extend(super::vector_row(&result));
    row.push(nearest_id.to_string());
    row.push(format!("{nearest_dist}"));
    write_vector_csv(
        &out.join("result.csv"),
        "z",
        result.len(),
        vec![row],
        &["nearest_id", "nearest_distance"],
    )?;
    resolver.write_resolved(&out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// cone-check
// ---------------------------------------------------------------------------

#[derive(clap::Args)]
pub struct ConeCheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Role key naming the cone (its basis is every matching record).
    #[arg(long)]
    pub label_key: Option<String>,
    #[arg(long)]
    pub label_value: Option<String>,
    /// Records to test; when omitted, every record is tested.
    #[arg(long)]
    pub candidate_id: Option<String>,
    /// Absolute residual tolerance; default scales with the candidate norm.
    #[arg(long)]
    pub tol: Option<f64>,
}

pub fn cone_check(args: ConeCheckArgs) -> Result<(), CliError> {
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let input = resolver.path(args.input, "input")?;
    let out = resolver.path(args.common.out, "out")?;
    let _seed = resolver.u64(args.common.seed, "seed", 0);
    let label_key = resolver.string(args.label_key, "label-key", "role");
    let label_value = resolver
        .opt_string(args.label_value, "label-value")
        .ok_or_else(|| CliError::validation("--label-value is required"))?;
    let tol_flag = args.tol;
    if let Some(t) = tol_flag {
        resolver.note("tol", serde_json::Value::from(t));
    }
    let candidate_id = resolver.opt_string(args.candidate_id, "candidate-id");
    ensure_out_dir(&out)?;

    let records = super::load_records(&input)?;
    let cone = ConeSpec::from_records(&records, &label_key, &label_value)?;

    let candidates: Vec<&latentlab_core::geometry::LatentRecord> = match &candidate_id {
        Some(id) => vec![super::find_record(&records, id)?],
        None => records.iter().collect(),
    };
    let mut rows = Vec::new();
    for r in candidates {
        let tol = tol_flag.unwrap_or_else(|| default_cone_tolerance(&r.vector));
        let res = cone_membership(&r.vector, &cone, tol)?;
        rows.push(vec![
            r.id.clone(),
            format!("{}", res.member),
            format!("{}", res.residual),
            format!("{tol}"),
        ]);
    }
    write_csv(&out.join("membership.csv"), &["id", "member", "residual", "tol"], &rows)?;
    resolver.write_resolved(&out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

#[derive(clap::Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub label_key: Option<String>,
    #[arg(long)]
    pub label_value: Option<String>,
    /// Number of augmented records to keep.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Optional flow checkpoint mapping to/from the Gaussian space.
    #[arg(long)]
    pub flow: Option<PathBuf>,
}

pub fn augment(args: AugmentArgs) -> Result<(), CliError> {
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let input = resolver.path(args.input, "input")?;
    let out = resolver.path(args.common.out, "out")?;
    let seed = resolver.u64(args.common.seed, "seed", 0);
    let label_key = resolver.string(args.label_key, "label-key", "role");
    let label_value = resolver
        .opt_string(args.label_value, "label-value")
        .ok_or_else(|| CliError::validation("--label-value is required"))?;
    let budget = resolver.usize(args.budget, "budget", 16);
    let flow_path = args.flow.clone();
    if let Some(p) = &flow_path {
        resolver.note("flow", serde_json::Value::from(p.display().to_string()));
    }
    ensure_out_dir(&out)?;

    let records = super::load_records(&input)?;
    let mut rng = Rng::from_seed(seed).split_str("augment");

    // Keep filter: the candidate must stay closest to the target label's
    // centroid among all label centroids.
    let mut centroids: BTreeMap<String, (Tensor, usize)> = BTreeMap::new();
    let dim = records[0].vector.len();
    for r in &records {
        if let Some(l) = r.label(&label_key) {
            let entry = centroids
                .entry(l.to_string())
                .or_insert_with(|| (Tensor::zeros(&[dim]), 0));
            entry.0 = entry.0.add(&r.vector)?;
            entry.1 += 1;
        }
    }
    let centroids: BTreeMap<String, Tensor> = centroids
        .into_iter()
        .map(|(l, (s, n))| (l, s.scale(1.0 / n as f64)))
        .collect();
    let target = label_value.clone();
    let keep = move |v: &Tensor| -> bool {
        let mut best: Option<(&str, f64)> = None;
        for (l, c) in &centroids {
            let d = v.euclidean_distance(c).unwrap_or(f64::INFINITY);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((l, d));
            }
        }
        best.map(|(l, _)| l == target).unwrap_or(false)
    };

    let flow_model;
    let transform: &dyn LatentTransform = match &flow_path {
        Some(p) => {
            flow_model = load_flow(p)?;
            &flow_model
        }
        None => &IdentityTransform,
    };

    let augmented = geometry::augment(
        &records,
        transform,
        &label_key,
        &label_value,
        &mut rng,
        budget,
        keep,
    )?;
    write_records(&out.join("augmented.jsonl"), &augmented)?;
    write_csv(
        &out.join("summary.csv"),
        &["name", "value", "n"],
        &[vec![
            "augmented_records".into(),
            format!("{}", augmented.len()),
            format!("{budget}"),
        ]],
    )?;
    resolver.write_resolved(&out)?;
    Ok(())
}
