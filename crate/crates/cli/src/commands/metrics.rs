//! `metrics`: interpolation smoothness, proxy classifiers, invertibility
//! ratio, k-means MSE, and PCA projection reports.

use std::collections::BTreeMap;
use std::path::PathBuf;

use latentlab_core::geometry::LatentRecord;
use latentlab_core::io::{write_csv, write_scatter_svg};
use latentlab_core::metrics::{
    cluster_mse, interpolation_smoothness, invertibility_ratio, pca_project, proxy_classifier,
    ClassifierKind, TokenizedSentence,
};

use crate::config::{ensure_out_dir, Resolver};
use crate::{CliError, CommonArgs};

#[derive(clap::Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// `is`, `proxy`, `ratio`, `mse`, or `pca`.
    #[arg(long)]
    pub kind: Option<String>,
    /// Label key grouping records into interpolation paths (`is`).
    #[arg(long)]
    pub group_key: Option<String>,
    /// Label key ordering records inside a path (`is`).
    #[arg(long)]
    pub order_key: Option<String>,
    /// Label key carrying the class (`proxy`, `pca`).
    #[arg(long)]
    pub label_key: Option<String>,
    /// Classifier for `proxy`: `knn`, `naive_bayes`, `linear`.
    #[arg(long)]
    pub classifier: Option<String>,
    /// Every n-th record becomes test data (`proxy`).
    #[arg(long)]
    pub test_every: Option<usize>,
    /// Second record file compared by id (`ratio`).
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Label key compared between the files (`ratio`).
    #[arg(long)]
    pub key: Option<String>,
    /// Cluster count (`mse`).
    #[arg(long)]
    pub k: Option<usize>,
    /// Output dimensions (`pca`).
    #[arg(long)]
    pub dims: Option<usize>,
}

fn sentence_of(record: &LatentRecord) -> Result<TokenizedSentence, CliError> {
    let tokens = record
        .tokens
        .clone()
        .ok_or_else(|| CliError::validation(format!("record {:?} has no tokens", record.id)))?;
    Ok(TokenizedSentence::new(tokens)?)
}

pub fn metrics(args: MetricsArgs) -> Result<(), CliError> {
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let input = resolver.path(args.input, "input")?;
    let out = resolver.path(args.common.out, "out")?;
    let seed = resolver.u64(args.common.seed, "seed", 0);
    let kind = resolver.string(args.kind, "kind", "mse");
    let jobs = resolver.usize(args.common.jobs, "jobs", 1);
    ensure_out_dir(&out)?;
    let records = super::load_records(&input)?;

    match kind.as_str() {
        "is" => {
            let group_key = resolver.string(args.group_key, "group-key", "path");
            let order_key = resolver.string(args.order_key, "order-key", "step");
            let mut groups: BTreeMap<String, Vec<&LatentRecord>> = BTreeMap::new();
            for r in &records {
                let g = r.label(&group_key).ok_or_else(|| {
                    CliError::validation(format!("record {:?} lacks {group_key:?}", r.id))
                })?;
                groups.entry(g.to_string()).or_default().push(r);
            }
            let mut paths: Vec<(String, Vec<TokenizedSentence>)> = Vec::new();
            for (name, mut members) in groups {
                members.sort_by(|a, b| {
                    let oa: f64 = a
                        .label(&order_key)
                        .and_then(|v| v.parse().ok())
                        .unwrap_or(f64::MAX);
                    let ob: f64 = b
                        .label(&order_key)
                        .and_then(|v| v.parse().ok())
                        .unwrap_or(f64::MAX);
                    oa.partial_cmp(&ob)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then_with(|| a.id.cmp(&b.id))
                });
                let sentences: Vec<TokenizedSentence> = members
                    .iter()
                    .map(|r| sentence_of(r))
                    .collect::<Result<_, _>>()?;
                paths.push((name, sentences));
            }
            // Fan out per path; reduce in path order.
            let values: Vec<Result<f64, CliError>> = if jobs > 1 {
                let chunk = paths.len().div_ceil(jobs);
                let mut slots: Vec<Option<Result<f64, CliError>>> =
                    (0..paths.len()).map(|_| None).collect();
                std::thread::scope(|scope| {
                    let mut handles = Vec::new();
                    for (c, slot_chunk) in
                        paths.chunks(chunk.max(1)).zip(slots.chunks_mut(chunk.max(1)))
                    {
                        handles.push(scope.spawn(move || {
                            for (p, slot) in c.iter().zip(slot_chunk.iter_mut()) {
                                *slot = Some(
                                    interpolation_smoothness(&p.1).map_err(CliError::from),
                                );
                            }
                        }));
                    }
                    for h in handles {
                        h.join().expect("worker panicked");
                    }
                });
                slots.into_iter().map(|s| s.expect("every slot filled")).collect()
            } else {
                paths
                    .iter()
                    .map(|(_, p)| interpolation_smoothness(p).map_err(CliError::from))
                    .collect()
            };
            let mut rows = Vec::new();
            let mut collected = Vec::new();
            for ((name, path), value) in paths.iter().zip(values) {
                let v = value?;
                collected.push(v);
                rows.push(vec![name.clone(), format!("{v}"), format!("{}", path.len())]);
            }
            let avg = collected.iter().sum::<f64>() / collected.len().max(1) as f64;
            let max = collected.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = collected.iter().cloned().fold(f64::INFINITY, f64::min);
            rows.push(vec!["avg".into(), format!("{avg}"), format!("{}", collected.len())]);
            rows.push(vec!["max".into(), format!("{max}"), format!("{}", collected.len())]);
            rows.push(vec!["min".into(), format!("{min}"), format!("{}", collected.len())]);
            write_csv(&out.join("is.csv"), &["name", "value", "n"], &rows)?;
        }
        "proxy" => {
            let label_key = resolver.string(args.label_key, "label-key", "cluster");
            let classifier = resolver.string(args.classifier, "classifier", "knn");
            let test_every = resolver.usize(args.test_every, "test-every", 4).max(2);
            let kind: ClassifierKind = classifier.parse()?;

            let mut labels: Vec<String> = records
                .iter()
                .filter_map(|r| r.label(&label_key).map(str::to_string))
                .collect();
            labels.sort();
            labels.dedup();
            let data: Vec<(latentlab_core::Tensor, usize)> = records
                .iter()
                .map(|r| {
                    let l = r.label(&label_key).ok_or_else(|| {
                        CliError::validation(format!("record {:?} lacks {label_key:?}", r.id))
                    })?;
                    let idx = labels.iter().position(|x| x == l).expect("collected above");
                    Ok((r.vector.clone(), idx))
                })
                .collect::<Result<_, CliError>>()?;
            // Seeded shuffle decouples the split from any label periodicity
            // in the file order.
            let order = latentlab_core::Rng::from_seed(seed)
                .split_str("proxy-split")
                .permutation(data.len());
            let train: Vec<_> = order
                .iter()
                .enumerate()
                .filter(|(pos, _)| pos % test_every != 0)
                .map(|(_, &i)| data[i].clone())
                .collect();
            let test: Vec<_> = order
                .iter()
                .enumerate()
                .filter(|(pos, _)| pos % test_every == 0)
                .map(|(_, &i)| data[i].clone())
                .collect();
            let report = proxy_classifier(kind, &train, &test)?;
            write_csv(
                &out.join("metrics.csv"),
                &["name", "value", "n"],
                &[
                    vec!["accuracy".into(), format!("{}", report.accuracy), format!("{}", test.len())],
                    vec!["precision".into(), format!("{}", report.precision), format!("{}", test.len())],
                    vec!["recall".into(), format!("{}", report.recall), format!("{}", test.len())],
                    vec!["f1".into(), format!("{}", report.f1), format!("{}", test.len())],
                ],
            )?;
        }
        "ratio" => {
            let compare = resolver.path(args.compare, "compare")?;
            let key = resolver.string(args.key, "key", "cluster");
            let others = super::load_records(&compare)?;
            let mut pairs = Vec::new();
            for r in &records {
                let Some(other) = others.iter().find(|o| o.id == r.id) else {
                    return Err(CliError::validation(format!(
                        "record {:?} missing from {}",
                        r.id,
                        compare.display()
                    )));
                };
                pairs.push((r.labels.clone(), other.labels.clone()));
            }
            let ratio = invertibility_ratio(&pairs, &key)?;
            write_csv(
                &out.join("ratio.csv"),
                &["name", "value", "n"],
                &[vec!["invertibility_ratio".into(), format!("{ratio}"), format!("{}", pairs.len())]],
            )?;
        }
        "mse" => {
            let k = resolver.usize(args.k, "k", 4);
            let vectors: Vec<latentlab_core::Tensor> =
                records.iter().map(|r| r.vector.clone()).collect();
            let mse = cluster_mse(&vectors, k, seed)?;
            write_csv(
                &out.join("mse.csv"),
                &["name", "value", "n"],
                &[vec!["cluster_mse".into(), format!("{mse}"), format!("{}", vectors.len())]],
            )?;
        }
        "pca" => {
            let dims = resolver.usize(args.dims, "dims", 2);
            let label_key = resolver.string(args.label_key, "label-key", "cluster");
            let vectors: Vec<latentlab_core::Tensor> =
                records.iter().map(|r| r.vector.clone()).collect();
            let (projected, explained) = pca_project(&vectors, dims)?;
            let mut rows = Vec::new();
            for (r, p) in records.iter().zip(projected.iter()) {
                let mut row = vec![r.id.clone()];
                row.extend(super::vector_row(p));
                row.push(r.label(&label_key).unwrap_or("").to_string());
                rows.push(row);
            }
            let mut header: Vec<String> = vec!["id".into()];
            header.extend((0..dims).map(|i| format!("pc{i}")));
            header.push("label".into());
            let refs: Vec<&str> = header.iter().map(String::as_str).collect();
            write_csv(&out.join("projected.csv"), &refs, &rows)?;
            let ev_rows: Vec<Vec<String>> = explained
                .iter()
                .enumerate()
                .map(|(i, v)| vec![format!("pc{i}"), format!("{v}"), format!("{}", vectors.len())])
                .collect();
            write_csv(&out.join("explained.csv"), &["name", "value", "n"], &ev_rows)?;
            if dims >= 2 {
                let points: Vec<(f64, f64)> = projected
                    .iter()
                    .map(|p| (p.data()[0], p.data()[1]))
                    .collect();
                let labels: Vec<String> = records
                    .iter()
                    .map(|r| r.label(&label_key).unwrap_or("").to_string())
                    .collect();
                write_scatter_svg(&out.join("scatter.svg"), &points, &labels)?;
            }
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown kind {other:?} (expected is|proxy|ratio|mse|pca)"
            )))
        }
    }
    resolver.write_resolved(&out)?;
    Ok(())
}
