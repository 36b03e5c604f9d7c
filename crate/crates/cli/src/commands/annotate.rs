//! `annotate-amr`: classify (P1, P2, C) triples by inference type.
//!
//! Input is JSON-lines of
//! `{"id", "p1", "p2", "c", "p1_amr", "p2_amr", "c_amr"}` with Penman
//! strings. A triple whose subgraph search exceeds the cap is reported as
//! `SEARCH-CAP` rather than silently falling back to UNK.

use std::path::PathBuf;

use serde::Deserialize;

use latentlab_amr::{classify, parse_penman, AmrError, InferenceType, Triple};
use latentlab_core::io::write_csv;

use crate::config::{ensure_out_dir, Resolver};
use crate::{CliError, CommonArgs};

#[derive(Deserialize)]
struct TripleLine {
    id: String,
    p1: String,
    p2: String,
    c: String,
    p1_amr: String,
    p2_amr: String,
    c_amr: String,
}

#[derive(clap::Args)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
}

fn load_triples(path: &std::path::Path) -> Result<Vec<(String, Triple)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut triples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TripleLine = serde_json::from_str(line).map_err(|e| {
            CliError::validation(format!("malformed triple at line {}: {e}", i + 1))
        })?;
        let graph = |s: &str, which: &str| -> Result<_, CliError> {
            parse_penman(s).map_err(|e| {
                CliError::validation(format!(
                    "line {}: bad {which} graph for {:?}: {e}",
                    i + 1,
                    parsed.id
                ))
            })
        };
        let triple = Triple {
            p1_text: parsed.p1.clone(),
            p2_text: parsed.p2.clone(),
            c_text: parsed.c.clone(),
            p1: graph(&parsed.p1_amr, "p1")?,
            p2: graph(&parsed.p2_amr, "p2")?,
            c: graph(&parsed.c_amr, "c")?,
        };
        triples.push((parsed.id, triple));
    }
    if triples.is_empty() {
        return Err(CliError::validation(format!("no triples in {}", path.display())));
    }
    Ok(triples)
}

fn classify_one(triple: &Triple) -> Result<String, CliError> {
    match classify(triple) {
        Ok(t) => Ok(t.to_string()),
        Err(AmrError::SearchCapExceeded(_)) => Ok("SEARCH-CAP".to_string()),
        Err(e) => Err(e.into()),
    }
}

pub fn annotate(args: AnnotateArgs) -> Result<(), CliError> {
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let input = resolver.path(args.input, "input")?;
    let out = resolver.path(args.common.out, "out")?;
    let _seed = resolver.u64(args.common.seed, "seed", 0);
    let jobs = resolver.usize(args.common.jobs, "jobs", 1);
    ensure_out_dir(&out)?;

    let triples = load_triples(&input)?;

    // Per-triple classification fans out; results reduce in input order.
    let types: Vec<Result<String, CliError>> = if jobs > 1 {
        let chunk = triples.len().div_ceil(jobs).max(1);
        let mut slots: Vec<Option<Result<String, CliError>>> =
            (0..triples.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (c, slot_chunk) in triples.chunks(chunk).zip(slots.chunks_mut(chunk)) {
                handles.push(scope.spawn(move || {
                    for ((_, triple), slot) in c.iter().zip(slot_chunk.iter_mut()) {
                        *slot = Some(classify_one(triple));
                    }
                }));
            }
            for h in handles {
                h.join().expect("worker panicked");
            }
        });
        slots.into_iter().map(|s| s.expect("every slot filled")).collect()
    } else {
        triples.iter().map(|(_, t)| classify_one(t)).collect()
    };

    let mut rows = Vec::new();
    let mut counts: std::collections::BTreeMap<String, usize> = InferenceType::ALL
        .iter()
        .map(|t| (t.to_string(), 0))
        .collect();
    for ((id, _), ty) in triples.iter().zip(types) {
        let ty = ty?;
        *counts.entry(ty.clone()).or_insert(0) += 1;
        rows.push(vec![id.clone(), ty]);
    }
    write_csv(&out.join("annotations.csv"), &["id", "type"], &rows)?;

    let n = triples.len() as f64;
    let dist_rows: Vec<Vec<String>> = counts
        .iter()
        .map(|(ty, &count)| {
            vec![ty.clone(), format!("{count}"), format!("{}", count as f64 / n)]
        })
        .collect();
    write_csv(
        &out.join("distribution.csv"),
        &["type", "count", "proportion"],
        &dist_rows,
    )?;
    resolver.write_resolved(&out)?;
    Ok(())
}
