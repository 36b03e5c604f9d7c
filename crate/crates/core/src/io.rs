//! File formats: JSON-lines embedding datasets, JSON-header + little-endian
//! float-blob checkpoints, CSV reports, and SVG plots. Everything written
//! here is byte-stable for a fixed seed: no timestamps, sorted maps, and
//! shortest-round-trip float formatting.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::flow::{ActNorm, AffineCoupling, Block, FlowModel, Permutation};
use crate::geometry::LatentRecord;
use crate::tensor::Tensor;

// ---------------------------------------------------------------------------
// JSON-lines records
// ---------------------------------------------------------------------------

pub fn read_records(path: &Path) -> Result<Vec<LatentRecord>> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LatentRecord =
            serde_json::from_str(&line).map_err(|e| CoreError::MalformedRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(CoreError::EmptyInput(format!("no records in {}", path.display())));
    }
    Ok(records)
}

pub fn write_records(path: &Path, records: &[LatentRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Checkpoints: one JSON header line, then raw little-endian f64 parameters
// ---------------------------------------------------------------------------

fn write_blob(path: &Path, header: &impl Serialize, params: &[&Tensor]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for p in params {
        for v in p.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_blob<H: for<'de> Deserialize<'de>>(path: &Path) -> Result<(H, Vec<f64>)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header_line = String::new();
    reader.read_line(&mut header_line)?;
    let header: H = serde_json::from_str(header_line.trim_end())?;
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw)?;
    if raw.len() % 8 != 0 {
        return Err(CoreError::Checkpoint(format!(
            "parameter blob length {} is not a multiple of 8",
            raw.len()
        )));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, values))
}

#[derive(Debug, Serialize, Deserialize)]
struct FlowHeader {
    kind: String,
    dim: usize,
    seed: u64,
    blocks: Vec<FlowBlockHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "lowercase")]
enum FlowBlockHeader {
    Coupling { split: usize, hidden: usize },
    Permutation { perm: Vec<usize> },
    ActNorm { initialized: bool },
}

pub fn save_flow(path: &Path, model: &FlowModel) -> Result<()> {
    let blocks = model
        .blocks
        .iter()
        .map(|b| match b {
            Block::Coupling(c) => FlowBlockHeader::Coupling {
                split: c.split,
                hidden: c.subnet.w1.cols(),
            },
            Block::Permutation(p) => FlowBlockHeader::Permutation { perm: p.perm.clone() },
            Block::ActNorm(a) => FlowBlockHeader::ActNorm { initialized: a.initialized },
        })
        .collect();
    let header = FlowHeader {
        kind: "flow".into(),
        dim: model.dim,
        seed: model.seed,
        blocks,
    };
    write_blob(path, &header, &model.params())
}

pub fn load_flow(path: &Path) -> Result<FlowModel> {
    let (header, values) = read_blob::<FlowHeader>(path)?;
    if header.kind != "flow" {
        return Err(CoreError::Checkpoint(format!(
            "expected a flow checkpoint, found kind {:?}",
            header.kind
        )));
    }
    let dim = header.dim;
    let mut rng = crate::rng::Rng::from_seed(header.seed);
    let mut blocks = Vec::with_capacity(header.blocks.len());
    for spec in &header.blocks {
        blocks.push(match spec {
            FlowBlockHeader::Coupling { split, hidden } => {
                // Parameter values are overwritten from the blob below.
                let c = AffineCoupling::new(dim, *hidden, &mut rng);
                if c.split != *split {
                    return Err(CoreError::Checkpoint(format!(
                        "coupling split {split} does not match dim {dim}"
                    )));
                }
                Block::Coupling(c)
            }
            FlowBlockHeader::Permutation { perm } => {
                Block::Permutation(Permutation::from_perm(perm.clone()))
            }
            FlowBlockHeader::ActNorm { initialized } => {
                let mut a = ActNorm::new(dim);
                a.initialized = *initialized;
                Block::ActNorm(a)
            }
        });
    }
    let mut model = FlowModel { blocks, dim, seed: header.seed };
    fill_params(&mut model.params_mut(), &values, path)?;
    Ok(model)
}

fn fill_params(params: &mut [&mut Tensor], values: &[f64], path: &Path) -> Result<()> {
    let expected: usize = params.iter().map(|p| p.len()).sum();
    if expected != values.len() {
        return Err(CoreError::Checkpoint(format!(
            "{} holds {} parameters, model wants {expected}",
            path.display(),
            values.len()
        )));
    }
    let mut offset = 0;
    for p in params.iter_mut() {
        let n = p.len();
        p.data_mut().copy_from_slice(&values[offset..offset + n]);
        offset += n;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CodebookHeader {
    kind: String,
    k: usize,
    width: usize,
    decay: f64,
}

pub fn save_codebook(path: &Path, book: &crate::vq::Codebook) -> Result<()> {
    let header = CodebookHeader {
        kind: "codebook".into(),
        k: book.len(),
        width: book.width(),
        decay: book.decay(),
    };
    write_blob(path, &header, &[book.entries()])
}

pub fn load_codebook(path: &Path) -> Result<crate::vq::Codebook> {
    let (header, values) = read_blob::<CodebookHeader>(path)?;
    if header.kind != "codebook" {
        return Err(CoreError::Checkpoint(format!(
            "expected a codebook checkpoint, found kind {:?}",
            header.kind
        )));
    }
    if values.len() != header.k * header.width {
        return Err(CoreError::Checkpoint(format!(
            "codebook blob holds {} values, header wants {}",
            values.len(),
            header.k * header.width
        )));
    }
    let entries = Tensor::from_vec(vec![header.k, header.width], values)?;
    crate::vq::Codebook::from_entries(entries, header.decay, crate::vq::DEFAULT_EPSILON)
}

#[derive(Debug, Serialize, Deserialize)]
struct VaeHeader {
    kind: String,
    input_dim: usize,
    latent_dim: usize,
    hidden: usize,
    role_vocab: Vec<String>,
    freeze_prior_logvar: bool,
    seed_hint: u64,
}

pub fn save_vae(path: &Path, model: &crate::vae::VaeModel) -> Result<()> {
    let header = VaeHeader {
        kind: "vae".into(),
        input_dim: model.input_dim,
        latent_dim: model.latent_dim,
        hidden: model.posterior.hidden(),
        role_vocab: model.role_vocab.clone(),
        freeze_prior_logvar: model.freeze_prior_logvar,
        seed_hint: 0,
    };
    write_blob(path, &header, &model.params())
}

pub fn load_vae(path: &Path) -> Result<crate::vae::VaeModel> {
    let (header, values) = read_blob::<VaeHeader>(path)?;
    if header.kind != "vae" {
        return Err(CoreError::Checkpoint(format!(
            "expected a vae checkpoint, found kind {:?}",
            header.kind
        )));
    }
    let mut rng = crate::rng::Rng::from_seed(header.seed_hint);
    let mut model = crate::vae::VaeModel::new(
        header.input_dim,
        header.latent_dim,
        header.hidden,
        header.role_vocab,
        &mut rng,
    );
    model.freeze_prior_logvar = header.freeze_prior_logvar;
    fill_params(&mut model.params_mut(), &values, path)?;
    Ok(model)
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "{}",
        header.iter().map(|h| csv_escape(h)).collect::<Vec<_>>().join(",")
    )?;
    for row in rows {
        writeln!(
            out,
            "{}",
            row.iter().map(|f| csv_escape(f)).collect::<Vec<_>>().join(",")
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Square matrix with row labels plus a trailing `gap,<value>` summary row.
pub fn write_matrix_csv(path: &Path, matrix: &Tensor, labels: &[String], gap: Option<f64>) -> Result<()> {
    let n = matrix.rows();
    if labels.len() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    let mut out = BufWriter::new(File::create(path)?);
    let mut head = vec!["label".to_string()];
    head.extend(labels.iter().map(|l| csv_escape(l)));
    writeln!(out, "{}", head.join(","))?;
    for (i, label) in labels.iter().enumerate() {
        let mut row = vec![csv_escape(label)];
        for j in 0..matrix.cols() {
            row.push(format!("{}", matrix.get(i, j)));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    if let Some(g) = gap {
        writeln!(out, "gap,{g}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads back a matrix written by `write_matrix_csv` (ignoring the summary).
pub fn read_matrix_csv(path: &Path) -> Result<(Tensor, Vec<String>, Option<f64>)> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::EmptyInput("matrix csv".into()))?;
    let n = header.split(',').count() - 1;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut gap = None;
    for line in lines {
        let mut fields = line.split(',');
        let first = fields.next().unwrap_or_default();
        if first == "gap" {
            gap = fields.next().and_then(|v| v.parse().ok());
            continue;
        }
        labels.push(first.to_string());
        for field in fields {
            data.push(field.parse::<f64>().map_err(|e| {
                CoreError::Checkpoint(format!("bad matrix entry {field:?}: {e}"))
            })?);
        }
    }
    Ok((Tensor::from_vec(vec![labels.len(), n], data)?, labels, gap))
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

fn diverging_color(v: f64) -> String {
    // Blue (-1) through white (0) to red (+1).
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

/// Grid heatmap with a diverging ramp over [-1, 1].
pub fn write_heatmap_svg(path: &Path, matrix: &Tensor, labels: &[String]) -> Result<()> {
    let n = matrix.rows();
    let cell = 24usize;
    let margin = 80usize;
    let size = margin + n * cell + 10;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for i in 0..n {
        for j in 0..matrix.cols() {
            let x = margin + j * cell;
            let y = margin + i * cell;
            svg.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" stroke=\"#ddd\"/>\n",
                diverging_color(matrix.get(i, j))
            ));
        }
    }
    for (i, label) in labels.iter().enumerate() {
        let y = margin + i * cell + cell / 2 + 4;
        svg.push_str(&format!(
            "<text x=\"4\" y=\"{y}\" font-size=\"11\" font-family=\"monospace\">{}</text>\n",
            xml_escape(label)
        ));
        let x = margin + i * cell + cell / 2;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"11\" font-family=\"monospace\" transform=\"rotate(-60 {x} {})\">{}</text>\n",
            margin - 8,
            margin - 8,
            xml_escape(label)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

/// 2D scatter with one fill color per label, for PCA projections.
pub fn write_scatter_svg(
    path: &Path,
    points: &[(f64, f64)],
    labels: &[String],
) -> Result<()> {
    if points.len() != labels.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "{} points vs {} labels",
            points.len(),
            labels.len()
        )));
    }
    let size = 420.0;
    let margin = 30.0;
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let span_x = (max_x - min_x).max(1e-12);
    let span_y = (max_y - min_y).max(1e-12);

    let mut palette: Vec<String> = labels.to_vec();
    palette.sort();
    palette.dedup();
    let colors = ["#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb"];

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
        size as usize
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for ((x, y), label) in points.iter().zip(labels.iter()) {
        let px = margin + (x - min_x) / span_x * (size - 2.0 * margin);
        let py = size - margin - (y - min_y) / span_y * (size - 2.0 * margin);
        let color_idx = palette.iter().position(|l| l == label).unwrap_or(0);
        svg.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"{}\"/>\n",
            colors[color_idx % colors.len()]
        ));
    }
    for (i, label) in palette.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"monospace\" fill=\"{}\">{}</text>\n",
            8,
            16 + 14 * i,
            colors[i % colors.len()],
            xml_escape(label)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("latentlab-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn records_round_trip_with_line_numbers_on_error() {
        let path = tmp("records.jsonl");
        let records = vec![
            LatentRecord::new("a", Tensor::vector(&[1.0, 2.0])).with_label("ARG0", "animal"),
            LatentRecord::new("b", Tensor::vector(&[3.0, 4.0])),
        ];
        write_records(&path, &records).unwrap();
        let back = read_records(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].vector.data(), &[1.0, 2.0]);

        let bad = tmp("bad.jsonl");
        std::fs::write(&bad, "{\"id\": \"ok\", \"vector\": [1.0]}\nnot json\n").unwrap();
        match read_records(&bad) {
            Err(CoreError::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed record error, got {other:?}"),
        }
    }

    #[test]
    fn flow_checkpoint_round_trip_bitwise() {
        let mut model = FlowModel::new(4, 2, 8, 99).unwrap();
        let batch: Vec<Tensor> = {
            let mut rng = Rng::from_seed(1);
            (0..8).map(|_| Tensor::randn(&[4], &mut rng)).collect()
        };
        model.initialize_actnorm(&batch).unwrap();
        let path = tmp("flow.ckpt");
        save_flow(&path, &model).unwrap();
        let loaded = load_flow(&path).unwrap();
        let x = Tensor::vector(&[0.1, -0.2, 0.3, -0.4]);
        let (z1, ld1) = model.forward(&x).unwrap();
        let (z2, ld2) = loaded.forward(&x).unwrap();
        assert_eq!(z1.data(), z2.data());
        assert_eq!(ld1, ld2);

        // Saving again produces identical bytes.
        let path2 = tmp("flow2.ckpt");
        save_flow(&path2, &loaded).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn codebook_checkpoint_round_trip() {
        let mut rng = Rng::from_seed(5);
        let book = crate::vq::Codebook::new(4, 3, &mut rng).unwrap();
        let path = tmp("book.ckpt");
        save_codebook(&path, &book).unwrap();
        let loaded = load_codebook(&path).unwrap();
        assert_eq!(book.entries().data(), loaded.entries().data());
    }

    #[test]
    fn matrix_csv_round_trip() {
        let m = Tensor::matrix(2, 2, vec![1.0, -0.25, -0.25, 1.0]).unwrap();
        let labels = vec!["rule0".to_string(), "rule1".to_string()];
        let path = tmp("matrix.csv");
        write_matrix_csv(&path, &m, &labels, Some(0.75)).unwrap();
        let (back, back_labels, gap) = read_matrix_csv(&path).unwrap();
        assert_eq!(back.data(), m.data());
        assert_eq!(back_labels, labels);
        assert_eq!(gap, Some(0.75));
    }

    #[test]
    fn single_cell_heatmap_and_scatter_render() {
        let m = Tensor::matrix(1, 1, vec![0.5]).unwrap();
        let path = tmp("heat.svg");
        write_heatmap_svg(&path, &m, &["only".to_string()]).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert!(content.starts_with("<svg"));
        assert_eq!(content.matches("<rect").count(), 2); // background + 1 cell

        let scatter = tmp("scatter.svg");
        write_scatter_svg(&scatter, &[(0.0, 0.0), (1.0, 1.0)], &["a".into(), "b".into()]).unwrap();
        let content = std::fs::read_to_string(&scatter).unwrap();
        assert_eq!(content.matches("<circle").count(), 2);
    }

    #[test]
    fn csv_escaping() {
        let path = tmp("esc.csv");
        write_csv(
            &path,
            &["name", "value"],
            &[vec!["with,comma".to_string(), "with\"quote".to_string()]],
        )
        .unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert!(content.contains("\"with,comma\""));
        assert!(content.contains("\"with\"\"quote\""));
    }
}
