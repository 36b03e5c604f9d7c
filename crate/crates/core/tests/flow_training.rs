//! Training-behaviour tests for the flow: supervision tightens clusters,
//! nearest-centre classification works on the transformed space, and the
//! loss stream trends downward over its trailing window.

use std::collections::BTreeMap;

use latentlab_core::flow::{FlowModel, FlowTrainConfig, Objective};
use latentlab_core::optim::AdamWConfig;
use latentlab_core::{Rng, Tensor};

fn two_cluster_data(rng: &mut Rng, per_cluster: usize) -> Vec<(Tensor, Option<String>)> {
    let mut out = Vec::new();
    for _ in 0..per_cluster {
        let mut v = rng.gaussian_vec(2);
        v[0] = 0.7 * v[0] - 1.5;
        v[1] *= 0.7;
        out.push((Tensor::vector(&v), Some("left".to_string())));
        let mut v = rng.gaussian_vec(2);
        v[0] = 0.7 * v[0] + 1.5;
        v[1] *= 0.7;
        out.push((Tensor::vector(&v), Some("right".to_string())));
    }
    out
}

fn centers_2d() -> BTreeMap<String, Tensor> {
    let mut centers = BTreeMap::new();
    centers.insert("left".to_string(), Tensor::vector(&[-2.0, 0.0]));
    centers.insert("right".to_string(), Tensor::vector(&[2.0, 0.0]));
    centers
}

fn within_cluster_variance(
    model: &FlowModel,
    data: &[(Tensor, Option<String>)],
) -> f64 {
    let mut per_label: BTreeMap<&str, Vec<Tensor>> = BTreeMap::new();
    for (x, label) in data {
        let (z, _) = model.forward(x).unwrap();
        per_label
            .entry(label.as_deref().unwrap())
            .or_default()
            .push(Tensor::vector(z.data()));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for members in per_label.values() {
        let dim = members[0].len();
        let mut mean = vec![0.0; dim];
        for m in members {
            for (s, &v) in mean.iter_mut().zip(m.data()) {
                *s += v / members.len() as f64;
            }
        }
        for m in members {
            total += m
                .data()
                .iter()
                .zip(mean.iter())
                .map(|(v, mu)| (v - mu) * (v - mu))
                .sum::<f64>();
            n += 1;
        }
    }
    total / n as f64
}

#[test]
fn supervised_training_reduces_within_cluster_variance() {
    let mut rng = Rng::from_seed(101);
    let data = two_cluster_data(&mut rng, 60);
    let mut model = FlowModel::new(2, 3, 16, 7).unwrap();
    model
        .initialize_actnorm(&data.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>())
        .unwrap();
    let before = within_cluster_variance(&model, &data);
    model
        .train(
            &data,
            &Objective::Supervised { centers: centers_2d(), sigma2: 0.6 },
            &FlowTrainConfig {
                steps: 500,
                batch_size: 32,
                optimizer: AdamWConfig::with_lr(2e-3),
                seed: 7,
            },
        )
        .unwrap();
    let after = within_cluster_variance(&model, &data);
    assert!(
        after < before,
        "within-cluster variance should shrink: {before} -> {after}"
    );
}

#[test]
fn supervised_four_cluster_nearest_center_accuracy() {
    let mut rng = Rng::from_seed(11);
    let mut data: Vec<(Tensor, Option<String>)> = Vec::new();
    let mut centers = BTreeMap::new();
    let layout = [[2.5, 2.5], [2.5, -2.5], [-2.5, 2.5], [-2.5, -2.5]];
    for (i, c) in layout.iter().enumerate() {
        centers.insert(format!("c{i}"), Tensor::vector(c));
        for _ in 0..50 {
            let v = vec![c[0] * 0.4 + 0.5 * rng.gaussian(), c[1] * 0.4 + 0.5 * rng.gaussian()];
            data.push((Tensor::vector(&v), Some(format!("c{i}"))));
        }
    }
    let mut model = FlowModel::new(2, 4, 24, 3).unwrap();
    model
        .train(
            &data,
            &Objective::Supervised { centers: centers.clone(), sigma2: 0.6 },
            &FlowTrainConfig {
                steps: 600,
                batch_size: 64,
                optimizer: AdamWConfig::with_lr(3e-3),
                seed: 3,
            },
        )
        .unwrap();

    let mut correct = 0usize;
    for (x, label) in &data {
        let (z, _) = model.forward(x).unwrap();
        let z = Tensor::vector(z.data());
        let mut best: Option<(&str, f64)> = None;
        for (l, c) in &centers {
            let d = z.euclidean_distance(c).unwrap();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((l, d));
            }
        }
        if best.map(|(l, _)| l) == label.as_deref() {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / data.len() as f64;
    assert!(accuracy > 0.95, "nearest-center accuracy {accuracy}");
}

#[test]
fn training_loss_trend_over_trailing_window() {
    // Sanity contract: the trailing-50-step mean does not increase over the
    // first such window on a well-behaved stream.
    let mut rng = Rng::from_seed(31);
    let data: Vec<(Tensor, Option<String>)> = (0..256)
        .map(|_| {
            let v: Vec<f64> = rng.gaussian_vec(4).iter().map(|x| 2.0 * x + 1.0).collect();
            (Tensor::vector(&v), None)
        })
        .collect();
    let mut model = FlowModel::new(4, 3, 16, 13).unwrap();
    let report = model
        .train(
            &data,
            &Objective::Unsupervised,
            &FlowTrainConfig {
                steps: 150,
                batch_size: 32,
                optimizer: AdamWConfig::with_lr(1e-3),
                seed: 13,
            },
        )
        .unwrap();
    let early: f64 = report.losses[..50].iter().sum::<f64>() / 50.0;
    let late: f64 = report.losses[report.losses.len() - 50..].iter().sum::<f64>() / 50.0;
    assert!(late <= early, "trailing window rose: {early} -> {late}");
}
