//! Acceptance suite: one test per criterion, each printing a
//! `[PASS] criterion N` line (run with `-- --nocapture` to see them).

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use latentlab_amr::{classify, parse_penman, InferenceType, Triple};
use latentlab_core::attention::{addition_q, attend, attention_weights, kv_add, kv_mem, query_add};
use latentlab_core::flow::{FlowModel, FlowTrainConfig, Objective};
use latentlab_core::metrics::{
    interpolation_smoothness, kmeans, proxy_classifier, wmd, ClassifierKind, TokenizedSentence,
};
use latentlab_core::ntk::two_rule_gap;
use latentlab_core::optim::AdamWConfig;
use latentlab_core::tape::Tape;
use latentlab_core::tree::{apply_path, fit_tree, shortest_cross_path};
use latentlab_core::vae::{free_bits, Schedule};
use latentlab_core::vq::{kl_uniform, quantize_gumbel, vq_loss_on_tape, Codebook};
use latentlab_core::{Rng, Tensor};

fn pass(n: usize, what: &str) {
    println!("[PASS] criterion {n}: {what}");
}

// -------------------------------------------------------------------------
// 1. Flow bijectivity at D = 32 on a trained 10-block flow.
// -------------------------------------------------------------------------
#[test]
fn criterion_01_flow_bijectivity() {
    let start = Instant::now();
    let mut rng = Rng::from_seed(1).split_str("acceptance-1");
    let examples: Vec<(Tensor, Option<String>)> =
        (0..64).map(|_| (Tensor::randn(&[32], &mut rng), None)).collect();
    let mut model = FlowModel::new(32, 10, 64, 1).unwrap();
    model
        .train(
            &examples,
            &Objective::Unsupervised,
            &FlowTrainConfig {
                steps: 30,
                batch_size: 16,
                optimizer: AdamWConfig::with_lr(5e-4),
                seed: 1,
            },
        )
        .unwrap();

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = Tensor::randn(&[32], &mut rng);
        let (z, _) = model.forward(&x).unwrap();
        let back = model.inverse(&z).unwrap();
        let err = back
            .data()
            .iter()
            .zip(x.data().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst < 1e-8, "sup-norm round-trip error {worst}");
    assert!(elapsed < 10.0, "runtime {elapsed:.2}s exceeds 10s");
    pass(1, &format!("1000 round trips, worst error {worst:.2e}, {elapsed:.2}s"));
}

// -------------------------------------------------------------------------
// 2. Log-determinant matches a finite-difference Jacobian.
// -------------------------------------------------------------------------
fn log_abs_det(matrix: &mut [Vec<f64>]) -> f64 {
    let n = matrix.len();
    let mut log_det = 0.0;
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if matrix[r][col].abs() > matrix[pivot][col].abs() {
                pivot = r;
            }
        }
        matrix.swap(col, pivot);
        let diag = matrix[col][col];
        assert!(diag.abs() > 1e-14, "singular Jacobian");
        log_det += diag.abs().ln();
        for r in col + 1..n {
            let factor = matrix[r][col] / diag;
            let (top, bottom) = matrix.split_at_mut(r);
            for (c, cell) in bottom[0].iter_mut().enumerate().skip(col) {
                *cell -= factor * top[col][c];
            }
        }
    }
    log_det
}

#[test]
fn criterion_02_logdet_matches_finite_differences() {
    for &dim in &[2usize, 4, 8] {
        let mut model = FlowModel::new(dim, 3, 8, dim as u64).unwrap();
        let mut rng = Rng::from_seed(20 + dim as u64);
        for p in model.params_mut() {
            for v in p.data_mut() {
                *v = 0.2 * rng.gaussian();
            }
        }
        for block in &mut model.blocks {
            if let latentlab_core::flow::Block::ActNorm(a) = block {
                a.initialized = true;
            }
        }
        for _ in 0..20 {
            let x = Tensor::randn(&[dim], &mut rng);
            let (_, logdet) = model.forward(&x).unwrap();
            let h = 1e-5;
            let mut jac = vec![vec![0.0; dim]; dim];
            for j in 0..dim {
                let mut plus = x.clone();
                plus.data_mut()[j] += h;
                let mut minus = x.clone();
                minus.data_mut()[j] -= h;
                let (zp, _) = model.forward(&plus).unwrap();
                let (zm, _) = model.forward(&minus).unwrap();
                for (i, row) in jac.iter_mut().enumerate() {
                    row[j] = (zp.data()[i] - zm.data()[i]) / (2.0 * h);
                }
            }
            let numeric = log_abs_det(&mut jac);
            let rel = (logdet - numeric).abs() / numeric.abs().max(1e-8);
            assert!(
                rel < 1e-4,
                "D={dim}: logdet {logdet} vs finite-difference {numeric} (rel {rel})"
            );
        }
    }
    pass(2, "flow logdet vs finite-difference Jacobian, D in {2,4,8}, 20 inputs each");
}

// -------------------------------------------------------------------------
// 3. Cluster supervision beats the entangled baseline for every proxy
//    classifier by at least 0.05, across 5 seeds.
// -------------------------------------------------------------------------
fn four_cluster_entangled(seed: u64, per_cluster: usize) -> Vec<(Tensor, usize)> {
    let dim = 8;
    let mut rng = Rng::from_seed(seed).split_str("sup-bench");
    let centers = [[1.2, 1.2], [1.2, -1.2], [-1.2, 1.2], [-1.2, -1.2]];
    let mix1 = Tensor::randn(&[dim, dim], &mut rng).scale(0.5);
    let mix2 = Tensor::randn(&[dim, dim], &mut rng).scale(0.5);
    let mut data = Vec::new();
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..per_cluster {
            let mut v = rng.gaussian_vec(dim);
            for x in v.iter_mut() {
                *x *= 0.8;
            }
            v[0] += c[0];
            v[1] += c[1];
            // Rotate-ish mix, squash, mix again: nonlinear entanglement.
            let row = Tensor::from_vec(vec![1, dim], v).unwrap();
            let u = row.matmul(&mix1).unwrap();
            let w = u.map(|t| (0.9 * t).tanh());
            let mixed = w.matmul(&mix2).unwrap();
            data.push((Tensor::vector(mixed.data()), label));
        }
    }
    data
}

#[allow(clippy::type_complexity)]
fn split_train_test(data: &[(Tensor, usize)]) -> (Vec<(Tensor, usize)>, Vec<(Tensor, usize)>) {
    let train = data
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 4 != 0)
        .map(|(_, x)| x.clone())
        .collect();
    let test = data
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 4 == 0)
        .map(|(_, x)| x.clone())
        .collect();
    (train, test)
}

#[test]
fn criterion_03_cluster_supervision_effect() {
    for seed in 0..5u64 {
        let raw = four_cluster_entangled(seed, 40);
        let mut centers = BTreeMap::new();
        for (i, c) in [[3.0, 3.0], [3.0, -3.0], [-3.0, 3.0], [-3.0, -3.0]]
            .iter()
            .enumerate()
        {
            let mut v = vec![0.0; 8];
            v[0] = c[0];
            v[1] = c[1];
            centers.insert(format!("c{i}"), Tensor::vector(&v));
        }
        let examples: Vec<(Tensor, Option<String>)> = raw
            .iter()
            .map(|(v, y)| (v.clone(), Some(format!("c{y}"))))
            .collect();
        let mut model = FlowModel::new(8, 6, 48, seed).unwrap();
        model
            .train(
                &examples,
                &Objective::Supervised { centers, sigma2: 0.6 },
                &FlowTrainConfig {
                    steps: 1500,
                    batch_size: 64,
                    optimizer: AdamWConfig::with_lr(3e-3),
                    seed,
                },
            )
            .unwrap();
        let transformed: Vec<(Tensor, usize)> = raw
            .iter()
            .map(|(v, y)| (Tensor::vector(model.forward(v).unwrap().0.data()), *y))
            .collect();
        let (raw_train, raw_test) = split_train_test(&raw);
        let (flow_train, flow_test) = split_train_test(&transformed);
        for kind in [ClassifierKind::Knn, ClassifierKind::NaiveBayes, ClassifierKind::Linear] {
            let baseline = proxy_classifier(kind, &raw_train, &raw_test).unwrap().accuracy;
            let supervised = proxy_classifier(kind, &flow_train, &flow_test)
                .unwrap()
                .accuracy;
            assert!(
                supervised - baseline >= 0.05,
                "seed {seed} {kind:?}: {baseline} -> {supervised}"
            );
        }
    }
    pass(3, "supervised-flow proxy accuracies beat entangled baseline by >= 0.05, 5 seeds");
}

// -------------------------------------------------------------------------
// 4. VQ gradient routing and the KL constant.
// -------------------------------------------------------------------------
#[test]
fn criterion_04_vq_loss_and_kl_constant() {
    let mut tape = Tape::new();
    let e = tape.param(Tensor::vector(&[1.0, -2.0, 0.5]));
    let z = tape.param(Tensor::vector(&[0.0, 1.0, 0.25]));
    let (codebook_term, commit_term) = vq_loss_on_tape(&mut tape, e, z, 0.25).unwrap();
    let g_cb = tape.backward(codebook_term).unwrap();
    assert!(g_cb.get(e).is_none(), "codebook term must not reach the encoder");
    assert!(g_cb.get(z).is_some());
    let g_commit = tape.backward(commit_term).unwrap();
    assert!(g_commit.get(z).is_none(), "commitment term must not reach the codebook");
    assert!(g_commit.get(e).is_some());

    for &k in &[1usize, 2, 512, 10_000] {
        assert_eq!(kl_uniform(k).unwrap(), (k as f64).ln());
    }
    pass(4, "vq gradient routing blocked both ways; kl_uniform == ln K for K in {1,2,512,10000}");
}

// -------------------------------------------------------------------------
// 5. EMA codebook recovers the mixture means found by Lloyd's k-means.
// -------------------------------------------------------------------------
#[test]
fn criterion_05_ema_codebook_recovery() {
    let start = Instant::now();
    let mut rng = Rng::from_seed(5).split_str("acceptance-5");
    let means = [[0.8, 0.8], [0.8, -0.8], [-0.8, 0.8], [-0.8, -0.8]];
    let mut stream = Vec::new();
    for _ in 0..200 {
        let mut batch = Vec::new();
        for mean in &means {
            for _ in 0..4 {
                batch.push(vec![
                    mean[0] + 0.08 * rng.gaussian(),
                    mean[1] + 0.08 * rng.gaussian(),
                ]);
            }
        }
        stream.push(batch);
    }

    // Data-dependent initialization over the first batch.
    let first: Vec<f64> = stream[0].iter().flatten().copied().collect();
    let first = Tensor::from_vec(vec![stream[0].len(), 2], first).unwrap();
    let mut book = Codebook::init_from_batch(&first, 4, 0.99, 1e-5, &mut rng).unwrap();
    for batch in &stream {
        let flat: Vec<f64> = batch.iter().flatten().copied().collect();
        let e = Tensor::from_vec(vec![batch.len(), 2], flat).unwrap();
        let q = book.quantize_kmeans(&e).unwrap();
        book.ema_update(&e, &q.indices).unwrap();
        book.reseed_dead(&e, &mut rng).unwrap();
    }

    let pooled: Vec<Tensor> = stream
        .iter()
        .flatten()
        .map(|v| Tensor::vector(v))
        .collect();
    let (centroids, _, _) = kmeans(&pooled, 4, 55).unwrap();
    let mut worst = 0.0f64;
    for k in 0..4 {
        let entry = Tensor::vector(book.entry(k));
        let nearest = centroids
            .iter()
            .map(|c| entry.euclidean_distance(c).unwrap())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst < 0.1, "max entry-to-centroid distance {worst}");
    assert!(elapsed < 5.0, "runtime {elapsed:.2}s exceeds 5s");
    pass(5, &format!("EMA entries within {worst:.3} of Lloyd centroids, {elapsed:.2}s"));
}

// -------------------------------------------------------------------------
// 6. Gumbel-max marginals match softmax(logits) by chi-squared test.
// -------------------------------------------------------------------------
#[test]
fn criterion_06_gumbel_marginal_law() {
    // p > 0.01 thresholds for k-1 degrees of freedom.
    let chi2_99 = |dof: usize| match dof {
        1 => 6.635,
        2 => 9.210,
        3 => 11.345,
        4 => 13.277,
        _ => panic!("unexpected dof"),
    };
    let cases: Vec<Vec<f64>> = vec![
        vec![0.7f64.ln(), 0.3f64.ln()],
        vec![0.0, 0.0, 0.0],
        vec![1.0, 0.5, -0.5, -1.0, 0.0],
    ];
    let mut rng = Rng::from_seed(6).split_str("acceptance-6");
    for (i, logits) in cases.iter().enumerate() {
        let k = logits.len();
        let t = Tensor::from_vec(vec![1, k], logits.clone()).unwrap();
        let probs = t.softmax_rows().unwrap();
        let draws = 10_000usize;
        let mut counts = vec![0usize; k];
        for _ in 0..draws {
            counts[quantize_gumbel(&t, 1.0, &mut rng).unwrap()[0]] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(probs.data().iter())
            .map(|(&o, &p)| {
                let e = p * draws as f64;
                (o as f64 - e) * (o as f64 - e) / e
            })
            .sum();
        assert!(
            chi2 < chi2_99(k - 1),
            "case {i}: chi2 {chi2} over threshold {}",
            chi2_99(k - 1)
        );
    }
    pass(6, "3 logit vectors, 10^4 draws each, chi-squared p > 0.01");
}

// -------------------------------------------------------------------------
// 7. Token interpolation endpoints select the nearest codes.
// -------------------------------------------------------------------------
#[test]
fn criterion_07_token_interpolation_endpoints() {
    let mut rng = Rng::from_seed(7).split_str("acceptance-7");
    let mut mismatches = 0;
    for _ in 0..100 {
        let k = 2 + rng.below(14);
        let book = Codebook::new(k, 3, &mut rng).unwrap();
        let prev = Tensor::randn(&[3], &mut rng);
        let target = Tensor::randn(&[3], &mut rng);
        let brute = |point: &Tensor| -> usize {
            let mut best = (0usize, f64::INFINITY);
            for c in 0..k {
                let d = point.euclidean_distance(&Tensor::vector(book.entry(c))).unwrap();
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        };
        if book.token_interpolate(&prev, &target, 0.0).unwrap() != brute(&prev) {
            mismatches += 1;
        }
        if book.token_interpolate(&prev, &target, 1.0).unwrap() != brute(&target) {
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
    pass(7, "t=0 and t=1 select nearest prev/target codes on 100 random cases");
}

// -------------------------------------------------------------------------
// 8. Interpolation smoothness values and wmd metric properties.
// -------------------------------------------------------------------------
#[test]
fn criterion_08_interpolation_smoothness_and_wmd_metric() {
    let s = |v: f64| {
        TokenizedSentence::from_vectors(&[Tensor::vector(&[v])]).unwrap()
    };
    let collinear = vec![s(0.0), s(1.0), s(2.0)];
    let is = interpolation_smoothness(&collinear).unwrap();
    assert!((is - 1.0).abs() < 1e-9, "collinear IS {is}");
    let detour = vec![s(0.0), s(3.0), s(2.0)];
    let is = interpolation_smoothness(&detour).unwrap();
    assert!((is - 0.5).abs() < 1e-9, "detour IS {is}");

    let mut rng = Rng::from_seed(8).split_str("acceptance-8");
    for _ in 0..1000 {
        let mk = |rng: &mut Rng| {
            let n = 1 + rng.below(6);
            TokenizedSentence::from_vectors(
                &(0..n).map(|_| Tensor::randn(&[4], rng)).collect::<Vec<_>>(),
            )
            .unwrap()
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let c = mk(&mut rng);
        let ab = wmd(&a, &b).unwrap();
        let ba = wmd(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-9, "symmetry {ab} vs {ba}");
        let ac = wmd(&a, &c).unwrap();
        let cb = wmd(&c, &b).unwrap();
        assert!(ab <= ac + cb + 1e-9, "triangle {ab} > {ac} + {cb}");
    }
    pass(8, "IS = 1.0 and 0.5 on reference paths; wmd symmetric and triangular on 1000 triples");
}

// -------------------------------------------------------------------------
// 9. Guided traversal moves >= 95 of 100 seeds into the target class.
// -------------------------------------------------------------------------
#[test]
fn criterion_09_guided_traversal() {
    let start = Instant::now();
    let mut rng = Rng::from_seed(9).split_str("acceptance-9");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..100 {
        let mut v = rng.gaussian_vec(8);
        v[0] -= 3.0;
        xs.push(Tensor::vector(&v));
        ys.push(0);
        let mut v = rng.gaussian_vec(8);
        v[0] += 3.0;
        xs.push(Tensor::vector(&v));
        ys.push(1);
    }
    let tree = fit_tree(&xs, &ys, 6, 5).unwrap();
    let path = shortest_cross_path(&tree, 0, 1).unwrap();
    let mut moved = 0;
    for _ in 0..100 {
        let mut v = rng.gaussian_vec(8);
        v[0] -= 3.0;
        let seed_vec = Tensor::vector(&v);
        let edited = apply_path(&tree, &seed_vec, &path).unwrap();
        if tree.predict(&edited).unwrap() == 1 {
            moved += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(moved >= 95, "only {moved}/100 classified as target");
    assert!(elapsed < 5.0, "runtime {elapsed:.2}s exceeds 5s");
    pass(9, &format!("{moved}/100 seeds reached the target class, {elapsed:.2}s"));
}

// -------------------------------------------------------------------------
// 10. Cone closure and complement rejection.
// -------------------------------------------------------------------------
#[test]
fn criterion_10_cone_closure() {
    use latentlab_core::geometry::{cone_membership, default_cone_tolerance, ConeSpec};
    let mut rng = Rng::from_seed(10).split_str("acceptance-10");
    // Basis vectors all have first coordinate in [0.5, 1.5]: any
    // nonnegative combination keeps x0 >= 0.
    let basis: Vec<Tensor> = (0..5)
        .map(|_| {
            let mut v = rng.gaussian_vec(8);
            v[0] = 0.5 + rng.uniform();
            Tensor::vector(&v)
        })
        .collect();
    let cone = ConeSpec::new("role", "content", basis.clone()).unwrap();

    for i in 0..1000 {
        let mut member = Tensor::zeros(&[8]);
        for b in &basis {
            member = member.add(&b.scale(2.0 * rng.uniform())).unwrap();
        }
        let res = cone_membership(&member, &cone, default_cone_tolerance(&member)).unwrap();
        assert!(res.member, "combination {i} rejected, residual {}", res.residual);
    }
    for i in 0..1000 {
        let mut v = rng.gaussian_vec(8);
        v[0] = -0.1 - rng.uniform(); // negative along the complement direction
        let candidate = Tensor::vector(&v);
        let res =
            cone_membership(&candidate, &cone, default_cone_tolerance(&candidate)).unwrap();
        assert!(!res.member, "complement vector {i} accepted");
    }
    pass(10, "1000 nonnegative combinations pass; 1000 complement vectors fail");
}

// -------------------------------------------------------------------------
// 11. Attention injections: zero-latent neutrality, row stochasticity, and
//     the hand-computed memory example.
// -------------------------------------------------------------------------
#[test]
fn criterion_11_attention_neutrality() {
    let mut rng = Rng::from_seed(11).split_str("acceptance-11");
    for _ in 0..100 {
        let seq = 1 + rng.below(8);
        let d = 1 + rng.below(16);
        let q = Tensor::randn(&[seq, d], &mut rng);
        let k = Tensor::randn(&[seq, d], &mut rng);
        let v = Tensor::randn(&[seq, d], &mut rng);
        let z = Tensor::zeros(&[1, d]);
        let base = attend(&q, &k, &v).unwrap();
        for out in [
            kv_add(&q, &k, &v, &z).unwrap(),
            query_add(&q, &k, &v, &z).unwrap(),
        ] {
            for (a, b) in out.data().iter().zip(base.data().iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let q_shift = addition_q(&q, &z).unwrap();
        for (a, b) in q_shift.data().iter().zip(q.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        // kv_mem weight rows sum to 1 over the widened score matrix.
        let zr = Tensor::randn(&[1, d], &mut rng);
        let k_aug = Tensor::vstack(&zr, &k).unwrap();
        let w = attention_weights(&q, &k_aug).unwrap();
        assert_eq!(w.shape(), &[seq, seq + 1]);
        for r in 0..seq {
            let sum: f64 = w.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        let out = kv_mem(&q, &k, &v, &zr).unwrap();
        assert_eq!(out.shape(), &[seq, d]);
    }

    // Hand-computed memory case: output 2.88080 to five decimals.
    let q = Tensor::matrix(1, 1, vec![1.0]).unwrap();
    let k = Tensor::matrix(1, 1, vec![1.0]).unwrap();
    let v = Tensor::matrix(1, 1, vec![2.0]).unwrap();
    let z = Tensor::matrix(1, 1, vec![3.0]).unwrap();
    let out = kv_mem(&q, &k, &v, &z).unwrap().data()[0];
    assert!((out - 2.88080).abs() < 5e-6, "kv_mem hand case {out}");
    pass(11, "zero-latent neutrality, row stochasticity, kv_mem hand value 2.88080");
}

// -------------------------------------------------------------------------
// 12. Gradient-kernel rule separation responds to the classifier weight.
// -------------------------------------------------------------------------
#[test]
fn criterion_12_ntk_separation() {
    let start = Instant::now();
    let mut min_diff = f64::INFINITY;
    for seed in 0..5u64 {
        let high = two_rule_gap(1.0, seed, 0).unwrap();
        let low = two_rule_gap(0.01, seed, 0).unwrap();
        assert!(
            high > low,
            "seed {seed}: gap(1.0)={high:.3} not above gap(0.01)={low:.3}"
        );
        min_diff = min_diff.min(high - low);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(min_diff > 0.1, "min gap difference {min_diff:.3} <= 0.1");
    assert!(elapsed < 60.0, "runtime {elapsed:.2}s exceeds 60s");
    pass(
        12,
        &format!("gap(1.0) > gap(0.01) in 5/5 seeds, min diff {min_diff:.3}, {elapsed:.1}s"),
    );
}

// -------------------------------------------------------------------------
// 13. Free-bits floor and the cyclical beta schedule, exhaustively.
// -------------------------------------------------------------------------
#[test]
fn criterion_13_free_bits_and_schedule() {
    let lambda = 0.5;
    let mut rng = Rng::from_seed(13).split_str("acceptance-13");
    for _ in 0..200 {
        let d = 1 + rng.below(8);
        let kl = Tensor::vector(
            &(0..d).map(|_| rng.uniform() * 2.0).collect::<Vec<_>>(),
        );
        let fb = free_bits(&kl, lambda).unwrap();
        assert!(fb >= d as f64 * lambda - 1e-15, "floor violated: {fb} < D lambda");
        let manual: f64 = kl.data().iter().map(|&k| k.max(lambda)).sum();
        assert_eq!(fb, manual);
    }

    let schedule = Schedule::new(120, 3, lambda).unwrap();
    let cycle = schedule.cycle_len();
    for step in 0..schedule.total_steps {
        let beta = schedule.beta_at(step).unwrap();
        let pos = step % cycle;
        if pos == 0 {
            assert_eq!(beta, 0.0, "beta at cycle start (step {step})");
        }
        if pos * 2 >= cycle {
            assert_eq!(beta, 1.0, "beta past half cycle (step {step})");
        }
        if step + cycle < schedule.total_steps {
            assert_eq!(beta, schedule.beta_at(step + cycle).unwrap(), "periodicity");
        }
    }
    pass(13, "free-bits floor D*lambda exact; beta 0 at cycle start, 1 past half, periodic");
}

// -------------------------------------------------------------------------
// 14. Hand-encoded AMR triples classify to their reference labels, and
//     alpha-renaming never changes a decision.
// -------------------------------------------------------------------------
pub fn reference_triples() -> Vec<(&'static str, Triple, InferenceType)> {
    let t = |p1_text: &str, p1: &str, p2_text: &str, p2: &str, c_text: &str, c: &str| Triple {
        p1_text: p1_text.into(),
        p2_text: p2_text.into(),
        c_text: c_text.into(),
        p1: parse_penman(p1).unwrap(),
        p2: parse_penman(p2).unwrap(),
        c: parse_penman(c).unwrap(),
    };
    vec![
        (
            "prem-copy",
            t(
                "a scar is permanent",
                "(p / permanent :domain (s / scar))",
                "something else entirely",
                "(e / else :mod (s / something))",
                "a scar is permanent",
                "(p / permanent :domain (s / scar))",
            ),
            InferenceType::PremCopy,
        ),
        (
            "arg-sub",
            t(
                "a scar on the knee is a kind of scar",
                "(b / be-02 :ARG1 (s / scar :location (k / knee)) :ARG2 (s2 / scar))",
                "a scar is an acquired characteristic",
                "(c / characteristic :mod (aq / acquired) :domain (s / scar))",
                "a scar on the knee is an acquired characteristic",
                "(b / be-02 :ARG1 (s / scar :location (k / knee)) :ARG2 (c / characteristic :ARG1-of (a / acquire-01)))",
            ),
            InferenceType::ArgSub,
        ),
        (
            "pred-sub",
            t(
                "food contains nutrients and energy for living things",
                "(c / contain-01 :ARG0 (f / food) :ARG1 (n / nutrient))",
                "to contain something can mean to store something",
                "(m / mean-01 :ARG1 (c / contain-01) :ARG2 (s / store-01))",
                "food stores nutrients and energy for living things",
                "(s / store-01 :ARG0 (f / food) :ARG1 (n / nutrient))",
            ),
            InferenceType::PredSub,
        ),
        (
            "frame-conj",
            t(
                "photosynthesis stores energy",
                "(s / store-01 :ARG0 (p / photosynthesis) :ARG1 (e / energy))",
                "respiration releases energy",
                "(r / release-01 :ARG0 (q / respiration) :ARG1 (e / energy))",
                "photosynthesis stores energy and respiration releases energy",
                "(a / and :op1 (s / store-01 :ARG0 (p / photosynthesis) :ARG1 (e / energy)) :op2 (r / release-01 :ARG0 (q / respiration) :ARG1 (e2 / energy)))",
            ),
            InferenceType::FrameConj,
        ),
        (
            "cond-frame",
            t(
                "if something is renewable then that something is not a fossil",
                "(i / is-a :ARG1 (s / something) :ARG2 (f / fossil :polarity -) :condition (r / renew-01 :ARG1 (s2 / something)))",
                "fuel wood is a renewable resource",
                "(i / is-a :ARG1 (w / wood :mod (fu / fuel)) :ARG2 (r / resource :mod (rn / renew-01)))",
                "wood is not a fossil fuel",
                "(i / is-a :ARG1 (w / wood) :ARG2 (f / fossil :polarity -))",
            ),
            InferenceType::CondFrame,
        ),
        (
            "arg-sub-prop",
            t(
                "blacktop is made of asphalt concrete",
                "(m / make-01 :ARG1 (b / blacktop) :ARG2 (c / concrete :mod (a / asphalt)))",
                "asphalt has a smooth surface",
                "(h / have-03 :ARG0 (a / asphalt) :ARG1 (s / surface :mod (sm / smooth)))",
                "a blacktop has a smooth surface",
                "(h / have-03 :ARG0 (b / blacktop) :ARG1 (s / surface :mod (sm / smooth)))",
            ),
            InferenceType::ArgSubProp,
        ),
        (
            "arg-pred-gen",
            t(
                "rock is a hard material",
                "(m / material :mod (h / hard) :domain (r / rock))",
                "granite is a hard material",
                "(m / material :mod (h / hard) :domain (g / granite))",
                "granite is a kind of rock",
                "(r / rock :domain (g / granite))",
            ),
            InferenceType::ArgPredGen,
        ),
        (
            "ift",
            t(
                "an optical telescope requires visible light for human to use",
                "(r / require-01 :ARG0 (t / telescope :mod (o / optical)) :ARG1 (l / light :mod (v / visible)))",
                "clouds block visible light",
                "(b / block-01 :ARG0 (c / cloud) :ARG1 (l / light :mod (v / visible)))",
                "if there is clouds or dusts then the optical telescope cannot be used",
                "(u / use-01 :polarity - :ARG1 (t / telescope :mod (o / optical)) :condition (p / present :domain (c / cloud)))",
            ),
            InferenceType::Ift,
        ),
        (
            "example",
            t(
                "a shelter can be used for living in by raccoons",
                "(u / use-01 :ARG1 (s / shelter) :ARG2 (l / live-01 :ARG0 (r / raccoon)))",
                "some raccoons live in hollow logs",
                "(l / live-01 :ARG0 (r / raccoon) :location (lg / log :mod (h / hollow)))",
                "an example of a shelter is a raccoon living in a hollow log",
                "(e / exemplify-01 :ARG0 (s / shelter) :ARG1 (l / live-01 :domain (r / raccoon) :location (lg / log :mod (h / hollow))))",
            ),
            InferenceType::Example,
        ),
    ]
}

#[test]
fn criterion_14_amr_annotation() {
    let start = Instant::now();
    for (name, triple, expected) in reference_triples() {
        let got = classify(&triple).unwrap();
        assert_eq!(got, expected, "{name}: expected {expected}, got {got}");

        // Alpha-rename every variable and classify again.
        let rename = |g: &latentlab_amr::AmrGraph| {
            let map: BTreeMap<String, String> = g
                .nodes
                .keys()
                .enumerate()
                .map(|(i, v)| (v.clone(), format!("x{i}")))
                .collect();
            g.rename_vars(&map)
        };
        let renamed = Triple {
            p1_text: triple.p1_text.clone(),
            p2_text: triple.p2_text.clone(),
            c_text: triple.c_text.clone(),
            p1: rename(&triple.p1),
            p2: rename(&triple.p2),
            c: rename(&triple.c),
        };
        let got2 = classify(&renamed).unwrap();
        assert_eq!(got2, expected, "{name}: alpha-renaming changed the label");
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 2.0, "runtime {elapsed:.2}s exceeds 2s");
    pass(14, &format!("9 reference triples + alpha-renamed variants, {elapsed:.2}s"));
}

// -------------------------------------------------------------------------
// 15. Every CLI command, run twice with the same seed, produces
//     byte-identical outputs (the resolved config echoes the output path
//     and is compared with that field masked).
// -------------------------------------------------------------------------
fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_latentlab")
}

fn run(args: &[&str]) {
    let output = Command::new(bin()).args(args).output().expect("spawn latentlab");
    assert!(
        output.status.success(),
        "latentlab {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn dir_fingerprint(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().to_string_lossy().to_string();
        let mut bytes = std::fs::read(entry.path()).unwrap();
        if name == "config.resolved.json" {
            // The resolved config faithfully records the output path, which
            // necessarily differs between the two runs; mask it.
            let text = String::from_utf8_lossy(&bytes).to_string();
            let masked: Vec<String> = text
                .lines()
                .filter(|l| !l.trim_start().starts_with("\"out\""))
                .map(str::to_string)
                .collect();
            bytes = masked.join("\n").into_bytes();
        }
        out.insert(name, bytes);
    }
    out
}

fn write_fixture_records(path: &Path) {
    let mut rng = Rng::from_seed(77).split_str("fixture");
    let mut lines = Vec::new();
    for i in 0..48 {
        let cluster = i % 3;
        let center = [2.0 * cluster as f64 - 2.0, 1.5 - cluster as f64];
        let v: Vec<f64> = (0..4)
            .map(|j| {
                let base = if j < 2 { center[j] } else { 0.0 };
                base + 0.3 * rng.gaussian()
            })
            .collect();
        let tokens: Vec<String> = (0..3)
            .map(|t| {
                let tv: Vec<f64> = (0..3).map(|_| rng.gaussian()).collect();
                format!(
                    "{{\"text\": \"w{t}\", \"vector\": [{}, {}, {}]}}",
                    tv[0], tv[1], tv[2]
                )
            })
            .collect();
        lines.push(format!(
            "{{\"id\": \"r{i:03}\", \"vector\": [{}, {}, {}, {}], \"labels\": {{\"cluster\": \"c{cluster}\", \"path\": \"p{}\", \"step\": \"{}\"}}, \"tokens\": [{}]}}",
            v[0], v[1], v[2], v[3],
            i / 16,
            i % 16,
            tokens.join(", ")
        ));
    }
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn write_fixture_triples(path: &Path) {
    let mut lines = Vec::new();
    for (name, triple, _) in reference_triples() {
        let json = serde_json::json!({
            "id": name,
            "p1": triple.p1_text,
            "p2": triple.p2_text,
            "c": triple.c_text,
            "p1_amr": penman_of(&triple.p1),
            "p2_amr": penman_of(&triple.p2),
            "c_amr": penman_of(&triple.c),
        });
        lines.push(json.to_string());
    }
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

/// Re-serializes a parsed graph back to Penman (document edge order, nested
/// at the first mention).
fn penman_of(g: &latentlab_amr::AmrGraph) -> String {
    fn emit(
        g: &latentlab_amr::AmrGraph,
        var: &str,
        emitted: &mut Vec<String>,
        out: &mut String,
    ) {
        out.push('(');
        out.push_str(var);
        out.push_str(" / ");
        out.push_str(g.concept(var).unwrap_or("thing"));
        emitted.push(var.to_string());
        for edge in &g.edges {
            if edge.source != var {
                continue;
            }
            out.push(' ');
            out.push_str(&edge.role);
            out.push(' ');
            match &edge.target {
                latentlab_amr::AmrTarget::Var(t) => {
                    if emitted.contains(t) {
                        out.push_str(t);
                    } else {
                        emit(g, t, emitted, out);
                    }
                }
                latentlab_amr::AmrTarget::Const(c) => {
                    if c.parse::<f64>().is_ok() || c == "-" || c == "+" {
                        out.push_str(c);
                    } else {
                        out.push('"');
                        out.push_str(c);
                        out.push('"');
                    }
                }
            }
        }
        out.push(')');
    }
    let mut out = String::new();
    emit(g, &g.root, &mut Vec::new(), &mut out);
    out
}

#[test]
fn criterion_15_cli_determinism() {
    let base = std::env::temp_dir().join(format!("latentlab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&base).unwrap();
    let records = base.join("records.jsonl");
    write_fixture_records(&records);
    let triples = base.join("triples.jsonl");
    write_fixture_triples(&triples);
    let records_s = records.to_str().unwrap().to_string();
    let triples_s = triples.to_str().unwrap().to_string();

    // Codebook fixture for token interpolation.
    let ckpt_dir = base.join("fixture-q");
    run(&[
        "quantize", "--input", &records_s, "--out", ckpt_dir.to_str().unwrap(),
        "--seed", "3", "--k", "6", "--epochs", "5",
    ]);
    let codebook = ckpt_dir.join("codebook.ckpt");
    let codebook_s = codebook.to_str().unwrap().to_string();

    let commands: Vec<(&str, Vec<String>)> = vec![
        ("train-flow", vec![
            "train-flow".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "4".into(), "--mode".into(), "sup".into(),
            "--label-key".into(), "cluster".into(), "--blocks".into(), "2".into(),
            "--hidden".into(), "8".into(), "--steps".into(), "8".into(),
            "--batch".into(), "8".into(),
        ]),
        ("train-vae", vec![
            "train-vae".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "5".into(), "--latent-dim".into(), "3".into(),
            "--hidden".into(), "8".into(), "--steps".into(), "8".into(),
            "--cycles".into(), "2".into(),
        ]),
        ("quantize", vec![
            "quantize".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "6".into(), "--k".into(), "5".into(),
            "--epochs".into(), "4".into(),
        ]),
        ("traverse-dim", vec![
            "traverse".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "7".into(), "--mode".into(), "dim".into(),
            "--id".into(), "r000".into(), "--dim".into(), "1".into(),
        ]),
        ("traverse-ou", vec![
            "traverse".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "8".into(), "--mode".into(), "ou".into(),
            "--id".into(), "r001".into(), "--gamma".into(), "0.5".into(),
            "--sigma".into(), "0.1".into(), "--steps".into(), "6".into(),
        ]),
        ("traverse-guided", vec![
            "traverse".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "9".into(), "--mode".into(), "guided".into(),
            "--label-key".into(), "cluster".into(), "--from".into(), "c0".into(),
            "--to".into(), "c1".into(), "--min-leaf".into(), "2".into(),
        ]),
        ("interpolate-latent", vec![
            "interpolate".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "10".into(), "--from-id".into(), "r000".into(),
            "--to-id".into(), "r001".into(),
        ]),
        ("interpolate-token", vec![
            "interpolate".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "11".into(), "--mode".into(), "token".into(),
            "--from-id".into(), "r000".into(), "--to-id".into(), "r003".into(),
            "--codebook".into(), codebook_s.clone(),
        ]),
        ("arith", vec![
            "arith".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "12".into(), "--op".into(), "average".into(),
            "--a".into(), "r000".into(), "--b".into(), "r003".into(),
        ]),
        ("cone-check", vec![
            "cone-check".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "13".into(), "--label-key".into(), "cluster".into(),
            "--label-value".into(), "c0".into(),
        ]),
        ("augment", vec![
            "augment".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "14".into(), "--label-key".into(), "cluster".into(),
            "--label-value".into(), "c1".into(), "--budget".into(), "4".into(),
        ]),
        ("metrics-is", vec![
            "metrics".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "15".into(), "--kind".into(), "is".into(),
            "--jobs".into(), "2".into(),
        ]),
        ("metrics-proxy", vec![
            "metrics".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "16".into(), "--kind".into(), "proxy".into(),
            "--label-key".into(), "cluster".into(),
        ]),
        ("metrics-mse", vec![
            "metrics".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "17".into(), "--kind".into(), "mse".into(),
            "--k".into(), "3".into(),
        ]),
        ("metrics-pca", vec![
            "metrics".into(), "--input".into(), records_s.clone(),
            "--seed".into(), "18".into(), "--kind".into(), "pca".into(),
            "--dims".into(), "2".into(), "--label-key".into(), "cluster".into(),
        ]),
        ("ntk", vec![
            "ntk".into(), "--seed".into(), "19".into(),
            "--cls-weight".into(), "1".into(),
        ]),
        ("annotate-amr", vec![
            "annotate-amr".into(), "--input".into(), triples_s.clone(),
            "--jobs".into(), "3".into(),
        ]),
    ];

    for (name, args) in &commands {
        let out_a = base.join(format!("{name}-a"));
        let out_b = base.join(format!("{name}-b"));
        for out in [&out_a, &out_b] {
            let mut full: Vec<String> = args.clone();
            full.push("--out".into());
            full.push(out.to_str().unwrap().into());
            let refs: Vec<&str> = full.iter().map(String::as_str).collect();
            run(&refs);
        }
        let fa = dir_fingerprint(&out_a);
        let fb = dir_fingerprint(&out_b);
        assert_eq!(
            fa.keys().collect::<Vec<_>>(),
            fb.keys().collect::<Vec<_>>(),
            "{name}: file sets differ"
        );
        for (file, bytes) in &fa {
            assert_eq!(
                Some(bytes),
                fb.get(file),
                "{name}: {file} differs between identically-seeded runs"
            );
        }
    }
    // The annotate run also certifies the reference labels end to end.
    let ann = std::fs::read_to_string(base.join("annotate-amr-a/annotations.csv")).unwrap();
    for (name, _, expected) in reference_triples() {
        assert!(
            ann.contains(&format!("{name},{expected}")),
            "annotations.csv lacks {name},{expected}\n{ann}"
        );
    }
    let _ = std::fs::remove_dir_all(&base);
    pass(15, "17 command invocations, each byte-identical across two same-seed runs");
}
