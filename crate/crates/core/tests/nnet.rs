use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use structlearn::graph::{normalize_adjacency, BipartiteGraph, WeightedGraph};
use structlearn::nnet::*;

fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> WeightedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j, rng.random_range(0.2..1.5)));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1, 1.0));
    }
    WeightedGraph::new(n, edges).unwrap()
}

fn random_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
}

#[test]
fn gcn_gradients_match_central_differences() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 6 + seed as usize;
        let a = normalize_adjacency(&random_graph(n, 0.4, &mut rng));
        let x = random_matrix(n, 4, &mut rng);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let train = vec![0, 2, 3];
        let p = GcnParams::<f64>::glorot(4, 5, 3, &mut rng);
        let masks = sample_dropout_masks::<f64>(n, 4, 5, 0.3, &mut rng);
        for m in [None, Some(&masks)] {
            let (_, g) = gcn_loss_grad(&p, &a, x.view(), &labels, &train, 5e-2, m).unwrap();
            let loss = |q: &GcnParams<f64>| {
                gcn_loss_grad(q, &a, x.view(), &labels, &train, 5e-2, m)
                    .unwrap()
                    .0
            };
            let err = finite_diff_check(loss, &p, &g, 1e-5);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }
}

#[test]
fn vgae_gradients_match_central_differences() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = 5 + seed as usize;
        let g = random_graph(n, 0.5, &mut rng);
        let a = normalize_adjacency(&g);
        let x = random_matrix(n, 3, &mut rng);
        let target = ReconTarget::with_self_loops(&g).unwrap();
        let p = VgaeParams::<f64>::glorot(3, 4, 2, &mut rng);
        let (_, grads) = vgae_loss_grad(&p, &a, x.view(), &target, 7).unwrap();
        let loss = |q: &VgaeParams<f64>| vgae_loss_grad(q, &a, x.view(), &target, 7).unwrap().0;
        let err = finite_diff_check(loss, &p, &grads, 1e-5);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

fn random_bipartite(nu: usize, ni: usize, rng: &mut ChaCha8Rng) -> BipartiteGraph {
    let mut inter = Vec::new();
    for u in 0..nu {
        for i in 0..ni {
            if rng.random::<f64>() < 0.4 {
                inter.push((u, i, 1.0));
            }
        }
    }
    BipartiteGraph::new(nu, ni, inter).unwrap()
}

#[test]
fn bpr_gradients_match_central_differences() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let (nu, ni, d) = (4, 5, 3);
        let g = random_bipartite(nu, ni, &mut rng);
        let prop = PropagationGraph::new(&g);
        let p = BprParams::<f64> {
            e_users: random_matrix(nu, d, &mut rng),
            e_items: random_matrix(ni, d, &mut rng),
            lambda: 0.05,
        };
        let triples: Vec<(usize, usize, usize)> = (0..6)
            .map(|_| {
                (
                    rng.random_range(0..nu),
                    rng.random_range(0..ni),
                    rng.random_range(0..ni),
                )
            })
            .collect();
        for graph in [None, Some(&prop)] {
            let (_, grads) = bpr_loss_grad(&p, graph, &triples, 3.0).unwrap();
            let loss = |q: &BprParams<f64>| bpr_loss_grad(q, graph, &triples, 3.0).unwrap().0;
            let err = finite_diff_check(loss, &p, &grads, 1e-5);
            assert!(err < 1e-4, "seed {seed} graph {}: {err}", graph.is_some());
        }
    }
}

#[test]
fn gcn_forward_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = random_graph(7, 0.4, &mut rng);
    let a = normalize_adjacency(&g);
    let x = random_matrix(7, 3, &mut rng);
    let p = GcnParams::<f64>::glorot(3, 4, 3, &mut rng);
    let probs = gcn_forward(&p, &a, x.view(), None).unwrap();

    let mut dense = Array2::<f64>::eye(7);
    for &(i, j, w) in g.edges() {
        dense[[i, j]] = w;
        dense[[j, i]] = w;
    }
    let deg = dense.sum_axis(Axis(1));
    let ahat = Array2::from_shape_fn((7, 7), |(i, j)| dense[[i, j]] / (deg[i] * deg[j]).sqrt());
    let h = ahat.dot(&x).dot(&p.w0).mapv(|v| v.max(0.0));
    let logits = ahat.dot(&h).dot(&p.w1);
    for (r, row) in logits.rows().into_iter().enumerate() {
        let z: f64 = row.iter().map(|v| v.exp()).sum();
        for c in 0..3 {
            assert!((probs[[r, c]] - row[c].exp() / z).abs() < 1e-12);
        }
        assert!((probs.row(r).sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn bpr_forward_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let g = random_bipartite(5, 6, &mut rng);
    let p = BprParams::<f64> {
        e_users: random_matrix(5, 4, &mut rng),
        e_items: random_matrix(6, 4, &mut rng),
        lambda: 0.0,
    };
    let (eu, ei) = bpr_embed_forward(&p, &g).unwrap();
    let mut r = Array2::<f64>::zeros((5, 6));
    for &(u, i, _) in g.interactions() {
        r[[u, i]] = 1.0;
    }
    let du = r.sum_axis(Axis(1));
    let di = r.sum_axis(Axis(0));
    let abar = Array2::from_shape_fn((5, 6), |(u, i)| {
        if r[[u, i]] > 0.0 {
            1.0 / (du[u] * di[i]).sqrt()
        } else {
            0.0
        }
    });
    let norm = |m: Array2<f64>| {
        let mut m = m;
        for mut row in m.rows_mut() {
            let n = row.dot(&row).sqrt();
            row.mapv_inplace(|v| v / n);
        }
        m
    };
    let ou = norm(&p.e_users + &abar.dot(&p.e_items));
    let oi = norm(&p.e_items + &abar.t().dot(&p.e_users));
    assert!((&eu - &ou).iter().all(|v| v.abs() <= 1e-10));
    assert!((&ei - &oi).iter().all(|v| v.abs() <= 1e-10));
}

#[test]
fn vgae_triangle_matches_dense_oracle() {
    let g = WeightedGraph::from_pairs(3, [(0, 1), (1, 2)]).unwrap();
    let a = normalize_adjacency(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_matrix(3, 2, &mut rng);
    let p = VgaeParams::<f64>::glorot(2, 2, 2, &mut rng);
    let target = ReconTarget::with_self_loops(&g).unwrap();
    let (loss, _) = vgae_loss_grad(&p, &a, x.view(), &target, 11).unwrap();
    let s = vgae_encode(&p, &a, x.view(), Some(11)).unwrap();

    // Dense recomputation from the sampled embedding.
    let n = 3.0f64;
    let (pw, norm) = ((9.0 - 4.0) / 4.0, 9.0 / (2.0 * (9.0 - 4.0)));
    let logits = s.z.dot(&s.z.t());
    let mut bce = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let t = i == j || g.weight(i, j) > 0.0;
            let sig = 1.0 / (1.0 + (-logits[[i, j]]).exp());
            bce += if t { -pw * sig.ln() } else { -(1.0 - sig).ln() };
        }
    }
    let recon = norm * bce / (n * n);
    let kl: f64 =
        s.mu.iter()
            .zip(&s.logvar)
            .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
            .sum::<f64>()
            * (-0.5 / (n * n));
    assert!(
        (loss - (recon + kl)).abs() < 1e-10,
        "{loss} vs {}",
        recon + kl
    );
}

#[test]
fn mc_dropout_long_run_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let g = random_graph(4, 0.6, &mut rng);
    let a = normalize_adjacency(&g);
    let x = random_matrix(4, 3, &mut rng);
    let p = GcnParams::<f64>::glorot(3, 4, 2, &mut rng);
    let short = mc_dropout_predict(&p, &a, x.view(), 1000, 0.5, 1).unwrap();
    let long = mc_dropout_predict(&p, &a, x.view(), 100_000, 0.5, 2).unwrap();
    // Standard error of the short estimate from its own samples.
    let mut srng = ChaCha8Rng::seed_from_u64(1);
    let mut sq = Array2::<f64>::zeros((4, 2));
    for _ in 0..1000 {
        let m = sample_dropout_masks::<f64>(4, 3, 4, 0.5, &mut srng);
        let pr = gcn_forward(&p, &a, x.view(), Some(&m)).unwrap();
        sq += &(&pr * &pr);
    }
    for ((&s, &l), &q) in short.iter().zip(&long).zip(&sq) {
        let var = (q / 1000.0 - s * s).max(0.0);
        let se = (var / 1000.0).sqrt().max(1e-12);
        assert!(
            (s - l).abs() <= 3.0 * se + 1e-9,
            "short {s} long {l} se {se}"
        );
    }
}

#[test]
fn mc_dropout_rate_zero_samples_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = normalize_adjacency(&random_graph(5, 0.5, &mut rng));
    let x = random_matrix(5, 3, &mut rng);
    let p = GcnParams::<f64>::glorot(3, 4, 2, &mut rng);
    let det = gcn_forward(&p, &a, x.view(), None).unwrap();
    let avg = mc_dropout_predict(&p, &a, x.view(), 7, 0.0, 5).unwrap();
    assert!((&avg - &det).iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn gcn_loss_grad_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = normalize_adjacency(&random_graph(6, 0.5, &mut rng));
    let x = random_matrix(6, 3, &mut rng);
    let p = GcnParams::<f64>::glorot(3, 4, 2, &mut rng);
    let labels = vec![0, 1, 0, 1, 0, 1];
    let r1 = gcn_loss_grad(&p, &a, x.view(), &labels, &[0, 1], 0.0, None).unwrap();
    let r2 = gcn_loss_grad(&p, &a, x.view(), &labels, &[0, 1], 0.0, None).unwrap();
    assert_eq!(r1.0.to_bits(), r2.0.to_bits());
    assert_eq!(r1.1, r2.1);
}

#[test]
fn gcn_perfect_prediction_has_near_zero_loss() {
    let a = normalize_adjacency(&WeightedGraph::empty(2));
    let p = GcnParams::<f64> {
        w0: Array2::eye(2),
        w1: Array2::eye(2) * 60.0,
    };
    let x = Array2::<f64>::eye(2);
    let (loss, _) = gcn_loss_grad(&p, &a, x.view(), &[0, 1], &[0, 1], 0.0, None).unwrap();
    assert!(loss >= 0.0 && loss < 1e-20);
}

#[test]
fn bpr_saturated_gap_leaves_prior_term() {
    let p = BprParams::<f64> {
        e_users: Array2::from_elem((1, 1), 1.0),
        e_items: Array2::from_shape_vec((2, 1), vec![1e3, -1e3]).unwrap(),
        lambda: 0.1,
    };
    let (loss, _) = bpr_loss_grad(&p, None, &[(0, 0, 1)], 1.0).unwrap();
    let prior = 0.5 * 0.1 * (1.0 + 2e6);
    assert!((loss - prior).abs() < 1e-9);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gcn.bin");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = GcnParams::<f32>::glorot(5, 3, 2, &mut rng);
    let manifest = save_checkpoint(&p, &path).unwrap();
    assert_eq!(manifest.tensors[1].offset, 15);
    let mut q = GcnParams::<f32>::glorot(5, 3, 2, &mut rng);
    load_checkpoint(&mut q, &path).unwrap();
    assert_eq!(p, q);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 4 * 21);
    assert_eq!(
        f32::from_le_bytes(bytes[0..4].try_into().unwrap()),
        p.w0[[0, 0]]
    );
}
