//! Test-only oracles. Nothing here calls into the implementation paths it is
//! used to check.
#![allow(dead_code)]

use std::cell::Cell;
use std::path::Path;

use iot_anomaly::config::{ModelKind, RunConfig};
use iot_anomaly::ensemble::{Ensemble, Fallback};
use iot_anomaly::model::{Classifier, ModelError};
use iot_anomaly::nn::{Layer, LayerSpec, Mode, Sequential, Tensor};
use iot_anomaly::preprocess::FeatureMatrix;
use iot_anomaly::shallow::{knn_predict, KnnModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRAD_TOL: f64 = 1e-4;

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

fn fd_step(theta: f64) -> f64 {
    1e-5 * theta.abs().max(1.0)
}

/// Scalar objective `sum(out * proj)` of a network output.
fn objective(net: &mut Sequential<f64>, x: &Tensor<f64>, proj: &[f64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = net.forward(x, Mode::Train, &mut rng).unwrap();
    out.data().iter().zip(proj).map(|(a, b)| a * b).sum()
}

/// Largest relative error between analytic gradients (all parameters and the
/// input) and central finite differences, for the objective `sum(out * proj)`.
pub fn network_grad_error(net: &mut Sequential<f64>, x: &Tensor<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let mut r = ChaCha8Rng::seed_from_u64(0);
    let out = net.forward(x, Mode::Train, &mut r).unwrap();
    let proj: Vec<f64> = (0..out.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let proj_t = Tensor::from_vec(out.shape(), proj.clone()).unwrap();
    let tape = net.backward(&proj_t).unwrap();

    let mut worst = 0.0f64;
    let n_params = net.params().len();
    for p in 0..n_params {
        let len = net.params()[p].len();
        for i in 0..len {
            let theta = net.params()[p].data()[i];
            let h = fd_step(theta);
            net.params_mut()[p].data_mut()[i] = theta + h;
            let up = objective(net, x, &proj);
            net.params_mut()[p].data_mut()[i] = theta - h;
            let down = objective(net, x, &proj);
            net.params_mut()[p].data_mut()[i] = theta;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(tape.params[p].data()[i], numeric));
        }
    }
    let mut xs = x.clone();
    for i in 0..x.len() {
        let v = x.data()[i];
        let h = fd_step(v);
        xs.data_mut()[i] = v + h;
        let up = objective(net, &xs, &proj);
        xs.data_mut()[i] = v - h;
        let down = objective(net, &xs, &proj);
        xs.data_mut()[i] = v;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max(rel_err(tape.input.data()[i], numeric));
    }
    worst
}

/// Largest relative error of a loss gradient against central differences.
pub fn loss_grad_error(
    pred: &Tensor<f64>,
    loss: impl Fn(&Tensor<f64>) -> (f64, Tensor<f64>),
) -> f64 {
    let (_, grad) = loss(pred);
    let mut worst = 0.0f64;
    let mut p = pred.clone();
    for i in 0..pred.len() {
        let v = pred.data()[i];
        let h = fd_step(v);
        p.data_mut()[i] = v + h;
        let up = loss(&p).0;
        p.data_mut()[i] = v - h;
        let down = loss(&p).0;
        p.data_mut()[i] = v;
        worst = worst.max(rel_err(grad.data()[i], (up - down) / (2.0 * h)));
    }
    worst
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Distinct values spaced at least 1e-2 apart so max-pool argmaxes are
/// stable under finite-difference perturbation.
pub fn spaced_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    use rand::seq::SliceRandom;
    let n: usize = shape.iter().product();
    let mut vals: Vec<f64> = (0..n).map(|i| i as f64 * 0.05 - n as f64 * 0.025).collect();
    vals.shuffle(rng);
    Tensor::from_vec(shape, vals).unwrap()
}

/// One small random configuration per layer family, as a network plus input.
pub fn gradient_case(kind: &str, rng: &mut ChaCha8Rng) -> (Sequential<f64>, Tensor<f64>) {
    let n = rng.gen_range(1..4);
    match kind {
        "dense" => {
            let (d, u) = (rng.gen_range(1..6), rng.gen_range(1..6));
            let net = Sequential::init(&[LayerSpec::Dense { inputs: d, units: u }], rng);
            (net, random_tensor(&[n, d], rng))
        }
        "conv1d" => {
            let cin = rng.gen_range(1..4);
            let k = rng.gen_range(1..4);
            let len = rng.gen_range(k..k + 5);
            let filters = rng.gen_range(1..4);
            let net = Sequential::init(
                &[LayerSpec::Conv1d {
                    in_channels: cin,
                    filters,
                    kernel: k,
                }],
                rng,
            );
            (net, random_tensor(&[n, len, cin], rng))
        }
        "maxpool" => {
            let w = rng.gen_range(1..4);
            let len = rng.gen_range(w..w + 6);
            let c = rng.gen_range(1..4);
            let net = Sequential::init(&[LayerSpec::MaxPool1d { window: w }], rng);
            (net, spaced_tensor(&[n, len, c], rng))
        }
        "lstm" => {
            let d = rng.gen_range(1..4);
            let u = rng.gen_range(1..4);
            let t = rng.gen_range(1..5);
            let mut net: Sequential<f64> = Sequential::init(&[LayerSpec::Lstm { inputs: d, units: u }], rng);
            // Random biases so every gate is exercised away from its init.
            for b in net.params_mut()[1].data_mut() {
                *b = rng.gen_range(-1.0..1.0);
            }
            (net, random_tensor(&[n, t, d], rng))
        }
        "dropout0" => {
            let d = rng.gen_range(1..6);
            let net = Sequential::init(
                &[
                    LayerSpec::Dense { inputs: d, units: 3 },
                    LayerSpec::Dropout { rate: 0.0 },
                    LayerSpec::Dense { inputs: 3, units: 2 },
                ],
                rng,
            );
            (net, random_tensor(&[n, d], rng))
        }
        "activations" => {
            let d = rng.gen_range(1..5);
            let net = Sequential::init(
                &[
                    LayerSpec::Dense { inputs: d, units: 4 },
                    LayerSpec::Tanh,
                    LayerSpec::Dense { inputs: 4, units: 4 },
                    LayerSpec::Sigmoid,
                    LayerSpec::Dense { inputs: 4, units: 2 },
                ],
                rng,
            );
            (net, random_tensor(&[n, d], rng))
        }
        "cnn_lstm_stack" => {
            let len = rng.gen_range(6..10);
            let net = Sequential::init(
                &[
                    LayerSpec::Conv1d {
                        in_channels: 1,
                        filters: 3,
                        kernel: 3,
                    },
                    LayerSpec::Tanh,
                    LayerSpec::MaxPool1d { window: 2 },
                    LayerSpec::Lstm { inputs: 3, units: 2 },
                    LayerSpec::Dense { inputs: 2, units: 5 },
                ],
                rng,
            );
            (net, random_tensor(&[n, len, 1], rng))
        }
        other => panic!("unknown gradient case {other}"),
    }
}

/// Nested-loop valid convolution: `x[n][l][c_in]`, `w[k][c_in][c_out]`.
pub fn conv1d_oracle(x: &[f32], n: usize, len: usize, cin: usize, w: &[f32], k: usize, cout: usize, b: &[f32]) -> Vec<f64> {
    let out_len = len - k + 1;
    let mut out = vec![0.0f64; n * out_len * cout];
    for s in 0..n {
        for t in 0..out_len {
            for o in 0..cout {
                let mut acc = b[o] as f64;
                for j in 0..k {
                    for c in 0..cin {
                        acc += x[(s * len + t + j) * cin + c] as f64 * w[(j * cin + c) * cout + o] as f64;
                    }
                }
                out[(s * out_len + t) * cout + o] = acc;
            }
        }
    }
    out
}

/// Brute-force KNN: full distance table, full sort on (distance, index),
/// majority vote with lowest-class tie-break.
pub fn knn_oracle(refs: &[Vec<f32>], labels: &[usize], queries: &[Vec<f32>], k: usize) -> Vec<usize> {
    let n_classes = labels.iter().max().map_or(1, |m| m + 1);
    queries
        .iter()
        .map(|q| {
            let mut table: Vec<(f64, usize)> = refs
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let d: f64 = q
                        .iter()
                        .zip(r)
                        .map(|(&a, &b)| {
                            let e = a as f64 - b as f64;
                            e * e
                        })
                        .sum();
                    (d, i)
                })
                .collect();
            table.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut votes = vec![0usize; n_classes];
            for &(_, i) in table.iter().take(k) {
                votes[labels[i]] += 1;
            }
            let best = *votes.iter().max().unwrap();
            votes.iter().position(|&v| v == best).unwrap()
        })
        .collect()
}

/// The routing rule written out directly: agree -> shared class, disagree ->
/// third opinion (or the second layer when no third layer exists).
pub fn routing_oracle(l1: &[usize], l2: &[usize], l3: Option<&[usize]>) -> Vec<usize> {
    (0..l1.len())
        .map(|i| {
            if l1[i] == l2[i] {
                l1[i]
            } else {
                match l3 {
                    Some(third) => third[i],
                    None => l2[i],
                }
            }
        })
        .collect()
}

/// Coordinates on a coarse grid so many distances tie exactly.
fn grid_rows(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(0..5) as f32 * 0.25).collect())
        .collect()
}

/// Number of queries where `knn_predict` and the brute-force oracle differ.
pub fn knn_mismatches(seed: u64, n_ref: usize, n_query: usize, d: usize, k: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs = grid_rows(n_ref, d, &mut rng);
    let labels: Vec<usize> = (0..n_ref).map(|_| rng.gen_range(0..5)).collect();
    let queries = grid_rows(n_query, d, &mut rng);
    let model = KnnModel::new(FeatureMatrix::from_rows(&refs, labels.clone()).unwrap(), k).unwrap();
    let got = knn_predict(&model, &FeatureMatrix::from_rows(&queries, vec![0; n_query]).unwrap()).unwrap();
    let want = knn_oracle(&refs, &labels, &queries, k);
    got.iter().zip(&want).filter(|(a, b)| a != b).count()
}

/// Largest absolute difference between the conv1d layer and the nested-loop
/// oracle over `cases` random shapes.
pub fn conv_max_error(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = rng.gen_range(1..4);
        let cin = rng.gen_range(1..4);
        let cout = rng.gen_range(1..5);
        let k = rng.gen_range(1..5);
        let len = rng.gen_range(k..k + 8);
        let mut draw = |m: usize| (0..m).map(|_| rng.gen_range(-1.0f32..1.0)).collect::<Vec<_>>();
        let x = draw(n * len * cin);
        let w = draw(k * cin * cout);
        let b = draw(cout);
        let layer = Layer::with_params(
            LayerSpec::Conv1d {
                in_channels: cin,
                filters: cout,
                kernel: k,
            },
            Tensor::from_vec(&[k, cin, cout], w.clone()).unwrap(),
            Tensor::from_vec(&[cout], b.clone()).unwrap(),
        )
        .unwrap();
        let out = Sequential::new(vec![layer])
            .predict(&Tensor::from_vec(&[n, len, cin], x.clone()).unwrap())
            .unwrap();
        let want = conv1d_oracle(&x, n, len, cin, &w, k, cout, &b);
        assert_eq!(out.len(), want.len());
        for (a, b) in out.data().iter().zip(&want) {
            worst = worst.max((*a as f64 - b).abs());
        }
    }
    worst
}

/// Replays per-row classes keyed by the first feature (a row id) and counts
/// how many rows it was asked about.
pub struct Stub<'a> {
    pub classes: Vec<usize>,
    pub asked: &'a Cell<usize>,
}

impl Classifier for Stub<'_> {
    fn predict(&self, q: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
        self.asked.set(self.asked.get() + q.n_rows());
        Ok(q.rows().map(|r| self.classes[r[0] as usize]).collect())
    }
}

/// 200-row stub scenario: returns (mismatches against the routing oracle,
/// rows sent to layer 3, conflicting rows) with and without layer 3.
pub fn routing_mismatches(seed: u64, rows: usize) -> [(usize, usize, usize); 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || (0..rows).map(|_| rng.gen_range(0..5)).collect::<Vec<usize>>();
    let l1 = draw();
    // Mostly agreeing, like trained layers.
    let l2: Vec<usize> = l1
        .iter()
        .zip(draw())
        .enumerate()
        .map(|(i, (&a, b))| if i % 3 == 0 { b } else { a })
        .collect();
    let l3 = draw();
    let q = FeatureMatrix::from_rows(&(0..rows).map(|i| vec![i as f32]).collect::<Vec<_>>(), vec![0; rows]).unwrap();
    let conflicts = l1.iter().zip(&l2).filter(|(a, b)| a != b).count();
    let mut out = [(0, 0, 0); 2];
    for (slot, with_l3) in [true, false].into_iter().enumerate() {
        let (a1, a2, a3) = (Cell::new(0), Cell::new(0), Cell::new(0));
        let e = Ensemble {
            layer1: Stub { classes: l1.clone(), asked: &a1 },
            layer2: Stub { classes: l2.clone(), asked: &a2 },
            layer3: with_l3.then(|| Stub { classes: l3.clone(), asked: &a3 }),
            conflict_count: conflicts,
            fallback: Fallback::Layer2,
        };
        let got = e.predict(&q).unwrap();
        let want = routing_oracle(&l1, &l2, with_l3.then_some(l3.as_slice()));
        out[slot] = (
            got.iter().zip(&want).filter(|(a, b)| a != b).count(),
            a3.get(),
            conflicts,
        );
    }
    out
}

/// The eight gradient families with their largest relative error over
/// `cases` random configurations each.
pub fn gradient_suite(cases: usize) -> Vec<(&'static str, f64)> {
    use iot_anomaly::nn::{loss_bce, loss_mse, loss_sparse_ce};
    let mut results = Vec::new();
    for (i, kind) in ["dense", "conv1d", "maxpool", "lstm", "dropout0"].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let worst = (0..cases)
            .map(|_| {
                let (mut net, x) = gradient_case(kind, &mut rng);
                network_grad_error(&mut net, &x, &mut rng)
            })
            .fold(0.0, f64::max);
        results.push((kind, worst));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let (mut ce, mut bce, mut mse) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cases {
        let n = rng.gen_range(1..5);
        let c = rng.gen_range(2..6);
        let logits = random_tensor(&[n, c], &mut rng);
        let targets: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        ce = ce.max(loss_grad_error(&logits, |p| loss_sparse_ce(p, &targets).unwrap()));
        let probs = Tensor::from_vec(&[n, 1], (0..n).map(|_| rng.gen_range(0.05..0.95)).collect()).unwrap();
        let tgt = Tensor::from_vec(&[n, 1], (0..n).map(|_| rng.gen_range(0..2) as f64).collect()).unwrap();
        bce = bce.max(loss_grad_error(&probs, |p| loss_bce(p, &tgt).unwrap()));
        let pred = random_tensor(&[n, c], &mut rng);
        let target = random_tensor(&[n, c], &mut rng);
        mse = mse.max(loss_grad_error(&pred, |p| loss_mse(p, &target).unwrap()));
    }
    results.extend([("softmax+sparse_ce", ce), ("bce", bce), ("mse", mse)]);
    results
}

/// Small, quick settings for end-to-end tests on synthetic data.
pub fn fast_config(model: ModelKind, data: &str, out: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.model = model;
    c.seed = 11;
    c.out = out.to_path_buf();
    c.apply_text(&format!(
        "data = {data}
         preprocess.lenient_categories = true
         ae.epochs = 5
         gan.hidden = 32
         gan.generator_layers = 2
         gan.discriminator_layers = 2
         gan.latent = 8
         gan.epochs = 2
         gan.encoder_hidden = 32
         gan.encoder_epochs = 2
         knn.max_reference_rows = 1500
         forest.n_trees = 5
         cnnlstm.filters = 8
         cnnlstm.lstm_units = 8
         cnnlstm.epochs = 2
         ensemble.min_conflicts = 1"
    ))
    .unwrap();
    c
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
