#![allow(dead_code)]

use fedud::data::{gen_synthetic, DatasetSplit, SplitRule, SyntheticConfig};
use fedud::nn::{
    bce_loss, grad_check, mse_loss, sigmoid, Activation, Embeddings, GradientSet, IndexMatrix, Mlp, Parameterized, Tensor, Tower,
};
use fedud::trainer::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small architecture used wherever full-size layers would only cost time.
pub fn small_config() -> TrainConfig {
    TrainConfig {
        embedding_dim: 4,
        bottom_dims: vec![16, 8],
        top_dims: vec![8],
        rep_dims: vec![8, 8],
        max_epochs: 2,
        batch_size: 64,
        ..Default::default()
    }
}

pub fn synthetic_split(n: usize, aligned_fraction: f64, seed: u64) -> DatasetSplit {
    let syn = SyntheticConfig {
        n_samples: n,
        aligned_fraction,
        seed,
        ..Default::default()
    };
    let d = gen_synthetic(&syn).unwrap();
    DatasetSplit::build(
        &d.host_schema,
        &d.guest_schema,
        d.host_samples().unwrap(),
        &d.guest_samples().unwrap(),
        &SplitRule::Random {
            n_val: n / 10,
            n_test: n / 10,
            seed,
        },
    )
    .unwrap()
}

#[derive(Debug)]
pub struct GradCase {
    pub layers: usize,
    pub embedded: bool,
    pub bce: bool,
    pub max_rel_err: f64,
}

fn random_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

// zero-initialized biases put units exactly on a ReLU kink whenever the layer
// below is all dead; a random offset moves every parameter off that set
fn jitter<P: Parameterized + ?Sized>(p: &mut P, rng: &mut ChaCha8Rng) {
    for t in p.parameters_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
}

fn head_loss(out: &Tensor, bce: bool, labels: &[f64], target: &Tensor) -> (f64, Tensor) {
    if bce {
        bce_loss(&sigmoid(out), labels).unwrap()
    } else {
        mse_loss(out, target).unwrap()
    }
}

/// One randomly configured network: 1–3 dense layers, with or without an
/// embedding front-end, BCE or MSE head. Returns the worst relative
/// disagreement between backprop and central differences.
pub fn random_grad_case(seed: u64) -> GradCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = rng.random_range(1..=3);
    let embedded = rng.random_bool(0.5);
    let bce = rng.random_bool(0.5);
    let batch = rng.random_range(1..=5);
    let mut dims: Vec<usize> = (0..layers).map(|_| rng.random_range(1..=6)).collect();
    if bce {
        *dims.last_mut().unwrap() = 1;
    }
    let last = if rng.random_bool(0.5) { Activation::Relu } else { Activation::Linear };
    let out_dim = *dims.last().unwrap();
    let labels: Vec<f64> = (0..batch).map(|_| f64::from(rng.random_range(0..2u8))).collect();
    let target = random_tensor(batch, out_dim, &mut rng);
    let eps = 1e-6;

    let max_rel_err = if embedded {
        let slots: Vec<(String, usize)> = (0..rng.random_range(1..=3))
            .map(|i| (format!("s{i}"), rng.random_range(2..=6)))
            .collect();
        let emb_dim = rng.random_range(1..=3);
        let mut emb = Embeddings::init(&slots, emb_dim, &mut rng);
        // embeddings start at ±0.01; widen them so ReLUs see varied inputs
        for t in emb.parameters_mut() {
            for v in t.data_mut() {
                *v *= 50.0;
            }
        }
        let mlp = Mlp::init(emb.out_dim(), &dims, last, &mut rng).unwrap();
        let mut tower = Tower::new(emb, mlp).unwrap();
        jitter(&mut tower, &mut rng);
        let idx: Vec<usize> = (0..batch)
            .flat_map(|_| slots.iter().map(|(_, v)| rng.random_range(0..*v)).collect::<Vec<_>>())
            .collect();
        let x = IndexMatrix::new(batch, slots.len(), idx).unwrap();
        let (out, cache) = tower.forward(&x).unwrap();
        let (_, g) = head_loss(&out, bce, &labels, &target);
        let analytic: GradientSet = tower.backward(&cache, &g).unwrap();
        grad_check(
            &mut tower,
            &analytic,
            |t| head_loss(&t.forward(&x).unwrap().0, bce, &labels, &target).0,
            eps,
        )
    } else {
        let in_dim = rng.random_range(1..=6);
        let mut mlp = Mlp::init(in_dim, &dims, last, &mut rng).unwrap();
        jitter(&mut mlp, &mut rng);
        let x = random_tensor(batch, in_dim, &mut rng);
        let (out, cache) = mlp.forward(&x).unwrap();
        let (_, g) = head_loss(&out, bce, &labels, &target);
        let (analytic, _) = mlp.backward(&cache, &g).unwrap();
        grad_check(
            &mut mlp,
            &analytic,
            |m| head_loss(&m.forward(&x).unwrap().0, bce, &labels, &target).0,
            eps,
        )
    };
    GradCase {
        layers,
        embedded,
        bce,
        max_rel_err,
    }
}

pub fn pairwise_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] < 0.5 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] > 0.5 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Scores drawn from a small grid (many ties) with a random, possibly extreme, positive rate.
pub fn random_auc_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = rng.random_range(2..=500);
    let pos_rate = [0.5, 0.1, 0.01, 0.99][rng.random_range(0..4)];
    let grid = rng.random_range(2..50);
    let mut labels: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random_bool(pos_rate)))).collect();
    labels[0] = 1.0;
    labels[1] = 0.0;
    let scores = (0..n).map(|_| f64::from(rng.random_range(0..grid)) / grid as f64).collect();
    (scores, labels)
}
