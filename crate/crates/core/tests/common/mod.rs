//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

use fieldswarm::sensor::SensorModel;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub const TOL: f64 = 1e-12;

pub fn oracle_entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

pub fn table(model: &SensorModel) -> Vec<Vec<f64>> {
    (0..model.n_observations())
        .map(|o| (0..=model.n_w()).map(|w| model.prob(o, w)).collect())
        .collect()
}

/// Posterior by Bayes' rule, `None` if the observation has zero evidence.
pub fn oracle_posterior(t: &[Vec<f64>], prior: &[f64], o: usize) -> Option<Vec<f64>> {
    let joint: Vec<f64> = prior.iter().enumerate().map(|(w, p)| t[o][w] * p).collect();
    let z: f64 = joint.iter().sum();
    (z > 0.0).then(|| joint.iter().map(|j| j / z).collect())
}

/// Entropy minus the expected posterior entropy, enumerating observations.
pub fn oracle_ig(t: &[Vec<f64>], prior: &[f64]) -> f64 {
    let mut expected = 0.0;
    for o in 0..t.len() {
        let pred: f64 = prior.iter().enumerate().map(|(w, p)| t[o][w] * p).sum();
        if let Some(post) = oracle_posterior(t, prior, o) {
            expected += pred * oracle_entropy(&post);
        }
    }
    oracle_entropy(prior) - expected
}

/// All distributions over `n` outcomes with probabilities in steps of 1/k.
pub fn lattice(n: usize, k: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == n - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / k as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(n, left - c, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, k, &mut Vec::new(), &mut out);
    out
}

pub fn random_simplex(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // Normalised exponentials are uniform on the simplex.
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

pub fn random_model(n_w: usize, rng: &mut ChaCha8Rng) -> SensorModel {
    let cols: Vec<Vec<f64>> = (0..=n_w).map(|_| random_simplex(n_w + 2, rng)).collect();
    let rows = (0..n_w + 2).map(|o| cols.iter().map(|c| c[o]).collect()).collect();
    SensorModel::from_rows(rows).unwrap()
}

pub fn fixture_models(n_w: usize) -> Vec<SensorModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(n_w as u64);
    let mut models = vec![
        SensorModel::identity(n_w),
        SensorModel::synthesize(n_w, 0.5, 0.1).unwrap(),
        SensorModel::synthesize(n_w, 1.0, 0.3).unwrap(),
    ];
    models.extend((0..3).map(|_| random_model(n_w, &mut rng)));
    models
}
