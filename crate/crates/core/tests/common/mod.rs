//! Independent oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wflo_core::farm::{make_square_grid, ProximityPairs, TurbineSpec};
use wflo_core::mrf::MrfModel;
use wflo_core::pipeline::Instance;
use wflo_core::wake::{InteractionMatrix, WakeExpansion, WakeParams};
use wflo_core::wind::WindRose;

/// `X^T W X + beta (sum X - K)^2`, evaluated term by term.
pub fn lagrangian(w: &InteractionMatrix, k: usize, beta: f64, x: &[u8]) -> f64 {
    let n = w.n();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += f64::from(x[i]) * w.get(i, j) * f64::from(x[j]);
        }
    }
    let count: f64 = x.iter().map(|&v| f64::from(v)).sum();
    quad + beta * (count - k as f64).powi(2)
}

/// Direct sum of unary, pairwise and constant terms.
pub fn model_energy(model: &MrfModel, x: &[u8]) -> f64 {
    let mut e = model.constant();
    for (s, u) in model.unary().iter().enumerate() {
        e += u[x[s] as usize];
    }
    for edge in model.edges() {
        e += edge.potential[(2 * x[edge.s] + x[edge.t]) as usize];
    }
    e
}

/// Exact minimum over all `2^n` labellings.
pub fn brute_min(model: &MrfModel) -> (f64, Vec<u8>) {
    let n = model.n_vertices();
    assert!(n <= 20, "enumeration only for tiny models");
    let mut best = (f64::INFINITY, vec![0; n]);
    for bits in 0..(1u64 << n) {
        let x: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
        let e = model_energy(model, &x);
        if e < best.0 {
            best = (e, x);
        }
    }
    best
}

/// Nonnegative matrix with zero diagonal; about `density` of entries nonzero.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, density: f64) -> InteractionMatrix {
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(density) {
                entries[i * n + j] = rng.gen_range(0.0..1.0);
            }
        }
    }
    InteractionMatrix::from_entries(n, entries).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect()
}

/// Benchmark site: 2 km square, 10 x 10 cells, R = 20 m, C_T = 0.88, alpha = 0.1,
/// cone starting from the expanded downstream radius.
pub fn benchmark_instance(rose: WindRose, k: usize) -> Instance {
    Instance {
        grid: make_square_grid(2000.0, 10).unwrap(),
        rose,
        spec: TurbineSpec::benchmark(),
        params: WakeParams::from_thrust(0.1, 0.88)
            .unwrap()
            .with_expansion(WakeExpansion::DownstreamRadius),
        k,
        exclusions: ProximityPairs::empty(),
    }
}

/// Deficit of a Jensen wake at `to` from a source at `from`, wind blowing
/// from `direction` degrees, written out with explicit trigonometry.
pub fn jensen_oracle(from: (f64, f64), to: (f64, f64), direction: f64, alpha: f64, c_t: f64, radius: f64) -> f64 {
    let a = 0.5 * (1.0 - (1.0 - c_t).sqrt());
    let theta = direction.to_radians();
    // unit vector the air moves along
    let (fx, fy) = (-theta.sin(), -theta.cos());
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let d = dx * fx + dy * fy;
    let r = (dx * fy - dy * fx).abs();
    if d <= 0.0 || r > radius + alpha * d {
        return 0.0;
    }
    2.0 * a / (1.0 + alpha * d / radius).powi(2)
}
