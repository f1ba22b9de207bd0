//! Statistical and exact oracles checked against the library from outside.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use qudit_sim::harness::{run_instance_with, s_family, WidthMode};
use qudit_sim::transport::{fit_decay, oracle_bulk_charge_samples};
use qudit_sim::{
    haar_unitary, inner_product, product_state, BrickworkCircuit, ChainConfig, ExperimentSpec, LocalLabel, StateVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Asymptotic Kolmogorov distribution tail with the Stephens correction.
fn ks_p_value(stat: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * stat;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x - lo) / (hi - lo);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn haar_eigenphases_are_uniform() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let phases: Vec<f64> = (0..5000)
        .map(|_| {
            let u = haar_unitary(3, &mut r).unwrap();
            let eig = u.schur().eigenvalues().expect("complex Schur form is triangular");
            eig[r.random_range(0..3)].arg()
        })
        .collect();
    let stat = ks_uniform(phases, -PI, PI);
    let p = ks_p_value(stat, 5000);
    assert!(p > 0.01, "KS statistic {stat}, p = {p}");
}

#[test]
fn ks_helper_rejects_a_skewed_sample() {
    let xs: Vec<f64> = (0..5000).map(|i| -PI + 2.0 * PI * (i as f64 / 5000.0).powi(2)).collect();
    assert!(ks_p_value(ks_uniform(xs, -PI, PI), 5000) < 1e-6);
}

fn assert_gram_identity(states: &[StateVector]) {
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate() {
            let g = inner_product(a, b).unwrap();
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((g - Complex64::new(target, 0.0)).norm() <= 1e-12, "Gram ({i},{j}) = {g}");
        }
    }
}

#[test]
fn three_site_x_family_is_orthonormal() {
    let cfg = ChainConfig::new(6, 2, 0).unwrap();
    let states: Vec<StateVector> = (0..8usize)
        .map(|idx| {
            let mut labels = vec![
                LocalLabel::X(1),
                LocalLabel::Z(0),
                LocalLabel::Z(0),
                LocalLabel::Z(0),
                LocalLabel::X(0),
                LocalLabel::X(1),
            ];
            for j in 0..3 {
                labels[1 + j] = LocalLabel::X((idx >> (2 - j)) & 1);
            }
            product_state(&labels, cfg).unwrap()
        })
        .collect();
    assert_gram_identity(&states);
}

#[test]
fn central_family_is_orthonormal() {
    let cfg = ChainConfig::new(6, 3, 0).unwrap();
    let outer = vec![LocalLabel::X(2); 6];
    let family = s_family(&outer, 3, 4).unwrap();
    assert_eq!(family.len(), 81);
    let states: Vec<StateVector> = family.iter().map(|l| product_state(l, cfg).unwrap()).collect();
    assert_gram_identity(&states);
}

#[test]
fn oracle_decay_fit_is_diffusive() {
    let fit = fit_decay(oracle_bulk_charge_samples(40, &[4, 6, 8, 10, 12], 30, 1.0).unwrap()).unwrap();
    assert!(fit.slope > 0.0);
    assert!(fit.slope_ci.0 > 0.0, "interval {:?}", fit.slope_ci);
    assert!(fit.residual < 0.15, "residual {}", fit.residual);
    assert!(fit.n_points > 100);
}

#[test]
fn replayed_circuit_reproduces_certificates() {
    let cfg = ChainConfig::new(6, 3, 0).unwrap();
    let circuit = BrickworkCircuit::sample(cfg, 6, 99).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("circuit.json");
    circuit.save_json(&path).unwrap();
    let loaded = BrickworkCircuit::load_json(&path).unwrap();

    let mut r = ChaCha8Rng::seed_from_u64(1);
    let psi = StateVector::random(cfg, &mut r);
    let a = circuit.evolve(&psi, 6).unwrap();
    let b = loaded.evolve(&psi, 6).unwrap();
    assert!(a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));

    let spec = ExperimentSpec::new(cfg, 6, WidthMode::Fixed(2), 2.0).unwrap();
    let labels: Vec<LocalLabel> = (0..6).map(|i| LocalLabel::X(i % 3)).collect();
    let first = run_instance_with(&spec, 0, Arc::new(circuit), &labels).unwrap();
    let second = run_instance_with(&spec, 0, Arc::new(loaded), &labels).unwrap();
    assert_eq!(first, second);
}
