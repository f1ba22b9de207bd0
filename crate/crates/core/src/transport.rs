//! Charge profiles, the classical random-walk map for Haar-averaged charge,
//! and decay fits for charge entering an initially empty region.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::BrickworkCircuit;
use crate::error::{domain, Result};
use crate::output::fmt_f64;
use crate::rng;
use crate::state::{product_state, ChainConfig, LocalLabel, StateVector};

/// Bulk charges at or below this are excluded from decay fits.
pub const NOISE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeProfile {
    pub values: Vec<f64>,
    pub time: usize,
}

impl ChargeProfile {
    pub fn new(values: Vec<f64>, time: usize) -> Self {
        Self { values, time }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn charge_profile(psi: &StateVector) -> Result<ChargeProfile> {
    if !psi.is_normalized() {
        return domain("charge profile requires a normalized state");
    }
    let values = (1..=psi.config().sites()).map(|s| psi.charge_expectation(s)).collect::<Result<Vec<_>>>()?;
    Ok(ChargeProfile::new(values, 0))
}

/// Haar-averaged charge after `t` more layers. Each bond gate replaces the
/// pair `(q_i, q_{i+1})` by its mean on both sites, odd bonds first.
pub fn random_walk_oracle(p0: &ChargeProfile, t: usize) -> ChargeProfile {
    let mut q = p0.values.clone();
    let n = q.len();
    for _ in 0..t {
        for b in BrickworkCircuit::bond_order(n) {
            let mean = 0.5 * (q[b - 1] + q[b]);
            q[b - 1] = mean;
            q[b] = mean;
        }
    }
    ChargeProfile::new(q, p0.time + t)
}

/// Initial product state for ensemble runs.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// The same labels in every realization.
    Fixed(Vec<LocalLabel>),
    /// Central `width` sites in `|0>`; every other site in a uniformly random
    /// X eigenstate, redrawn per realization.
    EmptyCenter { width: usize },
}

/// Sites `N/2 - m/2 + 1 ..= N/2 + m/2`.
pub fn central_region(sites: usize, width: usize) -> std::ops::RangeInclusive<usize> {
    (sites / 2 - width / 2 + 1)..=(sites / 2 + width / 2)
}

pub(crate) fn check_width(sites: usize, width: usize) -> Result<()> {
    if width == 0 || !width.is_multiple_of(2) {
        return domain(format!("central width m must be a positive even integer, got {width}"));
    }
    if width >= sites {
        return domain(format!("central width m = {width} must be smaller than N = {sites}"));
    }
    Ok(())
}

/// Labels with `|0>` on the central region and random X labels elsewhere.
pub fn empty_center_labels<R: Rng + ?Sized>(sites: usize, d: usize, width: usize, r: &mut R) -> Vec<LocalLabel> {
    let center = central_region(sites, width);
    (1..=sites)
        .map(|s| if center.contains(&s) { LocalLabel::Z(0) } else { LocalLabel::X(r.random_range(0..d)) })
        .collect()
}

impl InitialState {
    fn labels(&self, config: &ChainConfig, realization_seed: u64) -> Vec<LocalLabel> {
        match self {
            InitialState::Fixed(labels) => labels.clone(),
            InitialState::EmptyCenter { width } => {
                let mut r = rng::stream(realization_seed, &[rng::TAG_LABELS]);
                empty_center_labels(config.sites(), config.dim(), *width, &mut r)
            }
        }
    }

    fn validate(&self, config: &ChainConfig) -> Result<()> {
        match self {
            InitialState::Fixed(labels) if labels.len() != config.sites() => {
                domain(format!("{} labels for {} sites", labels.len(), config.sites()))
            }
            InitialState::Fixed(labels) => labels.iter().try_for_each(|l| l.vector(config.dim()).map(|_| ())),
            InitialState::EmptyCenter { width } => check_width(config.sites(), *width),
        }
    }
}

/// Mean and standard error of the charge profile at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileStats {
    pub time: usize,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
}

impl ProfileStats {
    pub fn profile(&self) -> ChargeProfile {
        ChargeProfile::new(self.mean.clone(), self.time)
    }

    fn from_samples(time: usize, samples: &[Vec<f64>]) -> Self {
        let n = samples.len();
        let sites = samples[0].len();
        let mean: Vec<f64> = (0..sites).map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / n as f64).collect();
        let stderr = (0..sites)
            .map(|i| {
                if n < 2 {
                    return 0.0;
                }
                let var = samples.iter().map(|s| (s[i] - mean[i]).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            })
            .collect();
        Self { time, mean, stderr, n_samples: n }
    }
}

/// Seed of realization `r` under base `seed`.
pub fn realization_seed(seed: u64, r: usize) -> u64 {
    rng::derive_seed(seed, &[rng::TAG_REALIZATION, r as u64])
}

/// Per-realization charge profiles at `t = 0..=depth`, averaged over
/// `n_samples` independent circuits. Realizations run in parallel; the
/// reduction order is fixed.
pub fn ensemble_profiles(
    config: ChainConfig,
    initial: &InitialState,
    depth: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<ProfileStats>> {
    if n_samples < 1 {
        return domain("n_samples must be at least 1");
    }
    initial.validate(&config)?;
    let runs: Vec<Vec<Vec<f64>>> = (0..n_samples)
        .into_par_iter()
        .map(|r| {
            let rs = realization_seed(seed, r);
            let circuit = BrickworkCircuit::sample(config, depth, rng::derive_seed(rs, &[rng::TAG_CIRCUIT]))?;
            let mut psi = product_state(&initial.labels(&config, rs), config)?;
            let mut out = vec![charge_profile(&psi)?.values];
            for t in 1..=depth {
                psi = circuit.apply_layer(&psi, t)?;
                out.push(charge_profile(&psi)?.values);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok((0..=depth)
        .map(|t| {
            let at_t: Vec<Vec<f64>> = runs.iter().map(|run| run[t].clone()).collect();
            ProfileStats::from_samples(t, &at_t)
        })
        .collect())
}

/// Ensemble mean and per-site standard error at time `t`.
pub fn ensemble_average_profile(
    config: ChainConfig,
    initial: &[LocalLabel],
    t: usize,
    n_samples: usize,
    seed: u64,
) -> Result<(ChargeProfile, Vec<f64>)> {
    let stats = ensemble_profiles(config, &InitialState::Fixed(initial.to_vec()), t, n_samples, seed)?;
    let last = stats.into_iter().last().expect("depth + 1 entries");
    Ok((last.profile(), last.stderr))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub m: usize,
    pub t: usize,
    pub q: f64,
}

/// Least-squares fit of `log q ≈ intercept - slope * m^2 / t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub samples: Vec<DecaySample>,
    pub slope: f64,
    pub intercept: f64,
    /// 95% normal-approximation interval on `slope`.
    pub slope_ci: (f64, f64),
    /// Root-mean-square residual in `log q`.
    pub residual: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub n_points: usize,
}

impl DecayFit {
    pub fn report(&self) -> FitReport {
        FitReport { slope: self.slope, intercept: self.intercept, residual: self.residual, n_points: self.n_points }
    }
}

pub fn fit_decay(samples: Vec<DecaySample>) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.t > 0 && s.q > NOISE_FLOOR)
        .map(|s| ((s.m * s.m) as f64 / s.t as f64, s.q.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return domain(format!("decay fit needs at least 3 points above the noise floor, got {n}"));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return domain("decay fit needs at least two distinct m^2/t values");
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - beta * p.0).powi(2)).sum();
    let se = (sse / (nf - 2.0) / sxx).sqrt();
    let slope = -beta;
    Ok(DecayFit {
        samples,
        slope,
        intercept,
        slope_ci: (slope - 1.96 * se, slope + 1.96 * se),
        residual: (sse / nf).sqrt(),
        n_points: n,
    })
}

/// Monitored bulk site of the empty region: `N/2`.
pub fn bulk_site(sites: usize) -> usize {
    sites / 2
}

/// Circuit-averaged `<Q_{N/2}>(t)` for `t = 1..=t_max` and every width in
/// `widths`, starting from [`InitialState::EmptyCenter`], then fitted.
pub fn bulk_charge_decay(
    config: ChainConfig,
    widths: &[usize],
    t_max: usize,
    n_samples: usize,
    seed: u64,
) -> Result<DecayFit> {
    let samples = bulk_charge_samples(config, widths, t_max, n_samples, seed)?;
    fit_decay(samples)
}

pub fn bulk_charge_samples(
    config: ChainConfig,
    widths: &[usize],
    t_max: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<DecaySample>> {
    let site = bulk_site(config.sites());
    let mut samples = Vec::new();
    for &m in widths {
        check_width(config.sites(), m)?;
        let stats = ensemble_profiles(
            config,
            &InitialState::EmptyCenter { width: m },
            t_max,
            n_samples,
            rng::derive_seed(seed, &[m as u64]),
        )?;
        samples.extend(stats.iter().map(|s| DecaySample { m, t: s.time, q: s.mean[site - 1] }));
    }
    Ok(samples)
}

/// Same sweep as [`bulk_charge_samples`] evaluated with the random-walk map,
/// with every site outside the central region holding charge `fill`.
pub fn oracle_bulk_charge_samples(sites: usize, widths: &[usize], t_max: usize, fill: f64) -> Result<Vec<DecaySample>> {
    let site = bulk_site(sites);
    let mut samples = Vec::new();
    for &m in widths {
        check_width(sites, m)?;
        let center = central_region(sites, m);
        let p0 = ChargeProfile::new((1..=sites).map(|s| if center.contains(&s) { 0.0 } else { fill }).collect(), 0);
        let mut p = p0;
        samples.push(DecaySample { m, t: 0, q: p.values[site - 1] });
        for _ in 0..t_max {
            p = random_walk_oracle(&p, 1);
            samples.push(DecaySample { m, t: p.time, q: p.values[site - 1] });
        }
    }
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    /// `||(1 - |0><0|_site) psi||^2`
    pub lhs: f64,
    /// `<Q_site>`
    pub rhs: f64,
    pub holds: bool,
}

pub fn condition_inequality_check(psi: &StateVector, site: usize) -> Result<ConditionCheck> {
    let lhs = psi.excited_weight(site)?;
    let rhs = psi.charge_expectation(site)?;
    Ok(ConditionCheck { lhs, rhs, holds: lhs <= rhs + 1e-10 })
}

/// CSV with columns `t, site, mean_q, stderr, n_samples, seed`.
pub fn write_profile_csv<W: Write>(out: W, stats: &[ProfileStats], seed: u64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "site", "mean_q", "stderr", "n_samples", "seed"])?;
    for s in stats {
        for (i, (m, e)) in s.mean.iter().zip(&s.stderr).enumerate() {
            w.write_record([
                s.time.to_string(),
                (i + 1).to_string(),
                fmt_f64(*m),
                fmt_f64(*e),
                s.n_samples.to_string(),
                seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
