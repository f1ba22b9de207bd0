//! Dense statevectors for a chain of `N` qudits of local dimension `d`.
//!
//! Sites are numbered `1..=N`. A basis index is read as an `N`-digit base-`d`
//! number with site 1 as the most significant digit, so site `s` has stride
//! `d^(N-s)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Tolerance for normalization and other asserted identities.
pub const NORM_TOL: f64 = 1e-10;

/// Default cap on `N * log2(d)`, i.e. at most 2^30 amplitudes.
pub const DEFAULT_MAX_LOG2_DIM: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    sites: usize,
    dim: usize,
    seed: u64,
}

impl ChainConfig {
    pub fn new(sites: usize, dim: usize, seed: u64) -> Result<Self> {
        Self::with_cap(sites, dim, seed, DEFAULT_MAX_LOG2_DIM)
    }

    pub fn with_cap(sites: usize, dim: usize, seed: u64, max_log2_dim: f64) -> Result<Self> {
        if sites == 0 || !sites.is_multiple_of(2) {
            return domain(format!("N must be a positive even integer, got {sites}"));
        }
        if dim < 2 {
            return domain(format!("local dimension d must be >= 2, got {dim}"));
        }
        let exponent = sites as f64 * (dim as f64).log2();
        if exponent > max_log2_dim + 1e-9 {
            return Err(Error::ResourceCap(format!("d^N = {dim}^{sites} exceeds 2^{max_log2_dim} amplitudes")));
        }
        Ok(Self { sites, dim, seed })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// `d^N`.
    pub fn hilbert_dim(&self) -> usize {
        self.dim.pow(self.sites as u32)
    }

    /// Stride of the digit belonging to 1-based `site`.
    pub fn stride(&self, site: usize) -> usize {
        self.dim.pow((self.sites - site) as u32)
    }

    /// Digit of basis `index` at 1-based `site`.
    #[inline]
    pub fn digit(&self, index: usize, site: usize) -> usize {
        (index / self.stride(site)) % self.dim
    }

    pub(crate) fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.sites {
            return domain(format!("site {site} out of range 1..={}", self.sites));
        }
        Ok(())
    }

    /// Same chain geometry, ignoring the seed.
    pub fn same_shape(&self, other: &ChainConfig) -> bool {
        self.sites == other.sites && self.dim == other.dim
    }
}

/// Single-site basis label: a charge eigenstate `|k>` or an eigenstate `|k)`
/// of the cyclic shift `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocalLabel {
    Z(usize),
    X(usize),
}

impl LocalLabel {
    pub fn index(&self) -> usize {
        match *self {
            LocalLabel::Z(k) | LocalLabel::X(k) => k,
        }
    }

    pub fn vector(&self, d: usize) -> Result<Vec<Complex64>> {
        match *self {
            LocalLabel::Z(k) => z_basis_state(k, d),
            LocalLabel::X(k) => x_eigenstate(k, d),
        }
    }
}

fn check_level(k: usize, d: usize) -> Result<()> {
    if d < 2 {
        return domain(format!("local dimension d must be >= 2, got {d}"));
    }
    if k >= d {
        return domain(format!("level {k} out of range for d = {d}"));
    }
    Ok(())
}

pub fn z_basis_state(k: usize, d: usize) -> Result<Vec<Complex64>> {
    check_level(k, d)?;
    let mut v = vec![Complex64::new(0.0, 0.0); d];
    v[k] = Complex64::new(1.0, 0.0);
    Ok(v)
}

/// `S^z` eigenvalue of `|k>`: `(d-1)/2 - k`.
pub fn spin_z(k: usize, d: usize) -> Result<f64> {
    check_level(k, d)?;
    Ok((d as f64 - 1.0) / 2.0 - k as f64)
}

/// Fourier eigenstate of the cyclic shift, `(1/sqrt d) sum_j w^(jk) |j>`
/// with `w = exp(2 pi i / d)`. Its shift eigenvalue is `w^(-k)`.
pub fn x_eigenstate(k: usize, d: usize) -> Result<Vec<Complex64>> {
    check_level(k, d)?;
    let norm = 1.0 / (d as f64).sqrt();
    Ok((0..d)
        .map(|j| {
            let phase = 2.0 * PI * ((j * k) % d) as f64 / d as f64;
            Complex64::from_polar(norm, phase)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    config: ChainConfig,
    normalized: bool,
}

impl StateVector {
    /// Wraps `amps`, requiring unit norm within [`NORM_TOL`].
    pub fn from_amplitudes(amps: Vec<Complex64>, config: ChainConfig) -> Result<Self> {
        let s = Self::unnormalized(amps, config)?;
        let n = s.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return domain(format!("state norm {n} differs from 1"));
        }
        Ok(Self { normalized: true, ..s })
    }

    /// Wraps `amps` without a norm check; the result is flagged unnormalized.
    pub fn unnormalized(amps: Vec<Complex64>, config: ChainConfig) -> Result<Self> {
        if amps.len() != config.hilbert_dim() {
            return domain(format!("amplitude vector has length {}, expected {}", amps.len(), config.hilbert_dim()));
        }
        Ok(Self { amps, config, normalized: false })
    }

    /// Product of computational basis states with the given digits.
    pub fn basis_state(digits: &[usize], config: ChainConfig) -> Result<Self> {
        let labels: Vec<_> = digits.iter().map(|&k| LocalLabel::Z(k)).collect();
        product_state(&labels, config)
    }

    /// Haar-random (complex Gaussian, normalized) state.
    pub fn random<R: Rng + ?Sized>(config: ChainConfig, rng: &mut R) -> Self {
        let mut amps: Vec<Complex64> = (0..config.hilbert_dim())
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Self { amps, config, normalized: true }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        inner_product(self, other)
    }

    /// `self - other` as an unnormalized vector.
    pub fn difference(&self, other: &StateVector) -> Result<StateVector> {
        self.check_shape(other)?;
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a - b).collect();
        Ok(Self { amps, config: self.config, normalized: false })
    }

    /// Multiplies every amplitude by `factor`; the flag survives only for a
    /// unit-modulus factor.
    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.amps.iter_mut().for_each(|a| *a *= factor);
        self.normalized &= (factor.norm() - 1.0).abs() <= 1e-12;
        self
    }

    pub(crate) fn from_parts(amps: Vec<Complex64>, config: ChainConfig, normalized: bool) -> Self {
        Self { amps, config, normalized }
    }

    pub(crate) fn check_shape(&self, other: &StateVector) -> Result<()> {
        if !self.config.same_shape(&other.config) {
            return domain(format!(
                "config mismatch: (N={}, d={}) vs (N={}, d={})",
                self.config.sites, self.config.dim, other.config.sites, other.config.dim
            ));
        }
        Ok(())
    }

    pub fn charge_expectation(&self, site: usize) -> Result<f64> {
        charge_expectation(self, site)
    }

    /// Squared norm of the part of the state with a nonzero digit at `site`,
    /// `||(1 - |0><0|_site) psi||^2`.
    pub fn excited_weight(&self, site: usize) -> Result<f64> {
        self.config.check_site(site)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| self.config.digit(*i, site) != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }
}

pub fn product_state(labels: &[LocalLabel], config: ChainConfig) -> Result<StateVector> {
    if labels.len() != config.sites {
        return domain(format!("{} labels given for a chain of {} sites", labels.len(), config.sites));
    }
    let d = config.dim;
    let mut amps = vec![Complex64::new(1.0, 0.0)];
    for label in labels {
        let local = label.vector(d)?;
        let mut next = Vec::with_capacity(amps.len() * d);
        for a in &amps {
            next.extend(local.iter().map(|l| a * l));
        }
        amps = next;
    }
    Ok(StateVector { amps, config, normalized: true })
}

pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    a.check_shape(b)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// `<psi|Q_site|psi>` with `Q|k> = k|k>`.
pub fn charge_expectation(psi: &StateVector, site: usize) -> Result<f64> {
    psi.config.check_site(site)?;
    let cfg = psi.config;
    Ok(psi.amps.iter().enumerate().map(|(i, a)| cfg.digit(i, site) as f64 * a.norm_sqr()).sum())
}

/// Applies `prod_s |0><0|_s` over `sites`. Returns the (unnormalized) image and
/// its squared norm.
pub fn project_local_zero(psi: &StateVector, sites: &[usize]) -> Result<(StateVector, f64)> {
    for (n, &s) in sites.iter().enumerate() {
        psi.config.check_site(s)?;
        if sites[..n].contains(&s) {
            return domain(format!("site {s} listed twice"));
        }
    }
    let cfg = psi.config;
    let amps: Vec<Complex64> = psi
        .amps
        .iter()
        .enumerate()
        .map(|(i, &a)| if sites.iter().all(|&s| cfg.digit(i, s) == 0) { a } else { Complex64::new(0.0, 0.0) })
        .collect();
    let weight = amps.iter().map(|a| a.norm_sqr()).sum();
    Ok((StateVector { amps, config: cfg, normalized: false }, weight))
}
