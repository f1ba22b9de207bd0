//! Schmidt spectra across a cut and the Rényi entropy family.
//!
//! Spectra come from the singular values of the `d^cut x d^(N-cut)` reshaped
//! amplitude matrix; `Λ_i` are their squares. All entropies use the natural
//! logarithm unless a [`LogBase`] conversion is applied.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::state::StateVector;

/// Eigenvalues of the reduced density matrix below this are dropped.
pub const CLIP_THRESHOLD: f64 = 1e-14;

/// `|α - 1|` below this is evaluated with the von Neumann formula.
pub const VON_NEUMANN_WINDOW: f64 = 1e-6;

/// Slack used by [`check_renyi_bounds`].
pub const BOUNDS_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Other(f64),
}

impl LogBase {
    /// Converts an entropy measured in nats to this base.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Natural => nats,
            LogBase::Two => nats / std::f64::consts::LN_2,
            LogBase::Other(b) => nats / b.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    values: Vec<f64>,
    cut: usize,
    clipped_mass: f64,
}

impl SchmidtSpectrum {
    /// Builds a spectrum from arbitrary nonnegative weights: sorts them,
    /// clips entries below [`CLIP_THRESHOLD`] and renormalizes to unit sum.
    pub fn from_weights(mut weights: Vec<f64>, cut: usize) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < -CLIP_THRESHOLD) {
            return domain("spectrum weights must be finite and nonnegative");
        }
        weights.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
        if total <= 0.0 {
            return domain("spectrum has zero total weight");
        }
        let (kept, dropped): (Vec<f64>, Vec<f64>) =
            weights.into_iter().map(|w| w.max(0.0) / total).partition(|&w| w >= CLIP_THRESHOLD);
        let kept_sum: f64 = kept.iter().sum();
        let values = kept.into_iter().map(|w| w / kept_sum).collect();
        Ok(Self { values, cut, clipped_mass: dropped.iter().sum() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cut(&self) -> usize {
        self.cut
    }

    /// Total (normalized) weight removed by clipping.
    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    /// `Λ_1`.
    pub fn largest(&self) -> f64 {
        self.values[0]
    }
}

fn amplitude_matrix(psi: &StateVector, cut: usize) -> Result<DMatrix<num_complex::Complex64>> {
    let cfg = psi.config();
    if cut == 0 || cut >= cfg.sites() {
        return domain(format!("cut {cut} out of range 1..={}", cfg.sites() - 1));
    }
    let rows = cfg.dim().pow(cut as u32);
    let cols = cfg.dim().pow((cfg.sites() - cut) as u32);
    Ok(DMatrix::from_row_slice(rows, cols, psi.amplitudes()))
}

/// Raw singular values (Schmidt coefficients `λ_i`) across the cut after site
/// `cut`, descending and unclipped. Works for unnormalized vectors too.
pub fn schmidt_coefficients(psi: &StateVector, cut: usize) -> Result<Vec<f64>> {
    let m = amplitude_matrix(psi, cut)?;
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Spectrum of `ρ_A` for `A = sites 1..=cut`.
pub fn schmidt_spectrum(psi: &StateVector, cut: usize) -> Result<SchmidtSpectrum> {
    if !psi.is_normalized() {
        return domain("Schmidt spectrum requires a normalized state");
    }
    let sv = schmidt_coefficients(psi, cut)?;
    SchmidtSpectrum::from_weights(sv.into_iter().map(|s| s * s).collect(), cut)
}

/// `log Σ Λ_i^α`, evaluated relative to `Λ_1` to avoid underflow.
fn log_power_sum(spec: &SchmidtSpectrum, alpha: f64) -> f64 {
    let top = spec.largest();
    let rest: f64 = spec.values.iter().map(|&l| (l / top).powf(alpha)).sum();
    alpha * top.ln() + rest.ln()
}

/// `R_α = log(Σ Λ_i^α) / (1 - α)` in nats.
pub fn renyi_entropy(spec: &SchmidtSpectrum, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return domain(format!("Rényi index must be positive and finite, got {alpha}"));
    }
    if alpha == 1.0 {
        return domain("α = 1 is the von Neumann entropy; use von_neumann");
    }
    if (alpha - 1.0).abs() < VON_NEUMANN_WINDOW {
        return von_neumann(spec);
    }
    if spec.values.is_empty() {
        return domain("empty spectrum");
    }
    Ok((log_power_sum(spec, alpha) / (1.0 - alpha)).max(0.0))
}

/// `R_∞ = -log Λ_1`.
pub fn min_entropy(spec: &SchmidtSpectrum) -> Result<f64> {
    match spec.values.first() {
        Some(&top) => Ok(-top.ln()),
        None => domain("empty spectrum"),
    }
}

pub fn von_neumann(spec: &SchmidtSpectrum) -> Result<f64> {
    if spec.values.is_empty() {
        return domain("empty spectrum");
    }
    Ok(spec.values.iter().filter(|&&l| l > 0.0).map(|&l| -l * l.ln()).sum::<f64>().max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenyiBounds {
    /// `R_∞`
    pub lhs: f64,
    /// `R_α`
    pub mid: f64,
    /// `α/(α-1) R_∞`
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `R_∞ <= R_α <= α/(α-1) R_∞` for `α > 1`.
pub fn check_renyi_bounds(spec: &SchmidtSpectrum, alpha: f64) -> Result<RenyiBounds> {
    if alpha.is_nan() || alpha <= 1.0 {
        return domain(format!("Rényi bounds need α > 1, got {alpha}"));
    }
    let lhs = min_entropy(spec)?;
    let mid = renyi_entropy(spec, alpha)?;
    let rhs = alpha / (alpha - 1.0) * lhs;
    let holds = lhs <= mid + BOUNDS_SLACK && mid <= rhs + BOUNDS_SLACK;
    Ok(RenyiBounds { lhs, mid, rhs, holds })
}

/// Largest overlap of the state with any normalized state of Schmidt rank
/// at most `rank`: `sqrt(Σ_{i<=rank} Λ_i)`.
pub fn eckart_young_overlap(spec: &SchmidtSpectrum, rank: usize) -> Result<f64> {
    if rank < 1 {
        return domain("Schmidt rank must be at least 1");
    }
    Ok(spec.values.iter().take(rank).sum::<f64>().sqrt().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::state::{product_state, ChainConfig, LocalLabel};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;

    fn spec(values: &[f64]) -> SchmidtSpectrum {
        SchmidtSpectrum::from_weights(values.to_vec(), 1).unwrap()
    }

    /// Dense partial trace over B followed by Hermitian eigenvalues.
    fn partial_trace_eigs(psi: &StateVector, cut: usize) -> Vec<f64> {
        let cfg = psi.config();
        let da = cfg.dim().pow(cut as u32);
        let db = cfg.dim().pow((cfg.sites() - cut) as u32);
        let a = psi.amplitudes();
        let rho =
            DMatrix::from_fn(da, da, |i, j| (0..db).map(|k| a[i * db + k] * a[j * db + k].conj()).sum::<Complex64>());
        let mut eigs: Vec<f64> = rho.symmetric_eigenvalues().iter().copied().collect();
        eigs.sort_by(|x, y| y.total_cmp(x));
        eigs
    }

    #[test]
    fn product_and_bell_spectra() {
        let cfg = ChainConfig::new(4, 2, 0).unwrap();
        let psi =
            product_state(&[LocalLabel::X(1), LocalLabel::Z(0), LocalLabel::X(0), LocalLabel::Z(1)], cfg).unwrap();
        for cut in 1..4 {
            assert_eq!(schmidt_spectrum(&psi, cut).unwrap().values(), &[1.0]);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell_cfg = ChainConfig::new(2, 2, 0).unwrap();
        let z = Complex64::new(0.0, 0.0);
        let bell =
            StateVector::from_amplitudes(vec![Complex64::new(h, 0.0), z, z, Complex64::new(h, 0.0)], bell_cfg).unwrap();
        let s = schmidt_spectrum(&bell, 1).unwrap();
        assert_eq!(s.rank(), 2);
        assert!(s.values().iter().all(|v| (v - 0.5).abs() < 1e-14));
        assert!((eckart_young_overlap(&s, 1).unwrap() - h).abs() < 1e-14);
        assert!((eckart_young_overlap(&s, 2).unwrap() - 1.0).abs() < 1e-14);
        assert!(eckart_young_overlap(&s, 0).is_err());
        assert!(schmidt_spectrum(&bell, 0).is_err());
        assert!(schmidt_spectrum(&bell, 2).is_err());
    }

    #[test]
    fn spectrum_matches_partial_trace() {
        let cfg = ChainConfig::new(6, 2, 0).unwrap();
        let mut r = rng::stream(21, &[]);
        for _ in 0..5 {
            let psi = StateVector::random(cfg, &mut r);
            for cut in 1..6 {
                let s = schmidt_spectrum(&psi, cut).unwrap();
                let eigs = partial_trace_eigs(&psi, cut);
                for (i, e) in eigs.iter().enumerate() {
                    let v = s.values().get(i).copied().unwrap_or(0.0);
                    assert!((v - e).abs() < 1e-10);
                }
                assert!((s.values().iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn local_unitaries_leave_spectrum_invariant() {
        use crate::gates::{apply_gate, ChargeConservingGate};
        let cfg = ChainConfig::new(6, 3, 0).unwrap();
        let mut r = rng::stream(22, &[]);
        let psi = StateVector::random(cfg, &mut r);
        let before = schmidt_spectrum(&psi, 3).unwrap();
        let mut phi = psi.clone();
        for bond in [1, 2, 4, 5] {
            phi = apply_gate(&phi, &ChargeConservingGate::sample(3, &mut r).unwrap(), bond).unwrap();
        }
        let after = schmidt_spectrum(&phi, 3).unwrap();
        assert_eq!(before.rank(), after.rank());
        for (a, b) in before.values().iter().zip(after.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn entropy_values() {
        let one = spec(&[1.0]);
        for alpha in [0.5, 2.0, 7.0] {
            assert_eq!(renyi_entropy(&one, alpha).unwrap(), 0.0);
        }
        assert_eq!(min_entropy(&one).unwrap(), 0.0);
        assert_eq!(von_neumann(&one).unwrap(), 0.0);
        for r in [2usize, 5, 16] {
            let u = spec(&vec![1.0 / r as f64; r]);
            let lr = (r as f64).ln();
            for alpha in [0.3, 2.0, 9.0] {
                assert!((renyi_entropy(&u, alpha).unwrap() - lr).abs() < 1e-12);
            }
            assert!((min_entropy(&u).unwrap() - lr).abs() < 1e-12);
            assert!((von_neumann(&u).unwrap() - lr).abs() < 1e-12);
        }
        let s = spec(&[0.7, 0.3]);
        assert!((renyi_entropy(&s, 2.0).unwrap() + 0.58f64.ln()).abs() < 1e-14);
        assert!(renyi_entropy(&s, 1.0).is_err());
        assert!(renyi_entropy(&s, 0.0).is_err());
        assert!(renyi_entropy(&s, -1.0).is_err());
        let vn = von_neumann(&s).unwrap();
        assert_eq!(renyi_entropy(&s, 1.0 + 1e-7).unwrap(), vn);
        for alpha in [1.0 - 1e-4, 1.0 + 1e-4] {
            assert!((renyi_entropy(&s, alpha).unwrap() - vn).abs() < 1e-3);
        }
        assert!((LogBase::Two.from_nats(2f64.ln()) - 1.0).abs() < 1e-15);
        assert!((LogBase::Other(10.0).from_nats(10f64.ln()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clipping() {
        let s = SchmidtSpectrum::from_weights(vec![1e-16, 0.5, 0.5 - 1e-16, -1e-17], 2).unwrap();
        assert_eq!(s.rank(), 2);
        assert!(s.clipped_mass() > 0.0 && s.clipped_mass() < 1e-15);
        assert_eq!(s.cut(), 2);
        assert!(SchmidtSpectrum::from_weights(vec![0.0], 1).is_err());
        assert!(SchmidtSpectrum::from_weights(vec![-0.5, 1.0], 1).is_err());
    }

    #[test]
    fn renyi_bounds_edge_cases() {
        let c = check_renyi_bounds(&spec(&[1.0]), 2.0).unwrap();
        assert_eq!((c.lhs, c.mid, c.rhs, c.holds), (0.0, 0.0, 0.0, true));
        let u = spec(&[0.25; 4]);
        let c = check_renyi_bounds(&u, 3.0).unwrap();
        assert!((c.lhs - c.mid).abs() < 1e-12 && c.rhs >= c.mid && c.holds);
        assert!(check_renyi_bounds(&u, 1.0).is_err());
    }

    fn dirichlet<R: Rng>(r: &mut R, n: usize) -> Vec<f64> {
        // flat Dirichlet via normalized exponentials
        (0..n).map(|_| -(1.0 - r.random::<f64>()).ln()).collect()
    }

    #[test]
    fn large_alpha_approaches_min_entropy() {
        let mut r = rng::stream(23, &[]);
        // R_200 - R_inf lies in [0, ln(rank) / 199], below 1e-2 up to rank 7
        for _ in 0..200 {
            let n = r.random_range(1..=7);
            let s = SchmidtSpectrum::from_weights(dirichlet(&mut r, n), 1).unwrap();
            let gap = renyi_entropy(&s, 200.0).unwrap() - min_entropy(&s).unwrap();
            assert!(gap.abs() < 1e-2, "gap {gap}");
        }
        for _ in 0..200 {
            let n = r.random_range(8..64);
            let s = SchmidtSpectrum::from_weights(dirichlet(&mut r, n), 1).unwrap();
            let gap = renyi_entropy(&s, 200.0).unwrap() - min_entropy(&s).unwrap();
            assert!(gap >= -1e-12 && gap <= (s.rank() as f64).ln() / 199.0 + 1e-12, "gap {gap}");
        }
    }

    proptest! {
        #[test]
        fn renyi_bounds_and_monotonicity(seed in any::<u64>(), n in 1usize..40) {
            let mut r = rng::stream(seed, &[]);
            let s = SchmidtSpectrum::from_weights(dirichlet(&mut r, n), 1).unwrap();
            let mut prev = f64::INFINITY;
            for alpha in [0.5, 1.1, 1.5, 2.0, 5.0, 50.0] {
                let ra = renyi_entropy(&s, alpha).unwrap();
                prop_assert!(ra <= prev + 1e-10);
                prev = ra;
                if alpha > 1.0 {
                    prop_assert!(check_renyi_bounds(&s, alpha).unwrap().holds);
                }
            }
        }
    }
}
