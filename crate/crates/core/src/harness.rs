//! Finite-size certificates for the entanglement bound.
//!
//! For one circuit realization and one random X-basis product state
//! `psi_ini`, the harness builds `psi0` (central region reset to `|0>`),
//! evolves `psi_ini` and `psi0` under `U` and `psi0` under the modified
//! circuit `V`, and records at every time the chain of inequalities that
//! bounds `R_α` at the middle cut:
//!
//! * (a) `|<psi0|psi_ini>| = |<U psi0, U psi_ini>| = d^(-m/2)`
//! * (b) `|<V psi0, U psi_ini>| >= d^(-m/2) - ||Delta_t||`
//! * (c) `λ_1 >= |<V psi0, U psi_ini>|` since `V psi0` has Schmidt rank 1
//! * (d) `R_∞ <= R_α <= -(2α/(α-1)) ln λ_1`
//! * (e) `R_α <= -(2α/(α-1)) ln max(v_overlap, d^(-m/2) - ||Delta_t||)`
//!
//! plus the telescoping estimate `||Delta_t|| <= 2 Σ_{τ<t} ||(1-P) U(τ,0) psi0||`.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{BrickworkCircuit, ModifiedCircuit};
use crate::entanglement::{min_entropy, renyi_entropy, schmidt_coefficients, schmidt_spectrum};
use crate::error::{domain, Error, Result};
use crate::output::fmt_f64;
use crate::rng;
use crate::state::{inner_product, product_state, project_local_zero, ChainConfig, LocalLabel, StateVector};
use crate::transport::{central_region, check_width, realization_seed};

/// Default slack on every certified inequality.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

/// Tolerance on the exact overlap identities (a).
pub const OVERLAP_TOL: f64 = 1e-12;

/// Largest family enumerated by [`enumerate_s_prime`].
pub const S_PRIME_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WidthMode {
    Fixed(usize),
    /// `m(t)` = smallest even integer `>= c sqrt(t ln t)`, at least 2.
    Scaling {
        c: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub config: ChainConfig,
    pub depth: usize,
    pub mode: WidthMode,
    pub alpha: f64,
    pub realizations: usize,
    pub p_degree: u32,
    pub slack: f64,
}

impl ExperimentSpec {
    pub fn new(config: ChainConfig, depth: usize, mode: WidthMode, alpha: f64) -> Result<Self> {
        let spec = Self { config, depth, mode, alpha, realizations: 1, p_degree: 2, slack: CERTIFICATE_SLACK };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_realizations(mut self, n: usize) -> Self {
        self.realizations = n;
        self
    }

    pub fn with_p_degree(mut self, p: u32) -> Self {
        self.p_degree = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.config.sites();
        if n % 4 != 2 || n < 6 {
            return domain(format!("N must satisfy N = 2 (mod 4) and N >= 6 so that N/2 is odd, got {n}"));
        }
        if !self.alpha.is_finite() || self.alpha <= 1.0 {
            return domain(format!("Rényi index must be finite and > 1, got {}", self.alpha));
        }
        if self.realizations < 1 {
            return domain("at least one realization is required");
        }
        match self.mode {
            WidthMode::Fixed(m) => check_width(n, m),
            WidthMode::Scaling { c } if !c.is_finite() || c <= 0.0 => {
                domain(format!("scaling coefficient must be positive, got {c}"))
            }
            WidthMode::Scaling { .. } => Ok(()),
        }
    }

    /// Central width used at time `t`.
    pub fn width_at(&self, t: usize) -> usize {
        match self.mode {
            WidthMode::Fixed(m) => m,
            WidthMode::Scaling { c } => scaling_width(c, t, self.config.sites()),
        }
    }
}

/// Smallest even integer `>= c sqrt(t ln t)` (2 for `t <= 1`), capped at
/// `N - 2`.
pub fn scaling_width(c: f64, t: usize, sites: usize) -> usize {
    let raw = if t <= 1 {
        2
    } else {
        let x = c * (t as f64 * (t as f64).ln()).sqrt();
        let m = x.ceil() as usize;
        (m + m % 2).max(2)
    };
    raw.min(sites - 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofCertificate {
    pub realization: usize,
    pub t: usize,
    pub m: usize,
    pub alpha: f64,
    pub overlap0: f64,
    pub overlap_t: f64,
    pub delta_norm: f64,
    /// `2 Σ_{τ<t} ||(1-P) U(τ,0) psi0||`
    pub telescoping_bound: f64,
    pub v_overlap: f64,
    /// Second Schmidt coefficient of `V(t,0) psi0` at the middle cut.
    pub v_second_schmidt: f64,
    /// Largest Schmidt coefficient `λ_1` of `U(t,0) psi_ini`.
    pub lambda1: f64,
    /// `Λ_1 = λ_1^2`.
    pub big_lambda1: f64,
    pub r_alpha: f64,
    pub r_inf: f64,
    pub lambda1_lower: f64,
    pub bound: f64,
    /// `<Q_{N/2}>` in `U(t,0) psi0`.
    pub q_mid: f64,
    /// Slacks of (a)..(e) and the telescoping estimate; nonnegative when the
    /// inequality holds exactly. (a) reports `-max deviation`.
    pub slacks: [f64; 6],
    pub holds: bool,
}

struct WidthTrack {
    m: usize,
    psi0: StateVector,
    u0: StateVector,
    v0: StateVector,
    telescoping: f64,
}

fn middle_projection_defect(psi: &StateVector) -> Result<f64> {
    let mid = psi.config().sites() / 2;
    let (_, w) = project_local_zero(psi, &[mid, mid + 1])?;
    Ok((psi.norm_sqr() - w).max(0.0).sqrt())
}

/// Random X-basis labels of `psi_ini` for one realization.
pub fn initial_labels(spec: &ExperimentSpec, realization: usize) -> Vec<LocalLabel> {
    use rand::Rng;
    let rs = realization_seed(spec.config.seed(), realization);
    let mut r = rng::stream(rs, &[rng::TAG_LABELS]);
    let d = spec.config.dim();
    (0..spec.config.sites()).map(|_| LocalLabel::X(r.random_range(0..d))).collect()
}

/// The circuit of one realization.
pub fn realization_circuit(spec: &ExperimentSpec, realization: usize) -> Result<Arc<BrickworkCircuit>> {
    let rs = realization_seed(spec.config.seed(), realization);
    Ok(Arc::new(BrickworkCircuit::sample(spec.config, spec.depth, rng::derive_seed(rs, &[rng::TAG_CIRCUIT]))?))
}

/// `labels` with the central `m` sites replaced by `|0>`.
pub fn zeroed_center(labels: &[LocalLabel], m: usize) -> Vec<LocalLabel> {
    let center = central_region(labels.len(), m);
    labels.iter().enumerate().map(|(i, &l)| if center.contains(&(i + 1)) { LocalLabel::Z(0) } else { l }).collect()
}

/// Certificates for `t = 0..=depth` on one realization.
pub fn run_instance(spec: &ExperimentSpec, realization: usize) -> Result<Vec<ProofCertificate>> {
    spec.validate()?;
    let circuit = realization_circuit(spec, realization)?;
    let labels = initial_labels(spec, realization);
    run_instance_with(spec, realization, circuit, &labels)
}

/// As [`run_instance`] with an explicit circuit and initial labels.
pub fn run_instance_with(
    spec: &ExperimentSpec,
    realization: usize,
    circuit: Arc<BrickworkCircuit>,
    labels: &[LocalLabel],
) -> Result<Vec<ProofCertificate>> {
    spec.validate()?;
    if circuit.depth() < spec.depth {
        return domain("circuit is shallower than the experiment depth");
    }
    let cfg = spec.config;
    let modified = ModifiedCircuit::new(circuit.clone())?;
    let psi_ini = product_state(labels, cfg)?;
    let mut widths: Vec<usize> = (0..=spec.depth).map(|t| spec.width_at(t)).collect();
    widths.dedup();
    let mut tracks = widths
        .iter()
        .map(|&m| {
            check_width(cfg.sites(), m)?;
            let psi0 = product_state(&zeroed_center(labels, m), cfg)?;
            Ok(WidthTrack { m, u0: psi0.clone(), v0: psi0.clone(), psi0, telescoping: 0.0 })
        })
        .collect::<Result<Vec<_>>>()?;

    let mid = cfg.sites() / 2;
    let alpha = spec.alpha;
    let factor = 2.0 * alpha / (alpha - 1.0);
    let mut u_ini = psi_ini.clone();
    let mut out = Vec::with_capacity(spec.depth + 1);
    for t in 0..=spec.depth {
        let m = spec.width_at(t);
        let track = tracks.iter().find(|w| w.m == m).expect("width tracked");
        let expected = (cfg.dim() as f64).powf(-(m as f64) / 2.0);
        let overlap0 = inner_product(&track.psi0, &psi_ini)?.norm();
        let overlap_t = inner_product(&track.u0, &u_ini)?.norm();
        let delta_norm = track.u0.difference(&track.v0)?.norm();
        let v_overlap = inner_product(&track.v0, &u_ini)?.norm();
        let v_second_schmidt = schmidt_coefficients(&track.v0, mid)?.get(1).copied().unwrap_or(0.0);
        let spectrum = schmidt_spectrum(&u_ini, mid)?;
        let big_lambda1 = spectrum.largest();
        let lambda1 = big_lambda1.sqrt();
        let r_alpha = renyi_entropy(&spectrum, alpha)?;
        let r_inf = min_entropy(&spectrum)?;
        let lambda1_lower = v_overlap.max(expected - delta_norm);
        let bound = if lambda1_lower > 0.0 { -factor * lambda1_lower.ln() } else { f64::INFINITY };
        let q_mid = track.u0.charge_expectation(mid)?;

        let slacks = [
            -(overlap0 - expected).abs().max((overlap_t - expected).abs()),
            v_overlap - (overlap_t - delta_norm),
            lambda1 - v_overlap,
            (r_alpha - r_inf).min(-factor * lambda1.ln() - r_alpha),
            bound - r_alpha,
            track.telescoping - delta_norm,
        ];
        let holds = slacks[0] >= -OVERLAP_TOL && slacks[1..].iter().all(|&s| s >= -spec.slack);
        out.push(ProofCertificate {
            realization,
            t,
            m,
            alpha,
            overlap0,
            overlap_t,
            delta_norm,
            telescoping_bound: track.telescoping,
            v_overlap,
            v_second_schmidt,
            lambda1,
            big_lambda1,
            r_alpha,
            r_inf,
            lambda1_lower,
            bound,
            q_mid,
            slacks,
            holds,
        });

        if t < spec.depth {
            let layer = t + 1;
            u_ini = circuit.apply_layer(&u_ini, layer)?;
            for w in tracks.iter_mut() {
                w.telescoping += 2.0 * middle_projection_defect(&w.u0)?;
                w.u0 = circuit.apply_layer(&w.u0, layer)?;
                w.v0 = modified.apply_layer(&w.v0, layer)?;
            }
        }
    }
    Ok(out)
}

/// Certificates of every realization, in realization order.
pub fn run_certify(spec: &ExperimentSpec) -> Result<Vec<ProofCertificate>> {
    spec.validate()?;
    let per: Vec<Vec<ProofCertificate>> =
        (0..spec.realizations).into_par_iter().map(|r| run_instance(spec, r)).collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SPrimeReport {
    pub m: usize,
    pub t: usize,
    /// `p(t) = t^p_degree`
    pub p_value: f64,
    pub threshold: f64,
    /// `|S'| / |S|`
    pub fraction: f64,
    pub size: usize,
    pub delta_norm: f64,
    /// `Σ_S |<Delta_t|U psi>|^2`
    pub sum_sq: f64,
    pub markov_holds: bool,
    pub bessel_holds: bool,
    /// `|<Delta_t|U(t,0) psi>|` per member, in enumeration order.
    pub overlaps: Vec<f64>,
}

/// Every assignment of X labels to the central `m` sites, keeping `outer`
/// elsewhere. Enumeration is big-endian over the central digits.
pub fn s_family(outer: &[LocalLabel], d: usize, m: usize) -> Result<Vec<Vec<LocalLabel>>> {
    check_width(outer.len(), m)?;
    let size = d
        .checked_pow(m as u32)
        .filter(|&s| s <= S_PRIME_CAP)
        .ok_or_else(|| Error::ResourceCap(format!("d^m = {d}^{m} exceeds the enumeration cap {S_PRIME_CAP}")))?;
    let center: Vec<usize> = central_region(outer.len(), m).collect();
    Ok((0..size)
        .map(|idx| {
            let mut labels = outer.to_vec();
            for (j, &site) in center.iter().enumerate() {
                let digit = (idx / d.pow((m - 1 - j) as u32)) % d;
                labels[site - 1] = LocalLabel::X(digit);
            }
            labels
        })
        .collect())
}

/// Fixes the circuit and the outer labels of one realization and enumerates
/// all `d^m` central X-basis assignments at time `t`.
pub fn enumerate_s_prime(spec: &ExperimentSpec, t: usize, realization: usize) -> Result<SPrimeReport> {
    spec.validate()?;
    if t > spec.depth {
        return domain(format!("t = {t} exceeds depth {}", spec.depth));
    }
    let m = spec.width_at(t);
    let d = spec.config.dim();
    let labels = initial_labels(spec, realization);
    let family = s_family(&labels, d, m)?;
    let circuit = realization_circuit(spec, realization)?;
    let modified = ModifiedCircuit::new(circuit.clone())?;

    let psi0 = product_state(&zeroed_center(&labels, m), spec.config)?;
    let delta = circuit.evolve(&psi0, t)?.difference(&modified.evolve(&psi0, t)?)?;
    let delta_norm = delta.norm();
    // <Delta|U psi> = <U^dagger Delta|psi>
    let pulled = circuit.evolve_adjoint(&delta, t)?;
    let overlaps = family
        .iter()
        .map(|l| Ok(inner_product(&pulled, &product_state(l, spec.config)?)?.norm()))
        .collect::<Result<Vec<f64>>>()?;

    let p_value = (t as f64).powi(spec.p_degree as i32);
    let threshold = (d as f64).powf(-(m as f64) / 2.0) * delta_norm * p_value.sqrt();
    let size = family.len();
    let inside = overlaps.iter().filter(|&&o| o <= threshold).count();
    let fraction = inside as f64 / size as f64;
    let sum_sq: f64 = overlaps.iter().map(|o| o * o).sum();
    let markov_holds = p_value <= 0.0 || fraction >= 1.0 - 1.0 / p_value;
    let bessel_holds = sum_sq <= delta_norm * delta_norm + 1e-10;
    Ok(SPrimeReport {
        m,
        t,
        p_value,
        threshold,
        fraction,
        size,
        delta_norm,
        sum_sq,
        markov_holds,
        bessel_holds,
        overlaps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub realization: usize,
    pub t: usize,
    pub m: usize,
    pub r_alpha: f64,
    pub r_inf: f64,
    pub bound: f64,
    pub q_mid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub t: usize,
    pub mean_r_alpha: f64,
    pub stderr_r_alpha: f64,
    pub mean_r_inf: f64,
    pub mean_q_mid: f64,
    pub stderr_q_mid: f64,
    /// Share of realizations whose bound is below the dimension cap
    /// `(N/2) ln d`.
    pub nontrivial_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    pub summary: Vec<SweepSummary>,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn entropy_growth_sweep(spec: &ExperimentSpec) -> Result<SweepReport> {
    let certs = run_certify(spec)?;
    let records: Vec<SweepRecord> = certs
        .iter()
        .map(|c| SweepRecord {
            realization: c.realization,
            t: c.t,
            m: c.m,
            r_alpha: c.r_alpha,
            r_inf: c.r_inf,
            bound: c.bound,
            q_mid: c.q_mid,
        })
        .collect();
    let cap = (spec.config.sites() / 2) as f64 * (spec.config.dim() as f64).ln();
    let summary = (0..=spec.depth)
        .map(|t| {
            let at: Vec<&SweepRecord> = records.iter().filter(|r| r.t == t).collect();
            let ra: Vec<f64> = at.iter().map(|r| r.r_alpha).collect();
            let ri: Vec<f64> = at.iter().map(|r| r.r_inf).collect();
            let q: Vec<f64> = at.iter().map(|r| r.q_mid).collect();
            let (mean_r_alpha, stderr_r_alpha) = mean_stderr(&ra);
            let (mean_q_mid, stderr_q_mid) = mean_stderr(&q);
            SweepSummary {
                t,
                mean_r_alpha,
                stderr_r_alpha,
                mean_r_inf: mean_stderr(&ri).0,
                mean_q_mid,
                stderr_q_mid,
                nontrivial_fraction: at.iter().filter(|r| r.bound < cap).count() as f64 / at.len() as f64,
            }
        })
        .collect();
    Ok(SweepReport { records, summary })
}

/// CSV: `realization, t, m, alpha, overlap0, overlap_t, delta_norm,
/// v_overlap, lambda1, R_alpha, R_inf, bound, holds`.
pub fn write_certificates_csv<W: Write>(out: W, certs: &[ProofCertificate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "realization",
        "t",
        "m",
        "alpha",
        "overlap0",
        "overlap_t",
        "delta_norm",
        "v_overlap",
        "lambda1",
        "R_alpha",
        "R_inf",
        "bound",
        "holds",
    ])?;
    for c in certs {
        w.write_record([
            c.realization.to_string(),
            c.t.to_string(),
            c.m.to_string(),
            fmt_f64(c.alpha),
            fmt_f64(c.overlap0),
            fmt_f64(c.overlap_t),
            fmt_f64(c.delta_norm),
            fmt_f64(c.v_overlap),
            fmt_f64(c.lambda1),
            fmt_f64(c.r_alpha),
            fmt_f64(c.r_inf),
            fmt_f64(c.bound),
            c.holds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV: `realization, t, R_alpha, R_inf, bound, q_mid`.
pub fn write_sweep_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["realization", "t", "R_alpha", "R_inf", "bound", "q_mid"])?;
    for r in records {
        w.write_record([
            r.realization.to_string(),
            r.t.to_string(),
            fmt_f64(r.r_alpha),
            fmt_f64(r.r_inf),
            fmt_f64(r.bound),
            fmt_f64(r.q_mid),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Quick invariant suite on small chains.
pub fn selftest(seed: u64) -> Result<Vec<SelfTestResult>> {
    use crate::entanglement::{check_renyi_bounds, SchmidtSpectrum};
    use crate::gates::{unitarity_error, ChargeConservingGate};
    use crate::transport::condition_inequality_check;
    use rand::Rng;

    let mut results = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        results.push(SelfTestResult { name: name.to_string(), passed, detail })
    };
    let mut r = rng::stream(seed, &[0x5e1f]);

    let mut worst: f64 = 0.0;
    for d in 2..=4 {
        for _ in 0..100 {
            worst = worst.max(unitarity_error(&ChargeConservingGate::sample(d, &mut r)?.dense()));
        }
    }
    push("gate unitarity", worst <= 1e-12, format!("max |G^dag G - I| = {worst:.3e}"));

    let mut drift: f64 = 0.0;
    let mut up_vp: f64 = 0.0;
    let mut v_rank: f64 = 0.0;
    for d in [2, 3] {
        let cfg = ChainConfig::new(6, d, seed)?;
        let circuit = Arc::new(BrickworkCircuit::sample(cfg, 8, rng::derive_seed(seed, &[d as u64]))?);
        let modified = ModifiedCircuit::new(circuit.clone())?;
        let psi = StateVector::random(cfg, &mut r);
        let total = |s: &StateVector| -> Result<f64> { (1..=6).map(|i| s.charge_expectation(i)).sum() };
        let q0 = total(&psi)?;
        drift = drift.max((total(&circuit.evolve(&psi, 8)?)? - q0).abs());
        for t in 1..=8 {
            let (p, _) = project_local_zero(&StateVector::random(cfg, &mut r), &[3, 4])?;
            let a = circuit.apply_layer(&p, t)?;
            let b = modified.apply_layer(&p, t)?;
            up_vp =
                up_vp.max(a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
        }
        let labels: Vec<_> = (0..6).map(|_| LocalLabel::X(r.random_range(0..d))).collect();
        let prod = product_state(&labels, cfg)?;
        v_rank = v_rank.max(schmidt_coefficients(&modified.evolve(&prod, 8)?, 3)?[1]);
    }
    push("charge conservation", drift <= 1e-10, format!("total charge drift = {drift:.3e}"));
    push("U P = V P", up_vp <= 1e-12, format!("max deviation = {up_vp:.3e}"));
    push("V keeps halves unentangled", v_rank <= 1e-10, format!("second Schmidt value = {v_rank:.3e}"));

    let mut bounds_ok = true;
    for _ in 0..1000 {
        let n = r.random_range(1..30);
        let w: Vec<f64> = (0..n).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
        let s = SchmidtSpectrum::from_weights(w, 1)?;
        for alpha in [1.1, 1.5, 2.0, 5.0, 50.0] {
            bounds_ok &= check_renyi_bounds(&s, alpha)?.holds;
        }
    }
    push("Rényi bounds", bounds_ok, "1000 random spectra".into());

    let mut cond_ok = true;
    for d in [2, 3] {
        let cfg = ChainConfig::new(4, d, seed)?;
        for _ in 0..100 {
            let psi = StateVector::random(cfg, &mut r);
            for site in 1..=4 {
                cond_ok &= condition_inequality_check(&psi, site)?.holds;
            }
        }
    }
    push("excited weight <= charge", cond_ok, "200 random states".into());

    let spec = ExperimentSpec::new(ChainConfig::new(10, 2, seed)?, 6, WidthMode::Fixed(6), 2.0)?.with_realizations(2);
    let certs = run_certify(&spec)?;
    let bad = certs.iter().filter(|c| !c.holds).count();
    push("per-instance certificates", bad == 0, format!("{bad} of {} certificates failed", certs.len()));
    Ok(results)
}
