//! Two-site gates that conserve `Q_i + Q_{i+1}`.
//!
//! A gate is stored as one unitary block per total-charge sector. Within a
//! sector the basis pairs `(k1, k2)` are ordered lexicographically by `k1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::state::StateVector;

/// Unitarity tolerance for blocks loaded from outside.
pub const UNITARITY_TOL: f64 = 1e-10;

/// States at least this large are updated with rayon.
const PARALLEL_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChargeSector {
    pub charge: usize,
    pub basis: Vec<(usize, usize)>,
}

impl ChargeSector {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

pub fn sector_decomposition(d: usize) -> Result<Vec<ChargeSector>> {
    if d < 2 {
        return domain(format!("local dimension d must be >= 2, got {d}"));
    }
    Ok((0..=2 * (d - 1))
        .map(|charge| {
            let lo = charge.saturating_sub(d - 1);
            let hi = charge.min(d - 1);
            ChargeSector { charge, basis: (lo..=hi).map(|k1| (k1, charge - k1)).collect() }
        })
        .collect())
}

/// Haar-distributed `n x n` unitary: QR of a complex Ginibre matrix with the
/// columns of `Q` rephased by the diagonal of `R`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DMatrix<Complex64>> {
    if n < 1 {
        return domain("Haar unitary needs n >= 1");
    }
    let g = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) };
        q.column_mut(j).iter_mut().for_each(|x| *x *= phase);
    }
    Ok(q)
}

/// `max |(M^dagger M - I)_ij|`.
pub fn unitarity_error(m: &DMatrix<Complex64>) -> f64 {
    let prod = m.adjoint() * m;
    let n = m.nrows();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            err = err.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    err
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargeConservingGate {
    d: usize,
    sectors: Vec<ChargeSector>,
    blocks: Vec<DMatrix<Complex64>>,
}

impl ChargeConservingGate {
    pub fn identity(d: usize) -> Result<Self> {
        let sectors = sector_decomposition(d)?;
        let blocks = sectors.iter().map(|s| DMatrix::identity(s.dim(), s.dim())).collect();
        Ok(Self { d, sectors, blocks })
    }

    /// One independent Haar unitary per sector.
    pub fn sample<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Self> {
        let sectors = sector_decomposition(d)?;
        let blocks = sectors.iter().map(|s| haar_unitary(s.dim(), rng)).collect::<Result<Vec<_>>>()?;
        Ok(Self { d, sectors, blocks })
    }

    /// Builds a gate from explicit blocks, checking shapes and unitarity.
    pub fn from_blocks(d: usize, blocks: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let sectors = sector_decomposition(d)?;
        if blocks.len() != sectors.len() {
            return domain(format!("expected {} blocks for d = {d}, got {}", sectors.len(), blocks.len()));
        }
        for (s, b) in sectors.iter().zip(&blocks) {
            if b.nrows() != s.dim() || b.ncols() != s.dim() {
                return domain(format!(
                    "block for charge {} must be {}x{}, got {}x{}",
                    s.charge,
                    s.dim(),
                    s.dim(),
                    b.nrows(),
                    b.ncols()
                ));
            }
            let err = unitarity_error(b);
            if err > UNITARITY_TOL {
                return domain(format!("block for charge {} is not unitary (error {err:e})", s.charge));
            }
        }
        Ok(Self { d, sectors, blocks })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sectors(&self) -> &[ChargeSector] {
        &self.sectors
    }

    pub fn blocks(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }

    pub fn adjoint(&self) -> Self {
        Self { d: self.d, sectors: self.sectors.clone(), blocks: self.blocks.iter().map(|b| b.adjoint()).collect() }
    }

    /// `<00|U|00>`, the 1x1 block of the zero-charge sector.
    pub fn phase_00(&self) -> Complex64 {
        self.blocks[0][(0, 0)]
    }

    /// Dense `d^2 x d^2` matrix in the standard pair basis `k1 * d + k2`.
    pub fn dense(&self) -> DMatrix<Complex64> {
        let d2 = self.d * self.d;
        let mut m = DMatrix::zeros(d2, d2);
        for (s, b) in self.sectors.iter().zip(&self.blocks) {
            for (r, &(r1, r2)) in s.basis.iter().enumerate() {
                for (c, &(c1, c2)) in s.basis.iter().enumerate() {
                    m[(r1 * self.d + r2, c1 * self.d + c2)] = b[(r, c)];
                }
            }
        }
        m
    }

    pub fn unitarity_error(&self) -> f64 {
        self.blocks.iter().map(unitarity_error).fold(0.0, f64::max)
    }

    pub fn to_record(&self, layer: usize, bond: usize) -> GateRecord {
        GateRecord {
            d: self.d,
            layer,
            bond,
            blocks: self
                .blocks
                .iter()
                .map(|b| {
                    // row-major
                    (0..b.nrows()).flat_map(|r| (0..b.ncols()).map(move |c| [b[(r, c)].re, b[(r, c)].im])).collect()
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &GateRecord) -> Result<Self> {
        let sectors = sector_decomposition(rec.d)?;
        if rec.blocks.len() != sectors.len() {
            return domain(format!("gate record has {} blocks, expected {}", rec.blocks.len(), sectors.len()));
        }
        let blocks = sectors
            .iter()
            .zip(&rec.blocks)
            .map(|(s, flat)| {
                let n = s.dim();
                if flat.len() != n * n {
                    return domain(format!(
                        "block for charge {} has {} entries, expected {}",
                        s.charge,
                        flat.len(),
                        n * n
                    ));
                }
                Ok(DMatrix::from_row_iterator(n, n, flat.iter().map(|&[re, im]| Complex64::new(re, im))))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_blocks(rec.d, blocks)
    }

    /// Applies the gate to every fiber of a chunk of `d^2 * low` amplitudes,
    /// where the chunk index runs over the sites left of the bond and `low`
    /// is the stride of the right bond site.
    fn apply_to_chunk(&self, chunk: &mut [Complex64], low: usize, buf: &mut Vec<Complex64>) {
        let d = self.d;
        for l in 0..low {
            for (s, b) in self.sectors.iter().zip(&self.blocks) {
                let n = s.dim();
                if n == 1 {
                    let (k1, k2) = s.basis[0];
                    chunk[(k1 * d + k2) * low + l] *= b[(0, 0)];
                    continue;
                }
                buf.clear();
                buf.extend(s.basis.iter().map(|&(k1, k2)| chunk[(k1 * d + k2) * low + l]));
                for (r, &(k1, k2)) in s.basis.iter().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (c, v) in buf.iter().enumerate() {
                        acc += b[(r, c)] * v;
                    }
                    chunk[(k1 * d + k2) * low + l] = acc;
                }
            }
        }
    }

    /// In-place application on the raw amplitudes of an `n`-site chain,
    /// acting on sites `bond` and `bond + 1` (1-based).
    pub(crate) fn apply_in_place(&self, amps: &mut [Complex64], sites: usize, bond: usize) {
        let d = self.d;
        let low = d.pow((sites - bond - 1) as u32);
        let chunk_len = d * d * low;
        if amps.len() >= PARALLEL_THRESHOLD {
            amps.par_chunks_mut(chunk_len).for_each_init(Vec::new, |buf, chunk| self.apply_to_chunk(chunk, low, buf));
        } else {
            let mut buf = Vec::with_capacity(d);
            for chunk in amps.chunks_mut(chunk_len) {
                self.apply_to_chunk(chunk, low, &mut buf);
            }
        }
    }
}

pub(crate) fn check_bond(gate: &ChargeConservingGate, psi: &StateVector, bond: usize) -> Result<()> {
    let cfg = psi.config();
    if bond == 0 || bond >= cfg.sites() {
        return domain(format!("bond {bond} out of range 1..={}", cfg.sites() - 1));
    }
    if gate.d() != cfg.dim() {
        return domain(format!("gate has d = {}, state has d = {}", gate.d(), cfg.dim()));
    }
    Ok(())
}

/// `(I ⊗ g ⊗ I) psi` with `g` on sites `bond, bond + 1`.
pub fn apply_gate(psi: &StateVector, gate: &ChargeConservingGate, bond: usize) -> Result<StateVector> {
    check_bond(gate, psi, bond)?;
    let mut amps = psi.amplitudes().to_vec();
    gate.apply_in_place(&mut amps, psi.config().sites(), bond);
    Ok(StateVector::from_parts(amps, *psi.config(), psi.is_normalized()))
}

pub fn gate_phase_00(gate: &ChargeConservingGate) -> Complex64 {
    gate.phase_00()
}

/// JSON audit record of one gate; blocks are row-major `[re, im]` lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub d: usize,
    pub layer: usize,
    pub bond: usize,
    pub blocks: Vec<Vec<[f64; 2]>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::state::{ChainConfig, StateVector};

    fn total_charge(psi: &StateVector) -> f64 {
        (1..=psi.config().sites()).map(|s| psi.charge_expectation(s).unwrap()).sum()
    }

    /// Full `d^N x d^N` operator `I ⊗ g ⊗ I` by Kronecker products.
    fn dense_embedding(g: &ChargeConservingGate, sites: usize, bond: usize) -> DMatrix<Complex64> {
        let d = g.d();
        let left = DMatrix::<Complex64>::identity(d.pow(bond as u32 - 1), d.pow(bond as u32 - 1));
        let right_dim = d.pow((sites - bond - 1) as u32);
        let right = DMatrix::<Complex64>::identity(right_dim, right_dim);
        left.kronecker(&g.dense()).kronecker(&right)
    }

    #[test]
    fn sector_dims() {
        let dims = |d| sector_decomposition(d).unwrap().iter().map(|s| s.dim()).collect::<Vec<_>>();
        assert_eq!(dims(2), vec![1, 2, 1]);
        assert_eq!(dims(3), vec![1, 2, 3, 2, 1]);
        for d in 2..=6 {
            let secs = sector_decomposition(d).unwrap();
            assert_eq!(secs.len(), 2 * d - 1);
            assert_eq!(secs.iter().map(|s| s.dim()).sum::<usize>(), d * d);
            for s in &secs {
                assert_eq!(s.dim(), d - (s.charge as isize - (d as isize - 1)).unsigned_abs());
                for &(a, b) in &s.basis {
                    assert_eq!(a + b, s.charge);
                    assert!(s.basis.contains(&(b, a)));
                }
                assert!(s.basis.windows(2).all(|w| w[0].0 < w[1].0));
            }
        }
        assert!(sector_decomposition(1).is_err());
    }

    #[test]
    fn haar_basic() {
        let mut rng = rng::stream(11, &[]);
        let u = haar_unitary(1, &mut rng).unwrap();
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-15);
        for n in 1..=6 {
            let u = haar_unitary(n, &mut rng).unwrap();
            assert!(unitarity_error(&u) < 1e-12);
        }
        assert!(haar_unitary(0, &mut rng).is_err());
    }

    #[test]
    fn haar_second_moment() {
        // E|U_ab|^2 = 1/n for every entry
        let mut rng = rng::stream(12, &[]);
        let draws = 20_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            acc += haar_unitary(2, &mut rng).unwrap()[(0, 0)].norm_sqr();
        }
        assert!((acc / draws as f64 - 0.5).abs() < 0.02);

        for n in [3usize, 4] {
            let draws = 4000;
            let mut sum = DMatrix::<f64>::zeros(n, n);
            let mut sum2 = DMatrix::<f64>::zeros(n, n);
            for _ in 0..draws {
                let u = haar_unitary(n, &mut rng).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        let p = u[(i, j)].norm_sqr();
                        sum[(i, j)] += p;
                        sum2[(i, j)] += p * p;
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let mean = sum[(i, j)] / draws as f64;
                    let var = sum2[(i, j)] / draws as f64 - mean * mean;
                    let se = (var / draws as f64).sqrt();
                    assert!((mean - 1.0 / n as f64).abs() < 3.0 * se + 1e-12, "n={n} ({i},{j}) mean={mean}");
                }
            }
        }
    }

    #[test]
    fn sampled_gate_structure() {
        let mut rng = rng::stream(13, &[]);
        for d in 2..=4 {
            for _ in 0..50 {
                let g = ChargeConservingGate::sample(d, &mut rng).unwrap();
                let m = g.dense();
                assert!(unitarity_error(&m) < 1e-12);
                for r in 0..d * d {
                    for c in 0..d * d {
                        if (r / d + r % d) != (c / d + c % d) {
                            assert_eq!(m[(r, c)], Complex64::new(0.0, 0.0));
                        }
                    }
                }
                // [G, Q1 + Q2] = 0
                let q = DMatrix::<Complex64>::from_diagonal(&nalgebra::DVector::from_fn(d * d, |i, _| {
                    Complex64::new((i / d + i % d) as f64, 0.0)
                }));
                let comm = &m * &q - &q * &m;
                assert!(comm.iter().all(|x| x.norm() < 1e-12));
                assert!((g.phase_00().norm() - 1.0).abs() < 1e-12);
                assert_eq!(g.phase_00(), m[(0, 0)]);
            }
        }
    }

    #[test]
    fn phase_00_is_unimodular() {
        let mut rng = rng::stream(17, &[]);
        assert_eq!(gate_phase_00(&ChargeConservingGate::identity(3).unwrap()), Complex64::new(1.0, 0.0));
        for _ in 0..1000 {
            let g = ChargeConservingGate::sample(2, &mut rng).unwrap();
            assert!((gate_phase_00(&g).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn middle_block_moment_d2() {
        // <01|U|01> is the (0,0) entry of a 2x2 Haar block
        let mut rng = rng::stream(14, &[]);
        let draws = 20_000;
        let acc: f64 =
            (0..draws).map(|_| ChargeConservingGate::sample(2, &mut rng).unwrap().dense()[(1, 1)].norm_sqr()).sum();
        assert!((acc / draws as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn apply_matches_dense_oracle() {
        let mut rng = rng::stream(15, &[]);
        for d in [2, 3] {
            let cfg = ChainConfig::new(4, d, 0).unwrap();
            for bond in 1..=3 {
                let psi = StateVector::random(cfg, &mut rng);
                let g = ChargeConservingGate::sample(d, &mut rng).unwrap();
                let out = apply_gate(&psi, &g, bond).unwrap();
                let dense = dense_embedding(&g, 4, bond);
                let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
                let expect = dense * v;
                for (a, b) in out.amplitudes().iter().zip(expect.iter()) {
                    assert!((a - b).norm() < 1e-12);
                }
                assert!((out.norm() - 1.0).abs() < 1e-12);
                assert!((total_charge(&out) - total_charge(&psi)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identity_and_errors() {
        let cfg = ChainConfig::new(4, 3, 0).unwrap();
        let psi = StateVector::random(cfg, &mut rng::stream(16, &[]));
        let id = ChargeConservingGate::identity(3).unwrap();
        assert_eq!(apply_gate(&psi, &id, 2).unwrap().amplitudes(), psi.amplitudes());
        assert!(apply_gate(&psi, &id, 0).is_err());
        assert!(apply_gate(&psi, &id, 4).is_err());
        let g2 = ChargeConservingGate::identity(2).unwrap();
        assert!(apply_gate(&psi, &g2, 1).is_err());
    }

    #[test]
    fn adjoint_inverts() {
        let mut rng = rng::stream(18, &[]);
        let cfg = ChainConfig::new(6, 3, 0).unwrap();
        let psi = StateVector::random(cfg, &mut rng);
        let g = ChargeConservingGate::sample(3, &mut rng).unwrap();
        let back = apply_gate(&apply_gate(&psi, &g, 3).unwrap(), &g.adjoint(), 3).unwrap();
        for (a, b) in back.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn parallel_path_matches_dense_path() {
        // 2^16 amplitudes takes the rayon branch
        let mut rng = rng::stream(19, &[]);
        let cfg = ChainConfig::new(16, 2, 0).unwrap();
        let psi = StateVector::random(cfg, &mut rng);
        let g = ChargeConservingGate::sample(2, &mut rng).unwrap();
        let out = apply_gate(&psi, &g, 7).unwrap();
        let mut buf = Vec::new();
        let mut seq = psi.amplitudes().to_vec();
        let low = 2usize.pow(16 - 8);
        for chunk in seq.chunks_mut(4 * low) {
            g.apply_to_chunk(chunk, low, &mut buf);
        }
        assert_eq!(out.amplitudes(), &seq[..]);
    }

    #[test]
    fn record_round_trip_is_bit_exact() {
        let mut rng = rng::stream(20, &[]);
        for d in 2..=4 {
            let g = ChargeConservingGate::sample(d, &mut rng).unwrap();
            let rec = g.to_record(3, 5);
            let json = serde_json::to_string(&rec).unwrap();
            let back: GateRecord = serde_json::from_str(&json).unwrap();
            assert_eq!(back, rec);
            let g2 = ChargeConservingGate::from_record(&back).unwrap();
            assert_eq!(g2, g);
        }
        let mut bad = ChargeConservingGate::identity(2).unwrap().to_record(0, 1);
        bad.blocks[1][0] = [2.0, 0.0];
        assert!(ChargeConservingGate::from_record(&bad).is_err());
        bad.blocks.pop();
        assert!(ChargeConservingGate::from_record(&bad).is_err());
    }
}
