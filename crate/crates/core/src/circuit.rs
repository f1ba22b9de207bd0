//! Brickwork circuits on an open chain.
//!
//! Layer `t` (1-based) holds one gate per bond `b = 1..N-1`, acting on sites
//! `b, b+1`. Odd bonds form the first sublayer and are applied before the
//! even bonds. The modified circuit replaces the middle-bond gate of every
//! layer by its `<00|U|00>` phase, which leaves the two halves of the chain
//! unentangled.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gates::{ChargeConservingGate, GateRecord};
use crate::rng;
use crate::state::{ChainConfig, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub struct BrickworkCircuit {
    config: ChainConfig,
    /// `layers[t - 1][b - 1]` is the gate on bond `b` in layer `t`.
    layers: Vec<Vec<ChargeConservingGate>>,
}

impl BrickworkCircuit {
    /// Samples every gate independently. Gate `(t, b)` draws from its own
    /// stream keyed by `(key, t, b)`.
    pub fn sample(config: ChainConfig, depth: usize, key: u64) -> Result<Self> {
        let d = config.dim();
        let bonds = config.sites() - 1;
        let layers = (1..=depth)
            .map(|t| {
                (1..=bonds)
                    .map(|b| {
                        let mut r = rng::stream(key, &[rng::TAG_GATE, t as u64, b as u64]);
                        ChargeConservingGate::sample(d, &mut r)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, layers })
    }

    pub fn from_layers(config: ChainConfig, layers: Vec<Vec<ChargeConservingGate>>) -> Result<Self> {
        for (t, layer) in layers.iter().enumerate() {
            if layer.len() != config.sites() - 1 {
                return domain(format!("layer {} has {} gates, expected {}", t + 1, layer.len(), config.sites() - 1));
            }
            if let Some(g) = layer.iter().find(|g| g.d() != config.dim()) {
                return domain(format!("gate with d = {} in a d = {} circuit", g.d(), config.dim()));
            }
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn gates_per_layer(&self) -> usize {
        self.config.sites() - 1
    }

    pub fn gate(&self, layer: usize, bond: usize) -> &ChargeConservingGate {
        &self.layers[layer - 1][bond - 1]
    }

    /// Bond order within a layer: odd bonds, then even bonds.
    pub fn bond_order(sites: usize) -> impl Iterator<Item = usize> {
        (1..sites).step_by(2).chain((2..sites).step_by(2))
    }

    fn check(&self, psi: &StateVector, t: usize) -> Result<()> {
        if !psi.config().same_shape(&self.config) {
            return domain("state and circuit have different chain shapes");
        }
        if t > self.depth() {
            return domain(format!("t = {t} exceeds circuit depth {}", self.depth()));
        }
        Ok(())
    }

    pub(crate) fn apply_layer_in_place(&self, amps: &mut [Complex64], layer: usize) {
        let n = self.config.sites();
        for b in Self::bond_order(n) {
            self.gate(layer, b).apply_in_place(amps, n, b);
        }
    }

    /// `U(t, t-1)^dagger`: even sublayer first, adjoint gates.
    pub(crate) fn apply_layer_adjoint_in_place(&self, amps: &mut [Complex64], layer: usize) {
        let n = self.config.sites();
        let order: Vec<usize> = Self::bond_order(n).collect();
        for &b in order.iter().rev() {
            self.gate(layer, b).adjoint().apply_in_place(amps, n, b);
        }
    }

    /// Applies layer `layer` alone.
    pub fn apply_layer(&self, psi: &StateVector, layer: usize) -> Result<StateVector> {
        self.check(psi, layer)?;
        if layer == 0 {
            return domain("layers are numbered from 1");
        }
        let mut amps = psi.amplitudes().to_vec();
        self.apply_layer_in_place(&mut amps, layer);
        Ok(StateVector::from_parts(amps, *psi.config(), psi.is_normalized()))
    }

    /// `U(t, 0) psi`.
    pub fn evolve(&self, psi: &StateVector, t: usize) -> Result<StateVector> {
        self.check(psi, t)?;
        let mut amps = psi.amplitudes().to_vec();
        for layer in 1..=t {
            self.apply_layer_in_place(&mut amps, layer);
        }
        Ok(StateVector::from_parts(amps, *psi.config(), psi.is_normalized()))
    }

    /// `U(t, 0)^dagger psi`.
    pub fn evolve_adjoint(&self, psi: &StateVector, t: usize) -> Result<StateVector> {
        self.check(psi, t)?;
        let mut amps = psi.amplitudes().to_vec();
        for layer in (1..=t).rev() {
            self.apply_layer_adjoint_in_place(&mut amps, layer);
        }
        Ok(StateVector::from_parts(amps, *psi.config(), psi.is_normalized()))
    }

    pub fn to_record(&self) -> CircuitRecord {
        let gates = self
            .layers
            .iter()
            .enumerate()
            .flat_map(|(t, layer)| layer.iter().enumerate().map(move |(b, g)| g.to_record(t + 1, b + 1)))
            .collect();
        CircuitRecord {
            sites: self.config.sites(),
            d: self.config.dim(),
            seed: self.config.seed(),
            depth: self.depth(),
            gates,
        }
    }

    pub fn from_record(rec: &CircuitRecord) -> Result<Self> {
        let config = ChainConfig::new(rec.sites, rec.d, rec.seed)?;
        let bonds = rec.sites - 1;
        if rec.gates.len() != rec.depth * bonds {
            return domain(format!("replay file has {} gates, expected {}", rec.gates.len(), rec.depth * bonds));
        }
        let mut layers: Vec<Vec<Option<ChargeConservingGate>>> = vec![vec![None; bonds]; rec.depth];
        for g in &rec.gates {
            if g.layer == 0 || g.layer > rec.depth || g.bond == 0 || g.bond > bonds {
                return domain(format!("gate record at layer {} bond {} out of range", g.layer, g.bond));
            }
            let slot = &mut layers[g.layer - 1][g.bond - 1];
            if slot.is_some() {
                return domain(format!("duplicate gate at layer {} bond {}", g.layer, g.bond));
            }
            *slot = Some(ChargeConservingGate::from_record(g)?);
        }
        let layers =
            layers.into_iter().map(|l| l.into_iter().map(|g| g.expect("all slots filled")).collect()).collect();
        Self::from_layers(config, layers)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(&self.to_record())?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let rec: CircuitRecord = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::from_record(&rec)
    }
}

/// Replay file: chain metadata plus one [`GateRecord`] per gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitRecord {
    #[serde(rename = "N")]
    pub sites: usize,
    pub d: usize,
    pub seed: u64,
    pub depth: usize,
    pub gates: Vec<GateRecord>,
}

pub fn sample_circuit(config: ChainConfig, depth: usize, key: u64) -> Result<BrickworkCircuit> {
    BrickworkCircuit::sample(config, depth, key)
}

pub fn evolve(psi: &StateVector, circuit: &BrickworkCircuit, t: usize) -> Result<StateVector> {
    circuit.evolve(psi, t)
}

#[derive(Debug, Clone)]
pub struct ModifiedCircuit {
    base: Arc<BrickworkCircuit>,
    phases: Vec<Complex64>,
}

impl ModifiedCircuit {
    /// Requires `N/2` odd so that the middle bond sits in the odd sublayer.
    pub fn new(base: Arc<BrickworkCircuit>) -> Result<Self> {
        let n = base.config().sites();
        if (n / 2) % 2 != 1 {
            return domain(format!("N/2 must be odd (N = 2 mod 4), got N = {n}"));
        }
        let mid = n / 2;
        let phases = (1..=base.depth()).map(|t| base.gate(t, mid).phase_00()).collect();
        Ok(Self { base, phases })
    }

    pub fn base(&self) -> &Arc<BrickworkCircuit> {
        &self.base
    }

    pub fn phases(&self) -> &[Complex64] {
        &self.phases
    }

    pub fn middle_bond(&self) -> usize {
        self.base.config().sites() / 2
    }

    pub(crate) fn apply_layer_in_place(&self, amps: &mut [Complex64], layer: usize) {
        let n = self.base.config().sites();
        let mid = self.middle_bond();
        for b in BrickworkCircuit::bond_order(n) {
            if b == mid {
                let u = self.phases[layer - 1];
                amps.iter_mut().for_each(|a| *a *= u);
            } else {
                self.base.gate(layer, b).apply_in_place(amps, n, b);
            }
        }
    }

    pub fn apply_layer(&self, psi: &StateVector, layer: usize) -> Result<StateVector> {
        self.base.check(psi, layer)?;
        if layer == 0 {
            return domain("layers are numbered from 1");
        }
        let mut amps = psi.amplitudes().to_vec();
        self.apply_layer_in_place(&mut amps, layer);
        Ok(StateVector::from_parts(amps, *psi.config(), psi.is_normalized()))
    }

    /// `V(t, 0) psi`.
    pub fn evolve(&self, psi: &StateVector, t: usize) -> Result<StateVector> {
        self.base.check(psi, t)?;
        let mut amps = psi.amplitudes().to_vec();
        for layer in 1..=t {
            self.apply_layer_in_place(&mut amps, layer);
        }
        Ok(StateVector::from_parts(amps, *psi.config(), psi.is_normalized()))
    }
}

pub fn modify_circuit(circuit: Arc<BrickworkCircuit>) -> Result<ModifiedCircuit> {
    ModifiedCircuit::new(circuit)
}

pub fn evolve_modified(psi: &StateVector, v: &ModifiedCircuit, t: usize) -> Result<StateVector> {
    v.evolve(psi, t)
}

/// `Delta_t = U(t,0) psi0 - V(t,0) psi0` and its norm.
pub fn deviation_state(
    circuit: &BrickworkCircuit,
    modified: &ModifiedCircuit,
    psi0: &StateVector,
    t: usize,
) -> Result<(StateVector, f64)> {
    if !circuit.config().same_shape(modified.base().config()) {
        return domain("circuit and modified circuit have different chain shapes");
    }
    let delta = circuit.evolve(psi0, t)?.difference(&modified.evolve(psi0, t)?)?;
    let norm = delta.norm();
    Ok((delta, norm))
}
