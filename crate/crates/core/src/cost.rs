//! Operation-count energy model for the two clustering back ends.
//!
//! Prices are for 45 nm CMOS floating point: 0.9 pJ per ADD, 3.7 pJ per MULT.

use serde::Serialize;

use crate::error::{Error, Result};

pub const ADD_PJ: f64 = 0.9;
pub const MULT_PJ: f64 = 3.7;

/// Operation counts and their energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub adds: f64,
    pub mults: f64,
    pub energy_pj: f64,
    pub energy_mj: f64,
}

impl EnergyReport {
    pub fn from_counts(adds: f64, mults: f64) -> Self {
        let energy_pj = adds * ADD_PJ + mults * MULT_PJ;
        Self {
            adds,
            mults,
            energy_pj,
            energy_mj: energy_pj * 1e-9,
        }
    }

    pub fn zero() -> Self {
        Self::from_counts(0.0, 0.0)
    }

    /// The same workload repeated `times` times (e.g. epochs).
    pub fn repeated(&self, times: f64) -> Self {
        Self::from_counts(self.adds * times, self.mults * times)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("energy report serializes")
    }
}

/// Exact k-means operation counts, kept in wide integers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OpCount {
    pub adds: u128,
    pub mults: u128,
}

impl OpCount {
    pub fn report(&self) -> EnergyReport {
        EnergyReport::from_counts(self.adds as f64, self.mults as f64)
    }
}

/// Closed-form Lloyd cost: `k*d` squarings and `k*(2d-1) + d` additions per
/// point per iteration.
pub fn kmeans_op_count(k: u64, d: u64, it: u64, n: u64) -> Result<OpCount> {
    if k == 0 || d == 0 || it == 0 || n == 0 {
        return Err(Error::invalid("k-means cost arguments must be at least 1"));
    }
    let overflow = || Error::invalid("k-means operation count overflows");
    let (k, d, it, n) = (k as u128, d as u128, it as u128, n as u128);
    let per_pass = it.checked_mul(n).ok_or_else(overflow)?;
    let mults = k
        .checked_mul(d)
        .and_then(|v| v.checked_mul(per_pass))
        .ok_or_else(overflow)?;
    let adds = (2 * d - 1)
        .checked_mul(k)
        .and_then(|v| v.checked_add(d))
        .and_then(|v| v.checked_mul(per_pass))
        .ok_or_else(overflow)?;
    Ok(OpCount { adds, mults })
}

pub fn kmeans_energy(k: u64, d: u64, it: u64, n: u64) -> Result<EnergyReport> {
    kmeans_op_count(k, d, it, n).map(|c| c.report())
}

/// Average spiking activity of one clustering run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpikeStats {
    /// Input spikes per input neuron per timestep.
    pub p_input: f64,
    /// Excitatory spikes per neuron per timestep.
    pub p_exc: f64,
    /// Input-to-excitatory synapses in one signed map (`d * k`).
    pub w_exc_count: u64,
    /// Recurrent inhibitory connections (`k * (k - 1)`).
    pub w_inh_count: u64,
}

impl SpikeStats {
    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.p_input) || !ok(self.p_exc) {
            return Err(Error::invalid("spike probabilities must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Expected additions of spike-driven clustering: feedforward
/// `p_in |w_exc|`, learning `(p_in + p_exc) |w_exc|` and inhibition
/// `p_exc |w_inh|`, per timestep per sample. No multiplications.
pub fn stdp_energy(stats: &SpikeStats, timesteps: u64, n: u64) -> Result<EnergyReport> {
    stats.validate()?;
    let w_exc = stats.w_exc_count as f64;
    let w_inh = stats.w_inh_count as f64;
    let per_step =
        stats.p_input * w_exc + (stats.p_input + stats.p_exc) * w_exc + stats.p_exc * w_inh;
    Ok(EnergyReport::from_counts(
        per_step * timesteps as f64 * n as f64,
        0.0,
    ))
}

/// Raw spike counters accumulated by a clustering run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpikeTally {
    pub d: usize,
    pub k: usize,
    /// Simulated timesteps summed over samples.
    pub steps: u64,
    pub input_spikes: u64,
    pub exc_spikes: u64,
}

impl SpikeTally {
    pub fn new(d: usize, k: usize) -> Self {
        Self {
            d,
            k,
            ..Self::default()
        }
    }

    pub fn samples(&self, timesteps: usize) -> u64 {
        if timesteps == 0 {
            0
        } else {
            self.steps / timesteps as u64
        }
    }

    /// Empirical spike statistics.
    pub fn stats(&self) -> SpikeStats {
        let per = |count: u64, width: usize| {
            let denom = self.steps as f64 * width as f64;
            if denom > 0.0 {
                count as f64 / denom
            } else {
                0.0
            }
        };
        let k = self.k as u64;
        SpikeStats {
            p_input: per(self.input_spikes, self.d),
            p_exc: per(self.exc_spikes, self.k),
            w_exc_count: (self.d * self.k) as u64,
            w_inh_count: k * k.saturating_sub(1),
        }
    }
}

/// Conditional additions actually executed by the spiking network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SynapticOps {
    pub feedforward: u64,
    pub learning: u64,
    pub inhibition: u64,
}

impl SynapticOps {
    pub fn total(&self) -> u64 {
        self.feedforward + self.learning + self.inhibition
    }

    pub fn report(&self) -> EnergyReport {
        EnergyReport::from_counts(self.total() as f64, 0.0)
    }
}
