//! Winner-take-all layer of leaky integrate-and-fire neurons trained with
//! trace-based STDP on signed (two-channel) spike input.

mod config;
mod network;

pub use config::{LabelPass, SnnConfig};
pub use network::{
    cluster_epoch, clustering_objective, label_trains, simulate_sample, step_timestep,
    ClusterEpoch, NeuronState, PseudoLabels, SampleActivity, SnnState, StepMode,
};

use crate::error::{Error, Result};

/// Amplitudes and time constants of the exact-timing STDP window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairStdpParams {
    pub a_plus: f64,
    pub a_minus: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
}

impl PairStdpParams {
    pub fn new(a_plus: f64, a_minus: f64, beta_plus: f64, beta_minus: f64) -> Result<Self> {
        let p = Self {
            a_plus,
            a_minus,
            beta_plus,
            beta_minus,
        };
        if [a_plus, a_minus, beta_plus, beta_minus]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
        {
            Ok(p)
        } else {
            Err(Error::invalid("pair STDP parameters must be positive"))
        }
    }
}

/// Weight change for a post-minus-pre spike time difference `dt`.
///
/// Positive `dt` (pre before post) potentiates, negative depresses. The
/// window is undefined at `dt == 0`.
pub fn pair_stdp_kernel(dt: f64, p: &PairStdpParams) -> Result<f64> {
    if dt.is_nan() {
        return Err(Error::NonFinite("STDP time difference"));
    }
    if dt > 0.0 {
        Ok(p.a_plus * (-dt / p.beta_plus).exp())
    } else if dt < 0.0 {
        Ok(-p.a_minus * (dt / p.beta_minus).exp())
    } else {
        Err(Error::invalid("STDP window is undefined at dt = 0"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let p = PairStdpParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((pair_stdp_kernel(1.0, &p).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!(pair_stdp_kernel(0.0, &p).is_err());
        let far = pair_stdp_kernel(60.0, &p).unwrap();
        assert!(far > 0.0 && far < 1e-25);
        let far = pair_stdp_kernel(-60.0, &p).unwrap();
        assert!(far < 0.0 && far > -1e-25);
        assert!(pair_stdp_kernel(f64::INFINITY, &p).unwrap() == 0.0);
    }

    #[test]
    fn kernel_sign_follows_dt() {
        let p = PairStdpParams::new(0.5, 0.7, 3.0, 9.0).unwrap();
        for i in 1..200 {
            let dt = i as f64 * 0.37;
            assert!(pair_stdp_kernel(dt, &p).unwrap() > 0.0);
            assert!(pair_stdp_kernel(-dt, &p).unwrap() < 0.0);
        }
    }

    #[test]
    fn params_must_be_positive() {
        assert!(PairStdpParams::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(PairStdpParams::new(1.0, 1.0, -1.0, 1.0).is_err());
    }
}
