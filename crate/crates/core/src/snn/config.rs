use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// When pseudo-labels are read off the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelPass {
    /// Winners recorded while the network is still learning.
    Inline,
    /// A second pass over the data with frozen weights and thresholds.
    Separate,
}

impl FromStr for LabelPass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inline" => Ok(LabelPass::Inline),
            "separate" => Ok(LabelPass::Separate),
            other => Err(Error::Config(format!("unknown label pass {other:?}"))),
        }
    }
}

impl fmt::Display for LabelPass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelPass::Inline => "inline",
            LabelPass::Separate => "separate",
        })
    }
}

/// Hyper-parameters of the winner-take-all LIF network.
///
/// Defaults are the STDP training table values (`k = 100`, `T = 400`, ...).
/// `d` has no canonical value and is normally overwritten with the feature
/// dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SnnConfig {
    pub k: usize,
    pub d: usize,
    pub v_rest: f64,
    pub v_reset: f64,
    pub v_thr: f64,
    pub v_decay: f64,
    /// Refractory period in timesteps.
    pub refractory: u32,
    pub tau_o: f64,
    pub tau_decay: f64,
    pub alpha: f64,
    pub eps_decay: f64,
    pub eta_pre: f64,
    pub eta_post: f64,
    pub w_inh: f64,
    pub timesteps: usize,
    pub w_max: f64,
    pub label_pass: LabelPass,
    /// Per-neuron target for the summed weight magnitude, re-imposed after
    /// every training sample. `None` disables normalization.
    pub weight_norm: Option<f64>,
}

impl Default for SnnConfig {
    fn default() -> Self {
        Self {
            k: 100,
            d: 256,
            v_rest: -65.0,
            v_reset: -60.0,
            v_thr: -52.0,
            v_decay: 20.0,
            refractory: 5,
            tau_o: 1.0,
            tau_decay: 100.0,
            alpha: 0.45,
            eps_decay: 1e7,
            eta_pre: 1e-3,
            eta_post: 1e-6,
            w_inh: -1.0,
            timesteps: 400,
            w_max: 1.0,
            label_pass: LabelPass::Separate,
            weight_norm: None,
        }
    }
}

impl SnnConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("snn: {m}")));
        let all_finite = [
            self.v_rest,
            self.v_reset,
            self.v_thr,
            self.v_decay,
            self.tau_o,
            self.tau_decay,
            self.alpha,
            self.eps_decay,
            self.eta_pre,
            self.eta_post,
            self.w_inh,
            self.w_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return fail("parameters must be finite");
        }
        if self.k == 0 || self.d == 0 {
            return fail("k and d must be positive");
        }
        if self.timesteps == 0 {
            return fail("timesteps must be positive");
        }
        if self.v_reset >= self.v_thr {
            return fail("v_reset must be below v_thr");
        }
        if self.v_rest > self.v_reset {
            return fail("v_rest must not exceed v_reset");
        }
        if self.v_decay <= 0.0 || self.tau_decay <= 0.0 || self.eps_decay <= 0.0 {
            return fail("decay constants must be positive");
        }
        if self.tau_o <= 0.0 {
            return fail("tau_o must be positive");
        }
        if self.eta_pre < 0.0 || self.eta_post < 0.0 || self.alpha < 0.0 {
            return fail("learning rates and alpha must be nonnegative");
        }
        if self.w_inh > 0.0 {
            return fail("w_inh must be nonpositive");
        }
        if self.w_max <= 0.0 {
            return fail("w_max must be positive");
        }
        if matches!(self.weight_norm, Some(n) if !(n > 0.0 && n.is_finite())) {
            return fail("weight_norm must be positive");
        }
        Ok(())
    }

    /// Per-step multiplicative membrane decay toward rest.
    pub fn membrane_decay(&self) -> f64 {
        (-1.0 / self.v_decay).exp()
    }

    pub fn trace_decay(&self) -> f64 {
        (-1.0 / self.tau_decay).exp()
    }

    pub fn threshold_decay(&self) -> f64 {
        (-1.0 / self.eps_decay).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_training_table() {
        let c = SnnConfig::default();
        assert_eq!(c.k, 100);
        assert_eq!(
            (c.v_rest, c.v_reset, c.v_thr, c.v_decay),
            (-65.0, -60.0, -52.0, 20.0)
        );
        assert_eq!(c.refractory, 5);
        assert_eq!((c.tau_o, c.tau_decay), (1.0, 100.0));
        assert_eq!((c.alpha, c.eps_decay), (0.45, 1e7));
        assert_eq!((c.eta_pre, c.eta_post), (1e-3, 1e-6));
        assert_eq!(c.w_inh, -1.0);
        assert_eq!(c.timesteps, 400);
        assert_eq!(c.label_pass, LabelPass::Separate);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_inverted_potentials() {
        let c = SnnConfig {
            v_reset: -50.0,
            ..SnnConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SnnConfig {
            w_inh: 0.5,
            ..SnnConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn decays_shrink() {
        let c = SnnConfig::default();
        for f in [c.membrane_decay(), c.trace_decay(), c.threshold_decay()] {
            assert!(f > 0.0 && f < 1.0);
        }
    }
}
