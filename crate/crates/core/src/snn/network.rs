use rayon::prelude::*;

use super::config::{LabelPass, SnnConfig};
use crate::cost::{SpikeStats, SpikeTally, SynapticOps};
use crate::encoding::{encode, ProcessedFeatures, SpikeTrain};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Fraction of `w_max` spanned by the initial weight distribution.
const INIT_SPAN: f64 = 0.3;

/// Per-neuron and per-input dynamic state. Reset between samples except for
/// the adaptive thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuronState {
    pub v: Vec<f64>,
    pub eps: Vec<f64>,
    pub refractory: Vec<u32>,
    pub trace_pre_plus: Vec<f64>,
    pub trace_pre_minus: Vec<f64>,
    pub trace_post: Vec<f64>,
}

impl NeuronState {
    fn resting(cfg: &SnnConfig) -> Self {
        Self {
            v: vec![cfg.v_rest; cfg.k],
            eps: vec![0.0; cfg.k],
            refractory: vec![0; cfg.k],
            trace_pre_plus: vec![0.0; cfg.d],
            trace_pre_minus: vec![0.0; cfg.d],
            trace_post: vec![0.0; cfg.k],
        }
    }

    /// Start-of-sample reset; thresholds persist.
    fn reset_for_sample(&mut self, cfg: &SnnConfig) {
        self.v.fill(cfg.v_rest);
        self.refractory.fill(0);
        self.trace_pre_plus.fill(0.0);
        self.trace_pre_minus.fill(0.0);
        self.trace_post.fill(0.0);
    }
}

/// Full network state. Weight maps are `d x k`, row-major (`i * k + j` is
/// the synapse from input `i` to neuron `j`).
#[derive(Clone, Debug, PartialEq)]
pub struct SnnState {
    pub d: usize,
    pub k: usize,
    /// Positive-channel weights, in `[0, w_max]`.
    pub w_plus: Vec<f64>,
    /// Negative-channel weights, in `[-w_max, 0]`.
    pub w_minus: Vec<f64>,
    pub neurons: NeuronState,
}

impl SnnState {
    /// Fresh network: uniform random weights in `[0, 0.3 w_max]` (mirrored
    /// for the negative map), resting potentials, no threshold offset.
    pub fn init(cfg: &SnnConfig, rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.d * cfg.k;
        let hi = INIT_SPAN * cfg.w_max;
        let w_plus = (0..n).map(|_| rng.uniform_range(0.0, hi)).collect();
        let w_minus = (0..n).map(|_| -rng.uniform_range(0.0, hi)).collect();
        Ok(Self {
            d: cfg.d,
            k: cfg.k,
            w_plus,
            w_minus,
            neurons: NeuronState::resting(cfg),
        })
    }

    /// Column `j` of `w_plus + w_minus`: the neuron's signed centroid.
    pub fn combined_column(&self, j: usize) -> Vec<f64> {
        (0..self.d)
            .map(|i| self.w_plus[i * self.k + j] + self.w_minus[i * self.k + j])
            .collect()
    }

    fn check(&self, cfg: &SnnConfig) -> Result<()> {
        if self.d != cfg.d {
            return Err(Error::dim("network input dimension", cfg.d, self.d));
        }
        if self.k != cfg.k {
            return Err(Error::dim("network neuron count", cfg.k, self.k));
        }
        Ok(())
    }

    fn apply_weight_norm(&mut self, target: f64, w_max: f64) {
        for j in 0..self.k {
            let total: f64 = (0..self.d)
                .map(|i| self.w_plus[i * self.k + j] - self.w_minus[i * self.k + j])
                .sum();
            if total <= 0.0 {
                continue;
            }
            let scale = target / total;
            for i in 0..self.d {
                let idx = i * self.k + j;
                self.w_plus[idx] = (self.w_plus[idx] * scale).clamp(0.0, w_max);
                self.w_minus[idx] = (self.w_minus[idx] * scale).clamp(-w_max, 0.0);
            }
        }
    }
}

/// Which plasticity mechanisms are live during a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepMode {
    /// STDP weight updates.
    pub learn: bool,
    /// Adaptive threshold increment and decay.
    pub adapt: bool,
}

impl StepMode {
    pub const TRAIN: StepMode = StepMode {
        learn: true,
        adapt: true,
    };
    pub const FROZEN: StepMode = StepMode {
        learn: false,
        adapt: false,
    };
}

#[derive(Default)]
struct Scratch {
    active_plus: Vec<usize>,
    active_minus: Vec<usize>,
    fired: Vec<usize>,
}

/// Trace refresh, leak, integration, threshold test and post-spike reset.
#[allow(clippy::too_many_arguments)]
fn integrate_and_fire(
    n: &mut NeuronState,
    w_plus: &[f64],
    w_minus: &[f64],
    s_plus: &[u8],
    s_minus: &[u8],
    cfg: &SnnConfig,
    adapt: bool,
    spikes: &mut [u8],
    scratch: &mut Scratch,
    ops: &mut SynapticOps,
) {
    let k = cfg.k;
    scratch.active_plus.clear();
    scratch.active_minus.clear();
    scratch.fired.clear();

    for (i, (&sp, &sm)) in s_plus.iter().zip(s_minus).enumerate() {
        if sp != 0 {
            n.trace_pre_plus[i] = cfg.tau_o;
            scratch.active_plus.push(i);
        }
        if sm != 0 {
            n.trace_pre_minus[i] = cfg.tau_o;
            scratch.active_minus.push(i);
        }
    }

    let td = cfg.trace_decay();
    n.trace_pre_plus.iter_mut().for_each(|t| *t *= td);
    n.trace_pre_minus.iter_mut().for_each(|t| *t *= td);
    n.trace_post.iter_mut().for_each(|t| *t *= td);
    if adapt {
        let ed = cfg.threshold_decay();
        n.eps.iter_mut().for_each(|e| *e *= ed);
    }

    let vd = cfg.membrane_decay();
    for v in n.v.iter_mut() {
        *v = cfg.v_rest + vd * (*v - cfg.v_rest);
    }
    for l in n.refractory.iter_mut() {
        *l = l.saturating_sub(1);
    }

    let open = n.refractory.iter().filter(|&&l| l == 0).count() as u64;
    ops.feedforward += open * (scratch.active_plus.len() + scratch.active_minus.len()) as u64;
    for &i in &scratch.active_plus {
        let row = &w_plus[i * k..(i + 1) * k];
        for ((v, &l), w) in n.v.iter_mut().zip(&n.refractory).zip(row) {
            if l == 0 {
                *v += w;
            }
        }
    }
    for &i in &scratch.active_minus {
        let row = &w_minus[i * k..(i + 1) * k];
        for ((v, &l), w) in n.v.iter_mut().zip(&n.refractory).zip(row) {
            if l == 0 {
                *v += w;
            }
        }
    }

    for j in 0..k {
        let fire = n.refractory[j] == 0 && n.v[j] > cfg.v_thr + n.eps[j];
        spikes[j] = u8::from(fire);
        if fire {
            scratch.fired.push(j);
            n.refractory[j] = cfg.refractory;
            n.v[j] = cfg.v_reset;
            if adapt {
                n.eps[j] += cfg.alpha;
            }
            n.trace_post[j] = cfg.tau_o;
        }
    }
}

/// Trace-based STDP: a presynaptic spike depresses by the postsynaptic trace
/// and a postsynaptic spike potentiates by the presynaptic trace.
fn apply_stdp(
    w_plus: &mut [f64],
    w_minus: &mut [f64],
    n: &NeuronState,
    scratch: &Scratch,
    cfg: &SnnConfig,
    ops: &mut SynapticOps,
) {
    let k = cfg.k;
    let w_max = cfg.w_max;
    for &i in &scratch.active_plus {
        for (w, t) in w_plus[i * k..(i + 1) * k].iter_mut().zip(&n.trace_post) {
            *w = (*w - cfg.eta_pre * t).clamp(0.0, w_max);
        }
    }
    for &i in &scratch.active_minus {
        for (w, t) in w_minus[i * k..(i + 1) * k].iter_mut().zip(&n.trace_post) {
            *w = (*w + cfg.eta_pre * t).clamp(-w_max, 0.0);
        }
    }
    for &j in &scratch.fired {
        for i in 0..cfg.d {
            let idx = i * k + j;
            w_plus[idx] = (w_plus[idx] + cfg.eta_post * n.trace_pre_plus[i]).clamp(0.0, w_max);
            w_minus[idx] = (w_minus[idx] + cfg.eta_post * n.trace_pre_minus[i]).clamp(-w_max, 0.0);
        }
    }
    ops.learning += ((scratch.active_plus.len() + scratch.active_minus.len()) * k
        + scratch.fired.len() * cfg.d) as u64;
}

/// Every spike lowers all other membranes by `|w_inh|`.
fn inhibit(n: &mut NeuronState, scratch: &Scratch, cfg: &SnnConfig, ops: &mut SynapticOps) {
    let fired = scratch.fired.len();
    if fired == 0 {
        return;
    }
    let mut is_fired = vec![false; cfg.k];
    for &j in &scratch.fired {
        is_fired[j] = true;
    }
    for (v, &f) in n.v.iter_mut().zip(&is_fired) {
        let others = if f { fired - 1 } else { fired };
        *v += cfg.w_inh * others as f64;
    }
    ops.inhibition += (fired * (cfg.k - 1)) as u64;
}

/// Advances the network by one timestep and returns the output spikes.
pub fn step_timestep(
    state: &mut SnnState,
    s_plus: &[u8],
    s_minus: &[u8],
    cfg: &SnnConfig,
    mode: StepMode,
) -> Result<Vec<u8>> {
    state.check(cfg)?;
    if s_plus.len() != cfg.d {
        return Err(Error::dim("positive input spikes", cfg.d, s_plus.len()));
    }
    if s_minus.len() != cfg.d {
        return Err(Error::dim("negative input spikes", cfg.d, s_minus.len()));
    }
    let mut spikes = vec![0u8; cfg.k];
    let mut scratch = Scratch::default();
    let mut ops = SynapticOps::default();
    step_inner(
        state,
        s_plus,
        s_minus,
        cfg,
        mode,
        &mut spikes,
        &mut scratch,
        &mut ops,
    );
    Ok(spikes)
}

#[allow(clippy::too_many_arguments)]
fn step_inner(
    state: &mut SnnState,
    s_plus: &[u8],
    s_minus: &[u8],
    cfg: &SnnConfig,
    mode: StepMode,
    spikes: &mut [u8],
    scratch: &mut Scratch,
    ops: &mut SynapticOps,
) {
    let SnnState {
        w_plus,
        w_minus,
        neurons,
        ..
    } = state;
    integrate_and_fire(
        neurons, w_plus, w_minus, s_plus, s_minus, cfg, mode.adapt, spikes, scratch, ops,
    );
    if mode.learn {
        apply_stdp(w_plus, w_minus, neurons, scratch, cfg, ops);
    }
    inhibit(neurons, scratch, cfg, ops);
}

/// Spike counts of one presented sample and the resulting cluster vote.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleActivity {
    pub spike_counts: Vec<u32>,
    pub final_v: Vec<f64>,
    /// Most active neuron; ties go to the higher final potential, then the
    /// lower index.
    pub winner: usize,
}

fn pick_winner(counts: &[u32], v: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..counts.len() {
        let better = counts[j] > counts[best] || (counts[j] == counts[best] && v[j] > v[best]);
        if better {
            best = j;
        }
    }
    best
}

fn check_train(train: &SpikeTrain, cfg: &SnnConfig) -> Result<()> {
    if train.timesteps() != cfg.timesteps {
        return Err(Error::dim(
            "spike train length",
            cfg.timesteps,
            train.timesteps(),
        ));
    }
    if train.d() != cfg.d {
        return Err(Error::dim("spike train width", cfg.d, train.d()));
    }
    Ok(())
}

fn run_sample(
    state: &mut SnnState,
    train: &SpikeTrain,
    cfg: &SnnConfig,
    mode: StepMode,
    tally: &mut SpikeTally,
    ops: &mut SynapticOps,
) -> SampleActivity {
    state.neurons.reset_for_sample(cfg);
    let mut counts = vec![0u32; cfg.k];
    let mut spikes = vec![0u8; cfg.k];
    let mut scratch = Scratch::default();
    for t in 0..cfg.timesteps {
        step_inner(
            state,
            train.plus(t),
            train.minus(t),
            cfg,
            mode,
            &mut spikes,
            &mut scratch,
            ops,
        );
        tally.input_spikes += (scratch.active_plus.len() + scratch.active_minus.len()) as u64;
        tally.exc_spikes += scratch.fired.len() as u64;
        tally.steps += 1;
        for &j in &scratch.fired {
            counts[j] += 1;
        }
    }
    let final_v = state.neurons.v.clone();
    SampleActivity {
        winner: pick_winner(&counts, &final_v),
        spike_counts: counts,
        final_v,
    }
}

/// Presents one spike train: resets potentials, refractory counters and
/// traces, then runs `T` timesteps. Weights and thresholds carry over.
pub fn simulate_sample(
    state: &mut SnnState,
    train: &SpikeTrain,
    cfg: &SnnConfig,
    mode: StepMode,
) -> Result<SampleActivity> {
    state.check(cfg)?;
    check_train(train, cfg)?;
    let mut tally = SpikeTally::new(cfg.d, cfg.k);
    let mut ops = SynapticOps::default();
    Ok(run_sample(state, train, cfg, mode, &mut tally, &mut ops))
}

/// Frozen evaluation of many trains against the same network; samples are
/// independent so this runs in parallel.
pub fn label_trains(
    state: &SnnState,
    trains: &[SpikeTrain],
    cfg: &SnnConfig,
) -> Result<Vec<SampleActivity>> {
    state.check(cfg)?;
    for t in trains {
        check_train(t, cfg)?;
    }
    Ok(trains
        .par_iter()
        .map(|train| frozen_activity(state, train, cfg))
        .collect())
}

fn frozen_activity(state: &SnnState, train: &SpikeTrain, cfg: &SnnConfig) -> SampleActivity {
    let mut neurons = state.neurons.clone();
    neurons.reset_for_sample(cfg);
    let mut counts = vec![0u32; cfg.k];
    let mut spikes = vec![0u8; cfg.k];
    let mut scratch = Scratch::default();
    let mut ops = SynapticOps::default();
    for t in 0..cfg.timesteps {
        integrate_and_fire(
            &mut neurons,
            &state.w_plus,
            &state.w_minus,
            train.plus(t),
            train.minus(t),
            cfg,
            false,
            &mut spikes,
            &mut scratch,
            &mut ops,
        );
        inhibit(&mut neurons, &scratch, cfg, &mut ops);
        for &j in &scratch.fired {
            counts[j] += 1;
        }
    }
    let final_v = neurons.v;
    SampleActivity {
        winner: pick_winner(&counts, &final_v),
        spike_counts: counts,
        final_v,
    }
}

/// One cluster index per sample, all below `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoLabels {
    labels: Vec<usize>,
    k: usize,
}

impl PseudoLabels {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label: bad, k });
        }
        Ok(Self { labels, k })
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of distinct labels in use.
    pub fn occupied(&self) -> usize {
        let mut seen = vec![false; self.k];
        self.labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    }
}

/// Everything a clustering epoch produces.
#[derive(Clone, Debug)]
pub struct ClusterEpoch {
    pub labels: PseudoLabels,
    pub state: SnnState,
    /// Activity statistics of the training pass.
    pub stats: SpikeStats,
    pub tally: SpikeTally,
    /// Additions executed during the training pass.
    pub ops: SynapticOps,
}

/// Trains a freshly initialized network on every sample once, then reads
/// off one winner per sample (inline, or in a frozen second pass).
pub fn cluster_epoch(
    features: &ProcessedFeatures,
    cfg: &SnnConfig,
    gain: f64,
    rng: &RngStream,
) -> Result<ClusterEpoch> {
    cfg.validate()?;
    if features.d() != cfg.d {
        return Err(Error::dim("feature dimension", cfg.d, features.d()));
    }
    let mut state = SnnState::init(cfg, &mut rng.derive("snn-init"))?;
    let mut tally = SpikeTally::new(cfg.d, cfg.k);
    let mut ops = SynapticOps::default();
    let mut inline = Vec::with_capacity(features.n());

    for n in 0..features.n() {
        let mut enc = rng.derive_indexed("snn-train-encode", n as u64);
        let train = encode(features.row(n), gain, cfg.timesteps, &mut enc)?;
        let act = run_sample(
            &mut state,
            &train,
            cfg,
            StepMode::TRAIN,
            &mut tally,
            &mut ops,
        );
        inline.push(act.winner);
        if let Some(target) = cfg.weight_norm {
            state.apply_weight_norm(target, cfg.w_max);
        }
    }

    let labels = match cfg.label_pass {
        LabelPass::Inline => inline,
        LabelPass::Separate => {
            let frozen = &state;
            (0..features.n())
                .into_par_iter()
                .map(|n| {
                    let mut enc = rng.derive_indexed("snn-label-encode", n as u64);
                    let train = encode(features.row(n), gain, cfg.timesteps, &mut enc)?;
                    Ok(frozen_activity(frozen, &train, cfg).winner)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    Ok(ClusterEpoch {
        labels: PseudoLabels::new(labels, cfg.k)?,
        state,
        stats: tally.stats(),
        tally,
        ops,
    })
}

/// Mean L1 distance between each feature vector and the signed weight
/// column of its assigned neuron.
pub fn clustering_objective(
    features: &ProcessedFeatures,
    state: &SnnState,
    labels: &PseudoLabels,
) -> Result<f64> {
    if features.d() != state.d {
        return Err(Error::dim("feature dimension", state.d, features.d()));
    }
    if labels.len() != features.n() {
        return Err(Error::dim("label count", features.n(), labels.len()));
    }
    if labels.k() > state.k {
        return Err(Error::dim("label space", state.k, labels.k()));
    }
    if features.n() == 0 {
        return Ok(0.0);
    }
    let k = state.k;
    let total: f64 = labels
        .as_slice()
        .iter()
        .enumerate()
        .map(|(n, &j)| {
            features
                .row(n)
                .iter()
                .enumerate()
                .map(|(i, x)| (x - (state.w_plus[i * k + j] + state.w_minus[i * k + j])).abs())
                .sum::<f64>()
        })
        .sum();
    Ok(total / features.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn small(d: usize, k: usize) -> SnnConfig {
        SnnConfig {
            d,
            k,
            timesteps: 50,
            ..SnnConfig::default()
        }
    }

    fn quiet(cfg: &SnnConfig) -> SnnState {
        SnnState::init(cfg, &mut RngStream::new(0)).unwrap()
    }

    #[test]
    fn quiescent_network_stays_put() {
        let cfg = small(4, 3);
        let mut s = quiet(&cfg);
        let before = s.clone();
        let spikes = step_timestep(&mut s, &[0; 4], &[0; 4], &cfg, StepMode::TRAIN).unwrap();
        assert_eq!(spikes, vec![0; 3]);
        assert_eq!(s, before);
    }

    #[test]
    fn membrane_leaks_toward_rest() {
        let cfg = small(2, 2);
        let mut s = quiet(&cfg);
        s.neurons.v[0] = -60.0;
        step_timestep(&mut s, &[0; 2], &[0; 2], &cfg, StepMode::TRAIN).unwrap();
        assert!((s.neurons.v[0] - (-60.243852877496)).abs() < 1e-9);
        assert_eq!(s.neurons.v[1], -65.0);
    }

    #[test]
    fn refractory_neuron_cannot_fire() {
        let cfg = small(2, 2);
        let mut s = quiet(&cfg);
        s.neurons.refractory[0] = 3;
        s.neurons.v[0] = 100.0;
        let spikes = step_timestep(&mut s, &[1; 2], &[0; 2], &cfg, StepMode::TRAIN).unwrap();
        assert_eq!(spikes[0], 0);
        assert_eq!(s.neurons.refractory[0], 2);
    }

    #[test]
    fn each_spike_inhibits_the_others_once() {
        let cfg = small(2, 4);
        let mut s = quiet(&cfg);
        s.neurons.v[0] = 0.0;
        s.neurons.v[1] = 0.0;
        let spikes = step_timestep(&mut s, &[0; 2], &[0; 2], &cfg, StepMode::FROZEN).unwrap();
        assert_eq!(spikes, vec![1, 1, 0, 0]);
        assert_eq!(s.neurons.v[2], -67.0);
        assert_eq!(s.neurons.v[3], -67.0);
        assert_eq!(s.neurons.v[0], cfg.v_reset - 1.0);
        assert_eq!(s.neurons.refractory[..2], [cfg.refractory; 2]);
    }

    #[test]
    fn firing_raises_threshold_only_when_adapting() {
        let cfg = small(2, 1);
        for (mode, eps) in [(StepMode::TRAIN, cfg.alpha), (StepMode::FROZEN, 0.0)] {
            let mut s = quiet(&cfg);
            s.neurons.v[0] = 0.0;
            step_timestep(&mut s, &[0; 2], &[0; 2], &cfg, mode).unwrap();
            assert_eq!(s.neurons.eps[0], eps);
            assert_eq!(s.neurons.trace_post[0], cfg.tau_o);
        }
    }

    #[test]
    fn pre_then_post_potentiates() {
        let cfg = SnnConfig {
            eta_post: 1e-2,
            ..small(2, 2)
        };
        let mut s = quiet(&cfg);
        let w0 = s.w_plus[1];
        step_timestep(&mut s, &[1, 0], &[0, 0], &cfg, StepMode::TRAIN).unwrap();
        assert_eq!(s.w_plus[1], w0);
        s.neurons.v[1] = 0.0;
        let spikes = step_timestep(&mut s, &[0, 0], &[0, 0], &cfg, StepMode::TRAIN).unwrap();
        assert_eq!(spikes, vec![0, 1]);
        assert!(s.w_plus[1] > w0);
        // input 1 never spiked, so its synapse is untouched
        let w_other = s.w_plus[3];
        assert_eq!(w_other, quiet(&cfg).w_plus[3]);
    }

    #[test]
    fn post_then_pre_depresses() {
        let cfg = small(2, 2);
        let mut s = quiet(&cfg);
        s.neurons.v[0] = 0.0;
        step_timestep(&mut s, &[0, 0], &[0, 0], &cfg, StepMode::TRAIN).unwrap();
        let w0 = s.w_plus[0];
        let m0 = s.w_minus[0];
        step_timestep(&mut s, &[1, 0], &[0, 0], &cfg, StepMode::TRAIN).unwrap();
        assert!(s.w_plus[0] < w0);
        assert_eq!(s.w_minus[0], m0);
        step_timestep(&mut s, &[0, 0], &[1, 0], &cfg, StepMode::TRAIN).unwrap();
        assert!(s.w_minus[0] > m0);
    }

    #[test]
    fn weights_stay_in_their_bands() {
        let cfg = SnnConfig {
            eta_pre: 0.5,
            eta_post: 0.5,
            w_max: 0.2,
            ..small(3, 3)
        };
        let mut s = quiet(&cfg);
        let mut rng = RngStream::new(5);
        for t in 0..200 {
            let sp: Vec<u8> = (0..3).map(|_| u8::from(rng.bernoulli(0.5))).collect();
            let sm: Vec<u8> = sp
                .iter()
                .map(|&x| u8::from(x == 0 && rng.bernoulli(0.5)))
                .collect();
            if t % 7 == 0 {
                s.neurons.v.fill(0.0);
            }
            step_timestep(&mut s, &sp, &sm, &cfg, StepMode::TRAIN).unwrap();
            assert!(s.w_plus.iter().all(|&w| (0.0..=0.2).contains(&w)));
            assert!(s.w_minus.iter().all(|&w| (-0.2..=0.0).contains(&w)));
        }
    }

    #[test]
    fn frozen_mode_keeps_weights_bit_identical() {
        let cfg = SnnConfig {
            w_max: 10.0,
            ..small(4, 5)
        };
        let mut s = quiet(&cfg);
        let w = (s.w_plus.clone(), s.w_minus.clone());
        let train = encode(
            &[0.9, -0.8, 0.7, 0.0],
            1.0,
            cfg.timesteps,
            &mut RngStream::new(1),
        )
        .unwrap();
        let act = simulate_sample(&mut s, &train, &cfg, StepMode::FROZEN).unwrap();
        assert!(act.spike_counts.iter().sum::<u32>() > 0);
        assert_eq!((s.w_plus.clone(), s.w_minus.clone()), w);
    }

    #[test]
    fn dominant_column_wins() {
        let cfg = small(4, 8);
        let mut s = quiet(&cfg);
        s.w_plus.fill(0.0);
        s.w_minus.fill(0.0);
        for i in 0..4 {
            s.w_plus[i * 8 + 5] = cfg.w_max;
        }
        let train = SpikeTrain::from_parts(
            cfg.timesteps,
            4,
            vec![1; 4 * cfg.timesteps],
            vec![0; 4 * cfg.timesteps],
        )
        .unwrap();
        let act = simulate_sample(&mut s, &train, &cfg, StepMode::TRAIN).unwrap();
        assert_eq!(act.winner, 5);
        assert!(act.spike_counts[5] > 0);
    }

    #[test]
    fn silent_input_picks_index_zero() {
        let cfg = small(3, 4);
        let mut s = quiet(&cfg);
        let act = simulate_sample(
            &mut s,
            &SpikeTrain::empty(cfg.timesteps, 3),
            &cfg,
            StepMode::TRAIN,
        )
        .unwrap();
        assert_eq!(act.spike_counts, vec![0; 4]);
        assert_eq!(act.winner, 0);
    }

    #[test]
    fn tie_break_order() {
        assert_eq!(pick_winner(&[1, 3, 3], &[0.0, -1.0, -0.5]), 2);
        assert_eq!(pick_winner(&[2, 2], &[-60.0, -60.0]), 0);
        assert_eq!(pick_winner(&[0, 0, 1], &[5.0, 5.0, -70.0]), 2);
    }

    #[test]
    fn init_is_uniform_per_decile() {
        let cfg = SnnConfig {
            d: 100,
            k: 1000,
            ..SnnConfig::default()
        };
        let s = SnnState::init(&cfg, &mut RngStream::new(11)).unwrap();
        let hi = 0.3 * cfg.w_max;
        let n = s.w_plus.len() as f64;
        let sigma = (n * 0.1 * 0.9).sqrt();
        for weights in [&s.w_plus, &s.w_minus] {
            let mut bins = [0usize; 10];
            for &w in weights.iter() {
                let b = ((w.abs() / hi) * 10.0).floor() as usize;
                bins[b.min(9)] += 1;
            }
            for c in bins {
                assert!((c as f64 - n / 10.0).abs() < 3.0 * sigma, "{bins:?}");
            }
        }
        assert_eq!(s, SnnState::init(&cfg, &mut RngStream::new(11)).unwrap());
        assert!(s.neurons.eps.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn identical_trains_get_identical_labels() {
        let cfg = SnnConfig {
            w_max: 10.0,
            ..small(3, 6)
        };
        let s = quiet(&cfg);
        let train = encode(
            &[0.5, -0.5, 0.7],
            1.0,
            cfg.timesteps,
            &mut RngStream::new(2),
        )
        .unwrap();
        let acts = label_trains(&s, &vec![train; 10], &cfg).unwrap();
        assert!(acts.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn cluster_epoch_is_deterministic() {
        let mut rng = RngStream::new(3);
        let x = Tensor::new(vec![12, 4], (0..48).map(|_| rng.normal()).collect()).unwrap();
        let feats = ProcessedFeatures::normalize_rows(&x).unwrap();
        let cfg = SnnConfig {
            w_max: 5.0,
            ..small(4, 5)
        };
        let a = cluster_epoch(&feats, &cfg, 1.0, &RngStream::new(9)).unwrap();
        let b = cluster_epoch(&feats, &cfg, 1.0, &RngStream::new(9)).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.state, b.state);
        assert!(a.labels.as_slice().iter().all(|&l| l < 5));
        assert!(a.stats.p_input > 0.0);
    }

    #[test]
    fn objective_is_mean_l1_distance() {
        let cfg = small(2, 2);
        let mut s = quiet(&cfg);
        // combined columns: 0 -> (0, 1), 1 -> (0.6, -0.8)
        s.w_plus = vec![0.0, 0.6, 1.0, 0.0];
        s.w_minus = vec![0.0, 0.0, 0.0, -0.8];
        let feats = |rows: Vec<f64>| {
            ProcessedFeatures::normalize_rows(&Tensor::new(vec![rows.len() / 2, 2], rows).unwrap())
                .unwrap()
        };
        let one = PseudoLabels::new(vec![0], 2).unwrap();
        assert_eq!(
            clustering_objective(&feats(vec![1.0, 0.0]), &s, &one).unwrap(),
            2.0
        );
        let exact = PseudoLabels::new(vec![1, 0], 2).unwrap();
        let got = clustering_objective(&feats(vec![0.6, -0.8, 0.0, 1.0]), &s, &exact).unwrap();
        assert!(got.abs() < 1e-12);
    }
}
