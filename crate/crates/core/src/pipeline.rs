//! The deep-clustering loop: extract features, cluster them into
//! pseudo-labels, train the network on those labels, repeat.
//!
//! Ground-truth labels never enter [`run_deep_cluster`]; diagnostics that
//! need them are supplied as an opaque probe callback.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::convnet::{ConvNet, ConvNetSpec, TrainConfig};
use crate::cost::{stdp_energy, EnergyReport, SpikeStats};
use crate::encoding::{preprocess, ProcessedFeatures};
use crate::error::{Error, Result};
use crate::io::synth::Dataset;
use crate::kmeans::{kmeans_fit, KMeansParams};
use crate::metrics::{fim_trace, linear_probe, nmi, ProbeConfig};
use crate::numerics::{RngStream, Tensor};
use crate::snn::{cluster_epoch, clustering_objective, PseudoLabels, SnnConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Stdp,
    Kmeans,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stdp" => Ok(Method::Stdp),
            "kmeans" => Ok(Method::Kmeans),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Stdp => "stdp",
            Method::Kmeans => "kmeans",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub epochs: usize,
    /// Clustering passes per epoch; the last assignment is used.
    /// `None` picks 1 for STDP and 2 for k-means.
    pub reassign_freq: Option<usize>,
    /// Pseudo-classes per true class.
    pub cluster_multiple: usize,
    /// `k` and `d` are overwritten per run.
    pub snn: SnnConfig,
    /// `k` is overwritten per run.
    pub kmeans: KMeansParams,
    pub train: TrainConfig,
    /// Spike probability per unit of feature magnitude.
    pub gain: f64,
    pub d_pca: usize,
    pub whiten: bool,
    /// Width of the feature layer.
    pub d_feat: usize,
    pub seed: u64,
    /// Probe every this many epochs (and at the last one); 0 disables.
    pub probe_every: usize,
    pub probe: ProbeConfig,
    /// Sample training images uniformly over pseudo-classes.
    pub balanced_sampling: bool,
    /// Record wall-clock time; off keeps logs byte-reproducible.
    pub log_wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Stdp,
            epochs: 20,
            reassign_freq: None,
            cluster_multiple: 10,
            snn: SnnConfig::default(),
            kmeans: KMeansParams::default(),
            train: TrainConfig::default(),
            gain: 1.0,
            d_pca: 32,
            whiten: false,
            d_feat: 64,
            seed: 0,
            probe_every: 5,
            probe: ProbeConfig::default(),
            balanced_sampling: false,
            log_wall_time: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.cluster_multiple == 0 {
            return Err(Error::Config("cluster_multiple must be at least 1".into()));
        }
        if self.reassign_freq == Some(0) {
            return Err(Error::Config("reassign_freq must be at least 1".into()));
        }
        if self.d_pca == 0 || self.d_feat == 0 {
            return Err(Error::Config("d_pca and d_feat must be positive".into()));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::Config("gain must be positive".into()));
        }
        self.train.validate()?;
        self.kmeans.validate()?;
        self.snn.validate()
    }

    pub fn reassignments(&self) -> usize {
        self.reassign_freq.unwrap_or(match self.method {
            Method::Stdp => 1,
            Method::Kmeans => 2,
        })
    }

    /// Clustering config with `k` and `d` filled in for this data.
    fn sized(&self, k: usize, d: usize) -> (SnnConfig, KMeansParams) {
        let snn = SnnConfig {
            k,
            d,
            ..self.snn.clone()
        };
        let km = KMeansParams { k, ..self.kmeans };
        (snn, km)
    }
}

/// One clustering pass over preprocessed features.
#[derive(Clone, Debug)]
pub struct Clustering {
    pub labels: PseudoLabels,
    /// Mean L1 distance to the winning weight column (STDP) or the k-means
    /// sum of squares.
    pub objective: f64,
    pub energy: EnergyReport,
    pub spike_stats: Option<SpikeStats>,
}

pub fn cluster_features(
    features: &ProcessedFeatures,
    cfg: &RunConfig,
    k: usize,
    rng: &RngStream,
) -> Result<Clustering> {
    let (snn, km) = cfg.sized(k, features.d());
    match cfg.method {
        Method::Stdp => {
            let out = cluster_epoch(features, &snn, cfg.gain, rng)?;
            let objective = clustering_objective(features, &out.state, &out.labels)?;
            let energy = stdp_energy(&out.stats, snn.timesteps as u64, features.n() as u64)?;
            Ok(Clustering {
                labels: out.labels,
                objective,
                energy,
                spike_stats: Some(out.stats),
            })
        }
        Method::Kmeans => {
            let out = kmeans_fit(features.matrix(), &km, &mut rng.derive("kmeans"))?;
            Ok(Clustering {
                labels: PseudoLabels::new(out.assignments, k)?,
                objective: out.objective,
                energy: out.op_count.report(),
                spike_stats: None,
            })
        }
    }
}

pub fn generate_pseudo_labels(
    features: &ProcessedFeatures,
    cfg: &RunConfig,
    k: usize,
    rng: &RngStream,
) -> Result<PseudoLabels> {
    Ok(cluster_features(features, cfg, k, rng)?.labels)
}

/// One line of the run log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// NMI between this and the previous epoch's pseudo-labels.
    pub nmi_prev: Option<f64>,
    pub fim_trace: f64,
    pub objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_acc: Option<f64>,
    pub energy_mj: f64,
    pub wall_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_input: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_exc: Option<f64>,
    pub train_loss: f64,
    pub clusters_used: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<EpochRecord>,
}

impl RunLog {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(|r| record_line(r) + "\n").collect()
    }

    pub fn total_energy_mj(&self) -> f64 {
        self.records.iter().map(|r| r.energy_mj).sum()
    }
}

pub fn record_line(r: &EpochRecord) -> String {
    serde_json::to_string(r).expect("epoch record serializes")
}

pub struct RunOutput {
    pub log: RunLog,
    pub net: ConvNet,
    pub labels: PseudoLabels,
}

/// Probe callback: receives pre-PCA features of every image, returns an
/// accuracy.
pub type Probe<'a> = dyn Fn(&Tensor) -> Result<f64> + 'a;

/// Runs the full loop. `on_epoch` sees each record as soon as it is
/// complete, so a failing run still leaves its finished epochs behind.
pub fn run_deep_cluster(
    cfg: &RunConfig,
    images: &Tensor,
    classes: usize,
    probe: Option<&Probe>,
    on_epoch: &mut dyn FnMut(&EpochRecord) -> Result<()>,
) -> Result<RunOutput> {
    cfg.validate()?;
    let dims = images.dims();
    if dims.len() != 4 {
        return Err(Error::invalid(format!(
            "images must be N x C x H x W, got {} dims",
            dims.len()
        )));
    }
    if images.nrows() == 0 {
        return Err(Error::invalid("empty dataset"));
    }
    if classes == 0 {
        return Err(Error::invalid("class count must be positive"));
    }
    let k = cfg.cluster_multiple * classes;
    let n = images.nrows();
    if cfg.method == Method::Kmeans && n < k {
        return Err(Error::invalid(format!(
            "need at least {k} images for k-means"
        )));
    }

    let root = RngStream::new(cfg.seed);
    let spec = ConvNetSpec {
        channels: dims[1],
        d_feat: cfg.d_feat,
        ..ConvNetSpec::reference(dims[2], dims[3], k)
    };
    let mut net = ConvNet::new(spec, &mut root.derive("net-init"))?;
    let mut log = RunLog::default();
    let mut prev: Option<PseudoLabels> = None;
    let reassign = cfg.reassignments();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let raw = net.extract_features(images)?;
        let processed = preprocess(&raw, cfg.d_pca.min(raw.ncols()), cfg.whiten)?;

        let mut energy = EnergyReport::zero();
        let mut last = None;
        for r in 0..reassign {
            let stream = root.derive_indexed("cluster", ((epoch - 1) * reassign + r) as u64);
            let c = cluster_features(&processed, cfg, k, &stream)?;
            energy = EnergyReport::from_counts(
                energy.adds + c.energy.adds,
                energy.mults + c.energy.mults,
            );
            last = Some(c);
        }
        let clustering = last.expect("at least one reassignment");
        let labels = clustering.labels;

        let mut train_rng = root.derive_indexed("train", epoch as u64);
        if cfg.train.head_reinit {
            net.reinit_head(&mut train_rng);
        }
        let mut train_loss = 0.0;
        for _ in 0..cfg.train.epochs_per_reassign {
            train_loss = if cfg.balanced_sampling {
                let (x, y) = balanced_resample(images, &labels, &mut train_rng)?;
                net.train_pass(&x, &y, &cfg.train, &mut train_rng)?
            } else {
                net.train_pass(images, &labels, &cfg.train, &mut train_rng)?
            };
        }

        let nmi_prev = prev
            .as_ref()
            .map(|p| nmi(p.as_slice(), labels.as_slice()))
            .transpose()?;
        let fim = fim_trace(&net, images, &labels)?;
        let probe_due =
            cfg.probe_every > 0 && (epoch % cfg.probe_every == 0 || epoch == cfg.epochs);
        let probe_acc = match probe {
            Some(f) if probe_due => Some(f(&net.extract_features(images)?)?),
            _ => None,
        };

        let record = EpochRecord {
            epoch,
            nmi_prev,
            fim_trace: fim,
            objective: clustering.objective,
            probe_acc,
            energy_mj: energy.energy_mj,
            wall_ms: if cfg.log_wall_time {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
            p_input: clustering.spike_stats.map(|s| s.p_input),
            p_exc: clustering.spike_stats.map(|s| s.p_exc),
            train_loss,
            clusters_used: labels.occupied(),
        };
        on_epoch(&record)?;
        log.records.push(record);
        prev = Some(labels);
    }

    Ok(RunOutput {
        log,
        net,
        labels: prev.expect("at least one epoch"),
    })
}

/// Convenience wrapper that probes against the dataset's own labels.
pub fn run_with_dataset(
    cfg: &RunConfig,
    data: &Dataset,
    on_epoch: &mut dyn FnMut(&EpochRecord) -> Result<()>,
) -> Result<RunOutput> {
    let probe_cfg = ProbeConfig {
        seed: cfg.seed,
        ..cfg.probe
    };
    let truth = &data.labels;
    let probe = move |features: &Tensor| linear_probe(features, truth, &probe_cfg);
    run_deep_cluster(cfg, &data.inputs, data.classes, Some(&probe), on_epoch)
}

/// Draws `N` samples by picking a used pseudo-class uniformly, then a member.
fn balanced_resample(
    images: &Tensor,
    labels: &PseudoLabels,
    rng: &mut RngStream,
) -> Result<(Tensor, PseudoLabels)> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labels.k()];
    for (i, &l) in labels.as_slice().iter().enumerate() {
        members[l].push(i);
    }
    members.retain(|m| !m.is_empty());
    let n = images.nrows();
    let mut data = Vec::with_capacity(images.data().len());
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let group = &members[rng.index(members.len())];
        let i = group[rng.index(group.len())];
        data.extend_from_slice(images.row(i));
        y.push(labels.as_slice()[i]);
    }
    Ok((
        Tensor::new(images.dims().to_vec(), data)?,
        PseudoLabels::new(y, labels.k())?,
    ))
}
