//! `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, keys are namespaced with
//! dots (`snn.v_thr = -52`). Every key has a default; unknown or repeated
//! keys are errors.

use std::collections::HashSet;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::synth::{SynthKind, SynthSpec};
use crate::pipeline::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    Blobs,
    Images,
}

/// Synthetic dataset description, flattened for the config file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataConfig {
    pub kind: DataKind,
    pub classes: usize,
    pub per_class: usize,
    /// Blob dimension.
    pub d: usize,
    pub height: usize,
    pub width: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            kind: DataKind::Images,
            classes: 5,
            per_class: 100,
            d: 16,
            height: 16,
            width: 16,
            sigma: 2.0,
            seed: 0,
        }
    }
}

impl DataConfig {
    pub fn spec(&self) -> SynthSpec {
        SynthSpec {
            classes: self.classes,
            per_class: self.per_class,
            kind: match self.kind {
                DataKind::Blobs => SynthKind::Blobs { d: self.d },
                DataKind::Images => SynthKind::Images {
                    height: self.height,
                    width: self.width,
                },
            },
            sigma: self.sigma,
            seed: self.seed,
        }
    }
}

/// Everything a config file can set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Experiment {
    pub run: RunConfig,
    pub data: DataConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_kind(key: &str, value: &str) -> Result<DataKind> {
    match value {
        "blobs" => Ok(DataKind::Blobs),
        "images" => Ok(DataKind::Images),
        _ => Err(Error::Config(format!(
            "{key}: expected blobs or images, got {value:?}"
        ))),
    }
}

fn parse_opt<T: FromStr>(key: &str, value: &str, none: &str) -> Result<Option<T>> {
    if value == none {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show_opt<T: Display>(v: Option<T>, none: &str) -> String {
    v.map_or_else(|| none.to_string(), |x| x.to_string())
}

impl Experiment {
    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let r = &mut self.run;
        let d = &mut self.data;
        match key {
            "method" => r.method = v.parse()?,
            "epochs" => r.epochs = parse(key, v)?,
            "reassign_freq" => r.reassign_freq = parse_opt(key, v, "auto")?,
            "cluster_multiple" => r.cluster_multiple = parse(key, v)?,
            "gain" => r.gain = parse(key, v)?,
            "d_pca" => r.d_pca = parse(key, v)?,
            "whiten" => r.whiten = parse(key, v)?,
            "d_feat" => r.d_feat = parse(key, v)?,
            "seed" => r.seed = parse(key, v)?,
            "probe_every" => r.probe_every = parse(key, v)?,
            "balanced_sampling" => r.balanced_sampling = parse(key, v)?,
            "log_wall_time" => r.log_wall_time = parse(key, v)?,
            "snn.k" => r.snn.k = parse(key, v)?,
            "snn.d" => r.snn.d = parse(key, v)?,
            "snn.v_rest" => r.snn.v_rest = parse(key, v)?,
            "snn.v_reset" => r.snn.v_reset = parse(key, v)?,
            "snn.v_thr" => r.snn.v_thr = parse(key, v)?,
            "snn.v_decay" => r.snn.v_decay = parse(key, v)?,
            "snn.refractory" => r.snn.refractory = parse(key, v)?,
            "snn.tau_o" => r.snn.tau_o = parse(key, v)?,
            "snn.tau_decay" => r.snn.tau_decay = parse(key, v)?,
            "snn.alpha" => r.snn.alpha = parse(key, v)?,
            "snn.eps_decay" => r.snn.eps_decay = parse(key, v)?,
            "snn.eta_pre" => r.snn.eta_pre = parse(key, v)?,
            "snn.eta_post" => r.snn.eta_post = parse(key, v)?,
            "snn.w_inh" => r.snn.w_inh = parse(key, v)?,
            "snn.timesteps" => r.snn.timesteps = parse(key, v)?,
            "snn.w_max" => r.snn.w_max = parse(key, v)?,
            "snn.label_pass" => r.snn.label_pass = v.parse()?,
            "snn.weight_norm" => r.snn.weight_norm = parse_opt(key, v, "none")?,
            "kmeans.k" => r.kmeans.k = parse(key, v)?,
            "kmeans.it" => r.kmeans.it = parse(key, v)?,
            "kmeans.tol" => r.kmeans.tol = parse(key, v)?,
            "train.lr" => r.train.lr = parse(key, v)?,
            "train.epochs_per_reassign" => r.train.epochs_per_reassign = parse(key, v)?,
            "train.batch" => r.train.batch = parse(key, v)?,
            "train.head_reinit" => r.train.head_reinit = parse(key, v)?,
            "probe.epochs" => r.probe.epochs = parse(key, v)?,
            "probe.lr" => r.probe.lr = parse(key, v)?,
            "probe.train_fraction" => r.probe.train_fraction = parse(key, v)?,
            "probe.standardize" => r.probe.standardize = parse(key, v)?,
            "data.kind" => d.kind = parse_kind(key, v)?,
            "data.classes" => d.classes = parse(key, v)?,
            "data.per_class" => d.per_class = parse(key, v)?,
            "data.d" => d.d = parse(key, v)?,
            "data.height" => d.height = parse(key, v)?,
            "data.width" => d.width = parse(key, v)?,
            "data.sigma" => d.sigma = parse(key, v)?,
            "data.seed" => d.seed = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let r = &self.run;
        let d = &self.data;
        vec![
            ("method", r.method.to_string()),
            ("epochs", r.epochs.to_string()),
            ("reassign_freq", show_opt(r.reassign_freq, "auto")),
            ("cluster_multiple", r.cluster_multiple.to_string()),
            ("gain", r.gain.to_string()),
            ("d_pca", r.d_pca.to_string()),
            ("whiten", r.whiten.to_string()),
            ("d_feat", r.d_feat.to_string()),
            ("seed", r.seed.to_string()),
            ("probe_every", r.probe_every.to_string()),
            ("balanced_sampling", r.balanced_sampling.to_string()),
            ("log_wall_time", r.log_wall_time.to_string()),
            ("snn.k", r.snn.k.to_string()),
            ("snn.d", r.snn.d.to_string()),
            ("snn.v_rest", r.snn.v_rest.to_string()),
            ("snn.v_reset", r.snn.v_reset.to_string()),
            ("snn.v_thr", r.snn.v_thr.to_string()),
            ("snn.v_decay", r.snn.v_decay.to_string()),
            ("snn.refractory", r.snn.refractory.to_string()),
            ("snn.tau_o", r.snn.tau_o.to_string()),
            ("snn.tau_decay", r.snn.tau_decay.to_string()),
            ("snn.alpha", r.snn.alpha.to_string()),
            ("snn.eps_decay", r.snn.eps_decay.to_string()),
            ("snn.eta_pre", r.snn.eta_pre.to_string()),
            ("snn.eta_post", r.snn.eta_post.to_string()),
            ("snn.w_inh", r.snn.w_inh.to_string()),
            ("snn.timesteps", r.snn.timesteps.to_string()),
            ("snn.w_max", r.snn.w_max.to_string()),
            ("snn.label_pass", r.snn.label_pass.to_string()),
            ("snn.weight_norm", show_opt(r.snn.weight_norm, "none")),
            ("kmeans.k", r.kmeans.k.to_string()),
            ("kmeans.it", r.kmeans.it.to_string()),
            ("kmeans.tol", r.kmeans.tol.to_string()),
            ("train.lr", r.train.lr.to_string()),
            (
                "train.epochs_per_reassign",
                r.train.epochs_per_reassign.to_string(),
            ),
            ("train.batch", r.train.batch.to_string()),
            ("train.head_reinit", r.train.head_reinit.to_string()),
            ("probe.epochs", r.probe.epochs.to_string()),
            ("probe.lr", r.probe.lr.to_string()),
            ("probe.train_fraction", r.probe.train_fraction.to_string()),
            ("probe.standardize", r.probe.standardize.to_string()),
            (
                "data.kind",
                match d.kind {
                    DataKind::Blobs => "blobs",
                    DataKind::Images => "images",
                }
                .to_string(),
            ),
            ("data.classes", d.classes.to_string()),
            ("data.per_class", d.per_class.to_string()),
            ("data.d", d.d.to_string()),
            ("data.height", d.height.to_string()),
            ("data.width", d.width.to_string()),
            ("data.sigma", d.sigma.to_string()),
            ("data.seed", d.seed.to_string()),
        ]
    }

    /// Applies `key = value` lines on top of the defaults and validates.
    pub fn parse(text: &str) -> Result<Self> {
        let mut exp = Experiment::default();
        exp.apply(text)?;
        exp.run.validate()?;
        Ok(exp)
    }

    /// Applies `key = value` lines on top of `self` without validating.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        let mut seen = HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key:?}",
                    no + 1
                )));
            }
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", no + 1, strip(e))))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}
