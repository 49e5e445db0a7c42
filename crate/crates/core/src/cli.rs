//! Command-line interface behind the `deepstdp` binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or configuration error.
//! Failures print one `error: <kind>: <message>` line to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::convnet::{ConvNet, ConvNetSpec};
use crate::cost::{kmeans_energy, stdp_energy, EnergyReport, SpikeStats};
use crate::encoding::preprocess;
use crate::error::{Error, Result};
use crate::io::config::{DataKind, Experiment};
use crate::io::dataset::{load_dataset, save_dataset};
use crate::io::runlog::RunLogFile;
use crate::io::synth::generate;
use crate::io::tensor::{TensorData, TensorFile};
use crate::metrics::{fim_trace, linear_probe, nmi, purity, ProbeConfig};
use crate::numerics::RngStream;
use crate::pipeline::{cluster_features, run_with_dataset, Method};
use crate::snn::{cluster_epoch, PseudoLabels};

#[derive(Parser, Debug)]
#[command(
    name = "deepstdp",
    version,
    about = "STDP pseudo-labels for deep clustering"
)]
struct Cli {
    /// Overrides every seed taken from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset directory.
    GenSynth(GenSynthArgs),
    /// Cluster a feature tensor into pseudo-labels.
    Cluster(ClusterArgs),
    /// Run the deep-clustering loop on a dataset directory.
    Train(TrainArgs),
    /// Linear-probe accuracy of features against labels.
    Probe(ProbeArgs),
    #[command(subcommand)]
    Metrics(MetricsCommand),
    #[command(subcommand)]
    Cost(CostCommand),
    /// Train one STDP network on a feature tensor and save its weights.
    ExportWeights(ExportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Blobs,
    Images,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Stdp,
    Kmeans,
}

#[derive(Args, Debug)]
struct GenSynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Starting point for the `data.*` keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Feature tensor, one row per sample.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output label tensor.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// JSON-lines log.
    #[arg(long)]
    log: PathBuf,
    /// Save the final network parameters here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
}

#[derive(Subcommand, Debug)]
enum MetricsCommand {
    /// NMI between two label files.
    Nmi {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Purity of an assignment against ground truth.
    Purity {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Fisher-information trace of a checkpoint on pseudo-labelled images.
    Fim {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum CostCommand {
    /// Energy of `it` Lloyd iterations over `n` points.
    Kmeans {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        d: u64,
        #[arg(long)]
        it: u64,
        #[arg(long)]
        n: u64,
        /// Also report the total over this many epochs.
        #[arg(long)]
        epochs: Option<u64>,
    },
    /// Energy of one STDP clustering epoch from spike statistics.
    Stdp {
        #[arg(long)]
        p_input: f64,
        #[arg(long)]
        p_exc: f64,
        /// Input-to-excitatory synapse count (defaults to d * k).
        #[arg(long)]
        w_exc: Option<u64>,
        /// Inhibitory synapse count (defaults to k * (k - 1)).
        #[arg(long)]
        w_inh: Option<u64>,
        #[arg(long)]
        d: Option<u64>,
        #[arg(long)]
        k: Option<u64>,
        #[arg(long, default_value_t = 400)]
        t: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        epochs: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output tensor `2 x d x k`: excitatory then inhibitory-channel weights.
    #[arg(long)]
    out: PathBuf,
}

/// Runs the CLI against the process streams and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = write!(out, "{e}");
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                    1
                } else {
                    0
                };
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "error: usage: {}", first.trim_start_matches("error: "));
            return 1;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let kind = match &e {
                Error::Io(_) => "io",
                Error::Config(_) => "config",
                Error::Format(_) => "format",
                _ => "data",
            };
            let _ = writeln!(err, "error: {kind}: {}", e.to_string().replace('\n', " "));
            2
        }
    }
}

fn load_experiment(path: Option<&Path>, seed: Option<u64>) -> Result<Experiment> {
    let mut exp = match path {
        Some(p) => Experiment::load(p)?,
        None => Experiment::default(),
    };
    if let Some(s) = seed {
        exp.run.seed = s;
        exp.data.seed = s;
    }
    Ok(exp)
}

fn emit(out: &mut dyn Write, value: serde_json::Value) -> Result<()> {
    writeln!(out, "{value}")?;
    Ok(())
}

fn energy_json(report: &EnergyReport, epochs: Option<u64>) -> serde_json::Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    if let Some(e) = epochs {
        v["epochs"] = json!(e);
        v["total_mj"] = json!(report.repeated(e as f64).energy_mj);
    }
    v
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    TensorFile::read(path)?.to_labels()
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::GenSynth(a) => {
            let mut exp = load_experiment(a.config.as_deref(), seed)?;
            let d = &mut exp.data;
            if let Some(k) = a.kind {
                d.kind = match k {
                    KindArg::Blobs => DataKind::Blobs,
                    KindArg::Images => DataKind::Images,
                };
            }
            d.classes = a.classes.unwrap_or(d.classes);
            d.per_class = a.per_class.unwrap_or(d.per_class);
            d.d = a.d.unwrap_or(d.d);
            d.height = a.height.unwrap_or(d.height);
            d.width = a.width.unwrap_or(d.width);
            d.sigma = a.sigma.unwrap_or(d.sigma);
            let data = generate(&d.spec())?;
            save_dataset(&a.out, &data, Some(d))?;
            emit(
                out,
                json!({"samples": data.len(), "classes": data.classes, "dims": data.inputs.dims()}),
            )
        }
        Command::Cluster(a) => {
            let mut exp = load_experiment(a.config.as_deref(), seed)?;
            exp.run.method = match a.method {
                MethodArg::Stdp => Method::Stdp,
                MethodArg::Kmeans => Method::Kmeans,
            };
            let raw = TensorFile::read(&a.input)?.to_tensor()?;
            let flat =
                crate::numerics::Tensor::new(vec![raw.nrows(), raw.ncols()], raw.into_data())?;
            let feats = preprocess(&flat, exp.run.d_pca.min(flat.ncols()), exp.run.whiten)?;
            let k = match exp.run.method {
                Method::Stdp => exp.run.snn.k,
                Method::Kmeans => exp.run.kmeans.k,
            };
            let c = cluster_features(&feats, &exp.run, k, &RngStream::new(exp.run.seed))?;
            TensorFile::from_labels(c.labels.as_slice())?.write(&a.out)?;
            let mut v = json!({
                "method": exp.run.method.to_string(),
                "k": k,
                "clusters_used": c.labels.occupied(),
                "objective": c.objective,
                "energy_mj": c.energy.energy_mj,
            });
            if let Some(s) = c.spike_stats {
                v["p_input"] = json!(s.p_input);
                v["p_exc"] = json!(s.p_exc);
            }
            emit(out, v)
        }
        Command::Train(a) => {
            let exp = load_experiment(a.config.as_deref(), seed)?;
            let data = load_dataset(&a.data)?;
            let mut log = RunLogFile::create(&a.log)?;
            let result = run_with_dataset(&exp.run, &data, &mut |r| log.append(r))?;
            if let Some(path) = &a.checkpoint {
                let p = result.net.params();
                TensorFile::new(vec![p.len() as u32], TensorData::F64(p.to_vec()))?.write(path)?;
            }
            let last = result.log.records.last().expect("at least one epoch");
            emit(
                out,
                json!({
                    "epochs": result.log.records.len(),
                    "final_probe_acc": last.probe_acc,
                    "final_nmi_prev": last.nmi_prev,
                    "total_energy_mj": result.log.total_energy_mj(),
                }),
            )
        }
        Command::Probe(a) => {
            let raw = TensorFile::read(&a.features)?.to_tensor()?;
            let feats =
                crate::numerics::Tensor::new(vec![raw.nrows(), raw.ncols()], raw.into_data())?;
            let truth = read_labels(&a.labels)?;
            let cfg = ProbeConfig {
                epochs: a.epochs,
                lr: a.lr,
                seed: seed.unwrap_or(0),
                ..ProbeConfig::default()
            };
            emit(
                out,
                json!({"accuracy": linear_probe(&feats, &truth, &cfg)?}),
            )
        }
        Command::Metrics(m) => match m {
            MetricsCommand::Nmi { a, b } => emit(
                out,
                json!({"nmi": nmi(&read_labels(&a)?, &read_labels(&b)?)?}),
            ),
            MetricsCommand::Purity { labels, truth } => emit(
                out,
                json!({"purity": purity(&read_labels(&labels)?, &read_labels(&truth)?)?}),
            ),
            MetricsCommand::Fim {
                checkpoint,
                data,
                labels,
                config,
            } => {
                let exp = load_experiment(config.as_deref(), seed)?;
                let data = load_dataset(&data)?;
                let labels = read_labels(&labels)?;
                let params = TensorFile::read(&checkpoint)?.to_tensor()?.into_data();
                let net = net_from_checkpoint(&exp, data.inputs.dims(), params)?;
                let pseudo = PseudoLabels::new(labels, net.spec().k)?;
                emit(
                    out,
                    json!({"fim_trace": fim_trace(&net, &data.inputs, &pseudo)?}),
                )
            }
        },
        Command::Cost(c) => match c {
            CostCommand::Kmeans {
                k,
                d,
                it,
                n,
                epochs,
            } => emit(out, energy_json(&kmeans_energy(k, d, it, n)?, epochs)),
            CostCommand::Stdp {
                p_input,
                p_exc,
                w_exc,
                w_inh,
                d,
                k,
                t,
                n,
                epochs,
            } => {
                let w_exc = w_exc
                    .or_else(|| d.zip(k).map(|(d, k)| d * k))
                    .ok_or_else(|| Error::invalid("give --w-exc or both --d and --k"))?;
                let w_inh = w_inh
                    .or_else(|| k.map(|k| k * k.saturating_sub(1)))
                    .ok_or_else(|| Error::invalid("give --w-inh or --k"))?;
                let stats = SpikeStats {
                    p_input,
                    p_exc,
                    w_exc_count: w_exc,
                    w_inh_count: w_inh,
                };
                emit(out, energy_json(&stdp_energy(&stats, t, n)?, epochs))
            }
        },
        Command::ExportWeights(a) => {
            let exp = load_experiment(a.config.as_deref(), seed)?;
            let raw = TensorFile::read(&a.input)?.to_tensor()?;
            let flat =
                crate::numerics::Tensor::new(vec![raw.nrows(), raw.ncols()], raw.into_data())?;
            let feats = preprocess(&flat, exp.run.d_pca.min(flat.ncols()), exp.run.whiten)?;
            let cfg = crate::snn::SnnConfig {
                d: feats.d(),
                ..exp.run.snn.clone()
            };
            let ep = cluster_epoch(&feats, &cfg, exp.run.gain, &RngStream::new(exp.run.seed))?;
            let mut data = ep.state.w_plus.clone();
            data.extend_from_slice(&ep.state.w_minus);
            TensorFile::new(vec![2, cfg.d as u32, cfg.k as u32], TensorData::F64(data))?
                .write(&a.out)?;
            emit(
                out,
                json!({"d": cfg.d, "k": cfg.k, "clusters_used": ep.labels.occupied()}),
            )
        }
    }
}

/// Rebuilds a network whose head width is implied by the parameter count.
fn net_from_checkpoint(exp: &Experiment, dims: &[usize], params: Vec<f64>) -> Result<ConvNet> {
    if dims.len() != 4 {
        return Err(Error::invalid("fim needs an N x C x H x W image dataset"));
    }
    let base = ConvNetSpec {
        channels: dims[1],
        d_feat: exp.run.d_feat,
        ..ConvNetSpec::reference(dims[2], dims[3], 1)
    };
    let body = ConvNet::zeros(base.clone())?.head_range().start;
    let per_class = exp.run.d_feat + 1;
    let head = params.len().saturating_sub(body);
    if head == 0 || head % per_class != 0 {
        return Err(Error::Format(format!(
            "checkpoint has {} parameters, which fits no head width",
            params.len()
        )));
    }
    ConvNet::from_params(
        ConvNetSpec {
            k: head / per_class,
            ..base
        },
        params,
    )
}
