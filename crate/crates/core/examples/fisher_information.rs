//! Empirical Fisher trace of the network under its own pseudo-labels, split
//! into feature and head parameters, before and after some training.

use deep_stdp::convnet::{ConvNet, ConvNetSpec, ParamMask, TrainConfig};
use deep_stdp::io::config::DataConfig;
use deep_stdp::io::synth::generate;
use deep_stdp::metrics::{fim_trace, fim_trace_with, FisherLabels, FisherOptions};
use deep_stdp::numerics::{RngStream, Tensor};
use deep_stdp::snn::PseudoLabels;

fn report(tag: &str, net: &ConvNet, images: &Tensor, y: &PseudoLabels) -> deep_stdp::Result<()> {
    let total = fim_trace(net, images, y)?;
    let features = fim_trace_with(
        net,
        images,
        y,
        FisherOptions {
            mask: ParamMask::Features,
            ..FisherOptions::default()
        },
        None,
    )?;
    // labels drawn from the model's own predictive distribution
    let sampled = fim_trace_with(
        net,
        images,
        y,
        FisherOptions {
            labels: FisherLabels::Sampled,
            ..FisherOptions::default()
        },
        Some(&mut RngStream::new(0)),
    )?;
    println!(
        "{tag:>8}: trace {total:10.4}  features {features:10.4}  head {:10.4}  model-sampled {sampled:10.4}",
        total - features
    );
    Ok(())
}

fn main() -> deep_stdp::Result<()> {
    let data = generate(
        &DataConfig {
            classes: 3,
            per_class: 40,
            ..DataConfig::default()
        }
        .spec(),
    )?;
    let mut rng = RngStream::new(4);
    let mut net = ConvNet::new(ConvNetSpec::reference(16, 16, 3), &mut rng)?;
    let y = PseudoLabels::new(data.labels.clone(), 3)?;
    report("initial", &net, &data.inputs, &y)?;
    let cfg = TrainConfig {
        lr: 0.05,
        head_reinit: false,
        ..TrainConfig::default()
    };
    for _ in 0..5 {
        net.train_pass(&data.inputs, &y, &cfg, &mut rng)?;
    }
    report("trained", &net, &data.inputs, &y)?;
    Ok(())
}
