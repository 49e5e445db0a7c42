//! Supervised sanity run of the convolutional network: train on true classes
//! and watch the loss fall and the frozen features become linearly separable.

use deep_stdp::convnet::{ConvNet, ConvNetSpec, TrainConfig};
use deep_stdp::io::config::DataConfig;
use deep_stdp::io::synth::generate;
use deep_stdp::metrics::{linear_probe, ProbeConfig};
use deep_stdp::numerics::RngStream;
use deep_stdp::snn::PseudoLabels;

fn main() -> deep_stdp::Result<()> {
    let data = generate(
        &DataConfig {
            classes: 4,
            per_class: 30,
            ..DataConfig::default()
        }
        .spec(),
    )?;
    let mut rng = RngStream::new(1);
    let mut net = ConvNet::new(ConvNetSpec::reference(16, 16, 4), &mut rng)?;
    let labels = PseudoLabels::new(data.labels.clone(), 4)?;
    let cfg = TrainConfig {
        lr: 0.05,
        head_reinit: false,
        ..TrainConfig::default()
    };
    let probe = ProbeConfig::default();
    println!("parameters {}", net.num_params());
    for epoch in 1..=6 {
        let loss = net.train_pass(&data.inputs, &labels, &cfg, &mut rng)?;
        let acc = linear_probe(&net.extract_features(&data.inputs)?, &data.labels, &probe)?;
        println!("epoch {epoch}: loss {loss:.4}  probe accuracy {acc:.3}");
    }
    Ok(())
}
