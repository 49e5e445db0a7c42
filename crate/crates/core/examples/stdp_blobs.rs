//! Clusters the three-blob reference set with the spiking network and reports
//! agreement with the true classes plus the synaptic energy of the epoch.

use std::path::Path;

use deep_stdp::encoding::preprocess;
use deep_stdp::io::config::Experiment;
use deep_stdp::io::synth::generate;
use deep_stdp::metrics::{nmi, purity};
use deep_stdp::numerics::RngStream;
use deep_stdp::pipeline::cluster_features;

fn main() -> deep_stdp::Result<()> {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/blobs_stdp.cfg");
    let exp = Experiment::load(&cfg)?;
    let data = generate(&exp.data.spec())?;
    let feats = preprocess(&data.inputs, exp.run.d_pca, exp.run.whiten)?;
    let c = cluster_features(
        &feats,
        &exp.run,
        exp.run.snn.k,
        &RngStream::new(exp.run.seed),
    )?;
    let labels = c.labels.as_slice();
    println!("samples         {}", data.len());
    println!(
        "clusters used   {} of {}",
        c.labels.occupied(),
        exp.run.snn.k
    );
    println!("purity          {:.3}", purity(labels, &data.labels)?);
    println!("nmi             {:.3}", nmi(labels, &data.labels)?);
    if let Some(s) = c.spike_stats {
        println!("p_input         {:.4}", s.p_input);
        println!("p_exc           {:.2e}", s.p_exc);
    }
    println!("energy          {:.4} mJ", c.energy.energy_mj);
    Ok(())
}
