//! Lloyd's k-means on Gaussian blobs: objective trace, cluster quality and the
//! counted arithmetic compared with the closed-form operation count.

use deep_stdp::cost::kmeans_op_count;
use deep_stdp::io::synth::{generate, SynthKind, SynthSpec};
use deep_stdp::kmeans::{kmeans_fit, KMeansParams};
use deep_stdp::metrics::{nmi, purity};
use deep_stdp::numerics::RngStream;

fn main() -> deep_stdp::Result<()> {
    let data = generate(&SynthSpec {
        classes: 4,
        per_class: 250,
        kind: SynthKind::Blobs { d: 8 },
        sigma: 0.4,
        seed: 2,
    })?;
    let params = KMeansParams::new(4, 10);
    let fit = kmeans_fit(&data.inputs, &params, &mut RngStream::new(1))?;
    for (i, obj) in fit.history.iter().enumerate() {
        println!("iteration {i:2}: objective {obj:.4}");
    }
    println!("purity {:.3}", purity(&fit.assignments, &data.labels)?);
    println!("nmi    {:.3}", nmi(&fit.assignments, &data.labels)?);
    let formula = kmeans_op_count(4, 8, fit.iterations_run as u64, data.len() as u64)?;
    println!("counted ops  {:?} (reseeds {})", fit.op_count, fit.reseeds);
    println!("formula ops  {formula:?}");
    println!("energy       {:.6} mJ", fit.op_count.report().energy_mj);
    Ok(())
}
