//! Alternates pseudo-labelling and network training on procedural images,
//! once with the spiking clusterer and once with k-means, and prints the
//! per-epoch records side by side.

use deep_stdp::io::config::DataConfig;
use deep_stdp::io::synth::generate;
use deep_stdp::pipeline::{run_with_dataset, Method, RunConfig};
use deep_stdp::snn::SnnConfig;

fn main() -> deep_stdp::Result<()> {
    let data = generate(
        &DataConfig {
            classes: 4,
            per_class: 50,
            seed: 3,
            ..DataConfig::default()
        }
        .spec(),
    )?;
    for method in [Method::Stdp, Method::Kmeans] {
        let mut cfg = RunConfig {
            method,
            epochs: 6,
            probe_every: 3,
            seed: 3,
            snn: SnnConfig {
                w_max: 20.0,
                weight_norm: Some(10.0),
                eta_pre: 1e-4,
                eta_post: 1e-2,
                ..SnnConfig::default()
            },
            ..RunConfig::default()
        };
        cfg.train.lr = 0.1;
        println!("{method}");
        let out = run_with_dataset(&cfg, &data, &mut |r| {
            let nmi = r
                .nmi_prev
                .map_or("   -  ".to_string(), |v| format!("{v:.4}"));
            let acc = r
                .probe_acc
                .map_or(String::new(), |v| format!("  probe {v:.3}"));
            println!(
                "  epoch {:2}  nmi_prev {nmi}  fim {:9.3}  energy {:9.4} mJ  clusters {:3}{acc}",
                r.epoch, r.fim_trace, r.energy_mj, r.clusters_used
            );
            Ok(())
        })?;
        println!(
            "  total clustering energy {:.4} mJ\n",
            out.log.total_energy_mj()
        );
    }
    Ok(())
}
