//! Energy of one clustering epoch for k-means and for the spiking network at
//! the reference scale, plus how the spiking cost moves with input activity.

use deep_stdp::cost::{kmeans_energy, stdp_energy, SpikeStats};

fn main() -> deep_stdp::Result<()> {
    let km = kmeans_energy(100, 256, 20, 5000)?;
    println!(
        "k-means  epoch {:8.3} mJ   175 epochs {:9.1} mJ",
        km.energy_mj,
        km.repeated(175.0).energy_mj
    );
    let stats = SpikeStats {
        p_input: 0.5992,
        p_exc: 0.0019,
        w_exc_count: 25600,
        w_inh_count: 9900,
    };
    let snn = stdp_energy(&stats, 400, 5000)?;
    println!(
        "STDP     epoch {:8.3} mJ    50 epochs {:9.1} mJ",
        snn.energy_mj,
        snn.repeated(50.0).energy_mj
    );
    println!("\np_input   STDP epoch mJ");
    for p in [0.05, 0.1, 0.2, 0.4, 0.6, 0.8] {
        let r = stdp_energy(
            &SpikeStats {
                p_input: p,
                ..stats
            },
            400,
            5000,
        )?;
        println!("{p:7.2}   {:10.3}", r.energy_mj);
    }
    Ok(())
}
