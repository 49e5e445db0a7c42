//! Generates a procedural image set, writes it to disk, reads it back and
//! checks the round trip.

use deep_stdp::io::config::DataConfig;
use deep_stdp::io::dataset::{load_dataset, save_dataset};
use deep_stdp::io::synth::generate;

fn main() -> deep_stdp::Result<()> {
    let cfg = DataConfig {
        classes: 4,
        per_class: 8,
        height: 12,
        width: 12,
        sigma: 0.3,
        ..DataConfig::default()
    };
    let data = generate(&cfg.spec())?;
    let dir = std::env::temp_dir().join("deepstdp-dataset-example");
    save_dataset(&dir, &data, Some(&cfg))?;
    let back = load_dataset(&dir)?;
    println!(
        "wrote {} samples of shape {:?} to {}",
        data.len(),
        &data.inputs.dims()[1..],
        dir.display()
    );
    println!(
        "round trip identical: {}",
        back.inputs == data.inputs && back.labels == data.labels
    );
    print!("{}", std::fs::read_to_string(dir.join("manifest.txt"))?);

    // first image of class 0 as ASCII
    let img = data.inputs.row(0);
    for y in 0..cfg.height {
        let line: String = (0..cfg.width)
            .map(|x| {
                if img[y * cfg.width + x] > 0.5 {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
