//! Turns a few feature vectors into signed Poisson spike trains and compares
//! empirical firing rates with the encoded magnitudes.

use deep_stdp::encoding::{encode, ProcessedFeatures};
use deep_stdp::numerics::{RngStream, Tensor};

fn main() -> deep_stdp::Result<()> {
    let raw = Tensor::new(
        vec![3, 4],
        vec![
            3.0, -1.0, 0.0, 0.5, //
            0.2, 0.2, -2.0, 1.0, //
            -1.0, 4.0, 0.3, 0.0,
        ],
    )?;
    let feats = ProcessedFeatures::normalize_rows(&raw)?;
    let mut rng = RngStream::new(5);
    for i in 0..feats.n() {
        let f = feats.row(i);
        let train = encode(f, 1.0, 2000, &mut rng)?;
        println!("sample {i}");
        for (c, &v) in f.iter().enumerate() {
            let plus: u32 = (0..train.timesteps())
                .map(|t| train.plus(t)[c] as u32)
                .sum();
            let minus: u32 = (0..train.timesteps())
                .map(|t| train.minus(t)[c] as u32)
                .sum();
            let t = train.timesteps() as f64;
            println!(
                "  channel {c}: feature {v:+.3}  rate+ {:.3}  rate- {:.3}",
                plus as f64 / t,
                minus as f64 / t
            );
        }
    }
    Ok(())
}
