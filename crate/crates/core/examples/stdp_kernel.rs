//! Prints the pair-based STDP window: weight change against the post minus
//! pre spike time difference.

use deep_stdp::snn::{pair_stdp_kernel, PairStdpParams};

fn main() -> deep_stdp::Result<()> {
    let p = PairStdpParams::new(0.01, 0.012, 20.0, 20.0)?;
    // the window is undefined at exactly zero
    for dt in (-60..=60).step_by(10).filter(|&dt| dt != 0) {
        let dw = pair_stdp_kernel(dt as f64, &p)?;
        let bar = "#".repeat((dw.abs() * 3000.0) as usize);
        println!("{dt:4} ms {dw:+.5} {bar}");
    }
    Ok(())
}
