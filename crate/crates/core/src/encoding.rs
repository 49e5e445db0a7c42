//! Feature preprocessing (PCA + l2) and signed Poisson rate coding.

use crate::error::{ensure_finite, Error, Result};
use crate::numerics::{l2_normalize, PcaModel, RngStream, Tensor};

/// `N x d` feature matrix whose rows are unit-norm or exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessedFeatures {
    x: Tensor,
}

impl ProcessedFeatures {
    /// l2-normalizes every row of `x`.
    pub fn normalize_rows(x: &Tensor) -> Result<Self> {
        ensure_finite(x.data(), "features")?;
        let mut data = Vec::with_capacity(x.data().len());
        for r in x.rows() {
            data.extend(l2_normalize(r));
        }
        Ok(Self {
            x: Tensor::new(vec![x.nrows(), x.ncols()], data)?,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn matrix(&self) -> &Tensor {
        &self.x
    }
}

/// PCA-reduces `raw` to `d_pca` dimensions, then l2-normalizes every row.
pub fn preprocess(raw: &Tensor, d_pca: usize, whiten: bool) -> Result<ProcessedFeatures> {
    preprocess_with_model(raw, d_pca, whiten).map(|(f, _)| f)
}

pub fn preprocess_with_model(
    raw: &Tensor,
    d_pca: usize,
    whiten: bool,
) -> Result<(ProcessedFeatures, PcaModel)> {
    let pca = PcaModel::fit(raw, d_pca, whiten)?;
    let reduced = pca.transform(raw)?;
    Ok((ProcessedFeatures::normalize_rows(&reduced)?, pca))
}

/// Binary spike raster for one sample on the positive and negative channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeTrain {
    timesteps: usize,
    d: usize,
    plus: Vec<u8>,
    minus: Vec<u8>,
}

impl SpikeTrain {
    pub fn empty(timesteps: usize, d: usize) -> Self {
        Self {
            timesteps,
            d,
            plus: vec![0; timesteps * d],
            minus: vec![0; timesteps * d],
        }
    }

    pub fn from_parts(timesteps: usize, d: usize, plus: Vec<u8>, minus: Vec<u8>) -> Result<Self> {
        if plus.len() != timesteps * d {
            return Err(Error::dim(
                "positive spike raster",
                timesteps * d,
                plus.len(),
            ));
        }
        if minus.len() != timesteps * d {
            return Err(Error::dim(
                "negative spike raster",
                timesteps * d,
                minus.len(),
            ));
        }
        if plus.iter().chain(&minus).any(|&s| s > 1) {
            return Err(Error::invalid("spike rasters must be binary"));
        }
        if plus.iter().zip(&minus).any(|(&p, &m)| p == 1 && m == 1) {
            return Err(Error::invalid("a component cannot spike on both channels"));
        }
        Ok(Self {
            timesteps,
            d,
            plus,
            minus,
        })
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn plus(&self, t: usize) -> &[u8] {
        &self.plus[t * self.d..(t + 1) * self.d]
    }

    pub fn minus(&self, t: usize) -> &[u8] {
        &self.minus[t * self.d..(t + 1) * self.d]
    }

    /// Total spikes over both channels.
    pub fn spike_count(&self) -> usize {
        self.plus
            .iter()
            .chain(&self.minus)
            .map(|&s| s as usize)
            .sum()
    }
}

/// Rate-codes `f` for `timesteps` steps.
///
/// Component `i` spikes with probability `min(1, |f_i| * gain)` per step, on
/// the positive channel when `f_i > 0` and the negative channel when `f_i < 0`.
/// Exactly one uniform is drawn per component per step regardless of `f`, so
/// for a fixed stream a larger `|f_i|` never removes a spike.
pub fn encode(f: &[f64], gain: f64, timesteps: usize, rng: &mut RngStream) -> Result<SpikeTrain> {
    ensure_finite(f, "encoder input")?;
    if !gain.is_finite() {
        return Err(Error::NonFinite("encoder gain"));
    }
    if gain < 0.0 {
        return Err(Error::invalid("encoder gain must be nonnegative"));
    }
    if timesteps == 0 {
        return Err(Error::invalid("spike train needs at least one timestep"));
    }
    let d = f.len();
    let probs: Vec<f64> = f.iter().map(|v| (v.abs() * gain).min(1.0)).collect();
    let mut plus = vec![0u8; timesteps * d];
    let mut minus = vec![0u8; timesteps * d];
    for t in 0..timesteps {
        for i in 0..d {
            let u = rng.uniform();
            if u < probs[i] {
                if f[i] > 0.0 {
                    plus[t * d + i] = 1;
                } else {
                    minus[t * d + i] = 1;
                }
            }
        }
    }
    Ok(SpikeTrain {
        timesteps,
        d,
        plus,
        minus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_features_never_spike() {
        let mut rng = RngStream::new(1);
        let train = encode(&[0.0; 8], 5.0, 50, &mut rng).unwrap();
        assert_eq!(train.spike_count(), 0);
    }

    #[test]
    fn saturated_negative_rate_spikes_every_step() {
        let mut rng = RngStream::new(2);
        let train = encode(&[-0.5, 0.0], 2.0, 37, &mut rng).unwrap();
        for t in 0..37 {
            assert_eq!(train.minus(t), &[1, 0]);
            assert_eq!(train.plus(t), &[0, 0]);
        }
    }

    #[test]
    fn empirical_rate_concentrates() {
        let mut rng = RngStream::new(3);
        let t = 10_000;
        let train = encode(&[0.3], 1.0, t, &mut rng).unwrap();
        let rate = train.spike_count() as f64 / t as f64;
        let tol = 3.0 * (0.3f64 * 0.7 / t as f64).sqrt();
        assert!((rate - 0.3).abs() < tol, "rate {rate}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = RngStream::new(0);
        assert!(encode(&[f64::NAN], 1.0, 1, &mut rng).is_err());
        assert!(encode(&[0.1], f64::INFINITY, 1, &mut rng).is_err());
        assert!(encode(&[0.1], -1.0, 1, &mut rng).is_err());
        assert!(encode(&[0.1], 1.0, 0, &mut rng).is_err());
    }

    #[test]
    fn preprocess_separates_dominant_axis() {
        let mut rng = RngStream::new(4);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let c = if i % 2 == 0 { 10.0 } else { -10.0 };
                let mut r: Vec<f64> = (0..5).map(|_| 0.01 * rng.normal()).collect();
                r[0] += c;
                r
            })
            .collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let f = preprocess(&x, 2, false).unwrap();
        let s0 = f.row(0)[0].signum();
        for i in 0..20 {
            let want = if i % 2 == 0 { s0 } else { -s0 };
            assert_eq!(f.row(i)[0].signum(), want);
            assert!((crate::numerics::norm2(f.row(i)) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn full_rank_preprocess_spans_centered_input() {
        let mut rng = RngStream::new(5);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..4).map(|_| rng.normal()).collect())
            .collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let (_, pca) = preprocess_with_model(&x, 4, false).unwrap();
        // projecting a centered row onto the component rows and back loses nothing
        for r in x.rows() {
            let centered: Vec<f64> = r.iter().zip(&pca.mean).map(|(a, b)| a - b).collect();
            let z = pca.components.matvec(&centered).unwrap();
            let mut back = [0.0; 4];
            for (k, zk) in z.iter().enumerate() {
                for (b, c) in back.iter_mut().zip(pca.components.row(k)) {
                    *b += zk * c;
                }
            }
            let resid: f64 = back
                .iter()
                .zip(&centered)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            assert!(resid.sqrt() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn channels_are_exclusive(f in prop::collection::vec(-2.0f64..2.0, 1..16), gain in 0.0f64..3.0, seed in any::<u64>()) {
            let mut rng = RngStream::new(seed);
            let train = encode(&f, gain, 20, &mut rng).unwrap();
            for t in 0..20 {
                for (p, m) in train.plus(t).iter().zip(train.minus(t)) {
                    prop_assert!(*p <= 1 && *m <= 1);
                    prop_assert!(p * m == 0);
                }
            }
        }

        #[test]
        fn larger_magnitude_never_loses_spikes(f in prop::collection::vec(-1.0f64..1.0, 1..12), boost in 1.0f64..3.0, seed in any::<u64>()) {
            let g: Vec<f64> = f.iter().map(|v| v * boost).collect();
            let a = encode(&f, 1.0, 30, &mut RngStream::new(seed)).unwrap();
            let b = encode(&g, 1.0, 30, &mut RngStream::new(seed)).unwrap();
            for t in 0..30 {
                for i in 0..f.len() {
                    prop_assert!(b.plus(t)[i] >= a.plus(t)[i]);
                    prop_assert!(b.minus(t)[i] >= a.minus(t)[i]);
                }
            }
        }

        #[test]
        fn encoding_is_reproducible(f in prop::collection::vec(-1.0f64..1.0, 1..12), seed in any::<u64>()) {
            let a = encode(&f, 1.0, 10, &mut RngStream::new(seed)).unwrap();
            let b = encode(&f, 1.0, 10, &mut RngStream::new(seed)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
