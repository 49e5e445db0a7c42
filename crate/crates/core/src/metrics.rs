//! Clustering and representation diagnostics.

use std::collections::BTreeMap;

use crate::convnet::{ConvNet, ParamMask};
use crate::error::{ensure_finite, Error, Result};
use crate::numerics::{RngStream, Tensor};
use crate::snn::PseudoLabels;

/// Co-occurrence counts of two assignments over the same samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::dim("assignment lengths", a.len(), b.len()));
        }
        let (a, rows) = compact(a);
        let (b, cols) = compact(b);
        let mut counts = vec![0u64; rows * cols];
        for (&i, &j) in a.iter().zip(&b) {
            counts[i * cols + j] += 1;
        }
        Ok(Self { rows, cols, counts })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn row_sums(&self) -> Vec<u64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).sum())
            .collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `I(a; b) / sqrt(H(a) H(b))`, natural logs.
///
/// When either entropy is zero the result is 1 if the two assignments induce
/// the same partition and 0 otherwise.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::invalid("NMI needs at least one sample"));
    }
    let table = ContingencyTable::new(a, b)?;
    let n = table.total() as f64;
    let rs = table.row_sums();
    let cs = table.col_sums();
    let ha = entropy(&rs, n);
    let hb = entropy(&cs, n);
    if ha == 0.0 || hb == 0.0 {
        return Ok(if table.rows == table.cols { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for i in 0..table.rows {
        for j in 0..table.cols {
            let c = table.get(i, j);
            if c > 0 {
                let pij = c as f64 / n;
                mi += pij * (c as f64 * n / (rs[i] as f64 * cs[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// Fraction of samples that carry their cluster's majority class.
pub fn purity(assignments: &[usize], truth: &[usize]) -> Result<f64> {
    if assignments.is_empty() {
        return Err(Error::invalid("purity needs at least one sample"));
    }
    let table = ContingencyTable::new(assignments, truth)?;
    let majority: u64 = (0..table.rows)
        .map(|i| (0..table.cols).map(|j| table.get(i, j)).max().unwrap_or(0))
        .sum();
    Ok(majority as f64 / table.total() as f64)
}

/// Which label the Fisher trace differentiates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FisherLabels {
    /// The assigned pseudo-label (empirical Fisher).
    #[default]
    Assigned,
    /// A label drawn from the model's own softmax.
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FisherOptions {
    pub labels: FisherLabels,
    pub mask: ParamMask,
}

impl Default for FisherOptions {
    fn default() -> Self {
        Self {
            labels: FisherLabels::Assigned,
            mask: ParamMask::All,
        }
    }
}

/// Trace of the Fisher information: mean over samples of the squared norm of
/// the log-likelihood gradient of the assigned pseudo-label.
pub fn fim_trace(net: &ConvNet, images: &Tensor, labels: &PseudoLabels) -> Result<f64> {
    fim_trace_with(net, images, labels, FisherOptions::default(), None)
}

/// [`fim_trace`] with label sampling and parameter masking options. `rng` is
/// required for [`FisherLabels::Sampled`].
pub fn fim_trace_with(
    net: &ConvNet,
    images: &Tensor,
    labels: &PseudoLabels,
    opts: FisherOptions,
    rng: Option<&mut RngStream>,
) -> Result<f64> {
    if images.nrows() != labels.len() {
        return Err(Error::dim("FIM labels", images.nrows(), labels.len()));
    }
    if labels.is_empty() {
        return Err(Error::invalid("FIM needs at least one sample"));
    }
    let targets: Vec<usize> = match opts.labels {
        FisherLabels::Assigned => labels.as_slice().to_vec(),
        FisherLabels::Sampled => {
            let rng = rng.ok_or_else(|| Error::invalid("sampled Fisher labels need an rng"))?;
            let probs = net.predict_proba(images)?;
            probs
                .rows()
                .map(|p| {
                    let u = rng.uniform();
                    let mut acc = 0.0;
                    p.iter()
                        .position(|&q| {
                            acc += q;
                            u < acc
                        })
                        .unwrap_or(p.len() - 1)
                })
                .collect()
        }
    };
    let targets = PseudoLabels::new(targets, labels.k())?;
    let norms = net.per_sample_sq_grad_norms(images, &targets, opts.mask)?;
    Ok(norms.iter().sum::<f64>() / norms.len() as f64)
}

/// Linear-probe training schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub train_fraction: f64,
    /// Z-score features with training-split statistics first.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.01,
            train_fraction: 0.8,
            standardize: true,
            seed: 0,
        }
    }
}

/// Trains a softmax-regression classifier on frozen features (seeded
/// 80/20 split, plain per-sample SGD) and returns held-out top-1 accuracy.
pub fn linear_probe(features: &Tensor, truth: &[usize], cfg: &ProbeConfig) -> Result<f64> {
    let n = features.nrows();
    let d = features.ncols();
    if truth.len() != n {
        return Err(Error::dim("probe labels", n, truth.len()));
    }
    ensure_finite(features.data(), "probe features")?;
    let classes = truth.iter().max().map_or(0, |m| m + 1);
    let distinct = compact(truth).1;
    if distinct < 2 {
        return Err(Error::invalid("linear probe needs at least two classes"));
    }
    if n < classes {
        return Err(Error::invalid(
            "linear probe needs at least as many samples as classes",
        ));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::invalid("train fraction must lie in (0, 1)"));
    }

    let mut rng = RngStream::new(cfg.seed).derive("probe");
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let n_train = ((n as f64 * cfg.train_fraction).floor() as usize).clamp(1, n - 1);
    let (train, eval) = order.split_at(n_train);

    let (mean, scale) = if cfg.standardize {
        let mut mean = vec![0.0; d];
        for &i in train {
            for (m, v) in mean.iter_mut().zip(features.row(i)) {
                *m += v / n_train as f64;
            }
        }
        let mut var = vec![0.0; d];
        for &i in train {
            for ((s, v), m) in var.iter_mut().zip(features.row(i)).zip(&mean) {
                *s += (v - m).powi(2) / n_train as f64;
            }
        }
        (mean, var.iter().map(|v| 1.0 / v.sqrt().max(1e-8)).collect())
    } else {
        (vec![0.0; d], vec![1.0; d])
    };
    let prep = |i: usize| -> Vec<f64> {
        features
            .row(i)
            .iter()
            .zip(&mean)
            .zip(&scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    };
    let train_x: Vec<Vec<f64>> = train.iter().map(|&i| prep(i)).collect();

    let mut w = vec![0.0; classes * d];
    let mut b = vec![0.0; classes];
    let mut idx: Vec<usize> = (0..train.len()).collect();
    let mut logits = vec![0.0; classes];
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut idx);
        for &s in &idx {
            let x = &train_x[s];
            let y = truth[train[s]];
            softmax_logits(&w, &b, x, &mut logits);
            for c in 0..classes {
                let g = logits[c] - f64::from(u8::from(c == y));
                b[c] -= cfg.lr * g;
                for (wv, xv) in w[c * d..(c + 1) * d].iter_mut().zip(x) {
                    *wv -= cfg.lr * g * xv;
                }
            }
        }
    }

    let correct = eval
        .iter()
        .filter(|&&i| {
            softmax_logits(&w, &b, &prep(i), &mut logits);
            argmax(&logits) == truth[i]
        })
        .count();
    Ok(correct as f64 / eval.len() as f64)
}

/// Writes softmax probabilities of `W x + b` into `out`.
fn softmax_logits(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (c, o) in out.iter_mut().enumerate() {
        *o = b[c]
            + w[c * d..(c + 1) * d]
                .iter()
                .zip(x)
                .map(|(a, v)| a * v)
                .sum::<f64>();
    }
    let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for o in out.iter_mut() {
        *o = (*o - m).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nmi_identity_and_relabel() {
        let a = [0, 0, 1, 1, 2, 2, 2];
        assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b: Vec<usize> = a.iter().map(|&x| [7, 3, 5][x]).collect();
        assert!((nmi(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nmi_independent_is_zero() {
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn nmi_zero_entropy_convention() {
        assert_eq!(nmi(&[4, 4, 4], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[4, 4, 4], &[1, 2, 1]).unwrap(), 0.0);
        assert!(nmi(&[0, 1], &[0]).is_err());
        assert!(nmi(&[], &[]).is_err());
    }

    #[test]
    fn nmi_matches_hand_value() {
        // table [[2, 0], [1, 1]], N = 4
        let a = [0, 0, 1, 1];
        let b = [0, 0, 0, 1];
        let ha = std::f64::consts::LN_2;
        let hb = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        let mi = 0.5 * (0.5f64 / (0.5 * 0.75)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.75)).ln()
            + 0.25 * (0.25f64 / (0.5 * 0.25)).ln();
        assert!((nmi(&a, &b).unwrap() - mi / (ha * hb).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn purity_cases() {
        let t = [0, 1, 2, 0, 1, 2];
        assert_eq!(purity(&t, &t).unwrap(), 1.0);
        // each cluster spread evenly over three classes
        assert!((purity(&[0, 0, 0, 1, 1, 1], &t).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(purity(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn purity_matches_recount() {
        let mut rng = RngStream::new(12);
        for _ in 0..50 {
            let y: Vec<usize> = (0..20).map(|_| rng.index(5)).collect();
            let t: Vec<usize> = (0..20).map(|_| rng.index(3)).collect();
            let mut best = 0;
            for c in 0..5 {
                let mut per = [0; 3];
                for (a, b) in y.iter().zip(&t) {
                    if *a == c {
                        per[*b] += 1;
                    }
                }
                best += per.iter().max().unwrap();
            }
            assert!((purity(&y, &t).unwrap() - best as f64 / 20.0).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn nmi_symmetric_and_bounded(a in prop::collection::vec(0usize..5, 1..60), seed in any::<u64>()) {
            let mut rng = RngStream::new(seed);
            let b: Vec<usize> = a.iter().map(|_| rng.index(4)).collect();
            let ab = nmi(&a, &b).unwrap();
            let ba = nmi(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn purity_relabel_invariant(y in prop::collection::vec(0usize..6, 1..40), seed in any::<u64>()) {
            let mut rng = RngStream::new(seed);
            let t: Vec<usize> = y.iter().map(|_| rng.index(3)).collect();
            let mut perm: Vec<usize> = (0..6).collect();
            rng.shuffle(&mut perm);
            let relabeled: Vec<usize> = y.iter().map(|&c| perm[c] + 10).collect();
            prop_assert_eq!(purity(&y, &t).unwrap(), purity(&relabeled, &t).unwrap());
        }
    }

    fn blobs(
        rng: &mut RngStream,
        n: usize,
        centers: &[Vec<f64>],
        sigma: f64,
    ) -> (Tensor, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % centers.len();
            rows.push(
                centers[c]
                    .iter()
                    .map(|m| m + sigma * rng.normal())
                    .collect(),
            );
            labels.push(c);
        }
        (Tensor::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn probe_separable_blobs() {
        let mut rng = RngStream::new(1);
        let (x, y) = blobs(
            &mut rng,
            200,
            &[vec![2.0, 0.0, 1.0], vec![-2.0, 0.5, 1.0]],
            0.5,
        );
        let acc = linear_probe(&x, &y, &ProbeConfig::default()).unwrap();
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn probe_noise_is_chance() {
        let mut rng = RngStream::new(2);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| (0..8).map(|_| rng.normal()).collect())
            .collect();
        let y: Vec<usize> = (0..500).map(|i| i % 5).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let acc = linear_probe(&x, &y, &ProbeConfig::default()).unwrap();
        assert!((acc - 0.2).abs() <= 0.15, "accuracy {acc}");
    }

    #[test]
    fn probe_memorizes_duplicates() {
        let protos = [
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let rows: Vec<Vec<f64>> = (0..60).map(|i| protos[i % 3].clone()).collect();
        let y: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let acc = linear_probe(
            &Tensor::from_rows(&rows).unwrap(),
            &y,
            &ProbeConfig::default(),
        )
        .unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn probe_rejects_single_class() {
        let x = Tensor::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert!(linear_probe(&x, &[0, 0, 0], &ProbeConfig::default()).is_err());
    }
}
