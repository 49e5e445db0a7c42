//! Procedural datasets: Gaussian blobs in feature space and single-channel
//! oriented gratings.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SynthKind {
    /// Isotropic Gaussian clusters around standard-normal centers.
    Blobs { d: usize },
    /// One grating orientation per class plus pixel noise.
    Images { height: usize, width: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub kind: SynthKind,
    pub sigma: f64,
    pub seed: u64,
}

/// Generated samples (shuffled) with their ground-truth classes.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// `N x d` for blobs, `N x 1 x H x W` for images.
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::dim("dataset labels", inputs.nrows(), labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                k: classes,
            });
        }
        Ok(Self {
            inputs,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Grating frequency in cycles across the image.
const GRATING_CYCLES: f64 = 3.0;

pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    if spec.classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if spec.per_class == 0 {
        return Err(Error::invalid("need at least one sample per class"));
    }
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(Error::invalid("sigma must be finite and nonnegative"));
    }
    let root = RngStream::new(spec.seed);
    let n = spec.classes * spec.per_class;
    let mut order: Vec<usize> = (0..n).collect();
    root.derive("order").shuffle(&mut order);
    let labels: Vec<usize> = order.iter().map(|&i| i / spec.per_class).collect();

    let mut noise = root.derive("noise");
    let inputs = match spec.kind {
        SynthKind::Blobs { d } => {
            if d == 0 {
                return Err(Error::invalid("blob dimension must be positive"));
            }
            let mut centers_rng = root.derive("centers");
            let centers: Vec<Vec<f64>> = (0..spec.classes)
                .map(|_| (0..d).map(|_| centers_rng.normal()).collect())
                .collect();
            let mut data = Vec::with_capacity(n * d);
            for &c in &labels {
                data.extend(centers[c].iter().map(|m| m + spec.sigma * noise.normal()));
            }
            Tensor::new(vec![n, d], data)?
        }
        SynthKind::Images { height, width } => {
            if height == 0 || width == 0 {
                return Err(Error::invalid("image extents must be positive"));
            }
            let mut phase_rng = root.derive("phases");
            let phases: Vec<f64> = (0..spec.classes)
                .map(|_| phase_rng.uniform_range(0.0, 2.0 * PI))
                .collect();
            let templates: Vec<Vec<f64>> = (0..spec.classes)
                .map(|c| grating(c, spec.classes, phases[c], height, width))
                .collect();
            let mut data = Vec::with_capacity(n * height * width);
            for &c in &labels {
                data.extend(templates[c].iter().map(|p| p + spec.sigma * noise.normal()));
            }
            Tensor::new(vec![n, 1, height, width], data)?
        }
    };
    Dataset::new(inputs, labels, spec.classes)
}

fn grating(class: usize, classes: usize, phase: f64, height: usize, width: usize) -> Vec<f64> {
    let theta = PI * class as f64 / classes as f64;
    let (s, c) = theta.sin_cos();
    let omega = 2.0 * PI * GRATING_CYCLES / height.max(width) as f64;
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            out.push((omega * (c * x as f64 + s * y as f64) + phase).sin());
        }
    }
    out
}
