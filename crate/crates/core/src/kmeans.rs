//! Lloyd's k-means with operation accounting.
//!
//! Counting convention: each point-to-centroid distance costs `d`
//! multiplications (the squarings) and `2d - 1` additions (the subtractions
//! plus the summation), and each point adds `d` more when it is accumulated
//! into its centroid. `it` full iterations over `N` points therefore cost
//! `k*d*it*N` multiplications and `(k*(2d-1) + d)*it*N` additions.

use rayon::prelude::*;

use crate::cost::OpCount;
use crate::error::{ensure_finite, Error, Result};
use crate::numerics::{RngStream, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    /// Maximum number of assign/update iterations.
    pub it: usize,
    /// Stop once the relative objective improvement falls below this.
    /// Zero runs all `it` iterations.
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, it: usize) -> Self {
        Self { k, it, tol: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.it == 0 {
            return Err(Error::Config("kmeans: k and it must be positive".into()));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(
                "kmeans: tol must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self::new(100, 20)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    /// `k x d`.
    pub centroids: Tensor,
    /// Nearest final centroid for each point.
    pub assignments: Vec<usize>,
    pub objective: f64,
    /// Objective after each assignment step, ending with the final one.
    pub history: Vec<f64>,
    pub iterations_run: usize,
    /// Operations of the counted Lloyd iterations.
    pub op_count: OpCount,
    /// Operations outside the closed form: the closing assignment pass.
    pub extra_ops: OpCount,
    /// Empty clusters refilled with a far-away point.
    pub reseeds: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &Tensor) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..centroids.nrows() {
        let dist = sq_dist(x, centroids.row(j));
        if dist < best.1 {
            best = (j, dist);
        }
    }
    best
}

fn assign_with_dist(x: &Tensor, centroids: &Tensor) -> Vec<(usize, f64)> {
    (0..x.nrows())
        .into_par_iter()
        .map(|i| nearest(x.row(i), centroids))
        .collect()
}

fn distance_ops(n: usize, k: usize, d: usize) -> OpCount {
    let per = (n as u128) * (k as u128);
    OpCount {
        adds: per * (2 * d as u128).saturating_sub(1),
        mults: per * d as u128,
    }
}

/// Index of the nearest centroid for each point; ties go to the lower index.
pub fn assign_step(x: &Tensor, centroids: &Tensor) -> Result<Vec<usize>> {
    if centroids.nrows() == 0 {
        return Err(Error::invalid("no centroids"));
    }
    if x.ncols() != centroids.ncols() {
        return Err(Error::dim(
            "centroid dimension",
            x.ncols(),
            centroids.ncols(),
        ));
    }
    Ok(assign_with_dist(x, centroids)
        .into_iter()
        .map(|(j, _)| j)
        .collect())
}

/// Mean of each cluster's members. Empty clusters keep a zero row.
pub fn update_step(x: &Tensor, assignments: &[usize], k: usize) -> Result<Tensor> {
    if assignments.len() != x.nrows() {
        return Err(Error::dim("assignment count", x.nrows(), assignments.len()));
    }
    let d = x.ncols();
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        if a >= k {
            return Err(Error::LabelOutOfRange { label: a, k });
        }
        counts[a] += 1;
        for (s, v) in sums[a * d..(a + 1) * d].iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            let c = counts[j] as f64;
            sums[j * d..(j + 1) * d].iter_mut().for_each(|s| *s /= c);
        }
    }
    Tensor::new(vec![k, d], sums)
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn objective(x: &Tensor, centroids: &Tensor, assignments: &[usize]) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| sq_dist(x.row(i), centroids.row(a)))
        .sum()
}

/// Moves the farthest point of a multi-member cluster into each empty one.
fn reseed_empty(assign: &mut [(usize, f64)], k: usize) -> usize {
    let mut counts = vec![0usize; k];
    assign.iter().for_each(|&(a, _)| counts[a] += 1);
    let mut reseeds = 0;
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut pick: Option<usize> = None;
        for (i, &(a, dist)) in assign.iter().enumerate() {
            if counts[a] > 1 && pick.is_none_or(|p| dist > assign[p].1) {
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        counts[assign[i].0] -= 1;
        counts[j] = 1;
        assign[i] = (j, 0.0);
        reseeds += 1;
    }
    reseeds
}

pub fn kmeans_fit(x: &Tensor, p: &KMeansParams, rng: &mut RngStream) -> Result<KMeansResult> {
    p.validate()?;
    let (n, d) = (x.nrows(), x.ncols());
    if n < p.k {
        return Err(Error::invalid(format!(
            "k-means needs at least k={} points, got {n}",
            p.k
        )));
    }
    ensure_finite(x.data(), "k-means input")?;

    let mut centroids = Tensor::from_rows(
        &rng.sample_distinct(n, p.k)
            .into_iter()
            .map(|i| x.row(i).to_vec())
            .collect::<Vec<_>>(),
    )?;
    let mut op_count = OpCount { adds: 0, mults: 0 };
    let mut history = Vec::with_capacity(p.it + 1);
    let mut reseeds = 0;
    let mut iterations_run = 0;

    for _ in 0..p.it {
        let mut assign = assign_with_dist(x, &centroids);
        let dist_ops = distance_ops(n, p.k, d);
        op_count.adds += dist_ops.adds + (n * d) as u128;
        op_count.mults += dist_ops.mults;
        let current: f64 = assign.iter().map(|&(_, dist)| dist).sum();
        reseeds += reseed_empty(&mut assign, p.k);
        let labels: Vec<usize> = assign.iter().map(|&(a, _)| a).collect();
        centroids = update_step(x, &labels, p.k)?;
        iterations_run += 1;

        let stop = match history.last() {
            Some(&prev) if p.tol > 0.0 => prev <= 0.0 || (prev - current) / prev < p.tol,
            _ => false,
        };
        history.push(current);
        if stop {
            break;
        }
    }

    let fin = assign_with_dist(x, &centroids);
    let extra_ops = distance_ops(n, p.k, d);
    let assignments: Vec<usize> = fin.iter().map(|&(a, _)| a).collect();
    let objective = fin.iter().map(|&(_, dist)| dist).sum();
    history.push(objective);
    Ok(KMeansResult {
        centroids,
        assignments,
        objective,
        history,
        iterations_run,
        op_count,
        extra_ops,
        reseeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::kmeans_op_count;

    fn col(values: &[f64]) -> Tensor {
        Tensor::new(vec![values.len(), 1], values.to_vec()).unwrap()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 6.0], vec![5.0, 1.0]]).unwrap();
        let r = kmeans_fit(&x, &KMeansParams::new(1, 3), &mut RngStream::new(0)).unwrap();
        assert!((r.centroids.get2(0, 0) - 3.0).abs() < 1e-12);
        assert!((r.centroids.get2(0, 1) - 3.0).abs() < 1e-12);
        // variance 8/3 and 14/3 per coordinate, times N = 3
        assert!((r.objective - 22.0).abs() < 1e-12);
    }

    #[test]
    fn two_pairs_on_a_line() {
        let x = col(&[0.0, 1.0, 10.0, 11.0]);
        for seed in 0..20 {
            let r = kmeans_fit(&x, &KMeansParams::new(2, 10), &mut RngStream::new(seed)).unwrap();
            let mut c = [r.centroids.get2(0, 0), r.centroids.get2(1, 0)];
            c.sort_by(f64::total_cmp);
            assert_eq!(c, [0.5, 10.5], "seed {seed}");
            assert!((r.objective - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn assignment_ties_and_exact_hits() {
        let c = Tensor::from_rows(&[vec![5.0], vec![0.0], vec![2.0], vec![7.0]]).unwrap();
        assert_eq!(assign_step(&col(&[7.0, 1.0]), &c).unwrap(), vec![3, 1]);
    }

    #[test]
    fn op_counts_follow_closed_form() {
        let mut rng = RngStream::new(3);
        let x = Tensor::new(vec![40, 3], (0..120).map(|_| rng.normal()).collect()).unwrap();
        let r = kmeans_fit(&x, &KMeansParams::new(4, 6), &mut rng).unwrap();
        assert_eq!(r.iterations_run, 6);
        assert_eq!(r.reseeds, 0);
        assert_eq!(r.op_count, kmeans_op_count(4, 3, 6, 40).unwrap());
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // duplicated points force two initial centroids to coincide
        let x = col(&[0.0, 0.0, 0.0, 5.0, 9.0]);
        let r = kmeans_fit(&x, &KMeansParams::new(3, 5), &mut RngStream::new(1)).unwrap();
        let mut used = r.assignments.clone();
        used.sort();
        used.dedup();
        assert_eq!(used.len(), 3);
        assert!(r.objective < 1e-12);
    }

    #[test]
    fn early_stop_with_tolerance() {
        let x = col(&[0.0, 1.0, 10.0, 11.0]);
        let p = KMeansParams {
            tol: 1e-9,
            ..KMeansParams::new(2, 50)
        };
        let r = kmeans_fit(&x, &p, &mut RngStream::new(0)).unwrap();
        assert!(r.iterations_run < 50);
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = RngStream::new(0);
        assert!(kmeans_fit(&col(&[1.0]), &KMeansParams::new(2, 1), &mut rng).is_err());
        assert!(kmeans_fit(&col(&[1.0, f64::NAN]), &KMeansParams::new(1, 1), &mut rng).is_err());
        assert!(kmeans_fit(&col(&[1.0, 2.0]), &KMeansParams::new(1, 0), &mut rng).is_err());
    }
}
