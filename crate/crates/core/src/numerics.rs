//! Random streams, dense tensors and the small amount of linear algebra the
//! rest of the crate needs (PCA through a Jacobi eigensolver).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, Error, Result};

/// A seeded, portable random stream.
///
/// Sub-streams are derived from the original seed and a label, never from the
/// current position, so the same label always yields the same sub-stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream keyed by `label`.
    pub fn derive(&self, label: &str) -> RngStream {
        // FNV-1a over the label, then mixed with the parent seed.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        RngStream::new(splitmix64(self.seed ^ splitmix64(h)))
    }

    /// Independent stream keyed by `label` and an index (epoch, sample, ...).
    pub fn derive_indexed(&self, label: &str, index: u64) -> RngStream {
        let base = self.derive(label);
        RngStream::new(splitmix64(base.seed ^ splitmix64(index.wrapping_add(1))))
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }

    /// `count` distinct indices from `0..n`, in draw order.
    pub fn sample_distinct(&mut self, n: usize, count: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.rng, n, count).into_vec()
    }
}

/// Row-major dense tensor of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(Error::dim("tensor data length", len, data.len()));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; len],
        }
    }

    /// Builds an `N x d` matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::dim("matrix row", d, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            dims: vec![rows.len(), d],
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Extent of the leading axis.
    pub fn nrows(&self) -> usize {
        self.dims.first().copied().unwrap_or(0)
    }

    /// Product of all trailing extents (the row length).
    pub fn ncols(&self) -> usize {
        self.dims.iter().skip(1).product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.ncols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.ncols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let c = self.ncols().max(1);
        self.data.chunks(c).take(self.nrows())
    }

    pub fn get2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols() + j]
    }

    pub fn set2(&mut self, i: usize, j: usize, v: f64) {
        let c = self.ncols();
        self.data[i * c + j] = v;
    }

    /// `self (r x c) * v (c)`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.ncols() {
            return Err(Error::dim("matvec", self.ncols(), v.len()));
        }
        Ok(self.rows().map(|r| dot(r, v)).collect())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `a b^T` as an `a.len() x b.len()` matrix.
pub fn outer(a: &[f64], b: &[f64]) -> Tensor {
    let mut data = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        data.extend(b.iter().map(|&y| x * y));
    }
    Tensor {
        dims: vec![a.len(), b.len()],
        data,
    }
}

/// Scales `v` to unit Euclidean norm; vectors with norm below 1e-12 map to zero.
pub fn l2_normalize(v: &[f64]) -> Vec<f64> {
    let n = norm2(v);
    if n < 1e-12 {
        vec![0.0; v.len()]
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in nonincreasing order and the matching unit
/// eigenvectors as the rows of an `n x n` tensor.
pub fn symmetric_eigen(a: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    let n = a.nrows();
    if a.dims().len() != 2 || a.ncols() != n {
        return Err(Error::invalid("symmetric_eigen needs a square matrix"));
    }
    ensure_finite(a.data(), "symmetric_eigen input")?;
    let mut m = a.data().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off_norm = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&m) <= JACOBI_TOL * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        vectors.extend((0..n).map(|k| v[k * n + i]));
    }
    Ok((values, Tensor::new(vec![n, n], vectors)?))
}

const WHITEN_EPS: f64 = 1e-8;

/// Principal component projection fitted on a data matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d_out x d_in`, orthonormal rows.
    pub components: Tensor,
    /// Nonincreasing, clamped at zero.
    pub eigenvalues: Vec<f64>,
    pub whiten: bool,
}

impl PcaModel {
    pub fn fit(x: &Tensor, d_out: usize, whiten: bool) -> Result<Self> {
        let n = x.nrows();
        let d_in = x.ncols();
        if n < 2 {
            return Err(Error::invalid("PCA needs at least two samples"));
        }
        if d_out > n.min(d_in) {
            return Err(Error::invalid(format!(
                "PCA output dimension {d_out} exceeds min(N={n}, d={d_in})"
            )));
        }
        ensure_finite(x.data(), "PCA input")?;

        let mut mean = vec![0.0; d_in];
        for r in x.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut cov = vec![0.0; d_in * d_in];
        let mut centered = vec![0.0; d_in];
        for r in x.rows() {
            for (c, (v, m)) in centered.iter_mut().zip(r.iter().zip(&mean)) {
                *c = v - m;
            }
            for i in 0..d_in {
                let ci = centered[i];
                if ci == 0.0 {
                    continue;
                }
                let row = &mut cov[i * d_in..(i + 1) * d_in];
                for j in i..d_in {
                    row[j] += ci * centered[j];
                }
            }
        }
        let denom = (n - 1) as f64;
        for i in 0..d_in {
            for j in i..d_in {
                let v = cov[i * d_in + j] / denom;
                cov[i * d_in + j] = v;
                cov[j * d_in + i] = v;
            }
        }

        let (values, vectors) = symmetric_eigen(&Tensor::new(vec![d_in, d_in], cov)?)?;
        let eigenvalues = values[..d_out].iter().map(|&l| l.max(0.0)).collect();
        let components = Tensor::new(vec![d_out, d_in], vectors.data()[..d_out * d_in].to_vec())?;
        Ok(Self {
            mean,
            components,
            eigenvalues,
            whiten,
        })
    }

    pub fn d_in(&self) -> usize {
        self.mean.len()
    }

    pub fn d_out(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.d_in() {
            return Err(Error::dim("PCA transform", self.d_in(), row.len()));
        }
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        let mut out = self.components.matvec(&centered)?;
        if self.whiten {
            for (o, l) in out.iter_mut().zip(&self.eigenvalues) {
                *o /= (l + WHITEN_EPS).sqrt();
            }
        }
        Ok(out)
    }

    pub fn transform(&self, x: &Tensor) -> Result<Tensor> {
        let mut data = Vec::with_capacity(x.nrows() * self.d_out());
        for r in x.rows() {
            data.extend(self.transform_row(r)?);
        }
        Tensor::new(vec![x.nrows(), self.d_out()], data)
    }

    /// Maps projected coordinates back into input space (mean included).
    pub fn inverse_transform_row(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.d_out() {
            return Err(Error::dim("PCA inverse transform", self.d_out(), z.len()));
        }
        let mut out = self.mean.clone();
        for (k, &zk) in z.iter().enumerate() {
            let coef = if self.whiten {
                zk * (self.eigenvalues[k] + WHITEN_EPS).sqrt()
            } else {
                zk
            };
            for (o, c) in out.iter_mut().zip(self.components.row(k)) {
                *o += coef * c;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rng: &mut RngStream, n: usize, d: usize) -> Tensor {
        let data = (0..n * d).map(|_| rng.normal()).collect();
        Tensor::new(vec![n, d], data).unwrap()
    }

    #[test]
    fn same_seed_same_draws() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..1000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn degenerate_bernoulli() {
        let mut r = RngStream::new(1);
        for _ in 0..1000 {
            assert!(!r.bernoulli(0.0));
            assert!(r.bernoulli(1.0));
        }
    }

    #[test]
    fn uniform_mean_within_three_sigma() {
        let mut r = RngStream::new(7);
        let n = 1_000_000;
        let mean = (0..n).map(|_| r.uniform()).sum::<f64>() / n as f64;
        let sigma = 1.0 / (12.0 * n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn derived_streams_differ_and_repeat() {
        let r = RngStream::new(3);
        let mut a = r.derive("a");
        let mut b = r.derive("b");
        let mut a2 = r.derive("a");
        let xa: Vec<f64> = (0..8).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..8).map(|_| b.uniform()).collect();
        let xa2: Vec<f64> = (0..8).map(|_| a2.uniform()).collect();
        assert_ne!(xa, xb);
        assert_eq!(xa, xa2);
        assert_ne!(
            r.derive_indexed("e", 0).seed(),
            r.derive_indexed("e", 1).seed()
        );
    }

    #[test]
    fn l2_normalize_cases() {
        assert_eq!(l2_normalize(&[3.0, 4.0]), vec![0.6, 0.8]);
        assert_eq!(l2_normalize(&[0.0, 0.0, 0.0]), vec![0.0; 3]);
        let mut r = RngStream::new(5);
        for _ in 0..100 {
            let v: Vec<f64> = (0..7).map(|_| r.normal() * 10.0).collect();
            assert!((norm2(&l2_normalize(&v)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_residual_and_orthonormality() {
        let mut r = RngStream::new(11);
        let x = random_matrix(&mut r, 30, 8);
        let mut s = vec![0.0; 64];
        for row in x.rows() {
            for i in 0..8 {
                for j in 0..8 {
                    s[i * 8 + j] += row[i] * row[j];
                }
            }
        }
        let sym = Tensor::new(vec![8, 8], s).unwrap();
        let (vals, vecs) = symmetric_eigen(&sym).unwrap();
        let snorm = norm2(sym.data());
        for k in 0..8 {
            let q = vecs.row(k);
            let sq = sym.matvec(q).unwrap();
            let res: f64 = sq
                .iter()
                .zip(q)
                .map(|(a, b)| (a - vals[k] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-8 * snorm, "residual {res}");
            for l in 0..8 {
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((dot(q, vecs.row(l)) - want).abs() < 1e-8);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pca_line_recovers_signed_distance() {
        let dir = l2_normalize(&[1.0, 2.0, -2.0]);
        let ts = [-3.0, -1.0, 0.5, 2.0, 4.5];
        let rows: Vec<Vec<f64>> = ts
            .iter()
            .map(|t| dir.iter().map(|d| 1.0 + t * d).collect())
            .collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let pca = PcaModel::fit(&x, 1, false).unwrap();
        let z = pca.transform(&x).unwrap();
        let tmean = ts.iter().sum::<f64>() / ts.len() as f64;
        let sign = (z.get2(0, 0) / (ts[0] - tmean)).signum();
        for (i, t) in ts.iter().enumerate() {
            assert!((z.get2(i, 0) - sign * (t - tmean)).abs() < 1e-9);
        }
    }

    #[test]
    fn pca_identical_rows_maps_to_zero() {
        let x = Tensor::from_rows(&vec![vec![1.0, -2.0, 3.0]; 4]).unwrap();
        let pca = PcaModel::fit(&x, 2, false).unwrap();
        assert!(pca.eigenvalues.iter().all(|&l| l == 0.0));
        let z = pca.transform(&x).unwrap();
        assert!(z.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn pca_full_rank_round_trip() {
        let mut r = RngStream::new(20);
        let x = random_matrix(&mut r, 20, 5);
        let pca = PcaModel::fit(&x, 5, false).unwrap();
        for row in x.rows() {
            let back = pca
                .inverse_transform_row(&pca.transform_row(row).unwrap())
                .unwrap();
            for (a, b) in back.iter().zip(row) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    fn covariance(z: &Tensor) -> Vec<Vec<f64>> {
        let d = z.ncols();
        let n = z.nrows() as f64;
        let mut mean = vec![0.0; d];
        for r in z.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut c = vec![vec![0.0; d]; d];
        for r in z.rows() {
            for i in 0..d {
                for j in 0..d {
                    c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / (n - 1.0);
                }
            }
        }
        c
    }

    #[test]
    fn pca_decorrelates_and_whitens() {
        let mut r = RngStream::new(9);
        let base = random_matrix(&mut r, 200, 6);
        // mix coordinates so the input is correlated
        let rows: Vec<Vec<f64>> = base
            .rows()
            .map(|v| {
                vec![
                    v[0] + 0.5 * v[1],
                    2.0 * v[1],
                    v[2] - v[0],
                    0.3 * v[3],
                    v[4] + v[5],
                    v[5],
                ]
            })
            .collect();
        let x = Tensor::from_rows(&rows).unwrap();

        let plain = PcaModel::fit(&x, 4, false).unwrap();
        let c = covariance(&plain.transform(&x).unwrap());
        let scale = c[0][0];
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(c[i][j].abs() < 1e-6 * scale);
                }
            }
        }

        let white = PcaModel::fit(&x, 4, true).unwrap();
        let c = covariance(&white.transform(&x).unwrap());
        for i in 0..4 {
            assert!((c[i][i] - 1.0).abs() < 1e-6, "var {}", c[i][i]);
        }
    }

    #[test]
    fn pca_rejects_bad_input() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(PcaModel::fit(&x, 3, false).is_err());
        let bad = Tensor::from_rows(&[vec![1.0, f64::NAN], vec![3.0, 4.0]]).unwrap();
        assert!(matches!(
            PcaModel::fit(&bad, 1, false),
            Err(Error::NonFinite(_))
        ));
    }
}
