use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

/// `n` samples of dimension `d`, stored as compressed sparse rows.
///
/// Dense data simply stores every entry; products always walk a row's stored
/// entries in increasing column order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    d: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
}

impl SampleSet {
    /// Rows are `(column, value)` lists with strictly increasing columns.
    pub fn from_sparse_rows(d: usize, rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>) -> Result<Self> {
        check_dim("sample labels", rows.len(), labels.len())?;
        if rows.is_empty() || d == 0 {
            return Err(Error::Input("sample set needs n >= 1 and d >= 1".into()));
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let mut prev = None;
            for (j, v) in row {
                if j >= d {
                    return Err(Error::Input(format!("sample {i}: feature index {j} >= d = {d}")));
                }
                if prev.is_some_and(|p| j <= p) {
                    return Err(Error::Input(format!("sample {i}: feature indices not increasing")));
                }
                if !v.is_finite() {
                    return Err(Error::Input(format!("sample {i}: non-finite feature")));
                }
                prev = Some(j);
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        if let Some(i) = labels.iter().position(|l| !l.is_finite()) {
            return Err(Error::Input(format!("sample {i}: non-finite label")));
        }
        Ok(Self {
            d,
            indptr,
            indices,
            values,
            labels,
        })
    }

    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let sparse = rows
            .iter()
            .map(|r| {
                check_dim("dense sample row", d, r.len())?;
                Ok(r.iter().copied().enumerate().collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_sparse_rows(d, sparse, labels)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[s..e], &self.values[s..e])
    }

    pub fn dense_row(&self, i: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.d);
        let (idx, val) = self.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            out[j] = v;
        }
        out
    }

    /// `z_iᵀx`
    pub fn dot_row(&self, i: usize, x: &DVector<f64>) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum()
    }

    /// `out += alpha * z_i`
    pub fn axpy_row(&self, i: usize, alpha: f64, out: &mut DVector<f64>) {
        let (idx, val) = self.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            out[j] += alpha * v;
        }
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum()
    }

    /// True when every label is ±1.
    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&l| l == 1.0 || l == -1.0)
    }

    /// `ZᵀZ` as a dense `d × d` matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.d, self.d);
        for i in 0..self.n() {
            let (idx, val) = self.row(i);
            for (a, (&ja, &va)) in idx.iter().zip(val).enumerate() {
                for (&jb, &vb) in idx[a..].iter().zip(&val[a..]) {
                    g[(ja, jb)] += va * vb;
                }
            }
        }
        g.fill_lower_triangle_with_upper_triangle();
        g
    }

    /// Dense copy of column `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let (idx, val) = self.row(i);
                idx.binary_search(&j).map_or(0.0, |p| val[p])
            })
            .collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            let (idx, val) = self.row(i);
            indices.extend_from_slice(idx);
            values.extend_from_slice(val);
            indptr.push(indices.len());
            labels.push(self.labels[i]);
        }
        Self {
            d: self.d,
            indptr,
            indices,
            values,
            labels,
        }
    }

    /// Deterministic shuffle-and-split; the first part receives
    /// `round(n * train_fraction)` samples.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
            return Err(Error::Input("train fraction must lie in (0, 1)".into()));
        }
        let n = self.n();
        let n_train = ((n as f64) * train_fraction).round() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::Input(format!("cannot split {n} samples at {train_fraction}")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (train, test) = order.split_at(n_train);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }
}

/// Synthetic total-variation regression data with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TvData {
    pub samples: SampleSet,
    pub truth: DVector<f64>,
}

/// Piecewise-constant signal: 10 equal blocks alternating between 0 and 1.
pub fn piecewise_truth(d: usize) -> DVector<f64> {
    DVector::from_fn(d, |j, _| ((j * 10 / d) % 2) as f64)
}

fn unit_normal_row(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return row.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Standard normal features normalized to unit norm, outputs
/// `o_i = xᵀz_i + ε_i` with `ε_i ~ N(0, 1)` and `x` from [`piecewise_truth`].
pub fn gen_tv_data(n: usize, d: usize, seed: u64) -> Result<TvData> {
    if n == 0 || d == 0 {
        return Err(Error::Input("gen_tv_data needs n, d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = piecewise_truth(d);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row = unit_normal_row(&mut rng, d);
        let noise: f64 = rng.sample(StandardNormal);
        let clean: f64 = row.iter().zip(truth.iter()).map(|(a, b)| a * b).sum();
        labels.push(clean + noise);
        rows.push(row);
    }
    Ok(TvData {
        samples: SampleSet::from_dense(&rows, labels)?,
        truth,
    })
}

/// Binary classification data with block-correlated features.
///
/// Features come in groups of five sharing a latent factor; rows are scaled to
/// unit norm. Labels are `sign(wᵀz + 0.1ε)` for a weight vector that is
/// constant on alternating groups, so neighbouring coefficients agree.
pub fn gen_classification(n: usize, d: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 || d == 0 {
        return Err(Error::Input("gen_classification needs n, d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = d.div_ceil(5);
    let weights: Vec<f64> = (0..d)
        .map(|j| match (j / 5) % 3 {
            0 => 1.0,
            1 => -1.0,
            _ => 0.0,
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let latent: Vec<f64> = (0..groups).map(|_| rng.sample(StandardNormal)).collect();
        let mut row: Vec<f64> = (0..d)
            .map(|j| latent[j / 5] + 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        row.iter_mut().for_each(|v| *v /= norm);
        let score: f64 = row.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>()
            + 0.1 * rng.sample::<f64, _>(StandardNormal);
        labels.push(if score >= 0.0 { 1.0 } else { -1.0 });
        rows.push(row);
    }
    SampleSet::from_dense(&rows, labels)
}
