//! Sign-random-projection LSH.
//!
//! Each of the `Q` bits is the sign of the dot product with one Gaussian
//! hyperplane normal: bit `q` is 1 iff `w_q · x ≥ 0`. Normals are drawn
//! row-major from `StandardNormal` on a `ChaCha8Rng` seeded with
//! `seed_from_u64(seed)`, so a given build reproduces the same model for the
//! same `(dim, Q, seed)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::codes::{BinaryCode, CodeSet, MAX_CODE_LEN};
use crate::error::{Error, Result};

/// Dense row-major matrix of finite `f32` features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::Config(format!(
                "feature matrix must be non-empty, got {rows}x{dim}"
            )));
        }
        if values.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                expected: rows * dim,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite feature at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { rows, dim, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LshModel {
    dim: usize,
    code_len: usize,
    seed: u64,
    projections: Vec<f64>,
}

impl LshModel {
    /// Draws `q_bits` hyperplane normals of dimension `dim`.
    pub fn train(dim: usize, q_bits: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("feature dimension must be at least 1".into()));
        }
        if q_bits == 0 || q_bits > MAX_CODE_LEN {
            return Err(Error::CodeLength(q_bits));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projections = (0..dim * q_bits)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(Self {
            dim,
            code_len: q_bits,
            seed,
            projections,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn code_len(&self) -> usize {
        self.code_len
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Normal vector of hyperplane `q`.
    pub fn projection(&self, q: usize) -> &[f64] {
        &self.projections[q * self.dim..(q + 1) * self.dim]
    }

    pub fn projections(&self) -> &[f64] {
        &self.projections
    }

    pub fn encode_row(&self, row: &[f32]) -> Result<BinaryCode> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: row.len(),
            });
        }
        let mut code = BinaryCode::zeros(self.code_len)?;
        for q in 0..self.code_len {
            let dot: f64 = self
                .projection(q)
                .iter()
                .zip(row)
                .map(|(w, &x)| w * f64::from(x))
                .sum();
            if dot >= 0.0 {
                code.set(q, true);
            }
        }
        Ok(code)
    }

    pub fn encode(&self, feats: &FeatureMatrix) -> Result<CodeSet> {
        if feats.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: feats.dim(),
            });
        }
        let codes = (0..feats.rows())
            .into_par_iter()
            .map(|i| self.encode_row(feats.row(i)))
            .collect::<Result<Vec<_>>>()?;
        CodeSet::new(self.code_len, codes)
    }
}

pub fn lsh_train(dim: usize, q_bits: usize, seed: u64) -> Result<LshModel> {
    LshModel::train(dim, q_bits, seed)
}

pub fn lsh_encode(model: &LshModel, feats: &FeatureMatrix) -> Result<CodeSet> {
    model.encode(feats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn training_is_deterministic() {
        let a = LshModel::train(4096, 8, 42).unwrap();
        let b = LshModel::train(4096, 8, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, LshModel::train(4096, 8, 43).unwrap());

        let single = LshModel::train(2, 1, 7).unwrap();
        assert_eq!(single.projections().len(), 2);
        assert_eq!(single.projection(0).len(), 2);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(LshModel::train(0, 8, 1), Err(Error::Config(_))));
        assert_eq!(LshModel::train(4, 0, 1).unwrap_err(), Error::CodeLength(0));
        assert_eq!(LshModel::train(4, 4097, 1).unwrap_err(), Error::CodeLength(4097));
        assert!(FeatureMatrix::new(0, 3, vec![]).is_err());
        assert!(FeatureMatrix::new(1, 2, vec![1.0]).is_err());
        assert!(FeatureMatrix::new(1, 2, vec![1.0, f32::NAN]).is_err());
    }

    #[test]
    fn projection_mean_is_near_zero() {
        let (q, dim) = (64, 512);
        let model = LshModel::train(dim, q, 2024).unwrap();
        let n = (q * dim) as f64;
        let mean = model.projections().iter().sum::<f64>() / n;
        let var = model.projections().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn zero_row_encodes_to_all_ones() {
        let model = LshModel::train(16, 33, 5).unwrap();
        let feats = FeatureMatrix::new(1, 16, vec![0.0; 16]).unwrap();
        let codes = model.encode(&feats).unwrap();
        assert_eq!(codes.get(0), &BinaryCode::ones(33).unwrap());
    }

    #[test]
    fn feature_along_projection_sets_its_bit() {
        let model = LshModel::train(8, 12, 9).unwrap();
        for q in 0..12 {
            let row: Vec<f32> = model.projection(q).iter().map(|&w| w as f32).collect();
            assert!(model.encode_row(&row).unwrap().get(q));
            let neg: Vec<f32> = row.iter().map(|x| -x).collect();
            assert!(!model.encode_row(&neg).unwrap().get(q));
        }
    }

    #[test]
    fn encode_is_deterministic_and_checks_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f32> = (0..50 * 10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let feats = FeatureMatrix::new(50, 10, values).unwrap();
        let model = lsh_train(10, 16, 11).unwrap();
        assert_eq!(lsh_encode(&model, &feats).unwrap(), lsh_encode(&model, &feats).unwrap());

        let other = LshModel::train(11, 16, 11).unwrap();
        assert_eq!(
            other.encode(&feats).unwrap_err(),
            Error::DimensionMismatch { expected: 11, found: 10 }
        );
    }

    fn ranks(xs: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        let mut r = vec![0.0; xs.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        let (ra, rb) = (ranks(a), ranks(b));
        let n = a.len() as f64;
        let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
        let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn distance_grows_with_angle() {
        let (dim, q) = (32, 256);
        let model = LshModel::train(dim, q, 77).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let mut angles = Vec::new();
        let mut dists = Vec::new();
        for step in 0..20 {
            let theta = std::f64::consts::PI * step as f64 / 20.0;
            let mut total = 0.0;
            for _ in 0..30 {
                // orthonormal pair (u, w), then x = u, y = cos θ u + sin θ w
                let u: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                let u: Vec<f64> = u.iter().map(|x| x / nu).collect();
                let w: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let proj: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
                let w: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a - proj * b).collect();
                let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                let x: Vec<f32> = u.iter().map(|&v| v as f32).collect();
                let y: Vec<f32> = u
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| (theta.cos() * a + theta.sin() * b / nw) as f32)
                    .collect();
                let cx = model.encode_row(&x).unwrap();
                let cy = model.encode_row(&y).unwrap();
                total += cx.distance(&cy).unwrap() as f64;
            }
            angles.push(theta);
            dists.push(total / 30.0);
        }
        let rho = spearman(&angles, &dists);
        assert!(rho > 0.9, "rank correlation {rho}");
    }
}
