//! Named parameter storage: a flat, insertion-ordered vector of matrices
//! with a name index. Order is the canonical serialization and optimizer
//! order, so construction must be deterministic.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::mat::Mat;

#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    pub mats: Vec<Mat>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, mat: Mat) -> usize {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter {name}"
        );
        let idx = self.mats.len();
        self.names.push(name.to_string());
        self.mats.push(mat);
        self.index.insert(name.to_string(), idx);
        idx
    }

    pub fn idx(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> &Mat {
        &self.mats[self.idx(name)]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Mat {
        let i = self.idx(name);
        &mut self.mats[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn total_scalars(&self) -> usize {
        self.mats.iter().map(|m| m.data.len()).sum()
    }

    /// Fresh zero matrices with the same shapes (gradient/optimizer state).
    pub fn zeros_like(&self) -> Vec<Mat> {
        self.mats.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect()
    }

    /// Name/matrix pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.names.iter().map(String::as_str).zip(self.mats.iter())
    }
}

/// Linear-layer weight: normal with std 1/sqrt(fan_in) for `x . W`,
/// W: fan_in x fan_out.
pub fn init_linear(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Mat {
    let n = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).unwrap();
    let data = (0..fan_in * fan_out).map(|_| n.sample(rng)).collect();
    Mat::from_vec(fan_in, fan_out, data)
}

/// Embedding-style init: small independent normal entries.
pub fn init_embedding(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let n = Normal::new(0.0, 0.02).unwrap();
    let data = (0..rows * cols).map(|_| n.sample(rng)).collect();
    Mat::from_vec(rows, cols, data)
}

pub fn ones(rows: usize, cols: usize) -> Mat {
    Mat::from_vec(rows, cols, vec![1.0; rows * cols])
}
