use rand::Rng;

use super::Param;
use crate::error::{Error, Result};

/// Lookup table `[vocab, dim]`. Inputs are (possibly soft) indicator vectors,
/// so the forward pass is `table^T s`; a one-hot `s` selects one row.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub table: Param,
    vocab: usize,
    dim: usize,
}

crate::impl_module!(Embedding { table });

impl Embedding {
    pub fn new<R: Rng + ?Sized>(vocab: usize, dim: usize, rng: &mut R) -> Self {
        Self {
            table: Param::normal(&[vocab, dim], 1.0 / (dim as f64).sqrt(), rng),
            vocab,
            dim,
        }
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lookup(&self, id: usize) -> Result<Vec<f64>> {
        if id >= self.vocab {
            return Err(Error::Range(format!("id {id} outside vocabulary of {}", self.vocab)));
        }
        Ok(self.table.w()[id * self.dim..(id + 1) * self.dim].to_vec())
    }

    pub fn forward(&self, s: &[f64]) -> Vec<f64> {
        debug_assert_eq!(s.len(), self.vocab);
        let mut out = vec![0.0; self.dim];
        let t = self.table.w();
        for (i, &w) in s.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(&t[i * self.dim..(i + 1) * self.dim]) {
                *o += w * v;
            }
        }
        out
    }

    /// Returns `dL/ds`. Only rows with nonzero weight in `s` receive
    /// parameter gradient.
    pub fn backward(&mut self, s: &[f64], dy: &[f64], acc: bool) -> Vec<f64> {
        let dim = self.dim;
        let ds: Vec<f64> = {
            let t = self.table.w();
            (0..self.vocab)
                .map(|i| t[i * dim..(i + 1) * dim].iter().zip(dy).map(|(a, b)| a * b).sum())
                .collect()
        };
        if acc {
            let g = self.table.g();
            for (i, &w) in s.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (gv, &d) in g[i * dim..(i + 1) * dim].iter_mut().zip(dy) {
                    *gv += w * d;
                }
            }
        }
        ds
    }
}

pub fn one_hot(id: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[id] = 1.0;
    v
}
