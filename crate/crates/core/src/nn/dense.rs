use rand::Rng;

use super::{check_len, Param};
use crate::error::Result;

/// Affine map `y = W x + b` with `W` stored as `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Param,
    pub b: Param,
    inputs: usize,
    outputs: usize,
}

crate::impl_module!(Dense { w, b });

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            w: Param::uniform(&[outputs, inputs], bound, rng),
            b: Param::zeros(&[outputs]),
            inputs,
            outputs,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Param::zeros(&[outputs, inputs]),
            b: Param::zeros(&[outputs]),
            inputs,
            outputs,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn try_forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x.len(), self.inputs, "dense input")?;
        Ok(self.forward(x))
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        let w = self.w.w();
        self.b
            .w()
            .iter()
            .enumerate()
            .map(|(o, &b)| {
                let row = &w[o * self.inputs..(o + 1) * self.inputs];
                b + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
            })
            .collect()
    }

    /// Returns `dL/dx`; accumulates `dL/dW`, `dL/db` when `acc` is set.
    pub fn backward(&mut self, x: &[f64], dy: &[f64], acc: bool) -> Vec<f64> {
        debug_assert_eq!(dy.len(), self.outputs);
        let n_in = self.inputs;
        let mut dx = vec![0.0; n_in];
        {
            let w = self.w.w();
            for (o, &g) in dy.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &w[o * n_in..(o + 1) * n_in];
                for (d, &wv) in dx.iter_mut().zip(row) {
                    *d += g * wv;
                }
            }
        }
        if acc {
            let gw = self.w.g();
            for (o, &g) in dy.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                for (d, &xv) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                    *d += g * xv;
                }
            }
            for (d, &g) in self.b.g().iter_mut().zip(dy) {
                *d += g;
            }
        }
        dx
    }
}
