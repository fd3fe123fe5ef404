use rand::Rng;

use super::{check_len, Param};
use crate::error::{Error, Result};

const LEAK: f64 = 0.2;

/// 2-D transposed convolution over `[channels, height, width]` maps.
/// Weights are laid out `[in, out, kh, kw]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2d {
    pub w: Param,
    pub b: Param,
    in_c: usize,
    out_c: usize,
    kernel: (usize, usize),
    stride: (usize, usize),
    pad: (usize, usize),
}

crate::impl_module!(ConvTranspose2d { w, b });

impl ConvTranspose2d {
    pub fn new<R: Rng + ?Sized>(
        in_c: usize,
        out_c: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        pad: (usize, usize),
        rng: &mut R,
    ) -> Self {
        let fan_in = (in_c * kernel.0 * kernel.1) as f64 / (stride.0 * stride.1) as f64;
        Self {
            w: Param::uniform(&[in_c, out_c, kernel.0, kernel.1], (3.0 / fan_in).sqrt(), rng),
            b: Param::zeros(&[out_c]),
            in_c,
            out_c,
            kernel,
            stride,
            pad,
        }
    }

    pub fn output_size(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let oh = ((h - 1) * self.stride.0 + self.kernel.0).checked_sub(2 * self.pad.0)?;
        let ow = ((w - 1) * self.stride.1 + self.kernel.1).checked_sub(2 * self.pad.1)?;
        (oh > 0 && ow > 0).then_some((oh, ow))
    }

    /// Calls `f(input_index, output_index, weight_index)` for every
    /// connection of the layer.
    #[inline]
    fn for_each_tap(&self, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize)) {
        let (oh, ow) = self.output_size(h, w).expect("validated shape");
        let (kh, kw) = self.kernel;
        for ic in 0..self.in_c {
            for iy in 0..h {
                for ix in 0..w {
                    let i_idx = (ic * h + iy) * w + ix;
                    for oc in 0..self.out_c {
                        for ky in 0..kh {
                            let y = (iy * self.stride.0 + ky) as isize - self.pad.0 as isize;
                            if y < 0 || y as usize >= oh {
                                continue;
                            }
                            for kx in 0..kw {
                                let x = (ix * self.stride.1 + kx) as isize - self.pad.1 as isize;
                                if x < 0 || x as usize >= ow {
                                    continue;
                                }
                                let o_idx = (oc * oh + y as usize) * ow + x as usize;
                                let w_idx = ((ic * self.out_c + oc) * kh + ky) * kw + kx;
                                f(i_idx, o_idx, w_idx);
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, input: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
        debug_assert_eq!(input.len(), self.in_c * h * w);
        let (oh, ow) = self.output_size(h, w).expect("validated shape");
        let mut out = vec![0.0; self.out_c * oh * ow];
        for (oc, &b) in self.b.w().iter().enumerate() {
            out[oc * oh * ow..(oc + 1) * oh * ow].fill(b);
        }
        let wt = self.w.w();
        self.for_each_tap(h, w, |i, o, k| out[o] += input[i] * wt[k]);
        (out, oh, ow)
    }

    pub fn backward(&mut self, input: &[f64], h: usize, w: usize, dout: &[f64], acc: bool) -> Vec<f64> {
        let (oh, ow) = self.output_size(h, w).expect("validated shape");
        let mut din = vec![0.0; input.len()];
        {
            let wt = self.w.w();
            self.for_each_tap(h, w, |i, o, k| din[i] += dout[o] * wt[k]);
        }
        if acc {
            let mut gw = vec![0.0; self.w.value.len()];
            self.for_each_tap(h, w, |i, o, k| gw[k] += dout[o] * input[i]);
            for (g, d) in self.w.g().iter_mut().zip(gw) {
                *g += d;
            }
            let area = oh * ow;
            for (oc, g) in self.b.g().iter_mut().enumerate() {
                *g += dout[oc * area..(oc + 1) * area].iter().sum::<f64>();
            }
        }
        din
    }
}

/// Transposed-convolution stack projecting a vector of length `H_o`
/// (viewed as an `H_o x 1 x 1` map) onto a `D1 x D2` matrix. Leaky
/// rectifiers sit between layers; the last layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct DeconvStack {
    pub layers: Vec<ConvTranspose2d>,
    input: usize,
    out_shape: (usize, usize),
}

crate::impl_module!(DeconvStack { layers });

#[derive(Debug, Clone)]
pub struct DeconvCache {
    /// Input map of each layer (after the previous activation).
    inputs: Vec<(Vec<f64>, usize, usize)>,
    /// Pre-activation output of each layer.
    pre: Vec<Vec<f64>>,
}

impl DeconvCache {
    /// Smallest distance of any hidden pre-activation from the rectifier kink.
    pub fn min_abs_hidden_preactivation(&self) -> f64 {
        self.pre[..self.pre.len() - 1]
            .iter()
            .flatten()
            .fold(f64::INFINITY, |m, &v| m.min(v.abs()))
    }
}

impl DeconvStack {
    pub fn new(input: usize, layers: Vec<ConvTranspose2d>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Config("deconvolution stack needs at least one layer".into()))?;
        if first.in_c != input {
            return Err(Error::Dimension(format!(
                "first layer takes {} channels, input has {input}",
                first.in_c
            )));
        }
        let (mut c, mut h, mut w) = (input, 1, 1);
        for (i, l) in layers.iter().enumerate() {
            if l.in_c != c {
                return Err(Error::Dimension(format!("layer {i} expects {} channels, got {c}", l.in_c)));
            }
            (h, w) = l
                .output_size(h, w)
                .ok_or_else(|| Error::Dimension(format!("layer {i} produces an empty map")))?;
            c = l.out_c;
        }
        if c != 1 {
            return Err(Error::Dimension(format!("last layer must emit one channel, emits {c}")));
        }
        Ok(Self {
            layers,
            input,
            out_shape: (h, w),
        })
    }

    /// A `(D1/4 x D2/4)` projection followed by two stride-2 upsampling
    /// layers.
    pub fn standard<R: Rng + ?Sized>(input: usize, d1: usize, d2: usize, channels: usize, rng: &mut R) -> Result<Self> {
        if !d1.is_multiple_of(4) || !d2.is_multiple_of(4) || d1 == 0 || d2 == 0 {
            return Err(Error::Config(format!("output {d1}x{d2} must be a positive multiple of 4")));
        }
        let layers = vec![
            ConvTranspose2d::new(input, channels, (d1 / 4, d2 / 4), (1, 1), (0, 0), rng),
            ConvTranspose2d::new(channels, channels, (4, 4), (2, 2), (1, 1), rng),
            ConvTranspose2d::new(channels, 1, (4, 4), (2, 2), (1, 1), rng),
        ];
        Self::new(input, layers)
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    /// `(D1, D2)`.
    pub fn output_shape(&self) -> (usize, usize) {
        self.out_shape
    }

    pub fn try_forward(&self, o: &[f64]) -> Result<(Vec<f64>, DeconvCache)> {
        check_len(o.len(), self.input, "deconvolution input")?;
        Ok(self.forward(o))
    }

    pub fn forward(&self, o: &[f64]) -> (Vec<f64>, DeconvCache) {
        let mut cur = (o.to_vec(), 1, 1);
        let mut cache = DeconvCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let (z, h, w) = l.forward(&cur.0, cur.1, cur.2);
            let act = if i < last {
                z.iter().map(|&v| if v > 0.0 { v } else { LEAK * v }).collect()
            } else {
                z.clone()
            };
            cache.inputs.push(std::mem::replace(&mut cur, (act, h, w)));
            cache.pre.push(z);
        }
        (cur.0, cache)
    }

    pub fn backward(&mut self, cache: &DeconvCache, d_out: &[f64], acc: bool) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut grad = d_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            if i < last {
                for (g, &z) in grad.iter_mut().zip(&cache.pre[i]) {
                    if z <= 0.0 {
                        *g *= LEAK;
                    }
                }
            }
            let (inp, h, w) = &cache.inputs[i];
            grad = self.layers[i].backward(inp, *h, *w, &grad, acc);
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_input, check_module};
    use crate::nn::Module;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_shape_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = DeconvStack::standard(6, 32, 16, 3, &mut rng).unwrap();
        assert_eq!(s.output_shape(), (32, 16));
        for _ in 0..5 {
            let o: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert_eq!(s.forward(&o).0.len(), 32 * 16);
        }
        assert!(s.try_forward(&[0.0; 5]).is_err());
        assert!(DeconvStack::standard(6, 30, 16, 3, &mut rng).is_err());
    }

    #[test]
    fn zero_weights_give_zero_matrix() {
        let mut s = DeconvStack::standard(4, 8, 8, 2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let n = s.param_count();
        s.set_flat_values(&vec![0.0; n]);
        assert!(s.forward(&[1.0, -2.0, 0.5, 3.0]).0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_tap_layout() {
        // 1x1 input, 2x2 kernel, stride 1: output equals the kernel scaled by
        // the input value.
        let mut l = ConvTranspose2d::new(1, 1, (2, 2), (1, 1), (0, 0), &mut ChaCha8Rng::seed_from_u64(3));
        l.w.value.data_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let (out, h, w) = l.forward(&[2.0], 1, 1);
        assert_eq!((h, w), (2, 2));
        assert_eq!(out, vec![2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn rejects_inconsistent_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = ConvTranspose2d::new(3, 2, (2, 2), (1, 1), (0, 0), &mut rng);
        let b = ConvTranspose2d::new(3, 1, (2, 2), (1, 1), (0, 0), &mut rng);
        assert!(DeconvStack::new(3, vec![a.clone(), b]).is_err());
        assert!(DeconvStack::new(3, vec![a]).is_err());
        assert!(DeconvStack::new(3, vec![]).is_err());
    }

    fn loss(s: &mut DeconvStack, o: &[f64], r: &[f64], backward: bool) -> (f64, Vec<f64>) {
        let (y, cache) = s.forward(o);
        let v = y.iter().zip(r).map(|(a, b)| a * b).sum();
        let d = if backward { s.backward(&cache, r, true) } else { Vec::new() };
        (v, d)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut done = 0;
        while done < 10 {
            let s = DeconvStack::standard(3, 8, 4, 2, &mut rng).unwrap();
            let o: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            if s.forward(&o).1.min_abs_hidden_preactivation() < 1e-3 {
                continue;
            }
            let r: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
            let report = check_module(s.clone(), |m| {
                m.zero_grad();
                loss(m, &o, &r, true).0
            });
            assert!(report.max_rel_err < 1e-4, "{report:?}");
            let mut s2 = s.clone();
            let report = check_input(&o, |x| loss(&mut s2, x, &r, true));
            assert!(report.max_rel_err < 1e-4, "{report:?}");
            done += 1;
        }
    }
}
