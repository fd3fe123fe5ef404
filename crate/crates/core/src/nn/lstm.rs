use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{sigmoid, Param};

/// Memory of an LSTM cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        }
    }
}

/// LSTM cell with gates stacked `[input, forget, cell, output]`:
///
/// ```text
/// z = W_x a + W_h h_prev + b
/// i = σ(z_i), f = σ(z_f), g = tanh(z_g), o = σ(z_o)
/// c = f ⊙ c_prev + i ⊙ g
/// h = o ⊙ tanh(c)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub w_x: Param,
    pub w_h: Param,
    pub b: Param,
    input: usize,
    hidden: usize,
}

crate::impl_module!(Lstm { w_x, w_h, b });

#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    // Gram-Schmidt on a Gaussian matrix, row by row.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for r in &rows {
            let d: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(r) {
                *x -= d * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    rows.concat()
}

impl Lstm {
    /// Glorot-uniform input weights, orthogonal recurrent blocks, forget
    /// bias 1.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (input + hidden) as f64).sqrt();
        let w_x = Param::uniform(&[4 * hidden, input], bound, rng);
        let mut w_h = Param::zeros(&[4 * hidden, hidden]);
        for gate in 0..4 {
            let q = orthogonal(hidden, rng);
            w_h.value.data_mut()[gate * hidden * hidden..(gate + 1) * hidden * hidden].copy_from_slice(&q);
        }
        let mut b = Param::zeros(&[4 * hidden]);
        b.value.data_mut()[hidden..2 * hidden].fill(1.0);
        Self {
            w_x,
            w_h,
            b,
            input,
            hidden,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Param::zeros(&[4 * hidden, input]),
            w_h: Param::zeros(&[4 * hidden, hidden]),
            b: Param::zeros(&[4 * hidden]),
            input,
            hidden,
        }
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn step(&self, state: &LstmState, x: &[f64]) -> (LstmState, LstmCache) {
        let (n_in, h) = (self.input, self.hidden);
        debug_assert_eq!(x.len(), n_in);
        let (wx, wh) = (self.w_x.w(), self.w_h.w());
        let mut z = self.b.w().to_vec();
        for (r, zr) in z.iter_mut().enumerate() {
            let mut s = 0.0;
            for (a, b) in wx[r * n_in..(r + 1) * n_in].iter().zip(x) {
                s += a * b;
            }
            for (a, b) in wh[r * h..(r + 1) * h].iter().zip(&state.h) {
                s += a * b;
            }
            *zr += s;
        }
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = if k / h == 2 { zk.tanh() } else { sigmoid(*zk) };
        }
        let (gi, gf, gg, go) = (&z[..h], &z[h..2 * h], &z[2 * h..3 * h], &z[3 * h..]);
        let c: Vec<f64> = (0..h).map(|k| gf[k] * state.c[k] + gi[k] * gg[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let hn: Vec<f64> = (0..h).map(|k| go[k] * tanh_c[k]).collect();
        let cache = LstmCache {
            x: x.to_vec(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            gates: z,
            tanh_c,
        };
        (LstmState { c, h: hn }, cache)
    }

    /// Backpropagate through one step. `dh` and `dc` are gradients w.r.t. the
    /// step's output state; returns `(dx, dh_prev, dc_prev)`.
    pub fn backward(
        &mut self,
        cache: &LstmCache,
        dh: &[f64],
        dc: &[f64],
        acc: bool,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n_in, h) = (self.input, self.hidden);
        let gt = &cache.gates;
        let (gi, gf, gg, go) = (&gt[..h], &gt[h..2 * h], &gt[2 * h..3 * h], &gt[3 * h..]);
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let tc = cache.tanh_c[k];
            let dct = dc[k] + dh[k] * go[k] * (1.0 - tc * tc);
            dz[k] = dct * gg[k] * gi[k] * (1.0 - gi[k]);
            dz[h + k] = dct * cache.c_prev[k] * gf[k] * (1.0 - gf[k]);
            dz[2 * h + k] = dct * gi[k] * (1.0 - gg[k] * gg[k]);
            dz[3 * h + k] = dh[k] * tc * go[k] * (1.0 - go[k]);
            dc_prev[k] = dct * gf[k];
        }
        let mut dx = vec![0.0; n_in];
        let mut dh_prev = vec![0.0; h];
        {
            let (wx, wh) = (self.w_x.w(), self.w_h.w());
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (o, &w) in dx.iter_mut().zip(&wx[r * n_in..(r + 1) * n_in]) {
                    *o += d * w;
                }
                for (o, &w) in dh_prev.iter_mut().zip(&wh[r * h..(r + 1) * h]) {
                    *o += d * w;
                }
            }
        }
        if acc {
            let gwx = self.w_x.g();
            for (r, &d) in dz.iter().enumerate() {
                for (g, &xv) in gwx[r * n_in..(r + 1) * n_in].iter_mut().zip(&cache.x) {
                    *g += d * xv;
                }
            }
            let gwh = self.w_h.g();
            for (r, &d) in dz.iter().enumerate() {
                for (g, &hv) in gwh[r * h..(r + 1) * h].iter_mut().zip(&cache.h_prev) {
                    *g += d * hv;
                }
            }
            for (g, &d) in self.b.g().iter_mut().zip(&dz) {
                *g += d;
            }
        }
        (dx, dh_prev, dc_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{check_input, check_module};
    use crate::nn::Module;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randv(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_weights_give_zero_hidden() {
        let l = Lstm::zeros(3, 4);
        let (s, _) = l.step(&LstmState::zeros(4), &[0.0; 3]);
        assert_eq!(s.h, vec![0.0; 4]);
    }

    #[test]
    fn saturated_forget_gate_preserves_cell() {
        let mut l = Lstm::zeros(3, 4);
        l.b.value.data_mut()[4..8].fill(40.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c0 = randv(4, &mut rng);
        let mut s = LstmState {
            c: c0.clone(),
            h: vec![0.0; 4],
        };
        for _ in 0..10 {
            s = l.step(&s, &randv(3, &mut rng)).0;
        }
        for (a, b) in s.c.iter().zip(&c0) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn recurrent_blocks_are_orthogonal() {
        let l = Lstm::new(2, 5, &mut ChaCha8Rng::seed_from_u64(4));
        let w = l.w_h.w();
        for i in 0..5 {
            for j in 0..5 {
                let d: f64 = (0..5).map(|k| w[i * 5 + k] * w[j * 5 + k]).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        assert_eq!(&l.b.w()[5..10], &[1.0; 5]);
    }

    fn unroll_loss(l: &mut Lstm, xs: &[Vec<f64>], s0: &LstmState, r: &[f64], rc: &[f64], backward: bool) -> (f64, Vec<Vec<f64>>) {
        let mut s = s0.clone();
        let mut caches = Vec::new();
        for x in xs {
            let (n, c) = l.step(&s, x);
            caches.push(c);
            s = n;
        }
        let loss: f64 = s.h.iter().zip(r).map(|(a, b)| a * b).sum::<f64>()
            + s.c.iter().zip(rc).map(|(a, b)| a * b).sum::<f64>();
        let mut dxs = vec![Vec::new(); xs.len()];
        if backward {
            let (mut dh, mut dc) = (r.to_vec(), rc.to_vec());
            for (k, c) in caches.iter().enumerate().rev() {
                let (dx, dhp, dcp) = l.backward(c, &dh, &dc, true);
                dxs[k] = dx;
                dh = dhp;
                dc = dcp;
            }
        }
        (loss, dxs)
    }

    #[test]
    fn five_step_unroll_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let l = Lstm::new(3, 4, &mut rng);
            let xs: Vec<Vec<f64>> = (0..5).map(|_| randv(3, &mut rng)).collect();
            let s0 = LstmState {
                c: randv(4, &mut rng),
                h: randv(4, &mut rng),
            };
            let r = randv(4, &mut rng);
            let rc = randv(4, &mut rng);
            let report = check_module(l.clone(), |m| {
                m.zero_grad();
                unroll_loss(m, &xs, &s0, &r, &rc, true).0
            });
            assert!(report.max_rel_err < 1e-4, "{report:?}");

            let mut lx = l.clone();
            let report = check_input(&xs[0], |x0| {
                let mut xs2 = xs.clone();
                xs2[0] = x0.to_vec();
                let (v, dxs) = unroll_loss(&mut lx, &xs2, &s0, &r, &rc, true);
                (v, dxs[0].clone())
            });
            assert!(report.max_rel_err < 1e-4, "{report:?}");
        }
    }
}
