use super::Module;

/// Adam with bias correction. Moments are kept in the flat parameter order
/// defined by [`Module::visit`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Apply one update from the accumulated gradients, then zero them.
    pub fn step<M: Module + ?Sized>(&mut self, model: &mut M) {
        if self.m.is_empty() {
            let n = model.param_count();
            self.m = vec![0.0; n];
            self.v = vec![0.0; n];
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut off = 0;
        model.visit_mut("", &mut |_, p| {
            let n = p.value.len();
            let super::Param { value, grad } = p;
            let g = grad.data_mut();
            for ((w, gi), k) in value.data_mut().iter_mut().zip(g.iter_mut()).zip(off..off + n) {
                m[k] = b1 * m[k] + (1.0 - b1) * *gi;
                v[k] = b2 * v[k] + (1.0 - b2) * *gi * *gi;
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                *w -= lr * mh / (vh.sqrt() + eps);
                *gi = 0.0;
            }
            off += n;
        });
        assert_eq!(off, m.len(), "optimizer bound to a different model");
    }
}
