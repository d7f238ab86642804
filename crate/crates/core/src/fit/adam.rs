/// Learning rates and moment parameters for [`Adam`].
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub lr_mean: f64,
    /// The mean learning rate decays exponentially to `lr_mean * lr_mean_final` over the run.
    pub lr_mean_final: f64,
    pub lr_rotation: f64,
    pub lr_log_scale: f64,
    pub lr_opacity: f64,
    pub lr_sh_dc: f64,
    pub lr_sh_rest: f64,
    pub lr_normal: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr_mean: 1.6e-4,
            lr_mean_final: 0.01,
            lr_rotation: 1e-3,
            lr_log_scale: 5e-3,
            lr_opacity: 5e-2,
            lr_sh_dc: 2.5e-3,
            lr_sh_rest: 1.25e-4,
            lr_normal: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-15,
        }
    }
}

impl OptimizerConfig {
    /// Mean learning rate at `step` of a `steps`-long run.
    pub fn mean_lr_at(&self, step: usize, steps: usize) -> f64 {
        let t = if steps > 1 { step as f64 / (steps - 1) as f64 } else { 0.0 };
        self.lr_mean * self.lr_mean_final.powf(t)
    }
}

/// Adaptive moment estimation over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, cfg: &OptimizerConfig) -> Self {
        Self {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// One update with a per-parameter learning rate.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lrs: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        assert_eq!(lrs.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lrs[i] * mh / (vh.sqrt() + self.eps);
        }
    }
}
