use super::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam with one moment pair per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(config: AdamConfig, sizes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = sizes.into_iter().map(|n| (vec![F::zero(); n], vec![F::zero(); n])).unzip();
        Adam { config, step: 0, m, v }
    }

    pub fn update(&mut self, params: &mut [Vec<F>], grads: &[Vec<F>]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
        let bc1 = F::of(1.0 - c.beta1.powi(self.step as i32));
        let bc2 = F::of(1.0 - c.beta2.powi(self.step as i32));
        let (lr, eps, one) = (F::of(c.lr), F::of(c.eps), F::one());
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] = p[i] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![vec![1.5f64, -2.0]];
        let mut opt = Adam::new(AdamConfig::new(0.1), [2]);
        for _ in 0..5 {
            opt.update(&mut p, &[vec![0.0, 0.0]]);
        }
        assert_eq!(p, vec![vec![1.5, -2.0]]);
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        for g in [1e-3, 0.5, -7.0, 300.0] {
            let mut p = vec![vec![0.0f64]];
            let mut opt = Adam::new(AdamConfig::new(0.01), [1]);
            opt.update(&mut p, &[vec![g]]);
            let expected = -0.01 * g / (g.abs() + 1e-8);
            assert!((p[0][0] - expected).abs() < 1e-15);
            assert!((p[0][0].abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn quadratic_bowl_descends() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * (v - 1.0).powi(2)).sum::<f64>();
        let mut p = vec![vec![-3.0, 4.0, 0.5]];
        let mut opt = Adam::new(AdamConfig::new(0.01), [3]);
        let mut losses = Vec::new();
        for _ in 0..100 {
            let g: Vec<f64> = p[0].iter().enumerate().map(|(i, v)| 2.0 * (i + 1) as f64 * (v - 1.0)).collect();
            opt.update(&mut p, &[g]);
            losses.push(f(&p[0]));
        }
        for w in losses[5..].windows(2) {
            assert!(w[1] < w[0], "{losses:?}");
        }
    }
}
